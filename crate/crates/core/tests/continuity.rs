//! Continuity of Q, phi and the argmin set along SAA sequences.

use riskstab::demo;
use riskstab::meanrisk::{argmin_set, phi, DEFAULT_ARGMIN_TOL};
use riskstab::measure::empirical;
use riskstab::metrics::{bounded_lipschitz, moment_bound_certificate};
use riskstab::Evaluator;

fn sup_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn q_deviation_shrinks_along_saa_sequences() {
    let base = demo::base_measure().unwrap();
    let sampler = base.sampler();
    for model in [
        demo::expectation_model().unwrap(),
        demo::avar_model().unwrap(),
    ] {
        let ev = Evaluator::new(&model);
        let q0 = ev.q_all(&base).unwrap();
        for seed in 0..5 {
            let small = empirical(&sampler, 100, seed).unwrap();
            let large = empirical(&sampler, 10_000, seed).unwrap();
            assert!(moment_bound_certificate(
                &[small.clone(), large.clone()],
                1.0,
                1.0,
                10.0
            ));
            assert!(
                bounded_lipschitz(&large, &base).unwrap()
                    < bounded_lipschitz(&small, &base).unwrap()
            );
            let d_small = sup_deviation(&ev.q_all(&small).unwrap(), &q0);
            let d_large = sup_deviation(&ev.q_all(&large).unwrap(), &q0);
            assert!(
                d_large < 10.0 * d_small,
                "seed {seed}: {d_large} vs {d_small}"
            );

            // a finite minimum is 1-Lipschitz in the sup norm
            let dphi = (phi(&model, &large).unwrap() - phi(&model, &base).unwrap()).abs();
            assert!(dphi <= d_large);
        }
    }
}

#[test]
fn argmin_settles_on_the_strict_minimizer() {
    let model = demo::strict_minimizer_model().unwrap();
    let nu = demo::smoothed_dirac().unwrap();
    let reference = argmin_set(&model, &nu, DEFAULT_ARGMIN_TOL).unwrap();
    assert_eq!(reference, vec![vec![0.0]]);
    let sampler = nu.sampler();
    for seed in 0..5 {
        let nu_n = empirical(&sampler, 10_000, seed).unwrap();
        assert_eq!(
            argmin_set(&model, &nu_n, DEFAULT_ARGMIN_TOL).unwrap(),
            reference
        );
    }
}
