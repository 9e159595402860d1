//! Ready-made instances: one recourse model per class, base measures,
//! mean-risk models and perturbation schemes. The CLI examples, the
//! acceptance suite and the README all use these.

use crate::error::Result;
use crate::meanrisk::{DecisionSet, MeanRiskModel};
use crate::measure::{empirical, DiscreteMeasure};
use crate::optim::ConvexExpr;
use crate::recourse::{ParamMap, RecourseModel};
use crate::risk::RiskSpec;
use crate::sampler::Sampler;
use crate::stability::PerturbationScheme;

/// Curvature exponent of the convex demo objective `y1^2 + y2^2`.
pub const CONVEX_GAMMA_V: f64 = 2.0;
/// Declared growth exponent of the relaxed feasible-set distance for the convex demo.
pub const CONVEX_GAMMA_K: f64 = 0.5;

fn z_minus_x() -> ParamMap<f64> {
    ParamMap::affine(vec![vec![-1.0]], vec![vec![1.0]], vec![0.0]).expect("affine map")
}

/// Simple recourse `f(x, z) = |x - z|`: `min y+ + y-` with `y+ - y- = x - z`.
pub fn linear_recourse() -> RecourseModel<f64> {
    RecourseModel::Linear {
        a: vec![vec![1.0, -1.0]],
        q: ParamMap::constant(vec![1.0, 1.0], 1, 1),
        h: ParamMap::affine(vec![vec![1.0]], vec![vec![-1.0]], vec![0.0]).expect("affine map"),
    }
}

/// `f(x, z) = ceil(z - x)^+`: one continuous slack and one integer unit.
pub fn milp_recourse() -> RecourseModel<f64> {
    RecourseModel::Milp {
        a: vec![vec![-1.0, 1.0]],
        q: vec![0.0, 1.0],
        m1: 1,
        m2: 1,
        h: z_minus_x(),
        integer_bounds: vec![(0, 2000)],
    }
}

/// `min y1^2 + y2^2 - x y1  s.t.  y1 + y2 >= -z`, `y2` integer.
pub fn miqp_recourse() -> RecourseModel<f64> {
    RecourseModel::Miqp {
        d: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        a: vec![vec![-1.0, -1.0]],
        q: ParamMap::affine(
            vec![vec![-1.0], vec![0.0]],
            vec![vec![0.0], vec![0.0]],
            vec![0.0, 0.0],
        )
        .expect("affine map"),
        h: ParamMap::affine(vec![vec![0.0]], vec![vec![1.0]], vec![0.0]).expect("affine map"),
        m1: 1,
        m2: 1,
        integer_bounds: vec![(-2000, 2000)],
    }
}

/// `min y1^2 + y2^2  s.t.  y1 + y2 >= x - z`, `y2 in {0, .., 3}`.
pub fn convex_recourse() -> RecourseModel<f64> {
    RecourseModel::ConvexMip {
        v: ConvexExpr::Sum(vec![
            ConvexExpr::pow(2, ConvexExpr::var(0)),
            ConvexExpr::pow(2, ConvexExpr::var(1)),
        ]),
        g: vec![ConvexExpr::affine(vec![-1.0, -1.0], 0.0)],
        h: z_minus_x(),
        m1: 1,
        m2: 1,
        integer_bounds: vec![(0, 3)],
        continuous_box: vec![(-2000.0, 2000.0)],
    }
}

/// The four demo recourse models with their names and growth exponents.
pub fn recourse_models() -> Result<Vec<(&'static str, RecourseModel<f64>, f64)>> {
    [
        ("linear", linear_recourse()),
        ("milp", milp_recourse()),
        ("miqp", miqp_recourse()),
        ("convex_mip", convex_recourse()),
    ]
    .into_iter()
    .map(|(name, m)| {
        let gamma = m.growth_exponent(CONVEX_GAMMA_V, CONVEX_GAMMA_K)?;
        Ok((name, m, gamma))
    })
    .collect()
}

/// Five first-stage decisions spread over `[-2, 2]`.
pub fn x_grid() -> Vec<Vec<f64>> {
    vec![vec![-2.0], vec![-1.0], vec![0.0], vec![1.0], vec![2.0]]
}

/// 200 equally weighted draws from `N(0.2, 1)`.
pub fn base_measure() -> Result<DiscreteMeasure<f64>> {
    let s = Sampler::Normal {
        mean: vec![0.2],
        std: vec![1.0],
    };
    empirical(&s, 200, 7)
}

/// `delta_0.1` smoothed into 51 equal atoms on `[0.05, 0.15]`.
pub fn smoothed_dirac() -> Result<DiscreteMeasure<f64>> {
    DiscreteMeasure::canonicalize((0..=50).map(|k| (vec![0.05 + 0.1 * k as f64 / 50.0], 1.0)))
}

pub fn decisions() -> Result<DecisionSet<f64>> {
    DecisionSet::grid(&[-1.5], &[1.5], &[13])
}

/// Expectation of the simple recourse over [`decisions`].
pub fn expectation_model() -> Result<MeanRiskModel<f64>> {
    MeanRiskModel::new(
        linear_recourse(),
        RiskSpec::Expectation,
        decisions()?,
        1.0,
        2.0,
    )
}

/// AV@R at level 0.5 of the simple recourse over [`decisions`].
pub fn avar_model() -> Result<MeanRiskModel<f64>> {
    MeanRiskModel::new(
        linear_recourse(),
        RiskSpec::AVaR { alpha: 0.5 },
        decisions()?,
        1.0,
        2.0,
    )
}

/// Expectation model whose unique minimizer around [`smoothed_dirac`] is
/// `x = 0`, with every other decision at least 0.15 worse.
pub fn strict_minimizer_model() -> Result<MeanRiskModel<f64>> {
    let d = DecisionSet::grid(&[-1.0], &[1.0], &[9])?;
    MeanRiskModel::new(linear_recourse(), RiskSpec::Expectation, d, 1.0, 2.0)
}

pub fn saa_scheme(seed: u64) -> PerturbationScheme<f64> {
    PerturbationScheme::Saa {
        n_schedule: vec![100, 1000, 10_000],
        seed,
    }
}

/// Mass `1/n` pushed to `sqrt(n)`, which keeps the second moment gap at one.
pub fn escape_scheme() -> PerturbationScheme<f64> {
    PerturbationScheme::Escape {
        n_schedule: vec![10, 100, 1000, 10_000, 100_000],
        direction: vec![1.0],
        exponent: 2.0,
    }
}

pub fn contamination_scheme() -> Result<PerturbationScheme<f64>> {
    Ok(PerturbationScheme::Contamination {
        direction: DiscreteMeasure::from_scalars(&[(-3.0, 0.5), (4.0, 0.5)])?,
        t_schedule: vec![0.5, 0.1, 0.01, 0.001, 0.0],
    })
}

/// Model for growth certification of one recourse class at the [`x_grid`] decisions.
pub fn growth_model(recourse: RecourseModel<f64>, gamma: f64) -> Result<MeanRiskModel<f64>> {
    MeanRiskModel::new(
        recourse,
        RiskSpec::Expectation,
        DecisionSet::new(x_grid())?,
        1.0,
        gamma,
    )
}

/// Log-uniform radii in `[1e-2, 1e3]`, random sign.
pub fn radial_sampler() -> Sampler<f64> {
    Sampler::Radial {
        dim: 1,
        min_radius: 1e-2,
        max_radius: 1e3,
    }
}

fn pretty<S: serde::Serialize>(v: &S) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Every demo input as `(file name, JSON text)`, in the form the CLI reads.
pub fn files() -> Result<Vec<(String, String)>> {
    let mut out = vec![
        (
            "expectation_model.json".to_string(),
            expectation_model()?.to_json()? + "\n",
        ),
        (
            "avar_model.json".to_string(),
            avar_model()?.to_json()? + "\n",
        ),
        (
            "strict_minimizer_model.json".to_string(),
            strict_minimizer_model()?.to_json()? + "\n",
        ),
        ("base_measure.json".to_string(), pretty(&base_measure()?)?),
        (
            "smoothed_dirac.json".to_string(),
            pretty(&smoothed_dirac()?)?,
        ),
        ("saa_scheme.json".to_string(), pretty(&saa_scheme(0))?),
        ("escape_scheme.json".to_string(), pretty(&escape_scheme())?),
        (
            "contamination_scheme.json".to_string(),
            pretty(&contamination_scheme()?)?,
        ),
        (
            "radial_sampler.json".to_string(),
            pretty(&radial_sampler())?,
        ),
    ];
    for (name, model, gamma) in recourse_models()? {
        out.push((
            format!("growth_{name}.json"),
            growth_model(model, gamma)?.to_json()? + "\n",
        ));
    }
    Ok(out)
}
