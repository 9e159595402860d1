//! Perturbation sequences `nu_k -> nu` and the experiment that records how
//! the optimal value and the optimal set of a mean-risk model respond.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::meanrisk::{argmin_excess, Evaluator, MeanRiskModel, DEFAULT_ARGMIN_TOL};
use crate::measure::{empirical, DiscreteMeasure};
use crate::metrics::{
    bounded_lipschitz, diagnose_uniform_integrability, geometric_grid, psi_metric,
    UniformIntegrabilityReport,
};
use crate::scalar::{euclidean_norm, Scalar};

/// How to build the sequence of perturbed measures from a base measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum PerturbationScheme<T: Scalar> {
    /// Empirical measures of `n` draws from the base.
    Saa { n_schedule: Vec<usize>, seed: u64 },
    /// `(1 - t) base + t direction`.
    Contamination {
        direction: DiscreteMeasure<T>,
        t_schedule: Vec<T>,
    },
    /// Every atom moved by independent uniform noise in `[-sigma, sigma]` per coordinate.
    Jitter { sigma_schedule: Vec<T>, seed: u64 },
    /// Coordinates rounded to the grid `Z / resolution`.
    Discretize { grid_schedule: Vec<usize> },
    /// `(1 - 1/n) base + (1/n) delta_{n^(1/exponent) direction}`: mass that
    /// vanishes while carrying a fixed `||.||^exponent` moment off to infinity.
    Escape {
        n_schedule: Vec<usize>,
        direction: Vec<T>,
        exponent: T,
    },
}

fn monotone<T: PartialOrd>(v: &[T], strict: bool, increasing: bool) -> bool {
    v.windows(2).all(|w| match (strict, increasing) {
        (true, true) => w[0] < w[1],
        (false, true) => w[0] <= w[1],
        (true, false) => w[0] > w[1],
        (false, false) => w[0] >= w[1],
    })
}

impl<T: Scalar> PerturbationScheme<T> {
    pub fn len(&self) -> usize {
        match self {
            PerturbationScheme::Saa { n_schedule, .. }
            | PerturbationScheme::Escape { n_schedule, .. } => n_schedule.len(),
            PerturbationScheme::Contamination { t_schedule, .. } => t_schedule.len(),
            PerturbationScheme::Jitter { sigma_schedule, .. } => sigma_schedule.len(),
            PerturbationScheme::Discretize { grid_schedule } => grid_schedule.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PerturbationScheme::Saa { .. } => "saa",
            PerturbationScheme::Contamination { .. } => "contamination",
            PerturbationScheme::Jitter { .. } => "jitter",
            PerturbationScheme::Discretize { .. } => "discretize",
            PerturbationScheme::Escape { .. } => "escape",
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            PerturbationScheme::Saa { seed, .. } | PerturbationScheme::Jitter { seed, .. } => {
                vec![*seed]
            }
            _ => vec![],
        }
    }

    /// The schedule value of step `k`, as reported in the `param` column.
    pub fn param(&self, k: usize) -> T {
        match self {
            PerturbationScheme::Saa { n_schedule, .. }
            | PerturbationScheme::Escape { n_schedule, .. } => T::from_usize_lossy(n_schedule[k]),
            PerturbationScheme::Contamination { t_schedule, .. } => t_schedule[k],
            PerturbationScheme::Jitter { sigma_schedule, .. } => sigma_schedule[k],
            PerturbationScheme::Discretize { grid_schedule } => {
                T::from_usize_lossy(grid_schedule[k])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidSpec(format!(
                "{} schedule is empty",
                self.kind()
            )));
        }
        let bad = |what: &str| {
            Err(Error::InvalidSpec(format!(
                "{} schedule {what}",
                self.kind()
            )))
        };
        match self {
            PerturbationScheme::Saa { n_schedule, .. } => {
                if n_schedule[0] == 0 || !monotone(n_schedule, true, true) {
                    return bad("must be increasing sample sizes >= 1");
                }
            }
            PerturbationScheme::Contamination { t_schedule, .. } => {
                let unit = t_schedule.iter().all(|&t| t >= T::zero() && t <= T::one());
                if !unit || !monotone(t_schedule, false, false) {
                    return bad("must be nonincreasing weights in [0,1]");
                }
            }
            PerturbationScheme::Jitter { sigma_schedule, .. } => {
                if sigma_schedule
                    .iter()
                    .any(|&s| !(s >= T::zero()) || !s.is_finite())
                    || !monotone(sigma_schedule, false, false)
                {
                    return bad("must be nonincreasing half-widths >= 0");
                }
            }
            PerturbationScheme::Discretize { grid_schedule } => {
                if grid_schedule[0] == 0 || !monotone(grid_schedule, true, true) {
                    return bad("must be increasing resolutions >= 1");
                }
            }
            PerturbationScheme::Escape {
                n_schedule,
                direction,
                exponent,
            } => {
                if n_schedule[0] < 2 || !monotone(n_schedule, true, true) {
                    return bad("must be increasing integers >= 2");
                }
                if !(*exponent > T::zero()) || direction.iter().any(|v| !v.is_finite()) {
                    return bad("needs a positive exponent and a finite direction");
                }
            }
        }
        Ok(())
    }
}

/// Seed of step `step` under the scheme seed `seed`.
pub fn derive_seed(seed: u64, step: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((step as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn check_dim<T: Scalar>(base: &DiscreteMeasure<T>, found: usize) -> Result<()> {
    if base.dim() != found {
        return Err(Error::DimMismatch {
            expected: base.dim(),
            found,
        });
    }
    Ok(())
}

/// The perturbed measures of `scheme` around `base`, one per schedule entry.
pub fn generate_sequence<T: Scalar>(
    scheme: &PerturbationScheme<T>,
    base: &DiscreteMeasure<T>,
) -> Result<Vec<DiscreteMeasure<T>>> {
    scheme.validate()?;
    match scheme {
        PerturbationScheme::Saa { n_schedule, seed } => {
            let sampler = base.sampler();
            n_schedule
                .iter()
                .enumerate()
                .map(|(k, &n)| empirical(&sampler, n, derive_seed(*seed, k)))
                .collect()
        }
        PerturbationScheme::Contamination {
            direction,
            t_schedule,
        } => {
            check_dim(base, direction.dim())?;
            t_schedule.iter().map(|&t| base.mix(direction, t)).collect()
        }
        PerturbationScheme::Jitter {
            sigma_schedule,
            seed,
        } => sigma_schedule
            .iter()
            .enumerate()
            .map(|(k, &sigma)| {
                let step_seed = derive_seed(*seed, k);
                DiscreteMeasure::canonicalize(base.atoms().iter().enumerate().map(|(i, a)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(step_seed);
                    rng.set_stream(i as u64);
                    let p = a
                        .point
                        .iter()
                        .map(|&c| c + sigma * T::lit(rng.random_range(-1.0..=1.0)))
                        .collect();
                    (p, a.weight)
                }))
            })
            .collect(),
        PerturbationScheme::Discretize { grid_schedule } => grid_schedule
            .iter()
            .map(|&r| {
                let r = T::from_usize_lossy(r);
                base.map_points(|p| p.iter().map(|&c| (c * r).round() / r + T::zero()).collect())
            })
            .collect(),
        PerturbationScheme::Escape {
            n_schedule,
            direction,
            exponent,
        } => {
            check_dim(base, direction.len())?;
            n_schedule
                .iter()
                .map(|&n| {
                    let nf = T::from_usize_lossy(n);
                    let reach = nf.powf(exponent.recip());
                    let far =
                        DiscreteMeasure::dirac(direction.iter().map(|&d| d * reach).collect())?;
                    base.mix(&far, nf.recip())
                })
                .collect()
        }
    }
}

/// One perturbation step measured against the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StabilityRow<T> {
    pub step: usize,
    pub param: T,
    pub d_bl: Option<T>,
    pub d_psi: Option<T>,
    pub delta_phi_abs: Option<T>,
    pub sup_delta_q: Option<T>,
    pub argmin_excess: Option<T>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ReportMetadata<T: Scalar> {
    pub model_hash: String,
    pub base_hash: String,
    pub scheme: PerturbationScheme<T>,
    pub seeds: Vec<u64>,
    pub moment_exponent: T,
    pub argmin_tol: T,
    pub base_phi: T,
    pub base_argmin: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StabilityReport<T: Scalar> {
    pub metadata: ReportMetadata<T>,
    pub rows: Vec<StabilityRow<T>>,
    /// Tail diagnostics of the generated family together with the base.
    pub integrability: UniformIntegrabilityReport<T>,
}

/// Report columns in CSV order.
pub const COLUMNS: [&str; 8] = [
    "step",
    "param",
    "d_bl",
    "d_psi",
    "delta_phi_abs",
    "sup_delta_q",
    "argmin_excess",
    "error",
];

/// Knobs of [`run_experiment_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions<T> {
    pub argmin_tol: T,
    /// Points of the geometric tail-threshold grid.
    pub grid_points: usize,
}

impl<T: Scalar> Default for ExperimentOptions<T> {
    fn default() -> Self {
        ExperimentOptions {
            argmin_tol: T::lit(DEFAULT_ARGMIN_TOL),
            grid_points: 31,
        }
    }
}

pub fn run_experiment<T: Scalar>(
    model: &MeanRiskModel<T>,
    base: &DiscreteMeasure<T>,
    scheme: &PerturbationScheme<T>,
) -> Result<StabilityReport<T>> {
    run_experiment_with(model, base, scheme, ExperimentOptions::default())
}

/// Measures every step of `scheme` against `base`. Failures of the
/// recourse problem at a step are recorded in that row's `error` column.
///
/// The integrability verdict uses thresholds from 1 to
/// `1e3 max(1, max_base ||z||^(gamma p))` and passes when the family-wide
/// tail beyond the last threshold is at most `1e-3 max(1, base moment)`.
pub fn run_experiment_with<T: Scalar>(
    model: &MeanRiskModel<T>,
    base: &DiscreteMeasure<T>,
    scheme: &PerturbationScheme<T>,
    options: ExperimentOptions<T>,
) -> Result<StabilityReport<T>> {
    model.validate()?;
    check_dim(base, model.recourse.z_dim())?;
    let family = generate_sequence(scheme, base)?;
    let ev = Evaluator::new(model);
    let base_q = ev.q_all(base)?;
    let base_phi = base_q.iter().copied().fold(T::infinity(), T::min);
    let points = model.decisions.points();
    let base_idx = ev.argmin_indices(base, options.argmin_tol)?;
    let base_argmin: Vec<Vec<T>> = base_idx.iter().map(|&i| points[i].clone()).collect();
    let q_exp = model.moment_exponent();

    let rows: Vec<StabilityRow<T>> = family
        .par_iter()
        .enumerate()
        .map(|(k, nu)| {
            let mut row = StabilityRow {
                step: k,
                param: scheme.param(k),
                d_bl: None,
                d_psi: None,
                delta_phi_abs: None,
                sup_delta_q: None,
                argmin_excess: None,
                error: None,
            };
            let mut errors = Vec::new();
            match bounded_lipschitz(nu, base) {
                Ok(d) => {
                    row.d_bl = Some(d);
                    row.d_psi = Some(d + (nu.moment(q_exp) - base.moment(q_exp)).abs());
                }
                Err(e) => errors.push(e.to_string()),
            }
            match ev.q_all(nu) {
                Ok(q) => {
                    let phi = q.iter().copied().fold(T::infinity(), T::min);
                    row.delta_phi_abs = Some((phi - base_phi).abs());
                    row.sup_delta_q = Some(
                        q.iter()
                            .zip(&base_q)
                            .map(|(&a, &b)| (a - b).abs())
                            .fold(T::zero(), T::max),
                    );
                    let cand: Vec<Vec<T>> = (0..q.len())
                        .filter(|&i| q[i] <= phi + options.argmin_tol)
                        .map(|i| points[i].clone())
                        .collect();
                    match argmin_excess(&cand, &base_argmin) {
                        Ok(x) => row.argmin_excess = Some(x),
                        Err(e) => errors.push(e.to_string()),
                    }
                }
                Err(e) => errors.push(e.to_string()),
            }
            if !errors.is_empty() {
                row.error = Some(errors.join("; "));
            }
            row
        })
        .collect();

    let mut everyone = family;
    everyone.push(base.clone());
    let radius = base
        .atoms()
        .iter()
        .map(|a| euclidean_norm(&a.point).powf(q_exp))
        .fold(T::one(), T::max);
    let grid = geometric_grid(T::one(), T::lit(1e3) * radius, options.grid_points.max(2))?;
    let tolerance = T::lit(1e-3) * base.moment(q_exp).max(T::one());
    let integrability = diagnose_uniform_integrability(&everyone, q_exp, &grid, tolerance)?;

    Ok(StabilityReport {
        metadata: ReportMetadata {
            model_hash: model.content_hash(),
            base_hash: base.content_hash(),
            scheme: scheme.clone(),
            seeds: scheme.seeds(),
            moment_exponent: q_exp,
            argmin_tol: options.argmin_tol,
            base_phi,
            base_argmin,
        },
        rows,
        integrability,
    })
}

/// `psi_metric` of every generated measure against the base, for callers
/// that want the distance column without running the model.
pub fn psi_column<T: Scalar>(
    family: &[DiscreteMeasure<T>],
    base: &DiscreteMeasure<T>,
    q: T,
) -> Result<Vec<T>> {
    family.iter().map(|m| psi_metric(m, base, q)).collect()
}

impl<T: Scalar> StabilityReport<T> {
    /// Values of a numeric column, `None` where a step failed.
    pub fn column(&self, name: &str) -> Result<Vec<Option<T>>> {
        let pick = |r: &StabilityRow<T>| -> Option<T> {
            match name {
                "step" => Some(T::from_usize_lossy(r.step)),
                "param" => Some(r.param),
                "d_bl" => r.d_bl,
                "d_psi" => r.d_psi,
                "delta_phi_abs" => r.delta_phi_abs,
                "sup_delta_q" => r.sup_delta_q,
                _ => r.argmin_excess,
            }
        };
        if !COLUMNS[..7].contains(&name) {
            return Err(Error::UnknownColumn(name.to_string()));
        }
        Ok(self.rows.iter().map(pick).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)
            .map_err(|e| Error::Io(e.to_string()))?;
        let num = |v: Option<T>| v.map_or_else(String::new, |x| format!("{x}"));
        for r in &self.rows {
            w.write_record([
                r.step.to_string(),
                format!("{}", r.param),
                num(r.d_bl),
                num(r.d_psi),
                num(r.delta_phi_abs),
                num(r.sup_delta_q),
                num(r.argmin_excess),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Log-log plot of the distance and deviation columns against the
    /// schedule parameter. Nonpositive values are left out.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 56.0;
        let series: [(&str, &str); 4] = [
            ("d_bl", "#1f77b4"),
            ("d_psi", "#d62728"),
            ("delta_phi_abs", "#2ca02c"),
            ("sup_delta_q", "#9467bd"),
        ];
        let xs: Vec<f64> = self.rows.iter().map(|r| r.param.as_f64()).collect();
        let mut pts: Vec<Vec<(f64, f64)>> = Vec::new();
        for (name, _) in &series {
            let col = self.column(name).expect("known column");
            pts.push(
                xs.iter()
                    .zip(col)
                    .filter_map(|(&x, y)| {
                        let y = y?.as_f64();
                        (x > 0.0 && y > 0.0 && y.is_finite()).then(|| (x.log10(), y.log10()))
                    })
                    .collect(),
            );
        }
        let all: Vec<&(f64, f64)> = pts.iter().flatten().collect();
        let span = |f: fn(&(f64, f64)) -> f64| {
            let lo = all.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                (lo.floor(), hi.ceil().max(lo.floor() + 1.0))
            } else {
                (0.0, 1.0)
            }
        };
        let (x0, x1) = span(|p| p.0);
        let (y0, y1) = span(|p| p.1);
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        for e in x0 as i32..=x1 as i32 {
            let x = sx(e as f64);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">1e{e}</text>"#,
                H - PAD + 16.0
            );
        }
        for e in y0 as i32..=y1 as i32 {
            let y = sy(e as f64);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{e}</text>"#,
                PAD - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{} parameter</text>"#,
            W / 2.0,
            H - 12.0,
            self.metadata.scheme.kind()
        );
        for (k, ((name, color), line)) in series.iter().zip(&pts).enumerate() {
            if !line.is_empty() {
                let path: Vec<String> = line
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                    path.join(" ")
                );
                for &(x, y) in line {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                        sx(x),
                        sy(y)
                    );
                }
            }
            let ly = PAD + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{ly:.2}" font-size="12" fill="{color}">{name}</text>"#,
                W - PAD - 110.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrendVerdict<T> {
    pub pass: bool,
    pub first: T,
    pub last: T,
    /// Least-squares slope of `ln value` against `ln (step + 1)` over the
    /// positive values; `None` with fewer than two of them.
    pub slope: Option<T>,
}

/// Passes when the last value of `column` is at most its first value
/// divided by `factor`.
pub fn trend_check<T: Scalar>(
    report: &StabilityReport<T>,
    column: &str,
    factor: T,
) -> Result<TrendVerdict<T>> {
    let col = report.column(column)?;
    if col.len() < 3 {
        return Err(Error::OutOfRange(format!(
            "trend check needs >= 3 rows, got {}",
            col.len()
        )));
    }
    if !(factor > T::one()) {
        return Err(Error::OutOfRange(format!(
            "trend factor {factor} must exceed 1"
        )));
    }
    let (first, last) = (col[0], col[col.len() - 1]);
    let pass = matches!((first, last), (Some(f), Some(l)) if l <= f / factor);
    let pairs: Vec<(T, T)> = col
        .iter()
        .enumerate()
        .filter_map(|(k, v)| {
            v.filter(|&v| v > T::zero())
                .map(|v| (T::from_usize_lossy(k + 1).ln(), v.ln()))
        })
        .collect();
    let slope = (pairs.len() >= 2).then(|| {
        let n = T::from_usize_lossy(pairs.len());
        let mx = pairs.iter().map(|p| p.0).sum::<T>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<T>() / n;
        let sxy: T = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: T = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    });
    Ok(TrendVerdict {
        pass,
        first: first.unwrap_or(T::nan()),
        last: last.unwrap_or(T::nan()),
        slope,
    })
}
