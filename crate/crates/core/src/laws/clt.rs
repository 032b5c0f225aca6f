//! Central limit theorem for surprisals and log-times, with the limiting
//! variance taken from the curvature of the pressure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::field::{FieldGen, SearchTarget};
use super::sites;
use crate::error::{Error, Result};
use crate::exact::{closed_form_log_probability, pressure_scaled};
use crate::lattice::{Cube, LatticeVector};
use crate::numerics::{mean_var, richardson};
use crate::rng::Purpose;
use crate::sampler::SampleMeta;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltStatistic {
    /// `-log Pr(sigma_{C_n})`.
    Surprisal,
    /// `d log W_n(xi, sigma)` with `xi`, `sigma` independent copies.
    Waiting,
    /// `d log R_n(sigma)`.
    Repetition,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaSquared {
    pub value: f64,
    pub step: f64,
    /// `|richardson - D(h/2)|`.
    pub residual: f64,
    pub provenance: String,
}

/// `theta^2 = d^2/dq^2 P((1 - q) U)` at `q = 0`, by central differences at
/// steps `h` and `h/2` combined by one Richardson step.
pub fn theta_squared(
    u: &crate::model::Interaction,
    h: f64,
    max_residual: f64,
) -> Result<ThetaSquared> {
    let p1 = pressure_scaled(u, 1.0)?;
    let second = |s: f64| -> Result<f64> {
        Ok((pressure_scaled(u, 1.0 + s)? - 2.0 * p1 + pressure_scaled(u, 1.0 - s)?) / (s * s))
    };
    let coarse = second(h)?;
    let fine = second(h / 2.0)?;
    let value = richardson(coarse, fine, 2.0, 2);
    let residual = (value - fine).abs();
    if residual > max_residual * value.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "finite-difference curvature unstable: residual {residual:.3e}"
        )));
    }
    Ok(ThetaSquared {
        value,
        step: h,
        residual,
        provenance:
            "exact-engine: pressure curvature by central differences with Richardson refinement"
                .into(),
    })
}

#[derive(Clone, Debug)]
pub struct CltParams {
    pub gen: FieldGen,
    pub n: usize,
    pub replicas: usize,
    pub statistic: CltStatistic,
    pub fd_step: f64,
    pub max_residual: f64,
    pub cap: usize,
}

impl CltParams {
    pub fn new(gen: FieldGen, n: usize, replicas: usize) -> Self {
        Self {
            gen,
            n,
            replicas,
            statistic: CltStatistic::Surprisal,
            fd_step: 0.05,
            max_residual: 1e-3,
            cap: 4096,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CltResult {
    pub n: usize,
    pub statistic: CltStatistic,
    pub replicas: usize,
    pub mean: f64,
    /// Sample variance of the standardized values.
    pub variance: f64,
    pub theta_squared: ThetaSquared,
    pub relative_error: f64,
    /// Kolmogorov-Smirnov test against `Normal(0, variance)`; absent for a
    /// degenerate sample.
    pub ks: Option<KsResult>,
    pub censored_fraction: f64,
    pub sampler: SampleMeta,
    #[serde(skip)]
    pub standardized: Vec<f64>,
}

/// Samples the statistic, standardizes it by `(n+1)^{d/2}` and compares
/// its variance with `theta^2`.
pub fn clt_experiment(p: &CltParams) -> Result<CltResult> {
    let d = p.gen.dim();
    let n = p.n;
    let theta = theta_squared(p.gen.model.interaction(), p.fd_step, p.max_residual)?;
    let cube_sites: Vec<LatticeVector> = Cube::at_origin(d, n).sites().collect();
    let (raw, censored): (Vec<f64>, Vec<bool>) = match p.statistic {
        CltStatistic::Surprisal => {
            let v: Vec<f64> = (0..p.replicas as u64)
                .into_par_iter()
                .map(|r| {
                    let w = p.gen.window(r, n)?;
                    let a = w.initial_pattern(n)?;
                    Ok(-closed_form_log_probability(
                        &p.gen.model,
                        &cube_sites,
                        a.values(),
                    )?)
                })
                .collect::<Result<_>>()?;
            let c = vec![false; v.len()];
            (v, c)
        }
        CltStatistic::Repetition | CltStatistic::Waiting => {
            let q_gen = p.gen.clone().with_purpose(Purpose::FieldQ);
            let s_gen = p.gen.clone().with_purpose(Purpose::FieldP);
            let out: Vec<(f64, bool)> = (0..p.replicas as u64)
                .into_par_iter()
                .map(|r| {
                    let (h, _) = if p.statistic == CltStatistic::Waiting {
                        let a = q_gen.window(r, n)?.initial_pattern(n)?;
                        s_gen.hit(r, SearchTarget::Pattern(&a), p.cap)?
                    } else {
                        p.gen.hit(r, SearchTarget::Own(n), p.cap)?
                    };
                    Ok((d as f64 * (h.capped() as f64).ln(), h.is_censored()))
                })
                .collect::<Result<_>>()?;
            out.into_iter().unzip()
        }
    };
    let (mean, _) = mean_var(&raw);
    let scale = sites(d, n).sqrt();
    let standardized: Vec<f64> = raw.iter().map(|x| (x - mean) / scale).collect();
    let (_, variance) = mean_var(&standardized);
    let ks = if variance > 1e-12 {
        Some(ks_normal(&standardized, variance.sqrt())?)
    } else {
        None
    };
    let cap = if p.statistic == CltStatistic::Surprisal {
        0
    } else {
        p.cap
    };
    Ok(CltResult {
        n,
        statistic: p.statistic,
        replicas: p.replicas,
        mean,
        variance,
        relative_error: if theta.value != 0.0 {
            (variance - theta.value).abs() / theta.value.abs()
        } else {
            variance.abs()
        },
        theta_squared: theta,
        ks,
        censored_fraction: censored.iter().filter(|&&c| c).count() as f64
            / p.replicas.max(1) as f64,
        sampler: p.gen.meta(n, cap)?,
        standardized,
    })
}

/// One-sample KS statistic against `Normal(0, sd)` with the asymptotic
/// Kolmogorov p-value (Stephens' small-sample correction).
pub fn ks_normal(xs: &[f64], sd: f64) -> Result<KsResult> {
    let normal = Normal::new(0.0, sd).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() as f64;
    let statistic = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max);
    let lambda = (m.sqrt() + 0.12 + 0.11 / m.sqrt()) * statistic;
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_q(lambda),
    })
}

/// `Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
