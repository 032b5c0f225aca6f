//! Experiment drivers for the limit laws: exponential approximation of
//! hitting and repetition times, entropy and relative-entropy estimators,
//! the central limit theorem and the large-deviation cumulant and rate
//! functions.
//!
//! Replicas run in parallel and are collected in replica order, so results
//! depend only on the seed. Every size normalization uses the site count
//! `(n+1)^d` of the pattern cube.

mod clt;
mod exponential;
mod field;
mod ldp;
mod logtime;
mod survival;

pub use clt::{
    clt_experiment, theta_squared, CltParams, CltResult, CltStatistic, KsResult, ThetaSquared,
};
pub use exponential::{
    exponential_law_experiment, factorization_experiment, hitting_oracle_comparison, lambda_survey,
    repetition_law_experiment, ExponentialParams, ExponentialResult, FactorizationParams,
    FactorizationResult, FactorizationRow, LambdaInfo, LambdaSurveyRow, OracleRow,
    RepetitionParams, RepetitionResult,
};
pub use field::{random_pattern, FieldGen, HitRecord, SearchTarget};
pub use ldp::{
    ldp_cumulant, predicted_cumulant, rate_function, CumulantCurve, CumulantParams, CumulantRow,
    RateParams, RatePoint, RateResult, StandardFactRow,
};
pub use logtime::{
    entropy_via_repetition, strong_approximation, waiting_time_experiment, LogTimeParams,
    LogTimeResult, LogTimeRow, RowStatus, StrongApproximationRow,
};
pub use survival::SurvivalCurve;

use serde::Serialize;

/// A reference value and where it came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Target {
    pub name: String,
    pub value: f64,
    pub provenance: String,
}

impl Target {
    pub fn new(name: &str, value: f64, provenance: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            provenance: provenance.into(),
        }
    }
}

/// Largest censoring fraction tolerated by estimators of mean log-times.
pub const CENSORING_LIMIT: f64 = 0.01;

/// Normalizing site count `(n+1)^d`.
pub fn sites(d: usize, n: usize) -> f64 {
    ((n + 1) as f64).powi(d as i32)
}

/// Mean and half-width `z sd / sqrt(m)` of a sample.
pub fn mean_ci(xs: &[f64], z: f64) -> (f64, f64) {
    let (mean, var) = crate::numerics::mean_var(xs);
    (mean, z * (var / xs.len().max(1) as f64).sqrt())
}
