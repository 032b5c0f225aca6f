//! Exact computations on small systems, used as oracles.

pub mod bounds;
pub mod entropy;
pub mod enumerate;
pub mod hitting;
pub mod mixing;
pub mod partition;
pub mod pressure;

pub use bounds::{check_invariants, surprisal_bounds, InvariantCheck};
pub use entropy::{entropy, expected_f_u, relative_entropy};
pub use enumerate::ENUMERATION_BUDGET;
pub use hitting::{bad_pattern_mass, brute_force_hitting_law, HittingLawTable};
pub use mixing::{mixing_phi_probe, PhiProbe};
pub use partition::{
    closed_form_log_probability, closed_form_probability, exact_pattern_probability,
    log_partition_torus, marginal_table, partition_function, PatternProbability,
};
pub use pressure::{pressure, pressure_scaled, pressure_with, PressureEstimate, PressureMethod};
