//! Closed-form delay formulas, Monte Carlo estimators and trace checkers.

pub mod checkers;
pub mod formulas;
pub mod montecarlo;

pub use checkers::{
    check_consensus, check_counter_thresholds, check_generic_broadcast, safety_holds, CheckError,
    PropertyKind, Verdict,
};
pub use formulas::{
    expected_delay_avalanche, expected_delay_displayed, expected_delay_glacier,
    expected_delay_shifted, expected_failed_attempt_length, success_probability, FormulaError,
};
pub use montecarlo::{monte_carlo_delay, McEstimate, ResetTo};
