//! Expected number of queried transactions until a target is accepted when a
//! fraction `gamma` of the fresh transactions are crafted to reset its counter.
//!
//! With `q = 1 - gamma`, an attempt is a run of honest samples ended either by
//! a crafted sample (failure) or by reaching `beta1` honest ones (success).

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormulaError {
    #[error("gamma must lie in [0, 1), got {0}")]
    Gamma(f64),
    #[error("beta must be at least 1")]
    Beta,
}

fn check(beta: u32, gamma: f64) -> Result<(), FormulaError> {
    if beta == 0 {
        return Err(FormulaError::Beta);
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(FormulaError::Gamma(gamma));
    }
    Ok(())
}

/// `ln q` without cancellation for small gamma.
fn ln_q(gamma: f64) -> f64 {
    (-gamma).ln_1p()
}

/// `q^beta`.
fn q_pow(beta: f64, gamma: f64) -> f64 {
    (beta * ln_q(gamma)).exp()
}

/// Below this gamma the closed form loses digits to cancellation and the
/// finite weighted mean is used instead.
const SMALL_GAMMA: f64 = 1e-3;

/// Mean length of a failed attempt, the crafted sample included.
pub fn expected_failed_attempt_length(beta1: u32, gamma: f64) -> Result<f64, FormulaError> {
    check(beta1, gamma)?;
    let b = beta1 as f64;
    if gamma == 0.0 {
        return Ok((b + 1.0) / 2.0);
    }
    if gamma < SMALL_GAMMA {
        // sum_j j q^(j-1) / sum_j q^(j-1), j = 1..=beta1
        let q = 1.0 - gamma;
        let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
        for j in 1..=beta1 {
            num += j as f64 * w;
            den += w;
            w *= q;
        }
        return Ok(num / den);
    }
    let qb = q_pow(b, gamma);
    let one_minus_qb = -(b * ln_q(gamma)).exp_m1();
    Ok((1.0 - qb * (1.0 + b * gamma)) / (gamma * one_minus_qb))
}

/// Attempt success probability taken as `q^(beta1 - 1)`, i.e. counting the
/// first honest sample as given.
pub fn success_probability(beta1: u32, gamma: f64) -> Result<f64, FormulaError> {
    check(beta1, gamma)?;
    Ok(q_pow(beta1 as f64 - 1.0, gamma))
}

fn compose(beta1: u32, gamma: f64, attempts_exponent: f64) -> Result<f64, FormulaError> {
    let b = beta1 as f64;
    if gamma == 0.0 {
        return Ok(b);
    }
    let failed = expected_failed_attempt_length(beta1, gamma)?;
    // E[Y] - 1 = q^-e - 1
    let extra_attempts = (-attempts_exponent * ln_q(gamma)).exp_m1();
    Ok(b + failed * extra_attempts)
}

/// `beta1 + E[failed attempt] * (E[Y] - 1)` with `E[Y] = q^-beta1`.
///
/// This equals `(1 - q^beta1) / (gamma q^beta1)`, the mean hitting time of
/// `beta1` consecutive honest samples when a crafted sample resets to zero.
pub fn expected_delay_avalanche(beta1: u32, gamma: f64) -> Result<f64, FormulaError> {
    check(beta1, gamma)?;
    compose(beta1, gamma, beta1 as f64)
}

/// Same composition with `E[Y] = 1/p`, `p = q^(beta1 - 1)`.
pub fn expected_delay_shifted(beta1: u32, gamma: f64) -> Result<f64, FormulaError> {
    check(beta1, gamma)?;
    compose(beta1, gamma, beta1 as f64 - 1.0)
}

/// A widely quoted closed form, kept for comparison. It differs from
/// [`expected_delay_avalanche`] in the signs of the last two numerator terms
/// and is infinite at `gamma = 0`.
pub fn expected_delay_displayed(beta1: u32, gamma: f64) -> Result<f64, FormulaError> {
    check(beta1, gamma)?;
    let b = beta1 as f64;
    if gamma == 0.0 {
        return Ok(f64::INFINITY);
    }
    let qb = q_pow(b, gamma);
    let num = 1.0 + (2.0 + b * gamma) * qb - qb * qb * (1.0 + b * gamma);
    let den = gamma * qb * (1.0 - qb);
    Ok(b + num / den)
}

/// Glacier needs on average `beta / (1 - gamma)` samples: crafted samples
/// leave the counter alone.
pub fn expected_delay_glacier(beta: u32, gamma: f64) -> Result<f64, FormulaError> {
    check(beta, gamma)?;
    Ok(beta as f64 / (1.0 - gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_zero_limits() {
        assert_eq!(expected_delay_avalanche(15, 0.0).unwrap(), 15.0);
        assert_eq!(expected_failed_attempt_length(15, 0.0).unwrap(), 8.0);
        assert_eq!(expected_delay_glacier(15, 0.0).unwrap(), 15.0);
    }

    #[test]
    fn beta_one_attempts_have_length_one() {
        for g in [0.1, 0.5, 0.9] {
            assert!((expected_failed_attempt_length(1, g).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn glacier_at_half() {
        assert_eq!(expected_delay_glacier(15, 0.5).unwrap(), 30.0);
    }

    #[test]
    fn small_gamma_branch_is_continuous() {
        let below = expected_failed_attempt_length(15, SMALL_GAMMA * 0.999_999).unwrap();
        let above = expected_failed_attempt_length(15, SMALL_GAMMA).unwrap();
        assert!((below - above).abs() < 1e-6, "{below} vs {above}");
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(expected_delay_avalanche(15, 1.0), Err(FormulaError::Gamma(1.0)));
        assert_eq!(expected_delay_glacier(0, 0.1), Err(FormulaError::Beta));
        assert!(expected_delay_avalanche(15, -0.1).is_err());
    }
}
