//! Monte Carlo estimate of the queried-transaction count to acceptance under
//! a fraction `gamma` of counter-resetting samples.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::formulas::FormulaError;
use crate::sim::rng::{stream, Stream};

/// Counter value right after a crafted sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetTo {
    /// The crafted query zeroes the counter. This is the process the
    /// composed formula describes.
    #[default]
    Zero,
    /// The no-op issued right after the crafted query lifts the counter back
    /// to one.
    One,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub runs: u64,
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl McEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_lo <= x && x <= self.ci_hi
    }
}

const CHUNK: u64 = 1024;

/// `thresholds[j - 1]` is `q^j` scaled to the u64 range: a uniform `u` gives
/// an honest run of at least `j` samples iff `u < thresholds[j - 1]`.
fn thresholds(beta: u32, gamma: f64) -> Vec<u64> {
    let q = 1.0 - gamma;
    let scale = 2f64.powi(64);
    (1..=beta)
        .map(|j| {
            let t = q.powi(j as i32) * scale;
            if t >= scale {
                u64::MAX
            } else {
                t as u64
            }
        })
        .collect()
}

/// Samples until the counter reaches `beta`; returns the number of samples.
fn one_run<R: Rng>(rng: &mut R, beta: u32, th: &[u64], reset: ResetTo) -> u64 {
    let mut need = beta as usize;
    let mut total = 0u64;
    loop {
        if need == 0 {
            return total;
        }
        let u: u64 = rng.random();
        let mut run = 0;
        while run < need && u < th[run] {
            run += 1;
        }
        if run == need {
            return total + need as u64;
        }
        total += run as u64 + 1;
        need = match reset {
            ResetTo::Zero => beta as usize,
            ResetTo::One => beta as usize - 1,
        };
    }
}

/// Mean samples to acceptance over `runs` independent runs, with a normal
/// 95% confidence interval. Deterministic in `seed` whatever the thread count.
pub fn monte_carlo_delay(
    beta1: u32,
    gamma: f64,
    runs: u64,
    seed: u64,
    reset: ResetTo,
) -> Result<McEstimate, FormulaError> {
    if beta1 == 0 {
        return Err(FormulaError::Beta);
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(FormulaError::Gamma(gamma));
    }
    let runs = runs.max(1);
    let th = thresholds(beta1, gamma);
    let chunks = runs.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Stream::MonteCarlo, c);
            let n = CHUNK.min(runs - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let w = one_run(&mut rng, beta1, &th, reset) as f64;
                s += w;
                s2 += w * w;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = runs as f64;
    let mean = s / n;
    let var = if runs > 1 {
        ((s2 - s * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    let half = 1.96 * sd / n.sqrt();
    Ok(McEstimate {
        runs,
        mean,
        sd,
        ci_lo: mean - half,
        ci_hi: mean + half,
    })
}
