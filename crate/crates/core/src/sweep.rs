//! Delay as a function of the malicious fraction: closed forms, Monte Carlo
//! and, optionally, full simulations, one row per gamma.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, FormulaError, ResetTo};
use crate::ids::PayloadId;
use crate::scenario::{self, AdversaryKind, Protocol, ScenarioConfig};
use crate::trace::Event;

pub const CSV_COLUMNS: [&str; 9] = [
    "gamma",
    "beta1",
    "formula_composed",
    "formula_displayed",
    "glacier_formula",
    "mc_mean",
    "mc_ci_lo",
    "mc_ci_hi",
    "sim_mean",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
    pub beta1: u32,
    /// Monte Carlo runs per gamma.
    pub runs: u64,
    pub seed: u64,
    /// Full simulations per gamma; zero leaves `sim_mean` empty.
    pub sim_seeds: u32,
    /// Base scenario for the simulations. Protocol, adversary and seed are
    /// overridden per run.
    pub sim_base: ScenarioConfig,
}

impl SweepConfig {
    pub fn new(gammas: Vec<f64>, beta1: u32, runs: u64, seed: u64) -> Self {
        let mut sim_base = ScenarioConfig::default();
        sim_base.network.f = 1;
        sim_base.workload.count = 40;
        sim_base.horizon = 40.0;
        SweepConfig {
            gammas,
            beta1,
            runs,
            seed,
            sim_seeds: 0,
            sim_base,
        }
    }
}

/// `0, step, 2 step, ..` up to and including `max` (within rounding).
pub fn grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as u64;
    (0..=n).map(|i| (i as f64 * step * 1e6).round() / 1e6).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub beta1: u32,
    pub formula_composed: f64,
    pub formula_displayed: f64,
    pub glacier_formula: f64,
    pub mc_mean: f64,
    pub mc_ci_lo: f64,
    pub mc_ci_hi: f64,
    pub sim_mean: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("empty gamma grid")]
    EmptyGrid,
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Mean polls the victim completed between holding the target and
/// delivering it, over runs that delivered.
fn sim_mean(cfg: &SweepConfig, gamma: f64, index: usize) -> Option<f64> {
    let runs: Vec<Option<u64>> = (0..cfg.sim_seeds)
        .into_par_iter()
        .map(|s| {
            let mut sc = cfg.sim_base.clone();
            sc.protocol = Protocol::Avalanche;
            sc.params.beta1 = cfg.beta1;
            sc.adversary.kind = AdversaryKind::GossipAttack;
            sc.adversary.gamma = gamma;
            sc.seed = cfg.seed + index as u64 * 1000 + s as u64;
            let victim = sc.victim();
            let target = PayloadId::new(victim, 0);
            scenario::run(&sc).records.iter().find_map(|r| match &r.ev {
                Event::Deliver {
                    party,
                    payload,
                    polls_since_seen,
                    ..
                } if *party == victim && *payload == target => Some(*polls_since_seen),
                _ => None,
            })
        })
        .collect();
    let done: Vec<f64> = runs.into_iter().flatten().map(|p| p as f64).collect();
    (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64)
}

/// Rows in grid order. The Monte Carlo stream of the i-th gamma is seeded
/// with `seed + i`.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    if cfg.gammas.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    cfg.gammas
        .iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let b = cfg.beta1;
            let mc = analysis::monte_carlo_delay(b, gamma, cfg.runs, cfg.seed + i as u64, ResetTo::Zero)?;
            Ok(SweepRow {
                gamma,
                beta1: b,
                formula_composed: analysis::expected_delay_avalanche(b, gamma)?,
                formula_displayed: analysis::expected_delay_displayed(b, gamma)?,
                glacier_formula: analysis::expected_delay_glacier(b, gamma)?,
                mc_mean: mc.mean,
                mc_ci_lo: mc.ci_lo,
                mc_ci_hi: mc.ci_hi,
                sim_mean: if cfg.sim_seeds > 0 { sim_mean(cfg, gamma, i) } else { None },
            })
        })
        .collect()
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory");
    for r in rows {
        let f = |x: f64| x.to_string();
        w.write_record([
            f(r.gamma),
            r.beta1.to_string(),
            f(r.formula_composed),
            f(r.formula_displayed),
            f(r.glacier_formula),
            f(r.mc_mean),
            f(r.mc_ci_lo),
            f(r.mc_ci_hi),
            r.sim_mean.map(f).unwrap_or_default(),
        ])
        .expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("flushed")).expect("csv is utf-8")
}
