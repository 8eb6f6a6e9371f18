//! Scenario files: one TOML document describing protocol, parameters,
//! network, adversary, workload and outputs. Building and running one.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adversary::{
    Adversary, BivalentSplit, Bystanders, Crafting, DelayAttack, GossipAttack, Minter, Replicas, SnowballEcho,
    TriggerMode,
};
use crate::analysis::{self, Verdict};
use crate::dag::{Genesis, Output, Payload, ProtocolTransaction};
use crate::ids::{PartyId, PayloadId};
use crate::params::{ParamError, ProtocolParams};
use crate::party::{AvalancheParty, PartySetup};
use crate::sim::rng::{party_stream, Stream};
use crate::sim::{Honest, NetworkConfig, World};
use crate::snowball::{SnowParams, SnowballParty};
use crate::trace::{self, Event, Record, RunHeader, TraceLevel, SCHEMA_VERSION};
use crate::variants::Variant;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    Avalanche,
    Glacier,
    Implemented,
    Snowball,
}

impl Protocol {
    pub fn variant(self) -> Option<Variant> {
        match self {
            Protocol::Avalanche => Some(Variant::Avalanche),
            Protocol::Glacier => Some(Variant::Glacier),
            Protocol::Implemented => Some(Variant::Implemented),
            Protocol::Snowball => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Avalanche => "avalanche",
            Protocol::Glacier => "glacier",
            Protocol::Implemented => "implemented",
            Protocol::Snowball => "snowball",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "avalanche" => Ok(Protocol::Avalanche),
            "glacier" => Ok(Protocol::Glacier),
            "implemented" => Ok(Protocol::Implemented),
            "snowball" => Ok(Protocol::Snowball),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    #[default]
    None,
    DelayAttack,
    GossipAttack,
    BivalentSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub kind: AdversaryKind,
    /// Malicious fraction of the fresh pool, for `gossip-attack`.
    pub gamma: f64,
    pub victim: u32,
    /// Read the victim's counter instead of guessing.
    pub oracle: bool,
    /// Strike period when `oracle` is off.
    pub trigger_interval: f64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            kind: AdversaryKind::None,
            gamma: 0.0,
            victim: 0,
            oracle: true,
            trigger_interval: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Payloads submitted by honest users, the first one being the target.
    pub count: u32,
    /// Submissions per second.
    pub rate: f64,
    pub start: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            count: 20,
            rate: 2.0,
            start: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnowballConfig {
    pub beta: u32,
    /// Share of honest parties proposing 1.
    pub ones_fraction: f64,
}

impl Default for SnowballConfig {
    fn default() -> Self {
        SnowballConfig {
            beta: 15,
            ones_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub dir: Option<PathBuf>,
    pub trace_level: TraceLevel,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            dir: None,
            trace_level: TraceLevel::Protocol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub seed: u64,
    /// Simulated seconds.
    pub horizon: f64,
    /// Keep Glacier counters next to the Avalanche ones and compare them.
    pub shadow: bool,
    pub params: ProtocolParams,
    pub network: NetworkConfig,
    pub adversary: AdversaryConfig,
    pub workload: WorkloadConfig,
    pub snowball: SnowballConfig,
    pub outputs: OutputsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: Protocol::Avalanche,
            seed: 1,
            horizon: 60.0,
            shadow: false,
            params: ProtocolParams::default(),
            network: NetworkConfig::default(),
            adversary: AdversaryConfig::default(),
            workload: WorkloadConfig::default(),
            snowball: SnowballConfig::default(),
            outputs: OutputsConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config")]
    Invalid(#[from] ParamError),
}

/// Genesis outputs given to each honest party beyond what the workload needs.
const HONEST_OUTPUTS: u32 = 64;
/// Genesis outputs of the adversary's main party.
const ADVERSARY_OUTPUTS: u32 = 4096;

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.network.validate()?;
        let n = self.network.n;
        let honest = n - self.network.f;
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(ParamError::new("horizon", "must be a non-negative number of seconds"));
        }
        match self.protocol {
            Protocol::Snowball => {
                let p = &self.params;
                if p.k == 0 || p.k >= n {
                    return Err(ParamError::new("params.k", format!("must lie in 1..{n}")));
                }
                let min_alpha = (p.k + 2) / 2;
                if p.alpha < min_alpha || p.alpha > p.k {
                    return Err(ParamError::new(
                        "params.alpha",
                        format!("must lie in {min_alpha}..={}, got {}", p.k, p.alpha),
                    ));
                }
                if !(p.query_timeout.is_finite() && p.query_timeout > 0.0) {
                    return Err(ParamError::new("params.query_timeout", "must be positive"));
                }
                if self.snowball.beta == 0 {
                    return Err(ParamError::new("snowball.beta", "must be positive"));
                }
                if !(0.0..=1.0).contains(&self.snowball.ones_fraction) {
                    return Err(ParamError::new("snowball.ones_fraction", "must lie in [0, 1]"));
                }
                if !matches!(self.adversary.kind, AdversaryKind::None | AdversaryKind::BivalentSplit) {
                    return Err(ParamError::new(
                        "adversary.kind",
                        "snowball supports only none and bivalent-split",
                    ));
                }
            }
            _ => self.params.validate(n)?,
        }
        let a = &self.adversary;
        if a.kind != AdversaryKind::None && self.network.f == 0 {
            return Err(ParamError::new("network.f", "an adversary needs at least one corrupted party"));
        }
        if !(0.0..1.0).contains(&a.gamma) {
            return Err(ParamError::new("adversary.gamma", "must lie in [0, 1)"));
        }
        if a.victim >= honest {
            return Err(ParamError::new("adversary.victim", format!("must be an honest party below {honest}")));
        }
        if !(a.trigger_interval.is_finite() && a.trigger_interval > 0.0) {
            return Err(ParamError::new("adversary.trigger_interval", "must be positive"));
        }
        if matches!(a.kind, AdversaryKind::DelayAttack | AdversaryKind::GossipAttack) && self.workload.count == 0 {
            return Err(ParamError::new("workload.count", "the attack needs a target payload"));
        }
        if !(self.workload.rate.is_finite() && self.workload.rate > 0.0) {
            return Err(ParamError::new("workload.rate", "must be positive"));
        }
        if !(self.workload.start.is_finite() && self.workload.start >= 0.0) {
            return Err(ParamError::new("workload.start", "must be non-negative"));
        }
        Ok(())
    }

    pub fn honest(&self) -> Vec<PartyId> {
        self.network.honest()
    }

    pub fn victim(&self) -> PartyId {
        PartyId(self.adversary.victim)
    }

    /// Payload submitted first, at the victim; the attacks go after it.
    pub fn target_payload(&self) -> Option<PayloadId> {
        (self.workload.count > 0).then(|| PayloadId::new(self.victim(), 0))
    }

    /// The honest workload: (time, issuer, payload).
    pub fn workload(&self, genesis: &Genesis) -> Vec<(f64, PartyId, Arc<Payload>)> {
        let honest = self.honest();
        let h = honest.len();
        let first = self.adversary.victim as usize;
        let mut next = vec![0u32; self.network.n as usize];
        (0..self.workload.count)
            .map(|i| {
                let issuer = honest[(first + i as usize) % h];
                let j = next[issuer.0 as usize];
                next[issuer.0 as usize] += 1;
                let input = genesis.output_of(issuer, j).expect("genesis sized for the workload");
                let receiver = honest[(first + i as usize + 1) % h];
                let payload = Payload::new(
                    PayloadId::new(issuer, j as u64),
                    [input],
                    vec![Output {
                        owner: receiver,
                        amount: 1,
                    }],
                    true,
                )
                .expect("one input, one output");
                let t = self.workload.start + i as f64 / self.workload.rate;
                (t, issuer, Arc::new(payload))
            })
            .collect()
    }

    fn allocation(&self) -> Vec<u32> {
        let n = self.network.n as usize;
        let honest = (n as u32 - self.network.f) as usize;
        let per_issuer = self.workload.count.div_ceil(honest as u32);
        let mut alloc = vec![0; n];
        for a in alloc.iter_mut().take(honest) {
            *a = HONEST_OUTPUTS.max(per_issuer);
        }
        if self.network.f > 0 {
            alloc[honest] = ADVERSARY_OUTPUTS;
        }
        alloc
    }

    fn adversary_label(&self) -> String {
        let a = &self.adversary;
        match a.kind {
            AdversaryKind::None => "none".into(),
            AdversaryKind::DelayAttack if a.oracle => format!("delay-attack(victim={})", self.victim()),
            AdversaryKind::DelayAttack => format!(
                "delay-attack(victim={}, interval={})",
                self.victim(),
                a.trigger_interval
            ),
            AdversaryKind::GossipAttack => format!("gossip-attack({})", a.gamma),
            AdversaryKind::BivalentSplit => "bivalent-split".into(),
        }
    }

    pub fn header(&self) -> RunHeader {
        let mut params = self.params;
        if self.protocol == Protocol::Snowball {
            params.beta1 = self.snowball.beta;
        }
        RunHeader {
            schema: SCHEMA_VERSION,
            protocol: self.protocol.name().into(),
            n: self.network.n,
            honest: self.honest(),
            params,
            seed: self.seed,
            horizon: self.horizon,
            adversary: self.adversary_label(),
            genesis: if self.protocol == Protocol::Snowball {
                Vec::new()
            } else {
                self.allocation()
            },
        }
    }

    /// Builds the world ready to run, with the workload or proposals scheduled.
    pub fn build(&self) -> World {
        let header = self.header();
        let net = &self.network;
        let weights = Arc::new(net.weights());
        let corrupt = net.corrupt();
        let level = self.outputs.trace_level;
        match self.protocol.variant() {
            Some(variant) => {
                let genesis = Genesis::mint(&header.genesis);
                let genesis_tx = Arc::new(ProtocolTransaction::genesis(genesis.payload.clone()));
                let setup = |id: PartyId, shadow: bool| PartySetup {
                    id,
                    params: self.params,
                    variant,
                    weights: weights.clone(),
                    genesis: genesis_tx.clone(),
                    seed: self.seed,
                    passive: false,
                    shadow,
                };
                let target = self.target_payload();
                let parties: Vec<Option<Honest>> = (0..net.n)
                    .map(PartyId)
                    .map(|id| {
                        if net.is_corrupt(id) {
                            return None;
                        }
                        let mut p = AvalancheParty::new(setup(id, self.shadow));
                        if let Some(t) = target {
                            p.watch_payload(t);
                        }
                        Some(Honest::Avalanche(Box::new(p)))
                    })
                    .collect();
                let adversary = corrupt.first().map(|&main| {
                    let replicas = Replicas::new(
                        corrupt.iter().map(|&c| setup(c, false)).collect(),
                        party_stream(self.seed, Stream::Adversary, main),
                        net.lambda,
                    );
                    let minter = Minter::new(main, genesis.clone());
                    let crafting = |replicas| {
                        Crafting::new(main, target.expect("validated: attacks need a target"), minter, replicas)
                    };
                    let a = &self.adversary;
                    let adv: Box<dyn Adversary> = match a.kind {
                        AdversaryKind::None => Box::new(Bystanders::new(replicas)),
                        AdversaryKind::DelayAttack => {
                            let mode = if a.oracle {
                                TriggerMode::Oracle
                            } else {
                                TriggerMode::Heuristic {
                                    interval: a.trigger_interval,
                                }
                            };
                            Box::new(DelayAttack::new(crafting(replicas), self.victim(), self.params.beta1, mode))
                        }
                        AdversaryKind::GossipAttack => Box::new(GossipAttack::new(crafting(replicas), a.gamma)),
                        AdversaryKind::BivalentSplit => {
                            Box::new(BivalentSplit::new(main, Minter::new(main, genesis.clone()), replicas))
                        }
                    };
                    adv
                });
                let mut world = World::new(header, net, parties, adversary, level);
                for (t, issuer, payload) in self.workload(&genesis) {
                    world.schedule_broadcast(t, issuer, payload);
                }
                world
            }
            None => {
                let sp = SnowParams {
                    k: self.params.k,
                    alpha: self.params.alpha,
                    beta: self.snowball.beta,
                };
                let parties: Vec<Option<Honest>> = (0..net.n)
                    .map(PartyId)
                    .map(|id| {
                        (!net.is_corrupt(id)).then(|| {
                            Honest::Snowball(Box::new(SnowballParty::new(
                                id,
                                sp,
                                weights.clone(),
                                self.seed,
                                self.params.query_timeout,
                            )))
                        })
                    })
                    .collect();
                let adversary: Option<Box<dyn Adversary>> = match self.adversary.kind {
                    AdversaryKind::BivalentSplit => corrupt.first().map(|&main| {
                        let replicas = Replicas::new(
                            Vec::new(),
                            party_stream(self.seed, Stream::Adversary, main),
                            net.lambda,
                        );
                        Box::new(SnowballEcho::new(replicas)) as Box<dyn Adversary>
                    }),
                    _ => None,
                };
                let mut world = World::new(header, net, parties, adversary, level);
                let honest = self.honest();
                let ones = (honest.len() as f64 * self.snowball.ones_fraction).round() as usize;
                for (i, &p) in honest.iter().enumerate() {
                    world.schedule_propose(0.0, p, Some(u8::from(i < ones)));
                }
                world
            }
        }
    }
}

/// Everything a finished run produced.
pub struct RunOutput {
    pub records: Vec<Record>,
    pub verdicts: Vec<Verdict>,
    /// Per honest party: (shadow checks, shadow violations), when enabled.
    pub shadow: Vec<(PartyId, u64, u64)>,
    pub events: u64,
}

impl RunOutput {
    pub fn safety_holds(&self) -> bool {
        analysis::safety_holds(&self.verdicts)
    }
}

/// Runs every checker that applies to the trace's protocol.
pub fn check(records: &[Record]) -> Result<Vec<Verdict>, analysis::CheckError> {
    let h = trace::header(records).ok_or(analysis::CheckError::MissingHeader)?;
    if h.protocol == Protocol::Snowball.name() {
        analysis::check_consensus(records)
    } else {
        let mut v = analysis::check_generic_broadcast(records)?;
        v.push(analysis::check_counter_thresholds(records)?);
        Ok(v)
    }
}

pub fn run(cfg: &ScenarioConfig) -> RunOutput {
    let mut world = cfg.build();
    world.run(cfg.horizon);
    let events = world.events_processed();
    let shadow = world
        .parties()
        .iter()
        .flatten()
        .filter_map(|h| h.as_avalanche())
        .filter_map(|p| p.shadow().map(|s| (p.id(), s.checks, s.violations)))
        .collect();
    let records = world.into_records();
    let verdicts = check(&records).expect("the world writes a header");
    RunOutput {
        records,
        verdicts,
        shadow,
        events,
    }
}

/// Per-party delivery and decision times, one row per event.
pub fn summary_csv(records: &[Record]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["party", "event", "item", "t"]).expect("in-memory");
    for r in records {
        let row = match &r.ev {
            Event::Deliver { party, payload, .. } => Some((party, "deliver", payload.to_string())),
            Event::Decide { party, value } => Some((party, "decide", value.to_string())),
            _ => None,
        };
        if let Some((party, event, item)) = row {
            w.write_record([party.to_string(), event.to_string(), item, r.t.to_string()])
                .expect("in-memory");
        }
    }
    String::from_utf8(w.into_inner().expect("flushed")).expect("csv is utf-8")
}

pub fn verdicts_json(verdicts: &[Verdict]) -> String {
    serde_json::to_string_pretty(verdicts).expect("verdicts serialize")
}

/// Writes `run.jsonl`, `summary.csv` and `verdicts.json` into `dir`.
pub fn write_outputs(dir: &Path, records: &[Record], verdicts: &[Verdict]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = std::io::BufWriter::new(std::fs::File::create(dir.join("run.jsonl"))?);
    trace::write_jsonl(records, f)?;
    std::fs::write(dir.join("summary.csv"), summary_csv(records))?;
    std::fs::write(dir.join("verdicts.json"), verdicts_json(verdicts) + "\n")?;
    Ok(())
}
