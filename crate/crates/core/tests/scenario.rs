use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use avalab_core::ids::PartyId;
use avalab_core::scenario::{self, AdversaryKind, ConfigError, Protocol, ScenarioConfig};
use avalab_core::trace::{self, Event, TraceError, TraceLevel};

fn small(protocol: Protocol, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.protocol = protocol;
    cfg.seed = seed;
    cfg.horizon = 8.0;
    cfg.network.n = 20;
    cfg.params.k = 10;
    cfg.params.alpha = 8;
    cfg.params.beta1 = 8;
    cfg.params.beta2 = 40;
    cfg.workload.count = 6;
    cfg.workload.rate = 4.0;
    cfg
}

fn scenario_files() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

fn field_of(text: &str) -> String {
    match ScenarioConfig::from_toml(text) {
        Err(ConfigError::Invalid(e)) => e.field.to_string(),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn honest_runs_deliver_everything_for_every_avalanche_variant() {
    for protocol in [Protocol::Avalanche, Protocol::Glacier, Protocol::Implemented] {
        let cfg = small(protocol, 3);
        let out = scenario::run(&cfg);
        assert!(out.verdicts.iter().all(|v| v.holds), "{protocol:?}: {:?}", out.verdicts);
        let delivered: BTreeSet<_> = out
            .records
            .iter()
            .filter_map(|r| match &r.ev {
                Event::Deliver { party, payload, .. } => Some((*party, *payload)),
                _ => None,
            })
            .collect();
        assert_eq!(delivered.len(), 20 * 6, "{protocol:?}");
    }
}

#[test]
fn same_seed_same_bytes() {
    for protocol in [Protocol::Avalanche, Protocol::Snowball] {
        let mut cfg = small(protocol, 11);
        cfg.outputs.trace_level = TraceLevel::Full;
        let a = trace::to_jsonl(&scenario::run(&cfg).records);
        let b = trace::to_jsonl(&scenario::run(&cfg).records);
        assert_eq!(a, b);
        cfg.seed = 12;
        assert_ne!(a, trace::to_jsonl(&scenario::run(&cfg).records));
    }
}

#[test]
fn full_trace_level_adds_message_records_only() {
    let cfg = small(Protocol::Avalanche, 5);
    let mut full = cfg.clone();
    full.outputs.trace_level = TraceLevel::Full;
    let lean = scenario::run(&cfg).records;
    let rich: Vec<_> = scenario::run(&full)
        .records
        .into_iter()
        .filter(|r| !matches!(r.ev, Event::Send { .. } | Event::Recv { .. } | Event::Hear { .. }))
        .collect();
    assert_eq!(lean, rich);
}

#[test]
fn replay_gives_the_live_verdicts() {
    let mut cfg = small(Protocol::Avalanche, 2);
    cfg.network.f = 1;
    cfg.workload.count = 1;
    cfg.adversary.kind = AdversaryKind::DelayAttack;
    cfg.horizon = 20.0;
    let out = scenario::run(&cfg);
    let dir = tempfile::tempdir().unwrap();
    scenario::write_outputs(dir.path(), &out.records, &out.verdicts).unwrap();
    let f = std::fs::File::open(dir.path().join("run.jsonl")).unwrap();
    let back = trace::read_jsonl(std::io::BufReader::new(f)).unwrap();
    assert_eq!(back, out.records);
    assert_eq!(scenario::check(&back).unwrap(), out.verdicts);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("party,event,item,t\n"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verdicts.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), out.verdicts.len());
}

#[test]
fn truncated_and_corrupt_logs_are_rejected() {
    let out = scenario::run(&small(Protocol::Avalanche, 1));
    let log = trace::to_jsonl(&out.records);
    let lines: Vec<&str> = log.lines().collect();
    let truncated = lines[..lines.len() - 1].join("\n");
    assert!(matches!(trace::read_jsonl(truncated.as_bytes()), Err(TraceError::Truncated)));
    let mut corrupt = lines.clone();
    corrupt[3] = "{\"t\": 1.0, \"kind\": \"nonsense\"}";
    match trace::read_jsonl(corrupt.join("\n").as_bytes()) {
        Err(TraceError::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
    let headless = lines[1..].join("\n");
    assert!(matches!(
        trace::read_jsonl(headless.as_bytes()),
        Err(TraceError::MissingHeader { line: 1 })
    ));
}

#[test]
fn config_round_trip_is_idempotent() {
    for p in scenario_files() {
        let cfg = ScenarioConfig::load(&p).unwrap();
        let once = cfg.to_toml();
        let again = ScenarioConfig::from_toml(&once).unwrap();
        assert_eq!(again, cfg, "{}", p.display());
        assert_eq!(again.to_toml(), once);
    }
    let d = ScenarioConfig::default();
    assert_eq!(ScenarioConfig::from_toml("").unwrap(), d);
    assert_eq!((d.params.k, d.params.alpha, d.params.beta1, d.params.beta2, d.params.max_poll), (20, 15, 15, 150, 4));
}

#[test]
fn invalid_configs_name_the_field() {
    assert_eq!(field_of("[params]\nalpha = 10\n"), "params.alpha");
    assert_eq!(field_of("[params]\nk = 50\n"), "params.k");
    assert_eq!(field_of("[params]\nbeta1 = 200\n"), "params.beta2");
    assert_eq!(field_of("[network]\nf = 50\n"), "network.f");
    assert_eq!(field_of("[adversary]\nkind = \"delay-attack\"\n"), "network.f");
    assert_eq!(field_of("[network]\nf = 1\n[adversary]\nkind = \"gossip-attack\"\ngamma = 1.0\n"), "adversary.gamma");
    assert_eq!(field_of("[network]\nf = 1\n[adversary]\nvictim = 49\n"), "adversary.victim");
    assert_eq!(
        field_of("[network]\nf = 1\n[adversary]\nkind = \"delay-attack\"\n[workload]\ncount = 0\n"),
        "workload.count"
    );
    assert_eq!(field_of("protocol = \"snowball\"\n[network]\nf = 1\n[adversary]\nkind = \"delay-attack\"\n"), "adversary.kind");
    assert_eq!(field_of("horizon = -1.0\n"), "horizon");
    assert!(matches!(ScenarioConfig::from_toml("bogus = 1\n"), Err(ConfigError::Parse(_))));
}

#[test]
fn delay_attack_stalls_only_the_victim() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/delay-attack.toml");
    let cfg = ScenarioConfig::load(&path).unwrap();
    let out = scenario::run(&cfg);
    let target = cfg.target_payload().unwrap();
    let got: BTreeSet<PartyId> = out
        .records
        .iter()
        .filter_map(|r| match &r.ev {
            Event::Deliver { party, payload, .. } if *payload == target => Some(*party),
            _ => None,
        })
        .collect();
    assert!(!got.contains(&cfg.victim()));
    assert!(got.len() > cfg.honest().len() / 2);
    assert!(out.safety_holds());
    let flagged: Vec<_> = out.verdicts.iter().filter(|v| !v.holds).map(|v| v.property.as_str()).collect();
    assert_eq!(flagged, vec!["validity", "agreement"]);
}

#[test]
fn glacier_counters_dominate_on_shared_randomness() {
    let mut cfg = small(Protocol::Avalanche, 4);
    cfg.shadow = true;
    cfg.network.f = 1;
    cfg.adversary.kind = AdversaryKind::DelayAttack;
    let out = scenario::run(&cfg);
    assert!(!out.shadow.is_empty());
    for (p, checks, violations) in out.shadow {
        assert!(checks > 0, "{p}");
        assert_eq!(violations, 0, "{p}");
    }
}

#[test]
fn snowball_decides_once_and_agrees() {
    let mut cfg = small(Protocol::Snowball, 9);
    cfg.snowball.beta = 8;
    let out = scenario::run(&cfg);
    assert!(out.verdicts.iter().all(|v| v.holds), "{:?}", out.verdicts);
    let decisions = out.records.iter().filter(|r| matches!(r.ev, Event::Decide { .. })).count();
    assert_eq!(decisions, 20);
}
