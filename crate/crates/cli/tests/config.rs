use std::fs;
use std::path::PathBuf;

use sensekit::inventory::Level;
use sensekit::profiles::{FixedPooling, ProfileKind};
use sensekit::senselearn::MergeMode;
use sensekit_cli::config::{ConfigError, PipelineConfig, DEFAULT_SEED};

fn overrides(specs: &[&str]) -> Vec<String> {
    specs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn defaults_without_a_file() {
    let cfg = PipelineConfig::load(None, &[]).unwrap();
    assert_eq!(cfg, PipelineConfig::default());
    assert_eq!(cfg.seed, DEFAULT_SEED);
    assert_eq!(cfg.out_dir, PathBuf::from("out"));
    assert_eq!(cfg.profile.temperature(), Some(0.005));
    assert!(cfg.learn.propagate);
    assert!(cfg.validate().is_ok());
}

#[test]
fn overrides_parse_as_toml_values() {
    let cfg = PipelineConfig::load(
        None,
        &overrides(&[
            "seed=7",
            "profile.kind=usm",
            "profile.t=0.01",
            "learn.level=synset",
            "learn.propagate=false",
            "learn.merge=concat",
            "corpora.train=[\"a.jsonl\", \"b.jsonl\"]",
            "evaluate.usm_cutoff=10",
        ]),
    )
    .unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.profile.kind, ProfileKind::Usm);
    assert_eq!(cfg.profile.temperature(), Some(0.01));
    assert_eq!(cfg.learn.level, Level::Synset);
    assert!(!cfg.learn.propagate);
    assert_eq!(cfg.learn.merge, Some(MergeMode::Concat));
    assert_eq!(cfg.corpora.train, vec![PathBuf::from("a.jsonl"), PathBuf::from("b.jsonl")]);
    assert_eq!(cfg.evaluate.usm_cutoff, Some(10));

    let fixed = PipelineConfig::load(None, &overrides(&["profile.kind=ws_int_last4"])).unwrap();
    assert_eq!(fixed.profile.kind, ProfileKind::Fixed(FixedPooling::WsIntLast4));
    assert_eq!(fixed.profile.temperature(), None);
}

#[test]
fn later_overrides_win_and_create_tables() {
    let cfg = PipelineConfig::load(None, &overrides(&["seed=1", "seed=2", "corpora.test.se07=x.xml"])).unwrap();
    assert_eq!(cfg.seed, 2);
    assert_eq!(cfg.corpora.test["se07"], PathBuf::from("x.xml"));
}

#[test]
fn malformed_and_unknown_overrides_fail() {
    assert!(matches!(PipelineConfig::load(None, &overrides(&["seed"])), Err(ConfigError::BadOverride(_))));
    assert!(matches!(PipelineConfig::load(None, &overrides(&["a..b=1"])), Err(ConfigError::BadOverride(_))));
    assert!(matches!(PipelineConfig::load(None, &overrides(&["bogus=1"])), Err(ConfigError::Syntax(_))));
    assert!(matches!(PipelineConfig::load(None, &overrides(&["seed=abc"])), Err(ConfigError::Syntax(_))));
    assert!(matches!(PipelineConfig::load(None, &overrides(&["seed=1", "seed.x=1"])), Err(ConfigError::Field { .. })));
}

#[test]
fn relative_paths_follow_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("conf");
    fs::create_dir(&sub).unwrap();
    fs::write(sub.join("wn.jsonl"), "").unwrap();
    let file = sub.join("run.toml");
    fs::write(
        &file,
        "inventory = \"wn.jsonl\"\nout_dir = \"/abs/out\"\n[stores]\ntest = { se2 = [\"se2.lmse\"] }\n[corpora]\ntest = { se2 = \"se2.xml\" }\n",
    )
    .unwrap();
    let cfg = PipelineConfig::load(Some(&file), &overrides(&["seed=3"])).unwrap();
    assert_eq!(cfg.inventory, Some(sub.join("wn.jsonl")));
    assert_eq!(cfg.out_dir, PathBuf::from("/abs/out"));
    assert_eq!(cfg.stores.test["se2"], vec![sub.join("se2.lmse")]);
    assert_eq!(cfg.seed, 3);
    match cfg.validate() {
        Err(ConfigError::Field { field, reason }) => {
            assert_eq!(field, "corpora.test.se2");
            assert!(reason.contains("file not found"), "{reason}");
        }
        other => panic!("expected missing file, got {other:?}"),
    }
}

#[test]
fn syntax_and_read_errors() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    fs::write(&file, "seed = [").unwrap();
    assert!(matches!(PipelineConfig::load(Some(&file), &[]), Err(ConfigError::Syntax(_))));
    fs::write(&file, "[learn]\nlevel = \"paragraph\"\n").unwrap();
    assert!(matches!(PipelineConfig::load(Some(&file), &[]), Err(ConfigError::Syntax(_))));
    let missing = dir.path().join("none.toml");
    assert!(matches!(PipelineConfig::load(Some(&missing), &[]), Err(ConfigError::Read { .. })));
}

#[test]
fn field_constraints() {
    let check = |spec: &str, field: &str| match PipelineConfig::load(None, &overrides(&[spec])).unwrap().validate() {
        Err(ConfigError::Field { field: f, .. }) => assert_eq!(f, field, "{spec}"),
        other => panic!("{spec}: expected field error, got {other:?}"),
    };
    check("profile.t=0", "profile.t");
    check("profile.t=-0.5", "profile.t");
    check("workers=0", "workers");
    check("evaluate.usm_cutoff=0", "evaluate.usm_cutoff");
    check("stores.test.nope=[]", "stores.test.nope");
}

#[test]
fn fingerprint_tracks_results_not_threads() {
    let base = PipelineConfig::load(None, &[]).unwrap();
    let threads = PipelineConfig::load(None, &overrides(&["workers=8"])).unwrap();
    let seeded = PipelineConfig::load(None, &overrides(&["seed=43"])).unwrap();
    assert_eq!(base.fingerprint(), threads.fingerprint());
    assert_ne!(base.fingerprint(), seeded.fingerprint());
    assert_eq!(base.fingerprint().len(), 64);
    assert!(!base.canonical_json().contains("workers"));
}

#[test]
fn display_round_trips_through_toml() {
    let cfg = PipelineConfig::load(None, &overrides(&["learn.merge=average", "corpora.train=[\"t.jsonl\"]"])).unwrap();
    let back: PipelineConfig = toml::from_str(&cfg.to_string()).unwrap();
    assert_eq!(back, cfg);
}
