use dynaq_core::config::RunConfig;
use dynaq_core::experiment::{run_experiment, write_outputs, ExperimentKind};

/// Every experiment at toy scale.
fn small() -> RunConfig {
    RunConfig::parse(
        "seeds = 2
galmo.max_epoch = 40
q.hidden = 40
q.init_bound = 1
q.loss = cross-entropy
speed.trials = 30
control.laps = 3
replay.opening = 1:5,2:5
replay.pretrain_days = 2
replay.day_trials = 5
replay.sessions = 3-4,5-3
replay.session_trials = 6",
    )
    .unwrap()
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let cfg = small();
    for kind in ExperimentKind::ALL {
        let a = run_experiment(kind, &cfg).unwrap().files();
        let b = run_experiment(kind, &cfg).unwrap().files();
        assert_eq!(a, b, "{}", kind.name());
    }
}

#[test]
fn different_seeds_give_different_runs() {
    let cfg = small();
    let mut other = cfg.clone();
    other.seed += 1;
    let kind = ExperimentKind::QLearningVsDynaQ;
    assert_ne!(run_experiment(kind, &cfg).unwrap().files(), run_experiment(kind, &other).unwrap().files());
}

#[test]
fn written_artifacts_are_reproducible() {
    let cfg = small();
    let out = run_experiment(ExperimentKind::ReplayStats, &cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_outputs(a.path(), &out, &cfg).unwrap();
    write_outputs(b.path(), &run_experiment(ExperimentKind::ReplayStats, &cfg).unwrap(), &cfg).unwrap();
    for name in ["config.txt", "replay_summary.csv", "runs.jsonl"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let echoed = std::fs::read_to_string(a.path().join("config.txt")).unwrap();
    assert_eq!(RunConfig::parse(&echoed).unwrap(), cfg);
}
