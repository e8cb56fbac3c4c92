use dynaq_core::config::RunConfig;
use dynaq_core::dynaq::AgentConfig;
use dynaq_core::world_model::WorldModelConfig;

fn config_file(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    std::fs::read_to_string(path).unwrap()
}

/// The published parameter table, line by line as the dump spells it.
const TABLE: [&str; 18] = [
    "galmo.max_epoch = 4000",
    "galmo.w = 3",
    "budget = 20",
    "q.hidden = 10",
    "r.hidden = 16",
    "p.hidden = 26",
    "q.init_bound = 0.05",
    "r.init_bound = 0.0045",
    "p.init_bound = 0.1",
    "q.learning_rate = 0.5",
    "r.learning_rate = 0.1",
    "p.learning_rate = 0.1",
    "p.hidden_slope = 0.9",
    "r.hidden_slope = 1",
    "q.hidden_slope = 1",
    "p.output_slope = 0.5",
    "r.output_slope = 0.4",
    "q.output_slope = 0.4",
];

#[test]
fn default_dump_reproduces_the_parameter_table() {
    let dump = RunConfig::default().dump();
    for line in TABLE {
        assert!(dump.lines().any(|l| l == line), "missing {line:?} in\n{dump}");
    }
}

#[test]
fn shipped_configs_parse_to_the_expected_settings() {
    assert_eq!(RunConfig::parse(&config_file("table2.cfg")).unwrap(), RunConfig::default());
    let calibrated = RunConfig::parse(&config_file("calibrated.cfg")).unwrap();
    assert_eq!(calibrated.agent, AgentConfig::calibrated());
    assert_eq!(calibrated.world, WorldModelConfig::calibrated());
}

#[test]
fn dump_of_any_override_parses_back() {
    let mut cfg = RunConfig::parse(&config_file("calibrated.cfg")).unwrap();
    cfg.apply("seed = 99\nreplay.switch_fraction = 0.25\nworld.reward_input = arrival\nsnap = true").unwrap();
    assert_eq!(RunConfig::parse(&cfg.dump()).unwrap(), cfg);
}
