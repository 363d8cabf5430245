//! The JSON files under `configs/` stay in step with the in-code reference scenarios.

use std::path::PathBuf;

use lohe_core::config::{parse_config, SimConfig};
use lohe_core::verify::{reference_config, reference_tensor_norm_config, TheoremId};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> SimConfig {
    let path = configs_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn file_name(theorem: TheoremId) -> String {
    let stem: String = theorem
        .as_str()
        .to_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    format!("ref_{stem}.json")
}

#[test]
fn reference_files_match_code() {
    for theorem in TheoremId::ALL {
        assert_eq!(load(&file_name(theorem)), reference_config(theorem), "{theorem}");
    }
    assert_eq!(load("ref_l21_tensor.json"), reference_tensor_norm_config());
}

#[test]
fn auxiliary_configs_parse() {
    let gate = load("t41_gate_violation.json");
    assert_eq!(gate.couplings.kappa1, gate.couplings.kappa0);
    let sweep = load("sweep_t41_kappa1.json");
    assert!(sweep.sweep.is_some());
    let sim = load("simulate_lhs.json");
    assert_eq!(sim.cross_ratio_tuples().len(), 2);
}
