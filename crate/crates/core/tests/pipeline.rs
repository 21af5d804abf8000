use std::path::PathBuf;

use nczeta::pipeline::{run_pipeline, Fault, FaultStage, PipelineConfig};

fn golden_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "tests", "golden"].iter().collect()
}

#[test]
fn clean_run_passes_with_goldens() {
    let cfg = PipelineConfig {
        golden_dir: Some(golden_dir()),
        ..Default::default()
    };
    let (rep, _) = run_pipeline(&cfg).unwrap();
    assert!(rep.passed, "{}", rep.render_text());
    assert_eq!(rep.golden.len(), 9);
    assert_eq!(rep.counts["b2_terms"], 87);
    assert!(rep.modular.k_odd && rep.modular.h_match && rep.modular.f_match);
}

#[test]
fn report_is_deterministic() {
    let cfg = PipelineConfig::default();
    let a = serde_json::to_string(&run_pipeline(&cfg).unwrap().0).unwrap();
    let b = serde_json::to_string(&run_pipeline(&cfg).unwrap().0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        cache_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let (cold, a) = run_pipeline(&cfg).unwrap();
    let (warm, b) = run_pipeline(&cfg).unwrap();
    assert!(cold.passed && warm.passed);
    assert_eq!(a.b2, b.b2);
    assert!(!a.from_cache && b.from_cache);
    assert_eq!(
        serde_json::to_string(&cold).unwrap(),
        serde_json::to_string(&warm).unwrap()
    );
}

#[test]
fn missing_golden_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        golden_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    assert!(run_pipeline(&cfg).is_err());
}

#[test]
fn every_fault_stage_is_detected() {
    for stage in FaultStage::ALL {
        for index in [0, 5] {
            let fault = Fault { stage, index };
            let cfg = PipelineConfig {
                fault: Some(fault),
                ..Default::default()
            };
            let (rep, _) = run_pipeline(&cfg).unwrap();
            assert!(!rep.passed, "{fault} not detected");
            assert!(!rep.failing().is_empty());
        }
    }
}
