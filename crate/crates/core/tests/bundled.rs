use std::path::{Path, PathBuf};

use cloudadl::harness::stored_count;
use cloudadl::runtime::EventKind;
use cloudadl::{check, load_files, load_scenario_file, run_scenario, RunOptions, Verdict};

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

#[test]
fn bundled_models_are_clean() {
    let sets: [&[&str]; 3] = [
        &["sensor_channel/types.arc", "sensor_channel/sensor_channel.arc"],
        &["receiver_selection/p.arc"],
        &["supervision/deep.arc"],
    ];
    for set in sets {
        let paths: Vec<PathBuf> = set.iter().map(|p| models().join(p)).collect();
        let model = load_files(&paths).unwrap();
        assert_eq!(check(&model), vec![], "{set:?}");
    }
}

#[test]
fn bundled_scenarios_pass() {
    for scn in [
        "sensor_channel/sensor_channel.scn",
        "sensor_channel/single.scn",
        "receiver_selection/chains.scn",
        "supervision/restart.scn",
    ] {
        let s = load_scenario_file(&models().join(scn)).unwrap();
        let out = run_scenario(&s, &RunOptions::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Pass, "{scn}");
    }
}

#[test]
fn sensor_channel_counts() {
    let s = load_scenario_file(&models().join("sensor_channel/sensor_channel.scn")).unwrap();
    let out = run_scenario(&s, &RunOptions::default()).unwrap();
    assert_eq!(out.log.port_stream("ack").len(), 100);
    assert_eq!(stored_count(&out.log, "root/store"), 83);
    let rows: usize = out.stores.iter().filter(|(p, _)| p.starts_with("root/store")).map(|(_, r)| r.len()).sum();
    assert_eq!(rows, 83);
    assert_eq!(s.topology.atomics().count(), 4);
}

#[test]
fn fatal_scenario_ends_in_fatal_verdict() {
    let s = load_scenario_file(&models().join("supervision/fatal.scn")).unwrap();
    let out = run_scenario(&s, &RunOptions::default()).unwrap();
    assert!(matches!(out.verdict, Verdict::Fatal { .. }));
    assert_eq!(out.log.of_kind(EventKind::Escalate).count(), 3);
    assert_eq!(out.log.of_kind(EventKind::Fatal).count(), 1);
}

#[test]
fn seed_override_keeps_verdict() {
    let s = load_scenario_file(&models().join("receiver_selection/chains.scn")).unwrap();
    for seed in [0, 1, 99] {
        let out = run_scenario(&s, &RunOptions { seed: Some(seed), ..Default::default() }).unwrap();
        assert_eq!(out.verdict, Verdict::Pass);
    }
}
