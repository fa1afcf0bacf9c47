// SPDX-License-Identifier: Apache-2.0
// Copyright The srv6-overlay Authors

use std::path::PathBuf;
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn srv6sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srv6sim")).current_dir(scenarios()).args(args).output().expect("spawn srv6sim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(scenarios().join("golden").join(name)).unwrap()
}

#[test]
fn basic_converges_with_six_tunnels_per_family() {
    let o = srv6sim(&["run", "--scenario", "basic.scn"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("tunnels: v4 6, v6 6"), "{}", stdout(&o));
}

#[test]
fn show_matches_golden_fixtures() {
    for node in ["master", "worker1", "worker2"] {
        for what in ["localsids", "policies", "steering", "encap-source"] {
            let o = srv6sim(&["show", "--scenario", "full.scn", node, what]);
            assert!(o.status.success());
            assert_eq!(stdout(&o), golden(&format!("full-{node}-{what}.txt")), "{node} {what}");
        }
    }
    for what in ["localsids", "policies", "steering"] {
        let o = srv6sim(&["show", "--scenario", "basic.scn", "node1", what]);
        assert_eq!(stdout(&o), golden(&format!("basic-node1-{what}.txt")), "{what}");
    }
    let o = srv6sim(&[
        "show",
        "--scenario",
        "full.scn",
        "--apply-configmap",
        "full/configmap-modified.yaml",
        "worker2",
        "policies",
    ]);
    assert_eq!(stdout(&o), golden("full-modified-worker2-policies.txt"));
}

#[test]
fn rewiring_changes_waypoints() {
    let args = ["trace", "--scenario", "full.scn", "--from", "pod-worker2", "--to", "pod-worker1", "--family", "v6"];
    let o = srv6sim(&[&args[..], &["--expect-waypoints", "R4,R3"]].concat());
    assert!(o.status.success(), "{}", stdout(&o));
    let o = srv6sim(&[&args[..], &["--expect-waypoints", "R7,R2,R3"]].concat());
    assert_eq!(o.status.code(), Some(1));
    let o = srv6sim(
        &[&args[..], &["--apply-configmap", "full/configmap-modified.yaml", "--expect-waypoints", "R7,R2,R3"]].concat(),
    );
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn apply_configmap_summaries() {
    let o = srv6sim(&[
        "apply-configmap",
        "--scenario",
        "full.scn",
        "full/configmap-modified.yaml",
        "--expect",
        "1 replaced",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = srv6sim(&["apply-configmap", "--scenario", "full.scn", "full/configmap.yaml"]);
    assert_eq!(stdout(&o), "0 changes\n");
}

#[test]
fn bgp_injection_enables_pings() {
    let o = srv6sim(&[
        "ping",
        "--scenario",
        "full-bgp.scn",
        "--from",
        "pod-worker2",
        "--to",
        "pod-worker1",
        "--expect-delivered",
        "0",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("100% packet loss"));
    let o = srv6sim(&["show", "--scenario", "full-bgp.scn", "worker2", "policies"]);
    assert_eq!(stdout(&o), "");

    let mut args: Vec<String> = ["ping", "--scenario", "full-bgp.scn", "--from", "pod-worker2", "--to", "pod-worker1"]
        .map(String::from)
        .to_vec();
    for f in ["to-master", "to-worker1", "to-worker2"] {
        for fam in ["v4", "v6"] {
            args.extend(["--inject".into(), format!("full/policies/{f}-{fam}.yaml")]);
        }
    }
    args.extend(["--expect-delivered".into(), "4".into()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = srv6sim(&refs);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("4 received, 0% packet loss"));
}

#[test]
fn report_is_replay_deterministic() {
    let args = ["report", "--scenario", "basic.scn", "--ping-all", "2", "--seed", "9"];
    let (a, b) = (srv6sim(&args), srv6sim(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let csv = stdout(&srv6sim(&["report", "--scenario", "basic.scn", "--format", "csv"]));
    assert!(csv.starts_with("section,key,value\n"));
    assert!(csv.contains("ping,sent,0\n"));
}

#[test]
fn exit_codes() {
    let o = srv6sim(&["inject", "--scenario", "full.scn", "full/policies/to-master-v4.yaml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not available in configmap mode"));
    assert_eq!(srv6sim(&["run"]).status.code(), Some(2));
    assert_eq!(srv6sim(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(srv6sim(&["run", "--scenario", "missing.scn"]).status.code(), Some(1));
    let o = srv6sim(&["show", "--scenario", "basic.scn", "R9", "policies"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bgp_mode_override_installs_the_configmap_policies() {
    let cm = srv6sim(&["show", "--scenario", "full.scn", "worker2", "steering"]);
    let bgp = srv6sim(&["show", "--scenario", "full.scn", "--mode", "bgp", "worker2", "steering"]);
    assert!(bgp.status.success(), "{}", String::from_utf8_lossy(&bgp.stderr));
    assert_eq!(cm.stdout, bgp.stdout);
}
