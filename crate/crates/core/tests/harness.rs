use shadowtomo::harness::{
    emit::write_csv, make_wiesner_instance, run_and_emit, run_scenario, ScenarioConfig, CSV_HEADER,
};
use shadowtomo::DimCap;

fn config(text: &str) -> ScenarioConfig {
    ScenarioConfig::parse(text, &[]).unwrap()
}

#[test]
fn header_only_csv_without_rows() {
    let mut buf = Vec::new();
    write_csv(&[], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), vec![CSV_HEADER.join(",")]);
}

#[test]
fn one_trial_one_row() {
    let cfg = config("scenario=verify-gentle\ntrials=1\n");
    let dir = tempfile::tempdir().unwrap();
    let res = run_and_emit(&cfg, dir.path(), 1).unwrap();
    assert_eq!(res.rows.len(), 1);
    let csv = std::fs::read_to_string(dir.path().join("verify-gentle.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("verify-gentle.json").exists());
}

#[test]
fn success_rate_is_row_mean() {
    let cfg = config("scenario=lower-classical\ntrials=40\nT=2\nseed=5\n");
    let res = run_scenario(&cfg, 2).unwrap();
    let mean = res.rows.iter().filter(|r| r.success).count() as f64 / res.rows.len() as f64;
    assert_eq!(res.summary.success_rate, mean);
    assert!(mean > 0.0 && mean < 1.0, "expected a mix of outcomes, got {mean}");
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let cfg = config("scenario=orbound\ntrials=6\nseed=9\n");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_and_emit(&cfg, a.path(), 1).unwrap();
    run_and_emit(&cfg, b.path(), 3).unwrap();
    for f in ["orbound.csv", "orbound.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn shadow_on_maximally_mixed_needs_no_refinement() {
    let cfg = config("scenario=shadow\ntrials=1\nstate=maximally_mixed\nD=2\nM=2\nq=10\nseed=3\n");
    let res = run_scenario(&cfg, 1).unwrap();
    let row = &res.rows[0];
    assert!(row.error.is_none(), "{:?}", row.error);
    assert!(row.success);
    assert_eq!(row.iterations, 0);
}

#[test]
fn failing_trials_become_error_rows() {
    let cfg = config("scenario=orbound\ntrials=2\nbudget=10\n");
    let res = run_scenario(&cfg, 1).unwrap();
    assert!(res.rows.iter().all(|r| !r.success && r.error.is_some()));
    assert_eq!(res.summary.errors.len(), 2);
    assert!(!res.summary.passed);
}

#[test]
fn wiesner_verifier_values() {
    let (w, inst) = make_wiesner_instance(2, 21, DimCap::default()).unwrap();
    assert_eq!(inst.effects.len(), 16);
    assert!((inst.ground_truth[w.key] - 1.0).abs() < 1e-10);
    // Base-4 digit per qubit: basis in the high bit, value in the low bit.
    let flip_basis = w.key ^ (0b10 << 2);
    let flip_bit = w.key ^ 0b01;
    assert!((inst.ground_truth[flip_basis] - 0.5).abs() < 1e-10);
    assert!(inst.ground_truth[flip_bit].abs() < 1e-10);
}

#[test]
fn transcripts_are_written_on_request() {
    let cfg = config("scenario=shadow\ntrials=2\nM=2\nq=6\nwrite_transcripts=true\n");
    let dir = tempfile::tempdir().unwrap();
    run_and_emit(&cfg, dir.path(), 1).unwrap();
    for t in 0..2 {
        let text = std::fs::read_to_string(dir.path().join(format!("transcripts/trial-{t}.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("halt_reason").is_some());
    }
}
