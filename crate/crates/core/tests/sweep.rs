use wifi_slicing::runner::{CONFIG_LOG_CSV, FLOWS_CSV, RUNS_CSV, SUMMARY_CSV};
use wifi_slicing::{sweep, ExperimentPlan};

fn files(dir: &std::path::Path) -> Vec<Vec<u8>> {
    [FLOWS_CSV, RUNS_CSV, CONFIG_LOG_CSV, SUMMARY_CSV]
        .iter()
        .map(|n| std::fs::read(dir.join(n)).unwrap())
        .collect()
}

#[test]
fn serial_and_parallel_sweeps_write_identical_files() {
    let mut plan = ExperimentPlan::grid([1, 2]);
    for run in &mut plan.runs {
        run.config.sim_time = 3.0;
    }
    let serial = tempfile::tempdir().unwrap();
    let parallel = tempfile::tempdir().unwrap();
    let again = tempfile::tempdir().unwrap();
    let a = sweep(&plan.clone().with_jobs(1), serial.path()).unwrap();
    sweep(&plan.clone().with_jobs(4), parallel.path()).unwrap();
    sweep(&plan.with_jobs(4), again.path()).unwrap();
    assert_eq!(a.completed, 18);
    assert!(a.failures.is_empty());
    assert_eq!(files(serial.path()), files(parallel.path()));
    assert_eq!(files(parallel.path()), files(again.path()));
}

#[test]
fn failing_entry_does_not_stop_the_rest() {
    let mut plan = ExperimentPlan::grid([1]);
    for run in &mut plan.runs {
        run.config.sim_time = 1.0;
    }
    plan.runs[4].config.control_interval = 0.3;
    let dir = tempfile::tempdir().unwrap();
    let report = sweep(&plan, dir.path()).unwrap();
    assert_eq!(report.completed, 8);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].0, plan.runs[4].run_id());
    let runs = std::fs::read_to_string(dir.path().join(RUNS_CSV)).unwrap();
    assert_eq!(runs.lines().count(), 1 + 8);
}
