use std::path::Path;
use std::process::{Command, Output};

use labelswitch::cli::files::{read_dataset, read_permutations, read_table, read_trace};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelswitch"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let sim = run(&["simulate", "--experiment", "eq8", "--n", "60", "--out", out]);
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    let (data, _) = read_dataset(&dir.path().join("dataset.csv")).unwrap();
    assert_eq!((data.n(), data.dim()), (60, 1));
    assert_eq!(data.true_k(), Some(5));

    let sample = run(&["sample", "--experiment", "eq8", "--iters", "600", "--burnin", "100", "--out", out]);
    assert_eq!(code(&sample), 0, "{}", String::from_utf8_lossy(&sample.stderr));
    let (trace, _) = read_trace(&dir.path().join("trace.csv")).unwrap();
    assert_eq!((trace.len(), trace.k()), (500, 5));
    assert!(trace.has_allocations() && trace.has_log_posterior());

    let relabel = run(&["relabel", "--method", "minvar,cron-west", "--m", "20", "--out", out]);
    assert_eq!(code(&relabel), 0, "{}", String::from_utf8_lossy(&relabel.stderr));
    let perms = read_permutations(&dir.path().join("relabel/minvar.perm.csv")).unwrap();
    assert_eq!(perms.len(), 500);
    let (relabelled, _) = read_trace(&dir.path().join("relabel/minvar.csv")).unwrap();
    for ((d, r), (_, nu)) in trace.draws().iter().zip(relabelled.draws()).zip(&perms) {
        assert_eq!(d.spec.permuted(nu).unwrap(), r.spec);
    }

    let diag = run(&["diagnose", "--method", "minvar,cron-west", "--out", out]);
    assert_eq!(code(&diag), 0, "{}", String::from_utf8_lossy(&diag.stderr));
    let (header, rows) = read_table(&dir.path().join("report/summary.csv")).unwrap();
    assert_eq!(header[..3], ["method", "kl", "misclassification_rate"]);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let kl: f64 = r[1].parse().unwrap();
        let rate: f64 = r[2].parse().unwrap();
        assert!(kl >= 0.0 && (0.0..=1.0).contains(&rate));
    }
    let (_, mis) = read_table(&dir.path().join("report/misclassification.csv")).unwrap();
    let total: usize = mis.iter().flat_map(|r| r[2..].iter()).map(|v| v.parse::<usize>().unwrap()).sum();
    assert_eq!(total, 2 * 60);
}

#[test]
fn galaxy_has_no_truth_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let res = run(&["compare", "--experiment", "galaxy", "--iters", "400", "--burnin", "100", "--method", "marin", "--out", out]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let (_, rows) = read_table(&dir.path().join("report/summary.csv")).unwrap();
    assert_eq!(rows[0][0], "marin");
    assert_eq!(rows[0][2], "NA");
    assert_ne!(rows[0][1], "NA");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(code(&run(&["simulate", "--n", "0", "--out", out])), 2);
    assert_eq!(code(&run(&["rhat", "--chains", "1", "--out", out])), 2);
    assert_eq!(code(&run(&["relabel", "--method", "bogus", "--out", out])), 2);
    assert_eq!(code(&run(&["sample", "--experiment", "custom", "--out", out])), 2);
}

#[test]
fn missing_and_malformed_inputs_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let missing = run(&["relabel", "--trace", path(&dir.path().join("absent.csv")), "--out", out]);
    assert_eq!(code(&missing), 3);
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "iter,w_1\n1,1\n").unwrap();
    std::fs::write(dir.path().join("bad.meta"), "K=1\nd=1\nn=0\ndraws=1\nlog_post=false\ndataset_id=x\n").unwrap();
    assert_eq!(code(&run(&["relabel", "--trace", path(&bad), "--out", out])), 3);
}
