use nlfast::cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

fn run_capture(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = run(std::iter::once("nlfast").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn data_lines(s: &str) -> Vec<&str> {
    s.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn apply_is_deterministic_without_timing() {
    let args = ["apply", "--dim", "2", "--n", "16", "--delta0", "0.5", "--seed", "9", "--no-timing"];
    let (c1, a) = run_capture(&args);
    let (c2, b) = run_capture(&args);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    assert_eq!(a, b);
    assert!(a.starts_with("# config: command=apply"));
    assert!(a.contains("seed=9"));
}

#[test]
fn split_prints_exact_coefficients() {
    let (code, out) = run_capture(&["split", "--K", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("= 15/8 ="));
    assert!(out.contains("= -5/4 ="));
    assert!(out.contains("= 3/8 ="));
    let rows = data_lines(&out);
    assert_eq!(rows[0], "s,gamma,p,kappa");
    assert_eq!(rows.len(), 102);
    assert!(rows.last().unwrap().ends_with(",0"));
    let (_, out) = run_capture(&["split", "--K", "0"]);
    assert!(out.contains("c_0 (s^0) = 1 = 1"));
}

#[test]
fn rank_profile_ratio_is_bounded() {
    let (code, out) = run_capture(&["rank-profile", "--n", "256", "--regularities", "-1,0,3"]);
    assert_eq!(code, EXIT_OK);
    let rows = data_lines(&out);
    assert_eq!(rows[0], "regularity_k,N,delta,epsilon,stored_floats,dense_floats,ratio,max_rank");
    for row in &rows[1..] {
        let ratio: f64 = row.split(',').nth(6).unwrap().parse().unwrap();
        assert!(ratio > 0.0 && ratio <= 1.5);
    }
}

#[test]
fn bench_reports_slopes() {
    let (code, out) = run_capture(&["bench", "--sweep", "64,128,256,512", "--no-timing"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("# slope dense_ops = 2.0000"));
    let (code, _) = run_capture(&["bench", "--sweep", "64,128"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn solve_outcomes() {
    let (code, out) = run_capture(&["solve", "--n", "128", "--rhs", "constant:0"]);
    assert_eq!(code, EXIT_OK);
    assert!(data_lines(&out)[1].starts_with("CG,0,"));
    let (code, _) = run_capture(&["solve", "--n", "128", "--max-iter", "1", "--tol", "1e-14"]);
    assert_eq!(code, EXIT_FAILURE);
    let (code, out) = run_capture(&["solve", "--n", "256", "--horizon", "bump"]);
    assert_eq!(code, EXIT_OK);
    assert!(data_lines(&out)[1].starts_with("CGNR,"));
}

#[test]
fn usage_errors() {
    for args in [
        &["apply", "--n", "6"][..],
        &["frobnicate"],
        &["split", "--K", "20"],
        &["split", "--profile", "PolynomialTruncated"],
        &["apply", "--dim", "2", "--K", "1"],
        &["solve", "--rhs", "sometimes"],
    ] {
        assert_eq!(run_capture(args).0, EXIT_USAGE, "{args:?}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = std::env::temp_dir().join(format!("nlfast-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "# run\nn = 64\nsplit_K = 2\nseed = 3\ntiming = false\n").unwrap();
    let out_path = dir.join("out.csv");
    let code = run(
        ["nlfast", "apply", "--config", cfg.to_str().unwrap(), "--n", "128", "--out", out_path.to_str().unwrap()],
        &mut Vec::new(),
    );
    assert_eq!(code, EXIT_OK);
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("n=128") && text.contains("split_K=2"));
    assert!(data_lines(&text)[1].starts_with("128,"));
    std::fs::remove_dir_all(&dir).unwrap();
}
