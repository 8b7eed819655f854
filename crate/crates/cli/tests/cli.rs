use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fermat-quad"));
    c.env_remove("FLT_SIEVE_JOBS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn sieve_reports_published_classes() {
    let out = run(&["sieve", "--field", "5", "--zeta", "3", "--check"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let elim: Vec<u64> = serde_json::from_value(v["eliminated_r_star"].clone()).unwrap();
    assert_eq!(elim.len(), 32);
    assert_eq!(&elim[..8], &[7, 19, 29, 41, 55, 67, 77, 89]);
    assert_eq!(v["collapsed"]["modulus"], 48);

    let manifest: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(manifest["command"], "sieve");
    let body = String::from_utf8(out.stdout).unwrap();
    assert_eq!(manifest["checksum"], fermat_quad_checksum(body.trim_end()));
}

fn fermat_quad_checksum(s: &str) -> String {
    use sha2::{Digest, Sha256};
    format!("{:x}", Sha256::digest(s.as_bytes()))
}

#[test]
fn unsupported_field_and_bad_flags_exit_one() {
    assert_eq!(
        run(&["sieve", "--field", "9", "--zeta", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["sieve", "--field", "5", "--zeta", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["sieve", "--field", "5", "--zeta", "1", "--bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn reports_identical_across_worker_counts() {
    let base = run(&["sieve", "--field", "17", "--zeta", "3", "--jobs", "1"]).stdout;
    for jobs in ["4", "8"] {
        assert_eq!(
            run(&["sieve", "--field", "17", "--zeta", "3", "--jobs", jobs]).stdout,
            base
        );
    }
    let env = bin()
        .args(["sieve", "--field", "17", "--zeta", "3"])
        .env("FLT_SIEVE_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(env.stdout, base);
    let manifest: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&env.stderr).trim()).unwrap();
    // the sequential build ignores the worker count
    let want = if cfg!(feature = "parallel") { 3 } else { 1 };
    assert_eq!(manifest["jobs"], want);
}

#[test]
fn csv_and_out_file() {
    let out = run(&["sieve", "--field", "17", "--zeta", "1", "--format", "csv"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "r_star\n5\n7\n\n");
    let path = std::env::temp_dir().join(format!("fq-cli-{}.json", std::process::id()));
    let out = run(&[
        "sieve",
        "--field",
        "5",
        "--zeta",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["eliminated_r_star"], serde_json::json!([5, 7]));
    std::fs::remove_file(path).unwrap();
}

#[test]
fn bound_and_theorem() {
    let out = run(&["bound", "--field", "17", "--zeta", "3", "--check"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout_json(&out)["bound_primes"],
        serde_json::json!([2, 3, 5, 7])
    );
    let v = stdout_json(&run(&["theorem", "--field", "5"]));
    assert_eq!(v["classes"][1]["residues"], serde_json::json!([19, 41]));
}

#[test]
fn check_flag_reports_mismatch_with_exit_two() {
    // conjugate encoding gives the same classes, so the check still passes
    let out = run(&[
        "sieve",
        "--field",
        "5",
        "--zeta",
        "1",
        "--conjugate-omega",
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(0));
    // a curve file lacking the isogenous member leaves surviving classes unexplained
    let path = std::env::temp_dir().join(format!("fq-cli-curves-{}.jsonl", std::process::id()));
    std::fs::write(&path, "{\"label\": \"Q5-P3-a1\", \"d\": 5, \"conductor\": \"2^3\", \"roots\": [[0, 0], [-12, 8], [-13, 8]]}\n").unwrap();
    let out = run(&[
        "obstruct",
        "--field",
        "5",
        "--curves",
        path.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["cross_check"]["consistent"], false);
    std::fs::remove_file(path).unwrap();
}

#[test]
fn obstruct_with_bundled_curves() {
    let out = run(&["obstruct", "--field", "17", "--check"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["triples"].as_array().unwrap().len(), 12);
    assert_eq!(v["saturation"]["stable"], true);
    assert_eq!(v["cross_check"]["consistent"], true);
    assert_eq!(
        run(&[
            "obstruct",
            "--field",
            "5",
            "--curves",
            "/nonexistent/curves.jsonl"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn symbols_and_traces() {
    let v = stdout_json(&run(&[
        "symbol",
        "--eval",
        "hilbert-q",
        "--a",
        "2",
        "--b",
        "3",
        "--place",
        "2",
    ]));
    assert_eq!(v["value"], -1);
    let v = stdout_json(&run(&[
        "symbol",
        "--eval",
        "reciprocity-q",
        "--a",
        "-7/3",
        "--b",
        "10",
    ]));
    assert_eq!(v["value"], 1);
    let v = stdout_json(&run(&[
        "symbol",
        "--eval",
        "constraint",
        "--field",
        "17",
        "--a",
        "3,1",
        "--b",
        "-1,4",
    ]));
    assert_eq!(v["product"], 1);
    let v = stdout_json(&run(&[
        "symbol", "--eval", "hilbert", "--field", "5", "--a", "-1,0", "--b", "-1,0", "--place",
        "real1",
    ]));
    assert_eq!(v["values"][0]["value"], -1);
    // even place outside the supported case is an explicit error
    let out = run(&[
        "symbol", "--eval", "hilbert", "--field", "5", "--a", "3,0", "--b", "2,0", "--place", "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even"));

    let v = stdout_json(&run(&[
        "trace", "--field", "5", "--curve", "Q5-P3-a1", "--prime", "7",
    ]));
    assert_eq!(v["traces"][0]["trace"], 10);
    let v = stdout_json(&run(&[
        "trace", "--field", "17", "--curve", "Q17-2-a1", "--prime", "3",
    ]));
    assert_eq!(v["traces"][0]["trace"], -2);
    assert_eq!(
        run(&["trace", "--field", "17", "--curve", "Q17-2-a1", "--prime", "2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["trace", "--field", "5", "--curve", "nope", "--prime", "3"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "{err}");
    assert_eq!(err.lines().filter(|l| l.starts_with("PASS")).count(), 11);
}
