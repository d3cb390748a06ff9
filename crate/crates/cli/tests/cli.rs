use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kmax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmax")).args(args).output().expect("spawn kmax")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn data_rows(csv: &str) -> usize {
    csv.lines().count() - 1
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn affine_family_passes_with_unit_constant() {
    let out = kmax(&["verify-family", "--builtin", "affine:8"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["family_size"], 64);
    assert_eq!(report["best_cg"], 1.0);
    assert_eq!(report["cardinality_ok"], true);
}

#[test]
fn symmetric_group_constant() {
    let out = kmax(&["verify-family", "--builtin", "sym:3", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains(",1.5,3/2,"), "{}", stdout(&out));
    // Demanding a smaller constant than the family has fails.
    assert_eq!(code(&kmax(&["verify-family", "--builtin", "sym:3", "--cg", "1.2"])), 1);
}

#[test]
fn singleton_family_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "single.json",
        r#"{"n":2,"atoms":[0,1],"weights":[0.5,0.5],"maps":[[0,1]],"map_weights":[1.0]}"#,
    );
    let out = kmax(&["verify-family", "--family", &file]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn emitted_family_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let out = kmax(&["emit-family", "--builtin", "affine:4", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let out = kmax(&["verify-family", "--family", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{not json");
    assert_eq!(code(&kmax(&["verify-family", "--family", &bad])), 2);
    assert_eq!(code(&kmax(&["verify-family", "--builtin", "affine:6"])), 2);
    assert_eq!(code(&kmax(&["verify-family", "--builtin", "bogus:3"])), 2);
    assert_eq!(code(&kmax(&["verify-family"])), 2);
    assert_eq!(code(&kmax(&["sweep", "ratio", "--n", "2,x", "--ell", "1"])), 2);
    assert_eq!(code(&kmax(&["sweep", "ratio", "--dist", "cauchy", "--n", "2", "--ell", "1"])), 2);
    assert_eq!(code(&kmax(&["orlicz", "norm", "--fn", "power:0.5", "--x", "1"])), 2);
}

#[test]
fn identity_bounds_row() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "id.csv", "1,0\n0,1\n");
    let out = kmax(&["check-bounds", &m, "--builtin", "sym:2", "--ell", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = stdout(&out);
    assert_eq!(data_rows(&csv), 1);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    // integral, expectation
    assert_eq!((row[6], row[7]), ("1.0", "0.5"));

    assert_eq!(code(&kmax(&["check-bounds", &m, "--builtin", "sym:2", "--ell", "0"])), 2);
}

#[test]
fn random_matrices_against_affine_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut state = 0x2545F4914F6CDD1Du64;
    for k in 0..10 {
        let body: String = (0..4)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        state ^= state << 13;
                        state ^= state >> 7;
                        state ^= state << 17;
                        ((state % 21) as i64 - 10).to_string()
                    })
                    .collect::<Vec<_>>()
                    .join(",")
                    + "\n"
            })
            .collect();
        let m = write(dir.path(), &format!("m{k}.csv"), &body);
        let out = kmax(&["check-bounds", &m, "--builtin", "affine:4", "--ell", "1,2,3,4"]);
        assert_eq!(code(&out), 0, "{body}\n{}", stderr(&out));
        assert_eq!(data_rows(&stdout(&out)), 4);
    }
}

#[test]
fn violated_bound_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // The only map sends every index to the zero column.
    let m = write(dir.path(), "m.csv", "0,1\n0,1\n");
    let fam = write(
        dir.path(),
        "f.json",
        r#"{"n":2,"atoms":[0,1],"weights":[0.5,0.5],"maps":[[0,0]],"map_weights":[1.0]}"#,
    );
    let out = kmax(&["check-bounds", &m, "--family", &fam, "--ell", "1", "--cg", "1"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("false"));
}

#[test]
fn ratio_sweep_rows_and_dedup() {
    let out = kmax(&["sweep", "ratio", "--dist", "exp", "--n", "2,4,8", "--ell", "1,2", "--trials", "2000"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(data_rows(&stdout(&out)), 6);

    let out = kmax(&["sweep", "ratio", "--dist", "exp", "--n", "2,4,2", "--ell", "1", "--trials", "500"]);
    assert_eq!(data_rows(&stdout(&out)), 2);
    assert!(stderr(&out).contains("duplicate --n value 2"));
}

#[test]
fn embed_sweep_rows() {
    let out = kmax(&["sweep", "embed", "--n", "2,3,4,5,7,8,9", "--samples", "100"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = stdout(&out);
    assert!(csv.starts_with("n,N,samples,min_ratio,max_ratio,distortion,seed\n"));
    assert_eq!(data_rows(&csv), 7);
}

#[test]
fn output_independent_of_threads() {
    let run = |threads: &str| {
        let ratio = kmax(&[
            "sweep", "ratio", "--n", "3,5", "--ell", "1,2", "--x-count", "2", "--trials", "5000", "--threads", threads,
        ]);
        let embed = kmax(&["sweep", "embed", "--n", "4,5", "--samples", "30", "--threads", threads]);
        assert_eq!(code(&ratio), 0);
        assert_eq!(code(&embed), 0);
        (ratio.stdout, embed.stdout)
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("2"));
    assert_eq!(one, run("4"));
}

#[test]
fn seed_changes_output_and_accepts_hex() {
    let args = ["sweep", "ratio", "--dist", "uniform", "--n", "4", "--ell", "2", "--trials", "1000"];
    let default = kmax(&args).stdout;
    let hex = kmax(&[&args[..], &["--seed", "0xC0FFEE"]].concat()).stdout;
    let other = kmax(&[&args[..], &["--seed", "7"]].concat()).stdout;
    assert_eq!(default, hex);
    assert_ne!(default, other);
}

#[test]
fn orlicz_commands() {
    let out = kmax(&["orlicz", "norm", "--fn", "power:2", "--x", "3,-4"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["norm"].as_f64().unwrap() - 5.0).abs() < 1e-12);

    let out = kmax(&["orlicz", "norm", "--fn", "hinge:1", "--x", "2", "--format", "csv"]);
    let norm: f64 = stdout(&out).lines().nth(1).unwrap().parse().unwrap();
    assert!((norm - 1.0).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let out = kmax(&["orlicz", "from-rv", "--dist", "uniform", "--ell", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = kmax(&["orlicz", "norm", "--function", path.to_str().unwrap(), "--x", "1,0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = kmax(&["orlicz", "conjugate", "--fn", "hinge:1", "--format", "csv"]);
    assert_eq!(stdout(&out), "s,value\n0.0,0.0\n1.0,1.0\n");
}
