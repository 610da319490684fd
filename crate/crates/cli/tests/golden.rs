//! Golden-file tests: every command's stdout is pinned byte-for-byte, and
//! documents round-trip through parse/serialize.

use std::path::{Path, PathBuf};
use std::process::Command;

use sheaflap_cli::format;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sheaflap"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(name),
    )
    .expect("golden file")
}

fn run(args: &[&str]) -> (String, i32) {
    let output = bin().args(args).output().expect("run binary");
    (
        String::from_utf8(output.stdout).expect("utf8 stdout"),
        output.status.code().unwrap_or(-1),
    )
}

fn check_case(args: &[&str], golden_name: &str, expected_exit: i32) {
    let mut full = Vec::new();
    for a in args {
        full.push(a.to_string());
    }
    let strs: Vec<&str> = full.iter().map(|s| s.as_str()).collect();
    let (stdout, code) = run(&strs);
    assert_eq!(code, expected_exit, "exit code for {args:?}\n{stdout}");
    assert_eq!(stdout, golden(golden_name), "stdout mismatch for {args:?}");
}

#[test]
fn golden_spectrum() {
    let input = data("k3_const.json");
    check_case(
        &["spectrum", input.to_str().unwrap(), "--degree", "0"],
        "spectrum_k3.json",
        0,
    );
}

#[test]
fn golden_validate_failure_exits_1() {
    let input = data("broken_sign.json");
    check_case(
        &["validate", input.to_str().unwrap()],
        "validate_broken.json",
        1,
    );
}

#[test]
fn golden_kron() {
    let input = data("p3_const.json");
    check_case(
        &["kron", input.to_str().unwrap(), "--boundary", "v1,v3"],
        "kron_p3.json",
        0,
    );
}

#[test]
fn golden_harmonic_star() {
    let input = data("star.json");
    check_case(
        &["harmonic", input.to_str().unwrap(), "--degree", "0"],
        "harmonic_star.json",
        0,
    );
}

#[test]
fn golden_resistance() {
    let input = data("k3_const.json");
    check_case(
        &[
            "resistance",
            input.to_str().unwrap(),
            "--between",
            "a",
            "b",
        ],
        "resistance_k3.json",
        0,
    );
}

#[test]
fn golden_extend() {
    let input = data("p3_const.json");
    check_case(
        &[
            "extend",
            input.to_str().unwrap(),
            "--boundary",
            "v1,v3",
            "--values",
            "ends",
        ],
        "extend_p3.json",
        0,
    );
}

#[test]
fn golden_sparsify_and_determinism() {
    let input = data("k3_const.json");
    let args = [
        "sparsify",
        input.to_str().unwrap(),
        "--eps",
        "0.5",
        "--seed",
        "7",
    ];
    check_case(&args, "sparsify_k3.json", 0);
    let (first, _) = run(&args);
    let (second, _) = run(&args);
    assert_eq!(first, second, "same seed must give byte-identical output");
}

#[test]
fn golden_approx_const() {
    let input = data("approx_k4.json");
    check_case(
        &["approx-const", "--spec", input.to_str().unwrap()],
        "approx_k4.json",
        0,
    );
}

#[test]
fn golden_interlace() {
    let input = data("k3_const.json");
    check_case(
        &[
            "check",
            input.to_str().unwrap(),
            "--interlace",
            "e1_2",
        ],
        "interlace_k3.json",
        0,
    );
}

#[test]
fn golden_counterexample_spectrum() {
    let input = data("counterexample.json");
    check_case(
        &[
            "spectrum",
            input.to_str().unwrap(),
            "--degree",
            "0",
            "--full",
        ],
        "spectrum_counterexample.json",
        0,
    );
}

#[test]
fn usage_error_exits_2() {
    let (_, code) = run(&["resistance", data("k3_const.json").to_str().unwrap()]);
    assert_eq!(code, 2);
    let output = bin().arg("no-such-command").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_cochain_is_a_validation_failure() {
    let (stdout, code) = run(&[
        "resistance",
        data("k3_const.json").to_str().unwrap(),
        "--between",
        "a",
        "nope",
    ]);
    assert_eq!(code, 1);
    assert!(stdout.contains("\"error\""));
    assert!(stdout.contains("nope"));
}

#[test]
fn documents_roundtrip() {
    for name in [
        "p2_const.json",
        "k3_const.json",
        "p3_const.json",
        "star.json",
        "counterexample.json",
        "approx_k4.json",
    ] {
        let text = std::fs::read_to_string(data(name)).unwrap();
        let doc = format::parse(&text).unwrap();
        let canonical = format::serialize(&doc);
        let again = format::parse(&canonical).unwrap();
        assert_eq!(doc, again, "roundtrip failed for {name}");
        // Canonical form is a fixed point of serialize(parse(.)).
        assert_eq!(format::serialize(&again), canonical);
    }
}

#[test]
fn tolerance_env_and_flag() {
    // A huge tolerance flag collapses every eigenvalue into the kernel; the
    // harmonic command then reports a full-dimension basis.
    let input = data("k3_const.json");
    let (stdout, code) = run(&[
        "harmonic",
        input.to_str().unwrap(),
        "--degree",
        "0",
        "--tol",
        "100.0",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"cohomology_dim\": 3"), "{stdout}");

    let output = bin()
        .args(["harmonic", input.to_str().unwrap(), "--degree", "0"])
        .env("SHEAFLAP_TOL", "100.0")
        .output()
        .unwrap();
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("\"cohomology_dim\": 3"), "{text}");
}

#[test]
fn random_sheaves_roundtrip_through_documents() {
    // Serialize real sheaf data and rebuild it: every matrix must survive
    // the 17-significant-digit round trip bit-for-bit.
    let mut rng = sheaflap::sample::rng(99);
    for trial in 0..10 {
        let graph = sheaflap::sample::random_connected_graph(5 + trial % 3, 3, &mut rng);
        let sheaf = sheaflap::sample::random_sheaf(&graph, 3, &mut rng).unwrap();
        let doc = format::sheaf_to_document(&sheaf);
        let text = format::serialize(&doc);
        let parsed = format::parse(&text).unwrap();
        assert_eq!(parsed, doc, "document mismatch on trial {trial}");
        let complex = format::build_complex(&parsed).unwrap();
        let rebuilt = format::build_sheaf(&parsed, &complex).unwrap();
        for fi in 0..sheaf.base().len() {
            let id = &sheaf.base().cell(fi).id;
            let ri = rebuilt.base().index_of(id).unwrap();
            assert_eq!(sheaf.stalk_dim(fi), rebuilt.stalk_dim(ri));
            for &(ci, _) in sheaf.base().cofaces_of(fi) {
                let cid = &sheaf.base().cell(ci).id;
                let rc = rebuilt.base().index_of(cid).unwrap();
                assert_eq!(
                    sheaf.restriction(fi, ci),
                    rebuilt.restriction(ri, rc),
                    "matrix changed for ({id}, {cid})"
                );
            }
        }
    }
}
