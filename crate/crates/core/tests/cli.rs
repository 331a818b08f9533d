mod support;

use std::path::Path;
use std::process::{Command, Output};

use slvq::labels::{read_slab, write_slab};
use support::dirichlet_labels;

fn slvq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slvq"))
        .args(args)
        .env_remove("SLVQ_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn budget_reports_raw_label_size() {
    let out = slvq(&["budget", "--ipc", "10", "--classes", "1000", "--epochs", "300"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("5.588 GB"));
}

#[test]
fn budget_json_for_a_vq_setting() {
    let v = json(&slvq(&[
        "--json", "budget", "--ipc", "10", "--classes", "1000", "--epochs", "300", "--latent-dim", "795",
        "--code-dim", "5", "--num-codes", "1024",
    ]));
    assert_eq!(format!("{:.3}", v["compressed_gb"].as_f64().unwrap()), "0.558");
    assert!((v["ratio"].as_f64().unwrap() - 10.0).abs() < 0.05);
}

#[test]
fn llm_accounting() {
    let v = json(&slvq(&[
        "--json", "budget", "--method", "llm", "--tokens", "1200000", "--vocab", "50257", "--archive-gb", "0.2",
    ]));
    assert!((v["raw_gb"].as_f64().unwrap() - 112.33).abs() < 0.01);
    assert!((v["ratio"].as_f64().unwrap() - 561.7).abs() < 0.1);
}

#[test]
fn solve_hits_the_target_band() {
    let v = json(&slvq(&["--json", "solve", "--ipc", "10", "--classes", "1000", "--epochs", "300", "--target", "10"]));
    let ratio = v["ratio"].as_f64().unwrap();
    assert!((10.0..=10.5).contains(&ratio), "{ratio}");
}

#[test]
fn tables_print_known_rows() {
    let out = slvq(&["tables"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for needle in ["5.588", "11.176", "27.940", "55.879", "0.558", "0.257", "0.130"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn fit_compress_decompress_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let labels = dirichlet_labels(200, 16, 0.3, 1);
    write_slab(&labels, std::fs::File::create(p("y.slab")).unwrap()).unwrap();

    let train = ["--latent-dim", "8", "--code-dim", "2", "--num-codes", "16", "--steps", "100", "--batch-size", "32"];
    let y = p("y.slab");
    let model = p("m.slvq");
    let mut fit_args = vec!["--seed", "4", "fit", "--labels", y.as_str()];
    fit_args.extend(["--out", model.as_str()]);
    fit_args.extend(train);
    let out = slvq(&fit_args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let archive = p("a.slar");
    let out = slvq(&["compress", "--labels", &y, "--codec", "vqae", "--model", &model, "--out", &archive]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(&archive).unwrap();

    let back = p("back.slab");
    let out = slvq(&["decompress", "--archive", &archive, "--out", &back]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = read_slab(std::fs::File::open(&back).unwrap()).unwrap();
    assert_eq!((rec.n(), rec.c()), (200, 16));

    // same seed and inputs give the same bytes
    let again = p("b.slar");
    let out = slvq(&["compress", "--labels", &y, "--codec", "vqae", "--model", &model, "--out", &again]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&again).unwrap(), first);

    for codec in [["--codec", "topk", "--k-top", "3"], ["--codec", "quant", "--bits", "2"], ["--codec", "pca", "--components", "4"]] {
        let out_path = p(&format!("{}.slar", codec[1]));
        let mut args = vec!["compress", "--labels", y.as_str(), "--out", out_path.as_str()];
        args.extend(codec);
        let out = slvq(&args);
        assert!(out.status.success(), "{codec:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(Path::new(&out_path).exists());
        let out = slvq(&["decompress", "--archive", &out_path, "--out", &p("x.csv")]);
        assert!(out.status.success());
    }
}

#[test]
fn exit_codes() {
    assert_eq!(slvq(&["budget", "--bogus"]).status.code(), Some(1));
    assert_eq!(slvq(&["budget", "--classes", "10"]).status.code(), Some(1));
    assert_eq!(slvq(&["decompress", "--archive", "/nonexistent/a.slar", "--out", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(
        slvq(&["solve", "--ipc", "1", "--classes", "4", "--epochs", "1", "--target", "1000000"]).status.code(),
        Some(3)
    );
    assert_eq!(slvq(&["--help"]).status.code(), Some(0));
}
