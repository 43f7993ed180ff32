use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn aesz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aesz"))
        .args(args)
        .env_remove("AESZ_WEIGHT_DIR")
        .output()
        .unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn synth(dir: &TempDir, name: &str, kind: &str, dims: &str, seed: &str) -> String {
    let path = p(dir, name);
    let o = aesz(&[
        "synth", "--kind", kind, "--dims", dims, "--seed", seed, "-o", &path,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn fit(dir: &TempDir, input: &str, dims: &str, name: &str) -> String {
    let path = p(dir, name);
    let o = aesz(&[
        "fit",
        "-i",
        input,
        "--dims",
        dims,
        "--block-size",
        "16",
        "--latent",
        "8",
        "-o",
        &path,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn inspect(container: &str) -> Vec<(String, String)> {
    let o = aesz(&["inspect", "-c", container]);
    assert_eq!(code(&o), 0);
    String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').expect("key=value line");
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn compress_decompress_verify_with_model() {
    let dir = TempDir::new().unwrap();
    let train = synth(&dir, "train.bin", "gaussian-mixture", "128,128", "50");
    let model = fit(&dir, &train, "128,128", "m.aeszw");
    let input = synth(&dir, "f.bin", "gaussian-mixture", "128,128", "2");
    let container = p(&dir, "f.aesz");
    for eps in ["1e-2", "1e-3"] {
        let o = aesz(&[
            "compress", "-i", &input, "--dims", "128,128", "--eps", eps, "-w", &model, "-o",
            &container,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let log = String::from_utf8_lossy(&o.stderr);
        assert!(log.contains("cr=") && log.contains("psnr="), "{log}");

        let o = aesz(&[
            "verify",
            "-c",
            &container,
            "-w",
            &model,
            "--original",
            &input,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("max_err <= e: PASS"));

        let out = p(&dir, "out.bin");
        let o = aesz(&["decompress", "-c", &container, "-w", &model, "-o", &out]);
        assert_eq!(code(&o), 0);
        assert_eq!(std::fs::metadata(&out).unwrap().len(), 128 * 128 * 4);
    }
    let header = inspect(&container);
    let get = |k: &str| header.iter().find(|(key, _)| key == k).unwrap().1.clone();
    assert_eq!(get("dims"), "128,128");
    assert_eq!(get("epsilon"), "0.001");
    assert_eq!(get("blocks"), "64");
    assert_ne!(get("model_digest"), "none");
}

#[test]
fn wrong_weight_file_is_a_digest_error() {
    let dir = TempDir::new().unwrap();
    let a = synth(&dir, "a.bin", "gaussian-mixture", "64,64", "51");
    let b = synth(&dir, "b.bin", "turbulence", "64,64", "52");
    let model_a = fit(&dir, &a, "64,64", "a.aeszw");
    let model_b = fit(&dir, &b, "64,64", "b.aeszw");
    let container = p(&dir, "a.aesz");
    let o = aesz(&[
        "compress", "-i", &a, "--dims", "64,64", "--eps", "1e-2", "-w", &model_a, "-o", &container,
    ]);
    assert_eq!(code(&o), 0);
    let o = aesz(&[
        "decompress",
        "-c",
        &container,
        "-w",
        &model_b,
        "-o",
        &p(&dir, "x.bin"),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("digest"));
}

#[test]
fn weight_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let train = synth(&dir, "t.bin", "gaussian-mixture", "64,64", "53");
    fit(&dir, &train, "64,64", "env.aeszw");
    let container = p(&dir, "t.aesz");
    let o = Command::new(env!("CARGO_BIN_EXE_aesz"))
        .args(["compress", "-i", &train, "--dims", "64,64", "--eps", "1e-2"])
        .args(["-w", "env.aeszw", "-o", &container])
        .env("AESZ_WEIGHT_DIR", dir.path())
        .current_dir(Path::new("/"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "f.bin", "ramp", "16,16", "1");
    let out = p(&dir, "f.aesz");
    // Both bounds.
    let o = aesz(&[
        "compress", "-i", &input, "--dims", "16,16", "--eps", "1e-2", "--abs", "0.1", "-o", &out,
    ]);
    assert_eq!(code(&o), 2);
    // Neither bound.
    assert_eq!(
        code(&aesz(&[
            "compress", "-i", &input, "--dims", "16,16", "-o", &out
        ])),
        2
    );
    // Missing dims for a raw input.
    assert_eq!(
        code(&aesz(&[
            "compress", "-i", &input, "--eps", "1e-2", "-o", &out
        ])),
        2
    );
    // Dims are not accepted for containers.
    assert_eq!(code(&aesz(&["inspect", "-c", &out, "--dims", "16,16"])), 2);
    assert_eq!(code(&aesz(&["frobnicate"])), 2);
}

#[test]
fn io_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "f.bin", "ramp", "16,16", "1");
    let out = p(&dir, "f.aesz");
    let o = aesz(&[
        "compress",
        "-i",
        &p(&dir, "missing.bin"),
        "--dims",
        "4",
        "--eps",
        "1e-2",
        "-o",
        &out,
    ]);
    assert_eq!(code(&o), 1);
    // Size does not match dims.
    let o = aesz(&[
        "compress", "-i", &input, "--dims", "16,17", "--eps", "1e-2", "-o", &out,
    ]);
    assert_eq!(code(&o), 1);
    // Not a container.
    assert_eq!(code(&aesz(&["inspect", "-c", &input])), 1);
}

#[test]
fn verify_detects_a_bound_violation() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "f.bin", "turbulence", "32,32", "3");
    let container = p(&dir, "f.aesz");
    let o = aesz(&[
        "compress", "-i", &input, "--dims", "32,32", "--abs", "1e-3", "-o", &container,
    ]);
    assert_eq!(code(&o), 0);
    // Compare against a different "original".
    let other = synth(&dir, "g.bin", "turbulence", "32,32", "4");
    let o = aesz(&["verify", "-c", &container, "--original", &other]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn eval_writes_stable_csv() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "f.bin", "gaussian-mixture", "32,32,32", "5");
    let run = || {
        let o = aesz(&["eval", "-i", &input, "--dims", "32,32,32", "--threads", "2"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let csv = run();
    assert_eq!(csv, run());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "epsilon,bit_rate,psnr,cr,max_abs_err,compress_seconds,decompress_seconds,ae_block_fraction"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.02,"));
}

#[test]
fn double_precision_and_one_dimensional_input() {
    let dir = TempDir::new().unwrap();
    let raw: Vec<u8> = (0..1000)
        .flat_map(|i| ((i as f64) * 0.013).cos().to_le_bytes())
        .collect();
    let input = p(&dir, "d.bin");
    std::fs::write(&input, raw).unwrap();
    let container = p(&dir, "d.aesz");
    let o = aesz(&[
        "compress",
        "-i",
        &input,
        "--dims",
        "1000",
        "--precision",
        "f64",
        "--abs",
        "1e-9",
        "-o",
        &container,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = aesz(&["verify", "-c", &container, "--original", &input]);
    assert_eq!(code(&o), 0);
}
