use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use defocus_core::io::{load_gray, save_gray};
use defocus_core::synth::{apply_sigma_field, linear_sigma_field, Axis};
use serde_json::Value;

// small grids keep the framework build quick
const GRID: [&str; 8] = [
    "--sigma-count",
    "12",
    "--radial-count",
    "30",
    "--sigma-min",
    "0.5",
    "--sigma-max",
    "3",
];

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_defocus"))
            .args(args)
            .env("DEFOCUS_CACHE_DIR", self.path("cache"))
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    fn run_ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// 72x54 crop of the brick image and a vertically blurred copy.
    fn pair(&self) -> (PathBuf, PathBuf) {
        let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/brick.png");
        let img = load_gray(src).unwrap();
        let (w, h) = (72, 54);
        let left = img
            .crop((img.width() - w) / 2, (img.height() - h) / 2, w, h)
            .unwrap();
        let field = linear_sigma_field(w, h, 1.0, 2.0, Axis::Vertical).unwrap();
        let right = apply_sigma_field(&left, &field).unwrap();
        let (l, r) = (self.path("left.png"), self.path("right.png"));
        save_gray(&left, &l).unwrap();
        save_gray(&right, &r).unwrap();
        (l, r)
    }
}

fn with_grid<'a>(args: &[&'a str]) -> Vec<&'a str> {
    GRID.iter().copied().chain(args.iter().copied()).collect()
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn optics_canon_example() {
    let env = Env::new();
    let out = env.run_ok(&[
        "optics", "--f", "67", "--fn", "4", "--df", "1100", "--pitch", "21.43",
    ]);
    let v = json(&out);
    assert_eq!(v["schema"], "v1");
    assert_eq!(v["command"], "optics");
    assert_eq!(v["config"]["M"], 50);
    let approx = v["result"]["c_max"]["approx_pitches"].as_f64().unwrap();
    assert!((47.0..49.0).contains(&approx), "{approx}");
    assert!(v["result"]["recommended_decimation"].as_u64().unwrap() >= 10);
}

#[test]
fn optics_bad_geometry_is_a_validation_error() {
    let env = Env::new();
    let out = env.run(&[
        "optics", "--f", "67", "--fn", "4", "--df", "50", "--pitch", "21.43",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let env = Env::new();
    assert_eq!(env.run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        env.run(&["estimate", "--left", "a.png"]).status.code(),
        Some(2)
    );
    assert_eq!(
        env.run(&["synth-eval", "--image", "a.png", "--range", "1-2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_file_is_a_runtime_error() {
    let env = Env::new();
    let out = env.run(&["estimate", "--left", "nope.png", "--right", "nope.png"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_config_exits_two() {
    let env = Env::new();
    let (l, r) = env.pair();
    let out = env.run(&[
        "--window",
        "4",
        "estimate",
        "--left",
        l.to_str().unwrap(),
        "--right",
        r.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_writes_artifacts_and_uses_cache() {
    let env = Env::new();
    let (l, r) = env.pair();
    let args = with_grid(&[
        "estimate",
        "--left",
        l.to_str().unwrap(),
        "--right",
        r.to_str().unwrap(),
    ]);
    let first = json(&env.run_ok(&args));
    for name in ["blur.dfbm", "blur.pgm", "reconstruction.png", "report.json"] {
        assert!(env.path("out").join(name).exists(), "{name}");
    }
    assert_eq!(first["config"]["M"], 12);
    assert!(first["cache"].as_str().unwrap().starts_with("stored"));
    assert!(first["result"]["valid_fraction"].as_f64().unwrap() > 0.9);
    let second = json(&env.run_ok(&args));
    assert!(second["cache"].as_str().unwrap().starts_with("hit"));
    assert_eq!(first["result"], second["result"]);
}

#[test]
fn worker_count_does_not_change_output() {
    let env = Env::new();
    let (l, r) = env.pair();
    let (l, r) = (l.to_str().unwrap(), r.to_str().unwrap());
    let mut raster = Vec::new();
    for (workers, out) in [("1", "w1"), ("3", "w3")] {
        env.run_ok(&with_grid(&[
            "--workers",
            workers,
            "--out",
            out,
            "estimate",
            "--left",
            l,
            "--right",
            r,
        ]));
        raster.push(std::fs::read(env.path(out).join("blur.dfbm")).unwrap());
    }
    assert_eq!(raster[0], raster[1]);
}

#[test]
fn synth_eval_report() {
    let env = Env::new();
    let (l, _) = env.pair();
    let v = json(&env.run_ok(&with_grid(&[
        "synth-eval",
        "--image",
        l.to_str().unwrap(),
        "--range",
        "1:2",
        "--axis",
        "horizontal",
    ])));
    assert_eq!(v["command"], "synth-eval");
    let mae = v["result"]["sigma_mae_percent"].as_f64().unwrap();
    assert!(mae < 10.0, "{mae}");
    for name in [
        "blurred.png",
        "sigma_hat.dfbm",
        "sigma_hat.pgm",
        "sigma_true.dfbm",
    ] {
        assert!(env.path("out").join(name).exists(), "{name}");
    }
}

#[test]
fn evaluate_pair_manifest_table() {
    let env = Env::new();
    env.pair();
    std::fs::write(
        env.path("pairs.csv"),
        "dataset_id,ib,if\nsame,left.png,left.png\nmixed,right.png,left.png\n",
    )
    .unwrap();
    let out = env.run_ok(&with_grid(&["evaluate-pair", "--manifest", "pairs.csv"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "dataset_id,resolution,pct_b_sharper,pct_f_sharper,e_b,e_f"
    );
    assert_eq!(lines[1], "same,72x54,0.00,0.00,NA,NA");
    assert!(lines[2].starts_with("mixed,72x54,"));
    assert_eq!(lines.len(), 3);
    let report = json(&std::fs::read_to_string(env.path("out/report.json")).unwrap());
    assert_eq!(report["result"].as_array().unwrap().len(), 2);
    assert_eq!(
        std::fs::read_to_string(env.path("out/results.csv")).unwrap(),
        out
    );
}

#[test]
fn evaluate_pair_needs_both_images() {
    let env = Env::new();
    assert_eq!(
        env.run(&["evaluate-pair", "--ib", "a.png"]).status.code(),
        Some(2)
    );
}

#[test]
fn decimate_halves_and_writes_pgm() {
    let env = Env::new();
    let (l, _) = env.pair();
    let v = json(&env.run_ok(&[
        "decimate",
        "--input",
        l.to_str().unwrap(),
        "--output",
        "small/half.pgm",
        "--factor",
        "2",
    ]));
    assert_eq!(v["result"]["output_size"], serde_json::json!([36, 27]));
    assert_eq!(
        load_gray(env.path("small/half.pgm")).unwrap().dims(),
        (36, 27)
    );
}
