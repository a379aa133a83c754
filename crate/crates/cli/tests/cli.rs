use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skinseg_core::dataset::{split, write_uci};
use skinseg_core::imageio::{read_pgm, write_ppm, Image, MaskImage};
use skinseg_core::metrics::{to_f64, MetricsReport};
use skinseg_core::synth::{disc_scene, labelled_samples};
use skinseg_core::{Label, RawSample, RgbPixel, SplitConfig};
use tempfile::TempDir;

fn skinseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skinseg")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = skinseg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    skinseg(args).status.code().unwrap()
}

struct Scratch {
    dir: TempDir,
}

impl Scratch {
    fn new() -> Self {
        Scratch { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> String {
        std::fs::write(self.path(name), bytes).unwrap();
        self.arg(name)
    }

    fn dataset(&self, name: &str, samples: &[RawSample]) -> String {
        let mut text = Vec::new();
        write_uci(samples, &mut text).unwrap();
        self.write(name, text)
    }
}

fn sample(b: u8, g: u8, r: u8, label: Label) -> RawSample {
    RawSample { b, g, r, label }
}

fn isolated_pixels(mask: &MaskImage) -> usize {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let skin = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && mask.is_skin(x as usize, y as usize);
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| {
            skin(x, y) && [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
                .iter()
                .all(|(dx, dy)| !skin(x + dx, y + dy))
        })
        .count()
}

fn document_value(doc: &str, key: &str) -> f64 {
    doc.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

#[test]
fn bayes_priors_match_hand_counts_on_a_toy_file() {
    let s = Scratch::new();
    let toy: Vec<RawSample> = [
        (120, 150, 220, 1),
        (110, 140, 210, 1),
        (100, 130, 200, 1),
        (90, 120, 190, 1),
        (200, 40, 20, 2),
        (210, 60, 30, 2),
        (30, 200, 40, 2),
        (20, 20, 20, 2),
        (250, 250, 250, 2),
        (180, 90, 10, 2),
    ]
    .iter()
    .map(|&(b, g, r, l)| sample(b, g, r, if l == 1 { Label::Skin } else { Label::NonSkin }))
    .collect();
    let data = s.dataset("toy.txt", &toy);
    let stdout = ok(&["train", "--dataset", &data, "--model", &s.arg("m"), "--kind", "bayes", "--seed", "7"]);
    assert!(stdout.contains("split: train 7, test 3"), "{stdout}");

    let (train, _) = split(&toy, &SplitConfig { test_fraction: 0.3, seed: 7 }).unwrap();
    let skin = train.iter().filter(|x| x.label == Label::Skin).count();
    assert!(stdout.contains(&format!("train classes: skin {skin}, non_skin {}", 7 - skin)), "{stdout}");
    let model = std::fs::read_to_string(s.path("m")).unwrap();
    let priors: Vec<f64> = model
        .lines()
        .find_map(|l| l.strip_prefix("priors = "))
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(priors, vec![skin as f64 / 7.0, (7 - skin) as f64 / 7.0]);
}

#[test]
fn mlp_summary_reports_default_schedule() {
    let s = Scratch::new();
    let data = s.dataset("d.txt", &labelled_samples(400, 2));
    let stdout = ok(&["train", "--dataset", &data, "--model", &s.arg("m"), "--kind", "mlp"]);
    assert!(stdout.contains("epochs: 12, batch_size: 53"), "{stdout}");
    assert_eq!(stdout.matches(" loss: ").count(), 12);
    let stdout = ok(&["train", "--dataset", &data, "--model", &s.arg("m"), "--kind", "mlp", "--epochs", "2", "--batch-size", "8"]);
    assert!(stdout.contains("epochs: 2, batch_size: 8"), "{stdout}");
}

#[test]
fn perfect_model_scores_full_accuracy() {
    let s = Scratch::new();
    let mut toy = vec![sample(120, 150, 220, Label::Skin); 30];
    toy.extend(vec![sample(200, 60, 20, Label::NonSkin); 30]);
    let data = s.dataset("d.txt", &toy);
    ok(&["train", "--dataset", &data, "--model", &s.arg("m"), "--kind", "tree", "--seed", "1"]);
    let doc = ok(&["eval", "--dataset", &data, "--model", &s.arg("m")]);
    assert_eq!(document_value(&doc, "accuracy"), 1.0);
    assert_eq!(document_value(&doc, "auc"), 1.0);
}

#[test]
fn threshold_auc_is_the_single_point_roc() {
    let s = Scratch::new();
    let data = s.dataset("d.txt", &labelled_samples(2000, 4));
    let doc = ok(&["eval", "--dataset", &data, "--kind", "threshold"]);
    let (sens, spec, auc) = (
        document_value(&doc, "sensitivity"),
        document_value(&doc, "specificity"),
        document_value(&doc, "auc"),
    );
    assert!((auc - (sens + spec) / 2.0).abs() <= 1e-12, "{doc}");
    let report = MetricsReport::from_document(&doc).unwrap();
    assert_eq!(report.to_document(), doc);
    assert_eq!(to_f64(report.scalars.sensitivity), Some(sens));
}

#[test]
fn eval_writes_report_file_and_warns_on_split_mismatch() {
    let s = Scratch::new();
    let data = s.dataset("d.txt", &labelled_samples(600, 5));
    ok(&["train", "--dataset", &data, "--model", &s.arg("m"), "--kind", "tree", "--seed", "3"]);
    let same = skinseg(&["eval", "--dataset", &data, "--model", &s.arg("m"), "--output", &s.arg("r.txt")]);
    assert!(same.status.success());
    assert!(!String::from_utf8_lossy(&same.stderr).contains("warning"));
    assert!(MetricsReport::from_document(&std::fs::read_to_string(s.path("r.txt")).unwrap()).is_ok());
    let other = skinseg(&["eval", "--dataset", &data, "--model", &s.arg("m"), "--seed", "4"]);
    assert!(other.status.success());
    assert!(String::from_utf8_lossy(&other.stderr).contains("warning"));
}

#[test]
fn blue_image_gives_an_empty_mask() {
    let s = Scratch::new();
    let img = Image::filled(16, 9, RgbPixel::new(20, 40, 200)).unwrap();
    let input = s.write("blue.ppm", write_ppm(&img));
    let stdout = ok(&["segment", "--input", &input, "--output", &s.arg("mask.pgm"), "--kind", "threshold"]);
    assert!(stdout.contains("0 skin pixels") && stdout.trim_end().ends_with(" s"), "{stdout}");
    let mask = read_pgm(&std::fs::read(s.path("mask.pgm")).unwrap()).unwrap();
    assert_eq!((mask.width(), mask.height(), mask.skin_count()), (16, 9, 0));
}

#[test]
fn refinement_reduces_isolated_pixels_with_mlp() {
    let s = Scratch::new();
    let data = s.dataset("d.txt", &labelled_samples(4000, 6));
    ok(&["train", "--dataset", &data, "--model", &s.arg("m"), "--kind", "mlp"]);
    let (scene, _) = disc_scene(80, 60, 0.04, 3).unwrap();
    let input = s.write("scene.ppm", write_ppm(&scene));
    let base = ["segment", "--input", &input, "--model", &s.arg("m")];
    ok(&[&base[..], &["--output", &s.arg("plain.pgm")]].concat());
    ok(&[&base[..], &["--output", &s.arg("refined.pgm"), "--refine", "--prob-out", &s.arg("p.pgm")]].concat());
    let load = |n: &str| read_pgm(&std::fs::read(s.path(n)).unwrap()).unwrap();
    let (plain, refined) = (load("plain.pgm"), load("refined.pgm"));
    assert!(isolated_pixels(&refined) < isolated_pixels(&plain));
    let prob = std::fs::read(s.path("p.pgm")).unwrap();
    assert!(prob.starts_with(b"P5\n80 60\n255\n"));
}

#[test]
fn bench_reports_three_paths_and_speedup() {
    let s = Scratch::new();
    let data = s.dataset("d.txt", &labelled_samples(2000, 7));
    ok(&["train", "--dataset", &data, "--model", &s.arg("m"), "--kind", "mlp", "--epochs", "1"]);
    let (scene, _) = disc_scene(240, 180, 0.02, 1).unwrap();
    let input = s.write("scene.ppm", write_ppm(&scene));
    let stdout = ok(&["bench", "--input", &input, "--model", &s.arg("m")]);
    let rows: Vec<(&str, f64)> = stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("path,"))
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k, v.parse().unwrap())
        })
        .collect();
    let names: Vec<&str> = rows.iter().map(|r| r.0).collect();
    assert_eq!(names, ["stage1", "refine", "downscale", "speedup"]);
    assert!(rows.iter().all(|r| r.1 >= 0.0));
    assert!(rows[0].1 <= rows[1].1, "{stdout}");
}

#[test]
fn dataset_stats_counts_classes() {
    let s = Scratch::new();
    let toy = vec![sample(1, 2, 3, Label::Skin), sample(4, 5, 6, Label::NonSkin), sample(7, 8, 9, Label::NonSkin)];
    let stdout = ok(&["dataset-stats", "--dataset", &s.dataset("d.txt", &toy)]);
    assert!(stdout.contains("samples: 3\nskin: 1\nnon_skin: 2\n"), "{stdout}");
    assert!(stdout.contains("train: 2 ") && stdout.contains("test: 1 "), "{stdout}");
}

fn exit_code_fixture(s: &Scratch) -> (String, String) {
    let data = s.dataset("d.txt", &labelled_samples(300, 8));
    ok(&["train", "--dataset", &data, "--model", &s.arg("m"), "--kind", "bayes"]);
    (data, s.arg("m"))
}

#[test]
fn data_errors_exit_with_two() {
    let s = Scratch::new();
    let (data, model) = exit_code_fixture(&s);
    let missing = s.arg("nope.txt");
    let malformed = s.write("bad.txt", "1 2 3 1\n4 5 x 2\n");
    let bad_label = s.write("label.txt", "1 2 3 1\n4 5 6 3\n");
    let one_class = s.write("one.txt", "1 2 3 2\n".repeat(20));
    let bad_ppm = s.write("bad.ppm", b"P3\n1 1\n255\n0 0 0\n");
    let short_ppm = s.write("short.ppm", b"P6\n2 2\n255\n\x00\x00");
    let tiny_ppm = s.write("tiny.ppm", write_ppm(&Image::filled(1, 1, RgbPixel::new(0, 0, 0)).unwrap()));
    let garbage_model = s.write("garbage.model", "not a model\n");
    let future_model = s.write(
        "future.model",
        std::fs::read_to_string(&model).unwrap().replace("format_version = 1", "format_version = 2"),
    );
    let out = s.arg("out.pgm");
    let cases: Vec<Vec<&str>> = vec![
        vec!["dataset-stats", "--dataset", &missing],
        vec!["train", "--dataset", &malformed, "--model", &out, "--kind", "tree"],
        vec!["train", "--dataset", &bad_label, "--model", &out, "--kind", "tree"],
        vec!["train", "--dataset", &one_class, "--model", &out, "--kind", "bayes"],
        vec!["eval", "--dataset", &data, "--model", &missing],
        vec!["eval", "--dataset", &data, "--model", &garbage_model],
        vec!["eval", "--dataset", &data, "--model", &future_model],
        vec!["segment", "--input", &bad_ppm, "--output", &out, "--kind", "threshold"],
        vec!["segment", "--input", &short_ppm, "--output", &out, "--kind", "threshold"],
        vec!["segment", "--input", &tiny_ppm, "--output", &out, "--kind", "threshold", "--downscale"],
        vec!["bench", "--input", &missing, "--kind", "threshold"],
    ];
    for args in cases {
        assert_eq!(code(&args), 2, "{args:?}");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let s = Scratch::new();
    let (data, model) = exit_code_fixture(&s);
    let img = s.write("i.ppm", write_ppm(&Image::filled(4, 4, RgbPixel::new(0, 0, 0)).unwrap()));
    let out = s.arg("o.pgm");
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["frobnicate"],
        vec!["train", "--dataset", &data, "--kind", "tree"],
        vec!["train", "--dataset", &data, "--model", &out, "--kind", "forest"],
        vec!["train", "--dataset", &data, "--model", &out, "--kind", "bayes", "--alpha", "-1"],
        vec!["train", "--dataset", &data, "--model", &out, "--kind", "mlp", "--epochs", "0"],
        vec!["train", "--dataset", &data, "--model", &out, "--kind", "tree", "--test-fraction", "0"],
        vec!["eval", "--dataset", &data],
        vec!["eval", "--dataset", &data, "--model", &model, "--kind", "tree"],
        vec!["segment", "--input", &img, "--output", &out, "--kind", "threshold", "--refine", "--rule", "fancy"],
        vec!["segment", "--input", &img, "--output", &out, "--kind", "threshold", "--refine", "--radius", "0"],
        vec!["segment", "--input", &img, "--output", &out, "--kind", "threshold", "--refine", "--rule", "paper", "--tau", "1.5"],
        vec!["bench", "--input", &img, "--kind", "threshold", "--rule", "symmetric", "--tau", "0.5"],
    ];
    for args in cases {
        assert_eq!(code(&args), 1, "{args:?}");
    }
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["segment", "--help"]), 0);
}

#[test]
fn both_rules_run_end_to_end() {
    let s = Scratch::new();
    let (scene, _) = disc_scene(30, 30, 0.05, 2).unwrap();
    let input = s.write("s.ppm", write_ppm(&scene));
    for rule in ["paper", "symmetric"] {
        ok(&["segment", "--input", &input, "--output", &s.arg("o.pgm"), "--kind", "threshold", "--refine", "--rule", rule, "--radius", "2"]);
        assert!(Path::new(&s.path("o.pgm")).exists());
    }
}
