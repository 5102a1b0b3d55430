use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_splatforge"));
    c.env_remove("SPLATFORGE_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn single_gaussian_renders_byte_equal() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("one.ply");
    ok(&["gen", "--kind", "sphere", "--n", "1", "--seed", "2", "-o", s(&ply)]);
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    ok(&["render", s(&ply), "-o", s(&a), "--width", "64", "--height", "48"]);
    ok(&["render", s(&ply), "-o", s(&b), "--width", "64", "--height", "48"]);
    ok(&["render", s(&ply), "-o", s(&dir.path().join("h.ppm")), "--width", "64", "--height", "48", "--precision", "fp16", "--path", "full"]);
    let bytes = std::fs::read(&a).unwrap();
    assert!(bytes.starts_with(b"P6\n64 48\n255\n"));
    assert_eq!(bytes, std::fs::read(&b).unwrap());
}

#[test]
fn golden_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("c.ply");
    let img = dir.path().join("c.ppm");
    ok(&["gen", "--kind", "clustered", "--n", "300", "--seed", "3", "-o", s(&ply)]);
    ok(&["render", s(&ply), "-o", s(&img), "--width", "96", "--height", "64"]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/clustered_300_96x64.ppm");
    assert!(std::fs::read(&img).unwrap() == std::fs::read(golden).unwrap());
}

#[test]
fn full_hd_report_has_8160_tiles() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("s.ply");
    let report = dir.path().join("r.json");
    ok(&["gen", "--n", "500", "-o", s(&ply)]);
    let out = ok(&[
        "render", s(&ply), "-o", s(&dir.path().join("f.png")), "--width", "1920", "--height", "1080", "--report", s(&report),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("8160 tiles"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v[0]["perf"]["tiles"], 8160);
    assert_eq!(v[0]["stats"]["grid"]["tiles_x"], 120);
    assert_eq!(v[0]["stats"]["grid"]["tiles_y"], 68);
    let png = std::fs::read(dir.path().join("f.png")).unwrap();
    assert!(png.starts_with(b"\x89PNG"));
}

#[test]
fn compress_round_trip_and_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("s.ply");
    let splc = dir.path().join("s.splc");
    let back = dir.path().join("back.ply");
    let report = dir.path().join("c.json");
    ok(&["gen", "--kind", "clustered", "--n", "4000", "-o", s(&ply)]);
    ok(&["compress", s(&ply), "-o", s(&splc), "--report", s(&report), "--width", "160", "--height", "90"]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["input_gaussians"], 4000);
    assert_eq!(v["output_gaussians"], 691);
    assert_eq!(v["sizes"]["container"].as_u64().unwrap(), std::fs::metadata(&splc).unwrap().len());
    assert!(v["ratio"].as_f64().unwrap() > 10.0);

    ok(&["decompress", s(&splc), "-o", s(&back)]);
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    let c = dir.path().join("c.ppm");
    ok(&["render", s(&back), "-o", s(&a), "--width", "80", "--height", "60"]);
    ok(&["render", s(&splc), "-o", s(&b), "--width", "80", "--height", "60"]);
    ok(&["render", s(&ply), "-o", s(&c), "--width", "80", "--height", "60"]);
    assert_eq!(String::from_utf8(ok(&["psnr", s(&a), s(&b)]).stdout).unwrap().trim(), "inf");
    let db: f64 = String::from_utf8(ok(&["psnr", s(&a), s(&c)]).stdout).unwrap().trim().parse().unwrap();
    assert!(db.is_finite() && db > 5.0);
}

#[test]
fn psnr_half_gray_vs_black() {
    let dir = tempfile::tempdir().unwrap();
    let gray = dir.path().join("g.ppm");
    let black = dir.path().join("k.ppm");
    let mut g = b"P6\n4 4\n255\n".to_vec();
    g.extend([128u8; 48]);
    let mut k = b"P6\n4 4\n255\n".to_vec();
    k.extend([0u8; 48]);
    std::fs::write(&gray, g).unwrap();
    std::fs::write(&black, k).unwrap();
    let db: f64 = String::from_utf8(ok(&["psnr", s(&gray), s(&black)]).stdout).unwrap().trim().parse().unwrap();
    let expect = 10.0 * (1.0 / (128.0f64 / 255.0).powi(2)).log10();
    assert!((db - expect).abs() < 1e-4, "{db}");
}

#[test]
fn analyze_writes_rates_and_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("h.ply");
    let report = dir.path().join("a.json");
    let hist = dir.path().join("h.csv");
    let stages = dir.path().join("s.csv");
    ok(&["gen", "--kind", "hemisphere", "--n", "3000", "-o", s(&ply)]);
    ok(&[
        "analyze", s(&ply), "--views", "2", "--width", "160", "--height", "90", "--report", s(&report), "--histogram-csv",
        s(&hist), "--stages-csv", s(&stages),
    ]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["perf"]["rates"]["gaussians"], 3000);
    let h = std::fs::read_to_string(&hist).unwrap();
    assert!(h.starts_with("lo,hi,tiles\n0,99,"));
    let tiles: u64 = h.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(tiles, 10 * 6);
    assert_eq!(std::fs::read_to_string(&stages).unwrap().lines().count(), 5);
}

#[test]
fn sortbench_reports_correct_sorts() {
    let out = ok(&["sortbench", "--n", "3000", "--trials", "3", "--seed", "9"]);
    let lines: Vec<Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for l in lines {
        assert_eq!(l["correct"], true);
        assert_eq!(l["local"], 2000);
        assert_eq!(l["global"], 1000);
        assert_eq!(l["cycles"], 6000 + 3 * 16);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["render"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--kind", "torus", "-o", "x.ply"]).status.code(), Some(2));
    assert_eq!(run(&["render", "x.ply", "-o", "x.ppm", "--background", "2,0,0"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ply");
    let out = run(&["render", s(&missing), "-o", s(&dir.path().join("o.ppm"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let junk = dir.path().join("junk.ply");
    std::fs::write(&junk, b"not a ply file").unwrap();
    assert_eq!(run(&["render", s(&junk), "-o", s(&dir.path().join("o.ppm"))]).status.code(), Some(3));
    assert_eq!(run(&["decompress", s(&junk), "-o", s(&dir.path().join("o.ply"))]).status.code(), Some(3));

    let ply = dir.path().join("s.ply");
    ok(&["gen", "--n", "10", "-o", s(&ply)]);
    assert_eq!(run(&["render", s(&ply), "-o", s(&dir.path().join("o.ppm")), "--tile-size", "0"]).status.code(), Some(3));
    assert_eq!(run(&["compress", s(&ply), "-o", s(&dir.path().join("o.splc")), "--schedule", "0.4,1.5"]).status.code(), Some(3));
    assert_eq!(run(&["psnr", s(&ply), s(&ply)]).status.code(), Some(3));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("s.ply");
    let cams = dir.path().join("cams.json");
    ok(&["gen", "--kind", "grid", "--n", "8000", "-o", s(&ply), "--cameras", s(&cams), "--views", "2", "--width", "200", "--height", "120"]);
    let render = |threads: &str, tag: &str| {
        let img = dir.path().join(format!("{tag}.ppm"));
        let report = dir.path().join(format!("{tag}.json"));
        let out = bin()
            .env("SPLATFORGE_THREADS", threads)
            .args(["render", s(&ply), "--camera", s(&cams), "-o", s(&img), "--report", s(&report)])
            .output()
            .unwrap();
        assert!(out.status.success());
        [std::fs::read(dir.path().join(format!("{tag}_0.ppm"))).unwrap(), std::fs::read(dir.path().join(format!("{tag}_1.ppm"))).unwrap(), std::fs::read(&report).unwrap()]
    };
    assert_eq!(render("1", "one"), render("8", "eight"));
    let flag = run(&["--threads", "3", "sortbench", "--n", "10"]);
    assert!(flag.status.success());
}
