//! The committed golden frame is the f64 oracle quantized to 8 bits.
//! `SPLATFORGE_BLESS=1` rewrites it.

mod common;

use std::path::PathBuf;

use splatforge::image::Image;
use splatforge::preprocess::preprocess;
use splatforge::raster::{render_frame, RenderOptions};
use splatforge::synthetic::{gen_synthetic, orbit_views, SceneKind};

use common::naive_render;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/golden/clustered_300_96x64.ppm")
}

#[test]
fn golden_frame_is_the_oracle_render() {
    let cloud = gen_synthetic(SceneKind::Clustered, 300, 3);
    let cam = orbit_views(1, 4.0, 1.5, 96, 64).unwrap()[0];
    let opts = RenderOptions::default();
    let splats = preprocess(&cloud, &cam, &opts.project).splats;
    let oracle = naive_render(&splats, &cam, 16, &opts.params);
    let mut img = Image::filled(96, 64, [0.0; 3]);
    for y in 0..64 {
        for x in 0..96 {
            img.set(x, y, oracle[(y * 96 + x) as usize].map(|v| v as f32));
        }
    }
    let oracle_ppm = img.to_ppm();
    if std::env::var_os("SPLATFORGE_BLESS").is_some() {
        std::fs::write(golden_path(), &oracle_ppm).unwrap();
    }
    let golden = std::fs::read(golden_path()).expect("golden frame is committed");
    assert!(golden == oracle_ppm, "oracle no longer matches the golden frame");
    assert!(render_frame(&cloud, &cam, &opts).image.to_ppm() == golden, "pipeline differs from the golden frame");
}
