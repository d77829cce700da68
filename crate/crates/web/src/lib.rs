//! Browser bindings: a C/I map of the beam lattice, a single-drop precoder
//! comparison and a users-per-frame sweep.

use std::fmt::Write;

use mbsim_core::channel::{build_geometry, GeometryConfig};
use mbsim_core::config::ScenarioConfig;
use mbsim_core::harness::{run_scenario, to_csv, ScenarioResult};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn scenario(text: &str) -> Result<ScenarioResult, JsError> {
    let cfg = ScenarioConfig::parse(text, None).map_err(err)?;
    run_scenario(&cfg, 1).map_err(err)
}

/// Carrier over interference in dB on a `size x size` grid spanning the
/// coverage box, row-major from the top-left. Points outside every beam's
/// 3 dB footprint are NaN. With `four_color`, only same-colour beams
/// interfere.
#[wasm_bindgen]
pub fn ci_map(rings: u32, size: u32, four_color: bool) -> Result<Vec<f32>, JsError> {
    let geom = build_geometry(&GeometryConfig { rings: rings as usize, ..GeometryConfig::default() }).map_err(err)?;
    let size = size.clamp(2, 512) as usize;
    let (lo, hi) = geom.coverage_box();
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let mut out = Vec::with_capacity(size * size);
    for row in 0..size {
        for col in 0..size {
            let p = [lo[0] + span * col as f64 / (size - 1) as f64, hi[1] - span * row as f64 / (size - 1) as f64];
            let home = geom.home_beam(p);
            let carrier = geom.normalized_gain(p, home);
            if carrier < 0.5 {
                out.push(f32::NAN);
                continue;
            }
            let interference: f64 = (0..geom.n_beams())
                .filter(|&o| o != home && (!four_color || geom.colors[o] == geom.colors[home]))
                .map(|o| geom.normalized_gain(p, o))
                .sum();
            let ci = if interference > 0.0 { 10.0 * (carrier / interference).log10() } else { 60.0 };
            out.push(ci.min(60.0) as f32);
        }
    }
    Ok(out)
}

/// One drop on the 7-beam lattice: per-beam throughput CSV for every
/// precoder and four-colour reuse.
#[wasm_bindgen]
pub fn compare_precoders(seed: u64, users_per_frame: u32, ref_snr_db: f64) -> Result<String, JsError> {
    let r = scenario(&format!(
        "runs = 1\nseed = {seed}\nlink.ref_snr_db = {ref_snr_db}\n\
         grid.precoders = mmse, block_svd, frame_based\ngrid.schedulers = random\n\
         grid.users_per_frame = {users_per_frame}\ngrid.four_color = true\n"
    ))?;
    Ok(to_csv(&r.rows))
}

/// Mean throughput per beam against users per frame, as CSV
/// `precoder,users_per_frame,mean_mbps,ci95_mbps`.
#[wasm_bindgen]
pub fn rho_sweep(seed: u64, runs: u32, ref_snr_db: f64, with_frame_based: bool) -> Result<String, JsError> {
    let precoders = if with_frame_based { "mmse, block_svd, frame_based" } else { "mmse, block_svd" };
    let r = scenario(&format!(
        "runs = {}\nseed = {seed}\nlink.ref_snr_db = {ref_snr_db}\n\
         grid.precoders = {precoders}\ngrid.schedulers = random\n\
         grid.users_per_frame = 1, 2, 3, 4, 6\ngrid.four_color = true\n",
        runs.clamp(1, 200)
    ))?;
    let mut out = String::from("precoder,users_per_frame,mean_mbps,ci95_mbps\n");
    for s in r.aggregates() {
        let _ = writeln!(out, "{},{},{:.2},{:.2}", s.cell.precoder, s.cell.users_per_frame, s.mean / 1e6, s.ci95 / 1e6);
    }
    Ok(out)
}
