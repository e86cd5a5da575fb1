//! Three small experiments exposed to the browser. Each takes plain numbers
//! and returns a JSON string; the `*_json` functions are the same entry
//! points without the JavaScript boundary, used by the native tests.

use std::f64::consts::PI;

use recomb_core::diagnostics::{limit_study, LimitStudyConfig};
use recomb_core::kinetic_solver::{run, SolverConfig};
use recomb_core::linear_ops::{generator_spectrum, solve_linearized, LinearConfig, LinearModel};
use recomb_core::phase_space::DistributionPair;
use recomb_core::Model;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest grid the page accepts; keeps every call well under a second.
pub const MAX_NODES: usize = 64;

fn grid_model(nx: usize, nv: usize) -> Result<Model, String> {
    if nx > MAX_NODES || nv > MAX_NODES {
        return Err(format!("grid limited to {MAX_NODES} nodes per direction"));
    }
    Model::gaussian_default(nx, nv, 8.0).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

#[derive(Serialize)]
struct EntropyCurve {
    rho_inf: f64,
    times: Vec<f64>,
    relative_entropy: Vec<f64>,
    dissipation: Vec<f64>,
    mass_difference: Vec<f64>,
    /// ρ_f − ρ_g at the last record, one value per x node.
    final_density_difference: Vec<f64>,
}

/// Nonlinear run from densities 1 + amplitude·cos(2πx) in local equilibrium.
pub fn entropy_decay_json(amplitude: f64, t_final: f64, nx: usize, nv: usize) -> Result<String, String> {
    if !(amplitude.abs() < 1.0) {
        return Err("amplitude must lie in (-1, 1)".into());
    }
    if !(t_final > 0.0 && t_final <= 20.0) {
        return Err("t_final must lie in (0, 20]".into());
    }
    let model = grid_model(nx, nv)?;
    let rho: Vec<f64> = model
        .grid
        .x_nodes()
        .iter()
        .map(|x| 1.0 + amplitude * (2.0 * PI * x).cos())
        .collect();
    let initial = model.local_equilibrium(&rho).map_err(|e| e.to_string())?;
    let mut config = SolverConfig::new(&model.grid, t_final, 1.0);
    config.record_every = 5;
    config.keep_snapshots = true;
    let traj = run(&model, &initial, &config).map_err(|e| e.to_string())?;
    let last = traj.snapshots.last().expect("initial state is recorded");
    let final_density_difference = recomb_core::phase_space::density(&model.grid, last).difference();
    Ok(to_json(&EntropyCurve {
        rho_inf: traj.rho_inf,
        times: traj.times,
        relative_entropy: traj.relative_entropy,
        dissipation: traj.dissipation,
        mass_difference: traj.mass_difference,
        final_density_difference,
    }))
}

#[derive(Serialize)]
struct LinearCurve {
    times: Vec<f64>,
    norm: Vec<f64>,
    h_mod: Vec<f64>,
    spectral_gap: f64,
}

/// Linearized flow from the first Fourier mode in the macroscopic direction.
pub fn linear_decay_json(rho_inf: f64, t_final: f64, nx: usize, nv: usize) -> Result<String, String> {
    if !(t_final > 0.0 && t_final <= 20.0) {
        return Err("t_final must lie in (0, 20]".into());
    }
    if nx > 32 || nv > 32 {
        return Err("linear demo limited to 32 nodes per direction".into());
    }
    let lm = LinearModel::new(grid_model(nx, nv)?, rho_inf).map_err(|e| e.to_string())?;
    let xs = lm.grid().x_nodes();
    let (c1, c2) = (lm.model.chi1.values(), lm.model.chi2.values());
    let initial = DistributionPair::from_fn(
        lm.grid(),
        |i, j| (2.0 * PI * xs[i]).cos() * c1[j],
        |i, j| -(2.0 * PI * xs[i]).cos() * c2[j],
    );
    let mut config = LinearConfig::new(&lm, t_final);
    config.record_every = 5;
    let traj = solve_linearized(&lm, &initial, &config).map_err(|e| e.to_string())?;
    let spectral_gap = generator_spectrum(&lm).map_err(|e| e.to_string())?.spectral_gap;
    Ok(to_json(&LinearCurve {
        times: traj.times,
        norm: traj.norm,
        h_mod: traj.h_mod,
        spectral_gap,
    }))
}

/// Fast-reaction sweep over the given ε values against the diffusion limit.
pub fn limit_sweep_json(eps_list: &[f64], nx: usize, nv: usize) -> Result<String, String> {
    if eps_list.is_empty() || eps_list.len() > 6 {
        return Err("give between 1 and 6 epsilon values".into());
    }
    let model = grid_model(nx, nv)?;
    let config = LimitStudyConfig {
        eps_list: eps_list.to_vec(),
        ..LimitStudyConfig::default()
    };
    let report = limit_study(&model, &config).map_err(|e| e.to_string())?;
    Ok(report.to_json())
}

#[wasm_bindgen]
pub fn entropy_decay(amplitude: f64, t_final: f64, nx: usize, nv: usize) -> Result<String, JsValue> {
    entropy_decay_json(amplitude, t_final, nx, nv).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn linear_decay(rho_inf: f64, t_final: f64, nx: usize, nv: usize) -> Result<String, JsValue> {
    linear_decay_json(rho_inf, t_final, nx, nv).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn limit_sweep(eps_list: Vec<f64>, nx: usize, nv: usize) -> Result<String, JsValue> {
    limit_sweep_json(&eps_list, nx, nv).map_err(|e| JsValue::from_str(&e))
}
