//! Strang splitting for dF/dt + TF = LF.
//!
//! The collision part is x-local and linear. Its densities obey
//! u = ρ_f − ρ_g = const and w = ρ_f/ρ∞ + ρ∞ρ_g ∝ e^{−κt} with κ = ρ∞ + 1/ρ∞,
//! after which f and g follow scalar linear ODEs with known forcing.

use super::LinearModel;
use crate::error::{Error, Result};
use crate::kinetic_solver::transport_substep;
use crate::phase_space::{density, mass_difference, DistributionPair};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConfig {
    pub dt: f64,
    pub t_final: f64,
    /// δ of the modified entropy H.
    pub delta: f64,
    /// δ of the ℋ¹ functional.
    pub delta_h1: f64,
    pub record_every: usize,
}

impl LinearConfig {
    pub fn new(lm: &LinearModel, t_final: f64) -> Self {
        let grid = lm.grid();
        Self {
            dt: 0.4 * grid.dx() / grid.vmax(),
            t_final,
            delta: 0.1,
            delta_h1: 0.1,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrajectory {
    pub times: Vec<f64>,
    pub norm: Vec<f64>,
    pub h_mod: Vec<f64>,
    pub h1_mod: Vec<f64>,
    pub initial_mass_difference: f64,
    /// Set when the initial mass difference is not zero.
    pub warning: Option<String>,
}

/// Exact flow of dF/dt = LF over `dt`.
pub fn linear_reaction_substep(lm: &LinearModel, state: &DistributionPair, dt: f64) -> DistributionPair {
    let r = lm.rho_inf();
    let kappa = r + 1.0 / r;
    let rho = density(lm.grid(), state);
    let (c1, c2) = (lm.model.chi1.values(), lm.model.chi2.values());
    let decay_f = (-dt / r).exp();
    let decay_g = (-r * dt).exp();
    // ∫₀ᵗ e^{−(t−s)/ρ∞} ds and ∫₀ᵗ e^{−(t−s)/ρ∞}e^{−κs} ds, same for g
    let int_f_const = -r * (-dt / r).exp_m1();
    let int_f_decay = decay_f * -(-r * dt).exp_m1() / r;
    let int_g_const = -(-r * dt).exp_m1() / r;
    let int_g_decay = decay_g * r * -(-dt / r).exp_m1();
    let mut out = state.clone();
    for i in 0..lm.grid().nx() {
        let u = rho.rho_f[i] - rho.rho_g[i];
        let w0 = rho.rho_f[i] / r + r * rho.rho_g[i];
        // ρ_g(s) = a_g + b e^{−κs}, ρ_f(s) = a_f + b e^{−κs}
        let b = w0 / kappa;
        let a_g = -u / (r * kappa);
        let a_f = r * u / kappa;
        let source_f = -r * (a_g * int_f_const + b * int_f_decay);
        let source_g = -(a_f * int_g_const + b * int_g_decay) / r;
        for j in 0..lm.grid().nv() {
            out.f[[i, j]] = state.f[[i, j]] * decay_f + source_f * c1[j];
            out.g[[i, j]] = state.g[[i, j]] * decay_g + source_g * c2[j];
        }
    }
    out.time = state.time + dt;
    out
}

fn linear_step(lm: &LinearModel, state: &DistributionPair, dt: f64) -> DistributionPair {
    let half = transport_substep(lm.grid(), state, 0.5 * dt, 1.0);
    let reacted = linear_reaction_substep(lm, &half, dt);
    let mut out = transport_substep(lm.grid(), &reacted, 0.5 * dt, 1.0);
    out.time = state.time + dt;
    out
}

/// Integrates the linearized system, recording ‖F‖, H[F] and ‖F‖²_{ℋ¹}.
pub fn solve_linearized(lm: &LinearModel, initial: &DistributionPair, config: &LinearConfig) -> Result<LinearTrajectory> {
    initial.check_grid(lm.grid())?;
    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive (got {})", config.dt)));
    }
    if !(config.t_final.is_finite() && config.t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!("t_final must be nonnegative (got {})", config.t_final)));
    }
    let md = mass_difference(lm.grid(), initial);
    let warning = (md.abs() > 1e-10).then(|| {
        format!("initial mass difference {md:e} is not zero; the perturbation decays to a shifted equilibrium")
    });
    let steps = (config.t_final / config.dt).round().max(if config.t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
    let dt = if steps > 0 { config.t_final / steps as f64 } else { config.dt };
    let every = config.record_every.max(1);
    let mut out = LinearTrajectory {
        times: Vec::new(),
        norm: Vec::new(),
        h_mod: Vec::new(),
        h1_mod: Vec::new(),
        initial_mass_difference: md,
        warning,
    };
    let push = |state: &DistributionPair, out: &mut LinearTrajectory| -> Result<()> {
        if !state.is_finite() {
            return Err(Error::NonFinite { time: state.time });
        }
        out.times.push(state.time);
        out.norm.push(lm.norm(state)?);
        out.h_mod.push(lm.modified_entropy(state, config.delta)?.value);
        out.h1_mod.push(lm.h1_functional(state, config.delta_h1)?.value);
        Ok(())
    };
    let mut state = initial.clone();
    state.time = 0.0;
    push(&state, &mut out)?;
    for k in 1..=steps {
        state = linear_step(lm, &state, dt);
        state.time = k as f64 * dt;
        if k % every == 0 || k == steps {
            push(&state, &mut out)?;
        }
    }
    Ok(out)
}
