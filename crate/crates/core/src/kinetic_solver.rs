//! Strang splitting for the nonlinear kinetic system
//!
//! ```text
//! ε²∂ₜf + εv∂ₓf = χ₁ − ρ_g f
//! ε²∂ₜg + εv∂ₓg = χ₂ − ρ_f g
//! ```
//!
//! Transport is solved exactly on the discrete Fourier basis. The reaction
//! flow is x-local; with s = ρ_f − ρ_g frozen, the density obeys a Riccati
//! equation with roots ρ(s) and −1/ρ(s), and f (resp. g) follows the linear
//! mild formula driven by the partner density. Both the Riccati trajectory and
//! the time integrals entering the mild formula are available in closed form,
//! so the substep is exact and positivity-preserving by construction.

use ndarray::Array2;

use crate::diagnostics::{entropy_dissipation, relative_entropy};
use crate::error::{Error, Result, Species};
use crate::macro_solver::rho_of_m;
use crate::phase_space::{density, mass_difference, rho_infinity, DistributionPair, Model, PhaseGrid};

/// Tolerance on the envelope ratios f/χ₁ and g/χ₂.
pub const ENVELOPE_TOLERANCE: f64 = 1e-8;
/// Most negative value tolerated before a positivity failure is reported.
pub const POSITIVITY_TOLERANCE: f64 = 1e-13;

/// L∞ bracket (c − γ₁)χ₁ ≤ f ≤ (c + γ₂)χ₁, χ₂/(c + γ₂) ≤ g ≤ χ₂/(c − γ₁).
///
/// The reaction maps this set into itself for any center c > γ₁, so the
/// center need not coincide with the ρ∞ fixed by the mass difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub center: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Envelope {
    pub fn f_bounds(&self) -> (f64, f64) {
        (self.center - self.gamma1, self.center + self.gamma2)
    }

    pub fn g_bounds(&self) -> (f64, f64) {
        (1.0 / (self.center + self.gamma2), 1.0 / (self.center - self.gamma1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub eps: f64,
    pub envelope: Option<Envelope>,
    pub record_every: usize,
    pub keep_snapshots: bool,
}

impl SolverConfig {
    /// 0.4·ε·Δx/vmax: a splitting-accuracy choice, transport itself is exact.
    pub fn default_dt(grid: &PhaseGrid, eps: f64) -> f64 {
        0.4 * eps * grid.dx() / grid.vmax()
    }

    pub fn new(grid: &PhaseGrid, t_final: f64, eps: f64) -> Self {
        Self {
            dt: Self::default_dt(grid, eps),
            t_final,
            eps,
            envelope: None,
            record_every: 10,
            keep_snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidArgument(format!("t_final must be nonnegative (got {})", self.t_final)));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("eps must lie in (0, 1] (got {})", self.eps)));
        }
        if let Some(env) = &self.envelope {
            if !(env.gamma1 > 0.0 && env.gamma2 > 0.0) {
                return Err(Error::InvalidArgument("envelope widths must be positive".into()));
            }
            if env.gamma1 >= env.center {
                return Err(Error::InvalidArgument(format!(
                    "envelope requires gamma1 < rho_inf (gamma1 = {}, rho_inf = {})",
                    env.gamma1, env.center
                )));
            }
        }
        Ok(())
    }

    /// Number of steps and the effective (uniform) step landing on `t_final`.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_final / self.dt).round().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

/// Diagnostics recorded along a nonlinear run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub rho_inf: f64,
    pub dt: f64,
    pub record_every: usize,
    pub times: Vec<f64>,
    pub mass_difference: Vec<f64>,
    pub relative_entropy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub env_min_f: Vec<f64>,
    pub env_max_f: Vec<f64>,
    pub env_min_g: Vec<f64>,
    pub env_max_g: Vec<f64>,
    pub min_value: Vec<f64>,
    pub snapshots: Vec<DistributionPair>,
}

/// Exact translation f(·, v) ↦ f(· − v·dt/ε, v) per velocity column.
pub fn transport_substep(grid: &PhaseGrid, state: &DistributionPair, dt: f64, eps: f64) -> DistributionPair {
    let mut out = state.clone();
    let spectral = grid.spectral();
    let mut column = vec![0.0; grid.nx()];
    for (j, &v) in grid.velocities().iter().enumerate() {
        let shift = v * dt / eps;
        for h in [&mut out.f, &mut out.g] {
            column.iter_mut().zip(h.column(j)).for_each(|(c, x)| *c = *x);
            spectral.shift(&mut column, shift);
            h.column_mut(j).iter_mut().zip(&column).for_each(|(x, c)| *x = *c);
        }
    }
    out.time = state.time + dt;
    out
}

/// Closed-form reaction flow of one species over scaled time u = t/ε².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRelaxation {
    /// Own density at the end of the interval.
    pub rho_end: f64,
    /// exp(−∫ρ_partner du): multiplier of the initial distribution.
    pub decay: f64,
    /// ∫ exp(−∫_{u'}^{u} ρ_partner) du': multiplier of the production profile.
    pub source: f64,
}

/// Solves ρ' = 1 − ρ(ρ − s), s = ρ_self − ρ_partner, and the attached linear
/// integrals, from `rho_self`, `rho_partner` over scaled time `u`.
pub fn pair_relaxation(rho_self: f64, rho_partner: f64, u: f64) -> PairRelaxation {
    let s = rho_self - rho_partner;
    let root = rho_of_m(s); // ρ(s); the other root is −1/ρ(s)
    let a = 1.0 / root; // = root − s, rate of the partner at equilibrium
    let gap = root + a;
    let q0 = (rho_self - root) / (rho_self + a);
    let q = q0 * (-gap * u).exp();
    let one_minus_q = 1.0 - q;
    let rho_end = root + gap * q / one_minus_q;
    let ea = (-a * u).exp();
    let decay = ea * (1.0 - q0) / one_minus_q;
    // ∫₀ᵘ e^{-a(u-u')}(1 − q0 e^{-gap u'}) du' / (1 − q(u))
    let source = (-(-a * u).exp_m1() / a - q0 * ea * (-(-root * u).exp_m1()) / root) / one_minus_q;
    PairRelaxation { rho_end, decay, source }
}

/// Exact flow of the reaction terms over `dt` at scaling ε.
pub fn reaction_substep(model: &Model, state: &DistributionPair, dt: f64, eps: f64) -> Result<DistributionPair> {
    let grid = &model.grid;
    let macros = density(grid, state);
    for (species, rho) in [(Species::F, &macros.rho_f), (Species::G, &macros.rho_g)] {
        if let Some((x_index, &value)) = rho.iter().enumerate().find(|(_, r)| !(**r >= 0.0)) {
            return Err(Error::NegativeDensity { species, x_index, value });
        }
    }
    let u = dt / (eps * eps);
    let c1 = model.chi1.values();
    let c2 = model.chi2.values();
    let mut out = state.clone();
    for i in 0..grid.nx() {
        let (rf, rg) = (macros.rho_f[i], macros.rho_g[i]);
        let pf = pair_relaxation(rf, rg, u);
        let pg = pair_relaxation(rg, rf, u);
        out.f.row_mut(i).iter_mut().zip(c1).for_each(|(f, c)| *f = *f * pf.decay + c * pf.source);
        out.g.row_mut(i).iter_mut().zip(c2).for_each(|(g, c)| *g = *g * pg.decay + c * pg.source);
    }
    out.time = state.time + dt;
    Ok(out)
}

/// transport(dt/2) ∘ reaction(dt) ∘ transport(dt/2)
pub fn strang_step(model: &Model, state: &DistributionPair, dt: f64, eps: f64) -> Result<DistributionPair> {
    let half = transport_substep(&model.grid, state, 0.5 * dt, eps);
    let reacted = reaction_substep(model, &half, dt, eps)?;
    let mut out = transport_substep(&model.grid, &reacted, 0.5 * dt, eps);
    out.time = state.time + dt;
    out.eps = eps;
    Ok(out)
}

/// (min f/χ₁, max f/χ₁, min g/χ₂, max g/χ₂) with the witnessing nodes.
fn envelope_ratios(model: &Model, state: &DistributionPair) -> [(f64, usize, usize); 4] {
    let scan = |h: &Array2<f64>, chi: &[f64]| {
        let mut lo = (f64::INFINITY, 0, 0);
        let mut hi = (f64::NEG_INFINITY, 0, 0);
        for ((i, j), &v) in h.indexed_iter() {
            let r = v / chi[j];
            if r < lo.0 {
                lo = (r, i, j);
            }
            if r > hi.0 {
                hi = (r, i, j);
            }
        }
        (lo, hi)
    };
    let (fl, fh) = scan(&state.f, model.chi1.values());
    let (gl, gh) = scan(&state.g, model.chi2.values());
    [fl, fh, gl, gh]
}

fn check_envelope(env: &Envelope, ratios: &[(f64, usize, usize); 4], time: f64) -> Result<()> {
    let (flo, fhi) = env.f_bounds();
    let (glo, ghi) = env.g_bounds();
    let checks = [
        (Species::F, ratios[0], ratios[0].0 < flo - ENVELOPE_TOLERANCE),
        (Species::F, ratios[1], ratios[1].0 > fhi + ENVELOPE_TOLERANCE),
        (Species::G, ratios[2], ratios[2].0 < glo - ENVELOPE_TOLERANCE),
        (Species::G, ratios[3], ratios[3].0 > ghi + ENVELOPE_TOLERANCE),
    ];
    for (species, (ratio, x_index, v_index), violated) in checks {
        if violated {
            let (lower, upper) = if species == Species::F { (flo, fhi) } else { (glo, ghi) };
            return Err(Error::EnvelopeViolation {
                time,
                species,
                x_index,
                v_index,
                ratio,
                lower,
                upper,
            });
        }
    }
    Ok(())
}

fn record(model: &Model, state: &DistributionPair, config: &SolverConfig, out: &mut TrajectoryRecord) -> Result<()> {
    let grid = &model.grid;
    if !state.is_finite() {
        return Err(Error::NonFinite { time: state.time });
    }
    let min_value = state.min_value();
    if min_value < -POSITIVITY_TOLERANCE {
        let (species, h) = if state.f.iter().any(|v| *v == min_value) {
            (Species::F, &state.f)
        } else {
            (Species::G, &state.g)
        };
        let ((x_index, v_index), _) = h.indexed_iter().find(|(_, v)| **v == min_value).expect("minimum exists");
        return Err(Error::NonPositiveState {
            species,
            x_index,
            v_index,
            value: min_value,
        });
    }
    let ratios = envelope_ratios(model, state);
    if let Some(env) = &config.envelope {
        check_envelope(env, &ratios, state.time)?;
    }
    out.times.push(state.time);
    out.mass_difference.push(mass_difference(grid, state));
    out.relative_entropy.push(relative_entropy(model, state, out.rho_inf)?);
    out.dissipation.push(entropy_dissipation(model, state)?);
    out.env_min_f.push(ratios[0].0);
    out.env_max_f.push(ratios[1].0);
    out.env_min_g.push(ratios[2].0);
    out.env_max_g.push(ratios[3].0);
    out.min_value.push(min_value);
    if config.keep_snapshots {
        out.snapshots.push(state.clone());
    }
    Ok(())
}

/// Integrates from `initial` to `config.t_final`, recording every
/// `config.record_every` steps (and always the first and last state).
pub fn run(model: &Model, initial: &DistributionPair, config: &SolverConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    initial.check_grid(&model.grid)?;
    if !initial.is_finite() {
        return Err(Error::NonFinite { time: initial.time });
    }
    let rho_inf = rho_infinity(mass_difference(&model.grid, initial), model.grid.volume())?;
    let (steps, dt) = config.steps();
    let record_every = config.record_every.max(1);
    let mut out = TrajectoryRecord {
        rho_inf,
        dt,
        record_every,
        ..Default::default()
    };
    let mut state = initial.clone();
    state.eps = config.eps;
    let t0 = state.time;
    record(model, &state, config, &mut out)?;
    for k in 1..=steps {
        state = strang_step(model, &state, dt, config.eps)?;
        state.time = t0 + k as f64 * dt;
        if !state.is_finite() {
            return Err(Error::NonFinite { time: state.time });
        }
        if k % record_every == 0 || k == steps {
            record(model, &state, config, &mut out)?;
        }
    }
    Ok(out)
}
