//! ε-sweep comparing rescaled kinetic runs with the nonlinear diffusion limit.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetic_solver::{reaction_substep, transport_substep};
use crate::macro_solver::{m_of_rho, DiffusionSolver, MacroState};
use crate::phase_space::{density, DistributionPair, Model, PhaseGrid};

/// ρ₀(x) = ρ∞ + amplitude·cos(2π·mode·x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialProfile {
    pub rho_inf: f64,
    pub amplitude: f64,
    pub mode: usize,
    /// Local equilibrium (ρ₀χ₁, χ₂/ρ₀) when true; otherwise (ρ₀χ₁, χ₂/ρ∞),
    /// which carries an initial reaction layer.
    pub well_prepared: bool,
}

impl Default for InitialProfile {
    fn default() -> Self {
        Self {
            rho_inf: 1.0,
            amplitude: 0.1,
            mode: 1,
            well_prepared: true,
        }
    }
}

impl InitialProfile {
    pub fn rho(&self, x: f64) -> f64 {
        self.rho_inf + self.amplitude * (2.0 * PI * self.mode as f64 * x).cos()
    }

    fn partner_density(&self, x: f64) -> f64 {
        if self.well_prepared {
            1.0 / self.rho(x)
        } else {
            1.0 / self.rho_inf
        }
    }

    /// Initial datum of the limit equation. Without preparation the reaction
    /// layer equilibrates at frozen s = ρ_f − ρ_g, so the limit starts from s.
    pub fn m0(&self, x: f64) -> Result<f64> {
        if self.well_prepared {
            m_of_rho(self.rho(x))
        } else {
            Ok(self.rho(x) - self.partner_density(x))
        }
    }

    pub fn kinetic_state(&self, model: &Model) -> DistributionPair {
        let xs = model.grid.x_nodes();
        let c1 = model.chi1.values();
        let c2 = model.chi2.values();
        DistributionPair::from_fn(
            &model.grid,
            |i, j| self.rho(xs[i]) * c1[j],
            |i, j| self.partner_density(xs[i]) * c2[j],
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho_inf.is_finite() && self.amplitude.is_finite() && self.rho_inf - self.amplitude.abs() > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "initial density must stay positive (rho_inf {}, amplitude {})",
                self.rho_inf, self.amplitude
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitStudyConfig {
    /// Strictly decreasing, each in (0, 1].
    pub eps_list: Vec<f64>,
    /// Macroscopic comparison time.
    pub t_final: f64,
    /// Number of comparison records after t = 0.
    pub records: usize,
    /// dt = dt_coefficient·ε², reduced to divide the record interval.
    pub dt_coefficient: f64,
    /// The diffusion solver runs on nx·macro_refine cells.
    pub macro_refine: usize,
    pub macro_dt: f64,
    pub initial: InitialProfile,
}

impl Default for LimitStudyConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.4, 0.2, 0.1, 0.05],
            t_final: 0.2,
            records: 20,
            dt_coefficient: 0.1,
            macro_refine: 4,
            macro_dt: 1e-5,
            initial: InitialProfile::default(),
        }
    }
}

impl LimitStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::InvalidArgument("eps list is empty".into()));
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::InvalidArgument(format!("eps must lie in (0, 1] (got {e})")));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("eps list must be strictly decreasing".into()));
        }
        let positive = [self.t_final, self.dt_coefficient, self.macro_dt];
        if positive.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidArgument(
                "t_final, dt_coefficient and macro_dt must be positive".into(),
            ));
        }
        if self.records == 0 || self.macro_refine == 0 {
            return Err(Error::InvalidArgument("records and macro_refine must be at least 1".into()));
        }
        self.initial.validate()
    }

    fn record_interval(&self) -> f64 {
        self.t_final / self.records as f64
    }
}

/// Outcome for one ε. Norms are NaN and `failure` is set if the kinetic run failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsEntry {
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    /// sup over records of ‖(ρ_f − ρ_g) − m‖_{L²ₓ}
    pub err_sup: f64,
    /// ∫₀ᵀ ‖f⊥‖²_{L²(dx dv/χ₁)} dt
    pub perp_f: f64,
    pub perp_g: f64,
    /// ‖√(ρ_fρ_g) − 1‖_{L²ₓₜ}
    pub sqrt_defect: f64,
    /// max over steps of ‖Δ(ρ_f − ρ_g)/dt + ∂ₓ∫v(f⊥ − g⊥)‖_{L²ₓ}, the flux
    /// being the exact time average over the transport substeps.
    pub conservation_residual: f64,
    /// log(err_prev/err)/log(eps_prev/eps); None for the first entry.
    pub order: Option<f64>,
    pub errors: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSweepReport {
    pub t_final: f64,
    pub record_times: Vec<f64>,
    pub entries: Vec<EpsEntry>,
}

impl EpsSweepReport {
    pub fn eps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.eps).collect()
    }

    pub fn err_sup(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.err_sup).collect()
    }

    pub fn all_succeeded(&self) -> bool {
        self.entries.iter().all(|e| e.failure.is_none())
    }

    pub const CSV_HEADER: &'static str = "eps,err_sup,perp_f,perp_g,sqrt_defect,order";

    /// One row per ε; the first order field is empty.
    pub fn to_csv_rows(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| {
                let order = e.order.map(|o| o.to_string()).unwrap_or_default();
                format!("{},{},{},{},{},{}", e.eps, e.err_sup, e.perp_f, e.perp_g, e.sqrt_defect, order)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in self.to_csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Exact time average over [0, τ] of ∫ v (f − g) dv under free transport.
fn averaged_transport_flux(grid: &PhaseGrid, state: &DistributionPair, tau: f64, eps: f64) -> Vec<f64> {
    let spectral = grid.spectral();
    let w = grid.weights();
    let mut total = vec![0.0; grid.nx()];
    let mut column = vec![0.0; grid.nx()];
    for (j, &v) in grid.velocities().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (c, (f, g)) in column.iter_mut().zip(state.f.column(j).iter().zip(state.g.column(j))) {
            *c = f - g;
        }
        let speed = v * tau / eps;
        // mean over s ∈ [0, 1] of e^{−iξ·speed·s}
        spectral.apply(&mut column, |xi| {
            let theta = xi * speed;
            if theta.abs() < 1e-8 {
                Complex64::new(1.0 - theta * theta / 6.0, -theta / 2.0)
            } else {
                Complex64::new(theta.sin(), theta.cos() - 1.0) / theta
            }
        });
        for (t, c) in total.iter_mut().zip(&column) {
            *t += w[j] * v * c;
        }
    }
    total
}

fn l2x(grid: &PhaseGrid, values: impl Iterator<Item = f64>) -> f64 {
    (grid.dx() * values.map(|v| v * v).sum::<f64>()).sqrt()
}

struct StepMeasures {
    perp_f: f64,
    perp_g: f64,
    defect: f64,
}

fn measure(model: &Model, state: &DistributionPair, eps: f64) -> StepMeasures {
    let grid = &model.grid;
    let w = grid.weights();
    let c1 = model.chi1.values();
    let c2 = model.chi2.values();
    let rho = density(grid, state);
    let mut perp_f = 0.0;
    let mut perp_g = 0.0;
    for i in 0..grid.nx() {
        for j in 0..grid.nv() {
            let fp = (state.f[[i, j]] - rho.rho_f[i] * c1[j]) / eps;
            let gp = (state.g[[i, j]] - rho.rho_g[i] * c2[j]) / eps;
            perp_f += w[j] * fp * fp / c1[j];
            perp_g += w[j] * gp * gp / c2[j];
        }
    }
    let defect: f64 = rho
        .rho_f
        .iter()
        .zip(&rho.rho_g)
        .map(|(a, b)| ((a * b).max(0.0).sqrt() - 1.0).powi(2))
        .sum();
    StepMeasures {
        perp_f: perp_f * grid.dx(),
        perp_g: perp_g * grid.dx(),
        defect: defect * grid.dx(),
    }
}

struct KineticOutcome {
    dt: f64,
    steps: usize,
    differences: Vec<Vec<f64>>,
    perp_f: f64,
    perp_g: f64,
    sqrt_defect: f64,
    residual: f64,
}

fn kinetic_run(model: &Model, config: &LimitStudyConfig, eps: f64) -> Result<KineticOutcome> {
    let grid = &model.grid;
    let interval = config.record_interval();
    let per_record = (interval / (config.dt_coefficient * eps * eps)).ceil().max(1.0) as usize;
    let dt = interval / per_record as f64;
    let mut state = config.initial.kinetic_state(model);
    state.eps = eps;
    let initial_density = density(grid, &state);
    let mut differences = vec![initial_density.difference()];
    let mut previous = measure(model, &state, eps);
    let (mut perp_f, mut perp_g, mut defect) = (0.0, 0.0, 0.0);
    let mut residual: f64 = 0.0;
    let mut u_prev = initial_density.difference();
    let mut derivative = vec![0.0; grid.nx()];
    for record in 1..=config.records {
        for _ in 0..per_record {
            let j_first = averaged_transport_flux(grid, &state, 0.5 * dt, eps);
            let half = transport_substep(grid, &state, 0.5 * dt, eps);
            let reacted = reaction_substep(model, &half, dt, eps)?;
            let j_second = averaged_transport_flux(grid, &reacted, 0.5 * dt, eps);
            state = transport_substep(grid, &reacted, 0.5 * dt, eps);
            if !state.is_finite() {
                return Err(Error::NonFinite { time: state.time });
            }
            // ∂ₓ of the step-averaged ∫v(f⊥ − g⊥) = (1/ε)∫v(f − g)
            derivative
                .iter_mut()
                .zip(j_first.iter().zip(&j_second))
                .for_each(|(d, (a, b))| *d = 0.5 * (a + b) / eps);
            grid.spectral().derivative(&mut derivative);
            let u = density(grid, &state).difference();
            let r = l2x(
                grid,
                u.iter().zip(&u_prev).zip(&derivative).map(|((a, b), d)| (a - b) / dt + d),
            );
            residual = residual.max(r);
            u_prev = u;

            let current = measure(model, &state, eps);
            perp_f += 0.5 * dt * (previous.perp_f + current.perp_f);
            perp_g += 0.5 * dt * (previous.perp_g + current.perp_g);
            defect += 0.5 * dt * (previous.defect + current.defect);
            previous = current;
        }
        state.time = record as f64 * interval;
        differences.push(u_prev.clone());
    }
    Ok(KineticOutcome {
        dt,
        steps: per_record * config.records,
        differences,
        perp_f,
        perp_g,
        sqrt_defect: defect.sqrt(),
        residual,
    })
}

/// The diffusion solution at the record times, sampled at the kinetic nodes.
fn macro_reference(model: &Model, config: &LimitStudyConfig) -> Result<Vec<Vec<f64>>> {
    let nx = model.grid.nx();
    let fine = nx * config.macro_refine;
    let m0 = (0..fine)
        .map(|i| config.initial.m0(i as f64 / fine as f64))
        .collect::<Result<Vec<_>>>()?;
    let solver = DiffusionSolver::new(model.chi1.diffusion(), model.chi2.diffusion())?;
    let interval = config.record_interval();
    let per_record = (interval / config.macro_dt).ceil().max(1.0) as usize;
    let dt = interval / per_record as f64;
    let records = solver.run_diffusion(&MacroState::new(m0), dt, config.t_final, per_record)?;
    Ok(records
        .iter()
        .map(|r| (0..nx).map(|i| r.m[i * config.macro_refine]).collect())
        .collect())
}

/// Runs the rescaled kinetic system for every ε up to the macroscopic time
/// and compares ρ_f − ρ_g with the diffusion limit started from m₀.
pub fn limit_study(model: &Model, config: &LimitStudyConfig) -> Result<EpsSweepReport> {
    config.validate()?;
    let grid = &model.grid;
    let reference = macro_reference(model, config)?;
    if reference.len() != config.records + 1 {
        return Err(Error::InvalidArgument(format!(
            "diffusion solver produced {} records, expected {}",
            reference.len(),
            config.records + 1
        )));
    }
    let interval = config.record_interval();
    let record_times = (0..=config.records).map(|k| k as f64 * interval).collect();
    let mut entries: Vec<EpsEntry> = Vec::with_capacity(config.eps_list.len());
    for &eps in &config.eps_list {
        let entry = match kinetic_run(model, config, eps) {
            Ok(run) => {
                let errors: Vec<f64> = run
                    .differences
                    .iter()
                    .zip(&reference)
                    .map(|(u, m)| l2x(grid, u.iter().zip(m).map(|(a, b)| a - b)))
                    .collect();
                EpsEntry {
                    eps,
                    dt: run.dt,
                    steps: run.steps,
                    err_sup: errors.iter().cloned().fold(0.0, f64::max),
                    perp_f: run.perp_f,
                    perp_g: run.perp_g,
                    sqrt_defect: run.sqrt_defect,
                    conservation_residual: run.residual,
                    order: None,
                    errors,
                    failure: None,
                }
            }
            Err(err) => EpsEntry {
                eps,
                dt: f64::NAN,
                steps: 0,
                err_sup: f64::NAN,
                perp_f: f64::NAN,
                perp_g: f64::NAN,
                sqrt_defect: f64::NAN,
                conservation_residual: f64::NAN,
                order: None,
                errors: Vec::new(),
                failure: Some(err.to_string()),
            },
        };
        entries.push(entry);
    }
    for k in 1..entries.len() {
        let (a, b) = (&entries[k - 1], &entries[k]);
        let order = (a.err_sup / b.err_sup).ln() / (a.eps / b.eps).ln();
        entries[k].order = order.is_finite().then_some(order);
    }
    Ok(EpsSweepReport {
        t_final: config.t_final,
        record_times,
        entries,
    })
}
