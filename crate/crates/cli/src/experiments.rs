//! The five experiment families. Each returns tabular data, a summary and
//! the invariant checks that decide the exit status.

use std::f64::consts::PI;

use recomb_core::diagnostics::{fit_decay_rate, limit_study, DecayFit, EpsSweepReport};
use recomb_core::kinetic_solver::{run, Envelope, SolverConfig};
use recomb_core::linear_ops::{
    coercivity_report, generator_spectrum, solve_linearized, LinearConfig, LinearModel, ReportOptions,
    SampleOptions, Sampler, Status,
};
use recomb_core::phase_space::{mass_difference, theta_exponent, DistributionPair, ThetaFit};
use recomb_core::Error;
use serde_json::{json, Map, Value};

use crate::config::{Experiment, Perturbation, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
}

impl Check {
    fn new(name: &str, passed: bool, value: f64) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
        }
    }
}

/// Everything an experiment produces, before it is written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    /// Flat `name = value | status` report (coercivity-check only).
    pub report: Option<String>,
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            report: None,
            summary: Map::new(),
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn fit_json(fit: Result<DecayFit, Error>) -> Value {
    match fit {
        Ok(f) => json!({"rate": f.rate, "r_squared": f.r_squared, "samples": f.samples}),
        Err(e) => json!({"error": e.to_string()}),
    }
}

fn non_increasing(values: &[f64], slack: f64) -> (bool, f64) {
    let worst = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    (values.len() < 2 || worst <= slack, worst.max(0.0))
}

pub fn run_experiment(config: &RunConfig) -> Result<Outcome, Error> {
    match config.experiment() {
        Experiment::Simulate => simulate(config),
        Experiment::LinearDecay => linear_decay(config),
        Experiment::CoercivityCheck => coercivity_check(config),
        Experiment::LimitStudy => limit(config),
        Experiment::ProfileCheck => profile_check(config),
    }
}

fn simulate(config: &RunConfig) -> Result<Outcome, Error> {
    let model = config.model();
    let p = &config.physics;
    let xs = model.grid.x_nodes();
    let rho: Vec<f64> = xs
        .iter()
        .map(|x| p.rho_inf + p.amplitude * (2.0 * PI * p.mode as f64 * x).cos())
        .collect();
    let initial = model.local_equilibrium(&rho)?;
    let mut solver = SolverConfig::new(&model.grid, config.numerics.t_final, p.eps);
    solver.dt = config.dt();
    solver.record_every = config.numerics.record_every;
    if p.envelope {
        solver.envelope = Some(Envelope {
            center: p.rho_inf,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
        });
    }
    let traj = run(&model, &initial, &solver)?;
    let mut out = Outcome::new(vec![
        "t",
        "mass_diff",
        "rel_entropy",
        "dissipation",
        "env_min_f",
        "env_max_f",
        "env_min_g",
        "env_max_g",
    ]);
    for k in 0..traj.times.len() {
        out.rows.push(vec![
            traj.times[k],
            traj.mass_difference[k],
            traj.relative_entropy[k],
            traj.dissipation[k],
            traj.env_min_f[k],
            traj.env_max_f[k],
            traj.env_min_g[k],
            traj.env_max_g[k],
        ]);
    }
    let m0 = traj.mass_difference[0];
    let drift = traj.mass_difference.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max);
    let (steps, dt) = solver.steps();
    let slack = 1e-8 * dt * dt * solver.record_every as f64;
    let (monotone, rise) = non_increasing(&traj.relative_entropy, slack);
    let max_diss = traj.dissipation.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.checks.push(Check::new("mass_conservation", drift <= 1e-10, drift));
    out.checks.push(Check::new("entropy_non_increasing", monotone, rise));
    out.checks.push(Check::new("dissipation_non_positive", max_diss <= 1e-12, max_diss));
    if p.envelope {
        // the solver aborts on a violation, so reaching here means it held
        out.checks.push(Check::new("envelope", true, 0.0));
    }
    out.summary.insert("rho_inf".into(), json!(traj.rho_inf));
    out.summary.insert("dt".into(), json!(dt));
    out.summary.insert("steps".into(), json!(steps));
    out.summary.insert(
        "entropy_decay".into(),
        fit_json(fit_decay_rate(&traj.times, &traj.relative_entropy, config.numerics.fit_window)),
    );
    Ok(out)
}

fn linear_initial(config: &RunConfig, lm: &LinearModel) -> DistributionPair {
    let p = &config.physics;
    match p.perturbation {
        Perturbation::Cosine => {
            let xs = lm.grid().x_nodes();
            let (c1, c2) = (lm.model.chi1.values(), lm.model.chi2.values());
            let phase = |i: usize| p.amplitude * (2.0 * PI * p.mode as f64 * xs[i]).cos();
            DistributionPair::from_fn(lm.grid(), |i, j| phase(i) * c1[j], |i, j| -phase(i) * c2[j])
        }
        Perturbation::Random => {
            let options = SampleOptions {
                mean_zero: true,
                ..SampleOptions::default()
            };
            Sampler::new(config.output.seed, options).sample(lm, 0).scaled(p.amplitude)
        }
    }
}

fn linear_decay(config: &RunConfig) -> Result<Outcome, Error> {
    let lm = LinearModel::new(config.model(), config.physics.rho_inf)?;
    let initial = linear_initial(config, &lm);
    let n = &config.numerics;
    let flow = LinearConfig {
        dt: config.dt(),
        t_final: n.t_final,
        delta: n.delta,
        delta_h1: n.delta_h1,
        record_every: n.record_every,
    };
    let traj = solve_linearized(&lm, &initial, &flow)?;
    let mut out = Outcome::new(vec!["t", "norm", "h_mod", "h1_mod"]);
    for k in 0..traj.times.len() {
        out.rows.push(vec![traj.times[k], traj.norm[k], traj.h_mod[k], traj.h1_mod[k]]);
    }
    let scale = traj.norm[0].max(f64::MIN_POSITIVE);
    let (norm_ok, norm_rise) = non_increasing(&traj.norm, 1e-12 * scale);
    let (h_ok, h_rise) = non_increasing(&traj.h_mod, 1e-12 * scale * scale);
    out.checks.push(Check::new("norm_non_increasing", norm_ok, norm_rise));
    out.checks.push(Check::new("modified_entropy_non_increasing", h_ok, h_rise));
    let fit = fit_decay_rate(&traj.times, &traj.norm, n.fit_window);
    if traj.norm[0] > 0.0 {
        let rate = fit.as_ref().map(|f| f.rate).unwrap_or(f64::NAN);
        out.checks.push(Check::new("positive_decay_rate", rate > 0.0, rate));
    }
    let (h1_ok, _) = non_increasing(&traj.h1_mod, 1e-12 * scale * scale);
    out.summary.insert("h1_monotone".into(), json!(h1_ok));
    out.summary.insert("norm_decay".into(), fit_json(fit));
    out.summary.insert(
        "h_mod_decay".into(),
        fit_json(fit_decay_rate(&traj.times, &traj.h_mod, n.fit_window)),
    );
    out.summary.insert("initial_mass_difference".into(), json!(traj.initial_mass_difference));
    if let Some(w) = &traj.warning {
        out.summary.insert("warning".into(), json!(w));
    }
    match generator_spectrum(&lm) {
        Ok(spectrum) => {
            out.summary.insert("spectral_gap".into(), json!(spectrum.spectral_gap));
            out.summary.insert("generator_zero_modes".into(), json!(spectrum.zero_modes));
        }
        Err(e) => {
            out.summary.insert("spectral_gap_error".into(), json!(e.to_string()));
        }
    }
    Ok(out)
}

fn coercivity_check(config: &RunConfig) -> Result<Outcome, Error> {
    let c = &config.coercivity;
    let options = ReportOptions {
        n_samples: c.n_samples,
        seed: config.output.seed,
        tolerance: c.tolerance,
        delta: config.numerics.delta,
        scan_time: c.scan_time,
        dense_spectrum: c.dense_spectrum,
        ..ReportOptions::default()
    };
    let report = coercivity_report(&config.model(), config.physics.rho_inf, &options)?;
    let mut out = Outcome::new(Vec::new());
    for line in &report.lines {
        if line.status != Status::Info {
            out.checks.push(Check::new(
                &line.name,
                line.status == Status::Pass,
                line.value,
            ));
        }
    }
    out.report = Some(report.to_text());
    out.summary.insert(
        "report".into(),
        serde_json::to_value(&report).expect("report serializes"),
    );
    Ok(out)
}

fn limit(config: &RunConfig) -> Result<Outcome, Error> {
    let report: EpsSweepReport = limit_study(&config.model(), &config.limit_study_config())?;
    let mut out = Outcome::new(vec!["eps", "err_sup", "perp_f", "perp_g", "sqrt_defect", "order"]);
    for e in &report.entries {
        out.rows.push(vec![
            e.eps,
            e.err_sup,
            e.perp_f,
            e.perp_g,
            e.sqrt_defect,
            e.order.unwrap_or(f64::NAN),
        ]);
    }
    let errs = report.err_sup();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let residual = report
        .entries
        .iter()
        .map(|e| e.conservation_residual)
        .fold(0.0, f64::max);
    let failed = report.entries.iter().filter(|e| e.failure.is_some()).count();
    out.checks.push(Check::new("all_runs_succeeded", failed == 0, failed as f64));
    out.checks.push(Check::new(
        "err_sup_strictly_decreasing",
        decreasing,
        errs.first().zip(errs.last()).map(|(a, b)| a / b).unwrap_or(f64::NAN),
    ));
    out.checks.push(Check::new("conservation_residual", residual <= 1e-6, residual));
    out.summary.insert("sweep".into(), serde_json::to_value(&report).expect("report serializes"));
    Ok(out)
}

fn theta_json(fit: &ThetaFit) -> Value {
    json!({"theta": fit.theta, "constant": fit.constant, "r_squared": fit.r_squared})
}

fn profile_check(config: &RunConfig) -> Result<Outcome, Error> {
    let model = config.model();
    let grid = &model.grid;
    let mut out = Outcome::new(vec!["v", "chi1", "chi2"]);
    for (j, v) in grid.velocities().iter().enumerate() {
        out.rows.push(vec![*v, model.chi1.values()[j], model.chi2.values()[j]]);
    }
    let deltas: Vec<f64> = (0..12).map(|k| 1e-2 * 40f64.powf(k as f64 / 11.0)).collect();
    for (name, profile) in [("chi1", &model.chi1), ("chi2", &model.chi2)] {
        let fit = theta_exponent(profile, grid, &deltas)?;
        out.checks.push(Check::new(
            &format!("{name}_theta_near_one"),
            (0.9..=1.1).contains(&fit.theta),
            fit.theta,
        ));
        out.checks.push(Check::new(&format!("{name}_zero_flux"), profile.mean_flux().abs() <= 1e-12, profile.mean_flux()));
        out.summary.insert(
            name.into(),
            json!({
                "mass": profile.mass(),
                "mean_flux": profile.mean_flux(),
                "diffusion": profile.diffusion(),
                "theta": theta_json(&fit),
            }),
        );
    }
    out.summary.insert(
        "equilibrium_mass_difference".into(),
        json!(mass_difference(grid, &model.local_equilibrium(&vec![config.physics.rho_inf; grid.nx()])?)),
    );
    Ok(out)
}
