//! Quantitative checks of the coercivity and boundedness estimates.

use std::fmt;

use serde::Serialize;

use super::flow::{solve_linearized, LinearConfig};
use super::{generator_spectrum, macroscopic_coercivity, LinearModel, SampleOptions, Sampler};
use crate::error::Result;
use crate::phase_space::{density, DistributionPair, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Measured and reported without a threshold.
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportLine {
    pub name: String,
    pub value: f64,
    pub status: Status,
    /// Offending sample (stacked vector) for failed sampled inequalities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub rho_inf: f64,
    pub lines: Vec<ReportLine>,
}

impl CoercivityReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.status != Status::Fail)
    }

    pub fn failures(&self) -> Vec<&ReportLine> {
        self.lines.iter().filter(|l| l.status == Status::Fail).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ReportLine> {
        self.lines.iter().find(|l| l.name == name)
    }

    /// One `name = value | status` line per entry.
    pub fn to_text(&self) -> String {
        self.lines
            .iter()
            .map(|l| format!("{} = {} | {}\n", l.name, l.value, l.status))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// Slack for inequalities that hold exactly at the quadrature level.
    pub tolerance: f64,
    /// δ values scanned for monotone decay of H and of the ℋ¹ functional.
    pub delta_scan: Vec<f64>,
    /// The δ whose monotonicity is asserted rather than only reported.
    pub delta: f64,
    pub scan_time: f64,
    pub envelope_sizes: Vec<f64>,
    /// Include the dense spectrum of L − T.
    pub dense_spectrum: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            n_samples: 100,
            seed: 0,
            tolerance: 1e-8,
            delta_scan: vec![0.02, 0.05, 0.1, 0.2, 0.4],
            delta: 0.1,
            scan_time: 2.0,
            envelope_sizes: vec![0.2, 0.1, 0.05, 0.025],
            dense_spectrum: true,
        }
    }
}

struct Builder {
    lines: Vec<ReportLine>,
}

impl Builder {
    fn push(&mut self, name: impl Into<String>, value: f64, status: Status) {
        self.lines.push(ReportLine {
            name: name.into(),
            value,
            status,
            witness: None,
        });
    }

    fn check(&mut self, name: impl Into<String>, value: f64, ok: bool, witness: Option<&DistributionPair>) {
        let status = if ok && value.is_finite() { Status::Pass } else { Status::Fail };
        self.lines.push(ReportLine {
            name: name.into(),
            value,
            status,
            witness: (status == Status::Fail).then(|| witness.map(|w| w.to_vector())).flatten(),
        });
    }
}

/// Tracks the extreme of a sampled ratio together with its sample.
struct Extreme {
    value: f64,
    index: usize,
    minimize: bool,
}

impl Extreme {
    fn min() -> Self {
        Self {
            value: f64::INFINITY,
            index: 0,
            minimize: true,
        }
    }

    fn max() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            index: 0,
            minimize: false,
        }
    }

    fn update(&mut self, value: f64, index: usize) {
        let better = if self.minimize { value < self.value } else { value > self.value };
        if better || value.is_nan() {
            self.value = value;
            self.index = index;
        }
    }
}

fn micro(lm: &LinearModel, s: &DistributionPair) -> DistributionPair {
    s.difference(&lm.apply_pi(s))
}

/// (max ‖AT(1−Π)F‖/‖(1−Π)F‖, max ‖ALF‖/‖(1−Π)F‖) over samples.
fn aux_bounds(lm: &LinearModel, samples: &[DistributionPair]) -> Result<(f64, f64)> {
    let (mut at, mut al) = (0.0f64, 0.0f64);
    for s in samples {
        let m = micro(lm, s);
        let nm = lm.norm(&m)?;
        at = at.max(lm.norm(&lm.apply_a(&lm.apply_t(&m)))? / nm);
        al = al.max(lm.norm(&lm.apply_a(&lm.apply_l(s)))? / nm);
    }
    Ok((at, al))
}

/// max ‖Q(F∞ + F) − LF‖/‖F‖ over perturbations with |f/χ₁| ≤ γ and the
/// matching reciprocal bound for g, so F∞ + F lies in the envelope.
fn nonlinear_remainder(lm: &LinearModel, samples: &[DistributionPair], gamma: f64) -> Result<f64> {
    let r = lm.rho_inf();
    let (c1, c2) = (lm.model.chi1.values(), lm.model.chi2.values());
    let g_room = gamma / (r * (r + gamma));
    let mut worst = 0.0f64;
    for s in samples {
        let ratio_max = |h: &ndarray::Array2<f64>, c: &[f64]| {
            h.indexed_iter().fold(0.0f64, |m, ((_, j), v)| m.max((v / c[j]).abs()))
        };
        let mut p = s.clone();
        let sf = gamma / ratio_max(&s.f, c1);
        let sg = g_room / ratio_max(&s.g, c2);
        p.f.mapv_inplace(|v| v * sf);
        p.g.mapv_inplace(|v| v * sg);
        let full = DistributionPair::from_fn(
            lm.grid(),
            |i, j| r * c1[j] + p.f[[i, j]],
            |i, j| c2[j] / r + p.g[[i, j]],
        );
        let rho = density(lm.grid(), &full);
        let mut rem = DistributionPair::from_fn(
            lm.grid(),
            |i, j| c1[j] - rho.rho_g[i] * full.f[[i, j]],
            |i, j| c2[j] - rho.rho_f[i] * full.g[[i, j]],
        );
        rem.axpy(-1.0, &lm.apply_l(&p));
        worst = worst.max(lm.norm(&rem)? / lm.norm(&p)?);
    }
    Ok(worst)
}

fn monotone(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs())
}

/// Measures every estimate on band-limited random samples and dense spectra.
pub fn coercivity_report(model: &Model, rho_inf: f64, options: &ReportOptions) -> Result<CoercivityReport> {
    let lm = LinearModel::new(model.clone(), rho_inf)?;
    let r = rho_inf;
    let lo = r.min(1.0 / r);
    let hi = r.max(1.0 / r);
    let tol = options.tolerance;
    let sampler = Sampler::new(options.seed, SampleOptions::default());
    let zero_mass = Sampler::new(
        options.seed,
        SampleOptions {
            mean_zero: true,
            ..SampleOptions::default()
        },
    );
    let n = options.n_samples.max(2);
    let samples: Vec<DistributionPair> = (0..n).map(|k| sampler.sample(&lm, k as u64)).collect();
    let mut b = Builder { lines: Vec::new() };
    b.push("rho_inf", r, Status::Info);
    b.push("samples", n as f64, Status::Info);

    // (P1) microscopic coercivity and (H1/2), (H1/3) loss coercivity
    let (mut p1, mut loss, mut loss_v, mut a_bound) = (Extreme::min(), Extreme::min(), Extreme::min(), Extreme::max());
    let (mut pi_idem, mut pi_orth, mut l_split, mut l_pi, mut pi_l) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (k, s) in samples.iter().enumerate() {
        let m = micro(&lm, s);
        let nm2 = lm.inner(&m, &m)?;
        let ns2 = lm.inner(s, s)?;
        let scale = ns2.sqrt();
        p1.update(-lm.inner(&lm.apply_l(s), s)? / nm2, k);
        loss.update(lm.inner(&lm.apply_lambda(s), s)? / ns2, k);
        let dv = lm.v_derivative(s);
        let dlv = lm.v_derivative(&lm.apply_lambda(s));
        loss_v.update(lm.inner(&dlv, &dv)? / lm.inner(&dv, &dv)?, k);
        a_bound.update(lm.norm(&lm.apply_a(s))? / nm2.sqrt(), k);
        let p = lm.apply_pi(s);
        pi_idem = pi_idem.max(lm.norm(&lm.apply_pi(&p).difference(&p))? / scale);
        let other = &samples[(k + 1) % n];
        pi_orth = pi_orth.max(lm.inner(&p, &micro(&lm, other))?.abs() / (scale * lm.norm(other)?));
        let mut split = lm.apply_k(s);
        split.axpy(-1.0, &lm.apply_lambda(s));
        l_split = l_split.max(lm.norm(&split.difference(&lm.apply_l(s)))? / scale);
        l_pi = l_pi.max(lm.norm(&lm.apply_l(&p))? / scale);
        pi_l = pi_l.max(lm.norm(&lm.apply_pi(&lm.apply_l(s)))? / scale);
    }
    b.push("p1_bound", lo, Status::Info);
    b.check("p1_micro_coercivity", p1.value, p1.value >= lo - tol, Some(&samples[p1.index]));
    b.check("h1_2_loss_coercivity", loss.value, loss.value >= lo - tol, Some(&samples[loss.index]));
    b.check("h1_3_loss_coercivity_v", loss_v.value, loss_v.value >= lo - tol, Some(&samples[loss_v.index]));
    b.check("a_bound", a_bound.value, a_bound.value <= 0.5 + tol, Some(&samples[a_bound.index]));
    b.check("pi_idempotence", pi_idem, pi_idem <= 1e-10, None);
    b.check("pi_orthogonality", pi_orth, pi_orth <= 1e-10, None);
    b.check("l_equals_k_minus_lambda", l_split, l_split <= 1e-13, None);
    b.check("l_pi_zero", l_pi, l_pi <= 1e-10, None);
    b.check("pi_l_zero", pi_l, pi_l <= 1e-10, None);

    // (H1/1) boundedness, symmetry of L, skewness of T on pairs
    let (mut bound, mut sym, mut skew) = (Extreme::max(), 0.0f64, 0.0f64);
    for k in 0..n {
        let (f, g) = (&samples[k], &samples[(k + 1) % n]);
        let nn = lm.norm(f)? * lm.norm(g)?;
        let lf = lm.apply_l(f);
        bound.update(lm.inner(&lf, g)?.abs() / nn, k);
        sym = sym.max((lm.inner(&lf, g)? - lm.inner(f, &lm.apply_l(g))?).abs() / nn);
        skew = skew.max((lm.inner(&lm.apply_t(f), g)? + lm.inner(f, &lm.apply_t(g))?).abs() / nn);
    }
    b.push("h1_1_bound", 4.0 * hi, Status::Info);
    b.check("h1_1_boundedness", bound.value, bound.value <= 4.0 * hi, Some(&samples[bound.index]));
    b.check("l_symmetry", sym, sym <= 1e-10, None);
    b.check("t_skewness", skew, skew <= 1e-10, None);

    // (H2) gain interpolation: smallest admissible C for each δ
    for delta in [0.5, 0.1, 0.02] {
        let mut c = 0.0f64;
        for s in &samples {
            let dv = lm.v_derivative(s);
            let dk = lm.v_derivative(&lm.apply_k(s));
            let need = lm.inner(&dk, &dv)?.abs() - delta * lm.inner(&dv, &dv)?;
            c = c.max(need / lm.inner(s, s)?);
        }
        b.check(format!("h2_gain_c_delta_{delta}"), c, c.is_finite(), None);
    }

    // (P2) macroscopic coercivity, dense and sampled
    let mc = macroscopic_coercivity(&lm)?;
    b.push("p2_poincare", mc.poincare, Status::Info);
    b.check("p2_macro_coercivity", mc.lambda_m, mc.lambda_m >= 0.95 * mc.poincare, None);
    b.push("p2_zero_modes", mc.zero_modes as f64, Status::Info);
    let mut p2 = Extreme::min();
    let mut p3 = 0.0f64;
    let zero_samples: Vec<DistributionPair> = (0..n).map(|k| zero_mass.sample(&lm, k as u64)).collect();
    for (k, s) in zero_samples.iter().enumerate() {
        let p = lm.apply_pi(s);
        let tp = lm.apply_tpi(s);
        p2.update(lm.inner(&tp, &tp)? / lm.inner(&p, &p)?, k);
        p3 = p3.max(lm.norm(&lm.apply_pi(&tp))? / lm.norm(s)?);
    }
    b.check(
        "p2_sampled_min_ratio",
        p2.value,
        p2.value >= mc.lambda_m * (1.0 - tol),
        Some(&zero_samples[p2.index]),
    );
    b.check("p3_pi_t_pi", p3, p3 <= 1e-10, None);

    // (P4) on the grid and on a grid with twice the spatial resolution
    let (at, al) = aux_bounds(&lm, &samples)?;
    let fine = LinearModel::new(model.with_nx(2 * model.grid.nx())?, r)?;
    let fine_samples: Vec<DistributionPair> = (0..n).map(|k| sampler.sample(&fine, k as u64)).collect();
    let (at_f, al_f) = aux_bounds(&fine, &fine_samples)?;
    b.push("p4_at_micro", at, Status::Info);
    b.push("p4_al_micro", al, Status::Info);
    b.push("p4_at_micro_refined", at_f, Status::Info);
    b.push("p4_al_micro_refined", al_f, Status::Info);
    let (cm, cm_f) = (at + al, at_f + al_f);
    b.check("p4_c_m", cm_f, cm_f <= 2.0 * cm, None);

    // nonlinear remainder ‖Q − LF‖ ≤ γ‖F‖ shrinking with the envelope
    let mut gammas = Vec::new();
    for &size in &options.envelope_sizes {
        let g = nonlinear_remainder(&lm, &samples, size)?;
        b.push(format!("quadratic_gamma_env_{size}"), g, Status::Info);
        gammas.push(g);
    }
    if gammas.len() >= 2 {
        let decreasing = gammas.windows(2).all(|w| w[1] < w[0]);
        let ratio = gammas[gammas.len() - 1] / gammas[0];
        let shrink = options.envelope_sizes[options.envelope_sizes.len() - 1] / options.envelope_sizes[0];
        b.check("quadratic_gamma_shrinks", ratio, decreasing && ratio <= 2.0 * shrink, None);
    }

    // δ scans along a linearized trajectory
    let start = &zero_samples[0];
    for &delta in &options.delta_scan {
        let mut config = LinearConfig::new(&lm, options.scan_time);
        config.delta = delta;
        config.delta_h1 = delta;
        config.record_every = 1;
        let traj = solve_linearized(&lm, start, &config)?;
        let (h_ok, h1_ok) = (monotone(&traj.h_mod), monotone(&traj.h1_mod));
        let flag = |ok: bool| if ok { 1.0 } else { 0.0 };
        if delta == options.delta {
            b.check(format!("h_monotone_delta_{delta}"), flag(h_ok), h_ok, Some(start));
            b.check(format!("h1_monotone_delta_{delta}"), flag(h1_ok), h1_ok, Some(start));
        } else {
            b.push(format!("h_monotone_delta_{delta}"), flag(h_ok), Status::Info);
            b.push(format!("h1_monotone_delta_{delta}"), flag(h1_ok), Status::Info);
        }
    }

    if options.dense_spectrum {
        let spectrum = generator_spectrum(&lm)?;
        b.check("generator_max_real", spectrum.max_real, spectrum.max_real <= 1e-10, None);
        b.push("generator_zero_modes", spectrum.zero_modes as f64, Status::Info);
        b.check("generator_spectral_gap", spectrum.spectral_gap, spectrum.spectral_gap > 0.0, None);
    }

    Ok(CoercivityReport { rho_inf: r, lines: b.lines })
}
