//! Entropy functionals, decay-rate fitting and the ε → 0 limit study.

mod limit;

pub use limit::{limit_study, EpsEntry, EpsSweepReport, InitialProfile, LimitStudyConfig};

use serde::Serialize;

use crate::error::{Error, Result, Species};
use crate::phase_space::{DistributionPair, Model};

/// φ(r) = r ln r − r + 1, accurate near r = 1.
fn phi(r: f64) -> f64 {
    let x = r - 1.0;
    if x.abs() < 0.1 {
        // Σ_{n≥2} (−x)^n / (n(n−1))
        let mut term = x * x;
        let mut sum = 0.0;
        for n in 2..24 {
            let nf = n as f64;
            sum += term / (nf * (nf - 1.0));
            term *= -x;
        }
        sum
    } else {
        r * r.ln() - r + 1.0
    }
}

fn first_non_positive(state: &DistributionPair) -> Option<Error> {
    for (species, h) in [(Species::F, &state.f), (Species::G, &state.g)] {
        if let Some(((x_index, v_index), &value)) = h.indexed_iter().find(|(_, v)| !(**v > 0.0)) {
            return Some(Error::NonPositiveState {
                species,
                x_index,
                v_index,
                value,
            });
        }
    }
    None
}

/// H(f,g) − H(f∞,g∞)
/// = ∫∫ f ln(f/(ρ∞χ₁)) − f + ρ∞χ₁ + g ln(ρ∞g/χ₂) − g + χ₂/ρ∞ dv dx ≥ 0.
pub fn relative_entropy(model: &Model, state: &DistributionPair, rho_inf: f64) -> Result<f64> {
    state.check_grid(&model.grid)?;
    if let Some(err) = first_non_positive(state) {
        return Err(err);
    }
    let w = model.grid.weights();
    let c1 = model.chi1.values();
    let c2 = model.chi2.values();
    let mut total = 0.0;
    for ((_, j), &f) in state.f.indexed_iter() {
        let base = rho_inf * c1[j];
        total += w[j] * base * phi(f / base);
    }
    for ((_, j), &g) in state.g.indexed_iter() {
        let base = c2[j] / rho_inf;
        total += w[j] * base * phi(g / base);
    }
    Ok(total * model.grid.dx())
}

/// ∫∫∫ (χ₁χ₂′ − f g′) ln(f g′/(χ₁χ₂′)) dv′ dv dx. Every quadrature term is
/// nonpositive, so the result is ≤ 0 in floating point as well.
pub fn entropy_dissipation(model: &Model, state: &DistributionPair) -> Result<f64> {
    state.check_grid(&model.grid)?;
    if let Some(err) = first_non_positive(state) {
        return Err(err);
    }
    let grid = &model.grid;
    let w = grid.weights();
    let c1 = model.chi1.values();
    let c2 = model.chi2.values();
    let nv = grid.nv();
    let mut a = vec![0.0; nv];
    let mut b = vec![0.0; nv];
    let mut total = 0.0;
    for i in 0..grid.nx() {
        for j in 0..nv {
            a[j] = state.f[[i, j]] / c1[j];
            b[j] = state.g[[i, j]] / c2[j];
        }
        for j in 0..nv {
            let outer = w[j] * c1[j];
            let mut inner = 0.0;
            for k in 0..nv {
                let d = a[j] * b[k] - 1.0;
                inner += w[k] * c2[k] * (-d * d.ln_1p());
            }
            total += outer * inner;
        }
    }
    Ok(total * grid.dx())
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Exponential decay rate fitted on a trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// λ in values ≈ C e^{−λt}
    pub rate: f64,
    pub r_squared: f64,
    /// ln C
    pub log_amplitude: f64,
    pub samples: usize,
}

/// Least-squares slope of ln(values) over the trailing `window` fraction of the
/// samples (0.5 is the usual choice).
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: f64) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Fit("times and values differ in length".into()));
    }
    if times.len() < 10 {
        return Err(Error::Fit(format!("need at least 10 samples (got {})", times.len())));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Fit(format!("window must lie in (0, 1] (got {window})")));
    }
    let n = times.len();
    let count = ((window * n as f64).ceil() as usize).clamp(3, n);
    let start = n - count;
    if let Some(v) = values[start..].iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Fit(format!("non-positive value {v} inside the fit window")));
    }
    let logs: Vec<f64> = values[start..].iter().map(|v| v.ln()).collect();
    let fit = least_squares(&times[start..], &logs);
    Ok(DecayFit {
        rate: -fit.slope,
        r_squared: fit.r_squared,
        log_amplitude: fit.intercept,
        samples: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::equilibrium;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn model() -> Model {
        Model::gaussian_default(8, 24, 8.0).unwrap()
    }

    #[test]
    fn phi_branches_agree() {
        for &r in &[0.899, 0.9, 0.95, 1.0, 1.05, 1.0999, 1.1] {
            let direct = r * f64::ln(r) - r + 1.0;
            assert_abs_diff_eq!(phi(r), direct, epsilon = 1e-15);
        }
    }

    #[test]
    fn entropy_of_equilibrium_is_zero() {
        let m = model();
        for &rho in &[0.5, 1.0, 2.0] {
            let eq = equilibrium(&m, rho).unwrap();
            assert!(relative_entropy(&m, &eq, rho).unwrap().abs() < 1e-12);
            assert!(entropy_dissipation(&m, &eq).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_closed_form() {
        // f = 2ρ∞χ₁: integrand ρ∞χ₁(2 ln 2 − 1), g at equilibrium
        let m = model();
        let rho = 1.7;
        let mut state = equilibrium(&m, rho).unwrap();
        state.f.mapv_inplace(|f| 2.0 * f);
        let h = relative_entropy(&m, &state, rho).unwrap();
        assert_abs_diff_eq!(h, rho * (2.0 * 2f64.ln() - 1.0), epsilon = 1e-8);
    }

    #[test]
    fn dissipation_vanishes_on_local_equilibria() {
        let m = model();
        let rho: Vec<f64> = m.grid.x_nodes().iter().map(|x| 1.0 + 0.4 * (2.0 * PI * x).sin()).collect();
        let le = m.local_equilibrium(&rho).unwrap();
        assert!(entropy_dissipation(&m, &le).unwrap().abs() < 1e-10);
        assert!(relative_entropy(&m, &le, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn entropy_rejects_non_positive_states() {
        let m = model();
        let mut state = equilibrium(&m, 1.0).unwrap();
        state.g[[3, 5]] = 0.0;
        assert!(matches!(
            relative_entropy(&m, &state, 1.0),
            Err(Error::NonPositiveState { species: Species::G, x_index: 3, v_index: 5, .. })
        ));
        assert!(entropy_dissipation(&m, &state).is_err());
    }

    proptest! {
        #[test]
        fn entropy_nonnegative_dissipation_nonpositive(
            scales in proptest::collection::vec(0.2f64..3.0, 16),
            rho in 0.3f64..3.0,
        ) {
            let m = model();
            let state = DistributionPair::from_fn(
                &m.grid,
                |i, j| scales[i] * m.chi1.values()[j] * (1.0 + 0.3 * ((i + j) as f64).sin()),
                |i, j| scales[8 + i] * m.chi2.values()[j],
            );
            prop_assert!(relative_entropy(&m, &state, rho).unwrap() >= -1e-12);
            prop_assert!(entropy_dissipation(&m, &state).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn decay_fit_exact_exponential() {
        let t: Vec<f64> = (0..40).map(|k| 0.1 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = fit_decay_rate(&t, &v, 0.5).unwrap();
        assert_abs_diff_eq!(fit.rate, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decay_fit_perturbed_exponential() {
        let t: Vec<f64> = (0..200).map(|k| 0.1 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-0.5 * t).exp() * (1.0 + 0.01 * t.sin())).collect();
        let fit = fit_decay_rate(&t, &v, 0.5).unwrap();
        assert!((fit.rate - 0.5).abs() < 0.02, "rate {}", fit.rate);
    }

    #[test]
    fn decay_fit_constant_and_errors() {
        let t: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let fit = fit_decay_rate(&t, &[4.0; 12], 0.5).unwrap();
        assert_abs_diff_eq!(fit.rate, 0.0, epsilon = 1e-12);
        let mut v = vec![1.0; 12];
        v[10] = 0.0;
        assert!(fit_decay_rate(&t, &v, 0.5).is_err());
        assert!(fit_decay_rate(&t[..5], &v[..5], 0.5).is_err());
    }
}
