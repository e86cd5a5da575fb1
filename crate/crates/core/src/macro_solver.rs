//! Limiting nonlinear diffusion equation ∂ₜm = ∂ₓ(D(m)∂ₓm) for m = ρ − 1/ρ.
//!
//! Space: conservative finite volumes on the periodic x-grid with arithmetic
//! face averages of D. Time: backward Euler, the nonlinearity resolved by
//! Picard iteration (coefficients lagged, one cyclic tridiagonal solve per
//! iterate). Every iterate solves a conservative M-matrix system, so the mean
//! of m and the discrete maximum principle hold regardless of how many
//! iterations were taken.

use crate::error::{Error, Result};

/// ρ(m) = (m + √(m²+4))/2, evaluated without cancellation for m < 0.
pub fn rho_of_m(m: f64) -> f64 {
    let root = m.hypot(2.0);
    if m >= 0.0 {
        0.5 * (m + root)
    } else {
        2.0 / (root - m)
    }
}

pub fn m_of_rho(rho: f64) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive (got {rho})")));
    }
    Ok(rho - 1.0 / rho)
}

/// D(m) = (D₁ρ² + D₂/ρ²)/(2ρ − m) with ρ = ρ(m); the denominator equals ρ + 1/ρ.
pub fn diffusion_coefficient(m: f64, d1: f64, d2: f64) -> f64 {
    let rho = rho_of_m(m);
    let rho2 = rho * rho;
    (d1 * rho2 + d2 / rho2) / (rho + 1.0 / rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub m: Vec<f64>,
    pub time: f64,
}

impl MacroState {
    pub fn new(m: Vec<f64>) -> Self {
        Self { m, time: 0.0 }
    }

    pub fn mean(&self) -> f64 {
        self.m.iter().sum::<f64>() / self.m.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.m.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.m.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionSolver {
    d1: f64,
    d2: f64,
    pub picard_tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl DiffusionSolver {
    /// Scalar (1-D) second moments D₁, D₂ of the two profiles.
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "diffusion moments must be positive (got {d1}, {d2})"
            )));
        }
        Ok(Self {
            d1,
            d2,
            picard_tolerance: 1e-10,
            max_iterations: 50,
            max_halvings: 5,
        })
    }

    pub fn coefficient(&self, m: f64) -> f64 {
        diffusion_coefficient(m, self.d1, self.d2)
    }

    /// Advances by `dt`, halving the step (recursively, at most `max_halvings` levels)
    /// when the Picard iteration fails to converge.
    pub fn diffusion_step(&self, state: &MacroState, dt: f64) -> Result<MacroState> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive (got {dt})")));
        }
        if state.m.len() < 3 {
            return Err(Error::InvalidArgument("diffusion grid needs at least 3 cells".into()));
        }
        self.step_level(state, dt, 0)
    }

    fn step_level(&self, state: &MacroState, dt: f64, level: usize) -> Result<MacroState> {
        match self.picard(&state.m, dt) {
            Ok(m) => Ok(MacroState {
                m,
                time: state.time + dt,
            }),
            Err(_) if level < self.max_halvings => {
                let half = self.step_level(state, 0.5 * dt, level + 1)?;
                self.step_level(&half, 0.5 * dt, level + 1)
            }
            Err(increment) => Err(Error::PicardDivergence {
                halvings: self.max_halvings,
                increment,
            }),
        }
    }

    /// Picard iteration for backward Euler; Err carries the last increment.
    fn picard(&self, m_old: &[f64], dt: f64) -> std::result::Result<Vec<f64>, f64> {
        let n = m_old.len();
        let h2 = 1.0 / (n * n) as f64;
        let r = dt / h2;
        let mut iterate = m_old.to_vec();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut increment = f64::INFINITY;
        for _ in 0..self.max_iterations {
            let d: Vec<f64> = iterate.iter().map(|&m| self.coefficient(m)).collect();
            for i in 0..n {
                let right = 0.5 * (d[i] + d[(i + 1) % n]);
                let left = 0.5 * (d[i] + d[(i + n - 1) % n]);
                lower[i] = -r * left;
                upper[i] = -r * right;
                diag[i] = 1.0 + r * (left + right);
            }
            // solve for the change from m_old: its right side is the discrete flux
            // divergence of m_old, exactly zero on constants
            let rhs: Vec<f64> = (0..n)
                .map(|i| {
                    let (l, c, u) = (m_old[(i + n - 1) % n], m_old[i], m_old[(i + 1) % n]);
                    -upper[i] * (u - c) + lower[i] * (c - l)
                })
                .collect();
            let change = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs);
            let next: Vec<f64> = m_old.iter().zip(&change).map(|(m, c)| m + c).collect();
            if next.iter().any(|v| !v.is_finite()) {
                return Err(f64::INFINITY);
            }
            let scale = next.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            increment = next
                .iter()
                .zip(&iterate)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
                / scale;
            iterate = next;
            if increment <= self.picard_tolerance {
                return Ok(iterate);
            }
        }
        Err(increment)
    }

    /// Repeated steps of size `dt` (the last one shortened to land on `t_final`),
    /// recording the initial state and every `record_every`-th state.
    pub fn run_diffusion(
        &self,
        m0: &MacroState,
        dt: f64,
        t_final: f64,
        record_every: usize,
    ) -> Result<Vec<MacroState>> {
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_final must be nonnegative (got {t_final})")));
        }
        let record_every = record_every.max(1);
        // a ratio a few ulps above an integer must not produce an empty last step
        let steps = (t_final / dt * (1.0 - 1e-12)).ceil() as usize;
        let mut records = vec![m0.clone()];
        let mut state = m0.clone();
        let start = m0.time;
        for k in 1..=steps {
            let target = if k == steps { start + t_final } else { start + k as f64 * dt };
            state = self.diffusion_step(&state, target - state.time)?;
            state.time = target;
            if k % record_every == 0 || k == steps {
                records.push(state.clone());
            }
        }
        Ok(records)
    }
}

/// Solves the periodic tridiagonal system
/// `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]` (indices mod n)
/// by the Sherman–Morrison correction of the Thomas algorithm.
pub fn solve_cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3);
    let alpha = upper[n - 1]; // couples row n-1 to x[0]
    let beta = lower[0]; // couples row 0 to x[n-1]
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = thomas(lower, &b, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &b, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const D1: f64 = 1.0;
    const D2: f64 = 1.69;

    fn cosine(nx: usize, mean: f64, amp: f64) -> MacroState {
        MacroState::new((0..nx).map(|i| mean + amp * (2.0 * PI * i as f64 / nx as f64).cos()).collect())
    }

    #[test]
    fn rho_m_pair() {
        assert_eq!(rho_of_m(0.0), 1.0);
        assert_abs_diff_eq!(rho_of_m(1.5), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_of_m(-1.5), 0.5, epsilon = 1e-15);
        assert!(m_of_rho(0.0).is_err());
        assert!(m_of_rho(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn rho_m_round_trip(m in -1e6f64..1e6) {
            let back = m_of_rho(rho_of_m(m)).unwrap();
            prop_assert!((back - m).abs() <= 1e-14 * m.abs().max(1.0));
        }

        #[test]
        fn diffusion_coefficient_positive(m in -100.0f64..100.0) {
            prop_assert!(diffusion_coefficient(m, D1, D2) > 0.0);
        }
    }

    #[test]
    fn diffusion_coefficient_values() {
        assert_abs_diff_eq!(diffusion_coefficient(0.0, D1, D2), 0.5 * (D1 + D2), epsilon = 1e-15);
        for &m in &[-3.0, -0.5, 0.7, 4.0] {
            // independent evaluation through ρ with the displayed denominator 2ρ − m
            let rho = 0.5 * (m + f64::sqrt(m * m + 4.0));
            let direct = (rho * rho + 1.0 / (rho * rho)) / (2.0 * rho - m);
            assert_abs_diff_eq!(diffusion_coefficient(m, 1.0, 1.0), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn cyclic_solver_matches_dense_solve() {
        let n = 9;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.2 - 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = diag[i];
            a[(i, (i + n - 1) % n)] = lower[i];
            a[(i, (i + 1) % n)] = upper[i];
        }
        let dense = a.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(x[i], dense[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn constants_are_steady() {
        let solver = DiffusionSolver::new(D1, D2).unwrap();
        let s = MacroState::new(vec![0.37; 16]);
        let next = solver.diffusion_step(&s, 0.1).unwrap();
        assert!(next.m.iter().all(|&m| m == 0.37));
    }

    #[test]
    fn mean_is_conserved() {
        let solver = DiffusionSolver::new(D1, D2).unwrap();
        let s = MacroState::new((0..32).map(|i| ((i * 13) % 7) as f64 * 0.3 - 0.8).collect());
        let mean0 = s.mean();
        let records = solver.run_diffusion(&s, 1e-3, 0.05, 5).unwrap();
        for r in &records {
            assert_abs_diff_eq!(r.mean(), mean0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_mode_decay_rate() {
        // linearization about m̄: amplitude decays like exp(-4π² D(m̄) t)
        for &mbar in &[0.0, 0.8, -1.2] {
            let solver = DiffusionSolver::new(D1, D2).unwrap();
            let s = cosine(64, mbar, 1e-3);
            let dt = 1e-5;
            let next = solver.diffusion_step(&s, dt).unwrap();
            let rate = -((next.m[0] - mbar) / (s.m[0] - mbar)).ln() / dt;
            let expected = 4.0 * PI * PI * solver.coefficient(mbar);
            assert!((rate / expected - 1.0).abs() < 0.05, "m̄={mbar}: {rate} vs {expected}");
        }
    }

    #[test]
    fn maximum_principle() {
        let solver = DiffusionSolver::new(D1, D2).unwrap();
        let s = MacroState::new((0..24).map(|i| if i < 6 { 2.0 } else if i < 15 { -1.0 } else { 0.4 }).collect());
        let records = solver.run_diffusion(&s, 2e-3, 0.1, 1).unwrap();
        for w in records.windows(2) {
            assert!(w[1].max() <= w[0].max() + 1e-14);
            assert!(w[1].min() >= w[0].min() - 1e-14);
        }
    }

    #[test]
    fn long_time_relaxation_to_mean() {
        let solver = DiffusionSolver::new(D1, D2).unwrap();
        let s = cosine(32, 0.2, 0.1);
        let mean = s.mean();
        let dmin = s.m.iter().map(|&m| solver.coefficient(m)).fold(f64::INFINITY, f64::min);
        let t = 20.0 / (4.0 * PI * PI * dmin);
        let records = solver.run_diffusion(&s, 1e-3, t, 1000).unwrap();
        let last = records.last().unwrap();
        assert_abs_diff_eq!(last.time, t, epsilon = 1e-12);
        let dev = last.m.iter().fold(0.0f64, |a, m| a.max((m - mean).abs()));
        assert!(dev <= 1e-8, "deviation {dev}");
    }

    #[test]
    fn self_convergence_orders() {
        let solver = DiffusionSolver::new(D1, D2).unwrap();
        let t = 0.01;
        // time: fixed grid, dt halved twice
        let s = cosine(32, 0.3, 0.5);
        let at = |dt: f64| solver.run_diffusion(&s, dt, t, 1_000_000).unwrap().pop().unwrap().m;
        let (a, b, c) = (at(1e-3), at(5e-4), at(2.5e-4));
        let e1 = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let e2 = b.iter().zip(&c).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let order_t = (e1 / e2).log2();
        assert!(order_t >= 0.9, "time order {order_t}");

        // space: nodes of the coarse grid are shared by the refinements
        let run = |nx: usize| {
            let s = cosine(nx, 0.3, 0.5);
            solver.run_diffusion(&s, 1e-4, t, 1_000_000).unwrap().pop().unwrap().m
        };
        let (u1, u2, u4) = (run(16), run(32), run(64));
        let e1 = (0..16).fold(0.0f64, |m, i| m.max((u1[i] - u2[2 * i]).abs()));
        let e2 = (0..16).fold(0.0f64, |m, i| m.max((u2[2 * i] - u4[4 * i]).abs()));
        let order_x = (e1 / e2).log2();
        assert!(order_x >= 1.9, "space order {order_x}");
    }

    #[test]
    fn step_count_tolerates_round_off() {
        let solver = DiffusionSolver::new(D1, D2).unwrap();
        let s = MacroState::new((0..8).map(|i| (i as f64).sin()).collect());
        let dt = 0.0271;
        assert!(5.0 * dt / dt > 5.0);
        let records = solver.run_diffusion(&s, dt, 5.0 * dt, 1).unwrap();
        assert_eq!(records.len(), 6);
        assert_eq!(records[5].time, 5.0 * dt);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(DiffusionSolver::new(0.0, 1.0).is_err());
        let solver = DiffusionSolver::new(D1, D2).unwrap();
        assert!(solver.diffusion_step(&MacroState::new(vec![0.0; 8]), 0.0).is_err());
    }

    #[test]
    fn failure_after_halvings_is_reported() {
        let mut solver = DiffusionSolver::new(D1, D2).unwrap();
        solver.max_iterations = 1;
        solver.picard_tolerance = 0.0;
        let err = solver.diffusion_step(&cosine(8, 0.0, 1.0), 0.1).unwrap_err();
        assert!(matches!(err, Error::PicardDivergence { halvings: 5, .. }));
    }
}
