//! Linearization around the global equilibrium (ρ∞χ₁, χ₂/ρ∞).
//!
//! States are perturbations F = (f, g) in the Hilbert space with
//! ⟨F₁, F₂⟩ = ∫∫ f₁f₂/(ρ∞χ₁) + g₁g₂ρ∞/χ₂ dv dx, and the evolution is
//! dF/dt + TF = LF.

mod dense;
mod flow;
mod report;
mod sampling;

pub use dense::{
    assemble_dense, dense_generator_eigenvalues, generator_spectrum, macroscopic_coercivity, weight_diagonal, DenseOperator, GeneratorSpectrum,
    MacroCoercivity, OperatorLabel, MAX_DENSE_DIM,
};
pub use flow::{linear_reaction_substep, solve_linearized, LinearConfig, LinearTrajectory};
pub use report::{coercivity_report, CoercivityReport, ReportLine, ReportOptions, Status};
pub use sampling::{orthonormal_velocity_modes, SampleOptions, Sampler};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::phase_space::{density, flux, DistributionPair, Model, PhaseGrid};

/// A model together with the equilibrium level ρ∞ that fixes the weights.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub model: Model,
    rho_inf: f64,
    /// Π-range profile e = (ρ∞²χ₁, −χ₂)/(ρ∞² + 1)
    e_f: Vec<f64>,
    e_g: Vec<f64>,
    d0: f64,
}

/// H[F] with its equivalence bracket ((1−δ)/2)‖F‖² ≤ H ≤ ((1+δ)/2)‖F‖².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedEntropy {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ModifiedEntropy {
    /// Meaningful for δ < 1 only.
    pub fn within_bracket(&self) -> bool {
        let slack = 1e-12 * self.upper.abs().max(1e-300);
        self.lower - slack <= self.value && self.value <= self.upper + slack
    }
}

/// ‖F‖²_{ℋ¹} = ‖F‖² + ‖∂ₓF‖² + ‖∂ᵥF‖² + δ⟨∂ₓF, ∂ᵥF⟩ and its H¹ parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Functional {
    pub value: f64,
    pub h1_squared: f64,
    pub mixed: f64,
}

impl LinearModel {
    pub fn new(model: Model, rho_inf: f64) -> Result<Self> {
        if !(rho_inf.is_finite() && rho_inf > 0.0) {
            return Err(Error::InvalidArgument(format!("rho_inf must be positive (got {rho_inf})")));
        }
        let r2 = rho_inf * rho_inf;
        let e_f = model.chi1.values().iter().map(|c| r2 * c / (r2 + 1.0)).collect();
        let e_g = model.chi2.values().iter().map(|c| -c / (r2 + 1.0)).collect();
        let d0 = (r2 * model.chi1.diffusion() + model.chi2.diffusion()) / (r2 + 1.0);
        Ok(Self {
            model,
            rho_inf,
            e_f,
            e_g,
            d0,
        })
    }

    pub fn rho_inf(&self) -> f64 {
        self.rho_inf
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.model.grid
    }

    /// D₀ = (ρ∞²D₁ + D₂)/(ρ∞² + 1)
    pub fn d0(&self) -> f64 {
        self.d0
    }

    /// The Π-range velocity profile (f part, g part).
    pub fn macro_profile(&self) -> (&[f64], &[f64]) {
        (&self.e_f, &self.e_g)
    }

    /// Pointwise velocity weights (1/(ρ∞χ₁), ρ∞/χ₂) of the inner product.
    pub fn weight_f(&self, j: usize) -> f64 {
        1.0 / (self.rho_inf * self.model.chi1.values()[j])
    }

    pub fn weight_g(&self, j: usize) -> f64 {
        self.rho_inf / self.model.chi2.values()[j]
    }

    fn check(&self, state: &DistributionPair) -> Result<()> {
        state.check_grid(self.grid())
    }

    fn weighted(&self, a: &Array2<f64>, b: &Array2<f64>, weight: impl Fn(usize) -> f64) -> f64 {
        let w = self.grid().weights();
        let mut total = 0.0;
        for (row_a, row_b) in a.rows().into_iter().zip(b.rows()) {
            for (j, (x, y)) in row_a.iter().zip(row_b.iter()).enumerate() {
                total += w[j] * weight(j) * x * y;
            }
        }
        total * self.grid().dx()
    }

    pub fn inner(&self, a: &DistributionPair, b: &DistributionPair) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.inner_unchecked(a, b))
    }

    fn inner_unchecked(&self, a: &DistributionPair, b: &DistributionPair) -> f64 {
        self.weighted(&a.f, &b.f, |j| self.weight_f(j)) + self.weighted(&a.g, &b.g, |j| self.weight_g(j))
    }

    pub fn norm(&self, state: &DistributionPair) -> Result<f64> {
        Ok(self.inner(state, state)?.sqrt())
    }

    /// LF = (−ρ∞χ₁ρ_g − f/ρ∞, −χ₂ρ_f/ρ∞ − ρ∞g)
    pub fn apply_l(&self, state: &DistributionPair) -> DistributionPair {
        let mut out = self.apply_k(state);
        out.axpy(-1.0, &self.apply_lambda(state));
        out
    }

    /// ΛF = (f/ρ∞, ρ∞g)
    pub fn apply_lambda(&self, state: &DistributionPair) -> DistributionPair {
        let mut out = state.clone();
        out.f.mapv_inplace(|v| v / self.rho_inf);
        out.g.mapv_inplace(|v| v * self.rho_inf);
        out
    }

    /// KF = (−ρ∞χ₁ρ_g, −χ₂ρ_f/ρ∞)
    pub fn apply_k(&self, state: &DistributionPair) -> DistributionPair {
        let rho = density(self.grid(), state);
        let c1 = self.model.chi1.values();
        let c2 = self.model.chi2.values();
        let r = self.rho_inf;
        let mut out = DistributionPair::from_fn(
            self.grid(),
            |i, j| -r * c1[j] * rho.rho_g[i],
            |i, j| -c2[j] * rho.rho_f[i] / r,
        );
        out.time = state.time;
        out
    }

    /// v·∂ₓ per velocity column, spectral in x.
    pub fn apply_t(&self, state: &DistributionPair) -> DistributionPair {
        let mut out = self.x_derivative(state);
        let v = self.grid().velocities();
        for h in [&mut out.f, &mut out.g] {
            for mut row in h.rows_mut() {
                row.iter_mut().zip(v).for_each(|(x, v)| *x *= v);
            }
        }
        out
    }

    /// ΠF = (ρ_f − ρ_g)·e
    pub fn apply_pi(&self, state: &DistributionPair) -> DistributionPair {
        let u = density(self.grid(), state).difference();
        self.embed(&u)
    }

    /// u ↦ u·e
    pub fn embed(&self, u: &[f64]) -> DistributionPair {
        let mut out = DistributionPair::from_fn(self.grid(), |i, j| u[i] * self.e_f[j], |i, j| u[i] * self.e_g[j]);
        out.time = 0.0;
        out
    }

    /// The composition T∘Π.
    pub fn apply_tpi(&self, state: &DistributionPair) -> DistributionPair {
        self.apply_t(&self.apply_pi(state))
    }

    /// (TΠ)*F = −∂ₓ(j_f − j_g)·e
    pub fn apply_tpi_adjoint(&self, state: &DistributionPair) -> DistributionPair {
        self.embed(&self.flux_divergence(state))
    }

    /// −∂ₓ∫v(f − g) dv
    fn flux_divergence(&self, state: &DistributionPair) -> Vec<f64> {
        let j = flux(self.grid(), state);
        let mut out: Vec<f64> = j.flux_f.iter().zip(&j.flux_g).map(|(a, b)| -(a - b)).collect();
        self.grid().spectral().derivative(&mut out);
        out
    }

    /// Solves u − D∂ₓ²u = rhs exactly per discrete frequency.
    pub fn elliptic_solve(&self, rhs: &[f64], diffusivity: f64) -> Vec<f64> {
        let mut out = rhs.to_vec();
        self.grid().spectral().elliptic_solve(&mut out, diffusivity);
        out
    }

    /// A = (1 + (TΠ)*TΠ)⁻¹(TΠ)*. On the Π-range (TΠ)*TΠ acts as u ↦ −D₀∂ₓ²u.
    pub fn apply_a(&self, state: &DistributionPair) -> DistributionPair {
        let w = self.flux_divergence(state);
        self.embed(&self.elliptic_solve(&w, self.d0))
    }

    pub fn modified_entropy(&self, state: &DistributionPair, delta: f64) -> Result<ModifiedEntropy> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be nonnegative (got {delta})")));
        }
        self.check(state)?;
        let norm2 = self.inner_unchecked(state, state);
        let cross = self.inner_unchecked(&self.apply_a(state), state);
        Ok(ModifiedEntropy {
            value: 0.5 * norm2 + delta * cross,
            lower: 0.5 * (1.0 - delta) * norm2,
            upper: 0.5 * (1.0 + delta) * norm2,
        })
    }

    pub fn x_derivative(&self, state: &DistributionPair) -> DistributionPair {
        let spectral = self.grid().spectral();
        let mut out = state.clone();
        let mut column = vec![0.0; self.grid().nx()];
        for h in [&mut out.f, &mut out.g] {
            for mut col in h.columns_mut() {
                column.iter_mut().zip(col.iter()).for_each(|(c, x)| *c = *x);
                spectral.derivative(&mut column);
                col.iter_mut().zip(&column).for_each(|(x, c)| *x = *c);
            }
        }
        out
    }

    /// Centered differences in v, second-order one-sided at the two ends.
    pub fn v_derivative(&self, state: &DistributionPair) -> DistributionPair {
        let dv = self.grid().dv();
        let diff = |h: &Array2<f64>| {
            let n = h.ncols();
            Array2::from_shape_fn(h.dim(), |(i, j)| {
                if j == 0 {
                    (-3.0 * h[[i, 0]] + 4.0 * h[[i, 1]] - h[[i, 2]]) / (2.0 * dv)
                } else if j == n - 1 {
                    (3.0 * h[[i, n - 1]] - 4.0 * h[[i, n - 2]] + h[[i, n - 3]]) / (2.0 * dv)
                } else {
                    (h[[i, j + 1]] - h[[i, j - 1]]) / (2.0 * dv)
                }
            })
        };
        let mut out = DistributionPair::new(diff(&state.f), diff(&state.g));
        out.time = state.time;
        out
    }

    /// The ℋ¹ functional; δ must lie in [0, 2) for the form to be positive.
    pub fn h1_functional(&self, state: &DistributionPair, delta: f64) -> Result<H1Functional> {
        if !(delta.is_finite() && (0.0..2.0).contains(&delta)) {
            return Err(Error::InvalidArgument(format!(
                "the H1 form is positive only for 0 <= delta < 2 (got {delta})"
            )));
        }
        self.check(state)?;
        let dx = self.x_derivative(state);
        let dv = self.v_derivative(state);
        let h1_squared =
            self.inner_unchecked(state, state) + self.inner_unchecked(&dx, &dx) + self.inner_unchecked(&dv, &dv);
        let mixed = self.inner_unchecked(&dx, &dv);
        Ok(H1Functional {
            value: h1_squared + delta * mixed,
            h1_squared,
            mixed,
        })
    }
}
