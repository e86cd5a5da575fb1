//! Phase-space grid, reaction profiles, distributions and their moments.
//!
//! The spatial domain is the periodic unit interval sampled at `nx` uniform
//! nodes. Velocities live on a symmetric uniform grid over `[-vmax, vmax]`
//! with trapezoid weights. Profiles are renormalized on this grid so that
//! the discrete moment identities (unit mass, zero flux) hold to round-off.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::diagnostics::least_squares;
use crate::error::{Error, Result};
use crate::macro_solver::rho_of_m;
use crate::spectral::Spectral;

/// Largest admissible fraction of profile mass lost to velocity truncation.
pub const TAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PhaseGrid {
    nx: usize,
    nv: usize,
    vmax: f64,
    dx: f64,
    dv: f64,
    velocities: Vec<f64>,
    weights: Vec<f64>,
    spectral: Spectral,
}

impl PhaseGrid {
    pub fn new(nx: usize, nv: usize, vmax: f64) -> Result<Self> {
        if nx < 4 || nv < 4 {
            return Err(Error::InvalidGrid(format!(
                "nx and nv must be at least 4 (got nx = {nx}, nv = {nv})"
            )));
        }
        if nx % 2 != 0 {
            return Err(Error::InvalidGrid("nx must be even".into()));
        }
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(Error::InvalidGrid(format!("vmax must be positive (got {vmax})")));
        }
        let dv = 2.0 * vmax / (nv - 1) as f64;
        // v_j = -v_{nv-1-j} exactly
        let velocities: Vec<f64> = (0..nv)
            .map(|j| {
                let k = j as f64 - (nv - 1) as f64 / 2.0;
                k * dv
            })
            .collect();
        let mut weights = vec![dv; nv];
        weights[0] = 0.5 * dv;
        weights[nv - 1] = 0.5 * dv;
        Ok(Self {
            nx,
            nv,
            vmax,
            dx: 1.0 / nx as f64,
            dv,
            velocities,
            weights,
            spectral: Spectral::new(nx),
        })
    }

    /// Spatial dimension. Only the one-dimensional torus is implemented.
    pub fn dim(&self) -> usize {
        1
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    pub fn vmax(&self) -> f64 {
        self.vmax
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dv(&self) -> f64 {
        self.dv
    }
    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.nv)
    }
    /// Volume of the spatial torus.
    pub fn volume(&self) -> f64 {
        1.0
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| i as f64 * self.dx).collect()
    }

    /// ∫ h dv by the grid quadrature.
    pub fn integrate_v(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        values.into_iter().zip(&self.weights).map(|(h, w)| h * w).sum()
    }
}

/// Shape of a reaction profile before renormalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileKind {
    Gaussian { sigma: f64 },
    /// χ ∝ (1 + v²)^(-exponent).
    PowerTail { exponent: f64 },
    /// Raw samples, one per velocity node.
    CustomSamples { values: Vec<f64> },
}

impl ProfileKind {
    fn sample(&self, grid: &PhaseGrid) -> Result<Vec<f64>> {
        match self {
            ProfileKind::Gaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::InvalidProfile(format!("sigma must be positive (got {sigma})")));
                }
                Ok(grid
                    .velocities()
                    .iter()
                    .map(|v| (-0.5 * (v / sigma).powi(2)).exp())
                    .collect())
            }
            ProfileKind::PowerTail { exponent } => {
                if !(exponent.is_finite() && *exponent > 1.5) {
                    return Err(Error::InvalidProfile(format!(
                        "power-tail exponent must exceed 1.5 for a finite second moment (got {exponent})"
                    )));
                }
                Ok(grid
                    .velocities()
                    .iter()
                    .map(|v| (1.0 + v * v).powf(-exponent))
                    .collect())
            }
            ProfileKind::CustomSamples { values } => {
                if values.len() != grid.nv() {
                    return Err(Error::InvalidProfile(format!(
                        "custom profile has {} samples, grid has {} velocity nodes",
                        values.len(),
                        grid.nv()
                    )));
                }
                Ok(values.clone())
            }
        }
    }

    /// Fraction of the untruncated profile mass lying outside `[-vmax, vmax]`.
    ///
    /// Custom samples carry no information beyond the grid, so their estimate is
    /// the mass fraction carried by the two boundary cells.
    pub fn tail_fraction(&self, grid: &PhaseGrid, samples: &[f64]) -> f64 {
        let vmax = grid.vmax();
        match self {
            ProfileKind::Gaussian { sigma } => erfc(vmax / (sigma * std::f64::consts::SQRT_2)),
            ProfileKind::PowerTail { exponent } => {
                // v = tan φ turns ∫(1+v²)^{-k} dv into ∫cos^{2k-2} φ dφ on a finite interval
                let p = 2.0 * exponent - 2.0;
                let integrand = |phi: f64| phi.cos().max(0.0).powf(p);
                let tail = simpson(integrand, vmax.atan(), std::f64::consts::FRAC_PI_2, 4096);
                let total = simpson(integrand, 0.0, std::f64::consts::FRAC_PI_2, 4096);
                tail / total
            }
            ProfileKind::CustomSamples { .. } => {
                let n = samples.len();
                let w = grid.weights();
                let total: f64 = samples.iter().zip(w).map(|(s, w)| s * w).sum();
                (samples[0] * w[0] + samples[n - 1] * w[n - 1]) / total
            }
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let coeff = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += coeff * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// A reaction profile χ sampled on the velocity grid, with cached moments.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    values: Vec<f64>,
    mass: f64,
    mean_flux: f64,
    diffusion: f64,
}

impl VelocityProfile {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// ∫χ dv
    pub fn mass(&self) -> f64 {
        self.mass
    }
    /// ∫vχ dv
    pub fn mean_flux(&self) -> f64 {
        self.mean_flux
    }
    /// ∫v²χ dv
    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }
}

/// Samples, symmetrizes and normalizes a profile on the velocity grid.
pub fn build_profile(kind: &ProfileKind, grid: &PhaseGrid) -> Result<VelocityProfile> {
    let raw = kind.sample(grid)?;
    if let Some((index, &value)) = raw
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::NonPositiveProfile { index, value });
    }
    let tail_mass = kind.tail_fraction(grid, &raw);
    if tail_mass > TAIL_TOLERANCE {
        return Err(Error::TruncatedTail {
            tail_mass,
            vmax: grid.vmax(),
        });
    }
    let nv = raw.len();
    let mut values: Vec<f64> = (0..nv).map(|j| 0.5 * (raw[j] + raw[nv - 1 - j])).collect();
    let mass = grid.integrate_v(values.iter().copied());
    values.iter_mut().for_each(|v| *v /= mass);
    let v = grid.velocities();
    let mass = grid.integrate_v(values.iter().copied());
    let mean_flux = grid.integrate_v(values.iter().zip(v).map(|(c, v)| c * v));
    let diffusion = grid.integrate_v(values.iter().zip(v).map(|(c, v)| c * v * v));
    if diffusion <= 0.0 {
        return Err(Error::InvalidProfile("second moment is not positive".into()));
    }
    Ok(VelocityProfile {
        values,
        mass,
        mean_flux,
        diffusion,
    })
}

/// Grid together with the two reaction profiles χ₁ and χ₂.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: PhaseGrid,
    pub chi1: VelocityProfile,
    pub chi2: VelocityProfile,
}

impl Model {
    pub fn new(grid: PhaseGrid, chi1: &ProfileKind, chi2: &ProfileKind) -> Result<Self> {
        let chi1 = build_profile(chi1, &grid)?;
        let chi2 = build_profile(chi2, &grid)?;
        Ok(Self { grid, chi1, chi2 })
    }

    /// Default model: χ₁ Gaussian with σ = 1, χ₂ Gaussian with σ = 1.3.
    pub fn gaussian_default(nx: usize, nv: usize, vmax: f64) -> Result<Self> {
        Self::new(
            PhaseGrid::new(nx, nv, vmax)?,
            &ProfileKind::Gaussian { sigma: 1.0 },
            &ProfileKind::Gaussian { sigma: 1.3 },
        )
    }

    /// Same profiles on a grid with `nx` spatial nodes.
    pub fn with_nx(&self, nx: usize) -> Result<Self> {
        Ok(Self {
            grid: PhaseGrid::new(nx, self.grid.nv(), self.grid.vmax())?,
            chi1: self.chi1.clone(),
            chi2: self.chi2.clone(),
        })
    }

    /// Local equilibrium (ρ(x)χ₁, χ₂/ρ(x)).
    pub fn local_equilibrium(&self, rho: &[f64]) -> Result<DistributionPair> {
        if rho.len() != self.grid.nx() {
            return Err(Error::InvalidArgument(format!(
                "density has {} nodes, grid has {}",
                rho.len(),
                self.grid.nx()
            )));
        }
        if let Some(r) = rho.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidArgument(format!("local equilibrium density must be positive (got {r})")));
        }
        let (nx, nv) = self.grid.shape();
        let c1 = self.chi1.values();
        let c2 = self.chi2.values();
        let f = Array2::from_shape_fn((nx, nv), |(i, j)| rho[i] * c1[j]);
        let g = Array2::from_shape_fn((nx, nv), |(i, j)| c2[j] / rho[i]);
        Ok(DistributionPair::new(f, g))
    }
}

/// The state (f, g) on the x × v tensor grid; row index is x, column index is v.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionPair {
    pub f: Array2<f64>,
    pub g: Array2<f64>,
    pub time: f64,
    /// Diffusive scaling parameter; 1 for the unscaled system.
    pub eps: f64,
}

impl DistributionPair {
    pub fn new(f: Array2<f64>, g: Array2<f64>) -> Self {
        assert_eq!(f.dim(), g.dim(), "f and g must share the grid");
        Self {
            f,
            g,
            time: 0.0,
            eps: 1.0,
        }
    }

    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self::new(Array2::zeros(grid.shape()), Array2::zeros(grid.shape()))
    }

    pub fn from_fn(
        grid: &PhaseGrid,
        f: impl Fn(usize, usize) -> f64,
        g: impl Fn(usize, usize) -> f64,
    ) -> Self {
        Self::new(
            Array2::from_shape_fn(grid.shape(), |(i, j)| f(i, j)),
            Array2::from_shape_fn(grid.shape(), |(i, j)| g(i, j)),
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        self.f.dim()
    }

    pub fn check_grid(&self, grid: &PhaseGrid) -> Result<()> {
        if self.shape() != grid.shape() {
            return Err(Error::GridMismatch {
                expected: grid.shape(),
                found: self.shape(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().chain(self.g.iter()).all(|v| v.is_finite())
    }

    pub fn min_value(&self) -> f64 {
        self.f.iter().chain(self.g.iter()).copied().fold(f64::INFINITY, f64::min)
    }

    /// self + a·other
    pub fn axpy(&mut self, a: f64, other: &DistributionPair) {
        Zip::from(&mut self.f).and(&other.f).for_each(|s, o| *s += a * o);
        Zip::from(&mut self.g).and(&other.g).for_each(|s, o| *s += a * o);
    }

    pub fn scaled(&self, a: f64) -> DistributionPair {
        let mut out = self.clone();
        out.f.mapv_inplace(|v| a * v);
        out.g.mapv_inplace(|v| a * v);
        out
    }

    pub fn difference(&self, other: &DistributionPair) -> DistributionPair {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Largest absolute entry of either component.
    pub fn max_abs(&self) -> f64 {
        self.f.iter().chain(self.g.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Stacked vector: f block then g block, each x-major.
    pub fn to_vector(&self) -> Vec<f64> {
        self.f.iter().chain(self.g.iter()).copied().collect()
    }

    pub fn from_vector(grid: &PhaseGrid, data: &[f64]) -> Self {
        let n = grid.nx() * grid.nv();
        assert_eq!(data.len(), 2 * n);
        let f = Array2::from_shape_vec(grid.shape(), data[..n].to_vec()).expect("shape");
        let g = Array2::from_shape_vec(grid.shape(), data[n..].to_vec()).expect("shape");
        Self::new(f, g)
    }
}

/// Position densities (ρ_f, ρ_g) per x node.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPair {
    pub rho_f: Vec<f64>,
    pub rho_g: Vec<f64>,
}

impl MacroPair {
    /// ρ_f − ρ_g per node.
    pub fn difference(&self) -> Vec<f64> {
        self.rho_f.iter().zip(&self.rho_g).map(|(a, b)| a - b).collect()
    }
}

/// First velocity moments (∫v f dv, ∫v g dv) per x node.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxPair {
    pub flux_f: Vec<f64>,
    pub flux_g: Vec<f64>,
}

/// Micro parts (f⊥, g⊥) of the micro-macro decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PerpPair {
    pub f_perp: Array2<f64>,
    pub g_perp: Array2<f64>,
}

fn row_moments(h: &Array2<f64>, weight: impl Fn(usize) -> f64) -> Vec<f64> {
    h.rows()
        .into_iter()
        .map(|row| row.iter().enumerate().map(|(j, v)| v * weight(j)).sum())
        .collect()
}

pub fn density(grid: &PhaseGrid, state: &DistributionPair) -> MacroPair {
    let w = grid.weights();
    MacroPair {
        rho_f: row_moments(&state.f, |j| w[j]),
        rho_g: row_moments(&state.g, |j| w[j]),
    }
}

pub fn flux(grid: &PhaseGrid, state: &DistributionPair) -> FluxPair {
    let w = grid.weights();
    let v = grid.velocities();
    FluxPair {
        flux_f: row_moments(&state.f, |j| w[j] * v[j]),
        flux_g: row_moments(&state.g, |j| w[j] * v[j]),
    }
}

/// ∫∫(f − g) dv dx
pub fn mass_difference(grid: &PhaseGrid, state: &DistributionPair) -> f64 {
    let m = density(grid, state);
    grid.dx() * m.difference().iter().sum::<f64>()
}

/// The unique ρ∞ > 0 with volume·(ρ∞ − 1/ρ∞) = mass_difference.
pub fn rho_infinity(mass_difference: f64, volume: f64) -> Result<f64> {
    if !mass_difference.is_finite() || !volume.is_finite() {
        return Err(Error::InvalidArgument("mass difference and volume must be finite".into()));
    }
    if volume <= 0.0 {
        return Err(Error::InvalidArgument(format!("volume must be positive (got {volume})")));
    }
    Ok(rho_of_m(mass_difference / volume))
}

/// Global equilibrium (ρ∞χ₁, χ₂/ρ∞).
pub fn equilibrium(model: &Model, rho_inf: f64) -> Result<DistributionPair> {
    if !(rho_inf.is_finite() && rho_inf > 0.0) {
        return Err(Error::InvalidArgument(format!("rho_inf must be positive (got {rho_inf})")));
    }
    model.local_equilibrium(&vec![rho_inf; model.grid.nx()])
}

/// Splits F into densities and micro parts f⊥ = (f − ρ_fχ₁)/ε, g⊥ = (g − ρ_gχ₂)/ε.
pub fn micro_macro_split(model: &Model, state: &DistributionPair, eps: f64) -> Result<(MacroPair, PerpPair)> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive (got {eps})")));
    }
    state.check_grid(&model.grid)?;
    let macros = density(&model.grid, state);
    let c1 = model.chi1.values();
    let c2 = model.chi2.values();
    let f_perp = Array2::from_shape_fn(state.shape(), |(i, j)| (state.f[[i, j]] - macros.rho_f[i] * c1[j]) / eps);
    let g_perp = Array2::from_shape_fn(state.shape(), |(i, j)| (state.g[[i, j]] - macros.rho_g[i] * c2[j]) / eps);
    Ok((macros, PerpPair { f_perp, g_perp }))
}

/// Inverse of [`micro_macro_split`].
pub fn reconstruct(model: &Model, macros: &MacroPair, perp: &PerpPair, eps: f64) -> DistributionPair {
    let c1 = model.chi1.values();
    let c2 = model.chi2.values();
    let shape = perp.f_perp.dim();
    let f = Array2::from_shape_fn(shape, |(i, j)| macros.rho_f[i] * c1[j] + eps * perp.f_perp[[i, j]]);
    let g = Array2::from_shape_fn(shape, |(i, j)| macros.rho_g[i] * c2[j] + eps * perp.g_perp[[i, j]]);
    DistributionPair::new(f, g)
}

/// Per-x norm ‖h‖_{L²(dv/χ)}.
pub fn weighted_velocity_norms(grid: &PhaseGrid, h: &Array2<f64>, chi: &VelocityProfile) -> Vec<f64> {
    let w = grid.weights();
    let c = chi.values();
    h.rows()
        .into_iter()
        .map(|row| row.iter().enumerate().map(|(j, v)| w[j] * v * v / c[j]).sum::<f64>().sqrt())
        .collect()
}

/// Result of the slab-mass power-law fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaFit {
    pub theta: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub deltas: Vec<f64>,
    /// sup over offsets and directions of the χ-mass of each slab.
    pub slab_masses: Vec<f64>,
}

/// Number of offsets a sampled on [-vmax, vmax] when taking the sup.
pub const THETA_OFFSETS: usize = 200;

/// Fits sup_{a,ω} ∫_{|a+v·ω|<δ} χ dv ≈ C δ^θ in log-log coordinates.
///
/// Slab integrals are exact integrals of the piecewise-linear interpolant of
/// χ, so slabs thinner than the velocity spacing are resolved.
pub fn theta_exponent(profile: &VelocityProfile, grid: &PhaseGrid, deltas: &[f64]) -> Result<ThetaFit> {
    if deltas.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "theta fit needs at least 4 slab widths (got {})",
            deltas.len()
        )));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidArgument("slab widths must be positive".into()));
    }
    let lo = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().copied().fold(0.0, f64::max);
    if (hi / lo).log10() < 1.5 {
        return Err(Error::InvalidArgument(format!(
            "slab widths must span at least 1.5 decades (got {:.2})",
            (hi / lo).log10()
        )));
    }
    let vmax = grid.vmax();
    let offsets: Vec<f64> = (0..THETA_OFFSETS)
        .map(|k| -vmax + 2.0 * vmax * k as f64 / (THETA_OFFSETS - 1) as f64)
        .collect();
    let slab_masses: Vec<f64> = deltas
        .iter()
        .map(|&delta| {
            let mut best = 0.0f64;
            for &a in &offsets {
                for omega in [1.0f64, -1.0] {
                    // |a + vω| < δ  ⇔  v ∈ ω(-a - δ, -a + δ)
                    let (p, q) = (omega * (-a - delta), omega * (-a + delta));
                    best = best.max(interpolant_integral(grid, profile.values(), p.min(q), p.max(q)));
                }
            }
            best
        })
        .collect();
    let xs: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = slab_masses.iter().map(|m| m.ln()).collect();
    let fit = least_squares(&xs, &ys);
    Ok(ThetaFit {
        theta: fit.slope,
        constant: fit.intercept.exp(),
        r_squared: fit.r_squared,
        deltas: deltas.to_vec(),
        slab_masses,
    })
}

/// Exact integral over [lo, hi] of the piecewise-linear interpolant of `values`
/// (zero outside the velocity range).
pub fn interpolant_integral(grid: &PhaseGrid, values: &[f64], lo: f64, hi: f64) -> f64 {
    let v = grid.velocities();
    let nv = v.len();
    let lo = lo.max(v[0]);
    let hi = hi.min(v[nv - 1]);
    if hi <= lo {
        return 0.0;
    }
    let dv = grid.dv();
    let first = (((lo - v[0]) / dv).floor() as usize).min(nv - 2);
    let last = (((hi - v[0]) / dv).floor() as usize).min(nv - 2);
    let mut total = 0.0;
    for cell in first..=last {
        let (a, b) = (v[cell], v[cell + 1]);
        let p = lo.max(a);
        let q = hi.min(b);
        if q <= p {
            continue;
        }
        let at = |t: f64| values[cell] + (values[cell + 1] - values[cell]) * (t - a) / (b - a);
        total += 0.5 * (q - p) * (at(p) + at(q));
    }
    total
}
