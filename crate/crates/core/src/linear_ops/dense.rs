//! Dense matrices of the linear operators and their spectra.
//!
//! Vectors stack the f block then the g block, each x-major. Matrices are
//! assembled column by column from the matrix-free operators, so the two
//! agree by construction up to round-off.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::LinearModel;
use crate::error::{Error, Result};
use crate::phase_space::DistributionPair;

pub const MAX_DENSE_DIM: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorLabel {
    T,
    L,
    Pi,
    Lambda,
    K,
    A,
    TPi,
}

impl OperatorLabel {
    pub const ALL: [OperatorLabel; 7] = [
        OperatorLabel::T,
        OperatorLabel::L,
        OperatorLabel::Pi,
        OperatorLabel::Lambda,
        OperatorLabel::K,
        OperatorLabel::A,
        OperatorLabel::TPi,
    ];

    pub fn apply(&self, lm: &LinearModel, state: &DistributionPair) -> DistributionPair {
        match self {
            OperatorLabel::T => lm.apply_t(state),
            OperatorLabel::L => lm.apply_l(state),
            OperatorLabel::Pi => lm.apply_pi(state),
            OperatorLabel::Lambda => lm.apply_lambda(state),
            OperatorLabel::K => lm.apply_k(state),
            OperatorLabel::A => lm.apply_a(state),
            OperatorLabel::TPi => lm.apply_tpi(state),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub label: OperatorLabel,
    pub matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// max |(WM − MᵀW)_{ab}| / max |WM|: zero for W-self-adjoint M.
    pub fn w_symmetry_defect(&self, weights: &[f64]) -> f64 {
        self.w_defect(weights, 1.0)
    }

    /// Same with WM + MᵀW: zero for W-skew-adjoint M.
    pub fn w_skew_defect(&self, weights: &[f64]) -> f64 {
        self.w_defect(weights, -1.0)
    }

    fn w_defect(&self, weights: &[f64], sign: f64) -> f64 {
        let n = self.dim();
        let m = &self.matrix;
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let wm = weights[a] * m[(a, b)];
                defect = defect.max((wm - sign * m[(b, a)] * weights[b]).abs());
                scale = scale.max(wm.abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }
}

/// Diagonal of the Gram matrix W of the weighted inner product.
pub fn weight_diagonal(lm: &LinearModel) -> Vec<f64> {
    let grid = lm.grid();
    let w = grid.weights();
    let dx = grid.dx();
    let f = (0..grid.nx()).flat_map(|_| (0..grid.nv()).map(|j| dx * w[j] * lm.weight_f(j)));
    let g = (0..grid.nx()).flat_map(|_| (0..grid.nv()).map(|j| dx * w[j] * lm.weight_g(j)));
    f.collect::<Vec<_>>().into_iter().chain(g).collect()
}

fn dense_dim(lm: &LinearModel) -> Result<usize> {
    let dim = 2 * lm.grid().nx() * lm.grid().nv();
    if dim > MAX_DENSE_DIM {
        return Err(Error::DenseTooLarge { dim });
    }
    Ok(dim)
}

pub fn assemble_dense(lm: &LinearModel, label: OperatorLabel) -> Result<DenseOperator> {
    let dim = dense_dim(lm)?;
    let mut matrix = DMatrix::zeros(dim, dim);
    let mut unit = vec![0.0; dim];
    for col in 0..dim {
        unit[col] = 1.0;
        let image = label.apply(lm, &DistributionPair::from_vector(lm.grid(), &unit)).to_vector();
        matrix.set_column(col, &DVector::from_vec(image));
        unit[col] = 0.0;
    }
    Ok(DenseOperator { label, matrix })
}

/// Eigenvalues of the generator L − T.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorSpectrum {
    /// (real, imaginary) pairs sorted by decreasing real part.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Number of eigenvalues with modulus below `zero_tolerance`.
    pub zero_modes: usize,
    pub zero_tolerance: f64,
    pub max_real: f64,
    /// −max Re λ over the eigenvalues that are not zero modes.
    pub spectral_gap: f64,
}

/// Spectrum of L − T. Both operators commute with translations by a grid
/// node, so the discrete Fourier transform in x block-diagonalizes the dense
/// generator into one 2nv×2nv block L_v − iξV per wavenumber ξ; the union
/// of the block spectra is the spectrum of the full matrix.
pub fn generator_spectrum(lm: &LinearModel) -> Result<GeneratorSpectrum> {
    dense_dim(lm)?;
    let grid = lm.grid();
    let nv = grid.nv();
    let local = velocity_collision_matrix(lm);
    let v = grid.velocities();
    let mut eigenvalues: Vec<(f64, f64)> = Vec::with_capacity(2 * nv * grid.nx());
    for &xi in grid.spectral().wavenumbers() {
        let block = DMatrix::from_fn(2 * nv, 2 * nv, |a, b| {
            let transport = if a == b { xi * v[a % nv] } else { 0.0 };
            Complex64::new(local[(a, b)], -transport)
        });
        eigenvalues.extend(block_eigenvalues(block)?.into_iter());
    }
    eigenvalues.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    let zero_tolerance = 1e-8;
    let is_zero = |z: &(f64, f64)| z.0.hypot(z.1) < zero_tolerance;
    let zero_modes = eigenvalues.iter().filter(|z| is_zero(z)).count();
    let max_real = eigenvalues.first().map(|z| z.0).unwrap_or(f64::NAN);
    let spectral_gap = -eigenvalues
        .iter()
        .filter(|z| !is_zero(z))
        .map(|z| z.0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GeneratorSpectrum {
        eigenvalues,
        zero_modes,
        zero_tolerance,
        max_real,
        spectral_gap,
    })
}

/// L restricted to x-independent states, as a 2nv×2nv matrix.
fn velocity_collision_matrix(lm: &LinearModel) -> DMatrix<f64> {
    let grid = lm.grid();
    let nv = grid.nv();
    let mut out = DMatrix::zeros(2 * nv, 2 * nv);
    for col in 0..2 * nv {
        let unit = DistributionPair::from_fn(
            grid,
            |_, j| if col == j { 1.0 } else { 0.0 },
            |_, j| if col == nv + j { 1.0 } else { 0.0 },
        );
        let image = lm.apply_l(&unit);
        for j in 0..nv {
            out[(j, col)] = image.f[[0, j]];
            out[(nv + j, col)] = image.g[[0, j]];
        }
    }
    out
}

fn block_eigenvalues(block: DMatrix<Complex64>) -> Result<Vec<(f64, f64)>> {
    let n = block.nrows();
    for eps in [1e-15, 1e-14, 1e-13, 1e-12] {
        if let Some(schur) = Schur::try_new(block.clone(), eps, 2000 * n) {
            let (_, t) = schur.unpack();
            return Ok((0..n).map(|a| (t[(a, a)].re, t[(a, a)].im)).collect());
        }
    }
    Err(Error::Eigen(format!("Schur decomposition of a {n}x{n} Fourier block")))
}

/// Eigenvalues of the assembled dense generator, without the Fourier
/// reduction. Cubic in 2·nx·nv; meant for cross-checks on small grids.
pub fn dense_generator_eigenvalues(lm: &LinearModel) -> Result<Vec<(f64, f64)>> {
    let l = assemble_dense(lm, OperatorLabel::L)?;
    let t = assemble_dense(lm, OperatorLabel::T)?;
    let generator = &l.matrix - &t.matrix;
    let dim = generator.nrows();
    for eps in [1e-14, 1e-13, 1e-12] {
        if let Some(schur) = Schur::try_new(generator.clone(), eps, 1000 * dim) {
            let mut out: Vec<(f64, f64)> = schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
            out.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
            return Ok(out);
        }
    }
    Err(Error::Eigen(format!("Schur decomposition of the {dim}x{dim} generator")))
}

/// Macroscopic coercivity from the generalized eigenproblem
/// (TΠB)ᵀW(TΠB) y = λ BᵀWB y on the Π-range basis B = {δ_{x_i}·e}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroCoercivity {
    /// Smallest eigenvalue above the zero modes.
    pub lambda_m: f64,
    /// 4π²D₀, the Poincaré value.
    pub poincare: f64,
    /// Eigenvalues below 1e-9·max: the constant mode, plus the
    /// alternating mode that the discrete derivative annihilates.
    pub zero_modes: usize,
}

pub fn macroscopic_coercivity(lm: &LinearModel) -> Result<MacroCoercivity> {
    let dim = dense_dim(lm)?;
    let nx = lm.grid().nx();
    let tpi = assemble_dense(lm, OperatorLabel::TPi)?;
    let weights = weight_diagonal(lm);
    let mut basis = DMatrix::zeros(dim, nx);
    let mut delta = vec![0.0; nx];
    for i in 0..nx {
        delta[i] = 1.0;
        basis.set_column(i, &DVector::from_vec(lm.embed(&delta).to_vector()));
        delta[i] = 0.0;
    }
    let image = &tpi.matrix * &basis;
    let gram = |m: &DMatrix<f64>| {
        let mut weighted = m.clone();
        for (a, w) in weights.iter().enumerate() {
            weighted.row_mut(a).scale_mut(*w);
        }
        m.transpose() * weighted
    };
    let stiff = gram(&image);
    let mass = gram(&basis);
    let scale: Vec<f64> = (0..nx).map(|i| 1.0 / mass[(i, i)].sqrt()).collect();
    let reduced = DMatrix::from_fn(nx, nx, |a, b| scale[a] * stiff[(a, b)] * scale[b]);
    let reduced = 0.5 * (&reduced + reduced.transpose());
    let eig = SymmetricEigen::new(reduced);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let zero_modes = eig.eigenvalues.iter().filter(|l| l.abs() <= 1e-9 * max).count();
    let lambda_m = eig
        .eigenvalues
        .iter()
        .cloned()
        .filter(|l| l.abs() > 1e-9 * max)
        .fold(f64::INFINITY, f64::min);
    Ok(MacroCoercivity {
        lambda_m,
        poincare: 4.0 * PI * PI * lm.d0(),
        zero_modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_ops::{SampleOptions, Sampler};
    use crate::phase_space::Model;

    fn lm(rho: f64, nx: usize, nv: usize) -> LinearModel {
        LinearModel::new(Model::gaussian_default(nx, nv, 7.0).unwrap(), rho).unwrap()
    }

    #[test]
    fn dense_action_matches_matrix_free() {
        let lm = lm(1.5, 8, 8);
        let sampler = Sampler::new(17, SampleOptions::default());
        for label in OperatorLabel::ALL {
            let dense = assemble_dense(&lm, label).unwrap();
            for k in 0..20 {
                let s = sampler.sample(&lm, k);
                let direct = label.apply(&lm, &s).to_vector();
                let via = dense.apply(&s.to_vector());
                let err = direct.iter().zip(&via).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(err < 1e-10, "{label:?}: {err}");
            }
        }
    }

    #[test]
    fn structure_identities() {
        let lm = lm(0.7, 8, 8);
        let w = weight_diagonal(&lm);
        let l = assemble_dense(&lm, OperatorLabel::L).unwrap();
        let t = assemble_dense(&lm, OperatorLabel::T).unwrap();
        let pi = assemble_dense(&lm, OperatorLabel::Pi).unwrap();
        assert!(l.w_symmetry_defect(&w) < 1e-12);
        assert!(t.w_skew_defect(&w) < 1e-12);
        assert!(pi.w_symmetry_defect(&w) < 1e-12);
        assert!((&pi.matrix * &pi.matrix - &pi.matrix).amax() < 1e-12);
        assert!((&pi.matrix * &t.matrix * &pi.matrix).amax() < 1e-10);
    }

    #[test]
    fn size_guard() {
        let lm = lm(1.0, 64, 65);
        assert!(matches!(
            assemble_dense(&lm, OperatorLabel::L),
            Err(Error::DenseTooLarge { dim: 8320 })
        ));
    }

    #[test]
    fn macroscopic_coercivity_is_poincare() {
        for rho in [0.5, 1.0, 2.0] {
            let lm = lm(rho, 16, 12);
            let mc = macroscopic_coercivity(&lm).unwrap();
            assert_eq!(mc.zero_modes, 2);
            assert!((mc.lambda_m / mc.poincare - 1.0).abs() < 1e-10, "{mc:?}");
        }
    }

    #[test]
    fn generator_has_no_growing_modes() {
        for rho in [0.5, 1.0, 2.0] {
            let lm = lm(rho, 16, 16);
            let spectrum = generator_spectrum(&lm).unwrap();
            assert_eq!(spectrum.eigenvalues.len(), 512);
            assert_eq!(spectrum.zero_modes, 2);
            assert!(spectrum.max_real < 1e-10);
            assert!(spectrum.spectral_gap > 0.0);
        }
    }

    #[test]
    fn fourier_blocks_reproduce_dense_spectrum() {
        let lm = lm(1.3, 8, 6);
        let blocks = generator_spectrum(&lm).unwrap().eigenvalues;
        let dense = dense_generator_eigenvalues(&lm).unwrap();
        assert_eq!(blocks.len(), dense.len());
        // every dense eigenvalue has a block eigenvalue nearby
        for z in &dense {
            let nearest = blocks
                .iter()
                .map(|b| (b.0 - z.0).hypot(b.1 - z.1))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-8, "{z:?} {nearest}");
        }
    }
}
