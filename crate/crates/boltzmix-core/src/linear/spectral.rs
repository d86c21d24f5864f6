//! Discrete assembly of the symmetrized linearized operator and spectral-gap
//! estimation.

use alloc::vec::Vec;

use crate::eigen::{symmetric_eigen, symmetric_eigenvalues};
use crate::error::CoreError;
use crate::field::DistributionField;
use crate::math;
use crate::rng::Rng;

use super::engine::CollisionEngine;
use super::ProjectionBasis;

/// Default cap on the dense eigenproblem dimension.
pub const DENSE_CAP: usize = 8000;

/// Relative tolerance below which an eigenvalue counts as part of the
/// discrete kernel.
pub const NEAR_ZERO_REL: f64 = 1e-6;

/// Dense symmetric matrix of the linearized operator acting on
/// `h = f mu^{-1/2}`, in the uniform-weight discrete inner product.
pub struct OperatorMatrix {
    pub n: usize,
    pub n_species: usize,
    pub n_nodes: usize,
    /// Row-major `n x n` operator values.
    pub data: Vec<f64>,
    /// Midpoint weight of the grid the matrix was assembled on.
    pub grid_weight: f64,
    /// `mu_i^{1/2}` per species and node, for converting between `f` and `h`.
    pub sqrt_mu: Vec<Vec<f64>>,
    /// Worst relative asymmetry found at assembly (diagnostic).
    pub asymmetry: f64,
}

impl OperatorMatrix {
    /// `out = M h` (plain matrix-vector product in `h` coordinates).
    pub fn apply_h(&self, h: &[f64], out: &mut [f64]) {
        debug_assert_eq!(h.len(), self.n);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.n..(r + 1) * self.n];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(h.iter()) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    /// Apply the operator to an ordinary field: `out = L f`.
    pub fn apply_field(&self, f: &DistributionField, out: &mut DistributionField) {
        let mut h = alloc::vec![0.0; self.n];
        let mut oh = alloc::vec![0.0; self.n];
        for c in 0..f.n_cells {
            for i in 0..self.n_species {
                let fs = f.slice(i, c);
                for k in 0..self.n_nodes {
                    let sm = self.sqrt_mu[i][k].max(1e-154);
                    h[i * self.n_nodes + k] = fs[k] / sm;
                }
            }
            self.apply_h(&h, &mut oh);
            for i in 0..self.n_species {
                let os = out.slice_mut(i, c);
                for k in 0..self.n_nodes {
                    os[k] = oh[i * self.n_nodes + k] * self.sqrt_mu[i][k];
                }
            }
        }
    }

    /// Convert a homogeneous field to `h` coordinates.
    pub fn to_h(&self, f: &DistributionField) -> Vec<f64> {
        let mut h = alloc::vec![0.0; self.n];
        for i in 0..self.n_species {
            let fs = f.slice(i, 0);
            for k in 0..self.n_nodes {
                let sm = self.sqrt_mu[i][k].max(1e-154);
                h[i * self.n_nodes + k] = fs[k] / sm;
            }
        }
        h
    }


    /// Full eigendecomposition (ascending values, column eigenvectors).
    pub fn eigen(&self) -> (Vec<f64>, Vec<f64>) {
        symmetric_eigen(&self.data, self.n)
    }

    /// Dense matrix exponential `exp(dt M)` built from an eigendecomposition
    /// (exact propagation of the linear semigroup, stable for any `dt`).
    pub fn exponential(&self, dt: f64, eigen: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
        let n = self.n;
        let (vals, vecs) = eigen;
        let mut scaled = alloc::vec![0.0; n * n];
        for c in 0..n {
            let e = math::exp(dt * vals[c]);
            for r in 0..n {
                scaled[r * n + c] = vecs[r * n + c] * e;
            }
        }
        // P = scaled * V^T
        let mut p = alloc::vec![0.0; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = scaled[r * n + k];
                if a == 0.0 {
                    continue;
                }
                let row = &vecs[k..];
                let _ = row;
                for c in 0..n {
                    p[r * n + c] += a * vecs[c * n + k];
                }
            }
        }
        p
    }

    /// Apply a dense propagator (in `h` coordinates) to an ordinary field.
    pub fn apply_propagator(&self, p: &[f64], f: &DistributionField, out: &mut DistributionField) {
        let mut h = alloc::vec![0.0; self.n];
        let mut oh = alloc::vec![0.0; self.n];
        for c in 0..f.n_cells {
            for i in 0..self.n_species {
                let fs = f.slice(i, c);
                for k in 0..self.n_nodes {
                    let sm = self.sqrt_mu[i][k].max(1e-154);
                    h[i * self.n_nodes + k] = fs[k] / sm;
                }
            }
            for (r, o) in oh.iter_mut().enumerate() {
                let row = &p[r * self.n..(r + 1) * self.n];
                let mut acc = 0.0;
                for (a, b) in row.iter().zip(h.iter()) {
                    acc += a * b;
                }
                *o = acc;
            }
            for i in 0..self.n_species {
                let os = out.slice_mut(i, c);
                for k in 0..self.n_nodes {
                    os[k] = oh[i * self.n_nodes + k] * self.sqrt_mu[i][k];
                }
            }
        }
    }

    /// Discrete inner product in `h` coordinates (equals the
    /// `mu^{-1/2}`-weighted product of the corresponding fields).
    pub fn ip_h(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b.iter()) {
            acc += x * y;
        }
        acc * self.grid_weight
    }
}

/// Assemble the dense symmetrized operator.
///
/// Fails when the dimension exceeds `cap` or the assembled matrix is
/// asymmetric beyond `1e-8` relative (which would indicate a quadrature or
/// interpolation bug, since the Dirichlet-form assembly is symmetric by
/// construction).
pub fn assemble_matrix(
    engine: &CollisionEngine<'_>,
    cap: usize,
) -> Result<OperatorMatrix, CoreError> {
    let n_nodes = engine.grid.len();
    let n_species = engine.species.len();
    let n = n_nodes * n_species;
    if n > cap {
        return Err(CoreError::InvalidConfig("dimension exceeds the dense cap"));
    }
    let data = engine.assemble();
    let mut max_abs = 0.0_f64;
    let mut max_asym = 0.0_f64;
    for r in 0..n {
        for c in 0..r {
            let a = data[r * n + c];
            let b = data[c * n + r];
            max_abs = max_abs.max(math::abs(a));
            max_asym = max_asym.max(math::abs(a - b));
        }
        max_abs = max_abs.max(math::abs(data[r * n + r]));
    }
    let asymmetry = if max_abs > 0.0 { max_asym / max_abs } else { 0.0 };
    if asymmetry > 1e-8 {
        return Err(CoreError::AsymmetricAssembly);
    }
    let sqrt_mu: Vec<Vec<f64>> = (0..n_species)
        .map(|i| {
            engine
                .grid
                .nodes()
                .iter()
                .map(|v| math::sqrt(engine.species.maxwellian_at(i, *v)))
                .collect()
        })
        .collect();
    Ok(OperatorMatrix {
        n,
        n_species,
        n_nodes,
        data,
        grid_weight: engine.grid.weight(),
        sqrt_mu,
        asymmetry,
    })
}

/// Structured output of the spectral-gap estimator.
#[derive(Clone, Debug)]
pub struct SpectralReport {
    /// Spectral gap: minus the largest eigenvalue on the orthogonal
    /// complement of the analytic kernel basis.
    pub gap: f64,
    /// Number of eigenvalues within tolerance of zero (should be `N + 4`).
    pub kernel_dim_check: usize,
    /// `(sample index, Dirichlet ratio)` pairs from the coercivity sampling.
    pub dirichlet_samples: Vec<(usize, f64)>,
    /// Fitted weighted-coercivity constant: the infimum of
    /// `-<f, Lf> / |pi^perp f|^2_{<v>^{gamma/2} mu^{-1/2}}` over the samples.
    pub coercivity_lambda: f64,
    /// Fitted collision-frequency bounds `(nu0_i, nu1_i)` per species.
    pub nu_fit: Vec<(f64, f64)>,
    /// Full eigenvalue list, ascending.
    pub eigenvalues: Vec<f64>,
    /// Relative asymmetry of the assembled matrix.
    pub asymmetry: f64,
}

/// Estimate the spectral gap of the assembled operator.
///
/// The discrete kernel is projected out using the analytic basis rather
/// than numerically detected null vectors, so the reported gap is the
/// decay rate of the complement even at coarse resolution.
pub fn spectral_gap(
    matrix: &OperatorMatrix,
    basis: &ProjectionBasis,
    engine: &CollisionEngine<'_>,
    coercivity_samples: usize,
    seed: u64,
) -> Result<SpectralReport, CoreError> {
    let n = matrix.n;
    let eigenvalues = symmetric_eigenvalues(&matrix.data, n);
    let scale = eigenvalues
        .iter()
        .fold(0.0_f64, |m, &l| m.max(math::abs(l)));
    let kernel_dim_check = eigenvalues
        .iter()
        .filter(|&&l| math::abs(l) <= NEAR_ZERO_REL * scale)
        .count();

    // deflate the analytic kernel: M' = (I - Y Y^T) M (I - Y Y^T) with Y the
    // plain-orthonormal kernel vectors in h coordinates
    let n_k = basis.fields.len();
    let mut y: Vec<Vec<f64>> = basis
        .fields
        .iter()
        .map(|phi| matrix.to_h(phi))
        .collect();
    // plain-l2 re-orthonormalization (the fields are orthonormal in the
    // weighted product, which differs only by the constant grid weight)
    for a in 0..n_k {
        for b in 0..a {
            let (head, tail) = y.split_at_mut(a);
            let c: f64 = tail[0].iter().zip(head[b].iter()).map(|(x, z)| x * z).sum();
            for (x, z) in tail[0].iter_mut().zip(head[b].iter()) {
                *x -= c * z;
            }
        }
        let nrm: f64 = math::sqrt(y[a].iter().map(|x| x * x).sum::<f64>());
        for x in y[a].iter_mut() {
            *x /= nrm;
        }
    }
    let mut deflated = matrix.data.clone();
    // M' = P M P computed as M - Y (Y^T M) - (M Y) Y^T + Y (Y^T M Y) Y^T
    let mut my: Vec<Vec<f64>> = Vec::with_capacity(n_k);
    for yk in &y {
        let mut out = alloc::vec![0.0; n];
        matrix.apply_h(yk, &mut out);
        my.push(out);
    }
    let mut ymy = alloc::vec![0.0; n_k * n_k];
    for a in 0..n_k {
        for b in 0..n_k {
            ymy[a * n_k + b] = y[a].iter().zip(my[b].iter()).map(|(x, z)| x * z).sum();
        }
    }
    for r in 0..n {
        for c in 0..n {
            let mut corr = 0.0;
            for a in 0..n_k {
                corr += y[a][r] * my[a][c] + my[a][r] * y[a][c];
                for b in 0..n_k {
                    corr -= y[a][r] * ymy[a * n_k + b] * y[b][c];
                }
            }
            deflated[r * n + c] -= corr;
        }
    }
    let def_eigs = symmetric_eigenvalues(&deflated, n);
    // the deflation introduces exactly n_k zero eigenvalues at the top
    let gap = -def_eigs[n - n_k - 1];

    // weighted coercivity sampling in h coordinates
    let gamma = engine.kernel.gamma;
    let mut rng = Rng::new(seed);
    let mut dirichlet_samples = Vec::with_capacity(coercivity_samples);
    let mut lambda = f64::INFINITY;
    let mut h = alloc::vec![0.0; n];
    let mut mh = alloc::vec![0.0; n];
    let bracket_gamma: Vec<f64> = engine
        .grid
        .nodes()
        .iter()
        .map(|v| math::powf(1.0 + math::norm_sq(*v), 0.5 * gamma))
        .collect();
    for s in 0..coercivity_samples {
        for x in h.iter_mut() {
            *x = rng.normal();
        }
        // project out the kernel
        for yk in &y {
            let c: f64 = h.iter().zip(yk.iter()).map(|(a, b)| a * b).sum();
            for (a, b) in h.iter_mut().zip(yk.iter()) {
                *a -= c * b;
            }
        }
        matrix.apply_h(&h, &mut mh);
        let dirichlet = -matrix.ip_h(&h, &mh);
        let mut weighted = 0.0;
        for i in 0..matrix.n_species {
            for k in 0..matrix.n_nodes {
                let x = h[i * matrix.n_nodes + k] * bracket_gamma[k];
                weighted += x * x;
            }
        }
        weighted *= matrix.grid_weight;
        if weighted > 0.0 {
            let ratio = dirichlet / weighted;
            lambda = lambda.min(ratio);
            dirichlet_samples.push((s, ratio));
        }
    }

    let nu_values = super::nu_table(engine.species, engine.kernel, engine.grid);
    let nu_fit = super::nu_fit(&nu_values, engine.grid, gamma);

    Ok(SpectralReport {
        gap,
        kernel_dim_check,
        dirichlet_samples,
        coercivity_lambda: lambda,
        nu_fit,
        eigenvalues,
        asymmetry: matrix.asymmetry,
    })
}
