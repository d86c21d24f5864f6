//! The linearized collision operator `L = -nu + K` around the global
//! Maxwellian: collision frequency, kernel-space projections, the symmetric
//! discrete assembly with its spectral gap, the Carleman kernel form of `K`,
//! and the dissipative-norm diagnostic.

pub mod dissipative;
pub mod engine;
pub mod kernelform;
pub mod sigma;
pub mod spectral;

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::field::DistributionField;
use crate::grid::VelocityGrid;
use crate::kernel::KernelSpec;
use crate::math::{self, Vec3};
use crate::mixture::SpeciesSet;

pub use engine::{CollisionEngine, InterpOrder, SigmaWeight};
pub use spectral::{assemble_matrix, spectral_gap, OperatorMatrix, SpectralReport};

/// Collision frequency `nu_i(v) = sum_j C_ij l_b int |v - v*|^gamma mu_j(v*) dv*`
/// by grid quadrature at an arbitrary velocity.
pub fn nu(
    i: usize,
    v: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    grid: &VelocityGrid,
) -> f64 {
    let w = grid.weight();
    let mut total = 0.0;
    for j in 0..species.len() {
        let l_b = kernel.b_int(i, j);
        let mut s = 0.0;
        for node in grid.nodes() {
            let r = math::norm(math::sub(v, *node));
            s += kernel.phi(i, j, r) * species.maxwellian_at(j, *node);
        }
        total += l_b * s * w;
    }
    total
}

/// Collision frequency sampled at every grid node, per species.
///
/// The kinetic factor depends only on the node displacement, so it is
/// precomputed once over displacement space.
pub fn nu_table(species: &SpeciesSet, kernel: &KernelSpec, grid: &VelocityGrid) -> Vec<Vec<f64>> {
    let n = grid.nodes_per_axis as i64;
    let h = grid.h;
    let w = grid.weight();
    // r^gamma over displacements, indexed by (dx+n-1, dy+n-1, dz+n-1)
    let side = (2 * n - 1) as usize;
    let mut r_gamma = alloc::vec![0.0; side * side * side];
    for dx in -(n - 1)..n {
        for dy in -(n - 1)..n {
            for dz in -(n - 1)..n {
                let r = math::sqrt((dx * dx + dy * dy + dz * dz) as f64) * h;
                let idx = (((dx + n - 1) as usize) * side + ((dy + n - 1) as usize)) * side
                    + (dz + n - 1) as usize;
                r_gamma[idx] = math::powf(r, kernel.gamma);
            }
        }
    }
    let n_nodes = grid.len();
    let mut mu: Vec<Vec<f64>> = Vec::with_capacity(species.len());
    for j in 0..species.len() {
        mu.push(
            grid.nodes()
                .iter()
                .map(|node| species.maxwellian_at(j, *node))
                .collect(),
        );
    }
    let mut out = alloc::vec![alloc::vec![0.0; n_nodes]; species.len()];
    for i in 0..species.len() {
        for j in 0..species.len() {
            let c = kernel.c_phi(i, j) * kernel.b_int(i, j) * w;
            for p in 0..n_nodes {
                let (px, py, pz) = grid.coords_of(p);
                let mut s = 0.0;
                for q in 0..n_nodes {
                    let (qx, qy, qz) = grid.coords_of(q);
                    let idx = ((px as i64 - qx as i64 + n - 1) as usize * side
                        + (py as i64 - qy as i64 + n - 1) as usize)
                        * side
                        + (pz as i64 - qz as i64 + n - 1) as usize;
                    s += r_gamma[idx] * mu[j][q];
                }
                out[i][p] += c * s;
            }
        }
    }
    out
}

/// Fitted bounds `nu0 (1+|v|^gamma) <= nu_i(v) <= nu1 (1+|v|^gamma)` over the
/// grid, per species.
pub fn nu_fit(nu_values: &[Vec<f64>], grid: &VelocityGrid, gamma: f64) -> Vec<(f64, f64)> {
    nu_values
        .iter()
        .map(|row| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0_f64;
            for (p, node) in grid.nodes().iter().enumerate() {
                let base = 1.0 + math::powf(math::norm(*node), gamma);
                let ratio = row[p] / base;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
            (lo, hi)
        })
        .collect()
}

/// Orthonormal bases of the kernel of `L` (dimension `N + 4`) and of the
/// kernel of the mono-species part (dimension `5 N`), in the discrete
/// `mu^{-1/2}`-weighted product.
pub struct ProjectionBasis {
    /// `N + 4` orthonormal fields spanning Ker(L).
    pub fields: Vec<DistributionField>,
    /// `5 N` orthonormal fields spanning Ker of the mono-species part,
    /// grouped per species.
    pub mono_fields: Vec<DistributionField>,
    inv_mu: Vec<Vec<f64>>,
    grid_weight: f64,
}

impl ProjectionBasis {
    pub fn n_kernel(&self) -> usize {
        self.fields.len()
    }

    /// Discrete `< f, g >_{mu^{-1/2}}` restricted to one space cell each.
    pub fn ip_cell(
        &self,
        f: &DistributionField,
        cf: usize,
        g: &DistributionField,
        cg: usize,
    ) -> f64 {
        let mut acc = 0.0;
        for i in 0..f.n_species {
            let fs = f.slice(i, cf);
            let gs = g.slice(i, cg);
            let im = &self.inv_mu[i];
            for k in 0..f.n_nodes {
                acc += fs[k] * gs[k] * im[k];
            }
        }
        acc * self.grid_weight
    }

    /// Gram matrix of the kernel basis (should be the identity).
    pub fn gram(&self) -> Vec<f64> {
        let m = self.fields.len();
        let mut g = alloc::vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                g[a * m + b] = self.ip_cell(&self.fields[a], 0, &self.fields[b], 0);
            }
        }
        g
    }
}

/// Build the projection bases for a species set on a grid.
pub fn projection_basis(
    species: &SpeciesSet,
    grid: &VelocityGrid,
) -> Result<ProjectionBasis, CoreError> {
    let n = species.len();
    let n_nodes = grid.len();
    let mut inv_mu = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|v| species.maxwellian_at(i, *v))
            .collect();
        inv_mu.push(row.iter().map(|&m| 1.0 / m.max(1e-300)).collect::<Vec<f64>>());
        mu.push(row);
    }
    let rho: f64 = species.rho();
    let c_tot: f64 = species.total_density();

    let mut raw: Vec<DistributionField> = Vec::new();
    // species number-density modes
    for k in 0..n {
        let mut f = DistributionField::homogeneous(n, n_nodes);
        let inv = 1.0 / math::sqrt(species.density(k));
        f.slice_mut(k, 0)
            .iter_mut()
            .zip(mu[k].iter())
            .for_each(|(x, m)| *x = m * inv);
        raw.push(f);
    }
    // momentum modes
    for axis in 0..3 {
        let mut f = DistributionField::homogeneous(n, n_nodes);
        let inv = 1.0 / math::sqrt(rho);
        for i in 0..n {
            let mi = species.mass(i);
            let fs = f.slice_mut(i, 0);
            for (p, node) in grid.nodes().iter().enumerate() {
                fs[p] = node[axis] * mi * mu[i][p] * inv;
            }
        }
        raw.push(f);
    }
    // energy mode
    {
        let mut f = DistributionField::homogeneous(n, n_nodes);
        let inv = 1.0 / math::sqrt(c_tot);
        for i in 0..n {
            let mi = species.mass(i);
            let fs = f.slice_mut(i, 0);
            for (p, node) in grid.nodes().iter().enumerate() {
                fs[p] =
                    (math::norm_sq(*node) - 3.0 / mi) / math::sqrt(6.0) * mi * mu[i][p] * inv;
            }
        }
        raw.push(f);
    }

    let basis_ip = |f: &DistributionField, g: &DistributionField| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let fs = f.slice(i, 0);
            let gs = g.slice(i, 0);
            for k in 0..n_nodes {
                acc += fs[k] * gs[k] * inv_mu[i][k];
            }
        }
        acc * grid.weight()
    };

    let fields = gram_schmidt(raw, &basis_ip)?;

    // mono-species kernel: per species, span {mu, v mu, |v|^2 mu}
    let mut mono_raw: Vec<DistributionField> = Vec::new();
    for i in 0..n {
        for mode in 0..5usize {
            let mut f = DistributionField::homogeneous(n, n_nodes);
            let fs = f.slice_mut(i, 0);
            for (p, node) in grid.nodes().iter().enumerate() {
                let factor = match mode {
                    0 => 1.0,
                    1 | 2 | 3 => node[mode - 1],
                    _ => math::norm_sq(*node),
                };
                fs[p] = factor * mu[i][p];
            }
            mono_raw.push(f);
        }
    }
    let mono_fields = gram_schmidt(mono_raw, &basis_ip)?;

    Ok(ProjectionBasis {
        fields,
        mono_fields,
        inv_mu,
        grid_weight: grid.weight(),
    })
}

fn gram_schmidt<F: Fn(&DistributionField, &DistributionField) -> f64>(
    mut raw: Vec<DistributionField>,
    ip: &F,
) -> Result<Vec<DistributionField>, CoreError> {
    // two modified Gram-Schmidt passes for orthogonality at roundoff level
    for _pass in 0..2 {
        for a in 0..raw.len() {
            for b in 0..a {
                let (head, tail) = raw.split_at_mut(a);
                let c = ip(&tail[0], &head[b]);
                tail[0].axpy(-c, &head[b]);
            }
            let norm2 = ip(&raw[a], &raw[a]);
            if !(norm2 > 0.0) {
                return Err(CoreError::ResolutionExceeded("degenerate basis field"));
            }
            let inv = 1.0 / math::sqrt(norm2);
            raw[a].scale(inv);
        }
    }
    Ok(raw)
}

/// Orthogonal projection of `f` onto Ker(L), cell by cell.
pub fn project_pi_l(f: &DistributionField, basis: &ProjectionBasis) -> DistributionField {
    project_onto(f, basis, &basis.fields)
}

/// Orthogonal projection onto the mono-species kernel (per-species modes).
pub fn project_pi_lm(f: &DistributionField, basis: &ProjectionBasis) -> DistributionField {
    project_onto(f, basis, &basis.mono_fields)
}

fn project_onto(
    f: &DistributionField,
    basis: &ProjectionBasis,
    fields: &[DistributionField],
) -> DistributionField {
    let mut out = DistributionField::zeros(f.n_species, f.n_cells, f.n_nodes);
    for c in 0..f.n_cells {
        for phi in fields {
            let coef = basis.ip_cell(f, c, phi, 0);
            for i in 0..f.n_species {
                let os = out.slice_mut(i, c);
                let ps = phi.slice(i, 0);
                for k in 0..f.n_nodes {
                    os[k] += coef * ps[k];
                }
            }
        }
    }
    out
}

/// `f - pi_L(f)`.
pub fn project_pi_l_perp(f: &DistributionField, basis: &ProjectionBasis) -> DistributionField {
    let mut out = f.clone();
    let p = project_pi_l(f, basis);
    out.axpy(-1.0, &p);
    out
}

/// Coordinates `(a_i, u_i, e_i)` of a field in the mono-species kernel.
#[derive(Clone, Debug)]
pub struct MonoCoordinates {
    pub a: Vec<f64>,
    pub u: Vec<Vec3>,
    pub e: Vec<f64>,
}

/// Extract the per-species kernel coordinates of `f` (which must lie in the
/// mono-species kernel up to `tol`, relative) from its moments, and evaluate
/// the exchange functional `E(f) = sum_{ij} (|u_i - u_j|^2 + (e_i - e_j)^2)`.
pub fn energy_functional_e(
    f: &DistributionField,
    species: &SpeciesSet,
    grid: &VelocityGrid,
    basis: &ProjectionBasis,
    tol: f64,
) -> Result<(f64, MonoCoordinates), CoreError> {
    // membership check
    let pm = project_pi_lm(f, basis);
    let mut residual = f.clone();
    residual.axpy(-1.0, &pm);
    let norm_f = math::sqrt(basis.ip_cell(f, 0, f, 0).max(0.0));
    let norm_r = math::sqrt(basis.ip_cell(&residual, 0, &residual, 0).max(0.0));
    if norm_f > 0.0 && norm_r > tol * norm_f {
        return Err(CoreError::KernelComponent);
    }
    let w = grid.weight();
    let n = species.len();
    let mut a = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    for i in 0..n {
        let fs = f.slice(i, 0);
        let mut s0 = 0.0;
        let mut s1 = [0.0; 3];
        let mut s2 = 0.0;
        for (p, node) in grid.nodes().iter().enumerate() {
            s0 += fs[p];
            s1 = math::axpy(s1, fs[p], *node);
            s2 += fs[p] * math::norm_sq(*node);
        }
        s0 *= w;
        s1 = math::scale(s1, w);
        s2 *= w;
        let ci = species.density(i);
        let mi = species.mass(i);
        // int f_i = c_i (m_i a_i + 3 e_i); int f_i v = c_i u_i;
        // int f_i |v|^2 = c_i (3 a_i + 15 e_i / m_i)
        u.push(math::scale(s1, 1.0 / ci));
        let r0 = s0 / ci;
        let r2 = s2 / ci;
        // solve [m_i 3; 3 15/m_i] [a; e] = [r0; r2]; the determinant is 6
        a.push((15.0 / mi * r0 - 3.0 * r2) / 6.0);
        e.push((mi * r2 - 3.0 * r0) / 6.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let du = math::sub(u[i], u[j]);
            let de = e[i] - e[j];
            total += math::norm_sq(du) + de * de;
        }
    }
    Ok((total, MonoCoordinates { a, u, e }))
}

/// Build a field in the mono-species kernel from coordinates
/// `f_i = m_i mu_i (a_i + u_i . v + e_i |v|^2)`.
pub fn mono_kernel_field(
    coords: &MonoCoordinates,
    species: &SpeciesSet,
    grid: &VelocityGrid,
) -> DistributionField {
    let n = species.len();
    let mut f = DistributionField::homogeneous(n, grid.len());
    for i in 0..n {
        let mi = species.mass(i);
        let fs = f.slice_mut(i, 0);
        for (p, node) in grid.nodes().iter().enumerate() {
            let mu = species.maxwellian_at(i, *node);
            fs[p] = mi
                * mu
                * (coords.a[i]
                    + math::dot(coords.u[i], *node)
                    + coords.e[i] * math::norm_sq(*node));
        }
    }
    f
}

/// Test-function weights `alpha = 10/m` and `alpha_c = 5/m` together with
/// the worst quadrature orthogonality residual of
/// `int (|v|^2 - alpha)((|v|^2 - 3/m)/2) v_k^2 mu dv` and
/// `int (|v|^2 - alpha_c) v_k^2 mu dv` over `k = 1, 2, 3`.
pub fn test_function_weights(
    mass: f64,
    grid: &VelocityGrid,
    tol: f64,
) -> Result<(f64, f64, f64), CoreError> {
    if !(mass > 0.0) {
        return Err(CoreError::NonPositiveParameter("mass"));
    }
    let alpha = 10.0 / mass;
    let alpha_c = 5.0 / mass;
    let pref = math::powf(mass / math::TWO_PI, 1.5);
    let w = grid.weight();
    let mut res = [0.0_f64; 6];
    for node in grid.nodes() {
        let r2 = math::norm_sq(*node);
        let mu = pref * math::exp(-0.5 * mass * r2);
        for k in 0..3 {
            let vk2 = node[k] * node[k];
            res[k] += w * (r2 - alpha) * 0.5 * (r2 - 3.0 / mass) * vk2 * mu;
            res[3 + k] += w * (r2 - alpha_c) * vk2 * mu;
        }
    }
    let max_res = res.iter().fold(0.0_f64, |m, &r| m.max(math::abs(r)));
    if max_res > tol {
        return Err(CoreError::ResolutionExceeded("test-function orthogonality"));
    }
    Ok((alpha, alpha_c, max_res))
}
