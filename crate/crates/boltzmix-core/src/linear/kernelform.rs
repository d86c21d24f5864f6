//! Carleman (kernel) representation of the compact part `K`.
//!
//! `K_i(f)(v) = sum_j int k^(i)_j(v, v*) f_j(v*) dv*` where each kernel value
//! is the sum of three terms: a surface integral over the admissible set of
//! the partner gain (a sphere for unequal masses, a hyperplane through `v`
//! otherwise), a surface integral over the hyperplane through `V_E` for the
//! same-species gain (only for `j = i`, summed over collision partners), and
//! the local loss `-Phi_ij(|v - v*|) l_b mu_i(v)`.
//!
//! The change of variables from `(v*, sigma)` to the surface parametrization
//! carries the exact Jacobian prefactor `((m_i+m_j)/m_j)^2` for both surface
//! types; the identity `|v - V(u, v*)| = |u - v*|` holds on the admissible
//! sets and fixes the kernel arguments.

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::grid::{gauss_legendre, SphereQuadrature, VelocityGrid};
use crate::kernel::KernelSpec;
use crate::math::{self, Vec3};
use crate::mixture::SpeciesSet;

/// Quadrature parameters for the Carleman surface integrals.
#[derive(Clone, Debug)]
pub struct CarlemanQuad {
    /// Radial Gauss-Legendre points for hyperplane integrals.
    pub radial_nodes: usize,
    /// Azimuthal points for hyperplane integrals.
    pub azimuth_nodes: usize,
    /// Polar x azimuth product rule for sphere integrals.
    pub sphere_polar: usize,
    pub sphere_azimuth: usize,
    /// Radial cut of the hyperplane integral, in units of `1/sqrt(m)` of the
    /// Gaussian living on the plane.
    pub radial_extent: f64,
    /// Near-diagonal exclusion band as a fraction of the grid spacing.
    pub band_fraction: f64,
}

impl Default for CarlemanQuad {
    fn default() -> Self {
        CarlemanQuad {
            radial_nodes: 48,
            azimuth_nodes: 32,
            sphere_polar: 48,
            sphere_azimuth: 48,
            radial_extent: 13.0,
            band_fraction: 0.5,
        }
    }
}

/// Cached quadrature rules for repeated kernel evaluations.
pub struct CarlemanWorkspace {
    pub quad: CarlemanQuad,
    sphere: SphereQuadrature,
    radial: (Vec<f64>, Vec<f64>),
}

impl CarlemanWorkspace {
    pub fn new(quad: CarlemanQuad) -> Self {
        let sphere = SphereQuadrature::product(quad.sphere_polar, quad.sphere_azimuth)
            .expect("sphere rule");
        let radial = gauss_legendre(quad.radial_nodes);
        CarlemanWorkspace {
            quad,
            sphere,
            radial,
        }
    }
}

/// Evaluate `k^(i)_j(v, v*)`.
///
/// Fails with [`CoreError::SingularBand`] when `|v - v*|` is below the
/// configured fraction of the grid spacing (the kernel carries a
/// `|v-v*|^{gamma-2}` factor there).
pub fn kernel_k(
    i: usize,
    j: usize,
    v: Vec3,
    v_star: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    grid: &VelocityGrid,
    ws: &CarlemanWorkspace,
) -> Result<f64, CoreError> {
    let r = math::norm(math::sub(v, v_star));
    if r < ws.quad.band_fraction * grid.h {
        return Err(CoreError::SingularBand);
    }
    let mut value = partner_gain_term(i, j, v, v_star, species, kernel, ws);
    if i == j {
        for l in 0..species.len() {
            value += hyperplane_gain_term(i, l, v, v_star, species, kernel, ws);
        }
    }
    value -= kernel.phi(i, j, r) * kernel.b_int(i, j) * species.maxwellian_at(i, v);
    Ok(value)
}

/// Gain term hitting `f_j(v*)`: integral of `mu_i` over the admissible set
/// of pre-collision partner velocities (sphere for `m_i != m_j`, hyperplane
/// through `v` otherwise).
fn partner_gain_term(
    i: usize,
    j: usize,
    v: Vec3,
    v_star: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    ws: &CarlemanWorkspace,
) -> f64 {
    let mi = species.mass(i);
    let mj = species.mass(j);
    let pref = ((mi + mj) / mj) * ((mi + mj) / mj);
    let r = math::norm(math::sub(v, v_star));
    let integrand = |w: Vec3| -> f64 {
        // sigma = (w - v*)/|w - v*|; relative velocity v - V(w, v*)
        let q = math::sub(w, v_star);
        let q_norm = math::norm(q);
        if q_norm == 0.0 {
            return 0.0;
        }
        let u_rel = math::sub(v, math::axpy(v_star, mi / mj, math::sub(w, v)));
        let u_norm = math::norm(u_rel);
        if u_norm == 0.0 {
            return 0.0;
        }
        let cos_t = (math::dot(u_rel, q) / (u_norm * q_norm)).clamp(-1.0, 1.0);
        kernel.eval(i, j, q_norm, cos_t) / q_norm * species.maxwellian_at(i, w)
    };
    if mi == mj {
        // hyperplane through v with normal v - v*
        let normal = math::unit(math::sub(v, v_star), 1e-300).unwrap();
        pref / r * plane_integral_through(v, normal, mi, ws, &integrand)
    } else {
        // sphere around (m_i v - m_j v*)/(m_i - m_j); align the rule's polar
        // axis with the center direction so the Maxwellian factor (which is
        // exactly axisymmetric about it) is resolved by the polar nodes
        let inv = 1.0 / (mi - mj);
        let center = math::sub(math::scale(v, mi * inv), math::scale(v_star, mj * inv));
        let radius = mj / math::abs(mi - mj) * r;
        let e3 = math::unit(center, 1e-14).unwrap_or([0.0, 0.0, 1.0]);
        let (e1, e2) = math::orthonormal_complement(e3);
        let mut acc = 0.0;
        for (node, w_s) in ws.sphere.nodes.iter().zip(ws.sphere.weights.iter()) {
            let dir = math::axpy(
                math::axpy(math::scale(e3, node[2]), node[0], e1),
                node[1],
                e2,
            );
            let w_pt = math::axpy(center, radius, dir);
            acc += w_s * integrand(w_pt);
        }
        pref / r * radius * radius * acc
    }
}

/// Gain term hitting `f_i(v*)` through collisions with species `l`: integral
/// of `mu_l` over the hyperplane through `V_E(v, v*)` orthogonal to `v - v*`.
fn hyperplane_gain_term(
    i: usize,
    l: usize,
    v: Vec3,
    v_star: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    ws: &CarlemanWorkspace,
) -> f64 {
    let mi = species.mass(i);
    let ml = species.mass(l);
    let pref = ((mi + ml) / ml) * ((mi + ml) / ml);
    let r = math::norm(math::sub(v, v_star));
    let normal = math::unit(math::sub(v, v_star), 1e-300).unwrap();
    let a = (mi + ml) / (2.0 * ml);
    let b = (mi - ml) / (2.0 * ml);
    let origin = math::sub(math::scale(v, a), math::scale(v_star, b));
    let integrand = |w: Vec3| -> f64 {
        // sigma = (v* - w)/|v* - w|; relative velocity v - V(v*, w)
        let q = math::sub(v_star, w);
        let q_norm = math::norm(q);
        if q_norm == 0.0 {
            return 0.0;
        }
        let u_rel = math::sub(v, math::axpy(w, mi / ml, math::sub(v_star, v)));
        let u_norm = math::norm(u_rel);
        if u_norm == 0.0 {
            return 0.0;
        }
        let cos_t = (math::dot(u_rel, q) / (u_norm * q_norm)).clamp(-1.0, 1.0);
        kernel.eval(i, l, q_norm, cos_t) / q_norm * species.maxwellian_at(l, w)
    };
    pref / r * plane_integral_through(origin, normal, ml, ws, &integrand)
}


/// Polar quadrature of `g` over the plane through `point` with unit normal
/// `normal`, centered at the point of the plane closest to the origin (where
/// the Gaussian weight of mass `mass` peaks).
fn plane_integral_through<F: Fn(Vec3) -> f64>(
    point: Vec3,
    normal: Vec3,
    mass: f64,
    ws: &CarlemanWorkspace,
    g: &F,
) -> f64 {
    // closest point of the plane to the origin
    let d = math::dot(point, normal);
    let w0 = math::scale(normal, d);
    let (e1, e2) = math::orthonormal_complement(normal);
    let rho_max = ws.quad.radial_extent / math::sqrt(mass);
    let (gl_x, gl_w) = (&ws.radial.0, &ws.radial.1);
    let dphi = math::TWO_PI / ws.quad.azimuth_nodes as f64;
    let mut acc = 0.0;
    for (x, wx) in gl_x.iter().zip(gl_w.iter()) {
        let rho = 0.5 * (x + 1.0) * rho_max;
        let w_r = wx * 0.5 * rho_max * rho;
        for a in 0..ws.quad.azimuth_nodes {
            let phi = (a as f64 + 0.5) * dphi;
            let w_pt = math::axpy(
                math::axpy(w0, rho * math::cos(phi), e1),
                rho * math::sin(phi),
                e2,
            );
            acc += w_r * dphi * g(w_pt);
        }
    }
    acc
}

/// Evaluate the full kernel row `k^(i)_j(v, v_q)` for all species `j` and
/// grid nodes `v_q` outside the singular band; band entries are zero.
pub fn kernel_row(
    i: usize,
    v: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    grid: &VelocityGrid,
    ws: &CarlemanWorkspace,
) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(species.len());
    for j in 0..species.len() {
        let mut row = alloc::vec![0.0; grid.len()];
        for (q, node) in grid.nodes().iter().enumerate() {
            match kernel_k(i, j, v, *node, species, kernel, grid, ws) {
                Ok(val) => row[q] = val,
                Err(CoreError::SingularBand) => row[q] = 0.0,
                Err(_) => row[q] = 0.0,
            }
        }
        rows.push(row);
    }
    rows
}

/// Apply the kernel form to nodal data: `sum_j sum_q k^(i)_j(v, v_q) f_j(q) w`.
pub fn kernel_apply_row(rows: &[Vec<f64>], f: &crate::field::DistributionField, grid: &VelocityGrid) -> f64 {
    let w = grid.weight();
    let mut acc = 0.0;
    for (j, row) in rows.iter().enumerate() {
        let fs = f.slice(j, 0);
        for (q, k) in row.iter().enumerate() {
            acc += k * fs[q];
        }
    }
    acc * w
}

/// Term-level access for diagnostics: the partner-gain surface integral.
pub fn partner_gain_term_public(
    i: usize,
    j: usize,
    v: Vec3,
    v_star: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    ws: &CarlemanWorkspace,
) -> f64 {
    partner_gain_term(i, j, v, v_star, species, kernel, ws)
}

/// Term-level access for diagnostics: the hyperplane-gain surface integral.
pub fn hyperplane_gain_term_public(
    i: usize,
    l: usize,
    v: Vec3,
    v_star: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    ws: &CarlemanWorkspace,
) -> f64 {
    hyperplane_gain_term(i, l, v, v_star, species, kernel, ws)
}
