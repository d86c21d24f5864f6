//! Quadrature engine for the collision operators.
//!
//! All collision integrals share one structure: an outer midpoint sum over
//! the partner velocity `v* = v - u` (`u` runs over lattice displacements),
//! an inner sphere rule over `sigma`, and evaluations at the primed points
//! `v' = v + mu_hat (|u| sigma - u)` and `v'* = v - mu_hat u - (1-mu_hat) |u| sigma`
//! with `mu_hat = m_j/(m_i+m_j)`. For a fixed displacement and sigma node the
//! primed offsets are the same for every base node, so interpolation stencils
//! are precomputed per `(pair, u, sigma)` and swept over the grid.
//!
//! The symmetrized linearized operator is built from the Dirichlet form
//! `<g, L f> = -1/4 sum_{ij} int B mu_i mu_j* A(g) A(f)` with
//! `A(f) = (f_i/mu_i)' + (f_j/mu_j)'* - f_i/mu_i - (f_j/mu_j)*`. Because the
//! quadratic-exact stencil reproduces `a + b.v + c|v|^2` and the primed
//! points satisfy the collision laws exactly, `A` annihilates every
//! collision invariant to machine precision, which pins the discrete kernel
//! of the assembled operator at exactly `N + 4` dimensions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::field::DistributionField;
use crate::grid::{SphereQuadrature, VelocityGrid};
use crate::kernel::KernelSpec;
use crate::math::{self, Vec3};
use crate::mixture::SpeciesSet;
use crate::splitting::TruncationSpec;

/// Interpolation rule for primed-point evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpOrder {
    /// Trilinear: positive weights (used by the positivity scheme).
    Linear,
    /// Ten-point quadratic-exact stencil: reproduces `a + b.v + c|v|^2`.
    Quadratic,
}

/// Sigma-integrand weighting for the truncated splitting.
#[derive(Clone, Copy)]
pub enum SigmaWeight<'a> {
    Full,
    Theta(&'a TruncationSpec),
    OneMinusTheta(&'a TruncationSpec),
}

const MAX_STENCIL: usize = 10;

#[derive(Clone, Copy)]
struct Stencil {
    n: usize,
    /// Axis offsets of each stencil node relative to the base node.
    off: [[i16; 3]; MAX_STENCIL],
    /// Flat index offsets (valid only away from the boundary).
    rel: [isize; MAX_STENCIL],
    w: [f64; MAX_STENCIL],
}

impl Stencil {
    fn empty() -> Self {
        Stencil {
            n: 0,
            off: [[0; 3]; MAX_STENCIL],
            rel: [0; MAX_STENCIL],
            w: [0.0; MAX_STENCIL],
        }
    }
}

/// Build the interpolation stencil for a target point at fractional offset
/// `delta` (in index units) from a base node, with the stencil node block
/// clamped into the box for base coordinates `p` (quadratic exactness is a
/// property of the node pattern, so clamping keeps it; the linear stencil
/// clamps the fraction as well, which turns into nearest-node extension at
/// the boundary and preserves convexity).
fn build_stencil_at(delta: Vec3, order: InterpOrder, p: [i64; 3], n_axis: i64) -> Stencil {
    let mut st = Stencil::empty();
    match order {
        InterpOrder::Linear => {
            let mut base = [0i64; 3];
            let mut frac = [0.0; 3];
            for a in 0..3 {
                let fl = math::floor(delta[a]) as i64;
                let abs = (p[a] + fl).clamp(0, n_axis - 2);
                base[a] = abs - p[a];
                frac[a] = (delta[a] - base[a] as f64).clamp(0.0, 1.0);
            }
            let mut k = 0;
            for cx in 0..2i64 {
                let wx = if cx == 0 { 1.0 - frac[0] } else { frac[0] };
                for cy in 0..2i64 {
                    let wy = if cy == 0 { 1.0 - frac[1] } else { frac[1] };
                    for cz in 0..2i64 {
                        let wz = if cz == 0 { 1.0 - frac[2] } else { frac[2] };
                        st.off[k] = [
                            (base[0] + cx) as i16,
                            (base[1] + cy) as i16,
                            (base[2] + cz) as i16,
                        ];
                        st.w[k] = wx * wy * wz;
                        k += 1;
                    }
                }
            }
            st.n = 8;
        }
        InterpOrder::Quadratic => {
            let mut center = [0i64; 3];
            let mut t = [0.0; 3];
            let mut s = [1i64; 3];
            for a in 0..3 {
                let c = math::floor(delta[a] + 0.5) as i64;
                let abs = (p[a] + c).clamp(1, n_axis - 2);
                center[a] = abs - p[a];
                t[a] = delta[a] - center[a] as f64;
                s[a] = if t[a] < 0.0 { -1 } else { 1 };
            }
            // node order: center, +/-e1, +/-e2, +/-e3, edges (12, 13, 23)
            let mut offs = [[0i64; 3]; MAX_STENCIL];
            for a in 0..3 {
                offs[1 + 2 * a][a] = 1;
                offs[2 + 2 * a][a] = -1;
            }
            let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
            for (k, &(a, b)) in pairs.iter().enumerate() {
                offs[7 + k][a] = s[a];
                offs[7 + k][b] = s[b];
            }
            let mut w = [0.0; MAX_STENCIL];
            w[0] = 1.0 - (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
            for a in 0..3 {
                w[1 + 2 * a] = 0.5 * (t[a] + t[a] * t[a]);
                w[2 + 2 * a] = 0.5 * (-t[a] + t[a] * t[a]);
            }
            for (k, &(a, b)) in pairs.iter().enumerate() {
                let c = (s[a] as f64) * (s[b] as f64) * t[a] * t[b];
                w[7 + k] = c;
                w[0] += c;
                // subtract from the face nodes in the signed directions
                let fa = if s[a] > 0 { 1 + 2 * a } else { 2 + 2 * a };
                let fb = if s[b] > 0 { 1 + 2 * b } else { 2 + 2 * b };
                w[fa] -= c;
                w[fb] -= c;
            }
            for k in 0..MAX_STENCIL {
                st.off[k] = [
                    (center[0] + offs[k][0]) as i16,
                    (center[1] + offs[k][1]) as i16,
                    (center[2] + offs[k][2]) as i16,
                ];
                st.w[k] = w[k];
            }
            st.n = MAX_STENCIL;
        }
    }
    for k in 0..st.n {
        st.rel[k] = (st.off[k][0] as isize * n_axis as isize + st.off[k][1] as isize)
            * n_axis as isize
            + st.off[k][2] as isize;
    }
    st
}

/// Unclamped stencil shared by all base nodes whose node block stays in the
/// box (a huge virtual axis disables the clamping).
fn build_stencil(delta: Vec3, order: InterpOrder, n_axis: i64) -> Stencil {
    let big = 1 << 20;
    let mut st = build_stencil_at(delta, order, [big / 2; 3], big);
    for k in 0..st.n {
        st.rel[k] = (st.off[k][0] as isize * n_axis as isize + st.off[k][1] as isize)
            * n_axis as isize
            + st.off[k][2] as isize;
    }
    st
}

/// Collision quadrature engine bound to one (species, kernel, grid, sphere)
/// configuration.
pub struct CollisionEngine<'a> {
    pub species: &'a SpeciesSet,
    pub kernel: &'a KernelSpec,
    pub grid: &'a VelocityGrid,
    pub sphere: &'a SphereQuadrature,
    pub interp: InterpOrder,
    /// Relative cutoff on the Maxwellian pair weight below which a `(p, q)`
    /// pair is skipped.
    pub pair_cutoff: f64,
    mu: Vec<Vec<f64>>,
    inv_mu: Vec<Vec<f64>>,
    inv_sqrt_mu: Vec<Vec<f64>>,
    sqrt_mu: Vec<Vec<f64>>,
    mu_peak: Vec<f64>,
    mu_pref: Vec<f64>,
}

impl<'a> CollisionEngine<'a> {
    pub fn new(
        species: &'a SpeciesSet,
        kernel: &'a KernelSpec,
        grid: &'a VelocityGrid,
        sphere: &'a SphereQuadrature,
        interp: InterpOrder,
    ) -> Result<Self, CoreError> {
        if kernel.n_species != species.len() {
            return Err(CoreError::ShapeMismatch("kernel vs species"));
        }
        let n = species.len();
        let mut mu = Vec::with_capacity(n);
        let mut inv_mu = Vec::with_capacity(n);
        let mut inv_sqrt_mu = Vec::with_capacity(n);
        let mut sqrt_mu = Vec::with_capacity(n);
        let mut mu_peak = Vec::with_capacity(n);
        let mut mu_pref = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(grid.len());
            for node in grid.nodes() {
                row.push(species.maxwellian_at(i, *node));
            }
            let inv: Vec<f64> = row.iter().map(|&m| 1.0 / m.max(1e-300)).collect();
            let isq: Vec<f64> = row.iter().map(|&m| 1.0 / math::sqrt(m.max(1e-300))).collect();
            let sq: Vec<f64> = row.iter().map(|&m| math::sqrt(m.max(0.0))).collect();
            mu_peak.push(species.maxwellian_at(i, [0.0; 3]));
            mu_pref.push(species.density(i) * math::powf(species.mass(i) / math::TWO_PI, 1.5));
            mu.push(row);
            inv_mu.push(inv);
            inv_sqrt_mu.push(isq);
            sqrt_mu.push(sq);
        }
        Ok(CollisionEngine {
            species,
            kernel,
            grid,
            sphere,
            interp,
            pair_cutoff: 1e-30,
            mu,
            inv_mu,
            inv_sqrt_mu,
            sqrt_mu,
            mu_peak,
            mu_pref,
        })
    }

    #[inline(always)]
    pub fn mu(&self, i: usize, node: usize) -> f64 {
        self.mu[i][node]
    }

    pub fn mu_table(&self) -> &[Vec<f64>] {
        &self.mu
    }

    /// Equilibrium as a homogeneous field.
    pub fn mu_field(&self) -> DistributionField {
        let mut f = DistributionField::homogeneous(self.species.len(), self.grid.len());
        for i in 0..self.species.len() {
            f.slice_mut(i, 0).copy_from_slice(&self.mu[i]);
        }
        f
    }

    fn n_axis(&self) -> i64 {
        self.grid.nodes_per_axis as i64
    }

    /// Iterate one species pair over all displacements and sigma nodes,
    /// calling `body(p, q, w_b, stencil_vp, stencil_vsp, dvp, dvsp, |u|, cos_theta)`
    /// for every valid `(p, q, sigma)` triple with `w_b` the bare quadrature
    /// weight `h^3 w_sigma Phi_ij(|u|) b_ij(cos)`.
    #[inline]
    fn sweep_pair<F>(&self, i: usize, j: usize, interp: InterpOrder, clamp: bool, mut body: F)
    where
        F: FnMut(usize, usize, f64, &Stencil, &Stencil, Vec3, Vec3, f64, f64),
    {
        let n = self.n_axis();
        let h = self.grid.h;
        let mi = self.species.mass(i);
        let mj = self.species.mass(j);
        let mu_hat = mj / (mi + mj);
        let w_cell = self.grid.weight();
        let cut = self.pair_cutoff * self.mu_peak[i] * self.mu_peak[j];
        let mu_i = &self.mu[i];
        let mu_j = &self.mu[j];

        for dx in -(n - 1)..n {
            for dy in -(n - 1)..n {
                for dz in -(n - 1)..n {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let u = [dx as f64 * h, dy as f64 * h, dz as f64 * h];
                    let r = math::norm(u);
                    let u_hat = math::scale(u, 1.0 / r);
                    let phi = self.kernel.phi(i, j, r);
                    if phi == 0.0 {
                        continue;
                    }
                    let d_flat = (dx * n + dy) * n + dz;
                    // per-axis valid p range with q = p - d inside the box
                    let q_lo = [dx.max(0), dy.max(0), dz.max(0)];
                    let q_hi = [n + dx.min(0), n + dy.min(0), n + dz.min(0)];

                    for (sigma, w_s) in self.sphere.nodes.iter().zip(self.sphere.weights.iter())
                    {
                        let cos_t = math::dot(u_hat, *sigma);
                        let b = self.kernel.angular(i, j).eval(cos_t);
                        if b == 0.0 {
                            continue;
                        }
                        let w_b = w_cell * w_s * phi * b;
                        // primed offsets, constant over the grid sweep
                        let dvp = math::scale(math::sub(math::scale(*sigma, r), u), mu_hat);
                        let dvsp = math::axpy(
                            math::scale(u, -mu_hat),
                            -(1.0 - mu_hat) * r,
                            *sigma,
                        );
                        let delta_p = [dvp[0] / h, dvp[1] / h, dvp[2] / h];
                        let delta_sp = [dvsp[0] / h, dvsp[1] / h, dvsp[2] / h];
                        let st_p = build_stencil(delta_p, interp, n);
                        let st_sp = build_stencil(delta_sp, interp, n);
                        // base nodes whose stencils stay in the box share the
                        // precomputed stencils; the remaining shell rebuilds
                        // them per node with boundary clamping
                        let mut lo = q_lo;
                        let mut hi = q_hi;
                        for st in [&st_p, &st_sp] {
                            for k in 0..st.n {
                                for a in 0..3 {
                                    let o = st.off[k][a] as i64;
                                    lo[a] = lo[a].max(-o);
                                    hi[a] = hi[a].min(n - o);
                                }
                            }
                        }
                        let interior =
                            lo[0] < hi[0] && lo[1] < hi[1] && lo[2] < hi[2];
                        if interior {
                            for px in lo[0]..hi[0] {
                                for py in lo[1]..hi[1] {
                                    let row = (px * n + py) * n;
                                    for pz in lo[2]..hi[2] {
                                        let p = (row + pz) as usize;
                                        let q = (row + pz - d_flat) as usize;
                                        if mu_i[p] * mu_j[q] < cut {
                                            continue;
                                        }
                                        body(p, q, w_b, &st_p, &st_sp, dvp, dvsp, r, cos_t);
                                    }
                                }
                            }
                        }
                        for px in q_lo[0]..q_hi[0] {
                            let in_x = interior && px >= lo[0] && px < hi[0];
                            for py in q_lo[1]..q_hi[1] {
                                let in_y = in_x && py >= lo[1] && py < hi[1];
                                let row = (px * n + py) * n;
                                let mut pz = q_lo[2];
                                while pz < q_hi[2] {
                                    if in_y && pz >= lo[2] && pz < hi[2] {
                                        pz = hi[2];
                                        continue;
                                    }
                                    let p = (row + pz) as usize;
                                    let q = (row + pz - d_flat) as usize;
                                    if mu_i[p] * mu_j[q] >= cut {
                                        if clamp {
                                            let pc = [px, py, pz];
                                            let cst_p =
                                                build_stencil_at(delta_p, interp, pc, n);
                                            let cst_sp =
                                                build_stencil_at(delta_sp, interp, pc, n);
                                            body(
                                                p, q, w_b, &cst_p, &cst_sp, dvp, dvsp, r,
                                                cos_t,
                                            );
                                        } else {
                                            body(p, q, w_b, &st_p, &st_sp, dvp, dvsp, r, cos_t);
                                        }
                                    }
                                    pz += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Gather interpolated value of per-species nodal data at the stencil
    /// anchored at node `p`; the sweep guarantees the stencil is in the box.
    #[inline(always)]
    fn gather(&self, data: &[f64], p: usize, st: &Stencil) -> f64 {
        let base = p as isize;
        let mut acc = 0.0;
        for k in 0..st.n {
            acc += st.w[k] * data[(base + st.rel[k]) as usize];
        }
        acc
    }

    /// Gather with zero extension outside the box (for stencils that were
    /// not clamped inward).
    #[inline(always)]
    fn gather_checked(&self, data: &[f64], p: usize, st: &Stencil) -> f64 {
        let n = self.grid.nodes_per_axis as i64;
        let (px, py, pz) = self.grid.coords_of(p);
        let (px, py, pz) = (px as i64, py as i64, pz as i64);
        let mut acc = 0.0;
        for k in 0..st.n {
            let ox = px + st.off[k][0] as i64;
            let oy = py + st.off[k][1] as i64;
            let oz = pz + st.off[k][2] as i64;
            if ox >= 0 && ox < n && oy >= 0 && oy < n && oz >= 0 && oz < n {
                acc += st.w[k] * data[((ox * n + oy) * n + oz) as usize];
            }
        }
        acc
    }

    /// Collect the coefficient list of the Dirichlet functional `A` at one
    /// quadrature triple, in the symmetrized `h = f mu^{-1/2}` coordinates.
    #[inline(always)]
    fn dirichlet_coefficients(
        &self,
        i: usize,
        j: usize,
        p: usize,
        q: usize,
        st_p: &Stencil,
        st_sp: &Stencil,
        idx: &mut [usize; 2 * MAX_STENCIL + 2],
        coef: &mut [f64; 2 * MAX_STENCIL + 2],
    ) -> usize {
        let n_nodes = self.grid.len();
        let mut m = 0;
        for (species, st) in [(i, st_p), (j, st_sp)] {
            let ism = &self.inv_sqrt_mu[species];
            let base = species * n_nodes;
            for k in 0..st.n {
                let node = (p as isize + st.rel[k]) as usize;
                idx[m] = base + node;
                coef[m] = st.w[k] * ism[node];
                m += 1;
            }
        }
        idx[m] = i * n_nodes + p;
        coef[m] = -self.inv_sqrt_mu[i][p];
        m += 1;
        idx[m] = j * n_nodes + q;
        coef[m] = -self.inv_sqrt_mu[j][q];
        m += 1;
        m
    }


    /// Iterate the `(p, q)` pairs whose Maxwellian weight falls below the
    /// cutoff, yielding the sigma-integrated loss factor
    /// `c = 1/4 h^3 Phi_ij(|u|) l_b`. The main sweep skips these pairs
    /// entirely; re-adding their loss-only sub-form (which is symmetric
    /// negative semidefinite on its own) keeps every far-tail diagonal
    /// strictly negative without touching the exact kernel.
    #[inline]
    fn sweep_dropped_pairs<F>(&self, i: usize, j: usize, mut body: F)
    where
        F: FnMut(usize, usize, f64),
    {
        let n = self.n_axis();
        let h = self.grid.h;
        let w_cell = self.grid.weight();
        let cut = self.pair_cutoff * self.mu_peak[i] * self.mu_peak[j];
        let l_b = self.kernel.b_int(i, j);
        let mu_i = &self.mu[i];
        let mu_j = &self.mu[j];
        for dx in -(n - 1)..n {
            for dy in -(n - 1)..n {
                for dz in -(n - 1)..n {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let r = math::sqrt((dx * dx + dy * dy + dz * dz) as f64) * h;
                    let phi = self.kernel.phi(i, j, r);
                    if phi == 0.0 {
                        continue;
                    }
                    let c = 0.25 * w_cell * phi * l_b;
                    let d_flat = (dx * n + dy) * n + dz;
                    let q_lo = [dx.max(0), dy.max(0), dz.max(0)];
                    let q_hi = [n + dx.min(0), n + dy.min(0), n + dz.min(0)];
                    for px in q_lo[0]..q_hi[0] {
                        for py in q_lo[1]..q_hi[1] {
                            let row = (px * n + py) * n;
                            for pz in q_lo[2]..q_hi[2] {
                                let p = (row + pz) as usize;
                                let q = (row + pz - d_flat) as usize;
                                if mu_i[p] * mu_j[q] < cut {
                                    body(p, q, c);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Assemble the dense symmetrized operator matrix acting on `h` in the
    /// discrete `L^2` inner product (row-major, size `N n_nodes`).
    pub fn assemble(&self) -> Vec<f64> {
        let n_nodes = self.grid.len();
        let dim = self.species.len() * n_nodes;
        let mut a = vec![0.0; dim * dim];
        let inv_w = 1.0 / self.grid.weight();
        let mut idx = [0usize; 2 * MAX_STENCIL + 2];
        let mut coef = [0.0; 2 * MAX_STENCIL + 2];
        for i in 0..self.species.len() {
            for j in 0..self.species.len() {
                let mu_i = &self.mu[i];
                let mu_j = &self.mu[j];
                self.sweep_pair(i, j, self.interp, true, |p, q, w_b, st_p, st_sp, _, _, _, _| {
                    let m = self.dirichlet_coefficients(
                        i, j, p, q, st_p, st_sp, &mut idx, &mut coef,
                    );
                    let s = -0.25 * w_b * mu_i[p] * mu_j[q] * inv_w;
                    for r in 0..m {
                        let row = idx[r] * dim;
                        let cr = s * coef[r];
                        for c in 0..m {
                            a[row + idx[c]] += cr * coef[c];
                        }
                    }
                });
                let mu_i = &self.mu[i];
                let mu_j = &self.mu[j];
                let sm_i = &self.sqrt_mu[i];
                let sm_j = &self.sqrt_mu[j];
                self.sweep_dropped_pairs(i, j, |p, q, c| {
                    let gp = i * n_nodes + p;
                    let gq = j * n_nodes + q;
                    let c = c * inv_w;
                    a[gp * dim + gp] -= c * mu_j[q];
                    a[gq * dim + gq] -= c * mu_i[p];
                    let cross = c * sm_i[p] * sm_j[q];
                    a[gp * dim + gq] -= cross;
                    a[gq * dim + gp] -= cross;
                });
            }
        }
        a
    }

    /// Matrix-free application of the symmetrized operator: `out = L f`
    /// (both in ordinary `f` units), homogeneous fields only.
    pub fn apply_linear(&self, f: &DistributionField, out: &mut DistributionField) {
        let n_nodes = self.grid.len();
        let n_sp = self.species.len();
        debug_assert_eq!(f.n_nodes, n_nodes);
        let mut h = vec![0.0; n_sp * n_nodes];
        for i in 0..n_sp {
            let fs = f.slice(i, 0);
            for k in 0..n_nodes {
                h[i * n_nodes + k] = fs[k] * self.inv_sqrt_mu[i][k];
            }
        }
        let mut acc = vec![0.0; n_sp * n_nodes];
        let inv_w = 1.0 / self.grid.weight();
        let mut idx = [0usize; 2 * MAX_STENCIL + 2];
        let mut coef = [0.0; 2 * MAX_STENCIL + 2];
        for i in 0..n_sp {
            for j in 0..n_sp {
                let mu_i = &self.mu[i];
                let mu_j = &self.mu[j];
                self.sweep_pair(i, j, self.interp, true, |p, q, w_b, st_p, st_sp, _, _, _, _| {
                    let m = self.dirichlet_coefficients(
                        i, j, p, q, st_p, st_sp, &mut idx, &mut coef,
                    );
                    let mut a_val = 0.0;
                    for r in 0..m {
                        a_val += coef[r] * h[idx[r]];
                    }
                    let s = -0.25 * w_b * mu_i[p] * mu_j[q] * inv_w * a_val;
                    for r in 0..m {
                        acc[idx[r]] += s * coef[r];
                    }
                });
                let mu_i = &self.mu[i];
                let mu_j = &self.mu[j];
                let sm_i = &self.sqrt_mu[i];
                let sm_j = &self.sqrt_mu[j];
                self.sweep_dropped_pairs(i, j, |p, q, c| {
                    let gp = i * n_nodes + p;
                    let gq = j * n_nodes + q;
                    let c = c * inv_w;
                    let cross = c * sm_i[p] * sm_j[q];
                    acc[gp] -= c * mu_j[q] * h[gp] + cross * h[gq];
                    acc[gq] -= c * mu_i[p] * h[gq] + cross * h[gp];
                });
            }
        }
        for i in 0..n_sp {
            let os = out.slice_mut(i, 0);
            for k in 0..n_nodes {
                os[k] = acc[i * n_nodes + k] * self.sqrt_mu[i][k];
            }
        }
    }

    /// Dirichlet form value `< g, L f >_{mu^{-1/2}}` by direct quadrature;
    /// `cross_only` restricts to the bi-species pairs `i != j`.
    pub fn form_value(&self, g: &DistributionField, f: &DistributionField, cross_only: bool) -> f64 {
        let n_nodes = self.grid.len();
        let n_sp = self.species.len();
        let mut hf = vec![0.0; n_sp * n_nodes];
        let mut hg = vec![0.0; n_sp * n_nodes];
        for i in 0..n_sp {
            let fs = f.slice(i, 0);
            let gs = g.slice(i, 0);
            for k in 0..n_nodes {
                hf[i * n_nodes + k] = fs[k] * self.inv_sqrt_mu[i][k];
                hg[i * n_nodes + k] = gs[k] * self.inv_sqrt_mu[i][k];
            }
        }
        let mut total = 0.0;
        let mut idx = [0usize; 2 * MAX_STENCIL + 2];
        let mut coef = [0.0; 2 * MAX_STENCIL + 2];
        for i in 0..n_sp {
            for j in 0..n_sp {
                if cross_only && i == j {
                    continue;
                }
                let mu_i = &self.mu[i];
                let mu_j = &self.mu[j];
                self.sweep_pair(i, j, self.interp, true, |p, q, w_b, st_p, st_sp, _, _, _, _| {
                    let m = self.dirichlet_coefficients(
                        i, j, p, q, st_p, st_sp, &mut idx, &mut coef,
                    );
                    let mut af = 0.0;
                    let mut ag = 0.0;
                    for r in 0..m {
                        af += coef[r] * hf[idx[r]];
                        ag += coef[r] * hg[idx[r]];
                    }
                    total += -0.25 * w_b * mu_i[p] * mu_j[q] * af * ag;
                });
                let mu_i = &self.mu[i];
                let mu_j = &self.mu[j];
                let sm_i = &self.sqrt_mu[i];
                let sm_j = &self.sqrt_mu[j];
                self.sweep_dropped_pairs(i, j, |p, q, c| {
                    let gp = i * n_nodes + p;
                    let gq = j * n_nodes + q;
                    let cross = c * sm_i[p] * sm_j[q];
                    total -= c * mu_j[q] * hg[gp] * hf[gp]
                        + c * mu_i[p] * hg[gq] * hf[gq]
                        + cross * (hg[gp] * hf[gq] + hg[gq] * hf[gp]);
                });
            }
        }
        total
    }

    /// Sigma-form application of `K` (the gain terms plus the single local
    /// loss) with an optional truncation weight; this is the splitting
    /// operator `A` (with `Theta`), `B` (with `1 - Theta`), or plain `K`.
    ///
    /// Primed Maxwellians are evaluated analytically; `f` is interpolated
    /// directly with zero extension.
    pub fn apply_k_sigma(
        &self,
        f: &DistributionField,
        out: &mut DistributionField,
        weight: SigmaWeight<'_>,
    ) {
        let n_nodes = self.grid.len();
        let n_sp = self.species.len();
        for i in 0..n_sp {
            out.slice_mut(i, 0).fill(0.0);
        }
        // |v| ramp of the truncation, shared across species
        let theta_v: Option<Vec<f64>> = match weight {
            SigmaWeight::Full => None,
            SigmaWeight::Theta(t) | SigmaWeight::OneMinusTheta(t) => Some(
                self.grid
                    .nodes()
                    .iter()
                    .map(|v| t.ramp_speed(math::norm(*v)))
                    .collect(),
            ),
        };
        let nodes = self.grid.nodes();
        for i in 0..n_sp {
            let mi = self.species.mass(i);
            let pref_i = self.mu_pref[i];
            for j in 0..n_sp {
                let mj = self.species.mass(j);
                let pref_j = self.mu_pref[j];
                let f_i = f.slice(i, 0).to_vec();
                let f_j = f.slice(j, 0).to_vec();
                let mut acc = vec![0.0; n_nodes];
                self.sweep_pair(i, j, self.interp, false, |p, q, w_b, st_p, st_sp, dvp, dvsp, r, cos_t| {
                    // truncation factor for this (p, u, sigma)
                    let w_t = match weight {
                        SigmaWeight::Full => 1.0,
                        SigmaWeight::Theta(t) => {
                            t.ramp_separation(r)
                                * t.ramp_angle(cos_t)
                                * theta_v.as_ref().unwrap()[p]
                        }
                        SigmaWeight::OneMinusTheta(t) => {
                            1.0 - t.ramp_separation(r)
                                * t.ramp_angle(cos_t)
                                * theta_v.as_ref().unwrap()[p]
                        }
                    };
                    if w_t == 0.0 {
                        return;
                    }
                    let vp_pt = math::add(nodes[p], dvp);
                    let vsp_pt = math::add(nodes[p], dvsp);
                    // evaluate the larger primed Maxwellian directly and get
                    // the other from mu_i' mu_j'* = mu_i mu_j* (exact)
                    let e_i = 0.5 * mi * math::norm_sq(vp_pt);
                    let e_j = 0.5 * mj * math::norm_sq(vsp_pt);
                    let pair = self.mu[i][p] * self.mu[j][q];
                    let (mu_i_p, mu_j_sp) = if e_i <= e_j {
                        let a = pref_i * math::exp(-e_i);
                        (a, pair / a)
                    } else {
                        let b = pref_j * math::exp(-e_j);
                        (pair / b, b)
                    };
                    let gain = mu_j_sp * self.gather_checked(&f_i, p, st_p)
                        + mu_i_p * self.gather_checked(&f_j, p, st_sp);
                    let loss = self.mu[i][p] * f_j[q];
                    acc[p] += w_b * w_t * (gain - loss);
                });
                let os = out.slice_mut(i, 0);
                for k in 0..n_nodes {
                    os[k] += acc[k];
                }
            }
        }
    }

    /// Nonlinear collision operator `Q(f)` of a perturbation field, in the
    /// equilibrium-ratio form: with `G = f/mu`,
    /// `Q_i(f)(v) = mu_i mu_j* [G_i' G_j'* - G_i G_j*]` integrated over
    /// `(v*, sigma)`. `Q(mu) = 0` holds exactly at the discrete level.
    pub fn apply_q(&self, f: &DistributionField, out: &mut DistributionField) {
        self.apply_q_bilinear_impl(f, None, out);
    }

    /// Symmetrized bilinear operator
    /// `Q~_i(f,g) = 1/2 sum_j [Q_ij(f_i, g_j) + Q_ij(g_i, f_j)]`.
    pub fn apply_q_tilde(
        &self,
        f: &DistributionField,
        g: &DistributionField,
        out: &mut DistributionField,
    ) {
        self.apply_q_bilinear_impl(f, Some(g), out);
    }

    fn apply_q_bilinear_impl(
        &self,
        f: &DistributionField,
        g: Option<&DistributionField>,
        out: &mut DistributionField,
    ) {
        let n_nodes = self.grid.len();
        let n_sp = self.species.len();
        for i in 0..n_sp {
            out.slice_mut(i, 0).fill(0.0);
        }
        let ratio = |field: &DistributionField, i: usize| -> Vec<f64> {
            let fs = field.slice(i, 0);
            fs.iter()
                .zip(self.inv_mu[i].iter())
                .map(|(v, im)| v * im)
                .collect()
        };
        let gf: Vec<Vec<f64>> = (0..n_sp).map(|i| ratio(f, i)).collect();
        let gg: Option<Vec<Vec<f64>>> = g.map(|g| (0..n_sp).map(|i| ratio(g, i)).collect());
        for i in 0..n_sp {
            for j in 0..n_sp {
                let mu_i = &self.mu[i];
                let mu_j = &self.mu[j];
                let mut acc = vec![0.0; n_nodes];
                match &gg {
                    None => {
                        let gi = &gf[i];
                        let gj = &gf[j];
                        self.sweep_pair(i, j, self.interp, true, |p, q, w_b, st_p, st_sp, _, _, _, _| {
                            let w = w_b * mu_i[p] * mu_j[q];
                            let gain = self.gather(gi, p, st_p) * self.gather(gj, p, st_sp);
                            acc[p] += w * (gain - gi[p] * gj[q]);
                        });
                    }
                    Some(gg) => {
                        let fi = &gf[i];
                        let fj = &gf[j];
                        let gi = &gg[i];
                        let gj = &gg[j];
                        self.sweep_pair(i, j, self.interp, true, |p, q, w_b, st_p, st_sp, _, _, _, _| {
                            let w = 0.5 * w_b * mu_i[p] * mu_j[q];
                            let gain = self.gather(fi, p, st_p) * self.gather(gj, p, st_sp)
                                + self.gather(gi, p, st_p) * self.gather(fj, p, st_sp);
                            acc[p] += w * (gain - fi[p] * gj[q] - gi[p] * fj[q]);
                        });
                    }
                }
                let os = out.slice_mut(i, 0);
                for k in 0..n_nodes {
                    os[k] += acc[k];
                }
            }
        }
    }

    /// Gain term and multiplicative loss rate of the full (nonnegative)
    /// distribution `F`, for the exponential gain/loss scheme:
    /// `gain_i = Q2_i(F) >= 0` and `rate_i = q1_i(F)` with
    /// `Q(F) = -rate F + gain`. `ratio` holds `G = F/mu` per species.
    ///
    /// The interpolation is forced trilinear so the gain keeps the sign of
    /// `F`; both sums exclude the zero-displacement cell consistently.
    pub fn gain_and_loss_rate(
        &self,
        ratio: &[Vec<f64>],
        gain: &mut [Vec<f64>],
        rate: &mut [Vec<f64>],
    ) {
        let n_sp = self.species.len();
        let n_nodes = self.grid.len();
        for i in 0..n_sp {
            gain[i].fill(0.0);
            rate[i].fill(0.0);
        }
        for i in 0..n_sp {
            for j in 0..n_sp {
                let mu_i = &self.mu[i];
                let mu_j = &self.mu[j];
                let gi = &ratio[i];
                let gj = &ratio[j];
                let mut acc = vec![0.0; n_nodes];
                self.sweep_pair(i, j, InterpOrder::Linear, true, |p, q, w_b, st_p, st_sp, _, _, _, _| {
                    let w = w_b * mu_i[p] * mu_j[q];
                    acc[p] += w * self.gather(gi, p, st_p) * self.gather(gj, p, st_sp);
                });
                for k in 0..n_nodes {
                    gain[i][k] += acc[k];
                }
                // loss rate: sigma integral reduces to l_b; exclude q = p to
                // mirror the gain sum
                let l_b = self.kernel.b_int(i, j);
                let w_cell = self.grid.weight();
                for p in 0..n_nodes {
                    let vp = self.grid.node(p);
                    let mut s = 0.0;
                    for q in 0..n_nodes {
                        if q == p {
                            continue;
                        }
                        let r = math::norm(math::sub(vp, self.grid.node(q)));
                        s += self.kernel.phi(i, j, r) * mu_j[q] * gj[q];
                    }
                    rate[i][p] += w_cell * l_b * s;
                }
            }
        }
    }
}
