//! Velocity-space and angular quadrature.
//!
//! The velocity grid is a uniform Cartesian midpoint rule on the cube
//! `[-R, R]^3`; the sphere rule is a product of Gauss-Legendre in `cos(theta)`
//! and a uniform rule in azimuth.

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math::{self, Vec3};

/// Truncated Cartesian velocity grid with midpoint weights.
#[derive(Clone, Debug)]
pub struct VelocityGrid {
    pub extent: f64,
    pub nodes_per_axis: usize,
    /// Cell width `2*extent / nodes_per_axis`.
    pub h: f64,
    nodes: Vec<Vec3>,
}

impl VelocityGrid {
    pub fn new(extent: f64, nodes_per_axis: usize) -> Result<Self, CoreError> {
        if extent <= 0.0 {
            return Err(CoreError::NonPositiveParameter("grid extent"));
        }
        if nodes_per_axis == 0 {
            return Err(CoreError::NonPositiveParameter("nodes per axis"));
        }
        let h = 2.0 * extent / nodes_per_axis as f64;
        let axis: Vec<f64> = (0..nodes_per_axis)
            .map(|k| -extent + (k as f64 + 0.5) * h)
            .collect();
        let mut nodes = Vec::with_capacity(nodes_per_axis.pow(3));
        for &x in &axis {
            for &y in &axis {
                for &z in &axis {
                    nodes.push([x, y, z]);
                }
            }
        }
        Ok(VelocityGrid {
            extent,
            nodes_per_axis,
            h,
            nodes,
        })
    }

    /// Default grid for a mixture: extent `8 / sqrt(min m_i)` so the widest
    /// Maxwellian tail is negligible, 24 nodes per axis.
    pub fn default_for(min_mass: f64) -> Result<Self, CoreError> {
        if min_mass <= 0.0 {
            return Err(CoreError::NonPositiveParameter("mass"));
        }
        VelocityGrid::new(8.0 / math::sqrt(min_mass), 24)
    }

    #[inline(always)]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline(always)]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline(always)]
    pub fn node(&self, idx: usize) -> Vec3 {
        self.nodes[idx]
    }

    #[inline(always)]
    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    /// Constant midpoint weight per node.
    #[inline(always)]
    pub fn weight(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline(always)]
    pub fn index_of(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.nodes_per_axis + iy) * self.nodes_per_axis + iz
    }

    #[inline(always)]
    pub fn coords_of(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.nodes_per_axis;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Axis coordinate of node index `k`.
    #[inline(always)]
    pub fn axis_coord(&self, k: usize) -> f64 {
        -self.extent + (k as f64 + 0.5) * self.h
    }

    /// Fractional grid position of a point: `p = (v + extent)/h - 0.5` per axis.
    #[inline(always)]
    pub fn fractional(&self, v: Vec3) -> Vec3 {
        [
            (v[0] + self.extent) / self.h - 0.5,
            (v[1] + self.extent) / self.h - 0.5,
            (v[2] + self.extent) / self.h - 0.5,
        ]
    }

    /// Discrete integral of nodewise values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let w = self.weight();
        values.iter().sum::<f64>() * w
    }
}

/// Quadrature rule on the unit sphere.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    /// Product rule: `n_polar` Gauss-Legendre nodes in `cos(theta)` times
    /// `n_azimuth` uniform azimuthal nodes. Weights sum to `4*pi`.
    pub fn product(n_polar: usize, n_azimuth: usize) -> Result<Self, CoreError> {
        if n_polar == 0 || n_azimuth == 0 {
            return Err(CoreError::NonPositiveParameter("sphere rule size"));
        }
        let (gl_nodes, gl_weights) = gauss_legendre(n_polar);
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        let dphi = math::TWO_PI / n_azimuth as f64;
        for (z, wz) in gl_nodes.iter().zip(gl_weights.iter()) {
            let r = math::sqrt((1.0 - z * z).max(0.0));
            for a in 0..n_azimuth {
                // offset keeps the azimuthal set antipodally symmetric for even counts
                let phi = (a as f64 + 0.5) * dphi;
                nodes.push([r * math::cos(phi), r * math::sin(phi), *z]);
                weights.push(wz * dphi);
            }
        }
        Ok(SphereQuadrature { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: FnMut(Vec3) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(n, w)| w * f(*n))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut x = math::cos(math::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if math::abs(dx) < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // midpoint is exactly zero by symmetry
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_and_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
