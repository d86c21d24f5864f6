//! Weighted inner products and the discrete norms used by the operator
//! modules.

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::field::DistributionField;
use crate::grid::VelocityGrid;
use crate::math::{self, Vec3};
use crate::mixture::SpeciesSet;

/// Weight function selector for the weighted Lebesgue spaces.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSpec {
    /// `W = 1`.
    One,
    /// `W_i = mu_i^{-1/2}`.
    MaxwellInvSqrt,
    /// `W = <v>^k`.
    AngleBracket { k: f64 },
    /// `W_i = <v>^beta mu_i^{-1/2}`.
    AngleBracketMaxwell { beta: f64 },
    /// `W_i = 1 + m_i^{k/2} |v|^k`, the mass-adapted polynomial weight.
    PolyBar { k: f64 },
    /// `W_i = (1 + m_i^{k/2} |v|^k) nu_i(v)`; requires a collision-frequency
    /// table.
    PolyBarNu { k: f64 },
}

impl WeightSpec {
    /// Evaluate the weight for species `i` at velocity `v`; `nu` supplies the
    /// collision frequency at that node when required.
    #[inline]
    pub fn eval(&self, i: usize, v: Vec3, species: &SpeciesSet, nu: Option<f64>) -> f64 {
        match *self {
            WeightSpec::One => 1.0,
            WeightSpec::MaxwellInvSqrt => {
                1.0 / math::sqrt(species.maxwellian_at(i, v).max(1e-300))
            }
            WeightSpec::AngleBracket { k } => math::powf(1.0 + math::norm_sq(v), 0.5 * k),
            WeightSpec::AngleBracketMaxwell { beta } => {
                math::powf(1.0 + math::norm_sq(v), 0.5 * beta)
                    / math::sqrt(species.maxwellian_at(i, v).max(1e-300))
            }
            WeightSpec::PolyBar { k } => {
                1.0 + math::powf(species.mass(i), 0.5 * k) * math::powf(math::norm(v), k)
            }
            WeightSpec::PolyBarNu { k } => {
                let base =
                    1.0 + math::powf(species.mass(i), 0.5 * k) * math::powf(math::norm(v), k);
                base * nu.expect("PolyBarNu weight needs a collision-frequency table")
            }
        }
    }

    /// Materialize the weight on a grid, one table per species.
    ///
    /// `nu_table` must be given for [`WeightSpec::PolyBarNu`]; it holds
    /// `nu_i(v)` per species per node.
    pub fn table(
        &self,
        species: &SpeciesSet,
        grid: &VelocityGrid,
        nu_table: Option<&[Vec<f64>]>,
    ) -> Result<WeightTable, CoreError> {
        let needs_nu = matches!(self, WeightSpec::PolyBarNu { .. });
        if needs_nu && nu_table.is_none() {
            return Err(CoreError::InvalidConfig(
                "nu-weighted norm requires a collision-frequency table",
            ));
        }
        let mut values = Vec::with_capacity(species.len());
        for i in 0..species.len() {
            let mut row = Vec::with_capacity(grid.len());
            for (k, node) in grid.nodes().iter().enumerate() {
                let nu = nu_table.map(|t| t[i][k]);
                row.push(self.eval(i, *node, species, nu));
            }
            values.push(row);
        }
        Ok(WeightTable { values })
    }
}

/// Per-species, per-node weight values.
#[derive(Clone, Debug)]
pub struct WeightTable {
    values: Vec<Vec<f64>>,
}

impl WeightTable {
    #[inline(always)]
    pub fn get(&self, species: usize, node: usize) -> f64 {
        self.values[species][node]
    }

    pub fn n_species(&self) -> usize {
        self.values.len()
    }
}

/// Norm flavor for [`norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormFlavor {
    /// `L^2_v` (space cells averaged with equal weights inside the square).
    L2V,
    /// `L^1_v L^inf_x`: per velocity node take the max over space cells, then
    /// a weighted velocity sum.
    L1VLinfX,
    /// `L^inf_{x,v}` of `|f| W`.
    LinfXV,
}

/// Discrete `< f, g >_{L^2_v(W)} = sum_i sum_nodes f_i g_i W_i^2 w`.
pub fn inner_product(
    f: &DistributionField,
    g: &DistributionField,
    w: &WeightTable,
    grid: &VelocityGrid,
) -> Result<f64, CoreError> {
    f.check_shape(g, "inner product operands")?;
    if f.n_species != w.n_species() || f.n_nodes != grid.len() {
        return Err(CoreError::ShapeMismatch("field vs weight table/grid"));
    }
    let cell_w = 1.0 / f.n_cells as f64;
    let wq = grid.weight() * cell_w;
    let mut acc = 0.0;
    for i in 0..f.n_species {
        for c in 0..f.n_cells {
            let fs = f.slice(i, c);
            let gs = g.slice(i, c);
            for k in 0..f.n_nodes {
                let wi = w.get(i, k);
                acc += fs[k] * gs[k] * wi * wi;
            }
        }
    }
    Ok(acc * wq)
}

/// Discrete analog of the named weighted norm.
pub fn norm(
    f: &DistributionField,
    w: &WeightTable,
    grid: &VelocityGrid,
    flavor: NormFlavor,
) -> Result<f64, CoreError> {
    if f.n_species != w.n_species() || f.n_nodes != grid.len() {
        return Err(CoreError::ShapeMismatch("field vs weight table/grid"));
    }
    let value = match flavor {
        NormFlavor::L2V => {
            let ip = inner_product(f, f, w, grid)?;
            math::sqrt(ip.max(0.0))
        }
        NormFlavor::L1VLinfX => {
            let wq = grid.weight();
            let mut acc = 0.0;
            for i in 0..f.n_species {
                for k in 0..f.n_nodes {
                    let mut sup = 0.0_f64;
                    for c in 0..f.n_cells {
                        sup = sup.max(math::abs(f.get(i, c, k)));
                    }
                    acc += wq * w.get(i, k) * sup;
                }
            }
            acc
        }
        NormFlavor::LinfXV => {
            let mut sup = 0.0_f64;
            for i in 0..f.n_species {
                for c in 0..f.n_cells {
                    let fs = f.slice(i, c);
                    for k in 0..f.n_nodes {
                        sup = sup.max(math::abs(fs[k]) * w.get(i, k));
                    }
                }
            }
            sup
        }
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{maxwellian, SpeciesSet};
    use alloc::vec;

    #[test]
    fn weight_cancels_maxwellian() {
        // <mu, mu> with weight mu^{-1/2} equals the total number density
        let s = SpeciesSet::new(vec![1.0, 2.0], vec![1.0, 0.5]).unwrap();
        let g = VelocityGrid::default_for(1.0).unwrap();
        let eq = maxwellian(&s, &g).unwrap();
        let wt = WeightSpec::MaxwellInvSqrt.table(&s, &g, None).unwrap();
        let ip = inner_product(&eq.values, &eq.values, &wt, &g).unwrap();
        assert!((ip - 1.5).abs() < 1e-8, "ip = {ip}");
    }

    #[test]
    fn positive_definite() {
        let s = SpeciesSet::new(vec![1.0], vec![1.0]).unwrap();
        let g = VelocityGrid::new(4.0, 6).unwrap();
        let wt = WeightSpec::One.table(&s, &g, None).unwrap();
        let zero = DistributionField::homogeneous(1, g.len());
        assert_eq!(inner_product(&zero, &zero, &wt, &g).unwrap(), 0.0);
        let mut f = zero.clone();
        f.set(0, 0, 3, 1.0);
        assert!(inner_product(&f, &f, &wt, &g).unwrap() > 0.0);
        assert_eq!(norm(&zero, &wt, &g, NormFlavor::L2V).unwrap(), 0.0);
        assert_eq!(norm(&zero, &wt, &g, NormFlavor::L1VLinfX).unwrap(), 0.0);
        assert_eq!(norm(&zero, &wt, &g, NormFlavor::LinfXV).unwrap(), 0.0);
    }

    #[test]
    fn homogeneous_l1v_linfx_is_weighted_l1() {
        let s = SpeciesSet::new(vec![1.0], vec![1.0]).unwrap();
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let wt = WeightSpec::AngleBracket { k: 3.0 }.table(&s, &g, None).unwrap();
        let eq = maxwellian(&s, &g).unwrap();
        let n = norm(&eq.values, &wt, &g, NormFlavor::L1VLinfX).unwrap();
        let mut direct = 0.0;
        for (k, _) in g.nodes().iter().enumerate() {
            direct += g.weight() * wt.get(0, k) * eq.values.get(0, 0, k);
        }
        assert!((n - direct).abs() < 1e-13);
    }

    #[test]
    fn triangle_inequality_on_random_pairs() {
        let s = SpeciesSet::new(vec![1.0, 3.0], vec![1.0, 1.0]).unwrap();
        let g = VelocityGrid::new(4.0, 6).unwrap();
        let wt = WeightSpec::PolyBar { k: 3.0 }.table(&s, &g, None).unwrap();
        let mut rng = crate::rng::Rng::new(9);
        for _ in 0..20 {
            let mut f = DistributionField::homogeneous(2, g.len());
            let mut h = DistributionField::homogeneous(2, g.len());
            f.fill_from(|_, _, _| rng.normal());
            h.fill_from(|_, _, _| rng.normal());
            let mut sum = f.clone();
            sum.axpy(1.0, &h);
            for flavor in [NormFlavor::L2V, NormFlavor::L1VLinfX, NormFlavor::LinfXV] {
                let a = norm(&sum, &wt, &g, flavor).unwrap();
                let b = norm(&f, &wt, &g, flavor).unwrap();
                let c = norm(&h, &wt, &g, flavor).unwrap();
                assert!(a <= b + c + 1e-12, "{flavor:?}: {a} > {b} + {c}");
            }
        }
    }
}
