//! Per-species density values on (space cells x velocity nodes).

use alloc::vec::Vec;

use crate::error::CoreError;

/// Distribution data for `n_species` species on `n_cells` space cells and
/// `n_nodes` velocity nodes, stored contiguously as `[species][cell][node]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField {
    pub n_species: usize,
    pub n_cells: usize,
    pub n_nodes: usize,
    data: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(n_species: usize, n_cells: usize, n_nodes: usize) -> Self {
        DistributionField {
            n_species,
            n_cells,
            n_nodes,
            data: alloc::vec![0.0; n_species * n_cells * n_nodes],
        }
    }

    /// Space-homogeneous field (one cell).
    pub fn homogeneous(n_species: usize, n_nodes: usize) -> Self {
        Self::zeros(n_species, 1, n_nodes)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_species == other.n_species
            && self.n_cells == other.n_cells
            && self.n_nodes == other.n_nodes
    }

    pub fn check_shape(&self, other: &Self, what: &'static str) -> Result<(), CoreError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(CoreError::ShapeMismatch(what))
        }
    }

    #[inline(always)]
    fn offset(&self, species: usize, cell: usize) -> usize {
        (species * self.n_cells + cell) * self.n_nodes
    }

    #[inline(always)]
    pub fn slice(&self, species: usize, cell: usize) -> &[f64] {
        let o = self.offset(species, cell);
        &self.data[o..o + self.n_nodes]
    }

    #[inline(always)]
    pub fn slice_mut(&mut self, species: usize, cell: usize) -> &mut [f64] {
        let o = self.offset(species, cell);
        &mut self.data[o..o + self.n_nodes]
    }

    #[inline(always)]
    pub fn get(&self, species: usize, cell: usize, node: usize) -> f64 {
        self.data[self.offset(species, cell) + node]
    }

    #[inline(always)]
    pub fn set(&mut self, species: usize, cell: usize, node: usize, value: f64) {
        let o = self.offset(species, cell);
        self.data[o + node] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill_from<F: FnMut(usize, usize, usize) -> f64>(&mut self, mut f: F) {
        for s in 0..self.n_species {
            for c in 0..self.n_cells {
                let o = self.offset(s, c);
                for n in 0..self.n_nodes {
                    self.data[o + n] = f(s, c, n);
                }
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x += a * y;
        }
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_roundtrip() {
        let mut f = DistributionField::zeros(2, 3, 4);
        f.set(1, 2, 3, 7.5);
        assert_eq!(f.get(1, 2, 3), 7.5);
        assert_eq!(f.slice(1, 2)[3], 7.5);
        f.fill_from(|s, c, n| (s * 100 + c * 10 + n) as f64);
        assert_eq!(f.get(1, 0, 2), 102.0);
    }

    #[test]
    fn axpy_and_min() {
        let mut a = DistributionField::homogeneous(1, 3);
        let mut b = DistributionField::homogeneous(1, 3);
        a.slice_mut(0, 0).copy_from_slice(&[1.0, 2.0, 3.0]);
        b.slice_mut(0, 0).copy_from_slice(&[1.0, -1.0, 0.5]);
        a.axpy(2.0, &b);
        assert_eq!(a.slice(0, 0), &[3.0, 0.0, 4.0]);
        assert_eq!(a.min_value(), 0.0);
    }
}
