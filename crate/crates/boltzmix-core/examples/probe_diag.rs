//! Decompose the worst diagonal entry of the assembled operator.

use boltzmix_core::grid::{SphereQuadrature, VelocityGrid};
use boltzmix_core::kernel::KernelSpec;
use boltzmix_core::linear::engine::{CollisionEngine, InterpOrder};
use boltzmix_core::field::DistributionField;
use boltzmix_core::mixture::SpeciesSet;

fn main() {
    let s = SpeciesSet::new(vec![1.0, 2.0], vec![1.0, 0.8]).unwrap();
    let k = KernelSpec::hard_spheres(2);
    let g = VelocityGrid::new(4.8, 6).unwrap();
    let q = SphereQuadrature::product(4, 4).unwrap();
    let engine = CollisionEngine::new(&s, &k, &g, &q, InterpOrder::Quadratic).unwrap();
    // apply to the indicator of the worst node in h coordinates:
    // diag = <e, M e>
    let target_species = 1usize;
    let target_node = 184usize;
    let mut f = DistributionField::homogeneous(2, g.len());
    // h = 1 at the node means f = sqrt(mu)
    let mu = s.maxwellian_at(target_species, g.node(target_node));
    f.set(target_species, 0, target_node, mu.sqrt());
    let d = engine.form_value(&f, &f, false);
    println!("quadratic form value (diag) = {d:.4e}, mu = {mu:.3e}");
    let d_cross = engine.form_value(&f, &f, true);
    println!("cross-pairs-only part      = {d_cross:.4e}");
}
