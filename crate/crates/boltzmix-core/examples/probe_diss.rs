use boltzmix_core::grid::{SphereQuadrature, VelocityGrid};
use boltzmix_core::kernel::KernelSpec;
use boltzmix_core::linear::engine::{CollisionEngine, InterpOrder};
use boltzmix_core::linear::assemble_matrix;
use boltzmix_core::mixture::SpeciesSet;

fn main() {
    let s = SpeciesSet::new(vec![1.0, 2.0], vec![1.0, 0.8]).unwrap();
    let k = KernelSpec::hard_spheres(2);
    let g = VelocityGrid::new(4.8, 6).unwrap();
    let q = SphereQuadrature::product(4, 4).unwrap();
    let engine = CollisionEngine::new(&s, &k, &g, &q, InterpOrder::Quadratic).unwrap();
    let m = assemble_matrix(&engine, 8000).unwrap();
    let mut gersh = 0.0_f64;
    let mut diag_max = 0.0_f64;
    for r in 0..m.n {
        let row = &m.data[r * m.n..(r + 1) * m.n];
        let ssum: f64 = row.iter().map(|x| x.abs()).sum();
        gersh = gersh.max(ssum);
        diag_max = diag_max.max(row[r].abs());
    }
    println!("n = {}, gershgorin = {gersh:.3e}, max diag = {diag_max:.3e}", m.n);
    // locate the worst diagonal
    let mut worst = (0usize, 0.0f64);
    for r in 0..m.n {
        let d = m.data[r * m.n + r].abs();
        if d > worst.1 {
            worst = (r, d);
        }
    }
    let (idx, val) = worst;
    let i_sp = idx / g.len();
    let node = idx % g.len();
    let v = g.node(node);
    println!(
        "worst diag {val:.3e} at species {i_sp}, node {node}, v = ({:.2},{:.2},{:.2}), mu = {:.3e}",
        v[0], v[1], v[2], s.maxwellian_at(i_sp, v)
    );
}
