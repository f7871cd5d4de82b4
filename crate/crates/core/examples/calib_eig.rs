use detscope_core::discretize::{assemble_q0_symmetrized, build_grid, build_radial_grid};
use detscope_core::potential::Potential;
use faer::Mat;
use num_complex::Complex64;

fn top_eig(m: &detscope_core::discretize::OperatorMatrix) -> f64 {
    let n = m.size();
    let mut v = Mat::<Complex64>::from_fn(n, 1, |i, _| Complex64::new(1.0 + (i as f64).sin(), 0.0));
    let mut lam = 0.0;
    for _ in 0..400 {
        let w = &m.entries * &v;
        let nn = w.norm_l2();
        v = Mat::from_fn(n, 1, |i, _| w[(i, 0)] / nn);
        let mv = &m.entries * &v;
        let mut num = Complex64::new(0.0, 0.0);
        for i in 0..n { num += v[(i, 0)].conj() * mv[(i, 0)]; }
        if (num.norm() - lam).abs() < 1e-13 * num.norm().max(1e-300) { return num.norm(); }
        lam = num.norm();
    }
    lam
}

fn main() {
    let p = Potential::gaussian_well(2.0, 0.5);
    let k = Complex64::new(0.0, 2.0);
    println!("tensor grids:");
    for res in [8usize, 10, 12, 14, 16] {
        let g = build_grid(&p, res).unwrap();
        let m = assemble_q0_symmetrized(&g, &p, k);
        println!("  res {res:2} n={:5}  top={:.8}", g.len(), top_eig(&m));
    }
    println!("radial grids (nr,6,10):");
    for nr in [8usize, 10, 12, 14, 16, 20, 24] {
        let g = build_radial_grid(&p, nr, 6, 10).unwrap();
        let m = assemble_q0_symmetrized(&g, &p, k);
        println!("  nr {nr:2} n={:5}  top={:.8}", g.len(), top_eig(&m));
    }
    println!("radial grids nr=16 varying angular:");
    for (nt, np) in [(4usize, 8usize), (6, 10), (8, 12), (10, 16)] {
        let g = build_radial_grid(&p, 16, nt, np).unwrap();
        let m = assemble_q0_symmetrized(&g, &p, k);
        println!("  ({nt},{np}) n={:5}  top={:.8}", g.len(), top_eig(&m));
    }
}
