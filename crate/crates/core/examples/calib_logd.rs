use detscope_core::determinant::DetEvaluator;
use detscope_core::discretize::build_radial_grid;
use detscope_core::potential::Potential;
use num_complex::Complex64;

fn main() {
    let p = Potential::gaussian_well(2.0, 0.75);
    // reference: large radial grid, corrected
    let g_ref = build_radial_grid(&p, 30, 10, 16).unwrap(); // 4800 nodes
    let ev_ref = DetEvaluator::new(&p, g_ref);
    for (nr, nt, np) in [(12usize, 6usize, 10usize), (16, 6, 10), (16, 8, 12), (20, 8, 12)] {
        let g = build_radial_grid(&p, nr, nt, np).unwrap();
        let n = g.len();
        let ev = DetEvaluator::new(&p, g.clone());
        let mut ev_nocorr = DetEvaluator::new(&p, g);
        ev_nocorr.opts.trace_correction = false;
        println!("grid ({nr},{nt},{np}) n={n}  t_mat={:.2} t_series={:.2}", ev.opts.t_matrix_max, ev.opts.t_series_min);
        for t in [0.0f64, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
            let k = Complex64::new(t, 0.0);
            let m = ev.matrix_log_d(k).unwrap();
            let m0 = ev_nocorr.matrix_log_d(k).unwrap();
            let s = ev.series_log_d(k).unwrap();
            let r = ev_ref.matrix_log_d(k).unwrap();
            println!(
                "  t={t:4.1} |logD|={:.4}  corr-vs-ref={:.2e}  raw-vs-ref={:.2e}  series-vs-ref={:.2e}",
                r.norm(), (m - r).norm(), (m0 - r).norm(), (s - r).norm()
            );
        }
    }
    // imaginary axis too
    let g = build_radial_grid(&p, 16, 6, 10).unwrap();
    let ev = DetEvaluator::new(&p, g);
    println!("imaginary axis (16,6,10):");
    for tau in [0.5f64, 1.0, 2.0, 3.0, 4.0] {
        let k = Complex64::new(0.0, tau);
        let m = ev.matrix_log_d(k).unwrap();
        let s = ev.series_log_d(k).unwrap();
        let r = ev_ref.matrix_log_d(k).unwrap();
        println!("  tau={tau:3.1} |logD|={:.4} corr-vs-ref={:.2e} series-vs-ref={:.2e}", r.norm(), (m-r).norm(), (s-r).norm());
    }
}
