use num_complex::Complex64;
use qrel::lattice::{PhysicalConstants, PotentialSpec, SpaceGrid, TimeGrid};
use qrel::propagator::*;

fn interior_error(k: &PropagatorMatrix, grid: &SpaceGrid, t: f64, half: f64) -> f64 {
    let c = PhysicalConstants::default();
    let values = k.kernel_values();
    let mut worst: f64 = 0.0;
    for j in 0..grid.n_points() {
        if grid.position(j).abs() > half {
            continue;
        }
        for i in 0..grid.n_points() {
            if grid.position(i).abs() > half {
                continue;
            }
            let want = analytic_free_kernel(grid.position(j), grid.position(i), t, &c).unwrap();
            worst = worst.max((values[[j, i]] - want).norm() / want.norm());
        }
    }
    worst
}

fn op_gain(m: &ndarray::Array2<Complex64>) -> f64 {
    // crude power iteration on M†M
    let n = m.nrows();
    let mh = m.t().mapv(|v| v.conj());
    let mut v: ndarray::Array1<Complex64> =
        ndarray::Array1::from_iter((0..n).map(|i| Complex64::new(1.0 + (i as f64 * 0.7).sin(), 0.3 * (i as f64).cos())));
    let mut lam = 0.0f64;
    for _ in 0..60 {
        let w = mh.dot(&m.dot(&v));
        lam = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let nrm = lam.sqrt();
        v = w.mapv(|x| x / nrm);
        let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v = v.mapv(|x| x / nv);
    }
    lam.sqrt()
}

fn main() {
    let c = PhysicalConstants::default();
    let grid = SpaceGrid::new(-12.0, 12.0, 241).unwrap();
    let pot = PotentialSpec::free();

    println!("== spectral mode (V=0), kernel_values vs analytic, interior |x|<=6 ==");
    let time = TimeGrid::new(0.0, 1.0, 64).unwrap();
    let ksp = compose_propagator(&grid, &time, &pot, &c, PropagatorOptions::spectral()).unwrap();
    println!("spectral err: {:.4e}", interior_error(&ksp, &grid, 1.0, 6.0));

    println!("== kernel mode, few steps, interior |x|<=6 ==");
    for steps in [1usize, 2, 3, 4, 6, 8, 12, 16] {
        let time = TimeGrid::new(0.0, 1.0, steps).unwrap();
        let kk = compose_propagator(&grid, &time, &pot, &c, PropagatorOptions::kernel()).unwrap();
        println!(
            "steps={steps:3} err={:.4e} slice_op_gain_total={:.3}",
            interior_error(&kk, &grid, 1.0, 6.0),
            op_gain(kk.matrix())
        );
    }

    println!("== one-slice operator gain vs eps (dx=0.1) ==");
    for eps in [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625] {
        let k = short_time_kernel(&grid, eps, &pot, &c).unwrap();
        println!("eps={eps:.6} gain={:.4}", op_gain(k.matrix()));
    }

    println!("== kernel mode with damping 0.05, 64/128 steps ==");
    for steps in [64usize, 128] {
        let time = TimeGrid::new(0.0, 1.0, steps).unwrap();
        let opts = PropagatorOptions::new(PropagatorMode::Kernel, 0.05).unwrap();
        let kk = compose_propagator(&grid, &time, &pot, &c, opts).unwrap();
        println!("steps={steps} err={:.4e}", interior_error(&kk, &grid, 1.0, 6.0));
    }

    println!("== finer grids, kernel mode 64 steps ==");
    for n in [241usize, 481, 961, 1921] {
        let g = SpaceGrid::new(-12.0, 12.0, n).unwrap();
        let time = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let kk = compose_propagator(&g, &time, &pot, &c, PropagatorOptions::kernel()).unwrap();
        println!("n={n} err={:.4e} gain={:.3}", interior_error(&kk, &g, 1.0, 6.0), op_gain(kk.matrix()));
    }
}
