use ndarray::Array1;
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

fn main() {
    let c = PhysicalConstants::default();
    let pot = PotentialSpec::free();

    println!("== joint refinement, stable ratio pi*eps/dx = const, T=1, interior |x|<=6 ==");
    for (n, steps) in [(241usize, 1usize), (481, 2), (961, 4), (1921, 8)] {
        let g = SpaceGrid::new(-12.0, 12.0, n).unwrap();
        let time = TimeGrid::new(0.0, 1.0, steps).unwrap();
        let kk = compose_propagator(&g, &time, &pot, &c, PropagatorOptions::kernel()).unwrap();
        println!(
            "n={n:5} steps={steps:2} eps={:.4} pi*eps/dx={:.1} err={:.4e}",
            time.eps(),
            std::f64::consts::PI * time.eps() / g.dx(),
            interior_error(&kk, &g, 1.0, 6.0)
        );
    }

    println!("== gaussian state, kernel(stable) vs spectral vs analytic, T=1 ==");
    let g = SpaceGrid::new(-12.0, 12.0, 241).unwrap();
    let psi0: Array1<Complex64> = Array1::from_iter(
        g.positions().into_iter().map(|x| free_gaussian_wavepacket(x, 0.0, 0.0, 1.0, 0.0, &c)),
    );
    let want: Array1<Complex64> = Array1::from_iter(
        g.positions().into_iter().map(|x| free_gaussian_wavepacket(x, 1.0, 0.0, 1.0, 0.0, &c)),
    );
    for steps in [1usize, 2] {
        let time = TimeGrid::new(0.0, 1.0, steps).unwrap();
        let kk = compose_propagator(&g, &time, &pot, &c, PropagatorOptions::kernel()).unwrap();
        let got = kk.apply(&psi0).unwrap();
        let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0f64, f64::max);
        println!("kernel steps={steps} state maxerr vs analytic {err:.4e}");
    }
    let time = TimeGrid::new(0.0, 1.0, 64).unwrap();
    let ksp = compose_propagator(&g, &time, &pot, &c, PropagatorOptions::spectral()).unwrap();
    let got = ksp.apply(&psi0).unwrap();
    let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0f64, f64::max);
    println!("spectral state maxerr vs analytic {err:.4e}");
    // kernel 2-step vs spectral directly
    let t2 = TimeGrid::new(0.0, 1.0, 2).unwrap();
    let kk = compose_propagator(&g, &t2, &pot, &c, PropagatorOptions::kernel()).unwrap();
    let a = kk.apply(&psi0).unwrap();
    let b = ksp.apply(&psi0).unwrap();
    let err = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0f64, f64::max);
    println!("kernel(2) vs spectral(64) state max diff {err:.4e}");

    println!("== one-slice gaussian with resolved grid ==");
    let g4 = SpaceGrid::new(-10.0, 10.0, 4001).unwrap();
    let eps = 0.01;
    let k = short_time_kernel(&g4, eps, &pot, &c).unwrap();
    let psi: Array1<Complex64> = Array1::from_iter(
        g4.positions().into_iter().map(|x| free_gaussian_wavepacket(x, 0.0, 0.0, 1.0, 0.0, &c)),
    );
    let got = k.apply(&psi).unwrap();
    let wantv: Vec<Complex64> = g4
        .positions()
        .into_iter()
        .map(|x| free_gaussian_wavepacket(x, eps, 0.0, 1.0, 0.0, &c))
        .collect();
    let peak = wantv.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let mut worst = 0.0f64;
    for (gv, wv) in got.iter().zip(wantv.iter()) {
        if wv.norm() > 1e-3 * peak {
            worst = worst.max((gv - wv).norm() / wv.norm());
        }
    }
    println!("one-slice resolved rel err {worst:.4e}");

    println!("== closed-form gaussian vs fine quadrature of analytic kernel, t=0.3 ==");
    let gq = SpaceGrid::new(-30.0, 30.0, 12001).unwrap();
    let mut worst = 0.0f64;
    for &x in &[-2.0, -0.5, 0.0, 1.0, 2.5] {
        let mut acc = Complex64::new(0.0, 0.0);
        for y in gq.positions() {
            acc += analytic_free_kernel(x, y, 0.3, &c).unwrap()
                * free_gaussian_wavepacket(y, 0.0, 0.3, 1.0, 0.8, &c)
                * gq.dx();
        }
        let cf = free_gaussian_wavepacket(x, 0.3, 0.3, 1.0, 0.8, &c);
        worst = worst.max((acc - cf).norm() / cf.norm());
    }
    println!("closed form vs quadrature worst rel {worst:.4e}");
}
