use ndarray::Array1;
use num_complex::Complex64;
use qrel::lattice::{PhysicalConstants, PotentialSpec, SpaceGrid, TimeGrid};
use qrel::propagator::*;

fn main() {
    let c = PhysicalConstants::default();

    // 1) one-slice Gaussian spreading: closed form vs direct quadrature vs kernel apply
    let grid = SpaceGrid::new(-10.0, 10.0, 401).unwrap();
    let eps = 0.01;
    let psi0: Array1<Complex64> = Array1::from_iter(
        grid.positions().into_iter().map(|x| free_gaussian_wavepacket(x, 0.0, 0.0, 1.0, 0.0, &c)),
    );
    // direct quadrature of analytic kernel against psi0
    let mut quad = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    for (j, xj) in grid.positions().into_iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, xi) in grid.positions().into_iter().enumerate() {
            acc += analytic_free_kernel(xj, xi, eps, &c).unwrap() * psi0[i] * grid.dx();
        }
        quad[j] = acc;
    }
    let closed: Vec<Complex64> = grid
        .positions()
        .into_iter()
        .map(|x| free_gaussian_wavepacket(x, eps, 0.0, 1.0, 0.0, &c))
        .collect();
    let k = short_time_kernel(&grid, eps, &PotentialSpec::free(), &c).unwrap();
    let applied = k.apply(&psi0).unwrap();
    let mid = grid.n_points() / 2;
    for j in [mid, mid + 20, mid + 60] {
        println!(
            "x={:+.2} closed={:?} quad={:?} applied={:?}",
            grid.position(j),
            closed[j],
            quad[j],
            applied[j]
        );
    }

    // 2) composed kernel-mode free propagator vs analytic, interior |x|<=6
    let grid2 = SpaceGrid::new(-12.0, 12.0, 241).unwrap();
    for steps in [16usize, 32, 64, 128] {
        let time = TimeGrid::new(0.0, 1.0, steps).unwrap();
        let kk = compose_propagator(&grid2, &time, &PotentialSpec::free(), &c, PropagatorOptions::kernel())
            .unwrap();
        let values = kk.kernel_values();
        let mut worst: f64 = 0.0;
        let mut worst_at = (0usize, 0usize);
        for j in 0..grid2.n_points() {
            if grid2.position(j).abs() > 6.0 {
                continue;
            }
            for i in 0..grid2.n_points() {
                if grid2.position(i).abs() > 6.0 {
                    continue;
                }
                let want = analytic_free_kernel(grid2.position(j), grid2.position(i), 1.0, &c).unwrap();
                let rel = (values[[j, i]] - want).norm() / want.norm();
                if rel > worst {
                    worst = rel;
                    worst_at = (j, i);
                }
            }
        }
        // norm drift for a unit gaussian
        let mut psi: Array1<Complex64> = Array1::from_iter(
            grid2
                .positions()
                .into_iter()
                .map(|x| free_gaussian_wavepacket(x, 0.0, 0.0, 1.0, 0.0, &c)),
        );
        let n0 = state_norm(&psi, &grid2);
        psi = psi.mapv(|v| v / n0);
        let out = kk.apply(&psi).unwrap();
        println!(
            "steps={steps} worst_rel={worst:.4e} at {:?} (x_b={:+.2},x_a={:+.2}) norm_drift={:.3e}",
            worst_at,
            grid2.position(worst_at.0),
            grid2.position(worst_at.1),
            (state_norm(&out, &grid2) - 1.0).abs()
        );
    }

    // 3) kernel vs spectral on gaussian
    let time = TimeGrid::new(0.0, 0.5, 50).unwrap();
    let psi0b: Array1<Complex64> = Array1::from_iter(
        grid2
            .positions()
            .into_iter()
            .map(|x| free_gaussian_wavepacket(x, 0.0, 0.0, 1.0, 0.0, &c)),
    );
    let a = compose_propagator(&grid2, &time, &PotentialSpec::free(), &c, PropagatorOptions::kernel())
        .unwrap()
        .apply(&psi0b)
        .unwrap();
    let b = compose_propagator(&grid2, &time, &PotentialSpec::free(), &c, PropagatorOptions::spectral())
        .unwrap()
        .apply(&psi0b)
        .unwrap();
    let worst = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0f64, f64::max);
    println!("kernel-vs-spectral max diff {worst:.4e}");

    // 4) semigroup quadrature resolution scan
    for (half, n) in [(30.0, 6001usize), (40.0, 16001), (60.0, 48001)] {
        let g = SpaceGrid::new(-half, half, n).unwrap();
        let (t1, t2) = (0.35, 0.25);
        let (xb, xa) = (0.4, -0.3);
        let mut acc = Complex64::new(0.0, 0.0);
        for x in g.positions() {
            acc += analytic_free_kernel(xb, x, t1, &c).unwrap()
                * analytic_free_kernel(x, xa, t2, &c).unwrap()
                * g.dx();
        }
        let want = analytic_free_kernel(xb, xa, t1 + t2, &c).unwrap();
        println!(
            "semigroup half={half} n={n} rel={:.4e}",
            (acc - want).norm() / want.norm()
        );
    }
}
