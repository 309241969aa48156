//! Relational amplitude matrices for a bipartite system + apparatus, and the
//! wavefunctions, reduced density kernels, probabilities, and operator
//! actions derived from them.
//!
//! The joint amplitude is evolved slice by slice; its matrix of endpoint
//! values *is* the relational matrix R at the final time. The system's
//! reduced density kernel is the Gram matrix ρ = R R† dy, and every
//! probability is a diagonal element of the normalized kernel.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::lattice::{PhysicalConstants, PotentialSpec, SpaceGrid, TimeGrid};
use crate::propagator::{fft_wavenumbers, short_time_kernel_with, PropagatorMode, PropagatorOptions};

/// Default memory cap for joint-evolution work arrays (bytes).
pub const DEFAULT_JOINT_MEMORY_CAP: usize = 2 << 30;

/// Tolerance used when validating Hermiticity of density kernels.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Joint amplitude ψ(x, y) of system ⊗ apparatus on the product grid.
#[derive(Debug, Clone)]
pub struct JointState {
    amps: Array2<Complex64>,
    grid_s: SpaceGrid,
    grid_a: SpaceGrid,
    consts: PhysicalConstants,
}

impl JointState {
    pub fn new(
        amps: Array2<Complex64>,
        grid_s: SpaceGrid,
        grid_a: SpaceGrid,
        consts: PhysicalConstants,
    ) -> Result<Self> {
        if amps.nrows() != grid_s.n_points() || amps.ncols() != grid_a.n_points() {
            return Err(Error::Contract(format!(
                "joint amplitude shape {:?} does not match grids ({}, {})",
                amps.dim(),
                grid_s.n_points(),
                grid_a.n_points()
            )));
        }
        if amps.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Contract("joint amplitude contains non-finite entries".into()));
        }
        Ok(Self { amps, grid_s, grid_a, consts })
    }

    /// Product state ψ_S(x) ψ_A(y).
    pub fn product(
        psi_s: &Array1<Complex64>,
        psi_a: &Array1<Complex64>,
        grid_s: SpaceGrid,
        grid_a: SpaceGrid,
        consts: PhysicalConstants,
    ) -> Result<Self> {
        if psi_s.len() != grid_s.n_points() || psi_a.len() != grid_a.n_points() {
            return Err(Error::Contract("product-state factors do not match their grids".into()));
        }
        let mut amps = Array2::zeros((psi_s.len(), psi_a.len()));
        for (i, s) in psi_s.iter().enumerate() {
            for (j, a) in psi_a.iter().enumerate() {
                amps[[i, j]] = s * a;
            }
        }
        Self::new(amps, grid_s, grid_a, consts)
    }

    pub fn amplitudes(&self) -> &Array2<Complex64> {
        &self.amps
    }

    pub fn grid_s(&self) -> &SpaceGrid {
        &self.grid_s
    }

    pub fn grid_a(&self) -> &SpaceGrid {
        &self.grid_a
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.consts
    }

    /// Norm under the dx·dy measure.
    pub fn norm(&self) -> f64 {
        (self.amps.iter().map(|v| v.norm_sqr()).sum::<f64>()
            * self.grid_s.dx()
            * self.grid_a.dx())
        .sqrt()
    }

    /// The matrix of endpoint values is the relational matrix at `t_b`.
    pub fn relational_matrix(&self, t_b: f64) -> Result<RelationalMatrix> {
        RelationalMatrix::new(self.amps.clone(), self.grid_s, self.grid_a, t_b)
    }
}

/// Relational amplitude matrix R(x_b, y_b), indexed by (system position,
/// apparatus position).
#[derive(Debug, Clone)]
pub struct RelationalMatrix {
    matrix: Array2<Complex64>,
    grid_s: SpaceGrid,
    grid_a: SpaceGrid,
    time_stamp: f64,
}

impl RelationalMatrix {
    pub fn new(
        matrix: Array2<Complex64>,
        grid_s: SpaceGrid,
        grid_a: SpaceGrid,
        time_stamp: f64,
    ) -> Result<Self> {
        if matrix.nrows() != grid_s.n_points() || matrix.ncols() != grid_a.n_points() {
            return Err(Error::Contract("relational matrix shape does not match grids".into()));
        }
        if matrix.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Contract("relational matrix contains non-finite entries".into()));
        }
        if matrix.iter().all(|v| v.norm() == 0.0) {
            return Err(Error::Contract("relational matrix is identically zero".into()));
        }
        Ok(Self { matrix, grid_s, grid_a, time_stamp })
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn grid_s(&self) -> &SpaceGrid {
        &self.grid_s
    }

    pub fn grid_a(&self) -> &SpaceGrid {
        &self.grid_a
    }

    pub fn time_stamp(&self) -> f64 {
        self.time_stamp
    }
}

/// Coordinate-representation density kernel ρ(x, x′) with its grid measure.
#[derive(Debug, Clone)]
pub struct DensityKernel {
    matrix: Array2<Complex64>,
    dx: f64,
    normalized: bool,
}

impl DensityKernel {
    /// Validates squareness, finiteness, and Hermiticity (relative 1e-10).
    pub fn new(matrix: Array2<Complex64>, dx: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Contract(format!(
                "density kernel must be square, got {:?}",
                matrix.dim()
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::Contract(format!("density kernel needs dx > 0, got {dx}")));
        }
        if matrix.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Contract("density kernel contains non-finite entries".into()));
        }
        let scale = matrix.iter().map(|v| v.norm()).fold(0.0f64, f64::max).max(1e-300);
        let mut herm_defect = 0.0f64;
        for r in 0..matrix.nrows() {
            for c in 0..=r {
                herm_defect = herm_defect.max((matrix[[r, c]] - matrix[[c, r]].conj()).norm());
            }
        }
        if herm_defect > HERMITICITY_TOL * scale {
            return Err(Error::Contract(format!(
                "density kernel not Hermitian: defect {herm_defect:.3e} vs scale {scale:.3e}"
            )));
        }
        Ok(Self { matrix, dx, normalized: false })
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn n_points(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Trace under the grid measure: Σ diag · dx.
    pub fn trace(&self) -> Complex64 {
        self.matrix.diag().sum() * self.dx
    }

    /// Divides by Z = Tr(ρ) so the result has unit trace.
    pub fn normalize(mut self) -> Result<DensityKernel> {
        let z = self.trace();
        if z.norm() <= 1e-14 {
            return Err(Error::Degenerate(format!(
                "cannot normalize density kernel with trace modulus {:.3e}",
                z.norm()
            )));
        }
        self.matrix.mapv_inplace(|v| v / z);
        self.normalized = true;
        Ok(self)
    }

    /// Largest Hermiticity defect |ρ(x,x′) − conj ρ(x′,x)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.matrix.nrows() {
            for c in 0..=r {
                worst = worst.max((self.matrix[[r, c]] - self.matrix[[c, r]].conj()).norm());
            }
        }
        worst
    }
}

/// Probability of finding the system at grid node `x_index`:
/// the diagonal element of the normalized kernel times dx.
pub fn probability_at(rho: &DensityKernel, x_index: usize) -> Result<f64> {
    if !rho.is_normalized() {
        return Err(Error::Contract("probability_at requires a normalized density kernel".into()));
    }
    if x_index >= rho.n_points() {
        return Err(Error::Contract(format!(
            "index {x_index} outside kernel with {} points",
            rho.n_points()
        )));
    }
    let diag = rho.matrix()[[x_index, x_index]];
    if diag.im.abs() >= 1e-10 {
        return Err(Error::Contract(format!(
            "diagonal entry has imaginary part {:.3e}",
            diag.im
        )));
    }
    Ok(diag.re * rho.dx())
}

/// Full probability profile p(x) = ϱ(x, x)·dx over the grid.
pub fn probability_profile(rho: &DensityKernel) -> Result<Vec<f64>> {
    (0..rho.n_points()).map(|i| probability_at(rho, i)).collect()
}

/// Wave function from the relational matrix by integrating out the
/// apparatus index: φ(x_b) = Σ_y R(x_b, y)·dy.
pub fn wavefunction_from_r(r: &RelationalMatrix) -> Array1<Complex64> {
    let dy = r.grid_a().dx();
    r.matrix().rows().into_iter().map(|row| row.sum() * dy).collect()
}

/// Reduced density kernel ρ(x, x′) = Σ_y R(x, y) conj R(x′, y) · dy,
/// unnormalized.
pub fn reduced_density(r: &RelationalMatrix) -> Result<DensityKernel> {
    let dy = r.grid_a().dx();
    let n = r.grid_s().n_points();
    let m = r.matrix();
    let mut rho = Array2::zeros((n, n));
    for i in 0..n {
        for ip in 0..=i {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..r.grid_a().n_points() {
                acc += m[[i, j]] * m[[ip, j]].conj();
            }
            acc *= dy;
            rho[[i, ip]] = acc;
            rho[[ip, i]] = acc.conj();
        }
    }
    DensityKernel::new(rho, r.grid_s().dx())
}

/// Applies an operator on the system side: R_new = M R. The reduced density
/// then transforms as M ρ M†.
pub fn apply_operator(r: &RelationalMatrix, m: &Array2<Complex64>) -> Result<RelationalMatrix> {
    let n = r.grid_s().n_points();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Contract(format!(
            "operator shape {:?} does not match system grid with {n} points",
            m.dim()
        )));
    }
    RelationalMatrix::new(m.dot(r.matrix()), *r.grid_s(), *r.grid_a(), r.time_stamp())
}

/// Joint short-time evolution of system ⊗ apparatus.
///
/// Kernel mode builds the full joint slice matrix with the interaction phase
/// evaluated at slice spatial midpoints, which makes the evolution exactly
/// equal to the brute-force path-pair sum with `joint_action`. Spectral mode
/// split-steps with the interaction phase diagonal at grid points.
///
/// The interaction is read from `pot_s`.
pub fn evolve_joint(
    initial: &JointState,
    time: &TimeGrid,
    pot_s: &PotentialSpec,
    pot_a: &PotentialSpec,
    opts: PropagatorOptions,
) -> Result<JointState> {
    evolve_joint_with_cap(initial, time, pot_s, pot_a, opts, DEFAULT_JOINT_MEMORY_CAP)
}

/// `evolve_joint` with an explicit memory cap in bytes.
pub fn evolve_joint_with_cap(
    initial: &JointState,
    time: &TimeGrid,
    pot_s: &PotentialSpec,
    pot_a: &PotentialSpec,
    opts: PropagatorOptions,
    memory_cap: usize,
) -> Result<JointState> {
    if time.n_steps() == 0 {
        return Ok(initial.clone());
    }
    match opts.mode {
        PropagatorMode::Kernel => evolve_joint_kernel(initial, time, pot_s, pot_a, opts, memory_cap),
        PropagatorMode::Spectral => evolve_joint_spectral(initial, time, pot_s, pot_a, opts),
    }
}

fn evolve_joint_kernel(
    initial: &JointState,
    time: &TimeGrid,
    pot_s: &PotentialSpec,
    pot_a: &PotentialSpec,
    opts: PropagatorOptions,
    memory_cap: usize,
) -> Result<JointState> {
    let slice = joint_slice_matrix(
        &initial.grid_s,
        &initial.grid_a,
        time.eps(),
        pot_s,
        pot_a,
        &initial.consts,
        opts,
        memory_cap,
    )?;
    let (n_s, n_a) = initial.amps.dim();
    let mut state: Array1<Complex64> =
        Array1::from_iter(initial.amps.iter().copied());
    for _ in 0..time.n_steps() {
        state = slice.dot(&state);
    }
    let amps = Array2::from_shape_vec((n_s, n_a), state.to_vec())
        .expect("state length preserved by evolution");
    JointState::new(amps, initial.grid_s, initial.grid_a, initial.consts)
}

/// Dense one-slice joint evolution matrix over the flattened product grid
/// (row = j_s·n_a + j_a). Shared with the history module's stage kernels.
#[allow(clippy::too_many_arguments)]
pub(crate) fn joint_slice_matrix(
    grid_s: &SpaceGrid,
    grid_a: &SpaceGrid,
    eps: f64,
    pot_s: &PotentialSpec,
    pot_a: &PotentialSpec,
    consts: &PhysicalConstants,
    opts: PropagatorOptions,
    memory_cap: usize,
) -> Result<Array2<Complex64>> {
    let n_s = grid_s.n_points();
    let n_a = grid_a.n_points();
    let dim = n_s * n_a;
    let bytes = dim
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(std::mem::size_of::<Complex64>()))
        .ok_or_else(|| Error::Refused("joint slice matrix size overflows".into()))?;
    if bytes > memory_cap {
        return Err(Error::Refused(format!(
            "joint slice matrix would need {bytes} bytes, above the {memory_cap}-byte cap"
        )));
    }
    let ks = short_time_kernel_with(grid_s, eps, pot_s, consts, opts)?;
    let ka = short_time_kernel_with(grid_a, eps, pot_a, consts, opts)?;
    let ks = ks.matrix();
    let ka = ka.matrix();
    let minus_i_eps_over_h = -Complex64::i() * opts.eps_complex(eps) / consts.hbar;
    let mut slice = Array2::zeros((dim, dim));
    for js in 0..n_s {
        let xj = grid_s.position(js);
        for is in 0..n_s {
            let xmid = 0.5 * (grid_s.position(is) + xj);
            let ks_val = ks[[js, is]];
            for ja in 0..n_a {
                let yj = grid_a.position(ja);
                let row = js * n_a + ja;
                for ia in 0..n_a {
                    let ymid = 0.5 * (grid_a.position(ia) + yj);
                    let phase = (minus_i_eps_over_h * pot_s.interaction(xmid, ymid)).exp();
                    slice[[row, is * n_a + ia]] = ks_val * ka[[ja, ia]] * phase;
                }
            }
        }
    }
    Ok(slice)
}

fn evolve_joint_spectral(
    initial: &JointState,
    time: &TimeGrid,
    pot_s: &PotentialSpec,
    pot_a: &PotentialSpec,
    opts: PropagatorOptions,
) -> Result<JointState> {
    let n_s = initial.grid_s.n_points();
    let n_a = initial.grid_a.n_points();
    let eps_c = opts.eps_complex(time.eps());
    let hbar = initial.consts.hbar;
    let mass = initial.consts.mass;

    let half_phase: Array2<Complex64> = Array2::from_shape_fn((n_s, n_a), |(i, j)| {
        let x = initial.grid_s.position(i);
        let y = initial.grid_a.position(j);
        let v = pot_s.single_body(x) + pot_a.single_body(y) + pot_s.interaction(x, y);
        (-Complex64::i() * eps_c * v / (2.0 * hbar)).exp()
    });
    let kin_s: Vec<Complex64> = fft_wavenumbers(n_s, initial.grid_s.dx())
        .into_iter()
        .map(|k| (-Complex64::i() * hbar * k * k * eps_c / (2.0 * mass)).exp())
        .collect();
    let kin_a: Vec<Complex64> = fft_wavenumbers(n_a, initial.grid_a.dx())
        .into_iter()
        .map(|k| (-Complex64::i() * hbar * k * k * eps_c / (2.0 * mass)).exp())
        .collect();

    let mut planner = FftPlanner::new();
    let fft_s = planner.plan_fft_forward(n_s);
    let ifft_s = planner.plan_fft_inverse(n_s);
    let fft_a = planner.plan_fft_forward(n_a);
    let ifft_a = planner.plan_fft_inverse(n_a);

    let mut amps = initial.amps.clone();
    let mut col = vec![Complex64::new(0.0, 0.0); n_s];
    let mut row = vec![Complex64::new(0.0, 0.0); n_a];
    for _ in 0..time.n_steps() {
        amps.zip_mut_with(&half_phase, |v, p| *v *= p);
        // kinetic step along the system axis
        for j in 0..n_a {
            for i in 0..n_s {
                col[i] = amps[[i, j]];
            }
            fft_s.process(&mut col);
            for (v, ph) in col.iter_mut().zip(&kin_s) {
                *v *= ph;
            }
            ifft_s.process(&mut col);
            for i in 0..n_s {
                amps[[i, j]] = col[i] / n_s as f64;
            }
        }
        // kinetic step along the apparatus axis
        for i in 0..n_s {
            for j in 0..n_a {
                row[j] = amps[[i, j]];
            }
            fft_a.process(&mut row);
            for (v, ph) in row.iter_mut().zip(&kin_a) {
                *v *= ph;
            }
            ifft_a.process(&mut row);
            for j in 0..n_a {
                amps[[i, j]] = row[j] / n_a as f64;
            }
        }
        amps.zip_mut_with(&half_phase, |v, p| *v *= p);
    }
    JointState::new(amps, initial.grid_s, initial.grid_a, initial.consts)
}

/// Normalized Gaussian state sampled on a grid.
pub fn gaussian_state(grid: &SpaceGrid, x0: f64, sigma: f64, k0: f64) -> Array1<Complex64> {
    let mut psi: Array1<Complex64> = Array1::from_iter(grid.positions().into_iter().map(|x| {
        let dxv = x - x0;
        Complex64::new(-dxv * dxv / (4.0 * sigma * sigma), k0 * dxv).exp()
    }));
    let norm = (psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
    psi.mapv_inplace(|v| v / norm);
    psi
}

/// Delta comb: given (index, amplitude) pairs, places amplitude/dx at each
/// node so that each spike integrates to its amplitude.
pub fn delta_comb(grid: &SpaceGrid, spikes: &[(usize, Complex64)]) -> Result<Array1<Complex64>> {
    let mut psi = Array1::zeros(grid.n_points());
    for &(idx, amp) in spikes {
        if idx >= grid.n_points() {
            return Err(Error::Contract(format!(
                "delta spike index {idx} outside grid with {} points",
                grid.n_points()
            )));
        }
        psi[idx] += amp / grid.dx();
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_paths, joint_action};
    use crate::linalg::{hermitian_eigen, numerical_rank};
    use crate::propagator::PropagatorOptions;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn small_r() -> RelationalMatrix {
        let grid_s = SpaceGrid::new(0.0, 1.0, 2).unwrap();
        let grid_a = SpaceGrid::new(0.0, 1.0, 2).unwrap();
        let inv = 1.0 / std::f64::consts::SQRT_2;
        let matrix = ndarray::array![
            [Complex64::new(inv, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(inv, 0.0)]
        ];
        RelationalMatrix::new(matrix, grid_s, grid_a, 0.0).unwrap()
    }

    #[test]
    fn rank_one_r_gives_wavefunction_proportional_to_factor() {
        let grid_s = SpaceGrid::new(-1.0, 1.0, 3).unwrap();
        let grid_a = SpaceGrid::new(-1.0, 1.0, 4).unwrap();
        let u = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.7), Complex64::new(1.0, 0.0)];
        let v = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, -0.4),
            Complex64::new(0.0, 0.9),
            Complex64::new(-0.3, 0.3),
        ];
        let mut m = Array2::zeros((3, 4));
        for i in 0..3 {
            for j in 0..4 {
                m[[i, j]] = u[i] * v[j];
            }
        }
        let r = RelationalMatrix::new(m, grid_s, grid_a, 0.0).unwrap();
        let phi = wavefunction_from_r(&r);
        let vsum: Complex64 = v.iter().sum::<Complex64>() * grid_a.dx();
        for i in 0..3 {
            assert!((phi[i] - u[i] * vsum).norm() < 1e-14);
        }
    }

    #[test]
    fn entangled_r_breaks_wavefunction_probability_identity() {
        // R = diag(1,1)/sqrt(2): |φ|² differs from diag(RR†)·dy.
        let r = small_r();
        let phi = wavefunction_from_r(&r);
        let rho = reduced_density(&r).unwrap().normalize().unwrap();
        let dy = r.grid_a().dx();
        let p_from_phi: Vec<f64> = phi.iter().map(|v| v.norm_sqr() * dy).collect();
        let p_from_rho = probability_profile(&rho).unwrap();
        // probabilities from the density are (1/2, 1/2)
        assert!((p_from_rho[0] - 0.5).abs() < 1e-12);
        assert!((p_from_rho[1] - 0.5).abs() < 1e-12);
        // wavefunction route collapses the distinction and disagrees here
        let diff: f64 = p_from_phi
            .iter()
            .zip(&p_from_rho)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 0.1, "expected a visible mismatch, got {diff}");
    }

    #[test]
    fn two_by_two_identity_r_has_flat_spectrum() {
        let r = small_r();
        let rho = reduced_density(&r).unwrap().normalize().unwrap();
        let scaled = rho.matrix().mapv(|v| v * rho.dx());
        let (vals, _) = hermitian_eigen(&scaled);
        assert!((vals[0] - 0.5).abs() < 1e-12);
        assert!((vals[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reduced_density_is_hermitian_psd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let grid_s = SpaceGrid::new(-1.0, 1.0, 5).unwrap();
        let grid_a = SpaceGrid::new(-1.0, 1.0, 4).unwrap();
        for _ in 0..20 {
            let m = Array2::from_shape_fn((5, 4), |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let r = RelationalMatrix::new(m, grid_s, grid_a, 0.0).unwrap();
            let rho = reduced_density(&r).unwrap();
            assert!(rho.hermiticity_defect() < 1e-12);
            let scaled = rho.matrix().mapv(|v| v * rho.dx());
            let (vals, _) = hermitian_eigen(&scaled);
            assert!(vals.iter().all(|&l| l >= -1e-10), "eigenvalues {vals:?}");
        }
    }

    #[test]
    fn product_state_density_has_rank_one() {
        let grid = SpaceGrid::new(-1.0, 1.0, 4).unwrap();
        let psi_s = gaussian_state(&grid, 0.0, 0.5, 0.0);
        let psi_a = gaussian_state(&grid, 0.2, 0.4, 1.0);
        let joint = JointState::product(&psi_s, &psi_a, grid, grid, consts()).unwrap();
        let r = joint.relational_matrix(0.0).unwrap();
        let rho = reduced_density(&r).unwrap().normalize().unwrap();
        let scaled = rho.matrix().mapv(|v| v * rho.dx());
        assert_eq!(numerical_rank(&scaled, 1e-10), 1);
    }

    #[test]
    fn normalize_is_scale_invariant_and_idempotent() {
        let r = small_r();
        let rho = reduced_density(&r).unwrap();
        let scaled = DensityKernel::new(rho.matrix().mapv(|v| v * 7.0), rho.dx()).unwrap();
        let a = rho.normalize().unwrap();
        let b = scaled.normalize().unwrap();
        for (x, y) in a.matrix().iter().zip(b.matrix().iter()) {
            assert!((x - y).norm() < 1e-12);
        }
        assert!((a.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn normalize_unit_trace_on_random_gram_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let n = rng.gen_range(2..7);
            let k = n + rng.gen_range(1..4);
            let g = Array2::from_shape_fn((n, k), |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let gram = g.dot(&crate::propagator::conjugate_transpose(&g));
            let rho = DensityKernel::new(gram, 0.37).unwrap().normalize().unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            assert!(rho.trace().im.abs() < 1e-12);
        }
    }

    #[test]
    fn near_zero_trace_is_degenerate() {
        let m = Array2::from_elem((3, 3), Complex64::new(0.0, 0.0));
        let rho = DensityKernel::new(m, 0.5).unwrap();
        let err = rho.normalize().unwrap_err();
        assert_eq!(err.category(), "degenerate");
    }

    #[test]
    fn probabilities_sum_to_one_and_match_pure_state() {
        let grid = SpaceGrid::new(-3.0, 3.0, 31).unwrap();
        let psi = gaussian_state(&grid, 0.3, 0.8, 0.7);
        let mut m = Array2::zeros((31, 31));
        for i in 0..31 {
            for j in 0..31 {
                m[[i, j]] = psi[i] * psi[j].conj();
            }
        }
        let rho = DensityKernel::new(m, grid.dx()).unwrap().normalize().unwrap();
        let p = probability_profile(&rho).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for (i, &pi) in p.iter().enumerate() {
            assert!((pi - psi[i].norm_sqr() * grid.dx()).abs() < 1e-10);
        }
    }

    #[test]
    fn probability_requires_normalized_kernel() {
        let r = small_r();
        let rho = reduced_density(&r).unwrap();
        let err = probability_at(&rho, 0).unwrap_err();
        assert_eq!(err.category(), "contract");
    }

    #[test]
    fn apply_operator_identity_and_conjugation() {
        let r = small_r();
        let eye: Array2<Complex64> = Array2::eye(2);
        let same = apply_operator(&r, &eye).unwrap();
        for (a, b) in same.matrix().iter().zip(r.matrix().iter()) {
            assert!((a - b).norm() < 1e-15);
        }

        // M rotates; reduced density must transform as M rho M†.
        let th = 0.6f64;
        let m = ndarray::array![
            [
                Complex64::new(th.cos(), 0.0),
                Complex64::new(-th.sin(), 0.1)
            ],
            [Complex64::new(th.sin(), 0.1), Complex64::new(th.cos(), 0.0)]
        ];
        let lhs = reduced_density(&apply_operator(&r, &m).unwrap()).unwrap();
        let rho = reduced_density(&r).unwrap();
        let rhs = m.dot(rho.matrix()).dot(&crate::propagator::conjugate_transpose(&m));
        for (a, b) in lhs.matrix().iter().zip(rhs.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_operator_preserves_spectrum() {
        let r = small_r();
        let th = 0.8f64;
        let u = ndarray::array![
            [Complex64::new(th.cos(), 0.0), Complex64::new(0.0, th.sin())],
            [Complex64::new(0.0, th.sin()), Complex64::new(th.cos(), 0.0)]
        ];
        let before = reduced_density(&r).unwrap().normalize().unwrap();
        let after = reduced_density(&apply_operator(&r, &u).unwrap())
            .unwrap()
            .normalize()
            .unwrap();
        let (a, _) = hermitian_eigen(&before.matrix().mapv(|v| v * before.dx()));
        let (b, _) = hermitian_eigen(&after.matrix().mapv(|v| v * after.dx()));
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_steps_evolution_is_identity() {
        let grid = SpaceGrid::new(-1.0, 1.0, 3).unwrap();
        let psi = gaussian_state(&grid, 0.0, 0.6, 0.0);
        let joint = JointState::product(&psi, &psi, grid, grid, consts()).unwrap();
        let time = TimeGrid::new(0.0, 0.0, 0).unwrap();
        let out = evolve_joint(
            &joint,
            &time,
            &PotentialSpec::free(),
            &PotentialSpec::free(),
            PropagatorOptions::kernel(),
        )
        .unwrap();
        for (a, b) in out.amplitudes().iter().zip(joint.amplitudes().iter()) {
            assert!((a - b).norm() == 0.0);
        }
    }

    #[test]
    fn no_interaction_preserves_product_rank() {
        let grid_s = SpaceGrid::new(-2.0, 2.0, 8).unwrap();
        let grid_a = SpaceGrid::new(-1.0, 1.0, 6).unwrap();
        let psi_s = gaussian_state(&grid_s, 0.0, 0.7, 0.4);
        let psi_a = gaussian_state(&grid_a, 0.1, 0.4, 0.0);
        let joint = JointState::product(&psi_s, &psi_a, grid_s, grid_a, consts()).unwrap();
        let time = TimeGrid::new(0.0, 0.6, 3).unwrap();
        for opts in [PropagatorOptions::kernel(), PropagatorOptions::spectral()] {
            let out = evolve_joint(
                &joint,
                &time,
                &PotentialSpec::harmonic(0.7),
                &PotentialSpec::free(),
                opts,
            )
            .unwrap();
            assert_eq!(numerical_rank(out.amplitudes(), 1e-8), 1, "mode {:?}", opts.mode);
        }
    }

    #[test]
    fn joint_evolution_matches_bruteforce_path_pair_sum() {
        // 3 sites each, 3 steps: Σ over all path pairs of
        // e^{i S_joint / ħ} (pref_s dx pref_a dy)^n ψ0(start).
        let grid_s = SpaceGrid::new(-1.0, 1.0, 3).unwrap();
        let grid_a = SpaceGrid::new(-0.8, 0.8, 3).unwrap();
        let time = TimeGrid::new(0.0, 0.9, 3).unwrap();
        let c = consts();
        let pot_s = PotentialSpec::harmonic(0.6).with_interaction(|x, y| 1.1 * x * y);
        let pot_a = PotentialSpec::new(|y| 0.3 * y * y);

        let psi_s = gaussian_state(&grid_s, 0.1, 0.8, 0.2);
        let psi_a = gaussian_state(&grid_a, -0.1, 0.5, 0.0);
        let joint = JointState::product(&psi_s, &psi_a, grid_s, grid_a, c).unwrap();
        let got = evolve_joint(&joint, &time, &pot_s, &pot_a, PropagatorOptions::kernel()).unwrap();

        let eps = time.eps();
        let pref = |_c: &PhysicalConstants| {
            (Complex64::new(1.0, 0.0)
                / (Complex64::i() * 2.0 * std::f64::consts::PI * eps))
            .sqrt()
        };
        let weight = (pref(&c) * grid_s.dx() * pref(&c) * grid_a.dx()).powu(3);
        let paths_s = enumerate_paths(&grid_s, &time, None, None).unwrap();
        let paths_a = enumerate_paths(&grid_a, &time, None, None).unwrap();
        let mut want: Array2<Complex64> = Array2::zeros((3, 3));
        for ps in &paths_s {
            for pa in &paths_a {
                let s = joint_action(ps, pa, &grid_s, &grid_a, &time, &pot_s, &pot_a, &c).unwrap();
                let amp = (Complex64::i() * s / c.hbar).exp()
                    * weight
                    * joint.amplitudes()[[ps.start(), pa.start()]];
                want[[ps.end(), pa.end()]] += amp;
            }
        }
        let mut worst = 0.0f64;
        for (a, b) in got.amplitudes().iter().zip(want.iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst < 1e-10, "path-sum mismatch {worst}");
        // keep the oracle honest: amplitudes should not be trivially zero
        assert!(want.iter().map(|v| v.norm()).sum::<f64>() > 1e-3);
    }

    #[test]
    fn joint_memory_cap_refuses_large_products() {
        let grid = SpaceGrid::new(-5.0, 5.0, 64).unwrap();
        let psi = gaussian_state(&grid, 0.0, 1.0, 0.0);
        let joint = JointState::product(&psi, &psi, grid, grid, consts()).unwrap();
        let time = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let err = evolve_joint_with_cap(
            &joint,
            &time,
            &PotentialSpec::free().with_interaction(|x, y| x * y),
            &PotentialSpec::free(),
            PropagatorOptions::kernel(),
            1 << 20,
        )
        .unwrap_err();
        assert_eq!(err.category(), "refused");
    }
}
