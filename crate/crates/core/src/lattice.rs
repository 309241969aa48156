//! Grids, discretized paths, potentials, and the action functional that every
//! other module integrates over.
//!
//! Space is a uniform 1-D lattice with hard-wall truncation; time is a uniform
//! slicing. A path is one grid index per time slice, and its action is the
//! kinetic term minus the midpoint-rule potential term, slice by slice.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default cap on the number of paths `enumerate_paths` will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// ħ and m. Both strictly positive; defaults are the dimensionless ħ = m = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::Domain(format!("hbar must be positive, got {hbar}")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Domain(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { hbar, mass })
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

/// Uniform spatial grid on `[x_min, x_max]` with `n_points >= 2` nodes.
///
/// The integration weight is the node spacing `dx`; amplitudes outside the
/// interval are treated as zero (hard wall).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl SpaceGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Domain("grid bounds must be finite".into()));
        }
        if x_min >= x_max {
            return Err(Error::Domain(format!(
                "grid needs x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 2 {
            return Err(Error::Domain(format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Node spacing, also the quadrature weight.
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn position(&self, index: usize) -> f64 {
        self.x_min + self.dx() * index as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.position(i)).collect()
    }

    /// Index of the grid node closest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = ((x - self.x_min) / self.dx()).round();
        (raw.max(0.0) as usize).min(self.n_points - 1)
    }
}

/// Uniform time slicing of `[t_start, t_end]` into `n_steps` slices.
///
/// `n_steps = 0` is permitted only for identity (zero-duration) evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::Domain("time bounds must be finite".into()));
        }
        if t_end < t_start {
            return Err(Error::Domain(format!(
                "time grid needs t_end >= t_start, got [{t_start}, {t_end}]"
            )));
        }
        if n_steps > 0 && t_end == t_start {
            return Err(Error::Domain(
                "zero-duration evolution requires n_steps = 0".into(),
            ));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Slice width ε; zero only for the identity grid.
    pub fn eps(&self) -> f64 {
        self.duration() / (self.n_steps.max(1) as f64)
    }

    /// Time at slice boundary `k`, `k = 0 ..= n_steps`.
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + self.eps() * k as f64
    }

    /// Midpoint time of slice `k`, `k = 0 .. n_steps`.
    pub fn slice_midpoint(&self, k: usize) -> f64 {
        self.t_start + self.eps() * (k as f64 + 0.5)
    }
}

/// A lattice trajectory: one grid index per time-slice boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticePath {
    indices: Vec<usize>,
}

impl LatticePath {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn start(&self) -> usize {
        self.indices[0]
    }

    pub fn end(&self) -> usize {
        self.indices[self.indices.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        let mut indices = self.indices.clone();
        indices.reverse();
        Self { indices }
    }
}

type SingleBodyFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type InteractionFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type SourceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Potential content of an action: a single-body term V(x), an optional
/// two-body interaction V_int(x, y), and an optional classical source g(t).
///
/// The source never enters the action directly; it drives the linear
/// influence-functional phase (see the `influence` module).
#[derive(Clone)]
pub struct PotentialSpec {
    single_body: SingleBodyFn,
    interaction: Option<InteractionFn>,
    source: Option<SourceFn>,
}

impl PotentialSpec {
    /// Zero potential everywhere.
    pub fn free() -> Self {
        Self {
            single_body: Arc::new(|_| 0.0),
            interaction: None,
            source: None,
        }
    }

    pub fn new(single_body: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            single_body: Arc::new(single_body),
            interaction: None,
            source: None,
        }
    }

    /// Harmonic well `k x^2 / 2`.
    pub fn harmonic(k: f64) -> Self {
        Self::new(move |x| 0.5 * k * x * x)
    }

    pub fn with_interaction(
        mut self,
        interaction: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.interaction = Some(Arc::new(interaction));
        self
    }

    pub fn with_source(mut self, source: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(source));
        self
    }

    pub fn single_body(&self, x: f64) -> f64 {
        (self.single_body)(x)
    }

    pub fn interaction(&self, x: f64, y: f64) -> f64 {
        match &self.interaction {
            Some(f) => f(x, y),
            None => 0.0,
        }
    }

    pub fn has_interaction(&self) -> bool {
        self.interaction.is_some()
    }

    pub fn source(&self, t: f64) -> f64 {
        match &self.source {
            Some(f) => f(t),
            None => 0.0,
        }
    }

    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("interaction", &self.interaction.is_some())
            .field("source", &self.source.is_some())
            .finish()
    }
}

fn check_path(path: &LatticePath, grid: &SpaceGrid, time: &TimeGrid) -> Result<()> {
    if path.len() != time.n_steps() + 1 {
        return Err(Error::Contract(format!(
            "path length {} does not match time grid with {} steps",
            path.len(),
            time.n_steps()
        )));
    }
    for &i in path.indices() {
        if i >= grid.n_points() {
            return Err(Error::Domain(format!(
                "path index {i} outside grid with {} points",
                grid.n_points()
            )));
        }
    }
    Ok(())
}

/// Discretized single-system action of a path:
/// `Σ_slices [ m Δx² / (2ε) − ε V(midpoint) ]`.
pub fn action_of_path(
    path: &LatticePath,
    grid: &SpaceGrid,
    time: &TimeGrid,
    pot: &PotentialSpec,
    consts: &PhysicalConstants,
) -> Result<f64> {
    check_path(path, grid, time)?;
    let eps = time.eps();
    let mut action = 0.0;
    for k in 0..time.n_steps() {
        let xa = grid.position(path.indices()[k]);
        let xb = grid.position(path.indices()[k + 1]);
        let dx = xb - xa;
        action += consts.mass * dx * dx / (2.0 * eps);
        action -= eps * pot.single_body(0.5 * (xa + xb));
    }
    Ok(action)
}

/// Joint two-system action: the two single-system actions plus the
/// interaction term `Σ_slices −ε V_int(x_mid, y_mid)`.
///
/// The interaction is read from `pot_s` (the system side carries the
/// coupling).
#[allow(clippy::too_many_arguments)]
pub fn joint_action(
    path_s: &LatticePath,
    path_a: &LatticePath,
    grid_s: &SpaceGrid,
    grid_a: &SpaceGrid,
    time: &TimeGrid,
    pot_s: &PotentialSpec,
    pot_a: &PotentialSpec,
    consts: &PhysicalConstants,
) -> Result<f64> {
    if path_s.len() != path_a.len() {
        return Err(Error::Contract(format!(
            "joint paths must share a time grid: lengths {} vs {}",
            path_s.len(),
            path_a.len()
        )));
    }
    let mut action = action_of_path(path_s, grid_s, time, pot_s, consts)?
        + action_of_path(path_a, grid_a, time, pot_a, consts)?;
    let eps = time.eps();
    for k in 0..time.n_steps() {
        let xm = 0.5 * (grid_s.position(path_s.indices()[k]) + grid_s.position(path_s.indices()[k + 1]));
        let ym = 0.5 * (grid_a.position(path_a.indices()[k]) + grid_a.position(path_a.indices()[k + 1]));
        action -= eps * pot_s.interaction(xm, ym);
    }
    Ok(action)
}

/// Every lattice path on `grid` over `time`, optionally with fixed endpoints,
/// in deterministic lexicographic order (first free slot most significant).
///
/// Refuses when the path count would exceed `DEFAULT_ENUMERATION_CAP`.
pub fn enumerate_paths(
    grid: &SpaceGrid,
    time: &TimeGrid,
    start: Option<usize>,
    end: Option<usize>,
) -> Result<Vec<LatticePath>> {
    enumerate_paths_capped(grid, time, start, end, DEFAULT_ENUMERATION_CAP)
}

/// `enumerate_paths` with an explicit cap.
pub fn enumerate_paths_capped(
    grid: &SpaceGrid,
    time: &TimeGrid,
    start: Option<usize>,
    end: Option<usize>,
    cap: u128,
) -> Result<Vec<LatticePath>> {
    let n = grid.n_points();
    let slots = time.n_steps() + 1;
    for fixed in [start, end].into_iter().flatten() {
        if fixed >= n {
            return Err(Error::Domain(format!(
                "fixed endpoint {fixed} outside grid with {n} points"
            )));
        }
    }
    let fixed = if slots == 1 {
        usize::from(start.is_some() || end.is_some())
    } else {
        usize::from(start.is_some()) + usize::from(end.is_some())
    };
    let free_slots = slots - fixed;
    let count = (n as u128)
        .checked_pow(free_slots as u32)
        .ok_or_else(|| Error::Refused("path count overflows u128".into()))?;
    if count > cap {
        return Err(Error::Refused(format!(
            "enumeration of {count} paths exceeds cap {cap}"
        )));
    }

    // Degenerate single-slot grid with both endpoints pinned to the same slot.
    if slots == 1 {
        if let (Some(s), Some(e)) = (start, end) {
            if s != e {
                return Ok(Vec::new());
            }
        }
    }

    let mut paths = Vec::with_capacity(count as usize);
    let mut current = vec![0usize; slots];
    if let Some(s) = start {
        current[0] = s;
    }
    if let Some(e) = end {
        current[slots - 1] = e;
    }
    let free_positions: Vec<usize> = (0..slots)
        .filter(|&k| !(k == 0 && start.is_some()) && !(k == slots - 1 && end.is_some()))
        .collect();

    loop {
        paths.push(LatticePath::new(current.clone()));
        // Odometer increment over the free slots, last slot fastest.
        let mut pos = free_positions.len();
        loop {
            if pos == 0 {
                return Ok(paths);
            }
            pos -= 1;
            let slot = free_positions[pos];
            current[slot] += 1;
            if current[slot] < n {
                break;
            }
            current[slot] = 0;
        }
    }
}
