//! Time evolution in working-frame coordinates.
//!
//! Pure states and propagators use the exponential midpoint rule; density
//! matrices use classic RK4 on the Lindblad equation. All states are stored as
//! column-major blocks; the bare-basis view is recovered through the model's
//! frame only at snapshot instants.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonians::{LindbladSet, TimeDependentHamiltonian};
use crate::hilbert::{build_basis, DensityMatrix, HeraldedSubspace, Operator, StateVector, AUX_RYDBERG, C64, I, ZERO};
use crate::sparse::{ExpWorkspace, SparseHermitian, SparseOp};

/// Upper bound on stored snapshots per run.
pub const MAX_SNAPSHOTS: usize = 2000;

/// Product of step size and fastest frequency above which a run is flagged.
pub const STEP_ADVISORY: f64 = 0.1;

/// Uniform grid; observables are recorded every `sampling_stride` steps and
/// at the final step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub sampling_stride: usize,
}

impl TimeGrid {
    /// Grid with the stride chosen so at most [`MAX_SNAPSHOTS`] instants are kept.
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        let stride = n_steps.div_ceil(MAX_SNAPSHOTS - 2).max(1);
        Self::with_stride(t_start, t_end, n_steps, stride)
    }

    pub fn with_stride(t_start: f64, t_end: f64, n_steps: usize, sampling_stride: usize) -> Result<Self> {
        if n_steps == 0 || sampling_stride == 0 {
            return Err(Error::InvalidParameter("grid needs at least one step and a positive stride".into()));
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::InvalidParameter("grid needs t_end > t_start".into()));
        }
        if n_steps.div_ceil(sampling_stride) + 1 > MAX_SNAPSHOTS {
            return Err(Error::InvalidParameter(format!("stride keeps more than {MAX_SNAPSHOTS} snapshots")));
        }
        Ok(Self { t_start, t_end, n_steps, sampling_stride })
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.n_steps {
            self.t_end
        } else {
            self.t_start + step as f64 * self.step()
        }
    }

    pub fn is_snapshot(&self, step: usize) -> bool {
        step % self.sampling_stride == 0 || step == self.n_steps
    }

    pub fn snapshot_count(&self) -> usize {
        self.n_steps.div_ceil(self.sampling_stride) + 1
    }

    /// `h * f_max`, compared against [`STEP_ADVISORY`].
    pub fn stiffness(&self, max_frequency: f64) -> f64 {
        self.step() * max_frequency
    }
}

/// Returns `h * f_max` when it exceeds the advisory threshold; under `strict`
/// that case is an error instead.
pub fn step_advisory(ham: &dyn TimeDependentHamiltonian, grid: &TimeGrid, strict: bool) -> Result<Option<f64>> {
    let s = grid.stiffness(ham.max_frequency());
    if s <= STEP_ADVISORY {
        Ok(None)
    } else if strict {
        Err(Error::StepTooCoarse(s))
    } else {
        Ok(Some(s))
    }
}

/// Snapshots of a run plus named real series sampled at the same instants.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S = DensityMatrix> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub observables: BTreeMap<String, Vec<f64>>,
}

impl<S> Default for Trajectory<S> {
    fn default() -> Self {
        Self { times: Vec::new(), states: Vec::new(), observables: BTreeMap::new() }
    }
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn record(&mut self, name: &str, value: f64) {
        self.observables.entry(name.to_string()).or_default().push(value);
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.get(name).map(Vec::as_slice)
    }

    pub fn last_state(&self) -> Option<&S> {
        self.states.last()
    }
}

fn check_columns(ham: &dyn TimeDependentHamiltonian, state: &DMatrix<C64>) -> Result<()> {
    if state.nrows() != ham.dim() {
        return Err(Error::DimensionMismatch { expected: ham.dim(), found: state.nrows() });
    }
    Ok(())
}

/// Evolve a block of working-frame columns with the exponential midpoint rule.
/// `observe(t, block)` runs at every snapshot instant, including `t_start`.
pub fn propagate_columns(
    ham: &dyn TimeDependentHamiltonian,
    grid: &TimeGrid,
    mut state: DMatrix<C64>,
    mut observe: impl FnMut(f64, &DMatrix<C64>),
) -> Result<DMatrix<C64>> {
    check_columns(ham, &state)?;
    let h = grid.step();
    let mut hm = SparseHermitian::zeros(ham.dim());
    let mut work = ExpWorkspace::default();
    observe(grid.t_start, &state);
    for step in 0..grid.n_steps {
        ham.fill(grid.time(step) + 0.5 * h, &mut hm);
        hm.expm_apply(h, state.as_mut_slice(), &mut work);
        if grid.is_snapshot(step + 1) {
            observe(grid.time(step + 1), &state);
        }
    }
    Ok(state)
}

/// `U(t, 0)` in the bare basis at every snapshot instant.
pub fn propagate_unitary(ham: &dyn TimeDependentHamiltonian, grid: &TimeGrid) -> Result<Trajectory<Operator>> {
    let w = ham.frame().clone();
    let mut traj = Trajectory::default();
    let n = ham.dim();
    propagate_columns(ham, grid, DMatrix::identity(n, n), |t, u| {
        let bare = &w * u * w.adjoint();
        let defect = unitarity_defect(&bare);
        traj.times.push(t);
        traj.states.push(Operator::new(bare, false));
        traj.record("unitarity_defect", defect);
    })?;
    Ok(traj)
}

/// `max |U^dag U - 1|`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.ncols();
    let g = u.adjoint() * u - DMatrix::<C64>::identity(n, n);
    g.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Lindblad right-hand side in working coordinates.
#[derive(Clone, Debug)]
pub struct LindbladRhs {
    decay: Vec<f64>,
    jumps: Vec<SparseOp>,
    ham: SparseHermitian,
    scratch: Vec<C64>,
}

impl LindbladRhs {
    pub fn new(ham: &dyn TimeDependentHamiltonian, lindblad: &LindbladSet) -> Result<Self> {
        let n = ham.dim();
        let jumps = lindblad.in_frame(ham.frame());
        if jumps.iter().any(|j| j.dim != n) {
            return Err(Error::DimensionMismatch { expected: n, found: jumps.first().map_or(0, |j| j.dim) });
        }
        let mut decay = vec![0.0; n];
        for j in &jumps {
            // L^dag L is diagonal for every channel here
            for &(_, c, v) in &j.entries {
                decay[c] += v.norm_sqr();
            }
        }
        Ok(Self { decay, jumps, ham: SparseHermitian::zeros(n), scratch: vec![ZERO; n * n] })
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    /// `out = L[rho]` at time `t`.
    pub fn eval(&mut self, model: &dyn TimeDependentHamiltonian, t: f64, rho: &[C64], out: &mut [C64]) {
        let n = self.decay.len();
        model.fill(t, &mut self.ham);
        // scratch = -i K rho with K = H - i Gamma / 2
        self.scratch.iter_mut().for_each(|x| *x = ZERO);
        self.ham.apply_add(rho, &mut self.scratch, -I);
        for j in 0..n {
            for i in 0..n {
                self.scratch[i + j * n] -= 0.5 * self.decay[i] * rho[i + j * n];
            }
        }
        for j in 0..n {
            for i in 0..n {
                out[i + j * n] = self.scratch[i + j * n] + self.scratch[j + i * n].conj();
            }
        }
        for l in &self.jumps {
            l.sandwich_add(rho, out);
        }
    }
}

/// RK4 integration of the master equation from a working-frame `rho0`.
/// `observe(t, rho)` runs at every snapshot instant.
pub fn evolve_master_columns(
    ham: &dyn TimeDependentHamiltonian,
    lindblad: &LindbladSet,
    rho0: DMatrix<C64>,
    grid: &TimeGrid,
    mut observe: impl FnMut(f64, &DMatrix<C64>),
) -> Result<DMatrix<C64>> {
    let n = ham.dim();
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho0.nrows() });
    }
    let mut rhs = LindbladRhs::new(ham, lindblad)?;
    let h = grid.step();
    let mut rho = rho0;
    let len = n * n;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]);
    observe(grid.t_start, &rho);
    for step in 0..grid.n_steps {
        let t = grid.time(step);
        let y = rho.as_mut_slice();
        rhs.eval(ham, t, y, &mut k1);
        axpy(&mut tmp, y, &k1, 0.5 * h);
        rhs.eval(ham, t + 0.5 * h, &tmp, &mut k2);
        axpy(&mut tmp, y, &k2, 0.5 * h);
        rhs.eval(ham, t + 0.5 * h, &tmp, &mut k3);
        axpy(&mut tmp, y, &k3, h);
        rhs.eval(ham, t + h, &tmp, &mut k4);
        let c = h / 6.0;
        for i in 0..len {
            y[i] += c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        if grid.is_snapshot(step + 1) {
            observe(grid.time(step + 1), &rho);
        }
    }
    Ok(rho)
}

fn axpy(out: &mut [C64], y: &[C64], k: &[C64], a: f64) {
    for ((o, &yi), &ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

/// Master-equation trajectory with bare-basis snapshots. Records `trace`,
/// `hermiticity` and `min_eigenvalue` at every snapshot.
pub fn evolve_master(
    ham: &dyn TimeDependentHamiltonian,
    lindblad: &LindbladSet,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<Trajectory<DensityMatrix>> {
    if !rho0.is_valid() {
        return Err(Error::InvalidParameter("initial state is not a valid density matrix".into()));
    }
    let w = ham.frame().clone();
    let rho_w = w.adjoint() * rho0.matrix() * &w;
    let mut traj = Trajectory::default();
    evolve_master_columns(ham, lindblad, rho_w, grid, |t, r| {
        let bare = DensityMatrix::new(&w * r * w.adjoint());
        traj.times.push(t);
        traj.record("trace", bare.trace());
        traj.record("hermiticity", bare.hermiticity_defect());
        traj.record("min_eigenvalue", bare.min_eigenvalue());
        traj.states.push(bare);
    })?;
    Ok(traj)
}

/// `e^{-gamma T}`.
pub fn success_probability(total_time: f64, gamma: f64) -> Result<f64> {
    if !(total_time >= 0.0 && gamma >= 0.0) {
        return Err(Error::InvalidParameter("time and decay rate must be non-negative".into()));
    }
    Ok((-gamma * total_time).exp())
}

/// Largest admissible population of `rho0` outside the heralded subspace.
pub const SUBSPACE_TOLERANCE: f64 = 1e-10;

/// Heralded factorization: `e^{-gamma t} U rho0 U^dag` on the unitary block
/// plus the decay products `rho'(t)` accumulated by trapezoidal quadrature on
/// the step grid. Snapshots are bare-basis matrices; `p_success` and
/// `leak_trace` are recorded alongside.
pub fn factorized_evolution(
    ham: &dyn TimeDependentHamiltonian,
    lindblad: &LindbladSet,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    subspace: &HeraldedSubspace,
) -> Result<Trajectory<DensityMatrix>> {
    let n = ham.dim();
    let gamma = lindblad.gamma;
    let w = ham.frame().clone();
    let rho_w = w.adjoint() * rho0.matrix() * &w;

    // unitary block as working-frame columns
    let vecs: Vec<&StateVector> = subspace.unitary.iter().collect();
    let basis = DMatrix::from_columns(&vecs.iter().map(|v| w.adjoint() * v.amplitudes()).collect::<Vec<_>>());
    let proj = &basis * basis.adjoint();
    let outside = (&rho_w - &proj * &rho_w * &proj).iter().map(|x| x.norm()).fold(0.0, f64::max);
    if outside > SUBSPACE_TOLERANCE {
        return Err(Error::OutsideSubspace(outside));
    }
    let jumps = lindblad.in_frame(&w);
    let aux_rydberg: Vec<usize> = build_basis(ham.layout())?
        .tuples()
        .iter()
        .enumerate()
        .filter(|(_, t)| t[0] == AUX_RYDBERG)
        .map(|(i, _)| i)
        .collect();
    let rho_b = basis.adjoint() * &rho_w * &basis;

    let mut traj = Trajectory::default();
    let mut leak = DMatrix::<C64>::zeros(n, n);
    let mut prev_source: Option<DMatrix<C64>> = None;
    let mut prev_t = grid.t_start;
    let h = grid.step();
    let mut hm = SparseHermitian::zeros(n);
    let mut work = ExpWorkspace::default();
    let mut u = basis.clone();

    let mut visit = |t: f64, u: &DMatrix<C64>, snapshot: bool| {
        let unitary = (&*u * &rho_b * u.adjoint()) * C64::from((-gamma * (t - grid.t_start)).exp());
        let mut source = DMatrix::<C64>::zeros(n, n);
        for l in &jumps {
            l.sandwich_add(unitary.as_slice(), source.as_mut_slice());
        }
        if let Some(p) = &prev_source {
            leak += (p + &source) * C64::from(0.5 * (t - prev_t));
        }
        prev_source = Some(source);
        prev_t = t;
        if snapshot {
            let p = unitary.trace().re;
            let lt = leak.trace().re;
            let bare = DensityMatrix::new(&w * (&unitary + &leak) * w.adjoint());
            traj.times.push(t);
            traj.record("p_success", p);
            traj.record("leak_trace", lt);
            traj.record("leak_rydberg_aux", aux_rydberg.iter().map(|&i| leak[(i, i)].re).sum());
            traj.states.push(bare);
        }
    };
    visit(grid.t_start, &u, true);
    for step in 0..grid.n_steps {
        ham.fill(grid.time(step) + 0.5 * h, &mut hm);
        hm.expm_apply(h, u.as_mut_slice(), &mut work);
        visit(grid.time(step + 1), &u, grid.is_snapshot(step + 1));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::GateSchedule;
    use crate::hamiltonians::{build_model, lindblad_ops, ModelLevel, PhysicalParams};
    use crate::hilbert::{max_abs_diff, product_ket, Dressing, Local, SystemLayout, ONE};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    /// Constant Hamiltonian on an arbitrary layout, given in working coordinates.
    struct Constant {
        layout: SystemLayout,
        frame: DMatrix<C64>,
        h: SparseHermitian,
    }

    impl TimeDependentHamiltonian for Constant {
        fn layout(&self) -> &SystemLayout {
            &self.layout
        }
        fn frame(&self) -> &DMatrix<C64> {
            &self.frame
        }
        fn total_time(&self) -> f64 {
            1.0
        }
        fn max_frequency(&self) -> f64 {
            self.h.norm_bound()
        }
        fn fill(&self, _t: f64, out: &mut SparseHermitian) {
            out.clone_from(&self.h);
        }
    }

    fn constant(h: SparseHermitian) -> Constant {
        let layout = SystemLayout::single_qubit();
        Constant { frame: DMatrix::identity(6, 6), layout, h }
    }

    fn not_params(level: ModelLevel) -> (GateSchedule, Box<dyn TimeDependentHamiltonian>) {
        let s = GateSchedule::not_gate();
        let p = PhysicalParams::preset("single-qubit-paper").unwrap();
        let m = build_model(level, &s, &p, 0.0).unwrap();
        (s, m)
    }

    #[test]
    fn grid_snapshots_are_bounded() {
        let g = TimeGrid::new(0.0, 1.0, 6_000_000).unwrap();
        assert!(g.snapshot_count() <= MAX_SNAPSHOTS);
        assert!(g.is_snapshot(g.n_steps));
        assert_eq!(g.time(g.n_steps), 1.0);
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        let small = TimeGrid::new(0.0, 2.0, 10).unwrap();
        assert_eq!(small.sampling_stride, 1);
        assert_eq!(small.snapshot_count(), 11);
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let m = constant(SparseHermitian::zeros(6));
        let tr = propagate_unitary(&m, &TimeGrid::new(0.0, 1.0, 10).unwrap()).unwrap();
        assert!(max_abs_diff(tr.last_state().unwrap().matrix(), &DMatrix::identity(6, 6)) < 1e-15);
    }

    #[test]
    fn rabi_half_period_swaps() {
        let w = 3.0;
        let mut h = SparseHermitian::zeros(6);
        h.push(0, 1, C64::from(w));
        let m = constant(h);
        let tr = propagate_unitary(&m, &TimeGrid::new(0.0, PI / (2.0 * w), 7).unwrap()).unwrap();
        let u = tr.last_state().unwrap().matrix();
        assert_abs_diff_eq!(u[(1, 0)].norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[(0, 1)].norm(), 1.0, epsilon = 1e-12);
        assert!(u[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn step_advisory_flags_coarse_grids() {
        let (_, m) = not_params(ModelLevel::L0FullLab);
        let coarse = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        assert!(step_advisory(m.as_ref(), &coarse, false).unwrap().is_some());
        assert!(matches!(step_advisory(m.as_ref(), &coarse, true), Err(Error::StepTooCoarse(_))));
        let fine = TimeGrid::new(0.0, 1.0, 200_000).unwrap();
        assert!(step_advisory(m.as_ref(), &fine, true).unwrap().is_none());
    }

    #[test]
    fn effective_not_gate_holonomy() {
        let (s, m) = not_params(ModelLevel::L2Effective);
        let tr = propagate_unitary(m.as_ref(), &TimeGrid::new(0.0, 1.0, 20_000).unwrap()).unwrap();
        let u = tr.last_state().unwrap();
        let l = SystemLayout::single_qubit();
        let rp = product_ket(&l, &[Local::R, Local::Plus], &s.dressings).unwrap();
        let rm = product_ket(&l, &[Local::R, Local::Minus], &s.dressings).unwrap();
        assert!((u.element(&rp, &rp) + ONE).norm() < 1e-6);
        assert!((u.element(&rm, &rm) - ONE).norm() < 1e-6);
        assert!(u.element(&rp, &rm).norm() < 1e-6);
        assert!(tr.observable("unitarity_defect").unwrap().iter().all(|&d| d < 1e-8));
    }

    fn random_pure_in(vectors: &[StateVector], rng: &mut impl Rng) -> DensityMatrix {
        let dim = vectors[0].dim();
        let mut psi = DVector::<C64>::zeros(dim);
        for v in vectors {
            psi += v.amplitudes() * C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let psi = StateVector::new(psi).normalized();
        DensityMatrix::from_pure(&psi)
    }

    #[test]
    fn master_without_decay_matches_unitary() {
        let (s, m) = not_params(ModelLevel::L2Effective);
        let l = SystemLayout::single_qubit();
        let lind = lindblad_ops(0.0, &l).unwrap();
        let sub = HeraldedSubspace::new(&l, &s.dressings).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rho0 = random_pure_in(&sub.unitary, &mut rng);
        let grid = TimeGrid::new(0.0, 1.0, 200_000).unwrap();
        let tr = evolve_master(m.as_ref(), &lind, &rho0, &grid).unwrap();
        let u = propagate_unitary(m.as_ref(), &grid).unwrap();
        let u = u.last_state().unwrap().matrix();
        let want = u * rho0.matrix() * u.adjoint();
        let diff = tr.last_state().unwrap().matrix() - want;
        let eig = nalgebra::SymmetricEigen::new(diff.clone() * C64::from(0.5) + diff.adjoint() * C64::from(0.5));
        let trace_distance = 0.5 * eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>();
        assert!(trace_distance <= 1e-7, "{trace_distance}");
    }

    #[test]
    fn master_snapshots_stay_physical() {
        let (_, m) = not_params(ModelLevel::L2Effective);
        let l = SystemLayout::single_qubit();
        let lind = lindblad_ops(3.0, &l).unwrap();
        let b = build_basis(&l).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::basis(6, b.index_of(&[1, 0]).unwrap()));
        let tr = evolve_master(m.as_ref(), &lind, &rho0, &TimeGrid::new(0.0, 1.0, 4000).unwrap()).unwrap();
        for i in 0..tr.len() {
            assert!((tr.observable("trace").unwrap()[i] - 1.0).abs() <= 1e-8);
            assert!(tr.observable("hermiticity").unwrap()[i] <= 1e-9);
            assert!(tr.observable("min_eigenvalue").unwrap()[i] >= -1e-9);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let (_, m) = not_params(ModelLevel::L2Effective);
        let l = SystemLayout::single_qubit();
        let lind = lindblad_ops(2.0, &l).unwrap();
        let b = build_basis(&l).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::basis(6, b.index_of(&[1, 0]).unwrap()));
        let run = |n| evolve_master(m.as_ref(), &lind, &rho0, &TimeGrid::new(0.0, 1.0, n).unwrap()).unwrap().last_state().unwrap().matrix().clone();
        let reference = run(800);
        let e1 = max_abs_diff(&run(100), &reference);
        let e2 = max_abs_diff(&run(200), &reference);
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn success_probability_examples() {
        // gamma = 1 kHz; the quoted durations are the thresholds rounded to 0.1 us
        let gamma_t = |t_us: f64| 1e3 * t_us * 1e-6;
        let threshold_us = |p: f64| -p.ln() / 1e3 * 1e6;
        assert_abs_diff_eq!(threshold_us(0.99), 10.1, epsilon = 0.05);
        assert_abs_diff_eq!(threshold_us(0.90), 105.4, epsilon = 0.05);
        assert!(success_probability(gamma_t(10.0), 1.0).unwrap() >= 0.99);
        assert!(success_probability(gamma_t(105.3), 1.0).unwrap() >= 0.90);
        assert!(success_probability(gamma_t(10.1), 1.0).unwrap() >= 0.99 - 1e-4);
        assert_eq!(success_probability(5.0, 0.0).unwrap(), 1.0);
        assert!(success_probability(-1.0, 1.0).is_err());
    }

    fn cnot_effective() -> (GateSchedule, Box<dyn TimeDependentHamiltonian>, SystemLayout) {
        let s = GateSchedule::two_qubit([0.7, PI], 1.0, 0.4, 0.3, PI / 2.0, PI, 100.0);
        let p = PhysicalParams::preset("two-qubit-paper").unwrap();
        (s.clone(), build_model(ModelLevel::L2Effective, &s, &p, 0.0).unwrap(), SystemLayout::two_qubit())
    }

    #[test]
    fn factorized_without_decay_is_unitary() {
        let (s, m, l) = cnot_effective();
        let sub = HeraldedSubspace::new(&l, &s.dressings).unwrap();
        let lind = lindblad_ops(0.0, &l).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let rho0 = random_pure_in(&sub.unitary, &mut rng);
        let grid = TimeGrid::new(0.0, 1.0, 2000).unwrap();
        let tr = factorized_evolution(m.as_ref(), &lind, &rho0, &grid, &sub).unwrap();
        let u = propagate_unitary(m.as_ref(), &grid).unwrap();
        let u = u.last_state().unwrap().matrix();
        assert!(max_abs_diff(tr.last_state().unwrap().matrix(), &(u * rho0.matrix() * u.adjoint())) < 1e-12);
        assert!(tr.observable("leak_trace").unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn factorized_trace_and_leak_support() {
        let (s, m, l) = cnot_effective();
        let sub = HeraldedSubspace::new(&l, &s.dressings).unwrap();
        let gamma = 1.7;
        let lind = lindblad_ops(gamma, &l).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let rho0 = random_pure_in(&sub.unitary, &mut rng);
        let tr = factorized_evolution(m.as_ref(), &lind, &rho0, &TimeGrid::new(0.0, 1.0, 20_000).unwrap(), &sub).unwrap();
        let leak = *tr.observable("leak_trace").unwrap().last().unwrap();
        assert_abs_diff_eq!(leak, 1.0 - (-gamma).exp(), epsilon = 1e-8);
        let p = *tr.observable("p_success").unwrap().last().unwrap();
        assert_abs_diff_eq!(p, (-gamma).exp(), epsilon = 1e-12);
        // decay products never carry |r>_0
        assert!(tr.observable("leak_rydberg_aux").unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn factorized_rejects_outside_support() {
        let (s, m, l) = cnot_effective();
        let sub = HeraldedSubspace::new(&l, &s.dressings).unwrap();
        let lind = lindblad_ops(1.0, &l).unwrap();
        let rho0 = DensityMatrix::from_pure(&sub.leak[0]);
        let r = factorized_evolution(m.as_ref(), &lind, &rho0, &TimeGrid::new(0.0, 1.0, 10).unwrap(), &sub);
        assert!(matches!(r, Err(Error::OutsideSubspace(_))));
    }

    /// Element list of the blocked master equation for a state inside one of
    /// the two single-excitation blocks `{|r+->, |0r->}` or `{|r-+>, |0-r>}`.
    /// Indices follow the Table III numbering starting at 1.
    fn block_rhs_oracle(rho: &DMatrix<C64>, w1: C64, w2: C64, gamma: f64) -> DMatrix<C64> {
        let r = |a: usize, b: usize| rho[(a - 1, b - 1)];
        let mut d = DMatrix::<C64>::zeros(12, 12);
        for a in 1..=8 {
            for b in 1..=8 {
                d[(a - 1, b - 1)] = -gamma * r(a, b);
            }
        }
        let set = |d: &mut DMatrix<C64>, a: usize, b: usize, v: C64| d[(a - 1, b - 1)] += v;
        set(&mut d, 2, 2, -I * w1 * r(6, 2) + I * w1.conj() * r(2, 6));
        set(&mut d, 2, 6, I * w1 * (r(2, 2) - r(6, 6)));
        set(&mut d, 6, 2, -I * w1.conj() * (r(2, 2) - r(6, 6)));
        set(&mut d, 6, 6, I * w1 * r(6, 2) - I * w1.conj() * r(2, 6));
        set(&mut d, 3, 3, -I * w2 * r(8, 3) + I * w2.conj() * r(3, 8));
        set(&mut d, 3, 8, I * w2 * (r(3, 3) - r(8, 8)));
        set(&mut d, 8, 3, -I * w2.conj() * (r(3, 3) - r(8, 8)));
        set(&mut d, 8, 8, I * w2 * r(8, 3) - I * w2.conj() * r(3, 8));
        let g2 = gamma / 2.0;
        d[(8, 8)] = C64::from(gamma * r(1, 1).re + g2 * (r(5, 5).re + r(7, 7).re));
        d[(9, 9)] = C64::from(gamma * r(2, 2).re + g2 * (r(6, 6).re + r(7, 7).re));
        d[(10, 10)] = C64::from(gamma * r(3, 3).re + g2 * (r(5, 5).re + r(8, 8).re));
        d[(11, 11)] = C64::from(gamma * r(4, 4).re + g2 * (r(6, 6).re + r(8, 8).re));
        d
    }

    #[test]
    fn blocked_element_list_matches_generic_rhs() {
        let s = GateSchedule::two_qubit([1.1, 2.3], 1.0, 0.4, 0.3, 1.2, -0.5, 100.0);
        let p = PhysicalParams::preset("two-qubit-paper").unwrap();
        let m = build_model(ModelLevel::L3TwoQubitRwa, &s, &p, 0.0).unwrap();
        let l = SystemLayout::two_qubit();
        let sub = HeraldedSubspace::new(&l, &s.dressings).unwrap();
        let gamma = 0.8;
        let lind = lindblad_ops(gamma, &l).unwrap();
        let mut rhs = LindbladRhs::new(m.as_ref(), &lind).unwrap();
        let drives = crate::control::EffectiveDrives::from_schedule(&s).unwrap();
        // Table III basis: unitary block then leak block, as working-frame columns
        let w = m.frame().clone();
        let phi = DMatrix::from_columns(&sub.all().map(|v| w.adjoint() * v.amplitudes()).collect::<Vec<_>>());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for (block, t) in [([2usize, 6], 0.3), ([3, 8], 0.61), ([2, 6], 0.77)] {
            let vs = [sub.unitary[block[0] - 1].clone(), sub.unitary[block[1] - 1].clone()];
            let rho = random_pure_in(&vs, &mut rng);
            let rho_w = w.adjoint() * rho.matrix() * &w;
            let mut out = vec![ZERO; 18 * 18];
            rhs.eval(m.as_ref(), t, rho_w.as_slice(), &mut out);
            let generic = phi.adjoint() * DMatrix::from_column_slice(18, 18, &out) * &phi;
            let rho_phi = phi.adjoint() * &rho_w * &phi;
            let (w1, w2) = (drives.omega_e(1, t).unwrap(), drives.omega_e(2, t).unwrap());
            let want = block_rhs_oracle(&rho_phi, w1, w2, gamma);
            assert!(max_abs_diff(&generic, &want) < 1e-12, "{}", max_abs_diff(&generic, &want));
        }
        let _ = Dressing::new(0.0, 0.0);
    }
}
