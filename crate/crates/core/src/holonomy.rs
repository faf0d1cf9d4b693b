//! Invariant eigenvectors, phase bookkeeping, gate targets and fidelities.
//!
//! On each two-level block `(|a>, |b>)` (for the single-qubit gate
//! `|a> = |0r>`, `|b> = |r+>`) the invariant is
//! `I = sin b1 sin b2 sx + sin b1 cos b2 sy + cos b1 sz` with
//! `sz = |a><a| - |b><b|`, and the block Hamiltonian is
//! `Omega_e |b><a| + h.c.`.



use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::control::{Beta2Rate, GateSchedule};
use crate::error::{Error, Result};
use crate::hilbert::{
    product_ket, projector_rydberg_aux, DensityMatrix, Dressing, Local, Operator, StateVector, SystemLayout, C64, I, ONE,
    ZERO,
};

/// Invariant and its eigenvectors at one `(beta1, beta2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantFrame {
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: [f64; 3],
    pub eigvec_plus: Vector2<C64>,
    pub eigvec_minus: Vector2<C64>,
}

impl InvariantFrame {
    pub fn new(beta1: f64, beta2: f64) -> Self {
        let (s1, c1) = beta1.sin_cos();
        let (s2, c2) = beta2.sin_cos();
        let (sh, ch) = (beta1 / 2.0).sin_cos();
        Self {
            beta1,
            beta2,
            lambda: [s1 * s2, s1 * c2, c1],
            eigvec_plus: Vector2::new(C64::from(ch), I * C64::from_polar(sh, -beta2)),
            eigvec_minus: Vector2::new(I * C64::from_polar(sh, beta2), C64::from(ch)),
        }
    }

    /// Invariant as a 2x2 matrix on the block pair.
    pub fn invariant(&self) -> Matrix2<C64> {
        let [x, y, z] = self.lambda;
        Matrix2::new(C64::from(z), C64::new(x, -y), C64::new(x, y), C64::from(-z))
    }
}

/// `Omega_e |b><a| + h.c.` on the ordered pair `(|a>, |b>)`.
pub fn block_hamiltonian(omega_e: C64) -> Matrix2<C64> {
    Matrix2::new(ZERO, omega_e.conj(), omega_e, ZERO)
}

/// Which two-level block the invariant acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    /// `(|0r>, |r+>)`
    Single,
    /// `(|0r->, |r+->)`
    TwoQubitS1,
    /// `(|0-r>, |r-+>)`
    TwoQubitS2,
}

impl Block {
    pub fn labels(self) -> [Vec<Local>; 2] {
        use Local::*;
        match self {
            Block::Single => [vec![G, R], vec![R, Plus]],
            Block::TwoQubitS1 => [vec![G, R, Minus], vec![R, Plus, Minus]],
            Block::TwoQubitS2 => [vec![G, Minus, R], vec![R, Minus, Plus]],
        }
    }

    pub fn layout(self) -> SystemLayout {
        match self {
            Block::Single => SystemLayout::single_qubit(),
            _ => SystemLayout::two_qubit(),
        }
    }
}

/// `(|phi_+>, |phi_->)` embedded in the block's layout.
pub fn invariant_eigenvectors(
    beta1: f64,
    beta2: f64,
    block: Block,
    dressings: &[Dressing],
) -> Result<(StateVector, StateVector)> {
    let f = InvariantFrame::new(beta1, beta2);
    let layout = block.layout();
    let [la, lb] = block.labels();
    let a = product_ket(&layout, &la, dressings)?;
    let b = product_ket(&layout, &lb, dressings)?;
    let embed = |v: &Vector2<C64>| &a.scaled(v[0]) + &b.scaled(v[1]);
    Ok((embed(&f.eigvec_plus), embed(&f.eigvec_minus)))
}

/// Rates of the dynamic and geometric phases of `|phi_+>` and `|phi_->`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseRates {
    pub dvartheta_plus: f64,
    pub dvartheta_minus: f64,
    pub dtheta_plus: f64,
    pub dtheta_minus: f64,
}

pub fn phase_rates(beta1: f64, rate: Beta2Rate) -> Result<PhaseRates> {
    // beta2' sin^2(beta1) / cos(beta1) = (beta2' tan beta1) sin(beta1)
    let dyn_rate = 0.5 * rate.tan_product(beta1)? * beta1.sin();
    let geo = rate.dbeta2() * (beta1 / 2.0).sin().powi(2);
    Ok(PhaseRates { dvartheta_plus: -dyn_rate, dvartheta_minus: dyn_rate, dtheta_plus: geo, dtheta_minus: -geo })
}

/// Phase series on a uniform grid. The instant `tau` appears twice, first as
/// the left limit and then, at `tau_index`, as the right limit including the
/// geometric jump `theta_s` of `Theta_-`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub times: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub vartheta_plus: Vec<f64>,
    pub vartheta_minus: Vec<f64>,
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    pub alpha_minus: Vec<f64>,
    pub tau_index: usize,
}

impl PhaseRecord {
    pub fn last(&self) -> usize {
        self.times.len() - 1
    }
}

/// Accumulate the phases along a single-drive schedule with a per-interval
/// Simpson rule; `n_steps` is rounded up to a multiple of 4.
pub fn accumulate_phases(sched: &GateSchedule, n_steps: usize) -> Result<PhaseRecord> {
    sched.validate()?;
    let n = n_steps.max(4).div_ceil(4) * 4;
    let h = sched.total_time / n as f64;
    let half = n / 2;
    let rates = |t: f64| -> PhaseRates {
        let s = sched.sample_unchecked(t);
        phase_rates(s.beta1, Beta2Rate::Schedule { dbeta2: s.dbeta2, dbeta2_tan: s.dbeta2_tan })
            .expect("schedule path is singularity free")
    };
    let mut rec = PhaseRecord {
        times: Vec::with_capacity(n + 2),
        beta1: Vec::with_capacity(n + 2),
        beta2: Vec::with_capacity(n + 2),
        vartheta_plus: Vec::with_capacity(n + 2),
        vartheta_minus: Vec::with_capacity(n + 2),
        theta_plus: Vec::with_capacity(n + 2),
        theta_minus: Vec::with_capacity(n + 2),
        alpha_minus: Vec::with_capacity(n + 2),
        tau_index: half + 1,
    };
    let (mut vt, mut th) = (0.0, 0.0);
    let push = |rec: &mut PhaseRecord, t: f64, left: bool, vt: f64, th: f64| {
        let s = if left { sched.sample_before_tau(t) } else { sched.sample_unchecked(t) };
        rec.times.push(t);
        rec.beta1.push(s.beta1);
        rec.beta2.push(s.beta2);
        rec.vartheta_plus.push(-vt);
        rec.vartheta_minus.push(vt);
        rec.theta_plus.push(-th);
        rec.theta_minus.push(th);
        rec.alpha_minus.push(vt + th);
    };
    push(&mut rec, 0.0, true, vt, th);
    let mut prev = rates(0.0);
    for i in 0..n {
        let t0 = i as f64 * h;
        let t1 = if i + 1 == n { sched.total_time } else { (i + 1) as f64 * h };
        let mid = rates(t0 + 0.5 * h);
        let next = rates(t1);
        vt += h / 6.0 * (prev.dvartheta_minus + 4.0 * mid.dvartheta_minus + next.dvartheta_minus);
        th += h / 6.0 * (prev.dtheta_minus + 4.0 * mid.dtheta_minus + next.dtheta_minus);
        prev = next;
        if i + 1 == half {
            push(&mut rec, t1, true, vt, th);
            th += sched.theta_s;
            push(&mut rec, t1, false, vt, th);
        } else {
            push(&mut rec, t1, false, vt, th);
        }
    }
    Ok(rec)
}

/// `e^{i theta_s / 2} exp(i theta_s n.sigma / 2)` on `(|0>, |1>)`.
pub fn single_gate_matrix(theta_s: f64, theta1: f64, phi1: f64) -> DMatrix<C64> {
    let d = Dressing::new(theta1, phi1);
    let u = d.unitary();
    let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::from_polar(1.0, theta_s), ONE]));
    &u * phases * u.adjoint()
}

/// Controlled rotation on `(|00>, |01>, |10>, |11>)`.
pub fn two_qubit_gate_matrix(theta_bar1: f64, theta_bar2: f64, d1: Dressing, d2: Dressing) -> DMatrix<C64> {
    let u = d1.unitary().kronecker(&d2.unitary());
    let phases = nalgebra::DVector::from_vec(vec![
        ONE,
        C64::from_polar(1.0, theta_bar1),
        C64::from_polar(1.0, theta_bar2),
        ONE,
    ]);
    &u * DMatrix::from_diagonal(&phases) * u.adjoint()
}

/// Comparator `U~` on the single-qubit layout: the gate on the `|r>_0`
/// computational sector and the identity everywhere else.
pub fn target_single_gate(theta_s: f64, theta1: f64, phi1: f64) -> Result<Operator> {
    let layout = SystemLayout::single_qubit();
    let d = [Dressing::new(theta1, phi1)];
    let rp = product_ket(&layout, &[Local::R, Local::Plus], &d)?;
    let mut m = DMatrix::identity(6, 6);
    m += rp.amplitudes() * rp.amplitudes().adjoint() * (C64::from_polar(1.0, theta_s) - ONE);
    Ok(Operator::new(m, false))
}

/// Comparator on the two-qubit layout, identity outside the `|r>_0` sector.
pub fn target_two_qubit_gate(
    theta_bar1: f64,
    theta_bar2: f64,
    theta1: f64,
    phi1: f64,
    theta2: f64,
    phi2: f64,
) -> Result<Operator> {
    let layout = SystemLayout::two_qubit();
    let d = [Dressing::new(theta1, phi1), Dressing::new(theta2, phi2)];
    let mut m = DMatrix::identity(18, 18);
    for (labels, phase) in [
        ([Local::R, Local::Plus, Local::Minus], theta_bar1),
        ([Local::R, Local::Minus, Local::Plus], theta_bar2),
    ] {
        let v = product_ket(&layout, &labels, &d)?;
        m += v.amplitudes() * v.amplitudes().adjoint() * (C64::from_polar(1.0, phase) - ONE);
    }
    Ok(Operator::new(m, false))
}

/// `[Tr(M M^dag) + |Tr M|^2] / [n (n + 1)]`
pub fn average_fidelity(m: &DMatrix<C64>, n_dim: usize) -> Result<f64> {
    if m.nrows() != n_dim || m.ncols() != n_dim || n_dim == 0 {
        return Err(Error::DimensionMismatch { expected: n_dim, found: m.nrows() });
    }
    let mm = m.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let tr = m.trace().norm_sqr();
    Ok((mm + tr) / (n_dim * (n_dim + 1)) as f64)
}

/// `M_ij = <c_i| U~^dag U |c_j>` from the target and the evolved states.
pub fn comparator(target: &DMatrix<C64>, comp: &DMatrix<C64>, evolved: &DMatrix<C64>) -> DMatrix<C64> {
    (target * comp).adjoint() * evolved
}

/// Monte-Carlo estimate of the average of `|<psi|M|psi>|^2` over uniform states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HaarEstimate {
    pub mean: f64,
    pub std_error: f64,
}

pub const HAAR_MIN_SAMPLES: usize = 10_000;

pub fn haar_average_oracle(m: &DMatrix<C64>, n_samples: usize, seed: u64) -> Result<HaarEstimate> {
    if n_samples < HAAR_MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("Haar oracle needs at least {HAAR_MIN_SAMPLES} samples")));
    }
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let n = m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = vec![ZERO; n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let mut norm = 0.0;
        for p in psi.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *p = C64::new(re, im);
            norm += p.norm_sqr();
        }
        let mut amp = ZERO;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += m[(i, j)] * psi[j];
            }
            amp += psi[i].conj() * row;
        }
        let x = amp.norm_sqr() / (norm * norm);
        sum += x;
        sum_sq += x * x;
    }
    let k = n_samples as f64;
    let mean = sum / k;
    let var = (sum_sq / k - mean * mean).max(0.0) * k / (k - 1.0);
    Ok(HaarEstimate { mean, std_error: (var / k).sqrt() })
}

/// Post-selection on the auxiliary atom being found in `|r>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeraldedMetrics {
    pub p_success: f64,
    pub fidelity_post: f64,
    pub purity_post: f64,
}

pub const HERALD_MIN_PROBABILITY: f64 = 1e-12;

/// Heralded metrics of `rho_t` against `target rho0 target^dag`.
pub fn heralded_metrics(
    rho_t: &DensityMatrix,
    target: &Operator,
    rho0: &DensityMatrix,
    layout: &SystemLayout,
) -> Result<HeraldedMetrics> {
    let pr = projector_rydberg_aux(layout)?;
    heralded_metrics_with(rho_t.matrix(), target.matrix(), rho0.matrix(), pr.matrix())
}

/// Same as [`heralded_metrics`] with an explicit herald projector, for
/// callers working in rotated coordinates.
pub fn heralded_metrics_with(
    rho_t: &DMatrix<C64>,
    target: &DMatrix<C64>,
    rho0: &DMatrix<C64>,
    pr: &DMatrix<C64>,
) -> Result<HeraldedMetrics> {
    let n = rho_t.nrows();
    for m in [target, rho0, pr] {
        if m.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
        }
    }
    let kept = pr * rho_t * pr;
    let p = kept.trace().re;
    if p < HERALD_MIN_PROBABILITY {
        return Err(Error::HeraldImpossible(p));
    }
    let ideal = target * rho0 * target.adjoint();
    let f = crate::hilbert::trace_product(&kept, &ideal).re / p;
    let purity = crate::hilbert::trace_product(&kept, &kept).re / (p * p);
    Ok(HeraldedMetrics { p_success: p, fidelity_post: f, purity_post: purity })
}
