//! Control schedules `beta1(t)`, `beta2(t)`, `chi(t)`, the effective drives
//! they imply, lab-frame laser pulses, and the systematic-error sensitivity.
//!
//! `beta1 = pi sin^2(pi t / T)` rises to `pi` at `tau = T/2` and returns to
//! zero. `beta2` is `(4 chi0 / 3) sin^3 beta1` on `[0, tau)` and shifted by
//! `-theta_s` on `[tau, T]`. The product `beta2' tan(beta1)` is always taken
//! in its removable-singularity form `4 chi0 sin^3(beta1) beta1'`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Dressing, C64};
use crate::holonomy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    SingleQubit,
    TwoQubit,
}

/// Control-parameter record from which every pulse derives.
///
/// For two-qubit gates drive `j` follows the same ansatz with `theta_s`
/// replaced by `theta_bar[j - 1]`; a drive with `theta_bar = 0` is off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub kind: GateKind,
    pub theta_s: f64,
    pub chi0: f64,
    pub dressings: Vec<Dressing>,
    pub total_time: f64,
    pub tau: f64,
    #[serde(default)]
    pub theta_bar: [f64; 2],
    #[serde(default)]
    pub omega3_tilde: f64,
}

impl GateSchedule {
    pub fn single(theta_s: f64, chi0: f64, theta1: f64, phi1: f64) -> Self {
        Self {
            kind: GateKind::SingleQubit,
            theta_s,
            chi0,
            dressings: vec![Dressing::new(theta1, phi1)],
            total_time: 1.0,
            tau: 0.5,
            theta_bar: [0.0; 2],
            omega3_tilde: 0.0,
        }
    }

    /// `(theta_s, theta1, phi1) = (pi, pi/2, pi)` with `chi0 = 1`.
    pub fn not_gate() -> Self {
        Self::single(PI, 1.0, PI / 2.0, PI)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn two_qubit(
        theta_bar: [f64; 2],
        chi0: f64,
        theta1: f64,
        phi1: f64,
        theta2: f64,
        phi2: f64,
        omega3_tilde: f64,
    ) -> Self {
        Self {
            kind: GateKind::TwoQubit,
            theta_s: 0.0,
            chi0,
            dressings: vec![Dressing::new(theta1, phi1), Dressing::new(theta2, phi2)],
            total_time: 1.0,
            tau: 0.5,
            theta_bar,
            omega3_tilde,
        }
    }

    /// `pi (0, 1, 0, 0, 1/2, 1)` with `chi0 = 1` and `omega3 = 100 / T`.
    pub fn cnot() -> Self {
        Self::two_qubit([0.0, PI], 1.0, 0.0, 0.0, PI / 2.0, PI, 100.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta_s, self.chi0, self.total_time, self.tau, self.omega3_tilde]
            .iter()
            .chain(self.theta_bar.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("schedule parameters must be finite".into()));
        }
        if self.total_time <= 0.0 {
            return Err(Error::InvalidParameter("total time must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < self.total_time) {
            return Err(Error::InvalidParameter("tau must lie strictly inside (0, T)".into()));
        }
        if (self.tau - self.total_time / 2.0).abs() > 1e-12 * self.total_time {
            return Err(Error::InvalidParameter("the sin^2 ansatz peaks at tau = T/2".into()));
        }
        let want = match self.kind {
            GateKind::SingleQubit => 1,
            GateKind::TwoQubit => 2,
        };
        if self.dressings.len() != want {
            return Err(Error::DimensionMismatch { expected: want, found: self.dressings.len() });
        }
        if self.omega3_tilde < 0.0 {
            return Err(Error::NegativeEnvelope(self.omega3_tilde));
        }
        Ok(())
    }

    /// Single-drive schedule followed by drive `j` (1 or 2); `None` if off.
    pub fn drive_schedule(&self, j: usize) -> Option<GateSchedule> {
        match self.kind {
            GateKind::SingleQubit => (j == 1).then(|| self.clone()),
            GateKind::TwoQubit => {
                let theta = *self.theta_bar.get(j.checked_sub(1)?)?;
                (theta != 0.0).then(|| Self {
                    kind: GateKind::SingleQubit,
                    theta_s: theta,
                    dressings: vec![self.dressings[j - 1]],
                    theta_bar: [0.0; 2],
                    omega3_tilde: 0.0,
                    ..self.clone()
                })
            }
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_finite() && (0.0..=self.total_time).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, total: self.total_time })
        }
    }

    pub fn sample(&self, t: f64) -> Result<ScheduleSample> {
        self.check_time(t)?;
        Ok(self.sample_unchecked(t))
    }

    pub(crate) fn sample_unchecked(&self, t: f64) -> ScheduleSample {
        let w = PI / self.total_time;
        let s = (w * t).sin();
        let beta1 = PI * s * s;
        let dbeta1 = PI * w * (2.0 * w * t).sin();
        let (sb, cb) = beta1.sin_cos();
        let after = t >= self.tau;
        let shift = if after { self.theta_s } else { 0.0 };
        let beta2 = 4.0 * self.chi0 / 3.0 * sb.powi(3) - shift;
        let dbeta2 = 4.0 * self.chi0 * sb * sb * cb * dbeta1;
        let dbeta2_tan = 4.0 * self.chi0 * sb.powi(3) * dbeta1;
        let chi = self.chi0 * (2.0 * beta1 - (2.0 * beta1).sin()) + shift;
        ScheduleSample { t, beta1, dbeta1, beta2, dbeta2, dbeta2_tan, chi }
    }

    /// `(omega_x, omega_y)` at `t` on the singularity-free path.
    pub fn controls(&self, t: f64) -> Result<(f64, f64)> {
        let s = self.sample(t)?;
        reverse_controls(s.beta1, s.dbeta1, s.beta2, Beta2Rate::Schedule { dbeta2: s.dbeta2, dbeta2_tan: s.dbeta2_tan })
    }

    pub(crate) fn drive_unchecked(&self, t: f64) -> C64 {
        let s = self.sample_unchecked(t);
        let (sin2, cos2) = s.beta2.sin_cos();
        C64::new(
            0.5 * (s.dbeta2_tan * sin2 - s.dbeta1 * cos2),
            0.5 * (s.dbeta2_tan * cos2 + s.dbeta1 * sin2),
        )
    }
}

/// Schedule quantities at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleSample {
    pub t: f64,
    pub beta1: f64,
    pub dbeta1: f64,
    pub beta2: f64,
    pub dbeta2: f64,
    /// `beta2' tan(beta1)`, finite everywhere.
    pub dbeta2_tan: f64,
    pub chi: f64,
}

pub fn beta1(t: f64, sched: &GateSchedule) -> Result<f64> {
    Ok(sched.sample(t)?.beta1)
}

pub fn beta2(t: f64, sched: &GateSchedule) -> Result<f64> {
    Ok(sched.sample(t)?.beta2)
}

pub fn chi(t: f64, sched: &GateSchedule) -> Result<f64> {
    Ok(sched.sample(t)?.chi)
}

/// How the `beta2` rate enters expressions containing `tan(beta1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta2Rate {
    /// Bare `beta2'`; the tangent is evaluated directly.
    Raw(f64),
    /// `beta2'` together with the precomputed product `beta2' tan(beta1)`.
    Schedule { dbeta2: f64, dbeta2_tan: f64 },
}

/// Smallest `|cos beta1|` accepted on the raw tangent path.
pub const TANGENT_GUARD: f64 = 1e-9;

impl Beta2Rate {
    pub fn dbeta2(&self) -> f64 {
        match *self {
            Beta2Rate::Raw(d) => d,
            Beta2Rate::Schedule { dbeta2, .. } => dbeta2,
        }
    }

    /// `beta2' tan(beta1)`
    pub fn tan_product(&self, beta1: f64) -> Result<f64> {
        match *self {
            Beta2Rate::Raw(d) => {
                let c = beta1.cos();
                if c.abs() < TANGENT_GUARD {
                    Err(Error::SingularTangent)
                } else {
                    Ok(d * beta1.sin() / c)
                }
            }
            Beta2Rate::Schedule { dbeta2_tan, .. } => Ok(dbeta2_tan),
        }
    }
}

/// Invert the invariant condition for the effective drive components.
pub fn reverse_controls(beta1: f64, dbeta1: f64, beta2: f64, rate: Beta2Rate) -> Result<(f64, f64)> {
    if ![beta1, dbeta1, beta2, rate.dbeta2()].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter("control inputs must be finite".into()));
    }
    let p = rate.tan_product(beta1)?;
    let (s2, c2) = beta2.sin_cos();
    Ok((0.5 * (p * s2 - dbeta1 * c2), 0.5 * (p * c2 + dbeta1 * s2)))
}

/// Polar form `(envelope, phase)` of `omega_x + i omega_y`; phase 0 at zero.
pub fn effective_drive(omega_x: f64, omega_y: f64) -> (f64, f64) {
    let r = omega_x.hypot(omega_y);
    if r == 0.0 {
        (0.0, 0.0)
    } else {
        (r, omega_y.atan2(omega_x))
    }
}

/// Remove `2 pi` jumps from a phase series.
pub fn unwrap_phases(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let d = phases[i] - phases[i - 1];
        phases[i] -= (d / (2.0 * PI)).round() * 2.0 * PI;
    }
}

/// Effective drives `Omega_e_k = Omega~_k e^{i mu_k}` and the constant `Omega~_3`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveDrives {
    drives: [Option<GateSchedule>; 2],
    omega3_tilde: f64,
    total_time: f64,
    tau: f64,
}

impl EffectiveDrives {
    pub fn from_schedule(sched: &GateSchedule) -> Result<Self> {
        sched.validate()?;
        Ok(Self {
            drives: [sched.drive_schedule(1), sched.drive_schedule(2)],
            omega3_tilde: sched.omega3_tilde,
            total_time: sched.total_time,
            tau: sched.tau,
        })
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn is_active(&self, k: usize) -> bool {
        matches!(self.drives.get(k.wrapping_sub(1)), Some(Some(_)))
    }

    /// `Omega_e_k(t)` for `k` in `{1, 2}`; zero for an inactive drive.
    pub fn omega_e(&self, k: usize, t: f64) -> Result<C64> {
        if !(1..=2).contains(&k) {
            return Err(Error::InvalidAtom(k));
        }
        match &self.drives[k - 1] {
            Some(s) => {
                s.check_time(t)?;
                Ok(s.drive_unchecked(t))
            }
            None => Ok(C64::new(0.0, 0.0)),
        }
    }

    pub(crate) fn omega_e_unchecked(&self, k: usize, t: f64) -> C64 {
        match &self.drives[k - 1] {
            Some(s) => s.drive_unchecked(t),
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn omega3_tilde(&self) -> f64 {
        self.omega3_tilde
    }

    /// `(Omega~_k, mu_k)` sampled at `times`, with `mu_k` unwrapped separately
    /// on `[0, tau)` and `[tau, T]`.
    pub fn polar_series(&self, k: usize, times: &[f64]) -> Result<Vec<(f64, f64)>> {
        let mut env = Vec::with_capacity(times.len());
        let mut mu = Vec::with_capacity(times.len());
        for &t in times {
            let w = self.omega_e(k, t)?;
            let (e, m) = effective_drive(w.re, w.im);
            env.push(e);
            mu.push(m);
        }
        let split = times.iter().position(|&t| t >= self.tau).unwrap_or(times.len());
        let (a, b) = mu.split_at_mut(split);
        unwrap_phases(a);
        unwrap_phases(b);
        Ok(env.into_iter().zip(mu).collect())
    }
}

/// Lab-frame detunings `Delta_1, Delta_2, Delta_3` in `1/T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detunings {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl Detunings {
    pub fn get(&self, k: usize) -> f64 {
        match k {
            1 => self.delta1,
            2 => self.delta2,
            _ => self.delta3,
        }
    }
}

/// Complex Rabi frequencies of one instant in the primed/unprimed convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiFrequencies {
    /// `Omega_k`, `Omega_k'` for `k = 1, 2`.
    pub omega: [(C64, C64); 2],
    /// `Omega_0k`, `Omega_0k'`.
    pub omega0: [(C64, C64); 2],
    /// `Omega_13`, `Omega_13'`.
    pub omega13: (C64, C64),
    /// `Omega_23`, `Omega_23'`.
    pub omega23: (C64, C64),
}

/// Real envelopes and phases of the lab-frame lasers at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSample {
    pub omega_bar: [f64; 2],
    pub omega_bar_0: [f64; 2],
    /// `Omega-_13`, `Omega-_23`.
    pub omega_bar_3: [f64; 2],
    pub mu: [f64; 2],
    pub mu_prime: [f64; 2],
    pub mu3: f64,
    pub mu3_prime: f64,
}

/// Lab-frame lasers under the equal-split rule, with all Rabi amplitudes
/// multiplied by `amplitude_scale = 1 + epsilon`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaserPulseSet {
    drives: EffectiveDrives,
    detunings: Detunings,
    amplitude_scale: f64,
}

/// How the drive product `Omega~ Delta / 2` is split between the two lasers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    #[default]
    Equal,
}

pub fn lab_pulses(drives: &EffectiveDrives, detunings: Detunings, split: SplitRule) -> Result<LaserPulseSet> {
    let SplitRule::Equal = split;
    for k in 1..=3 {
        let d = detunings.get(k);
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!("detuning Delta_{k} must be positive")));
        }
    }
    if drives.omega3_tilde < 0.0 {
        return Err(Error::NegativeEnvelope(drives.omega3_tilde));
    }
    Ok(LaserPulseSet { drives: drives.clone(), detunings, amplitude_scale: 1.0 })
}

impl LaserPulseSet {
    /// Copy with every Rabi amplitude scaled by `1 + epsilon`.
    pub fn with_error(&self, epsilon: f64) -> Self {
        Self { amplitude_scale: 1.0 + epsilon, ..self.clone() }
    }

    pub fn drives(&self) -> &EffectiveDrives {
        &self.drives
    }

    pub fn detunings(&self) -> Detunings {
        self.detunings
    }

    pub fn amplitude_scale(&self) -> f64 {
        self.amplitude_scale
    }

    pub fn total_time(&self) -> f64 {
        self.drives.total_time
    }

    /// `Omega-_k e^{i mu_k}` (equal to `Omega-_0k e^{i mu_k}`) for `k = 1, 2`.
    pub(crate) fn phased_amplitude(&self, k: usize, t: f64) -> C64 {
        let w = self.drives.omega_e_unchecked(k, t);
        let r = w.norm();
        if r == 0.0 {
            return C64::new(0.0, 0.0);
        }
        w * (self.amplitude_scale * (self.detunings.get(k) / (2.0 * r)).sqrt())
    }

    /// `Omega-_13 = Omega-_23`.
    pub(crate) fn pair3_amplitude(&self) -> f64 {
        self.amplitude_scale * (self.drives.omega3_tilde * self.detunings.delta3 / 2.0).sqrt()
    }

    pub fn sample(&self, t: f64) -> Result<PulseSample> {
        let mut out = PulseSample {
            omega_bar: [0.0; 2],
            omega_bar_0: [0.0; 2],
            omega_bar_3: [self.pair3_amplitude(); 2],
            mu: [0.0; 2],
            mu_prime: [-PI; 2],
            mu3: 0.0,
            mu3_prime: -PI,
        };
        for k in 1..=2 {
            let w = self.drives.omega_e(k, t)?;
            let (env, mu) = effective_drive(w.re, w.im);
            let bar = self.amplitude_scale * (env * self.detunings.get(k) / 2.0).sqrt();
            out.omega_bar[k - 1] = bar;
            out.omega_bar_0[k - 1] = bar;
            out.mu[k - 1] = mu;
            out.mu_prime[k - 1] = mu - PI;
        }
        Ok(out)
    }

    pub fn rabi(&self, t: f64) -> Result<RabiFrequencies> {
        let p = self.sample(t)?;
        let pol = |a: f64, ph: f64| C64::from_polar(a, ph);
        let omega = [0, 1].map(|i| (pol(p.omega_bar[i], p.mu[i]), pol(p.omega_bar[i], p.mu_prime[i])));
        let omega0 = [0, 1].map(|i| (C64::from(-p.omega_bar_0[i]), C64::from(-p.omega_bar_0[i])));
        Ok(RabiFrequencies {
            omega,
            omega0,
            omega13: (pol(p.omega_bar_3[0], p.mu3), pol(p.omega_bar_3[0], p.mu3_prime)),
            omega23: (C64::from(-p.omega_bar_3[1]), C64::from(-p.omega_bar_3[1])),
        })
    }
}

/// Second-order effective couplings `(Omega_e1, Omega_e2, Omega_e3)` from the
/// lab-frame Rabi frequencies.
pub fn effective_from_rabi(r: &RabiFrequencies, d: Detunings) -> [C64; 3] {
    let pair = |(a, ap): (C64, C64), (b, bp): (C64, C64), delta: f64| (ap * bp.conj() - a * b.conj()) / delta;
    [
        pair(r.omega[0], r.omega0[0], d.delta1),
        pair(r.omega[1], r.omega0[1], d.delta2),
        pair(r.omega13, r.omega23, d.delta3),
    ]
}

/// `Q_s` from both integrands over the same grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QsReport {
    /// `|int e^{2i alpha_-} <phi_+|H_s|phi_-> dt|^2` with phases from quadrature.
    pub perturbative: f64,
    /// `|int e^{i chi} beta1' sin^2(beta1) dt|^2`.
    pub printed: f64,
}

/// Composite Simpson on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2) + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

pub const QS_MIN_STEPS: usize = 10_000;

/// Systematic-error sensitivity from the first-order perturbation integral.
pub fn systematic_error_sensitivity(sched: &GateSchedule, n_steps: usize) -> Result<f64> {
    Ok(qs_report(sched, n_steps)?.perturbative)
}

pub fn qs_report(sched: &GateSchedule, n_steps: usize) -> Result<QsReport> {
    sched.validate()?;
    if n_steps < QS_MIN_STEPS {
        return Err(Error::InvalidParameter(format!("Q_s quadrature needs at least {QS_MIN_STEPS} steps")));
    }
    let single = sched.drive_schedule(1).unwrap_or_else(|| GateSchedule {
        kind: GateKind::SingleQubit,
        dressings: vec![Dressing::default()],
        ..sched.clone()
    });
    let record = holonomy::accumulate_phases(&single, n_steps)?;
    let times = &record.times;
    let h = times[1] - times[0];
    // the record carries both one-sided limits at tau; integrate each half
    let split = record.tau_index;
    let pert = |i: usize| -> C64 {
        let t = times[i];
        let s = single.sample_unchecked(t);
        let s = if i >= split { s } else { single.sample_before_tau(t) };
        let frame = holonomy::InvariantFrame::new(s.beta1, s.beta2);
        let hs = holonomy::block_hamiltonian(single.drive_unchecked(t));
        let amp = frame.eigvec_plus.dotc(&(hs * frame.eigvec_minus));
        C64::from_polar(1.0, 2.0 * record.alpha_minus[i]) * amp
    };
    let printed = |i: usize| -> C64 {
        let t = times[i];
        let s = if i >= split { single.sample_unchecked(t) } else { single.sample_before_tau(t) };
        C64::from_polar(s.dbeta1 * s.beta1.sin().powi(2), s.chi)
    };
    let integrate = |f: &dyn Fn(usize) -> C64| -> C64 {
        let half = |lo: usize, hi: usize| -> C64 {
            let n = hi - lo;
            let mut acc = f(lo) + f(hi);
            for i in 1..n {
                acc += f(lo + i) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * (h / 3.0)
        };
        half(0, split - 1) + half(split, times.len() - 1)
    };
    Ok(QsReport { perturbative: integrate(&pert).norm_sqr(), printed: integrate(&printed).norm_sqr() })
}

impl GateSchedule {
    /// Left limit at `t` (pre-jump branch), valid for `t <= tau`.
    pub(crate) fn sample_before_tau(&self, t: f64) -> ScheduleSample {
        let mut s = self.sample_unchecked(t);
        if t >= self.tau {
            s.beta2 += self.theta_s;
            s.chi -= self.theta_s;
        }
        s
    }
}

/// `sin^2(chi0 pi) sin^2(theta_s / 2) / chi0^2`, with the `chi0 -> 0` limit.
pub fn qs_closed_form(chi0: f64, theta_s: f64) -> f64 {
    let s = (theta_s / 2.0).sin().powi(2);
    if chi0.abs() < 1e-8 {
        PI * PI * s
    } else {
        (chi0 * PI).sin().powi(2) * s / (chi0 * chi0)
    }
}
