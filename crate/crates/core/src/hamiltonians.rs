//! Model hierarchy, decay channels and unit conversions.
//!
//! Every model writes its Hamiltonian in working-frame coordinates (see
//! [`working_frame`]); `bare` converts back to the lab product basis.
//!
//! * L0: lab-frame couplings with `e^{+-i Delta t}` sidebands plus `V` per
//!   Rydberg pair, optionally with an additive Stark counter-term.
//! * L1: the same couplings in the frame rotating with the interaction, with
//!   every coupling into a multiply excited state removed.
//! * L2: second-order effective couplings between Table III states.
//! * L3: L2 without `H_e0` and `H_e3`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::control::{lab_pulses, Detunings, EffectiveDrives, GateSchedule, LaserPulseSet, SplitRule};
use crate::error::{Error, Result};
use crate::hilbert::{
    build_basis, working_frame, Basis, Dressing, Operator, SystemLayout, AUX_GROUND, AUX_RYDBERG, C64, COMP_RYDBERG, I,
    ZERO,
};
use crate::sparse::{SparseHermitian, SparseOp};

/// `2 pi x 50 MHz` in rad/s.
pub const DEFAULT_V_PHYS: f64 = 2.0 * PI * 50e6;

/// Working-frame level of `|+>` and `|->` on a computational atom.
const PLUS: usize = 0;
const MINUS: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelLevel {
    #[serde(rename = "L0")]
    L0FullLab,
    #[serde(rename = "L1")]
    L1BlockadeFrame,
    #[serde(rename = "L2")]
    L2Effective,
    #[serde(rename = "L3")]
    L3TwoQubitRwa,
}

impl ModelLevel {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L0" | "FULL" | "FULL-LAB" => Ok(Self::L0FullLab),
            "L1" | "BLOCKADE" | "BLOCKADE-FRAME" => Ok(Self::L1BlockadeFrame),
            "L2" | "EFFECTIVE" => Ok(Self::L2Effective),
            "L3" | "RWA" | "TWO-QUBIT-RWA" => Ok(Self::L3TwoQubitRwa),
            other => Err(Error::Config(format!("unknown model level `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::L0FullLab => "L0",
            Self::L1BlockadeFrame => "L1",
            Self::L2Effective => "L2",
            Self::L3TwoQubitRwa => "L3",
        }
    }
}

/// Interaction, detunings and decay in units of `1/T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub v: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub gamma: f64,
    pub stark_compensation: bool,
    /// Fraction of the second-order Stark shift cancelled by the counter-term.
    #[serde(default = "one")]
    pub stark_strength: f64,
    pub model_level: ModelLevel,
}

fn one() -> f64 {
    1.0
}

impl PhysicalParams {
    /// Named parameter sets.
    ///
    /// `single-qubit-paper`: `V = 7200`, `Delta_1 = 360`, half-strength Stark
    /// counter-term. `two-qubit-paper`: `V = 27000`, `Delta_2 = 360`,
    /// `Delta_3 = 1500`, full counter-term; `Delta_1 = 900` is used only when
    /// drive 1 is on.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "single-qubit-paper" => Ok(Self {
                v: 7200.0,
                delta1: 360.0,
                delta2: 360.0,
                delta3: 1500.0,
                gamma: 0.0,
                stark_compensation: true,
                stark_strength: 0.5,
                model_level: ModelLevel::L0FullLab,
            }),
            "two-qubit-paper" => Ok(Self {
                v: 27000.0,
                delta1: 900.0,
                delta2: 360.0,
                delta3: 1500.0,
                gamma: 0.0,
                stark_compensation: true,
                stark_strength: 1.0,
                model_level: ModelLevel::L0FullLab,
            }),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn detunings(&self) -> Detunings {
        Detunings { delta1: self.delta1, delta2: self.delta2, delta3: self.delta3 }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.v, self.delta1, self.delta2, self.delta3, self.gamma, self.stark_strength];
        if !vals.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("physical parameters must be finite".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter("gamma must be non-negative".into()));
        }
        if self.v <= 0.0 || [self.delta1, self.delta2, self.delta3].iter().any(|&d| d <= 0.0) {
            return Err(Error::InvalidParameter("V and all detunings must be positive".into()));
        }
        Ok(())
    }

    /// Coefficient of the Stark counter-term per unit `Omega-^2`, or zero when off.
    fn stark_factor(&self, delta: f64) -> Result<f64> {
        if !self.stark_compensation {
            return Ok(0.0);
        }
        let den = self.v * self.v - delta * delta;
        if den == 0.0 {
            return Err(Error::InvalidParameter("Stark shift has a pole at V = Delta".into()));
        }
        Ok(self.stark_strength * 2.0 * self.v / den)
    }
}

/// Time-dependent Hamiltonian evaluated in working-frame coordinates.
pub trait TimeDependentHamiltonian: Send + Sync {
    fn layout(&self) -> &SystemLayout;
    /// Columns are the working basis vectors in bare coordinates.
    fn frame(&self) -> &DMatrix<C64>;
    fn total_time(&self) -> f64;
    /// Largest angular frequency in the dynamics, for step-size advisories.
    fn max_frequency(&self) -> f64;
    /// Overwrite `out` with `H(t)`.
    fn fill(&self, t: f64, out: &mut SparseHermitian);

    fn dim(&self) -> usize {
        self.layout().total_dim()
    }

    fn working(&self, t: f64) -> Operator {
        let mut h = SparseHermitian::zeros(self.dim());
        self.fill(t, &mut h);
        Operator::new(h.to_dense(), true)
    }

    fn bare(&self, t: f64) -> Operator {
        let w = self.frame();
        Operator::new(w * self.working(t).matrix() * w.adjoint(), true)
    }
}

/// Index helper over working-frame tuples.
#[derive(Clone, Debug)]
struct Index {
    basis: Basis,
}

impl Index {
    fn new(layout: &SystemLayout) -> Result<Self> {
        Ok(Self { basis: build_basis(layout)? })
    }

    fn of(&self, tuple: &[usize]) -> usize {
        self.basis.index_of(tuple).expect("tuple built from layout")
    }

    fn tuples(&self) -> Vec<Vec<usize>> {
        self.basis.tuples()
    }
}

fn rydberg_count(tuple: &[usize]) -> usize {
    tuple
        .iter()
        .enumerate()
        .filter(|&(a, &l)| if a == 0 { l == AUX_RYDBERG } else { l == COMP_RYDBERG })
        .count()
}

fn is_rydberg(atom: usize, level: usize) -> bool {
    if atom == 0 {
        level == AUX_RYDBERG
    } else {
        level == COMP_RYDBERG
    }
}

/// Laser source of a coupling; fixes its amplitude and time dependence.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Laser {
    /// Atom `k` driven `|+>_k <-> |r>_k` at `Delta_k`.
    Atom(usize),
    /// Atom 0 driven `|g> <-> |r>` at `Delta_k`.
    Aux(usize),
    /// Atom 1 of the `Delta_3` pair.
    Pair13,
    /// Atom 2 of the `Delta_3` pair.
    Pair23,
}

impl Laser {
    fn atom(self) -> usize {
        match self {
            Laser::Atom(k) => k,
            Laser::Aux(_) => 0,
            Laser::Pair13 => 1,
            Laser::Pair23 => 2,
        }
    }

    fn lower(self) -> usize {
        if self.atom() == 0 {
            AUX_GROUND
        } else {
            PLUS
        }
    }

    fn upper(self) -> usize {
        if self.atom() == 0 {
            AUX_RYDBERG
        } else {
            COMP_RYDBERG
        }
    }
}

#[derive(Clone, Debug)]
struct LaserTerm {
    laser: Laser,
    delta: f64,
    /// `(lower state, upper state)` working indices.
    pairs: Vec<(usize, usize)>,
    /// States receiving the Stark counter-term and its per-`Omega-^2` factor.
    stark: Vec<usize>,
    stark_factor: f64,
}

/// Shared construction of the lab-frame couplings for L0 and L1.
#[derive(Clone, Debug)]
struct LabCouplings {
    layout: SystemLayout,
    frame: DMatrix<C64>,
    pulses: LaserPulseSet,
    terms: Vec<LaserTerm>,
    interaction: Vec<f64>,
    max_frequency: f64,
}

impl LabCouplings {
    fn new(
        pulses: &LaserPulseSet,
        params: &PhysicalParams,
        layout: &SystemLayout,
        dressings: &[Dressing],
        blockade_frame: bool,
    ) -> Result<Self> {
        params.validate()?;
        layout.require_physical()?;
        let frame = working_frame(layout, dressings)?;
        let idx = Index::new(layout)?;
        let n_comp = layout.n_computational();
        let drives = pulses.drives();
        let det = params.detunings();

        let mut lasers = Vec::new();
        for k in 1..=n_comp {
            if drives.is_active(k) {
                lasers.push((Laser::Atom(k), det.get(k)));
                lasers.push((Laser::Aux(k), det.get(k)));
            }
        }
        if n_comp == 2 && drives.omega3_tilde() > 0.0 {
            lasers.push((Laser::Pair13, det.delta3));
            lasers.push((Laser::Pair23, det.delta3));
        }

        let tuples = idx.tuples();
        let mut terms = Vec::new();
        for (laser, delta) in lasers {
            let a = laser.atom();
            let mut pairs = Vec::new();
            for t in &tuples {
                if t[a] != laser.lower() {
                    continue;
                }
                let mut up = t.clone();
                up[a] = laser.upper();
                if blockade_frame && (rydberg_count(t) > 1 || rydberg_count(&up) > 1) {
                    continue;
                }
                pairs.push((idx.of(t), idx.of(&up)));
            }
            let (stark, stark_factor) = if blockade_frame {
                (Vec::new(), 0.0)
            } else {
                let states = tuples
                    .iter()
                    .filter(|t| {
                        t[a] == laser.lower()
                            && t.iter().enumerate().filter(|&(b, &l)| b != a && is_rydberg(b, l)).count() == 1
                    })
                    .map(|t| idx.of(t))
                    .collect();
                (states, params.stark_factor(delta)?)
            };
            terms.push(LaserTerm { laser, delta, pairs, stark, stark_factor });
        }

        let interaction = if blockade_frame {
            vec![0.0; layout.total_dim()]
        } else {
            tuples
                .iter()
                .map(|t| {
                    let r = rydberg_count(t) as f64;
                    params.v * r * (r - 1.0) / 2.0
                })
                .collect()
        };
        let max_delta = terms.iter().map(|t| t.delta).fold(0.0, f64::max);
        let max_frequency = if blockade_frame { max_delta } else { params.v + max_delta };
        Ok(Self { layout: layout.clone(), frame, pulses: pulses.clone(), terms, interaction, max_frequency })
    }

    fn fill(&self, t: f64, out: &mut SparseHermitian) {
        out.clear();
        out.diag.copy_from_slice(&self.interaction);
        let pair3 = self.pulses.pair3_amplitude();
        let mut amps = [ZERO; 2];
        for (k, a) in amps.iter_mut().enumerate() {
            if self.pulses.drives().is_active(k + 1) {
                *a = self.pulses.phased_amplitude(k + 1, t);
            }
        }
        for term in &self.terms {
            let (s, c) = (term.delta * t).sin_cos();
            let (coef, bar) = match term.laser {
                Laser::Atom(k) => (I * amps[k - 1] * (2.0 * s), amps[k - 1].norm()),
                Laser::Aux(k) => (C64::from(-2.0 * c * amps[k - 1].norm()), amps[k - 1].norm()),
                Laser::Pair13 => (I * (2.0 * s * pair3), pair3),
                Laser::Pair23 => (C64::from(-2.0 * c * pair3), pair3),
            };
            for &(lo, up) in &term.pairs {
                out.push(lo, up, coef);
            }
            let shift = term.stark_factor * bar * bar;
            for &i in &term.stark {
                out.diag[i] += shift;
            }
        }
    }
}

/// L0: full lab-frame Hamiltonian.
#[derive(Clone, Debug)]
pub struct FullLabModel(LabCouplings);

impl FullLabModel {
    pub fn new(pulses: &LaserPulseSet, params: &PhysicalParams, layout: &SystemLayout, dressings: &[Dressing]) -> Result<Self> {
        Ok(Self(LabCouplings::new(pulses, params, layout, dressings, false)?))
    }
}

/// L1: lab couplings in the interaction frame with blockaded states removed.
#[derive(Clone, Debug)]
pub struct BlockadeFrameModel(LabCouplings);

impl BlockadeFrameModel {
    pub fn new(pulses: &LaserPulseSet, params: &PhysicalParams, layout: &SystemLayout, dressings: &[Dressing]) -> Result<Self> {
        Ok(Self(LabCouplings::new(pulses, params, layout, dressings, true)?))
    }
}

macro_rules! lab_model_impl {
    ($ty:ty) => {
        impl TimeDependentHamiltonian for $ty {
            fn layout(&self) -> &SystemLayout {
                &self.0.layout
            }
            fn frame(&self) -> &DMatrix<C64> {
                &self.0.frame
            }
            fn total_time(&self) -> f64 {
                self.0.pulses.total_time()
            }
            fn max_frequency(&self) -> f64 {
                self.0.max_frequency
            }
            fn fill(&self, t: f64, out: &mut SparseHermitian) {
                self.0.fill(t, out)
            }
        }
    };
}

lab_model_impl!(FullLabModel);
lab_model_impl!(BlockadeFrameModel);

/// Which effective couplings are kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EffectiveKind {
    Full,
    Rwa,
}

/// L2 and L3 effective models, scaled by `1 + epsilon_effective`.
#[derive(Clone, Debug)]
pub struct EffectiveModel {
    layout: SystemLayout,
    frame: DMatrix<C64>,
    drives: EffectiveDrives,
    scale: f64,
    /// `(drive, upper, lower)`: `Omega_e_drive |upper><lower|`; drive 3 is constant.
    links: Vec<(usize, usize, usize)>,
}

impl EffectiveModel {
    fn build(drives: &EffectiveDrives, layout: &SystemLayout, dressings: &[Dressing], scale: f64, kind: EffectiveKind) -> Result<Self> {
        layout.require_physical()?;
        let frame = working_frame(layout, dressings)?;
        let idx = Index::new(layout)?;
        let (g, r) = (AUX_GROUND, AUX_RYDBERG);
        let cr = COMP_RYDBERG;
        let mut links = Vec::new();
        if layout.n_computational() == 1 {
            if kind == EffectiveKind::Rwa {
                return Err(Error::UnsupportedLayout("the two-qubit RWA model needs three atoms".into()));
            }
            links.push((1, idx.of(&[r, PLUS]), idx.of(&[g, cr])));
        } else {
            if kind == EffectiveKind::Full {
                links.push((1, idx.of(&[r, PLUS, PLUS]), idx.of(&[g, cr, PLUS])));
                links.push((2, idx.of(&[r, PLUS, PLUS]), idx.of(&[g, PLUS, cr])));
                links.push((3, idx.of(&[g, cr, PLUS]), idx.of(&[g, PLUS, cr])));
            }
            links.push((1, idx.of(&[r, PLUS, MINUS]), idx.of(&[g, cr, MINUS])));
            links.push((2, idx.of(&[r, MINUS, PLUS]), idx.of(&[g, MINUS, cr])));
        }
        Ok(Self { layout: layout.clone(), frame, drives: drives.clone(), scale, links })
    }

    /// Second-order effective model on the Table III states.
    pub fn effective(drives: &EffectiveDrives, layout: &SystemLayout, dressings: &[Dressing], epsilon_effective: f64) -> Result<Self> {
        Self::build(drives, layout, dressings, 1.0 + epsilon_effective, EffectiveKind::Full)
    }

    /// Two-qubit model keeping only the `S_1` and `S_2` couplings.
    pub fn two_qubit_rwa(drives: &EffectiveDrives, layout: &SystemLayout, dressings: &[Dressing], epsilon_effective: f64) -> Result<Self> {
        if drives.omega3_tilde() < 10.0 * max_envelope(drives)? {
            // advisory only: the rotating-wave reduction assumes a dominant Omega~_3
        }
        Self::build(drives, layout, dressings, 1.0 + epsilon_effective, EffectiveKind::Rwa)
    }
}

/// Largest `Omega~_k(t)` over a fine grid.
pub fn max_envelope(drives: &EffectiveDrives) -> Result<f64> {
    let n = 4000;
    let mut m: f64 = 0.0;
    for k in 1..=2 {
        for i in 0..=n {
            m = m.max(drives.omega_e(k, drives.total_time() * i as f64 / n as f64)?.norm());
        }
    }
    Ok(m)
}

impl TimeDependentHamiltonian for EffectiveModel {
    fn layout(&self) -> &SystemLayout {
        &self.layout
    }
    fn frame(&self) -> &DMatrix<C64> {
        &self.frame
    }
    fn total_time(&self) -> f64 {
        self.drives.total_time()
    }
    fn max_frequency(&self) -> f64 {
        // envelope peak of the designed pulses stays near 20/T; Omega~_3 adds directly
        25.0 + self.drives.omega3_tilde()
    }
    fn fill(&self, t: f64, out: &mut SparseHermitian) {
        out.clear();
        let w = [self.drives.omega_e_unchecked(1, t), self.drives.omega_e_unchecked(2, t), C64::from(self.drives.omega3_tilde())];
        for &(k, up, lo) in &self.links {
            let v = w[k - 1] * self.scale;
            if v != ZERO {
                out.push(up, lo, v);
            }
        }
    }
}

/// L0 Hamiltonian in the bare basis at `t`.
pub fn full_hamiltonian(t: f64, pulses: &LaserPulseSet, params: &PhysicalParams, layout: &SystemLayout, dressings: &[Dressing]) -> Result<Operator> {
    check_arity(pulses.drives(), layout)?;
    Ok(FullLabModel::new(pulses, params, layout, dressings)?.bare(t))
}

/// L1 Hamiltonian in the bare basis at `t`.
pub fn blockade_frame_hamiltonian(t: f64, pulses: &LaserPulseSet, params: &PhysicalParams, layout: &SystemLayout, dressings: &[Dressing]) -> Result<Operator> {
    check_arity(pulses.drives(), layout)?;
    Ok(BlockadeFrameModel::new(pulses, params, layout, dressings)?.bare(t))
}

/// L2 Hamiltonian in the bare basis at `t`.
pub fn effective_hamiltonian(t: f64, drives: &EffectiveDrives, layout: &SystemLayout, dressings: &[Dressing]) -> Result<Operator> {
    check_arity(drives, layout)?;
    Ok(EffectiveModel::effective(drives, layout, dressings, 0.0)?.bare(t))
}

/// L3 Hamiltonian in the bare basis at `t`.
pub fn two_qubit_rwa_hamiltonian(t: f64, drives: &EffectiveDrives, layout: &SystemLayout, dressings: &[Dressing]) -> Result<Operator> {
    Ok(EffectiveModel::two_qubit_rwa(drives, layout, dressings, 0.0)?.bare(t))
}

fn check_arity(drives: &EffectiveDrives, layout: &SystemLayout) -> Result<()> {
    if layout.n_computational() == 1 && (drives.is_active(2) || drives.omega3_tilde() > 0.0) {
        return Err(Error::DimensionMismatch { expected: 3, found: layout.n_atoms() });
    }
    Ok(())
}

/// Stark counter-term in the bare basis: the L0 diagonal shifts at `t`.
pub fn stark_compensation(t: f64, pulses: &LaserPulseSet, params: &PhysicalParams, layout: &SystemLayout, dressings: &[Dressing]) -> Result<Operator> {
    if !params.stark_compensation {
        return Err(Error::InvalidParameter("Stark compensation is disabled".into()));
    }
    let with = FullLabModel::new(pulses, params, layout, dressings)?;
    let without = FullLabModel::new(pulses, &PhysicalParams { stark_compensation: false, ..params.clone() }, layout, dressings)?;
    let d = with.working(t).matrix() - without.working(t).matrix();
    let w = with.frame();
    Ok(Operator::new(w * d * w.adjoint(), true))
}

/// Build a model of the requested level. `epsilon` scales every lab Rabi
/// amplitude by `1 + epsilon` (L0, L1) or the effective Hamiltonian by
/// `1 + 2 epsilon` (L2, L3).
pub fn build_model(level: ModelLevel, sched: &GateSchedule, params: &PhysicalParams, epsilon: f64) -> Result<Box<dyn TimeDependentHamiltonian>> {
    sched.validate()?;
    let layout = match sched.kind {
        crate::control::GateKind::SingleQubit => SystemLayout::single_qubit(),
        crate::control::GateKind::TwoQubit => SystemLayout::two_qubit(),
    };
    let drives = EffectiveDrives::from_schedule(sched)?;
    let d = &sched.dressings;
    Ok(match level {
        ModelLevel::L0FullLab | ModelLevel::L1BlockadeFrame => {
            let pulses = lab_pulses(&drives, params.detunings(), SplitRule::Equal)?.with_error(epsilon);
            if level == ModelLevel::L0FullLab {
                Box::new(FullLabModel::new(&pulses, params, &layout, d)?)
            } else {
                Box::new(BlockadeFrameModel::new(&pulses, params, &layout, d)?)
            }
        }
        ModelLevel::L2Effective => Box::new(EffectiveModel::effective(&drives, &layout, d, 2.0 * epsilon)?),
        ModelLevel::L3TwoQubitRwa => Box::new(EffectiveModel::two_qubit_rwa(&drives, &layout, d, 2.0 * epsilon)?),
    })
}

/// Spontaneous-emission channels out of the Rydberg states.
#[derive(Clone, Debug)]
pub struct LindbladSet {
    pub gamma: f64,
    pub labels: Vec<String>,
    /// Bare-basis operators.
    pub operators: Vec<Operator>,
}

pub fn lindblad_ops(gamma: f64, layout: &SystemLayout) -> Result<LindbladSet> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidParameter("gamma must be non-negative".into()));
    }
    layout.require_physical()?;
    let mut labels = Vec::new();
    let mut operators = Vec::new();
    let mut aux = DMatrix::zeros(2, 2);
    aux[(AUX_GROUND, AUX_RYDBERG)] = C64::from(gamma.sqrt());
    labels.push("L0".to_string());
    operators.push(Operator::embed(layout, 0, &aux)?);
    for k in 1..layout.levels().len() {
        for (sign, target) in [("+", 1usize), ("-", 0usize)] {
            let mut m = DMatrix::zeros(3, 3);
            m[(target, COMP_RYDBERG)] = C64::from((gamma / 2.0).sqrt());
            labels.push(format!("L{sign}{k}"));
            operators.push(Operator::embed(layout, k, &m)?);
        }
    }
    Ok(LindbladSet { gamma, labels, operators })
}

impl LindbladSet {
    /// Operators in the coordinates of `frame`.
    pub fn in_frame(&self, frame: &DMatrix<C64>) -> Vec<SparseOp> {
        self.operators
            .iter()
            .map(|l| SparseOp::from_dense(&(frame.adjoint() * l.matrix() * frame), 1e-14))
            .collect()
    }

    /// `sum_i L_i^dag L_i` in the bare basis.
    pub fn decay_operator(&self) -> DMatrix<C64> {
        let n = self.operators.first().map_or(0, |o| o.dim());
        let mut acc = DMatrix::zeros(n, n);
        for l in &self.operators {
            acc += l.matrix().adjoint() * l.matrix();
        }
        acc
    }
}

/// `V = C6 / d^6`.
pub fn interaction_from_distance(c6: f64, d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter("distance must be positive".into()));
    }
    Ok(c6 / d.powi(6))
}

/// Gate time in seconds given the interaction in rad/s and in units of `1/T`.
pub fn physical_time(v_phys: f64, v_dimensionless: f64) -> Result<f64> {
    if !(v_phys > 0.0) || v_dimensionless < 0.0 {
        return Err(Error::InvalidParameter("interaction strengths must be positive".into()));
    }
    Ok(v_dimensionless / v_phys)
}

/// Decay rate in `1/T` for `gamma_khz` interpreted as `10^3 s^-1`.
pub fn gamma_dimensionless(gamma_khz: f64, t_seconds: f64) -> f64 {
    gamma_khz * 1e3 * t_seconds
}
