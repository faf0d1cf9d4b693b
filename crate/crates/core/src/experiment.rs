//! Experiment configuration and runners behind the CLI subcommands.
//!
//! Every runner is a pure function of its [`ExperimentConfig`] and returns a
//! [`RunOutput`]; writing files is left to [`crate::output::emit_outputs`].
//! Sweep points are dispatched to a bounded worker pool and gathered in input
//! order, so results do not depend on scheduling.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::control::{effective_drive, qs_closed_form, qs_report, EffectiveDrives, GateKind, GateSchedule};
use crate::dynamics::{evolve_master_columns, propagate_columns, step_advisory, success_probability, TimeGrid};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    build_model, gamma_dimensionless, lindblad_ops, max_envelope, physical_time, ModelLevel, PhysicalParams,
    TimeDependentHamiltonian, DEFAULT_V_PHYS,
};
use crate::hilbert::{computational_states, projector_rydberg_aux, DensityMatrix, Operator, StateVector, SystemLayout, C64};
use crate::holonomy::{
    accumulate_phases, average_fidelity, haar_average_oracle, heralded_metrics_with, target_single_gate,
    target_two_qubit_gate, HeraldedMetrics,
};
use crate::output::{Provenance, ResultTable, RunOutput, Summary};

/// Steps for effective-model runs.
pub const STEPS_EFFECTIVE: usize = 200_000;
/// Steps for lab-frame single-qubit runs.
pub const STEPS_LAB_SINGLE: usize = 2_000_000;
/// Steps for lab-frame two-qubit runs.
pub const STEPS_LAB_TWO: usize = 6_000_000;
/// Steps for lab-frame two-qubit Lindblad runs.
pub const STEPS_LAB_TWO_MASTER: usize = 1_500_000;

/// Rows in the schedule-only series.
const SERIES_POINTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    NotGate,
    SingleGateCustom,
    CnotGate,
    ErrorSweep,
    GammaSweep,
    QsMap,
    Tables,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::NotGate => "not_gate",
            Self::SingleGateCustom => "single_gate_custom",
            Self::CnotGate => "cnot_gate",
            Self::ErrorSweep => "error_sweep",
            Self::GammaSweep => "gamma_sweep",
            Self::QsMap => "qs_map",
            Self::Tables => "tables",
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Gate selection. `not` and `cnot` are the published gates; the other two
/// take every angle explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum ScheduleConfig {
    Not {
        #[serde(default = "one")]
        chi0: f64,
    },
    Single {
        theta_s: f64,
        #[serde(default = "one")]
        chi0: f64,
        theta1: f64,
        phi1: f64,
    },
    Cnot {
        #[serde(default = "one")]
        chi0: f64,
    },
    TwoQubit {
        theta_bar: [f64; 2],
        #[serde(default = "one")]
        chi0: f64,
        theta1: f64,
        phi1: f64,
        theta2: f64,
        phi2: f64,
        omega3_tilde: f64,
    },
}

impl ScheduleConfig {
    pub fn build(&self) -> GateSchedule {
        match *self {
            Self::Not { chi0 } => GateSchedule { chi0, ..GateSchedule::not_gate() },
            Self::Single { theta_s, chi0, theta1, phi1 } => GateSchedule::single(theta_s, chi0, theta1, phi1),
            Self::Cnot { chi0 } => GateSchedule { chi0, ..GateSchedule::cnot() },
            Self::TwoQubit { theta_bar, chi0, theta1, phi1, theta2, phi2, omega3_tilde } => {
                GateSchedule::two_qubit(theta_bar, chi0, theta1, phi1, theta2, phi2, omega3_tilde)
            }
        }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            Self::Not { .. } | Self::Single { .. } => GateKind::SingleQubit,
            Self::Cnot { .. } | Self::TwoQubit { .. } => GateKind::TwoQubit,
        }
    }
}

/// Sweep and grid controls. Unset lists fall back to the published grids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Lab amplitude errors `epsilon`; effective-model runs use `2 epsilon`.
    pub epsilons: Option<Vec<f64>>,
    pub chi0s: Option<Vec<f64>>,
    pub gammas_khz: Option<Vec<f64>>,
    pub qs_theta_over_pi: Option<Vec<f64>>,
    pub qs_chi0: Option<Vec<f64>>,
    pub qs_steps: Option<usize>,
}

/// One experiment invocation. Only `experiment` is required in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_level")]
    pub model_level: ModelLevel,
    /// Named parameter set; ignored when `params` is given.
    pub preset: Option<String>,
    pub params: Option<PhysicalParams>,
    pub stark_compensation: Option<bool>,
    pub schedule: Option<ScheduleConfig>,
    /// Lab pulse-amplitude error: every Rabi amplitude is scaled by `1 + epsilon`.
    #[serde(default)]
    pub epsilon: f64,
    /// Effective-model error; defaults to `2 epsilon`.
    pub epsilon_effective: Option<f64>,
    #[serde(default)]
    pub gamma_khz: f64,
    /// Interaction strength in rad/s used to convert `1/T` to physical units.
    #[serde(default = "default_v_phys")]
    pub v_phys: f64,
    pub steps: Option<usize>,
    pub master_steps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_level() -> ModelLevel {
    ModelLevel::L0FullLab
}

fn default_v_phys() -> f64 {
    DEFAULT_V_PHYS
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            model_level: default_level(),
            preset: None,
            params: None,
            stark_compensation: None,
            schedule: None,
            epsilon: 0.0,
            epsilon_effective: None,
            gamma_khz: 0.0,
            v_phys: default_v_phys(),
            steps: None,
            master_steps: None,
            seed: 0,
            out: default_out(),
            strict: false,
            sweep: SweepConfig::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |e: f64| (-0.5..=0.5).contains(&e);
        if !in_range(self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [-0.5, 0.5]", self.epsilon)));
        }
        if let Some(e) = self.epsilon_effective {
            if !in_range(e / 2.0) {
                return Err(Error::Config(format!("epsilon_effective {e} outside [-1, 1]")));
            }
        }
        if let Some(es) = &self.sweep.epsilons {
            if let Some(e) = es.iter().find(|e| !in_range(**e)) {
                return Err(Error::Config(format!("sweep epsilon {e} outside [-0.5, 0.5]")));
            }
        }
        let gammas = self.sweep.gammas_khz.iter().flatten().chain(std::iter::once(&self.gamma_khz));
        for g in gammas {
            if !(g.is_finite() && *g >= 0.0) {
                return Err(Error::Config(format!("decay rate {g} kHz must be non-negative")));
            }
        }
        if !(self.v_phys.is_finite() && self.v_phys > 0.0) {
            return Err(Error::Config("v_phys must be positive".into()));
        }
        if self.steps == Some(0) || self.master_steps == Some(0) || self.sweep.qs_steps == Some(0) {
            return Err(Error::Config("step counts must be positive".into()));
        }
        if let Some(p) = &self.preset {
            PhysicalParams::preset(p).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(p) = &self.params {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let kind = self.schedule_config().kind();
        let ok = match self.experiment {
            Experiment::NotGate => matches!(self.schedule_config(), ScheduleConfig::Not { .. }),
            Experiment::SingleGateCustom => kind == GateKind::SingleQubit,
            Experiment::CnotGate => kind == GateKind::TwoQubit,
            _ => true,
        };
        if !ok {
            return Err(Error::Config(format!("schedule does not fit experiment {}", self.experiment.name())));
        }
        self.schedule_config().build().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn schedule_config(&self) -> ScheduleConfig {
        self.schedule.clone().unwrap_or(match self.experiment {
            Experiment::CnotGate => ScheduleConfig::Cnot { chi0: 1.0 },
            _ => ScheduleConfig::Not { chi0: 1.0 },
        })
    }

    /// Physical parameters for a gate of the given kind, with level, decay
    /// and compensation overrides applied.
    pub fn resolved_params(&self, kind: GateKind, gamma_khz: f64) -> Result<PhysicalParams> {
        let mut p = match (&self.params, &self.preset) {
            (Some(p), _) => p.clone(),
            (None, Some(name)) => PhysicalParams::preset(name)?,
            (None, None) => PhysicalParams::preset(default_preset(kind))?,
        };
        p.model_level = self.model_level;
        if let Some(on) = self.stark_compensation {
            p.stark_compensation = on;
        }
        p.gamma = gamma_dimensionless(gamma_khz, physical_time(self.v_phys, p.v)?);
        Ok(p)
    }

    /// Lab error to hand to the model builder; effective levels double it.
    pub fn model_epsilon(&self) -> f64 {
        match (self.model_level, self.epsilon_effective) {
            (ModelLevel::L2Effective | ModelLevel::L3TwoQubitRwa, Some(e)) => e / 2.0,
            _ => self.epsilon,
        }
    }

    pub fn steps_for(&self, kind: GateKind) -> usize {
        self.steps.unwrap_or_else(|| default_steps(self.model_level, kind))
    }

    pub fn master_steps_for(&self, kind: GateKind) -> usize {
        self.master_steps.unwrap_or_else(|| default_master_steps(self.model_level, kind))
    }

    /// Hashes everything except the output directory, so the same run written
    /// to two places carries the same provenance.
    fn provenance(&self) -> Result<Provenance> {
        let hashed = ExperimentConfig { out: default_out(), ..self.clone() };
        Ok(Provenance::for_config(&hashed.to_toml_string()?))
    }
}

pub fn default_preset(kind: GateKind) -> &'static str {
    match kind {
        GateKind::SingleQubit => "single-qubit-paper",
        GateKind::TwoQubit => "two-qubit-paper",
    }
}

pub fn default_steps(level: ModelLevel, kind: GateKind) -> usize {
    match (level, kind) {
        (ModelLevel::L0FullLab, GateKind::SingleQubit) => STEPS_LAB_SINGLE,
        (ModelLevel::L0FullLab, GateKind::TwoQubit) => STEPS_LAB_TWO,
        _ => STEPS_EFFECTIVE,
    }
}

/// Lindblad runs of the lab-frame two-qubit gate agree with 6e6 steps to
/// 1e-8 already at 1.5e6 steps, at a quarter of the cost.
pub fn default_master_steps(level: ModelLevel, kind: GateKind) -> usize {
    match (level, kind) {
        (ModelLevel::L0FullLab, GateKind::TwoQubit) => STEPS_LAB_TWO_MASTER,
        _ => default_steps(level, kind),
    }
}

fn default_epsilons() -> Vec<f64> {
    (0..=20).map(|i| (i as f64 - 10.0) / 100.0).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Map `f` over `items` on a bounded pool; output order follows input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Time series of one scalar.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

/// Master-equation run scored against the target gate.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterRun {
    pub fidelity: Curve,
    pub max_trace_error: f64,
    pub max_hermiticity: f64,
    pub min_eigenvalue: f64,
    /// Bare-basis state at `T`.
    pub final_rho: DensityMatrix,
    pub heralded: Option<HeraldedMetrics>,
}

/// A gate, a model level and the parameters needed to simulate it.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSetup {
    pub schedule: GateSchedule,
    pub params: PhysicalParams,
    pub level: ModelLevel,
    pub epsilon: f64,
    pub strict: bool,
}

impl GateSetup {
    pub fn new(schedule: GateSchedule, params: PhysicalParams, level: ModelLevel, epsilon: f64) -> Self {
        Self { schedule, params, level, epsilon, strict: false }
    }

    pub fn layout(&self) -> SystemLayout {
        match self.schedule.kind {
            GateKind::SingleQubit => SystemLayout::single_qubit(),
            GateKind::TwoQubit => SystemLayout::two_qubit(),
        }
    }

    pub fn model(&self) -> Result<Box<dyn TimeDependentHamiltonian>> {
        build_model(self.level, &self.schedule, &self.params, self.epsilon)
    }

    /// Comparator including the identity on the herald-failure sector.
    pub fn target(&self) -> Result<Operator> {
        let s = &self.schedule;
        let d = &s.dressings;
        match s.kind {
            GateKind::SingleQubit => target_single_gate(s.theta_s, d[0].theta, d[0].phi),
            GateKind::TwoQubit => target_two_qubit_gate(s.theta_bar[0], s.theta_bar[1], d[0].theta, d[0].phi, d[1].theta, d[1].phi),
        }
    }

    /// `|r0>` for single-qubit gates, `(|r00> + |r10>)/sqrt 2` for two-qubit gates.
    pub fn default_initial_state(&self) -> Result<DensityMatrix> {
        let comp = computational_states(&self.layout())?;
        let psi = match self.schedule.kind {
            GateKind::SingleQubit => comp[0].clone(),
            GateKind::TwoQubit => (&comp[0] + &comp[2]).normalized(),
        };
        Ok(DensityMatrix::from_pure(&psi))
    }

    fn grid(&self, steps: usize, model: &dyn TimeDependentHamiltonian) -> Result<TimeGrid> {
        let g = TimeGrid::new(0.0, self.schedule.total_time, steps)?;
        step_advisory(model, &g, self.strict)?;
        Ok(g)
    }

    fn grid_with_stride(&self, steps: usize, stride: usize, model: &dyn TimeDependentHamiltonian) -> Result<TimeGrid> {
        let g = TimeGrid::with_stride(0.0, self.schedule.total_time, steps, stride)?;
        step_advisory(model, &g, self.strict)?;
        Ok(g)
    }

    /// Average gate fidelity over the computational states at every snapshot.
    pub fn fidelity_curve(&self, steps: usize) -> Result<Curve> {
        let model = self.model()?;
        let grid = self.grid(steps, model.as_ref())?;
        self.fidelity_curve_on(model.as_ref(), &grid)
    }

    fn fidelity_curve_on(&self, model: &dyn TimeDependentHamiltonian, grid: &TimeGrid) -> Result<Curve> {
        let comp = computational_states(&self.layout())?;
        let n = comp.len();
        let c = DMatrix::from_columns(&comp.iter().map(|v| v.amplitudes().clone()).collect::<Vec<_>>());
        let w = model.frame();
        let a = (self.target()?.matrix() * &c).adjoint() * w;
        let x0 = w.adjoint() * &c;
        let mut curve = Curve::default();
        propagate_columns(model, grid, x0, |t, x| {
            curve.times.push(t);
            curve.values.push(average_fidelity(&(&a * x), n).unwrap_or(f64::NAN));
        })?;
        Ok(curve)
    }

    pub fn final_fidelity(&self, steps: usize) -> Result<f64> {
        let model = self.model()?;
        let grid = self.grid_with_stride(steps, steps, model.as_ref())?;
        Ok(self.fidelity_curve_on(model.as_ref(), &grid)?.last())
    }

    /// Final comparator `M` for the Haar cross-check.
    pub fn final_comparator(&self, steps: usize) -> Result<DMatrix<C64>> {
        let model = self.model()?;
        let grid = self.grid_with_stride(steps, steps, model.as_ref())?;
        let comp = computational_states(&self.layout())?;
        let c = DMatrix::from_columns(&comp.iter().map(|v| v.amplitudes().clone()).collect::<Vec<_>>());
        let w = model.frame();
        let a = (self.target()?.matrix() * &c).adjoint() * w;
        let x = propagate_columns(model.as_ref(), &grid, w.adjoint() * &c, |_, _| {})?;
        Ok(a * x)
    }

    /// `Tr[U rho0 U^dag rho(t)]` for a pure `rho0` evolved without decay.
    pub fn pure_fidelity_curve(&self, psi0: &StateVector, steps: usize) -> Result<Curve> {
        let model = self.model()?;
        let grid = self.grid(steps, model.as_ref())?;
        let w = model.frame();
        let ideal = (w.adjoint() * self.target()?.matrix() * psi0.amplitudes()).adjoint();
        let x0 = w.adjoint() * psi0.amplitudes();
        let mut curve = Curve::default();
        propagate_columns(model.as_ref(), &grid, DMatrix::from_column_slice(x0.len(), 1, x0.as_slice()), |t, x| {
            curve.times.push(t);
            curve.values.push((&ideal * x)[(0, 0)].norm_sqr());
        })?;
        Ok(curve)
    }

    /// Lindblad run at decay rate `self.params.gamma` (in `1/T`).
    pub fn master(&self, rho0: &DensityMatrix, steps: usize) -> Result<MasterRun> {
        let model = self.model()?;
        let grid = self.grid(steps, model.as_ref())?;
        let layout = self.layout();
        let lind = lindblad_ops(self.params.gamma, &layout)?;
        let w = model.frame().clone();
        let target = self.target()?;
        let ideal = target.matrix() * rho0.matrix() * target.matrix().adjoint();
        let ideal_w = w.adjoint() * &ideal * &w;
        let rho_w = w.adjoint() * rho0.matrix() * &w;
        let mut fidelity = Curve::default();
        let (mut trace_err, mut herm, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
        let final_w = evolve_master_columns(model.as_ref(), &lind, rho_w, &grid, |t, r| {
            let d = DensityMatrix::new(r.clone());
            trace_err = trace_err.max((d.trace() - 1.0).abs());
            herm = herm.max(d.hermiticity_defect());
            min_eig = min_eig.min(d.min_eigenvalue());
            fidelity.times.push(t);
            fidelity.values.push(crate::hilbert::trace_product(&ideal_w, r).re);
        })?;
        let final_rho = DensityMatrix::new(&w * final_w * w.adjoint());
        let pr = projector_rydberg_aux(&layout)?;
        let heralded = heralded_metrics_with(final_rho.matrix(), target.matrix(), rho0.matrix(), pr.matrix()).ok();
        Ok(MasterRun { fidelity, max_trace_error: trace_err, max_hermiticity: herm, min_eigenvalue: min_eig, final_rho, heralded })
    }
}

/// Dissipative comparison at one decay rate.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayPoint {
    pub gamma_khz: f64,
    pub gamma_t: f64,
    pub master: MasterRun,
    /// `e^{-gamma t} F(t)` with `F` from the decay-free run.
    pub theory: Curve,
}

/// Master equation plus the factorized prediction for one gate at one rate.
pub fn decay_point(cfg: &ExperimentConfig, sched: &GateSchedule, gamma_khz: f64, rho0: Option<&DensityMatrix>) -> Result<DecayPoint> {
    let params = cfg.resolved_params(sched.kind, gamma_khz)?;
    let mut setup = GateSetup::new(sched.clone(), params, cfg.model_level, cfg.model_epsilon());
    setup.strict = cfg.strict;
    let rho0 = match rho0 {
        Some(r) => r.clone(),
        None => setup.default_initial_state()?,
    };
    let steps = cfg.master_steps_for(sched.kind);
    let master = setup.master(&rho0, steps)?;
    let psi0 = dominant_vector(&rho0);
    let pure = setup.pure_fidelity_curve(&psi0, steps)?;
    let g = setup.params.gamma;
    let theory = Curve { values: pure.times.iter().zip(&pure.values).map(|(t, f)| (-g * t).exp() * f).collect(), times: pure.times };
    Ok(DecayPoint { gamma_khz, gamma_t: g, master, theory })
}

fn dominant_vector(rho: &DensityMatrix) -> StateVector {
    let eig = nalgebra::SymmetricEigen::new(rho.matrix().clone());
    let k = eig.eigenvalues.imax();
    StateVector::new(eig.eigenvectors.column(k).into_owned())
}

fn base_summary(cfg: &ExperimentConfig, kind: GateKind) -> Result<Summary> {
    let p = cfg.resolved_params(kind, cfg.gamma_khz)?;
    let t_phys = physical_time(cfg.v_phys, p.v)?;
    let mut s = Summary {
        experiment: cfg.experiment.name().to_string(),
        model_level: cfg.model_level.name().to_string(),
        provenance: cfg.provenance()?,
        ..Default::default()
    };
    let r = &mut s.resolved;
    r.insert("V".into(), json!(p.v));
    r.insert("delta1".into(), json!(p.delta1));
    r.insert("delta2".into(), json!(p.delta2));
    r.insert("delta3".into(), json!(p.delta3));
    r.insert("gamma_kHz".into(), json!(cfg.gamma_khz));
    r.insert("gamma_per_T".into(), json!(p.gamma));
    r.insert("stark_compensation".into(), json!(p.stark_compensation));
    r.insert("stark_strength".into(), json!(p.stark_strength));
    r.insert("steps".into(), json!(cfg.steps_for(kind)));
    r.insert("master_steps".into(), json!(cfg.master_steps_for(kind)));
    r.insert("epsilon".into(), json!(cfg.epsilon));
    r.insert("epsilon_effective".into(), json!(cfg.epsilon_effective.unwrap_or(2.0 * cfg.epsilon)));
    r.insert("v_phys_rad_per_s".into(), json!(cfg.v_phys));
    r.insert("T_us".into(), json!(t_phys * 1e6));
    r.insert("seed".into(), json!(cfg.seed));
    r.insert("schedule".into(), serde_json::to_value(cfg.schedule_config()).map_err(|e| Error::Config(e.to_string()))?);
    Ok(s)
}

/// Dispatch on `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::NotGate | Experiment::SingleGateCustom => run_single_gate(cfg),
        Experiment::CnotGate => run_cnot_gate(cfg),
        Experiment::ErrorSweep => run_error_sweep(cfg),
        Experiment::GammaSweep => run_gamma_sweep(cfg),
        Experiment::QsMap => run_qs_map(cfg),
        Experiment::Tables => run_tables(cfg),
    }
}

pub fn run_not_gate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut c = cfg.clone();
    c.experiment = Experiment::NotGate;
    run_single_gate(&c)
}

/// Pulse shapes, phases, fidelity curves and, with decay, the dissipative
/// comparison for a single-qubit gate.
fn run_single_gate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sched = cfg.schedule_config().build();
    let prov = cfg.provenance()?;
    let mut summary = base_summary(cfg, GateKind::SingleQubit)?;
    let mut tables = vec![pulse_table(&sched, "fig3b", &prov)?];

    // effective-model phases and fidelity on the series grid
    let rec = accumulate_phases(&sched, SERIES_POINTS)?;
    let eff = GateSetup::new(sched.clone(), cfg.resolved_params(GateKind::SingleQubit, 0.0)?, ModelLevel::L2Effective, 0.0);
    let eff_curve = {
        let model = eff.model()?;
        let grid = TimeGrid::with_stride(0.0, sched.total_time, STEPS_EFFECTIVE, STEPS_EFFECTIVE / SERIES_POINTS)?;
        eff.fidelity_curve_on(model.as_ref(), &grid)?
    };
    let mut fig3c = ResultTable::new(
        "fig3c",
        &[("t", "T"), ("beta1", "rad"), ("beta2", "rad"), ("vartheta_minus", "rad"), ("theta_minus", "rad"), ("F_bar", "1")],
        prov.clone(),
    );
    for i in 0..rec.times.len() {
        let t = rec.times[i];
        let k = ((t / sched.total_time) * SERIES_POINTS as f64).round() as usize;
        fig3c.push(vec![t, rec.beta1[i], rec.beta2[i], rec.vartheta_minus[i], rec.theta_minus[i], eff_curve.values[k]])?;
    }
    tables.push(fig3c);
    let end = rec.last();
    summary.scalars.insert("vartheta_minus_T".into(), rec.vartheta_minus[end]);
    summary.scalars.insert("theta_minus_T".into(), rec.theta_minus[end]);
    summary.scalars.insert("F_bar_T_effective".into(), eff_curve.last());
    let drives = EffectiveDrives::from_schedule(&sched)?;
    summary.scalars.insert("omega_tilde_max".into(), max_envelope(&drives)?);
    let qs = qs_report(&sched, cfg.sweep.qs_steps.unwrap_or(STEPS_EFFECTIVE))?;
    summary.scalars.insert("Q_s".into(), qs.perturbative);

    // configured model level
    let params = cfg.resolved_params(GateKind::SingleQubit, cfg.gamma_khz)?;
    let mut setup = GateSetup::new(sched.clone(), params, cfg.model_level, cfg.model_epsilon());
    setup.strict = cfg.strict;
    let curve = setup.fidelity_curve(cfg.steps_for(GateKind::SingleQubit))?;
    let mut fig4a = ResultTable::new("fig4a", &[("t", "T"), ("F_bar", "1")], prov.clone());
    for (t, f) in curve.times.iter().zip(&curve.values) {
        fig4a.push(vec![*t, *f])?;
    }
    tables.push(fig4a);
    summary.scalars.insert("F_bar_T".into(), curve.last());
    let m = setup.final_comparator(cfg.steps_for(GateKind::SingleQubit))?;
    let haar = haar_average_oracle(&m, crate::holonomy::HAAR_MIN_SAMPLES, cfg.seed)?;
    // the uniform-state average of |<psi|M|psi>|^2 is the average fidelity itself
    summary.scalars.insert("F_bar_T_haar".into(), haar.mean);
    summary.scalars.insert("F_bar_T_haar_std_error".into(), haar.std_error);

    if cfg.gamma_khz > 0.0 {
        let point = decay_point(cfg, &sched, cfg.gamma_khz, None)?;
        tables.push(decay_table("fig4c", &point, &prov)?);
        insert_decay_scalars(&mut summary, &point);
    }
    Ok(RunOutput { tables, summary })
}

fn pulse_table(sched: &GateSchedule, name: &str, prov: &Provenance) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        name,
        &[("t", "T"), ("Omega_x", "1/T"), ("Omega_y", "1/T"), ("Omega_tilde", "1/T"), ("mu", "rad")],
        prov.clone(),
    );
    let single = match sched.kind {
        GateKind::SingleQubit => sched.clone(),
        GateKind::TwoQubit => sched.drive_schedule(2).or_else(|| sched.drive_schedule(1)).ok_or_else(|| {
            Error::InvalidParameter("two-qubit schedule with both drives off".into())
        })?,
    };
    for i in 0..=SERIES_POINTS {
        let tt = single.total_time * i as f64 / SERIES_POINTS as f64;
        let (x, y) = single.controls(tt)?;
        let (r, mu) = effective_drive(x, y);
        t.push(vec![tt, x, y, r, mu])?;
    }
    Ok(t)
}

fn decay_table(name: &str, p: &DecayPoint, prov: &Provenance) -> Result<ResultTable> {
    let mut t = ResultTable::new(name, &[("t", "T"), ("F_gamma0", "1"), ("F_theory", "1"), ("F_master", "1")], prov.clone());
    let g = p.gamma_t;
    for i in 0..p.master.fidelity.times.len().min(p.theory.times.len()) {
        let tt = p.master.fidelity.times[i];
        let f0 = p.theory.values[i] * (g * tt).exp();
        t.push(vec![tt, f0, p.theory.values[i], p.master.fidelity.values[i]])?;
    }
    Ok(t)
}

fn insert_decay_scalars(summary: &mut Summary, p: &DecayPoint) {
    let s = &mut summary.scalars;
    s.insert("F_master_T".into(), p.master.fidelity.last());
    s.insert("F_theory_T".into(), p.theory.last());
    s.insert("P_s_theory".into(), success_probability(1.0, p.gamma_t).unwrap_or(f64::NAN));
    s.insert("max_trace_error".into(), p.master.max_trace_error);
    s.insert("max_hermiticity_defect".into(), p.master.max_hermiticity);
    s.insert("min_eigenvalue".into(), p.master.min_eigenvalue);
    if let Some(h) = p.master.heralded {
        s.insert("P_s".into(), h.p_success);
        s.insert("F_prime".into(), h.fidelity_post);
        s.insert("purity".into(), h.purity_post);
    }
}

pub fn run_cnot_gate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sched = cfg.schedule_config().build();
    if sched.kind != GateKind::TwoQubit {
        return Err(Error::Config("cnot_gate needs a two-qubit schedule".into()));
    }
    let prov = cfg.provenance()?;
    let mut summary = base_summary(cfg, GateKind::TwoQubit)?;
    let params = cfg.resolved_params(GateKind::TwoQubit, cfg.gamma_khz)?;
    let mut setup = GateSetup::new(sched.clone(), params, cfg.model_level, cfg.model_epsilon());
    setup.strict = cfg.strict;
    let mut tables = vec![pulse_table(&sched, "fig5_pulses", &prov)?];
    let curve = setup.fidelity_curve(cfg.steps_for(GateKind::TwoQubit))?;
    let mut fig5a = ResultTable::new("fig5a", &[("t", "T"), ("F_bar", "1")], prov.clone());
    for (t, f) in curve.times.iter().zip(&curve.values) {
        fig5a.push(vec![*t, *f])?;
    }
    tables.push(fig5a);
    summary.scalars.insert("F_bar_T".into(), curve.last());
    if cfg.sweep.epsilons.is_some() {
        let (table, scalars) = error_sweep_table(cfg, &sched, "fig5b", &prov)?;
        tables.push(table);
        summary.scalars.extend(scalars);
    }
    if cfg.gamma_khz > 0.0 {
        let point = decay_point(cfg, &sched, cfg.gamma_khz, None)?;
        tables.push(decay_table("fig5c", &point, &prov)?);
        insert_decay_scalars(&mut summary, &point);
    }
    if cfg.sweep.gammas_khz.is_some() {
        tables.push(gamma_table(cfg, &sched, "fig5d", &prov)?);
    }
    Ok(RunOutput { tables, summary })
}

fn sweep_name(level: ModelLevel, kind: GateKind) -> &'static str {
    match (kind, level) {
        (GateKind::TwoQubit, _) => "fig5b",
        (GateKind::SingleQubit, ModelLevel::L2Effective | ModelLevel::L3TwoQubitRwa) => "fig3d",
        (GateKind::SingleQubit, _) => "fig4b",
    }
}

/// Final average fidelity over `epsilons x chi0s` (long format).
fn error_sweep_table(
    cfg: &ExperimentConfig,
    sched: &GateSchedule,
    name: &str,
    prov: &Provenance,
) -> Result<(ResultTable, Vec<(String, f64)>)> {
    let epsilons = cfg.sweep.epsilons.clone().unwrap_or_else(default_epsilons);
    let chi0s = cfg.sweep.chi0s.clone().unwrap_or_else(|| match sched.kind {
        GateKind::SingleQubit => vec![1.0, 0.5, 0.0],
        GateKind::TwoQubit => vec![sched.chi0],
    });
    let params = cfg.resolved_params(sched.kind, 0.0)?;
    let steps = cfg.steps_for(sched.kind);
    let effective = matches!(cfg.model_level, ModelLevel::L2Effective | ModelLevel::L3TwoQubitRwa);
    let points: Vec<(f64, f64)> = chi0s.iter().flat_map(|&c| epsilons.iter().map(move |&e| (c, e))).collect();
    let values = parallel_map(&points, |&(chi0, eps)| {
        let mut setup = GateSetup::new(GateSchedule { chi0, ..sched.clone() }, params.clone(), cfg.model_level, eps);
        setup.strict = cfg.strict;
        setup.final_fidelity(steps)
    })?;
    let mut t = ResultTable::new(name, &[("epsilon", "1"), ("epsilon_effective", "1"), ("chi0", "1"), ("F_bar", "1")], prov.clone());
    for (&(chi0, eps), f) in points.iter().zip(&values) {
        t.push(vec![eps, if effective { 2.0 * eps } else { eps }, chi0, *f])?;
    }
    let mut scalars = Vec::new();
    for &chi0 in &chi0s {
        let rows: Vec<(f64, f64)> = points.iter().zip(&values).filter(|(p, _)| p.0 == chi0).map(|(p, f)| (p.1, *f)).collect();
        let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let best = rows.iter().cloned().fold((f64::NAN, f64::NEG_INFINITY), |a, r| if r.1 > a.1 { r } else { a });
        scalars.push((format!("min_F_bar_chi0_{chi0}"), min));
        scalars.push((format!("max_F_bar_chi0_{chi0}"), best.1));
        scalars.push((format!("argmax_epsilon_chi0_{chi0}"), best.0));
    }
    Ok((t, scalars))
}

pub fn run_error_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sched = cfg.schedule_config().build();
    let prov = cfg.provenance()?;
    let mut summary = base_summary(cfg, sched.kind)?;
    let (table, scalars) = error_sweep_table(cfg, &sched, sweep_name(cfg.model_level, sched.kind), &prov)?;
    summary.scalars.extend(scalars);
    Ok(RunOutput { tables: vec![table], summary })
}

/// One row per decay rate: theory and master-equation fidelities plus the
/// heralded metrics.
fn gamma_table(cfg: &ExperimentConfig, sched: &GateSchedule, name: &str, prov: &Provenance) -> Result<ResultTable> {
    let gammas = cfg.sweep.gammas_khz.clone().unwrap_or_else(|| match sched.kind {
        GateKind::SingleQubit => linspace(0.0, 4.0, 5),
        GateKind::TwoQubit => linspace(0.0, 2.0, 3),
    });
    let points = parallel_map(&gammas, |&g| decay_point(cfg, sched, g, None))?;
    let mut t = ResultTable::new(
        name,
        &[
            ("gamma_kHz", "kHz"),
            ("F_theory", "1"),
            ("F_master", "1"),
            ("P_s", "1"),
            ("P_s_theory", "1"),
            ("F_prime", "1"),
            ("purity", "1"),
        ],
        prov.clone(),
    );
    for p in &points {
        let h = p.master.heralded.ok_or(Error::HeraldImpossible(0.0))?;
        t.push(vec![
            p.gamma_khz,
            p.theory.last(),
            p.master.fidelity.last(),
            h.p_success,
            success_probability(1.0, p.gamma_t)?,
            h.fidelity_post,
            h.purity_post,
        ])?;
    }
    Ok(t)
}

pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sched = cfg.schedule_config().build();
    let prov = cfg.provenance()?;
    let mut summary = base_summary(cfg, sched.kind)?;
    let name = match sched.kind {
        GateKind::SingleQubit => "fig4d",
        GateKind::TwoQubit => "fig5d",
    };
    let t = gamma_table(cfg, &sched, name, &prov)?;
    for (g, f) in t.column("gamma_kHz").unwrap_or_default().iter().zip(t.column("F_master").unwrap_or_default()) {
        summary.scalars.insert(format!("F_master_gamma_{g}kHz"), f);
    }
    Ok(RunOutput { tables: vec![t], summary })
}

/// Quadrature and closed-form `Q_s` over `(theta_s / pi, chi0)`.
pub fn run_qs_map(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let thetas = cfg.sweep.qs_theta_over_pi.clone().unwrap_or_else(|| linspace(0.0, 2.0, 21));
    let chis = cfg.sweep.qs_chi0.clone().unwrap_or_else(|| linspace(0.0, 2.0, 11));
    let steps = cfg.sweep.qs_steps.unwrap_or(STEPS_EFFECTIVE);
    let prov = cfg.provenance()?;
    let mut summary = base_summary(cfg, GateKind::SingleQubit)?;
    let points: Vec<(f64, f64)> = chis.iter().flat_map(|&c| thetas.iter().map(move |&x| (x, c))).collect();
    let reports = parallel_map(&points, |&(x, chi0)| qs_report(&GateSchedule::single(x * PI, chi0, PI / 2.0, PI), steps))?;
    let mut t = ResultTable::new(
        "fig3a",
        &[("theta_s_over_pi", "1"), ("chi0", "1"), ("Q_s", "1"), ("Q_s_printed", "1"), ("Q_s_closed", "1")],
        prov,
    );
    let mut worst: f64 = 0.0;
    for (&(x, chi0), r) in points.iter().zip(&reports) {
        let closed = qs_closed_form(chi0, x * PI);
        worst = worst.max((r.perturbative - closed).abs()).max((r.printed - closed).abs());
        t.push(vec![x, chi0, r.perturbative, r.printed, closed])?;
    }
    summary.scalars.insert("max_closed_form_deviation".into(), worst);
    summary.resolved.insert("qs_steps".into(), json!(steps));
    Ok(RunOutput { tables: vec![t], summary })
}

/// Tables I and II: heralded metrics at the published decay rates.
pub fn run_tables(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let prov = cfg.provenance()?;
    let mut summary = base_summary(cfg, GateKind::SingleQubit)?;
    let mut tables = Vec::new();
    for (name, sched, gammas) in [
        ("table1", GateSchedule::not_gate(), linspace(0.0, 4.0, 5)),
        ("table2", GateSchedule::cnot(), linspace(0.0, 2.0, 3)),
    ] {
        let mut c = cfg.clone();
        c.params = None;
        c.preset = Some(default_preset(sched.kind).to_string());
        let points = parallel_map(&gammas, |&g| decay_point(&c, &sched, g, None))?;
        let mut t = ResultTable::new(name, &[("gamma_kHz", "kHz"), ("P_s", "1"), ("F_prime", "1"), ("purity", "1")], prov.clone());
        for p in &points {
            let h = p.master.heralded.ok_or(Error::HeraldImpossible(0.0))?;
            t.push(vec![p.gamma_khz, h.p_success, h.fidelity_post, h.purity_post])?;
            summary.scalars.insert(format!("{name}_F_master_gamma_{}kHz", p.gamma_khz), p.master.fidelity.last());
        }
        tables.push(t);
    }
    Ok(RunOutput { tables, summary })
}
