//! Constrained minimization of the membrane energy.
//!
//! The continuous problem is: minimize the bending + line energy over all
//! admissible curve/phase configurations with prescribed total area 𝒜,
//! phase-A area Π, and enclosed volume 𝒱. This module attacks the
//! discretized version with an augmented Lagrangian,
//!
//!   L(q, λ, μ) = F(q) + Σ_c [ λ_c r_c(q) + (μ/2) r_c(q)² ],
//!
//! where r = (area − 𝒜, volume − 𝒱, phase area − Π) are the raw constraint
//! residuals. Inner iterations run Armijo-backtracked steepest descent on
//! the curve nodes and the jump locations together (one fused reverse-mode
//! gradient per iteration); outer rounds update λ_c += μ·r_c and grow μ
//! when the residuals stall. Since the jump count is a discrete variable,
//! gradient steps are interleaved with combinatorial phase moves (segment
//! toggles, jump relocation, domain insertion/removal) accepted only on
//! strict decrease of the same merit function.
//!
//! Two safeguards keep iterates admissible: candidates that violate hard
//! invariants (interior radius ≤ 0, jump ordering, minimum jump separation)
//! are rejected inside the line search, and a quadratic barrier activates
//! when an interior node slides under a small radius threshold, steering
//! the search away from the axis before the hard rejection triggers.
//!
//! Everything is deterministic for a fixed seed: the only randomness is the
//! low-discrepancy phase-move proposals, drawn from a counter-based RNG
//! whose position is part of the checkpointable [`meshio::OptimizerState`].

use crate::analysis::{self, AnalysisError, FeasibilityReport};
use crate::energy::{system_energy, Component, EnergyError, MaterialParams, VesicleSystem};
use crate::geometry::{CurveFields, GeneratorCurve, GeometryError};
use crate::gradient::{weighted_gradient, EnergyGradient, Weights};
use crate::meshio::{self, MeshError, OptimizerState};
use crate::phase::{self, PhaseError, PhaseLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Step length underflow threshold, relative to the problem scale.
const ALPHA_MIN_FACTOR: f64 = 1e-16;
/// Barrier activation radius, relative to the problem scale.
const X_MIN_FACTOR: f64 = 1e-4;
/// Outer rounds must shrink ‖r‖∞ by at least this factor, else μ grows.
const PROGRESS_FACTOR: f64 = 0.25;
/// Penalty ceiling; beyond this, growing μ only destroys conditioning.
const MU_CAP: f64 = 1e12;
/// Consecutive outer rounds with no accepted move before giving up.
const STALL_LIMIT: usize = 3;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    /// Checkpoint writing failed; optimization stops rather than silently
    /// losing resumability.
    #[error("checkpoint write failed: {0}")]
    Checkpoint(#[from] MeshError),
    #[error("constraint targets are infeasible: volume bound {}, volume ok {}, phase area ok {}",
            .report.volume_bound, .report.volume_ok, .report.phase_area_ok)]
    InfeasibleTargets { report: FeasibilityReport },
    #[error("targets split over {count} equal components are infeasible per component")]
    ComponentSplitInfeasible {
        count: usize,
        report: FeasibilityReport,
    },
    #[error("volume/area ratio {ratio} not reachable by the spheroid family (max {max_ratio})")]
    InitUnreachable { ratio: f64, max_ratio: f64 },
    #[error("component {index} is not closed at both axis endpoints")]
    OpenComponent { index: usize },
}

/// Validated constraint targets (𝒜, Π, 𝒱). Construction rejects target
/// combinations no closed surface can meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    total_area: f64,
    phase_area: f64,
    volume: f64,
}

impl ConstraintSet {
    /// Checks 0 ≤ Π ≤ 𝒜 and 𝒱 strictly below the round-sphere volume of
    /// area 𝒜, then wraps the targets.
    pub fn new(total_area: f64, phase_area: f64, volume: f64) -> Result<Self, OptimizerError> {
        let report = analysis::feasibility_check(total_area, phase_area, volume)?;
        if !report.feasible {
            return Err(OptimizerError::InfeasibleTargets { report });
        }
        Ok(Self {
            total_area,
            phase_area,
            volume,
        })
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn phase_area(&self) -> f64 {
        self.phase_area
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Raw residuals (area − 𝒜, volume − 𝒱, phase area − Π).
    pub fn residuals(&self, system: &VesicleSystem) -> [f64; 3] {
        [
            system.surface_area() - self.total_area,
            system.enclosed_volume() - self.volume,
            system.phase_area() - self.phase_area,
        ]
    }

    /// Residuals scaled for reporting: areas relative to 𝒜, volume relative
    /// to the larger of |𝒱| and the round-sphere volume of area 𝒜 (the
    /// natural volume scale when 𝒱 is near zero).
    pub fn relative_residuals(&self, system: &VesicleSystem) -> [f64; 3] {
        let raw = self.residuals(system);
        let bound = self.total_area.powf(1.5) / (6.0 * std::f64::consts::PI.sqrt());
        [
            raw[0] / self.total_area,
            raw[1] / self.volume.abs().max(bound),
            raw[2] / self.total_area,
        ]
    }
}

/// Knobs of [`minimize`]. `Default` gives the production settings; tests
/// shrink the budgets.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Multiplier/penalty update rounds.
    pub max_outer: usize,
    /// Gradient iterations per outer round.
    pub max_inner: usize,
    /// Initial penalty μ.
    pub mu0: f64,
    /// Factor applied to μ when an outer round makes insufficient progress.
    pub mu_growth: f64,
    /// Multiplier estimates λ_c += μ·r_c after each outer round.
    pub first_order_multipliers: bool,
    /// Convergence threshold on the relative residuals.
    pub constraint_tol: f64,
    /// Convergence threshold on ‖∇L‖∞ over the admissible directions.
    pub gradient_tol: f64,
    /// Run one combinatorial phase-move round every this many inner
    /// iterations.
    pub phase_move_period: usize,
    /// Low-discrepancy proposals per jump (and per insertion round).
    pub phase_candidates: usize,
    /// Minimum parameter distance between jumps and to the endpoints.
    pub min_jump_separation: f64,
    /// Hard cap on jumps per component; insertions beyond it are skipped.
    pub max_jumps: usize,
    /// Resample to constant speed after this many accepted steps.
    pub reparam_period: usize,
    /// Write a checkpoint every this many inner iterations (0 disables).
    pub checkpoint_period: usize,
    /// Directory for periodic checkpoints; `None` disables them.
    pub checkpoint_dir: Option<PathBuf>,
    /// Seed of the phase-move proposal stream.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_outer: 30,
            max_inner: 400,
            mu0: 10.0,
            mu_growth: 10.0,
            first_order_multipliers: true,
            constraint_tol: 1e-6,
            gradient_tol: 1e-5,
            phase_move_period: 25,
            phase_candidates: 8,
            min_jump_separation: 1e-3,
            max_jumps: 32,
            reparam_period: 50,
            checkpoint_period: 0,
            checkpoint_dir: None,
            seed: 0,
        }
    }
}

/// One inner iteration of the trace. Residual columns are the relative
/// residuals; `step` is the accepted step length (0 for a rejected round).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub outer: usize,
    pub energy: f64,
    pub augmented: f64,
    pub res_area: f64,
    pub res_vol: f64,
    pub res_phase: f64,
    pub step: f64,
}

impl TraceRow {
    pub fn to_report_row(&self) -> meshio::ReportRow {
        meshio::ReportRow {
            iter: self.iter,
            energy: self.energy,
            res_area: self.res_area,
            res_vol: self.res_vol,
            res_phase: self.res_phase,
            step: self.step,
        }
    }
}

/// Outcome of one combinatorial phase-move round.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMoveRecord {
    /// Global inner iteration after which the round ran.
    pub iter: usize,
    /// Description of the accepted move, e.g. "toggle segment 1".
    pub accepted: Option<String>,
    /// Merit decrease achieved by the accepted move (0 when rejected).
    pub improvement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// Residuals and gradient norm both under their tolerances.
    Converged,
    /// Repeated outer rounds accepted no move of any kind.
    StepStalled,
    /// Outer round budget exhausted first.
    BudgetExhausted,
}

/// Everything [`minimize`] did, in replayable detail.
#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub termination: TerminationReason,
    pub trace: Vec<TraceRow>,
    pub phase_moves: Vec<PhaseMoveRecord>,
    /// Maximum node displacement of each accepted reparametrization.
    pub reparam_drifts: Vec<f64>,
    pub final_energy: f64,
    pub final_residuals: [f64; 3],
    pub final_gradient_norm: f64,
    pub outer_rounds: usize,
    pub inner_iterations: usize,
    /// True if the axis barrier was ever active at an accepted iterate.
    pub barrier_active: bool,
    /// Multiplier/penalty/RNG state at exit, for checkpointing.
    pub final_state: OptimizerState,
    pub wall_time: Duration,
}

/// Builds a starting system of `components` equal spheroids meeting the
/// targets split evenly: each component gets area 𝒜/m, volume 𝒱/m and
/// phase-A area Π/m. The spheroid aspect is solved on the discrete area and
/// volume (not the analytic ones), so the targets are met to rounding at
/// every resolution; the phase, when mixed, is a single cap of material A
/// ending at a jump placed by bisection on the discrete phase area.
pub fn init_system(
    n_segments: usize,
    components: usize,
    constraints: &ConstraintSet,
) -> Result<VesicleSystem, OptimizerError> {
    let m = components.max(1) as f64;
    let (a_i, v_i, p_i) = (
        constraints.total_area / m,
        constraints.volume / m,
        constraints.phase_area / m,
    );
    let report = analysis::feasibility_check(a_i, p_i, v_i)?;
    if !report.feasible {
        return Err(OptimizerError::ComponentSplitInfeasible {
            count: components.max(1),
            report,
        });
    }

    // Shape measure v(q) = volume/area^{3/2} of the discrete prolate
    // spheroid (1, q): strictly decreasing in q, maximal at the sphere.
    let shape = |q: f64| -> Result<f64, OptimizerError> {
        let c = GeneratorCurve::spheroid(n_segments, 1.0, q)?;
        Ok(c.enclosed_volume() / c.surface_area().powf(1.5))
    };
    let target = v_i / a_i.powf(1.5);
    let max_ratio = shape(1.0)?;
    if !(target > 0.0) || target >= max_ratio {
        return Err(OptimizerError::InitUnreachable {
            ratio: target,
            max_ratio,
        });
    }
    let mut hi = 2.0;
    while shape(hi)? >= target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(OptimizerError::InitUnreachable {
                ratio: target,
                max_ratio,
            });
        }
    }
    let mut lo = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shape(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let q = 0.5 * (lo + hi);
    let unit = GeneratorCurve::spheroid(n_segments, 1.0, q)?;
    let scale = (a_i / unit.surface_area()).sqrt();
    let base = unit.scaled(scale);

    // Phase: all-B, all-A, or one A-cap whose jump is bisected on the
    // discrete phase area.
    let layout = if p_i <= 0.0 {
        PhaseLayout::constant(0)?
    } else if p_i >= a_i {
        PhaseLayout::constant(1)?
    } else {
        let cap_area = |tau: f64| -> Result<f64, OptimizerError> {
            let l = PhaseLayout::new(1, vec![tau])?;
            Ok(phase::phase_area(&base, &l))
        };
        let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cap_area(mid)? < p_i {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-18 {
                break;
            }
        }
        PhaseLayout::new(1, vec![0.5 * (lo + hi)])?
    };

    // Stack multiple components along the axis with a small gap; area,
    // volume and phase area are all invariant under the shift. A single
    // component stays where the spheroid constructor put it.
    let mut comps = Vec::with_capacity(components.max(1));
    let mut cursor = 0.0;
    for _ in 0..components.max(1) {
        let curve = if components <= 1 {
            base.clone()
        } else {
            let zmin = base
                .samples()
                .iter()
                .map(|p| p[1])
                .fold(f64::INFINITY, f64::min);
            let shift = cursor - zmin;
            let shifted = base
                .samples()
                .iter()
                .map(|p| [p[0], p[1] + shift])
                .collect();
            GeneratorCurve::new(shifted)?
        };
        if components > 1 {
            let zmax = curve
                .samples()
                .iter()
                .map(|p| p[1])
                .fold(f64::NEG_INFINITY, f64::max);
            cursor = zmax + 0.25 * scale;
        }
        comps.push(Component {
            curve,
            layout: layout.clone(),
        });
    }
    Ok(VesicleSystem::new(comps)?)
}

/// The augmented Lagrangian L = F + Σ_c [λ_c r_c + (μ/2) r_c²] with raw
/// residuals, barrier-free. λ is ordered (area, volume, phase area).
pub fn augmented_objective(
    system: &VesicleSystem,
    params: &MaterialParams,
    constraints: &ConstraintSet,
    lambda: [f64; 3],
    mu: f64,
) -> Result<f64, OptimizerError> {
    let f = system_energy(system, params)?.total.total;
    let r = constraints.residuals(system);
    let mut l = f;
    for c in 0..3 {
        l += lambda[c] * r[c] + 0.5 * mu * r[c] * r[c];
    }
    Ok(l)
}

/// Reparametrizes every component to constant speed and transports its
/// jumps through the arc-length map, so each jump stays on the same
/// material point. Returns the largest node displacement per component.
/// Callers decide whether to keep the result; [`minimize`] only accepts it
/// when the merit function does not increase.
pub fn reparametrization_maintenance(
    system: &VesicleSystem,
) -> Result<(VesicleSystem, Vec<f64>), OptimizerError> {
    let mut comps = Vec::with_capacity(system.components().len());
    let mut drifts = Vec::with_capacity(system.components().len());
    for comp in system.components() {
        let curve = comp.curve.reparametrize_constant_speed()?;
        let drift = comp
            .curve
            .samples()
            .iter()
            .zip(curve.samples())
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        drifts.push(drift);
        let jumps: Vec<f64> = comp
            .layout
            .jumps()
            .iter()
            .map(|&j| comp.curve.arc_fraction(j))
            .collect();
        let layout = PhaseLayout::new(comp.layout.leading_value(), jumps)?;
        comps.push(Component { curve, layout });
    }
    Ok((VesicleSystem::new(comps)?, drifts))
}

/// Minimizes the energy of `system` in place under `constraints`. On
/// success the system holds the final iterate (it also holds the last
/// accepted iterate if an error aborts the run, e.g. a checkpoint write
/// failure). Fresh multipliers; see [`resume`] for warm starts.
pub fn minimize(
    system: &mut VesicleSystem,
    params: &MaterialParams,
    constraints: &ConstraintSet,
    config: &OptimizerConfig,
) -> Result<OptimizationReport, OptimizerError> {
    minimize_impl(system, params, constraints, config, None)
}

/// Continues a checkpointed run: multipliers, penalty, iteration counters
/// and the proposal RNG position are restored from `state`, so the phase
/// moves pick up the proposal stream where the interrupted run left it.
pub fn resume(
    system: &mut VesicleSystem,
    params: &MaterialParams,
    constraints: &ConstraintSet,
    config: &OptimizerConfig,
    state: &OptimizerState,
) -> Result<OptimizationReport, OptimizerError> {
    minimize_impl(system, params, constraints, config, Some(state))
}

struct Merit<'a> {
    params: &'a MaterialParams,
    constraints: &'a ConstraintSet,
    lambda: [f64; 3],
    mu: f64,
    x_min: f64,
    strength: f64,
}

struct MeritValue {
    energy: f64,
    aug: f64,
    barrier: f64,
    residuals: [f64; 3],
}

impl Merit<'_> {
    fn eval(&self, system: &VesicleSystem) -> Result<MeritValue, OptimizerError> {
        let energy = system_energy(system, self.params)?.total.total;
        let residuals = self.constraints.residuals(system);
        let mut aug = energy;
        for c in 0..3 {
            aug += self.lambda[c] * residuals[c] + 0.5 * self.mu * residuals[c] * residuals[c];
        }
        let barrier = barrier_value(system, self.x_min, self.strength);
        Ok(MeritValue {
            energy,
            aug: aug + barrier,
            barrier,
            residuals,
        })
    }

    /// Fused gradient of the merit function at the current point, with the
    /// pole radii masked out (they are pinned to the axis).
    fn gradient(
        &self,
        system: &VesicleSystem,
        residuals: [f64; 3],
    ) -> Result<Vec<EnergyGradient>, OptimizerError> {
        let w = Weights {
            energy: 1.0,
            area: self.lambda[0] + self.mu * residuals[0],
            volume: self.lambda[1] + self.mu * residuals[1],
            phase_area: self.lambda[2] + self.mu * residuals[2],
        };
        let mut grads = Vec::with_capacity(system.components().len());
        for comp in system.components() {
            let fields = CurveFields::build(&comp.curve)?;
            let mut g = weighted_gradient(&fields, &comp.layout, self.params, &w);
            let n = comp.curve.n_segments();
            let samples = comp.curve.samples();
            for i in 1..n {
                let x = samples[i][0];
                if x < self.x_min {
                    g.curve[i][0] -=
                        2.0 * self.strength * (self.x_min - x) / (self.x_min * self.x_min);
                }
            }
            if comp.curve.closed_start() {
                g.curve[0][0] = 0.0;
            }
            if comp.curve.closed_end() {
                g.curve[n][0] = 0.0;
            }
            grads.push(g);
        }
        Ok(grads)
    }
}

/// Quadratic axis barrier: Σ over interior nodes of strength·((x_min−x)/x_min)²
/// for x < x_min, zero otherwise.
fn barrier_value(system: &VesicleSystem, x_min: f64, strength: f64) -> f64 {
    let mut b = 0.0;
    for comp in system.components() {
        let samples = comp.curve.samples();
        for p in &samples[1..samples.len() - 1] {
            if p[0] < x_min {
                let d = (x_min - p[0]) / x_min;
                b += strength * d * d;
            }
        }
    }
    b
}

fn norms(grads: &[EnergyGradient]) -> (f64, f64) {
    let mut sq = 0.0;
    let mut inf: f64 = 0.0;
    for g in grads {
        for p in &g.curve {
            sq += p[0] * p[0] + p[1] * p[1];
            inf = inf.max(p[0].abs()).max(p[1].abs());
        }
        for j in &g.jumps {
            sq += j * j;
            inf = inf.max(j.abs());
        }
    }
    (sq, inf)
}

/// Builds the trial system at step length `alpha` along −gradient, or
/// `None` when the step leaves the admissible set (invalid curve, jump
/// ordering or separation violated).
fn trial_step(
    system: &VesicleSystem,
    grads: &[EnergyGradient],
    alpha: f64,
    min_sep: f64,
) -> Option<VesicleSystem> {
    let mut comps = Vec::with_capacity(system.components().len());
    for (comp, g) in system.components().iter().zip(grads) {
        let samples: Vec<[f64; 2]> = comp
            .curve
            .samples()
            .iter()
            .zip(&g.curve)
            .map(|(p, d)| [p[0] - alpha * d[0], p[1] - alpha * d[1]])
            .collect();
        let curve = GeneratorCurve::new(samples).ok()?;
        let jumps: Vec<f64> = comp
            .layout
            .jumps()
            .iter()
            .zip(&g.jumps)
            .map(|(j, d)| j - alpha * d)
            .collect();
        if !jumps_admissible(&jumps, min_sep) {
            return None;
        }
        let layout = PhaseLayout::new(comp.layout.leading_value(), jumps).ok()?;
        comps.push(Component { curve, layout });
    }
    VesicleSystem::new(comps).ok()
}

fn jumps_admissible(jumps: &[f64], min_sep: f64) -> bool {
    let mut prev = 0.0;
    for &j in jumps {
        if !j.is_finite() || j - prev < min_sep {
            return false;
        }
        prev = j;
    }
    jumps.is_empty() || 1.0 - prev >= min_sep
}

/// One combinatorial phase-move round: propose toggles, jump relocations,
/// domain insertions and removals on every component, evaluate the merit of
/// each, and apply the single best strict improvement. Consumes exactly one
/// RNG draw regardless of what is proposed or accepted, which keeps resumed
/// runs aligned with uninterrupted ones.
fn phase_move_round(
    system: &mut VesicleSystem,
    merit: &Merit,
    current_aug: f64,
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(String, f64)>, OptimizerError> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let base: f64 = rng.gen();
    let mut slot = 0usize;
    let mut lds = || {
        slot += 1;
        (base + slot as f64 * GOLDEN).fract()
    };
    let min_sep = config.min_jump_separation;
    let width = (4.0 * min_sep).max(0.02);

    let mut best: Option<(usize, PhaseLayout, String, f64)> = None;
    let consider = |ci: usize,
                    layout: PhaseLayout,
                    label: String,
                    best: &mut Option<(usize, PhaseLayout, String, f64)>|
     -> Result<(), OptimizerError> {
        let mut comps = system.components().to_vec();
        comps[ci].layout = layout.clone();
        let cand = VesicleSystem::new(comps)?;
        let aug = merit.eval(&cand)?.aug;
        if aug < current_aug && best.as_ref().map_or(true, |b| aug < b.3) {
            *best = Some((ci, layout, label, aug));
        }
        Ok(())
    };

    for ci in 0..system.components().len() {
        let layout = system.components()[ci].layout.clone();
        let jumps = layout.jumps().to_vec();
        for k in 0..=jumps.len() {
            let cand = layout.toggle_segment(k)?;
            consider(
                ci,
                cand,
                format!("component {ci}: toggle segment {k}"),
                &mut best,
            )?;
        }
        for j in 0..jumps.len() {
            for _ in 0..config.phase_candidates {
                let t = lds();
                if let Ok(cand) = layout.move_jump(j, t, min_sep) {
                    consider(
                        ci,
                        cand,
                        format!("component {ci}: move jump {j} to {t:.4}"),
                        &mut best,
                    )?;
                }
            }
        }
        if jumps.len() + 2 <= config.max_jumps {
            for _ in 0..config.phase_candidates {
                let c = lds();
                if let Ok(cand) = layout.insert_jump_pair(c - 0.5 * width, c + 0.5 * width, min_sep)
                {
                    consider(
                        ci,
                        cand,
                        format!("component {ci}: insert domain at {c:.4}"),
                        &mut best,
                    )?;
                }
            }
        }
        for j in 0..jumps.len().saturating_sub(1) {
            let cand = layout.remove_jump_pair(j)?;
            consider(
                ci,
                cand,
                format!("component {ci}: remove domain {j}"),
                &mut best,
            )?;
        }
    }

    if let Some((ci, layout, label, aug)) = best {
        let improvement = current_aug - aug;
        system.components_mut()[ci].layout = layout;
        Ok(Some((label, improvement)))
    } else {
        Ok(None)
    }
}

fn minimize_impl(
    system: &mut VesicleSystem,
    params: &MaterialParams,
    constraints: &ConstraintSet,
    config: &OptimizerConfig,
    warm: Option<&OptimizerState>,
) -> Result<OptimizationReport, OptimizerError> {
    let started = Instant::now();
    for (index, comp) in system.components().iter().enumerate() {
        if !comp.curve.is_closed() {
            return Err(OptimizerError::OpenComponent { index });
        }
    }

    let scale = (constraints.total_area / (4.0 * std::f64::consts::PI)).sqrt();
    let x_min = X_MIN_FACTOR * scale;
    let alpha_floor = ALPHA_MIN_FACTOR * scale;
    let strength = system_energy(system, params)?.total.total.abs().max(1.0);

    let mut lambda = warm.map_or([0.0; 3], |s| s.lambda);
    let mut mu = warm.map_or(config.mu0, |s| s.mu);
    let outer_start = warm.map_or(0, |s| s.outer_iter);
    let mut total_inner = warm.map_or(0, |s| s.inner_iters_done);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if let Some(s) = warm {
        rng = ChaCha8Rng::seed_from_u64(s.rng_seed);
        rng.set_word_pos(s.rng_word_pos);
    }
    let rng_seed = warm.map_or(config.seed, |s| s.rng_seed);

    let mut trace = Vec::new();
    let mut phase_moves = Vec::new();
    let mut reparam_drifts = Vec::new();
    let mut barrier_active = false;
    let mut accepted_since_reparam = 0usize;
    let mut stalled_outers = 0usize;
    let mut prev_res_norm = f64::INFINITY;
    let mut outer_done = outer_start;
    let mut termination = TerminationReason::BudgetExhausted;

    let state_snapshot =
        |lambda: [f64; 3], mu: f64, outer: usize, inner: usize, rng: &ChaCha8Rng| OptimizerState {
            lambda,
            mu,
            outer_iter: outer,
            inner_iters_done: inner,
            rng_seed,
            rng_word_pos: rng.get_word_pos(),
        };

    'outer: for outer in outer_start..config.max_outer {
        let merit = Merit {
            params,
            constraints,
            lambda,
            mu,
            x_min,
            strength,
        };
        let mut value = merit.eval(system)?;
        let mut accepted_in_round = 0usize;

        for inner in 0..config.max_inner {
            let grads = merit.gradient(system, value.residuals)?;
            let (gsq, ginf) = norms(&grads);
            let rel = constraints.relative_residuals(system);
            if rel.iter().all(|r| r.abs() <= config.constraint_tol) && ginf <= config.gradient_tol {
                termination = TerminationReason::Converged;
                outer_done = outer;
                break 'outer;
            }

            // Backtracking line search along −gradient over nodes and
            // jumps together.
            let mut alpha = if gsq > 0.0 {
                (1.0 / gsq.sqrt()).clamp(1e-8 * scale, 1e-1 * scale)
            } else {
                0.0
            };
            let mut accepted_alpha = 0.0;
            while alpha >= alpha_floor {
                if let Some(cand) = trial_step(system, &grads, alpha, config.min_jump_separation) {
                    let cand_value = merit.eval(&cand)?;
                    if cand_value.aug <= value.aug - ARMIJO_C * alpha * gsq {
                        *system = cand;
                        value = cand_value;
                        accepted_alpha = alpha;
                        break;
                    }
                }
                alpha *= 0.5;
            }

            total_inner += 1;
            let stepped = accepted_alpha > 0.0;
            if stepped {
                accepted_in_round += 1;
                accepted_since_reparam += 1;
                if value.barrier > 0.0 {
                    barrier_active = true;
                }
            }
            trace.push(TraceRow {
                iter: total_inner,
                outer,
                energy: value.energy,
                augmented: value.aug,
                res_area: rel_of(constraints, value.residuals)[0],
                res_vol: rel_of(constraints, value.residuals)[1],
                res_phase: rel_of(constraints, value.residuals)[2],
                step: accepted_alpha,
            });

            let phase_due =
                config.phase_move_period > 0 && (inner + 1) % config.phase_move_period == 0;
            if phase_due || !stepped {
                let moved = phase_move_round(system, &merit, value.aug, config, &mut rng)?;
                let record = PhaseMoveRecord {
                    iter: total_inner,
                    accepted: moved.as_ref().map(|(label, _)| label.clone()),
                    improvement: moved.as_ref().map_or(0.0, |(_, d)| *d),
                };
                let phase_accepted = record.accepted.is_some();
                phase_moves.push(record);
                if phase_accepted {
                    value = merit.eval(system)?;
                    accepted_in_round += 1;
                } else if !stepped {
                    // The line search underflowed and no phase move helps:
                    // this round is done.
                    break;
                }
            }

            if config.reparam_period > 0 && accepted_since_reparam >= config.reparam_period {
                let (cand, drifts) = reparametrization_maintenance(system)?;
                let cand_value = merit.eval(&cand)?;
                if cand_value.aug <= value.aug {
                    *system = cand;
                    value = cand_value;
                    reparam_drifts.push(drifts.into_iter().fold(0.0, f64::max));
                }
                accepted_since_reparam = 0;
            }

            if config.checkpoint_period > 0 && total_inner % config.checkpoint_period == 0 {
                if let Some(dir) = &config.checkpoint_dir {
                    let ckpt = meshio::Checkpoint::capture(
                        system,
                        params,
                        Some(meshio::CheckpointConstraints {
                            total_area: constraints.total_area,
                            phase_area: constraints.phase_area,
                            volume: constraints.volume,
                        }),
                        Some(state_snapshot(lambda, mu, outer, total_inner, &rng)),
                    );
                    let path = dir.join(format!("checkpoint_{total_inner:08}.json"));
                    meshio::write_checkpoint(&path, &ckpt)?;
                }
            }
        }

        outer_done = outer + 1;
        let res = constraints.relative_residuals(system);
        let res_norm = res.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
        if config.first_order_multipliers {
            let raw = constraints.residuals(system);
            for c in 0..3 {
                lambda[c] += mu * raw[c];
            }
        }
        if res_norm > PROGRESS_FACTOR * prev_res_norm {
            mu = (mu * config.mu_growth).min(MU_CAP);
        }
        prev_res_norm = res_norm;

        if accepted_in_round == 0 {
            stalled_outers += 1;
            if stalled_outers >= STALL_LIMIT {
                termination = TerminationReason::StepStalled;
                break;
            }
        } else {
            stalled_outers = 0;
        }
    }

    let merit = Merit {
        params,
        constraints,
        lambda,
        mu,
        x_min,
        strength,
    };
    let value = merit.eval(system)?;
    let grads = merit.gradient(system, value.residuals)?;
    let (_, ginf) = norms(&grads);
    let rel = constraints.relative_residuals(system);
    if termination != TerminationReason::Converged
        && rel.iter().all(|r| r.abs() <= config.constraint_tol)
        && ginf <= config.gradient_tol
    {
        termination = TerminationReason::Converged;
    }

    Ok(OptimizationReport {
        termination,
        trace,
        phase_moves,
        reparam_drifts,
        final_energy: value.energy,
        final_residuals: rel,
        final_gradient_norm: ginf,
        outer_rounds: outer_done,
        inner_iterations: total_inner,
        barrier_active,
        final_state: state_snapshot(lambda, mu, outer_done, total_inner, &rng),
        wall_time: started.elapsed(),
    })
}

fn rel_of(constraints: &ConstraintSet, raw: [f64; 3]) -> [f64; 3] {
    let bound = constraints.total_area.powf(1.5) / (6.0 * std::f64::consts::PI.sqrt());
    [
        raw[0] / constraints.total_area,
        raw[1] / constraints.volume.abs().max(bound),
        raw[2] / constraints.total_area,
    ]
}
