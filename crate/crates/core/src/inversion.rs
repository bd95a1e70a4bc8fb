//! Landweber iteration on a fixed mesh ("direct") and the bi-level variant
//! that refines the FEM mesh whenever the modelled discretization error
//! `C·h` exceeds the precision budget `δ/q^j` of the current iteration.
//! Both stop at the first iterate satisfying the discrepancy principle.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FemSpace;
use crate::field::{transfer, Field, Support};
use crate::mesh::Mesh;
use crate::operators::{estimate_operator_norm, DiscreteOperatorPair, SourceMap};
use crate::refine::refine;
use crate::scalar::Real;

/// Safety factor in `μ = AUTO_STEP_FACTOR / ||F||²`.
pub const AUTO_STEP_FACTOR: f64 = 0.9;

/// Power-iteration sweeps used to resolve [`StepSize::Auto`].
pub const AUTO_STEP_SWEEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize<T> {
    /// `0.9 / ||F||²` estimated on the first working mesh.
    Auto,
    Fixed(T),
}

/// How the constant `C` of the error model `ε = C·h` is derived from `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "factor")]
pub enum PrecisionRule<T> {
    /// `C = factor · δ`; the refinement schedule is then independent of the
    /// data scale and refinement is due once `q^j > 1 / (factor · h)`.
    Proportional(T),
    /// `C = factor / δ`; refinement is due once `q^j > δ² / (factor · h)`.
    Inverse(T),
    /// `C = factor`.
    Constant(T),
}

impl<T: Real> PrecisionRule<T> {
    pub fn constant(&self, delta: T) -> T {
        match *self {
            PrecisionRule::Proportional(c) => c * delta,
            PrecisionRule::Inverse(c) => c / delta,
            PrecisionRule::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig<T> {
    pub step: StepSize<T>,
    /// Discrepancy factor `τ > 1`.
    pub tau: T,
    /// Precision ratio `q > 1`.
    pub q: T,
    pub precision: PrecisionRule<T>,
    /// Target size of the first bi-level mesh.
    pub h0: T,
    /// Bi-level meshes are never refined below this size.
    pub h_min: T,
    /// Relative noise level of the synthetic data.
    pub noise_level: T,
    pub seed: u64,
    pub j_max: usize,
}

impl<T: Real> Default for InversionConfig<T> {
    fn default() -> Self {
        InversionConfig {
            step: StepSize::Auto,
            tau: T::lit(1.3),
            q: T::lit(2f64.powf(1.0 / 60.0)),
            precision: PrecisionRule::Proportional(T::lit(1.4)),
            h0: T::lit(0.531),
            h_min: T::lit(0.046),
            noise_level: T::lit(0.01),
            seed: 2024,
            j_max: 5000,
        }
    }
}

impl<T: Real> InversionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.tau > T::one()) {
            return bad(format!("tau must exceed 1, got {}", self.tau));
        }
        if !(self.q > T::one()) {
            return bad(format!("q must exceed 1, got {}", self.q));
        }
        if !(self.h0 > T::zero()) {
            return bad(format!("h0 must be positive, got {}", self.h0));
        }
        if !(self.h_min > T::zero()) {
            return bad(format!("h_min must be positive, got {}", self.h_min));
        }
        if !(self.noise_level >= T::zero()) {
            return bad(format!("noise level must be non-negative, got {}", self.noise_level));
        }
        if let StepSize::Fixed(mu) = self.step {
            if !(mu > T::zero()) {
                return bad(format!("step size must be positive, got {mu}"));
            }
        }
        let factor = match self.precision {
            PrecisionRule::Proportional(c) | PrecisionRule::Inverse(c) | PrecisionRule::Constant(c) => c,
        };
        if !(factor > T::zero()) {
            return bad(format!("precision factor must be positive, got {factor}"));
        }
        Ok(())
    }
}

/// Adds complex white noise on the measurement vertices, scaled so that
/// `||noise|| = level · ||y||` in `L²(Ω₁)`. Returns the noisy data and `δ`.
pub fn add_noise<T: Real>(space: &FemSpace<T>, y: &Field<T>, level: T, seed: u64) -> Result<(Field<T>, T)> {
    if !(level > T::zero()) {
        return Err(Error::Argument(format!("noise level must be positive, got {level}")));
    }
    let ynorm = space.norm(y, Support::Measurement)?;
    if ynorm == T::zero() {
        return Err(Error::Argument("relative noise is undefined for vanishing data".into()));
    }
    let mask = space.mask(Support::Measurement).expect("measurement mask");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Complex<T>> = mask
        .iter()
        .map(|&keep| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if keep {
                Complex::new(T::lit(re), T::lit(im))
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
        .collect();
    let noise = Field::from_raw(y.mesh_id(), raw, Support::Measurement);
    let delta = level * ynorm;
    let scale = delta / space.norm(&noise, Support::Measurement)?;
    let noisy = y.axpy(scale, &noise)?;
    Ok((noisy, delta))
}

/// One Landweber update `φ - μ F*(Fφ - y)`; also returns `||Fφ - y||`.
pub fn landweber_step<T: Real, O: SourceMap<T> + ?Sized>(
    op: &O,
    phi: &Field<T>,
    data: &Field<T>,
    mu: T,
) -> Result<(Field<T>, T)> {
    let v = op.forward(phi)?.axpy(-T::one(), data)?;
    let residual = op.observation_norm(&v)?;
    let z = op.adjoint(&v)?;
    Ok((phi.axpy(-mu, &z)?, residual))
}

/// Discrepancy principle `||y^δ - Fφ|| <= τδ` (inclusive).
pub fn discrepancy_met<T: Real>(residual: T, tau: T, delta: T) -> bool {
    residual <= tau * delta
}

/// Iteration index from which a mesh of size `h` misses the precision
/// budget: `(ln δ - ln(C·h)) / ln q`.
pub fn refinement_threshold<T: Real>(delta: T, c: T, h: T, q: T) -> T {
    (delta.ln() - (c * h).ln()) / q.ln()
}

/// `C·h ≥ δ/q^j`, i.e. `j` has reached [`refinement_threshold`]. Evaluated
/// in log form with a relative slack of a few ulps so that exact ties
/// count as due.
pub fn refinement_due<T: Real>(j: usize, delta: T, c: T, h: T, q: T) -> bool {
    let threshold = refinement_threshold(delta, c, h, q);
    let j = T::from_usize(j).expect("iteration index");
    j >= threshold - T::lit(64.0) * T::epsilon() * threshold.abs().max(T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    Discrepancy,
    IterationCap,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Discrepancy => "DISCREPANCY",
            StopReason::IterationCap => "ITERATION_CAP",
        })
    }
}

/// Cumulative wall time per phase, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    /// Operator construction on the first mesh and step-size estimation.
    pub setup: f64,
    /// Mesh refinement, field transfer and operator rebuilds.
    pub refine: f64,
    /// Adjoint solve and update.
    pub step: f64,
    /// Forward solve and residual norm.
    pub residual: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.setup + self.refine + self.step + self.residual
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub j: usize,
    pub residual: f64,
    /// `||φ^j - φ†||` in `L²(Ω₀)`; NaN when no reference source is known.
    pub error: f64,
    pub times: PhaseTimes,
    pub mesh_id: u64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementEvent {
    pub j: usize,
    pub old_h: f64,
    pub new_h: f64,
    pub vertices: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub records: Vec<IterationRecord>,
    pub refinements: Vec<RefinementEvent>,
    pub stop_reason: StopReason,
    pub delta: f64,
    pub tau: f64,
    pub mu: f64,
}

impl History {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("histories are never empty")
    }

    pub fn final_residual(&self) -> f64 {
        self.last().residual
    }

    pub fn final_error(&self) -> f64 {
        self.last().error
    }

    pub fn total_time(&self) -> f64 {
        self.last().times.total()
    }

    pub fn iterations(&self) -> usize {
        self.last().j
    }

    pub fn mesh_sizes(&self) -> Vec<f64> {
        let mut out = vec![self.records[0].h];
        out.extend(self.refinements.iter().map(|e| e.new_h));
        out
    }
}

/// Reference source used to report reconstruction errors.
pub type TruthFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Noisy measurements on a fine data mesh together with their noise level.
#[derive(Clone)]
pub struct InverseProblem<T> {
    pub wave_number: T,
    pub data_mesh: Mesh<T>,
    /// `y^δ` on the data mesh, supported on the measurement zone.
    pub data: Field<T>,
    pub delta: T,
    pub truth: Option<TruthFn<T>>,
}

/// Iterate at the end of one mesh level.
#[derive(Debug, Clone)]
pub struct LevelSnapshot<T> {
    pub mesh: Mesh<T>,
    pub source: Field<T>,
    /// Last iteration index performed on this mesh.
    pub last_j: usize,
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub history: History,
    /// One entry per mesh the iteration visited, in order.
    pub levels: Vec<LevelSnapshot<T>>,
}

impl<T: Real> Reconstruction<T> {
    pub fn final_level(&self) -> &LevelSnapshot<T> {
        self.levels.last().expect("at least one level")
    }
}

struct Level<T: Real> {
    mesh: Mesh<T>,
    op: DiscreteOperatorPair<T>,
    data: Field<T>,
    truth: Option<Field<T>>,
    h: T,
}

impl<T: Real> Level<T> {
    fn build(problem: &InverseProblem<T>, mesh: Mesh<T>) -> Result<Self> {
        let op = DiscreteOperatorPair::new(&mesh, problem.wave_number)?;
        let data = transfer(&problem.data, &problem.data_mesh, &mesh)?;
        let truth = problem
            .truth
            .as_ref()
            .map(|f| Field::from_fn(&mesh, Support::Source, |x, y| Complex::new(f(x, y), T::zero())));
        let h = mesh.mesh_size()?;
        Ok(Level { mesh, op, data, truth, h })
    }

    fn error(&self, phi: &Field<T>) -> Result<f64> {
        match &self.truth {
            Some(t) => Ok(self.op.source_norm(&phi.axpy(-T::one(), t)?)?.to_f64_lossy()),
            None => Ok(f64::NAN),
        }
    }
}

/// Resolves the step size on a given operator.
pub fn resolve_step<T: Real, O: SourceMap<T> + ?Sized>(step: StepSize<T>, op: &O, seed: u64) -> Result<T> {
    match step {
        StepSize::Fixed(mu) => Ok(mu),
        StepSize::Auto => {
            let est = estimate_operator_norm(op, AUTO_STEP_SWEEPS, seed)?;
            if est.norm == T::zero() {
                return Err(Error::Argument("operator norm estimate vanished".into()));
            }
            Ok(T::lit(AUTO_STEP_FACTOR) / (est.norm * est.norm))
        }
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Landweber iteration on the single mesh `mesh`.
pub fn run_direct<T: Real>(
    problem: &InverseProblem<T>,
    config: &InversionConfig<T>,
    mesh: Mesh<T>,
) -> Result<Reconstruction<T>> {
    run(problem, config, mesh, false)
}

/// Bi-level Landweber iteration starting on `initial_mesh`.
///
/// Before each iteration `j` the refinement trigger is evaluated with the
/// current mesh size; when it fires (and the halved size stays at or above
/// `h_min`) every element larger than half the current size is refined, the
/// iterate is carried over by nodal interpolation, the data are
/// re-interpolated from the data mesh and both factorizations are rebuilt.
/// At most one refinement happens per iteration.
pub fn run_bilevel<T: Real>(
    problem: &InverseProblem<T>,
    config: &InversionConfig<T>,
    initial_mesh: Mesh<T>,
) -> Result<Reconstruction<T>> {
    run(problem, config, initial_mesh, true)
}

fn run<T: Real>(
    problem: &InverseProblem<T>,
    config: &InversionConfig<T>,
    mesh: Mesh<T>,
    bilevel: bool,
) -> Result<Reconstruction<T>> {
    config.validate()?;
    let mut times = PhaseTimes::default();
    let clock = Instant::now();
    let mut level = Level::build(problem, mesh)?;
    let mu = resolve_step(config.step, &level.op, config.seed)?;
    times.setup = secs(clock.elapsed());

    let delta = problem.delta;
    let c = config.precision.constant(delta);
    let half = T::lit(0.5);
    let floor = config.h_min * (T::one() - T::lit(1e-9));

    let mut phi = Field::zeros(&level.mesh, Support::Source);
    let mut records = Vec::new();
    let mut refinements = Vec::new();
    let mut levels = Vec::new();
    let mut j = 0usize;
    let stop_reason = loop {
        if bilevel && refinement_due(j, delta, c, level.h, config.q) && level.h * half >= floor {
            let clock = Instant::now();
            let fine = refine(&level.mesh, level.h * half)?;
            let next = Level::build(problem, fine)?;
            let moved = transfer(&phi, &level.mesh, &next.mesh)?;
            times.refine += secs(clock.elapsed());
            refinements.push(RefinementEvent {
                j,
                old_h: level.h.to_f64_lossy(),
                new_h: next.h.to_f64_lossy(),
                vertices: next.mesh.num_vertices(),
            });
            let old = std::mem::replace(&mut level, next);
            levels.push(LevelSnapshot { mesh: old.mesh, source: phi, last_j: j.saturating_sub(1) });
            phi = moved;
        }

        let clock = Instant::now();
        let v = level.op.forward(&phi)?.axpy(-T::one(), &level.data)?;
        let residual = level.op.observation_norm(&v)?;
        times.residual += secs(clock.elapsed());

        records.push(IterationRecord {
            j,
            residual: residual.to_f64_lossy(),
            error: level.error(&phi)?,
            times,
            mesh_id: level.mesh.id(),
            h: level.h.to_f64_lossy(),
        });
        if discrepancy_met(residual, config.tau, delta) {
            break StopReason::Discrepancy;
        }
        if j >= config.j_max {
            break StopReason::IterationCap;
        }

        let clock = Instant::now();
        let z = level.op.adjoint(&v)?;
        phi = phi.axpy(-mu, &z)?;
        times.step += secs(clock.elapsed());
        j += 1;
    };
    levels.push(LevelSnapshot { mesh: level.mesh, source: phi, last_j: j });

    Ok(Reconstruction {
        history: History {
            records,
            refinements,
            stop_reason,
            delta: delta.to_f64_lossy(),
            tau: config.tau.to_f64_lossy(),
            mu: mu.to_f64_lossy(),
        },
        levels,
    })
}
