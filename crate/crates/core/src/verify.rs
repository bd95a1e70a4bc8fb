//! Self-checks of the discretization: adjoint consistency, convergence of
//! the forward solver under mesh refinement, and residual monotonicity of
//! fixed-mesh Landweber.

use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{transfer, Field, Support};
use crate::geometry::GeometrySpec;
use crate::inversion::{add_noise, landweber_step, resolve_step, StepSize};
use crate::mesh::{generate_mesh, Mesh};
use crate::operators::{estimate_operator_norm, DiscreteOperatorPair, SourceMap};
use crate::scalar::Real;

/// Smooth source vanishing on the boundary of the default source square.
pub fn smooth_source<T: Real>(x: T, y: T) -> T {
    (T::PI() * x).cos() * (T::PI() * y).cos()
}

fn random_field<T: Real>(mesh: &Mesh<T>, support: Support, rng: &mut ChaCha8Rng) -> Field<T> {
    let complex = support != Support::Source;
    let values = (0..mesh.num_vertices())
        .map(|_| {
            let re: f64 = rng.random_range(-1.0..1.0);
            let im: f64 = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    Field::new(mesh, values, support).expect("vertex count matches")
}

#[derive(Debug, Clone)]
pub struct AdjointReport {
    pub vertices: usize,
    pub norm_estimate: f64,
    /// `|⟨Fφ,v⟩ - ⟨φ,F*v⟩| / (||φ|| ||v|| ||F||)` per pair.
    pub gaps: Vec<f64>,
    pub seconds: f64,
}

/// Relative tolerance on the adjoint gap.
pub const ADJOINT_TOLERANCE: f64 = 1e-6;
/// Expected convergence order of the forward solver and allowed deviation.
pub const EXPECTED_ORDER: f64 = 2.0;
pub const ORDER_TOLERANCE: f64 = 0.3;
/// Absolute slack allowed between consecutive Landweber residuals.
pub const MONOTONICITY_SLACK: f64 = 1e-12;

impl AdjointReport {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_gap() <= ADJOINT_TOLERANCE
    }
}

pub fn adjoint_suite<T: Real>(geometry: &GeometrySpec<T>, h: T, pairs: usize, seed: u64) -> Result<AdjointReport> {
    let clock = Instant::now();
    let mesh = generate_mesh(geometry, h)?;
    let op = DiscreteOperatorPair::new(&mesh, geometry.wave_number)?;
    let norm = estimate_operator_norm(&op, 100, seed)?.norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaps = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let phi = random_field(&mesh, Support::Source, &mut rng);
        let v = random_field(&mesh, Support::Measurement, &mut rng);
        let lhs = op.observation_inner(&op.forward(&phi)?, &v)?;
        let rhs = op.source_inner(&phi, &op.adjoint(&v)?)?;
        let scale = op.source_norm(&phi)? * op.observation_norm(&v)? * norm;
        gaps.push(((lhs - rhs).abs() / scale).to_f64_lossy());
    }
    Ok(AdjointReport {
        vertices: mesh.num_vertices(),
        norm_estimate: norm.to_f64_lossy(),
        gaps,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Actual mesh sizes of the test meshes.
    pub sizes: Vec<f64>,
    pub oracle_size: f64,
    /// Relative `L²(Ω₁)` distance to the oracle solution, per mesh.
    pub errors: Vec<f64>,
    pub seconds: f64,
}

impl ConvergenceReport {
    /// Least-squares slope of `log(error)` against `log(h)`.
    pub fn order(&self) -> f64 {
        let n = self.sizes.len() as f64;
        let xs: Vec<f64> = self.sizes.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = self.errors.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }

    pub fn passed(&self) -> bool {
        (self.order() - EXPECTED_ORDER).abs() <= ORDER_TOLERANCE && self.errors.windows(2).all(|e| e[1] < e[0])
    }

    /// Observed orders between consecutive meshes.
    pub fn pairwise_orders(&self) -> Vec<f64> {
        self.sizes
            .windows(2)
            .zip(self.errors.windows(2))
            .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
            .collect()
    }
}

/// Solves the forward problem for [`smooth_source`] on meshes of the given
/// target sizes and on an oracle mesh, and measures each solution against
/// the oracle interpolated onto its mesh.
pub fn convergence_suite<T: Real>(geometry: &GeometrySpec<T>, targets: &[T], oracle_h: T) -> Result<ConvergenceReport> {
    let clock = Instant::now();
    let solve = |mesh: &Mesh<T>| -> Result<(DiscreteOperatorPair<T>, Field<T>)> {
        let op = DiscreteOperatorPair::new(mesh, geometry.wave_number)?;
        let phi = Field::from_fn(mesh, Support::Source, |x, y| Complex::new(smooth_source(x, y), T::zero()));
        let u = op.forward(&phi)?;
        Ok((op, u))
    };
    let oracle_mesh = generate_mesh(geometry, oracle_h)?.with_id(u64::MAX);
    let (_, oracle) = solve(&oracle_mesh)?;
    let mut sizes = Vec::new();
    let mut errors = Vec::new();
    for &h in targets {
        let mesh = generate_mesh(geometry, h)?;
        let (op, u) = solve(&mesh)?;
        let reference = transfer(&oracle, &oracle_mesh, &mesh)?;
        let err = op.observation_norm(&u.axpy(-T::one(), &reference)?)? / op.observation_norm(&reference)?;
        sizes.push(mesh.mesh_size()?.to_f64_lossy());
        errors.push(err.to_f64_lossy());
    }
    Ok(ConvergenceReport {
        sizes,
        oracle_size: oracle_mesh.mesh_size()?.to_f64_lossy(),
        errors,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub mu: f64,
    pub residuals: Vec<f64>,
}

impl MonotonicityReport {
    /// Largest increase between consecutive residuals (negative if strictly
    /// decreasing throughout).
    pub fn max_increase(&self) -> f64 {
        self.residuals.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_increase() <= MONOTONICITY_SLACK
    }
}

/// Runs `steps` Landweber steps with the automatic step size on noisy data
/// of the smooth source, all on one mesh.
pub fn monotonicity_suite<T: Real>(
    geometry: &GeometrySpec<T>,
    h: T,
    steps: usize,
    noise_level: T,
    seed: u64,
) -> Result<MonotonicityReport> {
    let mesh = generate_mesh(geometry, h)?;
    let op = DiscreteOperatorPair::new(&mesh, geometry.wave_number)?;
    let truth = Field::from_fn(&mesh, Support::Source, |x, y| Complex::new(smooth_source(x, y), T::zero()));
    let (data, _) = add_noise(op.space(), &op.forward(&truth)?, noise_level, seed)?;
    let mu = resolve_step(StepSize::Auto, &op, seed)?;
    let mut phi = Field::zeros(&mesh, Support::Source);
    let mut residuals = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, r) = landweber_step(&op, &phi, &data, mu)?;
        residuals.push(r.to_f64_lossy());
        phi = next;
    }
    Ok(MonotonicityReport { mu: mu.to_f64_lossy(), residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_exact_power_law() {
        let r = ConvergenceReport {
            sizes: vec![0.4, 0.2, 0.1],
            oracle_size: 0.01,
            errors: vec![0.16, 0.04, 0.01],
            seconds: 0.0,
        };
        assert!((r.order() - 2.0).abs() < 1e-12);
        for o in r.pairwise_orders() {
            assert!((o - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_source_vanishes_on_square_boundary() {
        assert!(smooth_source(0.5f64, 0.1).abs() < 1e-15);
        assert!(smooth_source(-0.2f64, -0.5).abs() < 1e-15);
        assert_eq!(smooth_source(0.0f64, 0.0), 1.0);
    }

    #[test]
    fn small_adjoint_run() {
        let r = adjoint_suite(&GeometrySpec::<f64>::default(), 0.531, 3, 1).unwrap();
        assert_eq!(r.gaps.len(), 3);
        assert!(r.max_gap() < 1e-10, "{}", r.max_gap());
    }
}
