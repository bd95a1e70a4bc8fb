//! Source-to-observable map `F: φ ↦ u|_{Ω₁}` and its adjoint
//! `F*v = Re(z)|_{Ω₀}`, where `z` solves the Helmholtz problem with the
//! conjugate impedance condition and load `v`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{FemSpace, RobinSign};
use crate::field::{support_mask, Field, Support};
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::skyline::SkylineLdlt;

/// Relative change of the Rayleigh quotient at which power iteration stops.
pub const POWER_ITERATION_TOLERANCE: f64 = 1e-3;

/// A linear map from real sources on `Ω₀` to complex observations on `Ω₁`.
pub trait SourceMap<T: Real> {
    fn space(&self) -> &FemSpace<T>;
    fn forward(&self, phi: &Field<T>) -> Result<Field<T>>;
    fn adjoint(&self, v: &Field<T>) -> Result<Field<T>>;

    fn source_inner(&self, a: &Field<T>, b: &Field<T>) -> Result<T> {
        self.space().inner_product(a, b, Support::Source)
    }

    fn observation_inner(&self, a: &Field<T>, b: &Field<T>) -> Result<T> {
        self.space().inner_product(a, b, Support::Measurement)
    }

    fn source_norm(&self, a: &Field<T>) -> Result<T> {
        self.space().norm(a, Support::Source)
    }

    fn observation_norm(&self, a: &Field<T>) -> Result<T> {
        self.space().norm(a, Support::Measurement)
    }
}

/// Forward and adjoint factorizations for one mesh and wave number.
#[derive(Debug, Clone)]
pub struct DiscreteOperatorPair<T> {
    space: FemSpace<T>,
    wave_number: T,
    forward: SkylineLdlt<T>,
    adjoint: SkylineLdlt<T>,
}

impl<T: Real> DiscreteOperatorPair<T> {
    pub fn new(mesh: &Mesh<T>, wave_number: T) -> Result<Self> {
        let space = FemSpace::new(mesh);
        Self::from_space(space, wave_number)
    }

    pub fn from_space(space: FemSpace<T>, wave_number: T) -> Result<Self> {
        let forward = SkylineLdlt::factor(&space.helmholtz(wave_number, RobinSign::Forward))?;
        let adjoint = SkylineLdlt::factor(&space.helmholtz(wave_number, RobinSign::Adjoint))?;
        Ok(DiscreteOperatorPair { space, wave_number, forward, adjoint })
    }

    pub fn mesh_id(&self) -> u64 {
        self.space.mesh_id()
    }

    pub fn wave_number(&self) -> T {
        self.wave_number
    }

    fn check(&self, f: &Field<T>, support: Support) -> Result<()> {
        if f.mesh_id() != self.space.mesh_id() || f.len() != self.space.dim() {
            return Err(Error::MeshMismatch { field: f.mesh_id(), mesh: self.space.mesh_id() });
        }
        if f.support() != support {
            return Err(Error::Argument(format!("expected a field supported on {support:?}, got {:?}", f.support())));
        }
        Ok(())
    }

    /// Full state `u` on the computational domain for source `φ`.
    pub fn solve_state(&self, phi: &Field<T>) -> Result<Field<T>> {
        self.check(phi, Support::Source)?;
        let b = self.space.load(phi)?;
        let u = solve_with(&self.forward, &b)?;
        Ok(Field::from_raw(self.mesh_id(), u, Support::State))
    }

    /// Full adjoint state `z` for observation-space load `v`.
    pub fn solve_adjoint_state(&self, v: &Field<T>) -> Result<Field<T>> {
        self.check(v, Support::Measurement)?;
        let b = self.space.load(v)?;
        let z = solve_with(&self.adjoint, &b)?;
        Ok(Field::from_raw(self.mesh_id(), z, Support::State))
    }
}

fn solve_with<T: Real>(f: &SkylineLdlt<T>, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    if cfg!(debug_assertions) {
        f.solve_checked(b)
    } else {
        f.solve(b)
    }
}

impl<T: Real> SourceMap<T> for DiscreteOperatorPair<T> {
    fn space(&self) -> &FemSpace<T> {
        &self.space
    }

    fn forward(&self, phi: &Field<T>) -> Result<Field<T>> {
        let u = self.solve_state(phi)?;
        Ok(restrict_with(&u, Support::Measurement, &self.space))
    }

    fn adjoint(&self, v: &Field<T>) -> Result<Field<T>> {
        let z = self.solve_adjoint_state(v)?;
        let mut out = restrict_with(&z, Support::Source, &self.space);
        for x in out.values_mut() {
            x.im = T::zero();
        }
        Ok(out)
    }
}

pub fn forward_apply<T: Real>(op: &DiscreteOperatorPair<T>, phi: &Field<T>) -> Result<Field<T>> {
    op.forward(phi)
}

pub fn adjoint_apply<T: Real>(op: &DiscreteOperatorPair<T>, v: &Field<T>) -> Result<Field<T>> {
    op.adjoint(v)
}

fn restrict_with<T: Real>(f: &Field<T>, support: Support, space: &FemSpace<T>) -> Field<T> {
    let mut out = Field::from_raw(f.mesh_id(), f.values().to_vec(), support);
    if let Some(mask) = space.mask(support) {
        out.apply_mask(mask);
    }
    out
}

/// Zeroes every vertex outside the closure of `support` and re-annotates.
pub fn restrict<T: Real>(f: &Field<T>, mesh: &Mesh<T>, support: Support) -> Result<Field<T>> {
    f.ensure_on(mesh)?;
    let mut out = Field::from_raw(f.mesh_id(), f.values().to_vec(), support);
    out.apply_mask(&support_mask(mesh, support));
    Ok(out)
}

/// Re-annotates a region-supported field as a state-space field.
pub fn extend_by_zero<T: Real>(f: &Field<T>) -> Field<T> {
    Field::from_raw(f.mesh_id(), f.values().to_vec(), Support::State)
}

/// Result of power iteration on `F*F`.
#[derive(Debug, Clone)]
pub struct NormEstimate<T> {
    /// Estimate of `||F||`.
    pub norm: T,
    /// Rayleigh quotient of `F*F` after each sweep.
    pub rayleigh: Vec<T>,
}

/// Power iteration on `F*F` from a seeded random source.
///
/// Stops once the Rayleigh quotient changes by less than
/// [`POWER_ITERATION_TOLERANCE`] (relative) or after `iterations` sweeps.
pub fn estimate_operator_norm<T: Real, O: SourceMap<T> + ?Sized>(
    op: &O,
    iterations: usize,
    seed: u64,
) -> Result<NormEstimate<T>> {
    if iterations < 10 {
        return Err(Error::Argument(format!("power iteration needs at least 10 sweeps, got {iterations}")));
    }
    let space = op.space();
    let mask = space.mask(Support::Source).expect("source mask");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<Complex<T>> = mask
        .iter()
        .map(|&keep| {
            let r: f64 = rng.random_range(-1.0..1.0);
            Complex::new(if keep { T::lit(r) } else { T::zero() }, T::zero())
        })
        .collect();
    let mut x = Field::from_raw(space.mesh_id(), values, Support::Source);
    let n0 = op.source_norm(&x)?;
    if n0 == T::zero() {
        return Err(Error::Argument("power iteration start vector vanishes".into()));
    }
    x = x.scaled(T::one() / n0);

    let tol = T::lit(POWER_ITERATION_TOLERANCE);
    let mut rayleigh: Vec<T> = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let w = op.adjoint(&op.forward(&x)?)?;
        let lambda = op.source_inner(&x, &w)?.max(T::zero());
        let prev = rayleigh.last().copied();
        rayleigh.push(lambda);
        let wn = op.source_norm(&w)?;
        if wn == T::zero() {
            break;
        }
        if let Some(p) = prev {
            if (lambda - p).abs() <= tol * lambda {
                break;
            }
        }
        x = w.scaled(T::one() / wn);
    }
    let lambda = *rayleigh.last().expect("at least one sweep");
    Ok(NormEstimate { norm: lambda.sqrt(), rayleigh })
}
