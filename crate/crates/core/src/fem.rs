//! P1 finite elements for the Helmholtz problem
//! `Δu + k²u = f` in the room minus the scatterers, with the impedance
//! condition `∂u/∂n = ±iku` on the outer wall and `∂u/∂n = 0` on scatterers.
//!
//! All integrands are polynomials of degree at most two on each element (or
//! edge), so the element and edge matrices below are exact.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{Field, Support};
use crate::mesh::{BoundaryTag, Mesh, Region};
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, CsrPattern};

/// Sign of the impedance term: `+1` for the forward problem, `-1` for its adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobinSign {
    Forward,
    Adjoint,
}

impl RobinSign {
    fn value<T: Real>(self) -> T {
        match self {
            RobinSign::Forward => T::one(),
            RobinSign::Adjoint => -T::one(),
        }
    }
}

/// Element stiffness `∫ ∇ψ_a · ∇ψ_b` for a P1 triangle.
pub fn element_stiffness<T: Real>(c: [[T; 2]; 3]) -> [[T; 3]; 3] {
    let area = crate::mesh::signed_area(c[0], c[1], c[2]);
    let mut g = [[T::zero(); 2]; 3];
    for a in 0..3 {
        let (p, q) = (c[(a + 1) % 3], c[(a + 2) % 3]);
        g[a] = [p[1] - q[1], q[0] - p[0]];
    }
    let inv = T::one() / (T::lit(4.0) * area);
    let mut k = [[T::zero(); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = (g[a][0] * g[b][0] + g[a][1] * g[b][1]) * inv;
        }
    }
    k
}

/// Element mass `∫ ψ_a ψ_b = |E| (1 + δ_ab) / 12`.
pub fn element_mass<T: Real>(area: T) -> [[T; 3]; 3] {
    let off = area / T::lit(12.0);
    let on = area / T::lit(6.0);
    [[on, off, off], [off, on, off], [off, off, on]]
}

/// Real matrices of one mesh sharing a single sparsity pattern.
#[derive(Debug, Clone)]
pub struct FemSpace<T> {
    mesh_id: u64,
    n: usize,
    pattern: Arc<CsrPattern>,
    stiffness: CsrMatrix<T>,
    mass: CsrMatrix<T>,
    mass_source: CsrMatrix<T>,
    mass_measurement: CsrMatrix<T>,
    /// `∫_{∂Ω} ψ_a ψ_b` over the outer wall only
    wall_mass: CsrMatrix<T>,
    source_mask: Vec<bool>,
    measurement_mask: Vec<bool>,
}

impl<T: Real> FemSpace<T> {
    pub fn new(mesh: &Mesh<T>) -> Self {
        let pattern = Arc::new(CsrPattern::from_mesh(mesh));
        let mut stiffness = CsrMatrix::zeros(Arc::clone(&pattern));
        let mut mass = CsrMatrix::zeros(Arc::clone(&pattern));
        let mut mass_source = CsrMatrix::zeros(Arc::clone(&pattern));
        let mut mass_measurement = CsrMatrix::zeros(Arc::clone(&pattern));
        let mut wall_mass = CsrMatrix::zeros(Arc::clone(&pattern));

        for (t, tri) in mesh.triangles().iter().enumerate() {
            let ke = element_stiffness(mesh.corners(t));
            let me = element_mass(mesh.area(t));
            let region = mesh.regions()[t];
            for a in 0..3 {
                for b in 0..3 {
                    let (i, j) = (tri[a], tri[b]);
                    stiffness.add_at(i, j, ke[a][b]);
                    mass.add_at(i, j, me[a][b]);
                    match region {
                        Region::Source => mass_source.add_at(i, j, me[a][b]),
                        Region::Measurement => mass_measurement.add_at(i, j, me[a][b]),
                        Region::Buffer => {}
                    }
                }
            }
        }
        let third = T::lit(1.0 / 3.0);
        let sixth = T::lit(1.0 / 6.0);
        for be in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Outer) {
            let [i, j] = be.vertices;
            let (p, q) = (mesh.vertices()[i], mesh.vertices()[j]);
            let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            wall_mass.add_at(i, i, len * third);
            wall_mass.add_at(j, j, len * third);
            wall_mass.add_at(i, j, len * sixth);
            wall_mass.add_at(j, i, len * sixth);
        }

        FemSpace {
            mesh_id: mesh.id(),
            n: mesh.num_vertices(),
            pattern,
            stiffness,
            mass,
            mass_source,
            mass_measurement,
            wall_mass,
            source_mask: mesh.region_vertex_mask(Region::Source),
            measurement_mask: mesh.region_vertex_mask(Region::Measurement),
        }
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.stiffness
    }

    pub fn wall_mass(&self) -> &CsrMatrix<T> {
        &self.wall_mass
    }

    /// Mass matrix restricted to the elements of `support`.
    pub fn mass(&self, support: Support) -> &CsrMatrix<T> {
        match support {
            Support::State => &self.mass,
            Support::Source => &self.mass_source,
            Support::Measurement => &self.mass_measurement,
        }
    }

    pub fn mask(&self, support: Support) -> Option<&[bool]> {
        match support {
            Support::State => None,
            Support::Source => Some(&self.source_mask),
            Support::Measurement => Some(&self.measurement_mask),
        }
    }

    /// `-K + k² M + sign · i k B`.
    pub fn helmholtz(&self, k: T, sign: RobinSign) -> CsrMatrix<Complex<T>> {
        let s: T = sign.value();
        let values = self
            .stiffness
            .values()
            .iter()
            .zip(self.mass.values())
            .zip(self.wall_mass.values())
            .map(|((&kk, &m), &b)| Complex::new(-kk + k * k * m, s * k * b))
            .collect();
        CsrMatrix::from_values(Arc::clone(&self.pattern), values).expect("shared pattern")
    }

    fn check(&self, f: &Field<T>) -> Result<()> {
        if f.mesh_id() != self.mesh_id || f.len() != self.n {
            return Err(Error::MeshMismatch { field: f.mesh_id(), mesh: self.mesh_id });
        }
        Ok(())
    }

    /// Load vector `b_p = ∫ f_h ψ_p` with `f_h` extended by zero outside its support.
    pub fn load(&self, f: &Field<T>) -> Result<Vec<Complex<T>>> {
        self.check(f)?;
        self.mass(f.support()).mul_vec(f.values())
    }

    /// `Re ∫_region f ḡ` via the region mass matrix.
    pub fn inner_product(&self, f: &Field<T>, g: &Field<T>, region: Support) -> Result<T> {
        self.check(f)?;
        self.check(g)?;
        let mg = self.mass(region).mul_vec(g.values())?;
        Ok(f.values().iter().zip(&mg).map(|(a, b)| (a.conj() * b).re).sum())
    }

    pub fn norm(&self, f: &Field<T>, region: Support) -> Result<T> {
        Ok(self.inner_product(f, f, region)?.max(T::zero()).sqrt())
    }
}

/// Assembles `A[p,q] = -∫∇ψ_p·∇ψ_q + k²∫ψ_pψ_q ± ik∫_{∂Ω}ψ_pψ_q`.
pub fn assemble_helmholtz<T: Real>(mesh: &Mesh<T>, k: T, sign: RobinSign) -> CsrMatrix<Complex<T>> {
    FemSpace::new(mesh).helmholtz(k, sign)
}

pub fn assemble_load<T: Real>(mesh: &Mesh<T>, f: &Field<T>) -> Result<Vec<Complex<T>>> {
    f.ensure_on(mesh)?;
    FemSpace::new(mesh).load(f)
}

pub fn inner_product<T: Real>(mesh: &Mesh<T>, f: &Field<T>, g: &Field<T>, region: Support) -> Result<T> {
    f.ensure_on(mesh)?;
    g.ensure_on(mesh)?;
    FemSpace::new(mesh).inner_product(f, g, region)
}
