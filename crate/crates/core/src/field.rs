//! Nodal P1 fields attached to a mesh, and transfer between meshes.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, Region};
use crate::scalar::{czero, Real};

/// Region on which a field is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Support {
    /// Source square; fields are real.
    Source,
    /// Whole computational domain.
    State,
    /// Measurement zone.
    Measurement,
}

impl Support {
    pub fn region(self) -> Option<Region> {
        match self {
            Support::Source => Some(Region::Source),
            Support::Measurement => Some(Region::Measurement),
            Support::State => None,
        }
    }
}

/// Vertices lying in the closure of `support` on `mesh`.
pub fn support_mask<T: Real>(mesh: &Mesh<T>, support: Support) -> Vec<bool> {
    match support.region() {
        Some(r) => mesh.region_vertex_mask(r),
        None => vec![true; mesh.num_vertices()],
    }
}

/// Per-vertex values of a P1 function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    mesh_id: u64,
    values: Vec<Complex<T>>,
    support: Support,
}

impl<T: Real> Field<T> {
    pub fn zeros(mesh: &Mesh<T>, support: Support) -> Self {
        Field { mesh_id: mesh.id(), values: vec![czero(); mesh.num_vertices()], support }
    }

    /// Wraps raw values; entries outside the support are zeroed.
    pub fn new(mesh: &Mesh<T>, values: Vec<Complex<T>>, support: Support) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Dimension { expected: mesh.num_vertices(), got: values.len() });
        }
        let mut f = Field { mesh_id: mesh.id(), values, support };
        f.apply_mask(&support_mask(mesh, support));
        if support == Support::Source {
            for v in &mut f.values {
                v.im = T::zero();
            }
        }
        Ok(f)
    }

    pub fn from_real(mesh: &Mesh<T>, values: &[T], support: Support) -> Result<Self> {
        Self::new(mesh, values.iter().map(|&x| Complex::new(x, T::zero())).collect(), support)
    }

    /// Samples `f` at the vertices in the closure of `support`.
    pub fn from_fn<F: Fn(T, T) -> Complex<T>>(mesh: &Mesh<T>, support: Support, f: F) -> Self {
        let mask = support_mask(mesh, support);
        let values =
            mesh.vertices().iter().zip(&mask).map(|(p, &keep)| if keep { f(p[0], p[1]) } else { czero() }).collect();
        Field { mesh_id: mesh.id(), values, support }
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == T::zero())
    }

    pub fn real_parts(&self) -> Vec<T> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub(crate) fn from_raw(mesh_id: u64, values: Vec<Complex<T>>, support: Support) -> Self {
        Field { mesh_id, values, support }
    }

    pub(crate) fn apply_mask(&mut self, mask: &[bool]) {
        for (v, &keep) in self.values.iter_mut().zip(mask) {
            if !keep {
                *v = czero();
            }
        }
    }

    pub fn ensure_on(&self, mesh: &Mesh<T>) -> Result<()> {
        if self.mesh_id != mesh.id() || self.values.len() != mesh.num_vertices() {
            return Err(Error::MeshMismatch { field: self.mesh_id, mesh: mesh.id() });
        }
        Ok(())
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= a;
        }
        out
    }

    /// `self + a * other`, keeping `self`'s support.
    pub fn axpy(&self, a: T, other: &Field<T>) -> Result<Self> {
        if other.mesh_id != self.mesh_id || other.len() != self.len() {
            return Err(Error::MeshMismatch { field: other.mesh_id, mesh: self.mesh_id });
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += *w * a;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// Writes `vertex_index re im` lines.
    pub fn write_values<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{} {} {}", i, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Uniform bucket grid over triangle bounding boxes for point location.
pub struct PointLocator<'a, T> {
    mesh: &'a Mesh<T>,
    origin: Point<T>,
    cell: T,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a, T: Real> PointLocator<'a, T> {
    pub fn new(mesh: &'a Mesh<T>) -> Self {
        let (mut lo, mut hi) = ([T::infinity(); 2], [T::neg_infinity(); 2]);
        for p in mesh.vertices() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let n = mesh.num_triangles().max(1);
        let side = ((n as f64).sqrt().ceil() as usize).max(1);
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(T::geometric_eps());
        let cell = extent / T::from_usize(side).unwrap() * T::lit(1.0 + 1e-9);
        let (nx, ny) = (side, side);
        let mut buckets = vec![Vec::new(); nx * ny];
        let eps = T::geometric_eps();
        let idx = |x: T, n: usize| -> usize {
            let i = (x / cell).floor().to_isize().unwrap_or(0);
            i.clamp(0, n as isize - 1) as usize
        };
        for t in 0..mesh.num_triangles() {
            let cs = mesh.corners(t);
            let (mut tlo, mut thi) = ([T::infinity(); 2], [T::neg_infinity(); 2]);
            for p in cs {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(p[d]);
                    thi[d] = thi[d].max(p[d]);
                }
            }
            let (i0, i1) = (idx(tlo[0] - lo[0] - eps, nx), idx(thi[0] - lo[0] + eps, nx));
            let (j0, j1) = (idx(tlo[1] - lo[1] - eps, ny), idx(thi[1] - lo[1] + eps, ny));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        PointLocator { mesh, origin: lo, cell, nx, ny, buckets }
    }

    /// Element containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: Point<T>) -> Option<(usize, [T; 3])> {
        let tol = T::geometric_eps();
        let idx = |x: T, n: usize| -> Option<usize> {
            let i = (x / self.cell).floor().to_isize()?;
            if i < -1 || i > n as isize {
                return None;
            }
            Some(i.clamp(0, n as isize - 1) as usize)
        };
        let i = idx(p[0] - self.origin[0], self.nx)?;
        let j = idx(p[1] - self.origin[1], self.ny)?;
        self.buckets[j * self.nx + i].iter().find_map(|&t| {
            let l = barycentric(self.mesh.corners(t), p);
            (l[0].min(l[1]).min(l[2]) >= -tol).then_some((t, l))
        })
    }
}

pub(crate) fn barycentric<T: Real>(c: [Point<T>; 3], p: Point<T>) -> [T; 3] {
    let [a, b, cc] = c;
    let det = (b[0] - a[0]) * (cc[1] - a[1]) - (cc[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (cc[1] - a[1]) - (cc[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [T::one() - l1 - l2, l1, l2]
}

/// Nodal interpolation of `field` (living on `source`) onto `target`.
///
/// Every target vertex receives the value of the source P1 interpolant at
/// its position; vertices outside the closure of the field's support on the
/// target mesh are set to zero. Transfer onto the field's own mesh returns
/// the field unchanged.
pub fn transfer<T: Real>(field: &Field<T>, source: &Mesh<T>, target: &Mesh<T>) -> Result<Field<T>> {
    field.ensure_on(source)?;
    if std::ptr::eq(source, target) || source == target {
        let mut out = field.clone();
        out.mesh_id = target.id();
        return Ok(out);
    }
    let locator = PointLocator::new(source);
    let mask = support_mask(target, field.support);
    let mut values = Vec::with_capacity(target.num_vertices());
    for (p, &keep) in target.vertices().iter().zip(&mask) {
        let (t, l) = locator
            .locate(*p)
            .ok_or_else(|| Error::PointLocation { x: p[0].to_f64_lossy(), y: p[1].to_f64_lossy() })?;
        if !keep {
            values.push(czero());
            continue;
        }
        let tri = source.triangles()[t];
        let mut v = czero();
        for k in 0..3 {
            v += field.values[tri[k]] * l[k];
        }
        values.push(v);
    }
    Ok(Field { mesh_id: target.id(), values, support: field.support })
}
