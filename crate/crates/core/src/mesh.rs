//! Conforming triangular meshes with region and boundary tags.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::GeometrySpec;
use crate::scalar::Real;

pub type Point<T> = [T; 2];

/// Region an element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Source,
    Buffer,
    Measurement,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Source => "SOURCE",
            Region::Buffer => "BUFFER",
            Region::Measurement => "MEASUREMENT",
        })
    }
}

impl FromStr for Region {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SOURCE" => Ok(Region::Source),
            "BUFFER" => Ok(Region::Buffer),
            "MEASUREMENT" => Ok(Region::Measurement),
            other => Err(Error::Mesh(format!("unknown region tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Outer wall of the room (impedance condition).
    Outer,
    /// Wall of a sound-hard scatterer (homogeneous Neumann).
    Scatterer,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryTag::Outer => "OUTER",
            BoundaryTag::Scatterer => "SCATTERER",
        })
    }
}

impl FromStr for BoundaryTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "OUTER" => Ok(BoundaryTag::Outer),
            "SCATTERER" => Ok(BoundaryTag::Scatterer),
            other => Err(Error::Mesh(format!("unknown boundary tag {other:?}"))),
        }
    }
}

/// Boundary edge, oriented so that the domain lies to its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    pub(crate) vertices: Vec<Point<T>>,
    pub(crate) triangles: Vec<[usize; 3]>,
    pub(crate) regions: Vec<Region>,
    pub(crate) boundary: Vec<BoundaryEdge>,
    pub(crate) id: u64,
}

#[inline]
pub(crate) fn signed_area<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) * T::lit(0.5)
}

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh from raw parts and checks every structural invariant.
    pub fn from_parts(
        vertices: Vec<Point<T>>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        boundary: Vec<BoundaryEdge>,
        id: u64,
    ) -> Result<Self> {
        let mesh = Mesh { vertices, triangles, regions, boundary, id };
        mesh.check()?;
        Ok(mesh)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Same mesh under a different identifier.
    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> T {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point<T> {
        let [a, b, c] = self.corners(t);
        let third = T::lit(1.0 / 3.0);
        [(a[0] + b[0] + c[0]) * third, (a[1] + b[1] + c[1]) * third]
    }

    /// Size measure of a single element, `sqrt(2 |E|)`.
    pub fn element_size(&self, t: usize) -> T {
        (T::lit(2.0) * self.area(t)).sqrt()
    }

    pub fn total_area(&self) -> T {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Mesh size `max_E sqrt(2 |E|)`.
    pub fn mesh_size(&self) -> Result<T> {
        if self.triangles.is_empty() {
            return Err(Error::Mesh("mesh size of an empty mesh".into()));
        }
        Ok((0..self.num_triangles()).map(|t| self.element_size(t)).fold(T::zero(), T::max))
    }

    /// Flags vertices that belong to at least one element of `region`.
    pub fn region_vertex_mask(&self, region: Region) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for (tri, r) in self.triangles.iter().zip(&self.regions) {
            if *r == region {
                for &v in tri {
                    mask[v] = true;
                }
            }
        }
        mask
    }

    /// Map from undirected edge to the number of incident triangles.
    pub fn edge_incidence(&self) -> HashMap<(usize, usize), usize> {
        let mut count = HashMap::with_capacity(self.triangles.len() * 2);
        for tri in &self.triangles {
            for e in 0..3 {
                *count.entry(edge_key(tri[e], tri[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        count
    }

    /// Checks orientation, conformity and boundary bookkeeping.
    pub fn check(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.regions.len() != self.triangles.len() {
            return Err(Error::Mesh("one region tag per triangle required".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            if self.area(t) <= T::zero() {
                return Err(Error::Mesh(format!("triangle {t} has non-positive signed area")));
            }
        }
        let incidence = self.edge_incidence();
        if let Some((e, c)) = incidence.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Mesh(format!("edge {e:?} shared by {c} triangles")));
        }
        let open: usize = incidence.values().filter(|&&c| c == 1).count();
        if open != self.boundary.len() {
            return Err(Error::Mesh(format!(
                "{open} edges have a single incident triangle but {} boundary edges are recorded \
                 (hanging node or missing boundary edge)",
                self.boundary.len()
            )));
        }
        for be in &self.boundary {
            let [a, b] = be.vertices;
            if incidence.get(&edge_key(a, b)) != Some(&1) {
                return Err(Error::Mesh(format!("boundary edge {a}-{b} is not a mesh boundary edge")));
            }
        }
        Ok(())
    }

    /// Writes the plain-text mesh dump.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertices {}", self.vertices.len())?;
        for p in &self.vertices {
            writeln!(w, "{} {}", p[0], p[1])?;
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for (tri, r) in self.triangles.iter().zip(&self.regions) {
            writeln!(w, "{} {} {} {}", tri[0], tri[1], tri[2], r)?;
        }
        writeln!(w, "boundary_edges {}", self.boundary.len())?;
        for be in &self.boundary {
            writeln!(w, "{} {} {}", be.vertices[0], be.vertices[1], be.tag)?;
        }
        Ok(())
    }

    /// Reads a dump written by [`Mesh::write_dump`].
    pub fn read_dump<R: BufRead>(r: R, id: u64) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::Mesh("unexpected end of mesh dump".into()))?.map_err(Error::from)
        };
        fn header(line: &str, key: &str) -> Result<usize> {
            let mut it = line.split_whitespace();
            match (it.next(), it.next().and_then(|n| n.parse().ok())) {
                (Some(k), Some(n)) if k == key => Ok(n),
                _ => Err(Error::Mesh(format!("expected `{key} N`, found {line:?}"))),
            }
        }
        fn parse<V: FromStr>(tok: Option<&str>, line: &str) -> Result<V> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Mesh(format!("malformed line {line:?}")))
        }
        let nv = header(&next()?, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = next()?;
            let mut it = line.split_whitespace();
            let x: f64 = parse(it.next(), &line)?;
            let y: f64 = parse(it.next(), &line)?;
            vertices.push([T::lit(x), T::lit(y)]);
        }
        let nt = header(&next()?, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        let mut regions = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = next()?;
            let mut it = line.split_whitespace();
            triangles.push([parse(it.next(), &line)?, parse(it.next(), &line)?, parse(it.next(), &line)?]);
            regions.push(parse(it.next(), &line)?);
        }
        let nb = header(&next()?, "boundary_edges")?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let line = next()?;
            let mut it = line.split_whitespace();
            boundary.push(BoundaryEdge {
                vertices: [parse(it.next(), &line)?, parse(it.next(), &line)?],
                tag: parse(it.next(), &line)?,
            });
        }
        Mesh::from_parts(vertices, triangles, regions, boundary, id)
    }
}

/// Classifies an element by the position of its centroid.
pub(crate) fn classify<T: Real>(geom: &GeometrySpec<T>, c: Point<T>) -> Region {
    let eps = T::geometric_eps();
    if geom.source.contains(c[0], c[1], eps) {
        Region::Source
    } else if geom.buffer.contains(c[0], c[1], eps) {
        Region::Buffer
    } else {
        Region::Measurement
    }
}

/// Grid spacing used by [`generate_mesh`]: `extent / n` for the smallest
/// even `n` that makes it strictly finer than `target_h`.
pub fn background_spacing<T: Real>(geom: &GeometrySpec<T>, target_h: T) -> T {
    let extent = (geom.room.x1 - geom.room.x0).max(geom.room.y1 - geom.room.y0);
    let two = T::lit(2.0);
    let mut n = ((extent / target_h / two).floor() * two).max(two);
    while extent / n >= target_h {
        n += two;
    }
    extent / n
}

fn axis_nodes<T: Real>(mut breaks: Vec<T>, spacing: T) -> Vec<T> {
    let eps = T::geometric_eps();
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    breaks.dedup_by(|a, b| (*a - *b).abs() <= eps);
    let mut nodes = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let pieces = ((len / spacing) - T::lit(1e-9)).ceil().max(T::one());
        let n = pieces.to_usize().expect("finite piece count");
        for i in 1..n {
            nodes.push(w[0] + len * T::from_usize(i).unwrap() / pieces);
        }
        nodes.push(w[1]);
    }
    nodes
}

/// Generates a conforming, tagged triangulation of the geometry.
///
/// A tensor-product background grid is laid through every rectangle
/// coordinate so that region and scatterer boundaries fall on element edges.
/// Each interval between breakpoints is split evenly into pieces no longer
/// than [`background_spacing`]; every cell is cut along its rising diagonal.
/// Cells inside scatterers are dropped. The result has
/// `mesh_size <= background_spacing < target_h`.
pub fn generate_mesh<T: Real>(geom: &GeometrySpec<T>, target_h: T) -> Result<Mesh<T>> {
    if !(target_h > T::zero() && target_h.is_finite()) {
        return Err(Error::Argument(format!("target mesh size must be positive, got {target_h}")));
    }
    geom.validate()?;
    let spacing = background_spacing(geom, target_h);

    let room = geom.room;
    let mut xb = vec![room.x0, room.x1];
    let mut yb = vec![room.y0, room.y1];
    for r in std::iter::once(&geom.source).chain(std::iter::once(&geom.buffer)).chain(geom.scatterers.iter()) {
        xb.extend([r.x0, r.x1]);
        yb.extend([r.y0, r.y1]);
    }
    let xs = axis_nodes(xb, spacing);
    let ys = axis_nodes(yb, spacing);
    let (nx, ny) = (xs.len(), ys.len());

    let half = T::lit(0.5);
    let mut grid_index = vec![usize::MAX; nx * ny];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<Point<T>>| -> usize {
        let g = &mut grid_index[j * nx + i];
        if *g == usize::MAX {
            *g = vertices.len();
            vertices.push([xs[i], ys[j]]);
        }
        *g
    };
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let cx = (xs[i] + xs[i + 1]) * half;
            let cy = (ys[j] + ys[j + 1]) * half;
            if geom.in_scatterer(cx, cy) {
                continue;
            }
            let a = vid(i, j, &mut vertices);
            let b = vid(i + 1, j, &mut vertices);
            let c = vid(i + 1, j + 1, &mut vertices);
            let d = vid(i, j + 1, &mut vertices);
            for tri in [[a, b, c], [a, c, d]] {
                triangles.push(tri);
            }
        }
    }
    let mut mesh = Mesh { vertices, triangles, regions: Vec::new(), boundary: Vec::new(), id: 0 };
    mesh.regions = (0..mesh.num_triangles()).map(|t| classify(geom, mesh.centroid(t))).collect();
    mesh.boundary = collect_boundary(&mesh, geom);
    mesh.check()?;
    Ok(mesh)
}

/// Extracts oriented boundary edges and tags them against the room walls.
pub(crate) fn collect_boundary<T: Real>(mesh: &Mesh<T>, geom: &GeometrySpec<T>) -> Vec<BoundaryEdge> {
    let incidence = mesh.edge_incidence();
    let eps = T::geometric_eps();
    let room = geom.room;
    let on_wall = |p: Point<T>| {
        (p[0] - room.x0).abs() <= eps
            || (p[0] - room.x1).abs() <= eps
            || (p[1] - room.y0).abs() <= eps
            || (p[1] - room.y1).abs() <= eps
    };
    let mut out = Vec::new();
    for tri in &mesh.triangles {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            if incidence[&edge_key(a, b)] == 1 {
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let mid = [(pa[0] + pb[0]) * T::lit(0.5), (pa[1] + pb[1]) * T::lit(0.5)];
                let tag = if on_wall(mid) { BoundaryTag::Outer } else { BoundaryTag::Scatterer };
                out.push(BoundaryEdge { vertices: [a, b], tag });
            }
        }
    }
    out
}
