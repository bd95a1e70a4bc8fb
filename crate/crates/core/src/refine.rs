//! Red refinement with green closure.
//!
//! Elements larger than the threshold are split into four similar children
//! through their edge midpoints. Neighbours that end up with a single split
//! edge are bisected towards the opposite vertex; neighbours with two split
//! edges are promoted to red until the edge marking is consistent.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::mesh::{edge_key, BoundaryEdge, Mesh};
use crate::scalar::Real;

/// Relative slack so that elements sitting exactly at the threshold are kept.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Refines every element with `sqrt(2|E|) > h_max` and closes the mesh.
///
/// Elements whose longest edge exceeds `√2·h_max` are refined as well. On
/// right isosceles elements this is the same test; it keeps thin strips
/// (whose area is small but whose edges are long) from surviving every
/// level unrefined.
///
/// Children inherit their parent's region tag; split boundary edges keep
/// their tag and orientation. The returned mesh has identifier `id + 1`.
pub fn refine<T: Real>(mesh: &Mesh<T>, h_max: T) -> Result<Mesh<T>> {
    if !(h_max > T::zero() && h_max.is_finite()) {
        return Err(Error::Argument(format!("refinement threshold must be positive, got {h_max}")));
    }
    let limit = h_max * (T::one() + T::lit(THRESHOLD_SLACK));
    let edge_limit = limit * T::SQRT_2();
    let marked: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| mesh.element_size(t) > limit || longest_edge(mesh, t) > edge_limit)
        .collect();
    refine_marked(mesh, &marked)
}

fn longest_edge<T: Real>(mesh: &Mesh<T>, t: usize) -> T {
    let c = mesh.corners(t);
    (0..3)
        .map(|i| {
            let (a, b) = (c[i], c[(i + 1) % 3]);
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .fold(T::zero(), T::max)
}

/// Refines an explicit set of elements (red) and closes the mesh (green).
pub fn refine_marked<T: Real>(mesh: &Mesh<T>, marked: &[usize]) -> Result<Mesh<T>> {
    let tris = mesh.triangles();
    let mut split: HashSet<(usize, usize)> = HashSet::new();
    for &t in marked {
        let tri = tris.get(t).ok_or_else(|| Error::Argument(format!("no element {t}")))?;
        for e in 0..3 {
            split.insert(edge_key(tri[e], tri[(e + 1) % 3]));
        }
    }
    // Closure: an element with two split edges becomes red.
    loop {
        let mut changed = false;
        for tri in tris {
            let keys = [edge_key(tri[0], tri[1]), edge_key(tri[1], tri[2]), edge_key(tri[2], tri[0])];
            let n = keys.iter().filter(|k| split.contains(k)).count();
            if n == 2 {
                for k in keys {
                    changed |= split.insert(k);
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(split.len());
    let half = T::lit(0.5);
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[T; 2]>| -> Option<usize> {
        let k = edge_key(a, b);
        if !split.contains(&k) {
            return None;
        }
        Some(*midpoint.entry(k).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            vertices.push([(pa[0] + pb[0]) * half, (pa[1] + pb[1]) * half]);
            vertices.len() - 1
        }))
    };

    let mut triangles = Vec::with_capacity(tris.len() * 2);
    let mut regions = Vec::with_capacity(tris.len() * 2);
    for (tri, &region) in tris.iter().zip(mesh.regions()) {
        let [a, b, c] = *tri;
        let m = [mid(a, b, &mut vertices), mid(b, c, &mut vertices), mid(c, a, &mut vertices)];
        let children: Vec<[usize; 3]> = match m {
            [None, None, None] => vec![[a, b, c]],
            [Some(ab), Some(bc), Some(ca)] => {
                vec![[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
            }
            [Some(ab), None, None] => vec![[a, ab, c], [ab, b, c]],
            [None, Some(bc), None] => vec![[a, b, bc], [a, bc, c]],
            [None, None, Some(ca)] => vec![[a, b, ca], [ca, b, c]],
            _ => unreachable!("closure leaves no element with exactly two split edges"),
        };
        for ch in children {
            triangles.push(ch);
            regions.push(region);
        }
    }

    let mut boundary = Vec::with_capacity(mesh.boundary_edges().len() + split.len());
    for be in mesh.boundary_edges() {
        let [a, b] = be.vertices;
        match mid(a, b, &mut vertices) {
            Some(m) => {
                boundary.push(BoundaryEdge { vertices: [a, m], tag: be.tag });
                boundary.push(BoundaryEdge { vertices: [m, b], tag: be.tag });
            }
            None => boundary.push(*be),
        }
    }

    Mesh::from_parts(vertices, triangles, regions, boundary, mesh.id() + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GeometrySpec, Rect};
    use crate::mesh::{generate_mesh, BoundaryTag, Region};

    fn unit_mesh() -> Mesh<f64> {
        generate_mesh(&GeometrySpec::bare_room(Rect::centered_square(1.0), 0.0), 1.0).unwrap()
    }

    #[test]
    fn threshold_equal_to_size_is_a_noop() {
        let m = unit_mesh();
        let r = refine(&m, 0.5).unwrap();
        assert_eq!(r.num_triangles(), m.num_triangles());
        assert_eq!(r.id(), m.id() + 1);
    }

    #[test]
    fn uniform_red_refinement_quarters_elements() {
        let m = unit_mesh();
        let r = refine(&m, 0.25).unwrap();
        assert_eq!(r.num_triangles(), 4 * m.num_triangles());
        assert_eq!(r.mesh_size().unwrap(), 0.25);
        assert_eq!(r.boundary_edges().len(), 2 * m.boundary_edges().len());
    }

    #[test]
    fn single_marked_element_bisects_only_its_neighbours() {
        let m = unit_mesh();
        // an interior element: away from the walls
        let t = (0..m.num_triangles())
            .find(|&t| {
                let c = m.centroid(t);
                c[0].abs() < 0.5 && c[1].abs() < 0.5
            })
            .unwrap();
        let r = refine_marked(&m, &[t]).unwrap();
        // red element -> 4 children, each of its 3 neighbours -> 2 children
        assert_eq!(r.num_triangles(), m.num_triangles() + 3 + 3);
        r.check().unwrap();
        let inc = r.edge_incidence();
        let open = inc.values().filter(|&&c| c == 1).count();
        assert_eq!(open, m.boundary_edges().len());
    }

    #[test]
    fn refined_boundary_keeps_tags_and_children_keep_regions() {
        let g = GeometrySpec::<f64>::default();
        let m = generate_mesh(&g, 0.531).unwrap();
        let h = m.mesh_size().unwrap();
        let r = refine(&m, h / 2.0).unwrap();
        assert!((r.total_area() - g.domain_area()).abs() < 1e-10 * g.domain_area());
        assert!(r.mesh_size().unwrap() <= h / 2.0 + 1e-12);
        for t in 0..r.num_triangles() {
            let c = r.centroid(t);
            assert_eq!(r.regions()[t], crate::mesh::classify(&g, c));
        }
        let sc = |m: &Mesh<f64>| m.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Scatterer).count();
        assert!(sc(&r) >= sc(&m));
        assert!(r.regions().contains(&Region::Buffer));
    }
}
