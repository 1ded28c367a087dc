//! Simplicial mesh with globally oriented edges and the mixed-field DOF map.
//!
//! Edges are enumerated once; each receives a global tangent pointing from
//! the lower vertex id to the higher one and a normal obtained by rotating
//! the tangent by -90 degrees. Per-triangle local edges follow the
//! counterclockwise labeling: local edge i is opposite vertex i, so e3 runs
//! v1->v2, e1 runs v2->v3 and e2 runs v3->v1. Displacement unknowns live on
//! vertices and edge midpoints; displacement-gradient and stress unknowns
//! live on edges and on the elements themselves.

use nalgebra::{Matrix2, Point2, Vector2};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {tri} references vertex {vertex} out of range")]
    VertexOutOfRange { tri: usize, vertex: usize },
    #[error("triangle {0} has repeated vertices")]
    RepeatedVertex(usize),
    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),
    #[error("duplicate triangle {0}")]
    DuplicateTriangle(usize),
    #[error("edge ({0}, {1}) has more than two incident triangles")]
    NonManifoldEdge(usize, usize),
    #[error("hanging node: vertex {vertex} lies inside edge ({a}, {b})")]
    HangingNode { vertex: usize, a: usize, b: usize },
    #[error("edge ({0}, {1}) is shorter than 1e-10 x mesh diameter")]
    DegenerateEdge(usize, usize),
    #[error("non-finite vertex coordinate at vertex {0}")]
    NonFiniteVertex(usize),
}

/// Oriented global edge.
#[derive(Debug, Clone)]
pub struct Edge {
    pub id: usize,
    pub vertices: [usize; 2],
    pub tangent: Vector2<f64>,
    pub normal: Vector2<f64>,
    pub length: f64,
    pub midpoint: Point2<f64>,
    pub boundary: bool,
    pub incident_tris: Vec<usize>,
}

/// Per-triangle view of one of its three edges.
#[derive(Debug, Clone, Copy)]
pub struct LocalEdge {
    /// Global edge id.
    pub edge: usize,
    /// True when the local direction (per the counterclockwise labeling)
    /// matches the global tangent.
    pub aligned: bool,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point2<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// tri_edges[t][i] is local edge i+1 of triangle t (e1, e2, e3).
    pub tri_edges: Vec<[LocalEdge; 3]>,
}

/// Local edge endpoints in terms of local vertex slots: e1 = v2->v3,
/// e2 = v3->v1, e3 = v1->v2.
pub const LOCAL_EDGE_VERTS: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

impl Mesh {
    /// Validate and build connectivity. Clockwise triangles are reordered to
    /// counterclockwise by swapping their last two vertices.
    pub fn build(
        vertices: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Mesh, MeshError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(MeshError::NonFiniteVertex(i));
            }
        }

        let mut tris = triangles;
        let mut seen = HashMap::new();
        for (t, tri) in tris.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange { tri: t, vertex: v });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex(t));
            }
            let area2 = signed_area2(&vertices, tri);
            if area2 == 0.0 {
                return Err(MeshError::DegenerateTriangle(t));
            }
            if area2 < 0.0 {
                tri.swap(1, 2);
            }
            let mut key = *tri;
            key.sort_unstable();
            if seen.insert(key, t).is_some() {
                return Err(MeshError::DuplicateTriangle(t));
            }
        }

        let diameter = mesh_diameter(&vertices);

        // enumerate edges keyed by sorted endpoints
        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = Vec::with_capacity(tris.len());
        for (t, tri) in tris.iter().enumerate() {
            let mut local = [LocalEdge { edge: 0, aligned: true }; 3];
            for (i, ends) in LOCAL_EDGE_VERTS.iter().enumerate() {
                let (a, b) = (tri[ends[0]], tri[ends[1]]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    let (lo, hi) = (key[0], key[1]);
                    let delta = vertices[hi] - vertices[lo];
                    let length = delta.norm();
                    let tangent = delta / length;
                    edges.push(Edge {
                        id: edges.len(),
                        vertices: [lo, hi],
                        tangent,
                        normal: Vector2::new(tangent.y, -tangent.x),
                        length,
                        midpoint: Point2::from((vertices[lo].coords + vertices[hi].coords) / 2.0),
                        boundary: false,
                        incident_tris: Vec::with_capacity(2),
                    });
                    edges.len() - 1
                });
                if edges[id].incident_tris.len() == 2 {
                    return Err(MeshError::NonManifoldEdge(key[0], key[1]));
                }
                edges[id].incident_tris.push(t);
                if edges[id].length < 1e-10 * diameter {
                    return Err(MeshError::DegenerateEdge(key[0], key[1]));
                }
                local[i] = LocalEdge {
                    edge: id,
                    // local direction is a -> b
                    aligned: a < b,
                };
            }
            tri_edges.push(local);
        }

        for e in edges.iter_mut() {
            e.boundary = e.incident_tris.len() == 1;
        }

        let mesh = Mesh {
            vertices,
            triangles: tris,
            edges,
            tri_edges,
        };
        mesh.check_conforming()?;
        Ok(mesh)
    }

    /// Reject hanging nodes: no vertex may lie strictly inside an edge.
    /// Uses a uniform grid so large meshes stay near-linear.
    fn check_conforming(&self) -> Result<(), MeshError> {
        if self.vertices.is_empty() {
            return Ok(());
        }
        let (min, max) = bounds(&self.vertices);
        let extent = (max - min).amax().max(1e-30);
        let n_cells = (self.vertices.len() as f64).sqrt().ceil() as usize + 1;
        let cell = extent / n_cells as f64;
        let index = |p: &Point2<f64>| -> (i64, i64) {
            (((p.x - min.x) / cell) as i64, ((p.y - min.y) / cell) as i64)
        };
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            grid.entry(index(v)).or_default().push(i);
        }
        let tol = 1e-9 * extent;
        for e in &self.edges {
            let (a, b) = (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]);
            let (i0, j0) = index(&Point2::new(a.x.min(b.x), a.y.min(b.y)));
            let (i1, j1) = index(&Point2::new(a.x.max(b.x), a.y.max(b.y)));
            for gi in i0 - 1..=i1 + 1 {
                for gj in j0 - 1..=j1 + 1 {
                    let Some(cands) = grid.get(&(gi, gj)) else { continue };
                    for &v in cands {
                        if v == e.vertices[0] || v == e.vertices[1] {
                            continue;
                        }
                        let p = self.vertices[v];
                        let ab = b - a;
                        let t = (p - a).dot(&ab) / ab.norm_squared();
                        if t <= 0.0 || t >= 1.0 {
                            continue;
                        }
                        let proj = a + ab * t;
                        if (p - proj).norm() < tol {
                            return Err(MeshError::HangingNode {
                                vertex: v,
                                a: e.vertices[0],
                                b: e.vertices[1],
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Element Jacobian with local vertex 1 as origin:
    /// J = [[x2-x1, x3-x1], [y2-y1, y3-y1]]; det J = 2 x area.
    pub fn jacobian(&self, tri: usize) -> Matrix2<f64> {
        let [a, b, c] = self.triangles[tri];
        let (p1, p2, p3) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        Matrix2::new(p2.x - p1.x, p3.x - p1.x, p2.y - p1.y, p3.y - p1.y)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Area of a triangle.
    pub fn area(&self, tri: usize) -> f64 {
        0.5 * self.jacobian(tri).determinant()
    }

    /// Midpoint node ids for the local nodes 4, 5, 6 of a triangle: these sit
    /// on local edges e3, e1, e2 respectively.
    pub fn mid_nodes(&self, tri: usize) -> [usize; 3] {
        let le = &self.tri_edges[tri];
        [le[2].edge, le[0].edge, le[1].edge]
    }

    /// Coordinates of a displacement node: vertices first, then edge
    /// midpoints.
    pub fn node_coords(&self, node: usize) -> Point2<f64> {
        if node < self.vertices.len() {
            self.vertices[node]
        } else {
            self.edges[node - self.vertices.len()].midpoint
        }
    }

    /// Total number of displacement nodes (vertices + mid-nodes).
    pub fn n_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    /// The six displacement node ids of a triangle in local order 1..6.
    pub fn element_nodes(&self, tri: usize) -> [usize; 6] {
        let [a, b, c] = self.triangles[tri];
        let nv = self.vertices.len();
        let mids = self.mid_nodes(tri);
        [a, b, c, nv + mids[0], nv + mids[1], nv + mids[2]]
    }
}

fn signed_area2(vertices: &[Point2<f64>], tri: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)
}

fn bounds(vertices: &[Point2<f64>]) -> (Point2<f64>, Point2<f64>) {
    let mut min = vertices[0];
    let mut max = vertices[0];
    for v in vertices {
        min.x = min.x.min(v.x);
        min.y = min.y.min(v.y);
        max.x = max.x.max(v.x);
        max.y = max.y.max(v.y);
    }
    (min, max)
}

fn mesh_diameter(vertices: &[Point2<f64>]) -> f64 {
    if vertices.is_empty() {
        return 1.0;
    }
    let (min, max) = bounds(vertices);
    (max - min).norm().max(f64::MIN_POSITIVE)
}

/// Global indexing of the three solution fields. Ordering is the u block,
/// then the alpha block (edges before elements), then the gamma block.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_triangles: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        DofMap {
            n_vertices: mesh.n_vertices(),
            n_edges: mesh.n_edges(),
            n_triangles: mesh.n_triangles(),
        }
    }

    pub fn n_u(&self) -> usize {
        2 * (self.n_vertices + self.n_edges)
    }

    pub fn n_alpha(&self) -> usize {
        6 * (self.n_edges + self.n_triangles)
    }

    pub fn n_gamma(&self) -> usize {
        4 * (self.n_edges + self.n_triangles)
    }

    pub fn n_total(&self) -> usize {
        self.n_u() + self.n_alpha() + self.n_gamma()
    }

    /// Displacement dof of a node (vertex id, or n_vertices + edge id for a
    /// mid-node) and component 0|1.
    pub fn u_index(&self, node: usize, comp: usize) -> usize {
        debug_assert!(node < self.n_vertices + self.n_edges && comp < 2);
        2 * node + comp
    }

    /// Displacement-gradient dof: edge-held slots 0..6, then element-held.
    pub fn alpha_edge(&self, edge: usize, slot: usize) -> usize {
        debug_assert!(edge < self.n_edges && slot < 6);
        self.n_u() + 6 * edge + slot
    }

    pub fn alpha_tri(&self, tri: usize, slot: usize) -> usize {
        debug_assert!(tri < self.n_triangles && slot < 6);
        self.n_u() + 6 * self.n_edges + 6 * tri + slot
    }

    /// Stress dof: edge-held slots 0..4, then element-held.
    pub fn gamma_edge(&self, edge: usize, slot: usize) -> usize {
        debug_assert!(edge < self.n_edges && slot < 4);
        self.n_u() + self.n_alpha() + 4 * edge + slot
    }

    pub fn gamma_tri(&self, tri: usize, slot: usize) -> usize {
        debug_assert!(tri < self.n_triangles && slot < 4);
        self.n_u() + self.n_alpha() + 4 * self.n_edges + 4 * tri + slot
    }

    /// The 52 global dof indices of an element, ordered u (12), alpha (24),
    /// gamma (16). Alpha/gamma slots follow the local index maps: edge-major,
    /// function-major, then row.
    pub fn element_dofs(&self, mesh: &Mesh, tri: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(52);
        for node in mesh.element_nodes(tri) {
            out.push(self.u_index(node, 0));
            out.push(self.u_index(node, 1));
        }
        for le in &mesh.tri_edges[tri] {
            for slot in 0..6 {
                out.push(self.alpha_edge(le.edge, slot));
            }
        }
        for slot in 0..6 {
            out.push(self.alpha_tri(tri, slot));
        }
        for le in &mesh.tri_edges[tri] {
            for slot in 0..4 {
                out.push(self.gamma_edge(le.edge, slot));
            }
        }
        for slot in 0..4 {
            out.push(self.gamma_tri(tri, slot));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_triangle() -> Mesh {
        Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn two_triangle_square() -> Mesh {
        Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn single_reference_triangle() {
        let mesh = reference_triangle();
        assert_eq!(mesh.n_edges(), 3);
        assert!(mesh.edges.iter().all(|e| e.boundary));
        assert_abs_diff_eq!(mesh.jacobian(0).determinant(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn shared_edge_square() {
        let mesh = two_triangle_square();
        assert_eq!(mesh.n_edges(), 5);
        let interior: Vec<_> = mesh.edges.iter().filter(|e| !e.boundary).collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].incident_tris.len(), 2);
    }

    #[test]
    fn clockwise_triangle_reoriented() {
        let mesh = Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_abs_diff_eq!(mesh.area(0), 0.5, epsilon = 1e-15);
        assert!(mesh.jacobian(0).determinant() > 0.0);
    }

    #[test]
    fn jacobian_values() {
        let mesh = Mesh::build(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(2.0, 0.0),
                Point2::new(0.0, 3.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let j = mesh.jacobian(0);
        assert_eq!(j, Matrix2::new(2.0, 0.0, 0.0, 3.0));
        assert_abs_diff_eq!(j.determinant(), 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mesh.area(0), 3.0, epsilon = 1e-15);

        // translation invariance
        let shifted = Mesh::build(
            vec![
                Point2::new(5.0, 5.0),
                Point2::new(7.0, 5.0),
                Point2::new(5.0, 8.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(shifted.jacobian(0), j);
    }

    #[test]
    fn build_rejects_bad_input() {
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(matches!(
            Mesh::build(verts.clone(), vec![[0, 1, 5]]),
            Err(MeshError::VertexOutOfRange { .. })
        ));
        assert!(matches!(
            Mesh::build(verts.clone(), vec![[0, 1, 1]]),
            Err(MeshError::RepeatedVertex(0))
        ));
        assert!(matches!(
            Mesh::build(verts.clone(), vec![[0, 1, 2], [2, 1, 0]]),
            Err(MeshError::DuplicateTriangle(1))
        ));
        let collinear = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        assert!(matches!(
            Mesh::build(collinear, vec![[0, 1, 2]]),
            Err(MeshError::DegenerateTriangle(0))
        ));
    }

    #[test]
    fn hanging_node_detected() {
        // vertex 4 sits in the middle of edge (1, 2), refined only on the right
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 0.5),
            Point2::new(1.0, 0.5),
        ];
        let res = Mesh::build(verts, vec![[0, 1, 2], [1, 3, 4], [4, 3, 2]]);
        assert!(matches!(res, Err(MeshError::HangingNode { vertex: 4, .. })));
    }

    #[test]
    fn edge_frames_orthonormal() {
        let mesh = two_triangle_square();
        for e in &mesh.edges {
            assert_abs_diff_eq!(e.tangent.norm(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(e.normal.norm(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(e.tangent.dot(&e.normal), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn local_edge_map_roundtrip() {
        let mesh = two_triangle_square();
        for t in 0..mesh.n_triangles() {
            let tri = mesh.triangles[t];
            for (i, ends) in LOCAL_EDGE_VERTS.iter().enumerate() {
                let e = &mesh.edges[mesh.tri_edges[t][i].edge];
                let mut expect = [tri[ends[0]], tri[ends[1]]];
                expect.sort_unstable();
                assert_eq!(e.vertices, expect);
            }
        }
    }

    #[test]
    fn area_sum_matches_shoelace() {
        let mesh = two_triangle_square();
        let total: f64 = (0..mesh.n_triangles()).map(|t| mesh.area(t)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn dof_totals() {
        let mesh = reference_triangle();
        let dm = DofMap::new(&mesh);
        assert_eq!(dm.n_u(), 12);
        assert_eq!(dm.n_alpha(), 24);
        assert_eq!(dm.n_gamma(), 16);
        assert_eq!(dm.n_total(), 52);

        let mesh = two_triangle_square();
        let dm = DofMap::new(&mesh);
        assert_eq!(dm.n_u(), 18);
        assert_eq!(dm.n_alpha(), 42);
        assert_eq!(dm.n_gamma(), 28);

        let empty = Mesh::build(vec![], vec![]).unwrap();
        let dm = DofMap::new(&empty);
        assert_eq!(dm.n_total(), 0);
    }

    #[test]
    fn shared_edge_dofs_coincide() {
        let mesh = two_triangle_square();
        let dm = DofMap::new(&mesh);
        let d0 = dm.element_dofs(&mesh, 0);
        let d1 = dm.element_dofs(&mesh, 1);
        assert_eq!(d0.len(), 52);
        // the shared edge contributes the same alpha/gamma indices to both
        let shared = mesh.edges.iter().find(|e| !e.boundary).unwrap().id;
        for slot in 0..6 {
            let g = dm.alpha_edge(shared, slot);
            assert!(d0.contains(&g) && d1.contains(&g));
        }
        for slot in 0..4 {
            let g = dm.gamma_edge(shared, slot);
            assert!(d0.contains(&g) && d1.contains(&g));
        }
        // element-held dofs are unique per element
        for slot in 0..6 {
            assert!(!d1.contains(&dm.alpha_tri(0, slot)));
        }
    }
}
