//! Structured multiblock mesh generation with optional seeded interior
//! jitter.
//!
//! Each block maps the unit square through an arbitrary smooth mapping and
//! is subdivided into an nx x ny grid of quads, each split into two
//! triangles. Blocks sharing a boundary curve stitch automatically through
//! coordinate-keyed vertex deduplication. Jitter displaces interior vertices
//! only and retries with shrinking amplitude until every triangle keeps a
//! minimum angle.

use crate::mesh::{Mesh, MeshError};
use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// How to split each structured quad.
#[derive(Debug, Clone, Copy)]
pub enum DiagonalRule {
    /// Checkerboard alternation, avoids directional bias.
    Alternate,
    /// Split along the shorter diagonal of the mapped quad.
    Shorter,
    /// Seeded random choice per quad; breaks the structured topology.
    Random(u64),
    /// Same diagonal in every quad.
    Uniform,
}

pub struct BlockMesher {
    vertices: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
    lookup: HashMap<(i64, i64), usize>,
    quantum: f64,
}

impl BlockMesher {
    /// `extent` is the characteristic domain size; vertices closer than
    /// 1e-9 x extent are merged.
    pub fn new(extent: f64) -> Self {
        BlockMesher {
            vertices: Vec::new(),
            triangles: Vec::new(),
            lookup: HashMap::new(),
            quantum: 1e-9 * extent,
        }
    }

    fn vertex_id(&mut self, p: Point2<f64>) -> usize {
        let key = (
            (p.x / self.quantum).round() as i64,
            (p.y / self.quantum).round() as i64,
        );
        if let Some(&id) = self.lookup.get(&key) {
            return id;
        }
        let id = self.vertices.len();
        self.vertices.push(p);
        self.lookup.insert(key, id);
        id
    }

    /// Add a mapped block subdivided nx x ny.
    pub fn add_block(
        &mut self,
        map: &dyn Fn(f64, f64) -> Point2<f64>,
        nx: usize,
        ny: usize,
        diag: DiagonalRule,
    ) {
        assert!(nx >= 1 && ny >= 1);
        let mut coin = match diag {
            DiagonalRule::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed ^ 0xD1A6)),
            _ => None,
        };
        let mut ids = vec![vec![0usize; ny + 1]; nx + 1];
        for (i, col) in ids.iter_mut().enumerate() {
            for (j, id) in col.iter_mut().enumerate() {
                let u = i as f64 / nx as f64;
                let v = j as f64 / ny as f64;
                *id = self.vertex_id(map(u, v));
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                let (a, b, c, d) = (ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]);
                let use_ac = match diag {
                    DiagonalRule::Alternate => (i + j) % 2 == 0,
                    DiagonalRule::Shorter => {
                        let ac = (self.vertices[a] - self.vertices[c]).norm();
                        let bd = (self.vertices[b] - self.vertices[d]).norm();
                        ac <= bd
                    }
                    DiagonalRule::Random(_) => coin.as_mut().unwrap().random::<bool>(),
                    DiagonalRule::Uniform => true,
                };
                if use_ac {
                    self.triangles.push([a, b, c]);
                    self.triangles.push([a, c, d]);
                } else {
                    self.triangles.push([a, b, d]);
                    self.triangles.push([b, c, d]);
                }
            }
        }
    }

    /// Build the mesh, optionally jittering interior vertices first.
    pub fn into_mesh(self, jitter: Option<JitterSpec>) -> Result<Mesh, MeshError> {
        let BlockMesher {
            mut vertices,
            triangles,
            ..
        } = self;
        if let Some(spec) = jitter {
            jitter_interior(&mut vertices, &triangles, spec);
        }
        Mesh::build(vertices, triangles)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JitterSpec {
    pub seed: u64,
    /// Displacement amplitude as a fraction of the local edge length.
    pub amplitude: f64,
    /// Smallest admissible interior angle, in degrees.
    pub min_angle_deg: f64,
}

impl Default for JitterSpec {
    fn default() -> Self {
        JitterSpec {
            seed: 0,
            amplitude: 0.28,
            min_angle_deg: 25.0,
        }
    }
}

fn min_angle_deg(vertices: &[Point2<f64>], tri: &[usize; 3]) -> f64 {
    let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    let mut min = f64::INFINITY;
    for k in 0..3 {
        let a = p[(k + 1) % 3] - p[k];
        let b = p[(k + 2) % 3] - p[k];
        let cosv = a.dot(&b) / (a.norm() * b.norm());
        min = min.min(cosv.clamp(-1.0, 1.0).acos().to_degrees());
    }
    let area2 = (p[1] - p[0]).x * (p[2] - p[0]).y - (p[2] - p[0]).x * (p[1] - p[0]).y;
    if area2 <= 0.0 {
        return 0.0;
    }
    min
}

/// Displace interior vertices by a seeded uniform perturbation, retrying
/// with decaying amplitude until the minimum-angle bound holds.
fn jitter_interior(vertices: &mut [Point2<f64>], triangles: &[[usize; 3]], spec: JitterSpec) {
    // boundary detection on the raw arrays: edges with a single incidence
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut boundary = vec![false; vertices.len()];
    for (&(a, b), &cnt) in &edge_count {
        if cnt == 1 {
            boundary[a] = true;
            boundary[b] = true;
        }
    }
    // local length scale: shortest incident edge
    let mut scale = vec![f64::INFINITY; vertices.len()];
    for &(a, b) in edge_count.keys() {
        let len = (vertices[a] - vertices[b]).norm();
        scale[a] = scale[a].min(len);
        scale[b] = scale[b].min(len);
    }

    let original: Vec<Point2<f64>> = vertices.to_vec();
    let mut amplitude = spec.amplitude;
    for attempt in 0..48u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9E37_79B9).wrapping_add(attempt));
        for (i, v) in vertices.iter_mut().enumerate() {
            *v = original[i];
            if !boundary[i] {
                let dx = amplitude * scale[i] * (rng.random::<f64>() - 0.5) * 2.0;
                let dy = amplitude * scale[i] * (rng.random::<f64>() - 0.5) * 2.0;
                v.x += dx;
                v.y += dy;
            }
        }
        let ok = triangles
            .iter()
            .all(|t| min_angle_deg(vertices, t) >= spec.min_angle_deg);
        if ok {
            return;
        }
        if attempt % 8 == 7 {
            amplitude *= 0.75;
        }
    }
    // give up: restore the structured positions
    vertices.copy_from_slice(&original);
}

/// Rectangle [x0, x0+w] x [y0, y0+h].
pub fn rectangle_block(x0: f64, y0: f64, w: f64, h: f64) -> impl Fn(f64, f64) -> Point2<f64> {
    move |u, v| Point2::new(x0 + u * w, y0 + v * h)
}

/// Bilinear quadrilateral through four corners (counterclockwise).
pub fn bilinear_block(corners: [Point2<f64>; 4]) -> impl Fn(f64, f64) -> Point2<f64> {
    move |u, v| {
        let c = corners;
        let x = (1.0 - u) * (1.0 - v) * c[0].x
            + u * (1.0 - v) * c[1].x
            + u * v * c[2].x
            + (1.0 - u) * v * c[3].x;
        let y = (1.0 - u) * (1.0 - v) * c[0].y
            + u * (1.0 - v) * c[1].y
            + u * v * c[2].y
            + (1.0 - u) * v * c[3].y;
        Point2::new(x, y)
    }
}
