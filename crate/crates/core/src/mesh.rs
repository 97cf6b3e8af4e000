//! Closed triangulated surfaces.
//!
//! A [`SurfaceMesh`] is validated on construction: every undirected edge must
//! be shared by exactly two triangles traversing it in opposite directions,
//! every triangle must have non-negligible area and the enclosed signed volume
//! must be positive (outward orientation). Once built the mesh is immutable.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::MeshError;

/// Largest icosphere level accepted by [`icosphere`] (20·4⁸ ≈ 1.3M triangles).
pub const MAX_ICOSPHERE_LEVEL: u32 = 8;

/// Triangles with an area at or below this value are rejected.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

pub type Point = [f64; 3];

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    // one-ring adjacency in compressed form
    ring_offsets: Vec<usize>,
    ring: Vec<usize>,
}

impl SurfaceMesh {
    /// Builds a mesh and checks the closed / oriented / non-degenerate invariants.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (index, tri) in triangles.iter().enumerate() {
            for &vertex in tri {
                if vertex >= n {
                    return Err(MeshError::VertexOutOfRange {
                        index,
                        vertex,
                        count: n,
                    });
                }
            }
        }

        let areas: Vec<f64> = triangles
            .iter()
            .map(|t| triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]))
            .collect();
        if let Some((index, &area)) = areas
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a > MIN_TRIANGLE_AREA))
        {
            return Err(MeshError::DegenerateTriangle { index, area });
        }

        check_edge_manifold(&triangles)?;

        let (ring_offsets, ring) = build_rings(n, &triangles);
        let mesh = Self {
            vertices,
            triangles,
            areas,
            ring_offsets,
            ring,
        };
        let volume = mesh.enclosed_volume();
        if !(volume > 0.0) {
            return Err(MeshError::InvertedOrientation { volume });
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Per-triangle areas, in triangle order.
    pub fn triangle_areas(&self) -> &[f64] {
        &self.areas
    }

    /// Vertices sharing an edge with `vertex`, sorted ascending.
    pub fn neighbors(&self, vertex: usize) -> &[usize] {
        &self.ring[self.ring_offsets[vertex]..self.ring_offsets[vertex + 1]]
    }

    /// |Γ_h|: the sum of the triangle areas.
    pub fn surface_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// |B_h|: signed volume of the enclosed region, summed over the
    /// tetrahedra spanned by the origin and each triangle.
    pub fn enclosed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (
                    &self.vertices[t[0]],
                    &self.vertices[t[1]],
                    &self.vertices[t[2]],
                );
                dot(a, &cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Copy of the mesh with every vertex mapped through `f`.
    ///
    /// The result is re-validated, so maps that flip orientation or collapse
    /// triangles are reported as errors.
    pub fn map_vertices(&self, f: impl Fn(&Point) -> Point) -> Result<Self, MeshError> {
        Self::new(
            self.vertices.iter().map(f).collect(),
            self.triangles.clone(),
        )
    }

    /// Serializes the mesh as an ASCII OFF document.
    pub fn to_off_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "OFF");
        let _ = writeln!(out, "{} {} 0", self.vertices.len(), self.triangles.len());
        for p in &self.vertices {
            let _ = writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    pub fn write_off(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_off_string()).map_err(|source| MeshError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Icosahedron refined `level` times by 1→4 midpoint subdivision, with every
/// new vertex projected back onto the unit sphere.
pub fn icosphere(level: u32) -> Result<SurfaceMesh, MeshError> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(MeshError::LevelTooLarge {
            level,
            max: MAX_ICOSPHERE_LEVEL,
        });
    }
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(normalized)
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(triangles.len() * 3 / 2);
        let mut refined = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push(normalized(&[
                    0.5 * (p[0] + q[0]),
                    0.5 * (p[1] + q[1]),
                    0.5 * (p[2] + q[2]),
                ]));
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            refined.push([a, ab, ca]);
            refined.push([b, bc, ab]);
            refined.push([c, ca, bc]);
            refined.push([ab, bc, ca]);
        }
        triangles = refined;
    }
    SurfaceMesh::new(vertices, triangles)
}

/// Reads an ASCII OFF file containing a closed triangle surface.
pub fn load_off(path: impl AsRef<Path>) -> Result<SurfaceMesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_off(&text)
}

/// Parses OFF text: the `OFF` header, a counts line, vertex lines and face
/// lines with a leading `3`. `#` starts a comment.
pub fn parse_off(text: &str) -> Result<SurfaceMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let parse_err = |line: usize, message: String| MeshError::Parse { line, message };

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    // The counts are allowed to follow the keyword on the header line.
    let counts_inline = header.strip_prefix("OFF").map(str::trim);
    let counts_text = match counts_inline {
        None => return Err(parse_err(line_no, format!("expected 'OFF' header, found '{header}'"))),
        Some("") => lines
            .next()
            .ok_or_else(|| parse_err(line_no, "missing counts line".into()))?,
        Some(rest) => (line_no, rest),
    };
    let counts: Vec<usize> = counts_text
        .1
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| parse_err(counts_text.0, format!("bad counts: {e}")))?;
    if counts.len() < 2 {
        return Err(parse_err(counts_text.0, "counts line needs vertex and face counts".into()));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {nv} vertices, file ended early")))?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad vertex: {e}")))?;
        if xyz.len() != 3 {
            return Err(parse_err(ln, "vertex needs three coordinates".into()));
        }
        vertices.push([xyz[0], xyz[1], xyz[2]]);
    }

    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {nf} faces, file ended early")))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad face: {e}")))?;
        if idx.len() < 4 || idx[0] != 3 {
            return Err(parse_err(ln, "only triangular faces ('3 i j k') are supported".into()));
        }
        triangles.push([idx[1], idx[2], idx[3]]);
    }
    SurfaceMesh::new(vertices, triangles)
}

fn check_edge_manifold(triangles: &[[usize; 3]]) -> Result<(), MeshError> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3);
    for t in triangles {
        for k in 0..3 {
            let e = (t[k], t[(k + 1) % 3]);
            let count = directed.entry(e).or_insert(0);
            *count += 1;
            if *count > 1 {
                return Err(MeshError::InconsistentOrientation { a: e.0, b: e.1 });
            }
        }
    }
    // Each directed edge occurs once, so the undirected use count is 1 or 2.
    let mut unmatched: Vec<(usize, usize)> = directed
        .keys()
        .filter(|&&(a, b)| !directed.contains_key(&(b, a)))
        .copied()
        .collect();
    unmatched.sort_unstable();
    if let Some(&(a, b)) = unmatched.first() {
        return Err(MeshError::NotClosed { a, b, count: 1 });
    }
    Ok(())
}

fn build_rings(n: usize, triangles: &[[usize; 3]]) -> (Vec<usize>, Vec<usize>) {
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            lists[a].push(b);
            lists[b].push(a);
        }
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut ring = Vec::new();
    offsets.push(0);
    for mut l in lists {
        l.sort_unstable();
        l.dedup();
        ring.extend(l);
        offsets.push(ring.len());
    }
    (offsets, ring)
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(a: &Point) -> Point {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

pub(crate) fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}
