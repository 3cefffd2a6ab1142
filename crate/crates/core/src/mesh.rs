//! Triangle meshes in the printer coordinate system.
//!
//! Units are millimetres and +z is the build (slicing) direction. A
//! [`TriangleMesh`] is immutable once built: construction welds coincident
//! vertices, drops degenerate triangles, discards unreferenced vertices and
//! computes angle-weighted vertex normals plus vertex→triangle adjacency.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::{Point, Vector};

/// Triangles with area at or below this (mm²) are treated as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Weld tolerance as a fraction of the bounding-box diagonal.
pub const WELD_RELATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{format} parse error: {message}")]
    Parse { format: &'static str, message: String },
    #[error("mesh has no triangles")]
    Empty,
    #[error("all {0} triangles are degenerate")]
    AllDegenerate(usize),
    #[error("triangle {triangle} references vertex {index} but only {count} vertices exist")]
    IndexOutOfRange { triangle: usize, index: usize, count: usize },
    #[error("cannot infer mesh format from '{0}'")]
    UnknownFormat(String),
    #[error("sampling fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
}

fn parse_err(format: &'static str, message: impl Into<String>) -> MeshError {
    MeshError::Parse { format, message: message.into() }
}

/// On-disk mesh encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    StlBinary,
    StlAscii,
    Ply,
    Obj,
}

impl MeshFormat {
    /// Infers the format from a file extension. STL files are sniffed to
    /// tell binary from ASCII.
    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "stl" => {
                let bytes = fs::read(path)?;
                Ok(sniff_stl(&bytes))
            }
            "ply" => Ok(MeshFormat::Ply),
            "obj" => Ok(MeshFormat::Obj),
            _ => Err(MeshError::UnknownFormat(path.display().to_string())),
        }
    }

    pub fn parse_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "stl" | "stl-binary" => Some(MeshFormat::StlBinary),
            "stl-ascii" => Some(MeshFormat::StlAscii),
            "ply" => Some(MeshFormat::Ply),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

fn sniff_stl(bytes: &[u8]) -> MeshFormat {
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if n.checked_mul(50).and_then(|b| b.checked_add(84)) == Some(bytes.len()) {
            return MeshFormat::StlBinary;
        }
    }
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(512)]);
    if head.trim_start().starts_with("solid") {
        MeshFormat::StlAscii
    } else {
        MeshFormat::StlBinary
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let (mut min, mut max) = (first, first);
        for p in it {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Some(Aabb { min, max })
    }

    pub fn extent(&self) -> Vector {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Distance from an interior point to the nearest of the six faces.
    /// Points outside the box report 0.
    pub fn distance_to_faces(&self, p: &Point) -> f64 {
        (0..3)
            .map(|k| (p[k] - self.min[k]).min(self.max[k] - p[k]))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }
}

/// An indexed, welded, validated triangle mesh.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    normals: Vec<Vector>,
    // CSR vertex -> incident triangles
    vt_offsets: Vec<usize>,
    vt_indices: Vec<usize>,
}

impl TriangleMesh {
    /// Builds a mesh from raw vertices and triangles.
    ///
    /// Vertices closer than [`WELD_RELATIVE_TOLERANCE`] × bounding-box
    /// diagonal are merged, degenerate triangles are dropped with a warning
    /// and vertices no triangle references are removed.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange { triangle: t, index: i, count: vertices.len() });
                }
            }
        }
        let raw_count = triangles.len();
        let (vertices, remap) = weld(&vertices);
        let mut kept = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let t = [remap[tri[0]], remap[tri[1]], remap[tri[2]]];
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            if triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]) <= MIN_TRIANGLE_AREA {
                continue;
            }
            kept.push(t);
        }
        if kept.is_empty() {
            return Err(MeshError::AllDegenerate(raw_count));
        }
        if kept.len() < raw_count {
            log::warn!("dropped {} degenerate triangles of {}", raw_count - kept.len(), raw_count);
        }
        Ok(Self::assemble(vertices, kept))
    }

    /// Compacts unreferenced vertices and derives normals and adjacency.
    fn assemble(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Self {
        let mut referenced = vec![false; vertices.len()];
        for tri in &triangles {
            for &i in tri {
                referenced[i] = true;
            }
        }
        let mut new_index = vec![usize::MAX; vertices.len()];
        let mut compact = Vec::new();
        for (i, p) in vertices.iter().enumerate() {
            if referenced[i] {
                new_index[i] = compact.len();
                compact.push(*p);
            }
        }
        let triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .map(|t| [new_index[t[0]], new_index[t[1]], new_index[t[2]]])
            .collect();

        let n = compact.len();
        let mut counts = vec![0usize; n + 1];
        for tri in &triangles {
            for &i in tri {
                counts[i + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut vt_indices = vec![0usize; counts[n]];
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                vt_indices[fill[i]] = t;
                fill[i] += 1;
            }
        }
        let normals = angle_weighted_normals(&compact, &triangles);
        TriangleMesh { vertices: compact, triangles, normals, vt_offsets: counts, vt_indices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Unit vertex normals (angle-weighted average of incident face normals).
    pub fn normals(&self) -> &[Vector] {
        &self.normals
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Triangles incident to vertex `v`.
    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vt_indices[self.vt_offsets[v]..self.vt_offsets[v + 1]]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        triangle_area(&a, &b, &c)
    }

    /// Unit face normal following counter-clockwise winding.
    pub fn face_normal(&self, t: usize) -> Vector {
        let [a, b, c] = self.triangle_points(t);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Total surface area in mm².
    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.vertices).expect("validated mesh has vertices")
    }

    /// Undirected edge → number of incident triangles.
    pub fn edge_incidence(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn edge_count(&self) -> usize {
        self.edge_incidence().len()
    }

    /// V − E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.edge_count() as i64 + self.num_triangles() as i64
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        self.edge_incidence().values().all(|&c| c == 2)
    }

    /// Applies `f` to every vertex, keeping connectivity. Normals and
    /// adjacency are recomputed; no re-welding takes place.
    pub fn map_vertices(&self, f: impl Fn(&Point) -> Point) -> TriangleMesh {
        let vertices = self.vertices.iter().map(f).collect();
        Self::assemble(vertices, self.triangles.clone())
    }

    /// Uniformly samples `round(fraction · V)` distinct vertex indices,
    /// returned in ascending order. Deterministic for a given seed.
    pub fn sample_vertices(&self, fraction: f64, seed: u64) -> Result<Vec<usize>, MeshError> {
        sample_indices(self.num_vertices(), fraction, seed)
    }
}

/// Samples `round(fraction · n)` indices out of `0..n` without replacement.
pub fn sample_indices(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>, MeshError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(MeshError::InvalidFraction(fraction));
    }
    let k = ((fraction * n as f64).round() as usize).min(n);
    if k == n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Interior angle at `a` in triangle (a, b, c).
pub fn corner_angle(a: &Point, b: &Point, c: &Point) -> f64 {
    let u = b - a;
    let v = c - a;
    u.cross(&v).norm().atan2(u.dot(&v))
}

fn angle_weighted_normals(vertices: &[Point], triangles: &[[usize; 3]]) -> Vec<Vector> {
    let mut acc = vec![Vector::zeros(); vertices.len()];
    let mut fallback = vec![None; vertices.len()];
    for tri in triangles {
        let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
        let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let norm = n.norm();
        if norm == 0.0 {
            continue;
        }
        let n = n / norm;
        for k in 0..3 {
            let angle = corner_angle(&p[k], &p[(k + 1) % 3], &p[(k + 2) % 3]);
            acc[tri[k]] += n * angle;
            fallback[tri[k]].get_or_insert(n);
        }
    }
    acc.into_iter()
        .zip(fallback)
        .map(|(v, f)| {
            let len = v.norm();
            if len > 1e-12 {
                v / len
            } else {
                // opposing faces cancel out (e.g. a zero-thickness fin)
                f.unwrap_or_else(Vector::z)
            }
        })
        .collect()
}

/// Merges vertices within the weld tolerance; returns the welded vertex list
/// and the old→new index map. The first vertex seen in a cluster keeps its
/// position.
fn weld(vertices: &[Point]) -> (Vec<Point>, Vec<usize>) {
    let Some(bb) = Aabb::from_points(vertices) else {
        return (Vec::new(), Vec::new());
    };
    let tol = WELD_RELATIVE_TOLERANCE * bb.diagonal();
    if tol == 0.0 {
        // every vertex coincides
        return (vec![vertices[0]], vec![0; vertices.len()]);
    }
    let cell = 2.0 * tol;
    let key = |p: &Point| -> [i64; 3] {
        [
            ((p.x - bb.min.x) / cell).floor() as i64,
            ((p.y - bb.min.y) / cell).floor() as i64,
            ((p.z - bb.min.z) / cell).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut out: Vec<Point> = Vec::new();
    let mut remap = Vec::with_capacity(vertices.len());
    let tol2 = tol * tol;
    for p in vertices {
        let k = key(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &j in bucket {
                            if (out[j] - p).norm_squared() <= tol2 {
                                found = Some(j);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let idx = match found {
            Some(j) => j,
            None => {
                out.push(*p);
                grid.entry(k).or_default().push(out.len() - 1);
                out.len() - 1
            }
        };
        remap.push(idx);
    }
    (out, remap)
}

// ---------------------------------------------------------------------------
// Loading

/// Loads a mesh, inferring the format from the extension when `format` is `None`.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriangleMesh, MeshError> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let bytes = fs::read(path)?;
    parse_mesh(&bytes, format)
}

pub fn parse_mesh(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    let (vertices, triangles) = match format {
        MeshFormat::StlBinary => parse_stl_binary(bytes)?,
        MeshFormat::StlAscii => parse_stl_ascii(bytes)?,
        MeshFormat::Ply => parse_ply(bytes)?,
        MeshFormat::Obj => parse_obj(bytes)?,
    };
    TriangleMesh::new(vertices, triangles)
}

type RawMesh = (Vec<Point>, Vec<[usize; 3]>);

fn parse_stl_binary(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    if bytes.len() < 84 {
        return Err(parse_err("stl", "file shorter than the 84-byte header"));
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let need = 84 + n * 50;
    if bytes.len() < need {
        return Err(parse_err("stl", format!("header declares {n} triangles but file has {} bytes", bytes.len())));
    }
    let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    let mut vertices = Vec::with_capacity(n * 3);
    let mut triangles = Vec::with_capacity(n);
    for t in 0..n {
        let base = 84 + t * 50 + 12;
        for k in 0..3 {
            let o = base + k * 12;
            vertices.push(Point::new(f(o), f(o + 4), f(o + 8)));
        }
        triangles.push([3 * t, 3 * t + 1, 3 * t + 2]);
    }
    Ok((vertices, triangles))
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err("stl", e.to_string()))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut pending = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("vertex") => {
                let mut c = [0.0; 3];
                for v in &mut c {
                    *v = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| parse_err("stl", format!("line {}: bad vertex", lineno + 1)))?;
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
                pending += 1;
            }
            Some("endloop") => {
                if pending != 3 {
                    return Err(parse_err("stl", format!("line {}: facet with {pending} vertices", lineno + 1)));
                }
                let b = vertices.len() - 3;
                triangles.push([b, b + 1, b + 2]);
                pending = 0;
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

fn parse_obj(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err("obj", e.to_string()))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok.take(3).filter_map(|s| s.parse().ok()).collect();
                if c.len() != 3 {
                    return Err(parse_err("obj", format!("line {}: bad vertex", lineno + 1)));
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| parse_err("obj", format!("line {}: bad face index '{t}'", lineno + 1)))?;
                    let resolved = if i > 0 { i - 1 } else { vertices.len() as i64 + i };
                    if resolved < 0 {
                        return Err(parse_err("obj", format!("line {}: face index {i} out of range", lineno + 1)));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err("obj", format!("line {}: face with fewer than 3 vertices", lineno + 1)));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyScalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyScalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => PlyScalar::I8,
            "uchar" | "uint8" => PlyScalar::U8,
            "short" | "int16" => PlyScalar::I16,
            "ushort" | "uint16" => PlyScalar::U16,
            "int" | "int32" => PlyScalar::I32,
            "uint" | "uint32" => PlyScalar::U32,
            "float" | "float32" => PlyScalar::F32,
            "double" | "float64" => PlyScalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyScalar::I8 | PlyScalar::U8 => 1,
            PlyScalar::I16 | PlyScalar::U16 => 2,
            PlyScalar::I32 | PlyScalar::U32 | PlyScalar::F32 => 4,
            PlyScalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            PlyScalar::I8 => b[0] as i8 as f64,
            PlyScalar::U8 => b[0] as f64,
            PlyScalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            PlyScalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            PlyScalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            PlyScalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            PlyScalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            PlyScalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum PlyProperty {
    Scalar { name: String, ty: PlyScalar },
    List { name: String, count: PlyScalar, item: PlyScalar },
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProperty>,
}

/// Parses a PLY file (ASCII or binary little-endian). Faces are optional so
/// point clouds load through the same path via [`parse_ply_points`].
fn parse_ply_raw(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    let err = |m: String| parse_err("ply", m);
    let header_end = find_subslice(bytes, b"end_header")
        .ok_or_else(|| err("missing end_header".into()))?;
    let mut body_start = header_end + b"end_header".len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|e| err(e.to_string()))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(err("missing 'ply' magic".into()));
    }
    let mut binary = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", ..] => binary = Some(false),
            ["format", "binary_little_endian", ..] => binary = Some(true),
            ["format", other, ..] => return Err(err(format!("unsupported format '{other}'"))),
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count.parse().map_err(|_| err(format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or_else(|| err("property before element".into()))?;
                el.props.push(PlyProperty::List {
                    name: name.to_string(),
                    count: PlyScalar::parse(count).ok_or_else(|| err(format!("bad type '{count}'")))?,
                    item: PlyScalar::parse(item).ok_or_else(|| err(format!("bad type '{item}'")))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| err("property before element".into()))?;
                el.props.push(PlyProperty::Scalar {
                    name: name.to_string(),
                    ty: PlyScalar::parse(ty).ok_or_else(|| err(format!("bad type '{ty}'")))?,
                });
            }
            _ => {}
        }
    }
    let binary = binary.ok_or_else(|| err("missing format line".into()))?;
    let body = &bytes[body_start..];

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut reader: Box<dyn PlyValueReader> = if binary {
        Box::new(BinaryReader { data: body, pos: 0 })
    } else {
        let text = std::str::from_utf8(body).map_err(|e| err(e.to_string()))?;
        Box::new(AsciiReader { tokens: text.split_whitespace() })
    };

    for el in &elements {
        let xyz: Vec<Option<usize>> = ["x", "y", "z"]
            .iter()
            .map(|axis| {
                el.props
                    .iter()
                    .position(|p| matches!(p, PlyProperty::Scalar { name, .. } if name == axis))
            })
            .collect();
        for _ in 0..el.count {
            let mut coords = [0.0; 3];
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    PlyProperty::Scalar { ty, .. } => {
                        let v = reader.next(*ty).ok_or_else(|| err(format!("truncated '{}' data", el.name)))?;
                        for k in 0..3 {
                            if xyz[k] == Some(pi) {
                                coords[k] = v;
                            }
                        }
                    }
                    PlyProperty::List { name, count, item } => {
                        let n = reader.next(*count).ok_or_else(|| err(format!("truncated '{}' data", el.name)))?
                            as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            let v = reader.next(*item).ok_or_else(|| err(format!("truncated '{}' data", el.name)))?;
                            idx.push(v as usize);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if idx.len() < 3 {
                                return Err(err("face with fewer than 3 vertices".into()));
                            }
                            for k in 1..idx.len() - 1 {
                                triangles.push([idx[0], idx[k], idx[k + 1]]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                if xyz.iter().any(Option::is_none) {
                    return Err(err("vertex element lacks x, y or z".into()));
                }
                vertices.push(Point::new(coords[0], coords[1], coords[2]));
            }
        }
    }
    Ok((vertices, triangles))
}

fn parse_ply(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    parse_ply_raw(bytes)
}

/// Reads only the vertex positions of a PLY file (faces, if any, are ignored).
pub fn parse_ply_points(bytes: &[u8]) -> Result<Vec<Point>, MeshError> {
    Ok(parse_ply_raw(bytes)?.0)
}

trait PlyValueReader {
    fn next(&mut self, ty: PlyScalar) -> Option<f64>;
}

struct BinaryReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl PlyValueReader for BinaryReader<'_> {
    fn next(&mut self, ty: PlyScalar) -> Option<f64> {
        let end = self.pos + ty.size();
        let slice = self.data.get(self.pos..end)?;
        self.pos = end;
        Some(ty.read_le(slice))
    }
}

struct AsciiReader<'a> {
    tokens: std::str::SplitWhitespace<'a>,
}

impl PlyValueReader for AsciiReader<'_> {
    fn next(&mut self, _ty: PlyScalar) -> Option<f64> {
        self.tokens.next()?.parse().ok()
    }
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

// ---------------------------------------------------------------------------
// Writing

pub fn write_stl_binary(mesh: &TriangleMesh, mut w: impl Write) -> io::Result<()> {
    let mut header = [0u8; 80];
    let tag = b"amprint binary stl";
    header[..tag.len()].copy_from_slice(tag);
    w.write_all(&header)?;
    w.write_all(&(mesh.num_triangles() as u32).to_le_bytes())?;
    for t in 0..mesh.num_triangles() {
        let n = mesh.face_normal(t);
        for v in n.iter() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        for p in mesh.triangle_points(t) {
            for v in p.iter() {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        w.write_all(&[0, 0])?;
    }
    Ok(())
}

pub fn write_stl_ascii(mesh: &TriangleMesh, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "solid amprint")?;
    for t in 0..mesh.num_triangles() {
        let n = mesh.face_normal(t);
        writeln!(w, "  facet normal {:e} {:e} {:e}", n.x, n.y, n.z)?;
        writeln!(w, "    outer loop")?;
        for p in mesh.triangle_points(t) {
            writeln!(w, "      vertex {:e} {:e} {:e}", p.x, p.y, p.z)?;
        }
        writeln!(w, "    endloop")?;
        writeln!(w, "  endfacet")?;
    }
    writeln!(w, "endsolid amprint")
}

/// ASCII PLY with vertex positions (full precision) and triangle faces.
pub fn write_ply(mesh: &TriangleMesh, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.num_vertices())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    writeln!(w, "element face {}", mesh.num_triangles())?;
    writeln!(w, "property list uchar int vertex_indices\nend_header")?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn write_obj(mesh: &TriangleMesh, mut w: impl Write) -> io::Result<()> {
    for p in mesh.vertices() {
        writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn save_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> io::Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    match format {
        MeshFormat::StlBinary => write_stl_binary(mesh, &mut w)?,
        MeshFormat::StlAscii => write_stl_ascii(mesh, &mut w)?,
        MeshFormat::Ply => write_ply(mesh, &mut w)?,
        MeshFormat::Obj => write_obj(mesh, &mut w)?,
    }
    w.flush()
}
