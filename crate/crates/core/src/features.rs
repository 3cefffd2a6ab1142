//! Per-vertex predictor features.
//!
//! Each vertex gets ten values: its coordinates, discrete Gaussian and mean
//! curvature, the largest, smallest and average incident triangle angle, the
//! angle between its normal and the build direction (+z), and its distance to
//! the nearest face of the mesh bounding box.
//!
//! Curvatures use the angle-deficit and cotangent-Laplacian operators over
//! the mixed (Voronoi / barycentric fallback) vertex area.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{corner_angle, Aabb, TriangleMesh};
use crate::util::fmt_sig9;
use crate::{par, Point, Vector};

/// Curvature magnitudes above this are clamped.
pub const CURVATURE_CLAMP: f64 = 1e6;

/// Column names in CSV order.
pub const FEATURE_NAMES: [&str; 10] = ["x", "y", "z", "kg", "km", "amax", "amin", "amean", "nz", "dbb"];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("vertex {0} has no incident triangles")]
    IsolatedVertex(usize),
    #[error("vertex index {0} out of range")]
    NoSuchVertex(usize),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv row {row}: {message}")]
    BadRow { row: usize, message: String },
}

/// The ten per-vertex features, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FeatureRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Gaussian curvature, 1/mm².
    pub kg: f64,
    /// Mean curvature magnitude, 1/mm.
    pub km: f64,
    pub amax: f64,
    pub amin: f64,
    pub amean: f64,
    /// Angle between the vertex normal and +z, radians.
    pub nz: f64,
    /// Distance to the nearest bounding-box face, mm.
    pub dbb: f64,
}

impl FeatureRow {
    pub fn to_array(&self) -> [f64; 10] {
        [self.x, self.y, self.z, self.kg, self.km, self.amax, self.amin, self.amean, self.nz, self.dbb]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        FeatureRow {
            x: a[0],
            y: a[1],
            z: a[2],
            kg: a[3],
            km: a[4],
            amax: a[5],
            amin: a[6],
            amean: a[7],
            nz: a[8],
            dbb: a[9],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Local differential quantities at a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexCurvature {
    /// Sum of incident corner angles.
    pub angle_sum: f64,
    /// Mixed vertex area (mm²).
    pub mixed_area: f64,
    /// Angle deficit: `2π − Σθ` inside, `π − Σθ` on the boundary.
    pub deficit: f64,
    pub gaussian: f64,
    pub mean: f64,
    /// Vertex touches an edge with a single incident triangle.
    pub boundary: bool,
    pub max_angle: f64,
    pub min_angle: f64,
    pub mean_angle: f64,
    /// Curvature exceeded [`CURVATURE_CLAMP`] and was clamped.
    pub clamped: bool,
}

fn cot(a: &Point, b: &Point, c: &Point) -> f64 {
    // cotangent of the angle at a
    let u = b - a;
    let v = c - a;
    u.dot(&v) / u.cross(&v).norm()
}

/// Curvature and angle statistics at vertex `v` from its incident triangles.
pub fn vertex_curvature(mesh: &TriangleMesh, v: usize) -> Result<VertexCurvature, FeatureError> {
    if v >= mesh.num_vertices() {
        return Err(FeatureError::NoSuchVertex(v));
    }
    let tris = mesh.vertex_triangles(v);
    if tris.is_empty() {
        return Err(FeatureError::IsolatedVertex(v));
    }
    let verts = mesh.vertices();
    let xi = verts[v];
    let mut angle_sum = 0.0;
    let mut area = 0.0;
    let mut laplace = Vector::zeros();
    let (mut amax, mut amin) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut neighbour_uses: HashMap<usize, u32> = HashMap::with_capacity(tris.len() * 2);

    for &t in tris {
        let tri = mesh.triangles()[t];
        let k = tri.iter().position(|&i| i == v).expect("adjacency is consistent");
        let (j, l) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
        let (xj, xl) = (verts[j], verts[l]);
        *neighbour_uses.entry(j).or_default() += 1;
        *neighbour_uses.entry(l).or_default() += 1;

        let theta_i = corner_angle(&xi, &xj, &xl);
        let theta_j = corner_angle(&xj, &xl, &xi);
        let theta_l = corner_angle(&xl, &xi, &xj);
        angle_sum += theta_i;
        amax = amax.max(theta_i);
        amin = amin.min(theta_i);

        let cot_j = cot(&xj, &xl, &xi);
        let cot_l = cot(&xl, &xi, &xj);
        // edge (i, j) is opposite l, edge (i, l) is opposite j
        laplace += (xi - xj) * cot_l + (xi - xl) * cot_j;

        let tri_area = 0.5 * (xj - xi).cross(&(xl - xi)).norm();
        let right = PI / 2.0;
        area += if theta_i > right {
            tri_area / 2.0
        } else if theta_j > right || theta_l > right {
            tri_area / 4.0
        } else {
            ((xi - xj).norm_squared() * cot_l + (xi - xl).norm_squared() * cot_j) / 8.0
        };
    }
    let boundary = neighbour_uses.values().any(|&c| c == 1);
    let deficit = if boundary { PI - angle_sum } else { TAU - angle_sum };
    let mut gaussian = deficit / area;
    let mut mean = laplace.norm() / (4.0 * area);
    let mut clamped = false;
    if gaussian.abs() > CURVATURE_CLAMP {
        gaussian = gaussian.signum() * CURVATURE_CLAMP;
        clamped = true;
    }
    if mean > CURVATURE_CLAMP {
        mean = CURVATURE_CLAMP;
        clamped = true;
    }
    Ok(VertexCurvature {
        angle_sum,
        mixed_area: area,
        deficit,
        gaussian,
        mean,
        boundary,
        max_angle: amax,
        min_angle: amin,
        mean_angle: angle_sum / tris.len() as f64,
        clamped,
    })
}

/// Discrete Gaussian curvature at `v` (1/mm²).
pub fn gaussian_curvature(mesh: &TriangleMesh, v: usize) -> Result<f64, FeatureError> {
    vertex_curvature(mesh, v).map(|c| c.gaussian)
}

/// Discrete mean curvature magnitude at `v` (1/mm).
pub fn mean_curvature(mesh: &TriangleMesh, v: usize) -> Result<f64, FeatureError> {
    vertex_curvature(mesh, v).map(|c| c.mean)
}

/// Σ over vertices of the interior angle deficit `2π − Σθ`. Equals `2πχ`
/// on a closed mesh.
pub fn total_angle_deficit(mesh: &TriangleMesh) -> f64 {
    let mut sums = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles()[t];
        let p = mesh.triangle_points(t);
        for k in 0..3 {
            sums[tri[k]] += corner_angle(&p[k], &p[(k + 1) % 3], &p[(k + 2) % 3]);
        }
    }
    sums.iter().map(|s| TAU - s).sum()
}

/// Angle between a unit normal and +z, in `[0, π]`.
pub fn build_direction_angle(normal: &Vector) -> f64 {
    normal.z.clamp(-1.0, 1.0).acos()
}

fn row_for(mesh: &TriangleMesh, bbox: &Aabb, v: usize) -> Result<(FeatureRow, bool), FeatureError> {
    let c = vertex_curvature(mesh, v)?;
    let p = mesh.vertices()[v];
    let row = FeatureRow {
        x: p.x,
        y: p.y,
        z: p.z,
        kg: c.gaussian,
        km: c.mean,
        amax: c.max_angle,
        amin: c.min_angle,
        amean: c.mean_angle,
        nz: build_direction_angle(&mesh.normals()[v]),
        dbb: bbox.distance_to_faces(&p),
    };
    Ok((row, c.clamped))
}

/// Feature rows for a subset of vertices, in the order given.
pub fn features_for(mesh: &TriangleMesh, vertices: &[usize]) -> Result<Vec<FeatureRow>, FeatureError> {
    let bbox = mesh.bounding_box();
    let clamped = AtomicUsize::new(0);
    let rows = par::try_map_range(vertices.len(), |i| {
        let (row, c) = row_for(mesh, &bbox, vertices[i])?;
        if c {
            clamped.fetch_add(1, Ordering::Relaxed);
        }
        Ok::<_, FeatureError>(row)
    })?;
    let clamped = clamped.into_inner();
    if clamped > 0 {
        log::warn!("clamped curvature at {clamped} vertices (|value| > {CURVATURE_CLAMP:e})");
    }
    Ok(rows)
}

/// One feature row per vertex, ordered by vertex index.
pub fn extract_features(mesh: &TriangleMesh) -> Result<Vec<FeatureRow>, FeatureError> {
    let all: Vec<usize> = (0..mesh.num_vertices()).collect();
    features_for(mesh, &all)
}

/// Writes rows as CSV with the `x,y,z,kg,km,amax,amin,amean,nz,dbb` header
/// (plus `target` when targets are given), nine significant digits.
pub fn write_features_csv(
    rows: &[FeatureRow],
    targets: Option<&[f64]>,
    w: impl Write,
) -> Result<(), FeatureError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    if targets.is_some() {
        header.push("target");
    }
    out.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec: Vec<String> = row.to_array().iter().map(|&v| fmt_sig9(v)).collect();
        if let Some(t) = targets {
            rec.push(fmt_sig9(t[i]));
        }
        out.write_record(&rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads feature rows, plus the `target` column when present.
pub fn read_features_csv(r: impl Read) -> Result<(Vec<FeatureRow>, Option<Vec<f64>>), FeatureError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let idx: Vec<usize> = FEATURE_NAMES
        .iter()
        .map(|n| col(n).ok_or_else(|| FeatureError::BadRow { row: 0, message: format!("missing column '{n}'") }))
        .collect::<Result<_, _>>()?;
    let target_col = col("target");
    let mut rows = Vec::new();
    let mut targets = target_col.map(|_| Vec::new());
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |c: usize| -> Result<f64, FeatureError> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| FeatureError::BadRow { row: r + 1, message: format!("bad value in column {c}") })
        };
        let mut a = [0.0; 10];
        for (k, &c) in idx.iter().enumerate() {
            a[k] = parse(c)?;
        }
        rows.push(FeatureRow::from_array(a));
        if let (Some(c), Some(t)) = (target_col, targets.as_mut()) {
            t.push(parse(c)?);
        }
    }
    Ok((rows, targets))
}
