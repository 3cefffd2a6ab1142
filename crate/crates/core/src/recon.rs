//! Synthetic layer images and point-cloud reconstruction.
//!
//! [`slice_mesh`] rasterizes the mesh cross-section at every print layer
//! (even-odd fill, pixel centres sampled) which stands in for the binarized
//! camera frames of a real print. [`reconstruct`] then turns the layer stack
//! back into points: the 1-px inner boundary of every layer, plus the same
//! boundary extraction on xz cross-sections swept along y so faces parallel
//! to the bed are captured too.
//!
//! Rasters cover only the pixel window around the mesh footprint; pixel
//! coordinates are still expressed on the full bed grid.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{parse_ply_points, MeshError, TriangleMesh};
use crate::util::fmt_sig9;
use crate::{par, Point};

pub const DEFAULT_BED_WIDTH: f64 = 254.0;
pub const DEFAULT_BED_DEPTH: f64 = 203.0;
pub const DEFAULT_LAYER_THICKNESS: f64 = 0.102;
/// 3840 px across the bed width.
pub const DEFAULT_PITCH: f64 = DEFAULT_BED_WIDTH / 3840.0;

/// Marker written into exported files: these clouds come from rasterized
/// meshes, not from camera frames.
pub const SYNTHETIC_FLAG: &str = "synthetic layer rasterization (no camera capture)";

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("mesh is not closed ({0} boundary or non-manifold edges)")]
    OpenMesh(usize),
    #[error("mesh bounds {0} fall outside the {1} x {2} mm bed (z must be >= 0)")]
    OutOfBed(String, f64, f64),
    #[error("open cross-section contour in layer {layer} (z = {z} mm)")]
    OpenContour { layer: usize, z: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("layer stack is empty")]
    EmptyStack,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("png error: {0}")]
    Png(String),
    #[error("stack metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig {
    /// Pixel pitch, mm/px.
    pub pitch: f64,
    /// Layer thickness, mm.
    pub thickness: f64,
    pub bed_width: f64,
    pub bed_depth: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig {
            pitch: DEFAULT_PITCH,
            thickness: DEFAULT_LAYER_THICKNESS,
            bed_width: DEFAULT_BED_WIDTH,
            bed_depth: DEFAULT_BED_DEPTH,
        }
    }
}

impl SliceConfig {
    pub fn with_pitch(mut self, pitch: f64) -> Self {
        self.pitch = pitch;
        self
    }

    fn validate(&self) -> Result<(), ReconError> {
        for (name, v) in [
            ("pitch", self.pitch),
            ("thickness", self.thickness),
            ("bed width", self.bed_width),
            ("bed depth", self.bed_depth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ReconError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Pixel columns and rows covering the whole bed.
    pub fn bed_pixels(&self) -> (usize, usize) {
        ((self.bed_width / self.pitch).ceil() as usize, (self.bed_depth / self.pitch).ceil() as usize)
    }
}

/// Binary image, row-major, `true` = material (white).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Raster { width, height, data: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[j * self.width + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[j * self.width + i] = v;
    }

    pub fn count_white(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    fn white_with_black_neighbour(&self, i: usize, j: usize) -> bool {
        self.get(i, j)
            && (i == 0
                || j == 0
                || i + 1 == self.width
                || j + 1 == self.height
                || !self.get(i - 1, j)
                || !self.get(i + 1, j)
                || !self.get(i, j - 1)
                || !self.get(i, j + 1))
    }
}

/// White pixels with at least one black 4-neighbour (the image border counts
/// as black), as `(column, row)` in row-major order.
pub fn boundary_pixels(raster: &Raster) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..raster.height {
        for i in 0..raster.width {
            if raster.white_with_black_neighbour(i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Binary layer images of one part.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Raster>,
    pub pitch: f64,
    pub thickness: f64,
    pub bed_width: f64,
    pub bed_depth: f64,
    /// Bed-grid index of raster column 0 and row 0.
    pub origin_px: (usize, usize),
    /// Sampling height of every layer, mm.
    pub sample_z: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StackMeta {
    pitch: f64,
    thickness: f64,
    bed_width: f64,
    bed_depth: f64,
    origin_px: (usize, usize),
    width: usize,
    height: usize,
    sample_z: Vec<f64>,
    source: String,
}

impl LayerStack {
    pub fn width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.width)
    }

    pub fn height(&self) -> usize {
        self.layers.first().map_or(0, |l| l.height)
    }

    /// Centre of pixel `(i, j)` in layer `k`, bed coordinates (mm).
    pub fn pixel_center(&self, i: usize, j: usize, k: usize) -> Point {
        Point::new(
            (self.origin_px.0 + i) as f64 * self.pitch + 0.5 * self.pitch,
            (self.origin_px.1 + j) as f64 * self.pitch + 0.5 * self.pitch,
            (k as f64 + 0.5) * self.thickness,
        )
    }

    /// Material area of layer `k` in mm².
    pub fn layer_area(&self, k: usize) -> f64 {
        self.layers[k].count_white() as f64 * self.pitch * self.pitch
    }

    /// Writes `layer_NNNNN.png` (1-bit) per layer and `stack.json`.
    pub fn save(&self, dir: &Path) -> Result<(), ReconError> {
        fs::create_dir_all(dir)?;
        for (k, layer) in self.layers.iter().enumerate() {
            write_layer_png(layer, &dir.join(format!("layer_{k:05}.png")))?;
        }
        let meta = StackMeta {
            pitch: self.pitch,
            thickness: self.thickness,
            bed_width: self.bed_width,
            bed_depth: self.bed_depth,
            origin_px: self.origin_px,
            width: self.width(),
            height: self.height(),
            sample_z: self.sample_z.clone(),
            source: SYNTHETIC_FLAG.to_string(),
        };
        fs::write(dir.join("stack.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ReconError> {
        let meta: StackMeta = serde_json::from_slice(&fs::read(dir.join("stack.json"))?)?;
        let layers = (0..meta.sample_z.len())
            .map(|k| read_layer_png(&dir.join(format!("layer_{k:05}.png"))))
            .collect::<Result<Vec<_>, _>>()?;
        if layers.iter().any(|l| l.width != meta.width || l.height != meta.height) {
            return Err(ReconError::InvalidParameter("layer images differ in size".into()));
        }
        Ok(LayerStack {
            layers,
            pitch: meta.pitch,
            thickness: meta.thickness,
            bed_width: meta.bed_width,
            bed_depth: meta.bed_depth,
            origin_px: meta.origin_px,
            sample_z: meta.sample_z,
        })
    }
}

pub fn write_layer_png(raster: &Raster, path: &Path) -> Result<(), ReconError> {
    let file = BufWriter::new(fs::File::create(path)?);
    let mut enc = png::Encoder::new(file, raster.width as u32, raster.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let mut writer = enc.write_header().map_err(|e| ReconError::Png(e.to_string()))?;
    let stride = raster.width.div_ceil(8);
    let mut packed = vec![0u8; stride * raster.height];
    for j in 0..raster.height {
        for i in 0..raster.width {
            if raster.get(i, j) {
                packed[j * stride + i / 8] |= 0x80 >> (i % 8);
            }
        }
    }
    writer.write_image_data(&packed).map_err(|e| ReconError::Png(e.to_string()))?;
    Ok(())
}

pub fn read_layer_png(path: &Path) -> Result<Raster, ReconError> {
    let mut dec = png::Decoder::new(io::BufReader::new(fs::File::open(path)?));
    dec.set_transformations(png::Transformations::EXPAND);
    let mut reader = dec.read_info().map_err(|e| ReconError::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| ReconError::Png("image too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| ReconError::Png(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let mut r = Raster::new(w, h);
    for j in 0..h {
        for i in 0..w {
            r.set(i, j, buf[j * info.line_size + i * channels] > 127);
        }
    }
    Ok(r)
}

struct Segment {
    a: (f64, f64),
    b: (f64, f64),
}

/// Rasterizes every print layer of a closed mesh lying on the bed.
///
/// Layer `k` covers `[k·t, (k+1)·t]` and is sampled at its mid-plane, or at
/// the middle of the part of the layer below the mesh top for the final,
/// partially filled layer. Vertices exactly on a sampling plane or scanline
/// count as lying above it.
pub fn slice_mesh(mesh: &TriangleMesh, config: &SliceConfig) -> Result<LayerStack, ReconError> {
    config.validate()?;
    let open = mesh.edge_incidence().values().filter(|&&c| c != 2).count();
    if open > 0 {
        return Err(ReconError::OpenMesh(open));
    }
    let bb = mesh.bounding_box();
    if bb.min.x < 0.0
        || bb.min.y < 0.0
        || bb.min.z < 0.0
        || bb.max.x > config.bed_width
        || bb.max.y > config.bed_depth
    {
        return Err(ReconError::OutOfBed(
            format!("[{:?}, {:?}]", bb.min.coords.as_slice(), bb.max.coords.as_slice()),
            config.bed_width,
            config.bed_depth,
        ));
    }
    let p = config.pitch;
    let (cols, rows) = config.bed_pixels();
    let i0 = ((bb.min.x / p).floor() as usize).saturating_sub(1);
    let j0 = ((bb.min.y / p).floor() as usize).saturating_sub(1);
    let i1 = (((bb.max.x / p).ceil() as usize) + 1).min(cols);
    let j1 = (((bb.max.y / p).ceil() as usize) + 1).min(rows);
    let (width, height) = (i1 - i0, j1 - j0);

    let t = config.thickness;
    let z_top = bb.max.z;
    let n_layers = ((z_top / t) - 1e-9).ceil().max(0.0) as usize;
    let sample_z: Vec<f64> =
        (0..n_layers).map(|k| ((k as f64 + 0.5) * t).min(0.5 * (k as f64 * t + z_top))).collect();

    let tri_z: Vec<(f64, f64)> = (0..mesh.num_triangles())
        .map(|ti| {
            let pts = mesh.triangle_points(ti);
            let lo = pts.iter().map(|q| q.z).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|q| q.z).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();

    let layers = par::try_map_range(n_layers, |k| {
        let z = sample_z[k];
        let mut segments = Vec::new();
        let mut edge_uses: HashMap<(usize, usize), u32> = HashMap::new();
        for (ti, tri) in mesh.triangles().iter().enumerate() {
            let (lo, hi) = tri_z[ti];
            if hi < z || lo >= z {
                continue;
            }
            let mut hits = Vec::with_capacity(2);
            for e in 0..3 {
                let (u, v) = (tri[e], tri[(e + 1) % 3]);
                let (pu, pv) = (mesh.vertices()[u], mesh.vertices()[v]);
                if (pu.z >= z) != (pv.z >= z) {
                    let s = (z - pu.z) / (pv.z - pu.z);
                    hits.push((pu.x + s * (pv.x - pu.x), pu.y + s * (pv.y - pu.y)));
                    *edge_uses.entry((u.min(v), u.max(v))).or_default() += 1;
                }
            }
            if hits.len() == 2 {
                segments.push(Segment { a: hits[0], b: hits[1] });
            }
        }
        if edge_uses.values().any(|&c| c != 2) {
            return Err(ReconError::OpenContour { layer: k, z });
        }
        fill_layer(&segments, width, height, (i0, j0), p).ok_or(ReconError::OpenContour { layer: k, z })
    })?;

    Ok(LayerStack {
        layers,
        pitch: p,
        thickness: t,
        bed_width: config.bed_width,
        bed_depth: config.bed_depth,
        origin_px: (i0, j0),
        sample_z,
    })
}

/// Even-odd scanline fill sampled at pixel centres. `None` if some scanline
/// crosses the contour an odd number of times.
fn fill_layer(segments: &[Segment], width: usize, height: usize, origin: (usize, usize), p: f64) -> Option<Raster> {
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); height];
    let row_y = |j: usize| (origin.1 + j) as f64 * p + 0.5 * p;
    for s in segments {
        let (ylo, yhi) = (s.a.1.min(s.b.1), s.a.1.max(s.b.1));
        let jlo = ((ylo / p - 0.5).floor() as i64 - origin.1 as i64).max(0) as usize;
        let jhi = ((yhi / p - 0.5).ceil() as i64 - origin.1 as i64).clamp(0, height as i64 - 1) as usize;
        for (j, row) in crossings.iter_mut().enumerate().take(jhi + 1).skip(jlo) {
            let y = row_y(j);
            if (s.a.1 >= y) != (s.b.1 >= y) {
                let f = (y - s.a.1) / (s.b.1 - s.a.1);
                row.push(s.a.0 + f * (s.b.0 - s.a.0));
            }
        }
    }
    let mut raster = Raster::new(width, height);
    for (j, xs) in crossings.iter_mut().enumerate() {
        if xs.len() % 2 == 1 {
            return None;
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks(2) {
            // pixel centres c with pair[0] <= c < pair[1]
            let first = ((pair[0] / p - 0.5).ceil() as i64 - origin.0 as i64).max(0);
            let last = ((pair[1] / p - 0.5).ceil() as i64 - 1 - origin.0 as i64).min(width as i64 - 1);
            for i in first..=last {
                raster.set(i as usize, j, true);
            }
        }
    }
    Some(raster)
}

/// Reconstructed sample points with their reported surface density.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Points per mm² of source surface; 0 when the source area is unknown.
    pub density: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud { points, density: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_source_area(mut self, area: f64) -> Self {
        self.density = if area > 0.0 { self.points.len() as f64 / area } else { 0.0 };
        self
    }
}

/// Rebuilds surface samples from a layer stack (xy boundaries of every
/// layer plus xz cross-sections swept along y). Pixel `(i, j)` of layer `k`
/// maps to its centre. Output is sorted by layer, then row, then column.
pub fn reconstruct(stack: &LayerStack, source_area: Option<f64>) -> Result<PointCloud, ReconError> {
    if stack.layers.is_empty() {
        return Err(ReconError::EmptyStack);
    }
    let (w, h, n) = (stack.width(), stack.height(), stack.layers.len());
    let xy: Vec<Vec<(usize, usize, usize)>> = par::map_range(n, |k| {
        boundary_pixels(&stack.layers[k]).into_iter().map(|(i, j)| (k, j, i)).collect()
    });
    let xz: Vec<Vec<(usize, usize, usize)>> = par::map_range(h, |j| {
        let mut section = Raster::new(w, n);
        for k in 0..n {
            for i in 0..w {
                if stack.layers[k].get(i, j) {
                    section.set(i, k, true);
                }
            }
        }
        boundary_pixels(&section).into_iter().map(|(i, k)| (k, j, i)).collect()
    });
    let mut keys: Vec<(usize, usize, usize)> = xy.into_iter().chain(xz).flatten().collect();
    keys.sort_unstable();
    keys.dedup();
    let points = keys.into_iter().map(|(k, j, i)| stack.pixel_center(i, j, k)).collect();
    let cloud = PointCloud::new(points);
    Ok(match source_area {
        Some(a) => cloud.with_source_area(a),
        None => cloud,
    })
}

/// ASCII PLY with the vertex count in the header and nine significant digits
/// per coordinate.
pub fn write_cloud_ply(cloud: &PointCloud, mut w: impl Write) -> Result<(), ReconError> {
    if cloud.is_empty() {
        return Err(ReconError::EmptyCloud);
    }
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "comment source: {SYNTHETIC_FLAG}")?;
    if cloud.density > 0.0 {
        writeln!(w, "comment density_pts_per_mm2: {}", fmt_sig9(cloud.density))?;
    }
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z\nend_header")?;
    for p in &cloud.points {
        writeln!(w, "{} {} {}", fmt_sig9(p.x), fmt_sig9(p.y), fmt_sig9(p.z))?;
    }
    Ok(())
}

pub fn export_ply(cloud: &PointCloud, path: &Path) -> Result<(), ReconError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_cloud_ply(cloud, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Loads the vertex positions of any PLY file as a cloud.
pub fn load_cloud(path: &Path) -> Result<PointCloud, ReconError> {
    let points = parse_ply_points(&fs::read(path)?)?;
    Ok(PointCloud::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::Vector;

    #[test]
    fn boundary_cases() {
        assert!(boundary_pixels(&Raster::new(5, 4)).is_empty());
        let mut one = Raster::new(5, 5);
        one.set(2, 3, true);
        assert_eq!(boundary_pixels(&one), vec![(2, 3)]);
        let mut rect = Raster::new(20, 20);
        let (w, h) = (7, 5);
        for j in 4..4 + h {
            for i in 3..3 + w {
                rect.set(i, j, true);
            }
        }
        assert_eq!(boundary_pixels(&rect).len(), 2 * w + 2 * h - 4);
        // touching the image border counts as black
        let mut full = Raster::new(3, 3);
        for j in 0..3 {
            for i in 0..3 {
                full.set(i, j, true);
            }
        }
        assert_eq!(boundary_pixels(&full).len(), 8);
    }

    #[test]
    fn cube_layers() {
        let cube = shapes::translated(&shapes::cube(10.0), Vector::new(20.0, 20.0, 0.0));
        let stack = slice_mesh(&cube, &SliceConfig::default()).unwrap();
        assert_eq!(stack.layers.len(), 99);
        let px = stack.pitch * stack.pitch;
        for k in 0..stack.layers.len() {
            let area = stack.layer_area(k);
            // filled 10 x 10 mm square, within one pixel ring
            assert!((area - 100.0).abs() <= 4.0 * 10.0 * stack.pitch + 4.0 * px, "layer {k}: {area}");
        }
        assert!(stack.width() as f64 * stack.pitch <= stack.bed_width + stack.pitch);
    }

    #[test]
    fn empty_layers_below_raised_part() {
        let cube = shapes::translated(&shapes::cube(2.0), Vector::new(5.0, 5.0, 1.0));
        let stack = slice_mesh(&cube, &SliceConfig::default()).unwrap();
        assert_eq!(stack.layers[0].count_white(), 0);
        assert!(stack.layers.last().unwrap().count_white() > 0);
    }

    #[test]
    fn rejects_open_and_out_of_bed() {
        let open = shapes::grid(5.0, 2);
        assert!(matches!(slice_mesh(&open, &SliceConfig::default()), Err(ReconError::OpenMesh(_))));
        let sphere = shapes::icosphere(5.0, 1);
        assert!(matches!(slice_mesh(&sphere, &SliceConfig::default()), Err(ReconError::OutOfBed(..))));
        let bad = SliceConfig { pitch: 0.0, ..SliceConfig::default() };
        assert!(matches!(slice_mesh(&shapes::cube(1.0), &bad), Err(ReconError::InvalidParameter(_))));
    }

    #[test]
    fn cube_cloud_has_top_face() {
        let cube = shapes::translated(&shapes::cube(4.0), Vector::new(10.0, 10.0, 0.0));
        let stack = slice_mesh(&cube, &SliceConfig::default()).unwrap();
        let cloud = reconstruct(&stack, Some(cube.surface_area())).unwrap();
        let top = stack.thickness * (stack.layers.len() as f64 - 0.5);
        let n_top = cloud.points.iter().filter(|p| (p.z - top).abs() < 1e-9 && p.x > 11.0 && p.x < 13.0).count();
        assert!(n_top > 100);
        // the xy pass alone only sees the ring of the top layer
        let ring = boundary_pixels(stack.layers.last().unwrap()).len();
        assert!(n_top + ring > ring * 2);
        assert!(cloud.density > 0.0);
    }

    #[test]
    fn ply_round_trip() {
        let cloud = PointCloud::new(vec![Point::new(1.0 / 3.0, 2.5, 123.456789012)]);
        let mut buf = Vec::new();
        write_cloud_ply(&cloud, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("element vertex 1\n"));
        let back = parse_ply_points(&buf).unwrap();
        assert!((back[0] - cloud.points[0]).norm() < 1e-6);
        assert!(matches!(write_cloud_ply(&PointCloud::new(vec![]), &mut Vec::new()), Err(ReconError::EmptyCloud)));
    }

    #[test]
    fn png_stack_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cube = shapes::translated(&shapes::cube(1.0), Vector::new(3.0, 3.0, 0.0));
        let stack = slice_mesh(&cube, &SliceConfig::default()).unwrap();
        stack.save(dir.path()).unwrap();
        let back = LayerStack::load(dir.path()).unwrap();
        assert_eq!(back, stack);
    }
}
