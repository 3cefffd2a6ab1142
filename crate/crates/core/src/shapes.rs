//! Procedural test primitives: boxes, icospheres, cylinders, extrusions and
//! flat grids. All outputs are outward-oriented (counter-clockwise seen from
//! outside) and, apart from [`grid`], closed.

use std::collections::HashMap;

use crate::mesh::TriangleMesh;
use crate::{Point, Vector};

/// Axis-aligned box between two corners.
pub fn cuboid(min: Point, max: Point) -> TriangleMesh {
    let c = |i: usize| {
        Point::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices: Vec<Point> = (0..8).map(c).collect();
    let triangles = vec![
        [0, 2, 1],
        [1, 2, 3], // z = min
        [4, 5, 6],
        [5, 7, 6], // z = max
        [0, 1, 4],
        [1, 5, 4], // y = min
        [2, 6, 3],
        [3, 6, 7], // y = max
        [0, 4, 2],
        [2, 4, 6], // x = min
        [1, 3, 5],
        [3, 7, 5], // x = max
    ];
    TriangleMesh::new(vertices, triangles).expect("box is valid")
}

/// Cube `[0, edge]³`.
pub fn cube(edge: f64) -> TriangleMesh {
    cuboid(Point::origin(), Point::new(edge, edge, edge))
}

/// Icosphere of the given radius centred at the origin, refined `level` times.
pub fn icosphere(radius: f64, level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let points = verts.into_iter().map(|v| Point::from(v * radius)).collect();
    TriangleMesh::new(points, faces).expect("icosphere is valid")
}

/// Closed cylinder along +z with its base centred at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> TriangleMesh {
    assert!(segments >= 3 && rings >= 1);
    let mut vertices = Vec::new();
    for r in 0..=rings {
        let z = height * r as f64 / rings as f64;
        for s in 0..segments {
            let a = std::f64::consts::TAU * s as f64 / segments as f64;
            vertices.push(Point::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let idx = |r: usize, s: usize| r * segments + s % segments;
    let mut triangles = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            let (a, b, c, d) = (idx(r, s), idx(r, s + 1), idx(r + 1, s + 1), idx(r + 1, s));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let bottom = vertices.len();
    vertices.push(Point::new(0.0, 0.0, 0.0));
    let top = vertices.len();
    vertices.push(Point::new(0.0, 0.0, height));
    for s in 0..segments {
        triangles.push([bottom, idx(0, s + 1), idx(0, s)]);
        triangles.push([top, idx(rings, s), idx(rings, s + 1)]);
    }
    TriangleMesh::new(vertices, triangles).expect("cylinder is valid")
}

/// Extrudes a counter-clockwise polygon that is star-shaped with respect to
/// its first vertex between `z = 0` and `z = height`.
pub fn extrude_star_polygon(outline: &[(f64, f64)], height: f64) -> TriangleMesh {
    let n = outline.len();
    assert!(n >= 3);
    let mut vertices: Vec<Point> = outline.iter().map(|&(x, y)| Point::new(x, y, 0.0)).collect();
    vertices.extend(outline.iter().map(|&(x, y)| Point::new(x, y, height)));
    let mut triangles = Vec::new();
    for k in 1..n - 1 {
        triangles.push([0, k + 1, k]);
        triangles.push([n, n + k, n + k + 1]);
    }
    for k in 0..n {
        let j = (k + 1) % n;
        triangles.push([k, j, n + j]);
        triangles.push([k, n + j, n + k]);
    }
    TriangleMesh::new(vertices, triangles).expect("extrusion is valid")
}

/// L-shaped bracket: two `arm × thickness` legs joined at the origin corner,
/// extruded to `depth` along z.
pub fn l_bracket(arm: f64, thickness: f64, depth: f64) -> TriangleMesh {
    extrude_star_polygon(
        &[(0.0, 0.0), (arm, 0.0), (arm, thickness), (thickness, thickness), (thickness, arm), (0.0, arm)],
        depth,
    )
}

/// Regular `n × n` quad grid split into triangles on the plane z = 0,
/// covering `[0, size]²`. Open (has a boundary).
pub fn grid(size: f64, n: usize) -> TriangleMesh {
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(size * i as f64 / n as f64, size * j as f64 / n as f64, 0.0));
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::new();
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("grid is valid")
}

/// Box `[0,w]×[0,w]×[0,h]` whose top face is replaced by four triangles
/// meeting at an apex pushed down to the box centre.
pub fn dented_box(w: f64, h: f64) -> TriangleMesh {
    let mut vertices: Vec<Point> = vec![
        Point::new(0.0, 0.0, 0.0),
        Point::new(w, 0.0, 0.0),
        Point::new(w, w, 0.0),
        Point::new(0.0, w, 0.0),
        Point::new(0.0, 0.0, h),
        Point::new(w, 0.0, h),
        Point::new(w, w, h),
        Point::new(0.0, w, h),
    ];
    vertices.push(Point::new(w / 2.0, w / 2.0, h / 2.0));
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
        [4, 5, 8],
        [5, 6, 8],
        [6, 7, 8],
        [7, 4, 8],
    ];
    TriangleMesh::new(vertices, triangles).expect("dented box is valid")
}

/// Splits every triangle into four at its edge midpoints, `times` times.
/// The surface is unchanged; only vertex density grows.
pub fn subdivide(mesh: &TriangleMesh, times: u32) -> TriangleMesh {
    let mut vertices = mesh.vertices().to_vec();
    let mut triangles = mesh.triangles().to_vec();
    for _ in 0..times {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for t in &triangles {
            let mut m = [0; 3];
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                m[e] = *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    vertices.push(Point::from((vertices[a].coords + vertices[b].coords) / 2.0));
                    vertices.len() - 1
                });
            }
            next.push([t[0], m[0], m[2]]);
            next.push([m[0], t[1], m[1]]);
            next.push([m[2], m[1], t[2]]);
            next.push([m[0], m[1], m[2]]);
        }
        triangles = next;
    }
    TriangleMesh::new(vertices, triangles).expect("subdivision of a valid mesh is valid")
}

/// Translates a mesh by `offset`.
pub fn translated(mesh: &TriangleMesh, offset: Vector) -> TriangleMesh {
    mesh.map_vertices(|p| p + offset)
}
