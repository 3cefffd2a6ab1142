//! Balanced 3-d tree for exact nearest-neighbour queries.

use crate::Point;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static k-d tree over a point set. Built once by median splits; queries
/// are exact.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    // permutation of point indices; leaves own contiguous ranges
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub index: usize,
    pub distance: f64,
}

impl KdTree {
    pub fn new(points: Vec<Point>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(&points, &mut order, 0, points.len(), &mut nodes);
        }
        KdTree { points, order, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Closest point to `query`; `None` for an empty tree. Ties resolve to the
    /// lowest point index.
    pub fn nearest(&self, query: &Point) -> Option<Neighbour> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        Some(Neighbour { index: best.0, distance: best.1.sqrt() })
    }

    fn search(&self, node: usize, q: &Point, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &[Point], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    // split on the widest axis
    let slice = &order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice {
        for k in 0..3 {
            lo[k] = lo[k].min(points[i][k]);
            hi[k] = hi[k].max(points[i][k]);
        }
    }
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
    if hi[axis] == lo[axis] {
        // all points coincide
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[order[start + mid]][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    // left holds coordinates <= value, right >= value
    let left = build(points, order, start, start + mid, nodes);
    let right = build(points, order, start + mid, end, nodes);
    nodes[id] = Node::Split { axis, value, left, right };
    id
}

/// O(n) scan used as a reference in tests and for tiny targets.
pub fn brute_force_nearest(points: &[Point], query: &Point) -> Option<Neighbour> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - query).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(index, d2)| Neighbour { index, distance: d2.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), 1..max)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Point::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn matches_brute_force(points in arb_points(300), queries in arb_points(20)) {
            let tree = KdTree::new(points.clone());
            for q in &queries {
                let a = tree.nearest(q).unwrap();
                let b = brute_force_nearest(&points, q).unwrap();
                prop_assert_eq!(a.distance, b.distance);
            }
        }
    }

    #[test]
    fn duplicates_and_empty() {
        let p = Point::new(1.0, 2.0, 3.0);
        let tree = KdTree::new(vec![p; 40]);
        let n = tree.nearest(&Point::origin()).unwrap();
        assert_eq!(n.index, 0);
        assert!(KdTree::new(vec![]).nearest(&p).is_none());
    }

    #[test]
    fn hand_geometry() {
        let tree = KdTree::new(vec![Point::new(3.0, 4.0, 0.0), Point::new(10.0, 0.0, 0.0)]);
        let n = tree.nearest(&Point::origin()).unwrap();
        assert_eq!(n.index, 0);
        assert_eq!(n.distance, 5.0);
    }
}
