//! Explicit separating-hyperplane search for two labelled point clouds.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `{z : normal·z + offset = 0}`, with the positive class on the positive side.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn signed_value(&self, z: &[f64]) -> f64 {
        self.normal.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + self.offset
    }

    /// Smallest signed distance of any point to the plane, measured toward its
    /// own class side. Positive iff the plane strictly separates the classes.
    pub fn margin(&self, points: &Matrix, labels: &[usize], positive: usize) -> f64 {
        let norm = self.normal.iter().map(|w| w * w).sum::<f64>().sqrt();
        (0..points.cols())
            .map(|i| {
                let v = self.signed_value(&points.column(i)) / norm;
                if labels[i] == positive {
                    v
                } else {
                    -v
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn separates(&self, points: &Matrix, labels: &[usize], positive: usize) -> bool {
        self.margin(points, labels, positive) > 0.0
    }
}

/// Finds a hyperplane strictly separating the points labelled `positive`
/// from all others, or `None` if the search fails.
///
/// In two dimensions the search is exact: two finite point sets are strictly
/// separable iff their convex hulls are disjoint, and then one of the hull
/// edges' normals (or directions, for degenerate hulls) is a separating axis.
/// Other dimensions fall back to a bounded perceptron.
pub fn find_separating_hyperplane(
    points: &Matrix,
    labels: &[usize],
    positive: usize,
) -> Result<Option<Hyperplane>> {
    if labels.len() != points.cols() {
        return Err(Error::dim(format!(
            "{} labels for {} points",
            labels.len(),
            points.cols()
        )));
    }
    let pos: Vec<Vec<f64>> = (0..points.cols())
        .filter(|&i| labels[i] == positive)
        .map(|i| points.column(i))
        .collect();
    let neg: Vec<Vec<f64>> = (0..points.cols())
        .filter(|&i| labels[i] != positive)
        .map(|i| points.column(i))
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::data("separability needs points from both classes"));
    }
    let plane = if points.rows() == 2 {
        separate_2d(&pos, &neg)
    } else {
        perceptron(&pos, &neg, 10_000)
    };
    Ok(plane.filter(|p| p.separates(points, labels, positive)))
}

type Pt = [f64; 2];

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; returns hull vertices counter-clockwise.
fn convex_hull(points: &[Vec<f64>]) -> Vec<Pt> {
    let mut pts: Vec<Pt> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Pt> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn separate_2d(pos: &[Vec<f64>], neg: &[Vec<f64>]) -> Option<Hyperplane> {
    let hp = convex_hull(pos);
    let hn = convex_hull(neg);
    let mut axes: Vec<Pt> = Vec::new();
    for hull in [&hp, &hn] {
        for i in 0..hull.len() {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            let e = [b[0] - a[0], b[1] - a[1]];
            if e != [0.0, 0.0] {
                axes.push([-e[1], e[0]]);
                axes.push(e);
            }
        }
    }
    let cp = centroid(&hp);
    let cn = centroid(&hn);
    axes.push([cp[0] - cn[0], cp[1] - cn[1]]);

    let project = |axis: Pt, hull: &[Pt]| {
        hull.iter()
            .map(|p| axis[0] * p[0] + axis[1] * p[1])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    };
    let mut best: Option<(f64, Hyperplane)> = None;
    for axis in axes {
        let norm = axis[0].hypot(axis[1]);
        if norm == 0.0 {
            continue;
        }
        let axis = [axis[0] / norm, axis[1] / norm];
        let (plo, phi) = project(axis, &hp);
        let (nlo, nhi) = project(axis, &hn);
        let candidate = if nhi < plo {
            Some((plo - nhi, axis, -(plo + nhi) / 2.0))
        } else if phi < nlo {
            Some((nlo - phi, [-axis[0], -axis[1]], (phi + nlo) / 2.0))
        } else {
            None
        };
        if let Some((gap, normal, offset)) = candidate {
            if best.as_ref().is_none_or(|(g, _)| gap > *g) {
                best = Some((
                    gap,
                    Hyperplane {
                        normal: normal.to_vec(),
                        offset,
                    },
                ));
            }
        }
    }
    best.map(|(_, h)| h)
}

fn centroid(hull: &[Pt]) -> Pt {
    let n = hull.len() as f64;
    let (x, y) = hull
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [x / n, y / n]
}

fn perceptron(pos: &[Vec<f64>], neg: &[Vec<f64>], max_epochs: usize) -> Option<Hyperplane> {
    let dim = pos[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let samples: Vec<(&Vec<f64>, f64)> = pos
        .iter()
        .map(|p| (p, 1.0))
        .chain(neg.iter().map(|p| (p, -1.0)))
        .collect();
    for _ in 0..max_epochs {
        let mut mistakes = 0;
        for (x, y) in &samples {
            let v: f64 = w.iter().zip(x.iter()).map(|(a, c)| a * c).sum::<f64>() + b;
            if y * v <= 0.0 {
                for (wi, xi) in w.iter_mut().zip(x.iter()) {
                    *wi += y * xi;
                }
                b += y;
                mistakes += 1;
            }
        }
        if mistakes == 0 {
            return Some(Hyperplane {
                normal: w,
                offset: b,
            });
        }
    }
    None
}
