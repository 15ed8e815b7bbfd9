//! Reference localizers: nonlinear least-squares trilateration and KNN
//! coordinate regression over a coordinate-labelled fingerprint database.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::landmark::nearest_neighbors;
use crate::scalar::{count, lit, Real};
use crate::sensing::{frame_to_features, ObservationFrame};

const MAX_ITERATIONS: usize = 100;
const STEP_TOLERANCE: f64 = 1e-9;
const LAMBDA_INIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlstSolution<T> {
    pub position: Point2<T>,
    pub cost: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Sum of squared range residuals at `p`.
pub fn range_cost<T: Real>(p: Point2<T>, pairs: &[(Point2<T>, T)]) -> T {
    pairs
        .iter()
        .map(|(a, d)| {
            let r = p.distance(a) - *d;
            r * r
        })
        .sum()
}

fn collinear<T: Real>(pts: &[Point2<T>]) -> bool {
    let a = pts[0];
    let scale = pts
        .iter()
        .map(|p| p.distance(&a))
        .fold(T::zero(), T::max);
    if !(scale > T::zero()) {
        return true;
    }
    let tol = lit::<T>(1e-9) * scale * scale;
    // any triple with non-negligible area breaks collinearity
    let far = pts
        .iter()
        .copied()
        .max_by(|p, q| p.distance(&a).partial_cmp(&q.distance(&a)).unwrap())
        .unwrap();
    pts.iter().all(|p| {
        let cross = (far.x - a.x) * (p.y - a.y) - (far.y - a.y) * (p.x - a.x);
        cross.abs() <= tol
    })
}

fn pairs_for<T: Real>(
    ranges: &BTreeMap<String, T>,
    anchors: &BTreeMap<String, Point2<T>>,
) -> Result<Vec<(Point2<T>, T)>> {
    let pairs: Vec<(Point2<T>, T)> = ranges
        .iter()
        .map(|(id, d)| {
            anchors
                .get(id)
                .map(|a| (*a, *d))
                .ok_or_else(|| Error::UnknownAnchor(id.clone()))
        })
        .collect::<Result<_>>()?;
    if pairs.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 3 ranging anchors, got {}",
            pairs.len()
        )));
    }
    let pts: Vec<Point2<T>> = pairs.iter().map(|p| p.0).collect();
    if collinear(&pts) {
        return Err(Error::DegenerateGeometry("anchors are collinear".into()));
    }
    Ok(pairs)
}

/// Centroid of the anchors that have a range.
pub fn anchor_centroid<T: Real>(
    ranges: &BTreeMap<String, T>,
    anchors: &BTreeMap<String, Point2<T>>,
) -> Option<Point2<T>> {
    let pts: Vec<Point2<T>> = ranges.keys().filter_map(|k| anchors.get(k).copied()).collect();
    if pts.is_empty() {
        return None;
    }
    let n = count::<T>(pts.len());
    Some(Point2::new(
        pts.iter().map(|p| p.x).sum::<T>() / n,
        pts.iter().map(|p| p.y).sum::<T>() / n,
    ))
}

/// Minimizes `sum_j (|x - a_j| - d_j)^2` by damped Gauss-Newton.
/// `initial` defaults to the centroid of the ranging anchors.
pub fn nlst_locate<T: Real>(
    ranges: &BTreeMap<String, T>,
    anchors: &BTreeMap<String, Point2<T>>,
    initial: Option<Point2<T>>,
) -> Result<NlstSolution<T>> {
    let pairs = pairs_for(ranges, anchors)?;
    let mut x = match initial {
        Some(p) => p,
        None => anchor_centroid(ranges, anchors).expect("anchors present"),
    };
    let mut cost = range_cost(x, &pairs);
    let mut lambda = lit::<T>(LAMBDA_INIT);
    let tol = lit::<T>(STEP_TOLERANCE);
    let tiny = lit::<T>(1e-12);

    for it in 1..=MAX_ITERATIONS {
        // normal equations J^T J and J^T r
        let (mut a11, mut a12, mut a22, mut g1, mut g2) =
            (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for (a, d) in &pairs {
            let dx = x.x - a.x;
            let dy = x.y - a.y;
            let dist = (dx * dx + dy * dy).sqrt();
            let (jx, jy) = if dist > tiny {
                (dx / dist, dy / dist)
            } else {
                (T::zero(), T::zero())
            };
            let r = dist - *d;
            a11 += jx * jx;
            a12 += jx * jy;
            a22 += jy * jy;
            g1 += jx * r;
            g2 += jy * r;
        }
        loop {
            let m11 = a11 + lambda * (a11 + tiny);
            let m22 = a22 + lambda * (a22 + tiny);
            let det = m11 * m22 - a12 * a12;
            if !(det.abs() > T::zero()) {
                lambda *= lit(10.0);
                if lambda > lit(1e12) {
                    return Ok(NlstSolution { position: x, cost, iterations: it, converged: false });
                }
                continue;
            }
            let sx = -(m22 * g1 - a12 * g2) / det;
            let sy = -(m11 * g2 - a12 * g1) / det;
            let step = (sx * sx + sy * sy).sqrt();
            let cand = x.translate(sx, sy);
            let cand_cost = range_cost(cand, &pairs);
            if cand_cost <= cost {
                x = cand;
                cost = cand_cost;
                lambda = (lambda / lit(10.0)).max(lit(1e-12));
                if step < tol {
                    return Ok(NlstSolution { position: x, cost, iterations: it, converged: true });
                }
                break;
            }
            if step < tol {
                return Ok(NlstSolution { position: x, cost, iterations: it, converged: true });
            }
            lambda *= lit(10.0);
            if lambda > lit(1e12) {
                return Ok(NlstSolution { position: x, cost, iterations: it, converged: true });
            }
        }
    }
    Ok(NlstSolution {
        position: x,
        cost,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// Fingerprints labelled with survey-point coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordFingerprintDatabase<T> {
    pub ap_list: Vec<String>,
    pub points: Vec<Point2<T>>,
    pub features: Vec<Vec<T>>,
    pub missing_fill: T,
}

impl<T: Real> CoordFingerprintDatabase<T> {
    pub fn new(ap_list: Vec<String>, missing_fill: T) -> Self {
        Self {
            ap_list,
            points: Vec::new(),
            features: Vec::new(),
            missing_fill,
        }
    }

    pub fn width(&self) -> usize {
        self.ap_list.len() + 2
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, point: Point2<T>, features: Vec<T>) -> Result<()> {
        if features.len() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                got: features.len(),
            });
        }
        self.points.push(point);
        self.features.push(features);
        Ok(())
    }

    pub fn push_frame(&mut self, point: Point2<T>, frame: &ObservationFrame<T>) {
        let f = frame_to_features(frame, &self.ap_list, self.missing_fill);
        self.points.push(point);
        self.features.push(f);
    }

    /// Checks every survey point against `[0, w] x [0, h]`.
    pub fn check_bounds(&self, bounds: [T; 2]) -> Result<()> {
        for p in &self.points {
            if p.x < T::zero() || p.y < T::zero() || p.x > bounds[0] || p.y > bounds[1] {
                return Err(Error::InvalidParameter(format!(
                    "survey point ({}, {}) outside the floor-plan bounds",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let mut header = vec!["x".to_string(), "y".to_string()];
        header.extend(self.ap_list.iter().cloned());
        header.push("mf_v".into());
        header.push("mf_h".into());
        out.write_record(&header)?;
        let k = self.ap_list.len();
        for (p, f) in self.points.iter().zip(&self.features) {
            let mut row = vec![p.x.to_string(), p.y.to_string()];
            for (i, v) in f.iter().enumerate() {
                if i < k && *v == self.missing_fill {
                    row.push(String::new());
                } else {
                    row.push(v.to_string());
                }
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, missing_fill: T) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let n = header.len();
        if n < 4 || header[0] != "x" || header[1] != "y" || header[n - 2] != "mf_v" || header[n - 1] != "mf_h" {
            return Err(Error::Parse {
                line: 1,
                message: "expected header x,y,<aps>,mf_v,mf_h".into(),
            });
        }
        let mut db = Self::new(header[2..n - 2].to_vec(), missing_fill);
        let k = db.ap_list.len();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            if rec.len() != n {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {n} fields, got {}", rec.len()),
                });
            }
            let num = |s: &str, col: &str| -> Result<T> {
                s.trim().parse::<T>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad value `{s}` in column {col}"),
                })
            };
            let p = Point2::new(num(&rec[0], "x")?, num(&rec[1], "y")?);
            let mut f = Vec::with_capacity(k + 2);
            for c in 2..n {
                let cell = &rec[c];
                if c - 2 < k && cell.trim().is_empty() {
                    f.push(missing_fill);
                } else {
                    f.push(num(cell, &header[c])?);
                }
            }
            db.push(p, f)?;
        }
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>, missing_fill: T) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, missing_fill)
    }
}

/// Unweighted mean of the `k` nearest survey points' coordinates.
pub fn knn_locate<T: Real>(
    db: &CoordFingerprintDatabase<T>,
    features: &[T],
    k: usize,
) -> Result<Point2<T>> {
    if k == 0 || k > db.len() {
        return Err(Error::KOutOfRange { k, n: db.len() });
    }
    if features.len() != db.width() {
        return Err(Error::WidthMismatch {
            expected: db.width(),
            got: features.len(),
        });
    }
    let idx = nearest_neighbors(&db.features, features, k)?;
    let n = count::<T>(idx.len());
    let (sx, sy) = idx.iter().fold((T::zero(), T::zero()), |(x, y), &i| {
        (x + db.points[i].x, y + db.points[i].y)
    });
    Ok(Point2::new(sx / n, sy / n))
}
