//! Projective transforms: normalized DLT, RANSAC, point projection.

use crate::error::{Error, Result};
use crate::geometry::Point;
use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A 3x3 projective transform, normalized so `h33 = 1` (or to unit
/// Frobenius norm when `h33` is ~0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    pub m: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Normalizes and wraps a raw matrix.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Homography {
        let mat = Matrix3::from_fn(|r, c| m[r][c]);
        Self::from_na(&mat)
    }

    pub(crate) fn from_na(mat: &Matrix3<f64>) -> Homography {
        let frob = mat.norm();
        let scale = if mat[(2, 2)].abs() > 1e-12 * frob.max(1e-300) {
            mat[(2, 2)]
        } else {
            frob
        };
        let n = mat / scale;
        Homography {
            m: [
                [n[(0, 0)], n[(0, 1)], n[(0, 2)]],
                [n[(1, 0)], n[(1, 1)], n[(1, 2)]],
                [n[(2, 0)], n[(2, 1)], n[(2, 2)]],
            ],
        }
    }

    pub fn to_na(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.m[r][c])
    }

    pub fn determinant(&self) -> f64 {
        self.to_na().determinant()
    }

    pub fn inverse(&self) -> Option<Homography> {
        self.to_na().try_inverse().map(|inv| Self::from_na(&inv))
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Homography {
        Self::from_na(&(self.to_na() * first.to_na()))
    }

    pub fn translation(tx: f64, ty: f64) -> Homography {
        Homography {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    pub fn project(&self, p: Point) -> Result<Point> {
        let m = &self.m;
        let x = m[0][0] * p.x + m[0][1] * p.y + m[0][2];
        let y = m[1][0] * p.x + m[1][1] * p.y + m[1][2];
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if w.abs() < 1e-12 {
            return Err(Error::PointAtInfinity);
        }
        Ok(Point::new(x / w, y / w))
    }

    /// Projection that returns `None` instead of an error.
    pub(crate) fn try_project(&self, p: Point) -> Option<Point> {
        self.project(p).ok()
    }
}

/// Projects each point through `h`; fails on the first point at infinity.
pub fn project_points(h: &Homography, pts: &[Point]) -> Result<Vec<Point>> {
    pts.iter().map(|&p| h.project(p)).collect()
}

/// Similarity that moves the centroid to the origin and scales the mean
/// distance from it to sqrt(2).
fn normalizing_transform(pts: &[Point]) -> Option<Matrix3<f64>> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if mean_dist < 1e-12 {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn apply(t: &Matrix3<f64>, p: Point) -> Point {
    let v = t * Vector3::new(p.x, p.y, 1.0);
    Point::new(v[0] / v[2], v[1] / v[2])
}

/// Normalized direct linear transform over all given pairs `(src, dst)`.
pub fn dlt(pairs: &[(Point, Point)]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::InsufficientCorrespondences { found: pairs.len() });
    }
    let src: Vec<Point> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point> = pairs.iter().map(|p| p.1).collect();
    let degenerate = || Error::InvalidParameter("degenerate point configuration".into());
    let ts = normalizing_transform(&src).ok_or_else(degenerate)?;
    let td = normalizing_transform(&dst).ok_or_else(degenerate)?;

    // At least 9 rows so the SVD exposes the null-space vector.
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let s = apply(&ts, *s);
        let d = apply(&td, *d);
        let r = 2 * i;
        a[(r, 0)] = -s.x;
        a[(r, 1)] = -s.y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = d.x * s.x;
        a[(r, 7)] = d.x * s.y;
        a[(r, 8)] = d.x;
        a[(r + 1, 3)] = -s.x;
        a[(r + 1, 4)] = -s.y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = d.y * s.x;
        a[(r + 1, 7)] = d.y * s.y;
        a[(r + 1, 8)] = d.y;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(degenerate)?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(degenerate)?;
    let h = v_t.row(min_idx);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or_else(degenerate)?;
    let full = td_inv * hn * ts;
    let out = Homography::from_na(&full);
    if !out.m.iter().flatten().all(|v| v.is_finite()) || out.determinant().abs() < 1e-12 {
        return Err(degenerate());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    /// Upper bound on sampling rounds.
    pub iters: usize,
    /// Max transfer error in pixels, in both directions, for an inlier.
    pub inlier_px: f64,
    pub min_inliers: usize,
    pub seed: u64,
    /// Stop early once this confidence of an all-inlier sample is reached.
    pub confidence: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iters: 2000,
            inlier_px: 3.0,
            min_inliers: 8,
            seed: 42,
            confidence: 0.9999,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HomographyEstimate {
    pub homography: Homography,
    pub inliers: Vec<bool>,
}

impl HomographyEstimate {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Forward and backward transfer errors of one correspondence.
fn transfer_errors(h: &Homography, h_inv: &Homography, src: Point, dst: Point) -> Option<(f64, f64)> {
    let fwd = h.try_project(src)?.dist(&dst);
    let bwd = h_inv.try_project(dst)?.dist(&src);
    Some((fwd, bwd))
}

fn score(h: &Homography, pairs: &[(Point, Point)], thresh: f64) -> Option<(Vec<bool>, f64)> {
    let inv = h.inverse()?;
    let mut mask = Vec::with_capacity(pairs.len());
    let mut err = 0.0;
    for &(s, d) in pairs {
        match transfer_errors(h, &inv, s, d) {
            Some((f, b)) if f <= thresh && b <= thresh => {
                mask.push(true);
                err += f * f + b * b;
            }
            _ => mask.push(false),
        }
    }
    Some((mask, err))
}

fn collinear(a: Point, b: Point, c: Point) -> bool {
    let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    let scale = a.dist(&b).max(a.dist(&c)).max(b.dist(&c)).max(1e-12);
    cross.abs() < 1e-6 * scale * scale
}

fn degenerate_sample(pts: &[Point; 4]) -> bool {
    for i in 0..4 {
        for j in i + 1..4 {
            for k in j + 1..4 {
                if collinear(pts[i], pts[j], pts[k]) {
                    return true;
                }
            }
        }
    }
    false
}

/// RANSAC over 4-point DLT samples, followed by refits on the inlier set.
/// Inliers must reproject within `inlier_px` in both directions.
pub fn estimate_homography(pairs: &[(Point, Point)], params: &RansacParams) -> Result<HomographyEstimate> {
    let n = pairs.len();
    if n < 4 {
        return Err(Error::InsufficientCorrespondences { found: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, f64, Homography, Vec<bool>)> = None;
    let mut required = params.iters;
    let mut round = 0;
    let mut attempts = 0;
    while round < required && attempts < params.iters.saturating_mul(10).max(100) {
        attempts += 1;
        let mut idx = [0usize; 4];
        let mut k = 0;
        while k < 4 {
            let c = rng.random_range(0..n);
            if !idx[..k].contains(&c) {
                idx[k] = c;
                k += 1;
            }
        }
        let src = idx.map(|i| pairs[i].0);
        let dst = idx.map(|i| pairs[i].1);
        if degenerate_sample(&src) || degenerate_sample(&dst) {
            continue;
        }
        round += 1;
        let sample: Vec<(Point, Point)> = idx.iter().map(|&i| pairs[i]).collect();
        let Ok(h) = dlt(&sample) else { continue };
        let Some((mask, err)) = score(&h, pairs, params.inlier_px) else {
            continue;
        };
        let count = mask.iter().filter(|&&b| b).count();
        let better = match &best {
            None => true,
            Some((bc, be, _, _)) => count > *bc || (count == *bc && err < *be),
        };
        if better {
            best = Some((count, err, h, mask));
            let w = count as f64 / n as f64;
            let p_good = w.powi(4);
            if p_good >= 1.0 {
                required = round;
            } else if p_good > 0.0 {
                let needed = ((1.0 - params.confidence).ln() / (1.0 - p_good).ln()).ceil();
                if needed.is_finite() {
                    required = required.min(needed.max(1.0) as usize);
                }
            }
        }
    }
    let Some((mut count, _, mut h, mut mask)) = best else {
        return Err(Error::RegistrationFailed {
            inliers: 0,
            required: params.min_inliers,
        });
    };
    // Refit on the consensus set until it stops changing.
    for _ in 0..5 {
        if count < 4 {
            break;
        }
        let inlier_pairs: Vec<(Point, Point)> = pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
        let Ok(refit) = dlt(&inlier_pairs) else { break };
        let Some((new_mask, _)) = score(&refit, pairs, params.inlier_px) else {
            break;
        };
        let new_count = new_mask.iter().filter(|&&b| b).count();
        if new_count < count {
            break;
        }
        let stable = new_mask == mask;
        h = refit;
        mask = new_mask;
        count = new_count;
        if stable {
            break;
        }
    }
    if count < params.min_inliers {
        return Err(Error::RegistrationFailed {
            inliers: count,
            required: params.min_inliers,
        });
    }
    Ok(HomographyEstimate {
        homography: h,
        inliers: mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Homography, b: &Homography, tol: f64) -> bool {
        a.m.iter().flatten().zip(b.m.iter().flatten()).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn identity_from_unit_square() {
        let sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let pairs: Vec<_> = sq.iter().map(|&(x, y)| (Point::new(x, y), Point::new(x, y))).collect();
        let params = RansacParams { min_inliers: 4, ..Default::default() };
        let est = estimate_homography(&pairs, &params).unwrap();
        assert!(close(&est.homography, &Homography::IDENTITY, 1e-9));
    }

    #[test]
    fn pure_translation() {
        let pairs: Vec<_> = (0..8)
            .map(|i| {
                let p = Point::new((i * 13 % 7) as f64 * 10.0, (i * 5 % 8) as f64 * 7.0 + i as f64);
                (p, Point::new(p.x + 10.0, p.y + 5.0))
            })
            .collect();
        let est = estimate_homography(&pairs, &RansacParams::default()).unwrap();
        assert!(close(&est.homography, &Homography::translation(10.0, 5.0), 1e-9), "{:?}", est.homography);
    }

    #[test]
    fn too_few_correspondences() {
        let pairs = vec![(Point::new(0.0, 0.0), Point::new(0.0, 0.0)); 3];
        assert!(matches!(
            estimate_homography(&pairs, &RansacParams::default()),
            Err(Error::InsufficientCorrespondences { found: 3 })
        ));
    }

    #[test]
    fn too_few_inliers() {
        let sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.2)];
        let pairs: Vec<_> = sq.iter().map(|&(x, y)| (Point::new(x, y), Point::new(x, y))).collect();
        assert!(matches!(
            estimate_homography(&pairs, &RansacParams::default()),
            Err(Error::RegistrationFailed { inliers: 5, required: 8 })
        ));
    }

    #[test]
    fn projection_cases() {
        let p = Point::new(3.0, 4.0);
        assert_eq!(Homography::IDENTITY.project(p).unwrap(), p);
        let scale = Homography::from_matrix([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(scale.project(p).unwrap(), Point::new(6.0, 8.0));
        let at_inf = Homography::from_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, -3.0]]);
        assert!(matches!(at_inf.project(p), Err(Error::PointAtInfinity)));
    }

    #[test]
    fn four_exact_points_reproject_exactly() {
        let h = Homography::from_matrix([[1.1, 0.2, 5.0], [-0.1, 0.9, 3.0], [1e-4, -2e-4, 1.0]]);
        let src = [Point::new(0.0, 0.0), Point::new(100.0, 3.0), Point::new(97.0, 80.0), Point::new(-4.0, 77.0)];
        let pairs: Vec<_> = src.iter().map(|&p| (p, h.project(p).unwrap())).collect();
        let fit = dlt(&pairs).unwrap();
        for (s, d) in &pairs {
            assert!(fit.project(*s).unwrap().dist(d) < 1e-9);
        }
    }
}
