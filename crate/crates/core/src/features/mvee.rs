//! Minimum-volume enclosing ellipsoid by Khachiyan's barycentric coordinate
//! ascent with Todd-Yildirim away steps. The ellipsoid is
//! `{x : (x - c)^T A (x - c) <= 1}`.

use nalgebra::{DMatrix, DVector};

use super::FeatureError;

#[derive(Debug, Clone, PartialEq)]
pub struct Mvee {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub volume: f64,
    pub iterations: usize,
    /// All points coincide; the ellipsoid collapses to the point.
    pub degenerate: bool,
}

impl Mvee {
    pub fn mahalanobis(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.center;
        (d.transpose() * &self.shape * &d)[(0, 0)]
    }
}

pub const MAX_ITERATIONS: usize = 200_000;

/// Volume of the unit ball in `r` dimensions.
pub fn unit_ball_volume(r: usize) -> f64 {
    let h = r as f64 / 2.0;
    std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h + 1.0)
}

/// `points` are rows of equal length `d`; at least `d + 1` affinely
/// independent points are needed unless all points coincide.
pub fn mvee(points: &[Vec<f64>], tolerance: f64) -> Result<Mvee, FeatureError> {
    let n = points.len();
    let Some(d) = points.first().map(Vec::len) else {
        return Err(FeatureError::Degenerate("no points".into()));
    };
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(FeatureError::Degenerate("points must share a positive dimension".into()));
    }
    if !(tolerance > 0.0) {
        return Err(FeatureError::Degenerate("tolerance must be positive".into()));
    }
    if points.iter().all(|p| p == &points[0]) {
        return Ok(Mvee {
            center: DVector::from_column_slice(&points[0]),
            shape: DMatrix::zeros(d, d),
            volume: 0.0,
            iterations: 0,
            degenerate: true,
        });
    }
    if n < d + 1 {
        return Err(FeatureError::Degenerate(format!("{n} points cannot span {d} dimensions")));
    }

    let p = DMatrix::from_fn(d, n, |i, j| points[j][i]);
    let mut q = DMatrix::from_element(d + 1, n, 1.0);
    q.view_mut((0, 0), (d, n)).copy_from(&p);

    let dim1 = (d + 1) as f64;
    let mut u = DVector::from_element(n, 1.0 / n as f64);
    let mut iterations = 0;
    loop {
        let mut x = DMatrix::zeros(d + 1, d + 1);
        for j in 0..n {
            let c = q.column(j);
            x.ger(u[j], &c, &c, 1.0);
        }
        let xi = x
            .cholesky()
            .ok_or_else(|| FeatureError::Degenerate("points are not affinely independent".into()))?
            .inverse();
        let m: Vec<f64> = (0..n)
            .map(|j| {
                let c = q.column(j);
                (c.transpose() * &xi * c)[(0, 0)]
            })
            .collect();
        let (jmax, &mmax) = m
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("n > 0");
        if mmax <= (1.0 + tolerance) * dim1 || iterations >= MAX_ITERATIONS {
            break;
        }
        // Away step (Todd-Yildirim): shift weight off the supported point
        // that lies deepest inside when that gap exceeds the forward gap.
        let (kmin, &mmin) = m
            .iter()
            .enumerate()
            .filter(|(k, _)| u[*k] > 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("weights sum to one");
        let (j, step) = if 1.0 - mmin / dim1 > mmax / dim1 - 1.0 && u[kmin] < 1.0 {
            let step = (mmin - dim1) / (dim1 * (mmin - 1.0));
            (kmin, step.max(-u[kmin] / (1.0 - u[kmin])))
        } else {
            (jmax, (mmax - dim1) / (dim1 * (mmax - 1.0)))
        };
        u *= 1.0 - step;
        u[j] += step;
        if u[j] < 0.0 {
            u[j] = 0.0;
        }
        iterations += 1;
    }

    let center = &p * &u;
    let cov = &p * DMatrix::from_diagonal(&u) * p.transpose() - &center * center.transpose();
    let mut shape = cov
        .try_inverse()
        .ok_or_else(|| FeatureError::Degenerate("enclosing ellipsoid is flat".into()))?
        / d as f64;
    // Scale so the farthest point sits exactly on the boundary.
    let far = (0..n)
        .map(|j| {
            let v = p.column(j) - &center;
            (v.transpose() * &shape * &v)[(0, 0)]
        })
        .fold(0.0_f64, f64::max);
    shape /= far;
    let det = shape.determinant();
    if !(det > 0.0) {
        return Err(FeatureError::Degenerate("ellipsoid shape is not positive definite".into()));
    }
    Ok(Mvee {
        center,
        shape,
        volume: unit_ball_volume(d) / det.sqrt(),
        iterations,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn unit_circle_from_four_points() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let e = mvee(&pts, 1e-4).unwrap();
        assert!((e.volume - std::f64::consts::PI).abs() < 0.01 * std::f64::consts::PI);
        for p in &pts {
            assert!(e.mahalanobis(p) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn interval_in_one_dimension() {
        let e = mvee(&[vec![-1.0], vec![3.0], vec![0.5]], 1e-6).unwrap();
        assert!((e.volume - 4.0).abs() < 1e-3);
        assert!((e.center[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let e = mvee(&vec![vec![2.0, 2.0]; 5], 1e-4).unwrap();
        assert_eq!(e.volume, 0.0);
        assert!(e.degenerate);
    }

    #[test]
    fn collinear_points_in_plane_are_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(mvee(&pts, 1e-4), Err(FeatureError::Degenerate(_))));
    }
}
