//! Ordinary least squares via Householder QR.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::AnalysisError;

/// Relative residual norm below which a column counts as a linear
/// combination of the columns before it.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeKind {
    Classical,
    /// CR1 cluster-robust, clustered by book.
    Clustered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    /// Regressors excluding the intercept.
    pub p: usize,
    pub df_resid: usize,
    pub residual_std_error: f64,
    pub ssr: f64,
    pub se_kind: SeKind,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (self.coefficients[i], self.std_errors[i]))
    }
}

pub fn adjusted_r2(r2: f64, n: usize, p: usize) -> f64 {
    1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0)
}

/// Significance marks: `***` p < 0.01, `**` p < 0.05, `*` p < 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Indices of columns that lie (numerically) in the span of earlier columns.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            bad.push(j);
            continue;
        }
        let mut v = col;
        // Two Gram-Schmidt passes keep the residual accurate.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let r = v.norm();
        if r <= RANK_TOLERANCE * norm {
            bad.push(j);
        } else {
            basis.push(v / r);
        }
    }
    bad
}

/// Fit `y = X b`. The first column of `x` must be the intercept; `names`
/// labels every column. `clusters`, if given, switches to CR1 standard errors.
pub fn ols(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: &[String],
    clusters: Option<&[usize]>,
) -> Result<FitResult, AnalysisError> {
    let (n, k) = x.shape();
    assert_eq!(names.len(), k, "one name per column");
    assert_eq!(y.len(), n, "one outcome per row");
    if k == 0 || n <= k {
        return Err(AnalysisError::Infeasible { n, k });
    }
    let bad = collinear_columns(x);
    if !bad.is_empty() {
        return Err(AnalysisError::RankDeficient(bad.into_iter().map(|j| names[j].clone()).collect()));
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| AnalysisError::RankDeficient(vec!["<triangular solve>".into()]))?;
    let resid = y - x * &beta;
    let ssr = resid.norm_squared();
    let ybar = y.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
    let p = k - 1;
    let df_resid = n - k;
    let sigma2 = ssr / df_resid as f64;

    let rinv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| AnalysisError::RankDeficient(vec!["<R inverse>".into()]))?;
    let xtx_inv = &rinv * rinv.transpose();

    let (cov, df_t, se_kind) = match clusters {
        None => (xtx_inv.clone() * sigma2, df_resid as f64, SeKind::Classical),
        Some(cl) => {
            assert_eq!(cl.len(), n, "one cluster id per row");
            let g = cl.iter().copied().max().map_or(0, |m| m + 1);
            let mut scores = DMatrix::<f64>::zeros(g, k);
            for i in 0..n {
                let mut row = scores.row_mut(cl[i]);
                row += x.row(i) * resid[i];
            }
            let used = {
                let mut seen = vec![false; g];
                cl.iter().for_each(|&c| seen[c] = true);
                seen.into_iter().filter(|s| *s).count()
            };
            if used < 2 {
                return Err(AnalysisError::Infeasible { n: used, k: 1 });
            }
            let meat = scores.transpose() * &scores;
            let gf = used as f64;
            let adj = gf / (gf - 1.0) * (n as f64 - 1.0) / df_resid as f64;
            (&xtx_inv * meat * &xtx_inv * adj, gf - 1.0, SeKind::Clustered)
        }
    };

    let se: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let pv: Vec<f64> = t.iter().map(|t| two_sided_p(*t, df_t)).collect();
    Ok(FitResult {
        names: names.to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors: se,
        t_values: t,
        p_values: pv,
        r2,
        adj_r2: adjusted_r2(r2, n, p),
        n,
        p,
        df_resid,
        residual_std_error: sigma2.sqrt(),
        ssr,
        se_kind,
    })
}

/// Fixed-effects fit by within-group demeaning. `x` holds the non-dummy
/// regressors only (no intercept). Returns the slope coefficients and the
/// residual sum of squares, which equal those of the dummy-coded fit.
pub fn within_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    groups: &[usize],
) -> Result<(Vec<f64>, f64), AnalysisError> {
    let (n, k) = x.shape();
    let g = groups.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; g];
    let mut xs = DMatrix::<f64>::zeros(g, k);
    let mut ys = vec![0.0; g];
    for i in 0..n {
        counts[groups[i]] += 1;
        ys[groups[i]] += y[i];
        let mut row = xs.row_mut(groups[i]);
        row += x.row(i);
    }
    let levels = counts.iter().filter(|c| **c > 0).count();
    if n <= k + levels {
        return Err(AnalysisError::Infeasible { n, k: k + levels });
    }
    let xd = DMatrix::from_fn(n, k, |i, j| x[(i, j)] - xs[(groups[i], j)] / counts[groups[i]] as f64);
    let yd = DVector::from_fn(n, |i, _| y[i] - ys[groups[i]] / counts[groups[i]] as f64);
    let bad = collinear_columns(&xd);
    if !bad.is_empty() {
        return Err(AnalysisError::RankDeficient(bad.into_iter().map(|j| format!("column {j}")).collect()));
    }
    let qr = xd.clone().qr();
    let beta = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &yd))
        .ok_or_else(|| AnalysisError::RankDeficient(vec!["<triangular solve>".into()]))?;
    let ssr = (&yd - &xd * &beta).norm_squared();
    Ok((beta.iter().copied().collect(), ssr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn exact_fit_has_unit_r2() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(10, |i, _| 3.0 - 2.0 * i as f64);
        let f = ols(&x, &y, &names(2), None).unwrap();
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(f.ssr < 1e-20);
        assert!((f.coefficients[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_outcome_has_zero_r2() {
        // x = [-1, 1, -1, 1], y = [1, 1, -1, -1]: orthogonal and both centered.
        let x = DMatrix::from_row_slice(4, 2, &[1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0, 1.0]);
        let y = DVector::from_row_slice(&[1.0, 1.0, -1.0, -1.0]);
        let f = ols(&x, &y, &names(2), None).unwrap();
        assert!(f.r2.abs() < 1e-15);
        assert!(f.adj_r2 <= f.r2);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(40, 4, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-2.0..2.0) });
        let y = DVector::from_fn(40, |i, _| 0.5 + x[(i, 1)] - 0.3 * x[(i, 3)] + rng.gen_range(-0.5..0.5));
        let f = ols(&x, &y, &names(4), None).unwrap();
        let xtx = x.transpose() * &x;
        let oracle = xtx.clone().lu().solve(&(x.transpose() * &y)).unwrap();
        for j in 0..4 {
            assert!((f.coefficients[j] - oracle[j]).abs() < 1e-8);
        }
        let s2 = f.ssr / 36.0;
        let inv = xtx.try_inverse().unwrap();
        for j in 0..4 {
            assert!((f.std_errors[j] - (s2 * inv[(j, j)]).sqrt()).abs() < 1e-10);
        }
        assert_eq!(f.adj_r2, adjusted_r2(f.r2, 40, 3));
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let x = DMatrix::from_fn(8, 4, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            2 => 2.0 * i as f64 + 1.0,
            _ => (i * i) as f64,
        });
        let y = DVector::from_fn(8, |i, _| i as f64);
        match ols(&x, &y, &names(4), None) {
            Err(AnalysisError::RankDeficient(cols)) => assert_eq!(cols, vec!["x2"]),
            other => panic!("{other:?}"),
        }
        let small = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            ols(&small, &DVector::zeros(2), &names(2), None),
            Err(AnalysisError::Infeasible { .. })
        ));
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.04), "**");
        assert_eq!(stars(0.009), "***");
        assert_eq!(stars(0.05), "*");
        assert_eq!(stars(0.099), "*");
        assert_eq!(stars(0.1), "");
    }

    #[test]
    fn p_values_match_reference() {
        // t = 2.0 with 10 df: two-sided p = 0.07338803 (standard tables).
        assert!((two_sided_p(2.0, 10.0) - 0.073_388_03).abs() < 1e-7);
    }

    #[test]
    fn clustered_errors_equal_hc1_with_singleton_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 30;
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.gen_range(0.0..1.0) });
        let y = DVector::from_fn(n, |i, _| x[(i, 1)] * x[(i, 1)] * 3.0 + rng.gen_range(0.0..1.0));
        let ids: Vec<usize> = (0..n).collect();
        let c = ols(&x, &y, &names(2), Some(&ids)).unwrap();
        // HC1 oracle: (X'X)^-1 X' diag(e^2) X (X'X)^-1 * n / (n - k)
        let f = ols(&x, &y, &names(2), None).unwrap();
        let b = DVector::from_vec(f.coefficients.clone());
        let e = &y - &x * &b;
        let inv = (x.transpose() * &x).try_inverse().unwrap();
        let meat = x.transpose() * DMatrix::from_diagonal(&e.map(|v| v * v)) * &x;
        let v = &inv * meat * &inv * (n as f64 / (n as f64 - 2.0));
        for j in 0..2 {
            assert!((c.std_errors[j] - v[(j, j)].sqrt()).abs() < 1e-10);
        }
        assert_eq!(c.se_kind, SeKind::Clustered);
    }
}
