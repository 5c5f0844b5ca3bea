//! Square loading matrices `F` with `X = F y`, applied without materializing
//! `F` where the structure allows it.

use covshift::{Error, Result};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Identity,
    /// The symmetric Toeplitz matrix `r^{|i-j|}` itself.
    Toeplitz { r: f64 },
    /// Lower Cholesky factor of `rho^{|i-j|}`.
    Ar1Cholesky { rho: f64 },
    /// Dense lower triangular, row-major `p x p`.
    Lower { p: usize, l: Vec<f64> },
    /// Dense row-major `p x p`.
    Dense { p: usize, m: Vec<f64> },
    /// Each row holds three entries `(column, value)`.
    SparseRows { rows: Vec<[(usize, f64); 3]> },
}

/// Post-change loading patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeModel {
    /// `QQ^T = rho^{|i-j|}`.
    #[serde(alias = "a")]
    Bandable,
    /// Three random columns per row with entries `+-rho`.
    #[serde(alias = "b")]
    Sparse,
    /// `QQ^T` with unit diagonal and `rho` off the diagonal.
    #[serde(alias = "c")]
    Strong,
}

impl ChangeModel {
    pub fn label(self) -> &'static str {
        match self {
            ChangeModel::Bandable => "a",
            ChangeModel::Sparse => "b",
            ChangeModel::Strong => "c",
        }
    }
}

impl Factor {
    /// `out = F y`.
    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        let p = y.len();
        debug_assert_eq!(out.len(), p);
        match self {
            Factor::Identity => out.copy_from_slice(y),
            Factor::Toeplitz { r } => {
                // forward and backward AR(1) filters share the diagonal
                let mut f = 0.0;
                for i in 0..p {
                    f = y[i] + r * f;
                    out[i] = f;
                }
                let mut b = 0.0;
                for i in (0..p).rev() {
                    b = y[i] + r * b;
                    out[i] += b - y[i];
                }
            }
            Factor::Ar1Cholesky { rho } => {
                let s = (1.0 - rho * rho).sqrt();
                let mut prev = 0.0;
                for i in 0..p {
                    prev = if i == 0 { y[0] } else { rho * prev + s * y[i] };
                    out[i] = prev;
                }
            }
            Factor::Lower { l, .. } => {
                for i in 0..p {
                    let row = &l[i * p..i * p + i + 1];
                    out[i] = row.iter().zip(&y[..=i]).map(|(a, b)| a * b).sum();
                }
            }
            Factor::Dense { m, .. } => {
                for (o, row) in out.iter_mut().zip(m.chunks_exact(p)) {
                    *o = row.iter().zip(y).map(|(a, b)| a * b).sum();
                }
            }
            Factor::SparseRows { rows } => {
                for (o, row) in out.iter_mut().zip(rows) {
                    *o = row.iter().map(|&(c, v)| v * y[c]).sum();
                }
            }
        }
    }

    /// Dense `F F^T`, row-major.
    pub fn covariance(&self, p: usize) -> Vec<f64> {
        let mut s = vec![0.0; p * p];
        match self {
            Factor::Identity => {
                for i in 0..p {
                    s[i * p + i] = 1.0;
                }
            }
            Factor::Ar1Cholesky { rho } => {
                for i in 0..p {
                    for j in 0..p {
                        s[i * p + j] = rho.powi(i.abs_diff(j) as i32);
                    }
                }
            }
            Factor::Toeplitz { .. } => {
                // F is symmetric, so F F^T = F^2; column j is F (F e_j)
                let mut e = vec![0.0; p];
                let mut col = vec![0.0; p];
                let mut col2 = vec![0.0; p];
                for j in 0..p {
                    e[j] = 1.0;
                    self.apply(&e, &mut col);
                    self.apply(&col, &mut col2);
                    e[j] = 0.0;
                    for i in 0..p {
                        s[i * p + j] = col2[i];
                    }
                }
            }
            Factor::Lower { l, .. } => {
                for i in 0..p {
                    for j in 0..=i {
                        let v: f64 = (0..=j).map(|k| l[i * p + k] * l[j * p + k]).sum();
                        s[i * p + j] = v;
                        s[j * p + i] = v;
                    }
                }
            }
            Factor::Dense { m, .. } => {
                for i in 0..p {
                    for j in 0..=i {
                        let v: f64 = (0..p).map(|k| m[i * p + k] * m[j * p + k]).sum();
                        s[i * p + j] = v;
                        s[j * p + i] = v;
                    }
                }
            }
            Factor::SparseRows { rows } => {
                let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
                for (i, row) in rows.iter().enumerate() {
                    for &(c, v) in row {
                        by_col[c].push((i, v));
                    }
                }
                for entries in &by_col {
                    for &(i, a) in entries {
                        for &(j, b) in entries {
                            s[i * p + j] += a * b;
                        }
                    }
                }
            }
        }
        s
    }

    /// Materializes `F` densely, row-major.
    pub fn to_dense(&self, p: usize) -> Vec<f64> {
        let mut m = vec![0.0; p * p];
        let mut e = vec![0.0; p];
        let mut col = vec![0.0; p];
        for j in 0..p {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..p {
                m[i * p + j] = col[i];
            }
        }
        m
    }
}

/// Lower Cholesky factor of a symmetric positive definite row-major matrix.
pub fn cholesky(a: &[f64], p: usize) -> Result<Vec<f64>> {
    if a.len() != p * p {
        return Err(Error::Input(format!("expected {} entries, got {}", p * p, a.len())));
    }
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if !(d > 0.0) {
            return Err(Error::Numerical(format!("matrix not positive definite at pivot {j}")));
        }
        let d = d.sqrt();
        l[j * p + j] = d;
        for i in j + 1..p {
            let mut v = a[i * p + j];
            for k in 0..j {
                v -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = v / d;
        }
    }
    Ok(l)
}

/// The post-change loading `Q` for `model`. Only the sparse model uses `rng`.
pub fn build_q<R: Rng + ?Sized>(model: ChangeModel, p: usize, rho: f64, rng: &mut R) -> Result<Factor> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!("rho {rho} not in (0, 1)")));
    }
    match model {
        ChangeModel::Bandable => Ok(Factor::Ar1Cholesky { rho }),
        ChangeModel::Strong => {
            let mut s = vec![rho; p * p];
            for i in 0..p {
                s[i * p + i] = 1.0;
            }
            let l = cholesky(&s, p)?;
            Ok(Factor::Lower { p, l })
        }
        ChangeModel::Sparse => {
            if p < 3 {
                return Err(Error::Config(format!("sparse model needs p >= 3, got {p}")));
            }
            let rows = (0..p)
                .map(|_| {
                    let cols = index::sample(rng, p, 3);
                    let mut row = [(0, 0.0); 3];
                    for (slot, c) in row.iter_mut().zip(cols.iter()) {
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        *slot = (c, sign * rho);
                    }
                    row
                })
                .collect();
            Ok(Factor::SparseRows { rows })
        }
    }
}

/// `||A||_F^2` of a row-major matrix.
pub fn frobenius_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_mul_t(f: &[f64], p: usize) -> Vec<f64> {
        let mut s = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                s[i * p + j] = (0..p).map(|k| f[i * p + k] * f[j * p + k]).sum();
            }
        }
        s
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn toeplitz_apply_matches_dense() {
        let p = 7;
        let f = Factor::Toeplitz { r: 0.6 };
        let dense = f.to_dense(p);
        for i in 0..p {
            for j in 0..p {
                assert!((dense[i * p + j] - 0.6f64.powi(i.abs_diff(j) as i32)).abs() < 1e-15);
            }
        }
        close(&f.covariance(p), &dense_mul_t(&dense, p), 1e-12);
    }

    #[test]
    fn bandable_factor_reproduces_sigma() {
        let p = 3;
        let q = build_q(ChangeModel::Bandable, p, 0.5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s = dense_mul_t(&q.to_dense(p), p);
        let want = [1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0];
        close(&s, &want, 1e-12);
        close(&q.covariance(p), &want, 1e-12);
    }

    #[test]
    fn bandable_factor_tends_to_identity() {
        let q = Factor::Ar1Cholesky { rho: 1e-9 };
        let d = q.to_dense(4);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d[i * 4 + j] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn strong_factor_reproduces_sigma() {
        let p = 3;
        let q = build_q(ChangeModel::Strong, p, 0.5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s = dense_mul_t(&q.to_dense(p), p);
        let want = [1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0];
        close(&s, &want, 1e-12);
        close(&q.covariance(p), &want, 1e-12);
    }

    #[test]
    fn sparse_rows_have_three_distinct_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = build_q(ChangeModel::Sparse, 50, 0.7, &mut rng).unwrap();
        let Factor::SparseRows { rows } = &q else { panic!() };
        let mut pos = 0;
        for row in rows {
            let mut cols: Vec<usize> = row.iter().map(|e| e.0).collect();
            cols.sort();
            cols.dedup();
            assert_eq!(cols.len(), 3);
            for &(_, v) in row {
                assert!((v.abs() - 0.7).abs() < 1e-15);
                pos += (v > 0.0) as usize;
            }
        }
        assert!((40..110).contains(&pos), "{pos}");
        close(&q.covariance(50), &dense_mul_t(&q.to_dense(50), 50), 1e-12);
    }

    #[test]
    fn dense_factor_matches_its_covariance() {
        let p = 4;
        let m: Vec<f64> = (0..16).map(|k| ((k * 7 % 5) as f64) - 2.0).collect();
        let f = Factor::Dense { p, m: m.clone() };
        close(&f.to_dense(p), &m, 1e-15);
        close(&f.covariance(p), &dense_mul_t(&m, p), 1e-12);
    }

    #[test]
    fn rejects_rho_outside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_q(ChangeModel::Bandable, 3, 1.0, &mut rng).is_err());
        assert!(build_q(ChangeModel::Strong, 3, 0.0, &mut rng).is_err());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(matches!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2), Err(Error::Numerical(_))));
    }

    #[test]
    fn model_labels_parse() {
        let m: ChangeModel = serde_json::from_str("\"a\"").unwrap();
        assert_eq!(m, ChangeModel::Bandable);
        let m: ChangeModel = serde_json::from_str("\"strong\"").unwrap();
        assert_eq!(m.label(), "c");
    }
}
