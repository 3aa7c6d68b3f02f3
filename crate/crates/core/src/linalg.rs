//! Small dense least-squares kernels.
//!
//! Regressions in this crate have a handful of columns and a few hundred
//! rows, so everything is expressed as Gram–Schmidt on column vectors with
//! one reorthogonalization pass. Columns that are numerically dependent on
//! the basis are dropped instead of failing the fit.

/// Columns whose residual norm falls below this fraction of their original
/// norm are treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-8;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

/// Orthonormal basis grown one column at a time, keeping the triangular
/// factor so coefficients can be recovered.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    n: usize,
    q: Vec<Vec<f64>>,
    // r[k] holds the projections of kept column k onto q[0..=k].
    r: Vec<Vec<f64>>,
}

impl OrthoBasis {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    /// Basis spanning the intercept column.
    pub fn with_intercept(n: usize) -> Self {
        let mut basis = Self::new(n);
        basis.push(&vec![1.0; n]);
        basis
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    /// Orthogonalize `v` in place against the basis, returning projection
    /// coefficients.
    fn orthogonalize(&self, v: &mut [f64]) -> Vec<f64> {
        let mut coef = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let c = dot(qk, v);
                coef[k] += c;
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= c * qi;
                }
            }
        }
        coef
    }

    /// Append `col` if it is not in the current span. Returns whether it was kept.
    pub fn push(&mut self, col: &[f64]) -> bool {
        assert_eq!(col.len(), self.n, "column length mismatch");
        let original = norm(col);
        if original == 0.0 || !original.is_finite() {
            return false;
        }
        let mut v = col.to_vec();
        let mut coef = self.orthogonalize(&mut v);
        let rest = norm(&v);
        if rest <= RANK_TOLERANCE * original {
            return false;
        }
        for x in v.iter_mut() {
            *x /= rest;
        }
        coef.push(rest);
        self.q.push(v);
        self.r.push(coef);
        true
    }

    /// Residual of `y` after projecting onto the basis.
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut v = y.to_vec();
        self.orthogonalize(&mut v);
        v
    }

    /// Residual sum of squares of `y` regressed on the basis.
    pub fn rss(&self, y: &[f64]) -> f64 {
        let r = self.residual(y);
        dot(&r, &r)
    }

    /// RSS after adding `extra` columns to the basis, leaving the basis
    /// untouched. `y_resid` must already be orthogonal to the basis (see
    /// [`OrthoBasis::residual`]). Also returns how many extra columns were
    /// linearly independent.
    pub fn rss_with(&self, extra: &[&[f64]], y_resid: &[f64]) -> (f64, usize) {
        let mut local: Vec<Vec<f64>> = Vec::with_capacity(extra.len());
        for col in extra {
            let original = norm(col);
            if original == 0.0 || !original.is_finite() {
                continue;
            }
            let mut v = self.residual(col);
            for _ in 0..2 {
                for q in &local {
                    let c = dot(q, &v);
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
            let rest = norm(&v);
            if rest <= RANK_TOLERANCE * original {
                continue;
            }
            for x in v.iter_mut() {
                *x /= rest;
            }
            local.push(v);
        }
        let mut r = y_resid.to_vec();
        for q in &local {
            let c = dot(q, &r);
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
        (dot(&r, &r), local.len())
    }

    /// Least-squares coefficients of `y` on the kept columns, in push order.
    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let k = self.q.len();
        let z: Vec<f64> = self.q.iter().map(|q| dot(q, y)).collect();
        let mut b = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = z[i];
            for j in i + 1..k {
                s -= self.r[j][i] * b[j];
            }
            b[i] = s / self.r[i][i];
        }
        b
    }
}

/// Result of an ordinary least-squares fit with automatic column dropping.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// One entry per requested column; `None` when the column was dropped.
    pub coefficients: Vec<Option<f64>>,
    pub rss: f64,
    pub rank: usize,
    pub n: usize,
}

impl OlsFit {
    pub fn dropped(&self) -> usize {
        self.coefficients.iter().filter(|c| c.is_none()).count()
    }
}

/// Fit `y ~ columns` (no implicit intercept).
pub fn ols(columns: &[&[f64]], y: &[f64]) -> OlsFit {
    let n = y.len();
    let mut basis = OrthoBasis::new(n);
    let kept: Vec<bool> = columns.iter().map(|c| basis.push(c)).collect();
    let coefs = basis.coefficients(y);
    let mut it = coefs.into_iter();
    let coefficients = kept
        .iter()
        .map(|&k| if k { it.next() } else { None })
        .collect();
    OlsFit {
        coefficients,
        rss: basis.rss(y),
        rank: basis.rank(),
        n,
    }
}
