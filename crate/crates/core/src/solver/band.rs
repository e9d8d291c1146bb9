//! Banded linear algebra for the Newton system.

use crate::error::{Error, Result};

/// Square matrix with `lower` sub- and `upper` super-diagonals. Each row is
/// stored as a contiguous span starting at its own column offset, so row
/// swaps during pivoting are cheap and fill-in just widens the span.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    size: usize,
    lower: usize,
    upper: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

impl BandMatrix {
    pub fn zeros(size: usize, lower: usize, upper: usize) -> Self {
        let rows = (0..size)
            .map(|i| {
                let start = i.saturating_sub(lower);
                let end = (i + upper + 1).min(size);
                (start, vec![0.0; end - start])
            })
            .collect();
        Self {
            size,
            lower,
            upper,
            rows,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (start, ref v) = self.rows[i];
        if j < start {
            return 0.0;
        }
        v.get(j - start).copied().unwrap_or(0.0)
    }

    /// Sets an entry inside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (start, ref mut v) = self.rows[i];
        assert!(j >= start && j - start < v.len(), "entry ({i}, {j}) is outside the band");
        v[j - start] = value;
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.size;
        let mut rows = self.rows.clone();
        let mut rhs = b.to_vec();
        let scale = rows
            .iter()
            .flat_map(|(_, v)| v.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        if scale == 0.0 && n > 0 {
            return Err(Error::numerical("singular Jacobian (all zero)"));
        }
        for k in 0..n {
            let last = (k + self.lower).min(n - 1);
            let entry = |rows: &[(usize, Vec<f64>)], i: usize| {
                let (s, ref v) = rows[i];
                if k < s { 0.0 } else { v.get(k - s).copied().unwrap_or(0.0) }
            };
            let p = (k..=last)
                .max_by(|a, b| entry(&rows, *a).abs().total_cmp(&entry(&rows, *b).abs()))
                .expect("non-empty pivot range");
            let pivot = entry(&rows, p);
            if pivot.abs() <= 1e-14 * scale {
                return Err(Error::numerical(format!("singular Jacobian at unknown {k}")));
            }
            rows.swap(k, p);
            rhs.swap(k, p);
            let (ks, kv) = rows[k].clone();
            // row k now starts at column k or earlier; drop its leading zeros
            let pivot_row: Vec<f64> = kv[k - ks..].to_vec();
            for i in k + 1..=last {
                let f = entry(&rows, i) / pivot;
                if f == 0.0 {
                    continue;
                }
                let (is, iv) = &mut rows[i];
                let needed = k + pivot_row.len();
                if *is + iv.len() < needed {
                    iv.resize(needed - *is, 0.0);
                }
                for (off, pv) in pivot_row.iter().enumerate() {
                    iv[k + off - *is] -= f * pv;
                }
                rhs[i] -= f * rhs[k];
            }
            rows[k] = (k, pivot_row);
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let (_, ref v) = rows[k];
            let mut acc = rhs[k];
            for (off, a) in v.iter().enumerate().skip(1) {
                acc -= a * x[k + off];
            }
            x[k] = acc / v[0];
        }
        Ok(x)
    }

    /// Whether `sign * (A + A^T) / 2` admits a Cholesky factorisation.
    pub fn is_definite(&self, sign: f64) -> bool {
        let n = self.size;
        let b = self.lower.max(self.upper);
        let sym = |i: usize, j: usize| sign * 0.5 * (self.get(i, j) + self.get(j, i));
        // l[i][j - (i - b)] holds L_{ij} for i - b <= j <= i
        let mut l: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut row = vec![0.0; i - lo + 1];
            for j in lo..=i {
                let jlo = j.saturating_sub(b).max(lo);
                let mut s = sym(i, j);
                for k in jlo..j {
                    let ljk = if j == i { row[k - lo] } else { l[j][k - j.saturating_sub(b)] };
                    s -= row[k - lo] * ljk;
                }
                if i == j {
                    if !(s > 0.0) {
                        return false;
                    }
                    row[j - lo] = s.sqrt();
                } else {
                    row[j - lo] = s / l[j][j - j.saturating_sub(b)];
                }
            }
            l.push(row);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, sub: f64, diag: f64, sup: f64) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, diag);
            if i > 0 {
                m.set(i, i - 1, sub);
            }
            if i + 1 < n {
                m.set(i, i + 1, sup);
            }
        }
        m
    }

    fn apply(m: &BandMatrix, x: &[f64]) -> Vec<f64> {
        (0..m.size()).map(|i| (0..m.size()).map(|j| m.get(i, j) * x[j]).sum()).collect()
    }

    #[test]
    fn solves_with_pivoting() {
        // zero diagonal forces row swaps
        let m = tridiag(6, 1.0, 0.0, 2.0);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let b = apply(&m, &x);
        let got = m.solve(&b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn wider_band() {
        let n = 12;
        let mut m = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                m.set(i, j, ((i * 7 + j * 3) % 5) as f64 - 1.5 + if i == j { 0.1 } else { 0.0 });
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let got = m.solve(&apply(&m, &x)).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-9, "{got:?}");
        }
    }

    #[test]
    fn singular_and_definiteness() {
        assert!(tridiag(4, 0.0, 0.0, 0.0).solve(&[1.0; 4]).is_err());
        assert!(tridiag(2, 1.0, 1.0, 1.0).solve(&[1.0; 2]).is_err());
        let spd = tridiag(6, -1.0, 2.0, -1.0);
        assert!(spd.is_definite(1.0) && !spd.is_definite(-1.0));
        let nd = tridiag(6, 1.0, -2.0, 1.0);
        assert!(nd.is_definite(-1.0));
        let indef = tridiag(6, 3.0, 1.0, 3.0);
        assert!(!indef.is_definite(1.0) && !indef.is_definite(-1.0));
    }
}
