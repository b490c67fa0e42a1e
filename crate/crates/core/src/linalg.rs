//! Symmetric banded storage with an in-place Cholesky factorization.

use std::fmt::Write as _;

use crate::error::GridError;

/// Lower band of a symmetric matrix: `data[i][bw + j - i]` holds `A[i][j]`
/// for `i - bw <= j <= i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw + j - i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to both `A[i][j]` and `A[j][i]` (once on the diagonal).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// `A += w * l l^T` for a sparse vector `l`.
    pub fn add_outer(&mut self, l: &[(usize, f64)], w: f64) {
        for (a, &(i, li)) in l.iter().enumerate() {
            for &(j, lj) in &l[..=a] {
                if i == j {
                    self.add(i, i, w * li * lj);
                } else {
                    self.add(i, j, w * li * lj);
                }
            }
        }
    }

    pub fn add_diag(&mut self, d: &[f64], scale: f64) {
        for (i, &v) in d.iter().enumerate() {
            self.add(i, i, scale * v);
        }
    }

    /// `self * a + other * b`, band widened as needed.
    pub fn combine(&self, a: f64, other: &SymBand, b: f64) -> SymBand {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBand::zeros(self.n, bw);
        for i in 0..self.n {
            for j in i.saturating_sub(bw)..=i {
                let v = a * self.get(i, j) + b * other.get(i, j);
                let k = out.idx(i, j);
                out.data[k] = v;
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw + lo - i;
            let mut acc = row[self.bw] * x[i];
            for (t, j) in (lo..i).enumerate() {
                let a = row[off + t];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let y = self.mul_vec(x);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn cholesky(&self) -> Result<BandCholesky, GridError> {
        let mut l = self.clone();
        let bw = self.bw;
        for j in 0..self.n {
            let lo = j.saturating_sub(bw);
            let mut d = l.data[l.idx(j, j)];
            for k in lo..j {
                let v = l.data[l.idx(j, k)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(GridError::NotPositiveDefinite { row: j, pivot: d });
            }
            let djj = d.sqrt();
            let kk = l.idx(j, j);
            l.data[kk] = djj;
            for i in j + 1..(j + bw + 1).min(self.n) {
                let lo_i = i.saturating_sub(bw).max(lo);
                let mut s = l.data[l.idx(i, j)];
                for k in lo_i..j {
                    s -= l.data[l.idx(i, k)] * l.data[l.idx(j, k)];
                }
                let k = l.idx(i, j);
                l.data[k] = s / djj;
            }
        }
        Ok(BandCholesky { l })
    }

    /// Coordinate MatrixMarket text, symmetric lower triangle.
    pub fn to_matrix_market(&self) -> String {
        let mut entries = Vec::new();
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let v = self.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, entries.len());
        for (i, j, v) in entries {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: SymBand,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.data[l.idx(i, k)] * x[k];
            }
            x[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= l.data[l.idx(k, i)] * x[k];
            }
            x[i] = s / l.data[l.idx(i, i)];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
