//! Small dense matrices over a [`Field`], plus numeric helpers on nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cartan::{Field, QNum};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<F> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<F>,
}

impl<F: Field> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { F::one() } else { F::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn diag(d: &[F]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i].clone() } else { F::zero() })
    }

    pub fn get(&self, i: usize, j: usize) -> &F {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "shape mismatch in product");
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        let idx = i * o.cols + j;
                        out.data[idx] = out.data[idx].add_ref(&a.mul_ref(b));
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.add_ref(b)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.sub_ref(b)).collect(),
        }
    }

    pub fn scale(&self, c: &F) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.mul_ref(c)).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    /// Conjugate transpose.
    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn kron(&self, o: &Self) -> Self {
        Self::from_fn(self.rows * o.rows, self.cols * o.cols, |i, j| {
            self.get(i / o.rows, j / o.cols).mul_ref(o.get(i % o.rows, j % o.cols))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Field::is_zero)
    }

    pub fn col(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn apply(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = F::zero();
                for (j, x) in v.iter().enumerate() {
                    let a = self.get(i, j);
                    if !a.is_zero() && !x.is_zero() {
                        acc = acc.add_ref(&a.mul_ref(x));
                    }
                }
                acc
            })
            .collect()
    }

    /// Submatrix with the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    pub fn entries(&self) -> &[F] {
        &self.data
    }

    /// Inverse by Gauss–Jordan elimination.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for c in 0..n {
            let p = best_pivot((c..n).map(|r| (r, a.get(r, c))))?;
            a.swap_rows(c, p);
            inv.swap_rows(c, p);
            let pinv = a.get(c, c).try_inv()?;
            a.scale_row(c, &pinv);
            inv.scale_row(c, &pinv);
            for r in 0..n {
                if r != c && !a.get(r, c).is_zero() {
                    let f = a.get(r, c).clone();
                    a.row_axpy(r, c, &f);
                    inv.row_axpy(r, c, &f);
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn scale_row(&mut self, r: usize, c: &F) {
        for j in 0..self.cols {
            let idx = r * self.cols + j;
            self.data[idx] = self.data[idx].mul_ref(c);
        }
    }

    /// row[r] -= f * row[src]
    fn row_axpy(&mut self, r: usize, src: usize, f: &F) {
        for j in 0..self.cols {
            let s = self.get(src, j);
            if !s.is_zero() {
                let t = f.mul_ref(s);
                let idx = r * self.cols + j;
                self.data[idx] = self.data[idx].sub_ref(&t);
            }
        }
    }
}

fn best_pivot<'a, F: Field>(cands: impl Iterator<Item = (usize, &'a F)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (r, x) in cands {
        if x.is_zero() {
            continue;
        }
        if let Some(w) = x.pivot_weight() {
            if best.map_or(true, |(_, bw)| w > bw) {
                best = Some((r, w));
            }
        }
    }
    best.map(|(r, _)| r)
}

/// Basis of the right kernel of `m`, one vector per free column.
///
/// Numeric pivots are chosen by magnitude with a relative threshold of
/// `1e-12`; exact pivots must be invertible in the ring.
pub fn nullspace<F: Field>(m: &Mat<F>) -> Vec<Vec<F>> {
    let mut a = m.clone();
    let scale = m.entries().iter().filter_map(|x| x.pivot_weight()).fold(0.0f64, f64::max);
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for c in 0..a.cols {
        if row == a.rows {
            break;
        }
        let Some(p) = best_pivot((row..a.rows).map(|r| (r, a.get(r, c)))) else { continue };
        if a.get(p, c).pivot_weight().unwrap_or(0.0) <= 1e-12 * scale {
            continue;
        }
        a.swap_rows(row, p);
        let pinv = a.get(row, c).try_inv().expect("pivot is invertible");
        a.scale_row(row, &pinv);
        for r in 0..a.rows {
            if r != row && !a.get(r, c).is_zero() {
                let f = a.get(r, c).clone();
                a.row_axpy(r, row, &f);
            }
        }
        pivots.push(c);
        row += 1;
    }
    let free: Vec<usize> = (0..a.cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![F::zero(); a.cols];
            v[fc] = F::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = a.get(r, fc).neg_ref();
            }
            v
        })
        .collect()
}

/// Convert a numeric matrix to nalgebra.
pub fn to_dmatrix(m: &Mat<QNum>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows, m.cols, |i, j| m.get(i, j).0)
}

/// Evaluate any matrix numerically at `q`.
pub fn eval_matrix<F: Field>(m: &Mat<F>, q: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows, m.cols, |i, j| m.get(i, j).eval(q))
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Numerical rank: singular values above `tol · max(1, σ_max)`.
pub fn numeric_rank(m: &DMatrix<Complex64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max).max(1.0);
    sv.iter().filter(|&&s| s > tol * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::QExact;

    #[test]
    fn exact_inverse_and_kernel() {
        let m = Mat::from_fn(3, 3, |i, j| QExact::from_i64(((i * 3 + j) % 4) as i64 + i64::from(i == j)));
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), Mat::identity(3));
        let k = Mat::from_fn(2, 3, |i, j| QExact::from_i64((i + j) as i64));
        let ns = nullspace(&k);
        assert_eq!(ns.len(), 1);
        assert!(k.apply(&ns[0]).iter().all(|x| x.is_zero()));
    }

    #[test]
    fn numeric_kernel_tolerates_roundoff() {
        let m = Mat::from_fn(2, 3, |i, j| QNum(Complex64::new((i + j) as f64 * 0.1, 0.0)));
        let ns = nullspace(&m);
        assert_eq!(ns.len(), 1);
        for x in m.apply(&ns[0]) {
            assert!(x.0.norm() < 1e-14);
        }
    }
}
