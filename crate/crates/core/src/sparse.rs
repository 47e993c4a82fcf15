//! Internal compressed-row view of an adjacency matrix.
//!
//! The fit loops only touch the data through products with tall skinny
//! factors, so a row-compressed copy keeps the per-iteration cost
//! proportional to the number of edges instead of `n^2`. Accumulation order
//! is fixed (rows ascending, entries within a row ascending), which keeps
//! results bit-reproducible.

use ndarray::Array2;

pub(crate) struct Csr {
    n_rows: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
    sq_norm: f64,
}

impl Csr {
    pub(crate) fn from_dense(a: &Array2<f64>) -> Self {
        let (n_rows, n_cols) = a.dim();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut sq_norm = 0.0;
        indptr.push(0);
        for i in 0..n_rows {
            for j in 0..n_cols {
                let w = a[[i, j]];
                if w != 0.0 {
                    indices.push(j);
                    data.push(w);
                    sq_norm += w * w;
                }
            }
            indptr.push(indices.len());
        }
        Self { n_rows, indptr, indices, data, sq_norm }
    }

    /// Row-compressed copy of the transpose.
    pub(crate) fn transpose_from_dense(a: &Array2<f64>) -> Self {
        Self::from_dense(&a.t().to_owned())
    }

    pub(crate) fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    /// `out = self * x`, with `x` of shape `(n_cols, k)`.
    pub(crate) fn mul_into(&self, x: &Array2<f64>, out: &mut Array2<f64>) {
        let k = x.ncols();
        debug_assert_eq!(out.dim(), (self.n_rows, k));
        out.fill(0.0);
        for i in 0..self.n_rows {
            for idx in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[idx];
                let w = self.data[idx];
                for c in 0..k {
                    out[[i, c]] += w * x[[j, c]];
                }
            }
        }
    }

    /// `<A, U V^T> = sum_{(i,j) in A} w_ij (U_i . V_j)`.
    pub(crate) fn inner_with_product(&self, u: &Array2<f64>, v: &Array2<f64>) -> f64 {
        let k = u.ncols();
        let mut total = 0.0;
        for i in 0..self.n_rows {
            for idx in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[idx];
                let mut dot = 0.0;
                for c in 0..k {
                    dot += u[[i, c]] * v[[j, c]];
                }
                total += self.data[idx] * dot;
            }
        }
        total
    }
}

/// `||A - U V^T||_F^2` through the expansion
/// `||A||^2 - 2 <A, UV^T> + <U^T U, V^T V>`; clamped at zero because the
/// expansion can round slightly negative near exact fits.
pub(crate) fn residual_sq(csr: &Csr, u: &Array2<f64>, v: &Array2<f64>, utu: &Array2<f64>, vtv: &Array2<f64>) -> f64 {
    let cross = csr.inner_with_product(u, v);
    let gram: f64 = utu.iter().zip(vtv.iter()).map(|(&a, &b)| a * b).sum();
    (csr.sq_norm() - 2.0 * cross + gram).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matches_dense_products() {
        let a = array![[0.0, 2.0, 0.0], [1.0, 0.0, 3.0], [0.0, 0.0, 0.0]];
        let x = array![[1.0, 0.5], [2.0, 1.0], [0.0, 4.0]];
        let csr = Csr::from_dense(&a);
        let mut out = Array2::zeros((3, 2));
        csr.mul_into(&x, &mut out);
        let expect = a.dot(&x);
        assert!(out.iter().zip(expect.iter()).all(|(&l, &r)| (l - r).abs() < 1e-15));

        let t = Csr::transpose_from_dense(&a);
        let mut out_t = Array2::zeros((3, 2));
        t.mul_into(&x, &mut out_t);
        let expect_t = a.t().dot(&x);
        assert!(out_t.iter().zip(expect_t.iter()).all(|(&l, &r)| (l - r).abs() < 1e-15));
    }

    #[test]
    fn residual_matches_direct_norm() {
        let a = array![[0.0, 2.0], [1.0, 0.5]];
        let u = array![[0.3, 1.0], [0.7, 0.2]];
        let v = array![[0.9, 0.1], [1.1, 0.6]];
        let csr = Csr::from_dense(&a);
        let utu = u.t().dot(&u);
        let vtv = v.t().dot(&v);
        let fast = residual_sq(&csr, &u, &v, &utu, &vtv);
        let direct = (&a - &u.dot(&v.t())).mapv(|x| x * x).sum();
        assert!((fast - direct).abs() < 1e-12 * direct.max(1.0));
    }
}
