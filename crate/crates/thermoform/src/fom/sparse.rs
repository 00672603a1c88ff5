//! Minimal compressed-sparse-row storage and a Jacobi-preconditioned
//! conjugate-gradient solver.
//!
//! The semi-implicit step matrix `M - h K` is symmetric positive definite
//! (lumped mass plus scaled conduction and film stiffness), strongly
//! diagonally dominated by the mass term at process step sizes, so CG with a
//! diagonal preconditioner converges in a handful of iterations. Assembly
//! reuses a fixed sparsity pattern; only the value array is rewritten per
//! step.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Square CSR matrix with a fixed sparsity pattern.
#[derive(Debug, Clone)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds a zero matrix from per-row neighbor lists. Each list must
    /// contain the row index itself (diagonal) and be free of duplicates;
    /// lists get sorted here.
    pub fn from_adjacency(neighbors: Vec<Vec<usize>>) -> Csr {
        let n = neighbors.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in neighbors.into_iter().enumerate() {
            debug_assert!(row.contains(&i), "row {i} must include its diagonal");
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Csr {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Index into `values` for entry `(i, j)`. Panics if the slot is not in
    /// the pattern — callers assemble only on the precomputed connectivity.
    pub fn slot(&self, i: usize, j: usize) -> usize {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(pos) => lo + pos,
            Err(_) => panic!("entry ({i}, {j}) outside the sparsity pattern"),
        }
    }

    pub fn clear(&mut self) {
        self.values.fill(0.0);
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[idx] * x[self.col_idx[idx]];
            }
            y[i] = acc;
        }
    }

    /// Dense copy of the diagonal.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.values[self.slot(i, i)]).collect()
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |idx| (i, self.col_idx[idx], self.values[idx]))
        })
    }

    /// Maximum relative asymmetry, `|a_ij - a_ji| / max|a|`; zero for an
    /// exactly symmetric matrix.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for (i, j, v) in self.iter() {
            if j > i {
                let vt = self.values[self.slot(j, i)];
                worst = worst.max((v - vt).abs() / scale);
            }
        }
        worst
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by preconditioned
/// conjugate gradients with Jacobi preconditioning, starting from `x0`.
///
/// Converges when the residual 2-norm falls below
/// `rtol * ||b|| + f64::MIN_POSITIVE`; fails with a numerical error if the
/// iteration count exceeds `10 n + 100` or a breakdown occurs.
pub fn cg_solve(
    a: &Csr,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    rtol: f64,
    step: usize,
) -> Result<DVector<f64>> {
    let n = a.n();
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::SolveFailed {
            step,
            reason: "non-positive diagonal in step matrix".into(),
        });
    }

    let mut x = x0.clone();
    let mut r = DVector::zeros(n);
    a.matvec(x.as_slice(), r.as_mut_slice());
    r.zip_apply(b, |ri, bi| *ri = bi - *ri);

    let tol = rtol * b.norm() + f64::MIN_POSITIVE;
    if r.norm() <= tol {
        return Ok(x);
    }

    let mut z = DVector::from_iterator(n, r.iter().zip(&diag).map(|(ri, di)| ri / di));
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);

    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        a.matvec(p.as_slice(), ap.as_mut_slice());
        let p_ap = p.dot(&ap);
        if !(p_ap > 0.0) {
            return Err(Error::SolveFailed {
                step,
                reason: format!("conjugate gradient breakdown (p'Ap = {p_ap:e})"),
            });
        }
        let alpha = rz / p_ap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if r.norm() <= tol {
            return Ok(x);
        }
        z.zip_zip_apply(&r, &DVector::from_vec(diag.clone()), |zi, ri, di| {
            *zi = ri / di
        });
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.zip_apply(&z, |pi, zi| *pi = zi + beta * *pi);
    }
    Err(Error::SolveFailed {
        step,
        reason: format!("conjugate gradient did not converge in {max_iter} iterations"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn laplacian_1d(n: usize) -> Csr {
        let neighbors = (0..n)
            .map(|i| {
                let mut row = vec![i];
                if i > 0 {
                    row.push(i - 1);
                }
                if i + 1 < n {
                    row.push(i + 1);
                }
                row
            })
            .collect();
        let mut a = Csr::from_adjacency(neighbors);
        for i in 0..n {
            let diag = a.slot(i, i);
            a.values[diag] = 2.5;
            if i > 0 {
                let left = a.slot(i, i - 1);
                a.values[left] = -1.0;
            }
            if i + 1 < n {
                let right = a.slot(i, i + 1);
                a.values[right] = -1.0;
            }
        }
        a
    }

    #[test]
    fn cg_matches_dense_solver() {
        let n = 40;
        let a = laplacian_1d(n);
        let b = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin() + 2.0);

        let mut dense = DMatrix::zeros(n, n);
        for (i, j, v) in a.iter() {
            dense[(i, j)] = v;
        }
        let expected = dense.lu().solve(&b).unwrap();

        let x = cg_solve(&a, &b, &DVector::zeros(n), 1e-14, 0).unwrap();
        assert_relative_eq!(x, expected, max_relative = 1e-10);
    }

    #[test]
    fn cg_reaches_requested_residual() {
        let n = 200;
        let a = laplacian_1d(n);
        let b = DVector::from_element(n, 1.0);
        let x = cg_solve(&a, &b, &DVector::zeros(n), 1e-12, 0).unwrap();
        let mut r = DVector::zeros(n);
        a.matvec(x.as_slice(), r.as_mut_slice());
        assert!((&b - &r).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn cg_rejects_indefinite_input() {
        let mut a = laplacian_1d(3);
        let mid = a.slot(1, 1);
        a.values[mid] = -5.0;
        let b = DVector::from_element(3, 1.0);
        assert!(matches!(
            cg_solve(&a, &b, &DVector::zeros(3), 1e-12, 7),
            Err(Error::SolveFailed { step: 7, .. })
        ));
    }

    #[test]
    fn asymmetry_detects_broken_assembly() {
        let mut a = laplacian_1d(4);
        assert_eq!(a.asymmetry(), 0.0);
        let idx = a.slot(0, 1);
        a.values[idx] += 0.5;
        assert!(a.asymmetry() > 0.1);
    }
}
