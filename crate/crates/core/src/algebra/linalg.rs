//! Exact dense linear algebra over `Q(i)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::Scalar;

/// Row-major dense matrix of exact scalars.
#[derive(Clone, Debug)]
pub struct ExactMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

/// Result of an exact solve `A x = b`.
#[derive(Clone, Debug)]
pub enum Solve {
    /// A solution with every free variable set to zero.
    Solution(Vec<Scalar>),
    /// A functional `y` with `yᵀA = 0` and `yᵀb ≠ 0`.
    Inconsistent { cokernel: Vec<Scalar> },
}

impl ExactMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Scalar::zero(); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.cols + c] = v;
    }

    fn row(&self, r: usize) -> Vec<Scalar> {
        self.data[r * self.cols..(r + 1) * self.cols].to_vec()
    }

    /// `A v`.
    pub fn apply(&self, v: &[Scalar]) -> Vec<Scalar> {
        (0..self.rows)
            .map(|r| {
                let mut acc = Scalar::zero();
                for c in 0..self.cols {
                    let a = self.get(r, c);
                    if !a.is_zero() && !v[c].is_zero() {
                        acc = &acc + &(a * &v[c]);
                    }
                }
                acc
            })
            .collect()
    }

    /// `yᵀ A`.
    pub fn apply_transpose(&self, y: &[Scalar]) -> Vec<Scalar> {
        (0..self.cols)
            .map(|c| {
                let mut acc = Scalar::zero();
                for r in 0..self.rows {
                    let a = self.get(r, c);
                    if !a.is_zero() && !y[r].is_zero() {
                        acc = &acc + &(a * &y[r]);
                    }
                }
                acc
            })
            .collect()
    }

    /// Exact determinant of a square matrix.
    pub fn determinant(&self) -> Scalar {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut m: Vec<Vec<Scalar>> = (0..n).map(|r| self.row(r)).collect();
        let mut det = Scalar::one();
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
                return Scalar::zero();
            };
            if piv != col {
                m.swap(piv, col);
                det = -det;
            }
            let p = m[col][col].clone();
            det = &det * &p;
            let pinv = p.inv().unwrap();
            for r in col + 1..n {
                if m[r][col].is_zero() {
                    continue;
                }
                let factor = &m[r][col] * &pinv;
                for c in col..n {
                    if !m[col][c].is_zero() {
                        let t = &factor * &m[col][c];
                        m[r][c] = &m[r][c] - &t;
                    }
                }
            }
        }
        det
    }

    pub fn to_c64(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).to_c64())
    }
}

/// Gauss-Jordan elimination of `[A | b]`, optionally tracking row operations
/// in an identity block so a cokernel functional can be read off.
fn eliminate(a: &ExactMatrix, b: &[Scalar], track: bool) -> (Vec<Vec<Scalar>>, Vec<usize>, Option<Vec<Vec<Scalar>>>) {
    let n = a.rows;
    let mut m: Vec<Vec<Scalar>> = (0..n)
        .map(|r| {
            let mut row = a.row(r);
            row.push(b[r].clone());
            row
        })
        .collect();
    let mut ops: Option<Vec<Vec<Scalar>>> = track.then(|| {
        (0..n)
            .map(|r| {
                let mut e = vec![Scalar::zero(); n];
                e[r] = Scalar::one();
                e
            })
            .collect()
    });
    let width = a.cols + 1;
    let mut pivots = Vec::new();
    let mut prow = 0;
    for col in 0..a.cols {
        if prow == n {
            break;
        }
        let Some(piv) = (prow..n).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(piv, prow);
        if let Some(o) = ops.as_mut() {
            o.swap(piv, prow);
        }
        let inv = m[prow][col].inv().unwrap();
        for c in col..width {
            if !m[prow][c].is_zero() {
                m[prow][c] = &m[prow][c] * &inv;
            }
        }
        if let Some(o) = ops.as_mut() {
            for v in o[prow].iter_mut() {
                if !v.is_zero() {
                    *v = &*v * &inv;
                }
            }
        }
        let pivot_row = m[prow].clone();
        let pivot_ops = ops.as_ref().map(|o| o[prow].clone());
        for r in 0..n {
            if r == prow || m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone();
            for c in col..width {
                if !pivot_row[c].is_zero() {
                    let t = &factor * &pivot_row[c];
                    m[r][c] = &m[r][c] - &t;
                }
            }
            if let (Some(o), Some(po)) = (ops.as_mut(), pivot_ops.as_ref()) {
                for (k, pv) in po.iter().enumerate() {
                    if !pv.is_zero() {
                        let t = &factor * pv;
                        o[r][k] = &o[r][k] - &t;
                    }
                }
            }
        }
        pivots.push(col);
        prow += 1;
    }
    (m, pivots, ops)
}

/// Solves `A x = b` exactly.
pub fn solve(a: &ExactMatrix, b: &[Scalar]) -> Solve {
    assert_eq!(a.rows, b.len());
    let (m, pivots, _) = eliminate(a, b, false);
    let rank = pivots.len();
    let inconsistent = (rank..a.rows).any(|r| !m[r][a.cols].is_zero());
    if inconsistent {
        let (m2, pivots2, ops) = eliminate(a, b, true);
        let ops = ops.unwrap();
        let r = (pivots2.len()..a.rows).find(|&r| !m2[r][a.cols].is_zero()).unwrap();
        return Solve::Inconsistent { cokernel: ops[r].clone() };
    }
    let mut x = vec![Scalar::zero(); a.cols];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = m[r][a.cols].clone();
    }
    Solve::Solution(x)
}

/// Rank of `A`.
pub fn rank(a: &ExactMatrix) -> usize {
    let zeros = vec![Scalar::zero(); a.rows];
    eliminate(a, &zeros, false).1.len()
}

/// Residual norm of the float least-squares relaxation, `min ‖Ax - b‖`.
pub fn least_squares_residual(a: &ExactMatrix, b: &[Scalar]) -> f64 {
    if a.cols == 0 || a.rows == 0 {
        return b.iter().map(|v| v.to_c64().norm_sqr()).sum::<f64>().sqrt();
    }
    let am = a.to_c64();
    let bv = DVector::from_iterator(b.len(), b.iter().map(|v| v.to_c64()));
    let svd = am.clone().svd(true, true);
    match svd.solve(&bv, 1e-12) {
        Ok(x) => (&am * x - &bv).norm(),
        Err(_) => bv.norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: &[i64]) -> ExactMatrix {
        let mut m = ExactMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, Scalar::from_int(v[r * cols + c]));
            }
        }
        m
    }

    #[test]
    fn consistent_system() {
        let a = mat(3, 3, &[2, 1, 0, 1, 3, 1, 0, 1, 4]);
        let b: Vec<Scalar> = [1, 2, 3].iter().map(|&v| Scalar::from_int(v)).collect();
        match solve(&a, &b) {
            Solve::Solution(x) => assert_eq!(a.apply(&x), b),
            other => panic!("{other:?}"),
        }
        assert_eq!(a.determinant(), Scalar::from_int(18));
    }

    #[test]
    fn underdetermined_sets_free_vars_to_zero() {
        let a = mat(1, 3, &[1, 1, 1]);
        let b = vec![Scalar::from_int(5)];
        match solve(&a, &b) {
            Solve::Solution(x) => assert_eq!(x, vec![Scalar::from_int(5), Scalar::zero(), Scalar::zero()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_system_has_cokernel_certificate() {
        let a = mat(3, 2, &[1, 1, 2, 2, 0, 1]);
        let b: Vec<Scalar> = [1, 3, 0].iter().map(|&v| Scalar::from_int(v)).collect();
        match solve(&a, &b) {
            Solve::Inconsistent { cokernel } => {
                assert!(a.apply_transpose(&cokernel).iter().all(|v| v.is_zero()));
                let yb = cokernel.iter().zip(&b).fold(Scalar::zero(), |acc, (y, v)| &acc + &(y * v));
                assert!(!yb.is_zero());
            }
            other => panic!("{other:?}"),
        }
        assert!(least_squares_residual(&a, &b) > 0.1);
        assert_eq!(rank(&a), 2);
    }
}
