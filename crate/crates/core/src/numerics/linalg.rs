//! Small dense linear algebra for the invertible 1×1 convolution weights.
//! Everything runs in `f64` regardless of the model width.

/// LU factorisation `P·A = L·U` with partial pivoting, packed in one matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    /// Factorises a row-major `n × n` matrix. Returns `None` when a pivot is
    /// exactly zero.
    pub fn new(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r, &s| lu[r * n + col].abs().total_cmp(&lu[s * n + col].abs()))
                .unwrap();
            if lu[pivot_row * n + col] == 0.0 {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
                sign = -sign;
            }
            let pivot = lu[col * n + col];
            for r in col + 1..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                for j in col + 1..n {
                    lu[r * n + j] -= factor * lu[col * n + j];
                }
            }
        }
        Some(Self { n, lu, perm, sign })
    }

    /// `ln |det A|`.
    pub fn log_abs_det(&self) -> f64 {
        (0..self.n).map(|i| self.lu[i * self.n + i].abs().ln()).sum()
    }

    pub fn det(&self) -> f64 {
        self.sign * (0..self.n).map(|i| self.lu[i * self.n + i]).product::<f64>()
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Row-major `A⁻¹`.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for col in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[col] = 1.0;
            let x = self.solve(&e);
            for row in 0..n {
                inv[row * n + col] = x[row];
            }
        }
        inv
    }
}

/// Row-major orthogonal matrix from modified Gram–Schmidt on the columns of
/// `a`, with the first column negated if needed so the determinant is `+1`.
pub fn orthogonalize(a: &[f64], n: usize) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| a[i * n + j]).collect()).collect();
    for j in 0..n {
        for k in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let proj: f64 = done[k].iter().zip(&rest[0]).map(|(q, v)| q * v).sum();
            for (v, q) in rest[0].iter_mut().zip(&done[k]) {
                *v -= proj * q;
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    let mut q = vec![0.0; n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            q[i * n + j] = v;
        }
    }
    if Lu::new(&q, n).is_some_and(|lu| lu.det() < 0.0) {
        for i in 0..n {
            q[i * n] = -q[i * n];
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_determinant() {
        let a = [2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, -4.0];
        let lu = Lu::new(&a, 3).unwrap();
        assert!((lu.det() + 24.0).abs() < 1e-12);
        assert!((lu.log_abs_det() - 24f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trips() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.5, 2.0];
        let inv = Lu::new(&a, 3).unwrap().inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_has_no_factorisation() {
        assert!(Lu::new(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn orthogonalize_gives_rotation() {
        let a: Vec<f64> = (0..16).map(|i| ((i * 5 % 7) as f64 - 3.0) + if i % 5 == 0 { 4.0 } else { 0.0 }).collect();
        let q = orthogonalize(&a, 4);
        for i in 0..4 {
            for j in 0..4 {
                let v: f64 = (0..4).map(|k| q[k * 4 + i] * q[k * 4 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!((Lu::new(&q, 4).unwrap().det() - 1.0).abs() < 1e-12);
    }
}
