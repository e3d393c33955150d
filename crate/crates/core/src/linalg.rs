//! Small dense-matrix helpers for the d×d problems in this crate.
//!
//! Matrices are row-major `Vec<f64>` wrapped in [`Mat`]. `d` rarely exceeds
//! ten, so everything is plain triple loops with partial-pivot LU where a
//! solve or determinant is needed.

use serde::{Deserialize, Serialize};

/// A square row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub d: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(d: usize) -> Self {
        Mat { d, data: vec![0.0; d * d] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Mat::zeros(d);
        for i in 0..d {
            m.data[i * d + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.len();
        assert!(rows.iter().all(|r| r.len() == d), "rows must form a square matrix");
        Mat { d, data: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.d + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// y = A x
    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..d {
                acc += row[j] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// y = Aᵀ x
    pub fn mat_t_vec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut y = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                y[j] += self.data[i * d + j] * x[i];
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat { d: self.d, data: self.data.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.d, other.d);
        Mat {
            d: self.d,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Mean of the diagonal entries, tr(A)/d.
    pub fn diag_mean(&self) -> f64 {
        (0..self.d).map(|i| self.get(i, i)).sum::<f64>() / self.d as f64
    }

    /// ‖A − diag_mean(A)·I‖_F, the deviation from a scaled identity.
    pub fn deviation_from_scaled_identity(&self) -> f64 {
        let c = self.diag_mean();
        let mut acc = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                let target = if i == j { c } else { 0.0 };
                let diff = self.get(i, j) - target;
                acc += diff * diff;
            }
        }
        acc.sqrt()
    }

    /// Determinant via partial-pivot LU.
    pub fn det(&self) -> f64 {
        let d = self.d;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..d {
            let mut pivot = col;
            for r in col + 1..d {
                if a[r * d + col].abs() > a[pivot * d + col].abs() {
                    pivot = r;
                }
            }
            if a[pivot * d + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..d {
                    a.swap(col * d + j, pivot * d + j);
                }
                det = -det;
            }
            let p = a[col * d + col];
            det *= p;
            for r in col + 1..d {
                let f = a[r * d + col] / p;
                for j in col..d {
                    a[r * d + j] -= f * a[col * d + j];
                }
            }
        }
        det
    }

    /// Solve A xᵀ = bᵀ for a single right-hand side.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let d = self.d;
        assert_eq!(b.len(), d);
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for col in 0..d {
            let mut pivot = col;
            for r in col + 1..d {
                if a[r * d + col].abs() > a[pivot * d + col].abs() {
                    pivot = r;
                }
            }
            if a[pivot * d + col].abs() < 1e-300 {
                return None;
            }
            if pivot != col {
                for j in 0..d {
                    a.swap(col * d + j, pivot * d + j);
                }
                x.swap(col, pivot);
            }
            let p = a[col * d + col];
            for r in col + 1..d {
                let f = a[r * d + col] / p;
                for j in col..d {
                    a[r * d + j] -= f * a[col * d + j];
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..d).rev() {
            let mut acc = x[col];
            for j in col + 1..d {
                acc -= a[col * d + j] * x[j];
            }
            x[col] = acc / a[col * d + col];
        }
        Some(x)
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn l2_norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn l2_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Index of the maximum entry; ties break toward the lowest index.
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate().skip(1) {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solve_recovers_rhs() {
        let a = Mat::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let x_true = vec![1.0, -2.0, 3.0];
        let b = a.mat_vec(&x_true);
        let x = a.solve(&b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert_relative_eq!(xi, ti, epsilon = 1e-12);
        }
    }

    #[test]
    fn det_of_identity_and_swap() {
        assert_relative_eq!(Mat::identity(4).det(), 1.0);
        let m = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_relative_eq!(m.det(), -1.0);
    }

    #[test]
    fn deviation_from_scaled_identity_zero_for_scaled_identity() {
        let m = Mat::identity(3).scale(2.0);
        assert_relative_eq!(m.deviation_from_scaled_identity(), 0.0);
        assert_relative_eq!(m.diag_mean(), 2.0);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[3.0, 3.0, 1.0]), 0);
        assert_eq!(argmax(&[1.0, 5.0, 5.0]), 1);
    }
}
