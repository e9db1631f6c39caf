//! Minimal dense row-major matrix used by the recurrent cells.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..=scale))
            .collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out[r] += Σ_c M[r, c] v[c]` for rows in `rows`.
    #[inline]
    pub fn matvec_rows_acc(&self, v: &[f64], rows: std::ops::Range<usize>, out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (o, r) in out.iter_mut().zip(rows) {
            *o += dot(self.row(r), v);
        }
    }

    /// `out += M v`.
    #[inline]
    pub fn matvec_acc(&self, v: &[f64], out: &mut [f64]) {
        self.matvec_rows_acc(v, 0..self.rows, out);
    }

    /// `out += Mᵀ g` restricted to the given row block of `M`.
    #[inline]
    pub fn matvec_t_rows_acc(&self, g: &[f64], row_offset: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols);
        for (k, &gk) in g.iter().enumerate() {
            if gk == 0.0 {
                continue;
            }
            axpy(gk, self.row(row_offset + k), out);
        }
    }

    /// `out += Mᵀ g`.
    #[inline]
    pub fn matvec_t_acc(&self, g: &[f64], out: &mut [f64]) {
        self.matvec_t_rows_acc(g, 0, out);
    }

    /// `M[row_offset + k, :] += g[k] · v` (rank-one update on a row block).
    #[inline]
    pub fn add_outer_rows(&mut self, g: &[f64], v: &[f64], row_offset: usize) {
        debug_assert_eq!(v.len(), self.cols);
        for (k, &gk) in g.iter().enumerate() {
            if gk == 0.0 {
                continue;
            }
            axpy(gk, v, self.row_mut(row_offset + k));
        }
    }

    #[inline]
    pub fn add_outer(&mut self, g: &[f64], v: &[f64]) {
        self.add_outer_rows(g, v, 0);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn uniform_vec<R: Rng>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Matrix {
            rows: 2,
            cols: 3,
            data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        let mut out = vec![0.0; 2];
        m.matvec_acc(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-2.0, -2.0]);
        let mut out = vec![0.0; 3];
        m.matvec_t_acc(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![5.0, 7.0, 9.0]);
        let mut g = Matrix::zeros(2, 3);
        g.add_outer(&[1.0, 2.0], &[1.0, 0.0, 1.0]);
        assert_eq!(g.data, vec![1.0, 0.0, 1.0, 2.0, 0.0, 2.0]);
    }
}
