//! Gated recurrent cell with a hand-written backward pass.
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//! Gate blocks are stacked in the order `z, r, n` along the rows of `W`, `U`
//! and `b`.

use rand::Rng;

use crate::linalg::{sigmoid, uniform_vec, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input: usize,
    pub hidden: usize,
    /// `3H × I`
    pub w: Matrix,
    /// `3H × H`
    pub u: Matrix,
    /// `3H`
    pub b: Vec<f64>,
}

/// Activations of one cell step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w: Matrix::zeros(3 * hidden, input),
            u: Matrix::zeros(3 * hidden, hidden),
            b: vec![0.0; 3 * hidden],
        }
    }

    pub fn uniform<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            input,
            hidden,
            w: Matrix::uniform(3 * hidden, input, scale, rng),
            u: Matrix::uniform(3 * hidden, hidden, scale, rng),
            b: uniform_vec(3 * hidden, scale, rng),
        }
    }

    /// One step, returning the cached activations (the new state is `step.h`).
    pub fn forward(&self, x: &[f64], h_prev: &[f64]) -> GruStep {
        let hd = self.hidden;
        let mut pre = self.b.clone();
        self.w.matvec_acc(x, &mut pre);
        self.u.matvec_rows_acc(h_prev, 0..2 * hd, &mut pre[..2 * hd]);

        let z: Vec<f64> = pre[..hd].iter().map(|&a| sigmoid(a)).collect();
        let r: Vec<f64> = pre[hd..2 * hd].iter().map(|&a| sigmoid(a)).collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        self.u.matvec_rows_acc(&rh, 2 * hd..3 * hd, &mut pre[2 * hd..]);
        let n: Vec<f64> = pre[2 * hd..].iter().map(|&a| a.tanh()).collect();
        let h = (0..hd)
            .map(|k| (1.0 - z[k]) * n[k] + z[k] * h_prev[k])
            .collect();
        GruStep {
            h_prev: h_prev.to_vec(),
            z,
            r,
            n,
            h,
        }
    }

    /// Next state only.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        self.forward(x, h_prev).h
    }

    /// Back-propagates `dh` (gradient w.r.t. `step.h`) through one step.
    ///
    /// Parameter gradients accumulate into `grad`; gradients w.r.t. the input
    /// and previous state accumulate into `dx` and `dh_prev`.
    pub fn backward(
        &self,
        step: &GruStep,
        x: &[f64],
        dh: &[f64],
        grad: &mut GruCell,
        dx: &mut [f64],
        dh_prev: &mut [f64],
    ) {
        let hd = self.hidden;
        let mut da = vec![0.0; 3 * hd];
        for k in 0..hd {
            let (z, n, hp) = (step.z[k], step.n[k], step.h_prev[k]);
            dh_prev[k] += dh[k] * z;
            let dz = dh[k] * (hp - n);
            let dn = dh[k] * (1.0 - z);
            da[k] = dz * z * (1.0 - z);
            da[2 * hd + k] = dn * (1.0 - n * n);
        }
        // n-gate recurrence goes through r ⊙ h
        let mut drh = vec![0.0; hd];
        self.u.matvec_t_rows_acc(&da[2 * hd..], 2 * hd, &mut drh);
        let rh: Vec<f64> = step.r.iter().zip(&step.h_prev).map(|(r, h)| r * h).collect();
        for k in 0..hd {
            let r = step.r[k];
            dh_prev[k] += drh[k] * r;
            let dr = drh[k] * step.h_prev[k];
            da[hd + k] = dr * r * (1.0 - r);
        }

        grad.w.add_outer(&da, x);
        grad.u.add_outer_rows(&da[..2 * hd], &step.h_prev, 0);
        grad.u.add_outer_rows(&da[2 * hd..], &rh, 2 * hd);
        for (g, d) in grad.b.iter_mut().zip(&da) {
            *g += d;
        }
        self.w.matvec_t_acc(&da, dx);
        self.u.matvec_t_rows_acc(&da[..2 * hd], 0, dh_prev);
    }
}
