//! Single-layer GRU with a linear readout, forward pass and BPTT.
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! ĥ  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ ĥ
//! y  = W_o h' + b_o
//! ```
//!
//! All parameters live in one flat vector so the optimizer and the model
//! file only see a slice of `f64`.

use serde::{Deserialize, Serialize};

use crate::rng::{uniform, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GruShape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w: [usize; 3],
    u: [usize; 3],
    b: [usize; 3],
    wo: usize,
    bo: usize,
    total: usize,
}

const Z: usize = 0;
const R: usize = 1;
const H: usize = 2;

impl GruShape {
    fn layout(&self) -> Layout {
        let (i, h, o) = (self.input, self.hidden, self.output);
        let gate = h * i + h * h + h;
        let base = |g: usize| g * gate;
        Layout {
            w: [base(0), base(1), base(2)],
            u: [base(0) + h * i, base(1) + h * i, base(2) + h * i],
            b: [
                base(0) + h * i + h * h,
                base(1) + h * i + h * h,
                base(2) + h * i + h * h,
            ],
            wo: 3 * gate,
            bo: 3 * gate + o * h,
            total: 3 * gate + o * h + o,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    shape: GruShape,
    params: Vec<f64>,
}

/// `out += W x` for row-major `W` (`out.len()` × `x.len()`).
fn mat_vec_acc(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ d` for row-major `W` (`d.len()` × `out.len()`).
fn mat_t_vec_acc(out: &mut [f64], w: &[f64], d: &[f64]) {
    let cols = out.len();
    for (di, row) in d.iter().zip(w.chunks_exact(cols)) {
        if *di != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += di * a;
            }
        }
    }
}

/// `G += d xᵀ` for row-major `G` (`d.len()` × `x.len()`).
fn outer_acc(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (di, row) in d.iter().zip(g.chunks_exact_mut(cols)) {
        for (gij, xj) in row.iter_mut().zip(x) {
            *gij += di * xj;
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
    h: Vec<f64>,
}

impl Gru {
    /// Weights uniform in `(−1/√H, 1/√H)`, biases zero.
    pub fn new(shape: GruShape, rng: &mut SimRng) -> Self {
        let l = shape.layout();
        let s = 1.0 / (shape.hidden as f64).sqrt();
        let mut params = vec![0.0; l.total];
        let mut fill = |start: usize, len: usize| {
            for p in &mut params[start..start + len] {
                *p = s * (2.0 * uniform(rng) - 1.0);
            }
        };
        let (i, h, o) = (shape.input, shape.hidden, shape.output);
        for g in 0..3 {
            fill(l.w[g], h * i);
            fill(l.u[g], h * h);
        }
        fill(l.wo, o * h);
        Self { shape, params }
    }

    pub fn from_params(shape: GruShape, params: Vec<f64>) -> Option<Self> {
        (params.len() == shape.param_count() && params.iter().all(|p| p.is_finite()))
            .then_some(Self { shape, params })
    }

    pub fn shape(&self) -> GruShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn step(&self, l: &Layout, x: &[f64], h_prev: &[f64]) -> StepCache {
        let hd = self.shape.hidden;
        let p = &self.params;
        let gate = |g: usize, h_in: &[f64]| {
            let mut a = p[l.b[g]..l.b[g] + hd].to_vec();
            mat_vec_acc(&mut a, &p[l.w[g]..l.w[g] + hd * x.len()], x);
            mat_vec_acc(&mut a, &p[l.u[g]..l.u[g] + hd * hd], h_in);
            a
        };
        let z: Vec<f64> = gate(Z, h_prev).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = gate(R, h_prev).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let cand: Vec<f64> = gate(H, &rh).into_iter().map(f64::tanh).collect();
        let h = (0..hd)
            .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * cand[k])
            .collect();
        StepCache {
            h_prev: h_prev.to_vec(),
            z,
            r,
            cand,
            h,
        }
    }

    fn readout(&self, l: &Layout, h: &[f64]) -> Vec<f64> {
        let o = self.shape.output;
        let mut y = self.params[l.bo..l.bo + o].to_vec();
        mat_vec_acc(&mut y, &self.params[l.wo..l.wo + o * h.len()], h);
        y
    }

    /// Advances the hidden state by one input and returns the readout.
    pub fn step_stream(&self, x: &[f64], hidden: &mut Vec<f64>) -> Vec<f64> {
        let l = self.shape.layout();
        *hidden = self.step(&l, x, hidden).h;
        self.readout(&l, hidden)
    }

    /// Runs the recurrence from `h₀ = 0`; output `t` depends on inputs `0..=t` only.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let l = self.shape.layout();
        let mut h = vec![0.0; self.shape.hidden];
        inputs
            .iter()
            .map(|x| {
                h = self.step(&l, x, &h).h;
                self.readout(&l, &h)
            })
            .collect()
    }

    /// Sum of squared errors over one sequence and its gradient, accumulated
    /// into `grad` after multiplying by `scale`.
    pub fn sse_and_gradient(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let l = self.shape.layout();
        let (hd, o) = (self.shape.hidden, self.shape.output);
        let p = &self.params;

        let mut caches = Vec::with_capacity(inputs.len());
        let mut h = vec![0.0; hd];
        let mut sse = 0.0;
        let mut dy_all = Vec::with_capacity(inputs.len());
        for (x, target) in inputs.iter().zip(targets) {
            let c = self.step(&l, x, &h);
            h = c.h.clone();
            let y = self.readout(&l, &h);
            let dy: Vec<f64> = y.iter().zip(target).map(|(a, b)| a - b).collect();
            sse += dy.iter().map(|d| d * d).sum::<f64>();
            dy_all.push(
                dy.into_iter()
                    .map(|d| 2.0 * scale * d)
                    .collect::<Vec<f64>>(),
            );
            caches.push(c);
        }

        let mut dh_next = vec![0.0; hd];
        for t in (0..inputs.len()).rev() {
            let c = &caches[t];
            let x = &inputs[t];
            let dy = &dy_all[t];
            outer_acc(&mut grad[l.wo..l.wo + o * hd], dy, &c.h);
            for (g, d) in grad[l.bo..l.bo + o].iter_mut().zip(dy) {
                *g += d;
            }
            let mut dh = dh_next.clone();
            mat_t_vec_acc(&mut dh, &p[l.wo..l.wo + o * hd], dy);

            let mut dh_prev: Vec<f64> = (0..hd).map(|k| dh[k] * (1.0 - c.z[k])).collect();
            let da_z: Vec<f64> = (0..hd)
                .map(|k| dh[k] * (c.cand[k] - c.h_prev[k]) * c.z[k] * (1.0 - c.z[k]))
                .collect();
            let da_h: Vec<f64> = (0..hd)
                .map(|k| dh[k] * c.z[k] * (1.0 - c.cand[k] * c.cand[k]))
                .collect();

            let rh: Vec<f64> = c.r.iter().zip(&c.h_prev).map(|(a, b)| a * b).collect();
            let mut d_rh = vec![0.0; hd];
            mat_t_vec_acc(&mut d_rh, &p[l.u[H]..l.u[H] + hd * hd], &da_h);
            let da_r: Vec<f64> = (0..hd)
                .map(|k| d_rh[k] * c.h_prev[k] * c.r[k] * (1.0 - c.r[k]))
                .collect();
            for k in 0..hd {
                dh_prev[k] += d_rh[k] * c.r[k];
            }

            for (g, da, h_in) in [
                (Z, &da_z, &c.h_prev),
                (R, &da_r, &c.h_prev),
                (H, &da_h, &rh),
            ] {
                outer_acc(&mut grad[l.w[g]..l.w[g] + hd * x.len()], da, x);
                outer_acc(&mut grad[l.u[g]..l.u[g] + hd * hd], da, h_in);
                for (gb, d) in grad[l.b[g]..l.b[g] + hd].iter_mut().zip(da.iter()) {
                    *gb += d;
                }
                if g != H {
                    mat_t_vec_acc(&mut dh_prev, &p[l.u[g]..l.u[g] + hd * hd], da);
                }
            }
            dh_next = dh_prev;
        }
        sse
    }
}
