//! Reverse accumulation from a scalar root to the parameter vector.

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};

use super::{Op, Tape, Var};

impl Tape {
    /// `∂root/∂θ` for every entry of the parameter vector.
    ///
    /// Nodes are visited in reverse recording order, so the reduction order
    /// is fixed and repeated calls are bit-identical.
    pub fn param_gradient(&self, root: Var) -> Result<Vec<f64>> {
        let shape = self.shape(root);
        if shape != (1, 1) {
            return Err(Error::NonScalarRoot(shape));
        }
        let mut grads = vec![0.0; self.params.len()];
        if !self.rg(root) {
            return Ok(grads);
        }
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Array2::ones((1, 1)));

        for id in (0..=root.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            match &self.nodes[id].op {
                Op::Input(_) | Op::Const | Op::Detach(_) => {}
                Op::Param { offset } => {
                    for (dst, src) in grads[*offset..].iter_mut().zip(g.iter()) {
                        *dst += src;
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, *a, g.clone());
                    self.accumulate(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adj, *b, g.mapv(|x| -x));
                    self.accumulate(&mut adj, *a, g);
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        let ga = self.times(&g, *b);
                        self.accumulate(&mut adj, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = self.times(&g, *a);
                        self.accumulate(&mut adj, *b, gb);
                    }
                }
                Op::Div(a, b) => {
                    let vb = &self.values[b.0];
                    if self.rg(*a) {
                        let ga = broadcast_zip(&g, vb, |g, b| g / b);
                        self.accumulate(&mut adj, *a, ga);
                    }
                    if self.rg(*b) {
                        // ∂(a/b)/∂b = -(a/b)/b
                        let quotient = &self.values[id];
                        let t = Zip::from(&g).and(quotient).map_collect(|&g, &q| -g * q);
                        let gb = broadcast_zip(&t, vb, |t, b| t / b);
                        self.accumulate(&mut adj, *b, gb);
                    }
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    self.accumulate(&mut adj, *a, g.mapv(|x| c * x));
                }
                Op::Shift(a) => self.accumulate(&mut adj, *a, g),
                Op::Unary { func, order, arg } => {
                    let z = &self.values[arg.0];
                    let next = self.unary_cache.get(&(*func, order + 1, *arg));
                    let ga = match next {
                        Some(d) => &g * &self.values[d.0],
                        None => {
                            let d = self.unary_values(*func, order + 1, *arg);
                            debug_assert_eq!(d.dim(), z.dim());
                            &g * &d
                        }
                    };
                    self.accumulate(&mut adj, *arg, ga);
                }
                Op::MatMul { x, w } => {
                    if self.rg(*x) {
                        let gx = g.dot(&self.values[w.0]);
                        self.accumulate(&mut adj, *x, gx);
                    }
                    if self.rg(*w) {
                        let gw = g.t().dot(&self.values[x.0]);
                        self.accumulate(&mut adj, *w, gw);
                    }
                }
                Op::AddRow { x, row } => {
                    if self.rg(*row) {
                        let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        self.accumulate(&mut adj, *row, gr);
                    }
                    self.accumulate(&mut adj, *x, g);
                }
                Op::Concat(parts) => {
                    let mut col = 0;
                    for &p in parts {
                        let width = self.shape(p).1;
                        if self.rg(p) {
                            let gp = g.slice(s![.., col..col + width]).to_owned();
                            self.accumulate(&mut adj, p, gp);
                        }
                        col += width;
                    }
                }
                Op::Mean(a) => {
                    let shape = self.shape(*a);
                    let count = (shape.0 * shape.1) as f64;
                    self.accumulate(&mut adj, *a, Array2::from_elem(shape, g[[0, 0]] / count));
                }
            }
        }
        Ok(grads)
    }

    /// `g * value(other)` with scalar broadcasting on either side.
    fn times(&self, g: &Array2<f64>, other: Var) -> Array2<f64> {
        broadcast_zip(g, &self.values[other.0], |g, v| g * v)
    }

    fn accumulate(&self, adj: &mut [Option<Array2<f64>>], target: Var, mut contribution: Array2<f64>) {
        if !self.rg(target) {
            return;
        }
        let shape = self.shape(target);
        if contribution.dim() != shape {
            // broadcast scalar operand: reduce
            debug_assert_eq!(shape, (1, 1));
            contribution = Array2::from_elem((1, 1), contribution.sum());
        }
        match &mut adj[target.0] {
            Some(existing) => *existing += &contribution,
            slot @ None => *slot = Some(contribution),
        }
    }
}

/// Elementwise `f(g, v)` where `v` may be a 1x1 scalar or `g` may be.
fn broadcast_zip(g: &Array2<f64>, v: &Array2<f64>, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
    if g.dim() == v.dim() {
        Zip::from(g).and(v).map_collect(|&g, &v| f(g, v))
    } else if v.dim() == (1, 1) {
        let s = v[[0, 0]];
        g.mapv(|g| f(g, s))
    } else {
        let s = g[[0, 0]];
        v.mapv(|v| f(s, v))
    }
}
