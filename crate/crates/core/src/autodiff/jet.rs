//! Forward propagation of second-order spatial jets.
//!
//! For a pointwise node `u` the jet is `(u, ∂u/∂x_1, ..., ∂u/∂x_d, Δu)`.
//! Only the diagonal second derivatives are carried. Jet components are
//! recorded as tape nodes, `None` standing for an identically zero
//! component.

use std::collections::HashSet;

use crate::error::{Error, Result};

use super::{Op, Tape, UnaryFn, Var};

#[derive(Clone, Debug)]
pub(crate) struct Partials {
    grad: Vec<Option<Var>>,
    lap: Option<Var>,
}

impl Partials {
    fn zero(dim: usize) -> Self {
        Partials {
            grad: vec![None; dim],
            lap: None,
        }
    }

    fn is_zero(&self) -> bool {
        self.lap.is_none() && self.grad.iter().all(Option::is_none)
    }
}

/// Jet of a node, as tape nodes.
#[derive(Clone, Debug)]
pub struct JetVars {
    pub value: Var,
    pub gradient: Vec<Var>,
    pub laplacian: Var,
}

/// Jet of a scalar function at a single point.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub laplacian: f64,
}

impl Op {
    fn children(&self) -> Vec<Var> {
        match self {
            Op::Input(_) | Op::Param { .. } | Op::Const => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => vec![*a, *b],
            Op::Scale(a, _) | Op::Shift(a) | Op::Mean(a) | Op::Detach(a) => vec![*a],
            Op::Unary { arg, .. } => vec![*arg],
            Op::MatMul { x, w } => vec![*x, *w],
            Op::AddRow { x, row } => vec![*x, *row],
            Op::Concat(parts) => parts.clone(),
        }
    }
}

impl Tape {
    /// Records the spatial jet of `u` on the tape.
    ///
    /// Fails if `u` depends on a cross-point reduction or on a matrix
    /// product whose right operand varies in space.
    pub fn spatial_jet(&mut self, u: Var) -> Result<JetVars> {
        let partials = self.partials(u)?;
        let (rows, cols) = self.shape(u);
        let gradient = partials
            .grad
            .iter()
            .map(|g| g.unwrap_or_else(|| self.fill(0.0, rows, cols)))
            .collect();
        let laplacian = partials.lap.unwrap_or_else(|| self.fill(0.0, rows, cols));
        Ok(JetVars {
            value: u,
            gradient,
            laplacian,
        })
    }

    /// Reads the jet of an n x 1 node at one point.
    pub fn jet_at(&self, jet: &JetVars, row: usize) -> SpatialJet {
        SpatialJet {
            value: self.value(jet.value)[[row, 0]],
            gradient: jet.gradient.iter().map(|&g| self.value(g)[[row, 0]]).collect(),
            laplacian: self.value(jet.laplacian)[[row, 0]],
        }
    }

    fn partials(&mut self, root: Var) -> Result<Partials> {
        if let Some(p) = self.jet_cache.get(&root) {
            return Ok(p.clone());
        }
        let mut pending = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) || self.jet_cache.contains_key(&v) {
                continue;
            }
            pending.push(v);
            stack.extend(self.nodes[v.0].op.children());
        }
        pending.sort_unstable();
        for v in pending {
            let p = self.partials_of(v)?;
            self.jet_cache.insert(v, p);
        }
        Ok(self.jet_cache[&root].clone())
    }

    fn cached(&self, v: Var) -> Partials {
        self.jet_cache[&v].clone()
    }

    fn partials_of(&mut self, v: Var) -> Result<Partials> {
        let dim = self.dim();
        let n = self.n_points();
        let op = self.nodes[v.0].op.clone();
        Ok(match op {
            Op::Input(i) => {
                let mut p = Partials::zero(dim);
                p.grad[i] = Some(self.fill(1.0, n, 1));
                p
            }
            Op::Param { .. } | Op::Const => Partials::zero(dim),
            Op::Add(a, b) => {
                let (pa, pb) = (self.cached(a), self.cached(b));
                self.combine(&pa, &pb, |t, x, y| t.opt_add(x, y))?
            }
            Op::Sub(a, b) => {
                let (pa, pb) = (self.cached(a), self.cached(b));
                self.combine(&pa, &pb, |t, x, y| t.opt_sub(x, y))?
            }
            Op::Scale(a, c) => {
                let pa = self.cached(a);
                self.map(&pa, |t, x| Ok(t.scale(x, c)))?
            }
            Op::Shift(a) => self.cached(a),
            Op::Mul(a, b) => {
                let (pa, pb) = (self.cached(a), self.cached(b));
                self.product_rule(a, &pa, b, &pb)?
            }
            Op::Div(a, b) => {
                let (pa, pb) = (self.cached(a), self.cached(b));
                if pb.is_zero() {
                    self.map(&pa, |t, x| t.div(x, b))?
                } else {
                    let r = self.recip(b);
                    let pr = self.partials(r)?;
                    self.product_rule(a, &pa, r, &pr)?
                }
            }
            Op::Unary { func, order, arg } => {
                let pz = self.cached(arg);
                self.chain_rule(func, order, arg, &pz)?
            }
            Op::MatMul { x, w } => {
                if !self.cached(w).is_zero() {
                    return Err(Error::Unsupported(
                        "matmul with a spatially varying right operand".into(),
                    ));
                }
                let px = self.cached(x);
                self.map(&px, |t, g| t.matmul(g, w))?
            }
            Op::AddRow { x, row } => {
                if !self.cached(row).is_zero() {
                    return Err(Error::Unsupported("spatially varying bias row".into()));
                }
                self.cached(x)
            }
            Op::Concat(parts) => self.concat_partials(&parts)?,
            Op::Mean(_) => {
                return Err(Error::Unsupported(
                    "spatial derivative of a cross-point reduction".into(),
                ))
            }
            Op::Detach(a) => {
                let pa = self.cached(a);
                self.map(&pa, |t, x| Ok(t.detach(x)))?
            }
        })
    }

    fn map(&mut self, p: &Partials, mut f: impl FnMut(&mut Tape, Var) -> Result<Var>) -> Result<Partials> {
        let mut grad = Vec::with_capacity(p.grad.len());
        for g in &p.grad {
            grad.push(match g {
                Some(g) => Some(f(self, *g)?),
                None => None,
            });
        }
        let lap = match p.lap {
            Some(l) => Some(f(self, l)?),
            None => None,
        };
        Ok(Partials { grad, lap })
    }

    fn combine(
        &mut self,
        a: &Partials,
        b: &Partials,
        mut f: impl FnMut(&mut Tape, Option<Var>, Option<Var>) -> Result<Option<Var>>,
    ) -> Result<Partials> {
        let mut grad = Vec::with_capacity(a.grad.len());
        for (x, y) in a.grad.iter().zip(&b.grad) {
            grad.push(f(self, *x, *y)?);
        }
        let lap = f(self, a.lap, b.lap)?;
        Ok(Partials { grad, lap })
    }

    fn opt_add(&mut self, x: Option<Var>, y: Option<Var>) -> Result<Option<Var>> {
        Ok(match (x, y) {
            (Some(x), Some(y)) => Some(self.add(x, y)?),
            (Some(x), None) => Some(x),
            (None, y) => y,
        })
    }

    fn opt_sub(&mut self, x: Option<Var>, y: Option<Var>) -> Result<Option<Var>> {
        Ok(match (x, y) {
            (Some(x), Some(y)) => Some(self.sub(x, y)?),
            (Some(x), None) => Some(x),
            (None, Some(y)) => Some(self.neg(y)),
            (None, None) => None,
        })
    }

    fn opt_mul(&mut self, x: Option<Var>, y: Var) -> Result<Option<Var>> {
        x.map(|x| self.mul(x, y)).transpose()
    }

    fn opt_sum(&mut self, terms: Vec<Var>) -> Result<Option<Var>> {
        if terms.is_empty() {
            Ok(None)
        } else {
            self.sum_all(&terms).map(Some)
        }
    }

    /// `(ab)_i = a_i b + a b_i`, `Δ(ab) = Δa b + a Δb + 2 Σ a_i b_i`.
    fn product_rule(&mut self, a: Var, pa: &Partials, b: Var, pb: &Partials) -> Result<Partials> {
        let mut grad = Vec::with_capacity(pa.grad.len());
        let mut cross = Vec::new();
        for (ai, bi) in pa.grad.iter().zip(&pb.grad) {
            let left = self.opt_mul(*ai, b)?;
            let right = self.opt_mul(*bi, a)?;
            grad.push(self.opt_add(left, right)?);
            if let (Some(ai), Some(bi)) = (ai, bi) {
                cross.push(self.mul(*ai, *bi)?);
            }
        }
        let mut terms = Vec::new();
        if let Some(t) = self.opt_mul(pa.lap, b)? {
            terms.push(t);
        }
        if let Some(t) = self.opt_mul(pb.lap, a)? {
            terms.push(t);
        }
        if let Some(c) = self.opt_sum(cross)? {
            terms.push(self.scale(c, 2.0));
        }
        let lap = self.opt_sum(terms)?;
        Ok(Partials { grad, lap })
    }

    /// `h = f^(k)(z)`: `h_i = f^(k+1)(z) z_i`,
    /// `Δh = f^(k+1)(z) Δz + f^(k+2)(z) Σ z_i²`.
    fn chain_rule(&mut self, func: UnaryFn, order: u32, z: Var, pz: &Partials) -> Result<Partials> {
        if pz.is_zero() {
            return Ok(Partials::zero(pz.grad.len()));
        }
        let d1 = self.unary_derivative(func, order + 1, z);
        let mut grad = Vec::with_capacity(pz.grad.len());
        let mut squares = Vec::new();
        for zi in &pz.grad {
            grad.push(self.opt_mul(*zi, d1)?);
            if let Some(zi) = zi {
                squares.push(self.mul(*zi, *zi)?);
            }
        }
        let mut terms = Vec::new();
        if let Some(t) = self.opt_mul(pz.lap, d1)? {
            terms.push(t);
        }
        if let Some(sq) = self.opt_sum(squares)? {
            let d2 = self.unary_derivative(func, order + 2, z);
            terms.push(self.mul(d2, sq)?);
        }
        let lap = self.opt_sum(terms)?;
        Ok(Partials { grad, lap })
    }

    fn concat_partials(&mut self, parts: &[Var]) -> Result<Partials> {
        let ps: Vec<Partials> = parts.iter().map(|&p| self.cached(p)).collect();
        let dim = self.dim();
        let pick = |tape: &mut Tape, select: &dyn Fn(&Partials) -> Option<Var>| -> Result<Option<Var>> {
            if ps.iter().all(|p| select(p).is_none()) {
                return Ok(None);
            }
            let cols: Vec<Var> = parts
                .iter()
                .zip(&ps)
                .map(|(&part, p)| {
                    select(p).unwrap_or_else(|| {
                        let (r, c) = tape.shape(part);
                        tape.fill(0.0, r, c)
                    })
                })
                .collect();
            tape.concat(&cols).map(Some)
        };
        let mut grad = Vec::with_capacity(dim);
        for i in 0..dim {
            grad.push(pick(self, &|p: &Partials| p.grad[i])?);
        }
        let lap = pick(self, &|p: &Partials| p.lap)?;
        Ok(Partials { grad, lap })
    }
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};

    use super::*;

    #[test]
    fn square_polynomial_jet() {
        let pts = array![[1.5]];
        let mut tape = Tape::new(pts.view(), &[]);
        let x = tape.input(0);
        let u = tape.mul(x, x).unwrap();
        let jet = tape.spatial_jet(u).unwrap();
        let j = tape.jet_at(&jet, 0);
        assert_eq!(j.value, 2.25);
        assert_eq!(j.gradient, vec![3.0]);
        assert_eq!(j.laplacian, 2.0);
    }

    #[test]
    fn constant_function_has_zero_jet() {
        let pts = array![[0.2, 0.7, 0.1]];
        let mut tape = Tape::new(pts.view(), &[]);
        let one = tape.fill(1.0, 1, 1);
        let x = tape.input(1);
        let zero = tape.scale(x, 0.0);
        let u = tape.add(zero, one).unwrap();
        let jet = tape.spatial_jet(u).unwrap();
        let j = tape.jet_at(&jet, 0);
        assert_eq!(j.value, 1.0);
        assert_eq!(j.gradient, vec![0.0, 0.0, 0.0]);
        assert_eq!(j.laplacian, 0.0);
    }

    #[test]
    fn quotient_jet_matches_closed_form() {
        // u = x / (1 + x²): u' = (1 - x²)/(1 + x²)², u'' = 2x(x² - 3)/(1 + x²)³
        let x0 = 0.7_f64;
        let pts = array![[x0]];
        let mut tape = Tape::new(pts.view(), &[]);
        let x = tape.input(0);
        let x2 = tape.square(x);
        let den = tape.shift(x2, 1.0);
        let u = tape.div(x, den).unwrap();
        let jet = tape.spatial_jet(u).unwrap();
        let j = tape.jet_at(&jet, 0);
        let q = 1.0 + x0 * x0;
        assert!((j.gradient[0] - (1.0 - x0 * x0) / (q * q)).abs() < 1e-14);
        assert!((j.laplacian - 2.0 * x0 * (x0 * x0 - 3.0) / (q * q * q)).abs() < 1e-14);
    }

    #[test]
    fn reductions_are_not_pointwise() {
        let pts = array![[0.2], [0.4]];
        let mut tape = Tape::new(pts.view(), &[]);
        let x = tape.input(0);
        let m = tape.mean(x);
        assert!(matches!(tape.spatial_jet(m), Err(Error::Unsupported(_))));
    }

    #[test]
    fn spatially_varying_weights_rejected() {
        let pts = array![[0.2], [0.4]];
        let mut tape = Tape::new(pts.view(), &[]);
        let x = tape.input(0);
        let w = tape.constant(Array2::from_elem((1, 1), 2.0));
        let ok = tape.matmul(x, w).unwrap();
        assert!(tape.spatial_jet(ok).is_ok());
        let bad = tape.matmul(w, x).unwrap();
        assert!(matches!(tape.spatial_jet(bad), Err(Error::Unsupported(_))));
    }
}
