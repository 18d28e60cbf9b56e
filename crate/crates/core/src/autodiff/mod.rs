//! Batched expression tape with nested differentiation.
//!
//! Every node of a [`Tape`] holds a 2-D array whose rows are collocation
//! points and whose columns are features, so one tape evaluates an
//! expression over a whole sample set at once. Values are computed eagerly
//! when a node is recorded.
//!
//! Two kinds of derivative are available:
//!
//! * [`Tape::spatial_jet`] propagates value, per-coordinate gradient and
//!   Laplacian of a pointwise expression forward. The jet is recorded as
//!   ordinary nodes, so anything built from it (an operator residual, a
//!   loss) is still a function of the parameters.
//! * [`Tape::param_gradient`] runs reverse accumulation from a 1x1 scalar
//!   root back to the parameter vector, passing through jet nodes.
//!
//! ```
//! use ndarray::array;
//! use pmnn::autodiff::Tape;
//!
//! let points = array![[1.5]];
//! let mut tape = Tape::new(points.view(), &[]);
//! let x = tape.input(0);
//! let u = tape.square(x);
//! let jet = tape.spatial_jet(u).unwrap();
//! assert_eq!(tape.value(jet.value)[[0, 0]], 2.25);
//! assert_eq!(tape.value(jet.gradient[0])[[0, 0]], 3.0);
//! assert_eq!(tape.value(jet.laplacian)[[0, 0]], 2.0);
//! ```

mod backward;
mod jet;
mod unary;

use std::collections::HashMap;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};

pub use jet::{JetVars, SpatialJet};
pub use unary::UnaryFn;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Input(usize),
    Param {
        offset: usize,
    },
    Const,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Unary {
        func: UnaryFn,
        order: u32,
        arg: Var,
    },
    /// `x` (n x in) times `w`ᵀ (`w` is out x in).
    MatMul {
        x: Var,
        w: Var,
    },
    /// Adds a 1 x c row to every row of `x`.
    AddRow {
        x: Var,
        row: Var,
    },
    Concat(Vec<Var>),
    Mean(Var),
    Detach(Var),
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    op: Op,
    requires_grad: bool,
}

/// Records an expression graph over a fixed batch of points and a fixed
/// parameter vector.
pub struct Tape {
    points: Array2<f64>,
    params: Vec<f64>,
    nodes: Vec<Node>,
    values: Vec<Array2<f64>>,
    inputs: Vec<Var>,
    unary_cache: HashMap<(UnaryFn, u32, Var), Var>,
    fill_cache: HashMap<(u64, usize, usize), Var>,
    jet_cache: HashMap<Var, jet::Partials>,
}

impl Tape {
    /// Creates a tape over `points` (one row per point) with the given
    /// parameter vector. One input node per coordinate is recorded up front.
    pub fn new(points: ArrayView2<'_, f64>, params: &[f64]) -> Self {
        let mut tape = Tape {
            points: points.to_owned(),
            params: params.to_vec(),
            nodes: Vec::new(),
            values: Vec::new(),
            inputs: Vec::new(),
            unary_cache: HashMap::new(),
            fill_cache: HashMap::new(),
            jet_cache: HashMap::new(),
        };
        for i in 0..points.ncols() {
            let column = tape.points.column(i).to_owned().insert_axis(Axis(1));
            let v = tape.push(Op::Input(i), column, false);
            tape.inputs.push(v);
        }
        tape
    }

    /// Like [`Tape::new`] but checks the point dimension against a declared
    /// input arity.
    pub fn with_arity(points: ArrayView2<'_, f64>, arity: usize, params: &[f64]) -> Result<Self> {
        if points.ncols() != arity {
            return Err(Error::DimensionMismatch {
                expected: arity,
                actual: points.ncols(),
                context: "point dimension vs expression arity",
            });
        }
        Ok(Tape::new(points, params))
    }

    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&self, i: usize) -> Var {
        self.inputs[i]
    }

    pub fn inputs(&self) -> Vec<Var> {
        self.inputs.clone()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.values[v.0]
    }

    /// Value of a 1x1 node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        self.values[v.0][[0, 0]]
    }

    /// Column `0` of an n x 1 node as a vector.
    pub fn column_values(&self, v: Var) -> Array1<f64> {
        self.values[v.0].column(0).to_owned()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.values[v.0].dim()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Array2<f64>, requires_grad: bool) -> Var {
        self.nodes.push(Node { op, requires_grad });
        self.values.push(value);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A `rows x cols` block of the parameter vector, row-major.
    pub fn param(&mut self, offset: usize, rows: usize, cols: usize) -> Result<Var> {
        let end = offset + rows * cols;
        if end > self.params.len() {
            return Err(Error::ParamOutOfRange {
                offset,
                end,
                len: self.params.len(),
            });
        }
        let value = Array2::from_shape_vec((rows, cols), self.params[offset..end].to_vec())
            .expect("slice length matches shape");
        Ok(self.push(Op::Param { offset }, value, true))
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(Op::Const, value, false)
    }

    /// An n x 1 constant column, one entry per point.
    pub fn column(&mut self, values: Array1<f64>) -> Result<Var> {
        if values.len() != self.n_points() {
            return Err(Error::DimensionMismatch {
                expected: self.n_points(),
                actual: values.len(),
                context: "constant column length",
            });
        }
        Ok(self.constant(values.insert_axis(Axis(1))))
    }

    pub fn scalar(&mut self, c: f64) -> Var {
        self.fill(c, 1, 1)
    }

    /// Constant array filled with `c`; identical requests share one node.
    pub fn fill(&mut self, c: f64, rows: usize, cols: usize) -> Var {
        let key = (c.to_bits(), rows, cols);
        if let Some(&v) = self.fill_cache.get(&key) {
            return v;
        }
        let v = self.constant(Array2::from_elem((rows, cols), c));
        self.fill_cache.insert(key, v);
        v
    }

    fn broadcast_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb || sb == (1, 1) {
            Ok(sa)
        } else if sa == (1, 1) {
            Ok(sb)
        } else {
            Err(Error::ShapeMismatch { op, lhs: sa, rhs: sb })
        }
    }

    fn binary_values(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.dim() == vb.dim() {
            Zip::from(va).and(vb).map_collect(|&x, &y| f(x, y))
        } else if vb.dim() == (1, 1) {
            let s = vb[[0, 0]];
            va.mapv(|x| f(x, s))
        } else {
            let s = va[[0, 0]];
            vb.mapv(|y| f(s, y))
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_shape("add", a, b)?;
        let value = self.binary_values(a, b, |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_shape("sub", a, b)?;
        let value = self.binary_values(a, b, |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Sub(a, b), value, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_shape("mul", a, b)?;
        let value = self.binary_values(a, b, |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mul(a, b), value, rg))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_shape("div", a, b)?;
        let value = self.binary_values(a, b, |x, y| x / y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Div(a, b), value, rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.values[a.0].mapv(|x| c * x);
        let rg = self.rg(a);
        self.push(Op::Scale(a, c), value, rg)
    }

    pub fn shift(&mut self, a: Var, c: f64) -> Var {
        let value = self.values[a.0].mapv(|x| x + c);
        let rg = self.rg(a);
        self.push(Op::Shift(a), value, rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// Sum of several equally shaped nodes, folded left to right.
    pub fn sum_all(&mut self, terms: &[Var]) -> Result<Var> {
        let (&first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("sum of zero terms".into()))?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// Records `func^(order)(arg)`. Repeated requests return the same node.
    pub fn unary_derivative(&mut self, func: UnaryFn, order: u32, arg: Var) -> Var {
        if let Some(&v) = self.unary_cache.get(&(func, order, arg)) {
            return v;
        }
        let value = self.unary_values(func, order, arg);
        let rg = self.rg(arg);
        let v = self.push(Op::Unary { func, order, arg }, value, rg);
        self.unary_cache.insert((func, order, arg), v);
        v
    }

    fn unary_values(&self, func: UnaryFn, order: u32, arg: Var) -> Array2<f64> {
        let z = &self.values[arg.0];
        let cached_tanh = if func == UnaryFn::Tanh && order > 0 {
            self.unary_cache.get(&(UnaryFn::Tanh, 0, arg)).copied()
        } else {
            None
        };
        match cached_tanh {
            Some(t) => Zip::from(z)
                .and(&self.values[t.0])
                .map_collect(|&z, &t| func.derivative(order, z, Some(t))),
            None => z.mapv(|z| func.derivative(order, z, None)),
        }
    }

    pub fn unary(&mut self, func: UnaryFn, a: Var) -> Var {
        self.unary_derivative(func, 0, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(UnaryFn::Tanh, a)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(UnaryFn::Sin, a)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(UnaryFn::Cos, a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(UnaryFn::Exp, a)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(UnaryFn::Square, a)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(UnaryFn::Sqrt, a)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(UnaryFn::Recip, a)
    }

    /// `x · wᵀ` for `x` of shape n x in and `w` of shape out x in.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sx.1 != sw.1 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sx,
                rhs: sw,
            });
        }
        let value = self.values[x.0].dot(&self.values[w.0].t());
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(Op::MatMul { x, w }, value, rg))
    }

    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (sx, sr) = (self.shape(x), self.shape(row));
        if sr.0 != 1 || sr.1 != sx.1 {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: sx,
                rhs: sr,
            });
        }
        let value = &self.values[x.0] + &self.values[row.0];
        let rg = self.rg(x) || self.rg(row);
        Ok(self.push(Op::AddRow { x, row }, value, rg))
    }

    /// `x · wᵀ + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let z = self.matmul(x, w)?;
        self.add_row(z, b)
    }

    /// Column-wise concatenation of nodes with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero parts".into()))?;
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: self.shape(first),
                    rhs: self.shape(p),
                });
            }
        }
        if parts.len() == 1 {
            return Ok(first);
        }
        let views: Vec<_> = parts.iter().map(|p| self.values[p.0].view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts checked");
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Op::Concat(parts.to_vec()), value, rg))
    }

    /// Mean over every entry, as a 1x1 node.
    pub fn mean(&mut self, a: Var) -> Var {
        let m = self.values[a.0].mean().unwrap_or(0.0);
        let rg = self.rg(a);
        self.push(Op::Mean(a), Array2::from_elem((1, 1), m), rg)
    }

    /// Root-mean-square over every entry: `sqrt(mean(a²))`.
    pub fn rms(&mut self, a: Var) -> Var {
        let sq = self.square(a);
        let m = self.mean(sq);
        self.sqrt(m)
    }

    /// Same value as `a`, but no parameter gradient flows through it.
    pub fn detach(&mut self, a: Var) -> Var {
        let value = self.values[a.0].clone();
        self.push(Op::Detach(a), value, false)
    }
}

/// Evaluates a scalar-output expression at every row of `points`.
///
/// `build` receives the tape and one input node per coordinate and returns
/// the output node, which must be n x 1.
pub fn evaluate<F>(points: ArrayView2<'_, f64>, arity: usize, params: &[f64], build: F) -> Result<Array1<f64>>
where
    F: FnOnce(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::with_arity(points, arity, params)?;
    let inputs = tape.inputs();
    let out = build(&mut tape, &inputs)?;
    check_column(&tape, out)?;
    Ok(tape.column_values(out))
}

/// Value, gradient and Laplacian of a scalar-output expression at every row
/// of `points`.
pub fn spatial_jets<F>(points: ArrayView2<'_, f64>, arity: usize, params: &[f64], build: F) -> Result<Vec<SpatialJet>>
where
    F: FnOnce(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::with_arity(points, arity, params)?;
    let inputs = tape.inputs();
    let out = build(&mut tape, &inputs)?;
    check_column(&tape, out)?;
    let jet = tape.spatial_jet(out)?;
    Ok((0..tape.n_points()).map(|row| tape.jet_at(&jet, row)).collect())
}

/// Gradient of a scalar expression with respect to the parameter vector.
pub fn param_gradient<F>(points: ArrayView2<'_, f64>, params: &[f64], build: F) -> Result<Vec<f64>>
where
    F: FnOnce(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new(points, params);
    let inputs = tape.inputs();
    let root = build(&mut tape, &inputs)?;
    tape.param_gradient(root)
}

fn check_column(tape: &Tape, v: Var) -> Result<()> {
    let shape = tape.shape(v);
    if shape.1 != 1 || shape.0 != tape.n_points() {
        return Err(Error::ShapeMismatch {
            op: "scalar output",
            lhs: shape,
            rhs: (tape.n_points(), 1),
        });
    }
    Ok(())
}
