//! Fully connected tanh network used as the trial eigenfunction.
//!
//! Parameters live in one flat vector. For each layer `l` with `n_in`
//! inputs and `n_out` outputs the layout is the weight matrix
//! (`n_out x n_in`, row-major) followed by the bias (`n_out`). Hidden layers
//! use tanh, the output layer is affine.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 4] = b"PMNN";
const CHECKPOINT_VERSION: u32 = 1;

/// Number of parameters of a network with the given layer widths.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JsonCheckpoint {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) || layer_sizes.last() != Some(&1) {
        return Err(Error::InvalidLayers(layer_sizes.to_vec()));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(layer_sizes));
        for w in layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            params.extend((0..n_in * n_out).map(|_| dist.sample(&mut rng)));
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let expected = param_count(layer_sizes);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
                context: "parameter vector length",
            });
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of layer `l`'s weight matrix and bias in the flat vector.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let w_off = param_count(&self.layer_sizes[..=l]);
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        (w_off, w_off + n_in * n_out)
    }

    pub fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        let (w_off, b_off) = self.layer_offsets(l);
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        ArrayView2::from_shape((n_out, n_in), &self.params[w_off..b_off]).expect("layout")
    }

    pub fn bias(&self, l: usize) -> ArrayView1<'_, f64> {
        let (_, b_off) = self.layer_offsets(l);
        ArrayView1::from(&self.params[b_off..b_off + self.layer_sizes[l + 1]])
    }

    /// Records the network output on `tape`, reading parameters from the
    /// tape's parameter vector starting at offset 0.
    pub fn forward_expr(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Var> {
        if tape.params().len() < self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                actual: tape.params().len(),
                context: "tape parameter vector",
            });
        }
        let mut x = tape.concat(inputs)?;
        let width = tape.shape(x).1;
        if width != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                actual: width,
                context: "network input width",
            });
        }
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let (w_off, b_off) = self.layer_offsets(l);
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = tape.param(w_off, n_out, n_in)?;
            let b = tape.param(b_off, 1, n_out)?;
            let z = tape.affine(x, w, b)?;
            x = if l == last { z } else { tape.tanh(z) };
        }
        Ok(x)
    }

    /// Plain numeric forward pass over the rows of `inputs`.
    pub fn forward_values(&self, inputs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if inputs.ncols() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                actual: inputs.ncols(),
                context: "network input width",
            });
        }
        let mut x: Array2<f64> = inputs.to_owned();
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let mut z = x.dot(&self.weight(l).t());
            z += &self.bias(l).insert_axis(Axis(0));
            if l != last {
                z.mapv_inplace(f64::tanh);
            }
            x = z;
        }
        Ok(x.column(0).to_owned())
    }

    pub fn to_json(&self) -> Result<String> {
        let ckpt = JsonCheckpoint {
            layer_sizes: self.layer_sizes.clone(),
            weights: (0..self.n_layers())
                .map(|l| self.weight(l).iter().copied().collect())
                .collect(),
            biases: (0..self.n_layers()).map(|l| self.bias(l).to_vec()).collect(),
        };
        Ok(serde_json::to_string_pretty(&ckpt)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: JsonCheckpoint = serde_json::from_str(text)?;
        validate_sizes(&ckpt.layer_sizes)?;
        let n_layers = ckpt.layer_sizes.len() - 1;
        if ckpt.weights.len() != n_layers || ckpt.biases.len() != n_layers {
            return Err(Error::Checkpoint("layer count disagrees with layer_sizes".into()));
        }
        let mut params = Vec::with_capacity(param_count(&ckpt.layer_sizes));
        for (l, (w, b)) in ckpt.weights.iter().zip(&ckpt.biases).enumerate() {
            let (n_in, n_out) = (ckpt.layer_sizes[l], ckpt.layer_sizes[l + 1]);
            if w.len() != n_in * n_out || b.len() != n_out {
                return Err(Error::Checkpoint(format!("layer {l} has wrong block sizes")));
            }
            params.extend_from_slice(w);
            params.extend_from_slice(b);
        }
        Mlp::from_params(&ckpt.layer_sizes, params)
    }

    /// Binary layout: `b"PMNN"`, u32 version, u32 layer count, u32 widths,
    /// then the flat parameter vector as f64. All little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.layer_sizes.len() + 8 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.layer_sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(Error::Checkpoint("truncated".into()));
            }
            let (head, tail) = cursor.split_at(n);
            cursor = tail;
            Ok(head)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let version = read_u32(take(4)?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let n = read_u32(take(4)?) as usize;
        let mut sizes = Vec::with_capacity(n);
        for _ in 0..n {
            sizes.push(read_u32(take(4)?) as usize);
        }
        validate_sizes(&sizes)?;
        let count = param_count(&sizes);
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            params.push(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
        }
        if !cursor.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Mlp::from_params(&sizes, params)
    }

    /// Writes a checkpoint; `.json` extension selects JSON, anything else the
    /// binary layout.
    pub fn save(&self, path: &Path) -> Result<()> {
        if path.extension().is_some_and(|e| e == "json") {
            std::fs::write(path, self.to_json()?)?;
        } else {
            std::fs::write(path, self.to_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "json") {
            Mlp::from_json(&std::fs::read_to_string(path)?)
        } else {
            Mlp::from_bytes(&std::fs::read(path)?)
        }
    }
}
