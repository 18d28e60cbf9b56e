//! Elementwise primitives and their derivatives of arbitrary order.
//!
//! A unary node stores `(func, order)` and evaluates `func^(order)(z)`.
//! Jets need orders `k+1` and `k+2` of a node of order `k`, the reverse
//! pass needs order `k+1`, so every primitive here supplies closed forms
//! for all orders.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryFn {
    Tanh,
    Sin,
    Cos,
    Exp,
    Square,
    Sqrt,
    Recip,
}

impl UnaryFn {
    /// Evaluates the `order`-th derivative at `z`.
    ///
    /// For `Tanh`, `tanh_z` may carry a precomputed `tanh(z)`.
    #[inline]
    pub fn derivative(self, order: u32, z: f64, tanh_z: Option<f64>) -> f64 {
        match self {
            UnaryFn::Tanh => {
                let t = tanh_z.unwrap_or_else(|| z.tanh());
                tanh_derivative(order, t)
            }
            UnaryFn::Sin => match order % 4 {
                0 => z.sin(),
                1 => z.cos(),
                2 => -z.sin(),
                _ => -z.cos(),
            },
            UnaryFn::Cos => match order % 4 {
                0 => z.cos(),
                1 => -z.sin(),
                2 => -z.cos(),
                _ => z.sin(),
            },
            UnaryFn::Exp => z.exp(),
            UnaryFn::Square => match order {
                0 => z * z,
                1 => 2.0 * z,
                2 => 2.0,
                _ => 0.0,
            },
            UnaryFn::Sqrt => falling_factorial(0.5, order) * z.powf(0.5 - order as f64),
            UnaryFn::Recip => falling_factorial(-1.0, order) * z.powi(-1 - order as i32),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Tanh => "tanh",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Exp => "exp",
            UnaryFn::Square => "square",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Recip => "recip",
        }
    }
}

/// `p (p-1) ... (p-k+1)`.
fn falling_factorial(p: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (p - i as f64))
}

/// Derivatives of tanh are polynomials in `t = tanh(z)`:
/// `P_0 = t`, `P_{k+1} = P_k'(t) (1 - t^2)`.
#[inline]
fn tanh_derivative(order: u32, t: f64) -> f64 {
    let s = 1.0 - t * t;
    match order {
        0 => t,
        1 => s,
        2 => -2.0 * t * s,
        3 => s * (6.0 * t * t - 2.0),
        _ => eval_poly(&tanh_poly(order), t),
    }
}

fn tanh_poly(order: u32) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..order {
        // derivative of p
        let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
        // times (1 - t^2)
        let mut next = vec![0.0; dp.len() + 2];
        for (i, c) in dp.iter().enumerate() {
            next[i] += c;
            next[i + 2] -= c;
        }
        p = next;
    }
    p
}

fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, z: f64) -> f64 {
        let h = 1e-5;
        (f(z + h) - f(z - h)) / (2.0 * h)
    }

    #[test]
    fn each_order_is_derivative_of_previous() {
        let funcs = [
            UnaryFn::Tanh,
            UnaryFn::Sin,
            UnaryFn::Cos,
            UnaryFn::Exp,
            UnaryFn::Square,
            UnaryFn::Sqrt,
            UnaryFn::Recip,
        ];
        for f in funcs {
            for order in 0..5 {
                for &z in &[0.3, 0.9, 1.7] {
                    let fd = central(|x| f.derivative(order, x, None), z);
                    let exact = f.derivative(order + 1, z, None);
                    assert!(
                        (fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                        "{} order {} at {}: fd {} vs {}",
                        f.name(),
                        order + 1,
                        z,
                        fd,
                        exact
                    );
                }
            }
        }
    }

    #[test]
    fn tanh_closed_forms_match_polynomial_recursion() {
        for order in 0..4 {
            let poly = tanh_poly(order);
            for &t in &[-0.7, 0.0, 0.4, 0.95] {
                assert!((eval_poly(&poly, t) - tanh_derivative(order, t)).abs() < 1e-14);
            }
        }
    }
}
