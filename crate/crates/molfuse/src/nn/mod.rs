//! Training substrate: autodiff tape, parameter store, Glorot init, Adam, and
//! finite-difference gradient checking. Everything runs in f64.

mod adam;
mod gradcheck;
mod graph;
mod init;
mod params;

pub use adam::{Adam, LrTable};
pub use gradcheck::{check as gradient_check, GradCheckReport};
pub use graph::{softmax, Graph, Var};
pub use init::{glorot, zeros_row};
pub use params::{Bound, ParamSet};

use ndarray::Array2;

/// Row vector as a 1×d array.
pub fn row(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape")
}

/// Linear layer application: x·W + b.
pub fn linear(g: &mut Graph, x: Var, w: Var, b: Var) -> Var {
    let y = g.matmul(x, w, false, false);
    g.add_row(y, b)
}

/// Two-layer MLP with ReLU: relu(x·W1 + b1)·W2 + b2.
pub fn mlp2(g: &mut Graph, x: Var, w1: Var, b1: Var, w2: Var, b2: Var) -> Var {
    let h = linear(g, x, w1, b1);
    let h = g.relu(h);
    linear(g, h, w2, b2)
}
