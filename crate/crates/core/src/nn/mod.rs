//! A small CNN stack with hand-rolled backprop.
//!
//! Everything is generic over the float type: training runs in `f32`
//! for speed, while gradient checks and strict numerical tests
//! instantiate the same code at `f64`.

mod adam;
mod checkpoint;
mod conv;
mod network;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use conv::Conv2d;
pub use network::{mse, mse_grad, output_rows, ParamMut, SRNetwork, SRNetworkConfig, MIN_INPUT_ROWS};

use ndarray::NdFloat;
use num_traits::FromPrimitive;

/// Float type the network can be instantiated at.
pub trait Scalar: NdFloat + FromPrimitive {
    fn from_f64_(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
    fn to_f64_(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64_(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64_(self) -> f64 {
        self
    }
}
