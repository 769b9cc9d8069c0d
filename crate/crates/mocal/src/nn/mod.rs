//! Tape-based autodiff and the transformer layers built on it.

pub mod adam;
pub mod layers;
pub mod params;
pub mod tensor;

pub use adam::Adam;
pub use params::{collect_grads, mount, Mounted, ParamId, ParamStore};
pub use tensor::{Grads, Mat, Tape, Var};
