//! Dense tensors, an operation tape with reverse-mode gradients, and a
//! finite-difference gradient checker.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, relative_error, GradCheckReport, ParamCheck, RELATIVE_ERROR_FLOOR};
pub use tape::{softmax, Adjoints, Tape, Var, NORM_EPS};
pub use tensor::{Gradients, ParamId, ParamSet, Tensor};

pub(crate) use tape::{gaussian_density, sq_dist};
