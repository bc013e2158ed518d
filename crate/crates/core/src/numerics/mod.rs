//! Dense linear algebra and the numeric building blocks shared by the learners.

pub mod autodiff;
pub mod entropy;
pub mod expm;
pub mod gradcheck;
pub mod kmeans;
pub mod matrix;
pub mod optim;
pub mod params;
pub mod pca;
pub mod sparse;

pub use autodiff::{Gradients, Graph, Var};
pub use entropy::conditional_entropy;
pub use expm::{acyclicity, expm, expm_trace};
pub use gradcheck::{grad_check, grad_check_param, GradCheckReport};
pub use kmeans::{kmeans, KMeans};
pub use matrix::DenseMatrix;
pub use optim::Adam;
pub use params::{Bound, ParamId, ParamStore};
pub use pca::Pca;
pub use sparse::CsrMatrix;
