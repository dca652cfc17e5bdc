//! Differentiable silhouette rendering of knotted tubes and gradient-based
//! search over knot embeddings.

pub mod autodiff;
pub mod cli;
pub mod geometry;
pub mod io;
pub mod knot;
pub mod loss;
pub mod optimize;
pub mod render;
pub mod targets;
