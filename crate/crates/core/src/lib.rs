//! Exact classification of second-order natural Lagrangians and tensors built
//! from a Lorentzian metric jet and a first-order matter jet.

pub mod classifier;
pub mod curvature;
pub mod exact_ring;
pub mod jet;
pub mod solver;
pub mod symmetry;
pub mod tensor;
