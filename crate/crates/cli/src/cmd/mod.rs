pub mod eval;
pub mod infer;
pub mod refine;
pub mod synth;
pub mod train;
