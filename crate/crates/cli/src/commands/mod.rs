pub mod eval;
pub mod gradcheck;
pub mod make_model;
pub mod make_task;
pub mod matching;
pub mod pool;
pub mod synth;
pub mod train;
