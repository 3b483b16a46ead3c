pub mod blockstruct;
pub mod cli;
pub mod eigencore;
pub mod error;
pub mod fixtures;
pub mod innerflow;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod outer;
pub mod par;
pub mod selftest;

pub type C64 = num_complex::Complex<f64>;
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;
