//! Training small dense networks with Adam, BFGS, L-BFGS and
//! Levenberg-Marquardt, plus the sinc regression and Burgers PINN problems
//! used to compare them.

pub mod linalg;
pub mod net;
pub mod optim;
pub mod problems;
pub mod harness;
