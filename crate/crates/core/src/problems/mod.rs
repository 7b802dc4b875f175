//! Objectives for the optimizers: least-squares regression of `sinc(10x)` and
//! the physics-informed residual of the viscous Burgers equation.

mod burgers;
mod sinc;

use thiserror::Error;

use crate::net::NetError;

pub use burgers::{
    burgers_residual, evaluate_field, make_burgers_problem, pinn_loss, write_field_csv, BurgersConfig,
    BurgersObjective, BurgersProblem, FieldPoint, InitialCondition,
};
pub use sinc::{
    make_sinc_dataset, make_sinc_dataset_with, sinc_target, sinc_target_with, SincConvention, SincDataset,
    SincProblem, SINC_DOMAIN,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem size: {0}")]
    Size(String),
    #[error("network does not fit the problem: {0}")]
    Spec(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
