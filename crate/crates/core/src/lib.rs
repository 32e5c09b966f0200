//! Parallel logistic networks fitted by gradient descent on a penalized
//! empirical risk, with numeric verifiers for the approximation and
//! optimization guarantees behind the estimate.

mod batch;
pub mod constructions;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod net;
pub mod report;
pub mod suites;
pub mod theory;

pub use error::{Error, Result};
pub use estimator::{
    predict, schedule, train, train_from, Constants, Dataset, Hyperparams, ScheduleMode,
    TrainOptions, TrainOutcome,
};
pub use net::{evaluate, evaluate_many, forward, logistic, network_gradient, Topology, WeightIndex, WeightVector};
