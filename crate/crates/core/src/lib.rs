pub mod anomaly;
pub mod bench;
pub mod error;
pub mod network;
pub mod optim;
pub mod pipeline;
pub mod scalar;
pub mod timeseries;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use anomaly::{AnomalyReport, ConsensusReport};
pub use network::{Mode, NetworkSpec};
pub use pipeline::{Recipe, TrainerConfig};

pub type Network64 = network::Network<f64>;
pub type Network32 = network::Network<f32>;
pub type Batch64 = network::Batch<f64>;
pub type Batch32 = network::Batch<f32>;
pub type EventSeries64 = timeseries::EventSeries<f64>;
pub type EventSeries32 = timeseries::EventSeries<f32>;
pub type TrainReport64 = optim::TrainReport<f64>;
pub type TrainReport32 = optim::TrainReport<f32>;
pub type ResidualSeries64 = anomaly::ResidualSeries<f64>;
