//! Battery-swapping rover fleet toolkit: docking guide geometry, success-region
//! robustness, fleet sizing, hub coverage, radiative cooling and a
//! discrete-event swap simulator.

pub mod coverage;
pub mod curve;
pub mod docksim;
pub mod error;
pub mod fleetsim;
pub mod geom;
pub mod hull;
pub mod optimize;
pub mod pose;
pub mod rng;
pub mod scenario;
pub mod targets;
pub mod thermal;
pub mod units;

pub use error::{Error, Result, ValidationError};
pub use pose::Pose2D;
pub use rng::{make_rng, SimRng};
pub use scenario::{load_scenario, save_scenario, FleetSpec, Scenario, ThermalBody};
