//! File formats, bundled measurements and command line of the geospot
//! training cost model. The model itself lives in `geospot-core`.

pub mod cli;
pub mod error;
pub mod load;
pub mod report;
pub mod reproduce;
pub mod run;
pub mod schema;

pub use error::LoadError;
pub use load::{data_dir, scenario_to_json, Loader};
pub use run::{evaluate, sweep, Evaluated, Metrics, RunError};
