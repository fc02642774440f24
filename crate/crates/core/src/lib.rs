//! Cost accounting and design-space exploration for convolutional neural
//! network architectures.
//!
//! - [`arch`]: layer DAG, shape propagation, parameter/activation/FLOP accounting
//! - [`catalog`]: built-in reference networks and the `.cnn.json` file format
//! - [`modkit`]: declarative modifications and per-layer delta reports
//! - [`firegen`]: Fire-module networks generated from metaparameters
//! - [`scale`]: data-parallel training cost under parameter-server and tree aggregation

pub mod arch;
pub mod catalog;
pub mod firegen;
pub mod modkit;
pub mod rational;
pub mod scale;
pub mod units;
