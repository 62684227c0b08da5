//! Link-level Monte Carlo simulation of spatial and time-indexed index
//! modulation over Rayleigh fading MIMO channels.
//!
//! The crate covers four schemes: spatial modulation (SM), parallel SM with
//! transmit antenna grouping (PSM), and their time-indexed variants (TI-SM,
//! TI-PSM), in which only `T_a` of the `T` slots of a frame are active and the
//! choice of active slots carries extra bits.
//!
//! Pipeline: [`scheme`] validates a configuration, [`mapper`] turns bits into
//! frame signals, [`channel`] applies fading, noise and channel estimation
//! errors, [`detector`] runs maximum-likelihood detection and [`engine`]
//! estimates bit error rates. [`experiment`] and [`report`] back the
//! command-line tool.

pub mod channel;
pub mod constellation;
pub mod detector;
pub mod engine;
pub mod experiment;
pub mod mapper;
pub mod report;
pub mod scheme;

pub use constellation::{build_constellation, Constellation, ConstellationFamily};
pub use engine::{BerRecord, CsiMode, SimOptions, Simulator, StoppingRule};
pub use scheme::{validate, SchemeConfig, SchemeKind, ValidatedConfig};
