//! Performance analysis of shadowing-side-information relay selection in
//! dual-hop amplify-and-forward links over extended generalized-K fading.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod fading;
pub mod montecarlo;
pub mod perfkernel;
pub mod quad;
pub mod selection;
pub mod specfun;

pub use engine::{
    amount_of_fading, aup, aup_gk_fastpath, end_mgf, moments, table1_links, EngineConfig,
    PerfResult, Protocol, RelayLink, Scenario, UStrategy,
};
pub use error::{Error, Result};
pub use fading::EgkParams;
pub use montecarlo::{selection_frequencies, simulate, simulate_multi, McConfig, McEstimate};
pub use perfkernel::{Modulation, PerfKind, PerfSpec};
pub use quad::{QuadResult, QuadTolerance};
pub use selection::{selection_probabilities, SelectionProbabilities};
