//! Outage analysis and power allocation for downlink NOMA where every user
//! feeds back a single bit of channel state information.
//!
//! Each user compares its channel power gain `|h|^2` against a threshold
//! `alpha` and reports one bit. The base station only sees how many users
//! fell below the threshold (the feedback event `n`), orders the users
//! accordingly and picks a power allocation per event. The crate provides:
//!
//! * [`model`]: system parameters, event probabilities, conditional channel
//!   CDFs and the power/threshold (`zeta`) variable transforms.
//! * [`analytic`]: exact common outage probability (COP) evaluation.
//! * [`mc`]: a seeded, parallel Monte Carlo simulator of fading, feedback,
//!   ordering and SIC decoding.
//! * [`optshort`]: optimal allocation under a per-block power budget.
//! * [`optlong`]: asymptotically optimal allocation under an average power
//!   budget.
//! * [`baselines`]: TDMA, fixed NOMA, no-feedback and perfect-CSI schemes.
//! * [`diversity`]: log-log slope fitting for diversity estimates.
//! * [`search`]: the threshold grid search with golden-section refinement.

pub mod analytic;
pub mod baselines;
pub mod diversity;
mod error;
mod linalg;
pub mod mc;
pub mod model;
pub mod optlong;
pub mod optshort;
pub mod search;

pub use analytic::{CopBreakdown, Coupling, EventTerm};
pub use error::{Error, Result};
pub use mc::{Access, SimReport, Simulator, TrialOutcome};
pub use model::{FeedbackEvent, PowerMatrix, SystemConfig, ZetaMatrix};
pub use optlong::LongTermSolution;
pub use optshort::{EventSolution, ShortTermSolution, SolverOptions};
pub use search::GridOptions;
