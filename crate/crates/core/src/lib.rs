//! Crowd cross-validation for crowd-sensed data.
//!
//! A crowd-sensed dataset is condensed into a profile of representative
//! values and probability masses (the interim belief). A validating crowd
//! of workers who did not contribute data is then approached with rating
//! tasks through a progressive, privacy-aware push campaign. The collected
//! ratings reshape the interim belief into a posterior, which in turn
//! drives reputation updates for raters and payment revisions for the
//! original contributors.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`profiling`] — histogram profile of the raw readings
//! * [`sampling`] — value-selection strategies for rating tasks
//! * [`registry`] — worker records and rater selection
//! * [`pacap`] — the progressive push campaign engine
//! * [`reshaping`] — consolidating ratings into the posterior belief
//! * [`incentives`] — reputation updates and payment revision
//! * [`simulator`] — synthetic population, datasets, and end-to-end scenarios

pub mod cli;
pub mod incentives;
pub mod pacap;
pub mod profiling;
pub mod registry;
pub mod reshaping;
pub mod sampling;
pub mod simulator;

pub use incentives::{ContributorPayment, IncentiveReport, PaymentFunction, RaterUpdate};
pub use pacap::{CampaignConfig, CampaignOutcome, CycleStats, Rating, RatingTask};
pub use profiling::{build_profile, Profile, ProfileBin, Reading};
pub use registry::{PrivacyAction, Registry, RegistryParams, Worker};
pub use reshaping::{RatingScale, ReshapedProfile};
pub use sampling::SamplingStrategy;
pub use simulator::{ScenarioCase, ScenarioReport, ScenarioSpec};

/// Errors surfaced by the validation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no data to profile")]
    NoData,
    #[error("non-finite value {value} from contributor {contributor} (reading {index})")]
    NonFiniteReading {
        index: usize,
        contributor: String,
        value: f64,
    },
    #[error("bin width must be positive, got {0}")]
    InvalidBinWidth(f64),
    #[error("profile has no bins")]
    EmptyProfile,
    #[error("clock regression: time {now} precedes last offer at {last_offer}")]
    ClockRegression { now: f64, last_offer: f64 },
    #[error("neutral rating leaked into effective set (rater {0})")]
    NeutralLeak(String),
    #[error("rating references bin {index} but profile has {bins} bins")]
    RatingIndexOutOfRange { index: usize, bins: usize },
    #[error("score {0} is not in the rating scale")]
    ScoreNotInScale(i32),
    #[error("inconsistent rating count: tally is nonzero but the effective count is 0")]
    InconsistentRatingCount,
    #[error("degenerate interim belief p={0}")]
    DegenerateBelief(f64),
    #[error("budget renormalization undefined: revised payments sum to zero")]
    BudgetUndefined,
    #[error("invalid rating scale: {0}")]
    InvalidScale(String),
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unknown sampling strategy {0:?} (expected random|proportional|reverse|inverse)")]
    UnknownStrategy(String),
    #[error("unknown worker id {0}")]
    UnknownWorker(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
