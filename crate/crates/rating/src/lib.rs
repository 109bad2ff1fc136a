//! Regularized plus-minus ratings: plain ridge and the extended model with
//! age curve, league factors, home advantage, red cards, segment weights and
//! shrinkage towards similar teammates.

pub mod age;
pub mod assemble;
mod error;
pub mod evaluate;
pub mod io;
pub mod model;
mod params;
pub mod segment;
pub mod sparse;
pub mod synthetic;

pub use age::{age_interpolation, AgeWeights};
pub use assemble::{assemble_system, Assembled, VariableIndex};
pub use error::RatingError;
pub use evaluate::{evaluate_ratings, split_half_correlation, Evaluation, OrderedLogit};
pub use model::{fit, FitReport, RatingModel};
pub use params::{Mode, RatingParams};
pub use segment::{segment_weight, Corpus, PlayerInfo, SegmentRecord};
