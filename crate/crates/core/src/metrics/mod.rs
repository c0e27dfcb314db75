//! Margins, smoothed histograms and the KL-divergence-of-margins score.
//!
//! Everything here is a pure function of its inputs.

mod divergence;
mod histogram;
mod klom;
mod margin;
mod sensitivity;
mod stats;
mod teacher;
mod tensor;

pub use divergence::kl_divergence;
pub use histogram::{
    build_histogram_pair, HistogramConfig, SmoothedHistogramPair, DEFAULT_BINS, DEFAULT_EPSILON,
};
pub use klom::{klom_point, klom_point_with, klom_set, klom_set_with, KlomReport};
pub use margin::compute_margin;
pub use sensitivity::{sensitivity_curve, SensitivityRow, DEFAULT_N_GRID};
pub use stats::{mean, percentile, DistributionSummary};
pub use teacher::{
    teacher_forcing_klom, teacher_forcing_report, TeacherForcingReport, TokenMarginTensor,
};
pub use tensor::{clip_margins, clip_value, MarginTensor, Split, CLIP_BOUND};
