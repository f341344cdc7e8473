//! Query complexity classification: min-hop labeling, a hashed-feature
//! logistic classifier, and feedback adaptation.

mod features;
mod labeling;
mod model;

pub use features::{
    featurize, EncoderConfig, FeatureVector, HashingEncoder, QueryEncoder, STAT_FEATURES,
};
pub use labeling::{compute_min_hop, label_query};
pub use model::{
    featurize_labeled, feedback_budget, train, ClassProbabilities, ClassifierModel, Complexity,
    ComplexityLabel, LinearDecoder, Prediction, TrainParams, TrainReport,
};
