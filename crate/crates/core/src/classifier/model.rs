//! Binary simple/complex classifier: hashed encoder plus a logistic decoder
//! trained by gradient descent on cross-entropy.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize, EncoderConfig, FeatureVector};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Simple = 0,
    Complex = 1,
}

impl Complexity {
    fn target(self) -> f64 {
        match self {
            Complexity::Simple => 0.0,
            Complexity::Complex => 1.0,
        }
    }
}

impl std::fmt::Display for Complexity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Complexity::Simple => "simple",
            Complexity::Complex => "complex",
        })
    }
}

impl std::str::FromStr for Complexity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "simple" | "0" => Ok(Complexity::Simple),
            "complex" | "1" => Ok(Complexity::Complex),
            other => Err(format!("unknown complexity label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityLabel {
    pub value: Complexity,
    pub min_hop: Option<usize>,
}

impl From<Complexity> for ComplexityLabel {
    fn from(value: Complexity) -> Self {
        Self {
            value,
            min_hop: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` runs full-batch gradient descent.
    pub batch_size: Option<usize>,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            batch_size: None,
            l2: 0.0,
            seed: 0x5eed,
        }
    }
}

impl TrainParams {
    /// Short fine-tuning schedule used for feedback adaptation.
    pub fn adaptation() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 3,
            batch_size: Some(16),
            l2: 0.0,
            seed: 0x5eed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean cross-entropy before the first epoch and after each epoch.
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub accuracy: f64,
    pub samples: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-log p(y | z)` for a logistic output, computed without overflow.
fn log_loss(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassProbabilities {
    pub simple: f64,
    pub complex: f64,
}

impl ClassProbabilities {
    fn from_logit(z: f64) -> Self {
        Self {
            simple: sigmoid(-z),
            complex: sigmoid(z),
        }
    }

    /// Argmax; an exact tie goes to `Simple`.
    pub fn label(&self) -> Complexity {
        if self.complex > self.simple {
            Complexity::Complex
        } else {
            Complexity::Simple
        }
    }

    pub fn of(&self, label: Complexity) -> f64 {
        match label {
            Complexity::Simple => self.simple,
            Complexity::Complex => self.complex,
        }
    }
}

/// Logistic decoder over a sparse feature space; `p(Complex) = σ(w·x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecoder {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearDecoder {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn probabilities(&self, x: &FeatureVector) -> ClassProbabilities {
        ClassProbabilities::from_logit(self.logit(x))
    }

    /// Mean cross-entropy over `samples`.
    pub fn loss(&self, samples: &[(FeatureVector, Complexity)]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let total: f64 = samples
            .iter()
            .map(|(x, y)| log_loss(self.logit(x), y.target()))
            .sum();
        total / samples.len() as f64
    }

    pub fn accuracy(&self, samples: &[(FeatureVector, Complexity)]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let correct = samples
            .iter()
            .filter(|(x, y)| self.probabilities(x).label() == *y)
            .count();
        correct as f64 / samples.len() as f64
    }

    /// Runs `params.epochs` of (mini-)batch gradient descent in place and
    /// returns the per-epoch loss trace.
    pub fn fit(
        &mut self,
        samples: &[(FeatureVector, Complexity)],
        params: &TrainParams,
    ) -> Result<Vec<f64>> {
        params.validate()?;
        let dim = self.weights.len();
        if let Some((x, _)) = samples.iter().find(|(x, _)| x.dim() != dim) {
            return Err(Error::Config(format!(
                "feature dim {} does not match decoder dim {dim}",
                x.dim()
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut grad = vec![0.0; dim];
        let mut touched: Vec<usize> = Vec::new();
        let mut history = Vec::with_capacity(params.epochs + 1);
        history.push(self.loss(samples));

        for _ in 0..params.epochs {
            let batch = match params.batch_size {
                Some(b) => {
                    order.shuffle(&mut rng);
                    b
                }
                None => samples.len().max(1),
            };
            for chunk in order.chunks(batch) {
                let mut bias_grad = 0.0;
                for &i in chunk {
                    let (x, y) = &samples[i];
                    let err = sigmoid(self.logit(x)) - y.target();
                    for &(j, v) in x.entries() {
                        let j = j as usize;
                        if grad[j] == 0.0 {
                            touched.push(j);
                        }
                        grad[j] += err * v;
                    }
                    bias_grad += err;
                }
                let scale = params.learning_rate / chunk.len() as f64;
                if params.l2 > 0.0 {
                    let shrink = 1.0 - params.learning_rate * params.l2;
                    self.weights.iter_mut().for_each(|w| *w *= shrink);
                }
                touched.sort_unstable();
                touched.dedup();
                for &j in &touched {
                    self.weights[j] -= scale * grad[j];
                    grad[j] = 0.0;
                }
                touched.clear();
                self.bias -= scale * bias_grad;
            }
            history.push(self.loss(samples));
        }
        Ok(history)
    }
}

/// Trained complexity classifier. Immutable once built: adaptation returns a
/// new model with `version + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub encoder: EncoderConfig,
    pub decoder: LinearDecoder,
    pub delta: usize,
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Complexity,
    /// Probability of the chosen class.
    pub probability: f64,
    pub probabilities: ClassProbabilities,
}

pub fn featurize_labeled(
    samples: &[(String, Complexity)],
    encoder: &EncoderConfig,
    workers: usize,
) -> Result<Vec<(FeatureVector, Complexity)>> {
    par::map(samples, workers, |(q, y)| {
        featurize(q, encoder).map(|x| (x, *y))
    })
    .into_iter()
    .collect()
}

/// Trains a classifier from labeled questions. Both classes must be present.
pub fn train(
    dataset: &[(String, ComplexityLabel)],
    encoder: EncoderConfig,
    delta: usize,
    params: &TrainParams,
) -> Result<(ClassifierModel, TrainReport)> {
    encoder.validate()?;
    let has = |c| dataset.iter().any(|(_, l)| l.value == c);
    if !has(Complexity::Simple) || !has(Complexity::Complex) {
        return Err(Error::DegenerateTraining(format!(
            "need both simple and complex examples among {} samples",
            dataset.len()
        )));
    }
    let labeled: Vec<(String, Complexity)> =
        dataset.iter().map(|(q, l)| (q.clone(), l.value)).collect();
    let samples = featurize_labeled(&labeled, &encoder, 0)?;
    let mut decoder = LinearDecoder::zeros(encoder.dim);
    let loss_history = decoder.fit(&samples, params)?;
    let report = TrainReport {
        final_loss: *loss_history.last().expect("history holds the initial loss"),
        accuracy: decoder.accuracy(&samples),
        samples: samples.len(),
        loss_history,
    };
    Ok((
        ClassifierModel {
            encoder,
            decoder,
            delta,
            version: 0,
        },
        report,
    ))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    format_version: u32,
    encoder: EncoderConfig,
    delta: usize,
    version: u64,
    bias: f64,
    /// Non-zero weights as `(index, value)`.
    weights: Vec<(u32, f64)>,
}

const MODEL_FORMAT: &str = "hopwise-classifier";
const MODEL_FORMAT_VERSION: u32 = 1;

impl ClassifierModel {
    pub fn featurize(&self, question: &str) -> Result<FeatureVector> {
        featurize(question, &self.encoder)
    }

    pub fn probabilities(&self, question: &str) -> Result<ClassProbabilities> {
        Ok(self.decoder.probabilities(&self.featurize(question)?))
    }

    pub fn predict_features(&self, x: &FeatureVector) -> Prediction {
        let probabilities = self.decoder.probabilities(x);
        let label = probabilities.label();
        Prediction {
            label,
            probability: probabilities.of(label),
            probabilities,
        }
    }

    pub fn predict(&self, question: &str) -> Result<Prediction> {
        Ok(self.predict_features(&self.featurize(question)?))
    }

    /// Mean cross-entropy of the model on labeled questions.
    pub fn loss(&self, samples: &[(String, Complexity)]) -> Result<f64> {
        let feats = featurize_labeled(samples, &self.encoder, 1)?;
        Ok(self.decoder.loss(&feats))
    }

    pub fn accuracy(&self, samples: &[(String, Complexity)]) -> Result<f64> {
        let feats = featurize_labeled(samples, &self.encoder, 1)?;
        Ok(self.decoder.accuracy(&feats))
    }

    /// Model with every weight and the bias negated.
    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        m.decoder.weights.iter_mut().for_each(|w| *w = -*w);
        m.decoder.bias = -m.decoder.bias;
        m
    }

    /// Fine-tunes a copy of the model on refined labels. An empty feedback
    /// list returns an unchanged copy with the same version.
    pub fn fast_adapt(
        &self,
        feedback: &[(String, Complexity)],
        params: &TrainParams,
    ) -> Result<ClassifierModel> {
        if feedback.is_empty() {
            log::warn!("fast_adapt called with no feedback; model left unchanged");
            return Ok(self.clone());
        }
        let samples = featurize_labeled(feedback, &self.encoder, 1)?;
        let mut next = self.clone();
        next.decoder.fit(&samples, params)?;
        next.version += 1;
        Ok(next)
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            format_version: MODEL_FORMAT_VERSION,
            encoder: self.encoder,
            delta: self.delta,
            version: self.version,
            bias: self.decoder.bias,
            weights: self
                .decoder
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
        };
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(input)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unexpected format `{}`",
                file.format
            )));
        }
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {}",
                file.format_version
            )));
        }
        file.encoder.validate()?;
        let mut weights = vec![0.0; file.encoder.dim];
        for (i, w) in file.weights {
            let slot = weights
                .get_mut(i as usize)
                .ok_or_else(|| Error::ModelFormat(format!("weight index {i} out of range")))?;
            *slot = w;
        }
        Ok(Self {
            encoder: file.encoder,
            decoder: LinearDecoder {
                weights,
                bias: file.bias,
            },
            delta: file.delta,
            version: file.version,
        })
    }
}

/// Largest number of records that may feed adaptation: `⌈ratio · n⌉`.
pub fn feedback_budget(ratio: f64, n: usize) -> usize {
    let raw = ratio.clamp(0.0, 1.0) * n as f64;
    // absorb representation error such as 0.1 * 30 = 3.0000000000000004
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> Vec<(String, ComplexityLabel)> {
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    (
                        format!("who founded company{i}"),
                        ComplexityLabel::from(Complexity::Simple),
                    )
                } else {
                    (
                        format!("who founded company{i} and then where was it based"),
                        ComplexityLabel::from(Complexity::Complex),
                    )
                }
            })
            .collect()
    }

    fn small_encoder() -> EncoderConfig {
        EncoderConfig {
            dim: 1 << 12,
            ngram: 2,
        }
    }

    #[test]
    fn separable_set_is_learned() {
        let (model, report) =
            train(&separable(200), small_encoder(), 2, &TrainParams::default()).unwrap();
        assert!(report.accuracy >= 0.99, "accuracy {}", report.accuracy);
        assert_eq!(model.version, 0);
        assert_eq!(
            model
                .predict("who founded company9999 and then where was it based")
                .unwrap()
                .label,
            Complexity::Complex
        );
    }

    #[test]
    fn single_class_is_degenerate() {
        let data: Vec<_> = separable(10)
            .into_iter()
            .filter(|(_, l)| l.value == Complexity::Simple)
            .collect();
        assert!(matches!(
            train(&data, small_encoder(), 2, &TrainParams::default()),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let params = TrainParams {
            epochs: 50,
            ..TrainParams::default()
        };
        let (_, report) = train(&separable(100), small_encoder(), 2, &params).unwrap();
        for w in report.loss_history.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_tie_is_simple() {
        let model = ClassifierModel {
            encoder: small_encoder(),
            decoder: LinearDecoder::zeros(small_encoder().dim),
            delta: 2,
            version: 0,
        };
        let p = model.predict("anything at all").unwrap();
        assert_eq!(p.label, Complexity::Simple);
        assert_eq!(p.probability, 0.5);
        assert!((p.probabilities.simple + p.probabilities.complex - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predict_is_pure_and_sign_flip_flips_labels() {
        let (model, _) =
            train(&separable(60), small_encoder(), 2, &TrainParams::default()).unwrap();
        let flipped = model.negated();
        for (q, _) in separable(20) {
            let a = model.predict(&q).unwrap();
            assert_eq!(a, model.predict(&q).unwrap());
            let b = flipped.predict(&q).unwrap();
            if a.probabilities.complex != 0.5 {
                assert_ne!(a.label, b.label);
            }
        }
    }

    #[test]
    fn empty_feedback_is_a_no_op() {
        let (model, _) =
            train(&separable(40), small_encoder(), 2, &TrainParams::default()).unwrap();
        let same = model.fast_adapt(&[], &TrainParams::adaptation()).unwrap();
        assert_eq!(same, model);
    }

    #[test]
    fn adaptation_bumps_version_and_leaves_original() {
        let (model, _) =
            train(&separable(40), small_encoder(), 2, &TrainParams::default()).unwrap();
        let before = model.clone();
        let fb = vec![("who founded company3".to_string(), Complexity::Complex)];
        let next = model.fast_adapt(&fb, &TrainParams::adaptation()).unwrap();
        assert_eq!(next.version, model.version + 1);
        assert_eq!(model, before);
        assert!(next.loss(&fb).unwrap() < model.loss(&fb).unwrap());
    }

    #[test]
    fn budget_is_ceiling_of_ratio() {
        assert_eq!(feedback_budget(0.25, 1000), 250);
        assert_eq!(feedback_budget(0.25, 10), 3);
        assert_eq!(feedback_budget(0.1, 30), 3);
        assert_eq!(feedback_budget(0.0, 30), 0);
        assert_eq!(feedback_budget(1.0, 7), 7);
    }

    #[test]
    fn model_file_round_trip() {
        let (model, _) =
            train(&separable(40), small_encoder(), 2, &TrainParams::default()).unwrap();
        let mut buf = Vec::new();
        model.save(&mut buf).unwrap();
        let loaded = ClassifierModel::load(buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn foreign_model_file_is_rejected() {
        let bad = br#"{"format":"other","format_version":1,"encoder":{"dim":64,"ngram":1},"delta":2,"version":0,"bias":0.0,"weights":[]}"#;
        assert!(matches!(
            ClassifierModel::load(&bad[..]),
            Err(Error::ModelFormat(_))
        ));
    }
}
