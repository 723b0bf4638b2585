use super::features::DEFAULT_DIMENSION;
use super::{class_index, featurize, micro_f1, AbsaError, ClassifierInput, FeatureVector, CLASSES};
use crate::corpus::Sentiment;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

const FORMAT: &str = "movesense-sentiment-model";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dimension: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 4,
            seed: 42,
            dimension: DEFAULT_DIMENSION,
        }
    }
}

/// How a model's inputs were encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    Hashing { dimension: usize },
    External { name: String, dimension: usize },
}

impl EncoderSpec {
    pub fn dimension(&self) -> usize {
        match self {
            EncoderSpec::Hashing { dimension } | EncoderSpec::External { dimension, .. } => *dimension,
        }
    }
}

/// Softmax regression head: one weight row per class in [`CLASSES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentModel {
    pub encoder: EncoderSpec,
    pub config: TrainConfig,
    /// Per feature index, the weight of each class.
    weights: Vec<[f64; 3]>,
    bias: [f64; 3],
    /// 1-based epoch whose snapshot this is; 0 for an untrained model.
    pub best_epoch: usize,
    /// Selection score after every epoch.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Sentiment,
    pub probabilities: [f64; 3],
}

/// Mean cross-entropy gradient; weight rows only for touched indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub weights: BTreeMap<u32, [f64; 3]>,
    pub bias: [f64; 3],
}

/// Numerically stable softmax.
pub fn softmax(logits: [f64; 3]) -> [f64; 3] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.map(|z| (z - max).exp());
    let sum: f64 = exp.iter().sum();
    exp.map(|e| e / sum)
}

fn argmax(p: &[f64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

impl SentimentModel {
    /// Untrained model with all parameters zero.
    pub fn zeros(encoder: EncoderSpec, config: TrainConfig) -> Self {
        SentimentModel {
            weights: vec![[0.0; 3]; encoder.dimension()],
            bias: [0.0; 3],
            encoder,
            config,
            best_epoch: 0,
            history: Vec::new(),
        }
    }

    pub fn from_parts(encoder: EncoderSpec, weights: Vec<[f64; 3]>, bias: [f64; 3]) -> Result<Self, AbsaError> {
        if weights.len() != encoder.dimension() {
            return Err(AbsaError::DimensionMismatch {
                expected: encoder.dimension(),
                found: weights.len(),
            });
        }
        let mut m = Self::zeros(encoder, TrainConfig::default());
        m.weights = weights;
        m.bias = bias;
        Ok(m)
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    pub fn bias(&self) -> [f64; 3] {
        self.bias
    }

    fn logits(&self, x: &FeatureVector) -> [f64; 3] {
        let mut z = self.bias;
        for &(i, v) in x.entries() {
            let w = &self.weights[i as usize];
            for c in 0..3 {
                z[c] += v * w[c];
            }
        }
        z
    }

    fn check_dimension(&self, x: &FeatureVector) -> Result<(), AbsaError> {
        if x.dimension() != self.dimension() {
            return Err(AbsaError::DimensionMismatch {
                expected: self.dimension(),
                found: x.dimension(),
            });
        }
        Ok(())
    }

    pub fn predict_features(&self, x: &FeatureVector) -> Result<Prediction, AbsaError> {
        self.check_dimension(x)?;
        let probabilities = softmax(self.logits(x));
        Ok(Prediction {
            label: CLASSES[argmax(&probabilities)],
            probabilities,
        })
    }

    fn step(&mut self, g: &Gradient, lr: f64) {
        for (i, row) in &g.weights {
            let w = &mut self.weights[*i as usize];
            for c in 0..3 {
                w[c] -= lr * row[c];
            }
        }
        for c in 0..3 {
            self.bias[c] -= lr * g.bias[c];
        }
    }

    fn score(&self, data: &[(FeatureVector, usize)]) -> f64 {
        let predicted: Vec<Sentiment> = data.iter().map(|(x, _)| CLASSES[argmax(&softmax(self.logits(x)))]).collect();
        let gold: Vec<Sentiment> = data.iter().map(|(_, y)| CLASSES[*y]).collect();
        micro_f1(&predicted, &gold).unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            classes: CLASSES.to_vec(),
            encoder: self.encoder.clone(),
            config: self.config,
            best_epoch: self.best_epoch,
            history: self.history.clone(),
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| w.iter().any(|x| *x != 0.0))
                .map(|(i, w)| (i as u32, *w))
                .collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AbsaError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| AbsaError::ModelFormat(e.to_string()))?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(AbsaError::ModelFormat(format!("unsupported format {} v{}", file.format, file.version)));
        }
        if file.classes != CLASSES {
            return Err(AbsaError::ModelFormat("unexpected class order".into()));
        }
        let mut m = Self::zeros(file.encoder, file.config);
        for (i, w) in file.weights {
            let slot = m
                .weights
                .get_mut(i as usize)
                .ok_or_else(|| AbsaError::ModelFormat(format!("weight index {i} out of range")))?;
            *slot = w;
        }
        if m.weights.iter().flatten().chain(&file.bias).any(|x| !x.is_finite()) {
            return Err(AbsaError::ModelFormat("non-finite parameter".into()));
        }
        m.bias = file.bias;
        m.best_epoch = file.best_epoch;
        m.history = file.history;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AbsaError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| AbsaError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AbsaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AbsaError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    classes: Vec<Sentiment>,
    encoder: EncoderSpec,
    config: TrainConfig,
    best_epoch: usize,
    history: Vec<f64>,
    bias: [f64; 3],
    weights: Vec<(u32, [f64; 3])>,
}

/// Mean cross-entropy of `model` on `examples` and its gradient.
pub fn loss_and_gradient(model: &SentimentModel, examples: &[(FeatureVector, usize)]) -> (f64, Gradient) {
    let mut g = Gradient::default();
    let mut loss = 0.0;
    if examples.is_empty() {
        return (0.0, g);
    }
    let scale = 1.0 / examples.len() as f64;
    for (x, y) in examples {
        let p = softmax(model.logits(x));
        loss -= p[*y].max(f64::MIN_POSITIVE).ln() * scale;
        let mut delta = p;
        delta[*y] -= 1.0;
        for (b, d) in g.bias.iter_mut().zip(delta) {
            *b += d * scale;
        }
        for &(i, v) in x.entries() {
            let row = g.weights.entry(i).or_default();
            for c in 0..3 {
                row[c] += delta[c] * v * scale;
            }
        }
    }
    (loss, g)
}

/// Fits the head by seeded mini-batch gradient descent from zero weights and
/// returns the snapshot of the epoch with the best selection score (the
/// earliest on ties).
///
/// The selection score is micro-F1 on `validation`, or on the training data
/// when `validation` is empty. Labels are indices into [`CLASSES`].
pub fn train_features(
    train: &[(FeatureVector, usize)],
    validation: &[(FeatureVector, usize)],
    encoder: EncoderSpec,
    config: TrainConfig,
) -> Result<SentimentModel, AbsaError> {
    if config.batch_size == 0 || config.epochs == 0 || config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(AbsaError::InvalidArgument(
            "batch size, epochs and learning rate must be positive".into(),
        ));
    }
    let mut labels: Vec<usize> = train.iter().map(|(_, y)| *y).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(AbsaError::DegenerateData(labels.len()));
    }
    let mut model = SentimentModel::zeros(encoder, config);
    for (x, y) in train.iter().chain(validation) {
        model.check_dimension(x)?;
        if *y >= CLASSES.len() {
            return Err(AbsaError::InvalidArgument(format!("class index {y} out of range")));
        }
    }
    let selection = if validation.is_empty() { train } else { validation };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, SentimentModel)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    let mut batch: Vec<(FeatureVector, usize)> = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let (_, g) = loss_and_gradient(&model, &batch);
            model.step(&g, config.learning_rate);
        }
        let score = model.score(selection);
        history.push(score);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            let mut snapshot = model.clone();
            snapshot.best_epoch = epoch;
            best = Some((score, snapshot));
        }
    }
    let (_, mut chosen) = best.expect("at least one epoch ran");
    chosen.history = history;
    Ok(chosen)
}

fn labeled(inputs: &[ClassifierInput], dimension: usize) -> Result<Vec<(FeatureVector, usize)>, AbsaError> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, input)| {
            let y = input.label.and_then(class_index).ok_or(AbsaError::MissingLabel(i))?;
            Ok((featurize(&input.serialized, dimension), y))
        })
        .collect()
}

/// [`train_features`] over hashed features of serialized inputs.
pub fn train(train: &[ClassifierInput], validation: &[ClassifierInput], config: TrainConfig) -> Result<SentimentModel, AbsaError> {
    let dimension = config.dimension.max(super::MIN_DIMENSION);
    let config = TrainConfig { dimension, ..config };
    train_features(
        &labeled(train, dimension)?,
        &labeled(validation, dimension)?,
        EncoderSpec::Hashing { dimension },
        config,
    )
}

pub fn predict(model: &SentimentModel, input: &ClassifierInput) -> Result<Prediction, AbsaError> {
    match &model.encoder {
        EncoderSpec::Hashing { dimension } => model.predict_features(&featurize(&input.serialized, *dimension)),
        EncoderSpec::External { name, .. } => Err(AbsaError::EncoderUnavailable(name.clone())),
    }
}
