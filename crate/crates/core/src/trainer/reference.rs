//! Deterministic CPU backend. Texts become hashed bag-of-words vectors;
//! "retraining" fits per-bucket weights from a smoothed unigram model of the
//! corpus, and the classifier is multinomial logistic regression trained with
//! AdamW. Every run is a pure function of its inputs and seed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    is_eval_step, read_json_file, write_json_file, Backend, CheckpointRecord, ClassifierHandle, EvalSink,
    FinetuneConfig, ModelHandle, RetrainConfig, TrainerError,
};
use crate::dataset::LabeledDataset;

const PRETRAINED_URI: &str = "reference:pretrained";
const FILE_SCHEME: &str = "file:";
/// Additive smoothing of the unigram model.
const ALPHA: f64 = 1.0;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    dim: usize,
}

impl Default for ReferenceBackend {
    fn default() -> Self {
        ReferenceBackend { dim: 4096 }
    }
}

impl ReferenceBackend {
    /// Backend with `dim` hash buckets.
    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        ReferenceBackend { dim }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn tokens(text: &str, max_len: usize) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .take(max_len)
        .map(str::to_lowercase)
}

/// Sorted (bucket, count) pairs of a text.
fn bucket_counts(text: &str, max_len: usize, dim: usize) -> Vec<(usize, u32)> {
    let mut buckets: Vec<usize> = tokens(text, max_len).map(|t| (fnv1a(t.as_bytes()) % dim as u64) as usize).collect();
    buckets.sort_unstable();
    let mut out: Vec<(usize, u32)> = Vec::new();
    for b in buckets {
        match out.last_mut() {
            Some((last, c)) if *last == b => *c += 1,
            _ => out.push((b, 1)),
        }
    }
    out
}

/// Sparse feature vector and class index.
type Example = (Vec<(usize, f64)>, usize);

/// L2-normalised sparse feature vector: (1 + ln tf) scaled by bucket weight.
fn features(text: &str, max_len: usize, weights: &[f64]) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = bucket_counts(text, max_len, weights.len())
        .into_iter()
        .map(|(b, c)| (b, (1.0 + f64::from(c).ln()) * weights[b]))
        .collect();
    let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, x) in &mut v {
            *x /= norm;
        }
    }
    v
}

#[derive(Serialize, Deserialize)]
struct EncoderArtifact {
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ClassifierArtifact {
    labels: Vec<String>,
    max_seq_len: usize,
    feature_weights: Vec<f64>,
    /// Row-major, one row of `feature_weights.len()` per label.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ClassifierArtifact {
    fn logits(&self, x: &[(usize, f64)]) -> Vec<f64> {
        let dim = self.feature_weights.len();
        self.bias
            .iter()
            .enumerate()
            .map(|(k, b)| b + x.iter().map(|&(j, v)| self.weights[k * dim + j] * v).sum::<f64>())
            .collect()
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// First index of the largest value.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn artifact_uri(path: &Path) -> String {
    let abs = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    format!("{FILE_SCHEME}{}", abs.display())
}

fn artifact_path(uri: &str) -> Option<PathBuf> {
    uri.strip_prefix(FILE_SCHEME).map(PathBuf::from)
}

/// Global step numbering over shuffled mini-batches. Calls `f(step,
/// batch, epoch_end)` for each batch.
fn for_each_batch(
    n: usize,
    batch_size: usize,
    epochs: u32,
    rng: &mut ChaCha8Rng,
    mut f: impl FnMut(u64, &[usize], bool) -> Result<(), TrainerError>,
) -> Result<(), TrainerError> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0u64;
    for _ in 0..epochs {
        order.shuffle(rng);
        let batches: Vec<&[usize]> = order.chunks(batch_size).collect();
        for (i, batch) in batches.iter().enumerate() {
            step += 1;
            f(step, batch, i + 1 == batches.len())?;
        }
    }
    Ok(())
}

impl ReferenceBackend {
    fn load_encoder(&self, uri: &str) -> Result<Vec<f64>, TrainerError> {
        if uri == PRETRAINED_URI {
            return Ok(vec![1.0; self.dim]);
        }
        let path = artifact_path(uri).ok_or_else(|| TrainerError::backend(self.id(), format!("unknown model '{uri}'")))?;
        let a: EncoderArtifact = read_json_file(&path)?;
        if a.weights.len() != self.dim {
            return Err(TrainerError::backend(
                self.id(),
                format!("model has {} buckets, backend uses {}", a.weights.len(), self.dim),
            ));
        }
        Ok(a.weights)
    }

    fn load_classifier(&self, uri: &str) -> Result<ClassifierArtifact, TrainerError> {
        let path = artifact_path(uri).ok_or_else(|| TrainerError::backend(self.id(), format!("unknown classifier '{uri}'")))?;
        read_json_file(&path)
    }
}

impl Backend for ReferenceBackend {
    fn id(&self) -> &str {
        "reference"
    }

    fn pretrained_uri(&self) -> String {
        PRETRAINED_URI.into()
    }

    fn retrain_mlm(
        &self,
        base: &ModelHandle,
        texts: &[String],
        config: &RetrainConfig,
        artifacts: &Path,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError> {
        // validates the base model even though counts start from scratch
        self.load_encoder(&base.artifact_uri)?;
        let dim = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut perm: Vec<usize> = (0..texts.len()).collect();
        perm.shuffle(&mut rng);
        let held = (texts.len() / 10).max(1);
        let (held_out, mut train) = (perm[..held].to_vec(), perm[held..].to_vec());
        if train.is_empty() {
            train = held_out.clone();
        }
        let held_counts: Vec<Vec<(usize, u32)>> =
            held_out.iter().map(|&i| bucket_counts(&texts[i], config.max_seq_len, dim)).collect();
        let held_tokens: u64 = held_counts.iter().flatten().map(|&(_, c)| u64::from(c)).sum();

        let mut counts = vec![0.0f64; dim];
        let mut total = 0.0f64;
        for_each_batch(train.len(), config.batch_size, config.epochs, &mut rng, |step, batch, epoch_end| {
            for &i in batch {
                for (b, c) in bucket_counts(&texts[train[i]], config.max_seq_len, dim) {
                    counts[b] += f64::from(c);
                    total += f64::from(c);
                }
            }
            if !is_eval_step(step, config.eval_every_steps, epoch_end) {
                return Ok(());
            }
            let denom = total + ALPHA * dim as f64;
            let nll: f64 = held_counts
                .iter()
                .flatten()
                .map(|&(b, c)| -f64::from(c) * ((counts[b] + ALPHA) / denom).ln())
                .sum();
            let eval_loss = if held_tokens == 0 { 0.0 } else { nll / held_tokens as f64 };
            let mut weights: Vec<f64> = counts.iter().map(|c| (denom / (c + ALPHA)).ln()).collect();
            let mean = weights.iter().sum::<f64>() / dim as f64;
            for w in &mut weights {
                *w /= mean;
            }
            let path = artifacts.join(format!("mlm-step-{step:08}.json"));
            write_json_file(&path, &EncoderArtifact { weights })?;
            on_eval(CheckpointRecord { step, eval_loss, artifact_uri: artifact_uri(&path) })
        })
    }

    fn finetune_classifier(
        &self,
        model: &ModelHandle,
        train: &LabeledDataset,
        validation: &LabeledDataset,
        config: &FinetuneConfig,
        artifacts: &Path,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError> {
        let feature_weights = self.load_encoder(&model.artifact_uri)?;
        let dim = self.dim;
        let schema = &train.schema;
        let k = schema.len();
        let encode = |ds: &LabeledDataset| -> Result<Vec<Example>, TrainerError> {
            ds.rows
                .iter()
                .map(|r| {
                    let y = schema
                        .index_of(&r.label)
                        .ok_or_else(|| TrainerError::backend("reference", format!("label '{}' not in schema", r.label)))?;
                    Ok((features(&r.text, config.max_seq_len, &feature_weights), y))
                })
                .collect()
        };
        let train_x = encode(train)?;
        let val_x = encode(validation)?;
        if train_x.is_empty() {
            return Err(TrainerError::backend(self.id(), "training split is empty"));
        }

        let mut clf = ClassifierArtifact {
            labels: schema.labels().to_vec(),
            max_seq_len: config.max_seq_len,
            feature_weights,
            weights: vec![0.0; k * dim],
            bias: vec![0.0; k],
        };
        let n_params = k * dim + k;
        let mut m = vec![0.0f64; n_params];
        let mut v = vec![0.0f64; n_params];
        let mut grad = vec![0.0f64; n_params];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        for_each_batch(train_x.len(), config.batch_size, config.epochs, &mut rng, |step, batch, epoch_end| {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = &train_x[i];
                let p = softmax(&clf.logits(x));
                for (c, pc) in p.iter().enumerate() {
                    let g = (pc - if c == *y { 1.0 } else { 0.0 }) * scale;
                    for &(j, xj) in x {
                        grad[c * dim + j] += g * xj;
                    }
                    grad[k * dim + c] += g;
                }
            }
            let t = step as i32;
            let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
            for idx in 0..n_params {
                let g = grad[idx];
                m[idx] = BETA1 * m[idx] + (1.0 - BETA1) * g;
                v[idx] = BETA2 * v[idx] + (1.0 - BETA2) * g * g;
                let update = (m[idx] / c1) / ((v[idx] / c2).sqrt() + EPS);
                let theta = if idx < k * dim { &mut clf.weights[idx] } else { &mut clf.bias[idx - k * dim] };
                *theta -= config.learning_rate * (update + config.weight_decay * *theta);
            }
            if !is_eval_step(step, config.eval_every_steps, epoch_end) {
                return Ok(());
            }
            let eval_loss = if val_x.is_empty() {
                0.0
            } else {
                val_x.iter().map(|(x, y)| -softmax(&clf.logits(x))[*y].max(f64::MIN_POSITIVE).ln()).sum::<f64>()
                    / val_x.len() as f64
            };
            let path = artifacts.join(format!("classifier-step-{step:08}.json"));
            write_json_file(&path, &clf)?;
            on_eval(CheckpointRecord { step, eval_loss, artifact_uri: artifact_uri(&path) })
        })
    }

    fn predict(&self, classifier: &ClassifierHandle, texts: &[String]) -> Result<Vec<String>, TrainerError> {
        let clf = self.load_classifier(&classifier.artifact_uri)?;
        Ok(texts
            .iter()
            .map(|t| {
                let x = features(t, clf.max_seq_len, &clf.feature_weights);
                clf.labels[argmax(&clf.logits(&x))].clone()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn bucket_counts_merge_repeats() {
        let c = bucket_counts("Love love LOVE wins", 512, 4096);
        assert_eq!(c.iter().map(|(_, n)| n).sum::<u32>(), 4);
        assert!(c.iter().any(|&(_, n)| n == 3));
        assert_eq!(bucket_counts("a b c d", 2, 4096).iter().map(|(_, n)| n).sum::<u32>(), 2);
    }

    #[test]
    fn features_are_unit_length() {
        let w = vec![1.0; 64];
        let x = features("one two two three", 512, &w);
        let norm: f64 = x.iter().map(|(_, v)| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(features("!!!", 512, &w).is_empty());
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
