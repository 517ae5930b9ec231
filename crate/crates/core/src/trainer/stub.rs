use std::path::Path;

use super::{
    is_eval_step, Backend, CheckpointRecord, ClassifierHandle, EvalSink, FinetuneConfig, ModelHandle,
    RetrainConfig, TrainerError,
};
use crate::dataset::LabeledDataset;

/// Backend that trains nothing. It follows the same step schedule as the
/// real backends, reports a falling loss curve and predicts the first label.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

fn emit(
    kind: &str,
    n: usize,
    batch_size: usize,
    epochs: u32,
    eval_every: u64,
    on_eval: &mut EvalSink<'_>,
) -> Result<(), TrainerError> {
    let per_epoch = n.div_ceil(batch_size).max(1) as u64;
    for step in 1..=per_epoch * u64::from(epochs) {
        if is_eval_step(step, eval_every, step % per_epoch == 0) {
            on_eval(CheckpointRecord {
                step,
                eval_loss: 1.0 + 1.0 / step as f64,
                artifact_uri: format!("stub:{kind}:{step}"),
            })?;
        }
    }
    Ok(())
}

impl Backend for StubBackend {
    fn id(&self) -> &str {
        "stub"
    }

    fn pretrained_uri(&self) -> String {
        "stub:pretrained".into()
    }

    fn retrain_mlm(
        &self,
        _base: &ModelHandle,
        texts: &[String],
        config: &RetrainConfig,
        _artifacts: &Path,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError> {
        emit("mlm", texts.len(), config.batch_size, config.epochs, config.eval_every_steps, on_eval)
    }

    fn finetune_classifier(
        &self,
        _model: &ModelHandle,
        train: &LabeledDataset,
        _validation: &LabeledDataset,
        config: &FinetuneConfig,
        _artifacts: &Path,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError> {
        emit("classifier", train.len(), config.batch_size, config.epochs, config.eval_every_steps, on_eval)
    }

    fn predict(&self, classifier: &ClassifierHandle, texts: &[String]) -> Result<Vec<String>, TrainerError> {
        let first = classifier
            .labels
            .first()
            .ok_or_else(|| TrainerError::backend(self.id(), "classifier has no labels"))?;
        Ok(vec![first.clone(); texts.len()])
    }
}
