use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sagaze_core::eval::{evaluate, BinaryMetrics};
use sagaze_core::{FixationGraph, SaLabel};
use sagaze_nn::optim::{lr_at, AdamW, OptimState};
use sagaze_nn::Tape;

use crate::config::ModelConfig;
use crate::model::{FixGraphPool, PreparedGraph};
use crate::scaler::GraphScaler;
use crate::FgpError;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FixGraphPool,
    /// Mean mini-batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub lr_trace: Vec<f64>,
}

/// Fit a fresh model on `graphs` with mini-batch AdamW and the step
/// schedule. The scaler is fitted on the same graphs.
pub fn train(graphs: &[FixationGraph], cfg: &ModelConfig, seed: u64) -> Result<TrainOutcome, FgpError> {
    if graphs.is_empty() {
        return Err(FgpError::EmptyFold);
    }
    let mut model = FixGraphPool::new(cfg.clone(), seed)?;
    model.scaler = GraphScaler::fit(graphs);
    let prepared = graphs.iter().map(|g| model.prepare(g)).collect::<Result<Vec<_>, _>>()?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle_rng.set_stream(1);
    let mut opt =
        OptimState::new(AdamW { lr: cfg.base_lr, weight_decay: cfg.weight_decay, ..AdamW::default() }, &model.store);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut lr_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = lr_at(cfg.base_lr, epoch);
        opt.config.lr = lr;
        lr_trace.push(lr);
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PreparedGraph> = chunk.iter().map(|&i| &prepared[i]).collect();
            let mut tape = Tape::new();
            let loss = model.loss_on(&mut tape, &model.store, &batch)?;
            total += tape.value(loss).item();
            batches += 1;
            let grads = tape.backward(loss)?;
            model.store.zero_grads();
            grads.accumulate_into(&mut model.store);
            opt.step(&mut model.store)?;
        }
        let mean = total / batches as f64;
        log::debug!("epoch {epoch}: lr {lr:.6} loss {mean:.5}");
        epoch_loss.push(mean);
    }
    Ok(TrainOutcome { model, epoch_loss, lr_trace })
}

pub fn predict_all(model: &FixGraphPool, graphs: &[FixationGraph]) -> Result<Vec<SaLabel>, FgpError> {
    graphs.iter().map(|g| model.predict(g)).collect()
}

/// Metrics of `model` on labelled graphs.
pub fn score(model: &FixGraphPool, graphs: &[FixationGraph]) -> Result<BinaryMetrics, FgpError> {
    let preds = predict_all(model, graphs)?;
    let labels: Vec<SaLabel> = graphs.iter().map(|g| g.label).collect();
    Ok(evaluate(&preds, &labels).expect("one prediction per graph"))
}
