use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::NetArchitecture;
use super::network::{Network, Workspace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub lr_init: f64,
    /// Multiplier applied to the learning rate every `decay_every` epochs.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Optimizer steps per epoch; `None` means one pass over the data.
    pub steps_per_epoch: Option<usize>,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            lr_init: 0.001,
            lr_decay: 0.8,
            decay_every: 80,
            batch_size: 2000,
            epochs: 100,
            steps_per_epoch: None,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_init > 0.0 && self.lr_init.is_finite()) {
            return Err(Error::contract("initial learning rate must be positive"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return Err(Error::contract("learning-rate decay must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.decay_every == 0 {
            return Err(Error::contract("batch size, epochs and decay period must be positive"));
        }
        if self.steps_per_epoch == Some(0) {
            return Err(Error::contract("steps per epoch must be positive"));
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr_init * self.lr_decay.powi((epoch / self.decay_every) as i32)
    }

    fn steps_in_epoch(&self, samples: usize) -> usize {
        self.steps_per_epoch.unwrap_or((samples / self.batch_size).max(1))
    }
}

/// Row-major feature and target matrices held in memory for training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub input_width: usize,
    pub output_width: usize,
}

impl TrainingSet {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, input_width: usize, output_width: usize) -> Result<Self> {
        if input_width == 0 || output_width == 0 {
            return Err(Error::shape("widths must be positive"));
        }
        if inputs.len() % input_width != 0
            || targets.len() % output_width != 0
            || inputs.len() / input_width != targets.len() / output_width
        {
            return Err(Error::shape("inputs and targets disagree on the sample count"));
        }
        if inputs.is_empty() {
            return Err(Error::contract("training set is empty"));
        }
        Ok(Self {
            inputs,
            targets,
            input_width,
            output_width,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_width
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn gather(&self, idx: &[usize], x: &mut Vec<f64>, y: &mut Vec<f64>) {
        x.clear();
        y.clear();
        for &i in idx {
            x.extend_from_slice(&self.inputs[i * self.input_width..(i + 1) * self.input_width]);
            y.extend_from_slice(&self.targets[i * self.output_width..(i + 1) * self.output_width]);
        }
    }
}

/// Walks seeded permutations of the sample indices, reshuffling whenever
/// fewer than a full batch remain.
struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Self { order, pos: 0, rng }
    }

    fn next(&mut self, batch: usize) -> &[usize] {
        if self.pos + batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let out = &self.order[self.pos..self.pos + batch];
        self.pos += batch;
        out
    }
}

/// Per-epoch progress passed to [`train_with`] callbacks.
#[derive(Debug, Clone, Copy)]
pub struct EpochReport {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_mse: f64,
}

/// Mini-batch Adam training. Returns the trained network and the mean
/// per-entry training MSE of every epoch.
pub fn train(arch: &NetArchitecture, schedule: &TrainSchedule, data: &TrainingSet) -> Result<(Network, Vec<f64>)> {
    train_with(arch, schedule, data, |_| {})
}

pub fn train_with(
    arch: &NetArchitecture,
    schedule: &TrainSchedule,
    data: &TrainingSet,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<(Network, Vec<f64>)> {
    schedule.validate()?;
    arch.validate()?;
    if data.input_width != arch.input_width() || data.output_width != arch.output_width() {
        return Err(Error::shape(format!(
            "data is {} -> {} but the network is {} -> {}",
            data.input_width,
            data.output_width,
            arch.input_width(),
            arch.output_width()
        )));
    }
    if schedule.batch_size > data.len() {
        return Err(Error::contract(format!(
            "batch size {} exceeds the {} available samples",
            schedule.batch_size,
            data.len()
        )));
    }

    let mut net = Network::init(arch, schedule.seed)?;
    let mut sampler = BatchSampler::new(data.len(), schedule.seed);
    let mut ws = Workspace::default();
    let mut grad = vec![0.0; net.layout().total];
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let steps = schedule.steps_in_epoch(data.len());
    let mut history = Vec::with_capacity(schedule.epochs);

    for epoch in 0..schedule.epochs {
        let lr = schedule.learning_rate(epoch);
        let mut total = 0.0;
        for batch in 0..steps {
            data.gather(sampler.next(schedule.batch_size), &mut x, &mut y);
            let loss = net.loss_and_grad(&x, &y, schedule.batch_size, &mut grad, &mut ws)?;
            if !loss.mse.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    batch,
                    reason: format!("loss {}", loss.mse),
                });
            }
            net.adam_step(&grad, lr);
            total += loss.mse;
        }
        let mean_mse = total / steps as f64;
        log::debug!("epoch {epoch}: lr {lr:.3e}, training mse {mean_mse:.6}");
        on_epoch(&EpochReport {
            epoch,
            learning_rate: lr,
            mean_mse,
        });
        history.push(mean_mse);
    }
    Ok((net, history))
}
