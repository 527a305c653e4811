//! Parameter initialization, Adam, mini-batch epochs and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::TrainingExample;
use crate::decoder::{accumulate_gradients, teacher_forced_loss_value};
use crate::error::{Error, Result};
use crate::model::{Model, ModelDims, Variant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Everything that shapes a training run. [`TrainConfig::default`] holds the
/// full-size settings; [`TrainConfig::desk`] keeps the architecture but shrinks
/// it to something a laptop trains in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub embed_dim: usize,
    pub word_hidden: usize,
    pub word_layers: usize,
    pub sent_hidden: usize,
    pub dec_hidden: usize,
    pub attn_dim: usize,
    /// Number of previous sentences fed to the encoder.
    pub num_window: usize,
    pub batch_size: usize,
    pub init_range: f64,
    pub adam: AdamConfig,
    /// Global gradient-norm ceiling; `0` disables clipping.
    pub clip_norm: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::HredAttention,
            embed_dim: 300,
            word_hidden: 1000,
            word_layers: 3,
            sent_hidden: 1500,
            dec_hidden: 1500,
            attn_dim: 1500,
            num_window: 5,
            batch_size: 256,
            init_range: 0.5,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
            patience: 3,
            max_epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            embed_dim: 16,
            word_hidden: 24,
            sent_hidden: 32,
            dec_hidden: 32,
            attn_dim: 32,
            batch_size: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed-dim", self.embed_dim),
            ("word-hidden", self.word_hidden),
            ("word-layers", self.word_layers),
            ("sent-hidden", self.sent_hidden),
            ("dec-hidden", self.dec_hidden),
            ("attn-dim", self.attn_dim),
            ("num-window", self.num_window),
            ("batch-size", self.batch_size),
            ("patience", self.patience),
            ("max-epochs", self.max_epochs),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidInput(format!("{name} must be positive")));
        }
        if !(self.init_range > 0.0 && self.init_range.is_finite()) {
            return Err(Error::InvalidInput("init-range must be positive".into()));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            return Err(Error::InvalidInput("invalid Adam hyperparameters".into()));
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return Err(Error::InvalidInput("clip-norm must be >= 0".into()));
        }
        Ok(())
    }

    pub fn model_dims(&self, vocab_size: usize) -> ModelDims {
        ModelDims {
            vocab_size,
            embed_dim: self.embed_dim,
            word_hidden: self.word_hidden,
            word_layers: self.word_layers,
            sent_hidden: self.sent_hidden,
            dec_hidden: self.dec_hidden,
            attn_dim: self.attn_dim,
        }
    }

    /// `key = value` pairs, keys named like the command-line flags.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("variant", self.variant.to_string()),
            ("embed-dim", self.embed_dim.to_string()),
            ("word-hidden", self.word_hidden.to_string()),
            ("word-layers", self.word_layers.to_string()),
            ("sent-hidden", self.sent_hidden.to_string()),
            ("dec-hidden", self.dec_hidden.to_string()),
            ("attn-dim", self.attn_dim.to_string()),
            ("num-window", self.num_window.to_string()),
            ("batch-size", self.batch_size.to_string()),
            ("init-range", fmt_f64(self.init_range)),
            ("learning-rate", fmt_f64(self.adam.lr)),
            ("beta1", fmt_f64(self.adam.beta1)),
            ("beta2", fmt_f64(self.adam.beta2)),
            ("adam-epsilon", fmt_f64(self.adam.epsilon)),
            ("clip-norm", fmt_f64(self.clip_norm)),
            ("patience", self.patience.to_string()),
            ("max-epochs", self.max_epochs.to_string()),
            ("rng-seed", self.seed.to_string()),
        ]
    }

    /// Sets one entry by key. Returns `Ok(false)` for keys this type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad value for {key}: {value:?}")))
        }
        match key {
            "variant" => self.variant = parse(key, value)?,
            "embed-dim" => self.embed_dim = parse(key, value)?,
            "word-hidden" => self.word_hidden = parse(key, value)?,
            "word-layers" => self.word_layers = parse(key, value)?,
            "sent-hidden" => self.sent_hidden = parse(key, value)?,
            "dec-hidden" => self.dec_hidden = parse(key, value)?,
            "attn-dim" => self.attn_dim = parse(key, value)?,
            "num-window" => self.num_window = parse(key, value)?,
            "batch-size" => self.batch_size = parse(key, value)?,
            "init-range" => self.init_range = parse(key, value)?,
            "learning-rate" => self.adam.lr = parse(key, value)?,
            "beta1" => self.adam.beta1 = parse(key, value)?,
            "beta2" => self.adam.beta2 = parse(key, value)?,
            "adam-epsilon" => self.adam.epsilon = parse(key, value)?,
            "clip-norm" => self.clip_norm = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "max-epochs" => self.max_epochs = parse(key, value)?,
            "rng-seed" => self.seed = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Shortest text that parses back to the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Fresh parameters: every weight uniform on `[-init_range, init_range]`,
/// output bias zero.
pub fn init_params(config: &TrainConfig, vocab_size: usize, seed: u64) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Model::random(config.variant, config.model_dims(vocab_size), config.init_range, &mut rng)
}

/// First and second moment estimates, flattened in [`Model::tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    /// One bias-corrected Adam update over flat slices.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) -> Result<()> {
        crate::error::check_dim("AdamState::step", self.m.len(), params.len())?;
        crate::error::check_dim("AdamState::step", params.len(), grads.len())?;
        self.t += 1;
        self.update(0, params, grads, cfg);
        Ok(())
    }

    fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) {
        let t = self.t as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Applies one Adam step to every tensor of `model`.
pub fn adam_step(state: &mut AdamState, model: &mut Model, grads: &Model, cfg: &AdamConfig) -> Result<()> {
    crate::error::check_dim("adam_step", state.m.len(), model.num_params())?;
    crate::error::check_dim("adam_step", model.num_params(), grads.num_params())?;
    state.t += 1;
    let mut offset = 0;
    for (p, g) in model.tensors_mut().into_iter().zip(grads.tensors()) {
        let n = p.data().len();
        state.update(offset, p.data_mut(), g.data(), cfg);
        offset += n;
    }
    Ok(())
}

/// Patience-based stopping on a monitored loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epochs: 0,
        }
    }

    /// Records the next epoch's loss. Returns `true` once `patience` epochs
    /// have passed without beating the best.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.epochs += 1;
        if loss < self.best {
            self.best = loss;
            self.best_epoch = self.epochs;
        }
        self.epochs - self.best_epoch >= self.patience
    }

    /// Whether the most recent observation was a new best.
    pub fn improved(&self) -> bool {
        self.epochs > 0 && self.best_epoch == self.epochs
    }

    /// 1-based epoch of the best loss (0 before any observation).
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

/// Result of training: the best-validation parameters, the optimizer state at
/// that point, and the full loss history.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model,
    pub adam: AdamState,
    /// 1-based epoch the parameters come from.
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Mean per-example teacher-forced loss.
pub fn mean_loss(model: &Model, examples: &[TrainingExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("no examples".into()));
    }
    let mut total = 0.0;
    for ex in examples {
        total += teacher_forced_loss_value(model, ex)?;
    }
    Ok(total / examples.len() as f64)
}

/// Rescales `grads` to norm `max_norm` if larger. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Model, max_norm: f64) -> f64 {
    let norm = grads.squared_norm().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Mini-batch trainer. Holds the live parameters so callers can step it one
/// batch or one epoch at a time.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Model,
    pub adam: AdamState,
    grads: Model,
    rng: ChaCha8Rng,
    epoch: usize,
    steps: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        let model = init_params(&config, vocab_size, config.seed)?;
        Self::from_model(config, model)
    }

    pub fn from_model(config: TrainConfig, model: Model) -> Result<Self> {
        config.validate()?;
        // shuffling draws from its own stream so it does not disturb init
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            adam: AdamState::new(model.num_params()),
            grads: model.zeros_like(),
            model,
            config,
            rng,
            epoch: 0,
            steps: 0,
        })
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Completed optimizer steps.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Gradient of the batch-mean loss from the last step (after clipping).
    pub fn last_gradient(&self) -> &Model {
        &self.grads
    }

    /// One optimizer step on `batch`; returns the batch-mean loss.
    pub fn step_batch(&mut self, batch: &[TrainingExample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        for t in self.grads.tensors_mut() {
            t.fill(0.0);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for ex in batch {
            total += accumulate_gradients(&self.model, ex, scale, &mut self.grads)?;
        }
        let loss = total * scale;
        let norm = clip_global_norm(&mut self.grads, self.config.clip_norm);
        if !loss.is_finite() || !norm.is_finite() {
            return Err(Error::NonFiniteLoss {
                loss: if loss.is_finite() { norm } else { loss },
                epoch: self.epoch + 1,
                step: self.steps + 1,
            });
        }
        adam_step(&mut self.adam, &mut self.model, &self.grads, &self.config.adam)?;
        self.steps += 1;
        Ok(loss)
    }

    /// One pass over `examples` in a fresh random order, the last batch kept
    /// even if short. Returns the mean of the per-batch losses weighted by
    /// batch size.
    pub fn run_epoch(&mut self, examples: &[TrainingExample]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::InvalidInput("training set is empty".into()));
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut self.rng);
        let mut batch = Vec::with_capacity(self.config.batch_size);
        let mut total = 0.0;
        for chunk in order.chunks(self.config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            total += self.step_batch(&batch)? * chunk.len() as f64;
        }
        self.epoch += 1;
        Ok(total / examples.len() as f64)
    }
}

/// Trains from freshly initialized parameters until early stopping or
/// `max_epochs`. An empty validation set falls back to monitoring the training
/// loss. `on_epoch` sees each record as it is produced.
pub fn train_with<F: FnMut(&EpochRecord)>(
    config: &TrainConfig,
    vocab_size: usize,
    train_set: &[TrainingExample],
    valid_set: &[TrainingExample],
    mut on_epoch: F,
) -> Result<Checkpoint> {
    if train_set.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let mut trainer = Trainer::new(config.clone(), vocab_size)?;
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = Vec::new();
    let mut best = (trainer.model.clone(), trainer.adam.clone());

    for epoch in 1..=config.max_epochs {
        let train_loss = trainer.run_epoch(train_set)?;
        let valid_loss = if valid_set.is_empty() {
            train_loss
        } else {
            mean_loss(&trainer.model, valid_set)?
        };
        if !valid_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                loss: valid_loss,
                epoch,
                step: trainer.steps(),
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            valid_loss,
        };
        on_epoch(&record);
        history.push(record);
        let stop = stopper.observe(valid_loss);
        if stopper.improved() {
            best = (trainer.model.clone(), trainer.adam.clone());
        }
        if stop {
            break;
        }
    }

    Ok(Checkpoint {
        config: config.clone(),
        model: best.0,
        adam: best.1,
        epoch: stopper.best_epoch(),
        history,
    })
}

pub fn train(
    config: &TrainConfig,
    vocab_size: usize,
    train_set: &[TrainingExample],
    valid_set: &[TrainingExample],
) -> Result<Checkpoint> {
    train_with(config, vocab_size, train_set, valid_set, |_| {})
}
