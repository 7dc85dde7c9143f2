use crate::error::{Error, Result};

/// What happened at the end of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochOutcome {
    pub improved: bool,
    pub lr_decayed: bool,
    pub stop: bool,
}

/// Linear warmup followed by reduce-on-plateau and early stopping.
///
/// `lr` is the post-warmup rate; during the first `warmup_steps` optimizer
/// steps the effective rate is `lr·(step+1)/warmup_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub lr: f64,
    pub warmup_steps: usize,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub lr_min: f64,
    pub early_stopping_patience: usize,
    pub best: f64,
    /// Non-improving epochs since the last improvement or decay.
    pub plateau_epochs: usize,
    pub epochs_since_best: usize,
}

impl LrSchedule {
    pub fn new(
        lr: f64,
        warmup_steps: usize,
        lr_factor: f64,
        lr_patience: usize,
        lr_min: f64,
        early_stopping_patience: usize,
    ) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) || !(lr_min >= 0.0 && lr_min <= lr) {
            return Err(Error::InvalidConfig(format!(
                "require 0 <= lr_min <= lr and lr > 0, got lr={lr}, lr_min={lr_min}"
            )));
        }
        if !(lr_factor > 0.0 && lr_factor < 1.0) {
            return Err(Error::InvalidConfig(format!("lr_factor must be in (0, 1), got {lr_factor}")));
        }
        if lr_patience == 0 || early_stopping_patience == 0 {
            return Err(Error::InvalidConfig(
                "lr_patience and early_stopping_patience must be at least 1".into(),
            ));
        }
        Ok(LrSchedule {
            lr,
            warmup_steps,
            lr_factor,
            lr_patience,
            lr_min,
            early_stopping_patience,
            best: f64::INFINITY,
            plateau_epochs: 0,
            epochs_since_best: 0,
        })
    }

    /// Effective rate for the optimizer step with zero-based index `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            self.lr * (step + 1) as f64 / self.warmup_steps as f64
        } else {
            self.lr
        }
    }

    /// Feeds the smoothed validation loss of a finished epoch.
    pub fn end_epoch(&mut self, val_loss: f64) -> EpochOutcome {
        let improved = val_loss < self.best;
        let mut lr_decayed = false;
        if improved {
            self.best = val_loss;
            self.plateau_epochs = 0;
            self.epochs_since_best = 0;
        } else {
            self.plateau_epochs += 1;
            self.epochs_since_best += 1;
            if self.plateau_epochs >= self.lr_patience {
                let next = (self.lr * self.lr_factor).max(self.lr_min);
                lr_decayed = next < self.lr;
                self.lr = next;
                self.plateau_epochs = 0;
            }
        }
        EpochOutcome {
            improved,
            lr_decayed,
            stop: self.epochs_since_best >= self.early_stopping_patience,
        }
    }
}
