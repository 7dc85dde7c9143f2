use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::system::EnergyForces;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Val,
    Test,
}

fn mean_errors(pred: &[f64], target: &[f64]) -> (f64, f64) {
    let n = pred.len().max(1) as f64;
    let (l1, l2) = pred.iter().zip(target).fold((0.0, 0.0), |(a, b), (p, t)| {
        let d = p - t;
        (a + d.abs(), b + d * d)
    });
    (l1 / n, l2 / n)
}

/// Loss and metrics keyed by name.
///
/// * train: `loss` = y_weight·MSE(E) + neg_dy_weight·MSE(F), plus `y_mse`
///   and (with forces) `neg_dy_mse`
/// * val: `y_l1`, `y_mse`, `neg_dy_l1`, `neg_dy_mse` (force metrics when both
///   sides carry forces) and the weighted `loss`
/// * test: `y_l1` and `neg_dy_l1` only
///
/// Force errors are averaged over all Cartesian components.
pub fn loss_and_metrics(
    pred: &EnergyForces,
    target: &EnergyForces,
    y_weight: f64,
    neg_dy_weight: f64,
    mode: Mode,
) -> Result<BTreeMap<String, f64>> {
    if pred.energy.len() != target.energy.len() {
        return Err(Error::Shape(format!(
            "{} predicted energies for {} targets",
            pred.energy.len(),
            target.energy.len()
        )));
    }
    let forces = match (&pred.forces, &target.forces) {
        (Some(p), Some(t)) => {
            if p.len() != t.len() {
                return Err(Error::Shape(format!("{} predicted forces for {} targets", p.len(), t.len())));
            }
            let flat = |v: &[[f64; 3]]| v.iter().flatten().copied().collect::<Vec<_>>();
            Some(mean_errors(&flat(p), &flat(t)))
        }
        _ => None,
    };
    if neg_dy_weight != 0.0 && forces.is_none() {
        return Err(Error::Shape("neg_dy_weight is non-zero but forces are missing".into()));
    }
    let (y_l1, y_mse) = mean_errors(&pred.energy, &target.energy);
    let loss = y_weight * y_mse + forces.map_or(0.0, |(_, mse)| neg_dy_weight * mse);
    let mut m = BTreeMap::new();
    match mode {
        Mode::Train => {
            m.insert("loss".into(), loss);
            m.insert("y_mse".into(), y_mse);
            if let Some((_, mse)) = forces {
                m.insert("neg_dy_mse".into(), mse);
            }
        }
        Mode::Val => {
            m.insert("loss".into(), loss);
            m.insert("y_l1".into(), y_l1);
            m.insert("y_mse".into(), y_mse);
            if let Some((l1, mse)) = forces {
                m.insert("neg_dy_l1".into(), l1);
                m.insert("neg_dy_mse".into(), mse);
            }
        }
        Mode::Test => {
            m.insert("y_l1".into(), y_l1);
            if let Some((l1, _)) = forces {
                m.insert("neg_dy_l1".into(), l1);
            }
        }
    }
    Ok(m)
}

/// `alpha·value + (1 − alpha)·prev`; the first observation is taken as is.
pub fn ema_update(prev: Option<f64>, value: f64, alpha: f64) -> f64 {
    match prev {
        None => value,
        Some(p) => alpha * value + (1.0 - alpha) * p,
    }
}
