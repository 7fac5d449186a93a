//! AdamW with a scheduled (annealing) decoupled weight decay.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{AwdSchedule, DecayReference, TrainConfig};
use super::model::{BlockModel, Gradients, ParamGroup};
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Weight-decay coefficient at step `t` of `total`.
pub fn awd_coefficient(t: usize, total: usize, wd0: f64, schedule: AwdSchedule) -> f64 {
    match schedule {
        AwdSchedule::Cosine => {
            if total == 0 {
                return wd0;
            }
            let frac = t.min(total) as f64 / total as f64;
            wd0 * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * frac))
        }
        AwdSchedule::Constant => wd0,
        AwdSchedule::Off => 0.0,
    }
}

/// One AdamW update of a single tensor in place.
///
/// `step` is 1-based. Decay is applied first, against the pre-update value:
/// `θ ← θ − lr·wd·(θ − ref)`, then `θ ← θ − lr·m̂/(√v̂ + ε)`.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    wd: f64,
    reference: Option<&[f64]>,
) {
    let bc1 = 1.0 - libm::pow(BETA1, step as f64);
    let bc2 = 1.0 - libm::pow(BETA2, step as f64);
    for i in 0..param.len() {
        let g = grad[i];
        if wd != 0.0 {
            let anchor = reference.map_or(0.0, |r| r[i]);
            param[i] -= lr * wd * (param[i] - anchor);
        }
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (libm::sqrt(v_hat) + EPS);
    }
}

#[derive(Debug, Clone)]
struct Moments {
    name: String,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// First/second moment accumulators for every trainable tensor of one model.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    step: u64,
    moments: Vec<Moments>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of optimizer steps taken.
    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update at schedule position `t` (0-based, of `cfg.steps`).
    ///
    /// Any non-finite gradient aborts the step before anything is modified.
    pub fn step(&mut self, model: &mut BlockModel, grads: &Gradients, cfg: &TrainConfig, t: usize) -> Result<()> {
        if let Some(bad) = grads.entries.iter().find(|e| e.values.as_slice().iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteGradient { param: bad.name.clone() });
        }
        let wd = awd_coefficient(t, cfg.steps, cfg.wd0, cfg.awd);
        let use_init = cfg.decay_reference == DecayReference::Init;
        self.step += 1;
        let step = self.step;
        let mut idx = 0;
        let mut failure = None;
        let moments = &mut self.moments;
        model.visit_trainable(&mut |slot| {
            if failure.is_some() {
                return;
            }
            let Some(g) = grads.entries.get(idx) else {
                failure = Some(Error::CacheMismatch(alloc::format!("no gradient for {}", slot.name)));
                return;
            };
            if g.name != slot.name || g.values.as_slice().len() != slot.values.len() {
                failure = Some(Error::CacheMismatch(alloc::format!(
                    "gradient {} does not match parameter {}",
                    g.name, slot.name
                )));
                return;
            }
            if moments.len() == idx {
                moments.push(Moments {
                    name: String::from(slot.name),
                    m: vec![0.0; slot.values.len()],
                    v: vec![0.0; slot.values.len()],
                });
            }
            let mo = &mut moments[idx];
            debug_assert_eq!(mo.name, slot.name);
            let lr = match slot.group {
                ParamGroup::Backbone => cfg.lr * cfg.backbone_lr_mult,
                ParamGroup::Head => cfg.lr,
            };
            let reference = use_init.then_some(slot.init);
            adamw_update(slot.values, g.values.as_slice(), &mut mo.m, &mut mo.v, step, lr, wd, reference);
            idx += 1;
        });
        if let Some(e) = failure {
            return Err(e);
        }
        if idx != grads.entries.len() {
            return Err(Error::CacheMismatch(alloc::format!(
                "{} gradients for {idx} parameters",
                grads.entries.len()
            )));
        }
        Ok(())
    }
}

/// Free-function form of [`OptimizerState::step`].
pub fn adamw_step(
    model: &mut BlockModel,
    grads: &Gradients,
    opt: &mut OptimizerState,
    cfg: &TrainConfig,
    t: usize,
) -> Result<()> {
    opt.step(model, grads, cfg, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints_and_midpoint() {
        assert_eq!(awd_coefficient(0, 100, 0.05, AwdSchedule::Cosine), 0.05);
        assert_eq!(awd_coefficient(100, 100, 0.05, AwdSchedule::Cosine), 0.0);
        assert_eq!(awd_coefficient(50, 100, 0.05, AwdSchedule::Cosine), 0.025);
        assert_eq!(awd_coefficient(500, 100, 0.05, AwdSchedule::Cosine), 0.0);
    }

    #[test]
    fn constant_and_off() {
        assert_eq!(awd_coefficient(37, 100, 0.1, AwdSchedule::Constant), 0.1);
        assert_eq!(awd_coefficient(0, 100, 0.1, AwdSchedule::Off), 0.0);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // After one step m̂ = g and v̂ = g², so the Adam move is lr·g/(|g| + ε).
        let mut p = [1.0, -2.0, 0.5];
        let g = [0.3, -4.0, 0.0];
        let (mut m, mut v) = ([0.0; 3], [0.0; 3]);
        adamw_update(&mut p, &g, &mut m, &mut v, 1, 0.01, 0.0, None);
        let expect = [1.0 - 0.01 * 0.3 / (0.3 + EPS), -2.0 + 0.01 * 4.0 / (4.0 + EPS), 0.5];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn decay_pulls_toward_reference() {
        let mut p = [2.0];
        let (mut m, mut v) = ([0.0], [0.0]);
        adamw_update(&mut p, &[0.0], &mut m, &mut v, 1, 0.1, 0.5, Some(&[1.0]));
        assert!((p[0] - (2.0 - 0.1 * 0.5 * 1.0)).abs() < 1e-15);
        let mut q = [2.0];
        let (mut m, mut v) = ([0.0], [0.0]);
        adamw_update(&mut q, &[0.0], &mut m, &mut v, 1, 0.1, 0.5, None);
        assert!((q[0] - 1.9).abs() < 1e-15);
    }
}
