use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::params::Moments;
use super::{ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update.
///
/// The store's step counter is advanced first, so the first call uses
/// `t = 1`. Parameters without a gradient entry are left untouched, moments
/// included. Names listed in `frozen` are skipped entirely.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &BTreeMap<String, Tensor>,
    cfg: &AdamConfig,
    frozen: &dyn Fn(&str) -> bool,
) -> Result<()> {
    for (name, g) in grads {
        let p = params
            .get(name)
            .ok_or_else(|| Error::Contract(format!("gradient for unknown parameter `{name}`")))?;
        if p.shape() != g.shape() {
            return Err(Error::Contract(format!(
                "gradient shape {:?} does not match parameter `{name}` {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    let t = params.step() + 1;
    params.set_step(t);
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (name, g) in grads {
        if frozen(name) {
            continue;
        }
        let Moments { first, second } = {
            let m = params.moments_entry(name);
            for ((m1, m2), &gv) in m
                .first
                .data_mut()
                .iter_mut()
                .zip(m.second.data_mut().iter_mut())
                .zip(g.data())
            {
                *m1 = cfg.beta1 * *m1 + (1.0 - cfg.beta1) * gv;
                *m2 = cfg.beta2 * *m2 + (1.0 - cfg.beta2) * gv * gv;
            }
            m.clone()
        };
        if cfg.lr == 0.0 {
            continue;
        }
        let p = params.get_mut(name).expect("checked above");
        for ((pv, &m1), &m2) in p.data_mut().iter_mut().zip(first.data()).zip(second.data()) {
            let m_hat = m1 / bc1;
            let v_hat = m2 / bc2;
            *pv -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
