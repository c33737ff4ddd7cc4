use crate::diffcore::{Checkpoint, ParamStore};
use crate::egnn::is_encoder_param;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransferReport {
    pub transferred: Vec<String>,
    /// Parameters left at their fresh initialization (the head).
    pub fresh: Vec<String>,
}

/// Copies every encoder tensor of `ckpt` into `target`, leaving head
/// parameters as they are. Optimizer state of `target` is reset.
pub fn transfer_weights(ckpt: &Checkpoint, target: &mut ParamStore) -> Result<TransferReport> {
    let mut report = TransferReport::default();
    let names: Vec<String> = target.names().map(String::from).collect();
    for name in &names {
        if !is_encoder_param(name) {
            report.fresh.push(name.clone());
            continue;
        }
        let src = ckpt
            .params
            .get(name)
            .ok_or_else(|| Error::Transfer(format!("checkpoint has no parameter `{name}`")))?;
        let dst = target.require(name)?;
        if src.shape() != dst.shape() {
            return Err(Error::Transfer(format!(
                "`{name}` has shape {:?} in the checkpoint but {:?} in the model",
                src.shape(),
                dst.shape()
            )));
        }
        report.transferred.push(name.clone());
    }
    for name in &report.transferred {
        target.set(name, ckpt.params.require(name)?.clone())?;
    }
    target.reset_optimizer();
    Ok(report)
}
