use neutral_tensor::Tensor;

use crate::{Error, Result};

/// Number of hand-crafted views: time flip × channel flip × shift.
pub const FIXED_VIEW_COUNT: usize = 12;

/// The parameter-free transformation set used by the transformation
/// prediction baseline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FixedTransforms;

impl FixedTransforms {
    pub fn k(&self) -> usize {
        FIXED_VIEW_COUNT
    }

    /// View `k` of a `[C, L]` series. `k = time_flip·6 + channel_flip·3 +
    /// shift`, with shift 0 = none, 1 = forward, 2 = backward.
    pub fn view(&self, x: &Tensor, k: usize) -> Result<Tensor> {
        let &[c, l] = x.shape() else {
            return Err(Error::Config(format!(
                "fixed transformations need a [C, L] series, got {:?}",
                x.shape()
            )));
        };
        if k >= FIXED_VIEW_COUNT {
            return Err(neutral_tensor::TensorError::Index(format!(
                "fixed view {k} out of range for {FIXED_VIEW_COUNT}"
            ))
            .into());
        }
        let (time_flip, channel_flip, shift) = (k / 6 == 1, (k / 3) % 2 == 1, k % 3);
        let s = l / 4;
        let src = x.data();
        let mut out = vec![0.0; c * l];
        for ch in 0..c {
            let from_ch = if channel_flip { c - 1 - ch } else { ch };
            let row = &src[from_ch * l..][..l];
            for t in 0..l {
                let pos = match shift {
                    0 => Some(t),
                    1 => t.checked_sub(s),
                    _ => Some(t + s).filter(|&p| p < l),
                };
                if let Some(p) = pos {
                    let p = if time_flip { l - 1 - p } else { p };
                    out[ch * l + t] = row[p];
                }
            }
        }
        Ok(Tensor::new(vec![c, l], out)?)
    }
}

/// All twelve fixed views of a series.
pub fn fixed_transforms(x: &Tensor) -> Result<Vec<Tensor>> {
    (0..FIXED_VIEW_COUNT).map(|k| FixedTransforms.view(x, k)).collect()
}
