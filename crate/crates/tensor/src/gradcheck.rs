use crate::{Result, Tape, Tensor, TensorError, Var};

/// Compares reverse-mode gradients of a scalar function with central
/// differences at `points`. Returns the maximum over all coordinates of
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check_many<F>(f: F, points: &[Tensor], h: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = points.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&tape, &vars)?;
        let grads = tape.backward(out)?;
        vars.iter().map(|&v| grads.wrt(v)).collect()
    };
    let eval = |pts: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = pts.iter().map(|p| tape.constant(p.clone())).collect();
        let out = f(&tape, &vars)?;
        let v = out.value();
        if v.numel() != 1 {
            return Err(TensorError::Contract("grad_check needs a scalar function".into()));
        }
        Ok(v.data()[0])
    };
    let mut worst: f64 = 0.0;
    for (pi, point) in points.iter().enumerate() {
        for j in 0..point.numel() {
            let mut shifted = points.to_vec();
            let mut plus = point.to_vec();
            plus[j] += h;
            shifted[pi] = Tensor::new(point.shape().to_vec(), plus)?;
            let fp = eval(&shifted)?;
            let mut minus = point.to_vec();
            minus[j] -= h;
            shifted[pi] = Tensor::new(point.shape().to_vec(), minus)?;
            let fm = eval(&shifted)?;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[pi].data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// Single-input form of [`grad_check_many`].
pub fn grad_check<F>(f: F, point: &Tensor, h: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(point), h)
}
