//! Exact reverse-mode differentiation of the unrolled recurrence.

use crate::cells::{initial_state, readout_with, step_with, CellStep, GradientSet, ModelParams};
use crate::error::{ensure, Error, Result};
use crate::graph::LaplacianSet;
use crate::linalg::DenseMatrix;

use super::loss::{loss_and_grad, LossKind};

fn check_window(window: &[DenseMatrix]) -> Result<()> {
    ensure(window.len() >= 2, || {
        format!(
            "a training window needs at least 2 frames, got {}",
            window.len()
        )
    })?;
    let shape = window[0].shape();
    ensure(window.iter().all(|f| f.shape() == shape), || {
        "frames in a window must share dimensions".into()
    })
}

/// Forward pass only: `Σ_t J_t` over the window, starting from `h₀ = 0`.
pub fn window_loss(
    p: &ModelParams,
    lap: &LaplacianSet,
    window: &[DenseMatrix],
    kind: LossKind,
) -> Result<f64> {
    check_window(window)?;
    let conv = p.conv(Some(lap));
    let mut h = initial_state(p, window[0].n_cols());
    let mut total = 0.0;
    for (t, pair) in window.windows(2).enumerate() {
        let step = step_with(p, conv, &h, &pair[0]).map_err(|e| e.at_step(t + 1))?;
        let x_hat = readout_with(p, conv, &step.h)?;
        total += loss_and_grad(kind, &x_hat, &pair[1], Some(lap))?.0;
        h = step.h;
    }
    if !total.is_finite() {
        return Err(Error::NumericOverflow {
            what: "loss",
            step: Some(window.len() - 1),
        });
    }
    Ok(total)
}

/// Loss `J = Σ_{t=1}^{T_w} J_t` on a window of `T_w + 1` frames and its exact
/// gradient with respect to every trainable scalar.
///
/// Frame `t` is the input at step `t` and frame `t + 1` its target.
pub fn bptt(
    p: &ModelParams,
    lap: &LaplacianSet,
    window: &[DenseMatrix],
    kind: LossKind,
) -> Result<(f64, GradientSet)> {
    check_window(window)?;
    let conv = p.conv(Some(lap));
    let steps = window.len() - 1;

    struct Cached {
        h_prev: DenseMatrix,
        step: CellStep,
        loss_grad: DenseMatrix,
    }

    let mut cache: Vec<Cached> = Vec::with_capacity(steps);
    let mut h = initial_state(p, window[0].n_cols());
    let mut loss = 0.0;
    for (t, pair) in window.windows(2).enumerate() {
        let step = step_with(p, conv, &h, &pair[0]).map_err(|e| e.at_step(t + 1))?;
        let x_hat = readout_with(p, conv, &step.h)?;
        let (j, g) = loss_and_grad(kind, &x_hat, &pair[1], Some(lap))?;
        if !j.is_finite() {
            return Err(Error::NumericOverflow {
                what: "loss",
                step: Some(t + 1),
            });
        }
        loss += j;
        let h_next = step.h.clone();
        cache.push(Cached {
            h_prev: std::mem::replace(&mut h, h_next),
            step,
            loss_grad: g,
        });
    }

    let mut grads = GradientSet::zeros_like(p);
    let act = p.activation;
    // ∂J/∂h_t arriving from steps after t
    let mut carry = DenseMatrix::zeros(h.n_rows(), h.n_cols());
    for (t, c) in cache.iter().enumerate().rev() {
        let (dh_readout, g_v) = conv.backward(&p.readout_filter, &c.step.h, &c.loss_grad)?;
        grads.add_readout(&g_v);
        for (gz, s) in grads.readout_bias.iter_mut().zip(c.loss_grad.row_sums()) {
            *gz += s;
        }

        let mut dh = dh_readout;
        dh.axpy(1.0, &carry)?;

        // h = α·h̃ + β·h_prev
        grads.alpha += dh.frobenius_dot(&c.step.h_tilde)?;
        grads.beta += dh.frobenius_dot(&c.h_prev)?;
        let mut da = dh.scale(p.alpha);
        for (g, &a) in da
            .as_mut_slice()
            .iter_mut()
            .zip(c.step.pre_activation.as_slice())
        {
            *g *= act.derivative(a);
        }
        for (gb, s) in grads.bias.iter_mut().zip(da.row_sums()) {
            *gb += s;
        }

        let x_t = &window[t];
        let (_, g_w) = conv.backward(&p.input_filter, x_t, &da)?;
        grads.add_input(&g_w);
        let (dh_prev, g_u) = conv.backward(&p.recurrent_filter, &c.h_prev, &da)?;
        grads.add_recurrent(&g_u);

        carry = dh_prev;
        carry.axpy(p.beta, &dh)?;
        if !carry.is_finite() {
            return Err(Error::NumericOverflow {
                what: "gradient",
                step: Some(t + 1),
            });
        }
    }
    Ok((loss, grads))
}

/// Worst relative disagreement between [`bptt`] and central differences of
/// [`window_loss`] over every trainable scalar.
///
/// The denominator of each relative error is
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check(
    p: &ModelParams,
    lap: &LaplacianSet,
    window: &[DenseMatrix],
    kind: LossKind,
    step: f64,
) -> Result<f64> {
    ensure(step > 0.0, || {
        format!("finite-difference step must be positive, got {step}")
    })?;
    let (_, grads) = bptt(p, lap, window, kind)?;
    let analytic = grads.to_flat();
    let base = p.to_flat();
    let mut probe = p.clone();
    let mut flat = base.clone();
    let mut worst = 0.0f64;
    for (k, &a) in analytic.iter().enumerate() {
        flat[k] = base[k] + step;
        probe.assign_flat(&flat)?;
        let plus = window_loss(&probe, lap, window, kind)?;
        flat[k] = base[k] - step;
        probe.assign_flat(&flat)?;
        let minus = window_loss(&probe, lap, window, kind)?;
        flat[k] = base[k];
        let numeric = (plus - minus) / (2.0 * step);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
