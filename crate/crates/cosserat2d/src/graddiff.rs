//! Differentiation engine for the solution networks.
//!
//! Two contracts live here:
//!
//! 1. **Spatial derivatives of network outputs.** Values and their
//!    derivatives with respect to the planar input are propagated jointly
//!    through every layer as [`DualBundle`]s (forward mode), so the
//!    deformation gradient `F = I + ∇u` and the director gradient are exact
//!    chain-rule quantities, never finite differences.
//! 2. **Parameter gradients of a scalar loss.** The loss depends on
//!    parameters both directly (through output values) and through the
//!    input-derivative path; [`Mlp::backprop`] reverse-accumulates adjoints
//!    over the augmented forward pass, given seeds for both the outputs and
//!    their input-jacobian rows.
//!
//! Parameters are exposed as one flat vector with a stable layout —
//! layer-major, weights before biases within each layer — so optimizers
//! stay layout-agnostic. Finite differences appear only in test oracles.

use crate::tensor2::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Input dimension of every network in this crate: planar coordinates.
pub const INPUT_DIM: usize = 2;

/// Input tangents of the identity embedding: d(input)/dX for X and Y.
const INPUT_TX: [f64; INPUT_DIM] = [1.0, 0.0];
const INPUT_TY: [f64; INPUT_DIM] = [0.0, 1.0];

#[derive(Debug, Error)]
pub enum GradError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss is not finite (value = {value})")]
    NonFiniteLoss { value: f64 },
}

/// A value paired with its derivative with respect to the network input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualBundle {
    pub value: f64,
    pub d_dx: Vec2,
}

/// One dense layer `z = W h + b`, weights row-major (`n_out × n_in`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        DenseLayer {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Multilayer perceptron: tanh on hidden layers, linear output layer.
/// (A single-layer network is therefore purely linear.)
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Zero-initialized network with the given layer widths
    /// (`dims = [n_in, hidden…, n_out]`).
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "network needs at least one layer");
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    /// Layer shapes consistent, input dimension 2, all entries finite.
    pub fn validate(&self) -> Result<(), GradError> {
        if self.layers.is_empty() {
            return Err(GradError::ShapeMismatch("network has no layers".into()));
        }
        if self.input_dim() != INPUT_DIM {
            return Err(GradError::ShapeMismatch(format!(
                "input dimension {} (expected {INPUT_DIM})",
                self.input_dim()
            )));
        }
        let mut prev_out = self.input_dim();
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.n_in != prev_out {
                return Err(GradError::ShapeMismatch(format!(
                    "layer {i} expects {} inputs but receives {prev_out}",
                    layer.n_in
                )));
            }
            if layer.weights.len() != layer.n_in * layer.n_out
                || layer.bias.len() != layer.n_out
            {
                return Err(GradError::ShapeMismatch(format!(
                    "layer {i} storage does not match its declared shape"
                )));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(GradError::ShapeMismatch(format!(
                    "layer {i} contains non-finite entries"
                )));
            }
            prev_out = layer.n_out;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Flatten parameters: layer-major, weights (row-major) before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    /// Load parameters from the flat layout of [`Mlp::flat_params`].
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<(), GradError> {
        if params.len() != self.param_count() {
            return Err(GradError::ShapeMismatch(format!(
                "flat parameter vector has length {}, network needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// Outputs with their exact input derivatives at `x`.
    pub fn forward_with_input_jacobian(&self, x: Vec2) -> Result<Vec<DualBundle>, GradError> {
        self.validate()?;
        let mut trace = ForwardTrace::for_net(self);
        self.forward_traced(x, &mut trace);
        Ok(trace.outputs().to_vec())
    }

    /// Augmented forward pass recording everything [`Mlp::backprop`] needs.
    /// The trace is reusable scratch — allocate once per worker, call many
    /// times.
    pub fn forward_traced<'t>(&self, x: Vec2, trace: &'t mut ForwardTrace) -> &'t [DualBundle] {
        debug_assert_eq!(trace.shape, self.shape_key(), "trace built for another net");
        trace.input[0] = x.x;
        trace.input[1] = x.y;
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, rest) = trace.layers.split_at_mut(l);
            let rec = &mut rest[0];
            let (h, hx, hy): (&[f64], &[f64], &[f64]) = if l == 0 {
                (&trace.input, &INPUT_TX, &INPUT_TY)
            } else {
                let prev = &before[l - 1];
                (&prev.act, &prev.act_tx, &prev.act_ty)
            };
            for i in 0..layer.n_out {
                let row = &layer.weights[i * layer.n_in..(i + 1) * layer.n_in];
                let mut z = layer.bias[i];
                let mut zx = 0.0;
                let mut zy = 0.0;
                for j in 0..layer.n_in {
                    z += row[j] * h[j];
                    zx += row[j] * hx[j];
                    zy += row[j] * hy[j];
                }
                rec.pre[i] = z;
                rec.pre_tx[i] = zx;
                rec.pre_ty[i] = zy;
                if l + 1 < n_layers {
                    let t = z.tanh();
                    let slope = 1.0 - t * t;
                    rec.act[i] = t;
                    rec.act_tx[i] = slope * zx;
                    rec.act_ty[i] = slope * zy;
                }
            }
        }
        trace.fill_outputs();
        trace.outputs()
    }

    fn shape_key(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.n_out));
        dims
    }

    /// Reverse accumulation over the augmented forward pass recorded in
    /// `trace`. `adjoints[k].value` seeds ∂Φ/∂output_k and
    /// `adjoints[k].d_dx` seeds ∂Φ/∂(input-jacobian row k); parameter
    /// sensitivities are *added* into `grad` (flat layout).
    pub fn backprop(&self, trace: &ForwardTrace, adjoints: &[DualBundle], grad: &mut [f64]) {
        debug_assert_eq!(adjoints.len(), self.output_dim());
        debug_assert_eq!(grad.len(), self.param_count());

        let n_layers = self.layers.len();
        let width = |l: usize| self.layers[l].n_out;

        // Adjoints of the current layer's pre-activation bundle.
        let mut z_adj: Vec<f64> = adjoints.iter().map(|a| a.value).collect();
        let mut zx_adj: Vec<f64> = adjoints.iter().map(|a| a.d_dx.x).collect();
        let mut zy_adj: Vec<f64> = adjoints.iter().map(|a| a.d_dx.y).collect();

        // Flat offsets of each layer's weight block.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }

        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let (h, hx, hy): (&[f64], &[f64], &[f64]) = if l == 0 {
                (&trace.input, &INPUT_TX, &INPUT_TY)
            } else {
                let prev = &trace.layers[l - 1];
                (&prev.act, &prev.act_tx, &prev.act_ty)
            };

            // Parameter adjoints of the linear map z = W h + b,
            // Z_x = W H_x, Z_y = W H_y.
            let wgrad = &mut grad[offsets[l]..offsets[l] + layer.param_count()];
            let (wblock, bblock) = wgrad.split_at_mut(layer.weights.len());
            let mut h_adj = vec![0.0; layer.n_in];
            let mut hx_adj = vec![0.0; layer.n_in];
            let mut hy_adj = vec![0.0; layer.n_in];
            for i in 0..layer.n_out {
                let row = &layer.weights[i * layer.n_in..(i + 1) * layer.n_in];
                let wrow = &mut wblock[i * layer.n_in..(i + 1) * layer.n_in];
                let (za, zxa, zya) = (z_adj[i], zx_adj[i], zy_adj[i]);
                for j in 0..layer.n_in {
                    wrow[j] += za * h[j] + zxa * hx[j] + zya * hy[j];
                    h_adj[j] += row[j] * za;
                    hx_adj[j] += row[j] * zxa;
                    hy_adj[j] += row[j] * zya;
                }
                bblock[i] += za;
            }

            if l == 0 {
                break;
            }

            // Through the previous layer's tanh: with t = tanh(z) and
            // slope s = 1 − t², the activated bundle is
            // (t, s·Z_x, s·Z_y), so
            //   ẑ = t̂·s + (Ẑx·Z_x + Ẑy·Z_y)·(−2 t s)
            //   Ẑ = t̂_tangent·s  (per tangent direction).
            let prev_rec = &trace.layers[l - 1];
            let w = width(l - 1);
            let mut nz = vec![0.0; w];
            let mut nzx = vec![0.0; w];
            let mut nzy = vec![0.0; w];
            for i in 0..w {
                let t = prev_rec.act[i];
                let s = 1.0 - t * t;
                let dslope = -2.0 * t * s;
                nz[i] = h_adj[i] * s
                    + dslope * (hx_adj[i] * prev_rec.pre_tx[i] + hy_adj[i] * prev_rec.pre_ty[i]);
                nzx[i] = hx_adj[i] * s;
                nzy[i] = hy_adj[i] * s;
            }
            z_adj = nz;
            zx_adj = nzx;
            zy_adj = nzy;
        }
    }
}

/// Per-layer record of the augmented forward pass.
#[derive(Clone, Debug)]
struct LayerTrace {
    /// Pre-activation values and input tangents.
    pre: Vec<f64>,
    pre_tx: Vec<f64>,
    pre_ty: Vec<f64>,
    /// Activated values and tangents (hidden layers only; empty on the
    /// output layer, whose pre-activation *is* the output).
    act: Vec<f64>,
    act_tx: Vec<f64>,
    act_ty: Vec<f64>,
}

/// Reusable scratch buffers for [`Mlp::forward_traced`] / [`Mlp::backprop`].
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    shape: Vec<usize>,
    input: [f64; INPUT_DIM],
    layers: Vec<LayerTrace>,
    outputs: Vec<DualBundle>,
}

impl ForwardTrace {
    pub fn for_net(net: &Mlp) -> Self {
        let n_layers = net.layers.len();
        let layers = net
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let hidden = l + 1 < n_layers;
                let act_len = if hidden { layer.n_out } else { 0 };
                LayerTrace {
                    pre: vec![0.0; layer.n_out],
                    pre_tx: vec![0.0; layer.n_out],
                    pre_ty: vec![0.0; layer.n_out],
                    act: vec![0.0; act_len],
                    act_tx: vec![0.0; act_len],
                    act_ty: vec![0.0; act_len],
                }
            })
            .collect();
        ForwardTrace {
            shape: net.shape_key(),
            input: [0.0; INPUT_DIM],
            layers,
            outputs: vec![DualBundle::default(); net.output_dim()],
        }
    }

    fn fill_outputs(&mut self) {
        let last = self.layers.last().expect("trace has layers");
        for (k, out) in self.outputs.iter_mut().enumerate() {
            out.value = last.pre[k];
            out.d_dx = Vec2::new(last.pre_tx[k], last.pre_ty[k]);
        }
    }

    pub fn outputs(&self) -> &[DualBundle] {
        &self.outputs
    }
}

/// A scalar objective over a flat parameter vector. Implementations report
/// inadmissible points (e.g. a quadrature state with `det F ≤ 0`) through
/// their own error type mapped into [`GradError`] by the caller; this trait
/// only promises finite values on success.
pub trait ParamLoss {
    fn dim(&self) -> usize;
    fn value(&mut self, params: &[f64]) -> Result<f64, GradError>;
    fn value_and_grad(&mut self, params: &[f64]) -> Result<(f64, Vec<f64>), GradError>;
}

/// Gradient of `loss` at `params`, with finiteness enforced.
pub fn loss_gradient(loss: &mut dyn ParamLoss, params: &[f64]) -> Result<Vec<f64>, GradError> {
    if params.len() != loss.dim() {
        return Err(GradError::ShapeMismatch(format!(
            "parameter vector has length {}, loss expects {}",
            params.len(),
            loss.dim()
        )));
    }
    let (value, grad) = loss.value_and_grad(params)?;
    if !value.is_finite() {
        return Err(GradError::NonFiniteLoss { value });
    }
    if let Some(&bad) = grad.iter().find(|g| !g.is_finite()) {
        return Err(GradError::NonFiniteLoss { value: bad });
    }
    Ok(grad)
}

/// Test-oracle finite differences. Never on the production path.
pub mod fd {
    use super::*;

    /// Central-difference input jacobian of a network (step `h`), rows in
    /// output order.
    pub fn input_jacobian(net: &Mlp, x: Vec2, h: f64) -> Vec<Vec2> {
        let eval = |x: Vec2| -> Vec<f64> {
            net.forward_with_input_jacobian(x)
                .unwrap()
                .iter()
                .map(|b| b.value)
                .collect()
        };
        let fx_p = eval(Vec2::new(x.x + h, x.y));
        let fx_m = eval(Vec2::new(x.x - h, x.y));
        let fy_p = eval(Vec2::new(x.x, x.y + h));
        let fy_m = eval(Vec2::new(x.x, x.y - h));
        (0..net.output_dim())
            .map(|k| {
                Vec2::new(
                    (fx_p[k] - fx_m[k]) / (2.0 * h),
                    (fy_p[k] - fy_m[k]) / (2.0 * h),
                )
            })
            .collect()
    }

    /// Central-difference partial derivatives of `loss` at the selected
    /// parameter coordinates.
    pub fn param_grad_probe(
        loss: &mut dyn ParamLoss,
        params: &[f64],
        coords: &[usize],
        h: f64,
    ) -> Result<Vec<f64>, GradError> {
        let mut out = Vec::with_capacity(coords.len());
        let mut work = params.to_vec();
        for &c in coords {
            let orig = work[c];
            work[c] = orig + h;
            let plus = loss.value(&work)?;
            work[c] = orig - h;
            let minus = loss.value(&work)?;
            work[c] = orig;
            out.push((plus - minus) / (2.0 * h));
        }
        Ok(out)
    }
}
