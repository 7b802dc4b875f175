use crate::linalg::{gemm, DenseMatrix, DenseVector, View};

use super::{Layer, MlpSpec, NetError, ResidualJacobian};

pub(super) fn check(
    spec: &MlpSpec,
    params: &[f64],
    inputs: &DenseMatrix,
    targets: Option<&DenseMatrix>,
) -> Result<(), NetError> {
    if params.len() != spec.param_count() {
        return Err(NetError::Shape(format!(
            "{} parameters given, spec needs {}",
            params.len(),
            spec.param_count()
        )));
    }
    if inputs.cols() != spec.input_dim {
        return Err(NetError::Shape(format!(
            "inputs have {} columns, spec input_dim is {}",
            inputs.cols(),
            spec.input_dim
        )));
    }
    if let Some(t) = targets {
        if inputs.rows() == 0 {
            return Err(NetError::EmptyBatch);
        }
        if t.rows() != inputs.rows() || t.cols() != spec.output_dim {
            return Err(NetError::Shape(format!(
                "targets are {}x{}, expected {}x{}",
                t.rows(),
                t.cols(),
                inputs.rows(),
                spec.output_dim
            )));
        }
    }
    Ok(())
}

/// Layer outputs for a batch: `acts[l]` is `n x fan_out(l)`, post-activation.
pub(super) fn trace(layers: &[Layer], params: &[f64], inputs: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let prev: &[f64] = if l == 0 { inputs } else { &acts[l - 1] };
        let z = affine(layer, params, prev, n);
        acts.push(z);
        if layer.hidden {
            acts[l].iter_mut().for_each(|v| *v = v.tanh());
        }
    }
    acts
}

/// `Z = A Wᵀ + 1 bᵀ` for a batch `A` of `n` rows.
pub(super) fn affine(layer: &Layer, params: &[f64], prev: &[f64], n: usize) -> Vec<f64> {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    let bias = &params[layer.bias_range()];
    let mut z = Vec::with_capacity(n * fo);
    for _ in 0..n {
        z.extend_from_slice(bias);
    }
    gemm(
        n,
        fi,
        fo,
        1.0,
        View::rowmajor(prev, fi),
        View::transposed(&params[layer.weight_range()], fi),
        1.0,
        &mut z,
        fo,
    );
    z
}

/// Same as [`affine`] without the bias term (used for tangent propagation).
pub(super) fn linear(layer: &Layer, params: &[f64], prev: &[f64], n: usize) -> Vec<f64> {
    let mut z = vec![0.0; n * layer.fan_out];
    gemm(
        n,
        layer.fan_in,
        layer.fan_out,
        1.0,
        View::rowmajor(prev, layer.fan_in),
        View::transposed(&params[layer.weight_range()], layer.fan_in),
        0.0,
        &mut z,
        layer.fan_out,
    );
    z
}

/// `D W`: pulls an `n x fan_out` adjoint back to `n x fan_in`.
pub(super) fn pullback(layer: &Layer, params: &[f64], adj: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * layer.fan_in];
    gemm(
        n,
        layer.fan_out,
        layer.fan_in,
        1.0,
        View::rowmajor(adj, layer.fan_out),
        View::rowmajor(&params[layer.weight_range()], layer.fan_in),
        0.0,
        &mut out,
        layer.fan_in,
    );
    out
}

/// Backpropagates an output seed `∂/∂z_L` through the hidden tanh layers.
/// Returns `∂/∂z_l` for every layer.
fn deltas(
    layers: &[Layer],
    params: &[f64],
    acts: &[Vec<f64>],
    seed: Vec<f64>,
    n: usize,
) -> Vec<Vec<f64>> {
    let depth = layers.len();
    let mut out = vec![Vec::new(); depth];
    out[depth - 1] = seed;
    for l in (1..depth).rev() {
        let mut d = pullback(&layers[l], params, &out[l], n);
        for (dv, a) in d.iter_mut().zip(&acts[l - 1]) {
            *dv *= 1.0 - a * a;
        }
        out[l - 1] = d;
    }
    out
}

/// Adds `scale * Σ_rows δᵀ A_prev` (and bias sums) into `grad`.
pub(super) fn accumulate_gradient(
    layer: &Layer,
    delta: &[f64],
    prev: &[f64],
    n: usize,
    grad: &mut [f64],
) {
    let (fi, fo) = (layer.fan_in, layer.fan_out);
    gemm(
        fo,
        n,
        fi,
        1.0,
        View::transposed(delta, fo),
        View::rowmajor(prev, fi),
        1.0,
        &mut grad[layer.weight_range()],
        fi,
    );
    let gb = &mut grad[layer.bias_range()];
    for row in delta.chunks_exact(fo) {
        for (g, d) in gb.iter_mut().zip(row) {
            *g += d;
        }
    }
}

pub fn forward(spec: &MlpSpec, params: &[f64], inputs: &DenseMatrix) -> Result<DenseMatrix, NetError> {
    check(spec, params, inputs, None)?;
    let layers = spec.layer_vec();
    let n = inputs.rows();
    let mut acts = trace(&layers, params, inputs.as_slice(), n);
    let out = acts.pop().expect("at least one layer");
    Ok(DenseMatrix::from_vec(n, spec.output_dim, out).expect("output shape"))
}

/// `prediction - target`, flattened sample-major.
pub fn residuals(
    spec: &MlpSpec,
    params: &[f64],
    inputs: &DenseMatrix,
    targets: &DenseMatrix,
) -> Result<DenseVector, NetError> {
    let pred = forward(spec, params, inputs)?;
    check(spec, params, inputs, Some(targets))?;
    Ok(pred
        .as_slice()
        .iter()
        .zip(targets.as_slice())
        .map(|(p, t)| p - t)
        .collect::<Vec<_>>()
        .into())
}

/// Mean squared error over samples and output components.
pub fn loss_mse(
    spec: &MlpSpec,
    params: &[f64],
    inputs: &DenseMatrix,
    targets: &DenseMatrix,
) -> Result<f64, NetError> {
    let r = residuals(spec, params, inputs, targets)?;
    Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
}

/// Reverse-mode gradient of [`loss_mse`]. Returns `(loss, gradient)`.
pub fn loss_gradient(
    spec: &MlpSpec,
    params: &[f64],
    inputs: &DenseMatrix,
    targets: &DenseMatrix,
) -> Result<(f64, DenseVector), NetError> {
    check(spec, params, inputs, Some(targets))?;
    let layers = spec.layer_vec();
    let n = inputs.rows();
    let acts = trace(&layers, params, inputs.as_slice(), n);
    let out = acts.last().expect("at least one layer");
    let count = out.len() as f64;
    let mut loss = 0.0;
    let seed: Vec<f64> = out
        .iter()
        .zip(targets.as_slice())
        .map(|(p, t)| {
            let r = p - t;
            loss += r * r;
            2.0 * r / count
        })
        .collect();
    let ds = deltas(&layers, params, &acts, seed, n);
    let mut grad = vec![0.0; params.len()];
    for (l, layer) in layers.iter().enumerate() {
        let prev: &[f64] = if l == 0 { inputs.as_slice() } else { &acts[l - 1] };
        accumulate_gradient(layer, &ds[l], prev, n, &mut grad);
    }
    Ok((loss / count, grad.into()))
}

/// Writes `∂r_i/∂θ` into `row` given per-layer deltas for sample `i`.
pub(super) fn write_jacobian_row(
    layers: &[Layer],
    deltas: &[Vec<f64>],
    inputs: &[f64],
    acts: &[Vec<f64>],
    i: usize,
    row: &mut [f64],
) {
    for (l, layer) in layers.iter().enumerate() {
        let (fi, fo) = (layer.fan_in, layer.fan_out);
        let prev: &[f64] = if l == 0 { inputs } else { &acts[l - 1] };
        let a = &prev[i * fi..(i + 1) * fi];
        let d = &deltas[l][i * fo..(i + 1) * fo];
        let w = &mut row[layer.weight_range()];
        for (j, &dj) in d.iter().enumerate() {
            for (wk, ak) in w[j * fi..(j + 1) * fi].iter_mut().zip(a) {
                *wk = dj * ak;
            }
        }
        row[layer.bias_range()].copy_from_slice(d);
    }
}

/// Residuals `r = prediction - target` with their Jacobian. Rows are ordered
/// sample-major (`i * output_dim + o`).
pub fn residual_jacobian(
    spec: &MlpSpec,
    params: &[f64],
    inputs: &DenseMatrix,
    targets: &DenseMatrix,
) -> Result<ResidualJacobian, NetError> {
    check(spec, params, inputs, Some(targets))?;
    let layers = spec.layer_vec();
    let n = inputs.rows();
    let od = spec.output_dim;
    let p = params.len();
    let acts = trace(&layers, params, inputs.as_slice(), n);
    let residuals: Vec<f64> = acts
        .last()
        .expect("at least one layer")
        .iter()
        .zip(targets.as_slice())
        .map(|(y, t)| y - t)
        .collect();
    let mut jac = DenseMatrix::zeros(n * od, p);
    for o in 0..od {
        let mut seed = vec![0.0; n * od];
        for i in 0..n {
            seed[i * od + o] = 1.0;
        }
        let ds = deltas(&layers, params, &acts, seed, n);
        for i in 0..n {
            write_jacobian_row(&layers, &ds, inputs.as_slice(), &acts, i, jac.row_mut(i * od + o));
        }
    }
    Ok(ResidualJacobian {
        residuals: residuals.into(),
        jacobian: jac,
    })
}
