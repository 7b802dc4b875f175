//! Input derivatives of a `(x, t) -> u` network and their parameter
//! derivatives.
//!
//! The forward pass carries `(u, ∂u/∂x, ∂u/∂t, ∂²u/∂x²)` through every layer
//! exactly. Parameter sensitivities of any linear combination of those four
//! quantities are then obtained with one reverse sweep over the tangent
//! computation.

use crate::linalg::{gemm, DenseMatrix, DenseVector, View};

use super::backprop::{accumulate_gradient, affine, check, linear, pullback};
use super::{InputDerivatives, Layer, MlpSpec, NetError, ResidualJacobian};

/// Data points (initial and boundary conditions) and collocation points for
/// a PINN residual. Inputs are ordered `(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnPoints {
    /// `n_data x 2`
    pub data_inputs: DenseMatrix,
    pub data_targets: Vec<f64>,
    /// `n_f x 2`
    pub collocation: DenseMatrix,
}

impl PinnPoints {
    fn check(&self) -> Result<(), NetError> {
        if self.data_inputs.rows() == 0 || self.collocation.rows() == 0 {
            return Err(NetError::EmptyBatch);
        }
        if self.data_inputs.cols() != 2 || self.collocation.cols() != 2 {
            return Err(NetError::Shape("PINN points must have two columns (x, t)".into()));
        }
        if self.data_targets.len() != self.data_inputs.rows() {
            return Err(NetError::Shape(format!(
                "{} data targets for {} data points",
                self.data_targets.len(),
                self.data_inputs.rows()
            )));
        }
        Ok(())
    }
}

/// Per-layer forward quantities. For hidden layers `a*` are post-tanh and
/// `z*` the pre-activation tangents; for the output layer `a*` hold the
/// linear output and `z*` are empty.
struct TangentLayer {
    a: Vec<f64>,
    ax: Vec<f64>,
    at: Vec<f64>,
    axx: Vec<f64>,
    zx: Vec<f64>,
    zt: Vec<f64>,
    zxx: Vec<f64>,
}

struct TangentTrace {
    input: [Vec<f64>; 4],
    layers: Vec<TangentLayer>,
}

impl TangentTrace {
    fn prev(&self, l: usize) -> [&[f64]; 4] {
        if l == 0 {
            [&self.input[0], &self.input[1], &self.input[2], &self.input[3]]
        } else {
            let p = &self.layers[l - 1];
            [&p.a, &p.ax, &p.at, &p.axx]
        }
    }

    fn output(&self) -> &TangentLayer {
        self.layers.last().expect("at least one layer")
    }
}

fn check_field(spec: &MlpSpec) -> Result<(), NetError> {
    if spec.input_dim != 2 || spec.output_dim != 1 {
        return Err(NetError::Shape(format!(
            "input derivatives need a 2-input 1-output net, got {} -> {}",
            spec.input_dim, spec.output_dim
        )));
    }
    Ok(())
}

fn tangent_trace(layers: &[Layer], params: &[f64], points: &DenseMatrix) -> TangentTrace {
    let n = points.rows();
    let mut ex = Vec::with_capacity(2 * n);
    let mut et = Vec::with_capacity(2 * n);
    for _ in 0..n {
        ex.extend_from_slice(&[1.0, 0.0]);
        et.extend_from_slice(&[0.0, 1.0]);
    }
    let mut trace = TangentTrace {
        input: [points.as_slice().to_vec(), ex, et, vec![0.0; 2 * n]],
        layers: Vec::with_capacity(layers.len()),
    };
    for (l, layer) in layers.iter().enumerate() {
        let [a, ax, at, axx] = trace.prev(l);
        let z = affine(layer, params, a, n);
        let zx = linear(layer, params, ax, n);
        let zt = linear(layer, params, at, n);
        let zxx = linear(layer, params, axx, n);
        let next = if layer.hidden {
            let len = z.len();
            let (mut a, mut ax, mut at, mut axx) =
                (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
            for k in 0..len {
                let s0 = z[k].tanh();
                let s1 = 1.0 - s0 * s0;
                let s2 = -2.0 * s0 * s1;
                a[k] = s0;
                ax[k] = s1 * zx[k];
                at[k] = s1 * zt[k];
                axx[k] = s2 * zx[k] * zx[k] + s1 * zxx[k];
            }
            TangentLayer { a, ax, at, axx, zx, zt, zxx }
        } else {
            TangentLayer {
                a: z,
                ax: zx,
                at: zt,
                axx: zxx,
                zx: Vec::new(),
                zt: Vec::new(),
                zxx: Vec::new(),
            }
        };
        trace.layers.push(next);
    }
    trace
}

/// Reverse sweep. `seeds` are the adjoints of `(u, u_x, u_t, u_xx)` per
/// point; returns the adjoints of `(z, z_x, z_t, z_xx)` for every layer.
fn adjoints(
    layers: &[Layer],
    params: &[f64],
    trace: &TangentTrace,
    seeds: [Vec<f64>; 4],
    n: usize,
) -> Vec<[Vec<f64>; 4]> {
    let depth = layers.len();
    let mut out: Vec<[Vec<f64>; 4]> = Vec::with_capacity(depth);
    out.push(seeds);
    for l in (1..depth).rev() {
        let top = out.last().expect("seeded");
        let abar: [Vec<f64>; 4] = [
            pullback(&layers[l], params, &top[0], n),
            pullback(&layers[l], params, &top[1], n),
            pullback(&layers[l], params, &top[2], n),
            pullback(&layers[l], params, &top[3], n),
        ];
        let h = &trace.layers[l - 1];
        let len = abar[0].len();
        let mut zb = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        for k in 0..len {
            let s0 = h.a[k];
            let s1 = 1.0 - s0 * s0;
            let s2 = -2.0 * s0 * s1;
            let s3 = -2.0 * s1 * s1 + 4.0 * s0 * s0 * s1;
            let (zx, zt, zxx) = (h.zx[k], h.zt[k], h.zxx[k]);
            let (b0, bx, bt, bxx) = (abar[0][k], abar[1][k], abar[2][k], abar[3][k]);
            zb[0][k] = b0 * s1 + bx * s2 * zx + bt * s2 * zt + bxx * (s3 * zx * zx + s2 * zxx);
            zb[1][k] = bx * s1 + 2.0 * bxx * s2 * zx;
            zb[2][k] = bt * s1;
            zb[3][k] = bxx * s1;
        }
        out.push(zb);
    }
    out.reverse();
    out
}

fn accumulate_weights_only(layer: &Layer, adj: &[f64], prev: &[f64], n: usize, grad: &mut [f64]) {
    gemm(
        layer.fan_out,
        n,
        layer.fan_in,
        1.0,
        View::transposed(adj, layer.fan_out),
        View::rowmajor(prev, layer.fan_in),
        1.0,
        &mut grad[layer.weight_range()],
        layer.fan_in,
    );
}

fn write_row(layers: &[Layer], trace: &TangentTrace, adj: &[[Vec<f64>; 4]], i: usize, row: &mut [f64]) {
    for (l, layer) in layers.iter().enumerate() {
        let (fi, fo) = (layer.fan_in, layer.fan_out);
        let prev = trace.prev(l);
        let pa: [&[f64]; 4] = std::array::from_fn(|c| &prev[c][i * fi..(i + 1) * fi]);
        let za: [&[f64]; 4] = std::array::from_fn(|c| &adj[l][c][i * fo..(i + 1) * fo]);
        let w = &mut row[layer.weight_range()];
        for j in 0..fo {
            let d = [za[0][j], za[1][j], za[2][j], za[3][j]];
            for (k, wk) in w[j * fi..(j + 1) * fi].iter_mut().enumerate() {
                *wk = d[0] * pa[0][k] + d[1] * pa[1][k] + d[2] * pa[2][k] + d[3] * pa[3][k];
            }
        }
        row[layer.bias_range()].copy_from_slice(za[0]);
    }
}

/// `u, ∂u/∂x, ∂u/∂t, ∂²u/∂x²` at each row `(x, t)` of `points`.
pub fn input_derivatives_batch(
    spec: &MlpSpec,
    params: &[f64],
    points: &DenseMatrix,
) -> Result<Vec<InputDerivatives>, NetError> {
    check_field(spec)?;
    check(spec, params, points, None)?;
    let trace = tangent_trace(&spec.layer_vec(), params, points);
    let o = trace.output();
    Ok((0..points.rows())
        .map(|i| InputDerivatives {
            u: o.a[i],
            du_dx: o.ax[i],
            du_dt: o.at[i],
            d2u_dx2: o.axx[i],
        })
        .collect())
}

pub fn input_derivatives(spec: &MlpSpec, params: &[f64], x: f64, t: f64) -> Result<InputDerivatives, NetError> {
    let pts = DenseMatrix::from_rows(&[&[x, t]]);
    Ok(input_derivatives_batch(spec, params, &pts)?[0])
}

fn physics_seeds(out: &TangentLayer, nu: f64, weights: Option<&[f64]>) -> [Vec<f64>; 4] {
    // f = u_t + u u_x - nu u_xx
    let n = out.a.len();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    [
        (0..n).map(|i| w(i) * out.ax[i]).collect(),
        (0..n).map(|i| w(i) * out.a[i]).collect(),
        (0..n).map(w).collect(),
        (0..n).map(|i| -w(i) * nu).collect(),
    ]
}

fn physics_values(out: &TangentLayer, nu: f64) -> Vec<f64> {
    (0..out.a.len())
        .map(|i| out.at[i] + out.a[i] * out.ax[i] - nu * out.axx[i])
        .collect()
}

/// Stacked residuals: data rows `u(x_i, t_i) - u_i` first, then physics rows
/// `u_t + u u_x - ν u_xx` at the collocation points, with the Jacobian of
/// every row with respect to the parameters. Rows are unweighted.
pub fn pinn_residual_jacobian(
    spec: &MlpSpec,
    params: &[f64],
    points: &PinnPoints,
    nu: f64,
) -> Result<ResidualJacobian, NetError> {
    check_field(spec)?;
    points.check()?;
    let nd = points.data_inputs.rows();
    let data_targets = DenseMatrix::column(&points.data_targets);
    let data = super::residual_jacobian(spec, params, &points.data_inputs, &data_targets)?;

    let layers = spec.layer_vec();
    let nf = points.collocation.rows();
    let trace = tangent_trace(&layers, params, &points.collocation);
    let f = physics_values(trace.output(), nu);
    let adj = adjoints(&layers, params, &trace, physics_seeds(trace.output(), nu, None), nf);

    let p = params.len();
    let mut jac = DenseMatrix::zeros(nd + nf, p);
    let mut residuals = Vec::with_capacity(nd + nf);
    residuals.extend_from_slice(&data.residuals);
    residuals.extend_from_slice(&f);
    jac.as_mut_slice()[..nd * p].copy_from_slice(data.jacobian.as_slice());
    for i in 0..nf {
        write_row(&layers, &trace, &adj, i, jac.row_mut(nd + i));
    }
    Ok(ResidualJacobian {
        residuals: residuals.into(),
        jacobian: jac,
    })
}

/// Data and physics mean-squared terms with the gradient of their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnLossParts {
    pub mse_data: f64,
    pub mse_physics: f64,
    pub gradient: DenseVector,
}

/// `MSE_u + MSE_f` and its gradient, computed with batched reverse sweeps.
pub fn pinn_gradient_parts(
    spec: &MlpSpec,
    params: &[f64],
    points: &PinnPoints,
    nu: f64,
) -> Result<PinnLossParts, NetError> {
    check_field(spec)?;
    points.check()?;
    let data_targets = DenseMatrix::column(&points.data_targets);
    let (mse_data, mut grad) = super::loss_gradient(spec, params, &points.data_inputs, &data_targets)?;

    let layers = spec.layer_vec();
    let nf = points.collocation.rows();
    let trace = tangent_trace(&layers, params, &points.collocation);
    let f = physics_values(trace.output(), nu);
    let mse_physics = f.iter().map(|v| v * v).sum::<f64>() / nf as f64;
    let weights: Vec<f64> = f.iter().map(|v| 2.0 * v / nf as f64).collect();
    let adj = adjoints(&layers, params, &trace, physics_seeds(trace.output(), nu, Some(&weights)), nf);
    for (l, layer) in layers.iter().enumerate() {
        let prev = trace.prev(l);
        accumulate_gradient(layer, &adj[l][0], prev[0], nf, &mut grad);
        for c in 1..4 {
            accumulate_weights_only(layer, &adj[l][c], prev[c], nf, &mut grad);
        }
    }
    Ok(PinnLossParts {
        mse_data,
        mse_physics,
        gradient: grad,
    })
}

/// Physics residuals only (no derivatives with respect to parameters).
pub fn physics_residuals(
    spec: &MlpSpec,
    params: &[f64],
    collocation: &DenseMatrix,
    nu: f64,
) -> Result<Vec<f64>, NetError> {
    check_field(spec)?;
    check(spec, params, collocation, None)?;
    let trace = tangent_trace(&spec.layer_vec(), params, collocation);
    Ok(physics_values(trace.output(), nu))
}
