use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{DenseMatrix, DenseVector};
use crate::net::{forward, physics_residuals, pinn_gradient_parts, pinn_residual_jacobian, MlpSpec, PinnPoints, ResidualJacobian};
use crate::optim::{LeastSquares, Objective};

use super::ProblemError;

/// `u_t + u u_x - ν u_xx`
pub fn burgers_residual(u: f64, u_x: f64, u_t: f64, u_xx: f64, nu: f64) -> f64 {
    u_t + u * u_x - nu * u_xx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// `u(x, 0) = -sin(πx)`
    #[default]
    NegSinPiX,
    /// `u(x, 0) = -sin(x)`
    NegSinX,
}

impl InitialCondition {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            InitialCondition::NegSinPiX => -(PI * x).sin(),
            InitialCondition::NegSinX => -x.sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurgersConfig {
    pub nu: f64,
    pub n_ic: usize,
    pub n_bc: usize,
    pub n_f: usize,
    pub initial_condition: InitialCondition,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self {
            nu: 0.01 / PI,
            n_ic: 50,
            n_bc: 50,
            n_f: 10_000,
            initial_condition: InitialCondition::NegSinPiX,
        }
    }
}

/// Burgers' equation on `x ∈ [-1, 1]`, `t ∈ [0, 1]` with Dirichlet
/// boundaries. Data rows are the initial-condition points followed by the
/// boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersProblem {
    pub nu: f64,
    pub points: PinnPoints,
    pub n_ic: usize,
}

impl BurgersProblem {
    /// From explicit `(x, t, u)` data points and `(x, t)` collocation points.
    /// The first `n_ic` data points are taken as initial-condition points.
    pub fn from_points(
        nu: f64,
        data: &[[f64; 3]],
        n_ic: usize,
        collocation: &[[f64; 2]],
    ) -> Result<Self, ProblemError> {
        if data.is_empty() || collocation.is_empty() {
            return Err(ProblemError::Size("PINN needs data and collocation points".into()));
        }
        if n_ic > data.len() {
            return Err(ProblemError::Size(format!("{n_ic} initial points out of {}", data.len())));
        }
        let inputs: Vec<f64> = data.iter().flat_map(|p| [p[0], p[1]]).collect();
        let colloc: Vec<f64> = collocation.iter().flatten().copied().collect();
        Ok(Self {
            nu,
            points: PinnPoints {
                data_inputs: DenseMatrix::from_vec(data.len(), 2, inputs).expect("shape"),
                data_targets: data.iter().map(|p| p[2]).collect(),
                collocation: DenseMatrix::from_vec(collocation.len(), 2, colloc).expect("shape"),
            },
            n_ic,
        })
    }

    pub fn num_data(&self) -> usize {
        self.points.data_inputs.rows()
    }

    pub fn num_collocation(&self) -> usize {
        self.points.collocation.rows()
    }

    /// `(x, t, u)` initial-condition points.
    pub fn ic_points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.n_ic).map(|i| self.data_point(i))
    }

    /// `(x, t, u)` boundary points.
    pub fn bc_points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (self.n_ic..self.num_data()).map(|i| self.data_point(i))
    }

    fn data_point(&self, i: usize) -> [f64; 3] {
        let r = self.points.data_inputs.row(i);
        [r[0], r[1], self.points.data_targets[i]]
    }
}

/// Random initial and boundary points and a Latin-hypercube collocation set.
pub fn make_burgers_problem(config: &BurgersConfig, seed: u64) -> Result<BurgersProblem, ProblemError> {
    let BurgersConfig {
        nu,
        n_ic,
        n_bc,
        n_f,
        initial_condition,
    } = *config;
    if n_ic == 0 || n_bc == 0 || n_f == 0 {
        return Err(ProblemError::Size(format!(
            "point counts must be positive (n_ic {n_ic}, n_bc {n_bc}, n_f {n_f})"
        )));
    }
    if !(nu >= 0.0) {
        return Err(ProblemError::Size(format!("viscosity must be non-negative, got {nu}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n_ic + n_bc);
    for _ in 0..n_ic {
        let x = rng.gen_range(-1.0..=1.0);
        data.push([x, 0.0, initial_condition.eval(x)]);
    }
    let left = n_bc.div_ceil(2);
    for i in 0..n_bc {
        let x = if i < left { -1.0 } else { 1.0 };
        data.push([x, rng.gen_range(0.0..=1.0), 0.0]);
    }
    let collocation = latin_hypercube(&mut rng, n_f);
    BurgersProblem::from_points(nu, &data, n_ic, &collocation)
}

/// `n` points over `[-1, 1] x [0, 1]`, one per stratum along each axis.
fn latin_hypercube(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    let mut axis = |lo: f64, hi: f64| {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        strata
            .into_iter()
            .map(|k| lo + (hi - lo) * (k as f64 + rng.gen::<f64>()) / n as f64)
            .collect::<Vec<_>>()
    };
    let xs = axis(-1.0, 1.0);
    let ts = axis(0.0, 1.0);
    xs.into_iter().zip(ts).map(|(x, t)| [x, t]).collect()
}

fn check_spec(spec: &MlpSpec) -> Result<(), ProblemError> {
    if spec.input_dim != 2 || spec.output_dim != 1 {
        return Err(ProblemError::Spec(format!(
            "PINN needs a 2 -> 1 network, got {} -> {}",
            spec.input_dim, spec.output_dim
        )));
    }
    Ok(spec.validate()?)
}

/// `MSE_u + MSE_f`: mean squared data residual plus mean squared physics
/// residual.
pub fn pinn_loss(spec: &MlpSpec, params: &[f64], problem: &BurgersProblem) -> Result<f64, ProblemError> {
    check_spec(spec)?;
    let pts = &problem.points;
    if pts.data_inputs.rows() == 0 || pts.collocation.rows() == 0 {
        return Err(ProblemError::Size("PINN needs data and collocation points".into()));
    }
    let pred = forward(spec, params, &pts.data_inputs)?;
    let mse_u = pred
        .as_slice()
        .iter()
        .zip(&pts.data_targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pts.data_targets.len() as f64;
    let f = physics_residuals(spec, params, &pts.collocation, problem.nu)?;
    let mse_f = f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64;
    Ok(mse_u + mse_f)
}

/// A network paired with a [`BurgersProblem`], exposed as an objective.
#[derive(Debug, Clone)]
pub struct BurgersObjective {
    pub spec: MlpSpec,
    pub problem: BurgersProblem,
}

impl BurgersObjective {
    pub fn new(spec: MlpSpec, problem: BurgersProblem) -> Result<Self, ProblemError> {
        check_spec(&spec)?;
        Ok(Self { spec, problem })
    }
}

impl Objective for BurgersObjective {
    fn num_params(&self) -> usize {
        self.spec.param_count()
    }

    fn loss(&self, params: &[f64]) -> f64 {
        pinn_loss(&self.spec, params, &self.problem).expect("parameter length checked by caller")
    }

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, DenseVector) {
        let parts = pinn_gradient_parts(&self.spec, params, &self.problem.points, self.problem.nu)
            .expect("parameter length checked by caller");
        (parts.mse_data + parts.mse_physics, parts.gradient)
    }

    fn as_least_squares(&self) -> Option<&dyn LeastSquares> {
        Some(self)
    }
}

impl LeastSquares for BurgersObjective {
    /// Data rows scaled by `1/√N_u`, physics rows by `1/√N_f`.
    fn residual_jacobian(&self, params: &[f64]) -> ResidualJacobian {
        let mut rj = pinn_residual_jacobian(&self.spec, params, &self.problem.points, self.problem.nu)
            .expect("parameter length checked by caller");
        let nd = self.problem.num_data();
        let nf = self.problem.num_collocation();
        rj.scale_rows(0..nd, (1.0 / nd as f64).sqrt());
        rj.scale_rows(nd..nd + nf, (1.0 / nf as f64).sqrt());
        rj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub x: f64,
    pub t: f64,
    pub u: f64,
}

/// `u` on the lattice of `nx` evenly spaced `x ∈ [-1, 1]` by `nt` evenly
/// spaced `t ∈ [0, 1]`, ordered by `t` then `x`.
pub fn evaluate_field(spec: &MlpSpec, params: &[f64], nx: usize, nt: usize) -> Result<Vec<FieldPoint>, ProblemError> {
    check_spec(spec)?;
    if nx < 2 || nt < 2 {
        return Err(ProblemError::Size(format!("field lattice needs at least 2x2 points, got {nx}x{nt}")));
    }
    let lin = |lo: f64, hi: f64, n: usize, i: usize| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    let mut coords = Vec::with_capacity(2 * nx * nt);
    for j in 0..nt {
        for i in 0..nx {
            coords.push(lin(-1.0, 1.0, nx, i));
            coords.push(lin(0.0, 1.0, nt, j));
        }
    }
    let inputs = DenseMatrix::from_vec(nx * nt, 2, coords).expect("shape");
    let u = forward(spec, params, &inputs)?;
    Ok((0..nx * nt)
        .map(|k| FieldPoint {
            x: inputs.get(k, 0),
            t: inputs.get(k, 1),
            u: u.get(k, 0),
        })
        .collect())
}

/// CSV with header `x,t,u`.
pub fn write_field_csv(path: &Path, field: &[FieldPoint]) -> Result<(), ProblemError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "t", "u"])?;
    for p in field {
        w.write_record([format!("{:.16e}", p.x), format!("{:.16e}", p.t), format!("{:.16e}", p.u)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matvec_transposed;
    use crate::net::init_params;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn small_config() -> BurgersConfig {
        BurgersConfig {
            n_ic: 7,
            n_bc: 5,
            n_f: 20,
            ..Default::default()
        }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(burgers_residual(0.0, 0.0, 0.0, 0.0, 0.3), 0.0);
        assert_eq!(burgers_residual(1.0, 0.0, 0.0, 0.0, 0.3), 0.0);
        assert_eq!(burgers_residual(2.0, 3.0, 1.0, 4.0, 0.5), 5.0);
    }

    #[test]
    fn initial_condition_values() {
        assert!((InitialCondition::NegSinPiX.eval(-0.5) - 1.0).abs() < 1e-15);
        assert_eq!(InitialCondition::NegSinX.eval(-0.5), 0.5f64.sin());
    }

    #[test]
    fn generated_points_respect_conditions() {
        let cfg = small_config();
        let prob = make_burgers_problem(&cfg, 9).unwrap();
        assert_eq!(prob.num_data(), 12);
        assert_eq!(prob.num_collocation(), 20);
        for [x, t, u] in prob.ic_points() {
            assert_eq!(t, 0.0);
            assert!((-1.0..=1.0).contains(&x));
            assert_eq!(u, cfg.initial_condition.eval(x));
        }
        let bc: Vec<_> = prob.bc_points().collect();
        assert_eq!(bc.len(), 5);
        assert_eq!(bc.iter().filter(|p| p[0] == -1.0).count(), 3);
        assert_eq!(bc.iter().filter(|p| p[0] == 1.0).count(), 2);
        for [_, t, u] in bc {
            assert_eq!(u, 0.0);
            assert!((0.0..=1.0).contains(&t));
        }
        let c = &prob.points.collocation;
        for i in 0..c.rows() {
            assert!((-1.0..=1.0).contains(&c.get(i, 0)));
            assert!((0.0..=1.0).contains(&c.get(i, 1)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small_config();
        assert_eq!(make_burgers_problem(&cfg, 4).unwrap(), make_burgers_problem(&cfg, 4).unwrap());
        assert_ne!(make_burgers_problem(&cfg, 4).unwrap(), make_burgers_problem(&cfg, 5).unwrap());
    }

    #[test]
    fn zero_counts_rejected() {
        let cfg = BurgersConfig { n_bc: 0, ..small_config() };
        assert!(matches!(make_burgers_problem(&cfg, 0), Err(ProblemError::Size(_))));
    }

    #[test]
    fn latin_hypercube_has_one_point_per_stratum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 64;
        let pts = latin_hypercube(&mut rng, n);
        let mut xs = vec![0; n];
        let mut ts = vec![0; n];
        for [x, t] in pts {
            xs[(((x + 1.0) / 2.0 * n as f64) as usize).min(n - 1)] += 1;
            ts[((t * n as f64) as usize).min(n - 1)] += 1;
        }
        assert!(xs.iter().all(|&c| c == 1));
        assert!(ts.iter().all(|&c| c == 1));
    }

    #[test]
    fn zero_network_loss_examples() {
        let spec = MlpSpec::new(2, &[3], 1);
        let zero = vec![0.0; spec.param_count()];
        let ic = InitialCondition::NegSinPiX;
        // Targets at x = -1, 0, 1 are zero up to rounding of sin(±π).
        let data: Vec<[f64; 3]> = [-1.0, 0.0, 1.0].iter().map(|&x| [x, 0.0, 0.0]).collect();
        let prob = BurgersProblem::from_points(0.01 / PI, &data, 3, &[[0.2, 0.3]]).unwrap();
        assert!(ic.eval(1.0).abs() < 1e-15);
        assert_eq!(pinn_loss(&spec, &zero, &prob).unwrap(), 0.0);
        let rj = pinn_residual_jacobian(&spec, &zero, &prob.points, prob.nu).unwrap();
        assert!(rj.residuals.iter().all(|&r| r == 0.0));

        let prob = BurgersProblem::from_points(0.01 / PI, &[[0.5, 0.0, 1.0]], 1, &[[0.1, 0.9]]).unwrap();
        assert_eq!(pinn_loss(&spec, &zero, &prob).unwrap(), 1.0);
    }

    #[test]
    fn loss_matches_scaled_residuals() {
        let spec = MlpSpec::new(2, &[5, 4], 1);
        let prob = make_burgers_problem(&small_config(), 2).unwrap();
        let obj = BurgersObjective::new(spec.clone(), prob.clone()).unwrap();
        let p = init_params(&spec, 8);
        let loss = pinn_loss(&spec, &p, &prob).unwrap();
        let raw = pinn_residual_jacobian(&spec, &p, &prob.points, prob.nu).unwrap();
        let (nd, nf) = (prob.num_data(), prob.num_collocation());
        let du: f64 = raw.residuals[..nd].iter().map(|r| r * r).sum::<f64>() / nd as f64;
        let df: f64 = raw.residuals[nd..].iter().map(|r| r * r).sum::<f64>() / nf as f64;
        assert!((loss - (du + df)).abs() <= 1e-14 * loss);

        let rj = obj.residual_jacobian(&p);
        let rr: f64 = rj.residuals.iter().map(|r| r * r).sum();
        assert!((rr - loss).abs() <= 1e-14 * loss);
        let (l2, g) = obj.loss_and_gradient(&p);
        assert!((l2 - loss).abs() <= 1e-14 * loss);
        let jtr = matvec_transposed(&rj.jacobian, &rj.residuals).unwrap();
        let scale = crate::linalg::norm_inf(&g);
        for (a, b) in g.iter().zip(jtr.iter()) {
            assert!((a - 2.0 * b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn field_lattice_and_csv() {
        let spec = MlpSpec::new(2, &[3], 1);
        let p = init_params(&spec, 0);
        let field = evaluate_field(&spec, &p, 3, 2).unwrap();
        let xt: Vec<(f64, f64)> = field.iter().map(|f| (f.x, f.t)).collect();
        assert_eq!(xt, vec![(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        write_field_csv(&path, &field).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["x", "t", "u"]);
        let back: Vec<FieldPoint> = r.deserialize().map(|x| x.unwrap()).collect();
        assert_eq!(back, field);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>(), width in proptest::sample::select(vec![1usize, 2, 4]), depth in 0usize..=2) {
            let spec = MlpSpec::uniform(2, depth, width, 1);
            let cfg = BurgersConfig { n_ic: 3, n_bc: 2, n_f: 5, ..Default::default() };
            let prob = make_burgers_problem(&cfg, seed).unwrap();
            let obj = BurgersObjective::new(spec.clone(), prob).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let p: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, g) = obj.loss_and_gradient(&p);
            let scale = crate::linalg::norm_inf(&g).max(1e-3);
            for j in 0..p.len() {
                let h = 1e-6 * p[j].abs().max(1.0);
                let mut q = p.clone();
                q[j] += h;
                let fp = obj.loss(&q);
                q[j] = p[j] - h;
                let fm = obj.loss(&q);
                let fd = (fp - fm) / (2.0 * h);
                prop_assert!((g[j] - fd).abs() <= 1e-5 * scale, "param {j}: {} vs {fd}", g[j]);
            }
        }
    }
}
