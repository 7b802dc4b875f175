//! Strong-Wolfe line search: bracketing followed by cubic-interpolation zoom.
//!
//! Near a minimizer the loss changes fall below rounding error and the
//! sufficient-decrease test becomes noise. Loss differences within
//! `FLAT_RTOL · |f0|` are treated as ties, resolved with the directional
//! derivative, and a trial that meets the curvature condition with a loss
//! within that band of `f0` is accepted. Such a step is reported as
//! converged only if the loss did not increase.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, DenseVector};

use super::OptimError;

const FLAT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WolfeParams {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_evals: usize,
    pub initial_step: f64,
    pub max_step: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_evals: 50,
            initial_step: 1.0,
            max_step: 1e10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub loss: f64,
    pub grad: DenseVector,
    pub evals: usize,
    /// False when the budget ran out or the bracket collapsed; `alpha` is
    /// then the lowest-loss step seen (possibly 0).
    pub converged: bool,
}

#[derive(Clone)]
struct Sample {
    alpha: f64,
    f: f64,
    dphi: f64,
    g: DenseVector,
}

struct Search<'a, F> {
    eval: F,
    params: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    dphi0: f64,
    flat: f64,
    opts: WolfeParams,
    evals: usize,
    best: Sample,
    trial: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> (f64, DenseVector)> Search<'_, F> {
    fn sample(&mut self, alpha: f64) -> Sample {
        for ((t, p), d) in self.trial.iter_mut().zip(self.params).zip(self.dir) {
            *t = p + alpha * d;
        }
        let (f, g) = (self.eval)(&self.trial);
        self.evals += 1;
        let f = if f.is_finite() { f } else { f64::INFINITY };
        let dphi = dot(&g, self.dir);
        let s = Sample { alpha, f, dphi, g };
        if s.f < self.best.f {
            self.best = s.clone();
        }
        s
    }

    fn armijo_fails(&self, s: &Sample) -> bool {
        let required = -self.opts.c1 * s.alpha * self.dphi0;
        if required <= self.flat {
            s.f > self.f0 + self.flat
        } else {
            s.f > self.f0 - required
        }
    }

    /// Curvature holds, the required decrease is below what the loss values
    /// can resolve, and the loss is within that band of `f0`.
    fn flat_accept(&self, s: &Sample) -> bool {
        s.f <= self.f0 + self.flat && -self.opts.c1 * s.alpha * self.dphi0 <= self.flat && self.curvature_holds(s)
    }

    /// `s` lies past the minimizer relative to `lo`.
    fn overshoots(&self, s: &Sample, lo: &Sample) -> bool {
        if (s.f - lo.f).abs() <= self.flat {
            s.dphi * (s.alpha - lo.alpha) >= 0.0
        } else {
            s.f > lo.f
        }
    }

    fn curvature_holds(&self, s: &Sample) -> bool {
        s.dphi.abs() <= -self.opts.c2 * self.dphi0
    }

    fn finish(self, s: Sample, converged: bool) -> LineSearchOutcome {
        LineSearchOutcome {
            alpha: s.alpha,
            loss: s.f,
            grad: s.g,
            evals: self.evals,
            converged,
        }
    }

    fn give_up(self) -> LineSearchOutcome {
        let best = self.best.clone();
        self.finish(best, false)
    }

    fn zoom(mut self, mut lo: Sample, mut hi: Sample) -> LineSearchOutcome {
        loop {
            if self.evals >= self.opts.max_evals {
                return self.give_up();
            }
            let (a, b) = if lo.alpha < hi.alpha {
                (lo.alpha, hi.alpha)
            } else {
                (hi.alpha, lo.alpha)
            };
            let width = b - a;
            if width <= 1e-14 * b.max(1.0) {
                return self.give_up();
            }
            let guard = 0.1 * width;
            let alpha = if !hi.f.is_finite() {
                0.5 * (a + b)
            } else if (hi.f - lo.f).abs() <= self.flat {
                secant(&lo, &hi, a + guard, b - guard)
            } else {
                cubic_minimizer(&lo, &hi, a + guard, b - guard)
            };
            let s = self.sample(alpha);
            if self.flat_accept(&s) {
                let ok = s.f <= self.f0;
                return self.finish(s, ok);
            }
            if self.armijo_fails(&s) || self.overshoots(&s, &lo) {
                hi = s;
            } else {
                if s.f <= self.f0 && self.curvature_holds(&s) {
                    return self.finish(s, true);
                }
                if s.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = s;
            }
        }
    }
}

/// Zero of the linear interpolant of the directional derivative, clamped to
/// `[lo, hi]`.
fn secant(s1: &Sample, s2: &Sample, lo: f64, hi: f64) -> f64 {
    let x = s1.alpha - s1.dphi * (s2.alpha - s1.alpha) / (s2.dphi - s1.dphi);
    if x.is_finite() {
        x.clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    }
}

/// Minimiser of the cubic through two samples, clamped to `[lo, hi]`.
fn cubic_minimizer(s1: &Sample, s2: &Sample, lo: f64, hi: f64) -> f64 {
    let (x1, f1, g1) = (s1.alpha, s1.f, s1.dphi);
    let (x2, f2, g2) = (s2.alpha, s2.f, s2.dphi);
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2sq = d1 * d1 - g1 * g2;
    let mid = 0.5 * (lo + hi);
    if d2sq < 0.0 {
        return mid;
    }
    let d2 = d2sq.sqrt();
    let x = if x1 <= x2 {
        x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
    } else {
        x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
    };
    if x.is_finite() {
        x.clamp(lo, hi)
    } else {
        mid
    }
}

/// Finds a step along `dir` satisfying the strong Wolfe conditions.
///
/// `eval` returns the loss and gradient at a trial point. At most
/// `opts.max_evals` evaluations are made.
pub fn wolfe_line_search<F>(
    eval: F,
    params: &[f64],
    dir: &[f64],
    f0: f64,
    g0: &[f64],
    opts: &WolfeParams,
) -> Result<LineSearchOutcome, OptimError>
where
    F: FnMut(&[f64]) -> (f64, DenseVector),
{
    let dphi0 = dot(g0, dir);
    if !(dphi0 < 0.0) {
        return Err(OptimError::NotDescent(dphi0));
    }
    let origin = Sample {
        alpha: 0.0,
        f: f0,
        dphi: dphi0,
        g: g0.into(),
    };
    let mut search = Search {
        eval,
        params,
        dir,
        f0,
        dphi0,
        flat: FLAT_RTOL * f0.abs(),
        opts: *opts,
        evals: 0,
        best: origin.clone(),
        trial: vec![0.0; params.len()],
    };
    let mut prev = origin;
    let mut alpha = opts.initial_step.min(opts.max_step);
    loop {
        if search.evals >= opts.max_evals {
            return Ok(search.give_up());
        }
        let cur = search.sample(alpha);
        if search.flat_accept(&cur) {
            let ok = cur.f <= f0;
            return Ok(search.finish(cur, ok));
        }
        if search.armijo_fails(&cur) || (search.evals > 1 && search.overshoots(&cur, &prev)) {
            return Ok(search.zoom(prev, cur));
        }
        if cur.f <= f0 && search.curvature_holds(&cur) {
            return Ok(search.finish(cur, true));
        }
        if cur.dphi >= 0.0 {
            return Ok(search.zoom(cur, prev));
        }
        if alpha >= opts.max_step {
            return Ok(search.give_up());
        }
        let lo = alpha + 0.01 * (alpha - prev.alpha);
        let hi = (10.0 * alpha).min(opts.max_step);
        let next = cubic_minimizer(&prev, &cur, lo, hi);
        prev = cur;
        alpha = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(p: &[f64]) -> (f64, DenseVector) {
        (p[0] * p[0], vec![2.0 * p[0]].into())
    }

    #[test]
    fn quadratic_accepts_exact_minimiser() {
        let opts = WolfeParams::default();
        let out = wolfe_line_search(quad, &[1.0], &[-1.0], 1.0, &[2.0], &opts).unwrap();
        assert!(out.converged);
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.loss, 0.0);
        assert!(out.loss <= 1.0 + opts.c1 * out.alpha * -2.0);
    }

    #[test]
    fn overshooting_start_is_zoomed_back() {
        // f = θ², θ = 1, d = -1, α0 = 10: overshoots to f = 81.
        let opts = WolfeParams {
            initial_step: 10.0,
            ..Default::default()
        };
        let out = wolfe_line_search(quad, &[1.0], &[-1.0], 1.0, &[2.0], &opts).unwrap();
        assert!(out.converged);
        let dphi = -out.grad[0];
        assert!(out.loss <= 1.0 + opts.c1 * out.alpha * -2.0);
        assert!(dphi.abs() <= opts.c2 * 2.0);
        assert!(out.evals <= opts.max_evals);
    }

    #[test]
    fn short_start_is_extended() {
        // f = (θ - 100)², starting far from the minimiser with a tiny step.
        let f = |p: &[f64]| ((p[0] - 100.0).powi(2), DenseVector::from(vec![2.0 * (p[0] - 100.0)]));
        let opts = WolfeParams {
            initial_step: 1e-3,
            ..Default::default()
        };
        let out = wolfe_line_search(f, &[0.0], &[1.0], 1e4, &[-200.0], &opts).unwrap();
        assert!(out.converged);
        assert!(out.grad[0].abs() <= 0.9 * 200.0);
        assert!(out.loss < 1e4);
    }

    #[test]
    fn linear_objective_never_meets_curvature() {
        // Constant slope: Armijo holds for every step but the directional
        // derivative never shrinks, so the search extends until max_step.
        let f = |p: &[f64]| (-3.0 * p[0], DenseVector::from(vec![-3.0]));
        let opts = WolfeParams::default();
        let out = wolfe_line_search(f, &[0.0], &[1.0], 0.0, &[-3.0], &opts).unwrap();
        assert!(!out.converged);
        assert!(out.alpha >= opts.initial_step);
        assert!(out.loss <= opts.c1 * out.alpha * -3.0);
        assert!(out.evals <= opts.max_evals);
    }

    #[test]
    fn flat_loss_is_resolved_with_the_derivative() {
        // f = 1 + (θ - 1e-9)²: every loss value near θ = 0 rounds to 1.
        let f = |p: &[f64]| (1.0 + (p[0] - 1e-9).powi(2), DenseVector::from(vec![2.0 * (p[0] - 1e-9)]));
        let (f0, g0) = f(&[0.0]);
        let out = wolfe_line_search(f, &[0.0], &[1.0], f0, &g0, &WolfeParams::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.loss, f0);
        assert!(out.grad[0].abs() <= 0.9 * g0[0].abs());
    }

    #[test]
    fn ascent_direction_is_rejected() {
        let err = wolfe_line_search(quad, &[1.0], &[1.0], 1.0, &[2.0], &WolfeParams::default());
        assert!(matches!(err, Err(OptimError::NotDescent(d)) if d == 2.0));
    }

    #[test]
    fn non_finite_trials_are_backed_off() {
        // Blows up beyond θ = 2.
        let f = |p: &[f64]| {
            if p[0] > 2.0 {
                (f64::NAN, DenseVector::from(vec![f64::NAN]))
            } else {
                quad(p)
            }
        };
        let opts = WolfeParams {
            initial_step: 50.0,
            ..Default::default()
        };
        let out = wolfe_line_search(f, &[-1.0], &[1.0], 1.0, &[-2.0], &opts).unwrap();
        assert!(out.loss.is_finite());
        assert!(out.loss < 1.0);
    }

    #[test]
    fn budget_is_respected() {
        // Rugged objective that keeps the zoom busy.
        let f = |p: &[f64]| {
            let x = p[0];
            ((50.0 * x).sin() + x * x, DenseVector::from(vec![50.0 * (50.0 * x).cos() + 2.0 * x]))
        };
        let opts = WolfeParams {
            max_evals: 5,
            c2: 1e-6,
            ..Default::default()
        };
        let g0 = 50.0 * (50.0f64 * 0.3).cos() + 0.6;
        let d = -g0.signum();
        let f0 = (50.0f64 * 0.3).sin() + 0.09;
        let out = wolfe_line_search(f, &[0.3], &[d], f0, &[g0], &opts).unwrap();
        assert!(out.evals <= 5);
        assert!(out.loss <= f0);
    }
}
