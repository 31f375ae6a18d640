//! The two PDE problems, their variational losses, exact loss gradients,
//! exact solutions and error metrics.
//!
//! On the unit hypercube with zero Neumann data the solver targets
//!
//! * the Poisson equation `-lap(u) = f` with `int f = 0`, through
//!   `L_P(v) = int( 1/2 |grad v|^2 - f v ) + 1/2 (int v)^2`, and
//! * the static Schroedinger equation `-lap(u) + V u = g` with
//!   `0 < V_min <= V <= V_max`, through
//!   `L_S(v) = int( 1/2 |grad v|^2 - g v + 1/2 V v^2 )`.
//!
//! Empirical losses replace the integrals with equal-weight averages over a
//! sample block; the zero-mean penalty of the Poisson loss uses the same
//! batch mean, and its gradient is the product of the two batch means
//! exactly as the estimator is defined (no bias correction).

use crate::error::{Error, Result};
use crate::net::{self, DualEval, NetShape, ParamVector};
use crate::sampler::{SampleBlock, SamplerTag};
use crate::util::{pairwise_mean, pairwise_vec_sum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Built-in problem families selectable from configuration. Coefficients
/// generalize the d = 20 examples to any dimension by replacing the sum
/// bound with d (the Poisson normalizing constant is recomputed as
/// `d * 17/5040 + (d/12)^2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemId {
    Poisson,
    Schroedinger,
}

impl ProblemId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Poisson => "poisson",
            ProblemId::Schroedinger => "schroedinger",
        }
    }
}

type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Coefficient data of one PDE instance.
#[derive(Clone)]
pub enum Coefficients {
    /// Right-hand side f of the Poisson problem (must have zero mean).
    Poisson { f: ScalarField },
    /// Potential V (with its bounds) and right-hand side g.
    Schroedinger {
        v_pot: ScalarField,
        g: ScalarField,
        v_min: f64,
        v_max: f64,
    },
}

/// Tagged description of a PDE instance: coefficients plus (optionally) the
/// exact solution oracle used by error metrics and residual certification.
#[derive(Clone)]
pub struct Problem {
    pub id: ProblemId,
    d: usize,
    coeffs: Coefficients,
    exact: Option<ScalarField>,
    exact_grad: Option<VectorField>,
    /// Analytic value of `int u*^2` when known (used as a quadrature cross-check).
    pub exact_l2_norm_sq: Option<f64>,
}

/// `sin(pi x)`, exact at integer x (where the analytic normal derivatives
/// must vanish identically, not just to rounding).
pub fn sinpi(x: f64) -> f64 {
    let r2 = x.rem_euclid(2.0);
    let (sign, r) = if r2 >= 1.0 { (-1.0, r2 - 1.0) } else { (1.0, r2) };
    let v = if r <= 0.25 {
        (PI * r).sin()
    } else if r < 0.75 {
        (PI * (0.5 - r)).cos()
    } else {
        (PI * (1.0 - r)).sin()
    };
    sign * v
}

/// `cos(pi x)`, exact at half-integer x.
pub fn cospi(x: f64) -> f64 {
    sinpi(x + 0.5)
}

/// `S(x) = sum_k (x_k^3/3 - x_k^2/2)`, the inner sum of the Poisson example.
fn poly_sum(x: &[f64]) -> f64 {
    x.iter().map(|&t| t * t * t / 3.0 - t * t / 2.0).sum()
}

/// Normalizing constant making the Poisson exact solution zero-mean:
/// `int S^2 = d * 17/5040 + (d/12)^2` over the unit cube.
pub fn poisson_mean_constant(d: usize) -> f64 {
    let df = d as f64;
    df * 17.0 / 5040.0 + (df / 12.0) * (df / 12.0)
}

impl Problem {
    /// Poisson example: `-lap(u) = f` with
    /// `u*(x) = S(x)^2 - (d*17/5040 + (d/12)^2)`, `S = sum(x_k^3/3 - x_k^2/2)`.
    pub fn poisson(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        let c = poisson_mean_constant(d);
        let f: ScalarField = Arc::new(move |x: &[f64]| {
            let s = poly_sum(x);
            let sq: f64 = x.iter().map(|&t| (t * t - t) * (t * t - t)).sum();
            let lin: f64 = x.iter().map(|&t| 4.0 * t - 2.0).sum();
            -(2.0 * sq + lin * s)
        });
        let exact: ScalarField = Arc::new(move |x: &[f64]| {
            let s = poly_sum(x);
            s * s - c
        });
        let exact_grad: VectorField = Arc::new(move |x: &[f64]| {
            let s = poly_sum(x);
            x.iter().map(|&t| 2.0 * s * (t * t - t)).collect()
        });
        Ok(Problem {
            id: ProblemId::Poisson,
            d,
            coeffs: Coefficients::Poisson { f },
            exact: Some(exact),
            exact_grad: Some(exact_grad),
            exact_l2_norm_sq: None,
        })
    }

    /// Schroedinger example: `-lap(u) + pi^2 u = 2 pi^2 sum cos(pi x_k)`
    /// with `u*(x) = sum cos(pi x_k)` and `int u*^2 = d/2`.
    pub fn schroedinger(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        let v_pot: ScalarField = Arc::new(|_x: &[f64]| PI * PI);
        let g: ScalarField =
            Arc::new(|x: &[f64]| 2.0 * PI * PI * x.iter().map(|&t| cospi(t)).sum::<f64>());
        let exact: ScalarField = Arc::new(|x: &[f64]| x.iter().map(|&t| cospi(t)).sum());
        let exact_grad: VectorField =
            Arc::new(|x: &[f64]| x.iter().map(|&t| -PI * sinpi(t)).collect());
        Ok(Problem {
            id: ProblemId::Schroedinger,
            d,
            coeffs: Coefficients::Schroedinger {
                v_pot,
                g,
                v_min: PI * PI,
                v_max: PI * PI,
            },
            exact: Some(exact),
            exact_grad: Some(exact_grad),
            exact_l2_norm_sq: Some(d as f64 / 2.0),
        })
    }

    pub fn from_id(id: ProblemId, d: usize) -> Result<Self> {
        match id {
            ProblemId::Poisson => Problem::poisson(d),
            ProblemId::Schroedinger => Problem::schroedinger(d),
        }
    }

    /// Register a user-supplied problem. The exact solution may be omitted,
    /// in which case the error metrics are unavailable.
    pub fn custom(
        id: ProblemId,
        d: usize,
        coeffs: Coefficients,
        exact: Option<ScalarField>,
        exact_grad: Option<VectorField>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        match (&id, &coeffs) {
            (ProblemId::Poisson, Coefficients::Poisson { .. }) => {}
            (ProblemId::Schroedinger, Coefficients::Schroedinger { v_min, v_max, .. }) => {
                if !(*v_min > 0.0 && v_min <= v_max) {
                    return Err(Error::Config(format!(
                        "potential bounds must satisfy 0 < V_min <= V_max (got {v_min}, {v_max})"
                    )));
                }
            }
            _ => return Err(Error::Config("problem tag does not match coefficients".into())),
        }
        Ok(Problem { id, d, coeffs, exact, exact_grad, exact_l2_norm_sq: None })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> NetShape {
        NetShape::new(self.d).expect("dimension validated at construction")
    }

    pub fn has_exact_solution(&self) -> bool {
        self.exact.is_some()
    }

    /// Quadrature sanity checks on the coefficient functions: the Poisson
    /// right-hand side must have (near-)zero mean, the Schroedinger
    /// potential must respect its declared bounds on sampled points.
    pub fn validate(&self, points: &SampleBlock) -> Result<()> {
        if points.d() != self.d {
            return Err(Error::Config("validation point set dimension mismatch".into()));
        }
        match &self.coeffs {
            Coefficients::Poisson { f } => {
                let vals: Vec<f64> = points.rows().map(|x| f(x)).collect();
                let mean = pairwise_mean(&vals);
                let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                if mean.abs() > 1e-2 * scale {
                    return Err(Error::Config(format!(
                        "Poisson right-hand side has nonzero mean {mean:.3e} (scale {scale:.3e})"
                    )));
                }
            }
            Coefficients::Schroedinger { v_pot, v_min, v_max, .. } => {
                for x in points.rows() {
                    let v = v_pot(x);
                    if !(v >= *v_min && v <= *v_max) {
                        return Err(Error::Config(format!(
                            "potential value {v} outside declared bounds [{v_min}, {v_max}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-point Poisson integrand `1/2 |grad v|^2 - f v`.
pub fn mu_p(e: &DualEval, f_val: f64) -> f64 {
    0.5 * e.grad_x.iter().map(|g| g * g).sum::<f64>() - f_val * e.value
}

/// Per-point Schroedinger integrand `1/2 |grad v|^2 - g v + 1/2 V v^2`.
pub fn mu_s(e: &DualEval, v_val: f64, g_val: f64) -> f64 {
    0.5 * e.grad_x.iter().map(|g| g * g).sum::<f64>() - g_val * e.value
        + 0.5 * v_val * e.value * e.value
}

/// Gradient estimate for one block, i.e. the exact parameter gradient of
/// the empirical loss at the block.
#[derive(Debug, Clone)]
pub struct GradEstimate {
    pub g: Vec<f64>,
    pub block_meta: BlockMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockMeta {
    pub iteration: u64,
    pub n: usize,
    pub sampler: Option<SamplerTag>,
}

/// Empirical loss split into the mean-of-integrand part and the zero-mean
/// penalty (Poisson only; zero for Schroedinger). The full loss is the sum
/// of the two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub mu_mean: f64,
    pub penalty: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.mu_mean + self.penalty
    }
}

fn check_block(problem: &Problem, block: &SampleBlock) -> Result<()> {
    if block.d() != problem.d {
        return Err(Error::Config(format!(
            "block dimension {} does not match problem dimension {}",
            block.d(),
            problem.d
        )));
    }
    Ok(())
}

/// Empirical loss of the network on one block, decomposed.
pub fn empirical_loss_parts(
    problem: &Problem,
    params: &ParamVector,
    block: &SampleBlock,
) -> Result<LossParts> {
    check_block(problem, block)?;
    let evals: Vec<DualEval> = block
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| net::eval_with_spatial_grad(params, x))
        .collect::<Result<_>>()?;

    match &problem.coeffs {
        Coefficients::Poisson { f } => {
            let mus: Vec<f64> = evals
                .iter()
                .zip(block.rows())
                .map(|(e, x)| mu_p(e, f(x)))
                .collect();
            let values: Vec<f64> = evals.iter().map(|e| e.value).collect();
            let mean_v = pairwise_mean(&values);
            Ok(LossParts {
                mu_mean: pairwise_mean(&mus),
                penalty: 0.5 * mean_v * mean_v,
            })
        }
        Coefficients::Schroedinger { v_pot, g, .. } => {
            let mus: Vec<f64> = evals
                .iter()
                .zip(block.rows())
                .map(|(e, x)| mu_s(e, v_pot(x), g(x)))
                .collect();
            Ok(LossParts { mu_mean: pairwise_mean(&mus), penalty: 0.0 })
        }
    }
}

/// Empirical loss of the network on one block.
pub fn empirical_loss(problem: &Problem, params: &ParamVector, block: &SampleBlock) -> Result<f64> {
    Ok(empirical_loss_parts(problem, params, block)?.total())
}

/// Per-point contribution to the loss gradient, produced from one
/// augmented evaluation.
struct PointGrad {
    /// mu-part gradient contribution for this point.
    contrib: Vec<f64>,
    /// d(v)/d(theta), kept for the Poisson penalty term.
    grad_theta: Vec<f64>,
    value: f64,
    mu: f64,
}

fn point_grad(problem: &Problem, params: &ParamVector, x: &[f64]) -> Result<PointGrad> {
    let d = problem.d;
    let full = net::eval_full(params, x)?;
    let dim = full.grad_theta.len();

    // (grad_theta grad_x v) . grad_x v, the gradient of 1/2 |grad_x v|^2.
    let mut contrib = vec![0.0; dim];
    for (c, row) in contrib.iter_mut().zip(full.grad_theta_grad_x.chunks_exact(d)) {
        *c = row.iter().zip(&full.grad_x).map(|(r, gx)| r * gx).sum();
    }

    let dual = DualEval { value: full.value, grad_x: full.grad_x.clone() };
    let mu;
    match &problem.coeffs {
        Coefficients::Poisson { f } => {
            let fv = f(x);
            mu = mu_p(&dual, fv);
            for (c, gt) in contrib.iter_mut().zip(&full.grad_theta) {
                *c -= fv * gt;
            }
        }
        Coefficients::Schroedinger { v_pot, g, .. } => {
            let (vv, gv) = (v_pot(x), g(x));
            mu = mu_s(&dual, vv, gv);
            for (c, gt) in contrib.iter_mut().zip(&full.grad_theta) {
                *c += (vv * full.value - gv) * gt;
            }
        }
    }

    Ok(PointGrad { contrib, grad_theta: full.grad_theta, value: full.value, mu })
}

/// Loss and its exact gradient from shared per-point evaluations.
///
/// The gradient is the exact derivative of `empirical_loss` at the block:
/// the mean over points of the per-point integrand gradients, plus for the
/// Poisson problem `(mean of v) * (mean of grad_theta v)` from the penalty.
pub fn loss_and_gradient(
    problem: &Problem,
    params: &ParamVector,
    block: &SampleBlock,
) -> Result<(f64, GradEstimate)> {
    check_block(problem, block)?;
    let n = block.n();
    let nf = n as f64;

    let per_point: Vec<PointGrad> = block
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|x| point_grad(problem, params, x))
        .collect::<Result<_>>()?;

    let mus: Vec<f64> = per_point.iter().map(|p| p.mu).collect();
    let mu_mean = pairwise_mean(&mus);

    let contribs: Vec<Vec<f64>> = per_point.iter().map(|p| p.contrib.clone()).collect();
    let mut grad = pairwise_vec_sum(&contribs);
    grad.iter_mut().for_each(|g| *g /= nf);

    let loss = match &problem.coeffs {
        Coefficients::Poisson { .. } => {
            let values: Vec<f64> = per_point.iter().map(|p| p.value).collect();
            let mean_v = pairwise_mean(&values);
            let gts: Vec<Vec<f64>> = per_point.iter().map(|p| p.grad_theta.clone()).collect();
            let mut mean_gt = pairwise_vec_sum(&gts);
            mean_gt.iter_mut().for_each(|g| *g /= nf);
            for (g, mg) in grad.iter_mut().zip(&mean_gt) {
                *g += mean_v * mg;
            }
            mu_mean + 0.5 * mean_v * mean_v
        }
        Coefficients::Schroedinger { .. } => mu_mean,
    };

    Ok((
        loss,
        GradEstimate {
            g: grad,
            block_meta: BlockMeta { iteration: block.iteration, n, sampler: None },
        },
    ))
}

/// Exact gradient of the empirical loss on one block.
pub fn gradient_estimator(
    problem: &Problem,
    params: &ParamVector,
    block: &SampleBlock,
) -> Result<GradEstimate> {
    Ok(loss_and_gradient(problem, params, block)?.1)
}

/// Closed-form exact solution of a built-in problem.
pub fn exact_solution(problem: &Problem, x: &[f64]) -> Result<f64> {
    let u = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Unsupported("problem has no exact solution oracle".into()))?;
    Ok(u(x))
}

/// Analytic spatial gradient of the exact solution (vanishes identically in
/// the normal direction on every face of the cube).
pub fn exact_solution_grad(problem: &Problem, x: &[f64]) -> Result<Vec<f64>> {
    let g = problem
        .exact_grad
        .as_ref()
        .ok_or_else(|| Error::Unsupported("problem has no exact gradient oracle".into()))?;
    Ok(g(x))
}

/// Finite-difference certification that the exact-solution oracle solves
/// the strong equation at an interior point: returns the absolute residual
/// of the central second-difference Laplacian with step `h`.
pub fn pde_residual_check(problem: &Problem, x: &[f64], h: f64) -> Result<f64> {
    if x.len() != problem.d {
        return Err(Error::Config("point dimension mismatch".into()));
    }
    if x.iter().any(|&c| c < h || c > 1.0 - h) {
        return Err(Error::Config(format!(
            "point must stay at least h = {h} away from the boundary"
        )));
    }
    let u = |x: &[f64]| exact_solution(problem, x);
    let u0 = u(x)?;
    let mut lap = 0.0;
    let mut xp = x.to_vec();
    for k in 0..problem.d {
        xp[k] = x[k] + h;
        let up = u(&xp)?;
        xp[k] = x[k] - h;
        let um = u(&xp)?;
        xp[k] = x[k];
        lap += (up - 2.0 * u0 + um) / (h * h);
    }
    let residual = match &problem.coeffs {
        Coefficients::Poisson { f } => -lap - f(x),
        Coefficients::Schroedinger { v_pot, g, .. } => -lap + v_pot(x) * u0 - g(x),
    };
    Ok(residual.abs())
}

/// Relative L2 error of an arbitrary function against the exact solution,
/// both integrals approximated by equal-weight averages on the same fixed
/// point set.
pub fn relative_l2_error_of<F>(problem: &Problem, v: F, eval_set: &SampleBlock) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    check_block(problem, eval_set)?;
    let u = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Unsupported("problem has no exact solution oracle".into()))?;
    let rows: Vec<&[f64]> = eval_set.rows().collect();
    let pairs: Vec<(f64, f64)> = rows
        .into_par_iter()
        .map(|x| {
            let vx = v(x)?;
            let ux = u(x);
            Ok((vx, ux))
        })
        .collect::<Result<_>>()?;
    let num: Vec<f64> = pairs.iter().map(|(vx, ux)| (vx - ux) * (vx - ux)).collect();
    let den: Vec<f64> = pairs.iter().map(|(_, ux)| ux * ux).collect();
    let num = pairwise_mean(&num);
    let den = pairwise_mean(&den);
    if den <= 0.0 {
        return Err(Error::NonFinite(format!(
            "exact-solution L2 norm estimate is non-positive ({den})"
        )));
    }
    Ok((num / den).sqrt())
}

/// Relative L2 error of the network against the exact solution.
pub fn relative_l2_error(
    problem: &Problem,
    params: &ParamVector,
    eval_set: &SampleBlock,
) -> Result<f64> {
    relative_l2_error_of(problem, |x| net::eval(params, x), eval_set)
}
