//! Experiment probes: replicate gradient-covariance traces and the
//! convergence-order study on an analytic strongly convex surrogate.

use crate::error::{Error, Result};
use crate::net::ParamVector;
use crate::pde::{gradient_estimator, Problem};
use crate::sampler::{SampleStream, SamplerKind, SamplerTag};
use crate::util::{ls_slope, pairwise_vec_sum, splitmix64_at};
use rayon::prelude::*;
use std::sync::Arc;

/// Trace of the sample covariance of replicate gradient estimates at a
/// fixed parameter vector, computed as `1/(R-1) * sum_r |G_r - mean G|^2`
/// (identical to the trace of the covariance matrix without forming it).
///
/// Replicate semantics: randomized kinds rerun the same block index under
/// `replicates` independent randomization seeds derived from `base_seed`;
/// MC uses that many fresh blocks. Plain Sobol' has no randomization, so
/// its replicates coincide and the trace is 0.
pub fn covariance_trace_probe(
    problem: &Problem,
    params: &ParamVector,
    tag: SamplerTag,
    tau: u32,
    replicates: usize,
    block_index: u64,
    base_seed: u64,
) -> Result<f64> {
    if replicates < 2 {
        return Err(Error::Config(format!(
            "covariance probe needs at least 2 replicates, got {replicates}"
        )));
    }

    let grads: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let block = match tag {
                SamplerTag::Mc => {
                    let stream =
                        SampleStream::new(SamplerKind::new(SamplerTag::Mc, base_seed), problem.dim())?;
                    stream.block_at(r as u64, tau)?
                }
                SamplerTag::QmcSobol => {
                    let stream =
                        SampleStream::new(SamplerKind::new(tag, base_seed), problem.dim())?;
                    stream.block_at(block_index, tau)?
                }
                SamplerTag::RqmcShift | SamplerTag::RqmcScramble => {
                    let seed = splitmix64_at(base_seed, r as u64);
                    let stream = SampleStream::new(SamplerKind::new(tag, seed), problem.dim())?;
                    stream.block_at(block_index, tau)?
                }
            };
            Ok(gradient_estimator(problem, params, &block)?.g)
        })
        .collect::<Result<_>>()?;

    // Work with offsets from the first replicate: identical replicates then
    // cancel exactly, and the deviations lose no precision to a large mean.
    let rf = replicates as f64;
    let offsets: Vec<Vec<f64>> = grads
        .iter()
        .map(|g| g.iter().zip(&grads[0]).map(|(a, b)| a - b).collect())
        .collect();
    let mut mean_offset = pairwise_vec_sum(&offsets);
    mean_offset.iter_mut().for_each(|m| *m /= rf);

    let sq_devs: Vec<f64> = offsets
        .iter()
        .map(|g| {
            g.iter()
                .zip(&mean_offset)
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>()
        })
        .collect();
    Ok(sq_devs.iter().sum::<f64>() / (rf - 1.0))
}

/// The scalar surrogate problem `L(theta) = 1/2 int_0^1 (theta - h(x))^2 dx`
/// whose minimizer `theta* = int h` and optimality gap
/// `L(theta) - L(theta*) = 1/2 (theta - theta*)^2` are analytic.
#[derive(Clone)]
pub struct SurrogateSpec {
    pub h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Analytic value of `int_0^1 h`.
    pub theta_star: f64,
    pub theta0: f64,
    pub alpha: f64,
    /// Mini-batch exponents: the n grid is `2^tau` for each entry.
    pub tau_grid: Vec<u32>,
    pub steps: u64,
    /// Seeds averaged for the MC sampler.
    pub mc_seeds: u64,
    /// Fraction of late iterations whose gap is averaged.
    pub window_frac: f64,
    pub samplers: Vec<SamplerTag>,
}

impl SurrogateSpec {
    /// Default smooth integrand `h(x) = sin(2 pi x) + x` with `int h = 1/2`.
    pub fn default_sine() -> Self {
        SurrogateSpec {
            h: Arc::new(|x| (2.0 * std::f64::consts::PI * x).sin() + x),
            theta_star: 0.5,
            theta0: 0.0,
            alpha: 0.1,
            tau_grid: (4..=12).collect(),
            steps: 50_000,
            mc_seeds: 8,
            window_frac: 0.2,
            samplers: vec![SamplerTag::Mc, SamplerTag::QmcSobol],
        }
    }

    /// Zero-noise control: constant integrand, every block mean is exact.
    pub fn constant(c: f64) -> Self {
        let mut spec = SurrogateSpec::default_sine();
        spec.h = Arc::new(move |_| c);
        spec.theta_star = c;
        spec
    }
}

/// Limiting optimality gaps and fitted log-log slopes per sampler.
#[derive(Debug, Clone)]
pub struct OrderProbeResult {
    /// `(sampler, n, mean late-iteration gap)` for every grid entry.
    pub gaps: Vec<(SamplerTag, u64, f64)>,
    /// `(sampler, fitted slope of log gap vs log n)`.
    pub slopes: Vec<(SamplerTag, f64)>,
}

fn surrogate_run(spec: &SurrogateSpec, kind: SamplerKind, tau: u32) -> Result<f64> {
    let n = 1u64 << tau;
    let mut stream = SampleStream::new(kind, 1)?;
    let window_start = ((spec.steps as f64) * (1.0 - spec.window_frac)) as u64;
    let mut theta = spec.theta0;
    let mut gap_sum = 0.0;
    let mut gap_count = 0u64;

    // Index space check up front: steps * n indices are consumed.
    if kind.tag.is_net_based() {
        let need = spec.steps.checked_mul(n);
        if need.is_none() || need.unwrap() > (1u64 << 32) {
            return Err(Error::IndexOverflow(format!(
                "surrogate run needs {} x 2^{tau} Sobol' indices",
                spec.steps
            )));
        }
    }

    for k in 0..spec.steps {
        let block = stream.next_block(tau)?;
        let mut sum = 0.0;
        for row in block.rows() {
            sum += (spec.h)(row[0]);
        }
        let grad = theta - sum / n as f64;
        theta -= spec.alpha * grad;
        if k >= window_start {
            let diff = theta - spec.theta_star;
            gap_sum += 0.5 * diff * diff;
            gap_count += 1;
        }
        if !theta.is_finite() {
            return Err(Error::NonFinite(format!(
                "surrogate iterate diverged at step {k} (n = {n}, {:?})",
                kind.tag
            )));
        }
    }
    Ok(gap_sum / gap_count as f64)
}

/// Fixed-step SGD on the surrogate across the n grid for each sampler,
/// averaging the late-iteration analytic gap (for MC also over seeds),
/// then fitting `log gap` against `log n`.
pub fn convergence_order_probe(spec: &SurrogateSpec) -> Result<OrderProbeResult> {
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(Error::Config("surrogate stepsize must lie in (0, 1)".into()));
    }
    if spec.tau_grid.len() < 2 {
        return Err(Error::Config("need at least two batch sizes to fit a slope".into()));
    }

    let mut gaps: Vec<(SamplerTag, u64, f64)> = Vec::new();
    let mut slopes = Vec::new();

    for &tag in &spec.samplers {
        // One job per (tau, seed); order-fixed reduction afterwards.
        let jobs: Vec<(u32, u64)> = spec
            .tau_grid
            .iter()
            .flat_map(|&tau| {
                let seeds: Vec<u64> = match tag {
                    SamplerTag::Mc => (0..spec.mc_seeds.max(1)).collect(),
                    _ => vec![0],
                };
                seeds.into_iter().map(move |s| (tau, s))
            })
            .collect();

        let results: Vec<((u32, u64), f64)> = jobs
            .into_par_iter()
            .map(|(tau, seed)| {
                let kind = SamplerKind::new(tag, splitmix64_at(seed, tau as u64));
                let gap = surrogate_run(spec, kind, tau)?;
                Ok(((tau, seed), gap))
            })
            .collect::<Result<_>>()?;

        let mut per_tau: Vec<(u64, f64)> = Vec::new();
        for &tau in &spec.tau_grid {
            let tau_gaps: Vec<f64> = results
                .iter()
                .filter(|((t, _), _)| *t == tau)
                .map(|(_, g)| *g)
                .collect();
            let mean = tau_gaps.iter().sum::<f64>() / tau_gaps.len() as f64;
            let n = 1u64 << tau;
            if !mean.is_finite() {
                return Err(Error::NonFinite(format!(
                    "diverging surrogate gap at n = {n} for {tag:?}"
                )));
            }
            per_tau.push((n, mean));
            gaps.push((tag, n, mean));
        }

        // Guard the log fit against exactly-zero gaps (zero-noise control):
        // those runs converge to machine zero and carry no order information.
        let strictly_positive: Vec<(f64, f64)> = per_tau
            .iter()
            .filter(|(_, g)| *g > 0.0)
            .map(|(n, g)| ((*n as f64).ln(), g.ln()))
            .collect();
        let slope = if strictly_positive.len() >= 2 {
            let xs: Vec<f64> = strictly_positive.iter().map(|(x, _)| *x).collect();
            let ys: Vec<f64> = strictly_positive.iter().map(|(_, y)| *y).collect();
            ls_slope(&xs, &ys)
        } else {
            f64::NEG_INFINITY
        };
        slopes.push((tag, slope));
    }

    Ok(OrderProbeResult { gaps, slopes })
}

/// Independent reference for tests: closed-form stationary MC gap
/// `alpha * var(h) / (2 n (2 - alpha))` for the surrogate dynamics.
#[cfg(test)]
pub(crate) fn mc_stationary_gap(var_h: f64, alpha: f64, n: u64) -> f64 {
    alpha * var_h / (2.0 * n as f64 * (2.0 - alpha))
}

// ---------------------------------------------------------------------------
// Variance-ratio study
// ---------------------------------------------------------------------------

use super::{train, OptimizerKind, TrainConfig};
use crate::optim::AdamHyper;
use crate::pde::ProblemId;

/// Configuration of the MC-versus-RQMC trace-ratio study.
#[derive(Debug, Clone)]
pub struct VarianceStudyConfig {
    pub problems: Vec<ProblemId>,
    pub dim: usize,
    /// Batch exponents; the columns of the result table are n = 2^tau.
    pub taus: Vec<u32>,
    pub iterations: u64,
    pub cov_every: u64,
    pub replicates: usize,
    /// Randomized kind for the denominator (plain Sobol' is rejected: its
    /// replicates coincide and the ratio would be undefined).
    pub rqmc_tag: SamplerTag,
    pub seed: u64,
    pub init_seed: u64,
}

impl VarianceStudyConfig {
    pub fn desk_scale() -> Self {
        VarianceStudyConfig {
            problems: vec![ProblemId::Poisson, ProblemId::Schroedinger],
            dim: 5,
            taus: vec![5, 7, 9],
            iterations: 2000,
            cov_every: 500,
            replicates: 16,
            rqmc_tag: SamplerTag::RqmcShift,
            seed: 0,
            init_seed: 0,
        }
    }
}

/// One cell of the study table.
#[derive(Debug, Clone)]
pub struct VarianceStudyCell {
    pub problem: ProblemId,
    pub n: u64,
    pub mc_trace_mean: f64,
    pub rqmc_trace_mean: f64,
    /// Mean over probed steps of the per-step MC/RQMC trace ratio.
    pub avg_ratio: f64,
}

/// For each problem and batch size, train once with MC and once with the
/// randomized QMC kind (shared initialization), probing the replicate
/// covariance trace at the configured cadence, and average the per-step
/// trace ratios.
pub fn variance_study(cfg: &VarianceStudyConfig) -> Result<Vec<VarianceStudyCell>> {
    if !cfg.rqmc_tag.is_randomized() || cfg.rqmc_tag == SamplerTag::Mc {
        return Err(Error::Config(format!(
            "variance study needs a randomized QMC kind for the denominator, got {:?}",
            cfg.rqmc_tag
        )));
    }
    if cfg.cov_every == 0 || cfg.cov_every > cfg.iterations {
        return Err(Error::Config(
            "covariance cadence must be positive and within the iteration count".into(),
        ));
    }

    let mut cells = Vec::new();
    for &problem in &cfg.problems {
        for &tau in &cfg.taus {
            let mut base = TrainConfig::new(problem, cfg.dim, SamplerKind::new(SamplerTag::Mc, cfg.seed));
            base.tau = tau;
            base.iterations = cfg.iterations;
            base.optimizer = OptimizerKind::Adam(AdamHyper::default());
            base.init_seed = cfg.init_seed;
            base.eval_every = 0;
            base.cov_every = cfg.cov_every;
            base.cov_replicates = cfg.replicates;

            let mc_out = train(&base)?;

            let mut rqmc_cfg = base.clone();
            rqmc_cfg.sampler = SamplerKind::new(cfg.rqmc_tag, cfg.seed);
            let rqmc_out = train(&rqmc_cfg)?;

            let mc_traces: Vec<(u64, f64)> = mc_out
                .records
                .iter()
                .filter_map(|r| r.cov_trace.map(|t| (r.k, t)))
                .collect();
            let rqmc_traces: Vec<(u64, f64)> = rqmc_out
                .records
                .iter()
                .filter_map(|r| r.cov_trace.map(|t| (r.k, t)))
                .collect();
            if mc_traces.len() != rqmc_traces.len() || mc_traces.is_empty() {
                return Err(Error::Config("trace cadences of the paired runs differ".into()));
            }

            let mut ratios = Vec::with_capacity(mc_traces.len());
            for ((k_mc, mc), (k_rq, rq)) in mc_traces.iter().zip(&rqmc_traces) {
                debug_assert_eq!(k_mc, k_rq);
                if !(rq.is_finite() && *rq > 0.0) {
                    return Err(Error::NonFinite(format!(
                        "RQMC trace {rq} at step {k_rq} makes the ratio undefined"
                    )));
                }
                ratios.push(mc / rq);
            }

            let mean = |xs: &[(u64, f64)]| xs.iter().map(|(_, t)| t).sum::<f64>() / xs.len() as f64;
            cells.push(VarianceStudyCell {
                problem,
                n: 1u64 << tau,
                mc_trace_mean: mean(&mc_traces),
                rqmc_trace_mean: mean(&rqmc_traces),
                avg_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, ParamVector};
    use crate::pde::ProblemId;

    #[test]
    fn replicate_probe_reference_cases() {
        let problem = Problem::from_id(ProblemId::Schroedinger, 3).unwrap();
        let params = init_params(problem.shape(), 4);
        // plain QMC: identical replicates, zero spread
        let t = covariance_trace_probe(&problem, &params, SamplerTag::QmcSobol, 4, 5, 0, 1).unwrap();
        assert_eq!(t, 0.0);
        // R = 2: trace is half the squared distance between the replicas
        let t2 =
            covariance_trace_probe(&problem, &params, SamplerTag::RqmcShift, 4, 2, 0, 1).unwrap();
        let g = |seed_idx: u64| {
            let seed = splitmix64_at(1, seed_idx);
            let stream =
                SampleStream::new(SamplerKind::new(SamplerTag::RqmcShift, seed), 3).unwrap();
            let block = stream.block_at(0, 4).unwrap();
            gradient_estimator(&problem, &params, &block).unwrap().g
        };
        let (g0, g1) = (g(0), g(1));
        let half_sq: f64 =
            0.5 * g0.iter().zip(&g1).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        assert!((t2 - half_sq).abs() < 1e-12 * half_sq.max(1.0));
    }

    #[test]
    fn probe_rejects_single_replicate() {
        let problem = Problem::from_id(ProblemId::Poisson, 2).unwrap();
        let params = ParamVector::zeros(problem.shape());
        assert!(
            covariance_trace_probe(&problem, &params, SamplerTag::Mc, 3, 1, 0, 0).is_err()
        );
    }

    #[test]
    fn mc_trace_shrinks_roughly_linearly_in_n() {
        // Schroedinger has no penalty term, so the covariance trace is
        // h(theta)/n exactly; with 64 replicates the 16x reduction from
        // n = 32 to n = 512 is measurable within a factor-2 window.
        let problem = Problem::from_id(ProblemId::Schroedinger, 3).unwrap();
        let params = init_params(problem.shape(), 8);
        let t32 =
            covariance_trace_probe(&problem, &params, SamplerTag::Mc, 5, 64, 0, 11).unwrap();
        let t512 =
            covariance_trace_probe(&problem, &params, SamplerTag::Mc, 9, 64, 0, 12).unwrap();
        assert!(t512 < t32);
        let ratio = t32 / t512;
        assert!((8.0..32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_noise_control_reaches_machine_zero() {
        let mut spec = SurrogateSpec::constant(0.7);
        spec.tau_grid = vec![4, 6, 8];
        spec.steps = 2_000;
        spec.mc_seeds = 2;
        let result = convergence_order_probe(&spec).unwrap();
        for (tag, n, gap) in &result.gaps {
            assert!(*gap < 1e-25, "{tag:?} n={n}: gap {gap}");
        }
    }

    #[test]
    fn surrogate_mc_gap_matches_stationary_formula() {
        // var(h) for h = sin(2 pi x) + x is 1/2 - 1/pi + 1/12
        let var_h = 0.5 - 1.0 / std::f64::consts::PI + 1.0 / 12.0;
        let mut spec = SurrogateSpec::default_sine();
        spec.tau_grid = vec![6, 8];
        spec.steps = 40_000;
        spec.mc_seeds = 8;
        spec.samplers = vec![SamplerTag::Mc];
        let result = convergence_order_probe(&spec).unwrap();
        for (_, n, gap) in &result.gaps {
            let expected = mc_stationary_gap(var_h, spec.alpha, *n);
            assert!(
                (gap / expected).ln().abs() < 0.5_f64.ln().abs(),
                "n={n}: gap {gap} vs analytic {expected}"
            );
        }
    }

    #[test]
    fn variance_study_ratios_grow_with_batch_size() {
        let mut cfg = VarianceStudyConfig::desk_scale();
        cfg.problems = vec![ProblemId::Schroedinger];
        cfg.dim = 3;
        cfg.taus = vec![4, 6, 8];
        cfg.iterations = 300;
        cfg.cov_every = 150;
        cfg.replicates = 8;
        let cells = variance_study(&cfg).unwrap();
        assert_eq!(cells.len(), 3);
        for c in &cells {
            assert!(c.avg_ratio >= 1.0, "n={}: ratio {}", c.n, c.avg_ratio);
        }
        assert!(cells[0].avg_ratio < cells[1].avg_ratio);
        assert!(cells[1].avg_ratio < cells[2].avg_ratio);
    }

    #[test]
    fn variance_study_rejects_degenerate_denominator() {
        let mut cfg = VarianceStudyConfig::desk_scale();
        cfg.rqmc_tag = SamplerTag::QmcSobol;
        assert!(variance_study(&cfg).is_err());
        let mut cfg = VarianceStudyConfig::desk_scale();
        cfg.rqmc_tag = SamplerTag::Mc;
        assert!(variance_study(&cfg).is_err());
    }

    #[test]
    fn order_probe_separates_mc_from_qmc() {
        let mut spec = SurrogateSpec::default_sine();
        spec.tau_grid = (4..=9).collect();
        spec.steps = 20_000;
        spec.mc_seeds = 4;
        let result = convergence_order_probe(&spec).unwrap();
        let slope_of = |tag: SamplerTag| {
            result
                .slopes
                .iter()
                .find(|(t, _)| *t == tag)
                .map(|(_, s)| *s)
                .unwrap()
        };
        let mc = slope_of(SamplerTag::Mc);
        let qmc = slope_of(SamplerTag::QmcSobol);
        assert!((-1.3..=-0.7).contains(&mc), "MC slope {mc}");
        assert!(qmc <= -1.5, "QMC slope {qmc}");
    }
}
