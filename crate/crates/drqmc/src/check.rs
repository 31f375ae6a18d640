//! The fast oracle suite behind `drqmc check`: finite-difference gradient
//! verification, exact-solution certification, and generator
//! equidistribution checks. Each check has a stable id; the CLI filters on
//! the prefix before the first dot.
//!
//! The finite-difference oracles here deliberately go through `net::eval`
//! and `pde::empirical_loss` only, so they stay independent of the
//! reverse-accumulation path they certify.

use crate::error::Result;
use crate::net::{self, NetShape, ParamVector};
use crate::pde::{self, Problem, ProblemId};
use crate::sampler::sobol::{sobol_coord, DirectionTable};
use crate::sampler::{SampleBlock, SampleStream, SamplerKind, SamplerTag};
use crate::util::{linf_norm, pairwise_mean, splitmix64_at, u64_to_unit_f64};

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn pass(id: &'static str, detail: String) -> Self {
        CheckReport { id, passed: true, detail }
    }
    fn fail(id: &'static str, detail: String) -> Self {
        CheckReport { id, passed: false, detail }
    }
    fn from_bound(id: &'static str, value: f64, bound: f64) -> Self {
        CheckReport {
            id,
            passed: value < bound,
            detail: format!("{value:.3e} (bound {bound:.0e})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference oracles (shared with the acceptance suite)
// ---------------------------------------------------------------------------

/// Componentwise relative error with an absolute floor at 1e-3 of the
/// vector scale. Components above the floor are held to full relative
/// precision; smaller ones are checked absolutely (at tol * 1e-3 * scale),
/// which keeps central-difference roundoff on negligible entries from
/// dominating the metric.
pub fn max_componentwise_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = linf_norm(a).max(linf_norm(b)).max(1e-12);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (x.abs().max(y.abs()) + 1e-3 * scale))
        .fold(0.0, f64::max)
}

/// Central differences of `eval` over theta (step 1e-5, per-parameter scaled).
pub fn fd_grad_theta(params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    let shape = params.shape();
    let mut g = vec![0.0; params.len()];
    for p in 0..params.len() {
        let h = 1e-5 * params.as_slice()[p].abs().max(1.0);
        let mut up = params.as_slice().to_vec();
        up[p] += h;
        let mut dn = params.as_slice().to_vec();
        dn[p] -= h;
        let vp = net::eval(&ParamVector::new(shape, up)?, x)?;
        let vm = net::eval(&ParamVector::new(shape, dn)?, x)?;
        g[p] = (vp - vm) / (2.0 * h);
    }
    Ok(g)
}

/// Central differences of `eval` over x.
pub fn fd_grad_x(params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    let h = 1e-5;
    let mut g = vec![0.0; x.len()];
    for k in 0..x.len() {
        let mut up = x.to_vec();
        up[k] += h;
        let mut dn = x.to_vec();
        dn[k] -= h;
        g[k] = (net::eval(params, &up)? - net::eval(params, &dn)?) / (2.0 * h);
    }
    Ok(g)
}

/// Central differences of the spatial gradient over theta (row-major D x d).
pub fn fd_grad_theta_grad_x(params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    let shape = params.shape();
    let d = x.len();
    let mut m = vec![0.0; params.len() * d];
    for p in 0..params.len() {
        let h = 1e-5 * params.as_slice()[p].abs().max(1.0);
        let mut up = params.as_slice().to_vec();
        up[p] += h;
        let mut dn = params.as_slice().to_vec();
        dn[p] -= h;
        let gp = net::eval_with_spatial_grad(&ParamVector::new(shape, up)?, x)?;
        let gm = net::eval_with_spatial_grad(&ParamVector::new(shape, dn)?, x)?;
        for j in 0..d {
            m[p * d + j] = (gp.grad_x[j] - gm.grad_x[j]) / (2.0 * h);
        }
    }
    Ok(m)
}

/// Central differences of the empirical loss over theta.
pub fn fd_loss_grad(problem: &Problem, params: &ParamVector, block: &SampleBlock) -> Result<Vec<f64>> {
    let shape = params.shape();
    let mut g = vec![0.0; params.len()];
    for p in 0..params.len() {
        let h = 1e-5 * params.as_slice()[p].abs().max(1.0);
        let mut up = params.as_slice().to_vec();
        up[p] += h;
        let mut dn = params.as_slice().to_vec();
        dn[p] -= h;
        let lp = pde::empirical_loss(problem, &ParamVector::new(shape, up)?, block)?;
        let lm = pde::empirical_loss(problem, &ParamVector::new(shape, dn)?, block)?;
        g[p] = (lp - lm) / (2.0 * h);
    }
    Ok(g)
}

/// Seeded interior point with the given margin from the boundary.
pub fn interior_point(d: usize, seed: u64, margin: f64) -> Vec<f64> {
    (0..d)
        .map(|k| margin + (1.0 - 2.0 * margin) * u64_to_unit_f64(splitmix64_at(seed, k as u64)))
        .collect()
}

// ---------------------------------------------------------------------------
// The named checks
// ---------------------------------------------------------------------------

fn gradient_checks(out: &mut Vec<CheckReport>) -> Result<()> {
    let shape = NetShape::new(3)?;
    let params = net::init_params(shape, 2718);
    let x = interior_point(3, 281, 0.0);

    let full = net::eval_full(&params, &x)?;
    out.push(CheckReport::from_bound(
        "gradients.net_spatial",
        max_componentwise_rel_err(&full.grad_x, &fd_grad_x(&params, &x)?),
        1e-6,
    ));
    out.push(CheckReport::from_bound(
        "gradients.net_value",
        max_componentwise_rel_err(&full.grad_theta, &fd_grad_theta(&params, &x)?),
        1e-6,
    ));
    out.push(CheckReport::from_bound(
        "gradients.net_mixed",
        max_componentwise_rel_err(&full.grad_theta_grad_x, &fd_grad_theta_grad_x(&params, &x)?),
        1e-5,
    ));

    for (check_id, id) in [
        ("gradients.estimator_poisson", ProblemId::Poisson),
        ("gradients.estimator_schroedinger", ProblemId::Schroedinger),
    ] {
        let problem = Problem::from_id(id, 3)?;
        let params = net::init_params(problem.shape(), 5);
        let mut stream = SampleStream::new(SamplerKind::new(SamplerTag::RqmcShift, 7), 3)?;
        let block = stream.next_block(3)?;
        let grad = pde::gradient_estimator(&problem, &params, &block)?;
        let fd = fd_loss_grad(&problem, &params, &block)?;
        out.push(CheckReport::from_bound(
            check_id,
            max_componentwise_rel_err(&grad.g, &fd),
            1e-6,
        ));
    }
    Ok(())
}

fn pde_checks(out: &mut Vec<CheckReport>) -> Result<()> {
    for (check_id, id) in [
        ("pde.residual_poisson", ProblemId::Poisson),
        ("pde.residual_schroedinger", ProblemId::Schroedinger),
    ] {
        let problem = Problem::from_id(id, 20)?;
        let mut worst = 0.0f64;
        for seed in 0..100u64 {
            let x = interior_point(20, 1000 + seed, 0.01);
            worst = worst.max(pde::pde_residual_check(&problem, &x, 1e-3)?);
        }
        out.push(CheckReport::from_bound(check_id, worst, 1e-4));
    }

    // analytic normal derivative vanishes identically on all 2d faces
    let mut neumann_ok = true;
    let mut detail = String::from("all faces exact");
    'outer: for id in [ProblemId::Poisson, ProblemId::Schroedinger] {
        let problem = Problem::from_id(id, 20)?;
        for k in 0..20 {
            for face in [0.0, 1.0] {
                let mut x = interior_point(20, 77, 0.1);
                x[k] = face;
                let g = pde::exact_solution_grad(&problem, &x)?;
                if g[k] != 0.0 {
                    neumann_ok = false;
                    detail = format!("{id:?}: d(u*)/dx_{k} = {} at face {face}", g[k]);
                    break 'outer;
                }
            }
        }
    }
    out.push(if neumann_ok {
        CheckReport::pass("pde.neumann", detail)
    } else {
        CheckReport::fail("pde.neumann", detail)
    });

    // zero-mean property of the Poisson exact solution
    let problem = Problem::poisson(20)?;
    let mut stream = SampleStream::new(SamplerKind::new(SamplerTag::RqmcScramble, 0), 20)?;
    let pts = stream.next_block(16)?;
    let vals: Vec<f64> = pts
        .rows()
        .map(|x| pde::exact_solution(&problem, x))
        .collect::<Result<_>>()?;
    out.push(CheckReport::from_bound(
        "pde.zero_mean_poisson",
        pairwise_mean(&vals).abs(),
        1e-3,
    ));

    // quadrature of the Schroedinger L2 norm against the analytic d/2
    let problem = Problem::schroedinger(20)?;
    let mut stream = SampleStream::new(SamplerKind::new(SamplerTag::RqmcScramble, 0), 20)?;
    let pts = stream.next_block(14)?;
    let sq: Vec<f64> = pts
        .rows()
        .map(|x| pde::exact_solution(&problem, x).map(|u| u * u))
        .collect::<Result<_>>()?;
    let quad = pairwise_mean(&sq);
    let analytic = problem.exact_l2_norm_sq.expect("built-in oracle");
    out.push(CheckReport::from_bound(
        "pde.l2_norm_schroedinger",
        (quad - analytic).abs() / analytic,
        0.01,
    ));
    Ok(())
}

/// Dyadic stratification counts of one coordinate of a table-generated block.
fn table_balance(table: &DirectionTable, dim: usize, k: u64, tau: u32, level: u32) -> f64 {
    let n = 1u64 << tau;
    let bins = 1usize << level;
    let mut counts = vec![0i64; bins];
    for i in k * n..(k + 1) * n {
        let c = sobol_coord(table, dim, i as u32);
        let b = ((c * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let ideal = n as f64 / bins as f64;
    counts.iter().map(|&c| (c as f64 - ideal).abs()).fold(0.0, f64::max)
}

fn sobol_checks(table: &DirectionTable, out: &mut Vec<CheckReport>) {
    out.push(match table.validate() {
        Ok(()) => CheckReport::pass("sobol.table_validity", format!("version {}", table.version())),
        Err(e) => CheckReport::fail("sobol.table_validity", e),
    });

    let expected = [0.0, 0.5, 0.75, 0.25, 0.375, 0.875, 0.625, 0.125];
    let got: Vec<f64> = (0..8).map(|i| sobol_coord(table, 1, i)).collect();
    out.push(if got == expected {
        CheckReport::pass("sobol.van_der_corput", "first 8 points match".into())
    } else {
        CheckReport::fail("sobol.van_der_corput", format!("got {got:?}"))
    });

    // Stratification over blocks k <= 16, tau <= 6: exact half-half split at
    // level 1 in all dimensions up to 20 and exact balance at level tau in
    // dimension 1; at intermediate levels m' <= min(tau, 4) dimensions up to
    // 10 get the generic digital-net slack of 2 counts.
    let max_d = table.max_dim().min(20);
    let mut failure: Option<String> = None;
    'strat: for tau in 1..=6u32 {
        for k in 0..=16u64 {
            for dim in 1..=max_d {
                if table_balance(table, dim, k, tau, 1) != 0.0 {
                    failure = Some(format!("dim {dim}, block {k}, tau {tau}, level 1"));
                    break 'strat;
                }
            }
            if table_balance(table, 1, k, tau, tau) != 0.0 {
                failure = Some(format!("dim 1, block {k}, tau {tau}, level {tau}"));
                break 'strat;
            }
            for dim in 1..=max_d.min(10) {
                for level in 2..=tau.min(4) {
                    let b = table_balance(table, dim, k, tau, level);
                    if b > 2.0 {
                        failure =
                            Some(format!("dim {dim}, block {k}, tau {tau}, level {level}: {b}"));
                        break 'strat;
                    }
                }
            }
        }
    }
    out.push(match failure {
        None => CheckReport::pass("sobol.stratification", "balanced at all probed levels".into()),
        Some(where_) => {
            CheckReport::fail("sobol.stratification", format!("count deviation at {where_}"))
        }
    });
}

fn sampler_checks(out: &mut Vec<CheckReport>) -> Result<()> {
    // restartability: block reconstruction across fresh streams
    for tag in [SamplerTag::Mc, SamplerTag::QmcSobol, SamplerTag::RqmcShift, SamplerTag::RqmcScramble] {
        let kind = SamplerKind::new(tag, 31);
        let mut s1 = SampleStream::new(kind, 6)?;
        let _ = s1.next_block(4)?;
        let a = s1.next_block(4)?;
        let s2 = SampleStream::new(kind, 6)?;
        let b = s2.block_at(1, 4)?;
        if a != b {
            out.push(CheckReport::fail(
                "sampler.restartability",
                format!("{tag:?}: reconstructed block differs"),
            ));
            return Ok(());
        }
    }
    out.push(CheckReport::pass("sampler.restartability", "all kinds".into()));
    Ok(())
}

/// Run the oracle suite against an explicit direction-number table
/// (used by the fault-injection tests).
pub fn run_checks_with_table(table: &DirectionTable, only: Option<&str>) -> Result<Vec<CheckReport>> {
    let mut all = Vec::new();
    let want = |group: &str| only.is_none_or(|o| o == group);
    if want("gradients") {
        gradient_checks(&mut all)?;
    }
    if want("pde") {
        pde_checks(&mut all)?;
    }
    if want("sobol") {
        sobol_checks(table, &mut all);
    }
    if want("sampler") {
        sampler_checks(&mut all)?;
    }
    Ok(all)
}

/// Run the oracle suite (optionally a single group: `gradients`, `pde`,
/// `sobol`, or `sampler`).
pub fn run_checks(only: Option<&str>) -> Result<Vec<CheckReport>> {
    run_checks_with_table(DirectionTable::embedded(), only)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes_all_checks() {
        let reports = run_checks(None).unwrap();
        assert!(reports.len() >= 10);
        for r in &reports {
            assert!(r.passed, "{}: {}", r.id, r.detail);
        }
    }

    #[test]
    fn filter_selects_one_group() {
        let reports = run_checks(Some("gradients")).unwrap();
        assert!(!reports.is_empty());
        assert!(reports.iter().all(|r| r.id.starts_with("gradients.")));
        let reports = run_checks(Some("sobol")).unwrap();
        assert!(reports.iter().all(|r| r.id.starts_with("sobol.")));
    }

    #[test]
    fn corrupted_table_fails_stratification_with_named_id() {
        // dimension 3 gets an out-of-range (even, too large) m_2: the rows
        // still parse, the generating matrix loses its unit diagonal, and
        // the stratification check must catch it by name.
        let table = DirectionTable::parse("2 1 0 1\n3 2 1 1 6\n", "corrupted").unwrap();
        let reports = run_checks_with_table(&table, Some("sobol")).unwrap();
        let strat = reports.iter().find(|r| r.id == "sobol.stratification").unwrap();
        assert!(!strat.passed, "stratification must fail: {}", strat.detail);
        let validity = reports.iter().find(|r| r.id == "sobol.table_validity").unwrap();
        assert!(!validity.passed);
    }
}
