//! Exact bridges and their mixtures: the conditional jump-count law on a
//! fiber, rejection-free bridge sampling, the space invariant Φ, the
//! same-class decision for rate pairs, and short-window cycle asymptotics.
//!
//! A bridge pins both endpooints of the process; conditioning only reweights
//! the jump-count vector on the fiber {n ≥ 0 : **A**n = y − x} while jump
//! times stay independent of where the count lands. Sampling therefore
//! factors into a categorical draw on the fiber followed by the same
//! time-density draws as the free process — every sampled path hits its
//! endpoint exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{in_kernel, kernel_basis, LatticeVector};
use crate::model::JumpModel;
use crate::poisson::{pois_pmf, SparseDistribution};
use crate::process::{cycle_hit, sample_cpp, Cycle, Event, Path, RateFunction};
use crate::stats::wilson_interval;
use crate::verify::replicate_rng;

/// Node budget for fiber enumeration.
const SEARCH_CAP: u64 = 20_000_000;
/// Coordinate tolerance when matching real displacements against integer
/// combinations of jump columns (layers may carry irrational constants).
const DISPLACEMENT_TOL: f64 = 1e-6;

/// The space invariant Φ^c = Π_j (∫₀¹ ν_j)^{−c_j} for a kernel vector c.
pub fn phi_invariant(
    model: &JumpModel,
    rates: &RateFunction,
    c: &LatticeVector,
) -> Result<f64> {
    check_rate_model(model, rates)?;
    if !in_kernel(model, c)? {
        return Err(Error::InvalidInput(format!(
            "{c} is not in the kernel of the jump matrix"
        )));
    }
    Ok((-log_inv_phi(rates, c)).exp())
}

/// log(1/Φ^c) = Σ_j c_j log λ_j.
fn log_inv_phi(rates: &RateFunction, c: &LatticeVector) -> f64 {
    use num_traits::ToPrimitive;
    rates
        .totals()
        .iter()
        .zip(c.coords())
        .map(|(&l, cj)| cj.to_f64().expect("small shift coordinate") * l.ln())
        .sum()
}

fn check_rate_model(model: &JumpModel, rates: &RateFunction) -> Result<()> {
    if rates.n_types() != model.n_jumps() {
        return Err(Error::InvalidInput(format!(
            "rate function has {} types, model has {} jumps",
            rates.n_types(),
            model.n_jumps()
        )));
    }
    Ok(())
}

/// Depth-first enumeration of nonnegative integer n ≤ bounds with
/// |**A**n − target| ≤ tol per coordinate, pruned by suffix-range intervals.
fn solve_displacement(
    matrix: &[Vec<f64>],
    target: &[f64],
    bounds: &[i64],
    stop_at_first: bool,
) -> Result<Vec<Vec<i64>>> {
    let d = matrix.len();
    let a = bounds.len();
    // suffix_lo[r][i], suffix_hi[r][i]: attainable range of rows r over
    // columns i.. given the bounds.
    let mut suffix_lo = vec![vec![0.0f64; a + 1]; d];
    let mut suffix_hi = vec![vec![0.0f64; a + 1]; d];
    for r in 0..d {
        for i in (0..a).rev() {
            let reach = matrix[r][i] * bounds[i] as f64;
            suffix_lo[r][i] = suffix_lo[r][i + 1] + reach.min(0.0);
            suffix_hi[r][i] = suffix_hi[r][i + 1] + reach.max(0.0);
        }
    }
    let mut out = Vec::new();
    let mut partial = vec![0.0f64; d];
    let mut point = vec![0i64; a];
    let mut nodes = 0u64;
    fn recurse(
        matrix: &[Vec<f64>],
        target: &[f64],
        bounds: &[i64],
        suffix_lo: &[Vec<f64>],
        suffix_hi: &[Vec<f64>],
        stop_at_first: bool,
        level: usize,
        partial: &mut Vec<f64>,
        point: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
        nodes: &mut u64,
    ) -> Result<bool> {
        *nodes += 1;
        if *nodes > SEARCH_CAP {
            return Err(Error::ResourceLimit(
                "fiber search exceeded its node budget".into(),
            ));
        }
        let d = matrix.len();
        for r in 0..d {
            if partial[r] + suffix_lo[r][level] > target[r] + DISPLACEMENT_TOL
                || partial[r] + suffix_hi[r][level] < target[r] - DISPLACEMENT_TOL
            {
                return Ok(false);
            }
        }
        if level == bounds.len() {
            let hit = (0..d).all(|r| (partial[r] - target[r]).abs() <= DISPLACEMENT_TOL);
            if hit {
                out.push(point.clone());
            }
            return Ok(hit && stop_at_first);
        }
        for v in 0..=bounds[level] {
            point[level] = v;
            for r in 0..d {
                partial[r] += matrix[r][level] * v as f64 - if v > 0 { matrix[r][level] * (v - 1) as f64 } else { 0.0 };
            }
            // The incremental update above accumulates rounding; recompute
            // the clean value instead.
            for r in 0..d {
                partial[r] = (0..=level)
                    .map(|j| matrix[r][j] * point[j] as f64)
                    .sum();
            }
            let done = recurse(
                matrix, target, bounds, suffix_lo, suffix_hi, stop_at_first, level + 1, partial,
                point, out, nodes,
            )?;
            if done {
                return Ok(true);
            }
        }
        point[level] = 0;
        for r in 0..matrix.len() {
            partial[r] = (0..level).map(|j| matrix[r][j] * point[j] as f64).sum();
        }
        Ok(false)
    }
    recurse(
        matrix,
        target,
        bounds,
        &suffix_lo,
        &suffix_hi,
        stop_at_first,
        0,
        &mut partial,
        &mut point,
        &mut out,
        &mut nodes,
    )?;
    Ok(out)
}

/// Marginal Poisson truncation cutoffs at per-coordinate budget delta/A.
fn marginal_cutoffs(lambda: &[f64], delta: f64) -> Vec<i64> {
    let per = delta / lambda.len() as f64;
    lambda
        .iter()
        .map(|&l| {
            let mut p = (-l).exp();
            let mut cum = p;
            let mut k = 0i64;
            while 1.0 - cum > per && k < 100_000_000 {
                k += 1;
                p *= l / k as f64;
                cum += p;
            }
            k
        })
        .collect()
}

/// The law of the jump-count vector N_1 conditioned on the displacement
/// y − x: the product Poisson p_λ restricted to the fiber inside the
/// truncation box of tail budget delta, renormalized. The discarded tail is
/// bounded by delta.
pub fn conditional_fiber_dist(
    model: &JumpModel,
    rates: &RateFunction,
    x: &[f64],
    y: &[f64],
    delta: f64,
) -> Result<SparseDistribution> {
    check_rate_model(model, rates)?;
    if x.len() != model.dim() || y.len() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "endpoints must have dimension {}",
            model.dim()
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(
            "truncation budget must lie strictly between 0 and 1".into(),
        ));
    }
    let matrix = model.jump_matrix()?;
    let target: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| yi - xi).collect();
    let lambda = rates.totals();
    let bounds = marginal_cutoffs(lambda, delta);
    let points = solve_displacement(matrix, &target, &bounds, false)?;
    if points.is_empty() {
        // Distinguish an endpoint pair outside S from conditional mass below
        // the truncation: retry feasibility-only in a larger box.
        let wide: Vec<i64> = bounds.iter().map(|&b| 4 * b + 16).collect();
        let any = solve_displacement(matrix, &target, &wide, true)?;
        return Err(if any.is_empty() {
            Error::Infeasible(format!(
                "displacement {target:?} admits no nonnegative integer jump combination"
            ))
        } else {
            Error::Infeasible(format!(
                "fiber of displacement {target:?} carries mass below the truncation budget {delta:e}"
            ))
        });
    }
    let mut dist = SparseDistribution::new();
    for n in points {
        let p = pois_pmf(lambda, &n);
        dist.add_mass(n, p);
    }
    dist.normalize()?;
    Ok(dist)
}

/// Exact sampler for the process conditioned to run from x to y on [0,1].
#[derive(Debug, Clone)]
pub struct BridgeSampler {
    rates: RateFunction,
    fiber: SparseDistribution,
    support: Vec<Vec<i64>>,
    cumulative: Vec<f64>,
    x: Vec<f64>,
    delta: f64,
}

impl BridgeSampler {
    pub fn new(
        model: &JumpModel,
        rates: &RateFunction,
        x: &[f64],
        y: &[f64],
        delta: f64,
    ) -> Result<Self> {
        let fiber = conditional_fiber_dist(model, rates, x, y, delta)?;
        let support: Vec<Vec<i64>> = fiber.support().cloned().collect();
        let mut cumulative = Vec::with_capacity(support.len());
        let mut acc = 0.0;
        for n in &support {
            acc += fiber.prob(n);
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(BridgeSampler {
            rates: rates.clone(),
            fiber,
            support,
            cumulative,
            x: x.to_vec(),
            delta,
        })
    }

    /// The exact conditional law of N_1 this sampler draws from.
    pub fn fiber_dist(&self) -> &SparseDistribution {
        &self.fiber
    }

    /// The truncation budget the fiber law was built with.
    pub fn tail_bound(&self) -> f64 {
        self.delta
    }

    /// Draw one bridge path: a categorical fiber point, then conditionally
    /// independent jump times per type.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Path {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.support.len() - 1);
        let counts = &self.support[idx];
        let mut events = Vec::with_capacity(counts.iter().sum::<i64>() as usize);
        for (j, &k) in counts.iter().enumerate() {
            for _ in 0..k {
                events.push(Event {
                    t: self.rates.sample_time(j, rng),
                    j,
                });
            }
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.j.cmp(&b.j)));
        Path::new(self.x.clone(), events).expect("sampled times lie in (0,1]")
    }
}

/// A finite mixture of endpoint pairs, each verified to be attainable.
/// Weights are normalized at construction.
#[derive(Debug, Clone, Serialize)]
pub struct EndpointMixture {
    pairs: Vec<(Vec<f64>, Vec<f64>, f64)>,
}

#[derive(serde::Deserialize)]
struct MixtureEntryRepr {
    x: Vec<f64>,
    y: Vec<f64>,
    w: f64,
}

impl EndpointMixture {
    pub fn new(model: &JumpModel, pairs: Vec<(Vec<f64>, Vec<f64>, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("mixture has no endpoint pairs".into()));
        }
        let matrix = model.jump_matrix()?;
        for (x, y, w) in &pairs {
            if x.len() != model.dim() || y.len() != model.dim() {
                return Err(Error::InvalidInput(format!(
                    "endpoints must have dimension {}",
                    model.dim()
                )));
            }
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidInput(
                    "mixture weights must be positive".into(),
                ));
            }
            let target: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| yi - xi).collect();
            // Attainability probe in a heuristic box scaled to the target.
            let mag = target.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            let bounds: Vec<i64> = (0..model.n_jumps())
                .map(|j| {
                    let col_scale = (0..model.dim())
                        .map(|r| matrix[r][j].abs())
                        .fold(0.0f64, f64::max);
                    4 * (mag / col_scale).ceil() as i64 + 16
                })
                .collect();
            if solve_displacement(matrix, &target, &bounds, true)?.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "endpoint pair with displacement {target:?} is not attainable by the jump set"
                )));
            }
        }
        let total: f64 = pairs.iter().map(|(_, _, w)| w).sum();
        let pairs = pairs
            .into_iter()
            .map(|(x, y, w)| (x, y, w / total))
            .collect();
        Ok(EndpointMixture { pairs })
    }

    /// Parse the JSON list [{"x": [...], "y": [...], "w": ...}, ...].
    pub fn from_json_str(model: &JumpModel, s: &str) -> Result<Self> {
        let entries: Vec<MixtureEntryRepr> = serde_json::from_str(s)?;
        Self::new(
            model,
            entries.into_iter().map(|e| (e.x, e.y, e.w)).collect(),
        )
    }

    pub fn pairs(&self) -> &[(Vec<f64>, Vec<f64>, f64)] {
        &self.pairs
    }
}

/// Sampler for a bridge mixture: draw an endpoint pair by weight, then run
/// its exact bridge.
#[derive(Debug, Clone)]
pub struct ReciprocalSampler {
    samplers: Vec<BridgeSampler>,
    cumulative: Vec<f64>,
}

impl ReciprocalSampler {
    pub fn new(
        model: &JumpModel,
        rates: &RateFunction,
        mixture: &EndpointMixture,
        delta: f64,
    ) -> Result<Self> {
        let mut samplers = Vec::with_capacity(mixture.pairs().len());
        let mut cumulative = Vec::with_capacity(mixture.pairs().len());
        let mut acc = 0.0;
        for (x, y, w) in mixture.pairs() {
            samplers.push(BridgeSampler::new(model, rates, x, y, delta)?);
            acc += w;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(ReciprocalSampler {
            samplers,
            cumulative,
        })
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Path {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.samplers.len() - 1);
        self.samplers[idx].sample(rng)
    }
}

/// One kernel-basis row of the same-class comparison.
#[derive(Debug, Clone, Serialize)]
pub struct PhiRow {
    pub c: LatticeVector,
    pub log_phi1: f64,
    pub log_phi2: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SameClassReport {
    pub same: bool,
    pub rows: Vec<PhiRow>,
    /// Euclidean norm of the kernel-space component of log ν₁ − log ν₂;
    /// zero iff the rate change is orthogonal to the kernel.
    pub projection_norm: f64,
}

/// Decide whether two homogeneous rate vectors generate the same bridges:
/// Φ^c must agree for every kernel basis vector c (equivalently, the
/// log-rate difference must be orthogonal to the kernel).
pub fn same_class(
    model: &JumpModel,
    rates1: &RateFunction,
    rates2: &RateFunction,
) -> Result<SameClassReport> {
    check_rate_model(model, rates1)?;
    check_rate_model(model, rates2)?;
    let (Some(_), Some(_)) = (rates1.homogeneous_values(), rates2.homogeneous_values()) else {
        return Err(Error::Unsupported(
            "same-class decision is defined for constant rates; for time-varying rates compare \
             the time invariant and the space invariant jointly"
                .into(),
        ));
    };
    let basis = kernel_basis(model);
    let mut rows = Vec::with_capacity(basis.rank());
    let mut same = true;
    for c in basis.vectors() {
        let log_phi1 = -log_inv_phi(rates1, c);
        let log_phi2 = -log_inv_phi(rates2, c);
        let diff = (log_phi1 - log_phi2).abs();
        if diff >= 1e-9 {
            same = false;
        }
        rows.push(PhiRow {
            c: c.clone(),
            log_phi1,
            log_phi2,
            diff,
        });
    }
    // Kernel-space component of the log-rate difference, via the Gram system
    // of the basis vectors in f64.
    let a = model.n_jumps();
    let delta: Vec<f64> = rates1
        .totals()
        .iter()
        .zip(rates2.totals())
        .map(|(l1, l2)| l1.ln() - l2.ln())
        .collect();
    let vecs: Vec<Vec<f64>> = basis
        .vectors()
        .iter()
        .map(|v| {
            use num_traits::ToPrimitive;
            v.coords()
                .iter()
                .map(|x| x.to_f64().expect("basis coordinate fits f64"))
                .collect()
        })
        .collect();
    let k = vecs.len();
    let projection_norm = if k == 0 {
        0.0
    } else {
        let mut gram = vec![vec![0.0f64; k + 1]; k];
        for (i, vi) in vecs.iter().enumerate() {
            for (j, vj) in vecs.iter().enumerate() {
                gram[i][j] = (0..a).map(|t| vi[t] * vj[t]).sum();
            }
            gram[i][k] = (0..a).map(|t| vi[t] * delta[t]).sum();
        }
        let alpha = solve_dense(&mut gram);
        let mut norm2 = 0.0;
        for t in 0..a {
            let comp: f64 = (0..k).map(|i| alpha[i] * vecs[i][t]).sum();
            norm2 += comp * comp;
        }
        norm2.sqrt()
    };
    Ok(SameClassReport {
        same,
        rows,
        projection_norm,
    })
}

/// Gaussian elimination with partial pivoting on an augmented k×(k+1) system.
fn solve_dense(aug: &mut [Vec<f64>]) -> Vec<f64> {
    let k = aug.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .expect("nonempty system");
        aug.swap(col, pivot);
        let p = aug[col][col];
        debug_assert!(p.abs() > 0.0, "basis vectors are independent");
        for row in 0..k {
            if row == col {
                continue;
            }
            let f = aug[row][col] / p;
            for c in col..=k {
                aug[row][c] -= f * aug[col][c];
            }
        }
    }
    (0..k).map(|i| aug[i][k] / aug[i][i]).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneralClassReport {
    pub same: bool,
    pub xi_equal: bool,
    pub phi_equal: bool,
    /// Largest relative wobble of ν₂_j(t)/ν₁_j(t) across the time grid.
    pub max_xi_deviation: f64,
    pub rows: Vec<PhiRow>,
}

/// Same-class test for possibly time-varying rates: the time invariants must
/// agree (the per-type rate ratio is constant in t, checked on a 1025-point
/// grid) and the space invariants must agree on a kernel basis.
pub fn same_class_general(
    model: &JumpModel,
    rates1: &RateFunction,
    rates2: &RateFunction,
) -> Result<GeneralClassReport> {
    check_rate_model(model, rates1)?;
    check_rate_model(model, rates2)?;
    let mut max_dev = 0.0f64;
    for j in 0..rates1.n_types() {
        let base = rates2.rate(j, 0.0) / rates1.rate(j, 0.0);
        for i in 0..=1024 {
            let t = i as f64 / 1024.0;
            let ratio = rates2.rate(j, t) / rates1.rate(j, t);
            max_dev = max_dev.max((ratio / base - 1.0).abs());
        }
    }
    let xi_equal = max_dev < 1e-9;
    let basis = kernel_basis(model);
    let mut rows = Vec::with_capacity(basis.rank());
    let mut phi_equal = true;
    for c in basis.vectors() {
        let log_phi1 = -log_inv_phi(rates1, c);
        let log_phi2 = -log_inv_phi(rates2, c);
        let diff = (log_phi1 - log_phi2).abs();
        if diff >= 1e-9 {
            phi_equal = false;
        }
        rows.push(PhiRow {
            c: c.clone(),
            log_phi1,
            log_phi2,
            diff,
        });
    }
    Ok(GeneralClassReport {
        same: xi_equal && phi_equal,
        xi_equal,
        phi_equal,
        max_xi_deviation: max_dev,
        rows,
    })
}

/// Closed-form probability that a window of length eps contains exactly the
/// cycle's jumps in its exact order, for constant rates:
/// exp(−ε Σ_j ν_j) · ε^{|c|} · Π_j ν_j^{c_j} / |c|!.
pub fn cycle_prob_exact(rates: &RateFunction, cycle: &Cycle, eps: f64) -> Result<f64> {
    let Some(nu) = rates.homogeneous_values() else {
        return Err(Error::Unsupported(
            "the closed-form window probability needs constant rates".into(),
        ));
    };
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(
            "window length must lie in (0, 1]".into(),
        ));
    }
    if nu.len() != cycle.count_vector().len() {
        return Err(Error::InvalidInput(
            "rate and cycle type counts differ".into(),
        ));
    }
    let total: f64 = nu.iter().sum();
    let mut log_p = -eps * total + cycle.len() as f64 * eps.ln();
    for (v, &cj) in nu.iter().zip(cycle.count_vector()) {
        log_p += cj as f64 * v.ln();
    }
    let mut log_fact = 0.0;
    for k in 2..=cycle.len() {
        log_fact += (k as f64).ln();
    }
    Ok((log_p - log_fact).exp())
}

/// Where the Monte Carlo paths come from.
#[derive(Debug, Clone, Copy)]
pub enum PathSource<'a> {
    /// The unconditioned process started at x0.
    Free { x0: &'a [f64] },
    /// The exact bridge from x to y.
    Bridge { x: &'a [f64], y: &'a [f64] },
}

/// One window size of the asymptotics table.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsRow {
    pub eps: f64,
    pub n: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// p_hat divided by the exact window probability at this eps; tends to 1
    /// as the window shrinks, for free paths and bridges alike.
    pub ratio_to_limit: f64,
}

const BLOCK: u64 = 8192;

/// Estimate the window-cycle probability over shrinking windows with one
/// common set of sampled paths, reporting Wilson intervals and the ratio to
/// the closed-form reference.
#[allow(clippy::too_many_arguments)]
pub fn cycle_asymptotics_estimate(
    model: &JumpModel,
    rates: &RateFunction,
    source: PathSource<'_>,
    cycle: &Cycle,
    t: f64,
    eps_list: &[f64],
    n: u64,
    seed: u64,
    z: f64,
) -> Result<Vec<AsymptoticsRow>> {
    check_rate_model(model, rates)?;
    if eps_list.is_empty() || n == 0 {
        return Err(Error::InvalidInput(
            "need at least one window size and one replicate".into(),
        ));
    }
    let max_eps = eps_list.iter().cloned().fold(0.0f64, f64::max);
    if t < 0.0 || t + max_eps > 1.0 || eps_list.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidInput(
            "windows must satisfy 0 <= t and t + eps <= 1 with eps > 0".into(),
        ));
    }
    // The reference column needs the closed form, so constant rates are
    // required up front rather than failing after the sampling pass.
    let references: Vec<f64> = eps_list
        .iter()
        .map(|&e| cycle_prob_exact(rates, cycle, e))
        .collect::<Result<Vec<_>>>()?;
    let bridge = match source {
        PathSource::Free { .. } => None,
        PathSource::Bridge { x, y } => Some(BridgeSampler::new(model, rates, x, y, 1e-12)?),
    };
    let x0_free: Vec<f64> = match source {
        PathSource::Free { x0 } => x0.to_vec(),
        PathSource::Bridge { .. } => Vec::new(),
    };
    let n_blocks = n.div_ceil(BLOCK);
    let hits_per_block: Vec<Vec<u64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            let mut hits = vec![0u64; eps_list.len()];
            for k in lo..hi {
                let mut rng = replicate_rng(seed, k);
                let path = match &bridge {
                    Some(s) => s.sample(&mut rng),
                    None => sample_cpp(&x0_free, rates, &mut rng),
                };
                for (i, &eps) in eps_list.iter().enumerate() {
                    if cycle_hit(&path, t, eps, cycle) {
                        hits[i] += 1;
                    }
                }
            }
            hits
        })
        .collect();
    let mut hits = vec![0u64; eps_list.len()];
    for block in hits_per_block {
        for (h, b) in hits.iter_mut().zip(block) {
            *h += b;
        }
    }
    Ok(eps_list
        .iter()
        .zip(hits)
        .zip(references)
        .map(|((&eps, h), reference)| {
            let p_hat = h as f64 / n as f64;
            let (ci_lo, ci_hi) = wilson_interval(h, n, z);
            AsymptoticsRow {
                eps,
                n,
                hits: h,
                p_hat,
                ci_lo,
                ci_hi,
                ratio_to_limit: p_hat / reference,
            }
        })
        .collect())
}
