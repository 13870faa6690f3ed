//! Product-Poisson count distributions and the shift identities that
//! characterize their mixtures.
//!
//! The jump-count vector of a homogeneous process at unit time is product
//! Poisson. Mixtures of its fiber-conditioned laws are exactly the
//! distributions ρ satisfying ρ(n − c) = λ^{−c} G_c(n) ρ(n) for every kernel
//! vector c, where G_c collects falling/rising factorials per coordinate.
//! This module enumerates truncated product-Poisson laws exactly, measures
//! shift-identity residuals, decides class membership by fiber-ratio
//! constancy, and constructs the contaminated mixture that defeats any probe
//! set missing a feasible shift.

use num_traits::ToPrimitive;
use statrs::function::gamma::ln_gamma;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::{fiber_points, kernel_basis, shift_density_f64, LatticeVector};
use crate::model::JumpModel;

/// A finitely supported distribution (or sub-distribution) on count vectors.
///
/// Values are plain probabilities; truncations keep their defect rather than
/// renormalizing, so identities can be checked against the untruncated law.
#[derive(Debug, Clone, Default)]
pub struct SparseDistribution {
    probs: BTreeMap<Vec<i64>, f64>,
}

impl SparseDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add mass at a point (accumulating over repeated inserts).
    pub fn add_mass(&mut self, n: Vec<i64>, p: f64) {
        assert!(p.is_finite() && p >= 0.0, "mass must be finite and >= 0");
        if let Some(first) = self.probs.keys().next() {
            assert_eq!(first.len(), n.len(), "count vector lengths differ");
        }
        if p > 0.0 {
            *self.probs.entry(n).or_insert(0.0) += p;
        }
    }

    /// Multiply every probability by a nonnegative factor.
    pub fn scale(&mut self, factor: f64) {
        assert!(
            factor.is_finite() && factor >= 0.0,
            "scale factor must be finite and >= 0"
        );
        for p in self.probs.values_mut() {
            *p *= factor;
        }
    }

    /// Rescale so the total mass is 1. Errors on an empty or zero-mass
    /// distribution.
    pub fn normalize(&mut self) -> Result<()> {
        let total = self.total_mass();
        if !(total > 0.0) {
            return Err(Error::Infeasible(
                "cannot normalize a distribution with zero total mass".into(),
            ));
        }
        self.scale(1.0 / total);
        Ok(())
    }

    pub fn prob(&self, n: &[i64]) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// Support points in lexicographic order.
    pub fn support(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.probs.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> {
        self.probs.iter().map(|(n, &p)| (n, p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }
}

fn validate_rates(lambda: &[f64]) -> Result<()> {
    if lambda.is_empty() {
        return Err(Error::InvalidInput("rate vector is empty".into()));
    }
    if lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidInput(
            "rates must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Product-Poisson probability mass Π_j e^{−λ_j} λ_j^{n_j} / n_j!.
///
/// Returns 0 for any negative count. Zero rates are allowed (forcing the
/// corresponding count to 0).
pub fn pois_pmf(lambda: &[f64], n: &[i64]) -> f64 {
    assert_eq!(lambda.len(), n.len(), "rate and count lengths differ");
    let mut log_p = 0.0f64;
    for (&l, &k) in lambda.iter().zip(n) {
        assert!(l.is_finite() && l >= 0.0, "rates must be finite and >= 0");
        if k < 0 {
            return 0.0;
        }
        if l == 0.0 {
            if k > 0 {
                return 0.0;
            }
            continue;
        }
        let kf = k as f64;
        log_p += kf * l.ln() - l - ln_gamma(kf + 1.0);
    }
    log_p.exp()
}

/// Largest count per coordinate once each marginal tail is below the budget.
fn tail_cutoffs(lambda: &[f64], delta: f64) -> Result<Vec<i64>> {
    let per_coord = delta / lambda.len() as f64;
    let mut cutoffs = Vec::with_capacity(lambda.len());
    for &l in lambda {
        let mut p = (-l).exp();
        let mut cum = p;
        let mut k = 0i64;
        while 1.0 - cum > per_coord {
            k += 1;
            p *= l / k as f64;
            cum += p;
            if k > 100_000_000 {
                return Err(Error::ResourceLimit(
                    "truncation cutoff exceeds 1e8 counts in one coordinate".into(),
                ));
            }
        }
        cutoffs.push(k);
    }
    Ok(cutoffs)
}

/// Enumerate the product-Poisson law on the box that captures at least
/// 1 − delta of the mass. Probabilities are kept as-is (no renormalization).
pub fn truncate_pois(lambda: &[f64], delta: f64) -> Result<SparseDistribution> {
    validate_rates(lambda)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(
            "truncation budget must lie strictly between 0 and 1".into(),
        ));
    }
    let cutoffs = tail_cutoffs(lambda, delta)?;
    let volume = cutoffs
        .iter()
        .try_fold(1i64, |acc, &c| acc.checked_mul(c + 1));
    if !matches!(volume, Some(v) if v <= 5_000_000) {
        return Err(Error::ResourceLimit(format!(
            "truncation box {cutoffs:?} exceeds 5e6 points"
        )));
    }
    // Per-coordinate pmf tables, combined over the box by an odometer walk.
    let tables: Vec<Vec<f64>> = lambda
        .iter()
        .zip(&cutoffs)
        .map(|(&l, &c)| {
            let mut t = Vec::with_capacity(c as usize + 1);
            let mut p = (-l).exp();
            t.push(p);
            for k in 1..=c {
                p *= l / k as f64;
                t.push(p);
            }
            t
        })
        .collect();
    let mut dist = SparseDistribution::new();
    let mut idx = vec![0i64; lambda.len()];
    loop {
        let p: f64 = idx
            .iter()
            .zip(&tables)
            .map(|(&k, t)| t[k as usize])
            .product();
        dist.add_mass(idx.clone(), p);
        let mut pos = lambda.len();
        loop {
            if pos == 0 {
                return Ok(dist);
            }
            pos -= 1;
            if idx[pos] < cutoffs[pos] {
                idx[pos] += 1;
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Residual survey of ρ(n − c) = λ^{−c} G_c(n) ρ(n) over the support of ρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftIdentityReport {
    pub max_residual: f64,
    pub points_checked: usize,
}

/// Check the shift identity for one kernel vector against a finitely
/// supported ρ. Every support point n with n − c in the nonnegative orthant
/// contributes the residual |ρ(n − c) − λ^{−c} G_c(n) ρ(n)|; points outside
/// the orthant carry no information (both sides vanish).
pub fn check_shift_identity(
    rho: &SparseDistribution,
    lambda: &[f64],
    c: &LatticeVector,
) -> ShiftIdentityReport {
    assert_eq!(lambda.len(), c.len(), "rate and shift lengths differ");
    assert!(
        lambda.iter().all(|l| l.is_finite() && *l > 0.0),
        "shift identities need strictly positive rates"
    );
    let c_i64: Vec<i64> = c
        .coords()
        .iter()
        .map(|x| x.to_i64().expect("shift coordinate fits i64"))
        .collect();
    let lambda_pow: f64 = lambda
        .iter()
        .zip(&c_i64)
        .map(|(&l, &cj)| l.powi(-cj as i32))
        .product();
    let mut max_residual = 0.0f64;
    let mut points_checked = 0usize;
    for (n, p) in rho.iter() {
        let shifted: Option<Vec<i64>> = n
            .iter()
            .zip(&c_i64)
            .map(|(&nj, &cj)| nj.checked_sub(cj).filter(|&s| s >= 0))
            .collect();
        let Some(shifted) = shifted else { continue };
        let lhs = rho.prob(&shifted);
        let rhs = lambda_pow * shift_density_f64(c, n) * p;
        max_residual = max_residual.max((lhs - rhs).abs());
        points_checked += 1;
    }
    ShiftIdentityReport {
        max_residual,
        points_checked,
    }
}

/// Fiber-ratio constancy verdict: ρ belongs to the mixture class of the
/// λ product Poisson iff ρ(n)/p_λ(n) is constant on every fiber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipReport {
    pub member: bool,
    /// Largest max−min gap of the ratio within a single fiber.
    pub max_spread: f64,
    pub cosets_checked: usize,
}

/// Group the support of ρ by fiber (coset of the kernel lattice) and measure
/// how far the ratio ρ(n)/p_λ(n) is from constant within each group.
pub fn check_class_membership(
    model: &JumpModel,
    rho: &SparseDistribution,
    lambda: &[f64],
    tol: f64,
) -> Result<MembershipReport> {
    validate_rates(lambda)?;
    if lambda.len() != model.n_jumps() {
        return Err(Error::InvalidInput(format!(
            "rate vector has length {}, expected {}",
            lambda.len(),
            model.n_jumps()
        )));
    }
    if lambda.iter().any(|&l| l == 0.0) {
        return Err(Error::InvalidInput(
            "class membership needs strictly positive rates".into(),
        ));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidInput("tolerance must be finite and >= 0".into()));
    }
    let basis = kernel_basis(model);
    let mut ranges: BTreeMap<Vec<num_bigint::BigInt>, (f64, f64)> = BTreeMap::new();
    for (n, p) in rho.iter() {
        if n.len() != model.n_jumps() {
            return Err(Error::InvalidInput(format!(
                "support point has length {}, expected {}",
                n.len(),
                model.n_jumps()
            )));
        }
        let ratio = p / pois_pmf(lambda, n);
        let key = basis.coset_key(&LatticeVector::from(n.clone()));
        let entry = ranges.entry(key).or_insert((ratio, ratio));
        entry.0 = entry.0.min(ratio);
        entry.1 = entry.1.max(ratio);
    }
    let max_spread = ranges
        .values()
        .map(|(lo, hi)| hi - lo)
        .fold(0.0f64, f64::max);
    Ok(MembershipReport {
        member: max_spread <= tol,
        max_spread,
        cosets_checked: ranges.len(),
    })
}

/// One probed shift with its residual survey.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledShiftReport {
    pub shift: LatticeVector,
    pub max_residual: f64,
    pub points_checked: usize,
}

/// The contaminated-mixture construction for jumps {3,4,5} and its analysis.
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub eps: f64,
    pub lambda: Vec<f64>,
    /// Residual surveys for every ± kernel basis vector.
    pub shift_reports: Vec<LabeledShiftReport>,
    pub membership: MembershipReport,
    /// Shifts c with both n_v and n_v + c feasible (sorted, zero first):
    /// the only probes that could expose the contamination.
    pub feasible: Vec<Vec<i64>>,
    /// True when the construction behaves as designed: basis shifts see
    /// nothing, membership is rejected, and no feasible nonzero shift lies
    /// in the probed set.
    pub expected_pattern: bool,
}

/// Build ρ = (1−ε)·(truncated product Poisson) + ε·δ at n_v = (3,0,0) for
/// jumps {3,4,5} and survey it.
///
/// The fiber of n_v holds exactly two points, so the only shift that relates
/// contaminated mass to anything else is f = (−3,1,1) — absent from ±basis.
/// Basis-shift residuals therefore stay at the truncation floor while the
/// fiber-ratio spread exposes the contamination at size ε / p_λ(n_v).
pub fn counterexample_345(eps: f64, lambda: [f64; 3]) -> Result<CounterexampleReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(
            "contamination weight must lie strictly between 0 and 1".into(),
        ));
    }
    validate_rates(&lambda)?;
    if lambda.iter().any(|&l| l == 0.0) {
        return Err(Error::InvalidInput(
            "the construction needs strictly positive rates".into(),
        ));
    }
    let model = JumpModel::from_integer_columns(1, vec![vec![3], vec![4], vec![5]])
        .expect("static model is valid");
    let n_v = [3i64, 0, 0];
    let delta = 1e-12;
    let mut rho = truncate_pois(&lambda, delta)?;
    let bounds: Vec<i64> = (0..3)
        .map(|j| rho.support().map(|n| n[j]).max().unwrap_or(0))
        .collect();
    if bounds.iter().zip(&n_v).any(|(&b, &v)| b < v) {
        return Err(Error::Infeasible(
            "truncation box does not contain the contamination point".into(),
        ));
    }
    rho.scale(1.0 - eps);
    rho.add_mass(n_v.to_vec(), eps);

    let basis = kernel_basis(&model);
    let mut shift_reports = Vec::new();
    for v in basis.vectors() {
        for signed in [v.clone(), -v] {
            let r = check_shift_identity(&rho, &lambda, &signed);
            shift_reports.push(LabeledShiftReport {
                shift: signed,
                max_residual: r.max_residual,
                points_checked: r.points_checked,
            });
        }
    }

    let membership = check_class_membership(&model, &rho, &lambda, 1e-9)?;

    let fiber = fiber_points(&model, &n_v, &bounds)?;
    let mut feasible: Vec<Vec<i64>> = fiber
        .iter()
        .map(|p| p.iter().zip(&n_v).map(|(&a, &b)| a - b).collect())
        .collect();
    feasible.sort_by_key(|c: &Vec<i64>| (c.iter().any(|&x| x != 0), c.clone()));

    let shifts_quiet = shift_reports.iter().all(|r| r.max_residual < 1e-10);
    let probed: Vec<&LatticeVector> = shift_reports.iter().map(|r| &r.shift).collect();
    let no_feasible_probed = feasible
        .iter()
        .filter(|c| c.iter().any(|&x| x != 0))
        .all(|c| {
            let cv = LatticeVector::from(c.clone());
            !probed.iter().any(|p| **p == cv)
        });
    let expected_pattern = shifts_quiet && !membership.member && no_feasible_probed;

    Ok(CounterexampleReport {
        eps,
        lambda: lambda.to_vec(),
        shift_reports,
        membership,
        feasible,
        expected_pattern,
    })
}
