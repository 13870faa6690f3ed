//! Time-inhomogeneous compound Poisson paths on [0,1]: piecewise-linear
//! intensities with exact integrals and inverse-CDF jump-time sampling,
//! path functionals, per-type time-change transformations with their
//! change-of-intensity density, and the time invariant ν_j(t)/ν_j(s).

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;
use crate::model::JumpModel;

/// Piecewise-linear intensity for one jump type: positive values at
/// breakpoints 0 = t_0 < … < t_K = 1, interpolated linearly.
#[derive(Debug, Clone)]
struct TypeRate {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    /// Integral from 0 to each breakpoint.
    cumulative: Vec<f64>,
}

impl TypeRate {
    fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.len() < 2 {
            return Err(Error::InvalidInput(
                "each type needs matching breakpoints and values, at least two".into(),
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidInput(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidInput(
                "intensity values must be finite and strictly positive".into(),
            ));
        }
        // Linear pieces attain their minimum at a node, so positivity at the
        // nodes gives a positive infimum on [0,1].
        let mut cumulative = Vec::with_capacity(breakpoints.len());
        cumulative.push(0.0);
        for k in 1..breakpoints.len() {
            let width = breakpoints[k] - breakpoints[k - 1];
            let seg = width * (values[k - 1] + values[k]) / 2.0;
            cumulative.push(cumulative[k - 1] + seg);
        }
        Ok(TypeRate {
            breakpoints,
            values,
            cumulative,
        })
    }

    /// Index of the segment containing t (the last segment for t = 1).
    fn segment(&self, t: f64) -> usize {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        k.clamp(1, self.breakpoints.len() - 1) - 1
    }

    fn rate(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let frac = (t - self.breakpoints[k]) / (self.breakpoints[k + 1] - self.breakpoints[k]);
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    fn integral(&self, s: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.breakpoints.len() - 1 {
            let lo = self.breakpoints[k].max(s);
            let hi = self.breakpoints[k + 1].min(t);
            if hi > lo {
                acc += (hi - lo) * (self.rate(lo) + self.rate(hi)) / 2.0;
            }
        }
        acc
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Quantile of the normalized density ν/λ: the time t with
    /// ∫_0^t ν = target, for target ∈ (0, λ].
    fn quantile(&self, target: f64) -> f64 {
        let k = self
            .cumulative
            .partition_point(|&c| c < target)
            .clamp(1, self.breakpoints.len() - 1)
            - 1;
        let local = target - self.cumulative[k];
        let width = self.breakpoints[k + 1] - self.breakpoints[k];
        let v = self.values[k];
        let slope = (self.values[k + 1] - self.values[k]) / width;
        // Solve v·τ + slope·τ²/2 = local via the numerically stable root;
        // the same expression covers slope = 0 (τ = local/v).
        let disc = (v * v + 2.0 * slope * local).max(0.0);
        let tau = 2.0 * local / (v + disc.sqrt());
        (self.breakpoints[k] + tau).min(self.breakpoints[k + 1])
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct RateEntryRepr {
    #[serde(rename = "type")]
    jump_type: usize,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

/// Per-type intensities ν_j on [0,1], each piecewise-linear, continuous and
/// strictly positive.
#[derive(Debug, Clone)]
pub struct RateFunction {
    types: Vec<TypeRate>,
    totals: Vec<f64>,
}

impl RateFunction {
    /// Constant intensities.
    pub fn homogeneous(rates: &[f64]) -> Result<Self> {
        let types = rates
            .iter()
            .map(|&r| TypeRate::new(vec![0.0, 1.0], vec![r, r]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_types(types))
    }

    /// One (breakpoints, values) pair per jump type.
    pub fn piecewise_linear(parts: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let types = parts
            .into_iter()
            .map(|(b, v)| TypeRate::new(b, v))
            .collect::<Result<Vec<_>>>()?;
        if types.is_empty() {
            return Err(Error::InvalidInput("no jump types".into()));
        }
        Ok(Self::from_types(types))
    }

    fn from_types(types: Vec<TypeRate>) -> Self {
        let totals = types.iter().map(TypeRate::total).collect();
        RateFunction { types, totals }
    }

    /// Parse the JSON list of `{"type": j, "breakpoints": [...], "values":
    /// [...]}` entries; types must be exactly 1..=A, each once.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut entries: Vec<RateEntryRepr> = serde_json::from_str(s)?;
        entries.sort_by_key(|e| e.jump_type);
        if entries.is_empty() {
            return Err(Error::InvalidInput("no rate entries".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.jump_type != i + 1 {
                return Err(Error::InvalidInput(format!(
                    "rate entries must cover types 1..={} exactly once; found type {}",
                    entries.len(),
                    e.jump_type
                )));
            }
        }
        Self::piecewise_linear(
            entries
                .into_iter()
                .map(|e| (e.breakpoints, e.values))
                .collect(),
        )
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    /// ν_j(t) for a 0-based type index.
    pub fn rate(&self, j: usize, t: f64) -> f64 {
        self.types[j].rate(t)
    }

    /// ∫_s^t ν_j, exact for the piecewise-linear family.
    pub fn rate_integral(&self, j: usize, s: f64, t: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&s) && s <= t && t <= 1.0);
        self.types[j].integral(s, t)
    }

    /// The total masses λ_j = ∫_0^1 ν_j.
    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    /// Constant per-type values when every intensity is constant.
    pub fn homogeneous_values(&self) -> Option<Vec<f64>> {
        self.types
            .iter()
            .map(|t| {
                let v0 = t.values[0];
                t.values.iter().all(|&v| v == v0).then_some(v0)
            })
            .collect()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous_values().is_some()
    }

    /// The time invariant ν_j(t) / ν_j(s).
    pub fn xi_invariant(&self, j: usize, s: f64, t: f64) -> f64 {
        self.rate(j, t) / self.rate(j, s)
    }

    /// One jump time with density ν_j/λ_j, by inverting the piecewise
    /// quadratic CDF. Always lands in (0, 1].
    pub fn sample_time<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // 1 - u lies in (0, 1], keeping the target mass positive.
        let target = (1.0 - u) * self.totals[j];
        self.types[j].quantile(target).min(1.0)
    }
}

/// One jump: time in (0,1] and 0-based type index. The JSON form uses
/// 1-based type indices under the key "j".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub j: usize,
}

#[derive(Serialize, Deserialize)]
struct EventRepr {
    t: f64,
    j: usize,
}

impl Serialize for Event {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        EventRepr {
            t: self.t,
            j: self.j + 1,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = EventRepr::deserialize(deserializer)?;
        if repr.j == 0 {
            return Err(serde::de::Error::custom("jump type indices are 1-based"));
        }
        Ok(Event {
            t: repr.t,
            j: repr.j - 1,
        })
    }
}

/// A realized path: a start point and time-sorted jump events on (0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub x0: Vec<f64>,
    events: Vec<Event>,
}

impl Path {
    /// Sorts events by (time, type). Times must lie in (0,1]; simultaneous
    /// events of one type are rejected.
    pub fn new(x0: Vec<f64>, mut events: Vec<Event>) -> Result<Self> {
        if events
            .iter()
            .any(|e| !e.t.is_finite() || e.t <= 0.0 || e.t > 1.0)
        {
            return Err(Error::InvalidInput(
                "event times must lie in (0, 1]".into(),
            ));
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.j.cmp(&b.j)));
        if events.windows(2).any(|w| w[0].t == w[1].t && w[0].j == w[1].j) {
            return Err(Error::InvalidInput(
                "two events of the same type share a time".into(),
            ));
        }
        Ok(Path { x0, events })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: Path = serde_json::from_str(s)?;
        Path::new(raw.x0, raw.events)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("paths serialize")
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    /// Per-type jump counts up to and including time t.
    pub fn counting_vector(&self, t: f64, n_types: usize) -> Vec<i64> {
        let mut counts = vec![0i64; n_types];
        for e in &self.events {
            if e.t > t {
                break;
            }
            counts[e.j] += 1;
        }
        counts
    }

    /// Terminal position x0 + **A** N_1.
    pub fn terminal(&self, model: &JumpModel) -> Result<Vec<f64>> {
        let n1 = self.counting_vector(1.0, model.n_jumps());
        let disp = model.displacement(&n1)?;
        Ok(self
            .x0
            .iter()
            .zip(disp)
            .map(|(x, d)| x + d)
            .collect())
    }
}

/// Draw a compound Poisson path: per type, a Poisson(λ_j) count and that many
/// i.i.d. jump times with density ν_j/λ_j — an exact sampler.
pub fn sample_cpp<R: Rng + ?Sized>(x0: &[f64], rates: &RateFunction, rng: &mut R) -> Path {
    let mut events = Vec::new();
    for j in 0..rates.n_types() {
        let lambda = rates.totals()[j];
        let count = Poisson::new(lambda)
            .expect("positive total rate")
            .sample(rng) as u64;
        for _ in 0..count {
            events.push(Event {
                t: rates.sample_time(j, rng),
                j,
            });
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.j.cmp(&b.j)));
    Path {
        x0: x0.to_vec(),
        events,
    }
}

#[derive(Debug, Deserialize)]
struct TimeChangeRepr {
    family: String,
    a: Vec<f64>,
}

/// Per-type increasing bijections of [0,1] from the exponential-warp family
/// u(t) = (e^{at} − 1)/(e^a − 1), identity at a = 0.
#[derive(Debug, Clone)]
pub struct TimeChange {
    a: Vec<f64>,
}

impl TimeChange {
    pub fn exp_warp(a: &[f64]) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidInput("no warp parameters".into()));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("warp parameters must be finite".into()));
        }
        let tc = TimeChange { a: a.to_vec() };
        // Dense-grid sanity check of the bijection contract.
        for j in 0..tc.a.len() {
            let mut prev = tc.eval(j, 0.0);
            if prev != 0.0 || tc.eval(j, 1.0) != 1.0 {
                return Err(Error::InvalidInput(
                    "time change must fix 0 and 1".into(),
                ));
            }
            for i in 1..=1024 {
                let t = i as f64 / 1024.0;
                let v = tc.eval(j, t);
                if !(v > prev) || tc.derivative(j, t) <= 0.0 {
                    return Err(Error::InvalidInput(
                        "time change must be strictly increasing".into(),
                    ));
                }
                prev = v;
            }
        }
        Ok(tc)
    }

    pub fn identity(n_types: usize) -> Self {
        TimeChange {
            a: vec![0.0; n_types],
        }
    }

    /// Parse `{"family": "exp_warp", "a": [...]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let repr: TimeChangeRepr = serde_json::from_str(s)?;
        if repr.family != "exp_warp" {
            return Err(Error::Unsupported(format!(
                "unknown time-change family {:?}",
                repr.family
            )));
        }
        Self::exp_warp(&repr.a)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn n_types(&self) -> usize {
        self.a.len()
    }

    pub fn eval(&self, j: usize, t: f64) -> f64 {
        let a = self.a[j];
        if a == 0.0 {
            t
        } else {
            (a * t).exp_m1() / a.exp_m1()
        }
    }

    pub fn derivative(&self, j: usize, t: f64) -> f64 {
        let a = self.a[j];
        if a == 0.0 {
            1.0
        } else {
            a * (a * t).exp() / a.exp_m1()
        }
    }

    pub fn inverse(&self, j: usize, s: f64) -> f64 {
        let a = self.a[j];
        if a == 0.0 {
            s
        } else {
            (s * a.exp_m1()).ln_1p() / a
        }
    }
}

/// Transform a path by the per-type time change: each event (T, j) moves to
/// (u_j^{-1}(T), j), so the new type-j counting process at time t equals the
/// old one at u_j(t). Returns the transformed path and the number of exact
/// time collisions (ties are ordered by type index; collisions have
/// probability zero for sampled paths).
pub fn apply_time_change(path: &Path, u: &TimeChange) -> (Path, usize) {
    let mut events: Vec<Event> = path
        .events
        .iter()
        .map(|e| Event {
            t: u.inverse(e.j, e.t),
            j: e.j,
        })
        .collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.j.cmp(&b.j)));
    let collisions = events.windows(2).filter(|w| w[0].t == w[1].t).count();
    (
        Path {
            x0: path.x0.clone(),
            events,
        },
        collisions,
    )
}

/// Which reading of the time-change density to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityReading {
    /// Product over events of Ξ(j, T, u_j(T)) · u̇_j(T): the density of the
    /// transformed law (an inhomogeneous Poisson process with intensity
    /// ν_j(u_j(t)) u̇_j(t); the exponential compensator terms cancel because
    /// the warp preserves each total mass).
    Girsanov,
    /// Product over events of Ξ(j, T, u_j(T))^{u̇_j(T)} — the derivative
    /// enters as an exponent instead of a factor. Kept as a Monte Carlo
    /// discriminator: for constant rates this is identically 1.
    Literal,
}

/// Evaluate the selected density reading at a path, in log space.
pub fn time_change_density(
    path: &Path,
    u: &TimeChange,
    rates: &RateFunction,
    reading: DensityReading,
) -> f64 {
    let mut log_d = 0.0f64;
    for e in &path.events {
        let warped = u.eval(e.j, e.t);
        let xi = rates.xi_invariant(e.j, e.t, warped);
        let du = u.derivative(e.j, e.t);
        log_d += match reading {
            DensityReading::Girsanov => (xi * du).ln(),
            DensityReading::Literal => xi.ln() * du,
        };
    }
    log_d.exp()
}

/// A closed jump-type sequence: its count vector lies in the kernel, so the
/// net displacement vanishes exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    types: Vec<usize>,
    count_vector: Vec<i64>,
}

impl Cycle {
    /// Build from 0-based type indices; rejects open sequences.
    pub fn new(model: &JumpModel, types: Vec<usize>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::InvalidInput("a cycle needs at least one jump".into()));
        }
        if let Some(&bad) = types.iter().find(|&&j| j >= model.n_jumps()) {
            return Err(Error::InvalidInput(format!(
                "jump type index {bad} out of range (model has {} types)",
                model.n_jumps()
            )));
        }
        let mut count_vector = vec![0i64; model.n_jumps()];
        for &j in &types {
            count_vector[j] += 1;
        }
        if !crate::lattice::in_kernel(model, &LatticeVector::from(count_vector.clone()))? {
            return Err(Error::InvalidInput(
                "jump sequence is not closed (nonzero net displacement)".into(),
            ));
        }
        Ok(Cycle {
            types,
            count_vector,
        })
    }

    pub fn types(&self) -> &[usize] {
        &self.types
    }

    pub fn count_vector(&self) -> &[i64] {
        &self.count_vector
    }

    /// Number of jumps; at least 1 by construction.
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Cumulative displacements of the path restarted at time t, over the window
/// (t, t+eps]: starts at the zero vector, one entry per event.
pub fn trace(path: &Path, model: &JumpModel, t: f64, eps: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&t) || eps < 0.0 || t + eps > 1.0 {
        return Err(Error::InvalidInput(
            "window must satisfy 0 <= t and t + eps <= 1".into(),
        ));
    }
    let matrix = model.jump_matrix()?;
    let mut out = vec![vec![0.0; model.dim()]];
    let mut acc = vec![0.0; model.dim()];
    for e in &path.events {
        if e.t <= t || e.t > t + eps {
            continue;
        }
        for (r, row) in matrix.iter().enumerate() {
            acc[r] += row[e.j];
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// True iff the type sequence of events in (t, t+eps] equals the cycle's,
/// in count and order.
pub fn cycle_hit(path: &Path, t: f64, eps: f64, cycle: &Cycle) -> bool {
    debug_assert!(t >= 0.0 && eps >= 0.0 && t + eps <= 1.0);
    let mut want = cycle.types().iter();
    for e in &path.events {
        if e.t <= t {
            continue;
        }
        if e.t > t + eps {
            break;
        }
        if want.next() != Some(&e.j) {
            return false;
        }
    }
    want.next().is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_distance;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn ramp_rates() -> RateFunction {
        // Type 1: 1 + t; type 2: constant 2.
        RateFunction::piecewise_linear(vec![
            (vec![0.0, 1.0], vec![1.0, 2.0]),
            (vec![0.0, 1.0], vec![2.0, 2.0]),
        ])
        .unwrap()
    }

    fn pm1() -> JumpModel {
        JumpModel::from_integer_columns(1, vec![vec![-1], vec![1]]).unwrap()
    }

    #[test]
    fn rate_integrals_match_closed_forms() {
        let r = ramp_rates();
        assert_relative_eq!(r.rate_integral(1, 0.0, 1.0), 2.0, max_relative = 1e-14);
        assert_relative_eq!(r.rate_integral(0, 0.0, 1.0), 1.5, max_relative = 1e-14);
        assert_relative_eq!(r.rate_integral(0, 0.25, 0.75), 0.75, max_relative = 1e-14);
        assert_eq!(r.rate_integral(0, 0.3, 0.3), 0.0);
        assert_relative_eq!(r.rate(0, 0.5), 1.5, max_relative = 1e-14);
    }

    #[test]
    fn xi_invariant_examples() {
        let r = ramp_rates();
        assert_relative_eq!(r.xi_invariant(0, 0.0, 1.0), 2.0, max_relative = 1e-14);
        assert_eq!(r.xi_invariant(0, 0.4, 0.4), 1.0);
        let h = RateFunction::homogeneous(&[1.0, 2.0]).unwrap();
        assert_eq!(h.xi_invariant(1, 0.1, 0.9), 1.0);
    }

    #[test]
    fn rates_parse_from_json() {
        let r = RateFunction::from_json_str(include_str!("../tests/fixtures/rates-ramp.json"))
            .unwrap();
        assert_eq!(r.n_types(), 2);
        assert_relative_eq!(r.rate(1, 0.5), 2.5, max_relative = 1e-14);
        assert!(r.homogeneous_values().is_none());

        let h = RateFunction::from_json_str(include_str!("../tests/fixtures/rates-one-two.json"))
            .unwrap();
        assert_eq!(h.homogeneous_values(), Some(vec![1.0, 2.0]));

        let dup = r#"[{"type":1,"breakpoints":[0.0,1.0],"values":[1.0,1.0]},
                      {"type":1,"breakpoints":[0.0,1.0],"values":[1.0,1.0]}]"#;
        assert!(RateFunction::from_json_str(dup).is_err());
        let gap = r#"[{"type":2,"breakpoints":[0.0,1.0],"values":[1.0,1.0]}]"#;
        assert!(RateFunction::from_json_str(gap).is_err());
        let nonpos = r#"[{"type":1,"breakpoints":[0.0,1.0],"values":[0.0,1.0]}]"#;
        assert!(RateFunction::from_json_str(nonpos).is_err());
    }

    #[test]
    fn sampled_times_have_the_ramp_mean() {
        // Density (1+t)/1.5 on [0,1]: mean 5/9, variance 13/162.
        let r = ramp_rates();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| r.sample_time(0, &mut rng)).sum::<f64>() / n as f64;
        let se = (13.0f64 / 162.0 / n as f64).sqrt();
        assert!(
            (mean - 5.0 / 9.0).abs() < 4.0 * se,
            "mean {mean} vs 5/9, se {se}"
        );
    }

    #[test]
    fn first_jump_time_is_truncated_exponential() {
        // Merged homogeneous process at total rate 3: the first jump time,
        // conditioned on at least one jump, has CDF (1-e^{-3x})/(1-e^{-3}).
        let r = RateFunction::homogeneous(&[1.0, 2.0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let mut firsts = Vec::with_capacity(100_000);
        while firsts.len() < 100_000 {
            let p = sample_cpp(&[0.0], &r, &mut rng);
            if let Some(e) = p.events().first() {
                firsts.push(e.t);
            }
        }
        let z = -(-3.0f64).exp_m1(); // 1 - e^{-3}
        let d = ks_distance(&firsts, |x| (-(-3.0 * x).exp_m1()) / z);
        let crit = 1.949 / (firsts.len() as f64).sqrt();
        assert!(d < crit, "KS distance {d} exceeds {crit}");
    }

    #[test]
    fn sampler_counts_are_poisson() {
        let r = ramp_rates();
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let n = 200_000u64;
        let mut sums = [0i64; 2];
        for _ in 0..n {
            let p = sample_cpp(&[0.0], &r, &mut rng);
            let counts = p.counting_vector(1.0, 2);
            sums[0] += counts[0];
            sums[1] += counts[1];
        }
        for j in 0..2 {
            let lambda = r.totals()[j];
            let mean = sums[j] as f64 / n as f64;
            let se = (lambda / n as f64).sqrt();
            assert!(
                (mean - lambda).abs() < 4.0 * se,
                "type {j}: mean {mean} vs {lambda}"
            );
        }
    }

    #[test]
    fn rare_rates_rarely_jump() {
        let r = RateFunction::homogeneous(&[1e-4, 1e-4]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let n = 50_000;
        let empty = (0..n)
            .filter(|_| sample_cpp(&[0.0], &r, &mut rng).n_events() == 0)
            .count();
        let p = (-2e-4f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((empty as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn warp_closed_forms() {
        let u = TimeChange::exp_warp(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(u.eval(0, 0.5), 0.37754066879814543, max_relative = 1e-12);
        assert_eq!(u.eval(1, 0.37), 0.37);
        assert_eq!(u.eval(0, 0.0), 0.0);
        assert_eq!(u.eval(0, 1.0), 1.0);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert_relative_eq!(u.inverse(0, u.eval(0, t)), t, epsilon = 1e-12);
            let h = 1e-6;
            if t > 0.0 && t < 1.0 {
                let fd = (u.eval(0, t + h) - u.eval(0, t - h)) / (2.0 * h);
                assert_relative_eq!(u.derivative(0, t), fd, max_relative = 1e-8);
            }
        }
        // Negative parameters warp the other way but stay bijections.
        let d = TimeChange::exp_warp(&[-2.0]).unwrap();
        assert!(d.eval(0, 0.5) > 0.5);
        assert_relative_eq!(d.inverse(0, d.eval(0, 0.3)), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn timechange_parses_from_json() {
        let u = TimeChange::from_json_str(include_str!(
            "../tests/fixtures/timechange-warp-first.json"
        ))
        .unwrap();
        assert_eq!(u.n_types(), 2);
        assert_eq!(u.eval(1, 0.25), 0.25);
        let bad = TimeChange::from_json_str(r#"{"family":"spline","a":[1.0]}"#);
        assert!(matches!(bad, Err(Error::Unsupported(_))));
    }

    #[test]
    fn time_change_moves_events_by_the_inverse() {
        let path = Path::new(
            vec![0.0],
            vec![Event { t: 0.25, j: 0 }, Event { t: 0.8, j: 1 }],
        )
        .unwrap();
        let u = TimeChange::exp_warp(&[1.0, 0.0]).unwrap();
        let (moved, collisions) = apply_time_change(&path, &u);
        assert_eq!(collisions, 0);
        let expected = (0.25f64 * 1.0f64.exp_m1()).ln_1p();
        assert_relative_eq!(moved.events()[0].t, expected, max_relative = 1e-12);
        assert_eq!(moved.events()[1].t, 0.8);
        assert_eq!(
            moved.counting_vector(1.0, 2),
            path.counting_vector(1.0, 2)
        );

        let (same, _) = apply_time_change(&path, &TimeChange::identity(2));
        assert_eq!(same, path);
    }

    #[test]
    fn exact_collisions_are_counted_and_type_ordered() {
        let u = TimeChange::exp_warp(&[1.0, 0.0]).unwrap();
        // An event placed at u(0.4) maps back to exactly 0.4, colliding with
        // a type-2 event fixed at 0.4.
        let path = Path::new(
            vec![0.0],
            vec![
                Event { t: u.eval(0, 0.4), j: 0 },
                Event { t: 0.4, j: 1 },
            ],
        )
        .unwrap();
        let (moved, collisions) = apply_time_change(&path, &u);
        assert_eq!(collisions, 1);
        assert_eq!(moved.events()[0].j, 0);
        assert_eq!(moved.events()[1].j, 1);
        assert_eq!(moved.events()[0].t, moved.events()[1].t);
    }

    #[test]
    fn density_closed_forms() {
        let rates = RateFunction::homogeneous(&[1.0, 2.0]).unwrap();
        let u = TimeChange::exp_warp(&[1.0, 0.0]).unwrap();
        let empty = Path::new(vec![0.0], vec![]).unwrap();
        assert_eq!(
            time_change_density(&empty, &u, &rates, DensityReading::Girsanov),
            1.0
        );

        // Constant rates make the time factor 1; what remains is
        // u'(0.3) = a e^{a 0.3}/(e^a - 1) at a = 1.
        let one = Path::new(vec![0.0], vec![Event { t: 0.3, j: 0 }]).unwrap();
        let expect = (0.3f64).exp() / 1.0f64.exp_m1();
        assert_relative_eq!(
            time_change_density(&one, &u, &rates, DensityReading::Girsanov),
            expect,
            max_relative = 1e-12
        );
        // Constant rates: the exponent-form density collapses to 1.
        assert_eq!(
            time_change_density(&one, &u, &rates, DensityReading::Literal),
            1.0
        );

        let ident = TimeChange::identity(2);
        assert_eq!(
            time_change_density(&one, &ident, &rates, DensityReading::Girsanov),
            1.0
        );
    }

    #[test]
    fn girsanov_density_integrates_to_one() {
        let rates = ramp_rates();
        let u = TimeChange::exp_warp(&[0.7, -0.5]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let n = 100_000;
        let mut acc = crate::stats::RunningMoments::new();
        for _ in 0..n {
            let p = sample_cpp(&[0.0], &rates, &mut rng);
            acc.push(time_change_density(&p, &u, &rates, DensityReading::Girsanov));
        }
        let z = (acc.mean() - 1.0).abs() / acc.standard_error();
        assert!(z < 4.0, "mean {} z {z}", acc.mean());
    }

    #[test]
    fn cycles_must_close() {
        let m = pm1();
        let c = Cycle::new(&m, vec![1, 0]).unwrap();
        assert_eq!(c.count_vector(), &[1, 1]);
        assert_eq!(c.len(), 2);
        assert!(Cycle::new(&m, vec![1, 1]).is_err());
        assert!(Cycle::new(&m, vec![]).is_err());
        assert!(Cycle::new(&m, vec![5]).is_err());
    }

    #[test]
    fn trace_and_cycle_hits_follow_order() {
        let m = pm1();
        let c_up_down = Cycle::new(&m, vec![1, 0]).unwrap();
        // +1 at 0.3, -1 at 0.5.
        let path = Path::new(
            vec![0.0],
            vec![Event { t: 0.3, j: 1 }, Event { t: 0.5, j: 0 }],
        )
        .unwrap();
        assert!(cycle_hit(&path, 0.2, 0.4, &c_up_down));
        // Reversed order misses.
        let c_down_up = Cycle::new(&m, vec![0, 1]).unwrap();
        assert!(!cycle_hit(&path, 0.2, 0.4, &c_down_up));
        // Window containing only one of the events misses.
        assert!(!cycle_hit(&path, 0.2, 0.2, &c_up_down));
        // Empty window: trace is just the origin, nonempty cycles miss.
        assert_eq!(trace(&path, &m, 0.6, 0.2).unwrap(), vec![vec![0.0]]);
        assert!(!cycle_hit(&path, 0.6, 0.2, &c_up_down));
        // Full window trace: 0, +1, 0.
        assert_eq!(
            trace(&path, &m, 0.0, 1.0).unwrap(),
            vec![vec![0.0], vec![1.0], vec![0.0]]
        );
        assert!(trace(&path, &m, 0.9, 0.2).is_err());
    }

    #[test]
    fn paths_roundtrip_through_json() {
        let path = Path::new(
            vec![0.5, -1.0],
            vec![Event { t: 0.25, j: 0 }, Event { t: 0.75, j: 2 }],
        )
        .unwrap();
        let s = path.to_json_string();
        assert!(s.contains("\"j\":1") && s.contains("\"j\":3"));
        let back = Path::from_json_str(&s).unwrap();
        assert_eq!(back, path);
        assert!(Path::from_json_str(r#"{"x0":[0.0],"events":[{"t":0.5,"j":0}]}"#).is_err());
        assert!(Path::from_json_str(r#"{"x0":[0.0],"events":[{"t":1.5,"j":1}]}"#).is_err());
    }

    #[test]
    fn terminal_position_tracks_counts() {
        let m = pm1();
        let path = Path::new(
            vec![0.25],
            vec![
                Event { t: 0.1, j: 1 },
                Event { t: 0.2, j: 1 },
                Event { t: 0.9, j: 0 },
            ],
        )
        .unwrap();
        assert_eq!(path.terminal(&m).unwrap(), vec![1.25]);
    }
}
