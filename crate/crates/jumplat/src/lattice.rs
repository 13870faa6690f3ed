//! Integer-lattice analysis of jump-count vectors.
//!
//! The central object is the integer kernel of the jump matrix: the set of
//! integer vectors c with `A c = 0`. Differences of two jump-count vectors
//! with the same endpoint displacement lie exactly in this kernel, so its
//! basis (computed here by exact elimination), membership tests, and the
//! enumeration of fibers (all nonnegative count vectors sharing a
//! displacement) drive everything downstream: fiber graphs, bridge
//! distributions, and the shift identities.
//!
//! All arithmetic is arbitrary precision; no float ever enters a kernel or
//! membership decision.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::JumpModel;

/// Hard cap on direct box scans and on enumeration work/results.
const ENUMERATION_CAP: u64 = 20_000_000;

/// An exact integer vector in jump-count coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeVector(Vec<BigInt>);

impl LatticeVector {
    pub fn new(coords: Vec<BigInt>) -> Self {
        LatticeVector(coords)
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    /// i64 view when every coordinate fits.
    pub fn to_i64(&self) -> Option<Vec<i64>> {
        self.0.iter().map(ToPrimitive::to_i64).collect()
    }
}

impl From<Vec<i64>> for LatticeVector {
    fn from(v: Vec<i64>) -> Self {
        LatticeVector(v.into_iter().map(BigInt::from).collect())
    }
}

impl From<Vec<BigInt>> for LatticeVector {
    fn from(v: Vec<BigInt>) -> Self {
        LatticeVector(v)
    }
}

impl std::ops::Neg for &LatticeVector {
    type Output = LatticeVector;
    fn neg(self) -> LatticeVector {
        LatticeVector(self.0.iter().map(|c| -c).collect())
    }
}

impl std::ops::Index<usize> for LatticeVector {
    type Output = BigInt;
    fn index(&self, i: usize) -> &BigInt {
        &self.0[i]
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// JSON form of one coordinate: a plain integer when it fits in i64, a
/// decimal string otherwise.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoordRepr {
    Small(i64),
    Big(String),
}

impl Serialize for LatticeVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr: Vec<CoordRepr> = self
            .0
            .iter()
            .map(|c| match c.to_i64() {
                Some(v) => CoordRepr::Small(v),
                None => CoordRepr::Big(c.to_string()),
            })
            .collect();
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = Vec::<CoordRepr>::deserialize(d)?;
        let coords = repr
            .into_iter()
            .map(|r| match r {
                CoordRepr::Small(v) => Ok(BigInt::from(v)),
                CoordRepr::Big(s) => BigInt::from_str(&s)
                    .map_err(|e| serde::de::Error::custom(format!("bad integer {s:?}: {e}"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(LatticeVector(coords))
    }
}

/// Row-style Hermite normal form by exact integer elimination.
///
/// Returns the nonzero reduced rows and their pivot columns. Pivots are
/// positive, strictly right-down ordered, entries below a pivot are zero and
/// entries above it are reduced into `[0, pivot)`, so the output is a
/// canonical representation of the row space.
pub(crate) fn hnf_rows(mut rows: Vec<Vec<BigInt>>) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let n = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == n {
            break;
        }
        if (r..n).all(|i| rows[i][col].is_zero()) {
            continue;
        }
        // Euclidean elimination below position r in this column.
        loop {
            let best = (r..n)
                .filter(|&i| !rows[i][col].is_zero())
                .min_by_key(|&i| rows[i][col].abs())
                .expect("a nonzero entry exists");
            rows.swap(r, best);
            let mut clean = true;
            for i in r + 1..n {
                if rows[i][col].is_zero() {
                    continue;
                }
                let q = rows[i][col].div_floor(&rows[r][col]);
                for c in 0..ncols {
                    let delta = &q * &rows[r][c];
                    rows[i][c] -= delta;
                }
                if !rows[i][col].is_zero() {
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }
        if rows[r][col].is_negative() {
            for c in 0..ncols {
                rows[r][c] = -std::mem::take(&mut rows[r][c]);
            }
        }
        // Reduce the entries above the pivot into [0, pivot).
        for i in 0..r {
            if rows[i][col].is_zero() {
                continue;
            }
            let q = rows[i][col].div_floor(&rows[r][col]);
            if q.is_zero() {
                continue;
            }
            for c in 0..ncols {
                let delta = &q * &rows[r][c];
                rows[i][c] -= delta;
            }
        }
        pivots.push(col);
        r += 1;
    }
    rows.truncate(r);
    (rows, pivots)
}

/// A list of kernel vectors kept verbatim, with a cached canonical echelon
/// form for exact membership and coefficient queries.
///
/// The vectors are required to be linearly independent; generating sets that
/// may be dependent are handled as plain vector slices elsewhere.
#[derive(Debug, Clone)]
pub struct LatticeBasis {
    n_coords: usize,
    vectors: Vec<LatticeVector>,
    /// Canonical HNF rows of the vector matrix.
    echelon: Vec<Vec<BigInt>>,
    /// Coefficients expressing each echelon row in the original vectors.
    echelon_coeffs: Vec<Vec<BigInt>>,
    pivots: Vec<usize>,
}

impl LatticeBasis {
    /// Build a basis from independent vectors of the given length. The
    /// vectors are stored exactly as supplied.
    pub fn from_vectors(n_coords: usize, vectors: Vec<LatticeVector>) -> Result<Self> {
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != n_coords {
                return Err(Error::InvalidInput(format!(
                    "basis vector {} has length {}, expected {n_coords}",
                    i + 1,
                    v.len()
                )));
            }
        }
        let k = vectors.len();
        // Reduce [V | I_k]; a row whose left part vanishes is a dependency.
        let rows: Vec<Vec<BigInt>> = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut row: Vec<BigInt> = v.coords().to_vec();
                row.extend((0..k).map(|j| BigInt::from(u8::from(j == i))));
                row
            })
            .collect();
        let (reduced, _) = hnf_rows(rows);
        let mut echelon = Vec::new();
        let mut echelon_coeffs = Vec::new();
        for row in &reduced {
            if row[..n_coords].iter().all(Zero::is_zero) {
                return Err(Error::InvalidInput(
                    "basis vectors are linearly dependent".into(),
                ));
            }
            echelon.push(row[..n_coords].to_vec());
            echelon_coeffs.push(row[n_coords..].to_vec());
        }
        let pivots = echelon
            .iter()
            .map(|row| row.iter().position(|e| !e.is_zero()).expect("nonzero row"))
            .collect();
        Ok(LatticeBasis {
            n_coords,
            vectors,
            echelon,
            echelon_coeffs,
            pivots,
        })
    }

    pub fn vectors(&self) -> &[LatticeVector] {
        &self.vectors
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn n_coords(&self) -> usize {
        self.n_coords
    }

    /// Integer coefficients expressing `v` in the stored vectors, or None
    /// when `v` is not in the spanned lattice.
    pub fn coefficients_of(&self, v: &LatticeVector) -> Option<Vec<BigInt>> {
        if v.len() != self.n_coords {
            return None;
        }
        let mut res: Vec<BigInt> = v.coords().to_vec();
        let mut coeffs = vec![BigInt::from(0); self.vectors.len()];
        for (row, (crow, &p)) in self
            .echelon
            .iter()
            .zip(self.echelon_coeffs.iter().zip(&self.pivots))
        {
            if res[p].is_zero() {
                continue;
            }
            let (q, rem) = res[p].div_mod_floor(&row[p]);
            if !rem.is_zero() {
                return None;
            }
            for c in 0..self.n_coords {
                let delta = &q * &row[c];
                res[c] -= delta;
            }
            for (acc, coef) in coeffs.iter_mut().zip(crow) {
                *acc += &q * coef;
            }
        }
        if res.iter().all(Zero::is_zero) {
            Some(coeffs)
        } else {
            None
        }
    }

    /// Canonical representative of the coset `v + lattice`: reduce each pivot
    /// coordinate into `[0, pivot)` in pivot order. Two vectors get the same
    /// key exactly when their difference lies in the lattice.
    pub fn coset_key(&self, v: &LatticeVector) -> Vec<BigInt> {
        debug_assert_eq!(v.len(), self.n_coords);
        let mut res: Vec<BigInt> = v.coords().to_vec();
        for (row, &p) in self.echelon.iter().zip(&self.pivots) {
            let q = res[p].div_floor(&row[p]);
            if q.is_zero() {
                continue;
            }
            for c in 0..self.n_coords {
                let delta = &q * &row[c];
                res[c] -= delta;
            }
        }
        res
    }
}

/// Exact membership of `v` in the lattice spanned by `basis`.
pub fn in_lattice(basis: &LatticeBasis, v: &LatticeVector) -> Result<bool> {
    if v.len() != basis.n_coords() {
        return Err(Error::InvalidInput(format!(
            "vector length {} does not match basis coordinate count {}",
            v.len(),
            basis.n_coords()
        )));
    }
    Ok(basis.coefficients_of(v).is_some())
}

/// Exact test `A v = 0`, evaluated on the integerized layer rows.
pub fn in_kernel(model: &JumpModel, v: &LatticeVector) -> Result<bool> {
    if v.len() != model.n_jumps() {
        return Err(Error::InvalidInput(format!(
            "vector length {} does not match jump count {}",
            v.len(),
            model.n_jumps()
        )));
    }
    if let (Some(rows), Some(vi)) = (model.stacked_rows_i64(), v.to_i64()) {
        if let Some(ok) = in_kernel_i64(rows, &vi) {
            return Ok(ok);
        }
    }
    Ok(model.stacked_rows().iter().all(|row| {
        row.iter()
            .zip(v.coords())
            .fold(BigInt::from(0), |acc, (a, b)| acc + a * b)
            .is_zero()
    }))
}

/// i128 fast path; None when an accumulation would overflow.
fn in_kernel_i64(rows: &[Vec<i64>], v: &[i64]) -> Option<bool> {
    for row in rows {
        let mut acc: i128 = 0;
        for (&a, &b) in row.iter().zip(v) {
            acc = acc.checked_add(a as i128 * b as i128)?;
        }
        if acc != 0 {
            return Some(false);
        }
    }
    Some(true)
}

/// Canonical basis of the integer kernel `{c : A c = 0}`.
///
/// Reduces the augmented matrix `[Mᵀ | I]` (M = integerized layer rows) to
/// Hermite form; rows whose left part vanishes carry, in their right part, an
/// integer combination of columns summing to zero — a kernel vector. The
/// extracted vectors are re-canonicalized on their own, so the output is
/// deterministic and comparable across runs.
pub fn kernel_basis(model: &JumpModel) -> LatticeBasis {
    let stacked = model.stacked_rows();
    let n_rows = stacked.len();
    let a = model.n_jumps();
    let rows: Vec<Vec<BigInt>> = (0..a)
        .map(|j| {
            let mut row: Vec<BigInt> = stacked.iter().map(|r| r[j].clone()).collect();
            row.extend((0..a).map(|i| BigInt::from(u8::from(i == j))));
            row
        })
        .collect();
    let (reduced, _) = hnf_rows(rows);
    let kernel_rows: Vec<Vec<BigInt>> = reduced
        .into_iter()
        .filter(|row| row[..n_rows].iter().all(Zero::is_zero))
        .map(|row| row[n_rows..].to_vec())
        .collect();
    let (canonical, _) = hnf_rows(kernel_rows);
    let vectors: Vec<LatticeVector> = canonical.into_iter().map(LatticeVector::from).collect();
    debug_assert!(vectors
        .iter()
        .all(|v| in_kernel(model, v).expect("length matches")));
    LatticeBasis::from_vectors(a, vectors).expect("extracted kernel rows are independent")
}

/// Componentwise box bounds implied by a conserved strictly positive linear
/// functional, when one of the integerized layer rows (up to sign) is
/// strictly positive. Such a row r satisfies r·m = r·n0 on the whole fiber,
/// which bounds every coordinate; fibers are finite in that case.
pub fn natural_box(model: &JumpModel, n0: &[i64]) -> Result<Vec<i64>> {
    validate_point(model, n0)?;
    let row = model
        .stacked_rows()
        .iter()
        .find_map(|r| {
            if r.iter().all(Signed::is_positive) {
                Some(r.clone())
            } else if r.iter().all(Signed::is_negative) {
                Some(r.iter().map(|e| -e).collect())
            } else {
                None
            }
        })
        .ok_or_else(|| {
            Error::Unsupported(
                "no strictly positive conserved functional: fibers may be infinite; supply an explicit box".into(),
            )
        })?;
    let total: BigInt = row
        .iter()
        .zip(n0)
        .map(|(r, &c)| r * BigInt::from(c))
        .sum();
    row.iter()
        .map(|r| {
            (&total / r).to_i64().ok_or_else(|| {
                Error::ResourceLimit("natural box bound exceeds i64 range".into())
            })
        })
        .collect()
}

fn validate_point(model: &JumpModel, n0: &[i64]) -> Result<()> {
    if n0.len() != model.n_jumps() {
        return Err(Error::InvalidInput(format!(
            "count vector has length {}, expected {}",
            n0.len(),
            model.n_jumps()
        )));
    }
    if n0.iter().any(|&c| c < 0) {
        return Err(Error::InvalidInput(
            "count vector has a negative coordinate".into(),
        ));
    }
    Ok(())
}

/// All nonnegative integer vectors in `[0, box]` whose difference from `n0`
/// lies in the kernel — the fiber of `n0` restricted to the box. Sorted
/// lexicographically; always contains `n0`.
///
/// Small boxes are scanned directly; larger ones are enumerated through
/// kernel-basis coefficients, whose Hermite structure yields exact per-level
/// bounds from the pivot coordinates. Work beyond the hard cap is refused
/// with a resource error.
pub fn fiber_points(model: &JumpModel, n0: &[i64], bounds: &[i64]) -> Result<Vec<Vec<i64>>> {
    validate_point(model, n0)?;
    if bounds.len() != n0.len() {
        return Err(Error::InvalidInput(format!(
            "box has length {}, expected {}",
            bounds.len(),
            n0.len()
        )));
    }
    if n0.iter().zip(bounds).any(|(&c, &b)| c > b) {
        return Err(Error::InvalidInput(
            "n0 lies outside the supplied box".into(),
        ));
    }
    let volume: u128 = bounds
        .iter()
        .map(|&b| (b as u128) + 1)
        .try_fold(1u128, u128::checked_mul)
        .unwrap_or(u128::MAX);
    let mut points = if volume <= ENUMERATION_CAP as u128 {
        scan_box(model, n0, bounds)
    } else {
        enumerate_by_coefficients(model, n0, bounds)
    }?;
    points.sort_unstable();
    Ok(points)
}

/// Direct scan: walk the box odometer-style and keep points with the same
/// layer-row sums as n0.
fn scan_box(model: &JumpModel, n0: &[i64], bounds: &[i64]) -> Result<Vec<Vec<i64>>> {
    let a = n0.len();
    if let Some(rows) = model.stacked_rows_i64() {
        // i128 accumulators: |row · point| ≤ Σ|row_j|·box_j fits easily.
        let rhs: Vec<i128> = rows
            .iter()
            .map(|row| row.iter().zip(n0).map(|(&r, &c)| r as i128 * c as i128).sum())
            .collect();
        let mut out = Vec::new();
        let mut m = vec![0i64; a];
        loop {
            let hit = rows.iter().zip(&rhs).all(|(row, &want)| {
                row.iter()
                    .zip(&m)
                    .map(|(&r, &c)| r as i128 * c as i128)
                    .sum::<i128>()
                    == want
            });
            if hit {
                out.push(m.clone());
            }
            // Odometer increment.
            let mut i = 0;
            loop {
                if i == a {
                    return Ok(out);
                }
                if m[i] < bounds[i] {
                    m[i] += 1;
                    break;
                }
                m[i] = 0;
                i += 1;
            }
        }
    }
    // Arbitrary-precision fallback for models with huge integerized entries.
    let rows = model.stacked_rows();
    let rhs: Vec<BigInt> = rows
        .iter()
        .map(|row| row.iter().zip(n0).map(|(r, &c)| r * BigInt::from(c)).sum())
        .collect();
    let mut out = Vec::new();
    let mut m = vec![0i64; a];
    loop {
        let hit = rows.iter().zip(&rhs).all(|(row, want)| {
            &row.iter()
                .zip(&m)
                .map(|(r, &c)| r * BigInt::from(c))
                .sum::<BigInt>()
                == want
        });
        if hit {
            out.push(m.clone());
        }
        let mut i = 0;
        loop {
            if i == a {
                return Ok(out);
            }
            if m[i] < bounds[i] {
                m[i] += 1;
                break;
            }
            m[i] = 0;
            i += 1;
        }
    }
}

/// Coefficient enumeration: every fiber point is `n0 + Σ z_i e_i` for the
/// canonical echelon rows e_i of the kernel basis. Because row i is the only
/// one with a nonzero entry at its pivot column among rows ≥ i, fixing
/// z_1..z_{i-1} pins an exact interval for z_i from the box constraint at
/// pivot i; leaves are checked against the full box.
fn enumerate_by_coefficients(
    model: &JumpModel,
    n0: &[i64],
    bounds: &[i64],
) -> Result<Vec<Vec<i64>>> {
    let basis = kernel_basis(model);
    let rows = &basis.echelon;
    let pivots = &basis.pivots;
    let mut partial: Vec<BigInt> = n0.iter().map(|&c| BigInt::from(c)).collect();
    let mut out: Vec<Vec<i64>> = Vec::new();
    let mut nodes: u64 = 0;
    fn recurse(
        level: usize,
        rows: &[Vec<BigInt>],
        pivots: &[usize],
        bounds: &[i64],
        partial: &mut Vec<BigInt>,
        out: &mut Vec<Vec<i64>>,
        nodes: &mut u64,
    ) -> Result<()> {
        *nodes += 1;
        if *nodes > ENUMERATION_CAP {
            return Err(Error::ResourceLimit(format!(
                "fiber enumeration exceeded {ENUMERATION_CAP} nodes; supply a smaller box"
            )));
        }
        if level == rows.len() {
            if partial
                .iter()
                .zip(bounds)
                .all(|(c, &b)| !c.is_negative() && *c <= BigInt::from(b))
            {
                let point: Vec<i64> = partial
                    .iter()
                    .map(|c| c.to_i64().expect("within i64 box"))
                    .collect();
                out.push(point);
                if out.len() as u64 > ENUMERATION_CAP {
                    return Err(Error::ResourceLimit(format!(
                        "fiber has more than {ENUMERATION_CAP} points in the box"
                    )));
                }
            }
            return Ok(());
        }
        let p = pivots[level];
        let d = &rows[level][p]; // positive by canonical form
        // 0 ≤ partial[p] + z·d ≤ bounds[p]  ⇒  exact z-interval.
        let lo = (-&partial[p]).div_ceil(d);
        let hi = (BigInt::from(bounds[p]) - &partial[p]).div_floor(d);
        let mut z = lo.clone();
        while z <= hi {
            if !z.is_zero() {
                for (acc, e) in partial.iter_mut().zip(&rows[level]) {
                    *acc += &z * e;
                }
            }
            recurse(level + 1, rows, pivots, bounds, partial, out, nodes)?;
            if !z.is_zero() {
                for (acc, e) in partial.iter_mut().zip(&rows[level]) {
                    *acc -= &z * e;
                }
            }
            z += 1;
        }
        Ok(())
    }
    recurse(0, rows, pivots, bounds, &mut partial, &mut out, &mut nodes)?;
    Ok(out)
}

/// Exact falling-factorial shift density: `Π_j n_j!/(n_j−c_j)!`, zero when
/// some `n_j < c_j`. This is the density relating a count distribution to its
/// c-shift; negative `c_j` contribute reciprocal rising factorials.
pub fn shift_density(c: &LatticeVector, n: &[i64]) -> BigRational {
    assert_eq!(c.len(), n.len(), "shift and count vector lengths differ");
    let mut numer = BigInt::from(1);
    let mut denom = BigInt::from(1);
    for (cj, &nj) in c.coords().iter().zip(n) {
        let nj = BigInt::from(nj);
        if cj.is_positive() {
            if nj < *cj {
                return BigRational::from_integer(BigInt::from(0));
            }
            // n (n−1) ⋯ (n−c+1)
            let mut f = nj.clone();
            let stop = &nj - cj;
            while f > stop {
                numer *= &f;
                f -= 1;
            }
        } else if cj.is_negative() {
            // 1 / ((n+1)(n+2)⋯(n−c))
            let mut f = &nj + 1;
            let stop = &nj - cj;
            while f <= stop {
                denom *= &f;
                f += 1;
            }
        }
    }
    BigRational::new(numer, denom)
}

/// Float value of the shift density, for statistical comparisons.
pub fn shift_density_f64(c: &LatticeVector, n: &[i64]) -> f64 {
    let r = shift_density(c, n);
    r.numer().to_f64().unwrap_or(f64::INFINITY) / r.denom().to_f64().unwrap_or(f64::INFINITY)
}
