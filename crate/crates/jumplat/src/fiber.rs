//! Graphs on fibers induced by a set of kernel moves.
//!
//! Given a candidate generating set Γ of kernel vectors, the fiber graph has
//! the fiber points (in a box) as vertices and an edge wherever two points
//! differ by ±γ for some γ ∈ Γ. A set that connects every fiber lets any
//! conditional distribution on a fiber be explored by local moves, so
//! connectivity verdicts matter — and since a box can only show a finite
//! window of a possibly infinite fiber, each verdict carries its epistemic
//! status: connectivity holds in the box, disconnection is certified by a
//! box-independent isolated vertex, or the box is simply inconclusive.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::lattice::{fiber_points, in_kernel, natural_box, LatticeBasis, LatticeVector};
use crate::model::JumpModel;

/// An edge of a fiber graph: endpoint indices into the vertex list plus the
/// move that induces it. When several moves induce the same edge, the
/// lexicographically smallest is recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiberEdge {
    pub a: usize,
    pub b: usize,
    pub generator: LatticeVector,
}

/// The graph induced by a move set on the fiber points inside a box.
#[derive(Debug, Clone)]
pub struct FiberGraph {
    vertices: Vec<Vec<i64>>,
    edges: Vec<FiberEdge>,
    components: Vec<Vec<usize>>,
}

impl FiberGraph {
    /// Fiber points, sorted lexicographically.
    pub fn vertices(&self) -> &[Vec<i64>] {
        &self.vertices
    }

    pub fn edges(&self) -> &[FiberEdge] {
        &self.edges
    }

    /// Connected components as sorted vertex-index lists, ordered by their
    /// smallest vertex.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }
}

/// Minimal union-find with path halving and union by size.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

fn validate_moves(model: &JumpModel, gamma: &[LatticeVector]) -> Result<()> {
    for g in gamma {
        if g.is_zero() {
            return Err(Error::InvalidInput(
                "move set contains the zero vector".into(),
            ));
        }
        if !in_kernel(model, g)? {
            return Err(Error::InvalidInput(format!(
                "move {g} is not in the kernel of the jump matrix"
            )));
        }
    }
    Ok(())
}

/// Build the graph induced by `gamma` on the fiber of `n0` within `bounds`.
///
/// Every move must be a nonzero kernel vector. Vertices are deduplicated
/// fiber points; an edge joins m and m' iff m' − m ∈ ±gamma.
pub fn build_fiber_graph(
    model: &JumpModel,
    n0: &[i64],
    gamma: &[LatticeVector],
    bounds: &[i64],
) -> Result<FiberGraph> {
    validate_moves(model, gamma)?;
    let vertices = fiber_points(model, n0, bounds)?;
    let index: HashMap<&[i64], usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_slice(), i))
        .collect();
    // Unordered pair -> smallest inducing move.
    let mut edge_map: BTreeMap<(usize, usize), LatticeVector> = BTreeMap::new();
    for (i, v) in vertices.iter().enumerate() {
        for g in gamma {
            let Some(target) = translate(v, g) else {
                continue;
            };
            let Some(&j) = index.get(target.as_slice()) else {
                continue;
            };
            let key = (i.min(j), i.max(j));
            let entry = edge_map.entry(key).or_insert_with(|| g.clone());
            if *g < *entry {
                *entry = g.clone();
            }
        }
    }
    let edges: Vec<FiberEdge> = edge_map
        .into_iter()
        .map(|((a, b), generator)| FiberEdge { a, b, generator })
        .collect();
    let mut uf = UnionFind::new(vertices.len());
    for e in &edges {
        uf.union(e.a, e.b);
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..vertices.len() {
        let r = uf.find(i);
        by_root.entry(r).or_default().push(i);
    }
    let mut components: Vec<Vec<usize>> = by_root.into_values().collect();
    components.sort_by_key(|c| c[0]);
    Ok(FiberGraph {
        vertices,
        edges,
        components,
    })
}

/// `v + g` in i64 coordinates, or None when a coordinate leaves i64 range.
fn translate(v: &[i64], g: &LatticeVector) -> Option<Vec<i64>> {
    v.iter()
        .zip(g.coords())
        .map(|(&a, b)| {
            let sum = BigInt::from(a) + b;
            sum.to_i64()
        })
        .collect()
}

/// Box-independent isolation proof for `n0`: true iff every move in ±gamma
/// pushes some coordinate negative, so `n0` has no neighbor in any box.
pub fn isolated_certificate(
    model: &JumpModel,
    n0: &[i64],
    gamma: &[LatticeVector],
) -> Result<bool> {
    validate_moves(model, gamma)?;
    if n0.len() != model.n_jumps() {
        return Err(Error::InvalidInput(format!(
            "count vector has length {}, expected {}",
            n0.len(),
            model.n_jumps()
        )));
    }
    for g in gamma {
        for signed in [g.clone(), -g] {
            let stays = n0
                .iter()
                .zip(signed.coords())
                .all(|(&a, b)| !(BigInt::from(a) + b).is_negative());
            if stays {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The two sufficient conditions for a basis to generate every fiber graph:
/// (i) some basis vector is componentwise strictly positive; (ii) every
/// basis vector is componentwise nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PosrayCheck {
    pub cond_i: bool,
    pub cond_ii: bool,
}

pub fn posray_check(basis: &LatticeBasis) -> PosrayCheck {
    let cond_i = basis
        .vectors()
        .iter()
        .any(|v| v.coords().iter().all(Signed::is_positive));
    let cond_ii = basis
        .vectors()
        .iter()
        .all(|v| v.coords().iter().all(|c| !c.is_negative()));
    PosrayCheck { cond_i, cond_ii }
}

/// Constructive connection certificate for condition (i): a move sequence
/// from ±basis leading from `n` to `m` through nonnegative points.
///
/// The naive walk (each basis vector applied its coefficient's worth of
/// times) may dip below zero; prepending l copies of the positive vector c̄
/// and appending l copies of −c̄, with l = ⌈|most negative intermediate
/// coordinate| / min_j c̄_j⌉, lifts the whole walk into the nonnegative
/// orthant.
pub fn connect_certificate(
    model: &JumpModel,
    basis: &LatticeBasis,
    n: &[i64],
    m: &[i64],
) -> Result<Vec<LatticeVector>> {
    let a = model.n_jumps();
    if n.len() != a || m.len() != a || basis.n_coords() != a {
        return Err(Error::InvalidInput(
            "endpoint or basis length does not match the jump count".into(),
        ));
    }
    if n.iter().chain(m).any(|&c| c < 0) {
        return Err(Error::InvalidInput("endpoints must be nonnegative".into()));
    }
    for v in basis.vectors() {
        if !in_kernel(model, v)? {
            return Err(Error::InvalidInput(format!(
                "basis vector {v} is not in the kernel"
            )));
        }
    }
    let cbar = basis
        .vectors()
        .iter()
        .find(|v| v.coords().iter().all(Signed::is_positive))
        .cloned()
        .ok_or_else(|| {
            Error::InvalidInput("basis has no componentwise-positive vector".into())
        })?;
    let diff = LatticeVector::new(
        m.iter()
            .zip(n)
            .map(|(&mi, &ni)| BigInt::from(mi) - BigInt::from(ni))
            .collect(),
    );
    let coeffs = basis.coefficients_of(&diff).ok_or_else(|| {
        Error::InvalidInput(
            "endpoints are not in the same fiber (difference outside the lattice)".into(),
        )
    })?;
    // Naive walk and its most negative intermediate coordinate.
    let mut naive: Vec<LatticeVector> = Vec::new();
    for (z, v) in coeffs.iter().zip(basis.vectors()) {
        let step = if z.is_negative() { -v } else { v.clone() };
        let mut reps = z.abs();
        while reps.is_positive() {
            naive.push(step.clone());
            reps -= 1;
        }
    }
    let mut cursor: Vec<BigInt> = n.iter().map(|&c| BigInt::from(c)).collect();
    let mut most_negative = BigInt::from(0);
    for step in &naive {
        for (acc, d) in cursor.iter_mut().zip(step.coords()) {
            *acc += d;
        }
        for c in &cursor {
            if *c < most_negative {
                most_negative = c.clone();
            }
        }
    }
    let min_cbar = cbar
        .coords()
        .iter()
        .min()
        .cloned()
        .expect("positive vector is nonempty");
    let l = if most_negative.is_negative() {
        num_integer::Integer::div_ceil(&(-&most_negative), &min_cbar)
            .to_usize()
            .ok_or_else(|| Error::ResourceLimit("certificate lift count exceeds usize".into()))?
    } else {
        0
    };
    let mut moves = Vec::with_capacity(naive.len() + 2 * l);
    moves.extend(std::iter::repeat_n(cbar.clone(), l));
    moves.extend(naive);
    moves.extend(std::iter::repeat_n(-&cbar, l));
    debug_assert!(replay_stays_nonnegative(n, m, &moves));
    Ok(moves)
}

/// Replay a move sequence from n: every intermediate stays in the
/// nonnegative orthant and the walk ends at m.
pub fn replay_stays_nonnegative(n: &[i64], m: &[i64], moves: &[LatticeVector]) -> bool {
    let mut cursor: Vec<BigInt> = n.iter().map(|&c| BigInt::from(c)).collect();
    for step in moves {
        for (acc, d) in cursor.iter_mut().zip(step.coords()) {
            *acc += d;
        }
        if cursor.iter().any(Signed::is_negative) {
            return false;
        }
    }
    cursor
        .iter()
        .zip(m)
        .all(|(c, &want)| *c == BigInt::from(want))
}

/// Epistemic status of a per-seed connectivity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FiberVerdict {
    #[serde(rename = "connected-in-box")]
    ConnectedInBox,
    #[serde(rename = "disconnected-certified")]
    DisconnectedCertified,
    #[serde(rename = "disconnected-in-box-inconclusive")]
    DisconnectedInBoxInconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedReport {
    pub seed: Vec<i64>,
    pub bounds: Vec<i64>,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_components: usize,
    /// A vertex whose isolation is certified box-independently, if any.
    pub isolated_vertex: Option<Vec<i64>>,
    pub verdict: FiberVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct GensetReport {
    pub gamma: Vec<LatticeVector>,
    pub seeds: Vec<SeedReport>,
    /// True when every seed came back connected-in-box.
    pub all_connected_in_box: bool,
}

/// Check a candidate move set on several fibers and report per-seed
/// verdicts. A missing box falls back to the natural box of each seed.
pub fn genset_box_report(
    model: &JumpModel,
    gamma: &[LatticeVector],
    seeds: &[Vec<i64>],
    bounds: Option<&[i64]>,
) -> Result<GensetReport> {
    validate_moves(model, gamma)?;
    let mut reports = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let seed_bounds = match bounds {
            Some(b) => b.to_vec(),
            None => natural_box(model, seed)?,
        };
        let graph = build_fiber_graph(model, seed, gamma, &seed_bounds)?;
        let isolated_vertex = if graph.vertices().len() >= 2 {
            graph
                .vertices()
                .iter()
                .find(|v| isolated_certificate(model, v, gamma).unwrap_or(false))
                .cloned()
        } else {
            None
        };
        let verdict = if isolated_vertex.is_some() {
            FiberVerdict::DisconnectedCertified
        } else if graph.component_count() == 1 {
            FiberVerdict::ConnectedInBox
        } else {
            FiberVerdict::DisconnectedInBoxInconclusive
        };
        reports.push(SeedReport {
            seed: seed.clone(),
            bounds: seed_bounds,
            n_vertices: graph.vertices().len(),
            n_edges: graph.edges().len(),
            n_components: graph.component_count(),
            isolated_vertex,
            verdict,
        });
    }
    let all_connected_in_box = reports
        .iter()
        .all(|r| r.verdict == FiberVerdict::ConnectedInBox);
    Ok(GensetReport {
        gamma: gamma.to_vec(),
        seeds: reports,
        all_connected_in_box,
    })
}
