//! End-to-end acceptance suite.
//!
//! Each test checks one pinned criterion against frozen expected values and
//! prints a single `[PASS]`/`[FAIL]` line (visible with `--nocapture`, and in
//! the captured output of any failing test). Expected values come from
//! independent oracles: exact enumeration, closed-form series evaluated in the
//! test body, or hand-checked integer arithmetic. Tolerances are pinned here
//! and nowhere else.
//!
//! Monte Carlo criteria use fixed seeds; the asserted bands (4 sigma unless
//! stated) make them robust to the choice, and the seeds are part of the
//! pinned expectations.

use jumplat::bridge::{
    cycle_asymptotics_estimate, cycle_prob_exact, same_class, BridgeSampler, EndpointMixture,
    PathSource,
};
use jumplat::fiber::build_fiber_graph;
use jumplat::lattice::{fiber_points, in_kernel, in_lattice, kernel_basis, natural_box, LatticeVector};
use jumplat::model::JumpModel;
use jumplat::poisson::{counterexample_345, pois_pmf, truncate_pois, check_shift_identity};
use jumplat::process::{Cycle, DensityReading, RateFunction, TimeChange};
use jumplat::stats::chi_square_gof;
use jumplat::verify::{
    replicate_rng, verify_ctdns, verify_shift_n1, verify_time_change, CtdnsFactor, ShiftSource,
};

fn lv(coords: &[i64]) -> LatticeVector {
    LatticeVector::from(coords.to_vec())
}

fn model_1d(entries: &[i64]) -> JumpModel {
    let columns: Vec<Vec<i64>> = entries.iter().map(|&e| vec![e]).collect();
    JumpModel::from_integer_columns(1, columns).expect("valid one-dimensional model")
}

fn hexagon_model() -> JumpModel {
    let json = include_str!("fixtures/model-hexagon.json");
    JumpModel::from_json_str(json).expect("hexagon fixture parses")
}

/// Print the per-criterion verdict line, then enforce it.
fn report(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    eprintln!("[{tag}] {name}: {detail}");
    assert!(pass, "{name}: {detail}");
}

#[test]
fn a01_kernel_exactness() {
    // {-1,1}: kernel is the diagonal.
    let pm1 = model_1d(&[-1, 1]);
    let b_pm1 = kernel_basis(&pm1);
    let ok_pm1 = b_pm1.vectors() == [lv(&[1, 1])];

    // Single jump type: injective column map, trivial kernel.
    let single = model_1d(&[1]);
    let ok_single = kernel_basis(&single).rank() == 0;

    // {3,4,5}: rank 2; f, g, h from the two-vertex construction are members.
    let m345 = model_1d(&[3, 4, 5]);
    let b345 = kernel_basis(&m345);
    let members = [lv(&[-3, 1, 1]), lv(&[1, -2, 1]), lv(&[2, 1, -2])];
    let ok_345 = b345.rank() == 2
        && members
            .iter()
            .all(|v| in_lattice(&b345, v).unwrap());

    // Hexagon (layers over {1, sqrt3}): computed lattice equals the lattice
    // generated by the four reference combinations (mutual membership).
    let hex = hexagon_model();
    let b_hex = kernel_basis(&hex);
    let four = [
        lv(&[1, 0, 0, 1, 0, 0]),
        lv(&[0, 1, 0, 0, 1, 0]),
        lv(&[1, 0, 1, 0, 1, 0]),
        lv(&[0, 1, 0, 1, 0, 1]),
    ];
    let b_four = jumplat::lattice::LatticeBasis::from_vectors(6, four.to_vec()).unwrap();
    let ok_hex = b_hex.rank() == 4
        && four.iter().all(|v| in_lattice(&b_hex, v).unwrap())
        && b_hex
            .vectors()
            .iter()
            .all(|v| in_lattice(&b_four, v).unwrap())
        && b_hex.vectors().iter().all(|v| in_kernel(&hex, v).unwrap());

    let pass = ok_pm1 && ok_single && ok_345 && ok_hex;
    report(
        "a01 kernel exactness",
        pass,
        &format!(
            "pm1 basis {:?} ok={ok_pm1}; single rank0 ok={ok_single}; 345 rank {} members ok={ok_345}; hexagon rank {} equality ok={ok_hex}",
            b_pm1.vectors(),
            b345.rank(),
            b_hex.rank()
        ),
    );
}

#[test]
fn a02_fiber_graph_reference_components() {
    // Stated expectation: the generator pair {(2,-4,2),(0,-5,4)} on the fiber
    // of (6,1,2) gives exactly 3 components, and adding (4,-3,0) connects it.
    //
    // Independent enumeration of {n >= 0 : 3n1+4n2+5n3 = 32} gives 12 points,
    // 5 components under the pair, and 2 after adding (4,-3,0). Connectivity
    // is impossible for any vertex box: all three generators have even first
    // coordinate (they span an index-2 sublattice of the kernel, which
    // contains odd vectors such as (1,3,-3)), so no sequence of moves links
    // the even- and odd-n1 parts of the fiber. The assertions below state the
    // expectation as given; the printed actuals document the discrepancy.
    let m345 = model_1d(&[3, 4, 5]);
    let n0 = [6i64, 1, 2];
    let bounds = natural_box(&m345, &n0).expect("positive row gives a finite box");

    let gamma = vec![lv(&[2, -4, 2]), lv(&[0, -5, 4])];
    let g1 = build_fiber_graph(&m345, &n0, &gamma, &bounds).unwrap();
    let comps1 = g1.component_count();

    let mut gamma_aug = gamma.clone();
    gamma_aug.push(lv(&[4, -3, 0]));
    let g2 = build_fiber_graph(&m345, &n0, &gamma_aug, &bounds).unwrap();
    let comps2 = g2.component_count();

    let pass = comps1 == 3 && comps2 == 1;
    report(
        "a02 fiber graph reference components",
        pass,
        &format!(
            "expected 3 then 1 components; got {} then {} on the full {}-point fiber \
             (even-n1 parity of all three generators makes full connectivity unreachable)",
            comps1,
            comps2,
            g1.vertices().len()
        ),
    );
}

#[test]
fn a03_contaminated_mixture_counterexample() {
    // eps = 0.3, lambda = (1,1,1): every shift residual for +-basis stays
    // below 1e-10 while the fiber-ratio spread jumps to eps / p_lambda(n_v).
    let eps = 0.3;
    let lambda = [1.0, 1.0, 1.0];
    let rep = counterexample_345(eps, lambda).unwrap();

    let shifts_ok = rep
        .shift_reports
        .iter()
        .all(|r| r.max_residual < 1e-10);

    // Oracle: p_lambda((3,0,0)) = e^{-3}/3! for unit rates.
    let p_nv = pois_pmf(&lambda, &[3, 0, 0]);
    let expected_spread = eps / p_nv;
    let spread_ok = rep.membership.max_spread >= 0.9 * expected_spread;
    let member_rejected = !rep.membership.member;

    let feasible_ok = rep.feasible == vec![vec![0i64, 0, 0], vec![-3, 1, 1]];

    let pass = shifts_ok && spread_ok && member_rejected && feasible_ok && rep.expected_pattern;
    report(
        "a03 contaminated mixture counterexample",
        pass,
        &format!(
            "max shift residual {:.3e} (<1e-10: {shifts_ok}); spread {:.4} vs 0.9*{:.4} ok={spread_ok}; \
             membership rejected={member_rejected}; feasible moves {:?} ok={feasible_ok}",
            rep.shift_reports
                .iter()
                .map(|r| r.max_residual)
                .fold(0.0f64, f64::max),
            rep.membership.max_spread,
            expected_spread,
            rep.feasible
        ),
    );
}

#[test]
fn a04_poisson_shift_enumeration() {
    // lambda = (0.5, 1.5), truncation 1e-12: the shift identity holds to
    // 1e-10 for unit shifts, the diagonal, a mixed-sign shift and a double
    // shift. Oracle is the identity itself on an exactly-enumerated box.
    let lambda = [0.5, 1.5];
    let rho = truncate_pois(&lambda, 1e-12).unwrap();
    let shifts = [
        lv(&[1, 0]),
        lv(&[0, 1]),
        lv(&[1, 1]),
        lv(&[1, -1]),
        lv(&[2, 2]),
    ];
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for c in &shifts {
        let r = check_shift_identity(&rho, &lambda, c);
        detail.push_str(&format!("{c}: {:.3e} ({} pts); ", r.max_residual, r.points_checked));
        worst = worst.max(r.max_residual);
    }
    let pass = worst < 1e-10;
    report(
        "a04 poisson shift enumeration",
        pass,
        &format!("max residual {worst:.3e} < 1e-10; {detail}"),
    );
}

#[test]
fn a05_time_change_duality_mc() {
    // Homogeneous nu=(1,2), exp-warp(a=1) on type 1, n=1e6, z_crit=4.
    // The product-form density (with the derivative factor at each jump) must
    // pass all four functionals; the exponent-form reading must fail F3 with
    // z > 10 (for homogeneous rates that density is identically 1 while the
    // transformation moves jump times).
    let rates = RateFunction::homogeneous(&[1.0, 2.0]).unwrap();
    let tc = TimeChange::exp_warp(&[1.0, 0.0]).unwrap();
    let n = 1_000_000u64;
    let n_star = [1i64, 2];

    let girsanov = verify_time_change(
        &rates,
        &tc,
        &n_star,
        n,
        305,
        4.0,
        DensityReading::Girsanov,
    );
    let all_pass = girsanov.pass;

    let literal = verify_time_change(
        &rates,
        &tc,
        &n_star,
        n,
        305,
        4.0,
        DensityReading::Literal,
    );
    let f3 = literal
        .tests
        .iter()
        .find(|t| t.name == "F3")
        .expect("F3 present");
    let discriminates = f3.z > 10.0;

    let pass = all_pass && discriminates;
    let zs: Vec<String> = girsanov
        .tests
        .iter()
        .map(|t| format!("{}={:.2}", t.name, t.z))
        .collect();
    report(
        "a05 time change duality mc",
        pass,
        &format!(
            "product-form z: {} (all<=4: {all_pass}); exponent-form F3 z={:.1} (>10: {discriminates})",
            zs.join(" "),
            f3.z
        ),
    );
}

#[test]
fn a06_bridge_sampler_correctness() {
    // A={-1,1}, lambda=(1,1), bridge 0 -> 0, n=1e5.
    let model = model_1d(&[-1, 1]);
    let rates = RateFunction::homogeneous(&[1.0, 1.0]).unwrap();
    let sampler = BridgeSampler::new(&model, &rates, &[0.0], &[0.0], 1e-12).unwrap();
    let dist = sampler.fiber_dist().clone();

    let n = 100_000u64;
    let mut exact_endpoints = 0u64;
    let mut counts: std::collections::BTreeMap<Vec<i64>, u64> = std::collections::BTreeMap::new();
    for k in 0..n {
        let mut rng = replicate_rng(306, k);
        let path = sampler.sample(&mut rng);
        let n1 = path.counting_vector(1.0, 2);
        // Endpoint exactness in integer jump-count arithmetic: the count
        // difference must vanish (columns are -1 and +1).
        if n1[1] == n1[0] {
            exact_endpoints += 1;
        }
        *counts.entry(n1).or_insert(0) += 1;
    }
    let exact_ok = exact_endpoints == n;

    // Chi-square goodness of fit against the exact conditional law.
    let support: Vec<Vec<i64>> = dist.support().cloned().collect();
    let observed: Vec<u64> = support
        .iter()
        .map(|p| counts.get(p).copied().unwrap_or(0))
        .collect();
    let expected: Vec<f64> = support.iter().map(|p| dist.prob(p) * n as f64).collect();
    let off_support: u64 = n - observed.iter().sum::<u64>();
    let chi = chi_square_gof(&observed, &expected).unwrap();
    let chi_ok = chi.p_value > 0.001 && off_support == 0;

    // P(N=(0,0)) against the truncated series oracle 1 / sum_k 1/(k!)^2.
    let mut z_series = 0.0f64;
    let mut fact = 1.0f64;
    for k in 0..40u64 {
        if k > 0 {
            fact *= k as f64;
        }
        z_series += 1.0 / (fact * fact);
    }
    let p_zero_oracle = 1.0 / z_series; // 0.4386752...
    let p_zero_hat = counts.get(&vec![0i64, 0]).copied().unwrap_or(0) as f64 / n as f64;
    let sigma = (p_zero_oracle * (1.0 - p_zero_oracle) / n as f64).sqrt();
    let zero_ok = (p_zero_hat - p_zero_oracle).abs() <= 4.0 * sigma;

    let pass = exact_ok && chi_ok && zero_ok;
    report(
        "a06 bridge sampler correctness",
        pass,
        &format!(
            "exact endpoints {exact_endpoints}/{n}; chi2 stat {:.2} dof {} p {:.4} (>0.001: {chi_ok}); \
             P(N=(0,0)) {p_zero_hat:.5} vs {p_zero_oracle:.5} |z|={:.2} (<=4: {zero_ok})",
            chi.statistic,
            chi.dof,
            (p_zero_hat - p_zero_oracle).abs() / sigma
        ),
    );
}

#[test]
fn a07_shift_identity_under_mixture_mc() {
    // Bridge mixture over {0 -> 0, 0 -> +2} with equal weights, c = (1,1),
    // n = 1e6: the paired frequency comparison must pass at z_crit = 4.
    let model = model_1d(&[-1, 1]);
    let rates = RateFunction::homogeneous(&[1.0, 2.0]).unwrap();
    let mix = EndpointMixture::new(
        &model,
        vec![
            (vec![0.0], vec![0.0], 0.5),
            (vec![0.0], vec![2.0], 0.5),
        ],
    )
    .unwrap();
    let rep = verify_shift_n1(
        &model,
        &rates,
        ShiftSource::Mixture(mix),
        &[lv(&[1, 1])],
        1_000_000,
        307,
        4.0,
    )
    .unwrap();
    report(
        "a07 shift identity under mixture mc",
        rep.pass,
        &format!(
            "worst |z| = {:.2} over {} support comparisons (z_crit 4)",
            rep.worst_z,
            rep.rows.len()
        ),
    );
}

#[test]
fn a08_fixed_time_shift_factor() {
    // nu=(1,2), t=0.5, c=(1,1). The elapsed-time factor must verify to 1e-10.
    // The complementary-time factor is asserted, as stated, to leave a
    // residual above 0.1 — at t=0.5 the two factors coincide numerically, so
    // the printed actual documents why this clause cannot hold there (the
    // mismatch is real at any t != 0.5; unit tests pin t=0.25, residual 0.42).
    let model = model_1d(&[-1, 1]);
    let rates = RateFunction::homogeneous(&[1.0, 2.0]).unwrap();
    let c = lv(&[1, 1]);

    let derived = verify_ctdns(&model, &rates, 0.5, &c, CtdnsFactor::ElapsedTime).unwrap();
    let derived_ok = derived.max_residual < 1e-10;

    let paper = verify_ctdns(&model, &rates, 0.5, &c, CtdnsFactor::ComplementaryTime).unwrap();
    let paper_flagged = paper.max_residual > 0.1;

    let pass = derived_ok && paper_flagged;
    report(
        "a08 fixed time shift factor",
        pass,
        &format!(
            "elapsed-time residual {:.3e} (<1e-10: {derived_ok}); complementary-time residual {:.3e} \
             (>0.1: {paper_flagged}; factors coincide at t=0.5 since (1-t)=t)",
            derived.max_residual, paper.max_residual
        ),
    );
}

#[test]
fn a09_cycle_window_asymptotics() {
    // nu=(1,2), cycle = (+1 then -1) i.e. type sequence (2,1).
    let model = model_1d(&[-1, 1]);
    let rates = RateFunction::homogeneous(&[1.0, 2.0]).unwrap();
    let cycle = Cycle::new(&model, vec![1, 0]).unwrap();

    // Free process at eps=0.1: estimate within 4 sigma of the closed form
    // e^{-0.3} * 0.01 * (1*2)/2! = e^{-0.3}/100.
    let exact = cycle_prob_exact(&rates, &cycle, 0.1).unwrap();
    let oracle = (-0.3f64).exp() * 0.01;
    let exact_matches = (exact - oracle).abs() < 1e-15;

    let free_rows = cycle_asymptotics_estimate(
        &model,
        &rates,
        PathSource::Free { x0: &[0.0] },
        &cycle,
        0.0,
        &[0.1],
        1_000_000,
        3091,
        4.0,
    )
    .unwrap();
    let fr = &free_rows[0];
    let sigma = (fr.p_hat * (1.0 - fr.p_hat) / fr.n as f64).sqrt();
    let free_ok = (fr.p_hat - oracle).abs() <= 4.0 * sigma;

    // Bridge 0 -> 0 across shrinking windows: the ratio to the exact
    // short-window reference decreases toward 1 and its CI covers 1 at the
    // smallest window.
    let rows = cycle_asymptotics_estimate(
        &model,
        &rates,
        PathSource::Bridge { x: &[0.0], y: &[0.0] },
        &cycle,
        0.0,
        &[0.2, 0.1, 0.05],
        2_000_000,
        3092,
        4.0,
    )
    .unwrap();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio_to_limit).collect();
    let monotone = ratios[0] > ratios[1] && ratios[1] > ratios[2] && ratios[2] > 1.0 - 0.06;
    let reference = cycle_prob_exact(&rates, &cycle, 0.05).unwrap();
    let ci_covers_one = rows[2].ci_lo <= reference && reference <= rows[2].ci_hi;

    let pass = exact_matches && free_ok && monotone && ci_covers_one;
    report(
        "a09 cycle window asymptotics",
        pass,
        &format!(
            "closed form {exact:.7} vs oracle {oracle:.7}; free p_hat {:.6} (|z|={:.2}); \
             bridge ratios {:.4}/{:.4}/{:.4} monotone={monotone}; CI at eps=0.05 covers reference: {ci_covers_one}",
            fr.p_hat,
            (fr.p_hat - oracle).abs() / sigma,
            ratios[0],
            ratios[1],
            ratios[2]
        ),
    );
}

#[test]
fn a10_same_class_decisions() {
    // {-1,1}: (1,4) vs (2,2) — same product nu^- nu^+.
    let pm1 = model_1d(&[-1, 1]);
    let r14 = RateFunction::homogeneous(&[1.0, 4.0]).unwrap();
    let r22 = RateFunction::homogeneous(&[2.0, 2.0]).unwrap();
    let same_pm1 = same_class(&pm1, &r14, &r22).unwrap().same;

    // {-1,3}: kernel (3,1)Z — invariant (nu^-)^3 nu^+: 1^3*16 = 2^3*2.
    let m13 = model_1d(&[-1, 3]);
    let r116 = RateFunction::homogeneous(&[1.0, 16.0]).unwrap();
    let same_m13 = same_class(&m13, &r116, &r22).unwrap().same;

    // Hexagon: equal rates SAME; perturbing one coordinate breaks two of the
    // four product constraints.
    let hex = hexagon_model();
    let ones = RateFunction::homogeneous(&[1.0; 6]).unwrap();
    let mut pert_vals = [1.0f64; 6];
    pert_vals[0] = 1.3;
    let pert = RateFunction::homogeneous(&pert_vals).unwrap();
    let hex_same = same_class(&hex, &ones, &ones).unwrap().same;
    let hex_diff = !same_class(&hex, &ones, &pert).unwrap().same;

    // Equivalence relation on 100 seeded random homogeneous triples on {-1,1}:
    // r2 scales r1 along the invariant direction (same class by construction),
    // r3 scales r2; expect reflexivity, symmetry and transitivity to hold, and
    // an off-family perturbation to be rejected.
    use rand::Rng;
    let mut equiv_ok = true;
    for k in 0..100u64 {
        let mut rng = replicate_rng(310, k);
        let a: f64 = rng.random_range(0.2..3.0);
        let b: f64 = rng.random_range(0.2..3.0);
        let s: f64 = rng.random_range(0.3..3.0);
        let t: f64 = rng.random_range(0.3..3.0);
        let r1 = RateFunction::homogeneous(&[a, b]).unwrap();
        let r2 = RateFunction::homogeneous(&[a * s, b / s]).unwrap();
        let r3 = RateFunction::homogeneous(&[a * s * t, b / (s * t)]).unwrap();
        let r_off = RateFunction::homogeneous(&[a * 1.1, b]).unwrap();
        let refl = same_class(&pm1, &r1, &r1).unwrap().same;
        let s12 = same_class(&pm1, &r1, &r2).unwrap().same;
        let s21 = same_class(&pm1, &r2, &r1).unwrap().same;
        let s23 = same_class(&pm1, &r2, &r3).unwrap().same;
        let s13 = same_class(&pm1, &r1, &r3).unwrap().same;
        let off = same_class(&pm1, &r1, &r_off).unwrap().same;
        if !(refl && s12 && s21 && s23 && s13 && !off) {
            equiv_ok = false;
            break;
        }
    }

    let pass = same_pm1 && same_m13 && hex_same && hex_diff && equiv_ok;
    report(
        "a10 same class decisions",
        pass,
        &format!(
            "pm1 (1,4)~(2,2): {same_pm1}; m13 (1,16)~(2,2): {same_m13}; hexagon same: {hex_same}, \
             perturbed different: {hex_diff}; equivalence on 100 triples: {equiv_ok}"
        ),
    );
}

#[test]
fn a11_report_determinism_across_threads() {
    // The same verification run with different worker counts must produce
    // byte-identical reports.
    let rates = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/rates-one-two.json");
    let warp = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/timechange-warp-first.json");
    let run = |threads: &str| {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_jumplat"))
            .args([
                "verify",
                "timechange",
                "--rates",
                rates,
                "--timechange",
                warp,
                "--n",
                "20000",
                "--seed",
                "311",
                "--threads",
                threads,
            ])
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "verify timechange failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let one = run("1");
    let four = run("4");
    let pass = one == four && !one.is_empty();
    report(
        "a11 report determinism across threads",
        pass,
        &format!(
            "stdout bytes equal across --threads 1/4: {} ({} bytes)",
            one == four,
            one.len()
        ),
    );
}
