//! The end-to-end verification suite.
//!
//! Twelve numbered criteria cover the exact rational identities, the seeded
//! statistical comparisons, the numeric closed forms and the determinism
//! guarantee. Each criterion reports pass/fail with a one-line detail; the
//! acceptance test and the `verify` CLI subcommand both drive this module.
//! Statistical tests run at level 1e-3 each; with a few dozen tests per
//! suite, an occasional false failure at a fresh seed is expected at the
//! per-mille scale (Bonferroni bound), and the shipped seed is fixed.

use crate::beads;
use crate::composition::Composition;
use crate::crp;
use crate::exact;
use crate::growth;
use crate::limits;
use crate::params::{rational_string, Params, Rational};
use crate::rng::RngFactory;
use crate::runner::run_replicates;
use crate::stats;
use crate::trees::{Block, LabeledBinaryTree};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

pub const DEFAULT_SEED: u64 = 20090501;
const LEVEL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

impl Suite {
    fn scale(&self, reps: u64) -> u64 {
        match self {
            Suite::Full => reps,
            Suite::Quick => (reps / 10).max(500),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Quick => "quick",
            Suite::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// Wall time; excluded from serialized reports so that report files
    /// regenerate byte-identically.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub workers: usize,
    pub all_pass: bool,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| {
                format!(
                    "criterion {:02} {:<28} {} ({:.2}s) {}",
                    c.id,
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.seconds,
                    c.detail
                )
            })
            .collect()
    }

    /// CSV summary, deterministic given the inputs (no timings).
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# suite={} seed={} level=1e-3 (per-test; dozens of tests per suite)\n",
            self.suite, self.seed
        );
        out.push_str("id,name,pass,detail\n");
        for c in &self.criteria {
            let detail = c.detail.replace('"', "'");
            out.push_str(&format!("{},{},{},\"{}\"\n", c.id, c.name, c.pass, detail));
        }
        out
    }
}

struct Ctx {
    factory: RngFactory,
    workers: usize,
    suite: Suite,
}

impl Ctx {
    fn base(&self, criterion: u32) -> u64 {
        (criterion as u64) << 32
    }
}

fn report(id: u32, name: &str, start: Instant, pass: bool, detail: String) -> CriterionReport {
    CriterionReport {
        id,
        name: name.to_string(),
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_suite(suite: Suite, seed: u64, workers: usize) -> SuiteReport {
    let ctx = Ctx {
        factory: RngFactory::new(seed),
        workers,
        suite,
    };
    let criteria = vec![
        c01_decrement_matrix(&ctx),
        c02_lemma12(&ctx),
        c03_d_sym(&ctx),
        c04_exact_tree_laws(&ctx),
        c05_sampler_laws(&ctx),
        c06_local_time_mean(&ctx),
        c07_interval_partitions(&ctx),
        c08_leaf1_location(&ctx),
        c09_numeric_closed_forms(&ctx),
        c10_d2_moment(&ctx),
        c11_bead_chain(&ctx),
        c12_determinism(&ctx),
    ];
    let all_pass = criteria.iter().all(|c| c.pass);
    SuiteReport {
        suite: suite.name().to_string(),
        seed,
        workers,
        all_pass,
        criteria,
    }
}

/// Criterion 1: decrement rows sum to one and satisfy the seating
/// recursion, with rational equality, for n ≤ 50 over the parameter grid.
fn c01_decrement_matrix(_ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let grid = exact::parameter_grid();
    let n_max = 50;
    let mut failures = Vec::new();
    for p in &grid {
        for n in 1..=n_max {
            let total: Rational = crp::decrement_row(n, p).into_iter().sum();
            if !total.is_one() {
                failures.push(format!("row sum at n={n}, {p}"));
            }
        }
        if let Err((n, m)) = crp::check_decrement_recursion(n_max, p) {
            failures.push(format!("recursion at (n={n}, m={m}), {p}"));
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("{} grid points, n ≤ {n_max}, all exact", grid.len())
    } else {
        failures.join("; ")
    };
    report(1, "decrement-matrix-exact", start, pass, detail)
}

/// Criterion 2: the symmetrized splitting rules under θ = 1−α and θ = 2−α
/// coincide rationally for n ≤ 20 at the five grid α's.
fn c02_lemma12(_ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let alphas: Vec<Rational> = [(1i64, 10i64), (1, 3), (1, 2), (2, 3), (9, 10)]
        .iter()
        .map(|&(n, d)| Rational::new(n.into(), d.into()))
        .collect();
    let mut failures = Vec::new();
    for alpha in &alphas {
        if let Err((x, y)) = exact::check_lemma12(20, alpha) {
            failures.push(format!("α={}: differs at ({x},{y})", alpha));
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        "5 α values, n ≤ 20, symmetrized rules identical".to_string()
    } else {
        failures.join("; ")
    };
    report(2, "symmetrized-splitting-match", start, pass, detail)
}

/// Criterion 3: d_sym(1,1) = d_sym(1,2) = 0 everywhere; d_sym(1,3) equals
/// its closed form on the grid and vanishes exactly on θ ∈ {1−α, 2−α}.
fn c03_d_sym(_ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let mut failures = Vec::new();
    for p in exact::parameter_grid() {
        if !exact::d_sym(1, 1, &p).is_zero() || !exact::d_sym(1, 2, &p).is_zero() {
            failures.push(format!("trivial zero fails at {p}"));
        }
        if exact::d_sym(1, 3, &p) != exact::d_sym_13_closed_form(&p) {
            failures.push(format!("closed form fails at {p}"));
        }
    }
    for &(an, ad) in &[(1i64, 10i64), (1, 3), (1, 2), (2, 3), (9, 10)] {
        for line in [ad - an, 2 * ad - an] {
            let p = Params::from_ints(an, ad, line, ad);
            if !exact::d_sym(1, 3, &p).is_zero() {
                failures.push(format!("nonzero on consistency line at {p}"));
            }
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        "defect zero/closed-form verified on grid and lines".to_string()
    } else {
        failures.join("; ")
    };
    report(3, "sampling-defect-closed-form", start, pass, detail)
}

/// Criterion 4: exact tree laws normalize (n ≤ 7), their first-split and
/// spinal marginals match the closed forms, weak sampling consistency holds
/// exactly on θ ∈ {1−α, 2−α} and fails at (1/2, 2) with a positive gap,
/// and exchangeability holds only at (1/2, 1/2).
fn c04_exact_tree_laws(_ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let mut failures = Vec::new();
    let spot_grid = [
        Params::from_ints(1, 2, 1, 2),
        Params::from_ints(1, 3, 1, 1),
        Params::from_ints(9, 10, 0, 1),
        Params::from_ints(2, 3, 3, 2),
        Params::from_ints(1, 10, 2, 1),
    ];
    for p in &spot_grid {
        for n in 1..=7u32 {
            let dist = exact::exact_tree_dist(n, p).expect("guarded n");
            if !dist.is_normalized() {
                failures.push(format!("law of T_{n} not normalized at {p}"));
            }
            if n >= 2 {
                let split = dist.map_keys(exact::first_split_size);
                for m in 1..=(n as u64 / 2) {
                    if split.prob(&m) != exact::splitting_rule_q_circ(m, n as u64, p) {
                        failures.push(format!("first-split marginal, n={n}, m={m}, {p}"));
                    }
                }
                let spine = dist.map_keys(|t| t.spinal_composition());
                for c in Composition::enumerate(n as u64 - 1) {
                    if spine.prob(&c) != crp::composition_prob(&c, p) {
                        failures.push(format!("spinal marginal, n={n}, c={c}, {p}"));
                    }
                }
            }
        }
    }
    // Weak sampling consistency on the two lines.
    for &(an, ad) in &[(1i64, 3i64), (1, 2), (2, 3)] {
        for line in [ad - an, 2 * ad - an] {
            let p = Params::from_ints(an, ad, line, ad);
            for n in 2..=6u32 {
                let out = exact::weak_consistency_check(n, &p).expect("guarded");
                if !out.pass {
                    failures.push(format!(
                        "weak consistency fails on line at {p}, n={n}, gap={}",
                        rational_string(&out.tv_gap)
                    ));
                }
            }
        }
    }
    let off = exact::weak_consistency_check(4, &Params::from_ints(1, 2, 2, 1)).expect("guarded");
    if off.pass || !off.tv_gap.to_f64().unwrap().is_finite() || off.tv_gap.is_zero() {
        failures.push("(1/2, 2) at n=4 should fail with a positive gap".into());
    }
    // Exchangeability only at (1/2, 1/2).
    for n in 2..=5u32 {
        if !exact::exchangeability_check(n, &Params::from_ints(1, 2, 1, 2)).expect("guarded") {
            failures.push(format!("exchangeability fails at (1/2,1/2), n={n}"));
        }
    }
    for p in exact::parameter_grid() {
        let is_half_half = *p.alpha() == Rational::new(1.into(), 2.into())
            && *p.theta() == Rational::new(1.into(), 2.into());
        if is_half_half {
            continue;
        }
        if exact::exchangeability_check(3, &p).expect("guarded") {
            failures.push(format!("unexpected exchangeability at {p}"));
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        "laws, marginals, consistency loci all exact".to_string()
    } else {
        failures.join("; ")
    };
    report(4, "exact-tree-laws", start, pass, detail)
}

fn chi_square_trees(
    trees: &[LabeledBinaryTree],
    probs: &[f64],
    samples: Vec<usize>,
    seed: u64,
) -> stats::GofReport {
    let mut counts = vec![0u64; trees.len()];
    for idx in samples {
        counts[idx] += 1;
    }
    let reps = counts.iter().sum();
    stats::chi_square_gof(&counts, probs, LEVEL, seed, reps).expect("valid cells")
}

/// Criterion 5: sampled T_5 laws match the exact laws (three grid points),
/// and the α = 0 walker matches the (0, θ) growth law at n = 5.
fn c05_sampler_laws(ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let reps = ctx.suite.scale(100_000);
    let mut failures = Vec::new();
    let mut stream = ctx.base(5);
    let points = [
        Params::from_ints(1, 2, 1, 2),
        Params::from_ints(1, 3, 1, 1),
        Params::from_ints(2, 3, 1, 2),
    ];
    for p in &points {
        let dist = exact::exact_tree_dist(5, p).expect("guarded");
        let trees: Vec<LabeledBinaryTree> = dist.support().keys().cloned().collect();
        let index: BTreeMap<&LabeledBinaryTree, usize> =
            trees.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let probs: Vec<f64> = trees
            .iter()
            .map(|t| dist.prob(t).to_f64().unwrap())
            .collect();
        let samples = run_replicates(reps, ctx.workers, &ctx.factory, stream, |_, rng| {
            index[&growth::grow(5, p, rng)]
        });
        stream += reps;
        let r = chi_square_trees(&trees, &probs, samples, ctx.factory.master_seed());
        if !r.pass {
            failures.push(format!("grow law at {p}: p={:.2e}", r.p_value));
        }
    }
    for &(tn, td) in &[(1i64, 2i64), (2, 1)] {
        let p = Params::from_ints(0, 1, tn, td);
        let theta = p.theta_f64();
        let dist = exact::exact_tree_dist(5, &p).expect("guarded");
        let trees: Vec<LabeledBinaryTree> = dist.support().keys().cloned().collect();
        let index: BTreeMap<&LabeledBinaryTree, usize> =
            trees.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let probs: Vec<f64> = trees
            .iter()
            .map(|t| dist.prob(t).to_f64().unwrap())
            .collect();
        let samples = run_replicates(reps, ctx.workers, &ctx.factory, stream, |_, rng| {
            index[&growth::walker_grow(5, theta, rng)]
        });
        stream += reps;
        let r = chi_square_trees(&trees, &probs, samples, ctx.factory.master_seed());
        if !r.pass {
            failures.push(format!("walker law at θ={theta}: p={:.2e}", r.p_value));
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("{reps} replicates per point, all chi-square pass")
    } else {
        failures.join("; ")
    };
    report(5, "sampler-vs-exact-law", start, pass, detail)
}

/// Criterion 6: mean of K_n/n^α at (1/2, 1/2), n = 1e5, within 5% of the
/// first local-time moment √π.
fn c06_local_time_mean(ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let p = Params::from_ints(1, 2, 1, 2);
    let n = match ctx.suite {
        Suite::Full => 100_000u64,
        Suite::Quick => 20_000,
    };
    let reps = ctx.suite.scale(10_000);
    let scale = (n as f64).powf(-0.5);
    let values = run_replicates(reps, ctx.workers, &ctx.factory, ctx.base(6), |_, rng| {
        crp::sample_num_tables(n, &p, rng) as f64 * scale
    });
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let expect = limits::local_time_moment(1.0, &p);
    let rel = (mean - expect).abs() / expect;
    let pass = rel < 0.05;
    report(
        6,
        "local-time-first-moment",
        start,
        pass,
        format!("mean K_n/n^α = {mean:.5} vs √π = {expect:.5} (rel {rel:.4})"),
    )
}

/// Criterion 7: the ordered and recursive interval-partition constructions
/// agree on the largest-interval length and the count of intervals > 0.01
/// (two-sample KS), and the ordered G_1 matches beta(α, 1−α+θ).
fn c07_interval_partitions(ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let reps = ctx.suite.scale(10_000);
    let mut failures = Vec::new();
    let mut stream = ctx.base(7);
    // Truncation bias of the ordered construction decays like
    // K^{-(1-α)/α}, so the G_1 comparison needs α ≤ 1/2 to stay below the
    // KS resolution at this replicate count.
    for p in [Params::from_ints(1, 2, 1, 2), Params::from_ints(1, 3, 3, 2)] {
        let truncation = 600;
        let ordered = run_replicates(reps, ctx.workers, &ctx.factory, stream, |_, rng| {
            let part = limits::build_interval_partition_ordered(&p, truncation, rng)
                .expect("valid params");
            let g1 = part
                .intervals
                .iter()
                .find(|iv| iv.birth == 1)
                .map_or(f64::NAN, |iv| iv.g);
            (part.largest_interval(), part.count_above(0.01) as f64, g1)
        });
        stream += reps;
        let recursive = run_replicates(reps, ctx.workers, &ctx.factory, stream, |_, rng| {
            let part =
                limits::build_interval_partition_recursive(&p, 1e-4, rng).expect("valid params");
            (part.largest_interval(), part.count_above(0.01) as f64)
        });
        stream += reps;
        let largest_a: Vec<f64> = ordered.iter().map(|v| v.0).collect();
        let largest_b: Vec<f64> = recursive.iter().map(|v| v.0).collect();
        let ks1 = stats::ks_two_sample(&largest_a, &largest_b, LEVEL, ctx.factory.master_seed())
            .expect("sizes fine");
        if !ks1.pass {
            failures.push(format!("largest-interval KS at {p}: p={:.2e}", ks1.p_value));
        }
        // Interval counts are integers; jitter-free KS on discrete data is
        // conservative, so compare counts by chi-square instead.
        let count_gof = {
            let max_count = ordered
                .iter()
                .map(|v| v.1 as usize)
                .chain(recursive.iter().map(|v| v.1 as usize))
                .max()
                .unwrap_or(0);
            let mut obs_a = vec![0u64; max_count + 1];
            let mut obs_b = vec![0u64; max_count + 1];
            for v in &ordered {
                obs_a[v.1 as usize] += 1;
            }
            for v in &recursive {
                obs_b[v.1 as usize] += 1;
            }
            two_sample_counts_chi_square(&obs_a, &obs_b, ctx.factory.master_seed())
        };
        if !count_gof.pass {
            failures.push(format!(
                "interval-count law at {p}: p={:.2e}",
                count_gof.p_value
            ));
        }
        let alpha = p.alpha_f64();
        let theta = p.theta_f64();
        let g1s: Vec<f64> = ordered.iter().map(|v| v.2).collect();
        let ks3 = stats::ks_one_sample(
            &g1s,
            |x| statrs::function::beta::beta_reg(alpha, 1.0 - alpha + theta, x.clamp(0.0, 1.0)),
            LEVEL,
            ctx.factory.master_seed(),
        )
        .expect("sizes fine");
        if !ks3.pass {
            failures.push(format!("G1 beta KS at {p}: p={:.2e}", ks3.p_value));
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("{reps} replicates, both constructions consistent")
    } else {
        failures.join("; ")
    };
    report(7, "interval-partition-agree", start, pass, detail)
}

/// Two-sample chi-square homogeneity test on aligned count vectors:
/// statistic Σ_s Σ_i (O_si − n_s p̂_i)²/(n_s p̂_i) with pooled p̂ and
/// (cells − 1) degrees of freedom after pooling small cells.
fn two_sample_counts_chi_square(a: &[u64], b: &[u64], seed: u64) -> stats::GofReport {
    let total_a: u64 = a.iter().sum();
    let total_b: u64 = b.iter().sum();
    let grand = (total_a + total_b) as f64;
    // Pool cells with small pooled expectation, ascending.
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by_key(|&i| (a[i] + b[i], i));
    let mut cells: Vec<(f64, f64, f64)> = Vec::new(); // (obs_a, obs_b, pooled count)
    let (mut pa, mut pb, mut pc) = (0.0, 0.0, 0.0);
    let min_pooled = 10.0;
    for &i in &order {
        let c = (a[i] + b[i]) as f64;
        if pc < min_pooled || c < min_pooled {
            pa += a[i] as f64;
            pb += b[i] as f64;
            pc += c;
        } else {
            cells.push((a[i] as f64, b[i] as f64, c));
        }
    }
    if pc > 0.0 {
        cells.push((pa, pb, pc));
    }
    let mut statistic = 0.0;
    for &(oa, ob, c) in &cells {
        let ea = c * total_a as f64 / grand;
        let eb = c * total_b as f64 / grand;
        statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let dof = (cells.len() - 1) as f64;
    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        statrs::function::gamma::gamma_ur(dof / 2.0, statistic / 2.0)
    };
    stats::GofReport {
        test: "two_sample_counts_chi_square".into(),
        statistic,
        dof,
        p_value,
        level: LEVEL,
        pass: p_value >= LEVEL,
        seed,
        replicates: total_a + total_b,
    }
}

/// Criterion 8: the conditional location of customer 1 given the
/// composition matches the closed-form block probabilities (chi-square on
/// the joint law at n = 6), and the bead-pick law on rational-mass strings
/// equals the same closed form exactly.
fn c08_leaf1_location(ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let reps = ctx.suite.scale(100_000);
    let p = Params::from_ints(1, 2, 1, 1);
    let n = 6u64;
    let joint = exact::exact_crp_joint_law(n, &p).expect("guarded");
    let keys: Vec<(Composition, usize)> = joint.support().keys().cloned().collect();
    let index: BTreeMap<&(Composition, usize), usize> =
        keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let probs: Vec<f64> = keys
        .iter()
        .map(|k| joint.prob(k).to_f64().unwrap())
        .collect();
    let samples = run_replicates(reps, ctx.workers, &ctx.factory, ctx.base(8), |_, rng| {
        let s = crp::run_ordered_crp(n, &p, rng);
        let key = (s.composition(), s.customer1_block());
        index[&key]
    });
    let mut counts = vec![0u64; keys.len()];
    for s in samples {
        counts[s] += 1;
    }
    let gof = stats::chi_square_gof(&counts, &probs, LEVEL, ctx.factory.master_seed(), reps)
        .expect("valid cells");
    let mut failures = Vec::new();
    if !gof.pass {
        failures.push(format!("joint location law: p={:.2e}", gof.p_value));
    }
    // Exact identity: the bead walk's selection law on masses (n_j/n)
    // equals the closed-form block probabilities, rationally.
    for p in [
        Params::from_ints(1, 2, 1, 1),
        Params::from_ints(1, 3, 3, 2),
        Params::from_ints(2, 3, 0, 1),
    ] {
        for n in 2..=7u64 {
            for c in Composition::enumerate(n) {
                let walk = bead_walk_law_exact(&c, &p);
                let closed = crp::leaf1_block_probs_exact(&c, &p);
                if walk != closed {
                    failures.push(format!("bead walk law differs at {c}, {p}"));
                }
            }
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("{reps} runs at n=6 plus exact walk identity (n ≤ 7)")
    } else {
        failures.join("; ")
    };
    report(8, "customer1-location", start, pass, detail)
}

/// Selection law of the sequential bead walk, computed exactly from the
/// switching probabilities p(x) = (1−x)θ/((1−x)θ + xα) at x = N_{j+1}/N_j.
fn bead_walk_law_exact(c: &Composition, p: &Params) -> Vec<Rational> {
    let ell = c.len();
    if p.theta_is_zero() {
        let mut v = vec![Rational::zero(); ell];
        v[ell - 1] = Rational::one();
        return v;
    }
    let sums = c.suffix_sums();
    let mut out = Vec::with_capacity(ell);
    let mut carried = Rational::one();
    for j in 0..ell {
        let x = Rational::new(sums[j + 1].into(), sums[j].into());
        let px = if x.is_zero() {
            Rational::one()
        } else {
            let num = (Rational::one() - &x) * p.theta();
            let den = num.clone() + x * p.alpha();
            num / den
        };
        out.push(carried.clone() * px.clone());
        carried *= Rational::one() - px;
    }
    out
}

/// Criterion 9: the Laplace exponent matches quadrature of the Lévy density
/// to 1e-6 relative; the dislocation identity holds to 1e-12; the ranked
/// tail mass matches ε^{−α}/Γ(1−α) within 2% at ε = 1e-4.
fn c09_numeric_closed_forms(_ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_rel: f64 = 0.0;
    for p in exact::parameter_grid() {
        if p.alpha_is_one() || p.alpha_is_zero() {
            continue;
        }
        let c = (-statrs::function::gamma::ln_gamma(1.0 - p.alpha_f64())).exp();
        for s in [0.5, 1.0, 2.0, 5.0] {
            let quad = limits::tanh_sinh(
                |_u, da, db| limits::levy_laplace_integrand(da, db, s, &p),
                0.0,
                1.0,
                1e-10,
            );
            let expect = limits::laplace_exponent(s, &p) * c - limits::levy_killing_rate(&p);
            let rel = ((quad - expect) / expect).abs();
            worst_rel = worst_rel.max(rel);
            if rel > 1e-6 {
                failures.push(format!("Laplace quadrature {p}, s={s}: rel {rel:.2e}"));
            }
        }
        for i in 1..40 {
            let u = 0.5 + 0.0125 * i as f64;
            let lhs = limits::dislocation_density(u, &p);
            let rhs = u * limits::size_biased_split_density(u, &p)
                + (1.0 - u) * limits::size_biased_split_density(1.0 - u, &p);
            if (lhs - rhs).abs() > 1e-12 * lhs.abs().max(1.0) {
                failures.push(format!("dislocation identity {p}, u={u}"));
            }
        }
    }
    // Ranked tail mass at (1/2, 1/2).
    let p = Params::from_ints(1, 2, 1, 2);
    let eps = 1e-4;
    let tail = limits::tanh_sinh(
        |u, _da, db| {
            if u <= 0.5 {
                return 0.0;
            }
            let one_minus_u = db + eps;
            dislocation_density_stable(u, one_minus_u, &p)
        },
        0.5,
        1.0 - eps,
        1e-10,
    );
    let expect = eps.powf(-0.5) / std::f64::consts::PI.sqrt();
    let tail_rel = ((tail - expect) / expect).abs();
    if tail_rel > 0.02 {
        failures.push(format!(
            "tail mass {tail:.4} vs {expect:.4} (rel {tail_rel:.3})"
        ));
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("worst Laplace rel err {worst_rel:.2e}; tail rel {tail_rel:.4}")
    } else {
        failures.join("; ")
    };
    report(9, "numeric-closed-forms", start, pass, detail)
}

/// Dislocation density with 1−u supplied stably (for u near 1).
fn dislocation_density_stable(u: f64, one_minus_u: f64, p: &Params) -> f64 {
    let alpha = p.alpha_f64();
    let theta = p.theta_f64();
    let c = (-statrs::function::gamma::ln_gamma(1.0 - alpha)).exp();
    let mut v = c
        * alpha
        * (u.powf(theta) * one_minus_u.powf(-alpha - 1.0)
            + u.powf(-alpha - 1.0) * one_minus_u.powf(theta));
    if theta > 0.0 {
        v += c
            * theta
            * (u.powf(theta - 1.0) * one_minus_u.powf(-alpha)
                + u.powf(-alpha) * one_minus_u.powf(theta - 1.0));
    }
    v
}

/// Criterion 10: the mean root-to-branch-point distance of the two-leaf
/// bead tree at θ = 1 − α, α = 1/2 is within 5% of Γ(3/2), and the two
/// closed-form length constructions agree by KS.
fn c10_d2_moment(ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let reps = ctx.suite.scale(10_000);
    let alpha = 0.5;
    let p = Params::from_ints(1, 2, 1, 2);
    let budget = match ctx.suite {
        Suite::Full => 20_000u64,
        Suite::Quick => 5_000,
    };
    let trunks = run_replicates(reps, ctx.workers, &ctx.factory, ctx.base(10), |_, rng| {
        let bt = beads::sample_rk(2, &p, budget, rng).expect("valid");
        bt.skeleton().lengths[&Block::new(vec![1, 2])]
    });
    let mean = trunks.iter().sum::<f64>() / trunks.len() as f64;
    let closed = beads::d2_closed_form(1.0, alpha);
    let rel = (mean - closed).abs() / closed;
    let mut failures = Vec::new();
    if rel >= 0.05 {
        failures.push(format!(
            "trunk mean {mean:.5} vs {closed:.5} (rel {rel:.4})"
        ));
    }
    let a = run_replicates(
        reps,
        ctx.workers,
        &ctx.factory,
        ctx.base(10) + reps,
        |_, rng| beads::d2_sample_via_diversities(alpha, budget, rng),
    );
    let b = run_replicates(
        reps,
        ctx.workers,
        &ctx.factory,
        ctx.base(10) + 2 * reps,
        |_, rng| beads::d2_sample_via_total_length(alpha, budget, rng),
    );
    let ks = stats::ks_two_sample(&a, &b, LEVEL, ctx.factory.master_seed()).expect("sizes fine");
    if !ks.pass {
        failures.push(format!("construction KS: p={:.2e}", ks.p_value));
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!("trunk mean rel err {rel:.4}; KS p={:.3}", ks.p_value)
    } else {
        failures.join("; ")
    };
    report(10, "two-leaf-length-moment", start, pass, detail)
}

/// Criterion 11: the labeled shape of the bead chain matches the exact
/// (α, θ) tree law for k ≤ 5 (chi-square at 1e5 chains), and mass is
/// conserved to 1e-9 through 1e4 crushing steps.
fn c11_bead_chain(ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let reps = ctx.suite.scale(100_000);
    let p = Params::from_ints(1, 2, 1, 2);
    let budget = 2_000u64;
    let mut failures = Vec::new();
    // One chain per replicate, recording the labeled shape at each k.
    // k = 2 is deterministic (one two-leaf tree), so chi-square starts at 3.
    let shape_dists: Vec<_> = (3..=5u32)
        .map(|k| {
            let dist = exact::exact_tree_dist(k, &p).expect("guarded");
            let trees: Vec<LabeledBinaryTree> = dist.support().keys().cloned().collect();
            let probs: Vec<f64> = trees
                .iter()
                .map(|t| dist.prob(t).to_f64().unwrap())
                .collect();
            let index: BTreeMap<LabeledBinaryTree, usize> = trees
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i))
                .collect();
            (trees, probs, index)
        })
        .collect();
    let samples = run_replicates(reps, ctx.workers, &ctx.factory, ctx.base(11), |_, rng| {
        let mut bt = beads::sample_r1(&p, budget, rng).expect("valid");
        bt.crush_step(&p, budget, rng).expect("valid");
        let mut picks = [0usize; 3];
        for k in 3..=5u32 {
            bt.crush_step(&p, budget, rng).expect("valid");
            let (_, _, index) = &shape_dists[(k - 3) as usize];
            picks[(k - 3) as usize] = index[&bt.shape()];
        }
        picks
    });
    for k in 3..=5u32 {
        let (trees, probs, _) = &shape_dists[(k - 3) as usize];
        let mut counts = vec![0u64; trees.len()];
        for s in &samples {
            counts[s[(k - 3) as usize]] += 1;
        }
        let gof = stats::chi_square_gof(&counts, probs, LEVEL, ctx.factory.master_seed(), reps)
            .expect("valid cells");
        if !gof.pass {
            failures.push(format!("shape law at k={k}: p={:.2e}", gof.p_value));
        }
    }
    // Long-chain mass conservation.
    let steps = match ctx.suite {
        Suite::Full => 10_000u32,
        Suite::Quick => 1_000,
    };
    let mut rng = ctx.factory.stream(ctx.base(11) + reps + 1);
    let mut bt = beads::sample_r1(&p, 200, &mut rng).expect("valid");
    let mut worst_drift: f64 = 0.0;
    for step in 0..steps {
        bt.crush_step(&p, 200, &mut rng).expect("valid");
        if step % 500 == 0 || step + 1 == steps {
            worst_drift = worst_drift.max((bt.total_mass() - 1.0).abs());
        }
    }
    if worst_drift > 1e-9 {
        failures.push(format!("mass drift {worst_drift:.2e} after {steps} steps"));
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "{reps} chains, k ≤ 5 shape laws pass; drift {worst_drift:.2e} over {steps} crushes"
        )
    } else {
        failures.join("; ")
    };
    report(11, "bead-chain-shape-and-mass", start, pass, detail)
}

/// A deterministic experiment artifact: shape histogram CSV plus a bead
/// tree JSON, as produced by replicate-parallel runs.
pub fn determinism_artifact(seed: u64, workers: usize, reps: u64) -> String {
    let factory = RngFactory::new(seed);
    let p = Params::from_ints(1, 3, 1, 1);
    let shapes = run_replicates(reps, workers, &factory, 0, |_, rng| {
        growth::grow(7, &p, rng).delabel().0
    });
    let mut hist: BTreeMap<String, u64> = BTreeMap::new();
    for s in shapes {
        *hist.entry(s).or_insert(0) += 1;
    }
    let mut out = String::new();
    for (shape, count) in &hist {
        out.push_str(&format!("{shape},{count}\n"));
    }
    let masses = run_replicates(reps.min(200), workers, &factory, 1 << 20, |_, rng| {
        let bt = beads::sample_rk(4, &p, 500, rng).expect("valid");
        serde_json::to_string(&bt.to_json()).expect("serializable")
    });
    for m in masses.iter().take(3) {
        out.push_str(m);
        out.push('\n');
    }
    out
}

/// Criterion 12: identical seeds with different worker counts produce
/// byte-identical outputs.
fn c12_determinism(ctx: &Ctx) -> CriterionReport {
    let start = Instant::now();
    let reps = ctx.suite.scale(5_000);
    let seed = ctx.factory.master_seed();
    let a = determinism_artifact(seed, 1, reps);
    let b = determinism_artifact(seed, 3, reps);
    let c = determinism_artifact(seed, ctx.workers.max(2), reps);
    let pass = a == b && b == c;
    let detail = if pass {
        format!(
            "byte-identical over worker counts 1, 3, {}",
            ctx.workers.max(2)
        )
    } else {
        "outputs differ across worker counts".to_string()
    };
    report(12, "worker-count-determinism", start, pass, detail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_exact_criteria_pass() {
        let ctx = Ctx {
            factory: RngFactory::new(DEFAULT_SEED),
            workers: 2,
            suite: Suite::Quick,
        };
        for c in [
            c01_decrement_matrix(&ctx),
            c02_lemma12(&ctx),
            c03_d_sym(&ctx),
        ] {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn suite_lines_render() {
        let report = SuiteReport {
            suite: "quick".into(),
            seed: 1,
            workers: 2,
            all_pass: true,
            criteria: vec![CriterionReport {
                id: 1,
                name: "x".into(),
                pass: true,
                detail: "ok".into(),
                seconds: 0.5,
            }],
        };
        assert!(report.lines()[0].contains("PASS"));
    }
}
