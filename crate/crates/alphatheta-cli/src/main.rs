//! Experiment runner for the (α, θ) tree-growth laboratory.
//!
//! Every run embeds its fully resolved configuration in the output header,
//! and replicate-level parallelism is deterministic: re-running a command
//! with the same seed reproduces the output byte for byte regardless of the
//! worker count (`ALPHATHETA_WORKERS`).

use alphatheta::beads;
use alphatheta::crp;
use alphatheta::exact;
use alphatheta::growth;
use alphatheta::limits;
use alphatheta::params::{rational_string, Params};
use alphatheta::rng::RngFactory;
use alphatheta::runner::{default_workers, run_replicates};
use alphatheta::trees::serialize_newick_with_lengths;
use alphatheta::verify;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "alphatheta",
    version,
    about = "(α, θ) random binary tree laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow (α, θ) trees; emit one Newick tree or a shape histogram.
    Grow(GrowArgs),
    /// Run the ordered Chinese Restaurant Process and export compositions.
    Crp(CrpArgs),
    /// Exact rational checks over the parameter grid.
    Exact(ExactArgs),
    /// Interval partitions, strings of beads and closed-form tables.
    Limits(LimitsArgs),
    /// Bead-crushing chain; emits bead-tree JSON or a Newick skeleton.
    Beads(BeadsArgs),
    /// Run the verification suite (exit code 0 iff every criterion passes).
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// α as "p/q" or decimal, parsed exactly.
    #[arg(long, default_value = "1/2")]
    alpha: String,
    /// θ as "p/q" or decimal, parsed exactly.
    #[arg(long, default_value = "1/2")]
    theta: String,
    /// Master seed; replicate r uses stream r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; "-" writes to stdout.
    #[arg(long, default_value = "-")]
    out: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct GrowArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of leaves.
    #[arg(long, default_value_t = 10)]
    n: u32,
    /// Replicates; one replicate prints the tree itself.
    #[arg(long, default_value_t = 1)]
    reps: u64,
}

#[derive(Args)]
struct CrpArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Customers to seat.
    #[arg(long, default_value_t = 20)]
    n: u64,
    #[arg(long, default_value_t = 100)]
    reps: u64,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which exact check to run.
    #[arg(long, value_enum, default_value_t = ExactCheck::All)]
    check: ExactCheck,
    /// Largest n for the decrement-matrix checks.
    #[arg(long, default_value_t = 50)]
    n: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExactCheck {
    QRows,
    Recursion,
    Lemma12,
    DSym,
    Weak,
    Exchange,
    All,
}

#[derive(Args)]
struct LimitsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = LimitsEmit::PhiTable)]
    emit: LimitsEmit,
    /// Truncation (tables) for the ordered construction.
    #[arg(long, default_value_t = 300)]
    k: u32,
    /// Mass tolerance for the recursive construction.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Customers for the string of beads.
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    #[arg(long, default_value_t = 1)]
    reps: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimitsEmit {
    PhiTable,
    MomentTable,
    PartitionOrdered,
    PartitionRecursive,
    BeadsString,
}

#[derive(Args)]
struct BeadsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Leaves of the bead tree.
    #[arg(long, default_value_t = 4)]
    k: u32,
    /// Customers per string of beads.
    #[arg(long, default_value_t = 2_000)]
    budget: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Master seed for the suite.
    #[arg(long, default_value_t = verify::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SuiteArg::Quick)]
    suite: SuiteArg,
    /// Optional JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Quick,
    Full,
}

/// Fully resolved run configuration, embedded in every output.
#[derive(Serialize)]
struct ResolvedConfig {
    command: String,
    alpha: String,
    theta: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    format: String,
}

impl ResolvedConfig {
    fn new(command: &str, p: &Params, common: &CommonArgs) -> Self {
        ResolvedConfig {
            command: command.to_string(),
            alpha: rational_string(p.alpha()),
            theta: rational_string(p.theta()),
            seed: common.seed,
            n: None,
            k: None,
            reps: None,
            budget: None,
            eps: None,
            format: match common.format {
                Format::Csv => "csv".into(),
                Format::Json => "json".into(),
            },
        }
    }

    fn header(&self) -> String {
        format!("# {}", serde_json::to_string(self).expect("serializable"))
    }
}

fn write_output(path: &str, content: &str) -> std::io::Result<()> {
    if path == "-" {
        std::io::stdout().write_all(content.as_bytes())
    } else {
        std::fs::write(path, content)
    }
}

fn parse_params(common: &CommonArgs) -> Result<Params, String> {
    Params::parse(&common.alpha, &common.theta).map_err(|e| e.to_string())
}

fn cmd_grow(args: GrowArgs) -> Result<(), String> {
    let p = parse_params(&args.common)?;
    let mut config = ResolvedConfig::new("grow", &p, &args.common);
    config.n = Some(args.n as u64);
    config.reps = Some(args.reps);
    let factory = RngFactory::new(args.common.seed);
    let workers = default_workers();
    let mut out = String::new();
    if args.reps == 1 {
        let tree = growth::grow(args.n, &p, &mut factory.stream(0));
        match args.common.format {
            Format::Csv => {
                out.push_str(&config.header());
                out.push('\n');
                out.push_str(&tree.to_string());
                out.push('\n');
            }
            Format::Json => {
                let doc = serde_json::json!({ "config": config, "tree": tree });
                out = serde_json::to_string_pretty(&doc).expect("serializable");
                out.push('\n');
            }
        }
    } else {
        let shapes = run_replicates(args.reps, workers, &factory, 0, |_, rng| {
            growth::grow(args.n, &p, rng).delabel().0
        });
        let mut hist: BTreeMap<String, u64> = BTreeMap::new();
        for s in shapes {
            *hist.entry(s).or_insert(0) += 1;
        }
        match args.common.format {
            Format::Csv => {
                out.push_str(&config.header());
                out.push_str("\nshape,count\n");
                for (shape, count) in &hist {
                    out.push_str(&format!("{shape},{count}\n"));
                }
            }
            Format::Json => {
                let doc = serde_json::json!({ "config": config, "histogram": hist });
                out = serde_json::to_string_pretty(&doc).expect("serializable");
                out.push('\n');
            }
        }
    }
    write_output(&args.common.out, &out).map_err(|e| e.to_string())
}

fn cmd_crp(args: CrpArgs) -> Result<(), String> {
    let p = parse_params(&args.common)?;
    let mut config = ResolvedConfig::new("crp", &p, &args.common);
    config.n = Some(args.n);
    config.reps = Some(args.reps);
    let factory = RngFactory::new(args.common.seed);
    let rows = run_replicates(args.reps, default_workers(), &factory, 0, |rep, rng| {
        let s = crp::run_ordered_crp(args.n, &p, rng);
        (rep, s.composition().to_string(), s.customer1_block())
    });
    let mut out = String::new();
    match args.common.format {
        Format::Csv => {
            out.push_str(&config.header());
            out.push('\n');
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["replicate", "n", "composition", "customer1_block"])
                .expect("csv");
            for (rep, comp, c1) in &rows {
                w.write_record([
                    rep.to_string(),
                    args.n.to_string(),
                    comp.clone(),
                    c1.to_string(),
                ])
                .expect("csv");
            }
            out.push_str(&String::from_utf8(w.into_inner().expect("csv")).expect("utf8"));
        }
        Format::Json => {
            let records: Vec<_> = rows
                .iter()
                .map(|(rep, comp, c1)| {
                    serde_json::json!({
                        "replicate": rep, "n": args.n,
                        "composition": comp, "customer1_block": c1,
                    })
                })
                .collect();
            let doc = serde_json::json!({ "config": config, "rows": records });
            out = serde_json::to_string_pretty(&doc).expect("serializable");
            out.push('\n');
        }
    }
    write_output(&args.common.out, &out).map_err(|e| e.to_string())
}

fn cmd_exact(args: ExactArgs) -> Result<(), String> {
    use alphatheta::params::Rational;
    use num_traits::{One, ToPrimitive, Zero};
    let p = parse_params(&args.common)?;
    let mut config = ResolvedConfig::new("exact", &p, &args.common);
    config.n = Some(args.n);
    let mut reports: Vec<exact::ExactReport> = Vec::new();
    let grid = exact::parameter_grid();
    let want = |c: ExactCheck| args.check == c || args.check == ExactCheck::All;
    if want(ExactCheck::QRows) {
        for p in &grid {
            let mut witness = None;
            for n in 1..=args.n {
                let total: Rational = crp::decrement_row(n, p).into_iter().sum();
                if !total.is_one() {
                    witness = Some(format!("row n={n} sums to {total}"));
                    break;
                }
            }
            reports.push(exact::ExactReport {
                params: exact::ParamsRepr::of(p),
                check: "decrement-rows-sum-to-one".into(),
                pass: witness.is_none(),
                witness,
            });
        }
    }
    if want(ExactCheck::Recursion) {
        for p in &grid {
            let witness = crp::check_decrement_recursion(args.n, p)
                .err()
                .map(|(n, m)| format!("fails at (n={n}, m={m})"));
            reports.push(exact::ExactReport {
                params: exact::ParamsRepr::of(p),
                check: "decrement-recursion".into(),
                pass: witness.is_none(),
                witness,
            });
        }
    }
    if want(ExactCheck::Lemma12) {
        for &(an, ad) in &[(1i64, 10i64), (1, 3), (1, 2), (2, 3), (9, 10)] {
            let alpha = Rational::new(an.into(), ad.into());
            let witness = exact::check_lemma12(20, &alpha)
                .err()
                .map(|(x, y)| format!("splits differ at ({x},{y})"));
            reports.push(exact::ExactReport {
                params: exact::ParamsRepr::of(&Params::from_ints(an, ad, ad - an, ad)),
                check: "symmetrized-splitting-match".into(),
                pass: witness.is_none(),
                witness,
            });
        }
    }
    if want(ExactCheck::DSym) {
        for p in &grid {
            let ok = exact::d_sym(1, 1, p).is_zero()
                && exact::d_sym(1, 2, p).is_zero()
                && exact::d_sym(1, 3, p) == exact::d_sym_13_closed_form(p);
            reports.push(exact::ExactReport {
                params: exact::ParamsRepr::of(p),
                check: "sampling-defect-closed-form".into(),
                pass: ok,
                witness: (!ok)
                    .then(|| format!("d_sym(1,3) = {}", rational_string(&exact::d_sym(1, 3, p)))),
            });
        }
    }
    if want(ExactCheck::Weak) {
        for &(an, ad) in &[(1i64, 3i64), (1, 2), (2, 3)] {
            for line in [ad - an, 2 * ad - an] {
                let p = Params::from_ints(an, ad, line, ad);
                let mut witness = None;
                for n in 2..=5u32 {
                    let out = exact::weak_consistency_check(n, &p).map_err(|e| e.to_string())?;
                    if !out.pass {
                        witness = Some(format!("gap {} at n={n}", rational_string(&out.tv_gap)));
                        break;
                    }
                }
                reports.push(exact::ExactReport {
                    params: exact::ParamsRepr::of(&p),
                    check: "weak-sampling-consistency".into(),
                    pass: witness.is_none(),
                    witness,
                });
            }
        }
        // Negative control off the lines.
        let off = Params::from_ints(1, 2, 2, 1);
        let out = exact::weak_consistency_check(4, &off).map_err(|e| e.to_string())?;
        reports.push(exact::ExactReport {
            params: exact::ParamsRepr::of(&off),
            check: "weak-sampling-consistency-negative-control".into(),
            pass: !out.pass && out.tv_gap.to_f64().unwrap_or(0.0) > 0.0,
            witness: Some(format!("gap {}", rational_string(&out.tv_gap))),
        });
    }
    if want(ExactCheck::Exchange) {
        for (p, expect) in [
            (Params::from_ints(1, 2, 1, 2), true),
            (Params::from_ints(1, 2, 1, 1), false),
            (Params::from_ints(1, 3, 1, 3), false),
        ] {
            let got = exact::exchangeability_check(if expect { 5 } else { 3 }, &p)
                .map_err(|e| e.to_string())?;
            reports.push(exact::ExactReport {
                params: exact::ParamsRepr::of(&p),
                check: "exchangeability".into(),
                pass: got == expect,
                witness: Some(format!("exchangeable = {got}, expected {expect}")),
            });
        }
    }
    let doc = serde_json::json!({ "config": config, "reports": reports });
    let mut out = serde_json::to_string_pretty(&doc).expect("serializable");
    out.push('\n');
    write_output(&args.common.out, &out).map_err(|e| e.to_string())
}

fn cmd_limits(args: LimitsArgs) -> Result<(), String> {
    let p = parse_params(&args.common)?;
    let mut config = ResolvedConfig::new("limits", &p, &args.common);
    config.k = Some(args.k as u64);
    config.eps = Some(args.eps);
    config.budget = Some(args.budget);
    config.reps = Some(args.reps);
    let factory = RngFactory::new(args.common.seed);
    // Partition and bead-string exports are CSV regardless of --format;
    // only the closed-form tables have a JSON form.
    let json_table = args.common.format == Format::Json
        && matches!(args.emit, LimitsEmit::PhiTable | LimitsEmit::MomentTable);
    let mut out = String::new();
    if !json_table {
        out.push_str(&config.header());
        out.push('\n');
    }
    match args.emit {
        LimitsEmit::PhiTable | LimitsEmit::MomentTable => {
            // Closed-form tables: CSV rows or a JSON document per --format.
            let phi = args.emit == LimitsEmit::PhiTable;
            let mut rows: Vec<(String, String, f64, f64)> = Vec::new();
            for point in exact::parameter_grid() {
                if point.alpha_is_one() || (!phi && point.alpha_is_zero()) {
                    continue;
                }
                let arguments: &[f64] = if phi {
                    &[0.25, 0.5, 1.0, 2.0, 5.0, 10.0]
                } else {
                    &[1.0, 2.0, 3.0]
                };
                for &x in arguments {
                    let value = if phi {
                        limits::laplace_exponent(x, &point)
                    } else {
                        limits::local_time_moment(x, &point)
                    };
                    rows.push((
                        rational_string(point.alpha()),
                        rational_string(point.theta()),
                        x,
                        value,
                    ));
                }
            }
            let (arg_name, value_name) = if phi {
                ("s", "phi")
            } else {
                ("order", "moment")
            };
            match args.common.format {
                Format::Csv => {
                    out.push_str(&format!("alpha,theta,{arg_name},{value_name}\n"));
                    for (a, t, x, v) in &rows {
                        out.push_str(&format!("{a},{t},{x},{v:.12e}\n"));
                    }
                }
                Format::Json => {
                    let records: Vec<_> = rows
                        .iter()
                        .map(|(a, t, x, v)| {
                            serde_json::json!({
                                "alpha": a, "theta": t, arg_name: x, value_name: v,
                            })
                        })
                        .collect();
                    let doc = serde_json::json!({ "config": config, "rows": records });
                    out = serde_json::to_string_pretty(&doc).expect("serializable");
                    out.push('\n');
                }
            }
        }
        LimitsEmit::PartitionOrdered | LimitsEmit::PartitionRecursive => {
            out.push_str("replicate,g,d,mass\n");
            for rep in 0..args.reps {
                let mut rng = factory.stream(rep);
                let part = match args.emit {
                    LimitsEmit::PartitionOrdered => {
                        limits::build_interval_partition_ordered(&p, args.k as usize, &mut rng)
                    }
                    _ => limits::build_interval_partition_recursive(&p, args.eps, &mut rng),
                }
                .map_err(|e| e.to_string())?;
                for iv in &part.intervals {
                    out.push_str(&format!(
                        "{rep},{:.12e},{:.12e},{:.12e}\n",
                        iv.g,
                        iv.d,
                        iv.mass()
                    ));
                }
            }
        }
        LimitsEmit::BeadsString => {
            out.push_str("replicate,position,mass\n");
            for rep in 0..args.reps {
                let mut rng = factory.stream(rep);
                let s = limits::string_of_beads(&p, args.budget, &mut rng)
                    .map_err(|e| e.to_string())?;
                for (pos, mass) in &s.atoms {
                    out.push_str(&format!("{rep},{pos:.12e},{mass:.12e}\n"));
                }
            }
        }
    }
    write_output(&args.common.out, &out).map_err(|e| e.to_string())
}

fn cmd_beads(args: BeadsArgs) -> Result<(), String> {
    let p = parse_params(&args.common)?;
    let mut config = ResolvedConfig::new("beads", &p, &args.common);
    config.k = Some(args.k as u64);
    config.budget = Some(args.budget);
    let factory = RngFactory::new(args.common.seed);
    let bt = beads::sample_rk(args.k, &p, args.budget, &mut factory.stream(0))
        .map_err(|e| e.to_string())?;
    let mut out = String::new();
    match args.common.format {
        Format::Json => {
            let doc = serde_json::json!({ "config": config, "bead_tree": bt.to_json() });
            out = serde_json::to_string_pretty(&doc).expect("serializable");
            out.push('\n');
        }
        Format::Csv => {
            out.push_str(&config.header());
            out.push('\n');
            out.push_str(&serialize_newick_with_lengths(&bt.skeleton()));
            out.push('\n');
        }
    }
    write_output(&args.common.out, &out).map_err(|e| e.to_string())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool, String> {
    let suite = match args.suite {
        SuiteArg::Quick => verify::Suite::Quick,
        SuiteArg::Full => verify::Suite::Full,
    };
    let report = verify::run_suite(suite, args.seed, default_workers());
    for line in report.lines() {
        println!("{line}");
    }
    println!(
        "suite {} with seed {}: {}",
        report.suite,
        report.seed,
        if report.all_pass {
            "ALL PASS"
        } else {
            "FAILURES"
        }
    );
    if let Some(path) = &args.out {
        let body = if path.extension().is_some_and(|e| e == "csv") {
            report.to_csv()
        } else {
            serde_json::to_string_pretty(&report).map_err(|e| e.to_string())? + "\n"
        };
        std::fs::write(path, body).map_err(|e| e.to_string())?;
    }
    Ok(report.all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Grow(args) => cmd_grow(args).map(|_| true),
        Command::Crp(args) => cmd_crp(args).map(|_| true),
        Command::Exact(args) => cmd_exact(args).map(|_| true),
        Command::Limits(args) => cmd_limits(args).map(|_| true),
        Command::Beads(args) => cmd_beads(args).map(|_| true),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
