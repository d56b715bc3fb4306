//! `sparsedom`: runs the certification suites on generated or file-provided
//! signals and emits JSON or CSV reports.
//!
//! Exit status: 0 when every checked invariant holds, 1 when a hard invariant
//! fails, 2 on usage, input or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sparsedom::campaign::{run_campaign, CampaignConfig};
use sparsedom::cz::{cz_decompose, weak11_certify, Weak11Operator};
use sparsedom::domination::lerner_decompose;
use sparsedom::domination::{
    dominate_avg, dominate_oscillation, dominate_square, dominate_weighted, DominationCertificate,
    StoppingParams,
};
use sparsedom::generate::{
    random_multiplier, random_sparse_collection, weight_with_a2, SignalKind, WeightKind,
};
use sparsedom::hardy::atomic_decompose;
use sparsedom::sparse::{certify_sparse, sparse_vs_carleson};
use sparsedom::{haar_transform, DyadicInterval, HaarMultiplier, Signal, SparseCollection, Weight};

const DEFAULT_DEPTH: u32 = 10;
const LERNER_MAX_LAMBDA: f64 = 0.125;

#[derive(Parser)]
#[command(
    name = "sparsedom",
    version,
    about = "Sparse domination laboratory for dyadic Haar analysis"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Grid depth J; signals have 2^J cells. Default 10; overrides a campaign config.
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Master seed for generated inputs. Default 0; overrides a campaign config.
    #[arg(long, global = true, env = "SPARSEDOM_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1.0)]
    p: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    q: f64,
    /// Averaging exponent for the weighted mode and atoms; defaults to p/2.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Localization exponent M of the averages.
    #[arg(long = "chi-M", global = true, default_value_t = 8)]
    chi_m: u32,
    /// Initial stopping constant C.
    #[arg(long = "stop-C", global = true, default_value_t = 4.0)]
    stop_c: f64,
    #[arg(long, global = true, default_value_t = 0.125)]
    lambda: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (directory for `campaign`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Where the signal `f` (and `g`) come from.
#[derive(Args)]
struct Input {
    /// Signal file for f: one value per line, or one comma-separated row.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generator for f when no file is given: gaussian_noise, sparse_haar:k,
    /// step, single_mode:d,i or quantized.
    #[arg(long, default_value = "gaussian_noise")]
    signal: SignalKind,
}

#[derive(Subcommand)]
enum Command {
    /// Haar coefficients of f.
    Haar(Input),
    /// Sparsity and Carleson checks for a collection file with `depth,index` rows.
    SparseCheck {
        collection: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
    },
    /// Sparse domination certificate for a random Haar multiplier.
    Dominate {
        #[arg(long, value_enum)]
        mode: DominateMode,
        #[command(flatten)]
        input: Input,
        /// Signal file for g; generated like f when absent.
        #[arg(long)]
        input_g: Option<PathBuf>,
        /// Multiplier file with `depth,index,epsilon` rows; random when absent.
        #[arg(long)]
        multiplier: Option<PathBuf>,
        /// Probability that a Haar mode belongs to the random multiplier.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Weight file for the weighted mode.
        #[arg(long)]
        weight: Option<PathBuf>,
        /// Target A_2 characteristic of a generated two-level weight.
        #[arg(long, default_value_t = 4.0)]
        a2: f64,
    },
    /// Atomic decomposition of f.
    Atoms(Input),
    /// Calderon-Zygmund decomposition of |f| at level alpha.
    Cz {
        #[command(flatten)]
        input: Input,
        /// Level; defaults to 2 ‖f‖₁.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Weak (1,1) test of a random sparse operator at f.
    Weak11 {
        #[command(flatten)]
        input: Input,
        #[arg(long = "K", default_value_t = 4.0)]
        k: f64,
        /// Test the identity instead of a sparse operator.
        #[arg(long)]
        identity: bool,
    },
    /// Lerner local-oscillation decomposition of f on [0, 1) at --lambda.
    Lerner(Input),
    /// Batch run from a TOML or JSON config.
    Campaign {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DominateMode {
    Avg,
    Square,
    Weighted,
    Osc,
}

/// A report and whether its hard invariants held.
struct Outcome {
    json: Value,
    csv: String,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    if let Command::Campaign { config } = &cli.command {
        return campaign(g, config);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed.unwrap_or(0));
    let outcome = match &cli.command {
        Command::Haar(input) => haar(&read_f(g, input, &mut rng)?),
        Command::SparseCheck { collection, eta } => sparse_check(collection, *eta)?,
        Command::Dominate {
            mode,
            input,
            input_g,
            multiplier,
            density,
            weight,
            a2,
        } => {
            let f = read_f(g, input, &mut rng)?;
            let gs = match input_g {
                Some(path) => read_signal(path)?,
                None => input.signal.generate(f.depth(), &mut rng)?,
            };
            let t = match multiplier {
                Some(path) => HaarMultiplier::parse_csv(&read(path)?)?,
                None => random_multiplier(f.depth(), *density, &mut rng),
            };
            let params = stopping(g);
            let cert = match mode {
                DominateMode::Avg => dominate_avg(&t, &f, &gs, &params)?,
                DominateMode::Square => dominate_square(&t, &f, &gs, g.p, g.q, &params)?,
                DominateMode::Osc => dominate_oscillation(&t, &f, &gs, &params)?,
                DominateMode::Weighted => {
                    let w = match weight {
                        Some(path) => Weight::parse(&read(path)?)?,
                        None => {
                            weight_with_a2(WeightKind::TwoLevel(1.0), *a2, f.depth(), &mut rng)?.0
                        }
                    };
                    dominate_weighted(&t, &f, &gs, g.p, r(g), &w, &params)?
                }
            };
            dominate(&cert, &t)
        }
        Command::Atoms(input) => atoms(g, &read_f(g, input, &mut rng)?)?,
        Command::Cz { input, alpha } => {
            let f = read_f(g, input, &mut rng)?;
            cz(&f, alpha.unwrap_or(2.0 * f.abs().integral()))?
        }
        Command::Weak11 { input, k, identity } => {
            let f = read_f(g, input, &mut rng)?;
            let s = random_sparse_collection(f.depth(), &mut rng);
            let op = if *identity {
                Weak11Operator::Identity
            } else {
                Weak11Operator::Sparse(&s)
            };
            weak11(&f, op, *k, &mut rng)?
        }
        Command::Lerner(input) => lerner(&read_f(g, input, &mut rng)?, g.lambda)?,
        Command::Campaign { .. } => unreachable!("handled above"),
    };
    let text = match g.format {
        Format::Json => serde_json::to_string_pretty(&outcome.json)? + "\n",
        Format::Csv => outcome.csv,
    };
    match &g.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(outcome.passed)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_signal(path: &Path) -> Result<Signal> {
    Signal::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_f(g: &Global, input: &Input, rng: &mut ChaCha8Rng) -> Result<Signal> {
    match &input.input {
        Some(path) => read_signal(path),
        None => Ok(input
            .signal
            .generate(g.depth.unwrap_or(DEFAULT_DEPTH), rng)?),
    }
}

fn r(g: &Global) -> f64 {
    g.r.unwrap_or(g.p / 2.0)
}

fn stopping(g: &Global) -> StoppingParams {
    StoppingParams {
        c: g.stop_c,
        chi_m: g.chi_m,
        ..Default::default()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn haar(f: &Signal) -> Outcome {
    let coeffs = haar_transform(f);
    let mut csv = String::from("depth,index,coefficient\n");
    let mut rows = Vec::new();
    for (i, a) in coeffs.iter() {
        csv.push_str(&format!("{},{},{a}\n", i.depth(), i.index()));
        rows.push(json!({ "depth": i.depth(), "index": i.index(), "coefficient": a }));
    }
    let json = json!({ "depth": f.depth(), "mean": coeffs.mean(), "energy": coeffs.energy(), "coefficients": rows });
    Outcome {
        json,
        csv,
        passed: true,
    }
}

fn sparse_check(path: &Path, eta: f64) -> Result<Outcome> {
    let s = SparseCollection::parse_csv(&read(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    if s.is_empty() {
        bail!("{} lists no intervals", path.display());
    }
    let check = certify_sparse(&s, eta)?;
    let report = sparse_vs_carleson(&s)?;
    let csv = format!(
        "intervals,eta,certified,min_ratio,carleson,greedy_eta,fractional_eta,eta_times_carleson\n{},{eta},{},{},{},{},{},{}\n",
        s.len(),
        check.certified,
        check.min_ratio,
        report.carleson,
        report.greedy_eta,
        opt(report.fractional_eta),
        report.eta_times_carleson
    );
    let json = json!({
        "intervals": s.len(),
        "eta": eta,
        "certified": check.certified,
        "min_ratio": check.min_ratio,
        "carleson": report,
    });
    Ok(Outcome {
        json,
        csv,
        passed: check.certified,
    })
}

fn dominate(cert: &DominationCertificate, t: &HaarMultiplier) -> Outcome {
    let mut failures = cert.validate();
    if !cert.check_partition(&t.family()) {
        failures.push("selected sub-families do not partition the family".into());
    }
    let mut csv =
        String::from("depth,index,measure,children,subfamily,local_form,rhs_term,local_constant\n");
    for q in &cert.per_q {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            q.q.depth(),
            q.q.index(),
            q.measure,
            q.children.len(),
            q.subfamily.len(),
            q.local_form,
            q.rhs_term,
            opt(q.local_constant)
        ));
    }
    let json = json!({ "passed": failures.is_empty(), "failures": failures, "certificate": cert });
    Outcome {
        json,
        csv,
        passed: failures.is_empty(),
    }
}

fn atoms(g: &Global, f: &Signal) -> Result<Outcome> {
    let dec = atomic_decompose(f, g.p, r(g), &stopping(g))?;
    let checks = dec.check(f);
    let mut csv = String::from("depth,index,c_Q,modes\n");
    for a in &dec.atoms {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            a.q.depth(),
            a.q.index(),
            a.c_q,
            a.modes.len()
        ));
    }
    let json = json!({ "passed": checks.passed(), "checks": checks, "decomposition": dec });
    Ok(Outcome {
        json,
        csv,
        passed: checks.passed(),
    })
}

fn cz(f: &Signal, alpha: f64) -> Result<Outcome> {
    let dec = cz_decompose(f, alpha)?;
    let checks = dec.check(f);
    let mut csv = String::from("depth,index,average\n");
    for b in &dec.bad {
        csv.push_str(&format!(
            "{},{},{}\n",
            b.cube.depth(),
            b.cube.index(),
            b.average
        ));
    }
    let json = json!({ "passed": checks.passed(), "checks": checks, "decomposition": dec });
    Ok(Outcome {
        json,
        csv,
        passed: checks.passed(),
    })
}

fn weak11(f: &Signal, op: Weak11Operator<'_>, k: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let report = weak11_certify(op, f, k, rng)?;
    let mut csv = String::from("level,weak_constant\n");
    for (l, w) in report.alpha_levels.iter().zip(&report.weak_constants) {
        csv.push_str(&format!("{l},{w}\n"));
    }
    let passed = report.passed();
    Ok(Outcome {
        json: json!({ "passed": passed, "report": report }),
        csv,
        passed,
    })
}

fn lerner(f: &Signal, lambda: f64) -> Result<Outcome> {
    let d = lerner_decompose(f, DyadicInterval::ROOT, lambda)?;
    let mut csv = String::from("depth,index,median,omega\n");
    for rec in &d.records {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            rec.q.depth(),
            rec.q.index(),
            rec.median,
            rec.omega
        ));
    }
    // The pointwise bound is only guaranteed for λ ≤ 1/8.
    let passed = lambda > LERNER_MAX_LAMBDA || (d.bound_holds && d.sparse_at_half);
    Ok(Outcome {
        json: json!({ "passed": passed, "decomposition": d }),
        csv,
        passed,
    })
}

fn campaign(g: &Global, path: &Path) -> Result<bool> {
    let mut config =
        CampaignConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(out) = &g.out {
        config.out = out.clone();
    }
    if let Some(depth) = g.depth {
        config.depth = depth;
    }
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    config.validate()?;
    let summary = run_campaign(&config)?;
    let text = match g.format {
        Format::Json => serde_json::to_string_pretty(&summary)? + "\n",
        Format::Csv => read(&config.out.join("summary.csv"))?,
    };
    print!("{text}");
    if !summary.passed() {
        eprintln!(
            "{} hard invariant failure(s); see {}",
            summary.hard_failures,
            config.out.join("trials.jsonl").display()
        );
    }
    Ok(summary.passed())
}
