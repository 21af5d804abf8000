use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use nczeta::integrate::reduce;
use nczeta::modular::{
    assemble_premain, compute_k, eval_spectral_tau, expected_f, expected_h, terms_to_text, SpectralFn,
};
use nczeta::ncalg::NCPoly;
use nczeta::oracle::{run_battery, PipelineTerms, Tolerances};
use nczeta::pipeline::{parametrix_cached, pretty_nc, run_pipeline, Fault, PipelineConfig, PipelineReport, Stage};
use nczeta::symbolcalc::Calculus;

const CACHE_ENV: &str = "NCZETA_CACHE_DIR";

#[derive(Parser)]
#[command(name = "nczeta", version, about = "Exact symbolic and numerical checks of the curved noncommutative torus zeta value")]
struct Cli {
    /// Cache directory for the parametrix; defaults to $NCZETA_CACHE_DIR, no cache if unset.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Symbol,
    Parametrix,
    Reduce,
    Modular,
}

#[derive(Clone, Copy, ValueEnum)]
enum FnName {
    F,
    H,
    K,
    L1,
    L2,
    L3,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the symbol of k∆k and check it against the product of symbols.
    BuildSymbol {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Compute the parametrix, check the composition and write b_N as a term list.
    Parametrix {
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(i32).range(0..=2))]
        order: i32,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the polar, angular and radial reduction of a b2 term list.
    Reduce {
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON output (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline and print its certificates.
    Verify {
        /// Run every stage (the default).
        #[arg(long, conflicts_with = "stage")]
        all: bool,
        /// Stop after this stage.
        #[arg(long, value_enum)]
        stage: Option<StageArg>,
        /// Directory of golden term lists to compare against.
        #[arg(long)]
        golden: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Perturb one coefficient, e.g. `r-list:3`. Stages: b2, r-list, direct, t, modular, slots.
        #[arg(long)]
        inject_fault: Option<Fault>,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random matrix-model battery.
    Oracle {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Single dimension; overrides --dims.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative tolerance for the trace identities.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate f, L1..L3 at u, or h, K at x.
    #[command(allow_negative_numbers = true)]
    EvalSpectral {
        #[arg(long = "fn", value_enum)]
        name: FnName,
        #[arg(long, required_unless_present = "x", conflicts_with = "x")]
        u: Option<f64>,
        #[arg(long)]
        x: Option<f64>,
    },
    /// Full verification with goldens plus the oracle battery.
    Report {
        #[arg(long)]
        golden: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

/// Failure that is not a verification result: bad input, I/O.
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

type CmdResult = Result<bool, UsageError>;

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), UsageError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| UsageError(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn default_golden() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "tests", "golden"].iter().collect()
}

fn build_symbol(format: Format) -> CmdResult {
    let calc = Calculus::symbolic();
    let a = calc.laplacian_symbol();
    let ok = nczeta::symbolcalc::laplacian_by_products(&calc)? == a;
    match format {
        Format::Text => {
            for ord in [2, 1, 0] {
                println!("a{ord} = {}", pretty_nc(&a.component(ord)));
            }
            println!("{} symbol product check", if ok { "PASS" } else { "FAIL" });
        }
        Format::Json => {
            let v = json!({
                "a2": a.component(2).to_term_list(),
                "a1": a.component(1).to_term_list(),
                "a0": a.component(0).to_term_list(),
                "passed": ok,
            });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(ok)
}

fn parametrix(order: i32, out: Option<&Path>, cache: Option<&Path>) -> CmdResult {
    let (b, _) = if order == 2 {
        parametrix_cached(2, cache)?
    } else {
        (Calculus::symbolic().parametrix(order)?, false)
    };
    let rep = Calculus::symbolic().composition_check(&b, order)?;
    let bn = b.component(-2 - order);
    write_or_print(out, &bn.to_term_list())?;
    for (ord, ok) in &rep.orders {
        eprintln!("{} composition order {ord}", if *ok { "PASS" } else { "FAIL" });
    }
    eprintln!("b{order}: {} terms", bn.len());
    Ok(rep.passed())
}

fn reduce_cmd(input: &Path, out: Option<&Path>) -> CmdResult {
    let text = std::fs::read_to_string(input).map_err(|e| UsageError(format!("{}: {e}", input.display())))?;
    let b2 = NCPoly::parse_term_list(&text).map_err(|e| UsageError(format!("{}: {e}", input.display())))?;
    let r = match reduce(&b2) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("FAIL reduction: {e}");
            return Ok(false);
        }
    };
    let premain = assemble_premain(&r.all_left_result, &r.modular);
    let v = json!({
        "r_list": r.r_list.to_term_list(),
        "all_left": r.all_left.to_term_list(),
        "single_middle": r.single_middle.to_term_list(),
        "squared_middle": r.squared_middle.to_term_list(),
        "all_left_result": r.all_left_result.to_term_list(),
        "t": r.t.to_term_list(),
        "modular_terms": terms_to_text(&r.modular),
        "split_symmetric": terms_to_text(&r.split_symmetric),
        "split_direct": terms_to_text(&r.split_direct),
        "slots": premain.as_ref().map(|e| e.to_text()).ok(),
    });
    write_or_print(out, &format!("{}\n", serde_json::to_string_pretty(&v)?))?;
    if let Err(e) = &premain {
        eprintln!("FAIL assembly: {e}");
    }
    Ok(premain.is_ok())
}

fn print_report(rep: &PipelineReport, format: Format, modular_only: bool) -> Result<(), UsageError> {
    match format {
        Format::Text => print!("{}", rep.render_text()),
        Format::Json if modular_only => println!("{}", serde_json::to_string_pretty(&rep.modular)?),
        Format::Json => println!("{}", serde_json::to_string_pretty(rep)?),
    }
    Ok(())
}

fn verify(
    stage: Option<StageArg>,
    golden: Option<PathBuf>,
    format: Format,
    fault: Option<Fault>,
    out: Option<&Path>,
    cache: Option<PathBuf>,
) -> CmdResult {
    let through = match stage {
        Some(StageArg::Symbol) => Stage::Symbol,
        Some(StageArg::Parametrix) => Stage::Parametrix,
        Some(StageArg::Reduce) => Stage::Reduce,
        Some(StageArg::Modular) | None => Stage::Modular,
    };
    let cfg = PipelineConfig {
        through,
        golden_dir: golden,
        cache_dir: cache,
        fault,
    };
    let (rep, _) = run_pipeline(&cfg)?;
    print_report(&rep, format, matches!(stage, Some(StageArg::Modular)))?;
    if let Some(p) = out {
        write_or_print(Some(p), &format!("{}\n", serde_json::to_string_pretty(&rep)?))?;
    }
    if !rep.passed {
        if let Some(c) = rep.failing().first() {
            eprintln!("failed at {}: {}", c.name, c.detail);
        }
    }
    Ok(rep.passed)
}

fn pipeline_terms(cache: Option<&Path>) -> Result<PipelineTerms, UsageError> {
    let (b, _) = parametrix_cached(2, cache)?;
    let r = reduce(&b.component(-4))?;
    Ok(PipelineTerms {
        direct: r.all_left_result,
        modular: r.modular,
        split_symmetric: r.split_symmetric,
        split_direct: r.split_direct,
    })
}

fn oracle(trials: usize, dims: Vec<usize>, seed: u64, tol: f64, out: Option<&Path>, cache: Option<&Path>) -> CmdResult {
    if dims.iter().any(|&d| d < 2) || dims.is_empty() {
        return Err(UsageError("dimensions must be at least 2".into()));
    }
    let terms = pipeline_terms(cache)?;
    let tol = Tolerances {
        relative: tol,
        ..Tolerances::default()
    };
    let rep = run_battery(seed, trials, &dims, &terms, &tol)?;
    if let Some(p) = out {
        write_or_print(Some(p), &format!("{}\n", serde_json::to_string_pretty(&rep)?))?;
    }
    for (name, v) in [
        ("dm_integral", rep.worst(|t| t.dm_integral)),
        ("final identity", rep.worst(|t| t.final_identity)),
        ("antisymmetry", rep.worst(|t| t.antisymmetry)),
        ("regrouping", rep.worst(|t| t.premain_vs_regrouped)),
        ("split variants", rep.worst(|t| t.split_variants)),
        ("log transport", rep.worst(|t| t.log_transport)),
        ("log delta", rep.worst(|t| t.log_delta)),
        ("trace", rep.worst(|t| t.trace_delta)),
        ("twist", rep.worst(|t| t.twist)),
    ] {
        println!("worst {name}: {v:.3e}");
    }
    let failed: Vec<u64> = rep.trials.iter().filter(|t| !t.passed).map(|t| t.seed).collect();
    println!(
        "{} {} trials{}",
        if rep.passed { "PASS" } else { "FAIL" },
        rep.trials.len(),
        if failed.is_empty() { String::new() } else { format!(", failing seeds {failed:?}") }
    );
    Ok(rep.passed)
}

fn eval_spectral(name: FnName, u: Option<f64>, x: Option<f64>) -> CmdResult {
    let (u, x) = match (u, x) {
        (Some(u), _) => (u, u.ln()),
        (None, Some(x)) => (x.exp(), x),
        (None, None) => return Err(UsageError("one of --u, --x is required".into())),
    };
    if !(u > 0.0) || !u.is_finite() {
        return Err(UsageError(format!("u must be positive and finite, got {u}")));
    }
    let v = match name {
        FnName::F => eval_spectral_tau(&expected_f(), u, 0.0, 1.0)?,
        FnName::L1 => eval_spectral_tau(&SpectralFn::log_m(1), u, 0.0, 1.0)?,
        FnName::L2 => eval_spectral_tau(&SpectralFn::log_m(2), u, 0.0, 1.0)?,
        FnName::L3 => eval_spectral_tau(&SpectralFn::log_m(3), u, 0.0, 1.0)?,
        FnName::H => expected_h().eval_stable(x),
        FnName::K => compute_k(&expected_h()).eval_stable(x),
    };
    println!("{v:.17e}");
    Ok(true)
}

fn report(golden: Option<PathBuf>, trials: usize, format: Format, cache: Option<PathBuf>) -> CmdResult {
    let cfg = PipelineConfig {
        golden_dir: Some(golden.unwrap_or_else(default_golden)),
        cache_dir: cache.clone(),
        ..Default::default()
    };
    let (rep, art) = run_pipeline(&cfg)?;
    let terms = PipelineTerms {
        direct: art.all_left_result,
        modular: art.modular.modular,
        split_symmetric: art.modular.split_symmetric,
        split_direct: art.modular.split_direct,
    };
    let bat = run_battery(0, trials, &[3, 4, 5], &terms, &Tolerances::default())?;
    match format {
        Format::Text => {
            print!("{}", rep.render_text());
            println!(
                "{} oracle battery: {} trials, worst final identity {:.3e}, worst dm_integral {:.3e}",
                if bat.passed { "PASS" } else { "FAIL" },
                bat.trials.len(),
                bat.worst(|t| t.final_identity),
                bat.worst(|t| t.dm_integral)
            );
        }
        Format::Json => {
            let v = json!({ "pipeline": rep, "oracle": bat });
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(rep.passed && bat.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cache = cli.cache_dir.or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from));
    let res = match cli.cmd {
        Cmd::BuildSymbol { format } => build_symbol(format),
        Cmd::Parametrix { order, out } => parametrix(order, out.as_deref(), cache.as_deref()),
        Cmd::Reduce { input, out } => reduce_cmd(&input, out.as_deref()),
        Cmd::Verify {
            all: _,
            stage,
            golden,
            format,
            inject_fault,
            out,
        } => verify(stage, golden, format, inject_fault, out.as_deref(), cache),
        Cmd::Oracle {
            trials,
            dim,
            dims,
            seed,
            tol,
            out,
        } => oracle(trials, dim.map_or(dims, |d| vec![d]), seed, tol, out.as_deref(), cache.as_deref()),
        Cmd::EvalSpectral { name, u, x } => eval_spectral(name, u, x),
        Cmd::Report { golden, trials, format } => report(golden, trials, format, cache),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
