//! Command-line front end.
//!
//! Exit codes: 0 the MLE exists, 3 it does not, 4 the approximations leave it
//! open, 1 any error (including usage errors). `simulate` and `model` exit 0
//! on success.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use crate::approx::{compare, inner_approx, inner_completions, outer_approx, CompletionKind, InnerConfig, OuterConfig, StrategyConfig};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimate::{self, classify, emle_report, emle_with, select_mu_basis, FitReport, FitTarget, Knowledge, OptimOptions, StepRule};
use crate::facial::{facial_closure, FacialOptions, FacialSet};
use crate::implicit::{iterate_two_families, Family};
use crate::linprog::Mode;
use crate::model::Model;
use crate::sim::{run_experiment, ExperimentConfig, ModelRef};
use crate::table::{read_counts_csv, Cell, CellSet, Counts, EXPLICIT_CAP};

pub const EXIT_EXISTS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_EXISTS: i32 = 3;
pub const EXIT_UNDETERMINED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "hierface", version, about = "Existence of the MLE in hierarchical log-linear models")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Facial set of the data support; exit 0 if the MLE exists, 3 if not.
    Check(CheckArgs),
    /// Fit parameters and report estimates with their status.
    Fit(FitArgs),
    /// Run a simulation experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Describe a model file.
    Model(ModelArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckMethod {
    Exact,
    Inner,
    Outer,
    Sandwich,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Rational pivoting throughout instead of verified floating point.
    #[arg(long)]
    pub exact_arith: bool,
    /// Largest cell space enumerated explicitly.
    #[arg(long, default_value_t = EXPLICIT_CAP)]
    pub cap: u64,
    /// Simplex iteration limit per LP.
    #[arg(long, default_value_t = 1_000_000)]
    pub lp_max_iter: usize,
    /// Skip the generator-marginal pruning before the LP.
    #[arg(long)]
    pub no_marginal_bound: bool,
}

impl SolverArgs {
    fn options(&self) -> FacialOptions {
        FacialOptions {
            mode: if self.exact_arith { Mode::Exact } else { Mode::Float },
            cap: self.cap,
            max_iter: self.lp_max_iter,
            marginal_bound: !self.no_marginal_bound,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct StrategyArgs {
    /// JSON strategy block; overrides the flags below.
    #[arg(long)]
    pub strategies: Option<PathBuf>,
    /// `none`, `all-minimal`, `min-part-size[:K]` or `grid-regular`.
    #[arg(long)]
    pub inner_strategy: Option<String>,
    /// `fixed-k[:K]`, `balls[:K]`, `grid-3x3-all`, `grid-3x3-cover` or `grid-column-blocks[:K]`.
    #[arg(long)]
    pub outer_strategy: Option<String>,
    #[arg(long, value_enum)]
    pub completion: Option<Completion>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Completion {
    Separator,
    Parts,
}

fn split_k(s: &str) -> Result<(String, Option<usize>)> {
    match s.split_once(':') {
        Some((name, k)) => Ok((name.to_string(), Some(k.parse().map_err(|_| Error::Config(format!("bad strategy parameter in `{s}`")))?))),
        None => Ok((s.to_string(), None)),
    }
}

impl StrategyArgs {
    fn config(&self, model: &Model) -> Result<StrategyConfig> {
        if let Some(p) = &self.strategies {
            return Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?);
        }
        let mut cfg = StrategyConfig::default_for(&model.complex);
        if let Some(s) = &self.inner_strategy {
            let (strategy, k) = split_k(s)?;
            cfg.inner = InnerConfig { strategy, k, ..cfg.inner };
        }
        if let Some(s) = &self.outer_strategy {
            let (strategy, k) = split_k(s)?;
            cfg.outer = OuterConfig { strategy, k };
        }
        if let Some(c) = self.completion {
            cfg.inner.completion = match c {
                Completion::Separator => CompletionKind::Separator,
                Completion::Parts => CompletionKind::Parts,
            };
        }
        if let Some(r) = self.max_rounds {
            cfg.inner.max_rounds = r;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = CheckMethod::Exact)]
    pub method: CheckMethod,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    /// Projection-based inner/outer sets for grids beyond the cap.
    #[arg(long)]
    pub implicit: bool,
    /// Separator columns of the first family (default: even interior columns).
    #[arg(long, value_delimiter = ',')]
    pub blue: Option<Vec<usize>>,
    /// Separator columns of the second family (default: odd interior columns).
    #[arg(long, value_delimiter = ',')]
    pub red: Option<Vec<usize>>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for uniformity; the analysis is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
#[group(id = "fit_mode", multiple = false)]
pub struct FitMode {
    /// Unrestricted likelihood in `μ_L` (default).
    #[arg(long)]
    pub mle: bool,
    /// Extended MLE on the exact facial set.
    #[arg(long)]
    pub emle: bool,
    /// Likelihood restricted to the outer approximation.
    #[arg(long)]
    pub restricted_f2: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Step {
    Newton,
    Diagonal,
    Gradient,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub mode: FitMode,
    /// A facial-set report whose `cells` are used as the exact facial set.
    #[arg(long)]
    pub facial: Option<PathBuf>,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = estimate::TOL_GRAD)]
    pub tol_grad: f64,
    #[arg(long, default_value_t = estimate::TOL_MOMENT)]
    pub tol_moment: f64,
    #[arg(long, default_value_t = estimate::MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = Step::Newton)]
    pub step: Step,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for `summary.csv` and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Integers that fit in `i64` are emitted as numbers, larger ones as strings.
fn int_json(x: &BigInt) -> Value {
    x.to_i64().map_or_else(|| Value::String(x.to_string()), Value::from)
}

fn cell_json(c: Cell) -> Value {
    u64::try_from(c).map_or_else(|_| Value::String(c.to_string()), Value::from)
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateJson {
    /// One coefficient per row of `A`, in row order.
    pub coeffs: Vec<Value>,
    pub constant: Value,
    pub rows: Vec<String>,
}

pub fn certificate_json(design: &Design, g: &[BigInt]) -> CertificateJson {
    CertificateJson {
        coeffs: g[1..].iter().map(int_json).collect(),
        constant: int_json(&g[0]),
        rows: (0..design.n_rows()).map(|j| design.row_label(j)).collect(),
    }
}

/// `{cells, size, dimension, certificate, mle_exists}` plus method details.
#[derive(Clone, Debug, Serialize)]
pub struct FacialReport {
    pub method: String,
    pub cells: Value,
    pub size: Option<u64>,
    pub dimension: Option<usize>,
    pub certificate: Vec<CertificateJson>,
    pub mle_exists: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implicit: Option<Value>,
}

impl FacialReport {
    fn from_set(method: &str, design: &Design, f: &FacialSet, mle_exists: Option<bool>) -> FacialReport {
        FacialReport {
            method: method.into(),
            cells: Value::Array(f.cells.iter().map(cell_json).collect()),
            size: Some(f.cells.len() as u64),
            dimension: Some(f.dimension),
            certificate: f.certificate.iter().map(|g| certificate_json(design, g)).collect(),
            mle_exists,
            inner: None,
            comparison: None,
            implicit: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        exit_for(self.mle_exists)
    }
}

fn exit_for(mle_exists: Option<bool>) -> i32 {
    match mle_exists {
        Some(true) => EXIT_EXISTS,
        Some(false) => EXIT_NOT_EXISTS,
        None => EXIT_UNDETERMINED,
    }
}

fn load(model: &Path, data: &Path) -> Result<(Model, Design, Counts)> {
    let m = Model::load(model)?;
    let d = m.design()?;
    let c = read_counts_csv(data, &m.schema)?;
    if c.total() == 0 {
        return Err(Error::NoObservations);
    }
    Ok((m, d, c))
}

fn set_json(design: &Design, cells: &CellSet) -> Value {
    let rank = if cells.is_empty() { 0 } else { design.rank_cells(cells).0 };
    json!({ "cells": cells.iter().map(cell_json).collect::<Vec<_>>(), "size": cells.len(), "dimension": rank.saturating_sub(1) })
}

fn default_families(model: &Model, args: &CheckArgs) -> Result<(Family, Family)> {
    let g = model.complex.grid().ok_or(Error::NoGrid)?;
    let interior = |parity: usize| (1..g.cols.saturating_sub(1)).filter(|c| c % 2 == parity).collect::<Vec<_>>();
    let blue = args.blue.clone().unwrap_or_else(|| interior(0));
    let red = args.red.clone().unwrap_or_else(|| interior(1));
    Ok((Family::grid_columns(&model.complex, &blue)?, Family::grid_columns(&model.complex, &red)?))
}

pub fn check(args: &CheckArgs) -> Result<FacialReport> {
    let (model, design, counts) = load(&args.model, &args.data)?;
    let opts = args.solver.options();
    let i_plus = counts.support();
    if args.implicit {
        let (blue, red) = default_families(&model, args)?;
        let max_rounds = args.strategy.max_rounds.unwrap_or(10);
        let res = iterate_two_families(&design, &i_plus, &blue, &red, max_rounds, &opts)?;
        let mle_exists = if !res.outer.is_full() {
            Some(false)
        } else if res.inner.is_full() {
            Some(true)
        } else {
            None
        };
        return Ok(FacialReport {
            method: "implicit".into(),
            cells: Value::String("implicit".into()),
            size: None,
            dimension: None,
            certificate: Vec::new(),
            mle_exists,
            inner: None,
            comparison: None,
            implicit: Some(json!({
                "inner": res.inner.to_json(&model.complex),
                "outer": res.outer.to_json(&model.complex),
                "rounds": res.rounds,
                "stable": res.stable,
                "f1_eq_f2": res.f1_eq_f2(),
            })),
        });
    }
    let size = design.space().explicit_size(opts.cap).map_err(|e| match e {
        Error::CapExceeded { size, cap } => {
            Error::Config(format!("cell space of size {size} exceeds the explicit cap {cap}; use --implicit"))
        }
        other => other,
    })?;
    let full = |f: &CellSet| f.len() as u64 == size;
    match args.method {
        CheckMethod::Exact => {
            let f = facial_closure(&design, &i_plus, &opts)?;
            let exists = full(&f.cells);
            Ok(FacialReport::from_set("exact", &design, &f, Some(exists)))
        }
        CheckMethod::Inner => {
            let cfg = args.strategy.config(&model)?;
            let inner = inner_approx(&design, &i_plus, &inner_completions(&model.complex, &cfg.inner)?, cfg.inner.max_rounds, &opts)?;
            let f = FacialSet { dimension: design.rank_cells(&inner.cells).0 - 1, cells: inner.cells, certificate: None };
            let exists = full(&f.cells).then_some(true);
            let mut r = FacialReport::from_set("inner", &design, &f, exists);
            r.comparison = Some(json!({ "rounds": inner.rounds, "stable": inner.stable }));
            Ok(r)
        }
        CheckMethod::Outer => {
            let cfg = args.strategy.config(&model)?;
            let f = outer_approx(&design, &i_plus, &cfg.outer.cover(&model.complex)?, &opts)?;
            let exists = (!full(&f.cells)).then_some(false);
            Ok(FacialReport::from_set("outer", &design, &f, exists))
        }
        CheckMethod::Sandwich => {
            let cfg = args.strategy.config(&model)?;
            let inner = inner_approx(&design, &i_plus, &inner_completions(&model.complex, &cfg.inner)?, cfg.inner.max_rounds, &opts)?;
            let outer = outer_approx(&design, &i_plus, &cfg.outer.cover(&model.complex)?, &opts)?;
            let cmp = compare(&design, &inner.cells, &outer.cells)?;
            let exists = if !full(&outer.cells) {
                Some(false)
            } else if full(&inner.cells) {
                Some(true)
            } else {
                None
            };
            let mut r = FacialReport::from_set("sandwich", &design, &outer, exists);
            r.inner = Some(set_json(&design, &inner.cells));
            r.comparison = Some(json!({
                "rank1": cmp.rank1,
                "rank2": cmp.rank2,
                "determined": cmp.determined,
                "codim_bound": cmp.codim_bound,
                "rounds": inner.rounds,
                "stable": inner.stable,
            }));
            Ok(r)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbabilityRow {
    pub cell_index: String,
    pub label: String,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitOutput {
    pub mode: String,
    #[serde(flatten)]
    pub report: FitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<ProbabilityRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_error: Option<f64>,
}

impl FitOutput {
    pub fn exit_code(&self) -> i32 {
        exit_for(self.report.mle_exists)
    }
}

fn read_facial(path: &Path) -> Result<CellSet> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let bad = || Error::Malformed("facial report needs an explicit `cells` array".into());
    v["cells"]
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|c| match c {
            Value::Number(n) => n.as_u64().map(|x| x as Cell).ok_or_else(bad),
            Value::String(s) => s.parse::<Cell>().map_err(|_| bad()),
            _ => Err(bad()),
        })
        .collect::<Result<Vec<_>>>()
        .map(CellSet::from_vec)
}

pub fn fit(args: &FitArgs) -> Result<FitOutput> {
    let (model, design, counts) = load(&args.model, &args.data)?;
    let opts = args.solver.options();
    let size = design.space().explicit_size(opts.cap)?;
    let optim = OptimOptions {
        tol_grad: args.tol_grad,
        max_iter: args.max_iter,
        tol_moment: args.tol_moment,
        step: match args.step {
            Step::Newton => StepRule::Newton,
            Step::Diagonal => StepRule::Diagonal,
            Step::Gradient => StepRule::Gradient,
        },
    };
    let exact_ft = || -> Result<CellSet> {
        match &args.facial {
            Some(p) => read_facial(p),
            None => Ok(facial_closure(&design, &counts.support(), &opts)?.cells),
        }
    };
    if args.mode.restricted_f2 {
        let cfg = args.strategy.config(&model)?;
        let i_plus = counts.support();
        let inner = inner_approx(&design, &i_plus, &inner_completions(&model.complex, &cfg.inner)?, cfg.inner.max_rounds, &opts)?;
        let outer = outer_approx(&design, &i_plus, &cfg.outer.cover(&model.complex)?, &opts)?;
        let basis = select_mu_basis(&design, &counts, &inner.cells, &outer.cells)?;
        let mut report = estimate::fit(&design, &counts, &basis, FitTarget::RestrictedF2, &optim)?;
        classify(&basis, &mut report, Knowledge::Sandwich)?;
        report.mle_exists = if outer.cells.len() as u64 != size {
            Some(false)
        } else if inner.cells.len() as u64 == size {
            Some(true)
        } else {
            None
        };
        return Ok(FitOutput { mode: "restricted-f2".into(), report, probabilities: None, moment_error: None });
    }
    let ft = exact_ft()?;
    let exists = ft.len() as u64 == size;
    if args.mode.emle {
        let e = emle_with(&design, &counts, &ft, &optim)?;
        let mut report = emle_report(&design, &counts, &e)?;
        classify(&e.basis, &mut report, Knowledge::FtKnown)?;
        report.mle_exists = Some(exists);
        report.dim_ft = Some(e.basis.l1.len());
        let probabilities = e
            .p
            .iter()
            .map(|&(c, p)| ProbabilityRow { cell_index: c.to_string(), label: design.schema().cell_label(c), p })
            .collect();
        return Ok(FitOutput { mode: "emle".into(), report, probabilities: Some(probabilities), moment_error: Some(e.moment_error) });
    }
    let basis = select_mu_basis(&design, &counts, &ft, &ft)?;
    let mut report = estimate::fit(&design, &counts, &basis, FitTarget::Unrestricted, &optim)?;
    classify(&basis, &mut report, Knowledge::FtKnown)?;
    report.mle_exists = Some(exists);
    Ok(FitOutput { mode: "mle".into(), report, probabilities: None, moment_error: None })
}

pub fn simulate(args: &SimulateArgs) -> Result<crate::sim::ExperimentOutput> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let model = match &cfg.model {
        ModelRef::Inline(spec) => spec.build()?,
        ModelRef::Path(p) => {
            let base = args.config.parent().unwrap_or(Path::new("."));
            Model::load(&base.join(p))?
        }
    };
    let out = run_experiment(&cfg, &model, &args.solver.options())?;
    std::fs::create_dir_all(&args.out)?;
    out.write_csv(std::fs::File::create(args.out.join("summary.csv"))?)?;
    std::fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&json!({ "config": cfg, "output": out }))?)?;
    Ok(out)
}

pub fn describe_model(args: &ModelArgs) -> Result<Value> {
    let m = Model::load(&args.model)?;
    let d = m.design()?;
    let prime = m.complex.prime_components();
    let names = |sets: &[crate::complex::VSet]| sets.iter().map(|s| m.complex.names_of(*s)).collect::<Vec<_>>();
    Ok(json!({
        "model": m.spec(),
        "cells": d.space().size().to_string(),
        "parameters": d.n_rows(),
        "decomposable": m.complex.is_decomposable().is_some(),
        "prime_components": names(&prime.components),
        "complete_separators": names(&prime.separators),
    }))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(std::io::stdout(), "{text}")?,
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Check(a) => {
            let r = check(a)?;
            emit(&r, a.out.as_deref())?;
            Ok(r.exit_code())
        }
        Command::Fit(a) => {
            let r = fit(a)?;
            emit(&r, a.out.as_deref())?;
            Ok(r.exit_code())
        }
        Command::Simulate(a) => {
            let out = simulate(a)?;
            print!("{}", out.csv_string()?);
            Ok(EXIT_EXISTS)
        }
        Command::Model(a) => {
            emit(&describe_model(a)?, a.out.as_deref())?;
            Ok(EXIT_EXISTS)
        }
    }
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_EXISTS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
