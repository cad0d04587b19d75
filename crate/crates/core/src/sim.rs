//! Seeded sampling from hierarchical models and the simulation harness.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`): the experiment seed keys the
//! generator and `(sample-size index << 32) | replicate` selects the stream,
//! so each replicate is reproducible on its own and replicates can run in any
//! order.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{sandwich, StrategyConfig};
use crate::complex::{grid_complex, VSet};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::facial::{facial_closure, FacialOptions};
use crate::implicit::{iterate_two_families, Family};
use crate::model::{Model, ModelSpec};
use crate::table::{Cell, CellSet, Counts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaSource {
    StandardNormal,
    Zero,
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// One parameter per row of `A` (the constant is not a parameter).
pub fn draw_theta(design: &Design, source: ThetaSource, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match source {
        ThetaSource::Zero => vec![0.0; design.n_rows()],
        ThetaSource::StandardNormal => (0..design.n_rows()).map(|_| StandardNormal.sample(rng)).collect(),
    }
}

/// `p_θ` over all of `I`, normalized with a max shift.
pub fn probabilities(design: &Design, theta: &[f64], cap: u64) -> Result<Vec<f64>> {
    if theta.len() != design.n_rows() {
        return Err(Error::Dimension { expected: design.n_rows(), got: theta.len() });
    }
    let size = design.space().explicit_size(cap)?;
    let lp: Vec<f64> = (0..size as Cell)
        .into_par_iter()
        .map(|c| design.column(c).iter().map(|&j| theta[j as usize]).sum())
        .collect();
    let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lp.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = w.iter().sum();
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Overflow);
    }
    Ok(w.into_iter().map(|x| x / z).collect())
}

fn tally(design: &Design, draws: impl IntoIterator<Item = Cell>) -> Result<Counts> {
    let mut m: HashMap<Cell, u64> = HashMap::new();
    for c in draws {
        *m.entry(c).or_default() += 1;
    }
    let mut pairs: Vec<(Cell, u64)> = m.into_iter().collect();
    pairs.sort_unstable();
    Counts::from_pairs(design.schema().clone(), pairs)
}

/// `n` i.i.d. draws from `p_θ` over the enumerated cell space.
pub fn sample_counts(design: &Design, theta: &[f64], n: u64, rng: &mut ChaCha8Rng, cap: u64) -> Result<Counts> {
    let p = probabilities(design, theta, cap)?;
    let dist = WeightedIndex::new(&p).map_err(|e| Error::Config(e.to_string()))?;
    tally(design, (0..n).map(|_| dist.sample(rng) as Cell))
}

/// Exact sampler for binary grid models, treating the grid as a Markov chain
/// of columns (`2^rows` states each). Works far beyond the explicit cap.
pub struct ColumnChainSampler {
    rows: usize,
    cols: usize,
    first: WeightedIndex<f64>,
    /// `next[c][s]`: law of column `c + 1` given column `c` in state `s`.
    next: Vec<Vec<WeightedIndex<f64>>>,
}

impl ColumnChainSampler {
    pub fn new(design: &Design, theta: &[f64]) -> Result<ColumnChainSampler> {
        let g = design.complex().grid().ok_or(Error::NoGrid)?;
        let (rows, cols) = (g.rows, g.cols);
        if design.space().radix().iter().any(|&r| r != 2) {
            return Err(Error::Config("column sampler needs binary variables".into()));
        }
        if design.complex().generators() != grid_complex(rows, cols)?.generators() {
            return Err(Error::Config("column sampler needs the plain grid complex".into()));
        }
        if rows > 16 {
            return Err(Error::Config("column sampler supports at most 16 rows".into()));
        }
        if theta.len() != design.n_rows() {
            return Err(Error::Dimension { expected: design.n_rows(), got: theta.len() });
        }
        let param = |s: VSet| -> f64 {
            let cell = s.iter().fold(0 as Cell, |c, v| c | (1 << v));
            design.row_of(s, cell).map_or(0.0, |j| theta[j])
        };
        let states = 1usize << rows;
        let bit = |s: usize, r: usize| s >> r & 1 == 1;
        // within-column and between-column energies
        let phi: Vec<Vec<f64>> = (0..cols)
            .map(|c| {
                let vt: Vec<f64> = (0..rows).map(|r| param(VSet::singleton(g.vertex(r, c)))).collect();
                let et: Vec<f64> = (0..rows.saturating_sub(1))
                    .map(|r| param(VSet::singleton(g.vertex(r, c)).with(g.vertex(r + 1, c))))
                    .collect();
                (0..states)
                    .map(|s| {
                        (0..rows).filter(|&r| bit(s, r)).map(|r| vt[r]).sum::<f64>()
                            + (0..rows.saturating_sub(1)).filter(|&r| bit(s, r) && bit(s, r + 1)).map(|r| et[r]).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let horiz: Vec<Vec<f64>> = (0..cols.saturating_sub(1))
            .map(|c| (0..rows).map(|r| param(VSet::singleton(g.vertex(r, c)).with(g.vertex(r, c + 1)))).collect())
            .collect();
        let psi = |c: usize, s: usize, t: usize| -> f64 { (0..rows).filter(|&r| bit(s & t, r)).map(|r| horiz[c][r]).sum() };
        // backward log-messages
        let mut msg = vec![vec![0.0; states]; cols];
        for c in (0..cols - 1).rev() {
            for s in 0..states {
                let terms: Vec<f64> = (0..states).map(|t| psi(c, s, t) + phi[c + 1][t] + msg[c + 1][t]).collect();
                msg[c][s] = log_sum_exp(&terms);
            }
        }
        let weights = |terms: Vec<f64>| -> Result<WeightedIndex<f64>> {
            let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            WeightedIndex::new(terms.iter().map(|x| (x - m).exp())).map_err(|e| Error::Config(e.to_string()))
        };
        let first = weights((0..states).map(|s| phi[0][s] + msg[0][s]).collect())?;
        let next = (0..cols - 1)
            .map(|c| {
                (0..states)
                    .map(|s| weights((0..states).map(|t| psi(c, s, t) + phi[c + 1][t] + msg[c + 1][t]).collect()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ColumnChainSampler { rows, cols, first, next })
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Cell {
        let mut s = self.first.sample(rng);
        let mut cell = s as Cell;
        for c in 0..self.cols - 1 {
            s = self.next[c][s].sample(rng);
            cell |= (s as Cell) << ((c + 1) * self.rows);
        }
        cell
    }

    pub fn sample_counts(&self, design: &Design, n: u64, rng: &mut ChaCha8Rng) -> Result<Counts> {
        tally(design, (0..n).map(|_| self.draw(rng)))
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Explicit within the cap, column chain otherwise.
    #[default]
    Auto,
    Explicit,
    ColumnChain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Inner,
    Outer,
}

/// Two chain families of column separators for grids beyond the cap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplicitConfig {
    pub blue: Vec<usize>,
    pub red: Vec<usize>,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
}

fn default_rounds() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Inline(ModelSpec),
    Path(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelRef,
    pub theta: ThetaSource,
    pub sample_sizes: Vec<u64>,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<StrategyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implicit: Option<ImplicitConfig>,
    #[serde(default)]
    pub sampler: SamplerKind,
    /// Record wall-clock times; off keeps the output byte-identical across runs.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::Config("no sample sizes".into()));
        }
        if self.implicit.is_some() && self.methods.contains(&Method::Inner) != self.methods.contains(&Method::Outer) {
            return Err(Error::Config("implicit runs compute inner and outer together".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub sample_size: u64,
    pub replicate: usize,
    pub n_positive: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonexist: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_eq_ft: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2_eq_ft: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_eq_f2: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2_ne_full: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_f1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_ft: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_f2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stable: Option<bool>,
    pub runtime_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sample_size: u64,
    pub n_reps: usize,
    pub n_failed: usize,
    pub frac_nonexist: Option<f64>,
    #[serde(rename = "frac_F1_eq_Ft")]
    pub frac_f1_eq_ft: Option<f64>,
    #[serde(rename = "frac_F2_eq_Ft")]
    pub frac_f2_eq_ft: Option<f64>,
    #[serde(rename = "frac_F1_eq_F2")]
    pub frac_f1_eq_f2: Option<f64>,
    #[serde(rename = "frac_F2_ne_I")]
    pub frac_f2_ne_full: Option<f64>,
    pub max_rounds: Option<usize>,
    pub mean_runtime_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub summary: Vec<SummaryRow>,
    pub replicates: Vec<ReplicateRecord>,
}

enum Sampler {
    Explicit,
    Chain,
}

fn pick_sampler(design: &Design, kind: SamplerKind, cap: u64) -> Result<Sampler> {
    Ok(match kind {
        SamplerKind::Explicit => Sampler::Explicit,
        SamplerKind::ColumnChain => Sampler::Chain,
        SamplerKind::Auto if design.space().explicit_size(cap).is_ok() => Sampler::Explicit,
        SamplerKind::Auto => Sampler::Chain,
    })
}

fn draw_counts(design: &Design, theta: &[f64], n: u64, sampler: &Sampler, rng: &mut ChaCha8Rng, cap: u64) -> Result<Counts> {
    match sampler {
        Sampler::Explicit => sample_counts(design, theta, n, rng, cap),
        Sampler::Chain => ColumnChainSampler::new(design, theta)?.sample_counts(design, n, rng),
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    design: &'a Design,
    strategies: StrategyConfig,
    families: Option<(Family, Family)>,
    sampler: Sampler,
    opts: FacialOptions,
}

fn rank(design: &Design, f: &CellSet) -> usize {
    if f.is_empty() {
        0
    } else {
        design.rank_cells(f).0
    }
}

fn analyse(ctx: &Context, counts: &Counts, rec: &mut ReplicateRecord) -> Result<()> {
    let d = ctx.design;
    let i_plus = counts.support();
    rec.n_positive = i_plus.len();
    let explicit = d.space().explicit_size(ctx.opts.cap).is_ok();
    let full_size = d.space().size();
    let ft = if ctx.cfg.methods.contains(&Method::Exact) {
        d.space().explicit_size(ctx.opts.cap)?;
        let f = facial_closure(d, &i_plus, &ctx.opts)?.cells;
        rec.nonexist = Some((f.len() as u128) < full_size);
        rec.rank_ft = Some(rank(d, &f));
        Some(f)
    } else {
        None
    };
    let want_inner = ctx.cfg.methods.contains(&Method::Inner);
    let want_outer = ctx.cfg.methods.contains(&Method::Outer);
    if let Some((blue, red)) = &ctx.families {
        if !(want_inner || want_outer) {
            return Ok(());
        }
        let max_rounds = ctx.cfg.implicit.as_ref().map_or(10, |c| c.max_rounds);
        let res = iterate_two_families(d, &i_plus, blue, red, max_rounds, &ctx.opts)?;
        rec.f1_eq_f2 = Some(res.f1_eq_f2());
        rec.f2_ne_full = Some(!res.outer.is_full());
        rec.rounds = Some(res.rounds);
        rec.stable = Some(res.stable);
        if rec.nonexist.is_none() {
            rec.nonexist = rec.f2_ne_full.filter(|&x| x);
        }
        if let (Some(ft), true) = (&ft, explicit) {
            let f1 = res.inner.materialize(ctx.opts.cap)?;
            let f2 = res.outer.materialize(ctx.opts.cap)?;
            rec.f1_eq_ft = Some(&f1 == ft);
            rec.f2_eq_ft = Some(&f2 == ft);
            rec.rank_f1 = Some(rank(d, &f1));
            rec.rank_f2 = Some(rank(d, &f2));
        }
        return Ok(());
    }
    if want_inner || want_outer {
        let (inner, outer, cmp) = sandwich(d, &i_plus, &ctx.strategies, &ctx.opts)?;
        rec.rounds = Some(inner.rounds);
        rec.stable = Some(inner.stable);
        rec.rank_f1 = Some(cmp.rank1);
        rec.rank_f2 = Some(cmp.rank2);
        rec.f1_eq_f2 = Some(inner.cells == outer.cells);
        rec.f2_ne_full = Some((outer.cells.len() as u128) < full_size);
        if let Some(ft) = &ft {
            if !(i_plus.is_subset(&inner.cells) && inner.cells.is_subset(ft) && ft.is_subset(&outer.cells)) {
                return Err(Error::Invariant("sandwich inclusions fail".into()));
            }
            rec.f1_eq_ft = Some(&inner.cells == ft);
            rec.f2_eq_ft = Some(&outer.cells == ft);
        }
    }
    Ok(())
}

fn frac(recs: &[&ReplicateRecord], f: impl Fn(&ReplicateRecord) -> Option<bool>) -> Option<f64> {
    let vals: Vec<bool> = recs.iter().filter_map(|r| f(r)).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().filter(|&&b| b).count() as f64 / vals.len() as f64)
    }
}

/// Runs every replicate of every sample size; failures are recorded per replicate.
pub fn run_experiment(cfg: &ExperimentConfig, model: &Model, opts: &FacialOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let design = model.design()?;
    let families = match &cfg.implicit {
        Some(ic) => Some((Family::grid_columns(&model.complex, &ic.blue)?, Family::grid_columns(&model.complex, &ic.red)?)),
        None => None,
    };
    let strategies = cfg.strategies.clone().unwrap_or_else(|| StrategyConfig::default_for(&model.complex));
    let ctx = Context { cfg, design: &design, strategies, families, sampler: pick_sampler(&design, cfg.sampler, opts.cap)?, opts: opts.clone() };
    let jobs: Vec<(usize, u64, usize)> = cfg
        .sample_sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..cfg.replicates).map(move |r| (k, n, r)))
        .collect();
    let replicates: Vec<ReplicateRecord> = jobs
        .par_iter()
        .map(|&(k, n, r)| {
            let mut rec = ReplicateRecord { sample_size: n, replicate: r, ..Default::default() };
            let mut rng = rng_for(cfg.seed, ((k as u64) << 32) | r as u64);
            let theta = draw_theta(&design, cfg.theta, &mut rng);
            let start = Instant::now();
            let outcome = draw_counts(&design, &theta, n, &ctx.sampler, &mut rng, opts.cap).and_then(|c| analyse(&ctx, &c, &mut rec));
            if cfg.timing {
                rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            }
            if let Err(e) = outcome {
                rec.error = Some(e.to_string());
            }
            rec
        })
        .collect();
    let summary = cfg
        .sample_sizes
        .iter()
        .map(|&n| {
            let all: Vec<&ReplicateRecord> = replicates.iter().filter(|r| r.sample_size == n).collect();
            let ok: Vec<&ReplicateRecord> = all.iter().copied().filter(|r| r.error.is_none()).collect();
            SummaryRow {
                sample_size: n,
                n_reps: ok.len(),
                n_failed: all.len() - ok.len(),
                frac_nonexist: if cfg.implicit.is_some() && !cfg.methods.contains(&Method::Exact) {
                    frac(&ok, |r| r.f2_ne_full)
                } else {
                    frac(&ok, |r| r.nonexist)
                },
                frac_f1_eq_ft: frac(&ok, |r| r.f1_eq_ft),
                frac_f2_eq_ft: frac(&ok, |r| r.f2_eq_ft),
                frac_f1_eq_f2: frac(&ok, |r| r.f1_eq_f2),
                frac_f2_ne_full: frac(&ok, |r| r.f2_ne_full),
                max_rounds: ok.iter().filter_map(|r| r.rounds).max(),
                mean_runtime_ms: (cfg.timing && !ok.is_empty()).then(|| ok.iter().map(|r| r.runtime_ms).sum::<f64>() / ok.len() as f64),
            }
        })
        .collect();
    Ok(ExperimentOutput { summary, replicates })
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl ExperimentOutput {
    /// `summary.csv`; fractions not computed by the run are left empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sample_size", "n_reps", "frac_nonexist", "frac_F1_eq_Ft", "frac_F2_eq_Ft", "frac_F1_eq_F2", "mean_runtime_ms"])?;
        for r in &self.summary {
            out.write_record([
                r.sample_size.to_string(),
                r.n_reps.to_string(),
                cell(r.frac_nonexist),
                cell(r.frac_f1_eq_ft),
                cell(r.frac_f2_eq_ft),
                cell(r.frac_f1_eq_f2),
                cell(r.mean_runtime_ms),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Schema;

    fn grid_design(r: usize, c: usize) -> Design {
        let g = grid_complex(r, c).unwrap();
        Design::build(&g, &Schema::binary(g.vertex_names()).unwrap()).unwrap()
    }

    #[test]
    fn probabilities_normalize() {
        let d = grid_design(2, 3);
        let mut rng = rng_for(3, 0);
        let th = draw_theta(&d, ThetaSource::StandardNormal, &mut rng);
        let p = probabilities(&d, &th, 1 << 20).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_sampler_matches_explicit_law() {
        let d = grid_design(2, 3);
        let mut rng = rng_for(5, 1);
        let th: Vec<f64> = draw_theta(&d, ThetaSource::StandardNormal, &mut rng);
        let p = probabilities(&d, &th, 1 << 20).unwrap();
        let s = ColumnChainSampler::new(&d, &th).unwrap();
        let n = 200_000u64;
        let c = s.sample_counts(&d, n, &mut rng).unwrap();
        let chi2: f64 = p.iter().enumerate().map(|(i, &pi)| (c.get(i as Cell) as f64 - n as f64 * pi).powi(2) / (n as f64 * pi)).sum();
        // 63 degrees of freedom; the 0.999 quantile is about 103
        assert!(chi2 < 103.0, "chi2 {chi2}");
    }

    #[test]
    fn seeded_counts_repeat() {
        let d = grid_design(2, 2);
        let th = vec![0.0; d.n_rows()];
        let a = sample_counts(&d, &th, 50, &mut rng_for(9, 4), 1 << 20).unwrap();
        let b = sample_counts(&d, &th, 50, &mut rng_for(9, 4), 1 << 20).unwrap();
        assert_eq!(a.iter().collect::<Vec<_>>(), b.iter().collect::<Vec<_>>());
    }
}
