//! Inner and outer approximations of facial sets, the reducible formula and
//! the rank comparison of the two.

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{Complex, SeparatorSplit, SeparatorStrategy, VSet, DEFAULT_SEPARATOR_CAP};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::facial::{facial_closure, FacialOptions, FacialSet};
use crate::table::{intersect_lifts, project_set, Cell, CellSet, Schema};

/// A facial set stored as its projections onto the prime components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSets {
    pub parts: Vec<(VSet, CellSet)>,
}

/// Design of `Δ|w` on its own variables.
pub fn induced_design(design: &Design, w: VSet) -> Result<Design> {
    let c = design.complex().induced_subcomplex(w)?;
    Design::build(&c, &design.schema().sub(w))
}

/// `F_{Δ|w}` on `w` applied to `π_w(t)`; complete `w` needs no LP.
pub fn component_facial(design: &Design, t: &CellSet, w: VSet, opts: &FacialOptions) -> Result<CellSet> {
    let tw = project_set(design.space(), t, w);
    if design.complex().contains(w) {
        return Ok(tw);
    }
    let sub = induced_design(design, w)?;
    Ok(facial_closure(&sub, &tw, opts)?.cells)
}

/// Facial set of `t` computed component-wise along complete separators.
pub fn facial_reducible_parts(design: &Design, t: &CellSet, opts: &FacialOptions) -> Result<ComponentSets> {
    if t.is_empty() {
        return Err(Error::EmptySet);
    }
    let comps = design.complex().prime_components().components;
    let parts: Result<Vec<(VSet, CellSet)>> = comps
        .par_iter()
        .map(|&w| component_facial(design, t, w, opts).map(|f| (w, f)))
        .collect();
    Ok(ComponentSets { parts: parts? })
}

/// Explicit facial set of `t` via the prime components of the complex.
pub fn facial_reducible(design: &Design, t: &CellSet, opts: &FacialOptions) -> Result<CellSet> {
    design.space().explicit_size(opts.cap)?;
    let parts = facial_reducible_parts(design, t, opts)?;
    Ok(intersect_lifts(design.space(), &parts.parts, None))
}

/// Facial set along one complete separator given by the caller.
pub fn facial_split(design: &Design, t: &CellSet, split: &SeparatorSplit, opts: &FacialOptions) -> Result<CellSet> {
    let c = design.complex();
    if !c.is_separator(split) || !c.contains(split.s) {
        return Err(Error::NotCompleteSeparator(c.names_of(split.s).join(",")));
    }
    design.space().explicit_size(opts.cap)?;
    let mut parts = Vec::new();
    for w in [split.v1, split.v2] {
        let sub = induced_design(design, w)?;
        let tw = project_set(design.space(), t, w);
        let f = facial_reducible(&sub, &tw, opts)?;
        parts.push((w, f));
    }
    Ok(intersect_lifts(design.space(), &parts, None))
}

/// Which sets a separator completion adds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompletionKind {
    /// `Δ_S`: complete the separator only.
    #[default]
    Separator,
    /// `Δ_{V1,V2}`: complete both parts.
    Parts,
}

/// A super-complex of `Δ` obtained by completing some vertex sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub sets: Vec<VSet>,
}

impl Completion {
    pub fn from_split(split: &SeparatorSplit, kind: CompletionKind) -> Completion {
        match kind {
            CompletionKind::Separator => Completion { sets: vec![split.s] },
            CompletionKind::Parts => Completion { sets: vec![split.v1, split.v2] },
        }
    }

    /// Completes several separators at once.
    pub fn from_splits(splits: &[SeparatorSplit], kind: CompletionKind) -> Completion {
        let mut sets = Vec::new();
        for s in splits {
            sets.extend(Completion::from_split(s, kind).sets);
        }
        Completion { sets }
    }

    pub fn design(&self, design: &Design) -> Result<Design> {
        let c = design.complex().complete_sets(&self.sets)?;
        Design::build(&c, design.schema())
    }
}

#[derive(Clone, Debug)]
pub struct InnerResult {
    pub cells: CellSet,
    /// Full cycles over the completions, the last one without growth included.
    pub rounds: usize,
    pub stable: bool,
}

/// Iterates `G ← F_{Δ_k}(G)` over the completions until a full cycle adds nothing.
pub fn inner_approx(
    design: &Design,
    i_plus: &CellSet,
    completions: &[Completion],
    max_rounds: usize,
    opts: &FacialOptions,
) -> Result<InnerResult> {
    if i_plus.is_empty() {
        return Err(Error::EmptySet);
    }
    let designs: Vec<Design> = completions.iter().map(|c| c.design(design)).collect::<Result<_>>()?;
    let mut g = i_plus.clone();
    if designs.is_empty() {
        return Ok(InnerResult { cells: g, rounds: 0, stable: true });
    }
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let before = g.len();
        for d in &designs {
            g = facial_reducible(d, &g, opts)?;
        }
        if g.len() == before {
            return Ok(InnerResult { cells: g, rounds, stable: true });
        }
    }
    Ok(InnerResult { cells: g, rounds, stable: false })
}

/// Splits for an inner strategy, checked to be separators of `Δ`.
pub fn inner_completions(complex: &Complex, cfg: &InnerConfig) -> Result<Vec<Completion>> {
    let strategy = match cfg.strategy.as_str() {
        "none" => return Ok(Vec::new()),
        "all-minimal" => SeparatorStrategy::AllMinimal,
        "min-part-size" => SeparatorStrategy::MinPartSize(cfg.k.unwrap_or(3)),
        "grid-regular" => SeparatorStrategy::GridRegular,
        other => return Err(Error::Config(format!("unknown inner strategy `{other}`"))),
    };
    let list = complex.enumerate_separators(strategy, cfg.cap.unwrap_or(DEFAULT_SEPARATOR_CAP))?;
    Ok(list.splits.iter().map(|s| Completion::from_split(s, cfg.completion)).collect())
}

/// Checks a user-supplied split list.
pub fn splits_to_completions(complex: &Complex, splits: &[SeparatorSplit], kind: CompletionKind) -> Result<Vec<Completion>> {
    splits
        .iter()
        .map(|s| {
            if complex.is_separator(s) {
                Ok(Completion::from_split(s, kind))
            } else {
                Err(Error::NotSeparator(complex.names_of(s.s).join(",")))
            }
        })
        .collect()
}

/// Per-block facial sets `F'_{Δ|V_k}(π_{V_k} I_+)` of an outer approximation.
pub fn outer_parts(design: &Design, i_plus: &CellSet, cover: &[VSet], opts: &FacialOptions) -> Result<Vec<(VSet, CellSet)>> {
    check_cover(design.complex(), cover)?;
    cover
        .par_iter()
        .map(|&w| {
            let f = if design.complex().contains(w) {
                project_set(design.space(), i_plus, w)
            } else {
                let sub = induced_design(design, w)?;
                facial_closure(&sub, &project_set(design.space(), i_plus, w), opts)?.cells
            };
            Ok((w, f))
        })
        .collect()
}

/// Every generator must lie inside some block.
pub fn check_cover(complex: &Complex, cover: &[VSet]) -> Result<()> {
    for &g in complex.generators() {
        if !cover.iter().any(|w| g.is_subset(*w)) {
            return Err(Error::CoverMissesGenerator(complex.names_of(g).join(",")));
        }
    }
    Ok(())
}

/// Outer approximation `F_2 = ∩_k π_{V_k}^{-1}(F'_{Δ|V_k}(π_{V_k} I_+))` with a
/// certificate summed from the lifted block certificates.
pub fn outer_approx(design: &Design, i_plus: &CellSet, cover: &[VSet], opts: &FacialOptions) -> Result<FacialSet> {
    if i_plus.is_empty() {
        return Err(Error::EmptySet);
    }
    design.space().explicit_size(opts.cap)?;
    check_cover(design.complex(), cover)?;
    let blocks: Vec<(VSet, FacialSet)> = cover
        .par_iter()
        .map(|&w| {
            let sub = induced_design(design, w)?;
            let f = facial_closure(&sub, &project_set(design.space(), i_plus, w), opts)?;
            Ok((w, f))
        })
        .collect::<Result<_>>()?;
    let parts: Vec<(VSet, CellSet)> = blocks.iter().map(|(w, f)| (*w, f.cells.clone())).collect();
    let cells = intersect_lifts(design.space(), &parts, None);
    let mut cert = vec![BigInt::zero(); design.dim()];
    let mut any = false;
    for (w, f) in &blocks {
        if let Some(g) = &f.certificate {
            any = true;
            lift_certificate(design, *w, g, &mut cert)?;
        }
    }
    let certificate = if any {
        crate::facial::verify_certificate(design, &cert, &cells, opts.cap)?;
        Some(cert)
    } else {
        None
    };
    let dimension = design.rank_cells(&cells).0 - 1;
    Ok(FacialSet { cells, dimension, certificate })
}

/// Adds a certificate of `Δ|w` (in the coordinates of the induced design) into `out`.
fn lift_certificate(design: &Design, w: VSet, g: &[BigInt], out: &mut [BigInt]) -> Result<()> {
    let sub = induced_design(design, w)?;
    let members = w.to_vec();
    out[0] += &g[0];
    for (j, coef) in g.iter().enumerate().skip(1) {
        if coef.is_zero() {
            continue;
        }
        let sub_cell = sub.row_cell(j - 1);
        let sub_set = sub.row_support(j - 1);
        let mut digits = vec![0u32; design.space().n_vars()];
        for (k, &v) in members.iter().enumerate() {
            digits[v] = sub.space().digit(sub_cell, k);
        }
        let cell: Cell = design.space().index(&digits);
        let set = VSet(sub_set.iter().fold(0u128, |acc, k| acc | (1u128 << members[k])));
        let row = design
            .row_of(set, cell)
            .ok_or_else(|| Error::Invariant("induced row missing from the design".into()))?;
        out[row + 1] += coef;
    }
    Ok(())
}

/// Cover strategies for outer approximations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverStrategy {
    FixedK(usize),
    Balls(usize),
    Grid3x3All,
    Grid3x3Cover,
    /// Full-height column blocks of the given width overlapping in one column.
    GridColumnBlocks(usize),
}

pub fn cover_from_strategy(complex: &Complex, strategy: CoverStrategy) -> Result<Vec<VSet>> {
    let n = complex.n_vertices();
    let all = complex.vertex_set();
    let mut out: Vec<VSet> = match strategy {
        CoverStrategy::FixedK(k) => {
            if k > n {
                return Err(Error::KTooLarge { k, n });
            }
            let mut sets = k_subsets(n, k);
            sets.extend(complex.generators().iter().filter(|g| g.len() >= k).copied());
            sets
        }
        CoverStrategy::Balls(k) => {
            let adj = complex.adjacency();
            (0..n)
                .map(|v| {
                    let mut ball = VSet::singleton(v);
                    let mut frontier = ball;
                    for _ in 0..k {
                        let mut next = VSet::EMPTY;
                        for u in frontier.iter() {
                            next = next.union(adj[u]);
                        }
                        frontier = next.minus(ball);
                        ball = ball.union(next);
                    }
                    ball
                })
                .collect()
        }
        CoverStrategy::Grid3x3All => {
            let g = complex.grid().ok_or(Error::NoGrid)?;
            let (h, w) = (g.rows.min(3), g.cols.min(3));
            let mut sets = Vec::new();
            for c in 0..=g.cols - w {
                for r in 0..=g.rows - h {
                    sets.push(g.block(r, c, h, w));
                }
            }
            sets
        }
        CoverStrategy::Grid3x3Cover => {
            let g = complex.grid().ok_or(Error::NoGrid)?;
            let (h, w) = (g.rows.min(3), g.cols.min(3));
            let mut sets = Vec::new();
            for c in window_starts(g.cols, w) {
                for r in window_starts(g.rows, h) {
                    sets.push(g.block(r, c, h, w));
                }
            }
            sets
        }
        CoverStrategy::GridColumnBlocks(width) => {
            let g = complex.grid().ok_or(Error::NoGrid)?;
            if width < 2 {
                return Err(Error::Config("column blocks need width at least 2".into()));
            }
            let mut sets = Vec::new();
            let mut c = 0;
            loop {
                let end = (c + width - 1).min(g.cols - 1);
                sets.push(g.columns(c, end));
                if end == g.cols - 1 {
                    break;
                }
                c = end;
            }
            sets
        }
    };
    out.retain(|s| s.is_subset(all));
    let mut seen = std::collections::HashSet::new();
    out.retain(|s| seen.insert(s.0));
    Ok(out)
}

fn window_starts(len: usize, w: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 0;
    loop {
        let s_clamped = s.min(len - w);
        out.push(s_clamped);
        if s_clamped + w >= len {
            break;
        }
        s += w - 1;
    }
    out.dedup();
    out
}

fn k_subsets(n: usize, k: usize) -> Vec<VSet> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 {
        return vec![VSet::EMPTY];
    }
    loop {
        out.push(VSet::from_slice(&idx));
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Rank comparison of an inner and an outer approximation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sandwich {
    #[serde(skip)]
    pub f1: CellSet,
    #[serde(skip)]
    pub f2: CellSet,
    pub rank1: usize,
    pub rank2: usize,
    pub determined: bool,
    pub codim_bound: usize,
}

pub fn compare(design: &Design, f1: &CellSet, f2: &CellSet) -> Result<Sandwich> {
    if !f1.is_subset(f2) {
        return Err(Error::Invariant("inner approximation is not inside the outer one".into()));
    }
    let rank1 = if f1.is_empty() { 0 } else { design.rank_cells(f1).0 };
    let rank2 = if f2.is_empty() { 0 } else { design.rank_cells(f2).0 };
    Ok(Sandwich {
        f1: f1.clone(),
        f2: f2.clone(),
        rank1,
        rank2,
        determined: f1 == f2 || rank1 == rank2,
        codim_bound: rank2 - rank1,
    })
}

fn default_rounds() -> usize {
    10
}

/// Inner strategy block of a run configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerConfig {
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub completion: CompletionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

/// Outer strategy block of a run configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterConfig {
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub inner: InnerConfig,
    pub outer: OuterConfig,
}

impl StrategyConfig {
    /// Separators with both sides of size at least 3; all 5-subsets (or `V`) for the outer cover.
    pub fn default_for(complex: &Complex) -> StrategyConfig {
        StrategyConfig {
            inner: InnerConfig {
                strategy: "min-part-size".into(),
                k: Some(3),
                max_rounds: 10,
                completion: CompletionKind::Separator,
                cap: None,
            },
            outer: OuterConfig { strategy: "fixed-k".into(), k: Some(5.min(complex.n_vertices())) },
        }
    }
}

impl OuterConfig {
    pub fn cover(&self, complex: &Complex) -> Result<Vec<VSet>> {
        let k = self.k;
        let s = match self.strategy.as_str() {
            "fixed-k" => CoverStrategy::FixedK(k.unwrap_or(5.min(complex.n_vertices()))),
            "balls" => CoverStrategy::Balls(k.unwrap_or(1)),
            "grid-3x3-all" => CoverStrategy::Grid3x3All,
            "grid-3x3-cover" => CoverStrategy::Grid3x3Cover,
            "grid-column-blocks" => CoverStrategy::GridColumnBlocks(k.unwrap_or(3)),
            other => return Err(Error::Config(format!("unknown outer strategy `{other}`"))),
        };
        cover_from_strategy(complex, s)
    }
}

/// Inner and outer approximations for the data support with their comparison.
pub fn sandwich(design: &Design, i_plus: &CellSet, cfg: &StrategyConfig, opts: &FacialOptions) -> Result<(InnerResult, FacialSet, Sandwich)> {
    let completions = inner_completions(design.complex(), &cfg.inner)?;
    let inner = inner_approx(design, i_plus, &completions, cfg.inner.max_rounds, opts)?;
    let cover = cfg.outer.cover(design.complex())?;
    let outer = outer_approx(design, i_plus, &cover, opts)?;
    let cmp = compare(design, &inner.cells, &outer.cells)?;
    Ok((inner, outer, cmp))
}

/// Schema restricted to a block, for callers building block designs by hand.
pub fn block_schema(schema: &Schema, w: VSet) -> Schema {
    schema.sub(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::grid_complex;

    fn abc() -> Design {
        let c = Complex::new(&["a", "b", "c"], &[vec!["a", "b"], vec!["b", "c"]]).unwrap();
        Design::build(&c, &Schema::binary(&["a", "b", "c"]).unwrap()).unwrap()
    }

    #[test]
    fn decomposable_formula() {
        let d = abc();
        let t = CellSet::from_vec(vec![0, 3]);
        let f = facial_reducible(&d, &t, &FacialOptions::default()).unwrap();
        assert_eq!(f, t);
        let lp = facial_closure(&d, &t, &FacialOptions::default()).unwrap();
        assert_eq!(lp.cells, f);
    }

    #[test]
    fn inner_with_one_split() {
        let d = abc();
        let split = SeparatorSplit { s: VSet::singleton(1), v1: VSet::from_slice(&[0, 1]), v2: VSet::from_slice(&[1, 2]) };
        let comp = splits_to_completions(d.complex(), &[split], CompletionKind::Separator).unwrap();
        let t = CellSet::from_vec(vec![0, 3, 5]);
        let r = inner_approx(&d, &t, &comp, 10, &FacialOptions::default()).unwrap();
        assert_eq!(r.cells, facial_closure(&d, &t, &FacialOptions::default()).unwrap().cells);
        let r = inner_approx(&d, &t, &[], 10, &FacialOptions::default()).unwrap();
        assert_eq!(r.cells, t);
        assert_eq!(facial_split(&d, &t, &split, &FacialOptions::default()).unwrap(), facial_reducible(&d, &t, &FacialOptions::default()).unwrap());
    }

    #[test]
    fn covers() {
        let g = grid_complex(4, 4).unwrap();
        assert_eq!(cover_from_strategy(&g, CoverStrategy::Grid3x3Cover).unwrap().len(), 4);
        assert_eq!(cover_from_strategy(&g, CoverStrategy::Grid3x3All).unwrap().len(), 4);
        let b = grid_complex(5, 10).unwrap();
        let blocks = cover_from_strategy(&b, CoverStrategy::GridColumnBlocks(3)).unwrap();
        assert_eq!(blocks.len(), 5);
        assert_eq!(blocks[0].to_vec(), (0..15).collect::<Vec<_>>());
        assert_eq!(blocks[4].to_vec(), (40..50).collect::<Vec<_>>());
        assert_eq!(cover_from_strategy(&g, CoverStrategy::FixedK(16)).unwrap(), vec![g.vertex_set()]);
        assert_eq!(cover_from_strategy(&g, CoverStrategy::Balls(0)).unwrap().len(), 16);
        assert!(cover_from_strategy(&g, CoverStrategy::FixedK(17)).is_err());
        let t = CellSet::from_vec(vec![0]);
        let d = Design::build(&g, &Schema::binary(g.vertex_names()).unwrap()).unwrap();
        let singles = cover_from_strategy(&g, CoverStrategy::Balls(0)).unwrap();
        assert!(matches!(outer_approx(&d, &t, &singles, &FacialOptions::default()), Err(Error::CoverMissesGenerator(_))));
    }

    #[test]
    fn outer_trivial_cover_is_exact() {
        let d = abc();
        let t = CellSet::from_vec(vec![0, 3, 5]);
        let o = outer_approx(&d, &t, &[d.complex().vertex_set()], &FacialOptions::default()).unwrap();
        assert_eq!(o.cells, facial_closure(&d, &t, &FacialOptions::default()).unwrap().cells);
        let s = compare(&d, &t, &o.cells).unwrap();
        assert!(s.rank1 <= s.rank2);
        assert!(compare(&d, &o.cells, &t).is_err() || o.cells == t);
    }
}
