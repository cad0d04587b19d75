//! Facial sets of large models stored as projections onto a chain of blocks.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::approx::facial_reducible;
use crate::complex::{Complex, SeparatorSplit, VSet};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::facial::FacialOptions;
use crate::table::{intersect_lifts, project_set, Cell, CellSet, Space};

/// Positions inside `w` of the members of `u ⊆ w`.
fn local(w: VSet, u: VSet) -> VSet {
    w.iter().enumerate().filter(|&(_, v)| u.has(v)).fold(VSet::EMPTY, |s, (k, _)| s.with(k))
}

fn sub_space(radix: &[u32], w: VSet) -> Space {
    Space::new(&w.iter().map(|v| radix[v]).collect::<Vec<_>>())
}

/// Checks the running-intersection property of a path of blocks.
pub fn check_chain(cover: &[VSet]) -> Result<()> {
    let mut seen = VSet::EMPTY;
    for (k, &w) in cover.iter().enumerate() {
        if w.is_empty() {
            return Err(Error::NotChain(format!("block {k} is empty")));
        }
        if k > 0 {
            let prev = cover[k - 1];
            if w.inter(prev).is_empty() {
                return Err(Error::NotChain(format!("blocks {} and {k} do not overlap", k - 1)));
            }
            if !w.inter(seen).is_subset(prev) {
                return Err(Error::NotChain(format!("block {k} meets earlier blocks outside block {}", k - 1)));
            }
        }
        seen = seen.union(w);
    }
    Ok(())
}

/// `∩_k π_{V_k}^{-1}(P_k)` over a chain cover; each `P_k` is a cell set of `I_{V_k}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImplicitFacialSet {
    pub cover: Vec<VSet>,
    pub projections: Vec<CellSet>,
    radix: Vec<u32>,
}

impl ImplicitFacialSet {
    pub fn new(radix: &[u32], cover: Vec<VSet>, projections: Vec<CellSet>, cap: u64) -> Result<ImplicitFacialSet> {
        if cover.len() != projections.len() {
            return Err(Error::CoverMismatch);
        }
        check_chain(&cover)?;
        for (w, p) in cover.iter().zip(&projections) {
            let size = sub_space(radix, *w).explicit_size(cap)?;
            if p.iter().any(|c| c >= size as Cell) {
                return Err(Error::OutOfRange(size));
            }
        }
        Ok(ImplicitFacialSet { cover, projections, radix: radix.to_vec() })
    }

    /// All of `I`; with an empty cover this is the empty intersection.
    pub fn full(radix: &[u32], cover: Vec<VSet>, cap: u64) -> Result<ImplicitFacialSet> {
        let projections = cover
            .iter()
            .map(|w| sub_space(radix, *w).explicit_size(cap).map(CellSet::full))
            .collect::<Result<Vec<_>>>()?;
        ImplicitFacialSet::new(radix, cover, projections, cap)
    }

    /// Projections of an explicit set of the full space.
    pub fn from_explicit(space: &Space, cover: Vec<VSet>, cells: &CellSet, cap: u64) -> Result<ImplicitFacialSet> {
        let projections = cover.iter().map(|w| project_set(space, cells, *w)).collect();
        ImplicitFacialSet::new(space.radix(), cover, projections, cap)
    }

    pub fn radix(&self) -> &[u32] {
        &self.radix
    }

    pub fn contains(&self, cell: Cell) -> bool {
        let space = Space::new(&self.radix);
        self.cover
            .iter()
            .zip(&self.projections)
            .all(|(w, p)| p.contains(space.projector(*w).apply(cell)))
    }

    pub fn is_full(&self) -> bool {
        self.cover
            .iter()
            .zip(&self.projections)
            .all(|(w, p)| p.len() as u128 == sub_space(&self.radix, *w).size())
    }

    pub fn is_empty(&self) -> bool {
        self.projections.iter().any(|p| p.is_empty())
    }

    fn separator_projection(&self, k: usize, s: VSet) -> HashSet<Cell> {
        let w = self.cover[k];
        let proj = sub_space(&self.radix, w).projector(local(w, s));
        self.projections[k].iter().map(|c| proj.apply(c)).collect()
    }

    fn semijoin(&mut self, k: usize, from: usize) {
        let s = self.cover[k].inter(self.cover[from]);
        let keys = self.separator_projection(from, s);
        let w = self.cover[k];
        let proj = sub_space(&self.radix, w).projector(local(w, s));
        self.projections[k] = self.projections[k].iter().filter(|&c| keys.contains(&proj.apply(c))).collect();
    }

    /// Consecutive projections agree on the shared variables.
    pub fn is_consistent(&self) -> bool {
        (1..self.cover.len()).all(|k| {
            let s = self.cover[k].inter(self.cover[k - 1]);
            self.separator_projection(k, s) == self.separator_projection(k - 1, s)
        })
    }

    /// Two semijoin passes along the chain; afterwards every projection is the
    /// true projection of the represented set.
    pub fn reduce(&mut self) {
        for k in 1..self.cover.len() {
            self.semijoin(k, k - 1);
        }
        for k in (0..self.cover.len().saturating_sub(1)).rev() {
            self.semijoin(k, k + 1);
        }
    }

    pub fn reduced(mut self) -> ImplicitFacialSet {
        self.reduce();
        self
    }

    /// `π_w` of the represented set, computed by gluing the blocks that meet
    /// `w` on the variables of `w` and the separators between them. Needs a
    /// reduced representation and `w` inside the union of consecutive blocks.
    pub fn project_onto(&self, w: VSet, cap: u64) -> Result<CellSet> {
        if self.cover.is_empty() {
            return Ok(CellSet::full(sub_space(&self.radix, w).explicit_size(cap)?));
        }
        let touching: Vec<usize> = (0..self.cover.len()).filter(|&k| !self.cover[k].inter(w).is_empty()).collect();
        let (lo, hi) = (touching[0], *touching.last().unwrap_or(&0));
        let span = (lo..=hi).fold(VSet::EMPTY, |s, k| s.union(self.cover[k]));
        if !w.is_subset(span) {
            return Err(Error::Config("target block is not covered by consecutive blocks".into()));
        }
        let seps = (lo..hi).fold(VSet::EMPTY, |s, k| s.union(self.cover[k].inter(self.cover[k + 1])));
        let keep = w.union(seps);
        let mut acc: Option<(VSet, CellSet)> = None;
        for k in lo..=hi {
            let bw = self.cover[k];
            let part_w = bw.inter(keep);
            let part = project_set(&sub_space(&self.radix, bw), &self.projections[k], local(bw, part_w));
            acc = Some(match acc {
                None => (part_w, part),
                Some(a) => glue_projections(&self.radix, a, (part_w, part), cap)?,
            });
        }
        let (aw, cells) = acc.expect("at least one block");
        Ok(project_set(&sub_space(&self.radix, aw), &cells, local(aw, w)))
    }

    /// Explicit member list when `I` fits under `cap`.
    pub fn materialize(&self, cap: u64) -> Result<CellSet> {
        let space = Space::new(&self.radix);
        space.explicit_size(cap)?;
        let parts: Vec<(VSet, CellSet)> = self.cover.iter().copied().zip(self.projections.iter().cloned()).collect();
        Ok(intersect_lifts(&space, &parts, None))
    }

    /// Projection-wise inclusion on a shared cover.
    pub fn is_subset_blockwise(&self, other: &ImplicitFacialSet) -> Result<bool> {
        if self.cover != other.cover {
            return Err(Error::CoverMismatch);
        }
        Ok(self.projections.iter().zip(&other.projections).all(|(a, b)| a.is_subset(b)))
    }

    pub fn to_json(&self, complex: &Complex) -> Value {
        json!({
            "cover": self.cover.iter().map(|w| complex.names_of(*w)).collect::<Vec<_>>(),
            "projections": self.projections.iter().map(|p| p.iter().map(|c| c.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value, complex: &Complex, radix: &[u32], cap: u64) -> Result<ImplicitFacialSet> {
        let bad = || Error::Malformed("implicit facial set".into());
        let cover = v["cover"]
            .as_array()
            .ok_or_else(bad)?
            .iter()
            .map(|b| {
                b.as_array().ok_or_else(bad)?.iter().try_fold(VSet::EMPTY, |s, n| {
                    let name = n.as_str().ok_or_else(bad)?;
                    let i = complex.index_of(name).ok_or_else(|| Error::UnknownVertex(name.into()))?;
                    Ok(s.with(i))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let projections = v["projections"]
            .as_array()
            .ok_or_else(bad)?
            .iter()
            .map(|p| {
                p.as_array()
                    .ok_or_else(bad)?
                    .iter()
                    .map(|c| match c {
                        Value::String(s) => s.parse::<Cell>().map_err(|_| bad()),
                        Value::Number(n) => n.as_u64().map(|x| x as Cell).ok_or_else(bad),
                        _ => Err(bad()),
                    })
                    .collect::<Result<Vec<Cell>>>()
                    .map(CellSet::from_vec)
            })
            .collect::<Result<Vec<_>>>()?;
        ImplicitFacialSet::new(radix, cover, projections, cap)
    }
}

/// `(π_a)^{-1}(F_a) ∩ (π_b)^{-1}(F_b)` over `I_{V_a ∪ V_b}`.
pub fn glue_projections(radix: &[u32], a: (VSet, CellSet), b: (VSet, CellSet), cap: u64) -> Result<(VSet, CellSet)> {
    let (va, fa) = a;
    let (vb, fb) = b;
    let u = va.union(vb);
    let space_u = sub_space(radix, u);
    space_u.explicit_size(cap)?;
    let s = va.inter(vb);
    let sa = sub_space(radix, va);
    let sb = sub_space(radix, vb);
    let key_a = sa.projector(local(va, s));
    let key_b = sb.projector(local(vb, s));
    let mut by_key: HashMap<Cell, Vec<Cell>> = HashMap::new();
    for c in fb.iter() {
        by_key.entry(key_b.apply(c)).or_default().push(c);
    }
    let pos_a: Vec<usize> = va.iter().map(|v| u.iter().position(|x| x == v).unwrap()).collect();
    let pos_b: Vec<usize> = vb.iter().map(|v| u.iter().position(|x| x == v).unwrap()).collect();
    let mut out = Vec::new();
    let mut digits = vec![0u32; u.len()];
    for ca in fa.iter() {
        let Some(list) = by_key.get(&key_a.apply(ca)) else { continue };
        for (k, &p) in pos_a.iter().enumerate() {
            digits[p] = sa.digit(ca, k);
        }
        for &cb in list {
            for (k, &p) in pos_b.iter().enumerate() {
                digits[p] = sb.digit(cb, k);
            }
            out.push(space_u.index(&digits));
        }
    }
    Ok((u, CellSet::from_vec(out)))
}

/// Equality of two implicit sets. On different covers both are re-projected
/// onto the blocks of `a` (requires reduced representations).
pub fn implicit_equal(a: &ImplicitFacialSet, b: &ImplicitFacialSet, cap: u64) -> Result<bool> {
    if a.radix != b.radix {
        return Err(Error::CoverMismatch);
    }
    if a.cover == b.cover {
        let (ra, rb) = (a.clone().reduced(), b.clone().reduced());
        return Ok(ra.projections == rb.projections);
    }
    let (ra, rb) = (a.clone().reduced(), b.clone().reduced());
    for (w, p) in ra.cover.iter().zip(&ra.projections) {
        if rb.project_onto(*w, cap)? != *p {
            return Ok(false);
        }
    }
    for (w, p) in rb.cover.iter().zip(&rb.projections) {
        if ra.project_onto(*w, cap)? != *p {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A chain of blocks whose consecutive intersections are separators of `Δ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Family {
    pub blocks: Vec<VSet>,
    pub separators: Vec<VSet>,
}

impl Family {
    pub fn new(complex: &Complex, blocks: Vec<VSet>) -> Result<Family> {
        check_chain(&blocks)?;
        let all = blocks.iter().fold(VSet::EMPTY, |s, w| s.union(*w));
        if all != complex.vertex_set() {
            return Err(Error::NotChain("blocks do not cover the vertices".into()));
        }
        let mut separators = Vec::new();
        for k in 1..blocks.len() {
            let left = blocks[..k].iter().fold(VSet::EMPTY, |s, w| s.union(*w));
            let right = blocks[k..].iter().fold(VSet::EMPTY, |s, w| s.union(*w));
            let split = SeparatorSplit { s: left.inter(right), v1: left, v2: right };
            if !complex.is_separator(&split) {
                return Err(Error::NotSeparator(complex.names_of(split.s).join(",")));
            }
            separators.push(split.s);
        }
        Ok(Family { blocks, separators })
    }

    /// Full-height column blocks cut at the given separator columns.
    pub fn grid_columns(complex: &Complex, separator_cols: &[usize]) -> Result<Family> {
        let g = complex.grid().ok_or(Error::NoGrid)?;
        let mut cuts: Vec<usize> = separator_cols.to_vec();
        cuts.sort_unstable();
        cuts.dedup();
        if cuts.iter().any(|&c| c == 0 || c + 1 >= g.cols) {
            return Err(Error::Config("separator columns must be interior".into()));
        }
        let mut blocks = Vec::new();
        let mut start = 0;
        for &c in &cuts {
            blocks.push(g.columns(start, c));
            start = c;
        }
        blocks.push(g.columns(start, g.cols - 1));
        Family::new(complex, blocks)
    }

    /// Designs of `(Δ ∪ separators)|_{V_k}`.
    pub fn block_designs(&self, design: &Design) -> Result<Vec<Design>> {
        let completed = design.complex().complete_sets(&self.separators)?;
        self.blocks
            .iter()
            .map(|&w| Design::build(&completed.induced_subcomplex(w)?, &design.schema().sub(w)))
            .collect()
    }

    /// Designs of `Δ|_{V_k}` without completion.
    pub fn plain_block_designs(&self, design: &Design) -> Result<Vec<Design>> {
        self.blocks
            .iter()
            .map(|&w| Design::build(&design.complex().induced_subcomplex(w)?, &design.schema().sub(w)))
            .collect()
    }
}

fn closures(designs: &[Design], inputs: &[CellSet], opts: &FacialOptions) -> Result<Vec<CellSet>> {
    designs
        .par_iter()
        .zip(inputs.par_iter())
        .map(|(d, t)| facial_reducible(d, t, opts))
        .collect()
}

#[derive(Clone, Debug)]
pub struct TwoFamilyResult {
    /// `F_1` on the first family's blocks, reduced.
    pub inner: ImplicitFacialSet,
    /// `F_1` on the second family's blocks, reduced.
    pub inner_second: ImplicitFacialSet,
    /// `F_2` on the first family's blocks, reduced.
    pub outer: ImplicitFacialSet,
    /// Full cycles (one step per family), the last one without growth included.
    pub rounds: usize,
    pub steps: usize,
    pub stable: bool,
}

impl TwoFamilyResult {
    pub fn f1_eq_f2(&self) -> bool {
        self.inner.projections == self.outer.projections
    }
}

/// Alternates `G ← F_{Δ_A}(G)`, `G ← F_{Δ_B}(G)` where `Δ_A`, `Δ_B` complete
/// the separators of the two families, passing only block projections between
/// steps. The outer set uses `Δ|_{V_k}` on the first family's blocks.
pub fn iterate_two_families(
    design: &Design,
    i_plus: &CellSet,
    first: &Family,
    second: &Family,
    max_rounds: usize,
    opts: &FacialOptions,
) -> Result<TwoFamilyResult> {
    if i_plus.is_empty() {
        return Err(Error::EmptySet);
    }
    let radix = design.space().radix().to_vec();
    let fams = [first, second];
    let designs = [first.block_designs(design)?, second.block_designs(design)?];
    let mut inputs: Vec<CellSet> = first.blocks.iter().map(|&w| project_set(design.space(), i_plus, w)).collect();
    let mut last: [Option<ImplicitFacialSet>; 2] = [None, None];
    let mut steps = 0;
    let mut stable = false;
    let mut which = 0;
    while steps < 2 * max_rounds {
        steps += 1;
        let out = closures(&designs[which], &inputs, opts)?;
        let g = ImplicitFacialSet::new(&radix, fams[which].blocks.clone(), out, opts.cap)?.reduced();
        let done = last[which].as_ref() == Some(&g);
        last[which] = Some(g);
        if done {
            stable = true;
            break;
        }
        let other = 1 - which;
        let g = last[which].as_ref().expect("just set");
        inputs = fams[other].blocks.iter().map(|&w| g.project_onto(w, opts.cap)).collect::<Result<_>>()?;
        which = other;
    }
    // make both representations describe the final set
    let fin = last[which].clone().expect("at least one step");
    let other = 1 - which;
    let transferred: Vec<CellSet> = fams[other].blocks.iter().map(|&w| fin.project_onto(w, opts.cap)).collect::<Result<_>>()?;
    let fin_other = ImplicitFacialSet::new(&radix, fams[other].blocks.clone(), transferred, opts.cap)?.reduced();
    let (inner, inner_second) = if which == 0 { (fin, fin_other) } else { (fin_other, fin) };
    let outer = outer_implicit(design, i_plus, first, opts)?;
    Ok(TwoFamilyResult { inner, inner_second, outer, rounds: steps.div_ceil(2), steps, stable })
}

/// `∩_k π_{V_k}^{-1} F_{Δ|V_k}(π_{V_k} I_+)` on the family's blocks, reduced.
pub fn outer_implicit(design: &Design, i_plus: &CellSet, family: &Family, opts: &FacialOptions) -> Result<ImplicitFacialSet> {
    let designs = family.plain_block_designs(design)?;
    let inputs: Vec<CellSet> = family.blocks.iter().map(|&w| project_set(design.space(), i_plus, w)).collect();
    let out = closures(&designs, &inputs, opts)?;
    Ok(ImplicitFacialSet::new(design.space().radix(), family.blocks.clone(), out, opts.cap)?.reduced())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::grid_complex;

    fn bin(n: usize) -> Vec<u32> {
        vec![2; n]
    }

    #[test]
    fn glue_and_contains() {
        let radix = bin(3);
        let ab = VSet::from_slice(&[0, 1]);
        let bc = VSet::from_slice(&[1, 2]);
        let diag = CellSet::from_vec(vec![0, 3]);
        let (u, g) = glue_projections(&radix, (ab, diag.clone()), (bc, diag.clone()), 1 << 20).unwrap();
        assert_eq!(u, VSet::full(3));
        assert_eq!(g.as_slice(), &[0, 7]);
        let s = ImplicitFacialSet::new(&radix, vec![ab, bc], vec![diag.clone(), diag], 1 << 20).unwrap();
        let members: Vec<Cell> = (0..8).filter(|&c| s.contains(c)).collect();
        assert_eq!(members, vec![0, 7]);
        assert!(!s.is_full());
        assert!(ImplicitFacialSet::full(&radix, vec![], 1 << 20).unwrap().is_full());
    }

    #[test]
    fn disjoint_glue_is_product() {
        let radix = bin(2);
        let (_, g) = glue_projections(
            &radix,
            (VSet::singleton(0), CellSet::from_vec(vec![1])),
            (VSet::singleton(1), CellSet::from_vec(vec![0, 1])),
            1 << 20,
        )
        .unwrap();
        assert_eq!(g.as_slice(), &[1, 3]);
    }

    #[test]
    fn reducer_makes_projections_exact() {
        let radix = bin(3);
        let ab = VSet::from_slice(&[0, 1]);
        let bc = VSet::from_slice(&[1, 2]);
        // (a,b) in {00, 11}; (b,c) = 00 only
        let mut s = ImplicitFacialSet::new(&radix, vec![ab, bc], vec![CellSet::from_vec(vec![0, 3]), CellSet::from_vec(vec![0])], 1 << 20).unwrap();
        assert!(!s.is_consistent());
        s.reduce();
        assert!(s.is_consistent());
        assert_eq!(s.projections[0].as_slice(), &[0]);
    }

    #[test]
    fn chain_rules() {
        let c = grid_complex(3, 4).unwrap();
        let f = Family::grid_columns(&c, &[1, 2]).unwrap();
        assert_eq!(f.blocks.len(), 3);
        assert!(Family::grid_columns(&c, &[0]).is_err());
        let g = c.grid().unwrap();
        assert!(check_chain(&[g.columns(0, 1), g.columns(3, 3)]).is_err());
    }
}
