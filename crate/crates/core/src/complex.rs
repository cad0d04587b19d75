//! Simplicial complexes on named vertices, separators and grids.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// A set of vertex indices, at most 128 vertices.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct VSet(pub u128);

impl VSet {
    pub const EMPTY: VSet = VSet(0);

    pub fn singleton(v: usize) -> VSet {
        VSet(1u128 << v)
    }

    /// All of `0..n`.
    pub fn full(n: usize) -> VSet {
        if n >= 128 {
            VSet(u128::MAX)
        } else {
            VSet((1u128 << n) - 1)
        }
    }

    pub fn from_slice(vs: &[usize]) -> VSet {
        vs.iter().fold(VSet::EMPTY, |acc, &v| acc.with(v))
    }

    pub fn with(self, v: usize) -> VSet {
        VSet(self.0 | (1u128 << v))
    }

    pub fn without(self, v: usize) -> VSet {
        VSet(self.0 & !(1u128 << v))
    }

    pub fn has(self, v: usize) -> bool {
        v < 128 && (self.0 >> v) & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: VSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: VSet) -> VSet {
        VSet(self.0 | other.0)
    }

    pub fn inter(self, other: VSet) -> VSet {
        VSet(self.0 & other.0)
    }

    pub fn minus(self, other: VSet) -> VSet {
        VSet(self.0 & !other.0)
    }

    pub fn first(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(v)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Lexicographic order on the sorted member lists.
    pub fn lex_cmp(self, other: VSet) -> Ordering {
        let mut a = self.iter();
        let mut b = other.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(x), Some(y)) if x != y => return x.cmp(&y),
                _ => {}
            }
        }
    }

    /// Order used for design rows: size first, then lexicographic.
    pub fn size_lex_cmp(self, other: VSet) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.lex_cmp(other))
    }

    /// All subsets of `self`, including the empty set.
    pub fn subsets(self) -> Vec<VSet> {
        let mut out = Vec::with_capacity(1usize << self.len().min(24));
        let mut sub = self.0;
        loop {
            out.push(VSet(sub));
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & self.0;
        }
        out
    }
}

impl fmt::Debug for VSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Row/column layout of a grid graph. Vertex `k` sits in row `k % rows`,
/// column `k / rows` (column-major numbering).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub fn vertex(&self, r: usize, c: usize) -> usize {
        c * self.rows + r
    }

    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v % self.rows, v / self.rows)
    }

    /// Vertices of the columns `c0..=c1`.
    pub fn columns(&self, c0: usize, c1: usize) -> VSet {
        let mut s = VSet::EMPTY;
        for c in c0..=c1 {
            for r in 0..self.rows {
                s = s.with(self.vertex(r, c));
            }
        }
        s
    }

    /// Vertices of the sub-rectangle with the given top-left corner and shape.
    pub fn block(&self, r0: usize, c0: usize, h: usize, w: usize) -> VSet {
        let mut s = VSet::EMPTY;
        for c in c0..c0 + w {
            for r in r0..r0 + h {
                s = s.with(self.vertex(r, c));
            }
        }
        s
    }
}

/// A simplicial complex stored by its maximal faces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Complex {
    vertices: Vec<String>,
    generators: Vec<VSet>,
    grid: Option<Grid>,
}

/// A separator `s` with `v1 ∩ v2 = s` and `v1 ∪ v2 = V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeparatorSplit {
    pub s: VSet,
    pub v1: VSet,
    pub v2: VSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeparatorStrategy {
    AllMinimal,
    MinPartSize(usize),
    GridRegular,
}

#[derive(Clone, Debug)]
pub struct SeparatorList {
    pub splits: Vec<SeparatorSplit>,
    pub truncated: bool,
}

/// Result of splitting along complete separators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeDecomposition {
    pub components: Vec<VSet>,
    pub separators: Vec<VSet>,
}

pub const DEFAULT_SEPARATOR_CAP: usize = 10_000;
pub const DEFAULT_CLIQUE_CAP: usize = 100_000;

fn canonical(mut gens: Vec<VSet>) -> Vec<VSet> {
    gens.retain(|g| !g.is_empty());
    gens.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.lex_cmp(*b)));
    gens.dedup();
    let mut kept: Vec<VSet> = Vec::new();
    for g in gens {
        if !kept.iter().any(|k| g.is_subset(*k)) {
            kept.push(g);
        }
    }
    kept.sort_by(|a, b| a.lex_cmp(*b));
    kept
}

impl Complex {
    /// Builds a complex from vertex-index generators. Dominated generators are dropped.
    pub fn from_sets(vertices: Vec<String>, generators: Vec<VSet>) -> Result<Complex> {
        if vertices.is_empty() {
            return Err(Error::EmptyVertices);
        }
        if vertices.len() > 128 {
            return Err(Error::TooManyVertices(vertices.len()));
        }
        let all = VSet::full(vertices.len());
        if generators.iter().any(|g| !g.is_subset(all)) {
            return Err(Error::NotSubset);
        }
        Ok(Complex { vertices, generators: canonical(generators), grid: None })
    }

    /// Builds a complex from generator name lists.
    pub fn new<S: AsRef<str>>(vertices: &[S], generators: &[Vec<S>]) -> Result<Complex> {
        let names: Vec<String> = vertices.iter().map(|s| s.as_ref().to_string()).collect();
        let mut gens = Vec::with_capacity(generators.len());
        for g in generators {
            let mut set = VSet::EMPTY;
            for v in g {
                let idx = names
                    .iter()
                    .position(|n| n == v.as_ref())
                    .ok_or_else(|| Error::UnknownVertex(v.as_ref().to_string()))?;
                set = set.with(idx);
            }
            gens.push(set);
        }
        Complex::from_sets(names, gens)
    }

    pub fn with_grid(mut self, grid: Grid) -> Complex {
        self.grid = Some(grid);
        self
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_names(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_set(&self) -> VSet {
        VSet::full(self.vertices.len())
    }

    pub fn generators(&self) -> &[VSet] {
        &self.generators
    }

    pub fn grid(&self) -> Option<Grid> {
        self.grid
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|n| n == name)
    }

    pub fn names_of(&self, s: VSet) -> Vec<String> {
        s.iter().map(|v| self.vertices[v].clone()).collect()
    }

    /// `true` iff `d` lies in some generator. The empty set is always a face.
    pub fn contains(&self, d: VSet) -> bool {
        d.is_empty() || self.generators.iter().any(|g| d.is_subset(*g))
    }

    /// All nonempty faces, ordered by size and then lexicographically.
    pub fn faces(&self) -> Vec<VSet> {
        let mut set = BTreeSet::new();
        for g in &self.generators {
            for s in g.subsets() {
                if !s.is_empty() {
                    set.insert(s.0);
                }
            }
        }
        let mut out: Vec<VSet> = set.into_iter().map(VSet).collect();
        out.sort_by(|a, b| a.size_lex_cmp(*b));
        out
    }

    /// Generators restricted to `w`, kept in the original vertex indexing.
    pub fn restricted_generators(&self, w: VSet) -> Vec<VSet> {
        canonical(self.generators.iter().map(|g| g.inter(w)).collect())
    }

    /// The induced subcomplex on `w`, re-indexed to the members of `w` in order.
    pub fn induced_subcomplex(&self, w: VSet) -> Result<Complex> {
        if !w.is_subset(self.vertex_set()) {
            return Err(Error::NotSubset);
        }
        if w.is_empty() {
            return Err(Error::EmptyVertices);
        }
        let members = w.to_vec();
        let names = members.iter().map(|&v| self.vertices[v].clone()).collect();
        let gens = self
            .restricted_generators(w)
            .into_iter()
            .map(|g| reindex(g, &members))
            .collect();
        let mut c = Complex::from_sets(names, gens)?;
        if w == self.vertex_set() {
            c.grid = self.grid;
        }
        Ok(c)
    }

    /// Adds every subset of each given set.
    pub fn complete_sets(&self, sets: &[VSet]) -> Result<Complex> {
        let all = self.vertex_set();
        if sets.iter().any(|s| !s.is_subset(all)) {
            return Err(Error::NotSubset);
        }
        let mut gens = self.generators.clone();
        gens.extend(sets.iter().copied());
        let mut c = Complex::from_sets(self.vertices.clone(), gens)?;
        c.grid = self.grid;
        Ok(c)
    }

    /// Neighbour sets of the 1-skeleton.
    pub fn adjacency(&self) -> Vec<VSet> {
        let n = self.n_vertices();
        let mut adj = vec![VSet::EMPTY; n];
        for g in &self.generators {
            for v in g.iter() {
                adj[v] = adj[v].union(g.without(v));
            }
        }
        adj
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let adj = self.adjacency();
        let mut out = Vec::new();
        for (u, nb) in adj.iter().enumerate() {
            for v in nb.iter().filter(|&v| v > u) {
                out.push((u, v));
            }
        }
        out
    }

    /// `true` iff removing `split.s` disconnects `v1 \ s` from `v2 \ s` and the
    /// generators fall into one of the two parts.
    pub fn is_separator(&self, split: &SeparatorSplit) -> bool {
        let all = self.vertex_set();
        if split.v1.union(split.v2) != all || split.v1.inter(split.v2) != split.s {
            return false;
        }
        if split.v1 == split.s || split.v2 == split.s {
            return false;
        }
        self.generators
            .iter()
            .all(|g| g.is_subset(split.v1) || g.is_subset(split.v2))
    }

    pub fn enumerate_separators(
        &self,
        strategy: SeparatorStrategy,
        cap: usize,
    ) -> Result<SeparatorList> {
        match strategy {
            SeparatorStrategy::AllMinimal => Ok(self.minimal_separator_splits(cap)),
            SeparatorStrategy::MinPartSize(k) => {
                let mut list = self.minimal_separator_splits(cap);
                list.splits.retain(|sp| {
                    sp.v1.minus(sp.s).len().min(sp.v2.minus(sp.s).len()) >= k
                });
                Ok(list)
            }
            SeparatorStrategy::GridRegular => {
                let grid = self.grid.ok_or(Error::NoGrid)?;
                Ok(SeparatorList { splits: self.grid_regular(grid), truncated: false })
            }
        }
    }

    fn minimal_separator_splits(&self, cap: usize) -> SeparatorList {
        let adj = self.adjacency();
        let all = self.vertex_set();
        let (seps, truncated) = minimal_separators(&adj, all, cap);
        let mut splits = Vec::new();
        let comps = components(&adj, all);
        if comps.len() > 1 {
            for c in &comps[..comps.len() - 1] {
                splits.push(SeparatorSplit { s: VSet::EMPTY, v1: *c, v2: all.minus(*c) });
            }
        }
        for s in seps {
            if s.is_empty() {
                continue;
            }
            let parts = components(&adj, all.minus(s));
            // only separators leaving exactly two parts give a unique split
            if parts.len() != 2 {
                continue;
            }
            let split = SeparatorSplit { s, v1: s.union(parts[0]), v2: s.union(parts[1]) };
            if self.is_separator(&split) {
                splits.push(split);
            }
        }
        splits.sort_by(|a, b| a.s.lex_cmp(b.s).then_with(|| a.v1.lex_cmp(b.v1)));
        splits.dedup();
        SeparatorList { splits, truncated }
    }

    /// Interior row bands, interior column bands and width-2 diagonal bands.
    fn grid_regular(&self, g: Grid) -> Vec<SeparatorSplit> {
        let n = self.n_vertices();
        let set_by = |pred: &dyn Fn(usize, usize) -> bool| {
            let mut s = VSet::EMPTY;
            for v in 0..n {
                let (r, c) = g.coords(v);
                if pred(r, c) {
                    s = s.with(v);
                }
            }
            s
        };
        let mut out = Vec::new();
        let mut push = |s: VSet, v1: VSet, v2: VSet| {
            let split = SeparatorSplit { s, v1, v2 };
            if self.is_separator(&split) {
                out.push(split);
            }
        };
        for a in 1..g.rows.saturating_sub(1) {
            for b in a..g.rows - 1 {
                push(
                    set_by(&|r, _| r >= a && r <= b),
                    set_by(&|r, _| r <= b),
                    set_by(&|r, _| r >= a),
                );
            }
        }
        for a in 1..g.cols.saturating_sub(1) {
            for b in a..g.cols - 1 {
                push(
                    set_by(&|_, c| c >= a && c <= b),
                    set_by(&|_, c| c <= b),
                    set_by(&|_, c| c >= a),
                );
            }
        }
        let span = (g.rows + g.cols).saturating_sub(2) as i64;
        for k in 1..span - 1 {
            push(
                set_by(&|r, c| {
                    let d = (r + c) as i64;
                    d == k || d == k + 1
                }),
                set_by(&|r, c| ((r + c) as i64) <= k + 1),
                set_by(&|r, c| ((r + c) as i64) >= k),
            );
        }
        let lo = -(g.cols as i64 - 1);
        for k in lo + 1..(g.rows as i64) - 2 {
            push(
                set_by(&|r, c| {
                    let d = r as i64 - c as i64;
                    d == k || d == k + 1
                }),
                set_by(&|r, c| (r as i64 - c as i64) <= k + 1),
                set_by(&|r, c| (r as i64 - c as i64) >= k),
            );
        }
        out
    }

    /// Splits recursively along complete separators.
    pub fn prime_components(&self) -> PrimeDecomposition {
        let adj = self.adjacency();
        let mut components = Vec::new();
        let mut separators = Vec::new();
        let mut stack = vec![self.vertex_set()];
        while let Some(w) = stack.pop() {
            match self.complete_split(&adj, w) {
                Some((s, w1, w2)) => {
                    separators.push(s);
                    stack.push(w2);
                    stack.push(w1);
                }
                None => components.push(w),
            }
        }
        PrimeDecomposition { components, separators }
    }

    fn complete_split(&self, adj: &[VSet], w: VSet) -> Option<(VSet, VSet, VSet)> {
        let sub_adj: Vec<VSet> = adj.iter().map(|a| a.inter(w)).collect();
        let comps = components(&sub_adj, w);
        if comps.len() > 1 {
            return Some((VSet::EMPTY, comps[0], w.minus(comps[0])));
        }
        let (mut seps, _) = minimal_separators(&sub_adj, w, DEFAULT_SEPARATOR_CAP);
        seps.sort_by(|a, b| a.size_lex_cmp(*b));
        for s in seps {
            if s.is_empty() || !self.contains(s) {
                continue;
            }
            let parts = components(&sub_adj, w.minus(s));
            if parts.len() >= 2 {
                return Some((s, s.union(parts[0]), w.minus(parts[0])));
            }
        }
        None
    }

    /// Perfect sequence of cliques when the complex is the clique complex of a
    /// chordal graph.
    pub fn is_decomposable(&self) -> Option<Vec<VSet>> {
        let adj = self.adjacency();
        let n = self.n_vertices();
        let order = mcs_order(&adj);
        let mut pos = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        // perfect elimination check on the reversed MCS order
        let mut cands: Vec<VSet> = Vec::with_capacity(n);
        for &v in &order {
            let earlier = adj[v]
                .iter()
                .filter(|&u| pos[u] < pos[v])
                .fold(VSet::EMPTY, |s, u| s.with(u));
            if let Some(last) = earlier.iter().max_by_key(|&u| pos[u]) {
                if !earlier.without(last).is_subset(adj[last]) {
                    return None;
                }
            }
            cands.push(earlier.with(v));
        }
        let cliques: Vec<VSet> = cands
            .iter()
            .copied()
            .filter(|c| !cands.iter().any(|d| d != c && c.is_subset(*d)))
            .collect();
        let isolated: Vec<VSet> = (0..n)
            .filter(|&v| adj[v].is_empty() && !self.contains(VSet::singleton(v)))
            .map(VSet::singleton)
            .collect();
        let nontrivial: Vec<VSet> = cliques
            .iter()
            .copied()
            .filter(|c| !isolated.contains(c))
            .collect();
        let mut gens_sorted = self.generators.clone();
        gens_sorted.sort_by(|a, b| a.lex_cmp(*b));
        let mut cl_sorted = nontrivial.clone();
        cl_sorted.sort_by(|a, b| a.lex_cmp(*b));
        if gens_sorted != cl_sorted {
            return None;
        }
        Some(nontrivial)
    }
}

fn reindex(g: VSet, members: &[usize]) -> VSet {
    let mut s = VSet::EMPTY;
    for v in g.iter() {
        let i = members.binary_search(&v).expect("member");
        s = s.with(i);
    }
    s
}

/// Maps a set over the members of `w` back to the full vertex indexing.
pub fn embed(sub: VSet, w: VSet) -> VSet {
    let members = w.to_vec();
    sub.iter().fold(VSet::EMPTY, |s, i| s.with(members[i]))
}

/// Connected components of the graph restricted to `w`, ordered by smallest vertex.
pub fn components(adj: &[VSet], w: VSet) -> Vec<VSet> {
    let mut left = w;
    let mut out = Vec::new();
    while let Some(start) = left.first() {
        let mut comp = VSet::singleton(start);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in adj[u].inter(w).minus(comp).iter() {
                comp = comp.with(v);
                queue.push_back(v);
            }
        }
        left = left.minus(comp);
        out.push(comp);
    }
    out
}

fn neighbourhood(adj: &[VSet], c: VSet, w: VSet) -> VSet {
    c.iter().fold(VSet::EMPTY, |s, v| s.union(adj[v])).inter(w).minus(c)
}

/// Minimal vertex separators of the graph on `w` by close-neighbourhood expansion.
pub fn minimal_separators(adj: &[VSet], w: VSet, cap: usize) -> (Vec<VSet>, bool) {
    let mut found: BTreeSet<u128> = BTreeSet::new();
    let mut queue: VecDeque<VSet> = VecDeque::new();
    let mut truncated = false;
    let add = |s: VSet, found: &mut BTreeSet<u128>, queue: &mut VecDeque<VSet>| -> bool {
        if s.is_empty() || found.contains(&s.0) {
            return true;
        }
        if found.len() >= cap {
            return false;
        }
        found.insert(s.0);
        queue.push_back(s);
        true
    };
    'outer: for v in w.iter() {
        let closed = adj[v].inter(w).with(v);
        for c in components(adj, w.minus(closed)) {
            if !add(neighbourhood(adj, c, w), &mut found, &mut queue) {
                truncated = true;
                break 'outer;
            }
        }
    }
    if !truncated {
        'expand: while let Some(s) = queue.pop_front() {
            for x in s.iter() {
                let removed = s.union(adj[x].inter(w));
                for c in components(adj, w.minus(removed)) {
                    if !add(neighbourhood(adj, c, w), &mut found, &mut queue) {
                        truncated = true;
                        break 'expand;
                    }
                }
            }
        }
    }
    let mut out: Vec<VSet> = found.into_iter().map(VSet).collect();
    out.sort_by(|a, b| a.lex_cmp(*b));
    (out, truncated)
}

/// Maximum cardinality search order, ties broken by smallest index.
fn mcs_order(adj: &[VSet]) -> Vec<usize> {
    let n = adj.len();
    let mut weight = vec![0usize; n];
    let mut done = VSet::EMPTY;
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !done.has(v))
            .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
            .expect("vertex left");
        done = done.with(v);
        order.push(v);
        for u in adj[v].minus(done).iter() {
            weight[u] += 1;
        }
    }
    order
}

/// The `rows × cols` grid graph as a complex with grid metadata. Vertices are
/// named `1..=rows*cols` in column-major order.
pub fn grid_complex(rows: usize, cols: usize) -> Result<Complex> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyVertices);
    }
    let g = Grid { rows, cols };
    let n = rows * cols;
    let names: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let mut gens = Vec::new();
    for c in 0..cols {
        for r in 0..rows {
            let v = g.vertex(r, c);
            if r + 1 < rows {
                gens.push(VSet::singleton(v).with(g.vertex(r + 1, c)));
            }
            if c + 1 < cols {
                gens.push(VSet::singleton(v).with(g.vertex(r, c + 1)));
            }
        }
    }
    if n == 1 {
        gens.push(VSet::singleton(0));
    }
    Ok(Complex::from_sets(names, gens)?.with_grid(g))
}

/// Clique complex of a simple graph given by named edges.
pub fn clique_complex<S: AsRef<str>>(vertices: &[S], edges: &[(S, S)], cap: usize) -> Result<Complex> {
    let names: Vec<String> = vertices.iter().map(|s| s.as_ref().to_string()).collect();
    if names.len() > 128 {
        return Err(Error::TooManyVertices(names.len()));
    }
    let idx = |s: &S| {
        names
            .iter()
            .position(|n| n == s.as_ref())
            .ok_or_else(|| Error::UnknownVertex(s.as_ref().to_string()))
    };
    let mut adj = vec![VSet::EMPTY; names.len()];
    for (a, b) in edges {
        let (u, v) = (idx(a)?, idx(b)?);
        if u != v {
            adj[u] = adj[u].with(v);
            adj[v] = adj[v].with(u);
        }
    }
    let mut cliques = Vec::new();
    bron_kerbosch(&adj, VSet::EMPTY, VSet::full(names.len()), VSet::EMPTY, &mut cliques, cap)?;
    Complex::from_sets(names, cliques)
}

fn bron_kerbosch(
    adj: &[VSet],
    r: VSet,
    p: VSet,
    x: VSet,
    out: &mut Vec<VSet>,
    cap: usize,
) -> Result<()> {
    if p.is_empty() && x.is_empty() {
        if out.len() >= cap {
            return Err(Error::CliqueCap(cap));
        }
        out.push(r);
        return Ok(());
    }
    let pivot = p
        .union(x)
        .iter()
        .max_by_key(|&u| adj[u].inter(p).len())
        .expect("nonempty");
    let mut p = p;
    let mut x = x;
    for v in p.minus(adj[pivot]).iter() {
        bron_kerbosch(adj, r.with(v), p.inter(adj[v]), x.inter(adj[v]), out, cap)?;
        p = p.without(v);
        x = x.with(v);
    }
    Ok(())
}
