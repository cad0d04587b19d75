//! Contingency tables: schemas, cell indexing, counts, projections and lifts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::complex::VSet;
use crate::error::{Error, Result};

/// Mixed-radix cell index, variable 0 least significant.
pub type Cell = u128;

/// Cell spaces larger than this are never enumerated.
pub const EXPLICIT_CAP: u64 = 1 << 22;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    names: Vec<String>,
    labels: Vec<Vec<String>>,
}

impl Schema {
    pub fn new(vars: Vec<(String, Vec<String>)>) -> Result<Schema> {
        if vars.is_empty() {
            return Err(Error::EmptyVertices);
        }
        let mut seen = HashSet::new();
        let mut names = Vec::new();
        let mut labels = Vec::new();
        for (name, labs) in vars {
            if !seen.insert(name.clone()) {
                return Err(Error::Config(format!("duplicate variable `{name}`")));
            }
            if labs.len() < 2 {
                return Err(Error::Config(format!("variable `{name}` needs at least 2 levels")));
            }
            names.push(name);
            labels.push(labs);
        }
        Ok(Schema { names, labels })
    }

    /// Levels labelled `0..r`.
    pub fn with_levels<S: AsRef<str>>(names: &[S], levels: &[usize]) -> Result<Schema> {
        Schema::new(
            names
                .iter()
                .zip(levels)
                .map(|(n, &r)| (n.as_ref().to_string(), (0..r).map(|l| l.to_string()).collect()))
                .collect(),
        )
    }

    pub fn binary<S: AsRef<str>>(names: &[S]) -> Result<Schema> {
        Schema::with_levels(names, &vec![2; names.len()])
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self, v: usize) -> &[String] {
        &self.labels[v]
    }

    pub fn levels(&self) -> Vec<u32> {
        self.labels.iter().map(|l| l.len() as u32).collect()
    }

    pub fn space(&self) -> Space {
        Space::new(&self.levels())
    }

    /// The schema of the variables in `w`, in order.
    pub fn sub(&self, w: VSet) -> Schema {
        let idx: Vec<usize> = w.iter().filter(|&v| v < self.n_vars()).collect();
        Schema {
            names: idx.iter().map(|&v| self.names[v].clone()).collect(),
            labels: idx.iter().map(|&v| self.labels[v].clone()).collect(),
        }
    }

    /// Cell label. Single-character labels are written as a numeral with the
    /// first variable rightmost (`10` is index 2 for two binaries); longer
    /// labels are comma-joined in variable order.
    pub fn cell_label(&self, cell: Cell) -> String {
        let digits = self.space().digits(cell);
        let single = self.labels.iter().all(|l| l.iter().all(|s| s.chars().count() == 1));
        let parts: Vec<&str> = digits
            .iter()
            .enumerate()
            .map(|(v, &d)| self.labels[v][d as usize].as_str())
            .collect();
        if single {
            parts.iter().rev().copied().collect()
        } else {
            parts.join(",")
        }
    }

    fn level_of(&self, v: usize, label: &str) -> Result<u32> {
        self.labels[v]
            .iter()
            .position(|l| l == label)
            .map(|p| p as u32)
            .ok_or_else(|| Error::UnknownLabel { var: self.names[v].clone(), label: label.to_string() })
    }

    /// Index of a cell given one label per variable.
    pub fn cell_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<Cell> {
        if labels.len() != self.n_vars() {
            return Err(Error::Malformed(format!(
                "expected {} labels, got {}",
                self.n_vars(),
                labels.len()
            )));
        }
        let mut digits = Vec::with_capacity(labels.len());
        for (v, l) in labels.iter().enumerate() {
            digits.push(self.level_of(v, l.as_ref())?);
        }
        Ok(self.space().index(&digits))
    }
}

/// A mixed-radix index space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Space {
    radix: Vec<u32>,
    stride: Vec<u128>,
    size: u128,
    binary: bool,
}

impl Space {
    pub fn new(radix: &[u32]) -> Space {
        let mut stride = Vec::with_capacity(radix.len());
        let mut s: u128 = 1;
        for &r in radix {
            stride.push(s);
            s = s.saturating_mul(r as u128);
        }
        Space { radix: radix.to_vec(), stride, size: s, binary: radix.iter().all(|&r| r == 2) }
    }

    pub fn size(&self) -> u128 {
        self.size
    }

    pub fn n_vars(&self) -> usize {
        self.radix.len()
    }

    pub fn radix(&self) -> &[u32] {
        &self.radix
    }

    /// Size as `u64` when it fits under `cap`.
    pub fn explicit_size(&self, cap: u64) -> Result<u64> {
        if self.size > cap as u128 {
            Err(Error::CapExceeded { size: self.size, cap })
        } else {
            Ok(self.size as u64)
        }
    }

    #[inline]
    pub fn digit(&self, cell: Cell, v: usize) -> u32 {
        if self.binary {
            ((cell >> v) & 1) as u32
        } else {
            ((cell / self.stride[v]) % self.radix[v] as u128) as u32
        }
    }

    pub fn digits(&self, cell: Cell) -> Vec<u32> {
        (0..self.radix.len()).map(|v| self.digit(cell, v)).collect()
    }

    pub fn index(&self, digits: &[u32]) -> Cell {
        digits.iter().zip(&self.stride).map(|(&d, &s)| d as u128 * s).sum()
    }

    /// Variables at a nonzero level.
    #[inline]
    pub fn support(&self, cell: Cell) -> VSet {
        if self.binary {
            VSet(cell)
        } else {
            (0..self.radix.len()).filter(|&v| self.digit(cell, v) != 0).fold(VSet::EMPTY, |s, v| s.with(v))
        }
    }

    /// Projects cells of this space onto the variables in `w`.
    pub fn projector(&self, w: VSet) -> Projector {
        let vars: Vec<usize> = w.iter().filter(|&v| v < self.radix.len()).collect();
        let sub = Space::new(&vars.iter().map(|&v| self.radix[v]).collect::<Vec<_>>());
        Projector { src: self.clone(), vars, dst: sub }
    }
}

/// Coordinate projection between two index spaces.
#[derive(Clone, Debug)]
pub struct Projector {
    src: Space,
    vars: Vec<usize>,
    dst: Space,
}

impl Projector {
    #[inline]
    pub fn apply(&self, cell: Cell) -> Cell {
        let mut out = 0u128;
        for (k, &v) in self.vars.iter().enumerate() {
            out += self.src.digit(cell, v) as u128 * self.dst.stride[k];
        }
        out
    }

    pub fn target(&self) -> &Space {
        &self.dst
    }
}

/// Sorted set of cell indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CellSet(Vec<Cell>);

impl CellSet {
    pub fn from_vec(mut v: Vec<Cell>) -> CellSet {
        v.sort_unstable();
        v.dedup();
        CellSet(v)
    }

    pub fn full(size: u64) -> CellSet {
        CellSet((0..size as Cell).collect())
    }

    pub fn as_slice(&self) -> &[Cell] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Cell> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.0.binary_search(&c).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        let mut j = 0;
        for &c in &self.0 {
            while j < other.0.len() && other.0[j] < c {
                j += 1;
            }
            if j == other.0.len() || other.0[j] != c {
                return false;
            }
        }
        true
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        CellSet::from_vec(v)
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        CellSet(self.0.iter().copied().filter(|&c| other.contains(c)).collect())
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        CellSet(self.0.iter().copied().filter(|&c| !other.contains(c)).collect())
    }
}

impl FromIterator<Cell> for CellSet {
    fn from_iter<T: IntoIterator<Item = Cell>>(iter: T) -> Self {
        CellSet::from_vec(iter.into_iter().collect())
    }
}

/// Sparse table of positive counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    schema: Schema,
    cells: BTreeMap<Cell, u64>,
    n: u64,
}

impl Counts {
    /// Builds counts from `(cell index, count)` pairs; duplicates add up, zeros drop.
    pub fn from_pairs(schema: Schema, pairs: impl IntoIterator<Item = (Cell, u64)>) -> Result<Counts> {
        let size = schema.space().size();
        let mut cells = BTreeMap::new();
        let mut n = 0u64;
        for (c, k) in pairs {
            if c >= size {
                return Err(Error::OutOfRange(c as u64));
            }
            if k > 0 {
                *cells.entry(c).or_insert(0) += k;
                n += k;
            }
        }
        Ok(Counts { schema, cells, n })
    }

    /// Dense counts in cell-index order.
    pub fn from_dense(schema: Schema, counts: &[u64]) -> Result<Counts> {
        Counts::from_pairs(schema, counts.iter().enumerate().map(|(i, &k)| (i as Cell, k)))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn get(&self, c: Cell) -> u64 {
        self.cells.get(&c).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, u64)> + '_ {
        self.cells.iter().map(|(&c, &k)| (c, k))
    }

    pub fn n_positive(&self) -> usize {
        self.cells.len()
    }

    /// Cells with positive count.
    pub fn support(&self) -> CellSet {
        CellSet(self.cells.keys().copied().collect())
    }

    /// Marginal table on the variables in `w`.
    pub fn project(&self, w: VSet) -> Counts {
        let proj = self.schema.space().projector(w);
        let mut cells = BTreeMap::new();
        for (&c, &k) in &self.cells {
            *cells.entry(proj.apply(c)).or_insert(0) += k;
        }
        Counts { schema: self.schema.sub(w), cells, n: self.n }
    }

    /// The cell of maximal count, smallest index on ties.
    pub fn max_cell(&self) -> Option<Cell> {
        let mut best: Option<(Cell, u64)> = None;
        for (&c, &k) in &self.cells {
            if best.is_none_or(|(_, b)| k > b) {
                best = Some((c, k));
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Accumulates one observation per record.
pub fn ingest_observations<S: AsRef<str>>(header: &[S], rows: &[Vec<S>], schema: &Schema) -> Result<Counts> {
    if rows.is_empty() {
        return Err(Error::NoObservations);
    }
    let cols = column_positions(header, schema)?;
    let mut map: HashMap<Cell, u64> = HashMap::new();
    for row in rows {
        let labels = pick(row, &cols)?;
        *map.entry(schema.cell_from_labels(&labels)?).or_insert(0) += 1;
    }
    Counts::from_pairs(schema.clone(), map)
}

/// Aggregated records: per-variable labels and a count.
pub fn ingest_counts<S: AsRef<str>>(records: &[(Vec<S>, i64)], schema: &Schema) -> Result<Counts> {
    let mut pairs = Vec::with_capacity(records.len());
    for (labels, k) in records {
        if *k < 0 {
            return Err(Error::NegativeCount(*k));
        }
        pairs.push((schema.cell_from_labels(labels)?, *k as u64));
    }
    Counts::from_pairs(schema.clone(), pairs)
}

fn column_positions<S: AsRef<str>>(header: &[S], schema: &Schema) -> Result<Vec<usize>> {
    schema
        .names()
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h.as_ref().trim() == n)
                .ok_or_else(|| Error::MissingColumn(n.clone()))
        })
        .collect()
}

fn pick<'a, S: AsRef<str>>(row: &'a [S], cols: &[usize]) -> Result<Vec<&'a str>> {
    cols.iter()
        .map(|&i| {
            row.get(i)
                .map(|s| s.as_ref().trim())
                .ok_or_else(|| Error::Malformed(format!("row has {} fields", row.len())))
        })
        .collect()
}

/// Reads a counts CSV. A `count` column selects aggregated mode, otherwise
/// each row is one observation.
pub fn read_counts_csv(path: &Path, schema: &Schema) -> Result<Counts> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(|s| s.to_string()).collect());
    }
    match header.iter().position(|h| h == "count") {
        Some(ci) => {
            let cols = column_positions(&header, schema)?;
            let mut recs = Vec::with_capacity(rows.len());
            for row in &rows {
                let k: i64 = row
                    .get(ci)
                    .ok_or_else(|| Error::Malformed("missing count".into()))?
                    .parse()
                    .map_err(|_| Error::Malformed(format!("bad count in {row:?}")))?;
                let labels: Vec<String> = pick(row, &cols)?.into_iter().map(String::from).collect();
                recs.push((labels, k));
            }
            ingest_counts(&recs, schema)
        }
        None => ingest_observations(&header, &rows, schema),
    }
}

/// Projection of a cell set of `space` onto `w`.
pub fn project_set(space: &Space, cells: &CellSet, w: VSet) -> CellSet {
    let p = space.projector(w);
    cells.iter().map(|c| p.apply(c)).collect()
}

/// Result of a lift: explicit when the target space fits under the cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Lifted {
    Explicit(CellSet),
    /// Members are the cells whose projection onto `w` lies in `cells`.
    Implicit { w: VSet, cells: CellSet },
}

/// Preimage of `t` (a cell set over the variables `w`) in `space`.
pub fn lift_cellset(space: &Space, t: &CellSet, w: VSet, cap: u64) -> Lifted {
    if space.size() > cap as u128 {
        return Lifted::Implicit { w, cells: t.clone() };
    }
    Lifted::Explicit(lift_explicit(space, t, w))
}

/// Enumerates the preimage of `t` without a cap check.
pub fn lift_explicit(space: &Space, t: &CellSet, w: VSet) -> CellSet {
    let n = space.n_vars();
    let inside: Vec<usize> = w.iter().filter(|&v| v < n).collect();
    let free: Vec<usize> = (0..n).filter(|v| !w.has(*v)).collect();
    let free_space = Space::new(&free.iter().map(|&v| space.radix[v]).collect::<Vec<_>>());
    let sub = Space::new(&inside.iter().map(|&v| space.radix[v]).collect::<Vec<_>>());
    let mut out = Vec::with_capacity(t.len() * free_space.size() as usize);
    for base in t.iter() {
        let mut b = 0u128;
        for (k, &v) in inside.iter().enumerate() {
            b += sub.digit(base, k) as u128 * space.stride[v];
        }
        for f in 0..free_space.size() {
            let mut c = b;
            for (k, &v) in free.iter().enumerate() {
                c += free_space.digit(f, k) as u128 * space.stride[v];
            }
            out.push(c);
        }
    }
    CellSet::from_vec(out)
}

/// `∩_k π_{w_k}^{-1}(t_k)` enumerated over `space`, optionally inside `within`.
pub fn intersect_lifts(space: &Space, parts: &[(VSet, CellSet)], within: Option<&CellSet>) -> CellSet {
    let projs: Vec<(Projector, HashSet<Cell>)> = parts
        .iter()
        .map(|(w, t)| (space.projector(*w), t.iter().collect()))
        .collect();
    let test = |c: Cell| projs.iter().all(|(p, s)| s.contains(&p.apply(c)));
    match within {
        Some(base) => base.iter().filter(|&c| test(c)).collect(),
        None => {
            if let Some(((w, t), rest)) = parts.split_first() {
                let first = lift_explicit(space, t, *w);
                if rest.is_empty() {
                    return first;
                }
                first.iter().filter(|&c| test(c)).collect()
            } else {
                CellSet::full(space.size() as u64)
            }
        }
    }
}
