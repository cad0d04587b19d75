//! Facial sets: the iterative LP closure, a facialness test, an exact
//! max-support oracle, MLE-existence verdicts and face certificates.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::exact::{self, bareiss_solve, IntVec, Q};
use crate::linprog::face::{solve_face_lp, Bound, FaceLp, FaceLpResult, Slot};
use crate::linprog::{self, Bounded, LpProblem, LpStatus, Mode};
use crate::table::{Cell, CellSet, Counts, EXPLICIT_CAP};

/// Cell limit of the brute-force oracle.
pub const ORACLE_CAP: u64 = 4096;
/// Tolerance of the float log-kernel test.
pub const TAU_M: f64 = 1e-9;

/// Work limit (number of expanded terms) for the generator-marginal certificate.
const BOUND_TERM_LIMIT: u64 = 20_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FacialSet {
    pub cells: CellSet,
    /// `rank Ã_F − 1`.
    pub dimension: usize,
    /// Primitive integer `g̃` with `<g̃, f̃_i> = 0` on `F` and `> 0` off `F`;
    /// `None` when `F = I`.
    pub certificate: Option<Vec<BigInt>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactLp,
    Oracle,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub mle_exists: bool,
    pub facial_set: FacialSet,
    pub method: Method,
}

#[derive(Clone, Copy, Debug)]
pub struct FacialOptions {
    /// `Float` searches in floating point and verifies every step exactly;
    /// `Exact` pivots in rational arithmetic throughout.
    pub mode: Mode,
    pub cap: u64,
    pub max_iter: usize,
    /// Prune with the generator-marginal bound before solving LPs.
    pub marginal_bound: bool,
}

impl Default for FacialOptions {
    fn default() -> Self {
        FacialOptions { mode: Mode::Float, cap: EXPLICIT_CAP, max_iter: 1_000_000, marginal_bound: true }
    }
}

/// Counters describing one closure computation.
#[derive(Clone, Debug, Default)]
pub struct ClosureStats {
    pub rounds: usize,
    pub exact_rounds: usize,
    pub lp_rows: usize,
    pub bound_size: usize,
}

impl FacialSet {
    /// Decodes the certificate into `(coeffs, constant)`: the face lies on `<coeffs, x> = constant`.
    pub fn equation(&self) -> Option<(Vec<BigInt>, BigInt)> {
        self.certificate.as_ref().map(|g| (g[1..].to_vec(), -g[0].clone()))
    }
}

/// `<g̃, f̃_cell>` in exact integer arithmetic.
pub fn certificate_value(design: &Design, g: &[BigInt], cell: Cell) -> BigInt {
    design.column_aug(cell).iter().map(|&j| &g[j as usize]).sum()
}

/// Checks `<g̃, f̃_i> = 0` on `cells` and `> 0` elsewhere, over all of `I`.
pub fn verify_certificate(design: &Design, g: &[BigInt], cells: &CellSet, cap: u64) -> Result<()> {
    let size = design.space().explicit_size(cap)?;
    let gv = IntVec::new(g.to_vec());
    let bad = (0..size as Cell).into_par_iter().find_any(|&c| {
        let col = design.column_aug(c);
        let s = gv.sum_sign(&col);
        if cells.contains(c) {
            s != 0
        } else {
            s <= 0
        }
    });
    match bad {
        Some(c) => Err(Error::Verification(format!("certificate fails at cell {c}"))),
        None => Ok(()),
    }
}

/// Smallest facial set containing `s`.
pub fn facial_closure(design: &Design, s: &CellSet, opts: &FacialOptions) -> Result<FacialSet> {
    facial_closure_stats(design, s, opts).map(|r| r.0)
}

/// Generator-marginal bound `C = ∩_G π_G^{-1}(π_G S)`, a facial superset of `s`.
pub fn marginal_bound(design: &Design, s: &CellSet, cap: u64) -> Result<CellSet> {
    let space = design.space();
    let size = space.explicit_size(cap)?;
    let projs: Vec<_> = design
        .complex()
        .generators()
        .iter()
        .map(|&g| {
            let p = space.projector(g);
            let t: HashSet<Cell> = s.iter().map(|c| p.apply(c)).collect();
            (p, t)
        })
        .filter(|(p, t)| (t.len() as u128) < p.target().size())
        .collect();
    if projs.is_empty() {
        return Ok(CellSet::full(size));
    }
    let cells: Vec<Cell> = (0..size as Cell)
        .into_par_iter()
        .filter(|&c| projs.iter().all(|(p, t)| t.contains(&p.apply(c))))
        .collect();
    Ok(CellSet::from_vec(cells))
}

/// Certificate of the marginal bound: `Σ_G (1 − Σ_{x∈π_G S} δ_x)` in corner coordinates.
fn marginal_certificate(design: &Design, s: &CellSet) -> Option<Vec<BigInt>> {
    let space = design.space();
    let radix = space.radix();
    let mut h = vec![0i64; design.dim()];
    let mut work = 0u64;
    for &g in design.complex().generators() {
        let p = space.projector(g);
        let t: HashSet<Cell> = s.iter().map(|c| p.apply(c)).collect();
        if t.len() as u128 == p.target().size() {
            continue;
        }
        h[0] += 1;
        let vars = g.to_vec();
        for &x in &t {
            let sub = p.target();
            let mut base = vec![0u32; radix.len()];
            let mut zeros = Vec::new();
            for (k, &v) in vars.iter().enumerate() {
                let d = sub.digit(x, k);
                base[v] = d;
                if d == 0 {
                    zeros.push(v);
                }
            }
            let zspace: Vec<u32> = zeros.iter().map(|&v| radix[v]).collect();
            let n_terms: u64 = zspace.iter().map(|&r| r as u64).product();
            work += n_terms;
            if work > BOUND_TERM_LIMIT {
                return None;
            }
            let mut digits = base.clone();
            for k in 0..n_terms {
                let mut rem = k;
                let mut w_size = 0;
                for (i, &v) in zeros.iter().enumerate() {
                    let l = (rem % zspace[i] as u64) as u32;
                    rem /= zspace[i] as u64;
                    digits[v] = l;
                    if l > 0 {
                        w_size += 1;
                    }
                }
                let cell = space.index(&digits);
                let sup = space.support(cell);
                let sign = if w_size % 2 == 0 { 1 } else { -1 };
                let idx = if sup.is_empty() { 0 } else { design.row_of(sup, cell)? + 1 };
                h[idx] -= sign;
            }
        }
    }
    Some(h.into_iter().map(BigInt::from).collect())
}

struct Round {
    x: Vec<BigInt>,
    removed: Vec<Cell>,
}

enum RoundResult {
    Progress(Vec<BigInt>, Vec<usize>),
    Final,
}

/// Closure with diagnostics.
pub fn facial_closure_stats(design: &Design, s: &CellSet, opts: &FacialOptions) -> Result<(FacialSet, ClosureStats)> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let size = design.space().explicit_size(opts.cap)?;
    let d = design.dim();
    let mut stats = ClosureStats::default();
    if s.len() as u64 == size {
        let dimension = d - 1;
        return Ok((FacialSet { cells: s.clone(), dimension, certificate: None }, stats));
    }

    let (c_set, h_c) = if opts.marginal_bound {
        let c = marginal_bound(design, s, opts.cap)?;
        if (c.len() as u64) < size {
            match marginal_certificate(design, s) {
                Some(h) => (c, Some(h)),
                None => (CellSet::full(size), None),
            }
        } else {
            (c, None)
        }
    } else {
        (CellSet::full(size), None)
    };
    stats.bound_size = c_set.len();

    let (rank_s, chosen) = design.rank_cells(s);
    let kernel: Vec<IntVec> = design.kernel_of(&chosen).into_iter().map(IntVec::new).collect();

    // cells of the bound outside span(S) are the candidates
    let rest = c_set.difference(s);
    let a0: Vec<Cell> = rest
        .as_slice()
        .par_iter()
        .copied()
        .filter(|&c| {
            let col = design.column_aug(c);
            kernel.iter().any(|k| k.sum_sign(&col) != 0)
        })
        .collect();
    let mut rounds: Vec<Round> = Vec::new();
    let mut a0 = a0;
    if !a0.is_empty() && rank_s < design.rank_cells(&c_set).0 {
        let eq_rows: Vec<Vec<u32>> = chosen.iter().map(|&c| design.column_aug(c)).collect();
        stats.lp_rows = a0.len();
        while !a0.is_empty() {
            let mut rows = eq_rows.clone();
            rows.extend(a0.iter().map(|&c| design.column_aug(c)));
            let mut eq = vec![true; eq_rows.len()];
            eq.resize(rows.len(), false);
            let lp = FaceLp { rows: &rows, eq: &eq, dim: d };
            stats.rounds += 1;
            let res = match opts.mode {
                Mode::Float => match float_round(&lp, opts.max_iter) {
                    Some(r) => r,
                    None => {
                        stats.exact_rounds += 1;
                        exact_round(&lp, opts.max_iter)?
                    }
                },
                Mode::Exact => {
                    stats.exact_rounds += 1;
                    exact_round(&lp, opts.max_iter)?
                }
            };
            match res {
                RoundResult::Final => break,
                RoundResult::Progress(x, pos) => {
                    let neq = eq_rows.len();
                    let mut gone = vec![false; a0.len()];
                    for &r in &pos {
                        gone[r - neq] = true;
                    }
                    let removed: Vec<Cell> = a0.iter().zip(&gone).filter(|(_, &g)| g).map(|(&c, _)| c).collect();
                    a0 = a0.iter().zip(&gone).filter(|(_, &g)| !g).map(|(&c, _)| c).collect();
                    rounds.push(Round { x, removed });
                }
            }
        }
    }
    let removed: HashSet<Cell> = rounds.iter().flat_map(|r| r.removed.iter().copied()).collect();
    let f = CellSet::from_vec(c_set.iter().filter(|c| !removed.contains(c)).collect());

    // combine the round certificates backwards, then with the bound certificate
    let mut h = vec![BigInt::zero(); d];
    for r in rounds.iter().rev() {
        let mut lambda = BigInt::one();
        for &c in &r.removed {
            let hv = certificate_value(design, &h, c);
            let xv = certificate_value(design, &r.x, c);
            let need = (-hv).div_floor(&xv) + 1;
            if need > lambda {
                lambda = need;
            }
        }
        for (hi, xi) in h.iter_mut().zip(&r.x) {
            *hi += &lambda * xi;
        }
    }
    if let Some(hc) = &h_c {
        let h_iv = IntVec::new(h.clone());
        let hc_iv = IntVec::new(hc.clone());
        let mu = (0..size as Cell)
            .into_par_iter()
            .filter(|&c| !c_set.contains(c))
            .map(|c| {
                let col = design.column_aug(c);
                let a = int_dot(&h_iv, &col);
                let b = int_dot(&hc_iv, &col);
                (-a).div_floor(&b) + 1
            })
            .reduce(BigInt::one, |a, b| a.max(b));
        let mu = mu.max(BigInt::one());
        for (hi, ci) in h.iter_mut().zip(hc) {
            *hi += &mu * ci;
        }
    }
    let certificate = if f.len() as u64 == size {
        None
    } else {
        let g = exact::primitive(&h.iter().map(|v| Q::from_integer(v.clone())).collect::<Vec<_>>());
        verify_certificate(design, &g, &f, opts.cap)?;
        Some(g)
    };
    let dimension = design.rank_cells(&f).0 - 1;
    Ok((FacialSet { cells: f, dimension, certificate }, stats))
}

fn int_dot(v: &IntVec, idx: &[u32]) -> BigInt {
    match v {
        IntVec::Small(x) => BigInt::from(idx.iter().map(|&i| x[i as usize]).sum::<i128>()),
        IntVec::Big(x) => idx.iter().map(|&i| &x[i as usize]).sum(),
    }
}

/// One round in floating point; the step is accepted only after exact checks.
fn float_round(lp: &FaceLp, max_iter: usize) -> Option<RoundResult> {
    let res: FaceLpResult<f64> = solve_face_lp(lp, max_iter).ok()?;
    let mut touched: Vec<u32> = lp.rows.iter().flatten().copied().collect();
    touched.sort_unstable();
    touched.dedup();
    let mut map = vec![usize::MAX; lp.dim];
    for (k, &t) in touched.iter().enumerate() {
        map[t as usize] = k;
    }
    let n = touched.len();
    let mut b = vec![vec![BigInt::zero(); n]; n];
    let mut rhs = vec![BigInt::zero(); n];
    for (k, (slot, bound)) in res.basis.iter().enumerate() {
        match *slot {
            Slot::Row(r) => {
                for &i in &lp.rows[r] {
                    b[k][map[i as usize]] = BigInt::one();
                }
            }
            Slot::Unit(u) => b[k][map[u]] = BigInt::one(),
        }
        if *bound == Bound::Upper {
            rhs[k] = BigInt::one();
        }
    }
    let (xc, _den) = bareiss_solve(&b, &rhs)?;
    let mut x = vec![BigInt::zero(); lp.dim];
    for (k, &t) in touched.iter().enumerate() {
        x[t as usize] = xc[k].clone();
    }
    let xv = IntVec::new(x.clone());
    let mut positive = Vec::new();
    for (r, row) in lp.rows.iter().enumerate() {
        let s = xv.sum_sign(row);
        if lp.eq[r] {
            if s != 0 {
                return None;
            }
        } else if s < 0 {
            return None;
        } else if s > 0 {
            positive.push(r);
        }
    }
    if !positive.is_empty() {
        return Some(RoundResult::Progress(x, positive));
    }
    // optimality: B^T u = c with sign conditions on the duals
    let mut c = vec![BigInt::zero(); n];
    for (r, row) in lp.rows.iter().enumerate() {
        if !lp.eq[r] {
            for &i in row {
                c[map[i as usize]] += 1;
            }
        }
    }
    let bt: Vec<Vec<BigInt>> = (0..n).map(|i| (0..n).map(|k| b[k][i].clone()).collect()).collect();
    let (u, _) = bareiss_solve(&bt, &c)?;
    for (k, (slot, bound)) in res.basis.iter().enumerate() {
        let ok = match (slot, bound) {
            (Slot::Unit(_), _) => u[k].is_zero(),
            (_, Bound::Eq) => true,
            (_, Bound::Lower) => !u[k].is_positive(),
            (_, Bound::Upper) => !u[k].is_negative(),
        };
        if !ok {
            return None;
        }
    }
    Some(RoundResult::Final)
}

fn exact_round(lp: &FaceLp, max_iter: usize) -> Result<RoundResult> {
    let res: FaceLpResult<Q> = solve_face_lp(lp, max_iter).map_err(Error::Lp)?;
    if res.objective.is_zero() {
        return Ok(RoundResult::Final);
    }
    let positive: Vec<usize> =
        (0..lp.rows.len()).filter(|&r| !lp.eq[r] && res.values[r].is_positive()).collect();
    Ok(RoundResult::Progress(exact::primitive(&res.g), positive))
}

/// Verdict for the data: the facial set of its support.
pub fn facial_set_of_data(design: &Design, counts: &Counts, opts: &FacialOptions) -> Result<Verdict> {
    let s = counts.support();
    if s.is_empty() {
        return Err(Error::NoObservations);
    }
    let size = design.space().explicit_size(opts.cap)?;
    let facial_set = facial_closure(design, &s, opts)?;
    Ok(Verdict { mle_exists: facial_set.cells.len() as u64 == size, facial_set, method: Method::ExactLp })
}

/// Whether `f` is facial: feasibility of `<g̃,f̃_i> = 0` on `f`, `≥ 1` off `f`.
pub fn is_facial(design: &Design, f: &CellSet, mode: Mode) -> Result<bool> {
    let size = design.space().explicit_size(EXPLICIT_CAP)?;
    let d = design.dim();
    let mut p = LpProblem::new(d);
    let chosen = if f.is_empty() { Vec::new() } else { design.rank_cells(f).1 };
    for c in chosen {
        p.equalities.push((aug_row(design, c), exact::q(0)));
    }
    for c in 0..size as Cell {
        if !f.contains(c) {
            p.inequalities.push(Bounded { row: aug_row(design, c), lower: Some(exact::q(1)), upper: None });
        }
    }
    Ok(linprog::solve(&p, mode).status == LpStatus::Optimal)
}

fn aug_row(design: &Design, c: Cell) -> Vec<Q> {
    let mut r = vec![exact::q(0); design.dim()];
    for j in design.column_aug(c) {
        r[j as usize] = exact::q(1);
    }
    r
}

/// Independent exact oracle. The face of `x = Σ_{i∈S} f̃_i` is the largest
/// support of a nonnegative representation `Σ_j w_j f̃_j = s x`; one rational
/// LP finds it by maximizing `Σ_j min(w_j, 1)`.
pub fn bruteforce_facial(design: &Design, s: &CellSet) -> Result<FacialSet> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    let size = design.space().explicit_size(ORACLE_CAP)? as usize;
    let d = design.dim();
    let mut x = vec![0i64; d];
    for c in s.iter() {
        for j in design.column_aug(c) {
            x[j as usize] += 1;
        }
    }
    // variables: y_j = w_j − z_j ≥ 0, z_j ∈ [0,1], scale s ≥ 0
    let nv = 2 * size + 1;
    let mut p = LpProblem::new(nv);
    p.nonneg = vec![true; nv];
    let cols: Vec<Vec<u32>> = (0..size as Cell).map(|c| design.column_aug(c)).collect();
    for k in 0..d {
        let mut row = vec![exact::q(0); nv];
        for (j, col) in cols.iter().enumerate() {
            if col.binary_search(&(k as u32)).is_ok() {
                row[j] = exact::q(1);
                row[size + j] = exact::q(1);
            }
        }
        row[2 * size] = exact::q(-x[k]);
        p.equalities.push((row, exact::q(0)));
    }
    for j in 0..size {
        let mut row = vec![exact::q(0); nv];
        row[size + j] = exact::q(1);
        p.inequalities.push(Bounded { row, lower: None, upper: Some(exact::q(1)) });
        p.objective[size + j] = exact::q(1);
    }
    let sol = linprog::solve(&p, Mode::Exact);
    let (xs, z) = match (sol.status, sol.exact) {
        (LpStatus::Optimal, Some(e)) => e,
        (st, _) => return Err(Error::Lp(format!("oracle LP ended with {st:?}"))),
    };
    let cells: Vec<Cell> = (0..size).filter(|&j| xs[size + j] == exact::q(1)).map(|j| j as Cell).collect();
    if exact::q(cells.len() as i64) != z {
        return Err(Error::Verification("oracle optimum is not integral".into()));
    }
    let f = CellSet::from_vec(cells);
    if !s.is_subset(&f) {
        return Err(Error::Invariant("oracle face misses the input set".into()));
    }
    let dimension = design.rank_cells(&f).0 - 1;
    Ok(FacialSet { cells: f, dimension, certificate: None })
}

/// Facets of the marginal polytope containing the face of `f`, with linearly
/// independent normals spanning the normal space of the face. Each new facet
/// is grown from `f` while avoiding a cell that lies on all facets found so
/// far but not on `f`, so its normal is outside their span.
///
/// When possible the facets are chosen so that every one of them has a
/// witness: a cell on all the other chosen facets but not on it. This needs a
/// search over a pool of facets and can fail at faces that are not simple, in
/// which case the first independent choice is returned.
pub fn facets_containing(design: &Design, f: &CellSet, opts: &FacialOptions) -> Result<Vec<FacialSet>> {
    let size = design.space().explicit_size(opts.cap)? as Cell;
    let full_dim = design.n_rows();
    let face = facial_closure(design, f, opts)?;
    if face.cells != *f {
        return Err(Error::Invariant("input set is not facial".into()));
    }
    let codim = full_dim - face.dimension;
    let mut facets: Vec<FacialSet> = Vec::new();
    let mut normals: Vec<Vec<Q>> = Vec::new();
    // at a simple face a cell on all facets so far but off `f` always exists
    while normals.len() < codim {
        let Some(avoid) = (0..size).find(|&c| !f.contains(c) && facets.iter().all(|g| g.cells.contains(c))) else { break };
        let g = facet_avoiding(design, &face, avoid, (0..size).collect(), opts)?;
        normals.push(facet_normal(&g));
        if exact::exact_rank(&normals) != normals.len() {
            return Err(Error::Invariant("facet normal is dependent on earlier ones".into()));
        }
        facets.push(g);
    }
    if normals.len() == codim && has_witnesses(&facets, f, size) {
        return Ok(facets);
    }
    let mut pool = facets.clone();
    let add = |g: FacialSet, pool: &mut Vec<FacialSet>| {
        if pool.iter().all(|x| x.cells != g.cells) {
            pool.push(g);
        }
    };
    for avoid in (0..size).filter(|&c| !f.contains(c)) {
        for order in [(0..size).collect::<Vec<_>>(), (0..size).rev().collect()] {
            add(facet_avoiding(design, &face, avoid, order, opts)?, &mut pool);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(size as u64);
    let mut attempts = 0;
    while exact::exact_rank(&pool.iter().map(facet_normal).collect::<Vec<_>>()) < codim {
        attempts += 1;
        if attempts > 64 {
            return Err(Error::Invariant(format!("found facets do not span the {codim} normal directions")));
        }
        let outside: Vec<Cell> = (0..size).filter(|&c| !f.contains(c)).collect();
        let avoid = outside[rng.random_range(0..outside.len())];
        let mut order: Vec<Cell> = (0..size).collect();
        order.shuffle(&mut rng);
        add(facet_avoiding(design, &face, avoid, order, opts)?, &mut pool);
    }
    let pool_normals: Vec<Vec<Q>> = pool.iter().map(facet_normal).collect();
    let mut search = WitnessSearch { pool: &pool, normals: &pool_normals, f, size, codim, nodes: 0, chosen: Vec::new() };
    if search.extend(0) {
        return Ok(search.chosen.iter().map(|&k| pool[k].clone()).collect());
    }
    // no witnessed choice found: any independent spanning subset
    let mut chosen: Vec<FacialSet> = Vec::new();
    let mut basis: Vec<Vec<Q>> = Vec::new();
    for (g, n) in pool.iter().zip(&pool_normals) {
        basis.push(n.clone());
        if exact::exact_rank(&basis) == basis.len() {
            chosen.push(g.clone());
        } else {
            basis.pop();
        }
    }
    Ok(chosen)
}

/// Largest face through `face` not containing `avoid`, grown by trying cells in `order`.
fn facet_avoiding(design: &Design, face: &FacialSet, avoid: Cell, order: Vec<Cell>, opts: &FacialOptions) -> Result<FacialSet> {
    let mut g = face.clone();
    for c in order {
        if c == avoid || g.cells.contains(c) {
            continue;
        }
        let mut cand: Vec<Cell> = g.cells.as_slice().to_vec();
        cand.push(c);
        let h = facial_closure(design, &CellSet::from_vec(cand), opts)?;
        if !h.cells.contains(avoid) {
            g = h;
        }
    }
    if g.dimension + 1 != design.n_rows() || g.certificate.is_none() {
        return Err(Error::Invariant("maximal face avoiding a cell is not a facet".into()));
    }
    Ok(g)
}

fn facet_normal(g: &FacialSet) -> Vec<Q> {
    g.certificate.as_ref().map_or_else(Vec::new, |c| c.iter().map(|v| Q::from_integer(v.clone())).collect())
}

fn has_witnesses(facets: &[FacialSet], f: &CellSet, size: Cell) -> bool {
    let refs: Vec<&FacialSet> = facets.iter().collect();
    witnessed(&refs, f, size)
}

// every facet has a cell outside `f` lying on all the others but not on it
fn witnessed(facets: &[&FacialSet], f: &CellSet, size: Cell) -> bool {
    (0..facets.len()).all(|j| {
        (0..size).any(|c| {
            !f.contains(c) && !facets[j].cells.contains(c) && facets.iter().enumerate().all(|(k, g)| k == j || g.cells.contains(c))
        })
    })
}

struct WitnessSearch<'a> {
    pool: &'a [FacialSet],
    normals: &'a [Vec<Q>],
    f: &'a CellSet,
    size: Cell,
    codim: usize,
    nodes: usize,
    chosen: Vec<usize>,
}

impl WitnessSearch<'_> {
    const NODE_LIMIT: usize = 100_000;

    // the witness condition only gets harder as facets are added, so it prunes
    fn extend(&mut self, from: usize) -> bool {
        if self.chosen.len() == self.codim {
            return true;
        }
        for k in from..self.pool.len() {
            if self.pool.len() - k < self.codim - self.chosen.len() || self.nodes >= Self::NODE_LIMIT {
                return false;
            }
            self.nodes += 1;
            self.chosen.push(k);
            let normals: Vec<Vec<Q>> = self.chosen.iter().map(|&i| self.normals[i].clone()).collect();
            let sets: Vec<&FacialSet> = self.chosen.iter().map(|&i| &self.pool[i]).collect();
            if exact::exact_rank(&normals) == normals.len() && witnessed(&sets, self.f, self.size) && self.extend(k + 1) {
                return true;
            }
            self.chosen.pop();
        }
        false
    }
}

/// Whether `log p ⟂ ker Ã` (`p` indexed by cell), with tolerance `TAU_M`.
pub fn log_kernel_membership(design: &Design, p: &[f64]) -> Result<bool> {
    let ker = cell_kernel(design, p.len())?;
    let logs: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    Ok(ker.iter().all(|k| {
        let mut s = 0.0;
        let mut scale = 1.0;
        for (ki, li) in k.iter().zip(&logs) {
            let kf = ki.to_f64().unwrap_or(f64::MAX);
            s += kf * li;
            scale += (kf * li).abs();
        }
        s.abs() <= TAU_M * scale
    }))
}

/// Exact variant for rational `p`: `Π p_i^{k_i} = 1` for every kernel vector.
pub fn log_kernel_membership_exact(design: &Design, p: &[Q]) -> Result<bool> {
    let ker = cell_kernel(design, p.len())?;
    Ok(ker.iter().all(|k| {
        let mut num = BigInt::one();
        let mut den = BigInt::one();
        for (ki, pi) in k.iter().zip(p) {
            let e = ki.abs().to_u32().unwrap_or(u32::MAX);
            if e == 0 {
                continue;
            }
            let (a, b) = (num_traits::pow(pi.numer().clone(), e as usize), num_traits::pow(pi.denom().clone(), e as usize));
            if ki.is_positive() {
                num *= a;
                den *= b;
            } else {
                num *= b;
                den *= a;
            }
        }
        num == den
    }))
}

fn cell_kernel(design: &Design, n: usize) -> Result<Vec<Vec<BigInt>>> {
    let size = design.space().explicit_size(ORACLE_CAP)? as usize;
    if n != size {
        return Err(Error::Dimension { expected: size, got: n });
    }
    let cells: Vec<Cell> = (0..size as Cell).collect();
    Ok(exact::kernel(&design.dense_aug(&cells), size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Complex;
    use crate::table::Schema;

    fn sat2() -> Design {
        let c = Complex::new(&["x", "y"], &[vec!["x", "y"]]).unwrap();
        Design::build(&c, &Schema::binary(&["x", "y"]).unwrap()).unwrap()
    }

    fn abc() -> Design {
        let c = Complex::new(&["a", "b", "c"], &[vec!["a", "b"], vec!["b", "c"]]).unwrap();
        Design::build(&c, &Schema::binary(&["a", "b", "c"]).unwrap()).unwrap()
    }

    fn ints(v: &[BigInt]) -> Vec<i64> {
        v.iter().map(|x| x.to_i64().unwrap()).collect()
    }

    #[test]
    fn facet_of_two_by_two() {
        let d = sat2();
        for mode in [Mode::Exact, Mode::Float] {
            let opts = FacialOptions { mode, ..Default::default() };
            let f = facial_closure(&d, &CellSet::from_vec(vec![0, 1, 2]), &opts).unwrap();
            assert_eq!(f.cells.as_slice(), &[0, 1, 2]);
            assert_eq!(f.dimension, 2);
            assert_eq!(ints(f.certificate.as_ref().unwrap()), vec![0, 0, 0, 1]);
        }
    }

    #[test]
    fn edges_and_vertices() {
        let d = sat2();
        let opts = FacialOptions::default();
        let f = facial_closure(&d, &CellSet::from_vec(vec![1, 3]), &opts).unwrap();
        assert_eq!(f.cells.as_slice(), &[1, 3]);
        assert_eq!(f.dimension, 1);
        let f = facial_closure(&d, &CellSet::from_vec(vec![1]), &opts).unwrap();
        assert_eq!(f.cells.as_slice(), &[1]);
        let f = facial_closure(&d, &CellSet::full(4), &opts).unwrap();
        assert!(f.certificate.is_none());
    }

    #[test]
    fn fix_abc_middle_level() {
        let d = abc();
        // cells with b = 1: indices with bit 1 set
        let s = CellSet::from_vec(vec![2, 3, 6, 7]);
        let f = facial_closure(&d, &s, &FacialOptions::default()).unwrap();
        assert_eq!(f.cells, s);
        assert_eq!(bruteforce_facial(&d, &s).unwrap().cells, s);
    }

    #[test]
    fn facialness() {
        let d = sat2();
        assert!(is_facial(&d, &CellSet::from_vec(vec![0, 1, 2]), Mode::Exact).unwrap());
        assert!(is_facial(&d, &CellSet::full(4), Mode::Exact).unwrap());
        assert!(is_facial(&d, &CellSet::from_vec(vec![0, 3]), Mode::Exact).unwrap());
        // without the marginal structure the diagonal is not facial
        let c = Complex::new(&["x", "y"], &[vec!["x"], vec!["y"]]).unwrap();
        let ind = Design::build(&c, &Schema::binary(&["x", "y"]).unwrap()).unwrap();
        assert!(!is_facial(&ind, &CellSet::from_vec(vec![0, 3]), Mode::Exact).unwrap());
        assert_eq!(bruteforce_facial(&ind, &CellSet::from_vec(vec![0, 3])).unwrap().cells, CellSet::full(4));
    }

    #[test]
    fn oracle_agrees_on_sat2() {
        let d = sat2();
        for mask in 1u32..16 {
            let s: CellSet = (0..4).filter(|i| mask >> i & 1 == 1).map(|i| i as Cell).collect();
            let a = facial_closure(&d, &s, &FacialOptions::default()).unwrap();
            let b = bruteforce_facial(&d, &s).unwrap();
            assert_eq!(a.cells, b.cells, "mask {mask}");
        }
    }

    #[test]
    fn log_kernel() {
        let d = abc();
        assert!(log_kernel_membership(&d, &[0.125; 8]).unwrap());
        let p: Vec<Q> = [1, 2, 3, 6, 1, 2, 3, 6].iter().map(|&v| Q::new(BigInt::from(v), BigInt::from(24))).collect();
        assert!(log_kernel_membership_exact(&d, &p).unwrap());
        let p: Vec<Q> = [1, 2, 3, 4, 5, 6, 7, 8].iter().map(|&v| Q::new(BigInt::from(v), BigInt::from(36))).collect();
        assert!(!log_kernel_membership_exact(&d, &p).unwrap());
    }
}
