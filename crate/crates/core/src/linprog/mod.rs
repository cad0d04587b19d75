//! Linear programming: a general dense two-phase simplex and the active-set
//! simplex behind facial closures.

pub mod face;
pub mod field;

pub use field::Field;

use crate::exact::Q;

/// Arithmetic used by a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

/// Feasibility tolerance in float mode.
pub const TAU_F: f64 = 1e-9;
/// Zero-classification tolerance for activities in float mode.
pub const TAU_0: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Float-mode numerical trouble; retry in exact mode.
    Numerical(String),
}

/// A row with optional bounds `lower ≤ row·x ≤ upper`.
#[derive(Clone, Debug)]
pub struct Bounded {
    pub row: Vec<Q>,
    pub lower: Option<Q>,
    pub upper: Option<Q>,
}

/// Maximize `objective·x`; variables are free unless flagged nonnegative.
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    pub n_vars: usize,
    pub objective: Vec<Q>,
    pub equalities: Vec<(Vec<Q>, Q)>,
    pub inequalities: Vec<Bounded>,
    pub nonneg: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub z: f64,
    /// Exact point and value in exact mode.
    pub exact: Option<(Vec<Q>, Q)>,
    /// Largest constraint violation of `x`.
    pub residual: f64,
}

impl LpProblem {
    pub fn new(n_vars: usize) -> LpProblem {
        LpProblem {
            n_vars,
            objective: vec![crate::exact::q(0); n_vars],
            nonneg: vec![false; n_vars],
            ..Default::default()
        }
    }

    fn residual(&self, x: &[f64]) -> f64 {
        let dot = |r: &[Q]| r.iter().zip(x).map(|(a, b)| Field::to_f64(a) * b).sum::<f64>();
        let mut worst: f64 = 0.0;
        for (r, d) in &self.equalities {
            worst = worst.max((dot(r) - Field::to_f64(d)).abs());
        }
        for b in &self.inequalities {
            let v = dot(&b.row);
            if let Some(l) = &b.lower {
                worst = worst.max(Field::to_f64(l) - v);
            }
            if let Some(u) = &b.upper {
                worst = worst.max(v - Field::to_f64(u));
            }
        }
        worst
    }
}

/// Solves `p` with Bland's rule in the requested arithmetic.
pub fn solve(p: &LpProblem, mode: Mode) -> LpSolution {
    match mode {
        Mode::Exact => {
            let (status, x, z) = dense_simplex::<Q>(p);
            let xf: Vec<f64> = x.iter().map(Field::to_f64).collect();
            let residual = if status == LpStatus::Optimal { p.residual(&xf) } else { 0.0 };
            LpSolution { status, z: Field::to_f64(&z), x: xf, exact: Some((x, z)), residual }
        }
        Mode::Float => {
            let (mut status, x, z) = dense_simplex::<f64>(p);
            let residual = if status == LpStatus::Optimal { p.residual(&x) } else { 0.0 };
            if status == LpStatus::Optimal && residual > 1e3 * TAU_F {
                status = LpStatus::Numerical(format!("residual {residual:e}"));
            }
            LpSolution { status, x, z, exact: None, residual }
        }
    }
}

fn dense_simplex<T: Field>(p: &LpProblem) -> (LpStatus, Vec<T>, T) {
    let n = p.n_vars;
    let tol = TAU_F;
    let nonneg = |j: usize| p.nonneg.get(j).copied().unwrap_or(false);
    // structural columns: x_j (or x_j^+), then x_j^- for free variables
    let mut neg_col = vec![usize::MAX; n];
    let mut n_x = n;
    for (j, nc) in neg_col.iter_mut().enumerate() {
        if !nonneg(j) {
            *nc = n_x;
            n_x += 1;
        }
    }
    // standard form rows: (coefficients on x, slack sign, rhs)
    let mut rows: Vec<(Vec<T>, i32, T)> = Vec::new();
    for (r, d) in &p.equalities {
        rows.push((r.iter().map(T::from_q).collect(), 0, T::from_q(d)));
    }
    for b in &p.inequalities {
        let r: Vec<T> = b.row.iter().map(T::from_q).collect();
        if let Some(l) = &b.lower {
            rows.push((r.clone(), -1, T::from_q(l)));
        }
        if let Some(u) = &b.upper {
            rows.push((r, 1, T::from_q(u)));
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != 0).count();
    let n_struct = n_x + n_slack;
    let mut tab: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut needs_art = Vec::new();
    let mut slack = 0;
    for (r, s, d) in rows.into_iter() {
        let mut row = vec![T::zero(); n_struct];
        for j in 0..n {
            row[j] = r[j].clone();
            if neg_col[j] != usize::MAX {
                row[neg_col[j]] = r[j].neg();
            }
        }
        let mut slack_col = None;
        if s != 0 {
            row[n_x + slack] = T::from_i64(s as i64);
            slack_col = Some(n_x + slack);
            slack += 1;
        }
        let mut rhs = d;
        if rhs.sign(0.0) < 0 {
            for x in row.iter_mut() {
                *x = x.neg();
            }
            rhs = rhs.neg();
        }
        row.push(rhs);
        match slack_col {
            Some(c) if row[c].sign(0.0) > 0 => basis.push(c),
            _ => {
                basis.push(usize::MAX);
                needs_art.push(tab.len());
            }
        }
        tab.push(row);
    }
    let n_art = needs_art.len();
    let ncols = n_struct + n_art;
    for row in tab.iter_mut() {
        let rhs = row.pop().unwrap();
        row.resize(ncols, T::zero());
        row.push(rhs);
    }
    for (a, &i) in needs_art.iter().enumerate() {
        tab[i][n_struct + a] = T::one();
        basis[i] = n_struct + a;
    }
    // phase 1: maximize −Σ artificials
    let mut obj = vec![T::zero(); ncols + 1];
    for &i in &needs_art {
        for j in 0..n_struct {
            obj[j].add_assign(&tab[i][j]);
        }
        obj[ncols].add_assign(&tab[i][ncols]);
    }
    if let Err(s) = run_simplex(&mut tab, &mut basis, &mut obj, ncols, tol) {
        return (s, vec![T::zero(); n], T::zero());
    }
    if obj[ncols].sign(tol) > 0 {
        return (LpStatus::Infeasible, vec![T::zero(); n], T::zero());
    }
    // drive artificials out of the basis
    let mut i = 0;
    while i < tab.len() {
        if basis[i] >= n_struct {
            match (0..n_struct).find(|&j| tab[i][j].sign(tol) != 0) {
                Some(j) => pivot(&mut tab, &mut basis, &mut obj, i, j),
                None => {
                    tab.remove(i);
                    basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    for row in tab.iter_mut() {
        for x in row[n_struct..ncols].iter_mut() {
            *x = T::zero();
        }
    }
    // phase 2 reduced costs
    let mut c = vec![T::zero(); ncols];
    for j in 0..n {
        c[j] = T::from_q(&p.objective[j]);
        if neg_col[j] != usize::MAX {
            c[neg_col[j]] = c[j].neg();
        }
    }
    let mut obj = vec![T::zero(); ncols + 1];
    obj[..ncols].clone_from_slice(&c);
    for (i, row) in tab.iter().enumerate() {
        let cb = c[basis[i]].clone();
        if cb.sign(0.0) != 0 {
            for j in 0..=ncols {
                let t = cb.mul(&row[j]);
                obj[j] = obj[j].sub(&t);
            }
        }
    }
    if let Err(s) = run_simplex(&mut tab, &mut basis, &mut obj, n_struct, tol) {
        return (s, vec![T::zero(); n], T::zero());
    }
    let mut xs = vec![T::zero(); ncols];
    for (i, &b) in basis.iter().enumerate() {
        xs[b] = tab[i][ncols].clone();
    }
    let x: Vec<T> = (0..n)
        .map(|j| if neg_col[j] != usize::MAX { xs[j].sub(&xs[neg_col[j]]) } else { xs[j].clone() })
        .collect();
    let z = obj[ncols].neg();
    (LpStatus::Optimal, x, z)
}

/// Bland's rule: smallest improving column, then smallest basic index on ties.
fn run_simplex<T: Field>(
    tab: &mut [Vec<T>],
    basis: &mut [usize],
    obj: &mut [T],
    allowed: usize,
    tol: f64,
) -> Result<(), LpStatus> {
    let rhs = obj.len() - 1;
    let mut iters = 0usize;
    loop {
        iters += 1;
        if iters > 1_000_000 {
            return Err(LpStatus::Numerical("iteration limit".into()));
        }
        let Some(e) = (0..allowed).find(|&j| obj[j].sign(tol) > 0) else { return Ok(()) };
        let mut best: Option<(usize, T)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[e].sign(tol) > 0 {
                let ratio = row[rhs].div(&row[e]);
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        let c = ratio.sub(br).sign(if T::EXACT { 0.0 } else { tol });
                        c < 0 || (c == 0 && basis[i] < basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        let Some((l, _)) = best else { return Err(LpStatus::Unbounded) };
        pivot_rows(tab, basis, obj, l, e);
    }
}

fn pivot<T: Field>(tab: &mut [Vec<T>], basis: &mut [usize], obj: &mut [T], l: usize, e: usize) {
    pivot_rows(tab, basis, obj, l, e)
}

fn pivot_rows<T: Field>(tab: &mut [Vec<T>], basis: &mut [usize], obj: &mut [T], l: usize, e: usize) {
    let inv = T::one().div(&tab[l][e]);
    for x in tab[l].iter_mut() {
        *x = x.mul(&inv);
    }
    let prow = tab[l].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i != l && !row[e].is_exact_zero() {
            let f = row[e].clone();
            for (x, p) in row.iter_mut().zip(&prow) {
                if !p.is_exact_zero() {
                    *x = x.sub(&f.mul(p));
                }
            }
        }
    }
    if !obj[e].is_exact_zero() {
        let f = obj[e].clone();
        for (x, p) in obj.iter_mut().zip(&prow) {
            if !p.is_exact_zero() {
                *x = x.sub(&f.mul(p));
            }
        }
    }
    basis[l] = e;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    #[test]
    fn box_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.objective = vec![q(1)];
        p.inequalities.push(Bounded { row: vec![q(1)], lower: Some(q(0)), upper: Some(q(1)) });
        for mode in [Mode::Exact, Mode::Float] {
            let s = solve(&p, mode);
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.z - 1.0).abs() < 1e-12);
        }
        p.inequalities[0].upper = None;
        assert_eq!(solve(&p, Mode::Exact).status, LpStatus::Unbounded);
        assert_eq!(solve(&p, Mode::Float).status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible() {
        let mut p = LpProblem::new(1);
        p.inequalities.push(Bounded { row: vec![q(1)], lower: Some(q(2)), upper: Some(q(1)) });
        assert_eq!(solve(&p, Mode::Exact).status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_and_free_vars() {
        // max x - y  s.t. x + y = 1, -3 <= x - 2y <= 3
        let mut p = LpProblem::new(2);
        p.objective = vec![q(1), q(-1)];
        p.equalities.push((vec![q(1), q(1)], q(1)));
        p.inequalities.push(Bounded { row: vec![q(1), q(-2)], lower: Some(q(-3)), upper: Some(q(3)) });
        let s = solve(&p, Mode::Exact);
        let (x, z) = s.exact.unwrap();
        // x = 5/3, y = -2/3
        assert_eq!(z, Q::new(7.into(), 3.into()));
        assert_eq!(x[0], Q::new(5.into(), 3.into()));
    }
}
