//! Active-set simplex for the facial-closure program
//!
//! ```text
//! maximize  Σ_{r box} <a_r, g>
//! subject   <a_r, g> = 0        for equality rows
//!           0 <= <a_r, g> <= 1  for box rows
//! ```
//!
//! with free `g`, few variables and many sparse 0/1 rows. A vertex is described
//! by `dim` linearly independent active rows; unit rows `e_k` pin directions
//! that no row touches.

use super::field::Field;
use crate::exact::ModBasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Row(usize),
    Unit(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Eq,
    Lower,
    Upper,
}

/// Problem data: row supports in coordinates `0..dim`.
pub struct FaceLp<'a> {
    pub rows: &'a [Vec<u32>],
    pub eq: &'a [bool],
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct FaceLpResult<T> {
    /// Optimal point in the original coordinates.
    pub g: Vec<T>,
    /// Activity `<a_r, g>` of every row.
    pub values: Vec<T>,
    pub objective: T,
    /// Final basis; unit slots refer to original coordinates.
    pub basis: Vec<(Slot, Bound)>,
    pub iterations: usize,
}

const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_SWITCH: usize = 50;

struct State<T> {
    rows: Vec<Vec<u32>>,
    eq: Vec<bool>,
    dim: usize,
    c: Vec<T>,
    basis: Vec<Slot>,
    bstat: Vec<Bound>,
    pos: Vec<Option<usize>>,
    /// columns of the basis inverse
    cols: Vec<Vec<T>>,
    g: Vec<T>,
    v: Vec<T>,
}

fn dot_sparse<T: Field>(idx: &[u32], x: &[T]) -> T {
    let mut s = T::zero();
    for &i in idx {
        s.add_assign(&x[i as usize]);
    }
    s
}

impl<T: Field> State<T> {
    fn slot_row(&self, s: Slot) -> Vec<u32> {
        match s {
            Slot::Row(r) => self.rows[r].clone(),
            Slot::Unit(k) => vec![k as u32],
        }
    }

    fn rhs(&self, k: usize) -> T {
        match self.bstat[k] {
            Bound::Upper => T::one(),
            _ => T::zero(),
        }
    }

    /// Inverts the current basis matrix from scratch.
    fn refactor(&mut self) -> Result<(), String> {
        let d = self.dim;
        let mut m: Vec<Vec<T>> = (0..d)
            .map(|k| {
                let mut row = vec![T::zero(); 2 * d];
                for i in self.slot_row(self.basis[k]) {
                    row[i as usize] = T::one();
                }
                row[d + k] = T::one();
                row
            })
            .collect();
        // Gauss-Jordan on [B | I], B rows are basis rows; result columns of B^{-1}
        for c in 0..d {
            let p = if T::EXACT {
                (c..d).find(|&i| !m[i][c].is_exact_zero())
            } else {
                (c..d)
                    .filter(|&i| m[i][c].to_f64().abs() > 1e-12)
                    .max_by(|&a, &b| m[a][c].to_f64().abs().total_cmp(&m[b][c].to_f64().abs()))
            };
            let Some(p) = p else { return Err("singular basis".into()) };
            m.swap(c, p);
            let inv = T::one().div(&m[c][c]);
            for x in m[c].iter_mut() {
                *x = x.mul(&inv);
            }
            let prow = m[c].clone();
            for (i, row) in m.iter_mut().enumerate() {
                if i != c && !row[c].is_exact_zero() {
                    let f = row[c].clone();
                    for (x, pv) in row.iter_mut().zip(&prow) {
                        if !pv.is_exact_zero() {
                            *x = x.sub(&f.mul(pv));
                        }
                    }
                }
            }
        }
        // m = [I | B^{-1}] after row ops; B^{-1}[i][k] = m[i][d+k]
        self.cols = (0..d).map(|k| (0..d).map(|i| m[i][d + k].clone()).collect()).collect();
        let mut g = vec![T::zero(); d];
        for k in 0..d {
            let r = self.rhs(k);
            if !r.is_exact_zero() {
                for i in 0..d {
                    g[i].add_assign(&self.cols[k][i].mul(&r));
                }
            }
        }
        self.g = g;
        self.v = self.rows.iter().map(|r| dot_sparse(r, &self.g)).collect();
        for (k, s) in self.basis.iter().enumerate() {
            if let Slot::Row(r) = *s {
                self.v[r] = self.rhs(k);
            }
        }
        Ok(())
    }
}

/// Solves the program from `g = 0`. Float arithmetic uses Dantzig pricing and
/// switches to Bland's rule after a run of degenerate pivots; exact arithmetic
/// does the same and therefore terminates.
pub fn solve_face_lp<T: Field>(lp: &FaceLp, max_iter: usize) -> Result<FaceLpResult<T>, String> {
    // compact coordinates: only those touched by some row
    let mut touched: Vec<u32> = lp.rows.iter().flatten().copied().collect();
    touched.sort_unstable();
    touched.dedup();
    let mut map = vec![u32::MAX; lp.dim];
    for (k, &t) in touched.iter().enumerate() {
        map[t as usize] = k as u32;
    }
    let d = touched.len();
    let rows: Vec<Vec<u32>> = lp
        .rows
        .iter()
        .map(|r| r.iter().map(|&i| map[i as usize]).collect())
        .collect();
    let m = rows.len();
    let mut c = vec![T::zero(); d];
    for (r, row) in rows.iter().enumerate() {
        if !lp.eq[r] {
            for &i in row {
                c[i as usize].add_assign(&T::one());
            }
        }
    }
    // initial basis: equality rows first, then box rows, then units
    let order: Vec<usize> = (0..m).filter(|&r| lp.eq[r]).chain((0..m).filter(|&r| !lp.eq[r])).collect();
    let mut basis = Vec::with_capacity(d);
    let mut bstat = Vec::with_capacity(d);
    let pivots = select_independent::<T>(&rows, &order, d, &mut basis);
    for s in &basis {
        bstat.push(match s {
            Slot::Row(r) if lp.eq[*r] => Bound::Eq,
            _ => Bound::Lower,
        });
    }
    for k in 0..d {
        if !pivots.contains(&k) {
            basis.push(Slot::Unit(k));
            bstat.push(Bound::Eq);
        }
    }
    let mut pos = vec![None; m];
    for (k, s) in basis.iter().enumerate() {
        if let Slot::Row(r) = s {
            pos[*r] = Some(k);
        }
    }
    let mut st = State {
        rows,
        eq: lp.eq.to_vec(),
        dim: d,
        c,
        basis,
        bstat,
        pos,
        cols: Vec::new(),
        g: vec![T::zero(); d],
        v: vec![T::zero(); m],
    };
    st.refactor()?;

    let tol_p = if T::EXACT { 0.0 } else { PRICE_TOL };
    let tol_s = if T::EXACT { 0.0 } else { PIVOT_TOL };
    let mut iterations = 0usize;
    let mut degenerate = 0usize;
    let mut since_refactor = 0usize;
    let mut s_all: Vec<T> = vec![T::zero(); m];
    loop {
        if iterations >= max_iter {
            return Err(format!("iteration limit {max_iter} reached"));
        }
        iterations += 1;
        let bland = degenerate >= DEGENERATE_SWITCH;
        // pricing
        let mut choice: Option<(usize, f64)> = None;
        for k in 0..d {
            let sigma = match st.bstat[k] {
                Bound::Eq => continue,
                Bound::Lower => 1,
                Bound::Upper => -1,
            };
            let u = dot_dense(&st.c, &st.cols[k]);
            if u.sign(tol_p) == sigma {
                let mag = u.to_f64().abs();
                let better = match choice {
                    None => true,
                    Some((kb, mb)) => {
                        if bland {
                            slot_key(st.basis[k]) < slot_key(st.basis[kb])
                        } else {
                            mag > mb
                        }
                    }
                };
                if better {
                    choice = Some((k, mag));
                }
            }
        }
        let Some((k, _)) = choice else { break };
        let sigma = if st.bstat[k] == Bound::Lower { T::one() } else { T::one().neg() };
        let dir: Vec<T> = st.cols[k].iter().map(|x| x.mul(&sigma)).collect();
        // ratio test
        let mut best: Option<(usize, T, f64)> = None;
        for r in 0..m {
            if st.pos[r].is_some() || st.eq[r] {
                s_all[r] = T::zero();
                continue;
            }
            let s = dot_sparse(&st.rows[r], &dir);
            let sg = s.sign(tol_s);
            let lim = match sg {
                1 => T::one().sub(&st.v[r]).div(&s),
                -1 => st.v[r].div(&s.neg()),
                _ => {
                    s_all[r] = s;
                    continue;
                }
            };
            let lim = if lim.sign(0.0) < 0 { T::zero() } else { lim };
            let mag = s.to_f64().abs();
            s_all[r] = s;
            let better = match &best {
                None => true,
                Some((rb, lb, mb)) => {
                    let cmp = lim.sub(lb).sign(if T::EXACT { 0.0 } else { 1e-12 });
                    cmp < 0
                        || (cmp == 0 && if bland || T::EXACT { r < *rb } else { mag > *mb })
                }
            };
            if better {
                best = Some((r, lim, mag));
            }
        }
        let flip = match &best {
            None => true,
            Some((_, lim, _)) => lim.sub(&T::one()).sign(0.0) >= 0,
        };
        let step = if flip { T::one() } else { best.as_ref().unwrap().1.clone() };
        if step.sign(if T::EXACT { 0.0 } else { 1e-12 }) == 0 {
            degenerate += 1;
        } else {
            degenerate = 0;
        }
        // move
        if !step.is_exact_zero() {
            for (gi, di) in st.g.iter_mut().zip(&dir) {
                gi.add_assign(&di.mul(&step));
            }
            for r in 0..m {
                if st.pos[r].is_none() && !s_all[r].is_exact_zero() {
                    let t = s_all[r].mul(&step);
                    st.v[r].add_assign(&t);
                }
            }
        }
        if flip {
            let new = if st.bstat[k] == Bound::Lower { Bound::Upper } else { Bound::Lower };
            st.bstat[k] = new;
            if let Slot::Row(r) = st.basis[k] {
                st.v[r] = st.rhs(k);
            }
            continue;
        }
        let (r, _, _) = best.unwrap();
        let leaving = st.basis[k];
        if let Slot::Row(old) = leaving {
            st.pos[old] = None;
            let moved = if st.bstat[k] == Bound::Lower { step.clone() } else { T::one().sub(&step) };
            st.v[old] = moved;
        }
        let enter_upper = s_all[r].sign(tol_s) > 0;
        st.basis[k] = Slot::Row(r);
        st.bstat[k] = if enter_upper { Bound::Upper } else { Bound::Lower };
        st.pos[r] = Some(k);
        st.v[r] = st.rhs(k);
        // rank-one update of the inverse columns
        let w: Vec<T> = (0..d).map(|j| dot_sparse(&st.rows[r], &st.cols[j])).collect();
        if w[k].sign(if T::EXACT { 0.0 } else { 1e-11 }) == 0 {
            return Err("pivot on a vanishing element".into());
        }
        let inv = T::one().div(&w[k]);
        let ck: Vec<T> = st.cols[k].iter().map(|x| x.mul(&inv)).collect();
        for j in 0..d {
            if j != k && !w[j].is_exact_zero() {
                let f = w[j].clone();
                for (x, y) in st.cols[j].iter_mut().zip(&ck) {
                    if !y.is_exact_zero() {
                        *x = x.sub(&f.mul(y));
                    }
                }
            }
        }
        st.cols[k] = ck;
        since_refactor += 1;
        if !T::EXACT && since_refactor >= REFACTOR_EVERY {
            st.refactor()?;
            since_refactor = 0;
        }
    }
    if !T::EXACT {
        st.refactor()?;
    }
    let mut objective = T::zero();
    for r in 0..m {
        if !st.eq[r] {
            objective.add_assign(&st.v[r]);
        }
    }
    let mut g = vec![T::zero(); lp.dim];
    for (k, &t) in touched.iter().enumerate() {
        g[t as usize] = st.g[k].clone();
    }
    let basis = st
        .basis
        .iter()
        .zip(&st.bstat)
        .map(|(s, b)| {
            let s = match *s {
                Slot::Unit(k) => Slot::Unit(touched[k] as usize),
                other => other,
            };
            (s, *b)
        })
        .collect();
    Ok(FaceLpResult { g, values: st.v, objective, basis, iterations })
}

fn dot_dense<T: Field>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_exact_zero() && !y.is_exact_zero() {
            s.add_assign(&x.mul(y));
        }
    }
    s
}

fn slot_key(s: Slot) -> usize {
    match s {
        Slot::Row(r) => r,
        Slot::Unit(k) => usize::MAX - k,
    }
}

/// Picks independent rows in the given order; returns the pivot coordinates
/// of an echelon form so that missing units complete a basis.
fn select_independent<T: Field>(rows: &[Vec<u32>], order: &[usize], d: usize, out: &mut Vec<Slot>) -> Vec<usize> {
    if T::EXACT {
        let mut ech: Vec<(usize, Vec<T>)> = Vec::new();
        for &r in order {
            if ech.len() == d {
                break;
            }
            let mut v = vec![T::zero(); d];
            for &i in &rows[r] {
                v[i as usize] = T::one();
            }
            for (p, e) in &ech {
                if !v[*p].is_exact_zero() {
                    let f = v[*p].clone();
                    for (x, y) in v.iter_mut().zip(e) {
                        if !y.is_exact_zero() {
                            *x = x.sub(&f.mul(y));
                        }
                    }
                }
            }
            if let Some(p) = v.iter().position(|x| !x.is_exact_zero()) {
                let inv = T::one().div(&v[p]);
                for x in v.iter_mut() {
                    *x = x.mul(&inv);
                }
                ech.push((p, v));
                out.push(Slot::Row(r));
            }
        }
        ech.into_iter().map(|(p, _)| p).collect()
    } else {
        let mut mb = ModBasis::new(d);
        let mut piv = Vec::new();
        for &r in order {
            if mb.rank() == d {
                break;
            }
            if mb.insert_support(&rows[r]) {
                out.push(Slot::Row(r));
                piv.push(mb.last_pivot());
            }
        }
        piv
    }
}
