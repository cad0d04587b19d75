//! Likelihoods in θ- and μ-coordinates, a concave maximizer, the extended MLE,
//! IPF, μ-basis selection, parameter classification and the λ-parameters.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::ser::Serializer;
use serde::Serialize;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::exact::{self, ModBasis, Q};
use crate::table::{Cell, CellSet, Counts, EXPLICIT_CAP};

pub const TOL_GRAD: f64 = 1e-8;
pub const MAX_ITER: usize = 10_000;
pub const ARMIJO: f64 = 1e-4;
pub const SHRINK: f64 = 0.5;
pub const TOL_MOMENT: f64 = 1e-8;
pub const TOL_IPF: f64 = 1e-9;
/// Consecutive iterations with a decrease > 1 before a coordinate is flagged.
pub const DRIFT_RUN: usize = 5;

const CHUNK: usize = 2048;

/// A log-likelihood of multinomial form
/// `Σ n_i η_i − N log Σ_{i∈D} exp η_i` with `η_i = <x, φ_i>`.
#[derive(Clone, Debug)]
pub struct Features {
    cells: Vec<Cell>,
    rows: Vec<Vec<(u32, f64)>>,
    counts: Vec<f64>,
    total: f64,
    dim: usize,
}

/// Which parametrization and domain a likelihood uses.
#[derive(Clone, Copy, Debug)]
pub enum LikForm<'a> {
    /// θ over all of `I`.
    Theta,
    /// θ with the normalizer restricted to a facial set.
    ThetaOnFace(&'a CellSet),
    /// `μ_L` over all of `I`.
    Mu(&'a MuBasis),
    /// `μ_{L2}` with the normalizer restricted to `F2`.
    MuOnF2(&'a MuBasis),
}

impl LikForm<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            LikForm::Theta => "theta",
            LikForm::ThetaOnFace(_) => "theta-on-F",
            LikForm::Mu(_) => "mu",
            LikForm::MuOnF2(_) => "mu-on-F2",
        }
    }
}

impl Features {
    pub fn build(design: &Design, counts: &Counts, form: LikForm<'_>) -> Result<Features> {
        let size = design.space().explicit_size(EXPLICIT_CAP)?;
        let (cells, dim): (Vec<Cell>, usize) = match form {
            LikForm::Theta => ((0..size as Cell).collect(), design.n_rows()),
            LikForm::ThetaOnFace(f) => (f.as_slice().to_vec(), design.n_rows()),
            LikForm::Mu(b) => ((0..size as Cell).collect(), b.l.len()),
            LikForm::MuOnF2(b) => (b.f2.as_slice().to_vec(), b.l2.len()),
        };
        let rows: Vec<Vec<(u32, f64)>> = match form {
            LikForm::Theta | LikForm::ThetaOnFace(_) => cells
                .par_iter()
                .map(|&c| design.column(c).into_iter().map(|j| (j, 1.0)).collect())
                .collect(),
            LikForm::Mu(b) | LikForm::MuOnF2(b) => cells
                .par_iter()
                .map(|&c| {
                    b.coeffs(design, c)
                        .into_iter()
                        .enumerate()
                        .filter(|&(k, v)| v != 0.0 && k < dim)
                        .map(|(k, v)| (k as u32, v))
                        .collect()
                })
                .collect(),
        };
        if let LikForm::MuOnF2(b) = form {
            // b_i must vanish on L \ L2 for i in F2
            for &c in b.f2.as_slice() {
                if b.coeffs(design, c)[dim..].iter().any(|&v| v != 0.0) {
                    return Err(Error::Invariant(format!("cell {c} of F2 has weight outside L2")));
                }
            }
        }
        let pos: HashMap<Cell, usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let mut nv = vec![0.0; cells.len()];
        for (c, k) in counts.iter() {
            match pos.get(&c) {
                Some(&p) => nv[p] = k as f64,
                None => return Err(Error::Config(format!("observed cell {c} lies outside the likelihood domain"))),
            }
        }
        Ok(Features { cells, rows, counts: nv, total: counts.total() as f64, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    fn eta(&self, x: &[f64]) -> Vec<f64> {
        self.rows.par_iter().map(|r| r.iter().map(|&(k, v)| v * x[k as usize]).sum()).collect()
    }

    /// Cell probabilities on the domain, in `cells()` order.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let eta = self.eta(x);
        let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::Overflow);
        }
        let w: Vec<f64> = eta.iter().map(|e| (e - m).exp()).collect();
        let z: f64 = w.chunks(CHUNK).map(|c| c.iter().sum::<f64>()).sum();
        Ok(w.into_iter().map(|v| v / z).collect())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Value and gradient.
    pub fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        let eta = self.eta(x);
        let m = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::Overflow);
        }
        let parts: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = (0..self.rows.len())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|idx| {
                let mut z = 0.0;
                let mut lin = 0.0;
                let mut ws = vec![0.0; self.dim];
                let mut ns = vec![0.0; self.dim];
                for &i in idx {
                    let w = (eta[i] - m).exp();
                    z += w;
                    lin += self.counts[i] * eta[i];
                    for &(k, v) in &self.rows[i] {
                        ws[k as usize] += w * v;
                        ns[k as usize] += self.counts[i] * v;
                    }
                }
                (z, lin, ws, ns)
            })
            .collect();
        let mut z = 0.0;
        let mut lin = 0.0;
        let mut ws = vec![0.0; self.dim];
        let mut ns = vec![0.0; self.dim];
        for (pz, pl, pw, pn) in parts {
            z += pz;
            lin += pl;
            for k in 0..self.dim {
                ws[k] += pw[k];
                ns[k] += pn[k];
            }
        }
        let log_z = m + z.ln();
        let value = lin - self.total * log_z;
        let grad = (0..self.dim).map(|k| ns[k] - self.total * ws[k] / z).collect();
        if !value.is_finite() {
            return Err(Error::Overflow);
        }
        Ok((value, grad))
    }

    /// `−∇² l = N·Cov_p(φ)`, row-major.
    pub fn neg_hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.probabilities(x)?;
        let d = self.dim;
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..self.rows.len())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|idx| {
                let mut s = vec![0.0; d * d];
                let mut mean = vec![0.0; d];
                for &i in idx {
                    let pi = p[i];
                    if pi == 0.0 {
                        continue;
                    }
                    let r = &self.rows[i];
                    for &(a, va) in r {
                        mean[a as usize] += pi * va;
                        for &(b, vb) in r {
                            s[a as usize * d + b as usize] += pi * va * vb;
                        }
                    }
                }
                (s, mean)
            })
            .collect();
        let mut s = vec![0.0; d * d];
        let mut mean = vec![0.0; d];
        for (ps, pm) in parts {
            for (a, b) in s.iter_mut().zip(ps) {
                *a += b;
            }
            for (a, b) in mean.iter_mut().zip(pm) {
                *a += b;
            }
        }
        for a in 0..d {
            for b in 0..d {
                s[a * d + b] = self.total * (s[a * d + b] - mean[a] * mean[b]);
            }
        }
        Ok(s)
    }
}

/// Value and gradient of one of the four likelihood forms.
pub fn loglik_grad(design: &Design, counts: &Counts, params: &[f64], form: LikForm<'_>) -> Result<(f64, Vec<f64>)> {
    Features::build(design, counts, form)?.value_grad(params)
}

/// A smooth concave objective.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    /// Negative Hessian, row-major; `None` when unavailable.
    fn neg_hessian(&self, _x: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }
}

impl Objective for Features {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Features::value_grad(self, x)
    }
    fn neg_hessian(&self, x: &[f64]) -> Option<Result<Vec<f64>>> {
        Some(Features::neg_hessian(self, x))
    }
}

/// Poisson form `Σ_{I+} n_i η_i − N Σ_{i∈F2} exp η_i` with
/// `η_i = <b_i, μ_{L2}> + ν`; the last coordinate is the intercept `ν`.
#[derive(Clone, Debug)]
pub struct PoissonSurrogate {
    inner: Features,
}

impl PoissonSurrogate {
    pub fn build(design: &Design, counts: &Counts, basis: &MuBasis) -> Result<PoissonSurrogate> {
        let mut inner = Features::build(design, counts, LikForm::MuOnF2(basis))?;
        let d = inner.dim as u32;
        for r in &mut inner.rows {
            r.push((d, 1.0));
        }
        inner.dim += 1;
        Ok(PoissonSurrogate { inner })
    }

    /// Normalized probabilities on `F2` at `x`.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.probabilities(x)
    }
}

impl Objective for PoissonSurrogate {
    fn dim(&self) -> usize {
        self.inner.dim
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let f = &self.inner;
        f.check(x)?;
        let eta = f.eta(x);
        let mut value = 0.0;
        let mut grad = vec![0.0; f.dim];
        for (i, r) in f.rows.iter().enumerate() {
            let w = eta[i].exp();
            if !w.is_finite() {
                return Err(Error::Overflow);
            }
            value += f.counts[i] * eta[i] - f.total * w;
            for &(k, v) in r {
                grad[k as usize] += (f.counts[i] - f.total * w) * v;
            }
        }
        Ok((value, grad))
    }

    fn neg_hessian(&self, x: &[f64]) -> Option<Result<Vec<f64>>> {
        let f = &self.inner;
        let d = f.dim;
        let eta = f.eta(x);
        let mut s = vec![0.0; d * d];
        for (i, r) in f.rows.iter().enumerate() {
            let w = f.total * eta[i].exp();
            for &(a, va) in r {
                for &(b, vb) in r {
                    s[a as usize * d + b as usize] += w * va * vb;
                }
            }
        }
        Some(Ok(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Damped Newton steps from the negative Hessian.
    Newton,
    /// Steepest ascent scaled by the Hessian diagonal.
    Diagonal,
    Gradient,
}

#[derive(Clone, Copy, Debug)]
pub struct OptimOptions {
    pub tol_grad: f64,
    pub max_iter: usize,
    pub step: StepRule,
    /// Moment-matching bound checked by [`emle_with`].
    pub tol_moment: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions { tol_grad: TOL_GRAD, max_iter: MAX_ITER, step: StepRule::Newton, tol_moment: TOL_MOMENT }
    }
}

#[derive(Clone, Debug)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Coordinates that decreased by more than 1 in `DRIFT_RUN` consecutive iterations.
    pub drifting: Vec<usize>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn newton_direction(h: Vec<f64>, g: &[f64], diag_only: bool) -> Vec<f64> {
    let d = g.len();
    if diag_only {
        return (0..d).map(|k| g[k] / h[k * d + k].max(1e-12)).collect();
    }
    let scale = (0..d).map(|k| h[k * d + k]).fold(1e-300, f64::max);
    let mut delta = 1e-12 * scale;
    let base = DMatrix::from_row_slice(d, d, &h);
    let rhs = DVector::from_column_slice(g);
    for _ in 0..30 {
        let m = &base + DMatrix::identity(d, d) * delta;
        if let Some(ch) = m.cholesky() {
            return ch.solve(&rhs).as_slice().to_vec();
        }
        delta *= 10.0;
    }
    g.to_vec()
}

/// Ascent with Armijo backtracking. Stops when the gradient ∞-norm is at most
/// `tol_grad` or after `max_iter` iterations.
pub fn maximize(obj: &dyn Objective, x0: &[f64], opts: &OptimOptions) -> Result<Optimum> {
    if x0.len() != obj.dim() {
        return Err(Error::Dimension { expected: obj.dim(), got: x0.len() });
    }
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.value_grad(&x)?;
    let mut runs = vec![0usize; x.len()];
    let mut drifting = vec![false; x.len()];
    let mut alpha0 = 1.0;
    let mut it = 0;
    while it < opts.max_iter {
        if inf_norm(&g) <= opts.tol_grad {
            break;
        }
        it += 1;
        let dir = match opts.step {
            StepRule::Gradient => g.clone(),
            StepRule::Newton | StepRule::Diagonal => match obj.neg_hessian(&x) {
                Some(h) => newton_direction(h?, &g, opts.step == StepRule::Diagonal),
                None => g.clone(),
            },
        };
        let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut alpha = if opts.step == StepRule::Gradient { alpha0 } else { 1.0 };
        let mut accepted = None;
        for _ in 0..80 {
            let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            if let Ok((fy, gy)) = obj.value_grad(&y) {
                if fy >= f + ARMIJO * alpha * slope {
                    accepted = Some((y, fy, gy));
                    break;
                }
            }
            alpha *= SHRINK;
        }
        let Some((y, fy, gy)) = accepted else {
            // no ascent possible at working precision
            if fy_stalled(&g, opts.tol_grad) {
                break;
            }
            return Err(Error::LineSearch(it));
        };
        for k in 0..x.len() {
            if x[k] - y[k] > 1.0 {
                runs[k] += 1;
                if runs[k] >= DRIFT_RUN {
                    drifting[k] = true;
                }
            } else {
                runs[k] = 0;
            }
        }
        alpha0 = (alpha * 2.0).min(1.0);
        let stalled = fy - f <= 1e-15 * f.abs().max(1.0) && inf_norm(&gy) <= 1e3 * opts.tol_grad;
        x = y;
        f = fy;
        g = gy;
        if stalled {
            break;
        }
    }
    let gradient_norm = inf_norm(&g);
    Ok(Optimum {
        x,
        value: f,
        gradient_norm,
        iterations: it,
        converged: gradient_norm <= opts.tol_grad,
        drifting: drifting.iter().enumerate().filter(|(_, &d)| d).map(|(k, _)| k).collect(),
    })
}

fn fy_stalled(g: &[f64], tol: f64) -> bool {
    inf_norm(g) <= 1e3 * tol
}

/// Parameters `μ_i = log p(i)/p(z)` for an independent set `L` chosen in
/// three stages from `F1`, `F2 \ F1` and `I \ F2`, with exact coefficients
/// `b_i` expressing every `μ_i` in terms of `μ_L`.
#[derive(Clone, Debug)]
pub struct MuBasis {
    pub zero_cell: Cell,
    pub l1: Vec<Cell>,
    pub l2: Vec<Cell>,
    /// `L`, ordered so that `L1` and `L2` are prefixes.
    pub l: Vec<Cell>,
    f1: CellSet,
    f2: CellSet,
    /// `den · B⁻¹` stored by column, rows `1..` only; `B = [f̃_z, f̃_L]`.
    inv_cols: Vec<Vec<BigInt>>,
    inv_small: Option<Vec<Vec<i128>>>,
    den: BigInt,
    den_f: f64,
}

impl MuBasis {
    pub fn f1(&self) -> &CellSet {
        &self.f1
    }

    pub fn f2(&self) -> &CellSet {
        &self.f2
    }

    fn numerators(&self, design: &Design, cell: Cell) -> Vec<BigInt> {
        let col = design.column_aug(cell);
        let n = self.l.len();
        let mut out = vec![BigInt::zero(); n];
        for &j in &col {
            for (k, v) in self.inv_cols[j as usize].iter().enumerate() {
                out[k] += v;
            }
        }
        debug_assert_eq!(out.len(), n);
        out
    }

    /// Exact `b_i` over `L`.
    pub fn coeffs_exact(&self, design: &Design, cell: Cell) -> Vec<Q> {
        self.numerators(design, cell).into_iter().map(|v| Q::new(v, self.den.clone())).collect()
    }

    /// `b_i` over `L` in floating point.
    pub fn coeffs(&self, design: &Design, cell: Cell) -> Vec<f64> {
        match &self.inv_small {
            Some(m) => {
                let mut out = vec![0i128; self.l.len()];
                for j in design.column_aug(cell) {
                    for (o, v) in out.iter_mut().zip(&m[j as usize]) {
                        *o += v;
                    }
                }
                out.into_iter().map(|v| v as f64 / self.den_f).collect()
            }
            None => self
                .numerators(design, cell)
                .into_iter()
                .map(|v| Q::new(v, self.den.clone()).to_f64().unwrap_or(f64::NAN))
                .collect(),
        }
    }

    /// `μ_i` from `μ_L` (or a prefix such as `μ_{L2}` when `b_i` vanishes beyond it).
    pub fn mu_of(&self, design: &Design, cell: Cell, mu_l: &[f64]) -> f64 {
        self.coeffs(design, cell).iter().zip(mu_l).map(|(b, m)| b * m).sum()
    }
}

fn extend_stage(design: &Design, basis: &mut ModBasis, chosen: &mut Vec<Cell>, pool: impl Iterator<Item = Cell>, skip: Cell) {
    let d = design.dim();
    let mut col = Vec::new();
    for c in pool {
        if basis.rank() == d {
            break;
        }
        if c == skip {
            continue;
        }
        design.column_aug_into(c, &mut col);
        if basis.insert_support(&col) {
            chosen.push(c);
        }
    }
}

/// Greedy stage-wise selection of `L1 ⊆ L2 ⊆ L` in ascending cell order.
pub fn select_mu_basis(design: &Design, counts: &Counts, f1: &CellSet, f2: &CellSet) -> Result<MuBasis> {
    let size = design.space().explicit_size(EXPLICIT_CAP)?;
    let z = counts.max_cell().ok_or(Error::NoObservations)?;
    let i_plus = counts.support();
    if !i_plus.is_subset(f1) || !f1.is_subset(f2) {
        return Err(Error::Config("expected I+ ⊆ F1 ⊆ F2".into()));
    }
    let d = design.dim();
    let mut basis = ModBasis::new(d);
    basis.insert_support(&design.column_aug(z));
    let mut chosen = Vec::new();
    extend_stage(design, &mut basis, &mut chosen, f1.iter(), z);
    let n1 = chosen.len();
    extend_stage(design, &mut basis, &mut chosen, f2.iter().filter(|&c| !f1.contains(c)), z);
    let n2 = chosen.len();
    extend_stage(design, &mut basis, &mut chosen, (0..size as Cell).filter(|&c| !f2.contains(c)), z);
    // maximality of every stage, checked against exact ranks
    let r1 = design.rank_cells(f1).0;
    let r2 = design.rank_cells(f2).0;
    if n1 + 1 != r1 || n2 + 1 != r2 || chosen.len() + 1 != d {
        return Err(Error::Invariant(format!(
            "μ-basis stage ranks {}/{}/{} differ from exact ranks {}/{}/{}",
            n1 + 1,
            n2 + 1,
            chosen.len() + 1,
            r1,
            r2,
            d
        )));
    }
    // B = [f̃_z, f̃_L] is square and invertible
    let mut cols = vec![z];
    cols.extend(&chosen);
    let b = design.dense_aug(&cols);
    let mut aug: Vec<Vec<Q>> = b
        .into_iter()
        .enumerate()
        .map(|(r, mut row)| {
            row.extend((0..d).map(|k| if k == r { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    let piv = exact::rref(&mut aug);
    if piv.len() != d || piv[d - 1] != d - 1 {
        return Err(Error::Singular("μ-basis matrix".into()));
    }
    let mut den = BigInt::one();
    for row in &aug {
        for v in &row[d..] {
            den = den.lcm(v.denom());
        }
    }
    // inv_cols[j][k] = den · (B⁻¹)[k+1][j]
    let inv_cols: Vec<Vec<BigInt>> = (0..d)
        .map(|j| (1..d).map(|k| (&aug[k][d + j] * Q::from_integer(den.clone())).to_integer()).collect())
        .collect();
    let inv_small = if inv_cols.iter().flatten().all(|v| v.to_i64().is_some()) && den.to_i64().is_some() {
        Some(inv_cols.iter().map(|c| c.iter().map(|v| v.to_i64().unwrap() as i128).collect()).collect())
    } else {
        None
    };
    let den_f = den.to_f64().unwrap_or(f64::NAN);
    Ok(MuBasis {
        zero_cell: z,
        l1: chosen[..n1].to_vec(),
        l2: chosen[..n2].to_vec(),
        l: chosen,
        f1: f1.clone(),
        f2: f2.clone(),
        inv_cols,
        inv_small,
        den,
        den_f,
    })
}

/// A parameter estimate; `−∞` serializes as the string `"-inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimate {
    Finite(f64),
    NegInf,
}

impl Estimate {
    pub fn value(&self) -> f64 {
        match self {
            Estimate::Finite(v) => *v,
            Estimate::NegInf => f64::NEG_INFINITY,
        }
    }
}

impl Serialize for Estimate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Estimate::Finite(v) => s.serialize_f64(*v),
            Estimate::NegInf => s.serialize_str("-inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Estimable,
    Diverges,
    Undetermined,
}

/// What is known about the facial set when classifying.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Knowledge {
    FtKnown,
    Sandwich,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamRow {
    pub cell_index: String,
    pub label: String,
    pub naive: Estimate,
    pub mu_hat: Estimate,
    pub status: Status,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub rows: Vec<ParamRow>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Cells whose `μ̂` ran off during the fit.
    pub drifting: Vec<String>,
    pub dim_f1: usize,
    pub dim_f2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_ft: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mle_exists: Option<bool>,
}

impl FitReport {
    fn row(&self, cell: Cell) -> Option<&ParamRow> {
        let key = cell.to_string();
        self.rows.iter().find(|r| r.cell_index == key)
    }

    pub fn estimate(&self, cell: Cell) -> Option<Estimate> {
        self.row(cell).map(|r| r.mu_hat)
    }

    pub fn status(&self, cell: Cell) -> Option<Status> {
        self.row(cell).map(|r| r.status)
    }

    pub fn is_drifting(&self, cell: Cell) -> bool {
        self.drifting.contains(&cell.to_string())
    }
}

/// Status of `μ_i` from the facial-set information alone.
pub fn status_of(basis: &MuBasis, cell: Cell) -> Status {
    if cell == basis.zero_cell || basis.f1.contains(cell) {
        Status::Estimable
    } else if !basis.f2.contains(cell) {
        Status::Diverges
    } else {
        Status::Undetermined
    }
}

/// Sets per-parameter statuses. With `FtKnown` the basis must have `F1 = F2`.
pub fn classify(basis: &MuBasis, report: &mut FitReport, known: Knowledge) -> Result<()> {
    if known == Knowledge::FtKnown && basis.f1 != basis.f2 {
        return Err(Error::Config("a known facial set needs F1 = F2".into()));
    }
    for r in &mut report.rows {
        let cell: Cell = r.cell_index.parse().map_err(|_| Error::Invariant("bad cell index".into()))?;
        r.status = status_of(basis, cell);
        if r.status != Status::Diverges && r.mu_hat == Estimate::NegInf {
            return Err(Error::Invariant(format!("−∞ estimate for non-diverging cell {cell}")));
        }
    }
    Ok(())
}

/// `log(n_i / n_z)`, or `−∞` when `n_i = 0`.
pub fn naive_estimates(counts: &Counts, zero: Cell, cells: &[Cell]) -> Result<Vec<(Cell, Estimate)>> {
    let n0 = counts.get(zero);
    if n0 == 0 {
        return Err(Error::Config("zero cell has no observations".into()));
    }
    Ok(cells
        .iter()
        .map(|&c| {
            let n = counts.get(c);
            let e = if n == 0 { Estimate::NegInf } else { Estimate::Finite((n as f64 / n0 as f64).ln()) };
            (c, e)
        })
        .collect())
}

/// Which likelihood a fit maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitTarget {
    /// `μ_L` over all of `I`; no parameter is fixed at `−∞`.
    Unrestricted,
    /// `μ_{L2}` on `F2`; parameters in `L \ L2` are set to `−∞`.
    RestrictedF2,
}

/// Fits and reports the parameters `μ_L` (and the zero cell).
pub fn fit(design: &Design, counts: &Counts, basis: &MuBasis, target: FitTarget, opts: &OptimOptions) -> Result<FitReport> {
    let (obj, n) = match target {
        FitTarget::Unrestricted => (Features::build(design, counts, LikForm::Mu(basis))?, basis.l.len()),
        FitTarget::RestrictedF2 => (Features::build(design, counts, LikForm::MuOnF2(basis))?, basis.l2.len()),
    };
    let opt = maximize(&obj, &vec![0.0; n], opts)?;
    let drifting = opt.drifting.iter().map(|&k| basis.l[k].to_string()).collect();
    report(design, counts, basis, &opt.x, (opt.value, opt.converged, opt.iterations, opt.gradient_norm), drifting)
}

/// Parameter report of an EMLE; cells of `L` outside `F_t` are `−∞`.
pub fn emle_report(design: &Design, counts: &Counts, e: &Emle) -> Result<FitReport> {
    report(design, counts, &e.basis, &e.mu, (e.loglik, true, e.iterations, e.gradient_norm), Vec::new())
}

fn report(
    design: &Design,
    counts: &Counts,
    basis: &MuBasis,
    x: &[f64],
    (loglik, converged, iterations, gradient_norm): (f64, bool, usize, f64),
    drifting: Vec<String>,
) -> Result<FitReport> {
    let n = x.len();
    let mut cells = vec![basis.zero_cell];
    cells.extend(&basis.l);
    let naive: HashMap<Cell, Estimate> = naive_estimates(counts, basis.zero_cell, &cells)?.into_iter().collect();
    let schema = design.schema();
    let rows = cells
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let mu_hat = if k == 0 {
                Estimate::Finite(0.0)
            } else if k - 1 < n {
                Estimate::Finite(x[k - 1])
            } else {
                Estimate::NegInf
            };
            ParamRow { cell_index: c.to_string(), label: schema.cell_label(c), naive: naive[&c], mu_hat, status: status_of(basis, c) }
        })
        .collect();
    Ok(FitReport {
        rows,
        loglik,
        converged,
        iterations,
        gradient_norm,
        drifting,
        dim_f1: basis.l1.len(),
        dim_f2: basis.l2.len(),
        dim_ft: (basis.f1 == basis.f2).then_some(basis.l1.len()),
        mle_exists: None,
    })
}

/// The extended MLE on a facial set.
#[derive(Clone, Debug)]
pub struct Emle {
    /// `(cell, p*(cell))` for the cells of `F_t`; zero elsewhere.
    pub p: Vec<(Cell, f64)>,
    pub basis: MuBasis,
    pub mu: Vec<f64>,
    /// `‖A p* − t/N‖_∞`.
    pub moment_error: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Maximizes the likelihood restricted to `F_t` in the identifiable
/// coordinates `μ_{L_t}` and checks moment matching and support.
pub fn emle(design: &Design, counts: &Counts, ft: &CellSet) -> Result<Emle> {
    emle_with(design, counts, ft, &OptimOptions::default())
}

pub fn emle_with(design: &Design, counts: &Counts, ft: &CellSet, opts: &OptimOptions) -> Result<Emle> {
    let basis = select_mu_basis(design, counts, ft, ft)?;
    let obj = Features::build(design, counts, LikForm::MuOnF2(&basis))?;
    let opt = maximize(&obj, &vec![0.0; basis.l2.len()], opts)?;
    let probs = obj.probabilities(&opt.x)?;
    let p: Vec<(Cell, f64)> = obj.cells().iter().copied().zip(probs).collect();
    let moment_error = moment_error(design, counts, &p);
    if moment_error > opts.tol_moment {
        return Err(Error::MomentMismatch(moment_error));
    }
    if let Some((c, _)) = p.iter().find(|(_, v)| *v <= 0.0) {
        return Err(Error::Invariant(format!("EMLE vanishes on cell {c} of F_t")));
    }
    Ok(Emle { p, mu: opt.x, basis, moment_error, loglik: opt.value, iterations: opt.iterations, gradient_norm: opt.gradient_norm })
}

/// `‖A p − t/N‖_∞` for sparse `p`.
pub fn moment_error(design: &Design, counts: &Counts, p: &[(Cell, f64)]) -> f64 {
    let st = design.sufficient_statistic(counts);
    let n = st.n as f64;
    let mut ap = vec![0.0; design.n_rows()];
    for &(c, v) in p {
        for j in design.column(c) {
            ap[j as usize] += v;
        }
    }
    ap.iter().zip(&st.t).fold(0.0, |m, (a, &t)| m.max((a - t as f64 / n).abs()))
}

/// Iterative proportional fitting over the generators, with the fitted
/// distribution supported on `domain`. A generator marginal that is zero in the
/// data but carries domain cells would need a zero factor, which the
/// exponential family on `domain` cannot represent; that is an error.
pub fn ipf(design: &Design, counts: &Counts, domain: &CellSet, tol: f64, max_sweeps: usize) -> Result<Vec<(Cell, f64)>> {
    let n = counts.total() as f64;
    if n == 0.0 {
        return Err(Error::NoObservations);
    }
    if domain.is_empty() {
        return Err(Error::EmptySet);
    }
    let cells = domain.as_slice();
    let mut p = vec![1.0 / cells.len() as f64; cells.len()];
    let space = design.space();
    let complex = design.complex();
    let gens: Vec<_> = complex.generators().to_vec();
    let setup: Vec<(String, Vec<Cell>, HashMap<Cell, f64>)> = gens
        .iter()
        .map(|&g| {
            let proj = space.projector(g);
            let keys: Vec<Cell> = cells.iter().map(|&c| proj.apply(c)).collect();
            let mut obs = HashMap::new();
            for (c, k) in counts.iter() {
                *obs.entry(proj.apply(c)).or_insert(0.0) += k as f64 / n;
            }
            (complex.names_of(g).join(","), keys, obs)
        })
        .collect();
    for _ in 0..max_sweeps {
        for (name, keys, obs) in &setup {
            let mut fit: HashMap<Cell, f64> = HashMap::new();
            for (k, v) in keys.iter().zip(&p) {
                *fit.entry(*k).or_insert(0.0) += v;
            }
            for (k, v) in keys.iter().zip(p.iter_mut()) {
                let o = obs.get(k).copied().unwrap_or(0.0);
                let f = fit[k];
                if o == 0.0 || f == 0.0 {
                    return Err(Error::IpfZeroDivision(name.clone()));
                }
                *v *= o / f;
            }
        }
        let mut resid: f64 = 0.0;
        for (_, keys, obs) in &setup {
            let mut fit: HashMap<Cell, f64> = HashMap::new();
            for (k, v) in keys.iter().zip(&p) {
                *fit.entry(*k).or_insert(0.0) += v;
            }
            for (k, o) in obs {
                resid = resid.max((fit.get(k).copied().unwrap_or(0.0) - o).abs());
            }
        }
        if resid <= tol {
            return Ok(cells.iter().copied().zip(p).collect());
        }
    }
    Err(Error::Invariant(format!("IPF did not reach residual {tol} in {max_sweeps} sweeps")))
}

/// Coordinate-wise ("non-linear Gauss–Seidel") maximization of the θ-likelihood
/// in the given row order, using the closed-form one-parameter update. A
/// statistic of zero sends the coordinate to `floor`; coordinates whose partial
/// derivative is already below `1e-12·N` are left unchanged. Diagnostic only.
pub fn gauss_seidel_theta(design: &Design, counts: &Counts, order: &[usize], sweeps: usize, floor: f64) -> Result<Vec<f64>> {
    let obj = Features::build(design, counts, LikForm::Theta)?;
    let st = design.sufficient_statistic(counts);
    let n = st.n as f64;
    let mut theta = vec![0.0; design.n_rows()];
    for _ in 0..sweeps {
        for &j in order {
            let (_, g) = obj.value_grad(&theta)?;
            if g[j].abs() <= 1e-12 * n {
                continue;
            }
            let t = st.t[j] as f64 / n;
            if t == 0.0 {
                theta[j] = floor;
                continue;
            }
            // q = current marginal of row j
            let q = t - g[j] / n;
            theta[j] += ((t * (1.0 - q)) / ((1.0 - t) * q)).ln();
        }
    }
    Ok(theta)
}

/// Parameters `λ` adapted to `F_t`: the rows of `G̃` are the certificates
/// restricted to `L \ L_t`, and the design coefficient of `λ_j` at cell `i`
/// is `<g̃_j, f̃_i>`.
#[derive(Clone, Debug)]
pub struct LambdaBasis {
    pub certificates: Vec<Vec<BigInt>>,
    pub lt: Vec<Cell>,
    pub rest: Vec<Cell>,
    /// `G`, indexed by certificates × `L \ L_t`.
    pub g: Vec<Vec<Q>>,
    pub g_inv: Vec<Vec<Q>>,
    /// A witness cell per certificate when all are facet-defining.
    pub witnesses: Option<Vec<Cell>>,
}

impl LambdaBasis {
    /// `λ` from `μ_L`: `μ_{L_t}` is kept and `λ_rest = G⁻ᵀ μ_rest`.
    pub fn lambda(&self, mu_l: &[f64]) -> Vec<f64> {
        let k = self.lt.len();
        let mut out = mu_l[..k].to_vec();
        let c = self.rest.len();
        for a in 0..c {
            let mut s = 0.0;
            for b in 0..c {
                s += self.g_inv[b][a].to_f64().unwrap_or(f64::NAN) * mu_l[k + b];
            }
            out.push(s);
        }
        out
    }
}

/// Builds `λ` from face-defining certificates and verifies, exactly over all
/// of `I`, that the coefficients of `λ_j` vanish on `F_t` and are nonnegative
/// elsewhere; with `facets` also that each `λ_j` has a witness cell.
pub fn lambda_reparam(design: &Design, basis: &MuBasis, certificates: &[Vec<BigInt>], facets: bool) -> Result<LambdaBasis> {
    if basis.f1 != basis.f2 {
        return Err(Error::Config("λ-parameters need a basis with F1 = F2 = F_t".into()));
    }
    let ft = &basis.f1;
    let lt = basis.l1.clone();
    let rest: Vec<Cell> = basis.l[lt.len()..].to_vec();
    let c = rest.len();
    if certificates.len() != c {
        return Err(Error::Singular(format!("{} certificates for codimension {}", certificates.len(), c)));
    }
    let dot = |g: &[BigInt], cell: Cell| -> BigInt { design.column_aug(cell).iter().map(|&j| &g[j as usize]).sum() };
    for g in certificates {
        if g.len() != design.dim() {
            return Err(Error::Dimension { expected: design.dim(), got: g.len() });
        }
        for &l in &lt {
            if !dot(g, l).is_zero() {
                return Err(Error::Verification("certificate does not vanish on L_t".into()));
            }
        }
    }
    let g: Vec<Vec<Q>> = certificates.iter().map(|cert| rest.iter().map(|&k| Q::from_integer(dot(cert, k))).collect()).collect();
    let g_inv = invert(&g).ok_or_else(|| Error::Singular("G".into()))?;
    let size = design.space().explicit_size(EXPLICIT_CAP)?;
    let k0 = lt.len();
    let mut witnesses = vec![None; c];
    for i in 0..size as Cell {
        let b = basis.coeffs_exact(design, i);
        let coeff: Vec<Q> = g
            .iter()
            .map(|row| row.iter().zip(&b[k0..]).fold(Q::zero(), |s, (a, x)| s + a * x))
            .collect();
        for (j, v) in coeff.iter().enumerate() {
            if *v != Q::from_integer(dot(&certificates[j], i)) {
                return Err(Error::Verification("λ coefficients disagree with certificate values".into()));
            }
            if ft.contains(i) && !v.is_zero() {
                return Err(Error::Verification(format!("λ_{j} has a nonzero coefficient on F_t cell {i}")));
            }
            if v.is_negative() {
                return Err(Error::Verification(format!("λ_{j} has a negative coefficient at cell {i}")));
            }
        }
        if facets && !ft.contains(i) {
            let pos: Vec<usize> = (0..c).filter(|&j| coeff[j].is_positive()).collect();
            if pos.len() == 1 && witnesses[pos[0]].is_none() {
                witnesses[pos[0]] = Some(i);
            }
        }
    }
    let witnesses = if facets {
        let w: Option<Vec<Cell>> = witnesses.into_iter().collect();
        Some(w.ok_or_else(|| Error::Verification("a facet has no witness cell".into()))?)
    } else {
        None
    };
    Ok(LambdaBasis { certificates: certificates.to_vec(), lt, rest, g, g_inv, witnesses })
}

fn invert(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut aug: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut x = row.clone();
            x.extend((0..n).map(|k| if k == r { Q::one() } else { Q::zero() }));
            x
        })
        .collect();
    let piv = exact::rref(&mut aug);
    if piv.len() != n || piv[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Complex;
    use crate::table::Schema;

    fn sat2() -> (Design, Counts) {
        let c = Complex::new(&["x", "y"], &[vec!["x", "y"]]).unwrap();
        let s = Schema::binary(&["x", "y"]).unwrap();
        let d = Design::build(&c, &s).unwrap();
        let n = Counts::from_dense(s, &[2, 3, 5, 0]).unwrap();
        (d, n)
    }

    #[test]
    fn theta_gradient_at_zero() {
        let (d, n) = sat2();
        let (v, g) = loglik_grad(&d, &n, &[0.0; 3], LikForm::Theta).unwrap();
        assert!((v + 10.0 * 4f64.ln()).abs() < 1e-12);
        for (a, b) in g.iter().zip([-2.0, 0.0, -2.5]) {
            assert!((a - b).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn basis_for_facet() {
        let (d, n) = sat2();
        let ft = CellSet::from_vec(vec![0, 1, 2]);
        let b = select_mu_basis(&d, &n, &ft, &ft).unwrap();
        assert_eq!(b.zero_cell, 2);
        assert_eq!(b.l1, vec![0, 1]);
        assert_eq!(b.l, vec![0, 1, 3]);
        assert_eq!(b.coeffs(&d, 2), vec![0.0; 3]);
        assert_eq!(b.coeffs(&d, 3), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn emle_is_empirical() {
        let (d, n) = sat2();
        let ft = CellSet::from_vec(vec![0, 1, 2]);
        let e = emle(&d, &n, &ft).unwrap();
        let p: Vec<f64> = e.p.iter().map(|x| x.1).collect();
        for (a, b) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(e.moment_error <= 1e-10);
    }

    #[test]
    fn unrestricted_fit_drifts() {
        let (d, n) = sat2();
        let ft = CellSet::from_vec(vec![0, 1, 2]);
        let b = select_mu_basis(&d, &n, &ft, &ft).unwrap();
        let mut r = fit(&d, &n, &b, FitTarget::Unrestricted, &OptimOptions::default()).unwrap();
        classify(&b, &mut r, Knowledge::FtKnown).unwrap();
        assert!(r.is_drifting(3), "{:?}", r.drifting);
        assert!(!r.is_drifting(0) && !r.is_drifting(1));
        assert_eq!(r.status(3), Some(Status::Diverges));
        assert_eq!(r.status(1), Some(Status::Estimable));
        let mu0 = r.estimate(0).unwrap().value();
        assert!((mu0 - (2.0f64 / 5.0).ln()).abs() < 1e-6);
    }

    #[test]
    fn ipf_names_generator() {
        let (d, n) = sat2();
        match ipf(&d, &n, &CellSet::full(4), TOL_IPF, 100) {
            Err(Error::IpfZeroDivision(g)) => assert_eq!(g, "x,y"),
            other => panic!("{other:?}"),
        }
        let p = ipf(&d, &n, &CellSet::from_vec(vec![0, 1, 2]), TOL_IPF, 100).unwrap();
        assert!((p[2].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lambda_for_facet() {
        let (d, n) = sat2();
        let ft = CellSet::from_vec(vec![0, 1, 2]);
        let b = select_mu_basis(&d, &n, &ft, &ft).unwrap();
        let cert: Vec<BigInt> = [0, 0, 0, 1].iter().map(|&v| BigInt::from(v)).collect();
        let lb = lambda_reparam(&d, &b, &[cert], true).unwrap();
        assert_eq!(lb.witnesses, Some(vec![3]));
        assert_eq!(lb.g[0][0], Q::one());
    }

    #[test]
    fn naive() {
        let (_, n) = sat2();
        let e = naive_estimates(&n, 2, &[0, 2, 3]).unwrap();
        assert_eq!(e[0].1, Estimate::Finite((0.4f64).ln()));
        assert_eq!(e[1].1, Estimate::Finite(0.0));
        assert_eq!(e[2].1, Estimate::NegInf);
    }
}
