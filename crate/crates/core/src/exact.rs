//! Exact linear algebra over the rationals and integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref(m: &mut [Vec<Q>]) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in c..cols {
                    if !m[r][j].is_zero() {
                        let t = &f * &m[r][j];
                        m[i][j] -= t;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rank of a rational matrix.
pub fn exact_rank(m: &[Vec<Q>]) -> usize {
    let mut w = m.to_vec();
    rref(&mut w).len()
}

/// Integer basis of `{x : m x = 0}` with primitive entries.
pub fn kernel(m: &[Vec<Q>], ncols: usize) -> Vec<Vec<BigInt>> {
    let mut w = m.to_vec();
    let pivots = rref(&mut w);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    let mut out = Vec::with_capacity(free.len());
    for &f in &free {
        let mut x = vec![Q::zero(); ncols];
        x[f] = Q::one();
        for (i, &p) in pivots.iter().enumerate() {
            x[p] = -w[i][f].clone();
        }
        out.push(primitive(&x));
    }
    out
}

/// Scales a rational vector to a primitive integer vector with the same direction.
pub fn primitive(x: &[Q]) -> Vec<BigInt> {
    let mut l = BigInt::one();
    for v in x {
        l = l.lcm(v.denom());
    }
    let ints: Vec<BigInt> = x.iter().map(|v| v.numer() * (&l / v.denom())).collect();
    let mut g = BigInt::zero();
    for v in &ints {
        g = g.gcd(v);
    }
    if g.is_zero() || g.is_one() {
        return ints;
    }
    ints.into_iter().map(|v| v / &g).collect()
}

/// Solves the square system `a x = b` by fraction-free elimination.
/// Returns `(numerators, denominator)` with `x = numerators / denominator`,
/// or `None` when `a` is singular.
pub fn bareiss_solve(a: &[Vec<BigInt>], b: &[BigInt]) -> Option<(Vec<BigInt>, BigInt)> {
    let n = a.len();
    let mut m: Vec<Vec<BigInt>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let mut prev = BigInt::one();
    let mut sign = 1i32;
    for k in 0..n {
        let p = (k..n).find(|&i| !m[i][k].is_zero())?;
        if p != k {
            m.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..=n {
                let v = (&m[k][k] * &m[i][j] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    // back substitution on integers X = det * x
    let mut x = vec![BigInt::zero(); n];
    for i in (0..n).rev() {
        let mut acc = &det * &m[i][n];
        for j in i + 1..n {
            acc -= &m[i][j] * &x[j];
        }
        x[i] = acc / &m[i][i];
    }
    let _ = sign;
    if det.is_negative() {
        Some((x.into_iter().map(|v| -v).collect(), -det))
    } else {
        Some((x, det))
    }
}

/// Integer vector stored in `i128` when every entry fits in `i64`.
#[derive(Clone, Debug)]
pub enum IntVec {
    Small(Vec<i128>),
    Big(Vec<BigInt>),
}

impl IntVec {
    pub fn new(v: Vec<BigInt>) -> IntVec {
        if v.iter().all(|x| x.to_i64().is_some()) {
            IntVec::Small(v.iter().map(|x| x.to_i64().unwrap() as i128).collect())
        } else {
            IntVec::Big(v)
        }
    }

    /// Sign of the sum of the entries at `idx`.
    pub fn sum_sign(&self, idx: &[u32]) -> i32 {
        match self {
            IntVec::Small(v) => {
                let s: i128 = idx.iter().map(|&i| v[i as usize]).sum();
                s.signum() as i32
            }
            IntVec::Big(v) => {
                let s: BigInt = idx.iter().map(|&i| &v[i as usize]).sum();
                if s.is_zero() {
                    0
                } else if s.is_positive() {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn to_big(&self) -> Vec<BigInt> {
        match self {
            IntVec::Small(v) => v.iter().map(|&x| BigInt::from(x)).collect(),
            IntVec::Big(v) => v.clone(),
        }
    }
}

const P: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % P as u128) as u64
}

fn powmod(mut a: u64, mut e: u64) -> u64 {
    let mut r = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a);
        }
        a = mulmod(a, a);
        e >>= 1;
    }
    r
}

/// Incremental echelon basis modulo a Mersenne prime, used to pick candidate
/// independent columns quickly. Independence mod p implies independence over Q.
#[derive(Clone, Debug)]
pub struct ModBasis {
    dim: usize,
    rows: Vec<(usize, Vec<u64>)>,
}

impl ModBasis {
    pub fn new(dim: usize) -> ModBasis {
        ModBasis { dim, rows: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Pivot coordinate of the most recently inserted vector.
    pub fn last_pivot(&self) -> usize {
        self.rows.last().map_or(0, |r| r.0)
    }

    /// Inserts a 0/1 vector given by its nonzero positions; `true` when independent.
    pub fn insert_support(&mut self, idx: &[u32]) -> bool {
        let mut v = vec![0u64; self.dim];
        for &i in idx {
            v[i as usize] = 1;
        }
        self.insert(v)
    }

    pub fn insert(&mut self, mut v: Vec<u64>) -> bool {
        for (p, row) in &self.rows {
            let f = v[*p];
            if f != 0 {
                for (x, r) in v.iter_mut().zip(row) {
                    if *r != 0 {
                        *x = (*x + P - mulmod(f, *r)) % P;
                    }
                }
            }
        }
        match v.iter().position(|&x| x != 0) {
            None => false,
            Some(p) => {
                let inv = powmod(v[p], P - 2);
                for x in v.iter_mut() {
                    *x = mulmod(*x, inv);
                }
                self.rows.push((p, v));
                true
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qm(rows: &[&[i64]]) -> Vec<Vec<Q>> {
        rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect()
    }

    #[test]
    fn ranks() {
        assert_eq!(exact_rank(&qm(&[&[0, 0], &[0, 0]])), 0);
        assert_eq!(exact_rank(&qm(&[&[1, 2], &[2, 4]])), 1);
        assert_eq!(exact_rank(&qm(&[&[1, 1, 1, 1], &[0, 1, 0, 1], &[0, 0, 1, 1], &[0, 0, 0, 1]])), 4);
    }

    #[test]
    fn kernels() {
        let k = kernel(&qm(&[&[1, 1, 0], &[0, 1, 1]]), 3);
        assert_eq!(k.len(), 1);
        let v: Vec<i64> = k[0].iter().map(|x| x.to_i64().unwrap()).collect();
        assert!(v == vec![1, -1, 1] || v == vec![-1, 1, -1]);
    }

    #[test]
    fn bareiss() {
        let a: Vec<Vec<BigInt>> = [[2, 1], [1, 3]].iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        let b = vec![BigInt::from(3), BigInt::from(5)];
        let (x, d) = bareiss_solve(&a, &b).unwrap();
        // x = (4/5, 7/5)
        assert_eq!(d, BigInt::from(5));
        assert_eq!(x, vec![BigInt::from(4), BigInt::from(7)]);
        let s: Vec<Vec<BigInt>> = [[1, 2], [2, 4]].iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        assert!(bareiss_solve(&s, &b).is_none());
    }

    #[test]
    fn modp() {
        let mut m = ModBasis::new(3);
        assert!(m.insert_support(&[0, 1]));
        assert!(m.insert_support(&[1, 2]));
        assert!(!m.insert_support(&[0, 1]));
        assert!(m.insert_support(&[0]));
        assert_eq!(m.rank(), 3);
    }
}
