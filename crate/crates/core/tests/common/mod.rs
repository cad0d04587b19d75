#![allow(dead_code)]

use hierface::complex::{Complex, VSet};
use hierface::design::Design;
use hierface::table::{Cell, CellSet, Counts, Schema};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

/// Random hierarchical model on 2–4 variables with 2 or 3 levels each.
pub fn random_model(r: &mut ChaCha8Rng) -> Design {
    let n = r.random_range(2..=4);
    let levels: Vec<usize> = (0..n).map(|_| r.random_range(2..=3)).collect();
    let names = names(n);
    let mut gens = Vec::new();
    for _ in 0..r.random_range(1..=3) {
        let mut s = VSet::EMPTY;
        for v in 0..n {
            if r.random_bool(0.5) {
                s = s.with(v);
            }
        }
        if !s.is_empty() {
            gens.push(s);
        }
    }
    for v in 0..n {
        if !gens.iter().any(|g| g.has(v)) {
            gens.push(VSet::singleton(v));
        }
    }
    let c = Complex::from_sets(names.clone(), gens).unwrap();
    let s = Schema::with_levels(&names, &levels).unwrap();
    Design::build(&c, &s).unwrap()
}

/// Sparse random support: each cell present with probability `p` (at least one cell).
pub fn random_support(r: &mut ChaCha8Rng, size: u64, p: f64) -> CellSet {
    let mut v: Vec<Cell> = (0..size as Cell).filter(|_| r.random_bool(p)).collect();
    if v.is_empty() {
        v.push(r.random_range(0..size) as Cell);
    }
    CellSet::from_vec(v)
}

pub fn random_counts(r: &mut ChaCha8Rng, schema: &Schema, p: f64) -> Counts {
    let size = schema.space().size() as u64;
    let s = random_support(r, size, p);
    Counts::from_pairs(schema.clone(), s.iter().map(|c| (c, r.random_range(1..5u64)))).unwrap()
}

/// Random chordal graph by perfect elimination: each new vertex joins a clique of earlier ones.
pub fn random_chordal(r: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for v in 1..n {
        let mut earlier: Vec<usize> = (0..v).collect();
        earlier.shuffle(r);
        // pick a random clique among earlier vertices greedily
        let mut clique: Vec<usize> = Vec::new();
        let want = r.random_range(0..=3.min(v));
        for &u in &earlier {
            if clique.len() == want {
                break;
            }
            if clique.iter().all(|w| adj[*w].contains(&u)) {
                clique.push(u);
            }
        }
        for &u in &clique {
            adj[u].push(v);
            adj[v].push(u);
            edges.push((u, v));
        }
    }
    edges
}
