mod common;

use std::path::PathBuf;

use hierface::estimate::{emle, fit, ipf, maximize, select_mu_basis, FitTarget, Objective, OptimOptions, PoissonSurrogate};
use hierface::facial::{facial_closure, FacialOptions};
use hierface::model::Model;
use hierface::table::{read_counts_csv, CellSet, Counts};

fn chain() -> (Model, Counts) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let model = Model::load(&dir.join("abc_chain.json")).unwrap();
    let counts = read_counts_csv(&dir.join("abc_chain.csv"), &model.schema).unwrap();
    (model, counts)
}

// p(a,b,c) = n(a,b) n(b,c) / (N n(b))
fn closed_form(model: &Model, counts: &Counts) -> Vec<f64> {
    let space = model.schema.space();
    let size = space.size() as usize;
    let (mut ab, mut bc, mut b) = (vec![0u64; 6], vec![0u64; 6], vec![0u64; 3]);
    for (cell, n) in counts.iter() {
        let d = space.digits(cell);
        ab[(d[0] * 3 + d[1]) as usize] += n;
        bc[(d[1] * 2 + d[2]) as usize] += n;
        b[d[1] as usize] += n;
    }
    let total = counts.total() as f64;
    (0..size as u128)
        .map(|cell| {
            let d = space.digits(cell);
            let nb = b[d[1] as usize];
            if nb == 0 {
                0.0
            } else {
                (ab[(d[0] * 3 + d[1]) as usize] * bc[(d[1] * 2 + d[2]) as usize]) as f64 / (total * nb as f64)
            }
        })
        .collect()
}

fn dense(p: &[(u128, f64)], size: usize) -> Vec<f64> {
    let mut v = vec![0.0; size];
    for &(c, x) in p {
        v[c as usize] = x;
    }
    v
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

#[test]
fn emle_and_ipf_match_the_closed_form_on_a_chain() {
    let (model, counts) = chain();
    let d = model.design().unwrap();
    let size = d.space().size() as usize;
    let ft = facial_closure(&d, &counts.support(), &FacialOptions::default()).unwrap();
    assert!(ft.cells.len() < size, "fixture should have a nontrivial facial set");
    let want = closed_form(&model, &counts);
    let support: Vec<u128> = (0..size as u128).filter(|&c| want[c as usize] > 0.0).collect();
    assert_eq!(support, ft.cells.as_slice());
    let e = emle(&d, &counts, &ft.cells).unwrap();
    assert!(tv(&dense(&e.p, size), &want) <= 1e-6);
    let q = ipf(&d, &counts, &ft.cells, 1e-12, 10_000).unwrap();
    assert!(tv(&dense(&q, size), &want) <= 1e-6);
}

#[test]
fn ipf_fails_on_the_full_table_with_zero_margins() {
    let (model, counts) = chain();
    let d = model.design().unwrap();
    assert!(ipf(&d, &counts, &CellSet::full(d.space().size() as u64), 1e-9, 1000).is_err());
}

#[test]
fn poisson_surrogate_gives_the_same_probabilities() {
    let mut r = common::rng(5);
    let mut compared = 0;
    for _ in 0..30 {
        let d = common::random_model(&mut r);
        let counts = common::random_counts(&mut r, d.schema(), 0.5);
        let ft = facial_closure(&d, &counts.support(), &FacialOptions::default()).unwrap().cells;
        let basis = select_mu_basis(&d, &counts, &ft, &ft).unwrap();
        let Ok(e) = emle(&d, &counts, &ft) else { continue };
        let pois = PoissonSurrogate::build(&d, &counts, &basis).unwrap();
        let opt = maximize(&pois, &vec![0.0; pois.dim()], &OptimOptions::default()).unwrap();
        let p = pois.probabilities(&opt.x).unwrap();
        let err = e.p.iter().zip(&p).fold(0.0f64, |m, ((_, a), b)| m.max((a - b).abs()));
        assert!(err <= 1e-8, "max difference {err}");
        compared += 1;
    }
    assert!(compared >= 20);
}

#[test]
fn restricted_fit_agrees_with_the_emle_when_f2_is_ft() {
    let (model, counts) = chain();
    let d = model.design().unwrap();
    let ft = facial_closure(&d, &counts.support(), &FacialOptions::default()).unwrap().cells;
    let basis = select_mu_basis(&d, &counts, &ft, &ft).unwrap();
    let rep = fit(&d, &counts, &basis, FitTarget::RestrictedF2, &OptimOptions::default()).unwrap();
    let e = emle(&d, &counts, &ft).unwrap();
    assert!(rep.converged);
    assert!((rep.loglik - e.loglik).abs() <= 1e-8);
    let free = fit(&d, &counts, &basis, FitTarget::Unrestricted, &OptimOptions::default()).unwrap();
    assert!(!free.drifting.is_empty());
    assert!(free.drifting.iter().all(|c| !ft.contains(c.parse().unwrap())));
}
