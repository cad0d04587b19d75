//! Estimation on the 2x2 table with a zero cell: the unrestricted fit drifts,
//! IPF divides by zero, the extended MLE is the empirical distribution, and
//! the coordinate-wise fit depends on the update order.
//!
//! cargo run --example estimation

use hierface::estimate::{emle, fit, gauss_seidel_theta, ipf, lambda_reparam, select_mu_basis, FitTarget, OptimOptions};
use hierface::facial::{facial_closure, FacialOptions};
use hierface::model::Model;
use hierface::table::{read_counts_csv, CellSet};

fn main() -> hierface::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let model = Model::load(&dir.join("two_by_two.json"))?;
    let d = model.design()?;
    let counts = read_counts_csv(&dir.join("two_by_two.csv"), &model.schema)?;
    let ft = facial_closure(&d, &counts.support(), &FacialOptions::default())?;
    let basis = select_mu_basis(&d, &counts, &ft.cells, &ft.cells)?;
    println!("zero cell {}, L = {:?}, L_t = {:?}", basis.zero_cell, basis.l, basis.l1);

    let free = fit(&d, &counts, &basis, FitTarget::Unrestricted, &OptimOptions::default())?;
    println!("unrestricted: converged {}, drifting {:?}", free.converged, free.drifting);
    let face = fit(&d, &counts, &basis, FitTarget::RestrictedF2, &OptimOptions::default())?;
    for r in &face.rows {
        println!("  mu[{}] = {:?} ({:?}), naive {:?}", r.label, r.mu_hat, r.status, r.naive);
    }

    let e = emle(&d, &counts, &ft.cells)?;
    println!("EMLE p* = {:?}, moment error {:.1e}", e.p, e.moment_error);
    match ipf(&d, &counts, &CellSet::full(4), 1e-9, 1000) {
        Ok(p) => println!("IPF on I: {p:?}"),
        Err(err) => println!("IPF on I: {err}"),
    }
    println!("IPF on F_t: {:?}", ipf(&d, &counts, &ft.cells, 1e-9, 1000)?);

    for order in [[0, 1, 2], [2, 1, 0]] {
        let th = gauss_seidel_theta(&d, &counts, &order, 50, -30.0)?;
        println!("coordinate-wise, order {order:?}: theta = {th:?}");
    }

    let lam = lambda_reparam(&d, &basis, &[ft.certificate.clone().unwrap()], true)?;
    println!("lambda: L_t {:?}, rest {:?}, witnesses {:?}", lam.lt, lam.rest, lam.witnesses);
    Ok(())
}
