//! Counts, cell labels, design rows and sufficient statistics.
//!
//! cargo run --example design_matrix

use hierface::model::Model;
use hierface::table::read_counts_csv;

fn main() -> hierface::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let model = Model::load(&dir.join("abc_chain.json"))?;
    let design = model.design()?;
    let counts = read_counts_csv(&dir.join("abc_chain.csv"), &model.schema)?;
    println!("|I| = {}, rows of A = {}", design.space().size(), design.n_rows());
    for j in 0..design.n_rows() {
        println!("  row {j}: {}", design.row_label(j));
    }
    for (cell, n) in counts.iter() {
        println!("cell {cell} ({}): n = {n}, column {:?}", model.schema.cell_label(cell), design.column(cell));
    }
    let st = design.sufficient_statistic(&counts);
    println!("t = {:?}, N = {}", st.t, st.n);
    Ok(())
}
