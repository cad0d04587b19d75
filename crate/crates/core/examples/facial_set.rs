//! Facial set of the data support with an exact certificate, checked against
//! the brute-force oracle, and the facets through it.
//!
//! cargo run --example facial_set

use hierface::facial::{bruteforce_facial, facets_containing, facial_closure, FacialOptions};
use hierface::model::Model;
use hierface::table::read_counts_csv;

fn main() -> hierface::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    for name in ["two_by_two", "abc_chain"] {
        let model = Model::load(&dir.join(format!("{name}.json")))?;
        let design = model.design()?;
        let counts = read_counts_csv(&dir.join(format!("{name}.csv")), &model.schema)?;
        let opts = FacialOptions::default();
        let f = facial_closure(&design, &counts.support(), &opts)?;
        let oracle = bruteforce_facial(&design, &counts.support())?;
        println!("{name}: F = {:?}, dim {}, oracle agrees: {}", f.cells.as_slice(), f.dimension, oracle.cells == f.cells);
        println!("  MLE exists: {}", f.cells.len() as u128 == design.space().size());
        if let Some(g) = &f.certificate {
            println!("  certificate {:?}", g.iter().map(|x| x.to_string()).collect::<Vec<_>>());
            for facet in facets_containing(&design, &f.cells, &opts)? {
                println!("  facet of size {} with certificate {:?}", facet.cells.len(), facet.certificate.unwrap().iter().map(|x| x.to_string()).collect::<Vec<_>>());
            }
        }
    }
    Ok(())
}
