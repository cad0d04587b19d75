//! Separators, prime components and decomposability of a few complexes.
//!
//! cargo run --example separators

use hierface::complex::{grid_complex, Complex, SeparatorStrategy};

fn show(name: &str, c: &Complex) -> hierface::Result<()> {
    let prime = c.prime_components();
    let all = c.enumerate_separators(SeparatorStrategy::AllMinimal, 10_000)?;
    let good = c.enumerate_separators(SeparatorStrategy::MinPartSize(3), 10_000)?;
    println!("{name}: {} vertices, {} generators", c.n_vertices(), c.generators().len());
    println!("  decomposable: {}", c.is_decomposable().is_some());
    println!("  prime components: {:?}", prime.components.iter().map(|s| c.names_of(*s)).collect::<Vec<_>>());
    println!("  minimal separators: {}, with both parts >= 3: {}", all.splits.len(), good.splits.len());
    if c.grid().is_some() {
        let reg = c.enumerate_separators(SeparatorStrategy::GridRegular, 10_000)?;
        println!("  horizontal/vertical/diagonal separators: {}", reg.splits.len());
    }
    Ok(())
}

fn main() -> hierface::Result<()> {
    show("chain a-b-c", &Complex::new(&["a", "b", "c"], &[vec!["a", "b"], vec!["b", "c"]])?)?;
    show("4-cycle", &Complex::new(&["a", "b", "c", "d"], &[vec!["a", "b"], vec!["b", "c"], vec!["c", "d"], vec!["a", "d"]])?)?;
    show("4x4 grid", &grid_complex(4, 4)?)?;
    Ok(())
}
