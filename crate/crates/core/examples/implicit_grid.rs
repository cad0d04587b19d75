//! Projection-based inner and outer facial sets on the 5x10 grid, where the
//! cell space has 2^50 elements.
//!
//! cargo run --release --example implicit_grid

use hierface::complex::grid_complex;
use hierface::design::Design;
use hierface::facial::FacialOptions;
use hierface::implicit::{iterate_two_families, Family};
use hierface::sim::{draw_theta, rng_for, ColumnChainSampler, ThetaSource};
use hierface::table::Schema;

fn main() -> hierface::Result<()> {
    let c = grid_complex(5, 10)?;
    let d = Design::build(&c, &Schema::binary(c.vertex_names())?)?;
    let blue = Family::grid_columns(&c, &[2, 4, 6, 8])?;
    let red = Family::grid_columns(&c, &[1, 3, 5, 7])?;
    for (k, b) in blue.blocks.iter().enumerate() {
        println!("blue block {k}: {:?}", c.names_of(*b));
    }
    let mut rng = rng_for(7, 0);
    let theta = draw_theta(&d, ThetaSource::StandardNormal, &mut rng);
    let counts = ColumnChainSampler::new(&d, &theta)?.sample_counts(&d, 50, &mut rng)?;
    let res = iterate_two_families(&d, &counts.support(), &blue, &red, 10, &FacialOptions::default())?;
    println!("rounds {}, stable {}", res.rounds, res.stable);
    println!("F2 != I: {}, F1 = F2: {}", !res.outer.is_full(), res.f1_eq_f2());
    for (w, (p1, p2)) in res.inner.cover.iter().zip(res.inner.projections.iter().zip(&res.outer.projections)) {
        println!("  block {:?}: |F1 proj| = {}, |F2 proj| = {}", c.names_of(*w), p1.len(), p2.len());
    }
    Ok(())
}
