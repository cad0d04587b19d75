//! Inner and outer approximations of the facial set on the 4x4 grid,
//! compared with the exact LP answer.
//!
//! cargo run --release --example sandwich

use hierface::approx::{sandwich, StrategyConfig};
use hierface::complex::grid_complex;
use hierface::design::Design;
use hierface::facial::{facial_closure, FacialOptions};
use hierface::sim::{draw_theta, rng_for, sample_counts, ThetaSource};
use hierface::table::Schema;

fn main() -> hierface::Result<()> {
    let c = grid_complex(4, 4)?;
    let d = Design::build(&c, &Schema::binary(c.vertex_names())?)?;
    let cfg: StrategyConfig = serde_json::from_str(include_str!("data/strategies_grid.json"))?;
    let opts = FacialOptions::default();
    for rep in 0..5 {
        let mut rng = rng_for(1, rep);
        let theta = draw_theta(&d, ThetaSource::StandardNormal, &mut rng);
        let counts = sample_counts(&d, &theta, 10, &mut rng, opts.cap)?;
        let (inner, outer, cmp) = sandwich(&d, &counts.support(), &cfg, &opts)?;
        let ft = facial_closure(&d, &counts.support(), &opts)?;
        println!(
            "rep {rep}: |F1| = {}, |Ft| = {}, |F2| = {}, ranks {} <= {} <= {}, determined {}, rounds {}",
            inner.cells.len(),
            ft.cells.len(),
            outer.cells.len(),
            cmp.rank1,
            ft.dimension + 1,
            cmp.rank2,
            cmp.determined,
            inner.rounds
        );
    }
    Ok(())
}
