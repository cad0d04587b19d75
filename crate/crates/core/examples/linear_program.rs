//! The simplex solver in rational and floating-point arithmetic.
//!
//! cargo run --example linear_program

use hierface::exact::q;
use hierface::linprog::{solve, Bounded, LpProblem, Mode};

fn main() {
    // maximize x + y  s.t.  x + 2y <= 4,  3x + y <= 6,  x, y >= 0
    let mut p = LpProblem::new(2);
    p.objective = vec![q(1), q(1)];
    p.nonneg = vec![true, true];
    p.inequalities = vec![
        Bounded { row: vec![q(1), q(2)], lower: None, upper: Some(q(4)) },
        Bounded { row: vec![q(3), q(1)], lower: None, upper: Some(q(6)) },
    ];
    for mode in [Mode::Exact, Mode::Float] {
        let s = solve(&p, mode);
        println!("{mode:?}: {:?} x = {:?} z = {}", s.status, s.x, s.z);
        if let Some((x, z)) = &s.exact {
            println!("  exact x = [{}, {}], z = {z}", x[0], x[1]);
        }
    }
}
