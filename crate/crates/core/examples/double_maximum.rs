//! Concentration of the second derivative on paths with two maxima: the
//! top-two gap, conditional excess fractions and the both-excess witness.
//!
//! usage: double_maximum [samples] [n]

use bvmax::concentration::{double_max_witness, excess_conditional, unique_max_check};
use bvmax::{SeedSpec, TimeGrid};

fn main() -> bvmax::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples: u64 = args.next().map_or(200_000, |s| s.parse().expect("samples"));
    let n: usize = args.next().map_or(500, |s| s.parse().expect("n"));
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get());
    let grid = TimeGrid::new(n, 1.0)?;
    let j = n / 2;

    let ties = unique_max_check(grid, &[1e-1, 1e-2, 1e-3], samples, workers, SeedSpec::new(13, 0))?;
    println!("exact ties: {}", ties.exact_ties);
    println!("delta, P(gap < delta), halving ratio");
    for ((d, f), r) in ties.deltas.iter().zip(&ties.fractions).zip(ties.halving_ratios()) {
        println!("{d:.0e}, {f:.5}, {r:.3}");
    }

    let rows = excess_conditional(j, 0.01, &[0.2, 0.1, 0.05], grid, samples, workers, SeedSpec::new(13, 1))?;
    println!("\ndelta, P(some excess < delta | |Delta| < 0.01), se");
    for r in rows {
        println!("{}, {:.4}, {:.4}", r.delta, r.estimate.mean, r.estimate.std_error);
    }

    let w = double_max_witness(j, &[0.8, 0.4, 0.2, 0.1], 0.05, grid, samples, workers, SeedSpec::new(13, 2), 0)?;
    println!("\neps, P(both excesses > 0.05 | |Delta| < eps), se");
    for r in &w.rows {
        println!("{}, {:.4}, {:.4}", r.eps, r.estimate.mean, r.estimate.std_error);
    }
    println!("unconditioned: {:.4}", w.baseline.mean);
    println!("separation violations: {}", w.separation_violations);
    Ok(())
}
