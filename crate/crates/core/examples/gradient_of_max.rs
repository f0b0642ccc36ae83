//! Finite-difference derivatives of the discrete maximum: the gradient
//! `d_h M = h(sigma)`, vanishing mixed second differences away from ties, and
//! the `1/eps` blow-up on a path with two equal peaks.
//!
//! usage: gradient_of_max [samples] [n]

use bvmax::malliavin::{
    fd_second, max_functional, second_difference_zero_fraction, tied_peak_path, verify_grad_max, FDConfig,
};
use bvmax::{Direction, DirectionKind, SeedSpec, TimeGrid};

fn main() -> bvmax::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples: u64 = args.next().map_or(1_000, |s| s.parse().expect("samples"));
    let n: usize = args.next().map_or(1_000, |s| s.parse().expect("n"));
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get());
    let grid = TimeGrid::new(n, 1.0)?;

    println!("direction, checked, excluded, fraction, max_error");
    for kind in [DirectionKind::Constant, DirectionKind::FirstHalf, DirectionKind::Cosine] {
        let h = Direction::from_kind(grid, kind);
        let c = verify_grad_max(grid, &h, samples, workers, SeedSpec::new(5, 0), &FDConfig::first_order(1.0))?;
        println!("{}, {}, {}, {:.4}, {:.2e}", kind.name(), c.checked, c.excluded, c.fraction, c.max_error);
    }

    let h = Direction::from_kind(grid, DirectionKind::Cosine);
    let k = Direction::from_kind(grid, DirectionKind::FirstHalf);
    let z = second_difference_zero_fraction(grid, &h, &k, samples, workers, SeedSpec::new(6, 0), &FDConfig::second_order(1.0))?;
    println!("\nsecond differences zero to rounding: {}/{} (max |d2| {:.1e})", z.zero, z.checked, z.max_abs);

    let tied = tied_peak_path();
    let hk = Direction::from_kind(*tied.grid(), DirectionKind::FirstHalf);
    println!("\ntied peaks, eps, mixed second difference");
    for eps in [1e-2, 5e-3, 2.5e-3] {
        let d2 = fd_second(max_functional, &tied, &hk, &hk, &FDConfig::new(eps, 1e-6)?)?;
        println!("{eps:.1e}, {d2:.3}");
    }
    Ok(())
}
