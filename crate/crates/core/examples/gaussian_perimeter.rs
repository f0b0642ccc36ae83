//! Gaussian perimeter of `{W_n > 0}`: the exact halfspace value, a tube
//! estimate in the full dimension, and the perimeter restricted to the
//! stay-below event from bridge sampling.
//!
//! usage: gaussian_perimeter [samples]

use bvmax::gaussian_bv::{halfspace_perimeter, restricted_perimeter_bridge, tube_perimeter, HalfspaceSpec};
use bvmax::{SeedSpec, INV_SQRT_2PI};

fn main() -> bvmax::Result<()> {
    let samples: u64 = std::env::args().nth(1).map_or(200_000, |s| s.parse().expect("samples"));
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get());

    println!("n, exact, tube, tube_error_bound");
    for n in [1usize, 10, 100] {
        let spec = HalfspaceSpec::walk_endpoint(n)?;
        let exact = halfspace_perimeter(&spec);
        let tube = tube_perimeter(&spec, 0.01, samples, workers, SeedSpec::new(3, n as u64))?;
        println!("{n}, {:.6}, {:.6}, {:.6}", exact.value, tube.value, tube.error_bound);
    }

    println!("\nn, restricted_mc, error_bound, (2 pi)^(-1/2) / n");
    for n in [2usize, 10, 100] {
        let est = restricted_perimeter_bridge(n, samples, workers, SeedSpec::new(4, n as u64))?;
        println!("{n}, {:.6}, {:.6}, {:.6}", est.value, est.error_bound, INV_SQRT_2PI / n as f64);
    }
    Ok(())
}
