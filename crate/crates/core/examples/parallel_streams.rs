//! Block-parallel sampling is deterministic: the same seed gives bitwise
//! identical estimates for any worker count, and distinct stream indices give
//! independent estimates.

use bvmax::sampling::{mc_run, normal, StreamRng};
use bvmax::SeedSpec;

fn main() -> bvmax::Result<()> {
    // maximum of a 100-step walk scaled to T = 1
    let stat = |rng: &mut StreamRng| {
        let (mut w, mut m) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            w += normal(rng);
            m = m.max(w);
        }
        m / 10.0
    };
    let seed = SeedSpec::new(42, 0);
    println!("workers, E[max], se");
    let reference = mc_run(100_000, 1, seed, stat)?;
    for workers in [1usize, 2, 4, 8] {
        let est = mc_run(100_000, workers, seed, stat)?;
        assert_eq!(est.mean.to_bits(), reference.mean.to_bits());
        println!("{workers}, {:.6}, {:.6}", est.mean, est.std_error);
    }
    println!("\nstream, E[max]");
    for stream in 1..4 {
        let est = mc_run(100_000, 4, seed.with_stream(stream), stat)?;
        println!("{stream}, {:.6}", est.mean);
    }
    Ok(())
}
