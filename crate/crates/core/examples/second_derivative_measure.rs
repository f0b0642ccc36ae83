//! Two estimators of the pairing `int g d<D^2 M, k' (x) h'>`: double
//! integration by parts and the kernel-conditioned chain rule.
//!
//! usage: second_derivative_measure [samples] [n]

use bvmax::malliavin::{chain_max_integrated, d2m_weak_estimator, KernelConfig};
use bvmax::path::CylindricalFunction;
use bvmax::{Direction, DirectionKind, SeedSpec, TimeGrid};

fn main() -> bvmax::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples: u64 = args.next().map_or(100_000, |s| s.parse().expect("samples"));
    let n: usize = args.next().map_or(500, |s| s.parse().expect("n"));
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get());
    let grid = TimeGrid::new(n, 1.0)?;
    let k = Direction::from_kind(grid, DirectionKind::Constant);
    let h = Direction::from_kind(grid, DirectionKind::Constant);
    let kcfg = KernelConfig::default_for(samples, grid.horizon());

    println!("g, weak, weak_se, chain_b, chain_b_se, chain_b2, chain_b2_se, effective");
    for id in ["one", "sigmoid", "linear"] {
        let g = CylindricalFunction::from_catalog(grid, id)?;
        let weak = d2m_weak_estimator(&g, &k, &h, grid, samples, workers, SeedSpec::new(1, 0))?;
        let chain = chain_max_integrated(&g, &k, &h, grid, &kcfg, samples, workers, SeedSpec::new(1, 1))?;
        println!(
            "{id}, {:.5}, {:.5}, {:.5}, {:.5}, {:.5}, {:.5}, {}",
            weak.mean,
            weak.std_error,
            chain.at_bandwidth.mean,
            chain.at_bandwidth.std_error,
            chain.at_half_bandwidth.mean,
            chain.at_half_bandwidth.std_error,
            chain.effective_samples
        );
    }
    Ok(())
}
