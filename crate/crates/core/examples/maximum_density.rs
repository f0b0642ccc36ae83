//! Densities of the maximum: segment maxima, the difference of maxima
//! `Delta_t M` at 0 against a kernel estimate, the total-variation bound of
//! the discretized second derivative and its limit integral.
//!
//! usage: maximum_density [samples] [n]

use bvmax::density::{asymptotic_match, limit_integral, lt_zero, lt_zero_closed_form, riemann_limit_sum, TVBoundTable};
use bvmax::malliavin::{kde_delta, DeltaSampling, KernelConfig};
use bvmax::{SeedSpec, TimeGrid};

fn main() -> bvmax::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples: u64 = args.next().map_or(200_000, |s| s.parse().expect("samples"));
    let n: usize = args.next().map_or(1_000, |s| s.parse().expect("n"));
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get());
    let grid = TimeGrid::new(n, 1.0)?;
    let kcfg = KernelConfig::default_for(samples, 1.0);

    let ts = [0.25, 0.5, 0.75];
    let indices: Vec<usize> = ts.iter().map(|&t| grid.index_at_fraction(t)).collect();
    let cont = kde_delta(&indices, DeltaSampling::Continuous, grid, &kcfg, samples, workers, SeedSpec::new(11, 0))?;
    let disc = kde_delta(&indices, DeltaSampling::Grid, grid, &kcfg, samples, workers, SeedSpec::new(11, 0))?;
    println!("closed form at 0: {:.5}, bandwidth {:.4}", lt_zero_closed_form(1.0), kcfg.bandwidth);
    println!("t, quadrature, kde_continuous, se, kde_grid");
    for ((t, c), d) in ts.iter().zip(&cont).zip(&disc) {
        println!(
            "{t}, {:.5}, {:.5}, {:.5}, {:.5}",
            lt_zero(*t, 1.0)?,
            c.at_bandwidth.mean,
            c.at_bandwidth.std_error,
            d.at_bandwidth.mean
        );
    }

    println!("\nn, bound, bulk, remainder");
    for row in TVBoundTable::compute(&[100, 1000, 2000], 1.0)?.rows {
        println!("{}, {:.5}, {:.5}, {:.5}", row.n, row.bound, row.bulk, row.remainder);
    }
    let lim = limit_integral()?;
    println!("\nlimit integral {:.9} (error {:.1e}), 2 pi = {:.9}", lim.value, lim.error, std::f64::consts::TAU);
    println!("Riemann sum at n = 2000: {:.6}", riemann_limit_sum(2000));
    let a = asymptotic_match(1000)?;
    println!("sqrt(n) gamma(A_n) at n = 1000: {:.6} vs {:.6}", a.scaled, a.limit);
    Ok(())
}
