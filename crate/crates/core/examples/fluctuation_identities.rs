//! Exact half-line stay probabilities, the generating-function identity and
//! the bridge identity `P(stay below | W_n = 0) = 1/n`, with Monte Carlo
//! estimates next to the exact values.
//!
//! usage: fluctuation_identities [samples]

use bvmax::fluctuation::{
    andersen_series_check, bridge_argmax_histogram, bridge_stay_prob_exact, halfline_prob_exact, mc_bridge_stay_prob,
    mc_halfline_prob,
};
use bvmax::SeedSpec;

fn main() -> bvmax::Result<()> {
    let samples: u64 = std::env::args().nth(1).map_or(200_000, |s| s.parse().expect("samples"));
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get());

    let check = andersen_series_check(64)?;
    println!("series identity to order 64: exact match = {}", check.exact_match());
    println!("coefficient 10 = {}", check.lhs.coefficients[10]);

    println!("\nn, exact, exact_f64, mc, mc_se");
    for n in [2usize, 5, 10, 100] {
        let exact = halfline_prob_exact(n as u64);
        let mc = mc_halfline_prob(n, samples, workers, SeedSpec::new(7, n as u64))?;
        println!("{n}, {exact}, {:.6}, {:.6}, {:.6}", exact.to_f64(), mc.mean, mc.std_error);
    }

    println!("\nbridge n, exact, mc, mc_se");
    for n in [2usize, 5, 10, 100] {
        let exact = bridge_stay_prob_exact(n as u64)?;
        let mc = mc_bridge_stay_prob(n, samples, workers, SeedSpec::new(8, n as u64))?;
        println!("{n}, {exact}, {:.6}, {:.6}", mc.mean, mc.std_error);
    }

    let hist = bridge_argmax_histogram(20, samples, workers, SeedSpec::new(9, 0))?;
    println!(
        "\nbridge argmax over 20 positions: chi2 = {:.2}, p = {:.3}, ties = {}",
        hist.chi_square, hist.p_value, hist.ties
    );
    Ok(())
}
