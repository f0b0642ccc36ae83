use num_rational::BigRational;
use num_traits::One;

use crate::concentration::{double_max_witness, excess_conditional, unique_max_check};
use crate::density::{lt_zero, lt_zero_closed_form, riemann_limit_sum, limit_integral, asymptotic_match, TVBoundTable};
use crate::error::{Error, Result};
use crate::fluctuation::{andersen_series_check, bridge_argmax_histogram, halfline_prob_f64, mc_bridge_stay_prob, mc_halfline_prob};
use crate::gaussian_bv::{halfspace_perimeter, restricted_perimeter_bridge, tube_perimeter, HalfspaceSpec};
use crate::malliavin::{
    chain_max_integrated, d2m_weak_estimator, duality_residual, fd_second, interval_at_time, kde_delta, max_functional,
    second_difference_zero_fraction, sigma_fd_zero_fraction, DeltaSampling, tied_peak_path, verify_grad_max, weak_second_pairing,
    FDConfig, KernelConfig,
};
use crate::path::{CylindricalFunction, Direction, DirectionKind, TimeGrid};
use crate::sampling::{MCEstimate, SeedSpec};
use crate::INV_SQRT_2PI;

use super::config::*;
use super::{experiment_seed, fingerprint, ExperimentConfig, ExperimentOutput, Hooks, ResultRow};

struct Ctx<'a> {
    id: &'a str,
    master_seed: u64,
    fingerprint: String,
    workers: usize,
    hooks: &'a Hooks,
    out: ExperimentOutput,
}

enum Check {
    Info,
    /// `|estimate - reference| <= tolerance`.
    Abs(f64, f64),
    /// Pass flag computed by the caller, with an optional reference and tolerance.
    Flag(bool, Option<f64>, Option<f64>),
}

impl Ctx<'_> {
    fn seed(&self, sub: &str) -> SeedSpec {
        experiment_seed(self.master_seed, &format!("{}/{sub}", self.id))
    }

    fn push(&mut self, label: &str, x: Option<f64>, estimate: f64, std_error: Option<f64>, samples: u64, seed: Option<SeedSpec>, check: Check) {
        let (reference, tolerance, pass) = match check {
            Check::Info => (None, None, true),
            Check::Abs(r, t) => (Some(r), Some(t), (estimate - r).abs() <= t),
            Check::Flag(p, r, t) => (r, t, p),
        };
        let seed = seed.unwrap_or(SeedSpec::new(self.master_seed, 0));
        self.out.rows.push(ResultRow {
            experiment: self.id.to_string(),
            label: label.to_string(),
            x,
            estimate,
            std_error,
            reference,
            tolerance,
            pass: pass && estimate.is_finite(),
            samples,
            master_seed: seed.master_seed,
            stream_index: seed.stream_index,
            param_fingerprint: self.fingerprint.clone(),
        });
    }

    fn exact(&mut self, label: &str, x: Option<f64>, value: f64, check: Check) {
        self.push(label, x, value, None, 0, None, check);
    }

    fn mc(&mut self, label: &str, x: Option<f64>, est: &MCEstimate, check: Check) {
        self.push(label, x, est.mean, Some(est.std_error), est.samples, Some(est.seed), check);
    }

    /// Estimate within `k` standard errors (plus `slack`) of `reference`.
    fn mc_within(&mut self, label: &str, x: Option<f64>, est: &MCEstimate, reference: f64, k: f64, slack: f64) {
        let tol = k * est.std_error + slack;
        self.mc(label, x, est, Check::Abs(reference, tol));
    }

    fn table(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.out.tables.push((name.to_string(), buf));
        Ok(())
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Runs one experiment. Runtime errors name the experiment id and seed.
pub fn execute(exp: &ExperimentConfig, master_seed: u64, workers: usize, hooks: &Hooks) -> Result<ExperimentOutput> {
    let mut ctx = Ctx {
        id: &exp.id,
        master_seed,
        fingerprint: fingerprint(exp),
        workers: workers.max(1),
        hooks,
        out: ExperimentOutput::default(),
    };
    dispatch(&mut ctx, &exp.spec).map_err(|e| {
        Error::Report(format!(
            "experiment `{}` (master seed {master_seed}, stream {}) failed: {e}",
            exp.id,
            experiment_seed(master_seed, &exp.id).stream_index
        ))
    })?;
    Ok(ctx.out)
}

fn dispatch(ctx: &mut Ctx, spec: &ExperimentSpec) -> Result<()> {
    use ExperimentSpec::*;
    match spec {
        AndersenSeries(p) => andersen(ctx, p),
        HalflineBounds(p) => halfline_bounds(ctx, p),
        HalflineMc(p) => stay(ctx, p, false),
        BridgeStay(p) => stay(ctx, p, true),
        BridgeArgmax(p) => bridge_argmax(ctx, p),
        HalfspacePerimeter(p) => perimeter(ctx, p),
        GradMax(p) => grad_max(ctx, p),
        SecondDifference(p) => second_difference(ctx, p),
        SigmaFd(p) => sigma_fd(ctx, p),
        DoubleIbp(p) => double_ibp(ctx, p),
        ChainMax(p) => chain_max(ctx, p),
        Density(p) => density(ctx, p),
        TvBound(p) => tv_bound(ctx, p),
        LimitIntegral(p) => limit(ctx, p),
        Concentration(p) => concentration(ctx, p),
    }
}

fn andersen(ctx: &mut Ctx, p: &AndersenParams) -> Result<()> {
    let check = andersen_series_check(p.order)?;
    let exact = check.exact_match();
    ctx.exact("series_exact_match", Some(p.order as f64), flag(exact), Check::Flag(exact, Some(1.0), Some(0.0)));
    let binomial_mismatch = check
        .lhs
        .coefficients
        .iter()
        .enumerate()
        .find(|(n, c)| (ctx.hooks.halfline_prob_exact)(*n as u64) != **c)
        .map(|(n, _)| n);
    ctx.exact(
        "series_vs_central_binomial",
        Some(p.order as f64),
        flag(binomial_mismatch.is_none()),
        Check::Flag(binomial_mismatch.is_none(), Some(1.0), Some(0.0)),
    );
    if let Some(n) = check.first_mismatch().or(binomial_mismatch) {
        ctx.exact("first_mismatch", Some(n as f64), n as f64, Check::Info);
    }
    ctx.table("coefficients", |buf| check.lhs.write_csv(buf))
}

fn halfline_bounds(ctx: &mut Ctx, p: &HalflineBoundsParams) -> Result<()> {
    let mut product = BigRational::one();
    for n in 1..=p.n_max {
        product *= BigRational::new((2 * n - 1).into(), (2 * n).into());
        let gamma = (ctx.hooks.halfline_prob_exact)(n);
        let x = Some(n as f64);
        let matches = gamma.inner() == &product;
        ctx.exact("halfline_vs_product", x, gamma.to_f64(), Check::Flag(matches, Some(product_f64(&product)), Some(0.0)));
        // gamma <= n^{-1/2}  <=>  n gamma^2 <= 1, decided in exact arithmetic
        let g = gamma.inner();
        let within = BigRational::from_integer(n.into()) * g * g <= BigRational::one();
        ctx.exact("gamma_bound", x, gamma.to_f64(), Check::Flag(within, Some(1.0 / (n as f64).sqrt()), None));
        let restricted = INV_SQRT_2PI / n as f64;
        ctx.exact("restricted_perimeter_bound", x, restricted, Check::Flag(restricted <= 1.0 / n as f64, Some(1.0 / n as f64), None));
    }
    for n in [1u64, 10, 100, 1000, 10_000] {
        let m = asymptotic_match(n)?;
        ctx.exact("sqrt_n_gamma", Some(n as f64), m.scaled, Check::Flag(true, Some(m.limit), None));
    }
    let m = asymptotic_match(p.asymptote_n)?;
    ctx.exact(
        "asymptote_relative_gap",
        Some(p.asymptote_n as f64),
        m.relative_gap,
        Check::Flag(m.relative_gap < p.asymptote_tolerance, Some(0.0), Some(p.asymptote_tolerance)),
    );
    Ok(())
}

fn product_f64(r: &BigRational) -> f64 {
    crate::rational::ExactRational::from(r.clone()).to_f64()
}

fn stay(ctx: &mut Ctx, p: &StayParams, bridge: bool) -> Result<()> {
    for &n in &p.ns {
        let seed = ctx.seed(&format!("n{n}"));
        let x = Some(n as f64);
        if bridge {
            let est = mc_bridge_stay_prob(n, p.samples, ctx.workers, seed)?;
            ctx.mc_within("bridge_stay", x, &est, 1.0 / n as f64, 3.0, 0.0);
        } else {
            let est = mc_halfline_prob(n, p.samples, ctx.workers, seed)?;
            ctx.mc_within("halfline_stay", x, &est, halfline_prob_f64(n as u64), 3.0, 0.0);
        }
    }
    Ok(())
}

fn bridge_argmax(ctx: &mut Ctx, p: &ArgmaxParams) -> Result<()> {
    let hist = bridge_argmax_histogram(p.n, p.samples, ctx.workers, ctx.seed("hist"))?;
    let seed = Some(hist.seed);
    ctx.push("chi_square_p", Some(p.n as f64), hist.p_value, None, p.samples, seed, Check::Flag(hist.p_value > p.p_min, None, Some(p.p_min)));
    ctx.push("exact_ties", Some(p.n as f64), hist.ties as f64, None, p.samples, seed, Check::Abs(0.0, 0.0));
    ctx.push("chi_square_stat", Some(p.n as f64), hist.chi_square, None, p.samples, seed, Check::Info);
    ctx.table("histogram", |buf| hist.write_csv(buf))
}

fn perimeter(ctx: &mut Ctx, p: &PerimeterParams) -> Result<()> {
    for &d in &p.dims {
        let est = halfspace_perimeter(&HalfspaceSpec::walk_endpoint(d)?);
        ctx.exact("exact", Some(d as f64), est.value, Check::Abs(INV_SQRT_2PI, 1e-15));
    }
    let spec = HalfspaceSpec::walk_endpoint(p.tube_dim)?;
    let tube = tube_perimeter(&spec, p.eps, p.samples, ctx.workers, ctx.seed("tube"))?;
    let est = MCEstimate {
        mean: tube.value,
        std_error: tube.std_error,
        samples: tube.samples,
        seed: tube.seed.expect("monte carlo"),
    };
    ctx.mc_within("tube", Some(p.eps), &est, INV_SQRT_2PI, 3.0, 1e-4);
    for &n in &p.bridge_ns {
        let r = restricted_perimeter_bridge(n, p.bridge_samples, ctx.workers, ctx.seed(&format!("bridge{n}")))?;
        let est = MCEstimate {
            mean: r.value,
            std_error: r.std_error,
            samples: r.samples,
            seed: r.seed.expect("monte carlo"),
        };
        ctx.mc_within("restricted", Some(n as f64), &est, INV_SQRT_2PI / n as f64, 3.0, 0.0);
    }
    Ok(())
}

fn grad_max(ctx: &mut Ctx, p: &GradMaxParams) -> Result<()> {
    let grid = TimeGrid::new(p.n, p.horizon)?;
    let cfg = FDConfig::new(p.eps * p.horizon.sqrt(), p.tolerance)?;
    for kind in &p.directions {
        let h = Direction::from_kind(grid, *kind);
        let seed = ctx.seed(kind.name());
        let c = verify_grad_max(grid, &h, p.samples, ctx.workers, seed, &cfg)?;
        let label = format!("fraction_{}", kind.name());
        ctx.push(&label, None, c.fraction, None, c.checked, Some(seed), Check::Flag(c.fraction >= p.min_fraction, Some(1.0), Some(1.0 - p.min_fraction)));
        ctx.push(&format!("excluded_{}", kind.name()), None, c.excluded as f64, None, p.samples, Some(seed), Check::Info);
        ctx.push(&format!("max_error_{}", kind.name()), None, c.max_error, None, c.checked, Some(seed), Check::Info);
    }
    Ok(())
}

fn second_difference(ctx: &mut Ctx, p: &SecondDiffParams) -> Result<()> {
    let grid = TimeGrid::new(p.n, p.horizon)?;
    let cfg = FDConfig::new(p.eps * p.horizon.sqrt(), 1e-6)?;
    let h = Direction::from_kind(grid, DirectionKind::Constant);
    let k = Direction::from_kind(grid, DirectionKind::Cosine);
    let seed = ctx.seed("zero");
    let c = second_difference_zero_fraction(grid, &h, &k, p.samples, ctx.workers, seed, &cfg)?;
    ctx.push("zero_fraction", None, c.fraction, None, c.checked, Some(seed), Check::Flag(c.fraction >= p.min_fraction, Some(1.0), Some(1.0 - p.min_fraction)));
    ctx.push("excluded", None, c.excluded as f64, None, p.samples, Some(seed), Check::Info);

    let path = tied_peak_path();
    let tg = *path.grid();
    let th = Direction::from_kind(tg, DirectionKind::Constant);
    let mut values = Vec::new();
    for i in 0..3 {
        let eps = p.tied_eps / f64::powi(2.0, i);
        let v = fd_second(max_functional, &path, &th, &th, &FDConfig::new(eps, 1e-6)?)?;
        ctx.exact("tied_peak_value", Some(eps), v, Check::Info);
        values.push(v);
    }
    for (i, w) in values.windows(2).enumerate() {
        let ratio = w[1] / w[0];
        ctx.exact("tied_peak_ratio", Some((i + 1) as f64), ratio, Check::Abs(2.0, 2.0 * p.ratio_tolerance));
    }
    Ok(())
}

fn sigma_fd(ctx: &mut Ctx, p: &SigmaFdParams) -> Result<()> {
    let grid = TimeGrid::new(p.n, p.horizon)?;
    let cfg = FDConfig::new(p.eps * p.horizon.sqrt(), 1e-6)?;
    let h = Direction::from_kind(grid, DirectionKind::Constant);
    let seed = ctx.seed("sigma");
    let c = sigma_fd_zero_fraction(grid, &h, p.samples, ctx.workers, seed, &cfg)?;
    ctx.push("zero_fraction", None, c.fraction, None, p.samples, Some(seed), Check::Flag(c.fraction >= p.min_fraction, Some(1.0), Some(1.0 - p.min_fraction)));
    ctx.push("gap_ok_nonzero", None, c.gap_ok_nonzero as f64, None, c.gap_ok, Some(seed), Check::Abs(0.0, 0.0));
    Ok(())
}

fn double_ibp(ctx: &mut Ctx, p: &DoubleIbpParams) -> Result<()> {
    let grid = TimeGrid::new(p.n, p.horizon)?;
    let k = Direction::from_kind(grid, p.k);
    let h = Direction::from_kind(grid, p.h);
    let one = CylindricalFunction::from_catalog(grid, "one")?;
    let w = ctx.workers;
    for id in &p.functions {
        let g = CylindricalFunction::from_catalog(grid, id)?;
        let est = weak_second_pairing(|_| 1.0, &g, &k, &h, grid, p.samples, w, ctx.seed(&format!("adjoint/{id}")))?;
        ctx.mc_within(&format!("adjoint_mean_{id}"), None, &est, 0.0, 3.0, 0.0);

        let a = d2m_weak_estimator(&g, &k, &h, grid, p.samples, w, ctx.seed(&format!("kh/{id}")))?;
        let b = d2m_weak_estimator(&g, &h, &k, grid, p.samples, w, ctx.seed(&format!("hk/{id}")))?;
        ctx.mc(&format!("d2m_kh_{id}"), None, &a, Check::Info);
        ctx.mc(&format!("d2m_hk_{id}"), None, &b, Check::Info);
        let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        ctx.push(&format!("symmetry_{id}"), None, a.mean - b.mean, Some(combined), p.samples, Some(a.seed), Check::Abs(0.0, 3.0 * combined));

        let cfg = FDConfig::first_order(p.horizon);
        let d = duality_residual(&g, &h, grid, p.samples, w, ctx.seed(&format!("duality/{id}")), &cfg)?;
        ctx.mc_within(&format!("duality_{id}"), None, &d, 0.0, 3.0, 1e-6);
    }
    let j = grid.index_at_fraction(p.t_fraction);
    let lin = weak_second_pairing(move |v| v[j], &one, &k, &h, grid, p.samples, w, ctx.seed("linear"))?;
    ctx.mc_within("linear_pairing", Some(grid.time(j)), &lin, 0.0, 3.0, 0.0);
    Ok(())
}

fn chain_max(ctx: &mut Ctx, p: &ChainMaxParams) -> Result<()> {
    let grid = TimeGrid::new(p.n, p.horizon)?;
    let k = Direction::from_kind(grid, p.k);
    let h = Direction::from_kind(grid, p.h);
    let mut kcfg = KernelConfig::default_for(p.samples, p.horizon);
    if let Some(b) = p.bandwidth {
        kcfg.bandwidth = b;
    }
    for id in &p.functions {
        let g = CylindricalFunction::from_catalog(grid, id)?;
        let weak = d2m_weak_estimator(&g, &k, &h, grid, p.samples, ctx.workers, ctx.seed(&format!("weak/{id}")))?;
        let chain = chain_max_integrated(&g, &k, &h, grid, &kcfg, p.samples, ctx.workers, ctx.seed(&format!("chain/{id}")))?;
        ctx.mc(&format!("weak_{id}"), None, &weak, Check::Info);
        for (tag, est) in [("b", chain.at_bandwidth), ("b2", chain.at_half_bandwidth)] {
            let bw = if tag == "b" { kcfg.bandwidth } else { 0.5 * kcfg.bandwidth };
            ctx.mc(&format!("chain_{tag}_{id}"), Some(bw), &est, Check::Info);
            let combined = (weak.std_error.powi(2) + est.std_error.powi(2)).sqrt();
            let tol = 3.0 * combined + chain.bias_diagnostic;
            ctx.push(&format!("agree_{tag}_{id}"), Some(bw), weak.mean - est.mean, Some(combined), p.samples, Some(est.seed), Check::Abs(0.0, tol));
        }
        ctx.push(&format!("bias_diagnostic_{id}"), Some(kcfg.bandwidth), chain.bias_diagnostic, None, p.samples, None, Check::Info);
        ctx.push(
            &format!("effective_samples_{id}"),
            None,
            chain.effective_samples as f64,
            None,
            p.samples,
            None,
            Check::Flag(!chain.low_effective_samples, None, None),
        );
    }
    Ok(())
}

fn density(ctx: &mut Ctx, p: &DensityParams) -> Result<()> {
    let closed = lt_zero_closed_form(p.horizon);
    let grid = TimeGrid::new(p.n, p.horizon)?;
    let mut kcfg = KernelConfig::default_for(p.samples, p.horizon);
    if let Some(b) = p.bandwidth {
        kcfg.bandwidth = b;
    }
    let points: Vec<usize> = p.ts.iter().map(|&t| grid.index_at_fraction(t)).collect();
    let kdes = kde_delta(&points, DeltaSampling::Continuous, grid, &kcfg, p.samples, ctx.workers, ctx.seed("kde"))?;
    for (&t, kde) in p.ts.iter().zip(&kdes) {
        let lt = lt_zero(t * p.horizon, p.horizon)?;
        ctx.exact("lt_zero", Some(t), lt, Check::Abs(closed, p.constancy_tolerance));
        ctx.mc("kde", Some(t), &kde.at_bandwidth, Check::Abs(closed, p.rel_tolerance * closed));
        ctx.mc("kde_half_bandwidth", Some(t), &kde.at_half_bandwidth, Check::Info);
    }
    if p.grid_comparison {
        let intervals: Vec<usize> = p.ts.iter().map(|&t| interval_at_time(&grid, t * p.horizon)).collect();
        let kdes = kde_delta(&intervals, DeltaSampling::Grid, grid, &kcfg, p.samples, ctx.workers, ctx.seed("kde_grid"))?;
        for (&t, kde) in p.ts.iter().zip(&kdes) {
            ctx.mc("kde_grid_maximum", Some(t), &kde.at_bandwidth, Check::Info);
        }
    }
    Ok(())
}

fn tv_bound(ctx: &mut Ctx, p: &TvBoundParams) -> Result<()> {
    let table = TVBoundTable::compute(&p.ns, p.horizon)?;
    let scaled = TVBoundTable::compute(&p.ns, p.scaled_horizon)?;
    let ratio = (p.scaled_horizon / p.horizon).sqrt();
    let limit = (2.0 / std::f64::consts::PI * p.horizon).sqrt();
    for (r, s) in table.rows.iter().zip(&scaled.rows) {
        let x = Some(r.n as f64);
        ctx.exact("bound", x, r.bound, Check::Flag(r.bound.is_finite(), Some(limit), None));
        ctx.exact("bulk", x, r.bulk, Check::Info);
        ctx.exact("remainder", x, r.remainder, Check::Info);
        ctx.exact("sqrt_t_scaling", x, s.bound / r.bound, Check::Abs(ratio, 4.0 * f64::EPSILON * ratio));
    }
    let rows = &table.rows;
    let last = rows[rows.len() - 1];
    let prev = rows[rows.len() - 2];
    let change = (last.bound - prev.bound).abs() / last.bound;
    ctx.exact("relative_change", Some(last.n as f64), change, Check::Abs(0.0, p.rel_change_tolerance));
    let decreasing = rows.windows(2).all(|w| w[1].remainder < w[0].remainder);
    ctx.exact("remainder_decreasing", None, flag(decreasing), Check::Flag(decreasing, Some(1.0), Some(0.0)));
    ctx.table("table", |buf| table.write_csv(buf))
}

fn limit(ctx: &mut Ctx, p: &LimitParams) -> Result<()> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let q = limit_integral()?;
    ctx.exact("limit_integral", None, q.value, Check::Abs(two_pi, p.tolerance));
    ctx.exact("quadrature_error", None, q.error, Check::Info);
    for n in [100, 500, p.riemann_n] {
        let r = riemann_limit_sum(n);
        let check = if n == p.riemann_n { Check::Abs(two_pi, p.riemann_rel_tolerance * two_pi) } else { Check::Info };
        ctx.exact("riemann_sum", Some(n as f64), r, check);
    }
    Ok(())
}

fn concentration(ctx: &mut Ctx, p: &ConcentrationParams) -> Result<()> {
    let grid = TimeGrid::new(p.n, p.horizon)?;
    let s = p.horizon.sqrt();
    let j = interval_at_time(&grid, p.t_fraction * p.horizon);
    let w = ctx.workers;

    let gaps: Vec<f64> = p.gap_deltas.iter().map(|d| d * s).collect();
    let seed = ctx.seed("gaps");
    let ties = unique_max_check(grid, &gaps, p.samples, w, seed)?;
    ctx.push("exact_ties", None, ties.exact_ties as f64, None, p.samples, Some(seed), Check::Abs(0.0, 0.0));
    for (i, &d) in p.gap_deltas.iter().enumerate() {
        ctx.push("gap_fraction", Some(d), ties.fractions[i], None, p.samples, Some(seed), Check::Info);
        ctx.push("gap_halving_ratio", Some(d), ties.halving_ratios()[i], None, ties.below[i], Some(seed), Check::Info);
    }
    ctx.push("gap_monotone", None, flag(ties.monotone()), None, p.samples, Some(seed), Check::Flag(ties.monotone(), Some(1.0), Some(0.0)));
    // no atom at 0: shrinking the window strictly shrinks the count
    let mut order: Vec<usize> = (0..gaps.len()).collect();
    order.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]));
    for pair in order.windows(2) {
        let (big, small) = (pair[0], pair[1]);
        let ratio = if ties.below[big] == 0 { f64::NAN } else { ties.below[small] as f64 / ties.below[big] as f64 };
        ctx.push("gap_shrink_ratio", Some(p.gap_deltas[small]), ratio, None, ties.below[big], Some(seed), Check::Flag(ratio < 1.0, Some(1.0), None));
    }

    let deltas: Vec<f64> = p.delta_ladder.iter().map(|d| d * s).collect();
    let seed = ctx.seed("excess");
    let excess = excess_conditional(j, p.excess_eps * s, &deltas, grid, p.samples, w, seed)?;
    for (row, &d) in excess.iter().zip(&p.delta_ladder) {
        ctx.mc("excess_conditional", Some(d), &row.estimate, Check::Flag(!row.low_sample_count, None, None));
    }
    let mut by_delta: Vec<_> = excess.iter().collect();
    by_delta.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let strictly = by_delta.windows(2).all(|w| w[1].estimate.mean < w[0].estimate.mean);
    ctx.push("excess_strictly_decreasing", None, flag(strictly), None, p.samples, Some(seed), Check::Flag(strictly, Some(1.0), Some(0.0)));

    let ladder: Vec<f64> = p.eps_ladder.iter().chain(&p.eps_fine).copied().collect();
    let eps: Vec<f64> = ladder.iter().map(|e| e * s).collect();
    let seed = ctx.seed("witness");
    let wit = double_max_witness(j, &eps, p.witness_delta * s, grid, p.samples, w, seed, p.scatter_points)?;
    for (i, (row, &e)) in wit.rows.iter().zip(&ladder).enumerate() {
        let label = if i < p.eps_ladder.len() { "both_excess" } else { "both_excess_fine" };
        ctx.mc(label, Some(e), &row.estimate, Check::Flag(!row.low_sample_count, None, None));
    }
    ctx.mc("both_excess_unconditioned", None, &wit.baseline, Check::Info);
    let mut coarse: Vec<_> = wit.rows[..p.eps_ladder.len()].iter().collect();
    coarse.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let inc = coarse.windows(2).all(|w| w[1].estimate.mean > w[0].estimate.mean);
    ctx.push("both_excess_increasing", None, flag(inc), None, p.samples, Some(seed), Check::Flag(inc, Some(1.0), Some(0.0)));
    let smallest = wit.rows.iter().min_by(|a, b| a.eps.total_cmp(&b.eps)).expect("nonempty ladder");
    let above = smallest.estimate.mean > wit.baseline.mean;
    ctx.push("conditioned_above_baseline", None, smallest.estimate.mean - wit.baseline.mean, None, p.samples, Some(seed), Check::Flag(above, Some(0.0), None));
    ctx.mc(
        "witness_regression",
        Some(smallest.eps / s),
        &smallest.estimate,
        Check::Flag(smallest.estimate.mean > p.witness_floor, Some(p.witness_floor), None),
    );
    ctx.push("separation_violations", None, wit.separation_violations as f64, None, p.samples, Some(seed), Check::Abs(0.0, 0.0));
    ctx.table("witness", |buf| wit.write_csv(buf))?;
    ctx.table("scatter", |buf| wit.write_scatter_csv(buf))
}
