//! The `verify` command: a self-contained regression suite over the
//! reference three-hop example, the optimality claims, the limits and the
//! Monte Carlo orderings. Every row carries a margin that is positive when the check
//! passes (tolerance minus error, or standard errors to spare).

use crate::channel::{sample_cn01_vector, RngStream};
use crate::error::Result;
use crate::experiments::{
    self, interference_saturation, linear_to_db, verify_ordering, FixedParams, SaturationSpec, SweepSpec,
    SweepVariable,
};
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::threehop::{self, LimitProperty, StageGains, ThreeHopNetwork};
use crate::twohop::{MultiSourceTwoHopNetwork, Scheme, SourceLink};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub expected: f64,
    pub achieved: f64,
    pub margin: f64,
    pub pass: bool,
}

impl CheckRow {
    /// `|achieved - expected| <= tol`.
    fn within(name: impl Into<String>, expected: f64, achieved: f64, tol: f64) -> Self {
        let margin = tol - (achieved - expected).abs();
        Self {
            name: name.into(),
            expected,
            achieved,
            margin,
            pass: margin >= 0.0,
        }
    }

    /// `|achieved - expected| <= rtol * |expected|`, margin in relative units.
    fn within_rel(name: impl Into<String>, expected: f64, achieved: f64, rtol: f64) -> Self {
        let margin = rtol - (achieved - expected).abs() / expected.abs();
        Self {
            name: name.into(),
            expected,
            achieved,
            margin,
            pass: margin >= 0.0,
        }
    }

    /// `achieved > expected`.
    fn above(name: impl Into<String>, expected: f64, achieved: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            achieved,
            margin: achieved - expected,
            pass: achieved > expected,
        }
    }

    /// `achieved < expected`.
    fn below(name: impl Into<String>, expected: f64, achieved: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            achieved,
            margin: expected - achieved,
            pass: achieved < expected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Monte Carlo trials per sweep point.
    pub trials: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: experiments::DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

/// Initial first-stage gains of the reference three-hop example.
pub const REFERENCE_INITIALIZATIONS: [[f64; 2]; 5] = [[1.0, 0.0], [0.0, 1.0], [-2.0, 1.0], [2.0, 1.0], [-20.0, -1.0]];
pub const REFERENCE_SNR: f64 = 6.5638;
pub const REFERENCE_D1_ABS: [f64; 2] = [0.0823, 0.1633];
pub const REFERENCE_D2_ABS: [f64; 2] = [0.2533, 0.2566];

/// `f = [1, 6]`, `g = [4, -3]`, `H = [[2, -3], [4, 2]]`, unit powers.
pub fn reference_three_hop() -> ThreeHopNetwork {
    ThreeHopNetwork::new(
        1.0,
        ComplexVector::from_real(&[1.0, 6.0]),
        1.0,
        ComplexMatrix::from_real_rows(&[&[2.0, -3.0], &[4.0, 2.0]]).expect("rectangular"),
        1.0,
        ComplexVector::from_real(&[4.0, -3.0]),
    )
    .expect("valid example network")
}

/// Runs the suite, handing each row to `emit`; stops early (returning
/// `Ok(false)`) once `emit` returns false.
pub fn run_verify(opts: &VerifyOptions, mut emit: impl FnMut(CheckRow) -> bool) -> Result<bool> {
    type Group = fn(&VerifyOptions) -> Result<Vec<CheckRow>>;
    let groups: [Group; 10] = [
        three_hop_example,
        two_hop_optimality,
        multi_source_single,
        high_power_limits,
        three_hop_limits,
        reciprocity,
        closed_forms,
        scheme_ordering,
        saturation,
        relay_count_slope,
    ];
    for group in groups {
        for row in group(opts)? {
            if !emit(row) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn three_hop_example(_: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let net = reference_three_hop();
    let mut rows = Vec::new();
    let mut snrs = Vec::new();
    let mut gain_err = 0.0f64;
    for (k, init) in REFERENCE_INITIALIZATIONS.iter().enumerate() {
        let trace = threehop::optimize(
            &net,
            Some(&ComplexVector::from_real(init)),
            threehop::DEFAULT_TOL,
            threehop::DEFAULT_MAX_CYCLES,
        )?;
        rows.push(CheckRow::within(
            format!("three_hop_snr_init{k}"),
            REFERENCE_SNR,
            trace.final_snr,
            1e-3,
        ));
        snrs.push(trace.final_snr);
        let g = &trace.final_gains;
        for (d, want) in [(&g.d1, REFERENCE_D1_ABS), (&g.d2, REFERENCE_D2_ABS)] {
            for (z, p) in d.iter().zip(want) {
                gain_err = gain_err.max((z.norm() - p).abs());
            }
        }
    }
    let spread = snrs.iter().cloned().fold(f64::MIN, f64::max) - snrs.iter().cloned().fold(f64::MAX, f64::min);
    rows.push(CheckRow::within("three_hop_init_spread", 0.0, spread, 1e-4));
    rows.push(CheckRow::within("three_hop_gain_magnitudes", 0.0, gain_err, 2e-3));
    Ok(rows)
}

fn random_params(k: usize, source_power: f64, relay_power: f64) -> FixedParams {
    FixedParams {
        source_power,
        relay_power,
        interference_power: 10.0,
        num_relays: 2 + k % 3,
        num_interferers: k % 3,
    }
}

fn two_hop_optimality(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let mut worst = 0.0f64;
    for k in 0..50 {
        let mut rng = RngStream::new(opts.seed, 1_000 + k as u64);
        let net = experiments::draw_network(&random_params(k, 10.0, 10.0), &mut rng)?;
        let best = net.optimal_gain_s11()?.snr;
        for _ in 0..2_000 {
            let d = net.normalize_power(&sample_cn01_vector(net.num_relays(), &mut rng))?;
            worst = worst.max(net.snr_of_gain(&d)? / best);
        }
    }
    Ok(vec![CheckRow {
        name: "two_hop_random_gain_ratio".into(),
        expected: 1.0,
        achieved: worst,
        margin: 1.0 - worst,
        pass: worst <= 1.0 + 1e-12,
    }])
}

fn multi_source_single(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let mut worst = 0.0f64;
    for k in 0..50 {
        let mut rng = RngStream::new(opts.seed, 2_000 + k as u64);
        let net = experiments::draw_network(&random_params(k, 10.0, 10.0), &mut rng)?;
        let single = MultiSourceTwoHopNetwork::new(
            vec![SourceLink {
                channel: net.f().clone(),
                power: net.source_power(),
            }],
            net.relay_power(),
            net.g().clone(),
            net.noise_cov().clone(),
        )?;
        let a = net.optimal_gain_s11()?.snr;
        let b = single.optimal_gain()?.snr;
        worst = worst.max((a - b).abs() / a);
    }
    Ok(vec![CheckRow::within("multi_source_single_matches_optimum", 0.0, worst, 1e-10)])
}

fn high_power_limits(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let mut pr_err = [0.0f64; 4];
    let mut p_err = [0.0f64; 4];
    for k in 0..50 {
        let mut rng = RngStream::new(opts.seed, 3_000 + k as u64);
        let net = experiments::draw_network(&random_params(k, 10.0, 1e8), &mut rng)?;
        let formulas = net.high_pr_snr_formulas()?;
        let high_p = net.with_source_power(1e8)?.with_relay_power(10.0)?;
        let miso = 10.0 * net.g().norm_sqr();
        for (i, s) in Scheme::BENCHMARKS.into_iter().enumerate() {
            let snr = net.evaluate(s)?.snr;
            pr_err[i] = pr_err[i].max((snr - formulas[&s]).abs() / formulas[&s]);
            let snr = high_p.evaluate(s)?.snr;
            p_err[i] = p_err[i].max((snr - miso).abs() / miso);
        }
    }
    let mut rows = Vec::new();
    for (i, s) in Scheme::BENCHMARKS.into_iter().enumerate() {
        rows.push(CheckRow::within(format!("high_relay_power_{s}"), 0.0, pr_err[i], 1e-3));
    }
    for (i, s) in Scheme::BENCHMARKS.into_iter().enumerate() {
        rows.push(CheckRow::within(format!("high_source_power_{s}"), 0.0, p_err[i], 1e-3));
    }
    Ok(rows)
}

fn three_hop_limits(_: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let checks = threehop::limit_checks(&reference_three_hop(), 1e6)?;
    Ok(LimitProperty::ALL
        .into_iter()
        .map(|p| {
            let c = checks[&p];
            CheckRow::within_rel(format!("three_hop_limit_{p}"), c.expected, c.achieved, 5e-3)
        })
        .collect())
}

/// Random three-hop network with `N, M ∈ 1..=4`, powers in `[0.1, 100]`,
/// and feasible random gains.
pub fn random_three_hop(rng: &mut RngStream) -> Result<(ThreeHopNetwork, StageGains)> {
    let n = 1 + (rng.next_uniform() * 4.0) as usize;
    let m = 1 + (rng.next_uniform() * 4.0) as usize;
    let mut power = || 10f64.powf(3.0 * rng.next_uniform() - 1.0);
    let (p0, p1, p2) = (power(), power(), power());
    let f = sample_cn01_vector(n, rng);
    let g = sample_cn01_vector(m, rng);
    let h = ComplexMatrix::new(m, n, (0..m * n).map(|_| rng.next_cn01()).collect())?;
    let net = ThreeHopNetwork::new(p0, f, p1, h, p2, g)?;
    let d1 = net.normalize_stage1(&sample_cn01_vector(n, rng))?;
    let d2 = net.normalize_stage2(&d1, &sample_cn01_vector(m, rng))?;
    Ok((net, StageGains { d1, d2 }))
}

fn reciprocity(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let mut worst = 0.0f64;
    for k in 0..1_000u64 {
        let (net, gains) = random_three_hop(&mut RngStream::new(opts.seed, 4_000 + k))?;
        let (rev, rev_gains) = net.reciprocal(&gains)?;
        let a = net.snr3(&gains)?;
        let b = rev.snr3(&rev_gains)?;
        worst = worst.max((a - b).abs() / a);
    }
    Ok(vec![CheckRow::within("reciprocity_snr", 0.0, worst, 1e-9)])
}

fn closed_forms(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let params = FixedParams {
        source_power: 10.0,
        relay_power: 1.0,
        interference_power: 10.0,
        num_relays: 3,
        num_interferers: 1,
    };
    let k = experiments::draw_network(&params, &mut RngStream::new(opts.seed, 5_000))?
        .noise_cov()
        .clone();
    let checks = experiments::closed_form_check(&k, 10.0, 1e8, 5 * opts.trials, opts.seed ^ 0x5EED)?;
    Ok(checks
        .into_iter()
        .map(|(s, c)| CheckRow::within_rel(format!("expected_high_pr_snr_{s}"), c.expected, c.mean, 0.02))
        .collect())
}

fn scheme_ordering(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let spec = SweepSpec {
        sweep_variable: SweepVariable::RelayPower,
        grid: vec![1.0, 10.0, 100.0, 1000.0],
        fixed: FixedParams {
            source_power: 10.0,
            relay_power: 1.0,
            interference_power: 10.0,
            num_relays: 2,
            num_interferers: 1,
        },
        trials: opts.trials,
        seed: opts.seed,
        schemes: Scheme::BENCHMARKS.to_vec(),
    };
    let mut rows = Vec::new();
    for report in verify_ordering(&spec)? {
        for c in &report.checks {
            rows.push(CheckRow {
                name: format!(
                    "mean_snr_{}_ge_{}_at_{}dB",
                    c.higher,
                    c.lower,
                    linear_to_db(report.sweep_value).round()
                ),
                expected: 0.0,
                achieved: c.mean_gap,
                margin: c.margin,
                pass: c.holds_within(1.0),
            });
        }
    }
    Ok(rows)
}

fn saturation(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let base = SaturationSpec {
        num_relays: 2,
        num_interferers: 1,
        source_power: 10.0,
        relay_power: 1e6,
        interference_grid: vec![1.0, 10.0, 100.0, 1e3, 1e4],
        trials: opts.trials,
        seed: opts.seed,
    };
    let high = interference_saturation(&base)?;
    let moderate = interference_saturation(&SaturationSpec {
        relay_power: 100.0,
        ..base.clone()
    })?;
    let full = interference_saturation(&SaturationSpec {
        relay_power: 100.0,
        num_interferers: 3,
        interference_grid: vec![1e6],
        ..base
    })?;
    Ok(vec![
        CheckRow::above("interference_floor_r11", high.floor_bits, high.r11_top),
        CheckRow::below("interference_collapse_r00", 0.25 * high.r00_reference, high.r00_top),
        CheckRow::above("interference_plateau_r11_pr100", 0.0, moderate.r11_top),
        CheckRow::below("interference_collapse_r00_pr100", 0.25 * moderate.r00_reference, moderate.r00_top),
        CheckRow::below("unnullable_interference_r11", 0.1, full.r11_top),
    ])
}

fn relay_count_slope(opts: &VerifyOptions) -> Result<Vec<CheckRow>> {
    let sweep = experiments::run_sweep(&SweepSpec {
        sweep_variable: SweepVariable::NumRelays,
        grid: vec![2.0, 3.0, 4.0, 10.0, 11.0, 12.0],
        fixed: FixedParams {
            source_power: 10.0,
            relay_power: 100.0,
            interference_power: 200.0,
            num_relays: 2,
            num_interferers: 9,
        },
        trials: opts.trials,
        seed: opts.seed,
        schemes: vec![Scheme::S11],
    })?;
    let r = sweep.rate_curve(Scheme::S11);
    let small = (r[2] - r[0]) / 2.0;
    let large = (r[5] - r[3]) / 2.0;
    Ok(vec![CheckRow::above("relay_count_slope_r11", small, large)])
}
