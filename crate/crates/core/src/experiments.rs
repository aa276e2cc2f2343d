//! Monte Carlo sweeps over random two-hop networks with common interference.
//!
//! Every trial owns the substream `(seed, trial)` of the sweep seed, so the
//! same trial index sees the same channel draws at every grid point (common
//! random numbers) and results do not depend on how rayon schedules work.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    iid_equivalent_covariance, interference_covariance, sample_cn01_vector, InterferenceEnv, RngStream,
};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::twohop::{rate_bits, Scheme, TwoHopNetwork};

/// Default trials per sweep point.
pub const DEFAULT_TRIALS: usize = 20_000;

/// A failed trial is redrawn at most this many times before the sweep aborts.
const MAX_ATTEMPTS: u64 = 16;

/// Every `SPOT_CHECK_EVERY`-th trial verifies each gain meets the relay
/// power constraint.
const SPOT_CHECK_EVERY: usize = 100;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    RelayPower,
    SourcePower,
    InterferencePower,
    NumRelays,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::RelayPower => "relay_power",
            SweepVariable::SourcePower => "source_power",
            SweepVariable::InterferencePower => "interference_power",
            SweepVariable::NumRelays => "num_relays",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepVariable::RelayPower,
            SweepVariable::SourcePower,
            SweepVariable::InterferencePower,
            SweepVariable::NumRelays,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown sweep variable '{s}'")))
    }
}

/// Parameters held fixed across a sweep (linear powers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedParams {
    /// `P`
    pub source_power: f64,
    /// `P_R`
    pub relay_power: f64,
    /// `P_I`, split equally among the interferers.
    pub interference_power: f64,
    /// `N`
    pub num_relays: usize,
    /// `Q`
    pub num_interferers: usize,
}

impl FixedParams {
    fn validate(&self) -> Result<()> {
        for (name, p) in [("P", self.source_power), ("P_R", self.relay_power)] {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {p}")));
            }
        }
        if !(self.interference_power >= 0.0) || !self.interference_power.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "P_I must be nonnegative, got {}",
                self.interference_power
            )));
        }
        if self.num_relays == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        Ok(())
    }

    fn with(&self, variable: SweepVariable, value: f64) -> Result<Self> {
        let mut p = *self;
        match variable {
            SweepVariable::RelayPower => p.relay_power = value,
            SweepVariable::SourcePower => p.source_power = value,
            SweepVariable::InterferencePower => p.interference_power = value,
            SweepVariable::NumRelays => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "num_relays grid values must be positive integers, got {value}"
                    )));
                }
                p.num_relays = value as usize;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub sweep_variable: SweepVariable,
    /// Linear values, strictly increasing.
    pub grid: Vec<f64>,
    pub fixed: FixedParams,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sweep grid must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidArgument("no schemes requested".into()));
        }
        for &v in &self.grid {
            self.fixed.with(self.sweep_variable, v)?;
        }
        Ok(())
    }
}

/// Aggregated statistics for one (sweep value, scheme) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeStats {
    pub scheme: Scheme,
    pub trials: usize,
    pub mean_snr: f64,
    pub stderr_snr: f64,
    pub mean_rate_bits: f64,
    pub stderr_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sweep_value: f64,
    /// Trials redrawn after a numerical failure.
    pub redrawn: usize,
    pub stats: Vec<SchemeStats>,
}

impl SweepPoint {
    pub fn get(&self, scheme: Scheme) -> Option<&SchemeStats> {
        self.stats.iter().find(|s| s.scheme == scheme)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sweep_variable: SweepVariable,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Mean rates of `scheme` along the grid.
    pub fn rate_curve(&self, scheme: Scheme) -> Vec<f64> {
        self.points
            .iter()
            .filter_map(|p| p.get(scheme).map(|s| s.mean_rate_bits))
            .collect()
    }
}

/// `mean` and `sample std / sqrt(n)` accumulated in slice order.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn stream_id(trial: usize, attempt: u64) -> u64 {
    (attempt << 40) | trial as u64
}

/// Draws `f, g ~ CN(0, I_N)` and `Q` interferers, in that order.
pub fn draw_network(params: &FixedParams, rng: &mut RngStream) -> Result<TwoHopNetwork> {
    let n = params.num_relays;
    let f = sample_cn01_vector(n, rng);
    let g = sample_cn01_vector(n, rng);
    let env = InterferenceEnv::sample(n, params.num_interferers, params.interference_power, rng);
    let k = interference_covariance(&env, n, 1.0)?;
    TwoHopNetwork::new(params.source_power, f, params.relay_power, g, k)
}

fn evaluate_trial(net: &TwoHopNetwork, schemes: &[Scheme], spot_check: bool) -> Result<Vec<f64>> {
    schemes
        .iter()
        .map(|&s| {
            let eval = net.evaluate(s)?;
            if !eval.snr.is_finite() {
                return Err(Error::InvalidArgument(format!("{s} produced a non-finite SNR")));
            }
            if spot_check {
                // SIID is designed for, and constrained on, the trace-matched
                // i.i.d. network.
                let used = match s {
                    Scheme::Siid => net
                        .with_noise_cov(iid_equivalent_covariance(net.noise_cov()))?
                        .relay_power_used(&eval.gain)?,
                    _ => net.relay_power_used(&eval.gain)?,
                };
                let residual = (used - net.relay_power()).abs() / net.relay_power();
                if residual > 1e-9 {
                    return Err(Error::InfeasibleGain { residual });
                }
            }
            Ok(eval.snr)
        })
        .collect()
}

/// One trial: SNR per scheme and the number of redraws it took. Constraint
/// violations are bugs, not bad luck, and are not redrawn.
fn run_trial(params: &FixedParams, schemes: &[Scheme], seed: u64, trial: usize) -> Result<(Vec<f64>, usize)> {
    let spot_check = trial % SPOT_CHECK_EVERY == 0;
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = RngStream::new(seed, stream_id(trial, attempt));
        let outcome = draw_network(params, &mut rng).and_then(|net| evaluate_trial(&net, schemes, spot_check));
        match outcome {
            Ok(snrs) => return Ok((snrs, attempt as usize)),
            Err(e @ Error::InfeasibleGain { .. }) => return Err(e),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(Error::NoConvergence {
        iterations: MAX_ATTEMPTS as usize,
    }))
}

/// Per-trial SNRs at one parameter point, indexed `[scheme][trial]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSamples {
    pub schemes: Vec<Scheme>,
    pub snr: Vec<Vec<f64>>,
    pub redrawn: usize,
}

impl PointSamples {
    pub fn snr_of(&self, scheme: Scheme) -> Option<&[f64]> {
        self.schemes
            .iter()
            .position(|&s| s == scheme)
            .map(|i| self.snr[i].as_slice())
    }

    fn stats(&self) -> Vec<SchemeStats> {
        self.schemes
            .iter()
            .zip(&self.snr)
            .map(|(&scheme, snrs)| {
                let rates: Vec<f64> = snrs.iter().map(|&s| rate_bits(s)).collect();
                let (mean_snr, stderr_snr) = mean_stderr(snrs);
                let (mean_rate_bits, stderr_rate) = mean_stderr(&rates);
                SchemeStats {
                    scheme,
                    trials: snrs.len(),
                    mean_snr,
                    stderr_snr,
                    mean_rate_bits,
                    stderr_rate,
                }
            })
            .collect()
    }
}

/// Runs `trials` independent trials in parallel and gathers them in trial
/// order. Fails when more than 0.1% of the trials had to be redrawn.
pub fn simulate_point(params: &FixedParams, schemes: &[Scheme], trials: usize, seed: u64) -> Result<PointSamples> {
    params.validate()?;
    let outcomes: Vec<Result<(Vec<f64>, usize)>> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(params, schemes, seed, t))
        .collect();

    let mut snr = vec![Vec::with_capacity(trials); schemes.len()];
    let mut redrawn = 0;
    for outcome in outcomes {
        let (values, attempts) = outcome?;
        redrawn += attempts.min(1);
        for (column, v) in snr.iter_mut().zip(values) {
            column.push(v);
        }
    }
    Ok(PointSamples {
        schemes: schemes.to_vec(),
        snr,
        redrawn,
    })
}

fn check_redraws(sweep_value: f64, samples: &PointSamples, trials: usize) -> Result<()> {
    if samples.redrawn * 1000 > trials {
        return Err(Error::TooManyRedraws {
            sweep_value,
            redrawn: samples.redrawn,
            trials,
        });
    }
    Ok(())
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, |_| true)
}

/// [`run_sweep`], handing each finished point to `on_point` as it completes.
/// Returning false from `on_point` ends the sweep early; the result then
/// holds only the points finished so far.
pub fn run_sweep_with(spec: &SweepSpec, mut on_point: impl FnMut(&SweepPoint) -> bool) -> Result<SweepResult> {
    spec.validate()?;
    let mut points = Vec::with_capacity(spec.grid.len());
    for &value in &spec.grid {
        let params = spec.fixed.with(spec.sweep_variable, value)?;
        let samples = simulate_point(&params, &spec.schemes, spec.trials, spec.seed)?;
        check_redraws(value, &samples, spec.trials)?;
        let point = SweepPoint {
            sweep_value: value,
            redrawn: samples.redrawn,
            stats: samples.stats(),
        };
        let keep_going = on_point(&point);
        points.push(point);
        if !keep_going {
            break;
        }
    }
    Ok(SweepResult {
        sweep_variable: spec.sweep_variable,
        points,
    })
}

// ---------------------------------------------------------------------------
// Scheme ordering
// ---------------------------------------------------------------------------

/// `E[SNR_higher] ≥ E[SNR_lower]` on shared trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingCheck {
    pub higher: Scheme,
    pub lower: Scheme,
    pub mean_gap: f64,
    /// Standard error of the per-trial difference.
    pub paired_stderr: f64,
    /// `sqrt(se_higher^2 + se_lower^2)`, ignoring the pairing.
    pub pooled_stderr: f64,
    /// `mean_gap / paired_stderr`.
    pub margin: f64,
}

impl OrderingCheck {
    fn new(higher: Scheme, lower: Scheme, a: &[f64], b: &[f64]) -> Self {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let (mean_gap, paired_stderr) = mean_stderr(&diff);
        let (_, se_a) = mean_stderr(a);
        let (_, se_b) = mean_stderr(b);
        let margin = if paired_stderr > 0.0 {
            mean_gap / paired_stderr
        } else if mean_gap == 0.0 {
            0.0
        } else {
            mean_gap.signum() * f64::INFINITY
        };
        Self {
            higher,
            lower,
            mean_gap,
            paired_stderr,
            pooled_stderr: se_a.hypot(se_b),
            margin,
        }
    }

    /// The inequality is not contradicted by more than `k` standard errors.
    pub fn holds_within(&self, k: f64) -> bool {
        self.margin >= -k
    }

    /// The inequality holds with at least `k` standard errors to spare.
    pub fn significant(&self, k: f64) -> bool {
        self.margin > k
    }

    /// The two means differ by at most `k` pooled standard errors.
    pub fn indistinguishable(&self, k: f64) -> bool {
        self.mean_gap.abs() <= k * self.pooled_stderr + 1e-12 * self.mean_gap.abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    pub sweep_value: f64,
    /// S11 ≥ S10, S10 ≥ S00, S00 ≥ SIID.
    pub checks: Vec<OrderingCheck>,
    pub means: BTreeMap<Scheme, f64>,
}

/// Evaluates the chain S11 ≥ S10 ≥ S00 ≥ SIID on mean SNR at every grid
/// point of `spec` (its scheme list is ignored).
pub fn verify_ordering(spec: &SweepSpec) -> Result<Vec<OrderingReport>> {
    let spec = SweepSpec {
        schemes: Scheme::BENCHMARKS.to_vec(),
        ..spec.clone()
    };
    spec.validate()?;
    spec.grid
        .iter()
        .map(|&value| {
            let params = spec.fixed.with(spec.sweep_variable, value)?;
            let samples = simulate_point(&params, &spec.schemes, spec.trials, spec.seed)?;
            check_redraws(value, &samples, spec.trials)?;
            let col = |s: Scheme| samples.snr_of(s).expect("benchmark scheme simulated");
            let checks = Scheme::BENCHMARKS
                .windows(2)
                .map(|w| OrderingCheck::new(w[0], w[1], col(w[0]), col(w[1])))
                .collect();
            let means = Scheme::BENCHMARKS
                .iter()
                .map(|&s| (s, mean_stderr(col(s)).0))
                .collect();
            Ok(OrderingReport {
                sweep_value: value,
                checks,
                means,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Interference saturation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationSpec {
    pub num_relays: usize,
    pub num_interferers: usize,
    pub source_power: f64,
    pub relay_power: f64,
    /// Total interference powers, strictly increasing.
    pub interference_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    pub sweep: SweepResult,
    /// `log2(1 + (N-1) P / 2)`.
    pub floor_bits: f64,
    /// Mean S11 rate at the largest interference power.
    pub r11_top: f64,
    /// Mean S00 rate at the reference point (`P_I = 1`, else the first).
    pub r00_reference: f64,
    pub r00_top: f64,
    /// `r11_top > floor_bits`.
    pub plateau_holds: bool,
    /// `r00_top < 0.25 r00_reference`.
    pub collapse_holds: bool,
}

/// Sweeps the interference power with S11 and S00 and compares the strong
/// interference end against the `(N-1)` interference-free dimensions left
/// after nulling one interferer.
pub fn interference_saturation(spec: &SaturationSpec) -> Result<SaturationReport> {
    if spec.num_relays < 2 {
        return Err(Error::InvalidArgument("interference saturation needs N >= 2".into()));
    }
    let sweep = run_sweep(&SweepSpec {
        sweep_variable: SweepVariable::InterferencePower,
        grid: spec.interference_grid.clone(),
        fixed: FixedParams {
            source_power: spec.source_power,
            relay_power: spec.relay_power,
            interference_power: 0.0,
            num_relays: spec.num_relays,
            num_interferers: spec.num_interferers,
        },
        trials: spec.trials,
        seed: spec.seed,
        schemes: vec![Scheme::S11, Scheme::S00],
    })?;
    let r11 = sweep.rate_curve(Scheme::S11);
    let r00 = sweep.rate_curve(Scheme::S00);
    let reference = spec
        .interference_grid
        .iter()
        .position(|&p| (p - 1.0).abs() < 1e-12)
        .unwrap_or(0);
    let floor_bits = rate_bits((spec.num_relays - 1) as f64 * spec.source_power * 0.5);
    let r11_top = *r11.last().expect("grid is nonempty");
    let r00_top = *r00.last().expect("grid is nonempty");
    let r00_reference = r00[reference];
    Ok(SaturationReport {
        floor_bits,
        r11_top,
        r00_reference,
        r00_top,
        plateau_holds: r11_top > floor_bits,
        collapse_holds: r00_top < 0.25 * r00_reference,
        sweep,
    })
}

// ---------------------------------------------------------------------------
// High-P_R closed forms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCheck {
    pub expected: f64,
    pub mean: f64,
    pub stderr: f64,
}

impl ClosedFormCheck {
    pub fn relative_error(&self) -> f64 {
        (self.mean - self.expected).abs() / self.expected.abs()
    }
}

/// Monte Carlo mean SNR of S11, S00 and SIID over `f ~ CN(0, I)` for a fixed
/// covariance `k` and a large `relay_power`, next to the expected closed forms.
pub fn closed_form_check(
    k: &ComplexMatrix,
    source_power: f64,
    relay_power: f64,
    trials: usize,
    seed: u64,
) -> Result<BTreeMap<Scheme, ClosedFormCheck>> {
    let expected = crate::twohop::expected_high_pr_snr(k, source_power)?;
    let n = k.rows();
    let schemes: Vec<Scheme> = expected.keys().copied().collect();
    let rows: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(seed, t as u64);
            let f = sample_cn01_vector(n, &mut rng);
            let net = TwoHopNetwork::new(source_power, f, relay_power, ComplexVector::ones(n), k.clone())?;
            schemes.iter().map(|&s| Ok(net.evaluate(s)?.snr)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(schemes
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let column: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let (mean, stderr) = mean_stderr(&column);
            (
                s,
                ClosedFormCheck {
                    expected: expected[&s],
                    mean,
                    stderr,
                },
            )
        })
        .collect())
}
