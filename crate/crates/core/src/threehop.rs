//! Three-hop parallel relay networks: source → N relays → M relays →
//! destination, all with unit-variance local noise.
//!
//! Fixing the first-stage gains collapses the network to a two-hop network
//! whose relay noise is correlated (`K = H D1 D1^H H^H + I`), which the
//! two-hop optimum solves exactly. Swapping transmitter and receiver (the
//! reciprocal network) does the same for the other stage. [`optimize`]
//! alternates the two half-steps.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::channel::{sample_cn01_vector, RngStream};
use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{principal_eigenpair, Cholesky, ComplexMatrix, ComplexVector, Hadamard};
use crate::twohop::TwoHopNetwork;

/// Relative tolerance on the stage power constraints.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

/// Default relative SNR improvement per cycle below which [`optimize`] stops.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default cap on forward+reciprocal cycles.
pub const DEFAULT_MAX_CYCLES: usize = 500;

/// Slack allowed when checking that a trace never loses SNR.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// `(P0, f, P1, H, P2, g)`: `f` is N×1, `H` is M×N, `g` is M×1.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeHopNetwork {
    p0: f64,
    f: ComplexVector,
    p1: f64,
    h: ComplexMatrix,
    p2: f64,
    g: ComplexVector,
}

/// First- and second-stage relay gains.
#[derive(Debug, Clone, PartialEq)]
pub struct StageGains {
    pub d1: ComplexVector,
    pub d2: ComplexVector,
}

impl StageGains {
    /// Each stage rotated to its own canonical phase; the SNR is unchanged.
    pub fn canonical(&self) -> Self {
        Self {
            d1: self.d1.canonical_phase(),
            d2: self.d2.canonical_phase(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reciprocal,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Reciprocal => "reciprocal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub iteration: usize,
    pub snr: f64,
    pub direction: Direction,
}

/// Per-half-step SNR history of [`optimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub iterations: Vec<TraceStep>,
    pub converged: bool,
    /// Final gains in the forward network, per-stage canonical phase.
    pub final_gains: StageGains,
    pub final_snr: f64,
}

impl OptimizationTrace {
    /// Number of forward+reciprocal cycles performed.
    pub fn cycles(&self) -> usize {
        self.iterations.len().saturating_sub(1) / 2
    }

    pub fn is_monotone(&self) -> bool {
        self.iterations
            .windows(2)
            .all(|w| w[1].snr >= w[0].snr - MONOTONE_SLACK * w[0].snr.abs().max(1.0))
    }

    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations.len(),
            })
        }
    }
}

fn relative_residual(used: f64, budget: f64) -> f64 {
    (used - budget).abs() / budget
}

impl ThreeHopNetwork {
    pub fn new(
        p0: f64,
        f: ComplexVector,
        p1: f64,
        h: ComplexMatrix,
        p2: f64,
        g: ComplexVector,
    ) -> Result<Self> {
        for (name, p) in [("P0", p0), ("P1", p1), ("P2", p2)] {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {p}")));
            }
        }
        if h.cols() != f.dim() {
            return Err(dim_mismatch(format!("H with {} columns", f.dim()), h.cols()));
        }
        if h.rows() != g.dim() {
            return Err(dim_mismatch(format!("H with {} rows", g.dim()), h.rows()));
        }
        Ok(Self { p0, f, p1, h, p2, g })
    }

    pub fn first_stage_len(&self) -> usize {
        self.f.dim()
    }

    pub fn second_stage_len(&self) -> usize {
        self.g.dim()
    }

    pub fn powers(&self) -> (f64, f64, f64) {
        (self.p0, self.p1, self.p2)
    }

    pub fn f(&self) -> &ComplexVector {
        &self.f
    }

    pub fn h(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn g(&self) -> &ComplexVector {
        &self.g
    }

    pub fn with_powers(&self, p0: f64, p1: f64, p2: f64) -> Result<Self> {
        Self::new(p0, self.f.clone(), p1, self.h.clone(), p2, self.g.clone())
    }

    fn check_gains(&self, gains: &StageGains) -> Result<()> {
        if gains.d1.dim() != self.first_stage_len() {
            return Err(dim_mismatch(self.first_stage_len(), gains.d1.dim()));
        }
        if gains.d2.dim() != self.second_stage_len() {
            return Err(dim_mismatch(self.second_stage_len(), gains.d2.dim()));
        }
        Ok(())
    }

    fn stage1_rx_power(&self) -> Vec<f64> {
        self.f.iter().map(|fi| fi.norm_sqr() * self.p0 + 1.0).collect()
    }

    /// `Tr(D1 D1^H (f f^H P0 + I))`.
    pub fn stage1_power_used(&self, d1: &ComplexVector) -> Result<f64> {
        if d1.dim() != self.first_stage_len() {
            return Err(dim_mismatch(self.first_stage_len(), d1.dim()));
        }
        Ok(d1.iter().zip(self.stage1_rx_power()).map(|(z, w)| z.norm_sqr() * w).sum())
    }

    /// `Tr(D2 D2^H (H D1 f f^H D1^H H^H P0 + H D1 D1^H H^H + I))`.
    pub fn stage2_power_used(&self, d1: &ComplexVector, d2: &ComplexVector) -> Result<f64> {
        let reduced = self.reduce_to_twohop_unchecked(d1)?;
        reduced.relay_power_used(d2)
    }

    pub fn normalize_stage1(&self, d1: &ComplexVector) -> Result<ComplexVector> {
        let used = self.stage1_power_used(d1)?;
        if !(used > 0.0) || !used.is_finite() {
            return Err(Error::ZeroGain);
        }
        Ok(d1.scale((self.p1 / used).sqrt()))
    }

    /// Scales `d2` onto the second-stage constraint, which depends on `d1`.
    pub fn normalize_stage2(&self, d1: &ComplexVector, d2: &ComplexVector) -> Result<ComplexVector> {
        self.reduce_to_twohop_unchecked(d1)?.normalize_power(d2)
    }

    /// Destination SNR
    /// `|g^T D2 H D1 f|^2 P0 / (||g^T D2 H D1||^2 + ||g^T D2||^2 + 1)`.
    pub fn snr3(&self, gains: &StageGains) -> Result<f64> {
        self.check_gains(gains)?;
        // Row vector r = g^T D2 H D1 (length N).
        let gd2 = self.g.hadamard(&gains.d2)?;
        let n = self.first_stage_len();
        let m = self.second_stage_len();
        let r = ComplexVector::new(
            (0..n)
                .map(|j| {
                    let s: Complex64 = (0..m).map(|i| gd2[i] * self.h[(i, j)]).sum();
                    s * gains.d1[j]
                })
                .collect(),
        );
        let signal = r.dot_t(&self.f)?.norm_sqr() * self.p0;
        let noise = r.norm_sqr() + gd2.norm_sqr() + 1.0;
        Ok(signal / noise)
    }

    /// The two-hop network seen by the second stage once `d1` is fixed:
    /// `(P0, H D1 f, P2, g, H D1 D1^H H^H + I)`.
    pub fn reduce_to_twohop(&self, d1: &ComplexVector) -> Result<TwoHopNetwork> {
        let used = self.stage1_power_used(d1)?;
        let residual = relative_residual(used, self.p1);
        if residual > FEASIBILITY_RTOL {
            return Err(Error::InfeasibleGain { residual });
        }
        self.reduce_to_twohop_unchecked(d1)
    }

    /// [`reduce_to_twohop`](Self::reduce_to_twohop) without the stage-1
    /// feasibility check.
    pub fn reduce_to_twohop_unchecked(&self, d1: &ComplexVector) -> Result<TwoHopNetwork> {
        if d1.dim() != self.first_stage_len() {
            return Err(dim_mismatch(self.first_stage_len(), d1.dim()));
        }
        let m = self.second_stage_len();
        // C = H D1
        let mut c = self.h.clone();
        for i in 0..m {
            for j in 0..self.first_stage_len() {
                c[(i, j)] *= d1[j];
            }
        }
        let f_new = c.mul_vec(&self.f)?;
        let k = c.matmul(&c.adjoint())?.add(&ComplexMatrix::identity(m))?;
        TwoHopNetwork::new(self.p0, f_new, self.p2, self.g.clone(), k)
    }

    /// The network with transmitter and receiver swapped,
    /// `(P2, g, P1, H^T, P0, f)`, together with the gains `(κ2 d2, κ1 d1)`
    /// rescaled onto its power constraints.
    pub fn reciprocal(&self, gains: &StageGains) -> Result<(ThreeHopNetwork, StageGains)> {
        self.check_gains(gains)?;
        let rev = ThreeHopNetwork::new(
            self.p2,
            self.g.clone(),
            self.p1,
            self.h.transpose(),
            self.p0,
            self.f.clone(),
        )?;
        let d1 = rev.normalize_stage1(&gains.d2)?;
        let d2 = rev.normalize_stage2(&d1, &gains.d1)?;
        Ok((rev, StageGains { d1, d2 }))
    }

    /// Co-phased, equal-power first-stage gains `d1_i ∝ exp(-j arg f_i)`.
    pub fn default_d1(&self) -> ComplexVector {
        let n = self.first_stage_len();
        let share = self.p1 / n as f64;
        ComplexVector::new(
            self.stage1_rx_power()
                .iter()
                .zip(self.f.iter())
                .map(|(w, fi)| Complex64::from_polar((share / w).sqrt(), -fi.arg()))
                .collect(),
        )
    }

    /// Optimal second-stage gain for fixed (feasible) `d1`.
    fn best_d2(&self, d1: &ComplexVector) -> Result<(ComplexVector, f64)> {
        let reduced = self.reduce_to_twohop_unchecked(d1)?;
        let eval = reduced.optimal_gain_s11()?;
        Ok((eval.gain, eval.snr))
    }
}

/// Alternating optimization: optimize `d2` for fixed `d1` on the reduced
/// two-hop network, flip to the reciprocal network, repeat.
///
/// One iteration is one half-step. Convergence is declared when a full
/// forward+reciprocal cycle improves the SNR by less than `tol` (relative).
/// Hitting `max_cycles` returns the trace with `converged = false`.
pub fn optimize(
    net: &ThreeHopNetwork,
    d1_init: Option<&ComplexVector>,
    tol: f64,
    max_cycles: usize,
) -> Result<OptimizationTrace> {
    let init = d1_init.cloned().unwrap_or_else(|| net.default_d1());
    let d1 = net.normalize_stage1(&init)?;
    let (d2, snr0) = net.best_d2(&d1)?;

    let mut steps = vec![TraceStep {
        iteration: 0,
        snr: snr0,
        direction: Direction::Forward,
    }];
    let mut current = net.clone();
    let mut gains = StageGains { d1, d2 };
    let mut direction = Direction::Forward;
    let mut cycle_start = snr0;
    let mut converged = false;

    'outer: for _ in 0..max_cycles {
        for _ in 0..2 {
            let (rev, rev_gains) = current.reciprocal(&gains)?;
            let (d2, snr) = rev.best_d2(&rev_gains.d1)?;
            current = rev;
            gains = StageGains { d1: rev_gains.d1, d2 };
            direction = match direction {
                Direction::Forward => Direction::Reciprocal,
                Direction::Reciprocal => Direction::Forward,
            };
            steps.push(TraceStep {
                iteration: steps.len(),
                snr,
                direction,
            });
        }
        let snr = steps.last().map(|s| s.snr).unwrap_or(snr0);
        let improvement = (snr - cycle_start) / cycle_start.abs().max(f64::MIN_POSITIVE);
        cycle_start = snr;
        if improvement < tol {
            converged = true;
            break 'outer;
        }
    }
    debug_assert_eq!(direction, Direction::Forward);

    let final_gains = gains.canonical();
    let final_snr = net.snr3(&final_gains)?;
    Ok(OptimizationTrace {
        iterations: steps,
        converged,
        final_gains,
        final_snr,
    })
}

/// Start vectors for multi-start optimization: the co-phased default followed
/// by `starts - 1` CN(0, I) draws from `(seed, k)` substreams.
pub fn default_starts(net: &ThreeHopNetwork, starts: usize, seed: u64) -> Vec<ComplexVector> {
    let mut out = Vec::with_capacity(starts);
    if starts > 0 {
        out.push(net.default_d1());
    }
    for k in 1..starts {
        let mut rng = RngStream::new(seed, k as u64);
        out.push(sample_cn01_vector(net.first_stage_len(), &mut rng));
    }
    out
}

/// Runs [`optimize`] from each start; returns the traces and the index of the
/// best final SNR.
pub fn multistart(
    net: &ThreeHopNetwork,
    starts: &[ComplexVector],
    tol: f64,
    max_cycles: usize,
) -> Result<(Vec<OptimizationTrace>, usize)> {
    let traces = starts
        .iter()
        .map(|s| optimize(net, Some(s), tol, max_cycles))
        .collect::<Result<Vec<_>>>()?;
    let best = traces
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.final_snr.total_cmp(&b.1.final_snr))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidArgument("at least one start is required".into()))?;
    Ok((traces, best))
}

// ---------------------------------------------------------------------------
// High-power limits
// ---------------------------------------------------------------------------

/// Which stage powers are driven large.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LimitProperty {
    /// `P2 → ∞`: two-hop network with a multi-antenna destination.
    P2Large,
    /// `P0 → ∞`: the mirror image of `P2Large` under reciprocity.
    P0Large,
    /// `P0, P2 → ∞`: rank-one MIMO beamforming, `P1 λ_max(H^H H)`.
    P0P2Large,
    /// `P1, P2 → ∞`: SIMO channel, `P0 ||f||^2`.
    P1P2Large,
    /// `P0, P1 → ∞`: MISO channel, `P2 ||g||^2`.
    P0P1Large,
}

impl LimitProperty {
    pub const ALL: [LimitProperty; 5] = [
        LimitProperty::P2Large,
        LimitProperty::P0Large,
        LimitProperty::P0P2Large,
        LimitProperty::P1P2Large,
        LimitProperty::P0P1Large,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LimitProperty::P2Large => "p2_large",
            LimitProperty::P0Large => "p0_large",
            LimitProperty::P0P2Large => "p0_p2_large",
            LimitProperty::P1P2Large => "p1_p2_large",
            LimitProperty::P0P1Large => "p0_p1_large",
        }
    }

    fn scaled(self, net: &ThreeHopNetwork, big: f64) -> Result<ThreeHopNetwork> {
        let (p0, p1, p2) = net.powers();
        match self {
            LimitProperty::P2Large => net.with_powers(p0, p1, big),
            LimitProperty::P0Large => net.with_powers(big, p1, p2),
            LimitProperty::P0P2Large => net.with_powers(big, p1, big),
            LimitProperty::P1P2Large => net.with_powers(p0, big, big),
            LimitProperty::P0P1Large => net.with_powers(big, big, p2),
        }
    }
}

impl fmt::Display for LimitProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Limit value predicted for `property` next to the optimized SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCheck {
    pub expected: f64,
    pub achieved: f64,
}

impl LimitCheck {
    pub fn relative_error(&self) -> f64 {
        (self.achieved - self.expected).abs() / self.expected.abs()
    }
}

/// Evaluates every high-power property with the large powers set to `big`.
/// `achieved` is the best of five optimizer starts.
pub fn limit_checks(net: &ThreeHopNetwork, big: f64) -> Result<BTreeMap<LimitProperty, LimitCheck>> {
    LimitProperty::ALL
        .into_iter()
        .map(|prop| Ok((prop, limit_check(net, prop, big)?)))
        .collect()
}

pub fn limit_check(net: &ThreeHopNetwork, property: LimitProperty, big: f64) -> Result<LimitCheck> {
    let scaled = property.scaled(net, big)?;
    let (p0, p1, p2) = scaled.powers();
    let expected = match property {
        LimitProperty::P1P2Large => p0 * net.f.norm_sqr(),
        LimitProperty::P0P1Large => p2 * net.g.norm_sqr(),
        LimitProperty::P0P2Large => {
            let hh = net.h.adjoint().matmul(&net.h)?;
            p1 * principal_eigenpair(&hh)?.0
        }
        LimitProperty::P2Large => multi_antenna_destination_optimum(&scaled)?,
        LimitProperty::P0Large => {
            let (rev, _) = scaled.reciprocal(&StageGains {
                d1: scaled.default_d1(),
                d2: ComplexVector::ones(scaled.second_stage_len()),
            })?;
            multi_antenna_destination_optimum(&rev)?
        }
    };
    let starts = default_starts(&scaled, 5, 0);
    let (traces, best) = multistart(&scaled, &starts, DEFAULT_TOL, DEFAULT_MAX_CYCLES)?;
    Ok(LimitCheck {
        expected,
        achieved: traces[best].final_snr,
    })
}

/// MRC SNR at an M-antenna destination fed directly by the second-stage
/// relays' observations: `P0 f_new^H K^{-1} f_new` with `f_new = H D1 f`,
/// `K = H D1 D1^H H^H + I`, `d1` rescaled onto the stage-1 constraint.
fn multi_antenna_snr(net: &ThreeHopNetwork, d1: &ComplexVector) -> Result<f64> {
    let d1 = net.normalize_stage1(d1)?;
    let reduced = net.reduce_to_twohop_unchecked(&d1)?;
    let chol = Cholesky::factor(reduced.noise_cov())?;
    Ok(net.p0 * chol.inverse_quad_form(reduced.f())?)
}

/// Random search plus finite-difference ascent of [`multi_antenna_snr`] over
/// first-stage gains.
fn multi_antenna_destination_optimum(net: &ThreeHopNetwork) -> Result<f64> {
    const SAMPLES: u64 = 400;
    const KEEP: usize = 6;
    let n = net.first_stage_len();

    let mut candidates: Vec<(f64, ComplexVector)> = Vec::new();
    candidates.push((multi_antenna_snr(net, &net.default_d1())?, net.default_d1()));
    for k in 0..SAMPLES {
        let d = sample_cn01_vector(n, &mut RngStream::new(0x5EA2C4, k));
        candidates.push((multi_antenna_snr(net, &d)?, d));
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(KEEP);

    let mut best = 0.0f64;
    for (_, start) in candidates {
        best = best.max(ascend(net, start)?);
    }
    Ok(best)
}

fn ascend(net: &ThreeHopNetwork, start: ComplexVector) -> Result<f64> {
    let n = net.first_stage_len();
    let objective = |x: &[f64]| -> Result<f64> {
        let d = ComplexVector::new((0..n).map(|i| Complex64::new(x[2 * i], x[2 * i + 1])).collect());
        if d.is_zero() {
            return Ok(0.0);
        }
        multi_antenna_snr(net, &d)
    };
    let unit = start.scale(1.0 / start.norm());
    let mut x: Vec<f64> = unit.iter().flat_map(|z| [z.re, z.im]).collect();
    let mut fx = objective(&x)?;
    let mut step = 0.1;
    for _ in 0..4000 {
        let h = 1e-7;
        let mut grad = vec![0.0; x.len()];
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            grad[k] = (objective(&xp)? - objective(&xm)?) / (2.0 * h);
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        let mut improved = false;
        while step > 1e-14 {
            let mut cand: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi + step * gi / gnorm).collect();
            let norm = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
            cand.iter_mut().for_each(|v| *v /= norm);
            let fc = objective(&cand)?;
            if fc > fx {
                x = cand;
                let gain = (fc - fx) / fx.max(f64::MIN_POSITIVE);
                fx = fc;
                step *= 1.5;
                improved = gain > 1e-13;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(fx)
}
