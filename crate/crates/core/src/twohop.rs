//! Two-hop parallel amplify-and-forward relay networks with correlated relay
//! noise.
//!
//! A source with power `P` reaches `N` relays over channel `f`; relay noise
//! has covariance `K`. Each relay scales its observation by `d_i` and the
//! relays jointly forward to a single-antenna destination over `g` with a sum
//! power budget `P_R`. Destination noise has unit variance.
//!
//! Gain vectors follow the convention of the received-signal model
//! `y = d^T G f x + d^T G n_R + n_D` with `G = diag(g)`, so
//!
//! ```text
//! SNR(d) = |d^T G f|^2 P / (d^T G K G^H conj(d) + 1)
//! ```
//!
//! subject to `d^H [(f f^H P + K) ⊙ I] d = P_R`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::iid_equivalent_covariance;
use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{principal_eigenpair, Cholesky, ComplexMatrix, ComplexVector, Hadamard};

/// `log2(1 + snr)`.
pub fn rate_bits(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Relay strategies compared throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Correlated noise, relays know `K` (the optimum).
    #[serde(rename = "S11")]
    S11,
    /// Correlated noise, relays design for `K ⊙ I`.
    #[serde(rename = "S10")]
    S10,
    /// Uncorrelated noise `K ⊙ I`.
    #[serde(rename = "S00")]
    S00,
    /// I.i.d. noise with the same trace.
    #[serde(rename = "SIID")]
    Siid,
    /// Phase-only co-phasing from local channel knowledge.
    #[serde(rename = "LOCAL_CSI")]
    LocalCsi,
    /// Fixed gains independent of the channels.
    #[serde(rename = "NO_CSI")]
    NoCsi,
}

impl Scheme {
    /// The four schemes ordered by the average-SNR chain.
    pub const BENCHMARKS: [Scheme; 4] = [Scheme::S11, Scheme::S10, Scheme::S00, Scheme::Siid];

    pub const ALL: [Scheme; 6] = [
        Scheme::S11,
        Scheme::S10,
        Scheme::S00,
        Scheme::Siid,
        Scheme::LocalCsi,
        Scheme::NoCsi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::S11 => "S11",
            Scheme::S10 => "S10",
            Scheme::S00 => "S00",
            Scheme::Siid => "SIID",
            Scheme::LocalCsi => "LOCAL_CSI",
            Scheme::NoCsi => "NO_CSI",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme '{s}'")))
    }
}

/// Gain, SNR and rate of one scheme on one network.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeEval {
    pub scheme: Scheme,
    pub gain: ComplexVector,
    pub snr: f64,
    pub rate_bits: f64,
}

impl SchemeEval {
    fn new(scheme: Scheme, gain: ComplexVector, snr: f64) -> Self {
        let snr = snr.max(0.0);
        Self {
            scheme,
            gain: gain.canonical_phase(),
            snr,
            rate_bits: rate_bits(snr),
        }
    }
}

fn check_power(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {p}")));
    }
    Ok(())
}

fn validated_covariance(k: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if k.rows() != n || k.cols() != n {
        return Err(dim_mismatch(format!("{n}x{n}"), format!("{}x{}", k.rows(), k.cols())));
    }
    let k = k.hermitian_part()?;
    if let Some(bad) = k.real_diagonal().into_iter().find(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "noise covariance diagonal must be strictly positive, got {bad}"
        )));
    }
    Ok(k)
}

/// `K ⊙ g g^H`, i.e. `G K G^H`.
fn weighted_noise(k: &ComplexMatrix, g: &ComplexVector) -> ComplexMatrix {
    let n = g.dim();
    let mut out = k.clone();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = k[(i, j)] * g[i] * g[j].conj();
        }
    }
    out
}

/// Scales `d` so that `sum_i |d_i|^2 weights_i = budget`.
fn normalize_to(weights: &[f64], d: &ComplexVector, budget: f64) -> Result<ComplexVector> {
    if weights.len() != d.dim() {
        return Err(dim_mismatch(weights.len(), d.dim()));
    }
    let used: f64 = d.iter().zip(weights).map(|(z, w)| z.norm_sqr() * w).sum();
    if !(used > 0.0) || !used.is_finite() {
        return Err(Error::ZeroGain);
    }
    Ok(d.scale((budget / used).sqrt()))
}

/// Single-source two-hop network `(P, f, P_R, g, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoHopNetwork {
    source_power: f64,
    f: ComplexVector,
    relay_power: f64,
    g: ComplexVector,
    noise_cov: ComplexMatrix,
}

impl TwoHopNetwork {
    pub fn new(
        source_power: f64,
        f: ComplexVector,
        relay_power: f64,
        g: ComplexVector,
        noise_cov: ComplexMatrix,
    ) -> Result<Self> {
        check_power("source power", source_power)?;
        check_power("relay power", relay_power)?;
        if f.dim() != g.dim() {
            return Err(dim_mismatch(f.dim(), g.dim()));
        }
        let noise_cov = validated_covariance(&noise_cov, f.dim())?;
        Ok(Self {
            source_power,
            f,
            relay_power,
            g,
            noise_cov,
        })
    }

    pub fn num_relays(&self) -> usize {
        self.f.dim()
    }

    pub fn source_power(&self) -> f64 {
        self.source_power
    }

    pub fn relay_power(&self) -> f64 {
        self.relay_power
    }

    pub fn f(&self) -> &ComplexVector {
        &self.f
    }

    pub fn g(&self) -> &ComplexVector {
        &self.g
    }

    pub fn noise_cov(&self) -> &ComplexMatrix {
        &self.noise_cov
    }

    /// Same channels and powers, different noise covariance.
    pub fn with_noise_cov(&self, noise_cov: ComplexMatrix) -> Result<Self> {
        Self::new(self.source_power, self.f.clone(), self.relay_power, self.g.clone(), noise_cov)
    }

    pub fn with_source_power(&self, source_power: f64) -> Result<Self> {
        Self::new(source_power, self.f.clone(), self.relay_power, self.g.clone(), self.noise_cov.clone())
    }

    pub fn with_relay_power(&self, relay_power: f64) -> Result<Self> {
        Self::new(self.source_power, self.f.clone(), relay_power, self.g.clone(), self.noise_cov.clone())
    }

    /// Per-relay received power `|f_i|^2 P + K_ii`.
    pub fn relay_rx_power(&self) -> Vec<f64> {
        self.f
            .iter()
            .zip(self.noise_cov.real_diagonal())
            .map(|(fi, kii)| fi.norm_sqr() * self.source_power + kii)
            .collect()
    }

    /// Total relay transmit power `d^H [(f f^H P + K) ⊙ I] d` spent by `d`.
    pub fn relay_power_used(&self, d: &ComplexVector) -> Result<f64> {
        if d.dim() != self.num_relays() {
            return Err(dim_mismatch(self.num_relays(), d.dim()));
        }
        Ok(d.iter().zip(self.relay_rx_power()).map(|(z, w)| z.norm_sqr() * w).sum())
    }

    /// Destination SNR for an arbitrary (not necessarily feasible) gain.
    pub fn snr_of_gain(&self, d: &ComplexVector) -> Result<f64> {
        if d.dim() != self.num_relays() {
            return Err(dim_mismatch(self.num_relays(), d.dim()));
        }
        // a = d ⊙ g is the effective combining vector on the relay observation.
        let a = d.hadamard(&self.g)?;
        let signal = a.dot_t(&self.f)?.norm_sqr() * self.source_power;
        let noise = self.noise_cov.quad_form(&a.conj())?.re;
        Ok((signal / (noise.max(0.0) + 1.0)).max(0.0))
    }

    /// Rescales `d` by a positive real so the sum power constraint holds with
    /// equality.
    pub fn normalize_power(&self, d: &ComplexVector) -> Result<ComplexVector> {
        normalize_to(&self.relay_rx_power(), d, self.relay_power)
    }

    /// `A = K ⊙ g g^H P_R + (f f^H P) ⊙ I + K ⊙ I`.
    pub fn a_matrix(&self) -> ComplexMatrix {
        let mut a = weighted_noise(&self.noise_cov, &self.g).scale(self.relay_power);
        for (i, w) in self.relay_rx_power().into_iter().enumerate() {
            a[(i, i)] += w;
        }
        a
    }

    fn effective_channel(&self) -> ComplexVector {
        self.f.hadamard(&self.g).expect("f and g share a dimension")
    }

    /// Closed-form optimum `d = κ conj(A^{-1}(f ⊙ g))` with
    /// `SNR = P P_R (f ⊙ g)^H A^{-1} (f ⊙ g)`.
    pub fn optimal_gain_s11(&self) -> Result<SchemeEval> {
        self.optimal_for(Scheme::S11)
    }

    fn optimal_for(&self, scheme: Scheme) -> Result<SchemeEval> {
        let u = self.effective_channel();
        let chol = Cholesky::factor(&self.a_matrix())?;
        if u.is_zero() {
            // No end-to-end path: every feasible gain gives zero SNR.
            let gain = self.normalize_power(&ComplexVector::ones(self.num_relays()))?;
            return Ok(SchemeEval::new(scheme, gain, 0.0));
        }
        let snr = self.source_power * self.relay_power * chol.inverse_quad_form(&u)?;
        let x = chol.solve(&u)?;
        let gain = self.normalize_power(&x.conj())?;
        Ok(SchemeEval::new(scheme, gain, snr))
    }

    /// Optimum for the uncorrelated network with covariance `K ⊙ I`.
    pub fn optimal_gain_s00(&self) -> Result<SchemeEval> {
        self.with_noise_cov(self.noise_cov.diag_part())?.optimal_for(Scheme::S00)
    }

    /// The S00 gain applied to the true, correlated network.
    pub fn eval_scheme_s10(&self) -> Result<SchemeEval> {
        let d00 = self.optimal_gain_s00()?.gain;
        // K and K ⊙ I share a diagonal, so d00 is already feasible here.
        let snr = self.snr_of_gain(&d00)?;
        Ok(SchemeEval::new(Scheme::S10, d00, snr))
    }

    /// Optimum for the i.i.d. network with covariance `(Tr K / N) I`.
    pub fn eval_scheme_siid(&self) -> Result<SchemeEval> {
        self.with_noise_cov(iid_equivalent_covariance(&self.noise_cov))?
            .optimal_for(Scheme::Siid)
    }

    /// Co-phasing gains from local channel knowledge: `arg d_i = -(arg f_i +
    /// arg g_i)` and every active relay spends `P_R / N_active`. Relays with a
    /// zero channel stay silent. The SNR is taken under `K` when `true_k`, else
    /// under `K ⊙ I`.
    pub fn eval_scheme_local_csi(&self, true_k: bool) -> Result<SchemeEval> {
        let rx = self.relay_rx_power();
        let active: Vec<bool> = self
            .f
            .iter()
            .zip(self.g.iter())
            .map(|(fi, gi)| fi.norm_sqr() > 0.0 && gi.norm_sqr() > 0.0)
            .collect();
        let n_active = active.iter().filter(|&&a| a).count();
        if n_active == 0 {
            return Err(Error::ZeroChannel);
        }
        let share = self.relay_power / n_active as f64;
        let gain = ComplexVector::new(
            (0..self.num_relays())
                .map(|i| {
                    if !active[i] {
                        return Complex64::new(0.0, 0.0);
                    }
                    let phase = -(self.f[i].arg() + self.g[i].arg());
                    Complex64::from_polar((share / rx[i]).sqrt(), phase)
                })
                .collect(),
        );
        let snr = self.snr_under(&gain, true_k)?;
        Ok(SchemeEval::new(Scheme::LocalCsi, gain, snr))
    }

    /// A fixed gain independent of the channels (all-ones by default),
    /// power-normalized; SNR under `K` when `true_k`, else under `K ⊙ I`.
    pub fn eval_scheme_no_csi(&self, gain: Option<&ComplexVector>, true_k: bool) -> Result<SchemeEval> {
        let raw = gain
            .cloned()
            .unwrap_or_else(|| ComplexVector::ones(self.num_relays()));
        let gain = self.normalize_power(&raw)?;
        let snr = self.snr_under(&gain, true_k)?;
        Ok(SchemeEval::new(Scheme::NoCsi, gain, snr))
    }

    fn snr_under(&self, d: &ComplexVector, true_k: bool) -> Result<f64> {
        if true_k {
            self.snr_of_gain(d)
        } else {
            self.with_noise_cov(self.noise_cov.diag_part())?.snr_of_gain(d)
        }
    }

    /// Evaluates one scheme with its default options (local/no CSI under the
    /// true covariance).
    pub fn evaluate(&self, scheme: Scheme) -> Result<SchemeEval> {
        match scheme {
            Scheme::S11 => self.optimal_gain_s11(),
            Scheme::S10 => self.eval_scheme_s10(),
            Scheme::S00 => self.optimal_gain_s00(),
            Scheme::Siid => self.eval_scheme_siid(),
            Scheme::LocalCsi => self.eval_scheme_local_csi(true),
            Scheme::NoCsi => self.eval_scheme_no_csi(None, true),
        }
    }

    /// Rate of the SIMO channel the network approaches as `P_R → ∞`:
    /// `log2(1 + P f^H K^{-1} f)`.
    pub fn simo_limit_rate(&self) -> Result<f64> {
        let chol = Cholesky::factor(&self.noise_cov).map_err(|_| Error::SingularK)?;
        Ok(rate_bits(self.source_power * chol.inverse_quad_form(&self.f)?))
    }

    /// Rate of the MISO channel the network approaches as `P → ∞`:
    /// `log2(1 + P_R ||g||^2)`.
    pub fn miso_limit_rate(&self) -> f64 {
        rate_bits(self.relay_power * self.g.norm_sqr())
    }

    /// Closed-form SNR of the four benchmark schemes as `P_R → ∞`.
    pub fn high_pr_snr_formulas(&self) -> Result<BTreeMap<Scheme, f64>> {
        let p = self.source_power;
        let k = &self.noise_cov;
        let chol = Cholesky::factor(k).map_err(|_| Error::SingularK)?;
        let kd = k.real_diagonal();
        let n = self.num_relays() as f64;

        let s11 = p * chol.inverse_quad_form(&self.f)?;
        // y = (K ⊙ I)^{-1} f
        let y = ComplexVector::new(self.f.iter().zip(&kd).map(|(fi, kii)| fi / kii).collect());
        let a = self.f.dot(&y)?.re;
        let s00 = p * a;
        let s10 = a * a * p / k.quad_form(&y)?.re;
        let siid = self.f.norm_sqr() * p / (k.trace().re / n);

        Ok(BTreeMap::from([
            (Scheme::S11, s11),
            (Scheme::S10, s10),
            (Scheme::S00, s00),
            (Scheme::Siid, siid),
        ]))
    }
}

/// Average high-`P_R` SNR over `f ~ CN(0, I)` for a fixed covariance:
/// `P Σ 1/λ_i` (S11), `P Σ 1/K_ii` (S00) and `N P / (Σ K_ii / N)` (SIID).
/// S10 has no closed form and is absent from the map.
pub fn expected_high_pr_snr(k: &ComplexMatrix, source_power: f64) -> Result<BTreeMap<Scheme, f64>> {
    let chol = Cholesky::factor(k).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularK,
        other => other,
    })?;
    let kd = k.real_diagonal();
    let n = kd.len() as f64;
    // Σ 1/λ_i = Tr(K^{-1})
    let s11 = source_power * chol.inverse_trace();
    let s00 = source_power * kd.iter().map(|v| 1.0 / v).sum::<f64>();
    let siid = n * source_power / (kd.iter().sum::<f64>() / n);
    Ok(BTreeMap::from([(Scheme::S11, s11), (Scheme::S00, s00), (Scheme::Siid, siid)]))
}

/// One source of a multiple-access relay network.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceLink {
    pub channel: ComplexVector,
    pub power: f64,
}

/// `L` sources sharing `N` relays and one destination.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSourceTwoHopNetwork {
    sources: Vec<SourceLink>,
    relay_power: f64,
    g: ComplexVector,
    noise_cov: ComplexMatrix,
}

impl MultiSourceTwoHopNetwork {
    pub fn new(
        sources: Vec<SourceLink>,
        relay_power: f64,
        g: ComplexVector,
        noise_cov: ComplexMatrix,
    ) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidArgument("at least one source is required".into()));
        }
        check_power("relay power", relay_power)?;
        for s in &sources {
            check_power("source power", s.power)?;
            if s.channel.dim() != g.dim() {
                return Err(dim_mismatch(g.dim(), s.channel.dim()));
            }
        }
        let noise_cov = validated_covariance(&noise_cov, g.dim())?;
        Ok(Self {
            sources,
            relay_power,
            g,
            noise_cov,
        })
    }

    pub fn num_relays(&self) -> usize {
        self.g.dim()
    }

    pub fn sources(&self) -> &[SourceLink] {
        &self.sources
    }

    pub fn relay_rx_power(&self) -> Vec<f64> {
        let mut w = self.noise_cov.real_diagonal();
        for s in &self.sources {
            for (wi, fi) in w.iter_mut().zip(s.channel.iter()) {
                *wi += fi.norm_sqr() * s.power;
            }
        }
        w
    }

    pub fn normalize_power(&self, d: &ComplexVector) -> Result<ComplexVector> {
        normalize_to(&self.relay_rx_power(), d, self.relay_power)
    }

    /// Sum-rate SNR `Σ_k |d^T G f_k|^2 P_k / (d^T G K G^H conj(d) + 1)`.
    pub fn snr_of_gain(&self, d: &ComplexVector) -> Result<f64> {
        if d.dim() != self.num_relays() {
            return Err(dim_mismatch(self.num_relays(), d.dim()));
        }
        let a = d.hadamard(&self.g)?;
        let mut signal = 0.0;
        for s in &self.sources {
            signal += a.dot_t(&s.channel)?.norm_sqr() * s.power;
        }
        let noise = self.noise_cov.quad_form(&a.conj())?.re;
        Ok(signal / (noise.max(0.0) + 1.0))
    }

    pub fn a_matrix(&self) -> ComplexMatrix {
        let mut a = weighted_noise(&self.noise_cov, &self.g).scale(self.relay_power);
        for (i, w) in self.relay_rx_power().into_iter().enumerate() {
            a[(i, i)] += w;
        }
        a
    }

    /// Sum-rate optimum `SNR = P_R λ_max(A^{-1} B)` with
    /// `B = Σ_k (f_k ⊙ g)(f_k ⊙ g)^H P_k`, evaluated on the Hermitian matrix
    /// `L^{-1} B L^{-H}` where `A = L L^H`.
    pub fn optimal_gain(&self) -> Result<SchemeEval> {
        let chol = Cholesky::factor(&self.a_matrix())?;
        let n = self.num_relays();
        let mut reduced = ComplexMatrix::zeros(n, n);
        for s in &self.sources {
            let y = chol.solve_lower(&s.channel.hadamard(&self.g)?)?;
            reduced = reduced.add(&ComplexMatrix::outer(&y, &y).scale(s.power))?;
        }
        let (lambda, v) = principal_eigenpair(&reduced)?;
        if lambda <= 0.0 {
            let gain = self.normalize_power(&ComplexVector::ones(n))?;
            return Ok(SchemeEval::new(Scheme::S11, gain, 0.0));
        }
        let x = chol.solve_lower_adjoint(&v)?;
        let gain = self.normalize_power(&x.conj())?;
        Ok(SchemeEval::new(Scheme::S11, gain, self.relay_power * lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{interference_covariance, sample_cn01_vector, InterferenceEnv, RngStream};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_net(p: f64, pr: f64) -> TwoHopNetwork {
        TwoHopNetwork::new(
            p,
            ComplexVector::from_real(&[1.0]),
            pr,
            ComplexVector::from_real(&[1.0]),
            ComplexMatrix::identity(1),
        )
        .unwrap()
    }

    fn random_net(seed: u64, n: usize, q: usize, p: f64, pr: f64, pi: f64) -> TwoHopNetwork {
        let mut rng = RngStream::new(seed, 0);
        let f = sample_cn01_vector(n, &mut rng);
        let g = sample_cn01_vector(n, &mut rng);
        let env = InterferenceEnv::sample(n, q, pi, &mut rng);
        let k = interference_covariance(&env, n, 1.0).unwrap();
        TwoHopNetwork::new(p, f, pr, g, k).unwrap()
    }

    #[test]
    fn snr_of_zero_gain_is_zero() {
        let net = random_net(1, 3, 1, 10.0, 10.0, 10.0);
        assert_eq!(net.snr_of_gain(&ComplexVector::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn snr_scalar() {
        let net = scalar_net(2.0, 1.0);
        assert!((net.snr_of_gain(&ComplexVector::from_real(&[1.0])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn snr_dimension_mismatch() {
        let net = scalar_net(1.0, 1.0);
        assert!(matches!(
            net.snr_of_gain(&ComplexVector::ones(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalize_scalar() {
        let net = scalar_net(1.0, 1.0);
        let d = net.normalize_power(&ComplexVector::from_real(&[5.0])).unwrap();
        assert!((d[0] - c(1.0 / 2f64.sqrt(), 0.0)).norm() < 1e-15);
        let again = net.normalize_power(&d).unwrap();
        assert!(again.max_abs_diff(&d).unwrap() < 1e-12);
        assert_eq!(net.normalize_power(&ComplexVector::zeros(1)), Err(Error::ZeroGain));
    }

    #[test]
    fn normalize_random_plug_back() {
        let net = random_net(4, 4, 2, 3.0, 7.0, 5.0);
        let d = net
            .normalize_power(&ComplexVector::new(vec![c(1.0, 2.0), c(-0.3, 0.1), c(0.0, 4.0), c(2.0, 0.0)]))
            .unwrap();
        let used = net.relay_power_used(&d).unwrap();
        assert!((used - 7.0).abs() < 1e-12 * 7.0);
    }

    #[test]
    fn s11_scalar_case() {
        let net = scalar_net(1.0, 1.0);
        assert!((net.a_matrix()[(0, 0)].re - 3.0).abs() < 1e-15);
        let e = net.optimal_gain_s11().unwrap();
        assert!((e.snr - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.gain[0].norm() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((e.rate_bits - (4.0f64 / 3.0).log2()).abs() < 1e-15);
    }

    #[test]
    fn s11_equals_s00_for_diagonal_k() {
        let mut rng = RngStream::new(8, 0);
        let f = sample_cn01_vector(3, &mut rng);
        let g = sample_cn01_vector(3, &mut rng);
        let k = ComplexMatrix::from_real_diag(&[1.0, 2.5, 0.7]);
        let net = TwoHopNetwork::new(4.0, f, 6.0, g, k).unwrap();
        let s11 = net.optimal_gain_s11().unwrap();
        let s00 = net.optimal_gain_s00().unwrap();
        assert!((s11.snr - s00.snr).abs() < 1e-12 * s11.snr);
        assert!(s11.gain.max_abs_diff(&s00.gain).unwrap() < 1e-12);
        let s10 = net.eval_scheme_s10().unwrap();
        assert!((s10.snr - s00.snr).abs() < 1e-12 * s00.snr);
    }

    #[test]
    fn s11_gain_is_feasible_and_attains_snr() {
        let net = random_net(12, 4, 2, 10.0, 10.0, 10.0);
        let e = net.optimal_gain_s11().unwrap();
        let used = net.relay_power_used(&e.gain).unwrap();
        assert!((used - net.relay_power()).abs() < 1e-9 * net.relay_power());
        let direct = net.snr_of_gain(&e.gain).unwrap();
        assert!((direct - e.snr).abs() < 1e-10 * e.snr);
    }

    #[test]
    fn white_noise_real_channels_coincide() {
        let net = TwoHopNetwork::new(
            3.0,
            ComplexVector::from_real(&[0.4, -1.2]),
            5.0,
            ComplexVector::from_real(&[1.1, 0.3]),
            ComplexMatrix::identity(2),
        )
        .unwrap();
        let s11 = net.optimal_gain_s11().unwrap();
        let s00 = net.optimal_gain_s00().unwrap();
        let siid = net.eval_scheme_siid().unwrap();
        assert!((s11.snr - s00.snr).abs() < 1e-12);
        assert!((s11.snr - siid.snr).abs() < 1e-12);
        assert!(s11.gain.max_abs_diff(&s00.gain).unwrap() < 1e-12);
    }

    #[test]
    fn scalar_network_schemes_coincide() {
        let net = TwoHopNetwork::new(
            2.0,
            ComplexVector::new(vec![c(0.3, -0.8)]),
            3.0,
            ComplexVector::new(vec![c(-1.1, 0.4)]),
            ComplexMatrix::from_real_diag(&[1.7]),
        )
        .unwrap();
        let s11 = net.optimal_gain_s11().unwrap().snr;
        for scheme in [Scheme::S10, Scheme::S00, Scheme::Siid, Scheme::LocalCsi] {
            let s = net.evaluate(scheme).unwrap().snr;
            assert!((s - s11).abs() < 1e-12 * s11, "{scheme}: {s} vs {s11}");
        }
    }

    #[test]
    fn siid_matches_s00_for_scaled_identity() {
        let mut rng = RngStream::new(31, 0);
        let net = TwoHopNetwork::new(
            2.0,
            sample_cn01_vector(3, &mut rng),
            8.0,
            sample_cn01_vector(3, &mut rng),
            ComplexMatrix::identity(3).scale(2.5),
        )
        .unwrap();
        let siid = net.eval_scheme_siid().unwrap();
        let s00 = net.optimal_gain_s00().unwrap();
        assert!((siid.snr - s00.snr).abs() < 1e-12 * s00.snr);
    }

    fn s10_minus_s00_at_high_pr(f: [f64; 2], k: &ComplexMatrix) -> f64 {
        let net = TwoHopNetwork::new(
            1.0,
            ComplexVector::from_real(&f),
            1e9,
            ComplexVector::from_real(&[0.9, -0.7]),
            k.clone(),
        )
        .unwrap();
        net.eval_scheme_s10().unwrap().snr - net.optimal_gain_s00().unwrap().snr
    }

    #[test]
    fn s10_high_pr_real_two_relay_difference() {
        // Unit-diagonal K: -2 f1 f2 K12 (f1^2 K11 + f2^2 K22) / (f1^2 K11 + f2^2 K22 + 2 f1 f2 K12).
        let f = [0.8, 1.3];
        for k12 in [-0.4, 0.35] {
            let k = ComplexMatrix::from_real_rows(&[&[1.0, k12], &[k12, 1.0]]).unwrap();
            let s = f[0] * f[0] + f[1] * f[1];
            let expected = -2.0 * f[0] * f[1] * k12 * s / (s + 2.0 * f[0] * f[1] * k12);
            let diff = s10_minus_s00_at_high_pr(f, &k);
            assert!((diff - expected).abs() < 1e-6 * expected.abs(), "{diff} vs {expected}");
            // Sign follows -f1 f2 K12.
            assert_eq!(diff > 0.0, k12 < 0.0);
        }
        // General diagonal: -ab/(a+b) with a = Σ f_i^2/K_ii, b = 2 f1 f2 K12/(K11 K22).
        let (k11, k22, k12) = (2.0, 1.5, -0.6);
        let k = ComplexMatrix::from_real_rows(&[&[k11, k12], &[k12, k22]]).unwrap();
        let a = f[0] * f[0] / k11 + f[1] * f[1] / k22;
        let b = 2.0 * f[0] * f[1] * k12 / (k11 * k22);
        let expected = -a * b / (a + b);
        let diff = s10_minus_s00_at_high_pr(f, &k);
        assert!((diff - expected).abs() < 1e-6 * expected.abs(), "{diff} vs {expected}");
    }

    #[test]
    fn s11_dominates_s10_per_instance() {
        for seed in 0..200 {
            let net = random_net(seed, 3, 1, 10.0, 10.0, 10.0);
            let s11 = net.optimal_gain_s11().unwrap().snr;
            let s10 = net.eval_scheme_s10().unwrap().snr;
            assert!(s11 >= s10 * (1.0 - 1e-12), "seed {seed}");
        }
    }

    #[test]
    fn local_csi_examples() {
        let net = TwoHopNetwork::new(
            1.0,
            ComplexVector::from_real(&[0.5, 1.5, 2.0]),
            4.0,
            ComplexVector::from_real(&[1.0, 0.2, 0.7]),
            ComplexMatrix::identity(3),
        )
        .unwrap();
        let e = net.eval_scheme_local_csi(true).unwrap();
        assert!(e.gain.iter().all(|z| z.im.abs() < 1e-15 && z.re > 0.0));
        let used = net.relay_power_used(&e.gain).unwrap();
        assert!((used - 4.0).abs() < 1e-12);
        let rx = net.relay_rx_power();
        for (z, w) in e.gain.iter().zip(&rx) {
            assert!((z.norm_sqr() * w - 4.0 / 3.0).abs() < 1e-12);
        }

        let scalar = TwoHopNetwork::new(
            2.0,
            ComplexVector::new(vec![c(0.0, 1.0)]),
            3.0,
            ComplexVector::new(vec![c(1.0, -1.0)]),
            ComplexMatrix::identity(1),
        )
        .unwrap();
        let lc = scalar.eval_scheme_local_csi(true).unwrap().snr;
        let s11 = scalar.optimal_gain_s11().unwrap().snr;
        assert!((lc - s11).abs() < 1e-12 * s11);
    }

    #[test]
    fn local_csi_zero_channels() {
        let net = TwoHopNetwork::new(
            1.0,
            ComplexVector::from_real(&[0.0, 1.0]),
            2.0,
            ComplexVector::from_real(&[1.0, 1.0]),
            ComplexMatrix::identity(2),
        )
        .unwrap();
        let e = net.eval_scheme_local_csi(true).unwrap();
        assert_eq!(e.gain[0], c(0.0, 0.0));
        assert!((net.relay_power_used(&e.gain).unwrap() - 2.0).abs() < 1e-12);

        let dead = TwoHopNetwork::new(
            1.0,
            ComplexVector::from_real(&[0.0, 1.0]),
            2.0,
            ComplexVector::from_real(&[1.0, 0.0]),
            ComplexMatrix::identity(2),
        )
        .unwrap();
        assert_eq!(dead.eval_scheme_local_csi(true), Err(Error::ZeroChannel));
        // Other schemes tolerate the dead path and report zero SNR.
        assert_eq!(dead.optimal_gain_s11().unwrap().snr, 0.0);
    }

    #[test]
    fn no_csi_default_gain_is_normalized_ones() {
        let net = random_net(2, 3, 1, 2.0, 5.0, 3.0);
        let e = net.eval_scheme_no_csi(None, true).unwrap();
        assert!((net.relay_power_used(&e.gain).unwrap() - 5.0).abs() < 1e-12);
        let m0 = e.gain[0].norm();
        assert!(e.gain.iter().all(|z| (z.norm() - m0).abs() < 1e-12));
        let diag = net.eval_scheme_no_csi(None, false).unwrap();
        assert!(e.gain.max_abs_diff(&diag.gain).unwrap() < 1e-15);
    }

    #[test]
    fn simo_and_miso_limits() {
        let net = TwoHopNetwork::new(
            3.0,
            ComplexVector::from_real(&[1.0]),
            3.0,
            ComplexVector::from_real(&[1.0]),
            ComplexMatrix::identity(1),
        )
        .unwrap();
        assert!((net.simo_limit_rate().unwrap() - 2.0).abs() < 1e-15);
        assert!((net.miso_limit_rate() - 2.0).abs() < 1e-15);

        let white = random_net(3, 3, 0, 2.0, 5.0, 0.0);
        let expected = rate_bits(2.0 * white.f().norm_sqr());
        assert!((white.simo_limit_rate().unwrap() - expected).abs() < 1e-12);

        let other = white.with_noise_cov(ComplexMatrix::from_real_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(white.miso_limit_rate(), other.miso_limit_rate());

        let singular = white
            .with_noise_cov(ComplexMatrix::from_real_rows(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap())
            .unwrap();
        assert_eq!(singular.simo_limit_rate(), Err(Error::SingularK));
        assert_eq!(singular.high_pr_snr_formulas(), Err(Error::SingularK));
        // The optimum remains finite with a singular K.
        assert!(singular.optimal_gain_s11().unwrap().snr.is_finite());
    }

    #[test]
    fn high_pr_formulas_white_noise() {
        let net = random_net(6, 4, 0, 3.0, 1.0, 0.0);
        let expected = 3.0 * net.f().norm_sqr();
        for (_, v) in net.high_pr_snr_formulas().unwrap() {
            assert!((v - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn expected_high_pr_examples() {
        let m = expected_high_pr_snr(&ComplexMatrix::identity(2), 1.0).unwrap();
        assert_eq!(m.len(), 3);
        for v in m.values() {
            assert!((v - 2.0).abs() < 1e-15);
        }
        let m = expected_high_pr_snr(&ComplexMatrix::from_real_diag(&[4.0, 1.0]), 1.0).unwrap();
        assert!((m[&Scheme::S11] - 1.25).abs() < 1e-15);
        assert!((m[&Scheme::S00] - 1.25).abs() < 1e-15);
        assert!((m[&Scheme::Siid] - 0.8).abs() < 1e-15);
        assert!(!m.contains_key(&Scheme::S10));
    }

    #[test]
    fn phase_invariance() {
        let net = random_net(9, 4, 2, 5.0, 5.0, 5.0);
        let d = net.optimal_gain_s00().unwrap().gain;
        let base = net.snr_of_gain(&d).unwrap();
        for k in 0..16 {
            let theta = k as f64 * std::f64::consts::PI / 8.0;
            let rotated = d.scale_complex(Complex64::from_polar(1.0, theta));
            let s = net.snr_of_gain(&rotated).unwrap();
            assert!((s - base).abs() < 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn multisource_single_source_reduces_to_single_user_optimum() {
        let net = random_net(15, 3, 1, 4.0, 6.0, 8.0);
        let ms = MultiSourceTwoHopNetwork::new(
            vec![SourceLink {
                channel: net.f().clone(),
                power: 4.0,
            }],
            6.0,
            net.g().clone(),
            net.noise_cov().clone(),
        )
        .unwrap();
        let a = ms.optimal_gain().unwrap();
        let b = net.optimal_gain_s11().unwrap();
        assert!((a.snr - b.snr).abs() < 1e-10 * b.snr);
        assert!(a.gain.max_abs_diff(&b.gain).unwrap() < 1e-8);
    }

    #[test]
    fn multisource_identical_channels_pool_power() {
        let net = random_net(16, 3, 1, 5.0, 6.0, 8.0);
        let ms = MultiSourceTwoHopNetwork::new(
            vec![
                SourceLink {
                    channel: net.f().clone(),
                    power: 2.0,
                },
                SourceLink {
                    channel: net.f().clone(),
                    power: 3.0,
                },
            ],
            6.0,
            net.g().clone(),
            net.noise_cov().clone(),
        )
        .unwrap();
        let e = ms.optimal_gain().unwrap();
        let single = net.optimal_gain_s11().unwrap();
        assert!((e.snr - single.snr).abs() < 1e-10 * single.snr);
        let direct = ms.snr_of_gain(&e.gain).unwrap();
        assert!((direct - e.snr).abs() < 1e-9 * e.snr);
    }

    #[test]
    fn invalid_networks_rejected() {
        let f = ComplexVector::ones(2);
        let g = ComplexVector::ones(2);
        assert!(TwoHopNetwork::new(0.0, f.clone(), 1.0, g.clone(), ComplexMatrix::identity(2)).is_err());
        assert!(TwoHopNetwork::new(1.0, f.clone(), 1.0, ComplexVector::ones(3), ComplexMatrix::identity(2)).is_err());
        assert!(TwoHopNetwork::new(1.0, f.clone(), 1.0, g.clone(), ComplexMatrix::identity(3)).is_err());
        assert!(TwoHopNetwork::new(1.0, f, 1.0, g, ComplexMatrix::from_real_diag(&[1.0, 0.0])).is_err());
        assert!("s10".parse::<Scheme>().is_ok());
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
