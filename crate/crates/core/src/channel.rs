//! Seedable channel draws and interference-induced relay noise covariances.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives each Monte Carlo
/// trial its own independent substream of the same seed.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `(0, 1]`.
    pub fn next_open_uniform(&mut self) -> f64 {
        1.0 - self.rng.gen::<f64>()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// One CN(0, 1) sample via Box–Muller: real and imaginary parts are
    /// independent N(0, 1/2).
    pub fn next_cn01(&mut self) -> Complex64 {
        let r = (-self.next_open_uniform().ln()).sqrt();
        let theta = 2.0 * PI * self.next_uniform();
        Complex64::from_polar(r, theta)
    }
}

/// `n` i.i.d. CN(0, 1) entries.
pub fn sample_cn01_vector(n: usize, rng: &mut RngStream) -> ComplexVector {
    assert!(n >= 1, "vector length must be positive");
    ComplexVector::new((0..n).map(|_| rng.next_cn01()).collect())
}

/// Common interferers seen by every relay: channel `h_k` and power `P_Ik`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceEnv {
    interferer_channels: Vec<ComplexVector>,
    interferer_powers: Vec<f64>,
}

impl InterferenceEnv {
    pub fn new(interferer_channels: Vec<ComplexVector>, interferer_powers: Vec<f64>) -> Result<Self> {
        if interferer_channels.len() != interferer_powers.len() {
            return Err(dim_mismatch(interferer_channels.len(), interferer_powers.len()));
        }
        if let Some(p) = interferer_powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "interferer power must be finite and nonnegative, got {p}"
            )));
        }
        Ok(Self {
            interferer_channels,
            interferer_powers,
        })
    }

    pub fn empty() -> Self {
        Self {
            interferer_channels: Vec::new(),
            interferer_powers: Vec::new(),
        }
    }

    /// Draws `q` interferer channels CN(0, I_n) and splits `total_power`
    /// equally among them.
    pub fn sample(n: usize, q: usize, total_power: f64, rng: &mut RngStream) -> Self {
        let channels = (0..q).map(|_| sample_cn01_vector(n, rng)).collect();
        let powers = vec![if q == 0 { 0.0 } else { total_power / q as f64 }; q];
        Self {
            interferer_channels: channels,
            interferer_powers: powers,
        }
    }

    pub fn num_interferers(&self) -> usize {
        self.interferer_channels.len()
    }

    pub fn channels(&self) -> &[ComplexVector] {
        &self.interferer_channels
    }

    pub fn powers(&self) -> &[f64] {
        &self.interferer_powers
    }

    pub fn total_power(&self) -> f64 {
        self.interferer_powers.iter().sum()
    }
}

/// `K = sum_k h_k h_k^H P_Ik + local_noise_var * I` for `num_relays` relays.
pub fn interference_covariance(
    env: &InterferenceEnv,
    num_relays: usize,
    local_noise_var: f64,
) -> Result<ComplexMatrix> {
    if !(local_noise_var > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "local noise variance must be positive, got {local_noise_var}"
        )));
    }
    let mut k = ComplexMatrix::identity(num_relays).scale(local_noise_var);
    for (h, &p) in env.channels().iter().zip(env.powers()) {
        if h.dim() != num_relays {
            return Err(dim_mismatch(num_relays, h.dim()));
        }
        for i in 0..num_relays {
            for j in 0..num_relays {
                k[(i, j)] += h[i] * h[j].conj() * p;
            }
        }
    }
    Ok(k)
}

/// `(Tr(K)/N) I`: the i.i.d. covariance with the same total noise power.
pub fn iid_equivalent_covariance(k: &ComplexMatrix) -> ComplexMatrix {
    assert!(k.is_square(), "covariance must be square");
    let n = k.rows();
    ComplexMatrix::identity(n).scale(k.trace().re / n as f64)
}
