//! Reference implementations that share no linear algebra with the library:
//! SNRs are re-expanded entry by entry, quadratic forms are recovered by
//! probing scalar functions, and maxima come from subspace ascent over
//! nalgebra eigensolves or plain random search.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use relaysim::channel::RngStream;
use relaysim::experiments::{draw_network, FixedParams};
use relaysim::twohop::TwoHopNetwork;
use relaysim::{ComplexMatrix, ComplexVector};

pub type CMat = DMatrix<C>;
pub type CVec = DVector<C>;

pub fn to_mat(m: &ComplexMatrix) -> CMat {
    CMat::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn to_vec(v: &ComplexVector) -> Vec<C> {
    v.as_slice().to_vec()
}

/// Raw two-hop instance, copied out of the library type.
#[derive(Clone, Debug)]
pub struct TwoHop {
    pub p: f64,
    pub f: Vec<C>,
    pub pr: f64,
    pub g: Vec<C>,
    pub k: CMat,
}

impl TwoHop {
    pub fn from_net(net: &TwoHopNetwork) -> Self {
        Self {
            p: net.source_power(),
            f: to_vec(net.f()),
            pr: net.relay_power(),
            g: to_vec(net.g()),
            k: to_mat(net.noise_cov()),
        }
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// `|Σ d_i g_i f_i|² P`.
    pub fn signal(&self, d: &[C]) -> f64 {
        let mut s = C::new(0.0, 0.0);
        for i in 0..self.n() {
            s += d[i] * self.g[i] * self.f[i];
        }
        s.norm_sqr() * self.p
    }

    /// `Σ_ij d_i g_i K_ij conj(g_j d_j)`.
    pub fn forwarded_noise(&self, d: &[C]) -> f64 {
        noise_with(&self.k, &self.g, d)
    }

    /// `Σ |d_i|² (|f_i|² P + K_ii)`.
    pub fn power_used(&self, d: &[C]) -> f64 {
        (0..self.n())
            .map(|i| d[i].norm_sqr() * (self.f[i].norm_sqr() * self.p + self.k[(i, i)].re))
            .sum()
    }

    pub fn snr(&self, d: &[C]) -> f64 {
        self.signal(d) / (self.forwarded_noise(d) + 1.0)
    }

    /// Scales `d` onto the relay power budget.
    pub fn feasible(&self, d: &[C]) -> Vec<C> {
        let s = (self.pr / self.power_used(d)).sqrt();
        d.iter().map(|z| z * s).collect()
    }

    /// Best SNR among `count` random feasible gains.
    pub fn random_search(&self, count: usize, rng: &mut RngStream) -> f64 {
        let mut best = 0.0f64;
        let mut d = vec![C::new(0.0, 0.0); self.n()];
        for _ in 0..count {
            for z in d.iter_mut() {
                *z = rng.next_cn01();
            }
            best = best.max(self.snr(&self.feasible(&d)));
        }
        best
    }

    /// Optimal SNR by subspace ascent of the homogenized quotient
    /// `signal(d) / (noise(d) + power(d)/P_R)`.
    pub fn ascent_optimum(&self, seed: u64) -> f64 {
        let n = self.n();
        let num = probe_hermitian(n, |d| self.signal(d));
        let den = probe_hermitian(n, |d| self.forwarded_noise(d) + self.power_used(d) / self.pr);
        max_rayleigh(&num, &den, seed).0
    }

    /// A copy with `K` replaced in both the noise and the power statistics.
    pub fn with_k(&self, k: CMat) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn diag_k(&self) -> CMat {
        CMat::from_fn(self.n(), self.n(), |i, j| if i == j { self.k[(i, i)] } else { C::new(0.0, 0.0) })
    }

    pub fn iid_k(&self) -> CMat {
        let t: f64 = (0..self.n()).map(|i| self.k[(i, i)].re).sum::<f64>() / self.n() as f64;
        CMat::identity(self.n(), self.n()) * C::new(t, 0.0)
    }
}

pub fn noise_with(k: &CMat, g: &[C], d: &[C]) -> f64 {
    let n = g.len();
    let mut s = C::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += d[i] * g[i] * k[(i, j)] * (g[j] * d[j]).conj();
        }
    }
    s.re
}

/// Multi-source instance: signal `Σ_k |Σ_i d_i g_i f_ki|² P_k`.
#[derive(Clone, Debug)]
pub struct MultiSource {
    pub sources: Vec<(Vec<C>, f64)>,
    pub pr: f64,
    pub g: Vec<C>,
    pub k: CMat,
}

impl MultiSource {
    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn signal(&self, d: &[C]) -> f64 {
        self.sources
            .iter()
            .map(|(f, p)| {
                let mut s = C::new(0.0, 0.0);
                for i in 0..self.n() {
                    s += d[i] * self.g[i] * f[i];
                }
                s.norm_sqr() * p
            })
            .sum()
    }

    pub fn power_used(&self, d: &[C]) -> f64 {
        (0..self.n())
            .map(|i| {
                let rx: f64 = self.sources.iter().map(|(f, p)| f[i].norm_sqr() * p).sum::<f64>() + self.k[(i, i)].re;
                d[i].norm_sqr() * rx
            })
            .sum()
    }

    pub fn ascent_optimum(&self, seed: u64) -> f64 {
        let n = self.n();
        let num = probe_hermitian(n, |d| self.signal(d));
        let den = probe_hermitian(n, |d| noise_with(&self.k, &self.g, d) + self.power_used(d) / self.pr);
        max_rayleigh(&num, &den, seed).0
    }
}

/// Recovers the Hermitian `M` with `q(x) = x^H M x` from values of `q` on
/// `e_i`, `e_i + e_j` and `e_i + j e_j`.
pub fn probe_hermitian(n: usize, q: impl Fn(&[C]) -> f64) -> CMat {
    let zero = C::new(0.0, 0.0);
    let basis = |entries: &[(usize, C)]| {
        let mut x = vec![zero; n];
        for &(i, v) in entries {
            x[i] = v;
        }
        x
    };
    let diag: Vec<f64> = (0..n).map(|i| q(&basis(&[(i, C::new(1.0, 0.0))]))).collect();
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C::new(diag[i], 0.0);
        for j in i + 1..n {
            let re = (q(&basis(&[(i, C::new(1.0, 0.0)), (j, C::new(1.0, 0.0))])) - diag[i] - diag[j]) / 2.0;
            let im = (diag[i] + diag[j] - q(&basis(&[(i, C::new(1.0, 0.0)), (j, C::new(0.0, 1.0))]))) / 2.0;
            m[(i, j)] = C::new(re, im);
            m[(j, i)] = C::new(re, -im);
        }
    }
    m
}

fn quotient(num: &CMat, den: &CMat, x: &CVec) -> f64 {
    (x.adjoint() * num * x)[(0, 0)].re / (x.adjoint() * den * x)[(0, 0)].re
}

/// Maximizes `x^H N x / x^H D x` (`D` positive definite) by locally optimal
/// block ascent: Rayleigh–Ritz on span{x, residual, previous x}.
pub fn max_rayleigh(num: &CMat, den: &CMat, seed: u64) -> (f64, CVec) {
    let n = num.nrows();
    let mut rng = RngStream::new(seed, 0xA5CE);
    let mut x = CVec::from_fn(n, |_, _| rng.next_cn01());
    x /= C::new(x.norm(), 0.0);
    let mut prev: Option<CVec> = None;
    let mut best = quotient(num, den, &x);
    let mut stalled = 0;
    for _ in 0..20_000 {
        let r = quotient(num, den, &x);
        let resid = num * &x - den * &x * C::new(r, 0.0);
        let mut cols: Vec<CVec> = vec![x.clone(), resid];
        if let Some(p) = &prev {
            cols.push(p.clone());
        }
        // Modified Gram–Schmidt with rank truncation.
        let mut q: Vec<CVec> = Vec::new();
        for mut c in cols {
            for b in &q {
                let proj = b.dotc(&c);
                c -= b * proj;
            }
            let nrm = c.norm();
            if nrm > 1e-12 {
                q.push(c / C::new(nrm, 0.0));
            }
        }
        let basis = CMat::from_columns(&q);
        let ns = basis.adjoint() * num * &basis;
        let ds = basis.adjoint() * den * &basis;
        let Some(chol) = ds.clone().cholesky() else { break };
        let l_inv = chol.l().try_inverse().expect("triangular inverse");
        let reduced = &l_inv * ns * l_inv.adjoint();
        let reduced = (&reduced + reduced.adjoint()) * C::new(0.5, 0.0);
        let eig = reduced.symmetric_eigen();
        let (idx, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        let y = l_inv.adjoint() * eig.eigenvectors.column(idx);
        let mut next = &basis * y;
        next /= C::new(next.norm(), 0.0);
        let value = quotient(num, den, &next);
        prev = Some(x);
        x = next;
        if value <= best * (1.0 + 1e-15) {
            stalled += 1;
            if stalled >= 5 {
                best = best.max(value);
                break;
            }
        } else {
            stalled = 0;
        }
        best = best.max(value);
    }
    (best, x)
}

/// Dense Hermitian eigenvalues, ascending.
pub fn eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// High-relay-power limits computed with nalgebra inverses.
pub fn high_pr_limits(net: &TwoHop) -> [f64; 4] {
    let f = CVec::from_column_slice(&net.f);
    let k_inv = net.k.clone().try_inverse().expect("invertible K");
    let s11 = (f.adjoint() * &k_inv * &f)[(0, 0)].re * net.p;
    let kd_inv = net.diag_k().try_inverse().expect("positive diagonal");
    let y = &kd_inv * &f;
    let a = (f.adjoint() * &y)[(0, 0)].re;
    let s00 = a * net.p;
    let s10 = a * a * net.p / (y.adjoint() * &net.k * &y)[(0, 0)].re;
    let n = net.n() as f64;
    let siid = f.norm_squared() * net.p / (net.k.trace().re / n);
    [s11, s10, s00, siid]
}

/// Random two-hop network from the common-interference model.
pub fn random_two_hop(n: usize, q: usize, p: f64, pr: f64, pi: f64, seed: u64, stream: u64) -> TwoHopNetwork {
    let params = FixedParams {
        source_power: p,
        relay_power: pr,
        interference_power: pi,
        num_relays: n,
        num_interferers: q,
    };
    draw_network(&params, &mut RngStream::new(seed, stream)).expect("valid random network")
}

// ---------------------------------------------------------------------------
// Three-hop
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ThreeHop {
    pub p0: f64,
    pub f: Vec<C>,
    pub p1: f64,
    pub h: CMat,
    pub p2: f64,
    pub g: Vec<C>,
}

impl ThreeHop {
    pub fn from_net(net: &relaysim::threehop::ThreeHopNetwork) -> Self {
        let (p0, p1, p2) = net.powers();
        Self {
            p0,
            f: to_vec(net.f()),
            p1,
            h: to_mat(net.h()),
            p2,
            g: to_vec(net.g()),
        }
    }

    /// `|g^T D2 H D1 f|² P0 / (||g^T D2 H D1||² + ||g^T D2||² + 1)`,
    /// summed term by term.
    pub fn snr(&self, d1: &[C], d2: &[C]) -> f64 {
        let (m, n) = (self.g.len(), self.f.len());
        let mut row = vec![C::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..m {
                row[j] += self.g[i] * d2[i] * self.h[(i, j)] * d1[j];
            }
        }
        let signal: C = (0..n).map(|j| row[j] * self.f[j]).sum();
        let fwd: f64 = row.iter().map(|z| z.norm_sqr()).sum();
        let relay2: f64 = (0..m).map(|i| (self.g[i] * d2[i]).norm_sqr()).sum();
        signal.norm_sqr() * self.p0 / (fwd + relay2 + 1.0)
    }

    pub fn stage1_power(&self, d1: &[C]) -> f64 {
        d1.iter()
            .zip(&self.f)
            .map(|(d, f)| d.norm_sqr() * (f.norm_sqr() * self.p0 + 1.0))
            .sum()
    }

    /// Second-stage relay input power per relay, given `d1`.
    pub fn stage2_rx(&self, d1: &[C]) -> Vec<f64> {
        let (m, n) = (self.g.len(), self.f.len());
        (0..m)
            .map(|i| {
                let sig: C = (0..n).map(|j| self.h[(i, j)] * d1[j] * self.f[j]).sum();
                let fwd: f64 = (0..n).map(|j| (self.h[(i, j)] * d1[j]).norm_sqr()).sum();
                sig.norm_sqr() * self.p0 + fwd + 1.0
            })
            .collect()
    }

    pub fn stage2_power(&self, d1: &[C], d2: &[C]) -> f64 {
        self.stage2_rx(d1).iter().zip(d2).map(|(w, d)| w * d.norm_sqr()).sum()
    }

    pub fn feasible1(&self, d1: &[C]) -> Vec<C> {
        let s = (self.p1 / self.stage1_power(d1)).sqrt();
        d1.iter().map(|z| z * s).collect()
    }

    pub fn feasible2(&self, d1: &[C], d2: &[C]) -> Vec<C> {
        let s = (self.p2 / self.stage2_power(d1, d2)).sqrt();
        d2.iter().map(|z| z * s).collect()
    }

    /// MRC SNR of the second-stage relay observations (the `P2 → ∞` network):
    /// `P0 v^H (C C^H + I)^{-1} v`, `C = H D1`, `v = C f`, with `d1` made
    /// feasible first.
    pub fn mrc_snr(&self, d1: &[C]) -> f64 {
        let d1 = self.feasible1(d1);
        let m = self.g.len();
        let c = CMat::from_fn(m, self.f.len(), |i, j| self.h[(i, j)] * d1[j]);
        let v = &c * CVec::from_column_slice(&self.f);
        let k = &c * c.adjoint() + CMat::identity(m, m);
        let k_inv = k.try_inverse().expect("K is positive definite");
        (v.adjoint() * k_inv * v)[(0, 0)].re * self.p0
    }

    /// Random restarts followed by cyclic golden-section line searches over
    /// the real and imaginary parts of `d1`.
    pub fn mrc_search(&self, restarts: usize, seed: u64) -> f64 {
        let n = self.f.len();
        let to_c = |x: &[f64]| -> Vec<C> { (0..n).map(|i| C::new(x[2 * i], x[2 * i + 1])).collect() };
        let eval = |x: &[f64]| -> f64 {
            let d = to_c(x);
            if d.iter().all(|z| z.norm_sqr() == 0.0) {
                0.0
            } else {
                self.mrc_snr(&d)
            }
        };
        let mut rng = RngStream::new(seed, 0x30);
        let mut best = 0.0f64;
        for _ in 0..restarts {
            let mut x: Vec<f64> = (0..2 * n).map(|_| rng.next_uniform() * 2.0 - 1.0).collect();
            let mut fx = eval(&x);
            for _sweep in 0..200 {
                let before = fx;
                for k in 0..2 * n {
                    let (mut a, mut b) = (x[k] - 2.0, x[k] + 2.0);
                    let gr = (5f64.sqrt() - 1.0) / 2.0;
                    let at = |t: f64, x: &mut Vec<f64>| {
                        let old = x[k];
                        x[k] = t;
                        let v = eval(x);
                        x[k] = old;
                        v
                    };
                    for _ in 0..60 {
                        let c = b - gr * (b - a);
                        let d = a + gr * (b - a);
                        if at(c, &mut x) > at(d, &mut x) {
                            b = d;
                        } else {
                            a = c;
                        }
                    }
                    let t = (a + b) / 2.0;
                    let v = at(t, &mut x);
                    if v > fx {
                        x[k] = t;
                        fx = v;
                    }
                }
                // Keep the scale of x near one; the objective is scale-free.
                let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= nrm);
                if fx - before <= 1e-14 * fx {
                    break;
                }
            }
            best = best.max(fx);
        }
        best
    }
}

/// Random three-hop network, `N, M ∈ 1..=4`, powers in `[0.1, 100]`.
pub fn random_three_hop(rng: &mut RngStream) -> relaysim::threehop::ThreeHopNetwork {
    let n = 1 + (rng.next_uniform() * 4.0) as usize;
    let m = 1 + (rng.next_uniform() * 4.0) as usize;
    let mut power = || 10f64.powf(3.0 * rng.next_uniform() - 1.0);
    let (p0, p1, p2) = (power(), power(), power());
    let f = ComplexVector::new((0..n).map(|_| rng.next_cn01()).collect());
    let g = ComplexVector::new((0..m).map(|_| rng.next_cn01()).collect());
    let h = ComplexMatrix::new(m, n, (0..m * n).map(|_| rng.next_cn01()).collect()).unwrap();
    relaysim::threehop::ThreeHopNetwork::new(p0, f, p1, h, p2, g).unwrap()
}
