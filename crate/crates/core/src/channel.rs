//! Saleh-Valenzuela channel synthesis and rate-distortion quantization of
//! path gains.
//!
//! A link `(m, k)` is `h = √(βN) Σ_l √κ_l g_l a(θ_l)` with `g_l ~ CN(0, 1)`.
//! Only the path gains are fed back; AoDs and large-scale terms are known at
//! both ends, so the AP rebuilds `ĥ` from quantized gains with the same
//! formula.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::association::Association;
use crate::config::SystemConfig;
use crate::cvec::CVec;
use crate::error::{Error, Result};
use crate::tensor::PathTensor;
use crate::topology::LongTermState;

/// ULA response with half-wavelength spacing, unit norm.
pub fn steering_vector(theta: f64, n: usize) -> CVec {
    let amp = 1.0 / (n as f64).sqrt();
    let phase = PI * theta.sin();
    (0..n)
        .map(|i| Complex64::from_polar(amp, phase * i as f64))
        .collect()
}

/// One `CN(0, 1)` draw.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortTermState {
    pub gains: PathTensor<Complex64>,
}

pub fn draw_short_term<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ShortTermState {
    let (m, k, l) = (config.num_aps, config.num_ues, config.num_paths);
    let data = (0..m * k * l).map(|_| standard_complex_normal(rng)).collect();
    ShortTermState {
        gains: PathTensor::from_vec(m, k, l, data),
    }
}

/// Per-link channel vectors, indexed `(m, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    num_aps: usize,
    num_ues: usize,
    antennas: usize,
    vectors: Vec<CVec>,
}

impl ChannelSet {
    pub fn new(num_aps: usize, num_ues: usize, antennas: usize, vectors: Vec<CVec>) -> Result<Self> {
        if vectors.len() != num_aps * num_ues || vectors.iter().any(|v| v.len() != antennas) {
            return Err(Error::Precondition("channel set shape mismatch".into()));
        }
        Ok(Self {
            num_aps,
            num_ues,
            antennas,
            vectors,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> &[Complex64] {
        &self.vectors[m * self.num_ues + k]
    }
}

/// `√(βN) Σ_l √κ_l g_l a(θ_l)` for a single link.
pub fn synthesize_link(
    beta: f64,
    kappa: &[f64],
    theta: &[f64],
    gains: &[Complex64],
    antennas: usize,
) -> CVec {
    let mut h = vec![Complex64::new(0.0, 0.0); antennas];
    let outer = (beta * antennas as f64).sqrt();
    for ((kap, th), g) in kappa.iter().zip(theta).zip(gains) {
        if *g == Complex64::new(0.0, 0.0) {
            continue;
        }
        let coef = *g * (outer * kap.sqrt());
        for (hi, ai) in h.iter_mut().zip(steering_vector(*th, antennas)) {
            *hi += coef * ai;
        }
    }
    h
}

/// Builds every link vector from the given path gains. Used identically for
/// true gains `g` and reconstructions `ĝ`.
pub fn synthesize_channel(
    lt: &LongTermState,
    gains: &PathTensor<Complex64>,
    antennas: usize,
) -> Result<ChannelSet> {
    if gains.shape() != lt.kappa_tensor().shape() {
        return Err(Error::Precondition(format!(
            "gain tensor shape {:?} does not match long-term state {:?}",
            gains.shape(),
            lt.kappa_tensor().shape()
        )));
    }
    let mut vectors = Vec::with_capacity(lt.num_aps() * lt.num_ues());
    for m in 0..lt.num_aps() {
        for k in 0..lt.num_ues() {
            vectors.push(synthesize_link(
                lt.beta(m, k),
                lt.kappa(m, k),
                lt.theta(m, k),
                gains.link(m, k),
                antennas,
            ));
        }
    }
    ChannelSet::new(lt.num_aps(), lt.num_ues(), antennas, vectors)
}

/// Minimum mean-square distortion of a Gaussian source of variance `sigma2`
/// coded at `rate` bits per sample.
pub fn rate_distortion(sigma2: f64, rate: f64) -> f64 {
    if rate <= 0.0 {
        sigma2
    } else {
        sigma2 * (-2.0 * rate).exp2()
    }
}

/// Minimum rate achieving distortion `distortion`; zero once the distortion
/// reaches the source variance.
pub fn rate_for_distortion(sigma2: f64, distortion: f64) -> f64 {
    if distortion >= sigma2 {
        0.0
    } else {
        0.5 * (sigma2 / distortion).log2()
    }
}

/// Joint law assumed between a path gain and its reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantModel {
    /// Gaussian test channel achieving the rate-distortion bound:
    /// `ĝ = (1 − D) g + z`, `z ~ CN(0, D(1 − D))`, `D = 2^(−b)`. The error
    /// `g − ĝ` is independent of `ĝ`.
    #[default]
    TestChannel,
    /// `ĝ = g − Δ` with `Δ ~ CN(0, 2^(−b))` independent of `g`; only defined
    /// for `b > 0`.
    ErrorInjection,
}

impl std::str::FromStr for QuantModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test_channel" => Ok(QuantModel::TestChannel),
            "error_injection" => Ok(QuantModel::ErrorInjection),
            other => Err(Error::InvalidConfig(format!("unknown quant model `{other}`"))),
        }
    }
}

/// Reconstruction of `g` at `bits` bits given a pre-drawn `CN(0, 1)` sample
/// `noise`. Keeping the noise outside lets schemes with different bit loads
/// share the same underlying draws.
pub fn quantize_with_noise(g: Complex64, bits: f64, noise: Complex64, model: QuantModel) -> Result<Complex64> {
    if !(bits >= 0.0) {
        return Err(Error::Precondition(format!("bit load must be non-negative, got {bits}")));
    }
    let d = (-bits).exp2();
    match model {
        QuantModel::TestChannel => {
            if bits == 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            Ok(g * (1.0 - d) + noise * (d * (1.0 - d)).sqrt())
        }
        QuantModel::ErrorInjection => {
            if bits == 0.0 {
                return Err(Error::Unsupported(
                    "error-injection quantization at zero bits".into(),
                ));
            }
            Ok(g - noise * d.sqrt())
        }
    }
}

pub fn quantize_gain<R: Rng + ?Sized>(
    g: Complex64,
    bits: f64,
    rng: &mut R,
    model: QuantModel,
) -> Result<Complex64> {
    quantize_with_noise(g, bits, standard_complex_normal(rng), model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedState {
    pub q_gains: PathTensor<Complex64>,
    pub bits: PathTensor<f64>,
}

/// Quantizes every associated link's path gains. One noise sample is drawn
/// for every `(m, k, l)` in fixed order whether or not the link is fed back,
/// so the stream position of a triple never depends on the association.
pub fn quantize_state<R: Rng + ?Sized>(
    st: &ShortTermState,
    bits: &PathTensor<f64>,
    assoc: &Association,
    rng: &mut R,
    model: QuantModel,
) -> Result<QuantizedState> {
    let (mc, kc, lc) = st.gains.shape();
    if bits.shape() != st.gains.shape() {
        return Err(Error::Precondition("bit tensor shape mismatch".into()));
    }
    let mut q = PathTensor::filled(mc, kc, lc, Complex64::new(0.0, 0.0));
    for m in 0..mc {
        for k in 0..kc {
            let served = assoc.serves(m, k);
            for l in 0..lc {
                let noise = standard_complex_normal(rng);
                let b = *bits.get(m, k, l);
                if !served {
                    if b != 0.0 {
                        return Err(Error::Precondition(format!(
                            "bits allocated to unassociated link ({m}, {k})"
                        )));
                    }
                    continue;
                }
                q.set(m, k, l, quantize_with_noise(*st.gains.get(m, k, l), b, noise, model)?);
            }
        }
    }
    Ok(QuantizedState {
        q_gains: q,
        bits: bits.clone(),
    })
}

/// Per-path distortion diagnostics: `m,k,l,bits,expected_distortion,squared_error`.
pub fn write_distortion_csv<W: Write>(
    st: &ShortTermState,
    q: &QuantizedState,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["m", "k", "l", "bits", "expected_distortion", "squared_error"])?;
    let (mc, kc, lc) = st.gains.shape();
    for m in 0..mc {
        for k in 0..kc {
            for l in 0..lc {
                let b = *q.bits.get(m, k, l);
                let err = (*st.gains.get(m, k, l) - *q.q_gains.get(m, k, l)).norm_sqr();
                w.write_record([
                    m.to_string(),
                    k.to_string(),
                    l.to_string(),
                    format!("{b:.9e}"),
                    format!("{:.9e}", (-b).exp2()),
                    format!("{err:.9e}"),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
