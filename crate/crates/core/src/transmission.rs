//! Zero-forcing transmission, exact rates and their closed-form surrogate.

use num_complex::Complex64;
use rand::Rng;

use crate::association::Association;
use crate::channel::{self, ChannelSet, ShortTermState};
use crate::config::{PhaseMode, SystemConfig};
use crate::cvec::{self, CVec};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::tensor::PathTensor;
use crate::topology::LongTermState;

/// Relative residual below which a projected direction counts as zero.
const NULL_TOL: f64 = 1e-10;

/// Beamformers `w_{m,k}` and powers `p_{m,k}` for every associated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    num_ues: usize,
    vectors: Vec<Option<CVec>>,
    powers: Vec<f64>,
}

impl Precoder {
    pub fn num_aps(&self) -> usize {
        self.vectors.len() / self.num_ues.max(1)
    }

    pub fn vector(&self, m: usize, k: usize) -> Option<&[Complex64]> {
        self.vectors[m * self.num_ues + k].as_deref()
    }

    pub fn power(&self, m: usize, k: usize) -> f64 {
        self.powers[m * self.num_ues + k]
    }

    /// Multiplies every beam of AP `m` by `e^{j phases[m]}`.
    pub fn rotate_ap_phases(&mut self, phases: &[f64]) {
        for (m, chunk) in self.vectors.chunks_mut(self.num_ues).enumerate() {
            let rot = Complex64::from_polar(1.0, phases[m]);
            for w in chunk.iter_mut().flatten() {
                cvec::scale(w, rot);
            }
        }
    }
}

/// Unit vectors orthogonal to all other directions of the group, each the
/// normalized projection of its own direction onto that null space. When the
/// projection vanishes (for instance a zero direction), some unit vector of
/// the null space is used instead.
pub fn zf_directions(directions: &[&[Complex64]], antennas: usize) -> std::result::Result<Vec<CVec>, usize> {
    let mut out = Vec::with_capacity(directions.len());
    for (i, own) in directions.iter().enumerate() {
        let others = orthonormal_others(directions, i);
        let own_norm = cvec::norm(own);
        let mut w = own.to_vec();
        cvec::project_out(&mut w, &others);
        let n = cvec::norm(&w);
        if own_norm > 0.0 && n > NULL_TOL * own_norm {
            cvec::scale(&mut w, Complex64::from(1.0 / n));
            out.push(w);
            continue;
        }
        // Fallback: the canonical basis vector with the largest residual.
        let mut best: Option<(CVec, f64)> = None;
        for a in 0..antennas {
            let mut e = vec![Complex64::new(0.0, 0.0); antennas];
            e[a] = Complex64::new(1.0, 0.0);
            cvec::project_out(&mut e, &others);
            let r = cvec::norm(&e);
            if best.as_ref().is_none_or(|(_, b)| r > *b) {
                best = Some((e, r));
            }
        }
        match best {
            Some((mut e, r)) if r > NULL_TOL => {
                cvec::scale(&mut e, Complex64::from(1.0 / r));
                out.push(e);
            }
            _ => return Err(i),
        }
    }
    Ok(out)
}

fn orthonormal_others(directions: &[&[Complex64]], skip: usize) -> Vec<CVec> {
    cvec::orthonormal_basis(
        directions
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != skip)
            .map(|(_, d)| *d),
        NULL_TOL,
    )
}

/// ZF precoder from (quantized) channels with equal power `P_m / |U_m|`.
pub fn zf_precoder(q_channels: &ChannelSet, assoc: &Association, config: &SystemConfig) -> Result<Precoder> {
    let (num_aps, num_ues, antennas) = (q_channels.num_aps(), q_channels.num_ues(), q_channels.antennas());
    let mut vectors = vec![None; num_aps * num_ues];
    let mut powers = vec![0.0; num_aps * num_ues];
    for m in 0..num_aps {
        let group = assoc.ue_group(m);
        if group.is_empty() {
            continue;
        }
        if group.len() > antennas {
            return Err(Error::Precondition(format!(
                "AP {m} serves {} UEs with {antennas} antennas",
                group.len()
            )));
        }
        let dirs: Vec<&[Complex64]> = group.iter().map(|&k| q_channels.get(m, k)).collect();
        let beams = zf_directions(&dirs, antennas).map_err(|i| Error::RankDeficient { ap: m, ue: group[i] })?;
        let p = config.transmit_power(m) / group.len() as f64;
        for (&k, w) in group.iter().zip(beams) {
            vectors[m * num_ues + k] = Some(w);
            powers[m * num_ues + k] = p;
        }
    }
    Ok(Precoder {
        num_ues,
        vectors,
        powers,
    })
}

/// Reference precoder built from long-term elements only: each UE's
/// direction is `√(βN) Σ_l √κ_l a(θ_l)` (all path gains set to one), then
/// zero-forced as in [`zf_precoder`].
pub fn angle_based_zf(lt: &LongTermState, assoc: &Association, config: &SystemConfig) -> Result<Precoder> {
    let ones = PathTensor::filled(lt.num_aps(), lt.num_ues(), lt.num_paths(), Complex64::new(1.0, 0.0));
    let directions = channel::synthesize_channel(lt, &ones, config.antennas_per_ap)?;
    zf_precoder(&directions, assoc, config)
}

/// Received desired, same-group and inter-group powers at one UE.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkPowers {
    pub desired: f64,
    pub sgi: f64,
    pub igi: f64,
}

/// Exact per-UE powers for one channel realization. Contributions of
/// different APs to the same stream add coherently.
pub fn exact_powers(true_channels: &ChannelSet, precoder: &Precoder, assoc: &Association) -> Vec<LinkPowers> {
    let num_ues = assoc.num_ues();
    let mut out = vec![LinkPowers::default(); num_ues];
    for (k, slot) in out.iter_mut().enumerate() {
        for j in 0..num_ues {
            let mut inside = Complex64::new(0.0, 0.0);
            let mut outside = Complex64::new(0.0, 0.0);
            for &m in assoc.ap_cluster(j) {
                let Some(w) = precoder.vector(m, j) else { continue };
                let term = cvec::inner(true_channels.get(m, k), w) * precoder.power(m, j).sqrt();
                if assoc.serves(m, k) {
                    inside += term;
                } else {
                    outside += term;
                }
            }
            if j == k {
                slot.desired = inside.norm_sqr();
            } else {
                slot.sgi += inside.norm_sqr();
                slot.igi += outside.norm_sqr();
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub desired: Vec<f64>,
    pub sgi: Vec<f64>,
    pub igi: Vec<f64>,
    pub rate: Vec<f64>,
    pub sum_rate: f64,
}

/// `log2(1 + x)`, accurate for the tiny SINRs of far-away links.
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// `R_k = log2(1 + D_k / (1 + I_SGI + I_IGI))` under unit noise.
pub fn achievable_rates(powers: &[LinkPowers]) -> RateReport {
    let rate: Vec<f64> = powers
        .iter()
        .map(|p| log2_1p(p.desired / (1.0 + p.sgi + p.igi)))
        .collect();
    RateReport {
        desired: powers.iter().map(|p| p.desired).collect(),
        sgi: powers.iter().map(|p| p.sgi).collect(),
        igi: powers.iter().map(|p| p.igi).collect(),
        sum_rate: rate.iter().sum(),
        rate,
    }
}

/// Closed-form long-term quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateReport {
    pub d_bound: Vec<f64>,
    pub sgi_bound: Vec<f64>,
    pub igi_bound: Vec<f64>,
    /// SGI bound with every path loaded with the AP's whole budget.
    pub sgi_lower: Vec<f64>,
    /// `R′_k`.
    pub r_alt: Vec<f64>,
    /// `R′_sum`, the Jensen-type lower bound on `Σ R′_k`.
    pub r_sum_alt: f64,
    /// `R′_sum` of the same association at the equal split.
    pub r_sum_equal: f64,
}

impl SurrogateReport {
    pub fn sum_r_alt(&self) -> f64 {
        self.r_alt.iter().sum()
    }
}

/// Upper bounds on the averaged powers and the alternative rates built on
/// them. `p_{m,k}` is evaluated as `P_m / |U_m|`.
pub fn surrogate_metrics(
    assoc: &Association,
    lt: &LongTermState,
    bits: &PathTensor<f64>,
    config: &SystemConfig,
) -> SurrogateReport {
    let terms = surrogate_terms(assoc, lt, bits, config);
    let equal = crate::allocation::equal_allocation(assoc, config);
    let equal_terms = surrogate_terms(assoc, lt, &equal.bits, config);
    let r_alt = terms
        .iter()
        .map(|t| log2_1p(t.d / (1.0 + t.sgi + t.igi)))
        .collect();
    SurrogateReport {
        d_bound: terms.iter().map(|t| t.d).collect(),
        sgi_bound: terms.iter().map(|t| t.sgi).collect(),
        igi_bound: terms.iter().map(|t| t.igi).collect(),
        sgi_lower: terms.iter().map(|t| t.sgi_lower).collect(),
        r_alt,
        r_sum_alt: jensen_sum_rate(&terms),
        r_sum_equal: jensen_sum_rate(&equal_terms),
    }
}

struct BoundTerms {
    d: f64,
    sgi: f64,
    igi: f64,
    sgi_lower: f64,
}

fn surrogate_terms(
    assoc: &Association,
    lt: &LongTermState,
    bits: &PathTensor<f64>,
    config: &SystemConfig,
) -> Vec<BoundTerms> {
    let n = config.antennas_per_ap as f64;
    let power = |m: usize| {
        let size = assoc.group_size(m);
        if size == 0 {
            0.0
        } else {
            config.transmit_power(m) / size as f64
        }
    };
    (0..assoc.num_ues())
        .map(|k| {
            let d = assoc
                .ap_cluster(k)
                .iter()
                .map(|&m| power(m) * lt.beta(m, k) * n)
                .sum();
            let (mut sgi, mut igi, mut sgi_lower) = (0.0, 0.0, 0.0);
            for j in (0..assoc.num_ues()).filter(|&j| j != k) {
                for &m in assoc.ap_cluster(j) {
                    let base = power(m) * lt.beta(m, k) * n;
                    if assoc.serves(m, k) {
                        let kappa = lt.kappa(m, k);
                        let residual: f64 = kappa
                            .iter()
                            .zip(bits.link(m, k))
                            .map(|(kap, b)| kap * (-b).exp2())
                            .sum();
                        let floor: f64 = kappa.iter().sum::<f64>() * (-config.budget(m)).exp2();
                        sgi += base * residual;
                        sgi_lower += base * floor;
                    } else {
                        igi += base;
                    }
                }
            }
            BoundTerms { d, sgi, igi, sgi_lower }
        })
        .collect()
}

fn jensen_sum_rate(terms: &[BoundTerms]) -> f64 {
    let k = terms.len() as f64;
    let first: f64 = terms
        .iter()
        .map(|t| log2_1p(t.d + t.sgi_lower + t.igi))
        .sum();
    let mean_interference = terms.iter().map(|t| t.sgi + t.igi).sum::<f64>() / k;
    first - k * log2_1p(mean_interference)
}

/// Where the beams of one realization come from.
#[derive(Debug, Clone, Copy)]
pub enum BeamSource<'a> {
    /// ZF on channels rebuilt from gains quantized with these bit loads.
    Quantized(&'a PathTensor<f64>),
    /// ZF on the true channels.
    Exact,
    /// A fixed precoder independent of the realization.
    Fixed(&'a Precoder),
}

/// Draws consumed by one channel realization.
pub struct RealizationDraws<'a, R: Rng + ?Sized> {
    pub short_term: &'a ShortTermState,
    pub quant_rng: &'a mut R,
    pub ap_phases: &'a [f64],
}

/// Exact powers of one realization: synthesize `h`, build the beams from
/// `source`, apply per-AP phases when APs are not phase-aligned, and measure.
pub fn realization_powers<R: Rng + ?Sized>(
    lt: &LongTermState,
    assoc: &Association,
    source: BeamSource<'_>,
    config: &SystemConfig,
    draws: RealizationDraws<'_, R>,
) -> Result<Vec<LinkPowers>> {
    let antennas = config.antennas_per_ap;
    let h = channel::synthesize_channel(lt, &draws.short_term.gains, antennas)?;
    let mut precoder = match source {
        BeamSource::Quantized(bits) => {
            let q = channel::quantize_state(draws.short_term, bits, assoc, draws.quant_rng, config.quant_model)?;
            let h_hat = channel::synthesize_channel(lt, &q.q_gains, antennas)?;
            zf_precoder(&h_hat, assoc, config)?
        }
        BeamSource::Exact => zf_precoder(&h, assoc, config)?,
        BeamSource::Fixed(p) => p.clone(),
    };
    if config.ap_phase == PhaseMode::Independent {
        precoder.rotate_ap_phases(draws.ap_phases);
    }
    Ok(exact_powers(&h, &precoder, assoc))
}

/// Uniform phases in `[0, 2π)`, one per AP.
pub fn draw_ap_phases<R: Rng + ?Sized>(num_aps: usize, rng: &mut R) -> Vec<f64> {
    (0..num_aps)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect()
}

/// Monte Carlo estimate against closed-form bound for one quantity at one UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
}

impl BoundCheck {
    /// `mean ≤ bound + 3σ`, with a small relative slack for round-off in
    /// tight cases.
    pub fn holds(&self) -> bool {
        self.mean <= self.bound + 3.0 * self.std_error + 1e-12 * self.bound.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeBoundReport {
    pub ue: usize,
    pub desired: BoundCheck,
    pub sgi: BoundCheck,
    pub igi: BoundCheck,
}

impl UeBoundReport {
    pub fn holds(&self) -> bool {
        self.desired.holds() && self.sgi.holds() && self.igi.holds()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma3Report {
    pub realizations: usize,
    pub ues: Vec<UeBoundReport>,
}

impl Lemma3Report {
    pub fn all_hold(&self) -> bool {
        self.ues.iter().all(UeBoundReport::holds)
    }

    pub fn failures(&self) -> Vec<usize> {
        self.ues.iter().filter(|u| !u.holds()).map(|u| u.ue).collect()
    }
}

/// Stream index separating bound-verification draws from simulation drops.
const LEMMA3_STREAM: u64 = u64::MAX;

/// Checks the averaged-power bounds by Monte Carlo over fresh path gains,
/// quantization noise and AP phases.
pub fn verify_lemma3(
    lt: &LongTermState,
    assoc: &Association,
    bits: &PathTensor<f64>,
    config: &SystemConfig,
    n_realizations: usize,
) -> Result<Lemma3Report> {
    if n_realizations < 1000 {
        return Err(Error::Precondition(format!(
            "bound verification needs at least 1000 realizations, got {n_realizations}"
        )));
    }
    let surrogate = surrogate_metrics(assoc, lt, bits, config);
    let num_ues = assoc.num_ues();
    let mut acc = vec![[Moments::default(); 3]; num_ues];
    let seed = config.master_seed;
    for r in 0..n_realizations as u64 {
        let st = channel::draw_short_term(config, &mut rng::stream(seed, Purpose::ShortTerm, &[LEMMA3_STREAM, r]));
        let mut quant_rng = rng::stream(seed, Purpose::Quantization, &[LEMMA3_STREAM, r]);
        let phases = draw_ap_phases(lt.num_aps(), &mut rng::stream(seed, Purpose::Phase, &[LEMMA3_STREAM, r]));
        let powers = realization_powers(
            lt,
            assoc,
            BeamSource::Quantized(bits),
            config,
            RealizationDraws {
                short_term: &st,
                quant_rng: &mut quant_rng,
                ap_phases: &phases,
            },
        )?;
        for (a, p) in acc.iter_mut().zip(&powers) {
            a[0].push(p.desired);
            a[1].push(p.sgi);
            a[2].push(p.igi);
        }
    }
    let ues = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let check = |mo: &Moments, bound: f64| BoundCheck {
                mean: mo.mean(),
                std_error: mo.std_error(),
                bound,
            };
            UeBoundReport {
                ue: k,
                desired: check(&a[0], surrogate.d_bound[k]),
                sgi: check(&a[1], surrogate.sgi_bound[k]),
                igi: check(&a[2], surrogate.igi_bound[k]),
            }
        })
        .collect();
    Ok(Lemma3Report {
        realizations: n_realizations,
        ues,
    })
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}
