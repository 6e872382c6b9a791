//! User-centric UE-AP association.
//!
//! Each UE first picks the `⌈M/2⌉` APs with the largest large-scale gain.
//! Groups larger than the stream cap `N_s` are then cut down by one of three
//! policies: subset search on the equal-split surrogate sum rate
//! ([`propose_association`]), strongest-β selection ([`beta_association`]) or
//! a uniform random subset ([`random_association`]).

use std::io::Write;

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::topology::LongTermState;
use crate::transmission::log2_1p;

/// Largest number of candidate groups the subset search enumerates per AP.
pub const MAX_CANDIDATES_PER_AP: u128 = 1_000_000;

/// UE groups `U_m` together with the dual AP clusters `A_k`. Both views are
/// kept sorted and consistent: `k ∈ U_m ⇔ m ∈ A_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    num_ues: usize,
    ue_groups: Vec<Vec<usize>>,
    ap_clusters: Vec<Vec<usize>>,
    member: Vec<bool>,
}

impl Association {
    pub fn from_ue_groups(num_ues: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let num_aps = groups.len();
        let mut member = vec![false; num_aps * num_ues];
        let mut ue_groups = Vec::with_capacity(num_aps);
        for (m, mut g) in groups.into_iter().enumerate() {
            g.sort_unstable();
            g.dedup();
            if let Some(&k) = g.iter().find(|&&k| k >= num_ues) {
                return Err(Error::Precondition(format!(
                    "UE index {k} out of range in group of AP {m}"
                )));
            }
            for &k in &g {
                member[m * num_ues + k] = true;
            }
            ue_groups.push(g);
        }
        let ap_clusters = (0..num_ues)
            .map(|k| (0..num_aps).filter(|&m| member[m * num_ues + k]).collect())
            .collect();
        Ok(Self {
            num_ues,
            ue_groups,
            ap_clusters,
            member,
        })
    }

    pub fn from_ap_clusters(num_aps: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let num_ues = clusters.len();
        let mut groups = vec![Vec::new(); num_aps];
        for (k, cluster) in clusters.iter().enumerate() {
            for &m in cluster {
                if m >= num_aps {
                    return Err(Error::Precondition(format!(
                        "AP index {m} out of range in cluster of UE {k}"
                    )));
                }
                groups[m].push(k);
            }
        }
        Self::from_ue_groups(num_ues, groups)
    }

    pub fn num_aps(&self) -> usize {
        self.ue_groups.len()
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    /// `U_m`, ascending.
    pub fn ue_group(&self, m: usize) -> &[usize] {
        &self.ue_groups[m]
    }

    /// `A_k`, ascending.
    pub fn ap_cluster(&self, k: usize) -> &[usize] {
        &self.ap_clusters[k]
    }

    pub fn ue_groups(&self) -> &[Vec<usize>] {
        &self.ue_groups
    }

    #[inline]
    pub fn serves(&self, m: usize, k: usize) -> bool {
        self.member[m * self.num_ues + k]
    }

    pub fn group_size(&self, m: usize) -> usize {
        self.ue_groups[m].len()
    }

    /// Every group respects the stream cap.
    pub fn is_valid(&self, stream_cap: usize) -> bool {
        self.ue_groups.iter().all(|g| g.len() <= stream_cap)
    }

    /// Each group is a subset of the corresponding group in `other` with
    /// size `min(|U°_m|, N_s)`.
    pub fn refines(&self, other: &Association, stream_cap: usize) -> bool {
        self.num_aps() == other.num_aps()
            && self.ue_groups.iter().zip(&other.ue_groups).all(|(g, g0)| {
                g.len() == g0.len().min(stream_cap) && g.iter().all(|k| g0.binary_search(k).is_ok())
            })
    }

    pub fn check_duality(&self) -> bool {
        (0..self.num_aps()).all(|m| {
            (0..self.num_ues).all(|k| {
                let in_group = self.ue_groups[m].binary_search(&k).is_ok();
                let in_cluster = self.ap_clusters[k].binary_search(&m).is_ok();
                in_group == in_cluster && in_group == self.serves(m, k)
            })
        })
    }

    /// Edge list `m,k`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["m", "k"])?;
        for (m, g) in self.ue_groups.iter().enumerate() {
            for k in g {
                w.write_record([m.to_string(), k.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Indices sorted by descending score, lower index first on ties.
fn rank_descending(indices: impl Iterator<Item = usize>, score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut v: Vec<usize> = indices.collect();
    v.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
    v
}

/// Each UE picks the `⌈M/2⌉` APs with the largest β.
pub fn initial_association(lt: &LongTermState) -> Result<Association> {
    let num_aps = lt.num_aps();
    if num_aps == 0 {
        return Err(Error::Precondition("at least one AP is required".into()));
    }
    let take = num_aps.div_ceil(2);
    let clusters = (0..lt.num_ues())
        .map(|k| {
            let mut c = rank_descending(0..num_aps, |m| lt.beta(m, k));
            c.truncate(take);
            c
        })
        .collect();
    Association::from_ap_clusters(num_aps, clusters)
}

/// Surrogate sum rate `R′_sum` when every AP splits its budget equally over
/// all paths of its group, `b = B_m / (|U_m| L)`. Works on raw groups, which
/// may violate the stream cap.
pub fn equal_split_sum_rate(groups: &[&[usize]], lt: &LongTermState, config: &SystemConfig) -> f64 {
    let (num_aps, num_ues) = (lt.num_aps(), lt.num_ues());
    let n = config.antennas_per_ap as f64;
    let l = lt.num_paths() as f64;
    let mut member = vec![false; num_aps * num_ues];
    for (m, g) in groups.iter().enumerate() {
        for &k in g.iter() {
            member[m * num_ues + k] = true;
        }
    }
    // Per-AP: p_m, (|U_m| - 1) p_m 2^(-b_m), (|U_m| - 1) p_m 2^(-B_m), |U_m| p_m.
    let per_ap: Vec<[f64; 4]> = groups
        .iter()
        .enumerate()
        .map(|(m, g)| {
            if g.is_empty() {
                return [0.0; 4];
            }
            let size = g.len() as f64;
            let p = config.transmit_power(m) / size;
            let budget = config.budget(m);
            let b = budget / (size * l);
            [
                p,
                (size - 1.0) * p * (-b).exp2(),
                (size - 1.0) * p * (-budget).exp2(),
                size * p,
            ]
        })
        .collect();
    let mut first = 0.0;
    let mut interference_total = 0.0;
    for k in 0..num_ues {
        let (mut d, mut sgi, mut sgi_lower, mut igi) = (0.0, 0.0, 0.0, 0.0);
        for m in 0..num_aps {
            let gain = lt.beta(m, k) * n;
            let [p, sgi_w, sgi_lower_w, igi_w] = per_ap[m];
            if member[m * num_ues + k] {
                d += p * gain;
                sgi += sgi_w * gain;
                sgi_lower += sgi_lower_w * gain;
            } else {
                igi += igi_w * gain;
            }
        }
        first += log2_1p(d + sgi_lower + igi);
        interference_total += sgi + igi;
    }
    let kf = num_ues as f64;
    first - kf * log2_1p(interference_total / kf)
}

/// `R°_sum`-type evaluation on an [`Association`]: the surrogate sum rate at
/// the equal split.
pub fn surrogate_sum_rate_equal_bits(assoc: &Association, lt: &LongTermState, config: &SystemConfig) -> f64 {
    let groups: Vec<&[usize]> = assoc.ue_groups().iter().map(Vec::as_slice).collect();
    equal_split_sum_rate(&groups, lt, config)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Subset search: every AP whose initial group exceeds `N_s` tries all
/// `N_s`-subsets in lexicographic order while the other groups stay at their
/// initial values, keeping the last subset whose equal-split surrogate sum
/// rate is at least the incumbent's.
pub fn propose_association(
    initial: &Association,
    lt: &LongTermState,
    config: &SystemConfig,
) -> Result<Association> {
    let cap = config.stream_cap;
    for (m, g) in initial.ue_groups().iter().enumerate() {
        let candidates = binomial(g.len(), cap);
        if g.len() > cap && candidates > MAX_CANDIDATES_PER_AP {
            return Err(Error::TooManyCandidates {
                ap: m,
                candidates,
                limit: MAX_CANDIDATES_PER_AP,
            });
        }
    }
    let groups: Vec<Vec<usize>> = (0..initial.num_aps())
        .into_par_iter()
        .map(|m| best_group(initial, m, lt, config))
        .collect();
    Association::from_ue_groups(initial.num_ues(), groups)
}

fn best_group(initial: &Association, m: usize, lt: &LongTermState, config: &SystemConfig) -> Vec<usize> {
    let cap = config.stream_cap;
    let own = initial.ue_group(m);
    if own.len() <= cap {
        return own.to_vec();
    }
    let base: Vec<&[usize]> = initial.ue_groups().iter().map(Vec::as_slice).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for candidate in own.iter().copied().combinations(cap) {
        let mut groups = base.clone();
        groups[m] = &candidate;
        let value = equal_split_sum_rate(&groups, lt, config);
        if best.as_ref().is_none_or(|(_, v)| value >= *v) {
            best = Some((candidate.clone(), value));
        }
    }
    best.map(|(g, _)| g).unwrap_or_default()
}

/// Each AP keeps the `min(|U°_m|, N_s)` UEs of its initial group with the
/// largest β.
pub fn beta_association(initial: &Association, lt: &LongTermState, config: &SystemConfig) -> Result<Association> {
    let groups = initial
        .ue_groups()
        .iter()
        .enumerate()
        .map(|(m, g)| {
            let mut ranked = rank_descending(g.iter().copied(), |k| lt.beta(m, k));
            ranked.truncate(config.stream_cap);
            ranked
        })
        .collect();
    Association::from_ue_groups(initial.num_ues(), groups)
}

/// Each AP keeps a uniformly random `min(|U°_m|, N_s)`-subset of its
/// initial group.
pub fn random_association<R: Rng + ?Sized>(
    initial: &Association,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Association> {
    let cap = config.stream_cap;
    let groups = initial
        .ue_groups()
        .iter()
        .map(|g| {
            if g.len() <= cap {
                g.clone()
            } else {
                rand::seq::index::sample(rng, g.len(), cap)
                    .into_iter()
                    .map(|i| g[i])
                    .collect()
            }
        })
        .collect();
    Association::from_ue_groups(initial.num_ues(), groups)
}
