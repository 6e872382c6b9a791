//! Feedback-bit allocation.
//!
//! Every allocator here solves some instance of
//!
//! ```text
//! minimize Σ_i w_i 2^(−b_i)   subject to   Σ_i b_i = B,  b_i ≥ 0
//! ```
//!
//! whose KKT solution is `b_i = [log2 w_i − λ]⁺`. The AP side uses weights
//! `β_{m,k} κ_{m,k,l}` over all paths of its group; the UE side re-splits the
//! per-UE total over its own paths with weights `κ_{m,k,l}`. The common factor
//! `(|U_m| − 1) p_m` of the AP objective only shifts `λ` and is dropped.

use std::io::Write;

use crate::association::Association;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::tensor::PathTensor;
use crate::topology::LongTermState;

/// Bit load used as the perfect-CSI proxy (distortion `2^(−60)`).
pub const PERFECT_CSI_BITS: f64 = 60.0;

/// Weights below this are treated as zero.
pub const MIN_WEIGHT: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    pub levels: Vec<f64>,
    /// Water level `λ` in the log2 domain; `None` for a degenerate instance.
    pub lambda: Option<f64>,
    /// Every weight was zero: the objective is flat and the budget was split
    /// equally.
    pub degenerate: bool,
}

/// `Σ w_i 2^(−b_i)`.
pub fn objective(weights: &[f64], levels: &[f64]) -> f64 {
    weights.iter().zip(levels).map(|(w, b)| w * (-b).exp2()).sum()
}

/// Exact water-filling by active-set search.
///
/// Weights are ranked in decreasing order; the active set is the longest
/// prefix whose last member still sits strictly above the water level that
/// prefix implies.
pub fn waterfill(weights: &[f64], budget: f64) -> Result<WaterFill> {
    if weights.is_empty() {
        return Err(Error::Precondition("water-filling over zero variables".into()));
    }
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::Precondition(format!("invalid budget {budget}")));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Precondition(format!("invalid weight {w}")));
    }
    let n = weights.len();
    let logs: Vec<f64> = weights
        .iter()
        .map(|&w| if w < MIN_WEIGHT { f64::NEG_INFINITY } else { w.log2() })
        .collect();
    let mut order: Vec<usize> = (0..n).filter(|&i| logs[i].is_finite()).collect();
    if order.is_empty() {
        return Ok(WaterFill {
            levels: vec![budget / n as f64; n],
            lambda: None,
            degenerate: true,
        });
    }
    order.sort_by(|&a, &b| logs[b].total_cmp(&logs[a]).then(a.cmp(&b)));

    let mut active = 1;
    let mut prefix = logs[order[0]];
    let mut lambda = prefix - budget;
    for (count, &i) in order.iter().enumerate().skip(1) {
        let candidate = (prefix + logs[i] - budget) / (count + 1) as f64;
        if logs[i] > candidate {
            prefix += logs[i];
            lambda = candidate;
            active = count + 1;
        } else {
            break;
        }
    }

    let mut levels = vec![0.0; n];
    for &i in &order[..active] {
        levels[i] = (logs[i] - lambda).max(0.0);
    }
    // Absorb rounding so the budget holds exactly.
    let last = order[active - 1];
    let others: f64 = order[..active - 1].iter().map(|&i| levels[i]).sum();
    levels[last] = (budget - others).max(0.0);
    Ok(WaterFill {
        levels,
        lambda: Some(lambda),
        degenerate: false,
    })
}

/// Exact minimizer of `Σ w 2^(−b)` over allocations that are multiples of
/// `step` and sum to `budget`. Solved by dynamic programming over the number
/// of grid units spent, which visits the same search space as enumerating
/// every grid point.
pub fn grid_oracle(weights: &[f64], budget: f64, step: f64) -> Result<(Vec<f64>, f64)> {
    const MAX_VARS: usize = 6;
    if weights.is_empty() || weights.len() > MAX_VARS {
        return Err(Error::Precondition(format!(
            "grid oracle supports 1..={MAX_VARS} variables, got {}",
            weights.len()
        )));
    }
    if !(step > 0.0) || budget < 0.0 {
        return Err(Error::Precondition("grid oracle needs step > 0 and budget ≥ 0".into()));
    }
    let units_f = budget / step;
    let units = units_f.round() as usize;
    if (units_f - units as f64).abs() > 1e-9 * units_f.max(1.0) {
        return Err(Error::Precondition(format!(
            "step {step} does not divide budget {budget}"
        )));
    }
    let decay: Vec<f64> = (0..=units).map(|u| (-(u as f64 * step)).exp2()).collect();
    // best[i][u]: minimal cost of variables i.. spending exactly u units.
    let n = weights.len();
    let mut best = vec![vec![f64::INFINITY; units + 1]; n + 1];
    let mut choice = vec![vec![0usize; units + 1]; n];
    best[n][0] = 0.0;
    for i in (0..n).rev() {
        for u in 0..=units {
            let mut top = f64::INFINITY;
            let mut arg = 0;
            for take in 0..=u {
                let rest = best[i + 1][u - take];
                if rest.is_finite() {
                    let c = weights[i] * decay[take] + rest;
                    if c < top {
                        top = c;
                        arg = take;
                    }
                }
            }
            best[i][u] = top;
            choice[i][u] = arg;
        }
    }
    let mut levels = Vec::with_capacity(n);
    let mut left = units;
    for row in &choice {
        let take = row[left];
        levels.push(take as f64 * step);
        left -= take;
    }
    Ok((levels, best[0][units]))
}

/// Per-path bit loads with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BitAllocation {
    pub bits: PathTensor<f64>,
    /// `λ′_m` per AP.
    pub water_levels: Vec<Option<f64>>,
    /// `λ″_{m,k}`, filled by the UE-side split.
    pub ue_water_levels: Vec<Option<f64>>,
    /// APs whose water-filling weights were all zero and fell back to an
    /// equal split.
    pub degenerate_aps: Vec<bool>,
}

impl BitAllocation {
    fn empty(num_aps: usize, num_ues: usize, num_paths: usize) -> Self {
        Self {
            bits: PathTensor::filled(num_aps, num_ues, num_paths, 0.0),
            water_levels: vec![None; num_aps],
            ue_water_levels: vec![None; num_aps * num_ues],
            degenerate_aps: vec![false; num_aps],
        }
    }

    /// `b_{m,k} = Σ_l b_{m,k,l}`.
    pub fn ue_total(&self, m: usize, k: usize) -> f64 {
        self.bits.link(m, k).iter().sum()
    }

    pub fn ap_total(&self, m: usize) -> f64 {
        (0..self.bits.num_ues()).map(|k| self.ue_total(m, k)).sum()
    }

    /// Checks non-negativity, zero loads outside the association and, for
    /// every non-empty group, that the AP's loads sum to its budget.
    pub fn audit(&self, assoc: &Association, config: &SystemConfig, tol: f64) -> Result<()> {
        let (num_aps, num_ues, _) = self.bits.shape();
        for m in 0..num_aps {
            for k in 0..num_ues {
                let link = self.bits.link(m, k);
                if link.iter().any(|b| !(*b >= 0.0)) {
                    return Err(Error::Precondition(format!("negative bits on link ({m}, {k})")));
                }
                if !assoc.serves(m, k) && link.iter().any(|b| *b != 0.0) {
                    return Err(Error::Precondition(format!(
                        "bits on unassociated link ({m}, {k})"
                    )));
                }
            }
            if assoc.group_size(m) > 0 {
                let allocated = self.ap_total(m);
                let budget = config.budget(m);
                if (allocated - budget).abs() > tol {
                    return Err(Error::BudgetMismatch {
                        ap: m,
                        allocated,
                        budget,
                    });
                }
            }
        }
        Ok(())
    }

    /// Rows `m,k,l,bits,lambda` for every associated path; `lambda` is the
    /// AP water level `λ′_m` (empty when degenerate).
    pub fn write_csv<W: Write>(&self, assoc: &Association, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["m", "k", "l", "bits", "lambda"])?;
        for m in 0..self.bits.num_aps() {
            let lambda = self.water_levels[m].map(|x| format!("{x:.9e}")).unwrap_or_default();
            for &k in assoc.ue_group(m) {
                for (l, b) in self.bits.link(m, k).iter().enumerate() {
                    w.write_record([
                        m.to_string(),
                        k.to_string(),
                        l.to_string(),
                        format!("{b:.9e}"),
                        lambda.clone(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// AP-side water-filling of `B_m` over the `|U_m| L` weights
/// `β_{m,k} κ_{m,k,l}`. A single-UE group has no same-group interference to
/// suppress; its objective is identically zero and the budget is split
/// equally over the UE's paths.
pub fn allocate_ap_bits(assoc: &Association, lt: &LongTermState, config: &SystemConfig) -> Result<BitAllocation> {
    let l_count = lt.num_paths();
    let mut out = BitAllocation::empty(lt.num_aps(), lt.num_ues(), l_count);
    for m in 0..lt.num_aps() {
        let group = assoc.ue_group(m);
        if group.is_empty() {
            continue;
        }
        let budget = config.budget(m);
        let fill = if group.len() == 1 {
            WaterFill {
                levels: vec![budget / l_count as f64; l_count],
                lambda: None,
                degenerate: true,
            }
        } else {
            let weights: Vec<f64> = group
                .iter()
                .flat_map(|&k| lt.kappa(m, k).iter().map(move |kap| lt.beta(m, k) * kap))
                .collect();
            waterfill(&weights, budget)?
        };
        for (i, &k) in group.iter().enumerate() {
            out.bits
                .link_mut(m, k)
                .copy_from_slice(&fill.levels[i * l_count..(i + 1) * l_count]);
        }
        out.water_levels[m] = fill.lambda;
        out.degenerate_aps[m] = fill.degenerate;
    }
    Ok(out)
}

/// UE-side split of the per-UE budget `b_{m,k}` over the UE's own paths.
pub fn split_ue_bits(lt: &LongTermState, m: usize, k: usize, budget: f64) -> Result<WaterFill> {
    waterfill(lt.kappa(m, k), budget)
}

/// Announces only the per-UE totals of `ap_alloc` and lets every UE split
/// its total over its paths, as happens in the protocol.
pub fn resplit_at_ues(ap_alloc: &BitAllocation, lt: &LongTermState, assoc: &Association) -> Result<BitAllocation> {
    let mut out = ap_alloc.clone();
    for m in 0..lt.num_aps() {
        for &k in assoc.ue_group(m) {
            let fill = split_ue_bits(lt, m, k, ap_alloc.ue_total(m, k))?;
            out.bits.link_mut(m, k).copy_from_slice(&fill.levels);
            out.ue_water_levels[m * lt.num_ues() + k] = fill.lambda;
        }
    }
    Ok(out)
}

/// Whether the UE-side re-split reproduces the AP-side per-path loads within
/// `1e-6` on every link of a non-degenerate AP.
pub fn consistency_check(ap_alloc: &BitAllocation, lt: &LongTermState, assoc: &Association) -> Result<bool> {
    for m in 0..lt.num_aps() {
        if ap_alloc.degenerate_aps[m] {
            continue;
        }
        for &k in assoc.ue_group(m) {
            let fill = split_ue_bits(lt, m, k, ap_alloc.ue_total(m, k))?;
            let agrees = fill
                .levels
                .iter()
                .zip(ap_alloc.bits.link(m, k))
                .all(|(a, b)| (a - b).abs() <= 1e-6);
            if !agrees {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `b = B_m / (|U_m| L)` on every associated path.
pub fn equal_allocation(assoc: &Association, config: &SystemConfig) -> BitAllocation {
    let l_count = config.num_paths;
    let mut out = BitAllocation::empty(assoc.num_aps(), assoc.num_ues(), l_count);
    for m in 0..assoc.num_aps() {
        let group = assoc.ue_group(m);
        if group.is_empty() {
            continue;
        }
        let b = config.budget(m) / (group.len() * l_count) as f64;
        for &k in group {
            out.bits.link_mut(m, k).fill(b);
        }
    }
    out
}

/// [`PERFECT_CSI_BITS`] on every associated path, ignoring budgets.
pub fn perfect_csi_allocation(assoc: &Association, num_paths: usize) -> BitAllocation {
    let mut out = BitAllocation::empty(assoc.num_aps(), assoc.num_ues(), num_paths);
    for m in 0..assoc.num_aps() {
        for &k in assoc.ue_group(m) {
            out.bits.link_mut(m, k).fill(PERFECT_CSI_BITS);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn waterfill_examples() {
        assert!(close(&waterfill(&[0.3], 10.0).unwrap().levels, &[10.0], 1e-12));
        assert!(close(&waterfill(&[0.4, 0.4], 10.0).unwrap().levels, &[5.0, 5.0], 1e-12));
        assert!(close(&waterfill(&[0.8, 0.2], 4.0).unwrap().levels, &[3.0, 1.0], 1e-12));
    }

    #[test]
    fn inactive_weights_get_nothing() {
        // log2 gap of 10 exceeds the budget of 4.
        let fill = waterfill(&[1.0, 2f64.powi(-10)], 4.0).unwrap();
        assert!(close(&fill.levels, &[4.0, 0.0], 1e-12));
        assert_eq!(fill.lambda, Some(-4.0));
    }

    #[test]
    fn zero_budget_allocates_nothing() {
        let fill = waterfill(&[0.5, 0.25], 0.0).unwrap();
        assert_eq!(fill.levels, vec![0.0, 0.0]);
    }

    #[test]
    fn all_zero_weights_fall_back_to_equal_split() {
        let fill = waterfill(&[0.0, 1e-310, 0.0], 3.0).unwrap();
        assert!(fill.degenerate);
        assert_eq!(fill.levels, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(waterfill(&[], 1.0).is_err());
        assert!(waterfill(&[1.0], -1.0).is_err());
        assert!(waterfill(&[-1.0], 1.0).is_err());
        assert!(waterfill(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn grid_oracle_examples() {
        let (levels, _) = grid_oracle(&[0.8, 0.2], 4.0, 0.01).unwrap();
        assert!(close(&levels, &[3.0, 1.0], 0.01 + 1e-9));
        let (levels, _) = grid_oracle(&[0.5], 2.5, 0.5).unwrap();
        assert_eq!(levels, vec![2.5]);
        let (levels, _) = grid_oracle(&[0.3; 3], 3.0, 0.01).unwrap();
        assert!(close(&levels, &[1.0; 3], 0.01 + 1e-9));
        assert!(grid_oracle(&[1.0; 7], 1.0, 0.5).is_err());
        assert!(grid_oracle(&[1.0], 1.0, 0.3).is_err());
    }
}
