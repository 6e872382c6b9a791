//! Per-drop protocol execution, sweeps and CSV output.
//!
//! A drop draws one geometry and long-term state; every scheme evaluated in
//! that drop sees the same geometry, the same short-term gains, the same
//! quantization noise and the same AP phases (common random numbers). Drops
//! run in parallel and are aggregated in drop order, so results do not depend
//! on the thread count.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::allocation::{self, BitAllocation};
use crate::association::{self, Association};
use crate::channel;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::topology::{self, Geometry, LongTermState};
use crate::transmission::{self, BeamSource, RealizationDraws};

/// Tolerance of the post-hoc per-AP budget audit.
pub const BUDGET_AUDIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssociationPolicy {
    Proposed,
    Beta,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocationPolicy {
    Proposed,
    Equal,
    PerfectCsi,
}

/// Reference precoders that bypass the feedback chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reference {
    AngleZf,
}

impl AssociationPolicy {
    pub const ALL: [Self; 3] = [Self::Proposed, Self::Beta, Self::Random];

    pub fn label(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Beta => "beta",
            Self::Random => "random",
        }
    }
}

impl AllocationPolicy {
    pub const ALL: [Self; 3] = [Self::Proposed, Self::Equal, Self::PerfectCsi];

    pub fn label(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Equal => "equal",
            Self::PerfectCsi => "perfect_csi",
        }
    }
}

/// An association rule paired with either a bit allocation or a reference
/// precoder (which then ignores the allocation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeSpec {
    pub association: AssociationPolicy,
    pub allocation: AllocationPolicy,
    pub reference: Option<Reference>,
}

impl SchemeSpec {
    pub const fn new(association: AssociationPolicy, allocation: AllocationPolicy) -> Self {
        Self {
            association,
            allocation,
            reference: None,
        }
    }

    pub const fn angle_zf(association: AssociationPolicy) -> Self {
        Self {
            association,
            allocation: AllocationPolicy::Equal,
            reference: Some(Reference::AngleZf),
        }
    }

    /// The nine association × allocation combinations followed by the
    /// angle-based ZF reference on the proposed association.
    pub fn all() -> Vec<Self> {
        let mut out: Vec<Self> = AssociationPolicy::ALL
            .iter()
            .flat_map(|&a| AllocationPolicy::ALL.iter().map(move |&b| Self::new(a, b)))
            .collect();
        out.push(Self::angle_zf(AssociationPolicy::Proposed));
        out
    }

    /// Value of the `allocation` CSV column.
    pub fn allocation_label(&self) -> &'static str {
        match self.reference {
            Some(Reference::AngleZf) => "angle_zf",
            None => self.allocation.label(),
        }
    }

    /// Parses a comma-separated list such as `proposed:proposed,random:equal`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        if s.trim() == "all" {
            return Ok(Self::all());
        }
        s.split(',').map(|part| part.trim().parse()).collect()
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.association.label(), self.allocation_label())
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("scheme `{s}` is not of the form association:allocation"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let association = match a.trim() {
            "proposed" => AssociationPolicy::Proposed,
            "beta" => AssociationPolicy::Beta,
            "random" => AssociationPolicy::Random,
            other => return Err(Error::InvalidConfig(format!("unknown association `{other}`"))),
        };
        let allocation = match b.trim() {
            "proposed" => AllocationPolicy::Proposed,
            "equal" => AllocationPolicy::Equal,
            "perfect_csi" => AllocationPolicy::PerfectCsi,
            "angle_zf" => return Ok(Self::angle_zf(association)),
            other => return Err(Error::InvalidConfig(format!("unknown allocation `{other}`"))),
        };
        Ok(Self::new(association, allocation))
    }
}

/// Long-term quantities of one drop, shared by all schemes.
#[derive(Debug, Clone)]
pub struct DropState {
    pub geometry: Geometry,
    pub long_term: LongTermState,
    pub initial: Association,
}

/// Stage 0: geometry, long-term state and initial association of a drop.
pub fn prepare_drop(config: &SystemConfig, drop: u64) -> Result<DropState> {
    let seed = config.master_seed;
    let geometry = topology::generate_geometry(config, &mut rng::stream(seed, Purpose::Geometry, &[drop]))?;
    let long_term =
        topology::generate_long_term_state(config, &geometry, &mut rng::stream(seed, Purpose::LongTerm, &[drop]))?;
    let initial = association::initial_association(&long_term)?;
    Ok(DropState {
        geometry,
        long_term,
        initial,
    })
}

/// Association of a scheme in a drop. The random rule draws from a stream
/// keyed by the drop alone.
pub fn scheme_association(
    state: &DropState,
    policy: AssociationPolicy,
    config: &SystemConfig,
    drop: u64,
) -> Result<Association> {
    match policy {
        AssociationPolicy::Proposed => association::propose_association(&state.initial, &state.long_term, config),
        AssociationPolicy::Beta => association::beta_association(&state.initial, &state.long_term, config),
        AssociationPolicy::Random => association::random_association(
            &state.initial,
            config,
            &mut rng::stream(config.master_seed, Purpose::Association, &[drop]),
        ),
    }
}

/// Stages 1-3: bit loads for a scheme. The proposed rule water-fills at the
/// AP, announces per-UE totals and lets each UE split its total over its
/// paths; the result is audited against the per-AP budgets.
pub fn scheme_allocation(
    assoc: &Association,
    lt: &LongTermState,
    policy: AllocationPolicy,
    config: &SystemConfig,
) -> Result<BitAllocation> {
    let alloc = match policy {
        AllocationPolicy::Proposed => {
            let ap_side = allocation::allocate_ap_bits(assoc, lt, config)?;
            allocation::resplit_at_ues(&ap_side, lt, assoc)?
        }
        AllocationPolicy::Equal => allocation::equal_allocation(assoc, config),
        AllocationPolicy::PerfectCsi => return Ok(allocation::perfect_csi_allocation(assoc, config.num_paths)),
    };
    alloc.audit(assoc, config, BUDGET_AUDIT_TOL)?;
    Ok(alloc)
}

enum Plan {
    Feedback(BitAllocation),
    Fixed(transmission::Precoder),
}

/// Drop-mean sum rate of every scheme in `schemes`, in order.
pub fn run_drop_schemes(config: &SystemConfig, schemes: &[SchemeSpec], drop: u64) -> Result<Vec<f64>> {
    let wrap = |e: Error| Error::Drop {
        drop,
        source: Box::new(e),
    };
    let state = prepare_drop(config, drop).map_err(wrap)?;
    let lt = &state.long_term;
    let mut assocs: Vec<(AssociationPolicy, Association)> = Vec::new();
    let mut plans = Vec::with_capacity(schemes.len());
    for scheme in schemes {
        let idx = match assocs.iter().position(|(p, _)| *p == scheme.association) {
            Some(i) => i,
            None => {
                let a = scheme_association(&state, scheme.association, config, drop).map_err(wrap)?;
                assocs.push((scheme.association, a));
                assocs.len() - 1
            }
        };
        let assoc = &assocs[idx].1;
        let plan = match scheme.reference {
            Some(Reference::AngleZf) => Plan::Fixed(transmission::angle_based_zf(lt, assoc, config).map_err(wrap)?),
            None => Plan::Feedback(scheme_allocation(assoc, lt, scheme.allocation, config).map_err(wrap)?),
        };
        plans.push((idx, plan));
    }

    let seed = config.master_seed;
    let mut totals = vec![0.0; schemes.len()];
    for r in 0..config.realizations as u64 {
        let st = channel::draw_short_term(config, &mut rng::stream(seed, Purpose::ShortTerm, &[drop, r]));
        let phases = transmission::draw_ap_phases(config.num_aps, &mut rng::stream(seed, Purpose::Phase, &[drop, r]));
        for (total, (idx, plan)) in totals.iter_mut().zip(&plans) {
            let source = match plan {
                Plan::Feedback(alloc) => BeamSource::Quantized(&alloc.bits),
                Plan::Fixed(p) => BeamSource::Fixed(p),
            };
            let mut quant_rng = rng::stream(seed, Purpose::Quantization, &[drop, r]);
            let powers = transmission::realization_powers(
                lt,
                &assocs[*idx].1,
                source,
                config,
                RealizationDraws {
                    short_term: &st,
                    quant_rng: &mut quant_rng,
                    ap_phases: &phases,
                },
            )
            .map_err(wrap)?;
            *total += transmission::achievable_rates(&powers).sum_rate;
        }
    }
    let n = config.realizations as f64;
    Ok(totals.into_iter().map(|t| t / n).collect())
}

/// Drop-mean sum rate of one scheme.
pub fn run_drop(config: &SystemConfig, scheme: SchemeSpec, drop: u64) -> Result<f64> {
    Ok(run_drop_schemes(config, &[scheme], drop)?[0])
}

/// Drop means for `config.drops` drops, indexed `[drop][scheme]`. Drops run
/// in parallel; the output order is the drop order.
pub fn drop_matrix(config: &SystemConfig, schemes: &[SchemeSpec]) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    (0..config.drops as u64)
        .into_par_iter()
        .map(|d| run_drop_schemes(config, schemes, d))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Snr,
    Budget,
    NumAps,
    NumUes,
    Streams,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            Self::Snr => "snr",
            Self::Budget => "budget",
            Self::NumAps => "num_aps",
            Self::NumUes => "num_ues",
            Self::Streams => "streams",
        }
    }

    /// `config` with this axis set to `value`.
    pub fn apply(self, config: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= usize::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidConfig(format!("{} value {value} is not a count", self.label())))
            }
        };
        let mut c = config.clone();
        match self {
            Self::Snr => c.snr_db = value,
            Self::Budget => {
                c.feedback_budget_bits = value;
                c.per_ap_budget_bits = None;
            }
            Self::NumAps => c.num_aps = count()?,
            Self::NumUes => c.num_ues = count()?,
            Self::Streams => c.stream_cap = count()?,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(Self::Snr),
            "budget" => Ok(Self::Budget),
            "num_aps" => Ok(Self::NumAps),
            "num_ues" => Ok(Self::NumUes),
            "streams" => Ok(Self::Streams),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// One (axis value, scheme) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub value: f64,
    pub scheme: SchemeSpec,
    pub mean_sum_rate: f64,
    /// Standard error of the drop means; `None` with fewer than two drops.
    pub std_error: Option<f64>,
    pub drops: usize,
    pub realizations: usize,
    /// Per-drop mean sum rates in drop order.
    pub drop_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub axis: SweepAxis,
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn row(&self, value: f64, scheme: SchemeSpec) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.value == value && r.scheme == scheme)
    }
}

/// Mean and standard error of a sample (standard error `None` below two
/// samples).
pub fn mean_and_std_error(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some((var / n as f64).sqrt()))
}

/// Mean and standard error of the per-drop differences `a - b`.
pub fn paired_difference(a: &ResultRow, b: &ResultRow) -> Result<(f64, Option<f64>)> {
    if a.drop_means.len() != b.drop_means.len() {
        return Err(Error::Precondition("paired rows have different drop counts".into()));
    }
    let diffs: Vec<f64> = a.drop_means.iter().zip(&b.drop_means).map(|(x, y)| x - y).collect();
    Ok(mean_and_std_error(&diffs))
}

/// Runs every scheme at every axis value. All values are validated before
/// any simulation starts.
pub fn sweep(config: &SystemConfig, axis: SweepAxis, values: &[f64], schemes: &[SchemeSpec]) -> Result<ExperimentResult> {
    let configs: Vec<SystemConfig> = values.iter().map(|&v| axis.apply(config, v)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(values.len() * schemes.len());
    for (&value, cfg) in values.iter().zip(&configs) {
        let matrix = drop_matrix(cfg, schemes)?;
        for (s, &scheme) in schemes.iter().enumerate() {
            let drop_means: Vec<f64> = matrix.iter().map(|row| row[s]).collect();
            let (mean_sum_rate, std_error) = mean_and_std_error(&drop_means);
            rows.push(ResultRow {
                value,
                scheme,
                mean_sum_rate,
                std_error,
                drops: cfg.drops,
                realizations: cfg.realizations,
                drop_means,
            });
        }
    }
    Ok(ExperimentResult { axis, rows })
}

/// All schemes at the configured SNR, reported as a one-point SNR sweep.
pub fn single_run(config: &SystemConfig, schemes: &[SchemeSpec]) -> Result<ExperimentResult> {
    sweep(config, SweepAxis::Snr, &[config.snr_db], schemes)
}

pub const CSV_HEADER: [&str; 8] = [
    "axis",
    "value",
    "association",
    "allocation",
    "mean_sum_rate",
    "std_error",
    "drops",
    "realizations",
];

/// Nine significant digits.
fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn write_csv<W: Write>(result: &ExperimentResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for row in &result.rows {
        w.write_record([
            result.axis.label().to_string(),
            sig9(row.value),
            row.scheme.association.label().to_string(),
            row.scheme.allocation_label().to_string(),
            sig9(row.mean_sum_rate),
            row.std_error.map(sig9).unwrap_or_default(),
            row.drops.to_string(),
            row.realizations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(result, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SystemConfig {
        SystemConfig {
            num_aps: 4,
            antennas_per_ap: 2,
            num_ues: 3,
            stream_cap: 2,
            num_paths: 2,
            drops: 3,
            realizations: 4,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn scheme_parsing_round_trips() {
        for s in SchemeSpec::all() {
            assert_eq!(s.to_string().parse::<SchemeSpec>().unwrap(), s);
        }
        assert_eq!(SchemeSpec::all().len(), 10);
        assert!("proposed".parse::<SchemeSpec>().is_err());
        assert!("proposed:fancy".parse::<SchemeSpec>().is_err());
        let list = SchemeSpec::parse_list("proposed:proposed, random:equal").unwrap();
        assert_eq!(list[1], SchemeSpec::new(AssociationPolicy::Random, AllocationPolicy::Equal));
    }

    #[test]
    fn empty_result_writes_header_only() {
        let mut buf = Vec::new();
        write_csv(&ExperimentResult { axis: SweepAxis::Snr, rows: vec![] }, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "axis,value,association,allocation,mean_sum_rate,std_error,drops,realizations\n"
        );
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(1.0), "1.00000000e0");
        assert_eq!(sig9(123.456789012), "1.23456789e2");
    }

    #[test]
    fn invalid_axis_values_are_rejected_up_front() {
        let cfg = tiny();
        let schemes = [SchemeSpec::new(AssociationPolicy::Proposed, AllocationPolicy::Equal)];
        assert!(sweep(&cfg, SweepAxis::Streams, &[1.0, 3.0], &schemes).is_err());
        assert!(sweep(&cfg, SweepAxis::NumUes, &[2.5], &schemes).is_err());
    }

    #[test]
    fn row_count_and_order() {
        let cfg = tiny();
        let schemes = [
            SchemeSpec::new(AssociationPolicy::Proposed, AllocationPolicy::Proposed),
            SchemeSpec::angle_zf(AssociationPolicy::Beta),
        ];
        let res = sweep(&cfg, SweepAxis::Snr, &[10.0, 20.0], &schemes).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert_eq!(res.rows[1].scheme, schemes[1]);
        assert_eq!(res.rows[2].value, 20.0);
        assert!(res.rows.iter().all(|r| r.std_error.is_some() && r.mean_sum_rate.is_finite()));
    }

    #[test]
    fn scheme_result_does_not_depend_on_companions() {
        let cfg = tiny();
        let s = SchemeSpec::new(AssociationPolicy::Random, AllocationPolicy::Proposed);
        let alone = run_drop(&cfg, s, 2).unwrap();
        let together = run_drop_schemes(&cfg, &SchemeSpec::all(), 2).unwrap();
        assert_eq!(alone, together[SchemeSpec::all().iter().position(|x| *x == s).unwrap()]);
    }

    #[test]
    fn single_drop_has_no_std_error() {
        let cfg = SystemConfig { drops: 1, ..tiny() };
        let res = single_run(&cfg, &[SchemeSpec::new(AssociationPolicy::Beta, AllocationPolicy::Equal)]).unwrap();
        assert_eq!(res.rows[0].std_error, None);
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().contains(",,1,4"));
    }
}
