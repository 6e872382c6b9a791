//! Network geometry and the long-term channel state.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::tensor::PathTensor;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub area_side: f64,
}

/// Drops `M` APs and `K` UEs uniformly over `[0, area_side)²`.
pub fn generate_geometry<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Geometry> {
    let side = config.area_side;
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::Precondition(format!(
            "area_side must be positive, got {side}"
        )));
    }
    let point = |rng: &mut R| [rng.random_range(0.0..side), rng.random_range(0.0..side)];
    let ap_positions = (0..config.num_aps).map(|_| point(rng)).collect();
    let ue_positions = (0..config.num_ues).map(|_| point(rng)).collect();
    Ok(Geometry {
        ap_positions,
        ue_positions,
        area_side: side,
    })
}

/// Distance on the torus obtained by wrapping the square `[0, side)²`: the
/// minimum Euclidean distance from `a` to the nine shifted copies of `b`.
pub fn wrap_distance(a: Point, b: Point, side: f64) -> f64 {
    let mut best = f64::INFINITY;
    for sx in [-side, 0.0, side] {
        for sy in [-side, 0.0, side] {
            let dx = a[0] - (b[0] + sx);
            let dy = a[1] - (b[1] + sy);
            best = best.min(dx.hypot(dy));
        }
    }
    best
}

/// Large-scale gain in dB at distance `d` meters (COST-231 Walfisch-Ikegami
/// fit for 12.5 m APs and 1.5 m UEs at 3.5 GHz).
pub fn path_loss_db(d: f64) -> f64 {
    -30.18 - 26.0 * d.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Dominance factors from `L - 1` uniform cut points of `[0, 1]`: the `L`
/// subinterval lengths, sorted descending.
pub fn generate_dominance_factors<R: Rng + ?Sized>(num_paths: usize, rng: &mut R) -> Vec<f64> {
    assert!(num_paths >= 1, "at least one path is required");
    let cuts: Vec<f64> = (0..num_paths - 1).map(|_| rng.random::<f64>()).collect();
    dominance_from_cuts(&cuts)
}

/// Subinterval lengths of `[0, 1]` split at `cuts`, largest first.
pub fn dominance_from_cuts(cuts: &[f64]) -> Vec<f64> {
    let mut points = Vec::with_capacity(cuts.len() + 2);
    points.push(0.0);
    points.extend_from_slice(cuts);
    points.push(1.0);
    points.sort_by(f64::total_cmp);
    let mut lengths: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
    lengths.sort_by(|a, b| b.total_cmp(a));
    lengths
}

/// Slowly varying channel description shared by every AP and UE: `beta` is
/// linear, `kappa` and `theta` are per path.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTermState {
    num_aps: usize,
    num_ues: usize,
    beta: Vec<f64>,
    kappa: PathTensor<f64>,
    theta: PathTensor<f64>,
}

impl LongTermState {
    pub fn new(
        num_aps: usize,
        num_ues: usize,
        beta: Vec<f64>,
        kappa: PathTensor<f64>,
        theta: PathTensor<f64>,
    ) -> Result<Self> {
        if beta.len() != num_aps * num_ues
            || kappa.num_aps() != num_aps
            || kappa.num_ues() != num_ues
            || !kappa.same_shape(&theta)
        {
            return Err(Error::Precondition(
                "long-term state components have inconsistent shapes".into(),
            ));
        }
        Ok(Self {
            num_aps,
            num_ues,
            beta,
            kappa,
            theta,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_paths(&self) -> usize {
        self.kappa.num_paths()
    }

    #[inline]
    pub fn beta(&self, m: usize, k: usize) -> f64 {
        self.beta[m * self.num_ues + k]
    }

    #[inline]
    pub fn kappa(&self, m: usize, k: usize) -> &[f64] {
        self.kappa.link(m, k)
    }

    #[inline]
    pub fn theta(&self, m: usize, k: usize) -> &[f64] {
        self.theta.link(m, k)
    }

    pub fn kappa_tensor(&self) -> &PathTensor<f64> {
        &self.kappa
    }

    pub fn theta_tensor(&self) -> &PathTensor<f64> {
        &self.theta
    }

    /// Checks positivity of `beta` and that each link's dominance factors lie
    /// in `[0, 1]`, sum to one and are non-increasing.
    pub fn check_invariants(&self) -> Result<()> {
        for m in 0..self.num_aps {
            for k in 0..self.num_ues {
                let b = self.beta(m, k);
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::Precondition(format!("beta[{m}][{k}] = {b}")));
                }
                let kappa = self.kappa(m, k);
                let sum: f64 = kappa.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::Precondition(format!(
                        "kappa[{m}][{k}] sums to {sum}"
                    )));
                }
                if kappa.iter().any(|x| !(0.0..=1.0).contains(x))
                    || kappa.windows(2).any(|w| w[0] < w[1])
                {
                    return Err(Error::Precondition(format!(
                        "kappa[{m}][{k}] = {kappa:?} is not a descending distribution"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes one row per `(m, k, l)`: `m,k,l,beta_db,kappa,theta_rad`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["m", "k", "l", "beta_db", "kappa", "theta_rad"])?;
        for m in 0..self.num_aps {
            for k in 0..self.num_ues {
                let beta_db = linear_to_db(self.beta(m, k));
                for l in 0..self.num_paths() {
                    w.write_record([
                        m.to_string(),
                        k.to_string(),
                        l.to_string(),
                        format!("{beta_db:.9e}"),
                        format!("{:.9e}", self.kappa(m, k)[l]),
                        format!("{:.9e}", self.theta(m, k)[l]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Large-scale gains from wrap-around distances (floored at
/// `config.min_distance`), dominance factors per link, and AoDs: a nominal
/// angle uniform on `[-π/2, π/2]` per link, then each path uniform within
/// `nominal ± angular_spread / 2`.
pub fn generate_long_term_state<R: Rng + ?Sized>(
    config: &SystemConfig,
    geometry: &Geometry,
    rng: &mut R,
) -> Result<LongTermState> {
    let (m_count, k_count, l_count) = (
        geometry.ap_positions.len(),
        geometry.ue_positions.len(),
        config.num_paths,
    );
    let mut beta = Vec::with_capacity(m_count * k_count);
    let mut kappa = PathTensor::filled(m_count, k_count, l_count, 0.0);
    let mut theta = PathTensor::filled(m_count, k_count, l_count, 0.0);
    let half_spread = config.angular_spread / 2.0;
    for (m, ap) in geometry.ap_positions.iter().enumerate() {
        for (k, ue) in geometry.ue_positions.iter().enumerate() {
            let d = wrap_distance(*ap, *ue, geometry.area_side).max(config.min_distance);
            beta.push(db_to_linear(path_loss_db(d)));
            kappa
                .link_mut(m, k)
                .copy_from_slice(&generate_dominance_factors(l_count, rng));
            let nominal = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            for t in theta.link_mut(m, k) {
                *t = if half_spread > 0.0 {
                    nominal + rng.random_range(-half_spread..=half_spread)
                } else {
                    nominal
                };
            }
        }
    }
    LongTermState::new(m_count, k_count, beta, kappa, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn wrap_distance_examples() {
        assert!((wrap_distance([0.0, 0.0], [999.0, 0.0], 1000.0) - 1.0).abs() < 1e-9);
        assert_eq!(wrap_distance([3.0, 4.0], [3.0, 4.0], 1000.0), 0.0);
        let d = wrap_distance([0.0, 0.0], [500.0, 500.0], 1000.0);
        assert!((d - 500.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn path_loss_anchors() {
        assert!((path_loss_db(10.0) + 56.18).abs() < 1e-12);
        assert!((path_loss_db(1.0) + 30.18).abs() < 1e-12);
        assert!((path_loss_db(100.0) + 82.18).abs() < 1e-12);
    }

    #[test]
    fn dominance_factor_examples() {
        let mut rng = stream(1, Purpose::Auxiliary, &[]);
        assert_eq!(generate_dominance_factors(1, &mut rng), vec![1.0]);
        let k4 = generate_dominance_factors(4, &mut rng);
        assert_eq!(k4.len(), 4);
        assert!((k4.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(k4.windows(2).all(|w| w[0] >= w[1]));
        let k2 = dominance_from_cuts(&[0.3]);
        assert!((k2[0] - 0.7).abs() < 1e-15 && (k2[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn geometry_is_deterministic_and_inside_square() {
        let cfg = SystemConfig {
            num_aps: 40,
            num_ues: 20,
            ..SystemConfig::default()
        };
        let g = generate_geometry(&cfg, &mut stream(5, Purpose::Geometry, &[0])).unwrap();
        assert_eq!(g.ap_positions.len(), 40);
        assert_eq!(g.ue_positions.len(), 20);
        for p in g.ap_positions.iter().chain(&g.ue_positions) {
            assert!(p.iter().all(|c| (0.0..1000.0).contains(c)));
        }
        let tiny = SystemConfig {
            num_aps: 1,
            num_ues: 1,
            ..cfg
        };
        let a = generate_geometry(&tiny, &mut stream(5, Purpose::Geometry, &[1])).unwrap();
        let b = generate_geometry(&tiny, &mut stream(5, Purpose::Geometry, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_area_is_rejected() {
        let cfg = SystemConfig {
            area_side: 0.0,
            ..SystemConfig::default()
        };
        let err = generate_geometry(&cfg, &mut stream(5, Purpose::Geometry, &[0])).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn colocated_link_hits_distance_floor() {
        let cfg = SystemConfig {
            num_aps: 1,
            num_ues: 1,
            ..SystemConfig::default()
        };
        let g = Geometry {
            ap_positions: vec![[10.0, 10.0]],
            ue_positions: vec![[10.0, 10.0]],
            area_side: 1000.0,
        };
        let lt = generate_long_term_state(&cfg, &g, &mut stream(1, Purpose::LongTerm, &[])).unwrap();
        assert!((lt.beta(0, 0) - db_to_linear(-30.18)).abs() < 1e-15);
    }

    #[test]
    fn zero_spread_collapses_aods() {
        let cfg = SystemConfig {
            angular_spread: 0.0,
            num_paths: 4,
            ..SystemConfig::default()
        };
        let g = generate_geometry(&cfg, &mut stream(2, Purpose::Geometry, &[0])).unwrap();
        let lt = generate_long_term_state(&cfg, &g, &mut stream(2, Purpose::LongTerm, &[0])).unwrap();
        for m in 0..cfg.num_aps {
            for k in 0..cfg.num_ues {
                let t = lt.theta(m, k);
                assert!(t.iter().all(|x| *x == t[0]));
            }
        }
    }

    #[test]
    fn aods_stay_within_spread() {
        let cfg = SystemConfig::default();
        let g = generate_geometry(&cfg, &mut stream(3, Purpose::Geometry, &[0])).unwrap();
        let lt = generate_long_term_state(&cfg, &g, &mut stream(3, Purpose::LongTerm, &[0])).unwrap();
        lt.check_invariants().unwrap();
        for m in 0..cfg.num_aps {
            for k in 0..cfg.num_ues {
                let t = lt.theta(m, k);
                let (lo, hi) = t
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
                assert!(hi - lo <= cfg.angular_spread + 1e-12);
                assert!(lo >= -FRAC_PI_2 - cfg.angular_spread / 2.0 - 1e-12);
                assert!(hi <= FRAC_PI_2 + cfg.angular_spread / 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn csv_export_has_one_row_per_path() {
        let cfg = SystemConfig {
            num_aps: 2,
            num_ues: 3,
            num_paths: 2,
            ..SystemConfig::default()
        };
        let g = generate_geometry(&cfg, &mut stream(4, Purpose::Geometry, &[0])).unwrap();
        let lt = generate_long_term_state(&cfg, &g, &mut stream(4, Purpose::LongTerm, &[0])).unwrap();
        let mut buf = Vec::new();
        lt.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("m,k,l,beta_db,kappa,theta_rad"));
        assert_eq!(lines.count(), 12);
    }
}
