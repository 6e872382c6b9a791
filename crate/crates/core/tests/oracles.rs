//! Closed-form and independent Monte Carlo cross-checks.

use cfmimo::allocation::{self, PERFECT_CSI_BITS};
use cfmimo::association::{self, Association};
use cfmimo::channel::{self, ChannelSet, QuantModel};
use cfmimo::cvec;
use cfmimo::harness::{self, AllocationPolicy, AssociationPolicy, SchemeSpec};
use cfmimo::topology::{self, LongTermState};
use cfmimo::transmission::{self, Moments};
use cfmimo::{Error, PathTensor, SystemConfig};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn single_link_state(beta: f64, kappa: Vec<f64>, theta: Vec<f64>) -> LongTermState {
    let l = kappa.len();
    LongTermState::new(
        1,
        1,
        vec![beta],
        PathTensor::from_vec(1, 1, l, kappa),
        PathTensor::from_vec(1, 1, l, theta),
    )
    .unwrap()
}

#[test]
fn path_loss_reference_points() {
    assert!((topology::path_loss_db(10.0) + 56.18).abs() < 1e-12);
    assert!((topology::path_loss_db(1.0) + 30.18).abs() < 1e-12);
    assert!((topology::path_loss_db(100.0) + 82.18).abs() < 1e-12);
    // Footnote receive SNR at 10 m with 50 dB transmit.
    assert!((50.0 + topology::path_loss_db(10.0) + 6.0).abs() < 0.2);
}

#[test]
fn wrap_distance_crosses_the_border() {
    let d = topology::wrap_distance([10.0, 500.0], [990.0, 500.0], 1000.0);
    assert!((d - 20.0).abs() < 1e-9);
    let corner = topology::wrap_distance([0.0, 0.0], [500.0, 500.0], 1000.0);
    assert!((corner - 500.0 * 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn two_weight_waterfill_closed_form() {
    // b1 - b2 = log2(w1 / w2), b1 + b2 = B.
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let w1: f64 = rng.random_range(0.01..1.0);
        let w2: f64 = rng.random_range(0.01..1.0);
        let budget: f64 = rng.random_range(0.0..12.0);
        let gap = (w1 / w2).log2();
        let expected = if gap.abs() >= budget {
            if gap > 0.0 { [budget, 0.0] } else { [0.0, budget] }
        } else {
            [(budget + gap) / 2.0, (budget - gap) / 2.0]
        };
        let wf = allocation::waterfill(&[w1, w2], budget).unwrap();
        assert!((wf.levels[0] - expected[0]).abs() < 1e-9, "{w1} {w2} {budget}");
        assert!((wf.levels[1] - expected[1]).abs() < 1e-9);
    }
}

#[test]
fn quantizer_rate_distortion() {
    let mut rng = StdRng::seed_from_u64(5);
    let draws = 200_000;
    for model in [QuantModel::TestChannel, QuantModel::ErrorInjection] {
        for b in [1.0, 3.0, 6.0] {
            let mut m = Moments::default();
            for _ in 0..draws {
                let g = channel::standard_complex_normal(&mut rng);
                m.push((g - channel::quantize_gain(g, b, &mut rng, model).unwrap()).norm_sqr());
            }
            let target = (-b).exp2();
            assert!((m.mean() - target).abs() < 4.0 * m.std_error(), "{model:?} b={b}: {}", m.mean());
        }
    }
    let g = Complex64::new(0.7, -0.2);
    assert_eq!(channel::quantize_gain(g, 0.0, &mut rng, QuantModel::TestChannel).unwrap(), Complex64::new(0.0, 0.0));
    assert!(matches!(
        channel::quantize_gain(g, 0.0, &mut rng, QuantModel::ErrorInjection),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn single_path_angle_zf_nulls_steering_vectors() {
    let theta = [0.3, -0.7, 1.1];
    let lt = LongTermState::new(
        1,
        3,
        vec![1e-8, 2e-8, 3e-8],
        PathTensor::filled(1, 3, 1, 1.0),
        PathTensor::from_vec(1, 3, 1, theta.to_vec()),
    )
    .unwrap();
    let cfg = SystemConfig {
        num_aps: 1,
        num_ues: 3,
        antennas_per_ap: 4,
        stream_cap: 3,
        num_paths: 1,
        ..SystemConfig::default()
    };
    let assoc = Association::from_ue_groups(3, vec![vec![0, 1, 2]]).unwrap();
    let pre = transmission::angle_based_zf(&lt, &assoc, &cfg).unwrap();
    for k in 0..3 {
        let w = pre.vector(0, k).unwrap();
        assert!((cvec::norm(w) - 1.0).abs() < 1e-12);
        for j in (0..3).filter(|&j| j != k) {
            let a = channel::steering_vector(theta[j], 4);
            assert!(cvec::inner(&a, w).norm() < 1e-9);
        }
    }
}

#[test]
fn dual_route_equal_split_surrogate() {
    let cfg = SystemConfig::default();
    for d in 0..20 {
        let state = harness::prepare_drop(&cfg, d).unwrap();
        let lt = &state.long_term;
        for assoc in [
            state.initial.clone(),
            association::propose_association(&state.initial, lt, &cfg).unwrap(),
        ] {
            let bits = allocation::equal_allocation(&assoc, &cfg).bits;
            let tensor_route = transmission::surrogate_metrics(&assoc, lt, &bits, &cfg).r_sum_alt;
            let fast_route = association::surrogate_sum_rate_equal_bits(&assoc, lt, &cfg);
            assert!(
                (tensor_route - fast_route).abs() <= 1e-9 * fast_route.abs().max(1.0),
                "{tensor_route} vs {fast_route}"
            );
        }
    }
}

#[test]
fn surrogate_at_high_bits_drops_sgi() {
    let cfg = SystemConfig::default();
    let state = harness::prepare_drop(&cfg, 3).unwrap();
    let lt = &state.long_term;
    let assoc = association::propose_association(&state.initial, lt, &cfg).unwrap();
    let bits = allocation::perfect_csi_allocation(&assoc, cfg.num_paths).bits;
    let s = transmission::surrogate_metrics(&assoc, lt, &bits, &cfg);
    for k in 0..cfg.num_ues {
        let limit = (1.0 + s.d_bound[k] / (1.0 + s.igi_bound[k])).log2();
        assert!((s.r_alt[k] - limit).abs() <= 1e-12 * limit.max(1.0));
        assert!(s.sgi_bound[k] <= 1e-17 * s.d_bound[k].max(1.0));
    }
}

#[test]
fn single_link_desired_power_is_tight() {
    // MRT to the own channel: E[D] = p β N Σκ = D↓.
    let cfg = SystemConfig {
        num_aps: 1,
        num_ues: 1,
        stream_cap: 1,
        snr_db: 20.0,
        ..SystemConfig::default()
    };
    let lt = single_link_state(1e-3, vec![0.5, 0.3, 0.2], vec![0.1, -0.4, 0.9]);
    let assoc = Association::from_ue_groups(1, vec![vec![0]]).unwrap();
    let bits = PathTensor::filled(1, 1, 3, PERFECT_CSI_BITS);
    let report = transmission::verify_lemma3(&lt, &assoc, &bits, &cfg, 20_000).unwrap();
    let d = report.ues[0].desired;
    assert!((d.bound - 100.0 * 1e-3 * 4.0).abs() < 1e-12);
    assert!((d.mean - d.bound).abs() < 4.0 * d.std_error, "{d:?}");
    assert!(report.all_hold());
    assert!(report.ues[0].sgi.mean == 0.0 && report.ues[0].igi.mean == 0.0);
}

#[test]
fn perfect_csi_proxy_removes_same_group_interference() {
    let cfg = SystemConfig::default();
    let state = harness::prepare_drop(&cfg, 1).unwrap();
    let lt = &state.long_term;
    let assoc = association::propose_association(&state.initial, lt, &cfg).unwrap();
    let bits = allocation::perfect_csi_allocation(&assoc, cfg.num_paths).bits;
    let report = transmission::verify_lemma3(lt, &assoc, &bits, &cfg, 1000).unwrap();
    for u in &report.ues {
        assert!(u.sgi.mean <= 1e-12 * u.desired.mean.max(1e-300), "{u:?}");
        assert!(u.sgi.holds());
    }
}

#[test]
fn verify_lemma3_requires_enough_realizations() {
    let cfg = SystemConfig::default();
    let state = harness::prepare_drop(&cfg, 0).unwrap();
    let bits = allocation::equal_allocation(&state.initial, &cfg).bits;
    assert!(matches!(
        transmission::verify_lemma3(&state.long_term, &state.initial, &bits, &cfg, 999),
        Err(Error::Precondition(_))
    ));
}

/// Direct expectation of `log2(1 + P‖h‖²)` for a single link, from an
/// independently coded channel draw.
fn direct_single_link_rate(lt: &LongTermState, antennas: usize, power: f64, draws: usize) -> Moments {
    let mut rng = StdRng::seed_from_u64(99);
    let beta = lt.beta(0, 0);
    let mut m = Moments::default();
    for _ in 0..draws {
        let mut h = vec![Complex64::new(0.0, 0.0); antennas];
        for (kap, th) in lt.kappa(0, 0).iter().zip(lt.theta(0, 0)) {
            let g = Complex64::new(
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
            ) / 2f64.sqrt();
            for (n, hn) in h.iter_mut().enumerate() {
                let a = Complex64::from_polar(1.0, n as f64 * std::f64::consts::PI * th.sin()) / (antennas as f64).sqrt();
                *hn += g * a * (beta * antennas as f64 * kap).sqrt();
            }
        }
        let gain: f64 = h.iter().map(|x| x.norm_sqr()).sum();
        m.push((1.0 + power * gain).log2());
    }
    m
}

#[test]
fn single_link_drop_matches_direct_expectation() {
    let cfg = SystemConfig {
        num_aps: 1,
        num_ues: 1,
        stream_cap: 1,
        area_side: 20.0,
        snr_db: 50.0,
        realizations: 20_000,
        drops: 1,
        ..SystemConfig::default()
    };
    let lt = harness::prepare_drop(&cfg, 0).unwrap().long_term;
    let scheme = SchemeSpec::new(AssociationPolicy::Proposed, AllocationPolicy::PerfectCsi);
    let simulated = harness::run_drop(&cfg, scheme, 0).unwrap();
    let direct = direct_single_link_rate(&lt, cfg.antennas_per_ap, cfg.transmit_power(0), 20_000);
    // Both estimates carry comparable Monte Carlo error.
    let band = 4.0 * 2f64.sqrt() * direct.std_error();
    assert!((simulated - direct.mean()).abs() < band, "{simulated} vs {}", direct.mean());
}

#[test]
fn zf_on_exact_channels_eliminates_sgi() {
    let cfg = SystemConfig {
        antennas_per_ap: 8,
        stream_cap: 4,
        ..SystemConfig::default()
    };
    let mut rng = StdRng::seed_from_u64(3);
    for d in 0..10 {
        let state = harness::prepare_drop(&cfg, d).unwrap();
        let lt = &state.long_term;
        let assoc = association::propose_association(&state.initial, lt, &cfg).unwrap();
        let st = channel::draw_short_term(&cfg, &mut rng);
        let h = channel::synthesize_channel(lt, &st.gains, cfg.antennas_per_ap).unwrap();
        let pre = transmission::zf_precoder(&h, &assoc, &cfg).unwrap();
        // Same-group interference only: aligned phases do not matter here.
        let p = transmission::exact_powers(&h, &pre, &assoc);
        for x in p {
            assert!(x.sgi <= 1e-18 * x.desired, "{x:?}");
        }
    }
}

#[test]
fn zero_bit_link_beams_stay_in_the_null_space() {
    let h_known = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.5, 0.5)];
    let zero = vec![Complex64::new(0.0, 0.0); 3];
    let set = ChannelSet::new(1, 2, 3, vec![h_known.clone(), zero]).unwrap();
    let assoc = Association::from_ue_groups(2, vec![vec![0, 1]]).unwrap();
    let cfg = SystemConfig {
        num_aps: 1,
        num_ues: 2,
        antennas_per_ap: 3,
        ..SystemConfig::default()
    };
    let pre = transmission::zf_precoder(&set, &assoc, &cfg).unwrap();
    let w0 = pre.vector(0, 0).unwrap();
    let mrt: Vec<Complex64> = h_known.iter().map(|x| x / cvec::norm(&h_known)).collect();
    assert!(w0.iter().zip(&mrt).all(|(a, b)| (a - b).norm() < 1e-12));
    assert!(cvec::inner(&h_known, pre.vector(0, 1).unwrap()).norm() < 1e-12);
}
