mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use geosnap::dynamics::{evolve_full_space, evolve_unitary, EvolveOptions};
use geosnap::geometry::{
    area_law_phase, integrate_state_trajectory, integrate_trajectory, phase_decomposition,
    FnControls,
};
use geosnap::linalg::{inner, max_abs};
use geosnap::pulse::{apply_error, path_segments, ErrorModel, Scheme, SnapTarget, ToneValue};
use geosnap::qocf::{linear_adjust, AdjustOptions};
use geosnap::system::{build_block_hamiltonian, BlockMode, SystemParams};
use proptest::prelude::*;

const MODES: [BlockMode; 3] = [BlockMode::Rwa, BlockMode::Full, BlockMode::FullHigherOrder];

#[test]
fn blocks_match_full_space() {
    let mut rng = common::rng(7);
    let opts = EvolveOptions::unitary().with_rtol(1e-11, 1e-13);
    for case in 0..4 {
        let p = common::params(4);
        let s = common::random_schedule(&mut rng, 4, p.chi);
        for mode in MODES {
            let full = evolve_full_space(&s, &p, mode, &opts).unwrap();
            let blocks = evolve_unitary(&s, &p, mode, None, &opts)
                .unwrap()
                .assembled_gate();
            let err = max_abs(&(&full - &blocks));
            assert!(err < 1e-8, "case {case} {mode:?}: {err:e}");
        }
    }
}

/// Angle equations against the propagated state for a generic drive that
/// stays in the northern hemisphere.
#[test]
fn angle_route_matches_state_route() {
    let om = 2.0 * PI * 0.3e6;
    let f = move |t: f64| ToneValue {
        omega: om * (1.0 + 0.3 * (2.0e6 * t).sin()),
        phi: 0.4 + 1.5e6 * t,
        delta: -0.2 * om,
    };
    let ctl = FnControls::new(0.6e-6, f);
    let times: Vec<f64> = (0..=12).map(|k| 0.05e-6 * k as f64).collect();
    let opts = EvolveOptions::unitary().with_rtol(1e-11, 1e-13);
    let a = integrate_trajectory(&ctl, 0.5, 0.3, Some(&times), &opts).unwrap();
    let b = integrate_state_trajectory(&ctl, 0.5, 0.3, Some(&times), &opts).unwrap();
    for (x, y) in a.samples.iter().zip(&b.samples) {
        let ov = inner(&x.state(), &y.state()).norm_sqr();
        assert!(ov > 1.0 - 1e-8, "t = {:e}: overlap {ov}", x.t);
        assert!((x.gamma_dynamic + x.gamma_geometric - x.f_plus).abs() < 1e-8);
        assert!((x.gamma_dynamic - y.gamma_dynamic).abs() < 1e-7);
        assert!((x.gamma_geometric - y.gamma_geometric).abs() < 1e-7);
    }
}

#[test]
fn latitude_loop_phase() {
    for &zeta in &[1.0, FRAC_PI_2, 2.2] {
        let t_loop = 1e-6;
        let ctl = FnControls::new(t_loop, move |_| ToneValue {
            omega: 0.0,
            phi: 0.0,
            delta: 2.0 * PI / t_loop,
        });
        let opts = EvolveOptions::unitary();
        let tr = integrate_state_trajectory(&ctl, zeta, 0.0, None, &opts).unwrap();
        let pd = phase_decomposition(&tr).unwrap();
        let want = PI * (1.0 - zeta.cos());
        let diff = (pd.gamma_geometric - want + PI).rem_euclid(2.0 * PI) - PI;
        assert!(
            diff.abs() < 1e-8,
            "zeta {zeta}: {} vs {want}",
            pd.gamma_geometric
        );
        if zeta != FRAC_PI_2 {
            let times: Vec<f64> = (0..=64).map(|k| t_loop * k as f64 / 64.0).collect();
            let ang = integrate_trajectory(&ctl, zeta, 0.0, Some(&times), &opts).unwrap();
            assert!((area_law_phase(&ang) - want).abs() < 1e-8);
        }
    }
}

#[test]
fn path_designed_loop_encloses_theta() {
    let t = SnapTarget::new(&[0.3, -1.1, 2.0, -2.9]).unwrap();
    for lambda in [0.3 * PI, 0.501 * PI, 0.8 * PI] {
        for seg in path_segments(&t, lambda, 1e6).unwrap() {
            let th = seg.geometric_phase();
            let back = (1.0 - lambda.cos()) * (seg.xi_b - seg.xi_a) / 2.0;
            assert!((th - back).abs() < 1e-12);
        }
    }
}

fn arb_params() -> impl Strategy<Value = SystemParams> {
    (0.5f64..5.0, 0.0f64..0.05, 0.0f64..0.05).prop_map(|(c, k, x)| SystemParams {
        chi: geosnap::system::mhz(c),
        kerr: geosnap::system::mhz(k),
        chi_prime: geosnap::system::mhz(x),
        n_max: 5,
        ..SystemParams::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn block_hamiltonians_hermitian(seed in any::<u64>(), p in arb_params(), frac in 0.0f64..1.0) {
        let mut rng = common::rng(seed);
        let s = common::random_schedule(&mut rng, 5, p.chi);
        let t = frac * s.duration();
        for mode in MODES {
            for n in 0..5 {
                let h = build_block_hamiltonian(n, &s, t, &p, mode).unwrap();
                prop_assert!((h - h.adjoint()).max_abs() < 1e-9 * p.chi);
            }
        }
    }

    #[test]
    fn error_model_composes(seed in any::<u64>(), e1 in -0.1f64..0.1, e2 in -0.1f64..0.1, h1 in -0.1f64..0.1, h2 in -0.1f64..0.1) {
        let mut rng = common::rng(seed);
        let om = 1e6;
        let s = common::random_schedule(&mut rng, 4, om);
        let once = apply_error(&apply_error(&s, &ErrorModel::uniform(e1, h1, 4), om), &ErrorModel::uniform(e2, h2, 4), om);
        let joint = apply_error(&s, &ErrorModel::uniform((1.0 + e1) * (1.0 + e2) - 1.0, h1 + h2, 4), om);
        for (a, b) in once.tones.iter().zip(&joint.tones) {
            for (x, y) in a.segments.iter().zip(&b.segments) {
                prop_assert!((x.envelope.peak() - y.envelope.peak()).abs() < 1e-9 * om);
                prop_assert!((x.detuning - y.detuning).abs() < 1e-9 * om);
            }
        }
        let zero = apply_error(&s, &ErrorModel::uniform(0.0, 0.0, 4), om);
        prop_assert_eq!(zero, s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn adjustment_respects_bounds(ratio in 0.05f64..0.4, pd in any::<bool>()) {
        let p = SystemParams::default();
        let t = SnapTarget::reference();
        let om = ratio * p.chi;
        let scheme = if pd { Scheme::path_designed_default() } else { Scheme::OrangeSlice };
        let s = scheme.build(&t, om).unwrap();
        let opts = AdjustOptions { max_evals: 150, ..AdjustOptions::default() };
        let adj = linear_adjust(&s, &p, &t, om, &opts).unwrap();
        prop_assert!(adj.infidelity_after <= adj.infidelity_before);
        for n in 0..t.dim() {
            prop_assert!(adj.params.omega_eps[n].abs() <= 0.1 * om * (1.0 + 1e-12));
            let bound = geosnap::qocf::delta_bound(&s, n, om, 0.1);
            prop_assert!(adj.params.delta_eps[n].abs() <= bound * (1.0 + 1e-12));
        }
    }
}
