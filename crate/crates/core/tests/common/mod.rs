#![allow(dead_code)]

use std::f64::consts::PI;

use geosnap::pulse::{DriveTone, Envelope, Phase, PulseSchedule, SchemeTag, ToneSegment};
use geosnap::system::{mhz, SystemParams};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random multi-tone schedule on levels below `n_max` with 1 to 3 segments.
pub fn random_schedule(rng: &mut impl Rng, n_max: usize, chi: f64) -> PulseSchedule {
    let n_seg = rng.random_range(1..=3);
    let mut edges = vec![0.0];
    for _ in 0..n_seg {
        let last = *edges.last().unwrap();
        edges.push(last + rng.random_range(0.1e-6..0.4e-6));
    }
    let n_tones = rng.random_range(2..=n_max);
    let tones = (0..n_tones)
        .map(|k| DriveTone {
            level: k % n_max,
            segments: (0..n_seg)
                .map(|_| ToneSegment {
                    envelope: if rng.random_bool(0.85) {
                        Envelope::Sine {
                            peak: rng.random_range(0.02..0.3) * chi,
                        }
                    } else {
                        Envelope::Zero
                    },
                    phase: Phase {
                        base: rng.random_range(-PI..PI),
                        linear: rng.random_range(-0.1..0.1) * chi,
                        cosine: rng.random_range(-1.0..1.0),
                    },
                    detuning: rng.random_range(-0.05..0.05) * chi,
                })
                .collect(),
        })
        .collect();
    PulseSchedule::new(tones, edges, SchemeTag::Custom).unwrap()
}

/// Default parameters with visible higher-order terms.
pub fn params(n_max: usize) -> SystemParams {
    SystemParams {
        kerr: mhz(0.05),
        chi_prime: mhz(0.08),
        ..SystemParams::default()
    }
    .with_n_max(n_max)
}
