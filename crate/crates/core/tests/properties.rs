//! Property tests for the spectral machinery and the configuration format.

use proptest::prelude::*;

use sche::config::{parse_config, Command, RunConfig};
use sche::{Field, SpectralBasis, SpectralField};

fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

fn spectral_route(b: &SpectralBasis, u: &Field) -> Field {
    let c = b.to_spectral(u).unwrap();
    let scaled: Vec<f64> = c.0.iter().zip(b.eigenvalues()).map(|(c, l)| -l * c).collect();
    b.from_spectral(&SpectralField(scaled)).unwrap()
}

fn check_stencil_equivalence(n: usize, v: Vec<f64>) {
    let b = SpectralBasis::new(n).unwrap();
    let u = Field(v);
    let direct = b.apply_laplacian(&u).unwrap();
    let spectral = spectral_route(&b, &u);
    let scale = u.0.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for (a, s) in direct.0.iter().zip(&spectral.0) {
        assert!((a - s).abs() <= 1e-9 * scale, "n={n}: {a} vs {s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stencil_equals_spectral_route_n4(v in field(4)) {
        check_stencil_equivalence(4, v);
    }

    #[test]
    fn stencil_equals_spectral_route_n16(v in field(16)) {
        check_stencil_equivalence(16, v);
    }

    #[test]
    fn stencil_equals_spectral_route_n64(v in field(64)) {
        check_stencil_equivalence(64, v);
    }

    #[test]
    fn parseval_and_round_trip(v in field(32)) {
        let b = SpectralBasis::new(32).unwrap();
        let u = Field(v);
        let c = b.to_spectral(&u).unwrap();
        let nodal: f64 = b.h() * u.0.iter().map(|x| x * x).sum::<f64>();
        let modal: f64 = c.0.iter().map(|x| x * x).sum();
        prop_assert!((nodal - modal).abs() <= 1e-10 * nodal.max(1.0));
        let back = b.from_spectral(&c).unwrap();
        for (a, z) in back.0.iter().zip(&u.0) {
            prop_assert!((a - z).abs() <= 1e-12 * 10.0);
        }
    }

    #[test]
    fn config_text_round_trips(
        seed in any::<u64>(),
        tau in 1e-6f64..0.99,
        n in 2usize..2048,
        sigma in 0.0f64..5.0,
        steps in 1u64..100_000,
        trajectories in 1u64..10_000,
    ) {
        let mut cfg = RunConfig::defaults(Command::Simulate);
        cfg.seed = seed;
        cfg.tau = Some(tau);
        cfg.n_modes = Some(n);
        cfg.sigma = sigma;
        cfg.t_final = Some(steps as f64 * tau);
        cfg.trajectories = trajectories;
        let text = cfg.to_text();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(back.to_text(), text);
        prop_assert_eq!(back.content_hash(), cfg.content_hash());
        prop_assert_eq!(back, cfg);
    }
}
