mod common;

use common::oracles::{gram_oracle, polar_oracle, twirl_oracle};

#[test]
fn gram_min_never_exceeds_sampled_minimum() {
    for (n, seed) in [(2, 1), (3, 2), (4, 3)] {
        let r = gram_oracle(n, 100_000, seed);
        assert!(r.exact <= r.oracle + 1e-12, "n={n}: {} > {}", r.exact, r.oracle);
        assert!(r.gap() <= 1e-3, "n={n}: gap {}", r.gap());
    }
}

#[test]
fn commutant_projection_matches_haar_twirl() {
    for (n, m, seed) in [(2, 2, 4), (3, 2, 5)] {
        let err = twirl_oracle(n, m, 100_000, seed);
        assert!(err <= 1e-2, "n={n} m={m}: {err}");
    }
}

#[test]
fn polar_isometry_is_closest() {
    let (polar, grid) = polar_oracle(8, 4, 10_000, 6);
    assert!(polar <= grid + 1e-6, "polar {polar} vs grid {grid}");
    let (polar, grid) = polar_oracle(2, 1, 10_000, 7);
    assert!((polar - grid).abs() <= 1e-6, "polar {polar} vs grid {grid}");
}
