//! Seeded random matrices. Every generator takes an explicit RNG so trials
//! are reproducible from `(master seed, stream, index)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matcore::{c, eigh, identity, CMatrix, CVector, C64};

pub type TrialRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based seed split: trial `index` of stream `stream` is reproducible in isolation.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)).wrapping_add(index))
}

/// Stable 64-bit tag for a stream name (FNV-1a).
pub fn stream_tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(n, |_, _| complex_normal(rng));
    let norm = v.norm();
    v / c(norm)
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng);
    (&g + g.adjoint()) * c(0.5)
}

/// Haar-random unitary: QR of a Ginibre matrix with phases of `diag(R)` fixed.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    random_isometry(n, n, rng)
}

/// Haar-random isometry `C^cols → C^rows`.
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    assert!(cols <= rows, "isometry needs cols <= rows");
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / c(d.norm()) } else { c(1.0) };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random density matrix `GG*/tr(GG*)` with Ginibre `G` of the given rank.
pub fn random_density<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, rank.max(1), rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Random PSD matrix with unit operator norm.
pub fn random_psd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng);
    let p = &g * g.adjoint();
    let (vals, _) = eigh(&p);
    p / c(vals[n - 1])
}

/// Random matrix with operator norm one.
pub fn random_unit_ball<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng);
    let s = crate::matcore::op_norm(&g);
    g / c(s)
}

/// Unitary `exp(i·scale·H)` close to the identity, `H` a unit-norm random Hermitian.
pub fn small_unitary<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> CMatrix {
    let h = random_hermitian(n, rng);
    let (vals, vecs) = eigh(&h);
    let top = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut d = identity(n);
    for k in 0..n {
        d[(k, k)] = C64::from_polar(1.0, scale * vals[k] / top);
    }
    &vecs * d * vecs.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::op_norm;

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
        assert_ne!(stream_tag("crux"), stream_tag("cutdown"));
    }

    #[test]
    fn isometries_are_isometric() {
        let mut rng = rng_from_seed(0);
        let v = random_isometry(7, 3, &mut rng);
        assert!(op_norm(&(v.adjoint() * &v - identity(3))) < 1e-12);
        let u = small_unitary(4, 0.1, &mut rng);
        assert!(op_norm(&(u.adjoint() * &u - identity(4))) < 1e-12);
        assert!(op_norm(&(u - identity(4))) <= 0.1 + 1e-12);
    }

    #[test]
    fn density_has_unit_trace() {
        let mut rng = rng_from_seed(1);
        let rho = random_density(5, 2, &mut rng);
        assert!((rho.trace() - c(1.0)).norm() < 1e-12);
        assert!(crate::matcore::min_eigenvalue(&rho) > -1e-12);
    }
}
