//! Locating a near-isometric coordinate of a map into a block codomain, and
//! the pinching maps `x ↦ ⊕ p x q`.

use rand::Rng;
use serde::Serialize;

use crate::cbnorm::{inverse_cb_upper, positive_min, NormOptions};
use crate::cpmap::{LinearMap, MatLinMap};
use crate::error::{Error, Result};
use crate::matcore::{c, identity, op_norm, zeros, CMatrix, Projection};
use crate::random::{derive_seed, random_isometry, rng_from_seed};

/// Evaluation of one coordinate during [`find_good_coordinate`].
#[derive(Clone, Debug, Serialize)]
pub struct CoordinateTrace {
    pub index: usize,
    /// Smallest `‖φ_i(q)‖` found over rank-one projections `q`.
    pub positive_min: f64,
    /// `(2c − 1)⁻¹` when `c > 1/2`.
    pub certified_upper: Option<f64>,
    /// Compressions by sampled rank-`n` projections that were also evaluated.
    pub compressions: usize,
}

impl CoordinateTrace {
    fn key(&self) -> (f64, usize) {
        (self.certified_upper.unwrap_or(f64::INFINITY), self.index)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoordinateSearchResult {
    pub index: usize,
    pub certified_upper: f64,
    /// Every coordinate, ordered by `(certified_upper, index)`.
    pub traces: Vec<CoordinateTrace>,
    /// The hypothesis `δ` supplied by the caller, recorded only.
    pub delta_hypothesis: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SplitOptions {
    pub search: NormOptions,
    /// Rank-`n` compressions sampled per oversized block; zero disables the reduction.
    pub pair_samples: usize,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            search: NormOptions {
                restarts: 8,
                max_iter: 150,
                ..NormOptions::default()
            },
            pair_samples: 0,
            seed: 0x5b1,
        }
    }
}

/// `x ↦ ⊕_{(p,q)} F_p* x F_q`, each coordinate an `m × m` block.
pub fn pinch_map(m: usize, n: usize, pairs: &[(Projection, Projection)]) -> Result<MatLinMap> {
    if pairs.is_empty() {
        return Err(Error::DegenerateInput("no projection pairs".into()));
    }
    let mut frames = Vec::with_capacity(pairs.len());
    for (p, q) in pairs {
        for proj in [p, q] {
            if proj.dim() != n || proj.rank() != m {
                return Err(Error::DimensionMismatch {
                    context: "pinching projection rank",
                    expected: m,
                    found: proj.rank(),
                });
            }
        }
        frames.push((p.frame(), q.frame()));
    }
    let total = m * pairs.len();
    let map = MatLinMap::from_fn(n, total, |x| {
        let mut y = zeros(total, total);
        for (idx, (fp, fq)) in frames.iter().enumerate() {
            y.view_mut((idx * m, idx * m), (m, m))
                .copy_from(&(fp.adjoint() * x * fq));
        }
        y
    });
    map.with_blocks(vec![m; pairs.len()])
}

/// All pairs of coordinate projections of rank `m` in `M_n` (`C(n,m)²` pairs).
pub fn coordinate_pairs(m: usize, n: usize) -> Vec<(Projection, Projection)> {
    let subsets = subsets(n, m);
    let projs: Vec<Projection> = subsets
        .iter()
        .map(|s| {
            let f = CMatrix::from_fn(n, m, |r, col| c(if r == s[col] { 1.0 } else { 0.0 }));
            Projection::from_frame(&f)
        })
        .collect();
    let mut out = Vec::with_capacity(projs.len() * projs.len());
    for p in &projs {
        for q in &projs {
            out.push((p.clone(), q.clone()));
        }
    }
    out
}

fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, m, &mut Vec::new(), &mut out);
    out
}

/// Seeded pairs of Haar-random rank-`m` projections.
pub fn random_pairs<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    count: usize,
    rng: &mut R,
) -> Vec<(Projection, Projection)> {
    (0..count)
        .map(|_| {
            let p = Projection::from_frame(&random_isometry(n, m, rng));
            let q = Projection::from_frame(&random_isometry(n, m, rng));
            (p, q)
        })
        .collect()
}

/// Largest `‖P^{(level)}(x)‖ − ‖x‖` over sampled unit-norm `x` (non-positive for a complete contraction).
pub fn pinch_norm_excess<R: Rng + ?Sized>(
    pinch: &MatLinMap,
    level: usize,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x = crate::random::random_unit_ball(level * pinch.dom_dim(), rng);
        worst = worst.max(op_norm(&pinch.apply_amplified(&x, level)) - 1.0);
    }
    worst
}

fn trace_for(index: usize, map: &MatLinMap, n: usize, opts: &SplitOptions) -> CoordinateTrace {
    let search = opts.search.with_seed(derive_seed(opts.seed, 0xc0, index as u64));
    let pm = positive_min(map, 1, &search);
    let mut best_c = pm.value;
    let mut compressions = 0;
    let k = map.cod_dim();
    if k > n && opts.pair_samples > 0 {
        // ‖F* y F‖ ≤ ‖y‖, so a certificate for a compression certifies the coordinate
        let mut rng = rng_from_seed(derive_seed(opts.seed, 0xc1, index as u64));
        for _ in 0..opts.pair_samples {
            let f = random_isometry(k, n, &mut rng);
            let compressed = map.cod_conjugate(&f);
            best_c = best_c.max(positive_min(&compressed, 1, &search).value);
            compressions += 1;
        }
    }
    CoordinateTrace {
        index,
        positive_min: best_c,
        certified_upper: inverse_cb_upper(best_c).ok(),
        compressions,
    }
}

/// Best coordinate of `φ: M_n → ⊕ M_{k_i}` by certified inverse bound.
///
/// Succeeds when the best certificate is below `1 + ε`; otherwise returns
/// [`Error::CoordinateNotFound`] with every trace.
pub fn find_good_coordinate(
    phi: &MatLinMap,
    epsilon: f64,
    delta_hypothesis: f64,
    opts: &SplitOptions,
) -> Result<CoordinateSearchResult> {
    let n = phi.dom_dim();
    let coords: Vec<MatLinMap> = (0..phi.blocks().len())
        .map(|i| phi.coordinate(i))
        .collect::<Result<_>>()?;
    let mut traces = crate::par::map_indexed(coords.len(), |i| trace_for(i, &coords[i], n, opts));
    traces.sort_by(|a, b| a.key().partial_cmp(&b.key()).expect("finite keys"));
    let best = &traces[0];
    match best.certified_upper {
        Some(u) if u < 1.0 + epsilon => Ok(CoordinateSearchResult {
            index: best.index,
            certified_upper: u,
            traces,
            delta_hypothesis,
        }),
        other => Err(Error::CoordinateNotFound {
            best: other.unwrap_or(f64::INFINITY),
            traces,
        }),
    }
}

/// Blend `(1−t)·Ad_V + t·tr(·)/k·1_k` whose certified inverse bound equals `distortion`.
///
/// With `c = (1 + 1/D)/2` the positive minimum is exactly `1 − t(1 − 1/k)`.
pub fn distorted_coordinate<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    distortion: f64,
    rng: &mut R,
) -> Result<MatLinMap> {
    if k < n {
        return Err(Error::DimensionMismatch {
            context: "coordinate block",
            expected: n,
            found: k,
        });
    }
    let target = 0.5 * (1.0 + 1.0 / distortion);
    let t = (1.0 - target) / (1.0 - 1.0 / k as f64);
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!(
            "distortion {distortion} not reachable in M_{k}"
        )));
    }
    let v = random_isometry(k, n, rng);
    let one = identity(k);
    Ok(MatLinMap::from_fn(n, k, |x| {
        &v * x * v.adjoint() * c(1.0 - t) + &one * (x.trace() * c(t / k as f64))
    }))
}

/// Direct sum of distorted coordinates; `distortions[i]` for block `i`.
pub fn engineered_block_map(
    n: usize,
    block_sizes: &[usize],
    distortions: &[f64],
    seed: u64,
) -> Result<MatLinMap> {
    if block_sizes.len() != distortions.len() {
        return Err(Error::DimensionMismatch {
            context: "engineered blocks",
            expected: block_sizes.len(),
            found: distortions.len(),
        });
    }
    let mut rng = rng_from_seed(derive_seed(seed, 0xeb, 0));
    let parts = block_sizes
        .iter()
        .zip(distortions)
        .map(|(&k, &d)| distorted_coordinate(n, k, d, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    MatLinMap::direct_sum(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rank_pinch_is_identity() {
        let p = pinch_map(3, 3, &[(Projection::identity(3), Projection::identity(3))]).unwrap();
        assert!((p.choi() - MatLinMap::identity(3).choi()).norm() < 1e-14);
    }

    #[test]
    fn rank_one_pinch_extracts_entries() {
        let pairs = coordinate_pairs(1, 2);
        assert_eq!(pairs.len(), 4);
        let p = pinch_map(1, 2, &pairs).unwrap();
        let mut rng = rng_from_seed(4);
        let x = crate::random::ginibre(2, 2, &mut rng);
        let y = p.apply(&x);
        for (idx, (i, j)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            assert!((y[(idx, idx)] - x[(i, j)]).norm() < 1e-14);
        }
        assert!(pinch_norm_excess(&p, 1, 20, &mut rng) <= 1e-9);
        // full family of rank-one pairs is isometric at level one
        for _ in 0..20 {
            let x = crate::random::random_unit_ball(2, &mut rng);
            let y = p.apply(&x);
            assert!(op_norm(&y) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rank_mismatch_rejected() {
        let r = pinch_map(2, 3, &[(Projection::identity(3), Projection::identity(3))]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn exact_block_wins() {
        let e = CMatrix::from_fn(4, 2, |r, s| c(if r == s { 1.0 } else { 0.0 }));
        let phi = MatLinMap::direct_sum(&[MatLinMap::conjugation(&e), MatLinMap::zero(2, 3)]).unwrap();
        let res = find_good_coordinate(&phi, 0.01, 0.0, &SplitOptions::default()).unwrap();
        assert_eq!(res.index, 0);
        assert!((res.certified_upper - 1.0).abs() < 1e-6);
    }

    #[test]
    fn engineered_distortions_are_ordered() {
        let phi = engineered_block_map(2, &[3, 2, 4], &[1.001, 1.6, 2.2], 9).unwrap();
        let res = find_good_coordinate(&phi, 0.01, 0.0, &SplitOptions::default()).unwrap();
        assert_eq!(res.index, 0);
        let uppers: Vec<f64> = res.traces.iter().map(|t| t.certified_upper.unwrap()).collect();
        assert!((uppers[0] - 1.001).abs() < 1e-6);
        assert!((uppers[1] - 1.6).abs() < 1e-6);
        assert!((uppers[2] - 2.2).abs() < 1e-6);
    }

    #[test]
    fn no_good_coordinate_reports_traces() {
        let phi = engineered_block_map(2, &[2, 3], &[1.5, 1.7], 1).unwrap();
        match find_good_coordinate(&phi, 0.01, 0.0, &SplitOptions::default()) {
            Err(Error::CoordinateNotFound { best, traces }) => {
                assert_eq!(traces.len(), 2);
                assert!((best - 1.5).abs() < 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
