//! Deterministic random streams and uniform sampling on the unit hypersphere.
//!
//! Every Monte Carlo trial owns an independent ChaCha8 stream derived from
//! `(seed, path)`, where `path` names the experiment and the trial/layer/head
//! coordinates. Results therefore do not depend on how trials are scheduled.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, Uniform};

use crate::error::{invalid, Result};
use crate::linalg::RowVector;

pub type StreamRng = ChaCha8Rng;

/// Experiment tags mixed into stream paths so that labs never share streams.
pub mod domain {
    pub const SPHERE: u64 = 0x5350_4845_5245;
    pub const SNR: u64 = 0x0053_4e52;
    pub const FAILURE: u64 = 0x4641_494c;
    pub const FRONTIER_WORST: u64 = 0x4652_4f4e_5457;
    pub const FRONTIER_AVG: u64 = 0x4652_4f4e_5441;
    pub const PROPAGATION: u64 = 0x5052_4f50;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, path)`.
pub fn stream_rng(seed: u64, path: &[u64]) -> StreamRng {
    let stream = path.iter().fold(0x243f_6a88_85a3_08d3u64, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Overwrite `out` with a uniform draw from the unit sphere in `out.len()` dims.
///
/// Standard normal entries are normalized; an all-zero draw is redrawn.
pub fn fill_unit_vector(rng: &mut StreamRng, out: &mut [f64]) {
    loop {
        let mut sq = 0.0;
        for x in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *x = g;
            sq += g * g;
        }
        if sq > 0.0 {
            let inv = 1.0 / libm::sqrt(sq);
            out.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}

/// One coordinate of a uniform unit vector in `dim` dimensions, equivalently
/// the inner product of a uniform unit vector with any fixed unit vector.
///
/// Drawn as `z / sqrt(z^2 + chi^2(dim - 1))` with `z` standard normal.
pub fn sphere_coordinate(rng: &mut StreamRng, dim: usize) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let rest = match dim {
            0 | 1 => 0.0,
            _ => ChiSquared::new((dim - 1) as f64).map_or(0.0, |c| c.sample(rng)),
        };
        let r2 = z * z + rest;
        if r2 > 0.0 {
            return z / libm::sqrt(r2);
        }
    }
}

/// `count` row-major unit vectors of dimension `dim`.
pub(crate) fn unit_rows(rng: &mut StreamRng, count: usize, dim: usize) -> Vec<f64> {
    let mut buf = alloc::vec![0.0; count * dim];
    for row in buf.chunks_exact_mut(dim) {
        fill_unit_vector(rng, row);
    }
    buf
}

/// Uniform index in `0..n` (`n >= 1`).
pub fn uniform_index(rng: &mut StreamRng, n: usize) -> usize {
    // n >= 1 is checked by every caller
    Uniform::new(0, n).map(|u| u.sample(rng)).unwrap_or(0)
}

/// Standard normal fill, used for random projections and test inputs.
pub fn fill_normal(rng: &mut StreamRng, out: &mut [f64], std_dev: f64) {
    for x in out.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *x = g * std_dev;
    }
}

/// `count` vectors drawn uniformly from the unit sphere in `dim` dimensions.
///
/// Identical `(dim, count, seed)` reproduce identical output bit for bit.
pub fn sample_unit_sphere(dim: usize, count: usize, seed: u64) -> Result<Vec<RowVector>> {
    if dim == 0 {
        return Err(invalid("sample_unit_sphere: dim must be >= 1"));
    }
    if count == 0 {
        return Err(invalid("sample_unit_sphere: count must be >= 1"));
    }
    let mut rng = stream_rng(seed, &[domain::SPHERE, dim as u64]);
    Ok((0..count)
        .map(|_| {
            let mut v = alloc::vec![0.0; dim];
            fill_unit_vector(&mut rng, &mut v);
            RowVector::from_vec_unchecked(v)
        })
        .collect())
}
