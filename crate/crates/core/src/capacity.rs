//! Monte Carlo capacity lab.
//!
//! Memory model: `n` keys and `n` values drawn uniformly from the unit
//! spheres in `d_k` and `d_v` dimensions, identity activations, `alpha = 1`.
//! Probing with `q = k_m` splits the retrieval into
//!
//! ```text
//! r = (k_m . k_m) v_m  +  sum_{j != m} (k_m . k_j) v_j
//!     `--- signal --'     `------- interference -----'
//! ```
//!
//! with expected noise power `(n - 1) / d_k`. A retrieval fails when
//! `|noise|^2 >= delta |signal|^2`. Markov's inequality bounds a single
//! failure by `(n - 1) / (delta d_k)`, the union bound bounds any failure
//! among the `n` probes by `n (n - 1) / (delta d_k)`.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{check_dim, invalid, Result};
use crate::exec::TrialExecutor;
use crate::linalg::{axpy, dot, RowVector};
use crate::sampling::{domain, sphere_coordinate, stream_rng, uniform_index, unit_rows, StreamRng};
use crate::stats::{log_log_fit, wilson_halfwidth, LineFit};

/// Tolerance on `|k| = 1` accepted by [`signal_noise_decompose`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityTrialConfig {
    pub d_k: usize,
    pub d_v: usize,
    pub n: usize,
    /// Failure threshold on the noise-to-signal power ratio.
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    /// Gram-Schmidt the keys (requires `n <= d_k`); removes all interference.
    pub orthogonal_keys: bool,
}

impl CapacityTrialConfig {
    pub fn new(
        d_k: usize,
        d_v: usize,
        n: usize,
        delta: f64,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            d_k,
            d_v,
            n,
            delta,
            trials,
            seed,
            orthogonal_keys: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_k == 0 || self.d_v == 0 || self.n == 0 {
            return Err(invalid("d_k, d_v and n must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta must be a positive finite number"));
        }
        if self.orthogonal_keys && self.n > self.d_k {
            return Err(invalid("orthogonal keys need n <= d_k"));
        }
        Ok(())
    }

    /// `(n - 1) / (delta d_k)`.
    pub fn markov_bound(&self) -> f64 {
        (self.n as f64 - 1.0) / (self.delta * self.d_k as f64)
    }

    /// `n (n - 1) / (delta d_k)`.
    pub fn union_bound(&self) -> f64 {
        self.n as f64 * self.markov_bound()
    }

    /// `(n - 1) / d_k`.
    pub fn predicted_noise_power(&self) -> f64 {
        (self.n as f64 - 1.0) / self.d_k as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrReport {
    pub mean_signal_power: f64,
    pub mean_noise_power: f64,
    pub empirical_snr: f64,
    /// `d_k / (n - 1)`.
    pub predicted_snr: f64,
    pub trials: u64,
}

/// Empirical failure rates and the bounds they are checked against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureReport {
    /// Rate of failure of the designated probe (target index uniform per trial).
    pub single_failure_rate: f64,
    pub single_ci_halfwidth: f64,
    pub markov_bound: f64,
    /// Rate at which at least one of the `n` probes fails.
    pub any_failure_rate: f64,
    pub any_ci_halfwidth: f64,
    pub union_bound: f64,
    pub trials: u64,
}

impl FailureReport {
    /// Empirical single rate within `bound + 3 * CI`.
    pub fn markov_compliant(&self) -> bool {
        self.single_failure_rate <= self.markov_bound + 3.0 * self.single_ci_halfwidth
    }

    /// Empirical any-failure rate within `min(1, bound) + 3 * CI`.
    pub fn union_compliant(&self) -> bool {
        self.any_failure_rate <= self.union_bound.min(1.0) + 3.0 * self.any_ci_halfwidth
    }
}

/// Split `k_m S` into signal and interference for unit-norm keys.
///
/// `m` is a zero-based index into `keys`.
pub fn signal_noise_decompose(
    keys: &[RowVector],
    values: &[RowVector],
    m: usize,
) -> Result<(RowVector, RowVector)> {
    check_dim("signal_noise_decompose pairs", keys.len(), values.len())?;
    if m >= keys.len() {
        return Err(invalid("target index out of range"));
    }
    let d_k = keys[0].dim();
    let d_v = values[0].dim();
    for (k, v) in keys.iter().zip(values) {
        check_dim("signal_noise_decompose d_k", d_k, k.dim())?;
        check_dim("signal_noise_decompose d_v", d_v, v.dim())?;
        if libm::fabs(k.norm() - 1.0) > UNIT_NORM_TOLERANCE {
            return Err(invalid("keys must be unit norm"));
        }
    }
    let km = keys[m].as_slice();
    let mut signal = vec![0.0; d_v];
    axpy(dot(km, km), values[m].as_slice(), &mut signal);
    let mut noise = vec![0.0; d_v];
    for (j, (k, v)) in keys.iter().zip(values).enumerate() {
        if j != m {
            axpy(dot(km, k.as_slice()), v.as_slice(), &mut noise);
        }
    }
    Ok((
        RowVector::from_vec_unchecked(signal),
        RowVector::from_vec_unchecked(noise),
    ))
}

/// Gram structure of `n` independent uniform unit vectors in `d >= n`
/// dimensions, sampled without the vectors themselves.
///
/// For `X` with i.i.d. standard normal entries, `X X^T` is Wishart and has
/// the Bartlett factorization `L L^T` with `L` lower triangular,
/// `L_ii ~ sqrt(chi^2(d - i))` (zero-based `i`) and `L_ij ~ N(0, 1)` below
/// the diagonal. Normalizing rows gives exactly the Gram matrix of the unit
/// vectors `x_i / |x_i|`, using `O(n^2)` draws instead of `O(n d)`.
pub(crate) struct GramFactor {
    n: usize,
    /// Row-major `n x n`, zero above the diagonal.
    l: Vec<f64>,
    inv_norm: Vec<f64>,
}

impl GramFactor {
    fn sample(rng: &mut StreamRng, n: usize, d: usize) -> Self {
        debug_assert!(n <= d);
        let mut l = vec![0.0; n * n];
        let mut inv_norm = vec![0.0; n];
        for i in 0..n {
            let row = &mut l[i * n..i * n + i + 1];
            for x in row[..i].iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            let chi = ChiSquared::new((d - i) as f64)
                .map(|c| c.sample(rng))
                .unwrap_or(1.0);
            row[i] = libm::sqrt(chi);
            inv_norm[i] = 1.0 / libm::sqrt(dot(row, row));
        }
        Self { n, l, inv_norm }
    }

    /// Nonzero part of row `i`.
    fn row(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..i * self.n + i + 1]
    }

    /// Inner product of unit vectors `i` and `j`.
    fn cosine(&self, i: usize, j: usize) -> f64 {
        let len = i.min(j) + 1;
        dot(&self.row(i)[..len], &self.row(j)[..len]) * self.inv_norm[i] * self.inv_norm[j]
    }
}

/// Explicit row-major keys and values, used when `n` exceeds a dimension
/// (the Gram matrix is then singular) or keys are orthonormalized.
pub(crate) struct Vectors {
    n: usize,
    d_k: usize,
    d_v: usize,
    keys: Vec<f64>,
    values: Vec<f64>,
}

impl Vectors {
    fn key(&self, j: usize) -> &[f64] {
        &self.keys[j * self.d_k..(j + 1) * self.d_k]
    }

    fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.d_v..(j + 1) * self.d_v]
    }

    fn orthonormalize_keys(&mut self) {
        let d = self.d_k;
        for j in 0..self.n {
            let (done, rest) = self.keys.split_at_mut(j * d);
            let kj = &mut rest[..d];
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for i in 0..j {
                    let ki = &done[i * d..(i + 1) * d];
                    let c = dot(ki, kj);
                    axpy(-c, ki, kj);
                }
            }
            let inv = 1.0 / libm::sqrt(dot(kj, kj));
            kj.iter_mut().for_each(|x| *x *= inv);
        }
    }
}

/// One sampled memory of `n` unit key/value pairs.
pub(crate) enum Memory {
    Factored {
        keys: GramFactor,
        values: GramFactor,
    },
    Explicit(Vectors),
}

impl Memory {
    pub(crate) fn sample(rng: &mut StreamRng, n: usize, d_k: usize, d_v: usize) -> Self {
        if n <= d_k && n <= d_v {
            let keys = GramFactor::sample(rng, n, d_k);
            let values = GramFactor::sample(rng, n, d_v);
            Self::Factored { keys, values }
        } else {
            Self::Explicit(Self::vectors(rng, n, d_k, d_v))
        }
    }

    fn vectors(rng: &mut StreamRng, n: usize, d_k: usize, d_v: usize) -> Vectors {
        let keys = unit_rows(rng, n, d_k);
        let values = unit_rows(rng, n, d_v);
        Vectors {
            n,
            d_k,
            d_v,
            keys,
            values,
        }
    }

    /// Memory with orthonormalized keys (`n <= d_k`): interference vanishes.
    fn sample_orthogonal(rng: &mut StreamRng, n: usize, d_k: usize, d_v: usize) -> Self {
        let mut v = Self::vectors(rng, n, d_k, d_v);
        v.orthonormalize_keys();
        Self::Explicit(v)
    }

    fn n(&self) -> usize {
        match self {
            Self::Factored { keys, .. } => keys.n,
            Self::Explicit(v) => v.n,
        }
    }

    /// `(signal power, noise power)` of the probe `q = k_m`.
    fn probe_with(&self, m: usize, scratch: &mut Vec<f64>) -> (f64, f64) {
        scratch.clear();
        match self {
            Self::Factored { keys, values } => {
                // noise = sum_j c_j v_j, expressed in the value factor's basis
                scratch.resize(values.n, 0.0);
                for j in (0..values.n).filter(|&j| j != m) {
                    let w = keys.cosine(m, j) * values.inv_norm[j];
                    axpy(w, values.row(j), &mut scratch[..=j]);
                }
                let c = keys.cosine(m, m);
                (c * c, dot(scratch, scratch))
            }
            Self::Explicit(v) => {
                scratch.resize(v.d_v, 0.0);
                let km = v.key(m);
                for j in (0..v.n).filter(|&j| j != m) {
                    axpy(dot(km, v.key(j)), v.value(j), scratch);
                }
                let c = dot(km, km);
                let vm = v.value(m);
                (c * c * dot(vm, vm), dot(scratch, scratch))
            }
        }
    }

    pub(crate) fn probe(&self, m: usize) -> (f64, f64) {
        self.probe_with(m, &mut Vec::new())
    }
}

/// `(signal power, noise power)` of one designated probe of a fresh memory,
/// sampled in `O(n)` draws.
///
/// Given the probe key, the overlaps `c_j = k_m . k_j` of the other keys are
/// independent sphere coordinates. The interference `sum_j c_j v_j` is a
/// random walk with steps of length `|c_j|` in uniform directions, so only its
/// squared length needs tracking:
/// `|W + c u|^2 = |W|^2 + c^2 + 2 |c| |W| t` with `t` a sphere coordinate in
/// `d_v` dimensions. The signal `(k_m . k_m) v_m` has power exactly 1.
pub(crate) fn designated_probe(
    rng: &mut StreamRng,
    n: usize,
    d_k: usize,
    d_v: usize,
) -> (f64, f64) {
    let mut w2: f64 = 0.0;
    for _ in 1..n {
        let c = sphere_coordinate(rng, d_k);
        let t = sphere_coordinate(rng, d_v);
        w2 = (w2 + c * c + 2.0 * libm::fabs(c) * libm::sqrt(w2) * t).max(0.0);
    }
    (1.0, w2)
}

#[derive(Debug, Clone, Copy, Default)]
struct ProbeOutcome {
    target_failed: bool,
    any_failed: bool,
}

/// Probe the target first, then the remaining keys until one fails.
fn probe_all(mem: &Memory, target: usize, delta: f64) -> ProbeOutcome {
    let mut scratch = Vec::new();
    let mut fails = |m: usize| {
        let (signal, noise) = mem.probe_with(m, &mut scratch);
        noise >= delta * signal
    };
    let target_failed = fails(target);
    let any_failed = target_failed || (0..mem.n()).filter(|&m| m != target).any(&mut fails);
    ProbeOutcome {
        target_failed,
        any_failed,
    }
}

fn draw(cfg: &CapacityTrialConfig, tag: u64, trial: u64) -> (Memory, usize) {
    let mut rng = stream_rng(
        cfg.seed,
        &[tag, cfg.d_k as u64, cfg.d_v as u64, cfg.n as u64, trial],
    );
    let mem = if cfg.orthogonal_keys {
        Memory::sample_orthogonal(&mut rng, cfg.n, cfg.d_k, cfg.d_v)
    } else {
        Memory::sample(&mut rng, cfg.n, cfg.d_k, cfg.d_v)
    };
    let m = uniform_index(&mut rng, cfg.n);
    (mem, m)
}

/// Average signal and noise power of the designated probe over `cfg.trials`
/// independent memories.
pub fn empirical_snr<E: TrialExecutor>(cfg: &CapacityTrialConfig, exec: &E) -> Result<SnrReport> {
    cfg.validate()?;
    if cfg.n < 2 {
        return Err(invalid(
            "empirical_snr needs n >= 2 (no interference otherwise)",
        ));
    }
    snr_with_tag(cfg, domain::SNR, exec)
}

fn snr_with_tag<E: TrialExecutor>(
    cfg: &CapacityTrialConfig,
    tag: u64,
    exec: &E,
) -> Result<SnrReport> {
    let powers = exec.map_indexed(0..cfg.trials, |t| {
        if cfg.orthogonal_keys {
            let (mem, m) = draw(cfg, tag, t);
            mem.probe(m)
        } else {
            // every probe index is exchangeable, so the designated one needs no index
            let mut rng = stream_rng(
                cfg.seed,
                &[tag, cfg.d_k as u64, cfg.d_v as u64, cfg.n as u64, t],
            );
            designated_probe(&mut rng, cfg.n, cfg.d_k, cfg.d_v)
        }
    });
    let (signal, noise) = powers
        .iter()
        .fold((0.0, 0.0), |(s, n), (ps, pn)| (s + ps, n + pn));
    let trials = cfg.trials as f64;
    let mean_signal_power = signal / trials;
    let mean_noise_power = noise / trials;
    Ok(SnrReport {
        mean_signal_power,
        mean_noise_power,
        empirical_snr: mean_signal_power / mean_noise_power,
        predicted_snr: cfg.d_k as f64 / (cfg.n as f64 - 1.0),
        trials: cfg.trials,
    })
}

/// Single-probe and any-probe failure rates from one pass over shared draws,
/// with 95% Wilson half-widths and the Markov / union bounds.
pub fn failure_report<E: TrialExecutor>(
    cfg: &CapacityTrialConfig,
    exec: &E,
) -> Result<FailureReport> {
    cfg.validate()?;
    let outcomes = exec.map_indexed(0..cfg.trials, |t| {
        let (mem, m) = draw(cfg, domain::FAILURE, t);
        probe_all(&mem, m, cfg.delta)
    });
    let single = outcomes.iter().filter(|o| o.target_failed).count() as u64;
    let any = outcomes.iter().filter(|o| o.any_failed).count() as u64;
    let trials = cfg.trials as f64;
    Ok(FailureReport {
        single_failure_rate: single as f64 / trials,
        single_ci_halfwidth: wilson_halfwidth(single, cfg.trials),
        markov_bound: cfg.markov_bound(),
        any_failure_rate: any as f64 / trials,
        any_ci_halfwidth: wilson_halfwidth(any, cfg.trials),
        union_bound: cfg.union_bound(),
        trials: cfg.trials,
    })
}

/// Settings for [`capacity_frontier`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierConfig {
    /// Ascending key dimensions.
    pub d_k_list: Vec<usize>,
    /// Value dimension; `None` uses `d_v = d_k`.
    pub d_v: Option<usize>,
    /// Tolerated any-failure probability.
    pub epsilon: f64,
    pub delta: f64,
    /// Required SNR for the average-case frontier; `None` uses `1 / delta`,
    /// the SNR at which the failure threshold sits.
    pub gamma_snr: Option<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl FrontierConfig {
    pub fn gamma_snr(&self) -> f64 {
        self.gamma_snr.unwrap_or(1.0 / self.delta)
    }

    fn validate(&self) -> Result<()> {
        if self.d_k_list.is_empty() || self.d_k_list.contains(&0) {
            return Err(invalid("d_k list must be non-empty and positive"));
        }
        if self.d_k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("d_k list must be strictly ascending"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon must lie in (0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta must be a positive finite number"));
        }
        if !(self.gamma_snr() > 0.0 && self.gamma_snr().is_finite()) {
            return Err(invalid("gamma_snr must be positive"));
        }
        if self.d_v == Some(0) {
            return Err(invalid("d_v must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub d_k: usize,
    /// Largest `n` whose empirical any-failure rate is at most `epsilon`.
    pub n_max_worst: usize,
    pub worst_saturated: bool,
    /// Any-failure rate measured at `n_max_worst`.
    pub any_failure_rate_at_max: f64,
    /// Largest `n` whose empirical SNR is at least `gamma_snr`.
    pub n_max_average: usize,
    pub average_saturated: bool,
    /// `sqrt(epsilon delta d_k)`.
    pub sqrt_reference: f64,
    /// `1 + d_k / gamma_snr`.
    pub linear_reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierReport {
    pub points: Vec<FrontierPoint>,
    /// Log-log fit of `n_max_worst` against `d_k` (needs two or more points).
    pub worst_fit: Option<LineFit>,
    /// Log-log fit of `n_max_average` against `d_k`.
    pub average_fit: Option<LineFit>,
    pub gamma_snr: f64,
}

impl FrontierReport {
    pub fn worst_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].n_max_worst <= w[1].n_max_worst)
    }

    pub fn average_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].n_max_average <= w[1].n_max_average)
    }
}

/// Search ceiling for the frontier, in multiples of `d_k`.
pub const FRONTIER_CEILING_FACTOR: usize = 4;

/// Largest `n` in `[1, ceiling]` accepted by `accepts`, assumed monotone.
/// Returns `(n_max, saturated)`.
///
/// Candidates double from 1 until one is rejected (or the ceiling is
/// accepted) and the bracket is then bisected, so large and expensive `n`
/// are only evaluated when the frontier actually reaches them.
fn search_largest(ceiling: usize, mut accepts: impl FnMut(usize) -> bool) -> (usize, bool) {
    let ceiling = ceiling.max(1);
    if !accepts(1) {
        return (1, false);
    }
    let mut lo = 1;
    let hi = loop {
        let next = (lo * 2).min(ceiling);
        if next == lo {
            return (ceiling, true);
        }
        if accepts(next) {
            lo = next;
        } else {
            break next;
        }
    };
    let mut hi = hi;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if accepts(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, false)
}

/// Any-failure count over `trials` fresh memories, stopping as soon as the
/// count exceeds `allowed`. Returns `None` on early rejection.
fn any_failures_within<E: TrialExecutor>(
    cfg: &CapacityTrialConfig,
    allowed: u64,
    exec: &E,
) -> Option<u64> {
    let mut failures = 0u64;
    let mut start = 0u64;
    // the first chunk is the smallest that can already reject
    let mut chunk = (allowed + 1).max(16);
    while start < cfg.trials {
        let end = (start + chunk).min(cfg.trials);
        let flags = exec.map_indexed(start..end, |t| {
            let (mem, m) = draw(cfg, domain::FRONTIER_WORST, t);
            probe_all(&mem, m, cfg.delta).any_failed
        });
        failures += flags.iter().filter(|f| **f).count() as u64;
        if failures > allowed {
            return None;
        }
        start = end;
        chunk *= 2;
    }
    Some(failures)
}

/// Empirical capacity frontier over `d_k`.
///
/// For every `d_k` two binary searches over `n in [1, 4 d_k]` run with fresh
/// trials per candidate: the worst-case frontier (any-failure rate at most
/// `epsilon`) and the average-case frontier (empirical SNR at least
/// `gamma_snr`). Both are fitted on log-log axes.
pub fn capacity_frontier<E: TrialExecutor>(
    cfg: &FrontierConfig,
    exec: &E,
) -> Result<FrontierReport> {
    cfg.validate()?;
    let gamma_snr = cfg.gamma_snr();
    let allowed = libm::floor(cfg.epsilon * cfg.trials as f64 + 1e-9) as u64;
    let mut points = Vec::with_capacity(cfg.d_k_list.len());
    for &d_k in &cfg.d_k_list {
        let trial_cfg = |n: usize| CapacityTrialConfig {
            d_k,
            d_v: cfg.d_v.unwrap_or(d_k),
            n,
            delta: cfg.delta,
            trials: cfg.trials,
            seed: cfg.seed,
            orthogonal_keys: false,
        };
        let ceiling = FRONTIER_CEILING_FACTOR * d_k;

        let mut rate_at = vec![None; ceiling + 1];
        let (n_max_worst, worst_saturated) = search_largest(ceiling, |n| {
            let res = any_failures_within(&trial_cfg(n), allowed, exec);
            rate_at[n] = res;
            res.is_some()
        });
        let any_failure_rate_at_max =
            rate_at[n_max_worst].map_or(0.0, |f| f as f64 / cfg.trials as f64);

        let (n_max_average, average_saturated) = search_largest(ceiling, |n| {
            n < 2
                || snr_with_tag(&trial_cfg(n), domain::FRONTIER_AVG, exec)
                    .map(|r| r.empirical_snr >= gamma_snr)
                    .unwrap_or(false)
        });

        points.push(FrontierPoint {
            d_k,
            n_max_worst,
            worst_saturated,
            any_failure_rate_at_max,
            n_max_average,
            average_saturated,
            sqrt_reference: libm::sqrt(cfg.epsilon * cfg.delta * d_k as f64),
            linear_reference: 1.0 + d_k as f64 / gamma_snr,
        });
    }
    let dks: Vec<f64> = points.iter().map(|p| p.d_k as f64).collect();
    let fit = |ys: Vec<f64>| {
        if dks.len() >= 2 {
            log_log_fit(&dks, &ys).ok()
        } else {
            None
        }
    };
    let worst_fit = fit(points.iter().map(|p| p.n_max_worst as f64).collect());
    let average_fit = fit(points.iter().map(|p| p.n_max_average as f64).collect());
    Ok(FrontierReport {
        points,
        worst_fit,
        average_fit,
        gamma_snr,
    })
}
