//! Attention-only stacks of conditioning circuits.
//!
//! Layer `l`, head `h` forms its own associative state from the previous
//! layer's residual stream, reads it with the current token and writes the
//! normalized result back through `W_O`:
//!
//! ```text
//! S_i   = sum_{j<=i} f(y_j W_K)^T g(y_j W_V)
//! o_i   = Norm(f(y_i W_Q) S_i)
//! y'_i  = y_i + sum_h o_i W_O
//! ```
//!
//! The module also carries the error-propagation experiment on the abstract
//! unit-sphere memory model and the log-log scaling fits used to read it.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::activation::{ActivationKind, NormKind};
use crate::capacity::designated_probe;
use crate::error::{check_dim, invalid, Result};
use crate::exec::TrialExecutor;
use crate::kernels::{conditioning_output, project, AssociativeState, HeadConfig, ProjectionSet};
use crate::linalg::{axpy, vec_mat_into, DenseMatrix, RowVector};
use crate::sampling::{domain, stream_rng};
use crate::stats::{least_squares, wilson_halfwidth};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    heads: Vec<(ProjectionSet, HeadConfig)>,
    model_dim: usize,
}

impl LayerSpec {
    /// Every head must map `model_dim -> d_k` (query, key), `model_dim -> d_v`
    /// (value) and back `d_v -> model_dim`. A missing `W_O` means identity and
    /// needs `d_v = model_dim`.
    pub fn new(heads: Vec<(ProjectionSet, HeadConfig)>, model_dim: usize) -> Result<Self> {
        if heads.is_empty() {
            return Err(invalid("a layer needs at least one head"));
        }
        for (p, _) in &heads {
            check_dim("layer W_Q rows", model_dim, p.w_q.rows())?;
            check_dim("layer W_K rows", model_dim, p.w_k.rows())?;
            check_dim("layer W_V rows", model_dim, p.w_v.rows())?;
            match &p.w_o {
                Some(o) => check_dim("layer W_O cols", model_dim, o.cols())?,
                None => check_dim("layer identity W_O", model_dim, p.d_v())?,
            }
        }
        Ok(Self { heads, model_dim })
    }

    pub fn heads(&self) -> &[(ProjectionSet, HeadConfig)] {
        &self.heads
    }

    pub fn model_dim(&self) -> usize {
        self.model_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedNetwork {
    layers: Vec<LayerSpec>,
}

impl StackedNetwork {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| invalid("a network needs at least one layer"))?;
        for l in &layers {
            check_dim("network model_dim", first.model_dim, l.model_dim)?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn model_dim(&self) -> usize {
        self.layers[0].model_dim
    }
}

/// Run the residual stream through every layer; returns `y^(L)`.
pub fn forward_stack(net: &StackedNetwork, x: &DenseMatrix) -> Result<DenseMatrix> {
    check_dim("forward_stack input width", net.model_dim(), x.cols())?;
    let mut y = x.clone();
    for layer in &net.layers {
        let mut next = y.clone();
        for (proj, cfg) in &layer.heads {
            let q = project(&y, &proj.w_q)?;
            let k = project(&y, &proj.w_k)?;
            let v = project(&y, &proj.w_v)?;
            let mut state = AssociativeState::new(proj.d_k(), proj.d_v())?;
            let mut written = vec![0.0; layer.model_dim];
            for i in 0..y.rows() {
                state.associate(&k.row_vector(i), &v.row_vector(i), cfg)?;
                let o = conditioning_output(&q.row_vector(i), &state, cfg)?;
                let target =
                    &mut next.as_mut_slice()[i * layer.model_dim..(i + 1) * layer.model_dim];
                match &proj.w_o {
                    Some(w_o) => {
                        vec_mat_into(o.as_slice(), w_o, &mut written);
                        axpy(1.0, &written, target);
                    }
                    None => axpy(1.0, o.as_slice(), target),
                }
            }
        }
        y = next;
    }
    Ok(y)
}

/// Concept slots of the transitive-chain demo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concept {
    Animal = 0,
    Mammal = 1,
    Reptile = 2,
    Dog = 3,
    Lizard = 4,
}

/// Residual-stream layout of the demo (model dimension 16):
/// concepts live in dims 0..5, premise cues in 5..8 (animal, mammal,
/// reptile), the question marker in 8 and the layer-1 relay in 9..11.
mod layout {
    pub const MODEL_DIM: usize = 16;
    pub const CUE: usize = 5;
    pub const QUESTION: usize = 8;
    pub const RELAY: usize = 9;
    /// Question marker magnitude; small so the final answer dominates the stream.
    pub const QUESTION_SCALE: f64 = 0.05;
    /// Layer-1 write-back scale into the relay slots.
    pub const RELAY_SCALE: f64 = 0.05;
}

/// The two-layer routing network plus the inputs it is exercised on.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDemo {
    pub network: StackedNetwork,
}

/// Which premise pair precedes the question.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainContext {
    /// animal -> mammal, mammal -> dog
    Mammal,
    /// animal -> reptile, reptile -> lizard
    Reptile,
    /// question only
    NoPremise,
}

impl ChainContext {
    pub const ALL: [ChainContext; 3] = [Self::Mammal, Self::Reptile, Self::NoPremise];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mammal => "mammal",
            Self::Reptile => "reptile",
            Self::NoPremise => "no-premise",
        }
    }

    pub fn expected(self) -> Option<Concept> {
        match self {
            Self::Mammal => Some(Concept::Dog),
            Self::Reptile => Some(Concept::Lizard),
            Self::NoPremise => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOutcome {
    pub context: ChainContext,
    pub cosine_dog: f64,
    pub cosine_lizard: f64,
}

impl ChainOutcome {
    /// Expected concept above 0.99 cosine; without a premise both below 0.1.
    pub fn passes(&self) -> bool {
        match self.context {
            ChainContext::Mammal => self.cosine_dog > 0.99,
            ChainContext::Reptile => self.cosine_lizard > 0.99,
            ChainContext::NoPremise => self.cosine_dog < 0.1 && self.cosine_lizard < 0.1,
        }
    }
}

pub fn concept_vector(c: Concept) -> RowVector {
    RowVector::from_vec_unchecked(unit(c as usize))
}

fn unit(i: usize) -> Vec<f64> {
    let mut v = vec![0.0; layout::MODEL_DIM];
    v[i] = 1.0;
    v
}

/// `model_dim x cols` matrix with `scale` at each `(row, col)`.
fn selector(cols: usize, entries: &[(usize, usize)], scale: f64) -> DenseMatrix {
    let mut m = vec![0.0; layout::MODEL_DIM * cols];
    for &(r, c) in entries {
        m[r * cols + c] = scale;
    }
    DenseMatrix::from_vec_unchecked(layout::MODEL_DIM, cols, m)
}

fn cue_slot(c: Concept) -> usize {
    layout::CUE + c as usize
}

/// Build the two-layer chain network.
///
/// Layer 1 keys on premise cues, is queried by the question marker and
/// copies the paired category into a relay slot. Layer 2 keys on category
/// cues, is queried from the relay slot and writes the paired instance
/// (dog or lizard) into its concept slot.
pub fn build_chain_demo() -> ChainDemo {
    use layout::*;
    use Concept::*;
    let cfg = HeadConfig {
        f: ActivationKind::Identity,
        g: ActivationKind::Identity,
        alpha: 1.0,
        norm: NormKind::Rms,
    };
    let relay_out = {
        let mut m = vec![0.0; 2 * MODEL_DIM];
        m[RELAY] = RELAY_SCALE;
        m[MODEL_DIM + RELAY + 1] = RELAY_SCALE;
        DenseMatrix::from_vec_unchecked(2, MODEL_DIM, m)
    };
    let layer1 = ProjectionSet {
        w_q: selector(3, &[(QUESTION, 0)], 1.0),
        w_k: selector(
            3,
            &[
                (cue_slot(Animal), 0),
                (cue_slot(Mammal), 1),
                (cue_slot(Reptile), 2),
            ],
            1.0,
        ),
        w_v: selector(2, &[(Mammal as usize, 0), (Reptile as usize, 1)], 1.0),
        w_o: Some(relay_out),
    };
    let answer_out = {
        let mut m = vec![0.0; 2 * MODEL_DIM];
        m[Dog as usize] = 1.0;
        m[MODEL_DIM + Lizard as usize] = 1.0;
        DenseMatrix::from_vec_unchecked(2, MODEL_DIM, m)
    };
    let layer2 = ProjectionSet {
        w_q: selector(2, &[(RELAY, 0), (RELAY + 1, 1)], 1.0),
        w_k: selector(2, &[(cue_slot(Mammal), 0), (cue_slot(Reptile), 1)], 1.0),
        w_v: selector(2, &[(Dog as usize, 0), (Lizard as usize, 1)], 1.0),
        w_o: Some(answer_out),
    };
    let network = StackedNetwork {
        layers: vec![
            LayerSpec {
                heads: vec![(layer1, cfg)],
                model_dim: MODEL_DIM,
            },
            LayerSpec {
                heads: vec![(layer2, cfg)],
                model_dim: MODEL_DIM,
            },
        ],
    };
    ChainDemo { network }
}

impl ChainDemo {
    /// Token sequence for a context: premise tokens `cue(X) + concept(Y)`
    /// followed by the question token.
    pub fn input(&self, context: ChainContext) -> DenseMatrix {
        use Concept::*;
        let premise = |cue: Concept, target: Concept| {
            let mut t = unit(cue_slot(cue));
            t[target as usize] = 1.0;
            t
        };
        let mut question = vec![0.0; layout::MODEL_DIM];
        question[layout::QUESTION] = layout::QUESTION_SCALE;
        let mut tokens = match context {
            ChainContext::Mammal => vec![premise(Animal, Mammal), premise(Mammal, Dog)],
            ChainContext::Reptile => vec![premise(Animal, Reptile), premise(Reptile, Lizard)],
            ChainContext::NoPremise => vec![],
        };
        tokens.push(question);
        let rows = tokens.len();
        DenseMatrix::from_vec_unchecked(rows, layout::MODEL_DIM, tokens.concat())
    }

    /// Forward the context and read the question token's final state.
    pub fn run(&self, context: ChainContext) -> Result<ChainOutcome> {
        let x = self.input(context);
        let y = forward_stack(&self.network, &x)?;
        let last = y.row_vector(y.rows() - 1);
        Ok(ChainOutcome {
            context,
            cosine_dog: last.cosine(&concept_vector(Concept::Dog))?,
            cosine_lizard: last.cosine(&concept_vector(Concept::Lizard))?,
        })
    }
}

/// Settings of the error-propagation experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    pub layers: usize,
    pub heads: usize,
    pub n: usize,
    pub d_k: usize,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.n == 0 || self.d_k == 0 {
            return Err(invalid("L, H, n and d_k must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta must be a positive finite number"));
        }
        Ok(())
    }

    /// Per-head failure bound `n / (delta d_k)`.
    pub fn head_bound(&self) -> f64 {
        self.n as f64 / (self.delta * self.d_k as f64)
    }

    pub fn bound_vacuous(&self) -> bool {
        self.head_bound() >= 1.0
    }

    /// `1 - (1 - (n / (delta d_k))^H)^L`, capped at 1 when vacuous.
    pub fn closed_bound(&self) -> f64 {
        if self.bound_vacuous() {
            return 1.0;
        }
        let layer = libm::pow(self.head_bound(), self.heads as f64);
        1.0 - libm::pow(1.0 - layer, self.layers as f64)
    }

    /// First-order expansion `L (n / (delta d_k))^H`.
    pub fn approx_bound(&self) -> f64 {
        self.layers as f64 * libm::pow(self.head_bound(), self.heads as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationRecord {
    pub config: PropagationConfig,
    pub failures: u64,
    pub empirical_rate: f64,
    pub ci_halfwidth: f64,
    pub bound: f64,
    pub approx_bound: f64,
    pub bound_vacuous: bool,
    /// Failure rate of each layer (all heads failing).
    pub per_layer_rates: Vec<f64>,
    /// Failure rate of an individual head.
    pub head_failure_rate: f64,
}

impl PropagationRecord {
    pub fn within_bound(&self) -> bool {
        self.bound_vacuous || self.empirical_rate <= self.bound + 3.0 * self.ci_halfwidth
    }
}

struct TrialFailures {
    network: bool,
    layers: Vec<bool>,
    heads: u64,
}

/// Monte Carlo over independent head memories: a head fails when its
/// designated probe violates the noise threshold, a layer fails when all of
/// its heads fail, the network fails when any layer fails.
pub fn error_propagation_experiment<E: TrialExecutor>(
    cfg: &PropagationConfig,
    exec: &E,
) -> Result<PropagationRecord> {
    cfg.validate()?;
    let c = *cfg;
    let outcomes = exec.map_indexed(0..c.trials, |t| {
        let mut layers = Vec::with_capacity(c.layers);
        let mut heads = 0;
        for l in 0..c.layers as u64 {
            let mut all_failed = true;
            for h in 0..c.heads as u64 {
                let mut rng = stream_rng(c.seed, &[domain::PROPAGATION, t, l, h]);
                let (signal, noise) = designated_probe(&mut rng, c.n, c.d_k, c.d_k);
                let failed = noise >= c.delta * signal;
                heads += failed as u64;
                all_failed &= failed;
            }
            layers.push(all_failed);
        }
        TrialFailures {
            network: layers.iter().any(|f| *f),
            layers,
            heads,
        }
    });
    let failures = outcomes.iter().filter(|o| o.network).count() as u64;
    let trials = c.trials as f64;
    let per_layer_rates = (0..c.layers)
        .map(|l| outcomes.iter().filter(|o| o.layers[l]).count() as f64 / trials)
        .collect();
    let head_failures: u64 = outcomes.iter().map(|o| o.heads).sum();
    Ok(PropagationRecord {
        config: c,
        failures,
        empirical_rate: failures as f64 / trials,
        ci_halfwidth: wilson_halfwidth(failures, c.trials),
        bound: c.closed_bound(),
        approx_bound: c.approx_bound(),
        bound_vacuous: c.bound_vacuous(),
        per_layer_rates,
        head_failure_rate: head_failures as f64 / (trials * (c.layers * c.heads) as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingAxis {
    Layers,
    ContextLength,
    KeyDim,
    Heads,
}

impl ScalingAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Layers => "L",
            Self::ContextLength => "n",
            Self::KeyDim => "d_k",
            Self::Heads => "H",
        }
    }

    fn value(self, c: &PropagationConfig) -> f64 {
        match self {
            Self::Layers => c.layers as f64,
            Self::ContextLength => c.n as f64,
            Self::KeyDim => c.d_k as f64,
            Self::Heads => c.heads as f64,
        }
    }

    /// Parameters other than the swept one, which must agree across records.
    fn fixed(self, c: &PropagationConfig) -> [u64; 4] {
        let mut key = [c.layers as u64, c.n as u64, c.d_k as u64, c.heads as u64];
        let idx = match self {
            Self::Layers => 0,
            Self::ContextLength => 1,
            Self::KeyDim => 2,
            Self::Heads => 3,
        };
        key[idx] = 0;
        key
    }
}

/// Records must have an empirical rate in `(0, SMALL_ERROR_LIMIT)` to enter a fit.
pub const SMALL_ERROR_LIMIT: f64 = 0.2;
/// Minimum number of usable grid points for a fit.
pub const MIN_FIT_POINTS: usize = 3;
/// Fitted slopes within `SLOPE_TOLERANCE * |predicted|` count as consistent.
pub const SLOPE_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub axis: ScalingAxis,
    pub slope: f64,
    /// `+1` for L, `+H` for n, `-H` for d_k, `ln(n / (delta d_k))` for H.
    pub predicted_slope: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    pub points_used: usize,
    /// One message per excluded record.
    pub warnings: Vec<String>,
}

impl ScalingFit {
    pub fn consistent(&self) -> bool {
        libm::fabs(self.slope - self.predicted_slope)
            <= SLOPE_TOLERANCE * libm::fabs(self.predicted_slope)
    }
}

/// Fit `ln(rate)` against `ln(axis)` (or against `H` directly for the heads
/// axis). Records outside the small-error regime are excluded with a warning.
pub fn scaling_fit(records: &[PropagationRecord], axis: ScalingAxis) -> Result<ScalingFit> {
    let first = records
        .first()
        .ok_or_else(|| invalid("scaling_fit needs records"))?;
    if records.iter().any(|r| {
        axis.fixed(&r.config) != axis.fixed(&first.config) || r.config.delta != first.config.delta
    }) {
        return Err(invalid(
            "records differ in parameters other than the fitted axis",
        ));
    }
    let mut warnings = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records {
        let x = axis.value(&r.config);
        if r.empirical_rate <= 0.0 || r.empirical_rate >= SMALL_ERROR_LIMIT {
            warnings.push(format!(
                "{}={} excluded: empirical rate {} outside (0, {})",
                axis.name(),
                x,
                r.empirical_rate,
                SMALL_ERROR_LIMIT
            ));
            continue;
        }
        xs.push(if axis == ScalingAxis::Heads {
            x
        } else {
            libm::log(x)
        });
        ys.push(libm::log(r.empirical_rate));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(invalid(format!(
            "scaling_fit along {}: {} usable points, need {} ({})",
            axis.name(),
            xs.len(),
            MIN_FIT_POINTS,
            warnings.join("; ")
        )));
    }
    let fit = least_squares(&xs, &ys)?;
    let c = &first.config;
    let predicted_slope = match axis {
        ScalingAxis::Layers => 1.0,
        ScalingAxis::ContextLength => c.heads as f64,
        ScalingAxis::KeyDim => -(c.heads as f64),
        ScalingAxis::Heads => libm::log(c.head_bound()),
    };
    Ok(ScalingFit {
        axis,
        slope: fit.slope,
        predicted_slope,
        residual: fit.residual,
        points_used: xs.len(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::kernels::hebbian_accumulate;

    fn record(layers: usize, n: usize, rate: f64) -> PropagationRecord {
        let config = PropagationConfig {
            layers,
            heads: 1,
            n,
            d_k: 64,
            delta: 0.5,
            trials: 1000,
            seed: 0,
        };
        PropagationRecord {
            config,
            failures: (rate * 1000.0) as u64,
            empirical_rate: rate,
            ci_halfwidth: 0.0,
            bound: config.closed_bound(),
            approx_bound: config.approx_bound(),
            bound_vacuous: config.bound_vacuous(),
            per_layer_rates: vec![],
            head_failure_rate: 0.0,
        }
    }

    fn random_head(m: usize, d: usize, seed: u64, norm: NormKind) -> (ProjectionSet, HeadConfig) {
        let (_, p) = crate::kernels::random_self_attention_instance(1, m, d, seed, 0).unwrap();
        let w_o = crate::kernels::random_self_attention_instance(1, d, m, seed, 1)
            .unwrap()
            .1
            .w_q;
        let cfg = HeadConfig {
            f: ActivationKind::EluPlusOne,
            g: ActivationKind::Identity,
            alpha: 1.0,
            norm,
        };
        (
            ProjectionSet::new(p.w_q, p.w_k, p.w_v, Some(w_o)).unwrap(),
            cfg,
        )
    }

    #[test]
    fn zero_output_projection_is_pure_residual() {
        let (mut p, cfg) = random_head(6, 4, 1, NormKind::Rms);
        p.w_o = Some(DenseMatrix::zeros(4, 6).unwrap());
        let net = StackedNetwork::new(vec![LayerSpec::new(vec![(p, cfg)], 6).unwrap()]).unwrap();
        let (x, _) = crate::kernels::random_self_attention_instance(5, 6, 2, 9, 0).unwrap();
        assert_eq!(forward_stack(&net, &x).unwrap(), x);
    }

    #[test]
    fn single_head_matches_kernel_pipeline() {
        let (p, cfg) = random_head(6, 6, 2, NormKind::None);
        let net =
            StackedNetwork::new(vec![LayerSpec::new(vec![(p.clone(), cfg)], 6).unwrap()]).unwrap();
        let (x, _) = crate::kernels::random_self_attention_instance(7, 6, 2, 4, 0).unwrap();
        let y = forward_stack(&net, &x).unwrap();
        let k = x.matmul(&p.w_k).unwrap().row_vectors();
        let v = x.matmul(&p.w_v).unwrap().row_vectors();
        let q = x.matmul(&p.w_q).unwrap();
        for i in 0..7 {
            let s = hebbian_accumulate(6, 6, &k[..=i], &v[..=i], &cfg).unwrap();
            let o = conditioning_output(&q.row_vector(i), &s, &cfg).unwrap();
            let expect = x
                .row_vector(i)
                .add(&o.mul_matrix(p.w_o.as_ref().unwrap()).unwrap())
                .unwrap();
            assert!(y.row_vector(i).max_abs_diff(&expect).unwrap() < 1e-12);
        }
    }

    #[test]
    fn layer_validation() {
        let (p, cfg) = random_head(6, 4, 1, NormKind::Rms);
        assert!(LayerSpec::new(vec![(p.clone(), cfg)], 5).is_err());
        assert!(LayerSpec::new(vec![], 6).is_err());
        let mut no_o = p.clone();
        no_o.w_o = None;
        assert!(LayerSpec::new(vec![(no_o, cfg)], 6).is_err());
        let l6 = LayerSpec::new(vec![(p, cfg)], 6).unwrap();
        let (p8, cfg8) = random_head(8, 4, 1, NormKind::Rms);
        let l8 = LayerSpec::new(vec![(p8, cfg8)], 8).unwrap();
        assert!(StackedNetwork::new(vec![l6, l8]).is_err());
        assert!(StackedNetwork::new(vec![]).is_err());
    }

    #[test]
    fn chain_demo_routes_by_context() {
        let demo = build_chain_demo();
        for ctx in ChainContext::ALL {
            let out = demo.run(ctx).unwrap();
            assert!(out.passes(), "{out:?}");
        }
    }

    #[test]
    fn bounds() {
        let c = PropagationConfig {
            layers: 4,
            heads: 2,
            n: 16,
            d_k: 512,
            delta: 0.5,
            trials: 1,
            seed: 0,
        };
        let x: f64 = 16.0 / 256.0;
        assert!((c.closed_bound() - (1.0 - (1.0 - x * x).powi(4))).abs() < 1e-15);
        assert!((c.approx_bound() - 4.0 * x * x).abs() < 1e-15);
        assert!(!c.bound_vacuous());
        let v = PropagationConfig { n: 300, ..c };
        assert!(v.bound_vacuous());
        assert_eq!(v.closed_bound(), 1.0);
    }

    #[test]
    fn degenerate_stack_counts_head_failures() {
        let c = PropagationConfig {
            layers: 1,
            heads: 1,
            n: 6,
            d_k: 8,
            delta: 0.5,
            trials: 400,
            seed: 5,
        };
        let r = error_propagation_experiment(&c, &Sequential).unwrap();
        assert_eq!(r.empirical_rate, r.head_failure_rate);
        assert_eq!(r.per_layer_rates, vec![r.empirical_rate]);
        assert!(r.empirical_rate > 0.0);
    }

    #[test]
    fn scaling_fit_exact_power_law() {
        let recs: Vec<_> = [1usize, 2, 4, 8]
            .iter()
            .map(|&l| record(l, 16, 0.01 * l as f64))
            .collect();
        let f = scaling_fit(&recs, ScalingAxis::Layers).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && f.consistent());
        assert_eq!(f.points_used, 4);
    }

    #[test]
    fn scaling_fit_constant_data() {
        let recs: Vec<_> = [1usize, 2, 4, 8]
            .iter()
            .map(|&l| record(l, 16, 0.05))
            .collect();
        let f = scaling_fit(&recs, ScalingAxis::Layers).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!(!f.consistent());
    }

    #[test]
    fn scaling_fit_exclusions() {
        let recs = vec![
            record(1, 16, 0.0),
            record(2, 16, 0.01),
            record(4, 16, 0.5),
            record(8, 16, 0.04),
        ];
        let err = scaling_fit(&recs, ScalingAxis::Layers).unwrap_err();
        assert!(matches!(err, crate::Error::InvalidArgument(_)));
        let mixed = vec![
            record(1, 16, 0.01),
            record(2, 32, 0.02),
            record(4, 16, 0.04),
        ];
        assert!(scaling_fit(&mixed, ScalingAxis::Layers).is_err());
    }
}
