//! Conditioning kernels: Hebbian association, retrieval, and the attention
//! variants it is compared against.
//!
//! With `f = phi`, `g = identity`, `alpha = 1` and a single input feeding
//! queries, keys and values, the conditioning pipeline
//! `Norm(f(q_i) * alpha * sum_{j<=i} f(k_j)^T g(v_j))` is term for term the
//! causal linear attention output. [`conditioning_equivalence_check`] measures
//! the gap between the two routes.

use alloc::vec;
use alloc::vec::Vec;

use crate::activation::{normalize_in_place, ActivationKind, NormKind};
use crate::error::{check_dim, invalid, Result};
use crate::linalg::{axpy, dot, rank_one_update, vec_mat_into, DenseMatrix, RowVector};
use crate::rules::BcmThresholdState;
use crate::sampling::{fill_normal, stream_rng};

/// Per-head conditioning parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadConfig {
    /// Activation on the key and query (CS and test stimulus) pathways.
    pub f: ActivationKind,
    /// Activation on the value (US) pathway.
    pub g: ActivationKind,
    /// Association strength.
    pub alpha: f64,
    pub norm: NormKind,
}

impl HeadConfig {
    pub fn new(f: ActivationKind, g: ActivationKind, alpha: f64, norm: NormKind) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(
                "association strength alpha must be a positive finite number",
            ));
        }
        Ok(Self { f, g, alpha, norm })
    }

    /// Identity maps, `alpha = 1`, no normalization: the plain memory model.
    pub fn plain() -> Self {
        Self {
            f: ActivationKind::Identity,
            g: ActivationKind::Identity,
            alpha: 1.0,
            norm: NormKind::None,
        }
    }

    /// The configuration under which conditioning equals linear attention.
    pub fn linear_attention(phi: ActivationKind, norm: NormKind) -> Self {
        Self {
            f: phi,
            g: ActivationKind::Identity,
            alpha: 1.0,
            norm,
        }
    }
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self::linear_attention(ActivationKind::EluPlusOne, NormKind::Rms)
    }
}

/// The `d_k x d_v` synaptic matrix plus rule-specific auxiliary state.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociativeState {
    s: DenseMatrix,
    step_index: u64,
    pub(crate) bcm: Option<BcmThresholdState>,
}

impl AssociativeState {
    pub fn new(d_k: usize, d_v: usize) -> Result<Self> {
        Ok(Self {
            s: DenseMatrix::zeros(d_k, d_v)?,
            step_index: 0,
            bcm: None,
        })
    }

    /// Start from an arbitrary synaptic matrix (step index 0).
    pub fn from_matrix(s: DenseMatrix) -> Self {
        Self {
            s,
            step_index: 0,
            bcm: None,
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.s
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn d_k(&self) -> usize {
        self.s.rows()
    }

    pub fn d_v(&self) -> usize {
        self.s.cols()
    }

    pub fn bcm_thresholds(&self) -> Option<&BcmThresholdState> {
        self.bcm.as_ref()
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DenseMatrix {
        &mut self.s
    }

    pub(crate) fn advance(&mut self) {
        self.step_index += 1;
    }

    pub(crate) fn check_pair(&self, op: &'static str, k: &RowVector, v: &RowVector) -> Result<()> {
        check_dim(op, self.d_k(), k.dim())?;
        check_dim(op, self.d_v(), v.dim())
    }

    /// One Hebbian association: `S += alpha f(k)^T g(v)`.
    pub fn associate(&mut self, k: &RowVector, v: &RowVector, cfg: &HeadConfig) -> Result<()> {
        self.check_pair("associate", k, v)?;
        let fk = cfg.f.apply_slice(k.as_slice());
        let gv = cfg.g.apply_slice(v.as_slice());
        rank_one_update(&mut self.s, cfg.alpha, &fk, &gv);
        self.advance();
        Ok(())
    }
}

/// The four maps of one attention head. `W_O` is the identity when absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub w_q: DenseMatrix,
    pub w_k: DenseMatrix,
    pub w_v: DenseMatrix,
    pub w_o: Option<DenseMatrix>,
}

impl ProjectionSet {
    pub fn new(
        w_q: DenseMatrix,
        w_k: DenseMatrix,
        w_v: DenseMatrix,
        w_o: Option<DenseMatrix>,
    ) -> Result<Self> {
        check_dim("ProjectionSet d_k", w_q.cols(), w_k.cols())?;
        if let Some(o) = &w_o {
            check_dim("ProjectionSet W_O rows", w_v.cols(), o.rows())?;
        }
        Ok(Self { w_q, w_k, w_v, w_o })
    }

    pub fn d_k(&self) -> usize {
        self.w_k.cols()
    }

    pub fn d_v(&self) -> usize {
        self.w_v.cols()
    }
}

/// `X W`.
pub fn project(x: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    x.matmul(w)
}

/// `S = alpha * sum_j f(k_j)^T g(v_j)` over the given pairs.
pub fn hebbian_accumulate(
    d_k: usize,
    d_v: usize,
    keys: &[RowVector],
    values: &[RowVector],
    cfg: &HeadConfig,
) -> Result<AssociativeState> {
    check_dim("hebbian_accumulate pairs", keys.len(), values.len())?;
    let mut state = AssociativeState::new(d_k, d_v)?;
    for (k, v) in keys.iter().zip(values) {
        state.associate(k, v, cfg)?;
    }
    Ok(state)
}

/// Test-stimulus retrieval `r = f(q) S`.
pub fn retrieve(q: &RowVector, state: &AssociativeState, cfg: &HeadConfig) -> Result<RowVector> {
    check_dim("retrieve", state.d_k(), q.dim())?;
    let fq = cfg.f.apply_slice(q.as_slice());
    let mut out = vec![0.0; state.d_v()];
    vec_mat_into(&fq, state.matrix(), &mut out);
    Ok(RowVector::from_vec_unchecked(out))
}

/// `Norm(retrieve(q))`: retrieval followed by divisive normalization.
pub fn conditioning_output(
    q: &RowVector,
    state: &AssociativeState,
    cfg: &HeadConfig,
) -> Result<RowVector> {
    let mut r = retrieve(q, state, cfg)?.into_vec();
    normalize_in_place(cfg.norm, &mut r)?;
    Ok(RowVector::from_vec_unchecked(r))
}

/// Output of a linear attention pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAttentionOutput {
    pub output: DenseMatrix,
    /// Rows zeroed because the denominator vanished.
    pub degenerate_rows: usize,
}

fn check_qkv(q: &DenseMatrix, k: &DenseMatrix, v: &DenseMatrix) -> Result<()> {
    check_dim("attention rows(K)", q.rows(), k.rows())?;
    check_dim("attention rows(V)", q.rows(), v.rows())?;
    check_dim("attention d_k", q.cols(), k.cols())
}

/// Finish one output row: apply `norm`, or the kernel denominator.
/// Returns `false` when the row had to be zeroed.
fn finish_row(row: &mut [f64], norm: NormKind, denominator: f64) -> Result<bool> {
    if norm == NormKind::Denominator {
        if denominator == 0.0 || !denominator.is_finite() {
            row.iter_mut().for_each(|x| *x = 0.0);
            return Ok(false);
        }
        row.iter_mut().for_each(|x| *x /= denominator);
        if row.iter().any(|x| !x.is_finite()) {
            row.iter_mut().for_each(|x| *x = 0.0);
            return Ok(false);
        }
        Ok(true)
    } else {
        normalize_in_place(norm, row)?;
        Ok(true)
    }
}

/// Causal linear attention in the quadratic (attention-matrix) form:
/// row `i` is `sum_{j<=i} (phi(q_i) . phi(k_j)) v_j`, then normalized.
pub fn linear_attention_batch(
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
    phi: ActivationKind,
    norm: NormKind,
) -> Result<LinearAttentionOutput> {
    check_qkv(q, k, v)?;
    let n = q.rows();
    let fq: Vec<Vec<f64>> = (0..n).map(|i| phi.apply_slice(q.row(i))).collect();
    let fk: Vec<Vec<f64>> = (0..n).map(|i| phi.apply_slice(k.row(i))).collect();
    let mut out = vec![0.0; n * v.cols()];
    let mut degenerate = 0;
    for (i, row) in out.chunks_exact_mut(v.cols()).enumerate() {
        let mut denominator = 0.0;
        for j in 0..=i {
            let w = dot(&fq[i], &fk[j]);
            denominator += w;
            axpy(w, v.row(j), row);
        }
        if !finish_row(row, norm, denominator)? {
            degenerate += 1;
        }
    }
    Ok(LinearAttentionOutput {
        output: DenseMatrix::from_vec_unchecked(n, v.cols(), out),
        degenerate_rows: degenerate,
    })
}

/// Constant-memory recurrent linear attention:
/// `S_i = S_{i-1} + phi(k_i)^T v_i`, output `Norm(phi(q_i) S_i)`.
#[derive(Debug, Clone)]
pub struct RecurrentLinearAttention {
    s: DenseMatrix,
    key_sum: Vec<f64>,
    phi: ActivationKind,
    norm: NormKind,
    degenerate_rows: usize,
}

impl RecurrentLinearAttention {
    pub fn new(d_k: usize, d_v: usize, phi: ActivationKind, norm: NormKind) -> Result<Self> {
        Ok(Self {
            s: DenseMatrix::zeros(d_k, d_v)?,
            key_sum: vec![0.0; d_k],
            phi,
            norm,
            degenerate_rows: 0,
        })
    }

    pub fn step(&mut self, q: &[f64], k: &[f64], v: &[f64]) -> Result<RowVector> {
        check_dim("recurrent q", self.s.rows(), q.len())?;
        check_dim("recurrent k", self.s.rows(), k.len())?;
        check_dim("recurrent v", self.s.cols(), v.len())?;
        let fk = self.phi.apply_slice(k);
        rank_one_update(&mut self.s, 1.0, &fk, v);
        axpy(1.0, &fk, &mut self.key_sum);
        let fq = self.phi.apply_slice(q);
        let mut out = vec![0.0; self.s.cols()];
        vec_mat_into(&fq, &self.s, &mut out);
        let denominator = dot(&fq, &self.key_sum);
        if !finish_row(&mut out, self.norm, denominator)? {
            self.degenerate_rows += 1;
        }
        Ok(RowVector::from_vec_unchecked(out))
    }

    pub fn state(&self) -> &DenseMatrix {
        &self.s
    }

    pub fn degenerate_rows(&self) -> usize {
        self.degenerate_rows
    }
}

/// Run the recurrent form over a stream of `(q, k, v)` triples.
///
/// An empty stream yields an empty output.
pub fn linear_attention_recurrent<'a, I>(
    stream: I,
    phi: ActivationKind,
    norm: NormKind,
) -> Result<(Vec<RowVector>, usize)>
where
    I: IntoIterator<Item = (&'a RowVector, &'a RowVector, &'a RowVector)>,
{
    let mut out = Vec::new();
    let mut state: Option<RecurrentLinearAttention> = None;
    for (q, k, v) in stream {
        let st = match &mut state {
            Some(s) => s,
            None => state.insert(RecurrentLinearAttention::new(k.dim(), v.dim(), phi, norm)?),
        };
        out.push(st.step(q.as_slice(), k.as_slice(), v.as_slice())?);
    }
    let degenerate = state.map_or(0, |s| s.degenerate_rows());
    Ok((out, degenerate))
}

/// Matrix convenience wrapper around the recurrent form.
pub fn linear_attention_recurrent_matrix(
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
    phi: ActivationKind,
    norm: NormKind,
) -> Result<LinearAttentionOutput> {
    check_qkv(q, k, v)?;
    let mut st = RecurrentLinearAttention::new(k.cols(), v.cols(), phi, norm)?;
    let mut data = Vec::with_capacity(q.rows() * v.cols());
    for i in 0..q.rows() {
        data.extend_from_slice(st.step(q.row(i), k.row(i), v.row(i))?.as_slice());
    }
    Ok(LinearAttentionOutput {
        output: DenseMatrix::from_vec_unchecked(q.rows(), v.cols(), data),
        degenerate_rows: st.degenerate_rows(),
    })
}

/// Causal softmax weights `softmax(q_i K_{<=i}^T / sqrt(d_k))`, zero above the diagonal.
pub fn causal_softmax_weights(q: &DenseMatrix, k: &DenseMatrix) -> Result<DenseMatrix> {
    check_dim("softmax rows", q.rows(), k.rows())?;
    check_dim("softmax d_k", q.cols(), k.cols())?;
    let n = q.rows();
    let scale = 1.0 / libm::sqrt(q.cols() as f64);
    let mut w = vec![0.0; n * n];
    for (i, row) in w.chunks_exact_mut(n).enumerate() {
        let logits = &mut row[..=i];
        for (j, l) in logits.iter_mut().enumerate() {
            *l = dot(q.row(i), k.row(j)) * scale;
        }
        let max = logits.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = libm::exp(*l - max);
            total += *l;
        }
        logits.iter_mut().for_each(|l| *l /= total);
    }
    Ok(DenseMatrix::from_vec_unchecked(n, n, w))
}

/// Causal softmax attention with explicit `1/sqrt(d_k)` scaling.
pub fn softmax_attention_reference(
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_qkv(q, k, v)?;
    causal_softmax_weights(q, k)?.matmul(v)
}

/// Largest absolute deviation between the conditioning pipeline and linear
/// attention on a self-attention instance.
///
/// The conditioning side grows the Hebbian state one pair at a time and reads
/// each prefix with [`conditioning_output`]; the attention side is
/// [`linear_attention_batch`]. Only defined when `g` is the identity,
/// `alpha = 1`, `d_k = d_v` and the norm is not the kernel denominator.
pub fn conditioning_equivalence_check(
    x: &DenseMatrix,
    proj: &ProjectionSet,
    cfg: &HeadConfig,
) -> Result<f64> {
    if cfg.g != ActivationKind::Identity {
        return Err(invalid("equivalence requires g = identity"));
    }
    if cfg.alpha != 1.0 {
        return Err(invalid("equivalence requires alpha = 1"));
    }
    if proj.d_k() != proj.d_v() {
        return Err(invalid("equivalence requires d_k = d_v"));
    }
    if cfg.norm == NormKind::Denominator {
        return Err(invalid(
            "equivalence is stated for output normalization, not the kernel denominator",
        ));
    }
    let q = project(x, &proj.w_q)?;
    let k = project(x, &proj.w_k)?;
    let v = project(x, &proj.w_v)?;

    let attention = linear_attention_batch(&q, &k, &v, cfg.f, cfg.norm)?.output;

    let mut state = AssociativeState::new(proj.d_k(), proj.d_v())?;
    let mut deviation: f64 = 0.0;
    for i in 0..x.rows() {
        state.associate(&k.row_vector(i), &v.row_vector(i), cfg)?;
        let o = conditioning_output(&q.row_vector(i), &state, cfg)?;
        let reference = RowVector::from_vec_unchecked(attention.row(i).to_vec());
        deviation = deviation.max(o.max_abs_diff(&reference)?);
    }
    Ok(deviation)
}

/// Random self-attention instance: `X` with standard normal entries (`n x m`)
/// and projections with entries `N(0, 1/m)` mapping `m -> d`.
pub fn random_self_attention_instance(
    n: usize,
    m: usize,
    d: usize,
    seed: u64,
    instance: u64,
) -> Result<(DenseMatrix, ProjectionSet)> {
    if n == 0 || m == 0 || d == 0 {
        return Err(invalid("instance dimensions must be positive"));
    }
    let mut rng = stream_rng(seed, &[0x494e_5354, instance]);
    let mut mat = |rows: usize, cols: usize, sd: f64| {
        let mut data = vec![0.0; rows * cols];
        fill_normal(&mut rng, &mut data, sd);
        DenseMatrix::from_vec_unchecked(rows, cols, data)
    };
    let x = mat(n, m, 1.0);
    let sd = 1.0 / libm::sqrt(m as f64);
    let w_q = mat(m, d, sd);
    let w_k = mat(m, d, sd);
    let w_v = mat(m, d, sd);
    Ok((x, ProjectionSet::new(w_q, w_k, w_v, None)?))
}
