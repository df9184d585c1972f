//! ReLU RNN forward pass with sign-pattern traces, Back matrices, the
//! pseudo-network (first-order) evaluation, and the concentration/coupling
//! diagnostics used by the experiments.
//!
//! The cell is `h^(ℓ) = relu(A x^(ℓ) + W h^(ℓ−1))` with `h^(0) = 0` and
//! readout `B h^(L)`. Sign masks are stored as bit vectors, never as dense
//! m×m diagonals, and the recurrent weight can be row-streamed
//! ([`WeightMatrix::Streamed`]) so that widths beyond dense-memory reach run
//! with identical results.

use ndarray::{Array1, Array2, Axis};

use crate::numerics::{gaussian_matrix, ImplicitGaussianMatrix, Mat, RngStream, WeightMatrix};
use crate::sequences::NormalizedSequence;
use crate::{Error, Result};

/// Which variance convention the readout matrix B uses. The recurrent and
/// input weights are always N(0, 2/m).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BVarianceMode {
    /// B ~ N(0, 1/d_out) — the convention the existence construction's
    /// normalization relies on (default).
    OneOverDout,
    /// B ~ N(0, 2/d_out) — the main-text definition.
    TwoOverDout,
}

/// The three weight matrices of a ReLU RNN.
#[derive(Clone, Debug)]
pub struct RnnParams {
    pub m: usize,
    pub d: usize,
    pub d_out: usize,
    /// Recurrent weights, m×m (dense or row-streamed).
    pub w: WeightMatrix,
    /// Input weights, m×d.
    pub a: Mat,
    /// Readout, d_out×m.
    pub b: Mat,
    pub b_mode: BVarianceMode,
}

impl RnnParams {
    /// Validate shapes and finiteness of the dense parts.
    pub fn validate(&self) -> Result<()> {
        if self.w.rows() != self.m || self.w.cols() != self.m {
            return Err(Error::dims(format!(
                "W must be {0}x{0}, got {1}x{2}",
                self.m,
                self.w.rows(),
                self.w.cols()
            )));
        }
        if self.a.nrows() != self.m || self.a.ncols() != self.d {
            return Err(Error::dims(format!(
                "A must be {}x{}, got {}x{}",
                self.m,
                self.d,
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.b.nrows() != self.d_out || self.b.ncols() != self.m {
            return Err(Error::dims(format!(
                "B must be {}x{}, got {}x{}",
                self.d_out,
                self.m,
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        if !self.a.iter().all(|v| v.is_finite()) || !self.b.iter().all(|v| v.is_finite()) {
            return Err(Error::non_finite("RNN parameters contain non-finite entries"));
        }
        Ok(())
    }
}

/// Draw fresh parameters: W, A ~ N(0, 2/m) entrywise, B per `b_mode`.
/// Weight streams are `rng.split("W" | "A" | "B")` with one child stream per
/// row, so parameters depend only on the stream key, not evaluation order.
pub fn init_params(
    rng: &RngStream,
    m: usize,
    d: usize,
    d_out: usize,
    b_mode: BVarianceMode,
) -> Result<RnnParams> {
    if m < 1 || d < 1 || d_out < 1 {
        return Err(Error::invalid(format!(
            "init_params needs m, d, d_out >= 1, got ({m}, {d}, {d_out})"
        )));
    }
    let w_std = (2.0 / m as f64).sqrt();
    let b_std = match b_mode {
        BVarianceMode::OneOverDout => (1.0 / d_out as f64).sqrt(),
        BVarianceMode::TwoOverDout => (2.0 / d_out as f64).sqrt(),
    };
    Ok(RnnParams {
        m,
        d,
        d_out,
        w: WeightMatrix::Dense(gaussian_matrix(&rng.split("W")?, m, m, w_std)?),
        a: gaussian_matrix(&rng.split("A")?, m, d, w_std)?,
        b: gaussian_matrix(&rng.split("B")?, d_out, m, b_std)?,
        b_mode,
    })
}

/// Same distribution as [`init_params`] but W is kept row-streamed; use for
/// widths where a dense m×m matrix exceeds memory. Bit-identical to the dense
/// variant wherever both run.
pub fn init_params_streamed(
    rng: &RngStream,
    m: usize,
    d: usize,
    d_out: usize,
    b_mode: BVarianceMode,
) -> Result<RnnParams> {
    if m < 1 || d < 1 || d_out < 1 {
        return Err(Error::invalid(format!(
            "init_params needs m, d, d_out >= 1, got ({m}, {d}, {d_out})"
        )));
    }
    let w_std = (2.0 / m as f64).sqrt();
    let b_std = match b_mode {
        BVarianceMode::OneOverDout => (1.0 / d_out as f64).sqrt(),
        BVarianceMode::TwoOverDout => (2.0 / d_out as f64).sqrt(),
    };
    Ok(RnnParams {
        m,
        d,
        d_out,
        w: WeightMatrix::Streamed(ImplicitGaussianMatrix::new(rng.split("W")?, m, m, w_std)?),
        a: gaussian_matrix(&rng.split("A")?, m, d, w_std)?,
        b: gaussian_matrix(&rng.split("B")?, d_out, m, b_std)?,
        b_mode,
    })
}

/// Sign pattern of one layer, one bit per neuron: bit r is 1 iff the
/// preactivation g_r ≥ 0 (ties activate, matching relu'(0) taken as feeding
/// the identity branch of the mask).
#[derive(Clone, Debug, PartialEq)]
pub struct SignMask {
    blocks: Vec<u64>,
    len: usize,
}

impl SignMask {
    pub fn from_preact(g: &[f64]) -> SignMask {
        let mut blocks = vec![0u64; g.len().div_ceil(64)];
        for (r, &v) in g.iter().enumerate() {
            if v >= 0.0 {
                blocks[r / 64] |= 1 << (r % 64);
            }
        }
        SignMask { blocks, len: g.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Whether neuron r is active.
    #[inline]
    pub fn bit(&self, r: usize) -> bool {
        (self.blocks[r / 64] >> (r % 64)) & 1 == 1
    }

    /// Zero out inactive coordinates of `v` in place (apply D^(ℓ)).
    pub fn apply(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.len);
        for (r, x) in v.iter_mut().enumerate() {
            if !self.bit(r) {
                *x = 0.0;
            }
        }
    }

    /// Number of active neurons.
    pub fn count_ones(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Hamming distance to another mask (sign-pattern drift).
    pub fn hamming(&self, other: &SignMask) -> usize {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

/// Full forward trace: hidden states h^(0..L), preactivations g^(1..L), and
/// sign masks D^(1..L).
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// h[ℓ] = h^(ℓ); h[0] is the zero vector.
    pub h: Vec<Array1<f64>>,
    /// g[ℓ−1] = g^(ℓ) = A x^(ℓ) + W h^(ℓ−1).
    pub g: Vec<Array1<f64>>,
    /// masks[ℓ−1] = D^(ℓ).
    pub masks: Vec<SignMask>,
}

impl ForwardTrace {
    /// Sequence length L.
    pub fn l(&self) -> usize {
        self.g.len()
    }

    /// Final hidden state h^(L).
    pub fn final_h(&self) -> &Array1<f64> {
        &self.h[self.h.len() - 1]
    }
}

/// Forward pass over raw tokens given as an L×d matrix (row ℓ−1 = x^(ℓ)).
pub fn forward_tokens(params: &RnnParams, tokens: &Array2<f64>) -> Result<ForwardTrace> {
    if tokens.ncols() != params.d {
        return Err(Error::dims(format!(
            "token dimension {} != params d = {}",
            tokens.ncols(),
            params.d
        )));
    }
    let l = tokens.nrows();
    let m = params.m;
    let mut h = Vec::with_capacity(l + 1);
    let mut g = Vec::with_capacity(l);
    let mut masks = Vec::with_capacity(l);
    h.push(Array1::zeros(m));
    for ell in 0..l {
        let x = tokens.row(ell);
        let mut pre = params.a.dot(&x);
        if ell > 0 {
            // h^(0) = 0, so the recurrent term only enters from step 2 on.
            let hp = h[ell].view().insert_axis(Axis(1));
            let wh = params.w.matmul(&hp)?;
            pre += &wh.index_axis(Axis(1), 0);
        }
        let mask = SignMask::from_preact(pre.as_slice().expect("contiguous"));
        let mut act = pre.clone();
        act.mapv_inplace(|v| v.max(0.0));
        h.push(act);
        g.push(pre);
        masks.push(mask);
    }
    Ok(ForwardTrace { h, g, masks })
}

/// Forward pass over a normalized sequence.
pub fn forward(params: &RnnParams, seq: &NormalizedSequence) -> Result<ForwardTrace> {
    forward_tokens(params, seq.tokens())
}

/// Network output B h^(L) for a trace.
pub fn output(params: &RnnParams, trace: &ForwardTrace) -> Array1<f64> {
    params.b.dot(trace.final_h())
}

/// Final hidden states of N equal-length sequences, as one m×N matrix; the
/// per-step work is a single GEMM, which is how the decoder-learning and
/// existence experiments stay affordable.
pub fn forward_batch_final(params: &RnnParams, tokens: &[Array2<f64>]) -> Result<Mat> {
    Ok(forward_batch_masks(params, tokens)?.0)
}

/// Batched forward pass that also records every sequence's sign masks:
/// returns (final hidden states m×N, masks indexed [step][sequence]).
pub fn forward_batch_masks(
    params: &RnnParams,
    tokens: &[Array2<f64>],
) -> Result<(Mat, Vec<Vec<SignMask>>)> {
    let n = tokens.len();
    if n == 0 {
        return Err(Error::invalid("batched forward: empty batch"));
    }
    let l = tokens[0].nrows();
    for (i, t) in tokens.iter().enumerate() {
        if t.nrows() != l || t.ncols() != params.d {
            return Err(Error::dims(format!(
                "batch sequence {i} is {}x{}, expected {l}x{}",
                t.nrows(),
                t.ncols(),
                params.d
            )));
        }
    }
    let mut h = Mat::zeros((params.m, n));
    let mut x_step = Mat::zeros((params.d, n));
    let mut masks: Vec<Vec<SignMask>> = Vec::with_capacity(l);
    let mut col_buf = vec![0.0; params.m];
    for ell in 0..l {
        for (i, t) in tokens.iter().enumerate() {
            x_step.column_mut(i).assign(&t.row(ell));
        }
        let mut pre = params.a.dot(&x_step);
        if ell > 0 {
            pre += &params.w.matmul(&h.view())?;
        }
        let mut step_masks = Vec::with_capacity(n);
        for j in 0..n {
            for (r, v) in col_buf.iter_mut().enumerate() {
                *v = pre[(r, j)];
            }
            step_masks.push(SignMask::from_preact(&col_buf));
        }
        masks.push(step_masks);
        pre.mapv_inplace(|v| v.max(0.0));
        h = pre;
    }
    Ok((h, masks))
}

/// Back_{i→j} = B · D^(j) W · D^(j−1) W ⋯ D^(i+1) W (and Back_{i→i} = B),
/// as a dense d_out×m matrix. Requires 1 ≤ i ≤ j ≤ L.
pub fn back_matrix(params: &RnnParams, trace: &ForwardTrace, i: usize, j: usize) -> Result<Mat> {
    let l = trace.l();
    if !(1 <= i && i <= j && j <= l) {
        return Err(Error::invalid(format!(
            "back_matrix needs 1 <= i <= j <= L = {l}, got (i, j) = ({i}, {j})"
        )));
    }
    let mut m = params.b.clone();
    for ell in (i + 1..=j).rev() {
        let mask = &trace.masks[ell - 1];
        for (c, mut col) in m.columns_mut().into_iter().enumerate() {
            if !mask.bit(c) {
                col.fill(0.0);
            }
        }
        m = params.w.matmul_left(&m.view())?;
    }
    Ok(m)
}

/// Pseudo-network (first-order) output
/// `Σ_{i=1..L} Back_{i→L} D^(i) (Wp h^(i−1) + Ap x^(i))`,
/// evaluated by the equivalent forward recurrence
/// `z^(ℓ) = D^(ℓ) ⊙ (W z^(ℓ−1) + Wp h^(ℓ−1) + Ap x^(ℓ))`, `z^(0) = 0`,
/// returning `B z^(L)` — L mat-vecs instead of L² dense products.
pub fn pseudo_forward(
    params: &RnnParams,
    trace: &ForwardTrace,
    wp: &Mat,
    ap: &Mat,
    tokens: &Array2<f64>,
) -> Result<Array1<f64>> {
    let (m, d) = (params.m, params.d);
    if wp.nrows() != m || wp.ncols() != m || ap.nrows() != m || ap.ncols() != d {
        return Err(Error::dims(format!(
            "pseudo_forward: Wp must be {m}x{m} and Ap {m}x{d}, got {}x{} and {}x{}",
            wp.nrows(),
            wp.ncols(),
            ap.nrows(),
            ap.ncols()
        )));
    }
    let l = trace.l();
    if tokens.nrows() != l || tokens.ncols() != d {
        return Err(Error::dims("pseudo_forward: token matrix does not match trace".to_string()));
    }
    let mut z = Array1::<f64>::zeros(m);
    for ell in 1..=l {
        let mut v = if ell > 1 {
            let zp = z.view().insert_axis(Axis(1));
            params.w.matmul(&zp)?.index_axis_move(Axis(1), 0)
        } else {
            Array1::zeros(m)
        };
        v += &wp.dot(&trace.h[ell - 1]);
        v += &ap.dot(&tokens.row(ell - 1));
        trace.masks[ell - 1].apply(v.as_slice_mut().expect("contiguous"));
        z = v;
    }
    Ok(params.b.dot(&z))
}

/// Hidden-norm and base-drift diagnostics for a normalized sequence.
#[derive(Clone, Debug)]
pub struct NormDiagnostics {
    /// (ℓ, |‖h_fin^(ℓ)‖ − √(2 + (ℓ−2)ε_x²)|) for ℓ ∈ [2, L], where
    /// h_fin^(ℓ) is the final hidden state of the length-ℓ prefix encoding
    /// (the first ℓ−1 tokens followed by the end marker).
    pub norm_residuals: Vec<(usize, f64)>,
    /// ‖h^(ℓ) − h^(ℓ)_(0)‖ for ℓ = 1..L against the base sequence.
    pub base_drift: Vec<f64>,
    /// √L · ε_x, the stated drift scale (reported, not asserted).
    pub drift_bound: f64,
}

/// Per-ℓ hidden-norm residuals against √(2 + (ℓ−2)ε_x²), plus drift from the
/// base sequence.
///
/// The norm target counts cumulative squared token norms ‖x^(1)‖² + … =
/// 1 + (ℓ−2)ε_x² + 1, i.e. it describes a hidden state that has *already
/// absorbed the end marker*. The residual for each ℓ is therefore computed on
/// the final state of the length-ℓ prefix sequence (tokens 1..ℓ−1 of `seq`
/// followed by the marker token) — one shared forward pass plus a batched
/// marker step. Reading the target against the mid-sequence states h^(ℓ) of
/// the full sequence would compare against the wrong energy
/// (1 + (ℓ−1)ε_x²) and fail for every interior ℓ. At ℓ = 2 the target is √2
/// independent of ε_x.
pub fn norm_diagnostics(params: &RnnParams, seq: &NormalizedSequence) -> Result<NormDiagnostics> {
    let l = seq.l();
    let d = seq.d();
    if d != params.d {
        return Err(Error::dims(format!("sequence d = {d} != params d = {}", params.d)));
    }
    let trace = forward(params, seq)?;
    let eps = seq.eps_x();

    // Batched marker step: columns are h^(1) .. h^(L−1).
    let mut hprev = Mat::zeros((params.m, l - 1));
    for ell in 1..l {
        hprev.column_mut(ell - 1).assign(&trace.h[ell]);
    }
    let mut fin = params.w.matmul(&hprev.view())?;
    let a_marker = params.a.column(d - 1);
    for mut col in fin.columns_mut() {
        col += &a_marker;
    }
    fin.mapv_inplace(|v| v.max(0.0));

    let mut norm_residuals = Vec::with_capacity(l - 1);
    for ell in 2..=l {
        let norm = fin.column(ell - 2).iter().map(|v| v * v).sum::<f64>().sqrt();
        let target = (2.0 + (ell as f64 - 2.0) * eps * eps).sqrt();
        norm_residuals.push((ell, (norm - target).abs()));
    }

    let base = crate::sequences::base_sequence(l, d, eps)?;
    let trace0 = forward(params, &base)?;
    let base_drift = (1..=l)
        .map(|ell| {
            (&trace.h[ell] - &trace0.h[ell]).iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();

    Ok(NormDiagnostics {
        norm_residuals,
        base_drift,
        drift_bound: (l as f64).sqrt() * eps,
    })
}

/// Relative first-order coupling residual
/// `‖F(W+tWp, A+tAp) − F(W, A) − t·pseudo‖ / (t·‖pseudo‖ + 1e−12)` where F
/// is the network output on `seq`. Requires a dense W and t ≥ 0.
pub fn coupling_residual(
    params: &RnnParams,
    seq: &NormalizedSequence,
    wp: &Mat,
    ap: &Mat,
    t: f64,
) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("coupling scale t must be finite and >= 0, got {t}")));
    }
    let w_dense = match &params.w {
        WeightMatrix::Dense(w) => w,
        WeightMatrix::Streamed(_) => {
            return Err(Error::invalid(
                "coupling_residual needs dense recurrent weights (perturbation is dense)",
            ))
        }
    };
    let trace = forward(params, seq)?;
    let f0 = output(params, &trace);
    let pseudo = pseudo_forward(params, &trace, wp, ap, seq.tokens())?;

    let perturbed = RnnParams {
        m: params.m,
        d: params.d,
        d_out: params.d_out,
        w: WeightMatrix::Dense(w_dense + &(t * wp)),
        a: &params.a + &(t * ap),
        b: params.b.clone(),
        b_mode: params.b_mode,
    };
    let f1 = output(&perturbed, &forward(&perturbed, seq)?);

    let num = (&f1 - &f0 - &(t * &pseudo)).iter().map(|v| v * v).sum::<f64>().sqrt();
    let den = t * pseudo.iter().map(|v| v * v).sum::<f64>().sqrt() + 1e-12;
    Ok(num / den)
}

/// The polylog envelope constants used by the paper's bounds.
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticBounds {
    /// ρ = 100 · L · d_out · ln m.
    pub rho: f64,
    /// ϱ = 100 · L · d_out · p · C_ε · ln(m) / ε, when a concept class with
    /// p neurons, complexity C_ε, and target accuracy ε is attached.
    pub varrho: Option<f64>,
}

impl DiagnosticBounds {
    pub fn new(m: usize, l: usize, d_out: usize) -> DiagnosticBounds {
        DiagnosticBounds {
            rho: 100.0 * l as f64 * d_out as f64 * (m as f64).ln(),
            varrho: None,
        }
    }

    pub fn with_concept(
        m: usize,
        l: usize,
        d_out: usize,
        p: usize,
        c_eps: f64,
        eps: f64,
    ) -> Result<DiagnosticBounds> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("accuracy eps must be positive, got {eps}")));
        }
        let mut b = DiagnosticBounds::new(m, l, d_out);
        b.varrho = Some(b.rho * p as f64 * c_eps / eps);
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_neuron_single_step() {
        let params = RnnParams {
            m: 1,
            d: 1,
            d_out: 1,
            w: WeightMatrix::Dense(Mat::zeros((1, 1))),
            a: Mat::from_elem((1, 1), 2.0),
            b: Mat::from_elem((1, 1), 1.0),
            b_mode: BVarianceMode::OneOverDout,
        };
        let tokens = Mat::from_elem((1, 1), 1.0);
        let trace = forward_tokens(&params, &tokens).unwrap();
        assert_eq!(trace.h[1][0], 2.0);
        assert_eq!(trace.h[0][0], 0.0);
    }

    #[test]
    fn all_negative_preactivation_gives_zero_state() {
        let params = RnnParams {
            m: 3,
            d: 1,
            d_out: 1,
            w: WeightMatrix::Dense(Mat::zeros((3, 3))),
            a: Mat::from_elem((3, 1), -1.0),
            b: Mat::zeros((1, 3)),
            b_mode: BVarianceMode::OneOverDout,
        };
        let tokens = Mat::from_elem((2, 1), 1.0);
        let trace = forward_tokens(&params, &tokens).unwrap();
        assert!(trace.h[1].iter().all(|&v| v == 0.0));
        assert!(trace.h[2].iter().all(|&v| v == 0.0));
        assert_eq!(trace.masks[0].count_ones(), 0);
    }

    #[test]
    fn mask_ties_activate_at_zero() {
        let mask = SignMask::from_preact(&[0.0, -0.0, -1.0, 1.0]);
        assert!(mask.bit(0));
        // -0.0 >= 0.0 is true in IEEE order, so the tie-break also fires.
        assert!(mask.bit(1));
        assert!(!mask.bit(2));
        assert!(mask.bit(3));
    }
}
