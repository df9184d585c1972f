//! Inverting the hidden state of a random ReLU RNN back to its input
//! sequence: the base-mask analytical decoder built by block recursion, the
//! single-layer linear-inversion estimator it rests on, a least-squares
//! decoder trained by SGD for comparison, and the two recovery-error
//! averages used throughout the experiments.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::numerics::{Mat, RngStream};
use crate::rnn::{forward_tokens, RnnParams};
use crate::sequences::{base_sequence, check_eps_x, NormalizedSequence};
use crate::{Error, Result};

/// Which slice of the sequence the decoder reconstructs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecoderVariant {
    /// All L tokens: output length L·d, target [x^(1), …, x^(L)].
    Full,
    /// The informative payload only: output length (L−2)(d−1), target
    /// ε_x·[x̄^(2), …, x̄^(L−1)].
    TrueSeq,
}

/// How the decoder matrix was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Fitted,
}

/// A linear map h ↦ W̄ᵀh from hidden states to flattened sequence entries.
#[derive(Clone, Debug)]
pub struct Decoder {
    pub variant: DecoderVariant,
    pub provenance: Provenance,
    /// m × output-length matrix; column block k of the full variant is
    /// P(L,k)·D^(k)·A with P the masked recurrent product and D^(k) the
    /// base-sequence sign masks.
    pub w_bar: Mat,
    pub eps_x: f64,
    pub l: usize,
    pub d: usize,
}

impl Decoder {
    /// Flattened output length for a geometry/variant combination.
    pub fn output_len(variant: DecoderVariant, l: usize, d: usize) -> usize {
        match variant {
            DecoderVariant::Full => l * d,
            DecoderVariant::TrueSeq => (l - 2) * (d - 1),
        }
    }
}

/// Estimate vᵀx from one random ReLU layer: f = (2/(mβ²))·(Tv)ᵀ relu(Tx),
/// where T is m×d with i.i.d. N(0, β²) entries. Unbiased with error
/// O(‖v‖‖x‖/√m).
pub fn single_layer_invert(
    t: &ArrayView2<f64>,
    beta: f64,
    v: &ArrayView1<f64>,
    x: &ArrayView1<f64>,
) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let (m, d) = t.dim();
    if v.len() != d || x.len() != d {
        return Err(Error::dims(format!(
            "T is {m}x{d} but v has length {} and x has length {}",
            v.len(),
            x.len()
        )));
    }
    let tv = t.dot(v);
    let mut tx = t.dot(x);
    tx.mapv_inplace(|g| g.max(0.0));
    Ok(2.0 / (m as f64 * beta * beta) * tv.dot(&tx))
}

/// Token matrix of the base sequence, extended to L = 1 where the sequence
/// degenerates to the single marker token (0, …, 0, 1).
fn base_tokens(l: usize, d: usize, eps_x: f64) -> Result<Array2<f64>> {
    if l == 1 {
        check_eps_x(l, eps_x)?;
        let mut tokens = Array2::zeros((1, d));
        tokens[(0, d - 1)] = 1.0;
        Ok(tokens)
    } else {
        Ok(base_sequence(l, d, eps_x)?.tokens().clone())
    }
}

/// Build the analytical decoder by the block recursion
/// W̄^[ℓ] = [ D^(ℓ)·(W·W̄^[ℓ−1]) | D^(ℓ)·A ], W̄^[0] empty, with sign masks
/// D^(ℓ) taken from the forward pass on the base sequence. The true-seq
/// variant keeps blocks k = 2..L−1 restricted to A's first d−1 columns.
pub fn build_decoder(
    params: &RnnParams,
    l: usize,
    eps_x: f64,
    variant: DecoderVariant,
) -> Result<Decoder> {
    params.validate()?;
    let min_l = match variant {
        DecoderVariant::Full => 1,
        DecoderVariant::TrueSeq => 3,
    };
    if l < min_l {
        return Err(Error::invalid(format!(
            "{variant:?} decoder needs L >= {min_l}, got {l}"
        )));
    }
    let d = params.d;
    let m = params.m;
    let tokens = base_tokens(l, d, eps_x)?;
    let trace = forward_tokens(params, &tokens)?;

    let mut w_bar: Mat = Array2::zeros((m, 0));
    for ell in 1..=l {
        let mask = &trace.masks[ell - 1];
        let mut next = Array2::zeros((m, ell * d));
        if ell > 1 {
            let prev = params.w.matmul(&w_bar.view())?;
            next.slice_mut(s![.., ..(ell - 1) * d]).assign(&prev);
        }
        next.slice_mut(s![.., (ell - 1) * d..]).assign(&params.a);
        for (r, mut row) in next.axis_iter_mut(Axis(0)).enumerate() {
            if !mask.bit(r) {
                row.fill(0.0);
            }
        }
        w_bar = next;
    }

    let w_bar = match variant {
        DecoderVariant::Full => w_bar,
        DecoderVariant::TrueSeq => {
            let mut sel = Array2::zeros((m, (l - 2) * (d - 1)));
            for k in 2..l {
                let src = w_bar.slice(s![.., (k - 1) * d..(k - 1) * d + (d - 1)]);
                sel.slice_mut(s![.., (k - 2) * (d - 1)..(k - 1) * (d - 1)])
                    .assign(&src);
            }
            sel
        }
    };

    Ok(Decoder {
        variant,
        provenance: Provenance::Analytic,
        w_bar,
        eps_x,
        l,
        d,
    })
}

/// Apply the decoder: W̄ᵀh.
pub fn decode(dec: &Decoder, h: &ArrayView1<f64>) -> Result<Array1<f64>> {
    if h.len() != dec.w_bar.nrows() {
        return Err(Error::dims(format!(
            "hidden state has length {}, decoder expects {}",
            h.len(),
            dec.w_bar.nrows()
        )));
    }
    Ok(dec.w_bar.t().dot(h))
}

/// The ground-truth flat vector the decoder is meant to output for `seq`.
pub fn target_flat(dec: &Decoder, seq: &NormalizedSequence) -> Result<Array1<f64>> {
    if seq.l() != dec.l || seq.d() != dec.d {
        return Err(Error::dims(format!(
            "sequence geometry ({}, {}) does not match decoder ({}, {})",
            seq.l(),
            seq.d(),
            dec.l,
            dec.d
        )));
    }
    if (seq.eps_x() - dec.eps_x).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "sequence eps_x {} does not match decoder eps_x {}",
            seq.eps_x(),
            dec.eps_x
        )));
    }
    Ok(match dec.variant {
        DecoderVariant::Full => Array1::from_iter(seq.tokens().iter().copied()),
        DecoderVariant::TrueSeq => {
            // Middle-token leading coordinates are already ε_x·x̄^(k).
            let payload = seq.tokens().slice(s![1..dec.l - 1, ..dec.d - 1]);
            Array1::from_iter(payload.iter().copied())
        }
    })
}

/// Recovery-error averages over a test set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InversionErrors {
    /// E ‖W̄ᵀh − x‖₂ / ‖x‖₂ (zero-norm targets contribute the absolute
    /// error instead).
    pub avg_rel_l2: f64,
    /// E ‖W̄ᵀh − x‖∞.
    pub avg_linf: f64,
}

/// Error averages over explicit (hidden state, target) pairs.
pub fn decode_errors(dec: &Decoder, pairs: &[(Array1<f64>, Array1<f64>)]) -> Result<InversionErrors> {
    if pairs.is_empty() {
        return Err(Error::invalid("decode_errors needs at least one pair"));
    }
    let out_len = dec.w_bar.ncols();
    let mut sum_rel = 0.0;
    let mut sum_linf = 0.0;
    for (h, target) in pairs {
        if target.len() != out_len {
            return Err(Error::dims(format!(
                "target length {} does not match decoder output length {out_len}",
                target.len()
            )));
        }
        let diff = decode(dec, &h.view())? - target;
        let l2 = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
        sum_rel += if norm > 0.0 { l2 / norm } else { l2 };
        sum_linf += diff.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    }
    let n = pairs.len() as f64;
    Ok(InversionErrors {
        avg_rel_l2: sum_rel / n,
        avg_linf: sum_linf / n,
    })
}

/// Forward every test sequence through the network, decode its final hidden
/// state, and average the two recovery errors.
pub fn inversion_errors(
    params: &RnnParams,
    dec: &Decoder,
    test: &[NormalizedSequence],
) -> Result<InversionErrors> {
    let mut pairs = Vec::with_capacity(test.len());
    for seq in test {
        let trace = forward_tokens(params, seq.tokens())?;
        let target = target_flat(dec, seq)?;
        pairs.push((trace.final_h().clone(), target));
    }
    decode_errors(dec, &pairs)
}

/// Settings for the SGD decoder fit.
#[derive(Clone, Copy, Debug)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub momentum: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { epochs: 200, batch: 128, lr: 0.1, momentum: 0.9 }
    }
}

/// A fitted decoder together with its per-epoch mean training loss
/// ‖W̄ᵀh − y‖² (summed over output coordinates, averaged over samples).
#[derive(Clone, Debug)]
pub struct FitReport {
    pub decoder: Decoder,
    pub epoch_loss: Vec<f64>,
}

/// Fit a decoder by mini-batch SGD with momentum on the mean squared
/// recovery error. `h_final` holds one final hidden state per column (m×N);
/// `targets` holds the matching flat target per row (N×out_len). Training
/// order reshuffles every epoch from a child stream of `rng`.
pub fn fit_decoder(
    h_final: &ArrayView2<f64>,
    targets: &ArrayView2<f64>,
    variant: DecoderVariant,
    l: usize,
    d: usize,
    eps_x: f64,
    cfg: &FitConfig,
    rng: &RngStream,
) -> Result<FitReport> {
    let (m, n) = h_final.dim();
    if n == 0 {
        return Err(Error::invalid("fit_decoder needs at least one training pair"));
    }
    let out_len = Decoder::output_len(variant, l, d);
    if targets.nrows() != n || targets.ncols() != out_len {
        return Err(Error::dims(format!(
            "targets must be {n}x{out_len}, got {}x{}",
            targets.nrows(),
            targets.ncols()
        )));
    }
    if cfg.batch == 0 || cfg.epochs == 0 || !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(Error::invalid(
            "fit config needs batch >= 1, epochs >= 1 and a positive learning rate".to_string(),
        ));
    }

    let mut w_bar: Mat = Array2::zeros((m, out_len));
    let mut vel: Mat = Array2::zeros((m, out_len));
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = rng.split("fit-shuffle")?;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let b = chunk.len();
            let mut hb = Array2::zeros((m, b));
            let mut yb = Array2::zeros((b, out_len));
            for (j, &idx) in chunk.iter().enumerate() {
                hb.column_mut(j).assign(&h_final.column(idx));
                yb.row_mut(j).assign(&targets.row(idx));
            }
            let resid = hb.t().dot(&w_bar) - &yb; // b × out_len
            loss_sum += resid.iter().map(|v| v * v).sum::<f64>();
            let grad = hb.dot(&resid) * (2.0 / b as f64);
            vel = &vel * cfg.momentum - &(grad * cfg.lr);
            w_bar += &vel;
        }
        let mean_loss = loss_sum / n as f64;
        if !mean_loss.is_finite() {
            return Err(Error::numeric(format!(
                "decoder fit diverged at epoch {epoch} (last finite epoch loss: {})",
                epoch_loss.last().copied().unwrap_or(f64::NAN)
            )));
        }
        epoch_loss.push(mean_loss);
    }

    Ok(FitReport {
        decoder: Decoder {
            variant,
            provenance: Provenance::Fitted,
            w_bar,
            eps_x,
            l,
            d,
        },
        epoch_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::{init_params, BVarianceMode};

    #[test]
    fn zero_direction_inverts_to_zero() {
        let mut rng = RngStream::new(7);
        let mut t = Array2::zeros((64, 4));
        for v in t.iter_mut() {
            *v = rng.next_gaussian();
        }
        let v = Array1::zeros(4);
        let x = Array1::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
        let f = single_layer_invert(&t.view(), 1.0, &v.view(), &x.view()).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn decoder_base_case_is_masked_input_map() {
        let rng = RngStream::new(11);
        let params = init_params(&rng, 32, 4, 1, BVarianceMode::OneOverDout).unwrap();
        let dec = build_decoder(&params, 1, 0.5, DecoderVariant::Full).unwrap();
        assert_eq!(dec.w_bar.dim(), (32, 4));
        let tokens = base_tokens(1, 4, 0.5).unwrap();
        let trace = forward_tokens(&params, &tokens).unwrap();
        for r in 0..32 {
            for c in 0..4 {
                let want = if trace.masks[0].bit(r) { params.a[(r, c)] } else { 0.0 };
                assert_eq!(dec.w_bar[(r, c)], want);
            }
        }
    }

    #[test]
    fn decoder_shapes_and_zero_state() {
        let rng = RngStream::new(3);
        let params = init_params(&rng, 48, 5, 1, BVarianceMode::OneOverDout).unwrap();
        let full = build_decoder(&params, 4, 0.1, DecoderVariant::Full).unwrap();
        assert_eq!(full.w_bar.dim(), (48, 20));
        let ts = build_decoder(&params, 4, 0.1, DecoderVariant::TrueSeq).unwrap();
        assert_eq!(ts.w_bar.dim(), (48, 8));
        let zero = Array1::zeros(48);
        assert!(decode(&full, &zero.view()).unwrap().iter().all(|&v| v == 0.0));
        assert!(build_decoder(&params, 2, 0.1, DecoderVariant::TrueSeq).is_err());
    }

    #[test]
    fn single_pair_fit_is_exactly_solvable() {
        let rng = RngStream::new(21);
        let mut g = rng.split("h").unwrap();
        let mut h = Array2::zeros((16, 1));
        for v in h.iter_mut() {
            *v = g.next_gaussian() * 0.3;
        }
        let mut y = Array2::zeros((1, 6));
        for v in y.iter_mut() {
            *v = g.next_gaussian();
        }
        let cfg = FitConfig { epochs: 400, batch: 1, lr: 0.1, momentum: 0.9 };
        let report =
            fit_decoder(&h.view(), &y.view(), DecoderVariant::Full, 2, 3, 0.1, &cfg, &rng)
                .unwrap();
        assert!(
            *report.epoch_loss.last().unwrap() < 1e-6,
            "final loss {}",
            report.epoch_loss.last().unwrap()
        );
        assert_eq!(report.decoder.provenance, Provenance::Fitted);
    }
}
