//! True sequences on the sphere, their normalized encodings with start/end
//! markers, the fixed base sequence, and binary-string token encodings for
//! the language experiments.
//!
//! A *true sequence* carries the payload: L−2 tokens in R^{d−1}, each of unit
//! norm with its final coordinate pinned to 1/2. Its *normalized encoding*
//! in R^d brackets the payload between marker tokens e_d and scales the
//! payload by a small ε_x:
//!
//! ```text
//! x^(1) = (0^{d−1}, 1),   x^(ℓ) = (ε_x · x̄^(ℓ), 0) for 2 ≤ ℓ ≤ L−1,   x^(L) = (0^{d−1}, 1).
//! ```
//!
//! The *base sequence* replaces every payload token by (0^{d−1}, ε_x); it is
//! the reference point for sign-pattern and drift diagnostics.

use ndarray::{Array1, Array2};

use crate::numerics::RngStream;
use crate::{Error, Result};

/// Payload tokens of a sequence before normalization: L−2 vectors in
/// R^{d−1}, each of unit norm with final coordinate exactly 1/2.
#[derive(Clone, Debug)]
pub struct TrueSequence {
    l: usize,
    d: usize,
    tokens: Vec<Array1<f64>>,
}

impl TrueSequence {
    /// Build and validate. `l` is the total length of the normalized
    /// sequence this will produce, so `tokens.len() == l − 2`; requires
    /// `l ≥ 2` and `d ≥ 3` (the sphere S^{d−2} with a pinned coordinate
    /// needs at least two free dimensions).
    pub fn new(l: usize, d: usize, tokens: Vec<Array1<f64>>) -> Result<Self> {
        if d < 3 {
            return Err(Error::invalid(format!(
                "true sequences need d >= 3 (got d = {d}); d−2 sphere coordinates plus the pinned 1/2"
            )));
        }
        if l < 2 || tokens.len() != l - 2 {
            return Err(Error::invalid(format!(
                "true sequence of total length {l} must carry {} payload tokens, got {}",
                l.saturating_sub(2),
                tokens.len()
            )));
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.len() != d - 1 {
                return Err(Error::dims(format!(
                    "payload token {i} has dimension {}, expected d−1 = {}",
                    t.len(),
                    d - 1
                )));
            }
            if !t.iter().all(|v| v.is_finite()) {
                return Err(Error::non_finite(format!("payload token {i} has non-finite entries")));
            }
            if t[d - 2] != 0.5 {
                return Err(Error::invalid(format!(
                    "payload token {i} must have final coordinate exactly 1/2, got {}",
                    t[d - 2]
                )));
            }
            let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "payload token {i} must have unit norm, got {norm}"
                )));
            }
        }
        Ok(TrueSequence { l, d, tokens })
    }

    /// Total length of the normalized sequence this payload produces.
    pub fn len_total(&self) -> usize {
        self.l
    }

    /// Ambient token dimension d of the normalized encoding.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Payload tokens (length L−2, each in R^{d−1}).
    pub fn tokens(&self) -> &[Array1<f64>] {
        &self.tokens
    }
}

/// A length-L sequence of tokens in R^d following the marker/payload layout.
/// Stored as an L×d matrix whose row ℓ−1 is x^(ℓ).
#[derive(Clone, Debug)]
pub struct NormalizedSequence {
    d: usize,
    eps_x: f64,
    tokens: Array2<f64>,
}

/// The base sequence is a [`NormalizedSequence`] whose payload rows are all
/// (0^{d−1}, ε_x); it shares every accessor.
pub type BaseSequence = NormalizedSequence;

impl NormalizedSequence {
    pub fn l(&self) -> usize {
        self.tokens.nrows()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn eps_x(&self) -> f64 {
        self.eps_x
    }

    /// Tokens as an L×d matrix (row ℓ−1 is x^(ℓ)).
    pub fn tokens(&self) -> &Array2<f64> {
        &self.tokens
    }

    /// Token x^(ℓ) for 1-based ℓ.
    pub fn token(&self, ell: usize) -> ndarray::ArrayView1<'_, f64> {
        self.tokens.row(ell - 1)
    }

    /// CSV row: `L,d,eps_x` followed by the L·d entries in row-major order.
    pub fn to_csv_row(&self) -> String {
        let mut s = format!("{},{},{}", self.l(), self.d, self.eps_x);
        for v in self.tokens.iter() {
            s.push(',');
            s.push_str(&format!("{v}"));
        }
        s
    }
}

pub(crate) fn check_eps_x(l: usize, eps_x: f64) -> Result<()> {
    if !(eps_x.is_finite() && eps_x > 0.0 && eps_x < 1.0 / l as f64) {
        return Err(Error::invalid(format!(
            "eps_x must lie in (0, 1/L) = (0, {}), got {eps_x}",
            1.0 / l as f64
        )));
    }
    Ok(())
}

/// Draw a true sequence: each payload token has its first d−2 coordinates
/// uniform on the sphere of radius √3/2 (a normalized Gaussian) and its last
/// coordinate 1/2. Requires `l ≥ 3` and `d ≥ 3`.
pub fn sample_true_sequence(rng: &mut RngStream, l: usize, d: usize) -> Result<TrueSequence> {
    if l < 3 {
        return Err(Error::invalid(format!(
            "sampling a true sequence needs l >= 3 (got {l}) so there is at least one payload token"
        )));
    }
    if d < 3 {
        return Err(Error::invalid(format!("true sequences need d >= 3, got d = {d}")));
    }
    let sphere_dim = d - 2;
    let radius = 0.75f64.sqrt();
    let mut tokens = Vec::with_capacity(l - 2);
    let mut g = vec![0.0; sphere_dim];
    for _ in 0..l - 2 {
        let norm = loop {
            rng.fill_gaussian(&mut g);
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-12 {
                break n;
            }
        };
        let mut t = Array1::zeros(d - 1);
        for i in 0..sphere_dim {
            t[i] = g[i] / norm * radius;
        }
        t[d - 2] = 0.5;
        tokens.push(t);
    }
    TrueSequence::new(l, d, tokens)
}

/// Internal constructor shared by [`normalize`] and [`base_sequence`]:
/// applies the three-case marker/payload layout to raw payload rows in
/// R^{d−1} without true-sequence validation.
pub(crate) fn normalize_raw(
    payload: &[Array1<f64>],
    l: usize,
    d: usize,
    eps_x: f64,
) -> Result<NormalizedSequence> {
    check_eps_x(l, eps_x)?;
    if d < 2 {
        return Err(Error::invalid(format!("normalized sequences need d >= 2, got {d}")));
    }
    if l < 2 || payload.len() != l - 2 {
        return Err(Error::invalid(format!(
            "normalized sequence of length {l} needs {} payload rows, got {}",
            l.saturating_sub(2),
            payload.len()
        )));
    }
    let mut tokens = Array2::zeros((l, d));
    tokens[[0, d - 1]] = 1.0;
    tokens[[l - 1, d - 1]] = 1.0;
    for (i, t) in payload.iter().enumerate() {
        if t.len() != d - 1 {
            return Err(Error::dims(format!(
                "payload row {i} has dimension {}, expected {}",
                t.len(),
                d - 1
            )));
        }
        for j in 0..d - 1 {
            tokens[[i + 1, j]] = eps_x * t[j];
        }
    }
    Ok(NormalizedSequence { d, eps_x, tokens })
}

/// Normalized encoding of a true sequence:
/// markers (0^{d−1}, 1) at both ends, payload rows (ε_x · x̄^(ℓ), 0) between.
/// Requires `0 < eps_x < 1/L`.
pub fn normalize(seq: &TrueSequence, eps_x: f64) -> Result<NormalizedSequence> {
    normalize_raw(&seq.tokens, seq.l, seq.d, eps_x)
}

/// The fixed base sequence: markers at both ends and payload rows
/// (0^{d−1}, ε_x). Requires `l ≥ 2`, `d ≥ 2`, `0 < eps_x < 1/L`.
pub fn base_sequence(l: usize, d: usize, eps_x: f64) -> Result<BaseSequence> {
    check_eps_x(l, eps_x)?;
    if d < 2 {
        return Err(Error::invalid(format!("normalized sequences need d >= 2, got {d}")));
    }
    if l < 2 {
        return Err(Error::invalid(format!("base sequence needs l >= 2, got {l}")));
    }
    let mut tokens = Array2::zeros((l, d));
    tokens[[0, d - 1]] = 1.0;
    tokens[[l - 1, d - 1]] = 1.0;
    for i in 1..l - 1 {
        tokens[[i, d - 1]] = eps_x;
    }
    Ok(NormalizedSequence { d, eps_x, tokens })
}

/// How a binary string maps to tokens.
#[derive(Clone, Debug, PartialEq)]
pub enum BitEncoding {
    /// '0' → 0.0, '1' → 1.0 (scalar tokens).
    ZeroOne,
    /// '0' → −1.0, '1' → +1.0 (scalar tokens).
    PmOne,
    /// Bit b → payload token (±√3/2, 0^{d−3}, 1/2) in R^{d−1} ('1' takes +),
    /// packaged as a [`TrueSequence`] ready for [`normalize`] with the given
    /// ε_x.
    TrueSeq { d: usize, eps_x: f64 },
}

/// Token sequence produced by [`encode_bits`].
#[derive(Clone, Debug)]
pub enum BitTokens {
    /// Scalar tokens (zero_one / pm_one schemes).
    Scalars(Vec<f64>),
    /// Sphere payload (true_seq scheme) and the ε_x to normalize with.
    True { seq: TrueSequence, eps_x: f64 },
}

/// Encode a nonempty binary string under the given scheme.
pub fn encode_bits(bits: &str, scheme: &BitEncoding) -> Result<BitTokens> {
    if bits.is_empty() {
        return Err(Error::invalid("encode_bits: empty bit string"));
    }
    let mut vals = Vec::with_capacity(bits.len());
    for (i, c) in bits.chars().enumerate() {
        match c {
            '0' => vals.push(0.0),
            '1' => vals.push(1.0),
            _ => {
                return Err(Error::invalid(format!(
                    "encode_bits: non-binary character {c:?} at position {i}"
                )))
            }
        }
    }
    match *scheme {
        BitEncoding::ZeroOne => Ok(BitTokens::Scalars(vals)),
        BitEncoding::PmOne => {
            Ok(BitTokens::Scalars(vals.into_iter().map(|b| 2.0 * b - 1.0).collect()))
        }
        BitEncoding::TrueSeq { d, eps_x } => {
            if d < 3 {
                return Err(Error::invalid(format!(
                    "true_seq encoding needs d >= 3, got d = {d}"
                )));
            }
            let radius = 0.75f64.sqrt();
            let tokens: Vec<Array1<f64>> = vals
                .iter()
                .map(|&b| {
                    let mut t = Array1::zeros(d - 1);
                    t[0] = if b > 0.5 { radius } else { -radius };
                    t[d - 2] = 0.5;
                    t
                })
                .collect();
            let seq = TrueSequence::new(bits.len() + 2, d, tokens)?;
            Ok(BitTokens::True { seq, eps_x })
        }
    }
}

/// Raw i.i.d. standard-Gaussian tokens as an L×d matrix (the data law used by
/// the decoder-learning experiment protocol; not marker-normalized).
pub fn sample_gaussian_tokens(rng: &mut RngStream, l: usize, d: usize) -> Result<Array2<f64>> {
    if l == 0 || d == 0 {
        return Err(Error::invalid(format!("token matrix needs l, d >= 1, got {l}x{d}")));
    }
    let mut out = Array2::zeros((l, d));
    rng.fill_gaussian(out.as_slice_mut().expect("contiguous"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The base sequence equals the marker/payload construction applied to
    /// zero payload rows except for ε_x moving from the payload slots (where
    /// zeros stay zero) into the final coordinate.
    #[test]
    fn base_is_normalized_zeros_up_to_eps_placement() {
        let (l, d, eps) = (5, 4, 0.1);
        let zeros: Vec<Array1<f64>> = (0..l - 2).map(|_| Array1::zeros(d - 1)).collect();
        let from_zeros = normalize_raw(&zeros, l, d, eps).unwrap();
        let base = base_sequence(l, d, eps).unwrap();
        for ell in 0..l {
            for j in 0..d {
                let (a, b) = (from_zeros.tokens()[[ell, j]], base.tokens()[[ell, j]]);
                if (1..l - 1).contains(&ell) && j == d - 1 {
                    assert_eq!(a, 0.0);
                    assert_eq!(b, eps);
                } else {
                    assert_eq!(a, b);
                }
            }
        }
    }
}
