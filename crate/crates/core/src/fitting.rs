//! Fitting the indicator-basis function approximator H and building the
//! existence construction (W* ≡ 0, A* supported on the marker column) whose
//! pseudo-network output tracks a smooth concept.
//!
//! H(α, b₀) is expanded in products of probabilists' Hermite polynomials and
//! fitted by ridge least squares so that E[1[α·u + β·√(r_x²−u²) + b₀ ≥ 0]
//! · H(α, b₀)] matches Φ(k₀·u) on a grid of u values. The β and b₀
//! integrals are taken in closed form (conditioning on α and β leaves a
//! Gaussian half-line moment of He_b), so the Monte Carlo noise enters only
//! through the (α, β) sample — this is what makes the 64-point grid fits
//! reliable at n_mc in the tens of thousands.

use ndarray::{Array1, Array2, ArrayView1};

use crate::complexity::TaylorSeries;
use crate::concept::{eval_concept, ConceptFunction, ConceptNeuron};
use crate::inversion::{build_decoder, Decoder, DecoderVariant};
use crate::numerics::{Mat, RngStream};
use crate::rnn::{forward_batch_masks, init_params, init_params_streamed, BVarianceMode, RnnParams, SignMask};
use crate::sequences::{normalize, sample_true_sequence, TrueSequence};
use crate::{Error, Result};

const SQRT_2PI: f64 = 2.5066282746310002;

fn gauss_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

fn gauss_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Fill `out[0..=k]` with He_0(x) … He_k(x) (probabilists' convention:
/// He_{n+1} = x·He_n − n·He_{n−1}).
pub(crate) fn hermite_row(x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = x * out[n] - n as f64 * out[n - 1];
    }
}

/// Half-line moments of the b₀ integral: I_b(t) = ∫_{−t}^∞ He_b(x) φ(x) dx,
/// which is Φ(t) for b = 0 and He_{b−1}(−t)·φ(t) for b ≥ 1. `out[b]` gets
/// I_b; `scratch` must hold max(out.len()−1, 1) values.
///
/// The same family absorbs a Gaussian shift: the generating function
/// Σ_b z^b/b!·I_b(t) = Φ(t+z) gives E_β[I_b(c + βw)] = s^{−b}·I_b(c/s)
/// with s = √(1+w²), which is how the β₁ integral is taken in closed form.
pub(crate) fn halfline_moments(t: f64, out: &mut [f64], scratch: &mut [f64]) {
    out[0] = gauss_cdf(t);
    if out.len() == 1 {
        return;
    }
    hermite_row(-t, &mut scratch[..out.len() - 1]);
    let pdf = gauss_pdf(t);
    for b in 1..out.len() {
        out[b] = scratch[b - 1] * pdf;
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Basis index pairs (a, b) with a + b ≤ k, in a-major order.
fn basis_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity((k + 1) * (k + 2) / 2);
    for a in 0..=k {
        for b in 0..=k - a {
            pairs.push((a, b));
        }
    }
    pairs
}

/// One fitted approximator H(α, b₀) = Σ_{a+b≤K} c_{a,b} He_a(α) He_b(b₀),
/// with its held-out accuracy on the target it was fitted to.
#[derive(Clone, Debug)]
pub struct IndicatorFit {
    pub k_deg: usize,
    /// Coefficients in the order of `basis_pairs(k_deg)`.
    pub coeffs: Vec<f64>,
    /// Sup over a held-out u-grid of |Ê[1[…]·H] − Φ(k₀u)|, estimated with
    /// fresh Monte Carlo samples never seen by the fit.
    pub sup_error: f64,
    /// Max finite-difference slope of H in its first argument on
    /// [−3,3] × {−2,…,2} — a boundedness report, not a certified constant.
    pub max_alpha_slope: f64,
    pub phi_name: String,
    pub k0: f64,
    pub r_x: f64,
}

impl IndicatorFit {
    pub fn eval_h(&self, alpha: f64, b0: f64) -> f64 {
        let k = self.k_deg;
        let mut ha = vec![0.0; k + 1];
        let mut hb = vec![0.0; k + 1];
        hermite_row(alpha, &mut ha);
        hermite_row(b0, &mut hb);
        basis_pairs(k)
            .iter()
            .zip(self.coeffs.iter())
            .map(|(&(a, b), &c)| c * ha[a] * hb[b])
            .sum()
    }
}

/// Solve (G + diag(ridge)) x = rhs for symmetric positive-definite G by an
/// in-place Cholesky factorization. Fails with a condition estimate when a
/// pivot collapses despite the ridge.
fn cholesky_solve(g: &Mat, ridge: &[f64], rhs: &ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = g.nrows();
    let mut l = g.clone();
    for i in 0..n {
        l[(i, i)] += ridge[i];
    }
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(l[(i, i)]));
    for j in 0..n {
        for k in 0..j {
            let ljk = l[(j, k)];
            for i in j..n {
                let sub = l[(i, k)] * ljk;
                l[(i, j)] -= sub;
            }
        }
        let pivot = l[(j, j)];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::numeric(format!(
                "normal equations not positive definite at pivot {j} even with the ridge \
                 (condition estimate {:.3e})",
                max_diag / pivot.abs().max(f64::MIN_POSITIVE)
            )));
        }
        let root = pivot.sqrt();
        for i in j..n {
            l[(i, j)] /= root;
        }
    }
    // Forward then backward substitution with the lower factor.
    let mut y = rhs.to_owned();
    for i in 0..n {
        for k in 0..i {
            let sub = l[(i, k)] * y[k];
            y[i] -= sub;
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let sub = l[(k, i)] * y[k];
            y[i] -= sub;
        }
        y[i] /= l[(i, i)];
    }
    Ok(y)
}

/// Feature matrix rows: for each grid point u, the vector of
/// Ê[1[αu + β√(r_x²−u²) + b₀ ≥ 0] · He_a(α) He_b(b₀)] over the basis. The
/// β and b₀ integrals are exact (each application of the smoothing identity
/// absorbs one Gaussian), so only α is sampled — the per-sample term is
/// He_a(α_j)·s^{−b}·I_b(α_j·u/s) with s = √(1 + r_x² − u²).
pub(crate) fn feature_matrix(grid: &[f64], r_x: f64, k: usize, alphas: &[f64]) -> Mat {
    let n = alphas.len();
    let pairs = basis_pairs(k);
    let mut hea = Array2::zeros((n, k + 1));
    {
        let mut row = vec![0.0; k + 1];
        for (j, &a) in alphas.iter().enumerate() {
            hermite_row(a, &mut row);
            for (c, &v) in row.iter().enumerate() {
                hea[(j, c)] = v;
            }
        }
    }
    let mut x = Array2::zeros((grid.len(), pairs.len()));
    let mut ib = Array2::zeros((n, k + 1));
    let mut moments = vec![0.0; k + 1];
    let mut scratch = vec![0.0; k.max(1)];
    for (gi, &u) in grid.iter().enumerate() {
        let w_sq = (r_x * r_x - u * u).max(0.0);
        let s = (1.0 + w_sq).sqrt();
        let mut s_pow = vec![1.0; k + 1];
        for b in 1..=k {
            s_pow[b] = s_pow[b - 1] / s;
        }
        for j in 0..n {
            halfline_moments(alphas[j] * u / s, &mut moments, &mut scratch);
            for (c, &v) in moments.iter().enumerate() {
                ib[(j, c)] = v * s_pow[c];
            }
        }
        let mixed = hea.t().dot(&ib) / n as f64; // (k+1)×(k+1) means
        for (ci, &(a, b)) in pairs.iter().enumerate() {
            x[(gi, ci)] = mixed[(a, b)];
        }
    }
    x
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Fit H so the masked expectation matches Φ(k₀·u) on a 64-point grid over
/// [−0.95·r_x, 0.95·r_x], then score it on a fresh 101-point grid with a
/// fresh sample. Requires r_x > 0 and n_mc ≥ 10⁴. `ridge` scales a penalty
/// of a!·b! per coefficient — a plain ridge on the orthonormalized Hermite
/// basis, so the regularizer is exactly ridge·E[H²] (0 disables it up to a
/// tiny positive-definiteness floor).
pub fn fit_h(
    phi: &TaylorSeries,
    k0: f64,
    r_x: f64,
    n_mc: usize,
    k_deg: usize,
    ridge: f64,
    rng: &RngStream,
) -> Result<IndicatorFit> {
    if !(r_x.is_finite() && r_x > 0.0) {
        return Err(Error::invalid(format!("r_x must be positive, got {r_x}")));
    }
    if !k0.is_finite() {
        return Err(Error::non_finite("k0 must be finite"));
    }
    if n_mc < 10_000 {
        return Err(Error::invalid(format!(
            "the fit needs n_mc >= 10000 samples, got {n_mc}"
        )));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::invalid(format!("ridge must be >= 0, got {ridge}")));
    }

    let draw = |tag: &str, n: usize| -> Result<Vec<f64>> {
        let mut stream = rng.split(tag)?;
        let mut alphas = vec![0.0; n];
        stream.fill_gaussian(&mut alphas);
        Ok(alphas)
    };

    let alphas = draw("train", n_mc)?;
    let grid = linspace(-0.95 * r_x, 0.95 * r_x, 64);
    let x = feature_matrix(&grid, r_x, k_deg, &alphas);
    let y = Array1::from_iter(grid.iter().map(|&u| phi.eval(k0 * u)));

    // Parity kills half the basis exactly: flipping (α, β, b₀) jointly
    // turns the indicator into its complement and scales He_a(α)He_b(b₀) by
    // (−1)^{a+b}, so E[1·He_aHe_b] = ½·δ_{a0}δ_{b0} whenever a+b is even —
    // identically in u. Those columns carry no signal, only Monte Carlo
    // noise, so the solve runs over the constant plus the odd-degree pairs.
    let pairs = basis_pairs(k_deg);
    let live: Vec<usize> = pairs
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| (a, b) == (0, 0) || (a + b) % 2 == 1)
        .map(|(i, _)| i)
        .collect();
    let mut x_live = Array2::zeros((x.nrows(), live.len()));
    for (ci, &c) in live.iter().enumerate() {
        x_live.column_mut(ci).assign(&x.column(c));
    }

    // He_a(α)He_b(b₀) has squared norm a!·b! under the standard Gaussian
    // pair, so penalizing coefficient c by ridge·a!·b! is a plain ridge on
    // the orthonormalized basis — it shrinks E[H²], the quantity that
    // controls how hard the fitted H gets used downstream, instead of the
    // meaningless raw coefficient vector. A uniform penalty lets degree-8
    // terms carry huge function mass at tiny coefficient cost and the
    // resulting H is numerically useless away from the exact fit geometry.
    let floor = 1e-12
        * (0..x_live.ncols())
            .map(|c| x_live.column(c).iter().map(|v| v * v).sum::<f64>())
            .fold(0.0f64, f64::max)
        + f64::MIN_POSITIVE;
    let penalties: Vec<f64> = live
        .iter()
        .map(|&c| {
            let (a, b) = pairs[c];
            ridge * factorial(a) * factorial(b) + floor
        })
        .collect();
    let gram = x_live.t().dot(&x_live);
    let rhs = x_live.t().dot(&y);
    let live_coeffs = cholesky_solve(&gram, &penalties, &rhs.view())?;
    let mut coeffs = Array1::zeros(pairs.len());
    for (ci, &c) in live.iter().enumerate() {
        coeffs[c] = live_coeffs[ci];
    }

    // The held-out score is a measurement of the fit, so it gets a larger
    // fresh sample: the fit's own error should dominate the report, not the
    // scorer's noise.
    let ho_alphas = draw("holdout", n_mc.max(100_000))?;
    let ho_grid = linspace(-0.95 * r_x, 0.95 * r_x, 101);
    let ho_x = feature_matrix(&ho_grid, r_x, k_deg, &ho_alphas);
    let ho_pred = ho_x.dot(&coeffs);
    let sup_error = ho_grid
        .iter()
        .zip(ho_pred.iter())
        .map(|(&u, &p)| (p - phi.eval(k0 * u)).abs())
        .fold(0.0f64, f64::max);

    let fit = IndicatorFit {
        k_deg,
        coeffs: coeffs.to_vec(),
        sup_error,
        max_alpha_slope: 0.0,
        phi_name: phi.name().to_string(),
        k0,
        r_x,
    };
    let mut max_slope = 0.0f64;
    let step = 0.05;
    for b0i in -2..=2 {
        let b0 = b0i as f64;
        let mut prev = fit.eval_h(-3.0, b0);
        let mut a = -3.0 + step;
        while a <= 3.0 + 1e-12 {
            let cur = fit.eval_h(a, b0);
            max_slope = max_slope.max(((cur - prev) / step).abs());
            prev = cur;
            a += step;
        }
    }
    if !max_slope.is_finite() {
        return Err(Error::non_finite("fitted H has a non-finite slope"));
    }
    Ok(IndicatorFit { max_alpha_slope: max_slope, ..fit })
}

/// The existence construction: the recurrent perturbation W* is identically
/// zero (never materialized) and the input perturbation A* is a*_col ⊗ e_dᵀ,
/// nonzero only in the marker column.
#[derive(Clone, Debug)]
pub struct TargetParams {
    /// The single nonzero column of A* (length m).
    pub astar_col: Array1<f64>,
    pub l: usize,
    pub d: usize,
    pub eps_x: f64,
    /// θ_{r',s} indexed [s][r'], matching the concept's neuron layout.
    pub thetas: Vec<Vec<f64>>,
}

impl TargetParams {
    /// Materialized A* (m×d).
    pub fn astar(&self) -> Mat {
        let m = self.astar_col.len();
        let mut a = Array2::zeros((m, self.d));
        a.column_mut(self.d - 1).assign(&self.astar_col);
        a
    }

    /// ‖A*‖_F, which reduces to the column norm.
    pub fn astar_fro(&self) -> f64 {
        self.astar_col.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Build (W*, A*) from fitted approximators:
/// a*_r = (d_out/m) Σ_s Σ_{r'} b_{r,s} b†_{r',s}
///        H_{r',s}(θ_{r',s}·⟨w_r, W̄ w†_{r',s}⟩, √(m/2)·a_{r,d}) · e_d,
/// with θ_{r',s} = √(m/2)/‖W̄ w†_{r',s}‖. `fits[s][r']` must have been
/// fitted at k₀ = ε_x^{−1}·‖W̄ w†_{r',s}‖ and r_x = √(2+(L−2)ε_x²).
pub fn build_target_params(
    params: &RnnParams,
    decoder: &Decoder,
    concept: &ConceptFunction,
    fits: &[Vec<IndicatorFit>],
) -> Result<TargetParams> {
    if decoder.variant != DecoderVariant::TrueSeq {
        return Err(Error::invalid(
            "the existence construction needs the payload (true-seq) decoder".to_string(),
        ));
    }
    if decoder.l != concept.l || decoder.d != concept.d || params.d != concept.d {
        return Err(Error::dims(format!(
            "geometry mismatch: decoder ({}, {}), concept ({}, {}), params d = {}",
            decoder.l, decoder.d, concept.l, concept.d, params.d
        )));
    }
    if params.d_out != concept.d_out {
        return Err(Error::dims(format!(
            "params d_out = {} but concept has {} outputs",
            params.d_out, concept.d_out
        )));
    }
    if params.m != decoder.w_bar.nrows() {
        return Err(Error::dims("decoder was built for a different width".to_string()));
    }
    if fits.len() != concept.d_out || fits.iter().zip(&concept.neurons).any(|(f, n)| f.len() != n.len()) {
        return Err(Error::invalid(
            "one fitted H is required for every concept neuron (r', s)".to_string(),
        ));
    }

    let m = params.m;
    let sqrt_m_half = (m as f64 / 2.0).sqrt();
    let r_x_expect = (2.0 + (decoder.l as f64 - 2.0) * decoder.eps_x * decoder.eps_x).sqrt();
    let k = concept.d_out * concept.p;

    // One streamed pass of W over all direction vectors W̄ w†.
    let mut u_mat = Array2::zeros((m, k));
    let mut thetas = vec![vec![0.0; concept.p]; concept.d_out];
    let mut k0s = vec![vec![0.0; concept.p]; concept.d_out];
    for (s, row) in concept.neurons.iter().enumerate() {
        for (r, neuron) in row.iter().enumerate() {
            let ubar = decoder.w_bar.dot(&neuron.w_dagger);
            let norm = ubar.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= 0.0 {
                return Err(Error::numeric(format!(
                    "decoder annihilates concept direction ({r}, {s}); θ undefined"
                )));
            }
            thetas[s][r] = sqrt_m_half / norm;
            k0s[s][r] = norm / decoder.eps_x;
            u_mat.column_mut(s * concept.p + r).assign(&ubar);
        }
    }
    for (s, row) in fits.iter().enumerate() {
        for (r, fit) in row.iter().enumerate() {
            let k0 = k0s[s][r];
            if (fit.k0 - k0).abs() > 1e-6 * k0.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "fit ({r}, {s}) was built for k0 = {} but this geometry needs {k0}",
                    fit.k0
                )));
            }
            if (fit.r_x - r_x_expect).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "fit ({r}, {s}) was built for r_x = {} but this geometry needs {r_x_expect}",
                    fit.r_x
                )));
            }
        }
    }
    let wu = params.w.matmul(&u_mat.view())?; // m×k, row r holds ⟨w_r, W̄w†⟩

    let scale = params.d_out as f64 / m as f64;
    let mut astar_col = Array1::zeros(m);
    for r in 0..m {
        let b0_arg = sqrt_m_half * params.a[(r, params.d - 1)];
        let mut acc = 0.0;
        for (s, row) in concept.neurons.iter().enumerate() {
            for (rp, neuron) in row.iter().enumerate() {
                let alpha_arg = thetas[s][rp] * wu[(r, s * concept.p + rp)];
                acc += params.b[(s, r)]
                    * neuron.b_dagger
                    * fits[s][rp].eval_h(alpha_arg, b0_arg);
            }
        }
        astar_col[r] = scale * acc;
    }
    if astar_col.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("A* construction produced non-finite entries"));
    }

    Ok(TargetParams {
        astar_col,
        l: decoder.l,
        d: decoder.d,
        eps_x: decoder.eps_x,
        thetas,
    })
}

/// Agreement statistics between the pseudo-network under (W*, A*) and the
/// concept outputs over a sequence sample.
#[derive(Clone, Debug)]
pub struct ExistenceStats {
    /// Mean |pseudo − concept| over all outputs and sequences.
    pub mean_abs_err: f64,
    /// Mean over outputs of the per-output Pearson correlation (0 when
    /// either side is constant).
    pub correlation: f64,
    /// (mean_abs_err, correlation) per output coordinate.
    pub per_output: Vec<(f64, f64)>,
}

fn pearson(a: &ArrayView1<f64>, b: &ArrayView1<f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        cov / (va.sqrt() * vb.sqrt())
    }
}

/// Linear response of the network to the perturbation (W* = 0, A*): the
/// recursion z^(ℓ) = D^(ℓ) ⊙ (W z^(ℓ−1) + a*_col·x^(ℓ)_d) batched over
/// sequences, returning B z^(L) per sequence (d_out×N).
pub(crate) fn pseudo_response_batch(
    params: &RnnParams,
    masks: &[Vec<SignMask>],
    marker_coords: &[Vec<f64>],
    astar_col: &Array1<f64>,
) -> Result<Mat> {
    let m = params.m;
    let n = masks[0].len();
    let l = masks.len();
    let mut z = Mat::zeros((m, n));
    for ell in 0..l {
        let mut pre = if ell == 0 {
            Mat::zeros((m, n))
        } else {
            params.w.matmul(&z.view())?
        };
        for j in 0..n {
            let xd = marker_coords[ell][j];
            if xd != 0.0 {
                let mut col = pre.column_mut(j);
                col += &(astar_col * xd);
            }
            let mask = &masks[ell][j];
            for (r, v) in pre.column_mut(j).iter_mut().enumerate() {
                if !mask.bit(r) {
                    *v = 0.0;
                }
            }
        }
        z = pre;
    }
    Ok(params.b.dot(&z))
}

/// Compare the pseudo-network under (W* = 0, A*) against the concept on a
/// sample of true sequences (run through the network in normalized form).
pub fn existence_residual(
    params: &RnnParams,
    target: &TargetParams,
    concept: &ConceptFunction,
    seqs: &[TrueSequence],
) -> Result<ExistenceStats> {
    if seqs.is_empty() {
        return Err(Error::invalid("existence check needs at least one sequence"));
    }
    if target.l != concept.l || target.d != concept.d {
        return Err(Error::dims("target/concept geometry mismatch".to_string()));
    }
    if target.astar_col.len() != params.m {
        return Err(Error::dims("A* was built for a different width".to_string()));
    }
    let n = seqs.len();
    let mut tokens = Vec::with_capacity(n);
    let mut concept_out = Array2::zeros((concept.d_out, n));
    for (j, seq) in seqs.iter().enumerate() {
        let norm = normalize(seq, target.eps_x)?;
        tokens.push(norm.tokens().clone());
        concept_out.column_mut(j).assign(&eval_concept(concept, seq)?);
    }
    let (_, masks) = forward_batch_masks(params, &tokens)?;
    let l = masks.len();
    let marker: Vec<Vec<f64>> = (0..l)
        .map(|ell| tokens.iter().map(|t| t[(ell, target.d - 1)]).collect())
        .collect();
    let pseudo = pseudo_response_batch(params, &masks, &marker, &target.astar_col)?;

    let mut per_output = Vec::with_capacity(concept.d_out);
    let mut total_abs = 0.0;
    let mut total_corr = 0.0;
    for s in 0..concept.d_out {
        let p = pseudo.row(s);
        let c = concept_out.row(s);
        let mae = p
            .iter()
            .zip(c.iter())
            .map(|(&x, &y)| (x - y).abs())
            .sum::<f64>()
            / n as f64;
        let corr = pearson(&p, &c);
        total_abs += mae;
        total_corr += corr;
        per_output.push((mae, corr));
    }
    Ok(ExistenceStats {
        mean_abs_err: total_abs / concept.d_out as f64,
        correlation: total_corr / concept.d_out as f64,
        per_output,
    })
}

/// Draw a smooth concept with unit directions and ±1 coefficients, all
/// neurons sharing one activation.
pub fn random_concept(
    rng: &RngStream,
    p: usize,
    d_out: usize,
    l: usize,
    d: usize,
    phi: &TaylorSeries,
) -> Result<ConceptFunction> {
    if p == 0 || d_out == 0 {
        return Err(Error::invalid("concept needs p >= 1 and d_out >= 1"));
    }
    let flat = l.saturating_sub(2) * d.saturating_sub(1);
    let mut neurons = Vec::with_capacity(d_out);
    for s in 0..d_out {
        let mut row = Vec::with_capacity(p);
        for r in 0..p {
            let mut stream = rng
                .split("concept-neuron")?
                .split_index((s * p + r) as u64);
            let mut w = vec![0.0; flat];
            loop {
                stream.fill_gaussian(&mut w);
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for v in w.iter_mut() {
                        *v /= norm;
                    }
                    break;
                }
            }
            let b_dagger = if stream.next_below(2) == 0 { -1.0 } else { 1.0 };
            row.push(ConceptNeuron {
                w_dagger: Array1::from_vec(w),
                b_dagger,
                phi: phi.clone(),
            });
        }
        neurons.push(row);
    }
    ConceptFunction::new(p, d_out, l, d, neurons)
}

/// Full existence experiment: draw a network and a concept, build the
/// payload decoder, fit one H per neuron, assemble (W*, A*), and measure
/// pseudo-vs-concept agreement on fresh sequences.
#[derive(Clone, Debug)]
pub struct ExistenceConfig {
    pub m: usize,
    pub d: usize,
    pub d_out: usize,
    pub l: usize,
    pub eps_x: f64,
    pub p: usize,
    pub n_seq: usize,
    pub n_mc: usize,
    pub k_deg: usize,
    pub ridge: f64,
    /// Regenerate W from its stream panel by panel instead of storing it
    /// (same bits, bounded memory) — the only viable path at large m.
    pub streamed: bool,
    pub b_mode: BVarianceMode,
    pub phi: TaylorSeries,
}

#[derive(Clone, Debug)]
pub struct ExistenceRun {
    pub stats: ExistenceStats,
    pub astar_fro: f64,
    /// (min, max) of √(2/m)·θ_{r',s} across neurons.
    pub theta_scaled_range: (f64, f64),
    pub fit_sup_errors: Vec<f64>,
    pub k0s: Vec<f64>,
}

pub fn run_existence(cfg: &ExistenceConfig, rng: &RngStream) -> Result<ExistenceRun> {
    if cfg.n_seq < 2 {
        return Err(Error::invalid("existence statistics need n_seq >= 2"));
    }
    let params = if cfg.streamed {
        init_params_streamed(&rng.split("params")?, cfg.m, cfg.d, cfg.d_out, cfg.b_mode)?
    } else {
        init_params(&rng.split("params")?, cfg.m, cfg.d, cfg.d_out, cfg.b_mode)?
    };
    let concept = random_concept(
        &rng.split("concept")?,
        cfg.p,
        cfg.d_out,
        cfg.l,
        cfg.d,
        &cfg.phi,
    )?;
    let decoder = build_decoder(&params, cfg.l, cfg.eps_x, DecoderVariant::TrueSeq)?;

    let r_x = (2.0 + (cfg.l as f64 - 2.0) * cfg.eps_x * cfg.eps_x).sqrt();
    let fit_root = rng.split("fit")?;
    let mut fits = Vec::with_capacity(cfg.d_out);
    let mut fit_sup_errors = Vec::new();
    let mut k0s = Vec::new();
    for (s, row) in concept.neurons.iter().enumerate() {
        let mut fit_row = Vec::with_capacity(row.len());
        for (r, neuron) in row.iter().enumerate() {
            let ubar = decoder.w_bar.dot(&neuron.w_dagger);
            let norm = ubar.iter().map(|v| v * v).sum::<f64>().sqrt();
            let k0 = norm / cfg.eps_x;
            let fit = fit_h(
                &cfg.phi,
                k0,
                r_x,
                cfg.n_mc,
                cfg.k_deg,
                cfg.ridge,
                &fit_root.split_index((s * cfg.p + r) as u64),
            )?;
            fit_sup_errors.push(fit.sup_error);
            k0s.push(k0);
            fit_row.push(fit);
        }
        fits.push(fit_row);
    }

    let target = build_target_params(&params, &decoder, &concept, &fits)?;
    let scaled = (2.0 / cfg.m as f64).sqrt();
    let mut theta_min = f64::INFINITY;
    let mut theta_max = f64::NEG_INFINITY;
    for row in &target.thetas {
        for &t in row {
            theta_min = theta_min.min(scaled * t);
            theta_max = theta_max.max(scaled * t);
        }
    }

    let mut data_rng = rng.split("data")?;
    let mut seqs = Vec::with_capacity(cfg.n_seq);
    for _ in 0..cfg.n_seq {
        seqs.push(sample_true_sequence(&mut data_rng, cfg.l, cfg.d)?);
    }
    let stats = existence_residual(&params, &target, &concept, &seqs)?;

    Ok(ExistenceRun {
        stats,
        astar_fro: target.astar_fro(),
        theta_scaled_range: (theta_min, theta_max),
        fit_sup_errors,
        k0s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::{taylor_preset, TaylorPreset};

    // Simpson-quadrature check of the closed-form half-line moments the
    // whole fitting pipeline leans on.
    #[test]
    fn halfline_moments_match_quadrature() {
        let mut out = vec![0.0; 9];
        let mut scratch = vec![0.0; 8];
        let mut he = vec![0.0; 9];
        for &t in &[-2.0, -0.5, 0.0, 1.0, 3.0] {
            halfline_moments(t, &mut out, &mut scratch);
            for b in 0..=8 {
                // ∫_{−t}^{10} He_b(x) φ(x) dx by Simpson's rule.
                let (lo, hi, n) = (-t, 10.0, 20_000);
                let h = (hi - lo) / n as f64;
                let mut f = |x: f64| {
                    hermite_row(x, &mut he);
                    he[b] * gauss_pdf(x)
                };
                let mut s = f(lo) + f(hi);
                for i in 1..n {
                    s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                let quad = s * h / 3.0;
                assert!(
                    (quad - out[b]).abs() < 1e-8,
                    "b={b}, t={t}: closed form {} vs quadrature {quad}",
                    out[b]
                );
            }
        }
    }

    // The β integral is absorbed by the smoothing identity
    // E[I_b(c + βw)] = s^{−b} I_b(c/s), s = √(1+w²); check it by direct
    // Gaussian quadrature over β.
    #[test]
    fn gaussian_smoothing_identity() {
        let mut out = vec![0.0; 9];
        let mut scratch = vec![0.0; 8];
        for &(c, w) in &[(0.7f64, 0.5f64), (-1.3, 1.1), (0.0, 2.0), (2.1, 0.9)] {
            let s = (1.0 + w * w).sqrt();
            halfline_moments(c / s, &mut out, &mut scratch);
            for b in 0..=8 {
                let closed = out[b] / s.powi(b as i32);
                let (lo, hi, n) = (-8.0f64, 8.0, 16_000);
                let h = (hi - lo) / n as f64;
                let mut acc = 0.0;
                let mut tmp = vec![0.0; 9];
                let mut tmp2 = vec![0.0; 8];
                for i in 0..=n {
                    let beta = lo + i as f64 * h;
                    let wgt = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    halfline_moments(c + beta * w, &mut tmp, &mut tmp2);
                    acc += wgt * tmp[b] * gauss_pdf(beta);
                }
                let quad = acc * h / 3.0;
                assert!(
                    (quad - closed).abs() < 1e-8,
                    "b={b}, c={c}, w={w}: closed {closed} vs quadrature {quad}"
                );
            }
        }
    }

    #[test]
    fn zero_target_fits_to_zero() {
        let series = TaylorSeries::new("zero", vec![0.0]).unwrap();
        let rng = RngStream::new(5);
        let fit = fit_h(&series, 1.0, 1.0, 10_000, 4, 1e-8, &rng).unwrap();
        assert!(fit.coeffs.iter().all(|&c| c.abs() < 1e-9));
        assert_eq!(fit.sup_error, 0.0);
    }

    #[test]
    fn target_construction_is_linear_in_coefficients() {
        let rng = RngStream::new(9);
        let params = init_params(&rng.split("p").unwrap(), 96, 4, 1, BVarianceMode::OneOverDout)
            .unwrap();
        let phi = taylor_preset(&TaylorPreset::Monomial(1));
        let concept = random_concept(&rng.split("c").unwrap(), 2, 1, 4, 4, &phi).unwrap();
        let decoder = build_decoder(&params, 4, 0.05, DecoderVariant::TrueSeq).unwrap();
        let r_x = (2.0 + 2.0 * 0.05f64 * 0.05).sqrt();
        let fits: Vec<Vec<IndicatorFit>> = vec![concept.neurons[0]
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let k0 = decoder.w_bar.dot(&n.w_dagger).iter().map(|v| v * v).sum::<f64>().sqrt()
                    / 0.05;
                fit_h(&phi, k0, r_x, 10_000, 4, 1e-8, &rng.split("f").unwrap().split_index(i as u64))
                    .unwrap()
            })
            .collect()];
        let base = build_target_params(&params, &decoder, &concept, &fits).unwrap();
        let mut doubled = concept.clone();
        for row in doubled.neurons.iter_mut() {
            for n in row.iter_mut() {
                n.b_dagger *= 0.5; // stay within |b†| ≤ 1
            }
        }
        let halved = build_target_params(&params, &decoder, &doubled, &fits).unwrap();
        let diff = (&base.astar_col * 0.5 - &halved.astar_col)
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-12, "linearity violated by {diff}");
    }

    #[test]
    fn zero_concept_has_zero_residual() {
        let rng = RngStream::new(31);
        let params = init_params(&rng.split("p").unwrap(), 64, 4, 1, BVarianceMode::OneOverDout)
            .unwrap();
        let phi = taylor_preset(&TaylorPreset::Monomial(1));
        let mut concept = random_concept(&rng.split("c").unwrap(), 1, 1, 4, 4, &phi).unwrap();
        concept.neurons[0][0].b_dagger = 0.0;
        let decoder = build_decoder(&params, 4, 0.05, DecoderVariant::TrueSeq).unwrap();
        let zero = TaylorSeries::new("zero", vec![0.0]).unwrap();
        let norm = decoder.w_bar.dot(&concept.neurons[0][0].w_dagger);
        let k0 = norm.iter().map(|v| v * v).sum::<f64>().sqrt() / 0.05;
        let r_x = (2.0 + 2.0 * 0.05f64 * 0.05).sqrt();
        let fit = fit_h(&zero, k0, r_x, 10_000, 4, 1e-8, &rng.split("f").unwrap()).unwrap();
        let target = build_target_params(&params, &decoder, &concept, &[vec![fit]]).unwrap();
        assert!(target.astar_fro() == 0.0);
        let mut data_rng = rng.split("d").unwrap();
        let seqs: Vec<_> = (0..5)
            .map(|_| sample_true_sequence(&mut data_rng, 4, 4).unwrap())
            .collect();
        let stats = existence_residual(&params, &target, &concept, &seqs).unwrap();
        assert_eq!(stats.mean_abs_err, 0.0);
        assert_eq!(stats.correlation, 0.0);
    }

    // The batched marker-column recursion must agree with the general
    // first-order response evaluated per sequence with a dense perturbation
    // pair (Wp = 0, Ap supported on the last column).
    #[test]
    fn batched_response_matches_pseudo_forward() {
        use crate::rnn::{forward, pseudo_forward};
        let rng = RngStream::new(77);
        let params = init_params(&rng.split("p").unwrap(), 48, 4, 2, BVarianceMode::OneOverDout)
            .unwrap();
        let astar_col =
            crate::numerics::gaussian_vector(&mut rng.split("a").unwrap(), 48, 1.0).unwrap();
        let mut ap = Mat::zeros((48, 4));
        ap.column_mut(3).assign(&astar_col);
        let wp = Mat::zeros((48, 48));
        let mut data_rng = rng.split("d").unwrap();
        let seqs: Vec<_> = (0..6)
            .map(|_| sample_true_sequence(&mut data_rng, 5, 4).unwrap())
            .collect();
        let tokens: Vec<_> =
            seqs.iter().map(|s| normalize(s, 0.05).unwrap().tokens().clone()).collect();
        let (_, masks) = forward_batch_masks(&params, &tokens).unwrap();
        let marker: Vec<Vec<f64>> =
            (0..masks.len()).map(|ell| tokens.iter().map(|t| t[(ell, 3)]).collect()).collect();
        let batched = pseudo_response_batch(&params, &masks, &marker, &astar_col).unwrap();
        for (j, seq) in seqs.iter().enumerate() {
            let norm = normalize(seq, 0.05).unwrap();
            let trace = forward(&params, &norm).unwrap();
            let direct = pseudo_forward(&params, &trace, &wp, &ap, norm.tokens()).unwrap();
            for s in 0..2 {
                assert!(
                    (batched[(s, j)] - direct[s]).abs() < 1e-10,
                    "seq {j} output {s}: batched {} vs direct {}",
                    batched[(s, j)],
                    direct[s]
                );
            }
        }
    }
}
