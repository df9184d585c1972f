//! The eight experiment runners. Each resolves its options (flags over
//! config file over defaults), executes its grid, and writes the module's
//! CSV — plus an SVG line chart when `--plot` is set and the subcommand has
//! an m-axis to draw.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use seqlab_core::complexity::{complexity_report, parse_preset, taylor_preset};
use seqlab_core::concept::{
    additive_min_error, build_language_concept, dl1_block_infeasible, language_concept_accepts,
    LanguageConceptKind,
};
use seqlab_core::fitting::{run_existence, ExistenceConfig};
use seqlab_core::inversion::{
    build_decoder, decode_errors, fit_decoder, inversion_errors, single_layer_invert,
    DecoderVariant, FitConfig,
};
use seqlab_core::languages::{
    dl1_spec, generate_dataset, language_spec, membership, substring_spec, LanguageSpec,
};
use seqlab_core::numerics::{frob_norm, gaussian_matrix, gaussian_vector, RngStream};
use seqlab_core::rnn::{
    coupling_residual, forward_batch_final, init_params, init_params_streamed, norm_diagnostics,
    BVarianceMode, RnnParams,
};
use seqlab_core::sequences::{normalize, sample_true_sequence, NormalizedSequence};
use seqlab_core::training::{
    train_classifier, Activation, LossKind, OptimizerKind, TrainConfig, TrainReport,
};

use crate::cliargs::*;
use crate::config::{resolve, resolve_flag, resolve_list};
use crate::output::{median, svg_line_chart, write_file, ConfigLine, CsvFile, Series};
use crate::{CliError, Ctx};

/// Dense recurrent weights above this width would dominate memory, so the
/// runners switch to stream-regenerated panels (identical weight bits).
const STREAM_AT: usize = 8192;

fn core_rng(seed: u64, scope: &str) -> Result<RngStream, CliError> {
    Ok(RngStream::new(seed).split(scope)?)
}

fn drawn_params(
    rng: &RngStream,
    m: usize,
    d: usize,
    d_out: usize,
) -> Result<RnnParams, CliError> {
    let p = if m >= STREAM_AT {
        init_params_streamed(rng, m, d, d_out, BVarianceMode::OneOverDout)?
    } else {
        init_params(rng, m, d, d_out, BVarianceMode::OneOverDout)?
    };
    Ok(p)
}

/// Literal unit-variance init: W, A ~ N(0, 1) entrywise. Hidden-state norms
/// blow up like (m/2)^{L/2}, so this is only usable for small comparison
/// runs; the scaled default is the faithful replication at realistic widths.
fn raw_unit_params(
    rng: &RngStream,
    m: usize,
    d: usize,
    d_out: usize,
) -> Result<RnnParams, CliError> {
    let w = if m >= STREAM_AT {
        WeightMatrix::Streamed(ImplicitGaussianMatrix::new(rng.split("W")?, m, m, 1.0)?)
    } else {
        WeightMatrix::Dense(gaussian_matrix(&rng.split("W")?, m, m, 1.0)?)
    };
    Ok(RnnParams {
        m,
        d,
        d_out,
        w,
        a: gaussian_matrix(&rng.split("A")?, m, d, 1.0)?,
        b: gaussian_matrix(&rng.split("B")?, d_out, m, (1.0 / d_out as f64).sqrt())?,
        b_mode: BVarianceMode::OneOverDout,
    })
}

fn experiment_params(
    rng: &RngStream,
    m: usize,
    d: usize,
    d_out: usize,
    raw: bool,
) -> Result<RnnParams, CliError> {
    if raw {
        raw_unit_params(rng, m, d, d_out)
    } else {
        drawn_params(rng, m, d, d_out)
    }
}

fn parse_variant(s: &str) -> Result<DecoderVariant, CliError> {
    match s {
        "full" => Ok(DecoderVariant::Full),
        "true-seq" | "true_seq" => Ok(DecoderVariant::TrueSeq),
        other => Err(CliError::Config(format!(
            "unknown decoder variant {other:?} (expected full or true-seq)"
        ))),
    }
}

fn variant_name(v: DecoderVariant) -> &'static str {
    match v {
        DecoderVariant::Full => "full",
        DecoderVariant::TrueSeq => "true_seq",
    }
}

fn sample_normalized(
    rng: &mut RngStream,
    n: usize,
    l: usize,
    d: usize,
    eps_x: f64,
) -> Result<Vec<NormalizedSequence>, CliError> {
    (0..n)
        .map(|_| Ok(normalize(&sample_true_sequence(rng, l, d)?, eps_x)?))
        .collect()
}

/// Run `f` over the grid on `jobs` workers, keeping input order in the
/// output so CSVs do not depend on scheduling.
fn run_grid<P, R>(
    jobs: usize,
    points: &[P],
    f: impl Fn(&P) -> Result<R, CliError> + Sync,
) -> Result<Vec<R>, CliError>
where
    P: Sync,
    R: Send,
{
    if jobs <= 1 {
        points.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Failure(format!("cannot build worker pool: {e}")))?;
        pool.install(|| points.par_iter().map(&f).collect())
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// invert-analytic

pub fn invert_analytic(a: &InvertAnalyticArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let file = &mut ctx.file;
    let grid_m = resolve_list(file, "grid-m", a.grid_m.clone(), &[512, 2048, 8192])?;
    let l = resolve(file, "L", a.l, 4)?;
    let d = resolve(file, "d", a.d, 4)?;
    let eps_x = resolve(file, "eps-x", a.eps_x, 0.05)?;
    let seeds = resolve(file, "seeds", a.seeds, 10)?;
    let n_test = resolve(file, "n-test", a.n_test, 64)?;
    let variant = parse_variant(&resolve(file, "variant", a.variant.clone(), "true-seq".into())?)?;
    ctx.check_unused()?;

    let mut config = ConfigLine::new("invert-analytic", ctx.seed);
    config.push_list("grid-m", &grid_m);
    config.push("L", l);
    config.push("d", d);
    config.push("eps-x", eps_x);
    config.push("seeds", seeds);
    config.push("n-test", n_test);
    config.push("variant", variant_name(variant));

    let root = core_rng(ctx.seed, "invert-analytic")?;
    let points: Vec<(usize, u64)> =
        grid_m.iter().flat_map(|&m| (0..seeds).map(move |s| (m, s))).collect();
    let rows = run_grid(ctx.jobs, &points, |&(m, s)| {
        let point = root.split_index(m as u64).split_index(s);
        let params = drawn_params(&point.split("params")?, m, d, 1)?;
        let dec = build_decoder(&params, l, eps_x, variant)?;
        let mut seq_rng = point.split("test")?;
        let test = sample_normalized(&mut seq_rng, n_test, l, d, eps_x)?;
        let errs = inversion_errors(&params, &dec, &test)?;
        Ok((m, s, errs.avg_rel_l2, errs.avg_linf))
    })?;

    let mut csv = CsvFile::create(
        &ctx.out,
        "invert_analytic.csv",
        &config,
        "seed,m,L,d,eps_x,variant,provenance,avg_rel_l2,avg_linf",
    );
    for &(m, s, rel, linf) in &rows {
        csv.row(&[
            s.to_string(),
            m.to_string(),
            l.to_string(),
            d.to_string(),
            fmt_f(eps_x),
            variant_name(variant).into(),
            "analytic".into(),
            fmt_f(rel),
            fmt_f(linf),
        ]);
    }
    let path = csv.finish()?;
    println!("wrote {}", path.display());

    if ctx.plot {
        let points: Vec<(f64, f64)> = grid_m
            .iter()
            .map(|&m| {
                let errs: Vec<f64> =
                    rows.iter().filter(|r| r.0 == m).map(|r| r.2).collect();
                (m as f64, median(&errs))
            })
            .collect();
        let svg = svg_line_chart(
            "analytic decoder recovery error",
            "m",
            "median avg_rel_l2",
            true,
            &[Series { label: format!("L={l}"), points }],
        );
        let p = ctx.out.join("invert_analytic.svg");
        write_file(&p, &svg)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// invert-learn

fn flat_target(variant: DecoderVariant, seq: &NormalizedSequence) -> Array1<f64> {
    let t = seq.tokens();
    match variant {
        DecoderVariant::Full => Array1::from_iter(t.iter().copied()),
        DecoderVariant::TrueSeq => {
            let (l, d) = (seq.l(), seq.d());
            let mut v = Vec::with_capacity((l - 2) * (d - 1));
            for row in 1..l - 1 {
                for col in 0..d - 1 {
                    v.push(t[(row, col)]);
                }
            }
            Array1::from(v)
        }
    }
}

pub fn invert_learn(a: &InvertLearnArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let file = &mut ctx.file;
    let grid_m =
        resolve_list(file, "grid-m", a.grid_m.clone(), &[500, 1000, 2000, 5000, 10000])?;
    let grid_l = resolve_list(file, "L", a.l.clone(), &[2, 4, 6])?;
    let grid_d = resolve_list(file, "d", a.d.clone(), &[2, 4])?;
    let eps_x = resolve(file, "eps-x", a.eps_x, 0.05)?;
    let seeds = resolve(file, "seeds", a.seeds, 3)?;
    let n_train = resolve(file, "n-train", a.n_train, 256)?;
    let n_test = resolve(file, "n-test", a.n_test, 64)?;
    let variant = parse_variant(&resolve(file, "variant", a.variant.clone(), "full".into())?)?;
    let fit = FitConfig {
        epochs: resolve(file, "epochs", a.epochs, 200)?,
        batch: resolve(file, "batch", a.batch, 128)?,
        lr: resolve(file, "lr", a.lr, 0.1)?,
        momentum: resolve(file, "momentum", a.momentum, 0.9)?,
    };
    ctx.check_unused()?;

    let mut config = ConfigLine::new("invert-learn", ctx.seed);
    config.push_list("grid-m", &grid_m);
    config.push_list("L", &grid_l);
    config.push_list("d", &grid_d);
    config.push("eps-x", eps_x);
    config.push("seeds", seeds);
    config.push("n-train", n_train);
    config.push("n-test", n_test);
    config.push("variant", variant_name(variant));
    config.push("epochs", fit.epochs);
    config.push("batch", fit.batch);
    config.push("lr", fit.lr);
    config.push("momentum", fit.momentum);

    let root = core_rng(ctx.seed, "invert-learn")?;
    let mut points = Vec::new();
    for &d in &grid_d {
        for &l in &grid_l {
            for &m in &grid_m {
                for s in 0..seeds {
                    points.push((d, l, m, s));
                }
            }
        }
    }
    let rows = run_grid(ctx.jobs, &points, |&(d, l, m, s)| {
        let point = root
            .split_index(d as u64)
            .split_index(l as u64)
            .split_index(m as u64)
            .split_index(s);
        let params = drawn_params(&point.split("params")?, m, d, 1)?;

        let mut train_rng = point.split("train")?;
        let train = sample_normalized(&mut train_rng, n_train, l, d, eps_x)?;
        let tokens: Vec<Array2<f64>> = train.iter().map(|q| q.tokens().clone()).collect();
        let h_final = forward_batch_final(&params, &tokens)?;
        let out_len = flat_target(variant, &train[0]).len();
        let mut targets = Array2::zeros((n_train, out_len));
        for (i, seq) in train.iter().enumerate() {
            targets.row_mut(i).assign(&flat_target(variant, seq));
        }
        let report = fit_decoder(
            &h_final.view(),
            &targets.view(),
            variant,
            l,
            d,
            eps_x,
            &fit,
            &point.split("fit")?,
        )?;

        let mut test_rng = point.split("test")?;
        let test = sample_normalized(&mut test_rng, n_test, l, d, eps_x)?;
        let test_tokens: Vec<Array2<f64>> = test.iter().map(|q| q.tokens().clone()).collect();
        let h_test = forward_batch_final(&params, &test_tokens)?;
        let pairs: Vec<(Array1<f64>, Array1<f64>)> = test
            .iter()
            .enumerate()
            .map(|(i, seq)| (h_test.column(i).to_owned(), flat_target(variant, seq)))
            .collect();
        let errs = decode_errors(&report.decoder, &pairs)?;
        Ok((d, l, m, s, errs.avg_rel_l2, errs.avg_linf))
    })?;

    let mut csv = CsvFile::create(
        &ctx.out,
        "invert_learn.csv",
        &config,
        "seed,m,L,d,eps_x,variant,provenance,avg_rel_l2,avg_linf",
    );
    for &(d, l, m, s, rel, linf) in &rows {
        csv.row(&[
            s.to_string(),
            m.to_string(),
            l.to_string(),
            d.to_string(),
            fmt_f(eps_x),
            variant_name(variant).into(),
            "fitted".into(),
            fmt_f(rel),
            fmt_f(linf),
        ]);
    }
    let path = csv.finish()?;
    println!("wrote {}", path.display());

    if ctx.plot {
        let mut series = Vec::new();
        for &d in &grid_d {
            for &l in &grid_l {
                let points: Vec<(f64, f64)> = grid_m
                    .iter()
                    .map(|&m| {
                        let errs: Vec<f64> = rows
                            .iter()
                            .filter(|r| r.0 == d && r.1 == l && r.2 == m)
                            .map(|r| r.4)
                            .collect();
                        (m as f64, median(&errs))
                    })
                    .collect();
                let label = if grid_d.len() > 1 { format!("L={l} d={d}") } else { format!("L={l}") };
                series.push(Series { label, points });
            }
        }
        let svg = svg_line_chart(
            "learned decoder recovery error",
            "m",
            "median avg_rel_l2",
            true,
            &series,
        );
        let p = ctx.out.join("invert_learn.svg");
        write_file(&p, &svg)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// lemma-check

pub fn lemma_check(a: &LemmaCheckArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let file = &mut ctx.file;
    let suite = resolve(file, "suite", a.suite.clone(), "all".to_string())?;
    let (run_norm, run_coupling, run_single) = match suite.as_str() {
        "all" => (true, true, true),
        "norm" => (true, false, false),
        "coupling" => (false, true, false),
        "single-layer" => (false, false, true),
        other => {
            return Err(CliError::Config(format!(
                "unknown suite {other:?} (expected all, norm, coupling or single-layer)"
            )))
        }
    };
    // The three suites default to different m grids; an explicit --grid-m (or
    // config key) applies to every suite that runs.
    let grid_override = resolve_list::<usize>(file, "grid-m", a.grid_m.clone(), &[])?;
    let grid_override = if grid_override.is_empty() { None } else { Some(grid_override) };
    let l = resolve(file, "L", a.l, 6)?;
    let d = resolve(file, "d", a.d, 4)?;
    let eps_x = resolve(file, "eps-x", a.eps_x, 0.05)?;
    let seeds_override = resolve(file, "seeds", a.seeds, 0)?;
    let seeds_override = if seeds_override == 0 { None } else { Some(seeds_override) };
    let t = resolve(file, "t", a.t, 1.0)?;
    ctx.check_unused()?;

    let root = core_rng(ctx.seed, "lemma-check")?;

    if run_norm {
        let grid = grid_override.clone().unwrap_or_else(|| vec![2500, 10000]);
        let seeds = seeds_override.unwrap_or(100);
        let mut config = ConfigLine::new("lemma-check", ctx.seed);
        config.push("suite", "norm");
        config.push_list("grid-m", &grid);
        config.push("L", l);
        config.push("d", d);
        config.push("eps-x", eps_x);
        config.push("seeds", seeds);

        let scope = root.split("norm")?;
        let points: Vec<(usize, u64)> =
            grid.iter().flat_map(|&m| (0..seeds).map(move |s| (m, s))).collect();
        let results = run_grid(ctx.jobs, &points, |&(m, s)| {
            let point = scope.split_index(m as u64).split_index(s);
            let params = drawn_params(&point.split("params")?, m, d, 1)?;
            let mut seq_rng = point.split("seq")?;
            let seq = normalize(&sample_true_sequence(&mut seq_rng, l, d)?, eps_x)?;
            let diag = norm_diagnostics(&params, &seq)?;
            Ok((m, s, diag.norm_residuals))
        })?;

        let mut csv = CsvFile::create(
            &ctx.out,
            "lemma_norm.csv",
            &config,
            "seed,m,L,d,eps_x,ell,norm_residual",
        );
        for (m, s, residuals) in &results {
            for &(ell, r) in residuals {
                csv.row(&[
                    s.to_string(),
                    m.to_string(),
                    l.to_string(),
                    d.to_string(),
                    fmt_f(eps_x),
                    ell.to_string(),
                    fmt_f(r),
                ]);
            }
        }
        let path = csv.finish()?;
        println!("wrote {}", path.display());

        if ctx.plot {
            let mut series = Vec::new();
            for ell in 2..=l {
                let points: Vec<(f64, f64)> = grid
                    .iter()
                    .map(|&m| {
                        let vals: Vec<f64> = results
                            .iter()
                            .filter(|r| r.0 == m)
                            .flat_map(|r| {
                                r.2.iter().filter(|x| x.0 == ell).map(|x| x.1)
                            })
                            .collect();
                        (m as f64, median(&vals))
                    })
                    .collect();
                series.push(Series { label: format!("ell={ell}"), points });
            }
            let svg = svg_line_chart(
                "hidden-norm residual",
                "m",
                "median |norm − target|",
                true,
                &series,
            );
            let p = ctx.out.join("lemma_norm.svg");
            write_file(&p, &svg)?;
            println!("wrote {}", p.display());
        }
    }

    if run_coupling {
        let grid = grid_override.clone().unwrap_or_else(|| vec![256, 1024, 4096]);
        let seeds = seeds_override.unwrap_or(10);
        let mut config = ConfigLine::new("lemma-check", ctx.seed);
        config.push("suite", "coupling");
        config.push_list("grid-m", &grid);
        config.push("L", l);
        config.push("d", d);
        config.push("eps-x", eps_x);
        config.push("seeds", seeds);
        config.push("t", t);

        let scope = root.split("coupling")?;
        let points: Vec<(usize, u64)> =
            grid.iter().flat_map(|&m| (0..seeds).map(move |s| (m, s))).collect();
        let results = run_grid(ctx.jobs, &points, |&(m, s)| {
            let point = scope.split_index(m as u64).split_index(s);
            let params =
                init_params(&point.split("params")?, m, d, 1, BVarianceMode::OneOverDout)?;
            let mut seq_rng = point.split("seq")?;
            let seq = normalize(&sample_true_sequence(&mut seq_rng, l, d)?, eps_x)?;
            // Unit-Frobenius perturbation directions: the residual is then a
            // function of the scale t alone, comparable across m.
            let mut wp = gaussian_matrix(&point.split("wp")?, m, m, 1.0)?;
            let nw = frob_norm(&wp.view());
            wp.mapv_inplace(|v| v / nw);
            let mut ap = gaussian_matrix(&point.split("ap")?, m, d, 1.0)?;
            let na = frob_norm(&ap.view());
            ap.mapv_inplace(|v| v / na);
            let r = coupling_residual(&params, &seq, &wp, &ap, t)?;
            Ok((m, s, r))
        })?;

        let mut csv = CsvFile::create(
            &ctx.out,
            "lemma_coupling.csv",
            &config,
            "seed,m,L,d,eps_x,t,coupling_residual",
        );
        for &(m, s, r) in &results {
            csv.row(&[
                s.to_string(),
                m.to_string(),
                l.to_string(),
                d.to_string(),
                fmt_f(eps_x),
                fmt_f(t),
                fmt_f(r),
            ]);
        }
        let path = csv.finish()?;
        println!("wrote {}", path.display());

        if ctx.plot {
            let points: Vec<(f64, f64)> = grid
                .iter()
                .map(|&m| {
                    let vals: Vec<f64> =
                        results.iter().filter(|r| r.0 == m).map(|r| r.2).collect();
                    (m as f64, median(&vals))
                })
                .collect();
            let svg = svg_line_chart(
                "first-order coupling residual",
                "m",
                "median residual",
                true,
                &[Series { label: format!("L={l}"), points }],
            );
            let p = ctx.out.join("lemma_coupling.svg");
            write_file(&p, &svg)?;
            println!("wrote {}", p.display());
        }
    }

    if run_single {
        let grid = grid_override.clone().unwrap_or_else(|| vec![1024, 4096, 16384]);
        let seeds = seeds_override.unwrap_or(200);
        let mut config = ConfigLine::new("lemma-check", ctx.seed);
        config.push("suite", "single-layer");
        config.push_list("grid-m", &grid);
        config.push("d", d);
        config.push("seeds", seeds);

        let scope = root.split("single-layer")?;
        let points: Vec<(usize, u64)> =
            grid.iter().flat_map(|&m| (0..seeds).map(move |s| (m, s))).collect();
        let results = run_grid(ctx.jobs, &points, |&(m, s)| {
            let point = scope.split_index(m as u64).split_index(s);
            let beta = (2.0 / m as f64).sqrt();
            let tmat = gaussian_matrix(&point.split("T")?, m, d, beta)?;
            let mut vx = point.split("vx")?;
            let mut v = gaussian_vector(&mut vx, d, 1.0)?;
            let nv = v.dot(&v).sqrt();
            v.mapv_inplace(|q| q / nv);
            let mut x = gaussian_vector(&mut vx, d, 1.0)?;
            let nx = x.dot(&x).sqrt();
            x.mapv_inplace(|q| q / nx);
            let f = single_layer_invert(&tmat.view(), beta, &v.view(), &x.view())?;
            let err = (f - v.dot(&x)).abs();
            let bound = 5.0 / (m as f64).sqrt();
            Ok((m, s, err, bound))
        })?;

        let mut csv = CsvFile::create(
            &ctx.out,
            "lemma_single_layer.csv",
            &config,
            "seed,m,d,abs_err,bound",
        );
        for &(m, s, err, bound) in &results {
            csv.row(&[
                s.to_string(),
                m.to_string(),
                d.to_string(),
                fmt_f(err),
                fmt_f(bound),
            ]);
        }
        let path = csv.finish()?;
        println!("wrote {}", path.display());

        if ctx.plot {
            let med = |pick: fn(&(usize, u64, f64, f64)) -> f64| -> Vec<(f64, f64)> {
                grid.iter()
                    .map(|&m| {
                        let vals: Vec<f64> =
                            results.iter().filter(|r| r.0 == m).map(pick).collect();
                        (m as f64, median(&vals))
                    })
                    .collect()
            };
            let svg = svg_line_chart(
                "single-layer inversion error",
                "m",
                "median",
                true,
                &[
                    Series { label: "abs_err".into(), points: med(|r| r.2) },
                    Series { label: "bound".into(), points: med(|r| r.3) },
                ],
            );
            let p = ctx.out.join("lemma_single_layer.svg");
            write_file(&p, &svg)?;
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// complexity

pub fn complexity(a: &ComplexityArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let file = &mut ctx.file;
    let default_presets: Vec<String> = [
        "monomial:1",
        "monomial:2",
        "sin",
        "cos",
        "exp",
        "quadratic_2z_minus_z2",
        "cos_pi",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let presets = resolve_list(file, "preset", a.preset.clone(), &default_presets)?;
    let r = resolve(file, "R", a.r, 1.0)?;
    let eps = resolve(file, "eps", a.eps, (-2.0f64).exp())?;
    ctx.check_unused()?;

    let mut config = ConfigLine::new("complexity", ctx.seed);
    config.push_list("preset", &presets);
    config.push("R", r);
    config.push("eps", eps);

    let mut csv = CsvFile::create(&ctx.out, "complexity.csv", &config, "name,R,eps,c_s,c_eps,tail_bound");
    for name in &presets {
        let series = taylor_preset(&parse_preset(name)?);
        let report = complexity_report(&series, r, eps)?;
        csv.row(&[report.to_csv_row()]);
        println!(
            "{}: C_s = {}, C_eps = {}",
            report.name, report.c_s, report.c_eps
        );
    }
    let path = csv.finish()?;
    println!("wrote {}", path.display());
    if ctx.plot {
        eprintln!("plot: complexity has no m-axis, skipping chart");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// concept-verify

fn concept_language(name: &str) -> Result<(LanguageConceptKind, LanguageSpec), CliError> {
    if name == "dl1" {
        return Ok((LanguageConceptKind::Dl1, dl1_spec()));
    }
    if name == "parity" {
        return Ok((LanguageConceptKind::Parity, language_spec("parity")?));
    }
    if let Some(pattern) = name.strip_prefix("substring:") {
        return Ok((
            LanguageConceptKind::Substring { pattern: pattern.to_string() },
            substring_spec(pattern)?,
        ));
    }
    Err(CliError::Config(format!(
        "unknown concept language {name:?} (expected dl1, parity or substring:<bits>)"
    )))
}

pub fn concept_verify(a: &ConceptVerifyArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let file = &mut ctx.file;
    let default_langs: Vec<String> =
        ["dl1", "parity", "substring:0110"].iter().map(|s| s.to_string()).collect();
    let languages = resolve_list(file, "languages", a.languages.clone(), &default_langs)?;
    let max_len = resolve(file, "max-len", a.max_len, 12)?;
    ctx.check_unused()?;

    let mut config = ConfigLine::new("concept-verify", ctx.seed);
    config.push_list("languages", &languages);
    config.push("max-len", max_len);

    let mut csv =
        CsvFile::create(&ctx.out, "concept_verify.csv", &config, "language,L,mismatches,strings");
    let mut total_mismatches = 0usize;
    for name in &languages {
        let (kind, spec) = concept_language(name)?;
        let min_l = match &kind {
            LanguageConceptKind::Substring { pattern } => pattern.len().max(1),
            _ => 1,
        };
        for l in min_l..=max_len {
            let concept = build_language_concept(kind.clone(), l)?;
            let mut mismatches = 0usize;
            let mut bits = vec![b'0'; l];
            for word in 0u64..(1u64 << l) {
                for (i, b) in bits.iter_mut().enumerate() {
                    *b = if word >> i & 1 == 1 { b'1' } else { b'0' };
                }
                let s = std::str::from_utf8(&bits).expect("binary string");
                let by_concept = language_concept_accepts(&concept, s)?;
                let by_recognizer = membership(&spec, s)?;
                if by_concept != by_recognizer {
                    mismatches += 1;
                }
            }
            total_mismatches += mismatches;
            csv.row(&[
                name.clone(),
                l.to_string(),
                mismatches.to_string(),
                (1u64 << l).to_string(),
            ]);
        }
    }
    let path = csv.finish()?;
    println!("wrote {}", path.display());
    if ctx.plot {
        eprintln!("plot: concept-verify has no m-axis, skipping chart");
    }
    if total_mismatches > 0 {
        return Err(CliError::Numeric(format!(
            "concept acceptors disagree with recognizers on {total_mismatches} strings"
        )));
    }
    println!("all concept acceptors match their recognizers up to length {max_len}");
    Ok(())
}

// ---------------------------------------------------------------------------
// additive-impossibility

pub fn additive_impossibility(
    a: &AdditiveImpossibilityArgs,
    ctx: &mut Ctx,
) -> Result<(), CliError> {
    let file = &mut ctx.file;
    let default_l: Vec<usize> = (2..=12).collect();
    let l_list = resolve_list(file, "L", a.l.clone(), &default_l)?;
    ctx.check_unused()?;

    let mut config = ConfigLine::new("additive-impossibility", ctx.seed);
    config.push_list("L", &l_list);

    let mut csv = CsvFile::create(
        &ctx.out,
        "additive_impossibility.csv",
        &config,
        "language,L,min_error,infeasible_blocks",
    );
    for &l in &l_list {
        let mut blocks = 0usize;
        for q in 0..=l.saturating_sub(2) {
            let cert = dl1_block_infeasible(q, l)?;
            if cert.rank_augmented == cert.rank_coeffs + 1 {
                blocks += 1;
            } else {
                return Err(CliError::Numeric(format!(
                    "block (q={q}, L={l}) unexpectedly consistent"
                )));
            }
        }
        let min_error = additive_min_error(l)?;
        csv.row(&["dl1".into(), l.to_string(), fmt_f(min_error), blocks.to_string()]);
        println!("L={l}: {blocks} infeasible blocks, min_error {min_error}");
    }
    let path = csv.finish()?;
    println!("wrote {}", path.display());
    if ctx.plot {
        eprintln!("plot: additive-impossibility has no m-axis, skipping chart");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// lang-train

struct LangPlan {
    name: String,
    n_train: usize,
    n_test: usize,
    train_range: (usize, usize),
    test_range: (usize, usize),
}

/// Desk-scale dataset defaults per language; the short-string training split
/// for PARITY is deliberate (the learned flip dynamics are length-invariant,
/// and length-50 training never escapes chance at this width).
fn lang_plan(name: &str) -> LangPlan {
    let (n_train, n_test, train_range) = match name {
        "tomita1" => (50, 100, (2, 50)),
        "tomita2" => (200, 100, (2, 50)),
        "tomita4" => (1000, 1000, (2, 50)),
        "parity" => (400, 1000, (2, 8)),
        _ => (1000, 500, (2, 50)),
    };
    LangPlan { name: name.to_string(), n_train, n_test, train_range, test_range: (2, 50) }
}

fn build_dataset(
    plan: &LangPlan,
    rng: &mut RngStream,
) -> Result<seqlab_core::languages::LabeledDataset, CliError> {
    let spec = language_spec(&plan.name)?;
    if plan.train_range == plan.test_range {
        Ok(generate_dataset(&spec, plan.n_train, plan.n_test, plan.train_range, rng)?)
    } else {
        let mut ds = generate_dataset(&spec, plan.n_train, 1, plan.train_range, rng)?;
        ds.test = generate_dataset(&spec, 1, plan.n_test, plan.test_range, rng)?.test;
        Ok(ds)
    }
}

pub fn lang_train(a: &LangTrainArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let file = &mut ctx.file;
    let default_langs: Vec<String> =
        ["tomita1", "tomita2", "tomita4", "parity"].iter().map(|s| s.to_string()).collect();
    let languages = resolve_list(file, "languages", a.languages.clone(), &default_langs)?;
    let m = resolve(file, "m", a.m, 32)?;
    let lr = resolve(file, "lr", a.lr, 1e-2)?;
    let epochs = resolve(file, "epochs", a.epochs, 100)?;
    let batch = resolve(file, "batch", a.batch, 32)?;
    let seeds = resolve(file, "seeds", a.seeds, 3)?;
    let lambda = resolve(file, "lambda", a.lambda, 1.0)?;
    let activation = match resolve(file, "activation", a.activation.clone(), "tanh".into())?.as_str()
    {
        "tanh" => Activation::Tanh,
        "relu" => Activation::Relu,
        other => {
            return Err(CliError::Config(format!(
                "unknown activation {other:?} (expected tanh or relu)"
            )))
        }
    };
    let optimizer = match resolve(file, "optimizer", a.optimizer.clone(), "rmsprop".into())?
        .as_str()
    {
        "rmsprop" => OptimizerKind::RmsProp {
            lr,
            alpha: resolve(file, "alpha", a.alpha, 0.99)?,
            eps: resolve(file, "rms-eps", a.rms_eps, 1e-8)?,
        },
        "sgd" => OptimizerKind::Sgd { lr, momentum: resolve(file, "momentum", a.momentum, 0.9)? },
        other => {
            return Err(CliError::Config(format!(
                "unknown optimizer {other:?} (expected rmsprop or sgd)"
            )))
        }
    };
    let train_readout = resolve(file, "train-readout", a.train_readout, true)?;
    let n_train = resolve(file, "n-train", a.n_train, 0)?;
    let n_test = resolve(file, "n-test", a.n_test, 0)?;
    let train_range = resolve_list::<usize>(file, "train-range", a.train_range.clone(), &[])?;
    let test_range = resolve_list::<usize>(file, "test-range", a.test_range.clone(), &[])?;
    let parse_range = |key: &str, v: &[usize]| -> Result<Option<(usize, usize)>, CliError> {
        match v {
            [] => Ok(None),
            [lo, hi] => Ok(Some((*lo, *hi))),
            _ => Err(CliError::Config(format!("{key} takes exactly two values: lo,hi"))),
        }
    };
    let train_range = parse_range("train-range", &train_range)?;
    let test_range = parse_range("test-range", &test_range)?;
    ctx.check_unused()?;

    let activation_name = match activation {
        Activation::Tanh => "tanh",
        Activation::Relu => "relu",
    };
    let mut config = ConfigLine::new("lang-train", ctx.seed);
    config.push_list("languages", &languages);
    config.push("m", m);
    config.push("lr", lr);
    config.push("epochs", epochs);
    config.push("batch", batch);
    config.push("seeds", seeds);
    config.push("lambda", lambda);
    config.push("activation", activation_name);
    config.push(
        "optimizer",
        match optimizer {
            OptimizerKind::RmsProp { .. } => "rmsprop",
            OptimizerKind::Sgd { .. } => "sgd",
        },
    );
    config.push("train-readout", train_readout);

    let root = core_rng(ctx.seed, "lang-train")?;
    type LangResult = (String, u64, TrainReport);
    let points: Vec<(String, u64)> = languages
        .iter()
        .flat_map(|name| (1..=seeds).map(move |s| (name.clone(), s)))
        .collect();
    let runs: Vec<LangResult> = run_grid(ctx.jobs, &points, |(name, s)| {
        let mut plan = lang_plan(name);
        if n_train > 0 {
            plan.n_train = n_train;
        }
        if n_test > 0 {
            plan.n_test = n_test;
        }
        if let Some(r) = train_range {
            plan.train_range = r;
        }
        if let Some(r) = test_range {
            plan.test_range = r;
        }
        let mut stream = root.split(name)?.split_index(*s);
        let train_seed = stream.next_u64();
        let dataset = build_dataset(&plan, &mut stream)?;
        let cfg = TrainConfig {
            optimizer,
            batch,
            epochs,
            lambda_scale: lambda,
            loss: LossKind::Logistic,
            activation,
            train_readout,
            seed: train_seed,
        };
        let report = train_classifier(&dataset, m, &cfg)?;
        Ok((name.clone(), *s, report))
    })?;

    let mut csv = CsvFile::create(
        &ctx.out,
        "lang_train.csv",
        &config,
        "language,activation,m,lr,epoch,train_loss,train_acc,test_acc,w_disp,a_disp",
    );
    let mut best_points = Vec::new();
    for name in &languages {
        let best = runs
            .iter()
            .filter(|(n, _, _)| n == name)
            .max_by(|x, y| x.2.test_accuracy.partial_cmp(&y.2.test_accuracy).unwrap())
            .expect("at least one run per language");
        csv.comment(&format!(
            "language={name} best_seed={} test_accuracy={}",
            best.1, best.2.test_accuracy
        ));
        let last = best.2.epochs.len();
        for e in &best.2.epochs {
            let test_field =
                if e.epoch == last { fmt_f(best.2.test_accuracy) } else { String::new() };
            csv.row(&[
                name.clone(),
                activation_name.into(),
                m.to_string(),
                fmt_f(lr),
                e.epoch.to_string(),
                fmt_f(e.train_loss),
                fmt_f(e.train_accuracy),
                test_field,
                fmt_f(e.w_disp),
                fmt_f(e.a_disp),
            ]);
        }
        println!(
            "{name}: best-of-{seeds} test accuracy {} (seed {})",
            best.2.test_accuracy, best.1
        );
        best_points.push(Series {
            label: name.clone(),
            points: best
                .2
                .epochs
                .iter()
                .map(|e| (e.epoch as f64, e.train_accuracy))
                .collect(),
        });
    }
    let path = csv.finish()?;
    println!("wrote {}", path.display());

    if ctx.plot {
        let svg = svg_line_chart(
            "training accuracy by epoch",
            "epoch",
            "train accuracy",
            false,
            &best_points,
        );
        let p = ctx.out.join("lang_train.svg");
        write_file(&p, &svg)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// existence-check

pub fn existence_check(a: &ExistenceCheckArgs, ctx: &mut Ctx) -> Result<(), CliError> {
    let file = &mut ctx.file;
    let grid_m = resolve_list(file, "grid-m", a.grid_m.clone(), &[2048, 8192])?;
    let p = resolve(file, "p", a.p, 2)?;
    let l = resolve(file, "L", a.l, 5)?;
    let d = resolve(file, "d", a.d, 4)?;
    let d_out = resolve(file, "d-out", a.d_out, 2)?;
    let eps_x = resolve(file, "eps-x", a.eps_x, 0.05)?;
    let n_seq = resolve(file, "n-seq", a.n_seq, 200)?;
    let n_mc = resolve(file, "n-mc", a.n_mc, 20000)?;
    let k_deg = resolve(file, "k-deg", a.k_deg, 8)?;
    let ridge = resolve(file, "ridge", a.ridge, 0.01)?;
    let phi_name = resolve(file, "phi", a.phi.clone(), "quadratic_2z_minus_z2".into())?;
    let seeds = resolve(file, "seeds", a.seeds, 3)?;
    let force_streamed = resolve_flag(file, "streamed", a.streamed, false)?;
    ctx.check_unused()?;

    let phi = taylor_preset(&parse_preset(&phi_name)?);
    let mut config = ConfigLine::new("existence-check", ctx.seed);
    config.push_list("grid-m", &grid_m);
    config.push("p", p);
    config.push("L", l);
    config.push("d", d);
    config.push("d-out", d_out);
    config.push("eps-x", eps_x);
    config.push("n-seq", n_seq);
    config.push("n-mc", n_mc);
    config.push("k-deg", k_deg);
    config.push("ridge", ridge);
    config.push("phi", &phi_name);
    config.push("seeds", seeds);

    let root = core_rng(ctx.seed, "existence-check")?;
    let points: Vec<(usize, u64)> =
        grid_m.iter().flat_map(|&m| (1..=seeds).map(move |s| (m, s))).collect();
    let rows = run_grid(ctx.jobs, &points, |&(m, s)| {
        let cfg = ExistenceConfig {
            m,
            d,
            d_out,
            l,
            eps_x,
            p,
            n_seq,
            n_mc,
            k_deg,
            ridge,
            streamed: force_streamed || m >= 16384,
            b_mode: BVarianceMode::OneOverDout,
            phi: phi.clone(),
        };
        let run = run_existence(&cfg, &root.split_index(m as u64).split_index(s))?;
        Ok((m, s, run.stats.mean_abs_err, run.stats.correlation))
    })?;

    let mut csv = CsvFile::create(
        &ctx.out,
        "existence_check.csv",
        &config,
        "m,p,L,d,eps_x,mean_abs_err,correlation,seed",
    );
    for &(m, s, mae, corr) in &rows {
        csv.row(&[
            m.to_string(),
            p.to_string(),
            l.to_string(),
            d.to_string(),
            fmt_f(eps_x),
            fmt_f(mae),
            fmt_f(corr),
            s.to_string(),
        ]);
    }
    let path = csv.finish()?;
    println!("wrote {}", path.display());
    for &m in &grid_m {
        let maes: Vec<f64> = rows.iter().filter(|r| r.0 == m).map(|r| r.2).collect();
        let corrs: Vec<f64> = rows.iter().filter(|r| r.0 == m).map(|r| r.3).collect();
        println!("m={m}: median mean_abs_err {}, median correlation {}", median(&maes), median(&corrs));
    }

    if ctx.plot {
        let points: Vec<(f64, f64)> = grid_m
            .iter()
            .map(|&m| {
                let maes: Vec<f64> = rows.iter().filter(|r| r.0 == m).map(|r| r.2).collect();
                (m as f64, median(&maes))
            })
            .collect();
        let svg = svg_line_chart(
            "pseudo-network vs concept disagreement",
            "m",
            "median mean_abs_err",
            true,
            &[Series { label: format!("L={l}"), points }],
        );
        let p = ctx.out.join("existence_check.svg");
        write_file(&p, &svg)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

