//! Experiment orchestration: expands a validated configuration into CSV and
//! JSON artifacts.
//!
//! All CSV bodies are built in memory first and written only when the whole
//! experiment has succeeded, so a failure never leaves partial outputs. The
//! bodies are deterministic functions of the configuration; wall-clock data
//! is confined to the manifest.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::asymptotics::{model_a_h0, model_a_h1, model_b, model_c, GaussianApprox, H0Model};
use crate::config::{ExperimentConfig, ExperimentTag, ModelTag, RunDims};
use crate::error::{Error, Result};
use crate::matkernel::{ComplexMatrix, HermitianMatrix};
use crate::montecarlo::{
    empirical_roc, hybrid_roc, run_trials, summarize, theoretical_roc, validate_mp_properties,
    validate_trace_lemma, RocCurve, TrialBatch,
};
use crate::signal::{
    build_training_matrix, generate_channel, stream_rng, Channel, DetectionProblem, Hypothesis,
};

/// A named output file with its full contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

const MOMENTS_HEADER: &str =
    "M,N,L,c_N,d_N,hypothesis,model,mean_theory,var_theory,mean_emp,var_emp,se_mean,se_var";
const ROC_HEADER: &str = "pfa,pnd,method,model";

struct RunContext {
    problem: DetectionProblem,
    channel: Channel,
    h0: TrialBatch,
    h1: TrialBatch,
}

/// Draws the fixed channel and runs the H0/H1 batches for one sweep point.
/// The same master seed drives both hypotheses, so the noise realizations
/// are shared and mean/variance differences are estimated with common
/// random numbers.
fn run_point(config: &ExperimentConfig, dims: RunDims) -> Result<RunContext> {
    let problem = DetectionProblem::new(dims.m, dims.n, dims.l, config.sigma2)?;
    let training = build_training_matrix(dims.n, dims.l, config.zc_root)?;
    let channel = generate_channel(dims.m, dims.l, &mut stream_rng(config.channel_seed, 0));
    let h0 = run_trials(
        &problem,
        Hypothesis::H0,
        None,
        &training,
        config.trials,
        config.master_seed,
    )?;
    let h1 = run_trials(
        &problem,
        Hypothesis::H1,
        Some(&channel),
        &training,
        config.trials,
        config.master_seed,
    )?;
    Ok(RunContext {
        problem,
        channel,
        h0,
        h1,
    })
}

fn theory_cell(
    model: ModelTag,
    problem: &DetectionProblem,
    hypothesis: Hypothesis,
    channel: &Channel,
) -> Result<(f64, f64)> {
    let ch = match hypothesis {
        Hypothesis::H0 => None,
        Hypothesis::H1 => Some(channel),
    };
    Ok(match model {
        ModelTag::A => match hypothesis {
            Hypothesis::H0 => {
                let a = model_a_h0(problem);
                (a.mean(), a.variance())
            }
            Hypothesis::H1 => {
                let g = model_a_h1(problem, channel)?;
                (g.mean, g.variance)
            }
        },
        ModelTag::B => {
            let g = model_b(problem, hypothesis, ch)?;
            (g.mean, g.variance)
        }
        ModelTag::C => {
            let g = model_c(problem, hypothesis, ch)?;
            (g.mean, g.variance)
        }
    })
}

fn h0_threshold_model(model: ModelTag, problem: &DetectionProblem) -> Result<H0Model> {
    Ok(match model {
        ModelTag::A => H0Model::ChiSquared(model_a_h0(problem)),
        ModelTag::B => H0Model::Gaussian(model_b(problem, Hypothesis::H0, None)?),
        ModelTag::C => H0Model::Gaussian(model_c(problem, Hypothesis::H0, None)?),
    })
}

fn h1_gaussian(model: ModelTag, problem: &DetectionProblem, channel: &Channel) -> Result<GaussianApprox> {
    match model {
        ModelTag::A => model_a_h1(problem, channel),
        ModelTag::B => model_b(problem, Hypothesis::H1, Some(channel)),
        ModelTag::C => model_c(problem, Hypothesis::H1, Some(channel)),
    }
}

fn push_roc_rows(body: &mut String, curve: &RocCurve, model: &str) {
    for p in &curve.points {
        body.push_str(&format!(
            "{},{},{},{}\n",
            p.pfa,
            p.pnd,
            curve.method.label(),
            model
        ));
    }
}

fn moments_artifact(config: &ExperimentConfig) -> Result<Artifact> {
    let mut body = String::from(MOMENTS_HEADER);
    body.push('\n');
    for &dims in &config.runs {
        let ctx = run_point(config, dims)?;
        let s0 = summarize(&ctx.h0)?;
        let s1 = summarize(&ctx.h1)?;
        for (hyp, summary) in [(Hypothesis::H0, s0), (Hypothesis::H1, s1)] {
            for &model in &config.models {
                let (mean_theory, var_theory) =
                    theory_cell(model, &ctx.problem, hyp, &ctx.channel)?;
                body.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    dims.m,
                    dims.n,
                    dims.l,
                    ctx.problem.c_n(),
                    ctx.problem.d_n(),
                    hyp.label(),
                    model.label(),
                    mean_theory,
                    var_theory,
                    summary.mean,
                    summary.variance,
                    summary.standard_error_mean,
                    summary.standard_error_variance,
                ));
            }
        }
    }
    Ok(Artifact {
        name: "moments.csv".into(),
        contents: body,
    })
}

fn run_prefix(config: &ExperimentConfig, idx: usize, dims: RunDims) -> String {
    if config.runs.len() == 1 {
        String::new()
    } else {
        format!("run{:02}_M{}_N{}_L{}/", idx, dims.m, dims.n, dims.l)
    }
}

fn roc_artifacts(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let mut artifacts = Vec::new();
    for (idx, &dims) in config.runs.iter().enumerate() {
        let prefix = run_prefix(config, idx, dims);
        let theoretical_only = config.experiment == ExperimentTag::RocTheoretical;

        let problem;
        let channel;
        let batches = if theoretical_only {
            problem = DetectionProblem::new(dims.m, dims.n, dims.l, config.sigma2)?;
            channel =
                generate_channel(dims.m, dims.l, &mut stream_rng(config.channel_seed, 0));
            None
        } else {
            let ctx = run_point(config, dims)?;
            problem = ctx.problem;
            channel = ctx.channel;
            Some((ctx.h0, ctx.h1))
        };

        if let Some((h0, h1)) = &batches {
            let mut body = String::from(ROC_HEADER);
            body.push('\n');
            push_roc_rows(&mut body, &empirical_roc(h0, h1, &config.pfa_grid)?, "-");
            artifacts.push(Artifact {
                name: format!("{prefix}roc_empirical.csv"),
                contents: body,
            });

            let mut body = String::from(ROC_HEADER);
            body.push('\n');
            for &model in &config.models {
                let threshold = h0_threshold_model(model, &problem)?;
                let curve = hybrid_roc(&threshold, h1, &config.pfa_grid)?;
                push_roc_rows(&mut body, &curve, model.label());
            }
            artifacts.push(Artifact {
                name: format!("{prefix}roc_hybrid.csv"),
                contents: body,
            });
        }

        let mut body = String::from(ROC_HEADER);
        body.push('\n');
        for &model in &config.models {
            let threshold = h0_threshold_model(model, &problem)?;
            let h1_model = h1_gaussian(model, &problem, &channel)?;
            let curve = theoretical_roc(&threshold, &h1_model, &config.pfa_grid)?;
            push_roc_rows(&mut body, &curve, model.label());
        }
        artifacts.push(Artifact {
            name: format!("{prefix}roc_theoretical.csv"),
            contents: body,
        });
    }
    Ok(artifacts)
}

fn mp_artifact(config: &ExperimentConfig) -> Result<Artifact> {
    let dims = config.runs[0];
    let report = validate_mp_properties(
        dims.m,
        dims.n,
        config.sigma2,
        config.trials,
        config.master_seed,
    )?;
    let mut body = String::from("quantity,empirical,theory\n");
    body.push_str(&format!(
        "min_eigenvalue,{},{}\n",
        report.min_eig_mean, report.edge_lower
    ));
    body.push_str(&format!(
        "max_eigenvalue,{},{}\n",
        report.max_eig_mean, report.edge_upper
    ));
    body.push_str(&format!(
        "trace_inverse,{},{}\n",
        report.trace_inv_mean, report.trace_inv_theory
    ));
    body.push_str(&format!(
        "trace_inverse_squared,{},{}\n",
        report.trace_inv_sq_mean, report.trace_inv_sq_theory
    ));
    body.push_str(&format!(
        "quad_form_re,{},{}\n",
        report.quad_form_mean.re, report.quad_form_theory.re
    ));
    body.push_str(&format!(
        "quad_form_im,{},{}\n",
        report.quad_form_mean.im, report.quad_form_theory.im
    ));
    Ok(Artifact {
        name: "mp_report.csv".into(),
        contents: body,
    })
}

fn trace_lemma_artifact(config: &ExperimentConfig) -> Result<Artifact> {
    let dims = config.runs[0];
    // Canonical validation functional: A = I_M, B = 0, D = I_L.
    let report = validate_trace_lemma(
        dims.m,
        dims.n,
        dims.l,
        config.sigma2,
        &HermitianMatrix::identity(dims.m),
        &ComplexMatrix::zeros(dims.m, dims.l),
        &HermitianMatrix::identity(dims.l),
        config.trials,
        config.master_seed,
    )?;
    let mut body = String::from("quantity,empirical,theory,stderr\n");
    body.push_str(&format!(
        "mean,{},{},{}\n",
        report.mean_emp, report.mean_theory, report.se_mean
    ));
    body.push_str(&format!(
        "variance,{},{},{}\n",
        report.var_emp, report.var_theory, report.se_var
    ));
    Ok(Artifact {
        name: "trace_lemma.csv".into(),
        contents: body,
    })
}

/// Builds every CSV artifact for the configured experiment, in memory.
/// Deterministic: byte-identical across reruns and thread counts.
pub fn build_artifacts(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    match config.experiment {
        ExperimentTag::MomentsVsC | ExperimentTag::MomentsVsL => {
            Ok(vec![moments_artifact(config)?])
        }
        ExperimentTag::RocHybrid
        | ExperimentTag::RocTheoretical
        | ExperimentTag::RocGrowingLmn => roc_artifacts(config),
        ExperimentTag::MpValidation => Ok(vec![mp_artifact(config)?]),
        ExperimentTag::TraceLemma => Ok(vec![trace_lemma_artifact(config)?]),
    }
}

fn manifest_json(config: &ExperimentConfig, started_at: f64, elapsed_s: f64) -> String {
    let value = serde_json::json!({
        "config": config,
        "master_seed": config.master_seed,
        "channel_seed": config.channel_seed,
        "version": env!("CARGO_PKG_VERSION"),
        "started_at": started_at,
        "elapsed_s": elapsed_s,
    });
    serde_json::to_string_pretty(&value).expect("manifest serialization cannot fail")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Runs the experiment and writes its artifacts plus `manifest.json` into
/// `out_dir`. On failure nothing is written.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let started_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let artifacts = build_artifacts(config)?;
    let manifest = manifest_json(config, started_at, clock.elapsed().as_secs_f64());

    let mut written = Vec::new();
    let mut write_all = || -> Result<()> {
        for artifact in &artifacts {
            let path = out_dir.join(&artifact.name);
            write_file(&path, &artifact.contents)?;
            written.push(path);
        }
        let manifest_path = out_dir.join("manifest.json");
        write_file(&manifest_path, &manifest)?;
        written.push(manifest_path);
        Ok(())
    };
    if let Err(e) = write_all() {
        for path in &written {
            let _ = std::fs::remove_file(path);
        }
        return Err(e);
    }
    Ok(written)
}

/// Recomputes every CSV artifact from the configuration and diffs it against
/// the files in `out_dir`. Byte-identical bodies are required; the manifest
/// is excluded (it carries timestamps).
pub fn verify(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let artifacts = build_artifacts(config)?;
    let mut mismatches = Vec::new();
    for artifact in &artifacts {
        let path = out_dir.join(&artifact.name);
        match std::fs::read_to_string(&path) {
            Ok(found) if found == artifact.contents => {}
            Ok(_) => mismatches.push(format!("{}: contents differ", artifact.name)),
            Err(e) => mismatches.push(format!("{}: {e}", artifact.name)),
        }
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "verification failed: {}",
            mismatches.join("; ")
        )))
    }
}
