//! Command-line harness.
//!
//! Subcommands: `coeff`, `kl`, `evidence`, `curve`, `select`, `check-props`.
//! Exit codes: 0 success, 1 invalid input, 2 infeasible exact computation,
//! 3 internal numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use singlearn::coefficients::theorem1_mu;
use singlearn::divergence::{empirical_kl, kl_full, sample_near_truth};
use singlearn::evidence::{
    log_evidence_exact, log_evidence_mc, stochastic_complexity, EmOptions, EvidenceMethod, Prior,
};
use singlearn::experiment::{
    run_curve, run_props, run_select, CurveConfig, SelectCandidate, SelectConfig,
};
use singlearn::io::{
    parse_dataset_csv, parse_f64, parse_learner_spec, parse_truth, parse_u64, parse_usize,
    parse_usize_list, render_curve_csv, render_select_csv, KeyValues,
};
use singlearn::model::{NetworkSpec, TrueModel};
use singlearn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "singlearn",
    version,
    about = "Evidence and learning-coefficient experiments for latent-node Bayesian networks"
)]
struct Cli {
    /// Master seed for every randomized computation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path: the CSV artifact for `curve`/`select`, a copy of the
    /// summary lines for the other subcommands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the learning-coefficient bound and the BIC coefficient for a
    /// (truth, learner) pair.
    Coeff {
        /// Truth file (H, S, M, Y, a.*, b.*).
        #[arg(long)]
        truth: PathBuf,
        /// Learner shape file (K, T, M, Y).
        #[arg(long)]
        spec: PathBuf,
    },
    /// Kullback information from a truth to a parameterized model, or to a
    /// point sampled near the embedded truth.
    Kl {
        #[arg(long)]
        truth: PathBuf,
        /// Parameterized model file (truth format) to evaluate against.
        #[arg(long, conflicts_with_all = ["spec", "near_eps"])]
        model: Option<PathBuf>,
        /// Learner shape file; used with --near-eps.
        #[arg(long, requires = "near_eps")]
        spec: Option<PathBuf>,
        /// Sample a parameter point within this radius of the embedded truth.
        #[arg(long, requires = "spec")]
        near_eps: Option<f64>,
        /// Dataset CSV; adds the empirical divergence (only with --model).
        #[arg(long, requires = "model")]
        data: Option<PathBuf>,
    },
    /// Log evidence, empirical entropy, and stochastic complexity of a dataset.
    Evidence {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        prior_alpha: f64,
        #[arg(long, default_value = "exact", value_parser = parse_method)]
        method: EvidenceMethod,
        #[arg(long, default_value_t = 100_000)]
        mc_draws: usize,
    },
    /// Learning curve: mean stochastic complexity over an n-grid, CSV output,
    /// and the fitted log-n slope next to mu and d/2.
    Curve {
        /// Config file with the same keys as the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Comma-separated sample sizes, strictly increasing.
        #[arg(long)]
        ns: Option<String>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, value_parser = parse_method)]
        method: Option<EvidenceMethod>,
        #[arg(long)]
        mc_draws: Option<usize>,
        #[arg(long)]
        prior_alpha: Option<f64>,
    },
    /// Model selection: exact evidence (gold standard) against the BIC and
    /// singular-coefficient penalties on EM likelihoods.
    Select {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Comma-separated learner shape files.
        #[arg(long)]
        candidates: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, value_parser = parse_method)]
        method: Option<EvidenceMethod>,
        #[arg(long)]
        mc_draws: Option<usize>,
        #[arg(long)]
        prior_alpha: Option<f64>,
        #[arg(long)]
        em_restarts: Option<usize>,
    },
    /// Run the proposition checks and print one margin line per check.
    CheckProps,
}

fn parse_method(s: &str) -> std::result::Result<EvidenceMethod, String> {
    match s {
        "exact" => Ok(EvidenceMethod::Exact),
        "mc" => Ok(EvidenceMethod::Mc),
        other => Err(format!("unknown method `{other}` (expected exact or mc)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::InvalidInput(_) | Error::Io(_) => 1,
                Error::Infeasible { .. } => 2,
                Error::Numerical(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn load_truth(path: &Path) -> Result<TrueModel> {
    parse_truth(&read_to_string(path)?)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<NetworkSpec> {
    parse_learner_spec(&read_to_string(path)?)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// Print the summary to stdout and mirror it into `--out` when given.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.cmd {
        Cmd::Coeff { truth, spec } => {
            let truth = load_truth(&truth)?;
            let spec = load_spec(&spec)?;
            let rep = theorem1_mu(&truth, &spec)?;
            emit(
                &cli.out,
                &format!(
                    "d={} half_d={} lemma2={} lemma3={} mu={}\n",
                    rep.d, rep.half_d, rep.lemma2, rep.lemma3, rep.mu
                ),
            )
        }
        Cmd::Kl {
            truth,
            model,
            spec,
            near_eps,
            data,
        } => {
            let truth = load_truth(&truth)?;
            let mut text = String::new();
            match (model, spec) {
                (Some(model_path), None) => {
                    let model = load_truth(&model_path)?;
                    let kl = kl_full(&truth, model.spec(), model.params())?;
                    text.push_str(&format!("kl={}\n", kl.nats()));
                    if let Some(data_path) = data {
                        let dataset =
                            parse_dataset_csv(&read_to_string(&data_path)?, model.spec())?;
                        let e = empirical_kl(&truth, model.spec(), model.params(), &dataset)?;
                        text.push_str(&format!("empirical_kl={e}\n"));
                    }
                }
                (None, Some(spec_path)) => {
                    let spec = load_spec(&spec_path)?;
                    let eps = near_eps.expect("clap enforces --near-eps with --spec");
                    let params = sample_near_truth(&truth, &spec, eps, seed)?;
                    let kl = kl_full(&truth, &spec, &params)?;
                    text.push_str(&format!("kl={}\n", kl.nats()));
                }
                _ => {
                    return Err(Error::invalid(
                        "kl needs either --model FILE or --spec FILE --near-eps EPS",
                    ))
                }
            }
            emit(&cli.out, &text)
        }
        Cmd::Evidence {
            spec,
            truth,
            data,
            prior_alpha,
            method,
            mc_draws,
        } => {
            let spec = load_spec(&spec)?;
            let truth = load_truth(&truth)?;
            let dataset = parse_dataset_csv(&read_to_string(&data)?, &spec)?;
            let prior = Prior::constant(&spec, prior_alpha)?;
            let result = match method {
                EvidenceMethod::Exact => log_evidence_exact(&spec, &prior, &dataset)?,
                EvidenceMethod::Mc => log_evidence_mc(&spec, &prior, &dataset, mc_draws, seed)?,
            };
            let result = stochastic_complexity(result, &truth, &dataset)?;
            emit(
                &cli.out,
                &format!(
                    "log_Z0={} S={} F={} stderr={} terms={}\n",
                    result.log_z0, result.s_emp, result.f, result.stderr, result.terms
                ),
            )
        }
        Cmd::Curve {
            config,
            truth,
            spec,
            ns,
            replicates,
            method,
            mc_draws,
            prior_alpha,
        } => {
            let mut file = CurveFile::default();
            if let Some(path) = config {
                file = CurveFile::parse(&read_to_string(&path)?)?;
            }
            let truth_path = truth
                .or(file.truth)
                .ok_or_else(|| Error::invalid("curve needs --truth (flag or config)"))?;
            let spec_path = spec
                .or(file.spec)
                .ok_or_else(|| Error::invalid("curve needs --spec (flag or config)"))?;
            let ns = match ns {
                Some(text) => parse_usize_list(&text, "ns")?,
                None => file
                    .ns
                    .ok_or_else(|| Error::invalid("curve needs --ns (flag or config)"))?,
            };
            let replicates = replicates
                .or(file.replicates)
                .ok_or_else(|| Error::invalid("curve needs --replicates (flag or config)"))?;
            let out = cli
                .out
                .or(file.out)
                .ok_or_else(|| Error::invalid("curve needs --out (flag or config)"))?;
            let cfg = CurveConfig {
                prior_alpha: prior_alpha.or(file.prior_alpha).unwrap_or(1.0),
                ns,
                replicates,
                method: method.or(file.method).unwrap_or(EvidenceMethod::Exact),
                mc_draws: mc_draws.or(file.mc_draws).unwrap_or(100_000),
                seed: cli.seed.or(file.seed).unwrap_or(0),
            };
            let truth = load_truth(&truth_path)?;
            let spec = load_spec(&spec_path)?;
            let run = run_curve(&truth, &spec, &cfg)?;
            fs::write(&out, render_curve_csv(&run.curve))?;
            let (lambda_hat, stderr) = match run.curve.slope {
                Some(s) => (s.lambda_hat, s.stderr),
                None => (f64::NAN, f64::NAN),
            };
            println!(
                "lambda_hat={} stderr={} mu={} half_d={}",
                lambda_hat, stderr, run.report.mu, run.report.half_d
            );
            Ok(())
        }
        Cmd::Select {
            config,
            truth,
            candidates,
            n,
            replicates,
            method,
            mc_draws,
            prior_alpha,
            em_restarts,
        } => {
            let mut file = SelectFile::default();
            if let Some(path) = config {
                file = SelectFile::parse(&read_to_string(&path)?)?;
            }
            let truth_path = truth
                .or(file.truth)
                .ok_or_else(|| Error::invalid("select needs --truth (flag or config)"))?;
            let candidate_paths: Vec<String> = match candidates {
                Some(text) => text.split(',').map(|s| s.trim().to_string()).collect(),
                None => file
                    .candidates
                    .ok_or_else(|| Error::invalid("select needs --candidates (flag or config)"))?,
            };
            let n = n
                .or(file.n)
                .ok_or_else(|| Error::invalid("select needs --n (flag or config)"))?;
            let replicates = replicates
                .or(file.replicates)
                .ok_or_else(|| Error::invalid("select needs --replicates (flag or config)"))?;
            let out = cli
                .out
                .or(file.out)
                .ok_or_else(|| Error::invalid("select needs --out (flag or config)"))?;
            let truth = load_truth(&truth_path)?;
            let mut cands = Vec::with_capacity(candidate_paths.len());
            for path in &candidate_paths {
                cands.push(SelectCandidate {
                    name: path.clone(),
                    spec: load_spec(Path::new(path))?,
                });
            }
            let em = EmOptions {
                restarts: em_restarts.or(file.em_restarts).unwrap_or(20),
                ..EmOptions::default()
            };
            let cfg = SelectConfig {
                n,
                replicates,
                prior_alpha: prior_alpha.or(file.prior_alpha).unwrap_or(1.0),
                method: method.or(file.method).unwrap_or(EvidenceMethod::Exact),
                mc_draws: mc_draws.or(file.mc_draws).unwrap_or(100_000),
                em,
                seed: cli.seed.or(file.seed).unwrap_or(0),
            };
            let result = run_select(&truth, &cands, &cfg)?;
            fs::write(&out, render_select_csv(&result.rows))?;
            println!(
                "bic_agreement={} singular_agreement={}",
                result.bic_agreement, result.singular_agreement
            );
            Ok(())
        }
        Cmd::CheckProps => {
            let report = run_props(seed)?;
            let mut text = String::new();
            for check in &report.checks {
                text.push_str(&format!(
                    "check={} margin={} status={}\n",
                    check.name,
                    check.margin,
                    if check.pass { "pass" } else { "fail" }
                ));
            }
            emit(&cli.out, &text)
        }
    }
}

/// Curve config file: the flag names as keys.
#[derive(Default)]
struct CurveFile {
    truth: Option<PathBuf>,
    spec: Option<PathBuf>,
    ns: Option<Vec<usize>>,
    replicates: Option<usize>,
    method: Option<EvidenceMethod>,
    mc_draws: Option<usize>,
    prior_alpha: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl CurveFile {
    fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let file = CurveFile {
            truth: kv.take("truth").map(PathBuf::from),
            spec: kv.take("spec").map(PathBuf::from),
            ns: kv
                .take("ns")
                .map(|v| parse_usize_list(&v, "ns"))
                .transpose()?,
            replicates: kv
                .take("replicates")
                .map(|v| parse_usize(&v, "replicates"))
                .transpose()?,
            method: kv
                .take("method")
                .map(|v| parse_method(&v).map_err(Error::InvalidInput))
                .transpose()?,
            mc_draws: kv
                .take("mc_draws")
                .map(|v| parse_usize(&v, "mc_draws"))
                .transpose()?,
            prior_alpha: kv
                .take("prior_alpha")
                .map(|v| parse_f64(&v, "prior_alpha"))
                .transpose()?,
            seed: kv.take("seed").map(|v| parse_u64(&v, "seed")).transpose()?,
            out: kv.take("out").map(PathBuf::from),
        };
        kv.finish()?;
        Ok(file)
    }
}

/// Select config file: the flag names as keys.
#[derive(Default)]
struct SelectFile {
    truth: Option<PathBuf>,
    candidates: Option<Vec<String>>,
    n: Option<usize>,
    replicates: Option<usize>,
    method: Option<EvidenceMethod>,
    mc_draws: Option<usize>,
    prior_alpha: Option<f64>,
    em_restarts: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl SelectFile {
    fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let file = SelectFile {
            truth: kv.take("truth").map(PathBuf::from),
            candidates: kv
                .take("candidates")
                .map(|v| v.split(',').map(|s| s.trim().to_string()).collect()),
            n: kv.take("n").map(|v| parse_usize(&v, "n")).transpose()?,
            replicates: kv
                .take("replicates")
                .map(|v| parse_usize(&v, "replicates"))
                .transpose()?,
            method: kv
                .take("method")
                .map(|v| parse_method(&v).map_err(Error::InvalidInput))
                .transpose()?,
            mc_draws: kv
                .take("mc_draws")
                .map(|v| parse_usize(&v, "mc_draws"))
                .transpose()?,
            prior_alpha: kv
                .take("prior_alpha")
                .map(|v| parse_f64(&v, "prior_alpha"))
                .transpose()?,
            em_restarts: kv
                .take("em_restarts")
                .map(|v| parse_usize(&v, "em_restarts"))
                .transpose()?,
            seed: kv.take("seed").map(|v| parse_u64(&v, "seed")).transpose()?,
            out: kv.take("out").map(PathBuf::from),
        };
        kv.finish()?;
        Ok(file)
    }
}
