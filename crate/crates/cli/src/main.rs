mod args;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use ken::io::{load_embeddings, report_to_json, write_binary, write_csv};
use ken::spectral::oracle::cross_check_split;
use ken::synthetic::{sample_gmm_labeled, scenario_alpha_mixture, scenario_figure1, GmmSpec};
use ken::{
    build_blocks, evaluate, select_bandwidth, BandwidthSearch, EmbeddingSet, EvaluateOptions,
    KernelConfig, NoveltyReport,
};

use args::{
    BandwidthArgs, Cli, Command, Format, MixtureArgs, PairOutput, Point, ScoreArgs, SelectionArgs,
    SynthCommand, VerifyArgs,
};

/// Largest oracle deviation `verify` accepts.
const VERIFY_TOLERANCE: f64 = 1e-6;

enum Failure {
    Usage(String),
    Ken(ken::Error),
    Disagreement(f64),
}

impl From<ken::Error> for Failure {
    fn from(e: ken::Error) -> Self {
        Failure::Ken(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match cli.command {
        Command::Score(a) => cmd_score(a, false),
        Command::Modes(a) => cmd_score(a, true),
        Command::Bandwidth(a) => cmd_bandwidth(a),
        Command::Synth(c) => cmd_synth(c),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Ken(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
        Err(Failure::Disagreement(dev)) => {
            eprintln!("error: oracle deviation {dev:e} exceeds {VERIFY_TOLERANCE:e}");
            ExitCode::from(2)
        }
    }
}

fn search_from(
    selection: &SelectionArgs,
    eta: f64,
    seed: u64,
    spectral: ken::SpectralOptions,
) -> BandwidthSearch {
    let defaults = BandwidthSearch::default();
    BandwidthSearch {
        candidates: selection.sigma_grid.clone().unwrap_or(defaults.candidates),
        variance_threshold: selection.variance_threshold,
        subsample_fraction: selection.subsample,
        trials: selection.trials,
        seed,
        eta,
        spectral,
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn emit_json(out: Option<&Path>, json: &str) -> CliResult {
    match out {
        Some(path) => write_text(path, &format!("{json}\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

/// The summary goes to stdout when the report goes to a file, else stderr.
fn summary(args_out: Option<&Path>, quiet: bool, line: &str) {
    if quiet {
        return;
    }
    if args_out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn cmd_score(args: ScoreArgs, print_modes: bool) -> CliResult {
    let test = load_embeddings(&args.input.test)?;
    let reference = load_embeddings(&args.input.reference)?;
    let spectral = args.spectral.options();
    let out = args.output.out.as_deref();

    let selection = if args.select_sigma {
        let search = search_from(
            &args.selection,
            args.eta,
            args.output.seed,
            spectral.clone(),
        );
        Some(select_bandwidth(&test, &reference, &search)?)
    } else {
        None
    };
    let sigma = match (&selection, args.sigma) {
        (Some(sel), _) => sel.sigma,
        (None, Some(sigma)) => sigma,
        (None, None) => {
            return Err(Failure::Usage(
                "one of --sigma or --select-sigma is required".into(),
            ))
        }
    };
    let config = KernelConfig::new(sigma, args.eta)?;
    let options = EvaluateOptions {
        spectral: spectral.clone(),
        top_k: args.top_k,
        top_r: args.top_r,
        rken: args.rken,
        seed: Some(args.output.seed),
    };
    let mut report = evaluate(&test, &reference, &config, &options)?;
    if let Some(sel) = selection {
        if !sel.satisfied {
            report.metadata.warnings.push(format!(
                "no candidate bandwidth met variance threshold {}; using the largest, {}",
                sel.variance_threshold, sel.sigma
            ));
        }
        report.metadata.bandwidth_selection = Some(sel);
    }
    if args.oracle {
        let check = ken::spectral::oracle::cross_check(&test, &reference, &config, &spectral)?;
        report.metadata.oracle = Some(check);
    }

    emit_json(out, &report_to_json(&report)?)?;
    summary(out, args.output.quiet, &report.summary_line());
    if print_modes && !args.output.quiet {
        print_mode_table(&report, out.is_some());
    }
    Ok(())
}

fn print_mode_table(report: &NoveltyReport, to_stdout: bool) {
    for mode in &report.modes {
        let test: Vec<String> = mode.top_test.iter().map(|s| s.index.to_string()).collect();
        let reference: Vec<String> = mode
            .top_ref
            .iter()
            .map(|s| (s.index - report.n).to_string())
            .collect();
        let line = format!(
            "mode {} eigenvalue={:.6} test=[{}] ref=[{}]",
            mode.rank,
            mode.eigenvalue,
            test.join(","),
            reference.join(",")
        );
        if to_stdout {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

fn cmd_bandwidth(args: BandwidthArgs) -> CliResult {
    let test = load_embeddings(&args.input.test)?;
    let reference = load_embeddings(&args.input.reference)?;
    let search = search_from(
        &args.selection,
        args.eta,
        args.output.seed,
        args.spectral.options(),
    );
    let selection = select_bandwidth(&test, &reference, &search)?;
    let json = serde_json::to_string_pretty(&selection).map_err(ken::Error::from)?;
    let out = args.output.out.as_deref();
    emit_json(out, &json)?;
    summary(
        out,
        args.output.quiet,
        &format!(
            "sigma={} satisfied={}",
            selection.sigma, selection.satisfied
        ),
    );
    Ok(())
}

fn write_set(set: &EmbeddingSet, path: &Path, format: Option<Format>) -> CliResult {
    match Format::resolve(format, path) {
        Format::Csv => write_csv(set, path)?,
        Format::Kenf => write_binary(set, path)?,
    }
    Ok(())
}

fn points(list: &[Point]) -> Vec<Vec<f64>> {
    list.iter().map(|p| p.0.clone()).collect()
}

fn mixture_spec(m: &MixtureArgs, count: usize, seed: u64) -> Result<GmmSpec, Failure> {
    if m.means.is_empty() {
        return Err(Failure::Usage("--means is required".into()));
    }
    let k = m.means.len();
    let weights = m.weights.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
    let stds = match m.std.len() {
        1 => vec![m.std[0]; k],
        _ => m.std.clone(),
    };
    let spec = GmmSpec {
        weights,
        means: points(&m.means),
        stds,
        seed,
        count,
    };
    spec.validate()?;
    Ok(spec)
}

fn write_pair(test: &EmbeddingSet, reference: &EmbeddingSet, out: &PairOutput) -> CliResult {
    write_set(test, &out.out_test, out.format)?;
    write_set(reference, &out.out_ref, out.format)
}

fn cmd_synth(command: SynthCommand) -> CliResult {
    match command {
        SynthCommand::Gmm {
            mixture,
            count,
            seed,
            out,
            format,
            labels_out,
        } => {
            let spec = mixture_spec(&mixture, count, seed)?;
            let (set, labels) = sample_gmm_labeled(&spec)?;
            write_set(&set, &out, format)?;
            if let Some(path) = labels_out {
                let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
                write_text(&path, &text)?;
            }
            Ok(())
        }
        SynthCommand::Figure1 {
            column,
            count,
            seed,
            output,
        } => {
            let scenario = scenario_figure1(column, count, seed)?;
            write_pair(&scenario.test, &scenario.reference, &output)
        }
        SynthCommand::Alpha {
            alpha,
            ref_means,
            novel_means,
            std,
            count,
            seed,
            output,
        } => {
            let default_or = |given: &[Point], fallback: Vec<Vec<f64>>| {
                if given.is_empty() {
                    fallback
                } else {
                    points(given)
                }
            };
            let reference = GmmSpec::uniform(
                default_or(
                    &ref_means,
                    vec![
                        vec![0.0, 1.0],
                        vec![1.0, 0.0],
                        vec![0.0, -1.0],
                        vec![-1.0, 0.0],
                    ],
                ),
                std,
                count,
                seed,
            );
            let novel = GmmSpec::uniform(
                default_or(
                    &novel_means,
                    vec![
                        vec![0.7, 0.7],
                        vec![-0.7, 0.7],
                        vec![0.7, -0.7],
                        vec![-0.7, -0.7],
                    ],
                ),
                std,
                count,
                seed,
            );
            let scenario = scenario_alpha_mixture(alpha, &reference, &novel, count, seed)?;
            write_pair(&scenario.test, &scenario.reference, &output)
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> CliResult {
    let (test, reference) = if args.random {
        let spec = GmmSpec::new(
            vec![1.0],
            vec![vec![0.0; args.d.max(1)]],
            1.0,
            args.n,
            args.seed,
        );
        if args.d == 0 {
            return Err(Failure::Usage("--d must be positive".into()));
        }
        let x = ken::synthetic::sample_gmm(&spec)?;
        let y = ken::synthetic::sample_gmm(
            &spec.with_count(args.m).with_seed(args.seed.wrapping_add(1)),
        )?;
        (x, y)
    } else {
        match (&args.test, &args.reference) {
            (Some(t), Some(r)) => (load_embeddings(t)?, load_embeddings(r)?),
            _ => {
                return Err(Failure::Usage(
                    "verify needs --random or both --test and --ref".into(),
                ))
            }
        }
    };
    let config = KernelConfig::new(args.sigma, args.eta)?;
    let clean = build_blocks(&test, &reference, &config)?;
    let mut factor_blocks = clean.clone();
    if args.corrupt {
        factor_blocks.kxy_mut()[(0, 0)] += 1e-3;
    }
    let check = cross_check_split(
        &factor_blocks,
        &clean,
        args.eta,
        &args.spectral.options(),
        Some((&test, &reference)),
    )?;

    let deviation = check.max_deviation();
    println!("positive eigenvalues: {}", check.positive.len());
    println!("nonsymmetric deviation: {:e}", check.nonsymmetric_deviation);
    println!("max imaginary part: {:e}", check.max_imaginary);
    match check.linear_deviation {
        Some(d) => println!("linear-feature deviation: {d:e}"),
        None => println!("linear-feature deviation: skipped"),
    }
    println!("max eigenvector residual: {:e}", check.max_residual);
    println!("max deviation: {deviation:e}");
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&check).map_err(ken::Error::from)?;
        write_text(path, &format!("{json}\n"))?;
    }
    if deviation <= VERIFY_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::Disagreement(deviation))
    }
}
