//! The `fpgp` command line.
//!
//! Exit codes: 0 success or MATCH, 1 NON_MATCH, 2 usage or input error,
//! 3 training failed to reach a usable residual.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::evolve::EvolutionConfig;
use crate::fixtures;
use crate::matching::{
    build_template, format_sig9, ComparisonMode, CountPolicy, Decision, Kind, KindOutcome,
    KindReport, MatchConfig, Template, DEFAULT_MSE_THRESHOLD,
};
use crate::minutiae::{self, BinaryImage, MinutiaeSet};
use crate::reproduce::{reproduce, EXPECTED_DECISIONS};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NON_MATCH: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_TRAINING: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "fpgp", version, about = "Fingerprint matching with GP-evolved minutiae formulas")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract minutiae from a PBM/PGM skeleton image.
    Extract {
        image: PathBuf,
        #[arg(long, default_value_t = minutiae::DEFAULT_BORDER_MARGIN)]
        margin: usize,
        /// Run Zhang-Suen thinning before extraction.
        #[arg(long)]
        thin: bool,
        /// Output stem; writes <out>.end.csv and <out>.bif.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve a template from a query's end-point and/or bifurcation CSV.
    Train {
        /// One or two minutiae CSV files; the kind is read from the header.
        #[arg(required = true, num_args = 1..=2)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match candidate minutiae against a template.
    Match {
        template: PathBuf,
        /// One or two minutiae CSV files; the kind is read from the header.
        #[arg(required = true, num_args = 1..=2)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MSE_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = PolicyArg::Strict)]
        count_policy: PolicyArg,
        #[arg(long, value_enum, default_value_t = ModeArg::QueryTargets)]
        comparison: ModeArg,
    },
    /// Write the fixture minutiae tables as CSV.
    Fixtures {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Enroll the fixture query and match the three fixture candidates.
    Reproduce {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Strict,
    PairPrefix,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    QueryTargets,
    OwnY,
}

enum Failure {
    Input(Error),
    Training(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing the report to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
        Err(Failure::Training(msg)) => {
            let _ = writeln!(err, "training failed: {msg}");
            EXIT_TRAINING
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn dispatch(command: Command, out: &mut dyn Write) -> std::result::Result<u8, Failure> {
    match command {
        Command::Extract {
            image,
            margin,
            thin,
            out: stem,
        } => {
            let mut img = BinaryImage::load(&image)?;
            if thin {
                img = minutiae::thin(&img);
            }
            let set = minutiae::extract_minutiae(&img, margin)?;
            let (end, bif) = set.save_csv(&stem)?;
            emit(
                out,
                &format!(
                    "endings: {}, bifurcations: {}\nwrote {}\nwrote {}\n",
                    set.endings.len(),
                    set.bifurcations.len(),
                    end.display(),
                    bif.display()
                ),
            )?;
            Ok(EXIT_OK)
        }
        Command::Train {
            csv,
            config,
            seed,
            out: path,
        } => {
            let evo = load_config(config.as_deref(), seed)?;
            let query = load_sets(&csv)?;
            if query.is_empty() {
                return Err(Error::invalid("no minutiae in the supplied CSV files").into());
            }
            let template = build_template(&query, &evo)?;
            template.save(&path)?;
            let mut s = String::new();
            describe_template(&mut s, &template);
            let _ = writeln!(s, "template written to {}", path.display());
            emit(out, &s)?;
            Ok(EXIT_OK)
        }
        Command::Match {
            template,
            csv,
            threshold,
            count_policy,
            comparison,
        } => {
            if threshold.is_nan() || threshold < 0.0 {
                return Err(Error::invalid("threshold must be non-negative").into());
            }
            let template = Template::load(&template)?;
            let candidate = load_sets(&csv)?;
            let config = MatchConfig {
                mse_threshold: threshold,
                count_policy: match count_policy {
                    PolicyArg::Strict => CountPolicy::Strict,
                    PolicyArg::PairPrefix => CountPolicy::PairPrefix,
                },
                comparison_mode: match comparison {
                    ModeArg::QueryTargets => ComparisonMode::QueryTargets,
                    ModeArg::OwnY => ComparisonMode::OwnY,
                },
            };
            let report = template.decide(&candidate, &config)?;
            let mut s = String::new();
            for (kind, r) in [(Kind::End, &report.end), (Kind::Bif, &report.bif)] {
                render_kind(&mut s, kind, r);
            }
            let _ = writeln!(s, "decision: {}", report.decision);
            emit(out, &s)?;
            Ok(match report.decision {
                Decision::Match => EXIT_OK,
                Decision::NonMatch => EXIT_NON_MATCH,
            })
        }
        Command::Fixtures { dir } => {
            let manifest = fixtures::write_fixtures(&dir)?;
            let mut s = String::new();
            for (name, digest) in manifest {
                let _ = writeln!(s, "{digest}  {name}");
            }
            emit(out, &s)?;
            Ok(EXIT_OK)
        }
        Command::Reproduce { seed, dir, config } => {
            let mut evo = load_config(config.as_deref(), None)?;
            evo.rng_seed = seed;
            cmd_reproduce(&evo, &dir, out)
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<EvolutionConfig> {
    let mut evo = match path {
        Some(p) => EvolutionConfig::load(p)?,
        None => EvolutionConfig::default(),
    };
    if let Some(seed) = seed {
        evo.rng_seed = seed;
    }
    Ok(evo)
}

fn load_sets(paths: &[PathBuf]) -> Result<MinutiaeSet> {
    let mut set = MinutiaeSet::default();
    for p in paths {
        let loaded = minutiae::read_minutiae_csv(p)?;
        set.endings.extend(loaded.endings);
        set.bifurcations.extend(loaded.bifurcations);
    }
    set.canonicalize();
    Ok(set)
}

fn describe_template(s: &mut String, template: &Template) {
    for kind in [Kind::End, Kind::Bif] {
        match template.kind(kind) {
            Some(fit) => {
                let _ = writeln!(
                    s,
                    "{} formula: {}",
                    kind.label(),
                    fit.formula.to_prefix(&kind.naming_terminals())
                );
                let _ = writeln!(s, "{} training RMSE: {:.2}", kind.label(), fit.training_rmse);
            }
            None => {
                let _ = writeln!(s, "{} formula: -", kind.label());
            }
        }
    }
}

fn outcome_text(outcome: &KindOutcome) -> String {
    match outcome {
        KindOutcome::NotCovered => "-".into(),
        KindOutcome::CountMismatch => "COUNT_MISMATCH".into(),
        KindOutcome::Scored { mse, penalty } if *penalty > 0.0 => {
            format!("{:.2} (+{:.2} count penalty)", mse, penalty)
        }
        KindOutcome::Scored { mse, .. } => format!("{mse:.2}"),
    }
}

/// Two-column prediction/target listing followed by the kind's score.
fn render_kind(s: &mut String, kind: Kind, r: &KindReport) {
    if r.outcome == KindOutcome::NotCovered && r.predictions.is_empty() {
        return;
    }
    let _ = writeln!(
        s,
        "{} points: query {}, candidate {}",
        kind.label(),
        r.query_count,
        r.candidate_count
    );
    let _ = writeln!(s, "{:>12}  {:>12}", "prediction", "target");
    let cell = |v: Option<&f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    for i in 0..r.predictions.len().max(r.targets.len()) {
        let _ = writeln!(
            s,
            "{:>12}  {:>12}",
            cell(r.predictions.get(i)),
            cell(r.targets.get(i))
        );
    }
    let _ = writeln!(s, "{} MSE: {}", kind.label(), outcome_text(&r.outcome));
    let _ = writeln!(s, "{} {}", kind.label(), if r.passed { "pass" } else { "fail" });
}

fn machine_outcome(outcome: &KindOutcome) -> String {
    match outcome {
        KindOutcome::NotCovered => "-".into(),
        KindOutcome::CountMismatch => "COUNT_MISMATCH".into(),
        KindOutcome::Scored { mse, penalty } => format_sig9(mse + penalty),
    }
}

/// Columns `image1,image2,image3,query`, ragged rows padded with empty cells.
fn prediction_table(columns: &[&[f64]]) -> String {
    let mut s = String::from("image1,image2,image3,query\n");
    let rows = columns.iter().map(|c| c.len()).max().unwrap_or(0);
    for i in 0..rows {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| c.get(i).map(|v| format_sig9(*v)).unwrap_or_default())
            .collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_reproduce(
    evo: &EvolutionConfig,
    dir: &Path,
    out: &mut dyn Write,
) -> std::result::Result<u8, Failure> {
    let match_config = MatchConfig::default();
    let manifest = fixtures::write_fixtures(dir)?;
    let query = fixtures::query_set();
    minutiae::write_bifurcations_csv(&query.bifurcations, dir.join("query_bif.csv"))?;

    let result = reproduce(evo, &match_config)?;
    result.template.save(dir.join("template.txt"))?;

    let mut s = String::new();
    let _ = writeln!(s, "fixtures: {} files in {}", manifest.len(), dir.display());
    let _ = writeln!(s, "seed: {}", evo.rng_seed);
    describe_template(&mut s, &result.template);

    for kind in [Kind::End, Kind::Bif] {
        if let Some(fit) = result.template.kind(kind) {
            let training_mse = fit.training_rmse * fit.training_rmse;
            if training_mse > match_config.mse_threshold {
                emit(out, &s)?;
                return Err(Failure::Training(format!(
                    "{} training RMSE {:.4} (MSE {:.4}) exceeds the match threshold {}",
                    kind.label(),
                    fit.training_rmse,
                    training_mse,
                    match_config.mse_threshold
                )));
            }
        }
    }

    let _ = writeln!(s, "{:<8}{:>18}{:>18}  decision", "image", "end MSE", "bif MSE");
    let mut summary = String::from("image,end_count,bif_count,end_mse,bif_mse,decision\n");
    for (i, r) in result.reports.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<8}{:>18}{:>18}  {}",
            format!("image{}", i + 1),
            outcome_text(&r.end.outcome),
            outcome_text(&r.bif.outcome),
            r.decision
        );
        let _ = writeln!(
            summary,
            "image{},{},{},{},{},{}",
            i + 1,
            r.end.candidate_count,
            r.bif.candidate_count,
            machine_outcome(&r.end.outcome),
            machine_outcome(&r.bif.outcome),
            r.decision
        );
    }

    let end_query = result.template.end.as_ref().map_or(&[][..], |f| &f.targets[..]);
    let bif_query = result.template.bif.as_ref().map_or(&[][..], |f| &f.targets[..]);
    let end_cols: Vec<&[f64]> = result
        .reports
        .iter()
        .map(|r| &r.end.predictions[..])
        .chain([end_query])
        .collect();
    let bif_cols: Vec<&[f64]> = result
        .reports
        .iter()
        .map(|r| &r.bif.predictions[..])
        .chain([bif_query])
        .collect();
    write_file(&dir.join("end_predictions.csv"), &prediction_table(&end_cols))?;
    write_file(&dir.join("bif_predictions.csv"), &prediction_table(&bif_cols))?;
    write_file(&dir.join("summary.csv"), &summary)?;

    let ok = result.matches_expected();
    let expected: Vec<String> = EXPECTED_DECISIONS.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(
        s,
        "expected {}: {}",
        expected.join("/"),
        if ok { "reproduced" } else { "NOT reproduced" }
    );
    emit(out, &s)?;
    Ok(if ok { EXIT_OK } else { EXIT_NON_MATCH })
}
