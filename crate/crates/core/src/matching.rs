//! Enrollment and matching.
//!
//! Enrolling a query fingerprint evolves one formula per minutia kind that
//! maps a minutia's column and ridge angles to its row. A candidate is
//! scored by applying those formulas to its own minutiae, position by
//! position in canonical order, and taking the mean squared error against
//! the enrolled rows.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolve::{self, EvolutionConfig, FitnessCase};
use crate::expr::{ProgramTree, TerminalSet};
use crate::minutiae::MinutiaeSet;

/// Variables of end-point formulas. `y` is the target and is offered to
/// GP only when `include_target_variable` is set.
pub const END_VARIABLES: [&str; 3] = ["x", "angle", "y"];
pub const BIF_VARIABLES: [&str; 5] = ["x", "angle1", "angle2", "angle3", "y"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    End,
    Bif,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::End => "end",
            Kind::Bif => "bif",
        }
    }

    fn all_variables(self) -> &'static [&'static str] {
        match self {
            Kind::End => &END_VARIABLES,
            Kind::Bif => &BIF_VARIABLES,
        }
    }

    /// Terminal set naming every variable a stored formula may use.
    pub fn naming_terminals(self) -> TerminalSet {
        TerminalSet::with_variables(self.all_variables().iter().copied())
            .expect("static variable names are valid")
    }

    fn gp_terminals(self, include_y: bool, const_min: i64, const_max: i64) -> Result<TerminalSet> {
        let vars = self.all_variables();
        let vars = if include_y { vars } else { &vars[..vars.len() - 1] };
        TerminalSet::new(vars.iter().copied(), const_min, const_max)
    }
}

/// The rows a kind's formula was fitted to, in canonical order, and the fit.
#[derive(Clone, Debug, PartialEq)]
pub struct KindFormula {
    pub formula: ProgramTree,
    pub targets: Vec<f64>,
    /// `sqrt(SSE / n)` of `formula` on the enrolled minutiae.
    pub training_rmse: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Template {
    pub end: Option<KindFormula>,
    pub bif: Option<KindFormula>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountPolicy {
    /// A count difference fails the kind.
    Strict,
    /// Compare the common prefix and add `|n − m| · mse_threshold`.
    PairPrefix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComparisonMode {
    /// Predictions against the enrolled rows.
    QueryTargets,
    /// Predictions against the candidate's own rows.
    OwnY,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchConfig {
    pub mse_threshold: f64,
    pub count_policy: CountPolicy,
    pub comparison_mode: ComparisonMode,
}

pub const DEFAULT_MSE_THRESHOLD: f64 = 25.0;

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            mse_threshold: DEFAULT_MSE_THRESHOLD,
            count_policy: CountPolicy::Strict,
            comparison_mode: ComparisonMode::QueryTargets,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Match,
    NonMatch,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Match => "MATCH",
            Decision::NonMatch => "NON_MATCH",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KindOutcome {
    /// The template has no formula for this kind; it does not take part.
    NotCovered,
    CountMismatch,
    /// Mean squared error over the compared pairs, plus any count penalty.
    Scored { mse: f64, penalty: f64 },
}

impl KindOutcome {
    pub fn score(&self) -> Option<f64> {
        match self {
            KindOutcome::Scored { mse, penalty } => Some(mse + penalty),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KindReport {
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
    pub query_count: usize,
    pub candidate_count: usize,
    pub outcome: KindOutcome,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchReport {
    pub end: KindReport,
    pub bif: KindReport,
    pub decision: Decision,
}

fn query_cases(set: &MinutiaeSet, kind: Kind, include_y: bool) -> Result<Vec<FitnessCase>> {
    let rows: Vec<(Vec<f64>, Option<i32>)> = match kind {
        Kind::End => set.endings.iter().map(|p| (p.inputs(), p.y)).collect(),
        Kind::Bif => set.bifurcations.iter().map(|p| (p.inputs(), p.y)).collect(),
    };
    rows.into_iter()
        .map(|(mut inputs, y)| {
            let y = y.ok_or_else(|| {
                Error::invalid(format!("query {} minutia without a y coordinate", kind.label()))
            })? as f64;
            if include_y {
                inputs.push(y);
            }
            Ok(FitnessCase::new(inputs, y))
        })
        .collect()
}

fn fit_kind(cases: &[FitnessCase], kind: Kind, evo: &EvolutionConfig) -> Result<KindFormula> {
    let targets: Vec<f64> = cases.iter().map(|c| c.target).collect();
    let formula = match targets.as_slice() {
        [only] if only.fract() == 0.0 => ProgramTree::constant(*only as i64),
        _ => {
            let mut config = evo.clone();
            config.terminals = kind.gp_terminals(
                evo.include_target_variable,
                evo.terminals.const_min(),
                evo.terminals.const_max(),
            )?;
            if kind == Kind::Bif {
                config.rng_seed = evo.rng_seed.wrapping_add(1);
            }
            evolve::run(cases, &config)?.best.tree
        }
    };
    let sse = evolve::fitness(&formula, cases)?;
    Ok(KindFormula {
        formula,
        targets,
        training_rmse: (sse / cases.len() as f64).sqrt(),
    })
}

/// Evolves the end-point and bifurcation formulas of `query`. The end run
/// uses `evo.rng_seed`, the bifurcation run `evo.rng_seed + 1`. A kind with
/// a single minutia gets the constant formula for its row.
pub fn build_template(query: &MinutiaeSet, evo: &EvolutionConfig) -> Result<Template> {
    if query.is_empty() {
        return Err(Error::invalid("query has no minutiae"));
    }
    let mut query = query.clone();
    query.canonicalize();
    let include_y = evo.include_target_variable;
    let mut template = Template::default();
    if !query.endings.is_empty() {
        let cases = query_cases(&query, Kind::End, include_y)?;
        template.end = Some(fit_kind(&cases, Kind::End, evo)?);
    }
    if !query.bifurcations.is_empty() {
        let cases = query_cases(&query, Kind::Bif, include_y)?;
        template.bif = Some(fit_kind(&cases, Kind::Bif, evo)?);
    }
    Ok(template)
}

fn predict(formula: &ProgramTree, rows: Vec<(Vec<f64>, Option<i32>)>, kind: Kind) -> Result<Vec<f64>> {
    let base_arity = kind.all_variables().len() - 1;
    let needs_y = formula.max_variable_index().is_some_and(|i| i >= base_arity);
    rows.into_iter()
        .map(|(mut inputs, y)| {
            if needs_y {
                let y = y.ok_or_else(|| {
                    Error::invalid(format!(
                        "{} formula uses y but a candidate minutia has none",
                        kind.label()
                    ))
                })?;
                inputs.push(y as f64);
            }
            formula.evaluate_slice(&inputs)
        })
        .collect()
}

impl Template {
    pub fn kind(&self, kind: Kind) -> Option<&KindFormula> {
        match kind {
            Kind::End => self.end.as_ref(),
            Kind::Bif => self.bif.as_ref(),
        }
    }

    /// Applies the formulas to the candidate's minutiae in canonical order.
    /// Returns `(end_predictions, bif_predictions)`.
    pub fn evaluate_candidate(&self, candidate: &MinutiaeSet) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut candidate = candidate.clone();
        candidate.canonicalize();
        let run = |kind: Kind, rows: Vec<(Vec<f64>, Option<i32>)>| -> Result<Vec<f64>> {
            if rows.is_empty() {
                return Ok(Vec::new());
            }
            let formula = self.kind(kind).ok_or(Error::MissingFormula(kind.label()))?;
            predict(&formula.formula, rows, kind)
        };
        let end = run(
            Kind::End,
            candidate.endings.iter().map(|p| (p.inputs(), p.y)).collect(),
        )?;
        let bif = run(
            Kind::Bif,
            candidate.bifurcations.iter().map(|p| (p.inputs(), p.y)).collect(),
        )?;
        Ok((end, bif))
    }

    pub fn decide(&self, candidate: &MinutiaeSet, config: &MatchConfig) -> Result<MatchReport> {
        let mut candidate = candidate.clone();
        candidate.canonicalize();
        let (end_pred, bif_pred) = self.evaluate_candidate(&candidate)?;
        let own_y = |kind: Kind| -> Vec<Option<i32>> {
            match kind {
                Kind::End => candidate.endings.iter().map(|p| p.y).collect(),
                Kind::Bif => candidate.bifurcations.iter().map(|p| p.y).collect(),
            }
        };
        let end = self.score_kind(Kind::End, end_pred, own_y(Kind::End), config)?;
        let bif = self.score_kind(Kind::Bif, bif_pred, own_y(Kind::Bif), config)?;
        let decision = if end.passed && bif.passed {
            Decision::Match
        } else {
            Decision::NonMatch
        };
        Ok(MatchReport { end, bif, decision })
    }

    fn score_kind(
        &self,
        kind: Kind,
        predictions: Vec<f64>,
        own_y: Vec<Option<i32>>,
        config: &MatchConfig,
    ) -> Result<KindReport> {
        let candidate_count = predictions.len();
        let Some(fit) = self.kind(kind) else {
            return Ok(KindReport {
                predictions,
                targets: Vec::new(),
                query_count: 0,
                candidate_count,
                outcome: KindOutcome::NotCovered,
                passed: true,
            });
        };
        let query_count = fit.targets.len();
        let targets: Vec<f64> = match config.comparison_mode {
            ComparisonMode::QueryTargets => fit.targets.clone(),
            ComparisonMode::OwnY => own_y
                .into_iter()
                .map(|y| {
                    y.map(f64::from).ok_or_else(|| {
                        Error::invalid(format!(
                            "comparison against own y needs y on every candidate {} minutia",
                            kind.label()
                        ))
                    })
                })
                .collect::<Result<_>>()?,
        };

        let outcome = if config.count_policy == CountPolicy::Strict && query_count != candidate_count {
            KindOutcome::CountMismatch
        } else {
            let paired = predictions.len().min(targets.len());
            let mse_value = if paired == 0 {
                0.0
            } else {
                mse(&predictions[..paired], &targets[..paired])?
            };
            let penalty = query_count.abs_diff(candidate_count) as f64 * config.mse_threshold;
            KindOutcome::Scored {
                mse: mse_value,
                penalty,
            }
        };
        let passed = outcome.score().is_some_and(|s| s <= config.mse_threshold);
        Ok(KindReport {
            predictions,
            targets,
            query_count,
            candidate_count,
            outcome,
            passed,
        })
    }

    pub fn to_text(&self) -> String {
        let terms = |k: Kind| k.naming_terminals();
        let mut s = String::new();
        for kind in [Kind::End, Kind::Bif] {
            let formula = self
                .kind(kind)
                .map_or_else(|| "-".to_string(), |f| f.formula.to_prefix(&terms(kind)));
            let _ = writeln!(s, "{}: {formula}", kind.label());
        }
        for kind in [Kind::End, Kind::Bif] {
            let targets: Vec<String> = self
                .kind(kind)
                .map(|f| f.targets.iter().map(|&t| format_sig9(t)).collect())
                .unwrap_or_default();
            let _ = writeln!(s, "{}_targets: {}", kind.label(), targets.join(","));
        }
        for kind in [Kind::End, Kind::Bif] {
            let rmse = self
                .kind(kind)
                .map_or_else(|| "-".to_string(), |f| format_sig9(f.training_rmse));
            let _ = writeln!(s, "{}_training_rmse: {rmse}", kind.label());
        }
        // no trailing spaces on empty target lines
        s.replace(": \n", ":\n")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let err = |line: usize, message: String| Error::Format {
            what: "template",
            line,
            message,
        };
        let field = |i: usize, key: &str| -> Result<&str> {
            let line = lines.get(i).copied().unwrap_or("");
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(':'))
                .map(str::trim)
                .ok_or_else(|| err(i + 1, format!("expected `{key}:`")))
        };

        let mut parts: Vec<(Option<ProgramTree>, Vec<f64>, Option<f64>)> = Vec::new();
        for (k, kind) in [Kind::End, Kind::Bif].into_iter().enumerate() {
            let label = kind.label();
            let formula = match field(k, label)? {
                "-" => None,
                text => Some(
                    ProgramTree::parse_prefix(text, &kind.naming_terminals())
                        .map_err(|e| err(k + 1, e.to_string()))?,
                ),
            };
            let targets_line = 2 + k;
            let targets = match field(targets_line, &format!("{label}_targets"))? {
                "" => Vec::new(),
                list => list
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| err(targets_line + 1, format!("invalid target {v:?}")))
                    })
                    .collect::<Result<_>>()?,
            };
            let rmse_line = 4 + k;
            let rmse = match field(rmse_line, &format!("{label}_training_rmse"))? {
                "-" => None,
                v => Some(
                    v.parse::<f64>()
                        .ok()
                        .filter(|v| *v >= 0.0 && v.is_finite())
                        .ok_or_else(|| err(rmse_line + 1, format!("invalid rmse {v:?}")))?,
                ),
            };
            parts.push((formula, targets, rmse));
        }
        if let Some(extra) = lines.iter().skip(6).position(|l| !l.trim().is_empty()) {
            return Err(err(7 + extra, "unexpected trailing content".into()));
        }

        let mut template = Template::default();
        for (k, (formula, targets, rmse)) in parts.into_iter().enumerate() {
            let fit = match (formula, rmse) {
                (None, None) if targets.is_empty() => None,
                (Some(formula), Some(training_rmse)) if !targets.is_empty() => Some(KindFormula {
                    formula,
                    targets,
                    training_rmse,
                }),
                _ => {
                    return Err(err(
                        k + 1,
                        "formula, targets and rmse must be all present or all absent".into(),
                    ))
                }
            };
            if k == 0 {
                template.end = fit;
            } else {
                template.bif = fit;
            }
        }
        if template.end.is_none() && template.bif.is_none() {
            return Err(err(1, "template has no formulas".into()));
        }
        Ok(template)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Mean squared error of equal-length, non-empty vectors.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("mse of empty vectors"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Nine significant digits, without trailing zeros.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    if !(-4..15).contains(&magnitude) {
        let s = format!("{v:.8e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minutiae::{BifurcationPoint, EndPoint};

    fn end(x: i32, angle: f64, y: Option<i32>) -> EndPoint {
        EndPoint { x, y, angle }
    }

    fn tree(kind: Kind, s: &str) -> ProgramTree {
        ProgramTree::parse_prefix(s, &kind.naming_terminals()).unwrap()
    }

    fn identity_template() -> Template {
        Template {
            end: Some(KindFormula {
                formula: tree(Kind::End, "x"),
                targets: vec![1.0, 2.0, 3.0],
                training_rmse: 0.0,
            }),
            bif: None,
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5);
        assert_eq!(mse(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn format_sig9_examples() {
        assert_eq!(format_sig9(48.0), "48");
        assert_eq!(format_sig9(0.976912345678), "0.976912346");
        assert_eq!(format_sig9(-1234.5), "-1234.5");
        assert_eq!(format_sig9(1e20), "1e20");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        for v in [0.1, 123456.789012, 3.0e-3, 7.25e14, 9.99999999951] {
            let back: f64 = format_sig9(v).parse().unwrap();
            assert!((back - v).abs() <= v.abs() * 1e-8, "{v}");
        }
    }

    #[test]
    fn single_point_query_gets_constant_formula() {
        let query = MinutiaeSet::new(vec![end(147, -1.05, Some(48))], vec![]);
        let cfg = EvolutionConfig {
            max_generations: 0,
            population_size: 10,
            ..Default::default()
        };
        let t = build_template(&query, &cfg).unwrap();
        let fit = t.end.as_ref().unwrap();
        assert_eq!(fit.training_rmse, 0.0);
        assert_eq!(fit.targets, vec![48.0]);
        assert!(t.bif.is_none());
    }

    #[test]
    fn empty_query_is_rejected() {
        assert!(build_template(&MinutiaeSet::default(), &EvolutionConfig::default()).is_err());
        let no_y = MinutiaeSet::new(vec![end(1, 0.0, None), end(2, 0.0, None)], vec![]);
        assert!(build_template(&no_y, &EvolutionConfig::default()).is_err());
    }

    #[test]
    fn candidate_evaluation() {
        let t = identity_template();
        let cand = MinutiaeSet::new(vec![end(86, -2.62, None), end(158, -0.52, None)], vec![]);
        let (e, b) = t.evaluate_candidate(&cand).unwrap();
        assert_eq!(e, vec![86.0, 158.0]);
        assert!(b.is_empty());
        let (e, b) = t.evaluate_candidate(&MinutiaeSet::default()).unwrap();
        assert!(e.is_empty() && b.is_empty());

        let with_bif = MinutiaeSet::new(
            vec![],
            vec![BifurcationPoint {
                x: 1,
                y: None,
                angle1: 0.0,
                angle2: 0.0,
                angle3: 0.0,
            }],
        );
        assert!(matches!(
            t.evaluate_candidate(&with_bif),
            Err(Error::MissingFormula("bif"))
        ));
    }

    #[test]
    fn strict_and_prefix_policies() {
        let t = identity_template();
        let exact = MinutiaeSet::new(
            (1..=3).map(|x| end(x, 0.0, None)).collect(),
            vec![],
        );
        let strict = MatchConfig::default();
        let r = t.decide(&exact, &strict).unwrap();
        assert_eq!(r.decision, Decision::Match);
        assert_eq!(r.end.outcome, KindOutcome::Scored { mse: 0.0, penalty: 0.0 });
        assert_eq!(r.bif.outcome, KindOutcome::NotCovered);

        let longer = MinutiaeSet::new((1..=4).map(|x| end(x, 0.0, None)).collect(), vec![]);
        let r = t.decide(&longer, &strict).unwrap();
        assert_eq!(r.end.outcome, KindOutcome::CountMismatch);
        assert_eq!(r.decision, Decision::NonMatch);

        let prefix = MatchConfig {
            count_policy: CountPolicy::PairPrefix,
            mse_threshold: 10.0,
            ..strict
        };
        let r = t.decide(&longer, &prefix).unwrap();
        assert_eq!(r.end.outcome, KindOutcome::Scored { mse: 0.0, penalty: 10.0 });
        assert_eq!(r.decision, Decision::Match);
        let r = t.decide(&MinutiaeSet::default(), &prefix).unwrap();
        assert_eq!(r.end.outcome, KindOutcome::Scored { mse: 0.0, penalty: 30.0 });
        assert_eq!(r.decision, Decision::NonMatch);
    }

    #[test]
    fn own_y_mode() {
        let t = identity_template();
        let cfg = MatchConfig {
            comparison_mode: ComparisonMode::OwnY,
            ..Default::default()
        };
        let cand = MinutiaeSet::new(
            vec![end(5, 0.0, Some(5)), end(8, 0.0, Some(6)), end(9, 0.0, Some(9))],
            vec![],
        );
        let r = t.decide(&cand, &cfg).unwrap();
        assert_eq!(r.end.targets, vec![5.0, 6.0, 9.0]);
        assert_eq!(r.end.outcome.score(), Some(4.0 / 3.0));
        let no_y = MinutiaeSet::new((1..=3).map(|x| end(x, 0.0, None)).collect(), vec![]);
        assert!(t.decide(&no_y, &cfg).is_err());
    }

    #[test]
    fn template_text_round_trip() {
        let t = Template {
            end: Some(KindFormula {
                formula: tree(Kind::End, "(+ (* x angle) -3)"),
                targets: vec![48.0, 101.0],
                training_rmse: 0.123456789,
            }),
            bif: None,
        };
        let text = t.to_text();
        assert_eq!(
            text,
            "end: (+ (* x angle) -3)\nbif: -\nend_targets: 48,101\nbif_targets:\n\
             end_training_rmse: 0.123456789\nbif_training_rmse: -\n"
        );
        assert_eq!(Template::parse(&text).unwrap(), t);
    }

    #[test]
    fn template_parse_errors() {
        let line_of = |text: &str| match Template::parse(text) {
            Err(Error::Format { line, .. }) => line,
            other => panic!("expected format error, got {other:?}"),
        };
        assert_eq!(line_of("bif: -\n"), 1);
        assert_eq!(line_of(""), 1);
        assert_eq!(line_of("end: (+ x\nbif: -\n"), 1);
        assert_eq!(
            line_of("end: x\nbif: -\nend_targets: 1,zz\nbif_targets:\nend_training_rmse: 0\nbif_training_rmse: -\n"),
            3
        );
        assert_eq!(
            line_of("end: x\nbif: -\nend_targets: 1\nbif_targets:\nend_training_rmse: 0\n"),
            6
        );
        assert_eq!(
            line_of("end: -\nbif: -\nend_targets:\nbif_targets:\nend_training_rmse: -\nbif_training_rmse: -\n"),
            1
        );
        assert_eq!(
            line_of("end: x\nbif: -\nend_targets:\nbif_targets:\nend_training_rmse: 0\nbif_training_rmse: -\n"),
            1
        );
    }
}
