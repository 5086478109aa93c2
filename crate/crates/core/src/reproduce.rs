//! Enrolls the fixture query and matches it against the three fixture
//! candidates.

use crate::error::Result;
use crate::evolve::EvolutionConfig;
use crate::fixtures;
use crate::matching::{build_template, Decision, MatchConfig, MatchReport, Template};

/// Image 2 is the query itself; images 1 and 3 are other fingers.
pub const EXPECTED_DECISIONS: [Decision; 3] =
    [Decision::NonMatch, Decision::Match, Decision::NonMatch];

#[derive(Clone, Debug)]
pub struct Reproduction {
    pub template: Template,
    /// Reports for images 1, 2 and 3.
    pub reports: Vec<MatchReport>,
}

impl Reproduction {
    pub fn decisions(&self) -> Vec<Decision> {
        self.reports.iter().map(|r| r.decision).collect()
    }

    pub fn matches_expected(&self) -> bool {
        self.decisions() == EXPECTED_DECISIONS
    }
}

pub fn reproduce(evo: &EvolutionConfig, config: &MatchConfig) -> Result<Reproduction> {
    let template = build_template(&fixtures::query_set(), evo)?;
    let reports = (1..=3)
        .map(|i| template.decide(&fixtures::image_set(i).expect("fixture image"), config))
        .collect::<Result<_>>()?;
    Ok(Reproduction { template, reports })
}
