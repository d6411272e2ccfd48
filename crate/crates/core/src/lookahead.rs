//! UCP-style lookahead way allocation over per-way metric tables.
//!
//! Every application starts with one way. Each step grants one more way to
//! the application whose metric drops the most with it. When no grant
//! lowers any metric, the remaining ways are handed out round-robin.

use thiserror::Error;

use crate::profile::AppProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LookaheadError {
    #[error("budget of {budget} ways cannot give one way to each of {apps} applications")]
    BudgetTooSmall { budget: usize, apps: usize },
    #[error("metric tables must all cover the same way counts (expected {expected}, app {app} has {found})")]
    Ragged { app: usize, expected: usize, found: usize },
    #[error("metric table of app {app} has a non-finite value")]
    NonFinite { app: usize },
    #[error("metric tables must cover at least one way")]
    EmptyTable,
}

/// Lower-is-better metric per application, indexed by `ways - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    rows: Vec<Vec<f64>>,
}

impl MetricTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, LookaheadError> {
        if let Some(first) = rows.first() {
            if first.is_empty() {
                return Err(LookaheadError::EmptyTable);
            }
            for (app, row) in rows.iter().enumerate() {
                if row.len() != first.len() {
                    return Err(LookaheadError::Ragged {
                        app,
                        expected: first.len(),
                        found: row.len(),
                    });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(LookaheadError::NonFinite { app });
                }
            }
        }
        Ok(MetricTable { rows })
    }

    /// Table built from the slowdown curves of `profiles`.
    pub fn from_slowdowns<'a, I>(profiles: I) -> Result<Self, LookaheadError>
    where
        I: IntoIterator<Item = &'a AppProfile>,
    {
        Self::new(profiles.into_iter().map(|p| p.slowdown().to_vec()).collect())
    }

    pub fn apps(&self) -> usize {
        self.rows.len()
    }

    /// Way counts each row covers.
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Metric of `app` holding `ways` ways.
    pub fn value(&self, app: usize, ways: usize) -> f64 {
        self.rows[app][ways - 1]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Ways per application, in application order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct WayAssignment(pub Vec<usize>);

impl WayAssignment {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl std::ops::Index<usize> for WayAssignment {
    type Output = usize;

    fn index(&self, app: usize) -> &usize {
        &self.0[app]
    }
}

/// One preferential grant made by the greedy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grant {
    pub app: usize,
    pub utility: f64,
}

pub fn lookahead(tables: &MetricTable, budget: usize) -> Result<WayAssignment, LookaheadError> {
    lookahead_traced(tables, budget).map(|(w, _)| w)
}

/// [`lookahead`] that also returns the preferential grants in the order
/// they were made (round-robin leftovers are not included).
pub fn lookahead_traced(tables: &MetricTable, budget: usize) -> Result<(WayAssignment, Vec<Grant>), LookaheadError> {
    let n = tables.apps();
    if budget < n {
        return Err(LookaheadError::BudgetTooSmall { budget, apps: n });
    }
    if n == 0 {
        return Ok((WayAssignment::default(), Vec::new()));
    }
    let width = tables.width();
    let mut ways = vec![1usize; n];
    let mut remaining = budget - n;
    let mut grants = Vec::new();

    while remaining > 0 {
        let mut best: Option<Grant> = None;
        for (app, &w) in ways.iter().enumerate() {
            if w >= width {
                continue;
            }
            let utility = tables.value(app, w) - tables.value(app, w + 1);
            // strict comparison keeps the lowest index on ties
            if utility > 0.0 && best.is_none_or(|b| utility > b.utility) {
                best = Some(Grant { app, utility });
            }
        }
        let Some(grant) = best else { break };
        ways[grant.app] += 1;
        remaining -= 1;
        grants.push(grant);
    }

    while remaining > 0 && ways.iter().any(|&w| w < width) {
        for w in ways.iter_mut() {
            if remaining == 0 {
                break;
            }
            if *w < width {
                *w += 1;
                remaining -= 1;
            }
        }
    }

    Ok((WayAssignment(ways), grants))
}

/// Lookahead fed with the slowdown curves of the given (sensitive) apps.
pub fn ucp_slowdown(profiles: &[AppProfile], budget: usize) -> Result<WayAssignment, LookaheadError> {
    lookahead(&MetricTable::from_slowdowns(profiles)?, budget)
}
