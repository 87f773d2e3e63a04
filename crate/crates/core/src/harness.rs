//! Experiment driver: build candidate sets by each method, run budgeted
//! k-opt under identical protocols, and report costs, improvements, and win
//! rates.
//!
//! Protocol symmetry is the whole point: both methods get the same instance
//! bytes, the same seed for their initial tours, the same candidate-set
//! size, and the same attempted-move budget. Costs are reported raw, even
//! when a budgeted run is far from converged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSets;
use crate::error::{Error, Result};
use crate::instance::{build_distance_matrix, random_instance, tour_cost, Instance, TourMatrix};
use crate::localsearch::{initial_tour, k_opt_search, SearchConfig};
use crate::procrustes::{homotopy_candidates, solve_procrustes};
use crate::spanning::alpha_candidates;

/// Head-to-head outcome on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub instance: String,
    pub alpha_cost: f64,
    pub p_cost: f64,
    /// `(alpha − p) / alpha × 100`; negative when P-nearness is worse.
    pub improvement_pct: f64,
    /// Whether costs are integral in the instance's native units.
    pub integral: bool,
}

impl ComparisonRow {
    pub fn from_costs(instance: &str, alpha_cost: f64, p_cost: f64, integral: bool) -> Self {
        ComparisonRow {
            instance: instance.to_string(),
            alpha_cost,
            p_cost,
            improvement_pct: improvement_pct(alpha_cost, p_cost),
            integral,
        }
    }
}

/// Improvement of the P-nearness cost over the α-nearness cost in percent.
pub fn improvement_pct(alpha_cost: f64, p_cost: f64) -> f64 {
    (alpha_cost - p_cost) / alpha_cost * 100.0
}

/// Aggregated comparison over a batch of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub rows: Vec<ComparisonRow>,
    /// Instances where P-nearness cost is strictly lower.
    pub win_count: usize,
    pub total: usize,
    pub m: usize,
    pub budget_factor: usize,
    pub base_seed: u64,
}

impl BatchReport {
    pub fn from_rows(rows: Vec<ComparisonRow>, m: usize, budget_factor: usize, base_seed: u64) -> Self {
        let win_count = rows.iter().filter(|r| r.p_cost < r.alpha_cost).count();
        let total = rows.len();
        BatchReport {
            rows,
            win_count,
            total,
            m,
            budget_factor,
            base_seed,
        }
    }
}

/// Both candidate pipelines for one instance.
pub struct NearnessSets {
    pub alpha: CandidateSets,
    pub p: CandidateSets,
}

/// Build α-nearness and homotopy P-nearness candidate sets for an instance.
pub fn build_nearness_sets(d: &crate::instance::DistanceMatrix, m: usize) -> Result<NearnessSets> {
    let alpha = alpha_candidates(d, m)?;
    let t = TourMatrix::undirected_cycle(d.n())?;
    let sol = solve_procrustes(d, &t)?;
    let p = homotopy_candidates(&sol.t_star, d, m)?;
    Ok(NearnessSets { alpha, p })
}

/// Run the fixed-budget protocol for one instance: per method, an initial
/// tour grown from that method's own candidate sets (same seed), then
/// `budget_factor·n` attempted k-opt moves.
pub fn compare_nearness(
    inst: &Instance,
    m: usize,
    budget_factor: usize,
    seed: u64,
) -> Result<ComparisonRow> {
    let d = build_distance_matrix(inst)?;
    let sets = build_nearness_sets(&d, m)?;
    let config = SearchConfig {
        move_budget: Some((budget_factor * inst.n) as u64),
        max_k: 3,
        rng_seed: seed,
    };
    let run = |cands: &CandidateSets| -> Result<f64> {
        let start = initial_tour(&d, cands, seed)?;
        let stats = k_opt_search(&d, &start, cands, &config)?;
        // Cost the canonical form so identical tours found by both methods
        // produce bit-identical sums.
        tour_cost(&d, &stats.final_tour.canonical())
    };
    let alpha_cost = run(&sets.alpha)?;
    let p_cost = run(&sets.p)?;
    Ok(ComparisonRow::from_costs(
        &inst.name,
        alpha_cost,
        p_cost,
        inst.integral_weights(),
    ))
}

/// Seeded batch of uniform random instances, compared in parallel.
pub fn random_batch(
    count: usize,
    n: usize,
    m: usize,
    budget_factor: usize,
    base_seed: u64,
) -> Result<BatchReport> {
    let rows: Result<Vec<ComparisonRow>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let inst = random_instance(n, base_seed.wrapping_add(i as u64));
            compare_nearness(&inst, m, budget_factor, base_seed.wrapping_add(i as u64))
        })
        .collect();
    Ok(BatchReport::from_rows(rows?, m, budget_factor, base_seed))
}

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidParameter(format!("format {other}"))),
        }
    }
}

fn format_cost(cost: f64, integral: bool) -> String {
    if integral {
        format!("{cost:.0}")
    } else {
        format!("{cost}")
    }
}

/// Serialize a batch report. CSV columns are
/// `instance,alpha_cost,p_cost,improvement_pct`, costs printed in the
/// instance's native precision; JSON mirrors the report structure.
pub fn export_report(report: &BatchReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Csv => {
            let mut s = String::from("instance,alpha_cost,p_cost,improvement_pct\n");
            for row in &report.rows {
                s.push_str(&format!(
                    "{},{},{},{:.2}\n",
                    row.instance,
                    format_cost(row.alpha_cost, row.integral),
                    format_cost(row.p_cost, row.integral),
                    row.improvement_pct
                ));
            }
            Ok(s.into_bytes())
        }
        ReportFormat::Json => {
            let s = serde_json::to_string_pretty(report)
                .map_err(|e| Error::NumericalFailure(format!("serialize: {e}")))?;
            Ok(s.into_bytes())
        }
    }
}

/// Parse a JSON report back (round-trip counterpart of [`export_report`]).
pub fn parse_report_json(bytes: &[u8]) -> Result<BatchReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::MalformedInput(format!("report JSON: {e}")))
}

/// Unbudgeted run: joint 2/3-opt local optimality with restarts, best tour
/// kept.
pub fn solve_to_convergence(
    d: &crate::instance::DistanceMatrix,
    cands: &CandidateSets,
    seed: u64,
    restarts: usize,
) -> Result<crate::localsearch::SearchStats> {
    let mut best: Option<crate::localsearch::SearchStats> = None;
    for r in 0..restarts.max(1) {
        let config = SearchConfig {
            move_budget: None,
            max_k: 3,
            rng_seed: seed.wrapping_add(r as u64),
        };
        let start = initial_tour(d, cands, seed.wrapping_add(r as u64))?;
        let stats = k_opt_search(d, &start, cands, &config)?;
        let cost = tour_cost(d, &stats.final_tour)?;
        let better = match &best {
            None => true,
            Some(b) => cost < tour_cost(d, &b.final_tour)?,
        };
        if better {
            best = Some(stats);
        }
    }
    Ok(best.expect("at least one restart"))
}
