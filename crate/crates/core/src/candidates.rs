//! Per-city candidate shortlists shared by the nearness pipelines and the
//! local search.
//!
//! Scores are oriented so that larger means more promising: P-nearness
//! stores the relaxed edge strengths directly, while the α-nearness and
//! plain-distance sources store negated values so every list is
//! non-increasing in score.

use crate::error::{Error, Result};
use std::fmt::Write as _;

/// Which pipeline produced a candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    PNearness,
    AlphaNearness,
    Distance,
}

impl CandidateSource {
    pub fn label(&self) -> &'static str {
        match self {
            CandidateSource::PNearness => "p-nearness",
            CandidateSource::AlphaNearness => "alpha-nearness",
            CandidateSource::Distance => "distance",
        }
    }
}

/// One ranked neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub city: usize,
    pub score: f64,
}

/// Ranked candidate lists, one per city.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSets {
    lists: Vec<Vec<Candidate>>,
    pub source: CandidateSource,
    /// Homotopy weight the lists were built at, when applicable.
    pub lambda: Option<f64>,
}

impl CandidateSets {
    /// Wrap lists after checking the structural invariants: every list has
    /// exactly `m` distinct entries, none self-referential, scores
    /// non-increasing.
    pub fn new(
        lists: Vec<Vec<Candidate>>,
        source: CandidateSource,
        lambda: Option<f64>,
    ) -> Result<Self> {
        let n = lists.len();
        let m = lists.first().map(|l| l.len()).unwrap_or(0);
        for (city, list) in lists.iter().enumerate() {
            if list.len() != m {
                return Err(Error::InvalidParameter(format!(
                    "city {city} has {} candidates, expected {m}",
                    list.len()
                )));
            }
            let mut seen = vec![false; n];
            let mut prev = f64::INFINITY;
            for c in list {
                if c.city == city || c.city >= n || seen[c.city] {
                    return Err(Error::InvalidParameter(format!(
                        "bad candidate {} for city {city}",
                        c.city
                    )));
                }
                seen[c.city] = true;
                if c.score > prev {
                    return Err(Error::InvalidParameter(format!(
                        "scores increase within city {city}'s list"
                    )));
                }
                prev = c.score;
            }
        }
        Ok(CandidateSets {
            lists,
            source,
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.lists.len()
    }

    pub fn m(&self) -> usize {
        self.lists.first().map(|l| l.len()).unwrap_or(0)
    }

    pub fn list(&self, city: usize) -> &[Candidate] {
        &self.lists[city]
    }

    pub fn lists(&self) -> &[Vec<Candidate>] {
        &self.lists
    }

    /// Symmetrized adjacency: edge (i,j) present when either endpoint lists
    /// the other. This is the graph the connectivity checks and the k-opt
    /// edge restriction operate on.
    pub fn symmetric_adjacency(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut adj = nalgebra::DMatrix::zeros(n, n);
        for (i, list) in self.lists.iter().enumerate() {
            for c in list {
                adj[(i, c.city)] = 1.0;
                adj[(c.city, i)] = 1.0;
            }
        }
        adj
    }

    /// Symmetrized neighbor lists: for each city, its own candidates first
    /// (rank order), then cities listing it (ascending index).
    pub fn symmetric_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .lists
            .iter()
            .map(|l| l.iter().map(|c| c.city).collect())
            .collect();
        for (i, list) in self.lists.iter().enumerate() {
            for c in list {
                if !out[c.city].contains(&i) {
                    out[c.city].push(i);
                }
            }
        }
        out
    }

    /// Text form: one line per city, `city: j₁(score₁) j₂(score₂) …` with
    /// 1-based city numbers.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, list) in self.lists.iter().enumerate() {
            let _ = write!(s, "{}:", i + 1);
            for c in list {
                let _ = write!(s, " {}({:.6})", c.city + 1, c.score);
            }
            s.push('\n');
        }
        s
    }
}

/// Build ranked lists from a dense score matrix, larger scores first, ties
/// broken by smaller city index.
pub fn rank_by_score(
    scores: &nalgebra::DMatrix<f64>,
    m: usize,
    source: CandidateSource,
    lambda: Option<f64>,
) -> Result<CandidateSets> {
    let n = scores.nrows();
    if m < 1 || m > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "m = {m} out of range 1..={}",
            n - 1
        )));
    }
    let mut lists = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<Candidate> = (0..n)
            .filter(|&j| j != i)
            .map(|j| Candidate {
                city: j,
                score: scores[(i, j)],
            })
            .collect();
        row.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("finite scores")
                .then(a.city.cmp(&b.city))
        });
        row.truncate(m);
        lists.push(row);
    }
    CandidateSets::new(lists, source, lambda)
}

/// Distance-ranked candidate sets (scores are negated distances).
pub fn distance_candidates(
    d: &crate::instance::DistanceMatrix,
    m: usize,
) -> Result<CandidateSets> {
    let scores = -d.matrix().clone();
    rank_by_score(&scores, m, CandidateSource::Distance, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_distance_matrix, random_instance};

    #[test]
    fn rank_and_truncate() {
        let scores = nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 2.0, 5.0, 2.0, 0.0, 1.0, 5.0, 1.0, 0.0],
        );
        let sets = rank_by_score(&scores, 2, CandidateSource::PNearness, None).unwrap();
        assert_eq!(sets.list(0)[0].city, 2);
        assert_eq!(sets.list(0)[1].city, 1);
        assert_eq!(sets.m(), 2);
    }

    #[test]
    fn ties_prefer_smaller_index() {
        let scores = nalgebra::DMatrix::from_element(4, 4, 1.0);
        let sets = rank_by_score(&scores, 2, CandidateSource::PNearness, None).unwrap();
        assert_eq!(sets.list(3)[0].city, 0);
        assert_eq!(sets.list(3)[1].city, 1);
    }

    #[test]
    fn m_out_of_range() {
        let scores = nalgebra::DMatrix::zeros(4, 4);
        assert!(rank_by_score(&scores, 0, CandidateSource::Distance, None).is_err());
        assert!(rank_by_score(&scores, 4, CandidateSource::Distance, None).is_err());
    }

    #[test]
    fn text_format_shape() {
        let d = build_distance_matrix(&random_instance(5, 1)).unwrap();
        let sets = distance_candidates(&d, 2).unwrap();
        let text = sets.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("1:"));
        assert_eq!(lines[2].matches('(').count(), 2);
    }

    #[test]
    fn symmetric_adjacency_is_symmetric() {
        let d = build_distance_matrix(&random_instance(8, 4)).unwrap();
        let sets = distance_candidates(&d, 3).unwrap();
        let adj = sets.symmetric_adjacency();
        assert_eq!(adj, adj.transpose());
        for i in 0..8 {
            assert_eq!(adj[(i, i)], 0.0);
        }
    }
}
