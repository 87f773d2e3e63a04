//! TSP instances, distance matrices, tours, and the two cost forms.
//!
//! An instance comes either from a TSPLIB file (`EUC_2D`, `CEIL_2D`, or
//! `EXPLICIT` edge weights) or from the seeded uniform generator. Costs can
//! be evaluated in the plain sum form over a city ordering or in the trace
//! form `tr(Dᵀ Pᵀ T P)`, which double-counts every undirected edge and is
//! the form the continuous relaxations work with.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How coordinate pairs are turned into edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounding {
    /// TSPLIB nearest-integer rule: `(int)(x + 0.5)`.
    Nint,
    /// TSPLIB `CEIL_2D` rule.
    Ceil,
    /// No rounding; used by the random-instance generator.
    Exact,
}

/// City data backing an instance: planar coordinates or an explicit matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceData {
    Coords {
        points: Vec<[f64; 2]>,
        rounding: Rounding,
    },
    Explicit(DMatrix<f64>),
}

/// A symmetric TSP instance with at least three cities.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub n: usize,
    pub data: InstanceData,
}

impl Instance {
    /// Instance from planar coordinates.
    pub fn from_coords(name: &str, points: Vec<[f64; 2]>, rounding: Rounding) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::TooSmall(format!(
                "{} cities; need at least 3",
                points.len()
            )));
        }
        Ok(Instance {
            name: name.to_string(),
            n: points.len(),
            data: InstanceData::Coords { points, rounding },
        })
    }

    /// Instance from an explicit symmetric matrix with zero diagonal.
    pub fn from_matrix(name: &str, matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n < 3 {
            return Err(Error::TooSmall(format!("{n} cities; need at least 3")));
        }
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} explicit matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        validate_distance_entries(&matrix)?;
        Ok(Instance {
            name: name.to_string(),
            n,
            data: InstanceData::Explicit(matrix),
        })
    }

    /// True when every edge weight is integral (TSPLIB-rounded coordinates
    /// or an all-integer explicit matrix). Reports print such costs without
    /// decimals.
    pub fn integral_weights(&self) -> bool {
        match &self.data {
            InstanceData::Coords { rounding, .. } => !matches!(rounding, Rounding::Exact),
            InstanceData::Explicit(m) => m.iter().all(|v| v.fract() == 0.0),
        }
    }
}

fn validate_distance_entries(matrix: &DMatrix<f64>) -> Result<()> {
    let n = matrix.nrows();
    for i in 0..n {
        if matrix[(i, i)] != 0.0 {
            return Err(Error::MalformedInput(format!(
                "nonzero diagonal entry d[{i}][{i}] = {}",
                matrix[(i, i)]
            )));
        }
        for j in 0..n {
            let d = matrix[(i, j)];
            if !d.is_finite() || d < 0.0 {
                return Err(Error::MalformedInput(format!(
                    "bad distance d[{i}][{j}] = {d}"
                )));
            }
            if matrix[(i, j)] != matrix[(j, i)] {
                return Err(Error::AsymmetricInput(format!(
                    "d[{i}][{j}] = {} but d[{j}][{i}] = {}",
                    matrix[(i, j)],
                    matrix[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Seeded instance with `n` cities uniform in the unit square.
///
/// Distances are exact Euclidean norms: unit-square coordinates would
/// collapse to {0, 1} under TSPLIB integer rounding.
pub fn random_instance(n: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    Instance {
        name: format!("random-n{n}-seed{seed}"),
        n,
        data: InstanceData::Coords {
            points,
            rounding: Rounding::Exact,
        },
    }
}

/// Symmetric nonnegative distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    entries: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Wrap a matrix, enforcing symmetry, zero diagonal, and finiteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} distance matrix",
                entries.nrows(),
                entries.ncols()
            )));
        }
        validate_distance_entries(&entries)?;
        Ok(DistanceMatrix { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// TSPLIB nearest-integer rounding.
fn nint(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Distance matrix for an instance.
///
/// `EUC_2D` coordinates use the TSPLIB nearest-integer rule, `CEIL_2D` the
/// ceiling rule, generator coordinates the exact norm; explicit matrices are
/// copied after symmetry validation.
pub fn build_distance_matrix(inst: &Instance) -> Result<DistanceMatrix> {
    let n = inst.n;
    let entries = match &inst.data {
        InstanceData::Coords { points, rounding } => {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let dx = points[i][0] - points[j][0];
                    let dy = points[i][1] - points[j][1];
                    let d = (dx * dx + dy * dy).sqrt();
                    let d = match rounding {
                        Rounding::Nint => nint(d),
                        Rounding::Ceil => d.ceil(),
                        Rounding::Exact => d,
                    };
                    m[(i, j)] = d;
                    m[(j, i)] = d;
                }
            }
            m
        }
        InstanceData::Explicit(m) => m.clone(),
    };
    DistanceMatrix::new(entries)
}

/// A Hamiltonian cycle given as a visiting order of all cities (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    order: Vec<usize>,
    cached_cost: Option<f64>,
}

impl Tour {
    /// Build a tour, checking that `order` is a permutation of `0..n`.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &c in &order {
            if c >= n || seen[c] {
                return Err(Error::MalformedInput(format!(
                    "order is not a permutation of 0..{n}"
                )));
            }
            seen[c] = true;
        }
        Ok(Tour {
            order,
            cached_cost: None,
        })
    }

    /// The identity tour 0,1,…,n−1.
    pub fn trivial(n: usize) -> Self {
        Tour {
            order: (0..n).collect(),
            cached_cost: None,
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn cached_cost(&self) -> Option<f64> {
        self.cached_cost
    }

    /// Attach a cost computed elsewhere; must match a recomputation.
    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cached_cost = Some(cost);
        self
    }

    /// Canonical representative of the cyclic/reversal equivalence class:
    /// rotate city 0 to the front, then orient so the second entry is the
    /// smaller of city 0's two neighbors.
    pub fn canonical(&self) -> Tour {
        let n = self.order.len();
        let start = self.order.iter().position(|&c| c == 0).unwrap();
        let mut order: Vec<usize> = (0..n).map(|i| self.order[(start + i) % n]).collect();
        if n > 2 && order[1] > order[n - 1] {
            order[1..].reverse();
        }
        Tour {
            order,
            cached_cost: self.cached_cost,
        }
    }
}

/// Sum-form tour cost: consecutive distances plus the closing edge.
pub fn tour_cost(d: &DistanceMatrix, tour: &Tour) -> Result<f64> {
    let n = d.n();
    if tour.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "tour over {} cities, matrix over {n}",
            tour.n()
        )));
    }
    let order = tour.order();
    let mut cost = 0.0;
    for i in 0..n {
        cost += d.get(order[i], order[(i + 1) % n]);
    }
    Ok(cost)
}

/// Adjacency matrix of a single Hamiltonian cycle (row and column sums 2).
#[derive(Debug, Clone, PartialEq)]
pub struct TourMatrix {
    entries: DMatrix<f64>,
}

impl TourMatrix {
    /// Adjacency matrix of the canonical undirected cycle 0–1–⋯–(n−1)–0.
    pub fn undirected_cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooSmall(format!("cycle on {n} vertices")));
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
        }
        Ok(TourMatrix { entries: m })
    }

    /// Adjacency matrix of a given tour.
    pub fn from_tour(tour: &Tour) -> Result<Self> {
        let n = tour.n();
        if n < 3 {
            return Err(Error::TooSmall(format!("cycle on {n} vertices")));
        }
        let mut m = DMatrix::zeros(n, n);
        let order = tour.order();
        for i in 0..n {
            let a = order[i];
            let b = order[(i + 1) % n];
            m[(a, b)] = 1.0;
            m[(b, a)] = 1.0;
        }
        Ok(TourMatrix { entries: m })
    }

    /// Validate an arbitrary 0/1 matrix as a single cycle and wrap it.
    pub fn from_adjacency(entries: DMatrix<f64>) -> Result<Self> {
        let tm = TourMatrix { entries };
        tm.extract_tour()?;
        Ok(tm)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Recover the visiting order, verifying the single-cycle invariants
    /// (symmetry, 0/1 entries, zero diagonal, all degrees 2, connected).
    pub fn extract_tour(&self) -> Result<Tour> {
        let n = self.entries.nrows();
        if n < 3 || self.entries.ncols() != n {
            return Err(Error::MalformedInput(format!(
                "{}x{} adjacency",
                self.entries.nrows(),
                self.entries.ncols()
            )));
        }
        for i in 0..n {
            let mut deg = 0;
            for j in 0..n {
                let v = self.entries[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::MalformedInput(format!("entry ({i},{j}) = {v}")));
                }
                if v != self.entries[(j, i)] {
                    return Err(Error::AsymmetricInput(format!("entry ({i},{j})")));
                }
                if v == 1.0 {
                    deg += 1;
                }
            }
            if self.entries[(i, i)] != 0.0 {
                return Err(Error::MalformedInput(format!("self-loop at {i}")));
            }
            if deg != 2 {
                return Err(Error::MalformedInput(format!("vertex {i} has degree {deg}")));
            }
        }
        // Walk the cycle; it must close after visiting all n vertices.
        let mut order = Vec::with_capacity(n);
        let mut prev = usize::MAX;
        let mut cur = 0usize;
        for _ in 0..n {
            order.push(cur);
            let next = (0..n)
                .find(|&j| self.entries[(cur, j)] == 1.0 && j != prev)
                .expect("degree-2 vertex has a next neighbor");
            prev = cur;
            cur = next;
        }
        if cur != 0 {
            return Err(Error::MalformedInput(
                "adjacency is not a single cycle".to_string(),
            ));
        }
        Tour::new(order)
    }
}

/// Adjacency matrix of the directed cycle 0→1→⋯→(n−1)→0 (row sums 1).
/// Provided for completeness next to [`TourMatrix::undirected_cycle`]; the
/// symmetric pipeline does not consume it.
pub fn directed_cycle_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, (i + 1) % n)] = 1.0;
    }
    m
}

/// Permutation matrix encoding a tour: row p has its 1 in column `order[p]`,
/// so `Pᵀ T P` is the tour's adjacency matrix for the canonical cycle `T`.
pub fn permutation_from_tour(tour: &Tour) -> DMatrix<f64> {
    let n = tour.n();
    let mut p = DMatrix::zeros(n, n);
    for (row, &city) in tour.order().iter().enumerate() {
        p[(row, city)] = 1.0;
    }
    p
}

/// Tour encoded by a permutation matrix (inverse of [`permutation_from_tour`]).
pub fn tour_from_permutation(p: &DMatrix<f64>) -> Result<Tour> {
    let n = p.nrows();
    let mut order = Vec::with_capacity(n);
    for row in 0..n {
        let mut col = None;
        for j in 0..n {
            let v = p[(row, j)];
            if v == 1.0 {
                if col.is_some() {
                    return Err(Error::MalformedInput(format!("row {row} has two ones")));
                }
                col = Some(j);
            } else if v != 0.0 {
                return Err(Error::MalformedInput(format!(
                    "entry ({row},{j}) = {v} is not 0/1"
                )));
            }
        }
        order.push(col.ok_or_else(|| Error::MalformedInput(format!("row {row} has no one")))?);
    }
    Tour::new(order)
}

/// Trace-form cost `tr(Dᵀ Pᵀ T P)`.
///
/// With `T` the undirected cycle matrix and `P` a permutation matrix this is
/// exactly twice the sum-form cost of the encoded tour (each undirected edge
/// is counted from both endpoints).
pub fn trace_cost(d: &DistanceMatrix, t: &TourMatrix, p: &DMatrix<f64>) -> Result<f64> {
    let n = d.n();
    if t.n() != n || p.nrows() != n || p.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "trace_cost with D {n}x{n}, T {}x{}, P {}x{}",
            t.n(),
            t.n(),
            p.nrows(),
            p.ncols()
        )));
    }
    let h = p.transpose() * t.matrix() * p;
    Ok((d.matrix().transpose() * h).trace())
}

/// Largest city count accepted by the exhaustive optimum search.
pub const BRUTE_FORCE_MAX_N: usize = 12;

/// Globally optimal tour by exhaustive enumeration with the first city fixed.
///
/// Capped at n = 12; the factorial blow-up past that is beyond what tests
/// can afford.
pub fn brute_force_optimum(d: &DistanceMatrix) -> Result<Tour> {
    let n = d.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge(format!(
            "brute force capped at n = {BRUTE_FORCE_MAX_N}, got {n}"
        )));
    }
    if n < 3 {
        return Err(Error::TooSmall(format!("n = {n}")));
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best_order: Vec<usize> = (0..n).collect();
    let mut best_cost = f64::INFINITY;
    permute_heap(&mut rest, &mut |perm| {
        let mut cost = d.get(0, perm[0]);
        for w in perm.windows(2) {
            cost += d.get(w[0], w[1]);
        }
        cost += d.get(perm[n - 2], 0);
        if cost < best_cost {
            best_cost = cost;
            best_order.truncate(1);
            best_order.extend_from_slice(perm);
        }
    });
    Ok(Tour::new(best_order)?.with_cost(best_cost))
}

/// Heap's algorithm; calls `f` on every permutation of `items`.
fn permute_heap(items: &mut [usize], f: &mut impl FnMut(&[usize])) {
    let k = items.len();
    if k <= 1 {
        f(items);
        return;
    }
    let mut c = vec![0usize; k];
    f(items);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            f(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// TSPLIB parsing
// ---------------------------------------------------------------------------

/// Parse a TSPLIB-format instance.
///
/// Supported: `TYPE : TSP`, `EDGE_WEIGHT_TYPE` in `EUC_2D`, `CEIL_2D`, or
/// `EXPLICIT` with `EDGE_WEIGHT_FORMAT` in `FULL_MATRIX`, `UPPER_ROW`,
/// `LOWER_DIAG_ROW`.
pub fn parse_tsplib(text: &str) -> Result<Instance> {
    let mut name = String::new();
    let mut dimension: Option<usize> = None;
    let mut weight_type: Option<String> = None;
    let mut weight_format: Option<String> = None;
    let mut coords: Vec<(usize, f64, f64)> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();

    #[derive(PartialEq)]
    enum Section {
        Header,
        NodeCoords,
        EdgeWeights,
        Skip,
    }
    let mut section = Section::Header;

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        let upper = line.to_ascii_uppercase();
        // Section markers are single keywords without a colon.
        if !line.contains(':') {
            match upper.as_str() {
                "NODE_COORD_SECTION" => {
                    section = Section::NodeCoords;
                    continue;
                }
                "EDGE_WEIGHT_SECTION" => {
                    section = Section::EdgeWeights;
                    continue;
                }
                "DISPLAY_DATA_SECTION" | "DEPOT_SECTION" | "FIXED_EDGES_SECTION"
                | "TOUR_SECTION" => {
                    section = Section::Skip;
                    continue;
                }
                _ => {}
            }
        }
        match section {
            Section::Header => {
                let (key, value) = match line.split_once(':') {
                    Some((k, v)) => (k.trim().to_ascii_uppercase(), v.trim().to_string()),
                    None => {
                        return Err(Error::MalformedInput(format!(
                            "unexpected header line: {line}"
                        )))
                    }
                };
                match key.as_str() {
                    "NAME" => name = value,
                    "TYPE" => {
                        if !value.eq_ignore_ascii_case("TSP") {
                            return Err(Error::UnsupportedFormat(format!("TYPE {value}")));
                        }
                    }
                    "DIMENSION" => {
                        dimension = Some(value.parse().map_err(|_| {
                            Error::MalformedInput(format!("DIMENSION {value}"))
                        })?);
                    }
                    "EDGE_WEIGHT_TYPE" => weight_type = Some(value.to_ascii_uppercase()),
                    "EDGE_WEIGHT_FORMAT" => weight_format = Some(value.to_ascii_uppercase()),
                    // COMMENT, DISPLAY_DATA_TYPE, NODE_COORD_TYPE, ...
                    _ => {}
                }
            }
            Section::NodeCoords => {
                let mut it = line.split_whitespace();
                let idx: usize = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::MalformedInput(format!("node line: {line}")))?;
                let x: f64 = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::MalformedInput(format!("node line: {line}")))?;
                let y: f64 = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::MalformedInput(format!("node line: {line}")))?;
                coords.push((idx, x, y));
            }
            Section::EdgeWeights => {
                for tok in line.split_whitespace() {
                    let w: f64 = tok
                        .parse()
                        .map_err(|_| Error::MalformedInput(format!("weight token: {tok}")))?;
                    weights.push(w);
                }
            }
            Section::Skip => {}
        }
    }

    let n = dimension.ok_or_else(|| Error::MalformedInput("missing DIMENSION".to_string()))?;
    if n < 3 {
        return Err(Error::TooSmall(format!("DIMENSION {n}")));
    }
    let wt = weight_type
        .ok_or_else(|| Error::MalformedInput("missing EDGE_WEIGHT_TYPE".to_string()))?;

    match wt.as_str() {
        "EUC_2D" | "CEIL_2D" => {
            if coords.len() != n {
                return Err(Error::MalformedInput(format!(
                    "DIMENSION {n} but {} node lines",
                    coords.len()
                )));
            }
            let mut points = vec![[f64::NAN, f64::NAN]; n];
            for (idx, x, y) in coords {
                if idx == 0 || idx > n {
                    return Err(Error::MalformedInput(format!("node index {idx}")));
                }
                points[idx - 1] = [x, y];
            }
            if points.iter().any(|p| p[0].is_nan()) {
                return Err(Error::MalformedInput("duplicate node index".to_string()));
            }
            let rounding = if wt == "EUC_2D" {
                Rounding::Nint
            } else {
                Rounding::Ceil
            };
            Instance::from_coords(&name, points, rounding)
        }
        "EXPLICIT" => {
            let fmt = weight_format
                .ok_or_else(|| Error::MalformedInput("missing EDGE_WEIGHT_FORMAT".to_string()))?;
            let matrix = assemble_explicit(n, &fmt, &weights)?;
            Instance::from_matrix(&name, matrix)
        }
        other => Err(Error::UnsupportedFormat(format!("EDGE_WEIGHT_TYPE {other}"))),
    }
}

fn assemble_explicit(n: usize, fmt: &str, weights: &[f64]) -> Result<DMatrix<f64>> {
    let expect = |count: usize| -> Result<()> {
        if weights.len() != count {
            return Err(Error::MalformedInput(format!(
                "{fmt} needs {count} weights, got {}",
                weights.len()
            )));
        }
        Ok(())
    };
    let mut m = DMatrix::zeros(n, n);
    match fmt {
        "FULL_MATRIX" => {
            expect(n * n)?;
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = weights[i * n + j];
                }
            }
        }
        "UPPER_ROW" => {
            expect(n * (n - 1) / 2)?;
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    m[(i, j)] = weights[k];
                    m[(j, i)] = weights[k];
                    k += 1;
                }
            }
        }
        "LOWER_DIAG_ROW" => {
            expect(n * (n + 1) / 2)?;
            let mut k = 0;
            for i in 0..n {
                for j in 0..=i {
                    m[(i, j)] = weights[k];
                    m[(j, i)] = weights[k];
                    k += 1;
                }
            }
        }
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "EDGE_WEIGHT_FORMAT {other}"
            )))
        }
    }
    Ok(m)
}
