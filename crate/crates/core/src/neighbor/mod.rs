//! Batched neighbor search with fixed-capacity, sentinel-padded output.
//!
//! Two construction strategies are provided: a brute-force double loop over
//! every pair inside a sample, and a cell list that bins atoms on a grid
//! with cell edge at least the cutoff, sorts them by cell id and scans the
//! 27 surrounding cells. Both produce the same pair set. A single grid spans
//! all samples; candidates from different samples are discarded when their
//! distance is checked.
//!
//! Unused slots of the output arrays hold the sentinel pair `(-1, -1)`, zero
//! displacement and zero distance.

mod brute;
mod cell;
mod grad;

pub use grad::{distance_pullback, distance_pullback_second};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::system::System;

/// Atom count at which [`Strategy::Auto`] switches from brute force to the cell list.
pub const AUTO_CELL_THRESHOLD: usize = 10_000;

/// Value stored in both index slots of an unused pair.
pub const SENTINEL: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Brute,
    Cell,
    Auto,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "brute" => Ok(Strategy::Brute),
            "cell" => Ok(Strategy::Cell),
            "auto" => Ok(Strategy::Auto),
            other => Err(format!("unknown strategy `{other}` (expected brute, cell or auto)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSpec {
    pub cutoff_lower: f64,
    pub cutoff_upper: f64,
    /// Maximum number of pairs the output can hold.
    pub capacity: usize,
    pub strategy: Strategy,
    pub include_self_loops: bool,
    /// Emit both `(i, j)` and `(j, i)` for every pair.
    pub full_list: bool,
    /// Sort pairs by `(i, j)`. Without it the order is unspecified.
    pub deterministic: bool,
}

impl NeighborSpec {
    pub fn new(cutoff_upper: f64, capacity: usize) -> Self {
        NeighborSpec {
            cutoff_lower: 0.0,
            cutoff_upper,
            capacity,
            strategy: Strategy::Auto,
            include_self_loops: false,
            full_list: false,
            deterministic: true,
        }
    }

    /// Capacity heuristic `n_atoms * max_num_neighbors`.
    pub fn capacity_for(n_atoms: usize, max_num_neighbors: usize) -> usize {
        (n_atoms * max_num_neighbors).max(1)
    }

    pub fn with_lower(mut self, cutoff_lower: f64) -> Self {
        self.cutoff_lower = cutoff_lower;
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_full_list(mut self, full: bool) -> Self {
        self.full_list = full;
        self
    }

    pub fn with_self_loops(mut self, loops: bool) -> Self {
        self.include_self_loops = loops;
        self
    }

    pub fn with_deterministic(mut self, deterministic: bool) -> Self {
        self.deterministic = deterministic;
        self
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_lower >= 0.0 && self.cutoff_lower < self.cutoff_upper)
            || !self.cutoff_upper.is_finite()
        {
            return Err(Error::InvalidNeighborSpec(format!(
                "require 0 <= cutoff_lower < cutoff_upper, got [{}, {}]",
                self.cutoff_lower, self.cutoff_upper
            )));
        }
        if self.capacity == 0 {
            return Err(Error::InvalidNeighborSpec("capacity must be at least 1".into()));
        }
        Ok(())
    }
}

/// A found pair before it is written into the padded arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Found {
    pub i: u32,
    pub j: u32,
    pub delta: Vec3,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub(crate) pairs: Vec<[i32; 2]>,
    pub(crate) deltas: Vec<Vec3>,
    pub(crate) distances: Vec<f64>,
    pub(crate) count: usize,
    pub(crate) n_atoms: usize,
    pub(crate) cutoff_lower: f64,
    pub(crate) cutoff_upper: f64,
    pub(crate) full_list: bool,
    pub(crate) strategy_used: Strategy,
    pub(crate) notice: Option<String>,
}

impl NeighborList {
    /// Pair indices for every slot, `(-1, -1)` past `count`.
    pub fn pairs(&self) -> &[[i32; 2]] {
        &self.pairs
    }

    /// Minimum-image displacements `r_i - r_j`.
    pub fn deltas(&self) -> &[Vec3] {
        &self.deltas
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Number of valid pairs.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn capacity(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn cutoff_lower(&self) -> f64 {
        self.cutoff_lower
    }

    pub fn cutoff_upper(&self) -> f64 {
        self.cutoff_upper
    }

    pub fn is_full(&self) -> bool {
        self.full_list
    }

    /// Strategy that actually ran (never `Auto`).
    pub fn strategy_used(&self) -> Strategy {
        self.strategy_used
    }

    /// Set when the cell strategy fell back to brute force.
    pub fn notice(&self) -> Option<&str> {
        self.notice.as_deref()
    }

    /// Iterator over valid `(slot, i, j)` triples.
    pub fn valid_pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.pairs[..self.count]
            .iter()
            .enumerate()
            .map(|(k, p)| (k, p[0] as usize, p[1] as usize))
    }

    /// A list without pairs, for models that never look at edges.
    pub fn empty(n_atoms: usize, cutoff_lower: f64, cutoff_upper: f64) -> NeighborList {
        NeighborList {
            pairs: Vec::new(),
            deltas: Vec::new(),
            distances: Vec::new(),
            count: 0,
            n_atoms,
            cutoff_lower,
            cutoff_upper,
            full_list: false,
            strategy_used: Strategy::Brute,
            notice: None,
        }
    }

    /// Copy of this list padded (or trimmed) to another capacity.
    pub fn with_capacity(&self, capacity: usize) -> Result<NeighborList> {
        if capacity < self.count {
            return Err(Error::Overflow {
                required: self.count,
                capacity,
            });
        }
        let mut out = self.clone();
        out.pairs.resize(capacity, [SENTINEL; 2]);
        out.deltas.resize(capacity, [0.0; 3]);
        out.distances.resize(capacity, 0.0);
        out.pairs.truncate(capacity);
        out.deltas.truncate(capacity);
        out.distances.truncate(capacity);
        Ok(out)
    }
}

/// Builds the neighbor list of `system` according to `spec`.
pub fn build_neighbor_list(system: &System, spec: &NeighborSpec) -> Result<NeighborList> {
    spec.validate()?;
    let cell = system.cell();
    if cell.is_periodic() {
        let half_width = cell.min_perpendicular_width() / 2.0;
        if spec.cutoff_upper > half_width {
            return Err(Error::CutoffTooLarge {
                cutoff: spec.cutoff_upper,
                half_width,
            });
        }
    }
    let n = system.len();
    let requested = match spec.strategy {
        Strategy::Auto if n < AUTO_CELL_THRESHOLD => Strategy::Brute,
        Strategy::Auto => Strategy::Cell,
        s => s,
    };

    let mut notice = None;
    let (mut found, strategy_used) = match requested {
        Strategy::Cell => match cell::CellGrid::new(system, spec.cutoff_upper) {
            Ok(grid) => (grid.search(system, spec), Strategy::Cell),
            Err(reason) => {
                notice = Some(format!("cell list unavailable ({reason}); used brute force"));
                (brute::search(system, spec), Strategy::Brute)
            }
        },
        _ => (brute::search(system, spec), Strategy::Brute),
    };

    if spec.include_self_loops {
        found.extend((0..n as u32).map(|i| Found {
            i,
            j: i,
            delta: [0.0; 3],
            distance: 0.0,
        }));
    }
    if spec.full_list {
        let mirrored: Vec<Found> = found
            .iter()
            .filter(|f| f.i != f.j)
            .map(|f| Found {
                i: f.j,
                j: f.i,
                delta: [-f.delta[0], -f.delta[1], -f.delta[2]],
                distance: f.distance,
            })
            .collect();
        found.extend(mirrored);
    }
    if found.len() > spec.capacity {
        return Err(Error::Overflow {
            required: found.len(),
            capacity: spec.capacity,
        });
    }
    if spec.deterministic {
        found.sort_unstable_by_key(|f| (f.i, f.j));
    }

    let count = found.len();
    let mut pairs = Vec::with_capacity(spec.capacity);
    let mut deltas = Vec::with_capacity(spec.capacity);
    let mut distances = Vec::with_capacity(spec.capacity);
    for f in &found {
        pairs.push([f.i as i32, f.j as i32]);
        deltas.push(f.delta);
        distances.push(f.distance);
    }
    pairs.resize(spec.capacity, [SENTINEL; 2]);
    deltas.resize(spec.capacity, [0.0; 3]);
    distances.resize(spec.capacity, 0.0);

    Ok(NeighborList {
        pairs,
        deltas,
        distances,
        count,
        n_atoms: n,
        cutoff_lower: spec.cutoff_lower,
        cutoff_upper: spec.cutoff_upper,
        full_list: spec.full_list,
        strategy_used,
        notice,
    })
}

/// Builds a list, growing the capacity to the required size on overflow.
pub fn build_neighbor_list_growing(system: &System, spec: &NeighborSpec) -> Result<NeighborList> {
    match build_neighbor_list(system, spec) {
        Err(Error::Overflow { required, .. }) => {
            let grown = spec.clone().with_capacity(required + required / 4 + 1);
            build_neighbor_list(system, &grown)
        }
        other => other,
    }
}

/// Strategy-independent form of a list: sentinels dropped, each pair stored
/// once with `i <= j`, sorted lexicographically.
pub fn canonicalize(pairs: &[[i32; 2]]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|p| p[0] >= 0 && p[1] >= 0)
        .map(|p| {
            let (a, b) = (p[0] as usize, p[1] as usize);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Canonical pairs of a list together with their distances.
pub fn canonical_with_distances(list: &NeighborList) -> Vec<(usize, usize, f64)> {
    let mut out: Vec<(usize, usize, f64)> = list
        .valid_pairs()
        .map(|(k, i, j)| (i.min(j), i.max(j), list.distances[k]))
        .collect();
    out.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out.dedup_by_key(|e| (e.0, e.1));
    out
}

#[inline]
pub(crate) fn in_range(d: f64, lower: f64, upper: f64) -> bool {
    d > lower && d <= upper
}
