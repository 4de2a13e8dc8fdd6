//! Bell scenarios, probability tables, Bell functionals and the non-signaling
//! diagnostics that operate on them.
//!
//! Probabilities are stored densely and indexed `(x, y, a, b)`: setting pairs in
//! x-major order, and within each pair outcome `a` major, `b` minor.
//!
//! Collins-Gisin (CG) vectors drop the last outcome of every setting. Their
//! ordering reads the CG table column by column: Alice's marginal column first
//! (`x` major, `a` minor), then for every Bob column `(y, b)` the Bob marginal
//! followed by the joint entries `(x, a)` of that column.

mod functional;
pub mod io;
mod signaling;

pub use functional::{cg_from_full, full_from_cg, BellFunctional, Form};
pub use signaling::{signaling_deltas, signaling_report_with_counts, SignalingDelta, SignalingReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on `Σ_{a,b} P(a,b|x,y) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Default tolerance of [`check_nonsignaling`].
pub const NONSIGNALING_TOL: f64 = 1e-9;
/// Default tolerance when comparing Bell values.
pub const VALUE_TOL: f64 = 1e-12;

/// A bipartite Bell scenario `{[o_a(0) o_a(1) ...] [o_b(0) ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    outputs_a: Vec<usize>,
    outputs_b: Vec<usize>,
}

impl Scenario {
    pub fn new(outputs_a: Vec<usize>, outputs_b: Vec<usize>) -> Result<Self> {
        if outputs_a.is_empty() || outputs_b.is_empty() {
            return Err(Error::InvalidScenario("each party needs at least one setting".into()));
        }
        if outputs_a.iter().chain(&outputs_b).any(|&o| o == 0) {
            return Err(Error::InvalidScenario("outcome counts must be >= 1".into()));
        }
        Ok(Self { outputs_a, outputs_b })
    }

    /// Same number of outcomes for every setting of both parties.
    pub fn uniform(inputs_a: usize, inputs_b: usize, outputs: usize) -> Result<Self> {
        Self::new(vec![outputs; inputs_a], vec![outputs; inputs_b])
    }

    /// The `{[3 3 3] [3 3 3]}` scenario.
    pub fn flagship() -> Self {
        Self {
            outputs_a: vec![3; 3],
            outputs_b: vec![3; 3],
        }
    }

    pub fn inputs_a(&self) -> usize {
        self.outputs_a.len()
    }

    pub fn inputs_b(&self) -> usize {
        self.outputs_b.len()
    }

    pub fn outputs_a(&self) -> &[usize] {
        &self.outputs_a
    }

    pub fn outputs_b(&self) -> &[usize] {
        &self.outputs_b
    }

    /// Number of entries of a full probability table.
    pub fn full_dim(&self) -> usize {
        let sa: usize = self.outputs_a.iter().sum();
        let sb: usize = self.outputs_b.iter().sum();
        sa * sb
    }

    fn cg_alice_count(&self) -> usize {
        self.outputs_a.iter().map(|o| o - 1).sum()
    }

    fn cg_bob_count(&self) -> usize {
        self.outputs_b.iter().map(|o| o - 1).sum()
    }

    /// Number of Collins-Gisin coordinates.
    pub fn cg_dim(&self) -> usize {
        let na = self.cg_alice_count();
        let nb = self.cg_bob_count();
        na * nb + na + nb
    }

    /// Number of deterministic local strategies, saturating at `u128::MAX`.
    pub fn strategy_count(&self) -> u128 {
        self.outputs_a
            .iter()
            .chain(&self.outputs_b)
            .fold(1u128, |acc, &o| acc.saturating_mul(o as u128))
    }

    /// Offset of the `(x, y)` block inside a full table.
    pub fn block_offset(&self, x: usize, y: usize) -> usize {
        let sb: usize = self.outputs_b.iter().sum();
        let before_x: usize = self.outputs_a[..x].iter().sum::<usize>() * sb;
        before_x + self.outputs_a[x] * self.outputs_b[..y].iter().sum::<usize>()
    }

    pub fn full_index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        debug_assert!(a < self.outputs_a[x] && b < self.outputs_b[y]);
        self.block_offset(x, y) + a * self.outputs_b[y] + b
    }

    fn alice_cg_offset(&self, x: usize) -> usize {
        self.outputs_a[..x].iter().map(|o| o - 1).sum()
    }

    fn bob_cg_offset(&self, y: usize) -> usize {
        self.outputs_b[..y].iter().map(|o| o - 1).sum()
    }

    /// CG index of Alice's marginal `P(a|x)`, `a < outputs_a[x] - 1`.
    pub fn cg_alice(&self, x: usize, a: usize) -> usize {
        debug_assert!(a + 1 < self.outputs_a[x]);
        self.alice_cg_offset(x) + a
    }

    fn cg_column_start(&self, y: usize, b: usize) -> usize {
        let na = self.cg_alice_count();
        na + (self.bob_cg_offset(y) + b) * (1 + na)
    }

    /// CG index of Bob's marginal `P(b|y)`, `b < outputs_b[y] - 1`.
    pub fn cg_bob(&self, y: usize, b: usize) -> usize {
        debug_assert!(b + 1 < self.outputs_b[y]);
        self.cg_column_start(y, b)
    }

    /// CG index of the joint `P(a,b|x,y)` with both outcomes below the last one.
    pub fn cg_joint(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        debug_assert!(a + 1 < self.outputs_a[x] && b + 1 < self.outputs_b[y]);
        self.cg_column_start(y, b) + 1 + self.alice_cg_offset(x) + a
    }

    /// Decodes a CG index back to its role.
    pub fn cg_entry(&self, index: usize) -> CgEntry {
        let na = self.cg_alice_count();
        if index < na {
            let mut rem = index;
            for (x, &o) in self.outputs_a.iter().enumerate() {
                if rem < o - 1 {
                    return CgEntry::Alice { x, a: rem };
                }
                rem -= o - 1;
            }
            unreachable!()
        }
        let col = (index - na) / (1 + na);
        let row = (index - na) % (1 + na);
        let mut rem = col;
        let mut yb = (0, 0);
        for (y, &o) in self.outputs_b.iter().enumerate() {
            if rem < o - 1 {
                yb = (y, rem);
                break;
            }
            rem -= o - 1;
        }
        if row == 0 {
            return CgEntry::Bob { y: yb.0, b: yb.1 };
        }
        let mut rem = row - 1;
        for (x, &o) in self.outputs_a.iter().enumerate() {
            if rem < o - 1 {
                return CgEntry::Joint { x, y: yb.0, a: rem, b: yb.1 };
            }
            rem -= o - 1;
        }
        unreachable!()
    }

    /// Expresses the full component `P(a,b|x,y)` of a non-signaling table as an
    /// affine function `constant + Σ coef · cg[index]` of its CG coordinates.
    pub fn full_in_cg(&self, x: usize, y: usize, a: usize, b: usize) -> (f64, Vec<(usize, f64)>) {
        let last_a = self.outputs_a[x] - 1;
        let last_b = self.outputs_b[y] - 1;
        match (a < last_a, b < last_b) {
            (true, true) => (0.0, vec![(self.cg_joint(x, y, a, b), 1.0)]),
            (false, true) => {
                let mut terms = vec![(self.cg_bob(y, b), 1.0)];
                terms.extend((0..last_a).map(|a2| (self.cg_joint(x, y, a2, b), -1.0)));
                (0.0, terms)
            }
            (true, false) => {
                let mut terms = vec![(self.cg_alice(x, a), 1.0)];
                terms.extend((0..last_b).map(|b2| (self.cg_joint(x, y, a, b2), -1.0)));
                (0.0, terms)
            }
            (false, false) => {
                let mut terms = Vec::new();
                terms.extend((0..last_a).map(|a2| (self.cg_alice(x, a2), -1.0)));
                terms.extend((0..last_b).map(|b2| (self.cg_bob(y, b2), -1.0)));
                for a2 in 0..last_a {
                    for b2 in 0..last_b {
                        terms.push((self.cg_joint(x, y, a2, b2), 1.0));
                    }
                }
                (1.0, terms)
            }
        }
    }

    /// Iterates `(x, y, a, b)` in storage order.
    pub fn full_indices(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        (0..self.inputs_a()).flat_map(move |x| {
            (0..self.inputs_b()).flat_map(move |y| {
                (0..self.outputs_a[x])
                    .flat_map(move |a| (0..self.outputs_b[y]).map(move |b| (x, y, a, b)))
            })
        })
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[usize]| v.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(" ");
        write!(f, "{{[{}] [{}]}}", join(&self.outputs_a), join(&self.outputs_b))
    }
}

/// Role of a CG coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgEntry {
    Alice { x: usize, a: usize },
    Bob { y: usize, b: usize },
    Joint { x: usize, y: usize, a: usize, b: usize },
}

/// Full conditional distribution `P(a,b|x,y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    scenario: Scenario,
    entries: Vec<f64>,
}

impl ProbabilityTable {
    /// Validates with the default tolerances (nonnegativity exact, normalization 1e-9).
    pub fn new(scenario: Scenario, entries: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(scenario, entries, 0.0, NORMALIZATION_TOL)
    }

    pub fn with_tolerance(
        scenario: Scenario,
        entries: Vec<f64>,
        negativity_tol: f64,
        normalization_tol: f64,
    ) -> Result<Self> {
        if entries.len() != scenario.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: scenario.full_dim(),
                found: entries.len(),
            });
        }
        if let Some((i, v)) = entries.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidTable(format!("entry {i} is not finite ({v})")));
        }
        if let Some((i, v)) = entries.iter().enumerate().find(|(_, &v)| v < -negativity_tol) {
            return Err(Error::InvalidTable(format!("entry {i} is negative ({v:e})")));
        }
        let table = Self { scenario, entries };
        for x in 0..table.scenario.inputs_a() {
            for y in 0..table.scenario.inputs_b() {
                let s = table.block(x, y).iter().sum::<f64>();
                if (s - 1.0).abs() > normalization_tol {
                    return Err(Error::InvalidTable(format!(
                        "setting ({x},{y}) sums to {s} instead of 1"
                    )));
                }
            }
        }
        Ok(table)
    }

    /// Clamps entries in `[-clamp_tol, 0)` to zero, then validates.
    pub fn from_entries_clamped(scenario: Scenario, mut entries: Vec<f64>, clamp_tol: f64) -> Result<Self> {
        for v in &mut entries {
            if *v < 0.0 && *v >= -clamp_tol {
                *v = 0.0;
            }
        }
        Self::new(scenario, entries)
    }

    /// White noise `P(a,b|x,y) = 1/(o_a(x) o_b(y))`.
    pub fn uniform(scenario: &Scenario) -> Self {
        let entries = scenario
            .full_indices()
            .map(|(x, y, _, _)| 1.0 / (scenario.outputs_a[x] * scenario.outputs_b[y]) as f64)
            .collect();
        Self {
            scenario: scenario.clone(),
            entries,
        }
    }

    /// Non-signaling table from CG coordinates. Fails if an implied entry is
    /// more negative than `negativity_tol`; smaller negatives are clamped.
    pub fn from_cg(scenario: &Scenario, cg: &[f64], negativity_tol: f64) -> Result<Self> {
        if cg.len() != scenario.cg_dim() {
            return Err(Error::DimensionMismatch {
                expected: scenario.cg_dim(),
                found: cg.len(),
            });
        }
        let entries: Vec<f64> = scenario
            .full_indices()
            .map(|(x, y, a, b)| {
                let (c, terms) = scenario.full_in_cg(x, y, a, b);
                c + terms.iter().map(|&(i, w)| w * cg[i]).sum::<f64>()
            })
            .collect();
        Self::from_entries_clamped(scenario.clone(), entries, negativity_tol)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.entries[self.scenario.full_index(x, y, a, b)]
    }

    /// Entries of the `(x, y)` block, `a` major.
    pub fn block(&self, x: usize, y: usize) -> &[f64] {
        let start = self.scenario.block_offset(x, y);
        &self.entries[start..start + self.scenario.outputs_a[x] * self.scenario.outputs_b[y]]
    }

    /// `P(a|x,y) = Σ_b P(a,b|x,y)`.
    pub fn marginal_a(&self, x: usize, y: usize, a: usize) -> f64 {
        let ob = self.scenario.outputs_b[y];
        self.block(x, y)[a * ob..(a + 1) * ob].iter().sum()
    }

    /// `P(b|x,y) = Σ_a P(a,b|x,y)`.
    pub fn marginal_b(&self, x: usize, y: usize, b: usize) -> f64 {
        let ob = self.scenario.outputs_b[y];
        (0..self.scenario.outputs_a[x]).map(|a| self.block(x, y)[a * ob + b]).sum()
    }

    /// Alice's marginal averaged over Bob's settings; the true `P(a|x)` on
    /// non-signaling tables.
    pub fn avg_marginal_a(&self, x: usize, a: usize) -> f64 {
        let n = self.scenario.inputs_b();
        (0..n).map(|y| self.marginal_a(x, y, a)).sum::<f64>() / n as f64
    }

    pub fn avg_marginal_b(&self, y: usize, b: usize) -> f64 {
        let n = self.scenario.inputs_a();
        (0..n).map(|x| self.marginal_b(x, y, b)).sum::<f64>() / n as f64
    }

    /// CG coordinates, with marginals averaged over the other party's settings.
    pub fn to_cg(&self) -> Vec<f64> {
        let s = &self.scenario;
        (0..s.cg_dim())
            .map(|i| match s.cg_entry(i) {
                CgEntry::Alice { x, a } => self.avg_marginal_a(x, a),
                CgEntry::Bob { y, b } => self.avg_marginal_b(y, b),
                CgEntry::Joint { x, y, a, b } => self.get(x, y, a, b),
            })
            .collect()
    }

    /// `v·p + (1−v)·P₁`.
    pub fn mix_with_white_noise(&self, v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param("v", format!("{v} is outside [0, 1]")));
        }
        let noise = Self::uniform(&self.scenario);
        let entries = self
            .entries
            .iter()
            .zip(&noise.entries)
            .map(|(p, q)| v * p + (1.0 - v) * q)
            .collect();
        Ok(Self {
            scenario: self.scenario.clone(),
            entries,
        })
    }

    /// Largest absolute entry difference.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Integer counts `N(a,b,x,y)`, stored like [`ProbabilityTable`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    scenario: Scenario,
    counts: Vec<u64>,
}

impl CountsTable {
    pub fn new(scenario: Scenario, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != scenario.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: scenario.full_dim(),
                found: counts.len(),
            });
        }
        Ok(Self { scenario, counts })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn block(&self, x: usize, y: usize) -> &[u64] {
        let start = self.scenario.block_offset(x, y);
        &self.counts[start..start + self.scenario.outputs_a[x] * self.scenario.outputs_b[y]]
    }

    pub fn total(&self, x: usize, y: usize) -> u64 {
        self.block(x, y).iter().sum()
    }
}

/// Relative frequencies `N(a,b,x,y) / Σ_{a',b'} N(a',b',x,y)`.
pub fn frequencies_from_counts(counts: &CountsTable) -> Result<ProbabilityTable> {
    let s = counts.scenario();
    let mut entries = vec![0.0; s.full_dim()];
    for x in 0..s.inputs_a() {
        for y in 0..s.inputs_b() {
            let total = counts.total(x, y);
            if total == 0 {
                return Err(Error::InvalidTable(format!("setting ({x},{y}) has zero total count")));
            }
            let start = s.block_offset(x, y);
            let block = counts.block(x, y);
            for (k, &n) in block.iter().enumerate() {
                entries[start + k] = n as f64 / total as f64;
            }
        }
    }
    ProbabilityTable::new(s.clone(), entries)
}

/// Bell value `S = β·P` (plus the functional's constant).
pub fn evaluate(f: &BellFunctional, p: &ProbabilityTable) -> Result<f64> {
    f.evaluate(p)
}

/// True iff every marginal identity `P(a|x,y) = P(a|x)`, `P(b|x,y) = P(b|y)` holds within `tol`.
pub fn check_nonsignaling(p: &ProbabilityTable, tol: f64) -> bool {
    signaling_deltas(p).max_delta <= tol
}

pub fn mix_with_white_noise(p: &ProbabilityTable, v: f64) -> Result<ProbabilityTable> {
    p.mix_with_white_noise(v)
}
