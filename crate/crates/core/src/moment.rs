//! Moment-matrix relaxations of the quantum set.
//!
//! Rows and columns are indexed by operator words built from the CG
//! projectors (outcomes `0..o−1` of every setting). Entries are real parts of
//! `⟨w_r† w_c⟩`; two moments are identified when one is the simultaneous
//! reversal of both parties' words of the other, which keeps partial
//! transposition meaningful on the tensor-indexed levels.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::Realization;
use crate::scenario::{check_nonsignaling, signaling_deltas, BellFunctional, ProbabilityTable, Scenario};
use crate::sdp::{sdp_solve, BlockKind, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

/// Non-signaling tolerance for tables entering the negativity bound.
pub const NS_INPUT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    /// `{1, A, B}`.
    Npa1,
    /// `{1, A, B, AB}`.
    Npa1AB,
    /// `{1, A} ⊗ {1, B}`, tensor indexed.
    Local1,
    /// `Local1` with partial-transpose structure for entanglement bounds.
    Local1PPT,
    /// All words of length at most 2.
    Npa2,
}

impl Level {
    pub fn tag(self) -> &'static str {
        match self {
            Level::Npa1 => "npa1",
            Level::Npa1AB => "npa1ab",
            Level::Local1 => "local1",
            Level::Local1PPT => "local1ppt",
            Level::Npa2 => "npa2",
        }
    }

    pub fn is_tensor(self) -> bool {
        matches!(self, Level::Local1 | Level::Local1PPT)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '+'], "").as_str() {
            "npa1" | "1" => Ok(Level::Npa1),
            "npa1ab" | "1ab" => Ok(Level::Npa1AB),
            "local1" => Ok(Level::Local1),
            "local1ppt" => Ok(Level::Local1PPT),
            "npa2" | "2" => Ok(Level::Npa2),
            _ => Err(Error::UnsupportedLevel(s.to_string())),
        }
    }
}

/// `(setting, outcome)` pairs, applied left to right.
pub type OpString = Vec<(usize, usize)>;

/// A row/column label: a product of one Alice string and one Bob string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    pub alice: OpString,
    pub bob: OpString,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentKind {
    /// The normalization entry `⟨1⟩`.
    Identity,
    /// A correlation component, by CG index.
    Data(usize),
    /// An unconstrained moment, by free index.
    Free(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentStructure {
    level: Level,
    scenario: Scenario,
    words: Vec<Word>,
    /// Tensor factors `(n_a, n_b)` with word index `i·n_b + k`.
    tensor: Option<(usize, usize)>,
    moments: Vec<Word>,
    kinds: Vec<MomentKind>,
    free_count: usize,
    /// Row-major moment ids; `None` marks entries that vanish identically.
    index: Vec<Option<usize>>,
}

/// Projector products: equal neighbours merge, orthogonal ones vanish.
fn reduce(ops: impl IntoIterator<Item = (usize, usize)>) -> Option<OpString> {
    let mut out: OpString = Vec::new();
    for (s, o) in ops {
        match out.last() {
            Some(&(ls, lo)) if ls == s && lo == o => {}
            Some(&(ls, _)) if ls == s => return None,
            _ => out.push((s, o)),
        }
    }
    Some(out)
}

fn canonical(alice: OpString, bob: OpString) -> Word {
    let w = Word { alice, bob };
    let r = Word {
        alice: w.alice.iter().rev().copied().collect(),
        bob: w.bob.iter().rev().copied().collect(),
    };
    if (&r.alice, &r.bob) < (&w.alice, &w.bob) {
        r
    } else {
        w
    }
}

fn party_ops(outputs: &[usize]) -> Vec<OpString> {
    let mut v = vec![Vec::new()];
    for (s, &o) in outputs.iter().enumerate() {
        for k in 0..o - 1 {
            v.push(vec![(s, k)]);
        }
    }
    v
}

/// Builds the word list, moment identification and data/free split.
pub fn build_structure(s: &Scenario, level: Level) -> Result<MomentStructure> {
    let ua = party_ops(s.outputs_a());
    let ub = party_ops(s.outputs_b());
    let word = |a: &OpString, b: &OpString| Word {
        alice: a.clone(),
        bob: b.clone(),
    };
    let (words, tensor) = match level {
        Level::Npa1 | Level::Npa1AB | Level::Npa2 => {
            let mut w = vec![word(&ua[0], &ub[0])];
            w.extend(ua[1..].iter().map(|a| word(a, &ub[0])));
            w.extend(ub[1..].iter().map(|b| word(&ua[0], b)));
            if level != Level::Npa1 {
                for a in &ua[1..] {
                    for b in &ub[1..] {
                        w.push(word(a, b));
                    }
                }
            }
            if level == Level::Npa2 {
                let pairs = |u: &[OpString]| -> Vec<OpString> {
                    let mut out = Vec::new();
                    for p in &u[1..] {
                        for q in &u[1..] {
                            if p[0].0 != q[0].0 {
                                out.push(vec![p[0], q[0]]);
                            }
                        }
                    }
                    out
                };
                w.extend(pairs(&ua).iter().map(|a| word(a, &ub[0])));
                w.extend(pairs(&ub).iter().map(|b| word(&ua[0], b)));
            }
            (w, None)
        }
        Level::Local1 | Level::Local1PPT => {
            let w = ua.iter().flat_map(|a| ub.iter().map(move |b| word(a, b))).collect();
            (w, Some((ua.len(), ub.len())))
        }
    };
    let n = words.len();
    let mut lookup: HashMap<Word, usize> = HashMap::new();
    let mut moments = Vec::new();
    let mut kinds = Vec::new();
    let mut free_count = 0;
    let mut index = vec![None; n * n];
    for r in 0..n {
        for c in r..n {
            let alice = reduce(words[r].alice.iter().rev().chain(&words[c].alice).copied());
            let bob = reduce(words[r].bob.iter().rev().chain(&words[c].bob).copied());
            let (Some(alice), Some(bob)) = (alice, bob) else {
                continue;
            };
            let key = canonical(alice, bob);
            let id = *lookup.entry(key.clone()).or_insert_with(|| {
                let kind = match (key.alice.as_slice(), key.bob.as_slice()) {
                    ([], []) => MomentKind::Identity,
                    ([(x, a)], []) => MomentKind::Data(s.cg_alice(*x, *a)),
                    ([], [(y, b)]) => MomentKind::Data(s.cg_bob(*y, *b)),
                    ([(x, a)], [(y, b)]) => MomentKind::Data(s.cg_joint(*x, *y, *a, *b)),
                    _ => {
                        free_count += 1;
                        MomentKind::Free(free_count - 1)
                    }
                };
                moments.push(key);
                kinds.push(kind);
                moments.len() - 1
            });
            index[r * n + c] = Some(id);
            index[c * n + r] = Some(id);
        }
    }
    Ok(MomentStructure {
        level,
        scenario: s.clone(),
        words,
        tensor,
        moments,
        kinds,
        free_count,
        index,
    })
}

impl MomentStructure {
    pub fn level(&self) -> Level {
        self.level
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn moments(&self) -> &[Word] {
        &self.moments
    }

    pub fn kinds(&self) -> &[MomentKind] {
        &self.kinds
    }

    pub fn free_count(&self) -> usize {
        self.free_count
    }

    pub fn entry(&self, r: usize, c: usize) -> Option<usize> {
        self.index[r * self.size() + c]
    }

    /// Position of `(r, c)` of the partial transpose on Bob's tensor factor.
    pub fn transposed_position(&self, r: usize, c: usize) -> Option<(usize, usize)> {
        let (_, nb) = self.tensor?;
        let (i, k) = (r / nb, r % nb);
        let (j, l) = (c / nb, c % nb);
        Some((i * nb + l, j * nb + k))
    }

    /// Upper-triangle support of the moment with the given kind.
    fn support(&self, kind: MomentKind) -> Vec<(usize, usize)> {
        let n = self.size();
        let mut out = Vec::new();
        for r in 0..n {
            for c in r..n {
                if let Some(id) = self.entry(r, c) {
                    if self.kinds[id] == kind {
                        out.push((r, c));
                    }
                }
            }
        }
        out
    }

    /// Support of `F` for CG component `cg`.
    pub fn f_data(&self, cg: usize) -> Vec<(usize, usize)> {
        self.support(MomentKind::Data(cg))
    }

    pub fn f_free(&self, k: usize) -> Vec<(usize, usize)> {
        self.support(MomentKind::Free(k))
    }

    pub fn f_identity(&self) -> Vec<(usize, usize)> {
        self.support(MomentKind::Identity)
    }

    /// `χ = F_1 + Σ P_cg F_cg + Σ u_k F_k`.
    pub fn assemble(&self, cg: &[f64], free: &[f64]) -> Result<DMatrix<f64>> {
        if cg.len() != self.scenario.cg_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.scenario.cg_dim(),
                found: cg.len(),
            });
        }
        if free.len() != self.free_count {
            return Err(Error::DimensionMismatch {
                expected: self.free_count,
                found: free.len(),
            });
        }
        let n = self.size();
        Ok(DMatrix::from_fn(n, n, |r, c| match self.entry(r, c).map(|id| self.kinds[id]) {
            None => 0.0,
            Some(MomentKind::Identity) => 1.0,
            Some(MomentKind::Data(i)) => cg[i],
            Some(MomentKind::Free(k)) => free[k],
        }))
    }

    /// Values of every moment under `r`.
    pub fn moment_values(&self, r: &Realization) -> Result<Vec<f64>> {
        if r.scenario() != self.scenario {
            return Err(Error::ScenarioMismatch);
        }
        let rho = r.state().matrix();
        let product = |ops: &OpString, povms: &[crate::quantum::Povm], d: usize| {
            ops.iter().fold(crate::quantum::CMatrix::identity(d, d), |acc, &(s, o)| {
                acc * &povms[s].elements()[o]
            })
        };
        Ok(self
            .moments
            .iter()
            .map(|w| {
                let a = product(&w.alice, r.povms_a(), r.state().dim_a());
                let b = product(&w.bob, r.povms_b(), r.state().dim_b());
                (rho * a.kronecker(&b)).trace().re
            })
            .collect())
    }

    /// Exact moment matrix of a realization.
    pub fn exact_moment_matrix(&self, r: &Realization) -> Result<DMatrix<f64>> {
        let v = self.moment_values(r)?;
        let n = self.size();
        Ok(DMatrix::from_fn(n, n, |i, j| self.entry(i, j).map_or(0.0, |id| v[id])))
    }
}

/// Affine expression `c + Σ w·y` over SDP variables.
#[derive(Debug, Clone, Default)]
struct Lin {
    c: f64,
    terms: Vec<(usize, f64)>,
}

impl Lin {
    fn constant(c: f64) -> Self {
        Self { c, terms: Vec::new() }
    }

    fn var(v: usize) -> Self {
        Self {
            c: 0.0,
            terms: vec![(v, 1.0)],
        }
    }
}

fn put(p: &mut SdpProblem, block: usize, r: usize, c: usize, e: &Lin, sign: f64) {
    if e.c != 0.0 {
        p.add_constant(block, r, c, sign * e.c);
    }
    for &(v, w) in &e.terms {
        p.add_coefficient(v, block, r, c, sign * w);
    }
}

/// Adds `χ` (and optionally its Bob partial transpose) with moments `lin`
/// into `block`, accumulating onto whatever is already there.
fn add_moment_block(p: &mut SdpProblem, block: usize, st: &MomentStructure, lin: &[Lin], transpose: bool) {
    let n = st.size();
    for r in 0..n {
        for c in r..n {
            let (rr, cc) = if transpose {
                st.transposed_position(r, c).expect("tensor level")
            } else {
                (r, c)
            };
            if let Some(id) = st.entry(rr, cc) {
                put(p, block, r, c, &lin[id], 1.0);
            }
        }
    }
}

/// Full-table entries as affine expressions of CG variables `cg_var[i]`.
fn full_entries(s: &Scenario, cg_var: impl Fn(usize) -> Lin) -> Vec<Lin> {
    s.full_indices()
        .map(|(x, y, a, b)| {
            let (c, terms) = s.full_in_cg(x, y, a, b);
            let mut e = Lin::constant(c);
            for (i, w) in terms {
                let v = cg_var(i);
                e.c += w * v.c;
                e.terms.extend(v.terms.iter().map(|&(k, u)| (k, u * w)));
            }
            e
        })
        .collect()
}

fn moment_lins(st: &MomentStructure, data: impl Fn(usize) -> Lin, free_offset: usize) -> Vec<Lin> {
    st.kinds
        .iter()
        .map(|k| match *k {
            MomentKind::Identity => Lin::constant(1.0),
            MomentKind::Data(i) => data(i),
            MomentKind::Free(j) => Lin::var(free_offset + j),
        })
        .collect()
}

fn solve(p: &SdpProblem) -> Result<SdpSolution> {
    let sol = sdp_solve(p, &SdpOptions::default())?;
    match sol.status {
        SdpStatus::Optimal => Ok(sol),
        SdpStatus::Infeasible => Err(Error::SdpFailure("relaxation is infeasible".into())),
        _ => sol.require_optimal(),
    }
}

/// Solver statistics kept alongside results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: SdpStatus,
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub infeasibility: f64,
    pub iterations: usize,
}

impl From<&SdpSolution> for SolveSummary {
    fn from(s: &SdpSolution) -> Self {
        Self {
            status: s.status,
            objective: s.objective,
            dual_objective: s.dual_objective,
            gap: s.gap,
            infeasibility: s.infeasibility,
            iterations: s.iterations,
        }
    }
}

fn reject_ppt(level: Level) -> Result<()> {
    if level == Level::Local1PPT {
        return Err(Error::UnsupportedLevel(
            "local1ppt restricts to PPT states and does not bound the quantum set".into(),
        ));
    }
    Ok(())
}

/// Maximum of `f` over tables with a PSD moment matrix at `level`.
pub fn quantum_upper_bound(f: &BellFunctional, level: Level) -> Result<f64> {
    reject_ppt(level)?;
    let g = f.to_cg();
    let s = g.scenario().clone();
    let st = build_structure(&s, level)?;
    let ncg = s.cg_dim();
    let mut p = SdpProblem::new(vec![BlockKind::Psd(st.size()), BlockKind::Diagonal(s.full_dim())]);
    for &b in g.coefficients() {
        p.add_var(b);
    }
    for _ in 0..st.free_count() {
        p.add_var(0.0);
    }
    add_moment_block(&mut p, 0, &st, &moment_lins(&st, Lin::var, ncg), false);
    for (i, e) in full_entries(&s, Lin::var).iter().enumerate() {
        put(&mut p, 1, i, i, e, 1.0);
    }
    let sol = solve(&p)?;
    Ok(sol.dual_objective + g.constant())
}

/// Minimum of `f` over the same relaxation.
pub fn quantum_lower_bound(f: &BellFunctional, level: Level) -> Result<f64> {
    Ok(-quantum_upper_bound(&f.negated(), level)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestQuantumResult {
    pub table: ProbabilityTable,
    pub l1_distance: f64,
    pub l2_distance: f64,
    pub level: Level,
    pub bell_value_constraint: Option<(BellFunctional, f64)>,
    /// ℓ1 stage.
    pub solver: SolveSummary,
    /// ℓ2 tie-break stage among ℓ1-optimal points.
    pub tie_break: SolveSummary,
}

/// Slack on the ℓ1 optimum allowed in the tie-break stage.
const L1_SLACK: f64 = 1e-7;

/// ℓ1-nearest table of the relaxation at `level`, optionally pinned to a Bell
/// value; ties are broken by the smallest ℓ2 distance.
pub fn nearest_quantum_correlation(
    p_exp: &ProbabilityTable,
    level: Level,
    constraint: Option<(&BellFunctional, f64)>,
) -> Result<NearestQuantumResult> {
    reject_ppt(level)?;
    let s = p_exp.scenario().clone();
    let st = build_structure(&s, level)?;
    let (ncg, nfree, nfull) = (s.cg_dim(), st.free_count(), s.full_dim());
    let pin = match constraint {
        Some((f, target)) => {
            if f.scenario() != &s {
                return Err(Error::ScenarioMismatch);
            }
            if !target.is_finite() {
                return Err(Error::param("target", "must be finite"));
            }
            Some((f.to_cg(), target))
        }
        None => None,
    };
    let base = |extra: Vec<BlockKind>| {
        let mut blocks = vec![BlockKind::Psd(st.size()), BlockKind::Diagonal(nfull)];
        blocks.extend(extra);
        let mut p = SdpProblem::new(blocks);
        for _ in 0..ncg + nfree {
            p.add_var(0.0);
        }
        add_moment_block(&mut p, 0, &st, &moment_lins(&st, Lin::var, ncg), false);
        let entries = full_entries(&s, Lin::var);
        for (i, e) in entries.iter().enumerate() {
            put(&mut p, 1, i, i, e, 1.0);
        }
        if let Some((g, target)) = &pin {
            let terms = g.coefficients().iter().enumerate().map(|(i, &b)| (i, b)).collect();
            p.add_equality(terms, target - g.constant());
        }
        (p, entries)
    };

    // stage 1: min Σ D with D ≥ ±(P − P_exp)
    let (mut p1, entries) = base(vec![BlockKind::Diagonal(2 * nfull)]);
    let d0 = p1.num_vars();
    for _ in 0..nfull {
        p1.add_var(-1.0);
    }
    for (i, e) in entries.iter().enumerate() {
        let target = p_exp.entries()[i];
        let diff = Lin {
            c: e.c - target,
            terms: e.terms.clone(),
        };
        for (row, sign) in [(2 * i, -1.0), (2 * i + 1, 1.0)] {
            put(&mut p1, 2, row, row, &diff, sign);
            p1.add_coefficient(d0 + i, 2, row, row, 1.0);
        }
    }
    let sol1 = solve(&p1)?;
    let l1_opt = -sol1.objective;

    // stage 2: min t with ‖P − P_exp‖² ≤ t and Σ D ≤ ℓ1* + slack
    let (mut p2, entries) = base(vec![
        BlockKind::Diagonal(2 * nfull + 1),
        BlockKind::Psd(nfull + 1),
    ]);
    let d0 = p2.num_vars();
    for _ in 0..nfull {
        p2.add_var(0.0);
    }
    let t = p2.add_var(-1.0);
    for (i, e) in entries.iter().enumerate() {
        let target = p_exp.entries()[i];
        let diff = Lin {
            c: e.c - target,
            terms: e.terms.clone(),
        };
        for (row, sign) in [(2 * i, -1.0), (2 * i + 1, 1.0)] {
            put(&mut p2, 2, row, row, &diff, sign);
            p2.add_coefficient(d0 + i, 2, row, row, 1.0);
        }
        put(&mut p2, 3, 0, i + 1, &diff, 1.0);
        p2.add_constant(3, i + 1, i + 1, 1.0);
    }
    let budget = 2 * nfull;
    p2.add_constant(2, budget, budget, l1_opt + L1_SLACK * (1.0 + l1_opt));
    for i in 0..nfull {
        p2.add_coefficient(d0 + i, 2, budget, budget, -1.0);
    }
    p2.add_coefficient(t, 3, 0, 0, 1.0);
    let sol2 = solve(&p2)?;

    let cg: Vec<f64> = sol2.y[..ncg].to_vec();
    let table = ProbabilityTable::from_cg(&s, &cg, 1e-6)?;
    let l1_distance = table.l1_distance(p_exp);
    let l2_distance = table
        .entries()
        .iter()
        .zip(p_exp.entries())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(NearestQuantumResult {
        table,
        l1_distance,
        l2_distance,
        level,
        bell_value_constraint: constraint.map(|(f, v)| (f.clone(), v)),
        solver: SolveSummary::from(&sol1),
        tie_break: SolveSummary::from(&sol2),
    })
}

/// Lower bound on the negativity of any state reproducing `p`:
/// `min χ₋[1,1]` over `χ ⪰ 0` with the data of `p`, `χ₋ ⪰ 0` and
/// `χ^{T_B} + χ₋ ⪰ 0`, scaled so that `|Φ₃⁺⟩` scores 1.
pub fn di_negativity_lower_bound(p: &ProbabilityTable, level: Level) -> Result<f64> {
    require_ppt(level)?;
    if !check_nonsignaling(p, NS_INPUT_TOL) {
        return Err(Error::Signaling {
            max_delta: signaling_deltas(p).max_delta,
        });
    }
    let st = build_structure(p.scenario(), level)?;
    let mut last = None;
    for &lambda in NOISE_RETRIES {
        let q = if lambda == 0.0 { p.clone() } else { p.mix_with_white_noise(1.0 - lambda)? };
        let cg = q.to_cg();
        match negativity_sdp(&st, 0, None, |_, free0| moment_lins(&st, |i| Lin::constant(cg[i]), free0)) {
            Ok(n) => return Ok(n),
            Err(e @ Error::SdpFailure(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// White-noise weights tried in turn when the fixed-data problem has no
/// strict interior. Mixing in a local table can only lower the bound, since
/// a flagged mixture with a separable model has negativity `(1 − λ)·N(ρ)`.
const NOISE_RETRIES: &[f64] = &[0.0, 1e-7, 1e-6, 1e-5];

/// Same bound using only the value of `f`: the minimum over every table in
/// the relaxation with `f(P) = value`.
pub fn di_negativity_from_bell_value(f: &BellFunctional, value: f64, level: Level) -> Result<f64> {
    require_ppt(level)?;
    if !value.is_finite() {
        return Err(Error::param("value", "must be finite"));
    }
    let s = f.scenario().clone();
    let st = build_structure(&s, level)?;
    let g = f.to_cg();
    let ncg = s.cg_dim();
    negativity_sdp(
        &st,
        ncg,
        Some(s.full_dim()),
        |prob, free0| {
            // χ's CG moments are variables 0..ncg
            for (i, e) in full_entries(&s, Lin::var).iter().enumerate() {
                put(prob, 3, i, i, e, 1.0);
            }
            let terms = g.coefficients().iter().enumerate().map(|(i, &b)| (i, b)).collect();
            prob.add_equality(terms, value - g.constant());
            moment_lins(&st, Lin::var, free0)
        },
    )
}

fn require_ppt(level: Level) -> Result<()> {
    if level != Level::Local1PPT {
        return Err(Error::UnsupportedLevel(format!(
            "{level} has no partial-transpose structure; use local1ppt"
        )));
    }
    Ok(())
}

/// `lead` variables come first (CG data when it is not fixed), then the free
/// moments of χ, then every moment of χ₋. `chi` receives the problem and the
/// index of χ's first free variable; block 3 is an optional diagonal block.
fn negativity_sdp(
    st: &MomentStructure,
    lead: usize,
    diagonal: Option<usize>,
    chi: impl FnOnce(&mut SdpProblem, usize) -> Vec<Lin>,
) -> Result<f64> {
    let n = st.size();
    let m = st.moments().len();
    let mut blocks = vec![BlockKind::Psd(n); 3];
    blocks.extend(diagonal.map(BlockKind::Diagonal));
    let mut prob = SdpProblem::new(blocks);
    for _ in 0..lead {
        prob.add_var(0.0);
    }
    let free0 = prob.num_vars();
    for _ in 0..st.free_count() {
        prob.add_var(0.0);
    }
    let off = prob.num_vars();
    for kind in st.kinds() {
        prob.add_var(if *kind == MomentKind::Identity { -1.0 } else { 0.0 });
    }
    let chi = chi(&mut prob, free0);
    let minus: Vec<Lin> = (0..m).map(|k| Lin::var(off + k)).collect();
    add_moment_block(&mut prob, 0, st, &chi, false);
    add_moment_block(&mut prob, 1, st, &minus, false);
    add_moment_block(&mut prob, 2, st, &chi, true);
    add_moment_block(&mut prob, 2, st, &minus, false);
    let sol = solve(&prob)?;
    Ok((-sol.dual_objective).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{phi3_i3plus_realization, psi_gamma, correlation};

    #[test]
    fn sizes() {
        let s = Scenario::flagship();
        assert_eq!(build_structure(&s, Level::Npa1).unwrap().size(), 13);
        assert_eq!(build_structure(&s, Level::Npa1AB).unwrap().size(), 49);
        assert_eq!(build_structure(&s, Level::Local1).unwrap().size(), 49);
        assert_eq!(build_structure(&s, Level::Npa2).unwrap().size(), 97);
        assert_eq!("local1ppt".parse::<Level>().unwrap(), Level::Local1PPT);
        assert!("npa3".parse::<Level>().is_err());
    }

    #[test]
    fn reduction_rules() {
        assert_eq!(reduce([(0, 1), (0, 1)]), Some(vec![(0, 1)]));
        assert_eq!(reduce([(0, 1), (0, 0)]), None);
        assert_eq!(reduce([(0, 1), (1, 0)]), Some(vec![(0, 1), (1, 0)]));
    }

    #[test]
    fn data_supports_are_disjoint_and_cover() {
        let s = Scenario::flagship();
        let st = build_structure(&s, Level::Npa1AB).unwrap();
        let mut seen = std::collections::HashSet::new();
        for i in 0..s.cg_dim() {
            let f = st.f_data(i);
            assert!(!f.is_empty(), "component {i}");
            assert!(f.iter().all(|e| seen.insert(*e)));
        }
        for k in 0..st.free_count() {
            assert!(st.f_free(k).iter().all(|e| seen.insert(*e)));
        }
        assert_eq!(st.f_identity(), vec![(0, 0)]);
    }

    #[test]
    fn exact_moment_matrix_is_consistent_and_psd() {
        let r = phi3_i3plus_realization();
        let p = correlation(&r).unwrap();
        for level in [Level::Npa1, Level::Npa1AB, Level::Local1] {
            let st = build_structure(&r.scenario(), level).unwrap();
            let chi = st.exact_moment_matrix(&r).unwrap();
            let free: Vec<f64> = st
                .kinds()
                .iter()
                .zip(st.moment_values(&r).unwrap())
                .filter(|(k, _)| matches!(k, MomentKind::Free(_)))
                .map(|(_, v)| v)
                .collect();
            let rebuilt = st.assemble(&p.to_cg(), &free).unwrap();
            assert!((&chi - &rebuilt).amax() < 1e-12);
            assert!(chi.symmetric_eigenvalues().min() > -1e-10);
        }
    }

    #[test]
    fn bounds_on_i3plus() {
        let f = crate::dataset::i3plus();
        let ub = quantum_upper_bound(&f, Level::Npa1AB).unwrap();
        assert!(ub >= 0.7123, "{ub}");
        let weak = quantum_upper_bound(&f, Level::Npa1).unwrap();
        assert!(weak >= ub - 1e-7);
        assert!(quantum_upper_bound(&f, Level::Local1PPT).is_err());
    }

    #[test]
    fn negativity_bound_on_uniform_is_zero() {
        let p = ProbabilityTable::uniform(&Scenario::flagship());
        let n = di_negativity_lower_bound(&p, Level::Local1PPT).unwrap();
        assert!(n.abs() < 1e-6, "{n}");
        assert!(di_negativity_lower_bound(&p, Level::Npa1AB).is_err());
    }

    #[test]
    fn negativity_bound_below_exact() {
        let r = phi3_i3plus_realization();
        let p = correlation(&r).unwrap();
        let n = di_negativity_lower_bound(&p, Level::Local1PPT).unwrap();
        assert!(n <= crate::quantum::negativity(&psi_gamma(1.0, 1.0).unwrap()) + 1e-6);
        assert!(n > 0.1, "{n}");
    }
}
