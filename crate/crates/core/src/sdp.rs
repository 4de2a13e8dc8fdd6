//! Small dense semidefinite programs in linear-matrix-inequality form
//!
//! ```text
//! maximize   b·y
//! subject to F₀ + Σᵢ yᵢ Fᵢ ⪰ 0      (block diagonal; diagonal blocks are LP cones)
//!            E y = f
//! ```
//!
//! Equalities are eliminated before the interior-point iteration, which
//! works on the standard primal-dual pair with `C = F₀`, `Aᵢ = −Fᵢ`.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Symmetric `n × n` positive semidefinite block.
    Psd(usize),
    /// `n` nonnegative scalars.
    Diagonal(usize),
}

impl BlockKind {
    pub fn size(self) -> usize {
        match self {
            BlockKind::Psd(n) | BlockKind::Diagonal(n) => n,
        }
    }
}

/// One upper-triangle entry of a symmetric block matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    pub blocks: Vec<BlockKind>,
    pub objective: Vec<f64>,
    pub constant: Vec<Entry>,
    /// `coefficients[i]` holds `Fᵢ`.
    pub coefficients: Vec<Vec<Entry>>,
    pub equalities: Vec<(Vec<(usize, f64)>, f64)>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<BlockKind>) -> Self {
        Self {
            blocks,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a variable with objective weight `b`, returning its index.
    pub fn add_var(&mut self, b: f64) -> usize {
        self.objective.push(b);
        self.coefficients.push(Vec::new());
        self.objective.len() - 1
    }

    fn normalize(block: usize, row: usize, col: usize, value: f64) -> Entry {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        Entry { block, row, col, value }
    }

    /// Adds `value` at `(row, col)` and `(col, row)` of `F_var`.
    pub fn add_coefficient(&mut self, var: usize, block: usize, row: usize, col: usize, value: f64) {
        self.coefficients[var].push(Self::normalize(block, row, col, value));
    }

    pub fn add_constant(&mut self, block: usize, row: usize, col: usize, value: f64) {
        self.constant.push(Self::normalize(block, row, col, value));
    }

    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push((terms, rhs));
    }

    fn validate(&self, cap: usize) -> Result<()> {
        for b in &self.blocks {
            if b.size() == 0 {
                return Err(Error::param("blocks", "empty block"));
            }
            if let BlockKind::Psd(n) = b {
                if *n > cap {
                    return Err(Error::param("blocks", format!("block size {n} exceeds cap {cap}")));
                }
            }
        }
        let check = |e: &Entry| -> Result<()> {
            let kind = self
                .blocks
                .get(e.block)
                .ok_or_else(|| Error::param("entry", format!("block {} out of range", e.block)))?;
            if e.col >= kind.size() {
                return Err(Error::param("entry", format!("index {} outside block {}", e.col, e.block)));
            }
            if matches!(kind, BlockKind::Diagonal(_)) && e.row != e.col {
                return Err(Error::param("entry", "off-diagonal entry in a diagonal block"));
            }
            if !e.value.is_finite() {
                return Err(Error::param("entry", "non-finite value"));
            }
            Ok(())
        };
        self.constant.iter().try_for_each(check)?;
        self.coefficients.iter().flatten().try_for_each(check)?;
        if self.coefficients.len() != self.objective.len() {
            return Err(Error::DimensionMismatch {
                expected: self.objective.len(),
                found: self.coefficients.len(),
            });
        }
        for (terms, rhs) in &self.equalities {
            if terms.iter().any(|&(i, v)| i >= self.num_vars() || !v.is_finite()) || !rhs.is_finite() {
                return Err(Error::param("equalities", "bad term"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    pub max_iterations: usize,
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub block_cap: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 120,
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            block_cap: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    /// No `y` makes the matrix inequality hold.
    Infeasible,
    /// The objective is unbounded above.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

/// Block values, dense for PSD blocks and as a vector for diagonal ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlockValue {
    Dense(Vec<Vec<f64>>),
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// `b·y` at the returned point.
    pub objective: f64,
    /// Value of the multiplier objective `⟨F₀, X⟩`; an upper bound on `b·y`
    /// when `X` is feasible.
    pub dual_objective: f64,
    pub y: Vec<f64>,
    /// `F₀ + Σ yᵢ Fᵢ`.
    pub slack: Vec<BlockValue>,
    /// Multipliers `X ⪰ 0` with `⟨Fᵢ, X⟩ = −bᵢ` on the reduced problem.
    pub multipliers: Vec<BlockValue>,
    pub gap: f64,
    pub infeasibility: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn require_optimal(self) -> Result<Self> {
        match self.status {
            SdpStatus::Optimal => Ok(self),
            s => Err(Error::SdpFailure(format!(
                "status {s:?} after {} iterations (gap {:.2e}, infeasibility {:.2e})",
                self.iterations, self.gap, self.infeasibility
            ))),
        }
    }

    pub fn dense(&self, block: usize) -> Option<DMatrix<f64>> {
        match &self.slack[block] {
            BlockValue::Dense(rows) => {
                let n = rows.len();
                Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
            BlockValue::Diagonal(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
enum Blk {
    D(DMatrix<f64>),
    V(DVector<f64>),
}

type Blocks = Vec<Blk>;

fn zeros(kinds: &[BlockKind]) -> Blocks {
    kinds
        .iter()
        .map(|k| match *k {
            BlockKind::Psd(n) => Blk::D(DMatrix::zeros(n, n)),
            BlockKind::Diagonal(n) => Blk::V(DVector::zeros(n)),
        })
        .collect()
}

fn scaled_identity(kinds: &[BlockKind], s: &[f64]) -> Blocks {
    kinds
        .iter()
        .zip(s)
        .map(|(k, &v)| match *k {
            BlockKind::Psd(n) => Blk::D(DMatrix::identity(n, n) * v),
            BlockKind::Diagonal(n) => Blk::V(DVector::from_element(n, v)),
        })
        .collect()
}

fn inner(a: &Blocks, b: &Blocks) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Blk::D(p), Blk::D(q)) => p.dot(q),
            (Blk::V(p), Blk::V(q)) => p.dot(q),
            _ => unreachable!(),
        })
        .sum()
}

fn norm(a: &Blocks) -> f64 {
    inner(a, a).sqrt()
}

fn axpy(alpha: f64, x: &Blocks, y: &mut Blocks) {
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        match (xi, yi) {
            (Blk::D(p), Blk::D(q)) => *q += p * alpha,
            (Blk::V(p), Blk::V(q)) => *q += p * alpha,
            _ => unreachable!(),
        }
    }
}

fn sub(a: &Blocks, b: &Blocks) -> Blocks {
    let mut out = a.clone();
    axpy(-1.0, b, &mut out);
    out
}

fn to_value(b: &Blocks) -> Vec<BlockValue> {
    b.iter()
        .map(|x| match x {
            Blk::D(m) => BlockValue::Dense(m.row_iter().map(|r| r.iter().copied().collect()).collect()),
            Blk::V(v) => BlockValue::Diagonal(v.iter().copied().collect()),
        })
        .collect()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest step `α ≤ cap` keeping `X + αΔ ⪰ 0`.
fn max_step(x: &Blocks, d: &Blocks) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(d) {
        match (xb, db) {
            (Blk::D(xm), Blk::D(dm)) => {
                let l = xm.clone().cholesky()?.l();
                let li = l.solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))?;
                let s = sym(&li * dm * li.transpose());
                let lmin = s.symmetric_eigenvalues().min();
                if lmin < 0.0 {
                    alpha = alpha.min(-1.0 / lmin);
                }
            }
            (Blk::V(xv), Blk::V(dv)) => {
                for (a, b) in xv.iter().zip(dv.iter()) {
                    if *b < 0.0 {
                        alpha = alpha.min(-a / b);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    Some(alpha)
}

fn inverse(x: &Blocks) -> Option<Blocks> {
    x.iter()
        .map(|b| match b {
            Blk::D(m) => m.clone().cholesky().map(|c| Blk::D(sym(c.inverse()))),
            Blk::V(v) => {
                if v.iter().all(|&e| e > 0.0) {
                    Some(Blk::V(v.map(|e| 1.0 / e)))
                } else {
                    None
                }
            }
        })
        .collect()
}

/// Reduced standard-form data: `C`, sparse `Aᵢ` (upper entries) and `b`.
struct Standard {
    kinds: Vec<BlockKind>,
    c: Blocks,
    a: Vec<Vec<Entry>>,
    b: DVector<f64>,
}

impl Standard {
    fn op(&self, x: &Blocks) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|ai| apply_entries(ai, x)))
    }

    fn adj(&self, y: &DVector<f64>) -> Blocks {
        let mut out = zeros(&self.kinds);
        for (ai, &yi) in self.a.iter().zip(y.iter()) {
            if yi != 0.0 {
                add_entries(&mut out, ai, yi);
            }
        }
        out
    }

    /// HKM Schur complement `M_ij = tr(Aᵢ X Aⱼ Z⁻¹)`.
    fn schur(&self, x: &Blocks, zinv: &Blocks) -> DMatrix<f64> {
        let m = self.a.len();
        let mut out = DMatrix::zeros(m, m);
        // per block: variables touching it, with entries expanded to both orientations
        let mut per_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> = vec![Vec::new(); self.kinds.len()];
        for (i, ai) in self.a.iter().enumerate() {
            let mut by_block: HashMap<usize, Vec<(usize, usize, f64)>> = HashMap::new();
            for e in ai {
                let v = by_block.entry(e.block).or_default();
                v.push((e.row, e.col, e.value));
                if e.row != e.col {
                    v.push((e.col, e.row, e.value));
                }
            }
            let mut keys: Vec<_> = by_block.into_iter().collect();
            keys.sort_by_key(|(k, _)| *k);
            for (k, v) in keys {
                per_block[k].push((i, v));
            }
        }
        for (k, vars) in per_block.iter().enumerate() {
            match (&x[k], &zinv[k]) {
                (Blk::D(xm), Blk::D(zm)) => {
                    for (ii, (i, ei)) in vars.iter().enumerate() {
                        for (j, ej) in &vars[ii..] {
                            let mut s = 0.0;
                            for &(p, q, a) in ei {
                                for &(r, t, b) in ej {
                                    s += a * b * xm[(q, r)] * zm[(t, p)];
                                }
                            }
                            out[(*i, *j)] += s;
                            if i != j {
                                out[(*j, *i)] += s;
                            }
                        }
                    }
                }
                (Blk::V(xv), Blk::V(zv)) => {
                    let mut at: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
                    for (i, ei) in vars {
                        for &(p, _, a) in ei {
                            at.entry(p).or_default().push((*i, a));
                        }
                    }
                    for (p, list) in at {
                        let w = xv[p] * zv[p];
                        for &(i, a) in &list {
                            for &(j, b) in &list {
                                out[(i, j)] += a * b * w;
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        out
    }
}

fn apply_entries(entries: &[Entry], x: &Blocks) -> f64 {
    entries
        .iter()
        .map(|e| match &x[e.block] {
            Blk::D(m) => {
                if e.row == e.col {
                    e.value * m[(e.row, e.row)]
                } else {
                    e.value * (m[(e.row, e.col)] + m[(e.col, e.row)])
                }
            }
            Blk::V(v) => e.value * v[e.row],
        })
        .sum()
}

fn add_entries(out: &mut Blocks, entries: &[Entry], scale: f64) {
    for e in entries {
        match &mut out[e.block] {
            Blk::D(m) => {
                m[(e.row, e.col)] += scale * e.value;
                if e.row != e.col {
                    m[(e.col, e.row)] += scale * e.value;
                }
            }
            Blk::V(v) => v[e.row] += scale * e.value,
        }
    }
}

/// `y = y₀ + N z` parameterizing the solutions of `E y = f`.
struct Elimination {
    y0: Vec<f64>,
    /// For each reduced variable, its expansion over original variables.
    basis: Vec<Vec<(usize, f64)>>,
}

fn eliminate(p: &SdpProblem) -> Result<Elimination> {
    let n = p.num_vars();
    if p.equalities.is_empty() {
        return Ok(Elimination {
            y0: vec![0.0; n],
            basis: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        });
    }
    let k = p.equalities.len();
    let mut e = DMatrix::zeros(k, n + 1);
    for (r, (terms, rhs)) in p.equalities.iter().enumerate() {
        for &(i, v) in terms {
            e[(r, i)] += v;
        }
        e[(r, n)] = *rhs;
    }
    let scale = e.amax().max(1.0);
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == k {
            break;
        }
        let (pr, pv) = (row..k)
            .map(|r| (r, e[(r, col)].abs()))
            .fold((row, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if pv <= 1e-12 * scale {
            continue;
        }
        e.swap_rows(row, pr);
        let piv = e[(row, col)];
        let rr = e.row(row) / piv;
        e.set_row(row, &rr);
        for r in 0..k {
            if r != row {
                let f = e[(r, col)];
                if f != 0.0 {
                    let upd = e.row(r) - &rr * f;
                    e.set_row(r, &upd);
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    for r in row..k {
        if e[(r, n)].abs() > 1e-9 * scale {
            return Err(Error::SdpFailure("inconsistent equality constraints".into()));
        }
    }
    let is_pivot: HashMap<usize, usize> = pivots.iter().map(|&(r, c)| (c, r)).collect();
    let mut y0 = vec![0.0; n];
    for &(r, c) in &pivots {
        y0[c] = e[(r, n)];
    }
    let mut basis = Vec::new();
    for j in 0..n {
        if is_pivot.contains_key(&j) {
            continue;
        }
        let mut col = vec![(j, 1.0)];
        for &(r, c) in &pivots {
            let v = e[(r, j)];
            if v.abs() > 1e-15 {
                col.push((c, -v));
            }
        }
        basis.push(col);
    }
    Ok(Elimination { y0, basis })
}

fn merge(entries: impl Iterator<Item = Entry>) -> Vec<Entry> {
    let mut map: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut order = Vec::new();
    for e in entries {
        let key = (e.block, e.row, e.col);
        let slot = map.entry(key).or_insert_with(|| {
            order.push(key);
            0.0
        });
        *slot += e.value;
    }
    order
        .into_iter()
        .filter_map(|k| {
            let v = map[&k];
            (v != 0.0).then_some(Entry {
                block: k.0,
                row: k.1,
                col: k.2,
                value: v,
            })
        })
        .collect()
}

pub fn sdp_solve(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.validate(opts.block_cap)?;
    let elim = eliminate(p)?;
    let shift = elim.y0.iter().enumerate().flat_map(|(i, &v)| {
        p.coefficients[i].iter().map(move |e| Entry { value: e.value * v, ..*e })
    });
    let c_entries = merge(p.constant.iter().copied().chain(shift));
    let mut c = zeros(&p.blocks);
    add_entries(&mut c, &c_entries, 1.0);
    let a: Vec<Vec<Entry>> = elim
        .basis
        .iter()
        .map(|col| {
            merge(col.iter().flat_map(|&(i, w)| {
                p.coefficients[i].iter().map(move |e| Entry { value: -e.value * w, ..*e })
            }))
        })
        .collect();
    let b = DVector::from_iterator(
        a.len(),
        elim.basis
            .iter()
            .map(|col| col.iter().map(|&(i, w)| p.objective[i] * w).sum::<f64>()),
    );
    let offset: f64 = elim.y0.iter().zip(&p.objective).map(|(y, b)| y * b).sum();
    let std = Standard {
        kinds: p.blocks.clone(),
        c,
        a,
        b,
    };
    let r = solve_standard(&std, opts);
    let y_full = {
        let mut y = elim.y0.clone();
        for (col, &z) in elim.basis.iter().zip(r.y.iter()) {
            for &(i, w) in col {
                y[i] += w * z;
            }
        }
        y
    };
    Ok(SdpSolution {
        status: r.status,
        objective: r.dobj + offset,
        dual_objective: r.pobj + offset,
        y: y_full,
        slack: to_value(&r.z),
        multipliers: to_value(&r.x),
        gap: r.gap,
        infeasibility: r.pinf.max(r.dinf),
        iterations: r.iterations,
    })
}

struct Raw {
    status: SdpStatus,
    x: Blocks,
    y: DVector<f64>,
    z: Blocks,
    pobj: f64,
    dobj: f64,
    gap: f64,
    pinf: f64,
    dinf: f64,
    iterations: usize,
}

fn solve_standard(s: &Standard, opts: &SdpOptions) -> Raw {
    let m = s.a.len();
    let n_total: f64 = s.kinds.iter().map(|k| k.size() as f64).sum();
    let bnorm = s.b.norm();
    let cnorm = norm(&s.c);
    // starting point: multiples of the identity
    let mut a_norm = vec![0.0f64; s.kinds.len()];
    for ai in &s.a {
        let mut per: HashMap<usize, f64> = HashMap::new();
        for e in ai {
            let w = if e.row == e.col { 1.0 } else { 2.0 };
            *per.entry(e.block).or_default() += w * e.value * e.value;
        }
        for (k, v) in per {
            a_norm[k] = a_norm[k].max(v.sqrt());
        }
    }
    let mut xi = Vec::new();
    let mut eta = Vec::new();
    for (k, kind) in s.kinds.iter().enumerate() {
        let nk = (kind.size() as f64).sqrt();
        let ck = match &s.c[k] {
            Blk::D(mm) => mm.norm(),
            Blk::V(v) => v.norm(),
        };
        let bmax = s.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        xi.push(10f64.max(nk).max(nk * (1.0 + bmax) / (1.0 + a_norm[k])));
        eta.push(10f64.max(nk).max(ck.max(a_norm[k])));
    }
    let mut x = scaled_identity(&s.kinds, &xi);
    let mut z = scaled_identity(&s.kinds, &eta);
    let mut y = DVector::zeros(m);

    let raw = |status, x: &Blocks, y: &DVector<f64>, z: &Blocks, it: usize| {
        let pobj = inner(&s.c, x);
        let dobj = s.b.dot(y);
        let rp = &s.b - s.op(x);
        let rd = sub(&sub(&s.c, z), &s.adj(y));
        Raw {
            status,
            x: x.clone(),
            y: y.clone(),
            z: z.clone(),
            pobj,
            dobj,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            pinf: rp.norm() / (1.0 + bnorm),
            dinf: norm(&rd) / (1.0 + cnorm),
            iterations: it,
        }
    };

    let mut stalled = 0;
    let mut best: Option<Raw> = None;
    for it in 0..opts.max_iterations {
        let pobj = inner(&s.c, &x);
        let dobj = s.b.dot(&y);
        let rp = &s.b - s.op(&x);
        let rd = sub(&sub(&s.c, &z), &s.adj(&y));
        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = norm(&rd) / (1.0 + cnorm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let mu = inner(&x, &z) / n_total;
        if gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            return raw(SdpStatus::Optimal, &x, &y, &z, it);
        }
        // certificates of infeasibility: a huge, nearly feasible ray
        let xn = norm(&x);
        if xn > 1e8 * (1.0 + cnorm) && pobj < 0.0 && s.op(&x).norm() / xn < 1e-8 && -pobj / xn > 1e-8 {
            return raw(SdpStatus::Infeasible, &x, &y, &z, it);
        }
        let yn = y.norm();
        if yn > 1e8 * (1.0 + bnorm) && dobj > 0.0 && dinf < opts.feas_tol.sqrt() && dobj / yn > 1e-8 {
            return raw(SdpStatus::Unbounded, &x, &y, &z, it);
        }
        let near = gap <= 1e-6 && pinf <= 1e-7 && dinf <= 1e-7;
        if near && best.as_ref().is_none_or(|b| gap < b.gap) {
            best = Some(raw(SdpStatus::Optimal, &x, &y, &z, it));
        }

        let Some(zinv) = inverse(&z) else {
            break;
        };
        let schur = s.schur(&x, &zinv);
        let chol = {
            let mut mm = schur.clone();
            let scale = (0..m).map(|i| mm[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
            let mut f = mm.clone().cholesky();
            let mut reg = 1e-14 * scale;
            while f.is_none() && reg < 1e-4 * scale {
                for i in 0..m {
                    mm[(i, i)] = schur[(i, i)] + reg;
                }
                f = mm.clone().cholesky();
                reg *= 100.0;
            }
            match f {
                Some(f) => f,
                None => break,
            }
        };

        // X R_d Z⁻¹ contribution is shared by predictor and corrector
        let xrdz: Vec<DMatrix<f64>> = x
            .iter()
            .zip(&rd)
            .zip(&zinv)
            .map(|((xb, rb), zb)| match (xb, rb, zb) {
                (Blk::D(xm), Blk::D(rm), Blk::D(zm)) => xm * rm * zm,
                (Blk::V(xv), Blk::V(rv), Blk::V(zv)) => DMatrix::from_diagonal(&xv.component_mul(rv).component_mul(zv)),
                _ => unreachable!(),
            })
            .collect();

        let direction = |sigma_mu: f64, corr: Option<(&Blocks, &Blocks)>| -> (Blocks, DVector<f64>, Blocks) {
            // K = (σμ I − ΔX_a ΔZ_a) Z⁻¹
            let k: Vec<DMatrix<f64>> = zinv
                .iter()
                .enumerate()
                .map(|(bi, zb)| match zb {
                    Blk::D(zm) => {
                        let mut t = zm * sigma_mu;
                        if let Some((dx, dz)) = corr {
                            if let (Blk::D(a), Blk::D(b)) = (&dx[bi], &dz[bi]) {
                                t -= a * b * zm;
                            }
                        }
                        t
                    }
                    Blk::V(zv) => {
                        let mut t = zv * sigma_mu;
                        if let Some((dx, dz)) = corr {
                            if let (Blk::V(a), Blk::V(b)) = (&dx[bi], &dz[bi]) {
                                t -= a.component_mul(b).component_mul(zv);
                            }
                        }
                        DMatrix::from_diagonal(&t)
                    }
                })
                .collect();
            let kb: Blocks = k
                .iter()
                .zip(&s.kinds)
                .map(|(km, kind)| match kind {
                    BlockKind::Psd(_) => Blk::D(km.clone()),
                    BlockKind::Diagonal(_) => Blk::V(km.diagonal()),
                })
                .collect();
            let xrdzb: Blocks = xrdz
                .iter()
                .zip(&s.kinds)
                .map(|(km, kind)| match kind {
                    BlockKind::Psd(_) => Blk::D(km.clone()),
                    BlockKind::Diagonal(_) => Blk::V(km.diagonal()),
                })
                .collect();
            let rhs = &s.b - s.op(&kb) + s.op(&xrdzb);
            let dy = chol.solve(&rhs);
            let dz = sub(&rd, &s.adj(&dy));
            let dx: Blocks = (0..s.kinds.len())
                .map(|bi| match (&x[bi], &dz[bi], &zinv[bi]) {
                    (Blk::D(xm), Blk::D(dzm), Blk::D(zm)) => {
                        Blk::D(sym(&k[bi] - xm - xm * dzm * zm))
                    }
                    (Blk::V(xv), Blk::V(dzv), Blk::V(zv)) => {
                        Blk::V(k[bi].diagonal() - xv - xv.component_mul(dzv).component_mul(zv))
                    }
                    _ => unreachable!(),
                })
                .collect();
            (dx, dy, dz)
        };

        let (dxa, _, dza) = direction(0.0, None);
        let (Some(ap), Some(ad)) = (max_step(&x, &dxa), max_step(&z, &dza)) else {
            break;
        };
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mut xa = x.clone();
        axpy(ap, &dxa, &mut xa);
        let mut za = z.clone();
        axpy(ad, &dza, &mut za);
        let mu_aff = inner(&xa, &za) / n_total;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let (dx, dy, dz) = direction(sigma * mu, Some((&dxa, &dza)));
        let (Some(ap), Some(ad)) = (max_step(&x, &dx), max_step(&z, &dz)) else {
            break;
        };
        let ap = (0.95 * ap).min(1.0);
        let ad = (0.95 * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalled += 1;
            if stalled > 3 {
                break;
            }
        } else {
            stalled = 0;
        }
        axpy(ap, &dx, &mut x);
        axpy(ad, &dz, &mut z);
        y += dy * ad;
    }
    if let Some(b) = best {
        return b;
    }
    let status = if inverse(&z).is_none() || inverse(&x).is_none() {
        SdpStatus::NumericalFailure
    } else {
        SdpStatus::MaxIterations
    };
    raw(status, &x, &y, &z, opts.max_iterations)
}

/// SDPA sparse format for the equivalent problem
/// `minimize (−b)·y  s.t.  Σ yᵢ Fᵢ − (−F₀) ⪰ 0`. Equalities are not representable
/// and must be absent.
pub fn to_sdpa(p: &SdpProblem) -> Result<String> {
    if !p.equalities.is_empty() {
        return Err(Error::param("equalities", "SDPA dump requires an equality-free problem"));
    }
    let mut out = String::new();
    writeln!(out, "{}", p.num_vars()).unwrap();
    writeln!(out, "{}", p.blocks.len()).unwrap();
    let sizes: Vec<String> = p
        .blocks
        .iter()
        .map(|b| match b {
            BlockKind::Psd(n) => n.to_string(),
            BlockKind::Diagonal(n) => format!("-{n}"),
        })
        .collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let c: Vec<String> = p.objective.iter().map(|v| format!("{:?}", -v)).collect();
    writeln!(out, "{}", c.join(" ")).unwrap();
    for e in merge(p.constant.iter().copied()) {
        writeln!(out, "0 {} {} {} {:?}", e.block + 1, e.row + 1, e.col + 1, -e.value).unwrap();
    }
    for (i, fi) in p.coefficients.iter().enumerate() {
        for e in merge(fi.iter().copied()) {
            writeln!(out, "{} {} {} {} {:?}", i + 1, e.block + 1, e.row + 1, e.col + 1, e.value).unwrap();
        }
    }
    Ok(out)
}

/// Reads the format written by [`to_sdpa`].
pub fn from_sdpa(text: &str) -> Result<SdpProblem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split(['"', '*']).next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::parse(0, 1, format!("missing {what}")));
    let num = |line: usize, t: &str| -> Result<f64> {
        t.parse::<f64>()
            .map_err(|_| Error::parse(line, 1, format!("invalid number `{t}`")))
    };
    let (l, t) = next("variable count")?;
    let m = num(l, t)? as usize;
    let (l, t) = next("block count")?;
    let nb = num(l, t)? as usize;
    let (l, t) = next("block sizes")?;
    let blocks = t
        .split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '(' || c == ')')
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v = num(l, s)? as i64;
            Ok(if v < 0 {
                BlockKind::Diagonal((-v) as usize)
            } else {
                BlockKind::Psd(v as usize)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if blocks.len() != nb {
        return Err(Error::parse(l, 1, "block count mismatch"));
    }
    let (l, t) = next("objective")?;
    let c = t
        .split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}')
        .filter(|s| !s.is_empty())
        .map(|s| num(l, s))
        .collect::<Result<Vec<_>>>()?;
    if c.len() != m {
        return Err(Error::parse(l, 1, format!("expected {m} objective entries")));
    }
    let mut p = SdpProblem::new(blocks);
    for v in c {
        p.add_var(-v);
    }
    for (l, t) in lines {
        let f: Vec<&str> = t.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(l, 1, "entry lines need 5 fields"));
        }
        let mat = num(l, f[0])? as usize;
        let blk = num(l, f[1])? as usize;
        let (i, j) = (num(l, f[2])? as usize, num(l, f[3])? as usize);
        let v = num(l, f[4])?;
        if blk == 0 || i == 0 || j == 0 || blk > p.blocks.len() || mat > m {
            return Err(Error::parse(l, 1, "index out of range"));
        }
        if mat == 0 {
            p.add_constant(blk - 1, i - 1, j - 1, -v);
        } else {
            p.add_coefficient(mat - 1, blk - 1, i - 1, j - 1, v);
        }
    }
    Ok(p)
}
