//! Deterministic strategies of a Bell scenario and exact queries on the local
//! polytope they span.

use nalgebra::DMatrix;
use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{BellFunctional, Form, ProbabilityTable, Scenario};

pub const DEFAULT_VERTEX_CAP: u128 = 1_000_000;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_REL_TOL: f64 = 1e-7;
/// Largest denominator tried when looking for an exact integer form.
const MAX_DENOMINATOR: i64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicVertex {
    pub assign_a: Vec<usize>,
    pub assign_b: Vec<usize>,
    pub table: ProbabilityTable,
}

impl DeterministicVertex {
    pub fn cg(&self) -> Vec<f64> {
        let s = self.table.scenario();
        let mut v = vec![0.0; s.cg_dim()];
        for i in cg_support(s, &self.assign_a, &self.assign_b) {
            v[i] = 1.0;
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalBound {
    pub value: f64,
    /// Set when the functional has small-denominator rational coefficients.
    pub exact: Option<Rational64>,
    /// Indices into [`enumerate_vertices`] attaining the bound.
    pub saturating: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceAnalysis {
    pub side: Side,
    pub bound: f64,
    pub saturating_count: usize,
    /// Dimension of the affine hull of the saturating vertices (CG coordinates).
    pub affine_dimension: usize,
    /// Maximal number of affinely independent saturating vertices,
    /// `affine_dimension + 1`.
    pub independent_vertices: usize,
    pub is_facet: bool,
}

/// Alice strategy `k` in mixed radix, setting 0 most significant.
fn decode(mut k: u128, outputs: &[usize]) -> Vec<usize> {
    let mut out = vec![0; outputs.len()];
    for (slot, &o) in out.iter_mut().zip(outputs).rev() {
        *slot = (k % o as u128) as usize;
        k /= o as u128;
    }
    out
}

fn cg_support(s: &Scenario, aa: &[usize], ab: &[usize]) -> Vec<usize> {
    let mut idx = Vec::new();
    let a_live: Vec<Option<usize>> = aa
        .iter()
        .enumerate()
        .map(|(x, &a)| (a + 1 < s.outputs_a()[x]).then_some(a))
        .collect();
    let b_live: Vec<Option<usize>> = ab
        .iter()
        .enumerate()
        .map(|(y, &b)| (b + 1 < s.outputs_b()[y]).then_some(b))
        .collect();
    for (x, a) in a_live.iter().enumerate() {
        if let Some(a) = a {
            idx.push(s.cg_alice(x, *a));
        }
    }
    for (y, b) in b_live.iter().enumerate() {
        let Some(b) = b else { continue };
        idx.push(s.cg_bob(y, *b));
        for (x, a) in a_live.iter().enumerate() {
            if let Some(a) = a {
                idx.push(s.cg_joint(x, y, *a, *b));
            }
        }
    }
    idx.sort_unstable();
    idx
}

fn full_support(s: &Scenario, aa: &[usize], ab: &[usize]) -> Vec<usize> {
    let mut idx = Vec::with_capacity(aa.len() * ab.len());
    for (x, &a) in aa.iter().enumerate() {
        for (y, &b) in ab.iter().enumerate() {
            idx.push(s.full_index(x, y, a, b));
        }
    }
    idx
}

pub fn enumerate_vertices(s: &Scenario) -> Result<Vec<DeterministicVertex>> {
    enumerate_vertices_capped(s, DEFAULT_VERTEX_CAP)
}

/// All deterministic strategies; vertex `i` pairs Alice strategy `i / n_b`
/// with Bob strategy `i % n_b`.
pub fn enumerate_vertices_capped(s: &Scenario, cap: u128) -> Result<Vec<DeterministicVertex>> {
    let count = s.strategy_count();
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let nb: u128 = s.outputs_b().iter().map(|&o| o as u128).product();
    (0..count)
        .into_par_iter()
        .map(|k| {
            let assign_a = decode(k / nb, s.outputs_a());
            let assign_b = decode(k % nb, s.outputs_b());
            let mut e = vec![0.0; s.full_dim()];
            for i in full_support(s, &assign_a, &assign_b) {
                e[i] = 1.0;
            }
            let table = ProbabilityTable::new(s.clone(), e)?;
            Ok(DeterministicVertex {
                assign_a,
                assign_b,
                table,
            })
        })
        .collect()
}

/// Vertex data reused across many functionals of one scenario.
#[derive(Debug, Clone)]
pub struct LocalPolytope {
    scenario: Scenario,
    vertices: Vec<DeterministicVertex>,
    cg_support: Vec<Vec<usize>>,
    full_support: Vec<Vec<usize>>,
}

impl LocalPolytope {
    pub fn new(s: &Scenario) -> Result<Self> {
        Self::with_cap(s, DEFAULT_VERTEX_CAP)
    }

    pub fn with_cap(s: &Scenario, cap: u128) -> Result<Self> {
        let vertices = enumerate_vertices_capped(s, cap)?;
        let cg_support = vertices
            .iter()
            .map(|v| cg_support(s, &v.assign_a, &v.assign_b))
            .collect();
        let full_support = vertices
            .iter()
            .map(|v| full_support(s, &v.assign_a, &v.assign_b))
            .collect();
        Ok(Self {
            scenario: s.clone(),
            vertices,
            cg_support,
            full_support,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn vertices(&self) -> &[DeterministicVertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// CG coordinates of vertex `i`.
    pub fn vertex_cg(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.scenario.cg_dim()];
        for &k in &self.cg_support[i] {
            v[k] = 1.0;
        }
        v
    }

    /// Indices of the CG coordinates equal to one at vertex `i`.
    pub fn vertex_cg_support(&self, i: usize) -> &[usize] {
        &self.cg_support[i]
    }

    fn support(&self, form: Form, i: usize) -> &[usize] {
        match form {
            Form::CollinsGisin => &self.cg_support[i],
            Form::Full => &self.full_support[i],
        }
    }

    /// Value of `f` at every vertex, in vertex order.
    pub fn values(&self, f: &BellFunctional) -> Result<Vec<f64>> {
        self.check(f)?;
        let c = f.coefficients();
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| f.constant() + self.support(f.form(), i).iter().map(|&k| c[k]).sum::<f64>())
            .collect())
    }

    fn integer_values(&self, f: &BellFunctional) -> Option<(i64, Vec<i64>)> {
        let (d, ints) = f.integer_form(MAX_DENOMINATOR)?;
        let (constant, coeffs) = ints.split_last()?;
        let vals = (0..self.len())
            .into_par_iter()
            .map(|i| constant + self.support(f.form(), i).iter().map(|&k| coeffs[k]).sum::<i64>())
            .collect();
        Some((d, vals))
    }

    fn check(&self, f: &BellFunctional) -> Result<()> {
        if f.scenario() != &self.scenario {
            return Err(Error::ScenarioMismatch);
        }
        Ok(())
    }

    pub fn bound(&self, f: &BellFunctional, side: Side) -> Result<LocalBound> {
        self.check(f)?;
        let pick = |a: f64, b: f64| match side {
            Side::Max => a.max(b),
            Side::Min => a.min(b),
        };
        if let Some((d, vals)) = self.integer_values(f) {
            let best = match side {
                Side::Max => *vals.iter().max().expect("non-empty"),
                Side::Min => *vals.iter().min().expect("non-empty"),
            };
            let saturating = vals
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == best)
                .map(|(i, _)| i)
                .collect();
            let exact = Rational64::new(best, d);
            return Ok(LocalBound {
                value: *exact.numer() as f64 / *exact.denom() as f64,
                exact: Some(exact),
                saturating,
            });
        }
        let vals = self.values(f)?;
        let best = vals.iter().copied().reduce(pick).expect("non-empty");
        let scale = f
            .coefficients()
            .iter()
            .fold(f.constant().abs(), |m, c| m.max(c.abs()))
            .max(f64::MIN_POSITIVE);
        let tol = 1e-9 * scale;
        let saturating = vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| (v - best).abs() <= tol)
            .map(|(i, _)| i)
            .collect();
        Ok(LocalBound {
            value: best,
            exact: None,
            saturating,
        })
    }

    pub fn face_analysis(&self, f: &BellFunctional, side: Side) -> Result<FaceAnalysis> {
        let b = self.bound(f, side)?;
        let pts: Vec<Vec<f64>> = b.saturating.iter().map(|&i| self.vertex_cg(i)).collect();
        let affine_dimension = affine_rank(&pts);
        let full = self.scenario.cg_dim();
        Ok(FaceAnalysis {
            side,
            bound: b.value,
            saturating_count: pts.len(),
            affine_dimension,
            independent_vertices: affine_dimension + 1,
            is_facet: affine_dimension + 1 == full,
        })
    }
}

/// Dimension of the affine hull of `pts`.
pub fn affine_rank(pts: &[Vec<f64>]) -> usize {
    let Some((first, rest)) = pts.split_first() else {
        return 0;
    };
    if rest.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(first.len(), rest.len(), |r, c| rest[c][r] - first[r]);
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_REL_TOL * top).count()
}

pub fn local_bound_max(f: &BellFunctional) -> Result<LocalBound> {
    LocalPolytope::new(f.scenario())?.bound(f, Side::Max)
}

pub fn local_bound_min(f: &BellFunctional) -> Result<LocalBound> {
    LocalPolytope::new(f.scenario())?.bound(f, Side::Min)
}

pub fn face_analysis(f: &BellFunctional, side: Side) -> Result<FaceAnalysis> {
    LocalPolytope::new(f.scenario())?.face_analysis(f, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::check_nonsignaling;

    #[test]
    fn counts() {
        assert_eq!(enumerate_vertices(&Scenario::flagship()).unwrap().len(), 729);
        let chsh = Scenario::uniform(2, 2, 2).unwrap();
        assert_eq!(enumerate_vertices(&chsh).unwrap().len(), 16);
        let uneven = Scenario::new(vec![3, 2], vec![2, 2, 2]).unwrap();
        assert_eq!(enumerate_vertices(&uneven).unwrap().len(), 48);
    }

    #[test]
    fn cap_enforced() {
        let s = Scenario::uniform(13, 13, 3).unwrap();
        assert!(matches!(enumerate_vertices(&s), Err(Error::CapExceeded { .. })));
        assert!(enumerate_vertices_capped(&Scenario::flagship(), 100).is_err());
    }

    #[test]
    fn vertices_are_distinct_and_nonsignaling() {
        let vs = enumerate_vertices(&Scenario::flagship()).unwrap();
        let mut seen = std::collections::HashSet::new();
        for v in &vs {
            assert!(check_nonsignaling(&v.table, 0.0));
            assert!(seen.insert((v.assign_a.clone(), v.assign_b.clone())));
            assert_eq!(v.cg(), v.table.to_cg());
        }
    }

    #[test]
    fn chsh_bounds() {
        let s = Scenario::uniform(2, 2, 2).unwrap();
        // CG form of CHSH: p(00|00)+p(00|01)+p(00|10)-p(00|11)-pA(0|0)-pB(0|0) <= 0
        let mut c = vec![0.0; s.cg_dim()];
        c[s.cg_alice(0, 0)] = -1.0;
        c[s.cg_bob(0, 0)] = -1.0;
        c[s.cg_joint(0, 0, 0, 0)] = 1.0;
        c[s.cg_joint(0, 1, 0, 0)] = 1.0;
        c[s.cg_joint(1, 0, 0, 0)] = 1.0;
        c[s.cg_joint(1, 1, 0, 0)] = -1.0;
        let f = BellFunctional::new(s, Form::CollinsGisin, c).unwrap();
        let hi = local_bound_max(&f).unwrap();
        assert_eq!(hi.exact, Some(Rational64::from_integer(0)));
        let fa = face_analysis(&f, Side::Max).unwrap();
        assert!(fa.is_facet);
        assert_eq!(fa.affine_dimension, 7);
        assert_eq!(local_bound_min(&f).unwrap().value, -1.0);
    }

    #[test]
    fn float_path_matches_exact() {
        let s = Scenario::flagship();
        let c: Vec<f64> = (0..48).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.5).collect();
        let f = BellFunctional::new(s.clone(), Form::CollinsGisin, c).unwrap();
        let exact = local_bound_max(&f).unwrap();
        assert!(exact.exact.is_some());
        let g = f.scaled(std::f64::consts::PI);
        let float = local_bound_max(&g).unwrap();
        assert!(float.exact.is_none());
        assert!((float.value - exact.value * std::f64::consts::PI).abs() < 1e-9);
        assert_eq!(float.saturating, exact.saturating);
    }

    #[test]
    fn affine_rank_of_simplex() {
        let pts = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]];
        assert_eq!(affine_rank(&pts), 2);
        assert_eq!(affine_rank(&pts[..1]), 0);
    }
}
