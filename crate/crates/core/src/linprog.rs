//! Dense revised simplex and the white-noise visibility program.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::polytope::{FaceAnalysis, LocalPolytope, Side};
use crate::scenario::{
    check_nonsignaling, signaling_deltas, BellFunctional, Form, ProbabilityTable, NONSIGNALING_TOL,
};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const MAX_ITERATIONS: usize = 100_000;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LowerBound {
    Zero,
    Free,
}

/// `maximize c·x  s.t.  A x = b`, each `x_j ≥ 0` or free.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<LowerBound>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, a_eq: DMatrix<f64>, b_eq: Vec<f64>, lower: Vec<LowerBound>) -> Result<Self> {
        let n = objective.len();
        if a_eq.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a_eq.ncols() });
        }
        if a_eq.nrows() != b_eq.len() {
            return Err(Error::DimensionMismatch { expected: a_eq.nrows(), found: b_eq.len() });
        }
        if lower.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: lower.len() });
        }
        let finite = objective.iter().chain(&b_eq).chain(a_eq.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("lp", "non-finite data"));
        }
        Ok(Self { objective, a_eq, b_eq, lower })
    }

    /// Nonnegative variables throughout.
    pub fn standard(objective: Vec<f64>, a_eq: DMatrix<f64>, b_eq: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        Self::new(objective, a_eq, b_eq, vec![LowerBound::Zero; n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpCertificate {
    pub status: LpStatus,
    pub primal_value: f64,
    pub primal_solution: Vec<f64>,
    /// Row multipliers `y` with `Aᵀy ≥ c` (equality on free columns).
    pub dual_solution: Vec<f64>,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub iterations: usize,
    /// Structural columns basic at the optimum.
    pub basis: Vec<usize>,
}

struct Simplex {
    a: DMatrix<f64>,
    b: DVector<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    iterations: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Simplex {
    fn refactor(&mut self) -> Result<()> {
        let m = self.a.nrows();
        let bmat = DMatrix::from_fn(m, m, |i, k| self.a[(i, self.basis[k])]);
        self.binv = bmat
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::LpFailure("singular basis".into()))?;
        self.xb = &self.binv * &self.b;
        Ok(())
    }

    fn run(&mut self, c: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<Phase> {
        let (m, n) = self.a.shape();
        let mut since_refactor = 0;
        loop {
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            if self.iterations >= MAX_ITERATIONS {
                return Err(Error::LpFailure(format!("iteration cap {MAX_ITERATIONS} reached")));
            }
            let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| c[j]));
            let pi = self.binv.tr_mul(&cb);
            // Bland: lowest index with positive reduced cost
            let entering = (0..n).find(|&j| {
                !self.is_basic[j] && allowed(j) && {
                    let rc = c[j] - pi.dot(&self.a.column(j));
                    rc > COST_TOL * (1.0 + c[j].abs())
                }
            });
            let Some(j) = entering else {
                return Ok(Phase::Optimal);
            };
            let d = &self.binv * self.a.column(j);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if d[i] > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / d[i];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r]) {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Phase::Unbounded);
            };
            self.pivot(r, j, &d);
            since_refactor += 1;
        }
    }

    fn pivot(&mut self, r: usize, j: usize, d: &DVector<f64>) {
        let m = self.a.nrows();
        let dr = d[r];
        let row_r = self.binv.row(r).into_owned() / dr;
        let xr = self.xb[r] / dr;
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = d[i];
            if f != 0.0 {
                for k in 0..m {
                    self.binv[(i, k)] -= f * row_r[k];
                }
                self.xb[i] -= f * xr;
            }
        }
        self.binv.set_row(r, &row_r);
        self.xb[r] = xr;
        self.is_basic[self.basis[r]] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
        self.iterations += 1;
    }
}

/// Solves the LP with a two-phase revised simplex under Bland's rule.
pub fn lp_solve(p: &LpProblem) -> Result<LpCertificate> {
    let m = p.a_eq.nrows();
    let nvar = p.objective.len();
    // structural columns: x_j (and -x_j for free variables), then artificials
    let mut cols: Vec<(usize, f64)> = Vec::new();
    for (j, lb) in p.lower.iter().enumerate() {
        cols.push((j, 1.0));
        if *lb == LowerBound::Free {
            cols.push((j, -1.0));
        }
    }
    let ns = cols.len();
    let sign: Vec<f64> = p.b_eq.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let a = DMatrix::from_fn(m, ns + m, |i, k| {
        if k < ns {
            let (j, s) = cols[k];
            sign[i] * s * p.a_eq[(i, j)]
        } else if k - ns == i {
            1.0
        } else {
            0.0
        }
    });
    let b = DVector::from_iterator(m, p.b_eq.iter().zip(&sign).map(|(v, s)| v * s));
    let mut is_basic = vec![false; ns + m];
    for flag in &mut is_basic[ns..] {
        *flag = true;
    }
    let mut sx = Simplex {
        a,
        b: b.clone(),
        basis: (ns..ns + m).collect(),
        is_basic,
        binv: DMatrix::identity(m, m),
        xb: b,
        iterations: 0,
    };

    let c1: Vec<f64> = (0..ns + m).map(|k| if k >= ns { -1.0 } else { 0.0 }).collect();
    sx.run(&c1, &|_| true)?;
    sx.refactor()?;
    let infeas: f64 = sx
        .basis
        .iter()
        .zip(sx.xb.iter())
        .filter(|(&j, _)| j >= ns)
        .map(|(_, &v)| v)
        .sum();
    let bnorm = p.b_eq.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeas > FEAS_TOL * (1.0 + bnorm) {
        return Ok(LpCertificate {
            status: LpStatus::Infeasible,
            primal_value: f64::NAN,
            primal_solution: vec![],
            dual_solution: vec![],
            duality_gap: f64::NAN,
            primal_residual: infeas,
            iterations: sx.iterations,
            basis: vec![],
        });
    }
    // drive remaining artificials out where possible
    for r in 0..m {
        if sx.basis[r] < ns {
            continue;
        }
        let row = sx.binv.row(r).into_owned();
        let cand = (0..ns).find(|&k| !sx.is_basic[k] && (&row * sx.a.column(k))[0].abs() > 1e-7);
        if let Some(k) = cand {
            let d = &sx.binv * sx.a.column(k);
            sx.pivot(r, k, &d);
        }
    }
    sx.refactor()?;

    let c2: Vec<f64> = (0..ns + m)
        .map(|k| if k < ns { cols[k].1 * p.objective[cols[k].0] } else { 0.0 })
        .collect();
    let phase = sx.run(&c2, &|k| k < ns)?;
    sx.refactor()?;
    if let Phase::Unbounded = phase {
        return Ok(LpCertificate {
            status: LpStatus::Unbounded,
            primal_value: f64::INFINITY,
            primal_solution: vec![],
            dual_solution: vec![],
            duality_gap: f64::NAN,
            primal_residual: 0.0,
            iterations: sx.iterations,
            basis: vec![],
        });
    }

    let mut x = vec![0.0; nvar];
    for (r, &k) in sx.basis.iter().enumerate() {
        if k < ns {
            let (j, s) = cols[k];
            x[j] += s * sx.xb[r];
        }
    }
    let cb = DVector::from_iterator(m, sx.basis.iter().map(|&k| c2[k]));
    let pi = sx.binv.tr_mul(&cb);
    let y: Vec<f64> = pi.iter().zip(&sign).map(|(v, s)| v * s).collect();
    let primal: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let dual: f64 = p.b_eq.iter().zip(&y).map(|(b, v)| b * v).sum();
    let xv = DVector::from_column_slice(&x);
    let residual = (&p.a_eq * &xv - DVector::from_column_slice(&p.b_eq)).amax();
    if residual > FEAS_TOL * (1.0 + bnorm) {
        return Err(Error::LpFailure(format!("primal residual {residual:.2e} after refactorization")));
    }
    let basis = sx.basis.iter().filter(|&&k| k < ns).map(|&k| cols[k].0).collect();
    Ok(LpCertificate {
        status: LpStatus::Optimal,
        primal_value: primal,
        primal_solution: x,
        dual_solution: y,
        duality_gap: (primal - dual).abs(),
        primal_residual: residual,
        iterations: sx.iterations,
        basis,
    })
}

/// Exact facet certificate: coprime integer CG functional `β·P ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetCertificate {
    pub functional: BellFunctional,
    pub face: FaceAnalysis,
}

impl FacetCertificate {
    pub fn is_facet(&self) -> bool {
        self.face.is_facet
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalVisibility {
    /// `min(1, v*)`.
    pub v_cr: f64,
    /// Unclamped LP optimum.
    pub lp_value: f64,
    pub certificate: Option<FacetCertificate>,
    pub lp: LpCertificate,
}

fn require_nonsignaling(p: &ProbabilityTable) -> Result<()> {
    if !check_nonsignaling(p, NONSIGNALING_TOL) {
        return Err(Error::Signaling {
            max_delta: signaling_deltas(p).max_delta,
        });
    }
    Ok(())
}

/// `max v` such that `v·p + (1−v)·P₁` is a convex mixture of vertices.
fn visibility_lp(lp: &LocalPolytope, p: &ProbabilityTable) -> Result<LpCertificate> {
    let s = lp.scenario();
    let dim = s.cg_dim();
    let nv = lp.len();
    let target = p.to_cg();
    let noise = ProbabilityTable::uniform(s).to_cg();
    let mut a = DMatrix::zeros(dim + 1, nv + 1);
    for i in 0..nv {
        for &k in lp.vertex_cg_support(i) {
            a[(k, i)] = 1.0;
        }
        a[(dim, i)] = 1.0;
    }
    for k in 0..dim {
        a[(k, nv)] = noise[k] - target[k];
    }
    let mut b = noise;
    b.push(1.0);
    let mut c = vec![0.0; nv + 1];
    c[nv] = 1.0;
    let mut lower = vec![LowerBound::Zero; nv + 1];
    lower[nv] = LowerBound::Free;
    lp_solve(&LpProblem::new(c, a, b, lower)?)
}

pub fn visibility_wrt_local_set(p: &ProbabilityTable) -> Result<LocalVisibility> {
    let lp = LocalPolytope::new(p.scenario())?;
    visibility_with(&lp, p)
}

pub fn visibility_with(lp: &LocalPolytope, p: &ProbabilityTable) -> Result<LocalVisibility> {
    require_nonsignaling(p)?;
    let cert = visibility_lp(lp, p)?;
    match cert.status {
        LpStatus::Optimal => {}
        // p equals the noise point
        LpStatus::Unbounded => {
            return Ok(LocalVisibility {
                v_cr: 1.0,
                lp_value: f64::INFINITY,
                certificate: None,
                lp: cert,
            })
        }
        LpStatus::Infeasible => return Err(Error::LpFailure("visibility LP infeasible".into())),
    }
    let v = cert.primal_value;
    let certificate = if v < 1.0 - 1e-9 {
        Some(exact_certificate(lp, p, &cert)?)
    } else {
        None
    };
    Ok(LocalVisibility {
        v_cr: v.min(1.0),
        lp_value: v,
        certificate,
        lp: cert,
    })
}

/// Facet-defining inequality separating `p` from the local set.
pub fn facet_from_correlation(p: &ProbabilityTable) -> Result<FacetCertificate> {
    visibility_wrt_local_set(p)?.certificate.ok_or(Error::LocalInput)
}

fn big_rref_nullvector(rows: Vec<Vec<i64>>, ncols: usize) -> Option<Vec<BigInt>> {
    let mut m: Vec<Vec<BigRational>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| BigRational::from_integer(v.into())).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        let Some(pr) = (row..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(row, pr);
        let inv = m[row][col].recip();
        for v in m[row].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..m.len() {
            if i != row && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                let (ri, rr) = if i < row {
                    let (lo, hi) = m.split_at_mut(row);
                    (&mut lo[i], &hi[0])
                } else {
                    let (lo, hi) = m.split_at_mut(i);
                    (&mut hi[0], &lo[row])
                };
                for (a, b) in ri.iter_mut().zip(rr) {
                    *a = &*a - &f * b;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    if free.len() != 1 {
        return None;
    }
    let fc = free[0];
    let mut z = vec![BigRational::zero(); ncols];
    z[fc] = BigRational::one();
    for (r, &pc) in pivots.iter().enumerate() {
        z[pc] = -m[r][fc].clone();
    }
    let lcm = z.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let ints: Vec<BigInt> = z.iter().map(|v| (v * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, v| acc.gcd(v));
    Some(ints.into_iter().map(|v| v / &g).collect())
}

/// The dual of an optimal basis is determined by its tight vertices: solve
/// `y·V_i + y₀ = 0` exactly over the basic vertex columns.
fn exact_certificate(lp: &LocalPolytope, p: &ProbabilityTable, cert: &LpCertificate) -> Result<FacetCertificate> {
    let s = lp.scenario();
    let dim = s.cg_dim();
    let nv = lp.len();
    let rows: Vec<Vec<i64>> = cert
        .basis
        .iter()
        .filter(|&&j| j < nv)
        .map(|&i| {
            let mut r = vec![0i64; dim + 1];
            for &k in lp.vertex_cg_support(i) {
                r[k] = 1;
            }
            r[dim] = 1;
            r
        })
        .collect();
    let z = big_rref_nullvector(rows, dim + 1)
        .ok_or_else(|| Error::LpFailure("optimal basis does not fix a unique hyperplane".into()))?;
    let mut z: Vec<i64> = z
        .iter()
        .map(|v| v.to_i64())
        .collect::<Option<_>>()
        .ok_or_else(|| Error::LpFailure("certificate coefficients overflow i64".into()))?;
    // orient so that y·p + y₀ < 0
    let pc = p.to_cg();
    let at_p: f64 = z[..dim].iter().zip(&pc).map(|(&a, b)| a as f64 * b).sum::<f64>() + z[dim] as f64;
    if at_p > 0.0 {
        for v in z.iter_mut() {
            *v = -*v;
        }
    }
    for i in 0..nv {
        let val: i64 = lp.vertex_cg_support(i).iter().map(|&k| z[k]).sum::<i64>() + z[dim];
        if val < 0 {
            return Err(Error::LpFailure(format!("certificate violated at vertex {i}")));
        }
    }
    let beta: Vec<f64> = z[..dim].iter().map(|&v| -(v as f64)).collect();
    let bound = z[dim] as f64;
    let f = BellFunctional::new(s.clone(), Form::CollinsGisin, beta)?;
    let lo = lp.bound(&f, Side::Min)?.value;
    let functional = f.with_bounds(Some(bound), Some(lo))?;
    let face = lp.face_analysis(&functional, Side::Max)?;
    Ok(FacetCertificate { functional, face })
}

/// `(S_L − S₁)/(S_p − S₁)` clamped to `[0, 1]`; 1 when `p` does not violate `f`.
pub fn visibility_wrt_inequality(p: &ProbabilityTable, f: &BellFunctional) -> Result<f64> {
    let bound = match f.local_max {
        Some(b) => b,
        None => crate::polytope::local_bound_max(f)?.value,
    };
    let sp = f.evaluate(p)?;
    let s1 = f.evaluate(&ProbabilityTable::uniform(p.scenario()))?;
    Ok(visibility_from_values(sp, s1, bound))
}

pub fn visibility_from_values(s_p: f64, s_noise: f64, local_max: f64) -> f64 {
    if s_p <= local_max {
        return 1.0;
    }
    ((local_max - s_noise) / (s_p - s_noise)).clamp(0.0, 1.0)
}

/// Whether `p` is a convex mixture of deterministic vertices (phase-one feasibility).
pub fn is_local(lp: &LocalPolytope, p: &ProbabilityTable) -> Result<bool> {
    require_nonsignaling(p)?;
    let dim = lp.scenario().cg_dim();
    let nv = lp.len();
    let mut a = DMatrix::zeros(dim + 1, nv);
    for i in 0..nv {
        for &k in lp.vertex_cg_support(i) {
            a[(k, i)] = 1.0;
        }
        a[(dim, i)] = 1.0;
    }
    let mut b = p.to_cg();
    b.push(1.0);
    let cert = lp_solve(&LpProblem::standard(vec![0.0; nv], a, b)?)?;
    Ok(cert.status == LpStatus::Optimal)
}

/// Functional file text with a provenance header of `#` comments.
pub fn serialize_certificate(c: &FacetCertificate, v_cr: f64, iterations: usize, input_hash: &str) -> String {
    let mut out = String::new();
    writeln!(out, "# input_sha256 {input_hash}").unwrap();
    writeln!(out, "# v_cr {v_cr:?}").unwrap();
    writeln!(out, "# iterations {iterations}").unwrap();
    writeln!(out, "# facet {} (affine dimension {})", c.face.is_facet, c.face.affine_dimension).unwrap();
    out.push_str(&crate::scenario::io::serialize_functional(&c.functional));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn trivial_lp() {
        let p = LpProblem::standard(vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![1.0]).unwrap();
        let c = lp_solve(&p).unwrap();
        assert_eq!(c.status, LpStatus::Optimal);
        assert!((c.primal_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transportation() {
        // two supplies (20, 30), three demands (10, 25, 15); minimize cost
        let cost = [8.0, 6.0, 10.0, 9.0, 12.0, 13.0];
        let mut a = DMatrix::zeros(5, 6);
        for s in 0..2 {
            for d in 0..3 {
                a[(s, s * 3 + d)] = 1.0;
                a[(2 + d, s * 3 + d)] = 1.0;
            }
        }
        let p = LpProblem::standard(cost.iter().map(|c| -c).collect(), a, vec![20.0, 30.0, 10.0, 25.0, 15.0]).unwrap();
        let c = lp_solve(&p).unwrap();
        // hand solution: x12=20, x21=10, x22=5, x23=15, cost 465
        assert!((c.primal_value + 465.0).abs() < 1e-9, "{}", c.primal_value);
        assert!(c.duality_gap < 1e-7);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let p = LpProblem::standard(vec![1.0], a, vec![1.0, 2.0]).unwrap();
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Infeasible);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let p = LpProblem::standard(vec![1.0, 0.0], a, vec![1.0]).unwrap();
        assert_eq!(lp_solve(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variable_and_negative_rhs() {
        // max -|x| style: x = -3 with free x, objective x
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let p = LpProblem::new(vec![1.0], a, vec![-3.0], vec![LowerBound::Free]).unwrap();
        let c = lp_solve(&p).unwrap();
        assert!((c.primal_value + 3.0).abs() < 1e-12);
        assert!((c.dual_solution[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_is_local() {
        let s = Scenario::flagship();
        let lp = LocalPolytope::new(&s).unwrap();
        let v = &lp.vertices()[100].table;
        let r = visibility_with(&lp, v).unwrap();
        assert_eq!(r.v_cr, 1.0);
        assert!(r.certificate.is_none());
        assert!(is_local(&lp, v).unwrap());
    }

    #[test]
    fn signaling_rejected() {
        let s = Scenario::flagship();
        let mut e = ProbabilityTable::uniform(&s).into_entries();
        e[0] += 0.01;
        e[3] -= 0.01;
        let p = ProbabilityTable::new(s, e).unwrap();
        assert!(matches!(visibility_wrt_local_set(&p), Err(Error::Signaling { .. })));
    }

    #[test]
    fn inequality_visibility_formula() {
        assert!((visibility_from_values(0.7124, 1.0 / 3.0, 2.0 / 3.0) - 0.8794).abs() < 1e-4);
        assert_eq!(visibility_from_values(2.0, 0.0, 2.0), 1.0);
    }
}
