//! Seesaw maximization of Bell values at fixed local dimension.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eigenvalues, hermitize, top_eigen, CMatrix, DensityMatrix, Povm, Realization};
use crate::error::{Error, Result};
use crate::scenario::{BellFunctional, Scenario};
use crate::sdp::{sdp_solve, BlockKind, SdpOptions, SdpProblem, SdpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementMode {
    /// Orthogonal projectors; outcomes may be assigned the zero projector.
    Projective,
    /// General POVMs.
    Povm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeesawOptions {
    pub restarts: usize,
    /// A sweep counts as stalled when it gains less than this.
    pub tolerance: f64,
    /// Consecutive stalled sweeps before stopping.
    pub patience: usize,
    pub max_sweeps: usize,
    pub seed: u64,
    pub mode: MeasurementMode,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            tolerance: 1e-10,
            patience: 3,
            max_sweeps: 500,
            seed: 0,
            mode: MeasurementMode::Projective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeesawResult {
    pub value: f64,
    pub realization: Realization,
    /// Value after every sweep of the winning restart.
    pub trace: Vec<f64>,
    /// False if the winning restart hit `max_sweeps`.
    pub converged: bool,
    pub restart: usize,
    pub restart_values: Vec<f64>,
}

struct Problem {
    scenario: Scenario,
    alpha: Vec<f64>,
    constant: f64,
    dim_a: usize,
    dim_b: usize,
    mode: MeasurementMode,
}

struct Point {
    psi: DVector<Complex64>,
    ma: Vec<Vec<CMatrix>>,
    mb: Vec<Vec<CMatrix>>,
}

fn haar_unitary(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let z = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..d {
        let ph = r[(k, k)] / r[(k, k)].norm();
        for i in 0..d {
            u[(i, k)] *= ph;
        }
    }
    u
}

fn projector(cols: &[DVector<Complex64>], d: usize) -> CMatrix {
    let mut p = CMatrix::zeros(d, d);
    for v in cols {
        p += v * v.adjoint();
    }
    hermitize(&p)
}

/// Rank-1 projectors onto Haar-random basis vectors; surplus outcomes get
/// zero, and with fewer outcomes than `d` the last one takes the remainder.
fn random_measurement(d: usize, outcomes: usize, rng: &mut ChaCha8Rng) -> Vec<CMatrix> {
    let u = haar_unitary(d, rng);
    let cols: Vec<DVector<Complex64>> = u.column_iter().map(|c| c.into_owned()).collect();
    (0..outcomes)
        .map(|a| {
            if a + 1 == outcomes {
                projector(&cols[a.min(d)..], d)
            } else if a < d {
                projector(&cols[a..a + 1], d)
            } else {
                CMatrix::zeros(d, d)
            }
        })
        .collect()
}

/// Random realization: a Ginibre state of the given rank and Haar-random
/// projective measurements (surplus outcomes get the zero element).
pub fn random_realization(s: &Scenario, dim_a: usize, dim_b: usize, rank: usize, seed: u64) -> Result<Realization> {
    let d = dim_a * dim_b;
    if dim_a == 0 || dim_b == 0 || rank == 0 || rank > d {
        return Err(Error::param("rank", format!("must lie in 1..={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(d, rank, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let mut rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho /= Complex64::new(tr, 0.0);
    let state = DensityMatrix::new(dim_a, dim_b, hermitize(&rho))?;
    let mut povms = |outputs: &[usize], dim: usize| -> Result<Vec<Povm>> {
        outputs
            .iter()
            .map(|&o| Povm::new(random_measurement(dim, o, &mut rng)))
            .collect()
    };
    let pa = povms(s.outputs_a(), dim_a)?;
    let pb = povms(s.outputs_b(), dim_b)?;
    Realization::new(state, pa, pb)
}

/// Random rank-1 POVM: the first `d` rows of a Haar unitary of size `outcomes`
/// (a Naimark compression); projective when `outcomes <= d`.
fn random_povm(d: usize, outcomes: usize, rng: &mut ChaCha8Rng) -> Vec<CMatrix> {
    if outcomes <= d {
        return random_measurement(d, outcomes, rng);
    }
    let u = haar_unitary(outcomes, rng);
    (0..outcomes)
        .map(|a| {
            let v = u.view((0, a), (d, 1)).into_owned();
            hermitize(&(&v * v.adjoint()))
        })
        .collect()
}

fn reshape(psi: &DVector<Complex64>, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(da, db, |i, j| psi[i * db + j])
}

fn objective(ms: &[CMatrix], bs: &[CMatrix]) -> f64 {
    ms.iter().zip(bs).map(|(m, b)| m.component_mul(&b.transpose()).sum().re).sum()
}

impl Problem {
    fn alpha(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.alpha[self.scenario.full_index(x, y, a, b)]
    }

    /// `O_{a|x} = Σ_{y,b} α N_{b|y}`.
    fn bob_operator(&self, mb: &[Vec<CMatrix>], x: usize, a: usize) -> CMatrix {
        let mut o = CMatrix::zeros(self.dim_b, self.dim_b);
        for (y, ns) in mb.iter().enumerate() {
            for (b, n) in ns.iter().enumerate() {
                let w = self.alpha(x, y, a, b);
                if w != 0.0 {
                    o += n.scale(w);
                }
            }
        }
        o
    }

    fn alice_operator(&self, ma: &[Vec<CMatrix>], y: usize, b: usize) -> CMatrix {
        let mut o = CMatrix::zeros(self.dim_a, self.dim_a);
        for (x, ms) in ma.iter().enumerate() {
            for (a, m) in ms.iter().enumerate() {
                let w = self.alpha(x, y, a, b);
                if w != 0.0 {
                    o += m.scale(w);
                }
            }
        }
        o
    }

    fn bell_operator(&self, p: &Point) -> CMatrix {
        let n = self.dim_a * self.dim_b;
        let mut w = CMatrix::identity(n, n).scale(self.constant);
        for (x, ms) in p.ma.iter().enumerate() {
            for (a, m) in ms.iter().enumerate() {
                w += m.kronecker(&self.bob_operator(&p.mb, x, a));
            }
        }
        w
    }

    fn update_state(&self, p: &mut Point) -> f64 {
        let (l, v) = top_eigen(&self.bell_operator(p));
        p.psi = v;
        l
    }

    /// Alice's conditional operators `Ψ O_{a|x}ᵀ Ψ†` for setting `x`.
    fn alice_conditionals(&self, p: &Point, x: usize) -> Vec<CMatrix> {
        let psi = reshape(&p.psi, self.dim_a, self.dim_b);
        (0..self.scenario.outputs_a()[x])
            .map(|a| hermitize(&(&psi * self.bob_operator(&p.mb, x, a).transpose() * psi.adjoint())))
            .collect()
    }

    /// Bob's conditional operators `Ψᵀ O_{b|y}ᵀ Ψ̄` for setting `y`.
    fn bob_conditionals(&self, p: &Point, y: usize) -> Vec<CMatrix> {
        let psi = reshape(&p.psi, self.dim_a, self.dim_b);
        (0..self.scenario.outputs_b()[y])
            .map(|b| hermitize(&(psi.transpose() * self.alice_operator(&p.ma, y, b).transpose() * psi.conjugate())))
            .collect()
    }

    fn expectation(&self, p: &Point) -> f64 {
        let w = self.bell_operator(p);
        (p.psi.adjoint() * w * &p.psi)[(0, 0)].re
    }

    fn sweep(&self, p: &mut Point) -> f64 {
        for x in 0..p.ma.len() {
            let bs = self.alice_conditionals(p, x);
            p.ma[x] = improve(&bs, &p.ma[x], self.mode);
        }
        for y in 0..p.mb.len() {
            let bs = self.bob_conditionals(p, y);
            p.mb[y] = improve(&bs, &p.mb[y], self.mode);
        }
        self.update_state(p)
    }

    fn initial(&self, d: usize, outcomes: usize, rng: &mut ChaCha8Rng) -> Vec<CMatrix> {
        match self.mode {
            MeasurementMode::Projective => random_measurement(d, outcomes, rng),
            MeasurementMode::Povm => random_povm(d, outcomes, rng),
        }
    }

    fn run(&self, opts: &SeesawOptions, restart: usize) -> (f64, Point, Vec<f64>, bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let ma = self
            .scenario
            .outputs_a()
            .iter()
            .map(|&n| self.initial(self.dim_a, n, &mut rng))
            .collect();
        let mb = self
            .scenario
            .outputs_b()
            .iter()
            .map(|&n| self.initial(self.dim_b, n, &mut rng))
            .collect();
        let n = self.dim_a * self.dim_b;
        let mut p = Point {
            psi: DVector::zeros(n),
            ma,
            mb,
        };
        let mut value = self.update_state(&mut p);
        let mut trace = vec![value];
        let mut stalled = 0;
        let mut converged = false;
        for _ in 0..opts.max_sweeps {
            let next = self.sweep(&mut p);
            trace.push(next);
            if next - value < opts.tolerance {
                stalled += 1;
            } else {
                stalled = 0;
            }
            value = value.max(next);
            if stalled >= opts.patience {
                converged = true;
                break;
            }
        }
        (self.expectation(&p), p, trace, converged)
    }
}

/// Best of the current measurement and the mode's candidate update.
fn improve(bs: &[CMatrix], current: &[CMatrix], mode: MeasurementMode) -> Vec<CMatrix> {
    let d = bs[0].nrows();
    let candidate = match mode {
        MeasurementMode::Projective if d == 2 => Some(qubit_projective(bs)),
        MeasurementMode::Projective => Some(polar_projective(bs, current)),
        MeasurementMode::Povm => povm_sdp(bs),
    };
    match candidate {
        Some(c) if objective(&c, bs) > objective(current, bs) => c,
        _ => current.to_vec(),
    }
}

/// Exact optimum over qubit projective measurements: either one outcome
/// takes `𝟙`, or two outcomes share a rank-1 projector and its complement.
fn qubit_projective(bs: &[CMatrix]) -> Vec<CMatrix> {
    let n = bs.len();
    let id = CMatrix::identity(2, 2);
    let zero = CMatrix::zeros(2, 2);
    let mut best = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for i in 0..n {
        let v = bs[i].trace().re;
        if v > best {
            best = v;
            out = (0..n).map(|k| if k == i { id.clone() } else { zero.clone() }).collect();
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (l, u) = top_eigen(&(&bs[i] - &bs[j]));
            let v = bs[j].trace().re + l;
            if v > best + 1e-15 {
                best = v;
                let p = hermitize(&(&u * u.adjoint()));
                out = (0..n)
                    .map(|k| {
                        if k == i {
                            p.clone()
                        } else if k == j {
                            &id - &p
                        } else {
                            zero.clone()
                        }
                    })
                    .collect();
            }
        }
    }
    out
}

fn rank_patterns(n: usize, d: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![d]];
    }
    (0..=d)
        .flat_map(|r| {
            rank_patterns(n - 1, d - r).into_iter().map(move |mut rest| {
                rest.insert(0, r);
                rest
            })
        })
        .collect()
}

/// Columns spanning the ranges of a projective measurement, outcome by outcome.
fn range_basis(ms: &[CMatrix]) -> Vec<DVector<Complex64>> {
    let mut cols = Vec::new();
    for m in ms {
        let e = hermitize(m).symmetric_eigen();
        for (k, &l) in e.eigenvalues.iter().enumerate() {
            if l > 0.5 {
                cols.push(e.eigenvectors.column(k).into_owned());
            }
        }
    }
    cols
}

/// Polar-decomposition ascent on `Σ_a tr(U_a† B_a U_a)` for every rank
/// pattern, started from the current measurement's basis.
fn polar_projective(bs: &[CMatrix], current: &[CMatrix]) -> Vec<CMatrix> {
    let d = bs[0].nrows();
    let shift = bs.iter().map(|b| -eigenvalues(b)[0]).fold(0.0, f64::max) + 1.0;
    let shifted: Vec<CMatrix> = bs.iter().map(|b| b + CMatrix::identity(d, d).scale(shift)).collect();
    let basis = range_basis(current);
    if basis.len() != d {
        return current.to_vec();
    }
    let start = CMatrix::from_columns(&basis);
    let mut best = (f64::NEG_INFINITY, current.to_vec());
    for pattern in rank_patterns(bs.len(), d) {
        let owner: Vec<usize> = pattern.iter().enumerate().flat_map(|(a, &r)| std::iter::repeat_n(a, r)).collect();
        let mut u = start.clone();
        let mut last = f64::NEG_INFINITY;
        for _ in 0..200 {
            let mut g = CMatrix::zeros(d, d);
            for k in 0..d {
                g.set_column(k, &(&shifted[owner[k]] * u.column(k)));
            }
            let svd = g.svd(true, true);
            u = svd.u.expect("requested") * svd.v_t.expect("requested");
            let v: f64 = (0..d)
                .map(|k| (u.column(k).adjoint() * &shifted[owner[k]] * u.column(k))[(0, 0)].re)
                .sum();
            if v - last < 1e-14 {
                break;
            }
            last = v;
        }
        let ms: Vec<CMatrix> = (0..bs.len())
            .map(|a| {
                let cols: Vec<DVector<Complex64>> =
                    (0..d).filter(|&k| owner[k] == a).map(|k| u.column(k).into_owned()).collect();
                projector(&cols, d)
            })
            .collect();
        let v = objective(&ms, bs);
        if v > best.0 {
            best = (v, ms);
        }
    }
    best.1
}

/// `max Σ_a tr(M_a B_a)` over POVMs, as a real-embedded SDP with the last
/// element eliminated.
fn povm_sdp(bs: &[CMatrix]) -> Option<Vec<CMatrix>> {
    let n = bs.len();
    let d = bs[0].nrows();
    if n == 1 {
        return Some(vec![CMatrix::identity(d, d)]);
    }
    let last = &bs[n - 1];
    let mut prob = SdpProblem::new(vec![BlockKind::Psd(2 * d); n]);
    for k in 0..2 * d {
        prob.add_constant(n - 1, k, k, 1.0);
    }
    // per free element: d diagonal, then (s, t) for each r < c
    let mut vars = Vec::with_capacity(n - 1);
    for (a, b) in bs.iter().take(n - 1).enumerate() {
        let diff = b - last;
        let mut ids = Vec::new();
        for r in 0..d {
            let v = prob.add_var(diff[(r, r)].re);
            for (blk, sign) in [(a, 1.0), (n - 1, -1.0)] {
                prob.add_coefficient(v, blk, r, r, sign);
                prob.add_coefficient(v, blk, d + r, d + r, sign);
            }
            ids.push(v);
        }
        for r in 0..d {
            for c in r + 1..d {
                let s = prob.add_var(2.0 * diff[(r, c)].re);
                let t = prob.add_var(2.0 * diff[(r, c)].im);
                for (blk, sign) in [(a, 1.0), (n - 1, -1.0)] {
                    prob.add_coefficient(s, blk, r, c, sign);
                    prob.add_coefficient(s, blk, d + r, d + c, sign);
                    prob.add_coefficient(t, blk, r, d + c, -sign);
                    prob.add_coefficient(t, blk, c, d + r, sign);
                }
                ids.push(s);
                ids.push(t);
            }
        }
        vars.push(ids);
    }
    let sol = sdp_solve(&prob, &SdpOptions::default()).ok()?;
    if !matches!(sol.status, SdpStatus::Optimal | SdpStatus::MaxIterations) {
        return None;
    }
    let mut ms: Vec<CMatrix> = vars
        .iter()
        .map(|ids| {
            let mut m = CMatrix::zeros(d, d);
            let mut it = ids.iter();
            for r in 0..d {
                m[(r, r)] = Complex64::new(sol.y[*it.next().expect("diagonal")], 0.0);
            }
            for r in 0..d {
                for c in r + 1..d {
                    let s = sol.y[*it.next().expect("real part")];
                    let t = sol.y[*it.next().expect("imaginary part")];
                    m[(r, c)] = Complex64::new(s, t);
                    m[(c, r)] = Complex64::new(s, -t);
                }
            }
            m
        })
        .collect();
    let rest = ms.iter().fold(CMatrix::identity(d, d), |acc, m| acc - m);
    ms.push(rest);
    // pull slightly negative eigenvalues back by mixing toward 𝟙/n
    let worst = ms.iter().map(|m| eigenvalues(m)[0]).fold(0.0, f64::min);
    if worst < 0.0 {
        let t = -worst / (-worst + 1.0 / n as f64);
        let flat = CMatrix::identity(d, d).unscale(n as f64);
        for m in &mut ms {
            *m = m.scale(1.0 - t) + flat.scale(t);
        }
    }
    Some(ms)
}

/// Maximizes `f` over states in `C^{dim_a} ⊗ C^{dim_b}` and measurements of
/// the given mode, keeping the best of `opts.restarts` random starts.
pub fn seesaw_maximize(f: &BellFunctional, dim_a: usize, dim_b: usize, opts: &SeesawOptions) -> Result<SeesawResult> {
    if dim_a < 2 || dim_b < 2 {
        return Err(Error::param("dims", "local dimensions must be at least 2"));
    }
    if opts.restarts == 0 {
        return Err(Error::param("restarts", "must be positive"));
    }
    if !(opts.tolerance >= 0.0) {
        return Err(Error::param("tolerance", "must be nonnegative"));
    }
    let full = f.to_full();
    let problem = Problem {
        scenario: full.scenario().clone(),
        alpha: full.coefficients().to_vec(),
        constant: full.constant(),
        dim_a,
        dim_b,
        mode: opts.mode,
    };
    let runs: Vec<_> = (0..opts.restarts)
        .into_par_iter()
        .map(|k| problem.run(opts, k))
        .collect();
    let restart_values: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mut best = 0;
    for (k, v) in restart_values.iter().enumerate() {
        if *v > restart_values[best] {
            best = k;
        }
    }
    let (_, point, trace, converged) = runs.into_iter().nth(best).expect("restarts > 0");
    let state = DensityMatrix::pure(dim_a, dim_b, &point.psi)?;
    let povms_a = point.ma.into_iter().map(Povm::new).collect::<Result<_>>()?;
    let povms_b = point.mb.into_iter().map(Povm::new).collect::<Result<_>>()?;
    let realization = Realization::new(state, povms_a, povms_b)?;
    let value = f.evaluate(&super::correlation(&realization)?)?;
    Ok(SeesawResult {
        value,
        realization,
        trace,
        converged,
        restart: best,
        restart_values,
    })
}

/// Minimizes `f` by maximizing `−f`; values in the result refer to `f`.
pub fn seesaw_minimize(f: &BellFunctional, dim_a: usize, dim_b: usize, opts: &SeesawOptions) -> Result<SeesawResult> {
    let mut r = seesaw_maximize(&f.negated(), dim_a, dim_b, opts)?;
    r.value = -r.value;
    r.trace.iter_mut().for_each(|v| *v = -*v);
    r.restart_values.iter_mut().for_each(|v| *v = -*v);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset;

    fn opts(mode: MeasurementMode, restarts: usize) -> SeesawOptions {
        SeesawOptions {
            restarts,
            mode,
            ..Default::default()
        }
    }

    #[test]
    fn rank_patterns_count() {
        assert_eq!(rank_patterns(3, 3).len(), 10);
        assert_eq!(rank_patterns(3, 2).len(), 6);
        assert!(rank_patterns(3, 3).iter().all(|p| p.iter().sum::<usize>() == 3));
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = haar_unitary(3, &mut rng);
        let d = (u.adjoint() * &u - CMatrix::identity(3, 3)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(d < 1e-12);
    }

    #[test]
    fn row14_qubits() {
        let f = dataset::inequality(14).unwrap().functional;
        let r = seesaw_maximize(&f, 2, 2, &opts(MeasurementMode::Projective, 10)).unwrap();
        assert!((r.value - 2.6972).abs() < 1e-3, "{}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!((super::super::negativity(r.realization.state()) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn row18_povm_qubits() {
        let f = dataset::inequality(18).unwrap().functional;
        let r = seesaw_maximize(&f, 2, 2, &opts(MeasurementMode::Povm, 50)).unwrap();
        assert!((r.value - 1.4142).abs() < 1e-3, "{}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn deterministic_for_seed() {
        let f = dataset::inequality(1).unwrap().functional;
        let o = opts(MeasurementMode::Projective, 3);
        let a = seesaw_maximize(&f, 2, 2, &o).unwrap();
        let b = seesaw_maximize(&f, 2, 2, &o).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.restart_values, b.restart_values);
    }

    #[test]
    fn rejects_bad_options() {
        let f = dataset::inequality(1).unwrap().functional;
        assert!(seesaw_maximize(&f, 1, 2, &SeesawOptions::default()).is_err());
        assert!(seesaw_maximize(&f, 2, 2, &opts(MeasurementMode::Povm, 0)).is_err());
    }
}
