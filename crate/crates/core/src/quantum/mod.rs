//! Quantum realizations: states, POVMs and Born-rule correlations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{BellFunctional, ProbabilityTable, Scenario};

mod io;
mod seesaw;

pub use io::{parse_realization, serialize_realization};
pub use seesaw::{random_realization, seesaw_maximize, seesaw_minimize, MeasurementMode, SeesawOptions, SeesawResult};

pub type CMatrix = DMatrix<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const STATE_PSD_TOL: f64 = 1e-10;
pub const POVM_TOL: f64 = 1e-10;
pub const PROJECTIVE_TOL: f64 = 1e-8;
/// Partial-transpose eigenvalues above `-PPT_TOL` count as nonnegative.
pub const PPT_TOL: f64 = 1e-13;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian part `(M + M†)/2`.
pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub(crate) fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest eigenpair of a Hermitian matrix.
pub(crate) fn top_eigen(m: &CMatrix) -> (f64, DVector<Complex64>) {
    let e = hermitize(m).symmetric_eigen();
    let (i, &l) = e
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (l, e.eigenvectors.column(i).into_owned())
}

fn real_trace(m: &CMatrix) -> f64 {
    m.trace().re
}

/// Bipartite density matrix on `C^{dim_a} ⊗ C^{dim_b}`, Alice's factor first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    dim_a: usize,
    dim_b: usize,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(dim_a: usize, dim_b: usize, matrix: CMatrix) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::InvalidQuantum("zero local dimension".into()));
        }
        let n = dim_a * dim_b;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        let h = hermitian_defect(&matrix);
        if h > HERMITIAN_TOL {
            return Err(Error::InvalidQuantum(format!("state is not Hermitian (defect {h:e})")));
        }
        let t = real_trace(&matrix);
        if (t - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidQuantum(format!("state has trace {t}")));
        }
        let lmin = eigenvalues(&matrix)[0];
        if lmin < -STATE_PSD_TOL {
            return Err(Error::InvalidQuantum(format!("state has eigenvalue {lmin:e}")));
        }
        Ok(Self { dim_a, dim_b, matrix })
    }

    /// `|ψ⟩⟨ψ|` after normalizing `psi` (index `i·dim_b + j`).
    pub fn pure(dim_a: usize, dim_b: usize, psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidQuantum("zero state vector".into()));
        }
        let v = psi.unscale(norm);
        let m = hermitize(&(&v * v.adjoint()));
        Self::new(dim_a, dim_b, m)
    }

    pub fn maximally_mixed(dim_a: usize, dim_b: usize) -> Self {
        let n = dim_a * dim_b;
        Self {
            dim_a,
            dim_b,
            matrix: CMatrix::identity(n, n).unscale(n as f64),
        }
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Transpose on Bob's factor.
    pub fn partial_transpose(&self) -> CMatrix {
        let (da, db) = (self.dim_a, self.dim_b);
        CMatrix::from_fn(da * db, da * db, |r, c| {
            let (i, j) = (r / db, r % db);
            let (k, l) = (c / db, c % db);
            self.matrix[(i * db + l, k * db + j)]
        })
    }

    /// `v·ρ + (1 − v)·𝟙/d`.
    pub fn with_visibility(&self, v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param("visibility", format!("{v} outside [0, 1]")));
        }
        let n = self.dim_a * self.dim_b;
        let m = self.matrix.scale(v) + CMatrix::identity(n, n).scale((1.0 - v) / n as f64);
        Ok(Self {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            matrix: m,
        })
    }

    /// `(Va ⊗ Vb)† ρ (Va ⊗ Vb)` renormalized. Fails if the state leaks out of
    /// the subspace by more than `tol` in trace.
    pub fn compress(&self, va: &CMatrix, vb: &CMatrix, tol: f64) -> Result<Self> {
        let v = va.kronecker(vb);
        if v.nrows() != self.matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                found: v.nrows(),
            });
        }
        let m = v.adjoint() * &self.matrix * &v;
        let t = real_trace(&m);
        if (1.0 - t).abs() > tol {
            return Err(Error::InvalidQuantum(format!("state has weight {:.3e} outside the subspace", 1.0 - t)));
        }
        Self::new(va.ncols(), vb.ncols(), hermitize(&m).unscale(t))
    }
}

/// `(|00⟩ + γ|11⟩ + γ′|22⟩)/√(1+γ²+γ′²)` on two qutrits.
pub fn psi_gamma(gamma: f64, gamma_prime: f64) -> Result<DensityMatrix> {
    if !(gamma >= 0.0 && gamma_prime >= 0.0) || !gamma.is_finite() || !gamma_prime.is_finite() {
        return Err(Error::param("gamma", "must be finite and nonnegative"));
    }
    let mut psi = DVector::zeros(9);
    psi[0] = c(1.0, 0.0);
    psi[4] = c(gamma, 0.0);
    psi[8] = c(gamma_prime, 0.0);
    DensityMatrix::pure(3, 3, &psi)
}

/// Vidal–Werner negativity `(‖ρ^{T_B}‖₁ − 1)/2`.
pub fn negativity(rho: &DensityMatrix) -> f64 {
    let spectrum = eigenvalues(&rho.partial_transpose());
    if spectrum[0] >= -PPT_TOL {
        return 0.0;
    }
    let trace_norm: f64 = spectrum.iter().map(|l| l.abs()).sum();
    ((trace_norm - 1.0) / 2.0).max(0.0)
}

/// Sum of the magnitudes of the negative eigenvalues of `ρ^{T_B}`.
pub fn negativity_from_spectrum(rho: &DensityMatrix) -> f64 {
    eigenvalues(&rho.partial_transpose())
        .iter()
        .filter(|&&l| l < -PPT_TOL)
        .map(|l| -l)
        .sum()
}

/// A measurement: one PSD element per outcome, summing to identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Povm {
    elements: Vec<CMatrix>,
    projective: bool,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let d = elements
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::InvalidQuantum("POVM without elements".into()))?;
        if d == 0 {
            return Err(Error::InvalidQuantum("zero-dimensional POVM".into()));
        }
        let mut sum = CMatrix::zeros(d, d);
        for (k, m) in elements.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.nrows(),
                });
            }
            let h = hermitian_defect(m);
            if h > POVM_TOL {
                return Err(Error::InvalidQuantum(format!("element {k} is not Hermitian (defect {h:e})")));
            }
            let l = eigenvalues(m)[0];
            if l < -POVM_TOL {
                return Err(Error::InvalidQuantum(format!("element {k} has eigenvalue {l:e}")));
            }
            sum += m;
        }
        let defect = (sum - CMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > POVM_TOL {
            return Err(Error::InvalidQuantum(format!("elements sum to identity only up to {defect:e}")));
        }
        let projective = elements
            .iter()
            .all(|m| (m * m - m).iter().all(|z| z.norm() <= PROJECTIVE_TOL));
        Ok(Self { elements, projective })
    }

    /// Rank-1 projectors onto the columns of a unitary.
    pub fn from_basis(u: &CMatrix) -> Result<Self> {
        Self::new(
            u.column_iter()
                .map(|col| {
                    let v = col.into_owned();
                    hermitize(&(&v * v.adjoint()))
                })
                .collect(),
        )
    }

    /// Single-outcome measurement `{𝟙}`.
    pub fn trivial(d: usize) -> Self {
        Self {
            elements: vec![CMatrix::identity(d, d)],
            projective: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn is_projective(&self) -> bool {
        self.projective
    }
}

/// `V† M V` for every element; `v` is a `d × k` isometry.
pub fn project_povm_to_subspace(p: &Povm, v: &CMatrix) -> Result<Povm> {
    if v.nrows() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: v.nrows(),
        });
    }
    let k = v.ncols();
    let iso = (v.adjoint() * v - CMatrix::identity(k, k)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if iso > 1e-10 {
        return Err(Error::param("isometry", format!("columns are not orthonormal (defect {iso:e})")));
    }
    let elements = p.elements.iter().map(|m| hermitize(&(v.adjoint() * m * v))).collect();
    Povm::new(elements).map_err(|e| Error::InvalidQuantum(format!("compression failed: {e}")))
}

/// Isometry onto the span of the given computational basis vectors.
pub fn coordinate_isometry(d: usize, basis: &[usize]) -> Result<CMatrix> {
    let mut v = CMatrix::zeros(d, basis.len());
    for (col, &i) in basis.iter().enumerate() {
        if i >= d {
            return Err(Error::param("basis", format!("index {i} outside dimension {d}")));
        }
        v[(i, col)] = c(1.0, 0.0);
    }
    Ok(v)
}

/// State plus one POVM per setting for each party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    state: DensityMatrix,
    povms_a: Vec<Povm>,
    povms_b: Vec<Povm>,
}

impl Realization {
    pub fn new(state: DensityMatrix, povms_a: Vec<Povm>, povms_b: Vec<Povm>) -> Result<Self> {
        if povms_a.is_empty() || povms_b.is_empty() {
            return Err(Error::InvalidQuantum("each party needs at least one setting".into()));
        }
        if let Some(p) = povms_a.iter().find(|p| p.dim() != state.dim_a) {
            return Err(Error::DimensionMismatch {
                expected: state.dim_a,
                found: p.dim(),
            });
        }
        if let Some(p) = povms_b.iter().find(|p| p.dim() != state.dim_b) {
            return Err(Error::DimensionMismatch {
                expected: state.dim_b,
                found: p.dim(),
            });
        }
        Ok(Self { state, povms_a, povms_b })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn povms_a(&self) -> &[Povm] {
        &self.povms_a
    }

    pub fn povms_b(&self) -> &[Povm] {
        &self.povms_b
    }

    pub fn scenario(&self) -> Scenario {
        Scenario::new(
            self.povms_a.iter().map(Povm::outcomes).collect(),
            self.povms_b.iter().map(Povm::outcomes).collect(),
        )
        .expect("validated outcome counts")
    }

    pub fn with_state(&self, state: DensityMatrix) -> Result<Self> {
        Self::new(state, self.povms_a.clone(), self.povms_b.clone())
    }

    /// Compresses state and every POVM with the isometries `va`, `vb`.
    pub fn compress(&self, va: &CMatrix, vb: &CMatrix, tol: f64) -> Result<Self> {
        let state = self.state.compress(va, vb, tol)?;
        let povms_a = self
            .povms_a
            .iter()
            .map(|p| project_povm_to_subspace(p, va))
            .collect::<Result<_>>()?;
        let povms_b = self
            .povms_b
            .iter()
            .map(|p| project_povm_to_subspace(p, vb))
            .collect::<Result<_>>()?;
        Self::new(state, povms_a, povms_b)
    }
}

/// Born-rule table `P(a,b|x,y) = tr(ρ M_{a|x} ⊗ M_{b|y})`.
pub fn correlation(r: &Realization) -> Result<ProbabilityTable> {
    let s = r.scenario();
    let (da, db) = (r.state.dim_a, r.state.dim_b);
    let rho = &r.state.matrix;
    // rb[l][j] = Σ ρ[(i,j),(k,l)] M[k][i], so that P = Σ rb[l][j] N[l][j]
    let reduce = |m: &CMatrix| {
        CMatrix::from_fn(db, db, |l, j| {
            let mut acc = c(0.0, 0.0);
            for i in 0..da {
                for k in 0..da {
                    acc += rho[(i * db + j, k * db + l)] * m[(k, i)];
                }
            }
            acc
        })
    };
    let mut entries = vec![0.0; s.full_dim()];
    for (x, pa) in r.povms_a.iter().enumerate() {
        for (a, m) in pa.elements.iter().enumerate() {
            let rb = reduce(m);
            for (y, pb) in r.povms_b.iter().enumerate() {
                for (b, n) in pb.elements.iter().enumerate() {
                    entries[s.full_index(x, y, a, b)] = rb.component_mul(n).sum().re;
                }
            }
        }
    }
    for x in 0..s.inputs_a() {
        for y in 0..s.inputs_b() {
            let off = s.block_offset(x, y);
            let len = s.outputs_a()[x] * s.outputs_b()[y];
            let block = &mut entries[off..off + len];
            block.iter_mut().for_each(|v| *v = v.max(0.0));
            let total: f64 = block.iter().sum();
            block.iter_mut().for_each(|v| *v /= total);
        }
    }
    ProbabilityTable::new(s, entries)
}

/// Bell value of the Born-rule table of `r`.
pub fn bell_value(f: &BellFunctional, r: &Realization) -> Result<f64> {
    f.evaluate(&correlation(r)?)
}

/// State visibility `ν` for which `ν·S_ideal + (1−ν)·S_iso = s_exp`, where
/// `S_iso` keeps the measurements of `r` and replaces the state by `𝟙/d`.
pub fn infer_state_visibility(s_exp: f64, r: &Realization, f: &BellFunctional) -> Result<f64> {
    let ideal = bell_value(f, r)?;
    let iso = bell_value(f, &r.with_state(DensityMatrix::maximally_mixed(r.state.dim_a, r.state.dim_b))?)?;
    let span = ideal - iso;
    if span.abs() <= 1e-12 * (1.0 + ideal.abs()) {
        return Err(Error::Degenerate(format!(
            "ideal value {ideal} equals the white-noise value"
        )));
    }
    Ok(((s_exp - iso) / span).clamp(0.0, 1.0))
}

/// Closest unitary `Ω(Ω†Ω)^{-1/2}` to a nearly unitary matrix.
pub fn lowdin_orthonormalize(omega: &CMatrix) -> Result<CMatrix> {
    let svd = omega.clone().svd(true, true);
    if svd.singular_values.iter().any(|&s| s < 1e-8) {
        return Err(Error::InvalidQuantum("matrix is singular".into()));
    }
    Ok(svd.u.expect("requested") * svd.v_t.expect("requested"))
}

fn matrix3(rows: [[(f64, f64); 3]; 3]) -> CMatrix {
    CMatrix::from_fn(3, 3, |r, k| c(rows[r][k].0, rows[r][k].1))
}

/// Measurement bases for the qutrit realization of inequality 12, as printed
/// to four decimals. The `a`-th column is the vector for outcome `a`.
pub fn qutrit_i12_bases() -> (Vec<CMatrix>, Vec<CMatrix>) {
    let r = |v: f64| (v, 0.0);
    let alice = vec![
        matrix3([
            [r(0.9835), r(0.0), r(-0.1809)],
            [r(0.1809), r(0.0), r(0.9835)],
            [r(0.0), r(1.0), r(0.0)],
        ]),
        matrix3([
            [r(0.8826), r(-0.4642), r(0.0742)],
            [r(0.4626), r(0.8857), r(0.0389)],
            [(0.0492, -0.0678), r(0.0), (-0.5851, 0.8066)],
        ]),
        matrix3([
            [r(-0.9117), r(0.4108), r(0.0)],
            [r(0.4108), r(0.9117), r(0.0)],
            [r(0.0), r(0.0), r(1.0)],
        ]),
    ];
    let bob = vec![
        matrix3([
            [r(0.9974), r(0.0), r(-0.0721)],
            [r(0.0721), r(0.0), r(0.9974)],
            [r(0.0), r(1.0), r(0.0)],
        ]),
        matrix3([
            [r(-0.8799), r(0.2668), r(-0.3932)],
            [r(0.2436), r(0.9637), r(0.1089)],
            [(-0.4080, -0.0004), r(0.0), (0.9130, 0.0008)],
        ]),
        matrix3([
            [r(0.7478), r(-0.6639), r(0.0)],
            [r(0.6639), r(0.7478), r(0.0)],
            [r(0.0), r(0.0), r(1.0)],
        ]),
    ];
    (alice, bob)
}

/// Rank-1 qutrit projective realization of inequality 12 on the state
/// `0.7258|00⟩ + 0.6879|11⟩`; the printed bases are orthonormalized first.
pub fn qutrit_i12_realization() -> Realization {
    let (alice, bob) = qutrit_i12_bases();
    let povms = |bases: Vec<CMatrix>| -> Vec<Povm> {
        bases
            .iter()
            .map(|o| Povm::from_basis(&lowdin_orthonormalize(o).expect("nonsingular")).expect("unitary"))
            .collect()
    };
    let mut psi = DVector::zeros(9);
    psi[0] = c(0.7258, 0.0);
    psi[4] = c(0.6879, 0.0);
    let state = DensityMatrix::pure(3, 3, &psi).expect("nonzero");
    Realization::new(state, povms(alice), povms(bob)).expect("consistent dimensions")
}

/// `|Φ₃⁺⟩` with phase-shifted Fourier bases `diag(e^{iπk_j/9}) F`, which are
/// optimal for I₃⁺.
pub fn phi3_i3plus_realization() -> Realization {
    const PHASES_A: [[i32; 3]; 3] = [[0, 0, 0], [0, 6, 6], [0, 6, 0]];
    const PHASES_B: [[i32; 3]; 3] = [[0, 14, 16], [0, 2, 4], [0, 2, 16]];
    let omega = |t: f64| Complex64::from_polar(1.0, t);
    let basis = |k: &[i32; 3]| {
        CMatrix::from_fn(3, 3, |j, a| {
            let phase = std::f64::consts::PI * k[j] as f64 / 9.0 + 2.0 * std::f64::consts::PI * (j * a) as f64 / 3.0;
            omega(phase).unscale(3f64.sqrt())
        })
    };
    let povms = |ks: &[[i32; 3]; 3]| -> Vec<Povm> {
        ks.iter().map(|k| Povm::from_basis(&basis(k)).expect("unitary")).collect()
    };
    let state = psi_gamma(1.0, 1.0).expect("valid parameters");
    Realization::new(state, povms(&PHASES_A), povms(&PHASES_B)).expect("consistent dimensions")
}
