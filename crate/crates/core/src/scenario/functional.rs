use serde::{Deserialize, Serialize};

use super::{CgEntry, ProbabilityTable, Scenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Form {
    CollinsGisin,
    Full,
}

impl Form {
    pub fn tag(self) -> &'static str {
        match self {
            Form::CollinsGisin => "cg",
            Form::Full => "full",
        }
    }
}

/// A linear Bell expression `constant + β·P`, with optional local bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    scenario: Scenario,
    form: Form,
    coefficients: Vec<f64>,
    constant: f64,
    pub local_max: Option<f64>,
    pub local_min: Option<f64>,
}

impl BellFunctional {
    pub fn new(scenario: Scenario, form: Form, coefficients: Vec<f64>) -> Result<Self> {
        let expected = match form {
            Form::CollinsGisin => scenario.cg_dim(),
            Form::Full => scenario.full_dim(),
        };
        if coefficients.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coefficients.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("coefficients", "non-finite coefficient"));
        }
        Ok(Self {
            scenario,
            form,
            coefficients,
            constant: 0.0,
            local_max: None,
            local_min: None,
        })
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn with_bounds(mut self, local_max: Option<f64>, local_min: Option<f64>) -> Result<Self> {
        if let (Some(hi), Some(lo)) = (local_max, local_min) {
            if lo > hi {
                return Err(Error::param("local_min", format!("{lo} exceeds local_max {hi}")));
            }
        }
        self.local_max = local_max;
        self.local_min = local_min;
        Ok(self)
    }

    pub fn zero(scenario: Scenario, form: Form) -> Self {
        let n = match form {
            Form::CollinsGisin => scenario.cg_dim(),
            Form::Full => scenario.full_dim(),
        };
        Self {
            scenario,
            form,
            coefficients: vec![0.0; n],
            constant: 0.0,
            local_max: None,
            local_min: None,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Negated expression; bounds swap sides.
    pub fn negated(&self) -> Self {
        Self {
            scenario: self.scenario.clone(),
            form: self.form,
            coefficients: self.coefficients.iter().map(|c| -c).collect(),
            constant: -self.constant,
            local_max: self.local_min.map(|v| -v),
            local_min: self.local_max.map(|v| -v),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let (hi, lo) = if factor >= 0.0 {
            (self.local_max, self.local_min)
        } else {
            (self.local_min, self.local_max)
        };
        Self {
            scenario: self.scenario.clone(),
            form: self.form,
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            constant: self.constant * factor,
            local_max: hi.map(|v| v * factor),
            local_min: lo.map(|v| v * factor),
        }
    }

    /// Bell value. CG functionals read marginals averaged over the other
    /// party's settings, so they also accept signaling tables.
    pub fn evaluate(&self, p: &ProbabilityTable) -> Result<f64> {
        if p.scenario() != &self.scenario {
            return Err(Error::ScenarioMismatch);
        }
        let v = match self.form {
            Form::Full => self
                .coefficients
                .iter()
                .zip(p.entries())
                .map(|(c, q)| c * q)
                .sum::<f64>(),
            Form::CollinsGisin => self.evaluate_cg(&p.to_cg()),
        };
        Ok(v + self.constant)
    }

    /// Value on a CG coordinate vector (constant included).
    pub fn evaluate_cg_vector(&self, cg: &[f64]) -> Result<f64> {
        if cg.len() != self.scenario.cg_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.scenario.cg_dim(),
                found: cg.len(),
            });
        }
        let cgf = self.to_cg();
        Ok(cgf.evaluate_cg(cg) + cgf.constant)
    }

    fn evaluate_cg(&self, cg: &[f64]) -> f64 {
        self.coefficients.iter().zip(cg).map(|(c, q)| c * q).sum()
    }

    /// Full-form version: marginal coefficients are absorbed into the `y = 0`
    /// (Alice) and `x = 0` (Bob) joint blocks; coefficients of last outcomes are zero.
    pub fn to_full(&self) -> Self {
        match self.form {
            Form::Full => self.clone(),
            Form::CollinsGisin => {
                let s = &self.scenario;
                let mut alpha = vec![0.0; s.full_dim()];
                for (i, &c) in self.coefficients.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    match s.cg_entry(i) {
                        CgEntry::Joint { x, y, a, b } => alpha[s.full_index(x, y, a, b)] += c,
                        CgEntry::Alice { x, a } => {
                            for b in 0..s.outputs_b()[0] {
                                alpha[s.full_index(x, 0, a, b)] += c;
                            }
                        }
                        CgEntry::Bob { y, b } => {
                            for a in 0..s.outputs_a()[0] {
                                alpha[s.full_index(0, y, a, b)] += c;
                            }
                        }
                    }
                }
                Self {
                    scenario: s.clone(),
                    form: Form::Full,
                    coefficients: alpha,
                    constant: self.constant,
                    local_max: self.local_max,
                    local_min: self.local_min,
                }
            }
        }
    }

    /// CG version agreeing with `self` on every non-signaling table.
    pub fn to_cg(&self) -> Self {
        match self.form {
            Form::CollinsGisin => self.clone(),
            Form::Full => {
                let s = &self.scenario;
                let mut beta = vec![0.0; s.cg_dim()];
                let mut constant = self.constant;
                for ((x, y, a, b), &alpha) in s.full_indices().zip(&self.coefficients) {
                    if alpha == 0.0 {
                        continue;
                    }
                    let (c, terms) = s.full_in_cg(x, y, a, b);
                    constant += alpha * c;
                    for (i, w) in terms {
                        beta[i] += alpha * w;
                    }
                }
                Self {
                    scenario: s.clone(),
                    form: Form::CollinsGisin,
                    coefficients: beta,
                    constant,
                    local_max: self.local_max,
                    local_min: self.local_min,
                }
            }
        }
    }

    /// Smallest `d ≤ max_den` such that every coefficient times `d` is an
    /// integer within `1e-9`, together with those integers (constant last).
    pub fn integer_form(&self, max_den: i64) -> Option<(i64, Vec<i64>)> {
        let all: Vec<f64> = self.coefficients.iter().copied().chain(std::iter::once(self.constant)).collect();
        'den: for d in 1..=max_den {
            let mut ints = Vec::with_capacity(all.len());
            for &c in &all {
                let scaled = c * d as f64;
                let r = scaled.round();
                if (scaled - r).abs() > 1e-9 * (1.0 + d as f64) || r.abs() > 1e15 {
                    continue 'den;
                }
                ints.push(r as i64);
            }
            return Some((d, ints));
        }
        None
    }
}

pub fn full_from_cg(f: &BellFunctional) -> Result<BellFunctional> {
    if f.form() != Form::CollinsGisin {
        return Err(Error::FormMismatch { expected: "cg" });
    }
    Ok(f.to_full())
}

pub fn cg_from_full(f: &BellFunctional) -> Result<BellFunctional> {
    if f.form() != Form::Full {
        return Err(Error::FormMismatch { expected: "full" });
    }
    Ok(f.to_cg())
}
