//! Finite-statistics simulation of measurement counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{correlation, Realization};
use crate::scenario::{CountsTable, ProbabilityTable};

/// Moves `magnitude` of Alice's marginal from outcome `from` to outcome `to`
/// in setting pair `(x, y)` only, which makes the table signaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalBias {
    pub x: usize,
    pub y: usize,
    pub from: usize,
    pub to: usize,
    pub magnitude: f64,
}

impl MarginalBias {
    /// Shift from outcome 1 to outcome 0.
    pub fn new(x: usize, y: usize, magnitude: f64) -> Self {
        Self {
            x,
            y,
            from: 1,
            to: 0,
            magnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotPlan {
    /// Shots per setting pair.
    pub shots: u64,
    pub seed: u64,
    pub bias: Vec<MarginalBias>,
}

impl ShotPlan {
    pub fn new(shots: u64, seed: u64) -> Self {
        Self {
            shots,
            seed,
            bias: Vec::new(),
        }
    }

    pub fn with_bias(mut self, bias: MarginalBias) -> Self {
        self.bias.push(bias);
        self
    }
}

/// Applies the plan's biases; every conditional joint of the `from` row is
/// scaled down proportionally.
pub fn apply_bias(p: &ProbabilityTable, bias: &[MarginalBias]) -> Result<ProbabilityTable> {
    let s = p.scenario().clone();
    let mut e = p.entries().to_vec();
    for b in bias {
        if b.x >= s.inputs_a() || b.y >= s.inputs_b() {
            return Err(Error::param("bias", format!("setting ({}, {}) out of range", b.x, b.y)));
        }
        let o = s.outputs_a()[b.x];
        if b.from >= o || b.to >= o || b.from == b.to {
            return Err(Error::param("bias", "invalid outcome pair"));
        }
        if !(b.magnitude >= 0.0) {
            return Err(Error::param("bias", "magnitude must be nonnegative"));
        }
        let ob = s.outputs_b()[b.y];
        let mass: f64 = (0..ob).map(|k| e[s.full_index(b.x, b.y, b.from, k)]).sum();
        if b.magnitude > mass {
            return Err(Error::param(
                "bias",
                format!("magnitude {} exceeds available marginal {mass}", b.magnitude),
            ));
        }
        if b.magnitude == 0.0 {
            continue;
        }
        let scale = b.magnitude / mass;
        for k in 0..ob {
            let moved = e[s.full_index(b.x, b.y, b.from, k)] * scale;
            e[s.full_index(b.x, b.y, b.from, k)] -= moved;
            e[s.full_index(b.x, b.y, b.to, k)] += moved;
        }
    }
    ProbabilityTable::from_entries_clamped(s, e, 1e-15)
}

/// One multinomial draw by sequential binomials.
fn multinomial(n: u64, probs: &[f64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = vec![0; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    out
}

/// Counts from a probability table; each setting pair draws from its own
/// stream keyed by `(seed, x, y)`.
pub fn simulate_table_counts(p: &ProbabilityTable, plan: &ShotPlan) -> Result<CountsTable> {
    if plan.shots == 0 {
        return Err(Error::param("shots", "must be at least 1"));
    }
    let p = apply_bias(p, &plan.bias)?;
    let s = p.scenario().clone();
    let pairs: Vec<(usize, usize)> = (0..s.inputs_a())
        .flat_map(|x| (0..s.inputs_b()).map(move |y| (x, y)))
        .collect();
    let blocks: Vec<Vec<u64>> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream((x * s.inputs_b() + y) as u64);
            multinomial(plan.shots, p.block(x, y), &mut rng)
        })
        .collect();
    CountsTable::new(s, blocks.concat())
}

/// Counts from the Born-rule table of `r`.
pub fn simulate_counts(r: &Realization, plan: &ShotPlan) -> Result<CountsTable> {
    simulate_table_counts(&correlation(r)?, plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::enumerate_vertices;
    use crate::quantum::phi3_i3plus_realization;
    use crate::scenario::{frequencies_from_counts, signaling_report_with_counts, Scenario};

    #[test]
    fn totals_and_determinism() {
        let r = phi3_i3plus_realization();
        let plan = ShotPlan::new(1000, 5);
        let a = simulate_counts(&r, &plan).unwrap();
        let b = simulate_counts(&r, &plan).unwrap();
        assert_eq!(a, b);
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(a.total(x, y), 1000);
            }
        }
        assert_ne!(a, simulate_counts(&r, &ShotPlan::new(1000, 6)).unwrap());
    }

    #[test]
    fn large_sample_converges() {
        let r = phi3_i3plus_realization();
        let c = simulate_counts(&r, &ShotPlan::new(10_000_000, 1)).unwrap();
        let f = frequencies_from_counts(&c).unwrap();
        assert!(f.linf_distance(&correlation(&r).unwrap()) < 1e-3);
    }

    #[test]
    fn deterministic_vertex() {
        let v = &enumerate_vertices(&Scenario::flagship()).unwrap()[123];
        let c = simulate_table_counts(&v.table, &ShotPlan::new(500, 0)).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(c.block(x, y).iter().filter(|&&n| n > 0).count(), 1);
            }
        }
    }

    #[test]
    fn bias_is_flagged() {
        let r = phi3_i3plus_realization();
        let plan = ShotPlan::new(100_000, 3).with_bias(MarginalBias::new(0, 0, 0.02));
        let rep = signaling_report_with_counts(&simulate_counts(&r, &plan).unwrap()).unwrap();
        assert!(rep.flagged(1.0).iter().any(|d| d.setting == 0 && d.other.0 == 0));
    }

    #[test]
    fn invalid_plans() {
        let p = ProbabilityTable::uniform(&Scenario::flagship());
        assert!(simulate_table_counts(&p, &ShotPlan::new(0, 0)).is_err());
        let plan = ShotPlan::new(10, 0).with_bias(MarginalBias::new(0, 0, 0.5));
        assert!(simulate_table_counts(&p, &plan).is_err());
    }
}
