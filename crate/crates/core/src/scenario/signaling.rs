use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{CountsTable, ProbabilityTable};
use crate::error::Result;

/// One marginal difference `|P(k|s,t₁) − P(k|s,t₂)|` where `s` is the measuring
/// party's setting and `t₁ < t₂` range over the other party's settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalingDelta {
    pub setting: usize,
    pub outcome: usize,
    pub other: (usize, usize),
    pub delta: f64,
    /// One-sigma multinomial uncertainty of the difference, when counts are known.
    pub sigma: Option<f64>,
}

impl SignalingDelta {
    /// Deviation in units of `sigma`; `None` without counts.
    pub fn z_score(&self) -> Option<f64> {
        self.sigma.map(|s| {
            if s > 0.0 {
                self.delta / s
            } else if self.delta > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalingReport {
    /// `ΔP(a|x,y₁,₂)`: Alice's marginals under different Bob settings.
    pub delta_alice: Vec<SignalingDelta>,
    /// `ΔP(b|x₁,₂,y)`: Bob's marginals under different Alice settings.
    pub delta_bob: Vec<SignalingDelta>,
    pub max_delta: f64,
}

impl SignalingReport {
    pub fn all(&self) -> impl Iterator<Item = &SignalingDelta> {
        self.delta_alice.iter().chain(&self.delta_bob)
    }

    /// Differences exceeding `band` standard deviations.
    pub fn flagged(&self, band: f64) -> Vec<&SignalingDelta> {
        self.all()
            .filter(|d| d.z_score().is_some_and(|z| z > band))
            .collect()
    }

    /// Two-sided band giving family-wise false-positive rate `alpha` over all
    /// comparisons in the report (Šidák correction, normal approximation).
    pub fn family_band(&self, alpha: f64) -> f64 {
        let m = self.all().count().max(1) as f64;
        let per_test = 1.0 - (1.0 - alpha).powf(1.0 / m);
        normal_upper_quantile(per_test / 2.0)
    }

    pub fn max_z(&self) -> Option<f64> {
        self.all().filter_map(|d| d.z_score()).reduce(f64::max)
    }
}

fn build(p: &ProbabilityTable, totals: Option<&CountsTable>) -> SignalingReport {
    let s = p.scenario();
    let variance = |prob: f64, n: u64| prob * (1.0 - prob) / n as f64;
    let mut delta_alice = Vec::new();
    for x in 0..s.inputs_a() {
        for a in 0..s.outputs_a()[x] {
            for y1 in 0..s.inputs_b() {
                for y2 in y1 + 1..s.inputs_b() {
                    let p1 = p.marginal_a(x, y1, a);
                    let p2 = p.marginal_a(x, y2, a);
                    let sigma = totals.map(|c| (variance(p1, c.total(x, y1)) + variance(p2, c.total(x, y2))).sqrt());
                    delta_alice.push(SignalingDelta {
                        setting: x,
                        outcome: a,
                        other: (y1, y2),
                        delta: (p1 - p2).abs(),
                        sigma,
                    });
                }
            }
        }
    }
    let mut delta_bob = Vec::new();
    for y in 0..s.inputs_b() {
        for b in 0..s.outputs_b()[y] {
            for x1 in 0..s.inputs_a() {
                for x2 in x1 + 1..s.inputs_a() {
                    let p1 = p.marginal_b(x1, y, b);
                    let p2 = p.marginal_b(x2, y, b);
                    let sigma = totals.map(|c| (variance(p1, c.total(x1, y)) + variance(p2, c.total(x2, y))).sqrt());
                    delta_bob.push(SignalingDelta {
                        setting: y,
                        outcome: b,
                        other: (x1, x2),
                        delta: (p1 - p2).abs(),
                        sigma,
                    });
                }
            }
        }
    }
    let max_delta = delta_alice
        .iter()
        .chain(&delta_bob)
        .map(|d| d.delta)
        .fold(0.0, f64::max);
    SignalingReport {
        delta_alice,
        delta_bob,
        max_delta,
    }
}

/// All pairwise marginal differences in both directions.
pub fn signaling_deltas(p: &ProbabilityTable) -> SignalingReport {
    build(p, None)
}

/// As [`signaling_deltas`] on the relative frequencies of `counts`, with
/// multinomial one-sigma bands attached to every difference.
pub fn signaling_report_with_counts(counts: &CountsTable) -> Result<SignalingReport> {
    let p = super::frequencies_from_counts(counts)?;
    Ok(build(&p, Some(counts)))
}

/// Upper-tail standard normal quantile.
pub(crate) fn normal_upper_quantile(tail: f64) -> f64 {
    let n = Normal::standard();
    -n.inverse_cdf(tail.clamp(1e-300, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{check_nonsignaling, Scenario};

    fn shifted_table(shift: f64) -> ProbabilityTable {
        let s = Scenario::flagship();
        let mut e = ProbabilityTable::uniform(&s).into_entries();
        // move mass from a=1 to a=0 in setting (0,0) only
        for b in 0..3 {
            e[s.full_index(0, 0, 0, b)] += shift / 3.0;
            e[s.full_index(0, 0, 1, b)] -= shift / 3.0;
        }
        ProbabilityTable::new(s, e).unwrap()
    }

    #[test]
    fn uniform_is_nonsignaling() {
        let r = signaling_deltas(&ProbabilityTable::uniform(&Scenario::flagship()));
        assert!(r.max_delta <= 1e-12);
        assert_eq!(r.delta_alice.len(), 3 * 3 * 3);
        assert_eq!(r.delta_bob.len(), 27);
    }

    #[test]
    fn constructed_violation_is_detected() {
        let p = shifted_table(0.01);
        let r = signaling_deltas(&p);
        assert!((r.max_delta - 0.01).abs() < 1e-12);
        assert!(!check_nonsignaling(&p, 1e-3));
        assert!(check_nonsignaling(&p, 0.02));
        // Bob's marginals are untouched by this shift
        assert!(r.delta_bob.iter().all(|d| d.delta < 1e-15));
    }

    #[test]
    fn quantiles() {
        assert!((normal_upper_quantile(0.025) - 1.959963985).abs() < 1e-7);
        assert!((normal_upper_quantile(0.5)).abs() < 1e-9);
        assert!((normal_upper_quantile(1e-6) - 4.753424309).abs() < 1e-6);
    }
}
