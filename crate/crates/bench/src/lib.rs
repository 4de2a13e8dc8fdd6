//! Shared inputs for the benchmarks.

use bellscope::dataset::inequality;
use bellscope::quantum::{correlation, phi3_i3plus_realization};
use bellscope::{BellFunctional, ProbabilityTable};

pub fn row(n: usize) -> BellFunctional {
    inequality(n).expect("row in 1..=19").functional
}

/// Born-rule table of the I₃⁺ optimum.
pub fn phi3_table() -> ProbabilityTable {
    correlation(&phi3_i3plus_realization()).expect("valid realization")
}
