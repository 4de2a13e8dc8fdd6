//! Embedded reference inequalities for the `{[3 3 3] [3 3 3]}` scenario.
//!
//! Coefficients are CG vectors in the crate's fixed ordering. The reported
//! properties are reference values from the published tables, kept for
//! regression comparisons.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{BellFunctional, Form, Scenario};

pub use crate::scenario::io::{parse_functional, serialize_functional};

pub const INEQUALITY_COUNT: usize = 19;

/// Reference properties of one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Properties {
    /// Smallest scenario the expression reduces to.
    pub reducible_scenario: &'static str,
    pub local_max: i64,
    pub local_min: i64,
    pub quantum_max: f64,
    pub quantum_min: f64,
    pub state_visibility_max: Option<f64>,
    pub noise_visibility_max: Option<f64>,
    pub state_visibility_min: Option<f64>,
    pub noise_visibility_min: Option<f64>,
    /// Number of affinely independent vertices saturating the local minimum.
    pub min_face_vertices: usize,
    /// The minimum is not violated by quantum correlations.
    pub min_side_not_violated: bool,
    /// The reported quantum maximum is not matched by a known upper bound.
    pub max_side_gap_open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityRecord {
    pub index: usize,
    pub functional: BellFunctional,
    pub declared_local_max: i64,
    pub declared_local_min: i64,
    pub reducible_scenario: &'static str,
    pub properties: Properties,
}

pub fn coefficients(n: usize) -> Result<[i8; 48]> {
    if !(1..=INEQUALITY_COUNT).contains(&n) {
        return Err(Error::param("n", format!("{n} is outside 1..=19")));
    }
    Ok(COEFFICIENTS[n - 1])
}

pub fn inequality(n: usize) -> Result<InequalityRecord> {
    let c = coefficients(n)?;
    let p = PROPERTIES[n - 1];
    let functional = BellFunctional::new(
        Scenario::flagship(),
        Form::CollinsGisin,
        c.iter().map(|&v| v as f64).collect(),
    )?
    .with_bounds(Some(p.local_max as f64), Some(p.local_min as f64))?;
    Ok(InequalityRecord {
        index: n,
        functional,
        declared_local_max: p.local_max,
        declared_local_min: p.local_min,
        reducible_scenario: p.reducible_scenario,
        properties: p,
    })
}

pub fn all_inequalities() -> Vec<InequalityRecord> {
    (1..=INEQUALITY_COUNT).map(|n| inequality(n).expect("index in range")).collect()
}

/// `(1/9) Σ δ(xy + a + b mod 3)` in full form, local maximum 2/3.
pub fn i3plus() -> BellFunctional {
    let s = Scenario::flagship();
    let c = s
        .full_indices()
        .map(|(x, y, a, b)| if (x * y + a + b) % 3 == 0 { 1.0 / 9.0 } else { 0.0 })
        .collect();
    BellFunctional::new(s, Form::Full, c)
        .expect("81 coefficients")
        .with_bounds(Some(2.0 / 3.0), None)
        .expect("no lower bound")
}

/// Looks up `row:<n>` / `<n>` or `i3plus`.
pub fn builtin(name: &str) -> Result<BellFunctional> {
    let key = name.trim().to_ascii_lowercase();
    if key == "i3plus" || key == "i3+" {
        return Ok(i3plus());
    }
    let num = key.strip_prefix("row:").unwrap_or(&key);
    let n: usize = num
        .parse()
        .map_err(|_| Error::param("functional", format!("unknown built-in `{name}`")))?;
    Ok(inequality(n)?.functional)
}

const COEFFICIENTS: [[i8; 48]; 19] = [
    [0, 1, 0, 1, -1, 0, 0, 1, 0, 1, -2, 1, -1, 1, 0, 0, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, -1, 0, -2, -1, 1, 0, -1, 1, 0, 1, 0, -1, -1, 0, 1, 1, -1, -1, -1, 0, 1, -1],
    [-1, 1, 0, 1, -1, 0, 0, 2, 0, 1, -2, 1, -2, 1, 1, 0, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, 0, 0, -1, -1, 1, 0, -1, 1, 0, 1, 0, -1, -1, 0, 1, 1, -1, -1, -1, 0, 1, -1],
    [0, 1, 0, 1, -1, 0, 0, 1, 0, 1, -2, 1, -2, 1, 0, 0, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, 1, 0, -1, -1, 0, 1, 1, -1, -1, -2, 0, 1, -1],
    [0, 1, -1, 0, 0, 1, -1, 2, 1, 1, -1, 1, -2, 1, 0, 0, 0, -1, 0, -1, 0, 1, 0, 0, 1, -1, -2, 1, -1, -1, 1, 0, -1, 0, -1, 1, 0, 0, 0, 0, 1, 0, -2, -1, 0, 1, 1, -1],
    [0, 1, 0, 1, -1, 0, 0, 1, 0, 1, -2, 1, -2, 1, 0, 0, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, 0, 0, -1, -1, 1, 0, 0, 1, 0, 1, 0, -1, -2, 0, 1, 1, -1, -1, -2, 0, 1, -1],
    [-1, 1, 0, 1, -1, 0, 0, 2, 0, 1, -2, 1, -2, 1, 1, 0, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, 0, 0, -1, -1, 1, 0, 0, 1, 0, 1, 0, -1, -1, 0, 1, 1, -1, -1, -2, 0, 1, -1],
    [0, 1, 0, 1, -1, 0, 0, 1, 0, 1, -2, 1, -2, 1, 0, 0, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, -1, 0, -1, -1, 1, -1, 0, 1, 0, 1, 0, -1, -1, 0, 1, 1, -1, -1, -2, 0, 1, 0],
    [-1, 1, -1, 0, 0, 1, 0, 2, 0, 1, -2, 1, -2, 1, 1, 0, 0, -1, 0, -1, 0, 1, 0, 0, 1, -1, -1, 1, -1, -1, 1, 0, -1, 0, -1, 1, 0, 0, 0, 0, 1, 0, -1, -1, -1, 1, 1, -1],
    [0, 1, -1, 0, 0, 1, 0, 1, 0, 1, -2, 1, -2, 1, 0, 0, 0, -1, 0, -1, 0, 1, 0, 0, 1, -1, -2, 1, -1, -1, 1, 0, -2, 0, -1, 1, 0, 0, 0, 0, 1, 0, -1, -1, 0, 1, 1, -1],
    [0, 1, -1, 0, -1, 0, 0, 1, 0, 1, -2, 1, -1, 1, 0, -1, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, 0, 0, -2, -1, 1, -1, 0, 1, -1, 1, 0, 0, -1, 0, 1, 0, -1, -1, -1, 1, 1, 0],
    [0, 1, 0, 1, -1, 0, 0, 1, 0, 1, -2, 1, -1, 1, 0, 0, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, -1, 0, -2, -1, 1, 0, 0, 1, 0, 1, 0, -1, -1, 0, 1, 1, -1, -1, -2, 0, 1, -1],
    [0, 1, 0, 1, -1, 0, 1, 1, 0, 0, -2, 1, -1, 1, 1, 0, 0, -1, 0, -1, 0, 0, 0, 0, 0, 0, 0, 1, -2, -1, 0, -1, -1, 1, -1, 1, 0, 0, 0, 0, 1, 0, -1, -1, 0, 1, 1, -1],
    [-1, 1, -1, 0, 0, 1, 0, 2, 0, 1, -2, 1, -2, 1, 1, 0, 0, -1, 0, -1, 0, 1, 0, 0, 1, -1, -1, 1, -1, -1, 1, 0, -2, 0, -1, 1, 0, 0, 0, 0, 1, 0, -1, -1, 0, 1, 1, -1],
    [0, 1, 0, 1, -1, 0, 0, 1, 0, 1, -2, 1, -1, 1, 0, 0, 0, -1, 0, -1, -1, 1, 0, 0, 1, 0, 0, 0, -2, -1, 1, 0, 0, 1, 0, 1, 0, -1, -2, 0, 1, 1, -1, -1, -2, 0, 1, -1],
    [-2, 1, 0, 0, 0, -1, 0, 2, -1, 0, -1, 1, -1, 1, 1, -1, 0, -1, 0, -1, -1, 1, -1, 0, 2, -1, 1, 0, 0, -1, 0, 1, 0, 1, 0, 1, 0, 0, -1, -1, 1, 0, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, -1, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -1, -1, 1, 0, 0, 0, 1, 0, -1, -1, 0, 0, 0, 1, 0, -1, -1, 0, 0, 0],
    [1, 1, 0, 0, 0, -1, 0, 0, 0, 0, 0, 0, 0, 1, -1, -1, -1, 0, -1, -1, 0, 0, 0, -1, 0, 0, 1, 0, -1, -1, -1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, -1, -1, 1, 0, 0, 1],
    [1, 1, 0, 0, 0, -1, 0, 0, 0, 0, 0, 0, 0, 1, -1, -1, 0, 0, -1, -1, 0, 0, 0, -1, 0, 0, 1, 0, -1, -1, -1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, -1, -1, -1, 1, 0, 1, 2],
    [0, 1, 0, 0, 0, 0, 0, 0, -1, 0, -1, 1, 0, 1, -1, -1, -1, -1, 0, -1, 0, 0, -1, 1, 0, -1, 0, 0, -1, -1, 0, -1, 0, 1, 0, 1, 0, -1, 0, -1, 0, 0, 0, -1, 0, 1, 0, 0],
];

const PROPERTIES: [Properties; 19] = [
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -4,
        quantum_max: 2.6972,
        quantum_min: -4.0,
        state_visibility_max: Some(0.7819),
        noise_visibility_max: Some(0.7415),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 1,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -4,
        quantum_max: 2.6712,
        quantum_min: -4.0,
        state_visibility_max: Some(0.7884),
        noise_visibility_max: Some(0.7487),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 1,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -5,
        quantum_max: 2.6586,
        quantum_min: -5.0,
        state_visibility_max: Some(0.7915),
        noise_visibility_max: Some(0.7523),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 2,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -5,
        quantum_max: 2.6586,
        quantum_min: -5.0,
        state_visibility_max: Some(0.7915),
        noise_visibility_max: Some(0.7523),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 2,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -4,
        quantum_max: 2.6488,
        quantum_min: -4.0,
        state_visibility_max: Some(0.794),
        noise_visibility_max: Some(0.7551),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 4,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -4,
        quantum_max: 2.6577,
        quantum_min: -4.0,
        state_visibility_max: Some(0.7917),
        noise_visibility_max: Some(0.7525),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 4,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -4,
        quantum_max: 2.6577,
        quantum_min: -4.0,
        state_visibility_max: Some(0.7917),
        noise_visibility_max: Some(0.7525),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 5,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -4,
        quantum_max: 2.6577,
        quantum_min: -4.001,
        state_visibility_max: Some(0.7917),
        noise_visibility_max: Some(0.7525),
        state_visibility_min: Some(0.9997),
        noise_visibility_min: Some(0.9997),
        min_face_vertices: 5,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -4,
        quantum_max: 2.672,
        quantum_min: -4.0171,
        state_visibility_max: Some(0.7881),
        noise_visibility_max: Some(0.7485),
        state_visibility_min: Some(0.9941),
        noise_visibility_min: Some(0.9941),
        min_face_vertices: 6,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 1,
        local_min: -5,
        quantum_max: 1.672,
        quantum_min: -5.0171,
        state_visibility_max: Some(0.7881),
        noise_visibility_max: Some(0.7485),
        state_visibility_min: Some(0.9941),
        noise_visibility_min: Some(0.9941),
        min_face_vertices: 7,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -4,
        quantum_max: 2.6955,
        quantum_min: -4.0138,
        state_visibility_max: Some(0.7824),
        noise_visibility_max: Some(0.742),
        state_visibility_min: Some(0.9952),
        noise_visibility_min: Some(0.9952),
        min_face_vertices: 8,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 2][3 3 2]}",
        local_max: 2,
        local_min: -3,
        quantum_max: 2.582,
        quantum_min: -3.0005,
        state_visibility_max: Some(0.7746),
        noise_visibility_max: Some(0.7277),
        state_visibility_min: Some(0.9998),
        noise_visibility_min: Some(0.9998),
        min_face_vertices: 8,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 2][3 3 2]}",
        local_max: 2,
        local_min: -3,
        quantum_max: 2.6712,
        quantum_min: -3.6712,
        state_visibility_max: Some(0.7884),
        noise_visibility_max: Some(0.7487),
        state_visibility_min: Some(0.7884),
        noise_visibility_min: Some(0.8172),
        min_face_vertices: 26,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 2,
        local_min: -3,
        quantum_max: 2.6972,
        quantum_min: -3.6972,
        state_visibility_max: Some(0.7819),
        noise_visibility_max: Some(0.7415),
        state_visibility_min: Some(0.7819),
        noise_visibility_min: Some(0.8114),
        min_face_vertices: 27,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 2][3 3 2]}",
        local_max: 1,
        local_min: -3,
        quantum_max: 1.5923,
        quantum_min: -3.5923,
        state_visibility_max: Some(0.7715),
        noise_visibility_max: Some(0.7242),
        state_visibility_min: Some(0.7715),
        noise_visibility_min: Some(0.805),
        min_face_vertices: 29,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 2][2 2 2]}",
        local_max: 1,
        local_min: -1,
        quantum_max: 1.2532,
        quantum_min: -1.0328,
        state_visibility_max: Some(0.7247),
        noise_visibility_max: Some(0.7247),
        state_visibility_min: Some(0.9682),
        noise_visibility_min: Some(0.9682),
        min_face_vertices: 30,
        min_side_not_violated: false,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 2 2][3 2 2]}",
        local_max: 1,
        local_min: -3,
        quantum_max: 1.309,
        quantum_min: -3.0,
        state_visibility_max: Some(0.7639),
        noise_visibility_max: Some(0.7639),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 4,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 2 2][3 2 2]}",
        local_max: 1,
        local_min: -2,
        quantum_max: 1.4142,
        quantum_min: -2.0,
        state_visibility_max: Some(0.7071),
        noise_visibility_max: Some(0.7071),
        state_visibility_min: None,
        noise_visibility_min: None,
        min_face_vertices: 16,
        min_side_not_violated: true,
        max_side_gap_open: false,
    },
    Properties {
        reducible_scenario: "{[3 3 3][3 3 3]}",
        local_max: 1,
        local_min: -3,
        quantum_max: 1.3782,
        quantum_min: -3.2071,
        state_visibility_max: Some(0.7925),
        noise_visibility_max: Some(0.7925),
        state_visibility_min: Some(0.7071),
        noise_visibility_min: Some(0.925),
        min_face_vertices: 13,
        min_side_not_violated: false,
        max_side_gap_open: true,
    },
];
