use bellscope::dataset::{i3plus, inequality};
use bellscope::moment::{
    build_structure, di_negativity_from_bell_value, di_negativity_lower_bound, nearest_quantum_correlation,
    quantum_lower_bound, quantum_upper_bound, Level,
};
use bellscope::polytope::enumerate_vertices;
use bellscope::quantum::{correlation, negativity, phi3_i3plus_realization, random_realization};
use bellscope::scenario::check_nonsignaling;
use bellscope::scenario::io::parse_correlation;
use bellscope::simulate::{apply_bias, simulate_table_counts, MarginalBias, ShotPlan};
use bellscope::{ProbabilityTable, Scenario};

fn i14_table() -> ProbabilityTable {
    parse_correlation(include_str!("fixtures/i14_optimum.txt")).unwrap()
}

// Reference values from an independent complex-Hermitian SDP model.
const NEG_PHI3_LOCAL1PPT: f64 = 0.365217;
const NEG_I14_LOCAL1PPT: f64 = 0.333333;
const UB19_NPA1AB: f64 = 1.414863;

#[test]
fn regression_constants() {
    let phi = correlation(&phi3_i3plus_realization()).unwrap();
    let n = di_negativity_lower_bound(&phi, Level::Local1PPT).unwrap();
    assert!((n - NEG_PHI3_LOCAL1PPT).abs() < 1e-4, "{n}");
    let n = di_negativity_lower_bound(&i14_table(), Level::Local1PPT).unwrap();
    assert!((n - NEG_I14_LOCAL1PPT).abs() < 1e-5, "{n}");
    let ub = quantum_upper_bound(&inequality(19).unwrap().functional, Level::Npa1AB).unwrap();
    assert!((ub - UB19_NPA1AB).abs() < 1e-5, "{ub}");
}

#[test]
fn sandwich_on_row_14() {
    let f = inequality(14).unwrap().functional;
    let seesaw = f.evaluate(&i14_table()).unwrap();
    let tight = quantum_upper_bound(&f, Level::Npa1AB).unwrap();
    let loose = quantum_upper_bound(&f, Level::Npa1).unwrap();
    assert!(seesaw <= tight + 1e-6 && tight <= loose + 1e-6);
    assert!((tight - seesaw).abs() < 1e-5, "{tight} vs {seesaw}");
    // algebraic maximum: the largest coefficient sum over one outcome per block
    let algebraic: f64 = f.to_full().coefficients().chunks(9).map(|b| b.iter().cloned().fold(f64::MIN, f64::max)).sum();
    assert!(loose <= algebraic + f.to_full().constant() + 1e-6);
    let lb = quantum_lower_bound(&f, Level::Npa1AB).unwrap();
    assert!((lb + 3.6972357).abs() < 1e-5, "{lb}");
}

#[test]
fn exact_moment_matrices_are_feasible() {
    let s = Scenario::flagship();
    for seed in 0..5 {
        let r = random_realization(&s, 3, 3, 1 + seed as usize % 3, seed).unwrap();
        for level in [Level::Npa1, Level::Npa1AB, Level::Local1, Level::Npa2] {
            let chi = build_structure(&s, level).unwrap().exact_moment_matrix(&r).unwrap();
            assert!(chi.symmetric_eigenvalues().min() > -1e-9, "{level} seed {seed}");
        }
    }
}

#[test]
fn nearest_quantum_on_quantum_input() {
    let p = correlation(&phi3_i3plus_realization()).unwrap();
    let r = nearest_quantum_correlation(&p, Level::Npa1AB, None).unwrap();
    assert!(r.l1_distance <= 1e-6, "{}", r.l1_distance);
    assert!(r.table.linf_distance(&p) < 1e-6);
}

#[test]
fn nearest_quantum_detects_infeasible_input() {
    // the algebraic maximum of I₃⁺ lies outside the quantum set
    let s = Scenario::flagship();
    let e = s
        .full_indices()
        .map(|(x, y, a, b)| if (x * y + a + b) % 3 == 0 { 1.0 / 3.0 } else { 0.0 })
        .collect();
    let pr = ProbabilityTable::new(s, e).unwrap();
    let r = nearest_quantum_correlation(&pr, Level::Npa1AB, None).unwrap();
    assert!(r.l1_distance > 0.1, "{}", r.l1_distance);
    assert!(check_nonsignaling(&r.table, 1e-7));
}

#[test]
fn nearest_quantum_perturbation_and_pin() {
    let p = correlation(&phi3_i3plus_realization()).unwrap();
    let f = i3plus();
    for eps in [1e-3, 3e-2] {
        let q = apply_bias(&p, &[MarginalBias::new(0, 0, eps)]).unwrap();
        let r = nearest_quantum_correlation(&q, Level::Npa1AB, None).unwrap();
        assert!(r.l1_distance <= 2.0 * eps + 1e-6, "{eps}: {}", r.l1_distance);
        assert!(check_nonsignaling(&r.table, 1e-7));
        let target = f.evaluate(&q).unwrap();
        let r = nearest_quantum_correlation(&q, Level::Npa1AB, Some((&f, target))).unwrap();
        assert!((f.evaluate(&r.table).unwrap() - target).abs() <= 1e-6);
        assert!(check_nonsignaling(&r.table, 1e-7));
    }
    assert!(nearest_quantum_correlation(&p, Level::Local1PPT, None).is_err());
}

#[test]
fn negativity_bound_vanishes_on_local_tables() {
    let vs = enumerate_vertices(&Scenario::flagship()).unwrap();
    for v in [&vs[0], &vs[400]] {
        let n = di_negativity_lower_bound(&v.table, Level::Local1PPT).unwrap();
        assert!(n.abs() <= 1e-6, "{n}");
    }
    let mix = vs[0].table.mix_with_white_noise(0.3).unwrap();
    assert!(di_negativity_lower_bound(&mix, Level::Local1PPT).unwrap().abs() <= 1e-6);
}

#[test]
fn negativity_bound_is_sound() {
    let s = Scenario::flagship();
    for seed in 0..6 {
        let r = random_realization(&s, 3, 3, 1, 100 + seed).unwrap();
        let n = di_negativity_lower_bound(&correlation(&r).unwrap(), Level::Local1PPT).unwrap();
        assert!(n <= negativity(r.state()) + 1e-6, "seed {seed}");
    }
    let phi = phi3_i3plus_realization();
    for v in [0.9, 0.97] {
        let r = phi.with_state(phi.state().with_visibility(v).unwrap()).unwrap();
        let n = di_negativity_lower_bound(&correlation(&r).unwrap(), Level::Local1PPT).unwrap();
        assert!(n > 0.0 && n <= negativity(r.state()) + 1e-6, "{v}: {n}");
    }
}

#[test]
fn full_statistics_beat_bell_value_on_simulated_data() {
    let f = inequality(14).unwrap().functional;
    let counts = simulate_table_counts(&i14_table(), &ShotPlan::new(10_000, 7)).unwrap();
    let freq = bellscope::scenario::frequencies_from_counts(&counts).unwrap();
    let near = nearest_quantum_correlation(&freq, Level::Npa1AB, None).unwrap();
    assert!(near.l1_distance < 0.2, "{}", near.l1_distance);
    let value = f.evaluate(&near.table).unwrap();
    let full = di_negativity_lower_bound(&near.table, Level::Local1PPT).unwrap();
    let bell_only = di_negativity_from_bell_value(&f, value, Level::Local1PPT).unwrap();
    assert!(full >= bell_only - 1e-6, "{full} < {bell_only}");
}
