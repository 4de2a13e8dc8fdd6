use bellscope::dataset::inequality;
use bellscope::quantum::{
    bell_value, correlation, parse_realization, seesaw_maximize, MeasurementMode, SeesawOptions,
};
use bellscope::scenario::check_nonsignaling;

fn opts(restarts: usize, mode: MeasurementMode) -> SeesawOptions {
    SeesawOptions {
        restarts,
        mode,
        ..SeesawOptions::default()
    }
}

#[test]
fn qubit_rows_reach_the_table() {
    for n in 1..=14 {
        let rec = inequality(n).unwrap();
        let r = seesaw_maximize(&rec.functional, 2, 2, &opts(50, MeasurementMode::Projective)).unwrap();
        let target = rec.properties.quantum_max;
        assert!((r.value - target).abs() < 1e-3, "row {n}: {} vs {target}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12), "row {n} not monotone");
        assert!(check_nonsignaling(&correlation(&r.realization).unwrap(), 1e-12));
    }
    // row 15 needs a non-projective qubit measurement
    let rec = inequality(15).unwrap();
    let proj = seesaw_maximize(&rec.functional, 2, 2, &opts(20, MeasurementMode::Projective)).unwrap();
    assert!(proj.value < 1.26, "{}", proj.value);
    let povm = seesaw_maximize(&rec.functional, 2, 2, &opts(50, MeasurementMode::Povm)).unwrap();
    assert!((povm.value - rec.properties.quantum_max).abs() < 1e-3, "{}", povm.value);
    assert!(povm.realization.povms_a().iter().chain(povm.realization.povms_b()).any(|p| !p.is_projective()));
}

#[test]
fn qutrits_do_not_beat_qubit_rows() {
    for n in [1, 6, 14] {
        let rec = inequality(n).unwrap();
        let r = seesaw_maximize(&rec.functional, 3, 3, &opts(4, MeasurementMode::Projective)).unwrap();
        assert!(r.value <= rec.properties.quantum_max + 1e-4, "row {n}: {}", r.value);
    }
}

#[test]
fn projective_qubits_reach_i12() {
    let r = parse_realization(include_str!("fixtures/i12_projective_qubit.txt")).unwrap();
    assert_eq!(r.state().dim_a(), 2);
    assert!(r.povms_a().iter().chain(r.povms_b()).all(|p| p.is_projective()));
    let v = bell_value(&inequality(12).unwrap().functional, &r).unwrap();
    assert!((v - 2.5819645610).abs() < 1e-8, "{v}");
}
