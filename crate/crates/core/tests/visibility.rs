use bellscope::dataset::{i3plus, inequality};
use bellscope::linprog::{visibility_from_values, visibility_wrt_inequality, visibility_wrt_local_set};
use bellscope::quantum::{correlation, phi3_i3plus_realization, seesaw_maximize, seesaw_minimize, SeesawOptions};
use bellscope::{BellFunctional, ProbabilityTable};

fn opts() -> SeesawOptions {
    SeesawOptions {
        restarts: 20,
        ..SeesawOptions::default()
    }
}

#[test]
fn inequality_visibilities() {
    for (n, expect) in [(1, 0.7415), (12, 0.7277), (14, 0.7415)] {
        let f = inequality(n).unwrap().functional;
        let r = seesaw_maximize(&f, 2, 2, &opts()).unwrap();
        let v = visibility_wrt_inequality(&correlation(&r.realization).unwrap(), &f).unwrap();
        assert!((v - expect).abs() < 1e-3, "row {n}: {v}");
    }
    let f = inequality(19).unwrap().functional;
    let r = seesaw_minimize(&f, 3, 3, &opts()).unwrap();
    let v = visibility_wrt_inequality(&correlation(&r.realization).unwrap(), &f.negated()).unwrap();
    assert!((v - 0.9250).abs() < 1e-3, "row 19 min: {v}");
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Largest value of `f` on `p` over relabelings of parties, settings and outcomes.
fn best_relabeled_value(f: &BellFunctional, p: &ProbabilityTable) -> f64 {
    let c = f.to_full().coefficients().to_vec();
    let idx = |x: usize, y: usize, a: usize, b: usize| 27 * x + 9 * y + 3 * a + b;
    let pe = p.entries();
    let mut best = f64::MIN;
    for swap in [false, true] {
        for sx in &PERMS {
            for sy in &PERMS {
                let mut terms = Vec::new();
                for (x, y, a, b) in p.scenario().full_indices() {
                    let w = if swap { c[idx(y, x, b, a)] } else { c[idx(x, y, a, b)] };
                    if w != 0.0 {
                        terms.push((sx[x], sy[y], a, b, w));
                    }
                }
                for oa in 0..216 {
                    let pa = [PERMS[oa % 6], PERMS[(oa / 6) % 6], PERMS[oa / 36]];
                    for ob in 0..216 {
                        let pb = [PERMS[ob % 6], PERMS[(ob / 6) % 6], PERMS[ob / 36]];
                        let s: f64 = terms
                            .iter()
                            .map(|&(x, y, a, b, w)| w * pe[idx(x, y, pa[x][a], pb[y][b])])
                            .sum();
                        best = best.max(s);
                    }
                }
            }
        }
    }
    best + f.to_full().constant()
}

#[test]
fn i3plus_optimum_visibility_and_certificate() {
    let p = correlation(&phi3_i3plus_realization()).unwrap();
    let v = visibility_wrt_inequality(&p, &i3plus()).unwrap();
    assert!((v - 0.8794).abs() < 5e-4, "{v}");
    let local = visibility_wrt_local_set(&p).unwrap();
    assert!((local.v_cr - 0.8794).abs() < 5e-4, "{}", local.v_cr);
    let cert = local.certificate.expect("nonlocal table");
    assert!(cert.is_facet());
    assert_eq!(cert.face.affine_dimension, 47);
    assert!((visibility_wrt_inequality(&p, &cert.functional).unwrap() - local.v_cr).abs() < 1e-6);
    // the optimum is degenerate; a relabeling of row 16 is among the optimal facets
    let row16 = inequality(16).unwrap().functional;
    let s = best_relabeled_value(&row16, &p);
    let s1 = row16.evaluate(&ProbabilityTable::uniform(p.scenario())).unwrap();
    let v16 = visibility_from_values(s, s1, row16.local_max.unwrap());
    assert!((v16 - local.v_cr).abs() < 1e-6, "{v16}");
}
