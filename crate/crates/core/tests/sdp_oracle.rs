use bellscope::sdp::{from_sdpa, sdp_solve, SdpOptions, SdpStatus};

fn reference(text: &str) -> f64 {
    let line = text.lines().next().unwrap();
    line.split_whitespace().nth(3).unwrap().parse().unwrap()
}

#[test]
fn random_problems_match_reference_solver() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if !path.file_name().unwrap().to_string_lossy().starts_with("sdp_random_") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let p = from_sdpa(&text).unwrap();
        let s = sdp_solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal, "{path:?}");
        let want = reference(&text);
        assert!(
            (s.objective - want).abs() <= 1e-5 * (1.0 + want.abs()),
            "{path:?}: {} vs {want}",
            s.objective
        );
        assert!(s.gap <= 1e-6 && s.infeasibility <= 1e-7);
        // weak duality at the returned point
        assert!(s.objective <= s.dual_objective + 1e-6 * (1.0 + want.abs()));
        seen += 1;
    }
    assert_eq!(seen, 6);
}
