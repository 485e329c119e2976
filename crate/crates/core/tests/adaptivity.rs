use mfmfe::adaptivity::{run_adaptive_from, AdaptiveConfig, RefinementMode, HISTORY_HEADER};
use mfmfe::benchmarks::problem_by_id;

fn history_lines(dir: &std::path::Path) -> Vec<String> {
    std::fs::read_to_string(dir.join("history.csv")).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn history_is_flushed_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let problem = problem_by_id("example71_r04").unwrap();
    let config = AdaptiveConfig {
        max_iterations: 6,
        output: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let mut seen = Vec::new();
    let run = run_adaptive_from(problem.initial_mesh(), problem.as_ref(), &config, |state| {
        let lines = history_lines(dir.path());
        seen.push(lines.len());
        assert_eq!(lines[0], HISTORY_HEADER);
        assert_eq!(lines.last().unwrap(), &state.row.to_csv());
        let stem = format!("{:04}", state.iteration);
        for f in [format!("meshes/mesh_{stem}.vtk"), format!("solutions/sol_{stem}.vtk"), format!("reports/report_{stem}.csv")] {
            assert!(dir.path().join(&f).is_file(), "missing {f}");
        }
    })
    .unwrap();
    assert_eq!(seen, (2..=7).collect::<Vec<_>>());
    assert_eq!(run.history.rows.len(), 6);
    for line in &history_lines(dir.path())[1..] {
        assert_eq!(line.rsplit(',').next().unwrap().parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn element_budget_stops_the_loop() {
    let problem = problem_by_id("example72").unwrap();
    let config = AdaptiveConfig {
        max_iterations: 100,
        max_elements: 200,
        mode: RefinementMode::Uniform,
        ..Default::default()
    };
    let run = run_adaptive_from(problem.initial_mesh(), problem.as_ref(), &config, |_| {}).unwrap();
    let n: Vec<usize> = run.history.rows.iter().map(|r| r.n_elements).collect();
    assert_eq!(n, [8, 16, 32, 64, 128]);
}

#[test]
fn invalid_theta_is_rejected() {
    let problem = problem_by_id("constant_patch").unwrap();
    let config = AdaptiveConfig {
        theta: 0.0,
        ..Default::default()
    };
    assert!(run_adaptive_from(problem.initial_mesh(), problem.as_ref(), &config, |_| {}).is_err());
}

/// Per iteration: (N, h_min/h_max, distance from the origin to the smallest element).
fn concentration(id: &str, iterations: usize) -> Vec<(usize, f64, f64, f64)> {
    let problem = problem_by_id(id).unwrap();
    let config = AdaptiveConfig {
        max_iterations: iterations,
        ..Default::default()
    };
    let mut out = Vec::new();
    run_adaptive_from(problem.initial_mesh(), problem.as_ref(), &config, |s| {
        let m = &s.mesh;
        let t = (0..m.n_elements())
            .min_by(|&a, &b| m.diameter(a).total_cmp(&m.diameter(b)))
            .unwrap();
        let dist = m.triangle(t).iter().map(|&v| m.vertex(v).coords.norm()).fold(f64::INFINITY, f64::min);
        out.push((m.n_elements(), m.h_min() / m.h_max(), dist, m.h_min()));
    })
    .unwrap();
    out
}

#[test]
fn refinement_concentrates_at_the_origin() {
    for (i, &(_, _, dist, h_min)) in concentration("example71_r04", 20).iter().enumerate().skip(5) {
        assert!(dist <= 2.0 * h_min, "iteration {i}: distance {dist} vs h_min {h_min}");
    }
}

#[test]
fn stronger_singularity_concentrates_more() {
    let strong = concentration("example71_r01", 21);
    let weak = concentration("example71_r04", 60);
    let (n, ratio, _, _) = strong[20];
    let &(_, weak_ratio, _, _) = weak.iter().find(|w| w.0 >= n).unwrap();
    assert!(ratio < weak_ratio, "N {n}: r=0.1 ratio {ratio} vs r=0.4 ratio {weak_ratio}");
}
