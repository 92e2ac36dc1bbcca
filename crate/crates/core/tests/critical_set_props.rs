mod common;

use common::{anchor_rows, anchors, apply, pt, rotation};
use proptest::prelude::*;
use steiner_core::{
    enumerate_critical_points, enumerate_from_points, generate_testing_points, grid_search, DomainBox, FlowConfig,
    Objective, Point, PotentialSpec, SolveOptions, Strategy as Plan, TestingPlan,
};

const GRAD_TOL: f64 = 1e-6;

fn cfg() -> FlowConfig {
    FlowConfig {
        grad_tol: GRAD_TOL,
        ..Default::default()
    }
}

fn solve(rows: &[Vec<f64>], spec: &PotentialSpec, plan: &TestingPlan) -> steiner_core::SteinerResult {
    let obj = Objective::new(anchors(rows.to_vec()), spec).unwrap();
    enumerate_critical_points(&obj, plan, &cfg(), &SolveOptions::default()).unwrap()
}

fn shifted_box(b: &DomainBox, t: &[f64], s: f64) -> DomainBox {
    DomainBox::new(
        b.lo()
            .iter()
            .zip(b.hi())
            .zip(t)
            .map(|((l, h), t)| [s * l + t, s * h + t])
            .collect(),
    )
    .unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn critical_points_rest_and_undercut_every_start(rows in anchor_rows(2, 3..=20, 10.0), seed in any::<u64>()) {
        for spec in [PotentialSpec::euclidean(), PotentialSpec::p_norm(3.0), PotentialSpec::gaussian_well(2.0)] {
            let plan = TestingPlan::new(Plan::UniformRandom, 12, seed);
            let obj = Objective::new(anchors(rows.clone()), &spec).unwrap();
            let result = enumerate_critical_points(&obj, &plan, &cfg(), &SolveOptions::default()).unwrap();
            for c in &result.critical_set {
                prop_assert!(c.grad_norm <= GRAD_TOL);
                prop_assert!(obj.gradient(&c.location).unwrap().norm() <= GRAD_TOL);
            }
            let start_min = generate_testing_points(&plan, obj.anchors()).unwrap()
                .iter()
                .map(|p| obj.objective_value(p).unwrap())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(result.steiner.value <= start_min);
        }
    }

    #[test]
    fn steiner_shifts_with_the_anchors(
        rows in anchor_rows(2, 3..=15, 10.0),
        t in prop::collection::vec(-50.0..50.0f64, 2),
        seed in any::<u64>(),
    ) {
        let spec = PotentialSpec::euclidean();
        let base_box = DomainBox::around(&anchors(rows.clone()));
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] + t[0], r[1] + t[1]]).collect();
        let a = solve(&rows, &spec, &TestingPlan::new(Plan::UniformRandom, 8, seed).with_box(base_box.clone()));
        let b = solve(&moved, &spec, &TestingPlan::new(Plan::UniformRandom, 8, seed).with_box(shifted_box(&base_box, &t, 1.0)));
        let expected: Vec<f64> = a.steiner.location.coords().iter().zip(&t).map(|(x, t)| x + t).collect();
        prop_assert!(max_diff(&expected, b.steiner.location.coords()) <= 10.0 * GRAD_TOL);
    }

    #[test]
    fn steiner_rotates_with_the_anchors(
        rows in anchor_rows(3, 3..=15, 10.0),
        q in rotation(3),
        seed in any::<u64>(),
    ) {
        let spec = PotentialSpec::euclidean();
        let set = anchors(rows.clone());
        let points = generate_testing_points(&TestingPlan::new(Plan::UniformRandom, 8, seed), &set).unwrap();
        let turned_points: Vec<Point> = points.iter().map(|p| pt(&apply(&q, p.coords()))).collect();
        let turned_rows: Vec<Vec<f64>> = rows.iter().map(|r| apply(&q, r)).collect();
        let opts = SolveOptions { cluster_radius: Some(1e-4 * DomainBox::around(&set).diagonal()), ..Default::default() };
        // same smoothing on both sides; the bounding box itself is not rotation invariant
        let spec = spec.with_epsilon(1e-9 * DomainBox::around(&set).diagonal());
        let a = enumerate_from_points(&Objective::new(set, &spec).unwrap(), &points, &cfg(), &opts).unwrap();
        let b = enumerate_from_points(&Objective::new(anchors(turned_rows), &spec).unwrap(), &turned_points, &cfg(), &opts).unwrap();
        let expected = apply(&q, a.steiner.location.coords());
        prop_assert!(max_diff(&expected, b.steiner.location.coords()) <= 10.0 * GRAD_TOL);
    }

    #[test]
    fn steiner_scales_with_the_anchors(rows in anchor_rows(2, 3..=15, 10.0), s in 0.1..10.0f64, seed in any::<u64>()) {
        let base_box = DomainBox::around(&anchors(rows.clone()));
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| s * x).collect()).collect();
        // default smoothing is proportional to the anchor spread, so it scales too
        let a = solve(&rows, &PotentialSpec::euclidean(), &TestingPlan::new(Plan::UniformRandom, 8, seed).with_box(base_box.clone()));
        let b = solve(&scaled, &PotentialSpec::euclidean(), &TestingPlan::new(Plan::UniformRandom, 8, seed).with_box(shifted_box(&base_box, &[0.0, 0.0], s)));
        let expected: Vec<f64> = a.steiner.location.coords().iter().map(|x| s * x).collect();
        prop_assert!(max_diff(&expected, b.steiner.location.coords()) <= 10.0 * GRAD_TOL * s.max(1.0));
    }

    #[test]
    fn steiner_is_no_worse_than_the_grid(rows in anchor_rows(2, 3..=15, 10.0), seed in any::<u64>()) {
        let spec = PotentialSpec::euclidean();
        let obj = Objective::new(anchors(rows.clone()), &spec).unwrap();
        let result = enumerate_critical_points(&obj, &TestingPlan::new(Plan::UniformRandom, 8, seed), &cfg(), &SolveOptions::default()).unwrap();
        let spacing = 0.05;
        let grid = grid_search(&obj, &DomainBox::around(obj.anchors()), spacing).unwrap();
        let lipschitz = obj.lipschitz_bound().unwrap();
        prop_assert!(result.steiner.value <= grid.value + lipschitz * spacing);
    }
}
