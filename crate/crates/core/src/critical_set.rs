//! Multi-start enumeration of the critical set `{x : grad U(x) = 0}`.
//!
//! One trace finds one rest point, so many testing points are flowed to rest,
//! their terminals are merged by single-linkage clustering, and the Steiner
//! point is picked by comparing the values of the surviving representatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinerError};
use crate::flow::{trace_flow, FlowConfig, FlowTrace, TraceStatus};
use crate::objective::Objective;
use crate::point::{lex_cmp, AnchorSet, DomainBox, Point};

/// Relative value tolerance under which two critical points count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Relative value tolerance under which distinct clusters flag degeneracy.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;
/// Upper bound on the number of testing points a plan may generate.
pub const MAX_TESTING_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    UniformRandom,
    AnchorsJittered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestingPlan {
    pub strategy: Strategy,
    /// Requested number of points. Grid plans round up to `m^D`; jittered
    /// plans always produce one point per anchor.
    pub count: usize,
    /// Defaults to the anchor bounding box widened by 20% per side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_box: Option<DomainBox>,
    pub seed: u64,
}

impl Default for TestingPlan {
    fn default() -> Self {
        TestingPlan {
            strategy: Strategy::UniformRandom,
            count: 16,
            domain_box: None,
            seed: 0,
        }
    }
}

impl TestingPlan {
    pub fn new(strategy: Strategy, count: usize, seed: u64) -> Self {
        TestingPlan {
            strategy,
            count,
            domain_box: None,
            seed,
        }
    }

    pub fn with_box(mut self, domain_box: DomainBox) -> Self {
        self.domain_box = Some(domain_box);
        self
    }

    /// The explicit box after validation, or the automatic one.
    pub fn resolve_box(&self, anchors: &AnchorSet) -> Result<DomainBox> {
        match &self.domain_box {
            None => Ok(DomainBox::around(anchors)),
            Some(b) if b.dim() != anchors.dim() => Err(SteinerError::config(
                "testing_plan.domain_box",
                format!("has {} axes but the anchors have dimension {}", b.dim(), anchors.dim()),
            )),
            Some(b) => match anchors.iter().position(|a| !b.contains(a)) {
                Some(i) => Err(SteinerError::config(
                    "testing_plan.domain_box",
                    format!("does not contain anchor {i}"),
                )),
                None => Ok(b.clone()),
            },
        }
    }
}

/// Smallest `m` with `m^dim >= count`, or `None` past [`MAX_TESTING_POINTS`].
fn lattice_side(count: usize, dim: usize) -> Option<usize> {
    let mut m = 1usize;
    loop {
        let total = m.checked_pow(dim as u32)?;
        if total >= count {
            return (total <= MAX_TESTING_POINTS).then_some(m);
        }
        m += 1;
    }
}

/// Deterministic testing points for `plan`, all inside its domain box.
pub fn generate_testing_points(plan: &TestingPlan, anchors: &AnchorSet) -> Result<Vec<Point>> {
    if plan.count == 0 {
        return Err(SteinerError::config("testing_plan.count", "must be at least 1"));
    }
    let dbox = plan.resolve_box(anchors)?;
    let dim = anchors.dim();
    let (lo, hi) = (dbox.lo(), dbox.hi());
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);

    let points = match plan.strategy {
        Strategy::Grid => {
            let m = lattice_side(plan.count, dim).ok_or_else(|| {
                SteinerError::config(
                    "testing_plan.count",
                    format!("grid lattice would exceed {MAX_TESTING_POINTS} points in dimension {dim}"),
                )
            })?;
            let total = m.pow(dim as u32);
            let coord = |k: usize, j: usize| {
                if m == 1 {
                    0.5 * (lo[k] + hi[k])
                } else if j == m - 1 {
                    hi[k]
                } else {
                    lo[k] + (hi[k] - lo[k]) * (j as f64 / (m - 1) as f64)
                }
            };
            (0..total)
                .map(|mut idx| {
                    // first axis varies slowest
                    let mut c = vec![0.0; dim];
                    for k in (0..dim).rev() {
                        c[k] = coord(k, idx % m);
                        idx /= m;
                    }
                    Point::from_vec_unchecked(c)
                })
                .collect()
        }
        Strategy::UniformRandom => {
            if plan.count > MAX_TESTING_POINTS {
                return Err(SteinerError::config(
                    "testing_plan.count",
                    format!("exceeds {MAX_TESTING_POINTS}"),
                ));
            }
            (0..plan.count)
                .map(|_| {
                    let mut c: Vec<f64> = (0..dim).map(|k| lo[k] + rng.gen::<f64>() * (hi[k] - lo[k])).collect();
                    dbox.clamp(&mut c);
                    Point::from_vec_unchecked(c)
                })
                .collect()
        }
        Strategy::AnchorsJittered => {
            let radius = 0.01 * dbox.diagonal();
            let per_axis = radius / (dim as f64).sqrt();
            anchors
                .iter()
                .map(|a| {
                    let mut c: Vec<f64> = a
                        .iter()
                        .map(|x| x + per_axis * (2.0 * rng.gen::<f64>() - 1.0))
                        .collect();
                    dbox.clamp(&mut c);
                    Point::from_vec_unchecked(c)
                })
                .collect()
        }
    };
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Point,
    pub value: f64,
    pub grad_norm: f64,
    /// Number of testing points whose traces came to rest in this cluster.
    pub basin_count: usize,
    /// Smallest second difference quotient over the probe directions.
    pub min_curvature: f64,
    /// Set when some probe direction curves downward: a saddle or maximum.
    pub negative_curvature: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub testing_points: usize,
    pub converged: usize,
    pub stalled: usize,
    pub max_steps: usize,
    /// Traces aborted by a numerical failure.
    pub failed: usize,
    pub clusters: usize,
    /// Gradient evaluations that used the zero subgradient at an unsmoothed kink.
    pub kinks: usize,
    /// Two distinct clusters have values within `DEGENERACY_TOLERANCE` relative.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteinerResult {
    pub steiner: CriticalPoint,
    /// Ordered by value, ties by coordinates.
    pub critical_set: Vec<CriticalPoint>,
    /// One trace per testing point, in testing-point order, when requested.
    pub traces_kept: Option<Vec<FlowTrace>>,
    pub diagnostics: Diagnostics,
    pub cluster_radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveOptions {
    /// Single-linkage threshold. Defaults to `1e-4 *` the domain box diagonal.
    pub cluster_radius: Option<f64>,
    pub keep_traces: bool,
}

/// Runs the full pipeline: generate testing points, trace each to rest,
/// cluster, polish and select.
pub fn enumerate_critical_points(
    obj: &Objective,
    plan: &TestingPlan,
    cfg: &FlowConfig,
    opts: &SolveOptions,
) -> Result<SteinerResult> {
    let dbox = plan.resolve_box(obj.anchors())?;
    let points = generate_testing_points(plan, obj.anchors())?;
    let opts = SolveOptions {
        cluster_radius: Some(opts.cluster_radius.unwrap_or(1e-4 * dbox.diagonal())),
        ..opts.clone()
    };
    enumerate_from_points(obj, &points, cfg, &opts)
}

/// Like [`enumerate_critical_points`] with caller-supplied testing points.
/// Without an explicit radius, the automatic domain box sets the default.
pub fn enumerate_from_points(
    obj: &Objective,
    points: &[Point],
    cfg: &FlowConfig,
    opts: &SolveOptions,
) -> Result<SteinerResult> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(SteinerError::InvalidInput("no testing points".into()));
    }
    let radius = opts
        .cluster_radius
        .unwrap_or_else(|| 1e-4 * DomainBox::around(obj.anchors()).diagonal());
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(SteinerError::config(
            "cluster_radius",
            format!("must be a finite positive number (got {radius})"),
        ));
    }

    // Order of execution is irrelevant: collect keeps testing-point order.
    let outcomes: Vec<Result<FlowTrace>> = points.par_iter().map(|p| trace_flow(obj, p, cfg)).collect();

    let mut diagnostics = Diagnostics {
        testing_points: points.len(),
        ..Default::default()
    };
    let mut traces = Vec::with_capacity(points.len());
    let mut terminals = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(trace) => {
                diagnostics.kinks += trace.kinks;
                match trace.status {
                    TraceStatus::Converged => {
                        diagnostics.converged += 1;
                        let last = trace.last();
                        terminals.push((last.point.clone(), last.value));
                    }
                    TraceStatus::Stalled => diagnostics.stalled += 1,
                    TraceStatus::MaxSteps => diagnostics.max_steps += 1,
                }
                traces.push(trace);
            }
            Err(SteinerError::NumericalFailure { partial, .. }) => {
                diagnostics.failed += 1;
                traces.push(*partial);
            }
            Err(other) => return Err(other),
        }
    }
    if terminals.is_empty() {
        return Err(SteinerError::NoCriticalPoint { diagnostics });
    }

    terminals.sort_by(|a, b| a.0.lex_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let clusters = single_linkage(terminals.iter().map(|t| &t.0).collect::<Vec<_>>().as_slice(), radius);

    let polish_cfg = FlowConfig {
        grad_tol: cfg.grad_tol / 10.0,
        ..cfg.clone()
    };
    let polished: Vec<(Point, f64, f64, usize)> = clusters
        .par_iter()
        .map(|members| {
            // lowest value; members are in lexicographic order so ties resolve to the first
            let &best = members
                .iter()
                .min_by(|&&a, &&b| terminals[a].1.total_cmp(&terminals[b].1))
                .expect("clusters are non-empty");
            let (start, start_value) = &terminals[best];
            let polished = trace_flow(obj, start, &polish_cfg)
                .ok()
                .map(|t| t.last().clone())
                .filter(|s| s.grad_norm <= cfg.grad_tol);
            match polished {
                Some(s) => (s.point, s.value, s.grad_norm, members.len()),
                None => {
                    let g = obj.gradient(start).map(|g| g.norm()).unwrap_or(f64::INFINITY);
                    (start.clone(), *start_value, g, members.len())
                }
            }
        })
        .collect();

    // Polishing moves representatives slightly; merge any that drifted together.
    let mut order: Vec<usize> = (0..polished.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(polished[a].0.coords(), polished[b].0.coords()));
    let reps: Vec<&Point> = order.iter().map(|&i| &polished[i].0).collect();
    let merged: Vec<(Point, f64, f64, usize)> = single_linkage(&reps, radius)
        .into_iter()
        .map(|group| {
            let members: Vec<&(Point, f64, f64, usize)> = group.iter().map(|&g| &polished[order[g]]).collect();
            let best = members
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.lex_cmp(&b.0)))
                .expect("non-empty");
            let count = members.iter().map(|m| m.3).sum();
            (best.0.clone(), best.1, best.2, count)
        })
        .collect();

    let probe_step = 1e-3 * DomainBox::around(obj.anchors()).diagonal().max(radius);
    let mut critical_set: Vec<CriticalPoint> = merged
        .into_iter()
        .map(|(location, value, grad_norm, basin_count)| {
            let min_curvature = curvature_probe(obj, &location, probe_step);
            let noise = 64.0 * f64::EPSILON * value.abs().max(f64::MIN_POSITIVE) / (probe_step * probe_step);
            CriticalPoint {
                location,
                value,
                grad_norm,
                basin_count,
                min_curvature,
                negative_curvature: min_curvature < -noise,
            }
        })
        .collect();
    critical_set.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.location.lex_cmp(&b.location)));

    diagnostics.clusters = critical_set.len();
    diagnostics.degenerate = critical_set.iter().enumerate().any(|(i, a)| {
        critical_set[i + 1..]
            .iter()
            .any(|b| (a.value - b.value).abs() <= DEGENERACY_TOLERANCE * a.value.abs().max(b.value.abs()))
    });

    let steiner = select_steiner(&critical_set)?;
    Ok(SteinerResult {
        steiner,
        critical_set,
        traces_kept: opts.keep_traces.then_some(traces),
        diagnostics,
        cluster_radius: radius,
    })
}

/// Minimal-value element; values within `TIE_TOLERANCE` relative of the
/// minimum are tied and resolved by lexicographic coordinate order.
pub fn select_steiner(critical_set: &[CriticalPoint]) -> Result<CriticalPoint> {
    let min = critical_set
        .iter()
        .map(|c| c.value)
        .min_by(f64::total_cmp)
        .ok_or_else(|| SteinerError::InvalidInput("cannot select from an empty critical set".into()))?;
    let tied = |v: f64| v - min <= TIE_TOLERANCE * v.abs().max(min.abs());
    Ok(critical_set
        .iter()
        .filter(|c| tied(c.value))
        .min_by(|a, b| a.location.lex_cmp(&b.location))
        .expect("the minimum itself is tied")
        .clone())
}

/// Clusters of indices into `points` under single linkage with `distance <= radius`.
/// Each cluster lists its members in ascending index order; clusters are
/// ordered by their first member.
fn single_linkage(points: &[&Point], radius: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if points[i].distance(points[j]) <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Minimum of `(U(x + h d) - 2 U(x) + U(x - h d)) / h^2` over the coordinate
/// axes and `D` fixed pseudo-random unit directions.
fn curvature_probe(obj: &Objective, x: &Point, h: f64) -> f64 {
    let dim = obj.dim();
    let center = obj.value_at(x.coords());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c0de);
    let mut directions: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            e
        })
        .collect();
    if dim > 1 {
        for _ in 0..dim {
            let d: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            let n = crate::point::norm(&d);
            if n > 0.0 {
                directions.push(d.iter().map(|c| c / n).collect());
            }
        }
    }
    directions
        .iter()
        .map(|d| {
            let plus: Vec<f64> = x.coords().iter().zip(d).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = x.coords().iter().zip(d).map(|(a, b)| a - h * b).collect();
            (obj.value_at(&plus) - 2.0 * center + obj.value_at(&minus)) / (h * h)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialSpec;

    fn anchors(rows: &[&[f64]]) -> AnchorSet {
        AnchorSet::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn cp(c: &[f64], value: f64) -> CriticalPoint {
        CriticalPoint {
            location: pt(c),
            value,
            grad_norm: 0.0,
            basin_count: 1,
            min_curvature: 1.0,
            negative_curvature: false,
        }
    }

    #[test]
    fn grid_of_nine_on_the_unit_square() {
        let a = anchors(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let plan =
            TestingPlan::new(Strategy::Grid, 9, 0).with_box(DomainBox::new(vec![[0.0, 1.0], [0.0, 1.0]]).unwrap());
        let pts = generate_testing_points(&plan, &a).unwrap();
        let mut expected = Vec::new();
        for x in [0.0, 0.5, 1.0] {
            for y in [0.0, 0.5, 1.0] {
                expected.push(pt(&[x, y]));
            }
        }
        assert_eq!(pts, expected);
    }

    #[test]
    fn grid_rounds_up_to_a_full_lattice() {
        let a = anchors(&[&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]]);
        let pts = generate_testing_points(&TestingPlan::new(Strategy::Grid, 9, 0), &a).unwrap();
        assert_eq!(pts.len(), 27);
        let one = generate_testing_points(&TestingPlan::new(Strategy::Grid, 1, 0), &a).unwrap();
        assert_eq!(one, vec![pt(&[0.5, 0.5, 0.5])]);
    }

    #[test]
    fn random_plan_is_deterministic_and_inside_the_box() {
        let a = anchors(&[&[0.0, 0.0], &[4.0, 3.0]]);
        let plan = TestingPlan::new(Strategy::UniformRandom, 5, 42);
        let first = generate_testing_points(&plan, &a).unwrap();
        let second = generate_testing_points(&plan, &a).unwrap();
        assert_eq!(first.len(), 5);
        assert_eq!(first, second);
        let other = generate_testing_points(
            &TestingPlan {
                seed: 43,
                ..plan.clone()
            },
            &a,
        )
        .unwrap();
        assert_ne!(first, other);
        let b = plan.resolve_box(&a).unwrap();
        assert!(first.iter().all(|p| b.contains(p.coords())));
    }

    #[test]
    fn jittered_plan_stays_near_each_anchor() {
        let a = anchors(&[&[0.0, 0.0], &[4.0, 0.0], &[0.0, 3.0]]);
        let plan = TestingPlan::new(Strategy::AnchorsJittered, 1, 7);
        let pts = generate_testing_points(&plan, &a).unwrap();
        assert_eq!(pts.len(), 3);
        let diag = plan.resolve_box(&a).unwrap().diagonal();
        for (p, anchor) in pts.iter().zip(a.to_points()) {
            assert!(p.distance(&anchor) <= 0.01 * diag);
        }
    }

    #[test]
    fn plan_validation() {
        let a = anchors(&[&[0.0, 0.0], &[4.0, 3.0]]);
        let bad_box = TestingPlan::default().with_box(DomainBox::new(vec![[0.0, 1.0], [0.0, 1.0]]).unwrap());
        assert!(generate_testing_points(&bad_box, &a).is_err());
        let zero = TestingPlan {
            count: 0,
            ..Default::default()
        };
        assert!(generate_testing_points(&zero, &a).is_err());
        let huge = anchors(&[&[0.0; 30], &[1.0; 30]]);
        assert!(generate_testing_points(&TestingPlan::new(Strategy::Grid, 3, 0), &huge).is_err());
    }

    #[test]
    fn select_steiner_examples() {
        let s = select_steiner(&[cp(&[0.0, 0.0], 1.0), cp(&[5.0, 5.0], 2.0)]).unwrap();
        assert_eq!(s.location, pt(&[0.0, 0.0]));
        let only = select_steiner(&[cp(&[3.0], 9.0)]).unwrap();
        assert_eq!(only.location, pt(&[3.0]));
        let tie = select_steiner(&[cp(&[1.0, 0.0], 4.0), cp(&[0.0, 1.0], 4.0)]).unwrap();
        assert_eq!(tie.location, pt(&[0.0, 1.0]));
        assert!(select_steiner(&[]).is_err());
    }

    #[test]
    fn squared_potential_has_a_single_critical_point() {
        let obj = Objective::new(
            anchors(&[&[0.0, 0.0], &[2.0, 0.0], &[1.0, 3.0]]),
            &PotentialSpec::squared(),
        )
        .unwrap();
        let res = enumerate_critical_points(
            &obj,
            &TestingPlan::new(Strategy::UniformRandom, 12, 3),
            &FlowConfig::default(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(res.critical_set.len(), 1);
        assert_eq!(res.steiner.basin_count, 12);
        assert!(res.steiner.location.distance(&pt(&[1.0, 1.0])) < 1e-8);
        assert!(!res.steiner.negative_curvature);
    }

    #[test]
    fn symmetric_start_finds_a_saddle() {
        // Two gaussian wells; the midpoint is a saddle and is a rest point by symmetry.
        let obj = Objective::new(anchors(&[&[0.0, 0.0], &[2.0, 0.0]]), &PotentialSpec::gaussian_well(1.0)).unwrap();
        let pts = vec![pt(&[1.0, 0.5]), pt(&[-0.5, 0.2]), pt(&[2.5, -0.1])];
        let res = enumerate_from_points(&obj, &pts, &FlowConfig::default(), &SolveOptions::default()).unwrap();
        let saddle = res
            .critical_set
            .iter()
            .find(|c| c.location.distance(&pt(&[1.0, 0.0])) < 1e-4)
            .expect("saddle reached from the symmetric start");
        assert!(saddle.negative_curvature);
        assert!(res.critical_set.len() >= 3);
        assert!(!res.steiner.negative_curvature);
        assert!(res.steiner.value < saddle.value);
    }

    #[test]
    fn no_converged_trace_is_an_error() {
        let obj = Objective::new(
            anchors(&[&[0.0, 0.0], &[4.0, 0.0], &[0.0, 3.0]]),
            &PotentialSpec::euclidean(),
        )
        .unwrap();
        let cfg = FlowConfig {
            max_steps: 1,
            grad_tol: 1e-12,
            ..Default::default()
        };
        let err = enumerate_from_points(&obj, &[pt(&[9.0, 9.0])], &cfg, &SolveOptions::default()).unwrap_err();
        match err {
            SteinerError::NoCriticalPoint { diagnostics } => {
                assert_eq!(diagnostics.testing_points, 1);
                assert_eq!(diagnostics.max_steps, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_linkage_chains_neighbors() {
        let p = [pt(&[0.0]), pt(&[0.9]), pt(&[1.8]), pt(&[5.0])];
        let refs: Vec<&Point> = p.iter().collect();
        assert_eq!(single_linkage(&refs, 1.0), vec![vec![0, 1, 2], vec![3]]);
    }
}
