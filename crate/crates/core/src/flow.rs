//! Quasi-static descent from a testing point to a rest point.
//!
//! A particle dragged by a strong dissipative force moves along the
//! conservative force `-grad U` without inertia, so its path is a gradient-flow
//! line. [`trace_flow`] realizes that path as first-order descent with a
//! backtracking Armijo step; [`tangency_residual`] and [`graph_residual`]
//! check a traced curve against the two characterizations of a flow line
//! (tangent parallel to the force, and the D-1 integral relations obtained by
//! parameterizing the curve with one coordinate).

use std::io::{self, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SteinerError};
use crate::fmt::g17;
use crate::objective::Objective;
use crate::point::{norm, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Rest criterion: the trace converges once `|grad U| <= grad_tol`.
    pub grad_tol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    /// The line search gives up (status `stalled`) below this step size.
    pub min_step: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            grad_tol: 1e-6,
            max_steps: 10_000,
            initial_step: 1.0,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            min_step: 1e-16,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SteinerError::config(
                    format!("flow.{field}"),
                    format!("must be a finite positive number (got {v})"),
                ))
            }
        };
        let unit = |field: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(SteinerError::config(
                    format!("flow.{field}"),
                    format!("must lie strictly between 0 and 1 (got {v})"),
                ))
            }
        };
        positive("grad_tol", self.grad_tol)?;
        positive("initial_step", self.initial_step)?;
        positive("min_step", self.min_step)?;
        unit("armijo_c", self.armijo_c)?;
        unit("backtrack_factor", self.backtrack_factor)?;
        if self.max_steps == 0 {
            return Err(SteinerError::config("flow.max_steps", "must be at least 1"));
        }
        if self.min_step >= self.initial_step {
            return Err(SteinerError::config(
                "flow.min_step",
                format!(
                    "must be smaller than initial_step ({} >= {})",
                    self.min_step, self.initial_step
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Converged,
    MaxSteps,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub point: Point,
    pub value: f64,
    pub grad_norm: f64,
    /// Step size `t` that produced this sample (0 for the first sample).
    pub step_len: f64,
    /// Displacement `-t grad U(x_prev)` issued by the stepper. `None` for the
    /// first sample and for externally built traces.
    pub step: Option<Point>,
    /// `U(point) - U(previous point)` computed term by term, which stays
    /// accurate once consecutive values agree in every digit of `value`.
    /// `None` for the first sample and for externally built traces.
    pub change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub samples: Vec<FlowSample>,
    pub status: TraceStatus,
    /// Number of gradient evaluations that hit an unsmoothed kink.
    pub kinks: usize,
}

impl FlowTrace {
    /// Builds a trace from bare points, evaluating value and gradient norm at each.
    pub fn from_points(obj: &Objective, points: Vec<Point>, status: TraceStatus) -> Result<Self> {
        let mut grad = vec![0.0; obj.dim()];
        let mut samples = Vec::with_capacity(points.len());
        let mut kinks = 0;
        for point in points {
            if point.dim() != obj.dim() {
                return Err(SteinerError::DimensionMismatch {
                    expected: obj.dim(),
                    found: point.dim(),
                });
            }
            let (value, k) = obj.value_and_gradient_at(point.coords(), &mut grad);
            kinks += k;
            samples.push(FlowSample {
                point,
                value,
                grad_norm: norm(&grad),
                step_len: 0.0,
                step: None,
                change: None,
            });
        }
        Ok(FlowTrace { samples, status, kinks })
    }

    pub fn start(&self) -> &FlowSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("a trace has at least one sample")
    }

    pub fn is_converged(&self) -> bool {
        self.status == TraceStatus::Converged
    }

    /// Whether `U` strictly decreases from each sample to the next, judged by
    /// the accurate `change` where recorded and by `value` otherwise.
    pub fn is_strictly_decreasing(&self) -> bool {
        self.samples
            .windows(2)
            .all(|w| w[1].change.map_or(w[1].value < w[0].value, |c| c < 0.0))
    }

    /// Largest distance between consecutive sample points.
    pub fn max_spacing(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].point.distance(&w[1].point))
            .fold(0.0, f64::max)
    }

    /// Writes `step,Z_1,...,Z_D,U,grad_norm,step_len` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dim = self.start().point.dim();
        let mut header = String::from("step");
        for k in 1..=dim {
            header.push_str(&format!(",Z_{k}"));
        }
        header.push_str(",U,grad_norm,step_len");
        writeln!(out, "{header}")?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut row = i.to_string();
            for c in s.point.coords() {
                row.push(',');
                row.push_str(&g17(*c));
            }
            for v in [s.value, s.grad_norm, s.step_len] {
                row.push(',');
                row.push_str(&g17(v));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

fn numerical_failure(reason: impl Into<String>, samples: Vec<FlowSample>, kinks: usize) -> SteinerError {
    SteinerError::NumericalFailure {
        reason: reason.into(),
        partial: Box::new(FlowTrace {
            samples,
            status: TraceStatus::Stalled,
            kinks,
        }),
    }
}

/// Descends from `start` along `-grad U` until the particle comes to rest.
///
/// Each iteration moves to `x - t grad U(x)`. The first trial `t` is
/// `initial_step`, later ones the Barzilai-Borwein estimate `s.s / s.y` from
/// the previous step, or four times the previous `t` where the curvature
/// along that step was not positive; `t` then shrinks by `backtrack_factor` until the Armijo
/// condition holds with a strict decrease of `U`. The decrease is measured
/// with [`Objective::value_change`], so descent continues below the
/// resolution of `U` itself. Every accepted iterate is recorded.
pub fn trace_flow(obj: &Objective, start: &Point, cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    if start.dim() != obj.dim() {
        return Err(SteinerError::DimensionMismatch {
            expected: obj.dim(),
            found: start.dim(),
        });
    }
    let dim = obj.dim();
    let mut x = start.coords().to_vec();
    let mut grad = vec![0.0; dim];
    let mut next_grad = vec![0.0; dim];
    let mut candidate = vec![0.0; dim];

    let (mut value, mut kinks) = obj.value_and_gradient_at(&x, &mut grad);
    let mut grad_norm = norm(&grad);
    let mut samples = vec![FlowSample {
        point: start.clone(),
        value,
        grad_norm,
        step_len: 0.0,
        step: None,
        change: None,
    }];
    if !value.is_finite() || !grad_norm.is_finite() {
        return Err(numerical_failure(
            "non-finite potential at the testing point",
            samples,
            kinks,
        ));
    }

    let max_trial = cfg.initial_step * 1e6;
    let mut trial_step = cfg.initial_step;
    let mut steps = 0;
    let status = loop {
        if grad_norm <= cfg.grad_tol {
            break TraceStatus::Converged;
        }
        if steps == cfg.max_steps {
            break TraceStatus::MaxSteps;
        }

        let slope = grad_norm * grad_norm;
        let mut t = trial_step;
        let accepted = loop {
            for ((c, xi), gi) in candidate.iter_mut().zip(&x).zip(&grad) {
                *c = xi - t * gi;
            }
            let change = obj.change_between(&x, &candidate);
            if change.is_nan() {
                return Err(numerical_failure(
                    "potential evaluated to NaN during line search",
                    samples,
                    kinks,
                ));
            }
            if change < 0.0 && change <= -cfg.armijo_c * t * slope {
                break Some((t, change));
            }
            t *= cfg.backtrack_factor;
            if t < cfg.min_step {
                break None;
            }
        };
        let Some((t, change)) = accepted else {
            break TraceStatus::Stalled;
        };

        let (v, k) = obj.value_and_gradient_at(&candidate, &mut next_grad);
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..dim {
            let si = candidate[i] - x[i];
            ss += si * si;
            sy += si * (next_grad[i] - grad[i]);
        }
        trial_step = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(cfg.min_step, max_trial)
        } else {
            // no positive curvature along the step: extrapolate instead
            (4.0 * t).clamp(cfg.initial_step, max_trial)
        };

        let step: Vec<f64> = grad.iter().map(|g| -t * g).collect();
        std::mem::swap(&mut x, &mut candidate);
        std::mem::swap(&mut grad, &mut next_grad);
        value = v;
        kinks += k;
        grad_norm = norm(&grad);
        steps += 1;

        if !value.is_finite() || !grad_norm.is_finite() || x.iter().any(|c| !c.is_finite()) {
            return Err(numerical_failure(
                "non-finite potential or gradient along the trace",
                samples,
                kinks,
            ));
        }
        samples.push(FlowSample {
            point: Point::from_vec_unchecked(x.clone()),
            value,
            grad_norm,
            step_len: t,
            step: Some(Point::from_vec_unchecked(step)),
            change: Some(change),
        });
    };

    Ok(FlowTrace { samples, status, kinks })
}

/// Largest `sin` of the angle between a step and the force `-grad U` at its
/// start point. Uses the recorded step when present, the point difference
/// otherwise. Zero-length steps and points with vanishing gradient are
/// skipped; a step pointing uphill counts as 1.
pub fn tangency_residual(obj: &Objective, trace: &FlowTrace) -> f64 {
    let mut grad = vec![0.0; obj.dim()];
    let mut worst: f64 = 0.0;
    for pair in trace.samples.windows(2) {
        let step: Vec<f64> = match &pair[1].step {
            Some(s) => s.coords().to_vec(),
            None => pair[1]
                .point
                .coords()
                .iter()
                .zip(pair[0].point.coords())
                .map(|(b, a)| b - a)
                .collect(),
        };
        let step_norm = norm(&step);
        obj.value_and_gradient_at(pair[0].point.coords(), &mut grad);
        let grad_norm = norm(&grad);
        if step_norm == 0.0 || grad_norm == 0.0 {
            continue;
        }
        let u: Vec<f64> = step.iter().map(|s| s / step_norm).collect();
        let w: Vec<f64> = grad.iter().map(|g| -g / grad_norm).collect();
        let cos: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        let sin = if cos < 0.0 {
            1.0
        } else {
            // |u - (u.w) w| is accurate for small angles, unlike sqrt(1 - cos^2).
            u.iter()
                .zip(&w)
                .map(|(a, b)| (a - cos * b).powi(2))
                .sum::<f64>()
                .sqrt()
                .min(1.0)
        };
        worst = worst.max(sin);
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphResidual {
    /// Absolute residual for every coordinate except the parameter axis (in
    /// coordinate order), over the sample range `segment`.
    Residuals { values: Vec<f64>, segment: Range<usize> },
    /// No run of at least two samples is strictly monotone in the axis
    /// coordinate with `|dU/dZ_axis| >= slope_floor`.
    NotApplicable,
}

impl GraphResidual {
    pub fn values(&self) -> Option<&[f64]> {
        match self {
            GraphResidual::Residuals { values, .. } => Some(values),
            GraphResidual::NotApplicable => None,
        }
    }

    pub fn max(&self) -> Option<f64> {
        self.values().map(|v| v.iter().copied().fold(0.0, f64::max))
    }
}

/// Checks the curve against `Z_i(end) - Z_i(start) = integral of
/// (dU/dZ_i)/(dU/dZ_axis) dZ_axis` for every `i != axis`, using the trapezoid
/// rule over the samples of the longest qualifying segment.
///
/// `axis` is 0-based. A `slope_floor` of `None` uses `1e-6 * max |dU/dZ_axis|`
/// along the trace.
pub fn graph_residual(
    obj: &Objective,
    trace: &FlowTrace,
    axis: usize,
    slope_floor: Option<f64>,
) -> Result<GraphResidual> {
    let dim = obj.dim();
    if axis >= dim {
        return Err(SteinerError::InvalidInput(format!(
            "axis {axis} out of range for dimension {dim}"
        )));
    }
    let n = trace.samples.len();
    if dim == 1 {
        return Ok(GraphResidual::Residuals {
            values: Vec::new(),
            segment: 0..n,
        });
    }

    let mut grads = Vec::with_capacity(n);
    let mut g = vec![0.0; dim];
    for s in &trace.samples {
        obj.value_and_gradient_at(s.point.coords(), &mut g);
        grads.push(g.clone());
    }
    let max_slope = grads.iter().map(|g| g[axis].abs()).fold(0.0, f64::max);
    let floor = slope_floor.unwrap_or(1e-6 * max_slope);
    if max_slope == 0.0 || n < 2 {
        return Ok(GraphResidual::NotApplicable);
    }

    let z = |k: usize| trace.samples[k].point[axis];
    let ok = |k: usize| grads[k][axis].abs() >= floor && grads[k][axis] != 0.0;
    let direction = |k: usize| (z(k + 1) - z(k)).partial_cmp(&0.0).unwrap_or(std::cmp::Ordering::Equal);

    let mut best: Option<Range<usize>> = None;
    let mut start = 0;
    while start + 1 < n {
        if !ok(start) || !ok(start + 1) || direction(start).is_eq() {
            start += 1;
            continue;
        }
        let dir = direction(start);
        let mut end = start + 1;
        while end + 1 < n && ok(end + 1) && direction(end) == dir {
            end += 1;
        }
        if best.as_ref().is_none_or(|b| end + 1 - start > b.len()) {
            best = Some(start..end + 1);
        }
        start = end;
    }
    let Some(segment) = best else {
        return Ok(GraphResidual::NotApplicable);
    };

    let values = (0..dim)
        .filter(|&i| i != axis)
        .map(|i| {
            let mut integral = 0.0;
            for k in segment.start..segment.end - 1 {
                let r0 = grads[k][i] / grads[k][axis];
                let r1 = grads[k + 1][i] / grads[k + 1][axis];
                integral += 0.5 * (r0 + r1) * (z(k + 1) - z(k));
            }
            let first = &trace.samples[segment.start].point;
            let last = &trace.samples[segment.end - 1].point;
            (last[i] - first[i] - integral).abs()
        })
        .collect();
    Ok(GraphResidual::Residuals { values, segment })
}

/// Samples the exact flow line through `start` at uniform arc-length spacing.
///
/// Integrates `dx/ds = -grad U / |grad U|` with classical fourth-order
/// Runge-Kutta over total arc length `length`, using `round(length / spacing)`
/// equal steps. Stops early with `converged` if the gradient vanishes, or
/// `stalled` if a step fails to decrease `U` (overshooting a rest point);
/// otherwise the status is `max_steps`.
pub fn sample_flow_line(obj: &Objective, start: &Point, spacing: f64, length: f64) -> Result<FlowTrace> {
    if start.dim() != obj.dim() {
        return Err(SteinerError::DimensionMismatch {
            expected: obj.dim(),
            found: start.dim(),
        });
    }
    if !(spacing > 0.0 && length > 0.0 && spacing.is_finite() && length.is_finite()) {
        return Err(SteinerError::InvalidInput(
            "spacing and length must be finite and positive".into(),
        ));
    }
    let steps = ((length / spacing).round() as usize).max(1);
    let h = length / steps as f64;
    let dim = obj.dim();
    let mut g = vec![0.0; dim];

    // Unit force direction; None where the gradient vanishes.
    let mut scratch = vec![0.0; dim];
    let mut direction = move |x: &[f64], out: &mut Vec<f64>| -> Option<()> {
        obj.value_and_gradient_at(x, &mut scratch);
        let gn = norm(&scratch);
        if gn == 0.0 || !gn.is_finite() {
            return None;
        }
        out.clear();
        out.extend(scratch.iter().map(|gi| -gi / gn));
        Some(())
    };

    let mut trace = FlowTrace::from_points(obj, vec![start.clone()], TraceStatus::MaxSteps)?;
    let mut x = start.coords().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let stage = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + c * b).collect() };

    for _ in 0..steps {
        let advanced = direction(&x, &mut k1)
            .and_then(|_| direction(&stage(&x, &k1, 0.5 * h), &mut k2))
            .and_then(|_| direction(&stage(&x, &k2, 0.5 * h), &mut k3))
            .and_then(|_| direction(&stage(&x, &k3, h), &mut k4));
        if advanced.is_none() {
            trace.status = TraceStatus::Converged;
            break;
        }
        let next: Vec<f64> = (0..dim)
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let (value, kinks) = obj.value_and_gradient_at(&next, &mut g);
        if !value.is_finite() {
            return Err(numerical_failure(
                "non-finite potential on the flow line",
                trace.samples,
                trace.kinks,
            ));
        }
        let change = obj.change_between(&x, &next);
        if change >= 0.0 {
            trace.status = TraceStatus::Stalled;
            break;
        }
        trace.kinks += kinks;
        trace.samples.push(FlowSample {
            point: Point::from_vec_unchecked(next.clone()),
            value,
            grad_norm: norm(&g),
            step_len: h,
            step: None,
            change: Some(change),
        });
        x = next;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::AnchorSet;
    use crate::potentials::PotentialSpec;

    fn objective(rows: &[&[f64]], spec: PotentialSpec) -> Objective {
        Objective::new(
            AnchorSet::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap(),
            &spec,
        )
        .unwrap()
    }

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        let bad = [
            FlowConfig {
                grad_tol: 0.0,
                ..Default::default()
            },
            FlowConfig {
                max_steps: 0,
                ..Default::default()
            },
            FlowConfig {
                armijo_c: 1.0,
                ..Default::default()
            },
            FlowConfig {
                backtrack_factor: 0.0,
                ..Default::default()
            },
            FlowConfig {
                min_step: 2.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(cfg.validate(), Err(SteinerError::InvalidConfig { .. })),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn squared_potential_flows_to_the_centroid() {
        let obj = objective(&[&[0.0, 0.0], &[2.0, 0.0], &[1.0, 3.0]], PotentialSpec::squared());
        let cfg = FlowConfig::default();
        let trace = trace_flow(&obj, &pt(&[10.0, 10.0]), &cfg).unwrap();
        assert_eq!(trace.status, TraceStatus::Converged);
        let end = &trace.last().point;
        // |grad| = 2n |x - c| <= grad_tol
        assert!(end.distance(&pt(&[1.0, 1.0])) <= cfg.grad_tol / 6.0 + 1e-15);
        assert_eq!(trace.start().point, pt(&[10.0, 10.0]));
    }

    #[test]
    fn equilateral_triangle_flows_to_its_center() {
        let h = 3f64.sqrt() / 2.0;
        let obj = objective(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, h]], PotentialSpec::euclidean());
        let cfg = FlowConfig {
            grad_tol: 1e-9,
            ..Default::default()
        };
        let trace = trace_flow(&obj, &pt(&[5.0, 5.0]), &cfg).unwrap();
        assert_eq!(trace.status, TraceStatus::Converged);
        assert!(trace.last().point.distance(&pt(&[0.5, 3f64.sqrt() / 6.0])) < 1e-6);
    }

    #[test]
    fn values_strictly_decrease() {
        let obj = objective(&[&[0.0, 0.0], &[4.0, 0.0], &[0.0, 3.0]], PotentialSpec::euclidean());
        let trace = trace_flow(&obj, &pt(&[1.0, 1.0]), &FlowConfig::default()).unwrap();
        assert!(trace.is_strictly_decreasing());
        assert!(trace.samples.windows(2).all(|w| w[1].value <= w[0].value));
        assert!(trace.last().grad_norm <= 1e-6);
    }

    #[test]
    fn stalls_when_tolerance_is_below_resolution() {
        // A tolerance far below what f64 can resolve forces the line search to give up.
        let obj = objective(&[&[0.0, 0.0], &[4.0, 0.0], &[0.0, 3.0]], PotentialSpec::euclidean());
        let cfg = FlowConfig {
            grad_tol: 1e-300,
            ..Default::default()
        };
        let trace = trace_flow(&obj, &pt(&[1.0, 1.0]), &cfg).unwrap();
        assert_eq!(trace.status, TraceStatus::Stalled);
        assert!(trace.is_strictly_decreasing());
        assert!(trace.last().grad_norm < 1e-12, "{}", trace.last().grad_norm);
    }

    #[test]
    fn max_steps_is_honored() {
        let obj = objective(&[&[0.0, 0.0], &[4.0, 0.0], &[0.0, 3.0]], PotentialSpec::euclidean());
        let cfg = FlowConfig {
            max_steps: 3,
            grad_tol: 1e-12,
            ..Default::default()
        };
        let trace = trace_flow(&obj, &pt(&[9.0, 9.0]), &cfg).unwrap();
        assert_eq!(trace.status, TraceStatus::MaxSteps);
        assert_eq!(trace.samples.len(), 4);
    }

    #[test]
    fn non_finite_start_value_is_a_numerical_failure() {
        let obj = objective(&[&[0.0]], PotentialSpec::squared());
        let err = trace_flow(&obj, &pt(&[1e200]), &FlowConfig::default()).unwrap_err();
        match err {
            SteinerError::NumericalFailure { partial, .. } => assert_eq!(partial.samples.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tangency_of_traced_and_hand_built_curves() {
        let obj = objective(&[&[0.0, 0.0], &[3.0, 1.0], &[1.0, 2.0]], PotentialSpec::euclidean());
        let trace = trace_flow(&obj, &pt(&[6.0, -2.0]), &FlowConfig::default()).unwrap();
        assert!(tangency_residual(&obj, &trace) <= 1e-12);

        // Squared potential at (1, 0): force points along -x.
        let sq = objective(&[&[0.0, 0.0]], PotentialSpec::squared());
        let perpendicular =
            FlowTrace::from_points(&sq, vec![pt(&[1.0, 0.0]), pt(&[1.0, 1.0])], TraceStatus::MaxSteps).unwrap();
        assert!((tangency_residual(&sq, &perpendicular) - 1.0).abs() < 1e-15);

        let (s, c) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
        let thirty =
            FlowTrace::from_points(&sq, vec![pt(&[1.0, 0.0]), pt(&[1.0 - c, s])], TraceStatus::MaxSteps).unwrap();
        assert!((tangency_residual(&sq, &thirty) - 0.5).abs() < 1e-12);

        let uphill =
            FlowTrace::from_points(&sq, vec![pt(&[1.0, 0.0]), pt(&[2.0, 0.0])], TraceStatus::MaxSteps).unwrap();
        assert_eq!(tangency_residual(&sq, &uphill), 1.0);
    }

    #[test]
    fn graph_residual_on_a_straight_ray() {
        let sq = objective(&[&[0.0, 0.0]], PotentialSpec::squared());
        let cfg = FlowConfig {
            initial_step: 0.1,
            ..Default::default()
        };
        let trace = trace_flow(&sq, &pt(&[2.0, 1.0]), &cfg).unwrap();
        let res = graph_residual(&sq, &trace, 0, None).unwrap();
        assert!(res.max().unwrap() < 1e-14, "{res:?}");
    }

    #[test]
    fn graph_residual_in_one_dimension_is_empty() {
        let obj = objective(&[&[0.0], &[3.0]], PotentialSpec::squared());
        let trace = trace_flow(&obj, &pt(&[7.0]), &FlowConfig::default()).unwrap();
        let res = graph_residual(&obj, &trace, 0, None).unwrap();
        assert_eq!(res.values(), Some(&[][..]));
    }

    #[test]
    fn graph_residual_on_the_symmetry_axis() {
        // On x = 2 the horizontal pulls of (0,0) and (4,0) cancel exactly.
        let obj = objective(&[&[0.0, 0.0], &[4.0, 0.0]], PotentialSpec::euclidean());
        let g = obj.gradient(&pt(&[2.0, 3.0])).unwrap();
        assert_eq!(g[0], 0.0);

        let trace = trace_flow(&obj, &pt(&[2.0, 3.0]), &FlowConfig::default()).unwrap();
        assert!(trace.samples.iter().all(|s| s.point[0] == 2.0));
        assert_eq!(
            graph_residual(&obj, &trace, 0, None).unwrap(),
            GraphResidual::NotApplicable
        );
        let res = graph_residual(&obj, &trace, 1, None).unwrap();
        assert_eq!(res.values(), Some(&[0.0][..]));
        assert!(graph_residual(&obj, &trace, 2, None).is_err());
    }

    #[test]
    fn flow_line_sampler_follows_a_ray() {
        let sq = objective(&[&[0.0, 0.0]], PotentialSpec::squared());
        let line = sample_flow_line(&sq, &pt(&[2.0, 1.0]), 0.1, 1.0).unwrap();
        assert_eq!(line.samples.len(), 11);
        let end = &line.last().point;
        let r = 5f64.sqrt() - 1.0;
        assert!((end[0] - 2.0 * r / 5f64.sqrt()).abs() < 1e-12);
        assert!((end[1] - r / 5f64.sqrt()).abs() < 1e-12);
        assert!(line.samples.windows(2).all(|w| w[1].value < w[0].value));
    }

    #[test]
    fn csv_layout() {
        let sq = objective(&[&[0.0, 0.0]], PotentialSpec::squared());
        let trace = trace_flow(&sq, &pt(&[1.0, 0.0]), &FlowConfig::default()).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,Z_1,Z_2,U,grad_norm,step_len"));
        assert_eq!(lines.next(), Some("0,1,0,1,2,0"));
        assert_eq!(text.lines().count(), trace.samples.len() + 1);
    }
}
