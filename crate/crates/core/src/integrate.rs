//! Numerical continuation of geodesics with event detection.
//!
//! A curve is a geodesic exactly when, in a chart, `z'' = -R(z) (z')^2`.
//! We integrate that second-order equation together with the running
//! primitive `u' = R(z) z'`. Along an exact geodesic `e^u z'` is constant on
//! each chart segment; its relative drift is the integrator's self-check.
//!
//! Chart switching keeps coordinates inside the annulus `1/2 <= |.| <= 2`:
//! when the position leaves `|.| <= 2` the state moves to the other chart
//! (`w = 1/z`, `w' = -z'/z^2`), `u` restarts at zero and the segment
//! constant is re-anchored, since the primitive is only defined per chart up
//! to an additive constant.

use num_complex::Complex64;
use thiserror::Error;

use crate::json::Value;
use crate::rational::RationalForm;
use crate::sphere::{Chart, PoleId, SphereConnection};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("initial velocity must be nonzero")]
    ZeroVelocity,
    #[error("initial position is a pole of the connection")]
    StartAtPole,
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("reverse_trace requires a trace that ended at the horizon, got {0:?}")]
    NotAtHorizon(TerminalEvent),
}

/// Why integration stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TerminalEvent {
    /// Monotone approach into the given pole, closer than the pole radius.
    PoleApproach(PoleId),
    /// Left the covered charts; cannot happen on the sphere (kept for the
    /// event vocabulary shared with exports).
    Escape,
    /// Reached `t_end`.
    HorizonReached,
    /// Returned to the start point with aligned velocity.
    ClosureDetected,
    /// Step size underflow or non-finite state.
    NumericalBreakdown,
}

impl TerminalEvent {
    pub fn tag(&self) -> &'static str {
        match self {
            TerminalEvent::PoleApproach(_) => "PoleApproach",
            TerminalEvent::Escape => "Escape",
            TerminalEvent::HorizonReached => "HorizonReached",
            TerminalEvent::ClosureDetected => "ClosureDetected",
            TerminalEvent::NumericalBreakdown => "NumericalBreakdown",
        }
    }
}

/// Integration options; all tolerances are overridable.
#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum chart-coordinate displacement per accepted step; keeps the
    /// sampled polyline dense enough for the downstream geometry.
    pub max_chart_step: f64,
    /// Terminal pole-approach radius.
    pub pole_radius: f64,
    /// Radius for the in-flight closure event.
    pub closure_radius: f64,
    /// Below this step size integration reports a breakdown.
    pub min_step: f64,
    /// `|coordinate| > threshold` triggers a chart switch.
    pub switch_threshold: f64,
    pub detect_closure: bool,
    pub max_steps: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_chart_step: 0.05,
            pole_radius: 1e-5,
            closure_radius: 1e-3,
            min_step: 1e-14,
            switch_threshold: 2.0,
            detect_closure: true,
            max_steps: 4_000_000,
        }
    }
}

/// One accepted step of a geodesic trace.
#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub t: f64,
    pub chart: Chart,
    pub position: Complex64,
    pub velocity: Complex64,
    /// Accumulated primitive of `R dz` along the current chart segment.
    pub u: Complex64,
}

/// State carried across a chart switch, for continuity checks.
#[derive(Clone, Copy, Debug)]
pub struct SwitchRecord {
    pub t: f64,
    pub from: Chart,
    pub before_position: Complex64,
    pub before_velocity: Complex64,
    pub after_position: Complex64,
    pub after_velocity: Complex64,
}

/// A time-stamped polyline in chart-tagged coordinates.
#[derive(Clone, Debug)]
pub struct GeodesicTrace {
    pub samples: Vec<Sample>,
    pub event: TerminalEvent,
    /// Parameter time of the terminal event.
    pub event_t: f64,
    pub max_invariant_drift: f64,
    pub chart_switches: Vec<SwitchRecord>,
    /// `(first sample index, conserved constant)` per chart segment.
    pub segment_constants: Vec<(usize, Complex64)>,
    /// Deck-transformation generators when the trace lives on a quotient of
    /// the plane (a torus); `None` on the sphere.
    pub lattice: Option<(Complex64, Complex64)>,
    pub opts: TraceOptions,
}

impl GeodesicTrace {
    pub fn switch_times(&self) -> Vec<f64> {
        self.chart_switches.iter().map(|s| s.t).collect()
    }

    pub fn last_sample(&self) -> &Sample {
        self.samples.last().expect("traces are never empty")
    }

    /// CSV export with columns `t, chart, re, im, v_re, v_im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,chart,re,im,v_re,v_im\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                crate::json::format_float(s.t),
                s.chart.letter(),
                crate::json::format_float(s.position.re),
                crate::json::format_float(s.position.im),
                crate::json::format_float(s.velocity.re),
                crate::json::format_float(s.velocity.im),
            ));
        }
        out
    }

    /// JSON export: the CSV fields plus events and drift.
    pub fn to_json(&self) -> Value {
        let mut samples = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let mut o = Value::object();
            o.push("t", Value::Float(s.t));
            o.push("chart", Value::str(s.chart.letter()));
            o.push("re", Value::Float(s.position.re));
            o.push("im", Value::Float(s.position.im));
            o.push("v_re", Value::Float(s.velocity.re));
            o.push("v_im", Value::Float(s.velocity.im));
            samples.push(o);
        }
        let mut event = Value::object();
        event.push("tag", Value::str(self.event.tag()));
        if let TerminalEvent::PoleApproach(id) = self.event {
            match id {
                PoleId::Finite(k) => event.push("pole", Value::Int(k as i64)),
                PoleId::Infinity => event.push("pole", Value::str("infinity")),
            };
        }
        event.push("t", Value::Float(self.event_t));
        let mut root = Value::object();
        root.push("samples", Value::Array(samples));
        root.push("event", event);
        root.push(
            "max_invariant_drift",
            Value::Float(self.max_invariant_drift),
        );
        root.push(
            "chart_switches",
            Value::Array(self.switch_times().into_iter().map(Value::Float).collect()),
        );
        root
    }
}

/// Right-hand side of the geodesic system in the active chart:
/// `(z', v', u') = (v, -R(z) v^2, R(z) v)`; `None` at a pole of the form or
/// on non-finite input.
pub fn geodesic_rhs(
    form: &RationalForm,
    position: Complex64,
    velocity: Complex64,
) -> Option<[Complex64; 3]> {
    let r = form.eval_checked(position)?;
    let dv = -r * velocity * velocity;
    let du = r * velocity;
    (velocity.is_finite() && dv.is_finite() && du.is_finite())
        .then_some([velocity, dv, du])
}

// Dormand-Prince 5(4) coefficients.
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// Difference between the 5th and embedded 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct StepResult {
    y: [Complex64; 3],
    err: f64,
}

fn dopri_step(
    form: &RationalForm,
    y: [Complex64; 3],
    h: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Option<StepResult> {
    let mut k = [[Complex64::new(0.0, 0.0); 3]; 7];
    k[0] = geodesic_rhs(form, y[0], y[1])?;
    for stage in 1..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = A[stage][j];
            if a != 0.0 {
                for c in 0..3 {
                    ys[c] += h * a * kj[c];
                }
            }
        }
        k[stage] = geodesic_rhs(form, ys[0], ys[1])?;
    }
    let mut y_new = y;
    let mut err_vec = [Complex64::new(0.0, 0.0); 3];
    for c in 0..3 {
        for stage in 0..7 {
            if B5[stage] != 0.0 {
                y_new[c] += h * B5[stage] * k[stage][c];
            }
            if E[stage] != 0.0 {
                err_vec[c] += h * E[stage] * k[stage][c];
            }
        }
    }
    let mut err = 0.0;
    for c in 0..3 {
        let scale = abs_tol + rel_tol * y[c].norm().max(y_new[c].norm());
        err += (err_vec[c].norm() / scale).powi(2);
    }
    let err = (err / 3.0).sqrt();
    (y_new.iter().all(|v| v.is_finite())).then_some(StepResult { y: y_new, err })
}

struct Integrator<'a> {
    conn: &'a SphereConnection,
    opts: TraceOptions,
    chart: Chart,
    t: f64,
    y: [Complex64; 3], // position, velocity, u
    c: Complex64,
    samples: Vec<Sample>,
    switches: Vec<SwitchRecord>,
    segment_constants: Vec<(usize, Complex64)>,
    max_drift: f64,
    pole_distances: Vec<f64>,
    closure_ref: Option<(Chart, Complex64, Complex64)>,
    closure_armed: bool,
}

impl<'a> Integrator<'a> {
    fn new(
        conn: &'a SphereConnection,
        chart: Chart,
        position: Complex64,
        velocity: Complex64,
        opts: TraceOptions,
    ) -> Integrator<'a> {
        let closure_ref = opts
            .detect_closure
            .then_some((chart, position, velocity / velocity.norm()));
        let mut s = Integrator {
            conn,
            opts,
            chart,
            t: 0.0,
            y: [position, velocity, Complex64::new(0.0, 0.0)],
            c: velocity,
            samples: Vec::new(),
            switches: Vec::new(),
            segment_constants: vec![(0, velocity)],
            max_drift: 0.0,
            pole_distances: Vec::new(),
            closure_ref,
            closure_armed: false,
        };
        s.push_sample();
        s
    }

    fn push_sample(&mut self) {
        self.samples.push(Sample {
            t: self.t,
            chart: self.chart,
            position: self.y[0],
            velocity: self.y[1],
            u: self.y[2],
        });
        let drift = ((self.y[2].exp() * self.y[1] - self.c).norm()) / self.c.norm();
        if drift.is_finite() {
            self.max_drift = self.max_drift.max(drift);
        }
    }

    fn nearest_pole(&self) -> Option<(Complex64, f64)> {
        let cat = self.conn.active_catalog(self.chart);
        cat.nearest(self.y[0])
            .map(|(k, d)| (cat.entries[k].location, d))
    }

    fn finish(self, event: TerminalEvent, event_t: f64) -> GeodesicTrace {
        GeodesicTrace {
            samples: self.samples,
            event,
            event_t,
            max_invariant_drift: self.max_drift,
            chart_switches: self.switches,
            segment_constants: self.segment_constants,
            lattice: None,
            opts: self.opts,
        }
    }

    fn run(mut self, duration: f64) -> GeodesicTrace {
        let mut h = (1e-3_f64)
            .min(duration)
            .min(self.opts.max_chart_step / self.y[1].norm().max(1e-9));
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > self.opts.max_steps {
                let t = self.t;
                return self.finish(TerminalEvent::NumericalBreakdown, t);
            }
            if self.t >= duration {
                return self.finish(TerminalEvent::HorizonReached, duration);
            }
            // Predictive caps: horizon and chart displacement.
            h = h
                .min(duration - self.t)
                .min(self.opts.max_chart_step / self.y[1].norm().max(1e-9));
            if h < self.opts.min_step {
                let t = self.t;
                return self.finish(TerminalEvent::NumericalBreakdown, t);
            }
            let form = self.conn.form(self.chart);
            let step = dopri_step(form, self.y, h, self.opts.abs_tol, self.opts.rel_tol);
            let Some(step) = step else {
                let t = self.t;
                return self.finish(TerminalEvent::NumericalBreakdown, t);
            };
            if step.err > 1.0 {
                h *= (0.9 * step.err.powf(-0.2)).clamp(0.2, 1.0);
                continue;
            }
            // Oversized displacement despite the predictive cap: retry.
            if (step.y[0] - self.y[0]).norm() > 2.0 * self.opts.max_chart_step {
                h *= 0.5;
                continue;
            }
            let prev_position = self.y[0];
            let h_taken = h;
            self.t += h;
            self.y = step.y;
            self.push_sample();
            h *= (0.9 * step.err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);

            // Pole approach: distance below the radius and decreasing for
            // three consecutive accepted steps.
            if let Some((loc, d)) = self.nearest_pole() {
                self.pole_distances.push(d);
                let n = self.pole_distances.len();
                if d < self.opts.pole_radius
                    && n >= 3
                    && self.pole_distances[n - 1] < self.pole_distances[n - 2]
                    && self.pole_distances[n - 2] < self.pole_distances[n - 3]
                {
                    let id = self
                        .conn
                        .pole_id_at(self.chart, loc)
                        .unwrap_or(PoleId::Infinity);
                    let t = self.t;
                    return self.finish(TerminalEvent::PoleApproach(id), t);
                }
            }

            // Closure against the start point, in the start chart.
            if let Some((chart0, z0, dir0)) = self.closure_ref {
                if self.chart == chart0 {
                    let dist_now = (self.y[0] - z0).norm();
                    if !self.closure_armed {
                        if dist_now > (4.0 * self.opts.closure_radius).max(0.02) {
                            self.closure_armed = true;
                        }
                    } else {
                        let (d, s) = point_segment_distance(z0, prev_position, self.y[0]);
                        if d < self.opts.closure_radius {
                            let v_here = self.y[1];
                            let align = (v_here / v_here.norm() * dir0.conj()).re;
                            if align > 0.9 {
                                let t_event = self.t - h_taken + s * h_taken;
                                return self.finish(TerminalEvent::ClosureDetected, t_event);
                            }
                        }
                    }
                }
            }

            // Chart switch with hysteresis: only when the coordinate leaves
            // the overlap annulus.
            if self.y[0].norm() > self.opts.switch_threshold {
                let before_position = self.y[0];
                let before_velocity = self.y[1];
                let inv = 1.0 / before_position;
                let new_velocity = -before_velocity * inv * inv;
                self.switches.push(SwitchRecord {
                    t: self.t,
                    from: self.chart,
                    before_position,
                    before_velocity,
                    after_position: inv,
                    after_velocity: new_velocity,
                });
                self.chart = self.chart.other();
                self.y = [inv, new_velocity, Complex64::new(0.0, 0.0)];
                self.c = new_velocity;
                self.segment_constants.push((self.samples.len(), self.c));
                self.pole_distances.clear();
            }
        }
    }
}

/// Minimum distance from `p` to the segment `[a, b]`, and the parameter of
/// the closest point in `[0, 1]`.
fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return ((p - a).norm(), 0.0);
    }
    let s = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    ((p - (a + s * ab)).norm(), s)
}

/// Integrates the geodesic with initial data `(z0, v0)` in the `z` chart up
/// to `t_end`, or until a terminal event.
pub fn trace(
    conn: &SphereConnection,
    z0: Complex64,
    v0: Complex64,
    t_end: f64,
    opts: &TraceOptions,
) -> Result<GeodesicTrace, TraceError> {
    if v0.norm() == 0.0 {
        return Err(TraceError::ZeroVelocity);
    }
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(TraceError::BadHorizon(t_end));
    }
    // Reject starts at (or numerically on top of) a pole.
    if let Some((_, d)) = conn.catalog(Chart::Z).nearest(z0) {
        if d <= conn_start_radius(opts) {
            return Err(TraceError::StartAtPole);
        }
    }
    let (chart, position, velocity) = if z0.norm() > opts.switch_threshold {
        (Chart::W, 1.0 / z0, -v0 / (z0 * z0))
    } else {
        (Chart::Z, z0, v0)
    };
    Ok(Integrator::new(conn, chart, position, velocity, opts.clone()).run(t_end))
}

fn conn_start_radius(opts: &TraceOptions) -> f64 {
    opts.pole_radius.max(1e-9)
}

/// Re-integrates from the final state with negated velocity for the same
/// duration; a forward trace followed by its reverse must come back to the
/// start.
pub fn reverse_trace(
    conn: &SphereConnection,
    forward: &GeodesicTrace,
) -> Result<GeodesicTrace, TraceError> {
    if forward.event != TerminalEvent::HorizonReached {
        return Err(TraceError::NotAtHorizon(forward.event));
    }
    let last = forward.last_sample();
    let duration = last.t - forward.samples[0].t;
    let mut opts = forward.opts.clone();
    opts.detect_closure = false;
    Ok(Integrator::new(conn, last.chart, last.position, -last.velocity, opts).run(duration))
}

/// Maximum relative deviation of `e^u v` from its chart-segment constant.
pub fn invariant_drift(trace: &GeodesicTrace) -> f64 {
    let mut worst: f64 = 0.0;
    for (seg, &(start, c)) in trace.segment_constants.iter().enumerate() {
        let end = trace
            .segment_constants
            .get(seg + 1)
            .map(|&(e, _)| e)
            .unwrap_or(trace.samples.len());
        for s in &trace.samples[start..end] {
            let d = (s.u.exp() * s.velocity - c).norm() / c.norm();
            if d.is_finite() {
                worst = worst.max(d);
            }
        }
    }
    worst
}

/// Position of a sample mapped to the `z` chart (unusable exactly at
/// `w = 0`, which integration never reaches).
pub fn sample_in_z(s: &Sample) -> Complex64 {
    match s.chart {
        Chart::Z => s.position,
        Chart::W => 1.0 / s.position,
    }
}
