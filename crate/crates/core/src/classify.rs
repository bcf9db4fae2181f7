//! Trace analysis: self-intersections, closure, omega-limit verdicts,
//! external angles and residue-identity validators.
//!
//! Everything here consumes immutable traces. Finite-horizon numerics cannot
//! certify an omega-limit set, so the verdicts for limit cycles, boundary
//! graphs and dense orbits carry a `Candidate` suffix and are backed by
//! recorded evidence; the residue conditions provide necessary-condition
//! cross-checks.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::integrate::{GeodesicTrace, Sample, TerminalEvent};
use crate::json::Value;
use crate::sphere::{Chart, PoleId, SphereConnection};
use crate::torus::lattice_coordinates;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("external angle undefined for zero or antiparallel vectors")]
    AngleUndefined,
    #[error("winding number ambiguous at {point}: residual {residual:.3}")]
    AmbiguousWinding { point: Complex64, residual: f64 },
    #[error("cycle does not fit inside one chart disk |.| < {0}")]
    CycleOutsideChart(f64),
    #[error("cycle segments do not chain into a closed loop")]
    BrokenCycle,
    #[error("trace has fewer than two samples")]
    TraceTooShort,
    #[error("trace is not closed; no cycle to extract")]
    NotClosed,
}

// ---------------------------------------------------------------------------
// External angles and winding numbers
// ---------------------------------------------------------------------------

/// Principal argument of `v_out / v_in`, in the open interval `(-pi, pi)`.
/// Antiparallel pairs have no external angle.
pub fn external_angle(v_in: Complex64, v_out: Complex64) -> Result<f64, ClassifyError> {
    if v_in.norm() == 0.0 || v_out.norm() == 0.0 {
        return Err(ClassifyError::AngleUndefined);
    }
    let ratio = v_out / v_in;
    let angle = ratio.arg();
    if (angle.abs() - std::f64::consts::PI).abs() < 1e-12 {
        return Err(ClassifyError::AngleUndefined);
    }
    Ok(angle)
}

/// Discrete winding number of a closed polyline around `p`: summed signed
/// angle increments, rounded; a rounding residual of 0.1 or more means the
/// point is too close to the polyline to decide.
pub fn winding_of_polyline(points: &[Complex64], p: Complex64) -> Result<i64, ClassifyError> {
    let mut total = 0.0_f64;
    let n = points.len();
    for k in 0..n {
        let a = points[k] - p;
        let b = points[(k + 1) % n] - p;
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return Err(ClassifyError::AmbiguousWinding {
                point: p,
                residual: 1.0,
            });
        }
        total += (b / a).arg();
    }
    let turns = total / std::f64::consts::TAU;
    let rounded = turns.round();
    let residual = (turns - rounded).abs();
    if residual >= 0.1 {
        return Err(ClassifyError::AmbiguousWinding {
            point: p,
            residual,
        });
    }
    Ok(rounded as i64)
}

// ---------------------------------------------------------------------------
// Geodesic cycles
// ---------------------------------------------------------------------------

/// A vertex of a geodesic cycle with its incoming and outgoing tangents.
#[derive(Clone, Copy, Debug)]
pub struct CycleVertex {
    pub point: Complex64,
    pub incoming: Complex64,
    pub outgoing: Complex64,
}

/// A cyclic chain of geodesic segments in a single chart.
#[derive(Clone, Debug)]
pub struct GeodesicCycle {
    pub chart: Chart,
    /// Polyline pieces; segment `j` ends where segment `j + 1` begins,
    /// cyclically.
    pub segments: Vec<Vec<Complex64>>,
    pub vertices: Vec<CycleVertex>,
}

impl GeodesicCycle {
    pub fn new(
        chart: Chart,
        segments: Vec<Vec<Complex64>>,
        vertices: Vec<CycleVertex>,
    ) -> Result<GeodesicCycle, ClassifyError> {
        if segments.is_empty() || segments.iter().any(|s| s.len() < 2) {
            return Err(ClassifyError::BrokenCycle);
        }
        for j in 0..segments.len() {
            let end = *segments[j].last().unwrap();
            let next = segments[(j + 1) % segments.len()][0];
            if (end - next).norm() > 1e-6 {
                return Err(ClassifyError::BrokenCycle);
            }
        }
        Ok(GeodesicCycle {
            chart,
            segments,
            vertices,
        })
    }

    /// Concatenated closed polyline (without repeating the start point).
    pub fn polyline(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for seg in &self.segments {
            out.extend_from_slice(&seg[..seg.len() - 1]);
        }
        out
    }

    /// Extracts the closed loop `[0, period]` from a trace. The loop must
    /// stay in one chart. A vertex is recorded when the return tangent
    /// differs measurably from the initial one.
    pub fn from_closed_trace(
        trace: &GeodesicTrace,
        period: f64,
    ) -> Result<GeodesicCycle, ClassifyError> {
        if trace.samples.len() < 2 {
            return Err(ClassifyError::TraceTooShort);
        }
        let chart = trace.samples[0].chart;
        let mut points = Vec::new();
        for (k, s) in trace.samples.iter().enumerate() {
            if s.t > period {
                // Close with the interpolated state at the period.
                let (z, v) = hermite_state(&trace.samples[k - 1], s, period);
                let _ = v;
                points.push(z);
                break;
            }
            if s.chart != chart {
                return Err(ClassifyError::CycleOutsideChart(2.0));
            }
            points.push(s.position);
        }
        if points.len() < 3 {
            return Err(ClassifyError::TraceTooShort);
        }
        let v_start = trace.samples[0].velocity;
        let v_end = end_velocity(trace, period);
        let angle = external_angle(v_end, v_start).unwrap_or(0.0);
        let vertices = if angle.abs() > 1e-6 {
            vec![CycleVertex {
                point: trace.samples[0].position,
                incoming: v_end,
                outgoing: v_start,
            }]
        } else {
            Vec::new()
        };
        GeodesicCycle::new(chart, vec![points], vertices)
    }
}

fn end_velocity(trace: &GeodesicTrace, period: f64) -> Complex64 {
    for pair in trace.samples.windows(2) {
        if pair[1].t >= period {
            return hermite_state(&pair[0], &pair[1], period).1;
        }
    }
    trace.last_sample().velocity
}

/// Winding number of a cycle around `p`.
pub fn winding_number(cycle: &GeodesicCycle, p: Complex64) -> Result<i64, ClassifyError> {
    winding_of_polyline(&cycle.polyline(), p)
}

// ---------------------------------------------------------------------------
// Cubic Hermite interpolation between accepted steps
// ---------------------------------------------------------------------------

/// Position and velocity at parameter `t` between two samples, from the
/// cubic Hermite interpolant matching positions and velocities at the ends.
fn hermite_state(s0: &Sample, s1: &Sample, t: f64) -> (Complex64, Complex64) {
    let h = s1.t - s0.t;
    if h <= 0.0 {
        return (s0.position, s0.velocity);
    }
    let s = ((t - s0.t) / h).clamp(0.0, 1.0);
    hermite_eval(s0.position, s0.velocity, s1.position, s1.velocity, h, s)
}

fn hermite_eval(
    z0: Complex64,
    v0: Complex64,
    z1: Complex64,
    v1: Complex64,
    h: f64,
    s: f64,
) -> (Complex64, Complex64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let pos = h00 * z0 + h10 * h * v0 + h01 * z1 + h11 * h * v1;
    let d00 = 6.0 * s2 - 6.0 * s;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = -6.0 * s2 + 6.0 * s;
    let d11 = 3.0 * s2 - 2.0 * s;
    let vel = (d00 * z0 + d10 * h * v0 + d01 * z1 + d11 * h * v1) / h;
    (pos, vel)
}

// ---------------------------------------------------------------------------
// Closure detection
// ---------------------------------------------------------------------------

/// Position tolerance and direction tolerance (radians) for closure.
#[derive(Clone, Copy, Debug)]
pub struct ClosureTolerances {
    pub position: f64,
    pub direction: f64,
}

impl Default for ClosureTolerances {
    fn default() -> Self {
        ClosureTolerances {
            position: 1e-6,
            direction: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ClosureReport {
    pub closed: bool,
    /// Closed with identical return velocity.
    pub periodic: bool,
    pub period: Option<f64>,
    pub position_gap: Option<f64>,
    /// `|v(l) - v(0)| / |v(0)|`.
    pub velocity_gap: Option<f64>,
}

/// Reduction of a displacement modulo the trace's lattice (identity on the
/// sphere).
fn reduce_displacement(trace: &GeodesicTrace, d: Complex64) -> Complex64 {
    match trace.lattice {
        None => d,
        Some((_, lambda)) => {
            let (alpha, beta) = lattice_coordinates(d, lambda);
            d - Complex64::new(alpha.round(), 0.0) - beta.round() * lambda
        }
    }
}

/// Finds the earliest return of the trace to its start point with an aligned
/// tangent; the return time is refined by bisection on the Hermite
/// interpolant. Quotient traces (tori) compare positions modulo the lattice.
pub fn detect_closure(trace: &GeodesicTrace, tol: &ClosureTolerances) -> ClosureReport {
    if trace.samples.len() < 3 {
        return ClosureReport::default();
    }
    let first = &trace.samples[0];
    let chart0 = first.chart;
    let z0 = first.position;
    let v0 = first.velocity;
    let dir0 = v0 / v0.norm();
    let arm_radius = (20.0 * tol.position).max(0.02);
    let mut armed = false;

    for k in 1..trace.samples.len() {
        let (s_prev, s_cur) = (&trace.samples[k - 1], &trace.samples[k]);
        if s_cur.chart != chart0 || s_prev.chart != chart0 {
            armed = true; // leaving the chart certainly leaves the start ball
            continue;
        }
        let d_cur = reduce_displacement(trace, s_cur.position - z0);
        if !armed {
            if d_cur.norm() > arm_radius {
                armed = true;
            }
            continue;
        }
        // Lattice shift frozen at the segment midpoint.
        let mid = 0.5 * (s_prev.position + s_cur.position);
        let shift = (mid - z0) - reduce_displacement(trace, mid - z0);
        let target = z0 + shift;
        let g = |z: Complex64| ((z - target) * dir0.conj()).re;
        let g0 = g(s_prev.position);
        let g1 = g(s_cur.position);
        if !(g0 < 0.0 && g1 >= 0.0) {
            continue;
        }
        // Bisection on the Hermite interpolant.
        let (mut lo, mut hi) = (s_prev.t, s_cur.t);
        for _ in 0..80 {
            let t_mid = 0.5 * (lo + hi);
            let (z, _) = hermite_state(s_prev, s_cur, t_mid);
            if g(z) < 0.0 {
                lo = t_mid;
            } else {
                hi = t_mid;
            }
        }
        let l = 0.5 * (lo + hi);
        let (z_l, v_l) = hermite_state(s_prev, s_cur, l);
        let gap = (z_l - target).norm();
        if gap >= tol.position {
            continue;
        }
        let angle = (v_l / v0).arg().abs();
        let positive_ratio = (v_l * v0.conj()).re > 0.0;
        if !(positive_ratio && angle < tol.direction) {
            continue;
        }
        let velocity_gap = (v_l - v0).norm() / v0.norm();
        return ClosureReport {
            closed: true,
            periodic: velocity_gap < tol.direction,
            period: Some(l),
            position_gap: Some(gap),
            velocity_gap: Some(velocity_gap),
        };
    }
    ClosureReport::default()
}

// ---------------------------------------------------------------------------
// Self-intersections
// ---------------------------------------------------------------------------

/// A straight or Hermite-refined curve piece with its parameter range and a
/// global ordering index for adjacency tests.
#[derive(Clone, Copy, Debug)]
struct Seg {
    idx: usize,
    chart: Chart,
    t0: f64,
    t1: f64,
    a: Complex64,
    b: Complex64,
    va: Option<Complex64>,
    vb: Option<Complex64>,
}

#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    pub t1: f64,
    pub t2: f64,
    pub point: Complex64,
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    let ab = b - a;
    let ac = c - a;
    ab.re * ac.im - ab.im * ac.re
}

/// Strict proper-crossing predicate: each segment separates the other's
/// endpoints. Touching endpoints and collinear overlaps do not count.
fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let scale = (p2 - p1).norm() * (q2 - q1).norm();
    if scale == 0.0 {
        return false;
    }
    let eps = 1e-12 * scale;
    let o1 = orient(p1, p2, q1);
    let o2 = orient(p1, p2, q2);
    let o3 = orient(q1, q2, p1);
    let o4 = orient(q1, q2, p2);
    if o1.abs() <= eps || o2.abs() <= eps || o3.abs() <= eps || o4.abs() <= eps {
        return false;
    }
    (o1 > 0.0) != (o2 > 0.0) && (o3 > 0.0) != (o4 > 0.0)
}

/// Parameters of the straight-line intersection, in `[0, 1]` on each segment.
fn segment_intersection_params(
    p1: Complex64,
    p2: Complex64,
    q1: Complex64,
    q2: Complex64,
) -> (f64, f64) {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.re * s.im - r.im * s.re;
    let qp = q1 - p1;
    let tp = (qp.re * s.im - qp.im * s.re) / denom;
    let tq = (qp.re * r.im - qp.im * r.re) / denom;
    (tp, tq)
}

/// All transversal crossings among the segments, found by spatial-hash
/// bucketing and confirmed by the exact segment test; pairs adjacent in the
/// global ordering are skipped.
fn find_crossings(segs: &[Seg], refine: bool) -> Vec<Crossing> {
    let mut cell = segs
        .iter()
        .map(|s| (s.b - s.a).norm())
        .fold(0.0_f64, f64::max);
    if cell == 0.0 {
        return Vec::new();
    }
    cell *= 1.01;
    let key = |z: Complex64| -> (i64, i64) {
        ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, s) in segs.iter().enumerate() {
        let (kx0, ky0) = key(s.a);
        let (kx1, ky1) = key(s.b);
        for kx in kx0.min(kx1)..=kx0.max(kx1) {
            for ky in ky0.min(ky1)..=ky0.max(ky1) {
                grid.entry((kx, ky)).or_default().push(i);
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for bucket in grid.values() {
        for x in 0..bucket.len() {
            for y in (x + 1)..bucket.len() {
                let (mut i, mut j) = (bucket[x], bucket[y]);
                if i > j {
                    std::mem::swap(&mut i, &mut j);
                }
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut out = Vec::new();
    for (i, j) in pairs {
        let (si, sj) = (&segs[i], &segs[j]);
        if sj.idx <= si.idx + 1 || si.chart != sj.chart {
            continue;
        }
        if !segments_cross(si.a, si.b, sj.a, sj.b) {
            continue;
        }
        out.push(resolve_crossing(si, sj, refine));
    }
    out.sort_by(|a, b| {
        (a.t1, a.t2)
            .partial_cmp(&(b.t1, b.t2))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

fn resolve_crossing(si: &Seg, sj: &Seg, refine: bool) -> Crossing {
    if refine {
        if let (Some(vai), Some(vbi), Some(vaj), Some(vbj)) = (si.va, si.vb, sj.va, sj.vb) {
            return refine_hermite_crossing(si, (vai, vbi), sj, (vaj, vbj));
        }
    }
    let (sp, sq) = segment_intersection_params(si.a, si.b, sj.a, sj.b);
    let point = si.a + sp * (si.b - si.a);
    Crossing {
        t1: si.t0 + sp * (si.t1 - si.t0),
        t2: sj.t0 + sq * (sj.t1 - sj.t0),
        point,
    }
}

/// Bisection on the two parameter intervals: both Hermite arcs are halved
/// until the active chords are shorter than the positional target, keeping
/// the pair of halves that still cross.
fn refine_hermite_crossing(
    si: &Seg,
    (vai, vbi): (Complex64, Complex64),
    sj: &Seg,
    (vaj, vbj): (Complex64, Complex64),
) -> Crossing {
    let hi = si.t1 - si.t0;
    let hj = sj.t1 - sj.t0;
    let eval_i = |s: f64| hermite_eval(si.a, vai, si.b, vbi, hi, s).0;
    let eval_j = |s: f64| hermite_eval(sj.a, vaj, sj.b, vbj, hj, s).0;
    let (mut ia, mut ib) = (0.0_f64, 1.0_f64);
    let (mut ja, mut jb) = (0.0_f64, 1.0_f64);
    for _ in 0..48 {
        let (pa, pb) = (eval_i(ia), eval_i(ib));
        let (qa, qb) = (eval_j(ja), eval_j(jb));
        if (pb - pa).norm() < 1e-9 && (qb - qa).norm() < 1e-9 {
            break;
        }
        let im = 0.5 * (ia + ib);
        let jm = 0.5 * (ja + jb);
        let (pm, qm) = (eval_i(im), eval_j(jm));
        let mut found = false;
        'outer: for (ia2, ib2, pa2, pb2) in [(ia, im, pa, pm), (im, ib, pm, pb)] {
            for (ja2, jb2, qa2, qb2) in [(ja, jm, qa, qm), (jm, jb, qm, qb)] {
                if segments_cross(pa2, pb2, qa2, qb2) {
                    (ia, ib, ja, jb) = (ia2, ib2, ja2, jb2);
                    found = true;
                    break 'outer;
                }
            }
        }
        if !found {
            break;
        }
    }
    let (pa, pb) = (eval_i(ia), eval_i(ib));
    let (qa, qb) = (eval_j(ja), eval_j(jb));
    let (sp, sq) = if segments_cross(pa, pb, qa, qb) {
        segment_intersection_params(pa, pb, qa, qb)
    } else {
        (0.5, 0.5)
    };
    let s_i = ia + sp.clamp(0.0, 1.0) * (ib - ia);
    let s_j = ja + sq.clamp(0.0, 1.0) * (jb - ja);
    Crossing {
        t1: si.t0 + s_i * hi,
        t2: sj.t0 + s_j * hj,
        point: eval_i(s_i),
    }
}

fn trace_segments(trace: &GeodesicTrace) -> Vec<Seg> {
    let mut segs = Vec::new();
    for (k, pair) in trace.samples.windows(2).enumerate() {
        if pair[0].chart != pair[1].chart {
            continue;
        }
        segs.push(Seg {
            idx: k,
            chart: pair[0].chart,
            t0: pair[0].t,
            t1: pair[1].t,
            a: pair[0].position,
            b: pair[1].position,
            va: Some(pair[0].velocity),
            vb: Some(pair[1].velocity),
        });
    }
    segs
}

/// All transversal self-crossings of the trace polyline, per chart, refined
/// on the Hermite interpolant to positional accuracy around 1e-9.
pub fn self_intersections(trace: &GeodesicTrace) -> Vec<Crossing> {
    find_crossings(&trace_segments(trace), true)
}

/// Self-crossings of a bare polyline; parameters are `index + fraction`.
pub fn polyline_self_intersections(points: &[Complex64]) -> Vec<Crossing> {
    let segs: Vec<Seg> = points
        .windows(2)
        .enumerate()
        .map(|(k, w)| Seg {
            idx: k,
            chart: Chart::Z,
            t0: k as f64,
            t1: (k + 1) as f64,
            a: w[0],
            b: w[1],
            va: None,
            vb: None,
        })
        .collect();
    find_crossings(&segs, false)
}

// ---------------------------------------------------------------------------
// Omega-limit classification
// ---------------------------------------------------------------------------

/// Verdict tags mirroring the omega-limit taxonomy on the sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OmegaTag {
    PoleLimit(PoleId),
    ClosedGeodesic { periodic: bool },
    LimitCycleCandidate,
    BoundaryGraphCandidate,
    DenseCandidate,
    SelfIntersecting(usize),
    Unresolved,
}

impl OmegaTag {
    pub fn tag(&self) -> &'static str {
        match self {
            OmegaTag::PoleLimit(_) => "PoleLimit",
            OmegaTag::ClosedGeodesic { .. } => "ClosedGeodesic",
            OmegaTag::LimitCycleCandidate => "LimitCycleCandidate",
            OmegaTag::BoundaryGraphCandidate => "BoundaryGraphCandidate",
            OmegaTag::DenseCandidate => "DenseCandidate",
            OmegaTag::SelfIntersecting(_) => "SelfIntersecting",
            OmegaTag::Unresolved => "Unresolved",
        }
    }
}

/// A verdict with free-form numeric diagnostics.
#[derive(Clone, Debug)]
pub struct OmegaVerdict {
    pub tag: OmegaTag,
    pub evidence: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl OmegaVerdict {
    pub fn to_json(&self) -> Value {
        let mut root = Value::object();
        root.push("tag", Value::str(self.tag.tag()));
        match self.tag {
            OmegaTag::PoleLimit(PoleId::Finite(k)) => {
                root.push("pole", Value::Int(k as i64));
            }
            OmegaTag::PoleLimit(PoleId::Infinity) => {
                root.push("pole", Value::str("infinity"));
            }
            OmegaTag::ClosedGeodesic { periodic } => {
                root.push("periodic", Value::Bool(periodic));
            }
            OmegaTag::SelfIntersecting(count) => {
                root.push("count", Value::Int(count as i64));
            }
            _ => {}
        }
        let mut ev = Value::object();
        for (k, v) in &self.evidence {
            ev.push(k, Value::Float(*v));
        }
        root.push("evidence", ev);
        root.push(
            "notes",
            Value::Array(self.notes.iter().map(Value::str).collect()),
        );
        root
    }
}

/// Knobs for the finite-horizon verdict cascade.
#[derive(Clone, Debug)]
pub struct HorizonOptions {
    /// Self-intersection verdicts need at least this many crossings.
    pub min_crossings: usize,
    /// Proximity radius deciding whether a recurrent loop hangs on a pole
    /// (boundary-graph evidence); much coarser than the terminal radius.
    pub pole_radius: f64,
    pub closure: ClosureTolerances,
    /// Cells per axis of the per-chart coverage grid.
    pub grid_cells: usize,
    /// Saturation fraction for the dense-candidate test.
    pub coverage_fraction: f64,
    /// Successive section-return gaps must shrink by at least this factor.
    pub recurrence_ratio: f64,
}

impl Default for HorizonOptions {
    fn default() -> Self {
        HorizonOptions {
            min_crossings: 3,
            pole_radius: 0.05,
            closure: ClosureTolerances::default(),
            grid_cells: 32,
            coverage_fraction: 0.95,
            recurrence_ratio: 0.85,
        }
    }
}

/// Decision cascade over a completed trace:
/// terminal pole approach, closure, persistent self-intersection, section
/// recurrence (limit cycle vs pole-hung boundary graph), grid coverage
/// (dense), and finally the honest fallback.
pub fn classify_omega(
    conn: &SphereConnection,
    trace: &GeodesicTrace,
    opts: &HorizonOptions,
) -> OmegaVerdict {
    let mut evidence = Vec::new();
    let mut notes = Vec::new();

    if let TerminalEvent::PoleApproach(id) = trace.event {
        evidence.push(("terminal_t".into(), trace.event_t));
        return OmegaVerdict {
            tag: OmegaTag::PoleLimit(id),
            evidence,
            notes,
        };
    }

    let closure = detect_closure(trace, &opts.closure);
    if closure.closed {
        evidence.push(("period".into(), closure.period.unwrap_or(f64::NAN)));
        evidence.push(("position_gap".into(), closure.position_gap.unwrap_or(f64::NAN)));
        evidence.push(("velocity_gap".into(), closure.velocity_gap.unwrap_or(f64::NAN)));
        return OmegaVerdict {
            tag: OmegaTag::ClosedGeodesic {
                periodic: closure.periodic,
            },
            evidence,
            notes,
        };
    }

    let horizon = trace.last_sample().t;
    let crossings = self_intersections(trace);
    let count_at = |h: f64| {
        crossings
            .iter()
            .filter(|c| c.t1.max(c.t2) <= h)
            .count()
    };
    let (c_quarter, c_half, c_full) = (
        count_at(horizon / 4.0),
        count_at(horizon / 2.0),
        crossings.len(),
    );
    evidence.push(("crossings_quarter".into(), c_quarter as f64));
    evidence.push(("crossings_half".into(), c_half as f64));
    evidence.push(("crossings_full".into(), c_full as f64));
    if c_full >= opts.min_crossings && c_quarter < c_half && c_half < c_full {
        return OmegaVerdict {
            tag: OmegaTag::SelfIntersecting(c_full),
            evidence,
            notes,
        };
    }

    if let Some(rec) = section_recurrence(trace, opts) {
        for (k, gap) in rec.gaps.iter().enumerate() {
            evidence.push((format!("return_gap_{k}"), *gap));
        }
        let near_pole = loop_near_pole(conn, trace, rec.loop_range, opts.pole_radius);
        evidence.push(("loop_pole_distance".into(), near_pole.1));
        if rec.converged {
            if near_pole.0 {
                notes.push("recurrent loop passes within the pole radius".into());
                return OmegaVerdict {
                    tag: OmegaTag::BoundaryGraphCandidate,
                    evidence,
                    notes,
                };
            }
            return OmegaVerdict {
                tag: OmegaTag::LimitCycleCandidate,
                evidence,
                notes,
            };
        }
    }

    let (cov_quarter, cov_half, cov_full) = grid_coverage(trace, opts.grid_cells);
    evidence.push(("coverage_quarter".into(), cov_quarter as f64));
    evidence.push(("coverage_half".into(), cov_half as f64));
    evidence.push(("coverage_full".into(), cov_full as f64));
    let grid_total = (opts.grid_cells * opts.grid_cells) as f64;
    if cov_full > 0
        && cov_half as f64 >= opts.coverage_fraction * cov_full as f64
        && cov_quarter as f64 >= opts.coverage_fraction * cov_half as f64
        && (cov_full as f64) >= 0.25 * grid_total
    {
        notes.push("coverage saturated across doubled horizons".into());
        return OmegaVerdict {
            tag: OmegaTag::DenseCandidate,
            evidence,
            notes,
        };
    }

    notes.push("finite horizon gave no conclusive signature".into());
    OmegaVerdict {
        tag: OmegaTag::Unresolved,
        evidence,
        notes,
    }
}

struct Recurrence {
    gaps: Vec<f64>,
    converged: bool,
    /// Sample index range of the last completed return loop.
    loop_range: (usize, usize),
}

/// Crossings of the trace with the transversal section through its endpoint,
/// taken in the same chart and direction.
fn section_recurrence(trace: &GeodesicTrace, opts: &HorizonOptions) -> Option<Recurrence> {
    let last = trace.last_sample();
    let dir = last.velocity / last.velocity.norm();
    let anchor = last.position;
    let mut hits: Vec<(usize, f64)> = Vec::new(); // (sample index, transverse offset)
    let n = trace.samples.len();
    for k in 1..n.saturating_sub(1) {
        let (s0, s1) = (&trace.samples[k - 1], &trace.samples[k]);
        if s0.chart != last.chart || s1.chart != last.chart {
            continue;
        }
        let g0 = ((s0.position - anchor) * dir.conj()).re;
        let g1 = ((s1.position - anchor) * dir.conj()).re;
        if !(g0 < 0.0 && g1 >= 0.0) {
            continue;
        }
        let w = g0 / (g0 - g1);
        let z = s0.position + w * (s1.position - s0.position);
        let v = s0.velocity + w * (s1.velocity - s0.velocity);
        if (v * dir.conj()).re <= 0.0 {
            continue;
        }
        let offset = ((z - anchor) * dir.conj()).im;
        if offset.abs() < 0.75 {
            hits.push((k, offset));
        }
    }
    if hits.len() < 4 {
        return None;
    }
    let offsets: Vec<f64> = hits.iter().map(|h| h.1).collect();
    let gaps: Vec<f64> = offsets.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let tail = &gaps[gaps.len().saturating_sub(3)..];
    let converged = tail.windows(2).all(|w| w[1] <= opts.recurrence_ratio * w[0] + 1e-12)
        && tail.last().is_some_and(|&g| g < 0.02);
    let loop_range = (hits[hits.len() - 2].0, hits[hits.len() - 1].0);
    Some(Recurrence {
        gaps,
        converged,
        loop_range,
    })
}

fn loop_near_pole(
    conn: &SphereConnection,
    trace: &GeodesicTrace,
    (from, to): (usize, usize),
    radius: f64,
) -> (bool, f64) {
    let mut best = f64::INFINITY;
    for s in &trace.samples[from..=to.min(trace.samples.len() - 1)] {
        if let Some((_, d)) = conn.catalog(s.chart).nearest(s.position) {
            best = best.min(d);
        }
    }
    (best < radius, best)
}

/// Cells of a per-chart grid over the chart disk visited by the first
/// quarter, half, and full horizon.
fn grid_coverage(trace: &GeodesicTrace, cells: usize) -> (usize, usize, usize) {
    let horizon = trace.last_sample().t;
    let extent = 2.2_f64;
    let step = 2.0 * extent / cells as f64;
    let mut quarter = std::collections::HashSet::new();
    let mut half = std::collections::HashSet::new();
    let mut full = std::collections::HashSet::new();
    for s in &trace.samples {
        let ix = ((s.position.re + extent) / step).floor() as i64;
        let iy = ((s.position.im + extent) / step).floor() as i64;
        let keyed = (s.chart == Chart::Z, ix, iy);
        full.insert(keyed);
        if s.t <= horizon / 2.0 {
            half.insert(keyed);
        }
        if s.t <= horizon / 4.0 {
            quarter.insert(keyed);
        }
    }
    (quarter.len(), half.len(), full.len())
}

// ---------------------------------------------------------------------------
// Gauss-Bonnet and residue conditions
// ---------------------------------------------------------------------------

/// `|sum of external angles - 2 pi (2 - m_f - 2 genus + sum of enclosed
/// real residues)|` for a cycle in one chart.
///
/// Enclosed poles are those with nonzero winding number; the cycle must fit
/// inside the chart disk `|.| < 2` so that "enclosed" means the bounded side.
pub fn gauss_bonnet_defect(
    conn: &SphereConnection,
    cycle: &GeodesicCycle,
    genus: i64,
    m_f: i64,
) -> Result<f64, ClassifyError> {
    let polyline = cycle.polyline();
    if polyline.iter().any(|z| z.norm() >= 2.0) {
        return Err(ClassifyError::CycleOutsideChart(2.0));
    }
    let mut angle_sum = 0.0;
    for v in &cycle.vertices {
        angle_sum += external_angle(v.incoming, v.outgoing)?;
    }
    let mut res_sum = 0.0;
    for e in &conn.catalog(cycle.chart).entries {
        let w = winding_of_polyline(&polyline, e.location)?;
        if w != 0 {
            res_sum += e.residue.re;
        }
    }
    let predicted =
        std::f64::consts::TAU * (2.0 - m_f as f64 - 2.0 * genus as f64 + res_sum);
    Ok((angle_sum - predicted).abs())
}

/// Per-pole residue flags for the structural conditions on omega-limit sets.
#[derive(Clone, Debug)]
pub struct PoleResidueFlag {
    pub id: PoleId,
    pub re_residue: f64,
    /// `Re Res = -1/2`: the pole can be the vertex of a single arc.
    pub is_single_arc_vertex: bool,
    /// `Re Res = 0`: the pole can join exactly two spikes.
    pub is_double_spike_vertex: bool,
}

/// Necessary-condition report for closed-geodesic / limit-cycle /
/// disconnecting-graph omega-limits around the given poles.
#[derive(Clone, Debug)]
pub struct ResidueConditionReport {
    pub sum_re: f64,
    /// `-1 + 2 genus`, the value the sum must take for such limits to exist.
    pub target: f64,
    pub condition_met: bool,
    /// Whether the sum lies in the open window admitting a disconnecting
    /// geodesic 1-cycle, `(-3/2 + 2g, -1/2 + 2g)`.
    pub one_cycle_window: bool,
    pub poles: Vec<PoleResidueFlag>,
}

impl ResidueConditionReport {
    pub fn to_json(&self) -> Value {
        let mut root = Value::object();
        root.push("sum_re", Value::Float(self.sum_re));
        root.push("target", Value::Float(self.target));
        root.push("condition_met", Value::Bool(self.condition_met));
        root.push("one_cycle_window", Value::Bool(self.one_cycle_window));
        let poles = self
            .poles
            .iter()
            .map(|p| {
                let mut o = Value::object();
                match p.id {
                    PoleId::Finite(k) => o.push("pole", Value::Int(k as i64)),
                    PoleId::Infinity => o.push("pole", Value::str("infinity")),
                };
                o.push("re_residue", Value::Float(p.re_residue));
                o.push("single_arc_vertex", Value::Bool(p.is_single_arc_vertex));
                o.push("double_spike_vertex", Value::Bool(p.is_double_spike_vertex));
                o
            })
            .collect();
        root.push("poles", Value::Array(poles));
        root
    }
}

pub fn residue_condition_report(
    conn: &SphereConnection,
    pole_ids: &[PoleId],
    genus: i64,
) -> ResidueConditionReport {
    let tol = 1e-9;
    let mut sum_re = 0.0;
    let mut poles = Vec::new();
    for &id in pole_ids {
        let res = conn.residue(id);
        sum_re += res.re;
        poles.push(PoleResidueFlag {
            id,
            re_residue: res.re,
            is_single_arc_vertex: (res.re + 0.5).abs() < tol,
            is_double_spike_vertex: res.re.abs() < tol,
        });
    }
    let target = -1.0 + 2.0 * genus as f64;
    ResidueConditionReport {
        sum_re,
        target,
        condition_met: (sum_re - target).abs() < tol,
        one_cycle_window: sum_re > target - 0.5 && sum_re < target + 0.5,
        poles,
    }
}
