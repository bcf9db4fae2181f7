//! Exact geodesics and complete asymptotic classification for constant
//! connections `a dz` on the torus `C / (Z + lambda Z)`.
//!
//! For `a != 0` the lifted geodesic is
//!
//! ```text
//! sigma(t) = z0 + (1/a) log(1 + a v0 t),    sigma'(t) = v0 / (1 + a v0 t)
//! ```
//!
//! with the branch of the logarithm continued along the ray `s -> 1 + a v0 s`
//! from `log 1 = 0`. For `a = 0` geodesics are euclidean lines. Everything
//! here is closed-form; the only numerics are branch unwrapping and the
//! continued-fraction rationality test for lattice directions.

use num_complex::Complex64;
use thiserror::Error;

use crate::integrate::{GeodesicTrace, Sample, TerminalEvent, TraceOptions};
use crate::json::Value;
use crate::sphere::Chart;

#[derive(Debug, Error)]
pub enum TorusError {
    #[error("lattice parameter must have positive imaginary part, got {0}")]
    BadLambda(Complex64),
    #[error("initial velocity must be nonzero")]
    ZeroVelocity,
    #[error("t = {t} outside the maximal interval ({lo}, {hi})")]
    OutsideInterval { t: f64, lo: f64, hi: f64 },
}

/// A torus together with a constant connection and initial data.
#[derive(Clone, Copy, Debug)]
pub struct TorusSpec {
    pub lambda: Complex64,
    pub a: Complex64,
    pub z0: Complex64,
    pub v0: Complex64,
}

impl TorusSpec {
    pub fn new(
        lambda: Complex64,
        a: Complex64,
        z0: Complex64,
        v0: Complex64,
    ) -> Result<TorusSpec, TorusError> {
        if !lambda.im.is_finite() || lambda.im <= 0.0 {
            return Err(TorusError::BadLambda(lambda));
        }
        if v0.norm() == 0.0 {
            return Err(TorusError::ZeroVelocity);
        }
        Ok(TorusSpec { lambda, a, z0, v0 })
    }
}

/// Outcome of the torus classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TorusTag {
    /// `a = 0` with a lattice initial direction.
    ClosedPeriodic,
    /// `a != 0`, conj(a) is a lattice direction and `v0` points along it:
    /// the geodesic closes but returns with a different speed.
    ClosedNonPeriodic,
    /// `a != 0`, conj(a) is a lattice direction, `v0` generic: the geodesic
    /// spirals onto the closed geodesic along that line.
    LimitCycleLine,
    /// No lattice direction within resolution: dense in the torus.
    Dense,
}

impl TorusTag {
    pub fn tag(&self) -> &'static str {
        match self {
            TorusTag::ClosedPeriodic => "ClosedPeriodic",
            TorusTag::ClosedNonPeriodic => "ClosedNonPeriodic",
            TorusTag::LimitCycleLine => "LimitCycleLine",
            TorusTag::Dense => "Dense",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TorusVerdict {
    pub tag: TorusTag,
    /// Direction of the asymptotic line: conj(a) when `a != 0`, `v0` for the
    /// flat case.
    pub line_direction: Complex64,
    /// Coprime lattice vector parallel to the line, when one exists.
    pub lattice_vector: Option<(i64, i64)>,
}

impl TorusVerdict {
    pub fn to_json(&self) -> Value {
        let mut root = Value::object();
        root.push("tag", Value::str(self.tag.tag()));
        root.push(
            "line_direction",
            crate::json::complex(self.line_direction.re, self.line_direction.im),
        );
        match self.lattice_vector {
            Some((m, n)) => {
                root.push(
                    "lattice_vector",
                    Value::Array(vec![Value::Int(m), Value::Int(n)]),
                );
            }
            None => {
                root.push("lattice_vector", Value::Null);
            }
        }
        root
    }
}

/// Maximal parameter interval of the lifted geodesic: the ray `1 + a v0 t`
/// must avoid the origin.
pub fn torus_max_interval(spec: &TorusSpec) -> (f64, f64) {
    let av = spec.a * spec.v0;
    if av.norm() == 0.0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let real_tol = 1e-12 * (1.0 + av.norm());
    if av.im.abs() > real_tol {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let t_star = -1.0 / av.re;
    if av.re > 0.0 {
        (t_star, f64::INFINITY)
    } else {
        (f64::NEG_INFINITY, t_star)
    }
}

fn check_interval(spec: &TorusSpec, t: f64) -> Result<(), TorusError> {
    let (lo, hi) = torus_max_interval(spec);
    if t <= lo || t >= hi {
        return Err(TorusError::OutsideInterval { t, lo, hi });
    }
    Ok(())
}

/// Logarithm of `1 + av0 t` continued along the ray from `log 1 = 0`,
/// unwrapping the argument in increments of at most 0.1.
fn log_along_ray(av0: Complex64, t: f64) -> Complex64 {
    let end = 1.0 + av0 * t;
    let mut total_arg = 0.0;
    let mut s = 0.0_f64;
    let mut prev = Complex64::new(1.0, 0.0);
    while s < 1.0 {
        // Adaptive stride: halve until the argument increment is small.
        let mut ds = 1.0 - s;
        loop {
            let cand = 1.0 + av0 * ((s + ds) * t);
            let inc = (cand / prev).arg();
            if inc.abs() <= 0.1 || ds < 1e-12 {
                total_arg += inc;
                prev = cand;
                s += ds;
                break;
            }
            ds *= 0.5;
        }
    }
    Complex64::new(end.norm().ln(), total_arg)
}

/// Lift coordinate of the geodesic at parameter `t`.
pub fn torus_point(spec: &TorusSpec, t: f64) -> Result<Complex64, TorusError> {
    check_interval(spec, t)?;
    if spec.a.norm() == 0.0 {
        return Ok(spec.z0 + spec.v0 * t);
    }
    Ok(spec.z0 + log_along_ray(spec.a * spec.v0, t) / spec.a)
}

/// Lift velocity `v0 / (1 + a v0 t)`.
pub fn torus_velocity(spec: &TorusSpec, t: f64) -> Result<Complex64, TorusError> {
    check_interval(spec, t)?;
    Ok(spec.v0 / (1.0 + spec.a * spec.v0 * t))
}

/// Real lattice coordinates: `z = alpha + beta lambda`.
pub fn lattice_coordinates(z: Complex64, lambda: Complex64) -> (f64, f64) {
    let beta = z.im / lambda.im;
    let alpha = z.re - beta * lambda.re;
    (alpha, beta)
}

/// Representative of `z` with lattice coordinates in `[0, 1)`.
pub fn project_to_fundamental(z: Complex64, lambda: Complex64) -> Complex64 {
    let (alpha, beta) = lattice_coordinates(z, lambda);
    let a = alpha.rem_euclid(1.0);
    let b = beta.rem_euclid(1.0);
    Complex64::new(a, 0.0) + b * lambda
}

/// Decides whether `d` is parallel to a lattice vector `m + n lambda`.
///
/// The lattice coordinates `(alpha, beta)` of `d` are parallel to integers
/// `(m, n)` exactly when the cross product `alpha n - beta m` vanishes; we
/// scan the continued-fraction convergents of the ratio and accept the first
/// one whose cross product is below `tol` relative to `|alpha| + |beta|`.
/// Denominators are capped by `max_den`, so an irrational ratio (no small
/// convergent with a tiny cross product) yields `None`.
pub fn lattice_direction(
    d: Complex64,
    lambda: Complex64,
    max_den: u64,
    tol: f64,
) -> Option<(i64, i64)> {
    let (alpha, beta) = lattice_coordinates(d, lambda);
    let scale = alpha.abs() + beta.abs();
    if scale == 0.0 {
        return None;
    }
    let residual = |m: i64, n: i64| (alpha * n as f64 - beta * m as f64).abs();
    let orient = |m: i64, n: i64| {
        if (m as f64) * alpha + (n as f64) * beta < 0.0 {
            (-m, -n)
        } else {
            (m, n)
        }
    };

    // Axis-aligned cases first.
    if beta.abs() <= tol * scale {
        return Some(orient(1, 0));
    }
    if alpha.abs() <= tol * scale {
        return Some(orient(0, 1));
    }

    // Convergents of x = alpha/beta give candidates (m, n) = (p, q).
    let x = alpha / beta;
    let (mut p_prev, mut q_prev) = (1i64, 0i64);
    let (mut p, mut q) = (x.floor() as i64, 1i64);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        if p.unsigned_abs().max(q.unsigned_abs()) > max_den {
            return None;
        }
        if residual(p, q) <= tol * scale {
            let g = gcd(p.unsigned_abs(), q.unsigned_abs()).max(1) as i64;
            return Some(orient(p / g, q / g));
        }
        if frac.abs() < 1e-15 {
            return None;
        }
        let next = 1.0 / frac;
        let a_k = next.floor();
        frac = next - a_k;
        let a_k = a_k as i64;
        let p_new = a_k
            .checked_mul(p)
            .and_then(|v| v.checked_add(p_prev))?;
        let q_new = a_k
            .checked_mul(q)
            .and_then(|v| v.checked_add(q_prev))?;
        p_prev = p;
        q_prev = q;
        p = p_new;
        q = q_new;
    }
    None
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Complete classification of the geodesic's asymptotics.
///
/// Rationality of the lattice direction is decided at finite resolution
/// (`max_den`, `tol`), so `Dense` means "dense up to that resolution".
pub fn classify_torus(spec: &TorusSpec, max_den: u64, tol: f64) -> TorusVerdict {
    if spec.a.norm() == 0.0 {
        let dir = spec.v0;
        return match lattice_direction(dir, spec.lambda, max_den, tol) {
            Some(mn) => TorusVerdict {
                tag: TorusTag::ClosedPeriodic,
                line_direction: dir,
                lattice_vector: Some(mn),
            },
            None => TorusVerdict {
                tag: TorusTag::Dense,
                line_direction: dir,
                lattice_vector: None,
            },
        };
    }
    let dir = spec.a.conj();
    match lattice_direction(dir, spec.lambda, max_den, tol) {
        None => TorusVerdict {
            tag: TorusTag::Dense,
            line_direction: dir,
            lattice_vector: None,
        },
        Some(mn) => {
            let ratio = spec.v0 / dir;
            let on_line = ratio.im.abs() <= tol * (1.0 + ratio.norm());
            TorusVerdict {
                tag: if on_line {
                    TorusTag::ClosedNonPeriodic
                } else {
                    TorusTag::LimitCycleLine
                },
                line_direction: dir,
                lattice_vector: Some(mn),
            }
        }
    }
}

/// Samples the exact lift into a trace usable by the classifier.
///
/// Positions are lift coordinates; the trace carries the lattice generators
/// so that closure detection compares points modulo deck transformations.
/// Spacing adapts to keep chart displacement below `max_ds`.
pub fn torus_trace(spec: &TorusSpec, t_end: f64, max_ds: f64) -> Result<GeodesicTrace, TorusError> {
    let (_, hi) = torus_max_interval(spec);
    let t_stop = if t_end < hi { t_end } else { hi * (1.0 - 1e-9) };
    let mut samples = Vec::new();
    let mut t = 0.0_f64;
    loop {
        let z = torus_point(spec, t)?;
        let v = torus_velocity(spec, t)?;
        samples.push(Sample {
            t,
            chart: Chart::Z,
            position: z,
            velocity: v,
            // K = a z up to a constant, anchored at the start point.
            u: spec.a * (z - spec.z0),
        });
        if t >= t_stop {
            break;
        }
        let dt = (max_ds / v.norm().max(1e-12)).min(t_stop - t).max(1e-12);
        t += dt;
    }
    Ok(GeodesicTrace {
        samples,
        event: TerminalEvent::HorizonReached,
        event_t: t_stop,
        max_invariant_drift: 0.0,
        chart_switches: Vec::new(),
        segment_constants: vec![(0, spec.v0)],
        lattice: Some((Complex64::new(1.0, 0.0), spec.lambda)),
        opts: TraceOptions::default(),
    })
}
