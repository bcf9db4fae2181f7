//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p merogeo --test acceptance -- --nocapture` to see
//! the per-criterion lines; thresholds are pinned in the assertions.

use merogeo::classify::{
    detect_closure, gauss_bonnet_defect, polyline_self_intersections, residue_condition_report,
    ClosureTolerances, GeodesicCycle,
};
use merogeo::integrate::{invariant_drift, reverse_trace, trace, TerminalEvent, TraceOptions};
use merogeo::rational::{residue_at, Polynomial, RationalForm};
use merogeo::rng::Rng;
use merogeo::sphere::{Chart, PoleId, SphereConnection};
use merogeo::torus::{
    lattice_coordinates,
    classify_torus, project_to_fundamental, torus_max_interval, torus_point, torus_trace,
    torus_velocity, TorusSpec, TorusTag,
};
use merogeo::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pairwise-separated random points.
fn separated_points(rng: &mut Rng, count: usize, box_size: f64, min_sep: f64) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::new();
    while out.len() < count {
        let cand = rng.complex_in_square(box_size);
        if out.iter().all(|p| (p - cand).norm() >= min_sep) {
            out.push(cand);
        }
    }
    out
}

fn random_connection(rng: &mut Rng, max_deg: u64) -> Option<SphereConnection> {
    let dd = 1 + rng.below(max_deg) as usize;
    let poles = separated_points(rng, dd, 2.0, 0.1);
    let dn = rng.below(dd as u64 + 2) as usize;
    let num = Polynomial::new((0..=dn).map(|_| rng.complex_in_square(2.0)).collect());
    let form = RationalForm::new(num, Polynomial::from_roots(&poles, c(1.0, 0.0))).ok()?;
    if form.is_zero() || form.denominator().degree() != dd {
        return None;
    }
    SphereConnection::new(form).ok()
}

/// Oracle position in the chart the sample lives in.
fn oracle_in_chart(chart: Chart, z: Complex64) -> Complex64 {
    match chart {
        Chart::Z => z,
        Chart::W => 1.0 / z,
    }
}

#[test]
fn criterion_1_residue_theorem() {
    let mut rng = Rng::new(101);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let Some(conn) = random_connection(&mut rng, 8) else {
            continue;
        };
        let (_, defect) = conn.residue_sum_report();
        worst = worst.max(defect);
        assert!(defect < 1e-9, "case {done}: defect {defect:.3e}");
        done += 1;
    }
    println!("acceptance 1 residue-theorem: PASS (100 cases, worst defect {worst:.3e})");
}

#[test]
fn criterion_2_chart_invariance_of_residues() {
    let mut rng = Rng::new(202);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 50 {
        let dd = 1 + rng.below(4) as usize;
        let mut poles: Vec<Complex64> = Vec::new();
        while poles.len() < dd {
            let cand = rng.complex_in_annulus(0.55, 1.9);
            if poles.iter().all(|p| (p - cand).norm() >= 0.12) {
                poles.push(cand);
            }
        }
        let num = Polynomial::new((0..dd).map(|_| rng.complex_in_square(1.5)).collect());
        let Ok(form) = RationalForm::new(num, Polynomial::from_roots(&poles, c(1.0, 0.0)))
        else {
            continue;
        };
        if form.denominator().degree() != dd {
            continue;
        }
        let conn = SphereConnection::new(form).unwrap();
        for e in &conn.catalog(Chart::Z).entries {
            let w_res = residue_at(conn.form(Chart::W), 1.0 / e.location, e.order).unwrap();
            let diff = (w_res - e.residue).norm();
            worst = worst.max(diff);
            assert!(diff < 1e-9, "case {done}: pole {} diff {diff:.3e}", e.location);
        }
        done += 1;
    }
    println!("acceptance 2 chart-invariance: PASS (50 cases, worst diff {worst:.3e})");
}

#[test]
fn criterion_3_oracle_equivalence() {
    let mut rng = Rng::new(303);
    let opts = TraceOptions {
        detect_closure: false,
        ..TraceOptions::default()
    };
    let mut worst_err: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut check = |tr: &merogeo::integrate::GeodesicTrace,
                     oracle: &dyn Fn(f64) -> Complex64,
                     label: &str| {
        assert_eq!(tr.event, TerminalEvent::HorizonReached, "{label}");
        for s in &tr.samples {
            let err = (s.position - oracle_in_chart(s.chart, oracle(s.t))).norm();
            worst_err = worst_err.max(err);
            assert!(err < 1e-8, "{label}: t = {} err {err:.3e}", s.t);
        }
        let drift = invariant_drift(tr);
        worst_drift = worst_drift.max(drift);
        assert!(drift < 1e-8, "{label}: drift {drift:.3e}");
    };

    // Family R = 0: straight lines.
    let flat = SphereConnection::parse("0").unwrap();
    for k in 0..10 {
        let z0 = rng.complex_in_square(1.0);
        let v0 = rng.complex_in_annulus(0.2, 1.0);
        let tr = trace(&flat, z0, v0, 10.0, &opts).unwrap();
        check(&tr, &|t| z0 + v0 * t, &format!("flat #{k}"));
    }

    // Family R = a (constant): z0 + log(1 + a v0 t)/a on a branch-safe ray.
    for k in 0..10 {
        let a = rng.complex_in_annulus(0.3, 1.2);
        let mut v0 = rng.complex_in_annulus(0.3, 1.2);
        if (a * v0).re < 0.05 {
            v0 = 0.2 * v0 / (a * v0) * (a * v0).norm(); // rotate onto the safe ray
        }
        let z0 = rng.complex_in_square(0.5);
        let conn = SphereConnection::new(RationalForm::constant(a)).unwrap();
        let tr = trace(&conn, z0, v0, 10.0, &opts).unwrap();
        check(&tr, &|t| z0 + (1.0 + a * v0 * t).ln() / a, &format!("const #{k}"));
    }

    // Family R = rho/z on the positive real axis:
    // z(t) = (z0^(rho+1) + (rho+1) c t)^(1/(rho+1)), c = z0^rho v0.
    for k in 0..10 {
        let rho = 1 + (k % 3) as u32;
        let z0 = rng.uniform(0.6, 1.5);
        let v0 = rng.uniform(0.5, 1.5);
        let conn =
            SphereConnection::parse(&format!("{rho}/z")).unwrap();
        let tr = trace(&conn, c(z0, 0.0), c(v0, 0.0), 10.0, &opts).unwrap();
        let p = (rho + 1) as f64;
        let cc = z0.powf(rho as f64) * v0;
        check(
            &tr,
            &|t| c((z0.powf(p) + p * cc * t).powf(1.0 / p), 0.0),
            &format!("rho #{k}"),
        );
    }

    // Independent brute-force route for a complex-data case: fixed-step RK4
    // at h = 1e-5 on an independently written right-hand side.
    let rho = 2.0;
    let (z0, v0) = (c(1.0, 0.3), c(0.4, 0.6));
    let conn = SphereConnection::parse("2/z").unwrap();
    let t_end = 1.0;
    let tr = trace(&conn, z0, v0, t_end, &opts).unwrap();
    let rhs = |z: Complex64, v: Complex64| -> (Complex64, Complex64) {
        let r = rho / z;
        (v, -r * v * v)
    };
    let (mut z, mut v) = (z0, v0);
    let h = 1e-5;
    let steps = (t_end / h).round() as usize;
    for _ in 0..steps {
        let (k1z, k1v) = rhs(z, v);
        let (k2z, k2v) = rhs(z + 0.5 * h * k1z, v + 0.5 * h * k1v);
        let (k3z, k3v) = rhs(z + 0.5 * h * k2z, v + 0.5 * h * k2v);
        let (k4z, k4v) = rhs(z + h * k3z, v + h * k3v);
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    let end = tr.last_sample();
    let err = (oracle_in_chart(Chart::Z, z) - end.position).norm();
    assert!(err < 1e-8, "RK4 brute force endpoint differs by {err:.3e}");
    worst_err = worst_err.max(err);

    println!(
        "acceptance 3 oracle-equivalence: PASS (31 cases, worst error {worst_err:.3e}, \
         worst drift {worst_drift:.3e})"
    );
}

#[test]
fn criterion_4_torus_formulas() {
    let mut rng = Rng::new(404);
    // Velocity vs centered finite differences on 100 specs.
    let mut worst_fd: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let lambda = c(rng.uniform(-0.5, 0.5), rng.uniform(0.4, 1.5));
        let a = rng.complex_in_square(1.5);
        let z0 = rng.complex_in_square(1.0);
        let v0 = rng.complex_in_annulus(0.2, 1.5);
        let Ok(spec) = TorusSpec::new(lambda, a, z0, v0) else {
            continue;
        };
        let (lo, hi) = torus_max_interval(&spec);
        for frac in [0.0, 0.35, 0.8] {
            let t = if hi.is_infinite() {
                frac * 2.0
            } else {
                frac * 0.8 * hi
            };
            if t - 1e-6 <= lo || t + 1e-6 >= hi {
                continue;
            }
            let h = 1e-6;
            let fd =
                (torus_point(&spec, t + h).unwrap() - torus_point(&spec, t - h).unwrap())
                    / (2.0 * h);
            let v = torus_velocity(&spec, t).unwrap();
            let rel = (fd - v).norm() / v.norm().max(1e-12);
            worst_fd = worst_fd.max(rel);
            assert!(rel < 1e-6, "case {done}: t = {t}, rel {rel:.3e}");
        }
        done += 1;
    }

    // Sphere integrator with R = a reproduces the exact lifts.
    let opts = TraceOptions {
        detect_closure: false,
        ..TraceOptions::default()
    };
    let mut worst_lift: f64 = 0.0;
    let mut done = 0;
    while done < 8 {
        let a = rng.complex_in_annulus(0.4, 1.0);
        let v0 = rng.complex_in_annulus(0.4, 1.0);
        if (a * v0).re < 0.1 {
            continue;
        }
        let z0 = rng.complex_in_square(0.4);
        let spec = TorusSpec::new(I, a, z0, v0).unwrap();
        // Clip the horizon so the lift stays well inside both charts.
        let mut t_end: f64 = 5.0;
        while t_end > 0.5 && torus_point(&spec, t_end).unwrap().norm() > 3.5 {
            t_end *= 0.7;
        }
        let conn = SphereConnection::new(RationalForm::constant(a)).unwrap();
        let tr = trace(&conn, z0, v0, t_end, &opts).unwrap();
        assert_eq!(tr.event, TerminalEvent::HorizonReached);
        for s in &tr.samples {
            let lift = torus_point(&spec, s.t).unwrap();
            let err = (s.position - oracle_in_chart(s.chart, lift)).norm();
            worst_lift = worst_lift.max(err);
            assert!(err < 1e-8, "case {done}: t = {} err {err:.3e}", s.t);
        }
        done += 1;
    }
    println!(
        "acceptance 4 torus-formulas: PASS (100 fd cases worst {worst_fd:.3e}, \
         8 lift cases worst {worst_lift:.3e})"
    );
}

#[test]
fn criterion_5_closed_geodesic_criterion() {
    // The unit circle for R = -1/z: closed and periodic with period 2 pi,
    // vanishing Gauss-Bonnet defect.
    let conn = SphereConnection::parse("-1/z").unwrap();
    let tr = trace(&conn, c(1.0, 0.0), I, 10.0, &TraceOptions::default()).unwrap();
    let report = detect_closure(&tr, &ClosureTolerances::default());
    assert!(report.closed && report.periodic);
    let period = report.period.unwrap();
    assert!(
        (period - std::f64::consts::TAU).abs() < 1e-6,
        "period {period}"
    );
    let cycle = GeodesicCycle::from_closed_trace(&tr, period).unwrap();
    let defect = gauss_bonnet_defect(&conn, &cycle, 0, 1).unwrap();
    assert!(defect < 1e-6, "defect {defect:.3e}");
    let res = residue_condition_report(&conn, &[PoleId::Finite(0)], 0);
    assert!(res.condition_met);

    // Perturbed residue -0.95: the closure criterion fails and the geodesic
    // spirals without closing within horizon 50.
    let conn2 = SphereConnection::parse("(-1+0.05)/z").unwrap();
    let tr2 = trace(&conn2, c(1.0, 0.0), I, 50.0, &TraceOptions::default()).unwrap();
    assert_ne!(tr2.event, TerminalEvent::ClosureDetected);
    let report2 = detect_closure(&tr2, &ClosureTolerances::default());
    assert!(!report2.closed, "perturbed connection must not close");
    let res2 = residue_condition_report(&conn2, &[PoleId::Finite(0)], 0);
    assert!(!res2.condition_met);
    println!(
        "acceptance 5 closed-geodesic-criterion: PASS (period {period:.9}, defect {defect:.3e})"
    );
}

#[test]
fn criterion_6_torus_classification() {
    let max_den = 1_000_000;
    let tol = 1e-9;
    let v1 = classify_torus(
        &TorusSpec::new(I, c(0.0, 0.0), c(0.0, 0.0), c(1.0, 1.0)).unwrap(),
        max_den,
        tol,
    );
    assert_eq!(v1.tag, TorusTag::ClosedPeriodic);
    let spec2 = TorusSpec::new(I, c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap();
    let v2 = classify_torus(&spec2, max_den, tol);
    assert_eq!(v2.tag, TorusTag::ClosedNonPeriodic);
    let v3 = classify_torus(
        &TorusSpec::new(I, c(1.0, 0.0), c(0.0, 0.0), I).unwrap(),
        max_den,
        tol,
    );
    assert_eq!(v3.tag, TorusTag::LimitCycleLine);

    // The closed-but-not-periodic case returns with a different velocity.
    let tr = torus_trace(&spec2, 3.0, 0.02).unwrap();
    let report = detect_closure(
        &tr,
        &ClosureTolerances {
            position: 1e-8,
            direction: 1e-4,
        },
    );
    assert!(report.closed && !report.periodic);
    assert!(report.position_gap.unwrap() < 1e-8);
    let l = report.period.unwrap();
    // Distance on the torus: reduce the lift displacement by the nearest
    // lattice vector (the raw projections sit on opposite sides of the
    // fundamental-domain seam).
    let diff = torus_point(&spec2, l).unwrap() - spec2.z0;
    let (al, be) = lattice_coordinates(diff, spec2.lambda);
    let reduced = diff - c(al.round(), 0.0) - be.round() * spec2.lambda;
    assert!(reduced.norm() < 1e-8, "return distance {:.3e}", reduced.norm());
    assert!(
        (project_to_fundamental(spec2.z0, spec2.lambda)
            - project_to_fundamental(spec2.z0 + c(al.round(), 0.0) + be.round() * spec2.lambda,
                spec2.lambda))
        .norm()
            < 1e-12,
        "lattice translate projects onto the start"
    );
    let v_l = torus_velocity(&spec2, l).unwrap();
    assert!((v_l - spec2.v0).norm() > 0.1 * spec2.v0.norm());
    println!("acceptance 6 torus-classification: PASS (return at t = {l:.9})");
}

#[test]
fn criterion_7_self_intersections_vs_brute_force() {
    let mut rng = Rng::new(707);
    for case in 0..20 {
        let n = 500 + rng.below(1501) as usize; // up to 2000 segments
        let mut pts = vec![c(0.0, 0.0)];
        for _ in 0..n {
            let prev = *pts.last().unwrap();
            pts.push(prev + rng.complex_in_square(0.06));
        }
        let fast = polyline_self_intersections(&pts).len();
        let mut slow = 0usize;
        for i in 0..n {
            for j in (i + 2)..n {
                if segments_cross_oracle(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                    slow += 1;
                }
            }
        }
        assert_eq!(fast, slow, "case {case} with {n} segments");
    }
    println!("acceptance 7 self-intersections: PASS (20 polylines, exact count match)");
}

/// Independent strict proper-crossing test (same geometry, brute-force
/// enumeration) used to validate the spatial-hash bucketing.
fn segments_cross_oracle(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let orient = |a: Complex64, b: Complex64, c0: Complex64| -> f64 {
        (b.re - a.re) * (c0.im - a.im) - (b.im - a.im) * (c0.re - a.re)
    };
    let scale = (p2 - p1).norm() * (q2 - q1).norm();
    if scale == 0.0 {
        return false;
    }
    let eps = 1e-12 * scale;
    let (o1, o2) = (orient(p1, p2, q1), orient(p1, p2, q2));
    let (o3, o4) = (orient(q1, q2, p1), orient(q1, q2, p2));
    if o1.abs() <= eps || o2.abs() <= eps || o3.abs() <= eps || o4.abs() <= eps {
        return false;
    }
    (o1 > 0.0) != (o2 > 0.0) && (o3 > 0.0) != (o4 > 0.0)
}

#[test]
fn criterion_8_time_reversal() {
    let mut rng = Rng::new(808);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 10 {
        let Some(conn) = random_connection(&mut rng, 4) else {
            continue;
        };
        let z0 = rng.complex_in_square(1.5);
        if conn
            .catalog(Chart::Z)
            .nearest(z0)
            .is_some_and(|(_, d)| d < 0.2)
        {
            continue;
        }
        let v0 = rng.complex_in_annulus(0.2, 1.0);
        let opts = TraceOptions {
            detect_closure: false,
            ..TraceOptions::default()
        };
        let Ok(fwd) = trace(&conn, z0, v0, 2.0, &opts) else {
            continue;
        };
        if fwd.event != TerminalEvent::HorizonReached {
            continue; // ran into a pole; draw another case
        }
        let back = reverse_trace(&conn, &fwd).unwrap();
        if back.event != TerminalEvent::HorizonReached {
            continue;
        }
        let end = back.last_sample();
        let returned = match end.chart {
            Chart::Z => end.position,
            Chart::W => 1.0 / end.position,
        };
        let err = (returned - z0).norm();
        worst = worst.max(err);
        assert!(err < 1e-6, "case {done}: reversal error {err:.3e}");
        done += 1;
    }
    println!("acceptance 8 time-reversal: PASS (10 cases, worst return error {worst:.3e})");
}
