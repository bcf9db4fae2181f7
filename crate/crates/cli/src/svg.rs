//! Self-contained SVG plots: no raster output, no graphics dependency.
//!
//! Sphere traces render as two side-by-side chart panels; each contiguous
//! chart segment of the trajectory becomes one path element. Poles are drawn
//! as crosses, the start point as a dot. The viewport fits the trace
//! bounding box with a 5% margin.

use merogeo::integrate::GeodesicTrace;
use merogeo::sphere::{Chart, SphereConnection};
use merogeo::torus::{project_to_fundamental, TorusSpec};
use merogeo::Complex64;

const PANEL: f64 = 400.0;

fn fmt(x: f64) -> String {
    format!("{x:.4}")
}

struct Mapper {
    min_re: f64,
    max_im: f64,
    scale: f64,
    offset_x: f64,
}

impl Mapper {
    /// Fits the points into a `PANEL x PANEL` box with 5% margin, flipping
    /// the imaginary axis into SVG screen coordinates.
    fn fit(points: impl Iterator<Item = Complex64>, offset_x: f64) -> Option<Mapper> {
        let mut min_re = f64::INFINITY;
        let mut max_re = f64::NEG_INFINITY;
        let mut min_im = f64::INFINITY;
        let mut max_im = f64::NEG_INFINITY;
        let mut any = false;
        for p in points {
            any = true;
            min_re = min_re.min(p.re);
            max_re = max_re.max(p.re);
            min_im = min_im.min(p.im);
            max_im = max_im.max(p.im);
        }
        if !any {
            return None;
        }
        let span = (max_re - min_re).max(max_im - min_im).max(1e-9);
        let margin = 0.05 * span;
        let scale = PANEL / (span + 2.0 * margin);
        Some(Mapper {
            min_re: min_re - margin,
            max_im: max_im + margin,
            scale,
            offset_x,
        })
    }

    fn map(&self, z: Complex64) -> (f64, f64) {
        (
            self.offset_x + (z.re - self.min_re) * self.scale,
            (self.max_im - z.im) * self.scale,
        )
    }

    fn contains(&self, z: Complex64) -> bool {
        let (x, y) = self.map(z);
        (self.offset_x..=self.offset_x + PANEL).contains(&x) && (0.0..=PANEL).contains(&y)
    }
}

fn path_of(points: &[Complex64], mapper: &Mapper, class: &str) -> String {
    let mut d = String::new();
    for (k, &p) in points.iter().enumerate() {
        let (x, y) = mapper.map(p);
        d.push_str(if k == 0 { "M" } else { " L" });
        d.push_str(&format!("{} {}", fmt(x), fmt(y)));
    }
    format!("<path class=\"{class}\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1\" d=\"{d}\"/>\n")
}

fn cross_at(x: f64, y: f64) -> String {
    let r = 4.0;
    format!(
        "<path class=\"pole\" stroke=\"#c03020\" stroke-width=\"1.2\" d=\"M{} {} L{} {} M{} {} L{} {}\"/>\n",
        fmt(x - r),
        fmt(y - r),
        fmt(x + r),
        fmt(y + r),
        fmt(x - r),
        fmt(y + r),
        fmt(x + r),
        fmt(y - r)
    )
}

fn dot_at(x: f64, y: f64) -> String {
    format!(
        "<circle class=\"start\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#207020\"/>\n",
        fmt(x),
        fmt(y)
    )
}

/// Contiguous same-chart runs of the trace samples.
fn chart_runs(trace: &GeodesicTrace) -> Vec<(Chart, Vec<Complex64>)> {
    let mut runs: Vec<(Chart, Vec<Complex64>)> = Vec::new();
    for s in &trace.samples {
        match runs.last_mut() {
            Some((chart, pts)) if *chart == s.chart => pts.push(s.position),
            _ => runs.push((s.chart, vec![s.position])),
        }
    }
    runs
}

pub fn trace_svg(conn: &SphereConnection, trace: &GeodesicTrace) -> String {
    let runs = chart_runs(trace);
    let width = 2.0 * PANEL + 30.0;
    let mut body = String::new();
    for (panel, chart) in [(0usize, Chart::Z), (1usize, Chart::W)] {
        let offset_x = panel as f64 * (PANEL + 30.0);
        body.push_str(&format!(
            "<rect x=\"{}\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n",
            fmt(offset_x),
            fmt(PANEL),
            fmt(PANEL)
        ));
        body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">chart {}</text>\n",
            fmt(offset_x + 6.0),
            fmt(PANEL - 8.0),
            chart.letter()
        ));
        let points = trace
            .samples
            .iter()
            .filter(|s| s.chart == chart)
            .map(|s| s.position);
        let Some(mapper) = Mapper::fit(points, offset_x) else {
            continue;
        };
        for (run_chart, pts) in &runs {
            if *run_chart == chart && pts.len() >= 2 {
                body.push_str(&path_of(pts, &mapper, "trace"));
            }
        }
        for e in &conn.catalog(chart).entries {
            if mapper.contains(e.location) {
                let (x, y) = mapper.map(e.location);
                body.push_str(&cross_at(x, y));
            }
        }
        if let Some(first) = trace.samples.iter().find(|s| s.chart == chart) {
            let (x, y) = mapper.map(first.position);
            body.push_str(&dot_at(x, y));
        }
    }
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" \
         width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n{}</svg>\n",
        fmt(width),
        fmt(PANEL),
        fmt(width),
        fmt(PANEL),
        body
    )
}

/// Projected trajectory in the fundamental domain, split at wrap jumps.
pub fn torus_svg(spec: &TorusSpec, trace: &GeodesicTrace) -> String {
    let corners = [
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0) + spec.lambda,
        spec.lambda,
        Complex64::new(0.0, 0.0),
    ];
    let projected: Vec<Complex64> = trace
        .samples
        .iter()
        .map(|s| project_to_fundamental(s.position, spec.lambda))
        .collect();
    let mapper = Mapper::fit(corners.iter().copied().chain(projected.iter().copied()), 0.0)
        .expect("corners are nonempty");
    let mut body = path_of(&corners, &mapper, "domain");
    // Split the projected path where it wraps around the domain.
    let jump = 0.5 * spec.lambda.norm().min(1.0);
    let mut run: Vec<Complex64> = Vec::new();
    let mut runs: Vec<Vec<Complex64>> = Vec::new();
    for &p in &projected {
        if let Some(&last) = run.last() {
            if (p - last).norm() > jump {
                runs.push(std::mem::take(&mut run));
            }
        }
        run.push(p);
    }
    runs.push(run);
    for r in &runs {
        if r.len() >= 2 {
            body.push_str(&path_of(r, &mapper, "trace"));
        }
    }
    if let Some(&first) = projected.first() {
        let (x, y) = mapper.map(first);
        body.push_str(&dot_at(x, y));
    }
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" \
         width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n{}</svg>\n",
        fmt(PANEL),
        fmt(PANEL),
        fmt(PANEL),
        fmt(PANEL),
        body
    )
}
