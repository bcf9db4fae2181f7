//! Connections on the Riemann sphere through the two standard charts.
//!
//! In the chart `z` the connection is the form `R(z) dz`; in the chart
//! `w = 1/z` the tangent-bundle transition contributes an extra `-2/w`
//! beyond plain substitution:
//!
//! ```text
//! R_w(w) = -R(1/w)/w^2 - 2/w
//! ```
//!
//! That extra term is what makes the total residue sum `-2`, the negative
//! Euler characteristic of the sphere.

use num_complex::Complex64;
use thiserror::Error;

use crate::json::Value;
use crate::rational::{
    build_catalog_with, PoleCatalog, Polynomial, RationalError, RationalForm, Tolerances,
};

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("cannot switch chart at the origin of the current chart")]
    SwitchAtOrigin,
    #[error(transparent)]
    Rational(#[from] RationalError),
}

/// The two affine charts covering the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Z,
    W,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::Z => Chart::W,
            Chart::W => Chart::Z,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Chart::Z => "Z",
            Chart::W => "W",
        }
    }
}

/// Identifies a pole of the connection: an index into the finite catalog, or
/// the point at infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoleId {
    Finite(usize),
    Infinity,
}

/// A point (with optional tangent vector) in one of the two charts.
#[derive(Clone, Copy, Debug)]
pub struct ChartPoint {
    pub chart: Chart,
    pub position: Complex64,
    pub velocity: Option<Complex64>,
}

impl ChartPoint {
    pub fn new(chart: Chart, position: Complex64) -> ChartPoint {
        ChartPoint {
            chart,
            position,
            velocity: None,
        }
    }

    pub fn with_velocity(chart: Chart, position: Complex64, velocity: Complex64) -> ChartPoint {
        ChartPoint {
            chart,
            position,
            velocity: Some(velocity),
        }
    }
}

/// Inverts the coordinate and transforms the velocity by `w' = -z'/z^2`.
pub fn to_other_chart(p: &ChartPoint) -> Result<ChartPoint, SphereError> {
    if p.position.norm() == 0.0 {
        return Err(SphereError::SwitchAtOrigin);
    }
    Ok(ChartPoint {
        chart: p.chart.other(),
        position: 1.0 / p.position,
        velocity: p.velocity.map(|v| -v / (p.position * p.position)),
    })
}

/// Induced form in the chart `w = 1/z`: `-R(1/w)/w^2 - 2/w`, normalized.
pub fn induce_w_form(f: &RationalForm) -> Result<RationalForm, RationalError> {
    let inv = f.substitute_inverse()?;
    let minus_inv_w2 = RationalForm::new(
        Polynomial::constant(Complex64::new(-1.0, 0.0)),
        Polynomial::new(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]),
    )?;
    let minus_two_over_w = RationalForm::new(
        Polynomial::constant(Complex64::new(-2.0, 0.0)),
        Polynomial::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]),
    )?;
    inv.mul(&minus_inv_w2)?.add(&minus_two_over_w)
}

/// A meromorphic connection on the sphere: the defining form in the `z`
/// chart plus everything derived from it.
#[derive(Clone, Debug)]
pub struct SphereConnection {
    form_z: RationalForm,
    form_w: RationalForm,
    catalog_z: PoleCatalog,
    catalog_w: PoleCatalog,
    residue_infinity: Complex64,
    infinity_order: usize,
}

impl SphereConnection {
    pub fn new(form_z: RationalForm) -> Result<SphereConnection, SphereError> {
        SphereConnection::new_with(form_z, &Tolerances::default())
    }

    pub fn new_with(
        form_z: RationalForm,
        cfg: &Tolerances,
    ) -> Result<SphereConnection, SphereError> {
        let form_w = induce_w_form(&form_z)?;
        let catalog_z = build_catalog_with(&form_z, cfg)?;
        let catalog_w = build_catalog_with(&form_w, cfg)?;
        let origin = catalog_w
            .entries
            .iter()
            .find(|e| e.location.norm() <= 1e-9);
        let (residue_infinity, infinity_order) = match origin {
            Some(e) => (e.residue, e.order),
            None => (Complex64::new(0.0, 0.0), 0),
        };
        Ok(SphereConnection {
            form_z,
            form_w,
            catalog_z,
            catalog_w,
            residue_infinity,
            infinity_order,
        })
    }

    /// Convenience: parse the `z`-chart form from source text.
    pub fn parse(src: &str) -> Result<SphereConnection, crate::expr::ExprError> {
        let form = crate::expr::parse_form(src)?;
        SphereConnection::new(form).map_err(|e| match e {
            SphereError::Rational(r) => crate::expr::ExprError::Rational(r),
            SphereError::SwitchAtOrigin => unreachable!("construction never switches charts"),
        })
    }

    pub fn form(&self, chart: Chart) -> &RationalForm {
        match chart {
            Chart::Z => &self.form_z,
            Chart::W => &self.form_w,
        }
    }

    pub fn catalog(&self, chart: Chart) -> &PoleCatalog {
        match chart {
            Chart::Z => &self.catalog_z,
            Chart::W => &self.catalog_w,
        }
    }

    /// Residue of the induced form at `w = 0`, i.e. at the point at infinity.
    pub fn residue_at_infinity(&self) -> Complex64 {
        self.residue_infinity
    }

    pub fn infinity_order(&self) -> usize {
        self.infinity_order
    }

    /// Sum over all finite residues plus the residue at infinity, and the
    /// defect against the expected total `-2`.
    pub fn residue_sum_report(&self) -> (Complex64, f64) {
        let sum = self.catalog_z.residue_sum() + self.residue_infinity;
        let defect = (sum - Complex64::new(-2.0, 0.0)).norm();
        (sum, defect)
    }

    /// Maps a pole location seen in `chart` to its identity.
    pub fn pole_id_at(&self, chart: Chart, location: Complex64) -> Option<PoleId> {
        match chart {
            Chart::Z => self
                .catalog_z
                .nearest(location)
                .filter(|&(_, d)| d <= 1e-6)
                .map(|(k, _)| PoleId::Finite(k)),
            Chart::W => {
                if location.norm() <= 1e-9 {
                    return (self.infinity_order > 0).then_some(PoleId::Infinity);
                }
                self.catalog_z
                    .nearest(1.0 / location)
                    .filter(|&(_, d)| d <= 1e-6)
                    .map(|(k, _)| PoleId::Finite(k))
            }
        }
    }

    /// Real part of the residue for a pole id (finite or infinity).
    pub fn residue(&self, id: PoleId) -> Complex64 {
        match id {
            PoleId::Finite(k) => self.catalog_z.entries[k].residue,
            PoleId::Infinity => self.residue_infinity,
        }
    }

    /// JSON catalog: finite poles plus the infinity record.
    pub fn catalog_json(&self) -> Value {
        let mut poles = Vec::new();
        for e in &self.catalog_z.entries {
            let mut o = Value::object();
            o.push("re", Value::Float(e.location.re));
            o.push("im", Value::Float(e.location.im));
            o.push("order", Value::Int(e.order as i64));
            o.push("res_re", Value::Float(e.residue.re));
            o.push("res_im", Value::Float(e.residue.im));
            poles.push(o);
        }
        let mut inf = Value::object();
        inf.push("order", Value::Int(self.infinity_order as i64));
        inf.push("res_re", Value::Float(self.residue_infinity.re));
        inf.push("res_im", Value::Float(self.residue_infinity.im));
        let mut root = Value::object();
        root.push("poles", Value::Array(poles));
        root.push("infinity", inf);
        root
    }

    /// Catalog of the chart actually in use during integration.
    pub(crate) fn active_catalog(&self, chart: Chart) -> &PoleCatalog {
        self.catalog(chart)
    }
}

pub use crate::json::complex as complex_json;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_form;
    use crate::rational::{residue_at, Tolerances};
    use crate::rng::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn induced_form_of_zero() {
        // R = 0 -> R_w = -2/w
        let rw = induce_w_form(&RationalForm::zero()).unwrap();
        let expect = parse_form("-2/z").unwrap();
        assert!(rw.approx_eq(&expect, 1e-12));
    }

    #[test]
    fn induced_form_cancellation() {
        // R = -2/z -> R_w = 2/w - 2/w = 0
        let rw = induce_w_form(&parse_form("-2/z").unwrap()).unwrap();
        assert!(rw.is_zero());
        // R = -1/z -> R_w = -1/w
        let rw = induce_w_form(&parse_form("-1/z").unwrap()).unwrap();
        assert!(rw.approx_eq(&parse_form("-1/z").unwrap(), 1e-12));
    }

    #[test]
    fn induced_form_is_an_involution() {
        let mut rng = Rng::new(0x1de1);
        for _ in 0..20 {
            let dn = rng.below(4) as usize;
            let dd = 1 + rng.below(4) as usize;
            let num = Polynomial::new((0..=dn).map(|_| rng.complex_in_square(2.0)).collect());
            let den = Polynomial::from_roots(
                &(0..dd)
                    .map(|_| rng.complex_in_annulus(0.3, 2.0))
                    .collect::<Vec<_>>(),
                c(1.0, 0.0),
            );
            let Ok(f) = RationalForm::new(num, den) else {
                continue;
            };
            let back = induce_w_form(&induce_w_form(&f).unwrap()).unwrap();
            assert!(back.approx_eq(&f, 1e-9), "double transform drifted");
        }
    }

    #[test]
    fn residue_at_infinity_examples() {
        // R = 0 -> -2
        let conn = SphereConnection::new(RationalForm::zero()).unwrap();
        assert!((conn.residue_at_infinity() - c(-2.0, 0.0)).norm() < 1e-12);
        // R = -2/z -> 0
        let conn = SphereConnection::parse("-2/z").unwrap();
        assert!(conn.residue_at_infinity().norm() < 1e-12);
        // finite residues -1/2, -1/2 -> infinity -1
        let conn = SphereConnection::parse("(-z)/(z^2-1)").unwrap();
        assert!((conn.residue_at_infinity() - c(-1.0, 0.0)).norm() < 1e-10);
        let (sum, defect) = conn.residue_sum_report();
        assert!((sum - c(-2.0, 0.0)).norm() < 1e-10);
        assert!(defect < 1e-10);
    }

    #[test]
    fn residue_sum_simple_pole() {
        let conn = SphereConnection::parse("3/(z-2)").unwrap();
        assert_eq!(conn.catalog(Chart::Z).entries.len(), 1);
        let e = &conn.catalog(Chart::Z).entries[0];
        assert!((e.location - c(2.0, 0.0)).norm() < 1e-10);
        assert!((e.residue - c(3.0, 0.0)).norm() < 1e-10);
        assert!((conn.residue_at_infinity() - c(-5.0, 0.0)).norm() < 1e-10);
        let (_, defect) = conn.residue_sum_report();
        assert!(defect < 1e-10);
    }

    #[test]
    fn chart_change_round_trip() {
        let p = ChartPoint::with_velocity(Chart::Z, c(2.0, 0.0), c(1.0, 0.0));
        let q = to_other_chart(&p).unwrap();
        assert_eq!(q.chart, Chart::W);
        assert!((q.position - c(0.5, 0.0)).norm() < 1e-15);
        assert!((q.velocity.unwrap() - c(-0.25, 0.0)).norm() < 1e-15);
        let back = to_other_chart(&q).unwrap();
        assert!((back.position - p.position).norm() < 1e-15);
        assert!((back.velocity.unwrap() - p.velocity.unwrap()).norm() < 1e-15);
        // (Z, z=i, v=1) -> (W, w=-i, v=1)
        let r = to_other_chart(&ChartPoint::with_velocity(Chart::Z, c(0.0, 1.0), c(1.0, 0.0)))
            .unwrap();
        assert!((r.position - c(0.0, -1.0)).norm() < 1e-15);
        assert!((r.velocity.unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn chart_switch_at_origin_fails() {
        let p = ChartPoint::new(Chart::Z, c(0.0, 0.0));
        assert!(matches!(
            to_other_chart(&p),
            Err(SphereError::SwitchAtOrigin)
        ));
    }

    #[test]
    fn residues_are_chart_invariant() {
        let mut rng = Rng::new(0xc0de);
        let cfg = Tolerances::default();
        let mut tested = 0;
        while tested < 15 {
            let dd = 1 + rng.below(5) as usize;
            let mut poles: Vec<Complex64> = Vec::new();
            while poles.len() < dd {
                let cand = rng.complex_in_annulus(0.55, 1.9);
                if poles.iter().all(|p| (p - cand).norm() >= 0.12) {
                    poles.push(cand);
                }
            }
            let num = Polynomial::new(
                (0..dd).map(|_| rng.complex_in_square(1.5)).collect(),
            );
            let Ok(form) = RationalForm::new_with(num, Polynomial::from_roots(&poles, c(1.0, 0.0)), &cfg)
            else {
                continue;
            };
            if form.denominator().degree() != dd {
                continue;
            }
            let conn = SphereConnection::new(form).unwrap();
            for e in &conn.catalog(Chart::Z).entries {
                let w_res = residue_at(conn.form(Chart::W), 1.0 / e.location, e.order).unwrap();
                assert!(
                    (w_res - e.residue).norm() < 1e-9,
                    "pole {} residue z {} vs w {}",
                    e.location,
                    e.residue,
                    w_res
                );
            }
            tested += 1;
        }
    }

    #[test]
    fn random_connections_satisfy_residue_theorem() {
        let mut rng = Rng::new(0x51ab);
        let mut tested = 0;
        while tested < 25 {
            let dd = 1 + rng.below(8) as usize;
            let mut poles: Vec<Complex64> = Vec::new();
            while poles.len() < dd {
                let cand = rng.complex_in_square(2.0);
                if poles.iter().all(|p| (p - cand).norm() >= 0.1) {
                    poles.push(cand);
                }
            }
            let dn = rng.below(dd as u64 + 2) as usize;
            let num = Polynomial::new((0..=dn).map(|_| rng.complex_in_square(2.0)).collect());
            let Ok(form) = RationalForm::new(num, Polynomial::from_roots(&poles, c(1.0, 0.0)))
            else {
                continue;
            };
            if form.is_zero() {
                continue;
            }
            let conn = SphereConnection::new(form).unwrap();
            let (_, defect) = conn.residue_sum_report();
            assert!(defect < 1e-9, "defect {defect:.3e}");
            tested += 1;
        }
    }

    #[test]
    fn catalog_json_shape() {
        let conn = SphereConnection::parse("3/(z-2)").unwrap();
        let rendered = conn.catalog_json().render();
        assert!(rendered.starts_with("{\"poles\":[{\"re\":"));
        assert!(rendered.contains("\"infinity\":{\"order\":1"));
    }
}
