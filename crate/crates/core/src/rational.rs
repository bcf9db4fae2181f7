//! Complex polynomial and rational-function arithmetic, simultaneous root
//! finding, and residue extraction.
//!
//! Residues are computed by trapezoid-rule contour quadrature on a circle
//! kept away from the other poles; for simple poles the quadrature is
//! cross-checked against `num(p)/den'(p)`. Roots come from an Aberth-Ehrlich
//! simultaneous iteration; multiple roots are reported with a multiplicity
//! obtained by clustering.

use num_complex::Complex64;
use thiserror::Error;

/// Numeric knobs shared by normalization, root finding and quadrature.
/// The values below are the defaults used throughout; every entry can be
/// overridden through the `_with` variants of the public operations.
#[derive(Clone, Debug)]
pub struct Tolerances {
    /// Aberth stopping criterion on the relative correction size.
    pub root_step: f64,
    /// Residual acceptance scale: a root is good when `|p(root)|` is below
    /// this times the coefficient magnitude scale at the root.
    pub root_residual: f64,
    /// Iteration cap for the simultaneous root iteration.
    pub max_iterations: usize,
    /// Cluster radius used to merge nearby roots into one multiple root.
    pub cluster: f64,
    /// Cluster radius for removing common numerator/denominator roots.
    pub gcd_cluster: f64,
    /// Stopping tolerance for the node-doubling trapezoid quadrature.
    pub quadrature: f64,
    /// Relative magnitude below which trailing coefficients are dropped.
    pub trim: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root_step: 1e-13,
            root_residual: 1e-13,
            max_iterations: 200,
            cluster: 1e-8,
            gcd_cluster: 1e-10,
            quadrature: 1e-12,
            trim: 1e-13,
        }
    }
}

#[derive(Debug, Error)]
pub enum RationalError {
    #[error("denominator is identically zero after simplification")]
    ZeroDenominator,
    #[error("polynomial degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    DegreeOverflow(usize),
    #[error("root finding did not converge: best residual {residual:.3e}")]
    NoConvergence { residual: f64 },
    #[error("root finding requires degree >= 1")]
    ConstantPolynomial,
    #[error("two poles are closer than {0:.3e}; quadrature radius underflow")]
    RadiusUnderflow(f64),
}

/// Hard cap on degrees produced by arithmetic; keeps pathological inputs
/// (huge exponents) from hanging the root finder.
pub const MAX_DEGREE: usize = 512;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

// ---------------------------------------------------------------------------
// Polynomial
// ---------------------------------------------------------------------------

/// Dense complex polynomial, coefficients in ascending degree.
///
/// The zero polynomial is stored as `[0]`; otherwise the leading coefficient
/// is nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Polynomial {
        let mut p = Polynomial { coeffs };
        p.trim_exact();
        p
    }

    pub fn zero() -> Polynomial {
        Polynomial { coeffs: vec![ZERO] }
    }

    pub fn one() -> Polynomial {
        Polynomial { coeffs: vec![ONE] }
    }

    pub fn constant(c: Complex64) -> Polynomial {
        Polynomial::new(vec![c])
    }

    /// `lead * (z - r_1) * ... * (z - r_k)`.
    pub fn from_roots(roots: &[Complex64], lead: Complex64) -> Polynomial {
        let mut p = Polynomial::constant(lead);
        for &r in roots {
            p = &p * &Polynomial::new(vec![-r, ONE]);
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == ZERO
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Upper bound for `|p(z)|` from coefficient magnitudes; used as the
    /// backward-error scale in residual tests.
    pub fn eval_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * r + c.norm();
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.degree() == 0 {
            return Polynomial::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * (k as f64))
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn scale(&self, s: Complex64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Coefficient reversal: `rev(p)(w) = w^deg * p(1/w)`.
    pub fn reversed(&self) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Polynomial::new(coeffs)
    }

    /// Multiplies by `z^k`.
    pub fn shift_up(&self, k: usize) -> Polynomial {
        if self.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![ZERO; k];
        coeffs.extend_from_slice(&self.coeffs);
        Polynomial::new(coeffs)
    }

    /// Synthetic division by `(z - r)`, dropping the remainder.
    pub fn deflate_root(&self, r: Complex64) -> Polynomial {
        let n = self.coeffs.len();
        if n <= 1 {
            return Polynomial::zero();
        }
        let mut out = vec![ZERO; n - 1];
        let mut carry = self.coeffs[n - 1];
        for k in (0..n - 1).rev() {
            out[k] = carry;
            carry = self.coeffs[k] + carry * r;
        }
        Polynomial::new(out)
    }

    pub fn pow(&self, mut e: u32) -> Polynomial {
        let mut base = self.clone();
        let mut acc = Polynomial::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    fn trim_exact(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == ZERO {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(ZERO);
        }
    }

    /// Drops leading coefficients that are negligible relative to the largest
    /// one; cancellation in rational arithmetic leaves such dust behind.
    pub fn trim_relative(&self, eps: f64) -> Polynomial {
        let scale = self.max_coeff_norm();
        if scale == 0.0 {
            return Polynomial::zero();
        }
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && coeffs.last().unwrap().norm() <= eps * scale {
            coeffs.pop();
        }
        let coeffs = coeffs
            .into_iter()
            .map(|c| if c.norm() <= eps * scale { ZERO } else { c })
            .collect();
        Polynomial::new(coeffs)
    }
}

impl std::ops::Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![ZERO; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k] += c;
        }
        for (k, &c) in rhs.coeffs.iter().enumerate() {
            out[k] += c;
        }
        Polynomial::new(out)
    }
}

impl std::ops::Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![ZERO; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k] += c;
        }
        for (k, &c) in rhs.coeffs.iter().enumerate() {
            out[k] -= c;
        }
        Polynomial::new(out)
    }
}

impl std::ops::Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl std::ops::Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| -c).collect())
    }
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

/// All roots of `p` with multiplicities, Aberth-Ehrlich iteration.
///
/// `tol` bounds both the final relative correction and the accepted residual
/// scale `|p(root)| <= tol * eval_scale(root)`. Multiplicities come from
/// clustering; the cluster radius widens to the floating-point noise floor
/// near multiple roots, where the iterates necessarily stall on a small
/// circle around the true root.
pub fn poly_roots(
    p: &Polynomial,
    tol: f64,
) -> Result<Vec<(Complex64, usize)>, RationalError> {
    poly_roots_with(p, tol, &Tolerances::default())
}

pub fn poly_roots_with(
    p: &Polynomial,
    tol: f64,
    cfg: &Tolerances,
) -> Result<Vec<(Complex64, usize)>, RationalError> {
    if p.is_zero() || p.degree() == 0 {
        return Err(RationalError::ConstantPolynomial);
    }
    if p.degree() > MAX_DEGREE {
        return Err(RationalError::DegreeOverflow(p.degree()));
    }

    // Exact (or numerically exact) roots at the origin deflate directly.
    let scale = p.max_coeff_norm();
    let mut coeffs = p.coeffs().to_vec();
    let mut zeros_at_origin = 0usize;
    while coeffs.len() > 1 && coeffs[0].norm() <= 1e-14 * scale {
        coeffs.remove(0);
        zeros_at_origin += 1;
    }

    let mut raw: Vec<Complex64> = Vec::new();
    let reduced = Polynomial::new(coeffs);
    match reduced.degree() {
        0 => {}
        1 => raw.push(-reduced.coeffs()[0] / reduced.coeffs()[1]),
        2 => raw.extend(quadratic_roots(&reduced)),
        _ => raw.extend(aberth(&reduced, tol, cfg)?),
    }

    let mut clustered = cluster_roots(&raw, &reduced, cfg);
    if zeros_at_origin > 0 {
        clustered.push((ZERO, zeros_at_origin));
    }
    clustered.sort_by(|a, b| {
        (a.0.re, a.0.im)
            .partial_cmp(&(b.0.re, b.0.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(clustered)
}

fn quadratic_roots(p: &Polynomial) -> Vec<Complex64> {
    let (c, b, a) = (p.coeffs()[0], p.coeffs()[1], p.coeffs()[2]);
    let disc = (b * b - 4.0 * a * c).sqrt();
    // Pick the sign that avoids cancellation in -b +/- disc.
    let q = if (b + disc).norm() >= (b - disc).norm() {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    if q.norm() == 0.0 {
        return vec![ZERO, ZERO];
    }
    vec![q / a, c / q]
}

fn aberth(
    p: &Polynomial,
    tol: f64,
    cfg: &Tolerances,
) -> Result<Vec<Complex64>, RationalError> {
    let monic = p.scale(ONE / p.leading());
    let dmonic = monic.derivative();
    let n = monic.degree();

    // Initial guesses on a perturbed circle sized by the Cauchy bound.
    let bound = 1.0
        + monic.coeffs()[..n]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    let radius = bound.clamp(1e-3, 1e6);
    let mut guesses: Vec<Complex64> = (0..n)
        .map(|k| {
            let th = std::f64::consts::TAU * (k as f64 + 0.35) / n as f64 + 0.4;
            Complex64::from_polar(radius, th)
        })
        .collect();

    let step_tol = tol.max(cfg.root_step);
    let res_tol = tol.max(cfg.root_residual);
    let mut best_residual = f64::INFINITY;
    let mut stall = 0usize;
    let mut prev_max_step = f64::INFINITY;

    for _ in 0..cfg.max_iterations {
        let mut max_step: f64 = 0.0;
        let mut max_residual: f64 = 0.0;
        for k in 0..n {
            let g = guesses[k];
            let pv = monic.eval(g);
            max_residual = max_residual.max(pv.norm() / monic.eval_scale(g).max(1e-300));
            let dv = dmonic.eval(g);
            let newton = if dv.norm() < 1e-300 {
                // Stationary point: nudge off it.
                Complex64::new(1e-8 * (1.0 + g.norm()), 0.0)
            } else {
                pv / dv
            };
            let mut repulsion = ZERO;
            for (j, &other) in guesses.iter().enumerate() {
                if j != k {
                    let diff = g - other;
                    if diff.norm() > 1e-300 {
                        repulsion += ONE / diff;
                    }
                }
            }
            let denom = ONE - newton * repulsion;
            let delta = if denom.norm() < 1e-12 {
                newton
            } else {
                newton / denom
            };
            guesses[k] = g - delta;
            max_step = max_step.max(delta.norm() / guesses[k].norm().max(1.0));
        }
        best_residual = best_residual.min(max_residual);
        if max_step <= step_tol || max_residual <= res_tol {
            return Ok(guesses);
        }
        // Multiple roots stall at the evaluation noise floor; accept once the
        // steps stop shrinking and the residuals are at backward-error level.
        if max_step >= 0.7 * prev_max_step {
            stall += 1;
            if stall >= 12 && max_residual <= 1e-10 {
                return Ok(guesses);
            }
        } else {
            stall = 0;
        }
        prev_max_step = max_step;
    }

    // Converged far enough for downstream clustering despite hitting the cap?
    let worst = guesses
        .iter()
        .map(|&g| monic.eval(g).norm() / monic.eval_scale(g).max(1e-300))
        .fold(0.0, f64::max);
    if worst <= 1e-9 {
        return Ok(guesses);
    }
    Err(RationalError::NoConvergence { residual: worst })
}

/// Multiplicity detection by clustering.
///
/// An order-m root leaves the iterates stalled on a clump of radius about
/// `eps^(1/m)`, so a single fixed radius cannot both merge true multiples and
/// keep nearby distinct roots apart. We scan link radii from coarse to fine
/// and accept the first clustering whose claimed multiplicities are confirmed
/// by the derivatives of `p` vanishing at the centroid through order `m - 1`.
fn cluster_roots(
    raw: &[Complex64],
    p: &Polynomial,
    cfg: &Tolerances,
) -> Vec<(Complex64, usize)> {
    let mut ladder = vec![5e-3, 1e-3, 1e-4, 1e-5, 1e-6, cfg.cluster];
    ladder.retain(|&r| r >= cfg.cluster);
    ladder.push(cfg.cluster);
    ladder.dedup();

    let mut derivs: Vec<Polynomial> = vec![p.clone()];
    for _ in 0..raw.len() {
        derivs.push(derivs.last().unwrap().derivative());
    }

    for (level, &radius) in ladder.iter().enumerate() {
        let clusters = link_components(raw, radius);
        let last_level = level == ladder.len() - 1;
        let verified = clusters.iter().all(|members| {
            let m = members.len();
            if m == 1 {
                return true;
            }
            let c = centroid(members);
            (1..m).all(|j| {
                let scale = derivs[j].eval_scale(c).max(1e-300);
                derivs[j].eval(c).norm() <= 1e-4 * scale
            })
        });
        if verified || last_level {
            return clusters
                .into_iter()
                .map(|members| (centroid(&members), members.len()))
                .collect();
        }
    }
    unreachable!("ladder always contains at least the base level");
}

/// Connected components under the relation `|a - b| <= radius`.
fn link_components(raw: &[Complex64], radius: f64) -> Vec<Vec<Complex64>> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (raw[i] - raw[j]).norm() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: Vec<Vec<Complex64>> = vec![Vec::new(); n];
    for (i, &z) in raw.iter().enumerate() {
        let r = find(&mut parent, i);
        groups[r].push(z);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn centroid(zs: &[Complex64]) -> Complex64 {
    zs.iter().sum::<Complex64>() / zs.len() as f64
}

// ---------------------------------------------------------------------------
// RationalForm
// ---------------------------------------------------------------------------

/// A rational function `P(z)/Q(z)`, normalized: no common roots within the
/// clustering tolerance, monic denominator, zero stored as `0/1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalForm {
    num: Polynomial,
    den: Polynomial,
}

impl RationalForm {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<RationalForm, RationalError> {
        RationalForm::new_with(num, den, &Tolerances::default())
    }

    pub fn new_with(
        num: Polynomial,
        den: Polynomial,
        cfg: &Tolerances,
    ) -> Result<RationalForm, RationalError> {
        let mut num = num.trim_relative(cfg.trim);
        let mut den = den.trim_relative(cfg.trim);
        if den.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(RationalForm {
                num: Polynomial::zero(),
                den: Polynomial::one(),
            });
        }
        if num.degree().max(den.degree()) > MAX_DEGREE {
            return Err(RationalError::DegreeOverflow(num.degree().max(den.degree())));
        }

        // Approximate gcd removal: pair up root clusters of the numerator and
        // denominator and deflate matched pairs.
        if num.degree() >= 1 && den.degree() >= 1 {
            let nroots = poly_roots_with(&num, cfg.root_step, cfg)?;
            let droots = poly_roots_with(&den, cfg.root_step, cfg)?;
            let mut navail: Vec<(Complex64, usize)> = nroots;
            for (dr, dmult) in droots {
                for entry in navail.iter_mut() {
                    if (entry.0 - dr).norm() <= cfg.gcd_cluster && entry.1 > 0 {
                        let shared = entry.1.min(dmult);
                        for _ in 0..shared {
                            num = num.deflate_root(entry.0);
                            den = den.deflate_root(dr);
                        }
                        entry.1 -= shared;
                        break;
                    }
                }
            }
            num = num.trim_relative(cfg.trim);
            den = den.trim_relative(cfg.trim);
            if num.is_zero() {
                return Ok(RationalForm {
                    num: Polynomial::zero(),
                    den: Polynomial::one(),
                });
            }
        }

        let lead = den.leading();
        Ok(RationalForm {
            num: num.scale(ONE / lead),
            den: den.scale(ONE / lead),
        })
    }

    pub fn zero() -> RationalForm {
        RationalForm {
            num: Polynomial::zero(),
            den: Polynomial::one(),
        }
    }

    pub fn constant(c: Complex64) -> RationalForm {
        RationalForm {
            num: Polynomial::constant(c),
            den: Polynomial::one(),
        }
    }

    pub fn from_poly(p: Polynomial) -> RationalForm {
        RationalForm {
            num: p,
            den: Polynomial::one(),
        }
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }

    /// Evaluation that reports proximity to a pole instead of overflowing.
    pub fn eval_checked(&self, z: Complex64) -> Option<Complex64> {
        let d = self.den.eval(z);
        if d.norm() < 1e-300 {
            return None;
        }
        let v = self.num.eval(z) / d;
        v.is_finite().then_some(v)
    }

    pub fn add(&self, rhs: &RationalForm) -> Result<RationalForm, RationalError> {
        RationalForm::new(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }

    pub fn sub(&self, rhs: &RationalForm) -> Result<RationalForm, RationalError> {
        RationalForm::new(
            &(&self.num * &rhs.den) - &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }

    pub fn mul(&self, rhs: &RationalForm) -> Result<RationalForm, RationalError> {
        RationalForm::new(&self.num * &rhs.num, &self.den * &rhs.den)
    }

    pub fn div(&self, rhs: &RationalForm) -> Result<RationalForm, RationalError> {
        if rhs.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        RationalForm::new(&self.num * &rhs.den, &self.den * &rhs.num)
    }

    pub fn neg(&self) -> RationalForm {
        RationalForm {
            num: -&self.num,
            den: self.den.clone(),
        }
    }

    pub fn pow(&self, e: u32) -> Result<RationalForm, RationalError> {
        if self.num.degree().max(self.den.degree()) * (e as usize) > MAX_DEGREE {
            return Err(RationalError::DegreeOverflow(
                self.num.degree().max(self.den.degree()) * e as usize,
            ));
        }
        RationalForm::new(self.num.pow(e), self.den.pow(e))
    }

    /// `f(1/w)` as a rational function of `w`.
    pub fn substitute_inverse(&self) -> Result<RationalForm, RationalError> {
        let dp = self.num.degree();
        let dq = self.den.degree();
        let m = dp.max(dq);
        RationalForm::new(
            self.num.reversed().shift_up(m - dp),
            self.den.reversed().shift_up(m - dq),
        )
    }

    /// Coefficient-wise comparison of two normalized forms.
    pub fn approx_eq(&self, rhs: &RationalForm, tol: f64) -> bool {
        poly_approx_eq(&self.num, &rhs.num, tol) && poly_approx_eq(&self.den, &rhs.den, tol)
    }
}

fn poly_approx_eq(a: &Polynomial, b: &Polynomial, tol: f64) -> bool {
    if a.degree() != b.degree() {
        return false;
    }
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .all(|(x, y)| (x - y).norm() <= tol)
}

// ---------------------------------------------------------------------------
// Residues
// ---------------------------------------------------------------------------

/// One pole of a rational 1-form: location, order and residue.
#[derive(Clone, Debug)]
pub struct PoleEntry {
    pub location: Complex64,
    pub order: usize,
    pub residue: Complex64,
}

/// All finite poles of a form, locations pairwise distinct beyond the
/// clustering tolerance, orders summing to the denominator degree.
#[derive(Clone, Debug, Default)]
pub struct PoleCatalog {
    pub entries: Vec<PoleEntry>,
}

impl PoleCatalog {
    pub fn residue_sum(&self) -> Complex64 {
        self.entries.iter().map(|e| e.residue).sum()
    }

    pub fn nearest(&self, z: Complex64) -> Option<(usize, f64)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(k, e)| (k, (e.location - z).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    }
}

/// Residue of `f` at the pole `p` of the given order.
///
/// Contour quadrature on a circle of radius `min(1, half the distance to the
/// nearest other pole)`; trapezoid nodes double from 64 until two successive
/// estimates agree to the quadrature tolerance. For simple poles the result
/// is cross-checked against `num(p)/den'(p)`.
pub fn residue_at(
    f: &RationalForm,
    p: Complex64,
    order: usize,
) -> Result<Complex64, RationalError> {
    residue_at_with(f, p, order, &Tolerances::default())
}

pub fn residue_at_with(
    f: &RationalForm,
    p: Complex64,
    order: usize,
    cfg: &Tolerances,
) -> Result<Complex64, RationalError> {
    let radius = if f.denominator().degree() >= 1 {
        let poles = poly_roots_with(f.denominator(), cfg.root_step, cfg)?;
        quadrature_radius(p, poles.iter().map(|&(q, _)| q), cfg)?
    } else {
        1.0
    };
    let value = integrate_circle(f, p, radius, cfg);
    if order == 1 {
        let direct = f.numerator().eval(p) / f.denominator().derivative().eval(p);
        debug_assert!(
            (value - direct).norm() <= 1e-6 * (1.0 + direct.norm()),
            "quadrature {value} vs direct {direct} at {p}"
        );
    }
    Ok(value)
}

fn quadrature_radius(
    p: Complex64,
    others: impl Iterator<Item = Complex64>,
    cfg: &Tolerances,
) -> Result<f64, RationalError> {
    let mut nearest = f64::INFINITY;
    for q in others {
        let d = (q - p).norm();
        if d > cfg.cluster {
            nearest = nearest.min(d);
        }
    }
    let radius = (nearest / 2.0).min(1.0);
    if radius < 1e-12 {
        return Err(RationalError::RadiusUnderflow(radius));
    }
    Ok(radius)
}

/// `(1/2 pi i) . contour integral` by the trapezoid rule with node doubling;
/// geometric convergence because the circle stays clear of the other poles.
fn integrate_circle(f: &RationalForm, p: Complex64, radius: f64, cfg: &Tolerances) -> Complex64 {
    let mut n = 64usize;
    let mut prev = trapezoid_estimate(f, p, radius, n);
    loop {
        n *= 2;
        let cur = trapezoid_estimate(f, p, radius, n);
        if (cur - prev).norm() < cfg.quadrature * cur.norm().max(1.0) || n >= (1 << 16) {
            return cur;
        }
        prev = cur;
    }
}

fn trapezoid_estimate(f: &RationalForm, p: Complex64, radius: f64, n: usize) -> Complex64 {
    let mut acc = ZERO;
    for k in 0..n {
        let th = std::f64::consts::TAU * k as f64 / n as f64;
        let dir = Complex64::from_polar(1.0, th);
        acc += f.eval(p + radius * dir) * dir;
    }
    acc * radius / n as f64
}

/// Catalog of all finite poles of `f`, with orders and residues.
pub fn build_catalog(f: &RationalForm) -> Result<PoleCatalog, RationalError> {
    build_catalog_with(f, &Tolerances::default())
}

pub fn build_catalog_with(
    f: &RationalForm,
    cfg: &Tolerances,
) -> Result<PoleCatalog, RationalError> {
    if f.is_zero() || f.denominator().degree() == 0 {
        return Ok(PoleCatalog::default());
    }
    let poles = poly_roots_with(f.denominator(), cfg.root_step, cfg)?;
    let mut entries = Vec::with_capacity(poles.len());
    for &(p, order) in &poles {
        let radius = quadrature_radius(p, poles.iter().map(|&(q, _)| q), cfg)?;
        let residue = integrate_circle(f, p, radius, cfg);
        entries.push(PoleEntry {
            location: p,
            order,
            residue,
        });
    }
    Ok(PoleCatalog { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polynomial_basics() {
        let p = Polynomial::new(vec![c(-1.0, 0.0), ZERO, ONE]); // z^2 - 1
        assert_eq!(p.degree(), 2);
        assert_eq!(p.eval(c(2.0, 0.0)), c(3.0, 0.0));
        let d = p.derivative();
        assert_eq!(d.coeffs(), &[ZERO, c(2.0, 0.0)]);
        let q = p.deflate_root(ONE); // should be z + 1
        assert!(poly_approx_eq(
            &q,
            &Polynomial::new(vec![ONE, ONE]),
            1e-14
        ));
    }

    #[test]
    fn roots_of_z2_plus_1() {
        let p = Polynomial::new(vec![ONE, ZERO, ONE]);
        let roots = poly_roots(&p, 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        for (r, m) in roots {
            assert_eq!(m, 1);
            assert!((r.norm() - 1.0).abs() < 1e-12);
            assert!(r.re.abs() < 1e-12);
        }
    }

    #[test]
    fn double_root_clusters() {
        // (z - 1)^2 = 1 - 2z + z^2
        let p = Polynomial::new(vec![ONE, c(-2.0, 0.0), ONE]);
        let roots = poly_roots(&p, 1e-12).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].1, 2);
        assert!((roots[0].0 - ONE).norm() < 1e-6);
    }

    #[test]
    fn triple_root_via_aberth() {
        // (z - 2)^3
        let p = Polynomial::from_roots(&[c(2.0, 0.0); 3], ONE);
        let roots = poly_roots(&p, 1e-12).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].1, 3);
        assert!((roots[0].0 - c(2.0, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn seeded_degree_8_recovery() {
        let mut rng = Rng::new(0xfeed);
        for _ in 0..10 {
            let mut seeds: Vec<Complex64> = Vec::new();
            while seeds.len() < 8 {
                let cand = rng.complex_in_square(2.0);
                if seeds.iter().all(|s| (s - cand).norm() >= 0.1) {
                    seeds.push(cand);
                }
            }
            let p = Polynomial::from_roots(&seeds, ONE);
            let roots = poly_roots(&p, 1e-12).unwrap();
            assert_eq!(roots.len(), 8);
            for s in &seeds {
                let found = roots.iter().map(|(r, _)| (r - s).norm()).fold(f64::MAX, f64::min);
                assert!(found < 1e-9, "seed {s} recovered to {found:.3e}");
            }
        }
    }

    #[test]
    fn zero_roots_deflate() {
        // z^3 + z^2 = z^2 (z + 1)
        let p = Polynomial::new(vec![ZERO, ZERO, ONE, ONE]);
        let roots = poly_roots(&p, 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        let zero = roots.iter().find(|(r, _)| r.norm() < 1e-12).unwrap();
        assert_eq!(zero.1, 2);
        let other = roots.iter().find(|(r, _)| (r + ONE).norm() < 1e-12).unwrap();
        assert_eq!(other.1, 1);
    }

    #[test]
    fn normalization_removes_common_roots() {
        // (z - 1)(z + 2) / (z - 1)(z + 3)  ->  (z + 2)/(z + 3)
        let num = Polynomial::from_roots(&[ONE, c(-2.0, 0.0)], c(2.0, 0.0));
        let den = Polynomial::from_roots(&[ONE, c(-3.0, 0.0)], c(4.0, 0.0));
        let f = RationalForm::new(num, den).unwrap();
        assert_eq!(f.numerator().degree(), 1);
        assert_eq!(f.denominator().degree(), 1);
        // denominator monic
        assert!((f.denominator().leading() - ONE).norm() < 1e-14);
        let probe = c(0.3, 0.7);
        let expect = 2.0 * (probe + 2.0) / (4.0 * (probe + 3.0));
        assert!((f.eval(probe) - expect).norm() < 1e-12);
    }

    #[test]
    fn zero_denominator_rejected() {
        let err = RationalForm::new(Polynomial::one(), Polynomial::zero());
        assert!(matches!(err, Err(RationalError::ZeroDenominator)));
    }

    #[test]
    fn residue_simple_pole_read_off() {
        // 3/(z - 2), residue 3 at 2
        let f = RationalForm::new(
            Polynomial::constant(c(3.0, 0.0)),
            Polynomial::new(vec![c(-2.0, 0.0), ONE]),
        )
        .unwrap();
        let r = residue_at(&f, c(2.0, 0.0), 1).unwrap();
        assert!((r - c(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn residue_double_pole_no_principal_term() {
        // 1/z^2 has no 1/z term
        let f = RationalForm::new(Polynomial::one(), Polynomial::new(vec![ZERO, ZERO, ONE]))
            .unwrap();
        let r = residue_at(&f, ZERO, 2).unwrap();
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn residue_double_pole_laurent() {
        // z/(z-1)^2 = 1/(z-1) + 1/(z-1)^2, residue 1 at 1
        let f = RationalForm::new(
            Polynomial::new(vec![ZERO, ONE]),
            Polynomial::from_roots(&[ONE, ONE], ONE),
        )
        .unwrap();
        let r = residue_at(&f, ONE, 2).unwrap();
        assert!((r - ONE).norm() < 1e-11);
    }

    #[test]
    fn residue_radius_independent() {
        let f = RationalForm::new(
            Polynomial::new(vec![ONE, c(0.5, 0.25)]),
            Polynomial::from_roots(&[ONE, c(-1.0, 0.5)], ONE),
        )
        .unwrap();
        let cfg = Tolerances::default();
        let a = integrate_circle(&f, ONE, 0.3, &cfg);
        let b = integrate_circle(&f, ONE, 0.7, &cfg);
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn catalog_partial_fractions() {
        // (-1/2)/(z-1) + (-1/2)/(z+1) = -z/(z^2 - 1)
        let f = RationalForm::new(
            Polynomial::new(vec![ZERO, c(-1.0, 0.0)]),
            Polynomial::new(vec![c(-1.0, 0.0), ZERO, ONE]),
        )
        .unwrap();
        let cat = build_catalog(&f).unwrap();
        assert_eq!(cat.entries.len(), 2);
        for e in &cat.entries {
            assert_eq!(e.order, 1);
            assert!((e.residue - c(-0.5, 0.0)).norm() < 1e-11);
        }
        assert!((cat.residue_sum() + ONE).norm() < 1e-10);
    }

    #[test]
    fn catalog_zero_form_empty() {
        let cat = build_catalog(&RationalForm::zero()).unwrap();
        assert!(cat.entries.is_empty());
    }

    #[test]
    fn catalog_orders_sum_to_denominator_degree() {
        let den = &Polynomial::from_roots(&[ONE, ONE], ONE)
            * &Polynomial::from_roots(&[c(-2.0, 0.0)], ONE);
        let f = RationalForm::new(Polynomial::new(vec![ONE, ONE]), den).unwrap();
        let cat = build_catalog(&f).unwrap();
        let total: usize = cat.entries.iter().map(|e| e.order).sum();
        assert_eq!(total, f.denominator().degree());
    }

    #[test]
    fn seeded_residue_sums_match_partial_fractions() {
        // Build sum of c_k/(z - p_k) explicitly; catalog residues must
        // recover each c_k and their sum.
        let mut rng = Rng::new(0xabc1);
        for _ in 0..10 {
            let deg = 2 + rng.below(6) as usize;
            let mut poles: Vec<Complex64> = Vec::new();
            while poles.len() < deg {
                let cand = rng.complex_in_square(2.0);
                if poles.iter().all(|p| (p - cand).norm() >= 0.15) {
                    poles.push(cand);
                }
            }
            let coeffs: Vec<Complex64> =
                (0..deg).map(|_| rng.complex_in_annulus(0.2, 2.0)).collect();
            let mut f = RationalForm::zero();
            for (p, cv) in poles.iter().zip(&coeffs) {
                let term = RationalForm::new(
                    Polynomial::constant(*cv),
                    Polynomial::new(vec![-p, ONE]),
                )
                .unwrap();
                f = f.add(&term).unwrap();
            }
            let cat = build_catalog(&f).unwrap();
            assert_eq!(cat.entries.len(), deg);
            let want: Complex64 = coeffs.iter().sum();
            assert!((cat.residue_sum() - want).norm() < 1e-9);
            for (p, cv) in poles.iter().zip(&coeffs) {
                let (idx, d) = cat.nearest(*p).unwrap();
                assert!(d < 1e-8);
                assert!((cat.entries[idx].residue - cv).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn quadrature_matches_derivative_formula_on_simple_poles() {
        let mut rng = Rng::new(0x5ee);
        for _ in 0..20 {
            let p0 = rng.complex_in_annulus(0.3, 2.0);
            let p1 = rng.complex_in_annulus(0.3, 2.0);
            if (p0 - p1).norm() < 0.2 {
                continue;
            }
            let f = RationalForm::new(
                Polynomial::new(vec![rng.complex_in_square(1.0), ONE]),
                Polynomial::from_roots(&[p0, p1], ONE),
            )
            .unwrap();
            let quad = residue_at(&f, p0, 1).unwrap();
            let direct = f.numerator().eval(p0) / f.denominator().derivative().eval(p0);
            assert!((quad - direct).norm() < 1e-10);
        }
    }
}
