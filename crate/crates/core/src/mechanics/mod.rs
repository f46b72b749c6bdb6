//! Mechanical systems on an algebroid: Lagrangians, Finsler functions,
//! external forces, the forms and semisprays they induce, and the associated
//! connections.
//!
//! A semispray is stored through its vertical coefficient
//! `Avert^a = −2(G^a − ¼F^a)`; its horizontal coefficient is always
//! `(g^a_b∘h) y^b`.

mod forms;
mod semispray;

pub use forms::{
    cartan_two_path, energy, energy_field, poincare_cartan_omega, poincare_cartan_theta, theta_field,
    verify_cartan_equation,
};
pub use semispray::{
    canonical_semispray, canonical_spray, connection_from_semispray, euler_lagrange_covector, ring_connection,
    ring_curvature, ring_curvature_printed, spray_deviation, spray_deviation_via_bracket, twist_tensor,
};

use std::sync::Arc;

use crate::algebroid::{GHMorphism, GeneralizedLieAlgebroid, SamplePlan};
use crate::error::{Error, Result};
use crate::linalg;
use crate::prolongation::{apply_structure, Basis, ProlongationSection, RhoEtaConnection, StructureKind};
use crate::smoothfn::{Field, FnField, Jet, Point, SmoothMap};

/// A Lagrangian `L(x, y)`.
#[derive(Clone)]
pub struct Lagrangian {
    f: Arc<dyn Field>,
    m: usize,
    r: usize,
}

impl std::fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Lagrangian(m={}, r={})", self.m, self.r)
    }
}

impl Lagrangian {
    pub fn new(map: SmoothMap) -> Result<Lagrangian> {
        if map.arity_out() != 1 {
            return Err(Error::Dimension {
                what: "lagrangian".into(),
                expected: 1,
                got: map.arity_out(),
            });
        }
        let (m, r) = (map.m(), map.r());
        Ok(Lagrangian {
            f: Arc::new(map),
            m,
            r,
        })
    }

    pub fn parse(m: usize, r: usize, src: &str) -> Result<Lagrangian> {
        Lagrangian::new(SmoothMap::parse(m, r, &[src])?)
    }

    pub fn from_field(m: usize, r: usize, f: Arc<dyn Field>) -> Lagrangian {
        assert_eq!(f.dim(), 1, "lagrangian field must be scalar");
        Lagrangian { f, m, r }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn field(&self) -> &Arc<dyn Field> {
        &self.f
    }

    /// `L` at `p`, as a jet of order `p.order()`.
    pub fn jet(&self, p: &Point) -> Result<Jet> {
        Ok(self.f.jets(p)?.remove(0))
    }
}

/// `(L, L_i, L_a, L_ib, L_ab)` at one state; `L_ib` is stored `[i*r + b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianJets {
    pub l: f64,
    pub li: Vec<f64>,
    pub la: Vec<f64>,
    pub lib: Vec<f64>,
    pub lab: Vec<f64>,
}

pub fn lagrangian_jets(l: &Lagrangian, state: &[f64]) -> Result<LagrangianJets> {
    let (m, r) = (l.m, l.r);
    let j = l.jet(&Point::new(state, 2))?;
    Ok(LagrangianJets {
        l: j.value(),
        li: (0..m).map(|i| j.first(i)).collect(),
        la: (0..r).map(|a| j.first(m + a)).collect(),
        lib: (0..m * r).map(|k| j.second(k / r, m + k % r)).collect(),
        lab: (0..r * r).map(|k| j.second(m + k / r, m + k % r)).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularity {
    pub regular: bool,
    pub det: f64,
    pub pivot_ratio: f64,
}

/// Rank test of `L_ab` by pivoted elimination; regular when the pivot ratio
/// exceeds `tol`.
pub fn check_regularity(l: &Lagrangian, state: &[f64], tol: f64) -> Result<Regularity> {
    let lab = lagrangian_jets(l, state)?.lab;
    let (det, piv) = linalg::pivots(&lab, l.r);
    let ratio = linalg::pivot_ratio(&piv);
    Ok(Regularity {
        regular: ratio > tol,
        det,
        pivot_ratio: ratio,
    })
}

/// `L̃^{ab}`, the inverse of `L_ab`.
pub fn hessian_inverse(l: &Lagrangian, state: &[f64]) -> Result<Vec<f64>> {
    linalg::inverse(&lagrangian_jets(l, state)?.lab, l.r)
}

/// A Finsler fundamental function `F(x, y)`.
#[derive(Clone, Debug)]
pub struct FinslerFunction {
    map: SmoothMap,
}

impl FinslerFunction {
    pub fn new(map: SmoothMap) -> Result<FinslerFunction> {
        if map.arity_out() != 1 {
            return Err(Error::Dimension {
                what: "finsler function".into(),
                expected: 1,
                got: map.arity_out(),
            });
        }
        Ok(FinslerFunction { map })
    }

    pub fn parse(m: usize, r: usize, src: &str) -> Result<FinslerFunction> {
        FinslerFunction::new(SmoothMap::parse(m, r, &[src])?)
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    /// The Lagrangian `F²`.
    pub fn lagrangian(&self) -> Lagrangian {
        let f = self.map.clone();
        let field = FnField::shared(1, move |p| {
            let v = f.jets(p)?.remove(0);
            Ok(vec![&v * &v])
        });
        Lagrangian::from_field(self.map.m(), self.map.r(), field)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinslerReport {
    /// Max `|y^a ∂F/∂y^a − F|`.
    pub euler_residual: f64,
    /// Smallest pivot of unpivoted elimination on the Hessian of `F²`.
    pub min_pivot: f64,
    /// Max `|F(x, λy) − λF(x, y)|` for `λ ∈ {0.5, 2}`.
    pub scaling_residual: f64,
}

impl FinslerReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.euler_residual <= tol && self.scaling_residual <= tol && self.min_pivot > 0.0
    }
}

fn symmetric_min_pivot(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut min = f64::INFINITY;
    for k in 0..n {
        let d = m[k * n + k];
        min = min.min(d);
        if d <= 0.0 {
            return min;
        }
        for i in k + 1..n {
            let f = m[i * n + k] / d;
            for c in k..n {
                m[i * n + c] -= f * m[k * n + c];
            }
        }
    }
    min
}

pub fn check_finsler_axioms(f: &FinslerFunction, plan: &SamplePlan) -> Result<FinslerReport> {
    let (m, r) = (f.map.m(), f.map.r());
    let l2 = f.lagrangian();
    let mut rep = FinslerReport {
        euler_residual: 0.0,
        min_pivot: f64::INFINITY,
        scaling_residual: 0.0,
    };
    let mut plan = plan.clone();
    plan.exclude_zero_fiber = true;
    for s in plan.samples(m, r) {
        let j = f.map.jets(&Point::new(&s, 1))?.remove(0);
        let euler: f64 = (0..r).map(|a| s[m + a] * j.first(m + a)).sum::<f64>() - j.value();
        rep.euler_residual = rep.euler_residual.max(euler.abs());
        let lab = lagrangian_jets(&l2, &s)?.lab;
        rep.min_pivot = rep.min_pivot.min(symmetric_min_pivot(&lab, r));
        for lam in [0.5, 2.0] {
            let mut t = s.clone();
            t[m..].iter_mut().for_each(|v| *v *= lam);
            let d = f.map.eval(&t)?[0] - lam * j.value();
            rep.scaling_residual = rep.scaling_residual.max(d.abs());
        }
    }
    Ok(rep)
}

/// An external force `F^a(x, y)`.
#[derive(Clone, Debug)]
pub struct ExternalForce {
    map: Option<SmoothMap>,
    r: usize,
}

impl ExternalForce {
    pub fn zero(r: usize) -> ExternalForce {
        ExternalForce { map: None, r }
    }

    pub fn new(map: SmoothMap) -> ExternalForce {
        let r = map.arity_out();
        ExternalForce { map: Some(map), r }
    }

    pub fn is_zero(&self) -> bool {
        self.map.is_none()
    }

    pub fn map(&self) -> Option<&SmoothMap> {
        self.map.as_ref()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn jets(&self, p: &Point) -> Result<Vec<Jet>> {
        match &self.map {
            Some(f) => f.jets(p),
            None => Ok(vec![p.zero(); self.r]),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Payload {
    Connection(RhoEtaConnection),
    Lagrange(Lagrangian),
    Finsler(FinslerFunction),
}

/// An algebroid with a `(g, h)` morphism, an external force and optionally a
/// connection, Lagrangian or Finsler payload.
#[derive(Clone, Debug)]
pub struct MechanicalSystem {
    pub algebroid: GeneralizedLieAlgebroid,
    pub gh: GHMorphism,
    pub fe: ExternalForce,
    pub payload: Option<Payload>,
}

impl MechanicalSystem {
    pub fn new(
        algebroid: GeneralizedLieAlgebroid,
        gh: GHMorphism,
        fe: ExternalForce,
        payload: Option<Payload>,
    ) -> Result<MechanicalSystem> {
        let (m, r) = (algebroid.m(), algebroid.r());
        let dim = |what: &str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::Dimension {
                    what: what.into(),
                    expected,
                    got,
                })
            }
        };
        dim("external force", r, fe.r)?;
        if let Some(f) = &fe.map {
            dim("external force inputs", m + r, f.arity_in())?;
        }
        if let GHMorphism::Explicit { g, .. } = &gh {
            dim("g", r * r, g.arity_out())?;
            dim("g inputs", m, g.m())?;
        }
        match &payload {
            Some(Payload::Connection(c)) => dim("connection", r, c.r())?,
            Some(Payload::Lagrange(l)) => {
                dim("lagrangian base", m, l.m)?;
                dim("lagrangian fiber", r, l.r)?;
            }
            Some(Payload::Finsler(f)) => {
                dim("finsler base", m, f.map.m())?;
                dim("finsler fiber", r, f.map.r())?;
            }
            None => {}
        }
        Ok(MechanicalSystem {
            algebroid,
            gh,
            fe,
            payload,
        })
    }

    pub fn m(&self) -> usize {
        self.algebroid.m()
    }

    pub fn r(&self) -> usize {
        self.algebroid.r()
    }

    /// The Lagrangian of a Lagrange payload, or `F²` for a Finsler payload.
    pub fn lagrangian(&self) -> Option<Lagrangian> {
        match &self.payload {
            Some(Payload::Lagrange(l)) => Some(l.clone()),
            Some(Payload::Finsler(f)) => Some(f.lagrangian()),
            _ => None,
        }
    }

    /// The canonical semispray of a Lagrangian payload, or the canonical spray
    /// of a connection payload.
    pub fn semispray(&self) -> Result<SemisprayField> {
        if let Some(l) = self.lagrangian() {
            return Ok(canonical_semispray(&l, &self.gh, &self.algebroid, &self.fe));
        }
        match &self.payload {
            Some(Payload::Connection(c)) => Ok(canonical_spray(c, &self.gh, &self.algebroid)),
            _ => Err(Error::MissingPayload("semispray".into())),
        }
    }

    /// The payload connection, or the one induced by the canonical semispray.
    pub fn connection(&self) -> Result<RhoEtaConnection> {
        match &self.payload {
            Some(Payload::Connection(c)) => Ok(c.clone()),
            Some(_) => Ok(connection_from_semispray(&self.semispray()?, &self.gh, &self.algebroid)),
            None => Err(Error::MissingPayload("connection".into())),
        }
    }

    pub fn energy_field(&self) -> Option<Arc<dyn Field>> {
        self.lagrangian().map(|l| energy_field(&l, &self.gh, &self.algebroid))
    }
}

/// A semispray through its vertical coefficient `Avert`.
#[derive(Clone)]
pub struct SemisprayField {
    avert: Arc<dyn Field>,
    r: usize,
}

impl std::fmt::Debug for SemisprayField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SemisprayField(r={})", self.r)
    }
}

impl SemisprayField {
    pub fn new(r: usize, avert: Arc<dyn Field>) -> SemisprayField {
        assert_eq!(avert.dim(), r, "semispray field must have r outputs");
        SemisprayField { avert, r }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn avert(&self) -> &Arc<dyn Field> {
        &self.avert
    }

    pub fn values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.avert.values(state)
    }

    /// The section `(ĝ y) ∂̃ + Avert ∂̇`.
    pub fn section(&self, alg: &GeneralizedLieAlgebroid, gh: &GHMorphism) -> ProlongationSection {
        let r = self.r;
        let (alg, gh, av) = (alg.clone(), gh.clone(), self.avert.clone());
        let coef = FnField::shared(2 * r, move |p| {
            let f = Frame::at(&alg, &gh, p)?;
            let mut out = f.z;
            out.extend(av.jets(p)?);
            Ok(out)
        });
        ProlongationSection::from_field(r, coef, Basis::Natural)
    }
}

/// Max `|J(S) − C|` over samples.
pub fn check_semispray_property(
    s: &SemisprayField,
    alg: &GeneralizedLieAlgebroid,
    gh: &GHMorphism,
    plan: &SamplePlan,
) -> Result<f64> {
    let r = alg.r();
    let js = apply_structure(
        StructureKind::AlmostTangent,
        alg,
        &RhoEtaConnection::zero(r),
        Some(gh),
        &s.section(alg, gh),
    )?;
    let c = ProlongationSection::liouville(r);
    let mut worst = 0.0f64;
    for st in plan.samples(alg.m(), r) {
        let (z1, y1) = js.values(&st)?;
        let (z2, y2) = c.values(&st)?;
        for (a, b) in z1.iter().chain(&y1).zip(z2.iter().chain(&y2)) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Geometry at a point: `ρ̂`, `L̂`, `ĝ`, `g̃̂`, the fiber jets `y` and `Z = ĝy`.
pub(crate) struct Frame {
    pub rho: Vec<Jet>,
    pub l: Vec<Jet>,
    pub g: Vec<Jet>,
    pub gt: Vec<Jet>,
    pub z: Vec<Jet>,
}

impl Frame {
    pub fn at(alg: &GeneralizedLieAlgebroid, gh: &GHMorphism, p: &Point) -> Result<Frame> {
        let (m, r) = (alg.m(), alg.r());
        let xs = &p.jets()[..m];
        let hx = alg.h().apply_jets(xs)?;
        let g = gh.g_at(r, &hx)?;
        let gt = gh.gtilde_at(r, &hx)?;
        let y = &p.jets()[m..];
        let z = (0..r)
            .map(|al| {
                let mut acc = p.zero();
                for (b, yb) in y.iter().enumerate() {
                    acc = acc + &g[al * r + b] * yb;
                }
                acc
            })
            .collect();
        Ok(Frame {
            rho: alg.rho_hat(xs)?,
            l: alg.l_hat(xs)?,
            g,
            gt,
            z,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{so3_structure, zero_anchor, Diffeo};

    #[test]
    fn lagrangian_jet_examples() {
        let l = Lagrangian::parse(1, 1, "y1^2/2 - x1^2/2").unwrap();
        let j = lagrangian_jets(&l, &[1.0, 2.0]).unwrap();
        assert_eq!((j.li[0], j.la[0], j.lab[0], j.lib[0]), (-1.0, 2.0, 1.0, 0.0));

        let l = Lagrangian::parse(2, 2, "(y1^2+y2^2)/(2*x2^2)").unwrap();
        let j = lagrangian_jets(&l, &[0.3, 1.0, 0.5, -0.2]).unwrap();
        assert_eq!(j.lab, vec![1.0, 0.0, 0.0, 1.0]);

        let l = Lagrangian::parse(1, 1, "3").unwrap();
        let j = lagrangian_jets(&l, &[1.0, 2.0]).unwrap();
        assert_eq!((j.li[0], j.la[0], j.lab[0], j.lib[0]), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn regularity_examples() {
        let q = Lagrangian::parse(1, 1, "y1^2/2").unwrap();
        let r = check_regularity(&q, &[0.0, 1.0], 1e-9).unwrap();
        assert!(r.regular);
        assert_eq!(r.det, 1.0);
        let lin = Lagrangian::parse(1, 1, "y1").unwrap();
        let r = check_regularity(&lin, &[0.0, 1.0], 1e-9).unwrap();
        assert!(!r.regular);
        assert_eq!(r.det, 0.0);
        let rb = Lagrangian::parse(3, 3, "(1*y1^2 + 2*y2^2 + 3*y3^2)/2").unwrap();
        assert_eq!(check_regularity(&rb, &[0.0; 6], 1e-9).unwrap().det, 6.0);
    }

    #[test]
    fn hessian_inverse_examples() {
        let d = Lagrangian::parse(3, 3, "(1*y1^2 + 2*y2^2 + 3*y3^2)/2").unwrap();
        let inv = hessian_inverse(&d, &[0.0; 6]).unwrap();
        let expect = [1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0 / 3.0];
        assert!(linalg::max_abs_diff(&inv, &expect) < 1e-15);
        let q = Lagrangian::parse(1, 1, "y1^2/2").unwrap();
        assert_eq!(hessian_inverse(&q, &[5.0, -3.0]).unwrap(), vec![1.0]);
        let lin = Lagrangian::parse(1, 1, "y1").unwrap();
        assert!(matches!(hessian_inverse(&lin, &[0.0, 1.0]), Err(Error::SingularHessian { .. })));
    }

    #[test]
    fn hessian_inverse_multiplies_back_on_metric() {
        let l = Lagrangian::parse(2, 2, "(y1^2 + 0.5*x1*y1*y2 + (2+sin(x2))*y2^2)/2").unwrap();
        for s in SamplePlan::default().with_count(16).samples(2, 2) {
            let lab = lagrangian_jets(&l, &s).unwrap().lab;
            let inv = hessian_inverse(&l, &s).unwrap();
            let id = linalg::matmul(&lab, &inv, 2);
            assert!(linalg::max_abs_diff(&id, &[1.0, 0.0, 0.0, 1.0]) <= 1e-10);
        }
    }

    #[test]
    fn finsler_examples() {
        let plan = SamplePlan::default().with_count(16);
        let e = FinslerFunction::parse(2, 2, "sqrt(y1^2+y2^2)").unwrap();
        let rep = check_finsler_axioms(&e, &plan).unwrap();
        assert!(rep.euler_residual <= 1e-9);
        assert!(rep.passes(1e-9));
        let s = [0.0, 0.0, 0.3, 0.4];
        let lab = lagrangian_jets(&e.lagrangian(), &s).unwrap().lab;
        assert!(linalg::max_abs_diff(&lab, &[2.0, 0.0, 0.0, 2.0]) < 1e-12);

        let sq = FinslerFunction::parse(1, 1, "y1^2").unwrap();
        let rep = check_finsler_axioms(&sq, &plan).unwrap();
        assert!(rep.euler_residual > 0.01);
        assert!(!rep.passes(1e-9));

        let p = FinslerFunction::parse(2, 2, "sqrt(y1^2+y2^2)/x2").unwrap();
        let mut plan2 = plan.clone();
        plan2.bounds = vec![(-2.0, 2.0), (0.5, 2.0), (-2.0, 2.0), (-2.0, 2.0)];
        assert!(check_finsler_axioms(&p, &plan2).unwrap().min_pivot > 0.0);
    }

    #[test]
    fn system_dimensions_are_checked() {
        let a = GeneralizedLieAlgebroid::new(3, 3, zero_anchor(3, 3), so3_structure(3), Diffeo::identity(3), Diffeo::identity(3))
            .unwrap();
        let l = Lagrangian::parse(1, 1, "y1^2").unwrap();
        let err = MechanicalSystem::new(a, GHMorphism::identity(3), ExternalForce::zero(3), Some(Payload::Lagrange(l)));
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn missing_payload() {
        let a = GeneralizedLieAlgebroid::tangent(1);
        let s = MechanicalSystem::new(a, GHMorphism::identity(1), ExternalForce::zero(1), None).unwrap();
        assert!(matches!(s.semispray(), Err(Error::MissingPayload(_))));
    }
}
