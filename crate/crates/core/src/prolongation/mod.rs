//! The prolongation `(ρ,η)TE` of an algebroid over the total space `E`:
//! sections, their bracket and anchor, `(ρ,η)`-connections, adapted frames
//! and curvature.
//!
//! A section carries `2r` coefficient functions of the state `(x, y)`:
//! `Z^α` along `∂̃_α` followed by `Y^a` along `∂̇_a`. In the adapted view the
//! second block holds `Ŷ^a = Y^a + Γ^a_α Z^α` instead.

mod structure;
mod transform;

pub use structure::{
    apply_structure, nijenhuis, poly_section, structure_identity_suite, Endomorphism, StructureKind,
    Structures,
};
pub use transform::{verify_transformation_laws, TransitionData};

use std::sync::Arc;

use crate::algebroid::GeneralizedLieAlgebroid;
use crate::error::{Error, Result};
use crate::smoothfn::{const_field, Field, FnField, Jet, Point, SmoothMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Natural,
    Adapted,
}

/// A section of the prolongation, possibly defined lazily from other sections.
#[derive(Clone)]
pub struct ProlongationSection {
    coef: Arc<dyn Field>,
    r: usize,
    basis: Basis,
}

impl std::fmt::Debug for ProlongationSection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ProlongationSection(r={}, {:?})", self.r, self.basis)
    }
}

impl ProlongationSection {
    pub fn new(zcoef: SmoothMap, ycoef: SmoothMap, basis: Basis) -> Result<ProlongationSection> {
        let r = zcoef.arity_out();
        if ycoef.arity_out() != r || zcoef.arity_in() != ycoef.arity_in() {
            return Err(Error::Dimension {
                what: "section coefficients".into(),
                expected: r,
                got: ycoef.arity_out(),
            });
        }
        let coef = FnField::shared(2 * r, move |p| {
            let mut v = zcoef.jets(p)?;
            v.extend(ycoef.jets(p)?);
            Ok(v)
        });
        Ok(ProlongationSection { coef, r, basis })
    }

    /// Wraps a field whose `2r` outputs are `[Z, Y]`.
    pub fn from_field(r: usize, coef: Arc<dyn Field>, basis: Basis) -> ProlongationSection {
        assert_eq!(coef.dim(), 2 * r, "section field must have 2r outputs");
        ProlongationSection { coef, r, basis }
    }

    pub fn constant(z: &[f64], y: &[f64]) -> ProlongationSection {
        assert_eq!(z.len(), y.len());
        let mut v = z.to_vec();
        v.extend_from_slice(y);
        ProlongationSection::from_field(z.len(), const_field(v), Basis::Natural)
    }

    pub fn zero(r: usize) -> ProlongationSection {
        ProlongationSection::constant(&vec![0.0; r], &vec![0.0; r])
    }

    /// The natural section `∂̃_α`.
    pub fn natural(r: usize, alpha: usize) -> ProlongationSection {
        let mut z = vec![0.0; r];
        z[alpha] = 1.0;
        ProlongationSection::constant(&z, &vec![0.0; r])
    }

    /// The vertical section `∂̇_a`.
    pub fn vertical(r: usize, a: usize) -> ProlongationSection {
        let mut y = vec![0.0; r];
        y[a] = 1.0;
        ProlongationSection::constant(&vec![0.0; r], &y)
    }

    /// The Liouville section `y^a ∂̇_a`.
    pub fn liouville(r: usize) -> ProlongationSection {
        let coef = FnField::shared(2 * r, move |p| {
            let n = p.dim();
            let mut v = vec![p.zero(); r];
            v.extend_from_slice(&p.jets()[n - r..]);
            Ok(v)
        });
        ProlongationSection::from_field(r, coef, Basis::Natural)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn field(&self) -> &Arc<dyn Field> {
        &self.coef
    }

    /// Coefficient jets `(Z, Y)` at `p`.
    pub fn zy(&self, p: &Point) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let mut v = self.coef.jets(p)?;
        let y = v.split_off(self.r);
        Ok((v, y))
    }

    pub fn values(&self, state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut v = self.coef.values(state)?;
        let y = v.split_off(self.r);
        Ok((v, y))
    }

    fn combine(&self, other: &ProlongationSection, a: f64, b: f64) -> Result<ProlongationSection> {
        if self.basis != other.basis || self.r != other.r {
            return Err(Error::Basis);
        }
        let (u, v) = (self.coef.clone(), other.coef.clone());
        let coef = FnField::shared(2 * self.r, move |p| {
            let uu = u.jets(p)?;
            let vv = v.jets(p)?;
            Ok(uu.iter().zip(&vv).map(|(x, y)| x * a + y * b).collect())
        });
        Ok(ProlongationSection::from_field(self.r, coef, self.basis))
    }

    pub fn add(&self, other: &ProlongationSection) -> Result<ProlongationSection> {
        self.combine(other, 1.0, 1.0)
    }

    pub fn sub(&self, other: &ProlongationSection) -> Result<ProlongationSection> {
        self.combine(other, 1.0, -1.0)
    }

    pub fn scale(&self, c: f64) -> ProlongationSection {
        let u = self.coef.clone();
        let coef = FnField::shared(2 * self.r, move |p| Ok(u.jets(p)?.iter().map(|x| x * c).collect()));
        ProlongationSection::from_field(self.r, coef, self.basis)
    }

    pub(crate) fn require_natural(&self) -> Result<()> {
        if self.basis == Basis::Natural {
            Ok(())
        } else {
            Err(Error::Basis)
        }
    }
}

/// `ρ̃(X)f = Z^α ρ̂^i_α ∂_i f + Y^a ∂_{y^a} f`.
///
/// `f` must be one order above `z`, `y` and `rho_hat`.
pub(crate) fn tilde_rho(m: usize, rho_hat: &[Jet], z: &[Jet], y: &[Jet], f: &Jet) -> Jet {
    let r = z.len();
    let mut acc = Jet::constant(z[0].space(), 0.0);
    for i in 0..m {
        let mut c = Jet::constant(z[0].space(), 0.0);
        for (al, za) in z.iter().enumerate() {
            let rh = &rho_hat[i * r + al];
            if rh.value() == 0.0 && rh.is_constant() {
                continue;
            }
            c = c + za * rh;
        }
        acc = acc + c * f.deriv(i);
    }
    for (a, ya) in y.iter().enumerate() {
        acc = acc + ya * f.deriv(m + a);
    }
    acc
}

fn lower(v: &[Jet], order: usize) -> Vec<Jet> {
    v.iter().map(|j| j.truncate(order)).collect()
}

/// `ρ̃(X)f` as a lazily evaluated field, applied to every output of `f`.
pub fn anchor_field(
    a: &GeneralizedLieAlgebroid,
    x: &ProlongationSection,
    f: Arc<dyn Field>,
) -> Result<Arc<dyn Field>> {
    x.require_natural()?;
    let (a, x) = (a.clone(), x.clone());
    Ok(FnField::shared(f.dim(), move |p| {
        let q = p.raised(1);
        let fj = f.jets(&q)?;
        let (z, y) = x.zy(p)?;
        let rho = a.rho_hat(&p.jets()[..a.m()])?;
        Ok(fj.iter().map(|fk| tilde_rho(a.m(), &rho, &z, &y, fk)).collect())
    }))
}

/// `ρ̃(X)f` at one state.
pub fn prolong_anchor_apply(
    a: &GeneralizedLieAlgebroid,
    x: &ProlongationSection,
    f: &SmoothMap,
    state: &[f64],
) -> Result<f64> {
    let field = anchor_field(a, x, Arc::new(f.clone()))?;
    Ok(field.values(state)?[0])
}

/// The bracket of two natural sections.
pub fn prolong_bracket(
    a: &GeneralizedLieAlgebroid,
    x: &ProlongationSection,
    w: &ProlongationSection,
) -> Result<ProlongationSection> {
    x.require_natural()?;
    w.require_natural()?;
    let r = a.r();
    let (a, x, w) = (a.clone(), x.clone(), w.clone());
    let coef = FnField::shared(2 * r, move |p| {
        let m = a.m();
        let q = p.raised(1);
        let (xz1, xy1) = x.zy(&q)?;
        let (wz1, wy1) = w.zy(&q)?;
        let (xz, xy) = (lower(&xz1, p.order()), lower(&xy1, p.order()));
        let (wz, wy) = (lower(&wz1, p.order()), lower(&wy1, p.order()));
        let xs = &p.jets()[..m];
        let rho = a.rho_hat(xs)?;
        let l = a.l_hat(xs)?;
        let mut out = Vec::with_capacity(2 * r);
        for g in 0..r {
            let mut acc = tilde_rho(m, &rho, &xz, &xy, &wz1[g]) - tilde_rho(m, &rho, &wz, &wy, &xz1[g]);
            for al in 0..r {
                for be in 0..r {
                    let c = &l[a.l_index(g, al, be)];
                    if c.value() == 0.0 && c.is_constant() {
                        continue;
                    }
                    acc = acc + &(&xz[al] * &wz[be]) * c;
                }
            }
            out.push(acc);
        }
        for c in 0..r {
            out.push(tilde_rho(m, &rho, &xz, &xy, &wy1[c]) - tilde_rho(m, &rho, &wz, &wy, &xy1[c]));
        }
        Ok(out)
    });
    Ok(ProlongationSection::from_field(r, coef, Basis::Natural))
}

/// A `(ρ,η)`-connection `Γ^a_α(x, y)`, stored as `gamma[a*r + α]`.
#[derive(Clone)]
pub struct RhoEtaConnection {
    gamma: Arc<dyn Field>,
    r: usize,
}

impl std::fmt::Debug for RhoEtaConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RhoEtaConnection(r={})", self.r)
    }
}

impl RhoEtaConnection {
    pub fn new(gamma: SmoothMap) -> Result<RhoEtaConnection> {
        let r = gamma.r();
        if gamma.arity_out() != r * r {
            return Err(Error::Dimension {
                what: "connection".into(),
                expected: r * r,
                got: gamma.arity_out(),
            });
        }
        Ok(RhoEtaConnection {
            gamma: Arc::new(gamma),
            r,
        })
    }

    pub fn from_field(r: usize, gamma: Arc<dyn Field>) -> RhoEtaConnection {
        assert_eq!(gamma.dim(), r * r, "connection field must have r*r outputs");
        RhoEtaConnection { gamma, r }
    }

    pub fn zero(r: usize) -> RhoEtaConnection {
        RhoEtaConnection::from_field(r, const_field(vec![0.0; r * r]))
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn field(&self) -> &Arc<dyn Field> {
        &self.gamma
    }

    pub fn gamma(&self, p: &Point) -> Result<Vec<Jet>> {
        self.gamma.jets(p)
    }

    pub fn values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.gamma.values(state)
    }
}

/// `Γ^a_α Z^α` for each `a`.
pub(crate) fn gamma_times(r: usize, gamma: &[Jet], z: &[Jet]) -> Vec<Jet> {
    (0..r)
        .map(|a| {
            let mut acc = Jet::constant(z[0].space(), 0.0);
            for (al, za) in z.iter().enumerate() {
                acc = acc + &gamma[a * r + al] * za;
            }
            acc
        })
        .collect()
}

fn shift_vertical(x: &ProlongationSection, conn: &RhoEtaConnection, sign: f64, to: Basis) -> ProlongationSection {
    let r = x.r;
    let (x, conn) = (x.clone(), conn.clone());
    let coef = FnField::shared(2 * r, move |p| {
        let (z, y) = x.zy(p)?;
        let gz = gamma_times(r, &conn.gamma(p)?, &z);
        let mut out = z;
        out.extend(y.iter().zip(&gz).map(|(ya, ga)| ya + &(ga * sign)));
        Ok(out)
    });
    ProlongationSection::from_field(r, coef, to)
}

/// Natural `(Z, Y)` to adapted `(Z, Y + ΓZ)`.
pub fn to_adapted(x: &ProlongationSection, conn: &RhoEtaConnection) -> Result<ProlongationSection> {
    x.require_natural()?;
    Ok(shift_vertical(x, conn, 1.0, Basis::Adapted))
}

/// Adapted `(Z, Ŷ)` to natural `(Z, Ŷ − ΓZ)`.
pub fn from_adapted(x: &ProlongationSection, conn: &RhoEtaConnection) -> Result<ProlongationSection> {
    if x.basis != Basis::Adapted {
        return Err(Error::Basis);
    }
    Ok(shift_vertical(x, conn, -1.0, Basis::Natural))
}

/// The adapted horizontal section `δ̃_α = ∂̃_α − Γ^a_α ∂̇_a`, in natural form.
pub fn adapted_horizontal(conn: &RhoEtaConnection, alpha: usize) -> ProlongationSection {
    let r = conn.r;
    let conn = conn.clone();
    let coef = FnField::shared(2 * r, move |p| {
        let g = conn.gamma(p)?;
        let mut out: Vec<Jet> = (0..r).map(|k| p.constant(if k == alpha { 1.0 } else { 0.0 })).collect();
        out.extend((0..r).map(|a| -&g[a * r + alpha]));
        Ok(out)
    });
    ProlongationSection::from_field(r, coef, Basis::Natural)
}

/// `δỹ^a(X) = Γ^a_α Z^α + Y^a` at one state.
pub fn adapted_dual_pairing(
    conn: &RhoEtaConnection,
    a: usize,
    x: &ProlongationSection,
    state: &[f64],
) -> Result<f64> {
    x.require_natural()?;
    let p = Point::new(state, 0);
    let (z, y) = x.zy(&p)?;
    let gz = gamma_times(conn.r, &conn.gamma(&p)?, &z);
    Ok(gz[a].value() + y[a].value())
}

/// Curvature `R^a_{αβ}` as a field with outputs `[(a*r + α)*r + β]`.
pub fn curvature_field(a: &GeneralizedLieAlgebroid, conn: &RhoEtaConnection) -> Arc<dyn Field> {
    let r = a.r();
    let (a, conn) = (a.clone(), conn.clone());
    FnField::shared(r * r * r, move |p| {
        let m = a.m();
        let g1 = conn.gamma(&p.raised(1))?;
        let g0 = lower(&g1, p.order());
        let xs = &p.jets()[..m];
        let rho = a.rho_hat(xs)?;
        let l = a.l_hat(xs)?;
        // ρ̃(δ̃_β) f
        let delta = |be: usize, f: &Jet| {
            let mut acc = p.zero();
            for i in 0..m {
                acc = acc + &rho[i * r + be] * &f.deriv(i);
            }
            for b in 0..r {
                acc = acc - &g0[b * r + be] * &f.deriv(m + b);
            }
            acc
        };
        let mut out = Vec::with_capacity(r * r * r);
        for c in 0..r {
            for al in 0..r {
                for be in 0..r {
                    let mut v = delta(be, &g1[c * r + al]) - delta(al, &g1[c * r + be]);
                    for g in 0..r {
                        v = v + &l[a.l_index(g, al, be)] * &g0[c * r + g];
                    }
                    out.push(v);
                }
            }
        }
        Ok(out)
    })
}

/// Curvature values at one state.
pub fn curvature(a: &GeneralizedLieAlgebroid, conn: &RhoEtaConnection, state: &[f64]) -> Result<Vec<f64>> {
    curvature_field(a, conn).values(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{abelian_structure, so3_structure, zero_anchor, Diffeo};

    fn so3() -> GeneralizedLieAlgebroid {
        GeneralizedLieAlgebroid::new(3, 3, zero_anchor(3, 3), so3_structure(3), Diffeo::identity(3), Diffeo::identity(3))
            .unwrap()
    }

    #[test]
    fn anchor_apply_examples() {
        let t = GeneralizedLieAlgebroid::tangent(1);
        let f = SmoothMap::parse(1, 1, &["y1^2"]).unwrap();
        let v = prolong_anchor_apply(&t, &ProlongationSection::vertical(1, 0), &f, &[0.0, 3.0]).unwrap();
        assert_eq!(v, 6.0);
        let f = SmoothMap::parse(1, 1, &["x1"]).unwrap();
        let v = prolong_anchor_apply(&t, &ProlongationSection::natural(1, 0), &f, &[0.4, 3.0]).unwrap();
        assert_eq!(v, 1.0);
        let f = SmoothMap::parse(3, 3, &["sin(x1)*x2"]).unwrap();
        let v = prolong_anchor_apply(&so3(), &ProlongationSection::natural(3, 0), &f, &[0.3, 1.0, 2.0, 0.0, 0.0, 0.0])
            .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn bracket_examples() {
        let s = so3();
        let b = prolong_bracket(&s, &ProlongationSection::natural(3, 0), &ProlongationSection::natural(3, 1)).unwrap();
        let (z, y) = b.values(&[0.1, 0.2, 0.3, 1.0, -1.0, 2.0]).unwrap();
        assert_eq!(z, vec![0.0, 0.0, 1.0]);
        assert_eq!(y, vec![0.0; 3]);

        let t = GeneralizedLieAlgebroid::new(
            2,
            2,
            crate::algebroid::identity_anchor(2),
            abelian_structure(2, 2),
            Diffeo::identity(2),
            Diffeo::identity(2),
        )
        .unwrap();
        let w = ProlongationSection::new(
            SmoothMap::parse(2, 2, &["0", "x1"]).unwrap(),
            SmoothMap::constant(2, 2, &[0.0, 0.0]),
            Basis::Natural,
        )
        .unwrap();
        let b = prolong_bracket(&t, &ProlongationSection::natural(2, 0), &w).unwrap();
        let (z, y) = b.values(&[0.7, -0.3, 1.0, 2.0]).unwrap();
        assert_eq!(z, vec![0.0, 1.0]);
        assert_eq!(y, vec![0.0, 0.0]);

        let x = poly_section(7, 2, 2);
        let b = prolong_bracket(&t, &x, &x).unwrap();
        let (z, y) = b.values(&[0.7, -0.3, 1.0, 2.0]).unwrap();
        assert!(z.iter().chain(&y).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn adapted_conversions() {
        let c = RhoEtaConnection::new(SmoothMap::parse(1, 1, &["2.5"]).unwrap()).unwrap();
        let ad = to_adapted(&ProlongationSection::natural(1, 0), &c).unwrap();
        assert_eq!(ad.values(&[0.0, 0.0]).unwrap(), (vec![1.0], vec![2.5]));

        let z = RhoEtaConnection::zero(2);
        let x = poly_section(3, 2, 2);
        let s = [0.3, 0.2, -0.5, 1.1];
        assert_eq!(to_adapted(&x, &z).unwrap().values(&s).unwrap(), x.values(&s).unwrap());

        let g = RhoEtaConnection::new(SmoothMap::parse(2, 2, &["x1*y2", "sin(y1)", "x2^2", "y1*y2-x1"]).unwrap()).unwrap();
        let back = from_adapted(&to_adapted(&x, &g).unwrap(), &g).unwrap();
        let (z0, y0) = x.values(&s).unwrap();
        let (z1, y1) = back.values(&s).unwrap();
        for (u, v) in z0.iter().chain(&y0).zip(z1.iter().chain(&y1)) {
            assert!((u - v).abs() <= 1e-12);
        }
        assert!(matches!(from_adapted(&x, &g), Err(Error::Basis)));
    }

    #[test]
    fn dual_pairing_examples() {
        let g = RhoEtaConnection::new(SmoothMap::parse(2, 2, &["x1*y2", "sin(y1)", "x2^2", "y1*y2-x1"]).unwrap()).unwrap();
        let s = [0.3, 0.2, -0.5, 1.1];
        let d = adapted_horizontal(&g, 0);
        assert!(adapted_dual_pairing(&g, 0, &d, &s).unwrap().abs() < 1e-15);
        assert!(adapted_dual_pairing(&g, 1, &d, &s).unwrap().abs() < 1e-15);
        assert_eq!(adapted_dual_pairing(&g, 1, &ProlongationSection::vertical(2, 1), &s).unwrap(), 1.0);
        let c = RhoEtaConnection::new(SmoothMap::parse(1, 1, &["5"]).unwrap()).unwrap();
        assert_eq!(adapted_dual_pairing(&c, 0, &ProlongationSection::natural(1, 0), &[0.0, 1.0]).unwrap(), 5.0);
    }

    #[test]
    fn curvature_examples() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let r = curvature(&t, &RhoEtaConnection::zero(2), &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));

        let eye = RhoEtaConnection::new(SmoothMap::constant(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        let r = curvature(&so3(), &eye, &[0.0; 6]).unwrap();
        for a in 0..3 {
            for al in 0..3 {
                for be in 0..3 {
                    let eps = match (al, be, a) {
                        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                        (1, 0, 2) | (2, 1, 0) | (0, 2, 1) => -1.0,
                        _ => 0.0,
                    };
                    assert_eq!(r[(a * 3 + al) * 3 + be], eps);
                }
            }
        }
    }

    #[test]
    fn curvature_is_vertical_part_of_horizontal_bracket() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let g = RhoEtaConnection::new(SmoothMap::parse(2, 2, &["x1*y2", "sin(y1)", "x2^2*y1", "y1*y2-x1"]).unwrap()).unwrap();
        let s = [0.3, 0.2, -0.5, 1.1];
        let r = curvature(&t, &g, &s).unwrap();
        for al in 0..2 {
            for be in 0..2 {
                let b = prolong_bracket(&t, &adapted_horizontal(&g, al), &adapted_horizontal(&g, be)).unwrap();
                for a in 0..2 {
                    let v = adapted_dual_pairing(&g, a, &b, &s).unwrap();
                    assert!((v - r[(a * 2 + al) * 2 + be]).abs() < 1e-12);
                }
            }
        }
    }
}
