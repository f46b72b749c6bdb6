use std::sync::Arc;

use super::{ExternalForce, Frame, Lagrangian, SemisprayField};
use crate::algebroid::{GHMorphism, GeneralizedLieAlgebroid};
use crate::dtensor::{berwald_from_connection, h_derivative_field, DTensorField, Slot};
use crate::error::{Error, Result};
use crate::linalg;
use crate::prolongation::{curvature_field, prolong_bracket, ProlongationSection, RhoEtaConnection};
use crate::smoothfn::{Field, FnField, Jet, Point};

fn lower(v: &[Jet], order: usize) -> Vec<Jet> {
    v.iter().map(|j| j.truncate(order)).collect()
}

fn is_zero(j: &Jet) -> bool {
    j.value() == 0.0 && j.is_constant()
}

/// `E_b` at `p`, of order `p.order()`; needs `L` two orders higher.
fn el_covector_jets(l: &Lagrangian, gh: &GHMorphism, alg: &GeneralizedLieAlgebroid, p: &Point) -> Result<Vec<Jet>> {
    let (m, r, k) = (alg.m(), alg.r(), p.order());
    let q1 = p.raised(1);
    let lj = l.jet(&p.raised(2))?;
    let f1 = Frame::at(alg, gh, &q1)?;
    let li1: Vec<Jet> = (0..m).map(|i| lj.deriv(i)).collect();
    let la1: Vec<Jet> = (0..r).map(|a| lj.deriv(m + a)).collect();
    let rho = lower(&f1.rho, k);
    let lh = lower(&f1.l, k);
    let z = lower(&f1.z, k);
    // ĝ^a_e y^e L_a and the momenta g̃^e_b L_e, one order up
    let mut zl = q1.zero();
    for a in 0..r {
        zl = zl + &f1.z[a] * &la1[a];
    }
    let mom: Vec<Jet> = (0..r)
        .map(|b| {
            let mut acc = q1.zero();
            for e in 0..r {
                acc = acc + &f1.gt[e * r + b] * &la1[e];
            }
            acc
        })
        .collect();
    let mom0 = lower(&mom, k);
    let dzl: Vec<Jet> = (0..m).map(|i| zl.deriv(i)).collect();
    let dmom: Vec<Vec<Jet>> = mom.iter().map(|pb| (0..m).map(|i| pb.deriv(i)).collect()).collect();
    let mut out = Vec::with_capacity(r);
    for b in 0..r {
        let mut e = p.zero();
        for i in 0..m {
            let rib = &rho[i * r + b];
            if is_zero(rib) {
                continue;
            }
            e = e + rib * &(li1[i].truncate(k) - &dzl[i]);
            for d in 0..r {
                e = e + &(&z[d] * rib) * &dmom[d][i];
            }
        }
        for d in 0..r {
            for i in 0..m {
                let rid = &rho[i * r + d];
                if is_zero(rid) {
                    continue;
                }
                e = e - &(&z[d] * rid) * &dmom[b][i];
            }
            for c in 0..r {
                let lc = &lh[alg.l_index(c, d, b)];
                if is_zero(lc) {
                    continue;
                }
                e = e + &(&z[d] * lc) * &mom0[c];
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// The Euler–Lagrange covector `E_b` as a field.
///
/// The structure function of the last term is `L^c_{db}`, contracted with
/// `(ĝ y)^d`.
pub fn euler_lagrange_covector(l: &Lagrangian, gh: &GHMorphism, alg: &GeneralizedLieAlgebroid) -> Arc<dyn Field> {
    let (l, gh, alg) = (l.clone(), gh.clone(), alg.clone());
    FnField::shared(alg.r(), move |p| el_covector_jets(&l, &gh, &alg, p))
}

/// The canonical semispray of a regular Lagrangian:
/// `Avert^a = ĝ^a_e L̃^{eb} E_b`.
///
/// The external force does not enter `Avert`; it acts through `Γ̊`.
pub fn canonical_semispray(
    l: &Lagrangian,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
    _fe: &ExternalForce,
) -> SemisprayField {
    let r = alg.r();
    let (l, gh, alg) = (l.clone(), gh.clone(), alg.clone());
    let avert = FnField::shared(r, move |p| {
        let m = alg.m();
        let e = el_covector_jets(&l, &gh, &alg, p)?;
        let lj = l.jet(&p.raised(2))?;
        let lab: Vec<Jet> = (0..r * r)
            .map(|k| lj.deriv(m + k / r).deriv(m + k % r))
            .collect();
        let w = linalg::solve_jets(&lab, &e, r)?;
        let f = Frame::at(&alg, &gh, p)?;
        Ok((0..r)
            .map(|a| {
                let mut acc = p.zero();
                for (ei, we) in w.iter().enumerate() {
                    acc = acc + &f.g[a * r + ei] * we;
                }
                acc
            })
            .collect())
    });
    SemisprayField::new(r, avert)
}

/// `T^a_c = −½ Z^d L̂^f_{dc} g̃^a_f + ½ ρ̂^j_c ∂_j(ĝ^b_e) y^e g̃^a_b − ½ Z^b ρ̂^i_b ∂_i(g̃^a_c)`
/// at `p`, with `Z = ĝ y`; stored `[a*r + c]`.
///
/// The y-independent part of both the connection of a semispray and of the
/// spray of a connection.
fn twist_jets(alg: &GeneralizedLieAlgebroid, gh: &GHMorphism, p: &Point) -> Result<Vec<Jet>> {
    let (m, r, k) = (alg.m(), alg.r(), p.order());
    let f1 = Frame::at(alg, gh, &p.raised(1))?;
    let rho = lower(&f1.rho, k);
    let lh = lower(&f1.l, k);
    let gt = lower(&f1.gt, k);
    let z = lower(&f1.z, k);
    let y = &p.jets()[m..];
    let g_const = f1.g.iter().all(Jet::is_constant);
    let gt_const = f1.gt.iter().all(Jet::is_constant);
    let mut out = Vec::with_capacity(r * r);
    for a in 0..r {
        for c in 0..r {
            let mut t = p.zero();
            for d in 0..r {
                for f in 0..r {
                    let lf = &lh[alg.l_index(f, d, c)];
                    if is_zero(lf) {
                        continue;
                    }
                    t = t - &(&z[d] * lf) * &gt[a * r + f] * 0.5;
                }
            }
            if !g_const {
                for j in 0..m {
                    let rjc = &rho[j * r + c];
                    if is_zero(rjc) {
                        continue;
                    }
                    for b in 0..r {
                        let mut dgy = p.zero();
                        for (e, ye) in y.iter().enumerate() {
                            dgy = dgy + f1.g[b * r + e].deriv(j) * ye;
                        }
                        t = t + &(rjc * &dgy) * &gt[a * r + b] * 0.5;
                    }
                }
            }
            if !gt_const {
                for b in 0..r {
                    for i in 0..m {
                        let rib = &rho[i * r + b];
                        if is_zero(rib) {
                            continue;
                        }
                        t = t - &(&z[b] * rib) * &f1.gt[a * r + c].deriv(i) * 0.5;
                    }
                }
            }
            out.push(t);
        }
    }
    Ok(out)
}

/// The tensor `T^a_c` shared by the semispray/connection correspondences.
pub fn twist_tensor(alg: &GeneralizedLieAlgebroid, gh: &GHMorphism) -> Arc<dyn Field> {
    let (alg, gh) = (alg.clone(), gh.clone());
    FnField::shared(alg.r() * alg.r(), move |p| twist_jets(&alg, &gh, p))
}

/// The connection of a semispray:
/// `Γ^a_c = −½ g̃^b_c ∂Avert^a/∂y^b + T^a_c`.
pub fn connection_from_semispray(s: &SemisprayField, gh: &GHMorphism, alg: &GeneralizedLieAlgebroid) -> RhoEtaConnection {
    let r = alg.r();
    let (s, gh, alg) = (s.clone(), gh.clone(), alg.clone());
    let gamma = FnField::shared(r * r, move |p| {
        let m = alg.m();
        let av = s.avert().jets(&p.raised(1))?;
        let f = Frame::at(&alg, &gh, p)?;
        let mut out = twist_jets(&alg, &gh, p)?;
        for a in 0..r {
            let dav: Vec<Jet> = (0..r).map(|b| av[a].deriv(m + b)).collect();
            for c in 0..r {
                let o = &mut out[a * r + c];
                for (b, db) in dav.iter().enumerate() {
                    *o = &*o - &(&f.gt[b * r + c] * db) * 0.5;
                }
            }
        }
        Ok(out)
    });
    RhoEtaConnection::from_field(r, gamma)
}

/// `Γ̊^a_c = Γ^a_c + ¼ g̃^d_c ∂F^a/∂y^d`.
pub fn ring_connection(
    conn: &RhoEtaConnection,
    fe: &ExternalForce,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
) -> RhoEtaConnection {
    if fe.is_zero() {
        return conn.clone();
    }
    let r = alg.r();
    let phi = force_gradient(fe, gh, alg);
    let conn = conn.clone();
    let gamma = FnField::shared(r * r, move |p| {
        let g = conn.gamma(p)?;
        let f = phi.jets(p)?;
        Ok(g.iter().zip(&f).map(|(a, b)| a + &(b * 0.25)).collect())
    });
    RhoEtaConnection::from_field(r, gamma)
}

/// `Φ^a_c = g̃^e_c ∂F^a/∂y^e`, stored `[a*r + c]`.
fn force_gradient(fe: &ExternalForce, gh: &GHMorphism, alg: &GeneralizedLieAlgebroid) -> Arc<dyn Field> {
    let r = alg.r();
    let (fe, gh, alg) = (fe.clone(), gh.clone(), alg.clone());
    FnField::shared(r * r, move |p| {
        let m = alg.m();
        let f1 = fe.jets(&p.raised(1))?;
        let fr = Frame::at(&alg, &gh, p)?;
        let mut out = Vec::with_capacity(r * r);
        for fa in &f1 {
            let d: Vec<Jet> = (0..r).map(|e| fa.deriv(m + e)).collect();
            for c in 0..r {
                let mut acc = p.zero();
                for (e, de) in d.iter().enumerate() {
                    acc = acc + &fr.gt[e * r + c] * de;
                }
                out.push(acc);
            }
        }
        Ok(out)
    })
}

/// The canonical spray of a connection:
/// `Avert^a = −(Γ^a_c − T^a_c)(ĝ y)^c`.
pub fn canonical_spray(conn: &RhoEtaConnection, gh: &GHMorphism, alg: &GeneralizedLieAlgebroid) -> SemisprayField {
    let r = alg.r();
    let (conn, gh, alg) = (conn.clone(), gh.clone(), alg.clone());
    let avert = FnField::shared(r, move |p| {
        let g = conn.gamma(p)?;
        let t = twist_jets(&alg, &gh, p)?;
        let f = Frame::at(&alg, &gh, p)?;
        Ok((0..r)
            .map(|a| {
                let mut acc = p.zero();
                for c in 0..r {
                    acc = acc - &(&g[a * r + c] - &t[a * r + c]) * &f.z[c];
                }
                acc
            })
            .collect())
    });
    SemisprayField::new(r, avert)
}

/// Vertical part of `[C, S] − S`: `y^f ∂Avert^a/∂y^f − 2 Avert^a`.
pub fn spray_deviation(s: &SemisprayField, state: &[f64]) -> Result<Vec<f64>> {
    let r = s.r();
    if state.len() < r {
        return Err(Error::Dimension {
            what: "state".into(),
            expected: r,
            got: state.len(),
        });
    }
    let m = state.len() - r;
    let av = s.avert().jets(&Point::new(state, 1))?;
    Ok(av
        .iter()
        .map(|a| {
            let euler: f64 = (0..r).map(|f| state[m + f] * a.first(m + f)).sum();
            euler - 2.0 * a.value()
        })
        .collect())
}

/// The same quantity through the prolongation bracket; the horizontal part
/// of `[C, S] − S` must vanish and is returned first.
pub fn spray_deviation_via_bracket(
    s: &SemisprayField,
    alg: &GeneralizedLieAlgebroid,
    gh: &GHMorphism,
    state: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sec = s.section(alg, gh);
    let c = ProlongationSection::liouville(alg.r());
    let d = prolong_bracket(alg, &c, &sec)?.sub(&sec)?;
    d.values(state)
}

fn ring_curvature_impl(
    alg: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    fe: &ExternalForce,
    gh: &GHMorphism,
    printed: bool,
) -> Result<Arc<dyn Field>> {
    let r = alg.r();
    let curv = curvature_field(alg, conn);
    if fe.is_zero() {
        return Ok(curv);
    }
    let phi = force_gradient(fe, gh, alg);
    let dc = berwald_from_connection(conn);
    let tphi = DTensorField::with_slots(vec![Slot::VUp, Slot::HDown], r, phi.clone())?;
    let hder = (0..r)
        .map(|c| h_derivative_field(&tphi, &dc, alg, conn, c))
        .collect::<Result<Vec<_>>>()?;
    let (alg, conn) = (alg.clone(), conn.clone());
    Ok(FnField::shared(r * r * r, move |p| {
        let m = alg.m();
        let rr = curv.jets(p)?;
        let ph1 = phi.jets(&p.raised(1))?;
        let ph = lower(&ph1, p.order());
        let g1 = conn.gamma(&p.raised(1))?;
        let l = alg.l_hat(&p.jets()[..m])?;
        // cov[c][a*r + d] = Φ^a_{d|c}
        let cov = hder.iter().map(|h| h.field().jets(p)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(r * r * r);
        for a in 0..r {
            for c in 0..r {
                for d in 0..r {
                    let mut v = rr[(a * r + c) * r + d].clone();
                    let dcov = &cov[c][a * r + d] - &cov[d][a * r + c];
                    let mut quad = p.zero();
                    for b in 0..r {
                        quad = quad + &ph[b * r + d] * &ph1[a * r + c].deriv(m + b)
                            - &ph[b * r + c] * &ph1[a * r + d].deriv(m + b);
                    }
                    if printed {
                        v = v + dcov * 0.25 + quad * (1.0 / 16.0);
                    } else {
                        v = v - dcov * 0.25 - quad * (1.0 / 16.0);
                        for b in 0..r {
                            let tors = g1[b * r + c].deriv(m + d) - g1[b * r + d].deriv(m + c);
                            v = v - &tors * &ph[a * r + b] * 0.25;
                        }
                    }
                    for f in 0..r {
                        v = v + &l[alg.l_index(f, c, d)] * &ph[a * r + f] * 0.25;
                    }
                    out.push(v);
                }
            }
        }
        Ok(out)
    }))
}

/// Curvature of `Γ̊` expanded through `R`, `Φ^a_c = g̃^e_c ∂F^a/∂y^e` and its
/// Berwald h-derivatives; outputs `[(a*r + c)*r + d]`:
///
/// `R̊ = R − ¼(Φ^a_{d|c} − Φ^a_{c|d}) − ¼(∂_dΓ^b_c − ∂_cΓ^b_d)Φ^a_b
///      − (1/16)(Φ^b_d ∂_bΦ^a_c − Φ^b_c ∂_bΦ^a_d) + ¼ L^f_{cd} Φ^a_f`
///
/// with `∂_b = ∂/∂y^b`. Agrees with `curvature_field` of `ring_connection`.
pub fn ring_curvature(
    alg: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    fe: &ExternalForce,
    gh: &GHMorphism,
) -> Result<Arc<dyn Field>> {
    ring_curvature_impl(alg, conn, fe, gh, false)
}

/// The expansion as usually printed, with the opposite sign on the
/// covariant-derivative and quadratic terms and no `∂Γ·Φ` term. It only
/// agrees with the direct curvature when those terms vanish, e.g. for `r = 1`.
pub fn ring_curvature_printed(
    alg: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    fe: &ExternalForce,
    gh: &GHMorphism,
) -> Result<Arc<dyn Field>> {
    ring_curvature_impl(alg, conn, fe, gh, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{abelian_structure, identity_anchor, so3_structure, zero_anchor, Diffeo, SamplePlan};
    use crate::mechanics::check_semispray_property;
    use crate::smoothfn::SmoothMap;

    fn rigid_body() -> (GeneralizedLieAlgebroid, Lagrangian) {
        let a = GeneralizedLieAlgebroid::new(3, 3, zero_anchor(3, 3), so3_structure(3), Diffeo::identity(3), Diffeo::identity(3))
            .unwrap();
        (a, Lagrangian::parse(3, 3, "(1*y1^2 + 2*y2^2 + 3*y3^2)/2").unwrap())
    }

    fn oscillator() -> (GeneralizedLieAlgebroid, Lagrangian) {
        (
            GeneralizedLieAlgebroid::tangent(1),
            Lagrangian::parse(1, 1, "y1^2/2 - x1^2/2").unwrap(),
        )
    }

    fn half_plane() -> (GeneralizedLieAlgebroid, Lagrangian, SamplePlan) {
        let mut plan = SamplePlan::default().with_count(12);
        plan.bounds = vec![(-1.0, 1.0), (0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0)];
        (
            GeneralizedLieAlgebroid::tangent(2),
            Lagrangian::parse(2, 2, "(y1^2+y2^2)/(2*x2^2)").unwrap(),
            plan,
        )
    }

    /// A curved toy with `h ≠ id` and a non-constant `g`.
    fn shifted() -> (GeneralizedLieAlgebroid, GHMorphism) {
        let a = GeneralizedLieAlgebroid::new(
            1,
            1,
            identity_anchor(1),
            abelian_structure(1, 1),
            Diffeo::parse(1, &["x1+0.3"]).unwrap(),
            Diffeo::parse(1, &["x1-0.3"]).unwrap(),
        )
        .unwrap();
        let gh = GHMorphism::explicit(SmoothMap::parse(1, 0, &["1+0.1*sin(x1)"]).unwrap(), None).unwrap();
        (a, gh)
    }

    fn zero_f(r: usize) -> ExternalForce {
        ExternalForce::zero(r)
    }

    #[test]
    fn el_covector_examples() {
        let (a, l) = oscillator();
        let e = euler_lagrange_covector(&l, &GHMorphism::identity(1), &a);
        assert_eq!(e.values(&[1.0, 0.0]).unwrap(), vec![-1.0]);
        let free = Lagrangian::parse(1, 1, "y1^2/2").unwrap();
        let e = euler_lagrange_covector(&free, &GHMorphism::identity(1), &a);
        assert_eq!(e.values(&[0.7, 1.3]).unwrap(), vec![0.0]);
        let (a, l) = rigid_body();
        let e = euler_lagrange_covector(&l, &GHMorphism::identity(3), &a);
        assert_eq!(e.values(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap(), vec![-1.0, 2.0, -1.0]);
    }

    #[test]
    fn el_covector_reduces_when_g_is_identity() {
        let (a, l, plan) = half_plane();
        let e = euler_lagrange_covector(&l, &GHMorphism::identity(2), &a);
        for s in plan.samples(2, 2) {
            // ρ = I, abelian: E_b = L_b − y^d L_{bd}
            let j = l.jet(&Point::new(&s, 2)).unwrap();
            let v = e.values(&s).unwrap();
            for b in 0..2 {
                let expect = j.first(b) - (0..2).map(|d| s[2 + d] * j.second(d, 2 + b)).sum::<f64>();
                assert!((v[b] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn semispray_examples() {
        let (a, l) = oscillator();
        let s = canonical_semispray(&l, &GHMorphism::identity(1), &a, &zero_f(1));
        assert_eq!(s.values(&[0.4, 2.0]).unwrap(), vec![-0.4]);
        let (a, l) = rigid_body();
        let s = canonical_semispray(&l, &GHMorphism::identity(3), &a, &zero_f(3));
        let v = s.values(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(linalg::max_abs_diff(&v, &[-1.0, 1.0, -1.0 / 3.0]) < 1e-15);
        let plan = SamplePlan::default().with_count(8);
        assert_eq!(check_semispray_property(&s, &a, &GHMorphism::identity(3), &plan).unwrap(), 0.0);
    }

    #[test]
    fn rigid_body_matches_euler_equations() {
        let (a, l) = rigid_body();
        let s = canonical_semispray(&l, &GHMorphism::identity(3), &a, &zero_f(3));
        let i = [1.0, 2.0, 3.0];
        for st in SamplePlan::default().with_count(16).samples(3, 3) {
            let w = &st[3..];
            let expect = [
                (i[1] - i[2]) * w[1] * w[2] / i[0],
                (i[2] - i[0]) * w[2] * w[0] / i[1],
                (i[0] - i[1]) * w[0] * w[1] / i[2],
            ];
            assert!(linalg::max_abs_diff(&s.values(&st).unwrap(), &expect) <= 1e-12);
        }
    }

    #[test]
    fn singular_hessian_propagates() {
        let a = GeneralizedLieAlgebroid::tangent(1);
        let l = Lagrangian::parse(1, 1, "y1").unwrap();
        let s = canonical_semispray(&l, &GHMorphism::identity(1), &a, &zero_f(1));
        assert!(matches!(s.values(&[0.0, 1.0]), Err(Error::SingularHessian { .. })));
    }

    #[test]
    fn connection_examples() {
        // quadratic G = ½γ^a_{bc} y^b y^c on a flat tangent algebroid
        let a = GeneralizedLieAlgebroid::tangent(2);
        let av = SmoothMap::parse(2, 2, &["-2*(0.5*(y1^2 + 2*0.3*y1*y2 + y2^2))", "-2*(0.5*(0.2*y1^2 - y2^2))"]).unwrap();
        let s = SemisprayField::new(2, Arc::new(av));
        let c = connection_from_semispray(&s, &GHMorphism::identity(2), &a);
        let st = [0.1, 0.2, 0.7, -0.4];
        let (y1, y2) = (st[2], st[3]);
        let expect = [y1 + 0.3 * y2, 0.3 * y1 + y2, 0.2 * y1, -y2];
        assert!(linalg::max_abs_diff(&c.values(&st).unwrap(), &expect) < 1e-14);

        let (a, l) = oscillator();
        let s = canonical_semispray(&l, &GHMorphism::identity(1), &a, &zero_f(1));
        let c = connection_from_semispray(&s, &GHMorphism::identity(1), &a);
        assert_eq!(c.values(&[0.3, -1.1]).unwrap(), vec![0.0]);
    }

    #[test]
    fn connection_reduces_when_g_is_identity() {
        let (a, l) = rigid_body();
        let s = canonical_semispray(&l, &GHMorphism::identity(3), &a, &zero_f(3));
        let c = connection_from_semispray(&s, &GHMorphism::identity(3), &a);
        let e = euler_lagrange_covector(&l, &GHMorphism::identity(3), &a);
        let inv = [1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0 / 3.0];
        let lst = so3_structure(3);
        for st in SamplePlan::default().with_count(8).samples(3, 3) {
            // −½ ∂(E_b L̃^{ba})/∂y^c − ½ y^b L^a_{bc}
            let ej = e.jets(&Point::new(&st, 1)).unwrap();
            let lv = lst.eval(&st[..3]).unwrap();
            let got = c.values(&st).unwrap();
            for aa in 0..3 {
                for cc in 0..3 {
                    let mut v = 0.0;
                    for b in 0..3 {
                        v -= 0.5 * ej[b].first(3 + cc) * inv[b * 3 + aa];
                        v -= 0.5 * st[3 + b] * lv[(aa * 3 + b) * 3 + cc];
                    }
                    assert!((got[aa * 3 + cc] - v).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn ring_connection_examples() {
        let (a, l) = rigid_body();
        let gh = GHMorphism::identity(3);
        let s = canonical_semispray(&l, &gh, &a, &zero_f(3));
        let c = connection_from_semispray(&s, &gh, &a);
        let st = [0.1, 0.2, 0.3, 0.5, -0.5, 1.0];
        let base = c.values(&st).unwrap();
        assert_eq!(ring_connection(&c, &zero_f(3), &gh, &a).values(&st).unwrap(), base);
        let cst = ExternalForce::new(SmoothMap::parse(3, 3, &["1", "2", "x1"]).unwrap());
        assert_eq!(ring_connection(&c, &cst, &gh, &a).values(&st).unwrap(), base);
        let k = 0.6;
        let lin = ExternalForce::new(SmoothMap::parse(3, 3, &["0.6*y1", "0.6*y2", "0.6*y3"]).unwrap());
        let got = ring_connection(&c, &lin, &gh, &a).values(&st).unwrap();
        for i in 0..9 {
            let shift = if i % 4 == 0 { k / 4.0 } else { 0.0 };
            assert!((got[i] - base[i] - shift).abs() < 1e-15);
        }
    }

    #[test]
    fn spray_examples() {
        let a = GeneralizedLieAlgebroid::tangent(2);
        let gh = GHMorphism::identity(2);
        let flat = canonical_spray(&RhoEtaConnection::zero(2), &gh, &a);
        assert_eq!(flat.values(&[0.1, 0.2, 0.3, 0.4]).unwrap(), vec![0.0, 0.0]);

        let lin = RhoEtaConnection::new(SmoothMap::parse(2, 2, &["y1", "x1*y2", "0", "y1+y2"]).unwrap()).unwrap();
        let s = canonical_spray(&lin, &gh, &a);
        let st = [0.5, 0.2, 0.3, -0.4];
        let g = lin.values(&st).unwrap();
        let expect = [-(g[0] * st[2] + g[1] * st[3]), -(g[2] * st[2] + g[3] * st[3])];
        assert!(linalg::max_abs_diff(&s.values(&st).unwrap(), &expect) < 1e-15);
        for v in spray_deviation(&s, &st).unwrap() {
            assert!(v.abs() <= 1e-8);
        }
    }

    #[test]
    fn rigid_body_spray_reproduces_semispray() {
        let (a, l) = rigid_body();
        let gh = GHMorphism::identity(3);
        let s = canonical_semispray(&l, &gh, &a, &zero_f(3));
        let sp = canonical_spray(&connection_from_semispray(&s, &gh, &a), &gh, &a);
        for st in SamplePlan::default().with_count(8).samples(3, 3) {
            assert!(linalg::max_abs_diff(&s.values(&st).unwrap(), &sp.values(&st).unwrap()) <= 1e-8);
        }
    }

    #[test]
    fn spray_round_trip_with_twist() {
        // h ≠ id and non-constant g exercise every term of T
        let (a, gh) = shifted();
        let conn = RhoEtaConnection::new(SmoothMap::parse(1, 1, &["0.5*sin(x1)*y1"]).unwrap()).unwrap();
        let sp = canonical_spray(&conn, &gh, &a);
        let back = connection_from_semispray(&sp, &gh, &a);
        for st in SamplePlan::default().with_count(8).samples(1, 1) {
            assert!(linalg::max_abs_diff(&conn.values(&st).unwrap(), &back.values(&st).unwrap()) <= 1e-12);
            assert!(spray_deviation(&sp, &st).unwrap()[0].abs() <= 1e-12);
        }
    }

    #[test]
    fn deviation_examples() {
        let r1 = |src: &str| SemisprayField::new(1, Arc::new(SmoothMap::parse(1, 1, &[src]).unwrap()));
        assert!(spray_deviation(&r1("x1*y1^2"), &[0.3, 1.7]).unwrap()[0].abs() < 1e-14);
        assert_eq!(spray_deviation(&r1("1"), &[0.3, 0.0]).unwrap(), vec![-2.0]);
        let lin = r1("3*y1 + x1*y1");
        let st = [0.5, 1.2];
        assert!((spray_deviation(&lin, &st).unwrap()[0] + lin.values(&st).unwrap()[0]).abs() < 1e-14);
    }

    #[test]
    fn deviation_agrees_with_bracket() {
        let (a, l, plan) = half_plane();
        let gh = GHMorphism::identity(2);
        let osc = SemisprayField::new(2, Arc::new(SmoothMap::parse(2, 2, &["-x1 + y2", "x1*y1^3"]).unwrap()));
        for s in [canonical_semispray(&l, &gh, &a, &zero_f(2)), osc] {
            for st in plan.samples(2, 2) {
                let (hz, vy) = spray_deviation_via_bracket(&s, &a, &gh, &st).unwrap();
                assert!(hz.iter().all(|v| v.abs() < 1e-12));
                assert!(linalg::max_abs_diff(&vy, &spray_deviation(&s, &st).unwrap()) < 1e-10);
            }
        }
    }

    #[test]
    fn finsler_semispray_is_two_homogeneous() {
        let (a, _, plan) = half_plane();
        let f = crate::mechanics::FinslerFunction::parse(2, 2, "sqrt(y1^2+y2^2)/x2").unwrap();
        let s = canonical_semispray(&f.lagrangian(), &GHMorphism::identity(2), &a, &zero_f(2));
        for st in plan.samples(2, 2) {
            let v = s.values(&st).unwrap();
            let mut sc = st.clone();
            sc[2] *= 2.0;
            sc[3] *= 2.0;
            let w = s.values(&sc).unwrap();
            for k in 0..2 {
                assert!((w[k] - 4.0 * v[k]).abs() <= 1e-8 * (1.0 + w[k].abs()));
            }
        }
    }

    fn ring_check(a: &GeneralizedLieAlgebroid, gh: &GHMorphism, conn: &RhoEtaConnection, fe: &ExternalForce, m: usize, r: usize) -> f64 {
        let direct = curvature_field(a, &ring_connection(conn, fe, gh, a));
        let expanded = ring_curvature(a, conn, fe, gh).unwrap();
        let mut worst = 0.0f64;
        for st in SamplePlan::default().with_count(6).samples(m, r) {
            worst = worst.max(linalg::max_abs_diff(&direct.values(&st).unwrap(), &expanded.values(&st).unwrap()));
        }
        worst
    }

    #[test]
    fn ring_curvature_matches_direct_curvature() {
        let a = GeneralizedLieAlgebroid::tangent(2);
        let gh = GHMorphism::identity(2);
        let conn = RhoEtaConnection::new(SmoothMap::parse(2, 2, &["x2*y1", "y1*y2", "sin(x1)*y2", "x1*y1^2"]).unwrap()).unwrap();
        let fe = ExternalForce::new(SmoothMap::parse(2, 2, &["x1*y1*y2 + 0.3*y2", "y1^2 - x2*y2"]).unwrap());
        assert!(ring_check(&a, &gh, &conn, &fe, 2, 2) <= 1e-10);

        let (so3, _) = rigid_body();
        let gh3 = GHMorphism::identity(3);
        let c3 = RhoEtaConnection::new(SmoothMap::parse(3, 3, &["y2", "0", "y1*y3", "0", "y3", "x1", "y1", "0", "y2^2"]).unwrap())
            .unwrap();
        let f3 = ExternalForce::new(SmoothMap::parse(3, 3, &["y1*y2", "0.5*y3", "y1^2"]).unwrap());
        assert!(ring_check(&so3, &gh3, &c3, &f3, 3, 3) <= 1e-10);

        let (sh, ghs) = shifted();
        let cs = RhoEtaConnection::new(SmoothMap::parse(1, 1, &["0.5*sin(x1)*y1"]).unwrap()).unwrap();
        let fs = ExternalForce::new(SmoothMap::parse(1, 1, &["0.4*y1^2"]).unwrap());
        assert!(ring_check(&sh, &ghs, &cs, &fs, 1, 1) <= 1e-10);
    }

    #[test]
    fn printed_expansion_differs_when_r_exceeds_one() {
        let a = GeneralizedLieAlgebroid::tangent(2);
        let gh = GHMorphism::identity(2);
        let conn = RhoEtaConnection::new(SmoothMap::parse(2, 2, &["x2*y1", "y1*y2", "sin(x1)*y2", "x1*y1^2"]).unwrap()).unwrap();
        let fe = ExternalForce::new(SmoothMap::parse(2, 2, &["x1*y1*y2", "y1^2"]).unwrap());
        let direct = curvature_field(&a, &ring_connection(&conn, &fe, &gh, &a));
        let printed = ring_curvature_printed(&a, &conn, &fe, &gh).unwrap();
        let st = [0.3, 0.2, 0.9, -0.6];
        assert!(linalg::max_abs_diff(&direct.values(&st).unwrap(), &printed.values(&st).unwrap()) > 1e-3);
    }

    #[test]
    fn ring_curvature_trivial_cases() {
        let a = GeneralizedLieAlgebroid::tangent(2);
        let gh = GHMorphism::identity(2);
        let conn = RhoEtaConnection::new(SmoothMap::parse(2, 2, &["x2*y1", "y1*y2", "sin(x1)*y2", "x1*y1^2"]).unwrap()).unwrap();
        let st = [0.3, 0.2, 0.9, -0.6];
        let r0 = ring_curvature(&a, &conn, &zero_f(2), &gh).unwrap().values(&st).unwrap();
        assert_eq!(r0, crate::prolongation::curvature(&a, &conn, &st).unwrap());
        let cst = ExternalForce::new(SmoothMap::parse(2, 2, &["1", "-2"]).unwrap());
        let rf = ring_curvature(&a, &RhoEtaConnection::zero(2), &cst, &gh).unwrap().values(&st).unwrap();
        assert!(rf.iter().all(|v| *v == 0.0));
    }
}
