use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    adapted_dual_pairing, adapted_horizontal, anchor_field, curvature_field, gamma_times, prolong_bracket, to_adapted,
    Basis, ProlongationSection, RhoEtaConnection,
};
use crate::algebroid::{GHMorphism, GeneralizedLieAlgebroid, SamplePlan};
use crate::error::{Error, Result};
use crate::smoothfn::{Field, FnField, Jet, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureKind {
    VerticalProjector,
    HorizontalProjector,
    AlmostProduct,
    AlmostTangent,
}

/// An endomorphism of sections, acting on adapted coefficients `(Z, Ŷ)`.
#[derive(Clone)]
pub enum Endomorphism {
    Identity,
    Structure(StructureKind),
    /// `(Z, Ŷ) ↦ (hh·Z + hv·Ŷ, vh·Z + vv·Ŷ)` with `r×r` blocks `[out*r + in]`.
    Blocks {
        hh: Arc<dyn Field>,
        hv: Arc<dyn Field>,
        vh: Arc<dyn Field>,
        vv: Arc<dyn Field>,
    },
    /// `outer ∘ inner`.
    Compose(Box<Endomorphism>, Box<Endomorphism>),
    Combination(Vec<(f64, Endomorphism)>),
}

impl Endomorphism {
    pub fn then(self, outer: Endomorphism) -> Endomorphism {
        Endomorphism::Compose(Box::new(outer), Box::new(self))
    }
}

impl From<StructureKind> for Endomorphism {
    fn from(k: StructureKind) -> Endomorphism {
        Endomorphism::Structure(k)
    }
}

/// The data the structures are built from.
#[derive(Clone)]
pub struct Structures {
    alg: GeneralizedLieAlgebroid,
    conn: RhoEtaConnection,
    gh: Option<GHMorphism>,
}

fn matvec(r: usize, m: &[Jet], v: &[Jet]) -> Vec<Jet> {
    (0..r)
        .map(|i| {
            let mut acc = Jet::constant(v[0].space(), 0.0);
            for (j, vj) in v.iter().enumerate() {
                acc = acc + &m[i * r + j] * vj;
            }
            acc
        })
        .collect()
}

impl Structures {
    pub fn new(alg: &GeneralizedLieAlgebroid, conn: &RhoEtaConnection, gh: Option<&GHMorphism>) -> Structures {
        Structures {
            alg: alg.clone(),
            conn: conn.clone(),
            gh: gh.cloned(),
        }
    }

    pub fn algebroid(&self) -> &GeneralizedLieAlgebroid {
        &self.alg
    }

    pub fn connection(&self) -> &RhoEtaConnection {
        &self.conn
    }

    fn check(&self, e: &Endomorphism) -> Result<()> {
        match e {
            Endomorphism::Structure(StructureKind::AlmostTangent) if self.gh.is_none() => Err(Error::MissingMorphism),
            Endomorphism::Compose(a, b) => {
                self.check(a)?;
                self.check(b)
            }
            Endomorphism::Combination(v) => v.iter().try_for_each(|(_, e)| self.check(e)),
            _ => Ok(()),
        }
    }

    /// Applies `e` to `x`; the result is in the basis of `x`.
    pub fn apply(&self, e: &Endomorphism, x: &ProlongationSection) -> Result<ProlongationSection> {
        self.check(e)?;
        match e {
            Endomorphism::Identity => Ok(x.clone()),
            Endomorphism::Compose(outer, inner) => self.apply(outer, &self.apply(inner, x)?),
            Endomorphism::Combination(terms) => {
                let mut acc = ProlongationSection::zero(x.r());
                if x.basis() == Basis::Adapted {
                    acc = to_adapted(&acc, &self.conn)?;
                }
                for (c, t) in terms {
                    acc = acc.add(&self.apply(t, x)?.scale(*c))?;
                }
                Ok(acc)
            }
            Endomorphism::Structure(_) | Endomorphism::Blocks { .. } => Ok(self.pointwise(e.clone(), x)),
        }
    }

    fn pointwise(&self, e: Endomorphism, x: &ProlongationSection) -> ProlongationSection {
        let r = x.r();
        let basis = x.basis();
        let natural = basis == Basis::Natural;
        let this = self.clone();
        let x = x.clone();
        let coef = FnField::shared(2 * r, move |p| {
            let (z, y) = x.zy(p)?;
            let m = this.alg.m();
            // J needs no connection in natural coordinates since its horizontal output vanishes.
            if let Endomorphism::Structure(StructureKind::AlmostTangent) = e {
                let gh = this.gh.as_ref().ok_or(Error::MissingMorphism)?;
                let hx = this.alg.h().apply_jets(&p.jets()[..m])?;
                let gt = gh.gtilde_at(r, &hx)?;
                let mut out = vec![p.zero(); r];
                out.extend(matvec(r, &gt, &z));
                return Ok(out);
            }
            let gamma = this.conn.gamma(p)?;
            let yhat = if natural {
                let gz = gamma_times(r, &gamma, &z);
                y.iter().zip(&gz).map(|(a, b)| a + b).collect()
            } else {
                y
            };
            let (z2, yhat2) = match &e {
                Endomorphism::Structure(StructureKind::VerticalProjector) => (vec![p.zero(); r], yhat),
                Endomorphism::Structure(StructureKind::HorizontalProjector) => (z, vec![p.zero(); r]),
                Endomorphism::Structure(StructureKind::AlmostProduct) => (z, yhat.iter().map(|v| -v).collect()),
                Endomorphism::Blocks { hh, hv, vh, vv } => {
                    let (hh, hv, vh, vv) = (hh.jets(p)?, hv.jets(p)?, vh.jets(p)?, vv.jets(p)?);
                    let a: Vec<Jet> = matvec(r, &hh, &z).iter().zip(matvec(r, &hv, &yhat)).map(|(u, v)| u + &v).collect();
                    let b: Vec<Jet> = matvec(r, &vh, &z).iter().zip(matvec(r, &vv, &yhat)).map(|(u, v)| u + &v).collect();
                    (a, b)
                }
                _ => unreachable!("handled above or not pointwise"),
            };
            let y2 = if natural {
                let gz = gamma_times(r, &gamma, &z2);
                yhat2.iter().zip(&gz).map(|(a, b)| a - b).collect()
            } else {
                yhat2
            };
            let mut out = z2;
            out.extend(y2);
            Ok(out)
        });
        ProlongationSection::from_field(r, coef, basis)
    }

    /// `N_e(X,W) = [eX,eW] + e²[X,W] − e[eX,W] − e[X,eW]` on natural sections.
    pub fn nijenhuis(&self, e: &Endomorphism, x: &ProlongationSection, w: &ProlongationSection) -> Result<ProlongationSection> {
        let a = &self.alg;
        let ex = self.apply(e, x)?;
        let ew = self.apply(e, w)?;
        let t1 = prolong_bracket(a, &ex, &ew)?;
        let t2 = self.apply(e, &self.apply(e, &prolong_bracket(a, x, w)?)?)?;
        let t3 = self.apply(e, &prolong_bracket(a, &ex, w)?)?;
        let t4 = self.apply(e, &prolong_bracket(a, x, &ew)?)?;
        t1.add(&t2)?.sub(&t3)?.sub(&t4)
    }
}

pub fn apply_structure(
    kind: StructureKind,
    alg: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    gh: Option<&GHMorphism>,
    x: &ProlongationSection,
) -> Result<ProlongationSection> {
    Structures::new(alg, conn, gh).apply(&kind.into(), x)
}

/// `N_e(X, W)` at one state, as natural `(Z, Y)` values.
pub fn nijenhuis(
    s: &Structures,
    e: &Endomorphism,
    x: &ProlongationSection,
    w: &ProlongationSection,
    state: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    s.nijenhuis(e, x, w)?.values(state)
}

/// A natural section whose coefficients are seeded random polynomials of
/// degree ≤ 2 in the state, with coefficients in `[-1, 1]`.
pub fn poly_section(seed: u64, m: usize, r: usize) -> ProlongationSection {
    let n = m + r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nterms = 1 + n + n * (n + 1) / 2;
    let coeffs: Vec<Vec<f64>> = (0..2 * r)
        .map(|_| (0..nterms).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let coef = FnField::shared(2 * r, move |p: &Point| {
        let v = p.jets();
        Ok(coeffs
            .iter()
            .map(|c| {
                let mut acc = p.constant(c[0]);
                let mut k = 1;
                for vi in v {
                    acc = acc + vi * c[k];
                    k += 1;
                }
                for i in 0..n {
                    for j in i..n {
                        acc = acc + &(&v[i] * &v[j]) * c[k];
                        k += 1;
                    }
                }
                acc
            })
            .collect())
    });
    ProlongationSection::from_field(r, coef, Basis::Natural)
}

fn diff(a: &ProlongationSection, b: &ProlongationSection, state: &[f64]) -> Result<f64> {
    let (za, ya) = a.values(state)?;
    let (zb, yb) = b.values(state)?;
    Ok(za
        .iter()
        .chain(&ya)
        .zip(zb.iter().chain(&yb))
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max))
}

fn coordinate_fields(n: usize) -> Vec<Arc<dyn Field>> {
    (0..n)
        .map(|k| FnField::shared(1, move |p| Ok(vec![p.jets()[k].clone()])))
        .collect()
}

/// Sampled residuals of the identities satisfied by the prolongation, its
/// bracket and the structures built from `conn` (and `gh` when given).
///
/// Returns `(check name, max residual)` pairs in a fixed order.
pub fn structure_identity_suite(
    alg: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    gh: Option<&GHMorphism>,
    plan: &SamplePlan,
) -> Result<Vec<(String, f64)>> {
    use Endomorphism as E;
    use StructureKind::*;
    let (m, r) = (alg.m(), alg.r());
    let s = Structures::new(alg, conn, gh);
    let v: E = VerticalProjector.into();
    let h: E = HorizontalProjector.into();
    let p: E = AlmostProduct.into();
    let tests: Vec<ProlongationSection> = (0..3).map(|k| poly_section(plan.seed.wrapping_add(k), m, r)).collect();
    let (x, w, u) = (&tests[0], &tests[1], &tests[2]);

    let mut checks: Vec<(&str, ProlongationSection, ProlongationSection)> = Vec::new();
    for t in &tests {
        checks.push(("v_idempotent", s.apply(&v.clone().then(v.clone()), t)?, s.apply(&v, t)?));
        checks.push(("h_idempotent", s.apply(&h.clone().then(h.clone()), t)?, s.apply(&h, t)?));
        checks.push(("h_plus_v_identity", s.apply(&h, t)?.add(&s.apply(&v, t)?)?, t.clone()));
        checks.push(("p_involution", s.apply(&p.clone().then(p.clone()), t)?, t.clone()));
        let two_h = E::Combination(vec![(2.0, h.clone()), (-1.0, E::Identity)]);
        checks.push(("p_eq_2h_minus_id", s.apply(&p, t)?, s.apply(&two_h, t)?));
        let two_v = E::Combination(vec![(1.0, E::Identity), (-2.0, v.clone())]);
        checks.push(("p_eq_id_minus_2v", s.apply(&p, t)?, s.apply(&two_v, t)?));
        let hv = E::Combination(vec![(1.0, h.clone()), (-1.0, v.clone())]);
        checks.push(("p_eq_h_minus_v", s.apply(&p, t)?, s.apply(&hv, t)?));
        // Γ((ρ,η)Γ, Id) X, built from the dual adapted coframe.
        let gx = {
            let (t, conn) = (t.clone(), conn.clone());
            let coef = FnField::shared(2 * r, move |pt| {
                let (z, y) = t.zy(pt)?;
                let gz = gamma_times(r, &conn.gamma(pt)?, &z);
                let mut out = vec![pt.zero(); r];
                out.extend(y.iter().zip(&gz).map(|(a, b)| a + b));
                Ok(out)
            });
            ProlongationSection::from_field(r, coef, Basis::Natural)
        };
        checks.push(("connection_map_is_v", gx, s.apply(&v, t)?));
        if gh.is_some() {
            let j: E = AlmostTangent.into();
            let zero = ProlongationSection::zero(r);
            checks.push(("j_p_eq_j", s.apply(&p.clone().then(j.clone()), t)?, s.apply(&j, t)?));
            let neg_j = E::Combination(vec![(-1.0, j.clone())]);
            checks.push(("p_j_eq_minus_j", s.apply(&j.clone().then(p.clone()), t)?, s.apply(&neg_j, t)?));
            checks.push(("j_h_eq_j", s.apply(&h.clone().then(j.clone()), t)?, s.apply(&j, t)?));
            checks.push(("h_j_eq_0", s.apply(&j.clone().then(h.clone()), t)?, zero.clone()));
            checks.push(("j_v_eq_0", s.apply(&v.clone().then(j.clone()), t)?, zero.clone()));
            checks.push(("v_j_eq_j", s.apply(&j.clone().then(v.clone()), t)?, s.apply(&j, t)?));
        }
    }
    for (a, b) in [(x, w), (w, u), (u, x)] {
        let vhh = s.apply(&v, &prolong_bracket(alg, &s.apply(&h, a)?, &s.apply(&h, b)?)?)?;
        checks.push(("nijenhuis_v", s.nijenhuis(&v, a, b)?, vhh.clone()));
        checks.push(("nijenhuis_h", s.nijenhuis(&h, a, b)?, vhh));
        if gh.is_some() {
            let j: E = AlmostTangent.into();
            checks.push(("nijenhuis_j", s.nijenhuis(&j, a, b)?, ProlongationSection::zero(r)));
        }
        checks.push((
            "prolongation_antisymmetry",
            prolong_bracket(alg, a, b)?,
            prolong_bracket(alg, b, a)?.scale(-1.0),
        ));
    }
    let jac = {
        let t1 = prolong_bracket(alg, &prolong_bracket(alg, x, w)?, u)?;
        let t2 = prolong_bracket(alg, &prolong_bracket(alg, w, u)?, x)?;
        let t3 = prolong_bracket(alg, &prolong_bracket(alg, u, x)?, w)?;
        t1.add(&t2)?.add(&t3)?
    };
    checks.push(("prolongation_jacobi", jac, ProlongationSection::zero(r)));

    // Natural frame brackets.
    for al in 0..r {
        for be in 0..r {
            let lhat = {
                let alg2 = alg.clone();
                let coef = FnField::shared(2 * r, move |pt| {
                    let l = alg2.l_hat(&pt.jets()[..m])?;
                    let mut out: Vec<Jet> = (0..r).map(|g| l[alg2.l_index(g, al, be)].clone()).collect();
                    out.extend((0..r).map(|_| pt.zero()));
                    Ok(out)
                });
                ProlongationSection::from_field(r, coef, Basis::Natural)
            };
            let (ea, eb) = (ProlongationSection::natural(r, al), ProlongationSection::natural(r, be));
            checks.push(("natural_bracket_hh", prolong_bracket(alg, &ea, &eb)?, lhat));
            let (va, vb) = (ProlongationSection::vertical(r, al), ProlongationSection::vertical(r, be));
            checks.push(("natural_bracket_hv", prolong_bracket(alg, &ea, &vb)?, ProlongationSection::zero(r)));
            checks.push(("natural_bracket_vv", prolong_bracket(alg, &va, &vb)?, ProlongationSection::zero(r)));
        }
    }

    // [δ̃_α, ∂̇_b] = ∂_{y^b}Γ^a_α ∂̇_a.
    for al in 0..r {
        for b in 0..r {
            let expect = {
                let conn2 = conn.clone();
                let coef = FnField::shared(2 * r, move |pt| {
                    let g = conn2.gamma(&pt.raised(1))?;
                    let mut out = vec![pt.zero(); r];
                    out.extend((0..r).map(|a| g[a * r + al].deriv(m + b)));
                    Ok(out)
                });
                ProlongationSection::from_field(r, coef, Basis::Natural)
            };
            let br = prolong_bracket(alg, &adapted_horizontal(conn, al), &ProlongationSection::vertical(r, b))?;
            checks.push(("horizontal_vertical_bracket", br, expect));
        }
    }

    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut bump = |name: &str, val: f64| match worst.iter_mut().find(|(n, _)| n == name) {
        Some((_, w)) => *w = w.max(val),
        None => worst.push((name.to_string(), val)),
    };
    let samples = plan.samples(m, r);
    for st in &samples {
        for (name, a, b) in &checks {
            bump(name, diff(a, b, st)?);
        }
    }

    // Curvature is the adapted vertical part of [δ̃_α, δ̃_β].
    let curv = curvature_field(alg, conn);
    let deltas: Vec<ProlongationSection> = (0..r).map(|al| adapted_horizontal(conn, al)).collect();
    let mut hb = Vec::new();
    for al in 0..r {
        for be in 0..r {
            hb.push((al, be, prolong_bracket(alg, &deltas[al], &deltas[be])?));
        }
    }
    for st in &samples {
        let rv = curv.values(st)?;
        for (al, be, br) in &hb {
            for a in 0..r {
                let lhs = adapted_dual_pairing(conn, a, br, st)?;
                bump("curvature_bracket", (lhs - rv[(a * r + al) * r + be]).abs());
            }
        }
    }

    // Anchor homomorphism on the adapted frame, tested on coordinate functions.
    let coords = coordinate_fields(m + r);
    let mut hom = Vec::new();
    for al in 0..r {
        for be in 0..r {
            let br = prolong_bracket(alg, &deltas[al], &deltas[be])?;
            for f in &coords {
                let lhs = anchor_field(alg, &br, f.clone())?;
                let ab = anchor_field(alg, &deltas[al], anchor_field(alg, &deltas[be], f.clone())?)?;
                let ba = anchor_field(alg, &deltas[be], anchor_field(alg, &deltas[al], f.clone())?)?;
                hom.push((lhs, ab, ba));
            }
        }
    }
    for st in &samples {
        for (lhs, ab, ba) in &hom {
            let d = lhs.values(st)?[0] - ab.values(st)?[0] + ba.values(st)?[0];
            bump("anchor_homomorphism", d.abs());
        }
    }
    Ok(worst)
}
