use std::sync::Arc;

use super::{Frame, Lagrangian, SemisprayField};
use crate::algebroid::{GHMorphism, GeneralizedLieAlgebroid, SamplePlan};
use crate::error::Result;
use crate::linalg;
use crate::prolongation::{anchor_field, prolong_bracket, ProlongationSection};
use crate::smoothfn::{const_field, Field, FnField};

/// `E_L = (ĝ y)^a L_a − L` as a field.
pub fn energy_field(l: &Lagrangian, gh: &GHMorphism, alg: &GeneralizedLieAlgebroid) -> Arc<dyn Field> {
    let (l, gh, alg) = (l.clone(), gh.clone(), alg.clone());
    FnField::shared(1, move |p| {
        let m = alg.m();
        let lj = l.jet(&p.raised(1))?;
        let f = Frame::at(&alg, &gh, p)?;
        let mut e = -lj.truncate(p.order());
        for (a, za) in f.z.iter().enumerate() {
            e = e + za * &lj.deriv(m + a);
        }
        Ok(vec![e])
    })
}

pub fn energy(l: &Lagrangian, gh: &GHMorphism, alg: &GeneralizedLieAlgebroid, state: &[f64]) -> Result<f64> {
    Ok(energy_field(l, gh, alg).values(state)?[0])
}

/// `θ_L(X) = g̃̂^e_a L_e Z^a` as a field; blind to the vertical part of `X`.
pub fn theta_field(
    l: &Lagrangian,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
    x: &ProlongationSection,
) -> Result<Arc<dyn Field>> {
    x.require_natural()?;
    let (l, gh, alg, x) = (l.clone(), gh.clone(), alg.clone(), x.clone());
    Ok(FnField::shared(1, move |p| {
        let (m, r) = (alg.m(), alg.r());
        let lj = l.jet(&p.raised(1))?;
        let f = Frame::at(&alg, &gh, p)?;
        let (z, _) = x.zy(p)?;
        let mut acc = p.zero();
        for e in 0..r {
            let le = lj.deriv(m + e);
            for (a, za) in z.iter().enumerate() {
                acc = acc + &(&f.gt[e * r + a] * &le) * za;
            }
        }
        Ok(vec![acc])
    }))
}

pub fn poincare_cartan_theta(
    l: &Lagrangian,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
    x: &ProlongationSection,
    state: &[f64],
) -> Result<f64> {
    Ok(theta_field(l, gh, alg, x)?.values(state)?[0])
}

/// `ω_L(U, V) = ρ̃(U)θ_L(V) − ρ̃(V)θ_L(U) − θ_L([U, V])`.
fn omega_field(
    l: &Lagrangian,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
    u: &ProlongationSection,
    v: &ProlongationSection,
) -> Result<Arc<dyn Field>> {
    let a = anchor_field(alg, u, theta_field(l, gh, alg, v)?)?;
    let b = anchor_field(alg, v, theta_field(l, gh, alg, u)?)?;
    let c = theta_field(l, gh, alg, &prolong_bracket(alg, u, v)?)?;
    Ok(FnField::shared(1, move |p| {
        Ok(vec![&a.jets(p)?[0] - &b.jets(p)?[0] - &c.jets(p)?[0]])
    }))
}

pub fn poincare_cartan_omega(
    l: &Lagrangian,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
    u: &ProlongationSection,
    v: &ProlongationSection,
    state: &[f64],
) -> Result<f64> {
    Ok(omega_field(l, gh, alg, u, v)?.values(state)?[0])
}

fn test_sections(r: usize) -> Vec<ProlongationSection> {
    (0..r)
        .map(|b| ProlongationSection::natural(r, b))
        .chain((0..r).map(|b| ProlongationSection::vertical(r, b)))
        .collect()
}

/// Max over samples and `X ∈ {∂̃_b, ∂̇̃_b}` of `|ω_L(S, X) + ρ̃(X)E_L|`.
pub fn verify_cartan_equation(
    s: &SemisprayField,
    l: &Lagrangian,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
    plan: &SamplePlan,
) -> Result<f64> {
    let sec = s.section(alg, gh);
    let el = energy_field(l, gh, alg);
    let mut fields = Vec::new();
    for x in test_sections(alg.r()) {
        fields.push((omega_field(l, gh, alg, &sec, &x)?, anchor_field(alg, &x, el.clone())?));
    }
    let mut worst = 0.0f64;
    for st in plan.samples(alg.m(), alg.r()) {
        for (om, de) in &fields {
            worst = worst.max((om.values(&st)?[0] + de.values(&st)?[0]).abs());
        }
    }
    Ok(worst)
}

/// `Avert` at one state obtained by solving `ω_L(S, ∂̃_b) = −ρ̃(∂̃_b)E_L`
/// for the vertical coefficient of `S`, which enters linearly.
pub fn cartan_two_path(
    l: &Lagrangian,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
    state: &[f64],
) -> Result<Vec<f64>> {
    let r = alg.r();
    let el = energy_field(l, gh, alg);
    let with_avert = |v: Vec<f64>| SemisprayField::new(r, const_field(v)).section(alg, gh);
    let s0 = with_avert(vec![0.0; r]);
    let mut mat = vec![0.0; r * r];
    let mut rhs = vec![0.0; r];
    for b in 0..r {
        let xb = ProlongationSection::natural(r, b);
        let base = poincare_cartan_omega(l, gh, alg, &s0, &xb, state)?;
        rhs[b] = -anchor_field(alg, &xb, el.clone())?.values(state)?[0] - base;
        for k in 0..r {
            let mut e = vec![0.0; r];
            e[k] = 1.0;
            mat[b * r + k] = poincare_cartan_omega(l, gh, alg, &with_avert(e), &xb, state)? - base;
        }
    }
    let inv = linalg::inverse(&mat, r)?;
    Ok((0..r).map(|a| (0..r).map(|b| inv[a * r + b] * rhs[b]).sum()).collect())
}
