//! Generalized Lie algebroids in one global chart, with sampled axiom checks.
//!
//! Index layouts (row-major): `rho[i*r + α] = ρ^i_α`,
//! `lstruct[γ*r*r + α*r + β] = L^γ_{αβ}`, `g[α*r + a] = g^α_a`,
//! `gtilde[a*r + α] = g̃^a_α`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::smoothfn::{Field, FnField, Jet, Point, SmoothMap};

/// A diffeomorphism of the base `ℝ^m`.
#[derive(Clone, Debug)]
pub enum Diffeo {
    Identity { m: usize },
    Explicit(SmoothMap),
}

impl Diffeo {
    pub fn identity(m: usize) -> Diffeo {
        Diffeo::Identity { m }
    }

    pub fn explicit(map: SmoothMap) -> Result<Diffeo> {
        if map.r() != 0 || map.arity_out() != map.m() {
            return Err(Error::Dimension {
                what: "diffeomorphism".into(),
                expected: map.m(),
                got: map.arity_out(),
            });
        }
        Ok(Diffeo::Explicit(map))
    }

    pub fn parse<S: AsRef<str>>(m: usize, srcs: &[S]) -> Result<Diffeo> {
        Diffeo::explicit(SmoothMap::parse(m, 0, srcs)?)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Diffeo::Identity { .. })
    }

    pub fn dim(&self) -> usize {
        match self {
            Diffeo::Identity { m } => *m,
            Diffeo::Explicit(f) => f.m(),
        }
    }

    pub fn apply_jets(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        match self {
            Diffeo::Identity { .. } => Ok(x.to_vec()),
            Diffeo::Explicit(f) => f.eval_jets(x),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Diffeo::Identity { .. } => Ok(x.to_vec()),
            Diffeo::Explicit(f) => f.eval(x),
        }
    }

    /// Jacobian `∂φ^i/∂x^j` at `x`, row-major.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        let p = Point::new(x, 1);
        let out = self.apply_jets(p.jets())?;
        let mut jac = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                jac[i * m + j] = out[i].first(j);
            }
        }
        Ok(jac)
    }

    /// Whether the Jacobian at `x` has full numeric rank.
    pub fn full_rank_at(&self, x: &[f64]) -> Result<bool> {
        let (_, piv) = linalg::pivots(&self.jacobian(x)?, self.dim());
        Ok(linalg::pivot_ratio(&piv) > 1e-12)
    }
}

/// Local presentation `(m, r, ρ, L, h, η)` with `p = r`.
#[derive(Clone, Debug)]
pub struct GeneralizedLieAlgebroid {
    m: usize,
    r: usize,
    rho: SmoothMap,
    lstruct: SmoothMap,
    h: Diffeo,
    eta: Diffeo,
}

impl GeneralizedLieAlgebroid {
    pub fn new(
        m: usize,
        r: usize,
        rho: SmoothMap,
        lstruct: SmoothMap,
        h: Diffeo,
        eta: Diffeo,
    ) -> Result<GeneralizedLieAlgebroid> {
        let check = |what: &str, map: &SmoothMap, out: usize| {
            if map.m() != m || map.r() != 0 || map.arity_out() != out {
                Err(Error::Dimension {
                    what: what.into(),
                    expected: out,
                    got: map.arity_out(),
                })
            } else {
                Ok(())
            }
        };
        if m == 0 || r == 0 {
            return Err(Error::Dimension {
                what: "algebroid (m, r must be positive)".into(),
                expected: 1,
                got: 0,
            });
        }
        check("rho", &rho, m * r)?;
        check("structure", &lstruct, r * r * r)?;
        for (name, d) in [("h", &h), ("eta", &eta)] {
            if d.dim() != m {
                return Err(Error::Dimension {
                    what: name.into(),
                    expected: m,
                    got: d.dim(),
                });
            }
        }
        Ok(GeneralizedLieAlgebroid {
            m,
            r,
            rho,
            lstruct,
            h,
            eta,
        })
    }

    /// `m = r`, `ρ = I`, `L = 0`, `h = η = Id`.
    pub fn tangent(m: usize) -> GeneralizedLieAlgebroid {
        GeneralizedLieAlgebroid::new(
            m,
            m,
            identity_anchor(m),
            abelian_structure(m, m),
            Diffeo::identity(m),
            Diffeo::identity(m),
        )
        .expect("consistent dimensions")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn rho(&self) -> &SmoothMap {
        &self.rho
    }

    pub fn lstruct(&self) -> &SmoothMap {
        &self.lstruct
    }

    pub fn h(&self) -> &Diffeo {
        &self.h
    }

    pub fn eta(&self) -> &Diffeo {
        &self.eta
    }

    /// `ρ^i_α(h(x))` for base jets `x`.
    pub fn rho_hat(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        self.rho.eval_jets(&self.h.apply_jets(x)?)
    }

    /// `L^γ_{αβ}(h(x))` for base jets `x`.
    pub fn l_hat(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        self.lstruct.eval_jets(&self.h.apply_jets(x)?)
    }

    pub fn l_index(&self, g: usize, a: usize, b: usize) -> usize {
        (g * self.r + a) * self.r + b
    }

    /// Anchor applied to a pullback section: `u^α ρ^i_α(h(x)) ∂f/∂x^i`.
    ///
    /// `f` must be one order above `u` and `rho`.
    pub fn anchor_derivative(&self, rho: &[Jet], u: &[Jet], f: &Jet) -> Jet {
        let (m, r) = (self.m, self.r);
        let mut acc = Jet::constant(rho[0].space(), 0.0);
        for i in 0..m {
            let df = f.deriv(i);
            for (a, ua) in u.iter().enumerate().take(r) {
                acc = acc + &(ua * &rho[i * r + a]) * &df;
            }
        }
        acc
    }
}

pub fn identity_anchor(m: usize) -> SmoothMap {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    SmoothMap::constant(m, 0, &v)
}

pub fn zero_anchor(m: usize, r: usize) -> SmoothMap {
    SmoothMap::constant(m, 0, &vec![0.0; m * r])
}

pub fn abelian_structure(m: usize, r: usize) -> SmoothMap {
    SmoothMap::constant(m, 0, &vec![0.0; r * r * r])
}

/// Levi-Civita structure constants `L^γ_{αβ} = ε_{αβγ}` on `r = 3`.
pub fn so3_values() -> Vec<f64> {
    let mut v = vec![0.0; 27];
    for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        v[(c * 3 + a) * 3 + b] = 1.0;
        v[(c * 3 + b) * 3 + a] = -1.0;
    }
    v
}

pub fn so3_structure(m: usize) -> SmoothMap {
    SmoothMap::constant(m, 0, &so3_values())
}

/// The invertible bundle morphism `(g, h)` and its inverse `g̃`.
#[derive(Clone, Debug)]
pub enum GHMorphism {
    Identity { r: usize },
    /// `gtilde = None` means the inverse is computed from `g` on demand.
    Explicit {
        g: SmoothMap,
        gtilde: Option<SmoothMap>,
    },
}

impl GHMorphism {
    pub fn identity(r: usize) -> GHMorphism {
        GHMorphism::Identity { r }
    }

    pub fn explicit(g: SmoothMap, gtilde: Option<SmoothMap>) -> Result<GHMorphism> {
        let r = (g.arity_out() as f64).sqrt() as usize;
        if r * r != g.arity_out() || g.r() != 0 {
            return Err(Error::Dimension {
                what: "g".into(),
                expected: r * r,
                got: g.arity_out(),
            });
        }
        if let Some(t) = &gtilde {
            if t.arity_out() != r * r || t.m() != g.m() || t.r() != 0 {
                return Err(Error::Dimension {
                    what: "gtilde".into(),
                    expected: r * r,
                    got: t.arity_out(),
                });
            }
        }
        Ok(GHMorphism::Explicit { g, gtilde })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, GHMorphism::Identity { .. })
    }

    fn eye(r: usize, like: &Jet) -> Vec<Jet> {
        (0..r * r)
            .map(|k| Jet::constant(like.space(), if k / r == k % r { 1.0 } else { 0.0 }))
            .collect()
    }

    /// `g^α_a` at the already-shifted base jets `hx`.
    pub fn g_at(&self, r: usize, hx: &[Jet]) -> Result<Vec<Jet>> {
        match self {
            GHMorphism::Identity { .. } => Ok(GHMorphism::eye(r, &hx[0])),
            GHMorphism::Explicit { g, .. } => g.eval_jets(hx),
        }
    }

    /// `g̃^a_α` at the already-shifted base jets `hx`.
    pub fn gtilde_at(&self, r: usize, hx: &[Jet]) -> Result<Vec<Jet>> {
        match self {
            GHMorphism::Identity { .. } => Ok(GHMorphism::eye(r, &hx[0])),
            GHMorphism::Explicit {
                gtilde: Some(t), ..
            } => t.eval_jets(hx),
            GHMorphism::Explicit { g, gtilde: None } => {
                let gv = g.eval_jets(hx)?;
                linalg::inverse_jets(&gv, r).map_err(|_| Error::Singular {
                    what: "g^α_a".into(),
                })
            }
        }
    }
}

/// Seeded sample set over a box in `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePlan {
    pub seed: u64,
    pub count: usize,
    /// One interval per coordinate; a single interval is broadcast.
    pub bounds: Vec<(f64, f64)>,
    pub exclude_zero_fiber: bool,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            seed: 0x5eed,
            count: 64,
            bounds: vec![(-2.0, 2.0)],
            exclude_zero_fiber: false,
        }
    }
}

impl SamplePlan {
    pub fn with_count(mut self, count: usize) -> SamplePlan {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> SamplePlan {
        self.seed = seed;
        self
    }

    fn bound(&self, k: usize) -> (f64, f64) {
        if self.bounds.len() == 1 {
            self.bounds[0]
        } else {
            self.bounds[k]
        }
    }

    /// `count` states of length `m + r`; identical for identical plans.
    pub fn samples(&self, m: usize, r: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        while out.len() < self.count {
            let s: Vec<f64> = (0..m + r)
                .map(|k| {
                    let (lo, hi) = self.bound(k);
                    lo + (hi - lo) * rng.gen::<f64>()
                })
                .collect();
            if self.exclude_zero_fiber && s[m..].iter().map(|v| v * v).sum::<f64>().sqrt() < 0.1 {
                continue;
            }
            out.push(s);
        }
        out
    }
}

/// Max `|L^γ_{αβ} + L^γ_{βα}|` over sampled base points.
pub fn check_antisymmetry(a: &GeneralizedLieAlgebroid, plan: &SamplePlan) -> Result<f64> {
    let r = a.r;
    let mut worst = 0.0f64;
    for s in plan.samples(a.m, a.r) {
        let l = a.lstruct.eval(&a.h.apply(&s[..a.m])?)?;
        for g in 0..r {
            for x in 0..r {
                for y in 0..r {
                    worst = worst.max((l[a.l_index(g, x, y)] + l[a.l_index(g, y, x)]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Bracket of sections of the pullback bundle `π*(h*F)` over state space.
pub fn pullback_bracket(
    a: &GeneralizedLieAlgebroid,
    u: Arc<dyn Field>,
    v: Arc<dyn Field>,
) -> Arc<dyn Field> {
    let a = a.clone();
    FnField::shared(a.r, move |p| {
        let q = p.raised(1);
        let uu = u.jets(&q)?;
        let vv = v.jets(&q)?;
        let x = &p.jets()[..a.m];
        let rho = a.rho_hat(x)?;
        let l = a.l_hat(x)?;
        let r = a.r;
        let mut out = Vec::with_capacity(r);
        for g in 0..r {
            let mut acc = a.anchor_derivative(&rho, &uu, &vv[g]) - a.anchor_derivative(&rho, &vv, &uu[g]);
            for x in 0..r {
                for y in 0..r {
                    let c = &l[a.l_index(g, x, y)];
                    if c.value() == 0.0 && c.is_constant() {
                        continue;
                    }
                    acc = acc + &(c * &uu[x]) * &vv[y];
                }
            }
            out.push(acc);
        }
        Ok(out)
    })
}

fn basis_field(r: usize, k: usize) -> Arc<dyn Field> {
    let mut v = vec![0.0; r];
    v[k] = 1.0;
    crate::smoothfn::const_field(v)
}

/// Max norm of the Jacobiator of the pullback bracket on constant sections,
/// over all index triples (with repetition) and samples.
pub fn check_jacobi(a: &GeneralizedLieAlgebroid, plan: &SamplePlan) -> Result<f64> {
    let r = a.r;
    let e: Vec<Arc<dyn Field>> = (0..r).map(|k| basis_field(r, k)).collect();
    let mut terms = Vec::new();
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                let t1 = pullback_bracket(a, pullback_bracket(a, e[i].clone(), e[j].clone()), e[k].clone());
                let t2 = pullback_bracket(a, pullback_bracket(a, e[j].clone(), e[k].clone()), e[i].clone());
                let t3 = pullback_bracket(a, pullback_bracket(a, e[k].clone(), e[i].clone()), e[j].clone());
                terms.push((t1, t2, t3));
            }
        }
    }
    let mut worst = 0.0f64;
    for s in plan.samples(a.m, a.r) {
        for (t1, t2, t3) in &terms {
            let (v1, v2, v3) = (t1.values(&s)?, t2.values(&s)?, t3.values(&s)?);
            for g in 0..r {
                worst = worst.max((v1[g] + v2[g] + v3[g]).abs());
            }
        }
    }
    Ok(worst)
}

/// Residual of the anchor compatibility law
/// `L^γ_{αβ}ρ^k_γ = ρ^i_α ∂_i ρ^k_β − ρ^j_β ∂_j ρ^k_α`, all at `h(x)`.
pub fn check_anchor_compatibility(a: &GeneralizedLieAlgebroid, plan: &SamplePlan) -> Result<f64> {
    let (m, r) = (a.m, a.r);
    let mut worst = 0.0f64;
    for s in plan.samples(m, r) {
        let p = Point::new(&s[..m], 1);
        let rho1 = a.rho_hat(p.jets())?;
        let rho0: Vec<f64> = rho1.iter().map(Jet::value).collect();
        let l = a.lstruct.eval(&a.h.apply(&s[..m])?)?;
        for al in 0..r {
            for be in 0..r {
                for k in 0..m {
                    let mut lhs = 0.0;
                    for g in 0..r {
                        lhs += l[a.l_index(g, al, be)] * rho0[k * r + g];
                    }
                    let mut rhs = 0.0;
                    for i in 0..m {
                        rhs += rho0[i * r + al] * rho1[k * r + be].first(i)
                            - rho0[i * r + be] * rho1[k * r + al].first(i);
                    }
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Residual of `[u, f·v] − f[u,v] − (ρ^i_α u^α ∂_i f) v`.
pub fn check_leibniz_pullback(
    a: &GeneralizedLieAlgebroid,
    u: Arc<dyn Field>,
    v: Arc<dyn Field>,
    f: SmoothMap,
    plan: &SamplePlan,
) -> Result<f64> {
    leibniz_residual(a, u, v, f, plan, pullback_bracket)
}

pub(crate) type BracketFn =
    fn(&GeneralizedLieAlgebroid, Arc<dyn Field>, Arc<dyn Field>) -> Arc<dyn Field>;

pub(crate) fn leibniz_residual(
    a: &GeneralizedLieAlgebroid,
    u: Arc<dyn Field>,
    v: Arc<dyn Field>,
    f: SmoothMap,
    plan: &SamplePlan,
    bracket: BracketFn,
) -> Result<f64> {
    let (m, r) = (a.m, a.r);
    let fv: Arc<dyn Field> = {
        let (f, v) = (f.clone(), v.clone());
        FnField::shared(r, move |p| {
            let fj = f.jets(p)?;
            Ok(v.jets(p)?.iter().map(|c| c * &fj[0]).collect())
        })
    };
    let lhs = bracket(a, u.clone(), fv);
    let uv = bracket(a, u.clone(), v.clone());
    let mut worst = 0.0f64;
    for s in plan.samples(m, r) {
        let l = lhs.values(&s)?;
        let b = uv.values(&s)?;
        let p1 = Point::new(&s, 1);
        let fj = f.jets(&p1)?;
        let uu = u.jets(&Point::new(&s, 0))?;
        let vv = v.values(&s)?;
        let rho = a.rho_hat(&Point::new(&s[..m], 0).jets().to_vec())?;
        let mut df = 0.0;
        for i in 0..m {
            for al in 0..r {
                df += uu[al].value() * rho[i * r + al].value() * fj[0].first(i);
            }
        }
        for g in 0..r {
            worst = worst.max((l[g] - fj[0].value() * b[g] - df * vv[g]).abs());
        }
    }
    Ok(worst)
}

/// Max `|g̃(h(x))·g(h(x)) − I|` over sampled base points.
pub fn check_gh_invertibility(
    a: &GeneralizedLieAlgebroid,
    gh: &GHMorphism,
    plan: &SamplePlan,
) -> Result<f64> {
    let (m, r) = (a.m, a.r);
    let mut worst = 0.0f64;
    for s in plan.samples(m, r) {
        let hx: Vec<Jet> = a.h.apply(&s[..m])?.into_iter().map(Jet::real).collect();
        let g: Vec<f64> = gh.g_at(r, &hx)?.iter().map(Jet::value).collect();
        let gt: Vec<f64> = gh.gtilde_at(r, &hx)?.iter().map(Jet::value).collect();
        let prod = linalg::matmul(&gt, &g, r);
        for i in 0..r {
            for j in 0..r {
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[i * r + j] - e).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothfn::const_field;

    fn so3_alg(rho: SmoothMap, l: Vec<f64>) -> GeneralizedLieAlgebroid {
        GeneralizedLieAlgebroid::new(
            3,
            3,
            rho,
            SmoothMap::constant(3, 0, &l),
            Diffeo::identity(3),
            Diffeo::identity(3),
        )
        .unwrap()
    }

    #[test]
    fn antisymmetry_examples() {
        let plan = SamplePlan::default().with_count(4);
        assert_eq!(check_antisymmetry(&GeneralizedLieAlgebroid::tangent(2), &plan).unwrap(), 0.0);
        assert_eq!(check_antisymmetry(&so3_alg(zero_anchor(3, 3), so3_values()), &plan).unwrap(), 0.0);
        let mut bad = so3_values();
        bad[(2 * 3 + 1) * 3] = -0.9;
        let res = check_antisymmetry(&so3_alg(zero_anchor(3, 3), bad), &plan).unwrap();
        assert!((res - 0.1).abs() < 1e-15);
    }

    #[test]
    fn jacobi_examples() {
        let plan = SamplePlan::default().with_count(3);
        assert!(check_jacobi(&so3_alg(zero_anchor(3, 3), so3_values()), &plan).unwrap() <= 1e-12);
        assert_eq!(check_jacobi(&GeneralizedLieAlgebroid::tangent(2), &plan).unwrap(), 0.0);
        let mut bad = so3_values();
        bad[(2 * 3) * 3 + 1] = 1.1;
        assert!(check_jacobi(&so3_alg(zero_anchor(3, 3), bad), &plan).unwrap() > 0.05);
    }

    #[test]
    fn anchor_compatibility_examples() {
        let plan = SamplePlan::default().with_count(4);
        assert_eq!(check_anchor_compatibility(&GeneralizedLieAlgebroid::tangent(3), &plan).unwrap(), 0.0);
        assert_eq!(
            check_anchor_compatibility(&so3_alg(zero_anchor(3, 3), so3_values()), &plan).unwrap(),
            0.0
        );
        let res = check_anchor_compatibility(&so3_alg(identity_anchor(3), so3_values()), &plan).unwrap();
        assert_eq!(res, 1.0);
    }

    #[test]
    fn leibniz_examples() {
        let plan = SamplePlan::default().with_count(8);
        let a = GeneralizedLieAlgebroid::tangent(2);
        let u = const_field(vec![1.0, 0.5]);
        let v = const_field(vec![-0.3, 2.0]);
        let c = SmoothMap::parse(2, 2, &["3"]).unwrap();
        assert_eq!(check_leibniz_pullback(&a, u.clone(), v.clone(), c, &plan).unwrap(), 0.0);
        let f = SmoothMap::parse(2, 2, &["x1"]).unwrap();
        assert_eq!(check_leibniz_pullback(&a, u.clone(), v.clone(), f.clone(), &plan).unwrap(), 0.0);
        let g = SmoothMap::parse(2, 2, &["sin(x1)*x2 + y1"]).unwrap();
        let u2: Arc<dyn Field> = Arc::new(SmoothMap::parse(2, 2, &["x2", "x1*y2"]).unwrap());
        assert!(check_leibniz_pullback(&a, u2, v.clone(), g, &plan).unwrap() < 1e-12);
    }

    fn mutant_bracket(
        a: &GeneralizedLieAlgebroid,
        u: Arc<dyn Field>,
        v: Arc<dyn Field>,
    ) -> Arc<dyn Field> {
        let a = a.clone();
        FnField::shared(a.r(), move |p| {
            let uu = u.jets(p)?;
            let vv = v.jets(p)?;
            let l = a.l_hat(&p.jets()[..a.m()])?;
            let r = a.r();
            Ok((0..r)
                .map(|g| {
                    let mut acc = p.zero();
                    for x in 0..r {
                        for y in 0..r {
                            acc = acc + &(&l[a.l_index(g, x, y)] * &uu[x]) * &vv[y];
                        }
                    }
                    acc
                })
                .collect())
        })
    }

    #[test]
    fn leibniz_kills_mutant_without_derivative_term() {
        let plan = SamplePlan::default().with_count(8);
        let a = GeneralizedLieAlgebroid::tangent(2);
        let u = const_field(vec![1.0, 0.0]);
        let v = const_field(vec![0.0, 1.0]);
        let f = SmoothMap::parse(2, 2, &["x1"]).unwrap();
        let res = leibniz_residual(&a, u, v, f, &plan, mutant_bracket).unwrap();
        assert_eq!(res, 1.0);
    }

    #[test]
    fn sample_plan_is_deterministic() {
        let plan = SamplePlan::default();
        assert_eq!(plan.samples(2, 2), plan.samples(2, 2));
        assert_ne!(plan.samples(2, 2), plan.clone().with_seed(7).samples(2, 2));
        let nz = SamplePlan {
            exclude_zero_fiber: true,
            bounds: vec![(-0.2, 0.2)],
            ..SamplePlan::default()
        };
        for s in nz.samples(1, 2) {
            assert!((s[1] * s[1] + s[2] * s[2]).sqrt() >= 0.1);
        }
    }

    #[test]
    fn gh_inverse_computed_when_absent() {
        let a = GeneralizedLieAlgebroid::tangent(1);
        let g = SmoothMap::parse(1, 0, &["1 + 0.1*sin(x1)"]).unwrap();
        let gh = GHMorphism::explicit(g, None).unwrap();
        assert!(check_gh_invertibility(&a, &gh, &SamplePlan::default()).unwrap() < 1e-15);
    }

    #[test]
    fn identity_diffeo_is_exact_noop() {
        let d = Diffeo::identity(2);
        assert_eq!(d.apply(&[0.1, -3.7]).unwrap(), vec![0.1, -3.7]);
        let e = Diffeo::parse(2, &["x1 + 1", "2*x2"]).unwrap();
        assert_eq!(e.jacobian(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0, 2.0]);
        assert!(e.full_rank_at(&[0.0, 0.0]).unwrap());
    }
}
