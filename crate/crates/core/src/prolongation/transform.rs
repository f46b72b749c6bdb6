use super::RhoEtaConnection;
use crate::algebroid::{Diffeo, GHMorphism, GeneralizedLieAlgebroid, SamplePlan};
use crate::error::{Error, Result};
use crate::linalg;
use crate::smoothfn::{Field, Jet, Point, SmoothMap};

/// A change of chart `x′ = φ(x)`, `y′ = M(x)y`, `z′ = Λ(x)z`.
#[derive(Clone, Debug)]
pub struct TransitionData {
    pub phi: Diffeo,
    /// `M^{a′}_a` as `[a′*r + a]`.
    pub mmat: SmoothMap,
    /// `Λ^{α′}_α` as `[α′*r + α]`.
    pub lam: SmoothMap,
}

impl TransitionData {
    pub fn new(phi: Diffeo, mmat: SmoothMap, lam: SmoothMap) -> Result<TransitionData> {
        let r = (mmat.arity_out() as f64).sqrt() as usize;
        for (what, map) in [("M", &mmat), ("Lambda", &lam)] {
            if map.r() != 0 || map.m() != phi.dim() || map.arity_out() != r * r {
                return Err(Error::Dimension {
                    what: what.into(),
                    expected: r * r,
                    got: map.arity_out(),
                });
            }
        }
        Ok(TransitionData { phi, mmat, lam })
    }

    pub fn identity(m: usize, r: usize) -> TransitionData {
        let mut eye = vec![0.0; r * r];
        for k in 0..r {
            eye[k * r + k] = 1.0;
        }
        TransitionData {
            phi: Diffeo::identity(m),
            mmat: SmoothMap::constant(m, 0, &eye),
            lam: SmoothMap::constant(m, 0, &eye),
        }
    }
}

fn invert(a: &[Jet], r: usize, what: &str, sample: usize) -> Result<Vec<Jet>> {
    let vals: Vec<f64> = a.iter().map(Jet::value).collect();
    let (_, piv) = linalg::pivots(&vals, r);
    if linalg::pivot_ratio(&piv) < linalg::ABORT_PIVOT_RATIO {
        return Err(Error::SingularTransition {
            sample,
            what: what.into(),
        });
    }
    linalg::inverse_jets(a, r)
}

fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

/// Sampled residuals of the change rules of the anchor, of a connection and
/// of a semispray, comparing the primed presentation at `(φ(x), M(x)y)` with
/// the rule's right-hand side built at `(x, y)`.
///
/// `avert` is the combined vertical coefficient `−2(G − ¼F)` of a semispray.
/// Also reports `lambda_m_consistency`, the largest `|Λ − M|`, which must
/// vanish when the algebroid and the vector bundle coincide.
pub fn verify_transformation_laws(
    a: &GeneralizedLieAlgebroid,
    conn: Option<&RhoEtaConnection>,
    avert: Option<&dyn Field>,
    gh: &GHMorphism,
    trans: &TransitionData,
    plan: &SamplePlan,
) -> Result<Vec<(String, f64)>> {
    let (m, r) = (a.m(), a.r());
    if trans.phi.dim() != m || trans.mmat.arity_out() != r * r {
        return Err(Error::Dimension {
            what: "transition".into(),
            expected: m,
            got: trans.phi.dim(),
        });
    }
    let mut rho_res = 0.0f64;
    let mut lm_res = 0.0f64;
    let mut conn_res = 0.0f64;
    let mut spray_res = 0.0f64;
    for (k, s) in plan.samples(m, r).iter().enumerate() {
        let (x, y) = s.split_at(m);
        let xp = trans.phi.apply(x)?;
        let dphi = trans.phi.jacobian(x)?;
        let px = Point::new(x, 1);
        let mj = trans.mmat.eval_jets(px.jets())?;
        let mv = values(&mj);
        let minv = invert(&mj, r, "M", k)?;
        let lam = trans.lam.eval(x)?;
        let lj: Vec<Jet> = lam.iter().map(|&v| Jet::real(v)).collect();
        let laminv = values(&invert(&lj, r, "Lambda", k)?);
        lm_res = lm_res.max(linalg::max_abs_diff(&lam, &mv));

        // ρ′^{i′}_{α′}(x′) = Λ^α_{α′} ρ^i_α(x) ∂x^{i′}/∂x^i
        let rho = a.rho().eval(x)?;
        let rho_p = a.rho().eval(&xp)?;
        for ip in 0..m {
            for ap in 0..r {
                let mut rhs = 0.0;
                for i in 0..m {
                    for al in 0..r {
                        rhs += laminv[al * r + ap] * rho[i * r + al] * dphi[ip * m + i];
                    }
                }
                rho_res = rho_res.max((rho_p[ip * r + ap] - rhs).abs());
            }
        }

        let yp: Vec<f64> = (0..r).map(|ap| (0..r).map(|b| mv[ap * r + b] * y[b]).sum()).collect();
        let mut primed = xp.clone();
        primed.extend_from_slice(&yp);
        let hx = a.h().apply(x)?;
        let rho_h = a.rho().eval(&hx)?;

        if let Some(conn) = conn {
            // Γ′ = M [ρ̂^i_γ ∂_i(M⁻¹)^a_{b′} y^{b′} + Γ^a_γ] Λ⁻¹(h(x))
            let gp = conn.values(&primed)?;
            let g = conn.values(s)?;
            let lh = trans.lam.eval(&hx)?;
            let lhj: Vec<Jet> = lh.iter().map(|&v| Jet::real(v)).collect();
            let lhinv = values(&invert(&lhj, r, "Lambda", k)?);
            let mut inner = vec![0.0; r * r];
            for aa in 0..r {
                for ga in 0..r {
                    let mut t = g[aa * r + ga];
                    for i in 0..m {
                        for bp in 0..r {
                            t += rho_h[i * r + ga] * minv[aa * r + bp].first(i) * yp[bp];
                        }
                    }
                    inner[aa * r + ga] = t;
                }
            }
            let rhs = linalg::matmul(&linalg::matmul(&mv, &inner, r), &lhinv, r);
            conn_res = conn_res.max(linalg::max_abs_diff(&gp, &rhs));
        }

        if let Some(av) = avert {
            // Avert′ = M(h(x))·Avert + (∂_i M y)·ρ̂^i_a (ĝ y)^a
            let avp = av.values(&primed)?;
            let av0 = av.values(s)?;
            let mh = trans.mmat.eval(&hx)?;
            let hxj: Vec<Jet> = hx.iter().map(|&v| Jet::real(v)).collect();
            let g = values(&gh.g_at(r, &hxj)?);
            let gy: Vec<f64> = (0..r).map(|al| (0..r).map(|b| g[al * r + b] * y[b]).sum()).collect();
            for ap in 0..r {
                let mut rhs: f64 = (0..r).map(|b| mh[ap * r + b] * av0[b]).sum();
                for i in 0..m {
                    let dyp: f64 = (0..r).map(|b| mj[ap * r + b].first(i) * y[b]).sum();
                    let v: f64 = (0..r).map(|al| rho_h[i * r + al] * gy[al]).sum();
                    rhs += dyp * v;
                }
                spray_res = spray_res.max((avp[ap] - rhs).abs());
            }
        }
    }
    let mut out = vec![
        ("rho_law".to_string(), rho_res),
        ("lambda_m_consistency".to_string(), lm_res),
    ];
    if conn.is_some() {
        out.push(("connection_law".into(), conn_res));
    }
    if avert.is_some() {
        out.push(("semispray_law".into(), spray_res));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale2(m: usize) -> TransitionData {
        let srcs: Vec<String> = (1..=m).map(|i| format!("2*x{i}")).collect();
        let mut two = vec![0.0; m * m];
        for k in 0..m {
            two[k * m + k] = 2.0;
        }
        TransitionData::new(
            Diffeo::parse(m, &srcs).unwrap(),
            SmoothMap::constant(m, 0, &two),
            SmoothMap::constant(m, 0, &two),
        )
        .unwrap()
    }

    #[test]
    fn identity_transition_has_zero_residuals() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let c = RhoEtaConnection::new(SmoothMap::parse(2, 2, &["x1*y2", "y1", "x2", "y1*y2"]).unwrap()).unwrap();
        let av = SmoothMap::parse(2, 2, &["-x1*y2", "sin(y1)"]).unwrap();
        let res = verify_transformation_laws(
            &t,
            Some(&c),
            Some(&av),
            &GHMorphism::identity(2),
            &TransitionData::identity(2, 2),
            &SamplePlan::default().with_count(8),
        )
        .unwrap();
        assert_eq!(res.len(), 4);
        for (n, v) in res {
            assert_eq!(v, 0.0, "{n}");
        }
    }

    #[test]
    fn linear_scale_on_flat_tangent_presentation() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let res = verify_transformation_laws(
            &t,
            Some(&RhoEtaConnection::zero(2)),
            None,
            &GHMorphism::identity(2),
            &scale2(2),
            &SamplePlan::default().with_count(8),
        )
        .unwrap();
        for (n, v) in res {
            assert!(v <= 1e-9, "{n}: {v}");
        }
    }

    #[test]
    fn mismatched_lambda_is_reported() {
        let t = GeneralizedLieAlgebroid::tangent(1);
        let trans = TransitionData::new(
            Diffeo::parse(1, &["2*x1"]).unwrap(),
            SmoothMap::constant(1, 0, &[2.0]),
            SmoothMap::constant(1, 0, &[3.0]),
        )
        .unwrap();
        let res =
            verify_transformation_laws(&t, None, None, &GHMorphism::identity(1), &trans, &SamplePlan::default()).unwrap();
        let get = |k: &str| res.iter().find(|(n, _)| n == k).unwrap().1;
        assert_eq!(get("lambda_m_consistency"), 1.0);
        assert!(get("rho_law") > 0.3);
    }

    #[test]
    fn singular_m_is_rejected() {
        let t = GeneralizedLieAlgebroid::tangent(1);
        let trans = TransitionData::new(
            Diffeo::identity(1),
            SmoothMap::constant(1, 0, &[0.0]),
            SmoothMap::constant(1, 0, &[1.0]),
        )
        .unwrap();
        assert!(matches!(
            verify_transformation_laws(&t, None, None, &GHMorphism::identity(1), &trans, &SamplePlan::default()),
            Err(Error::SingularTransition { sample: 0, .. })
        ));
    }
}
