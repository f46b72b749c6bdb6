//! Distinguished tensor fields on the prolongation and their covariant
//! derivatives with respect to a distinguished linear connection.
//!
//! Components are stored row-major over the slots, slot 0 most significant.
//! Every index ranges over `0..r`.

use std::sync::Arc;

use crate::algebroid::{GeneralizedLieAlgebroid, SamplePlan};
use crate::error::{Error, Result};
use crate::prolongation::RhoEtaConnection;
use crate::smoothfn::{const_field, Field, FnField, Jet, Point, SmoothMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Contravariant along `δ̃_α`.
    HUp,
    /// Covariant along `dz̃^β`.
    HDown,
    /// Contravariant along `∂̇_a`.
    VUp,
    /// Covariant along `δỹ^b`.
    VDown,
}

impl Slot {
    fn is_up(self) -> bool {
        matches!(self, Slot::HUp | Slot::VUp)
    }

    fn is_horizontal(self) -> bool {
        matches!(self, Slot::HUp | Slot::HDown)
    }
}

/// Counts `(p, q, r, s)` of horizontal-up, horizontal-down, vertical-up and
/// vertical-down indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Signature {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
}

impl Signature {
    pub fn new(p: usize, q: usize, r: usize, s: usize) -> Signature {
        Signature { p, q, r, s }
    }

    pub fn total(&self) -> usize {
        self.p + self.q + self.r + self.s
    }

    /// Slots in the canonical order `HUp^p HDown^q VUp^r VDown^s`.
    pub fn slots(&self) -> Vec<Slot> {
        let mut v = vec![Slot::HUp; self.p];
        v.extend(vec![Slot::HDown; self.q]);
        v.extend(vec![Slot::VUp; self.r]);
        v.extend(vec![Slot::VDown; self.s]);
        v
    }
}

#[derive(Clone)]
pub struct DTensorField {
    slots: Vec<Slot>,
    r: usize,
    coef: Arc<dyn Field>,
}

impl std::fmt::Debug for DTensorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DTensorField({:?}, r={})", self.slots, self.r)
    }
}

fn extent(r: usize, k: usize) -> Result<usize> {
    r.checked_pow(k as u32)
        .ok_or_else(|| Error::Signature(format!("{k} slots of range {r} overflow")))
}

impl DTensorField {
    pub fn new(sig: Signature, r: usize, coef: Arc<dyn Field>) -> Result<DTensorField> {
        DTensorField::with_slots(sig.slots(), r, coef)
    }

    /// A tensor with an arbitrary slot order.
    pub fn with_slots(slots: Vec<Slot>, r: usize, coef: Arc<dyn Field>) -> Result<DTensorField> {
        let n = extent(r, slots.len())?;
        if coef.dim() != n {
            return Err(Error::Signature(format!(
                "{} slots of range {r} need {n} components, got {}",
                slots.len(),
                coef.dim()
            )));
        }
        Ok(DTensorField { slots, r, coef })
    }

    pub fn from_map(sig: Signature, r: usize, map: SmoothMap) -> Result<DTensorField> {
        DTensorField::new(sig, r, Arc::new(map))
    }

    pub fn constant(sig: Signature, r: usize, values: Vec<f64>) -> Result<DTensorField> {
        DTensorField::new(sig, r, const_field(values))
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn field(&self) -> &Arc<dyn Field> {
        &self.coef
    }

    pub fn signature(&self) -> Signature {
        let count = |s: Slot| self.slots.iter().filter(|&&x| x == s).count();
        Signature::new(count(Slot::HUp), count(Slot::HDown), count(Slot::VUp), count(Slot::VDown))
    }

    pub fn values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.coef.values(state)
    }

    /// `self ⊗ other`, with the slots of `self` first.
    pub fn tensor(&self, other: &DTensorField) -> Result<DTensorField> {
        if self.r != other.r {
            return Err(Error::Signature("tensor factors over different ranges".into()));
        }
        let mut slots = self.slots.clone();
        slots.extend_from_slice(&other.slots);
        let (a, b) = (self.coef.clone(), other.coef.clone());
        let n = extent(self.r, slots.len())?;
        let coef = FnField::shared(n, move |p| {
            let (u, v) = (a.jets(p)?, b.jets(p)?);
            let mut out = Vec::with_capacity(u.len() * v.len());
            for x in &u {
                for y in &v {
                    out.push(x * y);
                }
            }
            Ok(out)
        });
        DTensorField::with_slots(slots, self.r, coef)
    }
}

/// Block coefficients of a distinguished linear connection, each with `r³`
/// outputs at `[(upper*r + lower)*r + direction]`:
/// `hh = H^α_{βγ}`, `hv = H^a_{bγ}`, `vh = V^α_{βc}`, `vv = V^a_{bc}`.
#[derive(Clone)]
pub struct DistinguishedConnection {
    pub hh: Arc<dyn Field>,
    pub hv: Arc<dyn Field>,
    pub vh: Arc<dyn Field>,
    pub vv: Arc<dyn Field>,
    r: usize,
}

impl DistinguishedConnection {
    pub fn new(
        r: usize,
        hh: Arc<dyn Field>,
        hv: Arc<dyn Field>,
        vh: Arc<dyn Field>,
        vv: Arc<dyn Field>,
    ) -> Result<DistinguishedConnection> {
        for (name, f) in [("hh", &hh), ("hv", &hv), ("vh", &vh), ("vv", &vv)] {
            if f.dim() != r * r * r {
                return Err(Error::Dimension {
                    what: format!("connection block {name}"),
                    expected: r * r * r,
                    got: f.dim(),
                });
            }
        }
        Ok(DistinguishedConnection { hh, hv, vh, vv, r })
    }

    pub fn zero(r: usize) -> DistinguishedConnection {
        let z = const_field(vec![0.0; r * r * r]);
        DistinguishedConnection {
            hh: z.clone(),
            hv: z.clone(),
            vh: z.clone(),
            vv: z,
            r,
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }
}

/// `∂Γ^a_γ/∂y^b` at `[(a*r + b)*r + γ]`.
pub fn gamma_y_derivative(conn: &RhoEtaConnection) -> Arc<dyn Field> {
    let r = conn.r();
    let conn = conn.clone();
    FnField::shared(r * r * r, move |p| {
        let m = p.dim() - r;
        let g = conn.gamma(&p.raised(1))?;
        let mut out = Vec::with_capacity(r * r * r);
        for a in 0..r {
            for b in 0..r {
                for c in 0..r {
                    out.push(g[a * r + c].deriv(m + b));
                }
            }
        }
        Ok(out)
    })
}

/// The Berwald connection `(∂Γ/∂y, ∂Γ/∂y, 0, 0)`.
pub fn berwald_from_connection(conn: &RhoEtaConnection) -> DistinguishedConnection {
    let r = conn.r();
    let d = gamma_y_derivative(conn);
    let z = const_field(vec![0.0; r * r * r]);
    DistinguishedConnection {
        hh: d.clone(),
        hv: d,
        vh: z.clone(),
        vv: z,
        r,
    }
}

fn check_r(t: &DTensorField, dc: &DistinguishedConnection) -> Result<()> {
    if t.r != dc.r {
        return Err(Error::Signature(format!(
            "tensor range {} does not match connection range {}",
            t.r, dc.r
        )));
    }
    Ok(())
}

/// Adds the connection terms of one covariant derivative in direction `dir`.
fn corrections(slots: &[Slot], r: usize, t: &[Jet], hblock: &[Jet], vblock: &[Jet], dir: usize, out: &mut [Jet]) {
    let k = slots.len();
    let strides: Vec<usize> = (0..k).map(|s| r.pow((k - 1 - s) as u32)).collect();
    for (idx, o) in out.iter_mut().enumerate() {
        for (s, &slot) in slots.iter().enumerate() {
            let block = if slot.is_horizontal() { hblock } else { vblock };
            let d = (idx / strides[s]) % r;
            let base = idx - d * strides[s];
            for j in 0..r {
                let tj = &t[base + j * strides[s]];
                let c = if slot.is_up() {
                    &block[(d * r + j) * r + dir]
                } else {
                    &block[(j * r + d) * r + dir]
                };
                if c.value() == 0.0 && c.is_constant() {
                    continue;
                }
                let term = c * tj;
                *o = if slot.is_up() { &*o + &term } else { &*o - &term };
            }
        }
    }
}

/// `T_{|γ}` as a tensor field with the slots of `T`.
pub fn h_derivative_field(
    t: &DTensorField,
    dc: &DistinguishedConnection,
    alg: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    gamma_idx: usize,
) -> Result<DTensorField> {
    check_r(t, dc)?;
    let r = t.r;
    if gamma_idx >= r || alg.r() != r || conn.r() != r {
        return Err(Error::Signature(format!("direction {gamma_idx} outside 0..{r}")));
    }
    let (t2, dc, alg, conn) = (t.clone(), dc.clone(), alg.clone(), conn.clone());
    let coef = FnField::shared(t.coef.dim(), move |p: &Point| {
        let m = alg.m();
        let t1 = t2.coef.jets(&p.raised(1))?;
        let t0: Vec<Jet> = t1.iter().map(|j| j.truncate(p.order())).collect();
        let rho = alg.rho_hat(&p.jets()[..m])?;
        let g = conn.gamma(p)?;
        let mut out: Vec<Jet> = t1
            .iter()
            .map(|f| {
                let mut acc = p.zero();
                for i in 0..m {
                    acc = acc + &rho[i * r + gamma_idx] * &f.deriv(i);
                }
                for b in 0..r {
                    acc = acc - &g[b * r + gamma_idx] * &f.deriv(m + b);
                }
                acc
            })
            .collect();
        corrections(&t2.slots, r, &t0, &dc.hh.jets(p)?, &dc.hv.jets(p)?, gamma_idx, &mut out);
        Ok(out)
    });
    DTensorField::with_slots(t.slots.clone(), r, coef)
}

/// `T|_c` as a tensor field with the slots of `T`.
pub fn v_derivative_field(t: &DTensorField, dc: &DistinguishedConnection, c: usize) -> Result<DTensorField> {
    check_r(t, dc)?;
    let r = t.r;
    if c >= r {
        return Err(Error::Signature(format!("direction {c} outside 0..{r}")));
    }
    let (t2, dc) = (t.clone(), dc.clone());
    let coef = FnField::shared(t.coef.dim(), move |p: &Point| {
        let m = p.dim() - r;
        let t1 = t2.coef.jets(&p.raised(1))?;
        let t0: Vec<Jet> = t1.iter().map(|j| j.truncate(p.order())).collect();
        let mut out: Vec<Jet> = t1.iter().map(|f| f.deriv(m + c)).collect();
        corrections(&t2.slots, r, &t0, &dc.vh.jets(p)?, &dc.vv.jets(p)?, c, &mut out);
        Ok(out)
    });
    DTensorField::with_slots(t.slots.clone(), r, coef)
}

pub fn h_covariant_derivative(
    t: &DTensorField,
    dc: &DistinguishedConnection,
    alg: &GeneralizedLieAlgebroid,
    conn: &RhoEtaConnection,
    gamma_idx: usize,
    state: &[f64],
) -> Result<Vec<f64>> {
    h_derivative_field(t, dc, alg, conn, gamma_idx)?.values(state)
}

pub fn v_covariant_derivative(t: &DTensorField, dc: &DistinguishedConnection, c: usize, state: &[f64]) -> Result<Vec<f64>> {
    v_derivative_field(t, dc, c)?.values(state)
}

/// Largest `|H^a_{bγ} − H^α_{βγ}|` and `|V^a_{bc} − V^α_{βc}|` over samples;
/// zero for a normal connection.
pub fn normality_residual(dc: &DistinguishedConnection, m: usize, plan: &SamplePlan) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in plan.samples(m, dc.r) {
        for (a, b) in [(&dc.hh, &dc.hv), (&dc.vh, &dc.vv)] {
            let (u, v) = (a.values(&s)?, b.values(&s)?);
            worst = u.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
        }
    }
    Ok(worst)
}

pub fn is_normal(dc: &DistinguishedConnection, m: usize, plan: &SamplePlan, tol: f64) -> Result<bool> {
    Ok(normality_residual(dc, m, plan)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy() -> RhoEtaConnection {
        RhoEtaConnection::new(SmoothMap::parse(2, 2, &["x1*y2", "sin(y1)*x2", "x2^2*y1", "y1*y2-x1"]).unwrap()).unwrap()
    }

    #[test]
    fn berwald_blocks() {
        let b = berwald_from_connection(&RhoEtaConnection::zero(2));
        assert!(b.hh.values(&[0.1, 0.2, 0.3, 0.4]).unwrap().iter().all(|v| *v == 0.0));

        // Γ^a_γ = c^a_{γb} y^b with c^a_{γb} = a + 2γ + 4b
        let srcs: Vec<String> = (0..2)
            .flat_map(|a| (0..2).map(move |g| format!("{}*y1 + {}*y2", a + 2 * g, a + 2 * g + 4)))
            .collect();
        let c = RhoEtaConnection::new(SmoothMap::parse(2, 2, &srcs).unwrap()).unwrap();
        let b = berwald_from_connection(&c);
        let v = b.hv.values(&[0.5, -0.1, 0.3, 0.9]).unwrap();
        for a in 0..2 {
            for bb in 0..2 {
                for g in 0..2 {
                    assert_eq!(v[(a * 2 + bb) * 2 + g], (a + 2 * g + 4 * bb) as f64);
                }
            }
        }
        assert!(is_normal(&b, 2, &SamplePlan::default().with_count(4), 0.0).unwrap());
    }

    #[test]
    fn berwald_matches_central_differences() {
        let c = wavy();
        let b = berwald_from_connection(&c);
        let s = [0.3, -0.7, 1.1, 0.4];
        let v = b.hh.values(&s).unwrap();
        for bb in 0..2 {
            let h = 1e-6;
            let mut up = s;
            let mut dn = s;
            up[2 + bb] += h;
            dn[2 + bb] -= h;
            let (gu, gd) = (c.values(&up).unwrap(), c.values(&dn).unwrap());
            for a in 0..2 {
                for g in 0..2 {
                    let fd = (gu[a * 2 + g] - gd[a * 2 + g]) / (2.0 * h);
                    assert!((fd - v[(a * 2 + bb) * 2 + g]).abs() <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn scalar_derivatives() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let c = wavy();
        let f = DTensorField::from_map(Signature::default(), 2, SmoothMap::parse(2, 2, &["x1^2*y2"]).unwrap()).unwrap();
        let dc = berwald_from_connection(&c);
        let s = [0.3, -0.7, 1.1, 0.4];
        let g = c.values(&s).unwrap();
        // ρ̃(δ̃_0) f = ∂_{x1} f − Γ^b_0 ∂_{y^b} f
        let expect = 2.0 * 0.3 * 0.4 - g[2] * 0.09;
        let got = h_covariant_derivative(&f, &dc, &t, &c, 0, &s).unwrap()[0];
        assert!((got - expect).abs() < 1e-14);
        assert_eq!(v_covariant_derivative(&f, &dc, 1, &s).unwrap()[0], 0.09);
        assert_eq!(v_covariant_derivative(&f, &dc, 0, &s).unwrap()[0], 0.0);
    }

    #[test]
    fn liouville_tensor_derivatives() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let y = DTensorField::from_map(Signature::new(0, 0, 1, 0), 2, SmoothMap::parse(2, 2, &["y1", "y2"]).unwrap()).unwrap();
        let flat = RhoEtaConnection::zero(2);
        let dc = berwald_from_connection(&flat);
        let s = [0.3, -0.7, 1.1, 0.4];
        for g in 0..2 {
            assert_eq!(h_covariant_derivative(&y, &dc, &t, &flat, g, &s).unwrap(), vec![0.0, 0.0]);
        }
        let dz = DistinguishedConnection::zero(2);
        assert_eq!(v_covariant_derivative(&y, &dz, 1, &s).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn constant_tensor_with_zero_connection() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let k = DTensorField::constant(Signature::new(1, 1, 1, 1), 2, (0..16).map(|v| v as f64).collect()).unwrap();
        let dc = DistinguishedConnection::zero(2);
        let c = RhoEtaConnection::zero(2);
        let s = [0.3, -0.7, 1.1, 0.4];
        assert!(h_covariant_derivative(&k, &dc, &t, &c, 1, &s).unwrap().iter().all(|v| *v == 0.0));
        assert!(v_covariant_derivative(&k, &dc, 0, &s).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn malformed_signature_is_rejected() {
        let err = DTensorField::constant(Signature::new(1, 1, 0, 0), 2, vec![0.0; 3]);
        assert!(matches!(err, Err(Error::Signature(_))));
    }

    #[test]
    fn leibniz_over_tensor_product() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let c = wavy();
        let dc = berwald_from_connection(&c);
        let a = DTensorField::from_map(
            Signature::new(1, 0, 0, 1),
            2,
            SmoothMap::parse(2, 2, &["x1*y1", "y2^2", "sin(x2)", "x1+y1*y2"]).unwrap(),
        )
        .unwrap();
        let b = DTensorField::from_map(Signature::new(0, 1, 1, 0), 2, SmoothMap::parse(2, 2, &["y1", "x2*y2", "1", "x1"]).unwrap())
            .unwrap();
        let ab = a.tensor(&b).unwrap();
        let s = [0.3, -0.7, 1.1, 0.4];
        for g in 0..2 {
            let lhs = h_covariant_derivative(&ab, &dc, &t, &c, g, &s).unwrap();
            let da = h_derivative_field(&a, &dc, &t, &c, g).unwrap();
            let db = h_derivative_field(&b, &dc, &t, &c, g).unwrap();
            let r1 = da.tensor(&b).unwrap().values(&s).unwrap();
            let r2 = a.tensor(&db).unwrap().values(&s).unwrap();
            for k in 0..16 {
                assert!((lhs[k] - r1[k] - r2[k]).abs() < 1e-12);
            }
        }
    }
}
