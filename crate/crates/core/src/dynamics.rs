//! ODE synthesis from semisprays and sprays, fixed-step RK4, parallel
//! transport and lift-condition checks.

use std::sync::Arc;

use crate::algebroid::{GHMorphism, GeneralizedLieAlgebroid};
use crate::error::{Error, Result};
use crate::mechanics::{canonical_spray, MechanicalSystem, SemisprayField};
use crate::prolongation::RhoEtaConnection;
use crate::smoothfn::{Field, Jet, SmoothMap};

type Rhs = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// An autonomous first-order system on `(x, y)`.
#[derive(Clone)]
pub struct OdeField {
    m: usize,
    r: usize,
    rhs: Arc<Rhs>,
}

impl std::fmt::Debug for OdeField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OdeField(m={}, r={})", self.m, self.r)
    }
}

impl OdeField {
    pub fn new<F>(m: usize, r: usize, rhs: F) -> OdeField
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        OdeField {
            m,
            r,
            rhs: Arc::new(rhs),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.m + self.r
    }

    pub fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        (self.rhs)(state)
    }
}

/// `ẋ^i = ρ^i_a(η(h(x))) g^a_b(h(x)) y^b`.
pub fn base_velocity(alg: &GeneralizedLieAlgebroid, gh: &GHMorphism, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let (m, r) = (alg.m(), alg.r());
    let hx = alg.h().apply(x)?;
    let rho = alg.rho().eval(&alg.eta().apply(&hx)?)?;
    let hxj: Vec<Jet> = hx.iter().map(|&v| Jet::real(v)).collect();
    let g = gh.g_at(r, &hxj)?;
    let gy: Vec<f64> = (0..r)
        .map(|a| (0..r).map(|b| g[a * r + b].value() * y[b]).sum())
        .collect();
    Ok((0..m).map(|i| (0..r).map(|a| rho[i * r + a] * gy[a]).sum()).collect())
}

/// `ẋ` from the base equation, `ẏ = Avert`.
pub fn synthesize_semispray_ode(sys: &MechanicalSystem, s: &SemisprayField) -> OdeField {
    let (m, r) = (sys.m(), sys.r());
    let (alg, gh, s) = (sys.algebroid.clone(), sys.gh.clone(), s.clone());
    OdeField::new(m, r, move |st| {
        let mut out = base_velocity(&alg, &gh, &st[..m], &st[m..])?;
        out.extend(s.values(st)?);
        Ok(out)
    })
}

/// The integral-curve system of the canonical spray of `conn`.
pub fn synthesize_spray_ode(sys: &MechanicalSystem, conn: &RhoEtaConnection) -> OdeField {
    synthesize_semispray_ode(sys, &canonical_spray(conn, &sys.gh, &sys.algebroid))
}

/// A named scalar channel evaluated after every accepted step.
#[derive(Clone)]
pub struct Monitor {
    pub name: String,
    field: Arc<dyn Field>,
}

impl std::fmt::Debug for Monitor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Monitor({})", self.name)
    }
}

impl Monitor {
    pub fn new(name: &str, field: Arc<dyn Field>) -> Monitor {
        assert_eq!(field.dim(), 1, "monitor must be scalar");
        Monitor {
            name: name.to_string(),
            field,
        }
    }

    pub fn parse(name: &str, m: usize, r: usize, src: &str) -> Result<Monitor> {
        Ok(Monitor::new(name, Arc::new(SmoothMap::parse(m, r, &[src])?)))
    }

    pub fn eval(&self, state: &[f64]) -> Result<f64> {
        Ok(self.field.values(state)?[0])
    }
}

/// Samples of a lift `(x(t), y(t))` with monitor channels.
///
/// When integration stopped early `abort` holds the reason and the samples
/// cover the accepted steps only.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub m: usize,
    pub r: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub monitors: Vec<(String, Vec<f64>)>,
    pub abort: Option<Error>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x(&self, k: usize) -> &[f64] {
        &self.states[k][..self.m]
    }

    pub fn y(&self, k: usize) -> &[f64] {
        &self.states[k][self.m..]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitors.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// `max_k |v_k − v_0| / |v_0|` for a monitor, absolute when `v_0 = 0`.
    pub fn relative_drift(&self, name: &str) -> Option<f64> {
        let v = self.monitor(name)?;
        let scale = if v[0] == 0.0 { 1.0 } else { v[0].abs() };
        Some(v.iter().map(|w| (w - v[0]).abs()).fold(0.0, f64::max) / scale)
    }

    /// The trajectory, or the abort reason.
    pub fn ok(self) -> Result<Trajectory> {
        match self.abort {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Step times from `t0` to `t1`: full steps of `|dt|` toward `t1`, then a
/// partial step unless the span is an integer multiple of `dt` to 1e-9.
pub fn step_times(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt != 0.0 && t0.is_finite() && t1.is_finite()) {
        return Err(Error::BadParams {
            id: "integrate".into(),
            detail: format!("dt = {dt}, span [{t0}, {t1}]"),
        });
    }
    let h = dt.abs() * (t1 - t0).signum();
    if t1 == t0 {
        return Ok(vec![t0]);
    }
    let q = (t1 - t0) / h;
    let n = if (q - q.round()).abs() < 1e-9 { q.round() as usize } else { q.floor() as usize };
    let mut out: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * h).collect();
    if (q - q.round()).abs() < 1e-9 {
        *out.last_mut().unwrap() = t1;
    } else {
        out.push(t1);
    }
    Ok(out)
}

fn rk4_step<F>(f: &F, t: f64, s: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { s.iter().zip(k).map(|(v, kv)| v + a * kv).collect() };
    let k1 = f(t, s)?;
    let k2 = f(t + h / 2.0, &axpy(h / 2.0, &k1))?;
    let k3 = f(t + h / 2.0, &axpy(h / 2.0, &k2))?;
    let k4 = f(t + h, &axpy(h, &k3))?;
    Ok((0..s.len())
        .map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// RK4 on `u`, recording `record(t, u)` after each accepted step.
fn integrate_generic<F, R>(
    f: F,
    record: R,
    u0: &[f64],
    times: &[f64],
    m: usize,
    r: usize,
    monitors: &[Monitor],
) -> Trajectory
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    R: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut traj = Trajectory {
        m,
        r,
        times: Vec::with_capacity(times.len()),
        states: Vec::with_capacity(times.len()),
        monitors: monitors.iter().map(|mo| (mo.name.clone(), Vec::new())).collect(),
        abort: None,
    };
    let push = |traj: &mut Trajectory, t: f64, u: &[f64]| -> Result<()> {
        let st = record(t, u)?;
        if st.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        let vals = monitors.iter().map(|mo| mo.eval(&st)).collect::<Result<Vec<_>>>()?;
        traj.times.push(t);
        traj.states.push(st);
        for (k, v) in vals.into_iter().enumerate() {
            traj.monitors[k].1.push(v);
        }
        Ok(())
    };
    if let Err(e) = push(&mut traj, times[0], u0) {
        traj.abort = Some(e);
        return traj;
    }
    let mut u = u0.to_vec();
    for w in times.windows(2) {
        let res = rk4_step(&f, w[0], &u, w[1] - w[0]).and_then(|next| {
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t: w[1] });
            }
            push(&mut traj, w[1], &next)?;
            Ok(next)
        });
        match res {
            Ok(next) => u = next,
            Err(e) => {
                traj.abort = Some(e);
                break;
            }
        }
    }
    traj
}

/// Fixed-step RK4 from `t0` to `t1` (either direction) with monitors.
pub fn integrate_rk4(
    f: &OdeField,
    x0: &[f64],
    y0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
    monitors: &[Monitor],
) -> Result<Trajectory> {
    if x0.len() != f.m || y0.len() != f.r {
        return Err(Error::Dimension {
            what: "initial state".into(),
            expected: f.dim(),
            got: x0.len() + y0.len(),
        });
    }
    let times = step_times(t0, t1, dt)?;
    let mut s0 = x0.to_vec();
    s0.extend_from_slice(y0);
    Ok(integrate_generic(
        |_, s| f.eval(s),
        |_, s| Ok(s.to_vec()),
        &s0,
        &times,
        f.m,
        f.r,
        monitors,
    ))
}

/// A base curve `t ↦ x(t)` with its velocity.
#[derive(Clone, Debug)]
pub enum BaseCurve {
    /// Components as expressions in `x1`, read as `t`.
    Map(SmoothMap),
    /// Piecewise cubic Hermite through samples `(t_k, x_k, ẋ_k)`.
    Sampled {
        times: Vec<f64>,
        xs: Vec<Vec<f64>>,
        xdots: Vec<Vec<f64>>,
    },
}

impl BaseCurve {
    pub fn parse<S: AsRef<str>>(srcs: &[S]) -> Result<BaseCurve> {
        Ok(BaseCurve::Map(SmoothMap::parse(1, 0, srcs)?))
    }

    /// The base curve of a trajectory, with velocities from the base
    /// equation of `sys`.
    pub fn from_trajectory(sys: &MechanicalSystem, traj: &Trajectory) -> Result<BaseCurve> {
        let xdots = (0..traj.len())
            .map(|k| base_velocity(&sys.algebroid, &sys.gh, traj.x(k), traj.y(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(BaseCurve::Sampled {
            times: traj.times.clone(),
            xs: (0..traj.len()).map(|k| traj.x(k).to_vec()).collect(),
            xdots,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseCurve::Map(f) => f.arity_out(),
            BaseCurve::Sampled { xs, .. } => xs[0].len(),
        }
    }

    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        match self {
            BaseCurve::Map(f) => f.eval(&[t]),
            BaseCurve::Sampled { times, xs, xdots } => {
                let fwd = times.len() < 2 || times[1] >= times[0];
                let k = {
                    let mut lo = 0;
                    let mut hi = times.len().saturating_sub(1);
                    // largest k with times[k] on the near side of t
                    while hi > lo + 1 {
                        let mid = (lo + hi) / 2;
                        if (times[mid] <= t) == fwd {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    lo
                };
                if times.len() == 1 {
                    return Ok(xs[0].clone());
                }
                let (t0, t1) = (times[k], times[k + 1]);
                let h = t1 - t0;
                let s = (t - t0) / h;
                let (h00, h10) = (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s);
                let (h01, h11) = (-2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
                Ok((0..xs[k].len())
                    .map(|i| h00 * xs[k][i] + h10 * h * xdots[k][i] + h01 * xs[k + 1][i] + h11 * h * xdots[k + 1][i])
                    .collect())
            }
        }
    }
}

/// Integrates `du^a/dt = −Γ^a_α(x(t), u) ĝ^α_b(x(t)) u^b` along `base`;
/// states are `(x(t), u(t))`.
#[allow(clippy::too_many_arguments)]
pub fn parallel_transport(
    conn: &RhoEtaConnection,
    gh: &GHMorphism,
    alg: &GeneralizedLieAlgebroid,
    base: &BaseCurve,
    u0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    let (m, r) = (alg.m(), alg.r());
    if base.dim() != m || u0.len() != r || conn.r() != r {
        return Err(Error::Dimension {
            what: "parallel transport".into(),
            expected: m + r,
            got: base.dim() + u0.len(),
        });
    }
    let times = step_times(t0, t1, dt)?;
    let state = |t: f64, u: &[f64]| -> Result<Vec<f64>> {
        let mut s = base.at(t)?;
        s.extend_from_slice(u);
        Ok(s)
    };
    let rhs = |t: f64, u: &[f64]| -> Result<Vec<f64>> {
        let s = state(t, u)?;
        let g = conn.values(&s)?;
        let hx: Vec<Jet> = alg.h().apply(&s[..m])?.iter().map(|&v| Jet::real(v)).collect();
        let gm = gh.g_at(r, &hx)?;
        let gu: Vec<f64> = (0..r)
            .map(|al| (0..r).map(|b| gm[al * r + b].value() * u[b]).sum())
            .collect();
        Ok((0..r).map(|a| -(0..r).map(|al| g[a * r + al] * gu[al]).sum::<f64>()).collect())
    };
    Ok(integrate_generic(rhs, state, u0, &times, m, r, &[]))
}

/// Max over interior grid points of
/// `|ρ(η∘h∘c)·g(h∘c)·y − d(η∘h∘c)/dt|`, with three-point differences that
/// allow a non-uniform last step.
pub fn check_lift_condition(sys: &MechanicalSystem, traj: &Trajectory) -> Result<f64> {
    let (alg, gh) = (&sys.algebroid, &sys.gh);
    let (m, r) = (alg.m(), alg.r());
    let curve = (0..traj.len())
        .map(|k| alg.eta().apply(&alg.h().apply(traj.x(k))?))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for k in 1..traj.len().saturating_sub(1) {
        let (h1, h2) = (traj.times[k] - traj.times[k - 1], traj.times[k + 1] - traj.times[k]);
        let (a, b, c) = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
        let x = traj.x(k);
        let hx = alg.h().apply(x)?;
        let rho = alg.rho().eval(&curve[k])?;
        let hxj: Vec<Jet> = hx.iter().map(|&v| Jet::real(v)).collect();
        let g = gh.g_at(r, &hxj)?;
        let y = traj.y(k);
        for i in 0..m {
            let mut lhs = 0.0;
            for al in 0..r {
                let gy: f64 = (0..r).map(|b| g[al * r + b].value() * y[b]).sum();
                lhs += rho[i * r + al] * gy;
            }
            let d = a * curve[k - 1][i] + b * curve[k][i] + c * curve[k + 1][i];
            worst = worst.max((lhs - d).abs());
        }
    }
    Ok(worst)
}

/// Values of a field along a trajectory.
pub fn evaluate_along(field: &dyn Field, traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    traj.states.iter().map(|s| field.values(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{abelian_structure, identity_anchor, so3_structure, zero_anchor, Diffeo};
    use crate::mechanics::{connection_from_semispray, ExternalForce, Lagrangian, Payload};
    use std::f64::consts::PI;

    fn lagrange(alg: GeneralizedLieAlgebroid, gh: GHMorphism, l: &str) -> MechanicalSystem {
        let (m, r) = (alg.m(), alg.r());
        MechanicalSystem::new(
            alg,
            gh,
            ExternalForce::zero(r),
            Some(Payload::Lagrange(Lagrangian::parse(m, r, l).unwrap())),
        )
        .unwrap()
    }

    fn oscillator() -> MechanicalSystem {
        lagrange(GeneralizedLieAlgebroid::tangent(1), GHMorphism::identity(1), "y1^2/2 - x1^2/2")
    }

    fn rigid_body() -> MechanicalSystem {
        let a = GeneralizedLieAlgebroid::new(3, 3, zero_anchor(3, 3), so3_structure(3), Diffeo::identity(3), Diffeo::identity(3))
            .unwrap();
        lagrange(a, GHMorphism::identity(3), "(1*y1^2 + 2*y2^2 + 3*y3^2)/2")
    }

    fn ode(sys: &MechanicalSystem) -> OdeField {
        synthesize_semispray_ode(sys, &sys.semispray().unwrap())
    }

    #[test]
    fn step_count_rule() {
        assert_eq!(step_times(0.0, PI, 1e-3).unwrap().len(), 3143);
        assert_eq!(step_times(0.0, 1.0, 0.1).unwrap().len(), 11);
        assert_eq!(step_times(0.0, 0.0, 0.1).unwrap(), vec![0.0]);
        let back = step_times(1.0, 0.0, 0.25).unwrap();
        assert_eq!(back, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        assert!(step_times(0.0, 1.0, 0.0).is_err());
        let t = step_times(0.0, 1.0, 0.3).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
    }

    #[test]
    fn synthesized_rhs_examples() {
        assert_eq!(ode(&oscillator()).eval(&[0.3, 0.7]).unwrap(), vec![0.7, -0.3]);
        let rb = ode(&rigid_body()).eval(&[0.1, 0.2, 0.3, 1.0, 1.0, 1.0]).unwrap();
        assert!(crate::linalg::max_abs_diff(&rb, &[0.0, 0.0, 0.0, -1.0, 1.0, -1.0 / 3.0]) < 1e-15);
        let g2 = GHMorphism::explicit(SmoothMap::constant(1, 0, &[2.0]), None).unwrap();
        let free = lagrange(GeneralizedLieAlgebroid::tangent(1), g2, "y1^2/2");
        assert_eq!(ode(&free).eval(&[0.0, 1.5]).unwrap()[0], 3.0);
    }

    #[test]
    fn flat_spray_is_straight() {
        let sys = MechanicalSystem::new(
            GeneralizedLieAlgebroid::tangent(2),
            GHMorphism::identity(2),
            ExternalForce::zero(2),
            None,
        )
        .unwrap();
        let f = synthesize_spray_ode(&sys, &RhoEtaConnection::zero(2));
        assert_eq!(f.eval(&[0.1, 0.2, 0.3, 0.4]).unwrap(), vec![0.3, 0.4, 0.0, 0.0]);
    }

    #[test]
    fn oscillator_reaches_minus_one() {
        let tr = integrate_rk4(&ode(&oscillator()), &[1.0], &[0.0], 0.0, PI, 1e-3, &[])
            .unwrap()
            .ok()
            .unwrap();
        assert_eq!(tr.len(), 3143);
        assert_eq!(*tr.times.last().unwrap(), PI);
        assert!((tr.last()[0] + 1.0).abs() <= 1e-6);
    }

    #[test]
    fn constant_rhs_keeps_y() {
        let f = OdeField::new(1, 1, |s| Ok(vec![s[1], 0.0]));
        let tr = integrate_rk4(&f, &[0.0], &[0.3], 0.0, 1.0, 0.01, &[]).unwrap();
        assert!(tr.states.iter().all(|s| s[1] == 0.3));
    }

    #[test]
    fn rigid_body_matches_direct_euler_rk4() {
        let tr = integrate_rk4(&ode(&rigid_body()), &[0.0; 3], &[1.0, 1.0, 1.0], 0.0, 10.0, 1e-3, &[]).unwrap();
        let i = [1.0, 2.0, 3.0];
        let euler = OdeField::new(0, 3, move |w| {
            Ok(vec![
                (i[1] - i[2]) * w[1] * w[2] / i[0],
                (i[2] - i[0]) * w[2] * w[0] / i[1],
                (i[0] - i[1]) * w[0] * w[1] / i[2],
            ])
        });
        let direct = integrate_rk4(&euler, &[], &[1.0, 1.0, 1.0], 0.0, 10.0, 1e-3, &[]).unwrap();
        assert_eq!(tr.len(), direct.len());
        for k in 0..tr.len() {
            assert!(crate::linalg::max_abs_diff(tr.y(k), direct.y(k)) <= 1e-9);
        }
    }

    #[test]
    fn monitors() {
        let sys = oscillator();
        let e = Monitor::new("E_L", sys.energy_field().unwrap());
        let one = Monitor::parse("one", 1, 1, "1").unwrap();
        let tr = integrate_rk4(&ode(&sys), &[1.0], &[0.0], 0.0, 2.0 * PI, 1e-3, &[e, one]).unwrap();
        assert!(tr.relative_drift("E_L").unwrap() <= 1e-10);
        assert!(tr.monitor("one").unwrap().iter().all(|v| *v == 1.0));

        let rb = rigid_body();
        let cas = Monitor::parse("casimir", 3, 3, "(1*y1)^2 + (2*y2)^2 + (3*y3)^2").unwrap();
        let tr = integrate_rk4(&ode(&rb), &[0.0; 3], &[1.0, 1.0, 1.0], 0.0, 10.0, 1e-3, &[cas]).unwrap();
        assert!(tr.relative_drift("casimir").unwrap() <= 1e-8);
    }

    #[test]
    fn non_finite_state_aborts_with_partial_trajectory() {
        let f = OdeField::new(1, 0, |s| Ok(vec![s[0] * s[0]]));
        let tr = integrate_rk4(&f, &[1.0], &[], 0.0, 2.0, 0.01, &[]).unwrap();
        match &tr.abort {
            Some(Error::NonFiniteState { t }) => assert!(*t > 0.9 && *t < 1.1),
            other => panic!("{other:?}"),
        }
        assert!(tr.len() > 10);
        assert!(tr.clone().ok().is_err());
    }

    #[test]
    fn reverse_integration_returns_to_start() {
        let sys = rigid_body();
        let f = ode(&sys);
        let fwd = integrate_rk4(&f, &[0.0; 3], &[1.0, 1.0, 1.0], 0.0, 2.0, 1e-3, &[]).unwrap();
        let end = fwd.last();
        let back = integrate_rk4(&f, &end[..3], &end[3..], 2.0, 0.0, 1e-3, &[]).unwrap();
        assert!(crate::linalg::max_abs_diff(back.last(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]) <= 1e-8);
    }

    #[test]
    fn transport_examples() {
        let a = GeneralizedLieAlgebroid::tangent(1);
        let id = GHMorphism::identity(1);
        let base = BaseCurve::parse(&["sin(x1)"]).unwrap();
        let flat = parallel_transport(&RhoEtaConnection::zero(1), &id, &a, &base, &[0.7], 0.0, 1.0, 0.01).unwrap();
        assert!(flat.states.iter().all(|s| s[1] == 0.7));
        assert!((flat.last()[0] - 1f64.sin()).abs() < 1e-15);

        let k = 0.8;
        let lin = RhoEtaConnection::new(SmoothMap::constant(1, 1, &[k])).unwrap();
        let tr = parallel_transport(&lin, &id, &a, &base, &[2.0], 0.0, 1.0, 1e-3).unwrap();
        assert!((tr.last()[1] - 2.0 * (-k).exp()).abs() <= 1e-10);
    }

    #[test]
    fn transport_reproduces_geodesic_velocity() {
        let sys = lagrange(GeneralizedLieAlgebroid::tangent(2), GHMorphism::identity(2), "(y1^2+y2^2)/(2*x2^2)");
        let s = sys.semispray().unwrap();
        let tr = integrate_rk4(&synthesize_semispray_ode(&sys, &s), &[0.0, 1.0], &[1.0, 0.0], 0.0, 1.0, 1e-3, &[]).unwrap();
        let conn = connection_from_semispray(&s, &sys.gh, &sys.algebroid);
        let base = BaseCurve::from_trajectory(&sys, &tr).unwrap();
        let pt = parallel_transport(&conn, &sys.gh, &sys.algebroid, &base, &[1.0, 0.0], 0.0, 1.0, 1e-3).unwrap();
        for k in 0..tr.len() {
            assert!(crate::linalg::max_abs_diff(tr.y(k), pt.y(k)) <= 1e-6);
        }
    }

    #[test]
    fn lift_condition() {
        let sys = oscillator();
        let dt = 1e-2;
        let tr = integrate_rk4(&ode(&sys), &[1.0], &[0.0], 0.0, 1.0, dt, &[]).unwrap();
        assert!(check_lift_condition(&sys, &tr).unwrap() <= 10.0 * dt * dt);

        let mut zeroed = tr.clone();
        zeroed.states.iter_mut().for_each(|s| s[1] = 0.0);
        let res = check_lift_condition(&sys, &zeroed).unwrap();
        let maxv = tr.states[1..tr.len() - 1].iter().map(|s| s[1].abs()).fold(0.0, f64::max);
        assert!((res - maxv).abs() <= 10.0 * dt * dt);

        let g2 = GHMorphism::explicit(SmoothMap::constant(1, 0, &[2.0]), None).unwrap();
        let free = lagrange(GeneralizedLieAlgebroid::tangent(1), g2, "y1^2/2");
        let line = Trajectory {
            m: 1,
            r: 1,
            times: vec![0.0, 0.1, 0.2, 0.3],
            states: vec![vec![0.0, 0.5], vec![0.1, 0.5], vec![0.2, 0.5], vec![0.3, 0.5]],
            monitors: vec![],
            abort: None,
        };
        assert!(check_lift_condition(&free, &line).unwrap() < 1e-14);
    }

    #[test]
    fn shifted_toy_semispray_satisfies_lift_condition() {
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
        let sys = lagrange(a, gh, "y1^2/2 - x1^2/2");
        let dt = 1e-2;
        let tr = integrate_rk4(&ode(&sys), &[0.5], &[0.2], 0.0, 1.0, dt, &[]).unwrap();
        assert!(check_lift_condition(&sys, &tr).unwrap() <= 10.0 * dt * dt);
    }
}
