//! The verification suite behind `algmech verify`.

use std::sync::Arc;

use super::report::{CheckResult, Report};
use super::spec::{parse_call, LoadedSystem};
use crate::algebroid::{
    check_anchor_compatibility, check_antisymmetry, check_gh_invertibility, check_jacobi, SamplePlan,
};
use crate::catalog::builtin_transition;
use crate::dynamics::{check_lift_condition, integrate_rk4, parallel_transport, synthesize_semispray_ode, BaseCurve};
use crate::error::Result;
use crate::linalg;
use crate::mechanics::{
    canonical_spray, cartan_two_path, check_finsler_axioms, check_semispray_property, hessian_inverse,
    lagrangian_jets, ring_connection, ring_curvature, spray_deviation, verify_cartan_equation, ExternalForce,
    MechanicalSystem, Payload,
};
use crate::prolongation::{curvature_field, structure_identity_suite, verify_transformation_laws, RhoEtaConnection};
use crate::smoothfn::{Field, SmoothMap};

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub samples: Option<usize>,
    /// Replaces every default tolerance.
    pub tol: Option<f64>,
    /// A transition such as `linear_scale(2)`.
    pub transition: Option<String>,
}

const NO_LAGRANGIAN: &str = "no lagrangian payload";
const NO_PAYLOAD: &str = "no payload";

struct Ctx<'a> {
    sys: &'a MechanicalSystem,
    plan: SamplePlan,
    tol: Option<f64>,
    report: Report,
}

impl Ctx<'_> {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn sampled(&mut self, name: &str, tolerance: f64, r: Result<f64>) {
        let t = self.tol(tolerance);
        let n = self.plan.count;
        self.report.push(CheckResult::from_result(name, r, n, t));
    }

    fn skip(&mut self, name: &str, tolerance: f64, why: &str) {
        let t = self.tol(tolerance);
        self.report.push(CheckResult::skipped(name, t, why));
    }

    fn samples(&self) -> Vec<Vec<f64>> {
        self.plan.samples(self.sys.m(), self.sys.r())
    }
}

fn max_over<F>(samples: &[Vec<f64>], mut f: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut worst = 0.0f64;
    for s in samples {
        let v = f(s)?;
        worst = if v.is_nan() { f64::NAN } else { worst.max(v) };
        if worst.is_nan() {
            break;
        }
    }
    Ok(worst)
}

fn algebroid_checks(cx: &mut Ctx) {
    let (a, gh, plan) = (&cx.sys.algebroid, &cx.sys.gh, cx.plan.clone());
    let r1 = check_antisymmetry(a, &plan);
    let r2 = check_jacobi(a, &plan);
    let r3 = check_anchor_compatibility(a, &plan);
    let r4 = check_gh_invertibility(a, gh, &plan);
    cx.sampled("antisymmetry", 1e-8, r1);
    cx.sampled("jacobi", 1e-8, r2);
    cx.sampled("anchor_compatibility", 1e-8, r3);
    cx.sampled("gh_invertibility", 1e-8, r4);
}

fn identity_checks(cx: &mut Ctx, conn: &RhoEtaConnection) {
    let plan = cx.plan.clone();
    match structure_identity_suite(&cx.sys.algebroid, conn, Some(&cx.sys.gh), &plan) {
        Ok(list) => {
            for (name, v) in list {
                cx.sampled(&format!("identity.{name}"), 1e-8, Ok(v));
            }
        }
        Err(e) => cx.sampled("identity", 1e-8, Err(e)),
    }
}

const LAGRANGE_CHECKS: &[(&str, f64)] = &[
    ("cartan_equation", 1e-7),
    ("cartan_two_path", 1e-8),
    ("hessian_inverse", 1e-10),
    ("semispray_property", 1e-12),
    ("transport_equivalence", 1e-6),
];

fn lagrange_checks(cx: &mut Ctx, conn: &RhoEtaConnection, spec_dt: f64, x0: &[f64], y0: &[f64], t0: f64) {
    let sys = cx.sys;
    let Some(l) = sys.lagrangian() else {
        for (name, t) in LAGRANGE_CHECKS {
            cx.skip(name, *t, NO_LAGRANGIAN);
        }
        return;
    };
    let (a, gh) = (&sys.algebroid, &sys.gh);
    let samples = cx.samples();
    let r = sys.r();
    let hess = max_over(&samples, |s| {
        let lab = lagrangian_jets(&l, s)?.lab;
        let inv = hessian_inverse(&l, s)?;
        let eye: Vec<f64> = (0..r * r).map(|k| if k / r == k % r { 1.0 } else { 0.0 }).collect();
        Ok(linalg::max_abs_diff(&linalg::matmul(&inv, &lab, r), &eye))
    });
    cx.sampled("hessian_inverse", 1e-10, hess);
    let s = match sys.semispray() {
        Ok(s) => s,
        Err(e) => {
            for (name, t) in &LAGRANGE_CHECKS[..4] {
                cx.sampled(name, *t, Err(e.clone()));
            }
            return;
        }
    };
    let plan = cx.plan.clone();
    cx.sampled("semispray_property", 1e-12, check_semispray_property(&s, a, gh, &plan));
    cx.sampled("cartan_equation", 1e-7, verify_cartan_equation(&s, &l, gh, a, &plan));
    let two = max_over(&samples, |st| {
        Ok(linalg::max_abs_diff(&cartan_two_path(&l, gh, a, st)?, &s.values(st)?))
    });
    cx.sampled("cartan_two_path", 1e-8, two);

    // Parallel transport of y0 along the integrated base curve over one time unit.
    let tol = cx.tol(1e-6);
    let res = (|| -> Result<(f64, usize)> {
        let traj = integrate_rk4(&synthesize_semispray_ode(sys, &s), x0, y0, t0, t0 + 1.0, spec_dt, &[])?.ok()?;
        let base = BaseCurve::from_trajectory(sys, &traj)?;
        let pt = parallel_transport(conn, gh, a, &base, y0, t0, t0 + 1.0, spec_dt)?.ok()?;
        let dev = (0..traj.len())
            .map(|k| linalg::max_abs_diff(traj.y(k), pt.y(k)))
            .fold(0.0, f64::max);
        Ok((dev, traj.len()))
    })();
    cx.report.push(match res {
        Ok((dev, n)) => CheckResult::measured("transport_equivalence", dev, n, tol),
        Err(e) => CheckResult::failed("transport_equivalence", tol, &e),
    });

    if let Some(Payload::Finsler(f)) = &sys.payload {
        match check_finsler_axioms(f, &plan) {
            Ok(rep) => {
                cx.sampled("finsler_euler", 1e-9, Ok(rep.euler_residual));
                cx.sampled("finsler_scaling", 1e-9, Ok(rep.scaling_residual));
            }
            Err(e) => cx.sampled("finsler_euler", 1e-9, Err(e)),
        }
    }
}

fn connection_checks(cx: &mut Ctx, conn: Option<&RhoEtaConnection>, spec_dt: f64, x0: &[f64], y0: &[f64], t0: f64) {
    let Some(conn) = conn else {
        cx.skip("spray_deviation", 1e-8, NO_PAYLOAD);
        cx.skip("ring_curvature", 1e-7, NO_PAYLOAD);
        cx.skip("lift_condition", 10.0 * spec_dt * spec_dt, NO_PAYLOAD);
        return;
    };
    let sys = cx.sys;
    let (a, gh) = (&sys.algebroid, &sys.gh);
    let samples = cx.samples();
    let spray = canonical_spray(conn, gh, a);
    let dev = max_over(&samples, |s| {
        Ok(spray_deviation(&spray, s)?.iter().map(|v| v.abs()).fold(0.0, f64::max))
    });
    cx.sampled("spray_deviation", 1e-8, dev);

    // A zero force makes the comparison trivial, so probe with F^a = 0.3 y^a.
    let (m, r) = (sys.m(), sys.r());
    let fe = if sys.fe.is_zero() {
        let srcs: Vec<String> = (1..=r).map(|a| format!("0.3*y{a}")).collect();
        ExternalForce::new(SmoothMap::parse(m, r, &srcs).expect("fixed expressions"))
    } else {
        sys.fe.clone()
    };
    let ring = (|| -> Result<f64> {
        let expanded = ring_curvature(a, conn, &fe, gh)?;
        let direct = curvature_field(a, &ring_connection(conn, &fe, gh, a));
        max_over(&samples, |s| Ok(linalg::max_abs_diff(&expanded.values(s)?, &direct.values(s)?)))
    })();
    cx.sampled("ring_curvature", 1e-7, ring);

    let tol = cx.tol(10.0 * spec_dt * spec_dt);
    let lift = (|| -> Result<(f64, usize)> {
        let s = sys.semispray()?;
        let traj = integrate_rk4(&synthesize_semispray_ode(sys, &s), x0, y0, t0, t0 + 1.0, spec_dt, &[])?.ok()?;
        Ok((check_lift_condition(sys, &traj)?, traj.len()))
    })();
    cx.report.push(match lift {
        Ok((v, n)) => CheckResult::measured("lift_condition", v, n, tol),
        Err(e) => CheckResult::failed("lift_condition", tol, &e),
    });
}

fn transition_checks(cx: &mut Ctx, conn: Option<&RhoEtaConnection>, transition: &str) -> Result<()> {
    let sys = cx.sys;
    let (name, params) = parse_call(transition)?;
    let trans = builtin_transition(&name, &params, sys.m(), sys.r())?;
    let avert: Option<Arc<dyn Field>> = match conn {
        Some(_) => Some(sys.semispray()?.avert().clone()),
        None => None,
    };
    let plan = cx.plan.clone();
    match verify_transformation_laws(&sys.algebroid, conn, avert.as_deref(), &sys.gh, &trans, &plan) {
        Ok(list) => {
            for (law, v) in list {
                let t = if law == "semispray_law" { 1e-8 } else { 1e-9 };
                cx.sampled(&format!("transform.{law}"), t, Ok(v));
            }
        }
        Err(e) => cx.sampled("transform", 1e-9, Err(e)),
    }
    Ok(())
}

/// Runs every applicable check. Errors only for an unusable transition id;
/// failures inside checks are recorded in the report.
pub fn verify_system(loaded: &LoadedSystem, opts: &VerifyOptions) -> Result<Report> {
    let sys = &loaded.system;
    let mut plan = loaded.plan.clone();
    if let Some(n) = opts.samples {
        plan.count = n;
    }
    let mut cx = Ctx {
        sys,
        plan,
        tol: opts.tol,
        report: Report::default(),
    };
    let spec = &loaded.spec;
    let (x0, y0, t0, dt) = (&spec.initial_x, &spec.initial_y, spec.integrate.t0, spec.integrate.dt);
    let conn = sys.payload.as_ref().map(|_| sys.connection()).transpose();
    let conn = match conn {
        Ok(c) => c,
        Err(e) => {
            cx.sampled("connection", 0.0, Err(e));
            None
        }
    };
    algebroid_checks(&mut cx);
    identity_checks(&mut cx, conn.as_ref().unwrap_or(&RhoEtaConnection::zero(sys.r())));
    match &conn {
        Some(c) => lagrange_checks(&mut cx, c, dt, x0, y0, t0),
        None => {
            for (name, t) in LAGRANGE_CHECKS {
                cx.skip(name, *t, NO_LAGRANGIAN);
            }
        }
    }
    connection_checks(&mut cx, conn.as_ref(), dt, x0, y0, t0);
    if let Some(t) = &opts.transition {
        transition_checks(&mut cx, conn.as_ref(), t)?;
    }
    Ok(cx.report.finish())
}
