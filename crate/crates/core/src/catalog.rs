//! Built-in benchmark systems and chart transitions.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::algebroid::{
    check_anchor_compatibility, check_antisymmetry, check_gh_invertibility, check_jacobi, Diffeo, SamplePlan,
};
use crate::cli::spec::{IntegrateSpec, MapSpec, MatrixSpec, MonitorSpec, PayloadSpec, StructureSpec, SystemSpec};
use crate::dynamics::OdeField;
use crate::error::{Error, Result};
use crate::mechanics::MechanicalSystem;
use crate::prolongation::TransitionData;
use crate::smoothfn::SmoothMap;

/// Reference solutions for an entry's default initial state.
#[derive(Clone, Copy, Debug)]
pub enum Oracle {
    None,
    /// `t ↦ (x(t), y(t))`.
    Analytic(fn(f64) -> Vec<f64>),
    /// Euler's equations with these principal moments.
    EulerEquations([f64; 3]),
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub id: String,
    pub spec: SystemSpec,
    pub system: MechanicalSystem,
    pub oracle: Oracle,
}

impl CatalogEntry {
    pub fn plan(&self) -> &SamplePlan {
        &self.spec.sample_plan
    }
}

const IDS: &[&str] = &[
    "harmonic_oscillator",
    "free_particle",
    "rigid_body_so3",
    "poincare_half_plane",
    "sphere_geodesics",
    "shifted_h_toy",
];

pub fn builtin_ids() -> &'static [&'static str] {
    IDS
}

fn bad(id: &str, detail: impl Into<String>) -> Error {
    Error::BadParams {
        id: id.to_string(),
        detail: detail.into(),
    }
}

fn params_or<const N: usize>(id: &str, params: &[f64], default: [f64; N]) -> Result<[f64; N]> {
    match params.len() {
        0 => Ok(default),
        n if n == N => Ok(params.try_into().expect("length checked")),
        n => Err(bad(id, format!("expected {N} parameters, got {n}"))),
    }
}

fn base(m: usize, r: usize, payload: PayloadSpec) -> SystemSpec {
    SystemSpec {
        m,
        r,
        rho: MatrixSpec::Identity,
        structure: StructureSpec::Abelian,
        h: MapSpec::Identity,
        eta: MapSpec::Identity,
        g: MatrixSpec::Identity,
        payload: Some(payload),
        external_force: None,
        initial_x: vec![0.0; m],
        initial_y: vec![0.0; r],
        integrate: IntegrateSpec {
            method: "rk4".into(),
            dt: 1e-3,
            t_end: 1.0,
            t0: 0.0,
        },
        monitors: vec![],
        sample_plan: SamplePlan::default(),
    }
}

/// The specification of a built-in system; `params` may be empty for the
/// defaults.
pub fn builtin_spec(id: &str, params: &[f64]) -> Result<SystemSpec> {
    let spec = match id {
        "harmonic_oscillator" | "free_particle" => {
            params_or(id, params, [])?;
            let osc = id == "harmonic_oscillator";
            let l = if osc { "y1^2/2 - x1^2/2" } else { "y1^2/2" };
            let mut s = base(1, 1, PayloadSpec::Lagrangian(l.into()));
            if osc {
                s.initial_x = vec![1.0];
                s.integrate.t_end = 2.0 * PI;
            } else {
                s.initial_y = vec![1.0];
                s.integrate.dt = 1e-2;
            }
            s
        }
        "rigid_body_so3" => {
            let i = params_or(id, params, [1.0, 2.0, 3.0])?;
            if i.iter().any(|v| !(*v > 0.0)) {
                return Err(bad(id, "inertias must be positive"));
            }
            let mut s = base(
                3,
                3,
                PayloadSpec::Lagrangian(format!("({:?}*y1^2 + {:?}*y2^2 + {:?}*y3^2)/2", i[0], i[1], i[2])),
            );
            s.rho = MatrixSpec::Zero;
            s.structure = StructureSpec::So3;
            s.initial_y = vec![1.0, 1.0, 1.0];
            s.integrate.t_end = 10.0;
            s.monitors = vec![MonitorSpec {
                name: "casimir".into(),
                expr: format!("({:?}*y1)^2 + ({:?}*y2)^2 + ({:?}*y3)^2", i[0], i[1], i[2]),
            }];
            s
        }
        "poincare_half_plane" => {
            params_or(id, params, [])?;
            let mut s = base(2, 2, PayloadSpec::Lagrangian("(y1^2 + y2^2)/(2*x2^2)".into()));
            s.initial_x = vec![0.0, 1.0];
            s.initial_y = vec![1.0, 0.0];
            s.integrate.dt = 1e-4;
            s.sample_plan.bounds = vec![(-1.0, 1.0), (0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0)];
            s.monitors = vec![MonitorSpec {
                name: "circle".into(),
                expr: "x1^2 + x2^2 - 1".into(),
            }];
            s
        }
        "sphere_geodesics" => {
            let [rad] = params_or(id, params, [1.0])?;
            if !(rad > 0.0) {
                return Err(bad(id, "radius must be positive"));
            }
            let mut s = base(2, 2, PayloadSpec::Finsler(format!("{rad:?}*sqrt(y1^2 + sin(x1)^2*y2^2)")));
            s.initial_x = vec![FRAC_PI_2, 0.0];
            s.initial_y = vec![0.0, 1.0];
            s.sample_plan.bounds = vec![(0.5, 2.6), (-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)];
            s.sample_plan.exclude_zero_fiber = true;
            s
        }
        "shifted_h_toy" => {
            let [k] = params_or(id, params, [0.3])?;
            let mut s = base(1, 1, PayloadSpec::Connection(vec![vec!["0.5*sin(x1)*y1".into()]]));
            s.h = MapSpec::Exprs(vec![format!("x1 + {k:?}")]);
            s.eta = MapSpec::Exprs(vec![format!("x1 - {k:?}")]);
            s.g = MatrixSpec::Exprs(vec![vec!["1 + 0.1*sin(x1)".into()]]);
            s.initial_x = vec![0.5];
            s.initial_y = vec![0.2];
            s.integrate.dt = 1e-2;
            s
        }
        _ => return Err(Error::UnknownId(id.to_string())),
    };
    Ok(spec)
}

fn oscillator_oracle(t: f64) -> Vec<f64> {
    vec![t.cos(), -t.sin()]
}

fn free_oracle(t: f64) -> Vec<f64> {
    vec![t, 1.0]
}

/// The unit-circle geodesic through `(0, 1)` with velocity `(1, 0)`.
fn half_plane_oracle(t: f64) -> Vec<f64> {
    let (th, sh) = (t.tanh(), 1.0 / t.cosh());
    vec![th, sh, sh * sh, -sh * th]
}

fn equator_oracle(t: f64) -> Vec<f64> {
    vec![FRAC_PI_2, t, 0.0, 1.0]
}

/// Builds and validates a catalog entry.
pub fn build_builtin(id: &str, params: &[f64]) -> Result<CatalogEntry> {
    let spec = builtin_spec(id, params)?;
    let loaded = spec.build()?;
    let oracle = match id {
        "harmonic_oscillator" => Oracle::Analytic(oscillator_oracle),
        "free_particle" => Oracle::Analytic(free_oracle),
        "poincare_half_plane" => Oracle::Analytic(half_plane_oracle),
        "sphere_geodesics" => Oracle::Analytic(equator_oracle),
        "rigid_body_so3" => Oracle::EulerEquations(params_or(id, params, [1.0, 2.0, 3.0])?),
        _ => Oracle::None,
    };
    let sys = loaded.system;
    let plan = spec.sample_plan.clone().with_count(8);
    let a = &sys.algebroid;
    for (name, v) in [
        ("antisymmetry", check_antisymmetry(a, &plan)?),
        ("jacobi", check_jacobi(a, &plan)?),
        ("anchor_compatibility", check_anchor_compatibility(a, &plan)?),
        ("gh_invertibility", check_gh_invertibility(a, &sys.gh, &plan)?),
    ] {
        if v > 1e-8 {
            return Err(bad(id, format!("{name} residual {v:e}")));
        }
    }
    Ok(CatalogEntry {
        id: id.to_string(),
        spec,
        system: sys,
        oracle,
    })
}

/// Euler's equations `I_1 ẏ_1 = (I_2 − I_3) y_2 y_3` and cyclic, written out
/// directly.
pub fn euler_equations(i: [f64; 3]) -> OdeField {
    OdeField::new(0, 3, move |w| {
        Ok(vec![
            (i[1] - i[2]) * w[1] * w[2] / i[0],
            (i[2] - i[0]) * w[2] * w[0] / i[1],
            (i[0] - i[1]) * w[0] * w[1] / i[2],
        ])
    })
}

fn diag(n: usize, v: f64) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        out[k * n + k] = v;
    }
    out
}

/// A chart transition by id: `identity`, `linear_scale(s)` or
/// `rotation(θ)` (`m = r = 2`).
pub fn builtin_transition(id: &str, params: &[f64], m: usize, r: usize) -> Result<TransitionData> {
    match id {
        "identity" => {
            params_or(id, params, [])?;
            Ok(TransitionData::identity(m, r))
        }
        "linear_scale" => {
            let [s] = params_or(id, params, [2.0])?;
            if s == 0.0 {
                return Err(bad(id, "scale must be non-zero"));
            }
            let srcs: Vec<String> = (1..=m).map(|i| format!("{s:?}*x{i}")).collect();
            TransitionData::new(
                Diffeo::parse(m, &srcs)?,
                SmoothMap::constant(m, 0, &diag(r, s)),
                SmoothMap::constant(m, 0, &diag(r, s)),
            )
        }
        "rotation" => {
            let [th] = params_or(id, params, [FRAC_PI_2])?;
            if m != 2 || r != 2 {
                return Err(bad(id, "rotation needs m = r = 2"));
            }
            let (c, s) = (th.cos(), th.sin());
            let phi = Diffeo::parse(2, &[format!("{c:?}*x1 - {s:?}*x2"), format!("{s:?}*x1 + {c:?}*x2")])?;
            let rot = [c, -s, s, c];
            TransitionData::new(phi, SmoothMap::constant(2, 0, &rot), SmoothMap::constant(2, 0, &rot))
        }
        _ => Err(Error::UnknownId(id.to_string())),
    }
}
