//! The JSON system specification: schema, loader and builder.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::algebroid::{
    abelian_structure, identity_anchor, so3_structure, zero_anchor, Diffeo, GHMorphism, GeneralizedLieAlgebroid,
    SamplePlan,
};
use crate::catalog;
use crate::dynamics::Monitor;
use crate::error::{Error, Result};
use crate::mechanics::{ExternalForce, FinslerFunction, Lagrangian, MechanicalSystem, Payload};
use crate::prolongation::RhoEtaConnection;
use crate::smoothfn::SmoothMap;

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixSpec {
    Identity,
    Zero,
    Exprs(Vec<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseEntry {
    /// 1-based indices of `L^c_{ab}`.
    pub c: usize,
    pub a: usize,
    pub b: usize,
    pub expr: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StructureSpec {
    Abelian,
    So3,
    /// `structure[c][a][b] = L^c_{ab}`.
    Dense(Vec<Vec<Vec<String>>>),
    Sparse(Vec<SparseEntry>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    Identity,
    Exprs(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PayloadSpec {
    Lagrangian(String),
    Finsler(String),
    Connection(Vec<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateSpec {
    pub method: String,
    pub dt: f64,
    pub t_end: f64,
    pub t0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorSpec {
    pub name: String,
    pub expr: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub m: usize,
    pub r: usize,
    pub rho: MatrixSpec,
    pub structure: StructureSpec,
    pub h: MapSpec,
    pub eta: MapSpec,
    pub g: MatrixSpec,
    pub payload: Option<PayloadSpec>,
    pub external_force: Option<Vec<String>>,
    pub initial_x: Vec<f64>,
    pub initial_y: Vec<f64>,
    pub integrate: IntegrateSpec,
    pub monitors: Vec<MonitorSpec>,
    pub sample_plan: SamplePlan,
}

/// A built system with its run parameters.
#[derive(Clone, Debug)]
pub struct LoadedSystem {
    pub spec: SystemSpec,
    pub system: MechanicalSystem,
    pub monitors: Vec<Monitor>,
    pub plan: SamplePlan,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn at(path: &str, k: usize) -> String {
    format!("{path}[{k}]")
}

struct Reader {
    strict: bool,
    warnings: Vec<String>,
}

impl Reader {
    fn object<'a>(&mut self, v: &'a Value, path: &str, known: &[&str]) -> Result<&'a Map<String, Value>> {
        let o = v.as_object().ok_or_else(|| schema(path, "expected an object"))?;
        for k in o.keys() {
            if !known.contains(&k.as_str()) {
                let p = join(path, k);
                if self.strict {
                    return Err(schema(&p, "unknown field"));
                }
                self.warnings.push(format!("unknown field `{p}` ignored"));
            }
        }
        Ok(o)
    }
}

fn usize_at(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn f64_at(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(path, "expected a number"))
}

fn str_at<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn array_at<'a>(v: &'a Value, path: &str, len: Option<usize>) -> Result<&'a Vec<Value>> {
    let a = v.as_array().ok_or_else(|| schema(path, "expected an array"))?;
    if let Some(n) = len {
        if a.len() != n {
            return Err(Error::Dimension {
                what: path.to_string(),
                expected: n,
                got: a.len(),
            });
        }
    }
    Ok(a)
}

fn numbers(v: &Value, path: &str, len: usize) -> Result<Vec<f64>> {
    array_at(v, path, Some(len))?
        .iter()
        .enumerate()
        .map(|(k, e)| f64_at(e, &at(path, k)))
        .collect()
}

/// An expression given as a string or a bare number.
fn expr_at(v: &Value, path: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(schema(path, "expected an expression string")),
    }
}

fn exprs(v: &Value, path: &str, len: usize) -> Result<Vec<String>> {
    array_at(v, path, Some(len))?
        .iter()
        .enumerate()
        .map(|(k, e)| expr_at(e, &at(path, k)))
        .collect()
}

fn expr_matrix(v: &Value, path: &str, rows: usize, cols: usize) -> Result<Vec<Vec<String>>> {
    array_at(v, path, Some(rows))?
        .iter()
        .enumerate()
        .map(|(k, row)| exprs(row, &at(path, k), cols))
        .collect()
}

fn keyword<'a>(v: &'a Value, allowed: &[&str], path: &str) -> Result<Option<&'a str>> {
    match v.as_str() {
        Some(s) if allowed.contains(&s) => Ok(Some(s)),
        Some(s) => Err(schema(path, format!("unknown keyword `{s}`, expected one of {allowed:?}"))),
        None => Ok(None),
    }
}

fn matrix_spec(v: &Value, path: &str, rows: usize, cols: usize, allowed: &[&str]) -> Result<MatrixSpec> {
    match keyword(v, allowed, path)? {
        Some("identity") => Ok(MatrixSpec::Identity),
        Some(_) => Ok(MatrixSpec::Zero),
        None => Ok(MatrixSpec::Exprs(expr_matrix(v, path, rows, cols)?)),
    }
}

fn map_spec(v: &Value, path: &str, m: usize) -> Result<MapSpec> {
    match keyword(v, &["identity"], path)? {
        Some(_) => Ok(MapSpec::Identity),
        None => Ok(MapSpec::Exprs(exprs(v, path, m)?)),
    }
}

fn structure_spec(rd: &mut Reader, v: &Value, path: &str, r: usize) -> Result<StructureSpec> {
    match keyword(v, &["abelian", "so3"], path)? {
        Some("abelian") => return Ok(StructureSpec::Abelian),
        Some(_) => return Ok(StructureSpec::So3),
        None => {}
    }
    let arr = array_at(v, path, None)?;
    if arr.first().is_some_and(Value::is_object) {
        let mut out = Vec::new();
        for (k, e) in arr.iter().enumerate() {
            let p = at(path, k);
            let o = rd.object(e, &p, &["c", "a", "b", "expr"])?;
            let idx = |key: &str| -> Result<usize> {
                let pk = join(&p, key);
                let n = usize_at(o.get(key).ok_or_else(|| schema(&pk, "missing"))?, &pk)?;
                if n == 0 || n > r {
                    return Err(schema(&pk, format!("index {n} outside 1..={r}")));
                }
                Ok(n)
            };
            let pe = join(&p, "expr");
            out.push(SparseEntry {
                c: idx("c")?,
                a: idx("a")?,
                b: idx("b")?,
                expr: expr_at(o.get("expr").ok_or_else(|| schema(&pe, "missing"))?, &pe)?,
            });
        }
        Ok(StructureSpec::Sparse(out))
    } else {
        let dense = array_at(v, path, Some(r))?
            .iter()
            .enumerate()
            .map(|(c, layer)| expr_matrix(layer, &at(path, c), r, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(StructureSpec::Dense(dense))
    }
}

const TOP_KEYS: &[&str] = &[
    "builtin",
    "params",
    "m",
    "r",
    "rho",
    "structure",
    "h",
    "eta",
    "g",
    "payload",
    "external_force",
    "initial",
    "integrate",
    "monitors",
    "sample_plan",
];

fn sample_plan(rd: &mut Reader, v: &Value, path: &str, base: &SamplePlan, m: usize, r: usize) -> Result<SamplePlan> {
    let o = rd.object(v, path, &["seed", "count", "box", "exclude_zero_fiber"])?;
    let mut plan = base.clone();
    if let Some(s) = o.get("seed") {
        plan.seed = usize_at(s, &join(path, "seed"))? as u64;
    }
    if let Some(c) = o.get("count") {
        plan.count = usize_at(c, &join(path, "count"))?;
    }
    if let Some(b) = o.get("box") {
        let pb = join(path, "box");
        let arr = array_at(b, &pb, None)?;
        if arr.len() != 1 && arr.len() != m + r {
            return Err(Error::Dimension {
                what: pb,
                expected: m + r,
                got: arr.len(),
            });
        }
        plan.bounds = arr
            .iter()
            .enumerate()
            .map(|(k, iv)| {
                let p = at(&pb, k);
                let n = numbers(iv, &p, 2)?;
                if n[0] > n[1] {
                    return Err(schema(&p, "empty interval"));
                }
                Ok((n[0], n[1]))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(z) = o.get("exclude_zero_fiber") {
        plan.exclude_zero_fiber = z
            .as_bool()
            .ok_or_else(|| schema(&join(path, "exclude_zero_fiber"), "expected a boolean"))?;
    }
    Ok(plan)
}

/// Splits `name(a, b)` into the name and numeric arguments.
pub fn parse_call(src: &str) -> Result<(String, Vec<f64>)> {
    let src = src.trim();
    match src.find('(') {
        None => Ok((src.to_string(), vec![])),
        Some(i) => {
            let inner = src[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| schema(src, "missing closing parenthesis"))?;
            let args = inner
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<f64>().map_err(|_| schema(src, format!("bad number `{}`", s.trim()))))
                .collect::<Result<Vec<_>>>()?;
            Ok((src[..i].trim().to_string(), args))
        }
    }
}

impl SystemSpec {
    /// Parses a spec document. Returns the warnings collected when not
    /// strict.
    pub fn parse(text: &str, strict: bool) -> Result<(SystemSpec, Vec<String>)> {
        let v: Value = serde_json::from_str(text).map_err(|e| schema("", format!("invalid JSON: {e}")))?;
        SystemSpec::from_value(&v, strict)
    }

    pub fn load(path: &Path, strict: bool) -> Result<(SystemSpec, Vec<String>)> {
        SystemSpec::parse(&std::fs::read_to_string(path)?, strict)
    }

    pub fn from_value(v: &Value, strict: bool) -> Result<(SystemSpec, Vec<String>)> {
        let mut rd = Reader {
            strict,
            warnings: Vec::new(),
        };
        let o = rd.object(v, "", TOP_KEYS)?;
        let mut spec = if let Some(b) = o.get("builtin") {
            let id = str_at(b, "builtin")?;
            let params = match o.get("params") {
                Some(p) => {
                    let arr = array_at(p, "params", None)?;
                    arr.iter()
                        .enumerate()
                        .map(|(k, e)| f64_at(e, &at("params", k)))
                        .collect::<Result<Vec<_>>>()?
                }
                None => vec![],
            };
            for key in ["m", "r", "rho", "structure", "h", "eta", "g", "payload", "external_force"] {
                if o.contains_key(key) {
                    return Err(schema(key, "not allowed together with `builtin`"));
                }
            }
            catalog::builtin_spec(id, &params)?
        } else {
            let need = |key: &str| o.get(key).ok_or_else(|| schema(key, "missing"));
            let m = usize_at(need("m")?, "m")?;
            let r = usize_at(need("r")?, "r")?;
            if m == 0 || r == 0 {
                return Err(schema(if m == 0 { "m" } else { "r" }, "must be positive"));
            }
            let rho = matrix_spec(need("rho")?, "rho", m, r, &["identity", "zero"])?;
            if rho == MatrixSpec::Identity && m != r {
                return Err(schema("rho", "`identity` needs m = r"));
            }
            let structure = structure_spec(&mut rd, need("structure")?, "structure", r)?;
            if structure == StructureSpec::So3 && r != 3 {
                return Err(schema("structure", "`so3` needs r = 3"));
            }
            let h = o.get("h").map(|v| map_spec(v, "h", m)).transpose()?.unwrap_or(MapSpec::Identity);
            let eta = o.get("eta").map(|v| map_spec(v, "eta", m)).transpose()?.unwrap_or(MapSpec::Identity);
            let g = o
                .get("g")
                .map(|v| matrix_spec(v, "g", r, r, &["identity"]))
                .transpose()?
                .unwrap_or(MatrixSpec::Identity);
            let payload = match o.get("payload") {
                None | Some(Value::Null) => None,
                Some(p) => {
                    let po = rd.object(p, "payload", &["lagrangian", "finsler", "connection"])?;
                    if po.len() != 1 {
                        return Err(schema("payload", "expected exactly one of lagrangian, finsler, connection"));
                    }
                    let (k, v) = po.iter().next().expect("one entry");
                    let path = join("payload", k);
                    Some(match k.as_str() {
                        "lagrangian" => PayloadSpec::Lagrangian(expr_at(v, &path)?),
                        "finsler" => PayloadSpec::Finsler(expr_at(v, &path)?),
                        _ => PayloadSpec::Connection(expr_matrix(v, &path, r, r)?),
                    })
                }
            };
            let external_force = match o.get("external_force") {
                None => None,
                Some(v) => match keyword(v, &["zero"], "external_force")? {
                    Some(_) => None,
                    None => Some(exprs(v, "external_force", r)?),
                },
            };
            let finsler = matches!(payload, Some(PayloadSpec::Finsler(_)));
            SystemSpec {
                m,
                r,
                rho,
                structure,
                h,
                eta,
                g,
                payload,
                external_force,
                initial_x: vec![0.0; m],
                initial_y: vec![0.0; r],
                integrate: IntegrateSpec {
                    method: "rk4".into(),
                    dt: 1e-3,
                    t_end: 1.0,
                    t0: 0.0,
                },
                monitors: vec![],
                sample_plan: SamplePlan {
                    exclude_zero_fiber: finsler,
                    ..SamplePlan::default()
                },
            }
        };
        let (m, r) = (spec.m, spec.r);
        if let Some(i) = o.get("initial") {
            let io = rd.object(i, "initial", &["x", "y"])?;
            if let Some(x) = io.get("x") {
                spec.initial_x = numbers(x, "initial.x", m)?;
            }
            if let Some(y) = io.get("y") {
                spec.initial_y = numbers(y, "initial.y", r)?;
            }
        }
        if let Some(i) = o.get("integrate") {
            let io = rd.object(i, "integrate", &["method", "dt", "t_end", "t0"])?;
            if let Some(mth) = io.get("method") {
                let s = str_at(mth, "integrate.method")?;
                if s != "rk4" {
                    return Err(schema("integrate.method", format!("unsupported method `{s}`")));
                }
            }
            if let Some(dt) = io.get("dt") {
                spec.integrate.dt = f64_at(dt, "integrate.dt")?;
                if !(spec.integrate.dt > 0.0) {
                    return Err(schema("integrate.dt", "must be positive"));
                }
            }
            if let Some(t) = io.get("t_end") {
                spec.integrate.t_end = f64_at(t, "integrate.t_end")?;
            }
            if let Some(t) = io.get("t0") {
                spec.integrate.t0 = f64_at(t, "integrate.t0")?;
            }
        }
        if let Some(ms) = o.get("monitors") {
            spec.monitors = array_at(ms, "monitors", None)?
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let p = at("monitors", k);
                    let mo = rd.object(e, &p, &["name", "expr"])?;
                    let name = str_at(mo.get("name").ok_or_else(|| schema(&join(&p, "name"), "missing"))?, &join(&p, "name"))?;
                    if name.is_empty() || name.contains(',') || name == "t" || name == "E_L" {
                        return Err(schema(&join(&p, "name"), format!("unusable column name `{name}`")));
                    }
                    let pe = join(&p, "expr");
                    Ok(MonitorSpec {
                        name: name.to_string(),
                        expr: expr_at(mo.get("expr").ok_or_else(|| schema(&pe, "missing"))?, &pe)?,
                    })
                })
                .collect::<Result<_>>()?;
        }
        if let Some(sp) = o.get("sample_plan") {
            spec.sample_plan = sample_plan(&mut rd, sp, "sample_plan", &spec.sample_plan, m, r)?;
        }
        Ok((spec, rd.warnings))
    }

    /// The spec as a JSON document; `from_value` reads it back unchanged.
    pub fn to_value(&self) -> Value {
        let mat = |s: &MatrixSpec| match s {
            MatrixSpec::Identity => json!("identity"),
            MatrixSpec::Zero => json!("zero"),
            MatrixSpec::Exprs(e) => json!(e),
        };
        let map = |s: &MapSpec| match s {
            MapSpec::Identity => json!("identity"),
            MapSpec::Exprs(e) => json!(e),
        };
        let structure = match &self.structure {
            StructureSpec::Abelian => json!("abelian"),
            StructureSpec::So3 => json!("so3"),
            StructureSpec::Dense(d) => json!(d),
            StructureSpec::Sparse(s) => Value::Array(
                s.iter()
                    .map(|e| json!({"c": e.c, "a": e.a, "b": e.b, "expr": e.expr}))
                    .collect(),
            ),
        };
        let payload = match &self.payload {
            None => Value::Null,
            Some(PayloadSpec::Lagrangian(l)) => json!({ "lagrangian": l }),
            Some(PayloadSpec::Finsler(f)) => json!({ "finsler": f }),
            Some(PayloadSpec::Connection(c)) => json!({ "connection": c }),
        };
        let plan = &self.sample_plan;
        json!({
            "m": self.m,
            "r": self.r,
            "rho": mat(&self.rho),
            "structure": structure,
            "h": map(&self.h),
            "eta": map(&self.eta),
            "g": mat(&self.g),
            "payload": payload,
            "external_force": match &self.external_force { None => json!("zero"), Some(f) => json!(f) },
            "initial": { "x": self.initial_x, "y": self.initial_y },
            "integrate": {
                "method": self.integrate.method,
                "dt": self.integrate.dt,
                "t_end": self.integrate.t_end,
                "t0": self.integrate.t0,
            },
            "monitors": self.monitors.iter().map(|mo| json!({"name": mo.name, "expr": mo.expr})).collect::<Vec<_>>(),
            "sample_plan": {
                "seed": plan.seed,
                "count": plan.count,
                "box": plan.bounds.iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>(),
                "exclude_zero_fiber": plan.exclude_zero_fiber,
            },
        })
    }

    fn parse_exprs(&self, path: &str, m: usize, r: usize, srcs: &[(String, String)]) -> Result<SmoothMap> {
        for (p, s) in srcs {
            SmoothMap::parse(m, r, &[s]).map_err(|e| Error::Expression {
                path: p.clone(),
                source: Box::new(e),
            })?;
        }
        let all: Vec<&String> = srcs.iter().map(|(_, s)| s).collect();
        SmoothMap::parse(m, r, &all).map_err(|e| Error::Expression {
            path: path.to_string(),
            source: Box::new(e),
        })
    }

    fn flat_matrix(path: &str, rows: &[Vec<String>]) -> Vec<(String, String)> {
        rows.iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, e)| (format!("{path}[{i}][{j}]"), e.clone())))
            .collect()
    }

    fn flat_vec(path: &str, v: &[String]) -> Vec<(String, String)> {
        v.iter().enumerate().map(|(k, e)| (at(path, k), e.clone())).collect()
    }

    fn structure_map(&self) -> Result<SmoothMap> {
        let (m, r) = (self.m, self.r);
        match &self.structure {
            StructureSpec::Abelian => Ok(abelian_structure(m, r)),
            StructureSpec::So3 => Ok(so3_structure(m)),
            StructureSpec::Dense(d) => {
                let mut flat = Vec::new();
                for (c, layer) in d.iter().enumerate() {
                    flat.extend(SystemSpec::flat_matrix(&at("structure", c), layer));
                }
                self.parse_exprs("structure", m, 0, &flat)
            }
            StructureSpec::Sparse(entries) => {
                let mut cells: Vec<Option<(String, String)>> = vec![None; r * r * r];
                let idx = |c: usize, a: usize, b: usize| ((c - 1) * r + (a - 1)) * r + (b - 1);
                for (k, e) in entries.iter().enumerate() {
                    let p = join(&at("structure", k), "expr");
                    if e.a == e.b {
                        return Err(schema(&p, "diagonal entries L^c_{aa} must vanish"));
                    }
                    cells[idx(e.c, e.a, e.b)] = Some((p, e.expr.clone()));
                }
                for e in entries {
                    let (i, j) = (idx(e.c, e.a, e.b), idx(e.c, e.b, e.a));
                    if cells[j].is_none() {
                        let (p, s) = cells[i].clone().expect("set above");
                        cells[j] = Some((p, format!("-({s})")));
                    }
                }
                let flat: Vec<(String, String)> = cells
                    .into_iter()
                    .map(|c| c.unwrap_or_else(|| ("structure".into(), "0".into())))
                    .collect();
                self.parse_exprs("structure", m, 0, &flat)
            }
        }
    }

    /// Constructs the system, monitors and sample plan.
    pub fn build(&self) -> Result<LoadedSystem> {
        let (m, r) = (self.m, self.r);
        if self.initial_x.len() != m {
            return Err(Error::Dimension {
                what: "initial.x".into(),
                expected: m,
                got: self.initial_x.len(),
            });
        }
        if self.initial_y.len() != r {
            return Err(Error::Dimension {
                what: "initial.y".into(),
                expected: r,
                got: self.initial_y.len(),
            });
        }
        let rho = match &self.rho {
            MatrixSpec::Identity => identity_anchor(m),
            MatrixSpec::Zero => zero_anchor(m, r),
            MatrixSpec::Exprs(e) => self.parse_exprs("rho", m, 0, &SystemSpec::flat_matrix("rho", e))?,
        };
        let diffeo = |s: &MapSpec, path: &str| -> Result<Diffeo> {
            match s {
                MapSpec::Identity => Ok(Diffeo::identity(m)),
                MapSpec::Exprs(e) => Diffeo::explicit(self.parse_exprs(path, m, 0, &SystemSpec::flat_vec(path, e))?),
            }
        };
        let alg = GeneralizedLieAlgebroid::new(
            m,
            r,
            rho,
            self.structure_map()?,
            diffeo(&self.h, "h")?,
            diffeo(&self.eta, "eta")?,
        )?;
        let gh = match &self.g {
            MatrixSpec::Identity => GHMorphism::identity(r),
            MatrixSpec::Zero => return Err(schema("g", "g must be invertible")),
            MatrixSpec::Exprs(e) => {
                GHMorphism::explicit(self.parse_exprs("g", m, 0, &SystemSpec::flat_matrix("g", e))?, None)?
            }
        };
        let fe = match &self.external_force {
            None => ExternalForce::zero(r),
            Some(f) => ExternalForce::new(self.parse_exprs(
                "external_force",
                m,
                r,
                &SystemSpec::flat_vec("external_force", f),
            )?),
        };
        let payload = match &self.payload {
            None => None,
            Some(PayloadSpec::Lagrangian(l)) => Some(Payload::Lagrange(Lagrangian::new(self.parse_exprs(
                "payload.lagrangian",
                m,
                r,
                &[("payload.lagrangian".into(), l.clone())],
            )?)?)),
            Some(PayloadSpec::Finsler(f)) => Some(Payload::Finsler(FinslerFunction::new(self.parse_exprs(
                "payload.finsler",
                m,
                r,
                &[("payload.finsler".into(), f.clone())],
            )?)?)),
            Some(PayloadSpec::Connection(c)) => Some(Payload::Connection(RhoEtaConnection::new(self.parse_exprs(
                "payload.connection",
                m,
                r,
                &SystemSpec::flat_matrix("payload.connection", c),
            )?)?)),
        };
        let system = MechanicalSystem::new(alg, gh, fe, payload)?;
        let monitors = self
            .monitors
            .iter()
            .enumerate()
            .map(|(k, mo)| {
                let p = join(&at("monitors", k), "expr");
                let map = self.parse_exprs(&p, m, r, &[(p.clone(), mo.expr.clone())])?;
                Ok(Monitor::new(&mo.name, std::sync::Arc::new(map)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LoadedSystem {
            spec: self.clone(),
            system,
            monitors,
            plan: self.sample_plan.clone(),
        })
    }
}
