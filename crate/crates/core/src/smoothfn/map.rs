use std::fmt;
use std::sync::Arc;

use super::expr::{parse_expression, ExprAst};
use super::jet::{Jet, JetSpace};
use crate::error::{Error, Result};

type Closure = dyn Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync;

#[derive(Clone)]
enum Body {
    Exprs(Arc<[ExprAst]>),
    Closure { out: usize, f: Arc<Closure> },
}

/// A map `ℝ^{m+r} → ℝ^k` whose inputs are `[x1..xm, y1..yr]`.
#[derive(Clone)]
pub struct SmoothMap {
    m: usize,
    r: usize,
    body: Body,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            Body::Exprs(e) => {
                let s: Vec<String> = e.iter().map(|e| e.to_string()).collect();
                write!(f, "SmoothMap(m={}, r={}, {:?})", self.m, self.r, s)
            }
            Body::Closure { out, .. } => {
                write!(f, "SmoothMap(m={}, r={}, closure -> {out})", self.m, self.r)
            }
        }
    }
}

impl SmoothMap {
    pub fn from_exprs(m: usize, r: usize, exprs: Vec<ExprAst>) -> Result<SmoothMap> {
        for e in &exprs {
            let (mx, my) = e.max_vars();
            if mx > m || my > r {
                return Err(Error::Dimension {
                    what: format!("expression `{e}`"),
                    expected: m + r,
                    got: mx.max(my),
                });
            }
        }
        Ok(SmoothMap {
            m,
            r,
            body: Body::Exprs(exprs.into()),
        })
    }

    /// Parses one expression per output.
    pub fn parse<S: AsRef<str>>(m: usize, r: usize, srcs: &[S]) -> Result<SmoothMap> {
        let exprs = srcs
            .iter()
            .map(|s| parse_expression(s.as_ref(), m, r))
            .collect::<Result<Vec<_>>>()?;
        SmoothMap::from_exprs(m, r, exprs)
    }

    pub fn constant(m: usize, r: usize, values: &[f64]) -> SmoothMap {
        let exprs = values.iter().map(|&v| ExprAst::Literal(v)).collect();
        SmoothMap::from_exprs(m, r, exprs).expect("literals reference no variables")
    }

    pub fn from_closure<F>(m: usize, r: usize, out: usize, f: F) -> SmoothMap
    where
        F: Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    {
        SmoothMap {
            m,
            r,
            body: Body::Closure { out, f: Arc::new(f) },
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn arity_in(&self) -> usize {
        self.m + self.r
    }

    pub fn arity_out(&self) -> usize {
        match &self.body {
            Body::Exprs(e) => e.len(),
            Body::Closure { out, .. } => *out,
        }
    }

    pub fn exprs(&self) -> Option<&[ExprAst]> {
        match &self.body {
            Body::Exprs(e) => Some(e),
            Body::Closure { .. } => None,
        }
    }

    /// True when every output is a literal.
    pub fn constant_values(&self) -> Option<Vec<f64>> {
        self.exprs()?
            .iter()
            .map(|e| match e {
                ExprAst::Literal(v) => Some(*v),
                _ => None,
            })
            .collect()
    }

    fn check_arity(&self, got: usize) -> Result<()> {
        if got != self.arity_in() {
            return Err(Error::Dimension {
                what: "smooth map input".into(),
                expected: self.arity_in(),
                got,
            });
        }
        Ok(())
    }

    pub fn eval(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        self.check_arity(inputs.len())?;
        match &self.body {
            Body::Exprs(e) => e.iter().map(|e| e.eval_f64(self.m, inputs)).collect(),
            Body::Closure { f, .. } => {
                let jets: Vec<Jet> = inputs.iter().map(|&v| Jet::real(v)).collect();
                Ok(f(&jets)?.iter().map(Jet::value).collect())
            }
        }
    }

    pub fn eval_jets(&self, inputs: &[Jet]) -> Result<Vec<Jet>> {
        self.check_arity(inputs.len())?;
        match &self.body {
            Body::Exprs(e) => e.iter().map(|e| e.eval_jet(self.m, inputs)).collect(),
            Body::Closure { f, .. } => f(inputs),
        }
    }
}

/// Jets of `f` at `point`, differentiating with respect to the inputs listed
/// in `seeds`; the other inputs are held fixed.
pub fn eval_jet(f: &SmoothMap, point: &[f64], seeds: &[usize], order: usize) -> Result<Vec<Jet>> {
    f.check_arity(point.len())?;
    if let Some(&bad) = seeds.iter().find(|&&s| s >= point.len()) {
        return Err(Error::Dimension {
            what: "seed index".into(),
            expected: point.len(),
            got: bad + 1,
        });
    }
    let space = JetSpace::get(seeds.len(), order);
    let inputs: Vec<Jet> = point
        .iter()
        .enumerate()
        .map(|(i, &v)| match seeds.iter().position(|&s| s == i) {
            Some(k) => Jet::variable(&space, v, k),
            None => Jet::constant(&space, v),
        })
        .collect();
    f.eval_jets(&inputs)
}

/// Largest relative gap between order-1 jet partials and central differences
/// with step `1e-6·(1+|u|)`.
pub fn fd_oracle_check(f: &SmoothMap, point: &[f64]) -> Result<f64> {
    let seeds: Vec<usize> = (0..point.len()).collect();
    let jets = eval_jet(f, point, &seeds, 1)?;
    let mut worst = 0.0f64;
    for k in 0..point.len() {
        let h = 1e-6 * (1.0 + point[k].abs());
        let mut up = point.to_vec();
        let mut dn = point.to_vec();
        up[k] += h;
        dn[k] -= h;
        let fu = f.eval(&up)?;
        let fd = f.eval(&dn)?;
        for (o, j) in jets.iter().enumerate() {
            let approx = (fu[o] - fd[o]) / (2.0 * h);
            let exact = j.first(k);
            worst = worst.max((exact - approx).abs() / exact.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// A state `(x, y)` together with the jet order requested of fields there.
///
/// The coordinate jets are the identity seeds on all `m + r` state variables,
/// so derivatives of any field evaluated at a point are state derivatives.
#[derive(Clone, Debug)]
pub struct Point {
    values: Vec<f64>,
    order: usize,
    jets: Vec<Jet>,
}

impl Point {
    pub fn new(values: &[f64], order: usize) -> Point {
        let space = JetSpace::get(values.len(), order);
        let jets = values
            .iter()
            .enumerate()
            .map(|(k, &v)| Jet::variable(&space, v, k))
            .collect();
        Point {
            values: values.to_vec(),
            order,
            jets,
        }
    }

    pub fn from_xy(x: &[f64], y: &[f64], order: usize) -> Point {
        let mut v = x.to_vec();
        v.extend_from_slice(y);
        Point::new(&v, order)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        self.jets[0].space()
    }

    pub fn constant(&self, v: f64) -> Jet {
        Jet::constant(self.space(), v)
    }

    pub fn zero(&self) -> Jet {
        self.constant(0.0)
    }

    /// The same state with `d` more orders of derivatives.
    pub fn raised(&self, d: usize) -> Point {
        Point::new(&self.values, self.order + d)
    }
}

/// A jet-capable vector field on state space.
///
/// `jets` returns jets of order `p.order()` in the state seeds.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;
    fn jets(&self, p: &Point) -> Result<Vec<Jet>>;

    fn values(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jets(&Point::new(state, 0))?.iter().map(Jet::value).collect())
    }
}

impl Field for SmoothMap {
    fn dim(&self) -> usize {
        self.arity_out()
    }

    fn jets(&self, p: &Point) -> Result<Vec<Jet>> {
        self.eval_jets(p.jets())
    }
}

type FieldFn = dyn Fn(&Point) -> Result<Vec<Jet>> + Send + Sync;

/// A field defined by a closure over points.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    f: Arc<FieldFn>,
}

impl FnField {
    pub fn new<F>(dim: usize, f: F) -> FnField
    where
        F: Fn(&Point) -> Result<Vec<Jet>> + Send + Sync + 'static,
    {
        FnField { dim, f: Arc::new(f) }
    }

    pub fn shared<F>(dim: usize, f: F) -> Arc<dyn Field>
    where
        F: Fn(&Point) -> Result<Vec<Jet>> + Send + Sync + 'static,
    {
        Arc::new(FnField::new(dim, f))
    }
}

impl Field for FnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jets(&self, p: &Point) -> Result<Vec<Jet>> {
        (self.f)(p)
    }
}

/// A field with the given constant values.
pub fn const_field(values: Vec<f64>) -> Arc<dyn Field> {
    FnField::shared(values.len(), move |p| Ok(values.iter().map(|&v| p.constant(v)).collect()))
}
