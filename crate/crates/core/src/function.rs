//! Annotation functions: the monotone maps that compute a rule head's value
//! from its body annotations.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Tolerance for value equality and threshold comparisons.
pub const EPS_EQ: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FnKind {
    /// Σ αᵢ·xᵢ with αᵢ ≥ 0 and Σαᵢ ≤ 1.
    Linear { coeffs: Vec<f64> },
    Max,
    Average,
    /// max(x) when Σx ≥ τ, else 0.
    GatedMax { tau: f64 },
    /// base + Σ wᵢ·[xᵢ > 0], clamped to [0,1]. Used by the product-adoption
    /// game encoding; has no MILP linearization.
    MatchSum { base: f64, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFn {
    pub name: String,
    /// `None` for variadic builtins.
    pub arity: Option<usize>,
    pub kind: FnKind,
}

impl AnnotationFn {
    pub fn new(name: impl Into<String>, arity: Option<usize>, kind: FnKind) -> Result<Self> {
        let f = AnnotationFn { name: name.into(), arity, kind };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("function `{}`: {m}", self.name)));
        match &self.kind {
            FnKind::Linear { coeffs } => {
                if coeffs.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                    return bad("linear coefficients must be non-negative");
                }
                if coeffs.iter().sum::<f64>() > 1.0 + EPS_EQ {
                    return bad("linear coefficients must sum to at most 1");
                }
                if self.arity != Some(coeffs.len()) {
                    return bad("arity must equal the number of coefficients");
                }
            }
            FnKind::GatedMax { tau } => {
                if !(*tau >= 0.0 && tau.is_finite()) {
                    return bad("gate threshold must be a non-negative number");
                }
            }
            FnKind::MatchSum { base, weights } => {
                if !(0.0..=1.0).contains(base) || weights.iter().any(|w| !w.is_finite()) {
                    return bad("base must lie in [0,1] and weights must be finite");
                }
                if self.arity != Some(weights.len()) {
                    return bad("arity must equal the number of weights");
                }
            }
            FnKind::Max | FnKind::Average => {}
        }
        Ok(())
    }

    pub fn accepts(&self, n: usize) -> bool {
        self.arity.map_or(true, |a| a == n)
    }

    pub fn eval(&self, xs: &[f64]) -> f64 {
        let v = match &self.kind {
            FnKind::Linear { coeffs } => coeffs.iter().zip(xs).map(|(a, x)| a * x).sum(),
            FnKind::Max => xs.iter().copied().fold(0.0, f64::max),
            FnKind::Average => {
                if xs.is_empty() {
                    0.0
                } else {
                    xs.iter().sum::<f64>() / xs.len() as f64
                }
            }
            FnKind::GatedMax { tau } => {
                if xs.iter().sum::<f64>() >= tau - EPS_EQ {
                    xs.iter().copied().fold(0.0, f64::max)
                } else {
                    0.0
                }
            }
            FnKind::MatchSum { base, weights } => {
                base + weights.iter().zip(xs).filter(|(_, x)| **x > EPS_EQ).map(|(w, _)| w).sum::<f64>()
            }
        };
        v.clamp(0.0, 1.0)
    }

    /// Nondecreasing in every argument.
    pub fn is_monotone(&self) -> bool {
        match &self.kind {
            FnKind::MatchSum { weights, .. } => weights.iter().all(|w| *w >= 0.0),
            _ => true,
        }
    }

    pub fn is_linearizable(&self) -> bool {
        !matches!(self.kind, FnKind::MatchSum { .. })
    }

    pub fn is_builtin(&self) -> bool {
        BUILTINS.contains(&self.name.as_str())
    }

    /// Parameter text as written after `#function name arity`.
    pub fn kind_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", ");
        match &self.kind {
            FnKind::Linear { coeffs } => format!("linear({})", list(coeffs)),
            FnKind::Max => "max".into(),
            FnKind::Average => "avg".into(),
            FnKind::GatedMax { tau } => format!("gmax({})", fmt_num(*tau)),
            FnKind::MatchSum { base, weights } => {
                if weights.is_empty() {
                    format!("matchsum({})", fmt_num(*base))
                } else {
                    format!("matchsum({}, {})", fmt_num(*base), list(weights))
                }
            }
        }
    }
}

/// Shortest decimal text that parses back to the same f64 (never exponent form).
pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

const BUILTINS: [&str; 2] = ["max", "avg"];

pub type FnId = usize;

/// Name → function table. `max` and `avg` are always present and variadic.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRegistry {
    fns: Vec<AnnotationFn>,
    by_name: HashMap<String, FnId>,
}

impl Default for FunctionRegistry {
    fn default() -> Self {
        let mut r = FunctionRegistry { fns: Vec::new(), by_name: HashMap::new() };
        r.insert(AnnotationFn { name: "max".into(), arity: None, kind: FnKind::Max });
        r.insert(AnnotationFn { name: "avg".into(), arity: None, kind: FnKind::Average });
        r
    }
}

impl FunctionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(&mut self, f: AnnotationFn) -> FnId {
        let id = self.fns.len();
        self.by_name.insert(f.name.clone(), id);
        self.fns.push(f);
        id
    }

    pub fn register(&mut self, f: AnnotationFn) -> Result<FnId> {
        if self.by_name.contains_key(&f.name) {
            return Err(Error::Invalid(format!("function `{}` declared twice", f.name)));
        }
        f.validate()?;
        Ok(self.insert(f))
    }

    /// Registers `f` unless an identical function with that name exists.
    pub fn ensure(&mut self, f: AnnotationFn) -> Result<FnId> {
        match self.by_name.get(&f.name) {
            Some(&id) if self.fns[id] == f => Ok(id),
            Some(_) => Err(Error::Invalid(format!("function `{}` redeclared differently", f.name))),
            None => self.register(f),
        }
    }

    pub fn id(&self, name: &str) -> Option<FnId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: FnId) -> &AnnotationFn {
        &self.fns[id]
    }

    pub fn lookup(&self, name: &str) -> Result<&AnnotationFn> {
        self.id(name).map(|i| &self.fns[i]).ok_or_else(|| Error::UnknownFunction(name.into()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &AnnotationFn> {
        self.fns.iter()
    }

    /// User-declared functions in declaration order.
    pub fn declared(&self) -> impl Iterator<Item = &AnnotationFn> {
        self.fns.iter().filter(|f| !f.is_builtin())
    }

    pub fn max_id(&self) -> FnId {
        self.by_name["max"]
    }

    pub fn avg_id(&self) -> FnId {
        self.by_name["avg"]
    }

    /// The gated-max function for threshold `tau`, registered on demand.
    pub fn gated(&mut self, tau: f64) -> Result<FnId> {
        let name = format!("gmax_{}", fmt_num(tau).replace('.', "_").replace('-', "m"));
        self.ensure(AnnotationFn { name, arity: None, kind: FnKind::GatedMax { tau } })
    }
}
