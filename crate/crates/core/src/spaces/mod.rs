//! Finite-dimensional sequence spaces.
//!
//! A space is a [`NormFamily`] (how to evaluate the norm, its dual and induced operator
//! norms) together with a dimension and the basis constants `C_u`, `C_s`, `C_d`.
//! Families are looked up by name in a [`FamilyRegistry`], which is how the JSON space
//! files select them.

mod lorentz;
mod lp;
mod profile;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub use lorentz::Lorentz;
pub use lp::Lp;
pub use profile::{NuValue, TauMode, TAU_BRUTE_MAX};

/// A norm on finite real sequences, defined for every length up to [`max_len`](Self::max_len).
///
/// Implementations must be invariant under zero padding: the norm of `x` equals the
/// norm of `x` followed by zeros. Operator norms are taken between the spaces of
/// lengths `m.ncols()` (domain) and `m.nrows()` (codomain).
pub trait NormFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Family parameters as they appear in a space file, without `family` and `dim`.
    fn params(&self) -> serde_json::Map<String, Value>;

    fn max_len(&self) -> Option<usize> {
        None
    }

    /// Absolute and permutation invariant; such families are 1-unconditional and
    /// 1-spreading, and the profile suprema collapse to initial segments.
    fn is_symmetric(&self) -> bool;

    fn norm(&self, x: &[f64]) -> f64;

    fn dual_norm(&self, _y: &[f64]) -> Result<f64> {
        Err(Error::Unsupported(format!(
            "no closed-form dual norm for family `{}`",
            self.name()
        )))
    }

    fn op_norm_exact(&self, m: &DMatrix<f64>) -> Result<f64>;

    /// A certified upper bound on the operator norm.
    fn op_norm_upper(&self, m: &DMatrix<f64>) -> Result<f64>;

    /// Whether [`op_norm_exact`](Self::op_norm_exact) is available at this shape.
    fn has_exact_op_norm(&self, m: &DMatrix<f64>) -> bool;
}

type FamilyCtor = fn(&serde_json::Map<String, Value>) -> Result<Arc<dyn NormFamily>>;

/// Name → constructor table for norm families.
pub struct FamilyRegistry {
    entries: BTreeMap<&'static str, FamilyCtor>,
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl FamilyRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("lp", Lp::from_params);
        reg.register("lorentz", Lorentz::from_params);
        reg
    }

    pub fn register(&mut self, name: &'static str, ctor: FamilyCtor) {
        self.entries.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn build(
        &self,
        name: &str,
        params: &serde_json::Map<String, Value>,
    ) -> Result<Arc<dyn NormFamily>> {
        let ctor = self.entries.get(name).ok_or_else(|| Error::Unknown {
            kind: "norm family",
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        ctor(params)
    }

    /// Parses `{"family": ..., "dim": n, "cu"?: .., "cs"?: .., <family params>}`.
    pub fn space_from_json(&self, value: &Value) -> Result<SpaceSpec> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidSpace("space must be a JSON object".into()))?;
        let family = obj
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidSpace("missing string field `family`".into()))?;
        let dim = obj
            .get("dim")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidSpace("missing integer field `dim`".into()))?;
        let constant = |key: &str| -> Result<f64> {
            match obj.get(key) {
                None => Ok(1.0),
                Some(v) => v
                    .as_f64()
                    .ok_or_else(|| Error::InvalidSpace(format!("`{key}` must be a number"))),
            }
        };
        let (cu, cs) = (constant("cu")?, constant("cs")?);
        let fam = self.build(family, obj)?;
        SpaceSpec::new(fam, dim as usize)?.with_constants(cu, cs)
    }
}

/// A finite-dimensional sequence space: norm family, dimension and basis constants.
#[derive(Clone)]
pub struct SpaceSpec {
    family: Arc<dyn NormFamily>,
    dim: usize,
    cu: f64,
    cs: f64,
    cd: f64,
}

impl fmt::Debug for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpaceSpec({})", self.to_json())
    }
}

impl SpaceSpec {
    pub fn new(family: Arc<dyn NormFamily>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        if let Some(cap) = family.max_len() {
            if dim > cap {
                return Err(Error::InvalidSpace(format!(
                    "dimension {dim} exceeds the {cap} values the `{}` family defines",
                    family.name()
                )));
            }
        }
        Ok(Self {
            family,
            dim,
            cu: 1.0,
            cs: 1.0,
            cd: 1.0,
        })
    }

    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        Self::new(Arc::new(Lp::new(p)?), dim)
    }

    pub fn lorentz(weights: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(Arc::new(Lorentz::new(weights)?), dim)
    }

    /// Overrides `C_u` and `C_s`; both must be at least 1.
    pub fn with_constants(mut self, cu: f64, cs: f64) -> Result<Self> {
        if !(cu >= 1.0 && cs >= 1.0 && cu.is_finite() && cs.is_finite()) {
            return Err(Error::InvalidSpace(format!(
                "constants must be finite and >= 1 (cu={cu}, cs={cs})"
            )));
        }
        self.cu = cu;
        self.cs = cs;
        Ok(self)
    }

    pub fn family(&self) -> &dyn NormFamily {
        self.family.as_ref()
    }

    pub fn family_name(&self) -> &'static str {
        self.family.name()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cu(&self) -> f64 {
        self.cu
    }

    pub fn cs(&self) -> f64 {
        self.cs
    }

    pub fn cd(&self) -> f64 {
        self.cd
    }

    pub fn is_symmetric(&self) -> bool {
        self.family.is_symmetric()
    }

    /// True when the norm is symmetric and the declared constants are the exact ones (1, 1).
    pub fn has_exact_constants(&self) -> bool {
        self.is_symmetric() && self.cu == 1.0 && self.cs == 1.0
    }

    /// The span of the first `k` basis vectors, with the same constants.
    pub fn restrict(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim {
            return Err(Error::OutOfRange(format!(
                "restriction to {k} coordinates of a {}-dimensional space",
                self.dim
            )));
        }
        Ok(Self {
            dim: k,
            ..self.clone()
        })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        Ok(self.family.norm(x))
    }

    pub fn dual_norm(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y.len())?;
        self.family.dual_norm(y)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = self.family.params();
        obj.insert("family".into(), json!(self.family.name()));
        obj.insert("dim".into(), json!(self.dim));
        if self.cu != 1.0 {
            obj.insert("cu".into(), json!(self.cu));
        }
        if self.cs != 1.0 {
            obj.insert("cs".into(), json!(self.cs));
        }
        Value::Object(obj)
    }
}
