//! Declared input parameters and the session's active parameter set.
//!
//! A parameter set is applied to every revision of a branch. Each revision
//! only sees the values it declares; anything else is dropped.

pub mod camera;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::revision::SourceState;
use crate::toolchain::{ToolchainAdapter, ToolchainError};

/// Reserved parameter names coupled to the live-view camera.
pub const CAM_EYE: &str = "cam_eye";
pub const CAM_AT: &str = "cam_at";
pub const CAM_UP: &str = "cam_up";

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("parameter {0} declared more than once")]
    DuplicateParameter(String),
    #[error("parameter {name} is declared as {declared} but the value is a {given}")]
    TypeMismatch { name: String, declared: ParamType, given: ParamType },
    #[error("invalid declaration of {0}: {1}")]
    InvalidDeclaration(String, String),
    #[error(transparent)]
    Toolchain(#[from] ToolchainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    Float,
    Vec3,
}

impl std::fmt::Display for ParamType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParamType::Float => "float",
            ParamType::Vec3 => "vec3",
        })
    }
}

/// A parameter value; on the wire a number or a `[x, y, z]` array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Float(f64),
    Vec3([f64; 3]),
}

impl ParamValue {
    pub fn ty(&self) -> ParamType {
        match self {
            ParamValue::Float(_) => ParamType::Float,
            ParamValue::Vec3(_) => ParamType::Vec3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub default: ParamValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

impl ParameterDecl {
    pub fn float(name: impl Into<String>, default: f64) -> Self {
        ParameterDecl { name: name.into(), ty: ParamType::Float, default: ParamValue::Float(default), range: None }
    }

    pub fn vec3(name: impl Into<String>, default: [f64; 3]) -> Self {
        ParameterDecl { name: name.into(), ty: ParamType::Vec3, default: ParamValue::Vec3(default), range: None }
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let invalid = |msg: &str| Err(ParamError::InvalidDeclaration(self.name.clone(), msg.to_string()));
        if self.default.ty() != self.ty {
            return invalid("default does not match the declared type");
        }
        if let Some((lo, hi)) = self.range {
            if self.ty != ParamType::Float {
                return invalid("ranges apply to float parameters only");
            }
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return invalid("range lower bound must be below the upper bound");
            }
            if let ParamValue::Float(v) = self.default {
                if !(lo..=hi).contains(&v) {
                    return invalid("default lies outside the range");
                }
            }
        }
        Ok(())
    }
}

/// Named values plus the generation counter of the set they belong to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub values: BTreeMap<String, ParamValue>,
    pub generation: u64,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: ParamValue) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    /// Overlay `values` onto this set and bump the generation.
    pub fn update(&mut self, values: impl IntoIterator<Item = (String, ParamValue)>) -> u64 {
        self.values.extend(values);
        self.generation += 1;
        self.generation
    }

    /// Values in the `{"name": value}` wire form.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.values).expect("parameter values serialize")
    }
}

/// Ask the toolchain for the declared parameters of `source`.
pub fn extract_params(source: &SourceState, adapter: &dyn ToolchainAdapter) -> Result<Vec<ParameterDecl>, ParamError> {
    let decls = adapter.declared_params(source)?;
    let mut seen = HashSet::new();
    for decl in &decls {
        if !seen.insert(decl.name.as_str()) {
            return Err(ParamError::DuplicateParameter(decl.name.clone()));
        }
        decl.validate()?;
    }
    Ok(decls)
}

/// The values a revision with declarations `decls` actually runs with:
/// active values it declares, defaults for the rest. Undeclared active names
/// are ignored.
pub fn effective_params(decls: &[ParameterDecl], active: &ParameterSet) -> Result<ParameterSet, ParamError> {
    let mut values = BTreeMap::new();
    for decl in decls {
        let value = match active.values.get(&decl.name) {
            Some(v) if v.ty() != decl.ty => {
                return Err(ParamError::TypeMismatch { name: decl.name.clone(), declared: decl.ty, given: v.ty() })
            }
            Some(v) => *v,
            None => decl.default,
        };
        values.insert(decl.name.clone(), value);
    }
    for name in active.values.keys().filter(|n| !values.contains_key(*n)) {
        log::debug!("parameter {name} is not declared by this revision; ignored");
    }
    Ok(ParameterSet { values, generation: active.generation })
}

/// Check `values` against declarations without applying them.
pub fn check_types<'a>(
    decls: &[ParameterDecl],
    values: impl IntoIterator<Item = (&'a String, &'a ParamValue)>,
) -> Result<(), ParamError> {
    for (name, value) in values {
        if let Some(decl) = decls.iter().find(|d| &d.name == name) {
            if decl.ty != value.ty() {
                return Err(ParamError::TypeMismatch { name: name.clone(), declared: decl.ty, given: value.ty() });
            }
        }
    }
    Ok(())
}
