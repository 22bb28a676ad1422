//! The compile pipeline from a raw document to a servable manifest.

use thiserror::Error;

use crate::compiler::{compile_manifest, ToolManifest};
use crate::doctor::FailureClass;
use crate::ingest::{normalize, resolve_base_url, BaseUrlError, RawDocument};
use crate::refs::{flatten, validate, FlattenedContract, RefError, ValidationFinding};
use crate::security::{build_env_map, extract_security, EnvMap, SchemeError, SecurityScheme};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    BaseUrl(#[from] BaseUrlError),
    #[error(transparent)]
    Ref(#[from] RefError),
    #[error("contract is malformed: {}", .0.iter().map(|f| format!("{} ({})", f.message, f.pointer)).collect::<Vec<_>>().join("; "))]
    Validation(Vec<ValidationFinding>),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

impl CompileError {
    /// Lint class the failure corresponds to, when it has one.
    pub fn class(&self) -> Option<FailureClass> {
        match self {
            Self::BaseUrl(e) => Some(e.class),
            Self::Scheme(e) => Some(e.class),
            Self::Ref(_) | Self::Validation(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub contract: FlattenedContract,
    pub schemes: Vec<SecurityScheme>,
    pub env_map: EnvMap,
    pub manifest: ToolManifest,
    /// Non-fatal validation findings and ingest warnings.
    pub warnings: Vec<String>,
}

pub fn compile_document(raw: &RawDocument) -> Result<Compiled, CompileError> {
    let base_url = resolve_base_url(raw)?;
    let contract = flatten(&normalize(raw))?;
    let findings = validate(&contract);
    let (fatal, rest): (Vec<_>, Vec<_>) = findings.into_iter().partition(|f| f.fatal);
    if !fatal.is_empty() {
        return Err(CompileError::Validation(fatal));
    }
    let schemes = extract_security(&contract)?;
    let manifest = compile_manifest(&contract, &schemes, base_url);
    let env_map = build_env_map(&schemes, &manifest.api_title);
    let mut warnings = raw.warnings.clone();
    warnings.extend(rest.into_iter().map(|f| format!("{}: {}", f.pointer, f.message)));
    Ok(Compiled {
        contract,
        schemes,
        env_map,
        manifest,
        warnings,
    })
}
