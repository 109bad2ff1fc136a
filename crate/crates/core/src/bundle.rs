//! Instance bundles: the JSON file a club is loaded from and saved to.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::domain::{validate_instance, Formation, Instance, Player, DEFAULT_FORMATION, DEFAULT_SQUAD_SIZE};
use crate::money::Money;
use crate::value::ValueModel;

pub const SCHEMA_VERSION: u32 = 1;
/// Chance level used when a bundle does not set one.
pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error("schema version {0} is not supported (expected {SCHEMA_VERSION})")]
    UnsupportedVersion(u32),
    #[error("formation `{0}` is not a known preset")]
    UnknownFormation(String),
    #[error("ratings name unknown player `{0}`")]
    UnknownRatingPlayer(String),
    #[error("invalid instance: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub source_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub retrieved: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBundle {
    pub instance: Instance,
    pub value_model: Option<ValueModel>,
    /// Ratings by player id as produced by a rating run, kept alongside the
    /// ratings already stored on each player.
    pub ratings: Option<BTreeMap<String, f64>>,
    pub provenance: Provenance,
}

/// Optional fields must be absent or well formed; an explicit `null` is rejected.
fn present<'de, D, T>(d: D) -> Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    T::deserialize(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum FormationSpec {
    Preset(String),
    Custom(Formation),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    club: String,
    budget: Money,
    #[serde(default, deserialize_with = "present")]
    squad_size: Option<u32>,
    #[serde(default, deserialize_with = "present")]
    formation: Option<FormationSpec>,
    #[serde(default, deserialize_with = "present")]
    value_threshold: Option<Money>,
    #[serde(default, deserialize_with = "present")]
    alpha: Option<f64>,
    #[serde(default, deserialize_with = "present")]
    growth_factor: Option<f64>,
    #[serde(default, deserialize_with = "present")]
    threshold_discount: Option<f64>,
    players: Vec<Player>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    schema_version: u32,
    instance: InstanceFile,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    value_model: Option<ValueModel>,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    ratings: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    provenance: Provenance,
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance, BundleError> {
        let squad_size = self.squad_size.unwrap_or(DEFAULT_SQUAD_SIZE);
        let formation = match self.formation {
            Some(FormationSpec::Preset(name)) => Formation::preset(&name).ok_or(BundleError::UnknownFormation(name))?,
            Some(FormationSpec::Custom(f)) => f,
            None => default_formation(squad_size),
        };
        let value_threshold = self.value_threshold.unwrap_or_else(|| Instance::owned_value(&self.players));
        Ok(Instance {
            club: self.club,
            players: self.players,
            budget: self.budget,
            squad_size,
            formation,
            value_threshold,
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            growth_factor: self.growth_factor.unwrap_or(1.0),
            threshold_discount: self.threshold_discount.unwrap_or(0.0),
        })
    }

    fn from_instance(i: &Instance) -> Self {
        Self {
            club: i.club.clone(),
            budget: i.budget,
            squad_size: Some(i.squad_size),
            formation: Some(FormationSpec::Custom(i.formation.clone())),
            value_threshold: Some(i.value_threshold),
            alpha: Some(i.alpha),
            growth_factor: Some(i.growth_factor),
            threshold_discount: Some(i.threshold_discount),
            players: i.players.clone(),
        }
    }
}

/// Preset 433 when its minimums fit the squad, otherwise no role bounds.
pub fn default_formation(squad_size: u32) -> Formation {
    let preset = Formation::preset(DEFAULT_FORMATION).expect("default preset exists");
    if preset.total_min() <= squad_size {
        preset
    } else {
        Formation::free()
    }
}

/// Parses and validates a bundle, applying defaults to absent fields only.
pub fn parse_bundle(text: &str) -> Result<InstanceBundle, BundleError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: BundleFile = serde_path_to_error::deserialize(de).map_err(|e| BundleError::Schema {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(BundleError::UnsupportedVersion(file.schema_version));
    }
    let instance = file.instance.into_instance()?;
    let violations = validate_instance(&instance);
    if !violations.is_empty() {
        return Err(BundleError::Invalid(violations));
    }
    if let Some(ratings) = &file.ratings {
        if let Some(id) = ratings.keys().find(|id| instance.player(id).is_none()) {
            return Err(BundleError::UnknownRatingPlayer(id.clone()));
        }
    }
    if let Some(model) = &file.value_model {
        model.check().map_err(|e| BundleError::Schema {
            field: "value_model".into(),
            message: e.to_string(),
        })?;
    }
    Ok(InstanceBundle {
        instance,
        value_model: file.value_model,
        ratings: file.ratings,
        provenance: file.provenance,
    })
}

/// Canonical text of a bundle: every instance field written out explicitly.
pub fn bundle_to_string(bundle: &InstanceBundle) -> String {
    let file = BundleFile {
        schema_version: SCHEMA_VERSION,
        instance: InstanceFile::from_instance(&bundle.instance),
        value_model: bundle.value_model.clone(),
        ratings: bundle.ratings.clone(),
        provenance: bundle.provenance.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("bundle serializes");
    text.push('\n');
    text
}

pub fn load_instance(path: &Path) -> Result<InstanceBundle, BundleError> {
    let text = fs::read_to_string(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_bundle(&text)
}

pub fn save_instance(bundle: &InstanceBundle, path: &Path) -> Result<(), BundleError> {
    write_atomic(path, bundle_to_string(bundle).as_bytes()).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a sibling temporary file and a rename, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().ok_or_else(|| std::io::Error::other("path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
