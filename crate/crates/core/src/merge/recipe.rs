//! Declarative merge configuration, read from YAML.
//!
//! The file format mirrors the established merge-framework layout so
//! existing configurations work unchanged:
//!
//! ```yaml
//! slices:
//!   - sources:
//!       - model: base-model
//!         layer_range: [0, 32]
//!       - model: adapted-model
//!         layer_range: [0, 32]
//! merge_method: slerp
//! base_model: base-model
//! parameters:
//!   t:
//!     - filter: self_attn
//!       value: [0, 0.5, 0.3, 0.7, 1]
//!     - filter: mlp
//!       value: [1, 0.5, 0.7, 0.3, 0]
//!     - value: 0.5
//! dtype: float16
//! ```

use super::MergeError;
use crate::archive::Dtype;
use serde::Deserialize;
use std::path::Path;

/// Anchor schedule attached to a tensor-name fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSchedule {
    /// Substring matched against tensor names (e.g. `self_attn`, `mlp`).
    pub name_fragment: String,
    /// One or more t-values, each in [0, 1], spread over layer depth.
    pub anchors: Vec<f64>,
}

/// Validated merge configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeRecipe {
    /// Model acting as the interpolation origin (t = 0).
    pub base_model: String,
    /// Model acting as the interpolation target (t = 1).
    pub other_model: String,
    /// `[begin, end)` layer indices; `end` fixes the layer count. When
    /// absent the layer count is inferred from tensor names.
    pub layer_range: Option<[usize; 2]>,
    /// Component schedules, matched first-to-last.
    pub filters: Vec<FilterSchedule>,
    /// Coefficient for tensors outside every filter and outside the layer
    /// stack.
    pub default_t: f64,
    /// Storage dtype of the merged checkpoint.
    pub output_dtype: Dtype,
}

impl MergeRecipe {
    /// The depth-gradient configuration used when blending an
    /// instruction-tuned checkpoint with its continually pre-trained
    /// counterpart: attention tensors shift toward the adapted model with
    /// depth, MLP tensors shift the opposite way, everything else blends
    /// evenly.
    pub fn standard_gradient(output_dtype: Dtype) -> MergeRecipe {
        MergeRecipe {
            base_model: "base".to_string(),
            other_model: "other".to_string(),
            layer_range: None,
            filters: vec![
                FilterSchedule {
                    name_fragment: "self_attn".to_string(),
                    anchors: vec![0.0, 0.5, 0.3, 0.7, 1.0],
                },
                FilterSchedule {
                    name_fragment: "mlp".to_string(),
                    anchors: vec![1.0, 0.5, 0.7, 0.3, 0.0],
                },
            ],
            default_t: 0.5,
            output_dtype,
        }
    }

    /// Uniform recipe: every tensor merges at the same `t`.
    pub fn uniform(t: f64, output_dtype: Dtype) -> MergeRecipe {
        MergeRecipe {
            base_model: "base".to_string(),
            other_model: "other".to_string(),
            layer_range: None,
            filters: Vec::new(),
            default_t: t,
            output_dtype,
        }
    }

    pub fn validate(&self) -> Result<(), MergeError> {
        let invalid = |msg: String| Err(MergeError::InvalidRecipe(msg));
        if !(0.0..=1.0).contains(&self.default_t) {
            return invalid(format!("default t {} outside [0, 1]", self.default_t));
        }
        if let Some([begin, end]) = self.layer_range {
            if begin != 0 {
                return invalid(format!(
                    "layer_range must start at 0, got [{begin}, {end})"
                ));
            }
            if end == 0 {
                return invalid("layer_range must cover at least one layer".to_string());
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for filter in &self.filters {
            if filter.name_fragment.is_empty() {
                return invalid("filter name fragment must be non-empty".to_string());
            }
            if !seen.insert(filter.name_fragment.as_str()) {
                return invalid(format!("duplicate filter {:?}", filter.name_fragment));
            }
            if filter.anchors.is_empty() {
                return invalid(format!("filter {:?} has no anchors", filter.name_fragment));
            }
            for &a in &filter.anchors {
                if !(0.0..=1.0).contains(&a) {
                    return invalid(format!(
                        "filter {:?} anchor {a} outside [0, 1]",
                        filter.name_fragment
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecipeFile {
    slices: Vec<SliceSpec>,
    merge_method: String,
    base_model: String,
    parameters: ParametersSpec,
    dtype: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceSpec {
    sources: Vec<SourceSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSpec {
    model: String,
    layer_range: [usize; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParametersSpec {
    t: Vec<TEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TEntry {
    #[serde(default)]
    filter: Option<String>,
    value: ScalarOrList,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

pub fn parse_recipe(yaml: &str) -> Result<MergeRecipe, MergeError> {
    let file: RecipeFile =
        serde_yaml::from_str(yaml).map_err(|e| MergeError::RecipeFormat(e.to_string()))?;
    let invalid = |msg: String| MergeError::InvalidRecipe(msg);

    if file.merge_method != "slerp" {
        return Err(MergeError::UnsupportedMethod(file.merge_method));
    }
    let [slice] = file.slices.as_slice() else {
        return Err(invalid(format!(
            "expected exactly one slice, got {}",
            file.slices.len()
        )));
    };
    let [first, second] = slice.sources.as_slice() else {
        return Err(invalid(format!(
            "expected exactly two sources, got {}",
            slice.sources.len()
        )));
    };
    if first.layer_range != second.layer_range {
        return Err(invalid("sources disagree on layer_range".to_string()));
    }
    let (base, other) = if file.base_model == first.model {
        (first, second)
    } else if file.base_model == second.model {
        (second, first)
    } else {
        return Err(invalid(format!(
            "base_model {:?} is not one of the slice sources",
            file.base_model
        )));
    };

    let mut filters = Vec::new();
    let mut default_t = None;
    for entry in file.parameters.t {
        let anchors = match entry.value {
            ScalarOrList::Scalar(x) => vec![x],
            ScalarOrList::List(xs) => xs,
        };
        match entry.filter {
            Some(fragment) => filters.push(FilterSchedule {
                name_fragment: fragment,
                anchors,
            }),
            None => {
                if default_t.is_some() {
                    return Err(invalid("multiple unfiltered t entries".to_string()));
                }
                let [t] = anchors.as_slice() else {
                    return Err(invalid("the unfiltered t entry must be a scalar".to_string()));
                };
                default_t = Some(*t);
            }
        }
    }
    let default_t =
        default_t.ok_or_else(|| invalid("missing unfiltered default t entry".to_string()))?;

    let output_dtype = match file.dtype.as_str() {
        "float32" => Dtype::F32,
        "float16" => Dtype::F16,
        "bfloat16" => Dtype::BF16,
        other => return Err(invalid(format!("unknown dtype {other:?}"))),
    };

    let recipe = MergeRecipe {
        base_model: base.model.clone(),
        other_model: other.model.clone(),
        layer_range: Some(base.layer_range),
        filters,
        default_t,
        output_dtype,
    };
    recipe.validate()?;
    Ok(recipe)
}

pub fn load_recipe(path: impl AsRef<Path>) -> Result<MergeRecipe, MergeError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MergeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_recipe(&text)
}
