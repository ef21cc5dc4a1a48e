//! Checkpoint merging: spherical interpolation of two parameter sets under
//! a layer-wise, component-specific coefficient schedule.

mod recipe;
mod schedule;
mod slerp;

pub use recipe::{load_recipe, parse_recipe, FilterSchedule, MergeRecipe};
pub use schedule::{match_filter, resolve_layer_index, schedule_value};
pub use slerp::{slerp, SlerpOutput, DEFAULT_DOT_THRESHOLD};

use crate::archive::{TensorCheckpoint, TensorRecord};
use serde::Serialize;
use std::io;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("recipe does not parse: {0}")]
    RecipeFormat(String),
    #[error("unsupported merge_method {0:?}")]
    UnsupportedMethod(String),
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot interpolate empty vectors")]
    EmptyVector,
    #[error("schedule has no anchors")]
    EmptyAnchors,
    #[error("layer {layer} out of range for a {num_layers}-layer model")]
    LayerOutOfRange { layer: usize, num_layers: usize },
    #[error("checkpoints hold different tensors: {0}")]
    TensorSetMismatch(String),
    #[error("tensor {name}: shapes differ ({left:?} vs {right:?})")]
    ShapeMismatch {
        name: String,
        left: Vec<usize>,
        right: Vec<usize>,
    },
}

/// Per-tensor decision trail of a merge.
#[derive(Debug, Clone, Serialize)]
pub struct TensorMergeRecord {
    pub tensor: String,
    pub layer: Option<usize>,
    /// Matched filter fragment, or `"default"`.
    pub filter: String,
    pub t: f64,
    pub linear_fallback: bool,
}

/// Summary of a completed merge: one record per output tensor, assembled in
/// canonical (lexicographic) tensor order.
#[derive(Debug, Clone, Serialize)]
pub struct MergeReport {
    pub num_layers: usize,
    /// Tensors interpolated from distinct inputs.
    pub merged: usize,
    /// Tensors whose two inputs were bitwise identical.
    pub copied: usize,
    pub records: Vec<TensorMergeRecord>,
}

/// Merges `other` into `base` under the recipe's schedule, producing the
/// blended checkpoint and a full decision report.
///
/// Both checkpoints must hold the same tensor names with the same shapes.
/// The layer count comes from the recipe's `layer_range` end when present,
/// otherwise from the highest layer index found in tensor names.
pub fn merge_checkpoints(
    recipe: &MergeRecipe,
    base: &TensorCheckpoint,
    other: &TensorCheckpoint,
) -> Result<(TensorCheckpoint, MergeReport), MergeError> {
    merge_checkpoints_with(recipe, base, other, DEFAULT_DOT_THRESHOLD)
}

pub fn merge_checkpoints_with(
    recipe: &MergeRecipe,
    base: &TensorCheckpoint,
    other: &TensorCheckpoint,
    dot_threshold: f64,
) -> Result<(TensorCheckpoint, MergeReport), MergeError> {
    recipe.validate()?;
    check_tensor_sets(base, other)?;

    let num_layers = match recipe.layer_range {
        Some([_, end]) => end,
        None => infer_num_layers(base),
    };

    let mut out = TensorCheckpoint::new();
    out.metadata = base.metadata.clone();
    let mut report = MergeReport {
        num_layers,
        merged: 0,
        copied: 0,
        records: Vec::with_capacity(base.tensors.len()),
    };

    for (name, base_rec) in &base.tensors {
        let other_rec = &other.tensors[name];
        let layer = resolve_layer_index(name);
        // tensors outside the layer stack are governed by the recipe's
        // unfiltered clause, regardless of fragment matches in their names
        let (filter, t) = match layer {
            Some(l) => {
                let matched = recipe
                    .filters
                    .iter()
                    .find(|f| name.contains(&f.name_fragment));
                let (filter, anchors) = match matched {
                    Some(f) => (f.name_fragment.as_str(), f.anchors.as_slice()),
                    None => ("default", std::slice::from_ref(&recipe.default_t)),
                };
                (filter.to_string(), schedule_value(anchors, l, num_layers)?)
            }
            None => ("default".to_string(), recipe.default_t),
        };

        let identical = base_rec.values.len() == other_rec.values.len()
            && base_rec
                .values
                .iter()
                .zip(&other_rec.values)
                .all(|(a, b)| a.to_bits() == b.to_bits());

        let (values, fallback) = if identical {
            report.copied += 1;
            (base_rec.values.clone(), true)
        } else {
            let out = slerp(t, &base_rec.values, &other_rec.values, dot_threshold)?;
            report.merged += 1;
            (out.values, out.linear_fallback)
        };

        out.tensors.insert(
            name.clone(),
            TensorRecord {
                dtype: recipe.output_dtype,
                shape: base_rec.shape.clone(),
                values,
            },
        );
        report.records.push(TensorMergeRecord {
            tensor: name.clone(),
            layer,
            filter,
            t,
            linear_fallback: fallback,
        });
    }

    Ok((out, report))
}

fn check_tensor_sets(base: &TensorCheckpoint, other: &TensorCheckpoint) -> Result<(), MergeError> {
    for name in base.tensors.keys() {
        if !other.tensors.contains_key(name) {
            return Err(MergeError::TensorSetMismatch(format!(
                "{name:?} missing from the second checkpoint"
            )));
        }
    }
    for name in other.tensors.keys() {
        if !base.tensors.contains_key(name) {
            return Err(MergeError::TensorSetMismatch(format!(
                "{name:?} missing from the first checkpoint"
            )));
        }
    }
    for (name, rec) in &base.tensors {
        let other_rec = &other.tensors[name];
        if rec.shape != other_rec.shape {
            return Err(MergeError::ShapeMismatch {
                name: name.clone(),
                left: rec.shape.clone(),
                right: other_rec.shape.clone(),
            });
        }
    }
    Ok(())
}

/// One past the highest layer index named in the checkpoint, or 1 when no
/// tensor carries a layer segment.
pub fn infer_num_layers(ckpt: &TensorCheckpoint) -> usize {
    ckpt.tensors
        .keys()
        .filter_map(|name| resolve_layer_index(name))
        .max()
        .map(|max| max + 1)
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::{checkpoint_to_bytes, Dtype, WriteOptions};

    fn synthetic_pair(layers: usize) -> (TensorCheckpoint, TensorCheckpoint) {
        let mut base = TensorCheckpoint::new();
        let mut other = TensorCheckpoint::new();
        let mut push = |name: String, seed: f32| {
            let a: Vec<f32> = (0..6).map(|i| 0.13 * seed + 0.07 * i as f32 + 0.11).collect();
            let b: Vec<f32> = (0..6).map(|i| 0.29 * seed - 0.05 * i as f32 + 0.41).collect();
            base.insert(
                name.clone(),
                TensorRecord::new(Dtype::F32, vec![2, 3], a).unwrap(),
            )
            .unwrap();
            other
                .insert(name, TensorRecord::new(Dtype::F32, vec![2, 3], b).unwrap())
                .unwrap();
        };
        for l in 0..layers {
            push(format!("model.layers.{l}.self_attn.q_proj.weight"), l as f32);
            push(format!("model.layers.{l}.mlp.gate_proj.weight"), l as f32 + 0.5);
            push(format!("model.layers.{l}.input_layernorm.weight"), l as f32 + 0.25);
        }
        push("model.embed_tokens.weight".to_string(), -1.0);
        push("model.norm.weight".to_string(), -2.0);
        (base, other)
    }

    #[test]
    fn identical_inputs_reproduce_themselves_exactly() {
        let (base, _) = synthetic_pair(2);
        let recipe = MergeRecipe::standard_gradient(Dtype::F32);
        let (merged, report) = merge_checkpoints(&recipe, &base, &base).unwrap();
        assert_eq!(report.copied, base.tensors.len());
        assert_eq!(report.merged, 0);
        for (name, rec) in &base.tensors {
            assert_eq!(merged.tensors[name].values, rec.values);
        }
        assert!(report.records.iter().all(|r| r.linear_fallback));
    }

    #[test]
    fn single_layer_mlp_takes_the_other_checkpoint() {
        let mut base = TensorCheckpoint::new();
        let mut other = TensorCheckpoint::new();
        base.insert(
            "model.layers.0.mlp.x",
            TensorRecord::new(Dtype::F32, vec![2], vec![1.0, 2.0]).unwrap(),
        )
        .unwrap();
        other
            .insert(
                "model.layers.0.mlp.x",
                TensorRecord::new(Dtype::F32, vec![2], vec![3.0, 5.0]).unwrap(),
            )
            .unwrap();
        let recipe = MergeRecipe::standard_gradient(Dtype::F32);
        let (merged, report) = merge_checkpoints(&recipe, &base, &other).unwrap();
        assert_eq!(report.num_layers, 1);
        assert_eq!(report.records[0].t, 1.0);
        assert_eq!(merged.tensors["model.layers.0.mlp.x"].values, vec![3.0, 5.0]);
    }

    #[test]
    fn per_tensor_t_matches_schedule_oracle() {
        let layers = 4;
        let (base, other) = synthetic_pair(layers);
        let recipe = MergeRecipe::standard_gradient(Dtype::F32);
        let (_, report) = merge_checkpoints(&recipe, &base, &other).unwrap();

        // independent piecewise-linear evaluation over explicit segments
        let oracle = |anchors: &[f64], layer: usize| -> f64 {
            let p = layer as f64 / (layers - 1) as f64;
            let m = anchors.len();
            for j in 0..m - 1 {
                let x0 = j as f64 / (m - 1) as f64;
                let x1 = (j + 1) as f64 / (m - 1) as f64;
                if p >= x0 && p <= x1 {
                    return anchors[j] + (anchors[j + 1] - anchors[j]) * (p - x0) / (x1 - x0);
                }
            }
            unreachable!()
        };

        for record in &report.records {
            let want = match (record.layer, record.filter.as_str()) {
                (Some(l), "self_attn") => oracle(&[0.0, 0.5, 0.3, 0.7, 1.0], l),
                (Some(l), "mlp") => oracle(&[1.0, 0.5, 0.7, 0.3, 0.0], l),
                _ => 0.5,
            };
            assert!(
                (record.t - want).abs() < 1e-12,
                "{}: got {}, want {want}",
                record.tensor,
                record.t
            );
        }
    }

    #[test]
    fn all_zero_anchors_reproduce_base() {
        let (base, other) = synthetic_pair(3);
        let mut recipe = MergeRecipe::standard_gradient(Dtype::F32);
        for f in &mut recipe.filters {
            f.anchors = vec![0.0];
        }
        recipe.default_t = 0.0;
        let (merged, _) = merge_checkpoints(&recipe, &base, &other).unwrap();
        let out = checkpoint_to_bytes(&merged, &WriteOptions::default()).unwrap();
        let mut base_f32 = base.clone();
        for rec in base_f32.tensors.values_mut() {
            rec.dtype = Dtype::F32;
        }
        let want = checkpoint_to_bytes(&base_f32, &WriteOptions::default()).unwrap();
        assert_eq!(out, want);
    }

    #[test]
    fn mismatched_tensor_sets_are_rejected() {
        let (base, mut other) = synthetic_pair(2);
        other.tensors.remove("model.norm.weight");
        let recipe = MergeRecipe::standard_gradient(Dtype::F32);
        assert!(matches!(
            merge_checkpoints(&recipe, &base, &other),
            Err(MergeError::TensorSetMismatch(_))
        ));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let (base, mut other) = synthetic_pair(2);
        let rec = other.tensors.get_mut("model.norm.weight").unwrap();
        rec.shape = vec![6];
        let recipe = MergeRecipe::standard_gradient(Dtype::F32);
        assert!(matches!(
            merge_checkpoints(&recipe, &base, &other),
            Err(MergeError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn merging_twice_is_byte_identical() {
        let (base, other) = synthetic_pair(4);
        let recipe = MergeRecipe::standard_gradient(Dtype::F16);
        let (m1, _) = merge_checkpoints(&recipe, &base, &other).unwrap();
        let (m2, _) = merge_checkpoints(&recipe, &base, &other).unwrap();
        let b1 = checkpoint_to_bytes(&m1, &WriteOptions::default()).unwrap();
        let b2 = checkpoint_to_bytes(&m2, &WriteOptions::default()).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn layer_beyond_recipe_range_is_an_error() {
        let (base, other) = synthetic_pair(4);
        let mut recipe = MergeRecipe::standard_gradient(Dtype::F32);
        recipe.layer_range = Some([0, 2]);
        assert!(matches!(
            merge_checkpoints(&recipe, &base, &other),
            Err(MergeError::LayerOutOfRange { .. })
        ));
    }
}
