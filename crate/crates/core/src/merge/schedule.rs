//! Layer-wise interpolation schedules.
//!
//! A schedule is a list of anchor t-values placed at equally spaced depths
//! through the model: anchor `j` of `m` sits at depth `j / (m - 1)`. A
//! layer's coefficient is read off the piecewise-linear curve through those
//! points at its own normalized depth.

use super::{MergeError, MergeRecipe};

/// Extracts the layer index from a tensor name containing a dot-delimited
/// `layers.<i>.` segment; returns `None` for tensors outside the layer
/// stack (embeddings, output head, final norm).
pub fn resolve_layer_index(tensor_name: &str) -> Option<usize> {
    let parts: Vec<&str> = tensor_name.split('.').collect();
    parts.windows(3).find_map(|w| {
        if w[0] == "layers" && !w[1].is_empty() && w[1].bytes().all(|b| b.is_ascii_digit()) {
            w[1].parse().ok()
        } else {
            None
        }
    })
}

/// Evaluates a schedule at `layer` of `num_layers`.
///
/// The layer's depth is `layer / (num_layers - 1)`, or 0 when the model has
/// a single layer. A single-anchor schedule is constant.
pub fn schedule_value(anchors: &[f64], layer: usize, num_layers: usize) -> Result<f64, MergeError> {
    if anchors.is_empty() {
        return Err(MergeError::EmptyAnchors);
    }
    if num_layers == 0 || layer >= num_layers {
        return Err(MergeError::LayerOutOfRange { layer, num_layers });
    }
    let depth = if num_layers == 1 {
        0.0
    } else {
        layer as f64 / (num_layers - 1) as f64
    };
    Ok(interpolate_anchors(anchors, depth))
}

/// Piecewise-linear interpolation through anchors at equal depths.
pub(crate) fn interpolate_anchors(anchors: &[f64], depth: f64) -> f64 {
    let m = anchors.len();
    if m == 1 {
        return anchors[0];
    }
    let scaled = depth.clamp(0.0, 1.0) * (m - 1) as f64;
    let idx = (scaled.floor() as usize).min(m - 2);
    let frac = scaled - idx as f64;
    anchors[idx] * (1.0 - frac) + anchors[idx + 1] * frac
}

/// Returns the name of the first filter in recipe order whose fragment is a
/// substring of the tensor name, or `"default"` when none matches.
pub fn match_filter<'r>(tensor_name: &str, recipe: &'r MergeRecipe) -> &'r str {
    recipe
        .filters
        .iter()
        .find(|f| tensor_name.contains(&f.name_fragment))
        .map(|f| f.name_fragment.as_str())
        .unwrap_or("default")
}
