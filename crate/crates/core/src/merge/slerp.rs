//! Spherical linear interpolation over flat parameter vectors.

use super::MergeError;

/// Angular-resolution cutoff below which interpolation degrades to linear.
/// When the unit-normalized inputs are closer than this in absolute cosine,
/// the sin-ratio form loses precision and linear interpolation is
/// numerically indistinguishable.
pub const DEFAULT_DOT_THRESHOLD: f64 = 0.9995;

/// Result of a single interpolation, flagging which path was taken.
#[derive(Debug, Clone)]
pub struct SlerpOutput {
    pub values: Vec<f32>,
    /// True when the inputs were near-collinear (or zero-norm) and the
    /// interpolation fell back to the linear form.
    pub linear_fallback: bool,
}

/// Interpolates between `a` (at `t = 0`) and `b` (at `t = 1`) along the
/// great-circle arc between their directions.
///
/// The angle comes from unit-normalized copies; the sin-ratio coefficients
/// are applied to the original, unnormalized vectors. If the normalized
/// dot product exceeds `dot_threshold` in magnitude, or either vector has
/// zero norm, the result is the linear blend `(1-t)*a + t*b`.
pub fn slerp(
    t: f64,
    a: &[f32],
    b: &[f32],
    dot_threshold: f64,
) -> Result<SlerpOutput, MergeError> {
    if a.len() != b.len() {
        return Err(MergeError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MergeError::EmptyVector);
    }

    let norm_a = l2_norm(a);
    let norm_b = l2_norm(b);
    let mut dot = 0.0f64;
    if norm_a > 0.0 && norm_b > 0.0 {
        for (&x, &y) in a.iter().zip(b) {
            dot += (x as f64 / norm_a) * (y as f64 / norm_b);
        }
        dot = dot.clamp(-1.0, 1.0);
    }

    if norm_a == 0.0 || norm_b == 0.0 || dot.abs() > dot_threshold {
        let values = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| ((1.0 - t) * x as f64 + t * y as f64) as f32)
            .collect();
        return Ok(SlerpOutput {
            values,
            linear_fallback: true,
        });
    }

    let omega = dot.acos();
    let sin_omega = omega.sin();
    let coeff_a = ((1.0 - t) * omega).sin() / sin_omega;
    let coeff_b = (t * omega).sin() / sin_omega;
    let values = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (coeff_a * x as f64 + coeff_b * y as f64) as f32)
        .collect();
    Ok(SlerpOutput {
        values,
        linear_fallback: false,
    })
}

fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: &[f32], want: &[f32], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            let scale = w.abs().max(1.0) as f64;
            assert!(
                ((*g - *w) as f64).abs() <= tol * scale,
                "got {got:?}, want {want:?}"
            );
        }
    }

    #[test]
    fn endpoint_identity() {
        let a = [0.3f32, -1.2, 4.0];
        let b = [2.0f32, 0.7, -0.5];
        let out = slerp(0.0, &a, &b, DEFAULT_DOT_THRESHOLD).unwrap();
        assert_close(&out.values, &a, 1e-6);
        let out = slerp(1.0, &a, &b, DEFAULT_DOT_THRESHOLD).unwrap();
        assert_close(&out.values, &b, 1e-6);
    }

    #[test]
    fn quarter_circle_midpoint() {
        let out = slerp(0.5, &[1.0, 0.0], &[0.0, 1.0], DEFAULT_DOT_THRESHOLD).unwrap();
        assert!(!out.linear_fallback);
        let half_sqrt2 = (2.0f32).sqrt() / 2.0;
        assert_close(&out.values, &[half_sqrt2, half_sqrt2], 1e-6);
    }

    #[test]
    fn collinear_vectors_fall_back_to_linear() {
        let out = slerp(0.25, &[1.0, 0.0], &[2.0, 0.0], DEFAULT_DOT_THRESHOLD).unwrap();
        assert!(out.linear_fallback);
        assert_close(&out.values, &[1.25, 0.0], 1e-7);
    }

    #[test]
    fn zero_norm_falls_back_to_linear() {
        let out = slerp(0.5, &[0.0, 0.0], &[2.0, 4.0], DEFAULT_DOT_THRESHOLD).unwrap();
        assert!(out.linear_fallback);
        assert_close(&out.values, &[1.0, 2.0], 1e-7);
    }

    #[test]
    fn antipodal_vectors_fall_back_to_linear() {
        let out = slerp(0.5, &[1.0, 0.0], &[-1.0, 0.0], DEFAULT_DOT_THRESHOLD).unwrap();
        assert!(out.linear_fallback);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            slerp(0.5, &[1.0], &[1.0, 2.0], DEFAULT_DOT_THRESHOLD),
            Err(MergeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn symmetry_under_reversal() {
        let a = [0.9f32, -0.1, 0.4, 2.2];
        let b = [-0.3f32, 1.5, 0.8, -1.0];
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let fwd = slerp(t, &a, &b, DEFAULT_DOT_THRESHOLD).unwrap();
            let rev = slerp(1.0 - t, &b, &a, DEFAULT_DOT_THRESHOLD).unwrap();
            assert_close(&fwd.values, &rev.values, 1e-6);
        }
    }

    #[test]
    fn preserves_unit_norm() {
        let a = [0.6f32, 0.8, 0.0];
        let b = [0.0f32, 0.6, 0.8];
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let out = slerp(t, &a, &b, DEFAULT_DOT_THRESHOLD).unwrap();
            let norm = out.values.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-5, "norm {norm} at t={t}");
        }
    }
}
