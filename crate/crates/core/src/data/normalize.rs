//! Affine map between 8-bit gray levels `[0, 255]` and the model's `[-1, 1]`.

/// `x / 127.5 - 1`, evaluated as `(x - 127.5) / 127.5` so that every integer
/// gray level survives a round trip through [`denormalize`] exactly.
pub fn normalize(gray: f64) -> f64 {
    (gray - 127.5) / 127.5
}

pub fn normalize_u8(gray: u8) -> f32 {
    normalize(gray as f64) as f32
}

/// Inverse of [`normalize`], clipped to `[0, 255]`.
pub fn denormalize(value: f64) -> f64 {
    (value * 127.5 + 127.5).clamp(0.0, 255.0)
}
