//! Bit-level conversions between f32 and the 16-bit storage formats.
//!
//! Encoding rounds to nearest, ties to even. Decoding is an exact widening,
//! so `decode(encode(x)) == x` for every value exactly representable in the
//! target format, and NaN payload bits survive a round trip.

use super::Dtype;

/// Largest finite binary16 value (bit pattern 0x7BFF).
pub const F16_MAX: f32 = 65504.0;

/// Largest finite bfloat16 value (bit pattern 0x7F7F).
pub const BF16_MAX: f32 = 3.3895314e38;

/// A 16-bit floating-point storage format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfFormat {
    /// IEEE 754 binary16: 1 sign, 5 exponent, 10 mantissa bits.
    F16,
    /// bfloat16: 1 sign, 8 exponent, 7 mantissa bits (truncated f32).
    Bf16,
}

impl HalfFormat {
    pub fn dtype(self) -> Dtype {
        match self {
            HalfFormat::F16 => Dtype::F16,
            HalfFormat::Bf16 => Dtype::BF16,
        }
    }
}

/// Converts `x` to a 16-bit pattern, rounding to nearest even.
///
/// Finite inputs whose magnitude exceeds the format's range become infinity,
/// as IEEE rounding prescribes. Use [`encode_half_saturating`] to clamp to
/// the maximum finite value instead.
pub fn encode_half(x: f32, format: HalfFormat) -> u16 {
    match format {
        HalfFormat::F16 => f32_to_f16_bits(x),
        HalfFormat::Bf16 => f32_to_bf16_bits(x),
    }
}

/// Like [`encode_half`], but finite inputs that would overflow encode as the
/// format's maximum finite magnitude. Infinite and NaN inputs pass through.
pub fn encode_half_saturating(x: f32, format: HalfFormat) -> u16 {
    let bits = encode_half(x, format);
    if x.is_finite() && is_half_infinite(bits, format) {
        let max = match format {
            HalfFormat::F16 => 0x7BFF,
            HalfFormat::Bf16 => 0x7F7F,
        };
        (bits & 0x8000) | max
    } else {
        bits
    }
}

/// Widens a 16-bit pattern back to f32. Exact for every input.
pub fn decode_half(bits: u16, format: HalfFormat) -> f32 {
    match format {
        HalfFormat::F16 => f16_bits_to_f32(bits),
        HalfFormat::Bf16 => f32::from_bits((bits as u32) << 16),
    }
}

fn is_half_infinite(bits: u16, format: HalfFormat) -> bool {
    match format {
        HalfFormat::F16 => bits & 0x7FFF == 0x7C00,
        HalfFormat::Bf16 => bits & 0x7FFF == 0x7F80,
    }
}

fn f32_to_f16_bits(x: f32) -> u16 {
    let bits = x.to_bits();
    let sign = ((bits >> 16) & 0x8000) as u16;
    let exp = ((bits >> 23) & 0xFF) as i32;
    let man = bits & 0x007F_FFFF;

    if exp == 0xFF {
        if man == 0 {
            return sign | 0x7C00; // infinity
        }
        // NaN: keep the top payload bits, force quiet if they vanish
        let payload = ((man >> 13) as u16) & 0x03FF;
        return sign | 0x7C00 | if payload == 0 { 0x0200 } else { payload };
    }

    let unbiased = exp - 127;
    if unbiased >= 16 {
        return sign | 0x7C00; // overflow
    }
    if unbiased >= -14 {
        // normal range: drop 13 mantissa bits with round-to-nearest-even;
        // a carry out of the mantissa bumps the exponent, which is exactly
        // the right behavior up to and including the step to infinity
        let magnitude = (((unbiased + 15) as u32) << 10) | (man >> 13);
        let round = man & 0x1FFF;
        let carry = (round > 0x1000 || (round == 0x1000 && magnitude & 1 == 1)) as u32;
        return sign | (magnitude + carry) as u16;
    }
    if unbiased >= -25 {
        // subnormal range: shift the full 24-bit significand into place
        let full = 0x0080_0000 | man;
        let shift = (13 - 14 - unbiased) as u32;
        let magnitude = full >> shift;
        let rem = full & ((1 << shift) - 1);
        let half = 1 << (shift - 1);
        let carry = (rem > half || (rem == half && magnitude & 1 == 1)) as u32;
        return sign | (magnitude + carry) as u16;
    }
    sign // underflow to signed zero
}

fn f32_to_bf16_bits(x: f32) -> u16 {
    let bits = x.to_bits();
    if x.is_nan() {
        // keep the high payload bits; force a mantissa bit so the result
        // stays NaN when the payload lives entirely in the low half
        let hi = (bits >> 16) as u16;
        return if hi & 0x007F == 0 { hi | 0x0040 } else { hi };
    }
    let lsb = (bits >> 16) & 1;
    ((bits + 0x7FFF + lsb) >> 16) as u16
}

fn f16_bits_to_f32(bits: u16) -> f32 {
    let sign = ((bits & 0x8000) as u32) << 16;
    let exp = (bits >> 10) & 0x1F;
    let man = (bits & 0x03FF) as u32;
    match exp {
        0 => {
            // signed zero or subnormal: man * 2^-24, exact in f32
            let magnitude = man as f32 * f32::from_bits(0x3380_0000); // 2^-24
            f32::from_bits(sign | magnitude.to_bits())
        }
        0x1F => f32::from_bits(sign | 0x7F80_0000 | (man << 13)),
        _ => f32::from_bits(sign | ((exp as u32 + 112) << 23) | (man << 13)),
    }
}
