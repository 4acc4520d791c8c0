//! LEB128 integer decoding.

use super::DecodeError;

/// Decodes an unsigned 32-bit LEB128 value at `offset`, returning the value
/// and the offset just past it.
pub fn decode_uleb(bytes: &[u8], offset: usize) -> Result<(u32, usize), DecodeError> {
    let mut result: u32 = 0;
    let mut pos = offset;
    for i in 0..5 {
        let byte = *bytes
            .get(pos)
            .ok_or_else(|| DecodeError::truncated(bytes, pos))?;
        pos += 1;
        if i == 4 && byte & 0xF0 != 0 {
            return Err(DecodeError::MalformedLeb { offset });
        }
        result |= u32::from(byte & 0x7F) << (7 * i);
        if byte & 0x80 == 0 {
            return Ok((result, pos));
        }
    }
    Err(DecodeError::MalformedLeb { offset })
}

/// Signed 32-bit LEB128.
pub fn decode_sleb(bytes: &[u8], offset: usize) -> Result<(i32, usize), DecodeError> {
    let (value, end) = decode_signed(bytes, offset, 32)?;
    Ok((value as i32, end))
}

/// Signed 64-bit LEB128.
pub fn decode_sleb64(bytes: &[u8], offset: usize) -> Result<(i64, usize), DecodeError> {
    decode_signed(bytes, offset, 64)
}

fn decode_signed(bytes: &[u8], offset: usize, width: u32) -> Result<(i64, usize), DecodeError> {
    let max_len = width.div_ceil(7);
    let mut result: i64 = 0;
    let mut shift = 0u32;
    let mut pos = offset;
    for i in 0..max_len {
        let byte = *bytes
            .get(pos)
            .ok_or_else(|| DecodeError::truncated(bytes, pos))?;
        pos += 1;
        if i == max_len - 1 {
            // Unused high bits of the final byte must replicate the sign bit.
            let used = width - shift;
            let sign = (byte >> (used - 1)) & 1;
            let high = (byte & 0x7F) >> used;
            let expected = if sign == 1 { 0x7F >> used } else { 0 };
            if byte & 0x80 != 0 || high != expected {
                return Err(DecodeError::MalformedLeb { offset });
            }
        }
        result |= i64::from(byte & 0x7F) << shift;
        shift += 7;
        if byte & 0x80 == 0 {
            if shift < 64 && byte & 0x40 != 0 {
                result |= -1i64 << shift;
            }
            return Ok((result, pos));
        }
    }
    Err(DecodeError::MalformedLeb { offset })
}
