use bitvec::prelude::*;

/// Bit buffer: bit `k` of the stream is bit `k % 8` of byte `k / 8`.
pub type Bits = BitVec<u8, Lsb0>;

/// Appends the low `width` bits of `value`, most significant first.
pub fn put(bits: &mut Bits, value: u64, width: u32) {
    debug_assert!(width == 64 || value >> width == 0);
    for b in (0..width).rev() {
        bits.push((value >> b) & 1 == 1);
    }
}

/// Reads `width` bits written by [`put`] starting at `*pos`.
pub fn take(bits: &BitSlice<u8, Lsb0>, pos: &mut usize, width: u32) -> u64 {
    let mut v = 0u64;
    for _ in 0..width {
        v = (v << 1) | u64::from(bits[*pos]);
        *pos += 1;
    }
    v
}

/// `⌈log₂ count⌉`: bits needed to tell `count` values apart.
pub fn width_for(count: u64) -> u32 {
    if count <= 1 {
        0
    } else {
        64 - (count - 1).leading_zeros()
    }
}
