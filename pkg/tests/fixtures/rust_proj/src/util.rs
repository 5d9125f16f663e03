pub const SEED: u32 = 17;

pub fn mix(acc: u32, byte: u8) -> u32 {
    acc.wrapping_mul(31).wrapping_add(byte as u32)
}

pub fn clamp_len(len: usize, max: usize) -> usize {
    if len > max {
        max
    } else {
        len
    }
}

pub fn mix_all(data: &[u8]) -> u32 {
    let mut acc = SEED;
    for b in data {
        acc = mix(acc, *b);
    }
    acc
}
