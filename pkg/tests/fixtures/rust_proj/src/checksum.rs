use crate::util::{clamp_len, mix, SEED};

pub fn prefix_sum(data: &[u8], n: usize) -> u32 {
    let n = clamp_len(n, data.len());
    data[..n].iter().map(|b| *b as u32).sum()
}

// KBTRANS-INSERT checksum

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::mix_all;

    #[test]
    fn empty_input_is_seed() {
        assert_eq!(checksum(&[]), SEED);
    }

    #[test]
    fn two_bytes() {
        assert_eq!(checksum(b"ab"), mix(mix(SEED, b'a'), b'b'));
    }

    #[test]
    fn full_window() {
        assert_eq!(checksum(&[1u8; 64]), mix_all(&[1u8; 64]));
    }

    #[test]
    fn window_is_capped() {
        assert_eq!(checksum(&[1u8; 100]), mix_all(&[1u8; 64]));
    }
}
