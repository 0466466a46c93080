//! Small helpers for dense bit-packed matrices over GF(2).

/// Number of `u64` words needed to hold `bits` bits.
#[inline]
pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
pub fn get_bit(row: &[u64], idx: usize) -> bool {
    (row[idx / 64] >> (idx % 64)) & 1 == 1
}

#[inline]
pub fn set_bit(row: &mut [u64], idx: usize, value: bool) {
    let mask = 1u64 << (idx % 64);
    if value {
        row[idx / 64] |= mask;
    } else {
        row[idx / 64] &= !mask;
    }
}

/// Rank over GF(2) of a row-major matrix with `width` words per row.
///
/// The input is consumed and destroyed by forward elimination.
pub fn rank(mut rows: Vec<u64>, width: usize) -> usize {
    if width == 0 {
        return 0;
    }
    let n_rows = rows.len() / width;
    let mut rank = 0;
    for col in 0..width * 64 {
        if rank == n_rows {
            break;
        }
        let (w, b) = (col / 64, col % 64);
        let Some(pivot) = (rank..n_rows).find(|&r| (rows[r * width + w] >> b) & 1 == 1) else {
            continue;
        };
        if pivot != rank {
            for k in 0..width {
                rows.swap(pivot * width + k, rank * width + k);
            }
        }
        for r in rank + 1..n_rows {
            if (rows[r * width + w] >> b) & 1 == 1 {
                for k in w..width {
                    let v = rows[rank * width + k];
                    rows[r * width + k] ^= v;
                }
            }
        }
        rank += 1;
    }
    rank
}
