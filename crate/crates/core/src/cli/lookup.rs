//! `lookup-build`: precompute and persist a lookup table.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::disentangler::{build_table, LookupTable, SelectionMode};
use crate::error::Result;

pub fn cmd_lookup_build(samples: usize, n_qubits: usize, seed: u64, mode: SelectionMode, out: &Path) -> Result<LookupTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = build_table(samples, n_qubits, mode, &mut rng)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    table.save(out)?;
    Ok(table)
}
