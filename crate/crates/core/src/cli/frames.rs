//! `frames`: per-turn profile records for animations, as JSON lines.

use std::fmt::Write as _;
use std::path::Path;

use super::config::SweepConfig;
use super::run::write_atomic;
use crate::analysis::{record_frames, Frame};
use crate::error::{Error, Result};

pub const FRAMES_FILE: &str = "frames.jsonl";

/// Plays the first cell of `cfg` for `turns` turns and writes every
/// `stride`-th frame to `out/frames.jsonl`.
pub fn cmd_frames(cfg: &SweepConfig, turns: u64, stride: u64, out: &Path) -> Result<Vec<Frame>> {
    cfg.validate()?;
    let cell = cfg.cells()[0];
    let frames = record_frames(&cfg.env_config(cell), &cfg.strategy_spec(), turns, stride)
        .map_err(|e| Error::InvalidState(format!("frame recording failed: {e}")))?;
    let mut body = String::new();
    for f in &frames {
        writeln!(body, "{}", serde_json::to_string(f).expect("frames serialize")).expect("writing to a string");
    }
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join(FRAMES_FILE), body.as_bytes())?;
    Ok(frames)
}
