//! Scriptable stand-in for an external policy process.
//!
//! Speaks the line protocol on stdin/stdout and can be told to misbehave.

use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use clap::Parser;
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "stabgame-policy-double")]
struct Args {
    /// Always answer with this bond.
    #[arg(long)]
    action: Option<i64>,

    /// Answer with a distribution concentrated on this bond.
    #[arg(long)]
    dist_bond: Option<usize>,

    /// Answer with garbage from this turn on.
    #[arg(long)]
    malformed_after: Option<u64>,

    /// Stop answering from this turn on.
    #[arg(long)]
    silent_after: Option<u64>,

    /// Sleep before each answer.
    #[arg(long, default_value_t = 0)]
    sleep_ms: u64,

    /// Append every received and sent line to this file.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn main() -> io::Result<()> {
    let args = Args::parse();
    let mut log = match &args.log {
        Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        if let Some(f) = log.as_mut() {
            writeln!(f, "> {line}")?;
        }
        let msg: Value = serde_json::from_str(&line).unwrap_or(Value::Null);
        let reply = if msg.get("hello").is_some() {
            r#"{"ready":true}"#.to_string()
        } else {
            let turn = msg.get("turn").and_then(Value::as_u64).unwrap_or(0);
            let n = msg.get("n").and_then(Value::as_u64).unwrap_or(2) as usize;
            if args.silent_after.is_some_and(|t| turn >= t) {
                continue;
            }
            if args.malformed_after.is_some_and(|t| turn >= t) {
                "{this is not json".to_string()
            } else if let Some(b) = args.dist_bond {
                let mut dist = vec![0.0; n.saturating_sub(1)];
                if let Some(slot) = dist.get_mut(b) {
                    *slot = 1.0;
                }
                serde_json::json!({ "dist": dist }).to_string()
            } else {
                serde_json::json!({ "action": args.action.unwrap_or(0) }).to_string()
            }
        };
        if args.sleep_ms > 0 {
            thread::sleep(Duration::from_millis(args.sleep_ms));
        }
        if let Some(f) = log.as_mut() {
            writeln!(f, "< {reply}")?;
        }
        writeln!(stdout, "{reply}")?;
        stdout.flush()?;
    }
    Ok(())
}
