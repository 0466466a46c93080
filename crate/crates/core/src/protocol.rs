//! Line-delimited JSON protocol spoken with external policy processes.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::strategy::StrategyError;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(1000);

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Hello {
    pub hello: HelloBody,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct HelloBody {
    pub n: usize,
    pub protocol: u32,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Ready {
    pub ready: bool,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct Request {
    pub turn: u64,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub obs: Vec<Vec<i8>>,
}

/// Either an explicit bond or a distribution over bonds.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(untagged, deny_unknown_fields)]
pub enum Response {
    Action { action: i64 },
    Dist { dist: Vec<f64> },
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages always serialize")
}

pub fn decode<'a, T: Deserialize<'a>>(line: &'a str) -> Result<T, StrategyError> {
    serde_json::from_str(line).map_err(|e| StrategyError::Protocol(format!("malformed message {line:?}: {e}")))
}

/// A bidirectional line channel to a policy.
pub trait Transport: Send {
    fn send_line(&mut self, line: &str) -> Result<(), StrategyError>;
    fn recv_line(&mut self, timeout: Duration) -> Result<String, StrategyError>;
}

/// Talks to a child process over its stdin and stdout.
pub struct ChildTransport {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout_ms: u64,
}

impl ChildTransport {
    /// Spawns `cmd` through `sh -c`.
    pub fn spawn(cmd: &str) -> Result<Self, StrategyError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| StrategyError::Transport(format!("cannot spawn {cmd:?}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(ChildTransport { child, stdin, lines: rx, timeout_ms: 0 })
    }
}

impl Transport for ChildTransport {
    fn send_line(&mut self, line: &str) -> Result<(), StrategyError> {
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| StrategyError::Transport(format!("write to policy failed: {e}")))
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String, StrategyError> {
        self.timeout_ms = timeout.as_millis() as u64;
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(StrategyError::Transport(format!("read from policy failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(StrategyError::Timeout { ms: self.timeout_ms }),
            Err(RecvTimeoutError::Disconnected) => {
                Err(StrategyError::Transport("policy process closed its output".into()))
            }
        }
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

type Responder = Box<dyn FnMut(&str) -> Option<String> + Send>;

/// In-process transport answering each sent line through a closure.
/// `None` from the closure simulates a timeout.
pub struct ScriptedTransport {
    responder: Responder,
    pending: Option<Option<String>>,
    sent: Vec<String>,
}

impl ScriptedTransport {
    pub fn new(responder: impl FnMut(&str) -> Option<String> + Send + 'static) -> Self {
        ScriptedTransport { responder: Box::new(responder), pending: None, sent: Vec::new() }
    }

    /// Every line sent so far.
    pub fn sent(&self) -> &[String] {
        &self.sent
    }
}

impl Transport for ScriptedTransport {
    fn send_line(&mut self, line: &str) -> Result<(), StrategyError> {
        self.sent.push(line.to_owned());
        self.pending = Some((self.responder)(line));
        Ok(())
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String, StrategyError> {
        match self.pending.take() {
            Some(Some(line)) => Ok(line),
            Some(None) => Err(StrategyError::Timeout { ms: timeout.as_millis() as u64 }),
            None => Err(StrategyError::Protocol("receive without a preceding request".into())),
        }
    }
}
