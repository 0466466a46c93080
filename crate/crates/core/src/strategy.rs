//! Control strategies: where to place the disentangling gate each turn.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, Observation};
use crate::error::Error;
use crate::protocol::{self, Hello, HelloBody, Ready, Request, Response, Transport, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("policy protocol violation: {0}")]
    Protocol(String),

    #[error("policy did not answer within {ms} ms")]
    Timeout { ms: u64 },

    #[error("policy chose bond {action}, valid bonds are 0..{n_bonds}")]
    ActionOutOfRange { action: i64, n_bonds: usize },

    #[error("policy transport failed: {0}")]
    Transport(String),
}

/// Probabilities over the bonds `0..=N-2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDistribution(Vec<f64>);

impl PolicyDistribution {
    /// Accepts `probs` if it is nonnegative and sums to one within `tol`;
    /// the stored copy is renormalized.
    pub fn new(probs: Vec<f64>, tol: f64) -> Result<Self, StrategyError> {
        if probs.is_empty() {
            return Err(StrategyError::Protocol("empty distribution".into()));
        }
        if probs.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(StrategyError::Protocol("distribution has negative or non-finite entries".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(StrategyError::Protocol(format!("distribution sums to {sum}")));
        }
        Ok(PolicyDistribution(probs.into_iter().map(|x| x / sum).collect()))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn n_bonds(&self) -> usize {
        self.0.len()
    }

    /// Inverse-CDF sample; never returns a zero-probability bond.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

/// Uniform distribution over all `N - 1` bonds.
pub fn random_policy(n_qubits: usize) -> Result<PolicyDistribution, Error> {
    if n_qubits < 2 {
        return Err(Error::InvalidSize { n: n_qubits, min: 2 });
    }
    let k = n_qubits - 1;
    Ok(PolicyDistribution(vec![1.0 / k as f64; k]))
}

/// Leftmost bond with the largest achievable reduction.
pub fn greedy_action(env: &mut Env) -> Result<usize, Error> {
    let deltas = env.deltas()?;
    let max = *deltas.iter().max().expect("at least one bond");
    Ok(deltas.iter().position(|&d| d == max).expect("maximum is attained"))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PyramidConfig {
    bottlenecks: Vec<usize>,
    window: Vec<usize>,
}

impl PyramidConfig {
    /// Places `n_bottlenecks` equidistant bottlenecks at
    /// `b_k = round((k + 1)(N - 1) / (n_B + 1))`.
    pub fn new(n_qubits: usize, n_bottlenecks: usize) -> Result<Self, Error> {
        if n_bottlenecks == 0 {
            return Err(Error::Config("pyramid needs at least one bottleneck".into()));
        }
        if n_qubits < 2 {
            return Err(Error::InvalidSize { n: n_qubits, min: 2 });
        }
        let last = n_qubits - 2;
        let bottlenecks: Vec<usize> = (0..n_bottlenecks)
            .map(|k| (((k + 1) * (n_qubits - 1)) as f64 / (n_bottlenecks + 1) as f64).round() as usize)
            .collect();
        if bottlenecks.windows(2).any(|w| w[0] >= w[1]) || bottlenecks.iter().any(|&b| b > last) {
            return Err(Error::Config(format!(
                "{n_bottlenecks} bottlenecks do not fit on a chain of {n_qubits} qubits"
            )));
        }
        let mut window: Vec<usize> = bottlenecks
            .iter()
            .flat_map(|&b| [b.wrapping_sub(1), b, b + 1])
            .filter(|&x| x <= last)
            .collect();
        window.sort_unstable();
        window.dedup();
        Ok(PyramidConfig { bottlenecks, window })
    }

    pub fn bottlenecks(&self) -> &[usize] {
        &self.bottlenecks
    }

    /// Sorted union of the three-bond windows around each bottleneck.
    pub fn window(&self) -> &[usize] {
        &self.window
    }
}

/// Largest positive reduction inside the bottleneck windows, leftmost on
/// ties; the first bottleneck when nothing there is reducible.
pub fn pyramid_action(env: &mut Env, cfg: &PyramidConfig) -> Result<usize, Error> {
    let mut best = (0u8, cfg.bottlenecks[0]);
    for &a in &cfg.window {
        let d = env.best_gate(a)?.delta_n;
        if d > best.0 {
            best = (d, a);
        }
    }
    assert!(cfg.window.contains(&best.1), "pyramid acted outside its windows");
    Ok(best.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Random,
    Greedy,
    Pyramid,
    External,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Greedy => "greedy",
            StrategyKind::Pyramid => "pyramid",
            StrategyKind::External => "external",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "random" => Ok(StrategyKind::Random),
            "greedy" => Ok(StrategyKind::Greedy),
            "pyramid" => Ok(StrategyKind::Pyramid),
            "external" => Ok(StrategyKind::External),
            _ => Err(Error::Config(format!("unknown strategy {s:?}"))),
        }
    }
}

/// Anything that picks a bond each turn.
pub trait Policy: Send {
    fn act(&mut self, env: &mut Env, obs: &Observation, rng: &mut dyn RngCore) -> Result<usize, StrategyError>;
}

#[derive(Clone, Debug)]
pub struct RandomPolicy {
    dist: PolicyDistribution,
}

impl RandomPolicy {
    pub fn new(n_qubits: usize) -> Result<Self, Error> {
        Ok(RandomPolicy { dist: random_policy(n_qubits)? })
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _env: &mut Env, _obs: &Observation, rng: &mut dyn RngCore) -> Result<usize, StrategyError> {
        Ok(self.dist.sample(rng))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyPolicy;

impl Policy for GreedyPolicy {
    fn act(&mut self, env: &mut Env, _obs: &Observation, _rng: &mut dyn RngCore) -> Result<usize, StrategyError> {
        Ok(greedy_action(env)?)
    }
}

#[derive(Clone, Debug)]
pub struct PyramidPolicy {
    pub cfg: PyramidConfig,
}

impl Policy for PyramidPolicy {
    fn act(&mut self, env: &mut Env, _obs: &Observation, _rng: &mut dyn RngCore) -> Result<usize, StrategyError> {
        Ok(pyramid_action(env, &self.cfg)?)
    }
}

/// A policy living behind a [`Transport`].
pub struct ExternalPolicy<T: Transport> {
    transport: T,
    timeout: Duration,
}

impl<T: Transport> ExternalPolicy<T> {
    /// Performs the handshake for a chain of `n_qubits`.
    pub fn connect(mut transport: T, n_qubits: usize, timeout: Duration) -> Result<Self, StrategyError> {
        let hello = Hello { hello: HelloBody { n: n_qubits, protocol: PROTOCOL_VERSION } };
        transport.send_line(&protocol::encode(&hello))?;
        let line = transport.recv_line(timeout)?;
        let ready: Ready = protocol::decode(&line)?;
        if !ready.ready {
            return Err(StrategyError::Protocol("policy declined the session".into()));
        }
        Ok(ExternalPolicy { transport, timeout })
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Sends one observation and returns the chosen bond.
    pub fn query(
        &mut self,
        turn: u64,
        p: f64,
        q: f64,
        obs: &Observation,
        rng: &mut dyn RngCore,
    ) -> Result<usize, StrategyError> {
        let n = obs.n_qubits();
        let req = Request { turn, n, p, q, obs: obs.to_matrix() };
        self.transport.send_line(&protocol::encode(&req))?;
        let line = self.transport.recv_line(self.timeout)?;
        let n_bonds = n - 1;
        match protocol::decode::<Response>(&line)? {
            Response::Action { action } => {
                if action < 0 || action as usize >= n_bonds {
                    return Err(StrategyError::ActionOutOfRange { action, n_bonds });
                }
                Ok(action as usize)
            }
            Response::Dist { dist } => {
                if dist.len() != n_bonds {
                    return Err(StrategyError::Protocol(format!(
                        "distribution has {} entries, expected {n_bonds}",
                        dist.len()
                    )));
                }
                Ok(PolicyDistribution::new(dist, 1e-6)?.sample(rng))
            }
        }
    }
}

impl<T: Transport> Policy for ExternalPolicy<T> {
    fn act(&mut self, env: &mut Env, obs: &Observation, rng: &mut dyn RngCore) -> Result<usize, StrategyError> {
        let cfg = env.config();
        let (p, q) = (cfg.p, cfg.q);
        self.query(env.turn(), p, q, obs, rng)
    }
}
