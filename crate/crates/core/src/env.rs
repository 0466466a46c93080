//! The unitary circuit game.
//!
//! Each turn the controller places an optimal disentangling gate on a chosen
//! bond, then the environment applies a geometrically distributed burst of
//! random gates: while a uniform draw exceeds the bias `p`, a uniformly
//! random Clifford gate hits a uniformly random bond.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clipped::{profile_into, ClipMap, Clipper, EntanglementProfile};
use crate::disentangler::{Disentangler, LookupEntry};
use crate::error::{Error, Result};
use crate::tableau::{GateSet, Tableau};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    Product,
    /// `depth` uniformly random gates on uniformly random bonds.
    Random { depth: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub n_qubits: usize,
    /// Probability that a turn ends without further random gates.
    pub p: f64,
    /// Fraction of generators revealed in each observation.
    pub q: f64,
    pub episode_length: u64,
    pub init: InitMode,
    pub seed: u64,
}

impl EnvConfig {
    pub fn new(n_qubits: usize, p: f64) -> Self {
        EnvConfig { n_qubits, p, q: 1.0, episode_length: u64::MAX, init: InitMode::Product, seed: 0 }
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init(mut self, init: InitMode) -> Self {
        self.init = init;
        self
    }

    pub fn with_episode_length(mut self, len: u64) -> Self {
        self.episode_length = len;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 {
            return Err(Error::InvalidSize { n: self.n_qubits, min: 2 });
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config(format!("p = {} must lie in (0, 1] (p = 0 never ends a burst)", self.p)));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::Config(format!("q = {} must lie in [0, 1]", self.q)));
        }
        if self.episode_length == 0 {
            return Err(Error::Config("episode_length must be positive".into()));
        }
        Ok(())
    }
}

/// Maximum of the total entanglement over all states of `n_bonds + 1` qubits.
pub fn normalization(n_bonds: usize) -> u64 {
    let h = (n_bonds / 2) as u64;
    if n_bonds % 2 == 1 {
        (h + 1) * (h + 1)
    } else {
        h * (h + 1)
    }
}

/// Largest possible `n(a)` on a chain of `n_qubits`.
pub fn max_entanglement(n_qubits: usize, a: usize) -> u32 {
    (a + 1).min(n_qubits - 1 - a) as u32
}

/// A partially revealed tableau.
///
/// Entries are `+1` for a set bit, `-1` for a clear bit and `0` for every
/// entry of a withheld generator. Columns are site-major like the tableau.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    n: usize,
    width: usize,
    words: Vec<u64>,
    kept: Vec<bool>,
}

impl Observation {
    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn is_kept(&self, row: usize) -> bool {
        self.kept[row]
    }

    pub fn kept_rows(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        if !self.kept[row] {
            return 0;
        }
        if (self.words[row * self.width + col / 64] >> (col % 64)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn row(&self, row: usize) -> Vec<i8> {
        (0..2 * self.n).map(|c| self.get(row, c)).collect()
    }

    /// Row-major `N x 2N` ternary matrix.
    pub fn to_matrix(&self) -> Vec<Vec<i8>> {
        (0..self.n).map(|r| self.row(r)).collect()
    }

    /// Sites `(l, r)` spanned by a revealed generator.
    pub fn row_extent(&self, row: usize) -> Option<(usize, usize)> {
        if !self.kept[row] {
            return None;
        }
        let site = |c: usize| (self.words[row * self.width + c / 64] >> (c % 64)) & 1;
        let occupied = |j: usize| site(2 * j) | site(2 * j + 1) == 1;
        let l = (0..self.n).find(|&j| occupied(j))?;
        let r = (0..self.n).rev().find(|&j| occupied(j))?;
        Some((l, r))
    }
}

/// Reveals each generator independently with probability `q`.
pub fn observe<R: Rng + ?Sized>(t: &Tableau, q: f64, rng: &mut R) -> Observation {
    let n = t.n_qubits();
    let kept = if q >= 1.0 {
        vec![true; n]
    } else if q <= 0.0 {
        vec![false; n]
    } else {
        (0..n).map(|_| rng.random::<f64>() < q).collect()
    };
    Observation { n, width: t.words_per_row(), words: t.words().to_vec(), kept }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DoneReason {
    Disentangled,
    TurnLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepInfo {
    pub action: usize,
    pub delta_n: u8,
    pub n_random_gates: u32,
    pub done_reason: Option<DoneReason>,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observation: Observation,
    /// `-S_tot / N(N-1)` measured right after the disentangling gate.
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One game instance with its own random stream.
#[derive(Debug)]
pub struct Env {
    cfg: EnvConfig,
    norm: f64,
    tableau: Tableau,
    clipmap: ClipMap,
    profile: EntanglementProfile,
    turn: u64,
    rng: ChaCha8Rng,
    dis: Disentangler,
    clipper: Clipper,
}

impl Env {
    /// Builds and resets an environment. Returns the initial observation.
    pub fn new(cfg: EnvConfig, dis: Disentangler) -> Result<(Self, Observation)> {
        cfg.validate()?;
        let n = cfg.n_qubits;
        let mut tableau = Tableau::new_product_state(n)?;
        let mut clipper = Clipper::new();
        let clipmap = clipper.clip_in_place(&mut tableau)?;
        let mut env = Env {
            norm: normalization(n - 1) as f64,
            tableau,
            clipmap,
            profile: EntanglementProfile::zeros(n),
            turn: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            dis,
            clipper,
            cfg,
        };
        let obs = env.reset()?;
        Ok((env, obs))
    }

    /// Re-initializes the state, continuing the current random stream.
    pub fn reset(&mut self) -> Result<Observation> {
        let n = self.cfg.n_qubits;
        self.tableau = Tableau::new_product_state(n)?;
        if let InitMode::Random { depth } = self.cfg.init {
            let gates = GateSet::c2();
            for _ in 0..depth {
                let a = self.rng.random_range(0..n - 1);
                self.tableau.apply_gate_unchecked(gates.sample(&mut self.rng), a);
            }
        }
        self.turn = 0;
        self.reclip()?;
        Ok(self.observe())
    }

    /// Replaces the state by `t`, keeping the turn counter.
    pub fn set_state(&mut self, t: Tableau) -> Result<()> {
        if t.n_qubits() != self.cfg.n_qubits {
            return Err(Error::InvalidSize { n: t.n_qubits(), min: self.cfg.n_qubits });
        }
        t.validate()?;
        self.tableau = t;
        self.reclip()
    }

    fn reclip(&mut self) -> Result<()> {
        self.clipper.clip_into(&mut self.tableau, &mut self.clipmap)?;
        profile_into(&self.clipmap, &mut self.profile)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn n_qubits(&self) -> usize {
        self.cfg.n_qubits
    }

    pub fn n_bonds(&self) -> usize {
        self.cfg.n_qubits - 1
    }

    pub fn tableau(&self) -> &Tableau {
        &self.tableau
    }

    pub fn clipmap(&self) -> &ClipMap {
        &self.clipmap
    }

    pub fn profile(&self) -> &EntanglementProfile {
        &self.profile
    }

    pub fn turn(&self) -> u64 {
        self.turn
    }

    pub fn s_tot(&self) -> u64 {
        self.profile.total()
    }

    /// Total entanglement divided by its maximum.
    pub fn s_norm(&self) -> f64 {
        self.s_tot() as f64 / self.norm
    }

    pub fn disentangler(&self) -> &Disentangler {
        &self.dis
    }

    /// Optimal gate for bond `a` of the current state.
    pub fn best_gate(&mut self, a: usize) -> Result<LookupEntry> {
        self.check_bond(a)?;
        self.dis.best_gate(&self.tableau, &self.clipmap, a)
    }

    /// Achievable reduction of `n(b)` for every bond `b`.
    pub fn deltas(&mut self) -> Result<Vec<u8>> {
        (0..self.n_bonds()).map(|a| self.dis.delta(&self.tableau, &self.clipmap, a)).collect()
    }

    fn check_bond(&self, a: usize) -> Result<()> {
        if a + 1 >= self.cfg.n_qubits {
            return Err(Error::BondOutOfRange { bond: a, n: self.cfg.n_qubits });
        }
        Ok(())
    }

    /// Draws an observation of the current state from the environment stream.
    pub fn observe(&mut self) -> Observation {
        observe(&self.tableau, self.cfg.q, &mut self.rng)
    }

    pub fn step(&mut self, a: usize) -> Result<StepOutcome> {
        self.check_bond(a)?;
        let n = self.cfg.n_qubits;
        let entry = self.dis.best_gate(&self.tableau, &self.clipmap, a)?;
        let mut dirty = false;
        if !entry.gate.is_identity() {
            self.tableau.apply_gate_unchecked(&entry.gate, a);
            dirty = true;
        }
        let n_a = self.profile.get(a) - entry.delta_n as u32;
        self.profile.set(a, n_a);
        let s_tot = self.profile.total();
        let reward = -(s_tot as f64) / self.norm;

        let gates = GateSet::c2();
        let mut n_random = 0u32;
        while self.rng.random::<f64>() > self.cfg.p {
            let b = self.rng.random_range(0..n - 1);
            self.tableau.apply_gate_unchecked(gates.sample(&mut self.rng), b);
            n_random += 1;
            dirty = true;
        }
        if dirty {
            self.reclip()?;
        }
        let observation = self.observe();
        self.turn += 1;
        let done_reason = if s_tot == 0 {
            Some(DoneReason::Disentangled)
        } else if self.turn >= self.cfg.episode_length {
            Some(DoneReason::TurnLimit)
        } else {
            None
        };
        Ok(StepOutcome {
            observation,
            reward,
            done: done_reason.is_some(),
            info: StepInfo { action: a, delta_n: entry.delta_n, n_random_gates: n_random, done_reason },
        })
    }
}
