//! Trajectory driver, ensemble estimators and finite-size diagnostics.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::disentangler::{Disentangler, LookupTable, SelectionMode, SharedLookup};
use crate::env::{Env, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::protocol::{ChildTransport, DEFAULT_TIMEOUT};
use crate::strategy::{
    ExternalPolicy, GreedyPolicy, Policy, PyramidConfig, PyramidPolicy, RandomPolicy, StrategyError, StrategyKind,
};

/// Turns discarded before sampling.
pub fn transient_turns_default(kind: StrategyKind, n_qubits: usize) -> u64 {
    let n3 = (n_qubits as f64).powi(3);
    let factor = match kind {
        StrategyKind::Random => 0.2,
        _ if n_qubits == 128 => 0.02,
        _ => 0.04,
    };
    (factor * n3).ceil() as u64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub n_realizations: usize,
    pub samples_per_realization: usize,
    pub sample_spacing: u64,
    pub transient_turns: u64,
}

impl EnsembleSpec {
    /// 2000 realizations, 10 samples spaced by `10 N` turns after the
    /// default transient.
    pub fn standard(kind: StrategyKind, n_qubits: usize) -> Self {
        EnsembleSpec {
            n_realizations: 2000,
            samples_per_realization: 10,
            sample_spacing: 10 * n_qubits as u64,
            transient_turns: transient_turns_default(kind, n_qubits),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 || self.samples_per_realization == 0 || self.sample_spacing == 0 {
            return Err(Error::Config("ensemble sizes and spacing must be positive".into()));
        }
        Ok(())
    }

    /// Turn index of the last sample.
    pub fn last_turn(&self) -> u64 {
        self.transient_turns + (self.samples_per_realization as u64 - 1) * self.sample_spacing
    }
}

/// How each trajectory chooses its actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub n_bottlenecks: usize,
    pub policy_cmd: Option<String>,
    pub timeout: Duration,
    pub selection: SelectionMode,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        StrategySpec { kind, n_bottlenecks: 1, policy_cmd: None, timeout: DEFAULT_TIMEOUT, selection: SelectionMode::Identity }
    }

    pub fn pyramid(n_bottlenecks: usize) -> Self {
        StrategySpec { n_bottlenecks, ..Self::new(StrategyKind::Pyramid) }
    }

    pub fn external(cmd: impl Into<String>) -> Self {
        StrategySpec { policy_cmd: Some(cmd.into()), ..Self::new(StrategyKind::External) }
    }

    pub fn build(&self, n_qubits: usize) -> std::result::Result<Box<dyn Policy>, StrategyError> {
        Ok(match self.kind {
            StrategyKind::Random => Box::new(RandomPolicy::new(n_qubits)?),
            StrategyKind::Greedy => Box::new(GreedyPolicy),
            StrategyKind::Pyramid => Box::new(PyramidPolicy { cfg: PyramidConfig::new(n_qubits, self.n_bottlenecks)? }),
            StrategyKind::External => {
                let cmd = self
                    .policy_cmd
                    .as_deref()
                    .ok_or_else(|| Error::Config("external strategy needs a policy command".into()))?;
                Box::new(ExternalPolicy::connect(ChildTransport::spawn(cmd)?, n_qubits, self.timeout)?)
            }
        })
    }
}

/// Seed of trajectory `index` under `base_seed`.
pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ index
}

/// One turn as seen by the controller.
#[derive(Clone, Debug)]
pub struct TurnRecord {
    /// Turn counter before the step.
    pub turn: u64,
    pub action: usize,
    /// Profile and observation the action was chosen from.
    pub profile: Vec<u32>,
    pub observation: Observation,
    /// Total entanglement at the end of the turn.
    pub s_tot_after: u64,
}

/// An environment driven by a policy. The policy draws from its own stream
/// (stream 1 of the trajectory seed), the environment from stream 0.
pub struct Trajectory {
    env: Env,
    policy: Box<dyn Policy>,
    rng: ChaCha8Rng,
    obs: Observation,
}

impl Trajectory {
    pub fn new(
        cfg: EnvConfig,
        strategy: &StrategySpec,
        shared: Option<SharedLookup>,
    ) -> std::result::Result<Self, StrategyError> {
        let dis = match shared {
            Some(s) => Disentangler::with_shared(s),
            None => Disentangler::new(strategy.selection),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let n = cfg.n_qubits;
        let (env, obs) = Env::new(cfg, dis)?;
        let policy = strategy.build(n)?;
        Ok(Trajectory { env, policy, rng, obs })
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut Env {
        &mut self.env
    }

    /// Plays one turn and returns the chosen bond.
    pub fn advance(&mut self) -> std::result::Result<usize, StrategyError> {
        let a = self.policy.act(&mut self.env, &self.obs, &mut self.rng)?;
        self.obs = self.env.step(a)?.observation;
        Ok(a)
    }

    /// Plays one turn and records what the controller saw.
    pub fn advance_logged(&mut self) -> std::result::Result<TurnRecord, StrategyError> {
        let turn = self.env.turn();
        let profile = self.env.profile().as_slice().to_vec();
        let observation = self.obs.clone();
        let action = self.advance()?;
        Ok(TurnRecord { turn, action, profile, observation, s_tot_after: self.env.s_tot() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub turn: u64,
    pub s_tot: u64,
    pub s_norm: f64,
    pub profile: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub index: usize,
    pub seed: u64,
    pub samples: Vec<Sample>,
    pub wall_time_s: f64,
    /// Diagnostic of a trajectory that was cut short.
    pub error: Option<String>,
}

impl Realization {
    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|s| s.s_norm).sum::<f64>() / self.samples.len() as f64
    }
}

/// Runs one trajectory and samples it at `T_tr + k * spacing`.
pub fn run_realization(
    cfg: &EnvConfig,
    strategy: &StrategySpec,
    spec: &EnsembleSpec,
    shared: Option<SharedLookup>,
    index: usize,
) -> Realization {
    let start = Instant::now();
    let mut out = Realization { index, seed: cfg.seed, samples: Vec::new(), wall_time_s: 0.0, error: None };
    let result = (|| -> std::result::Result<(), StrategyError> {
        let mut traj = Trajectory::new(cfg.clone(), strategy, shared)?;
        let mut next = spec.transient_turns;
        loop {
            let env = traj.env();
            if env.turn() == next {
                out.samples.push(Sample {
                    turn: next,
                    s_tot: env.s_tot(),
                    s_norm: env.s_norm(),
                    profile: env.profile().as_slice().to_vec(),
                });
                if out.samples.len() == spec.samples_per_realization {
                    return Ok(());
                }
                next += spec.sample_spacing;
            }
            traj.advance()?;
        }
    })();
    if let Err(e) = result {
        log::warn!("trajectory {index} (seed {}) failed: {e}", cfg.seed);
        out.error = Some(e.to_string());
    }
    out.wall_time_s = start.elapsed().as_secs_f64();
    out
}

/// Runs `spec.n_realizations` trajectories in parallel on the current rayon
/// pool. Trajectory `i` uses seed `base_seed ^ i`. Results are in index order.
pub fn run_ensemble(
    cfg: &EnvConfig,
    strategy: &StrategySpec,
    spec: &EnsembleSpec,
    shared: Option<SharedLookup>,
) -> Result<Vec<Realization>> {
    cfg.validate()?;
    spec.validate()?;
    let shared = shared.unwrap_or_else(|| LookupTable::new(strategy.selection).into_shared());
    Ok((0..spec.n_realizations)
        .into_par_iter()
        .map(|i| {
            let cfg = EnvConfig { seed: trajectory_seed(cfg.seed, i as u64), ..cfg.clone() };
            run_realization(&cfg, strategy, spec, Some(shared.clone()), i)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyStateEstimate {
    pub mean: f64,
    /// Standard error over per-realization means.
    pub stderr: f64,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub failed: usize,
}

/// Mean and standard error of normalized entanglement over completed
/// realizations.
pub fn estimate(realizations: &[Realization]) -> Result<SteadyStateEstimate> {
    let ok: Vec<&Realization> = realizations.iter().filter(|r| r.error.is_none() && !r.samples.is_empty()).collect();
    if ok.is_empty() {
        return Err(Error::InvalidState("no completed realizations".into()));
    }
    let values: Vec<f64> = ok.iter().flat_map(|r| r.samples.iter().map(|s| s.s_norm)).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let means: Vec<f64> = ok.iter().map(|r| r.mean()).collect();
    let stderr = if means.len() > 1 {
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        (var / means.len() as f64).sqrt()
    } else {
        0.0
    };
    Ok(SteadyStateEstimate {
        mean,
        stderr,
        values,
        seeds: ok.iter().map(|r| r.seed).collect(),
        failed: realizations.len() - ok.len(),
    })
}

/// Runs an ensemble and summarizes it.
pub fn ensemble_estimate(cfg: &EnvConfig, strategy: &StrategySpec, spec: &EnsembleSpec) -> Result<SteadyStateEstimate> {
    estimate(&run_ensemble(cfg, strategy, spec, None)?)
}

/// Mean profile over all samples of all completed realizations.
pub fn mean_profile(realizations: &[Realization]) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for s in realizations.iter().filter(|r| r.error.is_none()).flat_map(|r| &r.samples) {
        if acc.is_empty() {
            acc = vec![0.0; s.profile.len()];
        }
        for (a, &v) in acc.iter_mut().zip(&s.profile) {
            *a += v as f64;
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count.max(1) as f64);
    acc
}

/// First turn at which `mean(series[t..t+window]) / series[t] - 1` reaches
/// its minimum over the series.
pub fn detect_steady_state(series: &[f64], window: usize) -> Result<usize> {
    if window == 0 || series.len() <= window {
        return Err(Error::InvalidState(format!(
            "series of length {} is too short for window {window}",
            series.len()
        )));
    }
    let mut sum: f64 = series[..window].iter().sum();
    let mut best = (f64::INFINITY, 0usize);
    for t in 0..=series.len() - window {
        if t > 0 {
            sum += series[t + window - 1] - series[t - 1];
        }
        let mean = sum / window as f64;
        let c = if mean == series[t] {
            0.0
        } else if series[t] == 0.0 {
            f64::INFINITY
        } else {
            mean / series[t] - 1.0
        };
        if c < best.0 {
            best = (c, t);
        }
    }
    Ok(best.1)
}

/// `1 - <x^4> / (3 <x^2>^2)` with raw moments.
pub fn binder_cumulant(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::InvalidState("Binder cumulant needs at least two samples".into()));
    }
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x * x) * (x * x)).sum::<f64>() / n;
    if m2 == 0.0 {
        return Err(Error::InvalidState("Binder cumulant of an all-zero sample".into()));
    }
    Ok(1.0 - m4 / (3.0 * m2 * m2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub p: f64,
    /// More than one sign change was found; `p` is the leftmost.
    pub ambiguous: bool,
}

/// Zero of `a - b` on the shared grid `ps`, by linear interpolation.
pub fn binder_crossing(ps: &[f64], a: &[f64], b: &[f64]) -> Result<Crossing> {
    if ps.len() != a.len() || ps.len() != b.len() || ps.len() < 2 {
        return Err(Error::InvalidState("crossing needs two curves on a shared grid of ≥ 2 points".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidState("curves coincide; no unique crossing".into()));
    }
    let mut crossings = Vec::new();
    for i in 0..d.len() {
        if d[i] == 0.0 {
            let prev_zero = i > 0 && d[i - 1] == 0.0;
            if !prev_zero {
                crossings.push(ps[i]);
            }
        } else if i + 1 < d.len() && d[i] * d[i + 1] < 0.0 {
            let t = d[i] / (d[i] - d[i + 1]);
            crossings.push(ps[i] + t * (ps[i + 1] - ps[i]));
        }
    }
    match crossings.first() {
        None => Err(Error::InvalidState("curve difference never changes sign".into())),
        Some(&p) => {
            if crossings.len() > 1 {
                log::warn!("{} crossings found; using the leftmost at {p}", crossings.len());
            }
            Ok(Crossing { p, ambiguous: crossings.len() > 1 })
        }
    }
}

/// Bottleneck density `n_B* = pN / (1 - p)` and the predicted normalized
/// entanglement `1 / (n_B* + 1)`.
pub fn bottleneck_model(p: f64, n_qubits: usize) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!("bottleneck model needs 0 < p < 1, got {p}")));
    }
    let nb = p * n_qubits as f64 / (1.0 - p);
    Ok((nb, 1.0 / (nb + 1.0)))
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BellPairStats {
    pub observed: Vec<u64>,
    pub targeted: Vec<u64>,
}

impl BellPairStats {
    pub fn total_observed(&self) -> u64 {
        self.observed.iter().sum()
    }

    pub fn total_targeted(&self) -> u64 {
        self.targeted.iter().sum()
    }

    /// Targeted over observed pairs; `None` when nothing was observed.
    pub fn ratio(&self) -> Option<f64> {
        let obs = self.total_observed();
        (obs > 0).then(|| self.total_targeted() as f64 / obs as f64)
    }
}

/// Whether bond `a` of `profile` holds an isolated Bell-like pair.
pub fn is_bell_pair(profile: &[u32], a: usize) -> bool {
    let at = |b: Option<usize>| b.and_then(|b| profile.get(b).copied()).unwrap_or(0);
    profile[a] == 1 && at(a.checked_sub(1)) == 0 && at(Some(a + 1)) == 0
}

/// Counts Bell-like pairs visible to the controller and those it acted on.
pub fn bell_pair_stats(log: &[TurnRecord]) -> BellPairStats {
    let n_bonds = log.first().map_or(0, |r| r.profile.len());
    let mut stats = BellPairStats { observed: vec![0; n_bonds], targeted: vec![0; n_bonds] };
    for rec in log {
        let obs = &rec.observation;
        for a in (0..n_bonds).filter(|&a| is_bell_pair(&rec.profile, a)) {
            let visible = (0..obs.n_qubits()).any(|r| obs.row_extent(r) == Some((a, a + 1)));
            if visible {
                stats.observed[a] += 1;
                if rec.action == a {
                    stats.targeted[a] += 1;
                }
            }
        }
    }
    stats
}

/// One frame of an entanglement-profile animation.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Frame {
    pub turn: u64,
    pub action: usize,
    pub profile: Vec<u32>,
    pub s_tot: u64,
    /// Mean of the total entanglement over turns `1..=turn`.
    pub running_mean: f64,
}

/// Plays `turns` turns and keeps every `stride`-th end-of-turn state.
pub fn record_frames(
    cfg: &EnvConfig,
    strategy: &StrategySpec,
    turns: u64,
    stride: u64,
) -> std::result::Result<Vec<Frame>, StrategyError> {
    if stride == 0 {
        return Err(Error::Config("frame stride must be positive".into()).into());
    }
    let mut traj = Trajectory::new(cfg.clone(), strategy, None)?;
    let mut frames = Vec::new();
    let mut sum = 0u64;
    for tau in 1..=turns {
        let action = traj.advance()?;
        let env = traj.env();
        sum += env.s_tot();
        if tau % stride == 0 {
            frames.push(Frame {
                turn: tau,
                action,
                profile: env.profile().as_slice().to_vec(),
                s_tot: env.s_tot(),
                running_mean: sum as f64 / tau as f64,
            });
        }
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::InitMode;
    use rand::Rng;

    /// Box-Muller draw.
    fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn transient_defaults() {
        assert_eq!(transient_turns_default(StrategyKind::Random, 16), 820);
        assert_eq!(transient_turns_default(StrategyKind::Greedy, 16), 164);
        assert_eq!(transient_turns_default(StrategyKind::Greedy, 128), 41944);
        assert_eq!(transient_turns_default(StrategyKind::Random, 128), 419431);
        assert_eq!(transient_turns_default(StrategyKind::Pyramid, 32), 1311);
    }

    #[test]
    fn steady_state_detection() {
        assert_eq!(detect_steady_state(&[3.0; 50], 10).unwrap(), 0);
        assert_eq!(detect_steady_state(&[0.0; 50], 10).unwrap(), 0);
        let series: Vec<f64> = (0..200).map(|t| (t as f64).min(80.0) + 1.0).collect();
        let t = detect_steady_state(&series, 20).unwrap();
        assert!(t.abs_diff(80) <= 20, "detected {t}");
        assert!(detect_steady_state(&[1.0; 5], 5).is_err());
    }

    #[test]
    fn binder_values() {
        assert!((binder_cumulant(&[0.4; 10]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((binder_cumulant(&[1.0, -1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(binder_cumulant(&[1.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..1_000_000).map(|_| standard_normal(&mut rng)).collect();
        assert!(binder_cumulant(&xs).unwrap().abs() < 0.01);
    }

    #[test]
    fn binder_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let u = binder_cumulant(&xs).unwrap();
        let mut rev = xs.clone();
        rev.reverse();
        let scaled: Vec<f64> = xs.iter().map(|x| 3.7 * x).collect();
        assert!((binder_cumulant(&rev).unwrap() - u).abs() < 1e-12);
        assert!((binder_cumulant(&scaled).unwrap() - u).abs() < 1e-12);
    }

    #[test]
    fn crossing_fixtures() {
        let ps: Vec<f64> = (0..11).map(|i| 0.10 + 0.01 * i as f64).collect();
        let a: Vec<f64> = ps.iter().map(|p| 2.0 * (p - 0.135)).collect();
        let b: Vec<f64> = ps.iter().map(|p| -(p - 0.135)).collect();
        let c = binder_crossing(&ps, &a, &b).unwrap();
        assert!((c.p - 0.135).abs() < 0.01);
        assert!(!c.ambiguous);
        assert!(binder_crossing(&ps, &a, &a).is_err());
        let above: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert!(binder_crossing(&ps, &above, &b).is_err());
        let wiggle = [1.0, -1.0, 1.0, -1.0];
        let c = binder_crossing(&[0.0, 1.0, 2.0, 3.0], &wiggle, &[0.0; 4]).unwrap();
        assert!((c.p - 0.5).abs() < 1e-12);
        assert!(c.ambiguous);
    }

    #[test]
    fn bottleneck_values() {
        let (nb, pred) = bottleneck_model(0.5, 10).unwrap();
        assert!((nb - 10.0).abs() < 1e-12);
        assert!((pred - 1.0 / 11.0).abs() < 1e-12);
        assert!(bottleneck_model(0.999_999, 16).unwrap().1 < 1e-4);
        let (p, n) = (0.3, 1_000_000);
        let pred = bottleneck_model(p, n).unwrap().1;
        assert!((pred / ((1.0 - p) / (p * n as f64)) - 1.0).abs() < 1e-5);
        assert!(bottleneck_model(0.0, 4).is_err());
        assert!(bottleneck_model(1.0, 4).is_err());
    }

    #[test]
    fn stderr_shrinks_with_realizations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mk = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Realization> {
            (0..n)
                .map(|i| Realization {
                    index: i,
                    seed: i as u64,
                    samples: vec![Sample { turn: 0, s_tot: 0, s_norm: rng.random(), profile: vec![] }],
                    wall_time_s: 0.0,
                    error: None,
                })
                .collect()
        };
        let small = estimate(&mk(&mut rng, 100)).unwrap();
        let large = estimate(&mk(&mut rng, 10_000)).unwrap();
        let ratio = small.stderr / large.stderr;
        assert!((ratio - 10.0).abs() < 1.5, "ratio {ratio}");
        assert!(estimate(&[]).is_err());
    }

    #[test]
    fn greedy_at_p_one_stays_clean() {
        let cfg = EnvConfig::new(8, 1.0).with_seed(4);
        let spec = EnsembleSpec { n_realizations: 4, samples_per_realization: 3, sample_spacing: 5, transient_turns: 10 };
        let est = ensemble_estimate(&cfg, &StrategySpec::new(StrategyKind::Greedy), &spec).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.values.len(), 12);
        assert_eq!(est.seeds, vec![4, 5, 6, 7]);
    }

    #[test]
    fn random_strategy_phases_at_n16() {
        let n = 16;
        let spec = EnsembleSpec { n_realizations: 24, ..EnsembleSpec::standard(StrategyKind::Random, n) };
        let strat = StrategySpec::new(StrategyKind::Random);
        let high = ensemble_estimate(&EnvConfig::new(n, 0.5).with_seed(5), &strat, &spec).unwrap();
        assert!(high.mean < 0.2, "p=0.5 mean {}", high.mean);
        let low = ensemble_estimate(&EnvConfig::new(n, 0.05).with_seed(6), &strat, &spec).unwrap();
        assert!(low.mean > 0.8, "p=0.05 mean {}", low.mean);
    }

    #[test]
    fn ensembles_are_reproducible() {
        let cfg = EnvConfig::new(10, 0.3).with_seed(77).with_init(InitMode::Random { depth: 20 });
        let spec = EnsembleSpec { n_realizations: 6, samples_per_realization: 4, sample_spacing: 7, transient_turns: 30 };
        let strat = StrategySpec::new(StrategyKind::Random);
        let a = run_ensemble(&cfg, &strat, &spec, None).unwrap();
        let b = run_ensemble(&cfg, &strat, &spec, None).unwrap();
        let strip = |v: &[Realization]| -> Vec<Vec<Sample>> { v.iter().map(|r| r.samples.clone()).collect() };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a[3].samples[0].turn, 30);
        assert_eq!(a[3].samples[3].turn, 51);
    }

    #[test]
    fn bell_pair_detection_rules() {
        assert!(is_bell_pair(&[1, 0, 0], 0));
        assert!(is_bell_pair(&[0, 0, 1], 2));
        assert!(!is_bell_pair(&[1, 1, 0], 0));
        assert!(!is_bell_pair(&[0, 2, 0], 1));
    }

    #[test]
    fn bell_pair_stats_examples() {
        let n = 8;
        let rows: Vec<String> = (0..n)
            .map(|i| match i {
                3 => "IIIXXIII".to_string(),
                4 => "IIIZZIII".to_string(),
                _ => (0..n).map(|j| if i == j { 'Z' } else { 'I' }).collect(),
            })
            .collect();
        let t = crate::tableau::Tableau::from_paulis(&rows).unwrap();
        let run = |q: f64| {
            let cfg = EnvConfig::new(n, 1.0).with_q(q).with_seed(1);
            let mut traj = Trajectory::new(cfg, &StrategySpec::new(StrategyKind::Greedy), None).unwrap();
            traj.env_mut().set_state(t.clone()).unwrap();
            // the initial observation predates the Bell pair; refresh it
            traj.obs = traj.env_mut().observe();
            let log: Vec<TurnRecord> = (0..3).map(|_| traj.advance_logged().unwrap()).collect();
            bell_pair_stats(&log)
        };
        let full = run(1.0);
        assert_eq!(full.observed[3], 1);
        assert_eq!(full.targeted[3], 1);
        assert_eq!(full.ratio(), Some(1.0));
        let blind = run(0.0);
        assert_eq!(blind.total_observed(), 0);
        assert_eq!(blind.ratio(), None);

        let cfg = EnvConfig::new(n, 1.0).with_seed(1);
        let mut traj = Trajectory::new(cfg, &StrategySpec::new(StrategyKind::Greedy), None).unwrap();
        let log: Vec<TurnRecord> = (0..5).map(|_| traj.advance_logged().unwrap()).collect();
        assert_eq!(bell_pair_stats(&log), BellPairStats { observed: vec![0; 7], targeted: vec![0; 7] });
    }

    #[test]
    fn frames_are_consistent() {
        let strat = StrategySpec::new(StrategyKind::Greedy);
        assert!(record_frames(&EnvConfig::new(8, 0.3), &strat, 0, 1).unwrap().is_empty());
        let clean = record_frames(&EnvConfig::new(8, 1.0), &strat, 20, 5).unwrap();
        assert_eq!(clean.len(), 4);
        assert!(clean.iter().all(|f| f.s_tot == 0 && f.profile.iter().all(|&v| v == 0)));
        let frames = record_frames(&EnvConfig::new(12, 0.2).with_seed(3), &strat, 100, 7).unwrap();
        assert_eq!(frames.len(), 14);
        for f in &frames {
            assert_eq!(f.profile.iter().map(|&v| v as u64).sum::<u64>(), f.s_tot);
            assert_eq!(f.turn % 7, 0);
        }
    }
}
