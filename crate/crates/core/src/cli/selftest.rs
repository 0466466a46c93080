//! `selftest`: fast end-to-end sanity checks of an installed binary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clipped::{clip, oracle_entanglement};
use crate::disentangler::Disentangler;
use crate::env::{Env, EnvConfig, InitMode};
use crate::tableau::{GateSet, Tableau};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gate_set() -> (bool, String) {
    let g = GateSet::c2();
    (g.len() == 720 && g.get(0).is_identity(), format!("{} gates", g.len()))
}

fn gauge_vs_oracle(rng: &mut ChaCha8Rng) -> (bool, String) {
    for i in 0..100 {
        let n = rng.random_range(2..=12);
        let mut t = Tableau::new_product_state(n).expect("n >= 2");
        t.scramble(GateSet::c2(), 200, rng);
        let Ok((_, cm, p)) = clip(&t) else {
            return (false, format!("state {i}: clipping failed"));
        };
        if !cm.is_clipped() || (0..n - 1).any(|a| p.get(a) != oracle_entanglement(&t, a)) {
            return (false, format!("state {i} (N={n}) disagrees with the rank oracle"));
        }
    }
    (true, "100 states".into())
}

fn disentangler_optimal(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut dis = Disentangler::default();
    for i in 0..10 {
        let mut t = Tableau::new_product_state(6).expect("n >= 2");
        t.scramble(GateSet::c2(), 30, rng);
        let (t, cm, before) = clip(&t).expect("valid state");
        for a in 0..5 {
            let Ok(e) = dis.best_gate(&t, &cm, a) else {
                return (false, format!("state {i}: lookup failed"));
            };
            let best = GateSet::c2()
                .iter()
                .map(|g| {
                    let mut c = t.clone();
                    c.apply_gate_unchecked(g, a);
                    clip(&c).expect("valid state").2.get(a)
                })
                .min()
                .expect("nonempty gate set");
            if before.get(a) - e.delta_n as u32 != best {
                return (false, format!("state {i}, bond {a}: suboptimal gate"));
            }
        }
    }
    (true, "10 states x 5 bonds".into())
}

fn env_determinism() -> (bool, String) {
    let cfg = EnvConfig::new(10, 0.3).with_seed(5).with_q(0.5).with_init(InitMode::Random { depth: 30 });
    let run = || -> Option<Vec<u64>> {
        let (mut env, _) = Env::new(cfg.clone(), Disentangler::default()).ok()?;
        (0..100).map(|t| env.step(t % 9).ok().map(|_| env.s_tot())).collect()
    };
    let (a, b) = (run(), run());
    (a.is_some() && a == b, "100 turns replayed".into())
}

/// Runs all checks.
pub fn cmd_selftest() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut out = Vec::new();
    let mut add = |name, (passed, detail): (bool, String)| out.push(Check { name, passed, detail });
    add("gate set", gate_set());
    add("clipped gauge vs rank oracle", gauge_vs_oracle(&mut rng));
    add("disentangler optimality", disentangler_optimal(&mut rng));
    add("environment determinism", env_determinism());
    out
}
