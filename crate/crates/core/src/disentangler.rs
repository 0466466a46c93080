//! Optimal disentangling gates.
//!
//! The post-gate entanglement across bond `a` is fixed by the generators
//! with an endpoint on `a` or `a + 1` in the clipped gauge, so the optimal
//! gate is a function of a small window key. Keys are resolved lazily by
//! brute force over all 720 gates and cached.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::RwLock;
use rand::Rng;

use crate::clipped::{ClipMap, Clipper};
use crate::error::{Error, Result};
use crate::tableau::{CliffordGate2, GateSet, Tableau};

pub const LOOKUP_FORMAT_VERSION: u32 = 1;
const LOOKUP_HEADER: &str = "# stabgame lookup table";

const L_AT_A: u8 = 1;
const L_AT_B: u8 = 2;
const R_AT_A: u8 = 4;
const R_AT_B: u8 = 8;

/// Canonical encoding of the endpoint rows around a bond.
///
/// Byte 0 holds the edge flags (bit 0: left chain edge, bit 1: right chain
/// edge), byte 1 the row count, then one byte per row, sorted ascending:
/// endpoint flags in the high nibble, local Pauli content in the low nibble.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowKey([u8; 6]);

impl WindowKey {
    pub fn as_bytes(&self) -> &[u8; 6] {
        &self.0
    }

    pub fn n_rows(&self) -> usize {
        self.0[1] as usize
    }

    pub fn rows(&self) -> &[u8] {
        &self.0[2..2 + self.n_rows()]
    }

    pub fn at_left_edge(&self) -> bool {
        self.0[0] & 1 != 0
    }

    pub fn at_right_edge(&self) -> bool {
        self.0[0] & 2 != 0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_bytes(bytes: [u8; 6]) -> Result<Self> {
        let k = bytes[1] as usize;
        if bytes[0] > 3 || !(1..=4).contains(&k) {
            return Err(Error::Parse(format!("invalid window key header {:02x}{:02x}", bytes[0], bytes[1])));
        }
        let rows = &bytes[2..2 + k];
        if rows.iter().any(|&r| r >> 4 == 0) || rows.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Parse("window key rows are not canonical".into()));
        }
        if bytes[2 + k..].iter().any(|&b| b != 0) {
            return Err(Error::Parse("window key has trailing data".into()));
        }
        Ok(WindowKey(bytes))
    }
}

impl FromStr for WindowKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut bytes = [0u8; 6];
        hex::decode_to_slice(s, &mut bytes).map_err(|e| Error::Parse(format!("window key {s:?}: {e}")))?;
        WindowKey::from_bytes(bytes)
    }
}

impl fmt::Debug for WindowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WindowKey({})", self.to_hex())
    }
}

/// Builds the window key of bond `a`. The tableau must be in the clipped
/// gauge described by `cm`.
pub fn window_key(t: &Tableau, cm: &ClipMap, a: usize) -> WindowKey {
    let n = t.n_qubits();
    assert!(a + 1 < n, "bond {a} out of range for {n} qubits");
    let mut bytes = [0u8; 6];
    bytes[0] = (a == 0) as u8 | (((a + 2 == n) as u8) << 1);
    let mut seen = [usize::MAX; 4];
    let mut k = 0;
    for site in [a, a + 1] {
        for row in cm.rows_at_site(site) {
            if seen[..k].contains(&row) {
                continue;
            }
            let (l, r) = (cm.left(row), cm.right(row));
            let flags = ((l == a) as u8 * L_AT_A)
                | ((l == a + 1) as u8 * L_AT_B)
                | ((r == a) as u8 * R_AT_A)
                | ((r == a + 1) as u8 * R_AT_B);
            seen[k] = row;
            bytes[2 + k] = (flags << 4) | t.local_window(row, a);
            k += 1;
        }
    }
    bytes[1] = k as u8;
    bytes[2..2 + k].sort_unstable();
    WindowKey(bytes)
}

/// The 21 endpoint arrangements of a clipped window, named by row count.
///
/// Starred classes are mirror images. Used for diagnostics only: gate
/// selection never depends on the class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowClass {
    C2_1,
    C2_2,
    C3_1,
    C3_1s,
    C3_2,
    C3_2s,
    C3_3,
    C3_3s,
    C3_4,
    C3_4s,
    C3_5,
    C3_6,
    C4_1,
    C4_2,
    C4_2s,
    C4_3,
    C4_3s,
    C4_4,
    C4_4s,
    C4_5,
    C4_6,
    Unclassified,
}

impl WindowClass {
    pub const ALL: [WindowClass; 22] = [
        WindowClass::C2_1,
        WindowClass::C2_2,
        WindowClass::C3_1,
        WindowClass::C3_1s,
        WindowClass::C3_2,
        WindowClass::C3_2s,
        WindowClass::C3_3,
        WindowClass::C3_3s,
        WindowClass::C3_4,
        WindowClass::C3_4s,
        WindowClass::C3_5,
        WindowClass::C3_6,
        WindowClass::C4_1,
        WindowClass::C4_2,
        WindowClass::C4_2s,
        WindowClass::C4_3,
        WindowClass::C4_3s,
        WindowClass::C4_4,
        WindowClass::C4_4s,
        WindowClass::C4_5,
        WindowClass::C4_6,
        WindowClass::Unclassified,
    ];

    pub fn label(self) -> &'static str {
        use WindowClass::*;
        match self {
            C2_1 => "2.1",
            C2_2 => "2.2",
            C3_1 => "3.1",
            C3_1s => "3.1*",
            C3_2 => "3.2",
            C3_2s => "3.2*",
            C3_3 => "3.3",
            C3_3s => "3.3*",
            C3_4 => "3.4",
            C3_4s => "3.4*",
            C3_5 => "3.5",
            C3_6 => "3.6",
            C4_1 => "4.1",
            C4_2 => "4.2",
            C4_2s => "4.2*",
            C4_3 => "4.3",
            C4_3s => "4.3*",
            C4_4 => "4.4",
            C4_4s => "4.4*",
            C4_5 => "4.5",
            C4_6 => "4.6",
            Unclassified => "unclassified",
        }
    }

    /// Classes that no two-qubit gate can disentangle further.
    pub fn is_minimal(self) -> bool {
        use WindowClass::*;
        matches!(self, C2_1 | C3_1 | C3_1s | C3_2 | C3_2s | C3_5 | C4_1 | C4_2 | C4_2s | C4_4 | C4_4s)
    }

    pub fn n_rows(self) -> usize {
        match self.label().as_bytes()[0] {
            b'2' => 2,
            b'3' => 3,
            b'4' => 4,
            _ => 0,
        }
    }
}

impl fmt::Display for WindowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WindowClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        WindowClass::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown window class {s:?}")))
    }
}

/// Maps a key to its endpoint arrangement.
pub fn classify_window(key: &WindowKey) -> WindowClass {
    use WindowClass::*;
    // counts of AA, BB, AB, A->R, B->R, L->A, L->B rows
    let mut c = [0u8; 7];
    for &row in key.rows() {
        let idx = match row >> 4 {
            f if f == L_AT_A | R_AT_A => 0,
            f if f == L_AT_B | R_AT_B => 1,
            f if f == L_AT_A | R_AT_B => 2,
            L_AT_A => 3,
            L_AT_B => 4,
            R_AT_A => 5,
            R_AT_B => 6,
            _ => return Unclassified,
        };
        c[idx] += 1;
    }
    let [aa, bb, ab, ar, br, la, lb] = c;
    match key.n_rows() {
        2 if aa == 1 && bb == 1 => C2_1,
        2 if ab == 2 => C2_2,
        3 if aa == 1 => match (lb, br) {
            (0, 2) => C3_1,
            (1, 1) => C3_2,
            (2, 0) => C3_3,
            _ => Unclassified,
        },
        3 if bb == 1 => match (la, ar) {
            (2, 0) => C3_1s,
            (1, 1) => C3_2s,
            (0, 2) => C3_3s,
            _ => Unclassified,
        },
        3 if ab == 1 => match (ar, br, la, lb) {
            (1, 1, 0, 0) => C3_4,
            (0, 0, 1, 1) => C3_4s,
            (0, 1, 1, 0) => C3_5,
            (1, 0, 0, 1) => C3_6,
            _ => Unclassified,
        },
        4 if aa + bb + ab == 0 && la + ar == 2 && lb + br == 2 => match (la, lb) {
            (2, 0) => C4_1,
            (1, 0) => C4_2,
            (2, 1) => C4_2s,
            (0, 1) => C4_3,
            (1, 2) => C4_3s,
            (2, 2) => C4_4,
            (0, 0) => C4_4s,
            (0, 2) => C4_5,
            (1, 1) => C4_6,
            _ => Unclassified,
        },
        _ => Unclassified,
    }
}

/// How ties among non-reducing gates are resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Hash)]
pub enum SelectionMode {
    /// Identity whenever no gate lowers `n(a)`.
    #[default]
    Identity,
    /// When no gate lowers `n(a)`, prefer the lowest-index gate whose
    /// post-gate window falls into a two-row class.
    SpecialCase,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::Identity => "identity",
            SelectionMode::SpecialCase => "special_case",
        }
    }
}

impl FromStr for SelectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(SelectionMode::Identity),
            "special_case" => Ok(SelectionMode::SpecialCase),
            _ => Err(Error::Parse(format!("unknown selection mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LookupEntry {
    pub gate: CliffordGate2,
    /// Reduction of `n(a)` in units of ln 2.
    pub delta_n: u8,
    pub class: WindowClass,
}

/// Persistable cache from window keys to optimal gates, with hit counts.
#[derive(Clone, Debug, Default)]
pub struct LookupTable {
    mode: SelectionMode,
    entries: BTreeMap<WindowKey, (LookupEntry, u64)>,
}

/// Lookup table shared between environments.
pub type SharedLookup = Arc<RwLock<LookupTable>>;

impl LookupTable {
    pub fn new(mode: SelectionMode) -> Self {
        LookupTable { mode, entries: BTreeMap::new() }
    }

    pub fn into_shared(self) -> SharedLookup {
        Arc::new(RwLock::new(self))
    }

    pub fn mode(&self) -> SelectionMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &WindowKey) -> Option<&LookupEntry> {
        self.entries.get(key).map(|(e, _)| e)
    }

    pub fn hits(&self, key: &WindowKey) -> u64 {
        self.entries.get(key).map_or(0, |&(_, h)| h)
    }

    pub fn total_hits(&self) -> u64 {
        self.entries.values().map(|&(_, h)| h).sum()
    }

    pub fn insert(&mut self, key: WindowKey, entry: LookupEntry) {
        self.entries.entry(key).and_modify(|e| e.0 = entry).or_insert((entry, 0));
    }

    pub fn record_hit(&mut self, key: &WindowKey) {
        if let Some(e) = self.entries.get_mut(key) {
            e.1 += 1;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WindowKey, &LookupEntry, u64)> {
        self.entries.iter().map(|(k, (e, h))| (k, e, *h))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{LOOKUP_HEADER}")?;
        writeln!(w, "version {LOOKUP_FORMAT_VERSION}")?;
        writeln!(w, "mode {}", self.mode.as_str())?;
        for (key, (e, hits)) in &self.entries {
            writeln!(w, "{} {:04x} {} {} {}", key.to_hex(), e.gate.bits(), e.delta_n, e.class, hits)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut version = None;
        let mut table = LookupTable::default();
        for (lineno, line) in lines.by_ref() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("lookup line {}: {line:?}", lineno + 1));
            let (field, value) = line.split_once(' ').ok_or_else(bad)?;
            match field {
                "version" => {
                    let v: u32 = value.trim().parse().map_err(|_| bad())?;
                    if v != LOOKUP_FORMAT_VERSION {
                        return Err(Error::VersionMismatch { found: v, expected: LOOKUP_FORMAT_VERSION });
                    }
                    version = Some(v);
                }
                "mode" if version.is_some() => {
                    table.mode = value.trim().parse()?;
                    break;
                }
                _ => return Err(bad()),
            }
        }
        if version.is_none() {
            return Err(Error::Parse("lookup file lacks a version line".into()));
        }
        for (lineno, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("lookup line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [key, gate, delta, class, hits] = fields[..] else {
                return Err(bad("expected 5 fields"));
            };
            let key: WindowKey = key.parse()?;
            let bits = u16::from_str_radix(gate, 16).map_err(|_| bad("gate bits"))?;
            let gate = CliffordGate2::from_bits(bits).ok_or_else(|| bad("gate is not symplectic"))?;
            let delta_n: u8 = delta.parse().map_err(|_| bad("delta"))?;
            if delta_n > 2 {
                return Err(bad("delta out of range"));
            }
            let class: WindowClass = class.parse()?;
            let hits: u64 = hits.parse().map_err(|_| bad("hit count"))?;
            if table.entries.insert(key, (LookupEntry { gate, delta_n, class }, hits)).is_some() {
                return Err(bad("duplicate key"));
            }
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let f = std::fs::File::create(&tmp)?;
            self.write_to(std::io::BufWriter::new(f))?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Resolves optimal gates with a private cache in front of an optional
/// shared table.
#[derive(Debug)]
pub struct Disentangler {
    gates: &'static GateSet,
    mode: SelectionMode,
    local: HashMap<WindowKey, LookupEntry>,
    shared: Option<SharedLookup>,
    verify_keys: bool,
    mismatches: u64,
    brute_force_calls: u64,
    clipper: Clipper,
    scratch: Option<(Tableau, ClipMap)>,
}

impl Default for Disentangler {
    fn default() -> Self {
        Self::new(SelectionMode::Identity)
    }
}

impl Disentangler {
    pub fn new(mode: SelectionMode) -> Self {
        Disentangler {
            gates: GateSet::c2(),
            mode,
            local: HashMap::new(),
            shared: None,
            verify_keys: false,
            mismatches: 0,
            brute_force_calls: 0,
            clipper: Clipper::new(),
            scratch: None,
        }
    }

    /// Uses `shared` as a second-level cache. Its selection mode wins.
    pub fn with_shared(shared: SharedLookup) -> Self {
        let mode = shared.read().mode();
        Disentangler { shared: Some(shared), ..Self::new(mode) }
    }

    /// Re-derives every cache hit by brute force and counts disagreements.
    pub fn with_key_verification(mut self, on: bool) -> Self {
        self.verify_keys = on;
        self
    }

    pub fn mode(&self) -> SelectionMode {
        self.mode
    }

    pub fn mismatches(&self) -> u64 {
        self.mismatches
    }

    pub fn brute_force_calls(&self) -> u64 {
        self.brute_force_calls
    }

    pub fn shared(&self) -> Option<&SharedLookup> {
        self.shared.as_ref()
    }

    /// Optimal gate for bond `a` of a clipped tableau.
    pub fn best_gate(&mut self, t: &Tableau, cm: &ClipMap, a: usize) -> Result<LookupEntry> {
        let key = window_key(t, cm, a);
        let cached = self.local.get(&key).copied().or_else(|| {
            let shared = self.shared.as_ref()?;
            let e = shared.read().get(&key).copied()?;
            self.local.insert(key, e);
            Some(e)
        });
        if let Some(e) = cached {
            if !self.verify_keys {
                return Ok(e);
            }
            let fresh = self.brute_force(t, cm, a)?;
            if fresh != e {
                self.mismatches += 1;
                log::warn!("window key {key:?} at bond {a}: cached {e:?}, brute force {fresh:?}");
            }
            return Ok(fresh);
        }
        let e = self.brute_force(t, cm, a)?;
        self.local.insert(key, e);
        if let Some(shared) = &self.shared {
            shared.write().insert(key, e);
        }
        Ok(e)
    }

    /// Reduction of `n(a)` achievable at bond `a`.
    pub fn delta(&mut self, t: &Tableau, cm: &ClipMap, a: usize) -> Result<u8> {
        Ok(self.best_gate(t, cm, a)?.delta_n)
    }

    /// Tries every gate at bond `a` and keeps the one minimizing `n(a)`;
    /// ties go to the lowest gate index, i.e. identity first.
    pub fn brute_force(&mut self, t: &Tableau, cm: &ClipMap, a: usize) -> Result<LookupEntry> {
        if a + 1 >= t.n_qubits() {
            return Err(Error::BondOutOfRange { bond: a, n: t.n_qubits() });
        }
        self.brute_force_calls += 1;
        let before = cm.crossing_count(a);
        let class = classify_window(&window_key(t, cm, a));
        let (mut scratch, mut scm) = match self.scratch.take() {
            Some(s) if s.0.n_qubits() == t.n_qubits() => s,
            _ => (t.clone(), cm.clone()),
        };
        let mut best = (before, 0usize);
        let mut after = Vec::with_capacity(self.gates.len());
        for (idx, g) in self.gates.iter().enumerate() {
            scratch.copy_from(t);
            scratch.apply_gate_unchecked(g, a);
            self.clipper.clip_into(&mut scratch, &mut scm)?;
            let crossing = scm.crossing_count(a);
            if crossing < best.0 {
                best = (crossing, idx);
            }
            if self.mode == SelectionMode::SpecialCase {
                after.push((crossing, classify_window(&window_key(&scratch, &scm, a))));
            }
        }
        self.scratch = Some((scratch, scm));
        if best.0 == before && self.mode == SelectionMode::SpecialCase {
            if let Some(idx) = after.iter().position(|&(c, cls)| c == before && cls.n_rows() == 2) {
                best.1 = idx;
            }
        }
        let delta = (before - best.0) / 2;
        debug_assert!(delta <= 2 && (before - best.0).is_multiple_of(2));
        Ok(LookupEntry { gate: *self.gates.get(best.1), delta_n: delta as u8, class })
    }
}

/// Populates a lookup table by querying random bonds of evolving states.
///
/// The state alternates between random and optimal gates, cycling the bias
/// through 0.2, 0.5 and 0.8 so that both weakly and strongly entangled
/// windows are visited, and is reset to a product state every `30 N`
/// samples.
pub fn build_table<R: Rng + ?Sized>(
    samples: usize,
    n_qubits: usize,
    mode: SelectionMode,
    rng: &mut R,
) -> Result<LookupTable> {
    if n_qubits < 2 {
        return Err(Error::InvalidSize { n: n_qubits, min: 2 });
    }
    let mut table = LookupTable::new(mode);
    let mut dis = Disentangler::new(mode);
    let gates = GateSet::c2();
    let mut clipper = Clipper::new();
    let mut t = Tableau::new_product_state(n_qubits)?;
    let mut cm = clipper.clip_in_place(&mut t)?;
    let epoch = 10 * n_qubits;
    for s in 0..samples {
        if s % (3 * epoch) == 0 && s > 0 {
            t = Tableau::new_product_state(n_qubits)?;
            cm = clipper.clip_in_place(&mut t)?;
        }
        let bias = [0.2, 0.5, 0.8][(s / epoch) % 3];
        let a = rng.random_range(0..n_qubits - 1);
        let key = window_key(&t, &cm, a);
        let entry = dis.best_gate(&t, &cm, a)?;
        if table.get(&key).is_none() {
            table.insert(key, entry);
        }
        table.record_hit(&key);
        if rng.random::<f64>() < bias {
            t.apply_gate_unchecked(&entry.gate, a);
        } else {
            let b = rng.random_range(0..n_qubits - 1);
            t.apply_gate_unchecked(gates.sample(rng), b);
        }
        clipper.clip_into(&mut t, &mut cm)?;
    }
    Ok(table)
}
