//! Clipped-gauge fixing and entanglement profiles.
//!
//! In the clipped gauge every site hosts exactly two generator endpoints and
//! the entanglement across bond `a` is half the number of generators whose
//! support crosses it.
//!
//! Gauge fixing runs two sweeps. The left sweep visits sites left to right;
//! among rows whose leftmost site is `j` it keeps up to two pivots with
//! independent content at `j` (shortest support first, then lowest index)
//! and multiplies them into the remaining rows, pushing their left endpoint
//! rightwards. The right sweep mirrors this on right endpoints, visiting
//! sites right to left and preferring pivots with the largest left endpoint.
//! A pivot is only ever multiplied into rows whose left endpoint is not
//! larger than its own, so the left endpoints fixed by the first sweep
//! survive the second.

use crate::error::{Error, Result};
use crate::gf2;
use crate::tableau::Tableau;

const NONE: u32 = u32::MAX;

/// Left and right endpoints of every generator, with a per-site index of
/// the rows that end on each site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClipMap {
    left: Vec<u32>,
    right: Vec<u32>,
    /// Up to two distinct rows with an endpoint on each site.
    site_rows: Vec<[u32; 2]>,
    clipped: bool,
}

impl ClipMap {
    /// Builds a clip map from explicit endpoints. `left[i] <= right[i]` is
    /// required for every row.
    pub fn from_extents(n_qubits: usize, left: Vec<u32>, right: Vec<u32>) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::Gauge("left/right endpoint vectors differ in length".into()));
        }
        for (i, (&l, &r)) in left.iter().zip(&right).enumerate() {
            if l > r || r as usize >= n_qubits {
                return Err(Error::Gauge(format!("row {i} has invalid endpoints ({l}, {r})")));
            }
        }
        let mut cm = ClipMap { left, right, site_rows: Vec::new(), clipped: false };
        cm.rebuild_index(n_qubits);
        Ok(cm)
    }

    fn rebuild_index(&mut self, n_qubits: usize) {
        let mut counts = vec![0u8; n_qubits];
        self.site_rows.clear();
        self.site_rows.resize(n_qubits, [NONE; 2]);
        let mut overflow = false;
        for (i, (&l, &r)) in self.left.iter().zip(&self.right).enumerate() {
            counts[l as usize] += 1;
            counts[r as usize] += 1;
            let sites: &[u32] = if l == r { &[l] } else { &[l, r] };
            for &s in sites {
                let slot = &mut self.site_rows[s as usize];
                if slot[0] == NONE {
                    slot[0] = i as u32;
                } else if slot[1] == NONE {
                    slot[1] = i as u32;
                } else {
                    overflow = true;
                }
            }
        }
        self.clipped = !overflow && counts.iter().all(|&c| c == 2);
    }

    pub fn n_rows(&self) -> usize {
        self.left.len()
    }

    pub fn n_sites(&self) -> usize {
        self.site_rows.len()
    }

    #[inline]
    pub fn left(&self, row: usize) -> usize {
        self.left[row] as usize
    }

    #[inline]
    pub fn right(&self, row: usize) -> usize {
        self.right[row] as usize
    }

    /// Whether every site carries exactly two endpoints.
    pub fn is_clipped(&self) -> bool {
        self.clipped
    }

    /// `(left endpoints, right endpoints)` on every site.
    pub fn endpoint_counts(&self) -> Vec<(u32, u32)> {
        let mut counts = vec![(0u32, 0u32); self.n_sites()];
        for (&l, &r) in self.left.iter().zip(&self.right) {
            counts[l as usize].0 += 1;
            counts[r as usize].1 += 1;
        }
        counts
    }

    /// Distinct rows with at least one endpoint on `site`. Meaningful only in
    /// the clipped gauge, where there are at most two.
    #[inline]
    pub fn rows_at_site(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        self.site_rows[site].iter().filter(|&&r| r != NONE).map(|&r| r as usize)
    }

    /// Number of generators whose support crosses bond `a`.
    pub fn crossing_count(&self, a: usize) -> usize {
        self.left
            .iter()
            .zip(&self.right)
            .filter(|(&l, &r)| l as usize <= a && r as usize > a)
            .count()
    }
}

/// Per-bond entanglement `n(a)` in units of ln 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct EntanglementProfile(Vec<u32>);

impl EntanglementProfile {
    pub fn zeros(n_qubits: usize) -> Self {
        EntanglementProfile(vec![0; n_qubits.saturating_sub(1)])
    }

    pub fn from_vec(values: Vec<u32>) -> Self {
        EntanglementProfile(values)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, a: usize) -> u32 {
        self.0[a]
    }

    pub(crate) fn set(&mut self, a: usize, v: u32) {
        self.0[a] = v;
    }

    /// Total entanglement summed over bonds.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&v| v as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    /// Checks `0 <= n(a) <= min(a+1, N-1-a)` and `|n(a) - n(a+1)| <= 1`.
    pub fn check_bounds(&self) -> Result<()> {
        let n = self.0.len() + 1;
        for (a, &v) in self.0.iter().enumerate() {
            let cap = (a + 1).min(n - 1 - a) as u32;
            if v > cap {
                return Err(Error::Gauge(format!("n({a}) = {v} exceeds bound {cap}")));
            }
        }
        if let Some(a) = self.0.windows(2).position(|w| w[0].abs_diff(w[1]) > 1) {
            return Err(Error::Gauge(format!("profile jumps by more than 1 at bond {a}")));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for EntanglementProfile {
    type Output = u32;
    fn index(&self, a: usize) -> &u32 {
        &self.0[a]
    }
}

/// Entanglement profile from a clip map: `n(a)` is half the number of rows
/// with `l <= a < r`.
pub fn profile_from_clipmap(cm: &ClipMap, n_qubits: usize) -> Result<EntanglementProfile> {
    let mut out = EntanglementProfile::zeros(n_qubits);
    fill_profile(cm, &mut out)?;
    Ok(out)
}

fn fill_profile(cm: &ClipMap, out: &mut EntanglementProfile) -> Result<()> {
    let n_bonds = out.0.len();
    let mut diff = vec![0i32; n_bonds + 1];
    for (&l, &r) in cm.left.iter().zip(&cm.right) {
        if l < r {
            diff[l as usize] += 1;
            diff[r as usize] -= 1;
        }
    }
    let mut acc = 0i32;
    for (a, d) in diff.iter().take(n_bonds).enumerate() {
        acc += d;
        if acc % 2 != 0 {
            return Err(Error::Gauge(format!("odd crossing count {acc} at bond {a}")));
        }
        out.0[a] = (acc / 2) as u32;
    }
    Ok(())
}

/// Reusable scratch space for gauge fixing.
#[derive(Default, Debug, Clone)]
pub struct Clipper {
    left: Vec<u32>,
    right: Vec<u32>,
    head: Vec<u32>,
    next: Vec<u32>,
    cands: Vec<u32>,
}

impl Clipper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Brings `t` into the clipped gauge in place and returns its clip map.
    pub fn clip_in_place(&mut self, t: &mut Tableau) -> Result<ClipMap> {
        let mut cm = ClipMap { left: Vec::new(), right: Vec::new(), site_rows: Vec::new(), clipped: false };
        self.clip_into(t, &mut cm)?;
        Ok(cm)
    }

    /// Like [`Clipper::clip_in_place`] but reuses the buffers of `cm`.
    pub fn clip_into(&mut self, t: &mut Tableau, cm: &mut ClipMap) -> Result<()> {
        let n = t.n_qubits();
        self.left.clear();
        self.right.clear();
        for i in 0..n {
            let (l, r) = t.row_extent(i).ok_or_else(|| {
                Error::InvalidState(format!("generator {i} is the identity (rank-deficient tableau)"))
            })?;
            self.left.push(l as u32);
            self.right.push(r as u32);
        }
        self.left_sweep(t)?;
        self.right_sweep(t)?;

        cm.left.clone_from(&self.left);
        cm.right.clone_from(&self.right);
        cm.rebuild_index(n);
        if !cm.clipped {
            return Err(Error::Gauge(
                "gauge fixing did not reach two endpoints per site (rank-deficient input?)".into(),
            ));
        }
        Ok(())
    }

    fn reset_buckets(&mut self, n: usize) {
        self.head.clear();
        self.head.resize(n, NONE);
        self.next.clear();
        self.next.resize(n, NONE);
    }

    #[inline]
    fn push(&mut self, site: u32, row: u32) {
        self.next[row as usize] = self.head[site as usize];
        self.head[site as usize] = row;
    }

    fn take_bucket(&mut self, site: usize) {
        self.cands.clear();
        let mut cur = self.head[site];
        while cur != NONE {
            self.cands.push(cur);
            cur = self.next[cur as usize];
        }
        self.head[site] = NONE;
    }

    fn refresh(&mut self, t: &Tableau, row: usize) -> Result<()> {
        let (l, r) = t.row_extent(row).ok_or_else(|| {
            Error::InvalidState("generators are linearly dependent (rank-deficient tableau)".into())
        })?;
        self.left[row] = l as u32;
        self.right[row] = r as u32;
        Ok(())
    }

    fn left_sweep(&mut self, t: &mut Tableau) -> Result<()> {
        let n = t.n_qubits();
        self.reset_buckets(n);
        for i in (0..n as u32).rev() {
            let l = self.left[i as usize];
            self.push(l, i);
        }
        for j in 0..n {
            self.take_bucket(j);
            if self.cands.len() < 2 {
                continue;
            }
            let right = &self.right;
            self.cands.sort_unstable_by_key(|&i| (right[i as usize], i));
            let cands = std::mem::take(&mut self.cands);
            let p1 = cands[0] as usize;
            let c1 = t.pauli(p1, j);
            let mut p2: Option<(usize, u8)> = None;
            for &c in &cands[1..] {
                let c = c as usize;
                let cc = t.pauli(c, j);
                match p2 {
                    None if cc != c1 => {
                        p2 = Some((c, cc));
                        continue;
                    }
                    _ => {}
                }
                if cc == c1 {
                    t.xor_rows(c, p1);
                } else {
                    let (q, cq) = p2.expect("dependent content needs a second pivot");
                    t.xor_rows(c, q);
                    if cc != cq {
                        t.xor_rows(c, p1);
                    }
                }
                self.refresh(t, c)?;
                debug_assert!(self.left[c] as usize > j);
                let l = self.left[c];
                self.push(l, c as u32);
            }
            self.cands = cands;
        }
        Ok(())
    }

    fn right_sweep(&mut self, t: &mut Tableau) -> Result<()> {
        let n = t.n_qubits();
        self.reset_buckets(n);
        for i in (0..n as u32).rev() {
            let r = self.right[i as usize];
            self.push(r, i);
        }
        for j in (0..n).rev() {
            self.take_bucket(j);
            if self.cands.len() < 2 {
                continue;
            }
            let left = &self.left;
            self.cands.sort_unstable_by_key(|&i| (std::cmp::Reverse(left[i as usize]), i));
            let cands = std::mem::take(&mut self.cands);
            let p1 = cands[0] as usize;
            let c1 = t.pauli(p1, j);
            let mut p2: Option<(usize, u8)> = None;
            for &c in &cands[1..] {
                let c = c as usize;
                let cc = t.pauli(c, j);
                match p2 {
                    None if cc != c1 => {
                        p2 = Some((c, cc));
                        continue;
                    }
                    _ => {}
                }
                let l_before = self.left[c];
                if cc == c1 {
                    t.xor_rows(c, p1);
                } else {
                    let (q, cq) = p2.expect("dependent content needs a second pivot");
                    t.xor_rows(c, q);
                    if cc != cq {
                        t.xor_rows(c, p1);
                    }
                }
                self.refresh(t, c)?;
                debug_assert_eq!(self.left[c], l_before, "right sweep moved a left endpoint");
                debug_assert!((self.right[c] as usize) < j);
                let r = self.right[c];
                self.push(r, c as u32);
            }
            self.cands = cands;
        }
        Ok(())
    }
}

/// Clips a copy of `t` and returns the clipped tableau, its clip map and the
/// entanglement profile.
pub fn clip(t: &Tableau) -> Result<(Tableau, ClipMap, EntanglementProfile)> {
    let mut out = t.clone();
    let cm = Clipper::new().clip_in_place(&mut out)?;
    let profile = profile_from_clipmap(&cm, t.n_qubits())?;
    Ok((out, cm, profile))
}

/// Profile of a clip map, written into an existing buffer.
pub(crate) fn profile_into(cm: &ClipMap, out: &mut EntanglementProfile) -> Result<()> {
    fill_profile(cm, out)
}

/// Entanglement across bond `a` from the GF(2) rank of the generators
/// restricted to sites `0..=a`: `rank - (a + 1)`.
///
/// Independent of the gauge; intended as a test oracle.
pub fn oracle_entanglement(t: &Tableau, a: usize) -> u32 {
    let n = t.n_qubits();
    assert!(a + 1 < n, "bond {a} out of range for {n} qubits");
    let cols = 2 * (a + 1);
    let width = gf2::words_for(cols);
    let mut rows = Vec::with_capacity(n * width);
    for i in 0..n {
        let src = t.row(i);
        for (k, &word) in src.iter().take(width).enumerate() {
            let mut w = word;
            let hi = (k + 1) * 64;
            if hi > cols {
                let keep = cols - k * 64;
                w &= if keep == 64 { u64::MAX } else { (1u64 << keep) - 1 };
            }
            rows.push(w);
        }
    }
    (gf2::rank(rows, width) - (a + 1)) as u32
}
