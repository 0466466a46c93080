//! Phaseless stabilizer tableaus and two-qubit Clifford gates.
//!
//! A [`Tableau`] stores `N` stabilizer generators as bit-packed rows of `2N`
//! bits. Columns are site-major: site `j` occupies bit `2j` (X part) and
//! `2j + 1` (Z part), so a gate on bond `a` touches the four contiguous bits
//! `2a..2a + 4` of every row. Phases and destabilizers are not tracked.

use std::fmt;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2;

/// Single-site Pauli content as a 2-bit value: bit 0 = X, bit 1 = Z.
pub type LocalPauli = u8;

pub const PAULI_I: LocalPauli = 0;
pub const PAULI_X: LocalPauli = 1;
pub const PAULI_Z: LocalPauli = 2;
pub const PAULI_Y: LocalPauli = 3;

const EVEN_BITS: u64 = 0x5555_5555_5555_5555;

/// Binary symplectic product of two Pauli rows in site-major layout.
///
/// Returns `false` when the two strings commute.
pub fn symplectic_product(a: &[u64], b: &[u64]) -> bool {
    assert_eq!(a.len(), b.len(), "rows must have equal length");
    let mut acc = 0u32;
    for (&u, &v) in a.iter().zip(b) {
        let (ux, uz) = (u & EVEN_BITS, (u >> 1) & EVEN_BITS);
        let (vx, vz) = (v & EVEN_BITS, (v >> 1) & EVEN_BITS);
        acc ^= ((ux & vz) ^ (uz & vx)).count_ones() & 1;
    }
    acc == 1
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Tableau {
    n: usize,
    width: usize,
    bits: Vec<u64>,
}

impl Tableau {
    /// The all-zero product state: generator `i` is `Z_i`.
    pub fn new_product_state(n_qubits: usize) -> Result<Self> {
        let mut t = Self::zeroed(n_qubits)?;
        for i in 0..n_qubits {
            t.set_pauli(i, i, PAULI_Z);
        }
        Ok(t)
    }

    pub(crate) fn zeroed(n_qubits: usize) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::InvalidSize { n: n_qubits, min: 2 });
        }
        let width = gf2::words_for(2 * n_qubits);
        Ok(Tableau { n: n_qubits, width, bits: vec![0; n_qubits * width] })
    }

    /// Builds a tableau from Pauli strings such as `"XXI"`, one per generator,
    /// and checks every tableau invariant.
    pub fn from_paulis<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let n = rows.len();
        let mut t = Self::zeroed(n)?;
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != n {
                return Err(Error::Parse(format!(
                    "row {i} ({row:?}) has length {}, expected {n}",
                    row.chars().count()
                )));
            }
            for (j, ch) in row.chars().enumerate() {
                let p = match ch.to_ascii_uppercase() {
                    'I' | '.' | '_' => PAULI_I,
                    'X' => PAULI_X,
                    'Y' => PAULI_Y,
                    'Z' => PAULI_Z,
                    other => return Err(Error::Parse(format!("unknown Pauli {other:?}"))),
                };
                t.set_pauli(i, j, p);
            }
        }
        t.validate()?;
        Ok(t)
    }

    /// Builds a tableau from raw bit rows (`words_per_row` words each) and
    /// validates it.
    pub fn from_words(n_qubits: usize, bits: Vec<u64>) -> Result<Self> {
        let mut t = Self::zeroed(n_qubits)?;
        if bits.len() != t.bits.len() {
            return Err(Error::Parse(format!(
                "expected {} words, got {}",
                t.bits.len(),
                bits.len()
            )));
        }
        t.bits = bits;
        t.validate()?;
        Ok(t)
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn words_per_row(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.width..(i + 1) * self.width]
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    #[inline]
    pub fn pauli(&self, row: usize, site: usize) -> LocalPauli {
        let idx = 2 * site;
        ((self.bits[row * self.width + idx / 64] >> (idx % 64)) & 3) as u8
    }

    #[inline]
    pub(crate) fn set_pauli(&mut self, row: usize, site: usize, p: LocalPauli) {
        let idx = 2 * site;
        let w = &mut self.bits[row * self.width + idx / 64];
        *w = (*w & !(3 << (idx % 64))) | (((p & 3) as u64) << (idx % 64));
    }

    /// `row[dst] ^= row[src]`, i.e. replaces generator `dst` by the product.
    #[inline]
    pub(crate) fn xor_rows(&mut self, dst: usize, src: usize) {
        debug_assert_ne!(dst, src);
        let w = self.width;
        for k in 0..w {
            let v = self.bits[src * w + k];
            self.bits[dst * w + k] ^= v;
        }
    }

    /// Leftmost and rightmost nontrivial sites of a row, or `None` for the
    /// identity string.
    #[inline]
    pub fn row_extent(&self, i: usize) -> Option<(usize, usize)> {
        let row = self.row(i);
        let first = row.iter().position(|&w| w != 0)?;
        let last = row.iter().rposition(|&w| w != 0)?;
        let lo = first * 64 + row[first].trailing_zeros() as usize;
        let hi = last * 64 + 63 - row[last].leading_zeros() as usize;
        Some((lo / 2, hi / 2))
    }

    /// The 4-bit local content of a row on sites `(a, a + 1)`:
    /// bits are `x_a, z_a, x_{a+1}, z_{a+1}` from least significant.
    #[inline]
    pub fn local_window(&self, row: usize, a: usize) -> u8 {
        let start = 2 * a;
        let (w, off) = (start / 64, start % 64);
        let base = row * self.width;
        let mut v = self.bits[base + w] >> off;
        if off > 60 {
            v |= self.bits[base + w + 1] << (64 - off);
        }
        (v & 0xF) as u8
    }

    #[inline]
    fn set_local_window(&mut self, row: usize, a: usize, value: u8) {
        let start = 2 * a;
        let (w, off) = (start / 64, start % 64);
        let base = row * self.width;
        let value = (value & 0xF) as u64;
        let word = &mut self.bits[base + w];
        *word = (*word & !(0xF << off)) | (value << off);
        if off > 60 {
            let spill = 64 - off;
            let hi = &mut self.bits[base + w + 1];
            *hi = (*hi & !(0xF >> spill)) | (value >> spill);
        }
    }

    /// Applies a two-qubit gate on sites `(a, a + 1)`.
    pub fn apply_gate(&mut self, gate: &CliffordGate2, a: usize) -> Result<()> {
        if a + 1 >= self.n {
            return Err(Error::BondOutOfRange { bond: a, n: self.n });
        }
        self.apply_gate_unchecked(gate, a);
        Ok(())
    }

    #[inline]
    pub(crate) fn apply_gate_unchecked(&mut self, gate: &CliffordGate2, a: usize) {
        let start = 2 * a;
        let (w, off) = (start / 64, start % 64);
        if off <= 60 {
            let mask = 0xFu64 << off;
            for i in 0..self.n {
                let word = &mut self.bits[i * self.width + w];
                let local = ((*word >> off) & 0xF) as usize;
                if local != 0 {
                    *word = (*word & !mask) | ((gate.table[local] as u64) << off);
                }
            }
        } else {
            for i in 0..self.n {
                let local = self.local_window(i, a);
                if local != 0 {
                    self.set_local_window(i, a, gate.table[local as usize]);
                }
            }
        }
    }

    /// Checks that generators are nonzero, pairwise commuting and independent.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            if self.row(i).iter().all(|&w| w == 0) {
                return Err(Error::InvalidState(format!("generator {i} is the identity")));
            }
        }
        for i in 0..self.n {
            for k in i + 1..self.n {
                if symplectic_product(self.row(i), self.row(k)) {
                    return Err(Error::InvalidState(format!(
                        "generators {i} and {k} anticommute"
                    )));
                }
            }
        }
        let rank = gf2::rank(self.bits.clone(), self.width);
        if rank != self.n {
            return Err(Error::InvalidState(format!(
                "generators have rank {rank}, expected {}",
                self.n
            )));
        }
        Ok(())
    }

    pub fn pauli_string(&self, row: usize) -> String {
        (0..self.n)
            .map(|j| match self.pauli(row, j) {
                PAULI_X => 'X',
                PAULI_Z => 'Z',
                PAULI_Y => 'Y',
                _ => 'I',
            })
            .collect()
    }

    /// Applies `depth` uniformly random gates at uniformly random bonds.
    pub fn scramble<R: Rng + ?Sized>(&mut self, gates: &GateSet, depth: usize, rng: &mut R) {
        for _ in 0..depth {
            let g = gates.sample(rng);
            let a = rng.random_range(0..self.n - 1);
            self.apply_gate_unchecked(g, a);
        }
    }

    /// Overwrites `self` with the contents of `other` (same size) without
    /// reallocating.
    pub(crate) fn copy_from(&mut self, other: &Tableau) {
        debug_assert_eq!(self.n, other.n);
        self.bits.copy_from_slice(&other.bits);
    }
}

impl fmt::Debug for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.n).map(|i| self.pauli_string(i))).finish()
    }
}

impl fmt::Display for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            writeln!(f, "{}", self.pauli_string(i))?;
        }
        Ok(())
    }
}

/// A two-qubit Clifford gate modulo phases: a 4x4 binary symplectic matrix.
///
/// The matrix is indexed by the local generators in the order
/// `X_1, X_2, Z_1, Z_2`; column `c` holds the image of generator `c`, so a
/// local Pauli vector `v` maps to `M v`. The CNOT matrix therefore reads
///
/// ```text
///       X1 X2 Z1 Z2
///  X1 [ 1  0  0  0 ]
///  X2 [ 1  1  0  0 ]
///  Z1 [ 0  0  1  1 ]
///  Z2 [ 0  0  0  1 ]
/// ```
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CliffordGate2 {
    /// Row-major matrix bits, entry `(r, c)` at bit `15 - (4r + c)`.
    bits: u16,
    /// Action on site-major local nibbles `x_a, z_a, x_b, z_b`.
    table: [u8; 16],
}

impl CliffordGate2 {
    pub const IDENTITY_BITS: u16 = 0b1000_0100_0010_0001;

    /// Builds a gate from its matrix bits without checking invariants.
    fn from_bits_raw(bits: u16) -> Self {
        let mut g = CliffordGate2 { bits, table: [0; 16] };
        for local in 0..16u8 {
            g.table[local as usize] = g.map_site_major(local);
        }
        g
    }

    /// Builds a gate from matrix bits, rejecting non-symplectic matrices.
    pub fn from_bits(bits: u16) -> Option<Self> {
        is_symplectic(bits).then(|| Self::from_bits_raw(bits))
    }

    pub fn from_matrix(m: [[u8; 4]; 4]) -> Option<Self> {
        let mut bits = 0u16;
        for (r, row) in m.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v & 1 == 1 {
                    bits |= 1 << (15 - (4 * r + c));
                }
            }
        }
        Self::from_bits(bits)
    }

    pub fn identity() -> Self {
        Self::from_bits_raw(Self::IDENTITY_BITS)
    }

    pub fn cnot() -> Self {
        Self::from_matrix([[1, 0, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1]])
            .expect("CNOT is symplectic")
    }

    pub fn swap() -> Self {
        Self::from_matrix([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
            .expect("SWAP is symplectic")
    }

    #[inline]
    pub fn bits(&self) -> u16 {
        self.bits
    }

    pub fn matrix(&self) -> [[u8; 4]; 4] {
        let mut m = [[0u8; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = entry(self.bits, r, c);
            }
        }
        m
    }

    pub fn is_identity(&self) -> bool {
        self.bits == Self::IDENTITY_BITS
    }

    /// Image of a site-major local nibble (`x_a, z_a, x_b, z_b`).
    #[inline]
    pub fn apply_local(&self, local: u8) -> u8 {
        self.table[(local & 0xF) as usize]
    }

    fn map_site_major(&self, local: u8) -> u8 {
        let g = site_major_to_generators(local);
        generators_to_site_major(mat_vec(self.bits, g))
    }

    /// The gate that applies `self` first and `then` afterwards.
    pub fn then(&self, then: &CliffordGate2) -> CliffordGate2 {
        CliffordGate2::from_bits_raw(mat_mul(then.bits, self.bits))
    }

    pub fn inverse(&self) -> CliffordGate2 {
        CliffordGate2::from_bits_raw(mat_inverse(self.bits).expect("symplectic matrices are invertible"))
    }
}

impl fmt::Debug for CliffordGate2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CliffordGate2({:04x})", self.bits)
    }
}

#[inline]
fn entry(bits: u16, r: usize, c: usize) -> u8 {
    ((bits >> (15 - (4 * r + c))) & 1) as u8
}

/// Generator-ordered vector bit `k` corresponds to generator `k` of
/// `X_1, X_2, Z_1, Z_2`.
fn site_major_to_generators(local: u8) -> u8 {
    let (xa, za, xb, zb) = (local & 1, (local >> 1) & 1, (local >> 2) & 1, (local >> 3) & 1);
    xa | (xb << 1) | (za << 2) | (zb << 3)
}

fn generators_to_site_major(g: u8) -> u8 {
    let (x1, x2, z1, z2) = (g & 1, (g >> 1) & 1, (g >> 2) & 1, (g >> 3) & 1);
    x1 | (z1 << 1) | (x2 << 2) | (z2 << 3)
}

fn mat_vec(bits: u16, v: u8) -> u8 {
    let mut out = 0u8;
    for r in 0..4 {
        let mut acc = 0u8;
        for c in 0..4 {
            acc ^= entry(bits, r, c) & ((v >> c) & 1);
        }
        out |= acc << r;
    }
    out
}

fn mat_mul(a: u16, b: u16) -> u16 {
    let mut out = 0u16;
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = 0u8;
            for k in 0..4 {
                acc ^= entry(a, r, k) & entry(b, k, c);
            }
            if acc == 1 {
                out |= 1 << (15 - (4 * r + c));
            }
        }
    }
    out
}

fn mat_inverse(bits: u16) -> Option<u16> {
    // Gauss-Jordan on [M | I] with rows packed as 8-bit values
    let mut rows = [0u16; 4];
    for (r, row) in rows.iter_mut().enumerate() {
        let mut v = 0u16;
        for c in 0..4 {
            v |= (entry(bits, r, c) as u16) << c;
        }
        *row = v | (1 << (4 + r));
    }
    for col in 0..4 {
        let pivot = (col..4).find(|&r| (rows[r] >> col) & 1 == 1)?;
        rows.swap(col, pivot);
        for r in 0..4 {
            if r != col && (rows[r] >> col) & 1 == 1 {
                rows[r] ^= rows[col];
            }
        }
    }
    let mut out = 0u16;
    for (r, row) in rows.iter().enumerate() {
        for c in 0..4 {
            if (row >> (4 + c)) & 1 == 1 {
                out |= 1 << (15 - (4 * r + c));
            }
        }
    }
    Some(out)
}

/// Symplectic form on generator-ordered vectors.
fn omega(u: u8, v: u8) -> u8 {
    let (ux, uz) = (u & 3, (u >> 2) & 3);
    let (vx, vz) = (v & 3, (v >> 2) & 3);
    (((ux & vz) ^ (uz & vx)).count_ones() & 1) as u8
}

/// Whether the matrix preserves the symplectic form on all generator pairs.
pub fn is_symplectic(bits: u16) -> bool {
    let images: Vec<u8> = (0..4).map(|c| mat_vec(bits, 1 << c)).collect();
    for i in 0..4 {
        for j in 0..4 {
            if omega(images[i], images[j]) != omega(1 << i, 1 << j) {
                return false;
            }
        }
    }
    true
}

/// Whether the matrix is invertible over GF(2).
pub fn is_invertible(bits: u16) -> bool {
    mat_inverse(bits).is_some()
}

/// All two-qubit Clifford gates modulo phases, in a fixed order.
///
/// Gates are sorted by their matrix bits with the identity moved to index 0.
#[derive(Clone, Debug)]
pub struct GateSet {
    gates: Vec<CliffordGate2>,
}

impl GateSet {
    pub fn enumerate_c2() -> Self {
        let mut gates: Vec<CliffordGate2> = (0..=u16::MAX)
            .filter(|&bits| is_symplectic(bits))
            .map(CliffordGate2::from_bits_raw)
            .collect();
        let id = gates
            .iter()
            .position(|g| g.is_identity())
            .expect("identity is symplectic");
        let identity = gates.remove(id);
        gates.insert(0, identity);
        GateSet { gates }
    }

    /// Process-wide copy of the full two-qubit Clifford group.
    pub fn c2() -> &'static GateSet {
        static C2: OnceLock<GateSet> = OnceLock::new();
        C2.get_or_init(GateSet::enumerate_c2)
    }

    /// A gate set holding exactly the given gates, in order.
    pub fn from_gates(gates: Vec<CliffordGate2>) -> Self {
        assert!(!gates.is_empty(), "gate set must be nonempty");
        GateSet { gates }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn get(&self, index: usize) -> &CliffordGate2 {
        &self.gates[index]
    }

    pub fn gates(&self) -> &[CliffordGate2] {
        &self.gates
    }

    pub fn iter(&self) -> impl Iterator<Item = &CliffordGate2> {
        self.gates.iter()
    }

    pub fn index_of(&self, gate: &CliffordGate2) -> Option<usize> {
        self.gates.iter().position(|g| g == gate)
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.gates.len())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &CliffordGate2 {
        &self.gates[self.sample_index(rng)]
    }
}
