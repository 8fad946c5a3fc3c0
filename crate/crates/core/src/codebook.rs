//! Hadamard matrices and bi-orthogonal constellation selection.
//!
//! A codebook of `K` bits per symbol takes `2^(K-1)` rows of a Hadamard
//! matrix as data codes; the complement (elementwise negation) of each code
//! carries the same low `K-1` bits with the most significant bit set. The
//! all-ones row is never used: a long run of identical chips looks like a
//! narrowband line at the carrier and is the first thing an interferer masks.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

/// Largest Sylvester exponent accepted, i.e. order 1024.
pub const MAX_SYLVESTER_EXPONENT: u32 = 10;

/// Largest order produced by the Paley construction.
pub const MAX_PALEY_ORDER: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodebookError {
    #[error("Sylvester exponent {0} exceeds the limit of {MAX_SYLVESTER_EXPONENT}")]
    SizeGuard(u32),
    #[error("{0} is not prime")]
    NotPrime(usize),
    #[error("{0} is not congruent to 3 mod 4")]
    NotThreeModFour(usize),
    #[error("Paley order {0} exceeds {MAX_PALEY_ORDER}")]
    PaleyTooLarge(usize),
    #[error("no Hadamard construction wired for order {0}")]
    UnsupportedOrder(usize),
    #[error("matrix is not a Hadamard matrix: {0}")]
    NotHadamard(String),
    #[error("chip sequence is empty")]
    EmptySequence,
    #[error("chip value {0} is not +1 or -1")]
    InvalidChip(i8),
    #[error("bits per symbol must be at least 1, got {0}")]
    ZeroBits(u32),
    #[error("{needed} data codes requested but only {available} balanced rows")]
    NotEnoughRows { needed: usize, available: usize },
    #[error("word {word} out of range for {bits} bits per symbol")]
    WordOutOfRange { word: u32, bits: u32 },
}

/// A sequence of `+1`/`-1` chips.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ChipSequence(Vec<i8>);

impl ChipSequence {
    pub fn new(chips: Vec<i8>) -> Result<Self, CodebookError> {
        if chips.is_empty() {
            return Err(CodebookError::EmptySequence);
        }
        if let Some(&bad) = chips.iter().find(|&&c| c != 1 && c != -1) {
            return Err(CodebookError::InvalidChip(bad));
        }
        Ok(ChipSequence(chips))
    }

    pub fn chips(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of chips; zero for a balanced code.
    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&c| c as i64).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.sum() == 0
    }

    /// Integer correlation at zero lag. Panics on a length mismatch.
    pub fn dot(&self, other: &ChipSequence) -> i64 {
        assert_eq!(self.len(), other.len(), "chip sequence length mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a as i64) * (b as i64))
            .sum()
    }

    pub fn negated(&self) -> ChipSequence {
        ChipSequence(self.0.iter().map(|&c| -c).collect())
    }

    pub fn transitions(&self) -> usize {
        self.0.windows(2).filter(|w| w[0] != w[1]).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }
}

impl fmt::Debug for ChipSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChipSequence({self})")
    }
}

impl fmt::Display for ChipSequence {
    /// Space-separated `+1`/`-1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(if c > 0 { "+1" } else { "-1" })?;
        }
        Ok(())
    }
}

/// Number of adjacent chip pairs with opposite sign.
pub fn transitions(chips: &[i8]) -> Result<usize, CodebookError> {
    if chips.is_empty() {
        return Err(CodebookError::EmptySequence);
    }
    Ok(chips.windows(2).filter(|w| w[0] != w[1]).count())
}

/// Square `+1`/`-1` matrix with mutually orthogonal rows.
#[derive(Clone, PartialEq, Eq)]
pub struct HadamardMatrix {
    rows: Vec<Vec<i8>>,
}

impl fmt::Debug for HadamardMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "HadamardMatrix(order {})", self.order())?;
        for row in &self.rows {
            for &c in row {
                f.write_str(if c > 0 { "+" } else { "-" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl HadamardMatrix {
    /// Validates squareness, entries and `H·Hᵀ = N·I`.
    pub fn from_rows(rows: Vec<Vec<i8>>) -> Result<Self, CodebookError> {
        let n = rows.len();
        if n == 0 {
            return Err(CodebookError::NotHadamard("no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CodebookError::NotHadamard(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&c| c != 1 && c != -1) {
                return Err(CodebookError::InvalidChip(bad));
            }
        }
        let h = HadamardMatrix { rows };
        let gram = h.gram();
        for (i, g) in gram.iter().enumerate() {
            for (j, &v) in g.iter().enumerate() {
                let expected = if i == j { n as i64 } else { 0 };
                if v != expected {
                    return Err(CodebookError::NotHadamard(format!(
                        "rows {i} and {j} correlate to {v}"
                    )));
                }
            }
        }
        Ok(h)
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<i8>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> ChipSequence {
        ChipSequence(self.rows[i].clone())
    }

    /// `H·Hᵀ` in exact integer arithmetic.
    pub fn gram(&self) -> Vec<Vec<i64>> {
        self.rows
            .iter()
            .map(|a| {
                self.rows
                    .iter()
                    .map(|b| a.iter().zip(b).map(|(&x, &y)| (x as i64) * (y as i64)).sum())
                    .collect()
            })
            .collect()
    }

    /// First row and first column all `+1`.
    pub fn is_standard_form(&self) -> bool {
        self.rows[0].iter().all(|&c| c == 1) && self.rows.iter().all(|r| r[0] == 1)
    }

    /// Negates rows, then columns, so that the first column and first row are all `+1`.
    pub fn normalized(mut self) -> Self {
        for row in self.rows.iter_mut() {
            if row[0] < 0 {
                row.iter_mut().for_each(|c| *c = -*c);
            }
        }
        let flip: Vec<bool> = self.rows[0].iter().map(|&c| c < 0).collect();
        for row in self.rows.iter_mut() {
            for (c, &f) in row.iter_mut().zip(&flip) {
                if f {
                    *c = -*c;
                }
            }
        }
        self
    }

    /// Index of the all-ones row, if present.
    pub fn all_ones_row(&self) -> Option<usize> {
        self.rows.iter().position(|r| r.iter().all(|&c| c == 1))
    }
}

/// Order-`2^m` Sylvester matrix.
pub fn sylvester(m: u32) -> Result<HadamardMatrix, CodebookError> {
    if m > MAX_SYLVESTER_EXPONENT {
        return Err(CodebookError::SizeGuard(m));
    }
    let mut h = HadamardMatrix { rows: vec![vec![1]] };
    for _ in 0..m {
        h = double(&h);
    }
    Ok(h)
}

/// `[[H, H], [H, -H]]`.
pub fn double(h: &HadamardMatrix) -> HadamardMatrix {
    let n = h.order();
    let mut rows = Vec::with_capacity(2 * n);
    for r in &h.rows {
        let mut top = r.clone();
        top.extend_from_slice(r);
        rows.push(top);
    }
    for r in &h.rows {
        let mut bottom = r.clone();
        bottom.extend(r.iter().map(|&c| -c));
        rows.push(bottom);
    }
    HadamardMatrix { rows }
}

fn is_prime(q: usize) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Paley type-I matrix of order `q + 1` for a prime `q ≡ 3 (mod 4)`,
/// returned in standard form.
///
/// Built as `I + S` where `S = [[0, 1ᵀ], [-1, Q]]` and `Q` is the
/// Jacobsthal matrix `Q[i][j] = χ(j - i)` of the quadratic character mod `q`.
pub fn paley(q: usize) -> Result<HadamardMatrix, CodebookError> {
    if !is_prime(q) {
        return Err(CodebookError::NotPrime(q));
    }
    if q % 4 != 3 {
        return Err(CodebookError::NotThreeModFour(q));
    }
    if q + 1 > MAX_PALEY_ORDER {
        return Err(CodebookError::PaleyTooLarge(q + 1));
    }
    let mut residue = vec![false; q];
    for x in 1..q {
        residue[(x * x) % q] = true;
    }
    let chi = |a: usize| -> i8 {
        if a == 0 {
            0
        } else if residue[a] {
            1
        } else {
            -1
        }
    };

    let n = q + 1;
    let mut rows = vec![vec![0i8; n]; n];
    rows[0][1..].fill(1);
    for i in 1..n {
        rows[i][0] = -1;
        for j in 1..n {
            rows[i][j] = chi((j + q - i) % q);
        }
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] += 1;
    }
    HadamardMatrix::from_rows(rows).map(HadamardMatrix::normalized)
}

/// Dispatches an order to the construction that produces it.
///
/// Powers of two up to 64 use Sylvester; 12 and 20 use Paley with
/// `q = 11, 19`; 24 and 40 double those.
pub fn build_hadamard(order: usize) -> Result<HadamardMatrix, CodebookError> {
    match order {
        12 => paley(11),
        20 => paley(19),
        24 => paley(11).map(|h| double(&h)),
        40 => paley(19).map(|h| double(&h)),
        n if n.is_power_of_two() && n <= 64 => sylvester(n.trailing_zeros()),
        n => Err(CodebookError::UnsupportedOrder(n)),
    }
}

/// A `2^K`-ary bi-orthogonal constellation drawn from one Hadamard matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    order: usize,
    bits_per_symbol: u32,
    data_codes: Vec<ChipSequence>,
    data_rows: Vec<usize>,
    sync_code: Option<ChipSequence>,
    sync_row: Option<usize>,
    unused_rows: Vec<usize>,
    unused: Vec<ChipSequence>,
}

impl Codebook {
    /// Selects `2^(K-1)` data codes and one sync code from `h`.
    ///
    /// Balanced rows are ranked by transition count (descending), ties going
    /// to the lower row index. The top `2^(K-1)` become data codes, kept in
    /// original row order; the next becomes the sync code. Everything else,
    /// including the all-ones row, is listed as unused.
    ///
    /// A matrix with exactly `2^(K-1)` balanced rows yields a codebook with
    /// no sync code; such a codebook can encode symbols but cannot frame.
    pub fn select(h: &HadamardMatrix, bits_per_symbol: u32) -> Result<Self, CodebookError> {
        if bits_per_symbol == 0 {
            return Err(CodebookError::ZeroBits(0));
        }
        let needed = 1usize
            .checked_shl(bits_per_symbol - 1)
            .filter(|&n| n <= h.order())
            .ok_or(CodebookError::NotEnoughRows {
                needed: usize::MAX,
                available: h.order(),
            })?;

        let mut ranked: Vec<(usize, usize)> = h
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.iter().map(|&c| c as i64).sum::<i64>() == 0)
            .map(|(i, r)| (i, transitions(r).unwrap_or(0)))
            .collect();
        if ranked.len() < needed {
            return Err(CodebookError::NotEnoughRows {
                needed,
                available: ranked.len(),
            });
        }
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut data_rows: Vec<usize> = ranked[..needed].iter().map(|&(i, _)| i).collect();
        data_rows.sort_unstable();
        let sync_row = ranked.get(needed).map(|&(i, _)| i);
        let unused_rows: Vec<usize> = (0..h.order())
            .filter(|i| !data_rows.contains(i) && Some(*i) != sync_row)
            .collect();

        Ok(Codebook {
            order: h.order(),
            bits_per_symbol,
            data_codes: data_rows.iter().map(|&i| h.row(i)).collect(),
            data_rows,
            sync_code: sync_row.map(|i| h.row(i)),
            sync_row,
            unused: unused_rows.iter().map(|&i| h.row(i)).collect(),
            unused_rows,
        })
    }

    /// Builds the Hadamard matrix of the given order and selects from it.
    pub fn for_order(order: usize, bits_per_symbol: u32) -> Result<Self, CodebookError> {
        Codebook::select(&build_hadamard(order)?, bits_per_symbol)
    }

    /// Code length `N`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `K`.
    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    /// `M = 2^K`.
    pub fn constellation_size(&self) -> usize {
        1 << self.bits_per_symbol
    }

    pub fn data_codes(&self) -> &[ChipSequence] {
        &self.data_codes
    }

    /// Source row of each data code in the Hadamard matrix.
    pub fn data_rows(&self) -> &[usize] {
        &self.data_rows
    }

    pub fn sync_code(&self) -> Option<&ChipSequence> {
        self.sync_code.as_ref()
    }

    pub fn sync_row(&self) -> Option<usize> {
        self.sync_row
    }

    pub fn unused_rows(&self) -> &[usize] {
        &self.unused_rows
    }

    pub fn unused(&self) -> &[ChipSequence] {
        &self.unused
    }

    fn complement_bit(&self) -> u32 {
        1 << (self.bits_per_symbol - 1)
    }

    /// `(code index, complement flag)` for a `K`-bit word. The low `K-1`
    /// bits pick the code; the most significant bit selects its complement.
    pub fn bit_map(&self, word: u32) -> Result<(usize, bool), CodebookError> {
        if (word as u64) >= (1u64 << self.bits_per_symbol) {
            return Err(CodebookError::WordOutOfRange {
                word,
                bits: self.bits_per_symbol,
            });
        }
        let msb = self.complement_bit();
        Ok(((word & (msb - 1)) as usize, word & msb != 0))
    }

    /// Inverse of [`Codebook::bit_map`].
    pub fn word_for(&self, code_index: usize, complement: bool) -> u32 {
        code_index as u32 | if complement { self.complement_bit() } else { 0 }
    }

    pub fn encode_bits(&self, word: u32) -> Result<ChipSequence, CodebookError> {
        let (idx, complement) = self.bit_map(word)?;
        let code = &self.data_codes[idx];
        Ok(if complement { code.negated() } else { code.clone() })
    }

    /// All `2^K` constellation sequences, indexed by word.
    pub fn constellation(&self) -> Vec<ChipSequence> {
        (0..self.constellation_size() as u32)
            .map(|w| self.encode_bits(w).expect("word in range"))
            .collect()
    }

    /// `word,complement_flag,chips` CSV: one row per constellation word,
    /// then a `sync` row when a sync code was selected.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "word,complement_flag,chips")?;
        let k = self.bits_per_symbol as usize;
        for w in 0..self.constellation_size() as u32 {
            let (_, complement) = self.bit_map(w).expect("word in range");
            let chips = self.encode_bits(w).expect("word in range");
            writeln!(out, "{w:0k$b},{},{chips}", complement as u8)?;
        }
        if let Some(sync) = &self.sync_code {
            writeln!(out, "sync,0,{sync}")?;
        }
        Ok(())
    }
}
