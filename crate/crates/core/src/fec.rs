//! Regular LDPC outer code.
//!
//! Codes are built by randomly pairing variable and check sockets, then
//! swapping edges to remove repeated edges and as many 4-cycles as a greedy
//! pass can find. Columns are permuted after Gaussian elimination so that
//! codewords are systematic: information bits first, parity bits last.
//! Decoding is flooding normalized min-sum.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Check-to-variable scaling for normalized min-sum.
pub const MIN_SUM_SCALE: f64 = 0.75;

pub const DEFAULT_MAX_ITERATIONS: usize = 50;

pub const MAX_BLOCK_LENGTH: usize = 4096;

const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FecError {
    #[error("incompatible regular code: n={n}, column weight {col_weight}, row weight {row_weight}")]
    Incompatible {
        n: usize,
        col_weight: usize,
        row_weight: usize,
    },
    #[error("no full-rank parity-check matrix after {0} attempts")]
    RankDeficient(usize),
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bit value {0} is not 0 or 1")]
    InvalidBit(u8),
    #[error("noise variance must be positive and finite, got {0}")]
    NoiseVariance(f64),
    #[error("metric count {0} is not a power of two")]
    MetricCount(usize),
    #[error("non-finite symbol metric")]
    NonFinite,
    #[error("alist parse error: {0}")]
    Alist(String),
}

/// Dense GF(2) row.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitRow(Vec<u64>);

impl BitRow {
    fn zeros(len: usize) -> Self {
        BitRow(vec![0; len.div_ceil(64)])
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn xor_with(&mut self, other: &BitRow) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn parity_with(&self, other: &BitRow) -> u8 {
        (self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones())
            .sum::<u32>()
            & 1) as u8
    }
}

/// Reduced row echelon form, choosing pivot columns from the right.
/// Returns the reduced rows (first `rank` rows meaningful) and pivot columns.
fn eliminate(mut rows: Vec<BitRow>, width: usize) -> (Vec<BitRow>, Vec<usize>) {
    let mut pivots = Vec::new();
    for col in (0..width).rev() {
        let rank = pivots.len();
        let Some(found) = (rank..rows.len()).find(|&r| rows[r].get(col)) else {
            continue;
        };
        rows.swap(rank, found);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row.get(col) {
                row.xor_with(&pivot_row);
            }
        }
        pivots.push(col);
        if pivots.len() == rows.len() {
            break;
        }
    }
    (rows, pivots)
}

fn dense_rows(n: usize, checks: &[Vec<usize>]) -> Vec<BitRow> {
    checks
        .iter()
        .map(|c| {
            let mut row = BitRow::zeros(n);
            for &v in c {
                row.set(v);
            }
            row
        })
        .collect()
}

/// Rank over GF(2) of a sparse parity-check matrix.
pub fn gf2_rank(n: usize, checks: &[Vec<usize>]) -> usize {
    eliminate(dense_rows(n, checks), n).1.len()
}

/// Number of 4-cycles: pairs of checks sharing two or more variables.
pub fn count_four_cycles(n: usize, checks: &[Vec<usize>]) -> usize {
    let vars = variable_adjacency(n, checks);
    let mut total = 0;
    let mut overlap = vec![0usize; checks.len()];
    for (c, vs) in checks.iter().enumerate() {
        overlap.iter_mut().for_each(|o| *o = 0);
        for &v in vs {
            for &c2 in &vars[v] {
                if c2 > c {
                    overlap[c2] += 1;
                }
            }
        }
        total += overlap.iter().map(|&o| o * o.saturating_sub(1) / 2).sum::<usize>();
    }
    total
}

fn variable_adjacency(n: usize, checks: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut vars = vec![Vec::new(); n];
    for (c, vs) in checks.iter().enumerate() {
        for &v in vs {
            vars[v].push(c);
        }
    }
    vars
}

/// Result of one decoding attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    col_weight: usize,
    row_weight: usize,
    checks: Vec<Vec<usize>>,
    vars: Vec<Vec<usize>>,
    /// Row `i` gives parity bit `k + i` as a GF(2) combination of the info bits.
    parity: Vec<BitRow>,
}

struct EdgeGraph {
    /// Check index of each edge; edge `e` belongs to variable `e / col_weight`.
    edge_check: Vec<usize>,
    col_weight: usize,
    m: usize,
}

impl EdgeGraph {
    fn random<R: Rng>(n: usize, m: usize, col_weight: usize, row_weight: usize, rng: &mut R) -> Self {
        let mut edge_check: Vec<usize> = (0..m).flat_map(|c| std::iter::repeat_n(c, row_weight)).collect();
        edge_check.shuffle(rng);
        debug_assert_eq!(edge_check.len(), n * col_weight);
        EdgeGraph {
            edge_check,
            col_weight,
            m,
        }
    }

    fn var_of(&self, e: usize) -> usize {
        e / self.col_weight
    }

    fn checks_of(&self, v: usize) -> &[usize] {
        &self.edge_check[v * self.col_weight..(v + 1) * self.col_weight]
    }

    fn has_duplicate(&self, v: usize) -> bool {
        let cs = self.checks_of(v);
        (0..cs.len()).any(|i| cs[i + 1..].contains(&cs[i]))
    }

    fn check_lists(&self) -> Vec<Vec<usize>> {
        let mut checks = vec![Vec::new(); self.m];
        for (e, &c) in self.edge_check.iter().enumerate() {
            checks[c].push(self.var_of(e));
        }
        checks
    }

    /// Swaps the check endpoints of two edges unless that repeats an edge.
    fn try_swap(&mut self, e1: usize, e2: usize) -> bool {
        if self.edge_check[e1] == self.edge_check[e2] || self.var_of(e1) == self.var_of(e2) {
            return false;
        }
        self.edge_check.swap(e1, e2);
        if self.has_duplicate(self.var_of(e1)) || self.has_duplicate(self.var_of(e2)) {
            self.edge_check.swap(e1, e2);
            return false;
        }
        true
    }

    fn remove_duplicates<R: Rng>(&mut self, rng: &mut R) -> bool {
        let edges = self.edge_check.len();
        for _ in 0..edges * 50 {
            let Some(v) = (0..edges / self.col_weight).find(|&v| self.has_duplicate(v)) else {
                return true;
            };
            let e1 = v * self.col_weight + rng.random_range(0..self.col_weight);
            let e2 = rng.random_range(0..edges);
            self.edge_check.swap(e1, e2);
            let bad_after = self.has_duplicate(self.var_of(e1)) as u8 + self.has_duplicate(self.var_of(e2)) as u8;
            self.edge_check.swap(e1, e2);
            let bad_before = self.has_duplicate(self.var_of(e1)) as u8 + self.has_duplicate(self.var_of(e2)) as u8;
            if bad_after < bad_before {
                self.edge_check.swap(e1, e2);
            }
        }
        false
    }

    /// 4-cycles that pass through check `c`.
    fn cycles_at(&self, checks: &[Vec<usize>], c: usize, overlap: &mut [usize]) -> usize {
        overlap.iter_mut().for_each(|o| *o = 0);
        for &v in &checks[c] {
            for &c2 in self.checks_of(v) {
                if c2 != c {
                    overlap[c2] += 1;
                }
            }
        }
        overlap.iter().map(|&o| o * o.saturating_sub(1) / 2).sum()
    }

    fn reduce_four_cycles<R: Rng>(&mut self, rng: &mut R) {
        let edges = self.edge_check.len();
        let mut overlap = vec![0usize; self.m];
        let mut checks = self.check_lists();
        let n = edges / self.col_weight;
        let mut total = count_four_cycles(n, &checks);
        let mut attempts = 0;
        while total > 0 && attempts < edges * 200 {
            attempts += 1;
            let e1 = rng.random_range(0..edges);
            let e2 = rng.random_range(0..edges);
            let (c1, c2) = (self.edge_check[e1], self.edge_check[e2]);
            let (v1, v2) = (self.var_of(e1), self.var_of(e2));
            if c1 == c2 {
                continue;
            }
            let before = self.cycles_at(&checks, c1, &mut overlap) + self.cycles_at(&checks, c2, &mut overlap);
            if !self.try_swap(e1, e2) {
                continue;
            }
            replace(&mut checks[c1], v1, v2);
            replace(&mut checks[c2], v2, v1);
            let after = self.cycles_at(&checks, c1, &mut overlap) + self.cycles_at(&checks, c2, &mut overlap);
            if after < before {
                total = count_four_cycles(n, &checks);
            } else {
                self.edge_check.swap(e1, e2);
                replace(&mut checks[c1], v2, v1);
                replace(&mut checks[c2], v1, v2);
            }
        }
    }
}

fn replace(list: &mut [usize], from: usize, to: usize) {
    if let Some(x) = list.iter_mut().find(|x| **x == from) {
        *x = to;
    }
}

impl LdpcCode {
    /// Regular `(col_weight, row_weight)` code of length `n`, deterministic
    /// under `seed`. Retries with fresh edge permutations until the
    /// parity-check matrix has full row rank.
    pub fn build_gallager(
        n: usize,
        col_weight: usize,
        row_weight: usize,
        seed: u64,
    ) -> Result<Self, FecError> {
        let incompatible = FecError::Incompatible {
            n,
            col_weight,
            row_weight,
        };
        if n == 0
            || n > MAX_BLOCK_LENGTH
            || col_weight == 0
            || row_weight <= col_weight
            || row_weight > n
            || !(n * col_weight).is_multiple_of(row_weight)
        {
            return Err(incompatible);
        }
        let m = n * col_weight / row_weight;
        if col_weight > m {
            return Err(incompatible);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_ATTEMPTS {
            let mut graph = EdgeGraph::random(n, m, col_weight, row_weight, &mut rng);
            if !graph.remove_duplicates(&mut rng) {
                continue;
            }
            graph.reduce_four_cycles(&mut rng);
            let checks = graph.check_lists();
            if gf2_rank(n, &checks) < m {
                continue;
            }
            return LdpcCode::from_checks(n, checks);
        }
        Err(FecError::RankDeficient(MAX_ATTEMPTS))
    }

    /// Wraps a full-rank parity-check matrix, permuting columns so that the
    /// pivot (parity) columns come last.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self, FecError> {
        let m = checks.len();
        if checks.iter().flatten().any(|&v| v >= n) {
            return Err(FecError::Alist("variable index out of range".into()));
        }
        let (reduced, pivots) = eliminate(dense_rows(n, &checks), n);
        if pivots.len() < m {
            return Err(FecError::RankDeficient(1));
        }
        let k = n - m;
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let info_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        // new position of each old column
        let mut position = vec![0usize; n];
        for (i, &c) in info_cols.iter().enumerate() {
            position[c] = i;
        }
        // parity columns keep their relative order
        let mut pivot_rows: Vec<(usize, &BitRow)> = pivots.iter().copied().zip(&reduced[..m]).collect();
        pivot_rows.sort_unstable_by_key(|&(p, _)| p);
        for (i, &(p, _)) in pivot_rows.iter().enumerate() {
            position[p] = k + i;
        }
        let parity = pivot_rows
            .iter()
            .map(|&(_, row)| {
                let mut bits = BitRow::zeros(k);
                for (i, &c) in info_cols.iter().enumerate() {
                    if row.get(c) {
                        bits.set(i);
                    }
                }
                bits
            })
            .collect();
        let checks: Vec<Vec<usize>> = checks
            .iter()
            .map(|c| {
                let mut row: Vec<usize> = c.iter().map(|&v| position[v]).collect();
                row.sort_unstable();
                row
            })
            .collect();
        let vars = variable_adjacency(n, &checks);
        let col_weight = vars.iter().map(Vec::len).max().unwrap_or(0);
        let row_weight = checks.iter().map(Vec::len).max().unwrap_or(0);
        Ok(LdpcCode {
            n,
            k,
            col_weight,
            row_weight,
            checks,
            vars,
            parity,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of parity checks.
    pub fn m(&self) -> usize {
        self.checks.len()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn col_weight(&self) -> usize {
        self.col_weight
    }

    pub fn row_weight(&self) -> usize {
        self.row_weight
    }

    /// Variable indices of each check.
    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    /// Check indices of each variable.
    pub fn variables(&self) -> &[Vec<usize>] {
        &self.vars
    }

    pub fn is_regular(&self) -> bool {
        self.vars.iter().all(|v| v.len() == self.col_weight)
            && self.checks.iter().all(|c| c.len() == self.row_weight)
    }

    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.checks
            .iter()
            .map(|c| c.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n && self.syndrome(bits).iter().all(|&s| s == 0)
    }

    /// Systematic encoding: the codeword is `info` followed by `n - k` parity bits.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>, FecError> {
        if info.len() != self.k {
            return Err(FecError::LengthMismatch {
                expected: self.k,
                got: info.len(),
            });
        }
        let mut packed = BitRow::zeros(self.k);
        for (i, &b) in info.iter().enumerate() {
            match b {
                0 => {}
                1 => packed.set(i),
                other => return Err(FecError::InvalidBit(other)),
            }
        }
        let mut codeword = info.to_vec();
        codeword.extend(self.parity.iter().map(|row| row.parity_with(&packed)));
        Ok(codeword)
    }

    /// Normalized min-sum with early exit on a zero syndrome. Positive LLRs
    /// favour bit 0. `iterations` is 0 when the channel decisions already
    /// form a codeword.
    pub fn decode(&self, llrs: &[f64], max_iterations: usize) -> Result<DecodeOutcome, FecError> {
        if llrs.len() != self.n {
            return Err(FecError::LengthMismatch {
                expected: self.n,
                got: llrs.len(),
            });
        }
        let hard = |x: f64| (x < 0.0) as u8;
        let mut bits: Vec<u8> = llrs.iter().map(|&l| hard(l)).collect();
        if self.is_codeword(&bits) {
            return Ok(DecodeOutcome {
                bits,
                converged: true,
                iterations: 0,
            });
        }

        // Edge storage is check-major; var_edges maps each variable to its edge slots.
        let offsets: Vec<usize> = std::iter::once(0)
            .chain(self.checks.iter().scan(0, |acc, c| {
                *acc += c.len();
                Some(*acc)
            }))
            .collect();
        let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (c, vs) in self.checks.iter().enumerate() {
            for (i, &v) in vs.iter().enumerate() {
                var_edges[v].push(offsets[c] + i);
            }
        }
        let edge_var: Vec<usize> = self.checks.iter().flatten().copied().collect();
        let mut v2c: Vec<f64> = edge_var.iter().map(|&v| llrs[v]).collect();
        let mut c2v = vec![0.0; v2c.len()];

        for iter in 1..=max_iterations.max(1) {
            for c in 0..self.checks.len() {
                let edges = offsets[c]..offsets[c + 1];
                let mut sign = 1.0;
                let (mut min1, mut min2, mut at) = (f64::INFINITY, f64::INFINITY, usize::MAX);
                for e in edges.clone() {
                    let x = v2c[e];
                    if x < 0.0 {
                        sign = -sign;
                    }
                    let a = x.abs();
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        at = e;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for e in edges {
                    let mag = if e == at { min2 } else { min1 };
                    let s = if v2c[e] < 0.0 { -sign } else { sign };
                    c2v[e] = MIN_SUM_SCALE * s * mag;
                }
            }
            for v in 0..self.n {
                let total = llrs[v] + var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>();
                bits[v] = hard(total);
                for &e in &var_edges[v] {
                    v2c[e] = total - c2v[e];
                }
            }
            if self.is_codeword(&bits) {
                return Ok(DecodeOutcome {
                    bits,
                    converged: true,
                    iterations: iter,
                });
            }
        }
        Ok(DecodeOutcome {
            bits,
            converged: false,
            iterations: max_iterations.max(1),
        })
    }

    /// MacKay alist text: dimensions, maximum weights, weight lists, then
    /// 1-based adjacency per column and per row.
    pub fn to_alist(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n, self.m());
        let max_col = self.vars.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.checks.iter().map(Vec::len).max().unwrap_or(0);
        let _ = writeln!(s, "{max_col} {max_row}");
        let join = |xs: &mut dyn Iterator<Item = usize>| {
            xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(s, "{}", join(&mut self.vars.iter().map(Vec::len)));
        let _ = writeln!(s, "{}", join(&mut self.checks.iter().map(Vec::len)));
        for v in &self.vars {
            let _ = writeln!(s, "{}", join(&mut v.iter().map(|c| c + 1)));
        }
        for c in &self.checks {
            let _ = writeln!(s, "{}", join(&mut c.iter().map(|v| v + 1)));
        }
        s
    }

    /// Parses alist text. Zero entries (padding) are ignored; only the
    /// per-row lists are used to build the matrix.
    pub fn from_alist(text: &str) -> Result<Self, FecError> {
        let bad = |msg: &str| FecError::Alist(msg.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut numbers = |what: &str| -> Result<Vec<usize>, FecError> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {what}")))?;
            line.split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|_| bad(&format!("bad number in {what}"))))
                .collect()
        };
        let dims = numbers("dimensions")?;
        let [n, m] = dims[..] else {
            return Err(bad("dimension line needs two numbers"));
        };
        numbers("maximum weights")?;
        numbers("column weights")?;
        numbers("row weights")?;
        for _ in 0..n {
            numbers("column adjacency")?;
        }
        let mut checks = Vec::with_capacity(m);
        for _ in 0..m {
            let row: Vec<usize> = numbers("row adjacency")?
                .into_iter()
                .filter(|&v| v > 0)
                .map(|v| v - 1)
                .collect();
            checks.push(row);
        }
        LdpcCode::from_checks(n, checks)
    }
}

/// Max-log bit LLRs from bi-orthogonal correlator outputs.
///
/// `metrics` holds one signed correlation per data code; a word with the
/// complement bit set scores the negated correlation of its code. Bits are
/// returned most significant first, and `LLR_b = (max over words with b = 0
/// − max over words with b = 1) · 2/σ²`, where `σ²` is the complex noise
/// variance of a unit-amplitude chip estimate.
pub fn symbol_llrs_to_bit_llrs(metrics: &[f64], noise_variance: f64) -> Result<Vec<f64>, FecError> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(FecError::NoiseVariance(noise_variance));
    }
    if metrics.is_empty() || !metrics.len().is_power_of_two() {
        return Err(FecError::MetricCount(metrics.len()));
    }
    if metrics.iter().any(|m| !m.is_finite()) {
        return Err(FecError::NonFinite);
    }
    let half = metrics.len();
    let bits = half.trailing_zeros() as usize + 1;
    let score = |w: usize| {
        let m = metrics[w & (half - 1)];
        if w & half != 0 {
            -m
        } else {
            m
        }
    };
    let scale = 2.0 / noise_variance;
    Ok((0..bits)
        .map(|b| {
            let mask = 1 << (bits - 1 - b);
            let (mut zero, mut one) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for w in 0..2 * half {
                let s = score(w);
                if w & mask == 0 {
                    zero = zero.max(s);
                } else {
                    one = one.max(s);
                }
            }
            (zero - one) * scale
        })
        .collect())
}

/// Groups bits into `bits_per_symbol`-bit words, most significant bit
/// first, zero-padding the tail.
pub fn bits_to_words(bits: &[u8], bits_per_symbol: u32) -> Vec<u32> {
    bits.chunks(bits_per_symbol as usize)
        .map(|chunk| {
            let mut w = 0u32;
            for i in 0..bits_per_symbol as usize {
                w = (w << 1) | chunk.get(i).copied().unwrap_or(0) as u32;
            }
            w
        })
        .collect()
}

pub fn words_to_bits(words: &[u32], bits_per_symbol: u32) -> Vec<u8> {
    words
        .iter()
        .flat_map(|&w| (0..bits_per_symbol).rev().map(move |i| ((w >> i) & 1) as u8))
        .collect()
}
