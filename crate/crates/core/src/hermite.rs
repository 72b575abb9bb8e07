//! Generalized multi-index multi-variable Hermite functions.
//!
//! `H_{n_1,...,n_d}(x; M)` is defined for a symmetric complex matrix `M` and
//! argument vector `x` through the generating function
//!
//! ```text
//!   sum_{n} (prod_i u_i^{n_i} / n_i!) H_n(x; M) = exp(u^T M u + x^T u).
//! ```
//!
//! Expanding the right side term by term gives the explicit combinatorial
//! sum implemented here: enumerate pairing counts `n_{i,j}` (one per matrix
//! entry with `i <= j`), each consuming one unit of `u_i` and one of `u_j`
//! (two of `u_i` on the diagonal), with the leftover degree of `u_i` going
//! to the power `q_i` of `x_i`:
//!
//! ```text
//!   H_n(x; M) = sum over {n_{i,j} : q_i >= 0}
//!       prod_i [ n_i! x_i^{q_i} / q_i! * M_{i,i}^{n_{i,i}} / n_{i,i}!
//!                * prod_{j>i} (2 M_{i,j})^{n_{i,j}} / n_{i,j}! ]
//! ```
//!
//! Coefficients grow like products of factorials, and for the index sizes
//! used by high-order generalized operations the sums cancel catastrophically
//! in double precision. The [`PrecisionPolicy`] switches evaluation to
//! arbitrary-precision floats above a total-degree threshold.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{big_from_f64, compensated_complex_sum, factorial_f64, Big, BigComplex};

/// Hard cap on the total degree of any evaluated multi-index.
pub const DEGREE_CAP: u32 = 40;

/// Total degree above which the machine policy hands off to extended floats.
pub const MACHINE_DEGREE_LIMIT: u32 = 24;

/// Default mantissa width of the extended path.
pub const DEFAULT_MANTISSA_BITS: u32 = 256;

// ---------------------------------------------------------------------------
// Parameter types
// ---------------------------------------------------------------------------

/// Symmetric matrix and argument vector defining a Hermite function family.
#[derive(Debug, Clone)]
pub struct HermiteParams {
    m: DMatrix<Complex64>,
    x: DVector<Complex64>,
}

impl HermiteParams {
    /// `m` must be exactly symmetric (entrywise) and `x` of matching length.
    pub fn new(m: DMatrix<Complex64>, x: DVector<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidParameter(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if x.len() != m.nrows() {
            return Err(Error::DimensionMismatch {
                idx_dim: x.len(),
                dim: m.nrows(),
            });
        }
        Ok(Self { m, x })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn argument(&self) -> &DVector<Complex64> {
        &self.x
    }
}

/// Vector of non-negative Hermite indices with a total-degree guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex {
    indices: Vec<u32>,
}

impl MultiIndex {
    pub fn new(indices: Vec<u32>) -> Result<Self> {
        Self::with_cap(indices, DEGREE_CAP)
    }

    pub fn with_cap(indices: Vec<u32>, cap: u32) -> Result<Self> {
        let degree: u32 = indices.iter().sum();
        if degree > cap {
            return Err(Error::DegreeLimit { degree, max: cap });
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.indices.iter().sum()
    }
}

/// Which floating-point backend evaluates the term sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionMode {
    /// f64 with magnitude-sorted compensated accumulation, automatically
    /// handing off to extended floats above [`MACHINE_DEGREE_LIMIT`].
    Machine,
    /// Arbitrary-precision floats for every evaluation.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionPolicy {
    pub mode: PrecisionMode,
    pub mantissa_bits: u32,
}

impl PrecisionPolicy {
    pub fn machine() -> Self {
        Self {
            mode: PrecisionMode::Machine,
            mantissa_bits: DEFAULT_MANTISSA_BITS,
        }
    }

    pub fn extended(mantissa_bits: u32) -> Result<Self> {
        if mantissa_bits < 53 {
            return Err(Error::InvalidParameter(format!(
                "mantissa_bits must be at least 53, got {mantissa_bits}"
            )));
        }
        Ok(Self {
            mode: PrecisionMode::Extended,
            mantissa_bits,
        })
    }

    fn use_extended(&self, total_degree: u32) -> bool {
        match self.mode {
            PrecisionMode::Extended => true,
            PrecisionMode::Machine => total_degree > MACHINE_DEGREE_LIMIT,
        }
    }
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        Self::machine()
    }
}

// ---------------------------------------------------------------------------
// General evaluator
// ---------------------------------------------------------------------------

/// One collected monomial of the expansion: coefficient times `prod x_i^{q[i]}`.
///
/// The coefficient already folds in the factorial weights and all matrix-entry
/// powers, so re-evaluating at a new argument vector is a pure power product.
#[derive(Debug, Clone)]
struct MachineTerm {
    q: Vec<u32>,
    coeff: Complex64,
}

#[derive(Debug, Clone)]
struct BigTerm {
    q: Vec<u32>,
    coeff: BigComplex,
}

#[derive(Debug)]
enum TermTable {
    Machine(Vec<MachineTerm>),
    Big(Vec<BigTerm>, u32),
}

/// Reusable evaluator for a fixed `(M, multi-index)` pair.
///
/// Enumerating the pairing combinations is far more expensive than the final
/// power products, so grids and quadratures construct one evaluator per index
/// and call [`HermiteEvaluator::eval`] per point.
#[derive(Debug)]
pub struct HermiteEvaluator {
    dim: usize,
    table: TermTable,
}

impl HermiteEvaluator {
    pub fn new(m: &DMatrix<Complex64>, idx: &MultiIndex, policy: PrecisionPolicy) -> Result<Self> {
        if idx.dim() != m.nrows() {
            return Err(Error::DimensionMismatch {
                idx_dim: idx.dim(),
                dim: m.nrows(),
            });
        }
        let degree = idx.total_degree();
        if degree > DEGREE_CAP {
            return Err(Error::DegreeLimit {
                degree,
                max: DEGREE_CAP,
            });
        }
        if policy.mode == PrecisionMode::Extended && policy.mantissa_bits < 53 {
            return Err(Error::InvalidParameter(
                "mantissa_bits must be at least 53".into(),
            ));
        }
        let dim = m.nrows();
        let pairs = active_pairs(m);
        let raw = enumerate_terms(idx.indices(), &pairs);

        let table = if policy.use_extended(degree) {
            let bits = policy.mantissa_bits as usize;
            let mut merged: BTreeMap<Vec<u32>, BigComplex> = BTreeMap::new();
            for t in &raw {
                let coeff = t.coefficient_big(m, idx.indices(), bits);
                merged
                    .entry(t.q.clone())
                    .and_modify(|c| *c = c.add(&coeff))
                    .or_insert(coeff);
            }
            TermTable::Big(
                merged
                    .into_iter()
                    .map(|(q, coeff)| BigTerm { q, coeff })
                    .collect(),
                policy.mantissa_bits,
            )
        } else {
            let mut merged: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
            for t in &raw {
                let coeff = t.coefficient_f64(m, idx.indices());
                *merged.entry(t.q.clone()).or_insert(Complex64::ZERO) += coeff;
            }
            TermTable::Machine(
                merged
                    .into_iter()
                    .map(|(q, coeff)| MachineTerm { q, coeff })
                    .collect(),
            )
        };
        Ok(Self { dim, table })
    }

    pub fn eval(&self, x: &[Complex64]) -> Result<Complex64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                idx_dim: x.len(),
                dim: self.dim,
            });
        }
        match &self.table {
            TermTable::Machine(terms) => {
                let max_q = terms
                    .iter()
                    .flat_map(|t| t.q.iter().copied())
                    .max()
                    .unwrap_or(0);
                let powers = power_table(x, max_q);
                let mut vals: Vec<Complex64> = Vec::with_capacity(terms.len());
                for t in terms {
                    let mut v = t.coeff;
                    for (i, &qi) in t.q.iter().enumerate() {
                        if qi > 0 {
                            v *= powers[i][qi as usize];
                        }
                    }
                    vals.push(v);
                }
                let sum = compensated_complex_sum(&mut vals);
                if !sum.re.is_finite() || !sum.im.is_finite() {
                    return Err(Error::NonFinite);
                }
                Ok(sum)
            }
            TermTable::Big(terms, bits) => {
                let bits = *bits as usize;
                let xs: Vec<BigComplex> =
                    x.iter().map(|&z| BigComplex::from_c64(z, bits)).collect();
                let mut acc = BigComplex::zero(bits);
                for t in terms {
                    let mut v = t.coeff.clone();
                    for (i, &qi) in t.q.iter().enumerate() {
                        if qi > 0 {
                            v = v.mul(&xs[i].powu(qi));
                        }
                    }
                    acc = acc.add(&v);
                }
                Ok(acc.to_c64())
            }
        }
    }
}

/// Matrix entries that can carry a nonzero pairing count.
fn active_pairs(m: &DMatrix<Complex64>) -> Vec<(usize, usize)> {
    let d = m.nrows();
    let mut pairs = Vec::new();
    for i in 0..d {
        for j in i..d {
            if m[(i, j)] != Complex64::ZERO {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone)]
struct RawTerm {
    q: Vec<u32>,
    /// Pairing counts aligned with the active-pair list.
    counts: Vec<u32>,
    pairs: Vec<(usize, usize)>,
}

impl RawTerm {
    fn coefficient_f64(&self, m: &DMatrix<Complex64>, n: &[u32]) -> Complex64 {
        let mut c = Complex64::new(1.0, 0.0);
        for (i, (&ni, &qi)) in n.iter().zip(self.q.iter()).enumerate() {
            let _ = i;
            c *= factorial_f64(ni) / factorial_f64(qi);
        }
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let cnt = self.counts[k];
            if cnt == 0 {
                continue;
            }
            let base = if i == j { m[(i, j)] } else { 2.0 * m[(i, j)] };
            c *= base.powu(cnt) / factorial_f64(cnt);
        }
        c
    }

    fn coefficient_big(&self, m: &DMatrix<Complex64>, n: &[u32], bits: usize) -> BigComplex {
        let mut num = big_from_f64(1.0, bits);
        for (&ni, &qi) in n.iter().zip(self.q.iter()) {
            num = num * big_factorial(ni, bits) / big_factorial(qi, bits);
        }
        let mut c = BigComplex::from_real(num);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let cnt = self.counts[k];
            if cnt == 0 {
                continue;
            }
            let entry = if i == j { m[(i, j)] } else { 2.0 * m[(i, j)] };
            let p = BigComplex::from_c64(entry, bits).powu(cnt);
            c = c
                .mul(&p)
                .scale(&(big_from_f64(1.0, bits) / big_factorial(cnt, bits)));
        }
        c
    }
}

fn big_factorial(n: u32, bits: usize) -> Big {
    let mut f = big_from_f64(1.0, bits);
    for k in 2..=n {
        f *= big_from_f64(k as f64, bits);
    }
    f
}

/// Depth-first enumeration over pairing counts, pruning whenever a capacity
/// goes negative. Lexicographic order over the active-pair counts keeps the
/// output deterministic.
fn enumerate_terms(n: &[u32], pairs: &[(usize, usize)]) -> Vec<RawTerm> {
    let mut out = Vec::new();
    let mut counts = vec![0u32; pairs.len()];
    let mut capacity: Vec<u32> = n.to_vec();
    recurse(pairs, 0, &mut counts, &mut capacity, &mut out);
    out
}

fn recurse(
    pairs: &[(usize, usize)],
    k: usize,
    counts: &mut Vec<u32>,
    capacity: &mut Vec<u32>,
    out: &mut Vec<RawTerm>,
) {
    if k == pairs.len() {
        out.push(RawTerm {
            q: capacity.clone(),
            counts: counts.clone(),
            pairs: pairs.to_vec(),
        });
        return;
    }
    let (i, j) = pairs[k];
    let max_cnt = if i == j {
        capacity[i] / 2
    } else {
        capacity[i].min(capacity[j])
    };
    for cnt in 0..=max_cnt {
        counts[k] = cnt;
        if i == j {
            capacity[i] -= 2 * cnt;
        } else {
            capacity[i] -= cnt;
            capacity[j] -= cnt;
        }
        recurse(pairs, k + 1, counts, capacity, out);
        if i == j {
            capacity[i] += 2 * cnt;
        } else {
            capacity[i] += cnt;
            capacity[j] += cnt;
        }
    }
    counts[k] = 0;
}

fn power_table(x: &[Complex64], max_q: u32) -> Vec<Vec<Complex64>> {
    x.iter()
        .map(|&xi| {
            let mut row = Vec::with_capacity(max_q as usize + 1);
            row.push(Complex64::new(1.0, 0.0));
            for k in 1..=max_q as usize {
                let prev = row[k - 1];
                row.push(prev * xi);
            }
            row
        })
        .collect()
}

/// Evaluate `H_{n}(x; M)` once. Grids should build a [`HermiteEvaluator`].
pub fn hermite_general(
    params: &HermiteParams,
    idx: &MultiIndex,
    policy: PrecisionPolicy,
) -> Result<Complex64> {
    let ev = HermiteEvaluator::new(params.matrix(), idx, policy)?;
    ev.eval(params.argument().as_slice())
}

// ---------------------------------------------------------------------------
// Two-mode four-index closed form
// ---------------------------------------------------------------------------

/// Closed four-fold sum for the two-mode four-index Hermite function at a
/// formal point `(xi, xi_conj)`:
///
/// ```text
///  H_{n1,n2,n3,n4} = sum_{n5,n6,n7,n8}
///      xi^{n2+n3-s} xi_conj^{n1+n4-s}
///      * n1! n2! (A+C)^{n1+n2-2n5-n7-n8} A^{n5}
///        / [n5! (n1-n5-n7)! (n2-n5-n8)!]
///      * n3! n4! (B+C)^{n3+n4-2n6-n7-n8} B^{n6}
///        / [n6! (n3-n6-n7)! (n4-n6-n8)!]
///      * C^{n7+n8} / (n7! n8!),        s = n5+n6+n7+n8,
/// ```
///
/// summed over all tuples keeping every factorial argument non-negative.
/// Net powers of `xi` and `xi_conj` are always non-negative, so the origin is
/// evaluated exactly (0^0 = 1) rather than through a 0^negative limit.
///
/// This equals the general `H` of the equivalent dim-4 problem with
/// `2 M_{12} = A`, `2 M_{34} = B`, `2 M_{13} = 2 M_{24} = C` (other entries
/// zero) and argument `x = ((A+C) xi_conj, (A+C) xi, (B+C) xi, (B+C) xi_conj)`.
pub fn hermite_two_mode_four_index(
    a: f64,
    b: f64,
    c: f64,
    idx4: [u32; 4],
    xi: Complex64,
    xi_conj: Complex64,
    policy: PrecisionPolicy,
) -> Result<Complex64> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::InvalidParameter("A, B, C must be finite".into()));
    }
    let degree: u32 = idx4.iter().sum();
    if degree > DEGREE_CAP {
        return Err(Error::DegreeLimit {
            degree,
            max: DEGREE_CAP,
        });
    }
    let [n1, n2, n3, n4] = idx4;
    if policy.use_extended(degree) {
        four_index_big(a, b, c, idx4, xi, xi_conj, policy.mantissa_bits as usize)
    } else {
        let ac = a + c;
        let bc = b + c;
        let mut terms: Vec<Complex64> = Vec::new();
        for n5 in 0..=n1.min(n2) {
            for n6 in 0..=n3.min(n4) {
                for n7 in 0..=(n1 - n5).min(n3 - n6) {
                    for n8 in 0..=(n2 - n5).min(n4 - n6) {
                        let s = n5 + n6 + n7 + n8;
                        let coeff = factorial_f64(n1) * factorial_f64(n2)
                            / (factorial_f64(n5)
                                * factorial_f64(n1 - n5 - n7)
                                * factorial_f64(n2 - n5 - n8))
                            * ac.powi((n1 + n2 - 2 * n5 - n7 - n8) as i32)
                            * a.powi(n5 as i32)
                            * factorial_f64(n3)
                            * factorial_f64(n4)
                            / (factorial_f64(n6)
                                * factorial_f64(n3 - n6 - n7)
                                * factorial_f64(n4 - n6 - n8))
                            * bc.powi((n3 + n4 - 2 * n6 - n7 - n8) as i32)
                            * b.powi(n6 as i32)
                            * c.powi((n7 + n8) as i32)
                            / (factorial_f64(n7) * factorial_f64(n8));
                        let term = coeff * xi.powu(n2 + n3 - s) * xi_conj.powu(n1 + n4 - s);
                        terms.push(term);
                    }
                }
            }
        }
        let sum = compensated_complex_sum(&mut terms);
        if !sum.re.is_finite() || !sum.im.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(sum)
    }
}

fn four_index_big(
    a: f64,
    b: f64,
    c: f64,
    idx4: [u32; 4],
    xi: Complex64,
    xi_conj: Complex64,
    bits: usize,
) -> Result<Complex64> {
    let [n1, n2, n3, n4] = idx4;
    let ab = big_from_f64(a, bits);
    let bb = big_from_f64(b, bits);
    let cb = big_from_f64(c, bits);
    let acb = &ab + &cb;
    let bcb = &bb + &cb;
    let xib = BigComplex::from_c64(xi, bits);
    let xjb = BigComplex::from_c64(xi_conj, bits);
    let mut acc = BigComplex::zero(bits);
    for n5 in 0..=n1.min(n2) {
        for n6 in 0..=n3.min(n4) {
            for n7 in 0..=(n1 - n5).min(n3 - n6) {
                for n8 in 0..=(n2 - n5).min(n4 - n6) {
                    let s = n5 + n6 + n7 + n8;
                    let num = big_factorial(n1, bits)
                        * big_factorial(n2, bits)
                        * big_factorial(n3, bits)
                        * big_factorial(n4, bits);
                    let den = big_factorial(n5, bits)
                        * big_factorial(n1 - n5 - n7, bits)
                        * big_factorial(n2 - n5 - n8, bits)
                        * big_factorial(n6, bits)
                        * big_factorial(n3 - n6 - n7, bits)
                        * big_factorial(n4 - n6 - n8, bits)
                        * big_factorial(n7, bits)
                        * big_factorial(n8, bits);
                    let mut coeff = num / den;
                    coeff *= big_powi(&acb, n1 + n2 - 2 * n5 - n7 - n8);
                    coeff *= big_powi(&ab, n5);
                    coeff *= big_powi(&bcb, n3 + n4 - 2 * n6 - n7 - n8);
                    coeff *= big_powi(&bb, n6);
                    coeff *= big_powi(&cb, n7 + n8);
                    let term = xib
                        .powu(n2 + n3 - s)
                        .mul(&xjb.powu(n1 + n4 - s))
                        .scale(&coeff);
                    acc = acc.add(&term);
                }
            }
        }
    }
    Ok(acc.to_c64())
}

fn big_powi(base: &Big, mut e: u32) -> Big {
    let bits = base.precision();
    let mut acc = big_from_f64(1.0, bits);
    let mut b = base.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc *= &b;
        }
        e >>= 1;
        if e > 0 {
            b = &b * &b;
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Stirling numbers of the second kind
// ---------------------------------------------------------------------------

/// Exact Stirling number of the second kind `S(n, m)` for `0 <= m <= n <= 64`.
pub fn stirling2(n: u32, m: u32) -> Result<BigUint> {
    if m > n || n > 64 {
        return Err(Error::OutOfRange(format!(
            "stirling2 requires 0 <= m <= n <= 64, got ({n}, {m})"
        )));
    }
    // S(n, m) = m S(n-1, m) + S(n-1, m-1), row by row.
    let mut row: Vec<BigUint> = vec![BigUint::from(1u32)];
    for i in 1..=n {
        let mut next: Vec<BigUint> = Vec::with_capacity(i as usize + 1);
        next.push(BigUint::from(0u32)); // S(i, 0) = 0 for i >= 1
        for j in 1..=i {
            let s_prev_same = if (j as usize) < row.len() {
                row[j as usize].clone()
            } else {
                BigUint::from(0u32)
            };
            let s_prev_less = row[(j - 1) as usize].clone();
            next.push(BigUint::from(j) * s_prev_same + s_prev_less);
        }
        row = next;
    }
    Ok(row[m as usize].clone())
}
