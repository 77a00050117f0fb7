//! Exact q-series: polynomials with exponents in 1/24 units, q-binomials,
//! double-column configurations, q-Narayana and q-Catalan polynomials, and
//! finitized and truncated Kac characters.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linkstates::RhoParity;

/// Exponent units per power of q.
pub const UNITS: i64 = 24;

/// `-c/24` for `c = -2`, in 1/24 units.
pub const MINUS_C_OVER_24: i64 = 2;

/// Finite sum of terms `coeff * q^(exp / 24)`.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct QExpPoly {
    terms: BTreeMap<i64, BigInt>,
}

impl QExpPoly {
    pub fn zero() -> Self {
        QExpPoly::default()
    }

    pub fn one() -> Self {
        QExpPoly::monomial(0, 1)
    }

    /// `coeff * q^(exp24 / 24)`.
    pub fn monomial(exp24: i64, coeff: impl Into<BigInt>) -> Self {
        let mut p = QExpPoly::zero();
        p.add_term(exp24, coeff.into());
        p
    }

    /// `coeff * q^power` for an integer power.
    pub fn q_pow(power: i64, coeff: impl Into<BigInt>) -> Self {
        QExpPoly::monomial(power * UNITS, coeff)
    }

    /// Polynomial in integer powers of q from `(power, coeff)` pairs.
    pub fn from_powers(pairs: &[(i64, i64)]) -> Self {
        let mut p = QExpPoly::zero();
        for &(e, c) in pairs {
            p.add_term(e * UNITS, BigInt::from(c));
        }
        p
    }

    pub fn add_term(&mut self, exp24: i64, coeff: BigInt) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry(exp24).or_insert_with(BigInt::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&exp24);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigInt)> {
        self.terms.iter().map(|(&e, c)| (e, c))
    }

    pub fn coeff(&self, exp24: i64) -> BigInt {
        self.terms.get(&exp24).cloned().unwrap_or_default()
    }

    pub fn min_exp24(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn max_exp24(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    pub fn scale(&self, k: impl Into<BigInt>) -> Self {
        let k = k.into();
        let mut p = QExpPoly::zero();
        for (&e, c) in &self.terms {
            p.add_term(e, c * &k);
        }
        p
    }

    /// Multiplies by `q^(exp24 / 24)`.
    pub fn shift24(&self, exp24: i64) -> Self {
        QExpPoly {
            terms: self.terms.iter().map(|(&e, c)| (e + exp24, c.clone())).collect(),
        }
    }

    /// Multiplies by `q^shift`; the denominator of `shift` must divide 24.
    pub fn shift_exponent(&self, shift: Ratio<i64>) -> Result<Self> {
        let scaled = shift * Ratio::from_integer(UNITS);
        if !scaled.is_integer() {
            return Err(Error::Domain(format!(
                "exponent shift {shift} is not a multiple of 1/24"
            )));
        }
        Ok(self.shift24(scaled.to_integer()))
    }

    /// Sum of coefficients.
    pub fn eval_at_1(&self) -> BigInt {
        self.terms.values().sum()
    }

    pub fn eval_float(&self, q: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&e, c)| c.to_f64().unwrap_or(f64::NAN) * q.powf(e as f64 / UNITS as f64))
            .sum()
    }

    /// Drops all terms with exponent above `max_exp24`.
    pub fn truncate(&self, max_exp24: i64) -> Self {
        QExpPoly {
            terms: self.terms.range(..=max_exp24).map(|(&e, c)| (e, c.clone())).collect(),
        }
    }

    pub fn has_nonnegative_coeffs(&self) -> bool {
        self.terms.values().all(|c| !c.is_negative())
    }

    /// Product keeping only exponents up to `max_exp24`.
    pub fn mul_truncated(&self, other: &QExpPoly, max_exp24: i64) -> Self {
        let mut p = QExpPoly::zero();
        for (&a, ca) in &self.terms {
            for (&b, cb) in &other.terms {
                if a + b > max_exp24 {
                    break;
                }
                p.add_term(a + b, ca * cb);
            }
        }
        p
    }

    /// Exact quotient; fails if `divisor` does not divide `self`.
    pub fn div_exact(&self, divisor: &QExpPoly) -> Result<Self> {
        let (dmin, dmax) = match (divisor.min_exp24(), divisor.max_exp24()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::InexactDivision("division by zero polynomial".into())),
        };
        let lead = &divisor.terms[&dmax];
        let mut rem = self.clone();
        let mut quot = QExpPoly::zero();
        while let (Some(rmin), Some(rmax)) = (rem.min_exp24(), rem.max_exp24()) {
            if rmax - rmin < dmax - dmin {
                return Err(Error::InexactDivision(format!(
                    "nonzero remainder {rem} dividing by {divisor}"
                )));
            }
            let (c, r) = rem.terms[&rmax].div_rem(lead);
            if !r.is_zero() {
                return Err(Error::InexactDivision(format!(
                    "leading coefficient not divisible by {lead}"
                )));
            }
            let term = QExpPoly::monomial(rmax - dmax, c);
            rem = &rem - &(&term * divisor);
            quot = &quot + &term;
        }
        Ok(quot)
    }
}

impl Add for &QExpPoly {
    type Output = QExpPoly;
    fn add(self, rhs: &QExpPoly) -> QExpPoly {
        let mut p = self.clone();
        for (&e, c) in &rhs.terms {
            p.add_term(e, c.clone());
        }
        p
    }
}

impl Sub for &QExpPoly {
    type Output = QExpPoly;
    fn sub(self, rhs: &QExpPoly) -> QExpPoly {
        let mut p = self.clone();
        for (&e, c) in &rhs.terms {
            p.add_term(e, -c);
        }
        p
    }
}

impl Mul for &QExpPoly {
    type Output = QExpPoly;
    fn mul(self, rhs: &QExpPoly) -> QExpPoly {
        let mut p = QExpPoly::zero();
        for (&a, ca) in &self.terms {
            for (&b, cb) in &rhs.terms {
                p.add_term(a + b, ca * cb);
            }
        }
        p
    }
}

impl Neg for &QExpPoly {
    type Output = QExpPoly;
    fn neg(self) -> QExpPoly {
        self.scale(-1)
    }
}

impl Add for QExpPoly {
    type Output = QExpPoly;
    fn add(self, rhs: QExpPoly) -> QExpPoly {
        &self + &rhs
    }
}

impl Sub for QExpPoly {
    type Output = QExpPoly;
    fn sub(self, rhs: QExpPoly) -> QExpPoly {
        &self - &rhs
    }
}

impl Mul for QExpPoly {
    type Output = QExpPoly;
    fn mul(self, rhs: QExpPoly) -> QExpPoly {
        &self * &rhs
    }
}

impl std::iter::Sum for QExpPoly {
    fn sum<I: Iterator<Item = QExpPoly>>(iter: I) -> QExpPoly {
        iter.fold(QExpPoly::zero(), |a, b| &a + &b)
    }
}

fn fmt_exponent(exp24: i64) -> Option<String> {
    let r = Ratio::new(exp24, UNITS);
    if r.is_zero() {
        None
    } else if r == Ratio::one() {
        Some(String::new())
    } else if r.is_integer() && exp24 > 0 {
        Some(format!("^{}", r.to_integer()))
    } else {
        Some(format!("^{{{r}}}"))
    }
}

impl fmt::Display for QExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (&e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if i > 0 {
                write!(f, "{}", if neg { "-" } else { "+" })?;
            } else if neg {
                write!(f, "-")?;
            }
            let mag = c.abs();
            match fmt_exponent(e) {
                None => write!(f, "{mag}")?,
                Some(x) => {
                    if !mag.is_one() {
                        write!(f, "{mag}")?;
                    }
                    write!(f, "q{x}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for QExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QExpPoly({self})")
    }
}

impl Serialize for QExpPoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.terms.len()))?;
        for (&e, c) in &self.terms {
            match c.to_i64() {
                Some(v) => seq.serialize_element(&(e, v))?,
                None => seq.serialize_element(&(e, c.to_string()))?,
            }
        }
        seq.end()
    }
}

/// Gaussian binomial `[a, b]_q`; zero outside `0 <= b <= a`.
pub fn q_binomial(a: i64, b: i64) -> QExpPoly {
    if a < 0 || b < 0 || b > a {
        return QExpPoly::zero();
    }
    let (a, b) = (a as usize, b.min(a - b) as usize);
    // Coefficient rows of [i, k] for k <= b, dense in integer powers.
    let mut rows: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]; b + 1];
    for k in 1..=b {
        rows[k] = Vec::new();
    }
    for i in 1..=a {
        for k in (1..=b.min(i)).rev() {
            // [i, k] = [i-1, k-1] + q^k [i-1, k]
            let mut next = rows[k - 1].clone();
            let shifted = &rows[k];
            if next.len() < shifted.len() + k {
                next.resize(shifted.len() + k, BigInt::zero());
            }
            for (d, c) in shifted.iter().enumerate() {
                next[d + k] += c;
            }
            rows[k] = next;
        }
    }
    let mut p = QExpPoly::zero();
    for (d, c) in rows[b].iter().enumerate() {
        p.add_term(d as i64 * UNITS, c.clone());
    }
    p
}

/// Pair of occupation columns of height `height`, levels listed in
/// descending order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DoubleColumn {
    pub height: u32,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

impl DoubleColumn {
    pub fn new(height: u32, left: Vec<u32>, right: Vec<u32>) -> Result<Self> {
        for col in [&left, &right] {
            if col.windows(2).any(|w| w[0] <= w[1]) {
                return Err(Error::Domain(format!("levels {col:?} are not strictly decreasing")));
            }
            if col.iter().any(|&l| l == 0 || l > height) {
                return Err(Error::Domain(format!("levels {col:?} outside 1..={height}")));
            }
        }
        Ok(DoubleColumn { height, left, right })
    }

    pub fn m(&self) -> usize {
        self.left.len()
    }

    pub fn n(&self) -> usize {
        self.right.len()
    }

    /// `m <= n` and `L_j <= R_j` for every `j <= m`.
    pub fn is_admissible(&self) -> bool {
        self.m() <= self.n() && self.left.iter().zip(&self.right).all(|(l, r)| l <= r)
    }

    /// Sum of all occupied levels.
    pub fn level_sum(&self) -> u64 {
        self.left.iter().chain(&self.right).map(|&l| l as u64).sum()
    }

    /// Energy in 1/24 units with `E_j = j` or, when `half` is set, `j - 1/2`.
    pub fn energy24(&self, half: bool) -> i64 {
        let occupied = (self.m() + self.n()) as i64;
        self.level_sum() as i64 * UNITS - if half { occupied * UNITS / 2 } else { 0 }
    }
}

/// Strictly decreasing `k`-subsets of `1..=height`.
fn descending_subsets(height: u32, k: usize) -> Vec<Vec<u32>> {
    fn go(top: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == 0 {
            out.push(cur.clone());
            return;
        }
        for l in (k as u32..=top).rev() {
            cur.push(l);
            go(l - 1, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k as u32 <= height {
        go(height, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// All configurations with `m` left and `n` right occupants.
pub fn enumerate_double_columns(height: u32, m: usize, n: usize, admissible_only: bool) -> Vec<DoubleColumn> {
    let lefts = descending_subsets(height, m);
    let rights = descending_subsets(height, n);
    let mut out = Vec::new();
    for l in &lefts {
        for r in &rights {
            let dc = DoubleColumn {
                height,
                left: l.clone(),
                right: r.clone(),
            };
            if !admissible_only || dc.is_admissible() {
                out.push(dc);
            }
        }
    }
    out
}

/// Sum of `q^(ΣL+ΣR)` over the given configurations.
pub fn weight_polynomial(configs: &[DoubleColumn], half: bool) -> QExpPoly {
    let mut p = QExpPoly::zero();
    for c in configs {
        p.add_term(c.energy24(half), BigInt::one());
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Weight-preserving bijection between inadmissible configurations with
/// `(m, n)` occupants and all configurations with `(m - 1, n + 1)`.
///
/// Forward cuts just below the first violation `L_j > R_j` and swaps the
/// parts of the two columns above the cut.
pub fn phi_bijection(s: &DoubleColumn, direction: Direction) -> Result<DoubleColumn> {
    let (l, r) = (&s.left, &s.right);
    match direction {
        Direction::Forward => {
            if s.m() > s.n() {
                return Err(Error::Domain(format!(
                    "forward map needs m <= n, got m={} n={}",
                    s.m(),
                    s.n()
                )));
            }
            let j0 = match l.iter().zip(r).position(|(a, b)| a > b) {
                Some(j) => j,
                None => return Err(Error::Domain("configuration is admissible".into())),
            };
            let left: Vec<u32> = r[..j0].iter().chain(&l[j0 + 1..]).copied().collect();
            let right: Vec<u32> = l[..=j0].iter().chain(&r[j0..]).copied().collect();
            Ok(DoubleColumn {
                height: s.height,
                left,
                right,
            })
        }
        Direction::Inverse => {
            // Image of (m, n) has m - 1 left and n + 1 right occupants.
            if s.n() < s.m() + 2 {
                return Err(Error::Domain(format!(
                    "inverse map needs n >= m + 2, got m={} n={}",
                    s.m(),
                    s.n()
                )));
            }
            let i0 = (0..s.m() + 1)
                .find(|&i| l.get(i).copied().unwrap_or(0) < r[i])
                .expect("an index with L_i < R_i exists within the first m + 1 levels");
            let left: Vec<u32> = r[..=i0].iter().chain(&l[i0..]).copied().collect();
            let right: Vec<u32> = l[..i0].iter().chain(&r[i0 + 1..]).copied().collect();
            Ok(DoubleColumn {
                height: s.height,
                left,
                right,
            })
        }
    }
}

/// Generalized q-Narayana number by its closed form; zero unless
/// `0 <= m <= n <= M`.
pub fn q_narayana(height: i64, m: i64, n: i64) -> QExpPoly {
    if !(0 <= m && m <= n && n <= height) {
        return QExpPoly::zero();
    }
    let main = &q_binomial(height, m) * &q_binomial(height, n);
    let corr = (&q_binomial(height, m - 1) * &q_binomial(height, n + 1)).shift24((n - m + 1) * UNITS);
    (&main - &corr).shift24((m * (m + 1) / 2 + n * (n + 1) / 2) * UNITS)
}

/// q-Narayana number by direct enumeration of admissible configurations.
pub fn q_narayana_enumerated(height: u32, m: usize, n: usize) -> QExpPoly {
    weight_polynomial(&enumerate_double_columns(height, m, n, true), false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalanKind {
    /// Levels weighted `E_j = j`.
    Plain,
    /// Levels weighted `E_j = j - 1/2`.
    Prime,
}

/// q-Catalan polynomial `C_{M,r}` or `C'_{M,r}` from its closed form,
/// extended antisymmetrically to `r <= 0`.
pub fn q_catalan(height: i64, r: i64, kind: CatalanKind) -> Result<QExpPoly> {
    if r == 0 {
        return Ok(QExpPoly::zero());
    }
    if r < 0 {
        return Ok(-&q_catalan(height, -r, kind)?);
    }
    let one = QExpPoly::one();
    let (prefactor24, num, den, bin) = match kind {
        CatalanKind::Plain => (
            r * (r - 1) / 2 * UNITS,
            &one - &QExpPoly::q_pow(r, 1),
            &one - &QExpPoly::q_pow(height + 1, 1),
            q_binomial(2 * height + 2, height + 1 - r),
        ),
        CatalanKind::Prime => (
            (r - 1) * (r - 1) * UNITS / 2,
            &one - &QExpPoly::q_pow(2 * r, 1),
            &one - &QExpPoly::q_pow(height + r + 1, 1),
            q_binomial(2 * height + 1, height + 1 - r),
        ),
    };
    Ok((&num * &bin).div_exact(&den)?.shift24(prefactor24))
}

/// q-Catalan polynomial summed over admissible configurations with
/// `|R| - |L| = r - 1`.
pub fn q_catalan_enumerated(height: u32, r: i64, kind: CatalanKind) -> QExpPoly {
    if r <= 0 {
        return QExpPoly::zero();
    }
    let excess = (r - 1) as usize;
    let mut total = QExpPoly::zero();
    for m in 0..=height as usize {
        let n = m + excess;
        if n > height as usize {
            break;
        }
        let configs = enumerate_double_columns(height, m, n, true);
        total = &total + &weight_polynomial(&configs, kind == CatalanKind::Prime);
    }
    total
}

/// `24 Δ_{r,s}` with `Δ_{r,s} = ((2r - s)^2 - 1) / 8`.
pub fn delta24(r: i64, s: i64) -> i64 {
    3 * ((2 * r - s).pow(2) - 1)
}

/// Number of levels `M`: `⌊(N-1)/2⌋` for `s` odd, `⌊N/2⌋` for `s` even.
pub fn level_count(n_bulk: usize, s_odd: bool) -> usize {
    if s_odd {
        n_bulk.saturating_sub(1) / 2
    } else {
        n_bulk / 2
    }
}

fn check_parity(n_bulk: usize, rho: usize, s: usize) -> Result<()> {
    if rho == 0 || s == 0 {
        return Err(Error::Domain("rho and s must be positive".into()));
    }
    if (n_bulk + rho + s) % 2 != 0 {
        return Err(Error::Parity(n_bulk + rho + s));
    }
    Ok(())
}

/// Finitized Kac character `χ^{(N)}_{r,s}` including the prefactor
/// `q^{-c/24 + Δ_{r,s}}`.
pub fn finitized_characters(n_bulk: usize, r: usize, s: usize, parity: RhoParity) -> Result<QExpPoly> {
    if r == 0 {
        return Err(Error::Domain("r must be positive".into()));
    }
    check_parity(n_bulk, parity.rho(r), s)?;
    let (n, r, s) = (n_bulk as i64, r as i64, s as i64);
    let shift = match parity {
        RhoParity::Even => 0,
        RhoParity::Odd => 1,
    };
    let body = &q_binomial(n, (n - 2 * r + s + shift) / 2)
        - &q_binomial(n, (n - 2 * r - s + shift) / 2).shift24(r * s * UNITS);
    Ok(body.shift24(MINUS_C_OVER_24 + delta24(r, s)))
}

/// Prefactor separating the spectrum generating polynomial from the
/// character, in 1/24 units: `-c/24`, with an extra `-1/8` for `s` even.
pub fn selection_prefactor24(s: usize) -> i64 {
    if s % 2 == 1 {
        MINUS_C_OVER_24
    } else {
        MINUS_C_OVER_24 - 3
    }
}

/// Generating polynomial of the sector predicted by the q-Catalan selection
/// rules, without prefactor.
pub fn selection_sum(n_bulk: usize, rho: usize, s: usize) -> Result<QExpPoly> {
    check_parity(n_bulk, rho, s)?;
    let (n, rho_i, s_i) = (n_bulk as i64, rho as i64, s as i64);
    let half_n = QExpPoly::monomial(n * UNITS / 2, 1);
    let mut total = QExpPoly::zero();
    if s % 2 == 1 {
        let kind = CatalanKind::Plain;
        for k in 1..=s_i {
            if rho % 2 == 0 {
                total = &total + &q_catalan((n - 1) / 2, (rho_i - s_i - 1 + 2 * k) / 2, kind)?;
            } else {
                let m = (n - 2) / 2;
                total = &total + &q_catalan(m, (rho_i - s_i + 2 * k) / 2, kind)?;
                total = &total + &(&half_n * &q_catalan(m, (rho_i - s_i - 2 + 2 * k) / 2, kind)?);
            }
        }
    } else {
        let kind = CatalanKind::Prime;
        for k in 1..=s_i / 2 {
            if rho % 2 == 0 {
                total = &total + &q_catalan(n / 2, (rho_i - s_i - 2 + 4 * k) / 2, kind)?;
            } else {
                let m = (n - 1) / 2;
                total = &total + &q_catalan(m, (rho_i - s_i - 1 + 4 * k) / 2, kind)?;
                total = &total + &(&half_n * &q_catalan(m, (rho_i - s_i - 3 + 4 * k) / 2, kind)?);
            }
        }
    }
    Ok(total)
}

/// `1/(q)_∞` up to `q^order`, as a polynomial in integer powers.
pub fn inverse_euler(order: i64) -> QExpPoly {
    // Partition counts by the standard dynamic program over part sizes.
    let len = order.max(0) as usize + 1;
    let mut p = vec![BigInt::zero(); len];
    p[0] = BigInt::one();
    for part in 1..len {
        for total in part..len {
            let add = p[total - part].clone();
            p[total] += add;
        }
    }
    let mut out = QExpPoly::zero();
    for (d, c) in p.into_iter().enumerate() {
        out.add_term(d as i64 * UNITS, c);
    }
    out
}

/// Kac character `χ_{r,s}` truncated to exponents at most `max_exp24`.
/// Negative or zero `r` follows the antisymmetric extension for `s <= 2`.
pub fn kac_character_upto(r: i64, s: i64, max_exp24: i64) -> QExpPoly {
    if r == 0 {
        return QExpPoly::zero();
    }
    if r < 0 {
        return -&kac_character_upto(-r, s, max_exp24);
    }
    let lead = MINUS_C_OVER_24 + delta24(r, s);
    if lead > max_exp24 {
        return QExpPoly::zero();
    }
    let order = (max_exp24 - lead) / UNITS;
    let body = &QExpPoly::one() - &QExpPoly::q_pow(r * s, 1);
    body.mul_truncated(&inverse_euler(order), order * UNITS).shift24(lead)
}

/// `χ_{r,s}` truncated `order` powers of q above its leading exponent.
pub fn character_series(r: usize, s: usize, order: usize) -> Result<QExpPoly> {
    if r == 0 || s == 0 {
        return Err(Error::Domain("r and s must be positive".into()));
    }
    if order > 64 {
        return Err(Error::Domain(format!("truncation order {order} exceeds 64")));
    }
    let (r, s) = (r as i64, s as i64);
    Ok(kac_character_upto(
        r,
        s,
        MINUS_C_OVER_24 + delta24(r, s) + order as i64 * UNITS,
    ))
}

/// Irreducible labels `(k, s')` with `s' = 1` (s odd) or `2` (s even) whose
/// characters sum to `χ_{r,s}`; `k` may be zero or negative.
pub fn irreducible_labels(r: usize, s: usize) -> Vec<(i64, i64)> {
    let (r, s) = (r as i64, s as i64);
    if s % 2 == 1 {
        (1..=s).map(|k| ((2 * r - s - 1 + 2 * k) / 2, 1)).collect()
    } else {
        (1..=s / 2).map(|k| ((2 * r - s - 2 + 4 * k) / 2, 2)).collect()
    }
}

/// Checks `χ_{r,s} = Σ ch_{k,1}` or `Σ ch_{k,2}` up to `order` powers above
/// the leading exponent.
pub fn decomposition_holds(r: usize, s: usize, order: usize) -> Result<bool> {
    let kac = character_series(r, s, order)?;
    let max = MINUS_C_OVER_24 + delta24(r as i64, s as i64) + order as i64 * UNITS;
    let sum: QExpPoly = irreducible_labels(r, s)
        .into_iter()
        .map(|(k, t)| kac_character_upto(k, t, max))
        .sum();
    Ok(sum == kac)
}
