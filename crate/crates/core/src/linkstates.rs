//! Non-crossing link states on a strip with `(r, s)` boundary seams.
//!
//! Nodes are numbered `1..=n` from the left. The first `N` nodes are bulk
//! nodes, the next `rho - 1` belong to the r-type seam and the last `s - 1`
//! to the s-type seam. A link state pairs every node with another one by
//! non-crossing half-arcs; admissible states never close a half-arc with both
//! ends inside the same seam.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A perfect non-crossing matching of `n` nodes.
///
/// Stored zero-based internally; serialized as the 1-based partner array.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkState {
    partner: Vec<u8>,
}

impl LinkState {
    /// Builds a link state from a 1-based partner array, validating it.
    pub fn from_one_based(partner: &[usize]) -> Result<Self> {
        if partner.len() > u8::MAX as usize {
            return Err(Error::Domain(format!("{} nodes is too many", partner.len())));
        }
        let zero: Vec<u8> = partner
            .iter()
            .map(|&p| {
                if p == 0 || p > partner.len() {
                    Err(Error::Domain(format!("partner index {p} out of range")))
                } else {
                    Ok((p - 1) as u8)
                }
            })
            .collect::<Result<_>>()?;
        let state = LinkState { partner: zero };
        state.validate()?;
        Ok(state)
    }

    /// Builds a link state from a zero-based partner array without validation.
    pub(crate) fn from_zero_based_unchecked(partner: Vec<u8>) -> Self {
        LinkState { partner }
    }

    pub(crate) fn raw(&self) -> &[u8] {
        &self.partner
    }

    fn validate(&self) -> Result<()> {
        let n = self.partner.len();
        if n % 2 != 0 {
            return Err(Error::Domain(format!("link state on {n} nodes: n must be even")));
        }
        for (i, &p) in self.partner.iter().enumerate() {
            let p = p as usize;
            if p == i {
                return Err(Error::Domain(format!("node {} is paired with itself", i + 1)));
            }
            if self.partner[p] as usize != i {
                return Err(Error::Domain(format!(
                    "partner array is not an involution at node {}",
                    i + 1
                )));
            }
        }
        if !self.is_non_crossing() {
            return Err(Error::Domain("link state has crossing arcs".into()));
        }
        Ok(())
    }

    fn is_non_crossing(&self) -> bool {
        // Arcs are non-crossing iff the openers/closers form a balanced sequence
        // in which every closer matches the most recent unmatched opener.
        let mut stack = Vec::with_capacity(self.partner.len() / 2);
        for (i, &p) in self.partner.iter().enumerate() {
            let p = p as usize;
            if p > i {
                stack.push(i);
            } else if stack.pop() != Some(p) {
                return false;
            }
        }
        stack.is_empty()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }

    /// 1-based partner of the 1-based node `i`.
    pub fn partner(&self, i: usize) -> usize {
        self.partner[i - 1] as usize + 1
    }

    /// The 1-based partner array.
    pub fn to_one_based(&self) -> Vec<usize> {
        self.partner.iter().map(|&p| p as usize + 1).collect()
    }

    /// Whether the state is a valid non-crossing perfect matching.
    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }
}

impl fmt::Debug for LinkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinkState{:?}", self.to_one_based())
    }
}

impl fmt::Display for LinkState {
    /// Renders arcs as parentheses, e.g. `(())()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &p) in self.partner.iter().enumerate() {
            f.write_str(if (p as usize) > i { "(" } else { ")" })?;
        }
        Ok(())
    }
}

impl Serialize for LinkState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LinkState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let partner = Vec::<usize>::deserialize(deserializer)?;
        LinkState::from_one_based(&partner).map_err(serde::de::Error::custom)
    }
}

/// Bulk width and seam sizes of a strip with `(r, s)` boundary conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeamLayout {
    #[serde(rename = "N")]
    pub n_bulk: usize,
    pub rho: usize,
    pub s: usize,
}

impl SeamLayout {
    pub fn new(n_bulk: usize, rho: usize, s: usize) -> Result<Self> {
        if n_bulk == 0 {
            return Err(Error::Domain("bulk width N must be at least 1".into()));
        }
        if rho == 0 || s == 0 {
            return Err(Error::Domain(format!(
                "rho = {rho} and s = {s} must both be at least 1"
            )));
        }
        let total = n_bulk + rho + s;
        if total % 2 != 0 {
            return Err(Error::Parity(total));
        }
        Ok(SeamLayout { n_bulk, rho, s })
    }

    /// Layout for Kac labels `(r, s)` with the chosen parity of `rho`.
    pub fn from_kac(n_bulk: usize, r: usize, s: usize, parity: RhoParity) -> Result<Self> {
        if r == 0 {
            return Err(Error::Domain("Kac label r must be at least 1".into()));
        }
        SeamLayout::new(n_bulk, parity.rho(r), s)
    }

    /// Kac label `r = ceil(rho / 2)`.
    pub fn r(&self) -> usize {
        self.rho.div_ceil(2)
    }

    pub fn rho_parity(&self) -> RhoParity {
        if self.rho % 2 == 0 {
            RhoParity::Even
        } else {
            RhoParity::Odd
        }
    }

    pub fn s_is_odd(&self) -> bool {
        self.s % 2 == 1
    }

    /// Total number of nodes `N + rho + s - 2`.
    pub fn total_nodes(&self) -> usize {
        self.n_bulk + self.rho + self.s - 2
    }

    /// 1-based node range of the r-type seam.
    pub fn r_seam(&self) -> std::ops::RangeInclusive<usize> {
        self.n_bulk + 1..=self.n_bulk + self.rho - 1
    }

    /// 1-based node range of the s-type seam.
    pub fn s_seam(&self) -> std::ops::RangeInclusive<usize> {
        self.n_bulk + self.rho..=self.n_bulk + self.rho + self.s - 2
    }

    /// True when no half-arc closes inside either seam.
    pub fn is_admissible(&self, state: &LinkState) -> bool {
        if state.len() != self.total_nodes() {
            return false;
        }
        let r_seam = self.r_seam();
        let s_seam = self.s_seam();
        (1..=state.len()).all(|i| {
            let j = state.partner(i);
            !(r_seam.contains(&i) && r_seam.contains(&j)) && !(s_seam.contains(&i) && s_seam.contains(&j))
        })
    }
}

impl fmt::Display for SeamLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} rho={} s={} (r={})", self.n_bulk, self.rho, self.s, self.r())
    }
}

/// Parity choice for realizing Kac label `r` by an r-seam of width `rho - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoParity {
    Even,
    Odd,
}

impl RhoParity {
    /// `rho = 2r` (even) or `rho = 2r - 1` (odd).
    pub fn rho(self, r: usize) -> usize {
        match self {
            RhoParity::Even => 2 * r,
            RhoParity::Odd => 2 * r - 1,
        }
    }
}

impl std::str::FromStr for RhoParity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(RhoParity::Even),
            "odd" => Ok(RhoParity::Odd),
            other => Err(Error::Domain(format!(
                "rho parity must be `even` or `odd`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for RhoParity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RhoParity::Even => "even",
            RhoParity::Odd => "odd",
        })
    }
}

/// The ordered basis of admissible link states for a layout.
#[derive(Clone, Debug)]
pub struct LinkBasis {
    layout: SeamLayout,
    states: Vec<LinkState>,
    index: HashMap<LinkState, usize>,
}

impl LinkBasis {
    pub fn layout(&self) -> SeamLayout {
        self.layout
    }

    pub fn states(&self) -> &[LinkState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &LinkState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn total_nodes(&self) -> usize {
        self.layout.total_nodes()
    }

    /// Every non-crossing matching on the layout's nodes, ignoring the seams.
    pub fn unrestricted(layout: SeamLayout) -> Result<Self> {
        let states = enumerate_matchings(layout.total_nodes())?;
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(LinkBasis { layout, states, index })
    }

    /// Positions of the admissible states inside [`LinkBasis::unrestricted`].
    pub fn admissible_positions(&self) -> Vec<usize> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| self.layout.is_admissible(s))
            .map(|(i, _)| i)
            .collect()
    }
}

/// All non-crossing perfect matchings on `n` nodes in lexicographic order of
/// their partner arrays.
pub fn enumerate_matchings(n: usize) -> Result<Vec<LinkState>> {
    if n % 2 != 0 {
        return Err(Error::Domain(format!("cannot pair an odd number of nodes ({n})")));
    }
    if n > 2 * 13 {
        return Err(Error::Domain(format!("{n} nodes exceeds the enumeration bound of 26")));
    }
    let mut out = Vec::new();
    let mut partner = vec![0u8; n];
    fill_matchings(&mut partner, 0, n, &mut |p| {
        out.push(LinkState::from_zero_based_unchecked(p.to_vec()))
    });
    out.sort();
    Ok(out)
}

// Fills `partner[lo..hi]`; `rest` holds the intervals still to be filled.
fn fill_matchings(partner: &mut [u8], lo: usize, hi: usize, emit: &mut dyn FnMut(&[u8])) {
    fn go(partner: &mut [u8], rest: &mut Vec<(usize, usize)>, emit: &mut dyn FnMut(&[u8])) {
        let Some((lo, hi)) = rest.pop() else {
            emit(partner);
            return;
        };
        if lo == hi {
            go(partner, rest, emit);
        } else {
            for k in (lo + 1..hi).step_by(2) {
                partner[lo] = k as u8;
                partner[k] = lo as u8;
                rest.push((k + 1, hi));
                rest.push((lo + 1, k));
                go(partner, rest, emit);
                rest.pop();
                rest.pop();
            }
        }
        rest.push((lo, hi));
    }
    let mut rest = vec![(lo, hi)];
    go(partner, &mut rest, emit);
}

/// The admissible link states of `layout` with their index.
pub fn build_basis(layout: SeamLayout) -> Result<LinkBasis> {
    let layout = SeamLayout::new(layout.n_bulk, layout.rho, layout.s)?;
    let states: Vec<LinkState> = enumerate_matchings(layout.total_nodes())?
        .into_iter()
        .filter(|st| layout.is_admissible(st))
        .collect();
    let expected = dimension(layout);
    if states.len() as u64 != expected {
        return Err(Error::Consistency(format!(
            "{layout}: enumerated {} link states but the dimension formula gives {expected}",
            states.len()
        )));
    }
    let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(LinkBasis { layout, states, index })
}

/// Exact binomial coefficient; zero for a negative lower index or `k > n`.
pub fn binomial(n: i64, k: i64) -> u64 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Dimension of the admissible link-state space,
/// `binom(N, (N - rho + s)/2) - binom(N, (N - rho - s)/2)`.
pub fn dimension(layout: SeamLayout) -> u64 {
    let n = layout.n_bulk as i64;
    let rho = layout.rho as i64;
    let s = layout.s as i64;
    let hi = n - rho + s;
    let lo = n - rho - s;
    if hi % 2 != 0 {
        return 0;
    }
    binomial(n, hi / 2) - binomial(n, lo / 2)
}

/// Acts with the Temperley-Lieb generator `e_j` (1-based, `1 <= j < n`).
///
/// Returns the resulting state and the number of closed loops (0 or 1); the
/// caller weights the term by `beta^loops`.
pub fn apply_generator(state: &LinkState, j: usize) -> Result<(LinkState, u32)> {
    let n = state.len();
    if j == 0 || j >= n {
        return Err(Error::Domain(format!("generator e_{j} out of range for {n} nodes")));
    }
    let mut partner = state.partner.clone();
    let loops = apply_generator_raw(&mut partner, j - 1);
    Ok((LinkState { partner }, loops))
}

/// In-place `e` on zero-based positions `(i, i + 1)`.
#[inline]
pub(crate) fn apply_generator_raw(partner: &mut [u8], i: usize) -> u32 {
    let a = partner[i] as usize;
    if a == i + 1 {
        return 1;
    }
    let b = partner[i + 1] as usize;
    partner[a] = b as u8;
    partner[b] = a as u8;
    partner[i] = (i + 1) as u8;
    partner[i + 1] = i as u8;
    0
}
