//! Planar face diagrams contracted into matrices on link-state bases.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rustc_hash::FxHashMap;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linkstates::{apply_generator_raw, LinkBasis, LinkState, SeamLayout};
use crate::registry::Registry;

/// `sin v / sin lambda`.
pub fn s_weight(v: f64, lambda: f64) -> f64 {
    v.sin() / lambda.sin()
}

/// Loop fugacity `2 cos lambda`, exactly zero at `lambda = pi/2`.
pub fn loop_fugacity(lambda: f64) -> f64 {
    if lambda == FRAC_PI_2 {
        0.0
    } else {
        2.0 * lambda.cos()
    }
}

/// Chebyshev polynomial of the second kind `U_m(beta/2)` for `m >= -1`.
pub fn chebyshev_u(m: i64, beta: f64) -> f64 {
    if m < 0 {
        return 0.0;
    }
    let (mut prev, mut cur) = (0.0, 1.0);
    for _ in 0..m {
        let next = beta * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// The two elementary tiles of a face.
///
/// `A` joins west to north and south to east; `B` joins west to south and
/// north to east.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tile {
    A,
    B,
}

/// A face either carries a spectral parameter or is frozen to one tile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Face {
    Param(f64),
    Fixed(Tile),
}

impl Face {
    /// Weights of tiles `A` and `B`.
    pub fn weights(self, lambda: f64) -> (f64, f64) {
        match self {
            Face::Param(v) => (s_weight(lambda - v, lambda), s_weight(v, lambda)),
            Face::Fixed(Tile::A) => (1.0, 0.0),
            Face::Fixed(Tile::B) => (0.0, 1.0),
        }
    }
}

/// One column of the double-row tangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Column {
    pub bottom: Face,
    pub top: Face,
}

/// The two-row face grid of a double-row tangle with arcs closing both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceGrid {
    pub columns: Vec<Column>,
    pub u: f64,
    pub xi: f64,
    pub lambda: f64,
}

impl FaceGrid {
    /// The `(r, s)` double-row grid at crossing parameter `lambda`.
    pub fn double_row(layout: SeamLayout, u: f64, xi: f64, lambda: f64) -> Self {
        let xi_j = |j: usize| xi + j as f64 * lambda;
        let mut columns = Vec::with_capacity(layout.total_nodes());
        for _ in 0..layout.n_bulk {
            columns.push(Column {
                bottom: Face::Param(u),
                top: Face::Param(lambda - u),
            });
        }
        for m in 1..layout.rho {
            columns.push(Column {
                bottom: Face::Param(u - xi_j(layout.rho - m)),
                top: Face::Param(-u - xi_j(layout.rho - 1 - m)),
            });
        }
        for _ in 1..layout.s {
            columns.push(Column {
                bottom: Face::Fixed(Tile::A),
                top: Face::Fixed(Tile::B),
            });
        }
        FaceGrid { columns, u, xi, lambda }
    }

    pub fn beta(&self) -> f64 {
        loop_fugacity(self.lambda)
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

/// Dense operator on a link basis together with its build parameters.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub layout: SeamLayout,
    pub u: f64,
    pub xi: f64,
    pub lambda: f64,
    pub normalized: bool,
    /// Row = out-state index, column = in-state index.
    pub entries: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Entries as little-endian `f64` bytes in column-major order.
    pub fn to_column_major_bytes(&self) -> Vec<u8> {
        self.entries.as_slice().iter().flat_map(|x| x.to_le_bytes()).collect()
    }
}

impl Serialize for OperatorMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self.entries.row_iter().map(|r| r.iter().copied().collect()).collect();
        let mut st = serializer.serialize_struct("OperatorMatrix", 6)?;
        st.serialize_field("basis", &self.layout)?;
        st.serialize_field("u", &self.u)?;
        st.serialize_field("xi", &self.xi)?;
        st.serialize_field("lambda", &self.lambda)?;
        st.serialize_field("normalized", &self.normalized)?;
        st.serialize_field("entries", &rows)?;
        st.end()
    }
}

/// Result of contracting a face grid against a basis.
#[derive(Clone, Debug)]
pub struct Contraction {
    pub matrix: DMatrix<f64>,
    /// Largest absolute weight left on out-states outside the basis.
    pub leak: f64,
    /// Number of branches that closed a loop.
    pub loop_branches: u64,
    /// Total absolute weight carried into the output by loop-closing branches.
    pub loop_weight: f64,
}

/// A strategy for evaluating a double-row tangle on a link basis.
pub trait ContractionEngine: Send + Sync {
    fn contract(&self, grid: &FaceGrid, basis: &LinkBasis) -> Result<Contraction>;
}

/// Built-in contraction engines: `frontier` (default) and `naive`.
pub fn contraction_engines() -> Registry<dyn ContractionEngine> {
    let mut reg: Registry<dyn ContractionEngine> = Registry::new("contraction engine");
    reg.register("frontier", Box::new(FrontierEngine))
        .register("naive", Box::new(NaiveEngine));
    reg
}

/// Sweeps a frontier of open strands across the grid, one face at a time.
///
/// In-states are carried together: each frontier connectivity holds a row of
/// weights indexed by in-state. Connectivities are keyed by their opener mask
/// (bit `i` set when position `i` opens an arc), which determines a
/// non-crossing matching uniquely.
pub struct FrontierEngine;

/// In-states are swept in blocks of this many columns to bound memory.
const FRONTIER_BLOCK: usize = 256;

fn opener_mask(partner: &[u8]) -> u32 {
    partner
        .iter()
        .enumerate()
        .fold(0u32, |m, (i, &p)| if (p as usize) > i { m | 1 << i } else { m })
}

/// Partner of position `i` in the matching encoded by `mask`.
#[inline]
fn mask_partner(mask: u32, i: usize) -> usize {
    let mut depth = 0i32;
    if mask >> i & 1 == 1 {
        let mut j = i;
        loop {
            if mask >> j & 1 == 1 {
                depth += 1;
            } else {
                depth -= 1;
            }
            if depth == 0 {
                return j;
            }
            j += 1;
        }
    } else {
        let mut j = i;
        loop {
            if mask >> j & 1 == 1 {
                depth -= 1;
            } else {
                depth += 1;
            }
            if depth == 0 {
                return j;
            }
            j -= 1;
        }
    }
}

/// `e` on positions `(p, p + 1)`: `None` if a loop closes.
#[inline]
fn mask_join(mask: u32, p: usize) -> Option<u32> {
    let a = mask_partner(mask, p);
    if a == p + 1 {
        return None;
    }
    let b = mask_partner(mask, p + 1);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut m = mask | 1 << lo;
    m &= !(1u32 << hi);
    m |= 1 << p;
    m &= !(1u32 << (p + 1));
    Some(m)
}

fn mask_to_state(mask: u32, n: usize) -> LinkState {
    let mut partner = vec![0u8; n];
    let mut stack = Vec::with_capacity(n / 2);
    for i in 0..n {
        if mask >> i & 1 == 1 {
            stack.push(i);
        } else {
            let j = stack.pop().expect("balanced mask");
            partner[i] = j as u8;
            partner[j] = i as u8;
        }
    }
    LinkState::from_zero_based_unchecked(partner)
}

struct Frontier {
    keys: Vec<u32>,
    rows: Vec<f64>,
    index: FxHashMap<u32, usize>,
    width: usize,
}

impl Frontier {
    fn new(width: usize, capacity: usize) -> Self {
        Frontier {
            keys: Vec::with_capacity(capacity),
            rows: Vec::with_capacity(capacity * width),
            index: FxHashMap::with_capacity_and_hasher(capacity, Default::default()),
            width,
        }
    }

    fn slot(&mut self, key: u32) -> usize {
        let next = self.keys.len();
        let slot = *self.index.entry(key).or_insert(next);
        if slot == next {
            self.keys.push(key);
            self.rows.resize(self.rows.len() + self.width, 0.0);
        }
        slot
    }

    /// Applies `a I + b e` on positions `(p, p + 1)`.
    fn face(self, p: usize, a: f64, b: f64, beta: f64, stats: &mut (u64, f64)) -> Frontier {
        let w = self.width;
        let mut next = Frontier::new(w, self.keys.len() * 2);
        for (i, &key) in self.keys.iter().enumerate() {
            let row = &self.rows[i * w..(i + 1) * w];
            if b != 0.0 {
                match mask_join(key, p) {
                    Some(joined) => {
                        let s = next.slot(joined);
                        for (acc, x) in next.rows[s * w..(s + 1) * w].iter_mut().zip(row) {
                            *acc += b * x;
                        }
                    }
                    None => {
                        stats.0 += 1;
                        let wl = b * beta;
                        stats.1 += wl.abs() * row.iter().map(|x| x.abs()).sum::<f64>();
                        if wl != 0.0 {
                            let s = next.slot(key);
                            for (acc, x) in next.rows[s * w..(s + 1) * w].iter_mut().zip(row) {
                                *acc += wl * x;
                            }
                        }
                    }
                }
            }
            if a != 0.0 {
                let s = next.slot(key);
                for (acc, x) in next.rows[s * w..(s + 1) * w].iter_mut().zip(row) {
                    *acc += a * x;
                }
            }
        }
        next
    }
}

impl FrontierEngine {
    fn sweep(
        &self,
        grid: &FaceGrid,
        basis: &LinkBasis,
        targets: &FxHashMap<u32, usize>,
        cols: std::ops::Range<usize>,
        out: &mut Sweep,
    ) {
        let n = basis.total_nodes();
        let width = cols.len();
        let beta = grid.beta();
        let lambda = grid.lambda;

        // Cup the two auxiliary strands in at positions 0 and 1.
        let mut frontier = Frontier::new(width, width);
        for (k, st) in basis.states()[cols.clone()].iter().enumerate() {
            let s = frontier.slot(opener_mask(st.raw()) << 2 | 1);
            frontier.rows[s * width + k] = 1.0;
        }
        // Bottom row, left to right: tile A keeps strands, tile B is `e`.
        for (c, col) in grid.columns.iter().enumerate() {
            let (wa, wb) = col.bottom.weights(lambda);
            frontier = frontier.face(c + 1, wa, wb, beta, &mut out.stats);
        }
        // Top row, right to left: tile A is `e`, tile B keeps strands.
        for (c, col) in grid.columns.iter().enumerate().rev() {
            let (wa, wb) = col.top.weights(lambda);
            frontier = frontier.face(c + 1, wb, wa, beta, &mut out.stats);
        }
        // Cap positions 0 and 1. Position 1 opens an arc unless it closes the
        // one from 0; the cap then turns its partner into an opener.
        let mut leak: FxHashMap<u32, Vec<f64>> = FxHashMap::default();
        for (i, &key) in frontier.keys.iter().enumerate() {
            let row = &frontier.rows[i * width..(i + 1) * width];
            let (weight, mask) = if key >> 1 & 1 == 0 {
                out.stats.0 += 1;
                out.stats.1 += beta.abs() * row.iter().map(|x| x.abs()).sum::<f64>();
                (beta, key >> 2)
            } else {
                let b = mask_partner(key, 1);
                ((1.0), (key | 1 << b) >> 2)
            };
            if weight == 0.0 {
                continue;
            }
            match targets.get(&mask) {
                Some(&r) => {
                    for (k, x) in row.iter().enumerate() {
                        out.matrix[(r, cols.start + k)] += weight * x;
                    }
                }
                None => {
                    let acc = leak.entry(mask).or_insert_with(|| vec![0.0; width]);
                    for (a, x) in acc.iter_mut().zip(row) {
                        *a += weight * x;
                    }
                }
            }
        }
        debug_assert!(leak.keys().all(|&m| basis.index_of(&mask_to_state(m, n)).is_none()));
        out.leak = leak
            .values()
            .flat_map(|r| r.iter())
            .fold(out.leak, |m, x| m.max(x.abs()));
    }
}

struct Sweep {
    matrix: DMatrix<f64>,
    leak: f64,
    stats: (u64, f64),
}

impl ContractionEngine for FrontierEngine {
    fn contract(&self, grid: &FaceGrid, basis: &LinkBasis) -> Result<Contraction> {
        let n = basis.total_nodes();
        if grid.width() != n {
            return Err(Error::Domain(format!(
                "grid has {} columns but states have {n} nodes",
                grid.width()
            )));
        }
        if n + 2 > 32 {
            return Err(Error::Domain(format!("{n} nodes exceeds the frontier limit of 30")));
        }
        let dim = basis.len();
        let targets: FxHashMap<u32, usize> = basis
            .states()
            .iter()
            .enumerate()
            .map(|(i, s)| (opener_mask(s.raw()), i))
            .collect();
        let mut out = Sweep {
            matrix: DMatrix::zeros(dim, dim),
            leak: 0.0,
            stats: (0, 0.0),
        };
        let mut start = 0;
        while start < dim {
            let end = (start + FRONTIER_BLOCK).min(dim);
            self.sweep(grid, basis, &targets, start..end, &mut out);
            start = end;
        }
        finish(out.matrix, out.leak, out.stats)
    }
}

fn finish(matrix: DMatrix<f64>, leak: f64, stats: (u64, f64)) -> Result<Contraction> {
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite transfer matrix entry".into()));
    }
    Ok(Contraction {
        matrix,
        leak,
        loop_branches: stats.0,
        loop_weight: stats.1,
    })
}

/// Expands every tile configuration of the grid and traces the resulting
/// planar connectivity with a union-find. Exponential in the number of faces.
pub struct NaiveEngine;

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

impl ContractionEngine for NaiveEngine {
    fn contract(&self, grid: &FaceGrid, basis: &LinkBasis) -> Result<Contraction> {
        let n = basis.total_nodes();
        if grid.width() != n {
            return Err(Error::Domain(format!(
                "grid has {} columns but states have {n} nodes",
                grid.width()
            )));
        }
        let free: Vec<(usize, usize)> = (0..2)
            .flat_map(|row| (1..=n).map(move |c| (row, c)))
            .filter(|&(row, c)| {
                let col = &grid.columns[c - 1];
                matches!(if row == 0 { col.bottom } else { col.top }, Face::Param(_))
            })
            .collect();
        if free.len() > 24 {
            return Err(Error::Domain(format!(
                "{} free faces is too many for brute force",
                free.len()
            )));
        }
        let beta = grid.beta();
        let lambda = grid.lambda;
        let dim = basis.len();
        let mut matrix = DMatrix::zeros(dim, dim);
        let mut leak: HashMap<LinkState, Vec<f64>> = HashMap::new();
        let mut stats = (0u64, 0.0f64);

        // Edge ids: vertical V(row, c) for c in 0..=n, horizontal H(level, c) for c in 1..=n.
        let v = |row: usize, c: usize| row * (n + 1) + c;
        let h = |level: usize, c: usize| 2 * (n + 1) + level * n + (c - 1);
        let total = 2 * (n + 1) + 3 * n;

        for config in 0u64..(1u64 << free.len()) {
            let mut tiles = vec![[Tile::A; 2]; n + 1];
            let mut weight = 1.0;
            for c in 1..=n {
                let col = &grid.columns[c - 1];
                for (row, face) in [(0, col.bottom), (1, col.top)] {
                    tiles[c][row] = match face {
                        Face::Fixed(t) => t,
                        Face::Param(_) => {
                            let bit = free.iter().position(|&f| f == (row, c)).unwrap();
                            let (wa, wb) = face.weights(lambda);
                            if config >> bit & 1 == 0 {
                                weight *= wa;
                                Tile::A
                            } else {
                                weight *= wb;
                                Tile::B
                            }
                        }
                    };
                }
            }
            if weight == 0.0 {
                continue;
            }
            for (k, st) in basis.states().iter().enumerate() {
                let mut uf = UnionFind::new(total);
                uf.union(v(0, 0), v(1, 0));
                uf.union(v(0, n), v(1, n));
                for c in 1..=n {
                    for row in 0..2 {
                        let (s, nn, w, e) = (h(row, c), h(row + 1, c), v(row, c - 1), v(row, c));
                        match tiles[c][row] {
                            Tile::A => {
                                uf.union(w, nn);
                                uf.union(s, e);
                            }
                            Tile::B => {
                                uf.union(w, s);
                                uf.union(nn, e);
                            }
                        }
                    }
                    let p = st.partner(c);
                    if p > c {
                        uf.union(h(0, c), h(0, p));
                    }
                }
                let mut roots_with_out = HashMap::new();
                for c in 1..=n {
                    let r = uf.find(h(2, c));
                    roots_with_out.entry(r).or_insert_with(Vec::new).push(c);
                }
                let mut all_roots: Vec<usize> = (0..total).map(|x| uf.find(x)).collect();
                all_roots.sort_unstable();
                all_roots.dedup();
                let loops = all_roots.iter().filter(|r| !roots_with_out.contains_key(r)).count() as i32;
                let mut partner = vec![0usize; n];
                for ends in roots_with_out.values() {
                    if ends.len() != 2 {
                        return Err(Error::Consistency("open strand without two top endpoints".into()));
                    }
                    partner[ends[0] - 1] = ends[1];
                    partner[ends[1] - 1] = ends[0];
                }
                let w = weight * beta.powi(loops);
                if loops > 0 {
                    stats.0 += 1;
                    stats.1 += w.abs();
                }
                if w == 0.0 {
                    continue;
                }
                let out = LinkState::from_one_based(&partner)?;
                match basis.index_of(&out) {
                    Some(i) => matrix[(i, k)] += w,
                    None => leak.entry(out).or_insert_with(|| vec![0.0; dim])[k] += w,
                }
            }
        }
        let leak = leak.values().flat_map(|r| r.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
        finish(matrix, leak, stats)
    }
}

/// Contracts the `(r, s)` double-row tangle at `lambda = pi/2`.
///
/// Out-states that close a half-arc inside a seam are discarded: the seams
/// act as projectors, so only the admissible quotient is kept.
pub fn contract_double_row(basis: &LinkBasis, u: f64, xi: f64) -> Result<OperatorMatrix> {
    contract_with(&FrontierEngine, basis, u, xi)
}

/// Contracts with an explicit engine.
pub fn contract_with(engine: &dyn ContractionEngine, basis: &LinkBasis, u: f64, xi: f64) -> Result<OperatorMatrix> {
    let grid = FaceGrid::double_row(basis.layout(), u, xi, FRAC_PI_2);
    let c = engine.contract(&grid, basis)?;
    Ok(OperatorMatrix {
        layout: basis.layout(),
        u,
        xi,
        lambda: FRAC_PI_2,
        normalized: false,
        entries: c.matrix,
    })
}

/// Matrix of `e_j` (1-based) on `basis`; out-states outside the basis are dropped.
pub fn generator_matrix(basis: &LinkBasis, j: usize, beta: f64) -> Result<DMatrix<f64>> {
    let dim = basis.len();
    let n = basis.total_nodes();
    if j == 0 || j >= n {
        return Err(Error::Domain(format!("generator e_{j} out of range for {n} nodes")));
    }
    let mut m = DMatrix::zeros(dim, dim);
    for (k, st) in basis.states().iter().enumerate() {
        let mut p = st.raw().to_vec();
        let loops = apply_generator_raw(&mut p, j - 1);
        let w = beta.powi(loops as i32);
        if w == 0.0 {
            continue;
        }
        if let Some(i) = basis.index_of(&LinkState::from_zero_based_unchecked(p)) {
            m[(i, k)] += w;
        }
    }
    Ok(m)
}

/// Layout hosting the boundary operator: the strand at position 0 is node
/// `rho + 3`, preceded by enough free strands to pair with every seam node.
pub fn boundary_layout(rho: usize) -> Result<SeamLayout> {
    SeamLayout::new(rho + 3, rho, 1)
}

/// Generator index of the boundary position 0 in [`boundary_layout`].
pub fn boundary_offset(layout: SeamLayout) -> usize {
    layout.n_bulk
}

/// Normalization `prod_{j=1}^{rho-1} s(u + xi_{j-1}) s(u - xi_{j+1})`.
pub fn eta(rho: usize, u: f64, xi: f64, lambda: f64) -> f64 {
    (1..rho)
        .map(|j| {
            s_weight(u + xi + (j - 1) as f64 * lambda, lambda) * s_weight(u - xi - (j + 1) as f64 * lambda, lambda)
        })
        .product()
}

/// Products of TL generators on the unrestricted module of a layout.
pub struct TlWords {
    full: LinkBasis,
    beta: f64,
    gens: Vec<DMatrix<f64>>,
    keep: Vec<usize>,
}

impl TlWords {
    pub fn new(layout: SeamLayout, beta: f64) -> Result<Self> {
        let full = LinkBasis::unrestricted(layout)?;
        let n = full.total_nodes();
        let gens = (1..n)
            .map(|j| generator_matrix(&full, j, beta))
            .collect::<Result<_>>()?;
        let keep = full.admissible_positions();
        Ok(TlWords { full, beta, gens, keep })
    }

    pub fn dim(&self) -> usize {
        self.full.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }

    /// `e_j` for 1-based `j`.
    pub fn e(&self, j: usize) -> Result<&DMatrix<f64>> {
        self.gens.get(j.wrapping_sub(1)).ok_or_else(|| {
            Error::Domain(format!(
                "generator e_{j} out of range for {} nodes",
                self.full.total_nodes()
            ))
        })
    }

    /// Face operator `s(lambda - v) I + s(v) e_j`.
    pub fn face(&self, j: usize, v: f64, lambda: f64) -> Result<DMatrix<f64>> {
        Ok(self.identity() * s_weight(lambda - v, lambda) + self.e(j)? * s_weight(v, lambda))
    }

    /// The word `e_j e_{j+1} ... e_{j+k}` as an operator product.
    pub fn ascending(&self, j: usize, k: usize) -> Result<DMatrix<f64>> {
        let mut m = self.identity();
        for i in j..=j + k {
            m *= self.e(i)?;
        }
        Ok(m)
    }

    /// Generalized projector `sum_k (-1)^k U_{rho-k-2} e_start ... e_{start+k}`.
    pub fn projector(&self, rho: usize, start: usize) -> Result<DMatrix<f64>> {
        if rho < 2 {
            return Err(Error::Domain(format!("projector needs rho >= 2, got {rho}")));
        }
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for k in 0..=rho - 2 {
            let coeff = chebyshev_u((rho - k - 2) as i64, self.beta);
            if coeff != 0.0 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                m += self.ascending(start, k)? * (sign * coeff);
            }
        }
        Ok(m)
    }

    /// Restriction to the seam-admissible states.
    pub fn restrict(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.select_rows(&self.keep).select_columns(&self.keep)
    }
}

fn boundary_coefficient(rho: usize, u: f64, xi: f64, lambda: f64) -> f64 {
    let xi_rho = xi + rho as f64 * lambda;
    s_weight(2.0 * u, lambda) / (s_weight(u + xi, lambda) * s_weight(u - xi_rho, lambda))
}

/// Unnormalized product of face operators building the boundary operator on
/// the unrestricted module of `words`, with position 0 at generator `offset`.
fn boundary_product(words: &TlWords, offset: usize, rho: usize, u: f64, xi: f64, lambda: f64) -> Result<DMatrix<f64>> {
    let xi_j = |j: usize| xi + j as f64 * lambda;
    let mut k = words.identity();
    for j in 0..rho.saturating_sub(1) {
        k *= words.face(offset + j, u - xi_j(rho - 1 - j), lambda)?;
    }
    for j in (0..rho.saturating_sub(1)).rev() {
        k *= words.face(offset + j, u + xi_j(rho - 1 - j), lambda)?;
    }
    Ok(k)
}

/// The r-type boundary operator `K^(rho)(u, xi)` on the seam-restricted basis
/// of [`boundary_layout`].
pub fn boundary_operator_planar(rho: usize, u: f64, xi: f64, lambda: f64) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    let layout = boundary_layout(rho)?;
    let words = TlWords::new(layout, loop_fugacity(lambda))?;
    let norm = eta(rho, u, xi, lambda);
    if norm.abs() < 1e-300 || !norm.is_finite() {
        return Err(Error::SingularNormalization(format!(
            "eta^({rho})(u={u}, xi={xi}) = {norm}"
        )));
    }
    let k = boundary_product(&words, boundary_offset(layout), rho, u, xi, lambda)?;
    Ok(OperatorMatrix {
        layout,
        u,
        xi,
        lambda,
        normalized: true,
        entries: words.restrict(&k) / norm,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < std::f64::consts::PI) {
        return Err(Error::Domain(format!("crossing parameter {lambda} outside (0, pi)")));
    }
    Ok(())
}

/// `P_start^(rho)` restricted to the seam-admissible states of `layout`.
pub fn generalized_projector(rho: usize, start: usize, lambda: f64, layout: SeamLayout) -> Result<OperatorMatrix> {
    check_lambda(lambda)?;
    let words = TlWords::new(layout, loop_fugacity(lambda))?;
    if start == 0 || start + rho.saturating_sub(2) >= layout.total_nodes() {
        return Err(Error::Domain(format!(
            "P^({rho}) starting at {start} does not fit on {} nodes",
            layout.total_nodes()
        )));
    }
    let p = words.projector(rho, start)?;
    Ok(OperatorMatrix {
        layout,
        u: 0.0,
        xi: 0.0,
        lambda,
        normalized: false,
        entries: words.restrict(&p),
    })
}

/// Largest entrywise deviation of the planar boundary operator from
/// `I + s(2u)/(s(u+xi)s(u-xi_rho)) P_0^(rho)`, together with the deviation of
/// the expansion coefficients fitted against the words `e_0 ... e_k`.
pub fn verify_boundary_proposition(rho: usize, u: f64, xi: f64, lambda: f64) -> Result<f64> {
    let k = boundary_operator_planar(rho, u, xi, lambda)?;
    if rho == 1 {
        let id = DMatrix::identity(k.dim(), k.dim());
        return Ok((k.entries - id).abs().max());
    }
    let layout = k.layout;
    let beta = loop_fugacity(lambda);
    let words = TlWords::new(layout, beta)?;
    let offset = boundary_offset(layout);
    let coeff = boundary_coefficient(rho, u, xi, lambda);
    let closed = words.restrict(&(words.identity() + words.projector(rho, offset)? * coeff));
    let mut dev = (&k.entries - &closed).abs().max();

    // Fit K against I, e_0, e_0 e_1, ..., e_0 ... e_{rho-2}.
    let basis: Vec<DMatrix<f64>> = std::iter::once(Ok(words.restrict(&words.identity())))
        .chain((0..rho - 1).map(|i| words.ascending(offset, i).map(|w| words.restrict(&w))))
        .collect::<Result<_>>()?;
    let len = k.entries.len();
    let design = DMatrix::from_fn(len, basis.len(), |r, c| basis[c].as_slice()[r]);
    let target = nalgebra::DVector::from_column_slice(k.entries.as_slice());
    let svd = design.svd(true, true);
    let fitted = svd
        .solve(&target, 1e-12)
        .map_err(|e| Error::Numeric(format!("word-basis fit failed: {e}")))?;
    for (i, &c) in fitted.iter().enumerate() {
        let expected = if i == 0 {
            1.0
        } else {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            sign * chebyshev_u(rho as i64 - i as i64 - 1, beta) * coeff
        };
        dev = dev.max((c - expected).abs());
    }
    Ok(dev)
}

/// Largest deviation among the projector identities
/// `P^(rho') P^(rho) = U_{rho'-1} P^(rho)`, `P_1^(rho) e_0 = 0`,
/// `e_0 P_1^(rho) = U_{rho-1} e_0 - P_0^(rho+1)` and
/// `e_0 P_1^(rho) e_0 = U_{rho-2} e_0`, as restricted matrix identities.
pub fn verify_projector_properties(rho: usize, rho_prime: usize, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if rho < 2 || rho_prime < 2 {
        return Err(Error::Domain("projector identities need rho, rho' >= 2".into()));
    }
    let beta = loop_fugacity(lambda);
    let u = |m: usize| chebyshev_u(m as i64, beta);

    let layout = boundary_layout(rho.max(rho_prime))?;
    let words = TlWords::new(layout, beta)?;
    let o = boundary_offset(layout);
    let p = words.projector(rho, o)?;
    let lhs = words.restrict(&(words.projector(rho_prime, o)? * &p));
    let mut dev = (lhs - words.restrict(&p) * u(rho_prime - 1)).abs().max();

    let layout = boundary_layout(rho + 1)?;
    let words = TlWords::new(layout, beta)?;
    let o = boundary_offset(layout);
    let e0 = words.e(o)?;
    let p1 = words.projector(rho, o + 1)?;
    dev = dev.max(words.restrict(&(&p1 * e0)).abs().max());
    let rhs = e0 * u(rho - 1) - words.projector(rho + 1, o)?;
    dev = dev.max(words.restrict(&(e0 * &p1 - rhs)).abs().max());
    dev = dev.max(words.restrict(&(e0 * &p1 * e0 - e0 * u(rho - 2))).abs().max());
    Ok(dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkstates::build_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

    fn layout(n: usize, rho: usize, s: usize) -> SeamLayout {
        SeamLayout::new(n, rho, s).unwrap()
    }

    #[test]
    fn two_column_tangle_is_sin_2u() {
        let basis = build_basis(layout(2, 1, 1)).unwrap();
        for u in [0.1, 0.37, 1.2, -0.4] {
            let d = contract_double_row(&basis, u, FRAC_PI_4).unwrap();
            assert!((d.entries[(0, 0)] - (2.0 * u).sin()).abs() < 1e-14, "u = {u}");
        }
    }

    #[test]
    fn frontier_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            for rho in 1..=3 {
                for s in 1..=3 {
                    let Ok(l) = SeamLayout::new(n, rho, s) else { continue };
                    let basis = build_basis(l).unwrap();
                    for _ in 0..5 {
                        let u = rng.gen_range(-1.5..1.5);
                        let grid = FaceGrid::double_row(l, u, FRAC_PI_4, FRAC_PI_2);
                        let a = FrontierEngine.contract(&grid, &basis).unwrap();
                        let b = NaiveEngine.contract(&grid, &basis).unwrap();
                        assert!((&a.matrix - &b.matrix).abs().max() <= 1e-12, "{l} u = {u}");
                        assert!((a.leak - b.leak).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn loop_branches_carry_no_weight() {
        let l = layout(5, 2, 1);
        let basis = build_basis(l).unwrap();
        let grid = FaceGrid::double_row(l, 0.3, FRAC_PI_4, FRAC_PI_2);
        let c = FrontierEngine.contract(&grid, &basis).unwrap();
        assert!(c.loop_branches > 0);
        assert_eq!(c.loop_weight, 0.0);
    }

    #[test]
    fn inadmissible_span_is_invariant() {
        for (n, rho, s) in [(3, 3, 2), (4, 3, 3), (2, 4, 2), (3, 2, 3), (4, 4, 2)] {
            let l = layout(n, rho, s);
            let full = LinkBasis::unrestricted(l).unwrap();
            let grid = FaceGrid::double_row(l, 0.41, FRAC_PI_4, FRAC_PI_2);
            let d = FrontierEngine.contract(&grid, &full).unwrap().matrix;
            for (i, out) in full.states().iter().enumerate() {
                for (k, inp) in full.states().iter().enumerate() {
                    if l.is_admissible(out) && !l.is_admissible(inp) {
                        assert!(d[(i, k)].abs() < 1e-13, "{l}: {inp} -> {out} has {}", d[(i, k)]);
                    }
                }
            }
        }
    }

    #[test]
    fn chebyshev_values() {
        assert_eq!(chebyshev_u(-1, 0.3), 0.0);
        assert_eq!(chebyshev_u(0, 0.3), 1.0);
        let b = 2.0 * (PI / 5.0).cos();
        assert!((chebyshev_u(3, b) - (b * b * b - 2.0 * b)).abs() < 1e-14);
        let exact: Vec<f64> = (0..6).map(|m| chebyshev_u(m, 0.0)).collect();
        assert_eq!(exact, vec![1.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn boundary_operator_examples() {
        let k = boundary_operator_planar(1, 0.3, 0.5, FRAC_PI_3).unwrap();
        assert!((k.entries.clone() - DMatrix::identity(k.dim(), k.dim())).abs().max() < 1e-15);
        for rho in 2..=5 {
            let k = boundary_operator_planar(rho, 0.0, 0.6, FRAC_PI_2).unwrap();
            assert!(
                (k.entries.clone() - DMatrix::identity(k.dim(), k.dim())).abs().max() < 1e-13,
                "rho = {rho}"
            );
        }
        // rho = 2: I + s(2u)/(s(u+xi)s(u-xi_2)) e_0.
        let (u, xi, lam) = (0.23, 0.71, FRAC_PI_3);
        let k = boundary_operator_planar(2, u, xi, lam).unwrap();
        let words = TlWords::new(k.layout, loop_fugacity(lam)).unwrap();
        let c = s_weight(2.0 * u, lam) / (s_weight(u + xi, lam) * s_weight(u - xi - 2.0 * lam, lam));
        let expect = words.restrict(&(words.identity() + words.e(boundary_offset(k.layout)).unwrap() * c));
        assert!((k.entries - expect).abs().max() < 1e-13);
    }

    #[test]
    fn singular_eta_is_reported() {
        // s(u + xi) vanishes at u = -xi.
        let err = boundary_operator_planar(2, -0.5, 0.5, FRAC_PI_2).unwrap_err();
        assert!(matches!(err, Error::SingularNormalization(_)));
    }

    #[test]
    fn projector_examples() {
        let l = layout(5, 4, 1);
        let beta = 0.0;
        let words = TlWords::new(l, beta).unwrap();
        let p2 = words.projector(2, 5).unwrap();
        assert_eq!(p2, words.e(5).unwrap().clone());
        let p3 = words.projector(3, 5).unwrap();
        assert_eq!(p3, -(words.e(5).unwrap() * words.e(6).unwrap()));
        let lam = 2.0 * PI / 5.0;
        let b = loop_fugacity(lam);
        let words = TlWords::new(l, b).unwrap();
        let (e5, e6, e7) = (words.e(5).unwrap(), words.e(6).unwrap(), words.e(7).unwrap());
        let p4 = e5 * (b * b - 1.0) - e5 * e6 * b + e5 * e6 * e7;
        assert!((words.projector(4, 5).unwrap() - p4).abs().max() < 1e-14);
        assert!(generalized_projector(4, 8, lam, l).is_err());
        assert_eq!(
            generalized_projector(2, 5, lam, l).unwrap().dim(),
            build_basis(l).unwrap().len()
        );
    }

    #[test]
    fn projector_property_examples() {
        assert!(verify_projector_properties(2, 2, FRAC_PI_3).unwrap() <= 1e-12);
        assert!(verify_projector_properties(3, 4, 2.0 * PI / 5.0).unwrap() <= 1e-10);
        // At beta = 0, U_3(0) = 0 kills P^(4) P^(rho).
        let l = boundary_layout(4).unwrap();
        let words = TlWords::new(l, 0.0).unwrap();
        let o = boundary_offset(l);
        for rho in 2..=4 {
            let prod = words.restrict(&(words.projector(4, o).unwrap() * words.projector(rho, o).unwrap()));
            assert_eq!(prod.abs().max(), 0.0, "rho = {rho}");
        }
    }

    #[test]
    fn proposition_holds_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for lam in [FRAC_PI_2, FRAC_PI_3] {
            for rho in 1..=4 {
                for _ in 0..3 {
                    let (u, xi) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.4));
                    let dev = verify_boundary_proposition(rho, u, xi, lam).unwrap();
                    assert!(dev <= 1e-10, "rho = {rho}, lambda = {lam}: {dev}");
                }
            }
        }
    }

    #[test]
    fn operator_matrix_serialization() {
        let basis = build_basis(layout(4, 1, 1)).unwrap();
        let d = contract_double_row(&basis, 0.3, FRAC_PI_4).unwrap();
        let v: serde_json::Value = serde_json::to_value(&d).unwrap();
        assert_eq!(v["basis"]["N"], 4);
        assert_eq!(v["entries"].as_array().unwrap().len(), 2);
        assert_eq!(v["entries"][0][1].as_f64().unwrap(), d.entries[(0, 1)]);
        let bytes = d.to_column_major_bytes();
        assert_eq!(bytes.len(), 32);
        let second = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        assert_eq!(second, d.entries[(1, 0)]);
    }
}
