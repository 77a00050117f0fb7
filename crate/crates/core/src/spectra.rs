//! Spectra of `d(u)` classified by sign patterns of their zeros.
//!
//! Every eigenvalue has the product form
//! `Π_j (1 + ε_j sin t_j sin 2u)(1 + μ_j sin t_j sin 2u)` over `M` levels,
//! so a pattern is fixed by how many of each pair `(ε_j, μ_j)` are negative.
//!
//! For odd `ρ` there is one more level `M + 1` at `t = π/2`, occupied at most
//! once. Occupying it multiplies the eigenvalue by `(1 + sin 2u)/(1 - sin 2u)`
//! and adds `E_{M+1} = N/2` to the energy. The factor cancels in the
//! inversion identity, so only the spectrum sees it.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Complex, DMatrix};
use num_rational::Ratio;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linkstates::SeamLayout;
use crate::qseries::{level_count, QExpPoly, UNITS};
use crate::registry::Registry;
use crate::transfer::{hamiltonian, Sector};

/// Default probe points for classification.
pub const PROBES: [f64; 2] = [PI / 6.0, 0.41];

/// Extra probe used when two patterns coincide at both default probes.
pub const THIRD_PROBE: f64 = 0.2345;

/// Largest level count for which all `3^M` patterns are enumerated.
pub const MAX_LEVELS: usize = 12;

/// Minus counts per level, each in `{0, 1, 2}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignPattern {
    minus: Vec<u8>,
    edge: bool,
}

impl SignPattern {
    pub fn new(minus: Vec<u8>) -> Result<Self> {
        if let Some(bad) = minus.iter().find(|&&m| m > 2) {
            return Err(Error::Domain(format!("minus count {bad} outside 0..=2")));
        }
        Ok(SignPattern { minus, edge: false })
    }

    /// Pattern with the odd-`ρ` edge level occupied or not.
    pub fn with_edge(minus: Vec<u8>, edge: bool) -> Result<Self> {
        Ok(SignPattern {
            edge,
            ..SignPattern::new(minus)?
        })
    }

    pub fn all_plus(levels: usize) -> Self {
        SignPattern {
            minus: vec![0; levels],
            edge: false,
        }
    }

    pub fn levels(&self) -> usize {
        self.minus.len()
    }

    pub fn minus(&self) -> &[u8] {
        &self.minus
    }

    pub fn edge(&self) -> bool {
        self.edge
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.minus, if self.edge { "+edge" } else { "" })
    }
}

/// `t_j = jπ/N` (s odd) or `(2j-1)π/2N` (s even), `j` one-based.
pub fn level_angle(j: usize, n_bulk: usize, s_odd: bool) -> f64 {
    let n = n_bulk as f64;
    if s_odd {
        j as f64 * PI / n
    } else {
        (2 * j - 1) as f64 * PI / (2.0 * n)
    }
}

pub fn pattern_value(pattern: &SignPattern, u: f64, n_bulk: usize, s_odd: bool) -> f64 {
    let x = (2.0 * u).sin();
    let edge = if pattern.edge { (1.0 + x) / (1.0 - x) } else { 1.0 };
    edge * pattern
        .minus
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let a = level_angle(i + 1, n_bulk, s_odd).sin() * x;
            (1.0 + a).powi(2 - m as i32) * (1.0 - a).powi(m as i32)
        })
        .product::<f64>()
}

/// `Σ_j minus_j E_j` with `E_j = j` (s odd) or `j - 1/2` (s even).
pub fn pattern_energy(pattern: &SignPattern, s_odd: bool) -> Ratio<i64> {
    let twice_e = |i: usize| if s_odd { 2 * (i as i64 + 1) } else { 2 * i as i64 + 1 };
    let twice: i64 = pattern
        .minus
        .iter()
        .enumerate()
        .map(|(i, &m)| m as i64 * twice_e(i))
        .sum::<i64>()
        + if pattern.edge { twice_e(pattern.levels()) } else { 0 };
    Ratio::new(twice, 2)
}

/// Eigenvalue of `H` carried by a pattern: `-Σ_j (ε_j + μ_j) sin t_j`, less
/// 2 when the edge level is occupied.
pub fn hamiltonian_pattern_energy(pattern: &SignPattern, n_bulk: usize, s_odd: bool) -> f64 {
    let edge = if pattern.edge { 2.0 } else { 0.0 };
    -edge
        - pattern
            .minus
            .iter()
            .enumerate()
            .map(|(i, &m)| (2.0 - 2.0 * m as f64) * level_angle(i + 1, n_bulk, s_odd).sin())
            .sum::<f64>()
}

/// Lowest-energy pattern of a sector: single 1-strings on the lowest
/// levels, as many as the right column's excess occupation.
pub fn groundstate_pattern(layout: SeamLayout) -> SignPattern {
    let s = layout.s as i64;
    let gap = (2 * layout.r() as i64 - s).abs();
    let excess = if s % 2 == 1 { (gap - 1) / 2 } else { gap / 2 } as usize;
    let levels = level_count(layout.n_bulk, layout.s_is_odd());
    let mut minus = vec![0; levels];
    for m in minus.iter_mut().take(excess) {
        *m = 1;
    }
    SignPattern { minus, edge: false }
}

/// All `3^M` patterns in lexicographic order, each also with the edge level
/// occupied when `edge` is set.
pub fn candidate_patterns(levels: usize, edge: bool) -> Result<Vec<SignPattern>> {
    if levels > MAX_LEVELS {
        return Err(Error::Domain(format!(
            "{levels} levels exceeds the enumeration limit {MAX_LEVELS}"
        )));
    }
    let mut out = vec![Vec::with_capacity(levels)];
    for _ in 0..levels {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..3u8).map(move |m| {
                    let mut q = p.clone();
                    q.push(m);
                    q
                })
            })
            .collect();
    }
    let edges: &[bool] = if edge { &[false, true] } else { &[false] };
    Ok(edges
        .iter()
        .flat_map(|&e| {
            out.iter().map(move |m| SignPattern {
                minus: m.clone(),
                edge: e,
            })
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRecord {
    pub pattern: SignPattern,
    pub energy: Ratio<i64>,
    pub multiplicity: usize,
    /// Eigenvalue at each probe.
    pub values: Vec<f64>,
}

impl Serialize for SpectrumRecord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SpectrumRecord", 5)?;
        st.serialize_field("minus", &self.pattern.minus)?;
        st.serialize_field("edge", &self.pattern.edge)?;
        st.serialize_field("energy", &self.energy.to_string())?;
        st.serialize_field("multiplicity", &self.multiplicity)?;
        st.serialize_field("values", &self.values)?;
        st.end()
    }
}

/// Tolerances for eigenvalue matching, relative to the spectral scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatchTolerance {
    /// Window for counting eigenvalues near a predicted value.
    pub gate: f64,
    /// Bound on the deviation of cluster means from the prediction.
    pub tol: f64,
}

impl Default for MatchTolerance {
    fn default() -> Self {
        MatchTolerance { gate: 1e-8, tol: 1e-8 }
    }
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    let a = faer::Mat::<f64>::from_fn(n, m.ncols(), |i, j| m[(i, j)]);
    let eigs = a
        .eigenvalues()
        .map_err(|e| Error::Numeric(format!("eigenvalue iteration failed for a {n}x{n} matrix: {e:?}")))?;
    Ok(eigs.into_iter().map(|z| Complex::new(z.re, z.im)).collect())
}

/// Real parts of the eigenvalues of `m`; fails on imaginary parts beyond
/// `gate` times the spectral scale.
pub fn real_eigenvalues(m: &DMatrix<f64>, gate: f64) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eigs = eigenvalues(m)?;
    let scale = eigs.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut out = Vec::with_capacity(eigs.len());
    for z in eigs.iter() {
        if z.im.abs() > gate * scale {
            return Err(Error::Classification(format!(
                "eigenvalue {z} has imaginary part above {gate} * {scale}"
            )));
        }
        out.push(z.re);
    }
    Ok(out)
}

/// Groups of predicted values closer than `width`, as index lists sorted by
/// value.
fn clusters(values: &[f64], width: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match out.last_mut() {
            Some(last) if values[i] - values[*last.last().unwrap()] <= width => last.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Eigenvalues falling in each cluster's window; fails on strays.
fn bin_eigenvalues(values: &[f64], groups: &[Vec<usize>], eigs: &[f64], window: f64) -> Result<Vec<Vec<f64>>> {
    let bounds: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| (values[g[0]] - window, values[*g.last().unwrap()] + window))
        .collect();
    let mut bins = vec![Vec::new(); groups.len()];
    for &e in eigs {
        let k = bounds.partition_point(|&(_, hi)| hi < e);
        match bounds.get(k) {
            Some(&(lo, _)) if lo <= e => bins[k].push(e),
            _ => {
                let nearest = values.iter().map(|v| (v - e).abs()).fold(f64::INFINITY, f64::min);
                return Err(Error::Classification(format!(
                    "eigenvalue {e:.12} matches no pattern (nearest at distance {nearest:.3e})"
                )));
            }
        }
    }
    Ok(bins)
}

/// Classifies eigenvalues measured at several probes into pattern
/// multiplicities.
///
/// Each cluster of nearly equal predictions at a probe fixes the total
/// multiplicity of its members; clusters are solved by elimination until
/// every pattern is determined.
pub fn classify_eigenvalues(
    n_bulk: usize,
    s_odd: bool,
    edge: bool,
    probes: &[f64],
    eigenvalues: &[Vec<f64>],
    tolerance: MatchTolerance,
) -> Result<Vec<SpectrumRecord>> {
    if probes.len() < 2 || probes.len() != eigenvalues.len() {
        return Err(Error::Domain(
            "classification needs eigenvalues at two or more probes".into(),
        ));
    }
    let dim = eigenvalues[0].len();
    let patterns = candidate_patterns(level_count(n_bulk, s_odd), edge)?;
    let predicted: Vec<Vec<f64>> = probes
        .iter()
        .map(|&u| patterns.iter().map(|p| pattern_value(p, u, n_bulk, s_odd)).collect())
        .collect();

    // (members, count) constraints from every probe.
    let mut constraints: Vec<(Vec<usize>, usize)> = Vec::new();
    let mut binned = Vec::new();
    for (k, eigs) in eigenvalues.iter().enumerate() {
        let scale = predicted[k].iter().chain(eigs).map(|v| v.abs()).fold(1.0, f64::max);
        let window = tolerance.gate * scale;
        let groups = clusters(&predicted[k], 2.0 * window);
        let bins = bin_eigenvalues(&predicted[k], &groups, eigs, window)?;
        for (g, b) in groups.iter().zip(&bins) {
            constraints.push((g.clone(), b.len()));
        }
        binned.push((groups, bins, scale));
    }

    let mut mult: Vec<Option<usize>> = vec![None; patterns.len()];
    loop {
        let mut progress = false;
        for (members, count) in &constraints {
            let unknown: Vec<usize> = members.iter().copied().filter(|&i| mult[i].is_none()).collect();
            if unknown.is_empty() {
                continue;
            }
            let known: usize = members.iter().filter_map(|&i| mult[i]).sum();
            let rest = count.checked_sub(known).ok_or_else(|| {
                Error::Classification(format!(
                    "cluster holds {count} eigenvalues but {known} are already assigned"
                ))
            })?;
            if rest == 0 {
                for &i in &unknown {
                    mult[i] = Some(0);
                }
                progress = true;
            } else if unknown.len() == 1 {
                mult[unknown[0]] = Some(rest);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    let open: Vec<String> = (0..patterns.len())
        .filter(|&i| mult[i].is_none())
        .map(|i| patterns[i].to_string())
        .collect();
    if !open.is_empty() {
        return Err(Error::Ambiguous(format!(
            "patterns {} not separated by probes {probes:?}",
            open.join(" ")
        )));
    }
    let mult: Vec<usize> = mult.into_iter().map(|m| m.unwrap()).collect();
    for (members, count) in &constraints {
        let total: usize = members.iter().map(|&i| mult[i]).sum();
        if total != *count {
            return Err(Error::Classification(format!(
                "cluster holds {count} eigenvalues, patterns give {total}"
            )));
        }
    }
    let total: usize = mult.iter().sum();
    if total != dim {
        return Err(Error::Consistency(format!(
            "multiplicities sum to {total}, dimension is {dim}"
        )));
    }

    // Cluster means must reproduce the weighted predictions.
    for (k, (groups, bins, scale)) in binned.iter().enumerate() {
        for (g, b) in groups.iter().zip(bins) {
            if b.is_empty() {
                continue;
            }
            let mean = b.iter().sum::<f64>() / b.len() as f64;
            let expect = g.iter().map(|&i| mult[i] as f64 * predicted[k][i]).sum::<f64>() / b.len() as f64;
            if (mean - expect).abs() > tolerance.tol * scale {
                return Err(Error::Classification(format!(
                    "probe {}: eigenvalues average {mean:.15} but patterns predict {expect:.15}",
                    probes[k]
                )));
            }
        }
    }

    let mut records: Vec<SpectrumRecord> = patterns
        .iter()
        .enumerate()
        .filter(|&(i, _)| mult[i] > 0)
        .map(|(i, p)| SpectrumRecord {
            pattern: p.clone(),
            energy: pattern_energy(p, s_odd),
            multiplicity: mult[i],
            values: predicted.iter().map(|v| v[i]).collect(),
        })
        .collect();
    records.sort_by(|a, b| a.energy.cmp(&b.energy).then_with(|| a.pattern.cmp(&b.pattern)));
    Ok(records)
}

/// Diagonalizes `d(u)` at each probe and classifies the spectrum.
pub fn classify_spectrum(sector: &Sector, probes: &[f64], tolerance: MatchTolerance) -> Result<Vec<SpectrumRecord>> {
    let layout = sector.layout();
    let eigenvalues = probes
        .iter()
        .map(|&u| real_eigenvalues(&sector.small_d(u)?.entries, tolerance.gate))
        .collect::<Result<Vec<_>>>()?;
    classify_eigenvalues(
        layout.n_bulk,
        layout.s_is_odd(),
        layout.rho % 2 == 1,
        probes,
        &eigenvalues,
        tolerance,
    )
}

/// Classification at the default probes, adding a third on ambiguity.
pub fn classify(sector: &Sector, tolerance: MatchTolerance) -> Result<Vec<SpectrumRecord>> {
    match classify_spectrum(sector, &PROBES, tolerance) {
        Err(Error::Ambiguous(_)) => classify_spectrum(sector, &[PROBES[0], PROBES[1], THIRD_PROBE], tolerance),
        other => other,
    }
}

/// `Σ multiplicity q^energy`.
pub fn generating_polynomial(records: &[SpectrumRecord]) -> QExpPoly {
    let mut p = QExpPoly::zero();
    for r in records {
        let e = r.energy * UNITS;
        p.add_term(e.to_integer(), r.multiplicity.into());
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonianReport {
    /// Largest deviation of a cluster mean of `H` eigenvalues from the
    /// pattern prediction.
    pub deviation: f64,
    pub clusters: usize,
    pub dim: usize,
}

/// Matches the spectrum of `H` against the pattern energies of `records`,
/// cluster by cluster, with multiplicities.
pub fn hamiltonian_check(
    sector: &Sector,
    records: &[SpectrumRecord],
    tolerance: MatchTolerance,
) -> Result<HamiltonianReport> {
    let layout = sector.layout();
    let h = hamiltonian(sector)?;
    let eigs = real_eigenvalues(&h.entries, tolerance.gate)?;
    let predicted: Vec<f64> = records
        .iter()
        .map(|r| hamiltonian_pattern_energy(&r.pattern, layout.n_bulk, layout.s_is_odd()))
        .collect();
    let scale = predicted.iter().chain(&eigs).map(|v| v.abs()).fold(1.0, f64::max);
    let window = tolerance.gate * scale;
    let groups = clusters(&predicted, 2.0 * window);
    let bins = bin_eigenvalues(&predicted, &groups, &eigs, window)?;
    let mut deviation: f64 = 0.0;
    for (g, b) in groups.iter().zip(&bins) {
        let want: usize = g.iter().map(|&i| records[i].multiplicity).sum();
        if want != b.len() {
            return Err(Error::Classification(format!(
                "H eigenvalue near {:.12} occurs {} times, patterns give {want}",
                predicted[g[0]],
                b.len()
            )));
        }
        let mean = b.iter().sum::<f64>() / b.len() as f64;
        let expect = g
            .iter()
            .map(|&i| records[i].multiplicity as f64 * predicted[i])
            .sum::<f64>()
            / want as f64;
        deviation = deviation.max((mean - expect).abs() / scale);
    }
    Ok(HamiltonianReport {
        deviation,
        clusters: groups.len(),
        dim: eigs.len(),
    })
}

/// Source of the leading eigenvalue of `d(u)` in a sector.
pub trait EigenSource: Send + Sync {
    fn leading_eigenvalue(&self, layout: SeamLayout, u: f64) -> Result<f64>;
}

/// Product form evaluated on the sector's groundstate pattern.
pub struct PatternSource;

impl EigenSource for PatternSource {
    fn leading_eigenvalue(&self, layout: SeamLayout, u: f64) -> Result<f64> {
        Ok(pattern_value(
            &groundstate_pattern(layout),
            u,
            layout.n_bulk,
            layout.s_is_odd(),
        ))
    }
}

/// Largest real eigenvalue of the assembled matrix.
pub struct DenseSource;

impl EigenSource for DenseSource {
    fn leading_eigenvalue(&self, layout: SeamLayout, u: f64) -> Result<f64> {
        let d = Sector::new(layout)?.small_d(u)?;
        real_eigenvalues(&d.entries, MatchTolerance::default().gate)?
            .into_iter()
            .reduce(f64::max)
            .ok_or_else(|| Error::Domain(format!("{layout} is empty")))
    }
}

pub fn eigen_sources() -> Registry<dyn EigenSource> {
    let mut reg: Registry<dyn EigenSource> = Registry::new("eigenvalue source");
    reg.register("pattern", Box::new(PatternSource))
        .register("dense", Box::new(DenseSource));
    reg
}
