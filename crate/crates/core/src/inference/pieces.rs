//! Activation-region collection and exact per-region LP inference.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::delu::{ActivationPattern, AffinePieceMap, DeluNetwork};
use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix};
use crate::lp::{solve_lp, LinearProgram, LpSolution};
use crate::problem::{check_f_max, Contract};

use super::{pick_best, InferenceMethod, InferenceResult};

/// Upper limit on distinct regions examined per inference call.
pub const MAX_PATTERNS: usize = 4096;

/// Largest hidden-unit count for which exhaustive enumeration is offered.
pub const MAX_ENUMERATION_UNITS: usize = 20;

/// Interpolation weights tried when pulling an LP vertex toward the
/// interior of its region.
const NUDGE_WEIGHTS: [f64; 5] = [1e-12, 1e-10, 1e-8, 1e-6, 1e-4];

/// One observed activation region.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternEntry {
    pub pattern: ActivationPattern,
    /// Lexicographically smallest distinct probe inside the region.
    pub representative: Vec<f64>,
    /// Number of distinct probes inside the region.
    pub count: usize,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

pub(crate) fn distinct_probes(probes: &[Contract]) -> Vec<&[f64]> {
    let mut points: Vec<&[f64]> = probes.iter().map(Contract::pay).collect();
    points.sort_by(|a, b| lex_cmp(a, b));
    points.dedup_by(|a, b| lex_cmp(a, b).is_eq());
    points
}

/// Distinct activation patterns at the probe points, most-populated
/// first (ties by pattern order), capped at [`MAX_PATTERNS`]. Duplicate
/// probes and probe order do not affect the result.
pub fn collect_patterns(net: &DeluNetwork, probes: &[Contract]) -> Result<Vec<PatternEntry>> {
    if probes.is_empty() {
        return Err(Error::Argument("at least one probe contract is required".into()));
    }
    if let Some(p) = probes.iter().find(|p| p.len() != net.n_inputs()) {
        return Err(Error::Argument(format!(
            "probe has {} payments, network expects {}",
            p.len(),
            net.n_inputs()
        )));
    }
    let mut regions: BTreeMap<ActivationPattern, (usize, &[f64])> = BTreeMap::new();
    for point in distinct_probes(probes) {
        let (_, pattern) = net.eta_and_pattern(point);
        regions
            .entry(pattern)
            .and_modify(|(count, _)| *count += 1)
            .or_insert((1, point));
    }
    let mut entries: Vec<PatternEntry> = regions
        .into_iter()
        .map(|(pattern, (count, rep))| PatternEntry {
            pattern,
            representative: rep.to_vec(),
            count,
        })
        .collect();
    // stable sort keeps pattern order among equal counts
    entries.sort_by(|a, b| b.count.cmp(&a.count));
    entries.truncate(MAX_PATTERNS);
    Ok(entries)
}

/// `Σ_{j=0}^{m} C(N, j)`: the number of regions `N` hyperplanes in general
/// position cut `R^m` into.
pub fn region_count_bound(hidden_units: usize, m: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for j in 0..=m.min(hidden_units) {
        if j > 0 {
            binom = binom * (hidden_units - j + 1) as u128 / j as u128;
        }
        total += binom;
    }
    total
}

/// Every activation pattern whose region has nonempty interior inside
/// `[0, f_max]^m`. Exponential in the hidden-unit count.
pub fn enumerate_patterns(net: &DeluNetwork, f_max: f64) -> Result<Vec<ActivationPattern>> {
    check_f_max(f_max)?;
    let n = net.n_hidden();
    if n > MAX_ENUMERATION_UNITS {
        return Err(Error::Argument(format!(
            "exhaustive enumeration supports at most {MAX_ENUMERATION_UNITS} hidden units, network has {n}"
        )));
    }
    let found: Vec<Option<ActivationPattern>> = (0u64..1 << n)
        .into_par_iter()
        .map(|code| {
            let pattern = ActivationPattern::new((0..n).map(|i| code >> i & 1 == 1).collect());
            let map = net.region_affine_map(&pattern)?;
            let radius = chebyshev_center(&map, f_max)?.map_or(0.0, |(_, r)| r);
            Ok((radius > 1e-9 * f_max).then_some(pattern))
        })
        .collect::<Result<_>>()?;
    let mut patterns: Vec<ActivationPattern> = found.into_iter().flatten().collect();
    patterns.sort();
    Ok(patterns)
}

/// Center and radius of the largest ball inside the region intersected with
/// the box, or `None` when the intersection is empty.
pub(crate) fn chebyshev_center(map: &AffinePieceMap, f_max: f64) -> Result<Option<(Vec<f64>, f64)>> {
    let m = map.gradient.len();
    // variables (f, r): maximize r
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for (normal, offset) in map.half_spaces() {
        let norm = norm2(&normal);
        if norm == 0.0 {
            if offset < 0.0 {
                return Ok(None);
            }
            continue;
        }
        // normal·f + offset ≥ r·‖normal‖
        let mut row: Vec<f64> = normal.iter().map(|v| -v).collect();
        row.push(norm);
        rows.push(row);
        rhs.push(offset);
    }
    for j in 0..m {
        let mut low = vec![0.0; m + 1];
        low[j] = -1.0;
        low[m] = 1.0;
        rows.push(low);
        rhs.push(0.0);
        let mut high = vec![0.0; m + 1];
        high[j] = 1.0;
        high[m] = 1.0;
        rows.push(high);
        rhs.push(f_max);
    }
    let mut objective = vec![0.0; m + 1];
    objective[m] = 1.0;
    let mut lower = vec![0.0; m + 1];
    lower[m] = -f_max;
    let mut upper = vec![f_max; m + 1];
    upper[m] = f_max;
    let lp = LinearProgram {
        objective,
        ineq_lhs: Matrix::from_rows(&rows)?,
        ineq_rhs: rhs,
        lower,
        upper,
    };
    Ok(match solve_lp(&lp)? {
        LpSolution::Optimal { mut point, value } if value >= 0.0 => {
            point.truncate(m);
            Some((point, value))
        }
        _ => None,
    })
}

/// LP maximizing η's affine form over one region: objective `w`, rows
/// `−Δ_i M_i f ≤ Δ_i z_i` for every hidden unit, box `0 ≤ f ≤ f_max`. The
/// region's output bias is constant there and therefore omitted.
pub fn build_piece_lp(net: &DeluNetwork, pattern: &ActivationPattern, f_max: f64) -> Result<LinearProgram> {
    check_f_max(f_max)?;
    let map = net.region_affine_map(pattern)?;
    Ok(piece_lp_from_map(&map, f_max))
}

fn piece_lp_from_map(map: &AffinePieceMap, f_max: f64) -> LinearProgram {
    let m = map.gradient.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (normal, offset) in map.half_spaces() {
        rows.push(normal.iter().map(|v| -v).collect::<Vec<f64>>());
        rhs.push(offset);
    }
    LinearProgram {
        objective: map.gradient.clone(),
        ineq_lhs: Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(0, m)),
        ineq_rhs: rhs,
        lower: vec![0.0; m],
        upper: vec![f_max; m],
    }
}

/// Best point found for one region, scored by the full network.
fn best_in_region(net: &DeluNetwork, entry: &PatternEntry, f_max: f64) -> Result<Option<(Vec<f64>, f64)>> {
    let map = net.region_affine_map(&entry.pattern)?;
    let lp = piece_lp_from_map(&map, f_max);
    let vertex = match solve_lp(&lp)? {
        LpSolution::Optimal { point, .. } => point,
        _ => return Ok(None),
    };
    let score = |x: &[f64]| -> Result<f64> { Ok(net.forward(x)?.value) };

    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::with_capacity(3);
    let vertex_value = score(&vertex)?;
    let vertex_pattern = net.forward(&vertex)?.pattern;
    candidates.push((vertex.clone(), vertex_value));
    // A vertex on a face may evaluate under a neighbouring pattern; a point
    // a hair inside the region realizes the region's own value.
    if vertex_pattern != entry.pattern {
        for weight in NUDGE_WEIGHTS {
            let inner: Vec<f64> = vertex
                .iter()
                .zip(&entry.representative)
                .map(|(v, r)| ((1.0 - weight) * v + weight * r).clamp(0.0, f_max))
                .collect();
            let fwd = net.forward(&inner)?;
            if fwd.pattern == entry.pattern {
                candidates.push((inner, fwd.value));
                break;
            }
        }
    }
    candidates.push((entry.representative.clone(), score(&entry.representative)?));
    Ok(pick_best(candidates.into_iter()))
}

/// Solves one LP per observed region and returns the contract with the
/// highest network value among the region optima.
pub fn lp_inference(net: &DeluNetwork, probes: &[Contract], f_max: f64) -> Result<InferenceResult> {
    check_f_max(f_max)?;
    let entries = collect_patterns(net, probes)?;
    let per_region: Vec<Option<(Vec<f64>, f64)>> = entries
        .par_iter()
        .map(|entry| best_in_region(net, entry, f_max))
        .collect::<Result<_>>()?;
    let (point, _) = pick_best(per_region.into_iter().flatten()).ok_or_else(|| {
        Error::Internal("no region LP was feasible, yet every region contains its probe".into())
    })?;
    InferenceResult::at(net, point, InferenceMethod::PieceLp, entries.len())
}
