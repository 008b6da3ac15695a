//! Boundary detection by directional linearity tests, boundary alignment
//! between a model and the true utility, and normalized-utility scoring.

use std::cell::RefCell;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delu::{ActivationPattern, DeluNetwork};
use crate::error::{Error, Result};
use crate::problem::{check_f_max, ContractProblem};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTestConfig {
    pub n_directions: usize,
    /// Probe step as a fraction of `f_max`.
    pub step_h: f64,
    /// Absolute threshold on the second difference.
    pub nonlinear_tol: f64,
    /// A point is on a boundary when more than this fraction of
    /// directions is nonlinear.
    pub boundary_fraction: f64,
    pub seed: u64,
}

impl Default for BoundaryTestConfig {
    fn default() -> Self {
        BoundaryTestConfig {
            n_directions: 200,
            step_h: 1e-3,
            nonlinear_tol: 1e-6,
            boundary_fraction: 0.2,
            seed: 0,
        }
    }
}

impl BoundaryTestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_directions == 0 {
            return Err(Error::Argument("n_directions must be positive".into()));
        }
        if !(self.step_h > 0.0 && self.step_h.is_finite()) {
            return Err(Error::Argument(format!("step_h must be positive, got {}", self.step_h)));
        }
        if !(self.nonlinear_tol >= 0.0) {
            return Err(Error::Argument("nonlinear_tol must be nonnegative".into()));
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "boundary_fraction must lie in (0, 1), got {}",
                self.boundary_fraction
            )));
        }
        Ok(())
    }
}

/// Unit directions for test point `index`; the same set is used for every
/// function tested at that point.
pub fn test_directions(cfg: &BoundaryTestConfig, dim: usize, index: u32) -> Vec<Vec<f64>> {
    let mut r = rng::stream(cfg.seed, Stream::Directions, index);
    (0..cfg.n_directions).map(|_| rng::unit_vector(&mut r, dim)).collect()
}

/// Step actually used at `f`: `step_h·f_max`, shrunk so that `f ± h·d`
/// stays inside the box for every unit `d`.
pub fn effective_step(f: &[f64], cfg: &BoundaryTestConfig, f_max: f64) -> Result<f64> {
    let room = f.iter().map(|&x| x.min(f_max - x)).fold(f64::INFINITY, f64::min);
    if !(room > 0.0) {
        return Err(Error::Argument(format!(
            "boundary test point must lie strictly inside [0, {f_max}]^m"
        )));
    }
    Ok((cfg.step_h * f_max).min(room))
}

/// Fraction of `directions` along which `func` has a nonzero second
/// difference at `f` with step `h`.
pub fn nonlinear_fraction(func: impl Fn(&[f64]) -> f64, f: &[f64], directions: &[Vec<f64>], h: f64, tol: f64) -> f64 {
    let center = func(f);
    let mut up = f.to_vec();
    let mut down = f.to_vec();
    let nonlinear = directions
        .iter()
        .filter(|d| {
            for j in 0..f.len() {
                up[j] = f[j] + h * d[j];
                down[j] = f[j] - h * d[j];
            }
            (func(&up) + func(&down) - 2.0 * center).abs() > tol
        })
        .count();
    nonlinear as f64 / directions.len() as f64
}

/// Whether `f` lies on a boundary of `func`, using the direction set of
/// test point 0.
pub fn is_boundary_point(func: impl Fn(&[f64]) -> f64, f: &[f64], cfg: &BoundaryTestConfig, f_max: f64) -> Result<bool> {
    cfg.validate()?;
    check_f_max(f_max)?;
    let h = effective_step(f, cfg, f_max)?;
    let dirs = test_directions(cfg, f.len(), 0);
    Ok(nonlinear_fraction(func, f, &dirs, h, cfg.nonlinear_tol) > cfg.boundary_fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub n_samples: usize,
    pub true_boundary_count: usize,
    pub overlap_count: usize,
    pub degree: f64,
    /// Set when no sample lies on a true boundary; `degree` is then 1.
    pub no_true_boundary: bool,
}

impl AlignmentReport {
    pub fn from_labels(labels: &[SampleLabel]) -> Self {
        let true_boundary_count = labels.iter().filter(|l| l.true_boundary).count();
        let overlap_count = labels.iter().filter(|l| l.true_boundary && l.model_boundary).count();
        let no_true_boundary = true_boundary_count == 0;
        AlignmentReport {
            n_samples: labels.len(),
            true_boundary_count,
            overlap_count,
            degree: if no_true_boundary {
                1.0
            } else {
                overlap_count as f64 / true_boundary_count as f64
            },
            no_true_boundary,
        }
    }
}

/// Boundary verdicts at one sampled contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLabel {
    pub contract: Vec<f64>,
    pub model_boundary: bool,
    pub true_boundary: bool,
}

/// Uniform test points strictly inside the box.
pub fn boundary_samples(m: usize, n_samples: usize, f_max: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, Stream::BoundarySamples, 0);
    (0..n_samples)
        .map(|_| {
            (0..m)
                .map(|_| loop {
                    let x = rng::uniform(&mut r, 0.0, f_max);
                    if x > 0.0 {
                        break x;
                    }
                })
                .collect()
        })
        .collect()
}

/// Labels every sample under both functions with identical directions and
/// steps. The functions are built per sample so they may carry caches.
pub fn label_samples<M, T, FM, FT>(
    model: FM,
    truth: FT,
    samples: &[Vec<f64>],
    cfg: &BoundaryTestConfig,
    f_max: f64,
) -> Result<Vec<SampleLabel>>
where
    M: Fn(&[f64]) -> f64,
    T: Fn(&[f64]) -> f64,
    FM: Fn() -> M + Sync,
    FT: Fn() -> T + Sync,
{
    cfg.validate()?;
    check_f_max(f_max)?;
    samples
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let h = effective_step(f, cfg, f_max)?;
            let dirs = test_directions(cfg, f.len(), i as u32);
            let test = |frac: f64| frac > cfg.boundary_fraction;
            Ok(SampleLabel {
                contract: f.clone(),
                model_boundary: test(nonlinear_fraction(model(), f, &dirs, h, cfg.nonlinear_tol)),
                true_boundary: test(nonlinear_fraction(truth(), f, &dirs, h, cfg.nonlinear_tol)),
            })
        })
        .collect()
}

/// Network evaluation that reuses ζ's bias for patterns already seen.
pub(crate) fn cached_forward(net: &DeluNetwork) -> impl Fn(&[f64]) -> f64 + '_ {
    let cache: RefCell<HashMap<ActivationPattern, f64>> = RefCell::new(HashMap::new());
    move |x: &[f64]| {
        let (eta, pattern) = net.eta_and_pattern(x);
        let mut cache = cache.borrow_mut();
        let bias = *cache
            .entry(pattern)
            .or_insert_with_key(|p| net.piece_bias_unchecked(p));
        eta + bias
    }
}

/// Fraction of true-boundary samples that the network also flags as
/// boundaries, with per-sample labels.
pub fn boundary_alignment(
    net: &DeluNetwork,
    problem: &ContractProblem,
    n_samples: usize,
    cfg: &BoundaryTestConfig,
    f_max: f64,
) -> Result<(AlignmentReport, Vec<SampleLabel>)> {
    let m = problem.n_outcomes();
    if net.n_inputs() != m {
        return Err(Error::Argument(format!(
            "network takes {} inputs, problem has {m} outcomes",
            net.n_inputs()
        )));
    }
    if n_samples == 0 {
        return Err(Error::Argument("at least one boundary sample is required".into()));
    }
    let samples = boundary_samples(m, n_samples, f_max, cfg.seed);
    let labels = label_samples(
        || cached_forward(net),
        || |x: &[f64]| problem.principal_utility_at(x),
        &samples,
        cfg,
        f_max,
    )?;
    Ok((AlignmentReport::from_labels(&labels), labels))
}

pub fn boundary_alignment_degree(
    net: &DeluNetwork,
    problem: &ContractProblem,
    n_samples: usize,
    cfg: &BoundaryTestConfig,
    f_max: f64,
) -> Result<AlignmentReport> {
    Ok(boundary_alignment(net, problem, n_samples, cfg, f_max)?.0)
}

/// The network tested against itself.
pub fn self_alignment(net: &DeluNetwork, n_samples: usize, cfg: &BoundaryTestConfig, f_max: f64) -> Result<(AlignmentReport, Vec<SampleLabel>)> {
    if n_samples == 0 {
        return Err(Error::Argument("at least one boundary sample is required".into()));
    }
    let samples = boundary_samples(net.n_inputs(), n_samples, f_max, cfg.seed);
    let labels = label_samples(|| cached_forward(net), || cached_forward(net), &samples, cfg, f_max)?;
    Ok((AlignmentReport::from_labels(&labels), labels))
}

/// Whether the agent's best response differs between `f + h·d` and
/// `f − h·d` for some test direction.
pub fn best_response_changes(problem: &ContractProblem, f: &[f64], directions: &[Vec<f64>], h: f64) -> bool {
    let mut up = f.to_vec();
    let mut down = f.to_vec();
    directions.iter().any(|d| {
        for j in 0..f.len() {
            up[j] = f[j] + h * d[j];
            down[j] = f[j] - h * d[j];
        }
        problem.best_response_unchecked(&up).action != problem.best_response_unchecked(&down).action
    })
}

/// `achieved / oracle_value`.
pub fn normalized_utility(achieved: f64, oracle_value: f64) -> Result<f64> {
    if oracle_value == 0.0 {
        return Err(Error::UndefinedRatio { achieved });
    }
    Ok(achieved / oracle_value)
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `None` for
/// fewer than two pairs or a constant input.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return None;
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delu::Variant;
    use crate::problem::fixtures::two_outcome_four_action;

    #[test]
    fn affine_function_has_no_boundary() {
        let cfg = BoundaryTestConfig::default();
        let affine = |x: &[f64]| 3.0 * x[0] - 2.0 * x[1] + 0.5;
        for f in [[1.0, 1.0], [9.9, 0.2], [5.0, 5.0]] {
            assert!(!is_boundary_point(affine, &f, &cfg, 10.0).unwrap());
        }
    }

    #[test]
    fn fixture_interior_and_crossing() {
        let p = two_outcome_four_action();
        let cfg = BoundaryTestConfig::default();
        let u = |x: &[f64]| p.principal_utility_at(x);
        let v = p.value();
        let along = |a: f64| vec![a * v[0], a * v[1]];
        assert!(!is_boundary_point(u, &along(0.25), &cfg, 20.0).unwrap());
        let crossing: f64 = (2.1 - 1.0) / (8.562 - 5.009);
        assert!((crossing - 0.3096).abs() < 1e-4);
        assert!(is_boundary_point(u, &along(crossing), &cfg, 20.0).unwrap());
    }

    #[test]
    fn points_on_the_box_face_are_rejected() {
        let cfg = BoundaryTestConfig::default();
        assert!(is_boundary_point(|x: &[f64]| x[0], &[0.0, 1.0], &cfg, 10.0).is_err());
        assert!(is_boundary_point(|x: &[f64]| x[0], &[1.0, 10.0], &cfg, 10.0).is_err());
        let near = [1e-6, 5.0];
        assert!(effective_step(&near, &cfg, 10.0).unwrap() <= 1e-6);
    }

    #[test]
    fn direction_permutation_does_not_matter() {
        let p = two_outcome_four_action();
        let u = |x: &[f64]| p.principal_utility_at(x);
        let cfg = BoundaryTestConfig::default();
        let f = [6.3, 0.3];
        let mut dirs = test_directions(&cfg, 2, 3);
        let a = nonlinear_fraction(u, &f, &dirs, 0.02, 1e-6);
        dirs.reverse();
        assert_eq!(a, nonlinear_fraction(u, &f, &dirs, 0.02, 1e-6));
    }

    #[test]
    fn self_alignment_is_exact() {
        let net = DeluNetwork::init_with(2, &[8], 16, Variant::Delu, 4).unwrap();
        let (report, labels) = self_alignment(&net, 300, &BoundaryTestConfig::default(), 10.0).unwrap();
        assert_eq!(report.degree, 1.0);
        assert_eq!(report.overlap_count, report.true_boundary_count);
        assert!(labels.iter().all(|l| l.model_boundary == l.true_boundary));
    }

    #[test]
    fn single_action_problem_has_no_true_boundary() {
        let p = ContractProblem::new(crate::linalg::Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap(), vec![1.0], vec![3.0, 4.0])
            .unwrap();
        let net = DeluNetwork::init_with(2, &[4], 8, Variant::Delu, 0).unwrap();
        let r = boundary_alignment_degree(&net, &p, 100, &BoundaryTestConfig::default(), 4.0).unwrap();
        assert_eq!(r.true_boundary_count, 0);
        assert!(r.no_true_boundary);
        assert_eq!(r.degree, 1.0);
        assert!(boundary_alignment_degree(&net, &p, 0, &BoundaryTestConfig::default(), 4.0).is_err());
    }

    #[test]
    fn adding_an_aligned_sample_never_lowers_degree() {
        let mk = |m: bool, t: bool| SampleLabel {
            contract: vec![],
            model_boundary: m,
            true_boundary: t,
        };
        let mut labels = vec![mk(true, true), mk(false, true), mk(true, false), mk(false, false)];
        let before = AlignmentReport::from_labels(&labels).degree;
        assert_eq!(before, 0.5);
        labels.push(mk(true, true));
        assert!(AlignmentReport::from_labels(&labels).degree >= before);
    }

    #[test]
    fn normalized_utility_examples() {
        assert_eq!(normalized_utility(4.0, 4.0).unwrap(), 1.0);
        assert_eq!(normalized_utility(0.0, 4.0).unwrap(), 0.0);
        assert_eq!(normalized_utility(3.5, 4.0).unwrap(), 0.875);
        assert!(matches!(normalized_utility(1.0, 0.0), Err(Error::UndefinedRatio { .. })));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(spearman(&[1.0], &[1.0]), None);
        let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
    }
}
