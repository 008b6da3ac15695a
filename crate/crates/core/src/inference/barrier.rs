//! Log-barrier gradient inference.
//!
//! Every start point is confined to its own activation region. On the
//! region the network is `w·f + const`, and each annealing round `k`
//! minimizes `−w·f − (1/t_k) Σ log(slack_i(f))` by gradient steps with
//! backtracking, where `t_k = t0·μ^(k−1)` and the slacks cover both the
//! region's faces and the payment box.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delu::{ActivationPattern, DeluNetwork};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::problem::{check_f_max, Contract};

use super::pieces::{chebyshev_center, distinct_probes};
use super::{pick_best, InferenceMethod, InferenceResult};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const START_NUDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierConfig {
    /// Initial barrier sharpness `t0`.
    pub t0: f64,
    /// Growth factor of `t` per round.
    pub mu: f64,
    /// Target accuracy, also the inner-loop displacement tolerance.
    pub eps: f64,
    /// Initial gradient step size.
    pub step: f64,
    pub max_inner_steps: usize,
    pub backtrack_factor: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig {
            t0: 1.0,
            mu: 10.0,
            eps: 1e-4,
            step: 1e-2,
            max_inner_steps: 500,
            backtrack_factor: 0.5,
        }
    }
}

impl BarrierConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t0 > 0.0
            && self.t0.is_finite()
            && self.mu > 1.0
            && self.mu.is_finite()
            && self.eps > 0.0
            && self.step >= 0.0
            && self.step.is_finite()
            && self.max_inner_steps > 0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid barrier configuration {self:?}")))
        }
    }
}

/// `⌈log(N / (t0·ε)) / log μ⌉`, at least 1.
pub fn barrier_round_count(n_constraints: usize, cfg: &BarrierConfig) -> usize {
    let rounds = ((n_constraints as f64 / (cfg.t0 * cfg.eps)).ln() / cfg.mu.ln()).ceil();
    if rounds.is_finite() && rounds >= 1.0 {
        rounds as usize
    } else {
        1
    }
}

/// Barrier objective of one region: `−(w·f + c) − (1/t) Σ log(nᵢ·f + oᵢ)`.
#[derive(Debug, Clone)]
pub struct PieceBarrier {
    m: usize,
    /// Hidden-unit face normals, row-major `k × m`.
    normals: Vec<f64>,
    offsets: Vec<f64>,
    /// Box faces `f_j > 0` and `f_j < f_max`, kept implicit.
    f_max: Option<f64>,
    objective: Vec<f64>,
    objective_offset: f64,
}

impl PieceBarrier {
    /// Barrier for `pattern`'s region; with `f_max`, the `2m` box faces
    /// `f_j > 0` and `f_j < f_max` join the barrier.
    pub fn new(net: &DeluNetwork, pattern: &ActivationPattern, f_max: Option<f64>) -> Result<Self> {
        let map = net.region_affine_map(pattern)?;
        let mut normals = Vec::new();
        let mut offsets = Vec::new();
        for (normal, offset) in map.half_spaces() {
            // a unit with identically zero pre-activation bounds nothing
            if offset == 0.0 && normal.iter().all(|v| *v == 0.0) {
                continue;
            }
            normals.extend(normal);
            offsets.push(offset);
        }
        Ok(PieceBarrier {
            m: map.gradient.len(),
            normals,
            offsets,
            f_max,
            objective: map.gradient,
            objective_offset: map.offset,
        })
    }

    pub fn n_terms(&self) -> usize {
        self.offsets.len() + if self.f_max.is_some() { 2 * self.m } else { 0 }
    }

    fn face_normals(&self) -> std::slice::ChunksExact<'_, f64> {
        self.normals.chunks_exact(self.m.max(1))
    }

    /// All slacks at `f`: hidden-unit faces, then `f_j` and `f_max − f_j`
    /// for each coordinate.
    fn slacks_into(&self, f: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.face_normals().zip(&self.offsets).map(|(n, o)| dot(n, f) + o));
        if let Some(f_max) = self.f_max {
            for &x in f {
                out.push(x);
                out.push(f_max - x);
            }
        }
    }

    fn slacks(&self, f: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_terms());
        self.slacks_into(f, &mut out);
        out
    }

    /// Gradient of `−w·f − (1/t) Σ log sᵢ` given the slacks.
    fn grad_into(&self, slack: &[f64], t: f64, grad: &mut [f64]) {
        for (g, w) in grad.iter_mut().zip(&self.objective) {
            *g = -w;
        }
        let k = self.offsets.len();
        for (n, s) in self.face_normals().zip(&slack[..k]) {
            let scale = -1.0 / (t * s);
            for (g, ni) in grad.iter_mut().zip(n) {
                *g += scale * ni;
            }
        }
        for (g, pair) in grad.iter_mut().zip(slack[k..].chunks_exact(2)) {
            *g += (1.0 / pair[1] - 1.0 / pair[0]) / t;
        }
    }

    /// `rᵢ = (nᵢ·d)/sᵢ`: the relative slack loss per unit step along `d`.
    fn ratios_into(&self, slack: &[f64], d: &[f64], out: &mut [f64]) {
        let k = self.offsets.len();
        for ((r, n), s) in out[..k].iter_mut().zip(self.face_normals()).zip(&slack[..k]) {
            *r = dot(n, d) / s;
        }
        for ((r, pair), dj) in out[k..].chunks_exact_mut(2).zip(slack[k..].chunks_exact(2)).zip(d) {
            r[0] = dj / pair[0];
            r[1] = -dj / pair[1];
        }
    }

    pub fn min_slack(&self, f: &[f64]) -> f64 {
        self.slacks(f).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn strictly_inside(&self, f: &[f64]) -> bool {
        self.slacks(f).iter().all(|s| *s > 0.0)
    }

    /// Affine piece objective `w·f + c` (η's value on the region).
    pub fn objective(&self, f: &[f64]) -> f64 {
        dot(&self.objective, f) + self.objective_offset
    }

    fn checked_slacks(&self, f: &[f64]) -> Result<Vec<f64>> {
        let slack = self.slacks(f);
        if slack.iter().all(|s| *s > 0.0) {
            Ok(slack)
        } else {
            Err(Error::InfeasiblePoint {
                min_slack: slack.into_iter().fold(f64::INFINITY, f64::min),
            })
        }
    }

    pub fn value(&self, f: &[f64], t: f64) -> Result<f64> {
        let log_sum: f64 = self.checked_slacks(f)?.iter().map(|s| s.ln()).sum();
        Ok(-self.objective(f) - log_sum / t)
    }

    pub fn value_grad(&self, f: &[f64], t: f64) -> Result<(f64, Vec<f64>)> {
        let slack = self.checked_slacks(f)?;
        let log_sum: f64 = slack.iter().map(|s| s.ln()).sum();
        let mut grad = vec![0.0; self.m];
        self.grad_into(&slack, t, &mut grad);
        Ok((-self.objective(f) - log_sum / t, grad))
    }
}

/// Barrier objective of `pattern`'s region (hidden-unit faces only) and
/// its gradient at `f`.
pub fn barrier_value_grad(net: &DeluNetwork, pattern: &ActivationPattern, f: &[f64], t: f64) -> Result<(f64, Vec<f64>)> {
    if f.len() != net.n_inputs() {
        return Err(Error::Argument(format!(
            "point has {} entries, network expects {}",
            f.len(),
            net.n_inputs()
        )));
    }
    PieceBarrier::new(net, pattern, None)?.value_grad(f, t)
}

/// Utility used to judge sub-argmax candidates.
pub type Evaluator<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

struct Chain {
    barrier: Arc<PieceBarrier>,
    point: Vec<f64>,
}

struct ChainEnd {
    point: Vec<f64>,
    /// Evaluator score of `point` (sub-argmax) or the network value.
    score: f64,
    rounds: usize,
}

/// `Σ ln(1 − α·rᵢ)`, or `None` when some factor is not positive. Uses one
/// logarithm of a running product, rescaled before it can leave the normal
/// range.
fn log_shrink(ratios: &[f64], alpha: f64) -> Option<f64> {
    let mut product = 1.0;
    let mut total = 0.0;
    for r in ratios {
        let factor = 1.0 - alpha * r;
        if !(factor > 0.0) {
            return None;
        }
        product *= factor;
        if !(1e-150..=1e150).contains(&product) {
            total += product.ln();
            product = 1.0;
        }
    }
    Some(total + product.ln())
}

/// One inner minimization at fixed `t`. Returns the number of steps taken.
///
/// Slacks are affine in `f`: at `f − α·g` they become `sᵢ(1 − α·rᵢ)` with
/// `rᵢ = (nᵢ·g)/sᵢ`, and the objective drops by `α·(w·g)`. The change in
/// barrier value along the step therefore needs no dot products, and the
/// slacks are recomputed exactly once a step is accepted.
fn minimize_round(barrier: &PieceBarrier, f: &mut [f64], t: f64, cfg: &BarrierConfig) -> Result<usize> {
    let mut slack = barrier.checked_slacks(f)?;
    let mut grad = vec![0.0; f.len()];
    let mut ratios = vec![0.0; slack.len()];
    let mut previous = f.to_vec();
    let mut steps = 0;
    while steps < cfg.max_inner_steps {
        barrier.grad_into(&slack, t, &mut grad);
        barrier.ratios_into(&slack, &grad, &mut ratios);
        let w_along = dot(&barrier.objective, &grad);
        let decrease = ARMIJO * dot(&grad, &grad);

        let mut alpha = cfg.step;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            if alpha == 0.0 {
                break;
            }
            if let Some(log_change) = log_shrink(&ratios, alpha) {
                let change = alpha * w_along - log_change / t;
                if change <= -alpha * decrease {
                    accepted = true;
                    break;
                }
            }
            alpha *= cfg.backtrack_factor;
        }
        if !accepted {
            break;
        }
        previous.copy_from_slice(f);
        for (x, g) in f.iter_mut().zip(&grad) {
            *x -= alpha * g;
        }
        barrier.slacks_into(f, &mut slack);
        if slack.iter().any(|s| !(*s > 0.0)) {
            // rounding put the exact point on a face; keep the last one
            f.copy_from_slice(&previous);
            break;
        }
        steps += 1;
        let moved = previous.iter().zip(f.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if moved < cfg.eps {
            break;
        }
    }
    Ok(steps)
}

fn prepare_chains(net: &DeluNetwork, starts: &[Contract], f_max: f64) -> Result<Vec<Chain>> {
    if starts.is_empty() {
        return Err(Error::Argument("at least one start contract is required".into()));
    }
    if let Some(p) = starts.iter().find(|p| p.len() != net.n_inputs()) {
        return Err(Error::Argument(format!(
            "start contract has {} payments, network expects {}",
            p.len(),
            net.n_inputs()
        )));
    }
    let points = distinct_probes(starts);
    let patterns: Vec<ActivationPattern> = points.iter().map(|p| net.eta_and_pattern(p).1).collect();
    let mut distinct: Vec<&ActivationPattern> = patterns.iter().collect();
    distinct.sort();
    distinct.dedup();
    let barriers: HashMap<&ActivationPattern, Arc<PieceBarrier>> = distinct
        .par_iter()
        .map(|p| Ok((*p, Arc::new(PieceBarrier::new(net, p, Some(f_max))?))))
        .collect::<Result<_>>()?;

    let chains: Vec<Option<Chain>> = points
        .par_iter()
        .zip(&patterns)
        .map(|(point, pattern)| {
            let barrier = Arc::clone(&barriers[pattern]);
            let mut start = point.to_vec();
            if !barrier.strictly_inside(&start) {
                let map = net.region_affine_map(pattern)?;
                let Some((center, _)) = chebyshev_center(&map, f_max)? else {
                    return Ok(None);
                };
                let dir: Vec<f64> = center.iter().zip(&start).map(|(c, s)| c - s).collect();
                let len = norm2(&dir);
                if len == 0.0 {
                    return Ok(None);
                }
                for (s, d) in start.iter_mut().zip(&dir) {
                    *s += START_NUDGE * d / len;
                }
                if !barrier.strictly_inside(&start) {
                    return Ok(None);
                }
            }
            Ok(Some(Chain { barrier, point: start }))
        })
        .collect::<Result<_>>()?;
    Ok(chains.into_iter().flatten().collect())
}

fn run_chain(
    net: &DeluNetwork,
    chain: Chain,
    cfg: &BarrierConfig,
    rounds: usize,
    early_stop: Option<Evaluator<'_>>,
) -> Result<ChainEnd> {
    let Chain { barrier, mut point } = chain;
    let mut t = cfg.t0;
    match early_stop {
        None => {
            for _ in 0..rounds {
                minimize_round(&barrier, &mut point, t, cfg)?;
                t *= cfg.mu;
            }
            let score = net.forward(&point)?.value;
            Ok(ChainEnd { point, score, rounds })
        }
        Some(evaluate) => {
            let mut previous = evaluate(&point);
            let mut best = (point.clone(), previous);
            let mut stopped: Option<usize> = None;
            for round in 1..=rounds {
                minimize_round(&barrier, &mut point, t, cfg)?;
                t *= cfg.mu;
                let score = evaluate(&point);
                if score > best.1 {
                    best = (point.clone(), score);
                }
                if stopped.is_none() && score <= previous {
                    stopped = Some(round);
                }
                previous = score;
            }
            Ok(ChainEnd {
                point: best.0,
                score: best.1,
                rounds: stopped.unwrap_or(rounds),
            })
        }
    }
}

fn run_all(
    net: &DeluNetwork,
    starts: &[Contract],
    cfg: &BarrierConfig,
    f_max: f64,
    early_stop: Option<Evaluator<'_>>,
    method: InferenceMethod,
) -> Result<InferenceResult> {
    cfg.validate()?;
    check_f_max(f_max)?;
    let chains = prepare_chains(net, starts, f_max)?;
    if chains.is_empty() {
        return Err(Error::Solver("no start point is strictly inside its region".into()));
    }
    let rounds = barrier_round_count(net.n_hidden(), cfg);
    let ends: Vec<ChainEnd> = chains
        .into_par_iter()
        .map(|chain| run_chain(net, chain, cfg, rounds, early_stop))
        .collect::<Result<_>>()?;
    let rounds_used = ends.iter().map(|e| e.rounds).max().unwrap_or(0);
    let (point, _) = pick_best(ends.into_iter().map(|e| (e.point, e.score)))
        .ok_or_else(|| Error::Internal("no chain survived".into()))?;
    InferenceResult::at(net, point, method, rounds_used)
}

/// Parallel log-barrier inference from every distinct start point; the
/// chain end with the highest network value wins.
pub fn gradient_inference(net: &DeluNetwork, starts: &[Contract], cfg: &BarrierConfig, f_max: f64) -> Result<InferenceResult> {
    run_all(net, starts, cfg, f_max, None, InferenceMethod::Barrier)
}

/// Barrier inference with a best-so-far candidate: after every round each
/// chain's point is scored (by `true_utility` when given, else by the
/// network). The first round whose score fails to increase is the chain's
/// stop round, reported as `rounds_used` (the maximum over chains). The
/// annealing still runs the full schedule so that the best-scoring point of
/// the whole trajectory, start included, is never worse than the plain
/// gradient endpoint of the same chain. The best of those points is
/// returned.
pub fn sub_argmax_inference(
    net: &DeluNetwork,
    starts: &[Contract],
    cfg: &BarrierConfig,
    f_max: f64,
    true_utility: Option<Evaluator<'_>>,
) -> Result<InferenceResult> {
    let model = |f: &[f64]| net.forward(f).map(|r| r.value).unwrap_or(f64::NEG_INFINITY);
    let evaluate: Evaluator<'_> = match true_utility {
        Some(oracle) => oracle,
        None => &model,
    };
    run_all(net, starts, cfg, f_max, Some(evaluate), InferenceMethod::SubArgmax)
}
