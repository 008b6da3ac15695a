//! Hidden-action principal–agent problems.
//!
//! A problem has `n` actions and `m` outcomes. Taking action `a` costs the
//! agent `cost[a]` and produces outcome `o` with probability `prob[a][o]`.
//! A contract pays `f_o ≥ 0` on outcome `o`; the agent picks the action that
//! maximizes expected payment minus cost, and the principal keeps the
//! expected outcome value minus expected payment under that action.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::{self, Stream};

/// Agent utilities within this distance of the maximum count as ties.
pub const AGENT_TIE_TOL: f64 = 1e-9;

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ContractProblem {
    prob: Matrix,
    cost: Vec<f64>,
    value: Vec<f64>,
}

/// On-disk layout of a problem file.
#[derive(Debug, Serialize, Deserialize)]
struct ProblemFile {
    n_actions: usize,
    n_outcomes: usize,
    prob: Vec<Vec<f64>>,
    cost: Vec<f64>,
    value: Vec<f64>,
}

/// A nonnegative payment vector over outcomes.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Contract(Vec<f64>);

impl Contract {
    pub fn new(pay: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = pay
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(
                format!("pay[{i}]"),
                format!("payments must be finite and nonnegative, got {v}"),
            ));
        }
        Ok(Contract(pay))
    }

    /// Projects onto `[0, ∞)`, absorbing round-off from solvers.
    pub fn clamped(mut pay: Vec<f64>) -> Self {
        for v in &mut pay {
            if !(*v > 0.0) {
                *v = 0.0;
            }
        }
        Contract(pay)
    }

    pub fn zeros(m: usize) -> Self {
        Contract(vec![0.0; m])
    }

    pub fn pay(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `scale * v`, e.g. a linear contract on outcome values.
    pub fn scaled(values: &[f64], scale: f64) -> Result<Self> {
        Contract::new(values.iter().map(|v| v * scale).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Contract {
    type Error = Error;

    fn try_from(pay: Vec<f64>) -> Result<Self> {
        Contract::new(pay)
    }
}

impl From<Contract> for Vec<f64> {
    fn from(c: Contract) -> Self {
        c.0
    }
}

impl AsRef<[f64]> for Contract {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Parameters of the synthetic problem generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemGenConfig {
    /// Number of outcomes.
    pub m: usize,
    /// Number of actions.
    pub n: usize,
    /// Scale of the value-correlated cost component.
    pub alpha_p: f64,
    /// Weight of the independent cost component.
    pub beta_p: f64,
    pub seed: u64,
}

impl ProblemGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::Argument(format!(
                "m and n must be positive (m={}, n={})",
                self.m, self.n
            )));
        }
        if !(self.alpha_p > 0.0 && self.alpha_p.is_finite()) {
            return Err(Error::Argument(format!(
                "alpha_p must be positive, got {}",
                self.alpha_p
            )));
        }
        if !(0.0..=1.0).contains(&self.beta_p) {
            return Err(Error::Argument(format!(
                "beta_p must lie in [0, 1], got {}",
                self.beta_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub action: usize,
    pub agent_utility: f64,
    pub principal_utility: f64,
}

impl ContractProblem {
    /// Validates and assembles a problem. `prob` is `n × m`.
    pub fn new(prob: Matrix, cost: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let (n, m) = (prob.rows(), prob.cols());
        if n == 0 {
            return Err(Error::invalid("prob", "at least one action is required"));
        }
        if m == 0 {
            return Err(Error::invalid("prob", "at least one outcome is required"));
        }
        if cost.len() != n {
            return Err(Error::invalid(
                "cost",
                format!("expected {n} entries (one per action), found {}", cost.len()),
            ));
        }
        if value.len() != m {
            return Err(Error::invalid(
                "value",
                format!("expected {m} entries (one per outcome), found {}", value.len()),
            ));
        }
        for (a, row) in prob.row_iter().enumerate() {
            if let Some((o, p)) = row
                .iter()
                .enumerate()
                .find(|(_, p)| !p.is_finite() || **p < 0.0)
            {
                return Err(Error::invalid(
                    format!("prob[{a}][{o}]"),
                    format!("probabilities must be finite and nonnegative, got {p}"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(
                    format!("prob[{a}]"),
                    format!("row sums to {sum}, expected 1"),
                ));
            }
        }
        check_nonnegative("cost", &cost)?;
        check_nonnegative("value", &value)?;
        Ok(ContractProblem { prob, cost, value })
    }

    /// Like [`ContractProblem::new`] but renormalizes each probability row
    /// first, for hand-entered tables with rounded entries.
    pub fn with_normalized_rows(rows: &[Vec<f64>], cost: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|p| p / s).collect()
            })
            .collect();
        ContractProblem::new(Matrix::from_rows(&rows)?, cost, value)
    }

    pub fn n_actions(&self) -> usize {
        self.prob.rows()
    }

    pub fn n_outcomes(&self) -> usize {
        self.prob.cols()
    }

    pub fn prob(&self) -> &Matrix {
        &self.prob
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    /// Default payment cap: the largest outcome value.
    pub fn default_f_max(&self) -> f64 {
        self.value.iter().copied().fold(0.0, f64::max)
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.n_actions() {
            return Err(Error::Argument(format!(
                "action {action} out of range for {} actions",
                self.n_actions()
            )));
        }
        Ok(())
    }

    fn check_contract(&self, contract: &Contract) -> Result<()> {
        if contract.len() != self.n_outcomes() {
            return Err(Error::Argument(format!(
                "contract has {} payments but the problem has {} outcomes",
                contract.len(),
                self.n_outcomes()
            )));
        }
        Ok(())
    }

    /// `E_{o∼p(·|a)}[v_o]`
    pub fn expected_value(&self, action: usize) -> Result<f64> {
        self.check_action(action)?;
        Ok(dot(self.prob.row(action), &self.value))
    }

    /// `E_{o∼p(·|a)}[f_o] − c(a)`
    pub fn agent_utility(&self, contract: &Contract, action: usize) -> Result<f64> {
        self.check_contract(contract)?;
        self.check_action(action)?;
        Ok(dot(self.prob.row(action), contract.pay()) - self.cost[action])
    }

    /// The agent's best response. Among actions whose utility is within
    /// [`AGENT_TIE_TOL`] of the best, the one the principal prefers wins;
    /// remaining ties go to the lowest index.
    pub fn best_response(&self, contract: &Contract) -> Result<AgentResponse> {
        self.check_contract(contract)?;
        Ok(self.best_response_unchecked(contract.pay()))
    }

    pub(crate) fn best_response_unchecked(&self, pay: &[f64]) -> AgentResponse {
        let agent: Vec<f64> = (0..self.n_actions())
            .map(|a| dot(self.prob.row(a), pay) - self.cost[a])
            .collect();
        let best = agent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut chosen: Option<AgentResponse> = None;
        for (a, &ua) in agent.iter().enumerate() {
            if ua < best - AGENT_TIE_TOL {
                continue;
            }
            let row = self.prob.row(a);
            let up = dot(row, &self.value) - dot(row, pay);
            if chosen.map_or(true, |c| up > c.principal_utility) {
                chosen = Some(AgentResponse {
                    action: a,
                    agent_utility: ua,
                    principal_utility: up,
                });
            }
        }
        chosen.expect("at least one action attains the maximum")
    }

    /// `u^p(f)`: expected value minus expected payment under the best response.
    pub fn principal_utility(&self, contract: &Contract) -> Result<f64> {
        Ok(self.best_response(contract)?.principal_utility)
    }

    /// Principal utility at an arbitrary nonnegative payment slice; used by
    /// diagnostics that probe points without building a [`Contract`].
    pub fn principal_utility_at(&self, pay: &[f64]) -> f64 {
        self.best_response_unchecked(pay).principal_utility
    }

    /// Random problem: softmax-of-Gaussian outcome rows, values uniform on
    /// `[0, 10]`, and costs mixing a value-proportional part with an
    /// independent uniform part.
    pub fn generate(cfg: &ProblemGenConfig) -> Result<Self> {
        cfg.validate()?;
        let (m, n) = (cfg.m, cfg.n);

        let mut rows_rng = rng::stream(cfg.seed, Stream::ProbRows, 0);
        let mut data = Vec::with_capacity(n * m);
        for _ in 0..n {
            let logits: Vec<f64> = (0..m).map(|_| rng::standard_normal(&mut rows_rng)).collect();
            data.extend(softmax(&logits));
        }
        let prob = Matrix::from_vec(n, m, data)?;

        let mut values_rng = rng::stream(cfg.seed, Stream::Values, 0);
        let value: Vec<f64> = (0..m).map(|_| rng::uniform(&mut values_rng, 0.0, 10.0)).collect();

        let mut costs_rng = rng::stream(cfg.seed, Stream::Costs, 0);
        let cost: Vec<f64> = (0..n)
            .map(|a| {
                let correlated = cfg.alpha_p * dot(prob.row(a), &value);
                let independent = rng::uniform(&mut costs_rng, 0.0, 1.0);
                (1.0 - cfg.beta_p) * correlated + cfg.beta_p * independent
            })
            .collect();

        ContractProblem::new(prob, cost, value)
    }

    /// `k` contracts uniform on `[0, f_max]^m`, each labelled with `u^p`.
    pub fn sample_training_set(&self, k: usize, f_max: f64, seed: u64) -> Result<Vec<(Contract, f64)>> {
        if k == 0 {
            return Err(Error::Argument("training set size must be positive".into()));
        }
        check_f_max(f_max)?;
        let m = self.n_outcomes();
        let mut rng = rng::stream(seed, Stream::Contracts, 0);
        Ok((0..k)
            .map(|_| {
                let pay: Vec<f64> = (0..m).map(|_| rng::uniform(&mut rng, 0.0, f_max)).collect();
                let utility = self.principal_utility_at(&pay);
                (Contract(pay), utility)
            })
            .collect())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text).map_err(Error::from_json)?;
        if file.prob.len() != file.n_actions {
            return Err(Error::invalid(
                "prob",
                format!(
                    "n_actions is {} but prob has {} rows",
                    file.n_actions,
                    file.prob.len()
                ),
            ));
        }
        if let Some((a, row)) = file
            .prob
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != file.n_outcomes)
        {
            return Err(Error::invalid(
                format!("prob[{a}]"),
                format!("n_outcomes is {} but the row has {} entries", file.n_outcomes, row.len()),
            ));
        }
        ContractProblem::new(Matrix::from_rows(&file.prob)?, file.cost, file.value)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let file = ProblemFile {
            n_actions: self.n_actions(),
            n_outcomes: self.n_outcomes(),
            prob: self.prob.to_rows(),
            cost: self.cost.clone(),
            value: self.value.clone(),
        };
        serde_json::to_value(file).expect("problem serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("problem serializes")
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn check_f_max(f_max: f64) -> Result<()> {
    if !(f_max > 0.0 && f_max.is_finite()) {
        return Err(Error::Argument(format!("f_max must be positive and finite, got {f_max}")));
    }
    Ok(())
}

fn check_nonnegative(field: &str, values: &[f64]) -> Result<()> {
    match values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        Some((i, v)) => Err(Error::invalid(
            format!("{field}[{i}]"),
            format!("must be finite and nonnegative, got {v}"),
        )),
        None => Ok(()),
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}


#[cfg(test)]
mod tests {
    use super::fixtures::two_outcome_four_action;
    use super::*;
    use proptest::prelude::*;

    fn linear(p: &ContractProblem, alpha: f64) -> Contract {
        Contract::scaled(p.value(), alpha).unwrap()
    }

    #[test]
    fn expected_values() {
        let p = two_outcome_four_action();
        assert!((p.expected_value(0).unwrap() - 5.009).abs() < 1e-12);
        assert!((p.expected_value(3).unwrap() - 13.996).abs() < 1e-12);
        assert!(p.expected_value(4).is_err());

        let flat = ContractProblem::new(
            Matrix::from_rows(&[vec![0.25; 4]]).unwrap(),
            vec![0.0],
            vec![10.0; 4],
        )
        .unwrap();
        assert!((flat.expected_value(0).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn agent_utilities() {
        let p = two_outcome_four_action();
        let u0 = p.agent_utility(&linear(&p, 0.25), 0).unwrap();
        assert!((u0 - 0.25225).abs() < 1e-12);
        let u2 = p.agent_utility(&linear(&p, 0.45), 2).unwrap();
        assert!((u2 - 1.8265).abs() < 1e-12);
        assert!(p.agent_utility(&Contract::zeros(3), 0).is_err());

        let free = ContractProblem::new(
            Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap(),
            vec![0.0],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert_eq!(free.agent_utility(&Contract::zeros(2), 0).unwrap(), 0.0);
    }

    #[test]
    fn best_responses_on_linear_contracts() {
        let p = two_outcome_four_action();
        assert_eq!(p.best_response(&linear(&p, 0.25)).unwrap().action, 0);
        assert_eq!(p.best_response(&linear(&p, 0.45)).unwrap().action, 2);
        assert_eq!(p.best_response(&linear(&p, 0.6)).unwrap().action, 3);
    }

    #[test]
    fn principal_utilities_on_linear_contracts() {
        let p = two_outcome_four_action();
        let u = p.principal_utility(&linear(&p, 0.25)).unwrap();
        assert!((u - 3.75675).abs() < 1e-12);
        assert!((u - 3.75).abs() < 0.02);
        let u = p.principal_utility(&linear(&p, 0.6)).unwrap();
        assert!((u - 5.5984).abs() < 1e-12);
        assert!((u - 5.6).abs() < 0.02);
        let full = Contract::new(p.value().to_vec()).unwrap();
        assert!(p.principal_utility(&full).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ties_favor_principal_then_lowest_index() {
        // actions 0 and 1 are identical; action 2 ties for the agent but is
        // worse for the principal
        let p = ContractProblem::new(
            Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap(),
            vec![0.0, 0.0, 0.0],
            vec![10.0, 0.0],
        )
        .unwrap();
        let r = p.best_response(&Contract::new(vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(r.action, 0);
        assert!((r.principal_utility - 4.0).abs() < 1e-12);

        let reversed = ContractProblem::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap(),
            vec![0.0, 0.0],
            vec![10.0, 0.0],
        )
        .unwrap();
        let r = reversed.best_response(&Contract::new(vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(r.action, 1);
    }

    #[test]
    fn generator_rows_and_costs() {
        for seed in 0..20 {
            let cfg = ProblemGenConfig { m: 7, n: 5, alpha_p: 0.7, beta_p: 0.3, seed };
            let p = ContractProblem::generate(&cfg).unwrap();
            for row in p.prob().row_iter() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            assert!(p.value().iter().all(|v| (0.0..=10.0).contains(v)));
        }
        let cfg = ProblemGenConfig { m: 4, n: 6, alpha_p: 0.9, beta_p: 1.0, seed: 3 };
        let p = ContractProblem::generate(&cfg).unwrap();
        assert!(p.cost().iter().all(|c| (0.0..=1.0).contains(c)));

        let cfg = ProblemGenConfig { m: 4, n: 6, alpha_p: 0.5, beta_p: 0.0, seed: 3 };
        let p = ContractProblem::generate(&cfg).unwrap();
        for a in 0..6 {
            // recomputed independently from the generated table
            let ev: f64 = (0..4).map(|o| p.prob().get(a, o) * p.value()[o]).sum();
            assert_eq!(p.cost()[a], 0.5 * ev);
        }
    }

    #[test]
    fn generator_rejects_bad_config() {
        let base = ProblemGenConfig { m: 2, n: 2, alpha_p: 0.5, beta_p: 0.5, seed: 0 };
        assert!(ContractProblem::generate(&ProblemGenConfig { beta_p: 1.5, ..base }).is_err());
        assert!(ContractProblem::generate(&ProblemGenConfig { alpha_p: 0.0, ..base }).is_err());
        assert!(ContractProblem::generate(&ProblemGenConfig { m: 0, ..base }).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = ProblemGenConfig { m: 5, n: 9, alpha_p: 0.7, beta_p: 0.6, seed: 42 };
        assert_eq!(
            ContractProblem::generate(&cfg).unwrap(),
            ContractProblem::generate(&cfg).unwrap()
        );
        let other = ProblemGenConfig { seed: 43, ..cfg };
        assert_ne!(
            ContractProblem::generate(&cfg).unwrap(),
            ContractProblem::generate(&other).unwrap()
        );
    }

    #[test]
    fn training_sets() {
        let p = two_outcome_four_action();
        let set = p.sample_training_set(3, 20.0, 11).unwrap();
        assert_eq!(set.len(), 3);
        for (c, u) in &set {
            assert_eq!(*u, p.principal_utility(c).unwrap());
            assert!(c.pay().iter().all(|v| (0.0..20.0).contains(v)));
        }
        assert_eq!(set, p.sample_training_set(3, 20.0, 11).unwrap());
        assert!(p.sample_training_set(3, 0.0, 11).is_err());
        assert!(p.sample_training_set(0, 1.0, 11).is_err());
    }

    #[test]
    fn json_roundtrip_and_diagnostics() {
        let p = two_outcome_four_action();
        let back = ContractProblem::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(p, back);

        let err = ContractProblem::from_json_str("{\n \"n_actions\": 1,\n oops }").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");

        let bad_row = r#"{"n_actions":1,"n_outcomes":2,"prob":[[0.5,0.6]],"cost":[0],"value":[1,1]}"#;
        let err = ContractProblem::from_json_str(bad_row).unwrap_err();
        assert!(err.to_string().contains("prob[0]"), "{err}");

        let bad_cost = r#"{"n_actions":1,"n_outcomes":2,"prob":[[0.5,0.5]],"cost":[-1],"value":[1,1]}"#;
        let err = ContractProblem::from_json_str(bad_cost).unwrap_err();
        assert!(err.to_string().contains("cost[0]"), "{err}");

        let bad_shape = r#"{"n_actions":2,"n_outcomes":2,"prob":[[0.5,0.5]],"cost":[0,0],"value":[1,1]}"#;
        assert!(ContractProblem::from_json_str(bad_shape).is_err());
    }

    fn small_problem() -> impl Strategy<Value = ContractProblem> {
        (1usize..6, 2usize..5, 0.1f64..1.0, 0.0f64..1.0, any::<u64>()).prop_map(
            |(n, m, alpha_p, beta_p, seed)| {
                ContractProblem::generate(&ProblemGenConfig { m, n, alpha_p, beta_p, seed }).unwrap()
            },
        )
    }

    fn pay_in(m: usize, f_max: f64) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..f_max, m)
    }

    proptest! {
        #[test]
        fn cost_shift_keeps_best_response(p in small_problem(), shift in 0.0f64..50.0, raw in pay_in(4, 10.0)) {
            let m = p.n_outcomes();
            let contract = Contract::new(raw[..m].to_vec()).unwrap();
            let shifted = ContractProblem::new(
                p.prob().clone(),
                p.cost().iter().map(|c| c + shift).collect(),
                p.value().to_vec(),
            ).unwrap();
            prop_assert_eq!(
                p.best_response(&contract).unwrap().action,
                shifted.best_response(&contract).unwrap().action
            );
        }

        #[test]
        fn agent_utility_is_midpoint_convex(p in small_problem(), a in pay_in(4, 10.0), b in pay_in(4, 10.0)) {
            let m = p.n_outcomes();
            let fa = Contract::new(a[..m].to_vec()).unwrap();
            let fb = Contract::new(b[..m].to_vec()).unwrap();
            let mid = Contract::new(a[..m].iter().zip(&b[..m]).map(|(x, y)| 0.5 * (x + y)).collect()).unwrap();
            let ua = |c: &Contract| p.best_response(c).unwrap().agent_utility;
            prop_assert!(ua(&mid) <= 0.5 * (ua(&fa) + ua(&fb)) + 1e-9);
        }
    }
}
