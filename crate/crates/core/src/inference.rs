//! Belief updating, forward projection and expected free energy.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionId, GenerativeModel, StateId};
use crate::seed;

/// Floor applied to probabilities inside every logarithm.
pub const LOG_FLOOR: f64 = 1e-16;

fn ln_floor(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub q_s: Vec<f64>,
    pub timestep: usize,
}

impl BeliefState {
    pub fn new(q_s: Vec<f64>, timestep: usize) -> Self {
        BeliefState { q_s, timestep }
    }

    /// Belief equal to the model's prior, at time zero.
    pub fn prior(model: &GenerativeModel) -> Self {
        BeliefState::new(model.prior().to_vec(), 0)
    }

    pub fn one_hot(num_states: usize, state: StateId, timestep: usize) -> Self {
        let mut q_s = vec![0.0; num_states];
        q_s[state] = 1.0;
        BeliefState::new(q_s, timestep)
    }

    /// Most probable state; ties go to the lowest id.
    pub fn map_state(&self) -> StateId {
        let mut best = 0;
        for (s, &p) in self.q_s.iter().enumerate() {
            if p > self.q_s[best] {
                best = s;
            }
        }
        best
    }

    fn check(&self, model: &GenerativeModel) -> Result<()> {
        if self.q_s.len() == model.num_states() {
            Ok(())
        } else {
            Err(Error::BeliefLength {
                got: self.q_s.len(),
                expected: model.num_states(),
            })
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Posterior over states after observing `observation`:
/// `softmax(ln A[o, :] + ln (B_u · q_prev))`, or `softmax(ln A[o, :] + ln q_prev)`
/// when there is no previous action.
pub fn infer_state(
    model: &GenerativeModel,
    observation: StateId,
    prev_belief: &BeliefState,
    prev_action: Option<ActionId>,
) -> Result<BeliefState> {
    model.check_state(observation)?;
    prev_belief.check(model)?;
    let (predicted, timestep) = match prev_action {
        Some(u) => {
            model.check_action(u)?;
            (model.transition(u).mul_vec(&prev_belief.q_s), prev_belief.timestep + 1)
        }
        None => (prev_belief.q_s.clone(), prev_belief.timestep),
    };
    let likelihood = model.likelihood().row(observation);
    let logits: Vec<f64> = likelihood
        .iter()
        .zip(&predicted)
        .map(|(&a, &q)| ln_floor(a) + ln_floor(q))
        .collect();
    Ok(BeliefState::new(softmax(&logits), timestep))
}

/// `B_u · q`.
pub fn project(model: &GenerativeModel, belief: &BeliefState, action: ActionId) -> Result<BeliefState> {
    model.check_action(action)?;
    belief.check(model)?;
    Ok(BeliefState::new(
        model.transition(action).mul_vec(&belief.q_s),
        belief.timestep + 1,
    ))
}

/// `KL[q || p]` with both arguments floored inside the logarithm.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .map(|(&qi, &pi)| qi * (ln_floor(qi) - ln_floor(pi)))
        .sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfeResult {
    pub g: f64,
    pub per_step_risk: Vec<f64>,
    pub per_step_ambiguity: Vec<f64>,
    pub per_step_weight_cost: Vec<f64>,
}

/// Expected free energy of following `policy` from `initial_belief`.
///
/// Each action is applied in turn; after every projected step the risk
/// `KL[A·q_s || C]`, the ambiguity `H[A]·q_s` and the edge-weight cost
/// `weights·q_s` are recorded. `g` is the summed risk and ambiguity plus
/// `lambda` times the summed weight cost.
pub fn expected_free_energy(model: &GenerativeModel, initial_belief: &BeliefState, policy: &[ActionId]) -> EfeResult {
    let steps = policy.len();
    let mut per_step_risk = Vec::with_capacity(steps);
    let mut per_step_ambiguity = Vec::with_capacity(steps);
    let mut per_step_weight_cost = Vec::with_capacity(steps);
    let mut q_s = initial_belief.q_s.clone();
    for &u in policy {
        q_s = model.transition(u).mul_vec(&q_s);
        let q_o = model.likelihood().mul_vec(&q_s);
        per_step_risk.push(kl_divergence(&q_o, model.preferences()));
        per_step_ambiguity.push(dot(model.ambiguity(), &q_s));
        per_step_weight_cost.push(dot(model.weights(), &q_s));
    }
    let g = per_step_risk.iter().sum::<f64>()
        + per_step_ambiguity.iter().sum::<f64>()
        + model.lambda() * per_step_weight_cost.iter().sum::<f64>();
    EfeResult {
        g,
        per_step_risk,
        per_step_ambiguity,
        per_step_weight_cost,
    }
}

/// `softmax(-G)`.
pub fn policy_posterior(efes: &[f64]) -> Result<Vec<f64>> {
    if efes.is_empty() {
        return Err(Error::Empty("EFE vector"));
    }
    if efes.iter().any(|g| g.is_nan()) || efes.iter().all(|g| g.is_infinite()) {
        return Err(Error::Config("EFE vector needs finite entries".into()));
    }
    let neg: Vec<f64> = efes.iter().map(|g| -g).collect();
    Ok(softmax(&neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    #[default]
    Argmax,
    Sample,
}

/// Summed policy probability per first action, in ascending action order.
pub fn action_logits<P: AsRef<[ActionId]>>(policies: &[P], q_pi: &[f64]) -> BTreeMap<ActionId, f64> {
    let mut logits = BTreeMap::new();
    for (policy, &q) in policies.iter().zip(q_pi) {
        if let Some(&first) = policy.as_ref().first() {
            *logits.entry(first).or_insert(0.0) += q;
        }
    }
    logits
}

/// Choose the next action from the policy posterior. Each candidate action's
/// logit is the total posterior mass of the policies that start with it.
/// `Argmax` takes the largest logit (ties to the lowest action id); `Sample`
/// draws from the softmax of the logits.
pub fn select_action<P: AsRef<[ActionId]>>(
    policies: &[P],
    q_pi: &[f64],
    mode: SelectionMode,
    seed: u64,
) -> Result<ActionId> {
    if policies.is_empty() {
        return Err(Error::Empty("policy list"));
    }
    if policies.len() != q_pi.len() {
        return Err(Error::LengthMismatch {
            what: "policy posterior",
            expected: policies.len(),
            got: q_pi.len(),
        });
    }
    if policies.iter().any(|p| p.as_ref().is_empty()) {
        return Err(Error::Empty("policy"));
    }
    let logits = action_logits(policies, q_pi);
    match mode {
        SelectionMode::Argmax => {
            let mut best: Option<(ActionId, f64)> = None;
            for (&a, &l) in &logits {
                if best.is_none_or(|(_, bl)| l > bl) {
                    best = Some((a, l));
                }
            }
            Ok(best.expect("non-empty logits").0)
        }
        SelectionMode::Sample => {
            let actions: Vec<ActionId> = logits.keys().copied().collect();
            let values: Vec<f64> = logits.values().copied().collect();
            let probs = softmax(&values);
            let dist = WeightedIndex::new(&probs).map_err(|e| Error::Config(format!("action distribution: {e}")))?;
            Ok(actions[dist.sample(&mut seed::rng(seed))])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_graph, NodeId, WeightedDigraph};
    use crate::matrix::Matrix;
    use crate::model::build_model;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const A: NodeId = 0;
    const B: NodeId = 1;
    const C: NodeId = 2;

    fn cycle3() -> WeightedDigraph {
        WeightedDigraph::from_between_edges(3, &[(A, B, 1.0), (B, C, 1.0), (C, A, 1.0)], A, C).unwrap()
    }

    fn assert_one_hot(q: &[f64], at: usize) {
        for (s, &p) in q.iter().enumerate() {
            let want = if s == at { 1.0 } else { 0.0 };
            assert!((p - want).abs() < 1e-12, "q[{s}] = {p}");
        }
    }

    #[test]
    fn identity_likelihood_collapses_posterior() {
        let (states, actions, model) = build_model(&cycle3(), 1.0).unwrap();
        let s3 = 3;
        let uniform = BeliefState::prior(&model);
        let q = infer_state(&model, s3, &uniform, None).unwrap();
        assert_one_hot(&q.q_s, s3);

        let s0 = 0;
        let q = infer_state(&model, s0, &uniform, None).unwrap();
        assert_one_hot(&q.q_s, s0);
        assert_eq!(q.timestep, 0);

        let prev = BeliefState::one_hot(6, states.id(C, A).unwrap(), 0);
        let ab = states.id(A, B).unwrap();
        let q = infer_state(&model, ab, &prev, Some(actions.id(A, B).unwrap())).unwrap();
        assert_one_hot(&q.q_s, ab);
        assert_eq!(q.timestep, 1);

        // Observation the transition ruled out: both floored terms tie.
        let q = infer_state(&model, s3, &prev, Some(actions.id(A, B).unwrap())).unwrap();
        assert!((q.q_s[ab] - 0.5).abs() < 1e-12 && (q.q_s[s3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perturbed_likelihood_matches_direct_formula() {
        // 2-node graph: states (0,0), (0,1), (1,0), (1,1).
        let g = WeightedDigraph::from_between_edges(2, &[(0, 1, 1.0), (1, 0, 2.0)], 0, 1).unwrap();
        let (_, _, mut model) = build_model(&g, 1.0).unwrap();
        let n = model.num_states();
        let mut a = Matrix::zeros(n, n);
        for s in 0..n {
            for o in 0..n {
                a[(o, s)] = if o == s { 1.0 } else { 0.1 };
            }
        }
        let col_sum = 1.0 + 0.1 * (n - 1) as f64;
        for s in 0..n {
            for o in 0..n {
                a[(o, s)] /= col_sum;
            }
        }
        model.set_likelihood(a.clone()).unwrap();
        let uniform = BeliefState::new(vec![1.0 / n as f64; n], 0);
        let u = 1; // edge (0, 1)
        let obs = 2;
        let got = infer_state(&model, obs, &uniform, Some(u)).unwrap();

        // B_u q by hand: states located at node 0 (ids 0 and 2) move to id 1.
        let bq: [f64; 4] = [0.0, 0.75, 0.0, 0.25];
        let unnorm: Vec<f64> = (0..n).map(|s| a[(obs, s)] * bq[s].max(1e-16)).collect();
        let z: f64 = unnorm.iter().sum();
        for s in 0..n {
            assert_relative_eq!(got.q_s[s], unnorm[s] / z, max_relative = 1e-12);
        }
        assert!(got.q_s[0] < 1e-15);
        assert!(got.q_s[obs] < 1e-15);
    }

    #[test]
    fn infer_rejects_bad_ids() {
        let (_, _, model) = build_model(&cycle3(), 1.0).unwrap();
        let prior = BeliefState::prior(&model);
        assert!(matches!(
            infer_state(&model, 6, &prior, None),
            Err(Error::InvalidState { .. })
        ));
        assert!(matches!(
            infer_state(&model, 0, &prior, Some(99)),
            Err(Error::InvalidAction { .. })
        ));
        assert!(project(&model, &prior, 6).is_err());
    }

    #[test]
    fn project_examples() {
        let (states, actions, model) = build_model(&cycle3(), 1.0).unwrap();
        let ca = states.id(C, A).unwrap();
        let ab = states.id(A, B).unwrap();
        let q = project(&model, &BeliefState::one_hot(6, ca, 0), actions.id(A, B).unwrap()).unwrap();
        assert_one_hot(&q.q_s, ab);
        assert_eq!(q.timestep, 1);

        // Invalid from location B: stays.
        let q = project(&model, &BeliefState::one_hot(6, ab, 0), actions.id(C, A).unwrap()).unwrap();
        assert_one_hot(&q.q_s, ab);

        // Half mass on (C,A), half on (A,B); action (B,C) only moves the second.
        let mut q0 = vec![0.0; 6];
        q0[ca] = 0.5;
        q0[ab] = 0.5;
        let q = project(&model, &BeliefState::new(q0, 0), actions.id(B, C).unwrap()).unwrap();
        let bc = states.id(B, C).unwrap();
        let mut want = vec![0.0; 6];
        want[ca] = 0.5;
        want[bc] = 0.5;
        assert_eq!(q.q_s, want);
    }

    #[test]
    fn efe_is_zero_when_prediction_matches_preference() {
        let (states, actions, mut model) = build_model(&cycle3(), 0.0).unwrap();
        let cc = states.id(C, C).unwrap();
        let mut c = vec![0.0; 6];
        c[cc] = 1.0;
        model.set_preferences(c).unwrap();
        let stay = actions.id(C, C).unwrap();
        let r = expected_free_energy(&model, &BeliefState::one_hot(6, cc, 0), &[stay; 3]);
        assert_eq!(r.g, 0.0);
        assert_eq!(r.per_step_risk, vec![0.0; 3]);
    }

    #[test]
    fn path_to_goal_beats_staying() {
        let (states, actions, model) = build_model(&cycle3(), 1.0).unwrap();
        let start = BeliefState::one_hot(6, states.id(A, A).unwrap(), 0);
        let go = [
            actions.id(A, B).unwrap(),
            actions.id(B, C).unwrap(),
            actions.id(C, C).unwrap(),
        ];
        let stay = [actions.id(A, A).unwrap(); 3];
        let g_go = expected_free_energy(&model, &start, &go);
        let g_stay = expected_free_energy(&model, &start, &stay);

        // Straight-line reference: one-hot path (A,B), (B,C), (C,C).
        let eps: f64 = 1e-8;
        let dest_mass = (1.0 - 4.0 * eps) / 2.0;
        let reference_go = (-eps.ln() + 1.0) + (-dest_mass.ln() + 1.0) + (-dest_mass.ln() + 0.0);
        let reference_stay = 3.0 * (-eps.ln() + 2.0);
        assert_relative_eq!(g_go.g, reference_go, max_relative = 1e-12);
        assert_relative_eq!(g_stay.g, reference_stay, max_relative = 1e-12);
        assert!(g_go.g < g_stay.g);
        assert!(g_go.per_step_ambiguity.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn efe_components_sum_to_g() {
        let g = generate_graph(4, 3).unwrap();
        let (_, actions, model) = build_model(&g, 0.7).unwrap();
        let start = BeliefState::prior(&model);
        let policy: Vec<ActionId> = (0..4).map(|i| i % actions.len()).collect();
        let r = expected_free_energy(&model, &start, &policy);
        let total = r.per_step_risk.iter().sum::<f64>()
            + r.per_step_ambiguity.iter().sum::<f64>()
            + 0.7 * r.per_step_weight_cost.iter().sum::<f64>();
        assert!((r.g - total).abs() < 1e-9);
        assert_eq!(r.per_step_risk.len(), 4);
        assert_eq!(r, expected_free_energy(&model, &start, &policy));
    }

    #[test]
    fn posterior_examples() {
        let q = policy_posterior(&[1.0, 1.0, 1.0]).unwrap();
        for p in q {
            assert_relative_eq!(p, 1.0 / 3.0, max_relative = 1e-15);
        }
        let q = policy_posterior(&[0.0, 1e300]).unwrap();
        assert_eq!(q, vec![1.0, 0.0]);

        // Direct arithmetic: e^-1 / (e^-1 + e^-2) = 1 / (1 + e^-1).
        let q = policy_posterior(&[1.0, 2.0]).unwrap();
        let first = 1.0 / (1.0 + (-1.0f64).exp());
        assert_relative_eq!(q[0], first, max_relative = 1e-14);
        assert_relative_eq!(q[0], 0.7311, epsilon = 1e-4);
        assert_relative_eq!(q[1], 0.2689, epsilon = 1e-4);

        assert!(matches!(policy_posterior(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn select_action_examples() {
        let two = vec![vec![0, 5], vec![1, 5]];
        assert_eq!(select_action(&two, &[0.9, 0.1], SelectionMode::Argmax, 0).unwrap(), 0);

        let three = vec![vec![0], vec![0], vec![1]];
        assert_eq!(
            select_action(&three, &[0.3, 0.3, 0.4], SelectionMode::Argmax, 0).unwrap(),
            0
        );

        let one = vec![vec![7, 1]];
        for mode in [SelectionMode::Argmax, SelectionMode::Sample] {
            for seed in 0..5 {
                assert_eq!(select_action(&one, &[1.0], mode, seed).unwrap(), 7);
            }
        }

        let tie = vec![vec![4], vec![2]];
        assert_eq!(select_action(&tie, &[0.5, 0.5], SelectionMode::Argmax, 0).unwrap(), 2);

        let empty: Vec<Vec<ActionId>> = Vec::new();
        assert!(select_action(&empty, &[], SelectionMode::Argmax, 0).is_err());
    }

    #[test]
    fn sampled_action_is_seeded() {
        let ps = vec![vec![0], vec![1], vec![2]];
        let q = [0.2, 0.3, 0.5];
        let a = select_action(&ps, &q, SelectionMode::Sample, 11).unwrap();
        let b = select_action(&ps, &q, SelectionMode::Sample, 11).unwrap();
        assert_eq!(a, b);
        let seen: std::collections::BTreeSet<_> = (0..200)
            .map(|s| select_action(&ps, &q, SelectionMode::Sample, s).unwrap())
            .collect();
        assert_eq!(seen.len(), 3);
    }

    proptest! {
        #[test]
        fn posterior_is_shift_invariant(
            efes in prop::collection::vec(-50.0f64..50.0, 1..20),
            shift in -100.0f64..100.0,
        ) {
            let q = policy_posterior(&efes).unwrap();
            let shifted: Vec<f64> = efes.iter().map(|g| g + shift).collect();
            let q2 = policy_posterior(&shifted).unwrap();
            for (a, b) in q.iter().zip(&q2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn beliefs_stay_normalized(seed in 0u64..500, steps in prop::collection::vec(0usize..64, 1..12)) {
            let g = generate_graph(4, seed).unwrap();
            let (_, actions, model) = build_model(&g, 1.0).unwrap();
            let n = model.num_states();
            let mut belief = BeliefState::prior(&model);
            for (i, raw) in steps.iter().enumerate() {
                let u = raw % actions.len();
                belief = if i % 2 == 0 {
                    project(&model, &belief, u).unwrap()
                } else {
                    infer_state(&model, raw % n, &belief, Some(u)).unwrap()
                };
                prop_assert!(belief.q_s.iter().all(|&p| p >= 0.0));
                prop_assert!((belief.q_s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
