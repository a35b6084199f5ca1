//! Decoding: greedy, sampled, and beam-search selection of pool terms, plus
//! the identity agent and probability-averaging ensemble decoding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::policy::{policy_forward, step_distribution, PolicyConfig, PolicyForward};
use crate::agents::{CandidatePool, Reformulation};
use crate::nn::ModelParams;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMethod {
    Greedy,
    Sample,
    Beam,
}

#[derive(Debug, Clone, Copy)]
pub struct DecodeOpts {
    /// Maximum number of appended terms.
    pub t_max: usize,
    pub beam_width: usize,
    /// Number of independent draws in sample mode.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for DecodeOpts {
    fn default() -> Self {
        DecodeOpts { t_max: 5, beam_width: 20, n_samples: 8, seed: 0 }
    }
}

fn make_reformulation(
    q0: &[String],
    pool: &CandidatePool,
    chosen: &[usize],
    log_prob: f64,
    agent_id: &str,
    method: DecodeMethod,
) -> Reformulation {
    Reformulation {
        q0: q0.to_vec(),
        added: chosen.iter().map(|&i| pool.terms[i].term.clone()).collect(),
        agent_id: agent_id.to_string(),
        method,
        log_prob,
    }
}

/// Walk one greedy episode over precomputed logits.
fn greedy_walk(fwd: &PolicyForward, pool_len: usize, t_max: usize) -> (Vec<usize>, f64) {
    let mut remaining: Vec<usize> = (0..pool_len).collect();
    let mut chosen = Vec::new();
    let mut log_p = 0.0;
    for _ in 0..t_max {
        if remaining.is_empty() {
            break;
        }
        let (probs, stop) = step_distribution(fwd, &remaining);
        // terms are scanned before the stop action; strict inequality keeps
        // the first maximum, so ties resolve to the lowest pool index
        let mut best = stop;
        let mut best_idx: Option<usize> = None;
        for (pos, &p) in probs.iter().enumerate() {
            if p > best {
                best = p;
                best_idx = Some(pos);
            }
        }
        match best_idx {
            Some(pos) => {
                chosen.push(remaining[pos]);
                log_p += probs[pos].ln();
                remaining.remove(pos);
            }
            None => {
                log_p += stop.ln();
                return (chosen, log_p);
            }
        }
    }
    // ending at t_max picks or on an exhausted pool costs no probability
    (chosen, log_p)
}

fn sample_walk<R: Rng>(
    fwd: &PolicyForward,
    pool_len: usize,
    t_max: usize,
    rng: &mut R,
) -> (Vec<usize>, f64) {
    let mut remaining: Vec<usize> = (0..pool_len).collect();
    let mut chosen = Vec::new();
    let mut log_p = 0.0;
    for _ in 0..t_max {
        if remaining.is_empty() {
            break;
        }
        let (probs, stop) = step_distribution(fwd, &remaining);
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        let mut picked: Option<usize> = None;
        for (pos, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                picked = Some(pos);
                break;
            }
        }
        match picked {
            Some(pos) => {
                chosen.push(remaining[pos]);
                log_p += probs[pos].ln();
                remaining.remove(pos);
            }
            None => {
                log_p += stop.ln();
                return (chosen, log_p);
            }
        }
    }
    (chosen, log_p)
}

#[derive(Clone)]
struct BeamState {
    chosen: Vec<usize>,
    remaining: Vec<usize>,
    log_p: f64,
}

fn beam_walk(fwd: &PolicyForward, pool_len: usize, t_max: usize, width: usize) -> Vec<(Vec<usize>, f64)> {
    let mut active = vec![BeamState { chosen: Vec::new(), remaining: (0..pool_len).collect(), log_p: 0.0 }];
    let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();
    for _ in 0..t_max {
        if active.is_empty() {
            break;
        }
        let mut next: Vec<BeamState> = Vec::new();
        for state in &active {
            if state.remaining.is_empty() {
                finished.push((state.chosen.clone(), state.log_p));
                continue;
            }
            let (probs, stop) = step_distribution(fwd, &state.remaining);
            finished.push((state.chosen.clone(), state.log_p + stop.ln()));
            for (pos, &p) in probs.iter().enumerate() {
                let mut chosen = state.chosen.clone();
                chosen.push(state.remaining[pos]);
                let mut remaining = state.remaining.clone();
                remaining.remove(pos);
                next.push(BeamState { chosen, remaining, log_p: state.log_p + p.ln() });
            }
        }
        next.sort_by(|a, b| b.log_p.total_cmp(&a.log_p).then_with(|| a.chosen.cmp(&b.chosen)));
        next.truncate(width);
        active = next;
    }
    // sequences alive at t_max end without a stop factor
    finished.extend(active.into_iter().map(|s| (s.chosen, s.log_p)));
    finished.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    finished.truncate(width);
    finished
}

/// Decode reformulations for one query. Greedy returns one reformulation,
/// sample returns `n_samples` independent draws, beam returns the
/// `beam_width` highest log-probability sequences.
pub fn decode(
    params: &ModelParams,
    cfg: &PolicyConfig,
    pool: &CandidatePool,
    q0: &[String],
    q0_ids: &[u32],
    mode: DecodeMethod,
    opts: &DecodeOpts,
    agent_id: &str,
) -> Result<Vec<Reformulation>> {
    if opts.beam_width == 0 {
        return Err(Error::InvalidArg("decode: beam_width must be >= 1".into()));
    }
    if pool.is_empty() || opts.t_max == 0 {
        // nothing to append: the only sequence is the empty one, chosen with
        // certainty (no step distribution is ever evaluated)
        let n = match mode {
            DecodeMethod::Sample => opts.n_samples,
            _ => 1,
        };
        return Ok((0..n).map(|_| make_reformulation(q0, pool, &[], 0.0, agent_id, mode)).collect());
    }
    let fwd = policy_forward(params, cfg, pool, q0_ids)?;
    let out = match mode {
        DecodeMethod::Greedy => {
            let (chosen, log_p) = greedy_walk(&fwd, pool.len(), opts.t_max);
            vec![make_reformulation(q0, pool, &chosen, log_p, agent_id, mode)]
        }
        DecodeMethod::Sample => {
            let mut rng = seed::rng(opts.seed, "decode-sample");
            (0..opts.n_samples)
                .map(|_| {
                    let (chosen, log_p) = sample_walk(&fwd, pool.len(), opts.t_max, &mut rng);
                    make_reformulation(q0, pool, &chosen, log_p, agent_id, mode)
                })
                .collect()
        }
        DecodeMethod::Beam => beam_walk(&fwd, pool.len(), opts.t_max, opts.beam_width)
            .into_iter()
            .map(|(chosen, log_p)| make_reformulation(q0, pool, &chosen, log_p, agent_id, mode))
            .collect(),
    };
    Ok(out)
}

/// The identity agent: the reformulation is the original query.
pub fn identity_agent(q0: &[String]) -> Reformulation {
    Reformulation {
        q0: q0.to_vec(),
        added: Vec::new(),
        agent_id: "identity".to_string(),
        method: DecodeMethod::Greedy,
        log_prob: 0.0,
    }
}

/// Ensemble decoding: at each step the action distribution is the arithmetic
/// mean of the per-policy softmax distributions; selection is greedy. The
/// reported log-probability is the log of the averaged path probability.
pub fn ensemble_decode(
    policies: &[&ModelParams],
    cfg: &PolicyConfig,
    pool: &CandidatePool,
    q0: &[String],
    q0_ids: &[u32],
    t_max: usize,
) -> Result<Reformulation> {
    if policies.is_empty() {
        return Err(Error::EmptyInput("ensemble_decode: policies"));
    }
    if pool.is_empty() || t_max == 0 {
        let mut r = identity_agent(q0);
        r.agent_id = "ensemble".to_string();
        return Ok(r);
    }
    let fwds: Vec<PolicyForward> =
        policies.iter().map(|p| policy_forward(p, cfg, pool, q0_ids)).collect::<Result<_>>()?;
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut chosen = Vec::new();
    let mut log_p = 0.0;
    for _ in 0..t_max {
        if remaining.is_empty() {
            break;
        }
        let mut mean_terms = vec![0.0; remaining.len()];
        let mut mean_stop = 0.0;
        for fwd in &fwds {
            let (probs, stop) = step_distribution(fwd, &remaining);
            for (m, p) in mean_terms.iter_mut().zip(&probs) {
                *m += p;
            }
            mean_stop += stop;
        }
        let n = fwds.len() as f64;
        mean_terms.iter_mut().for_each(|m| *m /= n);
        mean_stop /= n;

        let mut best = mean_stop;
        let mut best_idx: Option<usize> = None;
        for (pos, &p) in mean_terms.iter().enumerate() {
            if p > best {
                best = p;
                best_idx = Some(pos);
            }
        }
        match best_idx {
            Some(pos) => {
                chosen.push(remaining[pos]);
                log_p += mean_terms[pos].ln();
                remaining.remove(pos);
            }
            None => {
                log_p += mean_stop.ln();
                break;
            }
        }
    }
    let mut r = make_reformulation(q0, pool, &chosen, log_p, "ensemble", DecodeMethod::Greedy);
    r.log_prob = log_p;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::policy::init_policy_params;
    use crate::agents::PoolTerm;
    use crate::seed;

    fn toy_pool(n: usize) -> CandidatePool {
        CandidatePool {
            terms: (0..n)
                .map(|i| PoolTerm {
                    term: format!("t{i}"),
                    term_id: i as u32,
                    nn_id: (i + 1) as u32,
                    features: [0.5, 0.5, 1.0, 0.0],
                })
                .collect(),
        }
    }

    fn cfg() -> PolicyConfig {
        PolicyConfig { vocab_size: 16, embed_dim: 4, hidden_dim: 6 }
    }

    fn q0() -> (Vec<String>, Vec<u32>) {
        (vec!["q".to_string()], vec![7])
    }

    #[test]
    fn t_max_zero_yields_identity_with_log_prob_zero() {
        let cfg = cfg();
        let params = init_policy_params(&cfg, &mut seed::rng(0, "d0")).unwrap();
        let (q, ids) = q0();
        let opts = DecodeOpts { t_max: 0, ..Default::default() };
        let out =
            decode(&params, &cfg, &toy_pool(3), &q, &ids, DecodeMethod::Greedy, &opts, "a").unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].added.is_empty());
        assert_eq!(out[0].log_prob, 0.0);
    }

    #[test]
    fn forced_single_term_path() {
        // stop logit pushed to -inf-ish: greedy must take the only pool term
        let cfg = cfg();
        let mut params = init_policy_params(&cfg, &mut seed::rng(1, "d1")).unwrap();
        params.value_mut("stop.b").data_mut()[0] = -50.0;
        params.value_mut("stop.w").fill(0.0);
        let (q, ids) = q0();
        let opts = DecodeOpts { t_max: 3, ..Default::default() };
        let out =
            decode(&params, &cfg, &toy_pool(1), &q, &ids, DecodeMethod::Greedy, &opts, "a").unwrap();
        assert_eq!(out[0].added, vec!["t0".to_string()]);
        assert_eq!(out[0].full_query(), vec!["q".to_string(), "t0".to_string()]);
    }

    #[test]
    fn sequence_probabilities_sum_to_one_exhaustively() {
        // enumerate all sequences over a 3-term pool with t_max = 2
        let cfg = cfg();
        let params = init_policy_params(&cfg, &mut seed::rng(2, "d2")).unwrap();
        let pool = toy_pool(3);
        let (_, ids) = q0();
        let mut total = 0.0;
        // empty sequence
        total +=
            crate::agents::sequence_log_prob(&params, &cfg, &pool, &ids, &[], 2).unwrap().exp();
        for a in 0..3 {
            total += crate::agents::sequence_log_prob(&params, &cfg, &pool, &ids, &[a], 2)
                .unwrap()
                .exp();
            for b in 0..3 {
                if a != b {
                    total +=
                        crate::agents::sequence_log_prob(&params, &cfg, &pool, &ids, &[a, b], 2)
                            .unwrap()
                            .exp();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "total probability {total}");
    }

    #[test]
    fn beam_top_sequence_is_at_least_greedy() {
        let cfg = cfg();
        for s in 0..10u64 {
            let params = init_policy_params(&cfg, &mut seed::rng(s, "d3")).unwrap();
            let pool = toy_pool(5);
            let (q, ids) = q0();
            let opts = DecodeOpts { t_max: 3, beam_width: 4, ..Default::default() };
            let greedy =
                decode(&params, &cfg, &pool, &q, &ids, DecodeMethod::Greedy, &opts, "a").unwrap();
            let beam =
                decode(&params, &cfg, &pool, &q, &ids, DecodeMethod::Beam, &opts, "a").unwrap();
            assert!(beam[0].log_prob >= greedy[0].log_prob - 1e-12);
            assert_eq!(beam.len(), 4);
        }
    }

    #[test]
    fn no_replacement_within_a_reformulation() {
        let cfg = cfg();
        let params = init_policy_params(&cfg, &mut seed::rng(4, "d4")).unwrap();
        let pool = toy_pool(4);
        let (q, ids) = q0();
        let opts = DecodeOpts { t_max: 4, n_samples: 50, seed: 11, ..Default::default() };
        let out = decode(&params, &cfg, &pool, &q, &ids, DecodeMethod::Sample, &opts, "a").unwrap();
        for r in out {
            let mut added = r.added.clone();
            added.sort();
            let before = added.len();
            added.dedup();
            assert_eq!(added.len(), before, "duplicate pool term in {:?}", r.added);
        }
    }

    #[test]
    fn sampling_frequencies_match_probabilities_within_3_sigma() {
        let cfg = cfg();
        let params = init_policy_params(&cfg, &mut seed::rng(5, "d5")).unwrap();
        let pool = toy_pool(3);
        let (_, ids) = q0();
        let (term_probs, stop_prob) =
            crate::agents::action_distribution(&params, &cfg, &pool, &ids).unwrap();
        let n = 100_000usize;
        let opts = DecodeOpts { t_max: 1, n_samples: n, seed: 42, ..Default::default() };
        let out =
            decode(&params, &cfg, &pool, &q0().0, &ids, DecodeMethod::Sample, &opts, "a").unwrap();
        let mut counts = vec![0usize; 4]; // 3 terms + stop
        for r in &out {
            match r.added.first() {
                Some(t) => {
                    let idx = pool.terms.iter().position(|p| &p.term == t).unwrap();
                    counts[idx] += 1;
                }
                None => counts[3] += 1,
            }
        }
        let probs = [term_probs[0], term_probs[1], term_probs[2], stop_prob];
        for (count, p) in counts.iter().zip(probs) {
            let expected = n as f64 * p;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                ((*count as f64) - expected).abs() <= 3.0 * sigma,
                "count {count} expected {expected} sigma {sigma}"
            );
        }
    }

    #[test]
    fn identity_agent_is_plain_passthrough() {
        let r = identity_agent(&["a".to_string(), "b".to_string()]);
        assert_eq!(r.full_query(), vec!["a".to_string(), "b".to_string()]);
        assert_eq!(r.log_prob, 0.0);
        assert_eq!(r.agent_id, "identity");
        let empty = identity_agent(&[]);
        assert!(empty.full_query().is_empty());
    }

    #[test]
    fn ensemble_of_identical_policies_equals_single_greedy() {
        let cfg = cfg();
        let params = init_policy_params(&cfg, &mut seed::rng(6, "d6")).unwrap();
        let pool = toy_pool(4);
        let (q, ids) = q0();
        let opts = DecodeOpts { t_max: 3, ..Default::default() };
        let single =
            decode(&params, &cfg, &pool, &q, &ids, DecodeMethod::Greedy, &opts, "a").unwrap();
        let ens = ensemble_decode(&[&params, &params, &params], &cfg, &pool, &q, &ids, 3).unwrap();
        assert_eq!(ens.added, single[0].added);
        let one = ensemble_decode(&[&params], &cfg, &pool, &q, &ids, 3).unwrap();
        assert_eq!(one.added, single[0].added);
    }

    #[test]
    fn ensemble_averages_hand_distributions() {
        // two 2-action policies with first-step term probabilities
        // (0.9, 0.1)-ish vs (0.2, 0.8)-ish: drive them via raw logits and a
        // suppressed stop action, then check the averaged argmax
        let cfg = PolicyConfig { vocab_size: 8, embed_dim: 2, hidden_dim: 2 };
        let mut a = init_policy_params(&cfg, &mut seed::rng(7, "d7")).unwrap();
        let mut b = init_policy_params(&cfg, &mut seed::rng(8, "d8")).unwrap();
        for p in [&mut a, &mut b] {
            for name in ["embed", "term.w1", "term.b1", "term.w2", "stop.w"] {
                p.value_mut(name).fill(0.0);
            }
            p.value_mut("stop.b").data_mut()[0] = -1e3;
        }
        // with zeroed nets both term logits are b2: nudge per-policy biases so
        // softmax over 2 terms gives (0.9, 0.1) and (0.2, 0.8) via features
        // instead: w1 reads feature 0, which differs per term
        let pool = CandidatePool {
            terms: vec![
                PoolTerm { term: "x".into(), term_id: 0, nn_id: 1, features: [1.0, 0.0, 0.0, 0.0] },
                PoolTerm { term: "y".into(), term_id: 1, nn_id: 2, features: [0.0, 0.0, 0.0, 0.0] },
            ],
        };
        let ln9 = (0.9f64 / 0.1).ln(); // logit gap for (0.9, 0.1)
        let ln4 = (0.2f64 / 0.8).ln(); // logit gap for (0.2, 0.8)
        for (p, gap) in [(&mut a, ln9), (&mut b, ln4)] {
            // hidden unit 0 passes feature 0 through with weight gap
            p.value_mut("term.w1").data_mut()[0] = 1.0;
            p.value_mut("term.w2").data_mut()[0] = gap;
        }
        let (pa, _) = crate::agents::action_distribution(&a, &cfg, &pool, &[3]).unwrap();
        let (pb, _) = crate::agents::action_distribution(&b, &cfg, &pool, &[3]).unwrap();
        assert!((pa[0] - 0.9).abs() < 1e-9 && (pb[0] - 0.2).abs() < 1e-9);
        let ens = ensemble_decode(&[&a, &b], &cfg, &pool, &["q".into()], &[3], 1).unwrap();
        // averaged distribution (0.55, 0.45) → action x
        assert_eq!(ens.added, vec!["x".to_string()]);
    }
}
