//! The four inference games, instantiated with the max-confidence
//! adversary. The adversary only ever sees the largest confidence
//! value, never the class label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::PartialVector;
use crate::dataset::{sample_neighbor, Dataset};
use crate::error::{Error, Result};
use crate::exec;
use crate::mlp::MlpModel;
use crate::seeding;

/// Enumeration guard: at most 2^20 completions per target.
pub const MAX_UNKNOWN: usize = 20;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    /// What the adversary was challenged with.
    pub challenge: String,
    /// What the adversary announced.
    pub guess: String,
    pub correct: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameOutcome {
    pub trials: usize,
    pub successes: usize,
    pub advantage: f64,
    pub log: Vec<TrialRecord>,
}

impl GameOutcome {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Per-target record of the enumeration attack.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AiaTargetRecord {
    pub target: usize,
    pub m_prime: usize,
    pub best_confidence: f64,
    pub tie_count: usize,
    /// Average Hamming distance of the tied argmax completions to the
    /// true member vector.
    pub avg_hamming_to_truth: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AiaSummary {
    pub mean_avg_hamming: f64,
    /// Random-guessing baseline m'/2.
    pub baseline: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AiaResult {
    pub per_target: Vec<AiaTargetRecord>,
    pub summary: AiaSummary,
}

/// Threshold MIA: guess member iff max confidence ≥ threshold.
/// Advantage is TPR − FPR at that threshold.
pub fn run_mia_game(
    model: &MlpModel,
    members: &Dataset,
    nonmembers: &Dataset,
    threshold: f64,
) -> Result<GameOutcome> {
    if members.is_empty() || nonmembers.is_empty() {
        return Err(Error::Domain(
            "member and non-member sets must be non-empty".into(),
        ));
    }
    let member_conf = model.max_confidences(members.records())?;
    let nonmember_conf = model.max_confidences(nonmembers.records())?;
    let mut log = Vec::with_capacity(members.len() + nonmembers.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (i, &c) in member_conf.iter().enumerate() {
        let guess_member = c >= threshold;
        if guess_member {
            tp += 1;
        }
        log.push(TrialRecord {
            challenge: format!("member[{i}] conf={c}"),
            guess: if guess_member { "member" } else { "nonmember" }.into(),
            correct: guess_member,
        });
    }
    for (i, &c) in nonmember_conf.iter().enumerate() {
        let guess_member = c >= threshold;
        if guess_member {
            fp += 1;
        }
        log.push(TrialRecord {
            challenge: format!("nonmember[{i}] conf={c}"),
            guess: if guess_member { "member" } else { "nonmember" }.into(),
            correct: !guess_member,
        });
    }
    let tpr = tp as f64 / members.len() as f64;
    let fpr = fp as f64 / nonmembers.len() as f64;
    let successes = tp + (nonmembers.len() - fp);
    Ok(GameOutcome {
        trials: members.len() + nonmembers.len(),
        successes,
        advantage: tpr - fpr,
        log,
    })
}

/// Strong MIA: per trial, a uniform member against a uniform r-neighbor
/// of it outside the training set; the adversary picks the one with the
/// higher max confidence (fair coin on an exact tie).
/// Advantage is 2·accuracy − 1.
pub fn run_strong_mia_game(
    model: &MlpModel,
    train: &Dataset,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<GameOutcome> {
    if train.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    if r == 0 || r > train.width() {
        return Err(Error::Domain(format!(
            "r = {r} out of range 1..={}",
            train.width()
        )));
    }
    let index = train.index();
    let results: Vec<Result<TrialRecord>> = exec::map_indexed(trials, |i| {
        let mut rng = ChaCha20Rng::seed_from_u64(seeding::child_seed(seed, "strong-mia", i as u64));
        let member = train.record(rng.gen_range(0..train.len()));
        let neighbor = sample_neighbor(member, r, &index, &mut rng)?;
        let conf_member = model.max_confidence(member)?;
        let conf_neighbor = model.max_confidence(&neighbor)?;
        let picked_member = if conf_member == conf_neighbor {
            rng.gen_bool(0.5)
        } else {
            conf_member > conf_neighbor
        };
        Ok(TrialRecord {
            challenge: format!("trial={i} r={r}"),
            guess: if picked_member { "x0" } else { "x1" }.into(),
            correct: picked_member,
        })
    });
    let mut log = Vec::with_capacity(trials);
    for res in results {
        log.push(res?);
    }
    let successes = log.iter().filter(|t| t.correct).count();
    let accuracy = successes as f64 / trials as f64;
    Ok(GameOutcome {
        trials,
        successes,
        advantage: 2.0 * accuracy - 1.0,
        log,
    })
}

/// Best completion(s) of a portion by exhaustive enumeration: the
/// argmax code (lowest code wins ties) plus every tied code, in
/// ascending order.
fn enumerate_argmax(model: &MlpModel, portion: &PartialVector) -> (u64, f64, Vec<u64>) {
    let total: u64 = 1 << portion.unknown_len();
    // chunked so the candidate scans can fan out per target batch; the
    // merge order is fixed by ascending code ranges
    let mut best_code = 0u64;
    let mut best_conf = f64::NEG_INFINITY;
    let mut tied: Vec<u64> = Vec::new();
    for code in 0..total {
        let candidate = portion.complete_from_code(code);
        let conf = model
            .forward_dense(&candidate.to_dense())
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if conf > best_conf {
            best_conf = conf;
            best_code = code;
            tied.clear();
            tied.push(code);
        } else if conf == best_conf {
            tied.push(code);
        }
    }
    (best_code, best_conf, tied)
}

fn check_enumeration_inputs(targets: &Dataset, unknown: &[usize]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Domain("no targets".into()));
    }
    if unknown.is_empty() {
        return Err(Error::Domain("unknown part must be non-empty".into()));
    }
    if unknown.len() > MAX_UNKNOWN {
        return Err(Error::Budget(format!(
            "m' = {} exceeds the enumeration cap {MAX_UNKNOWN}",
            unknown.len()
        )));
    }
    Ok(())
}

/// The assignment bits of `code` at the unknown indices, as a string.
fn code_bits(code: u64, m_prime: usize) -> String {
    (0..m_prime)
        .map(|j| if (code >> j) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// The true assignment code of a target at the unknown indices.
fn truth_code(target: &crate::bits::BitVector, unknown: &[usize]) -> u64 {
    let mut code = 0u64;
    for (j, &i) in unknown.iter().enumerate() {
        if target.get(i) {
            code |= 1 << j;
        }
    }
    code
}

/// Exact AIA: enumerate all completions of each target's portion and
/// announce the argmax-confidence one. Success requires exact equality
/// with the true member vector. The reported advantage is the member
/// success rate (the population branch's exact-match probability is
/// negligible at these widths).
pub fn run_exact_aia(
    model: &MlpModel,
    targets: &Dataset,
    unknown: &[usize],
) -> Result<GameOutcome> {
    check_enumeration_inputs(targets, unknown)?;
    let m_prime = unknown.len();
    let log: Vec<TrialRecord> = exec::map_indexed(targets.len(), |i| {
        let target = targets.record(i);
        let portion = PartialVector::new(target.clone(), unknown.to_vec())
            .expect("validated unknown indices");
        let (best_code, _, _) = enumerate_argmax(model, &portion);
        let correct = best_code == truth_code(target, unknown);
        TrialRecord {
            challenge: format!("target={i} m'={m_prime}"),
            guess: code_bits(best_code, m_prime),
            correct,
        }
    });
    let successes = log.iter().filter(|t| t.correct).count();
    let trials = log.len();
    Ok(GameOutcome {
        trials,
        successes,
        advantage: successes as f64 / trials as f64,
        log,
    })
}

/// Approximate AIA: same enumeration, but the per-target score is the
/// tie-averaged Hamming distance of the argmax completions to the
/// truth, and success means that average is within `alpha`.
pub fn run_approx_aia(
    model: &MlpModel,
    targets: &Dataset,
    unknown: &[usize],
    alpha: usize,
) -> Result<(GameOutcome, AiaResult)> {
    check_enumeration_inputs(targets, unknown)?;
    let m_prime = unknown.len();
    let per_target: Vec<(TrialRecord, AiaTargetRecord)> =
        exec::map_indexed(targets.len(), |i| {
            let target = targets.record(i);
            let portion = PartialVector::new(target.clone(), unknown.to_vec())
                .expect("validated unknown indices");
            let (best_code, best_conf, tied) = enumerate_argmax(model, &portion);
            let truth = truth_code(target, unknown);
            let avg_hamming = tied
                .iter()
                .map(|&c| (c ^ truth).count_ones() as f64)
                .sum::<f64>()
                / tied.len() as f64;
            let correct = avg_hamming <= alpha as f64;
            (
                TrialRecord {
                    challenge: format!("target={i} m'={m_prime} alpha={alpha}"),
                    guess: code_bits(best_code, m_prime),
                    correct,
                },
                AiaTargetRecord {
                    target: i,
                    m_prime,
                    best_confidence: best_conf,
                    tie_count: tied.len(),
                    avg_hamming_to_truth: avg_hamming,
                },
            )
        });
    let (log, records): (Vec<TrialRecord>, Vec<AiaTargetRecord>) =
        per_target.into_iter().unzip();
    let successes = log.iter().filter(|t| t.correct).count();
    let trials = log.len();
    let mean = records
        .iter()
        .map(|r| r.avg_hamming_to_truth)
        .sum::<f64>()
        / records.len() as f64;
    Ok((
        GameOutcome {
            trials,
            successes,
            advantage: successes as f64 / trials as f64,
            log,
        },
        AiaResult {
            per_target: records,
            summary: AiaSummary {
                mean_avg_hamming: mean,
                baseline: m_prime as f64 / 2.0,
            },
        },
    ))
}
