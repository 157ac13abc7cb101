//! Hybrid-argument samplers.
//!
//! Given a query program that distinguishes the true S-oracle from a
//! substitute Delta, running a uniformly chosen prefix against Delta and
//! measuring the query register finds an element of S \ Delta with
//! probability at least 1/(36 t^2) per round. The cumulative sampler guesses
//! a witness, runs v rounds while feeding each output back into Delta, and
//! succeeds jointly with probability at least 2^{-q} (1/(36 t^2))^v.

use std::collections::{HashMap, HashSet};
use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use crate::circuit::{
    run_program, run_program_prefix, OracleSlot, PhaseOracle, ProgramOracles, QueryProgram, Stage,
};
use crate::error::{Error, Result};
use crate::hypercube::{good_multiset, Multiset};
use crate::instances::{sample_u_given_s, spectral_forrelation, Instance};
use crate::rng::{labels, stream_rng};

/// Guaranteed per-round hit probability for a t-query distinguisher.
pub fn per_round_bound(t: usize) -> f64 {
    1.0 / (36.0 * (t * t) as f64)
}

/// Guaranteed joint success probability for v rounds and a q-bit witness.
pub fn joint_bound(t: usize, v: usize, q: u32) -> f64 {
    2f64.powi(-(q as i32)) * per_round_bound(t).powi(v as i32)
}

/// One sampler round: the prefix index, the raw measurement, and the final
/// output after the not-in-Delta fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    /// Uniformly drawn prefix index in 0..t.
    pub j: usize,
    /// Measured value of the query register.
    pub measured: u64,
    /// Reported guess, never an element of Delta.
    pub output: u64,
    /// Whether the guess is a fresh element of S.
    pub hit: bool,
}

/// A full cumulative-sampler run.
#[derive(Debug, Clone)]
pub struct SampleTranscript {
    /// Guessed classical witness.
    pub witness: u64,
    /// Per-round records in order.
    pub rounds: Vec<RoundRecord>,
    /// Final substitute oracle contents (the accumulated outputs).
    pub delta: Vec<u64>,
}

impl SampleTranscript {
    /// True when every round produced a fresh element of S.
    pub fn success(&self) -> bool {
        !self.rounds.is_empty() && self.rounds.iter().all(|r| r.hit)
    }

    /// One-line text record: witness, then j:output[*] per round, where the
    /// star marks hits.
    pub fn text(&self) -> String {
        let rounds: Vec<String> = self
            .rounds
            .iter()
            .map(|r| format!("{}:{}{}", r.j, r.output, if r.hit { "*" } else { "" }))
            .collect();
        format!("w={} rounds=[{}]", self.witness, rounds.join(" "))
    }
}

/// Runs hybrid-argument rounds against a fixed program and instance, caching
/// prefix distributions so large Monte-Carlo trials stay cheap.
pub struct HybridSampler<'a> {
    program: &'a QueryProgram,
    s_oracle: PhaseOracle,
    u_oracle: PhaseOracle,
    s_distinct: HashSet<u64>,
    /// Stage indices of the S-query slots; prefix j stops right before the
    /// (j+1)-th of these.
    s_positions: Vec<usize>,
    /// The witness the program's controlled preparation reacts to; all other
    /// witness values share one cached distribution.
    witness_star: u64,
    cache: HashMap<(bool, usize, Vec<u64>), Vec<f64>>,
}

impl<'a> HybridSampler<'a> {
    /// Builds a sampler for `program` run against instance (S, U).
    pub fn new(program: &'a QueryProgram, s: &Multiset, u: &[u64], witness_star: u64) -> Result<Self> {
        let s_positions: Vec<usize> = program
            .stages
            .iter()
            .enumerate()
            .filter(|(_, st)| matches!(st, Stage::Query { slot: OracleSlot::S, .. }))
            .map(|(i, _)| i)
            .collect();
        if s_positions.is_empty() {
            return Err(Error::Parameter("the program has no S-query slots".into()));
        }
        let n = s.width();
        Ok(HybridSampler {
            program,
            s_oracle: PhaseOracle::from_multiset(s),
            u_oracle: PhaseOracle::from_set(n, u.iter().copied())?,
            s_distinct: s.distinct().into_iter().collect(),
            s_positions,
            witness_star,
            cache: HashMap::new(),
        })
    }

    /// Query count t.
    pub fn t(&self) -> usize {
        self.s_positions.len()
    }

    fn width(&self) -> u32 {
        self.s_oracle.width()
    }

    fn prefix_distribution(&mut self, w: u64, j: usize, delta: &[u64]) -> Result<&Vec<f64>> {
        let mut key_delta = delta.to_vec();
        key_delta.sort_unstable();
        key_delta.dedup();
        let key = (w == self.witness_star, j, key_delta);
        if !self.cache.contains_key(&key) {
            let oracles = ProgramOracles {
                s: self.s_oracle.clone(),
                u: self.u_oracle.clone(),
                delta: Some(PhaseOracle::from_set(self.width(), delta.iter().copied())?),
                replace_s: true,
            };
            let state = run_program_prefix(self.program, &oracles, w, self.s_positions[j])?;
            let dist = state.marginal_distribution(&self.program.query_targets)?;
            self.cache.insert(key.clone(), dist);
        }
        Ok(&self.cache[&key])
    }

    /// One round: uniform prefix, Delta-substituted run, query-register
    /// measurement, and the lexicographic fallback keeping the output
    /// outside Delta.
    pub fn round(&mut self, delta: &[u64], w: u64, rng: &mut impl Rng) -> Result<RoundRecord> {
        let j = rng.random_range(0..self.t());
        let dist = self.prefix_distribution(w, j, delta)?;
        let mut draw: f64 = rng.random();
        let mut measured = dist.len() as u64 - 1;
        for (x, &p) in dist.iter().enumerate() {
            if draw < p {
                measured = x as u64;
                break;
            }
            draw -= p;
        }
        let in_delta: HashSet<u64> = delta.iter().copied().collect();
        let output = if in_delta.contains(&measured) {
            (0..1u64 << self.width())
                .find(|x| !in_delta.contains(x))
                .ok_or_else(|| Error::Parameter("Delta covers the whole cube".into()))?
        } else {
            measured
        };
        let hit = self.s_distinct.contains(&output) && !in_delta.contains(&output);
        Ok(RoundRecord { j, measured, output, hit })
    }

    /// The cumulative sampler: a uniform q-bit witness guess, then v rounds
    /// with each output appended to Delta.
    pub fn transcript(&mut self, v: usize, seed: u64) -> Result<SampleTranscript> {
        let q = self.program.witness_bits;
        let mut w_rng = stream_rng(seed, labels::WITNESS);
        let witness = if q == 0 { 0 } else { w_rng.random_range(0..1u64 << q) };
        let mut rng = stream_rng(seed, labels::SAMPLER);
        let mut delta: Vec<u64> = Vec::new();
        let mut rounds = Vec::with_capacity(v);
        for _ in 0..v {
            let record = self.round(&delta, witness, &mut rng)?;
            delta.push(record.output);
            rounds.push(record);
        }
        Ok(SampleTranscript { witness, rounds, delta })
    }

    /// Monte-Carlo per-round hit frequency at a fixed witness and Delta.
    pub fn empirical_round_rate(
        &mut self,
        delta: &[u64],
        w: u64,
        trials: usize,
        seed: u64,
    ) -> Result<(usize, usize)> {
        let mut hits = 0;
        for i in 0..trials {
            let mut rng = stream_rng(seed, labels::TRIAL_BASE + i as u64);
            if self.round(delta, w, &mut rng)?.hit {
                hits += 1;
            }
        }
        Ok((hits, trials))
    }

    /// Monte-Carlo cumulative success frequency over independent transcripts.
    pub fn empirical_joint_rate(
        &mut self,
        v: usize,
        trials: usize,
        seed: u64,
    ) -> Result<(usize, usize)> {
        let mut successes = 0;
        for i in 0..trials {
            if self.transcript(v, seed.wrapping_add(labels::TRIAL_BASE + i as u64))?.success() {
                successes += 1;
            }
        }
        Ok((successes, trials))
    }
}

/// One-sided lower confidence bound on a binomial proportion (Wilson score;
/// z = 2.326 gives 99%).
pub fn wilson_lower(successes: usize, trials: usize, z: f64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = p + z2 / (2.0 * n);
    let margin = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - margin) / (1.0 + z2 / n)).max(0.0)
}

/// A toy distinguishing family: a good multiset at n = 10, ell = 16 with its
/// strong U, and a t-query verifier-shaped program whose controlled
/// preparation loads the top Forrelation witness.
#[derive(Debug, Clone)]
pub struct ToyFamily {
    /// The (S, U) instance.
    pub instance: Instance,
    /// Verifier-shaped program with t S-query slots.
    pub program: QueryProgram,
    /// Witness value that triggers the quantum preparation.
    pub witness_star: u64,
    /// Spectral Forrelation of the instance.
    pub alpha: f64,
    /// Accept probability on the starred witness with the true oracles.
    pub completeness: f64,
    /// Worst accept probability over witness classes when S is replaced by
    /// the empty substitute.
    pub soundness: f64,
}

/// Builds a verifier-shaped program: controlled witness preparation, the
/// two-ancilla Forrelation test, and t - 1 padding S-slots controlled on an
/// idle qubit so the program has exactly t S-queries.
pub fn verifier_program(
    n: u32,
    q: u32,
    t: usize,
    witness_star: u64,
    witness_amps: Vec<Complex64>,
) -> Result<QueryProgram> {
    if t == 0 {
        return Err(Error::Parameter("the program needs at least one S-query".into()));
    }
    if q == 0 || witness_star >= (1u64 << q) {
        return Err(Error::Parameter("witness star must fit in q >= 1 bits".into()));
    }
    let wit: Vec<usize> = (0..n as usize).collect();
    let anc1 = n as usize;
    let anc2 = n as usize + 1;
    let pad = n as usize + 2;
    let work_qubits = if t > 1 { n + 3 } else { n + 2 };
    let mut preps = BTreeMap::new();
    preps.insert(witness_star, witness_amps);
    let mut stages = vec![
        Stage::ControlledPrep { targets: wit.clone(), preps },
        Stage::Fwht { targets: vec![anc1, anc2] },
        Stage::Query { slot: OracleSlot::S, ctrl: anc1, targets: wit.clone() },
    ];
    for _ in 1..t {
        stages.push(Stage::Query { slot: OracleSlot::S, ctrl: pad, targets: wit.clone() });
    }
    stages.push(Stage::Fwht { targets: vec![anc1] });
    stages.push(Stage::Fwht { targets: wit.clone() });
    stages.push(Stage::Query { slot: OracleSlot::U, ctrl: anc2, targets: wit.clone() });
    stages.push(Stage::Fwht { targets: vec![anc2] });
    Ok(QueryProgram { witness_bits: q, work_qubits, query_targets: wit, stages })
}

/// Accept probability of a verifier-shaped program: both ancillas measured 1.
pub fn program_accept_prob(
    program: &QueryProgram,
    oracles: &ProgramOracles,
    w: u64,
) -> Result<f64> {
    let n = program.query_targets.len();
    let state = run_program(program, oracles, w)?;
    state.prob_of(&[n, n + 1], 0b11)
}

/// Samples toy instances until one satisfies completeness >= 2/3 and
/// empty-substitute soundness <= 1/3, trying up to 64 seeds from `seed`.
///
/// Fixed family shape: n = 10, ell = 16, kappa = 0.25 (smaller kappa leaves
/// the spectral Forrelation below the 2/3 completeness floor).
pub fn toy_family(t: usize, q: u32, seed: u64) -> Result<ToyFamily> {
    let (n, kappa) = (10u32, 0.25f64);
    for attempt in seed..seed + 64 {
        let s = good_multiset(n, 4, attempt)?;
        let instance = sample_u_given_s(s, kappa, attempt)?;
        let (alpha, witness) = spectral_forrelation(&instance)?;
        if alpha < 2.0 / 3.0 {
            continue;
        }
        let amps: Vec<Complex64> = witness.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let witness_star = 1u64;
        let program = verifier_program(n, q, t, witness_star, amps)?;

        let true_oracles = ProgramOracles::pair(
            PhaseOracle::from_multiset(instance.s()),
            PhaseOracle::from_set(n, instance.u().iter().copied())?,
        );
        let completeness = program_accept_prob(&program, &true_oracles, witness_star)?;
        if completeness < 2.0 / 3.0 {
            continue;
        }
        let empty_oracles = ProgramOracles {
            delta: Some(PhaseOracle::empty(n)),
            replace_s: true,
            ..true_oracles
        };
        // Classical witnesses fall in two classes: the starred value and
        // everything else (identity preparation), so two runs cover all.
        let other = witness_star ^ 1;
        let soundness = program_accept_prob(&program, &empty_oracles, witness_star)?
            .max(program_accept_prob(&program, &empty_oracles, other)?);
        if soundness > 1.0 / 3.0 {
            continue;
        }
        return Ok(ToyFamily { instance, program, witness_star, alpha, completeness, soundness });
    }
    Err(Error::Parameter(format!("no toy instance found in 64 seeds from {seed}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::qma_verifier_accept_prob;

    fn small_family() -> ToyFamily {
        // A hand-rolled small analogue of the toy family for cheap tests:
        // n = 4, the multiset is an explicit good set.
        let n = 4u32;
        let s = Multiset::new(n, vec![1, 2, 4, 8, 15]).unwrap();
        let instance = sample_u_given_s(s, 0.6, 11).unwrap();
        let (alpha, witness) = spectral_forrelation(&instance).unwrap();
        let amps: Vec<Complex64> = witness.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let program = verifier_program(n, 2, 2, 1, amps).unwrap();
        let true_oracles = ProgramOracles::pair(
            PhaseOracle::from_multiset(instance.s()),
            PhaseOracle::from_set(n, instance.u().iter().copied()).unwrap(),
        );
        let completeness = program_accept_prob(&program, &true_oracles, 1).unwrap();
        assert!((completeness - alpha).abs() < 1e-9);
        ToyFamily {
            instance,
            program,
            witness_star: 1,
            alpha,
            completeness,
            soundness: 0.0,
        }
    }

    #[test]
    fn verifier_program_matches_direct_verifier() {
        let fam = small_family();
        let direct: Vec<Complex64> = match &fam.program.stages[0] {
            Stage::ControlledPrep { preps, .. } => preps[&1].clone(),
            _ => unreachable!(),
        };
        let p = qma_verifier_accept_prob(&fam.instance, &direct).unwrap();
        assert!((p - fam.completeness).abs() < 1e-9);
    }

    #[test]
    fn empty_substitute_never_accepts() {
        let fam = small_family();
        let oracles = ProgramOracles {
            s: PhaseOracle::from_multiset(fam.instance.s()),
            u: PhaseOracle::from_set(4, fam.instance.u().iter().copied()).unwrap(),
            delta: Some(PhaseOracle::empty(4)),
            replace_s: true,
        };
        for w in [fam.witness_star, 0] {
            let p = program_accept_prob(&fam.program, &oracles, w).unwrap();
            assert!(p < 1e-12, "w={w}: {p}");
        }
    }

    #[test]
    fn delta_equal_s_reproduces_the_true_run() {
        let fam = small_family();
        let s = fam.instance.s().clone();
        let u: Vec<u64> = fam.instance.u().to_vec();
        let true_oracles = ProgramOracles::pair(
            PhaseOracle::from_multiset(&s),
            PhaseOracle::from_set(4, u.iter().copied()).unwrap(),
        );
        let subst = ProgramOracles {
            delta: Some(PhaseOracle::from_set(4, s.distinct()).unwrap()),
            replace_s: true,
            ..true_oracles.clone()
        };
        for limit in 0..=fam.program.stages.len() {
            let a = run_program_prefix(&fam.program, &true_oracles, 1, limit).unwrap();
            let b = run_program_prefix(&fam.program, &subst, 1, limit).unwrap();
            let da = a.marginal_distribution(&fam.program.query_targets).unwrap();
            let db = b.marginal_distribution(&fam.program.query_targets).unwrap();
            let tv: f64 = da.iter().zip(&db).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
            assert!(tv < 1e-9, "limit {limit}: tv {tv}");
        }
    }

    #[test]
    fn round_output_never_lands_in_delta() {
        let fam = small_family();
        let mut sampler =
            HybridSampler::new(&fam.program, fam.instance.s(), fam.instance.u(), 1).unwrap();
        let delta: Vec<u64> = fam.instance.s().distinct();
        let mut rng = stream_rng(3, labels::SAMPLER);
        for _ in 0..50 {
            let rec = sampler.round(&delta, 1, &mut rng).unwrap();
            assert!(!delta.contains(&rec.output));
            assert!(!rec.hit || sampler.s_distinct.contains(&rec.output));
        }
    }

    #[test]
    fn starred_witness_round_hits_with_high_rate() {
        // The top witness is supported on S, so the j = 0 prefix measurement
        // lands in S essentially always.
        let fam = small_family();
        let mut sampler =
            HybridSampler::new(&fam.program, fam.instance.s(), fam.instance.u(), 1).unwrap();
        let (hits, trials) = sampler.empirical_round_rate(&[], 1, 400, 7).unwrap();
        let lower = wilson_lower(hits, trials, 2.326);
        assert!(lower >= per_round_bound(sampler.t()), "lower {lower}");
    }

    #[test]
    fn cumulative_success_beats_the_joint_bound() {
        let fam = small_family();
        let mut sampler =
            HybridSampler::new(&fam.program, fam.instance.s(), fam.instance.u(), 1).unwrap();
        for v in 1..=3usize {
            let (succ, trials) = sampler.empirical_joint_rate(v, 400, 13).unwrap();
            let lower = wilson_lower(succ, trials, 2.326);
            let bound = joint_bound(sampler.t(), v, fam.program.witness_bits);
            assert!(lower >= bound, "v={v}: lower {lower} < bound {bound}");
        }
    }

    #[test]
    fn transcripts_are_reproducible() {
        let fam = small_family();
        let mut sampler =
            HybridSampler::new(&fam.program, fam.instance.s(), fam.instance.u(), 1).unwrap();
        let a = sampler.transcript(3, 21).unwrap();
        let b = sampler.transcript(3, 21).unwrap();
        assert_eq!(a.witness, b.witness);
        assert_eq!(a.rounds, b.rounds);
        assert!(!a.text().is_empty());
    }

    #[test]
    fn wilson_lower_examples() {
        assert_eq!(wilson_lower(0, 0, 2.326), 0.0);
        assert!(wilson_lower(100, 100, 2.326) > 0.94);
        assert!(wilson_lower(50, 100, 2.326) < 0.5);
        assert!(wilson_lower(50, 100, 2.326) > 0.37);
    }

    #[test]
    fn toy_family_satisfies_its_hypotheses() {
        let fam = toy_family(2, 3, 1).unwrap();
        assert!(fam.completeness >= 2.0 / 3.0);
        assert!(fam.soundness <= 1.0 / 3.0);
        assert_eq!(fam.program.s_query_count(), 2);
        assert!((fam.completeness - fam.alpha).abs() < 1e-9);
    }

    #[test]
    fn toy_family_per_round_rate_clears_the_bound() {
        let fam = toy_family(2, 3, 1).unwrap();
        let mut sampler =
            HybridSampler::new(&fam.program, fam.instance.s(), fam.instance.u(), fam.witness_star)
                .unwrap();
        let (hits, trials) = sampler.empirical_round_rate(&[], fam.witness_star, 2000, 5).unwrap();
        let lower = wilson_lower(hits, trials, 2.326);
        assert!(lower >= per_round_bound(2), "lower {lower}");
    }
}
