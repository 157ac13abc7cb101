//! Dense statevector simulation of query circuits with phase oracles, and
//! the two-ancilla spectral-Forrelation verifier.
//!
//! Qubit i is bit i of the amplitude index. Registers are capped at 24
//! qubits; everything is simulated as an explicit complex vector.

use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::Multiset;
use crate::instances::Instance;

/// Hard cap on simulated register width.
pub const MAX_QUBITS: u32 = 24;

/// Membership phase oracle: (b, x) -> (-1)^{b * member(x)} (b, x).
#[derive(Debug, Clone)]
pub struct PhaseOracle {
    n: u32,
    members: HashSet<u64>,
}

impl PhaseOracle {
    /// Oracle for an explicit set of n-bit strings.
    pub fn from_set<I: IntoIterator<Item = u64>>(n: u32, members: I) -> Result<Self> {
        let members: HashSet<u64> = members.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&x| x >= (1u64 << n)) {
            return Err(Error::Parameter(format!("oracle member {bad} out of range")));
        }
        Ok(Self { n, members })
    }

    /// Oracle for the distinct elements of a multiset.
    pub fn from_multiset(s: &Multiset) -> Self {
        Self { n: s.width(), members: s.distinct().into_iter().collect() }
    }

    /// The empty oracle (identity action).
    pub fn empty(n: u32) -> Self {
        Self { n, members: HashSet::new() }
    }

    /// The full-set oracle (global phase on the b=1 branch).
    pub fn full(n: u32) -> Self {
        Self { n, members: (0..1u64 << n).collect() }
    }

    /// Input width n.
    pub fn width(&self) -> u32 {
        self.n
    }

    /// Membership predicate.
    pub fn contains(&self, x: u64) -> bool {
        self.members.contains(&x)
    }
}

/// A dense statevector over m labeled qubits.
#[derive(Debug, Clone)]
pub struct StateVector {
    n_qubits: u32,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The all-zeros basis state.
    pub fn zero(n_qubits: u32) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// A computational basis state.
    pub fn basis(n_qubits: u32, index: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Parameter(format!(
                "register of {n_qubits} qubits outside 1..={MAX_QUBITS}"
            )));
        }
        let dim = 1usize << n_qubits;
        if index as usize >= dim {
            return Err(Error::Parameter(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::ZERO; dim];
        amps[index as usize] = Complex64::ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes (length must be a power of two, <= 2^24).
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() || dim < 2 || dim > (1 << MAX_QUBITS) {
            return Err(Error::Dimension(format!("amplitude vector length {dim}")));
        }
        Ok(Self { n_qubits: dim.trailing_zeros(), amps })
    }

    /// Register width.
    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    /// Raw amplitudes, basis index bit i = qubit i.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// 2-norm of the state.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        let mut seen = 0u32;
        for &t in targets {
            if t >= self.n_qubits as usize {
                return Err(Error::Dimension(format!("qubit {t} outside register")));
            }
            if seen & (1 << t) != 0 {
                return Err(Error::Dimension(format!("qubit {t} repeated in targets")));
            }
            seen |= 1 << t;
        }
        Ok(())
    }

    /// Applies a single-qubit gate given as a row-major 2x2 matrix.
    pub fn apply_single(&mut self, qubit: usize, m: &[[Complex64; 2]; 2]) -> Result<()> {
        self.check_targets(&[qubit])?;
        let bit = 1usize << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
        Ok(())
    }

    /// Hadamard on one qubit.
    pub fn hadamard(&mut self, qubit: usize) -> Result<()> {
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        self.apply_single(qubit, &[[r, r], [r, -r]])
    }

    /// H^{tensor k} over the listed qubits.
    pub fn fwht(&mut self, targets: &[usize]) -> Result<()> {
        for &t in targets {
            self.hadamard(t)?;
        }
        Ok(())
    }

    /// Applies a dense unitary on `targets` (bit i of the matrix index is
    /// targets[i]).
    pub fn apply_unitary(&mut self, targets: &[usize], m: &DMatrix<Complex64>) -> Result<()> {
        self.check_targets(targets)?;
        let k = targets.len();
        let sub = 1usize << k;
        if m.nrows() != sub || m.ncols() != sub {
            return Err(Error::Dimension(format!(
                "matrix is {}x{} but targets span dimension {sub}",
                m.nrows(),
                m.ncols()
            )));
        }
        let target_mask: usize = targets.iter().map(|&t| 1usize << t).sum();
        let mut gathered = vec![Complex64::ZERO; sub];
        // Iterate over assignments of the non-target qubits.
        let mut outer = 0usize;
        loop {
            for (g, slot) in gathered.iter_mut().enumerate() {
                *slot = self.amps[outer | spread(g, targets)];
            }
            for row in 0..sub {
                let mut acc = Complex64::ZERO;
                for (col, &gval) in gathered.iter().enumerate() {
                    acc += m[(row, col)] * gval;
                }
                self.amps[outer | spread(row, targets)] = acc;
            }
            // Advance `outer` to the next index with all target bits clear.
            outer = (outer | target_mask) + 1;
            if outer >= self.amps.len() {
                break;
            }
            outer &= !target_mask;
        }
        Ok(())
    }

    /// Controlled phase query: flips the sign of amplitudes whose control
    /// qubit is 1 and whose target value lies in the oracle.
    pub fn apply_phase_oracle(
        &mut self,
        oracle: &PhaseOracle,
        ctrl: usize,
        targets: &[usize],
    ) -> Result<()> {
        self.check_targets(targets)?;
        self.check_targets(&[ctrl])?;
        if targets.contains(&ctrl) {
            return Err(Error::Dimension("control overlaps targets".into()));
        }
        if targets.len() != oracle.width() as usize {
            return Err(Error::Dimension(format!(
                "oracle width {} but {} target qubits",
                oracle.width(),
                targets.len()
            )));
        }
        let ctrl_bit = 1usize << ctrl;
        for i in 0..self.amps.len() {
            if i & ctrl_bit != 0 && oracle.contains(extract(i, targets)) {
                self.amps[i] = -self.amps[i];
            }
        }
        Ok(())
    }

    /// Probability distribution of a measurement of the listed qubits.
    pub fn marginal_distribution(&self, targets: &[usize]) -> Result<Vec<f64>> {
        self.check_targets(targets)?;
        let mut probs = vec![0.0; 1 << targets.len()];
        for (i, a) in self.amps.iter().enumerate() {
            probs[extract(i, targets) as usize] += a.norm_sqr();
        }
        Ok(probs)
    }

    /// Probability that the listed qubits read `value`.
    pub fn prob_of(&self, targets: &[usize], value: u64) -> Result<f64> {
        Ok(self.marginal_distribution(targets)?[value as usize])
    }

    /// Samples a measurement outcome of the listed qubits.
    pub fn measure(&self, targets: &[usize], rng: &mut impl Rng) -> Result<u64> {
        let probs = self.marginal_distribution(targets)?;
        let mut draw: f64 = rng.random();
        for (x, &p) in probs.iter().enumerate() {
            draw -= p;
            if draw < 0.0 {
                return Ok(x as u64);
            }
        }
        Ok(probs.len() as u64 - 1)
    }
}

/// Spreads the k-bit value `compact` onto the qubit positions in `targets`.
fn spread(compact: usize, targets: &[usize]) -> usize {
    let mut out = 0usize;
    for (i, &t) in targets.iter().enumerate() {
        out |= ((compact >> i) & 1) << t;
    }
    out
}

/// Extracts the qubits in `targets` from a basis index as a compact value.
fn extract(index: usize, targets: &[usize]) -> u64 {
    let mut out = 0u64;
    for (i, &t) in targets.iter().enumerate() {
        out |= (((index >> t) & 1) as u64) << i;
    }
    out
}

/// Simulates the two-ancilla verifier and returns P[both ancillas read 1].
///
/// Layout: qubits 0..n hold the witness, qubit n and n+1 are the ancillas.
/// The circuit is H on each ancilla, an S-phase query controlled by the
/// first, H^{tensor n} on the witness, a U-phase query controlled by the
/// second, H on each ancilla again, then measurement of both.
pub fn qma_verifier_accept_prob(inst: &Instance, witness: &[Complex64]) -> Result<f64> {
    let n = inst.n();
    let dim = 1usize << n;
    if witness.len() != dim {
        return Err(Error::Dimension(format!(
            "witness has {} amplitudes, expected {dim}",
            witness.len()
        )));
    }
    let wnorm: f64 = witness.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (wnorm - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("witness norm {wnorm} is not 1")));
    }
    let total = n + 2;
    let anc1 = n as usize;
    let anc2 = n as usize + 1;
    let wit: Vec<usize> = (0..n as usize).collect();

    let mut amps = vec![Complex64::ZERO; 1 << total];
    amps[..dim].copy_from_slice(witness);
    let mut state = StateVector::from_amplitudes(amps)?;

    let s_oracle = PhaseOracle::from_multiset(inst.s());
    let u_oracle = PhaseOracle::from_set(n, inst.u().iter().copied())?;

    state.hadamard(anc1)?;
    state.hadamard(anc2)?;
    state.apply_phase_oracle(&s_oracle, anc1, &wit)?;
    state.hadamard(anc1)?;
    state.fwht(&wit)?;
    state.apply_phase_oracle(&u_oracle, anc2, &wit)?;
    state.hadamard(anc2)?;
    state.prob_of(&[anc1, anc2], 0b11)
}

/// Which oracle a query stage addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleSlot {
    /// The standard-basis membership oracle for S.
    S,
    /// The Hadamard-side membership oracle for U.
    U,
    /// The substitute oracle used by the hybrid argument.
    Delta,
}

/// One step of a query program.
#[derive(Debug, Clone)]
pub enum Stage {
    /// Dense unitary on the listed qubits.
    Unitary {
        /// Qubits the matrix acts on; bit i of the matrix index is targets[i].
        targets: Vec<usize>,
        /// Row-major unitary of dimension 2^{targets.len()}.
        matrix: DMatrix<Complex64>,
    },
    /// Hadamard on every listed qubit.
    Fwht {
        /// Qubits to transform.
        targets: Vec<usize>,
    },
    /// Controlled phase query against one of the oracles.
    Query {
        /// Oracle slot resolved at run time.
        slot: OracleSlot,
        /// Control qubit.
        ctrl: usize,
        /// Queried register.
        targets: Vec<usize>,
    },
    /// Witness-conditioned state preparation: when the classical witness
    /// equals a key of `preps`, replaces |0..0> on `targets` with the stored
    /// amplitudes (the input state must have those qubits in |0..0>); for
    /// other witness values it is the identity.
    ControlledPrep {
        /// Qubits to prepare.
        targets: Vec<usize>,
        /// Witness value -> normalized amplitude vector of length 2^{targets.len()}.
        preps: BTreeMap<u64, Vec<Complex64>>,
    },
}

/// An alternating unitary / oracle-query program with a classical witness.
#[derive(Debug, Clone)]
pub struct QueryProgram {
    /// Classical witness length in bits.
    pub witness_bits: u32,
    /// Width of the simulated quantum register.
    pub work_qubits: u32,
    /// The register whose measurement the hybrid sampler reports; must be
    /// the target register of every S-query.
    pub query_targets: Vec<usize>,
    /// Program steps in order.
    pub stages: Vec<Stage>,
}

impl QueryProgram {
    /// Number of S-query slots.
    pub fn s_query_count(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| matches!(s, Stage::Query { slot: OracleSlot::S, .. }))
            .count()
    }
}

/// The oracles a program runs against. `delta` backs the Delta slot and,
/// when `replace_s` is set, also substitutes for every S slot (the hybrid
/// argument's oracle swap).
#[derive(Debug, Clone)]
pub struct ProgramOracles {
    /// S-membership oracle.
    pub s: PhaseOracle,
    /// U-membership oracle.
    pub u: PhaseOracle,
    /// Delta-membership oracle.
    pub delta: Option<PhaseOracle>,
    /// Substitute Delta for S everywhere.
    pub replace_s: bool,
}

impl ProgramOracles {
    /// Plain (S, U) oracles with no substitution.
    pub fn pair(s: PhaseOracle, u: PhaseOracle) -> Self {
        Self { s, u, delta: None, replace_s: false }
    }

    fn resolve(&self, slot: OracleSlot) -> Result<&PhaseOracle> {
        match slot {
            OracleSlot::S if self.replace_s => self
                .delta
                .as_ref()
                .ok_or_else(|| Error::Parameter("S-substitution requires a Delta oracle".into())),
            OracleSlot::S => Ok(&self.s),
            OracleSlot::U => Ok(&self.u),
            OracleSlot::Delta => self
                .delta
                .as_ref()
                .ok_or_else(|| Error::Parameter("program queries Delta but none given".into())),
        }
    }
}

/// Runs `program` on witness `w`, returning the pre-measurement state.
///
/// `stage_limit` truncates the program after that many stages (used by the
/// hybrid sampler's prefix runs); pass `program.stages.len()` for the whole
/// program. Every stage must preserve the norm to 1e-9.
pub fn run_program_prefix(
    program: &QueryProgram,
    oracles: &ProgramOracles,
    w: u64,
    stage_limit: usize,
) -> Result<StateVector> {
    if program.witness_bits > 0 && w >= (1u64 << program.witness_bits) {
        return Err(Error::Parameter(format!("witness {w} exceeds declared width")));
    }
    let mut state = StateVector::zero(program.work_qubits)?;
    for stage in program.stages.iter().take(stage_limit) {
        match stage {
            Stage::Unitary { targets, matrix } => state.apply_unitary(targets, matrix)?,
            Stage::Fwht { targets } => state.fwht(targets)?,
            Stage::Query { slot, ctrl, targets } => {
                state.apply_phase_oracle(oracles.resolve(*slot)?, *ctrl, targets)?
            }
            Stage::ControlledPrep { targets, preps } => {
                apply_controlled_prep(&mut state, targets, preps, w)?
            }
        }
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("stage broke normalization: norm {norm}")));
        }
    }
    Ok(state)
}

/// Runs the whole program. Mirrors the external run signature: a program,
/// its (S, U) oracles, and a classical witness bit string.
pub fn run_program(
    program: &QueryProgram,
    oracles: &ProgramOracles,
    w: u64,
) -> Result<StateVector> {
    run_program_prefix(program, oracles, w, program.stages.len())
}

fn apply_controlled_prep(
    state: &mut StateVector,
    targets: &[usize],
    preps: &BTreeMap<u64, Vec<Complex64>>,
    w: u64,
) -> Result<()> {
    let Some(prep) = preps.get(&w) else {
        return Ok(());
    };
    let sub = 1usize << targets.len();
    if prep.len() != sub {
        return Err(Error::Dimension(format!(
            "prep vector has {} amplitudes for {} targets",
            prep.len(),
            targets.len()
        )));
    }
    // Verify the targets are in |0..0>, then write the prepared amplitudes.
    let amps = state.amplitudes().to_vec();
    let mut out = vec![Complex64::ZERO; amps.len()];
    for (i, a) in amps.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        if extract(i, targets) != 0 {
            return Err(Error::Parameter(
                "controlled prep applied to a state with occupied targets".into(),
            ));
        }
        for (g, p) in prep.iter().enumerate() {
            out[i | spread(g, targets)] += *a * *p;
        }
    }
    *state = StateVector::from_amplitudes(out)?;
    Ok(())
}

/// Draws a Haar-ish random unitary as the Q factor of a complex Gaussian
/// matrix (adequate for generating generic test programs).
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    use rand_distr::StandardNormal;
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    qr.q()
}

/// Canonical text form of a program stage (external interface).
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StageRecord {
    Unitary { unitary: Vec<Vec<(f64, f64)>>, targets: Vec<usize> },
    Query { query: String, ctrl: usize, targets: Vec<usize> },
}

#[derive(Serialize, Deserialize)]
struct ProgramRecord {
    witness_bits: u32,
    work_qubits: u32,
    query_targets: Vec<usize>,
    stages: Vec<StageRecord>,
}

/// Serializes a program to its canonical text record. Hadamard stages are
/// lowered to explicit unitaries; witness-conditioned preparations have no
/// text form and are rejected.
pub fn serialize_program(program: &QueryProgram) -> Result<String> {
    let mut stages = Vec::new();
    for stage in &program.stages {
        match stage {
            Stage::Unitary { targets, matrix } => {
                stages.push(StageRecord::Unitary {
                    unitary: matrix_to_rows(matrix),
                    targets: targets.clone(),
                });
            }
            Stage::Fwht { targets } => {
                if targets.len() > 12 {
                    return Err(Error::CapExceeded(
                        "refusing to expand a Hadamard layer over more than 12 qubits".into(),
                    ));
                }
                let dim = 1usize << targets.len();
                let scale = 1.0 / (dim as f64).sqrt();
                let m = DMatrix::from_fn(dim, dim, |i, j| {
                    Complex64::new(crate::hypercube::sign(i as u64, j as u64) * scale, 0.0)
                });
                stages.push(StageRecord::Unitary {
                    unitary: matrix_to_rows(&m),
                    targets: targets.clone(),
                });
            }
            Stage::Query { slot, ctrl, targets } => {
                let name = match slot {
                    OracleSlot::S => "S",
                    OracleSlot::U => "U",
                    OracleSlot::Delta => "Delta",
                };
                stages.push(StageRecord::Query {
                    query: name.to_string(),
                    ctrl: *ctrl,
                    targets: targets.clone(),
                });
            }
            Stage::ControlledPrep { .. } => {
                return Err(Error::Parameter(
                    "witness-conditioned preparations have no canonical text form".into(),
                ));
            }
        }
    }
    let record = ProgramRecord {
        witness_bits: program.witness_bits,
        work_qubits: program.work_qubits,
        query_targets: program.query_targets.clone(),
        stages,
    };
    serde_json::to_string_pretty(&record).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses the canonical program record.
pub fn parse_program(text: &str) -> Result<QueryProgram> {
    let record: ProgramRecord =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("program record: {e}")))?;
    let mut stages = Vec::new();
    for stage in record.stages {
        match stage {
            StageRecord::Unitary { unitary, targets } => {
                let dim = 1usize << targets.len();
                if unitary.len() != dim || unitary.iter().any(|row| row.len() != dim) {
                    return Err(Error::Parse(format!(
                        "unitary stage is not {dim}x{dim} for {} targets",
                        targets.len()
                    )));
                }
                let matrix = DMatrix::from_fn(dim, dim, |i, j| {
                    Complex64::new(unitary[i][j].0, unitary[i][j].1)
                });
                stages.push(Stage::Unitary { targets, matrix });
            }
            StageRecord::Query { query, ctrl, targets } => {
                let slot = match query.as_str() {
                    "S" => OracleSlot::S,
                    "U" => OracleSlot::U,
                    "Delta" => OracleSlot::Delta,
                    other => return Err(Error::Parse(format!("unknown oracle slot {other:?}"))),
                };
                stages.push(Stage::Query { slot, ctrl, targets });
            }
        }
    }
    Ok(QueryProgram {
        witness_bits: record.witness_bits,
        work_qubits: record.work_qubits,
        query_targets: record.query_targets,
        stages,
    })
}

fn matrix_to_rows(m: &DMatrix<Complex64>) -> Vec<Vec<(f64, f64)>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect())
        .collect()
}
