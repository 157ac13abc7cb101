//! The Strong instance distribution, spectral Forrelation, and the exact
//! expectation matrices M^{S,U}, M^S, A^S, B^S with their PSD sandwich.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercube::{fwht, gamma_spectrum, Multiset};
use crate::linalg;
use crate::rng::{labels, stream_rng};

/// Parameters of one draw from the Strong distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongParams {
    /// Bit width n.
    pub n: u32,
    /// Multiset size ell.
    pub ell: usize,
    /// Coupling constant kappa in [0, 1]; 1/10 matches the headline choice.
    pub kappa: f64,
    /// Seed addressing the deterministic sampling streams.
    pub seed: u64,
}

impl StrongParams {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 24 {
            return Err(Error::Parameter(format!("n = {} outside 1..=24", self.n)));
        }
        if self.ell == 0 {
            return Err(Error::Parameter("ell must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::Parameter(format!("kappa = {} outside [0,1]", self.kappa)));
        }
        Ok(())
    }
}

/// How an instance came to be.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Drawn from the Strong distribution with the recorded parameters.
    Strong,
    /// Supplied by hand; no distributional invariants assumed.
    Manual,
}

/// A pair (S, U): a multiset S of n-bit strings and a set U of n-bit strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n: u32,
    s: Multiset,
    u: Vec<u64>,
    sampling: Sampling,
    params: StrongParams,
}

impl Instance {
    /// Builds a manual instance. U is deduplicated and sorted.
    pub fn manual(n: u32, s: Multiset, mut u: Vec<u64>) -> Result<Self> {
        if s.width() != n {
            return Err(Error::Dimension("S width differs from instance width".into()));
        }
        if let Some(&bad) = u.iter().find(|&&y| y >= (1u64 << n)) {
            return Err(Error::Parameter(format!("U element {bad} needs more than {n} bits")));
        }
        u.sort_unstable();
        u.dedup();
        let params = StrongParams { n, ell: s.ell(), kappa: 0.0, seed: 0 };
        Ok(Self { n, s, u, sampling: Sampling::Manual, params })
    }

    /// Bit width n.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// The multiset S.
    pub fn s(&self) -> &Multiset {
        &self.s
    }

    /// The set U, sorted and duplicate-free. Never contains 0^n when the
    /// instance was sampled from Strong.
    pub fn u(&self) -> &[u64] {
        &self.u
    }

    /// Membership test for U.
    pub fn u_contains(&self, y: u64) -> bool {
        self.u.binary_search(&y).is_ok()
    }

    /// Provenance marker.
    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    /// Generation parameters (kappa and seed are 0 for manual instances).
    pub fn params(&self) -> &StrongParams {
        &self.params
    }
}

/// Probability that a mode with spectrum value `gamma` joins U.
pub fn membership_probability(kappa: f64, gamma: f64) -> f64 {
    1.0 - 0.5 * (-kappa * gamma).exp()
}

/// Samples an instance from the Strong distribution.
///
/// S is ell i.i.d. uniform draws with replacement; each y != 0^n joins U
/// independently with probability 1 - e^{-kappa gamma_y}/2, and 0^n is never
/// added. The per-y uniform draws come from a kappa-independent stream in
/// fixed y order, so raising kappa can only ever add elements to U.
pub fn sample_strong(params: &StrongParams) -> Result<Instance> {
    params.validate()?;
    let size = 1u64 << params.n;
    let mut s_rng = stream_rng(params.seed, labels::SAMPLE_S);
    let mut elements: Vec<u64> = (0..params.ell).map(|_| s_rng.random_range(0..size)).collect();
    elements.sort_unstable();
    let s = Multiset::new(params.n, elements)?;
    sample_u_given_s(s, params.kappa, params.seed)
}

/// Samples only the U half of the Strong rule, conditioned on a given S.
///
/// This covers settings where S is constructed (e.g. a certified good
/// multiset) but U should still follow its conditional distribution.
pub fn sample_u_given_s(s: Multiset, kappa: f64, seed: u64) -> Result<Instance> {
    let n = s.width();
    let params = StrongParams { n, ell: s.ell(), kappa, seed };
    params.validate()?;
    let gamma = gamma_spectrum(&s)?;
    let mut u_rng = stream_rng(seed, labels::SAMPLE_U);
    let mut u = Vec::new();
    for y in 1..1u64 << n {
        let draw: f64 = u_rng.random();
        if draw < membership_probability(kappa, gamma.at(y)) {
            u.push(y);
        }
    }
    Ok(Instance { n, s, u, sampling: Sampling::Strong, params })
}

/// The four matrices of the strong-instance analysis, indexed by the
/// distinct elements of S (for good S this is the full ell x ell family).
#[derive(Debug, Clone)]
pub struct ForrelationMatrices {
    /// Distinct elements of S, in increasing order; the common row index.
    pub support: Vec<u64>,
    /// Multiplicity of each support element in S.
    pub multiplicities: Vec<u64>,
    /// The submatrix of H Pi_U H on the support: the instance matrix M^{S,U}.
    pub m_su: DMatrix<f64>,
    /// Its expectation over U given S: diagonal 1 - e^{-kappa gamma_y}/2
    /// conjugated by the Hadamard transform, restricted to the support.
    pub m_s: DMatrix<f64>,
    /// Quadratic lower surrogate: diagonal 1/2 + (kappa/2) gamma - (kappa^2/4) gamma^2.
    pub a_s: DMatrix<f64>,
    /// Linear upper surrogate: diagonal 1/2 + (kappa/2) gamma.
    pub b_s: DMatrix<f64>,
}

/// Restriction of a Hadamard-conjugated diagonal to a support set.
///
/// For diagonal d the full matrix has entries (1/2^n) sum_y (-1)^{(x^x').y} d_y,
/// a function of x^x' alone; one unnormalized WHT gives that function.
fn conjugated_submatrix(diag: &[f64], support: &[u64]) -> Result<DMatrix<f64>> {
    let size = diag.len() as f64;
    let mut profile = diag.to_vec();
    fwht(&mut profile, false)?;
    for v in profile.iter_mut() {
        *v /= size;
    }
    let d = support.len();
    Ok(DMatrix::from_fn(d, d, |i, j| profile[(support[i] ^ support[j]) as usize]))
}

/// Builds M^{S,U}, M^S, A^S, B^S for the given instance and kappa.
pub fn forrelation_matrices(inst: &Instance, kappa: f64) -> Result<ForrelationMatrices> {
    if inst.s().ell() == 0 {
        return Err(Error::Parameter("S is empty".into()));
    }
    let size = 1usize << inst.n();
    let support = inst.s().distinct();
    let counts = inst.s().counts();
    let multiplicities: Vec<u64> = support.iter().map(|&x| counts[x as usize]).collect();

    let mut u_indicator = vec![0.0; size];
    for &y in inst.u() {
        u_indicator[y as usize] = 1.0;
    }
    let gamma = gamma_spectrum(inst.s())?;
    let m_s_diag: Vec<f64> =
        gamma.values().iter().map(|&g| membership_probability(kappa, g)).collect();
    let a_diag: Vec<f64> = gamma
        .values()
        .iter()
        .map(|&g| 0.5 + 0.5 * kappa * g - 0.25 * kappa * kappa * g * g)
        .collect();
    let b_diag: Vec<f64> = gamma.values().iter().map(|&g| 0.5 + 0.5 * kappa * g).collect();

    Ok(ForrelationMatrices {
        m_su: conjugated_submatrix(&u_indicator, &support)?,
        m_s: conjugated_submatrix(&m_s_diag, &support)?,
        a_s: conjugated_submatrix(&a_diag, &support)?,
        b_s: conjugated_submatrix(&b_diag, &support)?,
        support,
        multiplicities,
    })
}

/// Spectral Forrelation alpha = ||Pi_U H Pi_S||^2 and the optimal witness.
///
/// alpha is the top eigenvalue of M^{S,U}; the witness is its top eigenvector
/// embedded into the 2^n-dimensional standard basis (real by symmetry).
/// Dense eigensolve up to dimension 512, power iteration beyond.
pub fn spectral_forrelation(inst: &Instance) -> Result<(f64, Vec<f64>)> {
    let size = 1usize << inst.n();
    if inst.s().ell() == 0 || inst.u().is_empty() {
        return Ok((0.0, vec![0.0; size]));
    }
    let mats = forrelation_matrices(inst, inst.params().kappa)?;
    let dim = mats.support.len();
    let (alpha, vec_on_support) = if dim <= 512 {
        linalg::top_eigenpair(&mats.m_su)
    } else {
        let start = DVector::from_element(dim, 1.0);
        linalg::power_iteration(&mats.m_su, &start, 1e-10, 10_000)
    };
    let mut witness = vec![0.0; size];
    let norm = vec_on_support.norm();
    for (i, &x) in mats.support.iter().enumerate() {
        witness[x as usize] = vec_on_support[i] / norm;
    }
    Ok((alpha.max(0.0), witness))
}

/// The yes/no Forrelation thresholds.
///
/// t1 = (1+kappa)/2 + v/ell + rho bounds every small-Delta restriction;
/// t2 = (1+3kappa)/2 - 15kappa^2/4 - 5kappa/ell - rho is the completeness floor.
pub fn t1t2(kappa: f64, ell: usize, rho: f64, v: usize) -> (f64, f64) {
    let ell = ell as f64;
    let t1 = (1.0 + kappa) / 2.0 + v as f64 / ell + rho;
    let t2 = (1.0 + 3.0 * kappa) / 2.0 - 15.0 * kappa * kappa / 4.0 - 5.0 * kappa / ell - rho;
    (t1, t2)
}

/// The concentration slack rho used in the thresholds, clamped at zero.
///
/// Returns (rho, vacuous), where vacuous marks the desk-scale regime in
/// which the raw value is negative and the concentration guarantee is empty.
pub fn rho_default(n: u32, ell: usize) -> (f64, bool) {
    let size = (1u64 << n) as f64;
    let ell = ell as f64;
    let raw = (2.0 * ell * ell / size) * (size / (2.0 * ell.powi(4))).ln();
    if raw < 0.0 {
        (0.0, true)
    } else {
        (raw, false)
    }
}

/// Certification report for one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForrelationReport {
    /// Spectral Forrelation of (S, U).
    pub alpha: f64,
    /// Optimal witness embedded on {0,1}^n (real amplitudes).
    pub top_witness: Vec<f64>,
    /// <S| M^{S,U} |S> with the multiplicity-weighted |S> / sqrt(ell).
    pub completeness: f64,
    /// Worst restricted norm ||M^{S,U}_[Delta]|| over the tested Delta.
    pub soundness_worst: f64,
    /// Number of subsets Delta examined.
    pub deltas_tested: usize,
    /// No-instance threshold.
    pub t1: f64,
    /// Yes-instance threshold.
    pub t2: f64,
    /// Concentration slack used in the thresholds.
    pub rho: f64,
    /// Maximum subset size examined.
    pub v: usize,
    /// True when rho was clamped to zero (concentration bound vacuous).
    pub vacuous_regime: bool,
}

/// Checks the strong-yes structure of an instance.
///
/// Enumerates all Delta subsets of the support with |Delta| <= v when there
/// are at most `delta_budget` of them, otherwise samples `delta_budget`
/// subsets, and records the worst restricted operator norm.
pub fn check_strong(
    inst: &Instance,
    v: usize,
    delta_budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ForrelationReport> {
    let ell = inst.s().ell();
    if v > ell {
        return Err(Error::Parameter(format!("v = {v} exceeds ell = {ell}")));
    }
    let (alpha, top_witness) = spectral_forrelation(inst)?;
    let mats = forrelation_matrices(inst, inst.params().kappa)?;
    let d = mats.support.len();

    let mut completeness = 0.0;
    for i in 0..d {
        for j in 0..d {
            completeness += mats.multiplicities[i] as f64
                * mats.multiplicities[j] as f64
                * mats.m_su[(i, j)];
        }
    }
    completeness /= ell as f64;

    let mut subset_count: u128 = 0;
    for k in 1..=v.min(d) {
        subset_count += binomial(d as u64, k as u64);
    }
    let exhaustive = subset_count <= delta_budget as u128;

    let mut worst = 0.0f64;
    let mut tested = 0usize;
    if exhaustive {
        for k in 1..=v.min(d) {
            let mut indices: Vec<usize> = (0..k).collect();
            loop {
                worst = worst.max(restricted_norm(&mats.m_su, &indices));
                tested += 1;
                if !next_combination(&mut indices, d) {
                    break;
                }
            }
        }
    } else {
        for _ in 0..delta_budget {
            let k = rng.random_range(1..=v.min(d));
            let mut picked = std::collections::BTreeSet::new();
            while picked.len() < k {
                picked.insert(rng.random_range(0..d));
            }
            let indices: Vec<usize> = picked.into_iter().collect();
            worst = worst.max(restricted_norm(&mats.m_su, &indices));
            tested += 1;
        }
    }

    let (rho, vacuous_regime) = rho_default(inst.n(), ell);
    let (t1, t2) = t1t2(inst.params().kappa, ell, rho, v);
    Ok(ForrelationReport {
        alpha,
        top_witness,
        completeness,
        soundness_worst: worst,
        deltas_tested: tested,
        t1,
        t2,
        rho,
        v,
        vacuous_regime,
    })
}

/// Operator norm of a principal submatrix.
pub fn restricted_norm(m: &DMatrix<f64>, indices: &[usize]) -> f64 {
    let k = indices.len();
    let sub = DMatrix::from_fn(k, k, |i, j| m[(indices[i], indices[j])]);
    linalg::sym_op_norm(&sub)
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Advances `indices` to the next k-combination of {0..d}; false at the end.
fn next_combination(indices: &mut [usize], d: usize) -> bool {
    let k = indices.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if indices[i] < d - (k - i) {
            indices[i] += 1;
            for j in i + 1..k {
                indices[j] = indices[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The canonical on-disk form of an instance.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceRecord {
    n: u32,
    ell: usize,
    kappa: f64,
    seed: u64,
    sampling: Sampling,
    s: Vec<u64>,
    u: Vec<u64>,
}

/// Serializes an instance to its canonical text record: S sorted with
/// repeats, U sorted, plus the generation parameters.
pub fn serialize_instance(inst: &Instance) -> String {
    let mut s = inst.s().elements().to_vec();
    s.sort_unstable();
    let record = InstanceRecord {
        n: inst.n(),
        ell: inst.s().ell(),
        kappa: inst.params().kappa,
        seed: inst.params().seed,
        sampling: inst.sampling(),
        s,
        u: inst.u().to_vec(),
    };
    serde_json::to_string_pretty(&record).expect("instance record serialization cannot fail")
}

/// Parses and validates a canonical instance record.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let record: InstanceRecord =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance record: {e}")))?;
    if record.n == 0 || record.n > 24 {
        return Err(Error::Parse(format!("n = {} outside 1..=24", record.n)));
    }
    let size = 1u64 << record.n;
    if record.s.len() != record.ell {
        return Err(Error::Parse(format!(
            "ell = {} but S has {} elements",
            record.ell,
            record.s.len()
        )));
    }
    if let Some(&bad) = record.s.iter().chain(record.u.iter()).find(|&&x| x >= size) {
        return Err(Error::Parse(format!("element {bad} out of range for n = {}", record.n)));
    }
    if record.u.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parse("U must be strictly increasing".into()));
    }
    if matches!(record.sampling, Sampling::Strong) && record.u.first() == Some(&0) {
        return Err(Error::Parse("Strong sampling never places 0^n in U".into()));
    }
    let s = Multiset::new(record.n, record.s)?;
    let params = StrongParams {
        n: record.n,
        ell: record.ell,
        kappa: record.kappa,
        seed: record.seed,
    };
    Ok(Instance { n: record.n, s, u: record.u, sampling: record.sampling, params })
}
