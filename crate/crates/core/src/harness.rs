//! Seeded experiment runner: nine experiments (E1-E9) check the library's
//! bounds and identities at desk scale, each emitting one BoundReport per
//! checked inequality. Vacuous bounds (values above 1 for quantities that
//! are at most 1) are still evaluated and reported, labeled informational.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::circuit::qma_verifier_accept_prob;
use crate::error::{Error, Result};
use crate::fock::{
    enumerate_basis, hopping, hopping_position_diagonal, init_condensate, ladder_ops, projector,
    success_norm, change_basis, FockBasis, Flavor, Frame, HoppingOrder, LadderKind,
    ProjectorKind, Sector,
};
use crate::hypercube::{good_multiset, is_good_with, Multiset};
use crate::instances::{
    forrelation_matrices, rho_default, sample_u_given_s, spectral_forrelation,
};
use crate::linalg::{min_eigenvalue, op_norm, sym_matrix_function};
use crate::oracle::{
    channel_equivalence_deviation, exp_drift_norm, hopping_drift_norm, post_query_state,
    random_oracle_program,
};
use crate::poly::{
    akraus, condensate_restricted_norm, e0, e1, eval_cheb, flat, flat_condensate_error,
    taylor_condensate_error, tcheby_cheb_coeffs,
};
use crate::rng::{labels, stream_rng};
use crate::sampler::{joint_bound, per_round_bound, toy_family, wilson_lower, HybridSampler};
use rand::Rng;

/// The experiment identifiers in suite order.
pub const EXPERIMENT_IDS: [&str; 9] = ["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9"];

/// Slack added to one-sided bound comparisons.
pub const BOUND_SLACK: f64 = 1e-9;

/// One-sided z value for 99% binomial confidence.
pub const Z_99: f64 = 2.326;

/// Claims checked by the suite and the experiment responsible for each.
/// The test suite enforces that this table stays total over the in-scope
/// set and that every referenced experiment exists.
pub const COVERAGE: &[(&str, &str)] = &[
    ("gamma spectrum of a multiset", "E1"),
    ("strong U membership probability", "E1"),
    ("goodness of the multiset construction", "E1"),
    ("entrywise Hoeffding concentration of M^{S,U}", "E1"),
    ("PSD sandwich A <= M <= B", "E1"),
    ("thresholds t1 and t2", "E1"),
    ("channel equivalence of the purified Kraus query", "E2"),
    ("post-query state form", "E2"),
    ("bosonic commutation relations", "E3"),
    ("hopping operators preserve condensates", "E3"),
    ("single-hopping condensate norm sqrt(r)+sqrt(2+4r)", "E3"),
    ("double-hopping condensate norm 9r+9", "E3"),
    ("quasi-even hopping drift R^5/sqrt(ell)", "E4"),
    ("exponential drift (2R^5/sqrt(ell))^{d/4}", "E4"),
    ("square-root drift (64R^5/sqrt(ell))^{d/4}", "E4"),
    ("squared overlap with the quasi-even complement", "E4"),
    ("success norm 2(4v(r^3+vr^2)sqrt(ell)/2^{n/4})^v", "E5"),
    ("counting of quasi-even condensates at distance 2d", "E6"),
    ("QMA verifier acceptance probability", "E7"),
    ("per-round sample from S minus Delta", "E7"),
    ("cumulative sampler joint bound", "E7"),
    ("truncated Chebyshev pointwise error", "E8"),
    ("Taylor condensate error", "E8"),
    ("flat approximation condensate error", "E8"),
    ("AKraus multi-query approximation", "E8"),
    ("stars-and-bars recursive oddness bound", "E8"),
    ("sampling probability upper bound", "E9"),
];

/// Parameters of one experiment run. `defaults` fills the desk-scale values;
/// the CLI overrides individual fields.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    /// Experiment identifier E1-E9.
    pub id: String,
    /// Oracle input width.
    pub n: u32,
    /// Multiset size.
    pub ell: usize,
    /// Strong-distribution strength.
    pub kappa: f64,
    /// Number of guesses.
    pub v: usize,
    /// Queries per guess.
    pub t: usize,
    /// Total query count of purified programs.
    pub big_t: usize,
    /// Condensate radius.
    pub r: usize,
    /// Outer condensate radius of the drift lemmas.
    pub big_r: usize,
    /// Oddness level.
    pub o: usize,
    /// Drift distance.
    pub d: usize,
    /// Monte-Carlo trial count.
    pub trials: usize,
    /// Stream seed.
    pub seed: u64,
}

impl ExperimentConfig {
    /// Desk-scale defaults for an experiment.
    pub fn defaults(id: &str, seed: u64) -> Result<Self> {
        let mut cfg = ExperimentConfig {
            id: id.to_string(),
            n: 2,
            ell: 4,
            kappa: 0.1,
            v: 2,
            t: 2,
            big_t: 2,
            r: 2,
            big_r: 2,
            o: 0,
            d: 2,
            trials: 20,
            seed,
        };
        match id {
            "E1" => {
                cfg.n = 10;
                cfg.ell = 16;
                cfg.trials = 10;
            }
            "E2" => {
                cfg.ell = 2;
                cfg.kappa = 0.15;
            }
            "E3" | "E4" | "E5" | "E6" => {}
            "E7" => {
                cfg.n = 10;
                cfg.ell = 16;
                cfg.kappa = 0.25;
                cfg.v = 3;
                cfg.trials = 10_000;
            }
            "E8" => {
                cfg.kappa = 0.25;
                cfg.t = 3;
            }
            "E9" => {
                cfg.n = 10;
                cfg.ell = 16;
                cfg.kappa = 0.25;
                cfg.trials = 2_000;
            }
            other => return Err(Error::Parameter(format!("unknown experiment id {other}"))),
        }
        Ok(cfg)
    }
}

/// One checked inequality or identity.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// What was checked.
    pub label: String,
    /// The computed quantity.
    pub measured: f64,
    /// The bound (one-sided) or expected value (identities).
    pub bound: f64,
    /// Two-sided tolerance; zero marks a one-sided bound check.
    pub tol: f64,
    /// Evaluated and reported without affecting the pass verdict.
    pub informational: bool,
    /// The verdict.
    pub pass: bool,
}

impl BoundReport {
    /// One-sided check: measured <= bound + slack.
    pub fn upper(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        BoundReport {
            label: label.into(),
            measured,
            bound,
            tol: 0.0,
            informational: false,
            pass: measured <= bound + BOUND_SLACK,
        }
    }

    /// Two-sided check: |measured - expected| <= tol.
    pub fn identity(label: impl Into<String>, measured: f64, expected: f64, tol: f64) -> Self {
        BoundReport {
            label: label.into(),
            measured,
            bound: expected,
            tol,
            informational: false,
            pass: (measured - expected).abs() <= tol,
        }
    }

    /// Evaluated comparison that never fails (vacuous desk-scale bounds).
    pub fn informational(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        BoundReport {
            label: label.into(),
            measured,
            bound,
            tol: 0.0,
            informational: true,
            pass: true,
        }
    }

    /// One text line for the report.
    pub fn line(&self) -> String {
        let verdict = if self.informational {
            "INFO"
        } else if self.pass {
            "PASS"
        } else {
            "FAIL"
        };
        if self.tol > 0.0 {
            format!(
                "{verdict} {}: measured={:.6e} expected={:.6e} tol={:.1e}",
                self.label, self.measured, self.bound, self.tol
            )
        } else {
            format!(
                "{verdict} {}: measured={:.6e} bound={:.6e}",
                self.label, self.measured, self.bound
            )
        }
    }
}

/// All reports of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    /// Experiment id.
    pub id: String,
    /// Seed the run is reproducible from.
    pub seed: u64,
    /// Individual checks.
    pub reports: Vec<BoundReport>,
    /// All non-informational checks passed.
    pub pass: bool,
}

impl ExperimentReport {
    fn assemble(id: &str, seed: u64, reports: Vec<BoundReport>) -> Self {
        let pass = reports.iter().all(|r| r.pass);
        ExperimentReport { id: id.to_string(), seed, reports, pass }
    }

    /// Multi-line text form: a header then one line per check.
    pub fn text(&self) -> String {
        let mut out = format!(
            "{} seed={} {}\n",
            self.id,
            self.seed,
            if self.pass { "PASS" } else { "FAIL" }
        );
        for r in &self.reports {
            out.push_str("  ");
            out.push_str(&r.line());
            out.push('\n');
        }
        out
    }
}

/// Runs one experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let reports = match cfg.id.as_str() {
        "E1" => run_e1(cfg)?,
        "E2" => run_e2(cfg)?,
        "E3" => run_e3(cfg)?,
        "E4" => run_e4(cfg)?,
        "E5" => run_e5(cfg)?,
        "E6" => run_e6(cfg)?,
        "E7" => run_e7(cfg)?,
        "E8" => run_e8(cfg)?,
        "E9" => run_e9(cfg)?,
        other => return Err(Error::Parameter(format!("unknown experiment id {other}"))),
    };
    Ok(ExperimentReport::assemble(&cfg.id, cfg.seed, reports))
}

/// Runs E1-E8 at their defaults plus the informational E9.
pub fn run_suite(seed: u64) -> Result<Vec<ExperimentReport>> {
    EXPERIMENT_IDS
        .iter()
        .map(|id| run_experiment(&ExperimentConfig::defaults(id, seed)?))
        .collect()
}

/// E1: strong-instance structure. PSD sandwich and exact B entries on seeded
/// good multisets, then entrywise Hoeffding concentration of M^{S,U} around
/// M^S on a larger pairwise-good instance.
fn run_e1(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let mut worst_sandwich = f64::NEG_INFINITY;
    let mut worst_diag = 0.0f64;
    let mut worst_offdiag = 0.0f64;
    let mut worst_alpha_gap = f64::NEG_INFINITY;
    for i in 0..cfg.trials as u64 {
        let s = good_multiset(cfg.n, 4, cfg.seed + i)?;
        let inst = sample_u_given_s(s, cfg.kappa, cfg.seed + i)?;
        let mats = forrelation_matrices(&inst, cfg.kappa)?;
        let lower = -min_eigenvalue(&(&mats.m_s - &mats.a_s));
        let upper = -min_eigenvalue(&(&mats.b_s - &mats.m_s));
        worst_sandwich = worst_sandwich.max(lower).max(upper);
        let ell = inst.s().ell() as f64;
        for i in 0..mats.b_s.nrows() {
            for j in 0..mats.b_s.ncols() {
                let expected = if i == j { (1.0 + cfg.kappa) / 2.0 } else { cfg.kappa / ell };
                let dev = (mats.b_s[(i, j)] - expected).abs();
                if i == j {
                    worst_diag = worst_diag.max(dev);
                } else {
                    worst_offdiag = worst_offdiag.max(dev);
                }
            }
        }
        // The witness certifies alpha >= t2 only when the yes threshold is
        // meaningful; at kappa = 0.1 we record the spectral gap measured.
        let (alpha, _) = spectral_forrelation(&inst)?;
        let (rho, _) = rho_default(inst.n(), inst.s().ell());
        let (_, t2) = crate::instances::t1t2(cfg.kappa, inst.s().ell(), rho, cfg.v);
        worst_alpha_gap = worst_alpha_gap.max(t2 - alpha);
    }
    let mut reports = vec![
        BoundReport::upper("sandwich negative-eigenvalue excess", worst_sandwich, 0.0),
        BoundReport::identity("B diagonal (1+kappa)/2", worst_diag, 0.0, 1e-12),
        BoundReport::identity("B off-diagonal kappa/ell", worst_offdiag, 0.0, 1e-12),
        BoundReport::upper("completeness floor t2 - alpha", worst_alpha_gap, 0.0),
    ];

    // Hoeffding part at n = 14, ell = 32. The quadratic construction does
    // not reach ell = 32 inside 14 bits, so a random multiset is filtered
    // for pairwise (k <= 2) goodness, which is all the claim needs.
    let (n2, ell2) = (14u32, 32usize);
    let mut rng = stream_rng(cfg.seed, labels::SAMPLE_S);
    let s2 = loop {
        let mut elems = std::collections::BTreeSet::new();
        while elems.len() < ell2 {
            elems.insert(rng.random_range(1..1u64 << n2));
        }
        let s = Multiset::new(n2, elems.into_iter().collect())?;
        if is_good_with(&s, true) {
            break s;
        }
    };
    let resamples = 50usize;
    let (rho_def, vacuous) = rho_default(n2, ell2);
    let rho_fixed = 0.1f64;
    let mut violations_def = 0usize;
    let mut violations_fixed = 0usize;
    for i in 0..resamples as u64 {
        let inst = sample_u_given_s(s2.clone(), cfg.kappa, cfg.seed + labels::TRIAL_BASE + i)?;
        let mats = forrelation_matrices(&inst, cfg.kappa)?;
        let dev = (&mats.m_su - &mats.m_s).amax();
        if dev > rho_def {
            violations_def += 1;
        }
        if dev > rho_fixed {
            violations_fixed += 1;
        }
    }
    let hoeffding = |rho: f64| 2.0 * (ell2 * ell2) as f64 * (-rho * rho * (1u64 << n2) as f64 / 2.0).exp();
    let rate_def = violations_def as f64 / resamples as f64;
    let rate_fixed = violations_fixed as f64 / resamples as f64;
    if vacuous {
        reports.push(BoundReport::informational(
            "Hoeffding violation rate at clamped rho (vacuous bound)",
            rate_def,
            hoeffding(rho_def),
        ));
    } else {
        reports.push(BoundReport::upper(
            "Hoeffding violation rate at default rho",
            rate_def,
            hoeffding(rho_def),
        ));
    }
    reports.push(BoundReport::upper(
        "Hoeffding violation rate at rho = 0.1",
        rate_fixed,
        hoeffding(rho_fixed),
    ));
    Ok(reports)
}

/// E2: channel equivalence of the compressed query against the exhaustive
/// (S, U) ensemble, over seeded random programs.
fn run_e2(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let mut rng = stream_rng(cfg.seed, labels::PROGRAM);
    let modes = 1u64 << cfg.n;
    let mut worst = 0.0f64;
    for _ in 0..cfg.trials {
        let ys: Vec<u64> = (0..cfg.big_t).map(|_| rng.random_range(1..modes)).collect();
        let program = random_oracle_program(2, &ys, &mut rng);
        worst = worst.max(channel_equivalence_deviation(&program, cfg.n, cfg.ell, cfg.kappa)?);
    }
    Ok(vec![BoundReport::upper("trace-norm channel deviation", worst, 1e-8)])
}

/// E3: operator facts on condensates at n in {2, 3}, ell = 4, all y != 0,
/// r in 0..=4, plus the commutation relations below the sector ceiling.
fn run_e3(_cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let ell = 4usize;
    let mut worst_single = f64::NEG_INFINITY;
    let mut worst_double = f64::NEG_INFINITY;
    let mut worst_preserve = 0.0f64;
    for n in [2u32, 3] {
        let basis = enumerate_basis(n, Sector::Fixed(ell))?;
        for y in 1..1u64 << n {
            let g = hopping(&basis, y, HoppingOrder::Single)?.to_dense();
            let h = hopping(&basis, y, HoppingOrder::Double)?.to_dense();
            for r in 0..=ell {
                let con = projector(&basis, ProjectorKind::Con(r))?.op().to_dense();
                let rf = r as f64;
                worst_single =
                    worst_single.max(op_norm(&(&g * &con)) - (rf.sqrt() + (2.0 + 4.0 * rf).sqrt()));
                worst_double = worst_double.max(op_norm(&(&h * &con)) - (9.0 * rf + 9.0));
                for k in 1..=2usize {
                    let ceiling = projector(&basis, ProjectorKind::Con((r + 2 * k).min(ell)))?
                        .op()
                        .to_dense();
                    let id = DMatrix::<f64>::identity(basis.dim(), basis.dim());
                    let mut power = con.clone();
                    for _ in 0..k {
                        power = &h * power;
                    }
                    worst_preserve = worst_preserve.max(((id - ceiling) * power).amax());
                }
            }
        }
    }

    // Commutation [a_x, a^dag_y] = delta_{xy} id, on states whose image
    // stays below the enumeration ceiling.
    let basis = enumerate_basis(2, Sector::UpTo(3))?;
    let mut worst_comm = 0.0f64;
    let dim = basis.dim();
    for x in 0..4u64 {
        for y in 0..4u64 {
            let cr = ladder_ops(&basis, y, Flavor::Position, LadderKind::Create)?.to_dense();
            let an = ladder_ops(&basis, x, Flavor::Position, LadderKind::Annihilate)?.to_dense();
            let comm = &an * &cr - &cr * &an;
            let delta = if x == y { 1.0 } else { 0.0 };
            for col in 0..dim {
                if basis.total(col) >= 3 {
                    continue;
                }
                for row in 0..dim {
                    let expected = if row == col { delta } else { 0.0 };
                    worst_comm = worst_comm.max((comm[(row, col)] - expected).abs());
                }
            }
        }
    }

    Ok(vec![
        BoundReport::upper("||G_y Con_r|| excess over sqrt(r)+sqrt(2+4r)", worst_single, 0.0),
        BoundReport::upper("||H_y Con_r|| excess over 9r+9", worst_double, 0.0),
        BoundReport::identity("condensate preservation residual", worst_preserve, 0.0, 1e-12),
        BoundReport::identity("commutation relation residual", worst_comm, 0.0, 1e-12),
    ])
}

/// E4: quasi-even drift lemmas at n = 2, ell = 4, R = 2, d in {1, 2}, plus
/// the (vacuous at this scale) post-query overlap theorem.
fn run_e4(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let basis = enumerate_basis(cfg.n, Sector::Fixed(cfg.ell))?;
    let big_r = cfg.big_r as f64;
    let ell = cfg.ell as f64;
    let mut reports = Vec::new();
    let mut worst_hop = f64::NEG_INFINITY;
    let mut worst_exp = f64::NEG_INFINITY;
    let mut worst_sqrt = f64::NEG_INFINITY;
    for y in 1..1u64 << cfg.n {
        worst_hop = worst_hop
            .max(hopping_drift_norm(&basis, y, cfg.big_r)? - big_r.powi(5) / ell.sqrt());
        for d in 1..=cfg.d {
            let exp_bound = (2.0 * big_r.powi(5) / ell.sqrt()).powf(d as f64 / 4.0);
            let sqrt_bound = (64.0 * big_r.powi(5) / ell.sqrt()).powf(d as f64 / 4.0);
            worst_exp = worst_exp
                .max(exp_drift_norm(&basis, y, cfg.kappa, cfg.big_r, d, false)? - exp_bound);
            worst_sqrt = worst_sqrt
                .max(exp_drift_norm(&basis, y, cfg.kappa, cfg.big_r, d, true)? - sqrt_bound);
        }
    }
    reports.push(BoundReport::upper("hopping drift excess over R^5/sqrt(ell)", worst_hop, 0.0));
    reports.push(BoundReport::upper(
        "exponential drift excess over (2R^5/sqrt(ell))^{d/4}",
        worst_exp,
        0.0,
    ));
    reports.push(BoundReport::upper(
        "sqrt drift excess over (64R^5/sqrt(ell))^{d/4}",
        worst_sqrt,
        0.0,
    ));

    // Squared overlap with the complement of QEC after T queries; the stated
    // bound is far above 1 here, so the comparison is informational.
    let mut rng = stream_rng(cfg.seed, labels::PROGRAM);
    let ys: Vec<u64> = (0..cfg.big_t).map(|_| rng.random_range(1..1u64 << cfg.n)).collect();
    let program = random_oracle_program(2, &ys, &mut rng);
    let state = post_query_state(&program, cfg.n, cfg.ell, cfg.kappa)?;
    let v = 4usize;
    let overlap = state.quasi_even_overlap(cfg.ell, v / 4)?;
    let t = cfg.big_t as f64;
    let theorem_bound =
        ((t.powi(4) / ell.powf(1.0 / 32.0)).powi(v as i32) + (-5.0 * t).exp()).powi(2);
    reports.push(BoundReport::informational(
        "post-query overlap with the QEC complement (vacuous bound)",
        overlap,
        theorem_bound,
    ));
    Ok(reports)
}

/// E5: success-norm bound over all distinct guess pairs at n = 2, ell = 4,
/// v = 2, r = 2, o = 0.
fn run_e5(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let basis = enumerate_basis(cfg.n, Sector::Fixed(cfg.ell))?;
    let modes = 1u64 << cfg.n;
    let v = cfg.v as f64;
    let (r, o) = (cfg.r, cfg.o);
    let bound = 2.0
        * (4.0 * v * ((r as f64).powi(3) + v * (r as f64).powi(2)) * (cfg.ell as f64).sqrt()
            / 2f64.powf(cfg.n as f64 / 4.0))
        .powf(v);
    let mut worst = f64::NEG_INFINITY;
    for z1 in 0..modes {
        for z2 in 0..modes {
            if z1 == z2 {
                continue;
            }
            worst = worst.max(success_norm(&basis, &[z1, z2], r, o)?);
        }
    }
    Ok(vec![BoundReport::upper("success norm over distinct guess pairs", worst, bound)])
}

/// Momentum tuples of the sector inside QEC(r, o), as occupancy vectors.
fn qec_tuples(basis: &Arc<FockBasis>, r: usize, o: usize) -> Result<Vec<Vec<u8>>> {
    let diag = projector(basis, ProjectorKind::QEC(r, o))?.diag().to_vec();
    Ok(basis
        .states()
        .iter()
        .zip(diag)
        .filter(|(_, d)| *d == 1.0)
        .map(|(t, _)| t.clone())
        .collect())
}

/// E6: exhaustive count of quasi-even condensate tuples at distance exactly
/// 2d from each member tuple, against the counting bound.
fn run_e6(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let basis = enumerate_basis(cfg.n, Sector::Fixed(cfg.ell))?;
    let mut worst = f64::NEG_INFINITY;
    for r in 0..=cfg.r {
        for o in 0..=1usize {
            let tuples = qec_tuples(&basis, r, o)?;
            for d in 0..=cfg.d {
                let bound = (2f64.powi(cfg.n as i32 + 1)).powf(d as f64 / 2.0 + o as f64)
                    * (r as f64 + d as f64 / 2.0 + o as f64).max(1.0).powf(d as f64 / 2.0 + o as f64);
                for u in &tuples {
                    let count = tuples
                        .iter()
                        .filter(|w| {
                            let dist: u32 = u
                                .iter()
                                .zip(w.iter())
                                .map(|(&a, &b)| (a as i32 - b as i32).unsigned_abs())
                                .sum();
                            dist == 2 * d as u32
                        })
                        .count();
                    worst = worst.max(count as f64 - bound);
                }
            }
        }
    }
    Ok(vec![BoundReport::upper("condensate count excess over the bound", worst, 0.0)])
}

/// E7: the toy distinguishing family. Verifier identity, per-round sampler
/// rate at t in {2, 4}, and cumulative success at v <= 3.
fn run_e7(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let q = 3u32;
    let mut reports = Vec::new();
    for t in [2usize, 4] {
        let fam = toy_family(t, q, cfg.seed.max(1))?;
        let witness: Vec<_> = match &fam.program.stages[0] {
            crate::circuit::Stage::ControlledPrep { preps, .. } => {
                preps[&fam.witness_star].clone()
            }
            _ => unreachable!("toy programs start with the witness preparation"),
        };
        let direct = qma_verifier_accept_prob(&fam.instance, &witness)?;
        reports.push(BoundReport::identity(
            format!("t={t} verifier acceptance equals the projector formula"),
            fam.completeness,
            direct,
            1e-9,
        ));
        reports.push(BoundReport::identity(
            format!("t={t} completeness equals alpha"),
            fam.completeness,
            fam.alpha,
            1e-8,
        ));

        let mut sampler =
            HybridSampler::new(&fam.program, fam.instance.s(), fam.instance.u(), fam.witness_star)?;
        let (hits, trials) =
            sampler.empirical_round_rate(&[], fam.witness_star, cfg.trials, cfg.seed)?;
        // One-sided test: the 99% lower confidence limit must clear 1/(36t^2).
        let lower = wilson_lower(hits, trials, Z_99);
        reports.push(BoundReport::upper(
            format!("t={t} per-round bound minus 99% lower confidence limit"),
            per_round_bound(t) - lower,
            0.0,
        ));
        for v in 1..=cfg.v.min(3) {
            let (succ, trials) = sampler.empirical_joint_rate(v, cfg.trials, cfg.seed)?;
            let lower = wilson_lower(succ, trials, Z_99);
            reports.push(BoundReport::upper(
                format!("t={t} v={v} joint bound minus 99% lower confidence limit"),
                joint_bound(t, v, q) - lower,
                0.0,
            ));
        }
    }
    Ok(reports)
}

/// E8: the polynomial toolkit and the recursive oddness bound it feeds.
fn run_e8(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let mut reports = Vec::new();

    // Truncated Chebyshev pointwise error on [-1, 1] grids.
    let mut worst_tcheby = f64::NEG_INFINITY;
    for (s, d) in [(16u64, 12usize), (64, 30)] {
        let coeffs = tcheby_cheb_coeffs(s, d);
        let bound = 2.0 * (-(d as f64) * d as f64 / (2.0 * s as f64)).exp();
        for i in 0..=2000 {
            let x = -1.0 + i as f64 / 1000.0;
            worst_tcheby = worst_tcheby.max((x.powi(s as i32) - eval_cheb(&coeffs, x)).abs() - bound);
        }
    }
    reports.push(BoundReport::upper("tcheby grid error excess over 2exp(-d^2/2s)", worst_tcheby, 0.0));

    let basis = enumerate_basis(cfg.n, Sector::Fixed(cfg.ell))?;
    let m = 11.9f64;
    let w_op = {
        let g = hopping_position_diagonal(&basis, 1, HoppingOrder::Single)?;
        g.compose(&g)?
    };

    // Taylor lemma at s = 3M with d = ceil(4 ln(1/eps)) + r.
    let mut worst_taylor = f64::NEG_INFINITY;
    for eps in [1e-3f64, 1e-6] {
        for r in [0usize, 2] {
            let d = (4.0 * (1.0 / eps).ln()).ceil() as usize + r;
            worst_taylor =
                worst_taylor.max(taylor_condensate_error(&w_op, 3.0 * m, d, r)? - eps);
        }
    }
    reports.push(BoundReport::upper("Taylor condensate error excess", worst_taylor, 0.0));

    // Flat approximation operator error.
    let mut worst_flat = f64::NEG_INFINITY;
    for eps in [1e-2f64, 1e-4] {
        for r in [0usize, 2] {
            let fp = flat(m, r, eps)?;
            worst_flat = worst_flat.max(flat_condensate_error(&w_op, &fp, r)? - eps);
        }
    }
    reports.push(BoundReport::upper("flat condensate error excess", worst_flat, 0.0));

    // AKraus at T = 2 over all outcome patterns.
    let eps = 1e-2f64;
    let r = 2usize;
    let diag = |y: u64| -> Result<Vec<f64>> {
        let g = hopping_position_diagonal(&basis, y, HoppingOrder::Single)?;
        let mut d = vec![0.0; basis.dim()];
        for &(row, _, v) in g.entries() {
            d[row] = v * v;
        }
        Ok(d)
    };
    let (g1, g2) = (diag(1)?, diag(2)?);
    let mut worst_akraus = f64::NEG_INFINITY;
    for xs in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
        let ak = akraus(eps, &xs, cfg.kappa, m, r)?;
        let e = |x: u8, g: f64| if x == 0 { e0(cfg.kappa, g) } else { e1(cfg.kappa, g) };
        let values: Vec<f64> = (0..basis.dim())
            .map(|i| {
                Ok(e(xs[0], g1[i]) * e(xs[1], g2[i]) - ak.eval_scalars(&[g1[i], g2[i]])?)
            })
            .collect::<Result<_>>()?;
        worst_akraus = worst_akraus.max(condensate_restricted_norm(&basis, &values, r)? - eps);
    }
    reports.push(BoundReport::upper("AKraus operator error excess at T=2", worst_akraus, 0.0));

    // Stars-and-bars recursive bound on the concrete QE chain: projectors
    // Pi_j = QE_{<= j}, operators exp(-kappa Con_R G_y^2 Con_R), epsilon
    // measured as the worst (a, b)-normalized drift over the finite grid.
    let n_modes = basis.n_modes();
    let con = projector(&basis, ProjectorKind::Con(cfg.big_r))?.op().to_dense();
    let id = DMatrix::<f64>::identity(basis.dim(), basis.dim());
    let mut ops = Vec::new();
    for y in 1..=cfg.t as u64 {
        let y = 1 + (y - 1) % ((1u64 << cfg.n) - 1);
        let g = hopping_position_diagonal(&basis, y, HoppingOrder::Single)?;
        let w = g.compose(&g)?.to_frame(Frame::Momentum)?.to_dense();
        let inner = &con * w * &con;
        ops.push(sym_matrix_function(&inner, |z| (-cfg.kappa * z.max(0.0)).exp()));
    }
    let pi = |j: usize| -> Result<DMatrix<f64>> {
        Ok(projector(&basis, ProjectorKind::QE(j.min(n_modes)))?.op().to_dense())
    };
    let mut eps_chain = 0.0f64;
    for a in 0..n_modes {
        for b in 0..n_modes - a {
            for op in &ops {
                let norm = op_norm(&((&id - pi(a + b)?) * op * pi(a)?));
                if norm > 0.0 {
                    eps_chain = eps_chain.max(norm.powf(1.0 / (b as f64 + 1.0)));
                }
            }
        }
    }
    let psi = change_basis(&init_condensate(&basis)?, Frame::Momentum)?;
    let psi_real: Vec<f64> = psi.amps().iter().map(|a| a.re).collect();
    let psi_vec = nalgebra::DVector::from_vec(psi_real);
    let mut evolved = psi_vec.clone();
    let mut worst_chain = f64::NEG_INFINITY;
    for (i, op) in ops.iter().enumerate() {
        evolved = op * evolved;
        let t_now = (i + 1) as u64;
        for lambda in 0..=2usize {
            let residual = ((&id - pi(lambda)?) * &evolved).norm();
            let bound = binomial(t_now + lambda as u64, t_now.saturating_sub(1))
                * eps_chain.powi(lambda as i32 + 1);
            worst_chain = worst_chain.max(residual - bound);
        }
    }
    reports.push(BoundReport::upper(
        "recursive oddness residual excess over C(t+l, t-1) eps^{l+1}",
        worst_chain,
        0.0,
    ));
    Ok(reports)
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// E9: empirical cumulative-sampler success against the evaluated asymptotic
/// upper bound, reported informationally because the bound exceeds 1 at desk
/// parameters.
fn run_e9(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let fam = toy_family(cfg.t, 3, cfg.seed.max(1))?;
    let mut sampler =
        HybridSampler::new(&fam.program, fam.instance.s(), fam.instance.u(), fam.witness_star)?;
    let (succ, trials) = sampler.empirical_joint_rate(cfg.v, cfg.trials, cfg.seed)?;
    let rate = succ as f64 / trials as f64;
    let (v, t) = (cfg.v as f64, cfg.t as f64);
    let (n, ell) = (cfg.n as f64, cfg.ell as f64);
    let vt = v * t;
    let bound = 2.0 * (4.0 * v * (vt.powi(30) + v * vt.powi(20)) * ell.sqrt() / 2f64.powf(n / 4.0))
        .powf(v)
        + ((vt.powi(4) / ell.powf(1.0 / 32.0)).powf(v) + (-5.0 * vt).exp()).powi(2);
    Ok(vec![BoundReport::informational(
        "cumulative success rate vs the asymptotic bound (informational)",
        rate,
        bound,
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_table_is_total() {
        for (claim, exp) in COVERAGE {
            assert!(EXPERIMENT_IDS.contains(exp), "{claim} maps to unknown {exp}");
        }
        // Every experiment carries at least one claim.
        for id in EXPERIMENT_IDS {
            assert!(COVERAGE.iter().any(|(_, e)| *e == id), "{id} covers nothing");
        }
    }

    #[test]
    fn bound_report_verdicts() {
        assert!(BoundReport::upper("x", 1.0, 1.0).pass);
        assert!(BoundReport::upper("x", 1.0 + 5e-10, 1.0).pass);
        assert!(!BoundReport::upper("x", 1.1, 1.0).pass);
        assert!(BoundReport::identity("x", 1.0, 1.0 + 5e-10, 1e-9).pass);
        assert!(!BoundReport::identity("x", 1.0, 1.1, 1e-9).pass);
        assert!(BoundReport::informational("x", 5.0, 1.0).pass);
        assert!(BoundReport::informational("x", 5.0, 1.0).line().starts_with("INFO"));
    }

    #[test]
    fn unknown_experiment_rejected() {
        assert!(ExperimentConfig::defaults("E10", 1).is_err());
        let mut cfg = ExperimentConfig::defaults("E2", 1).unwrap();
        cfg.id = "EX".into();
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn small_experiments_pass() {
        for id in ["E2", "E3", "E4", "E5", "E6", "E8"] {
            let mut cfg = ExperimentConfig::defaults(id, 1).unwrap();
            if id == "E2" {
                cfg.trials = 5;
            }
            let report = run_experiment(&cfg).unwrap();
            assert!(report.pass, "{id}:\n{}", report.text());
        }
    }

    #[test]
    fn e1_passes_with_reduced_trials() {
        let mut cfg = ExperimentConfig::defaults("E1", 1).unwrap();
        cfg.trials = 3;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.pass, "{}", report.text());
    }

    #[test]
    fn e7_passes_with_reduced_trials() {
        let mut cfg = ExperimentConfig::defaults("E7", 1).unwrap();
        cfg.trials = 500;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.pass, "{}", report.text());
    }

    #[test]
    fn e9_is_informational() {
        let mut cfg = ExperimentConfig::defaults("E9", 1).unwrap();
        cfg.trials = 200;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.pass);
        assert!(report.reports.iter().all(|r| r.informational));
        assert!(report.reports[0].bound > 1.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = {
            let mut c = ExperimentConfig::defaults("E2", 9).unwrap();
            c.trials = 3;
            c
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        for (x, y) in a.reports.iter().zip(&b.reports) {
            assert!((x.measured - y.measured).abs() <= 1e-12);
            assert_eq!(x.pass, y.pass);
        }
    }
}
