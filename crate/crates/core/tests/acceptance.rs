//! Acceptance gate: the ten headline checks, each printing one PASS or FAIL
//! line (visible with `cargo test --test acceptance -- --nocapture`) and
//! failing the test on a FAIL verdict.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use forrelab::circuit::qma_verifier_accept_prob;
use forrelab::fock::{
    enumerate_basis, hopping, projector, tuple_multiset, FockBasis, Frame, HoppingOrder,
    ProjectorKind, Sector,
};
use forrelab::fock::{lambda_succ, success_norm};
use forrelab::hypercube::{fwht, gamma_spectrum, good_multiset};
use forrelab::instances::{
    forrelation_matrices, sample_strong, sample_u_given_s, spectral_forrelation, StrongParams,
};
use forrelab::linalg::{max_eigenvalue, min_eigenvalue, op_norm};
use forrelab::oracle::{
    channel_equivalence_deviation, exp_drift_norm, hopping_drift_norm, random_oracle_program,
};
use forrelab::poly::{
    akraus, condensate_restricted_norm, e0, e1, eval_cheb, flat, flat_condensate_error,
    tcheby_cheb_coeffs,
};
use forrelab::rng::{labels, stream_rng};
use forrelab::sampler::{joint_bound, toy_family, wilson_lower, HybridSampler};

fn verdict(label: &str, ok: bool) {
    println!("{} {label}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "FAIL {label}");
}

fn fixed(n: u32, ell: usize) -> Arc<FockBasis> {
    enumerate_basis(n, Sector::Fixed(ell)).unwrap()
}

#[test]
fn c01_channel_equivalence() {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = stream_rng(seed, labels::PROGRAM);
        let ys: Vec<u64> = (0..2).map(|_| rng.random_range(1..4u64)).collect();
        let program = random_oracle_program(2, &ys, &mut rng);
        worst = worst.max(channel_equivalence_deviation(&program, 2, 2, 0.15).unwrap());
    }
    verdict(
        &format!("channel equivalence, 20 programs at n=2 ell=2 T=2: worst deviation {worst:.3e}"),
        worst <= 1e-8,
    );
}

#[test]
fn c02_diagonal_action() {
    let mut worst_gamma = 0.0f64;
    let mut worst_identity = 0.0f64;
    for ell in 1..=3usize {
        let basis = fixed(3, ell);
        let id = DMatrix::<f64>::identity(basis.dim(), basis.dim());
        for y in 0..8u64 {
            let g_mom = hopping(&basis, y, HoppingOrder::Single).unwrap();
            let g_pos = g_mom.to_frame(Frame::Position).unwrap().to_dense();
            let g2 = &g_pos * &g_pos;
            for (i, tuple) in basis.states().iter().enumerate() {
                let s = tuple_multiset(3, tuple).unwrap();
                let gamma = gamma_spectrum(&s).unwrap().at(y);
                for j in 0..basis.dim() {
                    let expected = if i == j { gamma } else { 0.0 };
                    worst_gamma = worst_gamma.max((g2[(j, i)] - expected).abs());
                }
            }
            let g = g_mom.to_dense();
            let h = hopping(&basis, y, HoppingOrder::Double).unwrap().to_dense();
            worst_identity = worst_identity.max((&g * &g - h - &id).abs().max());
        }
    }
    verdict(
        &format!(
            "diagonal action at n=3, ell<=3: gamma error {worst_gamma:.3e}, \
             G^2 = H + id error {worst_identity:.3e}"
        ),
        worst_gamma <= 1e-9 && worst_identity <= 1e-12,
    );
}

#[test]
fn c03_psd_sandwich() {
    let kappa = 0.1;
    let mut worst_eig = f64::INFINITY;
    let mut worst_diag = 0.0f64;
    let mut worst_off = 0.0f64;
    for seed in 0..50u64 {
        let s = good_multiset(10, 4, seed).unwrap();
        let inst = sample_u_given_s(s, kappa, seed).unwrap();
        let mats = forrelation_matrices(&inst, kappa).unwrap();
        worst_eig = worst_eig
            .min(min_eigenvalue(&(&mats.m_s - &mats.a_s)))
            .min(min_eigenvalue(&(&mats.b_s - &mats.m_s)));
        let ell = inst.s().ell() as f64;
        for i in 0..mats.b_s.nrows() {
            for j in 0..mats.b_s.ncols() {
                let expected = if i == j { 0.55 } else { kappa / ell };
                let err = (mats.b_s[(i, j)] - expected).abs();
                if i == j {
                    worst_diag = worst_diag.max(err);
                } else {
                    worst_off = worst_off.max(err);
                }
            }
        }
    }
    verdict(
        &format!(
            "PSD sandwich, 50 good S at n=10 ell=16: min eigenvalue {worst_eig:.3e}, \
             B diagonal error {worst_diag:.3e}, off-diagonal error {worst_off:.3e}"
        ),
        worst_eig >= -1e-9 && worst_diag <= 1e-12 && worst_off <= 1e-12,
    );
}

#[test]
fn c04_condensate_norm_bounds() {
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=3u32 {
        let basis = fixed(n, 4);
        for y in 1..1u64 << n {
            let g = hopping(&basis, y, HoppingOrder::Single).unwrap().to_dense();
            let h = hopping(&basis, y, HoppingOrder::Double).unwrap().to_dense();
            for r in 0..=4usize {
                let con = projector(&basis, ProjectorKind::Con(r)).unwrap().op().to_dense();
                let rf = r as f64;
                let g_bound = rf.sqrt() + (2.0 + 4.0 * rf).sqrt();
                let h_bound = 9.0 * rf + 9.0;
                worst = worst
                    .max(op_norm(&(&g * &con)) - g_bound)
                    .max(op_norm(&(&h * &con)) - h_bound);
            }
        }
    }
    verdict(
        &format!("hopping norms on condensates at n<=3 ell=4: worst excess {worst:.3e}"),
        worst <= 1e-9,
    );
}

#[test]
fn c05_quasi_even_drift() {
    let basis = fixed(2, 4);
    let (big_r, kappa) = (2usize, 0.1);
    let scale = (big_r as f64).powi(5) / (basis.fixed_ell().unwrap() as f64).sqrt();
    let mut worst = f64::NEG_INFINITY;
    for y in 1..4u64 {
        worst = worst.max(hopping_drift_norm(&basis, y, big_r).unwrap() - scale);
        for d in [1usize, 2] {
            let exp_bound = (2.0 * scale).powf(d as f64 / 4.0);
            let sqrt_bound = (64.0 * scale).powf(d as f64 / 4.0);
            worst = worst
                .max(exp_drift_norm(&basis, y, kappa, big_r, d, false).unwrap() - exp_bound)
                .max(exp_drift_norm(&basis, y, kappa, big_r, d, true).unwrap() - sqrt_bound);
        }
    }
    verdict(
        &format!("quasi-even drift at n=2 ell=4 R=2, d in {{1,2}}: worst excess {worst:.3e}"),
        worst <= 1e-9,
    );
}

#[test]
fn c06_success_norm() {
    let basis = fixed(2, 4);
    let (v, r, o) = (2.0f64, 2usize, 0usize);
    let ell = 4.0f64;
    let bound = 2.0
        * (4.0 * v * ((r as f64).powi(3) + v * (r as f64).powi(2)) * ell.sqrt()
            / 2f64.powf(2.0 / 4.0))
        .powf(v);
    let qec = projector(&basis, ProjectorKind::QEC(r, o)).unwrap().op().to_dense();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_dev = 0.0f64;
    for z1 in 1..4u64 {
        for z2 in z1 + 1..4 {
            let norm = success_norm(&basis, &[z1, z2], r, o).unwrap();
            let lambda =
                lambda_succ(&basis, &[z1, z2]).unwrap().to_frame(Frame::Momentum).unwrap();
            let full = &qec * lambda.to_dense() * &qec;
            let brute = max_eigenvalue(&full).max(0.0);
            worst_excess = worst_excess.max(norm - bound);
            worst_dev = worst_dev.max((norm - brute).abs());
        }
    }
    verdict(
        &format!(
            "success norm at n=2 ell=4 v=2 r=2 o=0: excess {worst_excess:.3e}, \
             brute-force deviation {worst_dev:.3e}"
        ),
        worst_excess <= 0.0 && worst_dev <= 1e-9,
    );
}

#[test]
fn c07_counting_bound() {
    let basis = fixed(2, 4);
    let mut worst = f64::NEG_INFINITY;
    for r in 0..=2usize {
        for o in 0..=1usize {
            let diag = projector(&basis, ProjectorKind::QEC(r, o)).unwrap().diag();
            let tuples: Vec<&Vec<u8>> = basis
                .states()
                .iter()
                .zip(&diag)
                .filter(|(_, &d)| d == 1.0)
                .map(|(t, _)| t)
                .collect();
            for d in 0..=2usize {
                let exponent = d as f64 / 2.0 + o as f64;
                let bound = 2f64.powi(3).powf(exponent)
                    * (r as f64 + d as f64 / 2.0 + o as f64).max(1.0).powf(exponent);
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
    verdict(
        &format!("counting bound, exhaustive at n=2 ell=4 d<=2: worst excess {worst:.3e}"),
        worst <= 0.0,
    );
}

#[test]
fn c08_polynomial_toolkit() {
    let mut worst_tcheby = f64::NEG_INFINITY;
    for (s, d) in [(16u64, 12usize), (64, 30)] {
        let coeffs = tcheby_cheb_coeffs(s, d);
        let bound = 2.0 * (-(d as f64) * d as f64 / (2.0 * s as f64)).exp();
        for i in 0..=2000 {
            let x = -1.0 + i as f64 / 1000.0;
            worst_tcheby =
                worst_tcheby.max((x.powi(s as i32) - eval_cheb(&coeffs, x)).abs() - bound);
        }
    }

    let basis = fixed(2, 4);
    let m = 11.9f64;
    let diag_sq = |y: u64| {
        let g = forrelab::fock::hopping_position_diagonal(&basis, y, HoppingOrder::Single)
            .unwrap();
        let mut d = vec![0.0; basis.dim()];
        for &(row, _, v) in g.entries() {
            d[row] = v * v;
        }
        d
    };
    let w_op = {
        let g = forrelab::fock::hopping_position_diagonal(&basis, 1, HoppingOrder::Single)
            .unwrap();
        g.compose(&g).unwrap()
    };
    let mut worst_flat = f64::NEG_INFINITY;
    for eps in [1e-2f64, 1e-4] {
        for r in [0usize, 2] {
            let fp = flat(m, r, eps).unwrap();
            worst_flat = worst_flat.max(flat_condensate_error(&w_op, &fp, r).unwrap() - eps);
        }
    }

    let (kappa, eps, r) = (0.25f64, 1e-2f64, 2usize);
    let (g1, g2) = (diag_sq(1), diag_sq(2));
    let mut worst_akraus = f64::NEG_INFINITY;
    for xs in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
        let ak = akraus(eps, &xs, kappa, m, r).unwrap();
        let e = |x: u8, g: f64| if x == 0 { e0(kappa, g) } else { e1(kappa, g) };
        let values: Vec<f64> = (0..basis.dim())
            .map(|i| {
                e(xs[0], g1[i]) * e(xs[1], g2[i]) - ak.eval_scalars(&[g1[i], g2[i]]).unwrap()
            })
            .collect();
        worst_akraus =
            worst_akraus.max(condensate_restricted_norm(&basis, &values, r).unwrap() - eps);
    }

    verdict(
        &format!(
            "polynomial toolkit: tcheby excess {worst_tcheby:.3e}, flat excess \
             {worst_flat:.3e}, AKraus excess at T=2 {worst_akraus:.3e}"
        ),
        worst_tcheby <= 0.0 && worst_flat <= 0.0 && worst_akraus <= 0.0,
    );
}

#[test]
fn c09_sampler_lower_bound() {
    let (t, q) = (2usize, 3u32);
    let fam = toy_family(t, q, 1).unwrap();
    let mut sampler =
        HybridSampler::new(&fam.program, fam.instance.s(), fam.instance.u(), fam.witness_star)
            .unwrap();
    let (hits, trials) =
        sampler.empirical_round_rate(&[], fam.witness_star, 10_000, 1).unwrap();
    let round_lower = wilson_lower(hits, trials, 2.326);
    let mut joint_ok = true;
    let mut joint_summary = Vec::new();
    for v in 1..=3usize {
        let (succ, trials) = sampler.empirical_joint_rate(v, 2_000, 1).unwrap();
        let lower = wilson_lower(succ, trials, 2.326);
        joint_ok &= lower >= joint_bound(t, v, q);
        joint_summary.push(format!("v={v}: {lower:.3e} vs {:.3e}", joint_bound(t, v, q)));
    }
    verdict(
        &format!(
            "sampler at n=10 ell=16 t=2: per-round 99% lower limit {round_lower:.4} vs \
             1/144, joint {}",
            joint_summary.join(", ")
        ),
        round_lower >= 1.0 / 144.0 && joint_ok,
    );
}

#[test]
fn c10_verifier_identity() {
    let mut worst_direct = 0.0f64;
    let mut worst_alpha = 0.0f64;
    for i in 0..100u64 {
        let n = 2 + (i % 3) as u32;
        let inst = sample_strong(&StrongParams { n, ell: 4, kappa: 0.2, seed: i }).unwrap();
        let dim = 1usize << n;
        let mut rng = stream_rng(i, labels::WITNESS);
        let mut witness: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm: f64 = witness.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        witness.iter_mut().for_each(|a| *a /= norm);
        let accept = qma_verifier_accept_prob(&inst, &witness).unwrap();

        let support = inst.s().distinct();
        let mut projected = vec![Complex64::ZERO; dim];
        for &x in &support {
            projected[x as usize] = witness[x as usize];
        }
        fwht(&mut projected, true).unwrap();
        let direct: f64 = inst.u().iter().map(|&y| projected[y as usize].norm_sqr()).sum();
        worst_direct = worst_direct.max((accept - direct).abs());

        let (alpha, top) = spectral_forrelation(&inst).unwrap();
        if alpha > 0.0 {
            let top: Vec<Complex64> = top.iter().map(|&a| Complex64::new(a, 0.0)).collect();
            let accept_top = qma_verifier_accept_prob(&inst, &top).unwrap();
            worst_alpha = worst_alpha.max((accept_top - alpha).abs());
        }
    }
    verdict(
        &format!(
            "verifier identity over 100 pairs: projector-formula deviation \
             {worst_direct:.3e}, top-witness alpha deviation {worst_alpha:.3e}"
        ),
        worst_direct <= 1e-9 && worst_alpha <= 1e-8,
    );
}
