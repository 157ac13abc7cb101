//! Polynomial families for approximating exponentials of hopping operators:
//! truncated Taylor, Chebyshev, truncated Chebyshev expansions of z^s,
//! truncated square roots, the flat exponential approximation, and the
//! AKraus multivariate evaluator.
//!
//! Operator-level evaluation exploits that every operator involved is
//! diagonal in the position Fock frame, so polynomials and exponentials are
//! applied entrywise on the shared diagonal and errors are computed exactly.

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fock::{projector, Frame, ModeOperator, ProjectorKind};
use crate::linalg::op_norm;

/// A real polynomial in the monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds from monomial coefficients, low degree first.
    pub fn from_coeffs(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    /// The zero polynomial.
    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    /// A constant.
    pub fn constant(c: f64) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// Degree (0 for constants and the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Monomial coefficients, low degree first.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Sum of absolute coefficients.
    pub fn coeff_one_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Horner evaluation.
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    /// self + other.
    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; len];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Polynomial::from_coeffs(out)
    }

    /// scalar * self.
    pub fn scale(&self, scalar: f64) -> Polynomial {
        Polynomial::from_coeffs(self.coeffs.iter().map(|&c| c * scalar).collect())
    }

    /// self * other.
    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::from_coeffs(out)
    }
}

/// Taylor_d(z) = sum_{j<=d} z^j / j!. Coefficients below the f64 floor
/// underflow to zero, which is harmless at the argument sizes used here.
pub fn taylor(d: usize) -> Polynomial {
    let mut coeffs = Vec::with_capacity(d + 1);
    let mut c = 1.0f64;
    coeffs.push(c);
    for j in 1..=d {
        c /= j as f64;
        coeffs.push(c);
    }
    Polynomial::from_coeffs(coeffs)
}

/// Chebyshev polynomial of the first kind, via the recurrence.
pub fn cheby(k: usize) -> Polynomial {
    let mut prev = Polynomial::constant(1.0);
    if k == 0 {
        return prev;
    }
    let mut cur = Polynomial::from_coeffs(vec![0.0, 1.0]);
    let two_z = Polynomial::from_coeffs(vec![0.0, 2.0]);
    for _ in 1..k {
        let next = two_z.mul(&cur).add(&prev.scale(-1.0));
        prev = cur;
        cur = next;
    }
    cur
}

/// Chebyshev coefficients a_0..a_d of the degree-d truncation of z^s, from
/// the closed-form binomial identity: a_k = 2^{1-s} C(s, (s-k)/2) for k > 0
/// with k = s mod 2, a_0 = 2^{-s} C(s, s/2), zero otherwise.
pub fn tcheby_cheb_coeffs(s: u64, d: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; d + 1];
    let sf = s as f64;
    for (k, c) in coeffs.iter_mut().enumerate() {
        let k64 = k as u64;
        if k64 > s || (s - k64) % 2 != 0 {
            continue;
        }
        let j = ((s - k64) / 2) as f64;
        let ln_binom = ln_gamma(sf + 1.0) - ln_gamma(j + 1.0) - ln_gamma(sf - j + 1.0);
        let lead = if k == 0 { -sf } else { 1.0 - sf };
        *c = (lead * std::f64::consts::LN_2 + ln_binom).exp();
    }
    coeffs
}

/// TCheby_{s,d} as a monomial polynomial. Only sensible for small degrees;
/// large instances must stay in the Chebyshev basis (see [`eval_cheb`]).
pub fn tcheby(s: u64, d: usize) -> Result<Polynomial> {
    if d > 200 {
        return Err(Error::CapExceeded(
            "monomial form of a truncated Chebyshev series beyond degree 200".into(),
        ));
    }
    let a = tcheby_cheb_coeffs(s, d);
    let mut out = Polynomial::zero();
    for (k, &ak) in a.iter().enumerate() {
        if ak != 0.0 {
            out = out.add(&cheby(k).scale(ak));
        }
    }
    Ok(out)
}

/// Clenshaw evaluation of sum_k coeffs[k] Cheby_k(x).
pub fn eval_cheb(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0f64;
    let mut b2 = 0.0f64;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = c + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// The generalized binomial coefficient C(1/2, k).
pub fn binom_half(k: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (0.5 - i as f64) / (i as f64 + 1.0);
    }
    acc
}

/// Truncated binomial expansion of sqrt(1 - u/2):
/// TSqrt(u) = sum_{k<=d''} C(1/2,k) (-1/2)^k u^k.
pub fn tsqrt(d2: usize) -> Polynomial {
    let coeffs = (0..=d2).map(|k| binom_half(k) * (-0.5f64).powi(k as i32)).collect();
    Polynomial::from_coeffs(coeffs)
}

/// p0(z) = 1 - z^2, which is exactly e0 at z = e^{-kappa gamma / 2}.
pub fn p0() -> Polynomial {
    Polynomial::from_coeffs(vec![1.0, 0.0, -1.0])
}

/// p1(z) = sqrt(2) z TSqrt(z^2), approximating e1 at z = e^{-kappa gamma/2}.
pub fn p1(d2: usize) -> Polynomial {
    let ts = tsqrt(d2);
    let mut coeffs = vec![0.0; 2 * ts.degree() + 2];
    for (k, &c) in ts.coeffs().iter().enumerate() {
        coeffs[2 * k + 1] = std::f64::consts::SQRT_2 * c;
    }
    Polynomial::from_coeffs(coeffs)
}

/// The flat approximation of e^{-z} on z >= 0: the degree-d' truncated
/// Chebyshev expansion of x^w composed with x = Taylor_d(-z/w).
///
/// The monomial coefficients of the outer series grow like (1+sqrt(2))^{d'},
/// far past 1e12 at the parameters used here, so the polynomial is stored
/// and evaluated in the Chebyshev basis (Clenshaw at x = Taylor_d(-z/w));
/// the two routes agree to far below machine precision at these degrees.
#[derive(Debug, Clone)]
pub struct FlatPoly {
    m: f64,
    r: usize,
    epsilon: f64,
    w: u64,
    d_prime: usize,
    d: usize,
    cheb: Vec<f64>,
    proven_regime: bool,
}

impl FlatPoly {
    /// Condensate growth constant M.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Target error.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Inner exponent scale w (rounded to an integer power).
    pub fn w(&self) -> u64 {
        self.w
    }

    /// Outer Chebyshev truncation degree d'.
    pub fn d_prime(&self) -> usize {
        self.d_prime
    }

    /// Degree in z of the composition sum_k b_k Taylor_d(-(k/w) z).
    pub fn degree(&self) -> usize {
        self.d
    }

    /// Whether the parameters sit inside the proven validity regime
    /// (d' >= 10 without clamping).
    pub fn proven_regime(&self) -> bool {
        self.proven_regime
    }

    /// Condensate radius r the degree was budgeted for.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Evaluates the approximation at z.
    pub fn eval(&self, z: f64) -> f64 {
        let x = taylor_eval(self.d, -z / self.w as f64);
        eval_cheb(&self.cheb, x)
    }
}

/// Horner-free evaluation of Taylor_d at small arguments: accumulate terms
/// until they underflow or the degree runs out.
fn taylor_eval(d: usize, z: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for j in 1..=d {
        term *= z / j as f64;
        let next = sum + term;
        if next == sum {
            break;
        }
        sum = next;
    }
    sum
}

/// Builds Flat_epsilon for an operator with condensate constant M and
/// radius r: w = round(36 M^2 ln(2/eps)), d' = ceil(sqrt(72 M^2 ln^2(2/eps))),
/// d = ceil(4((9M+1) ln(1/eps) + ln 2) + r).
pub fn flat(m: f64, r: usize, epsilon: f64) -> Result<FlatPoly> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Parameter(format!("flat approximation needs M > 0, got {m}")));
    }
    if !(epsilon > 0.0) || epsilon > 1.0 / std::f64::consts::E {
        return Err(Error::Parameter(format!(
            "flat approximation needs epsilon in (0, 1/e], got {epsilon}"
        )));
    }
    let ln2e = (2.0 / epsilon).ln();
    let ln1e = (1.0 / epsilon).ln();
    let w = (36.0 * m * m * ln2e).round().max(1.0) as u64;
    let d_prime_raw = (72.0 * m * m * ln2e * ln2e).sqrt().ceil() as usize;
    let proven_regime = d_prime_raw >= 10;
    let d_prime = d_prime_raw.max(10);
    let d = (4.0 * ((9.0 * m + 1.0) * ln1e + std::f64::consts::LN_2) + r as f64).ceil() as usize;
    let cheb = tcheby_cheb_coeffs(w, d_prime);
    Ok(FlatPoly { m, r, epsilon, w, d_prime, d, cheb, proven_regime })
}

/// Extracts the position-frame diagonal of an operator, rejecting anything
/// with off-diagonal entries.
fn position_diagonal(w_op: &ModeOperator) -> Result<Vec<f64>> {
    if w_op.frame() != Frame::Position {
        return Err(Error::Parameter("operator must be given in the position frame".into()));
    }
    let mut diag = vec![0.0; w_op.dim()];
    for &(row, col, v) in w_op.entries() {
        if row != col {
            return Err(Error::Parameter("operator is not position-diagonal".into()));
        }
        diag[row] = v;
    }
    Ok(diag)
}

/// ||diag(values) Con_r|| over a fixed sector, computed exactly. The
/// workhorse behind every condensate-restricted approximation error here.
pub fn condensate_restricted_norm(
    basis: &std::sync::Arc<crate::fock::FockBasis>,
    values: &[f64],
    r: usize,
) -> Result<f64> {
    if values.len() != basis.dim() {
        return Err(Error::Dimension("diagonal length mismatch".into()));
    }
    let con = projector(basis, ProjectorKind::Con(r))?
        .op()
        .to_frame(Frame::Position)?
        .to_dense();
    let mut m = con;
    for (i, &scale) in values.iter().enumerate() {
        for j in 0..m.ncols() {
            m[(i, j)] *= scale;
        }
    }
    Ok(op_norm(&m))
}

/// ||diag(f(gamma)) Con_r|| for a position-diagonal operator.
pub fn diagonal_condensate_error(
    w_op: &ModeOperator,
    f: impl Fn(f64) -> f64,
    r: usize,
) -> Result<f64> {
    let diag = position_diagonal(w_op)?;
    let values: Vec<f64> = diag.iter().map(|&g| f(g)).collect();
    condensate_restricted_norm(w_op.basis(), &values, r)
}

/// ||(Taylor_d(-W/s) - e^{-W/s}) Con_r|| for a position-diagonal W.
pub fn taylor_condensate_error(w_op: &ModeOperator, s: f64, d: usize, r: usize) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Parameter("Taylor scale s must be positive".into()));
    }
    let t = taylor(d);
    diagonal_condensate_error(w_op, |g| t.eval(-g / s) - (-g / s).exp(), r)
}

/// ||(e^{-W} - Flat(W)) Con_r|| for a position-diagonal W.
pub fn flat_condensate_error(w_op: &ModeOperator, fp: &FlatPoly, r: usize) -> Result<f64> {
    diagonal_condensate_error(w_op, |g| (-g).exp() - fp.eval(g), r)
}

/// Kraus diagonal entries for one purified query branch.
pub fn e0(kappa: f64, gamma: f64) -> f64 {
    1.0 - (-kappa * gamma).exp()
}

/// The complementary Kraus entry, with e0^2 + e1^2 = 1.
pub fn e1(kappa: f64, gamma: f64) -> f64 {
    let e = (-kappa * gamma).exp();
    (e * (2.0 - e)).sqrt()
}

/// Multivariate approximator of prod_i e_{x_i}(W_i) over commuting
/// position-diagonal operators:
/// sum over (k_1..k_T) of (prod c^{(x_i)}_{k_i}) Flat(kappa sum k_i W_i / 2),
/// with c^{(x)} the monomial coefficients of p_x and a per-term Flat tuned
/// to the term's condensate constant.
#[derive(Debug, Clone)]
pub struct AKrausEvaluator {
    xs: Vec<u8>,
    kappa: f64,
    epsilon: f64,
    d2: usize,
    coeff_lists: Vec<Vec<(usize, f64)>>,
    flats: HashMap<usize, FlatPoly>,
}

impl AKrausEvaluator {
    /// Query outcomes x_1..x_T.
    pub fn xs(&self) -> &[u8] {
        &self.xs
    }

    /// Inner truncation degree d''.
    pub fn d2(&self) -> usize {
        self.d2
    }

    /// Largest z-degree among the per-term flat approximations.
    pub fn degree_bound(&self) -> usize {
        self.flats.values().map(|f| f.degree()).max().unwrap_or(0)
    }

    /// Target overall error.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Scalar evaluation at one joint diagonal point (gamma_1..gamma_T).
    pub fn eval_scalars(&self, gammas: &[f64]) -> Result<f64> {
        if gammas.len() != self.xs.len() {
            return Err(Error::Dimension(format!(
                "{} diagonal values for {} queries",
                gammas.len(),
                self.xs.len()
            )));
        }
        let mut total = 0.0f64;
        // Depth-first product over the sparse coefficient lists, carrying
        // the k-sum (which keys the per-term flat) and sum k_i gamma_i.
        let mut stack: Vec<(usize, f64, usize, f64)> = vec![(0, 1.0, 0, 0.0)];
        while let Some((i, coeff, jsum, weighted)) = stack.pop() {
            if i == self.xs.len() {
                let flat_val = if jsum == 0 {
                    1.0
                } else {
                    self.flats[&jsum].eval(self.kappa * weighted / 2.0)
                };
                total += coeff * flat_val;
                continue;
            }
            for &(k, c) in &self.coeff_lists[i] {
                stack.push((i + 1, coeff * c, jsum + k, weighted + k as f64 * gammas[i]));
            }
        }
        Ok(total)
    }
}

/// Builds the AKraus evaluator for outcomes `xs`, target error `epsilon`,
/// Kraus parameter `kappa`, per-operator condensate constant `m_w`, and
/// condensate radius `r`.
pub fn akraus(
    epsilon: f64,
    xs: &[u8],
    kappa: f64,
    m_w: f64,
    r: usize,
) -> Result<AKrausEvaluator> {
    let t = xs.len();
    if t == 0 {
        return Err(Error::Parameter("AKraus needs at least one query".into()));
    }
    if xs.iter().any(|&x| x > 1) {
        return Err(Error::Parameter("query outcomes must be bits".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(kappa > 0.0) || !(m_w > 0.0) {
        return Err(Error::Parameter("AKraus needs epsilon in (0,1), kappa > 0, M > 0".into()));
    }
    let d2 = (4.0 + 1.5 * ((t as f64).ln() + (1.0 / epsilon).ln())).ceil() as usize;
    let coeff_lists: Vec<Vec<(usize, f64)>> = xs
        .iter()
        .map(|&x| {
            let p = if x == 0 { p0() } else { p1(d2) };
            p.coeffs()
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(k, &c)| (k, c))
                .collect()
        })
        .collect();
    let eps_term = epsilon / 2f64.powi(t as i32 + 1);
    let max_k: usize = coeff_lists.iter().map(|l| l.last().map_or(0, |&(k, _)| k)).sum();
    let mut flats = HashMap::new();
    for j in 1..=max_k {
        let m_j = kappa * j as f64 * m_w / 2.0;
        flats.insert(j, flat(m_j, r, eps_term.min(1.0 / std::f64::consts::E))?);
    }
    Ok(AKrausEvaluator { xs: xs.to_vec(), kappa, epsilon, d2, coeff_lists, flats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_basis, hopping_position_diagonal, HoppingOrder, Sector};

    #[test]
    fn cheby_base_cases_and_trig_identity() {
        assert_eq!(cheby(0).coeffs(), &[1.0]);
        assert_eq!(cheby(1).coeffs(), &[0.0, 1.0]);
        assert_eq!(cheby(2).coeffs(), &[-1.0, 0.0, 2.0]);
        for k in 0..12usize {
            let p = cheby(k);
            for i in 0..=20 {
                let theta = i as f64 * 0.15;
                let err = (p.eval(theta.cos()) - (k as f64 * theta).cos()).abs();
                assert!(err < 1e-10, "k={k} theta={theta}");
            }
        }
    }

    #[test]
    fn taylor_approximates_exp() {
        let t = taylor(20);
        for z in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            assert!((t.eval(z) - z.exp()).abs() < 1e-12);
            assert!((taylor_eval(20, z) - z.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn tcheby_pointwise_error_bound() {
        for (s, d) in [(16u64, 12usize), (64, 30)] {
            let p = tcheby(s, d).unwrap();
            let a = tcheby_cheb_coeffs(s, d);
            assert!(a.iter().all(|c| c.abs() <= 1.0 + 1e-12));
            let bound = 2.0 * (-(d as f64).powi(2) / (2.0 * s as f64)).exp();
            for i in 0..=10_000 {
                let z = -1.0 + 2.0 * i as f64 / 10_000.0;
                let err = (z.powi(s as i32) - p.eval(z)).abs();
                assert!(err <= bound, "s={s} d={d} z={z}: {err} > {bound}");
                // Monomial and Clenshaw routes agree at these degrees.
                assert!((p.eval(z) - eval_cheb(&a, z)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn binom_half_values() {
        assert_eq!(binom_half(0), 1.0);
        assert!((binom_half(1) - 0.5).abs() < 1e-15);
        assert!((binom_half(2) + 0.125).abs() < 1e-15);
        for k in 1..40usize {
            assert!(binom_half(k).abs() < 1.0);
        }
    }

    #[test]
    fn p1_matches_its_definition_and_coefficient_sums() {
        let d2 = 9usize;
        let ts = tsqrt(d2);
        let p = p1(d2);
        for i in 0..=50 {
            let z = i as f64 / 50.0;
            let direct = std::f64::consts::SQRT_2 * z * ts.eval(z * z);
            assert!((p.eval(z) - direct).abs() < 1e-14);
        }
        assert!(p0().coeff_one_norm() <= 2.0 + 1e-12);
        for d2 in 1..20usize {
            assert!(p1(d2).coeff_one_norm() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn p0_p1_track_the_kraus_entries() {
        let kappa = 0.25f64;
        let d2 = 12usize;
        let p1 = p1(d2);
        for i in 0..=40 {
            let gamma = i as f64 * 0.2;
            let z = (-kappa * gamma / 2.0).exp();
            assert!((p0().eval(z) - e0(kappa, gamma)).abs() < 1e-14);
            assert!((p1.eval(z) - e1(kappa, gamma)).abs() < 2e-4);
        }
    }

    #[test]
    fn e0_e1_are_a_kraus_pair() {
        for kappa in [0.0, 0.1, 0.5] {
            for gamma in [0.0, 0.3, 2.0, 16.0] {
                let (a, b) = (e0(kappa, gamma), e1(kappa, gamma));
                assert!((a * a + b * b - 1.0).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            }
        }
        assert_eq!(e0(0.0, 3.0), 0.0);
        assert!((e1(0.0, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_parameter_validation() {
        assert!(flat(0.0, 0, 0.01).is_err());
        assert!(flat(2.0, 0, 0.5).is_err()); // epsilon > 1/e
        assert!(flat(2.0, 0, 0.01).is_ok());
        let clamped = flat(0.3, 0, 0.3).unwrap();
        assert!(!clamped.proven_regime());
        assert_eq!(clamped.d_prime(), 10);
    }

    #[test]
    fn flat_scalar_accuracy_and_degree() {
        let m = 11.9f64;
        for &eps in &[1e-2f64, 1e-4] {
            for &r in &[0usize, 2] {
                let fp = flat(m, r, eps).unwrap();
                assert!(fp.proven_regime());
                let cap = 100.0 * m * (1.0 / eps).ln() * (r as f64 + 1.0);
                assert!((fp.degree() as f64) <= cap, "degree {} > {cap}", fp.degree());
                assert!((fp.eval(0.0) - 1.0).abs() <= eps);
                for i in 0..=400 {
                    let z = i as f64 * 0.05;
                    let err = (fp.eval(z) - (-z).exp()).abs();
                    assert!(err <= eps, "eps={eps} r={r} z={z}: {err}");
                }
            }
        }
        for &m in &[1.0f64, 5.0, 11.9] {
            for &r in &[0usize, 2, 4] {
                for &eps in &[1e-2f64, 1e-3] {
                    let fp = flat(m, r, eps).unwrap();
                    let cap = 100.0 * m * (1.0 / eps).ln() * (r as f64 + 1.0);
                    assert!((fp.degree() as f64) <= cap);
                }
            }
        }
    }

    #[test]
    fn flat_chebyshev_route_matches_monomial_composition() {
        // At small parameters the monomial coefficients are still tame, so
        // the documented composition sum_k b_k Taylor_d(-(k/w) z) can be
        // evaluated directly and compared against the Clenshaw route.
        let fp = flat(0.3, 0, 0.3).unwrap();
        let mut monomial = Polynomial::zero();
        for (k, &ak) in fp.cheb.iter().enumerate() {
            if ak != 0.0 {
                monomial = monomial.add(&cheby(k).scale(ak));
            }
        }
        // Stay where the inner Taylor tail (argument d' z / w) is negligible.
        let t = taylor(fp.degree());
        for i in 0..=100 {
            let z = i as f64 * 0.01;
            let composed: f64 = monomial
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, &bk)| bk * t.eval(-(k as f64) * z / fp.w() as f64))
                .sum();
            assert!((composed - fp.eval(z)).abs() < 1e-9, "z={z}");
        }
    }

    #[test]
    fn taylor_condensate_error_within_lemma() {
        let b = enumerate_basis(2, Sector::Fixed(4)).unwrap();
        let m = 11.9f64;
        let s = 3.0 * m;
        for y in 1..4u64 {
            let w = hopping_position_diagonal(&b, y, HoppingOrder::Single)
                .unwrap()
                .compose(&hopping_position_diagonal(&b, y, HoppingOrder::Single).unwrap())
                .unwrap();
            for &eps in &[1e-3f64, 1e-6] {
                for &r in &[0usize, 2] {
                    let d = (4.0 * (1.0 / eps).ln()).ceil() as usize + r;
                    let err = taylor_condensate_error(&w, s, d, r).unwrap();
                    assert!(err <= eps, "y={y} eps={eps} r={r}: {err}");
                }
            }
            // s -> infinity drives the error to zero.
            assert!(taylor_condensate_error(&w, 1e9, 8, 4).unwrap() < 1e-12);
            // Negative control: outside the hypothesis s >= 3M the error
            // blows past any target.
            assert!(taylor_condensate_error(&w, 0.2, 2, 4).unwrap() > 1.0);
        }
    }

    #[test]
    fn flat_condensate_error_on_hopping_squares() {
        let b = enumerate_basis(2, Sector::Fixed(4)).unwrap();
        let m = 11.9f64;
        for y in 1..4u64 {
            let g = hopping_position_diagonal(&b, y, HoppingOrder::Single).unwrap();
            let w = g.compose(&g).unwrap();
            for &eps in &[1e-2f64, 1e-4] {
                for &r in &[0usize, 2] {
                    let fp = flat(m, r, eps).unwrap();
                    let err = flat_condensate_error(&w, &fp, r).unwrap();
                    assert!(err <= eps, "y={y} eps={eps} r={r}: {err}");
                }
            }
        }
    }

    #[test]
    fn akraus_single_query_matches_e0() {
        let kappa = 0.1f64;
        let eps = 1e-2f64;
        let ak = akraus(eps, &[0], kappa, 11.9, 2).unwrap();
        for i in 0..=40 {
            let gamma = i as f64 * 0.1;
            let approx = ak.eval_scalars(&[gamma]).unwrap();
            assert!((approx - e0(kappa, gamma)).abs() <= eps, "gamma={gamma}");
        }
    }

    #[test]
    fn akraus_two_query_operator_error() {
        let b = enumerate_basis(2, Sector::Fixed(4)).unwrap();
        let kappa = 0.1f64;
        let eps = 1e-2f64;
        let r = 2usize;
        let diag = |y: u64| -> Vec<f64> {
            let g = hopping_position_diagonal(&b, y, HoppingOrder::Single).unwrap();
            let mut d = vec![0.0; b.dim()];
            for &(row, _, v) in g.entries() {
                d[row] = v * v;
            }
            d
        };
        let (g1, g2) = (diag(1), diag(2));
        for xs in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            let ak = akraus(eps, &xs, kappa, 11.9, r).unwrap();
            let e = |x: u8, g: f64| if x == 0 { e0(kappa, g) } else { e1(kappa, g) };
            let values: Vec<f64> = (0..b.dim())
                .map(|i| {
                    let target = e(xs[0], g1[i]) * e(xs[1], g2[i]);
                    let approx = ak.eval_scalars(&[g1[i], g2[i]]).unwrap();
                    target - approx
                })
                .collect();
            let err = condensate_restricted_norm(&b, &values, r).unwrap();
            assert!(err <= eps, "xs={xs:?}: {err}");
        }
    }

    #[test]
    fn akraus_validation() {
        assert!(akraus(1e-2, &[], 0.1, 1.0, 0).is_err());
        assert!(akraus(1e-2, &[2], 0.1, 1.0, 0).is_err());
        assert!(akraus(0.0, &[0], 0.1, 1.0, 0).is_err());
        assert!(akraus(1e-2, &[0], 0.0, 1.0, 0).is_err());
    }
}
