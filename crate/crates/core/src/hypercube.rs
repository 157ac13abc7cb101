//! Bit strings over {0,1}^n, Walsh-Hadamard transforms, multisets, and the
//! gamma spectrum gamma_y^(S) = (sum_i (-1)^{y.s_i})^2 / ell.

use crate::error::{Error, Result};

/// An element of {0,1}^n with its width attached.
///
/// Carrying `n` on every value lets mixed-width arithmetic be rejected
/// instead of silently zero-extended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    value: u64,
    n: u32,
}

impl BitString {
    /// Wraps `value` as an n-bit string.
    pub fn new(value: u64, n: u32) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::Parameter(format!("bit width {n} outside 1..=63")));
        }
        if value >= (1u64 << n) {
            return Err(Error::Parameter(format!("value {value} needs more than {n} bits")));
        }
        Ok(Self { value, n })
    }

    /// The integer encoding under the fixed indexing (bit i of `value` is
    /// coordinate i of the string).
    pub fn value(&self) -> u64 {
        self.value
    }

    /// Bit width n.
    pub fn width(&self) -> u32 {
        self.n
    }

    /// Coordinatewise XOR (the group operation on {0,1}^n).
    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.check_width(other)?;
        Ok(Self { value: self.value ^ other.value, n: self.n })
    }

    /// F2 inner product x.y = parity of the AND of the two strings.
    pub fn dot(&self, other: &Self) -> Result<bool> {
        self.check_width(other)?;
        Ok(parity(self.value & other.value))
    }

    fn check_width(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "mixed widths {} and {}",
                self.n, other.n
            )));
        }
        Ok(())
    }
}

/// Parity of the popcount of `x`, i.e. the F2 inner product of raw encodings.
pub fn parity(x: u64) -> bool {
    x.count_ones() % 2 == 1
}

/// The sign (-1)^{x.y} as a float, on raw n-bit encodings.
pub fn sign(x: u64, y: u64) -> f64 {
    if parity(x & y) {
        -1.0
    } else {
        1.0
    }
}

/// An ordered multiset S = {s_1, ..., s_ell} of n-bit strings.
///
/// The element order is remembered (it is the sampling order), while all
/// spectral quantities depend only on the derived multiplicity vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multiset {
    n: u32,
    elements: Vec<u64>,
}

impl Multiset {
    /// Builds a multiset from raw n-bit encodings.
    pub fn new(n: u32, elements: Vec<u64>) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::Parameter(format!("bit width {n} outside 1..=63")));
        }
        if let Some(&bad) = elements.iter().find(|&&e| e >= (1u64 << n)) {
            return Err(Error::Parameter(format!("element {bad} needs more than {n} bits")));
        }
        Ok(Self { n, elements })
    }

    /// Bit width n.
    pub fn width(&self) -> u32 {
        self.n
    }

    /// Number of elements ell, counted with multiplicity.
    pub fn ell(&self) -> usize {
        self.elements.len()
    }

    /// The elements in their stored order, with repetitions.
    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    /// The distinct elements in increasing order.
    pub fn distinct(&self) -> Vec<u64> {
        let mut d = self.elements.clone();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Multiplicity vector indexed by all of {0,1}^n.
    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; 1usize << self.n];
        for &e in &self.elements {
            c[e as usize] += 1;
        }
        c
    }
}

/// The vector gamma_y^(S) for all y in {0,1}^n.
#[derive(Debug, Clone)]
pub struct GammaSpectrum {
    n: u32,
    ell: usize,
    values: Vec<f64>,
}

impl GammaSpectrum {
    /// Bit width n.
    pub fn width(&self) -> u32 {
        self.n
    }

    /// Boson / sample count ell.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// gamma values indexed by y; each lies in [0, ell] and gamma_0 = ell.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// gamma_y for a single y.
    pub fn at(&self, y: u64) -> f64 {
        self.values[y as usize]
    }
}

/// Scalars that the Walsh-Hadamard butterfly can act on.
pub trait FwhtScalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
{
}

impl FwhtScalar for f64 {}
impl FwhtScalar for num_complex::Complex64 {}

/// In-place fast Walsh-Hadamard transform.
///
/// With `normalized` the transform is orthogonal (entries +-2^{-n/2}) and is
/// its own inverse; without it the entries are +-1 and applying it twice
/// multiplies by the length. Cost O(n 2^n).
pub fn fwht<T: FwhtScalar>(v: &mut [T], normalized: bool) -> Result<()> {
    let len = v.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Dimension(format!("fwht length {len} is not a power of two")));
    }
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
    if normalized {
        let scale = 1.0 / (len as f64).sqrt();
        for x in v.iter_mut() {
            *x = *x * scale;
        }
    }
    Ok(())
}

/// Computes the gamma spectrum of `s` in one unnormalized WHT pass over the
/// multiplicity vector: gamma_y = c_y^2 / ell with c = WHT(counts).
pub fn gamma_spectrum(s: &Multiset) -> Result<GammaSpectrum> {
    let ell = s.ell();
    if ell == 0 {
        return Err(Error::Parameter("gamma spectrum of an empty multiset".into()));
    }
    let mut c: Vec<f64> = s.counts().iter().map(|&k| k as f64).collect();
    fwht(&mut c, false)?;
    let values = c.iter().map(|&cy| cy * cy / ell as f64).collect();
    Ok(GammaSpectrum { n: s.width(), ell, values })
}

/// Decides whether `s` is good: no non-trivial XOR identity
/// s_{i_1} ^ ... ^ s_{i_2k} = 0 with k in {1,2,3}.
///
/// Identities with a repeated index reduce to shorter ones, so scanning
/// strictly increasing index tuples is exhaustive. Cost O(ell^6); the k=3
/// scan is skipped for ell > 32 unless requested via [`is_good_with`].
pub fn is_good(s: &Multiset) -> bool {
    is_good_with(s, s.ell() > 32)
}

/// [`is_good`] with explicit control over skipping the k=3 (six-term) scan.
pub fn is_good_with(s: &Multiset, skip_k3: bool) -> bool {
    let e = s.elements();
    let ell = e.len();
    // k=1: a duplicate pair is a non-trivial two-term identity.
    for i in 0..ell {
        for j in i + 1..ell {
            if e[i] == e[j] {
                return false;
            }
        }
    }
    // k=2: four distinct indices XORing to zero.
    for i in 0..ell {
        for j in i + 1..ell {
            let xij = e[i] ^ e[j];
            for k in j + 1..ell {
                let xijk = xij ^ e[k];
                for l in k + 1..ell {
                    if xijk == e[l] {
                        return false;
                    }
                }
            }
        }
    }
    if skip_k3 || ell < 6 {
        return true;
    }
    // k=3: six distinct indices XORing to zero.
    for a in 0..ell {
        for b in a + 1..ell {
            let x2 = e[a] ^ e[b];
            for c in b + 1..ell {
                let x3 = x2 ^ e[c];
                for d in c + 1..ell {
                    let x4 = x3 ^ e[d];
                    for f in d + 1..ell {
                        let x5 = x4 ^ e[f];
                        for g in f + 1..ell {
                            if x5 == e[g] {
                                return false;
                            }
                        }
                    }
                }
            }
        }
    }
    true
}

/// Constructs a seeded good multiset of size 2^m over n bits.
///
/// Random multisets of this size are essentially never good at desk scale:
/// the even low-weight XOR dependencies of ell points form a linear code of
/// dimension at least ell - n - 1, and a random such code always contains a
/// word of weight 2, 4, or 6. The quadratic embedding
/// x -> (x_1..x_m, x_i x_j for i < j) of F2^m fixes this: its dependency
/// code is the first-order Reed-Muller code, whose nonzero words all have
/// weight >= 2^{m-1}, so for m >= 4 no identity of length <= 6 exists.
/// The seed selects a random invertible affine map on F2^n, which preserves
/// goodness while scattering the point set.
pub fn good_multiset(n: u32, m: u32, seed: u64) -> Result<Multiset> {
    let feat = m + m * (m - 1) / 2;
    if m < 4 {
        return Err(Error::Parameter(format!("m = {m} too small for 6-term freeness")));
    }
    if feat > n {
        return Err(Error::Parameter(format!(
            "quadratic embedding of F2^{m} needs {feat} bits, have {n}"
        )));
    }
    if n > 63 {
        return Err(Error::Parameter(format!("bit width {n} outside 1..=63")));
    }
    let mut base = Vec::with_capacity(1usize << m);
    for x in 0..1u64 << m {
        let mut s = x; // linear coordinates occupy the low m bits
        let mut bit = m;
        for i in 0..m {
            for j in i + 1..m {
                if (x >> i) & (x >> j) & 1 == 1 {
                    s |= 1 << bit;
                }
                bit += 1;
            }
        }
        base.push(s);
    }
    let mut rng = crate::rng::stream_rng(seed, crate::rng::labels::SAMPLE_S);
    let (a, b) = random_affine_map(n, &mut rng);
    let elements: Vec<u64> = base.iter().map(|&s| apply_linear(&a, s) ^ b).collect();
    Multiset::new(n, elements)
}

/// Samples an invertible n x n matrix over F2 (rows as bit masks) and a
/// shift vector.
fn random_affine_map(n: u32, rng: &mut impl rand::Rng) -> (Vec<u64>, u64) {
    let mask = if n == 63 { u64::MAX >> 1 } else { (1u64 << n) - 1 };
    loop {
        let rows: Vec<u64> = (0..n).map(|_| rng.random::<u64>() & mask).collect();
        if f2_rank(&rows) == n as usize {
            let b = rng.random::<u64>() & mask;
            return (rows, b);
        }
    }
}

/// Row rank of a list of F2 row vectors.
fn f2_rank(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &row in rows {
        let mut r = row;
        for &b in &basis {
            r = r.min(r ^ b);
        }
        if r != 0 {
            basis.push(r);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

/// Applies the linear map with the given rows: output bit i = parity(row_i & x).
fn apply_linear(rows: &[u64], x: u64) -> u64 {
    rows.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &row)| acc | ((parity(row & x) as u64) << i))
}
