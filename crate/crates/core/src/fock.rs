//! Exact ell-boson Fock-space algebra over 2^n modes.
//!
//! Occupancy tuples label orthonormal states in either the position or the
//! Hadamard-momentum mode frame. The canonical storage frame is position;
//! momentum-frame operators are moved between frames with a cached sector
//! unitary. Everything is exact dense/sparse linear algebra at desk scale.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hypercube::{sign, Multiset};
use crate::linalg::{max_eigenvalue, sym_op_norm};

/// Default ceiling on enumerated basis sizes, overridable through the
/// FORRELAB_ENUM_CAP environment variable.
pub const DEFAULT_ENUM_CAP: usize = 200_000;

/// The configured enumeration cap.
pub fn enumeration_cap() -> usize {
    std::env::var("FORRELAB_ENUM_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

/// Which boson counts a basis spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    /// Exactly ell bosons.
    Fixed(usize),
    /// All counts 0..=N_max (a truncation ceiling for ladder algebra).
    UpTo(usize),
}

/// Mode frame an operator or vector is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Standard-basis modes.
    Position,
    /// Hadamard-transformed modes.
    Momentum,
}

/// Occupancy-tuple basis of a boson sector over 2^n modes.
#[derive(Debug)]
pub struct FockBasis {
    n: u32,
    sector: Sector,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

fn binom_capped(a: usize, b: usize, cap: u128) -> u128 {
    let b = b.min(a - b.min(a));
    let mut acc: u128 = 1;
    for i in 0..b {
        acc = match acc.checked_mul((a - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return cap + 1,
        };
        if acc > cap {
            return cap + 1;
        }
    }
    acc
}

/// Appends the compositions of `total` into `modes` parts in colex order.
fn push_compositions(modes: usize, total: usize, suffix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if modes == 1 {
        let mut tuple = vec![total as u8];
        tuple.extend(suffix.iter().rev());
        out.push(tuple);
        return;
    }
    // Smaller last coordinate first gives colexicographic order.
    for last in 0..=total {
        suffix.push(last as u8);
        push_compositions(modes - 1, total - last, suffix, out);
        suffix.pop();
    }
}

impl FockBasis {
    /// Number of modes, 2^n.
    pub fn n_modes(&self) -> usize {
        1usize << self.n
    }

    /// Bit width n of the mode labels.
    pub fn width(&self) -> u32 {
        self.n
    }

    /// Sector descriptor.
    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// Basis size.
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Occupancy tuples in canonical order.
    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    /// Position of a tuple in the canonical order.
    pub fn index_of(&self, tuple: &[u8]) -> Option<usize> {
        self.index.get(tuple).copied()
    }

    /// Total boson count of the tuple at `idx`.
    pub fn total(&self, idx: usize) -> usize {
        self.states[idx].iter().map(|&c| c as usize).sum()
    }

    /// The boson count of a Fixed sector; errors on UpTo bases.
    pub fn fixed_ell(&self) -> Result<usize> {
        match self.sector {
            Sector::Fixed(ell) => Ok(ell),
            Sector::UpTo(_) => {
                Err(Error::Parameter("operation requires a fixed-count sector".into()))
            }
        }
    }
}

/// Enumerates the occupancy basis of a sector in canonical order: tuples of
/// a fixed count sorted colexicographically; an UpTo basis lists counts in
/// increasing order, colex within each count.
pub fn enumerate_basis(n: u32, sector: Sector) -> Result<Arc<FockBasis>> {
    if n == 0 || n > 16 {
        return Err(Error::Parameter(format!("mode width n={n} outside 1..=16")));
    }
    let modes = 1usize << n;
    let cap = enumeration_cap() as u128;
    let size = match sector {
        Sector::Fixed(ell) => binom_capped(modes + ell - 1, ell, cap),
        Sector::UpTo(nmax) => binom_capped(modes + nmax, nmax, cap),
    };
    if size > cap {
        return Err(Error::CapExceeded(format!(
            "sector basis over {modes} modes exceeds the enumeration cap {cap}"
        )));
    }
    let mut states = Vec::with_capacity(size as usize);
    let totals: Vec<usize> = match sector {
        Sector::Fixed(ell) => vec![ell],
        Sector::UpTo(nmax) => (0..=nmax).collect(),
    };
    for total in totals {
        push_compositions(modes, total, &mut Vec::new(), &mut states);
    }
    let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(Arc::new(FockBasis { n, sector, states, index }))
}

/// A complex state over a Fock basis in a declared frame.
#[derive(Debug, Clone)]
pub struct FockVector {
    basis: Arc<FockBasis>,
    frame: Frame,
    amps: Vec<Complex64>,
}

impl FockVector {
    /// Wraps amplitudes over `basis`.
    pub fn new(basis: Arc<FockBasis>, frame: Frame, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes over a basis of size {}",
                amps.len(),
                basis.dim()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Parameter("non-finite amplitude".into()));
        }
        Ok(Self { basis, frame, amps })
    }

    /// The underlying basis.
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    /// Frame the amplitudes are expressed in.
    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Amplitudes in canonical basis order.
    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    /// 2-norm.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// <self|other>.
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        if self.amps.len() != other.amps.len() || self.frame != other.frame {
            return Err(Error::Dimension("inner product across frames or bases".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }
}

/// Operator tag, mirroring how the operator was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    /// Creation ladder.
    Creation,
    /// Annihilation ladder.
    Annihilation,
    /// Number operator.
    Number,
    /// Single or double hopping.
    Hopping,
    /// 0/1 diagonal projector.
    Projector,
    /// Anything assembled from the above.
    Custom,
}

/// A sparse real linear operator over a Fock basis in a declared frame.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    kind: OpKind,
    frame: Frame,
    basis: Arc<FockBasis>,
    entries: Vec<(usize, usize, f64)>,
}

fn canonicalize(entries: &mut Vec<(usize, usize, f64)>) {
    entries.sort_by_key(|&(r, c, _)| (r, c));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    for &(r, c, v) in entries.iter() {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out.retain(|&(_, _, v)| v != 0.0);
    *entries = out;
}

impl ModeOperator {
    /// Builds an operator from raw coordinates (duplicates are summed).
    pub fn from_entries(
        basis: Arc<FockBasis>,
        frame: Frame,
        kind: OpKind,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let dim = basis.dim();
        if entries.iter().any(|&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::Dimension("coordinate outside the basis".into()));
        }
        canonicalize(&mut entries);
        Ok(Self { kind, frame, basis, entries })
    }

    /// The identity on a basis.
    pub fn identity(basis: Arc<FockBasis>, frame: Frame) -> Self {
        let entries = (0..basis.dim()).map(|i| (i, i, 1.0)).collect();
        Self { kind: OpKind::Custom, frame, basis, entries }
    }

    /// A diagonal operator.
    pub fn from_diagonal(
        basis: Arc<FockBasis>,
        frame: Frame,
        kind: OpKind,
        diag: &[f64],
    ) -> Result<Self> {
        if diag.len() != basis.dim() {
            return Err(Error::Dimension("diagonal length mismatch".into()));
        }
        let entries = diag.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, i, v));
        Ok(Self { kind, frame, basis: basis.clone(), entries: entries.collect() })
    }

    /// Wraps a dense matrix over the basis.
    pub fn from_dense(
        basis: Arc<FockBasis>,
        frame: Frame,
        kind: OpKind,
        m: &DMatrix<f64>,
    ) -> Result<Self> {
        if m.nrows() != basis.dim() || m.ncols() != basis.dim() {
            return Err(Error::Dimension("dense matrix does not match the basis".into()));
        }
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    entries.push((r, c, m[(r, c)]));
                }
            }
        }
        Ok(Self { kind, frame, basis, entries })
    }

    /// Operator tag.
    pub fn kind(&self) -> OpKind {
        self.kind
    }

    /// Frame of expression.
    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Underlying basis.
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    /// Basis dimension (operators are square).
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Coordinate entries, sorted by (row, col).
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    fn compatible(&self, other: &ModeOperator) -> Result<()> {
        if !Arc::ptr_eq(&self.basis, &other.basis) && self.basis.states != other.basis.states {
            return Err(Error::Dimension("operators over different bases".into()));
        }
        if self.frame != other.frame {
            return Err(Error::Dimension("operators in different frames".into()));
        }
        Ok(())
    }

    /// Matrix-vector product on complex amplitudes.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension("vector length mismatch".into()));
        }
        let mut out = vec![Complex64::ZERO; v.len()];
        for &(r, c, val) in &self.entries {
            out[r] += v[c] * val;
        }
        Ok(out)
    }

    /// Matrix-vector product on real amplitudes.
    pub fn apply_real(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension("vector length mismatch".into()));
        }
        let mut out = vec![0.0; v.len()];
        for &(r, c, val) in &self.entries {
            out[r] += v[c] * val;
        }
        Ok(out)
    }

    /// Applies the operator to a FockVector (frames must agree).
    pub fn apply_vector(&self, v: &FockVector) -> Result<FockVector> {
        if v.frame != self.frame {
            return Err(Error::Dimension("operator and vector frames differ".into()));
        }
        FockVector::new(self.basis.clone(), self.frame, self.apply(&v.amps)?)
    }

    /// Dense form.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// self * other.
    pub fn compose(&self, other: &ModeOperator) -> Result<ModeOperator> {
        self.compatible(other)?;
        let m = self.to_dense() * other.to_dense();
        ModeOperator::from_dense(self.basis.clone(), self.frame, OpKind::Custom, &m)
    }

    /// self + other.
    pub fn add(&self, other: &ModeOperator) -> Result<ModeOperator> {
        self.compatible(other)?;
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        ModeOperator::from_entries(self.basis.clone(), self.frame, OpKind::Custom, entries)
    }

    /// scalar * self.
    pub fn scale(&self, scalar: f64) -> ModeOperator {
        let entries = self.entries.iter().map(|&(r, c, v)| (r, c, v * scalar)).collect();
        ModeOperator {
            kind: self.kind,
            frame: self.frame,
            basis: self.basis.clone(),
            entries,
        }
    }

    /// Transpose (these operators are real, so this is the adjoint).
    pub fn adjoint(&self) -> ModeOperator {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        canonicalize(&mut entries);
        ModeOperator {
            kind: match self.kind {
                OpKind::Creation => OpKind::Annihilation,
                OpKind::Annihilation => OpKind::Creation,
                k => k,
            },
            frame: self.frame,
            basis: self.basis.clone(),
            entries,
        }
    }

    /// Re-expresses the operator in the other frame via the sector unitary.
    pub fn to_frame(&self, target: Frame) -> Result<ModeOperator> {
        if target == self.frame {
            return Ok(self.clone());
        }
        let ell = self.basis.fixed_ell()?;
        let su = sector_unitary(self.basis.width(), ell)?;
        let a = self.to_dense();
        // Columns of su are momentum states in position coordinates, so
        // A_pos = su A_mom su^T and A_mom = su^T A_pos su.
        let m = match target {
            Frame::Position => &*su * a * su.transpose(),
            Frame::Momentum => su.transpose() * a * &*su,
        };
        ModeOperator::from_dense(self.basis.clone(), target, self.kind, &m)
    }

    /// Operator norm, valid for the symmetric operators built here.
    pub fn sym_norm(&self) -> f64 {
        sym_op_norm(&self.to_dense())
    }
}

/// Ladder flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// Standard-basis modes a_x.
    Position,
    /// Hadamard modes a~_x, the 2^{-n/2}-weighted signed sums.
    Momentum,
}

/// Ladder kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    /// Adds a boson with weight sqrt(count+1).
    Create,
    /// Removes a boson with weight sqrt(count).
    Annihilate,
    /// Counts bosons in the mode.
    Number,
}

fn position_ladder_entries(
    basis: &FockBasis,
    x: usize,
    kind: LadderKind,
) -> Vec<(usize, usize, f64)> {
    let mut entries = Vec::new();
    for (i, s) in basis.states().iter().enumerate() {
        match kind {
            LadderKind::Number => {
                if s[x] > 0 {
                    entries.push((i, i, s[x] as f64));
                }
            }
            LadderKind::Create => {
                let mut t = s.clone();
                t[x] += 1;
                // Images above the truncation ceiling are dropped.
                if let Some(j) = basis.index_of(&t) {
                    entries.push((j, i, ((s[x] + 1) as f64).sqrt()));
                }
            }
            LadderKind::Annihilate => {
                if s[x] > 0 {
                    let mut t = s.clone();
                    t[x] -= 1;
                    if let Some(j) = basis.index_of(&t) {
                        entries.push((j, i, (s[x] as f64).sqrt()));
                    }
                }
            }
        }
    }
    entries
}

/// Builds a creation / annihilation / number operator for mode `x`.
///
/// Matrices are expressed over the position occupancy labels; the momentum
/// flavor is the signed 2^{-n/2}-weighted sum of position ladders. Create
/// and annihilate change the boson count, so they need an UpTo basis; on a
/// fixed sector only Number is available.
pub fn ladder_ops(
    basis: &Arc<FockBasis>,
    x: u64,
    flavor: Flavor,
    kind: LadderKind,
) -> Result<ModeOperator> {
    let modes = basis.n_modes();
    if x as usize >= modes {
        return Err(Error::Parameter(format!("mode {x} outside 0..{modes}")));
    }
    if matches!(basis.sector(), Sector::Fixed(_)) && kind != LadderKind::Number {
        return Err(Error::Parameter(
            "create/annihilate change the sector; use an UpTo basis".into(),
        ));
    }
    let op_kind = match kind {
        LadderKind::Create => OpKind::Creation,
        LadderKind::Annihilate => OpKind::Annihilation,
        LadderKind::Number => OpKind::Number,
    };
    match flavor {
        Flavor::Position => {
            let entries = position_ladder_entries(basis, x as usize, kind);
            ModeOperator::from_entries(basis.clone(), Frame::Position, op_kind, entries)
        }
        Flavor::Momentum => match kind {
            LadderKind::Create | LadderKind::Annihilate => {
                let scale = 1.0 / (modes as f64).sqrt();
                let mut entries = Vec::new();
                for t in 0..modes {
                    let w = sign(x, t as u64) * scale;
                    for (r, c, v) in position_ladder_entries(basis, t, kind) {
                        entries.push((r, c, v * w));
                    }
                }
                ModeOperator::from_entries(basis.clone(), Frame::Position, op_kind, entries)
            }
            LadderKind::Number => {
                let create = ladder_ops(basis, x, Flavor::Momentum, LadderKind::Create)?;
                let annihilate = ladder_ops(basis, x, Flavor::Momentum, LadderKind::Annihilate)?;
                let mut op = create.compose(&annihilate)?;
                op.kind = OpKind::Number;
                Ok(op)
            }
        },
    }
}

/// Hopping order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoppingOrder {
    /// G~_y = (1/sqrt(ell)) sum_x a~+_{x xor y} a~_x.
    Single,
    /// H~_y = (1/ell) sum_{x,x'} a~+_{x xor y} a~+_{x' xor y} a~_x a~_{x'}.
    Double,
}

/// Assembles a hopping operator sparsely in the momentum frame, where the
/// momentum ladders act directly on occupancy tuples.
pub fn hopping(basis: &Arc<FockBasis>, y: u64, order: HoppingOrder) -> Result<ModeOperator> {
    let ell = basis.fixed_ell()?;
    if ell == 0 {
        return Err(Error::Parameter("hopping needs at least one boson".into()));
    }
    let modes = basis.n_modes();
    if y as usize >= modes {
        return Err(Error::Parameter(format!("momentum shift {y} outside 0..{modes}")));
    }
    let y = y as usize;
    let mut entries = Vec::new();
    for (i, u) in basis.states().iter().enumerate() {
        match order {
            HoppingOrder::Single => {
                for x in 0..modes {
                    if u[x] == 0 {
                        continue;
                    }
                    let mut v = u.clone();
                    let amp = (v[x] as f64).sqrt();
                    v[x] -= 1;
                    let amp = amp * ((v[x ^ y] + 1) as f64).sqrt();
                    v[x ^ y] += 1;
                    let j = basis.index_of(&v).expect("hopping preserves the sector");
                    entries.push((j, i, amp / (ell as f64).sqrt()));
                }
            }
            HoppingOrder::Double => {
                for xp in 0..modes {
                    if u[xp] == 0 {
                        continue;
                    }
                    let mut v1 = u.clone();
                    let a1 = (v1[xp] as f64).sqrt();
                    v1[xp] -= 1;
                    for x in 0..modes {
                        if v1[x] == 0 {
                            continue;
                        }
                        let mut v2 = v1.clone();
                        let a2 = (v2[x] as f64).sqrt();
                        v2[x] -= 1;
                        let a3 = ((v2[xp ^ y] + 1) as f64).sqrt();
                        v2[xp ^ y] += 1;
                        let a4 = ((v2[x ^ y] + 1) as f64).sqrt();
                        v2[x ^ y] += 1;
                        let j = basis.index_of(&v2).expect("hopping preserves the sector");
                        entries.push((j, i, a1 * a2 * a3 * a4 / ell as f64));
                    }
                }
            }
        }
    }
    ModeOperator::from_entries(basis.clone(), Frame::Momentum, OpKind::Hopping, entries)
}

/// The exact position-frame diagonal of a hopping operator: G~_y has entry
/// c_y(S)/sqrt(ell) at the tuple of S, and H~_y = G~_y^2 - id has entry
/// gamma_y(S) - 1. Used to cross-validate the ladder assembly.
pub fn hopping_position_diagonal(
    basis: &Arc<FockBasis>,
    y: u64,
    order: HoppingOrder,
) -> Result<ModeOperator> {
    let ell = basis.fixed_ell()?;
    if ell == 0 {
        return Err(Error::Parameter("hopping needs at least one boson".into()));
    }
    let mut diag = Vec::with_capacity(basis.dim());
    for tuple in basis.states() {
        let s = tuple_multiset(basis.width(), tuple)?;
        let c_y: f64 = s.elements().iter().map(|&e| sign(y, e)).sum();
        diag.push(match order {
            HoppingOrder::Single => c_y / (ell as f64).sqrt(),
            HoppingOrder::Double => c_y * c_y / ell as f64 - 1.0,
        });
    }
    ModeOperator::from_diagonal(basis.clone(), Frame::Position, OpKind::Hopping, &diag)
}

/// The multiset of mode labels a position tuple describes.
pub fn tuple_multiset(n: u32, tuple: &[u8]) -> Result<Multiset> {
    let mut elements = Vec::new();
    for (x, &count) in tuple.iter().enumerate() {
        elements.extend(std::iter::repeat(x as u64).take(count as usize));
    }
    Multiset::new(n, elements)
}

/// F2 sum of momentum-mode labels weighted by occupation parity.
pub fn total_momentum(tuple: &[u8]) -> u64 {
    tuple
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c % 2 == 1)
        .fold(0u64, |acc, (x, _)| acc ^ x as u64)
}

static SECTOR_UNITARIES: OnceLock<Mutex<HashMap<(u32, usize), Arc<DMatrix<f64>>>>> =
    OnceLock::new();

/// The orthogonal change of basis between momentum and position occupancy
/// tuples of the (n, ell) sector. Column u holds the position amplitudes of
/// the momentum state |u>; one factorization per sector, cached.
pub fn sector_unitary(n: u32, ell: usize) -> Result<Arc<DMatrix<f64>>> {
    let cache = SECTOR_UNITARIES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(su) = cache.lock().unwrap().get(&(n, ell)) {
        return Ok(su.clone());
    }
    let bases: Vec<Arc<FockBasis>> =
        (0..=ell).map(|k| enumerate_basis(n, Sector::Fixed(k))).collect::<Result<_>>()?;
    let modes = 1usize << n;
    let scale = 1.0 / (modes as f64).sqrt();
    let top = &bases[ell];
    let mut su = DMatrix::zeros(top.dim(), top.dim());
    for (col, u) in top.states().iter().enumerate() {
        // Build (prod_x (a~+_x)^{u_x} / sqrt(u_x!)) |vac> sector by sector.
        let mut v = vec![1.0f64];
        let mut level = 0usize;
        let mut norm = 1.0f64;
        for (x, &count) in u.iter().enumerate() {
            for rep in 0..count {
                norm *= ((rep + 1) as f64).sqrt();
                let from = &bases[level];
                let to = &bases[level + 1];
                let mut next = vec![0.0f64; to.dim()];
                for (i, amp) in v.iter().enumerate() {
                    if *amp == 0.0 {
                        continue;
                    }
                    let s = &from.states()[i];
                    for t in 0..modes {
                        let mut target = s.clone();
                        target[t] += 1;
                        let j = to.index_of(&target).expect("creation lands in the next sector");
                        next[j] += amp * sign(x as u64, t as u64) * scale
                            * ((s[t] + 1) as f64).sqrt();
                    }
                }
                v = next;
                level += 1;
            }
        }
        for (row, amp) in v.iter().enumerate() {
            su[(row, col)] = amp / norm;
        }
    }
    let su = Arc::new(su);
    cache.lock().unwrap().insert((n, ell), su.clone());
    Ok(su)
}

/// Moves a sector vector between the position and momentum frames.
pub fn change_basis(v: &FockVector, target: Frame) -> Result<FockVector> {
    if v.frame() == target {
        return Ok(v.clone());
    }
    let ell = v.basis().fixed_ell()?;
    let su = sector_unitary(v.basis().width(), ell)?;
    let dim = v.basis().dim();
    let mut out = vec![Complex64::ZERO; dim];
    match target {
        // pos = su * mom
        Frame::Position => {
            for r in 0..dim {
                for c in 0..dim {
                    out[r] += v.amps()[c] * su[(r, c)];
                }
            }
        }
        // mom = su^T * pos
        Frame::Momentum => {
            for r in 0..dim {
                for c in 0..dim {
                    out[r] += v.amps()[c] * su[(c, r)];
                }
            }
        }
    }
    FockVector::new(v.basis().clone(), target, out)
}

/// The all-bosons-in-0-momentum condensate |ell, 0, ..., 0> (momentum frame).
pub fn init_condensate(basis: &Arc<FockBasis>) -> Result<FockVector> {
    let ell = basis.fixed_ell()?;
    let mut tuple = vec![0u8; basis.n_modes()];
    tuple[0] = ell as u8;
    let idx = basis
        .index_of(&tuple)
        .ok_or_else(|| Error::Parameter("condensate tuple missing from basis".into()))?;
    let mut amps = vec![Complex64::ZERO; basis.dim()];
    amps[idx] = Complex64::ONE;
    FockVector::new(basis.clone(), Frame::Momentum, amps)
}

/// Projector families, all diagonal in the momentum frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorKind {
    /// Con_r: at least ell - r bosons in the 0-momentum mode.
    Con(usize),
    /// QE_o: at most o non-zero modes with odd occupation.
    QE(usize),
    /// Exactly o non-zero modes with odd occupation.
    QEEq(usize),
    /// At least o non-zero modes with odd occupation.
    QEGe(usize),
    /// QEC_{r,o} = Con_r * QE_o.
    QEC(usize, usize),
}

/// A momentum-frame diagonal 0/1 projector.
#[derive(Debug, Clone)]
pub struct Projector {
    kind: ProjectorKind,
    op: ModeOperator,
}

impl Projector {
    /// The projector family member.
    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }

    /// The underlying momentum-frame operator.
    pub fn op(&self) -> &ModeOperator {
        &self.op
    }

    /// 0/1 diagonal in momentum-frame canonical order.
    pub fn diag(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.op.dim()];
        for &(r, _, v) in self.op.entries() {
            diag[r] = v;
        }
        diag
    }
}

fn odd_nonzero_modes(tuple: &[u8]) -> usize {
    tuple.iter().skip(1).filter(|&&c| c % 2 == 1).count()
}

/// Builds a condensate / quasi-even projector over a fixed sector.
pub fn projector(basis: &Arc<FockBasis>, kind: ProjectorKind) -> Result<Projector> {
    let ell = basis.fixed_ell()?;
    let modes = basis.n_modes();
    let check = |r: Option<usize>, o: Option<usize>| -> Result<()> {
        if let Some(r) = r {
            if r > ell {
                return Err(Error::Parameter(format!("condensate radius {r} > ell = {ell}")));
            }
        }
        if let Some(o) = o {
            if o > modes {
                return Err(Error::Parameter(format!("odd-mode count {o} > 2^n = {modes}")));
            }
        }
        Ok(())
    };
    match kind {
        ProjectorKind::Con(r) => check(Some(r), None)?,
        ProjectorKind::QE(o) | ProjectorKind::QEEq(o) | ProjectorKind::QEGe(o) => {
            check(None, Some(o))?
        }
        ProjectorKind::QEC(r, o) => check(Some(r), Some(o))?,
    }
    let diag: Vec<f64> = basis
        .states()
        .iter()
        .map(|u| {
            let keep = match kind {
                ProjectorKind::Con(r) => u[0] as usize >= ell - r,
                ProjectorKind::QE(o) => odd_nonzero_modes(u) <= o,
                ProjectorKind::QEEq(o) => odd_nonzero_modes(u) == o,
                ProjectorKind::QEGe(o) => odd_nonzero_modes(u) >= o,
                ProjectorKind::QEC(r, o) => {
                    u[0] as usize >= ell - r && odd_nonzero_modes(u) <= o
                }
            };
            if keep {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let op = ModeOperator::from_diagonal(basis.clone(), Frame::Momentum, OpKind::Projector, &diag)?;
    Ok(Projector { kind, op })
}

/// Position-frame diagonal projector onto tuples holding at least one boson
/// at every guessed mode.
pub fn pi_succ(basis: &Arc<FockBasis>, guesses: &[u64]) -> Result<ModeOperator> {
    check_guesses(basis, guesses)?;
    let diag: Vec<f64> = basis
        .states()
        .iter()
        .map(|s| if guesses.iter().all(|&z| s[z as usize] > 0) { 1.0 } else { 0.0 })
        .collect();
    ModeOperator::from_diagonal(basis.clone(), Frame::Position, OpKind::Projector, &diag)
}

/// The number-operator surrogate n^_{z_1} ... n^_{z_v} (position diagonal).
pub fn lambda_succ(basis: &Arc<FockBasis>, guesses: &[u64]) -> Result<ModeOperator> {
    check_guesses(basis, guesses)?;
    let diag: Vec<f64> = basis
        .states()
        .iter()
        .map(|s| guesses.iter().map(|&z| s[z as usize] as f64).product())
        .collect();
    ModeOperator::from_diagonal(basis.clone(), Frame::Position, OpKind::Custom, &diag)
}

fn check_guesses(basis: &Arc<FockBasis>, guesses: &[u64]) -> Result<()> {
    if guesses.is_empty() {
        return Err(Error::Parameter("no guesses given".into()));
    }
    for (i, &z) in guesses.iter().enumerate() {
        if z as usize >= basis.n_modes() {
            return Err(Error::Parameter(format!("guess {z} outside the mode range")));
        }
        if guesses[..i].contains(&z) {
            return Err(Error::Parameter(format!("duplicate guess {z}")));
        }
    }
    Ok(())
}

/// ||QEC_{r,o} n^_{z_1} ... n^_{z_v} QEC_{r,o}|| by exact eigensolve of the
/// operator compressed to the QEC subspace.
pub fn success_norm(basis: &Arc<FockBasis>, guesses: &[u64], r: usize, o: usize) -> Result<f64> {
    let qec = projector(basis, ProjectorKind::QEC(r, o))?;
    let lambda_mom = lambda_succ(basis, guesses)?.to_frame(Frame::Momentum)?.to_dense();
    let keep: Vec<usize> = qec
        .diag()
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v == 1.0)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Ok(0.0);
    }
    let compressed = DMatrix::from_fn(keep.len(), keep.len(), |a, b| lambda_mom[(keep[a], keep[b])]);
    Ok(max_eigenvalue(&compressed).max(0.0))
}
