//! Hamiltonian families and their exact low-dimensional reductions.
//!
//! Every family here is diagonal in the computational basis apart from a
//! multiple of the uniform projector `|ψ0⟩⟨ψ0|`. Grouping basis states by
//! their diagonal value gives a partition into classes; the normalized class
//! indicators span an invariant subspace, and each class contributes its
//! value with multiplicity `size − 1` on the orthogonal complement.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{eigenvalues_capped, HermitianOperator, DEFAULT_DENSE_CAP};

/// Enumerating predicates is refused above this universe size.
const ENUMERATION_LIMIT: u64 = 1 << 24;

/// One diagonal value and how many basis states carry it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub value: f64,
    pub degeneracy: u64,
}

impl Level {
    pub fn new(value: f64, degeneracy: u64) -> Self {
        Self { value, degeneracy }
    }
}

/// `rank_one·|ψ0⟩⟨ψ0| + Σ_a value_a·P_a`, where `P_a` projects onto class `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    levels: Vec<Level>,
    rank_one: f64,
    universe: u64,
}

impl ReducedModel {
    pub fn new(levels: Vec<Level>, rank_one: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyLevels);
        }
        if levels.iter().any(|l| l.degeneracy == 0) {
            return Err(Error::InvalidSize("level with zero degeneracy".into()));
        }
        if levels.iter().any(|l| !l.value.is_finite()) || !rank_one.is_finite() {
            return Err(Error::DomainError("non-finite level value".into()));
        }
        let universe = levels.iter().map(|l| l.degeneracy).sum();
        Ok(Self {
            levels,
            rank_one,
            universe,
        })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn rank_one_coefficient(&self) -> f64 {
        self.rank_one
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    /// Class sizes in level order.
    pub fn partition(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.degeneracy).collect()
    }

    /// Matrix on the normalized class indicators:
    /// `M_ab = value_a δ_ab + rank_one·√(N_a N_b)/N`.
    pub fn effective_matrix(&self) -> HermitianOperator {
        let n = self.universe as f64;
        let roots: Vec<f64> = self.levels.iter().map(|l| (l.degeneracy as f64).sqrt()).collect();
        HermitianOperator::from_real_fn(self.levels.len(), |a, b| {
            let diag = if a == b { self.levels[a].value } else { 0.0 };
            diag + self.rank_one * roots[a] * roots[b] / n
        })
        .expect("effective matrix is symmetric by construction")
    }

    /// Eigenvalues on the complement of the class-indicator span.
    pub fn deflated(&self) -> Vec<Level> {
        self.levels
            .iter()
            .filter(|l| l.degeneracy > 1)
            .map(|l| Level::new(l.value, l.degeneracy - 1))
            .collect()
    }

    /// Merges classes with identical values. The spectrum is unchanged.
    pub fn merged(&self) -> ReducedModel {
        let mut out: Vec<Level> = Vec::with_capacity(self.levels.len());
        for l in &self.levels {
            match out.iter_mut().find(|m| m.value == l.value) {
                Some(m) => m.degeneracy += l.degeneracy,
                None => out.push(*l),
            }
        }
        ReducedModel {
            levels: out,
            rank_one: self.rank_one,
            universe: self.universe,
        }
    }

    /// Merged effective matrix plus deflated list.
    pub fn reduce(&self) -> Reduction {
        let merged = self.merged();
        Reduction {
            matrix: merged.effective_matrix(),
            deflated: merged.deflated(),
        }
    }

    /// `(1−s)·self + s·other`; both must share the same class sizes.
    pub fn interpolate(&self, other: &ReducedModel, s: f64) -> Result<ReducedModel> {
        if self.partition() != other.partition() {
            return Err(Error::OrderingViolation(
                "interpolated models must share one partition".into(),
            ));
        }
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| Level::new((1.0 - s) * a.value + s * b.value, a.degeneracy))
            .collect();
        ReducedModel::new(levels, (1.0 - s) * self.rank_one + s * other.rank_one)
    }

    /// Explicit `N×N` operator with classes laid out contiguously.
    pub fn to_dense(&self, cap: usize) -> Result<HermitianOperator> {
        let n = self.universe as usize;
        if n > cap {
            return Err(Error::DimensionCap { dim: n, cap });
        }
        let mut diag = Vec::with_capacity(n);
        for l in &self.levels {
            diag.extend(std::iter::repeat_n(l.value, l.degeneracy as usize));
        }
        let w = self.rank_one / n as f64;
        HermitianOperator::from_real_fn(n, |i, j| if i == j { diag[i] + w } else { w })
    }
}

/// Effective matrix plus the eigenvalues it leaves out.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub matrix: HermitianOperator,
    pub deflated: Vec<Level>,
}

impl Reduction {
    /// Full spectrum as ascending `(value, multiplicity)` pairs.
    pub fn spectrum(&self) -> Result<Vec<Level>> {
        let mut out: Vec<Level> = eigenvalues_capped(&self.matrix, DEFAULT_DENSE_CAP)?
            .into_iter()
            .map(|v| Level::new(v, 1))
            .collect();
        out.extend_from_slice(&self.deflated);
        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        Ok(out)
    }

    /// The `k` lowest eigenvalues counted with multiplicity.
    pub fn lowest(&self, k: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(k);
        for level in self.spectrum()? {
            for _ in 0..level.degeneracy {
                if out.len() == k {
                    return Ok(out);
                }
                out.push(level.value);
            }
        }
        Ok(out)
    }

    /// Every eigenvalue with multiplicity. Only sensible for small universes.
    pub fn expand(&self) -> Result<Vec<f64>> {
        let total: u64 = self.matrix.dim() as u64 + self.deflated.iter().map(|l| l.degeneracy).sum::<u64>();
        if total > ENUMERATION_LIMIT {
            return Err(Error::DimensionCap {
                dim: total as usize,
                cap: ENUMERATION_LIMIT as usize,
            });
        }
        self.lowest(total as usize)
    }
}

/// Reduction of `H(s) = (1−s)H_0 + s·diag(E)` with `H_0 = −|ψ0⟩⟨ψ0|`.
pub fn symmetric_reduce(levels: &[Level], s: f64) -> Result<Reduction> {
    if levels.is_empty() {
        return Err(Error::EmptyLevels);
    }
    let scaled = levels.iter().map(|l| Level::new(s * l.value, l.degeneracy)).collect();
    Ok(ReducedModel::new(scaled, -(1.0 - s))?.reduce())
}

type Membership = Arc<dyn Fn(usize, u64) -> bool + Send + Sync>;

/// Nested marked sets `M_1 ⊃ M_2 ⊃ … ⊃ M_m` described by a membership test
/// and cached sizes. Levels are numbered from 1.
#[derive(Clone)]
pub struct MarkedSetFamily {
    universe: u64,
    sizes: Vec<u64>,
    member: Membership,
}

impl fmt::Debug for MarkedSetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarkedSetFamily")
            .field("universe", &self.universe)
            .field("sizes", &self.sizes)
            .finish()
    }
}

impl MarkedSetFamily {
    /// Trusts the given sizes; they are checked for ordering only.
    pub fn with_sizes(
        universe: u64,
        sizes: Vec<u64>,
        member: impl Fn(usize, u64) -> bool + Send + Sync + 'static,
    ) -> Result<Self> {
        validate_sizes(universe, &sizes)?;
        Ok(Self {
            universe,
            sizes,
            member: Arc::new(member),
        })
    }

    /// Counts each level by enumerating the universe.
    pub fn from_predicate(
        universe: u64,
        levels: usize,
        member: impl Fn(usize, u64) -> bool + Send + Sync + 'static,
    ) -> Result<Self> {
        if universe > ENUMERATION_LIMIT {
            return Err(Error::InvalidSize(format!(
                "cannot enumerate a universe of {universe}"
            )));
        }
        let sizes = (1..=levels)
            .map(|j| (0..universe).filter(|&q| member(j, q)).count() as u64)
            .collect();
        Self::with_sizes(universe, sizes, member)
    }

    /// `M_j = {q : q < N_j}`.
    pub fn prefix(universe: u64, sizes: Vec<u64>) -> Result<Self> {
        let bounds = sizes.clone();
        Self::with_sizes(universe, sizes, move |j, q| q < bounds[j - 1])
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    /// Number of levels `m`.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn size(&self, level: usize) -> Result<u64> {
        self.check_level(level)?;
        Ok(self.sizes[level - 1])
    }

    pub fn contains(&self, level: usize, q: u64) -> bool {
        (1..=self.len()).contains(&level) && q < self.universe && (self.member)(level, q)
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.len() {
            return Err(Error::LevelOutOfRange {
                level,
                levels: self.len(),
            });
        }
        Ok(())
    }

    /// Exhaustive check of nesting and cached counts.
    pub fn verify(&self) -> Result<()> {
        if self.universe > ENUMERATION_LIMIT {
            return Err(Error::InvalidSize("universe too large to verify".into()));
        }
        for j in 1..=self.len() {
            let mut count = 0;
            for q in 0..self.universe {
                if self.contains(j, q) {
                    count += 1;
                    if j > 1 && !self.contains(j - 1, q) {
                        return Err(Error::OrderingViolation(format!(
                            "{q} is in level {j} but not in level {}",
                            j - 1
                        )));
                    }
                }
            }
            if count != self.sizes[j - 1] {
                return Err(Error::InvalidSize(format!(
                    "level {j} holds {count} states, cached {}",
                    self.sizes[j - 1]
                )));
            }
        }
        Ok(())
    }

    /// Class sizes innermost first: `M_m, M_{m−1}∖M_m, …, M_1∖M_2, complement`.
    pub fn partition(&self) -> Vec<u64> {
        let m = self.len();
        let mut out = Vec::with_capacity(m + 1);
        let mut inner = 0;
        for j in (1..=m).rev() {
            out.push(self.sizes[j - 1] - inner);
            inner = self.sizes[j - 1];
        }
        out.push(self.universe - inner);
        out
    }
}

fn validate_sizes(universe: u64, sizes: &[u64]) -> Result<()> {
    if universe < 2 {
        return Err(Error::InvalidDimension(universe as usize));
    }
    if let Some(&first) = sizes.first() {
        if first >= universe {
            return Err(Error::OrderingViolation(format!(
                "first level holds {first} of {universe} states"
            )));
        }
    }
    if sizes.last() == Some(&0) {
        return Err(Error::InvalidSize("empty marked set".into()));
    }
    if sizes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::OrderingViolation(format!(
            "level sizes {sizes:?} are not strictly decreasing"
        )));
    }
    Ok(())
}

/// `H_0 = −|ψ0⟩⟨ψ0|` on a single class.
pub fn build_initial(universe: u64) -> Result<ReducedModel> {
    if universe < 2 {
        return Err(Error::InvalidDimension(universe as usize));
    }
    ReducedModel::new(vec![Level::new(0.0, universe)], -1.0)
}

/// Closed-form spectrum of `x·H_0 − (1−x)·Π_M` where `x = |M|/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntermediateSpectrum {
    pub marked_fraction: f64,
    pub lower: f64,
    pub upper: f64,
    /// Value on the marked complement, multiplicity `|M| − 1`.
    pub degenerate: f64,
    /// Ground amplitude on the normalized marked vector.
    pub marked_component: f64,
    /// Ground amplitude on the normalized unmarked vector.
    pub unmarked_component: f64,
}

impl IntermediateSpectrum {
    pub fn new(marked_fraction: f64) -> Result<Self> {
        let x = marked_fraction;
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::DomainError(format!("marked fraction {x} outside (0, 1]")));
        }
        let split = intermediate_splitting(x);
        let lower = (-1.0 - split) / 2.0;
        let upper = (-1.0 + split) / 2.0;
        // 2x2 block on (marked, unmarked) normalized vectors
        let m11 = -(1.0 - x) - x * x;
        let m12 = -x * (x * (1.0 - x)).sqrt();
        let (mut a, mut b) = (m12, lower - m11);
        if a.abs() < 1e-300 && b.abs() < 1e-300 {
            (a, b) = (1.0, 0.0);
        }
        let norm = a.hypot(b);
        let sign = if a < 0.0 { -1.0 } else { 1.0 };
        Ok(Self {
            marked_fraction: x,
            lower,
            upper,
            degenerate: -(1.0 - x),
            marked_component: sign * a / norm,
            unmarked_component: sign * b / norm,
        })
    }

    /// `E_+ − E_−`.
    pub fn splitting(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `√((1−2x)² + 4x²(1−x))`.
pub fn intermediate_splitting(x: f64) -> f64 {
    ((1.0 - 2.0 * x).powi(2) + 4.0 * x * x * (1.0 - x)).sqrt()
}

/// `H_j = x_j·H_0 − (1−x_j)·Π_{M_j}` on the two classes (marked, unmarked).
pub fn build_intermediate(family: &MarkedSetFamily, level: usize) -> Result<ReducedModel> {
    let marked = family.size(level)?;
    let x = marked as f64 / family.universe() as f64;
    ReducedModel::new(
        vec![
            Level::new(-(1.0 - x), marked),
            Level::new(0.0, family.universe() - marked),
        ],
        -x,
    )
}

/// Chain member `j ∈ 0..=m` on the family partition: `H_0`, the
/// intermediate Hamiltonians `H_1 … H_{m−1}`, and `H_m = −Π_{M_m}`.
pub fn chain_member(family: &MarkedSetFamily, j: usize) -> Result<ReducedModel> {
    let m = family.len();
    if j > m {
        return Err(Error::LevelOutOfRange { level: j, levels: m });
    }
    let partition = family.partition();
    let universe = family.universe() as f64;
    let (marked_classes, diagonal, rank_one) = match j {
        0 => (0, 0.0, -1.0),
        j if j == m => (1, -1.0, 0.0),
        j => {
            let x = family.sizes()[j - 1] as f64 / universe;
            (m - j + 1, -(1.0 - x), -x)
        }
    };
    let levels = partition
        .iter()
        .enumerate()
        .map(|(class, &size)| Level::new(if class < marked_classes { diagonal } else { 0.0 }, size))
        .collect();
    ReducedModel::new(levels, rank_one)
}

/// Ground energy of chain member `j`, in closed form.
pub fn chain_ground_energy(family: &MarkedSetFamily, j: usize) -> Result<f64> {
    let m = family.len();
    match j {
        0 => Ok(-1.0),
        j if j == m => Ok(-1.0),
        j if j < m => {
            let x = family.sizes()[j - 1] as f64 / family.universe() as f64;
            Ok(IntermediateSpectrum::new(x)?.lower)
        }
        _ => Err(Error::LevelOutOfRange { level: j, levels: m }),
    }
}

/// Ground components `(x_1, x_2)` of chain member `j` and the size of the
/// set its marked vector spans.
fn chain_components(family: &MarkedSetFamily, j: usize) -> Result<(f64, f64, u64)> {
    let m = family.len();
    let universe = family.universe();
    match j {
        0 => Ok((1.0, 0.0, universe)),
        j if j == m => Ok((1.0, 0.0, family.sizes()[m - 1])),
        j => {
            let size = family.sizes()[j - 1];
            let s = IntermediateSpectrum::new(size as f64 / universe as f64)?;
            Ok((s.marked_component, s.unmarked_component, size))
        }
    }
}

/// Overlap of the ground states of chain members `j−1` and `j`, from the
/// normalized ground components of both. The uniform state counts as
/// marking every state and the last member as marking only `M_m`.
pub fn overlap_adjacent(family: &MarkedSetFamily, level: usize) -> Result<f64> {
    let m = family.len();
    if level == 0 || level > m {
        return Err(Error::LevelOutOfRange { level, levels: m });
    }
    let n = family.universe() as f64;
    let (a1, a2, prev) = chain_components(family, level - 1)?;
    let (b1, b2, curr) = chain_components(family, level)?;
    let (prev, curr) = (prev as f64, curr as f64);
    let mut d = (curr / prev).sqrt() * a1 * b1;
    if curr < n {
        d += (prev - curr) / (prev * (n - curr)).sqrt() * a1 * b2;
        d += ((n - prev) / (n - curr)).sqrt() * a2 * b2;
    }
    Ok(d)
}

/// Dense `H_j` assembled from the membership test, independent of the
/// class bookkeeping. Index `q` is the computational basis state.
pub fn dense_chain_member(family: &MarkedSetFamily, j: usize, cap: usize) -> Result<HermitianOperator> {
    let m = family.len();
    if j > m {
        return Err(Error::LevelOutOfRange { level: j, levels: m });
    }
    let n = family.universe() as usize;
    if n > cap {
        return Err(Error::DimensionCap { dim: n, cap });
    }
    let (weight, diagonal) = match j {
        0 => (1.0, 0.0),
        j if j == m => (0.0, -1.0),
        j => {
            let x = family.sizes()[j - 1] as f64 / n as f64;
            (x, -(1.0 - x))
        }
    };
    let marks: Vec<bool> = (0..n as u64).map(|q| j > 0 && family.contains(j, q)).collect();
    HermitianOperator::from_real_fn(n, |a, b| {
        let d = if a == b && marks[a] { diagonal } else { 0.0 };
        d - weight / n as f64
    })
}

/// How an oracle table produces its entries.
#[derive(Debug, Clone, PartialEq)]
enum TableRule {
    Explicit(Vec<u64>),
    /// Minimum-finding profile scattered by an odd-multiplier bijection.
    MinFind { qubits: u32 },
    /// `a^k mod z`.
    ModularPower { a: u64, z: u64 },
}

/// Values `h_k` on `N = 2^n` basis states, produced lazily.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    qubits: u32,
    rule: TableRule,
}

const SCATTER_MULTIPLIER: u64 = 0x9E37_79B9;
const SCATTER_OFFSET: u64 = 0x2545;

impl OracleTable {
    pub fn explicit(values: Vec<u64>) -> Result<Self> {
        let len = values.len() as u64;
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidSize(format!("table length {len} is not a power of two")));
        }
        Ok(Self {
            qubits: len.trailing_zeros(),
            rule: TableRule::Explicit(values),
        })
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn len(&self) -> u64 {
        1u64 << self.qubits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, k: u64) -> u64 {
        match &self.rule {
            TableRule::Explicit(v) => v[k as usize],
            TableRule::MinFind { qubits } => {
                let mask = (1u64 << qubits) - 1;
                let rank = k.wrapping_sub(SCATTER_OFFSET).wrapping_mul(inverse_odd(SCATTER_MULTIPLIER)) & mask;
                minfind_value_at_rank(rank, *qubits)
            }
            TableRule::ModularPower { a, z } => mod_pow(*a, k, *z),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.len()).map(|k| self.value(k))
    }
}

/// Rank 0 holds 0, ranks `2^v − 1 ..= 2^{v+1} − 2` hold `v`, the rest `n − 1`.
fn minfind_value_at_rank(rank: u64, qubits: u32) -> u64 {
    let v = (rank + 1).ilog2() as u64;
    v.min(qubits as u64 - 1)
}

fn minfind_index_of_rank(rank: u64, qubits: u32) -> u64 {
    let mask = (1u64 << qubits) - 1;
    rank.wrapping_mul(SCATTER_MULTIPLIER).wrapping_add(SCATTER_OFFSET) & mask
}

/// Multiplicative inverse of an odd number modulo 2^64.
fn inverse_odd(a: u64) -> u64 {
    let mut x = a;
    for _ in 0..6 {
        x = x.wrapping_mul(2u64.wrapping_sub(a.wrapping_mul(x)));
    }
    x
}

pub fn mod_pow(base: u64, mut exp: u64, modulus: u64) -> u64 {
    if modulus == 1 {
        return 0;
    }
    let m = modulus as u128;
    let mut b = base as u128 % m;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Minimum-finding instance: table, threshold levels and solution index.
#[derive(Debug, Clone)]
pub struct MinFindInstance {
    pub table: OracleTable,
    /// `M_j = {k : h_k < n − j}` for `j = 1..n−1`.
    pub family: MarkedSetFamily,
    /// Index holding the unique minimum.
    pub solution: u64,
}

impl MinFindInstance {
    pub fn qubits(&self) -> u32 {
        self.table.qubits()
    }

    /// Multiplicity of each table value, largest value first.
    pub fn value_profile(&self) -> Vec<Level> {
        minfind_profile(self.qubits())
    }

    /// `−|y⟩⟨y|` as a reduced model on the family partition.
    pub fn problem(&self) -> Result<ReducedModel> {
        chain_member(&self.family, self.family.len())
    }
}

/// Table-value multiplicities for the minimum-finding profile, from the
/// largest value `n − 1` down to the unique `0`.
pub fn minfind_profile(qubits: u32) -> Vec<Level> {
    let n = qubits as u64;
    let big_n = 1u64 << qubits;
    let mut out = vec![Level::new((n - 1) as f64, big_n / 2 + 1)];
    for v in (1..n - 1).rev() {
        out.push(Level::new(v as f64, 1 << v));
    }
    out.push(Level::new(0.0, 1));
    out
}

pub fn build_minfind(qubits: u32) -> Result<MinFindInstance> {
    if !(3..=40).contains(&qubits) {
        return Err(Error::InvalidSize(format!("minimum finding needs 3..=40 qubits, got {qubits}")));
    }
    let universe = 1u64 << qubits;
    let table = OracleTable {
        qubits,
        rule: TableRule::MinFind { qubits },
    };
    // #{h < n−j} = 2^{n−j} − 1
    let sizes = (1..qubits).map(|j| (1u64 << (qubits - j)) - 1).collect();
    let lookup = table.clone();
    let family = MarkedSetFamily::with_sizes(universe, sizes, move |j, q| {
        lookup.value(q) < (qubits as u64 - j as u64)
    })?;
    Ok(MinFindInstance {
        solution: minfind_index_of_rank(0, qubits),
        table,
        family,
    })
}

/// Order-finding instance built on `h_k = a^k mod Z`.
#[derive(Debug, Clone)]
pub struct FactoringInstance {
    pub modulus: u64,
    pub base: u64,
    pub table: OracleTable,
    /// Thresholds `⌊Z/2⌋, ⌊Z/4⌋, …` down to 1.
    pub divisions: Vec<u64>,
    /// `#{k : h_k ≤ v}` for each threshold, before removing repeats.
    pub threshold_sizes: Vec<u64>,
    /// Strictly nested levels; the last one is the ground manifold
    /// `{k : h_k = 1}`. Empty when every state is already a ground state.
    pub family: MarkedSetFamily,
}

impl FactoringInstance {
    /// Ground manifold indices `{p·r}`.
    pub fn ground_manifold(&self) -> Vec<u64> {
        (0..self.table.len()).filter(|&k| self.table.value(k) == 1).collect()
    }

    /// Consecutive level-size ratios `N_j / N_{j−1}`, starting from `N_1 / N`.
    pub fn ratios(&self) -> Vec<f64> {
        let mut prev = self.table.len();
        self.family
            .sizes()
            .iter()
            .map(|&s| {
                let r = s as f64 / prev as f64;
                prev = s;
                r
            })
            .collect()
    }
}

/// Period of a manifold `{p·r}`: its smallest positive member, provided
/// every member is a multiple of it.
pub fn order_from_manifold(manifold: &[u64]) -> Option<u64> {
    let r = manifold.iter().copied().filter(|&k| k > 0).min()?;
    manifold.iter().all(|k| k % r == 0).then_some(r)
}

/// Nontrivial factors `gcd(a^{r/2} ∓ 1, Z)`, when the order allows it.
pub fn factors_from_order(modulus: u64, base: u64, order: u64) -> Option<(u64, u64)> {
    if order % 2 == 1 {
        return None;
    }
    let half = mod_pow(base, order / 2, modulus);
    if half == modulus - 1 {
        return None;
    }
    let lo = gcd(half + modulus - 1, modulus);
    let hi = gcd(half + 1, modulus);
    let trivial = |f: u64| f == 1 || f == modulus;
    if trivial(lo) || trivial(hi) {
        return None;
    }
    Some((lo.min(hi), lo.max(hi)))
}

/// Smallest `n` with `2^n ≥ 4Z`.
pub fn default_factoring_qubits(modulus: u64) -> u32 {
    let target = 4 * modulus;
    let mut n = 1;
    while (1u64 << n) < target {
        n += 1;
    }
    n
}

pub fn build_factoring(modulus: u64, base: u64, qubits: u32) -> Result<FactoringInstance> {
    if modulus < 2 {
        return Err(Error::DomainError(format!("modulus {modulus} must be at least 2")));
    }
    if gcd(base, modulus) != 1 {
        return Err(Error::NotCoprime { a: base, z: modulus });
    }
    if qubits == 0 || qubits > 24 || (1u64 << qubits) < modulus {
        return Err(Error::InsufficientQubits { n: qubits, z: modulus });
    }
    let universe = 1u64 << qubits;
    let table = OracleTable {
        qubits,
        rule: TableRule::ModularPower { a: base, z: modulus },
    };
    let mut divisions = Vec::new();
    let mut v = modulus / 2;
    while v > 1 {
        divisions.push(v);
        v /= 2;
    }
    divisions.push(1);
    let values: Vec<u64> = table.values().collect();
    let threshold_sizes: Vec<u64> = divisions
        .iter()
        .map(|&v| values.iter().filter(|&&h| h <= v).count() as u64)
        .collect();
    let mut kept = Vec::new();
    let mut sizes = Vec::new();
    for (&v, &size) in divisions.iter().zip(&threshold_sizes) {
        if size < universe && sizes.last().is_none_or(|&last| size < last) {
            kept.push(v);
            sizes.push(size);
        }
    }
    let lookup = table.clone();
    let family = MarkedSetFamily::with_sizes(universe, sizes, move |j, q| lookup.value(q) <= kept[j - 1])?;
    Ok(FactoringInstance {
        modulus,
        base,
        table,
        divisions,
        threshold_sizes,
        family,
    })
}

/// Symmetrized cost of a bit string of Hamming weight `w`.
pub fn hamming_cost(weight: u64, bits: u64, q: u64) -> Result<u64> {
    if weight > bits {
        return Err(Error::DomainError(format!("weight {weight} exceeds {bits} bits")));
    }
    if q < 3 {
        return Err(Error::DomainError(format!("q = {q} must be at least 3")));
    }
    let (w, n, q) = (weight as i128, bits as i128, q as i128);
    // six times the cost, so all three terms are integers
    let sixfold = 3 * q * w * (n - w) * (n - w - 1) + 3 * w * (w - 1) * (n - w) + w * (w - 1) * (w - 2);
    assert_eq!(sixfold % 6, 0, "symmetrized cost must be an integer");
    u64::try_from(sixfold / 6).map_err(|_| Error::DomainError("cost overflow".into()))
}

pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// One level per Hamming weight with degeneracy `C(n, w)`.
pub fn hamming_levels(bits: u64, q: u64) -> Result<Vec<Level>> {
    (0..=bits)
        .map(|w| Ok(Level::new(hamming_cost(w, bits, q)? as f64, binomial(bits, w))))
        .collect()
}

/// 3×3 matrix of `(1−s)H_{j−1} + sH_j` on the normalized vectors of
/// `M_j`, `M_{j−1}∖M_j` and the uniform state outside `M_{j−1}`.
pub fn reduce_step_pair(universe: u64, prev: u64, curr: u64, s: f64) -> Result<HermitianOperator> {
    if !(universe > prev && prev > curr && curr >= 1) {
        return Err(Error::OrderingViolation(format!(
            "need N > N_prev > N_curr ≥ 1, got {universe}, {prev}, {curr}"
        )));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::DomainError(format!("s = {s} outside [0, 1]")));
    }
    let (n, np, nc) = (universe as f64, prev as f64, curr as f64);
    let tau = (1.0 - s) * np / n + s * nc / n;
    let alpha = -tau / n;
    let beta = -tau * (n - np).sqrt() / n + tau / n;
    let gamma = 1.0 - 2.0 * tau + tau / n * (np + 1.0);
    let nu = -1.0 + tau;
    let delta = s * (1.0 - nc / n);
    let m = np - nc;
    let rest = np - m;
    let rows = [
        [alpha * rest + nu, alpha * (m * rest).sqrt(), (alpha + beta) * rest.sqrt()],
        [alpha * (m * rest).sqrt(), m * alpha + delta + nu, (alpha + beta) * m.sqrt()],
        [(alpha + beta) * rest.sqrt(), (alpha + beta) * m.sqrt(), alpha + gamma + nu],
    ];
    HermitianOperator::from_real_fn(3, |i, j| rows[i][j])
}

/// Which reference problem an instance document describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Marked items at 0, everything else at 1.
    Search,
    /// Minimum-finding table values.
    Minfind,
    /// Unique solution at 0, everything else at `n − 1`.
    Plateau,
    Hamming,
    Factoring,
    Custom,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    #[serde(rename = "Z", default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<u64>,
    #[serde(rename = "a", default, skip_serializing_if = "Option::is_none")]
    pub base: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marked: Option<u64>,
}

/// Interchange document for a diagonal problem Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    pub n: u32,
    #[serde(rename = "N")]
    pub size: u64,
    pub levels: Vec<Level>,
    #[serde(default)]
    pub params: ProblemParams,
}

impl ProblemInstance {
    pub fn search(qubits: u32, marked: u64) -> Result<Self> {
        let size = checked_size(qubits)?;
        if marked == 0 || marked >= size {
            return Err(Error::InvalidSize(format!("{marked} marked items of {size}")));
        }
        Ok(Self {
            kind: ProblemKind::Search,
            n: qubits,
            size,
            levels: vec![Level::new(0.0, marked), Level::new(1.0, size - marked)],
            params: ProblemParams {
                marked: Some(marked),
                ..Default::default()
            },
        })
    }

    pub fn minfind(qubits: u32) -> Result<Self> {
        let size = checked_size(qubits)?;
        if qubits < 3 {
            return Err(Error::InvalidSize(format!("minimum finding needs 3+ qubits, got {qubits}")));
        }
        let mut levels = minfind_profile(qubits);
        levels.reverse();
        Ok(Self {
            kind: ProblemKind::Minfind,
            n: qubits,
            size,
            levels,
            params: ProblemParams::default(),
        })
    }

    pub fn plateau(qubits: u32) -> Result<Self> {
        let size = checked_size(qubits)?;
        if qubits < 2 {
            return Err(Error::InvalidSize("plateau problem needs 2+ qubits".into()));
        }
        Ok(Self {
            kind: ProblemKind::Plateau,
            n: qubits,
            size,
            levels: vec![Level::new(0.0, 1), Level::new((qubits - 1) as f64, size - 1)],
            params: ProblemParams::default(),
        })
    }

    pub fn hamming(qubits: u32, q: u64) -> Result<Self> {
        let size = checked_size(qubits)?;
        Ok(Self {
            kind: ProblemKind::Hamming,
            n: qubits,
            size,
            levels: hamming_levels(qubits as u64, q)?,
            params: ProblemParams {
                q: Some(q),
                ..Default::default()
            },
        })
    }

    pub fn factoring(instance: &FactoringInstance) -> Result<Self> {
        let qubits = instance.table.qubits();
        let mut counts = std::collections::BTreeMap::new();
        for h in instance.table.values() {
            *counts.entry(h).or_insert(0u64) += 1;
        }
        Ok(Self {
            kind: ProblemKind::Factoring,
            n: qubits,
            size: instance.table.len(),
            levels: counts.into_iter().map(|(h, c)| Level::new(h as f64, c)).collect(),
            params: ProblemParams {
                modulus: Some(instance.modulus),
                base: Some(instance.base),
                ..Default::default()
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::EmptyLevels);
        }
        if checked_size(self.n)? != self.size {
            return Err(Error::InvalidSize(format!("N = {} is not 2^{}", self.size, self.n)));
        }
        let total: u64 = self.levels.iter().map(|l| l.degeneracy).sum();
        if total != self.size {
            return Err(Error::InvalidSize(format!(
                "degeneracies sum to {total}, expected {}",
                self.size
            )));
        }
        ReducedModel::new(self.levels.clone(), 0.0).map(|_| ())
    }

    /// Diagonal problem part as a reduced model with no rank-one term.
    pub fn problem_model(&self) -> Result<ReducedModel> {
        self.validate()?;
        ReducedModel::new(self.levels.clone(), 0.0)
    }

    /// `H_0` on the same partition.
    pub fn initial_model(&self) -> Result<ReducedModel> {
        self.validate()?;
        let levels = self.levels.iter().map(|l| Level::new(0.0, l.degeneracy)).collect();
        ReducedModel::new(levels, -1.0)
    }
}

fn checked_size(qubits: u32) -> Result<u64> {
    if qubits == 0 || qubits > 62 {
        return Err(Error::InvalidSize(format!("{qubits} qubits")));
    }
    Ok(1u64 << qubits)
}
