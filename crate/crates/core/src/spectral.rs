//! Dense Hermitian kernel: eigendecomposition, unitary propagation and
//! state arithmetic. Everything downstream goes through here.

use std::io::Write;

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest dimension handed to the dense eigensolver unless a caller
/// supplies its own cap.
pub const DEFAULT_DENSE_CAP: usize = 8192;

/// Asymmetry above this is rejected; below it the matrix is symmetrized.
pub const HERMITIAN_TOLERANCE: f64 = 1e-9;

/// Components with modulus below this are skipped when fixing phases.
const PHASE_CUTOFF: f64 = 1e-10;

/// A state vector. Constructors do not normalize; call [`ComplexState::normalized`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState {
    amplitudes: Vec<C64>,
}

impl ComplexState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if dim == 0 || k >= dim {
            return Err(Error::InvalidDimension(dim));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[k] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    /// Equal superposition of all basis states.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let a = 1.0 / (dim as f64).sqrt();
        Ok(Self {
            amplitudes: vec![C64::new(a, 0.0); dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DomainError("cannot normalize a zero state".into()));
        }
        Ok(Self {
            amplitudes: self.amplitudes.iter().map(|a| a / norm).collect(),
        })
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &ComplexState) -> Result<f64> {
        Ok(overlap(self, other)?.norm_sqr())
    }
}

/// `⟨a|b⟩`, antilinear in the first argument.
pub fn overlap(a: &ComplexState, b: &ComplexState) -> Result<C64> {
    check_dims(a.dim(), b.dim())?;
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Dense Hermitian matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    entries: Vec<C64>,
    real: bool,
}

impl HermitianOperator {
    /// Builds from a row-major buffer, rejecting asymmetry above
    /// [`HERMITIAN_TOLERANCE`] and symmetrizing what remains.
    pub fn from_row_major(dim: usize, mut entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        check_dims(dim * dim, entries.len())?;
        let mut violation: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i].conj();
                if !(a.re.is_finite() && a.im.is_finite()) {
                    return Err(Error::DomainError("non-finite matrix entry".into()));
                }
                violation = violation.max((a - b).norm());
                let mean = (a + b) * 0.5;
                entries[i * dim + j] = mean;
                entries[j * dim + i] = mean.conj();
            }
            entries[i * dim + i].im = 0.0;
        }
        if violation > HERMITIAN_TOLERANCE {
            return Err(Error::NonHermitian { violation });
        }
        let real = entries.iter().all(|z| z.im == 0.0);
        Ok(Self { dim, entries, real })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Result<Self> {
        let entries = (0..dim * dim).map(|idx| f(idx / dim, idx % dim)).collect();
        Self::from_row_major(dim, entries)
    }

    pub fn from_real_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::from_fn(dim, |i, j| C64::new(f(i, j), 0.0))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            check_dims(dim, row.len())?;
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let dim = values.len();
        Self::from_real_fn(dim, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// `coefficient·|ψ⟩⟨ψ|`.
    pub fn projector(state: &ComplexState, coefficient: f64) -> Result<Self> {
        let a = state.amplitudes();
        Self::from_fn(state.dim(), |i, j| a[i] * a[j].conj() * coefficient)
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::from_real_fn(dim, |_, _| 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Self::from_row_major(self.dim, entries)
    }

    pub fn apply(&self, psi: &ComplexState) -> Result<ComplexState> {
        check_dims(self.dim, psi.dim())?;
        let x = psi.amplitudes();
        let out = self
            .entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(h, v)| h * v).sum())
            .collect();
        ComplexState::new(out)
    }

    /// `⟨ψ|H|ψ⟩`.
    pub fn expectation(&self, psi: &ComplexState) -> Result<f64> {
        Ok(overlap(psi, &self.apply(psi)?)?.re)
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_dims(self.dim, other.dim)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }

    pub fn eigh(&self) -> Result<SpectralDecomposition> {
        eigh(self)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues_capped(self, DEFAULT_DENSE_CAP)
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    dim: usize,
    eigenvalues: Vec<f64>,
    // column k holds eigenvector k: vectors[k * dim + i]
    vectors: Vec<C64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> ComplexState {
        ComplexState {
            amplitudes: self.column(k).to_vec(),
        }
    }

    fn column(&self, k: usize) -> &[C64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> ComplexState {
        self.eigenvector(0)
    }

    /// `E_1 − E_0`, zero for a one-dimensional space.
    pub fn gap(&self) -> f64 {
        if self.dim < 2 {
            return 0.0;
        }
        self.eigenvalues[1] - self.eigenvalues[0]
    }

    /// Expansion coefficients `⟨v_k|ψ⟩`.
    pub fn coefficients(&self, psi: &ComplexState) -> Result<Vec<C64>> {
        check_dims(self.dim, psi.dim())?;
        let x = psi.amplitudes();
        Ok((0..self.dim)
            .map(|k| self.column(k).iter().zip(x).map(|(v, a)| v.conj() * a).sum())
            .collect())
    }

    /// `exp(−iHt)ψ`.
    pub fn evolve(&self, psi: &ComplexState, t: f64) -> Result<ComplexState> {
        let coeffs = self.coefficients(psi)?;
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (k, (&lambda, c)) in self.eigenvalues.iter().zip(coeffs).enumerate() {
            let phase = C64::from_polar(1.0, -lambda * t) * c;
            for (o, v) in out.iter_mut().zip(self.column(k)) {
                *o += v * phase;
            }
        }
        ComplexState::new(out)
    }

    /// `Σ λ_k |v_k⟩⟨v_k|`.
    pub fn reconstruct(&self) -> Result<HermitianOperator> {
        let n = self.dim;
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = self.column(k);
            for i in 0..n {
                for j in 0..n {
                    entries[i * n + j] += v[i] * v[j].conj() * lambda;
                }
            }
        }
        HermitianOperator::from_row_major(n, entries)
    }

    /// One row per eigenpair: eigenvalue, then re/im of each component.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["eigenvalue".to_string()];
        for i in 0..self.dim {
            header.push(format!("re{i}"));
            header.push(format!("im{i}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for (k, lambda) in self.eigenvalues.iter().enumerate() {
            let mut row = vec![format!("{lambda:e}")];
            for z in self.column(k) {
                row.push(format!("{:e}", z.re));
                row.push(format!("{:e}", z.im));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn eigh(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    eigh_capped(h, DEFAULT_DENSE_CAP)
}

pub fn eigh_capped(h: &HermitianOperator, cap: usize) -> Result<SpectralDecomposition> {
    let n = h.dim;
    if n > cap {
        return Err(Error::DimensionCap { dim: n, cap });
    }
    let (values, mut vectors) = if h.real {
        let m = Mat::<f64>::from_fn(n, n, |i, j| h.entries[i * n + j].re);
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::NoConvergence)?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let values: Vec<f64> = (0..n).map(|k| s[k]).collect();
        let mut vectors = Vec::with_capacity(n * n);
        for k in 0..n {
            vectors.extend((0..n).map(|i| C64::new(u[(i, k)], 0.0)));
        }
        (values, vectors)
    } else {
        let m = Mat::<C64>::from_fn(n, n, |i, j| h.entries[i * n + j]);
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::NoConvergence)?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let values: Vec<f64> = (0..n).map(|k| s[k].re).collect();
        let mut vectors = Vec::with_capacity(n * n);
        for k in 0..n {
            vectors.extend((0..n).map(|i| u[(i, k)]));
        }
        (values, vectors)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    if order.iter().enumerate().any(|(i, &k)| i != k) {
        let old = std::mem::take(&mut vectors);
        for &k in &order {
            vectors.extend_from_slice(&old[k * n..(k + 1) * n]);
        }
    }
    for column in vectors.chunks_exact_mut(n) {
        fix_phase(column);
    }
    Ok(SpectralDecomposition {
        dim: n,
        eigenvalues,
        vectors,
    })
}

/// Rotates a vector so its first non-negligible component is real positive.
fn fix_phase(v: &mut [C64]) {
    if let Some(first) = v.iter().find(|z| z.norm() > PHASE_CUTOFF) {
        let phase = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Ascending eigenvalues only; cheaper than [`eigh`].
pub fn eigenvalues_capped(h: &HermitianOperator, cap: usize) -> Result<Vec<f64>> {
    let n = h.dim;
    if n > cap {
        return Err(Error::DimensionCap { dim: n, cap });
    }
    let mut values = if h.real {
        Mat::<f64>::from_fn(n, n, |i, j| h.entries[i * n + j].re)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::NoConvergence)?
    } else {
        Mat::<C64>::from_fn(n, n, |i, j| h.entries[i * n + j])
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::NoConvergence)?
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// `exp(−iHt)ψ` through a fresh decomposition. Reuse a
/// [`SpectralDecomposition`] when propagating repeatedly.
pub fn evolve(h: &HermitianOperator, psi: &ComplexState, t: f64) -> Result<ComplexState> {
    check_dims(h.dim, psi.dim())?;
    eigh(h)?.evolve(psi, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_operator_has_zero_spectrum() {
        let h = HermitianOperator::zeros(2).unwrap();
        assert_eq!(eigh(&h).unwrap().eigenvalues(), &[0.0, 0.0]);
    }

    #[test]
    fn uniform_projector_spectrum() {
        let psi = ComplexState::uniform(4).unwrap();
        let h = HermitianOperator::projector(&psi, -1.0).unwrap();
        let d = eigh(&h).unwrap();
        let expected = [-1.0, 0.0, 0.0, 0.0];
        for (a, b) in d.eigenvalues().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((overlap(&d.ground_state(), &psi).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let err = HermitianOperator::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap_err();
        assert_eq!(err.name(), "NonHermitian");
    }

    #[test]
    fn cap_is_enforced() {
        let h = HermitianOperator::zeros(5).unwrap();
        assert_eq!(
            eigh_capped(&h, 4).unwrap_err(),
            Error::DimensionCap { dim: 5, cap: 4 }
        );
    }

    #[test]
    fn phase_convention_makes_first_component_positive() {
        let h = HermitianOperator::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(1.0, 0.0)],
        ])
        .unwrap();
        let d = eigh(&h).unwrap();
        for k in 0..2 {
            let v = d.eigenvector(k);
            assert!(v.amplitudes()[0].re > 0.0);
            assert!(v.amplitudes()[0].im.abs() < 1e-15);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let h = HermitianOperator::diagonal(&[1.0, 2.0]).unwrap();
        let psi = ComplexState::from_real(&[0.6, 0.8]).unwrap();
        let out = evolve(&h, &psi, 0.0).unwrap();
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn stationary_state_picks_up_phase() {
        let h = HermitianOperator::diagonal(&[1.0, 2.0]).unwrap();
        let psi = ComplexState::basis(2, 0).unwrap();
        let out = evolve(&h, &psi, PI).unwrap();
        assert!((out.amplitudes()[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(out.amplitudes()[1].norm() < 1e-15);
    }

    #[test]
    fn sigma_x_half_period() {
        let coupling = 0.3;
        let h = HermitianOperator::from_real_fn(2, |i, j| if i != j { coupling } else { 0.0 })
            .unwrap();
        let psi = ComplexState::basis(2, 0).unwrap();
        let t = PI / (2.0 * coupling);
        let out = evolve(&h, &psi, t).unwrap();
        // Taylor series of exp(-iHt) as an independent route.
        let mut term = psi.amplitudes().to_vec();
        let mut sum = term.clone();
        for k in 1..80 {
            let applied = h.apply(&ComplexState::new(term.clone()).unwrap()).unwrap();
            term = applied
                .amplitudes()
                .iter()
                .map(|a| a * c(0.0, -t) / k as f64)
                .collect();
            for (s, x) in sum.iter_mut().zip(&term) {
                *s += x;
            }
        }
        let expected = [c(0.0, 0.0), c(0.0, -1.0)];
        for i in 0..2 {
            assert!((out.amplitudes()[i] - expected[i]).norm() < 1e-12);
            assert!((sum[i] - expected[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn uniform_overlap_with_basis_state() {
        let psi = ComplexState::uniform(1024).unwrap();
        let q = ComplexState::basis(1024, 17).unwrap();
        assert!((overlap(&psi, &q).unwrap().re - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn overlap_dimension_mismatch() {
        let a = ComplexState::basis(2, 0).unwrap();
        let b = ComplexState::basis(3, 0).unwrap();
        assert_eq!(overlap(&a, &b).unwrap_err().name(), "DimensionMismatch");
    }

    #[test]
    fn csv_dump_has_interleaved_components() {
        let h = HermitianOperator::diagonal(&[2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        eigh(&h).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "eigenvalue,re0,im0,re1,im1");
        assert_eq!(lines[1], "1e0,0e0,0e0,1e0,0e0");
    }
}
