//! Spectral gaps along linear interpolation paths `H(s) = (1−s)A + sB`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ReducedModel;
use crate::spectral::{eigenvalues_capped, HermitianOperator, DEFAULT_DENSE_CAP};

/// Golden-section tolerance in `s`.
pub const REFINE_TOLERANCE: f64 = 1e-10;

/// Gaps at or below this are reported as exact crossings.
const CROSSING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Reduced(ReducedModel),
    Dense(HermitianOperator),
}

/// Which eigenvalues compete for the two lowest slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapSector {
    /// Whole spectrum, deflated values included.
    #[default]
    Full,
    /// Only the span of the class indicators, where a symmetric start state lives.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticPath {
    start: Endpoint,
    end: Endpoint,
    sector: GapSector,
    dense_cap: usize,
}

impl AdiabaticPath {
    pub fn reduced(start: ReducedModel, end: ReducedModel) -> Result<Self> {
        if start.partition() != end.partition() {
            return Err(Error::OrderingViolation("endpoints must share one partition".into()));
        }
        Ok(Self {
            start: Endpoint::Reduced(start),
            end: Endpoint::Reduced(end),
            sector: GapSector::Full,
            dense_cap: DEFAULT_DENSE_CAP,
        })
    }

    pub fn dense(start: HermitianOperator, end: HermitianOperator) -> Result<Self> {
        if start.dim() != end.dim() {
            return Err(Error::DimensionMismatch {
                expected: start.dim(),
                found: end.dim(),
            });
        }
        Ok(Self {
            start: Endpoint::Dense(start),
            end: Endpoint::Dense(end),
            sector: GapSector::Full,
            dense_cap: DEFAULT_DENSE_CAP,
        })
    }

    pub fn with_sector(mut self, sector: GapSector) -> Self {
        self.sector = sector;
        self
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    /// Two lowest eigenvalues of `H(s)`.
    pub fn lowest_pair(&self, s: f64) -> Result<(f64, f64)> {
        let values = match (&self.start, &self.end) {
            (Endpoint::Reduced(a), Endpoint::Reduced(b)) => {
                let model = a.interpolate(b, s)?;
                match self.sector {
                    GapSector::Full => model.reduce().lowest(2)?,
                    GapSector::Symmetric => model.effective_matrix().eigenvalues()?,
                }
            }
            (Endpoint::Dense(a), Endpoint::Dense(b)) => {
                if a.dim() > self.dense_cap {
                    return Err(Error::DenseCap {
                        dim: a.dim(),
                        cap: self.dense_cap,
                    });
                }
                eigenvalues_capped(&a.linear_combination(1.0 - s, b, s)?, self.dense_cap)?
            }
            _ => return Err(Error::DomainError("mixed endpoint kinds".into())),
        };
        match values[..] {
            [e0, e1, ..] => Ok((e0, e1)),
            _ => Err(Error::InvalidDimension(values.len())),
        }
    }

    pub fn gap(&self, s: f64) -> Result<f64> {
        let (e0, e1) = self.lowest_pair(s)?;
        Ok(e1 - e0)
    }
}

/// Sampled gap curve with a refined minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct GapScan {
    pub s_grid: Vec<f64>,
    pub ground: Vec<f64>,
    pub excited: Vec<f64>,
    pub gaps: Vec<f64>,
    pub min_gap: f64,
    pub s_star: f64,
    /// The minimum closes to zero: an exact level crossing.
    pub crossing: bool,
}

impl GapScan {
    /// `s,E0,E1,gap` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,E0,E1,gap\n");
        for i in 0..self.s_grid.len() {
            out.push_str(&format!(
                "{:.6e},{:.6e},{:.6e},{:.6e}\n",
                self.s_grid[i], self.ground[i], self.excited[i], self.gaps[i]
            ));
        }
        out
    }
}

/// Evaluates the gap on `grid_points` uniform values of `s`, then refines
/// the smallest one by golden-section search between its neighbours.
pub fn scan_gap(path: &AdiabaticPath, grid_points: usize) -> Result<GapScan> {
    scan_with(|s| path.lowest_pair(s), grid_points)
}

fn scan_with(pair: impl Fn(f64) -> Result<(f64, f64)> + Sync, grid_points: usize) -> Result<GapScan> {
    if grid_points < 3 {
        return Err(Error::DomainError("a scan needs at least three grid points".into()));
    }
    let last = (grid_points - 1) as f64;
    let s_grid: Vec<f64> = (0..grid_points).map(|i| i as f64 / last).collect();
    let pairs: Vec<(f64, f64)> = s_grid.par_iter().map(|&s| pair(s)).collect::<Result<_>>()?;
    let ground: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let excited: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let gaps: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let best = (0..grid_points)
        .min_by(|&a, &b| gaps[a].total_cmp(&gaps[b]))
        .expect("nonempty grid");
    let lo = s_grid[best.saturating_sub(1)];
    let hi = s_grid[(best + 1).min(grid_points - 1)];
    let mut err = None;
    let (s_ref, g_ref) = golden_section(
        |s| match pair(s) {
            Ok((e0, e1)) => e1 - e0,
            Err(e) => {
                err.get_or_insert(e);
                f64::INFINITY
            }
        },
        lo,
        hi,
        REFINE_TOLERANCE,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let (s_star, min_gap) = if g_ref <= gaps[best] {
        (s_ref, g_ref)
    } else {
        (s_grid[best], gaps[best])
    };
    Ok(GapScan {
        s_grid,
        ground,
        excited,
        gaps,
        min_gap,
        s_star,
        crossing: min_gap <= CROSSING_TOLERANCE,
    })
}

/// Minimizes a unimodal function on `[lo, hi]` to a bracket of width `tol`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("three candidates")
}

fn check_unit(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::DomainError(format!("s = {s} outside [0, 1]")));
    }
    Ok(())
}

/// `√((1−2s)² + 4s(1−s)/N)` for a single marked item.
pub fn gap_search_analytic(universe: u64, s: f64) -> Result<f64> {
    if universe < 2 {
        return Err(Error::DomainError(format!("N = {universe} must be at least 2")));
    }
    check_unit(s)?;
    let n = universe as f64;
    Ok(((1.0 - 2.0 * s).powi(2) + 4.0 * s * (1.0 - s) / n).sqrt())
}

/// `λ_± = (−1 ± √((2s−1)² − 4(N_q/N)s(s−1)))/2`: the symmetric pair of
/// `(1−s)H_0 − s·Π_M` with `N_q` marked items.
pub fn gap_multimarked(universe: u64, marked: u64, s: f64) -> Result<(f64, f64)> {
    if marked == 0 || marked >= universe {
        return Err(Error::DomainError(format!("{marked} marked items of {universe}")));
    }
    check_unit(s)?;
    let q = marked as f64 / universe as f64;
    let root = ((2.0 * s - 1.0).powi(2) - 4.0 * q * s * (s - 1.0)).sqrt();
    Ok(((-1.0 - root) / 2.0, (-1.0 + root) / 2.0))
}

/// Minimum gap and its location for a unique solution at 0 and every other
/// state at `n − 1`, with `N = 2^n`.
pub fn gap_case_c(qubits: u32) -> Result<(f64, f64)> {
    if !(2..=62).contains(&qubits) {
        return Err(Error::DomainError(format!("{qubits} qubits")));
    }
    let n = qubits as f64;
    let big = (1u64 << qubits) as f64;
    let denom = n * n * big - 4.0 * (n - 1.0);
    let gap = 2.0 * (n - 1.0) / big * ((big - 1.0) * big / denom).sqrt();
    let s = (n * big - 2.0 * (n - 1.0)) / denom;
    Ok((gap, s))
}

/// Symmetric-sector eigenvalues on the path from `H_0` to the first
/// intermediate Hamiltonian `H_1`.
pub fn first_step_eigenvalues(universe: u64, marked: u64, s: f64) -> Result<(f64, f64)> {
    if marked == 0 || marked >= universe {
        return Err(Error::DomainError(format!("{marked} marked items of {universe}")));
    }
    let y = 1.0 - marked as f64 / universe as f64;
    let root = (1.0 - 4.0 * (s * y * y - s * s * y.powi(3))).sqrt();
    Ok(((-1.0 - root) / 2.0, (-1.0 + root) / 2.0))
}

/// `(√(N_1/N), N/(2(N−N_1)))`, provided the stationary point lies in `[0, 1]`.
pub fn first_step_gap(universe: u64, marked: u64) -> Result<(f64, f64)> {
    if marked == 0 || marked >= universe {
        return Err(Error::DomainError(format!("{marked} marked items of {universe}")));
    }
    let (n, n1) = (universe as f64, marked as f64);
    let s_star = n / (2.0 * (n - n1));
    if s_star > 1.0 {
        return Err(Error::NoInteriorMinimum { s_star });
    }
    Ok(((n1 / n).sqrt(), s_star))
}

/// Large-`N` limit of the step-pair matrix with `N_j/N = fraction` and
/// `N_{j−1}/N = fraction/ratio`.
pub fn stepwise_matrix(fraction: f64, ratio: f64, s: f64) -> Result<HermitianOperator> {
    check_unit(s)?;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::DomainError(format!("ratio {ratio} outside (0, 1)")));
    }
    let prev = fraction / ratio;
    if !(fraction > 0.0 && prev < 1.0) {
        return Err(Error::DomainError(format!(
            "fractions {fraction} and {prev} must lie in (0, 1)"
        )));
    }
    let tau = (1.0 - s) * prev + s * fraction;
    let nu = tau - 1.0;
    let outside = 1.0 - prev;
    let shell = prev - fraction;
    let rows = [
        [
            -tau * fraction + nu,
            -tau * (shell * fraction).sqrt(),
            -tau * (fraction * outside).sqrt(),
        ],
        [
            -tau * (shell * fraction).sqrt(),
            -tau * shell + s * (1.0 - fraction) + nu,
            -tau * (shell * outside).sqrt(),
        ],
        [
            -tau * (fraction * outside).sqrt(),
            -tau * (shell * outside).sqrt(),
            -tau * outside,
        ],
    ];
    HermitianOperator::from_real_fn(3, |i, j| rows[i][j])
}

/// Gap curve of [`stepwise_matrix`] over `s ∈ [0, 1]`.
pub fn stepwise_gap_scan(fraction: f64, ratio: f64, grid_points: usize) -> Result<GapScan> {
    stepwise_matrix(fraction, ratio, 0.0)?;
    scan_with(
        |s| {
            let e = stepwise_matrix(fraction, ratio, s)?.eigenvalues()?;
            Ok((e[0], e[1]))
        },
        grid_points,
    )
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_scaling(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::DomainError("a fit needs at least three points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::DomainError("fit inputs must be positive".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DomainError("all abscissae coincide".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ScalingFit {
        exponent,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_initial, Level, ProblemInstance};

    #[test]
    fn search_closed_form_values() {
        assert!((gap_search_analytic(1024, 0.5).unwrap() - 0.03125).abs() < 1e-15);
        assert_eq!(gap_search_analytic(1024, 0.0).unwrap(), 1.0);
        assert!((gap_search_analytic(100, 0.3).unwrap() - 0.410366).abs() < 1e-6);
        assert_eq!(gap_search_analytic(1, 0.3).unwrap_err().name(), "DomainError");
    }

    #[test]
    fn multimarked_values() {
        let (lo, hi) = gap_multimarked(16, 4, 0.5).unwrap();
        assert!((hi - lo - 0.5).abs() < 1e-15);
        for s in [0.0, 1.0] {
            let (lo, hi) = gap_multimarked(64, 5, s).unwrap();
            assert!((hi - lo - 1.0).abs() < 1e-15);
        }
        let (lo, hi) = gap_multimarked(1024, 1, 0.5).unwrap();
        assert!((hi - lo - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn first_step_values() {
        let (g, s) = first_step_gap(4096, 1024).unwrap();
        assert!((g - 0.5).abs() < 1e-15 && (s - 2.0 / 3.0).abs() < 1e-15);
        let (g, s) = first_step_gap(1 << 20, 1).unwrap();
        assert!((g - 2f64.powi(-10)).abs() < 1e-12 && (s - 0.5).abs() < 1e-6);
        match first_step_gap(1024, 513).unwrap_err() {
            Error::NoInteriorMinimum { s_star } => assert!((s_star - 1024.0 / 1022.0).abs() < 1e-12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn crossing_is_flagged() {
        let a = ReducedModel::new(vec![Level::new(0.0, 1), Level::new(1.0, 1)], 0.0).unwrap();
        let b = ReducedModel::new(vec![Level::new(1.0, 1), Level::new(0.0, 1)], 0.0).unwrap();
        let scan = scan_gap(&AdiabaticPath::reduced(a, b).unwrap(), 101).unwrap();
        assert!(scan.crossing);
        assert!((scan.s_star - 0.5).abs() < 1e-9);
    }

    #[test]
    fn csv_header_and_rows() {
        let inst = ProblemInstance::search(4, 1).unwrap();
        let path = AdiabaticPath::reduced(inst.initial_model().unwrap(), inst.problem_model().unwrap()).unwrap();
        let scan = scan_gap(&path, 5).unwrap();
        let csv = scan.to_csv();
        assert!(csv.starts_with("s,E0,E1,gap\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn initial_endpoint_gap_is_one() {
        let a = build_initial(8).unwrap();
        let path = AdiabaticPath::reduced(a.clone(), a).unwrap();
        assert!((path.gap(0.3).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_power_laws() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = fit_scaling(&xs, &sq).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
        let inv: Vec<f64> = xs.iter().map(|x| 3.0 / x.sqrt()).collect();
        assert!((fit_scaling(&xs, &inv).unwrap().exponent + 0.5).abs() < 1e-12);
        assert_eq!(fit_scaling(&[1.0, 0.0, 2.0], &[1.0, 1.0, 1.0]).unwrap_err().name(), "DomainError");
    }

    #[test]
    fn golden_section_finds_kink_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3).abs() + 1.0, 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-11 && (fx - 1.0).abs() < 1e-11);
    }
}
