//! Probe-plus-register simulation of resonant transitions between the ground
//! states of adjacent Hamiltonians.
//!
//! Joint basis layout: index `u` is `|0⟩⊗|u⟩` (probe relaxed) and `N + u` is
//! `|1⟩⊗|u⟩` (probe excited). The excited branch carries `+ω/2 + α·H_prev`,
//! the relaxed branch `−ω/2 + H_curr`, and the coupling is `c·σ_x ⊗ I`.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{chain_ground_energy, chain_member, MarkedSetFamily};
use crate::spectral::{eigh, eigh_capped, ComplexState, HermitianOperator, SpectralDecomposition, C64, DEFAULT_DENSE_CAP};

/// The single random stream used by a run.
pub type RunRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Refinement gives up when no probe point decays at least this often.
const MIN_RESONANT_RATE: f64 = 0.05;

/// Below this `|1 − α²|` the swapped transition cannot fix the energy scale.
const MIN_SWAP_LEVERAGE: f64 = 0.1;

/// Probe and register Hamiltonian for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSystem {
    pub omega: f64,
    pub coupling: f64,
    pub alpha: f64,
    register_dim: usize,
    matrix: HermitianOperator,
}

impl JointSystem {
    pub fn assemble(
        h_prev: &HermitianOperator,
        h_curr: &HermitianOperator,
        alpha: f64,
        omega: f64,
        coupling: f64,
        cap: usize,
    ) -> Result<Self> {
        let n = h_prev.dim();
        if h_curr.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h_curr.dim(),
            });
        }
        if 2 * n > cap {
            return Err(Error::DenseCap { dim: 2 * n, cap });
        }
        let matrix = HermitianOperator::from_fn(2 * n, |i, j| {
            let (pi, u) = (i / n, i % n);
            let (pj, v) = (j / n, j % n);
            let same = if u == v { 1.0 } else { 0.0 };
            match (pi, pj) {
                (0, 0) => h_curr.entry(u, v) - C64::new(omega / 2.0 * same, 0.0),
                (1, 1) => h_prev.entry(u, v) * alpha + C64::new(omega / 2.0 * same, 0.0),
                _ => C64::new(coupling * same, 0.0),
            }
        })?;
        Ok(Self {
            omega,
            coupling,
            alpha,
            register_dim: n,
            matrix,
        })
    }

    pub fn register_dim(&self) -> usize {
        self.register_dim
    }

    pub fn matrix(&self) -> &HermitianOperator {
        &self.matrix
    }

    pub fn dynamics(&self) -> Result<JointDynamics> {
        Ok(JointDynamics {
            register_dim: self.register_dim,
            decomposition: eigh_capped(&self.matrix, usize::MAX)?,
        })
    }
}

/// A joint system diagonalized once for repeated trials at one frequency.
#[derive(Debug, Clone)]
pub struct JointDynamics {
    register_dim: usize,
    decomposition: SpectralDecomposition,
}

impl JointDynamics {
    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    /// Probability that the probe is found relaxed after time `t`.
    pub fn decay_probability(&self, joint: &ComplexState, t: f64) -> Result<f64> {
        let out = self.decomposition.evolve(joint, t)?;
        Ok(relaxed_weight(&out, self.register_dim))
    }
}

fn relaxed_weight(joint: &ComplexState, n: usize) -> f64 {
    joint.amplitudes()[..n].iter().map(|a| a.norm_sqr()).sum()
}

/// `|1⟩ ⊗ register`.
pub fn excite(register: &ComplexState) -> ComplexState {
    let n = register.dim();
    let mut amps = vec![C64::new(0.0, 0.0); 2 * n];
    amps[n..].copy_from_slice(register.amplitudes());
    ComplexState::new(amps).expect("nonempty")
}

/// Outcome of one probe readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    /// 0 when the probe decayed.
    pub outcome: u8,
    /// Probability of outcome 0 before the draw.
    pub decay_probability: f64,
    /// Collapsed, renormalized joint state.
    pub state: ComplexState,
}

impl Readout {
    /// Register part of the collapsed state.
    pub fn register(&self) -> ComplexState {
        let n = self.state.dim() / 2;
        let start = if self.outcome == 0 { 0 } else { n };
        ComplexState::new(self.state.amplitudes()[start..start + n].to_vec()).expect("nonempty")
    }
}

/// Evolves for time `t`, reads the probe and collapses onto the observed branch.
pub fn evolve_and_measure(
    dynamics: &JointDynamics,
    joint: &ComplexState,
    t: f64,
    rng: &mut RunRng,
) -> Result<Readout> {
    let n = dynamics.register_dim;
    let evolved = dynamics.decomposition.evolve(joint, t)?;
    let p0 = relaxed_weight(&evolved, n).clamp(0.0, 1.0);
    let outcome = if rng.random::<f64>() < p0 { 0 } else { 1 };
    let mut amps = evolved.into_amplitudes();
    let range = if outcome == 0 { n..2 * n } else { 0..n };
    for a in &mut amps[range] {
        *a = C64::new(0.0, 0.0);
    }
    let state = ComplexState::new(amps)?.normalized()?;
    Ok(Readout {
        outcome,
        decay_probability: p0,
        state,
    })
}

/// Order in which frequency grid points are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrder {
    #[default]
    Ascending,
    /// Nearest to the window centre first, alternating outwards.
    CenterOut,
}

/// Controls for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct StepConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    /// Defaults to `⌈(ω_max − ω_min)/(2c·d̂0)⌉ + 1`.
    #[serde(default)]
    pub grid_points: Option<usize>,
    pub coupling: f64,
    /// Assumed overlap `d̂0` between consecutive ground states.
    pub overlap_estimate: f64,
    /// Defaults to `π/(2c·d̂0)`.
    #[serde(default)]
    pub evolution_time: Option<f64>,
    /// Defaults to `⌈3/p̂⌉` with `p̂ = sin²(c·t·d̂0)`.
    #[serde(default)]
    pub max_iters_per_frequency: Option<usize>,
    pub max_total_iters: u64,
    pub target_accuracy: f64,
    #[serde(default)]
    pub sweep: SweepOrder,
    #[serde(default = "default_cap")]
    pub dense_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_DENSE_CAP
}

impl StepConfig {
    /// Defaults for a window, coupling and overlap estimate.
    pub fn new(omega_min: f64, omega_max: f64, coupling: f64, overlap_estimate: f64) -> Self {
        Self {
            omega_min,
            omega_max,
            grid_points: None,
            coupling,
            overlap_estimate,
            evolution_time: None,
            max_iters_per_frequency: None,
            max_total_iters: 10_000,
            target_accuracy: 1e-3,
            sweep: SweepOrder::Ascending,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega_min, self.omega_max, self.coupling, self.overlap_estimate, self.target_accuracy]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::DomainError("non-finite step setting".into()));
        }
        if self.omega_min >= self.omega_max {
            return Err(Error::DomainError("frequency window is empty".into()));
        }
        if self.coupling <= 0.0 || self.target_accuracy <= 0.0 {
            return Err(Error::DomainError("coupling and accuracy must be positive".into()));
        }
        if !(self.overlap_estimate > 0.0 && self.overlap_estimate <= 1.0) {
            return Err(Error::DomainError("overlap estimate must lie in (0, 1]".into()));
        }
        if self.grid_points.is_some_and(|g| g < 2) {
            return Err(Error::DomainError("at least two grid points are needed".into()));
        }
        if self.evolution_time.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return Err(Error::DomainError("evolution time must be positive".into()));
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.evolution_time
            .unwrap_or(PI / (2.0 * self.coupling * self.overlap_estimate))
    }

    pub fn grid_len(&self) -> usize {
        self.grid_points.unwrap_or_else(|| {
            let width = self.omega_max - self.omega_min;
            (width / (2.0 * self.coupling * self.overlap_estimate) - 1e-9).ceil() as usize + 1
        })
    }

    pub fn grid(&self) -> Vec<f64> {
        let g = self.grid_len();
        let h = self.spacing();
        (0..g).map(|i| self.omega_min + h * i as f64).collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.omega_max - self.omega_min) / (self.grid_len() - 1) as f64
    }

    pub fn iters_per_frequency(&self) -> usize {
        self.max_iters_per_frequency.unwrap_or_else(|| {
            let p = (self.coupling * self.time() * self.overlap_estimate).sin().powi(2);
            (3.0 / p.max(1e-12)).ceil() as usize
        })
    }

    fn sweep_indices(&self) -> Vec<usize> {
        let g = self.grid_len();
        let mut idx: Vec<usize> = (0..g).collect();
        if self.sweep == SweepOrder::CenterOut {
            let centre = (g - 1) as f64 / 2.0;
            idx.sort_by(|&a, &b| (a as f64 - centre).abs().total_cmp(&(b as f64 - centre).abs()).then(a.cmp(&b)));
        }
        idx
    }
}

/// One probe readout in a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Trial {
    pub freq_index: usize,
    pub omega: f64,
    pub t: f64,
    pub outcome: u8,
    pub iter: u64,
}

/// What one step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub resonant_frequency: f64,
    /// `ω* + α·E_prev`.
    pub eigenvalue_estimate: f64,
    pub prepared_state: ComplexState,
    /// Decay probability of the trial that succeeded.
    pub decay_probability: f64,
    pub iteration_count: u64,
    pub log: Vec<Trial>,
}

/// Inputs of one step.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub h_prev: &'a HermitianOperator,
    pub h_curr: &'a HermitianOperator,
    /// Register state entering the step, ideally the ground state of `h_prev`.
    pub prev_state: &'a ComplexState,
    pub prev_energy: f64,
    pub alpha: f64,
}

/// Sweeps the frequency grid until the probe decays. After an excited
/// readout the collapsed register is fed straight into the next trial.
pub fn run_step(input: &StepInput<'_>, cfg: &StepConfig, rng: &mut RunRng) -> Result<StepOutcome> {
    cfg.validate()?;
    if input.prev_state.dim() != input.h_prev.dim() {
        return Err(Error::DimensionMismatch {
            expected: input.h_prev.dim(),
            found: input.prev_state.dim(),
        });
    }
    let grid = cfg.grid();
    let t = cfg.time();
    let per_frequency = cfg.iters_per_frequency();
    let mut register = input.prev_state.normalized()?;
    let mut log = Vec::new();
    let mut iter = 0u64;
    for i in cfg.sweep_indices() {
        let omega = grid[i];
        let dynamics = JointSystem::assemble(input.h_prev, input.h_curr, input.alpha, omega, cfg.coupling, cfg.dense_cap)?
            .dynamics()?;
        for _ in 0..per_frequency {
            if iter >= cfg.max_total_iters {
                return Err(Error::BudgetExhausted { step: None, iterations: iter });
            }
            iter += 1;
            let readout = evolve_and_measure(&dynamics, &excite(&register), t, rng)?;
            log.push(Trial {
                freq_index: i,
                omega,
                t,
                outcome: readout.outcome,
                iter,
            });
            register = readout.register();
            if readout.outcome == 0 {
                return Ok(StepOutcome {
                    resonant_frequency: omega,
                    eigenvalue_estimate: omega + input.alpha * input.prev_energy,
                    prepared_state: register,
                    decay_probability: readout.decay_probability,
                    iteration_count: iter,
                    log,
                });
            }
        }
    }
    Err(Error::BudgetExhausted { step: None, iterations: iter })
}

/// Result of the forward/backward frequency bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub energy: f64,
    pub forward_peak: f64,
    pub backward_peak: Option<f64>,
    /// Probe readouts drawn, both directions.
    pub samples: u64,
}

/// Sharpens the step energy to `cfg.target_accuracy`.
///
/// The forward peak sits at `E − α·E_prev` and the swapped (backward) peak at
/// `E_prev − α·E`; solving both gives `E` without trusting the previous
/// estimate. Each probe point draws `⌈4/ε²⌉` readouts from the exact
/// transition probability of a fresh `|1⟩⊗ground` input.
pub fn refine_eigenvalue(
    input: &StepInput<'_>,
    omega_star: f64,
    cfg: &StepConfig,
    rng: &mut RunRng,
) -> Result<Refinement> {
    cfg.validate()?;
    let spacing = cfg.spacing();
    let eps = cfg.target_accuracy;
    let alpha = input.alpha;
    let grid_energy = omega_star + alpha * input.prev_energy;
    if eps >= spacing {
        return Ok(Refinement {
            energy: grid_energy,
            forward_peak: omega_star,
            backward_peak: None,
            samples: 0,
        });
    }
    let t = cfg.time();
    let per_point = (4.0 / (eps * eps)).ceil() as u64;
    let prev_ground = input.prev_state.normalized()?;
    let curr_ground = eigh(input.h_curr)?.ground_state();
    let forward = |omega: f64| -> Result<f64> {
        JointSystem::assemble(input.h_prev, input.h_curr, alpha, omega, cfg.coupling, cfg.dense_cap)?
            .dynamics()?
            .decay_probability(&excite(&prev_ground), t)
    };
    let backward = |omega: f64| -> Result<f64> {
        JointSystem::assemble(input.h_curr, input.h_prev, alpha, omega, cfg.coupling, cfg.dense_cap)?
            .dynamics()?
            .decay_probability(&excite(&curr_ground), t)
    };
    let mut samples = 0;
    let forward_peak = locate_peak(omega_star, spacing, eps, per_point, &forward, rng, &mut samples)?;
    let forward_energy = forward_peak + alpha * input.prev_energy;
    let leverage = 1.0 - alpha * alpha;
    if leverage.abs() < MIN_SWAP_LEVERAGE {
        return Ok(Refinement {
            energy: forward_energy,
            forward_peak,
            backward_peak: None,
            samples,
        });
    }
    let backward_guess = input.prev_energy - alpha * forward_energy;
    let backward_peak = locate_peak(backward_guess, spacing, eps, per_point, &backward, rng, &mut samples)?;
    Ok(Refinement {
        energy: (forward_peak + alpha * backward_peak) / leverage,
        forward_peak,
        backward_peak: Some(backward_peak),
        samples,
    })
}

/// Bisects a single-peaked rate curve by comparing sampled rates at the
/// quarter points of the bracket.
fn locate_peak(
    centre: f64,
    half_width: f64,
    eps: f64,
    per_point: u64,
    rate: &dyn Fn(f64) -> Result<f64>,
    rng: &mut RunRng,
    samples: &mut u64,
) -> Result<f64> {
    let mut draw = |omega: f64, rng: &mut RunRng| -> Result<u64> {
        let p = rate(omega)?.clamp(0.0, 1.0);
        *samples += per_point;
        let dist = Binomial::new(per_point, p).map_err(|e| Error::DomainError(e.to_string()))?;
        Ok(dist.sample(rng))
    };
    let probes = [centre - half_width / 2.0, centre, centre + half_width / 2.0];
    let mut best = 0;
    for omega in probes {
        best = best.max(draw(omega, rng)?);
    }
    if (best as f64) < MIN_RESONANT_RATE * per_point as f64 {
        return Err(Error::BudgetExhausted {
            step: None,
            iterations: *samples,
        });
    }
    let (mut lo, mut hi) = (centre - half_width, centre + half_width);
    while hi - lo > eps {
        let mid = 0.5 * (lo + hi);
        let quarter = 0.25 * (hi - lo);
        let upper = draw(mid + quarter, rng)?;
        let lower = draw(mid - quarter, rng)?;
        if upper > lower {
            lo = mid;
        } else if lower > upper {
            hi = mid;
        } else {
            lo = mid - quarter;
            hi = mid + quarter;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One transition of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStep {
    pub alpha: f64,
    /// Frequency at which the step is expected to resonate.
    pub frequency: f64,
    pub overlap_estimate: f64,
}

/// Hamiltonians `H_0 … H_m` plus the per-step rescale rule.
#[derive(Debug, Clone)]
pub struct Chain {
    pub hamiltonians: Vec<HermitianOperator>,
    pub initial_state: ComplexState,
    pub initial_energy: f64,
    pub steps: Vec<ChainStep>,
}

impl Chain {
    /// Search-type chain over a marked-set family, acting on the class
    /// indicators of the family partition. Every step resonates at `ω = 1`
    /// with `α_j = (E_j − 1)/E_{j−1}`.
    pub fn from_family(family: &MarkedSetFamily, overlap_estimate: f64) -> Result<Self> {
        let m = family.len();
        if m == 0 {
            return Err(Error::EmptyLevels);
        }
        let mut hamiltonians = Vec::with_capacity(m + 1);
        let mut energies = Vec::with_capacity(m + 1);
        for j in 0..=m {
            hamiltonians.push(chain_member(family, j)?.effective_matrix());
            energies.push(chain_ground_energy(family, j)?);
        }
        let n = family.universe() as f64;
        let initial_state = ComplexState::from_real(
            &family.partition().iter().map(|&s| (s as f64 / n).sqrt()).collect::<Vec<_>>(),
        )?;
        let steps = (1..=m)
            .map(|j| ChainStep {
                alpha: (energies[j] - 1.0) / energies[j - 1],
                frequency: 1.0,
                overlap_estimate,
            })
            .collect();
        Ok(Self {
            hamiltonians,
            initial_state,
            initial_energy: -1.0,
            steps,
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    /// Ground-to-first-excited gap of every member.
    pub fn gaps(&self) -> Result<Vec<f64>> {
        self.hamiltonians
            .iter()
            .map(|h| {
                let e = h.eigenvalues()?;
                Ok(if e.len() < 2 { f64::INFINITY } else { e[1] - e[0] })
            })
            .collect()
    }

    /// `|⟨φ_0^(l−1)|φ_0^(l)⟩|` for every step, from the member ground states.
    pub fn overlaps(&self) -> Result<Vec<f64>> {
        let grounds = self
            .hamiltonians
            .iter()
            .map(|h| Ok(h.eigh()?.ground_state()))
            .collect::<Result<Vec<_>>>()?;
        grounds
            .windows(2)
            .map(|w| Ok(crate::spectral::overlap(&w[0], &w[1])?.norm()))
            .collect()
    }

    /// `margin` times the largest coupling with `c·d̂0` below both gaps of
    /// every step (the previous one rescaled by `α`).
    pub fn suggested_coupling(&self, margin: f64) -> Result<f64> {
        let gaps = self.gaps()?;
        let mut limit = f64::INFINITY;
        for (l, step) in self.steps.iter().enumerate() {
            let narrowest = gaps[l + 1].min(step.alpha.abs() * gaps[l]);
            limit = limit.min(narrowest / step.overlap_estimate);
        }
        if !limit.is_finite() {
            return Err(Error::DomainError("chain has no finite gap".into()));
        }
        Ok(margin * limit)
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Window and budget for step `l` (1-based).
    pub fn step_config(&self, l: usize, cfg: &MultistepConfig) -> StepConfig {
        let step = self.steps[l - 1];
        let spacing = 2.0 * cfg.coupling * step.overlap_estimate;
        let half = spacing * (cfg.window_points.max(2) - 1) as f64 / 2.0;
        StepConfig {
            omega_min: step.frequency - half,
            omega_max: step.frequency + half,
            grid_points: Some(cfg.window_points.max(2)),
            coupling: cfg.coupling,
            overlap_estimate: step.overlap_estimate,
            evolution_time: None,
            max_iters_per_frequency: cfg.max_iters_per_frequency,
            max_total_iters: cfg.max_step_iters,
            target_accuracy: cfg.target_accuracy.unwrap_or(spacing),
            sweep: cfg.sweep,
            dense_cap: cfg.dense_cap,
        }
    }
}

/// Controls shared by every step of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct MultistepConfig {
    pub coupling: f64,
    /// Grid points per step window, spaced by `2c·d̂0` around the expected frequency.
    pub window_points: usize,
    #[serde(default)]
    pub max_iters_per_frequency: Option<usize>,
    pub max_step_iters: u64,
    /// Refine each energy to this accuracy; `None` keeps grid values.
    #[serde(default)]
    pub target_accuracy: Option<f64>,
    #[serde(default)]
    pub sweep: SweepOrder,
    #[serde(default = "default_cap")]
    pub dense_cap: usize,
}

impl Default for MultistepConfig {
    fn default() -> Self {
        Self {
            coupling: 1e-2,
            window_points: 3,
            max_iters_per_frequency: None,
            max_step_iters: 10_000,
            target_accuracy: None,
            sweep: SweepOrder::CenterOut,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

/// One completed step of a chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub outcome: StepOutcome,
    pub refinement: Option<Refinement>,
    /// Energy carried into the next step.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistepOutcome {
    pub final_state: ComplexState,
    pub energy_trace: Vec<f64>,
    /// Probe readouts that acted on the register, summed over steps.
    pub total_iterations: u64,
    pub refinement_samples: u64,
    pub steps: Vec<StepReport>,
}

pub fn run_multistep(chain: &Chain, cfg: &MultistepConfig, rng: &mut RunRng) -> Result<MultistepOutcome> {
    if chain.hamiltonians.len() != chain.steps.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: chain.steps.len() + 1,
            found: chain.hamiltonians.len(),
        });
    }
    let mut state = chain.initial_state.normalized()?;
    let mut energy = chain.initial_energy;
    let mut reports = Vec::with_capacity(chain.len());
    let mut total = 0;
    let mut refinement_samples = 0;
    for l in 1..=chain.len() {
        let step_cfg = chain.step_config(l, cfg);
        let input = StepInput {
            h_prev: &chain.hamiltonians[l - 1],
            h_curr: &chain.hamiltonians[l],
            prev_state: &state,
            prev_energy: energy,
            alpha: chain.steps[l - 1].alpha,
        };
        let with_step = |e: Error| match e {
            Error::BudgetExhausted { iterations, .. } => Error::BudgetExhausted { step: Some(l), iterations },
            other => other,
        };
        let outcome = run_step(&input, &step_cfg, rng).map_err(with_step)?;
        let refinement = match cfg.target_accuracy {
            Some(_) => Some(refine_eigenvalue(&input, outcome.resonant_frequency, &step_cfg, rng).map_err(with_step)?),
            None => None,
        };
        total += outcome.iteration_count;
        refinement_samples += refinement.map_or(0, |r| r.samples);
        energy = refinement.map_or(outcome.eigenvalue_estimate, |r| r.energy);
        state = outcome.prepared_state.clone();
        reports.push(StepReport {
            outcome,
            refinement,
            energy,
        });
    }
    Ok(MultistepOutcome {
        final_state: state,
        energy_trace: reports.iter().map(|r| r.energy).collect(),
        total_iterations: total,
        refinement_samples,
        steps: reports,
    })
}

/// `sin²(c·t·d0)`.
pub fn decay_probability(coupling: f64, t: f64, overlap: f64) -> f64 {
    (coupling * t * overlap).sin().powi(2)
}

/// Two-level transition probability at detuning `δ`:
/// `(2cd0)²/Ω² · sin²(Ωt/2)` with `Ω² = (2cd0)² + δ²`.
pub fn rabi_transition(coupling: f64, overlap: f64, detuning: f64, t: f64) -> f64 {
    let drive = 2.0 * coupling * overlap;
    let omega = drive.hypot(detuning);
    if omega == 0.0 {
        return 0.0;
    }
    (drive / omega).powi(2) * (omega * t / 2.0).sin().powi(2)
}

fn check_leakage_inputs(gap_prev: f64, gap_curr: f64, overlap: f64, alpha: f64, coupling: f64) -> Result<f64> {
    let width = coupling * overlap;
    if !(coupling > 0.0 && overlap > 0.0 && overlap <= 1.0 + 1e-12) {
        return Err(Error::AssumptionViolated(format!(
            "need c > 0 and 0 < d0 ≤ 1, got c = {coupling}, d0 = {overlap}"
        )));
    }
    if gap_curr <= width || alpha * gap_prev <= width {
        return Err(Error::AssumptionViolated(format!(
            "gaps ({gap_curr}, α·{gap_prev}) must exceed c·d0 = {width}"
        )));
    }
    Ok(width)
}

/// `a²c² = (4c²(1−d0²)/π²)·[1/(Δ_curr/(c d0) − 1)² + 1/(α Δ_prev/(c d0) − 1)²]`.
pub fn leakage_bound(gap_prev: f64, gap_curr: f64, overlap: f64, alpha: f64, coupling: f64) -> Result<f64> {
    let width = check_leakage_inputs(gap_prev, gap_curr, overlap, alpha, coupling)?;
    let a = 1.0 / (gap_curr / width - 1.0).powi(2);
    let b = 1.0 / (alpha * gap_prev / width - 1.0).powi(2);
    Ok(4.0 * coupling * coupling * (1.0 - overlap * overlap) / (PI * PI) * (a + b))
}

/// First-order leakage with the evolution time kept:
/// `c²(1−d0²)·[1/(Δ_curr − c d0)² + 1/(α Δ_prev − c d0)²]`.
pub fn leakage_bound_first_order(
    gap_prev: f64,
    gap_curr: f64,
    overlap: f64,
    alpha: f64,
    coupling: f64,
) -> Result<f64> {
    let width = check_leakage_inputs(gap_prev, gap_curr, overlap, alpha, coupling)?;
    let a = 1.0 / (gap_curr - width).powi(2);
    let b = 1.0 / (alpha * gap_prev - width).powi(2);
    Ok(coupling * coupling * (1.0 - overlap * overlap) * (a + b))
}

/// `[1 − (a_max c)²]^m`.
pub fn success_bound(a_max: f64, coupling: f64, steps: u32) -> Result<f64> {
    let x = a_max * coupling;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::DomainError(format!("a_max·c = {x} must lie in [0, 1)")));
    }
    Ok((1.0 - x * x).powi(steps as i32))
}

/// Run transcript line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TranscriptRecord {
    #[serde(rename_all = "camelCase")]
    Trial {
        step: usize,
        freq_index: usize,
        omega: f64,
        t: f64,
        outcome: u8,
        iter: u64,
    },
    Final {
        step: usize,
        #[serde(rename = "omegaStar")]
        omega_star: f64,
        #[serde(rename = "E0")]
        energy: f64,
        p0: f64,
        iterations: u64,
    },
}

/// Transcript lines for a chain run, steps numbered from 1.
pub fn transcript(steps: &[StepReport]) -> Vec<TranscriptRecord> {
    let mut out = Vec::new();
    for (i, report) in steps.iter().enumerate() {
        let step = i + 1;
        for trial in &report.outcome.log {
            out.push(TranscriptRecord::Trial {
                step,
                freq_index: trial.freq_index,
                omega: trial.omega,
                t: trial.t,
                outcome: trial.outcome,
                iter: trial.iter,
            });
        }
        out.push(TranscriptRecord::Final {
            step,
            omega_star: report.outcome.resonant_frequency,
            energy: report.energy,
            p0: report.outcome.decay_probability,
            iterations: report.outcome.iteration_count,
        });
    }
    out
}

pub fn write_transcript<W: Write>(records: &[TranscriptRecord], mut out: W) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
