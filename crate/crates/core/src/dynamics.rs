//! Exact propagation through the spectral solution, distances to the steady
//! state, qubit temperature and the characteristic times derived from them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, max_abs, Op6, C64};
use crate::liouvillian::SpectralDecomposition;
use crate::model::{Basis, DensityMatrix, EnergyEigenbasis};

/// Maximum anti-Hermitian part and trace error tolerated in a propagated
/// state before it is rejected.
pub const DRIFT_TOL: f64 = 1e-10;

/// Default steady-state threshold on the trace distance.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Relative tolerance of the bisection refinements.
pub const REFINE_RTOL: f64 = 1e-6;

/// `ρ(t) = Σ_i Tr(l_i ρ(0)) e^{λ_i t} r_i` with the amplitudes precomputed.
#[derive(Debug, Clone)]
pub struct Evolution {
    terms: Vec<(C64, Op6)>,
    steady: Op6,
    energy_basis: EnergyEigenbasis,
    output: Basis,
    e0: Option<f64>,
}

fn check_density(rho: &DensityMatrix) -> Result<()> {
    DensityMatrix::new(*rho.matrix(), rho.basis()).map(|_| ())
}

impl Evolution {
    pub fn new(spec: &SpectralDecomposition, rho0: &DensityMatrix) -> Result<Self> {
        check_density(rho0)?;
        if !spec.is_ergodic() {
            return Err(Error::NonErgodic(0.0));
        }
        let x = rho0.in_basis(Basis::Energy, &spec.basis);
        let terms = spec
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| (m.eigenvalue, m.right * spec.overlap(i, x.matrix())))
            .collect();
        let steady = spec
            .modes
            .iter()
            .find(|m| m.stationary)
            .expect("ergodic")
            .right;
        Ok(Self {
            terms,
            steady,
            energy_basis: spec.basis.clone(),
            output: rho0.basis(),
            e0: None,
        })
    }

    /// Enables qubit temperatures (needs the qubit splitting).
    pub fn with_qubit_energy(mut self, e0: f64) -> Self {
        self.e0 = Some(e0);
        self
    }

    pub fn basis(&self) -> Basis {
        self.output
    }

    /// Steady state in the output basis.
    pub fn steady_state(&self) -> DensityMatrix {
        DensityMatrix::from_raw(self.steady, Basis::Energy)
            .in_basis(self.output, &self.energy_basis)
    }

    pub fn state_at(&self, t: f64) -> Result<DensityMatrix> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Grid(format!(
                "time {t} must be finite and non-negative"
            )));
        }
        let mut rho = Op6::zeros();
        for (lambda, m) in &self.terms {
            rho += m * (lambda * t).exp();
        }
        let drift = max_abs(&(rho - rho.adjoint()));
        let tr_err = (rho.trace() - C64::new(1.0, 0.0)).norm();
        if drift > DRIFT_TOL || tr_err > DRIFT_TOL {
            return Err(Error::Numerical(format!(
                "propagated state drifted (anti-Hermitian {drift:e}, trace {tr_err:e}) at t = {t}"
            )));
        }
        let rho = (rho + rho.adjoint()).scale(0.5);
        Ok(DensityMatrix::from_raw(rho, Basis::Energy).in_basis(self.output, &self.energy_basis))
    }

    pub fn distance_at(&self, t: f64) -> Result<f64> {
        let rho = self.state_at(t)?;
        trace_distance(&rho, &self.steady_state())
    }

    pub fn temperature_at(&self, t: f64) -> Result<f64> {
        let e0 = self
            .e0
            .ok_or_else(|| Error::Numerical("qubit energy not set".into()))?;
        let rho = self
            .state_at(t)?
            .in_basis(Basis::Product, &self.energy_basis);
        Ok(qubit_temperature(&rho, e0)?.value())
    }
}

pub fn evolve_state(
    spec: &SpectralDecomposition,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    Evolution::new(spec, rho0)?.state_at(t)
}

/// `½‖a - b‖₁`, computed from the eigenvalues of the Hermitian difference.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.basis() != b.basis() {
        return Err(Error::BasisMismatch(a.basis(), b.basis()));
    }
    Ok(trace_distance_raw(a.matrix(), b.matrix()))
}

pub(crate) fn trace_distance_raw(a: &Op6, b: &Op6) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

/// Qubit temperature `E0 / ln(p0/p1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum QubitTemperature {
    Finite(f64),
    /// `p0 = p1`.
    Infinite,
    /// `p0 < p1`: negative temperature.
    Inverted(f64),
}

impl QubitTemperature {
    /// Numeric value; `+∞` for equal populations.
    pub fn value(self) -> f64 {
        match self {
            QubitTemperature::Finite(t) | QubitTemperature::Inverted(t) => t,
            QubitTemperature::Infinite => f64::INFINITY,
        }
    }

    pub fn is_inverted(self) -> bool {
        matches!(self, QubitTemperature::Inverted(_))
    }
}

/// Temperature of the qubit marginal of a product-basis state.
pub fn qubit_temperature(rho: &DensityMatrix, e0: f64) -> Result<QubitTemperature> {
    let (p0, p1) = rho.qubit_populations()?;
    if !(p0 > 0.0 && p1 > 0.0) {
        return Err(Error::InvalidState(format!(
            "qubit populations ({p0}, {p1}) must be positive"
        )));
    }
    if p0 == p1 {
        return Ok(QubitTemperature::Infinite);
    }
    let t = e0 / (p0 / p1).ln();
    Ok(if p0 > p1 {
        QubitTemperature::Finite(t)
    } else {
        QubitTemperature::Inverted(t)
    })
}

/// Sampling times, strictly increasing from zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::Grid("grid must start at t = 0".into()));
        }
        if times
            .windows(2)
            .any(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(Error::Grid(
                "grid must be strictly increasing and finite".into(),
            ));
        }
        Ok(Self { times })
    }

    /// `t = 0` followed by `points` log-spaced times in `[start, end]`.
    pub fn log_spaced(start: f64, end: f64, points: usize) -> Result<Self> {
        if !(start > 0.0 && end > start && points >= 2) {
            return Err(Error::Grid(format!(
                "bad log grid [{start}, {end}] x {points}"
            )));
        }
        let (a, b) = (start.ln(), end.ln());
        let mut times = Vec::with_capacity(points + 1);
        times.push(0.0);
        for k in 0..points {
            let f = k as f64 / (points - 1) as f64;
            times.push((a + (b - a) * f).exp());
        }
        Self::new(times)
    }

    /// Log grid from `start_factor/|Re λ2|` to `end_factor/|Re λ2|`.
    pub fn relaxation_scaled(
        spec: &SpectralDecomposition,
        start_factor: f64,
        end_factor: f64,
        points: usize,
    ) -> Result<Self> {
        let slow = spec
            .first_decaying()
            .map(|i| spec.modes[i].eigenvalue.re.abs())
            .filter(|r| *r > 0.0)
            .ok_or_else(|| Error::Grid("no decaying mode to set the time scale".into()))?;
        Self::log_spaced(start_factor / slow, end_factor / slow, points)
    }

    /// Default grid: 400 log-spaced points over `[0.1, 20]/|Re λ2|`.
    pub fn default_for(spec: &SpectralDecomposition) -> Result<Self> {
        Self::relaxation_scaled(spec, 0.1, 20.0, 400)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Distance to the steady state and qubit temperature sampled on a grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub states: Option<Vec<DensityMatrix>>,
    evolution: Evolution,
}

impl Trajectory {
    pub fn evolution(&self) -> &Evolution {
        &self.evolution
    }

    pub fn initial_distance(&self) -> f64 {
        self.distances[0]
    }

    /// Slope of `ln D` over the samples with `level < D ≤ 10·level`.
    pub fn tail_slope(&self, level: f64) -> Option<f64> {
        let inside = |d: f64| d > level && d <= 10.0 * level;
        let lo = self
            .times
            .iter()
            .zip(&self.distances)
            .find(|(_, d)| inside(**d))?
            .0;
        let hi = self
            .times
            .iter()
            .zip(&self.distances)
            .rev()
            .find(|(_, d)| inside(**d))?
            .0;
        self.log_slope(*lo, *hi, level)
    }

    /// Least-squares slope of `ln D` against `t` over samples with
    /// `t ∈ [t_lo, t_hi]` and `D > floor`.
    pub fn log_slope(&self, t_lo: f64, t_hi: f64, floor: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.distances)
            .filter(|(t, d)| **t >= t_lo && **t <= t_hi && **d > floor)
            .map(|(t, d)| (*t, d.ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        Some(sxy / sxx)
    }
}

fn sample(evolution: &Evolution, t: f64, keep: bool) -> Result<(f64, f64, Option<DensityMatrix>)> {
    let rho = evolution.state_at(t)?;
    let d = trace_distance(&rho, &evolution.steady_state())?;
    let temp = match evolution.e0 {
        Some(e0) => {
            qubit_temperature(&rho.in_basis(Basis::Product, &evolution.energy_basis), e0)?.value()
        }
        None => f64::NAN,
    };
    Ok((d, temp, keep.then_some(rho)))
}

fn build_trajectory(
    evolution: Evolution,
    grid: &TimeGrid,
    keep_states: bool,
) -> Result<Trajectory> {
    let samples: Vec<(f64, f64, Option<DensityMatrix>)> = grid
        .times()
        .par_iter()
        .map(|&t| sample(&evolution, t, keep_states))
        .collect::<Result<_>>()?;
    let mut distances = Vec::with_capacity(samples.len());
    let mut temperatures = Vec::with_capacity(samples.len());
    let mut states = keep_states.then(Vec::new);
    for (d, t, s) in samples {
        distances.push(d);
        temperatures.push(t);
        if let (Some(v), Some(s)) = (states.as_mut(), s) {
            v.push(s);
        }
    }
    Ok(Trajectory {
        times: grid.times().to_vec(),
        distances,
        temperatures,
        states,
        evolution,
    })
}

/// Samples `D(ρ(t), τ)` and the qubit temperature on `grid`.
pub fn distance_trajectory(
    spec: &SpectralDecomposition,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    e0: f64,
) -> Result<Trajectory> {
    let evolution = Evolution::new(spec, rho0)?.with_qubit_energy(e0);
    build_trajectory(evolution, grid, false)
}

/// Same as [`distance_trajectory`] but keeps every sampled state.
pub fn distance_trajectory_with_states(
    spec: &SpectralDecomposition,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    e0: f64,
) -> Result<Trajectory> {
    let evolution = Evolution::new(spec, rho0)?.with_qubit_energy(e0);
    build_trajectory(evolution, grid, true)
}

/// Root of a function that is positive at `lo` and non-positive at `hi`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    while hi - lo > REFINE_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Earliest time after which every sample stays within `epsilon` of the
/// steady state, refined between the bracketing grid points.
pub fn steady_state_time(traj: &Trajectory, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Grid(format!("epsilon {epsilon} must be positive")));
    }
    let last = *traj.distances.last().expect("non-empty trajectory");
    if last > epsilon {
        return Err(Error::NotConverged {
            epsilon,
            final_distance: last,
        });
    }
    let k = match traj.distances.iter().rposition(|d| *d > epsilon) {
        None => return Ok(traj.times[0]),
        Some(k) => k + 1,
    };
    let ev = &traj.evolution;
    bisect(traj.times[k - 1], traj.times[k], |t| {
        Ok(ev.distance_at(t)? - epsilon)
    })
}

/// Observable used to compare two relaxation trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Trace distance to the steady state (defines the Mpemba time).
    TraceDistance,
    /// `|T(t) - T_s|` of the qubit temperature.
    TemperatureDeviation,
}

fn observable_samples(traj: &Trajectory, obs: Observable) -> Result<Vec<f64>> {
    match obs {
        Observable::TraceDistance => Ok(traj.distances.clone()),
        Observable::TemperatureDeviation => {
            let ts = steady_temperature(&traj.evolution)?;
            Ok(traj.temperatures.iter().map(|t| (t - ts).abs()).collect())
        }
    }
}

fn steady_temperature(ev: &Evolution) -> Result<f64> {
    let e0 = ev
        .e0
        .ok_or_else(|| Error::Numerical("qubit energy not set".into()))?;
    let tau = ev.steady_state().in_basis(Basis::Product, &ev.energy_basis);
    Ok(qubit_temperature(&tau, e0)?.value())
}

fn observable_at(ev: &Evolution, obs: Observable, t: f64) -> Result<f64> {
    match obs {
        Observable::TraceDistance => ev.distance_at(t),
        Observable::TemperatureDeviation => {
            Ok((ev.temperature_at(t)? - steady_temperature(ev)?).abs())
        }
    }
}

/// First time the candidate's distance drops below the reference's.
///
/// Returns `Ok(None)` when the difference never changes sign in the window
/// and an ordering error when the candidate starts closer to the steady
/// state than the reference.
pub fn mpemba_crossing_time(reference: &Trajectory, candidate: &Trajectory) -> Result<Option<f64>> {
    crossing_time(reference, candidate, Observable::TraceDistance)
}

pub fn crossing_time(
    reference: &Trajectory,
    candidate: &Trajectory,
    obs: Observable,
) -> Result<Option<f64>> {
    if reference.times != candidate.times {
        return Err(Error::Grid("trajectories use different time grids".into()));
    }
    let r = observable_samples(reference, obs)?;
    let c = observable_samples(candidate, obs)?;
    if c[0] < r[0] {
        return Err(Error::Ordering {
            candidate: c[0],
            reference: r[0],
        });
    }
    let diff: Vec<f64> = c.iter().zip(&r).map(|(a, b)| a - b).collect();
    let Some(k) = diff.iter().position(|d| *d < 0.0) else {
        return Ok(None);
    };
    if diff[..k].iter().all(|d| *d == 0.0) {
        // never strictly above the reference
        return Ok(None);
    }
    let j = (0..k)
        .rev()
        .find(|&j| diff[j] > 0.0)
        .expect("positive sample before k");
    if diff[j + 1..k].contains(&0.0) {
        let z = (j + 1..k).find(|&i| diff[i] == 0.0).unwrap();
        return Ok(Some(reference.times[z]));
    }
    let (er, ec) = (&reference.evolution, &candidate.evolution);
    let t = bisect(reference.times[j], reference.times[k], |t| {
        Ok(observable_at(ec, obs, t)? - observable_at(er, obs, t)?)
    })?;
    Ok(Some(t))
}

/// Earliest time after which the qubit temperature stays within `tol` of
/// its steady-state value.
pub fn temperature_settling_time(traj: &Trajectory, tol: f64) -> Result<f64> {
    let dev = observable_samples(traj, Observable::TemperatureDeviation)?;
    let last = *dev.last().expect("non-empty trajectory");
    if last > tol {
        return Err(Error::NotConverged {
            epsilon: tol,
            final_distance: last,
        });
    }
    let k = match dev.iter().rposition(|d| *d > tol) {
        None => return Ok(traj.times[0]),
        Some(k) => k + 1,
    };
    let ev = &traj.evolution;
    bisect(traj.times[k - 1], traj.times[k], |t| {
        Ok(observable_at(ev, Observable::TemperatureDeviation, t)? - tol)
    })
}

/// Mpemba time together with the steady-state times of both trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpembaTiming {
    pub t_m: Option<f64>,
    pub t_ss_reference: f64,
    pub t_ss_candidate: f64,
    pub threshold: f64,
}

/// Hermiticity, trace and positivity of a state to the given tolerances.
pub fn physicality_errors(rho: &DensityMatrix) -> (f64, f64, f64) {
    let m = rho.matrix();
    let herm = max_abs(&(m - m.adjoint()));
    let tr = (m.trace() - C64::new(1.0, 0.0)).norm();
    let min = hermitian_eigenvalues(m)[0];
    (herm, tr, min)
}
