//! Mpemba states: unitary rotations of the thermal state that remove the
//! slowest decay mode while moving the state farther from the steady state.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    distance_trajectory, mpemba_crossing_time, steady_state_time, trace_distance_raw, MpembaTiming,
    TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::{expi_hermitian, Op6, C64};
use crate::liouvillian::{
    assemble_block_liouvillian, slowest_mode_set, solve_steady_state, spectral_decompose,
    SpectralDecomposition,
};
use crate::model::{thermal_product_state, Basis, DensityMatrix, RefrigeratorParams};

/// Which unitaries the search ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitaryFamily {
    /// Any unitary on the joint space.
    Global,
    /// `V_A ⊗ V_B`.
    LocalBoth,
    /// `V_A ⊗ I`.
    LocalQubit,
    /// `I ⊗ V_B`.
    LocalQutrit,
}

impl UnitaryFamily {
    pub const ALL: [UnitaryFamily; 4] = [
        UnitaryFamily::Global,
        UnitaryFamily::LocalBoth,
        UnitaryFamily::LocalQubit,
        UnitaryFamily::LocalQutrit,
    ];

    pub fn parameter_count(self) -> usize {
        match self {
            UnitaryFamily::Global => 36,
            UnitaryFamily::LocalBoth => 13,
            UnitaryFamily::LocalQubit => 4,
            UnitaryFamily::LocalQutrit => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitaryFamily::Global => "global",
            UnitaryFamily::LocalBoth => "local-both",
            UnitaryFamily::LocalQubit => "local-qubit",
            UnitaryFamily::LocalQutrit => "local-qutrit",
        }
    }
}

impl fmt::Display for UnitaryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UnitaryFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.replace('_', "-").to_ascii_lowercase();
        UnitaryFamily::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| format!("unknown unitary family `{s}`"))
    }
}

/// Hermitian `N×N` matrix from `N²` reals: the diagonal first, then
/// (re, im) of the strict upper triangle row by row.
fn hermitian_from<const N: usize>(p: &[f64]) -> SMatrix<C64, N, N> {
    debug_assert_eq!(p.len(), N * N);
    let mut g = SMatrix::<C64, N, N>::zeros();
    for i in 0..N {
        g[(i, i)] = C64::new(p[i], 0.0);
    }
    let mut k = N;
    for i in 0..N {
        for j in i + 1..N {
            let z = C64::new(p[k], p[k + 1]);
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
            k += 2;
        }
    }
    g
}

fn kron(a: &SMatrix<C64, 2, 2>, b: &SMatrix<C64, 3, 3>) -> Op6 {
    Op6::from_fn(|r, c| a[(r / 3, c / 3)] * b[(r % 3, c % 3)])
}

/// Product-basis unitary for `params`.
pub fn parameterize_unitary(family: UnitaryFamily, params: &[f64]) -> Result<Op6> {
    let expected = family.parameter_count();
    if params.len() != expected {
        return Err(Error::Arity {
            expected,
            got: params.len(),
        });
    }
    Ok(match family {
        UnitaryFamily::Global => expi_hermitian(&hermitian_from::<6>(params)),
        UnitaryFamily::LocalBoth => kron(
            &expi_hermitian(&hermitian_from::<2>(&params[..4])),
            &expi_hermitian(&hermitian_from::<3>(&params[4..])),
        ),
        UnitaryFamily::LocalQubit => kron(
            &expi_hermitian(&hermitian_from::<2>(params)),
            &SMatrix::identity(),
        ),
        UnitaryFamily::LocalQutrit => kron(
            &SMatrix::identity(),
            &expi_hermitian(&hermitian_from::<3>(params)),
        ),
    })
}

/// `max_k |Tr(l_k ρ)|` over `slow_set`.
pub fn mpemba_constraint(
    spec: &SpectralDecomposition,
    slow_set: &[usize],
    rho: &DensityMatrix,
) -> f64 {
    let x = rho.in_basis(Basis::Energy, &spec.basis);
    slow_set
        .iter()
        .map(|&k| spec.overlap(k, x.matrix()).norm())
        .fold(0.0, f64::max)
}

/// Multi-start penalty search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub starts: usize,
    /// Objective evaluations per start for the penalty phase.
    pub max_evaluations: usize,
    pub residual_bound: f64,
    pub seed: u64,
    /// First penalty weight and the factor applied between rounds.
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub penalty_rounds: usize,
    /// Gauss–Newton iterations used to land exactly on the constraint.
    pub polish_iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 32,
            max_evaluations: 2000,
            residual_bound: 1e-8,
            seed: 0,
            penalty_initial: 10.0,
            penalty_growth: 10.0,
            penalty_rounds: 5,
            polish_iterations: 30,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: f64, bound| Err(Error::Parameter { name, value, bound });
        if self.starts == 0 {
            return bad("starts", 0.0, "> 0");
        }
        if self.max_evaluations < 10 {
            return bad("max_evaluations", self.max_evaluations as f64, ">= 10");
        }
        if !(self.residual_bound > 0.0) {
            return bad("residual_bound", self.residual_bound, "> 0");
        }
        if !(self.penalty_initial > 0.0) {
            return bad("penalty_initial", self.penalty_initial, "> 0");
        }
        if !(self.penalty_growth >= 1.0) {
            return bad("penalty_growth", self.penalty_growth, ">= 1");
        }
        if self.penalty_rounds == 0 {
            return bad("penalty_rounds", 0.0, "> 0");
        }
        Ok(())
    }
}

/// Outcome of the constrained search.
#[derive(Debug, Clone)]
pub struct MpembaSolution {
    pub family: UnitaryFamily,
    pub params: Vec<f64>,
    /// Product basis.
    pub unitary: Op6,
    /// Product basis.
    pub initial_state: DensityMatrix,
    pub constraint_residual: f64,
    pub distance_gain: f64,
    pub feasible: bool,
    /// Index of the start that produced this solution.
    pub start: usize,
}

/// Everything needed to score a unitary, precomputed in the product basis.
struct Problem<'a> {
    family: UnitaryFamily,
    rho_th: Op6,
    tau: Op6,
    left: Vec<Op6>,
    base_distance: f64,
    cfg: &'a OptimizerConfig,
}

impl Problem<'_> {
    fn state(&self, p: &[f64]) -> (Op6, Op6) {
        let u = parameterize_unitary(self.family, p).expect("length checked");
        (u, u * self.rho_th * u.adjoint())
    }

    /// Real and imaginary parts of every slow-mode overlap.
    fn residuals(&self, rho: &Op6) -> Vec<f64> {
        self.left
            .iter()
            .flat_map(|l| {
                let z = (l * rho).trace();
                [z.re, z.im]
            })
            .collect()
    }

    fn max_overlap(&self, rho: &Op6) -> f64 {
        self.left
            .iter()
            .map(|l| (l * rho).trace().norm())
            .fold(0.0, f64::max)
    }

    fn gain(&self, rho: &Op6) -> f64 {
        trace_distance_raw(rho, &self.tau) - self.base_distance
    }

    fn penalized(&self, p: &[f64], mu: f64) -> f64 {
        let (_, rho) = self.state(p);
        let r2: f64 = self.residuals(&rho).iter().map(|x| x * x).sum();
        -self.gain(&rho) + mu * r2
    }

    fn run_start(&self, index: usize) -> (Vec<f64>, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index as u64);
        let n = self.family.parameter_count();
        let mut x: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let rounds = self.cfg.penalty_rounds;
        let per_round = (self.cfg.max_evaluations / rounds).max(n + 2);
        let mut mu = self.cfg.penalty_initial;
        let mut step = 0.5;
        for _ in 0..rounds {
            x = nelder_mead(|p| self.penalized(p, mu), &x, step, per_round);
            mu *= self.cfg.penalty_growth;
            step *= 0.5;
        }
        self.polish(&mut x);
        let (_, rho) = self.state(&x);
        (x, self.max_overlap(&rho), self.gain(&rho))
    }

    /// Minimum-norm Gauss–Newton steps on the overlap equations with a
    /// forward-difference Jacobian.
    fn polish(&self, x: &mut [f64]) {
        let n = x.len();
        let norm2 = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        let mut r = self.residuals(&self.state(x).1);
        for _ in 0..self.cfg.polish_iterations {
            if self.max_overlap(&self.state(x).1) <= 1e-3 * self.cfg.residual_bound {
                break;
            }
            let m = r.len();
            let h = 1e-7;
            let mut jac = DMatrix::<f64>::zeros(m, n);
            let mut probe = x.to_vec();
            for j in 0..n {
                probe[j] += h;
                let rp = self.residuals(&self.state(&probe).1);
                for i in 0..m {
                    jac[(i, j)] = (rp[i] - r[i]) / h;
                }
                probe[j] = x[j];
            }
            let Ok(pinv) = jac.pseudo_inverse(1e-10) else {
                break;
            };
            let delta = pinv * DVector::from_column_slice(&r);
            let current = norm2(&r);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a - t * d).collect();
                let rt = self.residuals(&self.state(&trial).1);
                if norm2(&rt) < current {
                    x.copy_from_slice(&trial);
                    r = rt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
}

/// Adaptive Nelder–Mead (dimension-dependent coefficients) from an
/// axis-aligned initial simplex. Returns the best vertex.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize) -> Vec<f64> {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    let point = |c: &[f64], w: &[f64], s: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(a, b)| a + s * (a - b)).collect()
    };
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() <= 1e-15 * (1.0 + values[0].abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst = simplex[n].clone();
        let xr = point(&centroid, &worst, alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = point(&centroid, &worst, beta);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = point(&centroid, &worst, gamma * alpha);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = point(&centroid, &worst, -gamma);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = best
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + delta * (x - b))
                .collect();
            values[i] = f(&simplex[i]);
        }
        evals += n;
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    simplex.swap_remove(best)
}

/// Maximizes `D(Uρ_thU†, τ) − D(ρ_th, τ)` subject to the slow-mode overlaps
/// staying below `cfg.residual_bound`.
pub fn optimize_mpemba_state(
    spec: &SpectralDecomposition,
    slow_set: &[usize],
    rho_th0: &DensityMatrix,
    family: UnitaryFamily,
    cfg: &OptimizerConfig,
) -> Result<MpembaSolution> {
    cfg.validate()?;
    DensityMatrix::new(*rho_th0.matrix(), rho_th0.basis())?;
    let steady = spec
        .modes
        .iter()
        .find(|m| m.stationary)
        .ok_or(Error::NonErgodic(0.0))?;
    let eb = &spec.basis;
    let tau = eb.to_product(&steady.right);
    let rho_th = *rho_th0.in_basis(Basis::Product, eb).matrix();
    // Tr(l ρ_E) = Tr(Bᵀ l B ρ_P)
    let left = slow_set
        .iter()
        .map(|&k| eb.to_product(&spec.modes[k].left))
        .collect();
    let problem = Problem {
        family,
        base_distance: trace_distance_raw(&rho_th, &tau),
        rho_th,
        tau,
        left,
        cfg,
    };
    let runs: Vec<(Vec<f64>, f64, f64)> = (0..cfg.starts)
        .into_par_iter()
        .map(|i| problem.run_start(i))
        .collect();

    let feasible = |r: &(Vec<f64>, f64, f64)| r.1 <= cfg.residual_bound && r.2 > 0.0;
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &runs[b];
                let better = match (feasible(r), feasible(cur)) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => r.2 > cur.2,
                    (false, false) => r.1 < cur.1,
                };
                Some(if better { i } else { b })
            }
        };
    }
    let start = best.expect("at least one start");
    let (params, residual, gain) = runs[start].clone();
    let (unitary, rho) = problem.state(&params);
    let rho = (rho + rho.adjoint()).scale(0.5);
    Ok(MpembaSolution {
        family,
        unitary,
        initial_state: DensityMatrix::from_raw(rho, Basis::Product),
        constraint_residual: residual,
        distance_gain: gain,
        feasible: feasible(&runs[start]),
        params,
        start,
    })
}

/// Mpemba time and both steady-state times for a pair of trajectories.
pub fn compare_trajectories(
    reference: &Trajectory,
    candidate: &Trajectory,
    epsilon: f64,
) -> Result<MpembaTiming> {
    Ok(MpembaTiming {
        t_m: mpemba_crossing_time(reference, candidate)?,
        t_ss_reference: steady_state_time(reference, epsilon)?,
        t_ss_candidate: steady_state_time(candidate, epsilon)?,
        threshold: epsilon,
    })
}

fn check_initial_order(reference: &Trajectory, candidate: &Trajectory) -> Result<()> {
    let (dc, dr) = (candidate.initial_distance(), reference.initial_distance());
    if !(dc > dr) {
        return Err(Error::Verification(format!(
            "(a) candidate is not initially farther ({dc:e} <= {dr:e})"
        )));
    }
    Ok(())
}

/// Checks the three Mpemba conditions on a pair of trajectories.
pub fn verify_trajectories(
    reference: &Trajectory,
    candidate: &Trajectory,
    epsilon: f64,
) -> Result<MpembaTiming> {
    check_initial_order(reference, candidate)?;
    let timing = compare_trajectories(reference, candidate, epsilon)?;
    if timing.t_m.is_none() {
        return Err(Error::Verification(
            "(b) trajectories never cross in the window".into(),
        ));
    }
    if !(timing.t_ss_candidate < timing.t_ss_reference) {
        return Err(Error::Verification(format!(
            "(c) candidate settles no sooner ({:e} >= {:e})",
            timing.t_ss_candidate, timing.t_ss_reference
        )));
    }
    Ok(timing)
}

/// Simulates thermal and Mpemba trajectories and checks that the candidate
/// starts farther away, crosses the reference, and settles first.
pub fn verify_mpemba(
    solution: &MpembaSolution,
    spec: &SpectralDecomposition,
    rho_th0: &DensityMatrix,
    grid: &TimeGrid,
    epsilon: f64,
    e0: f64,
) -> Result<MpembaTiming> {
    let reference = distance_trajectory(spec, rho_th0, grid, e0)?;
    let candidate = distance_trajectory(spec, &solution.initial_state, grid, e0)?;
    verify_trajectories(&reference, &candidate, epsilon)
}

/// Real part of the slowest mode with a non-negligible amplitude in `rho`.
pub fn dominant_rate(
    spec: &SpectralDecomposition,
    rho: &DensityMatrix,
    threshold: f64,
) -> Option<f64> {
    let x = rho.in_basis(Basis::Energy, &spec.basis);
    (0..spec.len())
        .filter(|&i| !spec.modes[i].stationary && spec.overlap(i, x.matrix()).norm() > threshold)
        .map(|i| spec.modes[i].eigenvalue.re)
        .max_by(f64::total_cmp)
}

/// First decaying eigenvalue outside the slowest set.
pub fn next_eigenvalue(spec: &SpectralDecomposition, slow_set: &[usize]) -> Option<C64> {
    spec.modes
        .iter()
        .enumerate()
        .find(|(i, m)| !m.stationary && !slow_set.contains(i))
        .map(|(_, m)| m.eigenvalue)
}

/// Full pipeline for one parameter set: spectrum, steady state, thermal
/// reference, optimized Mpemba state and its trajectories.
#[derive(Debug, Clone)]
pub struct MpembaExperiment {
    pub params: RefrigeratorParams,
    pub spec: SpectralDecomposition,
    pub slow_set: Vec<usize>,
    pub steady_state: DensityMatrix,
    pub thermal: DensityMatrix,
    pub solution: MpembaSolution,
    pub grid: TimeGrid,
    pub reference: Trajectory,
    /// Trajectory of the optimized state, feasible or not.
    pub candidate: Trajectory,
    pub epsilon: f64,
}

impl MpembaExperiment {
    /// Optimizes the Mpemba state and simulates it next to the thermal state.
    pub fn run(
        params: &RefrigeratorParams,
        family: UnitaryFamily,
        cfg: &OptimizerConfig,
        epsilon: f64,
    ) -> Result<Self> {
        Self::run_with_grid(params, family, cfg, epsilon, TimeGrid::default_for)
    }

    /// As [`MpembaExperiment::run`], with the time grid derived from the
    /// spectrum by `grid`.
    pub fn run_with_grid(
        params: &RefrigeratorParams,
        family: UnitaryFamily,
        cfg: &OptimizerConfig,
        epsilon: f64,
        grid: impl FnOnce(&SpectralDecomposition) -> Result<TimeGrid>,
    ) -> Result<Self> {
        let blocks = assemble_block_liouvillian(params)?;
        let spec = spectral_decompose(&blocks)?;
        let steady_state = solve_steady_state(&blocks)?;
        let slow_set = slowest_mode_set(&spec);
        let thermal = thermal_product_state(params)?;
        let solution = optimize_mpemba_state(&spec, &slow_set, &thermal, family, cfg)?;
        let grid = grid(&spec)?;
        let reference = distance_trajectory(&spec, &thermal, &grid, params.e0)?;
        let candidate = distance_trajectory(&spec, &solution.initial_state, &grid, params.e0)?;
        Ok(Self {
            params: *params,
            spec,
            slow_set,
            steady_state,
            thermal,
            solution,
            grid,
            reference,
            candidate,
            epsilon,
        })
    }

    pub fn lambda2(&self) -> Option<C64> {
        self.slow_set
            .first()
            .map(|&i| self.spec.modes[i].eigenvalue)
    }

    pub fn lambda3(&self) -> Option<C64> {
        next_eigenvalue(&self.spec, &self.slow_set)
    }

    /// Timing record; fails with condition (a) when the candidate does not
    /// start farther from the steady state.
    pub fn timing(&self) -> Result<MpembaTiming> {
        check_initial_order(&self.reference, &self.candidate)?;
        compare_trajectories(&self.reference, &self.candidate, self.epsilon)
    }

    /// Timing after checking feasibility and all three Mpemba conditions.
    pub fn verify(&self) -> Result<MpembaTiming> {
        if !self.solution.feasible {
            return Err(Error::Verification(format!(
                "solution is infeasible (residual {:e})",
                self.solution.constraint_residual
            )));
        }
        verify_trajectories(&self.reference, &self.candidate, self.epsilon)
    }
}
