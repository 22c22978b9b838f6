//! Shared helpers for the integration tests: random configurations, the
//! brute-force 36×36 oracle and the invariant checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qfridge::dynamics::{distance_trajectory_with_states, physicality_errors, TimeGrid};
use qfridge::linalg::{max_abs, Op6, C64};
use qfridge::liouvillian::{
    assemble_block_liouvillian, assemble_full_superoperator, spectral_decompose,
};
use qfridge::model::{
    build_hamiltonian, build_jump_operators, decay_rate, thermal_product_state, Basis,
    DensityMatrix, RefrigeratorParams,
};
use qfridge::mpemba::{parameterize_unitary, UnitaryFamily};
use rand::Rng;

/// Random valid parameters spanning the regimes of interest: κ over three
/// decades, `g` up to a fifth of the smaller bare energy.
pub fn random_params(rng: &mut impl Rng) -> RefrigeratorParams {
    let e0 = rng.gen_range(0.4..1.5);
    let e1 = rng.gen_range(0.4..1.5);
    let mut log_kappa = || 10f64.powf(rng.gen_range(-5.0..-2.0));
    let (kappa_c, kappa_h, kappa_w) = (log_kappa(), log_kappa(), log_kappa());
    RefrigeratorParams {
        e0,
        e1,
        g: rng.gen_range(1e-3..0.2 * e0.min(e1)),
        t_c: rng.gen_range(0.3..4.0),
        t_h: rng.gen_range(0.3..4.0),
        t_w: rng.gen_range(0.3..4.0),
        kappa_c,
        kappa_h,
        kappa_w,
        ..Default::default()
    }
}

/// Random full-rank density matrix `GG†/Tr(GG†)` in the given basis.
pub fn random_density(rng: &mut impl Rng, basis: Basis) -> DensityMatrix {
    let g = Op6::from_fn(|_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = g * g.adjoint();
    let m = m / m.trace();
    DensityMatrix::new((m + m.adjoint()) * C64::new(0.5, 0.0), basis).unwrap()
}

pub fn random_unitary(rng: &mut impl Rng) -> Op6 {
    let p: Vec<f64> = (0..36).map(|_| rng.gen_range(-3.0..3.0)).collect();
    parameterize_unitary(UnitaryFamily::Global, &p).unwrap()
}

/// Eigenvalues of the dense product-basis superoperator via a complex Schur
/// decomposition.
pub fn oracle_eigenvalues(p: &RefrigeratorParams) -> Vec<C64> {
    let l = assemble_full_superoperator(p).unwrap();
    l.schur()
        .eigenvalues()
        .expect("complex Schur form is triangular")
        .iter()
        .cloned()
        .collect()
}

/// Largest distance in a greedy nearest-neighbour matching of two
/// multisets of equal size.
pub fn multiset_gap(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|u, v| u.1.total_cmp(&v.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

/// Dense propagator `exp(L t)` in the product basis.
///
/// The secular dissipator commutes with `-i[H, ·]`, so the exponential
/// factorizes into `exp(L_D t)` — a scaling-and-squaring exponential of a
/// matrix whose norm is set by the bath couplings rather than by the level
/// spacings — followed by the unitary `e^{-iHt}` built from a Hermitian
/// eigendecomposition of `H`. This keeps the oracle accurate at times where
/// `‖L t‖` reaches 1e7.
pub struct Oracle {
    pub generator: DMatrix<C64>,
    dissipator: DMatrix<C64>,
    h: Op6,
}

impl Oracle {
    pub fn new(p: &RefrigeratorParams) -> Self {
        let generator = assemble_full_superoperator(p).unwrap();
        let h = build_hamiltonian(p).unwrap().map(|x| C64::new(x, 0.0));
        let hamiltonian_part = hamiltonian_superoperator(&h);
        let dissipator = &generator - &hamiltonian_part;
        let comm = &hamiltonian_part * &dissipator - &dissipator * &hamiltonian_part;
        let scale = generator.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let worst = comm.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(
            worst < 1e-12 * scale,
            "dissipator does not commute with -i[H, ·]: {worst:e}"
        );
        Self {
            generator,
            dissipator,
            h,
        }
    }

    pub fn propagate(&self, rho: &Op6, t: f64) -> Op6 {
        let v = (&self.dissipator * C64::new(t, 0.0)).exp()
            * DVector::from_column_slice(rho.as_slice());
        let damped = Op6::from_column_slice(v.as_slice());
        let eig = self.h.symmetric_eigen();
        let phases = Op6::from_diagonal(&eig.eigenvalues.map(|e| C64::new(0.0, -e * t).exp()));
        let u = eig.eigenvectors * phases * eig.eigenvectors.adjoint();
        u * damped * u.adjoint()
    }
}

/// `-i(I ⊗ H - Hᵀ ⊗ I)` acting on column-stacked matrices.
fn hamiltonian_superoperator(h: &Op6) -> DMatrix<C64> {
    let d = |m: &Op6| DMatrix::from_column_slice(6, 6, m.as_slice());
    let id = DMatrix::<C64>::identity(6, 6);
    (id.kronecker(&d(h)) - d(&h.transpose()).kronecker(&id)) * C64::new(0.0, -1.0)
}

/// Every invariant of the invariant suite evaluated at `p`; returns the
/// list of violations (empty on success).
pub fn invariant_violations(p: &RefrigeratorParams, rng: &mut impl Rng) -> Vec<String> {
    let mut bad = Vec::new();

    for j in build_jump_operators(p).unwrap() {
        let w = j.omega.abs();
        let t = p.temperature(j.bath);
        let (k, c) = (p.kappa(j.bath), p.cutoff);
        let up = decay_rate(w, t, k, c).unwrap();
        let down = decay_rate(-w, t, k, c).unwrap();
        if (up * (w / t).exp() - down).abs() > 1e-12 * down.abs().max(f64::MIN_POSITIVE) {
            bad.push(format!("KMS ratio violated for {:?} at ω = {w}", j.bath));
        }
    }

    let blocks = assemble_block_liouvillian(p).unwrap();
    for j in 0..6 {
        let col: f64 = (0..6).map(|i| blocks.pop_block[(i, j)]).sum();
        if col.abs() >= 1e-12 {
            bad.push(format!("population column {j} sums to {col:e}"));
        }
        for i in (0..6).filter(|&i| i != j) {
            if blocks.pop_block[(i, j)] < 0.0 {
                bad.push(format!("negative transition rate {i}<-{j}"));
            }
        }
    }

    let spec = spectral_decompose(&blocks).unwrap();
    let bio = spec.biorthonormality_residuals().max();
    if bio >= 1e-10 {
        bad.push(format!("biorthonormality residual {bio:e}"));
    }

    let rho0 = random_density(rng, Basis::Product);
    let grid = TimeGrid::default_for(&spec).unwrap();
    let traj = distance_trajectory_with_states(&spec, &rho0, &grid, p.e0).unwrap();
    for (k, w) in traj.distances.windows(2).enumerate() {
        if w[1] > w[0] + 1e-10 {
            bad.push(format!(
                "distance increased at sample {k}: {:e} -> {:e}",
                w[0], w[1]
            ));
            break;
        }
    }
    for (t, s) in traj.times.iter().zip(traj.states.as_ref().unwrap()) {
        let (herm, tr, min) = physicality_errors(s);
        if herm >= 1e-10 || tr >= 1e-10 || min < -1e-8 {
            bad.push(format!(
                "unphysical state at t = {t}: herm {herm:e}, trace {tr:e}, min eig {min:e}"
            ));
            break;
        }
    }

    let th = thermal_product_state(p).unwrap();
    let u = random_unitary(rng);
    if max_abs(&(u * u.adjoint() - Op6::identity())) >= 1e-10 {
        bad.push("parameterized unitary is not unitary".into());
    }
    let rotated = DensityMatrix::new(u * th.matrix() * u.adjoint(), Basis::Product).unwrap();
    let (a, b) = (rotated.eigenvalues(), th.eigenvalues());
    if a.iter().zip(&b).any(|(x, y)| (x - y).abs() >= 1e-10) {
        bad.push("unitary conjugation changed the spectrum".into());
    }
    bad
}
