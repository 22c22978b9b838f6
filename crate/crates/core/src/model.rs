//! Qubit–qutrit refrigerator: Hamiltonian, analytic eigenbasis, bath jump
//! operators and thermal rates.
//!
//! Product basis ordering is `|a b⟩ ↦ 3a + b` with `a ∈ {0,1}` (qubit A) and
//! `b ∈ {0,1,2}` (qutrit B). Energy levels are indexed `0..6` in the order
//! `|00⟩, |01⟩, (|11⟩-|02⟩)/√2, |10⟩, (|11⟩+|02⟩)/√2, |12⟩`.
//! Units: ħ = k_B = J = 1.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, max_abs, Op6, C64, DIM};

pub type RealOp6 = SMatrix<f64, 6, 6>;

/// Default Ohmic cutoff; large enough that `e^{-|ω|/Ω_c} ≈ 1` for every
/// transition of the model.
pub const DEFAULT_CUTOFF: f64 = 1e3;

/// Dimensionless model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefrigeratorParams {
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    pub g: f64,
    #[serde(rename = "Tc")]
    pub t_c: f64,
    #[serde(rename = "Th")]
    pub t_h: f64,
    #[serde(rename = "Tw")]
    pub t_w: f64,
    pub kappa_c: f64,
    pub kappa_h: f64,
    pub kappa_w: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

impl Default for RefrigeratorParams {
    /// The representative working point used for the Mpemba demonstrations:
    /// `E0 = 0.7, E1 = 1, Tc = Tw = 1, Th = 3, g = 1e-3, κ = 1e-4`.
    fn default() -> Self {
        Self {
            e0: 0.7,
            e1: 1.0,
            g: 1e-3,
            t_c: 1.0,
            t_h: 3.0,
            t_w: 1.0,
            kappa_c: 1e-4,
            kappa_h: 1e-4,
            kappa_w: 1e-4,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl RefrigeratorParams {
    /// `E2 = E0 + E1`.
    pub fn e2(&self) -> f64 {
        self.e0 + self.e1
    }

    pub fn without_cold_bath(mut self) -> Self {
        self.kappa_c = 0.0;
        self
    }

    pub fn temperature(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Cold => self.t_c,
            Bath::Hot => self.t_h,
            Bath::Work => self.t_w,
        }
    }

    pub fn kappa(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Cold => self.kappa_c,
            Bath::Hot => self.kappa_h,
            Bath::Work => self.kappa_w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn check(name: &'static str, value: f64, ok: bool, bound: &'static str) -> Result<()> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::Parameter { name, value, bound })
            }
        }
        check("E0", self.e0, self.e0 > 0.0, "E0 > 0")?;
        check("E1", self.e1, self.e1 > 0.0, "E1 > 0")?;
        check("g", self.g, self.g >= 0.0, "g >= 0")?;
        check(
            "g",
            self.g,
            self.g < self.e0.min(self.e1),
            "g < min(E0, E1)",
        )?;
        check("Tc", self.t_c, self.t_c > 0.0, "Tc > 0")?;
        check("Th", self.t_h, self.t_h > 0.0, "Th > 0")?;
        check("Tw", self.t_w, self.t_w > 0.0, "Tw > 0")?;
        check("kappa_c", self.kappa_c, self.kappa_c >= 0.0, "kappa_c >= 0")?;
        check("kappa_h", self.kappa_h, self.kappa_h >= 0.0, "kappa_h >= 0")?;
        check("kappa_w", self.kappa_w, self.kappa_w >= 0.0, "kappa_w >= 0")?;
        check("cutoff", self.cutoff, self.cutoff > 0.0, "cutoff > 0")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bath {
    #[serde(rename = "c")]
    Cold,
    #[serde(rename = "h")]
    Hot,
    #[serde(rename = "w")]
    Work,
}

impl Bath {
    pub const ALL: [Bath; 3] = [Bath::Cold, Bath::Hot, Bath::Work];

    pub fn label(self) -> char {
        match self {
            Bath::Cold => 'c',
            Bath::Hot => 'h',
            Bath::Work => 'w',
        }
    }
}

impl fmt::Display for Bath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Product,
    Energy,
}

/// Product-basis index of `|a b⟩`.
pub const fn product_index(qubit: usize, qutrit: usize) -> usize {
    3 * qubit + qutrit
}

/// `H = E0|1⟩⟨1|_A + E1|1⟩⟨1|_B + E2|2⟩⟨2|_B + g(|02⟩⟨11| + h.c.)` in the
/// product basis.
pub fn build_hamiltonian(params: &RefrigeratorParams) -> Result<RealOp6> {
    params.validate()?;
    let mut h = RealOp6::zeros();
    let qubit = [0.0, params.e0];
    let qutrit = [0.0, params.e1, params.e2()];
    for (a, ea) in qubit.iter().enumerate() {
        for (b, eb) in qutrit.iter().enumerate() {
            let k = product_index(a, b);
            h[(k, k)] = ea + eb;
        }
    }
    let i02 = product_index(0, 2);
    let i11 = product_index(1, 1);
    h[(i02, i11)] = params.g;
    h[(i11, i02)] = params.g;
    Ok(h)
}

/// Analytic eigenvalues and eigenvectors of the Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEigenbasis {
    /// `[0, E1, E2-g, E0, E2+g, E0+E2]`
    pub eigenvalues: [f64; DIM],
    /// Row `k` holds the product-basis coordinates of energy level `k`, so
    /// `B · v_product` gives energy-basis coordinates.
    pub basis_matrix: RealOp6,
}

impl EnergyEigenbasis {
    /// Energy-basis form of a product-basis operator: `B X Bᵀ`.
    pub fn to_energy(&self, op: &Op6) -> Op6 {
        let b = self.basis_matrix.map(|x| C64::new(x, 0.0));
        b * op * b.transpose()
    }

    /// Product-basis form of an energy-basis operator: `Bᵀ X B`.
    pub fn to_product(&self, op: &Op6) -> Op6 {
        let b = self.basis_matrix.map(|x| C64::new(x, 0.0));
        b.transpose() * op * b
    }

    /// Diagonal Hamiltonian in the energy basis.
    pub fn hamiltonian(&self) -> Op6 {
        let mut h = Op6::zeros();
        for (k, e) in self.eigenvalues.iter().enumerate() {
            h[(k, k)] = C64::new(*e, 0.0);
        }
        h
    }

    /// `E_upper - E_lower`.
    pub fn gap(&self, upper: usize, lower: usize) -> f64 {
        self.eigenvalues[upper] - self.eigenvalues[lower]
    }
}

pub fn build_eigenbasis(params: &RefrigeratorParams) -> Result<EnergyEigenbasis> {
    params.validate()?;
    if params.g == 0.0 {
        return Err(Error::Degenerate(
            "g = 0 makes |11> and |02> degenerate; the analytic ordering is undefined",
        ));
    }
    Ok(analytic_eigenbasis(params))
}

/// Same construction without the nondegeneracy check. At `g = 0` the two
/// mixed levels are still eigenvectors, just not the unique choice.
pub(crate) fn analytic_eigenbasis(params: &RefrigeratorParams) -> EnergyEigenbasis {
    let e0 = params.e0;
    let e1 = params.e1;
    let e2 = params.e2();
    let g = params.g;
    let eigenvalues = [0.0, e1, e2 - g, e0, e2 + g, e0 + e2];

    let s = FRAC_1_SQRT_2;
    let mut b = RealOp6::zeros();
    b[(0, product_index(0, 0))] = 1.0;
    b[(1, product_index(0, 1))] = 1.0;
    b[(2, product_index(1, 1))] = s;
    b[(2, product_index(0, 2))] = -s;
    b[(3, product_index(1, 0))] = 1.0;
    b[(4, product_index(1, 1))] = s;
    b[(4, product_index(0, 2))] = s;
    b[(5, product_index(1, 2))] = 1.0;
    EnergyEigenbasis {
        eigenvalues,
        basis_matrix: b,
    }
}

/// `J(ω) = κ|ω| e^{-|ω|/Ω_c}`.
pub fn ohmic_spectral_density(omega: f64, kappa: f64, cutoff: f64) -> f64 {
    let w = omega.abs();
    kappa * w * (-w / cutoff).exp()
}

/// Thermal rate: `J(ω) n(ω)` for `ω > 0` (absorption) and
/// `J(|ω|) (n(|ω|) + 1)` for `ω < 0` (emission), with Bose factor
/// `n(ω) = 1/(e^{ω/T} - 1)`.
pub fn decay_rate(omega: f64, bath_temp: f64, kappa: f64, cutoff: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if !(bath_temp > 0.0) {
        return Err(Error::Parameter {
            name: "bath_temp",
            value: bath_temp,
            bound: "T > 0",
        });
    }
    let w = omega.abs();
    let n = 1.0 / (w / bath_temp).exp_m1();
    let j = ohmic_spectral_density(w, kappa, cutoff);
    Ok(if omega > 0.0 { j * n } else { j * (n + 1.0) })
}

/// A single dissipative channel in the energy eigenbasis.
///
/// `omega` is the energy absorbed by the system in the jump, so
/// `[H, matrix] = omega · matrix`: emission channels (lowering operators)
/// have `omega < 0`, their absorption partners are the adjoints with
/// `omega > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub bath: Bath,
    pub omega: f64,
    pub matrix: Op6,
    pub rate: f64,
}

/// One lowering eigenoperator: terms `coef · |lower⟩⟨upper|`.
struct Emission {
    bath: Bath,
    terms: &'static [(f64, usize, usize)],
}

const S: f64 = FRAC_1_SQRT_2;

/// Decomposition of the bath couplings `σ⁻_A ⊗ I`, `I ⊗ |0⟩⟨1|_B` and
/// `I ⊗ |0⟩⟨2|_B` into energy eigenoperators.
const EMISSIONS: [Emission; 9] = [
    Emission {
        bath: Bath::Cold,
        terms: &[(1.0, 0, 3)],
    },
    Emission {
        bath: Bath::Cold,
        terms: &[(S, 1, 2), (S, 4, 5)],
    },
    Emission {
        bath: Bath::Cold,
        terms: &[(S, 1, 4), (-S, 2, 5)],
    },
    Emission {
        bath: Bath::Hot,
        terms: &[(1.0, 0, 1)],
    },
    Emission {
        bath: Bath::Hot,
        terms: &[(S, 3, 2)],
    },
    Emission {
        bath: Bath::Hot,
        terms: &[(S, 3, 4)],
    },
    Emission {
        bath: Bath::Work,
        terms: &[(-S, 0, 2)],
    },
    Emission {
        bath: Bath::Work,
        terms: &[(S, 0, 4)],
    },
    Emission {
        bath: Bath::Work,
        terms: &[(1.0, 3, 5)],
    },
];

/// Lowering eigenoperators `(bath, gap, matrix)` in the energy basis.
/// Channels of one bath that share a frequency are merged, which only
/// happens at `g = 0`.
pub(crate) fn secular_emissions(basis: &EnergyEigenbasis) -> Vec<(Bath, f64, Op6)> {
    let mut out: Vec<(Bath, f64, Op6)> = Vec::with_capacity(EMISSIONS.len());
    for em in &EMISSIONS {
        let (_, lo, up) = em.terms[0];
        let gap = basis.gap(up, lo);
        let mut m = Op6::zeros();
        for &(coef, lower, upper) in em.terms {
            debug_assert!((basis.gap(upper, lower) - gap).abs() <= 1e-12 * gap.abs().max(1.0));
            m[(lower, upper)] += C64::new(coef, 0.0);
        }
        match out.iter_mut().find(|(b, w, _)| *b == em.bath && *w == gap) {
            Some(existing) => existing.2 += m,
            None => out.push((em.bath, gap, m)),
        }
    }
    out
}

/// The nine emission channels followed by their nine absorption partners,
/// with frequencies taken from the eigenvalue gaps of the levels each
/// operator connects.
pub fn build_jump_operators(params: &RefrigeratorParams) -> Result<Vec<JumpOperator>> {
    let basis = build_eigenbasis(params)?;
    jump_operators_in(params, &basis)
}

pub(crate) fn jump_operators_in(
    params: &RefrigeratorParams,
    basis: &EnergyEigenbasis,
) -> Result<Vec<JumpOperator>> {
    let mut emissions = Vec::with_capacity(EMISSIONS.len());
    for (bath, gap, m) in secular_emissions(basis) {
        let t = params.temperature(bath);
        let k = params.kappa(bath);
        emissions.push(JumpOperator {
            bath,
            omega: -gap,
            matrix: m,
            rate: decay_rate(-gap, t, k, params.cutoff)?,
        });
    }
    let absorptions: Vec<JumpOperator> = emissions
        .iter()
        .map(|e| {
            let t = params.temperature(e.bath);
            let k = params.kappa(e.bath);
            Ok(JumpOperator {
                bath: e.bath,
                omega: -e.omega,
                matrix: e.matrix.adjoint(),
                rate: decay_rate(-e.omega, t, k, params.cutoff)?,
            })
        })
        .collect::<Result<_>>()?;
    emissions.extend(absorptions);
    Ok(emissions)
}

/// Hermitian, unit-trace, positive semidefinite 6×6 operator tagged with the
/// basis it is written in.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: Op6,
    basis: Basis,
}

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(matrix: Op6, basis: Basis) -> Result<Self> {
        let herm = max_abs(&(matrix - matrix.adjoint()));
        if !(herm <= HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if !((tr - C64::new(1.0, 0.0)).norm() <= TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&matrix)[0];
        if !(min >= -PSD_TOL) {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix, basis })
    }

    /// Wraps a matrix without validation. Callers guarantee the invariants
    /// to within their own tolerances.
    pub(crate) fn from_raw(matrix: Op6, basis: Basis) -> Self {
        Self { matrix, basis }
    }

    pub fn matrix(&self) -> &Op6 {
        &self.matrix
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn into_matrix(self) -> Op6 {
        self.matrix
    }

    pub fn in_basis(&self, target: Basis, eb: &EnergyEigenbasis) -> DensityMatrix {
        match (self.basis, target) {
            (Basis::Product, Basis::Energy) => Self::from_raw(eb.to_energy(&self.matrix), target),
            (Basis::Energy, Basis::Product) => Self::from_raw(eb.to_product(&self.matrix), target),
            _ => self.clone(),
        }
    }

    pub fn eigenvalues(&self) -> [f64; DIM] {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Qubit populations `(p0, p1)` from the partial trace over the qutrit.
    /// Only valid for product-basis states.
    pub fn qubit_populations(&self) -> Result<(f64, f64)> {
        if self.basis != Basis::Product {
            return Err(Error::BasisMismatch(self.basis, Basis::Product));
        }
        let p = |a: usize| {
            (0..3)
                .map(|b| self.matrix[(product_index(a, b), product_index(a, b))].re)
                .sum::<f64>()
        };
        Ok((p(0), p(1)))
    }
}

/// `γ_A(β_c) ⊗ γ_B(β_h, β_w)`: qubit Gibbs state at `Tc`, qutrit with its
/// `|1⟩` weight set by `Th` and its `|2⟩` weight by `Tw`. Product basis.
pub fn thermal_product_state(params: &RefrigeratorParams) -> Result<DensityMatrix> {
    params.validate()?;
    let qa = [1.0, (-params.e0 / params.t_c).exp()];
    let za: f64 = qa.iter().sum();
    let qb = [
        1.0,
        (-params.e1 / params.t_h).exp(),
        (-params.e2() / params.t_w).exp(),
    ];
    let zb: f64 = qb.iter().sum();
    let mut m = Op6::zeros();
    for a in 0..2 {
        for b in 0..3 {
            let k = product_index(a, b);
            m[(k, k)] = C64::new(qa[a] / za * qb[b] / zb, 0.0);
        }
    }
    Ok(DensityMatrix::from_raw(m, Basis::Product))
}

/// Gibbs state `e^{-H/T}/Z` of the full Hamiltonian, energy basis.
pub fn gibbs_state(basis: &EnergyEigenbasis, temperature: f64) -> DensityMatrix {
    let emin = basis
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = basis
        .eigenvalues
        .iter()
        .map(|e| (-(e - emin) / temperature).exp())
        .collect();
    let z: f64 = w.iter().sum();
    let mut m = Op6::zeros();
    for (k, wk) in w.iter().enumerate() {
        m[(k, k)] = C64::new(wk / z, 0.0);
    }
    DensityMatrix::from_raw(m, Basis::Energy)
}

/// `T_v = (E2 - E1) / (E2/Tw - E1/Th)`.
pub fn virtual_temperature(params: &RefrigeratorParams) -> Result<f64> {
    params.validate()?;
    let e2 = params.e2();
    let denom = e2 / params.t_w - params.e1 / params.t_h;
    if denom == 0.0 {
        return Err(Error::DegenerateTemperature);
    }
    Ok((e2 - params.e1) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutator;
    use nalgebra::SymmetricEigen;

    fn working_point() -> RefrigeratorParams {
        RefrigeratorParams::default()
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn hamiltonian_spectrum_at_working_point() {
        let h = build_hamiltonian(&working_point()).unwrap();
        assert_eq!(h, h.transpose());
        let ev = sorted(SymmetricEigen::new(h).eigenvalues.iter().cloned().collect());
        let want = sorted(vec![0.0, 1.0, 1.699, 0.7, 1.701, 2.4]);
        for (a, b) in ev.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn zero_coupling_gives_degenerate_e2_level() {
        let p = RefrigeratorParams {
            g: 0.0,
            ..working_point()
        };
        let h = build_hamiltonian(&p).unwrap();
        let ev = SymmetricEigen::new(h).eigenvalues;
        let at_e2 = ev.iter().filter(|e| (*e - p.e2()).abs() < 1e-12).count();
        assert_eq!(at_e2, 2);
    }

    #[test]
    fn top_level_is_independent_of_coupling() {
        let p = RefrigeratorParams {
            g: 0.5,
            ..working_point()
        };
        let h = build_hamiltonian(&p).unwrap();
        let max = SymmetricEigen::new(h).eigenvalues.max();
        assert!((max - 2.4).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_name_the_bound() {
        let p = RefrigeratorParams {
            g: 0.8,
            ..working_point()
        };
        match build_hamiltonian(&p) {
            Err(Error::Parameter { name, bound, .. }) => {
                assert_eq!(name, "g");
                assert!(bound.contains("min"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let p = RefrigeratorParams {
            t_h: -1.0,
            ..working_point()
        };
        assert!(matches!(
            p.validate(),
            Err(Error::Parameter { name: "Th", .. })
        ));
        let p = RefrigeratorParams {
            kappa_w: f64::NAN,
            ..working_point()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn eigenbasis_is_orthogonal_and_diagonalizes() {
        let p = working_point();
        let eb = build_eigenbasis(&p).unwrap();
        let b = eb.basis_matrix;
        assert!((b * b.transpose() - RealOp6::identity()).abs().max() < 1e-12);
        let d = b * build_hamiltonian(&p).unwrap() * b.transpose();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { eb.eigenvalues[i] } else { 0.0 };
                assert!((d[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenbasis_matches_numerical_diagonalization() {
        let p = working_point();
        let eb = build_eigenbasis(&p).unwrap();
        let numeric = sorted(
            SymmetricEigen::new(build_hamiltonian(&p).unwrap())
                .eigenvalues
                .iter()
                .cloned()
                .collect(),
        );
        let analytic = sorted(eb.eigenvalues.to_vec());
        for (a, b) in numeric.iter().zip(&analytic) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn antisymmetric_level_has_two_entries() {
        let eb = build_eigenbasis(&working_point()).unwrap();
        let row = eb.basis_matrix.row(2);
        let nonzero: Vec<(usize, f64)> = row
            .iter()
            .cloned()
            .enumerate()
            .filter(|(_, x)| *x != 0.0)
            .collect();
        assert_eq!(nonzero.len(), 2);
        assert_eq!(nonzero[0], (product_index(0, 2), -FRAC_1_SQRT_2));
        assert_eq!(nonzero[1], (product_index(1, 1), FRAC_1_SQRT_2));
    }

    #[test]
    fn zero_coupling_eigenbasis_is_rejected() {
        let p = RefrigeratorParams {
            g: 0.0,
            ..working_point()
        };
        assert!(matches!(build_eigenbasis(&p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ohmic_density_values() {
        assert_eq!(ohmic_spectral_density(0.0, 3.0, 1.0), 0.0);
        assert!((ohmic_spectral_density(1.0, 1.0, 1e6) - 1.0).abs() < 1e-6);
        let v = ohmic_spectral_density(-2.0, 0.5, 1.0);
        assert!((v - 0.5 * 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.135335).abs() < 1e-6);
        assert_eq!(
            ohmic_spectral_density(1.3, 0.2, 4.0),
            ohmic_spectral_density(-1.3, 0.2, 4.0)
        );
    }

    #[test]
    fn decay_rate_values() {
        let r = decay_rate(1.0, 1.0, 1.0, 1e6).unwrap();
        let j = ohmic_spectral_density(1.0, 1.0, 1e6);
        assert!((r / j - 0.581977).abs() < 1e-6);
        for cutoff in [1.0, 10.0, 1e3] {
            for kappa in [1e-4, 0.3, 2.0] {
                let up = decay_rate(1.0, 1.0, kappa, cutoff).unwrap();
                let down = decay_rate(-1.0, 1.0, kappa, cutoff).unwrap();
                assert!((up / down - (-1.0f64).exp()).abs() < 1e-12);
            }
        }
        assert_eq!(decay_rate(0.4, 2.0, 0.0, 1e3).unwrap(), 0.0);
        assert_eq!(decay_rate(-0.4, 2.0, 0.0, 1e3).unwrap(), 0.0);
        assert_eq!(decay_rate(0.0, 1.0, 1.0, 1.0), Err(Error::ZeroFrequency));
    }

    #[test]
    fn jump_frequencies_come_from_gaps() {
        let p = working_point();
        let ops = build_jump_operators(&p).unwrap();
        assert_eq!(ops.len(), 18);
        let find = |lower: usize, upper: usize| {
            ops.iter()
                .find(|j| j.omega < 0.0 && j.matrix[(lower, upper)].norm() > 0.0)
                .unwrap()
        };
        // |1⟩⟨4| in one-based labels
        let c1 = find(0, 3);
        assert_eq!(c1.bath, Bath::Cold);
        assert!((c1.omega + p.e0).abs() < 1e-12);
        // |4⟩⟨3| in one-based labels: E1 - g
        let h1 = find(3, 2);
        assert_eq!(h1.bath, Bath::Hot);
        assert!((h1.omega + (p.e1 - p.g)).abs() < 1e-12);
        let h3 = find(3, 4);
        assert!((h3.omega + (p.e1 + p.g)).abs() < 1e-12);
        let w3 = find(3, 5);
        assert!((w3.omega + p.e2()).abs() < 1e-12);
    }

    #[test]
    fn jump_operators_are_eigenoperators() {
        let p = working_point();
        let h = build_eigenbasis(&p).unwrap().hamiltonian();
        for j in build_jump_operators(&p).unwrap() {
            let res = commutator(&h, &j.matrix) - j.matrix * C64::new(j.omega, 0.0);
            assert!(max_abs(&res) < 1e-12, "{:?} {}", j.bath, j.omega);
            assert!(j.rate >= 0.0);
        }
    }

    #[test]
    fn jump_operators_decompose_bath_couplings() {
        let p = working_point();
        let eb = build_eigenbasis(&p).unwrap();
        let ops = build_jump_operators(&p).unwrap();
        let coupling = |bath: Bath| {
            let mut x = Op6::zeros();
            for a in 0..2 {
                for b in 0..3 {
                    let (ra, rb, ca, cb) = match bath {
                        Bath::Cold if a == 0 => (0, b, 1, b),
                        Bath::Hot if b == 0 => (a, 0, a, 1),
                        Bath::Work if b == 0 => (a, 0, a, 2),
                        _ => continue,
                    };
                    x[(product_index(ra, rb), product_index(ca, cb))] = C64::new(1.0, 0.0);
                }
            }
            eb.to_energy(&x)
        };
        for bath in Bath::ALL {
            let sum: Op6 = ops
                .iter()
                .filter(|j| j.bath == bath && j.omega < 0.0)
                .map(|j| j.matrix)
                .sum();
            assert!(max_abs(&(sum - coupling(bath))) < 1e-12, "{bath}");
        }
    }

    #[test]
    fn thermal_product_state_limits() {
        let p = working_point();
        let rho = thermal_product_state(&p).unwrap();
        let m = rho.matrix();
        assert!((m.trace().re - 1.0).abs() < 1e-14);
        assert_eq!(max_abs(&(m - Op6::from_diagonal(&m.diagonal()))), 0.0);
        let (p0, p1) = rho.qubit_populations().unwrap();
        assert!((p0 / p1 - 0.7f64.exp()).abs() < 1e-12);
        let hot = RefrigeratorParams { t_c: 1e6, ..p };
        let (p0, p1) = thermal_product_state(&hot)
            .unwrap()
            .qubit_populations()
            .unwrap();
        assert!((p0 - 0.5).abs() < 1e-6 && (p1 - 0.5).abs() < 1e-6);
        assert!(DensityMatrix::new(*m, Basis::Product).is_ok());
    }

    #[test]
    fn thermal_state_commutes_with_free_hamiltonian() {
        let p = RefrigeratorParams {
            g: 0.0,
            ..working_point()
        };
        let h0 = build_hamiltonian(&p).unwrap().map(|x| C64::new(x, 0.0));
        let rho = thermal_product_state(&working_point()).unwrap();
        assert!(max_abs(&commutator(&h0, rho.matrix())) < 1e-12);
    }

    #[test]
    fn virtual_temperature_values() {
        let p = RefrigeratorParams {
            t_w: 1.0,
            t_h: 3.0,
            ..working_point()
        };
        assert!((virtual_temperature(&p).unwrap() - 0.5122).abs() < 5e-5);
        let p = RefrigeratorParams {
            t_w: 2.5,
            t_h: 2.5,
            ..working_point()
        };
        assert!((virtual_temperature(&p).unwrap() - 2.5).abs() < 1e-12);
        let p = RefrigeratorParams {
            e0: 1.0,
            e1: 1.0,
            g: 1e-3,
            t_w: 1.0,
            t_h: 4.0,
            ..working_point()
        };
        assert!((virtual_temperature(&p).unwrap() - 1.0 / 1.75).abs() < 1e-12);
        // E2/Tw = E1/Th
        let p = RefrigeratorParams {
            e0: 1.0,
            e1: 1.0,
            t_w: 2.0,
            t_h: 1.0,
            ..working_point()
        };
        assert_eq!(virtual_temperature(&p), Err(Error::DegenerateTemperature));
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = Op6::zeros();
        m[(0, 0)] = C64::new(1.2, 0.0);
        m[(1, 1)] = C64::new(-0.2, 0.0);
        assert!(matches!(
            DensityMatrix::new(m, Basis::Energy),
            Err(Error::InvalidState(_))
        ));
        let mut m = Op6::zeros();
        m[(0, 0)] = C64::new(0.5, 0.0);
        m[(1, 1)] = C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(m, Basis::Energy).is_err());
        m[(1, 0)] = C64::new(0.0, -0.1);
        assert!(DensityMatrix::new(m, Basis::Energy).is_ok());
    }
}
