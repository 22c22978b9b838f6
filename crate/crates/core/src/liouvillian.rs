//! Block-diagonal generator of the refrigerator dynamics.
//!
//! In the energy eigenbasis the 36 matrix elements split into the six
//! populations (one 6×6 block), four coupled coherence pairs (2×2 blocks)
//! and 22 coherences that evolve on their own. The blocks are read off by
//! applying the generator to every matrix unit `|k⟩⟨l|`, so nothing is
//! transcribed by hand; [`assemble_full_superoperator`] builds the same
//! generator through Kronecker products as an independent reference.

use std::fmt;

use nalgebra::{DMatrix, Matrix2, SMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{anticommutator, eig_biorthonormal, max_abs, unit, Op6, C64, DIM, ONE, ZERO};
use crate::model::{
    analytic_eigenbasis, build_eigenbasis, build_hamiltonian, jump_operators_in, Basis,
    DensityMatrix, EnergyEigenbasis, JumpOperator, RefrigeratorParams,
};

/// Coupled coherence pairs `(first, second)`, zero-based level indices.
/// One-based these are {ρ63, ρ52}, {ρ36, ρ25}, {ρ65, ρ32}, {ρ56, ρ23}.
pub const PAIR_INDICES: [((usize, usize), (usize, usize)); 4] = [
    ((5, 2), (4, 1)),
    ((2, 5), (1, 4)),
    ((5, 4), (2, 1)),
    ((4, 5), (1, 2)),
];

/// `d/dt (ρ_first, ρ_second)ᵀ = matrix · (ρ_first, ρ_second)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBlock {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub matrix: Matrix2<C64>,
}

/// A coherence `ρ_ij` that decays on its own: `dρ_ij/dt = λ_ij ρ_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMode {
    pub index: (usize, usize),
    pub eigenvalue: C64,
}

#[derive(Debug, Clone)]
pub struct BlockLiouvillian {
    pub params: RefrigeratorParams,
    pub basis: EnergyEigenbasis,
    pub jumps: Vec<JumpOperator>,
    /// `dρ_ii/dt = Σ_j pop_block[(i, j)] ρ_jj`
    pub pop_block: SMatrix<f64, 6, 6>,
    pub pair_blocks: [PairBlock; 4],
    /// Sorted by index pair.
    pub scalar_modes: Vec<ScalarMode>,
}

/// `L[ρ] = -i[H, ρ] + Σ γ (A ρ A† - ½{A†A, ρ})` for an energy-basis `ρ`.
pub fn apply_generator(h: &Op6, jumps: &[JumpOperator], rho: &Op6) -> Op6 {
    let mut out = (h * rho - rho * h) * C64::new(0.0, -1.0);
    for j in jumps {
        if j.rate == 0.0 {
            continue;
        }
        let a = &j.matrix;
        let ad = a.adjoint();
        let ada = ad * a;
        out += (a * rho * ad - anticommutator(&ada, rho).scale(0.5)).scale(j.rate);
    }
    out
}

fn block_of(i: usize, j: usize) -> Block {
    if i == j {
        return Block::Population;
    }
    for (p, (a, b)) in PAIR_INDICES.iter().enumerate() {
        if (i, j) == *a || (i, j) == *b {
            return Block::Pair(p);
        }
    }
    Block::Scalar(i, j)
}

pub fn assemble_block_liouvillian(params: &RefrigeratorParams) -> Result<BlockLiouvillian> {
    let basis = build_eigenbasis(params)?;
    let jumps = jump_operators_in(params, &basis)?;
    let h = basis.hamiltonian();

    // images[(k, l)] = L[|k⟩⟨l|]
    let images: Vec<Op6> = (0..DIM * DIM)
        .map(|n| apply_generator(&h, &jumps, &unit(n / DIM, n % DIM)))
        .collect();
    let image = |k: usize, l: usize| &images[k * DIM + l];

    let scale = images.iter().map(max_abs).fold(1.0, f64::max);
    let leak_tol = 1e-13 * scale;
    for k in 0..DIM {
        for l in 0..DIM {
            let from = block_of(k, l);
            for i in 0..DIM {
                for j in 0..DIM {
                    let value = image(k, l)[(i, j)].norm();
                    if value > leak_tol && block_of(i, j) != from {
                        return Err(Error::BlockLeak {
                            from: (k, l),
                            to: (i, j),
                            value,
                        });
                    }
                }
            }
        }
    }

    let mut pop_block = SMatrix::<f64, 6, 6>::zeros();
    for j in 0..DIM {
        for i in 0..DIM {
            let z = image(j, j)[(i, i)];
            if z.im.abs() > leak_tol {
                return Err(Error::Numerical(format!("complex population rate {z}")));
            }
            pop_block[(i, j)] = z.re;
        }
    }

    let pair_blocks = PAIR_INDICES.map(|(first, second)| {
        let members = [first, second];
        let matrix = Matrix2::from_fn(|r, c| {
            let (ri, rj) = members[r];
            let (ci, cj) = members[c];
            image(ci, cj)[(ri, rj)]
        });
        PairBlock {
            first,
            second,
            matrix,
        }
    });

    let mut scalar_modes = Vec::with_capacity(22);
    for i in 0..DIM {
        for j in 0..DIM {
            if let Block::Scalar(..) = block_of(i, j) {
                let eigenvalue = image(i, j)[(i, j)];
                scalar_modes.push(ScalarMode {
                    index: (i, j),
                    eigenvalue,
                });
            }
        }
    }

    Ok(BlockLiouvillian {
        params: *params,
        basis,
        jumps,
        pop_block,
        pair_blocks,
        scalar_modes,
    })
}

impl BlockLiouvillian {
    /// `D_i = -2 Λ^diag_ii`, twice the total escape rate of level `i`.
    pub fn d_values(&self) -> [f64; DIM] {
        let mut d = [0.0; DIM];
        for (i, di) in d.iter_mut().enumerate() {
            *di = -2.0 * self.pop_block[(i, i)];
        }
        d
    }

    /// The blocks written back into a 36×36 matrix acting on column-stacked
    /// energy-basis density matrices (`vec(ρ)[i + 6j] = ρ_ij`).
    pub fn embed(&self) -> DMatrix<C64> {
        let v = |i: usize, j: usize| i + DIM * j;
        let mut l = DMatrix::<C64>::zeros(DIM * DIM, DIM * DIM);
        for i in 0..DIM {
            for j in 0..DIM {
                l[(v(i, i), v(j, j))] = C64::new(self.pop_block[(i, j)], 0.0);
            }
        }
        for pb in &self.pair_blocks {
            let m = [pb.first, pb.second];
            for r in 0..2 {
                for c in 0..2 {
                    l[(v(m[r].0, m[r].1), v(m[c].0, m[c].1))] = pb.matrix[(r, c)];
                }
            }
        }
        for s in &self.scalar_modes {
            let k = v(s.index.0, s.index.1);
            l[(k, k)] = s.eigenvalue;
        }
        l
    }
}

/// Brute-force column-stacked superoperator in the product basis.
///
/// Built from Kronecker products, `vec(AXB) = (Bᵀ ⊗ A) vec(X)`, and valid at
/// `g = 0`, where channels of equal frequency within one bath merge.
pub fn assemble_full_superoperator(params: &RefrigeratorParams) -> Result<DMatrix<C64>> {
    let h = build_hamiltonian(params)?.map(|x| C64::new(x, 0.0));
    let eb = analytic_eigenbasis(params);
    let jumps = jump_operators_in(params, &eb)?;
    let id = Op6::identity();
    let kron = |a: &Op6, b: &Op6| -> DMatrix<C64> {
        let a = DMatrix::from_column_slice(DIM, DIM, a.as_slice());
        let b = DMatrix::from_column_slice(DIM, DIM, b.as_slice());
        a.kronecker(&b)
    };
    let mut l = (kron(&id, &h) - kron(&h.transpose(), &id)) * C64::new(0.0, -1.0);
    for j in &jumps {
        let a = eb.to_product(&j.matrix);
        let ada = a.adjoint() * a;
        let term = kron(&a.conjugate(), &a)
            - kron(&id, &ada) * C64::new(0.5, 0.0)
            - kron(&ada.transpose(), &id) * C64::new(0.5, 0.0);
        l += term * C64::new(j.rate, 0.0);
    }
    Ok(l)
}

/// Which block a mode was computed from. Declaration order is the
/// tie-break order used when sorting the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Block {
    Population,
    Pair(usize),
    Scalar(usize, usize),
}

impl fmt::Display for Block {
    /// Level labels are printed one-based.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Population => write!(f, "pop"),
            Block::Pair(p) => {
                let ((a, b), (c, d)) = PAIR_INDICES[*p];
                write!(f, "pair:{}{},{}{}", a + 1, b + 1, c + 1, d + 1)
            }
            Block::Scalar(i, j) => write!(f, "scalar:{}{}", i + 1, j + 1),
        }
    }
}

/// One eigenmode: `L[right] = eigenvalue · right`, `Tr(left · L[X]) =
/// eigenvalue · Tr(left · X)`. Energy basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub eigenvalue: C64,
    pub right: Op6,
    pub left: Op6,
    pub block: Block,
    /// Zero eigenvalue of the population block.
    pub stationary: bool,
}

/// Sorted eigenmodes with `Tr(l_i r_j) = δ_ij`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub modes: Vec<Mode>,
    pub basis: EnergyEigenbasis,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn stationary_count(&self) -> usize {
        self.modes.iter().filter(|m| m.stationary).count()
    }

    pub fn is_ergodic(&self) -> bool {
        self.stationary_count() == 1
    }

    /// `Tr(l_i X)` for an energy-basis `X`.
    pub fn overlap(&self, i: usize, x: &Op6) -> C64 {
        (self.modes[i].left * x).trace()
    }

    /// `|Tr(l_i r_j) - δ_ij|` for all pairs.
    pub fn biorthonormality_residuals(&self) -> DMatrix<f64> {
        let n = self.modes.len();
        DMatrix::from_fn(n, n, |i, j| {
            let want = if i == j { ONE } else { ZERO };
            ((self.modes[i].left * self.modes[j].right).trace() - want).norm()
        })
    }

    /// First mode that is not stationary; the slowest decay when the
    /// generator is ergodic.
    pub fn first_decaying(&self) -> Option<usize> {
        self.modes.iter().position(|m| !m.stationary)
    }
}

/// Right vector scaled to unit Frobenius norm with its largest entry real
/// and positive.
fn normalize_phase(r: &mut Op6) {
    let norm = r.norm();
    if norm == 0.0 {
        return;
    }
    let mut best = ZERO;
    for z in r.iter() {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    let phase = best.conj() / best.norm();
    *r *= phase / norm;
}

fn finish_mode(eigenvalue: C64, mut right: Op6, left: Op6, block: Block, stationary: bool) -> Mode {
    if stationary && right.trace().norm() > 1e-8 * right.norm() {
        right /= right.trace();
    } else {
        normalize_phase(&mut right);
    }
    let pairing = (left * right).trace();
    Mode {
        eigenvalue,
        right,
        left: left / pairing,
        block,
        stationary,
    }
}

/// Sort by descending real part; within a cluster of equal real parts
/// (relative tolerance) by ascending |Im|, then block, then positive
/// imaginary part first.
fn sort_modes(modes: &mut [Mode]) {
    modes.sort_by(|a, b| b.eigenvalue.re.total_cmp(&a.eigenvalue.re));
    let scale = modes
        .iter()
        .map(|m| m.eigenvalue.re.abs())
        .fold(0.0, f64::max);
    let tol = (1e-10 * scale).max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < modes.len() {
        let re0 = modes[start].eigenvalue.re;
        let mut end = start + 1;
        while end < modes.len() && (re0 - modes[end].eigenvalue.re).abs() <= tol {
            end += 1;
        }
        modes[start..end].sort_by(|a, b| {
            b.stationary
                .cmp(&a.stationary)
                .then(a.eigenvalue.im.abs().total_cmp(&b.eigenvalue.im.abs()))
                .then(a.block.cmp(&b.block))
                .then(b.eigenvalue.im.total_cmp(&a.eigenvalue.im))
        });
        start = end;
    }
}

pub fn spectral_decompose(blocks: &BlockLiouvillian) -> Result<SpectralDecomposition> {
    let mut modes = Vec::with_capacity(DIM * DIM);

    let pop = blocks.pop_block.map(|x| C64::new(x, 0.0));
    let pop = DMatrix::from_column_slice(DIM, DIM, pop.as_slice());
    let pop_scale = max_abs(&pop).max(f64::MIN_POSITIVE);
    let sys = eig_biorthonormal(&pop, "population")?;
    for k in 0..DIM {
        let lambda = sys.values[k];
        let right = Op6::from_diagonal(&nalgebra::Vector6::from_iterator(
            sys.right[k].iter().cloned(),
        ));
        let left = Op6::from_diagonal(&nalgebra::Vector6::from_iterator(
            sys.left[k].iter().cloned(),
        ));
        let stationary =
            lambda.norm() <= 1e-10 * pop_scale || blocks.pop_block.iter().all(|x| *x == 0.0);
        modes.push(finish_mode(
            lambda,
            right,
            left,
            Block::Population,
            stationary,
        ));
    }

    for (p, pb) in blocks.pair_blocks.iter().enumerate() {
        let m = DMatrix::from_column_slice(2, 2, pb.matrix.as_slice());
        let sys = eig_biorthonormal(&m, &Block::Pair(p).to_string())?;
        for k in 0..2 {
            let (r, l) = (&sys.right[k], &sys.left[k]);
            let right = unit(pb.first.0, pb.first.1) * r[0] + unit(pb.second.0, pb.second.1) * r[1];
            let left = unit(pb.first.1, pb.first.0) * l[0] + unit(pb.second.1, pb.second.0) * l[1];
            modes.push(finish_mode(
                sys.values[k],
                right,
                left,
                Block::Pair(p),
                false,
            ));
        }
    }

    for s in &blocks.scalar_modes {
        let (i, j) = s.index;
        modes.push(finish_mode(
            s.eigenvalue,
            unit(i, j),
            unit(j, i),
            Block::Scalar(i, j),
            false,
        ));
    }

    sort_modes(&mut modes);
    Ok(SpectralDecomposition {
        modes,
        basis: blocks.basis.clone(),
    })
}

/// Below this second-smallest singular value of the population block the
/// steady state is considered non-unique.
pub const ERGODICITY_TOL: f64 = 1e-10;

/// Diagonal energy-basis steady state `τ` with `Λ^diag τ = 0`, `Σ τ_i = 1`.
pub fn solve_steady_state(blocks: &BlockLiouvillian) -> Result<DensityMatrix> {
    let a = nalgebra::DMatrix::from_column_slice(DIM, DIM, blocks.pop_block.as_slice());
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..DIM).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let second = svd.singular_values[order[1]];
    if !(second > ERGODICITY_TOL) {
        return Err(Error::NonErgodic(second));
    }
    let v: Vec<f64> = vt.row(order[0]).iter().cloned().collect();
    let sum: f64 = v.iter().sum();
    if sum == 0.0 || !sum.is_finite() {
        return Err(Error::Numerical("null vector has zero trace".into()));
    }
    let mut tau: Vec<f64> = v.iter().map(|x| x / sum).collect();
    if let Some(bad) = tau.iter().find(|x| **x < -1e-10) {
        return Err(Error::Numerical(format!(
            "negative steady-state population {bad:e}"
        )));
    }
    for x in tau.iter_mut() {
        *x = x.max(0.0);
    }
    let total: f64 = tau.iter().sum();
    let mut m = Op6::zeros();
    for (i, x) in tau.iter().enumerate() {
        m[(i, i)] = C64::new(x / total, 0.0);
    }
    Ok(DensityMatrix::from_raw(m, Basis::Energy))
}

/// Relative slack used by [`slowest_mode_set`]; absolute in units of the
/// generator.
pub const SLOW_SET_TOL: f64 = 1e-10;

/// All decaying modes whose real part equals that of the slowest one.
pub fn slowest_mode_set(spec: &SpectralDecomposition) -> Vec<usize> {
    let Some(first) = spec.first_decaying() else {
        return Vec::new();
    };
    let re2 = spec.modes[first].eigenvalue.re;
    (first..spec.len())
        .filter(|&i| {
            !spec.modes[i].stationary && (spec.modes[i].eigenvalue.re - re2).abs() <= SLOW_SET_TOL
        })
        .collect()
}
