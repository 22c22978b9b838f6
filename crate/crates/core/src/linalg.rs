//! Small dense linear algebra used by the block Liouvillian.
//!
//! The block eigenproblems are at most 6×6, so eigenvalues come from a
//! balanced Hessenberg reduction followed by single-shift complex QR, and
//! eigenvectors from the null spaces of the shifted matrix. Left vectors are
//! paired with right vectors through the bilinear form `uᵀv` (no conjugation).

use nalgebra::{DMatrix, DVector, SMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Operator on the six-dimensional qubit–qutrit Hilbert space.
pub type Op6 = SMatrix<C64, 6, 6>;

pub const DIM: usize = 6;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Relative tolerance below which eigenvalues are treated as one cluster
/// and a cluster is declared defective.
pub const DEFECT_TOL: f64 = 1e-10;

/// Eigenvalues with biorthonormal right/left eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    pub right: Vec<DVector<C64>>,
    pub left: Vec<DVector<C64>>,
}

pub fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S>(m: &nalgebra::Matrix<C64, R, C, S>) -> f64
where
    S: nalgebra::RawStorage<C64, R, C>,
{
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn commutator(a: &Op6, b: &Op6) -> Op6 {
    a * b - b * a
}

pub fn anticommutator(a: &Op6, b: &Op6) -> Op6 {
    a * b + b * a
}

/// Matrix unit `|i⟩⟨j|`.
pub fn unit(i: usize, j: usize) -> Op6 {
    let mut m = Op6::zeros();
    m[(i, j)] = ONE;
    m
}

pub fn hermitian_part(m: &Op6) -> Op6 {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of a Hermitian operator, ascending.
pub fn hermitian_eigenvalues(m: &Op6) -> [f64; DIM] {
    let h = hermitian_part(m);
    let ev = h.symmetric_eigenvalues();
    let mut out = [0.0; DIM];
    for (o, v) in out.iter_mut().zip(ev.iter()) {
        *o = *v;
    }
    out.sort_by(f64::total_cmp);
    out
}

/// `exp(iG)` for Hermitian `G` built through its spectral decomposition, so
/// the result is unitary to rounding.
pub fn expi_hermitian<const N: usize>(g: &SMatrix<C64, N, N>) -> SMatrix<C64, N, N>
where
    nalgebra::Const<N>: nalgebra::DimMin<nalgebra::Const<N>> + nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<nalgebra::DimDiff<nalgebra::Const<N>, nalgebra::U1>>
        + nalgebra::allocator::Allocator<nalgebra::Const<N>>,
{
    let h = (g + g.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let v = eig.eigenvectors;
    let mut d = SMatrix::<C64, N, N>::zeros();
    for (k, &theta) in eig.eigenvalues.iter().enumerate() {
        d[(k, k)] = C64::new(0.0, theta).exp();
    }
    v * d * v.adjoint()
}

/// Parlett–Reinsch balancing with powers of two. Similarity only, so the
/// spectrum is unchanged.
fn balance(a: &mut DMatrix<C64>) {
    let n = a.nrows();
    let radix = 2.0_f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].norm();
                    r += a[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

fn hessenberg(a: &mut DMatrix<C64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut norm = 0.0;
        for i in k + 1..n {
            norm += a[(i, k)].norm_sqr();
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == 0.0 {
            ONE
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vn;
        }
        // rows: A <- (I - 2vv*) A
        for j in 0..n {
            let mut dot = ZERO;
            for (t, i) in (k + 1..n).enumerate() {
                dot += v[t].conj() * a[(i, j)];
            }
            for (t, i) in (k + 1..n).enumerate() {
                a[(i, j)] -= v[t] * dot * 2.0;
            }
        }
        // cols: A <- A (I - 2vv*)
        for i in 0..n {
            let mut dot = ZERO;
            for (t, j) in (k + 1..n).enumerate() {
                dot += a[(i, j)] * v[t];
            }
            for (t, j) in (k + 1..n).enumerate() {
                a[(i, j)] -= dot * v[t].conj() * 2.0;
            }
        }
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
}

/// Eigenvalues of a small general complex matrix.
pub fn eigenvalues(a: &DMatrix<C64>, label: &str) -> Result<Vec<C64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix expected");
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let anorm = max_abs(&h);
    let mut values = vec![ZERO; n];
    let mut hi = n - 1;
    let mut iter = 0usize;
    loop {
        if hi == 0 {
            values[0] = h[(0, 0)];
            break;
        }
        // locate the start of the unreduced window ending at `hi`
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let sub = h[(lo, lo - 1)].norm();
            if sub <= f64::EPSILON * s
                || sub <= f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * anorm)
            {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            values[hi] = h[(hi, hi)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > 60 * n {
            return Err(Error::NoConvergence(label.to_string()));
        }
        let shift = if iter.is_multiple_of(11) {
            // exceptional shift
            h[(hi, hi)] + C64::new(h[(hi, hi - 1)].norm() * 0.75, 0.0)
        } else {
            let aa = h[(hi - 1, hi - 1)];
            let bb = h[(hi - 1, hi)];
            let cc = h[(hi, hi - 1)];
            let dd = h[(hi, hi)];
            let half = (aa - dd) * 0.5;
            let disc = (half * half + bb * cc).sqrt();
            let mid = (aa + dd) * 0.5;
            let r1 = mid + disc;
            let r2 = mid - disc;
            if (r1 - dd).norm() <= (r2 - dd).norm() {
                r1
            } else {
                r2
            }
        };
        for k in lo..=hi {
            h[(k, k)] -= shift;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let x = h[(k, k)];
            let y = h[(k + 1, k)];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (ONE, ZERO)
            } else {
                (x / r, y / r)
            };
            for j in k..=hi {
                let p = h[(k, j)];
                let q = h[(k + 1, j)];
                h[(k, j)] = c.conj() * p + s.conj() * q;
                h[(k + 1, j)] = -s * p + c * q;
            }
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            let top = (k + 2).min(hi);
            for i in lo..=top {
                let p = h[(i, k)];
                let q = h[(i, k + 1)];
                h[(i, k)] = p * c + q * s;
                h[(i, k + 1)] = -p * s.conj() + q * c.conj();
            }
        }
        for k in lo..=hi {
            h[(k, k)] += shift;
        }
    }
    Ok(values)
}

/// Singular values (descending) and the corresponding right singular
/// vectors, smallest last.
fn null_basis(m: &DMatrix<C64>, count: usize) -> (Vec<f64>, Vec<DVector<C64>>) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vecs = order[n - count..]
        .iter()
        .map(|&i| vt.row(i).adjoint().into_owned())
        .collect();
    (sv, vecs)
}

/// Full eigendecomposition with `left[i]ᵀ · right[j] = δ_ij`.
///
/// Eigenvalues closer than `DEFECT_TOL·‖A‖` are grouped; each group must
/// have a complete set of eigenvectors, otherwise the block is reported as
/// defective.
pub fn eig_biorthonormal(a: &DMatrix<C64>, label: &str) -> Result<EigenSystem> {
    let n = a.nrows();
    let values = eigenvalues(a, label)?;
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let tol = DEFECT_TOL * scale;

    let mut assigned = vec![false; n];
    let mut out = EigenSystem {
        values: Vec::with_capacity(n),
        right: Vec::with_capacity(n),
        left: Vec::with_capacity(n),
    };
    for seed in 0..n {
        if assigned[seed] {
            continue;
        }
        let members: Vec<usize> = (seed..n)
            .filter(|&k| !assigned[k] && (values[k] - values[seed]).norm() <= tol)
            .collect();
        for &k in &members {
            assigned[k] = true;
        }
        let m = members.len();
        let mu = members.iter().map(|&k| values[k]).sum::<C64>() / m as f64;
        let shifted = a - DMatrix::<C64>::identity(n, n) * mu;
        let (sv_r, right) = null_basis(&shifted, m);
        let (_, left) = null_basis(&shifted.transpose(), m);
        if sv_r[n - m] > tol.max(1e-13 * scale) * 10.0 {
            return Err(Error::Defective {
                block: label.to_string(),
                detail: format!(
                    "eigenvalue {mu} has multiplicity {m} but singular value {:e}",
                    sv_r[n - m]
                ),
            });
        }
        // pairing matrix S_ij = l_iᵀ r_j
        let s = DMatrix::<C64>::from_fn(m, m, |i, j| left[i].dot(&right[j]));
        let sv_s = s.clone().svd(false, false).singular_values;
        let smin = sv_s.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = sv_s.iter().cloned().fold(0.0, f64::max);
        if !(smin > DEFECT_TOL * smax.max(f64::MIN_POSITIVE)) {
            return Err(Error::Defective {
                block: label.to_string(),
                detail: format!("left/right pairing is singular near eigenvalue {mu}"),
            });
        }
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Numerical(format!("pairing inverse failed in `{label}`")))?;
        let lmat = DMatrix::<C64>::from_columns(&left);
        let lnew = lmat * s_inv.transpose();
        for (j, r) in right.into_iter().enumerate() {
            let l = lnew.column(j).into_owned();
            let lambda = l.dot(&(a * &r));
            out.values.push(lambda);
            out.right.push(r);
            out.left.push(l);
        }
    }
    Ok(out)
}
