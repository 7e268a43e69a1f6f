//! Dense complex matrix kernels used blockwise by the algebra layer.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Thin wrapper holding a full singular value decomposition `m = u diag(s) v_adj`.
pub struct Svd {
    pub u: CMat,
    pub singular_values: DVector<f64>,
    pub v_adj: CMat,
}

// nalgebra's complex SVD occasionally returns factors that do not reproduce the
// input for rank-deficient matrices, so square blocks use one-sided Jacobi.
pub fn svd(m: &CMat) -> Svd {
    assert_eq!(m.nrows(), m.ncols(), "blocks are square");
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = a.column(p).iter().zip(a.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..n {
                        let (xp, xq) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = xp * cs - xq * phase.conj() * sn;
                        mat[(i, q)] = xp * phase * sn + xq * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let largest = norms.iter().copied().fold(0.0, f64::max);
    let negligible = largest * f64::EPSILON * n as f64;
    let mut u = CMat::zeros(n, n);
    let mut v_sorted = CMat::zeros(n, n);
    let mut values = DVector::zeros(n);
    let mut filled = 0;
    for (k, &j) in order.iter().enumerate() {
        values[k] = norms[j];
        v_sorted.set_column(k, &v.column(j));
        if norms[j] > negligible && norms[j] > 0.0 {
            u.set_column(k, &(a.column(j) / c(norms[j])));
            filled += 1;
        }
    }
    complete_orthonormal(&mut u, filled);
    Svd { u, singular_values: values, v_adj: v_sorted.adjoint() }
}

/// Fills columns `filled..` with an orthonormal completion of the first ones.
fn complete_orthonormal(u: &mut CMat, filled: usize) {
    let n = u.nrows();
    let mut k = filled;
    let mut e = 0;
    while k < n && e < n {
        let mut x = CMat::zeros(n, 1);
        x[(e, 0)] = c(1.0);
        e += 1;
        for _ in 0..2 {
            for j in 0..k {
                let col = u.column(j).clone_owned();
                let proj = col.dotc(&x.column(0));
                x.column_mut(0).axpy(-proj, &col, c(1.0));
            }
        }
        let norm = x.norm();
        if norm > 0.5 {
            u.set_column(k, &(x.column(0) / c(norm)));
            k += 1;
        }
    }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return vec![m[(0, 0)].norm()];
    }
    svd(m).singular_values.iter().copied().collect()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix: `m = v diag(values) v*`.
pub fn hermitian_eigen(m: &CMat) -> (DVector<f64>, CMat) {
    let sym = (m + m.adjoint()) * c(0.5);
    if sym.nrows() == 1 {
        return (
            DVector::from_element(1, sym[(0, 0)].re),
            CMat::from_element(1, 1, c(1.0)),
        );
    }
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues, eig.eigenvectors)
}

/// Applies a real function to a Hermitian matrix through its eigenbasis.
pub fn hermitian_map(m: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let diag = CMat::from_diagonal(&values.map(&f));
    &vectors * diag * vectors.adjoint()
}

/// `exp(i t h)` for Hermitian `h`; exactly unitary up to rounding.
pub fn exp_i_hermitian(h: &CMat, t: f64) -> CMat {
    hermitian_map(h, |x| Complex64::from_polar(1.0, t * x))
}

/// General matrix exponential (Padé scaling and squaring).
pub fn expm(m: &CMat) -> CMat {
    if m.nrows() == 1 {
        return CMat::from_element(1, 1, m[(0, 0)].exp());
    }
    m.exp()
}

/// Eigenvalues and eigenvectors of a unitary (normal) matrix via the complex Schur form.
/// Returns unit-modulus eigenvalues and a unitary basis.
pub fn unitary_eigen(u: &CMat) -> (Vec<Complex64>, CMat) {
    let n = u.nrows();
    if n == 1 {
        let z = u[(0, 0)];
        return (vec![z / z.norm()], CMat::from_element(1, 1, c(1.0)));
    }
    let (q, t) = Schur::new(u.clone()).unpack();
    let values = (0..n)
        .map(|k| {
            let z = t[(k, k)];
            z / z.norm()
        })
        .collect();
    (values, q)
}

/// Principal logarithm of a unitary: Hermitian `h` with `exp(i h) = u` and spectrum in (-pi, pi].
/// Also returns the smallest distance of the spectrum of `u` from -1.
pub fn unitary_log(u: &CMat) -> (CMat, f64) {
    let (values, q) = unitary_eigen(u);
    let gap = values
        .iter()
        .map(|z| (z + c(1.0)).norm())
        .fold(f64::INFINITY, f64::min);
    let phases = DVector::from_iterator(values.len(), values.iter().map(|z| c(z.arg())));
    let h = &q * CMat::from_diagonal(&phases) * q.adjoint();
    ((&h + h.adjoint()) * c(0.5), gap)
}

/// Principal square root of a unitary.
pub fn unitary_sqrt(u: &CMat) -> CMat {
    let (h, _) = unitary_log(u);
    exp_i_hermitian(&h, 0.5)
}

/// Smallest distance between -1 and the spectrum of a unitary.
pub fn distance_to_minus_one(u: &CMat) -> f64 {
    unitary_eigen(u)
        .0
        .iter()
        .map(|z| (z + c(1.0)).norm())
        .fold(f64::INFINITY, f64::min)
}

pub fn determinant(m: &CMat) -> Complex64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.clone().determinant()
}

/// Largest entrywise deviation from transpose symmetry.
pub fn asymmetry(m: &CMat) -> f64 {
    (m - m.transpose()).iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Phase of a complex number wrapped to (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}
