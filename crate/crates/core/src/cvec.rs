//! Small dense complex-vector helpers.

use num_complex::Complex64;

pub type CVec = Vec<Complex64>;

/// `x† y`.
#[inline]
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

#[inline]
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum()
}

#[inline]
pub fn norm(x: &[Complex64]) -> f64 {
    norm_sqr(x).sqrt()
}

pub fn scale(x: &mut [Complex64], s: Complex64) {
    for a in x {
        *a *= s;
    }
}

/// Removes from `x` its components along each (orthonormal) vector of
/// `basis`. Two passes keep the result orthogonal to working precision.
pub fn project_out(x: &mut [Complex64], basis: &[CVec]) {
    for _ in 0..2 {
        for q in basis {
            let c = inner(q, x);
            for (a, b) in x.iter_mut().zip(q) {
                *a -= c * b;
            }
        }
    }
}

/// Orthonormal basis of `span(vectors)` by modified Gram-Schmidt with
/// re-orthogonalization. A vector whose residual falls below `rel_tol` times
/// its own norm is treated as dependent and skipped, as is a zero vector.
pub fn orthonormal_basis<'a>(vectors: impl IntoIterator<Item = &'a [Complex64]>, rel_tol: f64) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::new();
    for v in vectors {
        let n0 = norm(v);
        if n0 == 0.0 {
            continue;
        }
        let mut r = v.to_vec();
        project_out(&mut r, &basis);
        let n = norm(&r);
        if n > rel_tol * n0 {
            scale(&mut r, Complex64::from(1.0 / n));
            basis.push(r);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_conjugates_left_argument() {
        let x = vec![c(0.0, 1.0)];
        let y = vec![c(0.0, 1.0)];
        assert_eq!(inner(&x, &y), c(1.0, 0.0));
    }

    #[test]
    fn basis_skips_dependent_vectors() {
        let a = vec![c(1.0, 0.0), c(1.0, 0.0)];
        let b = vec![c(2.0, 0.0), c(2.0, 0.0)];
        let z = vec![c(0.0, 0.0), c(0.0, 0.0)];
        let basis = orthonormal_basis([a.as_slice(), b.as_slice(), z.as_slice()], 1e-10);
        assert_eq!(basis.len(), 1);
        assert!((norm(&basis[0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_is_orthogonal() {
        let a = vec![c(1.0, 0.5), c(0.2, -1.0), c(0.0, 0.3)];
        let basis = orthonormal_basis([a.as_slice()], 1e-10);
        let mut x = vec![c(0.3, 0.3), c(1.0, 0.0), c(-2.0, 0.1)];
        project_out(&mut x, &basis);
        assert!(inner(&a, &x).norm() < 1e-14);
    }
}
