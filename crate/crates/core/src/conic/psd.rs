use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::SQRT_2;

pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)` (either order) in the column-major lower
/// triangle of a `d x d` matrix.
pub fn svec_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * d - (j * j - j) / 2 + (i - j)
}

/// Scaled vectorization: off-diagonal entries times sqrt(2), so that
/// `svec(X).dot(svec(Y)) == trace(XY)`.
pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    let mut v = DVector::zeros(svec_len(d));
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            v[k] = if i == j { m[(i, j)] } else { SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]) };
            k += 1;
        }
    }
    v
}

pub fn smat(v: &[f64], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                m[(i, j)] = v[k] / SQRT_2;
                m[(j, i)] = v[k] / SQRT_2;
            }
            k += 1;
        }
    }
    m
}

/// Frobenius-nearest PSD matrix: symmetrize, then clip negative
/// eigenvalues to zero.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += lam * v * v.transpose();
        }
    }
    0.5 * (&out + out.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        0.5 * (&a + a.transpose())
    }

    #[test]
    fn svec_index_matches_enumeration() {
        for d in 1..7 {
            let mut k = 0;
            for j in 0..d {
                for i in j..d {
                    assert_eq!(svec_index(d, i, j), k);
                    assert_eq!(svec_index(d, j, i), k);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn svec_inner_product_is_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_sym(5, &mut rng);
        let y = random_sym(5, &mut rng);
        assert!((svec(&x).dot(&svec(&y)) - (&x * &y).trace()).abs() < 1e-12);
        assert!((smat(svec(&x).as_slice(), 5) - &x).norm() < 1e-15);
    }

    #[test]
    fn identity_and_negative_identity() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert!((project_psd(&i) - &i).norm() < 1e-14);
        assert!(project_psd(&(-&i)).norm() < 1e-14);
    }

    #[test]
    fn projection_is_nearest_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_sym(5, &mut rng);
            let p = project_psd(&m);
            let eig = SymmetricEigen::new(p.clone());
            assert!(eig.eigenvalues.min() >= -1e-10);
            assert!((project_psd(&p) - &p).norm() < 1e-12);
            let best = (&m - &p).norm();
            // no random PSD matrix is closer
            for _ in 0..200 {
                let b = DMatrix::from_fn(5, 5, |_, _| rng.gen::<f64>() - 0.5);
                let cand = &p + 0.1 * &b * b.transpose();
                let c2 = project_psd(&(&cand + 0.05 * random_sym(5, &mut rng)));
                assert!((&m - &c2).norm() >= best - 1e-12);
            }
            // optimality: M - P is NSD and orthogonal to P
            let r = &m - &p;
            assert!(SymmetricEigen::new(r.clone()).eigenvalues.max() <= 1e-10);
            assert!((&r * &p).trace().abs() < 1e-10);
        }
    }
}
