//! Cyclic Jacobi eigendecomposition for small symmetric matrices.

use nalgebra::{SMatrix, SVector};

/// Eigen-pairs sorted by ascending eigenvalue; column `k` of `vectors`
/// belongs to `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen<const D: usize> {
    pub values: SVector<f64, D>,
    pub vectors: SMatrix<f64, D, D>,
}

const MAX_SWEEPS: usize = 64;

/// Diagonalizes `a` with cyclic Jacobi rotations. Only the upper triangle
/// is read.
pub fn symmetric_eigen<const D: usize>(a: &SMatrix<f64, D, D>) -> SymmetricEigen<D> {
    let mut m = *a;
    for i in 0..D {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    let mut v = SMatrix::<f64, D, D>::identity();

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..D {
            for q in (p + 1)..D {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off == 0.0 {
            break;
        }
        let mut rotated = false;
        for p in 0..D {
            for q in (p + 1)..D {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Negligible against both diagonal entries: zero it.
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..D {
                    if r != p && r != q {
                        let arp = m[(r, p)];
                        let arq = m[(r, q)];
                        let nrp = arp - s * (arq + tau * arp);
                        let nrq = arq + s * (arp - tau * arq);
                        m[(r, p)] = nrp;
                        m[(p, r)] = nrp;
                        m[(r, q)] = nrq;
                        m[(q, r)] = nrq;
                    }
                }
                for r in 0..D {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..D).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]).then(i.cmp(&j)));
    let mut values = SVector::<f64, D>::zeros();
    let mut vectors = SMatrix::<f64, D, D>::zeros();
    for (k, &i) in order.iter().enumerate() {
        values[k] = m[(i, i)];
        vectors.set_column(k, &v.column(i));
    }
    SymmetricEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;

    #[test]
    fn diagonal_matrix_is_sorted() {
        let a = Matrix4::from_diagonal(&nalgebra::Vector4::new(3.0, 1.0, 4.0, 2.0));
        let e = symmetric_eigen(&a);
        assert_eq!(e.values.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.vectors.column(0).iamax(), 1);
    }

    #[test]
    fn reconstructs_random_symmetric_matrix() {
        let b = SMatrix::<f64, 12, 12>::from_fn(|i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0 + (i as f64 * 0.1));
        let a = b.transpose() * b;
        let e = symmetric_eigen(&a);
        let recon = e.vectors * SMatrix::<f64, 12, 12>::from_diagonal(&e.values) * e.vectors.transpose();
        assert!((recon - a).norm() < 1e-11 * a.norm());
        let ortho = e.vectors.transpose() * e.vectors - SMatrix::<f64, 12, 12>::identity();
        assert!(ortho.norm() < 1e-13);
        for k in 1..12 {
            assert!(e.values[k - 1] <= e.values[k]);
        }
    }
}
