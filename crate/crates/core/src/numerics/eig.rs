use crate::error::{Error, Result};

use super::Matrix;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix,
}

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
pub fn sym_eig(s: &Matrix) -> Result<SymEigen> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::shape(
            "sym_eig",
            format!("expected square matrix, got {}x{}", s.rows(), s.cols()),
        ));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("sym_eig input"));
    }
    let scale = s.data().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in i + 1..n {
            if (s.get(i, j) - s.get(j, i)).abs() > SYMMETRY_TOL * scale {
                return Err(Error::shape(
                    "sym_eig",
                    format!("asymmetric at ({i}, {j})"),
                ));
            }
        }
    }

    let mut a: Vec<f64> = s.data().to_vec();
    // symmetrize exactly so rotations keep both triangles consistent
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
    let mut v = Matrix::identity(n).into_data();
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(SymEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    fn random_symmetric(rng: &mut RngState, n: usize) -> Matrix {
        let g = rng.gaussian(n, n);
        g.add(&g.transpose()).unwrap()
    }

    #[test]
    fn diagonal() {
        let mut d = Matrix::zeros(3, 3);
        d.set(0, 0, 3.0);
        d.set(1, 1, 1.0);
        d.set(2, 2, 2.0);
        let e = sym_eig(&d).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vectors.column(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(e.vectors.column(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(e.vectors.column(2), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let s = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = sym_eig(&s).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = e.vectors.column(0);
        let v1 = e.vectors.column(1);
        assert!((v0[0].abs() - h).abs() < 1e-12 && (v0[0] - v0[1]).abs() < 1e-12);
        assert!((v1[0].abs() - h).abs() < 1e-12 && (v1[0] + v1[1]).abs() < 1e-12);
    }

    #[test]
    fn residual_orthonormality_and_reconstruction() {
        let mut rng = RngState::new(5);
        for n in [1, 2, 6, 13] {
            let s = random_symmetric(&mut rng, n);
            let e = sym_eig(&s).unwrap();
            for w in e.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
            let scale = e.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                let v = Matrix::new(n, 1, e.vectors.column(i)).unwrap();
                let sv = s.matmul(&v).unwrap();
                let resid = sv.sub(&v.scale(e.values[i])).unwrap().frobenius_norm();
                assert!(resid <= 1e-8 * scale, "residual {resid}");
            }
            let vtv = e.vectors.matmul_at(&e.vectors).unwrap();
            assert!(vtv.max_abs_diff(&Matrix::identity(n)).unwrap() <= 1e-8);
            let lam = Matrix::from_fn(n, n, |r, c| if r == c { e.values[r] } else { 0.0 });
            let rebuilt = e.vectors.matmul(&lam).unwrap().matmul_bt(&e.vectors).unwrap();
            let rel = rebuilt.sub(&s).unwrap().frobenius_norm() / s.frobenius_norm();
            assert!(rel <= 1e-8);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sym_eig(&Matrix::zeros(2, 3)).is_err());
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(sym_eig(&a).is_err());
    }
}
