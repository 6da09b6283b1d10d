//! Dense LU with partial pivoting, blocked so that the trailing update runs
//! through the matrix-multiply kernel.

use nalgebra::{DMatrix, DVector};

const BLOCK: usize = 64;

#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factor `a`; `None` if a pivot vanishes.
    pub fn factor(mut a: DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut perm: Vec<usize> = (0..n).collect();
        let mut k0 = 0;
        while k0 < n {
            let kb = BLOCK.min(n - k0);
            let k1 = k0 + kb;
            for j in k0..k1 {
                let (mut p, mut best) = (j, 0.0);
                for i in j..n {
                    let v = a[(i, j)].abs();
                    if v > best {
                        best = v;
                        p = i;
                    }
                }
                if !(best > 0.0) || !best.is_finite() {
                    return None;
                }
                if p != j {
                    a.swap_rows(j, p);
                    perm.swap(j, p);
                }
                let d = a[(j, j)];
                for i in j + 1..n {
                    a[(i, j)] /= d;
                }
                for c in j + 1..k1 {
                    let ujc = a[(j, c)];
                    if ujc != 0.0 {
                        for i in j + 1..n {
                            a[(i, c)] -= a[(i, j)] * ujc;
                        }
                    }
                }
            }
            if k1 < n {
                // U12 = L11^{-1} A12
                for c in k1..n {
                    for j in k0..k1 {
                        let v = a[(j, c)];
                        if v != 0.0 {
                            for i in j + 1..k1 {
                                a[(i, c)] -= a[(i, j)] * v;
                            }
                        }
                    }
                }
                let l21 = a.view((k1, k0), (n - k1, kb)).clone_owned();
                let u12 = a.view((k0, k1), (kb, n - k1)).clone_owned();
                a.view_mut((k1, k1), (n - k1, n - k1)).gemm(-1.0, &l21, &u12, 1.0);
            }
            k0 = k1;
        }
        Some(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.lu.nrows();
        let mut x = DVector::from_iterator(n, self.perm.iter().map(|&p| b[p]));
        for j in 0..n {
            let v = x[j];
            if v != 0.0 {
                for i in j + 1..n {
                    x[i] -= self.lu[(i, j)] * v;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let v = x[j];
            if v != 0.0 {
                for i in 0..j {
                    x[i] -= self.lu[(i, j)] * v;
                }
            }
        }
        x
    }
}

/// Solve `a x = b`; `None` for a singular matrix or a non-finite result.
pub fn solve_dense(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = DenseLu::factor(a)?.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_nalgebra_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 7, 64, 65, 150] {
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let x = solve_dense(a.clone(), &b).unwrap();
            let y = a.clone().lu().solve(&b).unwrap();
            assert!((&x - &y).amax() < 1e-8 * (1.0 + y.amax()), "n = {n}");
            assert!((&a * &x - &b).amax() < 1e-10);
        }
    }

    #[test]
    fn singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(DenseLu::factor(a).is_none());
    }
}
