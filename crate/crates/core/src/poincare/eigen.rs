//! Eigenvalues of small dense real matrices: reduction to upper Hessenberg
//! form by stabilised elimination, then Francis double-shift QR.

#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EigenError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("QR iteration did not converge")]
    NoConvergence,
}

/// A complex eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// All eigenvalues of the row-major square matrix `m`, sorted by decreasing modulus.
pub fn eigenvalues(m: &[Vec<f64>]) -> Result<Vec<Eigenvalue>, EigenError> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(EigenError::NotSquare);
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based working copy
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = m[i][j];
        }
    }
    hessenberg(&mut a, n);
    let (wr, wi) = hqr(&mut a, n)?;
    let mut out: Vec<Eigenvalue> = (1..=n).map(|i| Eigenvalue { re: wr[i], im: wi[i] }).collect();
    out.sort_by(|x, y| {
        y.modulus()
            .partial_cmp(&x.modulus())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(out)
}

pub fn spectral_radius(eigs: &[Eigenvalue]) -> f64 {
    eigs.iter().map(Eigenvalue::modulus).fold(0.0, f64::max)
}

fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    for m in 2..n {
        let mut x = 0.0;
        let mut i = m;
        for j in m..=n {
            if a[j][m - 1].abs() > f64::abs(x) {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let tmp = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut().take(n + 1).skip(1) {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut().take(n + 1).skip(1) {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for i in 3..=n {
        for j in 1..(i - 1) {
            a[i][j] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<(Vec<f64>, Vec<f64>), EigenError> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r, mut x, mut y, mut z, mut w, mut s): (f64, f64, f64, f64, f64, f64, f64, f64);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let nu = nn;
            let mut l = nu;
            while l >= 2 {
                s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= f64::EPSILON * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nu][nu];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
            } else {
                y = a[nu - 1][nu - 1];
                w = a[nu][nu - 1] * a[nu - 1][nu];
                if l == nu - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nu - 1] = x + z;
                        wr[nu] = x + z;
                        if z != 0.0 {
                            wr[nu] = x - w / z;
                        }
                        wi[nu - 1] = 0.0;
                        wi[nu] = 0.0;
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                        wi[nu - 1] = -z;
                        wi[nu] = z;
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(EigenError::NoConvergence);
                    }
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nu {
                            a[i][i] -= x;
                        }
                        s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nu - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u <= f64::EPSILON * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nu {
                        a[i][i - 2] = 0.0;
                        if i != m + 2 {
                            a[i][i - 3] = 0.0;
                        }
                    }
                    for k in m..nu {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k != nu - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nu - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = nu.min(k + 3);
                            for i in l..=mmin {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if k != nu - 1 {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((wr, wi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SplitMix64;

    fn close(a: &[Eigenvalue], b: &[(f64, f64)], tol: f64) -> bool {
        let mut unmatched: Vec<(f64, f64)> = b.to_vec();
        for e in a {
            let pos = unmatched
                .iter()
                .position(|(re, im)| (e.re - re).abs() < tol && (e.im - im).abs() < tol);
            match pos {
                Some(p) => {
                    unmatched.remove(p);
                }
                None => return false,
            }
        }
        unmatched.is_empty()
    }

    #[test]
    fn scalar_and_diagonal() {
        assert_eq!(eigenvalues(&[vec![0.5]]).unwrap(), vec![Eigenvalue { re: 0.5, im: 0.0 }]);
        let e = eigenvalues(&[vec![2.0, 1.0, 0.0], vec![0.0, -3.0, 4.0], vec![0.0, 0.0, 0.25]]).unwrap();
        assert!(close(&e, &[(2.0, 0.0), (-3.0, 0.0), (0.25, 0.0)], 1e-12));
        assert_eq!(e[0].re, -3.0);
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let th: f64 = 0.3;
        let e = eigenvalues(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]]).unwrap();
        assert!(close(&e, &[(th.cos(), th.sin()), (th.cos(), -th.sin())], 1e-14));
        assert!((spectral_radius(&e) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let m = vec![
            vec![10.0, -35.0, 50.0, -24.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let e = eigenvalues(&m).unwrap();
        assert!(close(&e, &[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)], 1e-9));
    }

    #[test]
    fn random_matrices_agree_with_schur_decomposition() {
        let mut rng = SplitMix64::new(99);
        for n in 1..=16 {
            for _ in 0..5 {
                let m: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect())
                    .collect();
                let ours = eigenvalues(&m).unwrap();
                let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
                let theirs: Vec<(f64, f64)> = dm.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
                assert!(close(&ours, &theirs, 1e-8), "n = {n}\nours {ours:?}\ntheirs {theirs:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(eigenvalues(&[vec![1.0, 2.0]]), Err(EigenError::NotSquare));
        assert_eq!(eigenvalues(&[vec![f64::NAN]]), Err(EigenError::NonFinite));
    }
}
