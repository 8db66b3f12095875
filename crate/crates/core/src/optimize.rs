//! Derivative-free minimisation and finite-difference helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::C64;

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, a), b) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*a, *b);
    }
}

/// Nelder–Mead on the box `[lo, hi]`, points projected back into the box.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    step: f64,
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Minimum> {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i] + step <= hi[i] { step } else { -step };
        project(&mut v, lo, hi);
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect::<Result<_>>()?;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[n] - vals[0];
        let size = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() <= tol && size <= tol.sqrt() {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |a: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n)
                .map(|j| centroid[j] + a * (simplex[n][j] - centroid[j]))
                .collect();
            project(&mut v, lo, hi);
            v
        };
        let xr = along(-1.0);
        let fr = f(&xr)?;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe)?;
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x)?;
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x)?;
                (x, v)
            };
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = (0..n)
                        .map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]))
                        .collect();
                    vals[i] = f(&v)?;
                    simplex[i] = v;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap();
    Ok(Minimum {
        x: simplex[best].clone(),
        value: vals[best],
        iterations: it,
    })
}

/// Central-difference gradient and Hessian with step `h`.
pub fn fd_gradient_hessian(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = x.len();
    let f0 = f(x)?;
    let at = |sh: &[(usize, f64)]| {
        let mut v = x.to_vec();
        for &(i, s) in sh {
            v[i] += s;
        }
        v
    };
    let mut g = vec![0.0; d];
    let mut hess = vec![vec![0.0; d]; d];
    for i in 0..d {
        let fp = f(&at(&[(i, h)]))?;
        let fm = f(&at(&[(i, -h)]))?;
        g[i] = (fp - fm) / (2.0 * h);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let v = f(&at(&[(i, h), (j, h)]))?
                - f(&at(&[(i, h), (j, -h)]))?
                - f(&at(&[(i, -h), (j, h)]))?
                + f(&at(&[(i, -h), (j, -h)]))?;
            hess[i][j] = v / (4.0 * h * h);
            hess[j][i] = hess[i][j];
        }
    }
    Ok((g, hess))
}

/// Largest eigenvalue of a real symmetric matrix.
pub fn max_eigenvalue(m: &[Vec<f64>]) -> f64 {
    sym_eigenvalues(m)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    sym_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn sym_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let d = m.len();
    let a = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i][j] + m[j][i]));
    a.symmetric_eigen().eigenvalues.iter().cloned().collect()
}

/// Solves `a x = b` for a small real system.
pub fn solve_real(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let d = a.len();
    let m = DMatrix::from_fn(d, d, |i, j| a[i][j]);
    m.lu()
        .solve(&DVector::from_column_slice(b))
        .map(|v| v.iter().cloned().collect())
}

/// Newton iterations towards a nondegenerate local maximum, finite-difference
/// derivatives with a step shrinking with the update. Returns the point and
/// the last Hessian, or `None` when the Hessian stops being negative definite.
pub fn newton_maximize(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    h0: f64,
    max_step: f64,
) -> Result<Option<(Vec<f64>, Vec<Vec<f64>>)>> {
    let mut x = x0.to_vec();
    let mut h = h0;
    let mut best = f(&x)?;
    let mut last = None;
    for _ in 0..30 {
        let (g, hess) = fd_gradient_hessian(f, &x, h)?;
        if max_eigenvalue(&hess) >= -1e-8 {
            return Ok(None);
        }
        let Some(step) = solve_real(&hess, &g) else {
            return Ok(None);
        };
        let mut next = x.clone();
        let mut len = 0.0_f64;
        for (v, s) in next.iter_mut().zip(&step) {
            let s = s.clamp(-max_step, max_step);
            *v -= s;
            len = len.max(s.abs());
        }
        let fv = f(&next)?;
        last = Some(hess);
        if fv < best - 1e-15 {
            break;
        }
        best = fv;
        x = next;
        if len < 1e-10 {
            break;
        }
        h = (len * 4.0).clamp(1e-4, h0);
    }
    Ok(last.map(|h| (x, h)))
}

/// Central second differences of a complex function of a real vector,
/// extrapolated once from steps `h` and `h/2`. Returns the Hessian and the
/// largest relative disagreement between the two stencils.
pub fn richardson_hessian(
    f: &mut dyn FnMut(&[f64]) -> Result<C64>,
    d: usize,
    h: f64,
) -> Result<(Vec<Vec<C64>>, f64)> {
    let mut stencil = |h: f64| -> Result<Vec<Vec<C64>>> {
        let f0 = f(&vec![0.0; d])?;
        let mut out = vec![vec![C64::default(); d]; d];
        for i in 0..d {
            let mut kp = vec![0.0; d];
            kp[i] = h;
            let mut km = vec![0.0; d];
            km[i] = -h;
            out[i][i] = (f(&kp)? - f0 * 2.0 + f(&km)?) / (h * h);
            for j in 0..i {
                let mut s = C64::default();
                for (si, sj, sign) in [
                    (1.0, 1.0, 1.0),
                    (1.0, -1.0, -1.0),
                    (-1.0, 1.0, -1.0),
                    (-1.0, -1.0, 1.0),
                ] {
                    let mut k = vec![0.0; d];
                    k[i] = si * h;
                    k[j] = sj * h;
                    s += f(&k)? * sign;
                }
                out[i][j] = s / (4.0 * h * h);
                out[j][i] = out[i][j];
            }
        }
        Ok(out)
    };
    let a = stencil(h)?;
    let b = stencil(h / 2.0)?;
    let mut out = vec![vec![C64::default(); d]; d];
    let mut dis = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            out[i][j] = (b[i][j] * 4.0 - a[i][j]) / 3.0;
            dis = dis.max((a[i][j] - b[i][j]).norm() / out[i][j].norm().max(1e-12));
        }
    }
    Ok((out, dis))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let mut f =
            |x: &[f64]| Ok((x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2) + 0.5 * x[0] * x[1]);
        let m = nelder_mead(
            &mut f,
            &[1.0, 1.0],
            0.5,
            &[-2.0, -2.0],
            &[2.0, 2.0],
            1e-14,
            5000,
        )
        .unwrap();
        // Stationary point of the quadratic.
        let a = [[2.0, 0.5], [0.5, 4.0]];
        let b = [0.6, -0.4];
        let want = solve_real(&a.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), &b).unwrap();
        assert!((m.x[0] - want[0]).abs() < 1e-6 && (m.x[1] - want[1]).abs() < 1e-6);
    }

    #[test]
    fn newton_reaches_smooth_maximum() {
        let mut f = |x: &[f64]| Ok(x[0].cos() + 0.5 * (x[1] - 0.2).cos());
        let (x, _) = newton_maximize(&mut f, &[0.3, 0.5], 0.2, 0.5)
            .unwrap()
            .unwrap();
        assert!(x[0].abs() < 1e-8 && (x[1] - 0.2).abs() < 1e-8);
    }

    #[test]
    fn richardson_on_exponential() {
        let mut f = |k: &[f64]| Ok(C64::new((k[0] + 2.0 * k[1]).exp(), 0.0));
        let (h, _) = richardson_hessian(&mut f, 2, 1e-3).unwrap();
        assert!((h[0][1].re - 2.0).abs() < 1e-7 && (h[1][1].re - 4.0).abs() < 1e-7);
    }
}
