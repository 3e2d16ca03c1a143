//! Small numerical optimisation toolkit: Brent's 1-D search, BFGS with
//! finite-difference gradients, central-difference Hessians and a Cholesky
//! inverse for the handful-of-parameters matrices the fits need.

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Result of a 1-D minimisation.
#[derive(Debug, Clone, Copy)]
pub struct Minimum1d {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Brent's method (golden section with parabolic steps) on `[a, b]`.
///
/// Stops when the bracket half-width falls below `tol` (absolute, in `x`).
pub fn brent_minimize<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> Minimum1d {
    let (mut a, mut b) = if a < b { (a, b) } else { (b, a) };
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol + 1e-15 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Minimum1d {
                x,
                fx,
                iterations: iter,
                converged: true,
            };
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum1d {
        x,
        fx,
        iterations: max_iter,
        converged: false,
    }
}

/// Central-difference gradient with per-coordinate step `h * (1 + |x_i|)`.
pub fn gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * (1.0 + x[i].abs());
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Central-difference Hessian with a fixed absolute step on every coordinate.
pub fn hessian<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let k = x.len();
    let f0 = f(x);
    let mut probe = x.to_vec();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        out[i][i] = (up - 2.0 * f0 + down) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                probe[i] = x[i] + si * h;
                probe[j] = x[j] + sj * h;
                let v = f(&probe);
                probe[i] = x[i];
                probe[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h * h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Richardson extrapolation of [`hessian`] from steps `h` and `2h`, which
/// cancels the leading truncation term and so tolerates a larger `h`.
pub fn hessian_richardson<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let fine = hessian(f, x, h);
    let coarse = hessian(f, x, 2.0 * h);
    fine.iter()
        .zip(&coarse)
        .map(|(a, b)| a.iter().zip(b).map(|(a, b)| (4.0 * a - b) / 3.0).collect())
        .collect()
}

/// Inverse of a symmetric positive-definite matrix, or `None` if the
/// Cholesky factorisation breaks down.
#[allow(clippy::needless_range_loop)]
pub fn spd_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = a.len();
    let mut l = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|p| l[i][p] * l[j][p]).sum::<f64>();
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // Invert L column by column, then form L^-T L^-1.
    let mut linv = vec![vec![0.0; k]; k];
    for c in 0..k {
        for i in c..k {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = rhs - (c..i).map(|p| l[i][p] * linv[p][c]).sum::<f64>();
            linv[i][c] = s / l[i][i];
        }
    }
    let mut inv = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            inv[i][j] = (i.max(j)..k).map(|p| linv[p][i] * linv[p][j]).sum();
        }
    }
    Some(inv)
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the gradient.
    pub grad_tol: f64,
    /// Relative finite-difference step for the gradient.
    pub grad_step: f64,
    /// Cap on the length of a single step in parameter space.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 500,
            grad_tol: 1e-6,
            grad_step: 1e-6,
            max_step: 4.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Quasi-Newton minimisation with an inverse-Hessian BFGS update and
/// backtracking Armijo line search. Non-finite objective values are treated
/// as `+inf`, so the search backs away from them.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum {
    let k = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let identity = || {
        let mut h = vec![vec![0.0; k]; k];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        h
    };

    let mut x = x0.to_vec();
    let mut fx = eval(&x);
    if !fx.is_finite() {
        return Minimum {
            x,
            fx,
            iterations: 0,
            converged: false,
        };
    }
    let mut g = gradient(&mut eval, &x, opts.grad_step);
    let mut hinv = identity();
    let mut fresh = true;

    for iter in 0..opts.max_iter {
        if sup_norm(&g) < opts.grad_tol {
            return Minimum {
                x,
                fx,
                iterations: iter,
                converged: true,
            };
        }
        let mut dir: Vec<f64> = (0..k).map(|i| -dot(&hinv[i], &g)).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            hinv = identity();
            fresh = true;
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }
        let len = dot(&dir, &dir).sqrt();
        let mut t = if len > opts.max_step {
            opts.max_step / len
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            let fc = eval(&cand);
            if fc <= fx + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            if !fresh {
                hinv = identity();
                fresh = true;
                continue;
            }
            // No descent possible along -g: we sit at the numerical floor.
            return Minimum {
                x,
                fx,
                iterations: iter,
                converged: sup_norm(&g) < opts.grad_tol.sqrt(),
            };
        };

        let gn = gradient(&mut eval, &xn, opts.grad_step);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                for (i, row) in hinv.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = scale;
                }
                fresh = false;
            }
            let hy: Vec<f64> = (0..k).map(|i| dot(&hinv[i], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..k {
                for j in 0..k {
                    hinv[i][j] +=
                        rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let small_change = (fx - fxn).abs() <= 1e-15 * (1.0 + fx.abs());
        x = xn;
        fx = fxn;
        g = gn;
        if small_change && sup_norm(&g) < opts.grad_tol.sqrt() {
            return Minimum {
                x,
                fx,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    let converged = sup_norm(&g) < opts.grad_tol;
    Minimum {
        x,
        fx,
        iterations: opts.max_iter,
        converged,
    }
}
