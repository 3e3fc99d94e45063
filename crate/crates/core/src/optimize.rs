//! Small dense optimizers used by the fits: quasi-Newton minimization,
//! Levenberg–Marquardt least squares and bracketed scalar minimization.

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient.
pub fn numeric_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1.0);
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[r][k] -= factor * a[col][k];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        cols.push(solve_linear(a.to_vec(), e)?);
    }
    Some((0..n).map(|r| (0..n).map(|c| cols[c][r]).collect()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub rel_value_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            grad_tol: 1e-10,
            step_tol: 1e-9,
            rel_value_tol: 1e-12,
        }
    }
}

/// BFGS with Armijo backtracking on the inverse Hessian approximation.
///
/// Converges when the gradient is small, or when both the step and the
/// relative change of the objective are small.
pub fn bfgs(f: impl Fn(&[f64]) -> f64, grad: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], opts: &BfgsOptions) -> Minimum {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut h = identity(n);
    for it in 0..opts.max_iter {
        if norm(&g) < opts.grad_tol {
            return Minimum { x, value: fx, iterations: it, converged: true };
        }
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&d, &g);
        if slope >= 0.0 {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let fxn = f(&xn);
            if fxn.is_finite() && fxn <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fxn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            if h == identity(n) {
                return Minimum { x, value: fx, iterations: it, converged: norm(&g) < opts.grad_tol.sqrt() };
            }
            h = identity(n);
            continue;
        };
        let gn = grad(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step = norm(&s);
        let rel_change = (fx - fxn).abs() / fx.abs().max(1.0);
        let xnorm = norm(&xn).max(1.0);
        x = xn;
        fx = fxn;
        g = gn;
        if step < opts.step_tol * xnorm && rel_change < opts.rel_value_tol {
            return Minimum { x, value: fx, iterations: it + 1, converged: true };
        }
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }
    Minimum { x, value: fx, iterations: opts.max_iter, converged: false }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    pub step_tol: f64,
    pub grad_tol: f64,
    pub jacobian_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            step_tol: 1e-10,
            grad_tol: 1e-10,
            jacobian_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `JᵀJ` at the solution, for covariance estimates.
    pub normal_matrix: Vec<Vec<f64>>,
}

pub fn numeric_jacobian(r: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], rel_step: f64) -> Vec<Vec<f64>> {
    let mut xp = x.to_vec();
    let cols: Vec<Vec<f64>> = (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1.0);
            let orig = xp[i];
            xp[i] = orig + h;
            let rp = r(&xp);
            xp[i] = orig - h;
            let rm = r(&xp);
            xp[i] = orig;
            rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    let m = cols.first().map_or(0, |c| c.len());
    (0..m).map(|k| cols.iter().map(|c| c[k]).collect()).collect()
}

/// Levenberg–Marquardt with Marquardt diagonal scaling and a numeric
/// Jacobian. Converges when both the step and the gradient `Jᵀr` are below
/// their tolerances.
pub fn levenberg_marquardt(r: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], opts: &LmOptions) -> LeastSquares {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut res = r(&x);
    let mut cost = dot(&res, &res);
    let mut lambda = 1e-3;
    let mut jtj = vec![vec![0.0; n]; n];
    for it in 0..opts.max_iter {
        let j = numeric_jacobian(&r, &x, opts.jacobian_step);
        jtj = (0..n).map(|a| (0..n).map(|b| j.iter().map(|row| row[a] * row[b]).sum()).collect()).collect();
        let jtr: Vec<f64> = (0..n).map(|a| j.iter().zip(&res).map(|(row, ri)| row[a] * ri).sum()).collect();
        let gnorm = jtr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm < opts.grad_tol || cost == 0.0 {
            return LeastSquares { x, cost, iterations: it, converged: true, normal_matrix: jtj };
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[k][k] += lambda * jtj[k][k].max(1e-12);
            }
            let neg: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve_linear(a, neg) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let rn = r(&xn);
            let cn = dot(&rn, &rn);
            if cn.is_finite() && cn <= cost {
                let small_step = norm(&step) < opts.step_tol * norm(&x).max(1.0);
                x = xn;
                res = rn;
                cost = cn;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if small_step {
                    let j = numeric_jacobian(&r, &x, opts.jacobian_step);
                    let g = (0..n).map(|a| j.iter().zip(&res).map(|(row, ri)| row[a] * ri).sum::<f64>().abs()).fold(0.0, f64::max);
                    if g < opts.grad_tol.sqrt() {
                        let jtj = (0..n).map(|a| (0..n).map(|b| j.iter().map(|row| row[a] * row[b]).sum()).collect()).collect();
                        return LeastSquares { x, cost, iterations: it + 1, converged: true, normal_matrix: jtj };
                    }
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return LeastSquares { x, cost, iterations: it, converged: gnorm < opts.grad_tol.sqrt(), normal_matrix: jtj };
        }
    }
    LeastSquares { x, cost, iterations: opts.max_iter, converged: false, normal_matrix: jtj }
}

/// Brent's method for a minimum of `f` on `[a, b]`.
pub fn brent_minimize(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = if a < b { (a, b) } else { (b, a) };
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
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
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
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
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn bfgs_rosenbrock() {
        let m = bfgs(rosenbrock, |x| numeric_gradient(&rosenbrock, x, 1e-7), &[-1.2, 1.0], &BfgsOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m);
    }

    #[test]
    fn lm_exponential_fit() {
        let t: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-t / 1.7).exp() + 0.1).collect();
        let fit = levenberg_marquardt(|p| t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() + p[2] - y).collect(), &[1.0, 1.0, 0.0], &LmOptions::default());
        assert!(fit.converged);
        assert!((fit.x[0] - 2.5).abs() < 1e-8 && (fit.x[1] - 1.7).abs() < 1e-8 && (fit.x[2] - 0.1).abs() < 1e-8, "{:?}", fit.x);
    }

    #[test]
    fn brent_parabola_and_cosine() {
        let (x, _) = brent_minimize(|x| (x - 0.3).powi(2), -1.0, 2.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-8);
        let (x, fx) = brent_minimize(f64::cos, 2.0, 4.0, 1e-12, 200);
        assert!((x - std::f64::consts::PI).abs() < 1e-7 && (fx + 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_solve_and_inverse() {
        let a = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]];
        let x = solve_linear(a.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        for r in 0..3 {
            let lhs: f64 = (0..3).map(|c| a[r][c] * x[c]).sum();
            assert!((lhs - [1.0, 2.0, 3.0][r]).abs() < 1e-14);
        }
        let inv = invert(&a).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let v: f64 = (0..3).map(|k| a[r][k] * inv[k][c]).sum();
                assert!((v - if r == c { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(solve_linear(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }
}
