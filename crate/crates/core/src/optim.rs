//! Limited-memory quasi-Newton minimization with simple bounds (L-BFGS-B).
//!
//! Each iteration finds the generalized Cauchy point of the quadratic model along the projected
//! steepest-descent path, minimizes the model over the variables that are still free, and runs a
//! strong-Wolfe line search along the resulting feasible direction. The quasi-Newton matrix is
//! kept in compact form `B = θI − W M Wᵀ`. Without finite bounds the method reduces to L-BFGS.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LbfgsbOptions {
    /// Number of stored correction pairs.
    pub memory: usize,
    pub max_iter: usize,
    pub max_evals: usize,
    /// Stop when the infinity norm of the projected gradient falls below this value.
    pub pgtol: f64,
    /// Stop when the relative decrease of the objective falls below `factr * f64::EPSILON`.
    pub factr: f64,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        Self { memory: 10, max_iter: 5000, max_evals: 20000, pgtol: 1e-6, factr: 1e7 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Termination {
    ProjectedGradient,
    RelativeReduction,
}

#[derive(Clone, Debug)]
pub struct OptimResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub projected_grad_norm: f64,
    pub termination: Termination,
    /// Objective value after each accepted iteration.
    pub trace: Vec<f64>,
}

/// Infinity norm of the projected gradient.
pub fn projected_gradient_norm(x: &DVector<f64>, g: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> f64 {
    let mut out = 0.0f64;
    for i in 0..x.len() {
        let pg = if g[i] < 0.0 { (x[i] - upper[i]).max(g[i]) } else { (x[i] - lower[i]).min(g[i]) };
        out = out.max(pg.abs());
    }
    out
}

/// Correction pairs and the derived compact representation.
struct Memory {
    s: Vec<DVector<f64>>,
    y: Vec<DVector<f64>>,
    cap: usize,
    theta: f64,
    /// `W = [Y, θS]`, `n × 2k`.
    w: DMatrix<f64>,
    /// Middle matrix `M`, `2k × 2k`.
    m: DMatrix<f64>,
}

impl Memory {
    fn new(n: usize, cap: usize) -> Self {
        Self { s: Vec::new(), y: Vec::new(), cap, theta: 1.0, w: DMatrix::zeros(n, 0), m: DMatrix::zeros(0, 0) }
    }

    fn len(&self) -> usize {
        self.s.len()
    }

    fn reset(&mut self) {
        let n = self.w.nrows();
        self.s.clear();
        self.y.clear();
        self.theta = 1.0;
        self.w = DMatrix::zeros(n, 0);
        self.m = DMatrix::zeros(0, 0);
    }

    fn push(&mut self, s: DVector<f64>, y: DVector<f64>) -> bool {
        let sy = s.dot(&y);
        let yy = y.norm_squared();
        if !(sy > f64::EPSILON * yy) {
            return false;
        }
        if self.s.len() == self.cap {
            self.s.remove(0);
            self.y.remove(0);
        }
        self.theta = yy / sy;
        self.s.push(s);
        self.y.push(y);
        if self.rebuild().is_err() {
            self.reset();
        }
        true
    }

    fn rebuild(&mut self) -> Result<()> {
        let k = self.len();
        let n = self.w.nrows();
        let mut w = DMatrix::zeros(n, 2 * k);
        for j in 0..k {
            w.set_column(j, &self.y[j]);
            w.set_column(k + j, &(&self.s[j] * self.theta));
        }
        let mut inv = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            inv[(i, i)] = -self.s[i].dot(&self.y[i]);
            for j in 0..k {
                if i > j {
                    let l = self.s[i].dot(&self.y[j]);
                    inv[(k + i, j)] = l;
                    inv[(j, k + i)] = l;
                }
                inv[(k + i, k + j)] = self.theta * self.s[i].dot(&self.s[j]);
            }
        }
        let m = inv.try_inverse().ok_or_else(|| Error::numerical("singular limited-memory middle matrix"))?;
        self.w = w;
        self.m = m;
        Ok(())
    }
}

/// Generalized Cauchy point; returns `(x_cp, c)` with `c = Wᵀ(x_cp − x)`.
fn cauchy_point(
    x: &DVector<f64>,
    g: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    mem: &Memory,
) -> (DVector<f64>, DVector<f64>) {
    let n = x.len();
    let theta = mem.theta;
    let mut t = vec![f64::INFINITY; n];
    let mut d = DVector::zeros(n);
    for i in 0..n {
        if g[i] < 0.0 && upper[i].is_finite() {
            t[i] = (x[i] - upper[i]) / g[i];
        } else if g[i] > 0.0 && lower[i].is_finite() {
            t[i] = (x[i] - lower[i]) / g[i];
        }
        d[i] = if t[i] <= 0.0 { 0.0 } else { -g[i] };
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| t[i] > 0.0 && t[i].is_finite()).collect();
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));

    let mut p = mem.w.tr_mul(&d);
    let mut c = DVector::zeros(p.len());
    let mut fp = -d.norm_squared();
    let mut fpp = -theta * fp - p.dot(&(&mem.m * &p));
    let fpp0 = fpp.abs().max(f64::MIN_POSITIVE);
    fpp = fpp.max(f64::EPSILON * fpp0);
    let mut dt_min = -fp / fpp;
    let mut t_old = 0.0;
    let mut xcp = x.clone();
    let mut pinned = vec![false; n];
    for i in 0..n {
        if t[i] <= 0.0 {
            pinned[i] = true;
        }
    }
    for &b in &order {
        let dt = t[b] - t_old;
        if dt_min < dt {
            break;
        }
        let bound = if d[b] > 0.0 { upper[b] } else { lower[b] };
        let zb = bound - x[b];
        xcp[b] = bound;
        pinned[b] = true;
        c += &p * dt;
        let gb = g[b];
        let wb = mem.w.row(b).transpose();
        let mwb = &mem.m * &wb;
        fp += dt * fpp + gb * gb + theta * gb * zb - gb * mwb.dot(&c);
        fpp += -theta * gb * gb - 2.0 * gb * mwb.dot(&p) - gb * gb * mwb.dot(&wb);
        fpp = fpp.max(f64::EPSILON * fpp0);
        p += wb * gb;
        d[b] = 0.0;
        dt_min = -fp / fpp;
        t_old = t[b];
    }
    let dt_min = dt_min.max(0.0);
    let t_final = t_old + dt_min;
    for i in 0..n {
        if !pinned[i] {
            xcp[i] = x[i] + t_final * d[i];
        }
    }
    c += &p * dt_min;
    (xcp, c)
}

/// Minimizes the quadratic model over the variables free at the Cauchy point.
fn subspace_min(
    x: &DVector<f64>,
    g: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    xcp: &DVector<f64>,
    c: &DVector<f64>,
    mem: &Memory,
) -> DVector<f64> {
    let free: Vec<usize> = (0..x.len()).filter(|&i| xcp[i] > lower[i] && xcp[i] < upper[i]).collect();
    if free.is_empty() {
        return xcp.clone();
    }
    let theta = mem.theta;
    let mc = &mem.m * c;
    let mut r = DVector::from_iterator(
        free.len(),
        free.iter().map(|&i| g[i] + theta * (xcp[i] - x[i]) - mem.w.row(i).transpose().dot(&mc)),
    );
    let du = if mem.len() == 0 {
        r /= -theta;
        r
    } else {
        let wz = mem.w.select_rows(&free);
        let v = &mem.m * wz.tr_mul(&r);
        let k2 = mem.m.nrows();
        let nmat = DMatrix::identity(k2, k2) - (&mem.m * wz.tr_mul(&wz)) / theta;
        match nmat.lu().solve(&v) {
            Some(v) => -(&r / theta) - (&wz * v) / (theta * theta),
            None => -(&r / theta),
        }
    };
    // Projected full step first; the backtracked step stalls when many bounds are nearly active.
    let mut xbar = xcp.clone();
    for (k, &i) in free.iter().enumerate() {
        xbar[i] = xcp[i] + du[k];
    }
    project(&mut xbar, lower, upper);
    if g.dot(&(&xbar - x)) < 0.0 {
        return xbar;
    }
    let mut alpha = 1.0f64;
    for (k, &i) in free.iter().enumerate() {
        if du[k] > 0.0 && upper[i].is_finite() {
            alpha = alpha.min((upper[i] - xcp[i]) / du[k]);
        } else if du[k] < 0.0 && lower[i].is_finite() {
            alpha = alpha.min((lower[i] - xcp[i]) / du[k]);
        }
    }
    let mut xbar = xcp.clone();
    for (k, &i) in free.iter().enumerate() {
        xbar[i] = xcp[i] + alpha * du[k];
    }
    project(&mut xbar, lower, upper);
    xbar
}

fn max_feasible_step(x: &DVector<f64>, d: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> f64 {
    let mut out = f64::INFINITY;
    for i in 0..x.len() {
        if d[i] > 0.0 && upper[i].is_finite() {
            out = out.min((upper[i] - x[i]) / d[i]);
        } else if d[i] < 0.0 && lower[i].is_finite() {
            out = out.min((lower[i] - x[i]) / d[i]);
        }
    }
    out.max(0.0)
}

fn project(x: &mut DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

struct Evaluator<'a, F> {
    f: &'a mut F,
    count: usize,
    max: usize,
}

impl<F> Evaluator<'_, F>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    fn eval(&mut self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.count += 1;
        let (v, g) = (self.f)(x)?;
        if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical("objective or gradient is not finite"));
        }
        Ok((v, g))
    }
}

struct LineSearchOutcome {
    step: f64,
    x: DVector<f64>,
    value: f64,
    grad: DVector<f64>,
}

/// Strong-Wolfe line search on `[0, step_max]` by bracketing and safeguarded interpolation.
#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    ev: &mut Evaluator<'_, F>,
    x: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    d: &DVector<f64>,
    step0: f64,
    step_max: f64,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<Option<LineSearchOutcome>>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let dg0 = g0.dot(d);
    let at = |step: f64, ev: &mut Evaluator<'_, F>| -> Result<(DVector<f64>, f64, DVector<f64>, f64)> {
        let mut xn = x + d * step;
        project(&mut xn, lower, upper);
        match ev.eval(&xn) {
            Ok((v, g)) => {
                let dg = g.dot(d);
                Ok((xn, v, g, dg))
            }
            Err(Error::Numerical(_)) | Err(Error::Support(_)) => Ok((xn, f64::INFINITY, g0.clone(), f64::NAN)),
            Err(e) => Err(e),
        }
    };
    let mut lo = (0.0, f0, dg0);
    let mut hi: Option<(f64, f64, f64)> = None;
    let mut step = step0.min(step_max);
    let mut best: Option<LineSearchOutcome> = None;
    for _ in 0..40 {
        let (xn, v, g, dg) = at(step, ev)?;
        if v.is_finite() && v <= f0 + C1 * step * dg0 {
            if best.as_ref().map_or(true, |b| v < b.value) {
                best = Some(LineSearchOutcome { step, x: xn.clone(), value: v, grad: g.clone() });
            }
        }
        if !v.is_finite() || v > f0 + C1 * step * dg0 || (hi.is_none() && lo.0 > 0.0 && v >= lo.1) {
            hi = Some((step, v, dg));
        } else {
            if dg.abs() <= -C2 * dg0 {
                return Ok(Some(LineSearchOutcome { step, x: xn, value: v, grad: g }));
            }
            if dg >= 0.0 {
                hi = Some(lo);
                lo = (step, v, dg);
            } else {
                lo = (step, v, dg);
                if hi.is_none() {
                    if step >= step_max {
                        return Ok(best);
                    }
                    step = (step * 4.0).min(step_max);
                    continue;
                }
            }
        }
        let (a, b) = (lo.0, hi.unwrap().0);
        let (fa, da) = (lo.1, lo.2);
        let fb = hi.unwrap().1;
        // quadratic interpolation from (a, fa, da) and (b, fb), safeguarded to the interior
        let h = b - a;
        let mut trial = if fb.is_finite() {
            let denom = 2.0 * (fb - fa - da * h);
            if denom > 0.0 { a - da * h * h / denom } else { a + 0.5 * h }
        } else {
            a + 0.1 * h
        };
        let (mn, mx) = if a < b { (a, b) } else { (b, a) };
        let margin = 0.1 * (mx - mn);
        trial = trial.clamp(mn + margin, mx - margin);
        if (mx - mn) < 1e-16 * mx.max(1.0) {
            return Ok(best);
        }
        step = trial;
    }
    Ok(best)
}

/// Minimizes `f` subject to `lower ≤ x ≤ upper` (entries may be infinite).
pub fn minimize_bounded<F>(
    mut f: F,
    x0: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    opts: &LbfgsbOptions,
) -> Result<OptimResult>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::shape("bounds must match the starting point"));
    }
    if (0..n).any(|i| lower[i] > upper[i]) {
        return Err(Error::arg("lower bound exceeds upper bound"));
    }
    let mut x = x0.clone();
    project(&mut x, lower, upper);
    let mut ev = Evaluator { f: &mut f, count: 0, max: opts.max_evals };
    let (mut fx, mut g) = ev.eval(&x)?;
    let mut mem = Memory::new(n, opts.memory);
    let mut trace = vec![fx];
    let mut pg = projected_gradient_norm(&x, &g, lower, upper);
    if pg <= opts.pgtol {
        return Ok(OptimResult {
            x,
            value: fx,
            grad: g,
            iterations: 0,
            evaluations: ev.count,
            projected_grad_norm: pg,
            termination: Termination::ProjectedGradient,
            trace,
        });
    }
    for iter in 1..=opts.max_iter {
        let (xcp, c) = cauchy_point(&x, &g, lower, upper, &mem);
        let xbar = subspace_min(&x, &g, lower, upper, &xcp, &c, &mem);
        let mut d = &xbar - &x;
        if g.dot(&d) >= 0.0 {
            d = &xcp - &x;
        }
        if g.dot(&d) >= 0.0 {
            mem.reset();
            let (xcp, _) = cauchy_point(&x, &g, lower, upper, &mem);
            d = &xcp - &x;
        }
        if g.dot(&d) >= 0.0 || d.amax() == 0.0 {
            return Err(Error::Optim {
                message: format!("no descent direction at iteration {iter}, projected gradient {pg:e}"),
                trace,
            });
        }
        let step_max = max_feasible_step(&x, &d, lower, upper);
        let step0 = if mem.len() == 0 { (1.0 / d.norm()).min(1.0).min(step_max) } else { 1.0f64.min(step_max) };
        let outcome = line_search(&mut ev, &x, fx, &g, &d, step0, step_max, lower, upper)?;
        let Some(out) = outcome else {
            if mem.len() > 0 {
                log::debug!("line search failed at iteration {iter}; discarding curvature pairs");
                mem.reset();
                continue;
            }
            return Err(Error::Optim { message: format!("line search failed at iteration {iter}"), trace });
        };
        if ev.count > ev.max {
            return Err(Error::Optim { message: format!("exceeded {} function evaluations", ev.max), trace });
        }
        let s = &out.x - &x;
        let y = &out.grad - &g;
        mem.push(s, y);
        let f_old = fx;
        x = out.x;
        fx = out.value;
        g = out.grad;
        trace.push(fx);
        pg = projected_gradient_norm(&x, &g, lower, upper);
        log::trace!("iter {iter}: f = {fx:.12e}, |pg| = {pg:.3e}, step = {:.3e}", out.step);
        if pg <= opts.pgtol {
            return Ok(OptimResult {
                x,
                value: fx,
                grad: g,
                iterations: iter,
                evaluations: ev.count,
                projected_grad_norm: pg,
                termination: Termination::ProjectedGradient,
                trace,
            });
        }
        if (f_old - fx) <= opts.factr * f64::EPSILON * f_old.abs().max(fx.abs()).max(1.0) {
            return Ok(OptimResult {
                x,
                value: fx,
                grad: g,
                iterations: iter,
                evaluations: ev.count,
                projected_grad_norm: pg,
                termination: Termination::RelativeReduction,
                trace,
            });
        }
    }
    Err(Error::Optim { message: format!("no convergence after {} iterations (|pg| = {pg:e})", opts.max_iter), trace })
}

/// Unconstrained L-BFGS minimization.
pub fn minimize<F>(f: F, x0: &DVector<f64>, opts: &LbfgsbOptions) -> Result<OptimResult>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let n = x0.len();
    minimize_bounded(
        f,
        x0,
        &DVector::from_element(n, f64::NEG_INFINITY),
        &DVector::from_element(n, f64::INFINITY),
        opts,
    )
}
