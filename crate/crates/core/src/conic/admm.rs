use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{inf_norm, mul, mul_t, scale_problem, smat, svec_len, ConeProgram};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmSettings {
    /// Tolerance on the normalized primal, dual and gap residuals.
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor.
    pub alpha: f64,
    pub scaling_iters: usize,
    pub adaptive_rho: bool,
    /// Iterations between convergence checks.
    pub check_every: usize,
    pub infeasibility_tol: f64,
    pub record_trace: bool,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50_000,
            rho: 1.0,
            sigma: 1e-6,
            alpha: 1.6,
            scaling_iters: 10,
            adaptive_rho: true,
            check_every: 5,
            infeasibility_tol: 1e-6,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverState {
    Optimal,
    Inaccurate,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStatus {
    pub state: SolverState,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub status: SolverStatus,
    /// Normalized infeasibility certificate: `δy` when infeasible, `δx`
    /// when unbounded.
    pub certificate: Option<DVector<f64>>,
    pub trace: Vec<TraceRow>,
}

/// KKT residuals at `(x, y)`, evaluated with `z = Π_C(Ax)`. Raw values are
/// infinity norms; the `_rel` fields are normalized by the magnitude of the
/// terms involved (floored at 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub primal_rel: f64,
    pub dual_rel: f64,
    pub gap_rel: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl Residuals {
    pub fn worst_rel(&self) -> f64 {
        self.primal_rel.max(self.dual_rel).max(self.gap_rel)
    }
}

pub fn residuals(prog: &ConeProgram, x: &DVector<f64>, y: &DVector<f64>) -> Residuals {
    let ax = mul(&prog.a, x);
    let mut z = ax.clone();
    prog.project(&mut z);
    let primal = inf_norm(&(&ax - &z));
    let px = mul(&prog.p, x);
    let aty = mul_t(&prog.a, y);
    let dual = inf_norm(&(&px + &prog.q + &aty));
    let primal_objective = 0.5 * x.dot(&px) + prog.q.dot(x);
    let dual_objective = -0.5 * x.dot(&px) - prog.support(y);
    let gap = (primal_objective - dual_objective).abs();
    let p_norm = 1f64.max(inf_norm(&ax));
    let d_norm = 1f64.max(inf_norm(&px)).max(inf_norm(&aty)).max(inf_norm(&prog.q));
    let o_norm = 1f64.max(primal_objective.abs()).max(dual_objective.abs());
    Residuals {
        primal,
        dual,
        gap,
        primal_rel: primal / p_norm,
        dual_rel: dual / d_norm,
        gap_rel: if gap.is_finite() { gap / o_norm } else { f64::INFINITY },
        primal_objective,
        dual_objective,
    }
}

pub fn write_trace(trace: &[TraceRow]) -> String {
    let mut s = String::from("iteration primal dual gap rho\n");
    for r in trace {
        writeln!(s, "{} {:.6e} {:.6e} {:.6e} {:.6e}", r.iteration, r.primal, r.dual, r.gap, r.rho).unwrap();
    }
    s
}

struct Kkt {
    chol: Cholesky<f64, nalgebra::Dyn>,
}

fn factor(sp: &ConeProgram, r: &[f64], sigma: f64) -> Kkt {
    let n = sp.n;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in sp.p.triplet_iter() {
        k[(i, j)] += *v;
    }
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    for (row_idx, row) in sp.a.row_iter().enumerate() {
        let ri = r[row_idx];
        let cols = row.col_indices();
        let vals = row.values();
        for (a, &ja) in cols.iter().enumerate() {
            for (b, &jb) in cols.iter().enumerate() {
                k[(ja, jb)] += ri * vals[a] * vals[b];
            }
        }
    }
    // sigma > 0 keeps this positive definite
    let chol = Cholesky::new(k).expect("regularized KKT matrix is positive definite");
    Kkt { chol }
}

fn rho_vector(sp: &ConeProgram, rho: f64) -> Vec<f64> {
    let mut r = vec![rho; sp.m()];
    for i in 0..sp.n_box() {
        if sp.l[i] == sp.u[i] {
            r[i] = 1e3 * rho;
        } else if sp.l[i].is_infinite() && sp.u[i].is_infinite() {
            r[i] = 1e-6;
        }
    }
    r
}

fn psd_blocks(prog: &ConeProgram) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut off = prog.n_box();
    prog.psd_dims.iter().map(move |&d| {
        let o = off;
        off += svec_len(d);
        (o, d)
    })
}

fn is_primal_certificate(prog: &ConeProgram, dy: &DVector<f64>, eps: f64) -> bool {
    let ny = inf_norm(dy);
    if ny < 1e-12 {
        return false;
    }
    if inf_norm(&mul_t(&prog.a, dy)) > eps * ny {
        return false;
    }
    let mut s = 0.0;
    for i in 0..prog.n_box() {
        let v = dy[i];
        if v > eps * ny {
            if prog.u[i].is_infinite() {
                return false;
            }
            s += v * prog.u[i];
        } else if v < -eps * ny {
            if prog.l[i].is_infinite() {
                return false;
            }
            s += v * prog.l[i];
        }
    }
    for (off, d) in psd_blocks(prog) {
        let m = smat(dy.rows(off, svec_len(d)).as_slice(), d);
        if SymmetricEigen::new(m).eigenvalues.max() > eps * ny {
            return false;
        }
    }
    s < -eps * ny
}

fn is_dual_certificate(prog: &ConeProgram, dx: &DVector<f64>, eps: f64) -> bool {
    let nx = inf_norm(dx);
    if nx < 1e-12 {
        return false;
    }
    if inf_norm(&mul(&prog.p, dx)) > eps * nx || prog.q.dot(dx) > -eps * nx {
        return false;
    }
    let adx = mul(&prog.a, dx);
    for i in 0..prog.n_box() {
        if prog.u[i].is_finite() && adx[i] > eps * nx {
            return false;
        }
        if prog.l[i].is_finite() && adx[i] < -eps * nx {
            return false;
        }
    }
    for (off, d) in psd_blocks(prog) {
        let m = smat(adx.rows(off, svec_len(d)).as_slice(), d);
        if SymmetricEigen::new(m).eigenvalues.min() < -eps * nx {
            return false;
        }
    }
    true
}

/// Operator-splitting solve (OSQP-style iteration with cone projections).
///
/// Iterates on the equilibrated program with a cached factorization of
/// `P + σI + A'RA`; `R` is diagonal with a stiffer weight on equality
/// rows. Convergence is judged on the unscaled program through
/// [`residuals`], so a reported optimum satisfies the tolerance as that
/// function computes it. The step size adapts deterministically from the
/// residual ratio.
pub fn solve_admm(prog: &ConeProgram, settings: &AdmmSettings) -> ConeSolution {
    let start = Instant::now();
    let (sp, sc) = scale_problem(prog, settings.scaling_iters);
    let n = sp.n;
    let m = sp.m();
    let mut rho = settings.rho;
    let mut r = rho_vector(&sp, rho);
    let mut kkt = factor(&sp, &r, settings.sigma);

    let mut x = DVector::<f64>::zeros(n);
    let mut z = DVector::<f64>::zeros(m);
    let mut y = DVector::<f64>::zeros(m);
    let mut trace = Vec::new();
    let alpha = settings.alpha;
    let sigma = settings.sigma;

    let mut last = residuals(prog, &sc.unscale_x(&x), &sc.unscale_y(&y));
    let mut state = SolverState::IterationLimit;
    let mut certificate = None;
    let mut iter = 0;

    while iter < settings.max_iter {
        iter += 1;
        let x_prev = x.clone();
        let y_prev = y.clone();

        let rz_y = DVector::from_fn(m, |i, _| r[i] * z[i] - y[i]);
        let rhs = &x * sigma - &sp.q + mul_t(&sp.a, &rz_y);
        let x_t = kkt.chol.solve(&rhs);
        let z_t = mul(&sp.a, &x_t);
        x = &x_t * alpha + &x_prev * (1.0 - alpha);
        let mut v = DVector::from_fn(m, |i, _| alpha * z_t[i] + (1.0 - alpha) * z[i] + y[i] / r[i]);
        let pre = v.clone();
        sp.project(&mut v);
        z = v;
        y = DVector::from_fn(m, |i, _| r[i] * (pre[i] - z[i]));

        if iter % settings.check_every != 0 && iter != settings.max_iter {
            continue;
        }
        let xu = sc.unscale_x(&x);
        let yu = sc.unscale_y(&y);
        last = residuals(prog, &xu, &yu);
        if settings.record_trace {
            trace.push(TraceRow {
                iteration: iter,
                primal: last.primal_rel,
                dual: last.dual_rel,
                gap: last.gap_rel,
                rho,
            });
        }
        if last.worst_rel() <= settings.tol {
            state = SolverState::Optimal;
            break;
        }
        let dy = sc.unscale_y(&(&y - &y_prev));
        if is_primal_certificate(prog, &dy, settings.infeasibility_tol) {
            state = SolverState::Infeasible;
            certificate = Some(&dy / inf_norm(&dy));
            break;
        }
        let dx = sc.unscale_x(&(&x - &x_prev));
        if is_dual_certificate(prog, &dx, settings.infeasibility_tol) {
            state = SolverState::Unbounded;
            certificate = Some(&dx / inf_norm(&dx));
            break;
        }
        if settings.adaptive_rho && iter % (10 * settings.check_every) == 0 {
            let ax = mul(&sp.a, &x);
            let px = mul(&sp.p, &x);
            let aty = mul_t(&sp.a, &y);
            let rp = inf_norm(&(&ax - &z)) / inf_norm(&ax).max(inf_norm(&z)).max(1e-10);
            let rd = inf_norm(&(&px + &sp.q + &aty))
                / inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&sp.q)).max(1e-10);
            let new_rho = (rho * (rp / rd.max(1e-20)).sqrt()).clamp(1e-6, 1e6);
            if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                rho = new_rho;
                r = rho_vector(&sp, rho);
                kkt = factor(&sp, &r, sigma);
            }
        }
    }

    if state == SolverState::IterationLimit && last.worst_rel() <= 1e3 * settings.tol {
        state = SolverState::Inaccurate;
    }
    ConeSolution {
        x: sc.unscale_x(&x),
        y: sc.unscale_y(&y),
        status: SolverStatus {
            state,
            primal_residual: last.primal_rel,
            dual_residual: last.dual_rel,
            gap: last.gap_rel,
            primal_objective: last.primal_objective,
            dual_objective: last.dual_objective,
            iterations: iter,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        certificate,
        trace,
    }
}
