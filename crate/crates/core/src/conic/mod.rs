//! Quadratic-objective conic programs over boxes and PSD cones, solved by
//! an operator-splitting (ADMM) method.
//!
//! Problem form: minimize `0.5 x'Px + q'x` subject to `Ax = z`, `z ∈ C`,
//! where the first `n_box` rows of `A` carry interval bounds `[l, u]`
//! (equalities when `l == u`) and the remaining rows are grouped into PSD
//! blocks in scaled lower-triangular vectorization (svec).

mod admm;
mod psd;
mod scaling;

pub use admm::{residuals, solve_admm, write_trace, AdmmSettings, ConeSolution, Residuals, SolverState, SolverStatus, TraceRow};
pub use psd::{project_psd, smat, svec, svec_index, svec_len};
pub use scaling::{scale_problem, Scaling};

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub n: usize,
    /// Symmetric, both triangles stored.
    pub p: CsrMatrix<f64>,
    pub q: DVector<f64>,
    pub a: CsrMatrix<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub psd_dims: Vec<usize>,
}

impl ConeProgram {
    pub fn n_box(&self) -> usize {
        self.l.len()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let m_psd: usize = self.psd_dims.iter().map(|&d| svec_len(d)).sum();
        if self.p.nrows() != self.n || self.p.ncols() != self.n || self.q.len() != self.n {
            return Err(Error::Dimension("objective does not match variable count".into()));
        }
        if self.a.ncols() != self.n || self.a.nrows() != self.l.len() + m_psd {
            return Err(Error::Dimension("constraint matrix does not match cones".into()));
        }
        if self.u.len() != self.l.len() {
            return Err(Error::Dimension("box bounds differ in length".into()));
        }
        for (i, j, v) in self.p.triplet_iter() {
            let w = self.p.get_entry(j, i).map(|e| e.into_value()).unwrap_or(0.0);
            if (w - v).abs() > 1e-12 * (1.0 + v.abs()) {
                return Err(Error::Dimension("objective matrix is not symmetric".into()));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let px = mul(&self.p, x);
        0.5 * x.dot(&px) + self.q.dot(x)
    }

    /// Euclidean projection onto the cone product.
    pub fn project(&self, z: &mut DVector<f64>) {
        for i in 0..self.n_box() {
            z[i] = z[i].clamp(self.l[i], self.u[i]);
        }
        let mut off = self.n_box();
        for &d in &self.psd_dims {
            let k = svec_len(d);
            let block = z.rows(off, k).into_owned();
            let proj = svec(&project_psd(&smat(block.as_slice(), d)));
            z.rows_mut(off, k).copy_from(&proj);
            off += k;
        }
    }

    /// Support function of the cone product at `y`; `+inf` when `y` has
    /// weight on an unbounded direction.
    pub fn support(&self, y: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n_box() {
            let yi = y[i];
            if yi > 0.0 {
                if self.u[i].is_infinite() {
                    return f64::INFINITY;
                }
                s += yi * self.u[i];
            } else if yi < 0.0 {
                if self.l[i].is_infinite() {
                    return f64::INFINITY;
                }
                s += yi * self.l[i];
            }
        }
        // the PSD part contributes zero on its polar cone, where the
        // iterates live by construction
        s
    }
}

pub(crate) fn mul(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        let mut s = 0.0;
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            s += v * x[j];
        }
        out[i] = s;
    }
    out
}

pub(crate) fn mul_t(a: &CsrMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.ncols());
    for (i, row) in a.row_iter().enumerate() {
        let yi = y[i];
        if yi == 0.0 {
            continue;
        }
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            out[j] += v * yi;
        }
    }
    out
}

pub(crate) fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Incremental construction of a [`ConeProgram`]. Box rows keep the index
/// returned by [`ProgramBuilder::add_box`]; PSD rows are appended after
/// them at build time.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    n: usize,
    p: Vec<(usize, usize, f64)>,
    q: Vec<f64>,
    box_rows: Vec<Vec<(usize, f64)>>,
    l: Vec<f64>,
    u: Vec<f64>,
    psd: Vec<(usize, Vec<Vec<(usize, f64)>>)>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn n_box(&self) -> usize {
        self.l.len()
    }

    pub fn add_vars(&mut self, k: usize) -> std::ops::Range<usize> {
        let start = self.n;
        self.n += k;
        self.q.resize(self.n, 0.0);
        start..self.n
    }

    /// Adds `v` to `P_ij` and `P_ji` (once for `i == j`).
    pub fn add_quad(&mut self, i: usize, j: usize, v: f64) {
        self.p.push((i, j, v));
        if i != j {
            self.p.push((j, i, v));
        }
    }

    pub fn add_linear(&mut self, i: usize, v: f64) {
        self.q[i] += v;
    }

    pub fn add_box(&mut self, coeffs: Vec<(usize, f64)>, l: f64, u: f64) -> usize {
        self.box_rows.push(coeffs);
        self.l.push(l);
        self.u.push(u);
        self.l.len() - 1
    }

    /// PSD constraint on an affine image: row `k` of `rows` gives svec
    /// entry `k` of the constrained matrix.
    pub fn add_psd(&mut self, dim: usize, rows: Vec<Vec<(usize, f64)>>) -> usize {
        assert_eq!(rows.len(), svec_len(dim));
        self.psd.push((dim, rows));
        self.psd.len() - 1
    }

    /// New symmetric matrix variable constrained PSD; returns the index of
    /// its first variable. Entry `(i, j)`, `i >= j`, is variable
    /// `start + svec_index(dim, i, j)` and holds the plain matrix entry.
    pub fn add_psd_matrix(&mut self, dim: usize) -> usize {
        let vars = self.add_vars(svec_len(dim));
        let mut rows = Vec::with_capacity(vars.len());
        for j in 0..dim {
            for i in j..dim {
                let w = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                rows.push(vec![(vars.start + svec_index(dim, i, j), w)]);
            }
        }
        self.add_psd(dim, rows);
        vars.start
    }

    pub fn build(self) -> ConeProgram {
        let n = self.n;
        let mut pc = CooMatrix::new(n, n);
        for (i, j, v) in self.p {
            pc.push(i, j, v);
        }
        let m_psd: usize = self.psd.iter().map(|(d, _)| svec_len(*d)).sum();
        let m = self.box_rows.len() + m_psd;
        let mut ac = CooMatrix::new(m, n);
        for (r, row) in self.box_rows.iter().enumerate() {
            for &(j, v) in row {
                ac.push(r, j, v);
            }
        }
        let mut r = self.box_rows.len();
        let mut psd_dims = Vec::new();
        for (d, rows) in &self.psd {
            psd_dims.push(*d);
            for row in rows {
                for &(j, v) in row {
                    ac.push(r, j, v);
                }
                r += 1;
            }
        }
        ConeProgram {
            n,
            p: CsrMatrix::from(&pc),
            q: DVector::from_vec(self.q),
            a: CsrMatrix::from(&ac),
            l: self.l,
            u: self.u,
            psd_dims,
        }
    }
}
