use nalgebra::DVector;

use super::{svec_len, ConeProgram};

/// Diagonal equilibration `x = D x̄`, `z̄ = E z`, objective times `c`.
/// `E` is constant across each PSD block so the cone is preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub d: DVector<f64>,
    pub e: DVector<f64>,
    pub c: f64,
}

impl Scaling {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            d: DVector::from_element(n, 1.0),
            e: DVector::from_element(m, 1.0),
            c: 1.0,
        }
    }

    pub fn scale_x(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_div(&self.d)
    }

    pub fn unscale_x(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.d)
    }

    pub fn scale_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_div(&self.e) * self.c
    }

    pub fn unscale_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_mul(&self.e) / self.c
    }

    pub fn scale_z(&self, z: &DVector<f64>) -> DVector<f64> {
        z.component_mul(&self.e)
    }

    pub fn unscale_z(&self, z: &DVector<f64>) -> DVector<f64> {
        z.component_div(&self.e)
    }
}

fn inv_sqrt_clamped(norm: f64) -> f64 {
    if norm == 0.0 {
        1.0
    } else {
        1.0 / norm.clamp(1e-4, 1e4).sqrt()
    }
}

/// Ruiz equilibration of the objective and constraint matrices followed by
/// a cost normalization.
pub fn scale_problem(prog: &ConeProgram, iters: usize) -> (ConeProgram, Scaling) {
    let n = prog.n;
    let m = prog.m();
    let mut sp = prog.clone();
    let mut sc = Scaling::identity(n, m);
    // columns touched by a PSD block share one factor per block
    let mut group = vec![usize::MAX; n];
    let mut n_groups = 0;
    {
        let mut off = prog.n_box();
        let mut row_block = vec![usize::MAX; m];
        for &d in &prog.psd_dims {
            let k = svec_len(d);
            row_block[off..off + k].iter_mut().for_each(|b| *b = n_groups);
            n_groups += 1;
            off += k;
        }
        for (i, j, _) in prog.a.triplet_iter() {
            if row_block[i] != usize::MAX && group[j] == usize::MAX {
                group[j] = row_block[i];
            }
        }
    }

    for _ in 0..iters {
        let mut col = vec![0.0f64; n];
        for (_, j, v) in sp.p.triplet_iter() {
            col[j] = col[j].max(v.abs());
        }
        let mut row = vec![0.0f64; m];
        for (i, j, v) in sp.a.triplet_iter() {
            col[j] = col[j].max(v.abs());
            row[i] = row[i].max(v.abs());
        }
        let mut gmax = vec![0.0f64; n_groups];
        for j in 0..n {
            if group[j] != usize::MAX {
                gmax[group[j]] = gmax[group[j]].max(col[j]);
            }
        }
        let delta: Vec<f64> = (0..n)
            .map(|j| inv_sqrt_clamped(if group[j] == usize::MAX { col[j] } else { gmax[group[j]] }))
            .collect();
        let mut eps: Vec<f64> = row.iter().map(|&r| inv_sqrt_clamped(r)).collect();
        let mut off = sp.n_box();
        for &d in &prog.psd_dims {
            let k = svec_len(d);
            let block_max = row[off..off + k].iter().fold(0.0f64, |a, &b| a.max(b));
            let e = inv_sqrt_clamped(block_max);
            eps[off..off + k].iter_mut().for_each(|x| *x = e);
            off += k;
        }
        for (i, j, v) in sp.p.triplet_iter_mut() {
            *v *= delta[i] * delta[j];
        }
        for (i, j, v) in sp.a.triplet_iter_mut() {
            *v *= eps[i] * delta[j];
        }
        for j in 0..n {
            sp.q[j] *= delta[j];
            sc.d[j] *= delta[j];
        }
        for i in 0..m {
            sc.e[i] *= eps[i];
        }
    }
    for i in 0..sp.n_box() {
        sp.l[i] = prog.l[i] * sc.e[i];
        sp.u[i] = prog.u[i] * sc.e[i];
    }

    let mut col = vec![0.0f64; n];
    for (_, j, v) in sp.p.triplet_iter() {
        col[j] = col[j].max(v.abs());
    }
    let mean = if n > 0 { col.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let qn = super::inf_norm(&sp.q);
    let scale = mean.max(qn);
    let c = if scale == 0.0 { 1.0 } else { (1.0 / scale).clamp(1e-4, 1e4) };
    for (_, _, v) in sp.p.triplet_iter_mut() {
        *v *= c;
    }
    sp.q *= c;
    sc.c = c;
    (sp, sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ProgramBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_program(rng: &mut ChaCha8Rng, spread: f64) -> ConeProgram {
        let mut b = ProgramBuilder::new();
        let v = b.add_vars(4);
        for i in v.clone() {
            b.add_quad(i, i, spread.powf(rng.gen::<f64>()));
            b.add_linear(i, rng.gen::<f64>() - 0.5);
        }
        for _ in 0..3 {
            let coeffs = v.clone().map(|j| (j, (rng.gen::<f64>() - 0.5) * spread.powf(rng.gen::<f64>()))).collect();
            b.add_box(coeffs, -1.0, 1.0);
        }
        b.add_psd_matrix(2);
        b.build()
    }

    #[test]
    fn equilibrated_program_scales_near_identity() {
        let mut b = ProgramBuilder::new();
        let v = b.add_vars(3);
        for i in v.clone() {
            b.add_quad(i, i, 1.0);
            b.add_linear(i, 1.0);
            b.add_box(vec![(i, 1.0)], -1.0, 1.0);
        }
        let (_, s) = scale_problem(&b.build(), 10);
        assert!(s.d.iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert!(s.e.iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert!((s.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unscale_inverts_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prog = random_program(&mut rng, 1e6);
        let (_, s) = scale_problem(&prog, 15);
        let x = DVector::from_fn(prog.n, |_, _| rng.gen::<f64>() * 10.0 - 5.0);
        let y = DVector::from_fn(prog.m(), |_, _| rng.gen::<f64>() * 10.0 - 5.0);
        let back_x = s.unscale_x(&s.scale_x(&x));
        let back_y = s.unscale_y(&s.scale_y(&y));
        let back_z = s.unscale_z(&s.scale_z(&y));
        for (a, b) in [(&x, &back_x), (&y, &back_y), (&y, &back_z)] {
            assert!((a - b).amax() <= 1e-14 * a.amax().max(1.0));
        }
    }

    #[test]
    fn psd_rows_share_one_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prog = random_program(&mut rng, 1e3);
        let (_, s) = scale_problem(&prog, 10);
        let tail = s.e.rows(prog.n_box(), 3);
        assert!(tail.iter().all(|&x| x == tail[0]));
    }

    #[test]
    fn psd_columns_share_one_factor() {
        let mut b = ProgramBuilder::new();
        let s = b.add_psd_matrix(3);
        let free = b.add_vars(1).start;
        b.add_box(vec![(s, 1e3), (free, 1.0)], 0.0, 1.0);
        b.add_box(vec![(s + 5, 1e-2)], 0.0, 1.0);
        b.add_quad(free, free, 50.0);
        let prog = b.build();
        let (_, sc) = scale_problem(&prog, 10);
        let block = sc.d.rows(s, 6);
        assert!(block.iter().all(|&x| x == block[0]));
        assert_ne!(sc.d[free], block[0]);
    }

    #[test]
    fn scaled_objective_is_c_times_original() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prog = random_program(&mut rng, 1e4);
        let (sp, s) = scale_problem(&prog, 10);
        let xb = DVector::from_fn(prog.n, |_, _| rng.gen::<f64>());
        let x = s.unscale_x(&xb);
        let f = prog.objective(&x);
        let fb = sp.objective(&xb);
        assert!((fb - s.c * f).abs() < 1e-9 * (1.0 + fb.abs()));
    }
}
