use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::AdmittanceMatrix;

/// Schur complement of `y` onto `retained`: `Y_rr - Y_re Y_ee^-1 Y_er`,
/// with every other node eliminated. Retained nodes keep the given order.
pub fn kron_reduce(y: &DMatrix<Complex64>, retained: &[usize]) -> Result<DMatrix<Complex64>> {
    let n = y.nrows();
    if retained.is_empty() {
        return Err(Error::Domain("nothing to retain".into()));
    }
    if retained.iter().any(|&r| r >= n) {
        return Err(Error::Domain("retained node out of range".into()));
    }
    let elim: Vec<usize> = (0..n).filter(|i| !retained.contains(i)).collect();
    let rr = y.select_rows(retained).select_columns(retained);
    if elim.is_empty() {
        return Ok(rr);
    }
    let re = y.select_rows(retained).select_columns(&elim);
    let er = y.select_rows(&elim).select_columns(retained);
    let ee = y.select_rows(&elim).select_columns(&elim);
    let scale = ee.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let lu = ee.lu();
    let x = lu.solve(&er).ok_or(Error::SingularReduction)?;
    if !x.iter().all(|v| v.is_finite()) || x.iter().map(|v| v.norm()).fold(0.0, f64::max) > 1e12 * scale.max(1.0) {
        return Err(Error::SingularReduction);
    }
    Ok(rr - re * x)
}

/// Network seen from machine internal nodes and wind buses for one
/// topology (pre-fault, fault-on or post-fault).
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    /// Reduced admittance over `[machines..., wind buses...]`.
    pub y: DMatrix<Complex64>,
    pub n_machines: usize,
    /// Bus index of each retained wind node. Farms on a grounded bus are
    /// dropped.
    pub wind_buses: Vec<usize>,
    /// `Y_ww^-1` of the wind block, empty when no wind bus is retained.
    pub(crate) y_ww_inv: DMatrix<Complex64>,
}

impl ReducedNetwork {
    /// Extends `adm` with one internal node behind `j x'_d` per machine,
    /// converts loads to the shunt admittances `load_y` and reduces onto
    /// the internal nodes plus `wind_buses`. Grounded buses are held at
    /// zero voltage.
    pub fn build(
        adm: &AdmittanceMatrix,
        load_y: &[Complex64],
        machine_bus: &[usize],
        xd_prime: &[f64],
        wind_buses: &[usize],
    ) -> Result<Self> {
        let nb = adm.n_bus();
        let ng = machine_bus.len();
        let n = nb + ng;
        let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        y.view_mut((0, 0), (nb, nb)).copy_from(adm.matrix());
        for (i, l) in load_y.iter().enumerate() {
            y[(i, i)] += *l;
        }
        for (g, (&b, &x)) in machine_bus.iter().zip(xd_prime).enumerate() {
            if x <= 0.0 {
                return Err(Error::Domain(format!("machine {g} has non-positive transient reactance")));
            }
            let yg = Complex64::new(0.0, -1.0 / x);
            let k = nb + g;
            y[(k, k)] += yg;
            y[(b, b)] += yg;
            y[(k, b)] -= yg;
            y[(b, k)] -= yg;
        }
        let grounded = adm.grounded();
        let mut wind: Vec<usize> = wind_buses.iter().copied().filter(|b| !grounded.contains(b)).collect();
        wind.sort_unstable();
        wind.dedup();
        let live: Vec<usize> = (0..n).filter(|i| !grounded.contains(i)).collect();
        let y_live = y.select_rows(&live).select_columns(&live);
        let pos = |i: usize| live.iter().position(|&x| x == i).expect("live node");
        let retained: Vec<usize> = (0..ng).map(|g| pos(nb + g)).chain(wind.iter().map(|&b| pos(b))).collect();
        let red = kron_reduce(&y_live, &retained)?;
        let nw = wind.len();
        let y_ww_inv = if nw == 0 {
            DMatrix::zeros(0, 0)
        } else {
            red.view((ng, ng), (nw, nw)).clone_owned().try_inverse().ok_or(Error::SingularReduction)?
        };
        Ok(Self {
            y: red,
            n_machines: ng,
            wind_buses: wind,
            y_ww_inv,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn nothing_eliminated_is_identity() {
        let y = DMatrix::from_row_slice(2, 2, &[c(1.0, -5.0), c(-1.0, 5.0), c(-1.0, 5.0), c(1.0, -5.0)]);
        assert_eq!(kron_reduce(&y, &[0, 1]).unwrap(), y);
        let swapped = kron_reduce(&y, &[1, 0]).unwrap();
        assert_eq!(swapped[(0, 0)], y[(1, 1)]);
    }

    #[test]
    fn chain_middle_node_matches_hand_schur() {
        // 0 -a- 1 -b- 2 with shunt s at node 1
        let (a, b, s) = (c(0.5, -4.0), c(0.2, -2.5), c(0.1, 0.3));
        let z = c(0.0, 0.0);
        let y = DMatrix::from_row_slice(3, 3, &[a, -a, z, -a, a + b + s, -b, z, -b, b]);
        let red = kron_reduce(&y, &[0, 2]).unwrap();
        let d = a + b + s;
        let want = [a - a * a / d, -a * b / d, -a * b / d, b - b * b / d];
        for (got, w) in red.iter().zip(want) {
            assert!((got - w).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_block_is_reported() {
        // node 1 floats: its row and column are zero
        let z = c(0.0, 0.0);
        let y = DMatrix::from_row_slice(2, 2, &[c(1.0, -1.0), z, z, z]);
        assert!(matches!(kron_reduce(&y, &[0]), Err(Error::SingularReduction)));
        assert!(kron_reduce(&y, &[]).is_err());
    }
}
