//! Empirical characteristic function, its exact derivatives, and the plug-in
//! estimate of the Laplacian of the characteristic exponent.
//!
//! All quantities are exact direct sums over the sample, evaluated at every
//! node of a [`FreqGrid`]. The phase `exp(i<u, y>)` of a tensor-grid node
//! factorizes over axes, so per increment only `d * M` sines and cosines are
//! needed; node accumulation then costs a complex multiply per weight.
//! Summation order per node is fixed (increments in sample order, then the
//! exact contribution of all-zero increments), so results do not depend on
//! thread scheduling.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{unflatten, ComplexField, FreqGrid};
use crate::sim::IncrementSample;

const CHUNK: usize = 256;

/// ECF together with its gradient and Laplacian on one grid.
#[derive(Debug, Clone)]
pub struct EcfDerivatives {
    pub phi: ComplexField,
    /// `grad[j]` is the partial derivative along axis `j`.
    pub grad: Vec<ComplexField>,
    pub laplacian: ComplexField,
}

struct RowAcc {
    re: Vec<f64>,
    im: Vec<f64>,
}

fn check_inputs(sample: &IncrementSample, grid: &FreqGrid) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::input("sample is empty"));
    }
    if sample.dim() != grid.dim() {
        return Err(Error::input(format!(
            "sample dimension {} does not match grid dimension {}",
            sample.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// Fills `out` (length `M`, storage order) with `exp(i u_j y)`, computing the
/// non-negative frequencies directly and the negative ones by conjugation.
fn axis_phases(axis: &[f64], y: f64, re: &mut [f64], im: &mut [f64]) {
    let m = axis.len();
    let half = m / 2;
    for j in half..m {
        let (s, c) = (axis[j] * y).sin_cos();
        re[j] = c;
        im[j] = s;
    }
    for j in 1..half {
        re[j] = re[m - j];
        im[j] = -im[m - j];
    }
    let (s, c) = (axis[0] * y).sin_cos();
    re[0] = c;
    im[0] = s;
}

/// Computes `sum_k w_i(Y_k) exp(i<u, Y_k>)` for the weights
/// `w_0 = 1` and, with derivatives, `w_{1+j} = Y_kj`, `w_{d+1} = |Y_k|^2`.
/// Returns one flat complex array per weight (not normalized by `n`).
fn accumulate(sample: &IncrementSample, grid: &FreqGrid, derivatives: bool) -> Vec<Vec<Complex64>> {
    let d = grid.dim();
    let m = grid.points();
    let nw = if derivatives { d + 2 } else { 1 };
    let outer_rows = grid.len() / m;
    let axis = grid.axis();

    let mut zero_rows = 0usize;
    let active: Vec<usize> = (0..sample.len())
        .filter(|&k| {
            let zero = sample.row(k).iter().all(|&y| y == 0.0);
            zero_rows += zero as usize;
            !zero
        })
        .collect();

    let mut acc: Vec<RowAcc> = (0..outer_rows)
        .map(|_| RowAcc {
            re: vec![0.0; nw * m],
            im: vec![0.0; nw * m],
        })
        .collect();

    // phases[(r * d + a) * m + j] for row r of the chunk, axis a
    let mut ph_re = vec![0.0; CHUNK * d * m];
    let mut ph_im = vec![0.0; CHUNK * d * m];
    let mut weights = vec![0.0; CHUNK * nw];

    for chunk in active.chunks(CHUNK) {
        for (r, &k) in chunk.iter().enumerate() {
            let y = sample.row(k);
            for a in 0..d {
                let off = (r * d + a) * m;
                axis_phases(
                    &axis,
                    y[a],
                    &mut ph_re[off..off + m],
                    &mut ph_im[off..off + m],
                );
            }
            let w = &mut weights[r * nw..(r + 1) * nw];
            w[0] = 1.0;
            if derivatives {
                w[1..=d].copy_from_slice(y);
                w[d + 1] = y.iter().map(|v| v * v).sum();
            }
        }
        let (ph_re, ph_im, weights) = (&ph_re, &ph_im, &weights);
        acc.par_iter_mut().enumerate().for_each(|(o, row)| {
            let mut idx = vec![0; d];
            if d > 1 {
                unflatten(o, m, &mut idx[..d - 1]);
            }
            let mut er = vec![0.0; m];
            let mut ei = vec![0.0; m];
            for r in 0..chunk.len() {
                let (mut ar, mut ai) = (1.0, 0.0);
                for (a, &j) in idx[..d - 1].iter().enumerate() {
                    let off = (r * d + a) * m + j;
                    let (pr, pi) = (ph_re[off], ph_im[off]);
                    (ar, ai) = (ar * pr - ai * pi, ar * pi + ai * pr);
                }
                let off = (r * d + d - 1) * m;
                let pr = &ph_re[off..off + m];
                let pi = &ph_im[off..off + m];
                for j in 0..m {
                    er[j] = ar * pr[j] - ai * pi[j];
                    ei[j] = ar * pi[j] + ai * pr[j];
                }
                for (wi, &w) in weights[r * nw..(r + 1) * nw].iter().enumerate() {
                    let re = &mut row.re[wi * m..(wi + 1) * m];
                    let im = &mut row.im[wi * m..(wi + 1) * m];
                    for j in 0..m {
                        re[j] += w * er[j];
                        im[j] += w * ei[j];
                    }
                }
            }
        });
    }

    (0..nw)
        .map(|wi| {
            let mut out = Vec::with_capacity(grid.len());
            for row in &acc {
                for j in 0..m {
                    let mut re = row.re[wi * m + j];
                    if wi == 0 {
                        // all-zero increments contribute exp(0) = 1 and nothing to derivatives
                        re += zero_rows as f64;
                    }
                    out.push(Complex64::new(re, row.im[wi * m + j]));
                }
            }
            out
        })
        .collect()
}

/// Empirical characteristic function `(1/n) sum_k exp(i<u, Y_k>)` on `grid`.
pub fn ecf(sample: &IncrementSample, grid: &FreqGrid) -> Result<ComplexField> {
    check_inputs(sample, grid)?;
    let n = sample.len() as f64;
    let mut sums = accumulate(sample, grid, false);
    let values = sums.swap_remove(0).into_iter().map(|v| v / n).collect();
    ComplexField::new(*grid, values)
}

/// ECF with its exact gradient `(1/n) sum_k i Y_k exp(i<u,Y_k>)` and
/// Laplacian `-(1/n) sum_k |Y_k|^2 exp(i<u,Y_k>)`.
pub fn ecf_derivatives(sample: &IncrementSample, grid: &FreqGrid) -> Result<EcfDerivatives> {
    check_inputs(sample, grid)?;
    let d = grid.dim();
    let n = sample.len() as f64;
    let sums = accumulate(sample, grid, true);
    let i = Complex64::new(0.0, 1.0);
    let phi = ComplexField::new(*grid, sums[0].iter().map(|v| v / n).collect())?;
    let grad = (0..d)
        .map(|j| ComplexField::new(*grid, sums[1 + j].iter().map(|v| i * v / n).collect()))
        .collect::<Result<Vec<_>>>()?;
    let laplacian = ComplexField::new(*grid, sums[d + 1].iter().map(|v| -v / n).collect())?;
    Ok(EcfDerivatives {
        phi,
        grad,
        laplacian,
    })
}

/// Direct-sum ECF, gradient and Laplacian at an arbitrary frequency `u`.
pub fn ecf_derivatives_at(
    sample: &IncrementSample,
    u: &[f64],
) -> Result<(Complex64, Vec<Complex64>, Complex64)> {
    if sample.is_empty() {
        return Err(Error::input("sample is empty"));
    }
    if u.len() != sample.dim() {
        return Err(Error::input(
            "frequency dimension does not match the sample",
        ));
    }
    let n = sample.len() as f64;
    let mut phi = Complex64::new(0.0, 0.0);
    let mut grad = vec![Complex64::new(0.0, 0.0); u.len()];
    let mut lap = Complex64::new(0.0, 0.0);
    for y in sample.rows() {
        let phase: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
        let e = Complex64::new(0.0, phase).exp();
        phi += e;
        for (g, v) in grad.iter_mut().zip(y) {
            *g += Complex64::new(0.0, *v) * e;
        }
        lap -= y.iter().map(|v| v * v).sum::<f64>() * e;
    }
    Ok((phi / n, grad.into_iter().map(|g| g / n).collect(), lap / n))
}

/// Plug-in estimate of the Laplacian of the characteristic exponent,
///
/// `(phi * lap(phi) - grad(phi) . grad(phi)) / (delta * phi^2)`,
///
/// set to zero (and flagged in the mask) wherever `|phi| < T^{-1/2}`.
/// The squared gradient is the bilinear sum of complex squares.
///
/// The expression is invariant under a common shift of all increments, so it
/// is evaluated on increments centered at their coordinate-wise median. This
/// avoids cancellation when the increments carry a large drift, and rows equal
/// to the median become exact zeros.
pub fn psi_laplacian_hat(sample: &IncrementSample, grid: &FreqGrid) -> Result<ComplexField> {
    check_inputs(sample, grid)?;
    let center: Vec<f64> = sample.column_medians().iter().map(|m| -m).collect();
    let derivs = ecf_derivatives(&sample.shifted(&center)?, grid)?;
    Ok(psi_laplacian_from(
        &derivs,
        sample.delta(),
        sample.horizon(),
    ))
}

/// [`psi_laplacian_hat`] from precomputed ECF derivatives.
pub fn psi_laplacian_from(derivs: &EcfDerivatives, delta: f64, horizon: f64) -> ComplexField {
    let threshold = horizon.powf(-0.5);
    let grid = derivs.phi.grid;
    let mut values = Vec::with_capacity(grid.len());
    let mut mask = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        let phi = derivs.phi.values[node];
        if phi.norm() < threshold {
            values.push(Complex64::new(0.0, 0.0));
            mask.push(true);
            continue;
        }
        let grad_sq: Complex64 = derivs
            .grad
            .iter()
            .map(|g| g.values[node] * g.values[node])
            .sum();
        let num = phi * derivs.laplacian.values[node] - grad_sq;
        values.push(num / (delta * phi * phi));
        mask.push(false);
    }
    ComplexField {
        grid,
        values,
        mask: Some(mask),
    }
}

/// Weight `log(e + |u|)^{-(1 + chi)/2}` of the uniform ECF risk bound.
pub fn risk_weight(u: &[f64], chi: f64) -> f64 {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    (std::f64::consts::E + norm).ln().powf(-(1.0 + chi) / 2.0)
}

/// `sup_u |w(u) (field(u) - truth(u))|` over the grid nodes.
pub fn weighted_sup_deviation(
    field: &ComplexField,
    truth: impl Fn(&[f64]) -> Complex64,
    chi: f64,
) -> f64 {
    let mut u = vec![0.0; field.grid.dim()];
    field
        .values
        .iter()
        .enumerate()
        .map(|(flat, v)| {
            field.grid.node(flat, &mut u);
            risk_weight(&u, chi) * (v - truth(&u)).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, LevyModelSpec};

    fn tiny() -> IncrementSample {
        IncrementSample::from_rows(0.01, &[vec![0.3, -1.2], vec![0.0, 0.0], vec![2.5, 0.7]])
            .unwrap()
    }

    /// Direct per-point summation, independent of the factorized engine.
    fn brute(sample: &IncrementSample, u: &[f64]) -> (Complex64, Vec<Complex64>, Complex64) {
        let n = sample.len() as f64;
        let mut phi = Complex64::new(0.0, 0.0);
        let mut grad = vec![Complex64::new(0.0, 0.0); u.len()];
        let mut lap = Complex64::new(0.0, 0.0);
        for y in sample.rows() {
            let dot: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
            let e = Complex64::new(0.0, dot).exp();
            phi += e;
            for (g, yj) in grad.iter_mut().zip(y) {
                *g += Complex64::new(0.0, *yj) * e;
            }
            lap -= y.iter().map(|v| v * v).sum::<f64>() * e;
        }
        (phi / n, grad.into_iter().map(|g| g / n).collect(), lap / n)
    }

    #[test]
    fn ecf_matches_brute_force_sum() {
        let s = tiny();
        let grid = FreqGrid::new(2, 8, 3.0).unwrap();
        let d = ecf_derivatives(&s, &grid).unwrap();
        let mut u = [0.0; 2];
        for node in 0..grid.len() {
            grid.node(node, &mut u);
            let (phi, grad, lap) = brute(&s, &u);
            assert!((d.phi.values[node] - phi).norm() <= 1e-12);
            assert!((d.laplacian.values[node] - lap).norm() <= 1e-12);
            for j in 0..2 {
                assert!((d.grad[j].values[node] - grad[j]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn origin_values() {
        let s = tiny();
        let grid = FreqGrid::new(2, 4, 1.0).unwrap();
        let d = ecf_derivatives(&s, &grid).unwrap();
        let o = d.phi.origin_index();
        assert_eq!(d.phi.values[o], Complex64::new(1.0, 0.0));
        let mean = s.column_means();
        for j in 0..2 {
            assert!((d.grad[j].values[o] - Complex64::new(0.0, mean[j])).norm() < 1e-15);
        }
        let msq: f64 = s
            .rows()
            .map(|y| y.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / 3.0;
        assert!((d.laplacian.values[o] + msq).norm() < 1e-14);
    }

    #[test]
    fn one_dimensional_grid() {
        let s = IncrementSample::from_rows(0.1, &[vec![0.5], vec![-1.5]]).unwrap();
        let grid = FreqGrid::new(1, 6, 2.0).unwrap();
        let phi = ecf(&s, &grid).unwrap();
        for (node, u) in grid.axis().iter().enumerate() {
            let want = ((u * 0.5).cos() + (u * -1.5).cos()) / 2.0;
            assert!((phi.values[node].re - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let grid = FreqGrid::new(1, 4, 1.0).unwrap();
        assert!(matches!(ecf(&tiny(), &grid), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hermitian_symmetry_is_exact() {
        let s = simulate(&LevyModelSpec::standard_cpp(100.0, 2), 0.001, 3000, 4).unwrap();
        let grid = FreqGrid::new(2, 16, 4.0).unwrap();
        let psi = psi_laplacian_hat(&s, &grid).unwrap();
        for node in 0..grid.len() {
            if let Some(mirror) = grid.mirror(node) {
                let diff = psi.values[node] - psi.values[mirror].conj();
                assert!(diff.norm() <= 1e-12 * psi.values[node].norm().max(1.0));
            }
        }
    }

    #[test]
    fn pure_drift_has_zero_laplacian_exponent() {
        let rows = vec![vec![0.002, -0.001]; 40];
        let s = IncrementSample::from_rows(0.001, &rows).unwrap();
        let grid = FreqGrid::new(2, 8, 5.0).unwrap();
        let psi = psi_laplacian_hat(&s, &grid).unwrap();
        for v in &psi.values {
            assert!(v.norm() <= 1e-9, "{v}");
        }
    }

    #[test]
    fn below_threshold_nodes_are_masked() {
        // Two increments +-1: phi(u) = cos(u), zero at u = pi/2.
        let s = IncrementSample::from_rows(1.0, &[vec![1.0], vec![-1.0]]).unwrap();
        let grid = FreqGrid::with_spacing(1, 8, std::f64::consts::FRAC_PI_2).unwrap();
        let psi = psi_laplacian_hat(&s, &grid).unwrap();
        let mask = psi.mask.as_ref().unwrap();
        let threshold = 2.0_f64.powf(-0.5);
        let phi = ecf(&s, &grid).unwrap();
        for node in 0..grid.len() {
            assert_eq!(mask[node], phi.values[node].norm() < threshold);
            if mask[node] {
                assert_eq!(psi.values[node], Complex64::new(0.0, 0.0));
            }
        }
        assert!(psi.masked_fraction() > 0.0);
    }
}
