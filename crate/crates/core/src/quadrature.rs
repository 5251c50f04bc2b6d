//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

impl Quadrature {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[a, b]`, returning `(value, error estimate)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64)> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Domain("quadrature needs finite limits".into()));
        }
        if a == b {
            return Ok((0.0, 0.0));
        }
        let mut segments = vec![kronrod(&mut f, a, b)];
        loop {
            let value: f64 = segments.iter().map(|s| s.value).sum();
            let error: f64 = segments.iter().map(|s| s.error).sum();
            if !value.is_finite() {
                return Err(Error::Domain("integrand is not finite".into()));
            }
            if error <= self.abs_tol.max(self.rel_tol * value.abs()) {
                return Ok((value, error));
            }
            if segments.len() >= self.max_intervals {
                return Err(Error::Domain(format!(
                    "quadrature did not converge: error {error:e} after {} intervals",
                    segments.len()
                )));
            }
            let (worst, _) = segments
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
                .expect("non-empty");
            let seg = segments.swap_remove(worst);
            let mid = 0.5 * (seg.a + seg.b);
            segments.push(kronrod(&mut f, seg.a, mid));
            segments.push(kronrod(&mut f, mid, seg.b));
        }
    }

    /// Integral value only.
    pub fn value(&self, f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        self.integrate(f, a, b).map(|(v, _)| v)
    }

    /// Iterated integral of `f` over the box `lo x hi` in any dimension.
    pub fn integrate_box(&self, f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> Result<f64> {
        let mut point = vec![0.0; lo.len()];
        self.nested(f, lo, hi, 0, &mut point)
    }

    fn nested(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        lo: &[f64],
        hi: &[f64],
        axis: usize,
        point: &mut Vec<f64>,
    ) -> Result<f64> {
        if axis == lo.len() {
            return Ok(f(point));
        }
        let mut failure = None;
        let value = self.value(
            |t| {
                point[axis] = t;
                match self.nested(f, lo, hi, axis + 1, point) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            lo[axis],
            hi[axis],
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}
