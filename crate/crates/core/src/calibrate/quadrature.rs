//! Globally adaptive 7/15-point Gauss–Kronrod quadrature.

use crate::{Error, Result};

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
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Segment {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[lo, hi]`, bisecting the segment with the largest
/// error estimate until the total estimate is below
/// `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    const MAX_SEGMENTS: usize = 2000;
    let mut segments = vec![gauss_kronrod(&f, lo, hi)];
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() {
            return Err(Error::Numerical(format!("non-finite integral on [{lo}, {hi}]")));
        }
        if error <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::Numerical(format!(
                "quadrature on [{lo}, {hi}] did not converge: error {error:e} on {total:e}"
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("non-empty");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.lo + s.hi);
        segments.push(gauss_kronrod(&f, s.lo, mid));
        segments.push(gauss_kronrod(&f, mid, s.hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x.powi(6) - 2.0 * x, 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((v - (128.0 / 7.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let v = integrate(f64::sqrt, 0.0, 1.0, 1e-12, 0.0).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn gaussian_tail() {
        let v = integrate(|x| (-x * x).exp(), 0.0, 10.0, 1e-13, 0.0).unwrap();
        assert!((v - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}
