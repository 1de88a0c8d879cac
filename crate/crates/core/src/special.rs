//! Gamma and two-parameter Mittag-Leffler functions, the closed-form
//! oracles for constant-coefficient transition matrices.

use crate::algebra::Matrix;
use crate::error::{FracError, Result};

/// Largest |z| accepted by the series evaluation of E_{alpha,beta}.
pub const ML_Z_MAX: f64 = 50.0;

const ML_MAX_TERMS: usize = 10_000;

// Lanczos coefficients, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_gamma(x: f64) -> f64 {
    // valid for x >= 0.5
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Gamma function for positive arguments.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(FracError::Domain(format!("gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        // reflection keeps the Lanczos argument away from the pole region
        Ok(std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * lanczos_gamma(1.0 - x)))
    } else {
        Ok(lanczos_gamma(x))
    }
}

/// Natural log of Gamma for positive arguments; usable far beyond the
/// overflow range of `gamma` itself.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(FracError::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok((std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln()
            - ln_gamma(1.0 - x)?);
    }
    let y = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (y + i as f64);
    }
    let t = y + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + (y + 0.5) * t.ln() - t + acc.ln())
}

/// Parameters of the two-parameter Mittag-Leffler function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MLParams {
    pub fn new(alpha: f64, beta: f64) -> Result<MLParams> {
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(FracError::Argument(format!(
                "Mittag-Leffler parameters must be positive, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(MLParams { alpha, beta })
    }
}

/// E_{alpha,beta}(z) by direct series summation on |z| <= ML_Z_MAX.
///
/// Terms are computed as exp(k ln|z| - ln Gamma(alpha k + beta)) so large
/// intermediate powers never overflow. Summation stops once the term
/// majorant drops below 1e-16 of the running sum and the majorant ratio
/// certifies a geometric tail.
pub fn ml_scalar(p: MLParams, z: f64) -> Result<f64> {
    if z.abs() > ML_Z_MAX {
        return Err(FracError::Domain(format!(
            "|z| = {} exceeds the series-reliable bound {}",
            z.abs(),
            ML_Z_MAX
        )));
    }
    if z == 0.0 {
        return Ok(1.0 / gamma(p.beta)?);
    }
    let ln_abs_z = z.abs().ln();
    let mut sum = 0.0;
    for k in 0..ML_MAX_TERMS {
        let kf = k as f64;
        let magnitude = (kf * ln_abs_z - ln_gamma(p.alpha * kf + p.beta)?).exp();
        let term = if z < 0.0 && k % 2 == 1 { -magnitude } else { magnitude };
        sum += term;
        // ratio of consecutive majorants |z| Gamma(ak+b)/Gamma(a(k+1)+b)
        let ratio = (ln_abs_z + ln_gamma(p.alpha * kf + p.beta)?
            - ln_gamma(p.alpha * (kf + 1.0) + p.beta)?)
            .exp();
        if magnitude <= 1e-16 * sum.abs().max(f64::MIN_POSITIVE) && ratio < 0.5 {
            return Ok(sum);
        }
    }
    Err(FracError::Convergence { terms: ML_MAX_TERMS })
}

/// E_{alpha,beta}(scale * M) for square M, by direct series on the matrix
/// with a norm-majorant stopping rule.
pub fn ml_matrix(p: MLParams, m: &Matrix, scale: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(FracError::Dimension("ml_matrix requires a square matrix".into()));
    }
    let sm = m.scale(scale);
    let norm = sm.norm_inf();
    if norm > ML_Z_MAX {
        return Err(FracError::Domain(format!(
            "||scale*M|| = {norm} exceeds the series-reliable bound {ML_Z_MAX}"
        )));
    }
    let n = m.rows();
    let mut power = Matrix::identity(n);
    let mut sum = Matrix::zeros(n, n);
    let ln_norm = if norm > 0.0 { norm.ln() } else { f64::NEG_INFINITY };
    for k in 0..ML_MAX_TERMS {
        let kf = k as f64;
        let g = gamma(p.alpha * kf + p.beta);
        // once Gamma overflows the remaining terms are negligible
        let coeff = match g {
            Ok(v) if v.is_finite() => 1.0 / v,
            _ => 0.0,
        };
        sum = sum.add(&power.scale(coeff))?;
        let majorant = if norm == 0.0 && k > 0 {
            0.0
        } else {
            (kf * ln_norm - ln_gamma(p.alpha * kf + p.beta)?).exp()
        };
        let ratio = if norm == 0.0 {
            0.0
        } else {
            (ln_norm + ln_gamma(p.alpha * kf + p.beta)? - ln_gamma(p.alpha * (kf + 1.0) + p.beta)?)
                .exp()
        };
        if majorant <= 1e-16 * sum.norm_inf().max(f64::MIN_POSITIVE) && ratio < 0.5 {
            return Ok(sum);
        }
        power = power.matmul(&sm)?;
    }
    Err(FracError::Convergence { terms: ML_MAX_TERMS })
}

#[cfg(test)]
mod tests {
    use super::*;

    // frozen from a 40-digit extended-precision oracle
    const GAMMA_4_3: f64 = 8.855343360454037;
    const COSH_2: f64 = 3.7621956910836314;

    #[test]
    fn gamma_basics() {
        assert!((gamma(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma(0.5).unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((gamma(4.3).unwrap() - GAMMA_4_3).abs() < 1e-12 * GAMMA_4_3);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.3).is_err());
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.1, 0.7, 1.0, 2.5, 10.0, 50.0] {
            let a = ln_gamma(x).unwrap();
            let b = gamma(x).unwrap().ln();
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "x={x}");
        }
        // beyond gamma's overflow range
        assert!(ln_gamma(500.0).unwrap().is_finite());
    }

    #[test]
    fn ml_reduces_to_exp() {
        let p = MLParams::new(1.0, 1.0).unwrap();
        for &z in &[-2.0, 0.0, 3.0] {
            assert!((ml_scalar(p, z).unwrap() - z.exp()).abs() <= 1e-12 * z.exp().max(1.0));
        }
    }

    #[test]
    fn ml_at_zero_is_inverse_gamma() {
        for &(a, b) in &[(0.3, 0.5), (0.5, 1.0), (0.7, 0.7), (1.0, 2.0)] {
            let p = MLParams::new(a, b).unwrap();
            let v = ml_scalar(p, 0.0).unwrap();
            assert!((v * gamma(b).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ml_even_order_is_cosh() {
        let p = MLParams::new(2.0, 1.0).unwrap();
        assert!((ml_scalar(p, 4.0).unwrap() - COSH_2).abs() < 1e-10);
    }

    #[test]
    fn ml_recurrence() {
        // E_{a,b}(z) = z E_{a,a+b}(z) + 1/Gamma(b)
        // strongly negative z at small alpha is outside the reliable range
        // of direct summation (catastrophic cancellation), so stay modest
        for &a in &[0.3, 0.5, 0.7, 1.0] {
            for &b in &[0.3, 0.5, 0.7, 1.0] {
                let mut z = -2.0;
                while z <= 5.0 {
                    let lhs = ml_scalar(MLParams::new(a, b).unwrap(), z).unwrap();
                    let rhs = z * ml_scalar(MLParams::new(a, a + b).unwrap(), z).unwrap()
                        + 1.0 / gamma(b).unwrap();
                    // negative z costs a few digits to cancellation
                    assert!(
                        (lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0),
                        "a={a} b={b} z={z}: {lhs} vs {rhs}"
                    );
                    z += 1.25;
                }
            }
        }
    }

    #[test]
    fn ml_positive_for_nonnegative_argument() {
        // z is kept within the range where the series settles in the
        // term budget; small alpha needs small z
        for &(a, zmax) in &[(0.2, 2.0), (0.5, 10.0), (0.9, 20.0)] {
            for &z in &[0.0, 0.5 * zmax, zmax] {
                assert!(ml_scalar(MLParams::new(a, a).unwrap(), z).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn ml_domain_cap() {
        let p = MLParams::new(0.5, 1.0).unwrap();
        assert!(matches!(ml_scalar(p, 51.0), Err(FracError::Domain(_))));
    }

    #[test]
    fn ml_matrix_zero_and_diagonal() {
        let p = MLParams::new(1.0, 1.0).unwrap();
        let z = Matrix::zeros(3, 3);
        let r = ml_matrix(p, &z, 2.0).unwrap();
        assert!(r.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);

        let p = MLParams::new(0.6, 0.6).unwrap();
        let d = Matrix::from_rows(&[&[0.5, 0.0], &[0.0, -1.5]]);
        let r = ml_matrix(p, &d, 0.8).unwrap();
        for i in 0..2 {
            let s = ml_scalar(p, 0.8 * d[(i, i)]).unwrap();
            assert!((r[(i, i)] - s).abs() < 1e-13 * s.abs().max(1.0));
        }
        assert_eq!(r[(0, 1)], 0.0);
    }

    #[test]
    fn ml_matrix_exp_case() {
        // E_{1,1}(tM) = exp(tM); compare against a Taylor+squaring oracle
        let m = Matrix::from_rows(&[&[0.3, -0.5, 0.1], &[0.2, 0.1, -0.4], &[-0.1, 0.6, 0.2]]);
        let t = 1.7;
        let r = ml_matrix(MLParams::new(1.0, 1.0).unwrap(), &m, t).unwrap();
        let e = expm_oracle(&m.scale(t));
        assert!(r.sub(&e).unwrap().max_abs() < 1e-10 * e.norm_inf());
    }

    /// scaling-and-squaring with a long Taylor series; test-only oracle.
    fn expm_oracle(m: &Matrix) -> Matrix {
        let mut s = 0u32;
        let mut norm = m.norm_inf();
        while norm > 0.25 {
            norm /= 2.0;
            s += 1;
        }
        let msc = m.scale(0.5f64.powi(s as i32));
        let n = m.rows();
        let mut sum = Matrix::identity(n);
        let mut term = Matrix::identity(n);
        for k in 1..30 {
            term = term.matmul(&msc).unwrap().scale(1.0 / k as f64);
            sum = sum.add(&term).unwrap();
        }
        for _ in 0..s {
            sum = sum.matmul(&sum).unwrap();
        }
        sum
    }
}
