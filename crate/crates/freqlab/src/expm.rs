//! Matrix exponential via scaling-and-squaring with a degree-13 Padé
//! approximant. System matrices here are tiny (N <= 4), so the fixed
//! high-order approximant at tolerance ~1e-12 is the simplest safe choice.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

// Coefficients of the [13/13] Pade approximant to exp(x).
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Scaling threshold theta_13 from Higham's 2005 analysis.
const THETA_13: f64 = 5.371920351148152;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Computes e^M for a square matrix.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm requires a square matrix");
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "expm input contains non-finite entries".into(),
        ));
    }

    let norm = one_norm(m);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = m / 2f64.powi(s);

    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u = &a
        * (&a6 * (B13[13] * &a6 + B13[11] * &a4 + B13[9] * &a2)
            + B13[7] * &a6
            + B13[5] * &a4
            + B13[3] * &a2
            + B13[1] * &id);
    let v = &a6 * (B13[12] * &a6 + B13[10] * &a4 + B13[8] * &a2)
        + B13[6] * &a6
        + B13[4] * &a4
        + B13[2] * &a2
        + B13[0] * &id;

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular Pade denominator in expm".into()))?;

    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}
