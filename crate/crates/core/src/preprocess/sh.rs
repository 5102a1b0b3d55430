//! View-dependent color from real spherical harmonics (degrees 0–3).
//!
//! The basis uses the Condon–Shortley phase, which is the sign convention
//! trained 3DGS checkpoints are fitted against.

use thiserror::Error;

use super::real::{Counted, OpTally, Real};
use crate::scene::{sh_basis_count, Gaussian3D};

pub const SH_C0: f32 = 0.282_094_8;
pub const SH_C1: f32 = 0.488_602_52;
pub const SH_C2: [f32; 5] = [1.092_548_4, -1.092_548_4, 0.315_391_57, -1.092_548_4, 0.546_274_2];
pub const SH_C3: [f32; 7] = [
    -0.590_043_6,
    2.890_611_4,
    -0.457_045_8,
    0.373_176_33,
    -0.457_045_8,
    1.445_305_7,
    -0.590_043_6,
];

#[derive(Debug, Error, PartialEq)]
pub enum ShError {
    #[error("view direction has zero or non-finite length")]
    DegenerateDirection,
}

/// Evaluates the SH color of `g` toward unit direction `dir`; the result is
/// `clamp(0.5 + Σ Y_k(dir) · sh_k, 0, 1)` per channel.
pub fn evaluate_sh(g: &Gaussian3D, degree: u8, dir: [f32; 3]) -> Result<[f32; 3], ShError> {
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(ShError::DegenerateDirection);
    }
    let d = if (n - 1.0).abs() <= 1e-6 { dir } else { [dir[0] / n, dir[1] / n, dir[2] / n] };
    Ok(eval_sh::<f32>(&g.sh, degree, [d[0], d[1], d[2]]).map(|c| c.clamp(0.0, 1.0)))
}

/// Unclamped `0.5 + Σ Y_k · sh_k`.
pub(crate) fn eval_sh<R: Real>(sh: &[[f32; 3]], degree: u8, dir: [R; 3]) -> [R; 3] {
    let [x, y, z] = dir;
    let k = |i: usize| sh[i].map(R::lit);
    let mut basis: [R; 16] = [R::lit(0.0); 16];
    basis[0] = R::lit(SH_C0);
    if degree >= 1 {
        let c1 = R::lit(SH_C1);
        basis[1] = -(c1 * y);
        basis[2] = c1 * z;
        basis[3] = -(c1 * x);
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, yz, xz) = (x * y, y * z, x * z);
        let c2 = SH_C2.map(R::lit);
        basis[4] = c2[0] * xy;
        basis[5] = c2[1] * yz;
        basis[6] = c2[2] * (R::lit(2.0) * zz - xx - yy);
        basis[7] = c2[3] * xz;
        basis[8] = c2[4] * (xx - yy);
        if degree >= 3 {
            let c3 = SH_C3.map(R::lit);
            basis[9] = c3[0] * y * (R::lit(3.0) * xx - yy);
            basis[10] = c3[1] * xy * z;
            basis[11] = c3[2] * y * (R::lit(4.0) * zz - xx - yy);
            basis[12] = c3[3] * z * (R::lit(2.0) * zz - R::lit(3.0) * xx - R::lit(3.0) * yy);
            basis[13] = c3[4] * x * (R::lit(4.0) * zz - xx - yy);
            basis[14] = c3[5] * z * (xx - yy);
            basis[15] = c3[6] * x * (xx - R::lit(3.0) * yy);
        }
    }
    let mut rgb = [R::lit(0.0); 3];
    for (i, b) in basis.iter().enumerate().take(sh_basis_count(degree)) {
        let coeff = k(i);
        for c in 0..3 {
            rgb[c] = if i == 0 { *b * coeff[c] } else { rgb[c] + *b * coeff[c] };
        }
    }
    rgb.map(|v| v + R::lit(0.5))
}

/// Arithmetic performed by one SH color evaluation at `degree`.
pub fn sh_eval_ops(degree: u8) -> OpTally {
    let sh = [[0.1f32; 3]; 16];
    let dir = [Counted::lit(0.48), Counted::lit(0.6), Counted::lit(0.64)];
    Counted::measure(|| eval_sh::<Counted>(&sh, degree, dir)).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_only() {
        let g = Gaussian3D::default();
        assert_eq!(evaluate_sh(&g, 0, [0.0, 0.0, 1.0]).unwrap(), [0.5, 0.5, 0.5]);

        let mut g = Gaussian3D::default();
        g.sh[0] = [1.0 / 0.282_094_79, 0.0, 0.0];
        // 0.5 + 1.0 pre-clamp.
        let raw = eval_sh::<f32>(&g.sh, 0, [0.0, 0.0, 1.0]);
        assert!((raw[0] - 1.5).abs() < 1e-6);
        assert_eq!(evaluate_sh(&g, 0, [0.0, 0.0, 1.0]).unwrap(), [1.0, 0.5, 0.5]);
    }

    #[test]
    fn rejects_zero_direction() {
        let g = Gaussian3D::default();
        assert_eq!(evaluate_sh(&g, 3, [0.0; 3]), Err(ShError::DegenerateDirection));
        assert_eq!(evaluate_sh(&g, 3, [f32::NAN, 0.0, 0.0]), Err(ShError::DegenerateDirection));
    }

    #[test]
    fn op_counts_grow_with_degree() {
        let ops: Vec<u64> = (0..=3).map(|d| sh_eval_ops(d).total()).collect();
        assert!(ops.windows(2).all(|w| w[0] < w[1]), "{ops:?}");
    }
}
