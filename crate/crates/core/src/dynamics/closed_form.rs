//! Explicit memory-1, counting and reactive vector fields.

use crate::error::{Error, Result};

const DEN_EPS: f64 = 1e-14;

fn guard(den: f64, what: &str) -> Result<f64> {
    if !den.is_finite() || den.abs() <= DEN_EPS {
        return Err(Error::Degenerate(format!("{what}: denominator {den:e} vanishes")));
    }
    Ok(den)
}

/// Adaptive dynamics of a memory-1 population for an arbitrary payoff vector
/// `f = (f1, f2, f3, f4)`, in the order `(CC, CD, DC, DD)`.
#[allow(clippy::too_many_lines)]
pub fn memory1_field_closed(p: [f64; 4], f: [f64; 4]) -> Result<[f64; 4]> {
    let [f1, f2, f3, f4] = f;
    let [cc, cd, dc, dd] = p;
    let bracket = (-2.0 * cc + cd + dc + 1.0) * dd * dd + 2.0 * (cc * cc - cd * dc - 1.0) * dd
        - (cc - 1.0) * (-2.0 * dc * cd + cd + dc + cc * (cd + dc - 1.0) - 1.0);
    let a = guard((cd - dc - 1.0) * bracket * bracket, "memory-1 field")?;

    let x_cc = dd
        * (2.0 * cd * dc - (cd + dc) * dd + dd)
        * (-f3 * cc * cc + f3 * cd * cc * cc - f1 * cd * cd * cc + f1 * dc * dc * cc - f1 * cc
            + f3 * cc
            + 2.0 * f1 * cd * cc
            - f3 * cd * cc
            + f3 * dc * cc
            - f3 * cd * dc * cc
            - f1 * cd * dc * dc
            + (f3 * (cc - dc - 1.0) + f1 * (-cd + dc + 1.0)) * dd * dd
            + f1 * cd * cd * dc
            - f3 * dc
            - f1 * cd * dc
            + f3 * cd * dc
            - f4 * (cd - dc - 1.0) * (cc * cc - (cd + dc + 1.0) * cc + cd * dc + 1.0)
            - (f3 * (cc * (cc + cd - 1.0) - (cc + cd) * dc - 1.0) - 2.0 * f1 * cc * (cd - dc - 1.0)) * dd
            + f2 * ((cd - cc) * dd * dd + (cc * cc + (-cd + dc + 1.0) * cc - cd * dc - 1.0) * dd
                - (cc - 1.0) * (-dc * cd + cd + cc * dc - 1.0)));

    let x_cd = -(cc - 1.0)
        * (cc - dd + 1.0)
        * dd
        * ((f3 * (cc - dc - 1.0) + f1 * (-cd + dc + 1.0)) * dd * dd
            + (2.0 * f1 * (cd - dc - 1.0) * dc + f3 * (-cc * cc + dc * dc + dc + 1.0)) * dd
            + f4 * (cd - dc - 1.0) * ((cc - dc) * (cc - dc) + dc - 1.0)
            + dc * (f3 * (cc - 1.0) * (cc - dc) + f1 * (dc * dc - cd * dc + cd - 1.0))
            + f2 * ((cd - cc) * dd * dd + (cc * cc + dc * dc - 2.0 * cd * dc + dc - 1.0) * dd
                - (cc - 1.0) * (dc * dc - 2.0 * cd * dc + dc + cc * (cd - 1.0) + cd - 1.0)));

    let x_dc = (cc - 1.0)
        * (cc - dd + 1.0)
        * dd
        * (f1 * cd * cd * cd - 2.0 * f1 * cd * cd + f3 * cd * cd - f3 * cc * cd * cd - f1 * dc * cd * cd + f1 * cd
            - f3 * cd
            + f3 * cc * cd
            + f1 * dc * cd
            - 2.0 * f3 * dc * cd
            + 2.0 * f3 * cc * dc * cd
            + (f1 * (cd - dc - 1.0) + f3 * (-cc + dc + 1.0)) * dd * dd
            - f4 * ((cc - cd) * (cc - cd) + cd - 1.0) * (cd - dc - 1.0)
            - f3 * cc * cc * dc
            + f3 * dc
            + (2.0 * f1 * cd * (-cd + dc + 1.0) + f3 * (cc * cc + cd * (cd - 2.0 * dc - 1.0) - 1.0)) * dd
            + f2 * ((cd - dd - 1.0) * cc * cc + (-cd * cd + cd + dd * dd) * cc - 2.0 * cd
                + dd
                + cd * (cd - dd) * (dd + 1.0)
                + 1.0));

    let x_dd = -(cc - 1.0)
        * (-2.0 * dc * cd + cd + dc + cc * (cd + dc - 1.0) - 1.0)
        * ((f3 * (cd - cc) + f1 * (-cd + dc + 1.0)) * dd * dd
            + (f3 * (cc - 1.0) * (cc - cd + 2.0)
                + f3 * (cc - cd - 1.0) * dc
                + f1 * ((cd - 1.0) * (cd - 1.0) - dc * dc))
                * dd
            + dc * (f1 * cd * (-cd + dc + 1.0) - f3 * (cc - 1.0) * (cc - cd + 1.0))
            - f4 * (cd - dc - 1.0) * (cc * cc - 2.0 * dd * cc - cd * dc + (cd + dc + 1.0) * dd - 1.0)
            + f2 * ((cd - dd - 1.0) * cc * cc - cd * (dc + dd) * cc + dd * (dc + dd + 1.0) * cc - cd
                + (cd - dd) * (dd * dc + dc + dd)
                + 1.0));

    Ok([x_cc / a, x_cd / a, x_dc / a, x_dd / a])
}

/// Memory-1 dynamics driven by the payoff gap alone; only `f2 - f3` matters.
pub fn memory1_antisym_field_closed(p: [f64; 4], f2: f64, f3: f64) -> Result<[f64; 4]> {
    let [cc, cd, dc, dd] = p;
    let a = guard(
        2.0 * (cd - dc - 1.0)
            * (2.0 * dd * (cc * cc - cd * dc - 1.0) + dd * dd * (-2.0 * cc + cd + dc + 1.0)
                - (cc - 1.0) * (cc * (cd + dc - 1.0) - 2.0 * cd * dc + cd + dc - 1.0)),
        "memory-1 antisymmetric field",
    )?;
    let g = f2 - f3;
    let mid = -(cc - 1.0) * dd * g * (cc - dd + 1.0) / a;
    Ok([
        dd * g * (-dd * (cd + dc) + 2.0 * cd * dc + dd) / a,
        mid,
        mid,
        (cc - 1.0) * g * (cc * (cd + dc - 1.0) - 2.0 * cd * dc + cd + dc - 1.0) / a,
    ])
}

/// Time-rescaled antisymmetric dynamics of counting strategies `(q2, q1, q0)`.
///
/// The rescaling factor is not positive throughout the cube, so this field
/// points along or against the unscaled one; see `dynamics::counting_field`.
pub fn counting_antisym_closed(q2: f64, q1: f64, q0: f64) -> [f64; 3] {
    let x = -2.0 * q0 * (-q2 * q2 + q1 * q1 + 1.0)
        + q0 * q0 * (-2.0 * q2 + 2.0 * q1 + 1.0)
        + (q2 - 1.0) * (2.0 * q1 * (-q2 + q1 - 1.0) + q2 + 1.0);
    [
        -0.5 * q0 * (2.0 * q1 * (q1 - q0) + q0) * x,
        0.5 * (q2 - 1.0) * q0 * (q2 - q0 + 1.0) * x,
        0.5 * (q2 - 1.0) * (2.0 * q1 * (-q2 + q1 - 1.0) + q2 + 1.0) * x,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactiveFields {
    pub symmetric: [f64; 2],
    pub antisymmetric: [f64; 2],
}

/// Reactive dynamics `(dp1, dp2)` of the symmetric and payoff-gap games.
pub fn reactive_fields(p1: f64, p2: f64, b: f64, c: f64) -> Result<ReactiveFields> {
    Ok(ReactiveFields {
        symmetric: reactive_sym_field(p1, p2, b, c)?,
        antisymmetric: reactive_antisym_field(p1, p2, b, c)?,
    })
}

pub fn reactive_sym_field(p1: f64, p2: f64, b: f64, c: f64) -> Result<[f64; 2]> {
    let s = 1.0 - p1 + p2;
    let den = guard(2.0 * s * s, "reactive symmetric field")?;
    Ok([(b - c) * p2 / den, (b - c) * (1.0 - p1) / den])
}

pub fn reactive_antisym_field(p1: f64, p2: f64, b: f64, c: f64) -> Result<[f64; 2]> {
    let r = p1 - p2;
    let den = guard(2.0 * (r * r - 1.0), "reactive antisymmetric field")?;
    Ok([(b + c) * p2 / den, (b + c) * (1.0 - p1) / den])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antisym_field_vanishes_without_gap() {
        let v = memory1_antisym_field_closed([0.3, 0.4, 0.6, 0.2], 1.5, 1.5).unwrap();
        assert_eq!(v, [0.0; 4]);
    }

    #[test]
    fn antisym_middle_components_equal() {
        let v = memory1_antisym_field_closed([0.3, 0.45, 0.6, 0.2], -1.0, 2.0).unwrap();
        assert_eq!(v[1], v[2]);
    }

    #[test]
    fn full_field_shift_invariant() {
        let p = [0.3, 0.45, 0.6, 0.2];
        let f = [1.0, -1.0, 2.0, 0.0];
        let a = memory1_field_closed(p, f).unwrap();
        let b = memory1_field_closed(p, f.map(|v| v + 3.25)).unwrap();
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() <= 1e-12 * (1.0 + a[k].abs()));
        }
    }

    #[test]
    fn reactive_equal_gain_symmetric_vanishes() {
        let r = reactive_fields(0.4, 0.3, 1.0, 1.0).unwrap();
        assert_eq!(r.symmetric, [0.0, 0.0]);
        assert!(reactive_antisym_field(1.0, 0.0, 2.0, 1.0).is_err());
    }
}
