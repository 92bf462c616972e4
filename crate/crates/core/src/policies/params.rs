use std::fmt;

use thiserror::Error;

/// Why a parameter set cannot drive the three-phase policy.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Infeasibility {
    #[error("round-robin phase is empty: b = {b} <= d = {d}")]
    RoundRobinEmpty { b: u64, d: u64 },
    #[error("backlog-clearing length r = b - s = {r} < 1 (c_r = c_b - sqrt(c_s c_b) = {c_r:.6})")]
    BacklogClearingEmpty { r: i64, c_r: f64 },
    #[error("normal-clearing length ell = d + s - b = {ell} < 1 (c_ell = c_d - c_r = {c_ell:.6})")]
    NormalClearingEmpty { ell: i64, c_ell: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameter input: {0}")]
    Precondition(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(#[from] Infeasibility),
    #[error("constants violate c_b > c_s, c_d^2 >= 640 c_b, c_d > c_b, c_s >= 30; enable relaxed mode to run anyway")]
    ConstraintsViolated,
}

/// Rounded phase lengths before feasibility checks. `ell` and `r` may be
/// negative here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamEvaluation {
    pub n: usize,
    pub f_n: u64,
    pub rho: f64,
    pub c_b: f64,
    pub c_d: f64,
    pub c_s: f64,
    pub b: u64,
    pub d: u64,
    pub s: i64,
    pub ell: i64,
    pub r: i64,
    pub constraints_ok: bool,
}

impl ParamEvaluation {
    /// `c_r = c_b - sqrt(c_s c_b)`; `r` is approximately `c_r f_n ln f_n`.
    pub fn c_r(&self) -> f64 {
        self.c_b - (self.c_s * self.c_b).sqrt()
    }

    /// `c_ell = c_d - c_r`; `ell >= c_ell sqrt(n) f_n ln f_n` up to rounding.
    pub fn c_ell(&self) -> f64 {
        self.c_d - self.c_r()
    }

    pub fn r_closed_form(&self) -> f64 {
        let f = self.f_n as f64;
        self.c_r() * f * f.ln()
    }

    pub fn ell_lower_closed_form(&self) -> f64 {
        let f = self.f_n as f64;
        self.c_ell() * (self.n as f64).sqrt() * f * f.ln()
    }

    /// First violated phase-length condition, if any.
    pub fn infeasibility(&self) -> Option<Infeasibility> {
        if self.b <= self.d {
            Some(Infeasibility::RoundRobinEmpty {
                b: self.b,
                d: self.d,
            })
        } else if self.r < 1 {
            Some(Infeasibility::BacklogClearingEmpty {
                r: self.r,
                c_r: self.c_r(),
            })
        } else if self.ell < 1 {
            Some(Infeasibility::NormalClearingEmpty {
                ell: self.ell,
                c_ell: self.c_ell(),
            })
        } else {
            None
        }
    }
}

/// Phase lengths of the three-phase batching policy.
///
/// A period is `b` slots: `b - d` round-robin slots, `ell` normal-clearing
/// slots and `r` backlog-clearing slots. Service of batch `k` starts `d`
/// slots after its first arrival slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    pub n: usize,
    pub f_n: u64,
    pub rho: f64,
    pub c_b: f64,
    pub c_d: f64,
    pub c_s: f64,
    pub b: u64,
    pub d: u64,
    pub s: u64,
    pub ell: u64,
    pub r: u64,
    pub constraints_ok: bool,
}

impl PolicyParams {
    pub fn round_robin_len(&self) -> u64 {
        self.b - self.d
    }
}

impl fmt::Display for PolicyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} f_n={} rho={} b={} d={} s={} ell={} r={} constraints_ok={}",
            self.n,
            self.f_n,
            self.rho,
            self.b,
            self.d,
            self.s,
            self.ell,
            self.r,
            self.constraints_ok
        )
    }
}

/// Evaluates `b = ceil(c_b f^2 ln f)`, `d = ceil(c_d sqrt(n) f ln f)` and
/// `s = floor(rho b + sqrt(c_s b ln f))` with `rho = 1 - 1/f`, natural log.
pub fn evaluate_params(
    n: usize,
    f_n: u64,
    c_b: f64,
    c_d: f64,
    c_s: f64,
) -> Result<ParamEvaluation, ParamError> {
    if n < 3 {
        return Err(ParamError::Precondition(format!("n = {n} < 3")));
    }
    if f_n < n as u64 {
        return Err(ParamError::Precondition(format!("f_n = {f_n} < n = {n}")));
    }
    for (name, c) in [("c_b", c_b), ("c_d", c_d), ("c_s", c_s)] {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ParamError::Precondition(format!(
                "{name} = {c} is not positive"
            )));
        }
    }
    let f = f_n as f64;
    let ln_f = f.ln();
    let rho = 1.0 - 1.0 / f;
    let b = (c_b * f * f * ln_f).ceil() as u64;
    let d = (c_d * (n as f64).sqrt() * f * ln_f).ceil() as u64;
    let s = (rho * b as f64 + (c_s * b as f64 * ln_f).sqrt()).floor() as i64;
    let constraints_ok = c_b > c_s && c_d * c_d >= 640.0 * c_b && c_d > c_b && c_s >= 30.0;
    Ok(ParamEvaluation {
        n,
        f_n,
        rho,
        c_b,
        c_d,
        c_s,
        b,
        d,
        s,
        ell: d as i64 + s - b as i64,
        r: b as i64 - s,
        constraints_ok,
    })
}

/// Derives the policy parameters, rejecting rounded phase lengths that
/// leave a phase empty.
///
/// Constants outside the sufficient conditions are accepted here and
/// surfaced through `constraints_ok`.
pub fn derive_params(
    n: usize,
    f_n: u64,
    c_b: f64,
    c_d: f64,
    c_s: f64,
) -> Result<PolicyParams, ParamError> {
    let e = evaluate_params(n, f_n, c_b, c_d, c_s)?;
    if let Some(why) = e.infeasibility() {
        return Err(why.into());
    }
    let p = PolicyParams {
        n,
        f_n,
        rho: e.rho,
        c_b,
        c_d,
        c_s,
        b: e.b,
        d: e.d,
        s: e.s as u64,
        ell: e.ell as u64,
        r: e.r as u64,
        constraints_ok: e.constraints_ok,
    };
    debug_assert_eq!(p.round_robin_len() + p.ell + p.r, p.b);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_constants_at_25() {
        let p = derive_params(25, 25, 31.0, 141.0, 30.0).unwrap();
        assert!(p.constraints_ok);
        // Frozen from a 50-digit evaluation of the rounding rules.
        assert_eq!(
            (p.b, p.d, p.s, p.ell, p.r),
            (62366, 56733, 62325, 56692, 41)
        );
        assert_eq!(p.round_robin_len() + p.ell + p.r, p.b);
        assert_eq!(p.rho, 0.96);
    }

    #[test]
    fn larger_sweep_points() {
        let p = derive_params(36, 36, 31.0, 141.0, 30.0).unwrap();
        assert_eq!((p.b, p.d, p.s), (143972, 109140, 143906));
        let p = derive_params(49, 49, 31.0, 141.0, 30.0).unwrap();
        assert_eq!((p.b, p.d, p.s), (289673, 188221, 289576));
    }

    #[test]
    fn four_ports_is_infeasible() {
        assert_eq!(
            derive_params(4, 4, 31.0, 141.0, 30.0),
            Err(ParamError::Infeasible(Infeasibility::RoundRobinEmpty {
                b: 688,
                d: 1564
            }))
        );
    }

    #[test]
    fn c_s_above_c_b_empties_backlog_phase() {
        match derive_params(25, 25, 30.0, 141.0, 31.0) {
            Err(ParamError::Infeasible(Infeasibility::BacklogClearingEmpty { r, c_r })) => {
                assert_eq!(r, -39);
                assert!(c_r <= 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relaxed_constants_are_flagged() {
        let p = derive_params(3, 3, 4.0, 3.0, 1.0).unwrap();
        assert!(!p.constraints_ok);
        assert_eq!((p.b, p.d, p.s, p.ell, p.r), (40, 18, 33, 11, 7));
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            derive_params(2, 2, 1.0, 1.0, 1.0),
            Err(ParamError::Precondition(_))
        ));
        assert!(matches!(
            derive_params(5, 4, 1.0, 1.0, 1.0),
            Err(ParamError::Precondition(_))
        ));
        assert!(matches!(
            derive_params(5, 5, 0.0, 1.0, 1.0),
            Err(ParamError::Precondition(_))
        ));
    }

    #[test]
    fn closed_forms_track_rounded_lengths() {
        let e = evaluate_params(25, 25, 31.0, 141.0, 30.0).unwrap();
        assert!((e.r as f64 - e.r_closed_form()).abs() < 2.0);
        assert!(e.ell as f64 >= e.ell_lower_closed_form() - 1.0);
    }
}
