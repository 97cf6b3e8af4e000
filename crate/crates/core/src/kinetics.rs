//! Model parameters and the two-species kinetics with a cytosolic pool.
//!
//! `f` is the activation/inactivation balance of membrane GTPase, `q` the
//! exchange flux with the cytosol. `q0` closes the pool for spatially
//! homogeneous states and `q1` freezes it at a steady-state value. The factor
//! γ is never applied here; callers scale reaction terms themselves.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ParameterError;
use crate::mesh::SurfaceMesh;

/// Dimensionless model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub a_neg6: f64,
    /// Diffusion ratio d_v / d_u.
    pub d: f64,
    /// System-size factor multiplying all reaction terms.
    pub gamma: f64,
    /// Total pool.
    #[serde(rename = "V0")]
    pub v0: f64,
    /// Inverse enclosed volume.
    pub c: f64,
    /// Surface area.
    pub gamma_area: f64,
}

impl Parameters {
    /// Reference parameter set on the unit sphere.
    pub fn baseline() -> Self {
        Self {
            a1: 0.0,
            a2: 20.0,
            a3: 160.0,
            a4: 1.0,
            a5: 0.5,
            a6: 0.1,
            a_neg6: 1.0,
            d: 1000.0,
            gamma: 400.0,
            v0: 10.0,
            c: 3.0 / (4.0 * PI),
            gamma_area: 4.0 * PI,
        }
    }

    /// Same kinetics on a domain with the given enclosed volume and surface area.
    pub fn with_geometry(mut self, enclosed_volume: f64, surface_area: f64) -> Self {
        self.c = 1.0 / enclosed_volume;
        self.gamma_area = surface_area;
        self
    }

    /// Geometry taken from a discrete surface (|B_h| and |Γ_h|).
    pub fn for_mesh(self, mesh: &SurfaceMesh) -> Self {
        self.with_geometry(mesh.enclosed_volume(), mesh.surface_area())
    }

    /// c·|Γ|
    pub fn cg(&self) -> f64 {
        self.c * self.gamma_area
    }

    /// Pool capacity V0 / (c·|Γ|).
    pub fn m(&self) -> f64 {
        self.v0 / self.cg()
    }

    /// min{1, m}: the largest total membrane concentration a homogeneous state can reach.
    pub fn saturation(&self) -> f64 {
        self.m().min(1.0)
    }

    pub fn validate(&self) -> Result<(), ParameterError> {
        let all = [
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("a4", self.a4),
            ("a5", self.a5),
            ("a6", self.a6),
            ("a_neg6", self.a_neg6),
            ("d", self.d),
            ("gamma", self.gamma),
            ("V0", self.v0),
            ("c", self.c),
            ("gamma_area", self.gamma_area),
        ];
        for (name, value) in all {
            if !value.is_finite() {
                return Err(ParameterError::NonFinite { name });
            }
        }
        for (name, value) in all[..7].iter().chain([&("gamma", self.gamma)]) {
            if *value < 0.0 {
                return Err(ParameterError::Negative { name, value: *value });
            }
        }
        for (name, value) in [
            ("a2", self.a2),
            ("a5", self.a5),
            ("d", self.d),
            ("V0", self.v0),
            ("c", self.c),
            ("gamma_area", self.gamma_area),
        ] {
            if !(value > 0.0) {
                return Err(ParameterError::NotPositive { name, value });
            }
        }
        Ok(())
    }
}

impl Default for Parameters {
    fn default() -> Self {
        Self::baseline()
    }
}

/// Rates and scales in physical units (SI, concentrations in mol/m² or mol/m³).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionalParameters {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k_neg5: f64,
    pub b6: f64,
    pub b_neg6: f64,
    /// Total GEF surface density.
    pub g0bar: f64,
    pub du: f64,
    pub dv: f64,
    /// Cytosolic diffusion coefficient.
    pub d_cyt: f64,
    pub cmax: f64,
    /// Length scale in metres.
    pub r: f64,
    /// |B| / (|Γ| R), invariant under scaling of the cell.
    pub vol_over_area: f64,
    /// Initial cytosolic concentration.
    pub v_init: f64,
}

impl DimensionalParameters {
    pub fn validate(&self) -> Result<(), ParameterError> {
        let all = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("k5", self.k5),
            ("k_neg5", self.k_neg5),
            ("b6", self.b6),
            ("b_neg6", self.b_neg6),
            ("g0bar", self.g0bar),
            ("du", self.du),
            ("dv", self.dv),
            ("d_cyt", self.d_cyt),
            ("cmax", self.cmax),
            ("r", self.r),
            ("vol_over_area", self.vol_over_area),
            ("v_init", self.v_init),
        ];
        for (i, (name, value)) in all.into_iter().enumerate() {
            if !value.is_finite() {
                return Err(ParameterError::NonFinite { name });
            }
            if i < 2 {
                if value < 0.0 {
                    return Err(ParameterError::Negative { name, value });
                }
            } else if !(value > 0.0) {
                return Err(ParameterError::NotPositive { name, value });
            }
        }
        Ok(())
    }

    /// Cytosolic to lateral diffusion ratio.
    pub fn cytosolic_diffusion_ratio(&self) -> f64 {
        self.d_cyt / self.du
    }
}

/// Maps physical parameters to the dimensionless model, using the unit
/// length 1 m for the scaling and a unit-radius spherical domain for the
/// pool geometry (surface area 4π, volume 4π·vol_over_area).
pub fn nondimensionalize(dp: &DimensionalParameters) -> Result<Parameters, ParameterError> {
    dp.validate()?;
    // unit length 1 m, so its square drops out of every rate
    let k5_ratio = dp.k5 / dp.k_neg5;
    let a1 = dp.k1 * dp.g0bar / dp.du;
    let a3 = if dp.k1 > 0.0 {
        dp.k2 / dp.k1 * a1
    } else {
        dp.k2 * dp.g0bar / dp.du
    };
    let surface_area = 4.0 * PI;
    let p = Parameters {
        a1,
        a2: 1.0 / (k5_ratio * dp.cmax),
        a3,
        a4: dp.k3 / (dp.du * dp.cmax),
        a5: dp.k4 / dp.cmax,
        a6: dp.b6 * dp.cmax * dp.vol_over_area / dp.du,
        a_neg6: dp.b_neg6 / dp.du,
        d: dp.dv / dp.du,
        gamma: dp.r * dp.r,
        v0: dp.r * dp.v_init / dp.cmax,
        c: 1.0 / (surface_area * dp.vol_over_area),
        gamma_area: surface_area,
    };
    p.validate()?;
    Ok(p)
}

/// Net activation rate (a1 + (a3 − a1) u/(a2 + u)) v − a4 u/(a5 + u).
pub fn f(u: f64, v: f64, p: &Parameters) -> f64 {
    (p.a1 + (p.a3 - p.a1) * u / (p.a2 + u)) * v - p.a4 * u / (p.a5 + u)
}

/// Exchange flux a6 V (1 − w)_+ − a−6 v with w = u + v.
pub fn q(w: f64, v: f64, pool: f64, p: &Parameters) -> f64 {
    p.a6 * pool * (1.0 - w).max(0.0) - p.a_neg6 * v
}

/// Cytosolic pool V0 − c·total for a given membrane total ∫(u + v).
pub fn pool_from_integral(total: f64, p: &Parameters) -> f64 {
    p.v0 - p.c * total
}

/// Flux for a homogeneous state: the pool follows from w itself.
pub fn q0(w: f64, v: f64, p: &Parameters) -> f64 {
    q(w, v, p.v0 - p.cg() * w, p)
}

/// Flux with the pool frozen at `pool` and no saturation clamp.
pub fn q1(w: f64, v: f64, pool: f64, p: &Parameters) -> f64 {
    p.a6 * pool * (1.0 - w) - p.a_neg6 * v
}

/// (∂u f, ∂v f)
pub fn jac_f(u: f64, v: f64, p: &Parameters) -> (f64, f64) {
    let du = p.a2 * (p.a3 - p.a1) * v / (p.a2 + u).powi(2) - p.a4 * p.a5 / (p.a5 + u).powi(2);
    let dv = p.a1 + (p.a3 - p.a1) * u / (p.a2 + u);
    (du, dv)
}

/// (∂u q0, ∂v q0). Fails exactly at w = 1; above it only detachment remains.
pub fn jac_q0(w: f64, _v: f64, p: &Parameters) -> Result<(f64, f64), ParameterError> {
    if w == 1.0 {
        return Err(ParameterError::Kink);
    }
    let du = if w < 1.0 {
        -p.a6 * p.cg() * (1.0 + p.m() - 2.0 * w)
    } else {
        0.0
    };
    Ok((du, du - p.a_neg6))
}

/// (∂u q1, ∂v q1); constant in (u, v).
pub fn jac_q1(pool: f64, p: &Parameters) -> (f64, f64) {
    (-p.a6 * pool, -p.a6 * pool - p.a_neg6)
}

/// (∂u q, ∂v q) with the pool held fixed. At w = 1 the value from w < 1 is used.
pub fn jac_q(w: f64, pool: f64, p: &Parameters) -> (f64, f64) {
    let du = if w <= 1.0 { -p.a6 * pool } else { 0.0 };
    (du, du - p.a_neg6)
}

/// Quasi-steady split of the GEF between its complex with active GTPase and
/// the free form: (complex, free) with complex + free = g0bar.
pub fn qss_complex(u: f64, g0bar: f64, k5: f64) -> (f64, f64) {
    let x = k5 * u;
    if x.is_infinite() {
        return (g0bar, 0.0);
    }
    let free = g0bar / (1.0 + x);
    (g0bar - free, free)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn baseline_derived_quantities() {
        let p = Parameters::baseline();
        assert!(close(p.cg(), 3.0, 1e-15));
        assert!(close(p.m(), 10.0 / 3.0, 1e-15));
        assert_eq!(p.saturation(), 1.0);
        p.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = Parameters::baseline();
        p.a2 = 0.0;
        assert!(matches!(p.validate(), Err(ParameterError::NotPositive { name: "a2", .. })));
        let mut p = Parameters::baseline();
        p.a4 = -1.0;
        assert!(matches!(p.validate(), Err(ParameterError::Negative { name: "a4", .. })));
        let mut p = Parameters::baseline();
        p.gamma = f64::NAN;
        assert!(matches!(p.validate(), Err(ParameterError::NonFinite { name: "gamma" })));
    }

    #[test]
    fn f_vanishes_without_membrane_activator() {
        let p = Parameters::baseline();
        for v in [0.0, 0.3, 2.0] {
            assert_eq!(f(0.0, v, &p), 0.0);
        }
        let mut p = p;
        p.a1 = 0.7;
        assert!(close(f(0.0, 2.0, &p), 1.4, 1e-15));
    }

    #[test]
    fn q_examples() {
        let p = Parameters::baseline();
        assert!(close(q(1.0, 0.3, 10.0, &p), -0.3, 1e-15));
        assert!(close(q(1.5, 0.2, 10.0, &p), -0.2, 1e-15));
        assert!(close(q(0.5, 0.25, 10.0, &p), 0.25, 1e-15));
    }

    #[test]
    fn pool_examples() {
        let p = Parameters::baseline();
        assert_eq!(pool_from_integral(0.0, &p), 10.0);
        assert!(pool_from_integral(p.v0 / p.c, &p).abs() < 1e-14);
        assert!(close(pool_from_integral(4.0 * PI, &p), 7.0, 1e-14));
    }

    #[test]
    fn q0_at_exhaustion_and_saturation() {
        let p = Parameters::baseline();
        assert!(close(q0(p.m(), 0.4, &p), -0.4, 1e-14));
        assert!(close(q0(1.0, 0.4, &p), -0.4, 1e-15));
    }

    #[test]
    fn q1_has_no_clamp() {
        let p = Parameters::baseline();
        assert!(close(q1(1.0, 0.2, 7.0, &p), -0.2, 1e-15));
        assert!(close(q1(1.5, 0.2, 7.0, &p), 0.1 * 7.0 * -0.5 - 0.2, 1e-15));
        assert!(close(q1(0.4, 0.2, 7.0, &p), q(0.4, 0.2, 7.0, &p), 1e-15));
    }

    #[test]
    fn jac_q0_baseline_at_zero() {
        let p = Parameters::baseline();
        let (du, dv) = jac_q0(0.0, 0.0, &p).unwrap();
        assert!(close(du, -1.3, 1e-14));
        assert!(close(dv - du, -1.0, 1e-14));
        assert!(matches!(jac_q0(1.0, 0.1, &p), Err(ParameterError::Kink)));
    }

    #[test]
    fn jac_f_at_zero() {
        let mut p = Parameters::baseline();
        p.a1 = 0.25;
        assert_eq!(jac_f(0.0, 0.7, &p).1, 0.25);
    }

    #[test]
    fn jac_q_uses_interior_branch_at_kink() {
        let p = Parameters::baseline();
        assert_eq!(jac_q(1.0, 7.0, &p), jac_q(0.999, 7.0, &p));
        assert_eq!(jac_q(1.2, 7.0, &p), (0.0, -1.0));
    }

    #[test]
    fn qss_limits() {
        assert_eq!(qss_complex(0.0, 5.0, 2.0), (0.0, 5.0));
        let (m, g) = qss_complex(1e300, 5.0, 2.0);
        assert!(close(m, 5.0, 1e-15) && g < 1e-290);
        assert_eq!(qss_complex(f64::INFINITY, 5.0, 2.0), (5.0, 0.0));
    }

    #[test]
    fn nondimensionalize_ratios() {
        let dp = DimensionalParameters {
            k1: 2.0,
            k2: 2.0,
            k3: 1.0,
            k4: 1.0,
            k5: 1.0,
            k_neg5: 1.0,
            b6: 1.0,
            b_neg6: 1.0,
            g0bar: 1.0,
            du: 1e-3,
            dv: 1e-3,
            d_cyt: 1.0,
            cmax: 1.0,
            r: 1.0,
            vol_over_area: 1.0 / 3.0,
            v_init: 1.0,
        };
        let p = nondimensionalize(&dp).unwrap();
        assert_eq!(p.d, 1.0);
        assert_eq!(p.a3, p.a1);
        assert!(close(p.cg(), 3.0, 1e-15));
        let zero_k1 = DimensionalParameters { k1: 0.0, ..dp };
        let p0 = nondimensionalize(&zero_k1).unwrap();
        assert_eq!(p0.a1, 0.0);
        assert!(close(p0.a3, 2.0 * 1.0 / 1e-3, 1e-15));
        assert!(nondimensionalize(&DimensionalParameters { du: 0.0, ..dp }).is_err());
    }
}
