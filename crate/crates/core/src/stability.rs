//! Homogeneous steady states and their linear stability.
//!
//! The steady state is found on the curve f = 0, parametrised as v = v[u],
//! by bisection of the flux balance Φ(u). Perturbations orthogonal to the
//! constants leave the pool unchanged, so heterogeneous modes are governed by
//! the Jacobian with the pool frozen (`j1`) while homogeneous ones see the
//! pool respond (`j0`).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::StabilityError;
use crate::kinetics::{f, jac_f, jac_q0, jac_q1, Parameters};

pub type Matrix2 = [[f64; 2]; 2];

/// Relative gap below which two sides of a condition are reported as equal.
pub const EQUALITY_TOL: f64 = 1e-12;

const PHI_SCAN_POINTS: usize = 256;

#[derive(Debug, Clone, Serialize)]
pub struct SteadyState {
    pub u_star: f64,
    pub v_star: f64,
    /// Cytosolic pool at the steady state.
    #[serde(rename = "V_star")]
    pub pool_star: f64,
    pub u0_bracket: f64,
    pub u1_bracket: f64,
    /// Jacobian of (f, −f + q0).
    pub j0: Matrix2,
    /// Jacobian of (f, −f + q1).
    pub j1: Matrix2,
    /// Sign changes of Φ seen on the scan of [u0, u1].
    pub sign_changes: usize,
}

/// v on the curve f(u, v) = 0.
pub fn v_of_u(u: f64, p: &Parameters) -> f64 {
    let base = p.a1 * p.a2;
    if u == 0.0 {
        if base > 0.0 {
            return 0.0;
        }
        // a1·a2 = 0: the u factors cancel
        return p.a4 * p.a2 / (p.a5 * p.a3);
    }
    p.a4 * u * (p.a2 + u) / ((p.a5 + u) * (base + p.a3 * u))
}

/// Maximiser of v[u] on u > 0 (zero when a1 = 0).
pub fn u0(p: &Parameters) -> Result<f64, StabilityError> {
    if !(p.a2 > p.a5) {
        return Err(StabilityError::ConditionViolated {
            condition: "cdt:1",
            detail: format!("a2 = {} must exceed a5 = {}", p.a2, p.a5),
        });
    }
    let denom = p.a3 * (p.a2 - p.a5) - p.a1 * p.a2;
    if !(2.0 * p.a1 * p.a2 < p.a3 * (p.a2 - p.a5)) {
        return Err(StabilityError::ConditionViolated {
            condition: "cdt:4",
            detail: format!(
                "2·a1·a2 = {} must be below a3·(a2 − a5) = {}",
                2.0 * p.a1 * p.a2,
                p.a3 * (p.a2 - p.a5)
            ),
        });
    }
    if p.a1 == 0.0 {
        return Ok(0.0);
    }
    Ok(p.a1 * p.a2 * p.a5 / denom
        + p.a2 * (p.a1 * p.a5).sqrt() * ((p.a3 - p.a1) * (p.a2 - p.a5)).sqrt() / denom)
}

/// Flux balance a6(V0 − cG(u + v[u]))(1 − (u + v[u])) − a−6 v[u].
pub fn phi(u: f64, p: &Parameters) -> f64 {
    let v = v_of_u(u, p);
    let w = u + v;
    p.a6 * (p.v0 - p.cg() * w) * (1.0 - w) - p.a_neg6 * v
}

/// Bisection to full floating-point resolution; returns the best point seen.
fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut g_lo = g(lo);
    let mut best = (g_lo.abs(), lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid.abs() < best.0 {
            best = (g_mid.abs(), mid);
        }
        if g_mid == 0.0 {
            return mid;
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    let g_hi = g(hi);
    if g_hi.abs() < best.0 {
        hi
    } else {
        best.1
    }
}

/// Homogeneous steady state with u + v below min{1, m}.
pub fn find_steady_state(p: &Parameters) -> Result<SteadyState, StabilityError> {
    p.validate()?;
    if !(p.a3 > 0.0) {
        return Err(StabilityError::InvalidParameters(
            "a3 must be positive for v[u] to be defined".into(),
        ));
    }
    let s = p.saturation();
    // outside the unimodal regime v[u] is searched from zero
    let lo = u0(p).unwrap_or(0.0);
    let psi = |u: f64| u + v_of_u(u, p) - s;
    if psi(lo) >= 0.0 {
        return Err(StabilityError::BracketFailure(format!(
            "u0 + v[u0] = {} already reaches min{{1, m}} = {s}",
            lo + v_of_u(lo, p)
        )));
    }
    // u + v[u] ≥ u, so the saturation point lies below s
    let u1 = if psi(s) <= 0.0 {
        s
    } else {
        bisect(lo, s, psi)
    };

    let phi_lo = phi(lo, p);
    let phi_hi = phi(u1, p);
    let mut sign_changes = 0;
    let mut bracket = None;
    let mut prev = (lo, phi_lo);
    for i in 1..=PHI_SCAN_POINTS {
        let u = lo + (u1 - lo) * i as f64 / PHI_SCAN_POINTS as f64;
        let val = phi(u, p);
        if (val > 0.0) != (prev.1 > 0.0) || val == 0.0 {
            sign_changes += 1;
            if bracket.is_none() {
                bracket = Some((prev.0, u));
            }
        }
        prev = (u, val);
    }
    let (a, b) = bracket.ok_or(StabilityError::NoSteadyState {
        lo,
        hi: u1,
        phi_lo,
        phi_hi,
    })?;
    let u_star = if phi(a, p) == 0.0 {
        a
    } else {
        bisect(a, b, |u| phi(u, p))
    };
    let v_star = v_of_u(u_star, p);
    let w = u_star + v_star;
    let pool_star = p.v0 - p.cg() * w;

    let (fu, fv) = jac_f(u_star, v_star, p);
    let (q0u, q0v) = jac_q0(w, v_star, p)?;
    let (q1u, q1v) = jac_q1(pool_star, p);
    Ok(SteadyState {
        u_star,
        v_star,
        pool_star,
        u0_bracket: lo,
        u1_bracket: u1,
        j0: [[fu, fv], [-fu + q0u, -fv + q0v]],
        j1: [[fu, fv], [-fu + q1u, -fv + q1v]],
        sign_changes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Satisfied,
    /// Both sides agree to within [`EQUALITY_TOL`]; the strict inequality fails.
    Equality,
    Violated,
}

/// One inequality `lhs < rhs` with both sides exposed.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub status: ConditionStatus,
}

impl ConditionRecord {
    pub fn less_than(name: &str, lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let status = if (lhs - rhs).abs() <= EQUALITY_TOL * scale {
            ConditionStatus::Equality
        } else if lhs < rhs {
            ConditionStatus::Satisfied
        } else {
            ConditionStatus::Violated
        };
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            status,
        }
    }

    pub fn holds(&self) -> bool {
        self.status == ConditionStatus::Satisfied
    }
}

/// d above which the first sufficient instability condition (cdt:d1) holds.
pub fn d_threshold_1(p: &Parameters) -> f64 {
    let (a2, a3, a4, a5) = (p.a2, p.a3, p.a4, p.a5);
    let s = p.saturation();
    let a3sq = a3 * a3;
    2.0 * (a3 * (a3sq + 2.0) + (a2 + 1.0) * (a3sq + 1.0) * (p.a6 * p.v0 + p.a_neg6))
        * (a3sq + 2.0)
        * (a5 + 1.0).powi(2)
        / (s * a3sq * a4 * (a2 - a5) * (a3sq + 1.0))
}

/// d above which the second sufficient instability condition (cdt:d2) holds.
pub fn d_threshold_2(p: &Parameters) -> f64 {
    let (a2, a3, a4, a5) = (p.a2, p.a3, p.a4, p.a5);
    let s = p.saturation();
    let a3sq = a3 * a3;
    4.0 * (a3sq + 2.0).powi(2)
        * (a5 + 1.0).powi(2)
        * (a3sq * a4 * (a2 - a5) * s
            + 4.0 * (a3sq + 2.0) * p.a6 * p.v0 * (a2 + 1.0) * (a5 + 1.0).powi(2))
        / (a3 * a3sq * (a3sq + 1.0) * a4 * a4 * (a2 - a5).powi(2) * s * s)
}

/// Existence, stability and sufficient-instability conditions, in order
/// cdt:1 … cdt:8, cdt:d1, cdt:d2. Each is stored as `lhs < rhs`.
pub fn check_conditions(p: &Parameters) -> Vec<ConditionRecord> {
    let (a1, a2, a3, a4, a5, a6, an6) = (p.a1, p.a2, p.a3, p.a4, p.a5, p.a6, p.a_neg6);
    let s = p.saturation();
    let a3sq = a3 * a3;
    let cdt4 = (a3 * (a2 - a5) / (2.0 * a2))
        .min((a3sq * (a2 - a5).powi(2) / (a2 * a2 * a5)) * s * s / 256.0);
    let cdt8 = (s * a3 / (2.0 * a2 * (a3sq + 1.0)))
        .min(s * s * a3 * (a2 - a5) / (4.0 * a2 * (a2 + 1.0).powi(2) * (a3sq + 1.0)));
    vec![
        ConditionRecord::less_than("cdt:1", a5, a2),
        ConditionRecord::less_than("cdt:2", 4.0 * a2 * a4, a3 * a5 * s),
        ConditionRecord::less_than("cdt:3", 4.0 * a4 * a5 * an6, p.v0 * a2 * a3 * a6),
        ConditionRecord::less_than("cdt:4", a1, cdt4),
        ConditionRecord::less_than("cdt:5", 2.0 * a4 * (a2 - a5), a3 * a5 * a5),
        ConditionRecord::less_than("cdt:6", an6, a6 * p.cg() * (1.0 - p.m()).abs()),
        ConditionRecord::less_than("cdt:7", a1 * a2, a3 / (1.0 + a3sq)),
        ConditionRecord::less_than("cdt:8", a1, cdt8),
        ConditionRecord::less_than("cdt:d1", d_threshold_1(p), p.d),
        ConditionRecord::less_than("cdt:d2", d_threshold_2(p), p.d),
    ]
}

/// A signed quantity whose positivity (or negativity) is the condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Criterion {
    pub value: f64,
    pub holds: bool,
}

/// (trace < 0, det > 0) of the homogeneous Jacobian.
pub fn homogeneous_stability(j0: &Matrix2) -> (Criterion, Criterion) {
    let tr = j0[0][0] + j0[1][1];
    let det = det2(j0);
    (
        Criterion {
            value: tr,
            holds: tr < 0.0,
        },
        Criterion {
            value: det,
            holds: det > 0.0,
        },
    )
}

fn det2(j: &Matrix2) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuringBand {
    /// d·J[0][0] + J[1][1] > 0
    pub tu3: Criterion,
    /// (d·J[0][0] + J[1][1])² − 4d·det J > 0
    pub tu4: Criterion,
    /// Open band of unstable Laplace–Beltrami eigenvalues, when tu3 and tu4 hold.
    pub mu_minus: Option<f64>,
    pub mu_plus: Option<f64>,
}

impl TuringBand {
    pub fn contains(&self, lambda: f64) -> bool {
        matches!((self.mu_minus, self.mu_plus), (Some(lo), Some(hi)) if lo < lambda && lambda < hi)
    }
}

/// Heterogeneous instability conditions and the unstable band, scaled by γ.
pub fn turing_conditions(j1: &Matrix2, d: f64, gamma: f64) -> TuringBand {
    let b = d * j1[0][0] + j1[1][1];
    let det = det2(j1);
    let disc = b * b - 4.0 * d * det;
    let tu3 = Criterion {
        value: b,
        holds: b > 0.0,
    };
    let tu4 = Criterion {
        value: disc,
        holds: disc > 0.0,
    };
    let (mu_minus, mu_plus) = if tu3.holds && tu4.holds {
        let root = disc.sqrt();
        // the smaller root via the product of roots avoids cancellation
        let hi = gamma * (b + root) / (2.0 * d);
        let lo = gamma * gamma * det / (d * hi);
        (Some(lo), Some(hi))
    } else {
        (None, None)
    };
    TuringBand {
        tu3,
        tu4,
        mu_minus,
        mu_plus,
    }
}

/// Eigenvalues of −λ·diag(1, d) + γ·J, ordered by descending real part.
pub fn growth_rates(lambda: f64, j1: &Matrix2, d: f64, gamma: f64) -> [Complex64; 2] {
    let a = gamma * j1[0][0] - lambda;
    let e = gamma * j1[1][1] - d * lambda;
    let half_tr = 0.5 * (a + e);
    let det = a * e - gamma * gamma * j1[0][1] * j1[1][0];
    let disc = half_tr * half_tr - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        // stable evaluation of the root nearer zero
        let big = if half_tr >= 0.0 { half_tr + r } else { half_tr - r };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half_tr, im), Complex64::new(half_tr, -im)]
    }
}

/// Indices of eigenvalues strictly inside the unstable band. Entries with
/// |λ| ≤ 1e-8 (the constant mode) are skipped.
pub fn unstable_modes(ss: &SteadyState, d: f64, gamma: f64, eigenvalues: &[f64]) -> Vec<usize> {
    let band = turing_conditions(&ss.j1, d, gamma);
    eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l.abs() > 1e-8 && band.contains(l))
        .map(|(i, _)| i)
        .collect()
}

fn turing_predicate(j1: &Matrix2, d: f64) -> bool {
    let band = turing_conditions(j1, d, 1.0);
    band.tu3.holds && band.tu4.holds
}

/// Diffusion ratio at which tu3 ∧ tu4 switches on, by bisection on `d_range`
/// to absolute tolerance `tol`. Returns the endpoint where the predicate holds.
pub fn critical_d(j1: &Matrix2, d_range: (f64, f64), tol: f64) -> Result<f64, StabilityError> {
    let (mut lo, mut hi) = d_range;
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(StabilityError::InvalidParameters(format!(
            "need 0 < lo < hi and tol > 0, got [{lo}, {hi}], tol = {tol}"
        )));
    }
    let at_lo = turing_predicate(j1, lo);
    if at_lo == turing_predicate(j1, hi) {
        return Err(StabilityError::CriticalNotBracketed {
            lo,
            hi,
            value: at_lo,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if turing_predicate(j1, mid) == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if at_lo { lo } else { hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    OdeUnstable,
    StableHomogeneous,
    TuringUnstable,
}

/// Everything the analyzer reports for one parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct TuringReport {
    pub parameters: Parameters,
    pub cg: f64,
    pub m: f64,
    pub steady_state: SteadyState,
    pub conditions: Vec<ConditionRecord>,
    pub rd_tu1: Criterion,
    pub rd_tu2: Criterion,
    pub rd_tu3: Criterion,
    pub rd_tu4: Criterion,
    pub mu_minus: Option<f64>,
    pub mu_plus: Option<f64>,
    pub d_critical: Option<f64>,
    /// Sufficient d from the closed-form thresholds (max of both).
    pub d_sufficient: f64,
    /// Spherical-harmonic degrees l whose eigenvalue l(l+1)/r² falls in the band,
    /// for a sphere with the parameters' surface area.
    pub unstable_degrees: Vec<u32>,
    pub classification: Classification,
}

/// Range searched for the critical diffusion ratio.
pub const D_SEARCH_RANGE: (f64, f64) = (1.0, 1e9);

pub fn analyze(p: &Parameters) -> Result<TuringReport, StabilityError> {
    let ss = find_steady_state(p)?;
    let (tu1, tu2) = homogeneous_stability(&ss.j0);
    let band = turing_conditions(&ss.j1, p.d, p.gamma);
    let classification = if !(tu1.holds && tu2.holds) {
        Classification::OdeUnstable
    } else if band.tu3.holds && band.tu4.holds {
        Classification::TuringUnstable
    } else {
        Classification::StableHomogeneous
    };
    let d_critical = critical_d(&ss.j1, D_SEARCH_RANGE, 1e-9).ok();
    let radius_sq = p.gamma_area / (4.0 * std::f64::consts::PI);
    let mut unstable_degrees = Vec::new();
    if let Some(hi) = band.mu_plus {
        let mut l = 1u32;
        loop {
            let lambda = f64::from(l * (l + 1)) / radius_sq;
            if lambda >= hi {
                break;
            }
            if band.contains(lambda) {
                unstable_degrees.push(l);
            }
            l += 1;
        }
    }
    Ok(TuringReport {
        parameters: *p,
        cg: p.cg(),
        m: p.m(),
        conditions: check_conditions(p),
        rd_tu1: tu1,
        rd_tu2: tu2,
        rd_tu3: band.tu3,
        rd_tu4: band.tu4,
        mu_minus: band.mu_minus,
        mu_plus: band.mu_plus,
        d_critical,
        d_sufficient: d_threshold_1(p).max(d_threshold_2(p)),
        unstable_degrees,
        classification,
        steady_state: ss,
    })
}

/// Outcome of the random search for diffusion-driven instability at d = 1.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub draws: usize,
    /// Samples that passed every hypothesis filter and were tested.
    pub kept: usize,
    pub no_steady_state: usize,
    pub not_activator_substrate: usize,
    pub homogeneously_unstable: usize,
    /// Kept samples with tu3 (strict) and tu4 at d = 1.
    pub counterexamples: Vec<Parameters>,
    /// Kept samples with tu3 and tu4 at d = 1 + 1e-9.
    pub near_unit_violations: usize,
}

enum Draw {
    NoSteadyState,
    NotActivatorSubstrate,
    Unstable,
    Kept { violates: bool, near_violates: bool },
}

/// Log-uniform draw on [lo, hi].
fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Parameters for one scan draw: a_i in [1e-3, 1e3], V0 and c|Γ| in [0.1, 100].
pub fn scan_sample(seed: u64, index: u64) -> Parameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut a = [0.0; 7];
    for x in a.iter_mut() {
        *x = log_uniform(&mut rng, 1e-3, 1e3);
    }
    let v0 = log_uniform(&mut rng, 0.1, 100.0);
    let cg = log_uniform(&mut rng, 0.1, 100.0);
    let area = 4.0 * std::f64::consts::PI;
    Parameters {
        a1: a[0],
        a2: a[1],
        a3: a[2],
        a4: a[3],
        a5: a[4],
        a6: a[5],
        a_neg6: a[6],
        d: 1.0,
        gamma: 1.0,
        v0,
        c: cg / area,
        gamma_area: area,
    }
}

fn classify_draw(p: &Parameters) -> Draw {
    let Ok(ss) = find_steady_state(p) else {
        return Draw::NoSteadyState;
    };
    let [[fu, fv], [gu, gv]] = ss.j0;
    if !(fu > 0.0 && fv > 0.0 && gu < 0.0 && gv < 0.0) {
        return Draw::NotActivatorSubstrate;
    }
    let (tu1, tu2) = homogeneous_stability(&ss.j0);
    if !(tu1.holds && tu2.holds) {
        return Draw::Unstable;
    }
    let at = |d: f64| {
        let band = turing_conditions(&ss.j1, d, 1.0);
        band.tu3.holds && band.tu4.holds
    };
    Draw::Kept {
        violates: at(1.0),
        near_violates: at(1.0 + 1e-9),
    }
}

/// Draws random parameter sets until `trials` of them describe a stable
/// activator–substrate-depletion steady state, then checks that none of
/// those admits a Turing instability at d = 1. Stops after 1000·trials draws.
pub fn no_turing_scan(trials: usize, seed: u64) -> ScanReport {
    let mut report = ScanReport {
        draws: 0,
        kept: 0,
        no_steady_state: 0,
        not_activator_substrate: 0,
        homogeneously_unstable: 0,
        counterexamples: Vec::new(),
        near_unit_violations: 0,
    };
    let cap = trials.saturating_mul(1000);
    let batch = trials.max(64) * 8;
    while report.kept < trials && report.draws < cap {
        let start = report.draws as u64;
        let end = (report.draws + batch).min(cap) as u64;
        let outcomes: Vec<(Parameters, Draw)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let p = scan_sample(seed, i);
                let draw = classify_draw(&p);
                (p, draw)
            })
            .collect();
        for (p, draw) in outcomes {
            if report.kept == trials {
                break;
            }
            report.draws += 1;
            match draw {
                Draw::NoSteadyState => report.no_steady_state += 1,
                Draw::NotActivatorSubstrate => report.not_activator_substrate += 1,
                Draw::Unstable => report.homogeneously_unstable += 1,
                Draw::Kept {
                    violates,
                    near_violates,
                } => {
                    report.kept += 1;
                    if violates {
                        report.counterexamples.push(p);
                    }
                    if near_violates {
                        log::warn!("d = 1 + 1e-9 admits a band for {p:?}");
                        report.near_unit_violations += 1;
                    }
                }
            }
        }
    }
    report
}

/// f at the steady state, for residual checks.
pub fn steady_residuals(ss: &SteadyState, p: &Parameters) -> (f64, f64) {
    (f(ss.u_star, ss.v_star, p), phi(ss.u_star, p))
}
