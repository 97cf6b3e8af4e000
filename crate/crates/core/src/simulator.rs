//! Semi-implicit time stepping of the membrane system with a well-mixed pool.
//!
//! Per step the kinetics are linearised around the previous nodal values:
//! Jacobian terms enter the 2n×2n system through weighted mass matrices and
//! the remainders enter the right-hand side as nodal loads. The pool is
//! updated explicitly from the previous membrane totals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::heterogeneity;
use crate::error::SimError;
use crate::fem::{BiCgStab, FemOperators, Preconditioner};
use crate::kinetics::{f, jac_f, jac_q, q, Parameters};
use crate::mesh::SurfaceMesh;
use crate::sparse::SparseMatrix;
use crate::stability::find_steady_state;

/// Nodal values below this trigger a warning.
pub const NEGATIVE_WARN: f64 = -1e-8;
/// Nodal values below this abort the run.
pub const NEGATIVE_ABORT: f64 = -1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Cytosolic pool.
    pub pool: f64,
    pub t: f64,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Independent uniform draws per vertex for u and v.
    Random { lo: f64, hi: f64 },
    Constant { u: f64, v: f64 },
    /// Homogeneous steady state plus uniform noise in [−amplitude, amplitude].
    SteadyStatePlusNoise { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dt: f64,
    pub t_end: f64,
    pub linear_tol: f64,
    /// Early stop once (‖Δu‖∞ + ‖Δv‖∞)/dt falls below this.
    pub stationarity_tol: f64,
    pub snapshot_interval: f64,
    pub seed: u64,
    pub ic: InitialCondition,
    /// End the run at the first stationary step. When false the run always
    /// reaches `t_end` and `converged` reflects the last step only.
    pub stop_when_stationary: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 25.0,
            linear_tol: 1e-10,
            stationarity_tol: 1e-6,
            snapshot_interval: 1.0,
            seed: 0,
            ic: InitialCondition::Random { lo: 0.0, hi: 0.02 },
            stop_when_stationary: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("linear_tol", self.linear_tol),
            ("stationarity_tol", self.stationarity_tol),
            ("snapshot_interval", self.snapshot_interval),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SimError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if self.dt >= self.t_end {
            return Err(SimError::InvalidConfig(format!(
                "dt = {} must be smaller than t_end = {}",
                self.dt, self.t_end
            )));
        }
        match self.ic {
            InitialCondition::Random { lo, hi } if !(lo <= hi) => Err(SimError::InvalidConfig(
                format!("random initial range [{lo}, {hi}] is empty"),
            )),
            InitialCondition::SteadyStatePlusNoise { amplitude } if !(amplitude >= 0.0) => Err(
                SimError::InvalidConfig(format!("noise amplitude {amplitude} must be nonnegative")),
            ),
            _ => Ok(()),
        }
    }
}

/// Builds the initial state. The pool is set from the initial membrane totals.
pub fn initial_state(
    ops: &FemOperators,
    cfg: &RunConfig,
    p: &Parameters,
) -> Result<State, SimError> {
    cfg.validate()?;
    let n = ops.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (u, v) = match cfg.ic {
        InitialCondition::Random { lo, hi } => {
            let mut draw = || lo + (hi - lo) * rng.random::<f64>();
            let u: Vec<f64> = (0..n).map(|_| draw()).collect();
            let v: Vec<f64> = (0..n).map(|_| draw()).collect();
            (u, v)
        }
        InitialCondition::Constant { u, v } => (vec![u; n], vec![v; n]),
        InitialCondition::SteadyStatePlusNoise { amplitude } => {
            let ss = find_steady_state(p)
                .map_err(|e| SimError::InvalidConfig(format!("no steady state to perturb: {e}")))?;
            let mut noise = || amplitude * (2.0 * rng.random::<f64>() - 1.0);
            let u: Vec<f64> = (0..n).map(|_| ss.u_star + noise()).collect();
            let v: Vec<f64> = (0..n).map(|_| ss.v_star + noise()).collect();
            (u, v)
        }
    };
    let total = ops.integrate(&u)? + ops.integrate(&v)?;
    Ok(State {
        u,
        v,
        pool: p.v0 - p.c * total,
        t: 0.0,
        step: 0,
    })
}

/// One row of the per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    pub int_u: f64,
    pub int_v: f64,
    pub pool: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    /// Relative L2 deviation of u from its mean.
    pub heterogeneity: f64,
    /// (‖u − u_prev‖∞ + ‖v − v_prev‖∞)/dt; zero for the initial row.
    pub stationarity: f64,
    pub linear_iterations: usize,
}

/// Records for the initial state and every completed step.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TimeSeries {
    pub records: Vec<StepRecord>,
}

impl TimeSeries {
    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "step,t,int_u,int_v,V,min_u,max_u,min_v,max_v,heterogeneity,stationarity,linear_iterations\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.10e},{:.16e},{:.16e},{:.16e},{:.10e},{:.10e},{:.10e},{:.10e},{:.6e},{:.6e},{}\n",
                r.step,
                r.t,
                r.int_u,
                r.int_v,
                r.pool,
                r.min_u,
                r.max_u,
                r.min_v,
                r.max_v,
                r.heterogeneity,
                r.stationarity,
                r.linear_iterations
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: State,
    pub series: TimeSeries,
    /// The last step met the stationarity criterion.
    pub converged: bool,
    pub negative_warnings: usize,
}

/// Reusable stepper: owns the block system storage for one mesh.
pub struct Simulator<'a> {
    mesh: &'a SurfaceMesh,
    ops: &'a FemOperators,
    params: Parameters,
    system: SparseMatrix,
    // positions of the four blocks for each entry of the scalar pattern
    uu: Vec<usize>,
    uv: Vec<usize>,
    vu: Vec<usize>,
    vv: Vec<usize>,
    w_fu: Vec<f64>,
    w_fv: Vec<f64>,
    w_gu: Vec<f64>,
    w_gv: Vec<f64>,
    pub solver: BiCgStab,
    // previous step's input, for extrapolating the initial guess
    history: Option<(u64, Vec<f64>)>,
}

impl<'a> Simulator<'a> {
    pub fn new(mesh: &'a SurfaceMesh, ops: &'a FemOperators, params: Parameters) -> Result<Self, SimError> {
        params.validate()?;
        let pattern = ops.pattern();
        let n = pattern.dim();
        let nnz = pattern.nnz();
        let (rp, ci) = (pattern.row_ptr(), pattern.col_idx());
        let mut row_ptr = Vec::with_capacity(2 * n + 1);
        let mut col_idx = Vec::with_capacity(4 * nnz);
        let (mut uu, mut uv, mut vu, mut vv) =
            (vec![0; nnz], vec![0; nnz], vec![0; nnz], vec![0; nnz]);
        row_ptr.push(0);
        for (left, right) in [(&mut uu, &mut uv), (&mut vu, &mut vv)] {
            for r in 0..n {
                for k in rp[r]..rp[r + 1] {
                    left[k] = col_idx.len();
                    col_idx.push(ci[k]);
                }
                for k in rp[r]..rp[r + 1] {
                    right[k] = col_idx.len();
                    col_idx.push(n + ci[k]);
                }
                row_ptr.push(col_idx.len());
            }
        }
        let values = vec![0.0; col_idx.len()];
        let system = SparseMatrix::from_csr(2 * n, 2 * n, row_ptr, col_idx, values)?;
        Ok(Self {
            mesh,
            ops,
            params,
            system,
            uu,
            uv,
            vu,
            vv,
            w_fu: vec![0.0; nnz],
            w_fv: vec![0.0; nnz],
            w_gu: vec![0.0; nnz],
            w_gv: vec![0.0; nnz],
            history: None,
            solver: BiCgStab {
                preconditioner: Preconditioner::Ilu0,
                ..BiCgStab::new(1e-10, 20 * n)
            },
        })
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    /// The block matrix of the most recent step.
    pub fn system(&self) -> &SparseMatrix {
        &self.system
    }

    /// Advances one step of length `dt`; returns the new state and the
    /// number of linear iterations.
    pub fn step(&mut self, state: &State, dt: f64) -> Result<(State, usize), SimError> {
        let p = self.params;
        let n = self.ops.dim();
        if state.u.len() != n || state.v.len() != n {
            return Err(SimError::InvalidConfig(format!(
                "state has {} / {} values for a mesh with {n} vertices",
                state.u.len(),
                state.v.len()
            )));
        }
        let g = p.gamma;
        let mut fu = vec![0.0; n];
        let mut fv = vec![0.0; n];
        let mut gu = vec![0.0; n];
        let mut gv = vec![0.0; n];
        let mut load_f = vec![0.0; n];
        let mut load_q = vec![0.0; n];
        for i in 0..n {
            let (u, v) = (state.u[i], state.v[i]);
            let w = u + v;
            let (dfu, dfv) = jac_f(u, v, &p);
            let (dqu, dqv) = jac_q(w, state.pool, &p);
            fu[i] = g * dfu;
            fv[i] = g * dfv;
            gu[i] = g * (dfu - dqu);
            gv[i] = g * (dfv - dqv);
            load_f[i] = g * (f(u, v, &p) - dfu * u - dfv * v);
            load_q[i] = g * (q(w, v, state.pool, &p) - dqu * u - dqv * v);
        }
        self.ops.weighted_mass_into(self.mesh, &fu, &mut self.w_fu)?;
        self.ops.weighted_mass_into(self.mesh, &fv, &mut self.w_fv)?;
        self.ops.weighted_mass_into(self.mesh, &gu, &mut self.w_gu)?;
        self.ops.weighted_mass_into(self.mesh, &gv, &mut self.w_gv)?;

        let mass = self.ops.mass().values();
        let stiff = self.ops.stiffness().values();
        let inv_dt = 1.0 / dt;
        let vals = self.system.values_mut();
        for k in 0..mass.len() {
            vals[self.uu[k]] = inv_dt * mass[k] + stiff[k] - self.w_fu[k];
            vals[self.uv[k]] = -self.w_fv[k];
            vals[self.vu[k]] = self.w_gu[k];
            vals[self.vv[k]] = inv_dt * mass[k] + p.d * stiff[k] + self.w_gv[k];
        }

        let mut top = vec![0.0; n];
        let mut bottom = vec![0.0; n];
        for i in 0..n {
            top[i] = inv_dt * state.u[i] + load_f[i];
            bottom[i] = inv_dt * state.v[i] - load_f[i] + load_q[i];
        }
        let mut rhs = vec![0.0; 2 * n];
        self.ops.mass().mul_vec_into(&top, &mut rhs[..n]);
        self.ops.mass().mul_vec_into(&bottom, &mut rhs[n..]);

        let mut x = Vec::with_capacity(2 * n);
        x.extend_from_slice(&state.u);
        x.extend_from_slice(&state.v);
        let current = x.clone();
        if let Some((prev_step, prev)) = &self.history {
            if *prev_step + 1 == state.step {
                for (xi, pi) in x.iter_mut().zip(prev) {
                    *xi = 2.0 * *xi - pi;
                }
            }
        }
        self.history = Some((state.step, current));
        let stats = self
            .solver
            .solve_into(&self.system, &rhs, &mut x)
            .map_err(|source| SimError::Solve {
                step: state.step + 1,
                source,
            })?;

        // pool lags one step behind the membrane totals
        let total = self.ops.integrate(&state.u)? + self.ops.integrate(&state.v)?;
        let v_new = x.split_off(n);
        Ok((
            State {
                u: x,
                v: v_new,
                pool: p.v0 - p.c * total,
                t: state.t + dt,
                step: state.step + 1,
            },
            stats.iterations,
        ))
    }
}

/// Convenience single step; builds a fresh [`Simulator`].
pub fn step(
    state: &State,
    mesh: &SurfaceMesh,
    ops: &FemOperators,
    p: &Parameters,
    dt: f64,
) -> Result<State, SimError> {
    Ok(Simulator::new(mesh, ops, *p)?.step(state, dt)?.0)
}

fn extremes(x: &[f64]) -> (f64, f64, usize) {
    let mut lo = (f64::INFINITY, 0);
    let mut hi = f64::NEG_INFINITY;
    for (i, &v) in x.iter().enumerate() {
        if v < lo.0 {
            lo = (v, i);
        }
        hi = hi.max(v);
    }
    (lo.0, hi, lo.1)
}

fn record(ops: &FemOperators, s: &State, stationarity: f64, iterations: usize) -> Result<StepRecord, SimError> {
    let (min_u, max_u, _) = extremes(&s.u);
    let (min_v, max_v, _) = extremes(&s.v);
    Ok(StepRecord {
        step: s.step,
        t: s.t,
        int_u: ops.integrate(&s.u)?,
        int_v: ops.integrate(&s.v)?,
        pool: s.pool,
        min_u,
        max_u,
        min_v,
        max_v,
        heterogeneity: heterogeneity(&s.u, ops),
        stationarity,
        linear_iterations: iterations,
    })
}

fn check_values(s: &State, warnings: &mut usize) -> Result<(), SimError> {
    for (field, values) in [("u", &s.u), ("v", &s.v)] {
        if let Some(vertex) = values.iter().position(|x| !x.is_finite()) {
            return Err(SimError::NonFinite {
                field,
                vertex,
                step: s.step,
                t: s.t,
            });
        }
        let (min, _, vertex) = extremes(values);
        if min < NEGATIVE_ABORT {
            return Err(SimError::Negative {
                field,
                value: min,
                vertex,
                step: s.step,
                t: s.t,
            });
        }
        if min < NEGATIVE_WARN {
            if *warnings == 0 {
                log::warn!("{field} = {min:e} at vertex {vertex} (step {}, t = {})", s.step, s.t);
            }
            *warnings += 1;
        }
    }
    Ok(())
}

/// Fixed-step loop from the initial state to `cfg.t_end`, by default
/// stopping early once stationary. `snapshot` sees the initial state, every state at a
/// multiple of `cfg.snapshot_interval`, and the final state.
pub fn run(
    mesh: &SurfaceMesh,
    ops: &FemOperators,
    p: &Parameters,
    cfg: &RunConfig,
    snapshot: &mut dyn FnMut(&State),
) -> Result<RunOutput, SimError> {
    let initial = initial_state(ops, cfg, p)?;
    run_from(mesh, ops, p, cfg, initial, snapshot)
}

/// As [`run`], starting from a given state.
pub fn run_from(
    mesh: &SurfaceMesh,
    ops: &FemOperators,
    p: &Parameters,
    cfg: &RunConfig,
    initial: State,
    snapshot: &mut dyn FnMut(&State),
) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let mut sim = Simulator::new(mesh, ops, *p)?;
    sim.solver.tol = cfg.linear_tol;
    let mut warnings = 0;
    check_values(&initial, &mut warnings)?;
    let mut series = TimeSeries::default();
    series.records.push(record(ops, &initial, 0.0, 0)?);
    snapshot(&initial);

    let total_steps = (cfg.t_end / cfg.dt).round() as u64;
    let steps_per_snapshot = ((cfg.snapshot_interval / cfg.dt).round() as u64).max(1);
    let mut state = initial;
    let mut converged = false;
    let mut last_snapshot = 0;
    while state.step < total_steps {
        let (next, iterations) = sim.step(&state, cfg.dt)?;
        check_values(&next, &mut warnings)?;
        let change = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let stationarity = (change(&next.u, &state.u) + change(&next.v, &state.v)) / cfg.dt;
        series.records.push(record(ops, &next, stationarity, iterations)?);
        state = next;
        if state.step % steps_per_snapshot == 0 {
            snapshot(&state);
            last_snapshot = state.step;
        }
        converged = stationarity < cfg.stationarity_tol;
        if converged && cfg.stop_when_stationary {
            break;
        }
    }
    if last_snapshot != state.step {
        snapshot(&state);
    }
    Ok(RunOutput {
        state,
        series,
        converged,
        negative_warnings: warnings,
    })
}

/// Largest relative violation of V^{m+1} = V0 − c·∫(u^m + v^m), measured as
/// |V^{m+1}/c + ∫(u^m + v^m) − V0/c| / (V0/c).
pub fn conservation_check(series: &TimeSeries, p: &Parameters) -> f64 {
    let volume = 1.0 / p.c;
    let reference = p.v0 * volume;
    series
        .records
        .windows(2)
        .map(|w| (w[1].pool * volume + w[0].int_u + w[0].int_v - reference).abs() / reference)
        .fold(0.0, f64::max)
}

/// The same linearised scheme for the spatially homogeneous system, with
/// the pool following the lagged membrane total. Returns (u, v) after each step.
pub fn ode_trajectory(p: &Parameters, u0: f64, v0: f64, dt: f64, steps: usize) -> Vec<(f64, f64)> {
    let g = p.gamma;
    let (mut u, mut v) = (u0, v0);
    let mut pool = p.v0 - p.cg() * (u + v);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let w = u + v;
        let (dfu, dfv) = jac_f(u, v, p);
        let (dqu, dqv) = jac_q(w, pool, p);
        let lf = g * (f(u, v, p) - dfu * u - dfv * v);
        let lq = g * (q(w, v, pool, p) - dqu * u - dqv * v);
        let a = [
            [1.0 / dt - g * dfu, -g * dfv],
            [g * (dfu - dqu), 1.0 / dt + g * (dfv - dqv)],
        ];
        let b = [u / dt + lf, v / dt - lf + lq];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let un = (b[0] * a[1][1] - a[0][1] * b[1]) / det;
        let vn = (a[0][0] * b[1] - a[1][0] * b[0]) / det;
        pool = p.v0 - p.cg() * w;
        u = un;
        v = vn;
        out.push((u, v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig {
            dt: 1.0,
            t_end: 0.5,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            ic: InitialCondition::Random { lo: 1.0, hi: 0.0 },
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn random_initial_pool_bounds() {
        let mesh = icosphere(2).unwrap();
        let ops = FemOperators::new(&mesh).unwrap();
        let p = Parameters::baseline();
        let s = initial_state(&ops, &RunConfig::default(), &p).unwrap();
        assert!(s.pool <= 10.0 && s.pool >= 10.0 - 3.0 * 0.04);
        assert!(s.u.iter().chain(&s.v).all(|&x| (0.0..=0.02).contains(&x)));
        let again = initial_state(&ops, &RunConfig::default(), &p).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn block_pattern_is_consistent() {
        let mesh = icosphere(1).unwrap();
        let ops = FemOperators::new(&mesh).unwrap();
        let sim = Simulator::new(&mesh, &ops, Parameters::baseline()).unwrap();
        let n = mesh.vertex_count();
        assert_eq!(sim.system().nrows(), 2 * n);
        assert_eq!(sim.system().nnz(), 4 * ops.pattern().nnz());
    }
}
