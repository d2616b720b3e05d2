//! Time integration: Strang splitting of periodic free streaming and an
//! exponential collision step.
//!
//! The collision step freezes the rates and solves the per-node linear ODE
//! `dg/dt = (1 - alpha g) G - g L` exactly,
//! `g(dt) = g_inf + (f - g_inf) exp(-(alpha G + L) dt)` with
//! `g_inf = G / (alpha G + L)`. Since `g(dt)` is a convex combination of `f`
//! and `g_inf <= 1/alpha`, the range `[0, 1/alpha]` is kept for every `dt`.
//! The first Picard sweep freezes the rates at the start value, later sweeps
//! at the midpoint `(f + g)/2` of the step.

use std::f64::consts::PI;

use crate::collision::{
    collision_rates, conservative_projection_weighted, logistic_projection, relative_defect, CollisionKernel, Increment,
};
use crate::error::{Error, Result};
use crate::fields::{make_grid, DistributionField, PhaseGrid, SimulationParams};
use crate::haldane::Filling;

/// Field and bookkeeping carried from step to step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub field: DistributionField,
    pub step_index: usize,
    /// L1 changes between successive Picard iterates of the last step.
    pub picard_residuals: Vec<f64>,
}

impl SolverState {
    pub fn new(field: DistributionField) -> Self {
        Self {
            field,
            step_index: 0,
            picard_residuals: Vec::new(),
        }
    }
}

/// What happened inside one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub picard_residuals: Vec<f64>,
    /// Largest relative moment defect of the collision increment before projection.
    pub raw_defect: f64,
    /// L1 norm of the conservative correction that was applied.
    pub projection_l1: f64,
    /// Fraction of the conservative correction applied (1 unless it had to be damped).
    pub projection_scale: f64,
}

/// Receives the state after every step (and once before the first).
pub trait Observer {
    fn observe(&mut self, state: &SolverState, info: Option<&StepInfo>) -> Result<()>;
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &SolverState, _: Option<&StepInfo>) -> Result<()> {
        Ok(())
    }
}

/// Free streaming over `dt`: `f(x, v) <- f(x - v1 dt, v)` with periodic
/// linear interpolation in x.
pub fn transport_shift(f: &DistributionField, grid: &PhaseGrid, dt: f64) -> DistributionField {
    let mut out = f.clone();
    if grid.nx == 1 {
        return out;
    }
    let n_v = grid.n_v();
    let nx = grid.nx as i64;
    for &k in grid.active() {
        let v1 = grid.velocity(k)[0];
        let s = v1 * dt / grid.dx;
        let m = s.floor();
        let theta = s - m;
        let m = (m as i64).rem_euclid(nx);
        for i in 0..nx {
            let a = f.values[((i - m).rem_euclid(nx) as usize) * n_v + k];
            let b = f.values[((i - m - 1).rem_euclid(nx) as usize) * n_v + k];
            let v = a + theta * (b - a);
            out.values[i as usize * n_v + k] = v.clamp(a.min(b), a.max(b));
        }
    }
    out
}

/// Collision step without conservative projection.
#[derive(Debug, Clone)]
pub struct CollisionOutcome {
    pub field: DistributionField,
    pub picard_residuals: Vec<f64>,
}

/// One exponential collision step of length `dt` with up to `picard_iters`
/// rate evaluations, stopping early once the L1 change falls below `picard_tol`.
pub fn exponential_collision_step(
    f: &DistributionField,
    grid: &PhaseGrid,
    kernel: &CollisionKernel,
    filling: Filling,
    dt: f64,
    picard_iters: usize,
    picard_tol: f64,
) -> CollisionOutcome {
    let alpha = filling.alpha();
    let upper = 1.0 / alpha;
    let n_v = grid.n_v();
    let mut g = f.clone();
    let mut residuals = Vec::new();
    for it in 0..picard_iters.max(1) {
        let frozen = if it == 0 {
            f.clone()
        } else {
            let mut m = f.clone();
            for (a, b) in m.values.iter_mut().zip(&g.values) {
                *a = 0.5 * (*a + b);
            }
            m
        };
        let rates = collision_rates(&frozen, grid, kernel, filling);
        let mut next = f.clone();
        for x in 0..grid.nx {
            for &k in grid.active() {
                let i = x * n_v + k;
                let f0 = f.values[i];
                let gain = rates.gain_env[i] * filling.structure_factor(frozen.values[i]) / PI;
                let loss = rates.loss[i] / PI;
                let rate = alpha * gain + loss;
                if rate > 0.0 {
                    let g_inf = (gain / rate).min(upper);
                    let v = f0 + (g_inf - f0) * -(-rate * dt).exp_m1();
                    next.values[i] = v.clamp(f0.min(g_inf), f0.max(g_inf));
                }
            }
        }
        if it > 0 {
            let r = next.l1_distance(&g, grid);
            residuals.push(r);
            g = next;
            if r < picard_tol {
                break;
            }
        } else {
            g = next;
        }
    }
    CollisionOutcome {
        field: g,
        picard_residuals: residuals,
    }
}

/// Range check: `0 <= f <= 1/alpha` (strictly positive when `strict`) on the
/// ball and exactly zero off it.
pub fn check_range(f: &DistributionField, grid: &PhaseGrid, alpha: f64, strict: bool, step: usize) -> Result<()> {
    let upper = 1.0 / alpha;
    let n_v = grid.n_v();
    for x in 0..grid.nx {
        let row = f.row(x);
        for (k, &value) in row.iter().enumerate() {
            let ok = if grid.is_active(k) {
                value <= upper && if strict { value > 0.0 } else { value >= 0.0 }
            } else {
                value == 0.0
            };
            if !ok {
                return Err(Error::RangeViolation {
                    step,
                    x,
                    v: k % n_v,
                    value,
                    upper,
                });
            }
        }
    }
    Ok(())
}

/// The configured integrator.
#[derive(Debug, Clone)]
pub struct Solver {
    pub params: SimulationParams,
    pub grid: PhaseGrid,
    pub kernel: CollisionKernel,
    pub filling: Filling,
}

impl Solver {
    pub fn new(params: &SimulationParams) -> Result<Self> {
        let grid = make_grid(params)?;
        let kernel = CollisionKernel::new(params, params.profile, &grid)?;
        Ok(Self {
            params: params.clone(),
            grid,
            kernel,
            filling: params.filling_factor(),
        })
    }

    /// Collision step followed, if enabled, by the conservative projection.
    /// The logistic form is tried first; if its Newton solve stalls, the linear
    /// `g (1 - alpha g)`-weighted correction is used, damped until the range holds.
    pub fn collide(&self, f: &DistributionField, dt: f64) -> Result<(DistributionField, StepInfo)> {
        let p = &self.params;
        let out = exponential_collision_step(
            f,
            &self.grid,
            &self.kernel,
            self.filling,
            dt,
            p.picard_iters,
            p.picard_tol,
        );
        let raw = Increment::between(f, &out.field);
        let raw_defect = relative_defect(&raw, &self.grid);
        let mut info = StepInfo {
            dt,
            picard_residuals: out.picard_residuals,
            raw_defect,
            projection_l1: 0.0,
            projection_scale: 1.0,
        };
        if !p.conservative_projection {
            return Ok((out.field, info));
        }

        let g = out.field;
        if let Some((field, l1)) = logistic_projection(f, &g, &self.grid, p.alpha)? {
            info.projection_l1 = l1;
            return Ok((field, info));
        }
        // Fallback: linear weighted correction, scaled back until the range holds.
        let weight: Vec<f64> = g.values.iter().map(|&v| v * (1.0 - p.alpha * v)).collect();
        let proj = conservative_projection_weighted(&raw, &self.grid, &weight)?;
        let correction: Vec<f64> = proj
            .increment
            .values
            .iter()
            .zip(&raw.values)
            .map(|(a, b)| a - b)
            .collect();
        let upper = 1.0 / p.alpha;
        let mut scale = 1.0;
        for _ in 0..60 {
            let candidate: Vec<f64> = g.values.iter().zip(&correction).map(|(a, c)| a + scale * c).collect();
            let ok = self.grid.active().iter().all(|&k| {
                (0..self.grid.nx).all(|x| {
                    let i = x * self.grid.n_v() + k;
                    let v = candidate[i];
                    v <= upper && (v > 0.0 || g.values[i] == 0.0)
                })
            });
            if ok {
                info.projection_l1 = proj.correction_l1 * scale;
                info.projection_scale = scale;
                let mut field = g;
                field.values = candidate;
                return Ok((field, info));
            }
            scale *= 0.5;
        }
        info.projection_scale = 0.0;
        Ok((g, info))
    }

    /// One Strang step: half transport, collision, half transport.
    pub fn step(&self, state: &mut SolverState, dt: f64, strict: bool) -> Result<StepInfo> {
        let half = transport_shift(&state.field, &self.grid, 0.5 * dt);
        let (collided, info) = self.collide(&half, dt)?;
        let mut next = transport_shift(&collided, &self.grid, 0.5 * dt);
        state.step_index += 1;
        next.time = self.time_of(state.step_index);
        check_range(&next, &self.grid, self.params.alpha, strict, state.step_index)?;
        state.field = next;
        state.picard_residuals = info.picard_residuals.clone();
        Ok(info)
    }

    /// Time after `n` steps: multiples of `dt`, the last one cut to `t_end`.
    pub fn time_of(&self, n: usize) -> f64 {
        (n as f64 * self.params.dt).min(self.params.t_end)
    }

    /// Advances `state` to `t_end`, notifying `observer` before the first and
    /// after every step.
    pub fn run_from(&self, mut state: SolverState, observer: &mut dyn Observer) -> Result<SolverState> {
        state.field.check_shape(&self.grid)?;
        let strict = state.field.min_active(&self.grid) > 0.0;
        check_range(&state.field, &self.grid, self.params.alpha, false, state.step_index)?;
        if state.step_index == 0 {
            observer.observe(&state, None)?;
        }
        let n = self.params.n_steps();
        while state.step_index < n {
            let t = self.time_of(state.step_index);
            let dt = self.time_of(state.step_index + 1) - t;
            let info = self.step(&mut state, dt, strict)?;
            observer.observe(&state, Some(&info))?;
        }
        Ok(state)
    }

    pub fn run(&self, initial: DistributionField, observer: &mut dyn Observer) -> Result<SolverState> {
        self.run_from(SolverState::new(initial), observer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::compute_moments;

    fn params() -> SimulationParams {
        SimulationParams {
            nx: 8,
            nv: 12,
            ntheta: 8,
            j: 4.0,
            ..Default::default()
        }
    }

    #[test]
    fn uniform_field_is_unchanged_by_transport() {
        let p = params();
        let g = make_grid(&p).unwrap();
        let f = DistributionField::from_velocity_fn(&g, |v| 0.3 + 0.01 * v[0]);
        assert_eq!(transport_shift(&f, &g, 0.37).values, f.values);
    }

    #[test]
    fn lattice_shift_permutes_nodes() {
        let p = params();
        let g = make_grid(&p).unwrap();
        let f = DistributionField::from_fn(&g, |x, v| 1.0 + (2.0 * PI * x).sin() * 0.1 * v[0].cos());
        // Nodes sit at half-integer multiples of dv, so v1 dt / dx is an
        // integer for every v1 when dt = 2 dx / dv.
        let dt = 2.0 * g.dx / g.dv;
        let out = transport_shift(&f, &g, dt);
        let n_v = g.n_v();
        for &k in g.active() {
            let s = (g.velocity(k)[0] * dt / g.dx).round() as isize;
            for x in 0..g.nx {
                let src = g.x_index(x as isize - s);
                assert!((out.values[x * n_v + k] - f.values[src * n_v + k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transport_keeps_mass() {
        let p = params();
        let g = make_grid(&p).unwrap();
        let f = DistributionField::from_fn(&g, |x, v| (1.0 + 0.5 * (2.0 * PI * x).cos()) * (-0.5 * (v[0] * v[0] + v[1] * v[1])).exp());
        let out = transport_shift(&f, &g, 0.123);
        let (a, b) = (compute_moments(&f, &g).mass, compute_moments(&out, &g).mass);
        assert!((a - b).abs() < 1e-14 * a);
    }

    #[test]
    fn gain_free_node_decays_exponentially() {
        let p = SimulationParams { nx: 1, ..params() };
        let s = Solver::new(&p).unwrap();
        // Two occupied nodes only: each sees loss from the other but no gain
        // at itself unless the post-collision pair lands on occupied nodes.
        let mut f = DistributionField::zeros(&s.grid);
        let act = s.grid.active();
        let (a, b) = (act[act.len() / 2], act[act.len() / 2 + 3]);
        f.values[a] = 0.5;
        f.values[b] = 0.5;
        let rates = collision_rates(&f, &s.grid, &s.kernel, s.filling);
        let out = exponential_collision_step(&f, &s.grid, &s.kernel, s.filling, 0.2, 1, 0.0);
        if rates.gain_env[a] == 0.0 && rates.loss[a] > 0.0 {
            let expect = 0.5 * (-rates.loss[a] / PI * 0.2).exp();
            assert!((out.field.values[a] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_node_moves_down() {
        let p = SimulationParams { nx: 1, ..params() };
        let s = Solver::new(&p).unwrap();
        let mut f = DistributionField::from_velocity_fn(&s.grid, |v| 0.8 * (-0.5 * (v[0] * v[0] + v[1] * v[1])).exp());
        let k = s.grid.active()[s.grid.active().len() / 2];
        f.values[k] = 1.0 / p.alpha;
        let out = exponential_collision_step(&f, &s.grid, &s.kernel, s.filling, 0.1, 2, 0.0);
        assert!(out.field.values[k] < 1.0 / p.alpha);
    }

    #[test]
    fn huge_time_step_stays_in_range() {
        let p = SimulationParams { nx: 4, dt: 1000.0, t_end: 2000.0, ..params() };
        let s = Solver::new(&p).unwrap();
        let f = DistributionField::from_fn(&s.grid, |x, v| {
            1.9 * (-(v[0] - 1.0).powi(2) - v[1] * v[1]).exp() * (1.0 + 0.05 * (2.0 * PI * x).cos()) / 1.05
        });
        let out = s.run(f, &mut NoObserver).unwrap();
        assert_eq!(out.step_index, 2);
        assert!(out.field.max() <= 2.0);
    }
}
