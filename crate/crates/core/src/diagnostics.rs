//! Run-time monitors: moments, entropy, the Bony functional, sup-densities
//! along characteristics, velocity tails, boundary flux probes and the
//! max-f envelope.
//!
//! The sup over time of `f#(t, x, v) = f(t, x + t v1, v)` is sampled after
//! every full step and kept as a running maximum.

use crate::collision::{sweep, CollisionKernel};
use crate::error::{Error, Result};
use crate::fields::{compute_moments, DistributionField, Moments, PhaseGrid};
use crate::haldane::{entropy, Filling};
use crate::solver::{transport_shift, Observer, Solver, SolverState, StepInfo};

/// `int |v - v*|^2 B chi f f* F(f') F(f'*) dx dv dv* dtheta`.
pub fn bony_functional(
    f: &DistributionField,
    grid: &PhaseGrid,
    kernel: &CollisionKernel,
    filling: Filling,
) -> f64 {
    sweep(f, grid, kernel, filling, true).bony.unwrap_or(0.0)
}

/// Discrete entropy production `(H(after) - H(before)) / dt`.
pub fn entropy_production(
    before: &DistributionField,
    after: &DistributionField,
    grid: &PhaseGrid,
    alpha: f64,
    dt: f64,
) -> f64 {
    (entropy(after, grid, alpha).value - entropy(before, grid, alpha).value) / dt
}

/// Running maximum of `f#` over the recorded times, per (x, v) node.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpHistory {
    pub nx: usize,
    pub nv: usize,
    pub values: Vec<f64>,
}

impl SharpHistory {
    pub fn new(grid: &PhaseGrid) -> Self {
        Self {
            nx: grid.nx,
            nv: grid.nv,
            values: vec![0.0; grid.len()],
        }
    }

    /// Folds in `f(t, x + t v1, v)` for the field at time `f.time`.
    pub fn record(&mut self, f: &DistributionField, grid: &PhaseGrid) {
        let sharp = transport_shift(f, grid, -f.time);
        for (h, &v) in self.values.iter_mut().zip(&sharp.values) {
            *h = h.max(v);
        }
    }

    /// `max_x` of the history, per velocity node.
    pub fn sup_over_x(&self, grid: &PhaseGrid) -> Vec<f64> {
        let n_v = grid.n_v();
        let mut out = vec![0.0f64; n_v];
        for row in self.values.chunks(n_v) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o = o.max(v);
            }
        }
        out
    }
}

/// `int sup_{t, x} f# dv`.
pub fn sup_density(history: &SharpHistory, grid: &PhaseGrid) -> f64 {
    let sup = history.sup_over_x(grid);
    grid.active().iter().map(|&k| sup[k] * grid.v_weights[k]).sum()
}

/// `int_{|x - x0| < delta} sup_t f# dx dv`, the local-in-x sup density.
pub fn windowed_sup_density(history: &SharpHistory, grid: &PhaseGrid, x0: f64, delta: f64) -> f64 {
    let n_v = grid.n_v();
    let mut total = 0.0;
    for (x, &xn) in grid.x_nodes.iter().enumerate() {
        let d = (xn - x0).rem_euclid(1.0);
        if d.min(1.0 - d) >= delta {
            continue;
        }
        let row = &history.values[x * n_v..(x + 1) * n_v];
        total += grid
            .active()
            .iter()
            .map(|&k| row[k] * grid.v_weights[k])
            .sum::<f64>()
            * grid.dx;
    }
    total
}

/// Velocity tails of the sup-history above `|v| = lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailMass {
    pub lambda: f64,
    /// `int_{|v| > lambda} sup f# dv`.
    pub plain: f64,
    /// `int_{|v| > lambda} |v| sup f# dv`.
    pub weighted: f64,
}

pub fn tail_mass(history: &SharpHistory, grid: &PhaseGrid, lambda: f64) -> Result<TailMass> {
    if !(lambda >= 0.0) {
        return Err(Error::domain("tail_mass", format!("lambda = {lambda} must be >= 0")));
    }
    let sup = history.sup_over_x(grid);
    let mut plain = 0.0;
    let mut weighted = 0.0;
    for &k in grid.active() {
        let [a, b] = grid.velocity(k);
        let r = a.hypot(b);
        if r > lambda {
            plain += sup[k] * grid.v_weights[k];
            weighted += r * sup[k] * grid.v_weights[k];
        }
    }
    Ok(TailMass {
        lambda,
        plain,
        weighted,
    })
}

/// Default tail radii `{2, 4, j/2, 3j/4}`, sorted and deduplicated.
pub fn default_lambdas(j: f64) -> Vec<f64> {
    let mut l = vec![2.0, 4.0, 0.5 * j, 0.75 * j];
    l.sort_by(f64::total_cmp);
    l.dedup();
    l
}

/// Boundary-station integrals at the x-node `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluxProbe {
    /// `int v1^2 f(0, v) dv`.
    pub momentum_flux: f64,
    /// `int v1 f(0, v) dv`.
    pub momentum: f64,
}

pub fn energy_flux_probe(f: &DistributionField, grid: &PhaseGrid) -> FluxProbe {
    let row = f.row(0);
    let mut p = FluxProbe::default();
    for &k in grid.active() {
        let v1 = grid.velocity(k)[0];
        let w = row[k] * grid.v_weights[k];
        p.momentum += v1 * w;
        p.momentum_flux += v1 * v1 * w;
    }
    p
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `max |residual| / max |y|`.
    pub rel_residual: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let worst = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0f64, f64::max);
    Some(LinearFit {
        slope,
        intercept,
        rel_residual: if scale > 0.0 { worst / scale } else { 0.0 },
    })
}

/// Slope of `ln y` against `ln x`, skipping non-positive values.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|f| f.slope)
}

/// Fit of the decrease of `max f` away from `1/alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeFit {
    Fitted {
        /// Slope of `1/alpha - max f` against t on the window.
        b1_hat: f64,
        /// First recorded time with `max f <= 1/alpha - band`, if reached.
        t_m_hat: Option<f64>,
        window: usize,
    },
    /// The run did not start inside the band `(1/alpha - band, 1/alpha]`.
    NotApplicable,
}

/// Fits `1/alpha - max f` on the initial window: from the start up to and
/// including the first time `max f` leaves the band of width `band` below
/// `1/alpha` (the whole series if it never does).
pub fn envelope_fit(times: &[f64], max_f: &[f64], alpha: f64, band: f64) -> EnvelopeFit {
    let upper = 1.0 / alpha;
    match max_f.first() {
        Some(&m0) if m0 > upper - band => {}
        _ => return EnvelopeFit::NotApplicable,
    }
    let exit = max_f.iter().position(|&m| m <= upper - band);
    let end = exit.map_or(max_f.len(), |i| i + 1);
    let gaps: Vec<f64> = max_f[..end].iter().map(|m| upper - m).collect();
    match linear_fit(&times[..end], &gaps) {
        Some(fit) => EnvelopeFit::Fitted {
            b1_hat: fit.slope,
            t_m_hat: exit.map(|i| times[i]),
            window: end,
        },
        None => EnvelopeFit::NotApplicable,
    }
}

/// Which optional monitors a recorder evaluates.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub bony: bool,
    pub lambdas: Vec<f64>,
    /// Centre and half-width of the windowed sup-density probe.
    pub window: Option<(f64, f64)>,
    /// Band width below `1/alpha` for the envelope fit.
    pub band: f64,
}

impl DiagnosticsConfig {
    pub fn with_defaults(j: f64) -> Self {
        Self {
            bony: true,
            lambdas: default_lambdas(j),
            window: None,
            band: 0.5,
        }
    }
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub moments: Moments,
    pub entropy: f64,
    /// `(H(t) - H(t - dt)) / dt`; zero on the initial row.
    pub entropy_production: f64,
    pub bony: f64,
    pub bony_integral: f64,
    pub sup_density: f64,
    pub windowed_sup_density: Option<f64>,
    pub tails: Vec<TailMass>,
    pub max_f: f64,
    pub min_f: f64,
    pub picard_residual: f64,
    pub raw_defect: f64,
    pub projection_l1: f64,
    pub projection_scale: f64,
    /// Largest relative drift of mass, momenta and energy since the start.
    pub moment_drift: f64,
    pub flux: FluxProbe,
    /// `int_0^t int v1 f(s, 0, v) dv ds`.
    pub momentum_integral: f64,
    /// `int_0^t int v1^2 f(s, 0, v) dv ds`.
    pub momentum_flux_integral: f64,
}

/// Relative drift of `m` from `m0`. Momenta are scaled by `sqrt(mass energy)`,
/// their Cauchy-Schwarz bound, since they may start at zero.
pub fn moment_drift(m0: &Moments, m: &Moments) -> f64 {
    let p_scale = (m0.mass * m0.energy).sqrt();
    let rel = |a: f64, b: f64, s: f64| if s > 0.0 { (b - a).abs() / s } else { (b - a).abs() };
    rel(m0.mass, m.mass, m0.mass)
        .max(rel(m0.momentum1, m.momentum1, p_scale))
        .max(rel(m0.momentum2, m.momentum2, p_scale))
        .max(rel(m0.energy, m.energy, m0.energy))
}

/// Time series of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsReport {
    pub records: Vec<DiagnosticsRecord>,
}

impl DiagnosticsReport {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn max_f_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.max_f).collect()
    }

    pub fn max_moment_drift(&self) -> f64 {
        self.records.iter().map(|r| r.moment_drift).fold(0.0, f64::max)
    }

    pub fn max_entropy_production(&self) -> f64 {
        self.records
            .iter()
            .skip(1)
            .map(|r| r.entropy_production)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn envelope_fit(&self, alpha: f64, band: f64) -> EnvelopeFit {
        envelope_fit(&self.times(), &self.max_f_series(), alpha, band)
    }

    /// Line through `(t, int_0^t B dt)` over all rows.
    pub fn bony_fit(&self) -> Option<LinearFit> {
        let ys: Vec<f64> = self.records.iter().map(|r| r.bony_integral).collect();
        linear_fit(&self.times(), &ys)
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }
}

/// Values carried from one recorded row to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carry {
    pub entropy: f64,
    pub flux: FluxProbe,
    pub bony: f64,
    pub bony_integral: f64,
    pub momentum_integral: f64,
    pub momentum_flux_integral: f64,
}

/// Recorder internals needed to continue after a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RecorderState {
    pub history: SharpHistory,
    pub initial: Moments,
    pub carry: Carry,
}

/// Observer that evaluates the configured monitors after every step.
pub struct Recorder {
    grid: PhaseGrid,
    kernel: CollisionKernel,
    filling: Filling,
    alpha: f64,
    config: DiagnosticsConfig,
    history: SharpHistory,
    initial: Option<Moments>,
    carry: Option<Carry>,
    pub report: DiagnosticsReport,
}

impl Recorder {
    pub fn new(solver: &Solver, config: DiagnosticsConfig) -> Self {
        Self {
            grid: solver.grid.clone(),
            kernel: solver.kernel.clone(),
            filling: solver.filling,
            alpha: solver.params.alpha,
            config,
            history: SharpHistory::new(&solver.grid),
            initial: None,
            carry: None,
            report: DiagnosticsReport::default(),
        }
    }

    /// Recorder continuing a checkpointed run; its report starts empty.
    pub fn resume(solver: &Solver, config: DiagnosticsConfig, state: RecorderState) -> Result<Self> {
        if state.history.values.len() != solver.grid.len() {
            return Err(Error::Shape(format!(
                "sup history has {} values, grid has {}",
                state.history.values.len(),
                solver.grid.len()
            )));
        }
        let mut r = Self::new(solver, config);
        r.history = state.history;
        r.initial = Some(state.initial);
        r.carry = Some(state.carry);
        Ok(r)
    }

    pub fn state(&self) -> Option<RecorderState> {
        Some(RecorderState {
            history: self.history.clone(),
            initial: self.initial?,
            carry: self.carry?,
        })
    }

    pub fn history(&self) -> &SharpHistory {
        &self.history
    }

    pub fn into_report(self) -> DiagnosticsReport {
        self.report
    }
}

impl Observer for Recorder {
    fn observe(&mut self, state: &SolverState, info: Option<&StepInfo>) -> Result<()> {
        let f = &state.field;
        let grid = &self.grid;
        let moments = compute_moments(f, grid);
        let initial = *self.initial.get_or_insert(moments);
        let h = entropy(f, grid, self.alpha).value;
        let bony = if self.config.bony {
            bony_functional(f, grid, &self.kernel, self.filling)
        } else {
            0.0
        };
        self.history.record(f, grid);
        let tails = self
            .config
            .lambdas
            .iter()
            .map(|&l| tail_mass(&self.history, grid, l))
            .collect::<Result<Vec<_>>>()?;
        let flux = energy_flux_probe(f, grid);
        let (entropy_production, carry) = match (info, self.carry) {
            (Some(info), Some(c)) => {
                let dt = info.dt;
                let trap = |a: f64, b: f64| 0.5 * dt * (a + b);
                (
                    (h - c.entropy) / dt,
                    Carry {
                        entropy: h,
                        flux,
                        bony,
                        bony_integral: c.bony_integral + trap(c.bony, bony),
                        momentum_integral: c.momentum_integral + trap(c.flux.momentum, flux.momentum),
                        momentum_flux_integral: c.momentum_flux_integral
                            + trap(c.flux.momentum_flux, flux.momentum_flux),
                    },
                )
            }
            _ => (
                0.0,
                Carry {
                    entropy: h,
                    flux,
                    bony,
                    bony_integral: 0.0,
                    momentum_integral: 0.0,
                    momentum_flux_integral: 0.0,
                },
            ),
        };
        self.carry = Some(carry);
        self.report.records.push(DiagnosticsRecord {
            step: state.step_index,
            time: f.time,
            moments,
            entropy: h,
            entropy_production,
            bony,
            bony_integral: carry.bony_integral,
            sup_density: sup_density(&self.history, grid),
            windowed_sup_density: self
                .config
                .window
                .map(|(x0, d)| windowed_sup_density(&self.history, grid, x0, d)),
            tails,
            max_f: f.max(),
            min_f: f.min_active(grid),
            picard_residual: info
                .and_then(|i| i.picard_residuals.last().copied())
                .unwrap_or(0.0),
            raw_defect: info.map_or(0.0, |i| i.raw_defect),
            projection_l1: info.map_or(0.0, |i| i.projection_l1),
            projection_scale: info.map_or(1.0, |i| i.projection_scale),
            moment_drift: moment_drift(&initial, &moments),
            flux,
            momentum_integral: carry.momentum_integral,
            momentum_flux_integral: carry.momentum_flux_integral,
        });
        Ok(())
    }
}

/// Runs `solver` from `initial` with a recorder attached.
pub fn run(
    solver: &Solver,
    initial: DistributionField,
    config: DiagnosticsConfig,
) -> Result<(SolverState, DiagnosticsReport)> {
    let mut rec = Recorder::new(solver, config);
    let state = solver.run(initial, &mut rec)?;
    Ok((state, rec.into_report()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_grid, SimulationParams};

    #[test]
    fn fit_recovers_a_line() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 0.5).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept - 0.5).abs() < 1e-12);
        assert!(f.rel_residual < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs = [2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 5.0 * x.powf(-1.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn envelope_outside_band_is_not_applicable() {
        let t = [0.0, 0.1, 0.2];
        assert_eq!(envelope_fit(&t, &[0.5, 0.4, 0.3], 0.5, 0.5), EnvelopeFit::NotApplicable);
        match envelope_fit(&t, &[1.9, 1.8, 1.4], 0.5, 0.5) {
            EnvelopeFit::Fitted { b1_hat, t_m_hat, window } => {
                assert!(b1_hat > 0.0);
                assert_eq!(t_m_hat, Some(0.2));
                assert_eq!(window, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tails_of_constant_history() {
        let p = SimulationParams { j: 4.0, nv: 32, nx: 1, ..Default::default() };
        let g = make_grid(&p).unwrap();
        let f = DistributionField::from_velocity_fn(&g, |_| 0.5);
        let mut h = SharpHistory::new(&g);
        h.record(&f, &g);
        assert!((sup_density(&h, &g) - 0.5 * g.ball_measure()).abs() < 1e-12);
        assert_eq!(tail_mass(&h, &g, 4.0).unwrap().plain, 0.0);
        let a = tail_mass(&h, &g, 1.0).unwrap();
        let b = tail_mass(&h, &g, 2.0).unwrap();
        assert!(a.plain > b.plain && a.weighted > b.weighted);
        assert!(tail_mass(&h, &g, -1.0).is_err());
    }

    #[test]
    fn flux_probe_of_isotropic_field() {
        let p = SimulationParams { j: 4.0, nv: 16, nx: 4, ..Default::default() };
        let g = make_grid(&p).unwrap();
        let f = DistributionField::from_velocity_fn(&g, |v| (-(v[0] * v[0] + v[1] * v[1])).exp());
        let probe = energy_flux_probe(&f, &g);
        assert!(probe.momentum.abs() < 1e-15);
        assert!(probe.momentum_flux > 0.0);
        let zero = energy_flux_probe(&DistributionField::zeros(&g), &g);
        assert_eq!(zero, FluxProbe::default());
    }
}
