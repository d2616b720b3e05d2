//! Parameters, the phase-space grid and the distribution field.
//!
//! The velocity domain is the square `[-j, j]^2` sampled at cell centres; nodes
//! with `|v| > j` are masked (zero weight, zero value), which realises the
//! radial cut-off `psi_j`. The x-grid is node based and periodic on `[0, 1)`.

use std::f64::consts::PI;

use crate::collision::KernelProfile;
use crate::error::{Error, Result, Violation};
use crate::haldane::{Filling, FillingMode};

/// Physical, numerical and time-stepping parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParams {
    /// Statistics parameter, `0 < alpha <= 1` (1 = fermions).
    pub alpha: f64,
    /// Kernel ceiling `0 <= B <= b0`.
    pub b0: f64,
    /// Relative-speed cut-off: `B = 0` for `|v - v*| < gamma`.
    pub gamma: f64,
    /// Angular cut-off: `B = 0` for `|cos| < gamma'` or `1 - |cos| < gamma'`.
    pub gamma_prime: f64,
    /// Required lower bound on `int B dtheta` above the speed cut-off.
    pub c_b: f64,
    /// Truncation level: velocity-ball radius and regularisation index of `F_j`.
    pub j: f64,
    pub nx: usize,
    pub nv: usize,
    pub ntheta: usize,
    pub dt: f64,
    pub t_end: f64,
    pub picard_iters: usize,
    pub picard_tol: f64,
    /// Repair the discrete collision invariants after every collision step.
    pub conservative_projection: bool,
    /// Angular shape of the collision kernel.
    pub profile: KernelProfile,
    /// Filling factor used in the collision operator.
    pub filling: FillingMode,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            b0: 1.0,
            gamma: 0.1,
            gamma_prime: 0.1,
            c_b: 1.0,
            j: 6.0,
            nx: 1,
            nv: 24,
            ntheta: 8,
            dt: 0.01,
            t_end: 1.0,
            picard_iters: 2,
            picard_tol: 1e-10,
            conservative_projection: true,
            profile: KernelProfile::Indicator,
            filling: FillingMode::Truncated,
        }
    }
}

impl SimulationParams {
    /// Every invariant violation, keyed by parameter name.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, key: &str, msg: &str| {
            if !ok {
                out.push(Violation::new(key, msg));
            }
        };
        check(
            self.alpha > 0.0 && self.alpha <= 1.0,
            "alpha",
            "alpha out of (0,1]",
        );
        check(self.b0 > 0.0, "b0", "b0 must be > 0");
        check(self.gamma > 0.0, "gamma", "gamma must be > 0");
        check(
            self.gamma_prime > 0.0,
            "gamma_prime",
            "gamma_prime must be > 0",
        );
        check(
            self.gamma_prime < 0.5,
            "gamma_prime",
            "gamma_prime must be < 1/2",
        );
        check(self.c_b > 0.0, "c_b", "c_b must be > 0");
        check(self.j >= 1.0, "j", "j must be >= 1");
        check(self.j > self.gamma, "j", "j must exceed gamma");
        check(self.nx >= 1, "nx", "nx must be >= 1");
        check(self.nv >= 2, "nv", "nv must be >= 2");
        check(self.ntheta >= 2, "ntheta", "ntheta must be >= 2");
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", "dt must be > 0");
        check(self.t_end >= 0.0, "t_end", "t_end must be >= 0");
        check(self.picard_iters >= 1, "picard_iters", "picard_iters must be >= 1");
        check(self.picard_tol >= 0.0, "picard_tol", "picard_tol must be >= 0");
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    /// Upper end of the admissible range, `1/alpha`.
    pub fn f_max(&self) -> f64 {
        1.0 / self.alpha
    }

    /// Clamp level of the initial data, `1/alpha - 1/j`.
    pub fn clamp_level(&self) -> f64 {
        1.0 / self.alpha - 1.0 / self.j
    }

    /// The filling factor selected by `filling`.
    pub fn filling_factor(&self) -> Filling {
        match self.filling {
            FillingMode::Truncated => Filling::truncated(self.alpha, self.j),
            FillingMode::Exact => Filling::exact(self.alpha),
        }
    }

    /// Number of time steps needed to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Phase-space mesh: periodic x-nodes, masked Cartesian velocity nodes and
/// uniform angle nodes on the full circle.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    pub nx: usize,
    pub nv: usize,
    pub ntheta: usize,
    pub j: f64,
    pub dx: f64,
    pub dv: f64,
    pub dtheta: f64,
    pub x_nodes: Vec<f64>,
    /// 1-D velocity node coordinates (shared by both components).
    pub v_axis: Vec<f64>,
    /// Quadrature weight of each of the `nv * nv` velocity nodes (`dv^2` or 0).
    pub v_weights: Vec<f64>,
    pub theta_nodes: Vec<f64>,
    /// `dtheta` on admissible angles, 0 inside the angular cut-off bands.
    pub theta_weights: Vec<f64>,
    active: Vec<usize>,
}

impl PhaseGrid {
    /// Total number of velocity nodes, masked ones included.
    pub fn n_v(&self) -> usize {
        self.nv * self.nv
    }

    pub fn len(&self) -> usize {
        self.nx * self.n_v()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Velocity node index for component indices `(i1, i2)`.
    #[inline]
    pub fn v_index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.nv + i2
    }

    #[inline]
    pub fn velocity(&self, k: usize) -> [f64; 2] {
        [self.v_axis[k / self.nv], self.v_axis[k % self.nv]]
    }

    #[inline]
    pub fn is_active(&self, k: usize) -> bool {
        self.v_weights[k] > 0.0
    }

    /// Indices of unmasked velocity nodes, in increasing order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Periodic wrap of an x-node index.
    #[inline]
    pub fn x_index(&self, i: isize) -> usize {
        i.rem_euclid(self.nx as isize) as usize
    }

    /// Index of the velocity node mirrored through `v -> -v`.
    #[inline]
    pub fn mirror(&self, k: usize) -> usize {
        let (i1, i2) = (k / self.nv, k % self.nv);
        self.v_index(self.nv - 1 - i1, self.nv - 1 - i2)
    }

    /// Sum of the velocity weights (quadrature of 1 over the ball).
    pub fn ball_measure(&self) -> f64 {
        self.v_weights.iter().sum()
    }

    /// Sum of the angle weights (measure of the admissible angle set).
    pub fn admissible_theta_measure(&self) -> f64 {
        self.theta_weights.iter().sum()
    }
}

/// `true` when the angle lies in the admissible band `gamma' < |cos| < 1 - gamma'`.
#[inline]
pub fn angle_admissible(cos_abs: f64, gamma_prime: f64) -> bool {
    cos_abs > gamma_prime && 1.0 - cos_abs > gamma_prime
}

/// Build the phase grid for `params`.
pub fn make_grid(params: &SimulationParams) -> Result<PhaseGrid> {
    params.validate()?;
    if params.nv < 4 {
        return Err(Error::GridUnderResolved { nv: params.nv });
    }
    let (nx, nv, nt, j) = (params.nx, params.nv, params.ntheta, params.j);
    let dx = 1.0 / nx as f64;
    let dv = 2.0 * j / nv as f64;
    let dtheta = 2.0 * PI / nt as f64;

    let x_nodes = (0..nx).map(|i| i as f64 * dx).collect();
    let v_axis: Vec<f64> = (0..nv).map(|i| -j + (i as f64 + 0.5) * dv).collect();

    let mut v_weights = vec![0.0; nv * nv];
    let mut active = Vec::new();
    for i1 in 0..nv {
        for i2 in 0..nv {
            let r2 = v_axis[i1] * v_axis[i1] + v_axis[i2] * v_axis[i2];
            if r2 <= j * j {
                let k = i1 * nv + i2;
                v_weights[k] = dv * dv;
                active.push(k);
            }
        }
    }

    let theta_nodes: Vec<f64> = (0..nt).map(|k| (k as f64 + 0.5) * dtheta).collect();
    let theta_weights = theta_nodes
        .iter()
        .map(|&t: &f64| {
            if angle_admissible(t.cos().abs(), params.gamma_prime) {
                dtheta
            } else {
                0.0
            }
        })
        .collect();

    Ok(PhaseGrid {
        nx,
        nv,
        ntheta: nt,
        j,
        dx,
        dv,
        dtheta,
        x_nodes,
        v_axis,
        v_weights,
        theta_nodes,
        theta_weights,
        active,
    })
}

/// Occupation density sampled on the phase grid, stored row-major in
/// `(x, v1, v2)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    pub nx: usize,
    pub nv: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DistributionField {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self {
            nx: grid.nx,
            nv: grid.nv,
            values: vec![0.0; grid.len()],
            time: 0.0,
        }
    }

    /// Field from a function of `(x, v)`, masked to the velocity ball.
    pub fn from_fn(grid: &PhaseGrid, mut f: impl FnMut(f64, [f64; 2]) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for (ix, &x) in grid.x_nodes.iter().enumerate() {
            for &k in grid.active() {
                out.values[ix * grid.n_v() + k] = f(x, grid.velocity(k));
            }
        }
        out
    }

    /// x-uniform field from a function of `v`.
    pub fn from_velocity_fn(grid: &PhaseGrid, mut g: impl FnMut([f64; 2]) -> f64) -> Self {
        let profile: Vec<f64> = (0..grid.n_v())
            .map(|k| {
                if grid.is_active(k) {
                    g(grid.velocity(k))
                } else {
                    0.0
                }
            })
            .collect();
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.nx {
            values.extend_from_slice(&profile);
        }
        Self {
            nx: grid.nx,
            nv: grid.nv,
            values,
            time: 0.0,
        }
    }

    pub fn n_v(&self) -> usize {
        self.nv * self.nv
    }

    #[inline]
    pub fn at(&self, x: usize, k: usize) -> f64 {
        self.values[x * self.n_v() + k]
    }

    /// Velocity profile at x-node `x`.
    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.n_v();
        &self.values[x * n..(x + 1) * n]
    }

    pub fn row_mut(&mut self, x: usize) -> &mut [f64] {
        let n = self.n_v();
        &mut self.values[x * n..(x + 1) * n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum over unmasked nodes.
    pub fn min_active(&self, grid: &PhaseGrid) -> f64 {
        let mut m = f64::INFINITY;
        for x in 0..self.nx {
            let row = self.row(x);
            for &k in grid.active() {
                m = m.min(row[k]);
            }
        }
        m
    }

    /// `int |f - g| dx dv`.
    pub fn l1_distance(&self, other: &Self, grid: &PhaseGrid) -> f64 {
        let mut s = 0.0;
        for x in 0..self.nx {
            let (a, b) = (self.row(x), other.row(x));
            for &k in grid.active() {
                s += (a[k] - b[k]).abs() * grid.v_weights[k];
            }
        }
        s * grid.dx
    }

    pub fn l1_norm(&self, grid: &PhaseGrid) -> f64 {
        let mut s = 0.0;
        for x in 0..self.nx {
            let a = self.row(x);
            for &k in grid.active() {
                s += a[k].abs() * grid.v_weights[k];
            }
        }
        s * grid.dx
    }

    pub fn check_shape(&self, grid: &PhaseGrid) -> Result<()> {
        if self.nx != grid.nx || self.nv != grid.nv || self.values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "field is {}x{}^2 ({} values), grid is {}x{}^2",
                self.nx,
                self.nv,
                self.values.len(),
                grid.nx,
                grid.nv
            )));
        }
        Ok(())
    }

    /// The field reflected through `v -> -v`.
    pub fn reflected(&self, grid: &PhaseGrid) -> Self {
        let mut out = self.clone();
        for x in 0..self.nx {
            let src = self.row(x);
            let dst = out.row_mut(x);
            for k in 0..src.len() {
                dst[grid.mirror(k)] = src[k];
            }
        }
        out
    }
}

/// Mass, momentum and energy per unit slab.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub mass: f64,
    pub momentum1: f64,
    pub momentum2: f64,
    pub energy: f64,
}

impl Moments {
    /// Bulk velocity `(p1, p2) / mass`; zero for an empty field.
    pub fn bulk_velocity(&self) -> [f64; 2] {
        if self.mass > 0.0 {
            [self.momentum1 / self.mass, self.momentum2 / self.mass]
        } else {
            [0.0, 0.0]
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.mass, self.momentum1, self.momentum2, self.energy]
    }
}

pub fn compute_moments(f: &DistributionField, grid: &PhaseGrid) -> Moments {
    let mut m = [0.0; 4];
    for x in 0..f.nx {
        let row = f.row(x);
        for &k in grid.active() {
            let w = grid.v_weights[k] * row[k];
            let [v1, v2] = grid.velocity(k);
            m[0] += w;
            m[1] += w * v1;
            m[2] += w * v2;
            m[3] += w * (v1 * v1 + v2 * v2);
        }
    }
    Moments {
        mass: m[0] * grid.dx,
        momentum1: m[1] * grid.dx,
        momentum2: m[2] * grid.dx,
        energy: m[3] * grid.dx,
    }
}

/// `min(f0, 1/alpha - 1/j)` restricted to the velocity ball.
pub fn clamp_initial_data(
    f0: &DistributionField,
    params: &SimulationParams,
    grid: &PhaseGrid,
) -> Result<DistributionField> {
    f0.check_shape(grid)?;
    let cap = params.clamp_level();
    let mut out = f0.clone();
    for x in 0..out.nx {
        let row = out.row_mut(x);
        for (k, v) in row.iter_mut().enumerate() {
            *v = if grid.is_active(k) { v.min(cap) } else { 0.0 };
        }
    }
    Ok(out)
}

/// Discrete Gaussian mollification of width `1/j` in x (periodic) and in v
/// (zero outside the grid), followed by the ball mask.
pub fn mollify(f: &DistributionField, grid: &PhaseGrid) -> DistributionField {
    let sigma = 1.0 / grid.j;
    let taps = |h: f64, n: usize| -> Vec<f64> {
        let half = ((3.0 * sigma / h).ceil() as usize).min(n / 2);
        let mut w: Vec<f64> = (0..=2 * half)
            .map(|i| {
                let d = (i as f64 - half as f64) * h;
                (-0.5 * d * d / (sigma * sigma)).exp()
            })
            .collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|t| *t /= s);
        w
    };
    let (nx, nv) = (grid.nx, grid.nv);
    let wx = taps(grid.dx, nx);
    let wv = taps(grid.dv, nv);
    let hx = (wx.len() / 2) as isize;
    let hv = (wv.len() / 2) as isize;
    let n_v = grid.n_v();

    // x pass (periodic)
    let mut a = vec![0.0; grid.len()];
    for ix in 0..nx {
        for (t, w) in wx.iter().enumerate() {
            let src = grid.x_index(ix as isize + t as isize - hx);
            for k in 0..n_v {
                a[ix * n_v + k] += w * f.values[src * n_v + k];
            }
        }
    }
    // v1 pass then v2 pass (zero padding)
    let mut b = vec![0.0; grid.len()];
    for ix in 0..nx {
        for i1 in 0..nv {
            for (t, w) in wv.iter().enumerate() {
                let s1 = i1 as isize + t as isize - hv;
                if s1 < 0 || s1 >= nv as isize {
                    continue;
                }
                for i2 in 0..nv {
                    b[ix * n_v + i1 * nv + i2] += w * a[ix * n_v + s1 as usize * nv + i2];
                }
            }
        }
    }
    let mut out = DistributionField::zeros(grid);
    out.time = f.time;
    for ix in 0..nx {
        for i1 in 0..nv {
            for i2 in 0..nv {
                let k = i1 * nv + i2;
                if !grid.is_active(k) {
                    continue;
                }
                let mut s = 0.0;
                for (t, w) in wv.iter().enumerate() {
                    let s2 = i2 as isize + t as isize - hv;
                    if s2 >= 0 && s2 < nv as isize {
                        s += w * b[ix * n_v + i1 * nv + s2 as usize];
                    }
                }
                out.values[ix * n_v + k] = s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(j: f64, nv: usize) -> SimulationParams {
        SimulationParams {
            j,
            nv,
            ..Default::default()
        }
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        let err = make_grid(&params(1.0, 2)).unwrap_err();
        assert!(err.to_string().contains("grid under-resolved"));
    }

    #[test]
    fn ball_measure_close_to_disk_area() {
        let g = make_grid(&params(4.0, 64)).unwrap();
        let area = PI * 16.0;
        assert!((g.ball_measure() - area).abs() < 0.05 * area);
        for k in 0..g.n_v() {
            let [a, b] = g.velocity(k);
            if a * a + b * b > 16.0 {
                assert_eq!(g.v_weights[k], 0.0);
            }
        }
    }

    #[test]
    fn theta_weights_vanish_in_cutoff_bands() {
        let p = SimulationParams {
            gamma_prime: 0.1,
            ntheta: 64,
            ..Default::default()
        };
        let g = make_grid(&p).unwrap();
        for (t, w) in g.theta_nodes.iter().zip(&g.theta_weights) {
            let c = t.cos().abs();
            if !(0.1..=0.9).contains(&c) {
                assert_eq!(*w, 0.0, "theta = {t}");
            } else {
                assert!(*w > 0.0);
            }
        }
        let exact = 4.0 * (0.1f64.acos() - 0.9f64.acos());
        assert!((g.admissible_theta_measure() - exact).abs() < 4.0 * g.dtheta);
    }

    #[test]
    fn periodic_x_index_wraps() {
        let g = make_grid(&SimulationParams {
            nx: 5,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(g.x_index(5), 0);
        assert_eq!(g.x_index(-1), 4);
        assert_eq!(g.x_index(12), 2);
    }

    #[test]
    fn clamp_of_saturated_data() {
        let p = SimulationParams {
            alpha: 0.5,
            j: 10.0,
            ..Default::default()
        };
        let g = make_grid(&p).unwrap();
        let f0 = DistributionField::from_velocity_fn(&g, |_| 2.0);
        let c = clamp_initial_data(&f0, &p, &g).unwrap();
        for &k in g.active() {
            assert!((c.at(0, k) - 1.9).abs() < 1e-15);
        }
        let z = clamp_initial_data(&DistributionField::zeros(&g), &p, &g).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn moments_of_constant_field() {
        let p = params(4.0, 32);
        let g = make_grid(&p).unwrap();
        let f = DistributionField::from_velocity_fn(&g, |_| 0.3);
        let m = compute_moments(&f, &g);
        assert!((m.mass - 0.3 * g.ball_measure()).abs() < 1e-12);
        assert!((m.mass - 0.3 * PI * 16.0).abs() < 0.05 * 0.3 * PI * 16.0);
        assert!(m.momentum1.abs() < 1e-12 && m.momentum2.abs() < 1e-12);
        let z = compute_moments(&DistributionField::zeros(&g), &g);
        assert_eq!(z, Moments::default());
    }

    #[test]
    fn mollified_field_keeps_bound_and_mask() {
        let p = SimulationParams {
            nx: 8,
            j: 4.0,
            nv: 16,
            ..Default::default()
        };
        let g = make_grid(&p).unwrap();
        let f = DistributionField::from_fn(&g, |x, v| {
            if x < 0.5 && v[0] > 0.0 {
                1.5
            } else {
                0.2
            }
        });
        let m = mollify(&f, &g);
        for x in 0..g.nx {
            for k in 0..g.n_v() {
                let v = m.at(x, k);
                if g.is_active(k) {
                    assert!((0.0..=1.5 + 1e-12).contains(&v));
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }
}
