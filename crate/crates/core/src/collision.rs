//! The truncated Haldane collision operator on the velocity grid.
//!
//! For a pair `(v, v*)` and an angle `theta` between the unit vector `n` and
//! `v - v*`, the post-collision velocities are
//! `v' = v - n (n . (v - v*))` and `v'* = v* + n (n . (v - v*))`.
//! Values of `f` at the off-grid points `v'`, `v'*` come from bilinear
//! interpolation (zero outside the ball), and every contribution with one of
//! the four velocities outside the ball is dropped.
//!
//! The sweep visits each unordered node pair once and, for uniform angle
//! nodes, each distinct post-collision pair once: `theta` and `theta + pi`
//! give the same `n` up to sign, and `theta + pi/2` swaps `v'` with `v'*`.
//! Both the gain and the loss integrands are symmetric under these maps, so
//! the kernel weights of the folded angles are summed.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{angle_admissible, DistributionField, PhaseGrid, SimulationParams};
use crate::haldane::{filling_factor_max, Filling};

/// Angular shape of the kernel on its admissible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelProfile {
    /// `B = b0` on the admissible set.
    #[default]
    Indicator,
    /// `B = b0 * 4 (c - g')(1 - g' - c) / (1 - 2 g')^2` with `c = |cos theta|`.
    Tapered,
}

impl KernelProfile {
    pub fn name(&self) -> &'static str {
        match self {
            KernelProfile::Indicator => "indicator",
            KernelProfile::Tapered => "tapered",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "indicator" => Some(KernelProfile::Indicator),
            "tapered" => Some(KernelProfile::Tapered),
            _ => None,
        }
    }
}

/// Collision kernel `B(|v - v*|, theta)` with its cut-off structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionKernel {
    pub b0: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub c_b: f64,
    pub profile: KernelProfile,
}

impl CollisionKernel {
    /// Builds the kernel and checks `int B dtheta >= c_b` on the grid's angle nodes.
    pub fn new(params: &SimulationParams, profile: KernelProfile, grid: &PhaseGrid) -> Result<Self> {
        let k = Self {
            b0: params.b0,
            gamma: params.gamma,
            gamma_prime: params.gamma_prime,
            c_b: params.c_b,
            profile,
        };
        // Above the speed cut-off both profiles are speed independent.
        let mass = k.angular_mass(k.gamma, grid);
        if mass < k.c_b {
            return Err(Error::KernelMass {
                found: mass,
                required: k.c_b,
                rel_speed: k.gamma,
            });
        }
        Ok(k)
    }

    /// Kernel without the `c_b` verification (for probing profiles).
    pub fn unchecked(params: &SimulationParams, profile: KernelProfile) -> Self {
        Self {
            b0: params.b0,
            gamma: params.gamma,
            gamma_prime: params.gamma_prime,
            c_b: params.c_b,
            profile,
        }
    }

    /// `B` as a function of relative speed and `|cos theta|`.
    #[inline]
    pub fn eval_cos(&self, rel_speed: f64, cos_abs: f64) -> f64 {
        if rel_speed < self.gamma || !angle_admissible(cos_abs, self.gamma_prime) {
            return 0.0;
        }
        match self.profile {
            KernelProfile::Indicator => self.b0,
            KernelProfile::Tapered => {
                let g = self.gamma_prime;
                let width = 1.0 - 2.0 * g;
                self.b0 * 4.0 * (cos_abs - g) * (1.0 - g - cos_abs) / (width * width)
            }
        }
    }

    pub fn eval(&self, rel_speed: f64, theta: f64) -> f64 {
        self.eval_cos(rel_speed, theta.cos().abs())
    }

    /// Grid quadrature of `int B(rel_speed, theta) dtheta` over the full circle.
    pub fn angular_mass(&self, rel_speed: f64, grid: &PhaseGrid) -> f64 {
        grid.theta_nodes
            .iter()
            .map(|&t| self.eval(rel_speed, t) * grid.dtheta)
            .sum()
    }
}

pub fn eval_kernel(k: &CollisionKernel, rel_speed: f64, theta: f64) -> f64 {
    k.eval(rel_speed, theta)
}

/// Post-collision velocities for the unit vector at angle `theta` from `v - v*`.
pub fn post_collision(v: [f64; 2], v_star: [f64; 2], theta: f64) -> Result<([f64; 2], [f64; 2])> {
    let rel = [v[0] - v_star[0], v[1] - v_star[1]];
    let r = rel[0].hypot(rel[1]);
    if r == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let (s, c) = theta.sin_cos();
    let e = [rel[0] / r, rel[1] / r];
    let n = [c * e[0] - s * e[1], s * e[0] + c * e[1]];
    let d = n[0] * rel[0] + n[1] * rel[1];
    Ok((
        [v[0] - n[0] * d, v[1] - n[1] * d],
        [v_star[0] + n[0] * d, v_star[1] + n[1] * d],
    ))
}

/// Bilinear interpolation stencil on the velocity grid. Corners outside the
/// node lattice get weight zero.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    idx: [usize; 4],
    w: [f64; 4],
}

impl Stencil {
    #[inline]
    fn new(grid: &PhaseGrid, p: [f64; 2]) -> Self {
        let nv = grid.nv as isize;
        let locate = |c: f64| {
            let s = (c + grid.j) / grid.dv - 0.5;
            let k = s.floor();
            (k as isize, s - k)
        };
        let (k1, t1) = locate(p[0]);
        let (k2, t2) = locate(p[1]);
        let mut idx = [0usize; 4];
        let mut w = [0.0; 4];
        let corners = [
            (k1, k2, (1.0 - t1) * (1.0 - t2)),
            (k1, k2 + 1, (1.0 - t1) * t2),
            (k1 + 1, k2, t1 * (1.0 - t2)),
            (k1 + 1, k2 + 1, t1 * t2),
        ];
        for (c, &(a, b, wt)) in corners.iter().enumerate() {
            if a >= 0 && a < nv && b >= 0 && b < nv {
                idx[c] = (a * nv + b) as usize;
                w[c] = wt;
            }
        }
        Self { idx, w }
    }

    /// Interpolated value at x-node `x` of a `[v][x]`-major array.
    #[inline]
    fn eval(&self, data: &[f64], nx: usize, x: usize) -> f64 {
        self.w[0] * data[self.idx[0] * nx + x]
            + self.w[1] * data[self.idx[1] * nx + x]
            + self.w[2] * data[self.idx[2] * nx + x]
            + self.w[3] * data[self.idx[3] * nx + x]
    }
}

/// Bilinear interpolation of one velocity profile at an arbitrary point.
pub fn interpolate(grid: &PhaseGrid, profile: &[f64], p: [f64; 2]) -> f64 {
    Stencil::new(grid, p).eval(profile, 1, 0)
}

/// One folded angle: rotation of `n` relative to `v - v*` and the summed
/// kernel weight of the angles sharing its post-collision pair.
#[derive(Debug, Clone, Copy)]
struct AngleGroup {
    cos: f64,
    sin: f64,
    /// `sum_m B(theta_m) dtheta` above the speed cut-off.
    weight: f64,
}

fn angle_groups(kernel: &CollisionKernel, grid: &PhaseGrid) -> Vec<AngleGroup> {
    let n = grid.ntheta;
    let fold = if n.is_multiple_of(4) {
        4
    } else if n.is_multiple_of(2) {
        2
    } else {
        1
    };
    let per = n / fold;
    (0..per)
        .filter_map(|g| {
            let weight: f64 = (0..fold)
                .map(|m| {
                    let t = grid.theta_nodes[g + m * per];
                    kernel.eval_cos(f64::INFINITY, t.cos().abs()) * grid.dtheta
                })
                .sum();
            let (sin, cos) = grid.theta_nodes[g].sin_cos();
            (weight > 0.0).then_some(AngleGroup { cos, sin, weight })
        })
        .collect()
}

/// Per-node collision frequencies, stored in field layout `(x, v)`.
///
/// `gain_env = int B chi f' f'* F(f*) dv* dtheta` and
/// `loss = int B chi f* F(f') F(f'*) dv* dtheta`, so that
/// `Q = (F(f) gain_env - f loss) / pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionRates {
    pub nx: usize,
    pub nv: usize,
    pub gain_env: Vec<f64>,
    pub loss: Vec<f64>,
}

/// Result of one sweep over the collision integrals.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub rates: CollisionRates,
    /// `int |v - v*|^2 B chi f f* F(f') F(f'*) dx dv dv* dtheta` when requested.
    pub bony: Option<f64>,
}

/// Change a field-layout `(x, v)` array to `[v][x]` layout.
fn transpose(values: &[f64], nx: usize, n_v: usize, xs: std::ops::Range<usize>) -> Vec<f64> {
    let w = xs.len();
    let mut out = vec![0.0; n_v * w];
    for (ix, x) in xs.enumerate() {
        let row = &values[x * n_v..(x + 1) * n_v];
        for (k, &v) in row.iter().enumerate() {
            out[k * w + ix] = v;
        }
    }
    debug_assert!(nx >= w);
    out
}

struct ChunkOut {
    gain: Vec<f64>,
    loss: Vec<f64>,
    bony: Vec<f64>,
}

fn sweep_chunk(
    f: &DistributionField,
    grid: &PhaseGrid,
    groups: &[AngleGroup],
    gamma: f64,
    filling: Filling,
    xs: std::ops::Range<usize>,
    want_bony: bool,
) -> ChunkOut {
    let n_v = grid.n_v();
    let nx = xs.len();
    let ft = transpose(&f.values, f.nx, n_v, xs.clone());
    let fill_t: Vec<f64> = ft.iter().map(|&v| filling.eval(v)).collect();
    let mut gain = vec![0.0; n_v * nx];
    let mut loss = vec![0.0; n_v * nx];
    let mut bony = vec![0.0; nx];
    let active = grid.active();
    let j2 = grid.j * grid.j;

    for (ia, &a) in active.iter().enumerate() {
        let va = grid.velocity(a);
        for &b in &active[ia + 1..] {
            let vb = grid.velocity(b);
            let rel = [va[0] - vb[0], va[1] - vb[1]];
            let r2 = rel[0] * rel[0] + rel[1] * rel[1];
            let r = r2.sqrt();
            if r < gamma {
                continue;
            }
            let e = [rel[0] / r, rel[1] / r];
            for g in groups {
                let n = [g.cos * e[0] - g.sin * e[1], g.sin * e[0] + g.cos * e[1]];
                let d = n[0] * rel[0] + n[1] * rel[1];
                let vp = [va[0] - n[0] * d, va[1] - n[1] * d];
                let vps = [vb[0] + n[0] * d, vb[1] + n[1] * d];
                if vp[0] * vp[0] + vp[1] * vp[1] > j2 || vps[0] * vps[0] + vps[1] * vps[1] > j2 {
                    continue;
                }
                let sp = Stencil::new(grid, vp);
                let sps = Stencil::new(grid, vps);
                let w = g.weight;
                for x in 0..nx {
                    let fp = sp.eval(&ft, nx, x);
                    let fps = sps.eval(&ft, nx, x);
                    let pp = w * fp * fps;
                    let ff = w * filling.eval(fp) * filling.eval(fps);
                    let (ia_x, ib_x) = (a * nx + x, b * nx + x);
                    gain[ia_x] += pp * fill_t[ib_x];
                    gain[ib_x] += pp * fill_t[ia_x];
                    loss[ia_x] += ft[ib_x] * ff;
                    loss[ib_x] += ft[ia_x] * ff;
                    if want_bony {
                        bony[x] += 2.0 * r2 * ft[ia_x] * ft[ib_x] * ff;
                    }
                }
            }
        }
    }
    ChunkOut { gain, loss, bony }
}

/// Evaluates the gain and loss frequencies (and optionally the Bony
/// functional) in one pass. Work is split over x-chunks; each x-node sums its
/// contributions in the same fixed order regardless of the split.
pub fn sweep(
    f: &DistributionField,
    grid: &PhaseGrid,
    kernel: &CollisionKernel,
    filling: Filling,
    want_bony: bool,
) -> Sweep {
    let groups = angle_groups(kernel, grid);
    let n_v = grid.n_v();
    let threads = rayon::current_num_threads().max(1).min(grid.nx);
    let chunk = grid.nx.div_ceil(threads);
    let ranges: Vec<_> = (0..grid.nx)
        .step_by(chunk)
        .map(|s| s..(s + chunk).min(grid.nx))
        .collect();
    let outs: Vec<(std::ops::Range<usize>, ChunkOut)> = ranges
        .into_par_iter()
        .map(|xs| {
            let out = sweep_chunk(f, grid, &groups, kernel.gamma, filling, xs.clone(), want_bony);
            (xs, out)
        })
        .collect();

    let dv2 = grid.dv * grid.dv;
    let mut gain_env = vec![0.0; grid.len()];
    let mut loss = vec![0.0; grid.len()];
    let mut bony_x = vec![0.0; grid.nx];
    for (xs, out) in outs {
        let w = xs.len();
        for (ix, x) in xs.enumerate() {
            for k in 0..n_v {
                gain_env[x * n_v + k] = out.gain[k * w + ix] * dv2;
                loss[x * n_v + k] = out.loss[k * w + ix] * dv2;
            }
            bony_x[x] = out.bony[ix];
        }
    }
    let bony = want_bony.then(|| bony_x.iter().sum::<f64>() * dv2 * dv2 * grid.dx);
    Sweep {
        rates: CollisionRates {
            nx: grid.nx,
            nv: grid.nv,
            gain_env,
            loss,
        },
        bony,
    }
}

pub fn collision_rates(
    f: &DistributionField,
    grid: &PhaseGrid,
    kernel: &CollisionKernel,
    filling: Filling,
) -> CollisionRates {
    sweep(f, grid, kernel, filling, false).rates
}

/// A change of the distribution field (may be negative), field layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Increment {
    pub nx: usize,
    pub nv: usize,
    pub values: Vec<f64>,
}

impl Increment {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self {
            nx: grid.nx,
            nv: grid.nv,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.nv * self.nv;
        &self.values[x * n..(x + 1) * n]
    }

    pub fn l1_norm(&self, grid: &PhaseGrid) -> f64 {
        self.values
            .chunks(grid.n_v())
            .map(|row| {
                grid.active()
                    .iter()
                    .map(|&k| row[k].abs() * grid.v_weights[k])
                    .sum::<f64>()
            })
            .sum::<f64>()
            * grid.dx
    }

    /// Difference `b - a` of two fields.
    pub fn between(a: &DistributionField, b: &DistributionField) -> Self {
        Self {
            nx: a.nx,
            nv: a.nv,
            values: a.values.iter().zip(&b.values).map(|(x, y)| y - x).collect(),
        }
    }
}

/// `Q(f) = (F(f) gain_env - f loss) / pi` at every unmasked node.
pub fn q_from_rates(
    f: &DistributionField,
    rates: &CollisionRates,
    grid: &PhaseGrid,
    filling: Filling,
) -> Increment {
    let mut out = Increment::zeros(grid);
    let n_v = grid.n_v();
    for x in 0..grid.nx {
        for &k in grid.active() {
            let i = x * n_v + k;
            let fv = f.values[i];
            out.values[i] = (filling.eval(fv) * rates.gain_env[i] - fv * rates.loss[i]) / PI;
        }
    }
    out
}

/// The truncated collision operator `Q_j(f)` (or `Q(f)` with `Filling::Exact`).
pub fn apply_q(
    f: &DistributionField,
    grid: &PhaseGrid,
    kernel: &CollisionKernel,
    filling: Filling,
) -> Increment {
    let rates = collision_rates(f, grid, kernel, filling);
    q_from_rates(f, &rates, grid, filling)
}

/// A-priori bound on `|Q_j(f)|` for any admissible `f`.
pub fn q_bound(grid: &PhaseGrid, kernel: &CollisionKernel, alpha: f64) -> f64 {
    let fmax = filling_factor_max(alpha).1;
    let theta_measure = 2.0 * PI;
    kernel.b0 * fmax * fmax * (1.0 / alpha).powi(2) * theta_measure * grid.ball_measure() / PI
}

/// Collision invariants `1, v1, v2, |v|^2` scaled by powers of `1/j`.
#[inline]
fn invariants(grid: &PhaseGrid, k: usize) -> [f64; 4] {
    let [a, b] = grid.velocity(k);
    let (a, b) = (a / grid.j, b / grid.j);
    [1.0, a, b, a * a + b * b]
}

/// `sum_v inc * {1, v1, v2, |v|^2} dv` per x-node.
pub fn moment_defects(inc: &Increment, grid: &PhaseGrid) -> Vec<[f64; 4]> {
    (0..grid.nx)
        .map(|x| {
            let row = inc.row(x);
            let mut d = [0.0; 4];
            for &k in grid.active() {
                let [v1, v2] = grid.velocity(k);
                let w = row[k] * grid.v_weights[k];
                d[0] += w;
                d[1] += w * v1;
                d[2] += w * v2;
                d[3] += w * (v1 * v1 + v2 * v2);
            }
            d
        })
        .collect()
}

/// `sum_v |inc| * |{1, v1, v2, |v|^2}| dv` per x-node, the natural scale of the defects.
pub fn moment_scales(inc: &Increment, grid: &PhaseGrid) -> Vec<[f64; 4]> {
    (0..grid.nx)
        .map(|x| {
            let row = inc.row(x);
            let mut d = [0.0; 4];
            for &k in grid.active() {
                let [v1, v2] = grid.velocity(k);
                let w = row[k].abs() * grid.v_weights[k];
                d[0] += w;
                d[1] += w * v1.abs();
                d[2] += w * v2.abs();
                d[3] += w * (v1 * v1 + v2 * v2);
            }
            d
        })
        .collect()
}

/// Largest `|defect| / scale` over x-nodes and the four invariants.
pub fn relative_defect(inc: &Increment, grid: &PhaseGrid) -> f64 {
    let defects = moment_defects(inc, grid);
    let scales = moment_scales(inc, grid);
    let mut worst: f64 = 0.0;
    for (d, s) in defects.iter().zip(&scales) {
        for c in 0..4 {
            if s[c] > 0.0 {
                worst = worst.max(d[c].abs() / s[c]);
            }
        }
    }
    worst
}

/// Output of the conservative projection.
#[derive(Debug, Clone)]
pub struct Projected {
    pub increment: Increment,
    /// `int |correction| dx dv`.
    pub correction_l1: f64,
    /// `max |a + b v1 + c v2 + d |v|^2|` over the weight's support.
    pub max_multiplier: f64,
}

/// Adds `(a + b v1 + c v2 + d |v|^2) w(v)` per x-node so that the discrete
/// mass, momentum and energy of the increment vanish, with `w = 1` on the ball.
pub fn conservative_projection(inc: &Increment, grid: &PhaseGrid) -> Result<Projected> {
    let w: Vec<f64> = (0..grid.len())
        .map(|i| if grid.is_active(i % grid.n_v()) { 1.0 } else { 0.0 })
        .collect();
    conservative_projection_weighted(inc, grid, &w)
}

/// As [`conservative_projection`] with a caller-supplied non-negative weight
/// in field layout.
pub fn conservative_projection_weighted(
    inc: &Increment,
    grid: &PhaseGrid,
    weight: &[f64],
) -> Result<Projected> {
    use nalgebra::{Matrix4, Vector4};

    let n_v = grid.n_v();
    let mut out = inc.clone();
    let mut correction_l1 = 0.0;
    let mut max_multiplier: f64 = 0.0;
    for x in 0..grid.nx {
        // Two passes: the second removes the rounding left by the first.
        for _pass in 0..2 {
            let mut m = Matrix4::<f64>::zeros();
            let mut rhs = Vector4::<f64>::zeros();
            for &k in grid.active() {
                let i = x * n_v + k;
                let phi = Vector4::from(invariants(grid, k));
                let q = grid.v_weights[k];
                m += phi * phi.transpose() * (weight[i] * q);
                rhs -= phi * (out.values[i] * q);
            }
            if rhs.iter().all(|&r| r == 0.0) {
                break;
            }
            let coef = m
                .cholesky()
                .map(|c| c.solve(&rhs))
                .ok_or(Error::SingularProjection { x })?;
            for &k in grid.active() {
                let i = x * n_v + k;
                let poly = Vector4::from(invariants(grid, k)).dot(&coef);
                if weight[i] > 0.0 {
                    max_multiplier = max_multiplier.max(poly.abs());
                }
                let c = poly * weight[i];
                out.values[i] += c;
                correction_l1 += c.abs() * grid.v_weights[k] * grid.dx;
            }
        }
    }
    Ok(Projected {
        increment: out,
        correction_l1,
        max_multiplier,
    })
}

/// Moment-matching correction that cannot leave `(0, 1/alpha)`.
///
/// Per x-node finds `c` with `g_new = sigma(logit(alpha g) + c . phi(v)) / alpha`
/// carrying the mass, momentum and energy of `target`. To first order this is the
/// `g (1 - alpha g)`-weighted projection. Nodes with `g` at 0 or `1/alpha` are left
/// alone. Returns `None` when Newton's method stalls.
pub fn logistic_projection(
    target: &DistributionField,
    g: &DistributionField,
    grid: &PhaseGrid,
    alpha: f64,
) -> Result<Option<(DistributionField, f64)>> {
    use nalgebra::{Matrix4, Vector4};

    let n_v = grid.n_v();
    let mut out = g.clone();
    let mut correction_l1 = 0.0;
    for x in 0..grid.nx {
        let base = x * n_v;
        let logit: Vec<(usize, f64)> = grid
            .active()
            .iter()
            .filter_map(|&k| {
                let a = alpha * g.values[base + k];
                (a > 0.0 && a < 1.0).then(|| (k, a.ln() - (-a).ln_1p()))
            })
            .collect();
        let mut want = Vector4::<f64>::zeros();
        let mut scale = Vector4::<f64>::zeros();
        for &k in grid.active() {
            let phi = Vector4::from(invariants(grid, k));
            let q = grid.v_weights[k];
            want += phi * (target.values[base + k] * q);
            scale += phi.abs() * (target.values[base + k].abs() * q);
        }
        let eval = |c: &Vector4<f64>| {
            let mut have = Vector4::<f64>::zeros();
            let mut jac = Matrix4::<f64>::zeros();
            let mut vals = Vec::with_capacity(logit.len());
            for &(k, s) in &logit {
                let phi = Vector4::from(invariants(grid, k));
                let sig = 1.0 / (1.0 + (-(s + phi.dot(c))).exp());
                let v = sig / alpha;
                vals.push(v);
                let q = grid.v_weights[k];
                have += phi * (v * q);
                jac += phi * phi.transpose() * (v * (1.0 - sig) * q);
            }
            // Pinned nodes contribute unchanged.
            for &k in grid.active() {
                let a = alpha * g.values[base + k];
                if !(a > 0.0 && a < 1.0) {
                    have += Vector4::from(invariants(grid, k)) * (g.values[base + k] * grid.v_weights[k]);
                }
            }
            (want - have, jac, vals)
        };
        let norm = |r: &Vector4<f64>| {
            (0..4)
                .map(|i| if scale[i] > 0.0 { r[i].abs() / scale[i] } else { 0.0 })
                .fold(0.0, f64::max)
        };
        let mut c = Vector4::<f64>::zeros();
        let (mut r, mut jac, mut vals) = eval(&c);
        let mut err = norm(&r);
        for _ in 0..40 {
            if err <= 1e-15 {
                break;
            }
            let Some(step) = jac.cholesky().map(|ch| ch.solve(&r)) else {
                return Ok(None);
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = c + step * t;
                let (r2, j2, v2) = eval(&trial);
                let e2 = norm(&r2);
                if e2 < err {
                    (c, r, jac, vals, err) = (trial, r2, j2, v2, e2);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if err > 1e-12 {
            return Ok(None);
        }
        for (&(k, _), &v) in logit.iter().zip(&vals) {
            let i = base + k;
            if v <= 0.0 {
                return Ok(None);
            }
            correction_l1 += (v - g.values[i]).abs() * grid.v_weights[k] * grid.dx;
            out.values[i] = v;
        }
    }
    Ok(Some((out, correction_l1)))
}
