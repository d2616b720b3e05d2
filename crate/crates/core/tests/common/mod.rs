//! Reference implementations used as test oracles. They share no code with
//! the library beyond plain data access.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Plain description of a velocity grid, rebuilt from first principles.
pub struct RefGrid {
    pub nv: usize,
    pub j: f64,
    pub dv: f64,
    pub ntheta: usize,
}

impl RefGrid {
    pub fn new(nv: usize, j: f64, ntheta: usize) -> Self {
        Self {
            nv,
            j,
            dv: 2.0 * j / nv as f64,
            ntheta,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.j + (i as f64 + 0.5) * self.dv
    }

    pub fn inside(&self, v: [f64; 2]) -> bool {
        v[0] * v[0] + v[1] * v[1] <= self.j * self.j
    }

    /// Bilinear interpolation of `f` (row-major `(i1, i2)`), zero beyond the node lattice.
    pub fn interp(&self, f: &[f64], p: [f64; 2]) -> f64 {
        let n = self.nv as i64;
        let s1 = (p[0] + self.j) / self.dv - 0.5;
        let s2 = (p[1] + self.j) / self.dv - 0.5;
        let (a, b) = (s1.floor(), s2.floor());
        let (t, u) = (s1 - a, s2 - b);
        let (a, b) = (a as i64, b as i64);
        let at = |i: i64, k: i64| {
            if i < 0 || k < 0 || i >= n || k >= n {
                0.0
            } else {
                f[(i * n + k) as usize]
            }
        };
        (1.0 - t) * (1.0 - u) * at(a, b)
            + (1.0 - t) * u * at(a, b + 1)
            + t * (1.0 - u) * at(a + 1, b)
            + t * u * at(a + 1, b + 1)
    }
}

/// Kernel `b0` on `|v - v*| >= gamma`, `gamma' < |cos| < 1 - gamma'`.
pub fn ref_kernel(b0: f64, gamma: f64, gamma_prime: f64, r: f64, theta: f64) -> f64 {
    let c = theta.cos().abs();
    if r >= gamma && c > gamma_prime && 1.0 - c > gamma_prime {
        b0
    } else {
        0.0
    }
}

/// Collision operator with blocking factor `phi(f)`:
/// `(1/pi) sum_{v*, theta} B chi [f' f'* phi(f) phi(f*) - f f* phi(f') phi(f'*)] dv^2 dtheta`,
/// looping over every ordered pair and every angle node.
pub fn ref_operator(
    g: &RefGrid,
    f: &[f64],
    b0: f64,
    gamma: f64,
    gamma_prime: f64,
    phi: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let n = g.nv;
    let dtheta = 2.0 * PI / g.ntheta as f64;
    let mut out = vec![0.0; n * n];
    for i1 in 0..n {
        for i2 in 0..n {
            let v = [g.coord(i1), g.coord(i2)];
            if !g.inside(v) {
                continue;
            }
            let fv = f[i1 * n + i2];
            let mut acc = 0.0;
            for k1 in 0..n {
                for k2 in 0..n {
                    let w = [g.coord(k1), g.coord(k2)];
                    if !g.inside(w) || (k1 == i1 && k2 == i2) {
                        continue;
                    }
                    let fw = f[k1 * n + k2];
                    let d = [v[0] - w[0], v[1] - w[1]];
                    let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
                    let phi_d = (d[1]).atan2(d[0]);
                    for t in 0..g.ntheta {
                        let theta = (t as f64 + 0.5) * dtheta;
                        let b = ref_kernel(b0, gamma, gamma_prime, r, theta);
                        if b == 0.0 {
                            continue;
                        }
                        // n at angle theta from v - v*.
                        let nn = [(phi_d + theta).cos(), (phi_d + theta).sin()];
                        let proj = nn[0] * d[0] + nn[1] * d[1];
                        let vp = [v[0] - nn[0] * proj, v[1] - nn[1] * proj];
                        let wp = [w[0] + nn[0] * proj, w[1] + nn[1] * proj];
                        if !g.inside(vp) || !g.inside(wp) {
                            continue;
                        }
                        let fp = g.interp(f, vp);
                        let fwp = g.interp(f, wp);
                        acc += b
                            * (fp * fwp * phi(fv) * phi(fw) - fv * fw * phi(fp) * phi(fwp))
                            * dtheta;
                    }
                }
            }
            out[i1 * n + i2] = acc * g.dv * g.dv / PI;
        }
    }
    out
}

/// Nordheim fermion operator: blocking factor `1 - f`.
pub fn nordheim(g: &RefGrid, f: &[f64], b0: f64, gamma: f64, gamma_prime: f64) -> Vec<f64> {
    ref_operator(g, f, b0, gamma, gamma_prime, |x| 1.0 - x)
}

/// Haldane filling factor written out directly.
pub fn ref_filling(f: f64, alpha: f64) -> f64 {
    (1.0 - alpha * f).max(0.0).powf(alpha) * (1.0 + (1.0 - alpha) * f).powf(1.0 - alpha)
}

/// Wu occupation by bisection on `alpha ln w + (1 - alpha) ln(1 + w) = ln zeta`.
pub fn ref_wu(ln_zeta: f64, alpha: f64) -> f64 {
    let g = |lw: f64| alpha * lw + (1.0 - alpha) * lw.exp().ln_1p() - ln_zeta;
    let (mut lo, mut hi) = (-800.0, 800.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    1.0 / ((0.5 * (lo + hi)).exp() + alpha)
}

/// Moments `{1, v1, v2, |v|^2}` of a velocity profile by direct summation.
pub fn ref_moments(g: &RefGrid, f: &[f64]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for i1 in 0..g.nv {
        for i2 in 0..g.nv {
            let v = [g.coord(i1), g.coord(i2)];
            if !g.inside(v) {
                continue;
            }
            let w = f[i1 * g.nv + i2] * g.dv * g.dv;
            m[0] += w;
            m[1] += w * v[0];
            m[2] += w * v[1];
            m[3] += w * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    m
}

/// Observed order `ln(e1/e2)/ln(h1/h2)` of a sequence of errors.
pub fn observed_orders(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(e.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}
