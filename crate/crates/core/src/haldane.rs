//! Haldane fractional exclusion statistics: filling factors, Wu's `w(zeta)`,
//! equilibrium occupations, the entropy density and the interpolated state count.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fields::{DistributionField, PhaseGrid};

/// `1 - alpha*f`, snapped to zero within rounding of the upper end `1/alpha`.
#[inline]
fn vacancy(f: f64, alpha: f64) -> f64 {
    let u = 1.0 - alpha * f;
    if u <= 4.0 * f64::EPSILON {
        0.0
    } else {
        u
    }
}

fn check_range(f: f64, alpha: f64, what: &'static str) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(what, format!("alpha = {alpha} outside (0,1]")));
    }
    if !(f >= 0.0 && f <= 1.0 / alpha) {
        return Err(Error::domain(
            what,
            format!("occupation {f} outside [0, {}]", 1.0 / alpha),
        ));
    }
    Ok(())
}

/// Filling factor `F(f) = (1 - alpha f)^alpha (1 + (1 - alpha) f)^(1 - alpha)`.
pub fn filling_factor(f: f64, alpha: f64) -> Result<f64> {
    check_range(f, alpha, "filling_factor")?;
    Ok(Filling::exact(alpha).eval(f))
}

/// Regularised filling factor
/// `F_j(f) = (1 - alpha f) / (1/j + 1 - alpha f)^(1 - alpha) * (1 + (1 - alpha) f)^(1 - alpha)`.
pub fn filling_factor_reg(f: f64, alpha: f64, j: f64) -> Result<f64> {
    check_range(f, alpha, "filling_factor_reg")?;
    if !(j >= 1.0) {
        return Err(Error::domain("filling_factor_reg", format!("j = {j} < 1")));
    }
    Ok(Filling::truncated(alpha, j).eval(f))
}

/// Configuration-level choice of filling factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillingMode {
    /// `F_j`, the regularised factor of the truncated problem.
    #[default]
    Truncated,
    /// `F` itself, with the velocity-ball cut-off kept.
    Exact,
}

impl FillingMode {
    pub fn name(&self) -> &'static str {
        match self {
            FillingMode::Truncated => "truncated",
            FillingMode::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "truncated" => Some(FillingMode::Truncated),
            "exact" => Some(FillingMode::Exact),
            _ => None,
        }
    }
}

/// Which filling factor a collision evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filling {
    /// The Haldane factor `F`.
    Exact { alpha: f64 },
    /// The regularised factor `F_j`.
    Truncated { alpha: f64, j: f64 },
}

impl Filling {
    pub fn exact(alpha: f64) -> Self {
        Filling::Exact { alpha }
    }

    pub fn truncated(alpha: f64, j: f64) -> Self {
        Filling::Truncated { alpha, j }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            Filling::Exact { alpha } | Filling::Truncated { alpha, .. } => alpha,
        }
    }

    /// Unchecked evaluation; callers guarantee `0 <= f <= 1/alpha`.
    #[inline]
    pub fn eval(&self, f: f64) -> f64 {
        match *self {
            Filling::Exact { alpha } => {
                let u = vacancy(f, alpha);
                if alpha == 1.0 {
                    u
                } else if u == 0.0 {
                    0.0
                } else {
                    (alpha * u.ln() + (1.0 - alpha) * ((1.0 - alpha) * f).ln_1p()).exp()
                }
            }
            Filling::Truncated { alpha, j } => {
                let u = vacancy(f, alpha);
                if alpha == 1.0 {
                    u
                } else {
                    u * ((1.0 + (1.0 - alpha) * f) / (1.0 / j + u)).powf(1.0 - alpha)
                }
            }
        }
    }

    /// Factor `S` with `F_j(g) = (1 - alpha g) S(g)`, evaluated at a frozen
    /// occupation. Only meaningful for the truncated factor; for the exact
    /// factor it diverges at `1/alpha` and is capped there.
    #[inline]
    pub fn structure_factor(&self, f: f64) -> f64 {
        match *self {
            Filling::Truncated { alpha, j } => {
                if alpha == 1.0 {
                    1.0
                } else {
                    ((1.0 + (1.0 - alpha) * f) / (1.0 / j + vacancy(f, alpha))).powf(1.0 - alpha)
                }
            }
            Filling::Exact { alpha } => {
                if alpha == 1.0 {
                    1.0
                } else {
                    let u = vacancy(f, alpha).max(f64::MIN_POSITIVE);
                    ((1.0 + (1.0 - alpha) * f) / u).powf(1.0 - alpha)
                }
            }
        }
    }
}

/// Location and value of the maximum of `F` on `[0, 1/alpha]`.
pub fn filling_factor_max(alpha: f64) -> (f64, f64) {
    if alpha >= 0.5 {
        (0.0, 1.0)
    } else {
        let at = (1.0 - 2.0 * alpha) / (alpha * (1.0 - alpha));
        (at, (1.0 / alpha - 1.0).powf(1.0 - 2.0 * alpha))
    }
}

#[inline]
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `ln w` for `w^alpha (1 + w)^(1 - alpha) = zeta`, given `ln zeta`.
///
/// Solves `alpha u + (1 - alpha) ln(1 + e^u) = ln zeta` by Newton's method
/// safeguarded with bisection; the left side is strictly increasing in `u`.
pub fn ln_w(ln_zeta: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return ln_zeta;
    }
    let g = |u: f64| alpha * u + (1.0 - alpha) * softplus(u) - ln_zeta;
    let dg = |u: f64| alpha + (1.0 - alpha) * sigmoid(u);

    let m = ln_zeta.max(ln_zeta / alpha);
    let mut lo = ln_zeta.min(ln_zeta / alpha) - 100f64.ln();
    let mut hi = softplus(m);
    while g(lo) > 0.0 {
        lo -= lo.abs() + 10.0;
    }
    while g(hi) < 0.0 {
        hi += hi.abs() + 10.0;
    }
    let mut u = if ln_zeta > 0.0 { ln_zeta } else { ln_zeta / alpha }.clamp(lo, hi);
    let tol = 1e-15 * ln_zeta.abs().max(1.0);
    for _ in 0..200 {
        let r = g(u);
        if r.abs() <= tol {
            break;
        }
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let mut next = u - r / dg(u);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == u {
            break;
        }
        u = next;
    }
    u
}

/// Wu's `w(zeta)`, the positive root of `w^alpha (1 + w)^(1 - alpha) = zeta`.
pub fn solve_w(zeta: f64, alpha: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::domain("solve_w", format!("zeta = {zeta} must be > 0")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain("solve_w", format!("alpha = {alpha} outside (0,1]")));
    }
    if alpha == 1.0 {
        return Ok(zeta);
    }
    Ok(ln_w(zeta.ln(), alpha).exp())
}

/// Wu equilibrium occupation `1 / (w(zeta) + alpha)` for `ln zeta = (eps - mu)/T`.
#[inline]
pub fn wu_occupation(ln_zeta: f64, alpha: f64) -> f64 {
    let w = if alpha == 1.0 {
        ln_zeta.exp()
    } else {
        ln_w(ln_zeta, alpha).exp()
    };
    1.0 / (w + alpha)
}

/// `d f / d(ln mu/T)` of the Wu occupation, `w (1 + w) / (w + alpha)^3`.
fn wu_sensitivity(ln_zeta: f64, alpha: f64) -> f64 {
    let w = ln_w(ln_zeta, alpha).exp();
    w * (1.0 + w) / (w + alpha).powi(3)
}

/// Chemical potential and temperature of a Wu equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSpec {
    pub mu: f64,
    pub temperature: f64,
    pub alpha: f64,
}

impl EquilibriumSpec {
    pub fn new(mu: f64, temperature: f64, alpha: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::domain("EquilibriumSpec", "temperature must be > 0"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain("EquilibriumSpec", "alpha outside (0,1]"));
        }
        Ok(Self {
            mu,
            temperature,
            alpha,
        })
    }

    /// Occupation at velocity `v`, with `eps = |v|^2 / 2`.
    pub fn occupation(&self, v: [f64; 2]) -> f64 {
        let eps = 0.5 * (v[0] * v[0] + v[1] * v[1]);
        wu_occupation((eps - self.mu) / self.temperature, self.alpha)
    }
}

/// x-uniform Wu equilibrium on the grid.
pub fn wu_equilibrium(spec: &EquilibriumSpec, grid: &PhaseGrid) -> DistributionField {
    DistributionField::from_velocity_fn(grid, |v| spec.occupation(v))
}

/// Mass and energy of the x-uniform Wu equilibrium with `mu/T = a`, `T = e^b`.
fn eq_moments(a: f64, b: f64, alpha: f64, grid: &PhaseGrid) -> ([f64; 2], [[f64; 2]; 2]) {
    let t = b.exp();
    let (mut m, mut e) = (0.0, 0.0);
    let (mut dm, mut de) = ([0.0; 2], [0.0; 2]);
    for &k in grid.active() {
        let [v1, v2] = grid.velocity(k);
        let v2n = v1 * v1 + v2 * v2;
        let eps = 0.5 * v2n;
        let lz = eps / t - a;
        let f = wu_occupation(lz, alpha);
        let s = wu_sensitivity(lz, alpha);
        let w = grid.v_weights[k];
        m += w * f;
        e += w * f * v2n;
        // df/da = s, df/db = s * eps / T
        dm[0] += w * s;
        dm[1] += w * s * eps / t;
        de[0] += w * s * v2n;
        de[1] += w * s * eps / t * v2n;
    }
    ([m, e], [dm, de])
}

/// Lowest discrete energy compatible with `mass`: fill the lowest-|v| nodes at `1/alpha`.
fn min_energy(mass: f64, alpha: f64, grid: &PhaseGrid) -> Option<f64> {
    let mut nodes: Vec<(f64, f64)> = grid
        .active()
        .iter()
        .map(|&k| {
            let [a, b] = grid.velocity(k);
            (a * a + b * b, grid.v_weights[k])
        })
        .collect();
    nodes.sort_by(|p, q| p.0.total_cmp(&q.0));
    let cap = 1.0 / alpha;
    let (mut left, mut e) = (mass, 0.0);
    for (r2, w) in nodes {
        let take = left.min(cap * w);
        e += take * r2;
        left -= take;
        if left <= 0.0 {
            return Some(e);
        }
    }
    None
}

/// `(mu, T)` of the x-uniform Wu equilibrium whose grid mass and energy match
/// the targets (zero bulk velocity).
pub fn match_moments(
    target_mass: f64,
    target_energy: f64,
    alpha: f64,
    grid: &PhaseGrid,
) -> Result<EquilibriumSpec> {
    if !(target_mass > 0.0 && target_energy > 0.0) {
        return Err(Error::MomentMatch(format!(
            "targets must be positive (mass = {target_mass}, energy = {target_energy})"
        )));
    }
    let e_min = min_energy(target_mass, alpha, grid).ok_or_else(|| {
        Error::MomentMatch(format!(
            "mass {target_mass} exceeds the grid capacity at 1/alpha"
        ))
    })?;
    if target_energy <= e_min {
        return Err(Error::MomentMatch(format!(
            "energy {target_energy} is at or below the degenerate minimum {e_min} for mass {target_mass}"
        )));
    }

    let ln_target = [target_mass.ln(), target_energy.ln()];
    let residual = |a: f64, b: f64| {
        let ([m, e], _) = eq_moments(a, b, alpha, grid);
        [m.ln() - ln_target[0], e.ln() - ln_target[1]]
    };
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());

    // Classical Maxwellian starting point: <|v|^2> = 2T, mass = e^a 2 pi T.
    let t0 = target_energy / (2.0 * target_mass);
    let mut b = t0.ln();
    let mut a = (target_mass / (2.0 * std::f64::consts::PI * t0)).ln();
    let mut r = residual(a, b);
    for _ in 0..200 {
        if norm(r) < 1e-13 {
            let spec = EquilibriumSpec::new(a * b.exp(), b.exp(), alpha)?;
            return Ok(spec);
        }
        let ([m, e], [dm, de]) = eq_moments(a, b, alpha, grid);
        // Jacobian of the log-residual.
        let j = [[dm[0] / m, dm[1] / m], [de[0] / e, de[1] / e]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det.abs() > 0.0) || !det.is_finite() {
            break;
        }
        let da = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let db = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        // Keep the temperature step bounded and backtrack on the residual.
        let scale = (1.0f64).min(2.0 / db.abs().max(1e-300)).min(20.0 / da.abs().max(1e-300));
        let mut step = scale;
        let n0 = norm(r);
        let mut accepted = false;
        for _ in 0..60 {
            let (na, nb) = (a + step * da, b + step * db);
            let nr = residual(na, nb);
            if nr.iter().all(|x| x.is_finite()) && norm(nr) < n0 {
                a = na;
                b = nb;
                r = nr;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    nested_match(target_mass, target_energy, alpha, grid)
}

/// Fallback: bisection on `mu/T` for the mass inside bisection on `ln T` for the energy.
fn nested_match(
    target_mass: f64,
    target_energy: f64,
    alpha: f64,
    grid: &PhaseGrid,
) -> Result<EquilibriumSpec> {
    let mass_at = |a: f64, b: f64| eq_moments(a, b, alpha, grid).0;
    let solve_a = |b: f64| -> Option<f64> {
        let (mut lo, mut hi) = (-50.0, 50.0);
        while mass_at(lo, b)[0] > target_mass {
            lo -= 50.0;
            if lo < -1e6 {
                return None;
            }
        }
        while mass_at(hi, b)[0] < target_mass {
            hi = hi * 2.0 + 50.0;
            if hi > 1e12 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass_at(mid, b)[0] < target_mass {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let energy_at = |b: f64| solve_a(b).map(|a| (a, mass_at(a, b)[1]));
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match energy_at(mid) {
            Some((_, e)) if e < target_energy => lo = mid,
            Some(_) => hi = mid,
            None => break,
        }
    }
    let b = 0.5 * (lo + hi);
    let fail = || {
        Error::MomentMatch(format!(
            "no equilibrium reaches mass {target_mass}, energy {target_energy} on this grid"
        ))
    };
    let a = solve_a(b).ok_or_else(fail)?;
    let [m, e] = mass_at(a, b);
    if ((m - target_mass) / target_mass).abs() > 1e-8 || ((e - target_energy) / target_energy).abs() > 1e-8
    {
        return Err(fail());
    }
    EquilibriumSpec::new(a * b.exp(), b.exp(), alpha)
}

/// Entropy density `f ln f + (1 - alpha f) ln(1 - alpha f) - (1 + (1-alpha) f) ln(1 + (1-alpha) f)`,
/// with `0 ln 0 = 0` at both ends of `[0, 1/alpha]`.
#[inline]
pub fn entropy_density(f: f64, alpha: f64) -> f64 {
    let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let b = 1.0 + (1.0 - alpha) * f;
    xlnx(f) + xlnx(vacancy(f, alpha)) - b * b.ln()
}

/// `h'(f) = ln(f / F(f))`, the entropy variable.
#[inline]
pub fn entropy_variable(f: f64, alpha: f64) -> f64 {
    f.ln() - Filling::exact(alpha).eval(f).ln()
}

/// Integrated entropy functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub value: f64,
}

pub fn entropy(f: &DistributionField, grid: &PhaseGrid, alpha: f64) -> EntropyValue {
    let mut s = 0.0;
    for x in 0..f.nx {
        let row = f.row(x);
        for &k in grid.active() {
            s += grid.v_weights[k] * entropy_density(row[k], alpha);
        }
    }
    EntropyValue { value: s * grid.dx }
}

/// `ln` of the interpolated count `(G + (N-1)(1-alpha))! / (N! (G - alpha N - (1-alpha))!)`.
pub fn ln_state_count(g: u64, n: u64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain("state_count", format!("alpha = {alpha} outside [0,1]")));
    }
    let (g, n) = (g as f64, n as f64);
    let top = g + (n - 1.0) * (1.0 - alpha) + 1.0;
    let bottom = g - alpha * n - (1.0 - alpha) + 1.0;
    if bottom <= 0.0 || top <= 0.0 {
        return Err(Error::domain(
            "state_count",
            format!("G - alpha N - (1 - alpha) + 1 = {bottom} is not positive"),
        ));
    }
    Ok(ln_gamma(top) - ln_gamma(n + 1.0) - ln_gamma(bottom))
}

pub fn state_count(g: u64, n: u64, alpha: f64) -> Result<f64> {
    ln_state_count(g, n, alpha).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_grid, SimulationParams};
    use approx::assert_relative_eq;

    #[test]
    fn filling_factor_endpoints_and_maximum() {
        for &a in &[0.1, 0.25, 0.5, 0.9, 1.0] {
            assert_eq!(filling_factor(0.0, a).unwrap(), 1.0);
            assert_eq!(filling_factor(1.0 / a, a).unwrap(), 0.0);
        }
        let f = filling_factor(8.0 / 3.0, 0.25).unwrap();
        assert_relative_eq!(f, 3f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(filling_factor_max(0.25).1, 3f64.sqrt(), max_relative = 1e-14);
        assert!(filling_factor(-0.1, 0.5).is_err());
        assert!(filling_factor(2.1, 0.5).is_err());
    }

    #[test]
    fn regularised_factor_values() {
        assert_eq!(filling_factor_reg(2.0, 0.5, 7.0).unwrap(), 0.0);
        assert_relative_eq!(
            filling_factor_reg(0.0, 0.5, 1.0).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            max_relative = 1e-15
        );
        assert!(filling_factor_reg(0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn structure_factor_reconstructs_truncated_factor() {
        let fill = Filling::truncated(0.3, 8.0);
        for i in 0..=30 {
            let f = i as f64 / 30.0 / 0.3;
            let lhs = fill.eval(f);
            let rhs = (1.0 - 0.3 * f).max(0.0) * fill.structure_factor(f);
            assert!((lhs - rhs).abs() < 1e-14, "f = {f}");
        }
    }

    #[test]
    fn w_limits() {
        assert_eq!(solve_w(3.7, 1.0).unwrap(), 3.7);
        let w = solve_w(3.0, 1e-8).unwrap();
        assert!((w - 2.0).abs() < 1e-6);
        let w = solve_w(1.0, 0.5).unwrap();
        assert_relative_eq!(w, (5f64.sqrt() - 1.0) / 2.0, max_relative = 1e-14);
        assert!(solve_w(0.0, 0.5).is_err());
        assert!(solve_w(1.0, 0.0).is_err());
    }

    #[test]
    fn w_is_monotone() {
        let mut prev = 0.0;
        for i in 0..200 {
            let z = 10f64.powf(-6.0 + 12.0 * i as f64 / 199.0);
            let w = solve_w(z, 0.3).unwrap();
            assert!(w > prev);
            prev = w;
        }
    }

    #[test]
    fn fermi_dirac_at_alpha_one() {
        let spec = EquilibriumSpec::new(0.3, 0.7, 1.0).unwrap();
        for &e in &[0.0, 0.5, 2.0, 5.0] {
            let v = [(2.0f64 * e).sqrt(), 0.0];
            let fd = 1.0 / (((e - 0.3) / 0.7f64).exp() + 1.0);
            assert_relative_eq!(spec.occupation(v), fd, max_relative = 1e-14);
        }
    }

    #[test]
    fn maxwellian_tail_for_very_negative_mu() {
        let spec = EquilibriumSpec::new(-10.0, 1.0, 0.4).unwrap();
        let f = spec.occupation([0.0, 0.0]);
        let ratio = f / (-10.0f64).exp();
        assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn state_count_reduces_to_binomials() {
        assert_relative_eq!(state_count(5, 2, 1.0).unwrap(), 10.0, max_relative = 1e-12);
        assert_relative_eq!(state_count(5, 2, 0.0).unwrap(), 15.0, max_relative = 1e-12);
        // Gamma(5.5) / (Gamma(3) Gamma(3.5)) = 4.5 * 3.5 / 2
        assert_relative_eq!(state_count(4, 2, 0.5).unwrap(), 7.875, max_relative = 1e-12);
        assert!(state_count(1, 4, 0.9).is_err());
    }

    #[test]
    fn entropy_of_empty_field_is_zero() {
        let g = make_grid(&SimulationParams::default()).unwrap();
        let z = DistributionField::zeros(&g);
        assert_eq!(entropy(&z, &g, 0.5).value, 0.0);
        for &a in &[0.2, 0.5, 1.0] {
            assert!(entropy_density(1.0 / a, a).is_finite());
            assert_eq!(entropy_density(0.0, a), 0.0);
        }
    }

    #[test]
    fn match_moments_round_trip() {
        let p = SimulationParams {
            j: 6.0,
            nv: 32,
            ..Default::default()
        };
        let g = make_grid(&p).unwrap();
        let spec = EquilibriumSpec::new(0.0, 1.0, 0.5).unwrap();
        let f = wu_equilibrium(&spec, &g);
        let m = crate::fields::compute_moments(&f, &g);
        let back = match_moments(m.mass, m.energy, 0.5, &g).unwrap();
        assert!(back.mu.abs() < 1e-6, "mu = {}", back.mu);
        assert!((back.temperature - 1.0).abs() < 1e-6);
        assert!(match_moments(m.mass, 1e-6, 0.5, &g).is_err());
    }
}
