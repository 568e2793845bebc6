//! Petals `|Z^s (log Z)^b - delta| < delta` (`s = r + (n-1)/n`, `b = (n-1)/n`),
//! orbits of the normalized map inside them, and the fixed-point
//! construction of the invariant curve `W = w(Z)` on each petal.
//!
//! Coordinates on a petal: `u = Z^s (log Z)^b` fills the disk
//! `|u - delta| < delta`; with `phi = arg u` and
//! `sigma = |u| / (2 delta cos phi)` the petal is the strip
//! `0 < sigma < 1`, `|phi| < pi/2`.  Since `1/u` moves by about `s` per step,
//! `sigma` decreases along orbits.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hard::{Base, HardMap, Ladder, NormalizedGerm};
use crate::series::{Branch, Scalar, C64};

mod export;
mod solve;
mod validate;

pub use export::{write_curve_csv, write_orbit_csv, write_raster_csv};
pub use solve::{
    contraction_probe, prepare, projective_gap, push_forward_curve, seed_orbits, solve_parabolic_curve, Attempt,
    ComponentCurve, OriginalOrbit, PushedCurve, ResidualSummary, SeedOrbit, Solution, SEED_STEPS,
};
pub use validate::{validate_estimates, EstimateReport};

pub const DEFAULT_GRID: usize = 64;
pub const TAIL_FLOOR: f64 = 1e-12;
pub const K_MAX: usize = 100_000;
pub const SWEEP_TOL: f64 = 1e-10;
/// Angular extent of the petal grid: `|phi| <= atan(sinh ETA_MAX)`.
pub const ETA_MAX: f64 = 4.0;

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

/// One petal (or, for counting, the whole membership set on a branch).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PetalDomain {
    pub r: u32,
    pub n: u32,
    pub delta: f64,
    pub branch: Branch,
    pub component: i64,
}

impl PetalDomain {
    pub fn new(r: u32, n: u32, delta: f64, theta0: f64) -> Self {
        PetalDomain {
            r,
            n,
            delta,
            branch: Branch::new(theta0),
            component: 0,
        }
    }

    /// Component `m`, on the branch whose cut is opposite its center.
    pub fn for_component(r: u32, n: u32, delta: f64, m: i64) -> Self {
        PetalDomain {
            r,
            n,
            delta,
            branch: Branch::new(window_center(r, n, m)),
            component: m,
        }
    }

    pub fn s(&self) -> f64 {
        self.r as f64 + self.beta()
    }

    pub fn beta(&self) -> f64 {
        (self.n as f64 - 1.0) / self.n as f64
    }

    pub fn base(&self, z: C64) -> Base {
        Base::new(z, &self.branch, self.n)
    }

    /// `Z^s (log Z)^b`.
    pub fn u_at(&self, b: &Base) -> C64 {
        (b.log * self.s() + b.log_l * self.beta()).exp()
    }

    pub fn u(&self, z: C64) -> Result<C64> {
        if z.norm() == 0.0 {
            return Err(Error::Invalid("the origin is on the boundary of every petal".into()));
        }
        if self.branch.on_cut(z) {
            return Err(Error::OnBranchCut);
        }
        Ok(self.u_at(&self.base(z)))
    }

    /// `|u - delta| < delta`, written as `|u|^2 < 2 delta Re u` so that it
    /// stays exact for the tiny `u` near the origin.
    pub fn contains_u(&self, u: C64) -> bool {
        u.norm_sqr() < 2.0 * self.delta * u.re
    }

    pub fn in_domain(&self, z: C64) -> Result<bool> {
        let u = self.u(z)?;
        Ok(self.contains_u(u))
    }

    /// `(sigma, phi)` of a point; `None` when `Re u <= 0`.
    pub fn coords_of_u(&self, u: C64) -> Option<(f64, f64)> {
        let phi = u.arg();
        let c = phi.cos();
        if c <= 0.0 {
            return None;
        }
        Some((u.norm() / (2.0 * self.delta * c), phi))
    }

    /// The point of this component with the given petal coordinates.
    pub fn invert(&self, sigma: f64, phi: f64) -> Option<C64> {
        let u = C64::from_polar(2.0 * self.delta * sigma * phi.cos(), phi);
        let (s, b) = (self.s(), self.beta());
        let target = C64::new(u.norm().ln(), phi + 2.0 * PI * self.component as f64);
        // s X + b log X = target, with X = log Z
        let mut x = target / s;
        x -= C64::new((x.norm().max(1e-300)).ln(), PI) * (b / s);
        for _ in 0..60 {
            let l = crate::hard::log_of_log(x);
            let f = x * s + l * b - target;
            let step = f / (s + b / x);
            x -= step;
            if step.norm() <= 1e-15 * x.norm() {
                break;
            }
        }
        let z = x.exp();
        let arg = x.im;
        let t0 = self.branch.theta0;
        if arg <= t0 - PI || arg > t0 + PI {
            return None;
        }
        Some(z)
    }
}

/// Center angle of component `m` near the origin, where `arg log Z -> pi`.
pub fn window_center(r: u32, n: u32, m: i64) -> f64 {
    let b = (n as f64 - 1.0) / n as f64;
    let s = r as f64 + b;
    (2.0 * PI * m as f64 - b * PI) / s
}

/// Components meeting `-pi < arg Z <= pi` near the origin: integers `m` with
/// `(-r - 1/2)/2 < m < (r + 2b + 1/2)/2`.
pub fn component_ids(r: u32, n: u32) -> Vec<i64> {
    let b = (n as f64 - 1.0) / n as f64;
    let r = r as f64;
    let lo = (-r - 0.5) / 2.0;
    let hi = (r + 2.0 * b + 0.5) / 2.0;
    (lo.floor() as i64..=hi.ceil() as i64)
        .filter(|m| (*m as f64) > lo && (*m as f64) < hi)
        .collect()
}

/// Log-polar membership raster: rows are radii from `rho_min` to `rho_max`
/// (geometric), columns angles across the branch.  The cut is a boundary, so
/// columns do not wrap.
#[derive(Clone, Debug)]
pub struct Raster {
    pub n_rho: usize,
    pub n_theta: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub theta0: f64,
    /// `-1` outside, otherwise a component label (labels start at 0).
    pub labels: Vec<i32>,
    /// Labels of the components that reach the innermost row.
    pub touching: Vec<i32>,
}

impl Raster {
    pub fn point(&self, i: usize, j: usize) -> C64 {
        let lr = self.rho_min.ln() + (self.rho_max / self.rho_min).ln() * (i as f64 + 0.5) / self.n_rho as f64;
        let th = self.theta0 - PI + 2.0 * PI * (j as f64 + 0.5) / self.n_theta as f64;
        C64::from_polar(lr.exp(), th)
    }
}

pub const RASTER_RHO_MIN: f64 = 1e-12;
pub const RASTER_RHO_MAX: f64 = 0.5;

pub fn membership_raster(d: &PetalDomain, res: usize) -> Raster {
    let mut ras = Raster {
        n_rho: res,
        n_theta: res,
        rho_min: RASTER_RHO_MIN,
        rho_max: RASTER_RHO_MAX,
        theta0: d.branch.theta0,
        labels: Vec::new(),
        touching: Vec::new(),
    };
    let rows: Vec<Vec<i32>> = (0..res)
        .into_par_iter()
        .map(|i| {
            (0..res)
                .map(|j| {
                    let z = ras.point(i, j);
                    let u = d.u_at(&d.base(z));
                    if d.contains_u(u) {
                        0
                    } else {
                        -1
                    }
                })
                .collect()
        })
        .collect();
    let mut lab: Vec<i32> = rows.into_iter().flatten().collect();
    // members are marked unlabeled before the fill
    for v in lab.iter_mut() {
        if *v == 0 {
            *v = i32::MAX;
        }
    }
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..lab.len() {
        if lab[start] != i32::MAX {
            continue;
        }
        lab[start] = next;
        stack.push(start);
        while let Some(c) = stack.pop() {
            let (i, j) = (c / res, c % res);
            let mut visit = |k: usize| {
                if lab[k] == i32::MAX {
                    lab[k] = next;
                    stack.push(k);
                }
            };
            if i > 0 {
                visit(c - res);
            }
            if i + 1 < res {
                visit(c + res);
            }
            if j > 0 {
                visit(c - 1);
            }
            if j + 1 < res {
                visit(c + 1);
            }
        }
        next += 1;
    }
    let mut touching: Vec<i32> = lab[..res].iter().copied().filter(|l| *l >= 0).collect();
    touching.sort_unstable();
    touching.dedup();
    ras.labels = lab;
    ras.touching = touching;
    ras
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentCount {
    pub count: usize,
    pub resolution: usize,
    /// Count on the refined raster.
    pub refined: usize,
}

/// Components of the membership set that touch `|Z| = 1e-12`, counted at
/// `res` and `2 res`; a disagreement is reported as a too coarse raster.
pub fn count_components(d: &PetalDomain, res: usize) -> Result<ComponentCount> {
    if res < 8 {
        return Err(Error::Invalid("raster resolution must be at least 8".into()));
    }
    let a = membership_raster(d, res).touching.len();
    let b = membership_raster(d, 2 * res).touching.len();
    if a != b {
        return Err(Error::Hypothesis(format!(
            "raster too coarse: {a} components at {res}, {b} at {}",
            2 * res
        )));
    }
    Ok(ComponentCount {
        count: a,
        resolution: res,
        refined: b,
    })
}

/// The map driving an orbit.
#[derive(Clone, Copy)]
pub enum Dynamics<'a> {
    /// `Z -> f^_1(Z, w(Z))` with `w` given by a curve (or `0`).
    Normalized {
        map: &'a HardMap,
        curve: Option<&'a CurveApprox>,
    },
    /// `Z -> Z - Z^(r+1+b) (log Z)^b`, the one-variable model.
    Model,
}

impl Dynamics<'_> {
    fn w_at(&self, d: &PetalDomain, b: &Base) -> C64 {
        match self {
            Dynamics::Normalized { map, curve: Some(c) } => curve_value(map, d, c, b),
            _ => czero(),
        }
    }

    fn advance(&self, d: &PetalDomain, b: &Base) -> Base {
        match self {
            Dynamics::Normalized { map, .. } => map.step(b, self.w_at(d, b)).0,
            Dynamics::Model => {
                let u = d.u_at(b);
                d.base(b.z - b.z * u)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrbitRecord {
    pub points: Vec<C64>,
    pub inside: Vec<bool>,
    /// `s u_k k` with `u_k = Z_k^s (log Z_k)^b`; tends to 1.
    pub diagnostic: Vec<C64>,
    /// `|u_k|` over `|u_0| / |1 + k s u_0|`; the lemma puts it in `[2/3, 2]`.
    pub sandwich: Vec<f64>,
    pub escape: Option<usize>,
}

impl OrbitRecord {
    pub fn sandwich_holds(&self) -> bool {
        self.sandwich.iter().all(|q| (2.0 / 3.0..=2.0).contains(q))
    }

    pub fn sandwich_range(&self) -> (f64, f64) {
        self.sandwich
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(*q), b.max(*q)))
    }

    /// Range of the real part of the diagnostic over `lo <= k <= hi`, and the
    /// largest imaginary part.
    pub fn diagnostic_range(&self, lo: usize, hi: usize) -> (f64, f64, f64) {
        let hi = hi.min(self.diagnostic.len().saturating_sub(1));
        self.diagnostic[lo.min(hi)..=hi]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY, 0.0f64), |(a, b, c), v| {
                (a.min(v.re), b.max(v.re), c.max(v.im.abs()))
            })
    }
}

/// Iterates `kmax` steps from `z0`, flagging membership at every step.
pub fn iterate_orbit(d: &PetalDomain, dy: Dynamics<'_>, z0: C64, kmax: usize) -> Result<OrbitRecord> {
    if !d.in_domain(z0)? {
        return Err(Error::Invalid("orbit start is outside the petal".into()));
    }
    let s = d.s();
    let mut b = d.base(z0);
    let u0 = d.u_at(&b);
    let mut rec = OrbitRecord {
        points: Vec::with_capacity(kmax + 1),
        inside: Vec::with_capacity(kmax + 1),
        diagnostic: Vec::with_capacity(kmax + 1),
        sandwich: Vec::with_capacity(kmax + 1),
        escape: None,
    };
    for k in 0..=kmax {
        let u = d.u_at(&b);
        let inside = d.contains_u(u);
        if !inside && rec.escape.is_none() {
            rec.escape = Some(k);
        }
        rec.points.push(b.z);
        rec.inside.push(inside);
        rec.diagnostic.push(u * (s * k as f64));
        let bound = u0.norm() / (C64::new(1.0, 0.0) + u0 * (k as f64 * s)).norm();
        rec.sandwich.push(u.norm() / bound);
        if k < kmax {
            b = dy.advance(d, &b);
        }
    }
    Ok(rec)
}

/// Partial sums of `|Z_k|^s |log Z_k|^q` along an orbit.
#[derive(Clone, Debug)]
pub struct TailReport {
    pub s: f64,
    pub q: f64,
    pub total: f64,
    /// `total / (|Z_0|^(s - s0) |log |Z_0||^(q - b))`, `s0 = r + b`.
    pub constant: f64,
    /// Increment over the last doubling of `k` divided by the one before.
    /// About `2^(1 - s/s0)` when the series converges, about 1 at `s = s0`.
    pub doubling_ratio: f64,
    /// Integral-comparison estimate of the sum past the last term.
    pub tail_estimate: f64,
    pub converges: bool,
}

pub fn sum_tail_bound_check(orbit: &OrbitRecord, d: &PetalDomain, s: f64, q: f64) -> TailReport {
    let s0 = d.s();
    let b = d.beta();
    let terms: Vec<f64> = orbit
        .points
        .iter()
        .map(|z| z.norm().powf(s) * d.branch.log(*z).norm().powf(q))
        .collect();
    let k = terms.len();
    let mut partial = Vec::with_capacity(k);
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial.push(acc);
    }
    let at = |i: usize| partial[i.min(k - 1)];
    let (k1, k2, k4) = (k / 4, k / 2, k - 1);
    let inc_last = at(k4) - at(k2);
    let inc_prev = at(k2) - at(k1);
    let ratio = if inc_prev > 0.0 { inc_last / inc_prev } else { 0.0 };
    // terms decay like (k + k0)^-p with p = s / s0
    let p = s / s0;
    let u0 = orbit.points[0];
    let k0 = 1.0 / (s0 * d.u(u0).map(|u| u.norm()).unwrap_or(1.0));
    let last = *terms.last().unwrap_or(&0.0);
    let tail = if p > 1.0 {
        last * (k as f64 + k0) / (p - 1.0)
    } else {
        f64::INFINITY
    };
    let z0 = u0.norm();
    let scale = z0.powf(s - s0) * z0.ln().abs().powf(q - b);
    let expected = 2f64.powf(1.0 - p);
    TailReport {
        s,
        q,
        total: acc,
        constant: (acc + if tail.is_finite() { tail } else { 0.0 }) / scale,
        doubling_ratio: ratio,
        tail_estimate: tail,
        converges: p > 1.0 && ratio < 0.5 * (1.0 + expected),
    }
}

/// Nodes of the petal grid: `sigma` geometric on `[sigma_min, sigma_max]`,
/// and `phi = atan(sinh eta)` with `eta` cell-centered on
/// `[-eta_max, eta_max]`.  In `(log sigma, eta)` the term `log cos phi` of
/// `log |u|` is smooth up to the edges of the petal.  Index `i * n_phi + j`.
#[derive(Clone, Debug)]
pub struct PetalGrid {
    pub n_sigma: usize,
    pub n_phi: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub eta_max: f64,
    pub nodes: Vec<Base>,
    /// `Z^2 (log Z)^|J|`, the unit of `h`.
    pub scale: Vec<C64>,
    /// `|Z|^2 |log |Z||^|J|`, the F-set bound.
    pub weight: Vec<f64>,
    pub jabs: f64,
}

fn lagrange4(t: f64) -> [f64; 4] {
    [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ]
}

fn stencil(f: f64, n: usize) -> (usize, [f64; 4]) {
    let base = (f.floor() as i64 - 1).clamp(0, n as i64 - 4) as usize;
    (base, lagrange4(f - base as f64))
}

impl PetalGrid {
    pub fn new(
        d: &PetalDomain,
        n_sigma: usize,
        n_phi: usize,
        sigma_min: f64,
        sigma_max: f64,
        jabs: f64,
    ) -> Result<Self> {
        let eta_max = ETA_MAX;
        if n_sigma < 4 || n_phi < 4 {
            return Err(Error::Invalid("petal grid needs at least 4 x 4 nodes".into()));
        }
        let mut nodes = Vec::with_capacity(n_sigma * n_phi);
        for i in 0..n_sigma {
            for j in 0..n_phi {
                let (sg, ph) = Self::node_coords(n_sigma, n_phi, sigma_min, sigma_max, eta_max, i, j);
                let z = d
                    .invert(sg, ph)
                    .ok_or_else(|| Error::Hypothesis("petal grid crosses the branch cut".into()))?;
                nodes.push(d.base(z));
            }
        }
        let scale = nodes.iter().map(|b| unit_of(b, jabs)).collect();
        let weight = nodes.iter().map(|b| bound_of(b.z, jabs)).collect();
        Ok(PetalGrid {
            n_sigma,
            n_phi,
            sigma_min,
            sigma_max,
            eta_max,
            nodes,
            scale,
            weight,
            jabs,
        })
    }

    fn node_coords(ns: usize, np: usize, smin: f64, smax: f64, emax: f64, i: usize, j: usize) -> (f64, f64) {
        let x = smin.ln() + (smax / smin).ln() * i as f64 / (ns - 1) as f64;
        let eta = -emax + 2.0 * emax * (j as f64 + 0.5) / np as f64;
        (x.exp(), eta.sinh().atan())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fractional node indices of `(sigma, phi)`.
    fn fractional(&self, sigma: f64, phi: f64) -> (f64, f64) {
        let fi = (sigma / self.sigma_min).ln() / (self.sigma_max / self.sigma_min).ln() * (self.n_sigma - 1) as f64;
        let eta = phi.tan().asinh();
        let fj = (eta + self.eta_max) / (2.0 * self.eta_max) * self.n_phi as f64 - 0.5;
        (fi, fj)
    }

    /// Piecewise cubic interpolation of node values in `(log sigma, eta)`.
    pub fn interpolate(&self, vals: &[C64], sigma: f64, phi: f64) -> C64 {
        let (fi, fj) = self.fractional(sigma, phi);
        let (bi, wi) = stencil(fi, self.n_sigma);
        let (bj, wj) = stencil(fj, self.n_phi);
        let mut acc = czero();
        for (a, wa) in wi.iter().enumerate() {
            let row = (bi + a) * self.n_phi + bj;
            let mut r = czero();
            for (c, wc) in wj.iter().enumerate() {
                r += vals[row + c] * *wc;
            }
            acc += r * *wa;
        }
        acc
    }
}

/// `Z^2 (log Z)^j`.
pub fn unit_of(b: &Base, j: f64) -> C64 {
    (b.log * 2.0 + b.log_l * j).exp()
}

/// `|Z|^2 |log |Z||^j`.
pub fn bound_of(z: C64, j: f64) -> f64 {
    let m = z.norm();
    m * m * m.ln().abs().powf(j)
}

/// A sampled function `w(Z) = Z^2 (log Z)^|J| h(Z)` on one petal.
#[derive(Clone, Debug)]
pub struct CurveApprox {
    pub domain: PetalDomain,
    pub grid: PetalGrid,
    pub h: Vec<C64>,
    /// `max |w| / (|Z|^2 |log |Z||^|J|)` over the nodes.
    pub bound_profile: f64,
    /// Largest invariance defect found by [`PetalSolver::residuals`].
    pub residual: f64,
}

impl CurveApprox {
    pub fn zero(domain: PetalDomain, grid: PetalGrid) -> Self {
        let n = grid.len();
        CurveApprox {
            domain,
            grid,
            h: vec![czero(); n],
            bound_profile: 0.0,
            residual: f64::NAN,
        }
    }

    pub fn value(&self, idx: usize) -> C64 {
        self.grid.scale[idx] * self.h[idx]
    }

    /// `w` at an arbitrary point of the petal.
    pub fn value_at(&self, d: &PetalDomain, b: &Base) -> C64 {
        match d.coords_of_u(d.u_at(b)) {
            Some((sg, ph)) => unit_of(b, self.grid.jabs) * self.grid.interpolate(&self.h, sg, ph),
            None => czero(),
        }
    }

    /// `sup |h_1 - h_2|`, the norm of the E-space.
    pub fn distance(&self, other: &CurveApprox) -> f64 {
        self.h
            .iter()
            .zip(&other.h)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.h.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    fn refresh_profile(&mut self) {
        self.bound_profile = (0..self.h.len())
            .map(|i| self.value(i).norm() / self.grid.weight[i])
            .fold(0.0, f64::max);
    }
}

/// `w(Z)` from the grid, or from the formal expansion inside `sigma_min`.
pub fn curve_value(map: &HardMap, d: &PetalDomain, c: &CurveApprox, b: &Base) -> C64 {
    match d.coords_of_u(d.u_at(b)) {
        Some((sg, _)) if sg < c.grid.sigma_min => map.formal_curve(b),
        _ => c.value_at(d, b),
    }
}

/// How a `T` series ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    /// The orbit left the grid towards the origin; the rest of the series
    /// telescopes to `Z_K^(-1/n) w(Z_K)` with `w` the formal expansion.
    Formal,
    /// `|Z_K|` under the floor.
    Floor,
    /// `K_max` terms; the remainder uses the current iterate.
    KMax,
}

#[derive(Clone, Copy, Debug)]
pub struct TValue {
    pub value: C64,
    pub steps: usize,
    pub exit: Exit,
    pub escaped: bool,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub grid: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kmax: usize,
    pub floor: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub delta0: f64,
    pub min_delta: f64,
    /// Ladder levels past `2n - 3` kept for the formal expansion.
    pub extra_levels: u32,
    /// Laurent depth of the ladder.
    pub depth: i64,
    /// Principal-part depth of the shift used as a change of coordinates.
    pub shift_depth: i64,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid: DEFAULT_GRID,
            sigma_min: 0.02,
            sigma_max: 0.95,
            kmax: K_MAX,
            floor: TAIL_FLOOR,
            tol: SWEEP_TOL,
            max_sweeps: 60,
            delta0: 1e-2,
            min_delta: 1e-4,
            extra_levels: 10,
            depth: crate::series::DEFAULT_DEPTH,
            shift_depth: 6,
            seeds: 50,
            seed: 1,
        }
    }
}

/// `T` on one petal.
#[derive(Clone, Debug)]
pub struct PetalSolver {
    pub domain: PetalDomain,
    pub map: HardMap,
    pub jabs: f64,
    pub cfg: SolverConfig,
}

#[derive(Clone, Debug, Default)]
pub struct SweepStats {
    pub max_steps: usize,
    pub escapes: usize,
    pub kmax_exits: usize,
}

impl PetalSolver {
    pub fn new<S: Scalar>(ng: &NormalizedGerm<S>, ladder: &Ladder<S>, domain: PetalDomain, cfg: SolverConfig) -> Self {
        let jabs = ladder.j_exp.to_f64().abs();
        let map = HardMap::new(ng, &ladder.with_shift_depth(cfg.shift_depth), domain.branch);
        PetalSolver { domain, map, jabs, cfg }
    }

    pub fn grid(&self) -> Result<PetalGrid> {
        PetalGrid::new(
            &self.domain,
            self.cfg.grid,
            self.cfg.grid,
            self.cfg.sigma_min,
            self.cfg.sigma_max,
            self.jabs,
        )
    }

    pub fn zero_curve(&self) -> Result<CurveApprox> {
        Ok(CurveApprox::zero(self.domain, self.grid()?))
    }

    fn coords(&self, b: &Base) -> Option<(f64, f64)> {
        self.domain.coords_of_u(self.domain.u_at(b))
    }

    /// `Tw(Z_0) = Z_0^(1/n) sum_k Z_k^(-1/n) H(Z_k, w(Z_k))`, starting from the
    /// value `w0` at `Z_0`.
    pub fn t_value(&self, w: &CurveApprox, b0: Base, w0: C64) -> TValue {
        let mut b = b0;
        let mut ww = w0;
        let mut sum = czero();
        let mut escaped = false;
        for k in 0..self.cfg.kmax {
            let (b1, w1) = self.map.step(&b, ww);
            sum += (ww - b.root / b1.root * w1) / b.root;
            let c = self.coords(&b1);
            let inside = matches!(c, Some((sg, _)) if sg < 1.0);
            escaped |= !inside;
            if b1.z.norm() < self.cfg.floor {
                return TValue {
                    value: b0.root * sum,
                    steps: k + 1,
                    exit: Exit::Floor,
                    escaped,
                };
            }
            if let Some((sg, ph)) = c {
                if sg < w.grid.sigma_min {
                    let rem = self.map.formal_curve(&b1) / b1.root;
                    return TValue {
                        value: b0.root * (sum + rem),
                        steps: k + 1,
                        exit: Exit::Formal,
                        escaped,
                    };
                }
                ww = unit_of(&b1, self.jabs) * w.grid.interpolate(&w.h, sg, ph);
            } else {
                ww = czero();
            }
            b = b1;
        }
        TValue {
            value: b0.root * (sum + ww / b.root),
            steps: self.cfg.kmax,
            exit: Exit::KMax,
            escaped,
        }
    }

    pub fn apply_t(&self, w: &CurveApprox) -> (CurveApprox, SweepStats) {
        let vals: Vec<TValue> = (0..w.grid.len())
            .into_par_iter()
            .map(|i| self.t_value(w, w.grid.nodes[i], w.value(i)))
            .collect();
        let mut out = w.clone();
        let mut st = SweepStats::default();
        for (i, v) in vals.iter().enumerate() {
            out.h[i] = v.value / w.grid.scale[i];
            st.max_steps = st.max_steps.max(v.steps);
            st.escapes += v.escaped as usize;
            st.kmax_exits += (v.exit == Exit::KMax) as usize;
        }
        out.refresh_profile();
        (out, st)
    }

    /// Iterates `T` from `w = 0` until the sweep change is below `tol`.
    pub fn iterate(&self) -> Result<Iteration> {
        let mut w = self.zero_curve()?;
        let mut diffs = Vec::new();
        let mut stats = SweepStats::default();
        for _ in 0..self.cfg.max_sweeps {
            let (next, st) = self.apply_t(&w);
            stats.max_steps = stats.max_steps.max(st.max_steps);
            stats.escapes = stats.escapes.max(st.escapes);
            stats.kmax_exits = stats.kmax_exits.max(st.kmax_exits);
            let dist = next.distance(&w);
            diffs.push(dist);
            w = next;
            if dist < self.cfg.tol {
                return Ok(Iteration::new(w, diffs, stats, true));
            }
        }
        Ok(Iteration::new(w, diffs, stats, false))
    }

    /// Invariance defects at the nodes.
    pub fn residuals(&self, w: &CurveApprox) -> Vec<Residual> {
        (0..w.grid.len())
            .into_par_iter()
            .map(|i| {
                let b0 = w.grid.nodes[i];
                let w0 = w.value(i);
                let (b1, w1) = self.map.step(&b0, w0);
                let interp = w.value_at(&self.domain, &b1);
                let direct = self.t_value(w, b1, interp).value;
                Residual {
                    z: b0.z,
                    w: w0,
                    interpolated: (w1 - interp).norm(),
                    telescoped: (w1 - direct).norm(),
                    weight: w.grid.weight[i],
                }
            })
            .collect()
    }
}

/// `|f^_2(Z, w(Z)) - w(f^_1(Z, w(Z)))|` at a node, with `w` at the image
/// point read two ways: interpolated on the grid, and as `Tw` evaluated
/// there directly.
#[derive(Clone, Copy, Debug)]
pub struct Residual {
    pub z: C64,
    pub w: C64,
    pub interpolated: f64,
    pub telescoped: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct Iteration {
    pub curve: CurveApprox,
    /// `sup |h_(j+1) - h_j|` per sweep.
    pub diffs: Vec<f64>,
    /// Largest ratio of consecutive sweep changes above the noise level.
    pub contraction: f64,
    pub converged: bool,
    pub stats: SweepStats,
}

impl Iteration {
    fn new(curve: CurveApprox, diffs: Vec<f64>, stats: SweepStats, converged: bool) -> Self {
        let contraction = diffs
            .windows(2)
            .filter(|p| p[1] > 1e-13)
            .map(|p| p[1] / p[0])
            .fold(0.0, f64::max);
        Iteration {
            curve,
            diffs,
            contraction,
            converged,
            stats,
        }
    }

    pub fn sweeps(&self) -> usize {
        self.diffs.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::hard_witness;
    use std::sync::OnceLock;

    fn small_cfg() -> SolverConfig {
        SolverConfig {
            grid: 16,
            ..SolverConfig::default()
        }
    }

    fn witness() -> &'static (NormalizedGerm<C64>, Ladder<C64>) {
        static W: OnceLock<(NormalizedGerm<C64>, Ladder<C64>)> = OnceLock::new();
        W.get_or_init(|| prepare(&hard_witness(-2).to_float(), &small_cfg()).unwrap())
    }

    fn small_solver(m: i64) -> PetalSolver {
        let (ng, l) = witness();
        PetalSolver::new(ng, l, PetalDomain::for_component(1, 2, 1e-2, m), small_cfg())
    }

    #[test]
    fn membership_is_strict_and_the_origin_is_outside() {
        let d = PetalDomain::for_component(1, 2, 0.1, 0);
        assert!(d.in_domain(C64::new(0.0, 0.0)).is_err());
        // the point where u = 2 delta (boundary) and where u = delta (centre)
        let edge = d.invert(1.0, 0.0).unwrap();
        let centre = d.invert(0.5, 0.0).unwrap();
        assert!((d.u(edge).unwrap() - 0.2).norm() < 1e-12);
        assert!(d.in_domain(centre).unwrap());
        assert!(!d.in_domain(edge * 1.000001).unwrap());
        let cut = C64::from_polar(0.01, d.branch.theta0 + PI);
        assert_eq!(d.in_domain(cut), Err(Error::OnBranchCut));
    }

    #[test]
    fn members_have_positive_real_part() {
        let d = PetalDomain::new(2, 3, 1e-2, 0.0);
        let ras = membership_raster(&d, 200);
        for i in 0..ras.n_rho {
            for j in 0..ras.n_theta {
                if ras.labels[i * ras.n_theta + j] >= 0 {
                    assert!(d.u(ras.point(i, j)).unwrap().re > 0.0);
                }
            }
        }
    }

    #[test]
    fn doubling_delta_grows_the_petal() {
        let (a, b) = (PetalDomain::new(1, 2, 1e-3, 0.0), PetalDomain::new(1, 2, 2e-3, 0.0));
        let (small, big) = (membership_raster(&a, 1000), membership_raster(&b, 1000));
        let mut members = 0;
        for (x, y) in small.labels.iter().zip(&big.labels) {
            if *x >= 0 {
                members += 1;
                assert!(*y >= 0);
            }
        }
        assert!(members > 1000);
    }

    #[test]
    fn component_counts_at_moderate_resolution() {
        for (r, n) in [(1, 2), (2, 2), (1, 3), (3, 4)] {
            let d = PetalDomain::new(r, n, 1e-3, 0.0);
            let c = count_components(&d, 256).unwrap();
            assert_eq!(c.count, r as usize + 1, "r {r} n {n}");
            assert_eq!(component_ids(r, n).len(), r as usize + 1);
        }
    }

    #[test]
    fn grid_nodes_invert_to_their_coordinates() {
        let s = small_solver(1);
        let g = s.grid().unwrap();
        for i in [0, 5, 15] {
            for j in [0, 7, 15] {
                let (sg, ph) = PetalGrid::node_coords(16, 16, g.sigma_min, g.sigma_max, g.eta_max, i, j);
                let b = g.nodes[i * 16 + j];
                let (s2, p2) = s.domain.coords_of_u(s.domain.u_at(&b)).unwrap();
                assert!((s2 / sg - 1.0).abs() < 1e-10 && (p2 - ph).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn interpolation_is_exact_on_cubics() {
        let s = small_solver(0);
        let g = s.grid().unwrap();
        let f = |x: f64, e: f64| C64::new(x * x * x - 2.0 * x * e, e * e * e + x);
        let coord = |sg: f64, ph: f64| ((sg / g.sigma_min).ln(), ph.tan().asinh());
        let mut vals = Vec::new();
        for i in 0..g.n_sigma {
            for j in 0..g.n_phi {
                let (sg, ph) = PetalGrid::node_coords(16, 16, g.sigma_min, g.sigma_max, g.eta_max, i, j);
                let (x, e) = coord(sg, ph);
                vals.push(f(x, e));
            }
        }
        for (sg, ph) in [(0.03, 0.2), (0.5, -1.3), (0.9, 1.5), (0.021, 0.0)] {
            let (x, e) = coord(sg, ph);
            assert!((g.interpolate(&vals, sg, ph) - f(x, e)).norm() < 1e-9);
        }
    }

    #[test]
    fn model_map_follows_the_orbit_law() {
        let d = PetalDomain::for_component(1, 2, 1e-2, 0);
        let z0 = d.invert(0.5, 0.3).unwrap();
        let o = iterate_orbit(&d, Dynamics::Model, z0, 100_000).unwrap();
        assert!(o.escape.is_none());
        assert!(o.sandwich_holds());
        let early = (o.diagnostic[10_000] - 1.0).norm();
        let late = (o.diagnostic[100_000] - 1.0).norm();
        assert!(late < early && late < 0.1, "{early} {late}");
    }

    #[test]
    fn witness_orbits_stay_in_the_sandwich() {
        let (ng, l) = witness();
        for m in component_ids(1, 2) {
            let d = PetalDomain::for_component(1, 2, 1e-2, m);
            let map = HardMap::new(ng, l, d.branch);
            let z0 = d.invert(0.9, -0.8).unwrap();
            let o = iterate_orbit(&d, Dynamics::Normalized { map: &map, curve: None }, z0, 20_000).unwrap();
            assert!(o.escape.is_none());
            let (lo, hi) = o.sandwich_range();
            assert!(lo >= 2.0 / 3.0 && hi <= 2.0, "{lo} {hi}");
        }
    }

    #[test]
    fn sums_converge_only_above_the_critical_exponent() {
        let d = PetalDomain::for_component(1, 2, 1e-2, 1);
        let z0 = d.invert(0.5, 0.0).unwrap();
        let o = iterate_orbit(&d, Dynamics::Model, z0, 200_000).unwrap();
        let s0 = d.s();
        assert!(sum_tail_bound_check(&o, &d, s0 + 1.0, 0.0).converges);
        assert!(sum_tail_bound_check(&o, &d, s0 + 0.5, 3.0).converges);
        let q3 = sum_tail_bound_check(&o, &d, s0 + 1.0, 3.0);
        let q0 = sum_tail_bound_check(&o, &d, s0 + 1.0, 0.0);
        assert!(q3.constant.is_finite() && q3.total > q0.total);
        let crit = sum_tail_bound_check(&o, &d, s0, 0.0);
        assert!(!crit.converges && crit.tail_estimate.is_infinite());
    }

    #[test]
    fn t_of_zero_lies_in_the_f_set() {
        let s = small_solver(0);
        let (tw, st) = s.apply_t(&s.zero_curve().unwrap());
        assert_eq!(st.escapes, 0);
        assert!(tw.norm() > 0.0);
        assert!(tw.bound_profile <= 1.0, "{}", tw.bound_profile);
    }

    #[test]
    fn fixed_point_on_a_small_grid() {
        let s = small_solver(1);
        let it = s.iterate().unwrap();
        assert!(it.converged && it.contraction < 0.9, "{:?}", it.diffs);
        let (again, _) = s.apply_t(&it.curve);
        assert!(again.distance(&it.curve) < 1e-9);
        assert!(it.curve.bound_profile <= 1.0);
        // the formal expansion continues the curve past the inner row
        let g = &it.curve.grid;
        for j in 0..g.n_phi {
            let gap = (it.curve.value(j) - s.map.formal_curve(&g.nodes[j])).norm() / g.weight[j];
            assert!(gap < 1e-6, "{gap}");
        }
        let probe = contraction_probe(&s, 1, 5).unwrap();
        assert!(probe[0] < 0.9);
    }

    #[test]
    fn sweeps_do_not_depend_on_the_thread_count() {
        let s = small_solver(0);
        let w = s.zero_curve().unwrap();
        let (par, _) = s.apply_t(&w);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (ser, _) = pool.install(|| s.apply_t(&w));
        assert_eq!(par.h, ser.h);
    }

    #[test]
    fn identity_chart_push_forward_is_the_inverse_normalization() {
        let s = small_solver(0);
        let (ng, _) = witness();
        let it = s.iterate().unwrap();
        let c = ComponentCurve {
            residuals: Vec::new(),
            summary: ResidualSummary::default(),
            solver: s.clone(),
            iteration: it,
        };
        let germ = hard_witness(-2).to_float().germ(crate::series::gcd::POLY_TRUNC);
        let target = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        let pc = push_forward_curve(&c, &crate::blowup::Chart::identity(), &germ, target, 4, SEED_STEPS, 1);
        let g = &c.curve().grid;
        for i in [0, 100, 255] {
            let (z, w) = s.map.to_original(&g.nodes[i], c.curve().value(i));
            assert_eq!(pc.points[i], (z, w));
            assert!((z * ng.alpha - g.nodes[i].z).norm() < 1e-15);
        }
        assert!(pc.orbits.iter().all(|o| o.converges()));
    }

    #[test]
    fn csv_headers() {
        let d = PetalDomain::new(1, 2, 1e-2, 0.0);
        let mut buf = Vec::new();
        write_raster_csv(&mut buf, &membership_raster(&d, 16)).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("z_re,z_im,component_id\n"));
        let o = iterate_orbit(&d, Dynamics::Model, d.invert(0.5, 0.0).unwrap(), 3).unwrap();
        let mut buf = Vec::new();
        write_orbit_csv(&mut buf, &o).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("k,z_re,z_im,diagnostic\n0,"));
    }
}
