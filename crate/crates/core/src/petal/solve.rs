//! The whole construction on every petal: adaptive `delta`, seed orbits,
//! contraction probe and the push-forward to the original germ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::*;
use crate::blowup::{push_forward_point, Chart};
use crate::germ::Germ2;
use crate::hard::{normalize_with, shift_ladder, OdeForm};
use crate::index::AdaptedForm;

/// Normalizes `af` with the extra ladder levels the solver wants and builds
/// the ladder.
pub fn prepare(af: &AdaptedForm<C64>, cfg: &SolverConfig) -> Result<(NormalizedGerm<C64>, Ladder<C64>)> {
    let ng = normalize_with(af, cfg.extra_levels)?;
    let ladder = shift_ladder(&ng, OdeForm::Linearized, cfg.depth)?;
    Ok((ng, ladder))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ResidualSummary {
    /// `max |W_1 - w(Z_1)|` with `w(Z_1)` interpolated.
    pub max_abs: f64,
    /// The same over `|Z|^2 |log |Z||^|J|`.
    pub max_rel: f64,
    /// `max |W_1 - Tw(Z_1)|`.
    pub telescoped_abs: f64,
    pub telescoped_rel: f64,
}

impl ResidualSummary {
    pub fn of(res: &[Residual]) -> Self {
        res.iter().fold(ResidualSummary::default(), |s, r| ResidualSummary {
            max_abs: s.max_abs.max(r.interpolated),
            max_rel: s.max_rel.max(r.interpolated / r.weight),
            telescoped_abs: s.telescoped_abs.max(r.telescoped),
            telescoped_rel: s.telescoped_rel.max(r.telescoped / r.weight),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ComponentCurve {
    pub solver: PetalSolver,
    pub iteration: Iteration,
    pub residuals: Vec<Residual>,
    pub summary: ResidualSummary,
}

impl ComponentCurve {
    pub fn curve(&self) -> &CurveApprox {
        &self.iteration.curve
    }

    pub fn component(&self) -> i64 {
        self.solver.domain.component
    }
}

/// Why a value of `delta` was rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct Attempt {
    pub delta: f64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub delta: f64,
    pub rejected: Vec<Attempt>,
    pub components: Vec<ComponentCurve>,
}

impl Solution {
    pub fn worst(&self) -> ResidualSummary {
        let all: Vec<Residual> = self
            .components
            .iter()
            .flat_map(|c| c.residuals.iter().copied())
            .collect();
        ResidualSummary::of(&all)
    }

    pub fn contraction(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.iteration.contraction)
            .fold(0.0, f64::max)
    }

    /// Smallest sup-distance between the curves of two components, relative
    /// to the F-set bound, over the nodes of the first.  Points of one petal
    /// are never in another, so the curves are compared as point sets in
    /// `(Z, W)`: distance from each sample to the nearest sample of the other.
    pub fn separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (a, ca) in self.components.iter().enumerate() {
            for cb in &self.components[a + 1..] {
                let (ga, gb) = (&ca.curve().grid, &cb.curve().grid);
                for i in 0..ga.len() {
                    let pa = (ga.nodes[i].z, ca.curve().value(i));
                    let near = (0..gb.len())
                        .map(|k| {
                            let pb = (gb.nodes[k].z, cb.curve().value(k));
                            ((pa.0 - pb.0).norm_sqr() + (pa.1 - pb.1).norm_sqr()).sqrt()
                        })
                        .fold(f64::INFINITY, f64::min);
                    best = best.min(near / pa.0.norm());
                }
            }
        }
        best
    }
}

/// Iterates `T` on every component, halving `delta` from `cfg.delta0` until
/// orbits stay inside, the contraction factor is below 0.9 and the sweeps
/// converge.
pub fn solve_parabolic_curve(ng: &NormalizedGerm<C64>, ladder: &Ladder<C64>, cfg: &SolverConfig) -> Result<Solution> {
    let mut delta = cfg.delta0;
    let mut rejected = Vec::new();
    'outer: while delta >= cfg.min_delta {
        let mut comps = Vec::new();
        for m in component_ids(ng.r, ng.n) {
            let d = PetalDomain::for_component(ng.r, ng.n, delta, m);
            let solver = PetalSolver::new(ng, ladder, d, cfg.clone());
            let it = solver.iterate()?;
            let reason = if it.stats.escapes > 0 {
                Some(format!("component {m}: {} orbits left the petal", it.stats.escapes))
            } else if !it.converged {
                Some(format!("component {m}: no convergence in {} sweeps", it.sweeps()))
            } else if it.contraction >= 0.9 {
                Some(format!("component {m}: contraction {:.3}", it.contraction))
            } else {
                None
            };
            if let Some(reason) = reason {
                rejected.push(Attempt { delta, reason });
                delta /= 2.0;
                continue 'outer;
            }
            let mut iteration = it;
            let residuals = solver.residuals(&iteration.curve);
            let summary = ResidualSummary::of(&residuals);
            iteration.curve.residual = summary.max_abs;
            comps.push(ComponentCurve {
                solver,
                iteration,
                residuals,
                summary,
            });
        }
        return Ok(Solution {
            delta,
            rejected,
            components: comps,
        });
    }
    Err(Error::NonConvergence(format!(
        "no delta >= {} works: {}",
        cfg.min_delta,
        rejected.last().map(|a| a.reason.as_str()).unwrap_or("")
    )))
}

/// A uniformly random point of the grid's coordinate box.
fn random_coords(g: &PetalGrid, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let x = rng.gen_range(g.sigma_min.ln()..g.sigma_max.ln());
    let eta = rng.gen_range(-g.eta_max..g.eta_max);
    (x.exp(), eta.sinh().atan())
}

/// Orbits are followed until `|Z|` halves, or this many steps.
pub const SEED_STEPS: usize = 1_000_000;

/// An orbit of `(Z, w(Z))` under the normalized map, `W` left free.
#[derive(Clone, Debug)]
pub struct SeedOrbit {
    pub z0: C64,
    pub steps: usize,
    pub start: f64,
    pub end: f64,
    /// Range of `|u_k| (1 + k s u_0) / |u_0|` along the orbit.
    pub sandwich: (f64, f64),
    /// `max |W_k - w(Z_k)|` along the orbit.
    pub curve_gap: f64,
    pub inside: bool,
}

impl SeedOrbit {
    /// Stayed in the petal and on the curve, halved `|Z|`, and `u_k` kept
    /// within the `[2/3, 2]` band around `u_0 / (1 + k s u_0)`.
    pub fn converges(&self) -> bool {
        self.inside
            && self.end <= 0.5 * self.start
            && self.sandwich.0 >= 2.0 / 3.0
            && self.sandwich.1 <= 2.0
            && self.curve_gap < 1e-7
    }
}

pub fn seed_orbits(c: &ComponentCurve, count: usize, seed: u64, max_steps: usize) -> Vec<SeedOrbit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c.component() as u64).wrapping_mul(0x9e37_79b9));
    let g = &c.curve().grid;
    let d = c.solver.domain;
    let starts: Vec<C64> = (0..count)
        .filter_map(|_| {
            let (sg, ph) = random_coords(g, &mut rng);
            d.invert(sg, ph)
        })
        .collect();
    let map = &c.solver.map;
    let curve = c.curve();
    let s = d.s();
    starts
        .par_iter()
        .map(|&z0| {
            let mut b = d.base(z0);
            let u0 = d.u_at(&b);
            let mut w = curve.value_at(&d, &b);
            let mut gap = 0.0f64;
            let mut inside = true;
            let mut band = (f64::INFINITY, 0.0f64);
            let mut k = 0;
            while k < max_steps && b.z.norm() > 0.5 * z0.norm() {
                let (b1, w1) = map.step(&b, w);
                b = b1;
                w = w1;
                k += 1;
                let u = d.u_at(&b);
                inside &= d.contains_u(u);
                let q = u.norm() * (u0 * (k as f64 * s) + 1.0).norm() / u0.norm();
                band = (band.0.min(q), band.1.max(q));
                gap = gap.max((w - curve_value(map, &d, curve, &b)).norm());
            }
            SeedOrbit {
                z0,
                steps: k,
                start: z0.norm(),
                end: b.z.norm(),
                sandwich: band,
                curve_gap: gap,
                inside,
            }
        })
        .collect()
}

/// `sup |Tu - Tv| / sup |u - v|` for random smooth `u, v` of F-set size.
pub fn contraction_probe(solver: &PetalSolver, pairs: usize, seed: u64) -> Result<Vec<f64>> {
    let base = solver.zero_curve()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let pick = |rng: &mut ChaCha8Rng| {
            let cs: Vec<C64> = (0..4)
                .map(|_| C64::from_polar(rng.gen_range(0.0..0.12), rng.gen_range(0.0..2.0 * PI)))
                .collect();
            let mut w = base.clone();
            let g = &w.grid;
            let l = (g.sigma_max / g.sigma_min).ln();
            for i in 0..g.n_sigma {
                let x = i as f64 / (g.n_sigma - 1) as f64;
                for j in 0..g.n_phi {
                    let y = (j as f64 + 0.5) / g.n_phi as f64 * 2.0 - 1.0;
                    w.h[i * g.n_phi + j] = cs[0] + cs[1] * x + cs[2] * y + cs[3] * (x * l).sin() * y;
                }
            }
            w
        };
        let u = pick(&mut rng);
        let v = pick(&mut rng);
        let (tu, _) = solver.apply_t(&u);
        let (tv, _) = solver.apply_t(&v);
        out.push(tu.distance(&tv) / u.distance(&v));
    }
    Ok(out)
}

/// The curve carried back to the original coordinates.
#[derive(Clone, Debug)]
pub struct PushedCurve {
    pub points: Vec<(C64, C64)>,
    /// `max |f(p) - p'|` with `p'` the sample over the image of `Z`.
    pub residual: f64,
    /// Distance in `P^1` from `[p]` to the target direction, per grid row
    /// (maximum over the row), from the innermost row out.
    pub tangent_gap: Vec<f64>,
    pub orbits: Vec<OriginalOrbit>,
}

#[derive(Clone, Copy, Debug)]
pub struct OriginalOrbit {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    /// Largest `|p_(k+1)| / |p_k|`.
    pub max_ratio: f64,
    /// Gap to the target direction at the start and at the end.
    pub tangent_gap: (f64, f64),
}

impl OriginalOrbit {
    /// `|p|` halved and `[p]` moved towards the target direction.
    pub fn converges(&self) -> bool {
        self.end <= 0.5 * self.start && self.tangent_gap.1 < self.tangent_gap.0
    }
}

/// `|v1 p2 - v2 p1| / (|v| |p|)`: the sine of the angle between `[p]` and `[v]`.
pub fn projective_gap(p: (C64, C64), v: (C64, C64)) -> f64 {
    let n = ((p.0.norm_sqr() + p.1.norm_sqr()) * (v.0.norm_sqr() + v.1.norm_sqr())).sqrt();
    (v.0 * p.1 - v.1 * p.0).norm() / n
}

/// Maps the samples `(Z, w(Z))` through the inverse normalization and the
/// blow-downs of `chart`, checks invariance under the original germ `f`
/// and follows `orbits` sample points under `f` until `|p|` halves (at most
/// `max_steps` steps).
pub fn push_forward_curve(
    c: &ComponentCurve,
    chart: &Chart,
    f: &Germ2<C64>,
    target: (C64, C64),
    orbits: usize,
    max_steps: usize,
    seed: u64,
) -> PushedCurve {
    let map = &c.solver.map;
    let d = c.solver.domain;
    let curve = c.curve();
    let g = &curve.grid;
    let lift = |b: &Base, w: C64| push_forward_point(chart, map.to_original(b, w));
    let points: Vec<(C64, C64)> = (0..g.len()).map(|i| lift(&g.nodes[i], curve.value(i))).collect();
    let residual = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let b = g.nodes[i];
            let (b1, _) = map.step(&b, curve.value(i));
            let image = lift(&b1, curve.value_at(&d, &b1));
            let p = points[i];
            let fp = f.eval(p.0, p.1);
            ((fp.0 - image.0).norm_sqr() + (fp.1 - image.1).norm_sqr()).sqrt()
        })
        .reduce(|| 0.0, f64::max);
    let tangent_gap = (0..g.n_sigma)
        .map(|i| {
            (0..g.n_phi)
                .map(|j| projective_gap(points[i * g.n_phi + j], target))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(C64, C64)> = (0..orbits)
        .filter_map(|_| {
            let (sg, ph) = random_coords(g, &mut rng);
            let z = d.invert(sg, ph)?;
            let b = d.base(z);
            Some(lift(&b, curve.value_at(&d, &b)))
        })
        .collect();
    let orbits = starts
        .par_iter()
        .map(|&p0| {
            let norm = |p: (C64, C64)| (p.0.norm_sqr() + p.1.norm_sqr()).sqrt();
            let mut p = p0;
            let mut max_ratio = 0.0f64;
            let mut k = 0;
            while k < max_steps && norm(p) > 0.5 * norm(p0) {
                let q = f.eval(p.0, p.1);
                max_ratio = max_ratio.max(norm(q) / norm(p));
                p = q;
                k += 1;
            }
            OriginalOrbit {
                start: norm(p0),
                end: norm(p),
                steps: k,
                max_ratio,
                tangent_gap: (projective_gap(p0, target), projective_gap(p, target)),
            }
        })
        .collect();
    PushedCurve {
        points,
        residual,
        tangent_gap,
        orbits,
    }
}
