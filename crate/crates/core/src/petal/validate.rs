//! Empirical versions of the derivative and orbit estimates behind the
//! contraction of `T`.  Nothing here fails: every check returns the
//! constant it observed.

use rayon::prelude::*;

use super::*;

#[derive(Clone, Debug)]
pub struct EstimateReport {
    /// `max |dZ_k/dZ| / (|Z_k/Z|^(r+1+b) |log Z_k / log Z|^b)`.
    pub orbit_derivative: f64,
    /// `max |d(Tw)/dZ| / (|Z| |log |Z||^|J|)` for `w = 0`.
    pub t_derivative_zero: f64,
    /// The same for the fixed point (which is also its own derivative bound).
    pub t_derivative_fixed: f64,
    /// `max |Z'_k - Z_k| / (|Z|^(3-1/n) |log |Z||^(|J|-1/n) |h_2 - h_1|)`.
    pub orbit_difference: f64,
    /// Sums of `|Z_k|^s |log Z_k|^q`: `s = s0 + 1, q = 0`, `s = s0 + 1, q = 3`
    /// and `s = s0, q = 0`.
    pub tails: Vec<TailReport>,
    pub samples: usize,
}

impl EstimateReport {
    /// The sums converge exactly in the cases with `s > r + b`.
    pub fn tails_split(&self, s0: f64) -> bool {
        self.tails.iter().all(|t| t.converges == (t.s > s0 + 1e-12))
    }
}

/// Sample nodes: three rows, eight columns.
fn sample_nodes(g: &PetalGrid) -> Vec<usize> {
    let mut v = Vec::new();
    for i in [g.n_sigma / 4, g.n_sigma / 2, 3 * g.n_sigma / 4] {
        for k in 0..8 {
            v.push(i * g.n_phi + (2 * k + 1) * g.n_phi / 16);
        }
    }
    v
}

/// `Z_k` for `k <= steps` under `Z -> f^_1(Z, w(Z))`.
fn orbit(map: &HardMap, d: &PetalDomain, w: &CurveApprox, z0: C64, steps: usize) -> Vec<C64> {
    let mut b = d.base(z0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z0);
    for _ in 0..steps {
        let wv = curve_value(map, d, w, &b);
        b = map.step(&b, wv).0;
        out.push(b.z);
    }
    out
}

/// Runs the checks on a converged curve; `steps` is the orbit length used by
/// the finite differences, `tail_steps` the one used by the sums.
pub fn validate_estimates(
    solver: &PetalSolver,
    fixed: &CurveApprox,
    steps: usize,
    tail_steps: usize,
) -> EstimateReport {
    let d = solver.domain;
    let map = &solver.map;
    let g = &fixed.grid;
    let (r, n) = (d.r as f64, d.n as f64);
    let b = d.beta();
    let jabs = g.jabs;
    let nodes = sample_nodes(g);

    let orbit_derivative = nodes
        .par_iter()
        .map(|&i| {
            let z = g.nodes[i].z;
            let h = 1e-7 * z.norm();
            let plus = orbit(map, &d, fixed, z + h, steps);
            let minus = orbit(map, &d, fixed, z - h, steps);
            let centre = orbit(map, &d, fixed, z, steps);
            let lz = d.branch.log(z);
            (1..=steps)
                .map(|k| {
                    let dz = (plus[k] - minus[k]) / (2.0 * h);
                    let zk = centre[k];
                    let shape = (zk / z).norm().powf(r + 1.0 + b) * (d.branch.log(zk) / lz).norm().powf(b);
                    dz.norm() / shape
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);

    let t_derivative = |w: &CurveApprox| {
        nodes
            .par_iter()
            .map(|&i| {
                let z = g.nodes[i].z;
                let h = 1e-7 * z.norm();
                let tv = |zz: C64| {
                    let bb = d.base(zz);
                    solver.t_value(w, bb, w.value_at(&d, &bb)).value
                };
                let dt = (tv(z + h) - tv(z - h)) / (2.0 * h);
                dt.norm() / (z.norm() * z.norm().ln().abs().powf(jabs))
            })
            .reduce(|| 0.0, f64::max)
    };
    let zero = CurveApprox::zero(d, g.clone());
    let t_derivative_zero = t_derivative(&zero);
    let t_derivative_fixed = t_derivative(fixed);

    let eps = 1e-3;
    let mut bumped = fixed.clone();
    for (k, v) in bumped.h.iter_mut().enumerate() {
        let phase = (k % g.n_phi) as f64 / g.n_phi as f64;
        *v += C64::from_polar(eps, 2.0 * PI * phase);
    }
    let orbit_difference = nodes
        .par_iter()
        .map(|&i| {
            let z = g.nodes[i].z;
            let a = orbit(map, &d, fixed, z, steps);
            let c = orbit(map, &d, &bumped, z, steps);
            let shape = z.norm().powf(3.0 - 1.0 / n) * z.norm().ln().abs().powf(jabs - 1.0 / n) * eps;
            a.iter()
                .zip(&c)
                .map(|(p, q)| (p - q).norm() / shape)
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);

    let start = g.nodes[nodes[nodes.len() / 2]].z;
    let long = iterate_orbit(
        &d,
        Dynamics::Normalized {
            map,
            curve: Some(fixed),
        },
        start,
        tail_steps,
    );
    let s0 = d.s();
    let tails = match long {
        Ok(o) => vec![
            sum_tail_bound_check(&o, &d, s0 + 1.0, 0.0),
            sum_tail_bound_check(&o, &d, s0 + 1.0, 3.0),
            sum_tail_bound_check(&o, &d, s0, 0.0),
        ],
        Err(_) => Vec::new(),
    };
    EstimateReport {
        orbit_derivative,
        t_derivative_zero,
        t_derivative_fixed,
        orbit_difference,
        tails,
        samples: nodes.len(),
    }
}
