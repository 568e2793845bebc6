//! Commands: parse the germ, run the pipeline, fill a [`Report`].

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_traits::Zero;
use parabolic_core::blowup::{blow_up, is_regular_along, linear_chain, Axis, LiftedGerm};
use parabolic_core::classify::{certify_chain, certify_easy_c, classify, Case, Classification, FLOAT_ZERO};
use parabolic_core::germ::fmt_scalar;
use parabolic_core::hard::{normalize, HARD_TOL};
use parabolic_core::index::{adapted_form, contour_residue, residual_index, AdaptedForm, IndexData};
use parabolic_core::petal::{
    contraction_probe, iterate_orbit, membership_raster, prepare, push_forward_curve, seed_orbits,
    solve_parabolic_curve, validate_estimates, write_curve_csv, write_orbit_csv, write_raster_csv, Dynamics,
    SolverConfig, SEED_STEPS,
};
use parabolic_core::series::{Mode, Scalar, C64, POLY_TRUNC};
use parabolic_core::{default_ladder, Error, Germ2, Proj};

use crate::parse::{parse_direction, parse_germ, print_germ, GermError, GermSource, ParsedGerm};
use crate::report::{Report, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Index,
    Classify,
    Chain,
    Normalize,
    Curve,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Index => "index",
            Command::Classify => "classify",
            Command::Chain => "chain",
            Command::Normalize => "normalize",
            Command::Curve => "curve",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub command: Command,
    pub direction: Option<String>,
    pub steps: Option<usize>,
    pub trunc: Option<u32>,
    pub mode: Mode,
    pub delta: Option<f64>,
    pub grid: Option<usize>,
    pub depth: Option<i64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Treat the input as written in an adapted chart.
    pub adapted: bool,
}

impl Options {
    pub fn new(command: Command) -> Self {
        Options {
            command,
            direction: None,
            steps: None,
            trunc: None,
            mode: Mode::Exact,
            delta: None,
            grid: None,
            depth: None,
            seed: 1,
            out: None,
            adapted: false,
        }
    }

    fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::default();
        if let Some(d) = self.delta {
            c.delta0 = d;
        }
        if let Some(g) = self.grid {
            c.grid = g;
        }
        if let Some(d) = self.depth {
            c.depth = d;
        }
        c.seed = self.seed;
        c
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Report,
    pub code: i32,
    pub files: Vec<PathBuf>,
}

/// Tolerance attached to float coefficients (the vanishing threshold of the
/// classification).
const COEFF_TOL: f64 = FLOAT_ZERO;
const CONTOUR_RADIUS: f64 = 1e-2;
const CONTOUR_NODES: usize = 2048;
const CONTOUR_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-8;
const PUSHED_TOL: f64 = 1e-7;
const CONTRACTION_MAX: f64 = 0.9;
/// Working degree for blow-ups of untruncated input.
pub const BLOWUP_TRUNC: u32 = 32;
const RASTER_RES: usize = 256;
const VALIDATE_STEPS: usize = 200;
const TAIL_STEPS: usize = 100_000;

enum Failure {
    Syntax(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<GermError> for Failure {
    fn from(e: GermError) -> Self {
        match e {
            GermError::Syntax(s) => Failure::Syntax(s.to_string()),
            GermError::Germ(e) => Failure::Core(e),
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;
type Classified<S> = (LiftedGerm<S>, AdaptedForm<S>, IndexData<S>, Classification<S>);

struct Ctx<'a> {
    opts: &'a Options,
    report: Report,
    files: Vec<PathBuf>,
    summary: Vec<String>,
    /// Input given as complete polynomials (no `--trunc`).
    polynomial: bool,
}

pub fn run(text: &str, opts: &Options) -> Outcome {
    let mut cx = Ctx {
        opts,
        report: Report::default(),
        files: Vec::new(),
        summary: Vec::new(),
        polynomial: opts.trunc.is_none(),
    };
    let res = cx.dispatch(text);
    let code = match res {
        Ok(()) => 0,
        Err(f) => cx.error(f),
    };
    if !cx.summary.is_empty() {
        let lines = std::mem::take(&mut cx.summary);
        let s = cx.report.section("summary");
        for (k, l) in lines.into_iter().enumerate() {
            s.put(format!("line.{k}"), Value::text(l));
        }
    }
    if !cx.files.is_empty() {
        let names: Vec<String> = cx
            .files
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect();
        let s = cx.report.section("cli_io.files");
        for (k, n) in names.into_iter().enumerate() {
            s.put(format!("csv.{k}"), Value::text(n));
        }
    }
    cx.provenance();
    Outcome {
        report: cx.report,
        code,
        files: cx.files,
    }
}

impl Ctx<'_> {
    fn dispatch(&mut self, text: &str) -> Run<()> {
        let src = GermSource {
            text: text.to_string(),
            trunc: self.opts.trunc,
            mode: self.opts.mode,
        };
        match parse_germ(&src)? {
            ParsedGerm::Exact(g) => self.with_germ(g),
            ParsedGerm::Float(g) => self.with_germ(g),
        }
    }

    fn with_germ<S: Scalar>(&mut self, g: Germ2<S>) -> Run<()> {
        self.report
            .section("cli_io.parse_germ")
            .put("germ", Value::text(print_germ(&g)))
            .put("mode", Value::text(S::MODE.to_string()))
            .put("trunc", trunc_value(g.trunc()))
            .put("polynomial", Value::Flag(g.exact_poly));
        match self.opts.command {
            Command::Analyze => self.analyze(&g),
            Command::Index => self.index(&g).map(|_| ()),
            Command::Classify => self.classify(&g).map(|_| ()),
            Command::Chain => self.chain(&g),
            Command::Normalize => self.normalize(&g),
            Command::Curve => self.curve(&g, false),
            Command::Validate => self.curve(&g, true),
        }
    }

    fn analyze<S: Scalar>(&mut self, g: &Germ2<S>) -> Run<()> {
        let nu = g.order()?;
        let dicritical = g.is_dicritical()?;
        let s = self.report.section("germ_analysis.order");
        s.put("nu", Value::exact(nu)).put("dicritical", Value::Flag(dicritical));
        if S::MODE == Mode::Exact && g.exact_poly {
            let pc = g.pure_order()?;
            let s = self.report.section("germ_analysis.pure_order");
            s.put("nu_o", Value::exact(pc.pure_order))
                .put("singular", Value::Flag(pc.singular))
                .put("corner", Value::Flag(pc.corner))
                .put("fix_components_at_least", Value::exact(pc.fix_components));
        }
        if dicritical {
            self.summary(format!("order {nu}; the origin is dicritical"));
            return Ok(());
        }
        let dirs = g.characteristic_directions()?;
        let s = self.report.section("germ_analysis.characteristic_directions");
        s.put("count", Value::exact(dirs.directions.len()))
            .put("total_multiplicity", Value::exact(dirs.total_multiplicity()));
        for (k, d) in dirs.directions.iter().enumerate() {
            s.put(format!("direction.{k}"), Value::exact(&d.v))
                .put(format!("lambda.{k}"), Value::scalar(&d.lambda, COEFF_TOL))
                .put(format!("degenerate.{k}"), Value::Flag(d.degenerate))
                .put(format!("multiplicity.{k}"), Value::exact(d.multiplicity));
        }
        if let Some(irr) = &dirs.irrational {
            s.put("irrational.factor", Value::text(format!("{:?}", irr.factor)));
            for (k, (c, l)) in irr.numeric.iter().enumerate() {
                s.put(format!("irrational.slope.{k}"), Value::complex(*c, COEFF_TOL))
                    .put(format!("irrational.lambda.{k}"), Value::complex(*l, COEFF_TOL));
            }
        }
        if S::MODE == Mode::Exact && g.exact_poly {
            for d in &dirs.directions {
                let reg = is_regular_along(g, &d.v)?;
                let s = self.report.section("blowup_engine.is_regular_along");
                s.put("direction", Value::exact(&d.v))
                    .put("regular", Value::Flag(reg.regular));
                if let Some(pc) = reg.class {
                    s.put("lift_pure_order", Value::exact(pc.pure_order));
                }
                if let Some(n) = reg.note {
                    s.put("note", Value::text(n));
                }
            }
        }
        self.summary(format!(
            "order {nu}, {} characteristic direction(s) with rational slope",
            dirs.directions.len()
        ));
        Ok(())
    }

    /// The germ in an adapted chart: the input itself when it fixes
    /// `{z = 0}` pointwise (or `--adapted`), else its blow-up at `--direction`.
    fn lift<S: Scalar>(&mut self, g: &Germ2<S>) -> Run<LiftedGerm<S>> {
        let as_is = LiftedGerm::adapted(g.clone());
        let lifted = if self.opts.adapted || (self.opts.direction.is_none() && as_is.fixes_divisor()) {
            self.report
                .section("blowup_engine.lift")
                .put("chart", Value::text("adapted input"))
                .put("fixes_divisor", Value::Flag(as_is.fixes_divisor()));
            as_is
        } else {
            let Some(dtext) = &self.opts.direction else {
                return Err(Failure::Core(Error::Invalid(
                    "the input does not fix {z = 0} pointwise; give --direction [a:b] to blow up".into(),
                )));
            };
            let v: Proj<S> = parse_direction(dtext)?;
            // the lift of a polynomial is a series: give it a finite degree
            let base = if g.trunc() >= POLY_TRUNC {
                g.with_trunc(BLOWUP_TRUNC)
            } else {
                g.clone()
            };
            let l = blow_up(&base, &v)?;
            self.report
                .section("blowup_engine.blow_up")
                .put("direction", Value::exact(&v))
                .put("chart", Value::text(l.chart.describe()))
                .put("lifted_trunc", Value::exact(l.germ.trunc()))
                .put("lifted", Value::text(print_germ(&l.germ)))
                .put("fixes_divisor", Value::Flag(l.fixes_divisor()));
            l
        };
        Ok(lifted)
    }

    fn index<S: Scalar>(&mut self, g: &Germ2<S>) -> Run<(LiftedGerm<S>, AdaptedForm<S>, IndexData<S>)> {
        let lifted = self.lift(g)?;
        let af = adapted_form(&lifted)?;
        let idx = residual_index(&af)?;
        let fmt_exp = |e: Option<i64>| e.map(|v| v.to_string()).unwrap_or_else(|| "inf".into());
        let contour = contour_residue(&af, CONTOUR_RADIUS, CONTOUR_NODES);
        let gap = (contour - idx.index.to_c64()).norm() / idx.index.to_c64().norm().max(1.0);
        let s = self.report.section("residual_index.residual_index");
        s.put("r", Value::exact(af.r))
            .put("mu", Value::exact(fmt_exp(idx.mu)))
            .put("nu", Value::exact(fmt_exp(idx.nu)))
            .put("tangential", Value::Flag(idx.tangential))
            .put(
                "m",
                Value::exact(idx.m.map(|m| m.to_string()).unwrap_or_else(|| "inf".into())),
            )
            .put("n", Value::exact(idx.n))
            .put("ind", Value::scalar(&idx.index, COEFF_TOL))
            .put("contour.radius", Value::exact_f64(CONTOUR_RADIUS))
            .put("contour.nodes", Value::exact(CONTOUR_NODES))
            .put("contour.value", Value::complex(contour, CONTOUR_TOL))
            .put("contour.relative_gap", Value::approx(gap, CONTOUR_TOL));
        let m = idx.m.map(|m| m.to_string()).unwrap_or_else(|| "inf".into());
        self.summary(format!("Ind = {}, m = {m}, n = {}", fmt_scalar(&idx.index), idx.n));
        Ok((lifted, af, idx))
    }

    fn classify<S: Scalar>(&mut self, g: &Germ2<S>) -> Run<Classified<S>> {
        let (lifted, af, idx) = self.index(g)?;
        let cls = classify(&af, &idx);
        let s = self.report.section("case_classifier.classify");
        s.put("case", Value::text(cls.case.to_string()))
            .put("r", Value::exact(cls.r))
            .put("curve_count", Value::exact(cls.curve_count))
            .put("chain_steps", Value::exact(cls.chain_steps));
        if let Some(t) = &cls.target {
            s.put("target", Value::exact(t));
        }
        if let Some(l) = &cls.lambda {
            s.put("lambda", Value::scalar(l, COEFF_TOL));
        }
        if let Some(z) = &cls.z0 {
            s.put("z0", Value::scalar(z, COEFF_TOL));
        }
        if cls.case == Case::EasyC {
            let cert = certify_easy_c(&af)?;
            s.put("rescale.alpha", Value::text(cert.alpha.to_string()))
                .put("rescale.leading", Value::text(cert.leading.to_string()));
        }
        self.verdict(g, &idx, &cls)?;
        self.summary(format!(
            "case {}, at least {} parabolic curve(s)",
            cls.case, cls.curve_count
        ));
        if matches!(cls.case, Case::IndexZero | Case::NotSingular | Case::NotTangential) {
            return Err(Failure::Core(Error::Hypothesis(format!(
                "case {}: no curve count available",
                cls.case
            ))));
        }
        Ok((lifted, af, idx, cls))
    }

    /// Which general results reach the point.  The nondegenerate-direction
    /// result needs the blown-up direction to be nondegenerate; the index
    /// result needs `Ind` outside the nonnegative rationals; the regular
    /// criterion needs regularity along `[v]` and `Ind != 0`.
    fn verdict<S: Scalar>(&mut self, g: &Germ2<S>, idx: &IndexData<S>, cls: &Classification<S>) -> Run<()> {
        let nondeg = match (&self.opts.direction, self.opts.adapted) {
            (Some(dtext), false) => {
                let v: Proj<S> = parse_direction(dtext)?;
                let dirs = g.characteristic_directions()?;
                dirs.find(&v).map(|d| !d.degenerate)
            }
            _ => None,
        };
        let ind = idx.index.to_c64();
        let rational = idx.index.to_qc().is_some_and(|q| q.im.is_zero());
        let in_q_plus = S::MODE == Mode::Exact && rational && ind.re >= 0.0;
        let regular = match (&self.opts.direction, self.opts.adapted, S::MODE, g.exact_poly) {
            (Some(dtext), false, Mode::Exact, true) => {
                let v: Proj<S> = parse_direction(dtext)?;
                Some(is_regular_along(g, &v)?.regular)
            }
            _ => None,
        };
        let nonzero = !idx.index.negligible(COEFF_TOL);
        let s = self.report.section("case_classifier.verdict");
        let opt = |b: Option<bool>, yes: &str, no: &str| {
            Value::text(b.map(|b| if b { yes } else { no }).unwrap_or("unknown"))
        };
        s.put("direction_nondegenerate", opt(nondeg, "yes", "no"))
            .put("index_nonnegative_rational", Value::Flag(in_q_plus))
            .put("regular_along_direction", opt(regular, "yes", "no"))
            .put("nondegenerate_direction_result", opt(nondeg, "applies", "inapplicable"))
            .put(
                "index_outside_rationals_result",
                Value::text(if S::MODE == Mode::Exact && !in_q_plus && nonzero {
                    "applies"
                } else if in_q_plus {
                    "inapplicable"
                } else {
                    "unknown"
                }),
            )
            .put(
                "regular_nonzero_index_result",
                opt(regular.map(|r| r && nonzero), "applies", "inapplicable"),
            );
        let prior = nondeg == Some(false) && in_q_plus;
        s.put("prior_results_inapplicable", Value::Flag(prior)).put(
            "covered_by_nondegenerate_direction",
            Value::Flag(cls.covered_by_nondegenerate_direction()),
        );
        Ok(())
    }

    fn chain<S: Scalar>(&mut self, g: &Germ2<S>) -> Run<()> {
        let (lifted, _, _, cls) = self.classify(g)?;
        if let Some(k) = self.opts.steps {
            let end = linear_chain(&lifted, k)?;
            let s = self.report.section("blowup_engine.linear_chain");
            s.put("steps", Value::exact(k))
                .put("chart", Value::text(end.chart.describe()));
            let order = end.germ.order()?;
            s.put("order", Value::exact(order));
            let dirs = end.germ.characteristic_directions()?;
            for (i, d) in dirs.directions.iter().enumerate() {
                s.put(format!("direction.{i}"), Value::exact(&d.v))
                    .put(format!("degenerate.{i}"), Value::Flag(d.degenerate));
            }
        }
        match certify_chain(&lifted, &cls) {
            Ok(c) => {
                let s = self.report.section("case_classifier.certify_chain");
                s.put("steps", Value::exact(c.steps))
                    .put("direction", Value::exact(&c.direction))
                    .put("lambda_predicted", Value::scalar(&c.lambda_predicted, COEFF_TOL))
                    .put("lambda_found", Value::scalar(&c.lambda_found, COEFF_TOL))
                    .put("nondegenerate", Value::Flag(c.nondegenerate))
                    .put("order", Value::exact(c.order))
                    .put("curve_count", Value::exact(c.curve_count));
                self.summary(format!(
                    "chain of {} step(s) ends at nondegenerate {}",
                    c.steps, c.direction
                ));
                Ok(())
            }
            Err(Error::ChainTerminated { step, reason }) if cls.case == Case::Hard => {
                self.report
                    .section("case_classifier.certify_chain")
                    .put("stopped_at_step", Value::exact(step))
                    .put("reason", Value::text(reason));
                self.summary(format!(
                    "hard case: the chain stops at step {step}; use `normalize` and `curve`"
                ));
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn normalize<S: Scalar>(&mut self, g: &Germ2<S>) -> Run<()> {
        let (_, af, _, cls) = self.classify(g)?;
        if cls.case != Case::Hard {
            return Err(Failure::Core(Error::Hypothesis(format!(
                "normal forms are built in the hard case, not {}",
                cls.case
            ))));
        }
        let ng = normalize(&af)?;
        let ladder = match self.opts.depth {
            Some(d) => parabolic_core::shift_ladder(&ng, parabolic_core::OdeForm::Linearized, d)?,
            None => default_ladder(&ng)?,
        };
        let tol = HARD_TOL;
        let s = self.report.section("hard_case_normalizer.normalize");
        s.put("r", Value::exact(ng.r))
            .put("n", Value::exact(ng.n))
            .put("alpha", Value::scalar(&ng.alpha, tol))
            .put("a", Value::scalar(&ng.a, tol))
            .put("root_candidates", Value::exact(ng.candidates.len()));
        for (k, e) in ng.shape().iter().enumerate() {
            s.put(format!("shape.{k}.term"), Value::text(e.label))
                .put(format!("shape.{k}.expected"), Value::scalar(&e.expected, tol))
                .put(format!("shape.{k}.found"), Value::scalar(&e.found, tol));
        }
        ng.check_shape()?;
        let s = self.report.section("hard_case_normalizer.shift_ladder");
        s.put("depth", Value::exact(ladder.depth))
            .put("levels", Value::exact(ladder.levels.len()))
            .put("i", Value::exact(ladder.i_exp))
            .put("J", Value::exact(ladder.j_exp));
        for l in &ladder.levels {
            let ord = |o: Option<i64>| o.map(|v| v.to_string()).unwrap_or_else(|| "none".into());
            s.put(format!("level.{}.order_before", l.h), Value::exact(ord(l.order_before)))
                .put(format!("level.{}.order_after", l.h), Value::exact(ord(l.order_after)))
                .put(format!("level.{}.gains_one", l.h), Value::Flag(l.gains_one()));
            let res = match S::MODE {
                Mode::Exact => Value::exact_f64(l.residual),
                Mode::Float => Value::approx(l.residual, tol),
            };
            s.put(format!("level.{}.ode_residual", l.h), res);
        }
        self.summary(format!("hard case normalized with r = {}, n = {}", ng.r, ng.n));
        Ok(())
    }

    fn curve<S: Scalar>(&mut self, g: &Germ2<S>, validate: bool) -> Run<()> {
        let (lifted, af, _, cls) = self.classify(g)?;
        if cls.case != Case::Hard {
            return Err(Failure::Core(Error::Hypothesis(format!(
                "the curve construction covers the hard case; case {} is certified by `chain`",
                cls.case
            ))));
        }
        let cfg = self.opts.solver_config();
        let (ng, ladder) = prepare(&af.to_float(), &cfg)?;
        let sol = solve_parabolic_curve(&ng, &ladder, &cfg)?;
        let s = self.report.section("petal_numerics.solve_parabolic_curve");
        s.put("delta", Value::exact_f64(sol.delta))
            .put("grid", Value::exact(format!("{}x{}", cfg.grid, cfg.grid)))
            .put("components", Value::exact(sol.components.len()))
            .put("rejected_deltas", Value::exact(sol.rejected.len()))
            .put("contraction", Value::approx(sol.contraction(), CONTRACTION_MAX))
            .put("separation", Value::measured(sol.separation()));
        for a in &sol.rejected {
            s.put(format!("rejected.{}", a.delta), Value::text(a.reason.clone()));
        }
        let target = match (&self.opts.direction, lifted.chart.history.is_empty()) {
            (Some(dtext), false) => {
                let (a, b) = parse_direction::<S>(dtext)?.coords();
                (a.to_c64(), b.to_c64())
            }
            // curves of an adapted germ in the hard case are tangent to the divisor's normal
            _ => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        };
        let f = g.to_float();
        let chart = lifted.chart.clone();
        let swap = lifted.exceptional == Axis::Second;
        for c in &sol.components {
            let m = c.component();
            let seeds = seed_orbits(c, cfg.seeds, cfg.seed, SEED_STEPS);
            let seeds_ok = seeds.iter().filter(|o| o.converges()).count();
            let probe = contraction_probe(&c.solver, 2, cfg.seed)?;
            let pushed = if swap {
                // the divisor is the second axis: evaluate in swapped coordinates
                let fs = Germ2 {
                    f1: f.f2.swap(),
                    f2: f.f1.swap(),
                    exact_poly: f.exact_poly,
                };
                push_forward_curve(c, &chart, &fs, (target.1, target.0), cfg.seeds, SEED_STEPS, cfg.seed)
            } else {
                push_forward_curve(c, &chart, &f, target, cfg.seeds, SEED_STEPS, cfg.seed)
            };
            let orbits_ok = pushed.orbits.iter().filter(|o| o.converges()).count();
            let gap_max = seeds.iter().map(|o| o.curve_gap).fold(0.0, f64::max);
            let (lo, hi) = seeds.iter().fold((f64::INFINITY, 0.0f64), |(l, h), o| {
                (l.min(o.sandwich.0), h.max(o.sandwich.1))
            });
            let s = self.report.section(format!("petal_numerics.component.{m}"));
            s.put("sweeps", Value::exact(c.iteration.sweeps()))
                .put("converged", Value::Flag(c.iteration.converged))
                .put("contraction", Value::approx(c.iteration.contraction, CONTRACTION_MAX))
                .put(
                    "contraction_probe",
                    Value::approx(probe.iter().copied().fold(0.0, f64::max), CONTRACTION_MAX),
                )
                .put("residual.max_abs", Value::approx(c.summary.max_abs, RESIDUAL_TOL))
                .put("residual.max_rel", Value::measured(c.summary.max_rel))
                .put("residual.telescoped_abs", Value::measured(c.summary.telescoped_abs))
                .put("seed_orbits", Value::exact(seeds.len()))
                .put("seed_orbits_converging", Value::exact(seeds_ok))
                .put("seed_orbits.curve_gap", Value::approx(gap_max, 1e-7))
                .put("seed_orbits.band_low", Value::approx(lo, 2.0 / 3.0))
                .put("seed_orbits.band_high", Value::approx(hi, 2.0))
                .put("pushed.residual", Value::approx(pushed.residual, PUSHED_TOL))
                .put("pushed.orbits", Value::exact(pushed.orbits.len()))
                .put("pushed.orbits_converging", Value::exact(orbits_ok));
            if let (Some(first), Some(last)) = (pushed.tangent_gap.first(), pushed.tangent_gap.last()) {
                s.put("pushed.tangent_gap.inner", Value::measured(*first))
                    .put("pushed.tangent_gap.outer", Value::measured(*last));
            }
            if let Some(dir) = self.out_dir() {
                let d = c.solver.domain;
                self.csv(&dir, &format!("curve_c{m}.csv"), |w| {
                    write_curve_csv(w, c.curve(), &c.residuals)
                })?;
                let raster = membership_raster(&d, RASTER_RES);
                self.csv(&dir, &format!("raster_c{m}.csv"), |w| write_raster_csv(w, &raster))?;
                if let Some(z0) = d.invert(0.5, 0.0) {
                    let dy = Dynamics::Normalized {
                        map: &c.solver.map,
                        curve: Some(c.curve()),
                    };
                    let o = iterate_orbit(&d, dy, z0, 10_000)?;
                    self.csv(&dir, &format!("orbit_c{m}.csv"), |w| write_orbit_csv(w, &o))?;
                }
            }
            if validate {
                let e = validate_estimates(&c.solver, c.curve(), VALIDATE_STEPS, TAIL_STEPS);
                let s0 = c.solver.domain.s();
                let s = self.report.section(format!("petal_numerics.validate.{m}"));
                s.put("samples", Value::exact(e.samples))
                    .put("orbit_derivative", Value::measured(e.orbit_derivative))
                    .put("t_derivative_zero", Value::measured(e.t_derivative_zero))
                    .put("t_derivative_fixed", Value::measured(e.t_derivative_fixed))
                    .put("orbit_difference", Value::measured(e.orbit_difference))
                    .put("critical_exponent", Value::measured(s0))
                    .put("tails_split", Value::Flag(e.tails_split(s0)));
                for (k, t) in e.tails.iter().enumerate() {
                    s.put(format!("tail.{k}.s"), Value::measured(t.s))
                        .put(format!("tail.{k}.q"), Value::measured(t.q))
                        .put(format!("tail.{k}.doubling_ratio"), Value::measured(t.doubling_ratio))
                        .put(format!("tail.{k}.converges"), Value::Flag(t.converges));
                }
            }
        }
        let worst = sol.worst();
        let ok = worst.max_abs < RESIDUAL_TOL && sol.contraction() < CONTRACTION_MAX;
        self.summary(format!(
            "{} parabolic curve(s) at delta = {}; worst residual {:e}",
            sol.components.len(),
            sol.delta,
            worst.max_abs
        ));
        if !ok {
            return Err(Failure::Core(Error::NonConvergence(format!(
                "residual {:e} or contraction {:.3} above tolerance",
                worst.max_abs,
                sol.contraction()
            ))));
        }
        Ok(())
    }

    fn out_dir(&self) -> Option<PathBuf> {
        self.opts.out.clone()
    }

    fn csv(
        &mut self,
        dir: &Path,
        name: &str,
        write: impl FnOnce(BufWriter<File>) -> parabolic_core::Result<()>,
    ) -> Run<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        let f = File::create(&path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        write(BufWriter::new(f))?;
        self.files.push(path);
        Ok(())
    }

    fn summary(&mut self, text: String) {
        self.summary.push(text);
    }

    fn error(&mut self, f: Failure) -> i32 {
        let (kind, message, code) = match f {
            Failure::Syntax(m) => ("syntax".to_string(), m, 1),
            Failure::Core(e) => {
                let code = match &e {
                    // identity up to a truncation: more terms could settle it
                    Error::OrderUndefined { .. } if !self.polynomial => 3,
                    Error::OrderUndefined { .. } => {
                        let m = "order undefined: the germ is the identity".to_string();
                        return self.error_entry("order_undefined", m, 2);
                    }
                    Error::NotTangent(_) => 1,
                    e => e.exit_code(),
                };
                (error_kind(&e).to_string(), e.to_string(), code)
            }
        };
        self.error_entry(&kind, message, code)
    }

    fn error_entry(&mut self, kind: &str, message: String, code: i32) -> i32 {
        self.report
            .section("error")
            .put("kind", Value::text(kind))
            .put("message", Value::text(message))
            .put("exit_code", Value::exact(code));
        code
    }

    fn provenance(&mut self) {
        let o = self.opts;
        let cfg = o.solver_config();
        let s = self.report.section("provenance");
        s.put("tool", Value::text(concat!("parabolic ", env!("CARGO_PKG_VERSION"))))
            .put("command", Value::text(o.command.name()))
            .put("mode", Value::text(o.mode.to_string()))
            .put(
                "trunc",
                Value::text(o.trunc.map(|t| t.to_string()).unwrap_or_else(|| "none".into())),
            )
            .put(
                "direction",
                Value::text(o.direction.clone().unwrap_or_else(|| "none".into())),
            )
            .put("adapted", Value::Flag(o.adapted))
            .put("seed", Value::exact(o.seed))
            .put("tolerance.coefficient", Value::exact_f64(COEFF_TOL))
            .put("tolerance.hard_case", Value::exact_f64(HARD_TOL));
        if matches!(o.command, Command::Curve | Command::Validate) {
            s.put("solver.delta0", Value::exact_f64(cfg.delta0))
                .put("solver.min_delta", Value::exact_f64(cfg.min_delta))
                .put("solver.grid", Value::exact(cfg.grid))
                .put("solver.depth", Value::exact(cfg.depth))
                .put("solver.shift_depth", Value::exact(cfg.shift_depth))
                .put("solver.sigma_min", Value::exact_f64(cfg.sigma_min))
                .put("solver.sigma_max", Value::exact_f64(cfg.sigma_max))
                .put("solver.kmax", Value::exact(cfg.kmax))
                .put("solver.floor", Value::exact_f64(cfg.floor))
                .put("solver.sweep_tol", Value::exact_f64(cfg.tol))
                .put("solver.seeds", Value::exact(cfg.seeds))
                .put("tolerance.residual", Value::exact_f64(RESIDUAL_TOL))
                .put("tolerance.pushed_residual", Value::exact_f64(PUSHED_TOL))
                .put("tolerance.contraction", Value::exact_f64(CONTRACTION_MAX));
        }
    }
}

fn trunc_value(t: u32) -> Value {
    if t >= POLY_TRUNC {
        Value::text("none")
    } else {
        Value::exact(t)
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::ModeMismatch => "mode_mismatch",
        Error::ZeroConstantTerm { .. } | Error::NonzeroConstantTerm { .. } | Error::NotAUnit { .. } => "series",
        Error::DivergentComposition => "divergent_composition",
        Error::FloatUnsupported { .. } => "float_unsupported",
        Error::TruncationExhausted { .. } => "truncation_exhausted",
        Error::OrderUndefined { .. } => "order_undefined",
        Error::NotTangent(_) => "not_tangent",
        Error::Dicritical => "dicritical",
        Error::NotCharacteristic(_) => "not_characteristic",
        Error::NotTangential => "not_tangential",
        Error::Hypothesis(_) => "hypothesis",
        Error::ChainTerminated { .. } => "chain_terminated",
        Error::NotDivisible(_) => "not_divisible",
        Error::OnBranchCut => "branch_cut",
        Error::NonConvergence(_) => "non_convergence",
        Error::Invalid(_) => "invalid",
    }
}
