//! Pipeline orchestration: normalize, filter, balance, WL, scheme analysis,
//! primitive reduction and `f_q` retries, with recursion on every factor.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::balance::{stronger_balance, sylow_root_filter, BalanceError, BalanceOutcome, ColorSet, FilterOutcome};
use crate::ffield::{FieldCtx, FieldError, ScanBound};
use crate::fppoly::{brute_force_roots, build_fq, lift_factor, normalize_input, poly_gcd, FpPoly, PolyError, DEFAULT_ORACLE_BOUND};
use crate::par::{self, ExecMode};
use crate::report::{CertificateJson, InputInfo, NormalizedInfo, PipelineReport, StageRecord, TrailStep, VerifyReport};
use crate::scheme::{is_primitive, primitive_reduction, verify_scheme, Scheme, SchemeError};
use crate::tower::{TowerError, DEFAULT_DIMENSION_CEILING};
use crate::verify::{
    check_stable_against_oracle, color_matrix, materialize, oracle_initial_coloring, prefix_classes_unbalanced,
    root_signatures_differ, Check,
};
use crate::wl2::{sanity_checks, transpose, wl2_implicit, SanityOutcome, StableColorSet, WlError, WlOutcome};
use crate::Engine;

/// Environment variable overriding [`RunConfig::oracle_bound`].
pub const ORACLE_BOUND_ENV: &str = "WLFACTOR_ORACLE_BOUND";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Largest `p` for which roots are enumerated.
    pub oracle_bound: u64,
    /// Largest tower dimension over `F_p`.
    pub dimension_ceiling: usize,
    /// Constant of the non-residue scan bound.
    pub scan_constant: u64,
    pub full_scan: bool,
    /// Polynomials `q` (text format) tried when a component stalls.
    pub candidate_q: Vec<String>,
    /// Nesting limit for primitive reductions and `f_q` retries.
    pub max_recursion_depth: usize,
    /// Check every stable coloring against the root oracle.
    pub verify: bool,
    pub exec_mode: ExecMode,
    /// Record wall-clock stage timings (makes reports non-reproducible).
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            oracle_bound: DEFAULT_ORACLE_BOUND,
            dimension_ceiling: DEFAULT_DIMENSION_CEILING,
            scan_constant: ScanBound::default().constant,
            full_scan: false,
            candidate_q: ["0,0,1", "0,0,0,1", "1,1", "2,1", "3,1", "4,1"].map(String::from).to_vec(),
            max_recursion_depth: 2,
            verify: false,
            exec_mode: ExecMode::default(),
            timings: false,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies [`ORACLE_BOUND_ENV`] if it is set.
    pub fn with_env_override(mut self) -> Result<Self, PipelineError> {
        if let Ok(v) = std::env::var(ORACLE_BOUND_ENV) {
            self.oracle_bound = v
                .trim()
                .parse()
                .map_err(|_| PipelineError::ConfigInvalid(format!("{ORACLE_BOUND_ENV}={v} is not an integer")))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |s: &str| Err(PipelineError::ConfigInvalid(s.to_string()));
        if self.oracle_bound == 0 {
            return bad("oracle_bound must be positive");
        }
        if self.dimension_ceiling == 0 {
            return bad("dimension_ceiling must be positive");
        }
        if self.scan_constant == 0 && !self.full_scan {
            return bad("scan_constant must be positive");
        }
        if self.max_recursion_depth == 0 {
            return bad("max_recursion_depth must be at least 1");
        }
        for q in &self.candidate_q {
            if q.split(',').any(|t| t.trim().parse::<i64>().is_err()) {
                return bad("candidate_q entries must be comma-separated integers");
            }
        }
        Ok(())
    }

    pub fn engine(&self) -> Engine {
        Engine { ceiling: self.dimension_ceiling, mode: self.exec_mode }
    }

    pub fn field(&self, p: u64) -> Result<FieldCtx, PipelineError> {
        Ok(FieldCtx::with_scan(p, ScanBound { constant: self.scan_constant, full_scan: self.full_scan })?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("internal invariant broken: {0}")]
    InternalInvariantBroken(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Wl(#[from] WlError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

impl PipelineError {
    /// True for bug sentinels as opposed to bad input or exhausted limits.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            PipelineError::InternalInvariantBroken(_)
                | PipelineError::Balance(BalanceError::Internal(_))
                | PipelineError::Wl(WlError::InternalInvariantBroken(_))
                | PipelineError::Tower(TowerError::InvalidWitness { .. } | TowerError::NotCoprime { .. })
                | PipelineError::Scheme(SchemeError::NoDistinguishingCoefficient)
        )
    }

    fn is_ceiling(&self) -> bool {
        matches!(
            self,
            PipelineError::Tower(TowerError::DimensionCeilingExceeded { .. })
                | PipelineError::Wl(WlError::Tower(TowerError::DimensionCeilingExceeded { .. }))
                | PipelineError::Balance(BalanceError::Tower(TowerError::DimensionCeilingExceeded { .. }))
                | PipelineError::Poly(PolyError::Tower(TowerError::DimensionCeilingExceeded { .. }))
        )
    }
}

/// A component that could not be split, with the evidence gathered.
#[derive(Debug, Clone, PartialEq)]
pub struct StalledComponent {
    pub poly: FpPoly,
    pub certificate: Box<CertificateJson>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorOutcome {
    FullFactorization(Vec<FpPoly>),
    Partial { factors: Vec<FpPoly>, stalled: Vec<StalledComponent> },
    Stalled(StalledComponent),
}

impl FactorOutcome {
    pub fn factors(&self) -> &[FpPoly] {
        match self {
            FactorOutcome::FullFactorization(f) | FactorOutcome::Partial { factors: f, .. } => f,
            FactorOutcome::Stalled(_) => &[],
        }
    }

    pub fn stalled(&self) -> Vec<&StalledComponent> {
        match self {
            FactorOutcome::FullFactorization(_) => vec![],
            FactorOutcome::Partial { stalled, .. } => stalled.iter().collect(),
            FactorOutcome::Stalled(s) => vec![s],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FactorOutcome::FullFactorization(_) => "full",
            FactorOutcome::Partial { .. } => "partial",
            FactorOutcome::Stalled(_) => "stalled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub normalized: FpPoly,
    pub outcome: FactorOutcome,
    pub report: PipelineReport,
}

enum Split {
    Factor(FpPoly),
    Stalled(Box<CertificateJson>),
}

enum Piece {
    Linear(FpPoly),
    Stalled(StalledComponent),
}

impl Piece {
    fn poly(&self) -> &FpPoly {
        match self {
            Piece::Linear(p) => p,
            Piece::Stalled(s) => &s.poly,
        }
    }
}

/// Result of the stages up to WL on one component.
pub enum WlRun {
    Factor { stage: &'static str, factor: FpPoly },
    Stable { initial: ColorSet, stable: StableColorSet },
}

struct Run<'a> {
    cfg: &'a RunConfig,
    engine: Engine,
    stages: Vec<StageRecord>,
}

impl Run<'_> {
    fn record<T>(
        &mut self,
        name: &str,
        component: &FpPoly,
        depth: usize,
        body: impl FnOnce() -> Result<(T, String, Value), PipelineError>,
    ) -> Result<T, PipelineError> {
        let start = Instant::now();
        let (value, outcome, artifacts) = body()?;
        let timing_ms = self.cfg.timings.then(|| start.elapsed().as_secs_f64() * 1e3);
        self.stages.push(StageRecord {
            name: name.to_string(),
            component: component.to_text(),
            depth,
            outcome,
            timing_ms,
            artifacts,
        });
        Ok(value)
    }

    /// Splits `f` as far as possible.
    fn components(&mut self, f: &FpPoly, depth: usize) -> Result<Vec<Piece>, PipelineError> {
        let mut queue = VecDeque::from([f.clone()]);
        let mut pieces = Vec::new();
        while let Some(c) = queue.pop_front() {
            match c.deg() {
                0 => {}
                1 => pieces.push(Piece::Linear(c)),
                _ => match self.split(&c, depth)? {
                    Split::Factor(h) => {
                        if h.deg() == 0 || h.deg() >= c.deg() || !h.divides(&c) {
                            return Err(PipelineError::InternalInvariantBroken(format!(
                                "{} is not a proper factor of {}",
                                h.to_text(),
                                c.to_text()
                            )));
                        }
                        let rest = c.div_exact(&h)?;
                        queue.push_back(h);
                        queue.push_back(rest);
                    }
                    Split::Stalled(certificate) => pieces.push(Piece::Stalled(StalledComponent { poly: c, certificate })),
                },
            }
        }
        Ok(pieces)
    }

    fn wl_stages(&mut self, f: &FpPoly, depth: usize) -> Result<WlRun, PipelineError> {
        let filtered = self.record("filter", f, depth, || {
            Ok(match sylow_root_filter(f)? {
                FilterOutcome::Factor(h) => {
                    let a = json!({ "factor": h.to_text() });
                    (Some(h), "factor".into(), a)
                }
                FilterOutcome::AllRootsShareSignature(s) => (None, "pass".into(), json!({ "signature": s.bits() })),
            })
        })?;
        if let Some(h) = filtered {
            return Ok(WlRun::Factor { stage: "filter", factor: h });
        }
        let engine = self.engine;
        let balanced = self.record("balance", f, depth, || {
            Ok(match stronger_balance(f, &engine)? {
                BalanceOutcome::Factor(h) => {
                    let a = json!({ "factor": h.to_text() });
                    (Err(h), "factor".into(), a)
                }
                BalanceOutcome::Colors(cs) => {
                    let sigs: Vec<_> = cs.colors().iter().filter_map(|c| c.signature.as_ref().map(|s| s.value())).collect();
                    let degrees: Vec<_> = cs.colors().iter().map(|c| c.degree).collect();
                    let a = json!({ "colors": cs.len(), "signatures": sigs, "degrees": degrees });
                    (Ok(cs), "colors".into(), a)
                }
            })
        })?;
        let initial = match balanced {
            Err(h) => return Ok(WlRun::Factor { stage: "balance", factor: h }),
            Ok(cs) => cs,
        };
        let refined = self.record("wl", f, depth, || {
            Ok(match wl2_implicit(&initial, &engine)? {
                WlOutcome::Factor(h) => {
                    let a = json!({ "factor": h.to_text() });
                    (Err(h), "factor".into(), a)
                }
                WlOutcome::Stable(st) => {
                    let a = json!({ "colors": st.colors.len(), "rounds": st.rounds });
                    (Ok(st), "stable".into(), a)
                }
            })
        })?;
        match refined {
            Err(h) => Ok(WlRun::Factor { stage: "wl", factor: h }),
            Ok(stable) => Ok(WlRun::Stable { initial, stable }),
        }
    }

    fn split(&mut self, f: &FpPoly, depth: usize) -> Result<Split, PipelineError> {
        let (initial, stable) = match self.wl_stages(f, depth)? {
            WlRun::Factor { factor, .. } => return Ok(Split::Factor(factor)),
            WlRun::Stable { initial, stable } => (initial, stable),
        };
        let thin = self.record("sanity", f, depth, || {
            let s = sanity_checks(&stable)?;
            let thin = s == SanityOutcome::Thin;
            let a = json!({ "colors": stable.colors.len(), "n": f.deg() });
            Ok((thin, if thin { "thin" } else { "pass" }.into(), a))
        })?;
        let scheme = Scheme::from_stable(&stable)?;
        let primitivity = is_primitive(&scheme);
        self.record("scheme", f, depth, || {
            let a = json!({ "scheme": scheme.to_json(), "primitivity": primitivity });
            Ok(((), if primitivity.primitive { "primitive" } else { "imprimitive" }.into(), a))
        })?;
        if self.cfg.verify && f.ctx().p() <= self.cfg.oracle_bound {
            self.record("oracle", f, depth, || {
                let roots = brute_force_roots(f, self.cfg.oracle_bound)?;
                let checks = check_stable_against_oracle(&initial, &stable, &roots);
                if let Some(c) = checks.iter().find(|c| !c.passed) {
                    return Err(PipelineError::InternalInvariantBroken(format!(
                        "oracle check {} failed: {}",
                        c.name, c.detail
                    )));
                }
                Ok(((), "pass".into(), json!({ "checks": checks })))
            })?;
        }

        let mut trail = Vec::new();
        if let (Some(d), true) = (&primitivity.witness, depth < self.cfg.max_recursion_depth) {
            let red = primitive_reduction(&stable, &scheme, d)?;
            // The reduced polynomial is a radical of a split resultant, so this
            // should never strip anything; the step records it either way.
            let (g, norm) = normalize_input(&red.g)?;
            let sub = self.sub_components(&g, depth + 1)?;
            let mut step = TrailStep {
                closed_subset: d.members.iter().copied().collect(),
                n_d: red.n_d,
                coefficient_index: red.coefficient_index,
                h: red.h.to_text(),
                reduced: red.g.to_text(),
                stripped: !norm.unchanged(),
                result: "stalled".into(),
            };
            let found = match sub {
                Some(pieces) if pieces.len() >= 2 => Some(lift_factor(pieces[0].poly(), &red.h, f)?),
                Some(_) => None,
                None => {
                    step.result = "ceiling".into();
                    None
                }
            };
            if let Some(h) = &found {
                step.result = h.to_text();
            }
            let step_json = serde_json::to_value(&step).expect("trail step serializes");
            self.record("reduction", f, depth, || {
                Ok(((), if found.is_some() { "factor" } else { "stalled" }.into(), step_json))
            })?;
            trail.push(step);
            if let Some(h) = found {
                return Ok(Split::Factor(h));
            }
        }

        if depth < self.cfg.max_recursion_depth {
            for q_text in &self.cfg.candidate_q {
                let q = FpPoly::parse(f.ctx(), q_text)?.rem(f)?;
                let fq = build_fq(f, &q)?;
                let squarefree = poly_gcd(&fq, &fq.derivative())?.deg() == 0;
                if !squarefree || fq == *f {
                    let reason = if squarefree { "same polynomial" } else { "not squarefree" };
                    self.record("fq", f, depth, || {
                        Ok(((), "skipped".into(), json!({ "q": q_text, "fq": fq.to_text(), "reason": reason })))
                    })?;
                    continue;
                }
                let sub = self.sub_components(&fq, depth + 1)?;
                let found = match sub {
                    Some(pieces) if pieces.len() >= 2 => Some(lift_factor(pieces[0].poly(), &q, f)?),
                    _ => None,
                };
                let outcome = if found.is_some() { "factor" } else { "stalled" };
                let a = json!({ "q": q_text, "fq": fq.to_text(), "factor": found.as_ref().map(|h| h.to_text()) });
                self.record("fq", f, depth, || Ok(((), outcome.into(), a)))?;
                if let Some(h) = found {
                    return Ok(Split::Factor(h));
                }
            }
        }

        let colors = stable.colors.to_json();
        let component = f.to_text();
        let scheme = scheme.to_json();
        Ok(Split::Stalled(Box::new(if thin {
            CertificateJson::ThinScheme { component, colors, scheme, primitivity, trail }
        } else {
            CertificateJson::Scheme { component, colors, scheme, primitivity, trail }
        })))
    }

    /// Runs a nested pipeline; `None` if it ran into the dimension ceiling.
    fn sub_components(&mut self, g: &FpPoly, depth: usize) -> Result<Option<Vec<Piece>>, PipelineError> {
        match self.components(g, depth) {
            Ok(p) => Ok(Some(p)),
            Err(e) if e.is_ceiling() => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn sort_polys(v: &mut [FpPoly]) {
    v.sort_by(|a, b| (a.deg(), a.coeffs()).cmp(&(b.deg(), b.coeffs())));
}

/// Factors `g` as far as the pipeline allows.
pub fn factor_pipeline(g: &FpPoly, cfg: &RunConfig) -> Result<PipelineRun, PipelineError> {
    cfg.validate()?;
    let mut run = Run { cfg, engine: cfg.engine(), stages: Vec::new() };
    let (f, norm) = run.record("normalize", g, 0, || {
        let (f, rep) = normalize_input(g)?;
        let a = serde_json::to_value(&rep).expect("report serializes");
        let outcome = if rep.unchanged() { "unchanged" } else { "stripped" };
        Ok(((f, rep), outcome.into(), a))
    })?;
    let pieces = run.components(&f, 0)?;

    let mut factors = Vec::new();
    let mut stalled = Vec::new();
    for piece in pieces {
        match piece {
            Piece::Linear(h) => factors.push(h),
            Piece::Stalled(s) => stalled.push(s),
        }
    }
    sort_polys(&mut factors);
    stalled.sort_by(|a, b| (a.poly.deg(), a.poly.coeffs()).cmp(&(b.poly.deg(), b.poly.coeffs())));

    let mut product = FpPoly::one(f.ctx());
    for h in factors.iter().chain(stalled.iter().map(|s| &s.poly)) {
        if !h.divides(&f) {
            return Err(PipelineError::InternalInvariantBroken(format!("{} does not divide the input", h.to_text())));
        }
        product = product.mul(h);
    }
    if product != f {
        return Err(PipelineError::InternalInvariantBroken("factors do not multiply back to the input".into()));
    }

    let outcome = match (factors.is_empty(), stalled.len()) {
        (_, 0) => FactorOutcome::FullFactorization(factors),
        (true, 1) => FactorOutcome::Stalled(stalled.pop().expect("one stalled component")),
        _ => FactorOutcome::Partial { factors, stalled },
    };
    let report = PipelineReport {
        input: InputInfo { p: g.ctx().p(), poly: g.to_text() },
        normalized: NormalizedInfo { poly: f.to_text(), report: norm },
        outcome: outcome.label().to_string(),
        stages: run.stages,
        factors: outcome.factors().iter().map(|h| h.to_text()).collect(),
        certificates: outcome.stalled().iter().map(|s| (*s.certificate).clone()).collect(),
    };
    Ok(PipelineRun { normalized: f, outcome, report })
}

/// Runs normalize, filter, balance and WL on `g` only.
pub fn run_wl(g: &FpPoly, cfg: &RunConfig) -> Result<(FpPoly, WlRun), PipelineError> {
    cfg.validate()?;
    let (f, _) = normalize_input(g)?;
    if f.deg() < 2 {
        return Err(PipelineError::ConfigInvalid("normalized polynomial has degree < 2".into()));
    }
    let mut run = Run { cfg, engine: cfg.engine(), stages: Vec::new() };
    let out = run.wl_stages(&f, 0)?;
    Ok((f, out))
}

/// One batch line `p;coefficients`.
pub fn parse_instance(line: &str, cfg: &RunConfig) -> Result<FpPoly, PipelineError> {
    let (p, coeffs) = line
        .split_once(';')
        .ok_or_else(|| PipelineError::ConfigInvalid(format!("expected `p;coefficients`, got `{line}`")))?;
    let p: u64 = p.trim().parse().map_err(|_| PipelineError::ConfigInvalid(format!("bad prime `{p}`")))?;
    Ok(FpPoly::parse(cfg.field(p)?, coeffs.trim())?)
}

/// Factors independent instances, in parallel when the config allows it.
pub fn factor_batch(lines: &[String], cfg: &RunConfig) -> Vec<Result<PipelineRun, PipelineError>> {
    par::map(cfg.exec_mode, lines, |line| {
        let g = parse_instance(line, cfg)?;
        // Each instance runs its own stages sequentially; the batch is the parallel axis.
        let inner = RunConfig { exec_mode: ExecMode::Sequential, ..cfg.clone() };
        factor_pipeline(&g, &inner)
    })
}

/// Recomputes everything for `g` from brute-force roots and reports one
/// check per invariant.
pub fn verify_run(g: &FpPoly, cfg: &RunConfig) -> Result<VerifyReport, PipelineError> {
    let (f, _) = normalize_input(g)?;
    let roots = brute_force_roots(g, cfg.oracle_bound)?;
    let ctx = f.ctx();
    let mut checks = vec![Check::new(
        "roots",
        roots.len() == f.deg() && brute_force_roots(&f, cfg.oracle_bound)? == roots,
        format!("{} roots for degree {}", roots.len(), f.deg()),
    )];

    if f.deg() >= 2 {
        let mut run = Run { cfg, engine: cfg.engine(), stages: Vec::new() };
        let wl = run.wl_stages(&f, 0)?;
        let differ = root_signatures_differ(&ctx, &roots);
        let unbalanced = prefix_classes_unbalanced(&ctx, &roots);
        match &wl {
            WlRun::Factor { stage: "filter", .. } => {
                checks.push(Check::new("filter", differ, "filter returned a factor"));
            }
            WlRun::Factor { stage, .. } => {
                checks.push(Check::new("filter", !differ, "filter passed"));
                checks.push(Check::new("balance", !unbalanced || *stage == "balance", format!("factor found in {stage}")));
            }
            WlRun::Stable { initial, stable } => {
                checks.push(Check::new("filter", !differ, "filter passed"));
                checks.push(Check::new("balance", !unbalanced, "signature classes balanced"));
                checks.extend(check_initial_colors(initial, &roots));
                checks.extend(check_stable_against_oracle(initial, stable, &roots));
                checks.push(Check::new(
                    "rounds",
                    stable.rounds.len() <= f.deg() && stable.rounds.iter().all(|r| r.transpose_closed),
                    format!("{} rounds", stable.rounds.len()),
                ));
                let implicit = Scheme::from_stable(stable).map(|s| is_primitive(&s).primitive);
                let explicit = verify_scheme(&materialize(&stable.colors, &roots)).map(|s| is_primitive(&s).primitive);
                checks.push(Check::new(
                    "primitivity",
                    matches!((&implicit, &explicit), (Ok(a), Ok(b)) if a == b),
                    format!("implicit {implicit:?}, explicit {explicit:?}"),
                ));
            }
        }
    }

    let run = factor_pipeline(g, cfg)?;
    let mut product = FpPoly::one(ctx);
    let mut divides = true;
    for h in run.outcome.factors().iter().chain(run.outcome.stalled().iter().map(|s| &s.poly)) {
        divides &= h.divides(&f);
        product = product.mul(h);
    }
    checks.push(Check::new("factors", divides && product == f, format!("outcome {}", run.outcome.label())));
    for s in run.outcome.stalled() {
        let sub_roots = brute_force_roots(&s.poly, cfg.oracle_bound)?;
        let ok = ColorSet::from_json(s.certificate.colors(), cfg.dimension_ceiling)
            .ok()
            .map(|cs| materialize(&cs, &sub_roots))
            .is_some_and(|m| verify_scheme(&m).is_ok());
        checks.push(Check::new("certificate", ok, s.poly.to_text()));
    }

    Ok(VerifyReport { input: InputInfo { p: ctx.p(), poly: g.to_text() }, normalized: f.to_text(), roots, checks })
}

/// [`verify_run`] plus a comparison of a serialized color set with the
/// stable coloring of `g`.
pub fn verify_against(g: &FpPoly, cfg: &RunConfig, colors_json: &str) -> Result<VerifyReport, PipelineError> {
    let mut report = verify_run(g, cfg)?;
    let f = FpPoly::parse(g.ctx(), &report.normalized)?;
    let check = match compare_color_file(&f, cfg, &report.roots, colors_json) {
        Ok(()) => Check::new("against", true, "color file matches"),
        Err(why) => Check::new("against", false, why),
    };
    report.checks.push(check);
    Ok(report)
}

fn compare_color_file(f: &FpPoly, cfg: &RunConfig, roots: &[u64], text: &str) -> Result<(), String> {
    let parsed: crate::balance::ColorSetJson = serde_json::from_str(text).map_err(|e| format!("unparsable: {e}"))?;
    let file = ColorSet::from_json(&parsed, cfg.dimension_ceiling).map_err(|e| e.to_string())?;
    if file.f() != f {
        return Err("modulus differs from the normalized input".into());
    }
    let mine = match run_wl(f, cfg).map_err(|e| e.to_string())?.1 {
        WlRun::Stable { stable, .. } => materialize(&stable.colors, roots),
        WlRun::Factor { stage, .. } => return Err(format!("input factors at {stage}; no stable coloring")),
    };
    let theirs = materialize(&file, roots);
    if theirs.validate().is_err() || theirs.partition() != mine.partition() {
        return Err("color partition differs from the stable coloring".into());
    }
    Ok(())
}

/// Oracle checks on the output of the balance stage.
fn check_initial_colors(cs: &ColorSet, roots: &[u64]) -> Vec<Check> {
    let n = roots.len();
    let ctx = cs.ctx();
    let m = materialize(cs, roots);
    let mut checks = vec![Check::new(
        "balance_partition",
        m.partition() == oracle_initial_coloring(&ctx, roots).partition(),
        format!("{} colors", cs.len()),
    )];
    let non_identity: Vec<_> = cs.colors().iter().filter(|c| c.signature.is_some()).collect();
    let total: usize = non_identity.iter().map(|c| c.degree).sum();
    checks.push(Check::new(
        "balance_degrees",
        total == n - 1 && non_identity.len() >= 2 && non_identity.len() < n,
        format!("{} leaves, degree sum {total}", non_identity.len()),
    ));
    let mut regular = true;
    let mut transposed = true;
    for c in cs.colors() {
        let mat = color_matrix(cs, c, roots);
        regular &= (0..n).all(|i| {
            mat[i].iter().map(|&v| v as usize).sum::<usize>() == c.degree
                && (0..n).map(|j| mat[j][i] as usize).sum::<usize>() == c.degree
        });
        transposed &= cs.get(c.transpose).is_some_and(|t| color_matrix(cs, t, roots) == transpose(&mat));
    }
    checks.push(Check::new("balance_regular", regular, ""));
    checks.push(Check::new("balance_transposes", transposed, ""));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(p: u64, text: &str) -> FpPoly {
        FpPoly::parse(FieldCtx::new(p).unwrap(), text).unwrap()
    }

    #[test]
    fn cube_roots_of_unity() {
        let run = factor_pipeline(&poly(13, "12,0,0,1"), &RunConfig::default()).unwrap();
        match &run.outcome {
            FactorOutcome::FullFactorization(f) => {
                let texts: Vec<_> = f.iter().map(|h| h.to_text()).collect();
                assert_eq!(texts, vec!["4,1", "10,1", "12,1"]);
            }
            FactorOutcome::Stalled(s) => assert!(matches!(*s.certificate, CertificateJson::ThinScheme { .. })),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sylow_filter_factors() {
        let run = factor_pipeline(&poly(13, "2,10,1"), &RunConfig::default()).unwrap();
        assert_eq!(run.outcome, FactorOutcome::FullFactorization(vec![poly(13, "11,1"), poly(13, "12,1")]));
        assert_eq!(run.report.stages[1].name, "filter");
        assert_eq!(run.report.stages[1].outcome, "factor");
    }

    #[test]
    fn linear_input() {
        let run = factor_pipeline(&poly(7, "2,1"), &RunConfig::default()).unwrap();
        assert_eq!(run.outcome, FactorOutcome::FullFactorization(vec![poly(7, "2,1")]));
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = RunConfig::default();
        let a = factor_pipeline(&poly(13, "12,0,0,1"), &cfg).unwrap().report.to_json_string();
        let seq = RunConfig { exec_mode: ExecMode::Sequential, ..cfg.clone() };
        let b = factor_pipeline(&poly(13, "12,0,0,1"), &seq).unwrap().report.to_json_string();
        assert_eq!(a, b);
        assert!(!a.contains("\"timing_ms\": 0") && a.contains("\"timing_ms\": null"));
    }

    #[test]
    fn verify_cube_roots() {
        let rep = verify_run(&poly(13, "12,0,0,1"), &RunConfig::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.checks);
        assert_eq!(rep.roots, vec![1, 3, 9]);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::from_json_str(r#"{"max_recursion_depth": 0}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
        let cfg = RunConfig::from_json_str(r#"{"oracle_bound": 50}"#).unwrap();
        assert_eq!(cfg.oracle_bound, 50);
        assert_eq!(cfg.dimension_ceiling, DEFAULT_DIMENSION_CEILING);
    }

    #[test]
    fn batch_lines() {
        let lines = vec!["13;12,0,0,1".to_string(), "13;2,10,1".to_string(), "4;1,1".to_string()];
        let out = factor_batch(&lines, &RunConfig::default());
        assert!(out[0].is_ok() && out[1].is_ok());
        assert!(matches!(out[2], Err(PipelineError::Field(FieldError::NotPrime(4)))));
    }
}
