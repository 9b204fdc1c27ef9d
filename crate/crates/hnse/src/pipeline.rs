//! Stage orchestration and the report bundle.
//!
//! Negative mathematical outcomes (no sparse annulus, a rejected cutoff, a
//! negative cone margin, an exceeded averaging bound, a blow-up) are recorded
//! as findings. Only I/O failures, invariant violations and malformed stage
//! lists are errors.

use std::path::{Path, PathBuf};

use hnse_core::averaging::{
    annulus_basis, averaging_samples, check_averaging, covering_truncation, AveragingError, AveragingReport,
};
use hnse_core::dynamics::{
    cone_report, estimate_absorbing_radius, evolve_pair, simulate_observed, AbsorbingEstimate, ConeSummary,
    DynamicsError, LinearConeCondition, Model, SimConfig,
};
use hnse_core::exact::near_integer;
use hnse_core::lattice::{
    eigenvalues_with_multiplicity, find_sparse_annulus, is_representable, min_pairwise_distance, record_gaps,
    strip_statistics, GapRecord, LatticePoint, SparseAnnulus, StripStats,
};
use hnse_core::random::{gaussian_field, half_box, with_sobolev_norm};
use hnse_core::spectral::{
    choose_cutoff, sobolev_norm, Dealias, FourierField, Hypothesis, ProjectorFamily, SpectralParams,
};
use hnse_core::truncation::Truncation;
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Forcing, RunConfig, Stage};
use crate::formats::{self, FormatError, Report, SimulationRow, AVERAGING_HEADER, SIMULATION_HEADER};
use crate::run_dir::create_run_dir;

/// Distance below which a float bound is reported as ambiguous.
pub const NEAR_INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("stage {stage}: invariant violated: {reason}")]
    Invariant { stage: Stage, reason: String },
    #[error("stage {stage} requires stage {needs}, which is not scheduled before it")]
    Dependency { stage: Stage, needs: Stage },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    /// Ran and every checked inequality held.
    Completed,
    /// Ran, or could not proceed, with a negative mathematical outcome.
    Finding,
    /// Did not run because a prerequisite produced nothing to work on.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub status: StageStatus,
    pub summary: String,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub dir: PathBuf,
    pub stages: Vec<StageOutcome>,
    pub warnings: Vec<String>,
    pub averaging: Option<AveragingReport>,
}

#[derive(Debug, Serialize)]
struct PipelineSummary<'a> {
    stages: &'a [StageOutcome],
    warnings: &'a [String],
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapsResult {
    pub limit: u64,
    pub records: usize,
    pub largest: Option<GapRecord>,
    pub strictly_increasing: bool,
    /// Every record re-checked integer by integer.
    pub verified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SparseResult {
    pub annulus: Option<SparseAnnulus>,
    pub point_count: usize,
    pub min_distance: Option<f64>,
    pub threshold: Option<f64>,
    pub k_over_lambda_s: Option<f64>,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffResult {
    pub accepted: bool,
    pub family: Option<ProjectorFamily>,
    pub failed: Vec<Hypothesis>,
    pub linear_condition: Option<LinearConeCondition>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateResult {
    pub m: i64,
    pub steps: usize,
    pub forcing: Forcing,
    pub initial_norm_w: f64,
    pub final_energy: Option<f64>,
    pub final_norm_w: Option<f64>,
    /// Time of the first non-finite coefficient, if any.
    pub blow_up_at: Option<f64>,
    pub absorbing: Option<AbsorbingEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeResult {
    pub cutoff_accepted: bool,
    pub failed_hypotheses: Vec<Hypothesis>,
    pub family: ProjectorFamily,
    pub m: i64,
    pub dt: f64,
    pub steps: usize,
    pub delta: f64,
    pub band_modes: usize,
    pub summary: Option<ConeSummary>,
    pub blow_up_at: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragingResult {
    pub m: i64,
    pub samples: usize,
    pub report: AveragingReport,
}

/// Runs every configured stage in a fresh run directory under the configured
/// output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome, PipelineError> {
    let dir = create_run_dir(&cfg.output_dir)?;
    run_pipeline_in(cfg, &dir)
}

/// Runs every configured stage, writing the bundle into `dir`.
pub fn run_pipeline_in(cfg: &RunConfig, dir: &Path) -> Result<PipelineOutcome, PipelineError> {
    std::fs::create_dir_all(dir)?;
    let mut ctx =
        Context { cfg, dir, annulus: None, cutoff: None, averaging: None, ran: Vec::new(), warnings: Vec::new() };
    let mut stages = Vec::new();
    let mut error = None;
    for &stage in &cfg.stages {
        match ctx.run(stage) {
            Ok(o) => stages.push(o),
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    std::fs::write(dir.join("config.txt"), cfg.to_key_values())?;
    let summary =
        PipelineSummary { stages: &stages, warnings: &ctx.warnings, error: error.as_ref().map(|e| e.to_string()) };
    formats::write_json(&dir.join("pipeline.json"), &Report::new("pipeline", cfg, summary))?;
    match error {
        Some(e) => Err(e),
        None => {
            Ok(PipelineOutcome { dir: dir.to_path_buf(), stages, warnings: ctx.warnings, averaging: ctx.averaging })
        }
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
    annulus: Option<SparseAnnulus>,
    cutoff: Option<CutoffResult>,
    averaging: Option<AveragingReport>,
    ran: Vec<Stage>,
    warnings: Vec<String>,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn outcome(stage: Stage, status: StageStatus, summary: String, files: &[&str]) -> StageOutcome {
    StageOutcome { stage, status, summary, files: files.iter().map(|s| s.to_string()).collect() }
}

/// Shear forcing `ν (sin x₂, 0)` at truncation `m`.
pub fn shear_forcing(m: i64, nu: f64) -> FourierField {
    let mut f = FourierField::zero(m);
    f.set_real_pair(LatticePoint::new(0, 1), [Complex64::new(0.0, -0.5 * nu), Complex64::new(0.0, 0.0)]);
    f
}

fn forcing(cfg: &RunConfig, m: i64) -> FourierField {
    match cfg.forcing {
        Forcing::Zero => FourierField::zero(m),
        Forcing::Shear => shear_forcing(m, cfg.params.nu),
    }
}

/// Real low-mode field on `0 < |j|_∞ ≤ radius` with the given `H^{3+ε}` norm.
fn low_mode_field(r: &mut ChaCha8Rng, params: &SpectralParams, m: i64, radius: i64, norm: f64) -> FourierField {
    let support = half_box(radius.min(m));
    with_sobolev_norm(&gaussian_field(r, m, &support, |_| 1.0), params.w_exponent(), norm)
}

/// Verifies each record: both ends representable, nothing in between.
pub fn verify_gap_records(records: &[GapRecord]) -> bool {
    records.iter().all(|g| {
        g.upper - g.lower == g.gap
            && is_representable(g.lower)
            && is_representable(g.upper)
            && (g.lower + 1..g.upper).all(|n| !is_representable(n))
    }) && records.windows(2).all(|w| w[1].gap > w[0].gap && w[1].lower > w[0].lower)
}

/// Warnings for annulus bounds that sit within [`NEAR_INTEGER_TOL`] of an
/// integer, where rounding decides membership.
pub fn bound_warnings(lambda: f64, k: f64) -> Vec<String> {
    [("lower", lambda - k), ("upper", lambda + k)]
        .into_iter()
        .filter(|(_, b)| near_integer(*b, NEAR_INTEGER_TOL) && b.fract() != 0.0)
        .map(|(side, b)| format!("{side} annulus bound {b:?} is within {NEAR_INTEGER_TOL:e} of an integer"))
        .collect()
}

impl Context<'_> {
    fn run(&mut self, stage: Stage) -> Result<StageOutcome, PipelineError> {
        if let Some(&needs) = stage.requires().iter().find(|s| !self.ran.contains(s)) {
            return Err(PipelineError::Dependency { stage, needs });
        }
        let out = match stage {
            Stage::Gaps => self.gaps(),
            Stage::Sparse => self.sparse(),
            Stage::Strips => self.strips(),
            Stage::Cutoff => self.cutoff(),
            Stage::Simulate => self.simulate(),
            Stage::Cone => self.cone(),
            Stage::Averaging => self.averaging(),
        }?;
        self.ran.push(stage);
        Ok(out)
    }

    fn report<T: Serialize>(&self, name: &str, result: T) -> Result<(), PipelineError> {
        formats::write_json(&self.dir.join(format!("{name}.json")), &Report::new(name, self.cfg, result))?;
        Ok(())
    }

    fn gaps(&mut self) -> Result<StageOutcome, PipelineError> {
        let limit = self.cfg.gaps_limit;
        let records = record_gaps(limit);
        let verified = verify_gap_records(&records);
        if !verified {
            return Err(PipelineError::Invariant {
                stage: Stage::Gaps,
                reason: "gap record failed re-verification".into(),
            });
        }
        formats::write_file(&self.dir.join("gaps.csv"), |w| formats::write_gaps(w, &records))?;
        let res = GapsResult {
            limit,
            records: records.len(),
            largest: records.last().copied(),
            strictly_increasing: records.windows(2).all(|w| w[1].gap > w[0].gap),
            verified,
        };
        let summary = format!(
            "{} record gaps up to {limit}, largest {}",
            res.records,
            res.largest.map_or("none".into(), |g| format!("{} after {}", g.gap, g.lower))
        );
        self.report("gaps", res)?;
        Ok(outcome(Stage::Gaps, StageStatus::Completed, summary, &["gaps.csv", "gaps.json"]))
    }

    fn sparse(&mut self) -> Result<StageOutcome, PipelineError> {
        let cfg = self.cfg;
        let found = find_sparse_annulus(cfg.mu, cfg.params.s)
            .map_err(|e| PipelineError::Invariant { stage: Stage::Sparse, reason: e.to_string() })?;
        let Some(a) = found else {
            let res = SparseResult {
                annulus: None,
                point_count: 0,
                min_distance: None,
                threshold: None,
                k_over_lambda_s: None,
                certified: false,
            };
            self.report("sparse", res)?;
            let msg = format!("no sparse annulus at mu = {}", cfg.mu);
            return Ok(outcome(Stage::Sparse, StageStatus::Finding, msg, &["sparse.json"]));
        };
        if !a.verify() {
            return Err(PipelineError::Invariant {
                stage: Stage::Sparse,
                reason: "annulus failed re-verification".into(),
            });
        }
        self.warnings.extend(bound_warnings(a.lambda, a.half_width));
        formats::write_file(&self.dir.join("annulus_points.csv"), |w| formats::write_points(w, &a.points))?;
        let res = SparseResult {
            point_count: a.points.len(),
            min_distance: min_pairwise_distance(&a.points),
            threshold: Some(a.certified_threshold()),
            k_over_lambda_s: Some(a.k_over_lambda_s()),
            certified: true,
            annulus: Some(a.clone()),
        };
        let summary = format!("certified annulus at lambda = {} with {} points", a.lambda, a.points.len());
        self.report("sparse", res)?;
        self.annulus = Some(a);
        Ok(outcome(Stage::Sparse, StageStatus::Completed, summary, &["annulus_points.csv", "sparse.json"]))
    }

    fn strips(&mut self) -> Result<StageOutcome, PipelineError> {
        let st: StripStats = strip_statistics(self.cfg.mu, self.cfg.params.s)
            .map_err(|e| PipelineError::Invariant { stage: Stage::Strips, reason: e.to_string() })?;
        let summary = format!("{} strips, {} lattice hits", st.strip_count, st.lattice_hits);
        self.report("strips", st)?;
        Ok(outcome(Stage::Strips, StageStatus::Completed, summary, &["strips.json"]))
    }

    fn cutoff(&mut self) -> Result<StageOutcome, PipelineError> {
        let Some(a) = &self.annulus else {
            self.report("cutoff", Option::<CutoffResult>::None)?;
            let msg = "no sparse annulus to place a cutoff in".into();
            return Ok(outcome(Stage::Cutoff, StageStatus::Skipped, msg, &["cutoff.json"]));
        };
        let limit = a.shell_bounds().1.max(1) as u64 + 4096;
        let eigs: Vec<u64> = eigenvalues_with_multiplicity(limit).into_iter().map(|(n, _)| n).collect();
        let beta = self.cfg.params.beta;
        let res = match choose_cutoff(&eigs, a) {
            Ok(f) => CutoffResult {
                accepted: true,
                family: Some(f),
                failed: Vec::new(),
                linear_condition: Some(LinearConeCondition::evaluate(&f, beta)),
            },
            Err(rej) => CutoffResult {
                accepted: false,
                linear_condition: rej.candidate.map(|f| LinearConeCondition::evaluate(&f, beta)),
                family: rej.candidate,
                failed: rej.failed,
            },
        };
        let (status, summary) = if res.accepted {
            (StageStatus::Completed, "cutoff accepted".to_string())
        } else {
            let names: Vec<&str> = res.failed.iter().map(hypothesis_name).collect();
            (StageStatus::Finding, format!("cutoff rejected: {}", names.join(", ")))
        };
        self.report("cutoff", &res)?;
        self.cutoff = Some(res);
        Ok(outcome(Stage::Cutoff, status, summary, &["cutoff.json"]))
    }

    fn simulate(&mut self) -> Result<StageOutcome, PipelineError> {
        let cfg = self.cfg;
        let p = cfg.params;
        let m = p.m;
        let model = Model::new(Truncation::new(p, cfg.profile(), cfg.sim.dealias), cfg.sim.nonlinearity);
        let f = forcing(cfg, m);
        let u0 = low_mode_field(&mut rng(cfg.seed, 1), &p, m, cfg.low_radius, 0.5 * p.rho);
        let e = p.w_exponent();
        let mut rows = Vec::with_capacity(cfg.sim.steps() + 1);
        let run = simulate_observed(&u0, &f, &model, &cfg.sim, |_, t, u| {
            rows.push(SimulationRow { t, energy: u.norm_sq(), norm_w: sobolev_norm(u, e) })
        });
        let mut res = SimulateResult {
            m,
            steps: cfg.sim.steps(),
            forcing: cfg.forcing,
            initial_norm_w: sobolev_norm(&u0, e),
            final_energy: None,
            final_norm_w: None,
            blow_up_at: None,
            absorbing: None,
        };
        let mut files = vec!["simulate_trace.csv", "simulate.json"];
        match run {
            Ok(u) => {
                res.final_energy = Some(u.norm_sq());
                res.final_norm_w = Some(sobolev_norm(&u, e));
                formats::write_file(&self.dir.join("final_field.csv"), |w| formats::write_field(w, &u))?;
                files.push("final_field.csv");
            }
            Err(DynamicsError::BlowUp { t }) => res.blow_up_at = Some(t),
            Err(e) => return Err(PipelineError::Invariant { stage: Stage::Simulate, reason: e.to_string() }),
        }
        if cfg.absorbing_samples > 0 && res.blow_up_at.is_none() {
            match estimate_absorbing_radius(
                &mut rng(cfg.seed, 5),
                &f,
                &model,
                &cfg.sim,
                cfg.absorbing_samples,
                p.rho,
                cfg.transient,
            ) {
                Ok(est) => res.absorbing = Some(est),
                Err(DynamicsError::BlowUp { t }) => res.blow_up_at = Some(t),
                Err(e) => return Err(PipelineError::Invariant { stage: Stage::Simulate, reason: e.to_string() }),
            }
        }
        formats::write_file(&self.dir.join("simulate_trace.csv"), |w| {
            formats::write_rows(w, &rows, &SIMULATION_HEADER)
        })?;
        let (status, summary) = match (res.blow_up_at, res.absorbing) {
            (Some(t), _) => (StageStatus::Finding, format!("blow-up at t = {t}")),
            (None, Some(a)) if a.still_growing => {
                self.warnings.push("absorbing-radius estimate still growing at the horizon".into());
                (StageStatus::Finding, format!("absorbing radius estimate {} still growing", a.radius))
            }
            (None, a) => (
                StageStatus::Completed,
                format!(
                    "{} steps, final H^(3+eps) norm {}{}",
                    res.steps,
                    res.final_norm_w.unwrap_or(f64::NAN),
                    a.map_or(String::new(), |a| format!(", absorbing radius estimate {}", a.radius))
                ),
            ),
        };
        self.report("simulate", &res)?;
        Ok(outcome(Stage::Simulate, status, summary, &files))
    }

    fn cone(&mut self) -> Result<StageOutcome, PipelineError> {
        let cfg = self.cfg;
        let Some(cut) = self.cutoff.clone() else {
            return Err(PipelineError::Dependency { stage: Stage::Cone, needs: Stage::Cutoff });
        };
        let Some(family) = cut.family else {
            self.report("cone", Option::<ConeResult>::None)?;
            let msg = "no candidate cutoff to test".into();
            return Ok(outcome(Stage::Cone, StageStatus::Skipped, msg, &["cone.json"]));
        };
        let p = cfg.params;
        let band_hi = family.mid().eigenvalue_range().1.unwrap_or(family.lambda_n1 as i64).max(family.lambda_n1 as i64);
        let radius = (band_hi as f64).sqrt().floor() as i64 + 1;
        let m = p.m.max(match cfg.sim.dealias {
            Dealias::TwoThirds => (1.5 * radius as f64).ceil() as i64 + 1,
            _ => radius + 1,
        });
        let params = p.with_truncation(m);
        let model = Model::new(Truncation::new(params, cfg.profile(), cfg.sim.dealias), cfg.sim.nonlinearity);
        let mut r = rng(cfg.seed, 2);
        let u1 = low_mode_field(&mut r, &params, m, cfg.low_radius, 0.5 * p.rho);
        let mid = family.mid();
        let band: Vec<LatticePoint> = half_box(radius.min(m)).into_iter().filter(|j| mid.keeps(*j)).collect();
        let w = gaussian_field(&mut r, m, &band, |_| 1.0);
        let wn = w.norm();
        let w = if wn > 0.0 { w.scale(1.0 / wn) } else { w };
        let u2 = u1.axpy(cfg.cone_delta, &w);
        let dt = cfg.cone_dt.unwrap_or(0.1 / family.lambda_n1.powf(p.beta));
        let sim = SimConfig { dt, t_final: cfg.cone_steps as f64 * dt, ..cfg.sim };
        let f = forcing(cfg, m);
        let mut res = ConeResult {
            cutoff_accepted: cut.accepted,
            failed_hypotheses: cut.failed.clone(),
            family,
            m,
            dt,
            steps: sim.steps(),
            delta: cfg.cone_delta,
            band_modes: 2 * band.len(),
            summary: None,
            blow_up_at: None,
        };
        let mut files = vec!["cone.json"];
        match evolve_pair(&u1, &u2, &f, &model, &sim, &family) {
            Ok(trace) => {
                if trace.records.iter().any(|r| !r.margin.is_finite()) {
                    return Err(PipelineError::Invariant {
                        stage: Stage::Cone,
                        reason: "non-finite cone margin".into(),
                    });
                }
                formats::write_file(&self.dir.join("cone_trace.csv"), |w| formats::write_trace(w, &trace.records))?;
                files.insert(0, "cone_trace.csv");
                res.summary = cone_report(&trace);
            }
            Err(DynamicsError::BlowUp { t }) => res.blow_up_at = Some(t),
            Err(e) => return Err(PipelineError::Invariant { stage: Stage::Cone, reason: e.to_string() }),
        }
        let prefix = if cut.accepted { "" } else { "cutoff rejected, diagnostic run: " };
        let (status, summary) = match (&res.summary, res.blow_up_at) {
            (_, Some(t)) => (StageStatus::Finding, format!("{prefix}blow-up at t = {t}")),
            (Some(s), None) => (
                if s.holds && cut.accepted { StageStatus::Completed } else { StageStatus::Finding },
                format!("{prefix}{}, min margin {}", s.verdict, s.min_margin),
            ),
            (None, None) => (StageStatus::Finding, format!("{prefix}empty trace")),
        };
        self.report("cone", &res)?;
        Ok(outcome(Stage::Cone, status, summary, &files))
    }

    fn averaging(&mut self) -> Result<StageOutcome, PipelineError> {
        let Some(a) = self.annulus.clone() else {
            self.report("averaging", Option::<AveragingResult>::None)?;
            let msg = "no sparse annulus to average over".into();
            return Ok(outcome(Stage::Averaging, StageStatus::Skipped, msg, &["averaging.json"]));
        };
        let res = averaging_on(self.cfg, &a)
            .map_err(|e| PipelineError::Invariant { stage: Stage::Averaging, reason: e.to_string() })?;
        let rows = formats::averaging_rows(&res.report);
        formats::write_file(&self.dir.join("averaging.csv"), |w| formats::write_rows(w, &rows, &AVERAGING_HEADER))?;
        let rep = &res.report;
        let passed = rep.sampled_norms.iter().filter(|s| s.passes).count();
        let summary = format!(
            "lambda_N = {}, max norm {} against bound {}, {passed}/{} samples pass",
            rep.lambda_n,
            rep.max_norm,
            rep.bound,
            rep.sampled_norms.len()
        );
        let status = if rep.all_pass { StageStatus::Completed } else { StageStatus::Finding };
        self.report("averaging", &res)?;
        self.averaging = Some(res.report);
        Ok(outcome(Stage::Averaging, status, summary, &["averaging.csv", "averaging.json"]))
    }
}

/// Samples and checks the restricted operator on one certified annulus.
///
/// Low-mode content is drawn from a stream that does not depend on the
/// annulus, so runs at different `μ` with the same seed share it.
pub fn averaging_on(cfg: &RunConfig, annulus: &SparseAnnulus) -> Result<AveragingResult, AveragingError> {
    let m = covering_truncation(annulus, cfg.low_radius);
    let params = cfg.params.with_truncation(m);
    let trunc = Truncation::new(params, cfg.profile(), Dealias::Direct);
    let basis = annulus_basis(annulus.lambda, annulus.half_width, m)?;
    let samples =
        averaging_samples(&mut rng(cfg.seed, 3), &mut rng(cfg.seed, 4), &basis, &trunc, m, cfg.low_radius, cfg.samples);
    let report = check_averaging(&samples, annulus, &trunc)?;
    Ok(AveragingResult { m, samples: samples.len(), report })
}

pub fn hypothesis_name(h: &Hypothesis) -> &'static str {
    match h {
        Hypothesis::GapBelowOne { .. } => "gap_below_one",
        Hypothesis::GapExceedsHalfWindow { .. } => "gap_exceeds_half_window",
        Hypothesis::WindowTooNarrow { .. } => "window_too_narrow",
        Hypothesis::EigenvaluesDoNotCover { .. } => "eigenvalues_do_not_cover",
    }
}
