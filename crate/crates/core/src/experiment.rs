//! JSON-configured experiment runs.
//!
//! Every stage reads its inputs from the field files of earlier stages in the
//! output directory and writes its own fields plus a JSON summary, so a stage
//! can be rerun on a directory left by a previous run. The run ends with
//! `manifest.json`, listing every artifact with its SHA-256.
//!
//! | stage | reads | writes |
//! |---|---|---|
//! | (always) | | `config.json`, `source.field`, `source.json` |
//! | `primal` | `source.field` | `u.field`, `sigma_primal.field`, `primal.json` |
//! | `dual` | `source.field` | `sigma_dual.field`, `sigma_dual_corners.field`, `dual.json` |
//! | `gap` | `source.field`, `u.field`, `sigma_dual_corners.field`, `sigma_primal.field`, `sigma_dual.field` | `gap.json` |
//! | `diagnose` | `u.field` | `diagnostics.json`, `diagnostics.csv`, `moduli.csv` |
//! | `traffic` | `source.field`, `sigma_dual.field` or else `sigma_primal.field` | `curves.csv`, `intensity.field`, `wardrop.json`, `traffic.json` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dual::{dual_objective, relative_gap, solve_dual, DualParams};
use crate::error::{Error, Result};
use crate::grid::{read_field, write_field, Field, Grid2D, ScalarField};
use crate::potentials::{norm, PotentialKind, PotentialSpec};
use crate::primal::{primal_energy, solve_primal, PrimalParams};
use crate::regularity::{diagnose, fit_log_modulus, scale_radii, DiagnosticsConfig, MIN_SCALES};
use crate::sources::{builtin_source, source_smoothness, SourceSmoothness};
use crate::traffic::{congestion_cost, deposit_intensity, split_source, trace_curves, wardrop_audit, TrafficParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "unit")]
    pub lx: f64,
    #[serde(default = "unit")]
    pub ly: f64,
}

fn unit() -> f64 {
    1.0
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid2D> {
        Grid2D::new(self.nx, self.ny, self.lx, self.ly)
    }
}

/// Either a builtin source by name or a scalar field file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Primal,
    Dual,
    Gap,
    Diagnose,
    Traffic,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Primal => "primal",
            Stage::Dual => "dual",
            Stage::Gap => "gap",
            Stage::Diagnose => "diagnose",
            Stage::Traffic => "traffic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub potential: PotentialSpec,
    pub source: SourceConfig,
    pub pipeline: Vec<Stage>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub traffic: TrafficParams,
    #[serde(default)]
    pub primal: PrimalParams,
    #[serde(default)]
    pub dual: DualParams,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seed of every randomized choice (currently the audited curve sample).
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

const SOURCE_FILE: &str = "source.field";
const U_FILE: &str = "u.field";
const SIGMA_PRIMAL_FILE: &str = "sigma_primal.field";
const SIGMA_DUAL_FILE: &str = "sigma_dual.field";
const SIGMA_DUAL_CORNERS_FILE: &str = "sigma_dual_corners.field";
pub const MANIFEST_FILE: &str = "manifest.json";

impl ExperimentConfig {
    /// Parses a config file; syntax and schema errors become `ConfigInvalid`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// Checks everything that can be checked before computing.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        let g = self.grid.build().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        match (&self.source.name, &self.source.file) {
            (Some(_), None) => {}
            (None, Some(file)) => {
                if !file.is_file() {
                    return bad(format!("source file {} does not exist", file.display()));
                }
            }
            _ => return bad("source needs exactly one of `name` and `file`".into()),
        }
        if self.pipeline.is_empty() {
            return bad("pipeline is empty".into());
        }
        for (k, stage) in self.pipeline.iter().enumerate() {
            if self.pipeline[..k].contains(stage) {
                return bad(format!("stage `{}` appears twice", stage.name()));
            }
        }
        let before = |k: usize, s: Stage| self.pipeline[..k].contains(&s);
        let saved = |file: &str| self.output_dir.join(file).is_file();
        for (k, &stage) in self.pipeline.iter().enumerate() {
            match stage {
                Stage::Gap if !(before(k, Stage::Primal) && before(k, Stage::Dual)) => {
                    return bad("stage `gap` needs `primal` and `dual` earlier in the pipeline".into())
                }
                Stage::Diagnose if !(before(k, Stage::Primal) || saved(U_FILE)) => {
                    return bad("stage `diagnose` needs `primal` earlier or a saved u.field".into())
                }
                Stage::Traffic
                    if !(before(k, Stage::Dual)
                        || before(k, Stage::Primal)
                        || saved(SIGMA_DUAL_FILE)
                        || saved(SIGMA_PRIMAL_FILE)) =>
                {
                    return bad("stage `traffic` needs a flux from `dual` or `primal`".into())
                }
                _ => {}
            }
        }
        if self.pipeline.contains(&Stage::Dual)
            && (self.potential.kind() != PotentialKind::PowerQ || self.potential.reg_eps() != 0.0)
        {
            return bad("stage `dual` needs the unregularized power potential".into());
        }
        if self.pipeline.contains(&Stage::Diagnose) {
            self.diagnostics.validate()?;
            let center = self.diagnostics.center_in(&g);
            let r0 = self.diagnostics.radius_in(&g);
            if !g.contains(center) || !g.ball_fits(center, r0) {
                return bad("diagnostic ball does not fit inside the domain".into());
            }
            let scales = scale_radii(&g, r0, self.diagnostics.eps0).len();
            if scales < MIN_SCALES {
                return bad(format!("diagnostics resolve {scales} scales, at least {MIN_SCALES} needed"));
            }
        }
        if self.pipeline.contains(&Stage::Traffic) {
            self.traffic.validate()?;
        }
        Ok(())
    }

    /// `p − 1` unless the traffic parameters fix the congestion exponent.
    fn congestion_exponent(&self) -> f64 {
        self.traffic.congestion_exponent.unwrap_or(self.potential.p() - 1.0)
    }
}

/// One file of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pipeline: Vec<Stage>,
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
}

/// Summaries of all stages, keyed by stage name (`source` included).
#[derive(Clone, Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub summaries: BTreeMap<String, Value>,
    pub manifest: Manifest,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    grid: Grid2D,
    dir: &'a Path,
    written: Vec<String>,
}

impl Run<'_> {
    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn note(&mut self, file: &str) {
        if !self.written.iter().any(|w| w == file) {
            self.written.push(file.to_string());
        }
    }

    fn write_field(&mut self, file: &str, field: impl Into<Field>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(file))?);
        write_field(&mut w, &field.into())?;
        std::io::Write::flush(&mut w)?;
        self.note(file);
        Ok(())
    }

    fn read(&self, file: &str) -> Result<Field> {
        let path = self.path(file);
        let f = File::open(&path).map_err(|e| Error::ConfigInvalid(format!("cannot open {}: {e}", path.display())))?;
        let field = read_field(BufReader::new(f))?;
        if field.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(field)
    }

    fn write_json(&mut self, file: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(file, &text)
    }

    fn write_text(&mut self, file: &str, text: &str) -> Result<()> {
        fs::write(self.path(file), text)?;
        self.note(file);
        Ok(())
    }

    fn source(&mut self) -> Result<Value> {
        let (field, subtracted, name, smoothness) = match (&self.cfg.source.name, &self.cfg.source.file) {
            (Some(name), _) => {
                let s = builtin_source(&self.grid, name, &self.cfg.source.params)?;
                (s.field, s.subtracted_mean, name.clone(), source_smoothness(name))
            }
            (None, Some(file)) => {
                let f = read_field(BufReader::new(File::open(file)?))?.into_scalar()?;
                if f.grid != self.grid {
                    return Err(Error::GridMismatch);
                }
                let mut f = f;
                let m = f.remove_mean();
                (f, m, file.display().to_string(), SourceSmoothness::Unknown)
            }
            (None, None) => unreachable!("validated"),
        };
        let summary = serde_json::json!({
            "source": name,
            "subtracted_mean": subtracted,
            "smoothness": smoothness,
            "l1_norm": field.l1_norm(),
            "max_abs": field.max_abs(),
        });
        self.write_field(SOURCE_FILE, field)?;
        self.write_json("source.json", &summary)?;
        Ok(summary)
    }

    fn primal(&mut self) -> Result<Value> {
        let f = self.read(SOURCE_FILE)?.into_scalar()?;
        let sol = solve_primal(&self.grid, &self.cfg.potential, &f, &self.cfg.primal)?;
        let grad = self.grid.gradient(&sol.u, false)?;
        let max_grad = self.grid.center_gradient(&grad)?.into_iter().map(norm).fold(0.0, f64::max);
        let summary = serde_json::json!({
            "energy": sol.energy,
            "residual": sol.grad_norm,
            "newton_iterations": sol.iterations,
            "eps_schedule": sol.eps_schedule,
            "max_grad": max_grad,
            "sigma_l2": sol.sigma.l2_norm(),
        });
        self.write_field(U_FILE, sol.u)?;
        self.write_field(SIGMA_PRIMAL_FILE, sol.sigma)?;
        self.write_json("primal.json", &summary)?;
        Ok(summary)
    }

    fn dual(&mut self) -> Result<Value> {
        let f = self.read(SOURCE_FILE)?.into_scalar()?;
        let sol = solve_dual(&self.grid, &self.cfg.potential, &f, &self.cfg.dual)?;
        let summary = serde_json::json!({
            "objective": sol.objective,
            "feasibility_residual": sol.feas_residual,
            "iterations": sol.iterations,
            "splitting_residual": sol.last_change,
            "converged": sol.converged,
            "sigma_l2": sol.sigma_bar.l2_norm(),
        });
        self.write_field(SIGMA_DUAL_FILE, sol.sigma_bar)?;
        self.write_field(SIGMA_DUAL_CORNERS_FILE, sol.sigma_corners)?;
        self.write_json("dual.json", &summary)?;
        Ok(summary)
    }

    fn gap(&mut self) -> Result<Value> {
        let f = self.read(SOURCE_FILE)?.into_scalar()?;
        let u = self.read(U_FILE)?.into_scalar()?;
        let corners = self.read(SIGMA_DUAL_CORNERS_FILE)?.into_corner()?;
        let sp = self.read(SIGMA_PRIMAL_FILE)?.into_vector()?;
        let sd = self.read(SIGMA_DUAL_FILE)?.into_vector()?;
        let base = self.cfg.potential.clone().with_reg_eps(0.0)?;
        let p = primal_energy(&self.grid, &base, &u, &f)?;
        let d = dual_objective(&base, &corners)?;
        let gap = p + d;
        let scale = sd.l2_norm();
        let summary = serde_json::json!({
            "primal_energy": p,
            "dual_objective": d,
            "gap": gap,
            "relative_gap": relative_gap(gap, p, d),
            "sigma_relative_difference": if scale > 0.0 { sp.sub(&sd).l2_norm() / scale } else { sp.l2_norm() },
        });
        self.write_json("gap.json", &summary)?;
        Ok(summary)
    }

    fn diagnose(&mut self) -> Result<Value> {
        let u = self.read(U_FILE)?.into_scalar()?;
        let grad = self.grid.gradient(&u, false)?;
        let report = diagnose(&self.grid, &grad, &self.cfg.diagnostics)?;
        let mut moduli = String::from("label,delta,direction_x,direction_y,radius,modulus\n");
        for row in &report.moduli.rows {
            let (dx, dy) =
                row.direction.map_or((String::new(), String::new()), |e| (e[0].to_string(), e[1].to_string()));
            let delta = row.delta.map_or(String::new(), |d| d.to_string());
            for (r, m) in report.moduli.radii.iter().zip(&row.values) {
                let _ = writeln!(moduli, "{},{delta},{dx},{dy},{r},{m}", row.label);
            }
        }
        let fits: Vec<Value> = report
            .moduli
            .rows
            .iter()
            .map(|row| {
                let pairs: Vec<(f64, f64)> =
                    report.moduli.radii.iter().copied().zip(row.values.iter().copied()).collect();
                match fit_log_modulus(&pairs) {
                    Ok(fit) => serde_json::json!({"label": row.label, "c_fit": fit.c_fit, "residual": fit.residual}),
                    Err(e) => serde_json::json!({"label": row.label, "error": e.to_string()}),
                }
            })
            .collect();
        let none: usize = report.slices.iter().map(|s| s.tallies.none).sum();
        let summary = serde_json::json!({
            "center": report.center,
            "radii": report.radii,
            "slices": report.slices.len(),
            "scales_without_alternative": none,
            "modulus_fits": fits,
        });
        self.write_json("diagnostics.json", &report)?;
        self.write_text("diagnostics.csv", &report.to_csv())?;
        self.write_text("moduli.csv", &moduli)?;
        Ok(summary)
    }

    fn traffic(&mut self) -> Result<Value> {
        let f = self.read(SOURCE_FILE)?.into_scalar()?;
        let (sigma, origin) = if self.path(SIGMA_DUAL_FILE).is_file() {
            (self.read(SIGMA_DUAL_FILE)?.into_vector()?, "dual")
        } else {
            let s = self.read(SIGMA_PRIMAL_FILE)?.into_vector()?;
            (self.grid.project_divergence(&s, &f)?, "primal")
        };
        let (fp, fm) = split_source(&f)?;
        let params = &self.cfg.traffic;
        let plan = trace_curves(&sigma, &fp, &fm, params)?;
        self.write_text("curves.csv", &plan.curves_csv())?;
        let mut summary = serde_json::json!({
            "flux": origin,
            "curves": plan.curves.len(),
            "total_weight": plan.total_weight(),
            "truncated_weight": plan.truncated_weight,
            "clamped_curves": plan.curves.iter().filter(|c| c.clamped).count(),
            "stalled_curves": plan.curves.iter().filter(|c| c.stalled).count(),
            "terminal_error": plan.terminal_error,
            "terminal_error_relative": plan.terminal_error_rel,
        });
        if !plan.curves.is_empty() {
            let intensity = deposit_intensity(&plan, &self.grid)?;
            let speed = sigma.center_magnitude();
            let denom = speed.l1_norm();
            let identity = if denom > 0.0 { intensity.sub(&speed).l1_norm() / denom } else { intensity.l1_norm() };
            let audit = wardrop_audit(
                &plan,
                &intensity,
                congestion_cost(self.cfg.congestion_exponent()),
                params,
                self.cfg.seed,
            )?;
            summary["intensity_relative_l1"] = identity.into();
            summary["wardrop_passing_fraction"] = audit.passing_fraction.into();
            summary["wardrop_passed"] = audit.passed.into();
            summary["wardrop_flagged"] = audit.entries.iter().filter(|e| e.flagged).count().into();
            self.write_field("intensity.field", intensity)?;
            self.write_json("wardrop.json", &audit)?;
        }
        self.write_json("traffic.json", &summary)?;
        Ok(summary)
    }
}

fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Validates the config, runs every stage in order and writes the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let mut run = Run { cfg, grid, dir, written: Vec::new() };

    let echo = ExperimentConfig { output_dir: PathBuf::from("."), ..cfg.clone() };
    run.write_json("config.json", &echo)?;
    let mut summaries = BTreeMap::new();
    let wrap = |stage: &str| {
        let stage = stage.to_string();
        move |e: Error| Error::Stage { stage, source: Box::new(e) }
    };
    summaries.insert("source".to_string(), run.source().map_err(wrap("source"))?);
    for &stage in &cfg.pipeline {
        info!("stage {}", stage.name());
        let summary = match stage {
            Stage::Primal => run.primal(),
            Stage::Dual => run.dual(),
            Stage::Gap => run.gap(),
            Stage::Diagnose => run.diagnose(),
            Stage::Traffic => run.traffic(),
        }
        .map_err(wrap(stage.name()))?;
        summaries.insert(stage.name().to_string(), summary);
    }

    let mut files = run.written.clone();
    files.sort();
    let mut artifacts = Vec::with_capacity(files.len());
    for file in files {
        let (sha256, bytes) = sha256_file(&dir.join(&file))?;
        artifacts.push(Artifact { file, sha256, bytes });
    }
    let manifest = Manifest { pipeline: cfg.pipeline.clone(), seed: cfg.seed, artifacts };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(RunReport { output_dir: dir.to_path_buf(), summaries, manifest })
}

/// CSV rendering of a field file.
pub fn export_csv(path: &Path) -> Result<String> {
    let f = File::open(path)?;
    Ok(read_field(BufReader::new(f))?.to_csv())
}

/// Writes a scalar field to a field file; used to hand custom sources to a run.
pub fn save_scalar(path: &Path, field: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, &Field::Scalar(field.clone()))?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}
