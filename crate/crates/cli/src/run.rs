use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use greenmono_core::greens::{area_profile, greens_function, harmonicity_of, nonparabolic_check};
use greenmono_core::identity_checker::{run_suite, SummaryRow};
use greenmono_core::model_manifolds::build_chart;
use greenmono_core::monotonicity::{
    a_v_profiles, check_v_ode, monotone_csv, monotone_suite, umbilicity_study, volume_growth, LevelParameter,
    LevelSets,
};
use greenmono_core::identity_checker::SuiteCase;
use greenmono_core::{CheckSuiteConfig, QuantityId};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, Resolved, Suite};

/// Harmonicity residuals of the tabulated Green's function, relative to term size.
pub const HARMONICITY_TOLERANCE: f64 = 1e-8;
/// Slack on `|∇u| ≤ 1` under Ric ≥ 0.
pub const GRADIENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
    Skipped,
}

impl Status {
    fn of(pass: bool) -> Status {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
            Status::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteStatus {
    pub suite: Suite,
    pub status: Status,
    pub detail: String,
    pub files: Vec<String>,
}

/// Version, config hash and seed, stamped on every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub suite: Suite,
    pub manifold: String,
    pub u: String,
}

impl Header {
    pub fn new(r: &Resolved) -> Header {
        let digest = Sha256::digest(r.canonical().to_toml().as_bytes());
        let identities_default = r.manifold.is_none() && r.u_source.is_none() && r.suite == Suite::Identities;
        Header {
            tool: "greenmono",
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed: r.seed,
            suite: r.suite,
            manifold: if identities_default { "default cases".into() } else { r.spec().to_string() },
            u: if identities_default { "default cases".into() } else { r.u().to_string() },
        }
    }

    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("{} {}", self.tool, self.version),
            format!("config_sha256 {}", self.config_sha256),
            format!("seed {}", self.seed),
            format!("suite {}", self.suite),
            format!("manifold {}", self.manifold),
            format!("u {}", self.u),
        ]
    }
}

/// Ordered, single-threaded report output.
struct Writer {
    dir: PathBuf,
    format: Format,
    header: Header,
    files: Vec<String>,
}

impl Writer {
    fn put(&mut self, name: &str, body: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), body).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", self.dir.join(name).display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, make: impl FnOnce(&[String]) -> String) -> io::Result<()> {
        if self.format.csv() {
            let body = make(&self.header.lines());
            self.put(name, &body)?;
        }
        Ok(())
    }

    fn json(&mut self, name: &str, body: Value) -> io::Result<()> {
        if self.format.json() {
            let mut obj = json!({ "header": self.header });
            if let (Value::Object(o), Value::Object(b)) = (&mut obj, body) {
                o.extend(b);
            }
            let text = serde_json::to_string_pretty(&obj).expect("reports serialize") + "\n";
            self.put(name, &text)?;
        }
        Ok(())
    }

    fn take_files(&mut self) -> Vec<String> {
        std::mem::take(&mut self.files)
    }
}

/// Outcome of a whole run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub header: Header,
    pub pass: bool,
    pub suites: Vec<SuiteStatus>,
}

impl RunReport {
    /// 0 when every executed suite passes, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Runs the planned suites and writes their reports, `summary.json` and the
/// effective `config.toml` into the output directory. Only IO failures are errors;
/// suite errors are reported as such.
pub fn run(r: &Resolved) -> io::Result<RunReport> {
    fs::create_dir_all(&r.output).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", r.output.display())))?;
    let header = Header::new(r);
    let mut w = Writer { dir: r.output.clone(), format: r.format, header: header.clone(), files: Vec::new() };
    let mut suites = Vec::new();
    for (suite, skip) in r.plan() {
        let status = match skip {
            Some(reason) => SuiteStatus { suite, status: Status::Skipped, detail: reason.into(), files: vec![] },
            None => {
                let (status, detail) = match suite {
                    Suite::Identities => identities(r, &mut w)?,
                    Suite::Monotone => monotone(r, &mut w)?,
                    Suite::Umbilic => umbilic(r, &mut w)?,
                    Suite::GreensProfile => greens(r, &mut w)?,
                    Suite::All => unreachable!("plan expands all"),
                };
                SuiteStatus { suite, status, detail, files: w.take_files() }
            }
        };
        suites.push(status);
    }
    let pass = suites.iter().all(|s| matches!(s.status, Status::Pass | Status::Skipped));
    let report = RunReport { header, pass, suites };
    let text = serde_json::to_string_pretty(&report).expect("summary serializes") + "\n";
    write_file(&r.output, "summary.json", &text)?;
    write_file(&r.output, "config.toml", &r.canonical().to_toml())?;
    Ok(report)
}

fn write_file(dir: &Path, name: &str, body: &str) -> io::Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

type Outcome = io::Result<(Status, String)>;

fn embedded(w: &mut Writer, name: &str, e: impl std::fmt::Display) -> Outcome {
    w.json(name, json!({ "pass": false, "error": e.to_string() }))?;
    Ok((Status::Error, e.to_string()))
}

fn identities(r: &Resolved, w: &mut Writer) -> Outcome {
    let mut cfg = CheckSuiteConfig { seed: r.seed, betas: r.betas.clone(), ..Default::default() };
    if r.manifold.is_some() || r.u_source.is_some() {
        cfg.cases = vec![SuiteCase { manifold: r.spec(), u: r.u() }];
    }
    let rep = match run_suite(&cfg) {
        Ok(rep) => rep,
        Err(e) => return embedded(w, "identities.json", e),
    };
    w.csv("identities.csv", |h| rep.to_csv(h))?;
    w.csv("identities_summary.csv", |h| summary_csv(&rep.summary, h))?;
    let pass = rep.pass();
    w.json("identities.json", json!({ "pass": pass, "report": rep }))?;
    let failing: Vec<String> = rep.summary.iter().filter(|s| !s.pass).map(|s| s.identity_id.to_string()).collect();
    let mut detail = format!(
        "{} tuples on {} chart(s), max rel residual {:.1e}, converged {:.1}%",
        rep.rows.len(),
        cfg.cases.len(),
        rep.max_rel_residual(),
        100.0 * rep.converged_fraction
    );
    if !failing.is_empty() {
        detail += &format!(", failing: {}", failing.join(" "));
    }
    if rep.cross_path.iter().any(|c| !c.pass) {
        detail += ", cross-path disagreement";
    }
    Ok((Status::of(pass), detail))
}

fn summary_csv(rows: &[SummaryRow], header: &[String]) -> String {
    let mut out: String = header.iter().map(|h| format!("# {h}\n")).collect();
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["identity_id", "tuples", "max_rel_residual", "min_convergence_ratio", "converged_fraction", "pass"])
        .expect("in-memory write");
    for s in rows {
        w.write_record([
            s.identity_id.to_string(),
            s.tuples.to_string(),
            format!("{:e}", s.max_rel_residual),
            format!("{:e}", s.min_convergence_ratio),
            format!("{}", s.converged_fraction),
            s.pass.to_string(),
        ])
        .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    out
}

fn monotone(r: &Resolved, w: &mut Writer) -> Outcome {
    let spec = r.spec();
    let betas = r.betas();
    let grid = r.grid(Suite::Monotone);
    let sets = match LevelSets::new(&spec, r.u()) {
        Ok(s) => s,
        Err(e) => return embedded(w, "monotone.json", e),
    };
    if sets.radial().is_none() {
        // Off the radial models only the profiles and the V-ODE are available.
        let prof = match a_v_profiles(&sets, &grid, &betas) {
            Ok(p) => p,
            Err(e) => return embedded(w, "monotone.json", e),
        };
        let v_ode = check_v_ode(&prof);
        w.csv("av_profiles.csv", |h| prof.to_csv(h))?;
        let pass = v_ode.pass();
        w.json("monotone.json", json!({ "pass": pass, "profiles": prof, "v_ode": v_ode }))?;
        return Ok((
            Status::of(pass),
            format!("{} levels, V-ODE max relative defect {:.1e}", prof.levels.len(), v_ode.max_rel_error()),
        ));
    }
    let suite = match monotone_suite(&sets, &grid, &betas) {
        Ok(s) => s,
        Err(e) => return embedded(w, "monotone.json", e),
    };
    w.csv("av_profiles.csv", |h| suite.profiles.to_csv(h))?;
    for id in [QuantityId::A, QuantityId::AMinus2n2V, QuantityId::GCombination, QuantityId::R2nAMinusOmega, QuantityId::R3nAPrime] {
        let reports = suite.reports_for(id);
        w.csv(&format!("monotone_{id}.csv"), |h| monotone_csv(&reports, h))?;
    }
    // Relative spread of A_β over the levels, per β: zero on cones.
    let spreads: Vec<f64> = (0..betas.len())
        .map(|b| {
            let vals = suite.profiles.levels.iter().map(|l| l.a_beta[b]);
            let hi = vals.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.fold(f64::INFINITY, f64::min);
            (hi - lo) / hi.abs()
        })
        .collect();
    let a_spread: Vec<Value> =
        betas.iter().zip(&spreads).map(|(beta, s)| json!({ "beta": beta, "relative_spread": s })).collect();
    let pass = suite.pass();
    let summaries = suite.summaries();
    let worst = summaries.iter().map(|s| s.max_adjusted_match_error).fold(0.0, f64::max);
    let violations: usize = summaries.iter().map(|s| s.violations).sum();
    w.json(
        "monotone.json",
        json!({ "pass": pass, "summary": summaries, "a_spread": a_spread, "suite": suite }),
    )?;
    Ok((
        Status::of(pass),
        format!(
            "{} levels × {} betas, A_β relative spread ≤ {:.1e}, max adjusted match error {worst:.1e}, violations {violations}, V-ODE {}",
            suite.profiles.levels.len(),
            betas.len(),
            spreads.iter().copied().fold(0.0, f64::max),
            if suite.v_ode.pass() { "ok" } else { "FAILED" }
        ),
    ))
}

fn umbilic(r: &Resolved, w: &mut Writer) -> Outcome {
    let spec = r.spec();
    let grid = r.grid(Suite::Umbilic);
    let sets = match LevelSets::new(&spec, r.u()) {
        Ok(s) => s,
        Err(e) => return embedded(w, "umbilic.json", e),
    };
    let rep = match umbilicity_study(&sets, &grid.levels(), r.level_parameter()) {
        Ok(rep) => rep,
        Err(e) => return embedded(w, "umbilic.json", e),
    };
    // r^{−n}Vol(B_r) at the largest radius: the volume-growth hypothesis, recorded only.
    let growth = volume_growth(&spec, &grid).ok().map(|g| g.tail);
    w.csv("umbilic.csv", |h| rep.to_csv(h))?;
    let finite = rep.rows.iter().all(|x| x.functional.is_finite() && x.normalized.is_finite() && x.bracket.is_finite());
    w.json("umbilic.json", json!({ "pass": finite, "volume_growth_tail": growth, "report": rep }))?;
    Ok((
        Status::of(finite),
        format!(
            "plateau {:.6} ± {:.1e} over {} radii (levels of {}), last functional {:.6}",
            rep.plateau,
            rep.plateau_spread,
            rep.rows.len(),
            match rep.parameter {
                LevelParameter::U => "u",
                LevelParameter::USquared => "u²",
            },
            rep.rows.last().map_or(f64::NAN, |x| x.functional)
        ),
    ))
}

fn greens(r: &Resolved, w: &mut Writer) -> Outcome {
    let spec = r.spec();
    let levels = r.grid(Suite::GreensProfile).levels();
    let prof = match area_profile(&spec, &levels).and_then(|a| greens_function(&a)) {
        Ok(p) => p,
        Err(e) => return embedded(w, "greens_profile.json", e),
    };
    let chart = match build_chart(&spec) {
        Ok(c) => c,
        Err(e) => return embedded(w, "greens_profile.json", e),
    };
    let n = spec.dim();
    let dir = 1.0 / (n as f64).sqrt();
    let mut residual: f64 = 0.0;
    for &rho in &levels {
        let p = vec![rho * dir; n];
        match harmonicity_of(&chart, &*prof.evaluator, &p) {
            Ok(h) => residual = residual.max(h.harmonic.abs()).max(h.square.abs()).max(h.linear.abs()),
            Err(e) => return embedded(w, "greens_profile.json", format!("at ρ = {rho}: {e}")),
        }
    }
    let nonneg_ricci = spec.radial_profile().and_then(|p| p.check_nonneg_ricci()).is_ok();
    let max_du = prof.du.iter().copied().fold(0.0, f64::max);
    let gradient_ok = !nonneg_ricci || max_du <= 1.0 + GRADIENT_TOLERANCE;
    let nonparabolic = match nonparabolic_check(&spec) {
        Ok(np) => np,
        Err(e) => return embedded(w, "greens_profile.json", e),
    };
    let pass = residual < HARMONICITY_TOLERANCE && gradient_ok && nonparabolic.converged;
    w.csv("greens_profile.csv", |h| prof.to_csv(h))?;
    w.json(
        "greens_profile.json",
        json!({
            "pass": pass,
            "max_harmonicity_residual": residual,
            "nonneg_ricci": nonneg_ricci,
            "max_gradient": max_du,
            "nonparabolic": nonparabolic,
            "profile": prof,
        }),
    )?;
    Ok((
        Status::of(pass),
        format!(
            "{} radii, max harmonicity residual {residual:.1e}, max |∇u| {max_du:.6}{}, nonparabolic {}",
            levels.len(),
            if nonneg_ricci { " (Ric ≥ 0)" } else { "" },
            nonparabolic.converged
        ),
    ))
}
