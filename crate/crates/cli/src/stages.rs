//! Pipeline stages. Each stage calls into the core library, writes its CSV
//! files and appends its checks to the manifest.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use dampwave::cap::{neumann_ground_default, CapSolver};
use dampwave::eigen::{self, EigenProblem};
use dampwave::experiments::{self, Geometry};
use dampwave::model::RunConfig;
use dampwave::quasimode;
use dampwave::resolvent;
use dampwave::wave::{exponential_rate, fit_decay, EnergyTrace};
use dampwave::{Error, Result};

use crate::manifest::ExperimentManifest;
use crate::thresholds::{Check, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    CapSolve,
    Neumann,
    EigenSweep,
    QuasimodeSweep,
    ResolventScan,
    Evolve,
}

impl Stage {
    /// Pipeline order: eigen before quasimode, quasimode before resolvent and evolve.
    pub const ALL: [Stage; 6] = [
        Stage::CapSolve,
        Stage::Neumann,
        Stage::EigenSweep,
        Stage::QuasimodeSweep,
        Stage::ResolventScan,
        Stage::Evolve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::CapSolve => "cap",
            Stage::Neumann => "neumann",
            Stage::EigenSweep => "eigen",
            Stage::QuasimodeSweep => "quasimode",
            Stage::ResolventScan => "resolvent",
            Stage::Evolve => "evolve",
        }
    }
}

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub thresholds: &'a Thresholds,
    pub out_dir: &'a Path,
    pub manifest: &'a mut ExperimentManifest,
}

impl Context<'_> {
    fn create(&mut self, stage: Stage, name: &str) -> Result<BufWriter<File>> {
        self.manifest.outputs.entry(stage.name().into()).or_default().push(name.into());
        Ok(BufWriter::new(File::create(self.out_dir.join(name))?))
    }

    fn check(&mut self, stage: Stage, name: &str, measured: f64, target: impl Into<String>, pass: bool) {
        self.manifest.checks.push(Check::new(stage.name(), name, measured, target, pass));
    }

    pub fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::CapSolve => self.cap(),
            Stage::Neumann => self.neumann(),
            Stage::EigenSweep => self.eigen(),
            Stage::QuasimodeSweep => self.quasimode(),
            Stage::ResolventScan => self.resolvent(),
            Stage::Evolve => self.evolve(),
        }
    }

    fn cap(&mut self) -> Result<()> {
        let s = Stage::CapSolve;
        let cfg = self.cfg;
        let solver = CapSolver::new(cfg.beta, cfg.grid.cap_length, cfg.grid.cap_points)?;
        let zero = Complex64::new(0.0, 0.0);
        let sol = solver.solve(zero)?;
        sol.write_csv(self.create(s, "cap_profile.csv")?, 10)?;
        let (_, identity) = sol.energy_identity();
        let tol = cfg.tolerances.energy_identity;
        self.check(s, "energy identity", identity, format!("< {tol:e}"), identity < tol);
        let tol = cfg.tolerances.self_convergence;
        let truncation = solver.self_convergence(zero)? / sol.f0.norm();
        self.check(s, "F(0) change, L and n doubled", truncation, format!("< {tol:e}"), truncation < tol);
        let refinement = solver.refinement_change(zero)? / sol.f0.norm();
        self.check(s, "F(0) change, n doubled", refinement, format!("< {tol:e}"), refinement < tol);
        if cfg.beta == 1.0 {
            let exact = experiments::airy_f0();
            let rel = (sol.f0 - exact).norm() / exact.norm();
            let tol = self.thresholds.cap_airy_rel;
            self.check(s, "F(0) vs Airy closed form", rel, format!("< {tol:e}"), rel < tol);
        }
        Ok(())
    }

    fn neumann(&mut self) -> Result<()> {
        let s = Stage::Neumann;
        let ground = neumann_ground_default(self.cfg.beta)?;
        let mut w = csv::Writer::from_writer(self.create(s, "neumann.csv")?);
        w.serialize(ground)?;
        w.flush()?;
        let level = ground.lambda_tilde_1;
        if self.cfg.beta == 2.0 {
            let err = (level - 1.0).abs();
            let tol = self.thresholds.neumann_harmonic;
            self.check(s, "ground level vs 1", err, format!("< {tol:e}"), err < tol);
        } else if self.cfg.beta == 1.0 {
            let err = (level - experiments::airy_neumann_level()).abs();
            let tol = self.thresholds.neumann_airy;
            self.check(s, "ground level vs |a1'|", err, format!("< {tol:e}"), err < tol);
        }
        Ok(())
    }

    fn eigen(&mut self) -> Result<()> {
        let s = Stage::EigenSweep;
        let cfg = self.cfg;
        let problem = EigenProblem::new(CapSolver::new(cfg.beta, cfg.grid.cap_length, cfg.grid.cap_points)?, cfg.a, cfg.l, cfg.bc)?
            .with_tolerances(cfg.tolerances.newton, cfg.tolerances.glue);
        let rows = problem.sweep(&cfg.h_values()?)?;
        eigen::write_sweep_csv(self.create(s, "eigen_sweep.csv")?, &rows)?;

        let scaling = experiments::eigen_scaling(cfg.beta, cfg.a, cfg.l, cfg.bc, cfg.grid.cap_points, None)?;
        eigen::write_sweep_csv(self.create(s, "eigen_scaling.csv")?, &scaling.solutions)?;
        let target = (cfg.beta + 4.0) / (cfg.beta + 2.0);
        let tol = self.thresholds.eigen_exponent;
        let slope = scaling.fit.slope;
        self.check(s, "|lambda - pi l h / a| exponent", slope, format!("{target:.4} +/- {tol}"), (slope - target).abs() <= tol);
        self.check(
            s,
            "max |C_h|",
            scaling.c_max,
            format!("< {:.4}", scaling.c_bound),
            scaling.c_max < scaling.c_bound,
        );
        Ok(())
    }

    fn quasimode(&mut self) -> Result<()> {
        let s = Stage::QuasimodeSweep;
        let cfg = self.cfg;
        let sweep = experiments::quasimode_sweep(cfg)?;
        quasimode::write_sweep_csv(self.create(s, "quasimode_sweep.csv")?, &sweep.rows)?;
        let slope = sweep.residual_fit.slope;
        let max = self.thresholds.residual_slope_max;
        self.check(s, "residual exponent in Re q", slope, format!("<= {max}"), slope <= max);

        let tail = experiments::tail_decay(cfg)?;
        let mut w = csv::Writer::from_writer(self.create(s, "tail.csv")?);
        w.write_record(["h", "tail", "local_slope", "mass_ratio", "mass_bound"])?;
        for (k, h) in tail.h.iter().enumerate() {
            let local = if k == 0 { String::new() } else { tail.local[k - 1].to_string() };
            w.write_record(&[
                h.to_string(),
                tail.tail[k].to_string(),
                local,
                tail.mass_ratio[k].to_string(),
                tail.mass_bound[k].to_string(),
            ])?;
        }
        w.flush()?;
        let mut last = 0;
        let mut ordered = true;
        for level in self.thresholds.tail_slopes.clone() {
            let at = tail.local.iter().position(|v| *v > level);
            ordered &= at.is_some_and(|k| k >= last);
            last = at.unwrap_or(usize::MAX);
            let best = tail.local.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            self.check(s, &format!("tail slope exceeds {level}"), best, format!("> {level}, in order"), ordered);
        }
        let limit = cfg.sigma.powf(cfg.beta / 2.0);
        let (worst, ok) = tail
            .h
            .iter()
            .zip(tail.mass_ratio.iter().zip(&tail.mass_bound))
            .filter(|(h, _)| **h < limit)
            .fold((0.0f64, true), |(w, ok), (_, (r, b))| (w.max(r / b), ok && r <= b));
        self.check(s, "mass ratio / bound", worst, "<= 1", ok);

        let placement = experiments::frequency_placement_default(cfg.beta, cfg.a, cfg.b, cfg.l, cfg.bc, cfg.grid.cap_points)?;
        let mut w = csv::Writer::from_writer(self.create(s, "placement.csv")?);
        w.write_record(["m", "re_q", "im_q"])?;
        for (m, q) in placement.m.iter().zip(&placement.q) {
            w.write_record(&[m.to_string(), q.re.to_string(), q.im.to_string()])?;
        }
        w.flush()?;
        let target = -(cfg.beta + 3.0) / (cfg.beta + 2.0);
        let tol = self.thresholds.placement_exponent;
        let slope = placement.fit.slope;
        self.check(s, "Im q exponent in Re q", slope, format!("{target:.4} +/- {tol}"), (slope - target).abs() <= tol);
        Ok(())
    }

    fn resolvent(&mut self) -> Result<()> {
        let s = Stage::ResolventScan;
        let cfg = self.cfg;
        let fit = experiments::resolvent_scan(cfg)?;
        resolvent::write_scan_csv(self.create(s, "resolvent_scan.csv")?, &fit)?;
        let margin = self.thresholds.resolvent_margin;
        let (lo, hi) = (1.0 / (cfg.beta + 2.0) - margin, 2.0 / (cfg.beta + 2.0) + margin);
        let e = fit.exponent();
        self.check(s, "resolvent growth exponent", e, format!("in [{lo:.4}, {hi:.4}]"), e >= lo && e <= hi);

        let (coarse, fine) = experiments::undamped_control(cfg.b, 50, cfg.grid.resolvent_points)?;
        let order = (coarse / fine).log2();
        let tol = self.thresholds.undamped_order;
        self.check(s, "W = 0 convergence order", order, format!("2 +/- {tol}"), (order - 2.0).abs() <= tol);
        Ok(())
    }

    fn evolve(&mut self) -> Result<()> {
        let s = Stage::Evolve;
        let cfg = self.cfg;
        let n = cfg.grid.evolve_points;
        let (runs, _skipped) =
            experiments::decay_on_branch(cfg.beta, Geometry::of(cfg), &cfg.m_list, n, 0.2, 0.1, cfg.evolve.quasimodes)?;
        for run in &runs {
            let m = dampwave::model::transverse_index(run.h, cfg.b).round() as u64;
            run.trace.write_csv(self.create(s, &format!("quasimode_trace_m{m}.csv"))?)?;
            let err = run.relative_error();
            let tol = self.thresholds.decay_rate_rel;
            self.check(s, &format!("decay rate vs 2 Im q (m {m})"), err, format!("< {tol}"), err < tol);
        }
        let ev = cfg.evolve;
        let drift = experiments::undamped_drift(cfg.b, n, 2, ev.dt, ev.horizon)?;
        let tol = self.thresholds.undamped_drift;
        self.check(s, "W = 0 energy drift", drift, format!("< {tol:e}"), drift < tol);
        let (_, r2, trace) = experiments::gcc_control(cfg.b, 0.5, n, 2, ev.dt, ev.horizon)?;
        trace.write_csv(self.create(s, "gcc_trace.csv")?)?;
        let tol = self.thresholds.gcc_r2;
        self.check(s, "uniform damping: log E linear r2", r2, format!("> {tol}"), r2 > tol);
        Ok(())
    }
}

/// Runs `stages` in order, stopping at the first error. Files written by
/// earlier stages are kept and listed in the manifest.
pub fn run_stages(cfg: &RunConfig, thresholds: &Thresholds, out_dir: &Path, stages: &[Stage]) -> ExperimentManifest {
    let mut manifest = ExperimentManifest::new(cfg, thresholds);
    let mut ctx = Context {
        cfg,
        thresholds,
        out_dir,
        manifest: &mut manifest,
    };
    for &stage in stages {
        if let Err(e) = ctx.run(stage) {
            ctx.manifest.failure = Some((stage.name().into(), e.to_string()));
            break;
        }
    }
    manifest
}

/// Key-value summary of a power-law and exponential fit of an energy trace.
pub fn fit_trace(path: &Path, out_dir: &Path) -> Result<(String, PathBuf)> {
    let trace = EnergyTrace::read_csv(File::open(path)?)?;
    let (t0, t1) = match (trace.times.first(), trace.times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::Fit("empty trace".into())),
    };
    let power = fit_decay(&trace)?;
    let (rate, rate_r2) = exponential_rate(&trace, t0, t1)?;
    let value = serde_json::json!({
        "trace": path.display().to_string(),
        "samples": trace.times.len(),
        "power_exponent": power.exponent,
        "power_window": [power.window.0, power.window.1],
        "power_r2": power.r2,
        "exponential_r2": power.exponential_r2,
        "inconclusive": power.inconclusive,
        "exponential_rate": rate,
        "exponential_rate_r2": rate_r2,
    });
    let text = value
        .as_object()
        .map(|o| o.iter().map(|(k, v)| format!("{k} = {v}\n")).collect())
        .unwrap_or_default();
    let out = out_dir.join("fit.json");
    std::fs::write(&out, serde_json::to_string_pretty(&value).map_err(|e| Error::Fit(e.to_string()))? + "\n")?;
    Ok((text, out))
}
