//! The six batch commands. Each writes its artifacts under the output
//! directory and returns the list of failed checks.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use smallbody::biot_savart::{stream_function, verify_stream_bounds};
use smallbody::cutoff::{measure_cutoff_scalings, measure_testfn_convergence, CenterPath, CutoffFamily, CutoffProfile};
use smallbody::fields::{curl, write_snapshot, Grid, Snapshot};
use smallbody::limit::{run_sweep, tracking_family, weak_residual, xi_diagnostic, SweepPlan, WEAK_TOLERANCE};
use smallbody::modes::BandLimitedField;
use smallbody::solver::{max_energy_excess, run, run_observed, SimulationConfig, ENERGY_HEADER};
use smallbody::{Error, Result};

use crate::config::ParsedConfig;

/// `total(t) ≤ total(0)(1 + TOL_ENERGY)`.
pub const TOL_ENERGY: f64 = 1e-3;
/// Per-step relative momentum imbalance of the exchange.
pub const TOL_MOMENTUM: f64 = 1e-10;
/// Allowed distance of a fitted exponent from theory.
pub const TOL_SLOPE: f64 = 0.15;
/// Relative `curl ψ − φ` on random solenoidal fields.
pub const TOL_CURL_STREAM: f64 = 1e-8;
/// Bound on the local stream-function ratios.
pub const STREAM_CAP: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Reference,
    Sweep,
    VerifyCutoff,
    VerifyStream,
    AuditWeak,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Reference => "reference",
            Self::Sweep => "sweep",
            Self::VerifyCutoff => "verify-cutoff",
            Self::VerifyStream => "verify-stream",
            Self::AuditWeak => "audit-weak",
        }
    }
}

/// One failed check: `FAIL check=<name> value=<v> bound=<b>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub check: String,
    pub value: String,
    pub bound: String,
}

impl Failure {
    fn new(check: impl Into<String>, value: impl ToString, bound: impl Into<String>) -> Self {
        Self { check: check.into(), value: value.to_string(), bound: bound.into() }
    }

    pub fn line(&self) -> String {
        format!("FAIL check={} value={} bound={}", self.check, self.value, self.bound)
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<Failure>,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    fn check(&mut self, name: &str, ok: bool, value: impl ToString, bound: &str) {
        if !ok {
            self.failures.push(Failure::new(name, value, bound));
        }
    }

    fn write(&mut self, path: PathBuf, text: &str) -> Result<()> {
        fs::write(&path, text)?;
        self.artifacts.push(path);
        Ok(())
    }
}

pub struct Invocation {
    pub kind: CommandKind,
    pub config: ParsedConfig,
    pub out: PathBuf,
    pub jobs: usize,
}

/// Report header: tool version, command, seed, grid and the config echo.
/// Wall-clock time goes to `run.log` so reports stay reproducible.
pub fn provenance(inv: &Invocation) -> String {
    let c = &inv.config.sim;
    let mut s = String::new();
    let _ = writeln!(s, "# smallbody {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# command={}", inv.kind.name());
    let _ = writeln!(s, "# seed={}", c.seed);
    let _ = writeln!(s, "# grid L={:.16e} N={}", c.box_length, c.resolution);
    let _ = writeln!(s, "# config");
    for line in inv.config.echo_text().lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn execute(inv: &Invocation) -> Result<Outcome> {
    fs::create_dir_all(&inv.out)?;
    let mut out = Outcome::default();
    out.write(inv.out.join("provenance.txt"), &provenance(inv))?;
    match inv.kind {
        CommandKind::Simulate => simulate(inv, &inv.config.sim, &mut out)?,
        CommandKind::Reference => simulate(inv, &inv.config.sim.without_body(), &mut out)?,
        CommandKind::Sweep => sweep(inv, &mut out)?,
        CommandKind::VerifyCutoff => verify_cutoff(inv, &mut out)?,
        CommandKind::VerifyStream => verify_stream(inv, &mut out)?,
        CommandKind::AuditWeak => audit_weak(inv, &mut out)?,
    }
    let mut text = provenance(inv);
    for f in &out.failures {
        let _ = writeln!(text, "{}", f.line());
    }
    out.write(inv.out.join("failures.txt"), &text)?;
    Ok(out)
}

fn simulate(inv: &Invocation, cfg: &SimulationConfig, out: &mut Outcome) -> Result<()> {
    let snap_dir = inv.out.join("snapshots");
    if inv.config.harness.write_snapshots {
        fs::create_dir_all(&snap_dir)?;
    }
    let head = provenance(inv);
    let energy = RefCell::new(format!("{head}{ENERGY_HEADER}\n"));
    let mut body = format!("{head}# t h l omega quat\n");
    let mut steps = format!("{head}# t slip momentum_imbalance max_fluctuation\n");
    let mut times = format!("{head}# index t\n");
    let mut imbalance: f64 = 0.0;
    let records = RefCell::new(Vec::new());
    let mut index = 0usize;
    let result = run_observed(
        cfg,
        |s| {
            if s.steps_taken() == 0 {
                let r = s.energy_record();
                let _ = writeln!(energy.borrow_mut(), "{}", r.to_line());
                records.borrow_mut().push(r);
            }
            if let Some(b) = s.body() {
                let _ = writeln!(body, "{}", b.log_line(s.time()));
            }
            let _ = writeln!(times, "{index} {}", fmt(s.time()));
            if inv.config.harness.write_snapshots {
                let path = snap_dir.join(format!("u_{index:04}.dat"));
                write_snapshot(BufWriter::new(File::create(&path)?), &Snapshot::Vector(s.velocity()))?;
            }
            index += 1;
            Ok(())
        },
        |s, d| {
            let r = s.energy_record();
            let _ = writeln!(energy.borrow_mut(), "{}", r.to_line());
            records.borrow_mut().push(r);
            imbalance = imbalance.max(d.momentum.relative_imbalance());
            let _ = writeln!(
                steps,
                "{} {} {} {}",
                fmt(s.time()),
                fmt(d.slip),
                fmt(d.momentum.relative_imbalance()),
                fmt(d.max_fluctuation)
            );
        },
    );
    out.write(inv.out.join("energy.dat"), &energy.borrow())?;
    out.write(inv.out.join("steps.dat"), &steps)?;
    out.write(inv.out.join("times.dat"), &times)?;
    if cfg.has_body() {
        out.write(inv.out.join("body.dat"), &body)?;
    }
    if let Err(e) = result {
        out.failures.push(Failure::new("run", format!("\"{e}\""), "completes"));
        return Ok(());
    }
    let excess = max_energy_excess(&records.borrow());
    out.check("energy_inequality", excess <= TOL_ENERGY, fmt(excess), &fmt(TOL_ENERGY));
    out.check("momentum_exchange", imbalance <= TOL_MOMENTUM, fmt(imbalance), &fmt(TOL_MOMENTUM));
    Ok(())
}

/// The sweep plan described by a parsed configuration.
pub fn sweep_plan(cfg: &ParsedConfig, jobs: usize) -> Result<SweepPlan> {
    let h = &cfg.harness;
    Ok(SweepPlan {
        base: cfg.sim.clone(),
        epsilons: h.epsilons.clone(),
        alpha: cfg.sim.alpha,
        control_alpha: h.control_alpha,
        k: h.k,
        test_functions: SweepPlan::default_test_functions(cfg.sim.box_length, h.test_seed)?,
        profile: CutoffProfile::quintic(),
        jobs,
    })
}

fn sweep(inv: &Invocation, out: &mut Outcome) -> Result<()> {
    let plan = sweep_plan(&inv.config, inv.jobs)?;
    let report = run_sweep(&plan)?;
    out.write(inv.out.join("sweep_report.txt"), &format!("{}{}", provenance(inv), report.to_text()))?;
    let plots = inv.out.join("plots");
    report.write_plot_files(&plots)?;
    for r in report.primary.iter().chain(&report.control) {
        let tag = format!("eps={} alpha={}", fmt(r.epsilon), fmt(r.alpha));
        match &r.outcome {
            Err(e) => out.failures.push(Failure::new(format!("run[{tag}]"), format!("\"{e}\""), "completes")),
            Ok(m) => {
                out.check(&format!("energy_inequality[{tag}]"), m.energy_excess <= TOL_ENERGY, fmt(m.energy_excess), &fmt(TOL_ENERGY));
                out.check(
                    &format!("momentum_exchange[{tag}]"),
                    m.momentum_imbalance <= TOL_MOMENTUM,
                    fmt(m.momentum_imbalance),
                    &fmt(TOL_MOMENTUM),
                );
                out.check(&format!("k_clearance[{tag}]"), m.k_clearance > 0.0, fmt(m.k_clearance), "> 0");
            }
        }
    }
    out.check("d_monotone", report.d_monotone, report.d_monotone, "true");
    let ds: Vec<f64> = report.primary.iter().filter_map(|r| r.metrics().map(|m| m.d)).collect();
    if let (Some(first), Some(last)) = (ds.first(), ds.last()) {
        let ratio = last / first;
        out.check("d_ratio", ratio <= 0.5, fmt(ratio), "<= 0.5");
    }
    let scaled = report.scaled_speed_decreasing();
    out.check("scaled_speed_decreasing", scaled, scaled, "true");
    if let Some(c) = report.control_heavier_moves_less() {
        out.check("control_moves_more", c, c, "true");
    }
    out.check("holder_spread", report.holder_spread < 3.0, fmt(report.holder_spread), "< 3");
    Ok(())
}

/// Geometric cut-off schedule `L/16, L/32, L/64, L/128`.
pub fn cutoff_schedule(length: f64) -> Vec<f64> {
    [16.0, 32.0, 64.0, 128.0].iter().map(|d| length / d).collect()
}

fn verify_cutoff(inv: &Invocation, out: &mut Outcome) -> Result<()> {
    let c = &inv.config.sim;
    let grid = Grid::new(c.box_length, inv.config.harness.verify_resolution)?;
    let fams: Vec<CutoffFamily> = cutoff_schedule(c.box_length)
        .into_iter()
        .map(|e| CutoffFamily::new(CutoffProfile::quintic(), e, CenterPath::Fixed(c.body_center), grid))
        .collect::<Result<_>>()?;
    let qs = [1.2, 2.0, 3.0, 6.0];
    let scal = measure_cutoff_scalings(&fams, &qs, 0.0)?;
    let phi = BandLimitedField::random(c.box_length, 2, 6, inv.config.harness.test_seed)?;
    let conv = measure_testfn_convergence(&phi, &fams, 0.0)?;
    let head = provenance(inv);
    out.write(inv.out.join("cutoff_scaling.txt"), &format!("{head}{}", scal.to_lines()))?;
    out.write(inv.out.join("testfn_convergence.txt"), &format!("{head}{}", conv.to_lines()))?;
    for e in &scal.entries {
        let name = format!("slope[{} q={}]", e.quantity, e.q);
        let ok = (e.slope - e.theory).abs() <= TOL_SLOPE;
        out.check(&name, ok, fmt(e.slope), &format!("{} +- {TOL_SLOPE}", fmt(e.theory)));
    }
    for (quantity, lo, hi) in [("testfn_l2", 1.35, 1.65), ("testfn_h1", 0.35, 0.65)] {
        let e = conv.entries.iter().find(|e| e.quantity == quantity).ok_or_else(|| Error::Invalid(format!("missing {quantity}")))?;
        out.check(&format!("slope[{quantity}]"), (lo..=hi).contains(&e.slope), fmt(e.slope), &format!("[{lo}, {hi}]"));
    }
    let spread = conv.extra("h1_over_h2_spread").unwrap_or(f64::INFINITY);
    out.check("h1_over_h2_spread", spread < 2.0, fmt(spread), "< 2");
    Ok(())
}

fn verify_stream(inv: &Invocation, out: &mut Outcome) -> Result<()> {
    let c = &inv.config.sim;
    let grid = c.grid()?;
    let mut text = provenance(inv);
    let mut worst: f64 = 0.0;
    for j in 0..50u64 {
        let phi = BandLimitedField::random(c.box_length, 3, 8, inv.config.harness.test_seed.wrapping_add(j))?.sample(grid)?;
        let back = curl(&stream_function(&phi)?);
        worst = worst.max(back.sub(&phi).max_norm() / phi.max_norm());
    }
    let _ = writeln!(text, "curl_stream_max_rel_error={}", fmt(worst));
    out.check("curl_stream", worst <= TOL_CURL_STREAM, fmt(worst), &fmt(TOL_CURL_STREAM));

    let phi = BandLimitedField::random(c.box_length, 2, 6, inv.config.harness.test_seed)?.sample(grid)?;
    let rmax = c.box_length / 8.0;
    let radii: Vec<f64> = (0..6).rev().map(|k| rmax / 2f64.powi(k)).collect();
    let rep = verify_stream_bounds(&phi, c.body_center, &radii, STREAM_CAP)?;
    text.push_str(&rep.to_lines());
    let _ = writeln!(text, "cap={}", fmt(rep.cap));
    let _ = writeln!(text, "pass={}", rep.pass);
    out.check("stream_ratio_bounded", rep.pass, fmt(rep.max_ratio().max(rep.global_grad_ratio)), &fmt(STREAM_CAP));
    out.write(inv.out.join("stream_report.txt"), &text)
}

fn with_dt(cfg: &SimulationConfig, dt: f64) -> SimulationConfig {
    SimulationConfig { dt, lambda: dt, output_interval: dt, ..cfg.clone() }
}

fn audit_weak(inv: &Invocation, out: &mut Outcome) -> Result<()> {
    let c = &inv.config.sim;
    let phi = BandLimitedField::random(c.box_length, 2, 6, inv.config.harness.test_seed)?;
    let coarse = with_dt(&c.without_body(), c.dt);
    let fine = with_dt(&c.without_body(), 0.5 * c.dt);
    let r_coarse = weak_residual(&run(&coarse)?, &coarse, &phi, None)?;
    let r_fine = weak_residual(&run(&fine)?, &fine, &phi, None)?;
    let coupled_cfg = with_dt(c, c.dt);
    let coupled = run(&coupled_cfg)?;
    let fam = tracking_family(&coupled, CutoffProfile::quintic(), c.epsilon)?;
    let r_coupled = weak_residual(&coupled, &coupled_cfg, &phi, Some(&fam))?;
    let phis = SweepPlan::default_test_functions(c.box_length, inv.config.harness.test_seed)?;
    let xi = xi_diagnostic(&coupled, &phis, Some(&fam))?;

    let mut text = provenance(inv);
    for (name, r) in [("reference", &r_coarse), ("reference_half_dt", &r_fine), ("coupled", &r_coupled)] {
        let _ = writeln!(
            text,
            "[{name}] time_term={} viscous_term={} nonlinear_term={} initial_term={} phi_h2={} residual={}",
            fmt(r.time_term),
            fmt(r.viscous_term),
            fmt(r.nonlinear_term),
            fmt(r.initial_term),
            fmt(r.phi_norm),
            fmt(r.normalized())
        );
    }
    let ratio = r_fine.normalized() / r_coarse.normalized();
    let _ = writeln!(text, "refinement_ratio={}", fmt(ratio));
    let _ = writeln!(text, "tol_w={}", fmt(WEAK_TOLERANCE));
    let _ = writeln!(text, "xi_holder={} xi_bound={}", fmt(xi.holder), fmt(xi.bound));
    out.write(inv.out.join("weak_report.txt"), &text)?;

    out.check("weak_reference", r_coarse.normalized() <= WEAK_TOLERANCE, fmt(r_coarse.normalized()), &fmt(WEAK_TOLERANCE));
    out.check("weak_refinement", (0.375..=0.625).contains(&ratio), fmt(ratio), "[0.375, 0.625]");
    let bound = 3.0 * WEAK_TOLERANCE;
    out.check("weak_coupled", r_coupled.normalized() <= bound, fmt(r_coupled.normalized()), &fmt(bound));
    Ok(())
}

/// Output directory default: `out/<command>`.
pub fn default_out(kind: CommandKind) -> PathBuf {
    Path::new("out").join(kind.name())
}
