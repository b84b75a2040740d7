//! `key = value` run configuration.
//!
//! Simulation keys are the [`SimulationConfig`] field names. A few extra keys
//! configure the sweep, the verification commands and output. `#` starts a
//! comment. Vectors are written `x, y, z` (parentheses optional); lengths in
//! lists may be written `L/<divisor>`.

use std::fmt::Write as _;
use std::path::Path;

use smallbody::fields::Ball;
use smallbody::solver::{InitialDatum, SimulationConfig};
use smallbody::{Error, Result, Vec3};

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "nu",
    "box_length",
    "resolution",
    "dt",
    "t_final",
    "output_interval",
    "epsilon",
    "alpha",
    "rho0",
    "lambda",
    "initial_field",
    "initial_l",
    "initial_omega",
    "body_center",
    "body_aspect",
    "smoothing_width",
    "seed",
    "epsilons",
    "control_alpha",
    "k_center",
    "k_radius",
    "test_seed",
    "verify_resolution",
    "write_snapshots",
];

/// Settings outside [`SimulationConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct HarnessSettings {
    pub epsilons: Vec<f64>,
    /// Negative disables the control branch.
    pub control_alpha: Option<f64>,
    pub k: Ball,
    pub test_seed: u64,
    /// Lattice for the cut-off scaling and test-function measurements.
    pub verify_resolution: usize,
    pub write_snapshots: bool,
}

#[derive(Clone, Debug)]
pub struct ParsedConfig {
    pub sim: SimulationConfig,
    pub harness: HarnessSettings,
    /// `(key, value, explicitly set)` for every key.
    pub echo: Vec<(String, String, bool)>,
}

impl ParsedConfig {
    /// `key = value` lines, defaults marked.
    pub fn echo_text(&self) -> String {
        let mut s = String::new();
        for (k, v, set) in &self.echo {
            let _ = writeln!(s, "{k} = {v}{}", if *set { "" } else { "  # default" });
        }
        s
    }
}

struct Entry {
    value: String,
    line: usize,
}

fn bad(key: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), line, msg: msg.into() }
}

fn parse_f64(key: &str, e: &Entry) -> Result<f64> {
    let v: f64 = e.value.trim().parse().map_err(|_| bad(key, e.line, format!("expected a number, got '{}'", e.value)))?;
    if !v.is_finite() {
        return Err(bad(key, e.line, "must be finite"));
    }
    Ok(v)
}

fn parse_u64(key: &str, e: &Entry) -> Result<u64> {
    e.value.trim().parse().map_err(|_| bad(key, e.line, format!("expected a non-negative integer, got '{}'", e.value)))
}

fn parse_bool(key: &str, e: &Entry) -> Result<bool> {
    match e.value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        v => Err(bad(key, e.line, format!("expected true or false, got '{v}'"))),
    }
}

fn parse_length(key: &str, e: &Entry, token: &str, length: f64) -> Result<f64> {
    let t = token.trim();
    let v = if let Some(d) = t.strip_prefix("L/") {
        let d: f64 = d.trim().parse().map_err(|_| bad(key, e.line, format!("bad divisor in '{t}'")))?;
        if d <= 0.0 {
            return Err(bad(key, e.line, format!("divisor must be positive in '{t}'")));
        }
        length / d
    } else {
        t.parse().map_err(|_| bad(key, e.line, format!("expected a number or L/<divisor>, got '{t}'")))?
    };
    if !v.is_finite() {
        return Err(bad(key, e.line, "must be finite"));
    }
    Ok(v)
}

fn parse_vec3(key: &str, e: &Entry, length: f64) -> Result<Vec3> {
    let body = e.value.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<&str> = body.split(',').collect();
    if parts.len() != 3 {
        return Err(bad(key, e.line, format!("expected three comma-separated values, got '{}'", e.value)));
    }
    let mut v = Vec3::zeros();
    for (i, p) in parts.iter().enumerate() {
        v[i] = parse_length(key, e, p, length)?;
    }
    Ok(v)
}

fn parse_list(key: &str, e: &Entry, length: f64) -> Result<Vec<f64>> {
    e.value.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse_length(key, e, t, length)).collect()
}

fn tokenize(text: &str, overrides: &[String]) -> Result<Vec<(String, Entry)>> {
    let mut out: Vec<(String, Entry)> = Vec::new();
    let lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.to_string()));
    let sets = overrides.iter().map(|o| (0usize, o.clone()));
    for (line, raw) in lines.chain(sets) {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| {
            let where_ = if line == 0 { format!("override '{raw}'") } else { format!("'{content}'") };
            bad(content.split_whitespace().next().unwrap_or(""), line, format!("expected key = value in {where_}"))
        })?;
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(bad(&key, line, "unknown key"));
        }
        if line != 0 && out.iter().any(|(k2, e)| *k2 == key && e.line != 0) {
            return Err(bad(&key, line, "duplicate key"));
        }
        out.retain(|(k2, _)| *k2 != key);
        out.push((key, Entry { value: v.trim().to_string(), line }));
    }
    Ok(out)
}

fn fmt_vec(v: Vec3) -> String {
    format!("{:.16e}, {:.16e}, {:.16e}", v.x, v.y, v.z)
}

/// Parse a configuration text plus `key=value` overrides (later wins).
/// Every invariant of the simulation is checked; errors name key and line
/// (line 0 for overrides).
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ParsedConfig> {
    let entries = tokenize(text, overrides)?;
    let get = |k: &str| entries.iter().find(|(key, _)| key == k).map(|(_, e)| e);
    let line_of = |k: &str| get(k).map_or(0, |e| e.line);

    let mut sim = SimulationConfig::default();
    if let Some(e) = get("box_length") {
        sim.box_length = parse_f64("box_length", e)?;
    }
    let length = sim.box_length;
    for (key, slot) in [("nu", &mut sim.nu), ("dt", &mut sim.dt), ("t_final", &mut sim.t_final)] {
        if let Some(e) = get(key) {
            *slot = parse_f64(key, e)?;
        }
    }
    for (key, slot) in [
        ("output_interval", &mut sim.output_interval),
        ("alpha", &mut sim.alpha),
        ("rho0", &mut sim.rho0),
        ("smoothing_width", &mut sim.smoothing_width),
    ] {
        if let Some(e) = get(key) {
            *slot = parse_f64(key, e)?;
        }
    }
    if let Some(e) = get("epsilon") {
        sim.epsilon = parse_length("epsilon", e, &e.value, length)?;
    } else {
        sim.epsilon = length / 8.0;
    }
    sim.lambda = match get("lambda") {
        Some(e) => parse_f64("lambda", e)?,
        None => sim.dt,
    };
    if let Some(e) = get("resolution") {
        sim.resolution = parse_u64("resolution", e)? as usize;
    }
    if let Some(e) = get("seed") {
        sim.seed = parse_u64("seed", e)?;
    }
    if let Some(e) = get("initial_field") {
        sim.initial_field =
            InitialDatum::parse(&e.value, sim.seed).map_err(|err| bad("initial_field", e.line, err.to_string()))?;
    } else if let InitialDatum::RandomBandLimited { .. } = sim.initial_field {
        sim.initial_field = InitialDatum::RandomBandLimited { seed: sim.seed };
    }
    for (key, slot) in [
        ("initial_l", &mut sim.initial_l),
        ("initial_omega", &mut sim.initial_omega),
        ("body_center", &mut sim.body_center),
        ("body_aspect", &mut sim.body_aspect),
    ] {
        if let Some(e) = get(key) {
            *slot = parse_vec3(key, e, length)?;
        }
    }
    if get("body_center").is_none() {
        sim.body_center = Vec3::new(length / 4.0, 0.0, 0.0);
    }
    sim.validate().map_err(|err| match err {
        Error::Config { key, msg, .. } => {
            let line = line_of(&key);
            Error::Config { key, line, msg }
        }
        other => other,
    })?;

    let mut harness = HarnessSettings {
        epsilons: [8.0, 16.0, 24.0, 32.0].iter().map(|d| length / d).collect(),
        control_alpha: Some(0.0),
        k: Ball::new(Vec3::new(length / 2.0, length / 2.0, length / 2.0), length / 4.0),
        test_seed: 11,
        verify_resolution: 512,
        write_snapshots: true,
    };
    if let Some(e) = get("epsilons") {
        harness.epsilons = parse_list("epsilons", e, length)?;
        if harness.epsilons.is_empty() {
            return Err(bad("epsilons", e.line, "empty schedule"));
        }
    }
    if let Some(e) = get("control_alpha") {
        let a = parse_f64("control_alpha", e)?;
        harness.control_alpha = if a < 0.0 { None } else { Some(a) };
    }
    if let Some(e) = get("k_center") {
        harness.k.center = parse_vec3("k_center", e, length)?;
    }
    if let Some(e) = get("k_radius") {
        harness.k.radius = parse_length("k_radius", e, &e.value, length)?;
        if harness.k.radius <= 0.0 {
            return Err(bad("k_radius", e.line, "must be positive"));
        }
    }
    if let Some(e) = get("test_seed") {
        harness.test_seed = parse_u64("test_seed", e)?;
    }
    if let Some(e) = get("verify_resolution") {
        let n = parse_u64("verify_resolution", e)? as usize;
        if n < 16 || n % 2 != 0 {
            return Err(bad("verify_resolution", e.line, "must be even and >= 16"));
        }
        harness.verify_resolution = n;
    }
    if let Some(e) = get("write_snapshots") {
        harness.write_snapshots = parse_bool("write_snapshots", e)?;
    }

    let values: Vec<(&str, String)> = vec![
        ("nu", format!("{:.16e}", sim.nu)),
        ("box_length", format!("{:.16e}", sim.box_length)),
        ("resolution", sim.resolution.to_string()),
        ("dt", format!("{:.16e}", sim.dt)),
        ("t_final", format!("{:.16e}", sim.t_final)),
        ("output_interval", format!("{:.16e}", sim.output_interval)),
        ("epsilon", format!("{:.16e}", sim.epsilon)),
        ("alpha", format!("{:.16e}", sim.alpha)),
        ("rho0", format!("{:.16e}", sim.rho0)),
        ("lambda", format!("{:.16e}", sim.lambda)),
        ("initial_field", sim.initial_field.to_string()),
        ("initial_l", fmt_vec(sim.initial_l)),
        ("initial_omega", fmt_vec(sim.initial_omega)),
        ("body_center", fmt_vec(sim.body_center)),
        ("body_aspect", fmt_vec(sim.body_aspect)),
        ("smoothing_width", format!("{:.16e}", sim.smoothing_width)),
        ("seed", sim.seed.to_string()),
        ("epsilons", harness.epsilons.iter().map(|e| format!("{e:.16e}")).collect::<Vec<_>>().join(", ")),
        ("control_alpha", format!("{:.16e}", harness.control_alpha.unwrap_or(-1.0))),
        ("k_center", fmt_vec(harness.k.center)),
        ("k_radius", format!("{:.16e}", harness.k.radius)),
        ("test_seed", harness.test_seed.to_string()),
        ("verify_resolution", harness.verify_resolution.to_string()),
        ("write_snapshots", harness.write_snapshots.to_string()),
    ];
    debug_assert_eq!(values.len(), KEYS.len());
    let echo = values.into_iter().map(|(k, v)| (k.to_string(), v, get(k).is_some())).collect();
    Ok(ParsedConfig { sim, harness, echo })
}

/// Read `path` (or start from defaults) and apply overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ParsedConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}
