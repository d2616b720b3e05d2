//! Run configuration in TOML.
//!
//! Simulation parameters are top-level keys; `[preset]`, `[diagnostics]` and
//! `[output]` are flat sections. Only `alpha` and `preset.name` are required.
//!
//! ```toml
//! alpha = 0.5
//! j = 4.0
//! nv = 24
//!
//! [preset]
//! name = "bimodal"
//! peak = 1.0
//!
//! [diagnostics]
//! lambdas = [2.0, 3.0]
//!
//! [output]
//! dir = "out"
//! checkpoint_every = 50
//! ```

use std::path::PathBuf;

use toml::{Table, Value};

use crate::collision::KernelProfile;
use crate::diagnostics::{default_lambdas, DiagnosticsConfig};
use crate::error::{Error, Result, Violation};
use crate::fields::SimulationParams;
use crate::haldane::FillingMode;
use crate::presets::Preset;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SimulationParams,
    pub preset: Preset,
    /// Relative amplitude of the seeded multiplicative noise on the preset.
    pub jitter: f64,
    pub seed: u64,
    /// Mollify the preset before clamping.
    pub mollify: bool,
    pub diagnostics: DiagnosticsConfig,
    pub output_dir: PathBuf,
    /// Write a checkpoint every this many steps (0 = never).
    pub checkpoint_every: usize,
}

impl RunConfig {
    pub fn new(params: SimulationParams, preset: Preset) -> Self {
        let diagnostics = DiagnosticsConfig::with_defaults(params.j);
        Self {
            params,
            preset,
            jitter: 0.0,
            seed: 0,
            mollify: false,
            diagnostics,
            output_dir: PathBuf::from("out"),
            checkpoint_every: 0,
        }
    }

    /// Canonical TOML text; parsing it gives back an equal config.
    pub fn to_toml(&self) -> String {
        let p = &self.params;
        let mut top = Table::new();
        top.insert("alpha".into(), p.alpha.into());
        top.insert("b0".into(), p.b0.into());
        top.insert("gamma".into(), p.gamma.into());
        top.insert("gamma_prime".into(), p.gamma_prime.into());
        top.insert("c_b".into(), p.c_b.into());
        top.insert("j".into(), p.j.into());
        top.insert("nx".into(), (p.nx as i64).into());
        top.insert("nv".into(), (p.nv as i64).into());
        top.insert("ntheta".into(), (p.ntheta as i64).into());
        top.insert("dt".into(), p.dt.into());
        top.insert("t_end".into(), p.t_end.into());
        top.insert("picard_iters".into(), (p.picard_iters as i64).into());
        top.insert("picard_tol".into(), p.picard_tol.into());
        top.insert("conservative_projection".into(), p.conservative_projection.into());
        top.insert("profile".into(), p.profile.name().into());
        top.insert("filling".into(), p.filling.name().into());

        let mut preset = Table::new();
        preset.insert("name".into(), self.preset.name().into());
        match self.preset {
            Preset::Wu { mu, temperature } => {
                preset.insert("mu".into(), mu.into());
                preset.insert("temperature".into(), temperature.into());
            }
            Preset::Bimodal {
                peak,
                separation,
                width,
            } => {
                preset.insert("peak".into(), peak.into());
                preset.insert("separation".into(), separation.into());
                preset.insert("width".into(), width.into());
            }
            Preset::Wave {
                mu,
                temperature,
                amplitude,
            } => {
                preset.insert("mu".into(), mu.into());
                preset.insert("temperature".into(), temperature.into());
                preset.insert("amplitude".into(), amplitude.into());
            }
        }
        preset.insert("jitter".into(), self.jitter.into());
        preset.insert("seed".into(), (self.seed as i64).into());
        preset.insert("mollify".into(), self.mollify.into());
        top.insert("preset".into(), Value::Table(preset));

        let d = &self.diagnostics;
        let mut diag = Table::new();
        diag.insert("bony".into(), d.bony.into());
        diag.insert(
            "lambdas".into(),
            Value::Array(d.lambdas.iter().map(|&l| l.into()).collect()),
        );
        if let Some((c, w)) = d.window {
            diag.insert("window_center".into(), c.into());
            diag.insert("window_half_width".into(), w.into());
        }
        diag.insert("band".into(), d.band.into());
        top.insert("diagnostics".into(), Value::Table(diag));

        let mut out = Table::new();
        out.insert("dir".into(), self.output_dir.to_string_lossy().into_owned().into());
        out.insert("checkpoint_every".into(), (self.checkpoint_every as i64).into());
        top.insert("output".into(), Value::Table(out));
        top.to_string()
    }
}

/// Walks one table, recording every problem instead of stopping at the first.
struct Reader<'a, 'e> {
    table: &'a Table,
    prefix: &'static str,
    used: Vec<&'static str>,
    errors: &'e mut Vec<Violation>,
}

impl<'a, 'e> Reader<'a, 'e> {
    fn new(table: &'a Table, prefix: &'static str, errors: &'e mut Vec<Violation>) -> Self {
        Self {
            table,
            prefix,
            used: Vec::new(),
            errors,
        }
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.table.get(key)
    }

    fn bad(&mut self, key: &str, msg: impl Into<String>) {
        let path = self.path(key);
        self.errors.push(Violation::new(path, msg));
    }

    fn float(&mut self, key: &'static str, default: f64) -> f64 {
        match self.get(key) {
            None => default,
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(_) => {
                self.bad(key, "expected a number");
                default
            }
        }
    }

    fn required_float(&mut self, key: &'static str) -> f64 {
        if !self.table.contains_key(key) {
            self.used.push(key);
            self.bad(key, "missing required key");
            return f64::NAN;
        }
        self.float(key, f64::NAN)
    }

    fn uint(&mut self, key: &'static str, default: usize) -> usize {
        match self.get(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(_) => {
                self.bad(key, "expected a non-negative integer");
                default
            }
        }
    }

    fn boolean(&mut self, key: &'static str, default: bool) -> bool {
        match self.get(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.bad(key, "expected true or false");
                default
            }
        }
    }

    fn string(&mut self, key: &'static str) -> Option<&'a str> {
        match self.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s.as_str()),
            Some(_) => {
                self.bad(key, "expected a string");
                None
            }
        }
    }

    fn floats(&mut self, key: &'static str) -> Option<Vec<f64>> {
        match self.get(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        _ => {
                            self.bad(key, "expected an array of numbers");
                            return None;
                        }
                    }
                }
                Some(out)
            }
            _ => {
                self.bad(key, "expected an array of numbers");
                None
            }
        }
    }

    fn section(&mut self, key: &'static str) -> Option<&'a Table> {
        match self.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.bad(key, "expected a section");
                None
            }
        }
    }

    /// Reports every key that was never asked for.
    fn finish(self) {
        for key in self.table.keys() {
            if !self.used.contains(&key.as_str()) {
                let path = if self.prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{}.{key}", self.prefix)
                };
                self.errors.push(Violation::new(path, "unknown key"));
            }
        }
    }
}

/// Parses and validates a config, reporting all violations at once.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![Violation::new("<document>", e.message())]))?;
    let mut errors = Vec::new();
    let d = SimulationParams::default();

    let mut top = Reader::new(&table, "", &mut errors);
    let mut params = SimulationParams {
        alpha: top.required_float("alpha"),
        b0: top.float("b0", d.b0),
        gamma: top.float("gamma", d.gamma),
        gamma_prime: top.float("gamma_prime", d.gamma_prime),
        c_b: top.float("c_b", d.c_b),
        j: top.float("j", d.j),
        nx: top.uint("nx", d.nx),
        nv: top.uint("nv", d.nv),
        ntheta: top.uint("ntheta", d.ntheta),
        dt: top.float("dt", d.dt),
        t_end: top.float("t_end", d.t_end),
        picard_iters: top.uint("picard_iters", d.picard_iters),
        picard_tol: top.float("picard_tol", d.picard_tol),
        conservative_projection: top.boolean("conservative_projection", d.conservative_projection),
        ..d
    };
    if let Some(s) = top.string("profile") {
        match KernelProfile::parse(s) {
            Some(p) => params.profile = p,
            None => top.bad("profile", format!("unknown profile {s:?} (indicator, tapered)")),
        }
    }
    if let Some(s) = top.string("filling") {
        match FillingMode::parse(s) {
            Some(m) => params.filling = m,
            None => top.bad("filling", format!("unknown filling {s:?} (truncated, exact)")),
        }
    }
    let preset_t = top.section("preset");
    let diag_t = top.section("diagnostics");
    let out_t = top.section("output");
    if preset_t.is_none() {
        top.bad("preset", "missing required section");
    }
    top.finish();

    for v in params.violations() {
        if !(v.key == "alpha" && params.alpha.is_nan()) {
            errors.push(v);
        }
    }

    let empty = Table::new();
    let mut pr = Reader::new(preset_t.unwrap_or(&empty), "preset", &mut errors);
    let name = pr.string("name");
    if name.is_none() && preset_t.is_some() && !preset_t.unwrap().contains_key("name") {
        pr.bad("name", "missing required key");
    }
    let mut preset = Preset::by_name("wu").expect("wu preset exists");
    match name.map(|n| (n, Preset::by_name(n))) {
        Some((_, Some(base))) => {
            preset = match base {
                Preset::Wu { mu, temperature } => Preset::Wu {
                    mu: pr.float("mu", mu),
                    temperature: pr.float("temperature", temperature),
                },
                Preset::Bimodal {
                    peak,
                    separation,
                    width,
                } => Preset::Bimodal {
                    peak: pr.float("peak", peak),
                    separation: pr.float("separation", separation),
                    width: pr.float("width", width),
                },
                Preset::Wave {
                    mu,
                    temperature,
                    amplitude,
                } => Preset::Wave {
                    mu: pr.float("mu", mu),
                    temperature: pr.float("temperature", temperature),
                    amplitude: pr.float("amplitude", amplitude),
                },
            };
            match preset {
                Preset::Wu { temperature, .. } | Preset::Wave { temperature, .. } if !(temperature > 0.0) => {
                    pr.bad("temperature", "temperature must be > 0")
                }
                Preset::Bimodal { peak, width, .. } if !(peak > 0.0 && width > 0.0) => {
                    pr.bad("peak", "peak and width must be > 0")
                }
                Preset::Wave { amplitude, .. } if !(0.0..1.0).contains(&amplitude.abs()) => {
                    pr.bad("amplitude", "wave amplitude must be in (-1, 1)")
                }
                _ => {}
            }
        }
        Some((n, None)) => pr.bad("name", format!("unknown preset {n:?} (wu, bimodal, wave)")),
        None => {}
    }
    let jitter = pr.float("jitter", 0.0);
    if !(0.0..1.0).contains(&jitter) {
        pr.bad("jitter", "jitter must be in [0, 1)");
    }
    let seed = pr.uint("seed", 0) as u64;
    let mollify = pr.boolean("mollify", false);
    // A known preset name with keys of another preset shows up here.
    pr.finish();

    let mut dr = Reader::new(diag_t.unwrap_or(&empty), "diagnostics", &mut errors);
    let mut diagnostics = DiagnosticsConfig::with_defaults(params.j);
    diagnostics.bony = dr.boolean("bony", true);
    if let Some(l) = dr.floats("lambdas") {
        if l.iter().any(|&x| !(x >= 0.0)) {
            dr.bad("lambdas", "tail radii must be >= 0");
        }
        diagnostics.lambdas = l;
    } else {
        diagnostics.lambdas = default_lambdas(params.j);
    }
    let wc = dr.get("window_center").is_some();
    let ww = dr.get("window_half_width").is_some();
    if wc || ww {
        let c = dr.float("window_center", 0.0);
        let w = dr.float("window_half_width", 0.1);
        if !(w > 0.0) {
            dr.bad("window_half_width", "window half width must be > 0");
        }
        diagnostics.window = Some((c, w));
    }
    diagnostics.band = dr.float("band", diagnostics.band);
    if !(diagnostics.band > 0.0) {
        dr.bad("band", "band must be > 0");
    }
    dr.finish();

    let mut or = Reader::new(out_t.unwrap_or(&empty), "output", &mut errors);
    let output_dir = PathBuf::from(or.string("dir").unwrap_or("out"));
    let checkpoint_every = or.uint("checkpoint_every", 0);
    or.finish();

    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    Ok(RunConfig {
        params,
        preset,
        jitter,
        seed,
        mollify,
        diagnostics,
        output_dir,
        checkpoint_every,
    })
}
