//! Text formats: packing files, imported center lists, curve tables, run
//! configurations and provenance sidecars.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::geometry::{min_gap, Boundary, Configuration, Provenance, Sphere, Vec3, TOL_OVERLAP};
use crate::inference::{ModelEnsemble, Panel};
use crate::stats::RadialFunction;

pub const FORMAT_LINE: &str = "# packlab packing 1";
pub const SOFTWARE: &str = concat!("packlab ", env!("CARGO_PKG_VERSION"));

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn boundary_line(b: &Boundary, dim: usize) -> String {
    let list = |v: &Vec3, k: usize| (0..k).map(|i| format!("\t{:.16e}", v[i])).collect::<String>();
    match b {
        Boundary::Periodic { extents } => format!("periodic{}", list(extents, dim)),
        Boundary::HardBox { extents } => format!("hard_box{}", list(extents, dim)),
        Boundary::OpenWithBase { lateral } => format!("open_with_base{}", list(lateral, dim - 1)),
        Boundary::None => "none".into(),
    }
}

fn parse_boundary(fields: &[&str], dim: usize, line: usize) -> Result<Boundary> {
    let kind = fields.first().ok_or_else(|| parse_err(line, "empty boundary"))?;
    let want = match *kind {
        "periodic" | "hard_box" => dim,
        "open_with_base" => dim - 1,
        "none" => 0,
        other => return Err(parse_err(line, format!("unknown boundary {other:?}"))),
    };
    if fields.len() - 1 != want {
        return Err(parse_err(line, format!("boundary {kind} needs {want} extents")));
    }
    let mut v = Vec3::zeros();
    for (i, f) in fields[1..].iter().enumerate() {
        v[i] = parse_number(f, line)?;
    }
    Ok(match *kind {
        "periodic" => Boundary::Periodic { extents: v },
        "hard_box" => Boundary::HardBox { extents: v },
        "open_with_base" => Boundary::OpenWithBase { lateral: v },
        _ => Boundary::None,
    })
}

fn parse_number(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| parse_err(line, format!("bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

/// Packing file text. Coordinates and radii carry 17 significant digits,
/// so reading the text back reproduces them bit for bit.
pub fn format_configuration(config: &Configuration) -> String {
    let dim = config.dim;
    let mut out = String::new();
    writeln!(out, "{FORMAT_LINE}").unwrap();
    writeln!(out, "# dim\t{dim}").unwrap();
    writeln!(out, "# boundary\t{}", boundary_line(&config.boundary, dim)).unwrap();
    writeln!(out, "# units\tdiameter").unwrap();
    writeln!(
        out,
        "# provenance\t{}",
        serde_json::to_string(&config.provenance).expect("provenance serializes")
    )
    .unwrap();
    let axes = ["x", "y", "z"];
    writeln!(out, "# index\t{}\tradius", axes[..dim].join("\t")).unwrap();
    for (i, s) in config.spheres.iter().enumerate() {
        write!(out, "{i}").unwrap();
        for k in 0..dim {
            write!(out, "\t{:.16e}", s.center[k]).unwrap();
        }
        writeln!(out, "\t{:.16e}", s.radius).unwrap();
    }
    out
}

/// A configuration read from text, with the results of the overlap check.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub configuration: Configuration,
    /// Smallest surface gap; `None` for fewer than two spheres.
    pub min_gap: Option<f64>,
    pub warnings: Vec<String>,
}

fn overlap_check(configuration: Configuration) -> Result<Loaded> {
    let mut warnings = Vec::new();
    let gap = if configuration.len() >= 2 {
        Some(min_gap(&configuration)?)
    } else {
        None
    };
    if let Some(g) = gap {
        if g < -TOL_OVERLAP {
            warnings.push(format!("spheres overlap: smallest gap {g:.6e} diameters"));
        }
    }
    Ok(Loaded {
        configuration,
        min_gap: gap,
        warnings,
    })
}

pub fn parse_configuration(text: &str) -> Result<Loaded> {
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, l)) if l.trim_end() == FORMAT_LINE => {}
        _ => return Err(parse_err(1, format!("first line must be {FORMAT_LINE:?}"))),
    }
    let mut dim = None;
    let mut boundary = None;
    let mut provenance = Provenance::default();
    let mut spheres = Vec::new();
    for (k, line) in lines {
        let ln = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let fields: Vec<&str> = rest.trim_start().split('\t').collect();
            match fields[0] {
                "dim" => {
                    let d: usize = fields
                        .get(1)
                        .and_then(|s| s.trim().parse().ok())
                        .ok_or_else(|| parse_err(ln, "bad dim"))?;
                    if d != 2 && d != 3 {
                        return Err(parse_err(ln, format!("dimension {d} is not 2 or 3")));
                    }
                    dim = Some(d);
                }
                "boundary" => {
                    let d = dim.ok_or_else(|| parse_err(ln, "boundary before dim"))?;
                    boundary = Some(parse_boundary(&fields[1..], d, ln)?);
                }
                "units" => {
                    if fields.get(1).map(|s| s.trim()) != Some("diameter") {
                        return Err(parse_err(ln, "units must be diameter"));
                    }
                }
                "provenance" => {
                    provenance = serde_json::from_str(fields.get(1).unwrap_or(&""))
                        .map_err(|e| parse_err(ln, format!("bad provenance: {e}")))?;
                }
                _ => {}
            }
            continue;
        }
        let d = dim.ok_or_else(|| parse_err(ln, "sphere record before the dim header"))?;
        if boundary.is_none() {
            return Err(parse_err(ln, "sphere record before the boundary header"));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != d + 2 {
            if fields.len() >= 3 {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: fields.len() - 2,
                });
            }
            return Err(parse_err(ln, "sphere record needs index, coordinates and radius"));
        }
        let idx: usize = fields[0].parse().map_err(|_| parse_err(ln, "bad index"))?;
        if idx != spheres.len() {
            return Err(parse_err(ln, format!("index {idx} out of sequence")));
        }
        let mut c = Vec3::zeros();
        for i in 0..d {
            c[i] = parse_number(fields[1 + i], ln)?;
        }
        spheres.push(Sphere::new(c, parse_number(fields[d + 1], ln)?));
    }
    let dim = dim.ok_or_else(|| parse_err(text.lines().count(), "missing dim header"))?;
    let boundary = boundary.ok_or_else(|| parse_err(text.lines().count(), "missing boundary header"))?;
    overlap_check(Configuration::new(dim, spheres, boundary, provenance)?)
}

pub fn write_configuration(config: &Configuration, path: &Path) -> Result<()> {
    std::fs::write(path, format_configuration(config))?;
    Ok(())
}

/// Reads and validates a packing file; overlaps are reported in
/// [`Loaded::warnings`] rather than rejected.
pub fn read_configuration(path: &Path) -> Result<Loaded> {
    parse_configuration(&std::fs::read_to_string(path)?)
}

/// How to interpret a bare list of centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportOptions {
    pub dim: usize,
    /// Radius for rows without a radius column, in input units.
    pub radius: f64,
    /// Factor converting input units to diameters.
    pub scale: f64,
    pub boundary: Boundary,
}

impl Default for ImportOptions {
    fn default() -> Self {
        ImportOptions {
            dim: 3,
            radius: 0.5,
            scale: 1.0,
            boundary: Boundary::None,
        }
    }
}

/// Whitespace-separated rows `x y [z] [r]`; blank lines and lines starting
/// with `#` or `%` are skipped.
pub fn import_centers(text: &str, opts: &ImportOptions) -> Result<Loaded> {
    let d = opts.dim;
    if d != 2 && d != 3 {
        return Err(Error::param(format!("dimension must be 2 or 3, got {d}")));
    }
    if !(opts.scale > 0.0 && opts.radius > 0.0) {
        return Err(Error::param("scale and radius must be positive"));
    }
    let mut spheres = Vec::new();
    let mut width = None;
    for (k, line) in text.lines().enumerate() {
        let ln = k + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != d && fields.len() != d + 1 {
            return Err(parse_err(ln, format!("expected {d} or {} columns, found {}", d + 1, fields.len())));
        }
        if *width.get_or_insert(fields.len()) != fields.len() {
            return Err(parse_err(ln, "column count changes between rows"));
        }
        let mut c = Vec3::zeros();
        for i in 0..d {
            c[i] = parse_number(fields[i], ln)? * opts.scale;
        }
        let r = if fields.len() > d { parse_number(fields[d], ln)? } else { opts.radius };
        spheres.push(Sphere::new(c, r * opts.scale));
    }
    let prov = Provenance::new("import", 0)
        .with("scale", opts.scale)
        .with("rows", spheres.len());
    overlap_check(Configuration::new(d, spheres, opts.boundary, prov)?)
}

pub fn write_curve(rf: &RadialFunction, path: &Path) -> Result<()> {
    std::fs::write(path, rf.to_tsv())?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<RadialFunction> {
    RadialFunction::from_tsv(&std::fs::read_to_string(path)?)
}

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Settings of a run, read from TOML. Only `generator` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub generator: GeneratorSpec,
    /// Realizations; default 1.
    #[serde(default = "one")]
    pub ensemble_size: usize,
    /// Master seed; default 0.
    #[serde(default)]
    pub seed: u64,
    /// Descriptors for ensemble runs; default the standard panel.
    #[serde(default)]
    pub panel: Panel,
    /// Default `out`.
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(generator: GeneratorSpec) -> Self {
        RunConfig {
            generator,
            ensemble_size: 1,
            seed: 0,
            panel: Panel::default(),
            output_dir: default_output(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.panel.validate()?;
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything needed to repeat a run: written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub software: String,
    pub command: String,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<Panel>,
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
    #[serde(default)]
    pub inputs: Vec<String>,
}

impl RunRecord {
    pub fn new(command: &str, master_seed: u64) -> Self {
        RunRecord {
            software: SOFTWARE.into(),
            command: command.into(),
            master_seed,
            seeds: Vec::new(),
            spec: None,
            panel: None,
            settings: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.settings.insert(key.into(), value.to_string());
        self
    }
}

/// `<output>.provenance.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".provenance.json");
    PathBuf::from(name)
}

pub fn write_sidecar(output: &Path, record: &RunRecord) -> Result<()> {
    let mut text = serde_json::to_string_pretty(record).expect("run record serializes");
    text.push('\n');
    std::fs::write(sidecar_path(output), text)?;
    Ok(())
}

pub fn read_sidecar(output: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(sidecar_path(output))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad provenance record: {e}")))
}

/// Descriptor table plus a sidecar with the model spec and seeds.
pub fn write_ensemble(e: &ModelEnsemble, panel: Option<&Panel>, path: &Path) -> Result<()> {
    std::fs::write(path, e.to_tsv())?;
    let mut rec = RunRecord::new("ensemble", e.master_seed);
    rec.seeds = e.seeds.clone();
    rec.spec = e.spec.clone();
    rec.panel = panel.cloned();
    rec.settings.insert("model".into(), e.model.clone());
    write_sidecar(path, &rec)
}

/// Reads a descriptor table; the model spec comes from the sidecar when one
/// exists.
pub fn read_ensemble(path: &Path) -> Result<ModelEnsemble> {
    let mut e = ModelEnsemble::from_tsv(&std::fs::read_to_string(path)?)?;
    if sidecar_path(path).exists() {
        e.spec = read_sidecar(path)?.spec;
    }
    Ok(e)
}
