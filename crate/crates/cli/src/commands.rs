use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use packlab_core::contacts::{coordination_histogram, find_rattlers};
use packlab_core::generators::interior_volume_fraction;
use packlab_core::inference::{
    describe_configurations, fit_and_check, ks_battery, min_contrast_fit, CheckSettings, Curve, CurveDescriptor,
    ParamGrid,
};
use packlab_core::io::{import_centers, read_ensemble, ImportOptions, RunRecord};
use packlab_core::order::planar_defect_count;
use packlab_core::resistance::build_axis_network;
use packlab_core::rng::derive_seed;
use packlab_core::stats::{
    k_function, pair_correlation, spherical_contact, EdgeCorrection, PointPattern, SampleDesign,
};
use packlab_core::tessellation::{cell_statistics, escape_fraction, gamma_fit, local_density, CellRecord, Summary};
use packlab_core::{
    bond_orientational, build_contact_network, classify_spheres, energy_distance_test, generate, interior_window,
    read_configuration, run_ensemble, solve_bulk_resistance, BondSet, Boundary, Configuration,
    ContactRule, Electrodes, Error, GeneratorSpec, Panel, RunConfig, Tessellation, Triangulation, Vec3,
};
use rayon::prelude::*;

use crate::{BondChoice, Command, Common, CurveChoice};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParam(_)
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::DimensionMismatch { .. }
            | Error::TooFewSpheres { .. }
            | Error::Window(_)
            | Error::Degenerate(_) => 2,
            Error::Saturated { .. }
            | Error::NonConvergence(_)
            | Error::EventQueueOverflow(_)
            | Error::EnsembleFailure { .. } => 3,
            Error::Refused(_) => 4,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: msg.into(),
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Settings after merging the config file with flags.
struct Settings {
    config: Option<RunConfig>,
    seed: u64,
    output_dir: PathBuf,
}

impl Settings {
    fn resolve(common: &Common) -> Outcome<Settings> {
        let config = common.config.as_deref().map(RunConfig::load).transpose()?;
        let seed = common.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
        let output_dir = common
            .output_dir
            .clone()
            .or(config.as_ref().map(|c| c.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Settings {
            config,
            seed,
            output_dir,
        })
    }

    fn panel(&self) -> Panel {
        self.config.as_ref().map(|c| c.panel.clone()).unwrap_or_default()
    }

    fn record(&self, command: &Command) -> RunRecord {
        let mut rec = RunRecord::new(name(command), self.seed);
        rec.settings.insert("arguments".into(), format!("{command:?}"));
        rec
    }
}

fn name(command: &Command) -> &'static str {
    match command {
        Command::Generate { .. } => "generate",
        Command::Stats { .. } => "stats",
        Command::Tessellate { .. } => "tessellate",
        Command::Contacts { .. } => "contacts",
        Command::Order { .. } => "order",
        Command::Resist { .. } => "resist",
        Command::Assess { .. } => "assess",
        Command::Fit { .. } => "fit",
        Command::Import { .. } => "import",
    }
}

/// Collects output files and writes them, plus `provenance.json`, at the end.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text));
    }

    fn finish(self, record: &RunRecord) -> Outcome<()> {
        std::fs::create_dir_all(&self.dir).map_err(Error::from)?;
        for (name, text) in &self.files {
            std::fs::write(self.dir.join(name), text).map_err(Error::from)?;
        }
        let mut json = serde_json::to_string_pretty(record).expect("run record serializes");
        json.push('\n');
        std::fs::write(self.dir.join("provenance.json"), json).map_err(Error::from)?;
        Ok(())
    }
}

fn load(path: &Path, rec: &mut RunRecord) -> Outcome<Configuration> {
    let loaded = read_configuration(path)?;
    for w in &loaded.warnings {
        eprintln!("packlab: {}: {w}", path.display());
    }
    rec.inputs.push(path.display().to_string());
    Ok(loaded.configuration)
}

fn parse_spec(text: &str) -> Outcome<GeneratorSpec> {
    let wrapped = format!("generator = {text}\n");
    #[derive(serde::Deserialize)]
    struct Holder {
        generator: GeneratorSpec,
    }
    let h: Holder = toml::from_str(&wrapped).map_err(|e| invalid(format!("bad generator spec: {e}")))?;
    h.generator.validate()?;
    Ok(h.generator)
}

fn spec_from(settings: &Settings, flag: &Option<String>) -> Outcome<GeneratorSpec> {
    match (flag, &settings.config) {
        (Some(text), _) => parse_spec(text),
        (None, Some(c)) => Ok(c.generator.clone()),
        (None, None) => Err(invalid("no generator: pass --generator or --config")),
    }
}

fn radii(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

fn parse_grid(text: &str) -> Outcome<Vec<f64>> {
    let numbers = |s: &str| -> Outcome<Vec<f64>> {
        s.split([',', ':'])
            .map(|v| v.trim().parse::<f64>().map_err(|_| invalid(format!("bad number {v:?} in {text:?}"))))
            .collect()
    };
    let v = numbers(text)?;
    if text.contains(':') {
        if v.len() != 3 || !(v[2] > 0.0) || v[1] < v[0] {
            return Err(invalid(format!("range {text:?} is not lo:hi:step")));
        }
        return Ok(radii(v[0], v[1], v[2]));
    }
    Ok(v)
}

fn parse_boundary(text: &str) -> Outcome<Boundary> {
    let f: Vec<&str> = text.split_whitespace().collect();
    let mut v = Vec3::zeros();
    let values = f.get(1..).unwrap_or_default();
    if values.len() > 3 {
        return Err(invalid("at most three extents"));
    }
    for (i, s) in values.iter().enumerate() {
        v[i] = s.parse().map_err(|_| invalid(format!("bad extent {s:?}")))?;
    }
    match f.first().copied() {
        Some("none") | None if values.is_empty() => Ok(Boundary::None),
        Some("periodic") => Ok(Boundary::Periodic { extents: v }),
        Some("hard_box") => Ok(Boundary::HardBox { extents: v }),
        Some("open_with_base") => Ok(Boundary::OpenWithBase { lateral: v }),
        _ => Err(invalid(format!("unknown boundary {text:?}"))),
    }
}

/// Sets `path` (dotted) in the JSON form of `spec` to `value`; integer
/// fields need integral values.
fn set_param(spec: &serde_json::Value, path: &str, value: f64) -> packlab_core::Result<GeneratorSpec> {
    let mut v = spec.clone();
    let mut slot = &mut v;
    for key in path.split('.') {
        slot = slot
            .get_mut(key)
            .ok_or_else(|| Error::InvalidParam(format!("generator has no field {path}")))?;
    }
    *slot = if slot.is_u64() {
        if value.fract() != 0.0 || value < 0.0 {
            return Err(Error::InvalidParam(format!("{path} needs a whole number, got {value}")));
        }
        serde_json::json!(value as u64)
    } else {
        serde_json::json!(value)
    };
    serde_json::from_value(v).map_err(|e| Error::InvalidParam(e.to_string()))
}

fn table<T: std::fmt::Display>(header: &str, rows: impl IntoIterator<Item = (String, T)>) -> String {
    let mut out = format!("{header}\n");
    for (k, v) in rows {
        writeln!(out, "{k}\t{v}").unwrap();
    }
    out
}

pub fn run(command: Command) -> Outcome<()> {
    match &command {
        Command::Generate {
            common,
            generator,
            ensemble_size,
        } => {
            let s = Settings::resolve(common)?;
            let spec = spec_from(&s, generator)?;
            let count = ensemble_size.or(s.config.as_ref().map(|c| c.ensemble_size)).unwrap_or(1);
            if count == 0 {
                return Err(invalid("ensemble size must be at least 1"));
            }
            let seeds: Vec<u64> = (0..count as u64).map(|i| derive_seed(s.seed, i)).collect();
            let configs = seeds
                .par_iter()
                .map(|&seed| generate(&spec, seed))
                .collect::<packlab_core::Result<Vec<_>>>()?;
            let mut out = Outputs::new(&s.output_dir);
            let mut summary = String::from("# file\tseed\tn\tinterior_volume_fraction\n");
            for (i, (c, seed)) in configs.iter().zip(&seeds).enumerate() {
                let file = format!("packing_{i:04}.tsv");
                let phi = interior_volume_fraction(c).unwrap_or(f64::NAN);
                writeln!(summary, "{file}\t{seed}\t{}\t{phi:.9}", c.len()).unwrap();
                out.add(&file, packlab_core::io::format_configuration(c));
            }
            print!("{summary}");
            out.add("summary.tsv", summary);
            let mut rec = s.record(&command);
            rec.spec = Some(spec);
            rec.seeds = seeds;
            out.finish(&rec)
        }
        Command::Stats {
            packing,
            common,
            shell_width,
            r_max,
            samples,
            descriptors,
        } => {
            let s = Settings::resolve(common)?;
            let mut rec = s.record(&command);
            let c = load(packing, &mut rec)?;
            let window = interior_window(&c)?;
            let pattern = PointPattern::from_config(&c, &window)?;
            let r_max = r_max.unwrap_or_else(|| {
                let below = ((window.max_lag() / shell_width).ceil() - 1.0) * shell_width;
                below.min(2.5)
            });
            let pc = pair_correlation(&pattern, *shell_width, r_max, EdgeCorrection::MinusSampling)?;
            let grid = radii(*shell_width, r_max, *shell_width);
            let k = k_function(&pattern, &grid, EdgeCorrection::Translation)?;
            let design = SampleDesign::UniformRandom {
                count: *samples,
                seed: s.seed,
            };
            let contact = spherical_contact(&c, &window, &grid, &design)?;
            let mut out = Outputs::new(&s.output_dir);
            let mut summary = table(
                "# quantity\tvalue",
                [
                    ("spheres".to_string(), c.len().to_string()),
                    ("interior_spheres".to_string(), pattern.len().to_string()),
                    ("interior_volume_fraction".to_string(), format!("{:.9}", interior_volume_fraction(&c)?)),
                ],
            );
            if *descriptors {
                let panel = s.panel();
                let values = panel.evaluate(&c, s.seed)?;
                for (n, v) in panel.names().iter().zip(values) {
                    writeln!(summary, "{n}\t{v:.9}").unwrap();
                }
                rec.panel = Some(panel);
            }
            print!("{summary}");
            out.add("summary.tsv", summary);
            out.add("g.tsv", pc.g.to_tsv());
            out.add("rdf.tsv", pc.rdf.to_tsv());
            out.add("K.tsv", k.to_tsv());
            out.add("contact.tsv", contact.to_tsv());
            out.finish(&rec)
        }
        Command::Tessellate { packing, common } => {
            let s = Settings::resolve(common)?;
            let mut rec = s.record(&command);
            let c = load(packing, &mut rec)?;
            let tri = Triangulation::build(&c)?;
            let tess = Tessellation::from_triangulation(&tri);
            let cells = cell_statistics(&tess)?;
            let dens = local_density(&c, &tess)?;
            let window = interior_window(&c)?;
            let inner: Vec<&CellRecord> = cells
                .records
                .iter()
                .filter(|r| window.contains(&c.spheres[r.sphere].center))
                .collect();
            let volumes: Vec<f64> = inner.iter().map(|r| r.volume).collect();
            let faces: Vec<f64> = inner.iter().map(|r| r.face_count as f64).collect();
            let (vol, gamma) = (Summary::of(&volumes), gamma_fit(&volumes));
            let mut out = Outputs::new(&s.output_dir);
            let summary = table(
                "# quantity\tvalue",
                [
                    ("simplices".to_string(), tri.simplex_count().to_string()),
                    ("bounded_cells".to_string(), cells.records.len().to_string()),
                    ("interior_cells".to_string(), inner.len().to_string()),
                    ("mean_volume".to_string(), format!("{:.9}", vol.mean)),
                    ("sd_volume".to_string(), format!("{:.9}", vol.sd)),
                    ("mean_faces".to_string(), format!("{:.9}", Summary::of(&faces).mean)),
                    ("gamma_shape".to_string(), format!("{:.9}", gamma.shape)),
                    ("gamma_scale".to_string(), format!("{:.9}", gamma.scale)),
                ],
            );
            print!("{summary}");
            out.add("summary.tsv", summary);
            out.add("cells.tsv", cells.to_tsv());
            out.add(
                "local_density.tsv",
                table("# sphere\tlocal_density", dens.values.iter().map(|&(i, v)| (i.to_string(), format!("{v:.12e}")))),
            );
            if c.dim == 3 {
                let esc = escape_fraction(&c, &tri)?;
                out.add(
                    "escape.tsv",
                    table("# sphere\tescape_radius", esc.radii.iter().map(|&(i, v)| (i.to_string(), format!("{v:.12e}")))),
                );
            }
            out.finish(&rec)
        }
        Command::Contacts { packing, common, eps } => {
            let s = Settings::resolve(common)?;
            let mut rec = s.record(&command);
            let c = load(packing, &mut rec)?;
            let tri = Triangulation::build(&c)?;
            let net = build_contact_network(&c, &tri, ContactRule::HardTolerance { eps: *eps })?;
            let part = classify_spheres(&c, &tri, &net)?;
            let hist = coordination_histogram(&net, &part);
            let rattlers = find_rattlers(&c, &net, &tri);
            let mut out = Outputs::new(&s.output_dir);
            let mut coord = String::from("# set\tcontacts\tspheres\n");
            for (set, h) in [("interior", &hist.interior), ("boundary", &hist.boundary)] {
                for (k, n) in h {
                    writeln!(coord, "{set}\t{k}\t{n}").unwrap();
                }
            }
            let summary = table(
                "# quantity\tvalue",
                [
                    ("contacts".to_string(), net.edges.len().to_string()),
                    ("wall_contacts".to_string(), net.wall_contacts.len().to_string()),
                    ("interior_spheres".to_string(), part.interior.len().to_string()),
                    ("interior_mean_coordination".to_string(), format!("{:.9}", hist.interior_mean)),
                    ("boundary_mean_coordination".to_string(), format!("{:.9}", hist.boundary_mean)),
                    ("rattlers".to_string(), rattlers.len().to_string()),
                ],
            );
            print!("{summary}");
            out.add("summary.tsv", summary);
            out.add("contacts.tsv", net.to_edge_list());
            out.add("coordination.tsv", coord);
            out.add(
                "rattlers.tsv",
                table("# sphere", rattlers.iter().map(|i| (i.to_string(), ""))),
            );
            out.finish(&rec)
        }
        Command::Order {
            packing,
            common,
            l,
            bonds,
            eps,
        } => {
            let s = Settings::resolve(common)?;
            let mut rec = s.record(&command);
            let c = load(packing, &mut rec)?;
            let tri = Triangulation::build(&c)?;
            let mut out = Outputs::new(&s.output_dir);
            let summary = if c.dim == 2 {
                let d = planar_defect_count(&tri)?;
                out.add(
                    "degrees.tsv",
                    table("# degree\tvertices", d.by_degree.iter().map(|(k, n)| (k.to_string(), n))),
                );
                table(
                    "# quantity\tvalue",
                    [
                        ("interior_vertices".to_string(), d.interior.to_string()),
                        ("defects".to_string(), d.defects.to_string()),
                        ("defect_fraction".to_string(), format!("{:.9}", d.fraction)),
                    ],
                )
            } else {
                let window = interior_window(&c)?;
                let interior: Vec<usize> = (0..c.len())
                    .filter(|&i| window.contains(&c.spheres[i].center))
                    .collect();
                let set = match bonds {
                    BondChoice::Contacts => {
                        let net = build_contact_network(&c, &tri, ContactRule::HardTolerance { eps: *eps })?;
                        BondSet::from_contacts(&c, &net, &tri, &interior)
                    }
                    BondChoice::Neighbors => BondSet::from_neighbors(&c, &tri, &interior),
                };
                let report = bond_orientational(&set, *l)?;
                out.add("per_sphere.tsv", report.to_tsv());
                table(
                    "# quantity\tvalue",
                    [
                        ("scored_spheres".to_string(), report.per_sphere.len().to_string()),
                        (format!("mean_local_q{l}"), format!("{:.9}", report.average_local)),
                        (format!("global_Q{l}"), format!("{:.9}", report.global_sum)),
                    ],
                )
            };
            print!("{summary}");
            out.add("summary.tsv", summary);
            out.finish(&rec)
        }
        Command::Resist {
            packing,
            common,
            axis,
            electrode_fraction,
            eps,
        } => {
            let s = Settings::resolve(common)?;
            let mut rec = s.record(&command);
            let c = load(packing, &mut rec)?;
            if *axis >= c.dim {
                return Err(invalid(format!("axis {axis} out of range for dimension {}", c.dim)));
            }
            let tri = Triangulation::build(&c)?;
            let net = build_contact_network(&c, &tri, ContactRule::HardTolerance { eps: *eps })?;
            let electrodes = Electrodes::axis_quantile(&c, *axis, *electrode_fraction)?;
            let rnet = build_axis_network(&c, &net, *axis, electrodes)?;
            let bulk = solve_bulk_resistance(&rnet)?;
            let mut out = Outputs::new(&s.output_dir);
            let summary = table(
                "# quantity\tvalue",
                [
                    ("resistance".to_string(), format!("{:.12e}", bulk.resistance)),
                    ("residual".to_string(), format!("{:.3e}", bulk.residual)),
                    ("iterations".to_string(), bulk.iterations.to_string()),
                ],
            );
            print!("{summary}");
            out.add("summary.tsv", summary);
            out.add("currents.tsv", bulk.currents_tsv());
            out.add("potential.tsv", bulk.potential_tsv());
            out.finish(&rec)
        }
        Command::Assess {
            common,
            ensemble_size,
            data,
            data_table,
            data_config,
            permutations,
            alpha,
        } => {
            let s = Settings::resolve(common)?;
            let Some(cfg) = &s.config else {
                return Err(invalid("assess needs the model in --config"));
            };
            let mut rec = s.record(&command);
            let count = ensemble_size.unwrap_or(cfg.ensemble_size);
            let panel = cfg.panel.clone();
            let sources = [!data.is_empty(), data_table.is_some(), data_config.is_some()];
            if sources.iter().filter(|&&b| b).count() != 1 {
                return Err(invalid("give exactly one of --data, --data-table, --data-config"));
            }
            let model = run_ensemble(&cfg.generator, count, s.seed, &panel)?;
            let observed = if let Some(p) = data_table {
                rec.inputs.push(p.display().to_string());
                read_ensemble(p)?.select(&panel.names())?
            } else if let Some(p) = data_config {
                rec.inputs.push(p.display().to_string());
                let other = RunConfig::load(p)?;
                run_ensemble(&other.generator, other.ensemble_size, other.seed, &panel)?
            } else {
                let configs = data.iter().map(|p| load(p, &mut rec)).collect::<Outcome<Vec<_>>>()?;
                describe_configurations("data", &configs, derive_seed(s.seed, u64::MAX), &panel)?
            };
            let energy = energy_distance_test(&model, &observed, *permutations, s.seed)?;
            let ks = ks_battery(&model, &observed, *alpha)?;
            let mut report = String::from("# test\tdescriptor\tstatistic\tp_value\tadjusted_p\trejected\n");
            writeln!(
                report,
                "energy\tall\t{:.9e}\t{:.6}\t{:.6}\t{}",
                energy.statistic,
                energy.p_value,
                energy.p_value,
                energy.rejects(*alpha)
            )
            .unwrap();
            for d in &ks.decisions {
                writeln!(
                    report,
                    "ks\t{}\t{:.9}\t{:.6}\t{:.6}\t{}",
                    d.name, d.statistic, d.p_value, d.adjusted_p, d.rejected
                )
                .unwrap();
            }
            let mut diag = String::from("# descriptor\tlocation\tscale\tmean_shift\tenergy\tdropped\n");
            for d in &energy.diagnostics {
                writeln!(
                    diag,
                    "{}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{}",
                    d.name, d.location, d.scale, d.mean_shift, d.energy, d.dropped
                )
                .unwrap();
            }
            print!("{report}");
            let mut out = Outputs::new(&s.output_dir);
            out.add("tests.tsv", report);
            out.add("diagnostics.tsv", diag);
            out.add("model.tsv", model.to_tsv());
            out.add("data.tsv", observed.to_tsv());
            rec.spec = Some(cfg.generator.clone());
            rec.seeds = model.seeds.clone();
            rec.panel = Some(panel);
            out.finish(&rec)
        }
        Command::Fit {
            common,
            generator,
            params,
            curve,
            r_grid,
            shell_width,
            samples,
            replicates,
            data,
            check,
            check_realizations,
            permutations,
        } => {
            let s = Settings::resolve(common)?;
            let mut rec = s.record(&command);
            let template = spec_from(&s, generator)?;
            let mut axes = Vec::new();
            for p in params {
                let (name, values) = p
                    .split_once('=')
                    .ok_or_else(|| invalid(format!("--param {p:?} is not name=values")))?;
                axes.push((name.trim(), parse_grid(values)?));
            }
            let grid = ParamGrid::product(&axes);
            let descriptor = CurveDescriptor {
                curve: match curve {
                    CurveChoice::G => Curve::PairCorrelation {
                        shell_width: *shell_width,
                    },
                    CurveChoice::K => Curve::KFunction,
                    CurveChoice::S => Curve::SphericalContact { samples: *samples },
                },
                r_grid: parse_grid(r_grid)?,
            };
            let json = serde_json::to_value(&template).expect("spec serializes");
            for (name, values) in &axes {
                for &v in values {
                    set_param(&json, name, v)?.validate()?;
                }
            }
            let names: Vec<String> = axes.iter().map(|(n, _)| n.to_string()).collect();
            let family = |p: &[f64]| {
                let mut spec = template.clone();
                for (n, &v) in names.iter().zip(p) {
                    spec = set_param(&serde_json::to_value(&spec).expect("spec serializes"), n, v)?;
                }
                Ok(spec)
            };
            let configs = data.iter().map(|p| load(p, &mut rec)).collect::<Outcome<Vec<_>>>()?;
            let mut out = Outputs::new(&s.output_dir);
            let (fit, checked) = if *check {
                let settings = CheckSettings {
                    realizations: *check_realizations,
                    permutations: *permutations,
                };
                let panel = s.panel();
                let c = fit_and_check(family, &grid, &configs, &descriptor, *replicates, &panel, settings, s.seed)?;
                rec.panel = Some(panel);
                (c.fit.clone(), Some(c))
            } else {
                (min_contrast_fit(family, &grid, &configs, &descriptor, *replicates, s.seed)?, None)
            };
            let best = fit.best().to_vec();
            let mut summary = String::from("# quantity\tvalue\n");
            for (n, v) in names.iter().zip(&best) {
                writeln!(summary, "best.{n}\t{v}").unwrap();
            }
            writeln!(summary, "contrast\t{:.9e}", fit.contrasts[fit.argmin]).unwrap();
            writeln!(summary, "non_identifiable\t{}", fit.non_identifiable).unwrap();
            if let Some(c) = &checked {
                writeln!(summary, "held_out_energy\t{:.9e}", c.held_out.statistic).unwrap();
                writeln!(summary, "held_out_p\t{:.6}", c.held_out.p_value).unwrap();
            }
            if fit.non_identifiable {
                eprintln!("packlab: contrast profile is flat; the parameter is not identifiable from this curve");
            }
            let mut curves = String::from("# r\tdata\tbest_model\n");
            for (k, r) in fit.r_grid.iter().enumerate() {
                writeln!(curves, "{r}\t{:.9e}\t{:.9e}", fit.data_curve[k], fit.model_curves[fit.argmin][k]).unwrap();
            }
            print!("{summary}");
            out.add("summary.tsv", summary);
            out.add("profile.tsv", fit.profile_tsv());
            out.add("curves.tsv", curves);
            rec.spec = Some(family(&best)?);
            out.finish(&rec)
        }
        Command::Import {
            centers,
            common,
            dim,
            radius,
            scale,
            boundary,
        } => {
            let s = Settings::resolve(common)?;
            let mut rec = s.record(&command);
            let text = std::fs::read_to_string(centers).map_err(Error::from)?;
            rec.inputs.push(centers.display().to_string());
            let opts = ImportOptions {
                dim: *dim,
                radius: *radius,
                scale: *scale,
                boundary: parse_boundary(boundary)?,
            };
            let loaded = import_centers(&text, &opts)?;
            for w in &loaded.warnings {
                eprintln!("packlab: {}: {w}", centers.display());
            }
            let mut out = Outputs::new(&s.output_dir);
            out.add("packing.tsv", packlab_core::io::format_configuration(&loaded.configuration));
            let summary = table(
                "# quantity\tvalue",
                [
                    ("spheres".to_string(), loaded.configuration.len().to_string()),
                    (
                        "min_gap".to_string(),
                        loaded.min_gap.map_or("none".to_string(), |g| format!("{g:.9e}")),
                    ),
                ],
            );
            print!("{summary}");
            out.add("summary.tsv", summary);
            out.finish(&rec)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse_as_ranges_or_lists() {
        assert_eq!(parse_grid("1,2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
        let g = parse_grid("1.0:1.2:0.1").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[2] - 1.2).abs() < 1e-12);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn boundaries_parse() {
        assert_eq!(parse_boundary("none").unwrap(), Boundary::None);
        assert_eq!(
            parse_boundary("periodic 2 3 4").unwrap(),
            Boundary::Periodic {
                extents: Vec3::new(2.0, 3.0, 4.0)
            }
        );
        assert!(parse_boundary("torus 2").is_err());
        assert!(parse_boundary("none 3").is_err());
    }

    #[test]
    fn params_set_nested_and_integer_fields() {
        let spec = parse_spec(
            r#"{algorithm = "shake_redeposit", base = {algorithm = "visscher_bolsterli", n = 40}}"#,
        )
        .unwrap();
        let json = serde_json::to_value(&spec).unwrap();
        let GeneratorSpec::ShakeRedeposit(s) = set_param(&json, "base.k_drops", 3.0).unwrap() else {
            panic!()
        };
        assert!(matches!(*s.base, GeneratorSpec::VisscherBolsterli(ref p) if p.k_drops == 3));
        assert!(set_param(&json, "base.k_drops", 2.5).is_err());
        assert!(set_param(&json, "base.colour", 1.0).is_err());
        let GeneratorSpec::ShakeRedeposit(s) = set_param(&json, "shake.sigma_up", 0.07).unwrap() else {
            panic!()
        };
        assert_eq!(s.shake.sigma_up, 0.07);
    }
}
