//! Run configuration: a flat INI file, command-line overrides on top, and
//! the fully resolved result echoed back as a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::Ini;
use roamscope::integrate::{Direction, IntegratorSettings};
use roamscope::ld::{DescriptorSpec, Integrand};
use roamscope::model::MODEL_KEYS;
use roamscope::orbits::{outer_radius, Branch, ShootingOptions, DEFAULT_SEGMENTS};
use roamscope::survey::{ClassRules, MinimaOptions, RidgeOptions, SectionSpec, RADIAL_SECTION_R};
use roamscope::integrate::SectionKind;
use roamscope::ModelParams;

use crate::error::{CliError, CliResult};

/// Recognised keys per section. `[result]` is written into manifests and
/// skipped on reading.
const SCHEMA: [(&str, &[&str]); 9] = [
    ("model", &MODEL_KEYS),
    ("integrator", &["rel_tol", "abs_tol", "max_step", "max_steps", "project"]),
    ("descriptor", &["integrand", "direction", "tau"]),
    ("section", &["kind", "level", "axis1_lo", "axis1_hi", "axis2_lo", "axis2_hi", "resolution"]),
    (
        "extract",
        &[
            "inner_field",
            "outer_field",
            "cutoff_fraction",
            "merge_fraction",
            "ridge_jump",
            "ridge_min_chain",
            "prominence_fraction",
            "minima_jump",
            "minima_min_chain",
        ],
    ),
    ("classify", &["t_max", "section_r", "dissociation_r", "roaming_crossings"]),
    ("orbits", &["branch", "segments", "tolerance", "max_iterations", "rel_tol"]),
    ("potential", &["grid", "r_lo", "r_hi"]),
    ("run", &["command", "out", "threads"]),
];

pub const DEFAULT_RESOLUTION: usize = 100;

/// Key-value pairs read from a configuration file, checked against the
/// schema but not yet interpreted.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), String>,
    /// Directory that relative paths in the file are resolved against.
    base: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("key `{key}` outside any section")));
                }
                continue;
            };
            if section == "result" {
                continue;
            }
            let keys = SCHEMA
                .iter()
                .find(|(name, _)| *name == section)
                .map(|(_, keys)| *keys)
                .ok_or_else(|| CliError::Config(format!("unknown section [{section}]")))?;
            for (key, value) in props.iter() {
                if !keys.contains(&key) {
                    return Err(CliError::Config(format!("unknown key `{key}` in [{section}]")));
                }
                entries.insert((section.to_string(), key.to_string()), value.trim().to_string());
            }
        }
        Ok(Self { entries, base: PathBuf::new() })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut raw = Self::parse(&text)?;
        raw.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(raw)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries.get(&(section.to_string(), key.to_string())).map(String::as_str)
    }

    fn number(&self, section: &str, key: &str) -> CliResult<Option<f64>> {
        self.get(section, key)
            .map(|v| v.parse::<f64>().map_err(|_| bad_value(section, key, v, "a number")))
            .transpose()
    }

    fn count(&self, section: &str, key: &str) -> CliResult<Option<usize>> {
        self.get(section, key)
            .map(|v| v.parse::<usize>().map_err(|_| bad_value(section, key, v, "a non-negative integer")))
            .transpose()
    }

    fn flag(&self, section: &str, key: &str) -> CliResult<Option<bool>> {
        self.get(section, key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(bad_value(section, key, v, "true or false")),
            })
            .transpose()
    }

    fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.get(section, key).map(|v| self.base.join(v))
    }
}

fn bad_value(section: &str, key: &str, value: &str, expected: &str) -> CliError {
    CliError::Config(format!("[{section}] {key} = {value:?}: expected {expected}"))
}

/// Command-line flags that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tau: Option<f64>,
    pub grid: Option<usize>,
    pub threads: Option<usize>,
    pub branch: Option<Branch>,
    pub inner_field: Option<PathBuf>,
    pub outer_field: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExtractConfig {
    pub inner_field: Option<PathBuf>,
    pub outer_field: Option<PathBuf>,
    pub ridge: RidgeOptions,
    pub minima: MinimaOptions,
}

#[derive(Debug, Clone, Copy)]
pub struct OrbitsConfig {
    pub branch: Branch,
    pub segments: usize,
    pub shooting: ShootingOptions,
}

#[derive(Debug, Clone, Copy)]
pub struct PotentialConfig {
    /// Resolution of the optional U(r, θ) grid.
    pub grid: Option<usize>,
    pub r_range: (f64, f64),
}

/// Everything a command needs, with every default filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelParams,
    pub integrator: IntegratorSettings,
    pub descriptor: DescriptorSpec,
    pub section: SectionSpec,
    pub extract: ExtractConfig,
    pub classify: ClassRules,
    pub orbits: OrbitsConfig,
    pub potential: PotentialConfig,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Defaults, then the file, then the flags. The output directory falls
    /// back to `env_out` and finally to the working directory.
    pub fn resolve(raw: &RawConfig, overrides: &Overrides, env_out: Option<PathBuf>) -> CliResult<Self> {
        let mut model = ModelParams::default();
        for key in MODEL_KEYS {
            if let Some(v) = raw.number("model", key)? {
                model.set(key, v);
            }
        }
        model.validate()?;

        let mut integrator = IntegratorSettings::sweep();
        if let Some(v) = raw.number("integrator", "rel_tol")? {
            integrator.rel_tol = v;
        }
        if let Some(v) = raw.number("integrator", "abs_tol")? {
            integrator.abs_tol = v;
        }
        if let Some(v) = raw.number("integrator", "max_step")? {
            integrator.max_step = v;
        }
        if let Some(v) = raw.count("integrator", "max_steps")? {
            integrator.max_steps = v;
        }
        if let Some(v) = raw.flag("integrator", "project")? {
            integrator.project = v;
        }
        integrator.validate()?;

        let integrand = match raw.get("descriptor", "integrand") {
            Some(id) => Integrand::parse(id).ok_or_else(|| bad_value("descriptor", "integrand", id, "a registered integrand"))?,
            None => Integrand::inner_f1(),
        };
        let direction = match raw.get("descriptor", "direction") {
            Some(d) => Direction::parse(d).ok_or_else(|| bad_value("descriptor", "direction", d, "forward or backward"))?,
            None => integrand.natural_direction(),
        };
        let default_tau = if matches!(integrand, Integrand::RadialRate) { 20.0 } else { 6.0 };
        let tau = overrides.tau.or(raw.number("descriptor", "tau")?).unwrap_or(default_tau);
        let descriptor = DescriptorSpec::new(integrand, direction, tau)?;

        let resolution = match overrides.grid {
            Some(n) => n,
            None => raw.count("section", "resolution")?.unwrap_or(DEFAULT_RESOLUTION),
        };
        let mut section = match raw.get("section", "kind").unwrap_or("radial") {
            "radial" => SectionSpec::radial_default(&model, resolution),
            "theta" => SectionSpec::theta_default(&model, resolution),
            other => return Err(bad_value("section", "kind", other, "radial or theta")),
        };
        if let Some(level) = raw.number("section", "level")? {
            section.kind = match section.kind {
                SectionKind::Radial { .. } => SectionKind::Radial { r0: level },
                SectionKind::Theta { .. } => SectionKind::Theta { theta0: level },
            };
        }
        for (key, slot) in [
            ("axis1_lo", &mut section.axis1.0),
            ("axis1_hi", &mut section.axis1.1),
            ("axis2_lo", &mut section.axis2.0),
            ("axis2_hi", &mut section.axis2.1),
        ] {
            if let Some(v) = raw.number("section", key)? {
                *slot = v;
            }
        }
        section.validate()?;

        let mut ridge = RidgeOptions::default();
        let mut minima = MinimaOptions::default();
        if let Some(v) = raw.number("extract", "cutoff_fraction")? {
            ridge.cutoff_fraction = v;
        }
        if let Some(v) = raw.number("extract", "merge_fraction")? {
            ridge.merge_fraction = v;
        }
        if let Some(v) = raw.count("extract", "ridge_jump")? {
            ridge.jump = v;
        }
        if let Some(v) = raw.count("extract", "ridge_min_chain")? {
            ridge.min_chain = v;
        }
        if let Some(v) = raw.number("extract", "prominence_fraction")? {
            minima.prominence_fraction = v;
        }
        if let Some(v) = raw.count("extract", "minima_jump")? {
            minima.jump = v;
        }
        if let Some(v) = raw.count("extract", "minima_min_chain")? {
            minima.min_chain = v;
        }
        let extract = ExtractConfig {
            inner_field: overrides.inner_field.clone().or_else(|| raw.path("extract", "inner_field")),
            outer_field: overrides.outer_field.clone().or_else(|| raw.path("extract", "outer_field")),
            ridge,
            minima,
        };

        let mut classify = ClassRules {
            t_max: 50.0,
            section_r: RADIAL_SECTION_R,
            dissociation_r: f64::NAN,
            roaming_crossings: 3,
            settings: integrator,
        };
        if let Some(v) = raw.number("classify", "t_max")? {
            classify.t_max = v;
        }
        if let Some(v) = raw.number("classify", "section_r")? {
            classify.section_r = v;
        }
        classify.dissociation_r = match raw.number("classify", "dissociation_r")? {
            Some(v) => v,
            None => outer_radius(&model)?,
        };
        if let Some(v) = raw.count("classify", "roaming_crossings")? {
            classify.roaming_crossings = v;
        }
        classify.validate()?;

        let branch = match (overrides.branch, raw.get("orbits", "branch")) {
            (Some(b), _) => b,
            (None, Some(b)) => Branch::parse(b).ok_or_else(|| bad_value("orbits", "branch", b, "plus or minus"))?,
            (None, None) => Branch::Plus,
        };
        let mut shooting = ShootingOptions::default();
        if let Some(v) = raw.number("orbits", "tolerance")? {
            shooting.tolerance = v;
        }
        if let Some(v) = raw.count("orbits", "max_iterations")? {
            shooting.max_iterations = v;
        }
        if let Some(v) = raw.number("orbits", "rel_tol")? {
            shooting.settings.rel_tol = v;
            shooting.settings.abs_tol = v;
        }
        shooting.settings.validate()?;
        let segments = raw.count("orbits", "segments")?.unwrap_or(DEFAULT_SEGMENTS);
        if segments < 2 {
            return Err(bad_value("orbits", "segments", &segments.to_string(), "at least 2"));
        }
        let orbits = OrbitsConfig { branch, segments, shooting };

        let grid = overrides.grid.or(raw.count("potential", "grid")?);
        let r_range = (raw.number("potential", "r_lo")?.unwrap_or(0.8), raw.number("potential", "r_hi")?.unwrap_or(8.0));
        if !(r_range.0 > 0.0 && r_range.1 > r_range.0) {
            return Err(CliError::Config(format!("[potential] radius range {r_range:?} must be positive and increasing")));
        }
        if grid.is_some_and(|n| n < 2) {
            return Err(CliError::Config("potential grid needs at least 2 points per axis".into()));
        }
        let potential = PotentialConfig { grid, r_range };

        let out = overrides
            .out
            .clone()
            .or_else(|| raw.path("run", "out"))
            .or(env_out)
            .unwrap_or_else(|| PathBuf::from("."));
        let threads = overrides.threads.or(raw.count("run", "threads")?);
        if threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }

        Ok(Self { model, integrator, descriptor, section, extract, classify, orbits, potential, out, threads })
    }

    /// The resolved configuration as INI text; loading it back yields the
    /// same configuration. Output paths and thread counts are left out so a
    /// manifest reproduces its outputs wherever it is run.
    pub fn to_ini(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]\ncommand = {command}\n");
        let _ = writeln!(s, "[model]");
        for key in MODEL_KEYS {
            let _ = writeln!(s, "{key} = {:?}", self.model.get(key).unwrap_or(f64::NAN));
        }
        let i = &self.integrator;
        let _ = writeln!(s, "\n[integrator]");
        let _ = writeln!(s, "rel_tol = {:?}\nabs_tol = {:?}\nmax_step = {:?}", i.rel_tol, i.abs_tol, i.max_step);
        let _ = writeln!(s, "max_steps = {}\nproject = {}", i.max_steps, i.project);
        let d = &self.descriptor;
        let _ = writeln!(s, "\n[descriptor]");
        let _ = writeln!(s, "integrand = {}\ndirection = {}\ntau = {:?}", d.integrand.id(), d.direction.name(), d.tau);
        let c = &self.section;
        let _ = writeln!(s, "\n[section]");
        let _ = writeln!(s, "kind = {}\nlevel = {:?}", c.kind_name(), c.level());
        let _ = writeln!(s, "axis1_lo = {:?}\naxis1_hi = {:?}", c.axis1.0, c.axis1.1);
        let _ = writeln!(s, "axis2_lo = {:?}\naxis2_hi = {:?}", c.axis2.0, c.axis2.1);
        let _ = writeln!(s, "resolution = {}", c.resolution);
        let e = &self.extract;
        let _ = writeln!(s, "\n[extract]");
        if let Some(p) = &e.inner_field {
            let _ = writeln!(s, "inner_field = {}", absolute(p).display());
        }
        if let Some(p) = &e.outer_field {
            let _ = writeln!(s, "outer_field = {}", absolute(p).display());
        }
        let _ = writeln!(s, "cutoff_fraction = {:?}\nmerge_fraction = {:?}", e.ridge.cutoff_fraction, e.ridge.merge_fraction);
        let _ = writeln!(s, "ridge_jump = {}\nridge_min_chain = {}", e.ridge.jump, e.ridge.min_chain);
        let _ = writeln!(s, "prominence_fraction = {:?}", e.minima.prominence_fraction);
        let _ = writeln!(s, "minima_jump = {}\nminima_min_chain = {}", e.minima.jump, e.minima.min_chain);
        let k = &self.classify;
        let _ = writeln!(s, "\n[classify]");
        let _ = writeln!(s, "t_max = {:?}\nsection_r = {:?}", k.t_max, k.section_r);
        let _ = writeln!(s, "dissociation_r = {:?}\nroaming_crossings = {}", k.dissociation_r, k.roaming_crossings);
        let o = &self.orbits;
        let _ = writeln!(s, "\n[orbits]");
        let _ = writeln!(s, "branch = {}\nsegments = {}", o.branch.name(), o.segments);
        let _ = writeln!(s, "tolerance = {:?}\nmax_iterations = {}", o.shooting.tolerance, o.shooting.max_iterations);
        let _ = writeln!(s, "rel_tol = {:?}", o.shooting.settings.rel_tol);
        let p = &self.potential;
        let _ = writeln!(s, "\n[potential]");
        if let Some(n) = p.grid {
            let _ = writeln!(s, "grid = {n}");
        }
        let _ = writeln!(s, "r_lo = {:?}\nr_hi = {:?}", p.r_range.0, p.r_range.1);
        s
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}
