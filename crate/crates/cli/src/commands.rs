//! The five pipeline commands. Each one writes its outputs and a manifest
//! into the output directory and returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use roamscope::integrate::Direction;
use roamscope::ld::Integrand;
use roamscope::model::{check_reference_points, REFERENCE_POINTS};
use roamscope::orbits::{floquet, outer_orbit, outer_radius, outer_refined, refine_orbit, OrbitCurve};
use roamscope::survey::{
    classify_grid, compute_field, extract_gradient_ridges, extract_minima, intersection_overlay, ClassKind, LDField,
    TraceLabel,
};
use roamscope::ModelParams;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{
    class_file, field_file, field_from_file, potential_file, report_to_text, trace_to_text, GridFile, Header,
};

/// Failed-cell fraction above which a sweep is reported as a warning.
pub const FAILED_WARN: f64 = 0.01;
/// Failed-cell fraction above which a sweep fails the command.
pub const FAILED_ABORT: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Potential,
    Orbits,
    Field,
    Extract,
    Classify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Potential => "potential",
            Command::Orbits => "orbits",
            Command::Field => "field",
            Command::Extract => "extract",
            Command::Classify => "classify",
        }
    }
}

/// Files written by a command, manifest last.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
    /// Summary lines echoed into the manifest's `[result]` section.
    pub summary: Vec<(String, String)>,
}

impl Outputs {
    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn write(&mut self, dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        self.files.push(path.clone());
        Ok(path)
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> CliResult<Outputs> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", cfg.out.display())))?;
    let mut outputs = Outputs::default();
    let result = match command {
        Command::Potential => potential(cfg, &mut outputs),
        Command::Orbits => orbits(cfg, &mut outputs),
        Command::Field => field(cfg, &mut outputs),
        Command::Extract => extract(cfg, &mut outputs),
        Command::Classify => classify(cfg, &mut outputs),
    };
    // the manifest is written even when the command fails numerically
    let mut manifest = cfg.to_ini(command.name());
    manifest.push_str("\n[result]\n");
    manifest.push_str(&format!("status = {}\n", if result.is_ok() { "ok" } else { "failed" }));
    for (k, v) in &outputs.summary {
        manifest.push_str(&format!("{k} = {v}\n"));
    }
    for (i, f) in outputs.files.iter().enumerate() {
        let name = f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        manifest.push_str(&format!("file{i} = {name}\n"));
    }
    let name = format!("{}.manifest", command.name());
    outputs.write(&cfg.out, &name, &manifest)?;
    result.map(|()| outputs)
}

fn potential(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let points = cfg.model.stationary_points()?;
    let checks = check_reference_points(&points);
    let mut h = Header::default();
    println!("{:<6} {:>10} {:>10} {:>12}  kind", "label", "r", "theta", "U");
    for c in &checks {
        let label = c.reference.label;
        match c.found {
            Some(p) => {
                println!("{label:<6} {:>10.6} {:>10.6} {:>12.6}  {}", p.r, p.theta, p.energy, p.class);
                h.push_f64(&format!("{label}.r"), p.r);
                h.push_f64(&format!("{label}.theta"), p.theta);
                h.push_f64(&format!("{label}.energy"), p.energy);
                h.push(&format!("{label}.kind"), p.class);
            }
            None => println!("{label:<6} not found"),
        }
        h.push_f64(&format!("{label}.delta_r"), c.delta_r);
        h.push_f64(&format!("{label}.delta_theta"), c.delta_theta);
        h.push_f64(&format!("{label}.delta_energy"), c.delta_energy);
        h.push(&format!("{label}.ok"), c.ok);
    }
    let all_ok = checks.iter().all(|c| c.ok);
    h.push("points", points.len());
    h.push("reference", if all_ok { "pass" } else { "fail" });
    out.write(&cfg.out, "stationary_points.report", &report_to_text(&h))?;
    out.note("reference", if all_ok { "pass" } else { "fail" });

    if let Some(n) = cfg.potential.grid {
        let grid = potential_file(&cfg.model, n, cfg.potential.r_range);
        out.write(&cfg.out, "potential.ldg", &grid.to_text())?;
    }
    if all_ok {
        Ok(())
    } else {
        let rows: Vec<String> = checks
            .iter()
            .filter(|c| !c.ok)
            .map(|c| format!("{}: dr={:.4} dtheta={:.4} dU={:.4}", c.reference.label, c.delta_r, c.delta_theta, c.delta_energy))
            .collect();
        Err(CliError::Numerical(format!(
            "{} of {} reference points off: {}",
            rows.len(),
            REFERENCE_POINTS.len(),
            rows.join("; ")
        )))
    }
}

fn orbits(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let p = &cfg.model;
    let o = &cfg.orbits;
    let branch = o.branch;
    let r_out = outer_radius(p)?;
    let outer = outer_orbit(p, branch)?;
    let seed = OrbitCurve::published_inner(branch);
    let inner = refine_orbit(p, &seed, o.segments, &o.shooting).map_err(|e| CliError::Numerical(format!("inner orbit: {e}")))?;
    info!("inner orbit converged in {} iterations, residual {:.3e}", inner.iterations, inner.residual);
    let inner_spectrum = floquet(p, &inner, &o.shooting.settings)?;
    let outer_spectrum = floquet(p, &outer_refined(p, branch, o.segments, &o.shooting.settings)?, &o.shooting.settings)?;

    let suffix = branch.name();
    out.write(&cfg.out, &format!("inner-{suffix}.orbit"), &inner.curve.to_text())?;
    out.write(&cfg.out, &format!("outer-{suffix}.orbit"), &outer.to_text())?;

    let mut h = Header::default();
    h.push("branch", suffix);
    h.push_f64("r_out", r_out);
    h.push_f64("inner_period", inner.period);
    h.push_f64("outer_period", outer.period);
    h.push_f64("inner_residual", inner.residual);
    h.push("inner_iterations", inner.iterations);
    h.push_f64("inner_condition", inner.condition);
    h.push_f64("inner_refit_deviation", inner.refit_deviation);
    for (name, s) in [("inner", &inner_spectrum), ("outer", &outer_spectrum)] {
        h.push_f64(&format!("{name}_log10_lambda_max"), s.log10_max());
        let m = s.multipliers().map(roamscope::orbits::fmt17);
        h.push(&format!("{name}_multipliers"), m.join(", "));
    }
    out.write(&cfg.out, "orbits.report", &report_to_text(&h))?;
    println!("r_out = {r_out:.16}");
    println!("inner period = {:.6}  outer period = {:.6}", inner.period, outer.period);
    println!(
        "log10 |lambda_max|: inner {:.3}  outer {:.6}",
        inner_spectrum.log10_max(),
        outer_spectrum.log10_max()
    );
    out.note("inner_period", inner.period);
    out.note("outer_period", outer.period);
    Ok(())
}

/// Stem naming a field file after what it holds.
pub fn field_stem(cfg: &RunConfig) -> String {
    let d = &cfg.descriptor;
    let mut stem = format!("{}-{}", cfg.section.kind_name(), d.integrand.id());
    if d.direction != d.integrand.natural_direction() {
        stem.push('-');
        stem.push_str(d.direction.name());
    }
    format!("{stem}-tau{}-n{}", d.tau, cfg.section.resolution)
}

fn check_failures(failed: usize, live: usize, what: &str) -> CliResult<()> {
    let fraction = if live == 0 { 0.0 } else { failed as f64 / live as f64 };
    if fraction > FAILED_ABORT {
        return Err(CliError::Numerical(format!("{failed} of {live} {what} failed ({:.1}%)", 100.0 * fraction)));
    }
    if fraction > FAILED_WARN {
        warn!("{failed} of {live} {what} failed ({:.1}%)", 100.0 * fraction);
    }
    Ok(())
}

fn field(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let f = compute_field(&cfg.model, &cfg.section, &cfg.descriptor, &cfg.integrator)?;
    let stem = field_stem(cfg);
    out.write(&cfg.out, &format!("{stem}.ldg"), &field_file(&cfg.model, &f).to_text())?;
    out.note("masked", f.masked_count());
    out.note("failed", f.failed_count());
    println!("{stem}: {} cells, {} masked, {} failed", f.values.len(), f.masked_count(), f.failed_count());
    check_failures(f.failed_count(), f.values.len() - f.masked_count(), "trajectories")
}

fn load_field(path: Option<&PathBuf>, which: &str) -> CliResult<(ModelParams, LDField)> {
    let path = path.ok_or_else(|| CliError::Config(format!("no {which} field given (--{which} or [extract] {which}_field)")))?;
    if !path.exists() {
        return Err(CliError::Config(format!("{which} field {} does not exist", path.display())));
    }
    let file = GridFile::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(field_from_file(&file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?)
}

fn extract(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let (_, inner) = load_field(cfg.extract.inner_field.as_ref(), "inner")?;
    let (_, outer) = load_field(cfg.extract.outer_field.as_ref(), "outer")?;
    if matches!(inner.descriptor.integrand, Integrand::RadialRate) || inner.descriptor.direction != Direction::Backward {
        warn!("inner field holds {} {}, expected a backward inner descriptor", inner.descriptor.integrand.id(), inner.descriptor.direction.name());
    }
    if !matches!(outer.descriptor.integrand, Integrand::RadialRate) || outer.descriptor.direction != Direction::Forward {
        warn!("outer field holds {} {}, expected the forward radial rate", outer.descriptor.integrand.id(), outer.descriptor.direction.name());
    }

    let ridges = extract_gradient_ridges(&inner, &cfg.extract.ridge)?;
    if let Some(w) = ridges.warning() {
        warn!("{w}");
    }
    let minima = extract_minima(&outer, &cfg.extract.minima)?;
    out.write(&cfg.out, "w_i_u.trace", &trace_to_text(&ridges.trace))?;
    out.write(&cfg.out, "w_o_s.trace", &trace_to_text(&minima))?;

    let w_i = ridges.trace.count(TraceLabel::InnerUnstable);
    let w_o = minima.count(TraceLabel::OuterStable);
    let c = &ridges.census;
    let mut h = Header::default();
    h.push("w_i_u_chains", w_i);
    h.push("axis_asymptotic_chains", c.axis_asymptotic);
    h.push("interior_chains", c.interior_chains);
    h.push("discarded_chains", c.discarded);
    h.push("w_o_s_chains", w_o);
    if w_i == 0 || w_o == 0 {
        h.push("roaming_present", "unknown");
        out.write(&cfg.out, "overlay.report", &report_to_text(&h))?;
        return Err(CliError::Numerical(format!("empty trace: {w_i} W_i^u chains, {w_o} W_o^s chains")));
    }
    let overlay = intersection_overlay(&ridges.trace, &minima)?;
    h.push("roaming_present", overlay.roaming_present());
    h.push("well_region_cells", overlay.well_region_cells());
    h.push("band_cells", overlay.band_cells());
    h.push("overlap_cells", overlay.overlap_cells());
    let bounds: Vec<String> = overlay.bounding_chains.iter().map(|(l, r)| format!("{l}-{r}")).collect();
    h.push("bounding_chains", bounds.join(" "));
    h.push(
        "half_turn_symmetric",
        overlay.half_turn_symmetric.map_or("n/a".to_string(), |b| b.to_string()),
    );
    out.write(&cfg.out, "overlay.report", &report_to_text(&h))?;
    out.note("roaming_present", overlay.roaming_present());
    println!(
        "{w_i} W_i^u chains, {w_o} W_o^s chains; overlap {} cells; roaming present: {}",
        overlay.overlap_cells(),
        overlay.roaming_present()
    );
    Ok(())
}

fn classify(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let grid = classify_grid(&cfg.model, &cfg.section, &cfg.classify)?;
    let name = format!("{}-classes-n{}.ldg", cfg.section.kind_name(), cfg.section.resolution);
    out.write(&cfg.out, &name, &class_file(&cfg.model, &grid).to_text())?;
    for k in ClassKind::ALL {
        out.note(&format!("fraction.{}", k.name()), grid.fraction(k));
        println!("{:<20} {:>8} {:>8.4}", k.name(), grid.count(k), grid.fraction(k));
    }
    out.note("failed", grid.failed_count());
    let live = grid.cells.iter().flatten().count();
    check_failures(grid.failed_count(), live, "classifications")
}
