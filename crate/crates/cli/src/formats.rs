//! Text file formats. Every file starts with a magic line, then
//! `key = value` metadata, a blank line and a body:
//!
//! * `LDGRID v1`: n rows of n comma-separated values at 17 significant
//!   digits, `nan` for masked cells and `inf` for failed ones;
//! * `LDTRACE v1`: rows `label, axis1, axis2, chain_id`;
//! * `LDREPORT v1`: metadata only.

use std::path::Path;

use roamscope::integrate::{Direction, IntegratorSettings, SectionKind};
use roamscope::ld::{DescriptorSpec, Integrand};
use roamscope::model::MODEL_KEYS;
use roamscope::orbits::{fmt17, parse_f64};
use roamscope::survey::{ClassGrid, ClassKind, LDField, ManifoldTrace, SectionSpec, TraceChain, TraceLabel};
use roamscope::{Error, ModelParams, Result};

pub const GRID_MAGIC: &str = "LDGRID v1";
pub const TRACE_MAGIC: &str = "LDTRACE v1";
pub const REPORT_MAGIC: &str = "LDREPORT v1";

pub const CODE_VERSION: &str = concat!("roamscope ", env!("CARGO_PKG_VERSION"));

fn format_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Format { line, msg: msg.into() }
}

/// Ordered metadata. Values remember the line they were read from so that
/// errors can point at it.
#[derive(Debug, Clone, Default)]
pub struct Header {
    entries: Vec<(String, String, usize)>,
}

impl Header {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string(), 0));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt17(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.0 == key).map(|e| e.1.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.0.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.iter().find(|e| e.0 == key).map_or(0, |e| e.2)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| format_err(0, format!("missing header key `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        parse_f64(v).ok_or_else(|| format_err(self.line_of(key), format!("`{key}`: bad number {v:?}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.require(key)?;
        v.parse().map_err(|_| format_err(self.line_of(key), format!("`{key}`: bad count {v:?}")))
    }

    fn write(&self, magic: &str, out: &mut String) {
        out.push_str(magic);
        out.push('\n');
        for (k, v, _) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
    }

    /// Parse the magic line and the metadata block; returns the header and
    /// the index of the first body line.
    fn read(magic: &str, lines: &[&str]) -> Result<(Self, usize)> {
        match lines.first() {
            Some(l) if l.trim_end() == magic => {}
            Some(l) => return Err(format_err(1, format!("expected `{magic}`, found {l:?}"))),
            None => return Err(format_err(1, "empty file")),
        }
        let mut header = Header::default();
        for (i, line) in lines.iter().enumerate().skip(1) {
            if line.trim().is_empty() {
                return Ok((header, i + 1));
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| format_err(i + 1, format!("expected `key = value`, found {line:?}")))?;
            if header.get(k).is_some() {
                return Err(format_err(i + 1, format!("duplicate key `{k}`")));
            }
            header.entries.push((k.to_string(), v.to_string(), i + 1));
        }
        Ok((header, lines.len()))
    }
}

/// An n×n grid of doubles with metadata.
#[derive(Debug, Clone)]
pub struct GridFile {
    pub header: Header,
    pub resolution: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl GridFile {
    pub fn to_text(&self) -> String {
        let n = self.resolution;
        let mut out = String::with_capacity(self.values.len() * 24 + 512);
        self.header.write(GRID_MAGIC, &mut out);
        out.push('\n');
        for row in self.values.chunks(n) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&fmt17(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let (header, body) = Header::read(GRID_MAGIC, &lines)?;
        let n = header.usize("resolution")?;
        if n == 0 {
            return Err(format_err(header.line_of("resolution"), "resolution must be positive"));
        }
        let rows = &lines[body.min(lines.len())..];
        if rows.len() != n {
            return Err(format_err(body + rows.len(), format!("expected {n} rows, found {}", rows.len())));
        }
        let mut values = Vec::with_capacity(n * n);
        for (k, row) in rows.iter().enumerate() {
            let line = body + k + 1;
            let before = values.len();
            for item in row.split(',') {
                values.push(parse_f64(item).ok_or_else(|| format_err(line, format!("bad value {item:?}")))?);
            }
            if values.len() - before != n {
                return Err(format_err(line, format!("expected {n} values, found {}", values.len() - before)));
            }
        }
        Ok(Self { header, resolution: n, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn push_model(h: &mut Header, params: &ModelParams) {
    for key in MODEL_KEYS {
        h.push_f64(&format!("model.{key}"), params.get(key).unwrap_or(f64::NAN));
    }
}

fn read_model(h: &Header) -> Result<ModelParams> {
    let mut params = ModelParams::default();
    for key in MODEL_KEYS {
        params.set(key, h.f64(&format!("model.{key}"))?);
    }
    params.validate()?;
    Ok(params)
}

fn push_section(h: &mut Header, s: &SectionSpec) {
    let (a1, a2) = s.axis_names();
    h.push("section", s.kind_name());
    h.push_f64("level", s.level());
    h.push("axis1", a1);
    h.push_f64("axis1_lo", s.axis1.0);
    h.push_f64("axis1_hi", s.axis1.1);
    h.push("axis2", a2);
    h.push_f64("axis2_lo", s.axis2.0);
    h.push_f64("axis2_hi", s.axis2.1);
    h.push("resolution", s.resolution);
}

fn read_section(h: &Header) -> Result<SectionSpec> {
    let level = h.f64("level")?;
    let kind = match h.require("section")? {
        "radial" => SectionKind::Radial { r0: level },
        "theta" => SectionKind::Theta { theta0: level },
        other => return Err(format_err(h.line_of("section"), format!("unknown section kind {other:?}"))),
    };
    let s = SectionSpec {
        kind,
        axis1: (h.f64("axis1_lo")?, h.f64("axis1_hi")?),
        axis2: (h.f64("axis2_lo")?, h.f64("axis2_hi")?),
        resolution: h.usize("resolution")?,
    };
    s.validate()?;
    Ok(s)
}

fn push_settings(h: &mut Header, s: &IntegratorSettings) {
    h.push_f64("rel_tol", s.rel_tol);
    h.push_f64("abs_tol", s.abs_tol);
    h.push_f64("max_step", s.max_step);
    h.push("max_steps", s.max_steps);
    h.push("project", s.project);
}

fn read_settings(h: &Header) -> Result<IntegratorSettings> {
    let project = match h.require("project")? {
        "true" => true,
        "false" => false,
        other => return Err(format_err(h.line_of("project"), format!("bad flag {other:?}"))),
    };
    Ok(IntegratorSettings {
        rel_tol: h.f64("rel_tol")?,
        abs_tol: h.f64("abs_tol")?,
        max_step: h.f64("max_step")?,
        max_steps: h.usize("max_steps")?,
        project,
        ..IntegratorSettings::sweep()
    })
}

fn expect_quantity(h: &Header, quantity: &str) -> Result<()> {
    match h.require("quantity")? {
        q if q == quantity => Ok(()),
        q => Err(format_err(h.line_of("quantity"), format!("expected quantity {quantity}, found {q}"))),
    }
}

/// LD field with everything needed to recompute it.
pub fn field_file(params: &ModelParams, field: &LDField) -> GridFile {
    let mut h = Header::default();
    h.push("quantity", "ld");
    push_section(&mut h, &field.section);
    h.push("integrand", field.descriptor.integrand.id());
    h.push("direction", field.descriptor.direction.name());
    h.push_f64("tau", field.descriptor.tau);
    push_settings(&mut h, &field.settings);
    push_model(&mut h, params);
    h.push("masked", field.masked_count());
    h.push("failed", field.failed_count());
    h.push("code_version", CODE_VERSION);
    GridFile { header: h, resolution: field.section.resolution, values: field.values.clone() }
}

pub fn field_from_file(file: &GridFile) -> Result<(ModelParams, LDField)> {
    let h = &file.header;
    expect_quantity(h, "ld")?;
    let section = read_section(h)?;
    let id = h.require("integrand")?;
    let integrand = Integrand::parse(id).ok_or_else(|| format_err(h.line_of("integrand"), format!("unregistered integrand {id:?}")))?;
    let dir = h.require("direction")?;
    let direction = Direction::parse(dir).ok_or_else(|| format_err(h.line_of("direction"), format!("bad direction {dir:?}")))?;
    let descriptor = DescriptorSpec::new(integrand, direction, h.f64("tau")?)?;
    let field = LDField { section, descriptor, settings: read_settings(h)?, values: file.values.clone() };
    if let Some(v) = field.values.iter().find(|v| **v < 0.0) {
        return Err(format_err(0, format!("negative descriptor value {v}")));
    }
    Ok((read_model(h)?, field))
}

/// Class codes as a grid; masked cells are `nan`.
pub fn class_file(params: &ModelParams, grid: &ClassGrid) -> GridFile {
    let mut h = Header::default();
    h.push("quantity", "class");
    push_section(&mut h, &grid.section);
    let legend: Vec<String> = ClassKind::ALL.iter().map(|k| format!("{}:{}", k.code(), k.name())).collect();
    h.push("classes", legend.join(" "));
    let r = &grid.rules;
    h.push_f64("t_max", r.t_max);
    h.push_f64("section_r", r.section_r);
    h.push_f64("dissociation_r", r.dissociation_r);
    h.push("roaming_crossings", r.roaming_crossings);
    push_settings(&mut h, &r.settings);
    push_model(&mut h, params);
    h.push("failed", grid.failed_count());
    h.push("code_version", CODE_VERSION);
    let values = grid.cells.iter().map(|c| c.map_or(f64::NAN, |c| f64::from(c.kind.code()))).collect();
    GridFile { header: h, resolution: grid.section.resolution, values }
}

pub fn classes_from_file(file: &GridFile) -> Result<(SectionSpec, Vec<Option<ClassKind>>)> {
    expect_quantity(&file.header, "class")?;
    let section = read_section(&file.header)?;
    let cells = file
        .values
        .iter()
        .map(|&v| {
            if v.is_nan() {
                return Ok(None);
            }
            let kind = (v.fract() == 0.0 && (0.0..=255.0).contains(&v)).then(|| ClassKind::from_code(v as u8)).flatten();
            kind.map(Some).ok_or_else(|| format_err(0, format!("bad class code {v}")))
        })
        .collect::<Result<_>>()?;
    Ok((section, cells))
}

/// U(r, θ) at cell centres over r ∈ `r_range`, θ ∈ [0, 2π); rows are θ.
/// Overflowing cells hold `inf`.
pub fn potential_file(params: &ModelParams, n: usize, r_range: (f64, f64)) -> GridFile {
    let tau = std::f64::consts::TAU;
    let hr = (r_range.1 - r_range.0) / n as f64;
    let ht = tau / n as f64;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let theta = ht * (j as f64 + 0.5);
        for i in 0..n {
            let r = r_range.0 + hr * (i as f64 + 0.5);
            values.push(params.potential(r, theta).unwrap_or(f64::INFINITY));
        }
    }
    let mut h = Header::default();
    h.push("quantity", "potential");
    h.push("axis1", "r");
    h.push_f64("axis1_lo", r_range.0);
    h.push_f64("axis1_hi", r_range.1);
    h.push("axis2", "theta");
    h.push_f64("axis2_lo", 0.0);
    h.push_f64("axis2_hi", tau);
    h.push("resolution", n);
    push_model(&mut h, params);
    h.push("code_version", CODE_VERSION);
    GridFile { header: h, resolution: n, values }
}

pub fn trace_to_text(trace: &ManifoldTrace) -> String {
    let mut h = Header::default();
    push_section(&mut h, &trace.section);
    h.push("method", &trace.method);
    h.push("cutoff", trace.cutoff.map_or("none".to_string(), fmt17));
    h.push_f64("tau", trace.tau);
    h.push("chains", trace.chains.len());
    h.push("code_version", CODE_VERSION);
    let mut out = String::new();
    h.write(TRACE_MAGIC, &mut out);
    out.push('\n');
    for c in &trace.chains {
        for &(a1, a2) in &c.points {
            out.push_str(&format!("{}, {}, {}, {}\n", c.label.name(), fmt17(a1), fmt17(a2), c.id));
        }
    }
    out
}

pub fn trace_from_text(text: &str) -> Result<ManifoldTrace> {
    let lines: Vec<&str> = text.lines().collect();
    let (h, body) = Header::read(TRACE_MAGIC, &lines)?;
    let section = read_section(&h)?;
    let cutoff = match h.require("cutoff")? {
        "none" => None,
        _ => Some(h.f64("cutoff")?),
    };
    let mut chains: Vec<TraceChain> = Vec::new();
    for (k, row) in lines.iter().enumerate().skip(body) {
        let line = k + 1;
        let fields: Vec<&str> = row.split(", ").collect();
        let [label, a1, a2, id] = fields[..] else {
            return Err(format_err(line, format!("expected `label, axis1, axis2, chain_id`, found {row:?}")));
        };
        let label = TraceLabel::parse(label).ok_or_else(|| format_err(line, format!("unknown label {label:?}")))?;
        let a1 = parse_f64(a1).ok_or_else(|| format_err(line, format!("bad coordinate {a1:?}")))?;
        let a2 = parse_f64(a2).ok_or_else(|| format_err(line, format!("bad coordinate {a2:?}")))?;
        let id: usize = id.parse().map_err(|_| format_err(line, format!("bad chain id {id:?}")))?;
        match chains.iter_mut().find(|c| c.id == id) {
            Some(c) if c.label != label => return Err(format_err(line, format!("chain {id} changes label"))),
            Some(c) => c.points.push((a1, a2)),
            None => chains.push(TraceChain { id, label, points: vec![(a1, a2)] }),
        }
    }
    let expected = h.usize("chains")?;
    if chains.len() != expected {
        return Err(format_err(h.line_of("chains"), format!("header announces {expected} chains, body has {}", chains.len())));
    }
    Ok(ManifoldTrace { section, method: h.require("method")?.to_string(), cutoff, tau: h.f64("tau")?, chains })
}

/// Key-value report.
pub fn report_to_text(h: &Header) -> String {
    let mut out = String::new();
    h.write(REPORT_MAGIC, &mut out);
    out
}

pub fn report_from_text(text: &str) -> Result<Header> {
    let lines: Vec<&str> = text.lines().collect();
    let (h, body) = Header::read(REPORT_MAGIC, &lines)?;
    if let Some(extra) = lines.get(body) {
        return Err(format_err(body + 1, format!("unexpected body line {extra:?}")));
    }
    Ok(h)
}
