//! Run configuration, batch orchestration and file outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;

use crate::bem::BemCell;
use crate::dwr::ErrorBreakdown;
use crate::fem::{von_mises, DisplacementField};
use crate::lamination::LaminateModel;
use crate::mesh::{QuadMesh, Scenario, DEFAULT_SEGMENT_WIDTH};
use crate::microcell::{
    write_cell_database, CellMaterials, CellModel, MicroParams, TabulatedCellModel,
    DEFAULT_RESOLUTION, DEFAULT_TABLE_POINTS,
};
use crate::optimizer::{adaptive_loop, AdaptiveConfig, OptimizerConfig, StepOutput};
use crate::tensor::{ElasticTensor2D, IsotropicMaterial};
use crate::{Error, Result};

pub const SCENARIOS: [&str; 4] = ["carrier", "cantilever", "bridge", "lshape"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,
    pub initial_level: u32,
    /// Number of refinements; a run emits `steps + 1` rows.
    pub steps: usize,
    pub fraction: f64,
    pub laminate_rounds: usize,
    pub resolution: usize,
    pub table_points: usize,
    pub optimizer_iters: usize,
    pub optimizer_tol: f64,
    pub output_dir: PathBuf,
    pub bem_check: bool,
    pub bem_panels: usize,
    pub segment_width: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "carrier".into(),
            initial_level: 3,
            steps: 14,
            fraction: 0.4,
            laminate_rounds: 50,
            resolution: DEFAULT_RESOLUTION,
            table_points: DEFAULT_TABLE_POINTS,
            optimizer_iters: 200,
            optimizer_tol: 1e-6,
            output_dir: PathBuf::from("output"),
            bem_check: false,
            bem_panels: 64,
            segment_width: DEFAULT_SEGMENT_WIDTH,
        }
    }
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn as_int(key: &str, v: &toml::Value, lo: i64, hi: i64) -> Result<i64> {
    let i = v
        .as_integer()
        .ok_or_else(|| config_err(key, format!("expected an integer, got `{v}`")))?;
    if i < lo || i > hi {
        return Err(config_err(key, format!("{i} outside [{lo}, {hi}]")));
    }
    Ok(i)
}

fn as_float(key: &str, v: &toml::Value) -> Result<f64> {
    v.as_float()
        .or_else(|| v.as_integer().map(|i| i as f64))
        .ok_or_else(|| config_err(key, format!("expected a number, got `{v}`")))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut config = Self::default();
        for (key, value) in &table {
            config.set_value(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Applies `key=value`; the value is read as TOML, bare words as strings.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(assignment, "expected key=value"))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.into()));
        self.set_value(key, &value)?;
        self.validate()
    }

    fn set_value(&mut self, key: &str, v: &toml::Value) -> Result<()> {
        match key {
            "scenario" => {
                let s = v
                    .as_str()
                    .ok_or_else(|| config_err(key, "expected a string"))?;
                if !SCENARIOS.contains(&s) {
                    return Err(config_err(key, format!("unknown scenario `{s}`")));
                }
                self.scenario = s.into();
            }
            "initial_level" => self.initial_level = as_int(key, v, 1, 10)? as u32,
            "steps" => self.steps = as_int(key, v, 1, 40)? as usize,
            "fraction" => self.fraction = as_float(key, v)?,
            "laminate_rounds" => self.laminate_rounds = as_int(key, v, 1, 100_000)? as usize,
            "resolution" => self.resolution = as_int(key, v, 4, 1024)? as usize,
            "table_points" => self.table_points = as_int(key, v, 4, 200)? as usize,
            "optimizer_iters" => self.optimizer_iters = as_int(key, v, 1, 1_000_000)? as usize,
            "optimizer_tol" => self.optimizer_tol = as_float(key, v)?,
            "output_dir" => {
                self.output_dir = v
                    .as_str()
                    .ok_or_else(|| config_err(key, "expected a string"))?
                    .into()
            }
            "bem_check" => {
                self.bem_check = v
                    .as_bool()
                    .ok_or_else(|| config_err(key, "expected true or false"))?
            }
            "bem_panels" => self.bem_panels = as_int(key, v, 2, 1024)? as usize,
            "segment_width" => self.segment_width = as_float(key, v)?,
            _ => return Err(config_err(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(config_err("fraction", format!("{} outside (0, 1]", self.fraction)));
        }
        if !(self.optimizer_tol > 0.0 && self.optimizer_tol < 1.0) {
            return Err(config_err(
                "optimizer_tol",
                format!("{} outside (0, 1)", self.optimizer_tol),
            ));
        }
        if !(self.segment_width > 0.0 && self.segment_width <= 0.5) {
            return Err(config_err(
                "segment_width",
                format!("{} outside (0, 0.5]", self.segment_width),
            ));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::by_name(&self.scenario, self.segment_width)?;
        s.initial_level = self.initial_level;
        s.validate()
            .map_err(|e| config_err("initial_level", e.to_string()))?;
        Ok(s)
    }

    pub fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            steps: self.steps + 1,
            doerfler_fraction: self.fraction,
            laminate_rounds: self.laminate_rounds,
            optimizer: OptimizerConfig {
                max_iters: self.optimizer_iters,
                tol: self.optimizer_tol,
                ..OptimizerConfig::default()
            },
        }
    }
}

pub const INDICATOR_HEADER: &str = "step,edge,volume,model,total,compliance,elements";

/// One indicator row in the table column order.
pub fn indicator_row(step: usize, b: &ErrorBreakdown) -> String {
    format!(
        "{step},{},{},{},{},{},{}",
        b.edge, b.volume, b.model, b.total, b.compliance, b.num_elements
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorRow {
    pub step: usize,
    pub edge: f64,
    pub volume: f64,
    pub model: f64,
    pub total: f64,
    pub compliance: f64,
    pub elements: usize,
}

fn parse_field<T: std::str::FromStr>(s: Option<&str>, line: usize, what: &str) -> Result<T> {
    s.and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad or missing {what}")))
}

pub fn parse_indicator_csv(text: &str) -> Result<Vec<IndicatorRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == INDICATOR_HEADER => {}
        _ => return Err(Error::Parse("missing indicator header".into())),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let mut f = l.split(',');
            Ok(IndicatorRow {
                step: parse_field(f.next(), n + 1, "step")?,
                edge: parse_field(f.next(), n + 1, "edge")?,
                volume: parse_field(f.next(), n + 1, "volume")?,
                model: parse_field(f.next(), n + 1, "model")?,
                total: parse_field(f.next(), n + 1, "total")?,
                compliance: parse_field(f.next(), n + 1, "compliance")?,
                elements: parse_field(f.next(), n + 1, "elements")?,
            })
        })
        .collect()
}

pub fn write_checkpoint<W: Write>(mut out: W, mesh: &QuadMesh, params: &[MicroParams]) -> Result<()> {
    writeln!(out, "id,alpha,delta1,delta2,density")?;
    for (id, q) in mesh.elements().iter().zip(params) {
        writeln!(out, "{id},{},{},{},{}", q.alpha, q.delta1, q.delta2, q.density())?;
    }
    Ok(())
}

/// Design rows `(element id, parameters)` of a checkpoint.
pub fn parse_checkpoint(text: &str) -> Result<Vec<(usize, MicroParams)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "id,alpha,delta1,delta2,density" => {}
        _ => return Err(Error::Parse("missing checkpoint header".into())),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let mut f = l.split(',');
            let id = parse_field(f.next(), n + 1, "id")?;
            let a = parse_field(f.next(), n + 1, "alpha")?;
            let d1 = parse_field(f.next(), n + 1, "delta1")?;
            let d2 = parse_field(f.next(), n + 1, "delta2")?;
            Ok((id, MicroParams::new(a, d1, d2)))
        })
        .collect()
}

/// Parameters of a checkpoint in the element order of `mesh`.
pub fn design_from_checkpoint(mesh: &QuadMesh, rows: &[(usize, MicroParams)]) -> Result<Vec<MicroParams>> {
    let map: BTreeMap<usize, MicroParams> = rows.iter().copied().collect();
    mesh.elements()
        .iter()
        .map(|id| {
            map.get(id)
                .copied()
                .ok_or_else(|| Error::Parse(format!("checkpoint lacks element {id}")))
        })
        .collect()
}

/// Legacy ASCII VTK with one quad per element (corners not shared), the
/// displacement at the corners and per-element design and indicator data.
pub fn write_vtk<W: Write>(
    mut out: W,
    mesh: &QuadMesh,
    u: &DisplacementField,
    cell_data: &[(&str, Vec<f64>)],
) -> Result<()> {
    let n = mesh.num_elements();
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nmicrotruss design\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", 4 * n);
    for k in 0..n {
        let cell = mesh.element(k);
        for r in corners {
            let p = cell.to_physical(r);
            let _ = writeln!(s, "{} {} 0", p[0], p[1]);
        }
    }
    let _ = writeln!(s, "CELLS {n} {}", 5 * n);
    for k in 0..n {
        let _ = writeln!(s, "4 {} {} {} {}", 4 * k, 4 * k + 1, 4 * k + 2, 4 * k + 3);
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        s.push_str("9\n");
    }
    let _ = writeln!(s, "CELL_DATA {n}");
    for (name, values) in cell_data {
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "cell field `{name}` has {} values for {n} elements",
                values.len()
            )));
        }
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(s, "{v}");
        }
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS displacement double", 4 * n);
    for k in 0..n {
        for r in corners {
            let v = u.value(mesh, k, r);
            let _ = writeln!(s, "{} {} 0", v[0], v[1]);
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Contents of a legacy ASCII unstructured-grid file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 3]>>,
}

/// Minimal reader for the subset written by [`write_vtk`].
pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let bad = |m: &str| Error::Parse(format!("vtk: {m}"));
    let mut lines = text.lines();
    if !lines.next().is_some_and(|l| l.starts_with("# vtk DataFile Version")) {
        return Err(bad("missing version line"));
    }
    lines.next();
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(bad("only ASCII files are supported"));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut next = || tokens.next().ok_or_else(|| bad("unexpected end of file"));
    fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
        s.parse().map_err(|_| Error::Parse(format!("vtk: bad number `{s}`")))
    }
    let mut data = VtkData::default();
    let (mut n_cells, mut n_points) = (0usize, 0usize);
    while let Ok(word) = next() {
        match word {
            "DATASET" => {
                if next()? != "UNSTRUCTURED_GRID" {
                    return Err(bad("only UNSTRUCTURED_GRID is supported"));
                }
            }
            "POINTS" => {
                let n: usize = num(next()?)?;
                next()?;
                for _ in 0..n {
                    data.points.push([num(next()?)?, num(next()?)?, num(next()?)?]);
                }
            }
            "CELLS" => {
                let n: usize = num(next()?)?;
                let size: usize = num(next()?)?;
                let mut read = 0;
                for _ in 0..n {
                    let m: usize = num(next()?)?;
                    let ids = (0..m).map(|_| num(next()?)).collect::<Result<Vec<usize>>>()?;
                    if ids.iter().any(|&i| i >= data.points.len()) {
                        return Err(bad("cell references a missing point"));
                    }
                    read += m + 1;
                    data.cells.push(ids);
                }
                if read != size {
                    return Err(bad("CELLS size mismatch"));
                }
            }
            "CELL_TYPES" => {
                let n: usize = num(next()?)?;
                for _ in 0..n {
                    data.cell_types.push(num(next()?)?);
                }
            }
            "CELL_DATA" => n_cells = num(next()?)?,
            "POINT_DATA" => n_points = num(next()?)?,
            "SCALARS" => {
                let name = next()?.to_string();
                next()?;
                let mut w = next()?;
                if w == "1" {
                    w = next()?;
                }
                if w != "LOOKUP_TABLE" {
                    return Err(bad("expected LOOKUP_TABLE"));
                }
                next()?;
                let values = (0..n_cells).map(|_| num(next()?)).collect::<Result<Vec<f64>>>()?;
                data.cell_scalars.insert(name, values);
            }
            "VECTORS" => {
                let name = next()?.to_string();
                next()?;
                let values = (0..n_points)
                    .map(|_| Ok([num(next()?)?, num(next()?)?, num(next()?)?]))
                    .collect::<Result<Vec<_>>>()?;
                data.point_vectors.insert(name, values);
            }
            other => return Err(bad(&format!("unexpected keyword `{other}`"))),
        }
    }
    if data.cells.len() != data.cell_types.len() {
        return Err(bad("CELL_TYPES count differs from CELLS"));
    }
    Ok(data)
}

/// Relative deviation of the tabulated tensors from the boundary-element cell
/// solution at a few widths.
#[derive(Debug, Clone, PartialEq)]
pub struct BemComparison {
    pub delta1: f64,
    pub delta2: f64,
    pub table: ElasticTensor2D,
    pub bem: ElasticTensor2D,
    pub relative: f64,
}

pub fn bem_cross_check(model: &dyn CellModel, panels: usize) -> Result<Vec<BemComparison>> {
    [(0.3, 0.3), (0.5, 0.5), (0.7, 0.4)]
        .into_iter()
        .map(|(d1, d2)| {
            let table = model.axis_tensor(d1, d2)?;
            let bem = BemCell::new(d1, d2, IsotropicMaterial::unit(), panels, 0.0)?.effective_tensor()?;
            let scale = bem.entries().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(BemComparison {
                delta1: d1,
                delta2: d2,
                table,
                bem,
                relative: table.max_abs_diff(&bem) / scale,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<IndicatorRow>,
    pub recommended_stop: Option<usize>,
    pub output_dir: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Per-step outputs of the adaptive loop.
fn write_step(dir: &Path, out: &StepOutput<'_>) -> Result<()> {
    let s = out.step;
    let opt = out.optimization;
    let mut f = create(&dir.join(format!("design_step{s:02}.csv")))?;
    write_checkpoint(&mut f, out.mesh, &opt.design.params)?;
    f.flush()?;
    fs::write(dir.join(format!("mesh_step{s:02}.txt")), out.mesh.dump())?;
    let p = &opt.design.params;
    let b = out.breakdown;
    let fields = [
        ("alpha", p.iter().map(|q| q.alpha).collect()),
        ("delta1", p.iter().map(|q| q.delta1).collect()),
        ("delta2", p.iter().map(|q| q.delta2).collect()),
        ("density", p.iter().map(MicroParams::density).collect()),
        ("von_mises", von_mises(out.mesh, &opt.tensors, &opt.u)),
        ("indicator_edge", b.elements.iter().map(|e| e.edge).collect()),
        ("indicator_volume", b.elements.iter().map(|e| e.volume).collect()),
        ("indicator_model", b.elements.iter().map(|e| 0.5 * e.model).collect()),
    ];
    let mut f = create(&dir.join(format!("fields_step{s:02}.vtk")))?;
    write_vtk(&mut f, out.mesh, &opt.u, &fields)?;
    f.flush()?;
    Ok(())
}

/// Full batch run: cell table, adaptive loop, per-step files and a summary.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let scenario = config.scenario()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    info!(
        "tabulating cell tensors: {0}×{0} widths at resolution {1}",
        config.table_points, config.resolution
    );
    let model = TabulatedCellModel::build(&CellMaterials::default(), config.resolution, config.table_points)?;
    let mut f = create(&dir.join("cell_table.csv"))?;
    write_cell_database(&mut f, model.samples())?;
    f.flush()?;
    if config.bem_check {
        let mut f = create(&dir.join("bem_check.csv"))?;
        writeln!(f, "delta1,delta2,relative_deviation")?;
        for c in bem_cross_check(&model, config.bem_panels)? {
            info!(
                "cell ({}, {}): table vs boundary elements, relative deviation {:.3e}",
                c.delta1, c.delta2, c.relative
            );
            writeln!(f, "{},{},{}", c.delta1, c.delta2, c.relative)?;
        }
        f.flush()?;
    }
    let laminate = LaminateModel::new(IsotropicMaterial::unit());
    let mut table = create(&dir.join("indicators.csv"))?;
    writeln!(table, "{INDICATOR_HEADER}")?;
    let mut rows = Vec::new();
    let result = adaptive_loop(&scenario, &model, &laminate, &config.adaptive(), &mut |out| {
        let line = indicator_row(out.step, out.breakdown);
        writeln!(table, "{line}")?;
        table.flush()?;
        rows.extend(parse_indicator_csv(&format!("{INDICATOR_HEADER}\n{line}"))?);
        write_step(&dir, out)
    })?;
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", config.scenario);
    let _ = writeln!(s, "steps: {}", rows.len());
    if let Some(last) = rows.last() {
        let _ = writeln!(s, "final elements: {}", last.elements);
        let _ = writeln!(s, "final compliance: {}", last.compliance);
        let _ = writeln!(s, "final estimate: {}", last.total);
    }
    match result.recommended_stop {
        Some(k) => {
            let _ = writeln!(s, "recommended stop: step {k} (estimate increases afterwards)");
        }
        None => s.push_str("recommended stop: none (estimate never increased)\n"),
    }
    fs::write(dir.join("summary.txt"), s)?;
    Ok(RunSummary {
        rows,
        recommended_stop: result.recommended_stop,
        output_dir: dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(
            (c.scenario.as_str(), c.initial_level, c.steps, c.fraction, c.laminate_rounds, c.resolution),
            ("carrier", 3, 14, 0.4, 50, 64)
        );
        assert_eq!(c.adaptive().steps, 15);
    }

    #[test]
    fn rejects_bad_keys_and_ranges() {
        for (text, key) in [
            ("fraction = 1.5", "fraction"),
            ("steps = 0", "steps"),
            ("colour = 3", "colour"),
            ("scenario = \"bridges\"", "scenario"),
            ("resolution = \"high\"", "resolution"),
            ("initial_level = 0", "initial_level"),
        ] {
            match RunConfig::from_toml_str(text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(RunConfig::from_toml_str("steps = ="), Err(Error::Parse(_))));
    }

    #[test]
    fn overrides_accept_bare_words() {
        let mut c = RunConfig::default();
        c.set("scenario=bridge").unwrap();
        c.set("fraction = 0.3").unwrap();
        c.set("bem_check=true").unwrap();
        assert_eq!(c.scenario, "bridge");
        assert_eq!(c.fraction, 0.3);
        assert!(c.bem_check);
        assert!(c.set("fraction=2").is_err());
        assert!(c.set("nokey").is_err());
        let s = c.scenario().unwrap();
        assert_eq!(s.domain, Domain::Rectangle);
        assert_eq!(s.volume_fraction, 0.67);
        assert!(s.dirichlet.iter().all(|d| d.fix == [false, true]));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 1).unwrap();
        let p: Vec<MicroParams> = (0..4)
            .map(|k| MicroParams::new(0.1 * k as f64, 0.2 + 0.1 * k as f64, 0.7))
            .collect();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &mesh, &p).unwrap();
        let rows = parse_checkpoint(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(design_from_checkpoint(&mesh, &rows).unwrap(), p);
    }

    #[test]
    fn vtk_round_trip() {
        let mesh = QuadMesh::uniform(Domain::UnitSquare, 1).unwrap();
        let u = DisplacementField::interpolate(&mesh, |p| [p[0] * p[1], -p[0]]);
        let field: Vec<f64> = (0..4).map(|k| k as f64 * 0.25).collect();
        let mut buf = Vec::new();
        write_vtk(&mut buf, &mesh, &u, &[("density", field.clone())]).unwrap();
        let data = parse_vtk(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(data.points.len(), 16);
        assert_eq!(data.cells.len(), 4);
        assert!(data.cell_types.iter().all(|&t| t == 9));
        assert_eq!(data.cell_scalars["density"], field);
        for (p, v) in data.points.iter().zip(&data.point_vectors["displacement"]) {
            assert!((v[0] - p[0] * p[1]).abs() < 1e-14 && (v[1] + p[0]).abs() < 1e-14);
        }
        assert!(parse_vtk("# vtk DataFile Version 3.0\nx\nBINARY\n").is_err());
    }

    #[test]
    fn indicator_rows_parse_back() {
        let text = format!("{INDICATOR_HEADER}\n0,0.25,0.5,1,1.75,2.163037,64\n");
        let rows = parse_indicator_csv(&text).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].elements, 64);
        assert_eq!(rows[0].total, rows[0].edge + rows[0].volume + rows[0].model);
        assert!(parse_indicator_csv("step,edge\n").is_err());
    }
}
