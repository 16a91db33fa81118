//! Command-line front end: configuration loading, subcommands and output
//! files.
//!
//! Every subcommand computes all of its outputs in memory first and only
//! then writes them, each through a temporary file renamed into place, so
//! a failed or interrupted run never leaves a partial declared output.
//!
//! Precedence of settings, lowest to highest: the config file (or the
//! bundled reference config), `--set key=value` overrides in order, then the
//! dedicated `--out` and `--format` flags.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cavityqed::{ModeDoublet, Selection};
use crate::error::{Error, Result};
use crate::fitting::{fit_coupled_modes, read_observations, FieldDependence, FitModel, FitParameter};
use crate::spectra::{field_sweep, transmission, CavityModel, PortCoupling};
use crate::spinmodel::{levels, spectroscopy_map, SpinProjection, SpinSystemParams};
use crate::thermo::{calibrate_per_spin, collective_couplings, populations, susceptibility_thermal, CouplingModel};

/// The bundled reference configuration.
pub const REFERENCE_CONFIG: &str = include_str!("../reference.config");

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubletChoice {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "T_K")]
    pub temperature_k: f64,
    #[serde(rename = "B_mT")]
    pub field_mt: f64,
    pub selection: Selection,
    pub doublet: DoubletChoice,
    pub max_abs_delta_m: u32,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSection {
    #[serde(rename = "zfs_12_32_GHz")]
    pub zfs_12_32_ghz: f64,
    #[serde(rename = "zfs_32_52_GHz")]
    pub zfs_32_52_ghz: f64,
    pub g_factor: f64,
    pub total_ions: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubletSection {
    #[serde(rename = "f_R_GHz")]
    pub f_r_ghz: f64,
    #[serde(rename = "f_L_GHz")]
    pub f_l_ghz: f64,
    #[serde(rename = "kappa_R_MHz")]
    pub kappa_r_mhz: f64,
    #[serde(rename = "kappa_L_MHz")]
    pub kappa_l_mhz: f64,
    #[serde(rename = "g_RL_MHz")]
    pub g_rl_mhz: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(rename = "g_plus_MHz")]
    pub g_plus_mhz: f64,
    #[serde(rename = "g_minus_MHz")]
    pub g_minus_mhz: f64,
    #[serde(rename = "reference_T_K")]
    pub reference_temperature_k: f64,
    #[serde(rename = "reference_B_mT")]
    pub reference_field_mt: f64,
    #[serde(rename = "gamma_MHz")]
    pub gamma_mhz: f64,
    pub model: CouplingModel,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortsSection {
    #[serde(rename = "input_R")]
    pub input_r: f64,
    #[serde(rename = "input_L")]
    pub input_l: f64,
    #[serde(rename = "output_R")]
    pub output_r: f64,
    #[serde(rename = "output_L")]
    pub output_l: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// A grid given either as explicit values or as an evenly spaced range.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

impl GridSpec {
    pub fn values(&self, key: &str) -> Result<Vec<f64>> {
        let v = match *self {
            GridSpec::Values(ref v) => v.clone(),
            GridSpec::Range {
                start,
                stop,
                points,
                spacing,
            } => {
                if points == 0 {
                    return Err(Error::invalid(key, "points must be >= 1"));
                }
                if !(start.is_finite() && stop.is_finite()) {
                    return Err(Error::invalid(key, "start and stop must be finite"));
                }
                if spacing == Spacing::Log && !(start > 0.0 && stop > 0.0) {
                    return Err(Error::invalid(key, "log spacing needs start and stop > 0"));
                }
                if points == 1 {
                    vec![start]
                } else {
                    let last = (points - 1) as f64;
                    (0..points)
                        .map(|i| {
                            let t = i as f64 / last;
                            match spacing {
                                Spacing::Linear => start + (stop - start) * t,
                                Spacing::Log => (start.ln() + (stop.ln() - start.ln()) * t).exp(),
                            }
                        })
                        .collect()
                }
            }
        };
        if v.is_empty() {
            return Err(Error::invalid(key, "grid is empty"));
        }
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(key, "grid must be finite and strictly ascending"));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "B_mT")]
    pub field_mt: GridSpec,
    #[serde(rename = "f_GHz")]
    pub frequency_ghz: GridSpec,
    #[serde(rename = "T_K")]
    pub temperature_k: GridSpec,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub free: Vec<String>,
    pub field_dependence: FieldDependence,
    pub bounds: std::collections::BTreeMap<String, [f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub spin: SpinSection,
    pub doublet_plus: DoubletSection,
    pub doublet_minus: DoubletSection,
    pub coupling: CouplingSection,
    pub ports: PortsSection,
    pub sweep: SweepSection,
    pub fit: FitSection,
    pub output: OutputSection,
}

fn parse_override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies one `key=value` override; the dotted key must already exist.
fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(assignment, "override must have the form key=value"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    let (leaf, path) = parts.split_last().ok_or_else(|| Error::invalid(key, "empty key"))?;
    let mut table = &mut *root;
    for part in path {
        table = match table.get_mut(*part) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(Error::invalid(key, "no such configuration key")),
        };
    }
    let slot = table
        .get_mut(*leaf)
        .ok_or_else(|| Error::invalid(key, "no such configuration key"))?;
    let mut value = parse_override_value(raw.trim());
    if let (toml::Value::Float(_), toml::Value::Integer(i)) = (&*slot, &value) {
        value = toml::Value::Float(*i as f64);
    }
    if slot.type_str() != value.type_str() && !matches!(slot, toml::Value::Table(_)) {
        return Err(Error::invalid(
            key,
            format!("expected a {} value, got {raw:?}", slot.type_str()),
        ));
    }
    *slot = value;
    Ok(())
}

/// Prefixes a section name onto validation errors raised by shared types.
fn in_section(err: Error, section: &str) -> Error {
    match err {
        Error::Validation { field, reason } => {
            let leaf = field.rsplit('.').next().unwrap_or(&field).to_string();
            Error::Validation {
                field: format!("{section}.{leaf}"),
                reason,
            }
        }
        other => other,
    }
}

impl RunConfig {
    /// Parses TOML text and applies overrides in order.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut root: toml::Table =
            toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_CONFIG, &[]).expect("bundled reference config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.spin_params().validate()?;
        self.doublet(DoubletChoice::Plus).validate().map_err(|e| in_section(e, "doublet_plus"))?;
        self.doublet(DoubletChoice::Minus).validate().map_err(|e| in_section(e, "doublet_minus"))?;
        if !(self.run.temperature_k > 0.0 && self.run.temperature_k.is_finite()) {
            return Err(Error::invalid("run.T_K", "must be finite and > 0"));
        }
        if !self.run.field_mt.is_finite() {
            return Err(Error::invalid("run.B_mT", "must be finite"));
        }
        if !(self.coupling.reference_temperature_k > 0.0) {
            return Err(Error::invalid("coupling.reference_T_K", "must be > 0"));
        }
        if !(self.coupling.gamma_mhz > 0.0 && self.coupling.gamma_mhz.is_finite()) {
            return Err(Error::invalid("coupling.gamma_MHz", "must be finite and > 0"));
        }
        self.sweep.field_mt.values("sweep.B_mT")?;
        self.sweep.frequency_ghz.values("sweep.f_GHz")?;
        self.sweep.temperature_k.values("sweep.T_K")?;
        for name in &self.fit.free {
            let p = FitParameter::from_name(name)?;
            if !self.fit.bounds.contains_key(p.name()) {
                return Err(Error::invalid(format!("fit.bounds.{name}"), "missing bounds for a free parameter"));
            }
        }
        self.per_spin_coupling()?;
        Ok(())
    }

    pub fn spin_params(&self) -> SpinSystemParams {
        SpinSystemParams {
            zfs_12_32_ghz: self.spin.zfs_12_32_ghz,
            zfs_32_52_ghz: self.spin.zfs_32_52_ghz,
            g_factor: self.spin.g_factor,
            total_ions: self.spin.total_ions,
        }
    }

    pub fn doublet(&self, which: DoubletChoice) -> ModeDoublet {
        let d = match which {
            DoubletChoice::Plus => &self.doublet_plus,
            DoubletChoice::Minus => &self.doublet_minus,
        };
        ModeDoublet {
            f_r_ghz: d.f_r_ghz,
            f_l_ghz: d.f_l_ghz,
            kappa_r_mhz: d.kappa_r_mhz,
            kappa_l_mhz: d.kappa_l_mhz,
            g_rl_mhz: d.g_rl_mhz,
        }
    }

    pub fn per_spin_coupling(&self) -> Result<crate::thermo::PerSpinCoupling> {
        calibrate_per_spin(
            self.coupling.g_plus_mhz,
            self.coupling.g_minus_mhz,
            &self.spin_params(),
            self.coupling.reference_field_mt,
            self.coupling.reference_temperature_k,
            self.coupling.model,
        )
        .map_err(|e| in_section(e, "coupling"))
    }

    /// The coupled-mode model at the run temperature, on the run doublet.
    pub fn cavity_model(&self) -> Result<CavityModel> {
        Ok(CavityModel {
            spin: self.spin_params(),
            doublet: self.doublet(self.run.doublet),
            per_spin: self.per_spin_coupling()?,
            gamma_mhz: self.coupling.gamma_mhz,
            temperature_k: self.run.temperature_k,
            coupling_model: self.coupling.model,
        })
    }

    pub fn ports(&self) -> PortCoupling {
        PortCoupling {
            input_r: self.ports.input_r,
            input_l: self.ports.input_l,
            output_r: self.ports.output_r,
            output_l: self.ports.output_l,
        }
    }

    /// Model and initial guess for `fit`: the selected line's coupling is
    /// expressed at the reference field and the run temperature.
    pub fn fit_model(&self) -> Result<FitModel> {
        let selection = self.run.selection;
        if !matches!(selection, Selection::Plus | Selection::Minus) {
            return Err(Error::invalid("run.selection", "fit needs selection plus or minus"));
        }
        let spin = self.spin_params();
        let (gp, gm) = collective_couplings(
            &self.per_spin_coupling()?,
            &spin,
            self.coupling.reference_field_mt,
            self.run.temperature_k,
            self.coupling.model,
        )?;
        Ok(FitModel {
            spin,
            doublet: self.doublet(self.run.doublet),
            selection,
            g_sel_mhz: if selection == Selection::Plus { gp } else { gm },
            temperature_k: self.run.temperature_k,
            reference_field_mt: self.coupling.reference_field_mt,
            coupling_model: self.coupling.model,
            field_dependence: self.fit.field_dependence,
        })
    }

    pub fn fit_parameters(&self) -> Result<(Vec<FitParameter>, Vec<(f64, f64)>)> {
        let mut free = Vec::new();
        let mut bounds = Vec::new();
        for name in &self.fit.free {
            let p = FitParameter::from_name(name)?;
            let [lo, hi] = self.fit.bounds[p.name()];
            free.push(p);
            bounds.push((lo, hi));
        }
        Ok((free, bounds))
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros removed.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    fn trim(s: &str) -> &str {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.')
        } else {
            s
        }
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

/// A rectangular result set rendered as CSV or as a JSON array of objects.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
        w.write_record(&self.headers).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(x) => format_float(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Text(s) => s.clone(),
            }))
            .map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .headers
                    .iter()
                    .zip(row)
                    .map(|(h, c)| {
                        let v = match c {
                            Cell::Num(x) => serde_json::Value::from(*x),
                            Cell::Int(i) => serde_json::Value::from(*i),
                            Cell::Text(s) => serde_json::Value::from(s.clone()),
                        };
                        (h.clone(), v)
                    })
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&rows).map_err(|e| Error::Numerical(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }

    fn render(&self, stem: &str, format: Format) -> Result<(String, Vec<u8>)> {
        Ok(match format {
            Format::Csv => (format!("{stem}.csv"), self.to_csv()?),
            Format::Json => (format!("{stem}.json"), self.to_json()?),
        })
    }
}

fn projection_label(m: SpinProjection) -> String {
    m.to_string()
}

pub fn levels_table(cfg: &RunConfig) -> Result<Table> {
    let spin = cfg.spin_params();
    spin.validate()?;
    let grid = cfg.sweep.field_mt.values("sweep.B_mT")?;
    let mut headers = vec!["B_mT".to_string()];
    headers.extend(SpinProjection::ALL.iter().map(|&m| format!("E_{}_GHz", projection_label(m))));
    let rows = grid
        .iter()
        .map(|&b| {
            let mut row = vec![Cell::Num(b)];
            row.extend(levels(&spin, b).iter().map(|l| Cell::Num(l.energy_ghz)));
            row
        })
        .collect();
    Ok(Table { headers, rows })
}

pub fn transitions_table(cfg: &RunConfig) -> Result<Table> {
    let grid = cfg.sweep.field_mt.values("sweep.B_mT")?;
    let curves = spectroscopy_map(&cfg.spin_params(), &grid, cfg.run.max_abs_delta_m)?;
    let headers = ["B_mT", "from", "to", "delta_m", "polarization", "f_GHz"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for c in &curves {
        for &(b, f) in &c.points {
            rows.push(vec![
                Cell::Num(b),
                Cell::Text(c.from.to_string()),
                Cell::Text(c.to.to_string()),
                Cell::Int(i64::from(c.delta_m)),
                Cell::Text(c.polarization.as_str().to_string()),
                Cell::Num(f),
            ]);
        }
    }
    Ok(Table { headers, rows })
}

pub fn sweep_table(cfg: &RunConfig) -> Result<Table> {
    let grid = cfg.sweep.field_mt.values("sweep.B_mT")?;
    let sweep = field_sweep(&cfg.cavity_model()?, cfg.run.selection, &grid)?;
    let n = sweep.branch_count();
    let mut headers = vec!["B_mT".to_string()];
    headers.extend((1..=n).map(|k| format!("branch{k}_GHz")));
    for k in 1..=n {
        headers.extend([format!("frac_R{k}"), format!("frac_L{k}"), format!("frac_S{k}")]);
    }
    let rows = sweep
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![Cell::Num(r.field_mt)];
            row.extend(r.branches.iter().map(|b| Cell::Num(b.frequency_ghz)));
            for b in &r.branches {
                use crate::cavityqed::BasisLabel;
                row.extend([
                    Cell::Num(b.fraction(BasisLabel::R)),
                    Cell::Num(b.fraction(BasisLabel::L)),
                    Cell::Num(b.spin_fraction()),
                ]);
            }
            row
        })
        .collect();
    Ok(Table { headers, rows })
}

pub fn s21_table(cfg: &RunConfig) -> Result<Table> {
    let grid = cfg.sweep.frequency_ghz.values("sweep.f_GHz")?;
    let model = cfg.cavity_model()?;
    model.validate()?;
    let ensemble = model.ensemble_at(cfg.run.field_mt)?;
    let spectrum = transmission(&model.doublet, &ensemble, cfg.run.selection, &grid, &cfg.ports())?;
    Ok(Table {
        headers: vec!["f_GHz".into(), "S21_mag".into()],
        rows: spectrum
            .points
            .iter()
            .map(|p| vec![Cell::Num(p.f_ghz), Cell::Num(p.magnitude)])
            .collect(),
    })
}

pub fn thermo_table(cfg: &RunConfig) -> Result<Table> {
    let grid = cfg.sweep.temperature_k.values("sweep.T_K")?;
    let spin = cfg.spin_params();
    spin.validate()?;
    let b = cfg.run.field_mt;
    let rows = grid
        .iter()
        .map(|&t| {
            let chi = susceptibility_thermal(&spin, b, t)?;
            let pops = populations(&spin, b, t)?;
            Ok(vec![
                Cell::Num(t),
                Cell::Num(chi.chi_plus),
                Cell::Num(chi.chi_minus),
                Cell::Num(pops.n_plus),
                Cell::Num(pops.n_minus),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        headers: ["T_K", "chi_plus", "chi_minus", "N_plus", "N_minus"].map(String::from).to_vec(),
        rows,
    })
}

pub fn fit_json(cfg: &RunConfig, data: &str) -> Result<Vec<u8>> {
    let observations = read_observations(data)?;
    let model = cfg.fit_model()?;
    let (free, bounds) = cfg.fit_parameters()?;
    let result = fit_coupled_modes(&observations, &free, &model, &bounds)?;
    let mut out = serde_json::to_vec_pretty(&result).map_err(|e| Error::Numerical(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(name = "gyrocav", version, about = "Spin ensemble coupled to a gyrotropic whispering-gallery doublet")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; the bundled reference config when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a config value by dotted key, e.g. `run.T_K=5` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Output format (overrides `output.format`).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Level energies over the field grid -> levels.csv
    Levels,
    /// All transition curves over the field grid -> transitions.csv
    Transitions,
    /// Hybridised branches over the field grid -> sweep.csv
    Sweep,
    /// Transmission magnitude over the frequency grid -> s21.csv
    S21,
    /// Susceptibilities and sub-ensemble sizes over the temperature grid -> chi.csv
    Thermo,
    /// Fit the coupled-mode model to observed peaks -> fit.json
    Fit {
        /// Observation CSV (`B_mT,f_GHz[,weight]` or a sweep.csv).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL },
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_NUMERICAL,
        message: format!("{}: {e}", path.display()),
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory, renamed into place once complete.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    let mut tmp = tempfile::Builder::new().prefix(&format!(".{name}.")).tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

fn execute(cli: &Cli) -> std::result::Result<Vec<PathBuf>, Failure> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure {
            code: EXIT_VALIDATION,
            message: format!("config {}: {e}", p.display()),
        })?,
        None => REFERENCE_CONFIG.to_string(),
    };
    let cfg = RunConfig::from_toml_str(&text, &cli.overrides)?;
    let format = cli.format.unwrap_or(cfg.output.format);
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());

    let outputs: Vec<(String, Vec<u8>)> = match &cli.command {
        Command::Levels => vec![levels_table(&cfg)?.render("levels", format)?],
        Command::Transitions => vec![transitions_table(&cfg)?.render("transitions", format)?],
        Command::Sweep => vec![sweep_table(&cfg)?.render("sweep", format)?],
        Command::S21 => vec![s21_table(&cfg)?.render("s21", format)?],
        Command::Thermo => vec![thermo_table(&cfg)?.render("chi", format)?],
        Command::Fit { data } => {
            let text = fs::read_to_string(data).map_err(|e| Failure {
                code: EXIT_VALIDATION,
                message: format!("data {}: {e}", data.display()),
            })?;
            vec![("fit.json".to_string(), fit_json(&cfg, &text)?)]
        }
    };

    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    outputs
        .iter()
        .map(|(name, bytes)| write_atomic(&dir, name, bytes).map_err(|e| io_failure(&dir.join(name), e)))
        .collect()
}

/// Runs the tool on the given arguments (including the program name) and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(13.259), "13.259");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(-2.5e-7), "-2.5e-07");
        assert_eq!(format_float(1.23456789012345e15), "1.23456789012e+15");
        assert_eq!(format_float(100.0), "100");
        assert_eq!(format_float(9.999999999999999), "10");
    }

    #[test]
    fn reference_config_loads() {
        let cfg = RunConfig::reference();
        assert_eq!(cfg.run.selection, Selection::Plus);
        assert_eq!(cfg.sweep.field_mt.values("B").unwrap().len(), 201);
    }

    #[test]
    fn override_nested_key() {
        let cfg = RunConfig::from_toml_str(REFERENCE_CONFIG, &["sweep.B_mT.points=5".into(), "run.T_K=5".into()]).unwrap();
        assert_eq!(cfg.sweep.field_mt.values("B").unwrap().len(), 5);
        assert_eq!(cfg.run.temperature_k, 5.0);
    }

    #[test]
    fn unknown_override_names_key() {
        let err = RunConfig::from_toml_str(REFERENCE_CONFIG, &["spin.zfs_GHz=1".into()]).unwrap_err();
        assert!(err.to_string().contains("spin.zfs_GHz"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn invalid_value_names_key() {
        let err = RunConfig::from_toml_str(REFERENCE_CONFIG, &["doublet_minus.kappa_R_MHz=0".into()]).unwrap_err();
        assert!(err.to_string().contains("doublet_minus.kappa_R_MHz"), "{err}");
    }

    #[test]
    fn log_grid() {
        let g = GridSpec::Range {
            start: 0.01,
            stop: 10.0,
            points: 4,
            spacing: Spacing::Log,
        };
        let v = g.values("T").unwrap();
        assert!((v[1] - 0.1).abs() < 1e-15 && (v[3] - 10.0).abs() < 1e-12);
    }
}
