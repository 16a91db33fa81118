//! Parameter extraction: damped least squares on avoided-crossing peak
//! positions, and log-log regression for susceptibility power laws.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cavityqed::{coupled_mode_matrix, EnsembleCoupling, ModeDoublet, Selection};
use crate::error::{Error, Result};
use crate::numerics::{eigh, solve_linear_real};
use crate::spinmodel::{minus_transition_ghz, plus_transition_ghz, SpinSystemParams};
use crate::thermo::{populations, susceptibility_thermal, CouplingModel};

/// Stop once `‖Jᵀr‖` drops below this (residuals in GHz).
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;
/// Central-difference step as a fraction of each parameter's scale.
pub const FD_RELATIVE_STEP: f64 = 1e-6;
const LAMBDA_INITIAL: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
const LAMBDA_MIN: f64 = 1e-15;

/// Peaks observed at one field value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub field_mt: f64,
    /// Ascending.
    pub peaks_ghz: Vec<f64>,
    pub weight: f64,
}

impl Observation {
    pub fn new(field_mt: f64, mut peaks_ghz: Vec<f64>, weight: f64) -> Result<Self> {
        if !field_mt.is_finite() {
            return Err(Error::invalid("B_mT", "must be finite"));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::invalid("weight", format!("must be finite and > 0 (B = {field_mt} mT)")));
        }
        if peaks_ghz.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid("f_GHz", format!("non-finite peak at B = {field_mt} mT")));
        }
        peaks_ghz.sort_by(f64::total_cmp);
        Ok(Self {
            field_mt,
            peaks_ghz,
            weight,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FitParameter {
    #[serde(rename = "f_R_GHz")]
    FR,
    #[serde(rename = "f_L_GHz")]
    FL,
    #[serde(rename = "g_RL_MHz")]
    GRl,
    /// Collective coupling of the selected line at the reference point.
    #[serde(rename = "g_sel_MHz")]
    GSel,
    #[serde(rename = "zfs_12_32_GHz")]
    Zfs,
    #[serde(rename = "g_factor")]
    GFactor,
}

impl FitParameter {
    pub const ALL: [FitParameter; 6] = [Self::FR, Self::FL, Self::GRl, Self::GSel, Self::Zfs, Self::GFactor];

    pub fn name(self) -> &'static str {
        match self {
            Self::FR => "f_R_GHz",
            Self::FL => "f_L_GHz",
            Self::GRl => "g_RL_MHz",
            Self::GSel => "g_sel_MHz",
            Self::Zfs => "zfs_12_32_GHz",
            Self::GFactor => "g_factor",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::invalid("fit.free", format!("unknown parameter {name:?}")))
    }
}

impl fmt::Display for FitParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the coupling of the selected line varies across the sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldDependence {
    /// `g(B) = g_sel √(N(B, T) / N(B_ref, T))`, the thermal sub-ensemble
    /// size following the level shifts.
    #[default]
    Thermal,
    /// `g(B) = g_sel`.
    Constant,
}

/// The model evaluated by [`fit_coupled_modes`]; its values also serve as
/// the initial guess for the free parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitModel {
    pub spin: SpinSystemParams,
    pub doublet: ModeDoublet,
    /// `Plus` or `Minus`.
    pub selection: Selection,
    pub g_sel_mhz: f64,
    pub temperature_k: f64,
    pub reference_field_mt: f64,
    pub coupling_model: CouplingModel,
    pub field_dependence: FieldDependence,
}

impl FitModel {
    pub fn get(&self, p: FitParameter) -> f64 {
        match p {
            FitParameter::FR => self.doublet.f_r_ghz,
            FitParameter::FL => self.doublet.f_l_ghz,
            FitParameter::GRl => self.doublet.g_rl_mhz,
            FitParameter::GSel => self.g_sel_mhz,
            FitParameter::Zfs => self.spin.zfs_12_32_ghz,
            FitParameter::GFactor => self.spin.g_factor,
        }
    }

    pub fn set(&mut self, p: FitParameter, value: f64) {
        match p {
            FitParameter::FR => self.doublet.f_r_ghz = value,
            FitParameter::FL => self.doublet.f_l_ghz = value,
            FitParameter::GRl => self.doublet.g_rl_mhz = value,
            FitParameter::GSel => self.g_sel_mhz = value,
            FitParameter::Zfs => self.spin.zfs_12_32_ghz = value,
            FitParameter::GFactor => self.spin.g_factor = value,
        }
    }

    fn validate(&self) -> Result<()> {
        if !matches!(self.selection, Selection::Plus | Selection::Minus) {
            return Err(Error::invalid("fit.selection", "must be plus or minus"));
        }
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::invalid("run.T_K", "must be finite and > 0"));
        }
        if !self.reference_field_mt.is_finite() {
            return Err(Error::invalid("coupling.reference_B_mT", "must be finite"));
        }
        Ok(())
    }

    fn sub_ensemble(&self, field_mt: f64) -> Result<f64> {
        let n = match self.coupling_model {
            CouplingModel::Population => {
                let p = populations(&self.spin, field_mt, self.temperature_k)?;
                if self.selection == Selection::Plus { p.n_plus } else { p.n_minus }
            }
            CouplingModel::Polarization => {
                let c = susceptibility_thermal(&self.spin, field_mt, self.temperature_k)?;
                if self.selection == Selection::Plus { c.chi_plus } else { c.chi_minus }
            }
        };
        Ok(n)
    }

    fn coupling_at(&self, field_mt: f64) -> Result<f64> {
        match self.field_dependence {
            FieldDependence::Constant => Ok(self.g_sel_mhz),
            FieldDependence::Thermal => {
                let reference = self.sub_ensemble(self.reference_field_mt)?;
                if !(reference > 0.0) {
                    return Err(Error::Numerical(format!(
                        "selected sub-ensemble is empty at the reference field {} mT",
                        self.reference_field_mt
                    )));
                }
                Ok(self.g_sel_mhz * (self.sub_ensemble(field_mt)? / reference).sqrt())
            }
        }
    }

    /// Model branch frequencies at one field, ascending.
    pub fn branches_ghz(&self, field_mt: f64) -> Result<Vec<f64>> {
        let g = self.coupling_at(field_mt)?;
        let (g_plus, g_minus) = if self.selection == Selection::Plus { (g, 0.0) } else { (0.0, g) };
        let ensemble = EnsembleCoupling {
            g_plus_mhz: g_plus,
            g_minus_mhz: g_minus,
            gamma_mhz: 0.0,
            f_plus_ghz: plus_transition_ghz(&self.spin, field_mt),
            f_minus_ghz: minus_transition_ghz(&self.spin, field_mt),
        };
        let m = coupled_mode_matrix(&self.doublet, &ensemble, self.selection)?;
        Ok(eigh(&m.matrix)?.values)
    }
}

/// Order-preserving assignment of sorted peaks to sorted branches that
/// minimises the summed squared distance. Keeping order forbids two peaks
/// from swapping branches. Returns the chosen branch for each peak.
fn associate(peaks: &[f64], branches: &[f64]) -> Vec<usize> {
    let (k, n) = (peaks.len(), branches.len());
    debug_assert!(k <= n);
    // cost[i][j]: best cost placing the first i peaks on the first j branches.
    let mut cost = vec![vec![f64::INFINITY; n + 1]; k + 1];
    cost[0].fill(0.0);
    for i in 1..=k {
        for j in i..=n {
            let skip = cost[i][j - 1];
            let d = peaks[i - 1] - branches[j - 1];
            let take = cost[i - 1][j - 1] + d * d;
            cost[i][j] = if take <= skip { take } else { skip };
        }
    }
    let mut out = vec![0; k];
    let (mut i, mut j) = (k, n);
    while i > 0 {
        let d = peaks[i - 1] - branches[j - 1];
        if cost[i][j] == cost[i - 1][j - 1] + d * d {
            out[i - 1] = j - 1;
            i -= 1;
        }
        j -= 1;
    }
    out
}

fn residuals(model: &FitModel, observations: &[Observation], out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    for obs in observations {
        let branches = model.branches_ghz(obs.field_mt)?;
        let w = obs.weight.sqrt();
        for (p, j) in obs.peaks_ghz.iter().zip(associate(&obs.peaks_ghz, &branches)) {
            let r = w * (p - branches[j]);
            if !r.is_finite() {
                return Err(Error::Numerical(format!("non-finite residual at B = {} mT", obs.field_mt)));
            }
            out.push(r);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub parameters: BTreeMap<String, f64>,
    /// One-sigma errors from `s² (JᵀJ)⁻¹`, with `s²` the reduced chi-square.
    pub std_errors: BTreeMap<String, f64>,
    /// Weighted RMS distance between peaks and their branches, MHz.
    pub residual_rms_mhz: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Half the weighted sum of squares (GHz²) after each accepted step,
    /// starting with the initial guess.
    pub objective_history: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, p: FitParameter) -> Option<f64> {
        self.parameters.get(p.name()).copied()
    }

    pub fn std_error(&self, p: FitParameter) -> Option<f64> {
        self.std_errors.get(p.name()).copied()
    }
}

struct Problem<'a> {
    base: FitModel,
    free: &'a [FitParameter],
    observations: Vec<Observation>,
}

impl Problem<'_> {
    fn model(&self, x: &[f64]) -> FitModel {
        let mut m = self.base;
        for (&p, &v) in self.free.iter().zip(x) {
            m.set(p, v);
        }
        m
    }

    fn residuals(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        residuals(&self.model(x), &self.observations, out)
    }

    /// Column-major central-difference Jacobian.
    fn jacobian(&self, x: &[f64], steps: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
        let mut cols = Vec::with_capacity(x.len());
        let (mut hi, mut lo) = (Vec::with_capacity(m), Vec::with_capacity(m));
        for j in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += steps[j];
            xm[j] -= steps[j];
            self.residuals(&xp, &mut hi)?;
            self.residuals(&xm, &mut lo)?;
            if hi.len() != m || lo.len() != m {
                return Err(Error::Numerical("residual count changed during differentiation".into()));
            }
            cols.push(hi.iter().zip(&lo).map(|(a, b)| (a - b) / (2.0 * steps[j])).collect());
        }
        Ok(cols)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normal_equations(cols: &[Vec<f64>], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = cols.len();
    let mut jtj = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = dot(&cols[a], &cols[b]);
            jtj[a * n + b] = v;
            jtj[b * n + a] = v;
        }
    }
    let grad = cols.iter().map(|c| dot(c, r)).collect();
    (jtj, grad)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Weighted least-squares fit of model branches to observed peaks.
///
/// Each observed peak is compared with the model branch it is assigned to
/// at that field; the assignment preserves frequency order, so peaks never
/// swap branches. `bounds[k]` limits `free[k]` and steps are clamped into
/// it. The observations are sorted internally, so their order does not
/// affect the result.
pub fn fit_coupled_modes(
    observations: &[Observation],
    free: &[FitParameter],
    initial: &FitModel,
    bounds: &[(f64, f64)],
) -> Result<FitResult> {
    initial.validate()?;
    if free.is_empty() {
        return Err(Error::invalid("fit.free", "no free parameters"));
    }
    for (i, p) in free.iter().enumerate() {
        if free[..i].contains(p) {
            return Err(Error::invalid("fit.free", format!("{p} listed twice")));
        }
    }
    if bounds.len() != free.len() {
        return Err(Error::invalid("fit.bounds", "one (lower, upper) pair per free parameter is required"));
    }
    for (&p, &(lo, hi)) in free.iter().zip(bounds) {
        let v = initial.get(p);
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid(format!("fit.bounds.{p}"), "lower bound exceeds upper bound"));
        }
        if !(v >= lo && v <= hi) {
            return Err(Error::invalid(p.name(), format!("initial value {v} outside bounds [{lo}, {hi}]")));
        }
    }
    let data_points: usize = observations.iter().map(|o| o.peaks_ghz.len()).sum();
    if data_points < 2 * free.len() {
        return Err(Error::invalid(
            "observations",
            format!("{data_points} peaks cannot determine {} free parameters (need at least {})", free.len(), 2 * free.len()),
        ));
    }

    let mut sorted = observations.to_vec();
    for o in &mut sorted {
        o.peaks_ghz.sort_by(f64::total_cmp);
    }
    sorted.sort_by(|a, b| {
        a.field_mt
            .total_cmp(&b.field_mt)
            .then_with(|| a.weight.total_cmp(&b.weight))
            .then_with(|| {
                a.peaks_ghz
                    .iter()
                    .zip(&b.peaks_ghz)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(a.peaks_ghz.len().cmp(&b.peaks_ghz.len()))
            })
    });
    let problem = Problem {
        base: *initial,
        free,
        observations: sorted,
    };
    for obs in &problem.observations {
        let n = problem.base.branches_ghz(obs.field_mt)?.len();
        if obs.peaks_ghz.len() > n {
            return Err(Error::invalid(
                "observations",
                format!("{} peaks at B = {} mT but the model has only {n} branches", obs.peaks_ghz.len(), obs.field_mt),
            ));
        }
    }

    let mut x: Vec<f64> = free.iter().map(|&p| initial.get(p)).collect();
    let steps: Vec<f64> = x
        .iter()
        .map(|&v| FD_RELATIVE_STEP * if v != 0.0 { v.abs() } else { 1.0 })
        .collect();

    let mut r = Vec::new();
    problem.residuals(&x, &mut r)?;
    let m = r.len();
    let mut objective = 0.5 * dot(&r, &r);
    let mut history = vec![objective];
    let mut lambda = LAMBDA_INITIAL;
    let n = free.len();
    let mut scale = vec![0.0f64; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut trial_r = Vec::with_capacity(m);

    let mut cols = problem.jacobian(&x, &steps, m)?;
    let (mut jtj, mut grad) = normal_equations(&cols, &r);
    let mut grad_norm = norm(&grad);

    'outer: while iterations < MAX_ITERATIONS {
        if grad_norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        iterations += 1;
        for k in 0..n {
            scale[k] = scale[k].max(jtj[k * n + k]);
        }
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[k * n + k] += lambda * scale[k].max(f64::MIN_POSITIVE);
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let step = match solve_linear_real(n, &a, &rhs) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = x
                .iter()
                .zip(&step)
                .zip(bounds)
                .map(|((xi, si), &(lo, hi))| (xi + si).clamp(lo, hi))
                .collect();
            let trial_objective = match problem.residuals(&trial, &mut trial_r) {
                Ok(()) if trial_r.len() == m => 0.5 * dot(&trial_r, &trial_r),
                Ok(()) => f64::INFINITY,
                Err(e @ Error::Numerical(_)) => return Err(e),
                Err(_) => f64::INFINITY,
            };
            if trial_objective <= objective {
                let moved = trial != x;
                x = trial;
                std::mem::swap(&mut r, &mut trial_r);
                objective = trial_objective;
                history.push(objective);
                lambda = (lambda / 3.0).max(LAMBDA_MIN);
                if !moved {
                    // Pinned against a bound; nothing further to gain.
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > LAMBDA_MAX {
                break 'outer;
            }
        }
        cols = problem.jacobian(&x, &steps, m)?;
        (jtj, grad) = normal_equations(&cols, &r);
        grad_norm = norm(&grad);
    }
    if !converged && grad_norm < GRADIENT_TOLERANCE {
        converged = true;
    }

    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = 2.0 * objective / dof;
    let mut std_errors = BTreeMap::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let se = solve_linear_real(n, &jtj, &e)
            .map(|col| (s2 * col[k]).max(0.0).sqrt())
            .unwrap_or(f64::NAN);
        std_errors.insert(free[k].name().to_string(), se);
    }
    let total_weight: f64 = problem
        .observations
        .iter()
        .map(|o| o.weight * o.peaks_ghz.len() as f64)
        .sum();
    Ok(FitResult {
        parameters: free.iter().zip(&x).map(|(p, &v)| (p.name().to_string(), v)).collect(),
        std_errors,
        residual_rms_mhz: (2.0 * objective / total_weight).sqrt() * 1000.0,
        iterations,
        converged,
        gradient_norm: grad_norm,
        gradient_tolerance: GRADIENT_TOLERANCE,
        max_iterations: MAX_ITERATIONS,
        objective_history: history,
    })
}

/// Synthetic observations: every model branch at every field, unit weight.
pub fn synthesize_observations(model: &FitModel, field_grid_mt: &[f64]) -> Result<Vec<Observation>> {
    model.validate()?;
    field_grid_mt
        .iter()
        .map(|&b| Observation::new(b, model.branches_ghz(b)?, 1.0))
        .collect()
}

/// Reads observations from CSV text.
///
/// Two layouts are accepted: long form with columns `B_mT,f_GHz[,weight]`
/// (one peak per line, lines sharing a field form one observation), and the
/// sweep layout `B_mT,branch1_GHz,branch2_GHz,...` (one observation per
/// line, unit weight, other columns ignored).
pub fn read_observations(text: &str) -> Result<Vec<Observation>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::invalid("observations", format!("unreadable header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let field_col = col("B_mT").ok_or_else(|| Error::invalid("observations", "missing B_mT column"))?;
    let parse = |rec: &csv::StringRecord, i: usize, line: usize| -> Result<f64> {
        let s = rec.get(i).unwrap_or("");
        s.parse::<f64>()
            .map_err(|_| Error::invalid(headers.get(i).unwrap_or("?"), format!("line {line}: cannot parse {s:?}")))
    };

    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::invalid("observations", e.to_string()))?;

    if let Some(f_col) = col("f_GHz") {
        let w_col = col("weight");
        let mut groups: Vec<(f64, Vec<f64>, f64)> = Vec::new();
        for (k, rec) in records.iter().enumerate() {
            let line = k + 2;
            let b = parse(rec, field_col, line)?;
            let f = parse(rec, f_col, line)?;
            let w = match w_col {
                Some(c) => parse(rec, c, line)?,
                None => 1.0,
            };
            match groups.iter_mut().find(|g| g.0 == b) {
                Some(g) => {
                    if g.2 != w {
                        return Err(Error::invalid("weight", format!("line {line}: weights differ within B = {b} mT")));
                    }
                    g.1.push(f);
                }
                None => groups.push((b, vec![f], w)),
            }
        }
        return groups.into_iter().map(|(b, f, w)| Observation::new(b, f, w)).collect();
    }

    let branch_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("branch") && h.ends_with("_GHz"))
        .map(|(i, _)| i)
        .collect();
    if branch_cols.is_empty() {
        return Err(Error::invalid("observations", "need an f_GHz column or branchN_GHz columns"));
    }
    records
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            let line = k + 2;
            let peaks = branch_cols.iter().map(|&c| parse(rec, c, line)).collect::<Result<Vec<_>>>()?;
            Observation::new(parse(rec, field_col, line)?, peaks, 1.0)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// RMS of the residuals in natural-log space.
    pub rms: f64,
    pub samples_used: usize,
}

/// Ordinary least squares of `ln chi = ln A + exponent · ln T` over samples
/// with `T` inside the closed window.
pub fn fit_power_law(samples: &[(f64, f64)], window_k: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = window_k;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("T_window", "need 0 < lower < upper"));
    }
    let mut pts = Vec::new();
    for &(t, chi) in samples {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("T_K", format!("temperature must be finite and > 0, got {t}")));
        }
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::invalid("chi", format!("must be finite and > 0, got {chi} at T = {t} K")));
        }
        if t >= lo && t <= hi {
            pts.push((t.ln(), chi.ln()));
        }
    }
    if pts.len() < 3 {
        return Err(Error::invalid("T_window", format!("{} samples inside the window, need at least 3", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("T_K", "samples inside the window share one temperature"));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let rms = (pts.iter().map(|p| (p.1 - intercept - exponent * p.0).powi(2)).sum::<f64>() / k).sqrt();
    Ok(PowerLawFit {
        exponent,
        amplitude: intercept.exp(),
        rms,
        samples_used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn association_keeps_order() {
        assert_eq!(associate(&[1.0, 2.0, 3.0], &[1.1, 2.1, 2.9]), vec![0, 1, 2]);
        assert_eq!(associate(&[2.0], &[1.0, 2.1, 5.0]), vec![1]);
        // Both peaks nearest to the middle branch: order still forces distinct branches.
        assert_eq!(associate(&[1.9, 2.1], &[0.0, 2.0, 10.0]), vec![0, 1]);
    }

    #[test]
    fn exact_power_law() {
        let s: Vec<(f64, f64)> = (1..=20).map(|i| (0.1 * i as f64, 3.0 / (0.1 * i as f64))).collect();
        let fit = fit_power_law(&s, (0.1, 2.0)).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-9);
        assert!((fit.amplitude - 3.0).abs() < 1e-9);
    }

    #[test]
    fn power_law_rejects_bad_input() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)], (0.5, 4.0)).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.5)], (0.5, 4.0)).is_err());
    }

    #[test]
    fn long_and_wide_csv() {
        let long = "B_mT,f_GHz,weight\n40,13.2,1\n40,13.3,1\n41,13.25,2\n";
        let obs = read_observations(long).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].peaks_ghz, vec![13.2, 13.3]);
        assert_eq!(obs[1].weight, 2.0);
        let wide = "B_mT,branch1_GHz,branch2_GHz,frac_R1\n40,13.3,13.2,0.5\n";
        let obs = read_observations(wide).unwrap();
        assert_eq!(obs[0].peaks_ghz, vec![13.2, 13.3]);
    }

    #[test]
    fn inconsistent_weights_rejected() {
        let long = "B_mT,f_GHz,weight\n40,13.2,1\n40,13.3,2\n";
        assert!(read_observations(long).is_err());
    }

    #[test]
    fn parameter_names_round_trip() {
        for p in FitParameter::ALL {
            assert_eq!(FitParameter::from_name(p.name()).unwrap(), p);
        }
        assert!(FitParameter::from_name("g_plus").is_err());
    }
}
