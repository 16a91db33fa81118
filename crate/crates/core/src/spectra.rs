//! Experiment-facing outputs: magnetic-field sweeps of the hybridised
//! branches, transmission spectra, avoided-crossing gaps and peak counting.

use itertools::Itertools;
use serde::Serialize;

use crate::cavityqed::{coupled_mode_matrix, eigenmodes, BasisLabel, Branch, CoupledModeMatrix, EnsembleCoupling, ModeDoublet, Selection};
use crate::error::{Error, Result};
use crate::numerics::{eigh, solve_linear, ComplexMatrix, HermitianMatrix, C64};
use crate::spinmodel::{minus_transition_ghz, plus_transition_ghz, SpinSystemParams};
use crate::thermo::{collective_couplings, CouplingModel, PerSpinCoupling};

const MHZ_PER_GHZ: f64 = 1000.0;
/// Default relative prominence for [`count_peaks`].
pub const DEFAULT_PROMINENCE: f64 = 0.05;

/// Everything needed to evaluate the coupled-mode model at a given field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityModel {
    pub spin: SpinSystemParams,
    pub doublet: ModeDoublet,
    pub per_spin: PerSpinCoupling,
    /// ESR linewidth, MHz.
    pub gamma_mhz: f64,
    pub temperature_k: f64,
    pub coupling_model: CouplingModel,
}

impl CavityModel {
    pub fn validate(&self) -> Result<()> {
        self.spin.validate()?;
        self.doublet.validate()?;
        self.per_spin.validate()?;
        if !(self.gamma_mhz > 0.0 && self.gamma_mhz.is_finite()) {
            return Err(Error::invalid("coupling.gamma_MHz", "must be finite and > 0"));
        }
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::invalid("run.T_K", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Spin line frequencies and thermally weighted collective couplings.
    pub fn ensemble_at(&self, field_mt: f64) -> Result<EnsembleCoupling> {
        let (g_plus, g_minus) = collective_couplings(&self.per_spin, &self.spin, field_mt, self.temperature_k, self.coupling_model)?;
        Ok(EnsembleCoupling {
            g_plus_mhz: g_plus,
            g_minus_mhz: g_minus,
            gamma_mhz: self.gamma_mhz,
            f_plus_ghz: plus_transition_ghz(&self.spin, field_mt),
            f_minus_ghz: minus_transition_ghz(&self.spin, field_mt),
        })
    }

    pub fn matrix_at(&self, field_mt: f64, selection: Selection) -> Result<CoupledModeMatrix> {
        coupled_mode_matrix(&self.doublet, &self.ensemble_at(field_mt)?, selection)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub field_mt: f64,
    /// Ascending in frequency.
    pub branches: Vec<Branch>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub selection: Selection,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn branch_count(&self) -> usize {
        self.rows.first().map_or(0, |r| r.branches.len())
    }
}

fn check_monotone_grid(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "grid is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(name, "grid contains non-finite values"));
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if up || down {
        Ok(())
    } else {
        Err(Error::invalid(name, "grid must be strictly monotone"))
    }
}

fn check_ascending_grid(grid: &[f64], name: &str) -> Result<()> {
    check_monotone_grid(grid, name)?;
    if grid.len() > 1 && grid[1] < grid[0] {
        return Err(Error::invalid(name, "grid must be strictly ascending"));
    }
    Ok(())
}

/// Branch frequencies and compositions at every field in `field_grid_mt`.
///
/// Rows follow the grid order; a reversed grid gives the same rows
/// reversed.
pub fn field_sweep(model: &CavityModel, selection: Selection, field_grid_mt: &[f64]) -> Result<SweepResult> {
    model.validate()?;
    check_monotone_grid(field_grid_mt, "B_mT")?;
    let rows = field_grid_mt
        .iter()
        .map(|&field_mt| {
            let m = model.matrix_at(field_mt, selection)?;
            Ok(SweepRow {
                field_mt,
                branches: eigenmodes(&m)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { selection, rows })
}

fn overlap(a: &Branch, b: &Branch) -> f64 {
    a.fractions
        .iter()
        .map(|&(label, w)| (w * b.fraction(label)).sqrt())
        .sum()
}

/// Follows branch identity through the sweep.
///
/// `result[row][track]` is the index (in ascending frequency order) of the
/// branch that continues `track` in that row. Track `k` starts as branch `k`
/// of the first row; each later row is matched to the previous one by the
/// permutation with the largest total composition overlap, so identities
/// survive level crossings.
pub fn track_branches(sweep: &SweepResult) -> Vec<Vec<usize>> {
    let n = sweep.branch_count();
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(sweep.rows.len());
    for (r, row) in sweep.rows.iter().enumerate() {
        if r == 0 {
            out.push((0..n).collect());
            continue;
        }
        let prev_row = &sweep.rows[r - 1];
        let prev = &out[r - 1];
        let mut best: Option<(f64, Vec<usize>)> = None;
        for perm in (0..n).permutations(n) {
            let score: f64 = (0..n)
                .map(|t| overlap(&prev_row.branches[prev[t]], &row.branches[perm[t]]))
                .sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, perm));
            }
        }
        out.push(best.map(|(_, p)| p).unwrap_or_default());
    }
    out
}

/// Which two branches an avoided-crossing gap is measured between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchPair {
    /// Branches by ascending-frequency index.
    Indices(usize, usize),
    /// In every row, drop the branch with the largest weight on `label`
    /// and take the remaining two (three-branch sweeps).
    ExcludingDominant(BasisLabel),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gap {
    pub field_mt: f64,
    pub gap_mhz: f64,
}

fn dominant(branches: &[Branch], label: BasisLabel) -> usize {
    let mut best = 0;
    for (i, b) in branches.iter().enumerate() {
        if b.fraction(label) > branches[best].fraction(label) {
            best = i;
        }
    }
    best
}

fn separation_mhz(row: &SweepRow, pair: BranchPair) -> Result<f64> {
    let (a, b) = match pair {
        BranchPair::Indices(a, b) => (a, b),
        BranchPair::ExcludingDominant(label) => {
            if row.branches.len() != 3 {
                return Err(Error::invalid("pair", "excluding a dominant branch needs exactly three branches"));
            }
            let skip = dominant(&row.branches, label);
            let rest: Vec<usize> = (0..3).filter(|&i| i != skip).collect();
            (rest[0], rest[1])
        }
    };
    let n = row.branches.len();
    if a >= n || b >= n || a == b {
        return Err(Error::invalid("pair", format!("branch indices ({a}, {b}) invalid for {n} branches")));
    }
    Ok((row.branches[b].frequency_ghz - row.branches[a].frequency_ghz).abs() * MHZ_PER_GHZ)
}

/// Minimum separation between two branches, refined by a parabola through
/// the smallest grid sample and its neighbours.
pub fn extract_gap(sweep: &SweepResult, pair: BranchPair) -> Result<Gap> {
    if sweep.rows.len() < 3 {
        return Err(Error::invalid("sweep", "gap extraction needs at least three rows"));
    }
    let sep: Vec<f64> = sweep.rows.iter().map(|r| separation_mhz(r, pair)).collect::<Result<_>>()?;
    let mut i = 0;
    for k in 1..sep.len() {
        if sep[k] < sep[i] {
            i = k;
        }
    }
    if i == 0 || i == sep.len() - 1 {
        return Err(Error::NoCrossing);
    }
    let (x0, x1, x2) = (sweep.rows[i - 1].field_mt, sweep.rows[i].field_mt, sweep.rows[i + 1].field_mt);
    let (y0, y1, y2) = (sep[i - 1], sep[i], sep[i + 1]);
    // Newton form of the interpolating parabola.
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    let grid_point = Gap { field_mt: x1, gap_mhz: y1 };
    if !(curvature > 0.0) {
        return Ok(grid_point);
    }
    let xv = 0.5 * (x0 + x1) - d01 / (2.0 * curvature);
    let (lo, hi) = if x0 < x2 { (x0, x2) } else { (x2, x0) };
    let xv = xv.clamp(lo, hi);
    let yv = y0 + d01 * (xv - x0) + curvature * (xv - x0) * (xv - x1);
    Ok(Gap {
        field_mt: xv,
        gap_mhz: yv.max(0.0).min(y1),
    })
}

/// Largest distance (MHz) between `bare_ghz` and the branch that carries
/// the most `label` weight, over all rows.
pub fn max_displacement_mhz(sweep: &SweepResult, label: BasisLabel, bare_ghz: f64) -> f64 {
    sweep
        .rows
        .iter()
        .map(|row| (row.branches[dominant(&row.branches, label)].frequency_ghz - bare_ghz).abs() * MHZ_PER_GHZ)
        .fold(0.0, f64::max)
}

/// External coupling of the two antenna ports, as fractions of each photon
/// mode's linewidth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct PortCoupling {
    pub input_r: f64,
    pub input_l: f64,
    pub output_r: f64,
    pub output_l: f64,
}

impl Default for PortCoupling {
    fn default() -> Self {
        Self {
            input_r: 0.25,
            input_l: 0.25,
            output_r: 0.25,
            output_l: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransmissionPoint {
    pub f_ghz: f64,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransmissionSpectrum {
    pub points: Vec<TransmissionPoint>,
}

/// `|S21|` of an arbitrary set of coupled modes.
///
/// The response at frequency `f` is `k_out · (i(H − f) + Γ/2)⁻¹ k_in` with
/// `Γ = diag(linewidths)` and `k = √(external rate)`. All rates are full
/// widths in MHz. The external rates must not exceed the losses they are
/// part of (`Γ − k_in k_inᵀ − k_out k_outᵀ ⪰ 0`), which keeps `|S21| ≤ 1`.
pub fn linear_response(
    h: &HermitianMatrix,
    linewidths_mhz: &[f64],
    input_rates_mhz: &[f64],
    output_rates_mhz: &[f64],
    f_grid_ghz: &[f64],
) -> Result<TransmissionSpectrum> {
    let n = h.dim();
    if linewidths_mhz.len() != n || input_rates_mhz.len() != n || output_rates_mhz.len() != n {
        return Err(Error::invalid("ports", "one linewidth and one port rate per mode is required"));
    }
    if linewidths_mhz.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::invalid("linewidth", "every mode needs a finite linewidth > 0"));
    }
    if input_rates_mhz.iter().chain(output_rates_mhz).any(|&r| !(r >= 0.0 && r.is_finite())) {
        return Err(Error::invalid("ports", "port rates must be finite and >= 0"));
    }
    check_ascending_grid(f_grid_ghz, "f_GHz")?;

    let k_in: Vec<f64> = input_rates_mhz.iter().map(|r| (r / MHZ_PER_GHZ).sqrt()).collect();
    let k_out: Vec<f64> = output_rates_mhz.iter().map(|r| (r / MHZ_PER_GHZ).sqrt()).collect();
    let gamma: Vec<f64> = linewidths_mhz.iter().map(|g| g / MHZ_PER_GHZ).collect();

    let budget = HermitianMatrix::new(ComplexMatrix::from_fn(n, |i, j| {
        let d = if i == j { gamma[i] } else { 0.0 };
        C64::new(d - k_in[i] * k_in[j] - k_out[i] * k_out[j], 0.0)
    }))?;
    let worst = eigh(&budget)?.values[0];
    let scale = gamma.iter().copied().fold(0.0, f64::max);
    if worst < -1e-12 * scale {
        return Err(Error::invalid("ports", "port coupling exceeds the mode losses"));
    }

    let rhs: Vec<C64> = k_in.iter().map(|&k| C64::new(k, 0.0)).collect();
    let points = f_grid_ghz
        .iter()
        .map(|&f| {
            let m = ComplexMatrix::from_fn(n, |i, j| {
                let mut z = h[(i, j)] * C64::new(0.0, 1.0);
                if i == j {
                    z += C64::new(0.5 * gamma[i], -f);
                }
                z
            });
            let a = solve_linear(&m, &rhs)?;
            let s21: C64 = a.iter().zip(&k_out).map(|(x, &k)| x * k).sum();
            Ok(TransmissionPoint { f_ghz: f, magnitude: s21.norm() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransmissionSpectrum { points })
}

/// `|S21|` of the doublet and selected spin line(s), with ports coupled to
/// the R and L modes only.
pub fn transmission(
    doublet: &ModeDoublet,
    ensemble: &EnsembleCoupling,
    selection: Selection,
    f_grid_ghz: &[f64],
    ports: &PortCoupling,
) -> Result<TransmissionSpectrum> {
    doublet.validate()?;
    let m = coupled_mode_matrix(doublet, ensemble, selection)?;
    if selection != Selection::None && !(ensemble.gamma_mhz > 0.0) {
        return Err(Error::invalid("coupling.gamma_MHz", "must be > 0 for transmission"));
    }
    for (name, v) in [
        ("ports.input_R", ports.input_r),
        ("ports.input_L", ports.input_l),
        ("ports.output_R", ports.output_r),
        ("ports.output_L", ports.output_l),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(name, "must lie in [0, 1]"));
        }
    }
    let mut widths = Vec::with_capacity(m.dim());
    let mut inputs = Vec::with_capacity(m.dim());
    let mut outputs = Vec::with_capacity(m.dim());
    for &label in &m.labels {
        let (w, i, o) = match label {
            BasisLabel::R => (doublet.kappa_r_mhz, ports.input_r, ports.output_r),
            BasisLabel::L => (doublet.kappa_l_mhz, ports.input_l, ports.output_l),
            BasisLabel::SpinPlus | BasisLabel::SpinMinus => (ensemble.gamma_mhz, 0.0, 0.0),
        };
        widths.push(w);
        inputs.push(i * w);
        outputs.push(o * w);
    }
    linear_response(&m.matrix, &widths, &inputs, &outputs, f_grid_ghz)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    /// Location refined by a parabola through the top sample and its
    /// neighbours.
    pub f_ghz: f64,
    pub magnitude: f64,
    pub prominence: f64,
}

/// Local maxima whose prominence exceeds `prominence × max |S21|`.
///
/// Prominence is the height of a peak above the higher of its two bases,
/// where each base is the lowest point between the peak and the nearest
/// strictly higher sample on that side (or the end of the spectrum).
pub fn find_peaks(spectrum: &TransmissionSpectrum, prominence: f64) -> Result<Vec<Peak>> {
    if !(prominence > 0.0 && prominence < 1.0) {
        return Err(Error::invalid("prominence", "must lie in (0, 1)"));
    }
    let y: Vec<f64> = spectrum.points.iter().map(|p| p.magnitude).collect();
    let x: Vec<f64> = spectrum.points.iter().map(|p| p.f_ghz).collect();
    let n = y.len();
    let global = y.iter().copied().fold(0.0, f64::max);
    let threshold = prominence * global;
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let top = y[i];
                let mut left_min = top;
                let mut k = i;
                while k > 0 {
                    k -= 1;
                    if y[k] > top {
                        break;
                    }
                    left_min = left_min.min(y[k]);
                }
                let mut right_min = top;
                let mut k = j;
                while k + 1 < n {
                    k += 1;
                    if y[k] > top {
                        break;
                    }
                    right_min = right_min.min(y[k]);
                }
                let prom = top - left_min.max(right_min);
                if prom > threshold {
                    let c = (i + j) / 2;
                    let mut f = x[c];
                    if i == j {
                        let denom = y[c - 1] - 2.0 * y[c] + y[c + 1];
                        if denom < 0.0 {
                            let shift = 0.5 * (y[c - 1] - y[c + 1]) / denom;
                            f += shift * 0.5 * (x[c + 1] - x[c - 1]);
                        }
                    }
                    peaks.push(Peak {
                        f_ghz: f,
                        magnitude: top,
                        prominence: prom,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(peaks)
}

pub fn count_peaks(spectrum: &TransmissionSpectrum, prominence: f64) -> Result<usize> {
    Ok(find_peaks(spectrum, prominence)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentzians(centers: &[f64], width: f64, grid: &[f64]) -> TransmissionSpectrum {
        TransmissionSpectrum {
            points: grid
                .iter()
                .map(|&f| TransmissionPoint {
                    f_ghz: f,
                    magnitude: centers
                        .iter()
                        .map(|c| 1.0 / (1.0 + ((f - c) / (0.5 * width)).powi(2)))
                        .sum(),
                })
                .collect(),
        }
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn one_and_two_lorentzians() {
        let g = grid(-10.0, 10.0, 2001);
        assert_eq!(count_peaks(&lorentzians(&[0.0], 1.0, &g), 0.05).unwrap(), 1);
        assert_eq!(count_peaks(&lorentzians(&[-2.5, 2.5], 1.0, &g), 0.05).unwrap(), 2);
    }

    #[test]
    fn flat_spectrum_has_no_peaks() {
        let g = grid(0.0, 1.0, 11);
        let s = TransmissionSpectrum {
            points: g.iter().map(|&f| TransmissionPoint { f_ghz: f, magnitude: 0.3 }).collect(),
        };
        assert_eq!(count_peaks(&s, 0.05).unwrap(), 0);
    }

    #[test]
    fn plateau_peak_counts_once() {
        let mags = [0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0];
        let s = TransmissionSpectrum {
            points: mags
                .iter()
                .enumerate()
                .map(|(i, &m)| TransmissionPoint { f_ghz: i as f64, magnitude: m })
                .collect(),
        };
        let p = find_peaks(&s, 0.05).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].f_ghz, 3.0);
    }

    #[test]
    fn prominence_bounds() {
        let s = lorentzians(&[0.0], 1.0, &grid(-1.0, 1.0, 11));
        assert!(count_peaks(&s, 0.0).is_err());
        assert!(count_peaks(&s, 1.0).is_err());
    }

    #[test]
    fn single_mode_lorentzian() {
        let h = HermitianMatrix::from_real_symmetric(1, &[10.0]).unwrap();
        let kappa = 2.0;
        let f = grid(9.99, 10.01, 2001);
        let s = linear_response(&h, &[kappa], &[0.5], &[0.5], &f).unwrap();
        let peak = find_peaks(&s, 0.05).unwrap();
        assert_eq!(peak.len(), 1);
        assert!((peak[0].f_ghz - 10.0).abs() < 1e-9);
        assert!((peak[0].magnitude - 0.5).abs() < 1e-12);
        // Half power sits at ±κ/2.
        let at = |df: f64| {
            linear_response(&h, &[kappa], &[0.5], &[0.5], &[10.0 + df]).unwrap().points[0].magnitude
        };
        let half = 0.5 * std::f64::consts::FRAC_1_SQRT_2;
        assert!((at(0.001) - half).abs() < 1e-12);
        assert!((at(-0.001) - half).abs() < 1e-12);
    }

    #[test]
    fn overcoupled_ports_rejected() {
        let h = HermitianMatrix::from_real_symmetric(1, &[10.0]).unwrap();
        assert!(linear_response(&h, &[1.0], &[0.7], &[0.7], &[10.0]).is_err());
    }

    #[test]
    fn descending_frequency_grid_rejected() {
        let h = HermitianMatrix::from_real_symmetric(1, &[10.0]).unwrap();
        assert!(linear_response(&h, &[1.0], &[0.1], &[0.1], &[10.1, 10.0]).is_err());
    }
}
