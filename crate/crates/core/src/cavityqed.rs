//! Hamiltonians for a whispering-gallery doublet coupled to spin
//! sub-ensembles.
//!
//! The doublet is a pair of circularly polarised modes, R and L, linearly
//! coupled through backscattering (`g_RL`). Angular momentum conservation
//! lets L photons drive only the spin-increasing `|+1/2⟩ → |+3/2⟩` line and
//! R photons only the spin-decreasing `|−1/2⟩ → |−3/2⟩` line.
//!
//! [`coupled_mode_matrix`] is the linear (unsaturated-ensemble) model where
//! each sub-ensemble acts as one extra oscillator with collective coupling
//! `g = g̃ √N`. [`build_fock_hamiltonian`] is the full Tavis-Cummings form on
//! a truncated Fock space with individual two-level systems; its
//! single-excitation sector must reproduce the linear model exactly, which
//! is how the linear model is verified.
//!
//! Frequencies are GHz, couplings MHz. Losses never enter here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eigh, ComplexMatrix, HermitianMatrix, C64};
use crate::thermo::PerSpinCoupling;

const MHZ_PER_GHZ: f64 = 1000.0;
/// Largest Fock-space dimension [`build_fock_hamiltonian`] will build.
pub const MAX_FOCK_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDoublet {
    pub f_r_ghz: f64,
    pub f_l_ghz: f64,
    /// Full linewidth of the R mode, MHz.
    pub kappa_r_mhz: f64,
    pub kappa_l_mhz: f64,
    /// Backscatter coupling between R and L, MHz.
    pub g_rl_mhz: f64,
}

impl ModeDoublet {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_r_ghz > 0.0 && self.f_r_ghz.is_finite()) {
            return Err(Error::invalid("doublet.f_R_GHz", "must be finite and > 0"));
        }
        if !(self.f_l_ghz > 0.0 && self.f_l_ghz.is_finite()) {
            return Err(Error::invalid("doublet.f_L_GHz", "must be finite and > 0"));
        }
        if !((self.f_r_ghz - self.f_l_ghz).abs() < 0.01 * self.f_r_ghz) {
            return Err(Error::invalid(
                "doublet.f_L_GHz",
                "R and L must be a near-degenerate pair (|f_R - f_L| < 1% of f_R)",
            ));
        }
        if !(self.kappa_r_mhz > 0.0 && self.kappa_r_mhz.is_finite()) {
            return Err(Error::invalid("doublet.kappa_R_MHz", "must be finite and > 0"));
        }
        if !(self.kappa_l_mhz > 0.0 && self.kappa_l_mhz.is_finite()) {
            return Err(Error::invalid("doublet.kappa_L_MHz", "must be finite and > 0"));
        }
        if !(self.g_rl_mhz >= 0.0 && self.g_rl_mhz.is_finite()) {
            return Err(Error::invalid("doublet.g_RL_MHz", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Collective couplings and transition frequencies of both sub-ensembles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCoupling {
    pub g_plus_mhz: f64,
    pub g_minus_mhz: f64,
    /// ESR linewidth (full width), MHz.
    pub gamma_mhz: f64,
    pub f_plus_ghz: f64,
    pub f_minus_ghz: f64,
}

impl EnsembleCoupling {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_plus_mhz >= 0.0 && self.g_plus_mhz.is_finite()) {
            return Err(Error::invalid("coupling.g_plus_MHz", "must be finite and >= 0"));
        }
        if !(self.g_minus_mhz >= 0.0 && self.g_minus_mhz.is_finite()) {
            return Err(Error::invalid("coupling.g_minus_MHz", "must be finite and >= 0"));
        }
        if !self.f_plus_ghz.is_finite() || !self.f_minus_ghz.is_finite() {
            return Err(Error::invalid("coupling.f_GHz", "transition frequencies must be finite"));
        }
        if !(self.gamma_mhz >= 0.0) {
            return Err(Error::invalid("coupling.gamma_MHz", "must be >= 0"));
        }
        Ok(())
    }
}

/// Which spin line is tuned near the doublet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Photons only.
    None,
    /// Spin-increasing line, coupled to L.
    Plus,
    /// Spin-decreasing line, coupled to R.
    Minus,
    /// Both lines at once (four oscillators).
    Both,
}

impl Selection {
    fn has_plus(self) -> bool {
        matches!(self, Selection::Plus | Selection::Both)
    }

    fn has_minus(self) -> bool {
        matches!(self, Selection::Minus | Selection::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisLabel {
    R,
    L,
    /// Collective mode of the |+1/2⟩ sub-ensemble.
    SpinPlus,
    /// Collective mode of the |−1/2⟩ sub-ensemble.
    SpinMinus,
}

impl BasisLabel {
    pub fn is_spin(self) -> bool {
        matches!(self, BasisLabel::SpinPlus | BasisLabel::SpinMinus)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledModeMatrix {
    pub selection: Selection,
    pub labels: Vec<BasisLabel>,
    pub matrix: HermitianMatrix,
}

impl CoupledModeMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: BasisLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }
}

/// Linear coupled-mode matrix in the basis `(R, L, [S+], [S−])`.
///
/// Selection rules are structural: `S+` couples only to L and `S−` only to
/// R, so the `(R, S+)` and `(L, S−)` elements are identically zero.
pub fn coupled_mode_matrix(
    doublet: &ModeDoublet,
    ensemble: &EnsembleCoupling,
    selection: Selection,
) -> Result<CoupledModeMatrix> {
    ensemble.validate()?;
    if !(doublet.g_rl_mhz >= 0.0) {
        return Err(Error::invalid("doublet.g_RL_MHz", "must be >= 0"));
    }
    let mut labels = vec![BasisLabel::R, BasisLabel::L];
    let mut diag = vec![doublet.f_r_ghz, doublet.f_l_ghz];
    if selection.has_plus() {
        labels.push(BasisLabel::SpinPlus);
        diag.push(ensemble.f_plus_ghz);
    }
    if selection.has_minus() {
        labels.push(BasisLabel::SpinMinus);
        diag.push(ensemble.f_minus_ghz);
    }
    let n = labels.len();
    let mut m = ComplexMatrix::zeros(n);
    for (i, &f) in diag.iter().enumerate() {
        m[(i, i)] = C64::new(f, 0.0);
    }
    let mut couple = |a: usize, b: usize, g_mhz: f64| {
        m[(a, b)] = C64::new(g_mhz / MHZ_PER_GHZ, 0.0);
        m[(b, a)] = C64::new(g_mhz / MHZ_PER_GHZ, 0.0);
    };
    couple(0, 1, doublet.g_rl_mhz);
    for (i, label) in labels.iter().enumerate() {
        match label {
            BasisLabel::SpinPlus => couple(1, i, ensemble.g_plus_mhz),
            BasisLabel::SpinMinus => couple(0, i, ensemble.g_minus_mhz),
            _ => {}
        }
    }
    Ok(CoupledModeMatrix {
        selection,
        labels,
        matrix: HermitianMatrix::new(m)?,
    })
}

/// One hybridised eigenmode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Branch {
    pub frequency_ghz: f64,
    /// Weight of each basis mode, `|v_k|²`; sums to 1.
    pub fractions: Vec<(BasisLabel, f64)>,
}

impl Branch {
    pub fn fraction(&self, label: BasisLabel) -> f64 {
        self.fractions
            .iter()
            .find(|(l, _)| *l == label)
            .map_or(0.0, |&(_, w)| w)
    }

    /// Combined weight of all spin modes.
    pub fn spin_fraction(&self) -> f64 {
        self.fractions
            .iter()
            .filter(|(l, _)| l.is_spin())
            .map(|&(_, w)| w)
            .sum()
    }
}

/// Diagonalises the coupled-mode matrix; branches come out ascending.
pub fn eigenmodes(m: &CoupledModeMatrix) -> Result<Vec<Branch>> {
    let d = eigh(&m.matrix)?;
    Ok((0..m.dim())
        .map(|i| Branch {
            frequency_ghz: d.values[i],
            fractions: m
                .labels
                .iter()
                .enumerate()
                .map(|(k, &l)| (l, d.vectors[(k, i)].norm_sqr()))
                .collect(),
        })
        .collect())
}

/// Microscopic spin content for the Fock-space Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinBath {
    pub per_spin: PerSpinCoupling,
    pub f_plus_ghz: f64,
    pub f_minus_ghz: f64,
    pub n_plus: usize,
    pub n_minus: usize,
}

/// Product state `|n_R, n_L⟩ ⊗ |s_1 … s_N⟩`, plus-ensemble spins first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FockState {
    pub n_r: u32,
    pub n_l: u32,
    /// Spin `i` (0-based) is excited when bit `N - 1 - i` is set, so that
    /// integer order is lexicographic order over `(s_1, …, s_N)`.
    pub spins: u32,
}

impl FockState {
    pub fn excitations(&self) -> u32 {
        self.n_r + self.n_l + self.spins.count_ones()
    }
}

#[derive(Clone, Debug)]
pub struct FockHamiltonian {
    pub n_max: u32,
    pub n_plus: usize,
    pub n_minus: usize,
    pub basis: Vec<FockState>,
    pub matrix: HermitianMatrix,
}

impl FockHamiltonian {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Basis indices with exactly `k` excitations, in basis order.
    pub fn sector(&self, k: u32) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.basis[i].excitations() == k).collect()
    }

    pub fn vacuum_energy_ghz(&self) -> f64 {
        self.matrix[(0, 0)].re
    }
}

/// Tavis-Cummings Hamiltonian with two photon modes and two sub-ensembles
/// on a Fock space truncated at `n_max` photons per mode.
///
/// Terms: `f_R n_R + f_L n_L`, backscatter exchange `g_RL (a_R† a_L + h.c.)`,
/// `±f±/2` per spin, and the excitation-conserving exchanges
/// `g̃+ (σ+ a_L + σ− a_L†)` and `g̃− (σ+ a_R + σ− a_R†)`.
pub fn build_fock_hamiltonian(doublet: &ModeDoublet, bath: &SpinBath, n_max: u32) -> Result<FockHamiltonian> {
    bath.per_spin.validate()?;
    if !(doublet.g_rl_mhz >= 0.0) {
        return Err(Error::invalid("doublet.g_RL_MHz", "must be >= 0"));
    }
    let n_spins = bath.n_plus + bath.n_minus;
    let photon_states = (n_max as usize + 1).pow(2);
    let dim = 1usize
        .checked_shl(n_spins as u32)
        .filter(|_| n_spins < 32)
        .and_then(|s| s.checked_mul(photon_states))
        .unwrap_or(usize::MAX);
    if dim > MAX_FOCK_DIM {
        return Err(Error::TooLarge { dim, max: MAX_FOCK_DIM });
    }
    let spin_states = 1u32 << n_spins;
    let index = |n_r: u32, n_l: u32, spins: u32| -> usize {
        (((n_r * (n_max + 1) + n_l) as usize) << n_spins) | spins as usize
    };
    let bit = |i: usize| 1u32 << (n_spins - 1 - i);

    let mut basis = Vec::with_capacity(dim);
    for n_r in 0..=n_max {
        for n_l in 0..=n_max {
            for spins in 0..spin_states {
                basis.push(FockState { n_r, n_l, spins });
            }
        }
    }

    let g_rl = doublet.g_rl_mhz / MHZ_PER_GHZ;
    let g_plus = bath.per_spin.plus_mhz / MHZ_PER_GHZ;
    let g_minus = bath.per_spin.minus_mhz / MHZ_PER_GHZ;
    let mut m = ComplexMatrix::zeros(dim);
    let link = |m: &mut ComplexMatrix, a: usize, b: usize, amp: f64| {
        m[(a, b)] += C64::new(amp, 0.0);
        m[(b, a)] += C64::new(amp, 0.0);
    };

    for (i, s) in basis.iter().enumerate() {
        let mut e = doublet.f_r_ghz * f64::from(s.n_r) + doublet.f_l_ghz * f64::from(s.n_l);
        for k in 0..n_spins {
            let half = if k < bath.n_plus { bath.f_plus_ghz } else { bath.f_minus_ghz } / 2.0;
            e += if s.spins & bit(k) != 0 { half } else { -half };
        }
        m[(i, i)] = C64::new(e, 0.0);

        // a_R† a_L
        if s.n_l > 0 && s.n_r < n_max {
            let j = index(s.n_r + 1, s.n_l - 1, s.spins);
            link(&mut m, i, j, g_rl * (f64::from(s.n_r + 1) * f64::from(s.n_l)).sqrt());
        }
        for k in 0..n_spins {
            if s.spins & bit(k) != 0 {
                continue;
            }
            let raised = s.spins | bit(k);
            if k < bath.n_plus {
                // σ+ a_L
                if s.n_l > 0 {
                    link(&mut m, i, index(s.n_r, s.n_l - 1, raised), g_plus * f64::from(s.n_l).sqrt());
                }
            } else if s.n_r > 0 {
                // σ+ a_R
                link(&mut m, i, index(s.n_r - 1, s.n_l, raised), g_minus * f64::from(s.n_r).sqrt());
            }
        }
    }

    Ok(FockHamiltonian {
        n_max,
        n_plus: bath.n_plus,
        n_minus: bath.n_minus,
        basis,
        matrix: HermitianMatrix::new(m)?,
    })
}

/// Eigenvalues of the one-excitation sector, ascending, measured from the
/// vacuum energy.
pub fn single_excitation_spectrum(h: &FockHamiltonian) -> Result<Vec<f64>> {
    if h.n_max < 1 {
        return Err(Error::invalid("n_max", "the one-excitation sector needs n_max >= 1"));
    }
    let sector = h.sector(1);
    let block = h.matrix.submatrix(&sector)?;
    let vacuum = h.vacuum_energy_ghz();
    Ok(eigh(&block)?.values.into_iter().map(|e| e - vacuum).collect())
}

/// One-excitation spectrum expected from the linear model: eigenvalues of
/// the coupled-mode matrix with `g± = g̃± √N±`, plus `N± − 1` dark states
/// pinned at each bare spin frequency. Ascending.
pub fn linear_model_single_excitation(doublet: &ModeDoublet, bath: &SpinBath) -> Result<Vec<f64>> {
    let selection = match (bath.n_plus > 0, bath.n_minus > 0) {
        (false, false) => Selection::None,
        (true, false) => Selection::Plus,
        (false, true) => Selection::Minus,
        (true, true) => Selection::Both,
    };
    let ensemble = EnsembleCoupling {
        g_plus_mhz: bath.per_spin.plus_mhz * (bath.n_plus as f64).sqrt(),
        g_minus_mhz: bath.per_spin.minus_mhz * (bath.n_minus as f64).sqrt(),
        gamma_mhz: 0.0,
        f_plus_ghz: bath.f_plus_ghz,
        f_minus_ghz: bath.f_minus_ghz,
    };
    let cm = coupled_mode_matrix(doublet, &ensemble, selection)?;
    let mut values = eigh(&cm.matrix)?.values;
    values.extend(std::iter::repeat_n(bath.f_plus_ghz, bath.n_plus.saturating_sub(1)));
    values.extend(std::iter::repeat_n(bath.f_minus_ghz, bath.n_minus.saturating_sub(1)));
    values.sort_by(f64::total_cmp);
    Ok(values)
}
