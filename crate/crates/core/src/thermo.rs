//! Thermal statistics of the ion ensemble: Boltzmann occupancies of the six
//! levels, the sizes `N±` of the two TLS sub-ensembles, and the resulting
//! susceptibilities and collective couplings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinmodel::{level_energy, SpinProjection, SpinSystemParams, BOLTZMANN_GHZ_PER_K};

fn check_temperature(temperature_k: f64) -> Result<()> {
    if temperature_k > 0.0 && temperature_k.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("T_K", format!("temperature must be finite and > 0, got {temperature_k}")))
    }
}

/// Boltzmann weights relative to the lowest level (so the ground level has
/// weight exactly 1) and their sum.
fn relative_weights(params: &SpinSystemParams, field_mt: f64, temperature_k: f64) -> ([f64; 6], f64) {
    let energies = SpinProjection::ALL.map(|m| level_energy(params, m, field_mt));
    let ground = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let thermal = BOLTZMANN_GHZ_PER_K * temperature_k;
    let weights = energies.map(|e| (-(e - ground) / thermal).exp());
    let z = weights.iter().sum();
    (weights, z)
}

/// Partition function over the six levels, with energies measured from the
/// instantaneous ground level.
pub fn partition_function(params: &SpinSystemParams, field_mt: f64, temperature_k: f64) -> Result<f64> {
    check_temperature(temperature_k)?;
    Ok(relative_weights(params, field_mt, temperature_k).1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThermalState {
    pub temperature_k: f64,
    pub field_mt: f64,
    /// Fractional occupancy per level, indexed like [`SpinProjection::ALL`].
    pub occupancy: [f64; 6],
}

impl ThermalState {
    pub fn occupancy(&self, m: SpinProjection) -> f64 {
        self.occupancy[m.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Populations {
    pub state: ThermalState,
    /// Ions in |+1/2⟩, available to L photons.
    pub n_plus: f64,
    /// Ions in |−1/2⟩, available to R photons.
    pub n_minus: f64,
}

pub fn populations(params: &SpinSystemParams, field_mt: f64, temperature_k: f64) -> Result<Populations> {
    check_temperature(temperature_k)?;
    let (weights, z) = relative_weights(params, field_mt, temperature_k);
    let occupancy = weights.map(|w| w / z);
    let state = ThermalState {
        temperature_k,
        field_mt,
        occupancy,
    };
    Ok(Populations {
        n_plus: params.total_ions * state.occupancy(SpinProjection::PLUS_HALF),
        n_minus: params.total_ions * state.occupancy(SpinProjection::MINUS_HALF),
        state,
    })
}

/// Relative (dimensionless) susceptibilities seen by L and R photons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Susceptibility {
    pub chi_plus: f64,
    pub chi_minus: f64,
}

/// Net polarisation of each TLS sub-ensemble, `|n(±1/2) − n(±3/2)|` as a
/// fraction of all ions. Both values lie in `[0, 1]` and vanish at infinite
/// temperature.
pub fn susceptibility_thermal(params: &SpinSystemParams, field_mt: f64, temperature_k: f64) -> Result<Susceptibility> {
    let pops = populations(params, field_mt, temperature_k)?;
    let s = &pops.state;
    Ok(Susceptibility {
        chi_plus: (s.occupancy(SpinProjection::PLUS_HALF) - s.occupancy(SpinProjection::PLUS_THREE_HALVES)).abs(),
        chi_minus: (s.occupancy(SpinProjection::MINUS_HALF) - s.occupancy(SpinProjection::MINUS_THREE_HALVES)).abs(),
    })
}

/// Susceptibility implied by a measured collective coupling,
/// `chi = g² / (f0² xi)`, with `g` in MHz and `f0` in GHz.
pub fn susceptibility_from_coupling(coupling_mhz: f64, mode_ghz: f64, filling_factor: f64) -> Result<f64> {
    if !(coupling_mhz >= 0.0 && coupling_mhz.is_finite()) {
        return Err(Error::invalid("g_MHz", "coupling must be finite and >= 0"));
    }
    if !(mode_ghz > 0.0 && mode_ghz.is_finite()) {
        return Err(Error::invalid("f0_GHz", "mode frequency must be finite and > 0"));
    }
    if !(filling_factor > 0.0 && filling_factor <= 1.0) {
        return Err(Error::invalid("xi", "filling factor must lie in (0, 1]"));
    }
    let g_ghz = coupling_mhz / 1000.0;
    Ok(g_ghz * g_ghz / (mode_ghz * mode_ghz * filling_factor))
}

/// Per-spin couplings `g̃±` in MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerSpinCoupling {
    pub plus_mhz: f64,
    pub minus_mhz: f64,
}

impl PerSpinCoupling {
    pub fn uniform(mhz: f64) -> Self {
        Self {
            plus_mhz: mhz,
            minus_mhz: mhz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.plus_mhz >= 0.0 && self.minus_mhz >= 0.0) {
            return Err(Error::invalid("coupling", "per-spin couplings must be >= 0"));
        }
        Ok(())
    }
}

/// How the size of each coupled sub-ensemble follows temperature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    /// `N±` is the occupancy of |±1/2⟩.
    #[default]
    Population,
    /// `N±` is the net polarisation `N_T · chi±`, so that `g²` tracks the
    /// thermal susceptibility.
    Polarization,
}

fn ensemble_sizes(params: &SpinSystemParams, field_mt: f64, temperature_k: f64, model: CouplingModel) -> Result<(f64, f64)> {
    match model {
        CouplingModel::Population => {
            let p = populations(params, field_mt, temperature_k)?;
            Ok((p.n_plus, p.n_minus))
        }
        CouplingModel::Polarization => {
            let chi = susceptibility_thermal(params, field_mt, temperature_k)?;
            Ok((params.total_ions * chi.chi_plus, params.total_ions * chi.chi_minus))
        }
    }
}

/// Collective couplings `g± = g̃± √N±(B, T)` in MHz, with `N±` the
/// thermal occupancies of |±1/2⟩.
pub fn coupling_from_temperature(
    per_spin: &PerSpinCoupling,
    params: &SpinSystemParams,
    field_mt: f64,
    temperature_k: f64,
) -> Result<(f64, f64)> {
    collective_couplings(per_spin, params, field_mt, temperature_k, CouplingModel::Population)
}

pub fn collective_couplings(
    per_spin: &PerSpinCoupling,
    params: &SpinSystemParams,
    field_mt: f64,
    temperature_k: f64,
    model: CouplingModel,
) -> Result<(f64, f64)> {
    per_spin.validate()?;
    let (n_plus, n_minus) = ensemble_sizes(params, field_mt, temperature_k, model)?;
    Ok((per_spin.plus_mhz * n_plus.sqrt(), per_spin.minus_mhz * n_minus.sqrt()))
}

/// Per-spin couplings that reproduce the given collective couplings (MHz)
/// at a reference field and temperature.
pub fn calibrate_per_spin(
    g_plus_mhz: f64,
    g_minus_mhz: f64,
    params: &SpinSystemParams,
    field_mt: f64,
    temperature_k: f64,
    model: CouplingModel,
) -> Result<PerSpinCoupling> {
    let (n_plus, n_minus) = ensemble_sizes(params, field_mt, temperature_k, model)?;
    let per = |g: f64, n: f64, field: &str| {
        if g == 0.0 {
            Ok(0.0)
        } else if n > 0.0 {
            Ok(g / n.sqrt())
        } else {
            Err(Error::invalid(field, "sub-ensemble is empty at the reference point"))
        }
    };
    let out = PerSpinCoupling {
        plus_mhz: per(g_plus_mhz, n_plus, "coupling.g_plus_MHz")?,
        minus_mhz: per(g_minus_mhz, n_minus, "coupling.g_minus_MHz")?,
    };
    out.validate()?;
    Ok(out)
}
