//! Six-level Fe³⁺ impurity model in the high-field effective form
//! `E(m, B)/h = zeta(|m|) + g * (mu_B/h) * m * B`.
//!
//! `zeta(1/2) = 0`, `zeta(3/2)` and `zeta(5/2)` are the zero-field offsets of
//! the upper Kramers doublets. Fields are in mT, energies and frequencies in
//! GHz.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bohr magneton over Planck's constant, GHz per tesla.
pub const BOHR_MAGNETON_GHZ_PER_T: f64 = 13.996245;
/// Boltzmann constant over Planck's constant, GHz per kelvin.
pub const BOLTZMANN_GHZ_PER_K: f64 = 20.836619;

const MT_PER_T: f64 = 1000.0;

/// Spin projection `m`, stored as `2m` so that it stays an exact integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct SpinProjection(i8);

impl SpinProjection {
    pub const ALL: [SpinProjection; 6] = [
        SpinProjection(-5),
        SpinProjection(-3),
        SpinProjection(-1),
        SpinProjection(1),
        SpinProjection(3),
        SpinProjection(5),
    ];
    pub const MINUS_HALF: SpinProjection = SpinProjection(-1);
    pub const PLUS_HALF: SpinProjection = SpinProjection(1);
    pub const MINUS_THREE_HALVES: SpinProjection = SpinProjection(-3);
    pub const PLUS_THREE_HALVES: SpinProjection = SpinProjection(3);

    /// From twice the projection, e.g. `from_twice(-3)` is `m = -3/2`.
    pub fn from_twice(twice_m: i8) -> Result<Self> {
        if twice_m.abs() <= 5 && twice_m % 2 != 0 {
            Ok(Self(twice_m))
        } else {
            Err(Error::invalid(
                "m",
                format!("2m = {twice_m} is not one of -5, -3, -1, 1, 3, 5"),
            ))
        }
    }

    pub fn from_f64(m: f64) -> Result<Self> {
        let twice = 2.0 * m;
        if twice.fract() != 0.0 || twice.abs() > 5.0 {
            return Err(Error::invalid("m", format!("{m} is not a valid S = 5/2 projection")));
        }
        Self::from_twice(twice as i8)
    }

    pub fn twice(self) -> i8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub fn flipped(self) -> Self {
        Self(-self.0)
    }

    /// Position in [`SpinProjection::ALL`].
    pub fn index(self) -> usize {
        ((self.0 + 5) / 2) as usize
    }
}

impl TryFrom<i8> for SpinProjection {
    type Error = Error;
    fn try_from(twice: i8) -> Result<Self> {
        Self::from_twice(twice)
    }
}

impl From<SpinProjection> for i8 {
    fn from(m: SpinProjection) -> i8 {
        m.0
    }
}

impl fmt::Display for SpinProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}/2", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinSystemParams {
    /// Zero-field gap between the |±1/2⟩ and |±3/2⟩ doublets, GHz.
    pub zfs_12_32_ghz: f64,
    /// Zero-field gap between the |±3/2⟩ and |±5/2⟩ doublets, GHz.
    pub zfs_32_52_ghz: f64,
    pub g_factor: f64,
    /// Effective number of ions taking part in the interaction.
    pub total_ions: f64,
}

impl SpinSystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zfs_12_32_ghz >= 0.0 && self.zfs_12_32_ghz.is_finite()) {
            return Err(Error::invalid("spin.zfs_12_32_GHz", "must be finite and >= 0"));
        }
        if !(self.zfs_32_52_ghz >= 0.0 && self.zfs_32_52_ghz.is_finite()) {
            return Err(Error::invalid("spin.zfs_32_52_GHz", "must be finite and >= 0"));
        }
        if !(self.g_factor > 0.0 && self.g_factor < 10.0) {
            return Err(Error::invalid("spin.g_factor", "must lie in (0, 10)"));
        }
        if !(self.total_ions > 0.0 && self.total_ions.is_finite()) {
            return Err(Error::invalid("spin.total_ions", "must be finite and > 0"));
        }
        Ok(())
    }

    fn zero_field_offset(&self, m: SpinProjection) -> f64 {
        match m.twice().abs() {
            1 => 0.0,
            3 => self.zfs_12_32_ghz,
            _ => self.zfs_12_32_ghz + self.zfs_32_52_ghz,
        }
    }

    /// Zeeman slope per unit `m`, GHz per mT.
    pub fn zeeman_slope_ghz_per_mt(&self) -> f64 {
        self.g_factor * BOHR_MAGNETON_GHZ_PER_T / MT_PER_T
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinLevel {
    pub m: SpinProjection,
    pub energy_ghz: f64,
}

/// Level energy `E(m, B)/h` in GHz.
pub fn level_energy(params: &SpinSystemParams, m: SpinProjection, field_mt: f64) -> f64 {
    params.zero_field_offset(m) + params.zeeman_slope_ghz_per_mt() * m.value() * field_mt
}

/// All six levels at `field_mt`, ordered by `m` ascending.
pub fn levels(params: &SpinSystemParams, field_mt: f64) -> [SpinLevel; 6] {
    SpinProjection::ALL.map(|m| SpinLevel {
        m,
        energy_ghz: level_energy(params, m, field_mt),
    })
}

/// Photon helicity able to drive a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    /// Left circular, spin +1: drives `Δm = +1`.
    L,
    /// Right circular, spin −1: drives `Δm = −1`.
    R,
    /// `|Δm| != 1`, no single circular photon can drive it.
    None,
}

impl Polarization {
    pub fn for_delta_m(delta_m: i32) -> Self {
        match delta_m {
            1 => Polarization::L,
            -1 => Polarization::R,
            _ => Polarization::None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarization::L => "L",
            Polarization::R => "R",
            Polarization::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub from: SpinProjection,
    pub to: SpinProjection,
    pub delta_m: i32,
    pub frequency_ghz: f64,
    pub polarization: Polarization,
}

pub fn transition(
    params: &SpinSystemParams,
    from: SpinProjection,
    to: SpinProjection,
    field_mt: f64,
) -> Result<Transition> {
    if from == to {
        return Err(Error::invalid("m_to", "transition needs two distinct levels"));
    }
    let delta_m = i32::from(to.twice() - from.twice()) / 2;
    Ok(Transition {
        from,
        to,
        delta_m,
        frequency_ghz: (level_energy(params, to, field_mt) - level_energy(params, from, field_mt)).abs(),
        polarization: Polarization::for_delta_m(delta_m),
    })
}

/// `|+1/2⟩ → |+3/2⟩`, the spin-increasing line driven by L photons.
pub fn plus_transition_ghz(params: &SpinSystemParams, field_mt: f64) -> f64 {
    level_energy(params, SpinProjection::PLUS_THREE_HALVES, field_mt)
        - level_energy(params, SpinProjection::PLUS_HALF, field_mt)
}

/// `|−1/2⟩ → |−3/2⟩`, the spin-decreasing line driven by R photons.
pub fn minus_transition_ghz(params: &SpinSystemParams, field_mt: f64) -> f64 {
    level_energy(params, SpinProjection::MINUS_THREE_HALVES, field_mt)
        - level_energy(params, SpinProjection::MINUS_HALF, field_mt)
}

/// One continuous piece of a level-pair curve over which the absorption
/// direction (lower level → upper level) does not change.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionCurve {
    pub from: SpinProjection,
    pub to: SpinProjection,
    pub delta_m: i32,
    pub polarization: Polarization,
    /// `(B in mT, frequency in GHz)`.
    pub points: Vec<(f64, f64)>,
}

impl TransitionCurve {
    pub fn label(&self) -> String {
        format!("{}->{}", self.from, self.to)
    }

    pub fn is_spin_increasing(&self) -> bool {
        self.delta_m > 0
    }
}

/// Full spectroscopy map over `field_grid_mt`.
///
/// Every pair of levels with `|Δm| <= max_abs_delta_m` contributes curves
/// oriented from the lower to the upper level at each field. Where two
/// levels cross the orientation (and so the sign of `Δm`) flips, and the
/// pair's curve is split there. Degenerate points are oriented towards
/// increasing `m`.
pub fn spectroscopy_map(
    params: &SpinSystemParams,
    field_grid_mt: &[f64],
    max_abs_delta_m: u32,
) -> Result<Vec<TransitionCurve>> {
    params.validate()?;
    if field_grid_mt.is_empty() {
        return Err(Error::invalid("B_grid", "field grid is empty"));
    }
    if field_grid_mt.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("B_grid", "field grid must be strictly ascending"));
    }
    let mut curves = Vec::new();
    for (i, &a) in SpinProjection::ALL.iter().enumerate() {
        for &b in &SpinProjection::ALL[i + 1..] {
            let dm = (i32::from(b.twice()) - i32::from(a.twice())) / 2;
            if dm.unsigned_abs() > max_abs_delta_m {
                continue;
            }
            let mut current: Option<TransitionCurve> = None;
            for &field in field_grid_mt {
                let ea = level_energy(params, a, field);
                let eb = level_energy(params, b, field);
                let (from, to) = if eb >= ea { (a, b) } else { (b, a) };
                let t = transition(params, from, to, field)?;
                match current.as_mut() {
                    Some(c) if c.from == from => c.points.push((field, t.frequency_ghz)),
                    _ => {
                        if let Some(done) = current.take() {
                            curves.push(done);
                        }
                        current = Some(TransitionCurve {
                            from,
                            to,
                            delta_m: t.delta_m,
                            polarization: t.polarization,
                            points: vec![(field, t.frequency_ghz)],
                        });
                    }
                }
            }
            curves.extend(current);
        }
    }
    Ok(curves)
}
