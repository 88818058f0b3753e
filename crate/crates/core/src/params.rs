//! Control parameters of the three-qubit protocol.
//!
//! All quantities are plain numbers in units where ħ = 1. By convention the
//! modulator frequency sets the energy scale (`omega_m = 1`); the library does
//! not enforce that, the CLI config loader does.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub omega_m: f64,
    pub omega_1: f64,
    pub omega_2: f64,
    pub j_m1: f64,
    pub j_12: f64,
    /// Drive amplitude Ω of `Ω cos(ω_d t) σ_m^x`.
    pub drive_amp: f64,
    /// Interaction-on drive frequency; solved for when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_d_on: Option<f64>,
    pub omega_d_off: f64,
}

impl ProtocolParams {
    /// Single-parameter scan baseline: ω_2 = 1.0017, J_m1 = 0.0035,
    /// J_12 = 1e-4, Ω = 0.07, ω_d^off = 1.004.
    pub fn baseline() -> Self {
        Self {
            omega_m: 1.0,
            omega_1: 1.0,
            omega_2: 1.0017,
            j_m1: 0.0035,
            j_12: 1.0e-4,
            drive_amp: 0.07,
            omega_d_on: None,
            omega_d_off: 1.004,
        }
    }

    /// Jointly optimized operating point of the reference calibration.
    pub fn optimized_reference() -> Self {
        Self {
            omega_m: 1.0,
            omega_1: 1.0,
            omega_2: 1.000514,
            j_m1: 0.00216,
            j_12: 3.71e-5,
            drive_amp: 0.0876,
            omega_d_on: None,
            omega_d_off: 1.004,
        }
    }

    /// Frequencies must be finite and positive; couplings and drive amplitude
    /// finite and non-negative (zero is a legal degenerate construction).
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_m", self.omega_m),
            ("omega_1", self.omega_1),
            ("omega_2", self.omega_2),
            ("omega_d_off", self.omega_d_off),
        ];
        for (field, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParam {
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        let non_negative = [
            ("j_m1", self.j_m1),
            ("j_12", self.j_12),
            ("drive_amp", self.drive_amp),
        ];
        for (field, v) in non_negative {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParam {
                    field,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        if let Some(v) = self.omega_d_on {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParam {
                    field: "omega_d_on",
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Soft check of the working hierarchy Ω ≫ J_m1 ≳ J_12. Returns
    /// human-readable warnings, never an error.
    pub fn hierarchy_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.drive_amp < 5.0 * self.j_m1 {
            out.push(format!(
                "drive_amp = {} is not much larger than j_m1 = {}",
                self.drive_amp, self.j_m1
            ));
        }
        if self.j_m1 < 0.5 * self.j_12 {
            out.push(format!(
                "j_m1 = {} is well below j_12 = {}",
                self.j_m1, self.j_12
            ));
        }
        out
    }

    pub fn get(&self, param: Param) -> f64 {
        match param {
            Param::OmegaM => self.omega_m,
            Param::Omega1 => self.omega_1,
            Param::Omega2 => self.omega_2,
            Param::JM1 => self.j_m1,
            Param::J12 => self.j_12,
            Param::DriveAmp => self.drive_amp,
            Param::OmegaDOff => self.omega_d_off,
        }
    }

    /// Copy with one parameter replaced. Any cached `omega_d_on` is dropped
    /// unless the replaced parameter is `omega_d_off`, which does not enter
    /// the on-regime resonance condition.
    pub fn with(&self, param: Param, value: f64) -> Self {
        let mut p = *self;
        match param {
            Param::OmegaM => p.omega_m = value,
            Param::Omega1 => p.omega_1 = value,
            Param::Omega2 => p.omega_2 = value,
            Param::JM1 => p.j_m1 = value,
            Param::J12 => p.j_12 = value,
            Param::DriveAmp => p.drive_amp = value,
            Param::OmegaDOff => p.omega_d_off = value,
        }
        if param != Param::OmegaDOff {
            p.omega_d_on = None;
        }
        p
    }
}

/// Names of the tunable scalar parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    OmegaM,
    #[serde(rename = "omega_1")]
    Omega1,
    #[serde(rename = "omega_2")]
    Omega2,
    #[serde(rename = "j_m1")]
    JM1,
    #[serde(rename = "j_12")]
    J12,
    DriveAmp,
    OmegaDOff,
}

impl Param {
    pub const ALL: [Param; 7] = [
        Param::OmegaM,
        Param::Omega1,
        Param::Omega2,
        Param::JM1,
        Param::J12,
        Param::DriveAmp,
        Param::OmegaDOff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::OmegaM => "omega_m",
            Param::Omega1 => "omega_1",
            Param::Omega2 => "omega_2",
            Param::JM1 => "j_m1",
            Param::J12 => "j_12",
            Param::DriveAmp => "drive_amp",
            Param::OmegaDOff => "omega_d_off",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParam {
                field: "parameter name",
                reason: format!("unknown parameter `{s}`"),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_drive_is_rejected_with_field_name() {
        let p = ProtocolParams {
            drive_amp: -0.1,
            ..ProtocolParams::baseline()
        };
        match p.validate() {
            Err(Error::InvalidParam { field, .. }) => assert_eq!(field, "drive_amp"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_couplings_are_legal() {
        let p = ProtocolParams {
            j_m1: 0.0,
            j_12: 0.0,
            drive_amp: 0.0,
            ..ProtocolParams::baseline()
        };
        assert!(p.validate().is_ok());
    }

    #[test]
    fn with_drops_cached_on_frequency() {
        let mut p = ProtocolParams::baseline();
        p.omega_d_on = Some(0.99);
        assert_eq!(p.with(Param::J12, 2e-4).omega_d_on, None);
        assert_eq!(p.with(Param::OmegaDOff, 1.005).omega_d_on, Some(0.99));
    }

    #[test]
    fn param_names_round_trip() {
        for p in Param::ALL {
            assert_eq!(p.name().parse::<Param>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
    }

    #[test]
    fn hierarchy_flags_weak_drive() {
        let p = ProtocolParams {
            drive_amp: 0.005,
            ..ProtocolParams::baseline()
        };
        assert_eq!(p.hierarchy_warnings().len(), 1);
        assert!(ProtocolParams::baseline().hierarchy_warnings().is_empty());
    }
}
