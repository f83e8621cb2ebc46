//! Open-loop PUSCH power control with per-UE-class `alpha`/`P0` and
//! closed-loop TPC accumulation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::deploy::UeKind;
use crate::error::ConfigError;

/// Legal UE-specific P0 range in dB (extended).
pub const P0_UE_RANGE: (i32, i32) = (-16, 15);
/// Range supported before the extension.
pub const P0_UE_LEGACY_RANGE: (i32, i32) = (-8, 7);
/// Fractional pathloss compensation factors that may be configured.
pub const ALPHA_VALUES: [f64; 8] = [0.0, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Which range a valid UE-specific P0 falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P0Range {
    Legacy,
    Extended,
}

/// Check a UE-specific P0 against the extended range and classify it.
pub fn validate_p0_ue(value: i32) -> Result<P0Range, ConfigError> {
    let (lo, hi) = P0_UE_RANGE;
    if !(lo..=hi).contains(&value) {
        return Err(ConfigError::new(
            "p0_ue_specific",
            format!("{value} dB outside the legal range [{lo}, {hi}] dB"),
        ));
    }
    let (llo, lhi) = P0_UE_LEGACY_RANGE;
    Ok(if (llo..=lhi).contains(&value) {
        P0Range::Legacy
    } else {
        P0Range::Extended
    })
}

pub fn validate_alpha(alpha: f64) -> Result<(), ConfigError> {
    if ALPHA_VALUES.iter().any(|&a| (a - alpha).abs() < 1e-9) {
        Ok(())
    } else {
        Err(ConfigError::new(
            "alpha",
            format!("{alpha} is not one of {ALPHA_VALUES:?}"),
        ))
    }
}

/// Open-loop parameters of one UE class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerClass {
    pub alpha: f64,
    pub p0_ue_specific: i32,
}

impl Default for PowerClass {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            p0_ue_specific: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerControlConfig {
    /// Cell-specific nominal P0, dBm per RB.
    pub p0_nominal: f64,
    pub p_cmax: f64,
    pub tpc_step: f64,
    /// Lower bound on the power reachable through TPC accumulation.
    pub min_power: f64,
    /// Class used by UE kinds without an entry in `classes`.
    pub default_class: PowerClass,
    #[serde(default)]
    pub classes: BTreeMap<UeKind, PowerClass>,
}

impl Default for PowerControlConfig {
    fn default() -> Self {
        Self {
            p0_nominal: -87.0,
            p_cmax: 23.0,
            tpc_step: 1.0,
            min_power: -40.0,
            default_class: PowerClass::default(),
            classes: BTreeMap::new(),
        }
    }
}

impl PowerControlConfig {
    pub fn class_for(&self, kind: UeKind) -> PowerClass {
        self.classes.get(&kind).copied().unwrap_or(self.default_class)
    }

    /// Give every terrestrial kind one class and aerial UEs another.
    pub fn with_terrestrial_and_aerial(mut self, terrestrial: PowerClass, aerial: PowerClass) -> Self {
        self.classes.insert(UeKind::TerrestrialIndoor, terrestrial);
        self.classes.insert(UeKind::TerrestrialOutdoor, terrestrial);
        self.classes.insert(UeKind::Aerial, aerial);
        self
    }

    pub fn params_for(&self, kind: UeKind) -> UePowerParams {
        let c = self.class_for(kind);
        UePowerParams {
            p0_nominal: self.p0_nominal,
            p0_ue_specific: f64::from(c.p0_ue_specific),
            alpha: c.alpha,
            p_cmax: self.p_cmax,
        }
    }

    /// Validate all classes; returns the kinds configured with extended-range P0.
    pub fn validate(&self) -> Result<Vec<Option<UeKind>>, ConfigError> {
        let prefix = |f: &str, e: ConfigError| ConfigError::new(format!("{f}.{}", e.field), e.message);
        let mut extended = Vec::new();
        let all = std::iter::once((None, &self.default_class)).chain(self.classes.iter().map(|(k, c)| (Some(*k), c)));
        for (kind, class) in all {
            let f = match kind {
                None => "default_class".to_string(),
                Some(k) => format!("classes.{}", k.name()),
            };
            validate_alpha(class.alpha).map_err(|e| prefix(&f, e))?;
            if validate_p0_ue(class.p0_ue_specific).map_err(|e| prefix(&f, e))? == P0Range::Extended {
                extended.push(kind);
            }
        }
        if !(self.tpc_step > 0.0) {
            return Err(ConfigError::new("tpc_step", "must be positive"));
        }
        if !(self.min_power < self.p_cmax) {
            return Err(ConfigError::new("min_power", "must be below p_cmax"));
        }
        Ok(extended)
    }
}

/// Resolved open-loop parameters for one UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UePowerParams {
    pub p0_nominal: f64,
    pub p0_ue_specific: f64,
    pub alpha: f64,
    pub p_cmax: f64,
}

impl UePowerParams {
    /// Power before the `p_cmax` clamp.
    pub fn open_loop(&self, m_rbs: u32, pathloss: f64, tpc_offset: f64) -> f64 {
        10.0 * f64::from(m_rbs).log10() + self.p0_nominal + self.p0_ue_specific + self.alpha * pathloss + tpc_offset
    }
}

/// PUSCH transmit power in dBm over `m_rbs` resource blocks.
pub fn pusch_power(params: &UePowerParams, m_rbs: u32, pathloss: f64, tpc_offset: f64) -> f64 {
    debug_assert!(m_rbs >= 1);
    params.p_cmax.min(params.open_loop(m_rbs, pathloss.max(0.0), tpc_offset))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TpcCommand {
    Up,
    Down,
    Hold,
}

/// Accumulated closed-loop offset `f` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TpcState {
    pub offset: f64,
}

/// Apply one TPC command.
pub fn apply_tpc(state: TpcState, command: TpcCommand, step: f64) -> TpcState {
    let offset = match command {
        TpcCommand::Up => state.offset + step,
        TpcCommand::Down => state.offset - step,
        TpcCommand::Hold => state.offset,
    };
    TpcState { offset }
}

/// Apply a TPC command without winding the accumulator past the power limits:
/// up-steps are dropped once the UE is at `p_cmax`, down-steps once at `min_power`.
pub fn apply_tpc_bounded(
    state: TpcState,
    command: TpcCommand,
    step: f64,
    params: &UePowerParams,
    m_rbs: u32,
    pathloss: f64,
    min_power: f64,
) -> TpcState {
    let current = params.open_loop(m_rbs, pathloss, state.offset);
    match command {
        TpcCommand::Up if current >= params.p_cmax => state,
        TpcCommand::Down if current <= min_power => state,
        _ => apply_tpc(state, command, step),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(alpha: f64, p0_total: f64) -> UePowerParams {
        UePowerParams {
            p0_nominal: p0_total,
            p0_ue_specific: 0.0,
            alpha,
            p_cmax: 23.0,
        }
    }

    #[test]
    fn no_compensation() {
        assert_eq!(pusch_power(&params(0.0, -80.0), 1, 120.0, 0.0), -80.0);
    }

    #[test]
    fn full_compensation_receives_p0() {
        let p = pusch_power(&params(1.0, -100.0), 1, 100.0, 0.0);
        assert_eq!(p, 0.0);
        assert_eq!(p - 100.0, -100.0);
    }

    #[test]
    fn fractional_compensation_hand_value() {
        let p = pusch_power(&params(0.8, -90.0), 10, 110.0, 0.0);
        assert!((p - 8.0).abs() < 1e-12, "{p}");
    }

    #[test]
    fn p0_range_gate() {
        assert_eq!(validate_p0_ue(-16), Ok(P0Range::Extended));
        assert_eq!(validate_p0_ue(15), Ok(P0Range::Extended));
        assert_eq!(validate_p0_ue(-8), Ok(P0Range::Legacy));
        assert_eq!(validate_p0_ue(7), Ok(P0Range::Legacy));
        let e = validate_p0_ue(16).unwrap_err();
        assert!(e.message.contains("[-16, 15]"), "{e}");
        assert!(validate_p0_ue(-17).is_err());
    }

    #[test]
    fn alpha_set() {
        for a in ALPHA_VALUES {
            validate_alpha(a).unwrap();
        }
        assert!(validate_alpha(0.75).is_err());
    }

    #[test]
    fn config_validation_names_class() {
        let cfg = PowerControlConfig::default().with_terrestrial_and_aerial(
            PowerClass { alpha: 1.0, p0_ue_specific: 0 },
            PowerClass { alpha: 0.7, p0_ue_specific: 16 },
        );
        let e = cfg.validate().unwrap_err();
        assert_eq!(e.field, "classes.aerial.p0_ue_specific");
        let ok = PowerControlConfig::default().with_terrestrial_and_aerial(
            PowerClass { alpha: 1.0, p0_ue_specific: 0 },
            PowerClass { alpha: 0.7, p0_ue_specific: -12 },
        );
        assert_eq!(ok.validate().unwrap(), vec![Some(UeKind::Aerial)]);
    }

    #[test]
    fn tpc_steps() {
        let s = TpcState::default();
        assert_eq!(apply_tpc(s, TpcCommand::Up, 1.0).offset, 1.0);
        assert_eq!(apply_tpc(s, TpcCommand::Hold, 3.0).offset, 0.0);
        assert_eq!(apply_tpc(s, TpcCommand::Down, 3.0).offset, -3.0);
    }

    #[test]
    fn repeated_up_saturates_at_pcmax() {
        let p = params(0.8, -90.0);
        let mut s = TpcState::default();
        for _ in 0..30 {
            s = apply_tpc(s, TpcCommand::Up, 3.0);
        }
        assert_eq!(pusch_power(&p, 10, 110.0, s.offset), 23.0);

        let mut b = TpcState::default();
        for _ in 0..30 {
            b = apply_tpc_bounded(b, TpcCommand::Up, 3.0, &p, 10, 110.0, -40.0);
        }
        // accumulation stops at the first step reaching p_cmax: 8 + 5·3 = 23
        assert_eq!(b.offset, 15.0);
        for _ in 0..100 {
            b = apply_tpc_bounded(b, TpcCommand::Down, 3.0, &p, 10, 110.0, -40.0);
        }
        assert!(p.open_loop(10, 110.0, b.offset) <= -40.0);
        assert!(p.open_loop(10, 110.0, b.offset) > -43.0);
    }

    #[test]
    fn legacy_single_class_is_kind_independent() {
        let cfg = PowerControlConfig {
            default_class: PowerClass { alpha: 0.8, p0_ue_specific: 5 },
            ..PowerControlConfig::default()
        };
        let a = cfg.params_for(UeKind::Aerial);
        let t = cfg.params_for(UeKind::TerrestrialIndoor);
        assert_eq!(pusch_power(&a, 50, 100.0, 0.0), pusch_power(&t, 50, 100.0, 0.0));
    }

    proptest! {
        #[test]
        fn clamp_and_monotonicity(pl in 0.0..180.0f64, dpl in 0.0..20.0f64, m in 1u32..100, f in -10.0..10.0f64,
                                  ai in 0usize..8, p0 in -120.0..-60.0f64) {
            let p = params(ALPHA_VALUES[ai], p0);
            let base = pusch_power(&p, m, pl, f);
            prop_assert!(base <= p.p_cmax);
            prop_assert!(pusch_power(&p, m, pl + dpl, f) >= base);
            prop_assert!(pusch_power(&p, m + 1, pl, f) >= base);
            prop_assert!(pusch_power(&p, m, pl, f + 1.0) >= base);
            prop_assert!(pusch_power(&params(ALPHA_VALUES[ai], p0 + 1.0), m, pl, f) >= base);
            if ai < 7 {
                prop_assert!(pusch_power(&params(ALPHA_VALUES[ai + 1], p0), m, pl, f) >= base);
            }
        }

        #[test]
        fn class_separation(pl in 0.0..160.0f64, ai in 0usize..8, bi in 0usize..8, p0a in -16i32..=15, p0b in -16i32..=15) {
            let cfg = PowerControlConfig { p_cmax: 1e9, ..PowerControlConfig::default() }.with_terrestrial_and_aerial(
                PowerClass { alpha: ALPHA_VALUES[ai], p0_ue_specific: p0a },
                PowerClass { alpha: ALPHA_VALUES[bi], p0_ue_specific: p0b },
            );
            let t = pusch_power(&cfg.params_for(UeKind::TerrestrialOutdoor), 10, pl, 0.0);
            let a = pusch_power(&cfg.params_for(UeKind::Aerial), 10, pl, 0.0);
            let expected = (ALPHA_VALUES[bi] - ALPHA_VALUES[ai]) * pl + f64::from(p0b - p0a);
            prop_assert!((a - t - expected).abs() < 1e-9);
        }
    }
}
