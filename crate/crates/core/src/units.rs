//! dB / linear conversions and noise helpers.

/// Boltzmann thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Bandwidth of one LTE resource block.
pub const RB_BANDWIDTH_HZ: f64 = 180e3;

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Thermal noise power in dBm over `n_rbs` resource blocks including the receiver noise figure.
pub fn noise_power_dbm(density_dbm_hz: f64, n_rbs: u32, noise_figure_db: f64) -> f64 {
    density_dbm_hz + lin_to_db(f64::from(n_rbs) * RB_BANDWIDTH_HZ) + noise_figure_db
}

/// Power sum of dB values, in dB. An empty sum is `-inf`.
pub fn db_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    lin_to_db(values.into_iter().map(db_to_lin).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for db in [-120.0, -3.0, 0.0, 17.5] {
            assert!((lin_to_db(db_to_lin(db)) - db).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_over_fifty_rbs() {
        // -174 + 10log10(9 MHz) + 5
        let n = noise_power_dbm(-174.0, 50, 5.0);
        assert!((n - (-99.457_574_905_606_75)).abs() < 1e-9, "{n}");
    }

    #[test]
    fn empty_sum_is_neg_inf() {
        assert_eq!(db_sum(std::iter::empty()), f64::NEG_INFINITY);
    }
}
