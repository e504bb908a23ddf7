//! Frequency ratio helpers. Cents are always taken against an explicit reference.

pub const CENTS_PER_OCTAVE: f64 = 1200.0;

/// Interval from `reference` to `freq` in cents.
#[inline]
pub fn cents_between(freq: f64, reference: f64) -> f64 {
    CENTS_PER_OCTAVE * (freq / reference).log2()
}

/// `reference` transposed by `cents`.
#[inline]
pub fn transpose(reference: f64, cents: f64) -> f64 {
    reference * (cents / CENTS_PER_OCTAVE).exp2()
}

/// Wraps a cent value into `[0, 1200)`.
#[inline]
pub fn fold_octave(cents: f64) -> f64 {
    let folded = cents.rem_euclid(CENTS_PER_OCTAVE);
    // rem_euclid can round up to exactly the modulus for tiny negative inputs
    if folded >= CENTS_PER_OCTAVE {
        0.0
    } else {
        folded
    }
}

/// Signed circular difference `a - b` on a circle of circumference `period`,
/// in `(-period/2, period/2]`.
#[inline]
pub fn circular_diff(a: f64, b: f64, period: f64) -> f64 {
    let half = period / 2.0;
    let d = (a - b).rem_euclid(period);
    if d > half {
        d - period
    } else {
        d
    }
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn amplitude_to_db(amplitude: f64) -> f64 {
    20.0 * amplitude.max(f64::MIN_POSITIVE).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn octave_is_1200() {
        assert!((cents_between(880.0, 440.0) - 1200.0).abs() < 1e-12);
        assert!((transpose(440.0, -1200.0) - 220.0).abs() < 1e-12);
    }

    #[test]
    fn fold_wraps_negative() {
        assert!((fold_octave(-100.0) - 1100.0).abs() < 1e-12);
        assert_eq!(fold_octave(2400.0), 0.0);
        assert_eq!(fold_octave(-1e-17), 0.0);
    }

    #[test]
    fn circular_diff_range() {
        assert!((circular_diff(95.0, 5.0, 100.0) - (-10.0)).abs() < 1e-12);
        assert!((circular_diff(5.0, 95.0, 100.0) - 10.0).abs() < 1e-12);
        assert_eq!(circular_diff(50.0, 0.0, 100.0), 50.0);
    }
}
