//! Standard normal cdf, survival function, and quantile.
//!
//! The rounding pmfs and the truncated-normal samplers both need normal tail
//! probabilities and quantiles that stay accurate far into the tails (the
//! truncation intervals produced by large counts can sit many standard
//! deviations from the latent mean). The cdf and survival function are
//! computed through the complementary error function; the quantile uses
//! Wichura's rational approximations, which keep full double accuracy for
//! probabilities down to the smallest normal floats.

use libm::erfc;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density at `z`.
#[inline]
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal survival function `1 - cdf(z)`, accurate for large `z`.
#[inline]
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Standard normal quantile: the `z` with `cdf(z) = p`.
///
/// Returns `-inf` for `p = 0` and `+inf` for `p = 1`; `p` outside `[0, 1]`
/// yields NaN. Relative accuracy is about 1e-15 over the full range of
/// positive double probabilities.
pub fn quantile(p: f64) -> f64 {
    // Rational approximations from Wichura's algorithm PPND16.
    const A: [f64; 8] = [
        3.387_132_872_796_366_608e0,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34e0,
        4.630_337_846_156_545_295_9e0,
        5.769_497_221_460_691_405_5e0,
        3.647_848_324_763_204_605_04e0,
        1.270_458_252_452_368_382_58e0,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87e0,
        1.676_384_830_183_803_849_4e0,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2e0,
        5.463_784_911_164_114_369_9e0,
        1.784_826_539_917_291_335_8e0,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// Quantile of the upper tail: the `z` with `sf(z) = q`.
///
/// Stable for tiny `q`, where `quantile(1 - q)` would lose all precision.
#[inline]
pub fn sf_quantile(q: f64) -> f64 {
    -quantile(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_known_values() {
        assert_relative_eq!(cdf(0.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(cdf(1.0), 0.841_344_746_068_542_9, max_relative = 1e-14);
        assert_relative_eq!(cdf(-1.0), 0.158_655_253_931_457_07, max_relative = 1e-14);
        // Deep lower tail stays positive and accurate through erfc.
        assert_relative_eq!(cdf(-10.0), 7.619_853_024_160_526e-24, max_relative = 1e-12);
        assert_eq!(cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn sf_mirrors_cdf() {
        for &z in &[-8.0, -3.0, -0.5, 0.0, 0.7, 2.0, 6.0, 12.0, 35.0] {
            assert_relative_eq!(sf(z), cdf(-z), max_relative = 1e-14);
        }
    }

    #[test]
    fn quantile_known_values() {
        assert_eq!(quantile(0.5), 0.0);
        assert_relative_eq!(quantile(0.975), 1.959_963_984_540_054_2, max_relative = 1e-14);
        assert_relative_eq!(quantile(0.025), -1.959_963_984_540_054_2, max_relative = 1e-14);
        assert_relative_eq!(quantile(0.841_344_746_068_542_9), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn quantile_cdf_round_trip() {
        // Round-trip each sign through its numerically favorable tail: cdf
        // for negative z, survival function for positive z (probabilities
        // near 1 cannot represent z to full precision).
        for i in -80..=80 {
            let z = i as f64 / 10.0;
            let back = if z <= 0.0 {
                quantile(cdf(z))
            } else {
                sf_quantile(sf(z))
            };
            assert_relative_eq!(back, z, max_relative = 1e-12, epsilon = 1e-12);
        }
        // Tails: start from tiny tail probabilities and check sf round trips.
        for &q in &[1e-12, 1e-30, 1e-100, 1e-250, 1e-300] {
            let z = sf_quantile(q);
            assert!(z > 6.0);
            assert_relative_eq!(sf(z), q, max_relative = 1e-12);
        }
    }

    #[test]
    fn quantile_edge_cases() {
        assert_eq!(quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(quantile(1.0), f64::INFINITY);
        assert!(quantile(-0.1).is_nan());
        assert!(quantile(1.1).is_nan());
        assert!(quantile(f64::NAN).is_nan());
    }
}
