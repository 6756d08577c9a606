//! Shared numeric kernels: normal CDF/quantile, log-gamma, grid rounding.
//!
//! The truncated-normal density and sampler need the normal CDF at close to
//! machine accuracy in both tails; the polynomial erf in `statrs` only
//! reaches ~1e-11, so the complementary error function here is Cody's
//! rational Chebyshev approximation (relative error below ~1.5e-16 for
//! positive arguments). The quantile seeds from `statrs` and is polished with
//! Newton steps against this CDF.

pub use statrs::function::gamma::ln_gamma;

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// 1/sqrt(pi)
const SQRPI: f64 = 0.564_189_583_547_756_287;
const THRESH: f64 = 0.46875;
/// erfc underflows to 0 past this argument
const XBIG: f64 = 26.543;

const A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
const C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

/// erf(x) for |x| <= THRESH via the rational approximation in x^2.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

/// erfc(y)*exp(y^2) for THRESH < y <= 4.
fn erfcx_mid(y: f64) -> f64 {
    let mut num = C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + C[i]) * y;
        den = (den + D[i]) * y;
    }
    (num + C[7]) / (den + D[7])
}

/// erfc(y)*exp(y^2) for y > 4.
fn erfcx_far(y: f64) -> f64 {
    let z = 1.0 / (y * y);
    let mut num = P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + P[i]) * z;
        den = (den + Q[i]) * z;
    }
    let r = z * (num + P[4]) / (den + Q[4]);
    (SQRPI - r) / y
}

/// exp(-y^2) computed with the argument split to avoid rounding the square.
fn exp_neg_square(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Complementary error function, Cody's algorithm.
pub fn erfc_cody(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= THRESH {
        return 1.0 - erf_small(x);
    } else if y <= 4.0 {
        exp_neg_square(y) * erfcx_mid(y)
    } else if y < XBIG {
        exp_neg_square(y) * erfcx_far(y)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF, accurate in the lower tail.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc_cody(-z / SQRT_2)
}

/// Upper tail `P(Z > z)`, accurate for large `z`.
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc_cody(z / SQRT_2)
}

/// Standard normal quantile: seeded from the `statrs` inverse, then polished
/// with Newton steps against the Cody CDF. Round-trips to ~1e-13 relative.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");
    let mut x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let pdf = normal_pdf(x);
        if pdf <= 1e-280 {
            break;
        }
        let err = if x < 0.0 {
            normal_cdf(x) - p
        } else {
            // work in the upper tail to keep the residual well conditioned
            (1.0 - p) - normal_sf(x)
        };
        if err == 0.0 {
            break;
        }
        x -= err / pdf;
    }
    x
}

/// Round `x` onto a uniform grid with ties to even, returning the grid index.
#[inline]
pub fn grid_index(x: f64, grid: f64) -> i64 {
    (x / grid).round_ties_even() as i64
}
