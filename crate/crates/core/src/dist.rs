//! Distribution primitives: standard normal, Student t, central and
//! non-central chi-square.
//!
//! Accuracy contracts (enforced by the unit tests below):
//!
//! | function               | contract                                  |
//! |------------------------|-------------------------------------------|
//! | `std_normal_cdf`       | absolute error ≤ 1e-12                    |
//! | `std_normal_quantile`  | `cdf(quantile(p)) = p` within 1e-10       |
//! | `student_t_quantile`   | bracketed root, interval tolerance 1e-12  |
//! | `noncentral_chi2_cdf`  | absolute error ≤ 1e-9                     |
//!
//! `erfc` comes from `libm`, `ln_gamma` and the incomplete gamma from
//! `statrs`; the incomplete beta function, the quantiles and the non-central
//! series live here.

use libm::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Degrees of freedom of a t or chi-square distribution.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DegreesOfFreedom(f64);

impl DegreesOfFreedom {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::domain(
                "DegreesOfFreedom::new",
                format!("degrees of freedom must be finite and >= 1, got {value}"),
            ))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<u64> for DegreesOfFreedom {
    type Error = Error;

    fn try_from(value: u64) -> Result<Self> {
        Self::new(value as f64)
    }
}

/// Non-centrality of a chi-square distribution (sum of squared means).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoncentralityParameter(f64);

impl NoncentralityParameter {
    pub const ZERO: Self = Self(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::domain(
                "NoncentralityParameter::new",
                format!("non-centrality must be finite and >= 0, got {value}"),
            ))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

/// Φ(x) without argument checks.
#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(
            "std_normal_cdf",
            format!("non-finite argument {x}"),
        ));
    }
    Ok(phi(x))
}

/// Inverse of Φ.
///
/// Wichura's AS 241 (PPND16) rational approximation followed by one Halley
/// step against `erfc`, which brings the round trip to a few ulps.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "std_normal_quantile",
            format!("probability must lie in (0, 1), got {p}"),
        ));
    }
    Ok(normal_quantile_unchecked(p))
}

pub(crate) fn normal_quantile_unchecked(p: f64) -> f64 {
    let mut x = ppnd16(p);
    // Halley refinement, worked on the smaller tail to avoid cancellation.
    let (err, sign) = if p < 0.5 {
        (phi(x) - p, 1.0)
    } else {
        (0.5 * erfc(x / SQRT_2) - (1.0 - p), -1.0)
    };
    let pdf = std_normal_pdf(x);
    if pdf > 0.0 {
        let u = sign * err / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];

    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

// ---------------------------------------------------------------------------
// Incomplete beta and Student t
// ---------------------------------------------------------------------------

/// I_x(a, b) with the complement y = 1 - x supplied by the caller, so that
/// x close to 1 keeps its precision.
///
/// Continued fraction evaluated with the modified Lentz method, using the
/// symmetry I_x(a,b) = 1 - I_y(b,a) on the side where it converges.
pub(crate) fn reg_inc_beta_pair(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_x = if x > 0.5 { (-y).ln_1p() } else { x.ln() };
    let ln_y = if y > 0.5 { (-x).ln_1p() } else { y.ln() };
    let ln_front = -ln_beta(a, b) + a * ln_x + b * ln_y;
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, y) / b
    }
}

/// ln B(a, b). When one argument is large the difference of log-gammas is
/// formed from Stirling series so that it does not cancel.
fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, large) = if a < b { (a, b) } else { (b, a) };
    if large < 100.0 {
        return ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    }
    // ln Γ(L+s) - ln Γ(L) = (L - 1/2) ln1p(s/L) + s ln(L+s) - s + c(L+s) - c(L)
    let sum = large + small;
    let ratio = (large - 0.5) * (small / large).ln_1p() + small * sum.ln() - small
        + stirling_tail(sum)
        - stirling_tail(large);
    ln_gamma(small) - ratio
}

/// ln Γ(z) - [(z - 1/2) ln z - z + ln √(2π)] for z ≥ 100.
fn stirling_tail(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)))
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 20_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= EPS {
            break;
        }
    }
    h
}

/// Above this the t distribution is replaced by the normal; the difference
/// in the quantile is below 1e-8 there.
const T_NORMAL_LIMIT: f64 = 1e9;

/// Upper tail P(T > t) for t >= 0.
fn student_t_upper(t: f64, df: f64) -> f64 {
    if df > T_NORMAL_LIMIT {
        return 0.5 * erfc(t / SQRT_2);
    }
    let t2 = t * t;
    0.5 * reg_inc_beta_pair(0.5 * df, 0.5, df / (df + t2), t2 / (df + t2))
}

pub(crate) fn student_t_cdf_unchecked(t: f64, df: f64) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t >= 0.0 {
        1.0 - student_t_upper(t, df)
    } else {
        student_t_upper(-t, df)
    }
}

pub fn student_t_cdf(t: f64, df: DegreesOfFreedom) -> Result<f64> {
    if t.is_nan() {
        return Err(Error::domain("student_t_cdf", "NaN argument"));
    }
    Ok(student_t_cdf_unchecked(t, df.get()))
}

pub fn student_t_pdf(t: f64, df: DegreesOfFreedom) -> f64 {
    let v = df.get();
    if v > T_NORMAL_LIMIT {
        return std_normal_pdf(t);
    }
    let ln = ln_gamma(0.5 * (v + 1.0))
        - ln_gamma(0.5 * v)
        - 0.5 * (v * std::f64::consts::PI).ln()
        - 0.5 * (v + 1.0) * (t * t / v).ln_1p();
    ln.exp()
}

/// Quantile of Student's t distribution.
///
/// Solved on the upper tail for p > 1/2 (and by antisymmetry below) with a
/// Newton iteration safeguarded by a bracket that shrinks to 1e-12.
pub fn student_t_quantile(p: f64, df: DegreesOfFreedom) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "student_t_quantile",
            format!("probability must lie in (0, 1), got {p}"),
        ));
    }
    Ok(student_t_quantile_unchecked(p, df.get()))
}

pub(crate) fn student_t_quantile_unchecked(p: f64, df: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        return -upper_t_quantile(p, df);
    }
    upper_t_quantile(1.0 - p, df)
}

/// t > 0 with P(T > t) = tail, tail < 1/2.
fn upper_t_quantile(tail: f64, df: f64) -> f64 {
    const TOL: f64 = 1e-12;
    let z = normal_quantile_unchecked(1.0 - tail);
    if df > T_NORMAL_LIMIT {
        return z;
    }
    // Cornish-Fisher start; exact for df = 1 and 2 would be closed form, but
    // the bracketing below covers them anyway.
    let z3 = z * z * z;
    let z5 = z3 * z * z;
    let mut t = z + (z3 + z) / (4.0 * df) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * df * df);
    if !t.is_finite() || t <= 0.0 {
        t = z.max(1.0);
    }

    // g(t) = P(T > t) - tail is decreasing in t.
    let g = |t: f64| student_t_upper(t, df) - tail;
    let mut lo = 0.0;
    let mut hi = t.max(1.0);
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let dof = DegreesOfFreedom(df);
    t = t.clamp(lo, hi);
    for _ in 0..200 {
        let gt = g(t);
        if gt == 0.0 {
            return t;
        }
        if gt > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let pdf = student_t_pdf(t, dof);
        let mut next = if pdf > 0.0 { t + gt / pdf } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - t).abs();
        t = next;
        if step <= TOL * t.max(1.0) || hi - lo <= TOL * t.max(1.0) {
            break;
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Chi-square
// ---------------------------------------------------------------------------

pub(crate) fn chi2_pdf_unchecked(x: f64, df: f64) -> f64 {
    let k = 0.5 * df;
    if x == 0.0 {
        return match df.partial_cmp(&2.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        };
    }
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

pub fn central_chi2_pdf(x: f64, df: DegreesOfFreedom) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(
            "central_chi2_pdf",
            format!("x must be >= 0, got {x}"),
        ));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(chi2_pdf_unchecked(x, df.get()))
}

pub(crate) fn chi2_cdf_unchecked(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_lr(0.5 * df, 0.5 * x)
}

pub fn central_chi2_cdf(x: f64, df: DegreesOfFreedom) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(
            "central_chi2_cdf",
            format!("x must be >= 0, got {x}"),
        ));
    }
    Ok(chi2_cdf_unchecked(x, df.get()))
}

/// Non-central chi-square CDF as a Poisson mixture of central CDFs.
///
/// The sum starts at the modal Poisson weight and walks backwards to j = 0
/// and forwards until the accumulated weight exceeds 1 - 1e-12. The central
/// CDFs are propagated with P(a+1, y) = P(a, y) - y^a e^-y / Γ(a+1), so only
/// one incomplete gamma evaluation is needed.
pub fn noncentral_chi2_cdf(
    x: f64,
    df: DegreesOfFreedom,
    ncp: NoncentralityParameter,
) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(
            "noncentral_chi2_cdf",
            format!("x must be >= 0, got {x}"),
        ));
    }
    Ok(noncentral_chi2_cdf_unchecked(x, df.get(), ncp.get()))
}

pub(crate) fn noncentral_chi2_cdf_unchecked(x: f64, df: f64, ncp: f64) -> f64 {
    const WEIGHT_TOL: f64 = 1e-12;
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if ncp == 0.0 {
        return chi2_cdf_unchecked(x, df);
    }
    let lambda = 0.5 * ncp;
    let y = 0.5 * x;
    let a0 = 0.5 * df;
    let mode = lambda.floor();
    let k = mode as u64;

    let ln_w_mode = -lambda + mode * lambda.ln() - ln_gamma(mode + 1.0);
    let w_mode = ln_w_mode.exp();
    let a_mode = a0 + mode;
    let p_mode = gamma_lr(a_mode, y);
    // y^a e^-y / Γ(a+1) at a = a_mode
    let t_mode = (a_mode * y.ln() - y - ln_gamma(a_mode + 1.0)).exp();

    let mut sum = w_mode * p_mode;
    let mut weight_used = w_mode;

    // Backwards: j = k-1 .. 0
    {
        let (mut w, mut p, mut t) = (w_mode, p_mode, t_mode);
        let mut a = a_mode;
        for j in (0..k).rev() {
            // moving from j+1 to j
            w *= (j + 1) as f64 / lambda;
            t *= a / y; // term at a-1
            a -= 1.0;
            p += t;
            sum += w * p.min(1.0);
            weight_used += w;
            if w < 1e-300 {
                break;
            }
        }
    }

    // Forwards: j = k+1 ..
    {
        let (mut w, mut p, mut t) = (w_mode, p_mode, t_mode);
        let mut a = a_mode;
        let mut j = k;
        while 1.0 - weight_used > WEIGHT_TOL {
            j += 1;
            w *= lambda / j as f64;
            p = (p - t).max(0.0);
            a += 1.0;
            t *= y / a;
            sum += w * p;
            weight_used += w;
            if w < 1e-300 || (p == 0.0 && j as f64 > lambda) {
                break;
            }
        }
    }
    sum.clamp(0.0, 1.0)
}
