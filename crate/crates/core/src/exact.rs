//! Exact type I error of a threshold stopping rule.
//!
//! Stage 1 has n1 subjects per group (n = 2·n1). If the blinded sum of
//! squares Q1 + Q2 is at most `c` the trial stops and the final test uses the
//! stage-1 data; otherwise it continues with a stage 2 large enough that the
//! final test is taken to hold its nominal level α.
//!
//! With x = Q1/σ² ~ χ²(n-2) and Z = √(n1/2)(d - δ_up)/σ ~ N(μ, 1), stopping
//! together with rejection of H02 is the event
//!
//! ```text
//! L(x) < Z < min(U(x), R(x)),
//! U, L = ±√(c/σ² - x) - a,   R = q √(x/(n-2)),   q = t_α(n-2)
//! ```
//!
//! and for equivalence Z must also exceed S(x) = -q √(x/(n-2)) - b. The
//! probability is the integral over x of the normal mass between the bounds
//! times the χ²(n-2) density. The bounds cross at points solved in closed
//! form, which are used as quadrature breakpoints.

use crate::dist::{
    chi2_pdf_unchecked, noncentral_chi2_cdf_unchecked, phi, student_t_quantile_unchecked,
};
use crate::error::{Error, Result};
use crate::quad::{integrate_with_breaks, Integral};

/// Degrees of freedom used for the stopping probability P(Q1 + Q2 ≤ c).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoppingDf {
    /// n - 1: Q1 + Q2 ~ σ²χ²(n-1; n1δ²/(2σ²)). This is the distribution of
    /// the blinded sum of squares.
    Total,
    /// n - 2, the degrees of freedom of Q1 alone. Kept to reproduce a
    /// published table that used it.
    WithinGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMode {
    NonInferiority,
    Equivalence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSetting {
    /// Per-group stage-1 size.
    pub n1: u64,
    pub alpha: f64,
    pub sigma: f64,
    /// True difference.
    pub delta: f64,
    pub delta_up: f64,
    pub delta_low: f64,
    /// Stopping threshold on Q1 + Q2, in data units.
    pub c: f64,
    pub stop_df: StoppingDf,
}

impl ExactSetting {
    /// σ = 1 at the boundary δ = δ_up with symmetric margins and the threshold
    /// set to the mean of Q1 + Q2, c = n - 1 + (n1/2)δ².
    pub fn at_boundary(n1: u64, alpha: f64, delta_up: f64) -> Result<Self> {
        let n = 2.0 * n1 as f64;
        let setting = Self {
            n1,
            alpha,
            sigma: 1.0,
            delta: delta_up,
            delta_up,
            delta_low: -delta_up,
            c: n - 1.0 + 0.5 * n1 as f64 * delta_up * delta_up,
            stop_df: StoppingDf::Total,
        };
        setting.validate()?;
        Ok(setting)
    }

    pub fn with_stop_df(self, stop_df: StoppingDf) -> Self {
        Self { stop_df, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 2 {
            return Err(Error::InvalidDesign(format!(
                "n1 must be at least 2, got {}",
                self.n1
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::InvalidDesign(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidDesign(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidDesign(format!(
                "threshold c must be positive, got {}",
                self.c
            )));
        }
        if !(self.delta_low < self.delta_up)
            || !self.delta_up.is_finite()
            || !self.delta_low.is_finite()
        {
            return Err(Error::InvalidDesign(format!(
                "margins must be finite with delta_low < delta_up, got {} and {}",
                self.delta_low, self.delta_up
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidDesign(
                "true difference must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Range of x = Q1/σ² where the integrand is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationLimits {
    pub l_star: f64,
    pub c_star: f64,
}

/// Standardised constants of a setting.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    /// c / σ²
    cs: f64,
    /// √(n1/2) δ_up / σ
    a: f64,
    /// √(n1/2) (δ_up - δ_low) / σ
    b: f64,
    /// mean of Z
    mu: f64,
    /// t_α(n-2) / √(n-2), so R(x) = qk √x
    qk: f64,
    df: f64,
}

impl Geometry {
    fn new(s: &ExactSetting) -> Self {
        let n = 2.0 * s.n1 as f64;
        let df = n - 2.0;
        let root = (0.5 * s.n1 as f64).sqrt();
        Geometry {
            cs: s.c / (s.sigma * s.sigma),
            a: root * s.delta_up / s.sigma,
            b: root * (s.delta_up - s.delta_low) / s.sigma,
            mu: root * (s.delta - s.delta_up) / s.sigma,
            qk: -student_t_quantile_unchecked(1.0 - s.alpha, df) / df.sqrt(),
            df,
        }
    }

    /// Lower and upper bound on Z at x.
    fn bounds(&self, x: f64, mode: TestMode) -> (f64, f64) {
        let w = (self.cs - x).max(0.0).sqrt();
        let r = self.qk * x.max(0.0).sqrt();
        let upper = (w - self.a).min(r);
        let lower = -w - self.a;
        match mode {
            TestMode::NonInferiority => (lower, upper),
            TestMode::Equivalence => (lower.max(-r - self.b), upper),
        }
    }

    fn signed_integrand(&self, x: f64, mode: TestMode) -> f64 {
        let (lo, hi) = self.bounds(x, mode);
        (phi(hi - self.mu) - phi(lo - self.mu)) * chi2_pdf_unchecked(x, self.df)
    }

    /// Points in (0, cs) where two of the bounds cross.
    fn crossings(&self, mode: TestMode) -> Vec<f64> {
        let mut xs = Vec::new();
        // U = R and L = R
        xs.extend(sqrt_line_roots(self.cs, 1.0, self.a, self.qk));
        xs.extend(sqrt_line_roots(self.cs, -1.0, self.a, self.qk));
        if mode == TestMode::Equivalence {
            // U = S and L = S
            xs.extend(sqrt_line_roots(self.cs, 1.0, self.a - self.b, -self.qk));
            xs.extend(sqrt_line_roots(self.cs, -1.0, self.a - self.b, -self.qk));
            // R = S: 2qk√x = -b
            let s = -self.b / (2.0 * self.qk);
            if s > 0.0 && s * s < self.cs {
                xs.push(s * s);
            }
        }
        xs.retain(|&x| x > 0.0 && x < self.cs);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }

    /// Breakpoints and the sub-intervals on which the integrand is positive.
    fn positive_pieces(&self, mode: TestMode) -> Vec<(f64, f64)> {
        let mut points = vec![0.0];
        points.extend(self.crossings(mode));
        points.push(self.cs);
        points
            .windows(2)
            .filter(|w| w[1] > w[0])
            .filter(|w| {
                let (lo, hi) = self.bounds(0.5 * (w[0] + w[1]), mode);
                hi > lo
            })
            .map(|w| (w[0], w[1]))
            .collect()
    }
}

/// Solutions x = s² ∈ [0, cs] of sign·√(cs - s²) = β0 + β1 s, s ≥ 0.
///
/// Squaring gives (1 + β1²)s² + 2β0β1 s + β0² - cs = 0; each root is checked
/// against the unsquared equation, since squaring admits the other branch.
fn sqrt_line_roots(cs: f64, sign: f64, beta0: f64, beta1: f64) -> Vec<f64> {
    let g = |s: f64| sign * (cs - s * s).max(0.0).sqrt() - beta0 - beta1 * s;
    let qa = 1.0 + beta1 * beta1;
    let qb = 2.0 * beta0 * beta1;
    let qc = beta0 * beta0 - cs;
    let disc = qb * qb - 4.0 * qa * qc;
    let scale = qb * qb + (4.0 * qa * qc).abs();
    let candidates: Vec<f64> = if disc >= 0.0 {
        let sq = disc.sqrt();
        // numerically stable pair
        let t = -0.5 * (qb + qb.signum() * sq);
        if t == 0.0 {
            vec![0.0]
        } else {
            vec![t / qa, qc / t]
        }
    } else if disc > -1e-12 * scale {
        // tangency lost to rounding
        vec![-qb / (2.0 * qa)]
    } else {
        Vec::new()
    };

    let top = cs.sqrt();
    let tol = 1e-9 * (1.0 + top + beta0.abs());
    let mut out = Vec::new();
    for s in candidates {
        if !(s.is_finite()) || s < -1e-12 || s > top * (1.0 + 1e-12) {
            continue;
        }
        let s = s.clamp(0.0, top);
        if g(s).abs() > tol {
            continue;
        }
        out.push(polish(&g, s, top).powi(2));
    }
    out
}

/// Tightens a verified root by bisection on the original equation when a
/// sign change can be bracketed nearby.
fn polish<G: Fn(f64) -> f64>(g: &G, s: f64, top: f64) -> f64 {
    let h = 1e-7 * (1.0 + s);
    let (mut lo, mut hi) = ((s - h).max(0.0), (s + h).min(top));
    let (mut glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return lo;
    }
    if ghi == 0.0 {
        return hi;
    }
    if glo.signum() == ghi.signum() {
        return s;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const ABS_TOL: f64 = 1e-11;

/// Limits [l*, c*] of the positive region of the integrand, in units of
/// Q1/σ². An empty region is reported as l* = c* = 0.
pub fn solve_integration_limits(
    setting: &ExactSetting,
    mode: TestMode,
) -> Result<IntegrationLimits> {
    setting.validate()?;
    let geo = Geometry::new(setting);
    let pieces = geo.positive_pieces(mode);
    Ok(match (pieces.first(), pieces.last()) {
        (Some(first), Some(last)) => IntegrationLimits {
            l_star: first.0,
            c_star: last.1,
        },
        _ => IntegrationLimits {
            l_star: 0.0,
            c_star: 0.0,
        },
    })
}

/// Integrand before clipping at zero: (Φ(upper - μ) - Φ(lower - μ)) f(x),
/// where f is the χ²(n-2) density and x = Q1/σ².
pub fn signed_integrand(setting: &ExactSetting, mode: TestMode, x: f64) -> f64 {
    Geometry::new(setting).signed_integrand(x, mode)
}

fn integrate_mode(setting: &ExactSetting, mode: TestMode, abs_tol: f64) -> Result<Integral> {
    setting.validate()?;
    let geo = Geometry::new(setting);
    let mut total = Integral {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
        intervals: 0,
    };
    for (lo, hi) in geo.positive_pieces(mode) {
        let part = integrate_with_breaks(
            |x| geo.signed_integrand(x, mode).max(0.0),
            &[lo, hi],
            abs_tol,
            0.0,
        )?;
        total.value += part.value;
        total.error += part.error;
        total.evaluations += part.evaluations;
        total.intervals += part.intervals;
    }
    Ok(total)
}

/// P(reject H02 and Q1 + Q2 ≤ c).
pub fn prob_reject_and_small_variance(setting: &ExactSetting) -> Result<f64> {
    Ok(integrate_mode(setting, TestMode::NonInferiority, ABS_TOL)?.value)
}

/// P(reject H01 and H02 and Q1 + Q2 ≤ c).
pub fn prob_equivalence_and_small_variance(setting: &ExactSetting) -> Result<f64> {
    Ok(integrate_mode(setting, TestMode::Equivalence, ABS_TOL)?.value)
}

/// As the two functions above, with a caller-chosen absolute tolerance.
pub fn joint_probability_with_tolerance(
    setting: &ExactSetting,
    mode: TestMode,
    abs_tol: f64,
) -> Result<Integral> {
    integrate_mode(setting, mode, abs_tol)
}

/// P(Q1 + Q2 ≤ c) under the setting's degrees-of-freedom convention.
pub fn prob_small_variance(setting: &ExactSetting) -> Result<f64> {
    setting.validate()?;
    let n = 2.0 * setting.n1 as f64;
    let df = match setting.stop_df {
        StoppingDf::Total => n - 1.0,
        StoppingDf::WithinGroup => n - 2.0,
    };
    let s2 = setting.sigma * setting.sigma;
    let ncp = 0.5 * setting.n1 as f64 * setting.delta * setting.delta / s2;
    Ok(noncentral_chi2_cdf_unchecked(setting.c / s2, df, ncp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiExact {
    /// P(reject H02 and stop)
    pub joint_small: f64,
    pub prob_small: f64,
    /// P(reject H02 | stop)
    pub conditional: f64,
    /// joint + α·P(continue)
    pub unconditional: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqExact {
    pub joint_small: f64,
    pub prob_small: f64,
    pub conditional: f64,
    pub unconditional: f64,
}

/// Non-inferiority type I error of the threshold rule. The continue branch
/// is taken to reject with probability exactly α.
pub fn ni_type1_exact(setting: &ExactSetting) -> Result<NiExact> {
    let joint_small = prob_reject_and_small_variance(setting)?;
    let prob_small = prob_small_variance(setting)?;
    Ok(NiExact {
        joint_small,
        prob_small,
        conditional: joint_small / prob_small,
        unconditional: joint_small + (1.0 - prob_small) * setting.alpha,
    })
}

/// Equivalence (TOST) type I error of the threshold rule, assembled the same
/// way as [`ni_type1_exact`].
pub fn eq_type1_exact(setting: &ExactSetting) -> Result<EqExact> {
    let joint_small = prob_equivalence_and_small_variance(setting)?;
    let prob_small = prob_small_variance(setting)?;
    Ok(EqExact {
        joint_small,
        prob_small,
        conditional: joint_small / prob_small,
        unconditional: joint_small + (1.0 - prob_small) * setting.alpha,
    })
}
