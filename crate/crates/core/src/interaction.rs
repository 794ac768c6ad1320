//! Interaction functions `f(z)`, their derivatives and potentials
//! `P(z) = -int_R^z f`, plus a sampled check of the sign/continuity/vanishing
//! requirements the convergence result relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum link length used throughout the reference experiments, `(1 + sqrt 3) / 2`.
pub const DEFAULT_MAX_LINK: f64 = 1.366_025_403_784_438_6;

/// Largest accepted Lennard-Jones exponent; `z^-2c` already spans the whole
/// `f64` range on any sensible geometry well before this.
pub const MAX_EXPONENT: u32 = 256;

/// Saturated Lennard-Jones profile `min(a z^-2c - b z^-c, saturation)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LennardJonesParams {
    pub a: f64,
    pub b: f64,
    pub c: u32,
    pub saturation: f64,
}

impl Default for LennardJonesParams {
    fn default() -> Self {
        LennardJonesParams {
            a: 0.5,
            b: 0.5,
            c: 12,
            saturation: 1.0,
        }
    }
}

impl LennardJonesParams {
    /// Checks `a, b > 0`, `c >= 1` and a positive saturation cap.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::invalid(format!(
                "Lennard-Jones coefficients must be positive (a = {}, b = {})",
                self.a, self.b
            )));
        }
        Ok(())
    }

    /// Structural checks only; coefficient signs are left to the assumption validator.
    fn validate_shape(&self) -> Result<()> {
        if self.c == 0 || self.c > MAX_EXPONENT {
            return Err(Error::invalid(format!(
                "Lennard-Jones exponent c must lie in 1..={MAX_EXPONENT}, got {}",
                self.c
            )));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::invalid("Lennard-Jones coefficients must be finite"));
        }
        if !(self.saturation > 0.0 && self.saturation.is_finite()) {
            return Err(Error::invalid("saturation cap must be positive"));
        }
        Ok(())
    }

    /// Zero of the unsaturated profile, `(a / b)^(1/c)`.
    pub fn root(&self) -> f64 {
        (self.a / self.b).powf(1.0 / self.c as f64)
    }

    #[inline]
    fn unsaturated(&self, z: f64) -> f64 {
        let w = z.recip().powi(self.c as i32);
        self.a * w * w - self.b * w
    }

    #[inline]
    fn unsaturated_derivative(&self, z: f64) -> f64 {
        let inv = z.recip();
        let w = inv.powi(self.c as i32);
        let c = self.c as f64;
        (-2.0 * c * self.a * w * w + c * self.b * w) * inv
    }

    /// Antiderivative of the unsaturated profile.
    fn antiderivative(&self, z: f64) -> f64 {
        let c = self.c as i32;
        let first = self.a * z.powi(1 - 2 * c) / (1 - 2 * c) as f64;
        let second = if c == 1 {
            self.b * z.ln()
        } else {
            self.b * z.powi(1 - c) / (1 - c) as f64
        };
        first - second
    }

    /// Points where the unsaturated profile crosses the cap, ascending.
    ///
    /// Solves `a w^2 - b w - saturation = 0` for `w = z^-c > 0`.
    pub fn saturation_knots(&self) -> Vec<f64> {
        let s = self.saturation;
        let mut ws = Vec::new();
        if self.a == 0.0 {
            if self.b < 0.0 {
                ws.push(-s / self.b);
            }
        } else {
            let disc = self.b * self.b + 4.0 * self.a * s;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // Numerically stable pair of roots.
                let q = -0.5 * (-self.b - self.b.signum() * sq);
                let q = if q == 0.0 { 0.5 * sq } else { q };
                ws.push(q / self.a);
                if q != 0.0 {
                    ws.push(-s / q);
                }
            }
        }
        let mut knots: Vec<f64> = ws
            .into_iter()
            .filter(|w| *w > 0.0 && w.is_finite())
            .map(|w| w.powf(-1.0 / self.c as f64))
            .collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        knots
    }

    #[inline]
    fn saturated(&self, z: f64) -> f64 {
        self.unsaturated(z).min(self.saturation)
    }

    /// `int_lo^hi min(g, saturation)` for `0 < lo <= hi`, split at the knots.
    fn integral(&self, knots: &[f64], lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        let mut start = lo;
        let inner = knots.iter().copied().filter(|&k| k > lo && k < hi);
        for end in inner.chain(std::iter::once(hi)) {
            if end > start {
                let mid = 0.5 * (start + end);
                total += if self.unsaturated(mid) >= self.saturation {
                    self.saturation * (end - start)
                } else {
                    self.antiderivative(end) - self.antiderivative(start)
                };
            }
            start = end;
        }
        total
    }
}

fn check_positive(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("interaction distance must be positive, got {z}")))
    }
}

/// Saturated Lennard-Jones force at distance `z`.
pub fn lj_force(z: f64, params: &LennardJonesParams) -> Result<f64> {
    check_positive(z)?;
    Ok(params.saturated(z))
}

/// Derivative of [`lj_force`]: zero on the saturated branch.
pub fn lj_derivative(z: f64, params: &LennardJonesParams) -> Result<f64> {
    check_positive(z)?;
    Ok(if params.unsaturated(z) > params.saturation {
        0.0
    } else {
        params.unsaturated_derivative(z)
    })
}

/// Force profile family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// Saturated Lennard-Jones with its natural long-range tail.
    LennardJones(LennardJonesParams),
    /// Saturated Lennard-Jones forced to exactly zero beyond the maximum link length.
    TruncatedLennardJones(LennardJonesParams),
    /// Unsaturated linear spring `gain * (R - z)`.
    LinearSpring { gain: f64 },
}

/// Immutable interaction function bound to a desired link length `R` and a
/// maximum link length `R_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionFunction {
    profile: Profile,
    r: f64,
    r_a: f64,
    knots: Vec<f64>,
}

impl InteractionFunction {
    pub fn new(profile: Profile, r: f64, r_a: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite() && r_a > 0.0 && r_a.is_finite()) {
            return Err(Error::invalid(format!(
                "link lengths must be positive (R = {r}, R_a = {r_a})"
            )));
        }
        let knots = match &profile {
            Profile::LennardJones(p) | Profile::TruncatedLennardJones(p) => {
                p.validate_shape()?;
                p.saturation_knots()
            }
            Profile::LinearSpring { gain } => {
                if !gain.is_finite() {
                    return Err(Error::invalid("spring gain must be finite"));
                }
                Vec::new()
            }
        };
        Ok(InteractionFunction {
            profile,
            r,
            r_a,
            knots,
        })
    }

    pub fn lennard_jones(params: LennardJonesParams, r: f64, r_a: f64) -> Result<Self> {
        Self::new(Profile::LennardJones(params), r, r_a)
    }

    /// Lennard-Jones with `a = b = 0.5`, `c = 12`, cap 1, `R = 1`, `R_a = (1 + sqrt 3)/2`.
    pub fn reference() -> Self {
        Self::lennard_jones(LennardJonesParams::default(), 1.0, DEFAULT_MAX_LINK)
            .expect("reference parameters are valid")
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn desired_length(&self) -> f64 {
        self.r
    }

    pub fn max_link_length(&self) -> f64 {
        self.r_a
    }

    /// Distances where the profile switches between saturated and unsaturated.
    pub fn saturation_knots(&self) -> &[f64] {
        &self.knots
    }

    /// `f(z)` for `z > 0`.
    #[inline]
    pub fn force(&self, z: f64) -> f64 {
        match &self.profile {
            Profile::LennardJones(p) => p.saturated(z),
            Profile::TruncatedLennardJones(p) => {
                if z > self.r_a {
                    0.0
                } else {
                    p.saturated(z)
                }
            }
            Profile::LinearSpring { gain } => gain * (self.r - z),
        }
    }

    /// `f'(z)`; one-sided (unsaturated) value at a knot.
    pub fn derivative(&self, z: f64) -> f64 {
        match &self.profile {
            Profile::LennardJones(p) => lj_derivative(z, p).unwrap_or(f64::NAN),
            Profile::TruncatedLennardJones(p) => {
                if z > self.r_a {
                    0.0
                } else {
                    lj_derivative(z, p).unwrap_or(f64::NAN)
                }
            }
            Profile::LinearSpring { gain } => -gain,
        }
    }

    /// `P(z) = -int_R^z f(y) dy`, evaluated in closed form.
    pub fn potential(&self, z: f64) -> f64 {
        let lj = |p: &LennardJonesParams, z: f64| {
            if z >= self.r {
                -p.integral(&self.knots, self.r, z)
            } else {
                p.integral(&self.knots, z, self.r)
            }
        };
        match &self.profile {
            Profile::LennardJones(p) => lj(p, z),
            Profile::TruncatedLennardJones(p) => lj(p, z.min(self.r_a)),
            Profile::LinearSpring { gain } => 0.5 * gain * (z - self.r) * (z - self.r),
        }
    }
}

/// Checked [`InteractionFunction::potential`].
pub fn potential(z: f64, f: &InteractionFunction) -> Result<f64> {
    check_positive(z)?;
    Ok(f.potential(z))
}

/// Outcome of the vanishing-tail check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Vanishing {
    ExactZero,
    ApproximatelyZero,
    NotVanishing,
}

/// Tail residuals below this fraction of the peak `|f|` on `(0, R_a]` count
/// as approximately zero.
pub const APPROX_ZERO_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub grid_step: f64,
    pub samples: usize,
    /// `f(R) = 0`.
    pub null_point: Check,
    /// Repulsive below `R`, attractive on `(R, R_a]`.
    pub sign_pattern: Check,
    /// No jumps on `[grid_step, R_a]` beyond a Lipschitz-consistent bound.
    pub continuity: Check,
    /// Behaviour on `(R_a, 2 R_a]`.
    pub vanishing: Vanishing,
    pub tail_max_abs: f64,
    pub tail_argmax: f64,
}

impl ValidationReport {
    /// The three hard requirements; the tail is informational.
    pub fn core_passed(&self) -> bool {
        self.null_point.passed && self.sign_pattern.passed && self.continuity.passed
    }
}

/// Samples `f` on `(0, 2 R_a]` and reports each interaction-function requirement.
pub fn validate_profile(f: &InteractionFunction, grid_step: f64) -> Result<ValidationReport> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let r = f.desired_length();
    let r_a = f.max_link_length();
    let count = (2.0 * r_a / grid_step).floor() as usize;
    let zs: Vec<f64> = (1..=count).map(|k| k as f64 * grid_step).collect();

    let f_r = f.force(r);
    let null_point = Check {
        passed: f_r.abs() <= 1e-12,
        detail: format!("|f(R)| = {:e}", f_r.abs()),
    };

    let mut violations = 0usize;
    let mut first_violation = None;
    for &z in zs.iter().filter(|&&z| z <= r_a && z != r) {
        let v = f.force(z);
        let ok = if z < r { v > 0.0 } else { v < 0.0 };
        if !ok {
            violations += 1;
            first_violation.get_or_insert((z, v));
        }
    }
    let sign_pattern = Check {
        passed: violations == 0,
        detail: match first_violation {
            None => "f > 0 below R and f < 0 on (R, R_a] at every sample".to_string(),
            Some((z, v)) => format!("{violations} samples violate the sign pattern, first f({z}) = {v:e}"),
        },
    };

    let inner: Vec<f64> = zs.iter().copied().filter(|&z| z <= r_a).collect();
    let lipschitz = inner
        .iter()
        .map(|&z| f.derivative(z).abs())
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max);
    let bound = 2.0 * lipschitz * grid_step + 1e-12;
    let mut worst = (0.0f64, 0.0f64);
    for w in inner.windows(2) {
        let jump = (f.force(w[1]) - f.force(w[0])).abs();
        if jump > worst.0 {
            worst = (jump, w[0]);
        }
    }
    let continuity = Check {
        passed: worst.0 <= bound,
        detail: format!(
            "largest adjacent jump {:e} at z = {} against bound {:e}",
            worst.0, worst.1, bound
        ),
    };

    let peak = inner.iter().map(|&z| f.force(z).abs()).fold(0.0, f64::max);
    let (tail_max_abs, tail_argmax) = zs
        .iter()
        .filter(|&&z| z > r_a)
        .map(|&z| (f.force(z).abs(), z))
        .fold((0.0, f64::NAN), |acc, x| if x.0 > acc.0 || acc.1.is_nan() { x } else { acc });
    let vanishing = if tail_max_abs == 0.0 {
        Vanishing::ExactZero
    } else if tail_max_abs <= APPROX_ZERO_FRACTION * peak {
        Vanishing::ApproximatelyZero
    } else {
        Vanishing::NotVanishing
    };

    Ok(ValidationReport {
        grid_step,
        samples: zs.len(),
        null_point,
        sign_pattern,
        continuity,
        vanishing,
        tail_max_abs,
        tail_argmax,
    })
}
