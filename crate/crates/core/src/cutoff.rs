//! Smooth cutoff profiles with exact plateaus.
//!
//! The basic ingredient is the standard C^∞ blend σ(x) = E(x)/(E(x)+E(1−x))
//! with E(x) = exp(−1/x) for x > 0 and E ≡ 0 otherwise: σ vanishes
//! identically left of 0, equals 1 identically right of 1, and is smooth.
//! Profiles are steps or bumps built from σ, carry an amplitude, and expose
//! analytic first and second derivatives (the second derivative enters the
//! Hessians of cut-off Hamiltonians).

use serde::{Deserialize, Serialize};

fn e(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn e1(x: f64) -> f64 {
    if x > 0.0 {
        e(x) / (x * x)
    } else {
        0.0
    }
}

fn e2(x: f64) -> f64 {
    if x > 0.0 {
        e(x) * (1.0 / (x * x * x * x) - 2.0 / (x * x * x))
    } else {
        0.0
    }
}

/// σ, σ′, σ″ of the unit blend on [0, 1].
fn blend(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let g = e(x);
    let h = e(1.0 - x);
    let gp = e1(x);
    let hp = -e1(1.0 - x);
    let gpp = e2(x);
    let hpp = e2(1.0 - x);
    let w = g + h;
    let u = gp * h - g * hp;
    let up = gpp * h - g * hpp;
    let wp = gp + hp;
    let s = g / w;
    let sp = u / (w * w);
    let spp = (up * w - 2.0 * u * wp) / (w * w * w);
    (s, sp, spp)
}

/// Smooth profile: −∞-side plateau at 0, +∞-side plateau at `amplitude`
/// (step), or 0 on both sides with an `amplitude` plateau in the middle (bump).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffProfile {
    /// 0 on (−∞, a], amplitude on [b, ∞).
    StepUp { a: f64, b: f64, amplitude: f64 },
    /// amplitude on (−∞, a], 0 on [b, ∞).
    StepDown { a: f64, b: f64, amplitude: f64 },
    /// 0 outside (a, d), amplitude on [b, c].
    Bump {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        amplitude: f64,
    },
}

impl CutoffProfile {
    pub fn step_up(a: f64, b: f64) -> Self {
        assert!(a < b, "step thresholds must satisfy a < b");
        CutoffProfile::StepUp {
            a,
            b,
            amplitude: 1.0,
        }
    }

    pub fn step_down(a: f64, b: f64) -> Self {
        assert!(a < b);
        CutoffProfile::StepDown {
            a,
            b,
            amplitude: 1.0,
        }
    }

    pub fn bump(a: f64, b: f64, c: f64, d: f64) -> Self {
        assert!(a < b && b <= c && c < d);
        CutoffProfile::Bump {
            a,
            b,
            c,
            d,
            amplitude: 1.0,
        }
    }

    pub fn with_amplitude(mut self, amp: f64) -> Self {
        match &mut self {
            CutoffProfile::StepUp { amplitude, .. }
            | CutoffProfile::StepDown { amplitude, .. }
            | CutoffProfile::Bump { amplitude, .. } => *amplitude = amp,
        }
        self
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            CutoffProfile::StepUp { amplitude, .. }
            | CutoffProfile::StepDown { amplitude, .. }
            | CutoffProfile::Bump { amplitude, .. } => *amplitude,
        }
    }

    /// (value, first derivative, second derivative) at x.
    pub fn eval2(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            CutoffProfile::StepUp { a, b, amplitude } => {
                let t = (x - a) / (b - a);
                let (s, sp, spp) = blend(t);
                let d = b - a;
                (amplitude * s, amplitude * sp / d, amplitude * spp / (d * d))
            }
            CutoffProfile::StepDown { a, b, amplitude } => {
                let t = (x - a) / (b - a);
                let (s, sp, spp) = blend(t);
                let d = b - a;
                (
                    amplitude * (1.0 - s),
                    -amplitude * sp / d,
                    -amplitude * spp / (d * d),
                )
            }
            CutoffProfile::Bump {
                a,
                b,
                c,
                d,
                amplitude,
            } => {
                if x < c {
                    let t = (x - a) / (b - a);
                    let (s, sp, spp) = blend(t);
                    let w = b - a;
                    (amplitude * s, amplitude * sp / w, amplitude * spp / (w * w))
                } else {
                    let t = (x - c) / (d - c);
                    let (s, sp, spp) = blend(t);
                    let w = d - c;
                    (
                        amplitude * (1.0 - s),
                        -amplitude * sp / w,
                        -amplitude * spp / (w * w),
                    )
                }
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval2(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval2(x).1
    }

    /// Profile equal to x ↦ value(scale·x + offset); requires scale > 0.
    pub fn precompose_affine(&self, scale: f64, offset: f64) -> CutoffProfile {
        assert!(scale > 0.0, "profile precomposition needs positive scale");
        let m = |t: f64| (t - offset) / scale;
        match *self {
            CutoffProfile::StepUp { a, b, amplitude } => CutoffProfile::StepUp {
                a: m(a),
                b: m(b),
                amplitude,
            },
            CutoffProfile::StepDown { a, b, amplitude } => CutoffProfile::StepDown {
                a: m(a),
                b: m(b),
                amplitude,
            },
            CutoffProfile::Bump {
                a,
                b,
                c,
                d,
                amplitude,
            } => CutoffProfile::Bump {
                a: m(a),
                b: m(b),
                c: m(c),
                d: m(d),
                amplitude,
            },
        }
    }

    /// Largest |derivative| over the support, estimated on a fine grid with a
    /// 1.05 safety factor (the blend's slope is smooth and unimodal per ramp).
    pub fn max_slope(&self) -> f64 {
        let (lo, hi) = match *self {
            CutoffProfile::StepUp { a, b, .. } | CutoffProfile::StepDown { a, b, .. } => (a, b),
            CutoffProfile::Bump { a, d, .. } => (a, d),
        };
        let mut m = 0.0f64;
        let n = 2000;
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            m = m.max(self.derivative(x).abs());
        }
        m * 1.05
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_are_exact() {
        let f = CutoffProfile::step_up(0.25, 0.5);
        assert_eq!(f.value(0.25), 0.0);
        assert_eq!(f.value(-3.0), 0.0);
        assert_eq!(f.value(0.5), 1.0);
        assert_eq!(f.value(7.0), 1.0);
        assert_eq!(f.derivative(0.2), 0.0);
        assert_eq!(f.derivative(0.6), 0.0);
        let v = f.value(0.375);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let profiles = [
            CutoffProfile::step_up(0.1, 0.9),
            CutoffProfile::step_down(-1.0, 1.0).with_amplitude(2.5),
            CutoffProfile::bump(0.0, 0.2, 0.8, 1.0),
        ];
        let h = 1e-6;
        for f in &profiles {
            for i in 0..200 {
                let x = -1.2 + 2.6 * i as f64 / 199.0;
                let (_, d1, d2) = f.eval2(x);
                let fd1 = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                let fd2 = (f.derivative(x + h) - f.derivative(x - h)) / (2.0 * h);
                assert!((d1 - fd1).abs() < 1e-5 * (1.0 + d1.abs()), "d1 at {x}");
                assert!((d2 - fd2).abs() < 1e-4 * (1.0 + d2.abs()), "d2 at {x}");
            }
        }
    }

    #[test]
    fn precompose_shifts_thresholds() {
        let f = CutoffProfile::step_up(0.0, 1.0);
        let g = f.precompose_affine(2.0, -1.0); // g(x) = f(2x − 1)
        assert_eq!(g.value(0.5), 0.0);
        assert_eq!(g.value(1.0), 1.0);
        assert!((g.value(0.75) - f.value(0.5)).abs() < 1e-15);
    }

    #[test]
    fn bump_is_zero_outside_and_one_inside() {
        let f = CutoffProfile::bump(0.0, 1.0, 2.0, 3.0);
        assert_eq!(f.value(-0.1), 0.0);
        assert_eq!(f.value(3.1), 0.0);
        assert_eq!(f.value(1.5), 1.0);
    }
}
