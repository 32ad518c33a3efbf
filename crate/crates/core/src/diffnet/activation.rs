use serde::{Deserialize, Serialize};

/// Highest activation derivative the jet engine ever asks for.
pub const MAX_ACTIVATION_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Silu,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Silu => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Silu),
            _ => None,
        }
    }

    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Silu => x * logistic(x),
        }
    }

    /// Writes `f(x), f'(x), ..., f^(n)(x)` into `out[..=n]` where `n = out.len() - 1`.
    ///
    /// `out.len()` must not exceed `MAX_ACTIVATION_ORDER + 1`.
    #[inline]
    pub fn derivatives(self, x: f64, out: &mut [f64]) {
        debug_assert!(!out.is_empty() && out.len() <= MAX_ACTIVATION_ORDER + 1);
        let n = out.len() - 1;
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                let s = 1.0 - t * t;
                out[0] = t;
                if n >= 1 {
                    out[1] = s;
                }
                if n >= 2 {
                    out[2] = -2.0 * t * s;
                }
                if n >= 3 {
                    out[3] = s * (6.0 * t * t - 2.0);
                }
                if n >= 4 {
                    out[4] = s * t * (16.0 - 24.0 * t * t);
                }
            }
            Activation::Silu => {
                // f^(k) = k * sigma^(k-1) + x * sigma^(k), with sigma the logistic function.
                let sg = logistic(x);
                let q = sg * (1.0 - sg);
                let d = [
                    sg,
                    q,
                    q * (1.0 - 2.0 * sg),
                    q * (1.0 - 6.0 * sg + 6.0 * sg * sg),
                    q * (1.0 - 2.0 * sg) * (1.0 - 12.0 * sg + 12.0 * sg * sg),
                ];
                out[0] = x * d[0];
                for k in 1..=n {
                    out[k] = k as f64 * d[k - 1] + x * d[k];
                }
            }
        }
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_against_fd(act: Activation) {
        let h = 1e-4;
        for &x in &[-2.3, -0.7, 0.0, 0.4, 1.9] {
            let mut d = [0.0; 5];
            act.derivatives(x, &mut d);
            assert!((d[0] - act.value(x)).abs() < 1e-15);
            for k in 1..5 {
                let mut lo = [0.0; 5];
                let mut hi = [0.0; 5];
                act.derivatives(x - h, &mut lo);
                act.derivatives(x + h, &mut hi);
                let fd = (hi[k - 1] - lo[k - 1]) / (2.0 * h);
                assert!(
                    (fd - d[k]).abs() < 1e-6 * (1.0 + d[k].abs()),
                    "{act:?} order {k} at {x}: {fd} vs {}",
                    d[k]
                );
            }
        }
    }

    #[test]
    fn tanh_derivatives_match_finite_differences() {
        check_against_fd(Activation::Tanh);
    }

    #[test]
    fn silu_derivatives_match_finite_differences() {
        check_against_fd(Activation::Silu);
    }

    #[test]
    fn silu_is_stable_for_large_inputs() {
        let mut d = [0.0; 5];
        Activation::Silu.derivatives(-800.0, &mut d);
        assert!(d.iter().all(|v| v.is_finite()));
        Activation::Silu.derivatives(800.0, &mut d);
        assert!((d[0] - 800.0).abs() < 1e-9 && (d[1] - 1.0).abs() < 1e-12);
    }
}
