//! Link functions mapping the linear predictor `x'θ` to the mean reward.
//!
//! Each link carries the derivative bounds that the confidence machinery is
//! parameterized by: `lipschitz_bound` bounds `|μ̇|` and `curvature_bound`
//! bounds `|μ̈|` over the whole real line.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// The built-in strictly increasing links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFunction {
    Identity,
    Logistic,
    Probit,
}

impl LinkFunction {
    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Identity => "identity",
            LinkFunction::Logistic => "logistic",
            LinkFunction::Probit => "probit",
        }
    }

    /// μ(z).
    pub fn eval(self, z: f64) -> f64 {
        match self {
            LinkFunction::Identity => z,
            LinkFunction::Logistic => sigmoid(z),
            LinkFunction::Probit => 0.5 * erfc(-z / std::f64::consts::SQRT_2),
        }
    }

    /// μ̇(z).
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Logistic => {
                // sigmoid(z) * sigmoid(-z) avoids cancellation in 1 - p for large z
                sigmoid(z) * sigmoid(-z)
            }
            LinkFunction::Probit => normal_pdf(z),
        }
    }

    /// μ̈(z).
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            LinkFunction::Identity => 0.0,
            LinkFunction::Logistic => {
                let p = sigmoid(z);
                let q = sigmoid(-z);
                p * q * (q - p)
            }
            LinkFunction::Probit => -z * normal_pdf(z),
        }
    }

    /// L_μ: global bound on |μ̇|.
    pub fn lipschitz_bound(self) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Logistic => 0.25,
            LinkFunction::Probit => INV_SQRT_2PI,
        }
    }

    /// M_μ: global bound on |μ̈|.
    ///
    /// The logistic value is the conventional 1/4 rather than the tight
    /// `1/(6√3)`; both are valid bounds.
    pub fn curvature_bound(self) -> f64 {
        match self {
            LinkFunction::Identity => 0.0,
            LinkFunction::Logistic => 0.25,
            // max_z |z φ(z)| is attained at |z| = 1
            LinkFunction::Probit => normal_pdf(1.0),
        }
    }

    /// κ: the infimum of μ̇(x'θ) over ‖x‖ ≤ 1 and ‖θ − θ*‖ ≤ 1.
    ///
    /// Those constraints confine `x'θ` to `[-(‖θ*‖ + 1), ‖θ*‖ + 1]`. All
    /// built-in derivatives are even and nonincreasing in `|z|`, so the
    /// infimum sits at the interval endpoint.
    pub fn kappa(self, theta_star_norm: f64) -> f64 {
        debug_assert!(theta_star_norm >= 0.0);
        self.derivative(theta_star_norm + 1.0)
    }

    /// Integral of μ, i.e. the log-partition term of the quasi-likelihood
    /// `Σ [y x'θ − m(x'θ)]`. Its derivative is μ.
    pub fn log_partition(self, z: f64) -> f64 {
        match self {
            LinkFunction::Identity => 0.5 * z * z,
            LinkFunction::Logistic => {
                // log(1 + e^z), stable for both signs
                if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                }
            }
            LinkFunction::Probit => z * self.eval(z) + normal_pdf(z),
        }
    }
}

impl std::fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LinkFunction {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(LinkFunction::Identity),
            "logistic" => Ok(LinkFunction::Logistic),
            "probit" => Ok(LinkFunction::Probit),
            other => Err(crate::Error::invalid(format!("unknown link `{other}`"))),
        }
    }
}

/// Free-function form of [`LinkFunction::eval`].
pub fn link_eval(link: LinkFunction, z: f64) -> f64 {
    link.eval(z)
}

/// Free-function form of [`LinkFunction::kappa`].
pub fn compute_kappa(link: LinkFunction, theta_star_norm: f64) -> f64 {
    link.kappa(theta_star_norm)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const ALL: [LinkFunction; 3] = [
        LinkFunction::Identity,
        LinkFunction::Logistic,
        LinkFunction::Probit,
    ];

    fn grid() -> impl Iterator<Item = f64> {
        (0..=2000).map(|i| -10.0 + i as f64 * 0.01)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(link_eval(LinkFunction::Logistic, 0.0), 0.5);
        assert_eq!(link_eval(LinkFunction::Identity, 0.37), 0.37);
        assert_abs_diff_eq!(link_eval(LinkFunction::Logistic, 3f64.ln()), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(link_eval(LinkFunction::Probit, 0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn logistic_stays_in_open_unit_interval() {
        for z in grid() {
            let p = LinkFunction::Logistic.eval(z);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn strictly_increasing_with_bounded_derivatives() {
        for link in ALL {
            let mut prev = f64::NEG_INFINITY;
            for z in grid() {
                let v = link.eval(z);
                // probit saturates to 1.0 in f64 past z ≈ 8
                if z.abs() <= 5.0 {
                    assert!(v > prev, "{link} not increasing at {z}");
                } else {
                    assert!(v >= prev, "{link} decreasing at {z}");
                }
                prev = v;
                let d1 = link.derivative(z);
                assert!(d1 > 0.0);
                assert!(d1.abs() <= link.lipschitz_bound() + 1e-15);
                assert!(link.second_derivative(z).abs() <= link.curvature_bound() + 1e-15);
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for link in ALL {
            for z in grid() {
                let fd = (link.eval(z + h) - link.eval(z - h)) / (2.0 * h);
                assert!((link.derivative(z) - fd).abs() <= 1e-6, "{link} μ̇ at {z}");
                let fd2 = (link.derivative(z + h) - link.derivative(z - h)) / (2.0 * h);
                assert!((link.second_derivative(z) - fd2).abs() <= 1e-6, "{link} μ̈ at {z}");
                let fdm = (link.log_partition(z + h) - link.log_partition(z - h)) / (2.0 * h);
                assert!((link.eval(z) - fdm).abs() <= 1e-5, "{link} m' at {z}");
            }
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(compute_kappa(LinkFunction::Identity, 0.0), 1.0);
        assert_eq!(compute_kappa(LinkFunction::Identity, 7.0), 1.0);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(
            compute_kappa(LinkFunction::Logistic, 0.0),
            e / (1.0 + e).powi(2),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(compute_kappa(LinkFunction::Logistic, 0.0), 0.19661, epsilon = 1e-5);
        assert_abs_diff_eq!(compute_kappa(LinkFunction::Logistic, 1.0), 0.10499, epsilon = 1e-5);
    }

    #[test]
    fn kappa_is_the_infimum_over_the_interval() {
        for link in ALL {
            for norm in [0.0, 0.5, 1.0, 2.5] {
                let r = norm + 1.0;
                let brute = (0..=10_000)
                    .map(|i| link.derivative(-r + 2.0 * r * i as f64 / 10_000.0))
                    .fold(f64::INFINITY, f64::min);
                assert_abs_diff_eq!(link.kappa(norm), brute, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn parse_round_trips_names() {
        for link in ALL {
            assert_eq!(link.name().parse::<LinkFunction>().unwrap(), link);
        }
        assert!("cloglog".parse::<LinkFunction>().is_err());
    }
}
