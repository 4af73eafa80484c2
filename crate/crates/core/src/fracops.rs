//! L1 finite-difference kernels for Caputo derivatives on uniform grids.
//!
//! For a series `u_0, ..., u_{n+1}` sampled at `t_k = k dt`, the L1 scheme
//! approximates the Caputo derivative of order `beta` at `t_{n+1}` by
//!
//! ```text
//! D^beta u(t_{n+1}) ~ [u_{n+1} - u_n + H(u)] / (dt^beta Gamma(2 - beta))
//! H(u) = sum_{j=1..n} d_j (u_{n+1-j} - u_{n-j}),   d_j = (j+1)^(1-beta) - j^(1-beta)
//! ```
//!
//! `H` is the history term. It carries every increment except the newest one,
//! so a trial state that freezes `u_{n+1} = u_n` reduces to `H(u)` alone.

use crate::error::{Error, Result};

/// Gamma function. Backed by the musl `tgamma` port, which is accurate to a few
/// ulps on the range used here (arguments in `(0, 5]`).
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Order of a fractional derivative.
///
/// Construction accepts the closed interval `[0, 1]` so that the Hookean
/// (`beta = 0`) and Newtonian (`beta = 1`) limits can be exercised by the weight
/// generators. Simulation entry points additionally require [`FractionalOrder::require_open`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid("beta", format!("must lie in [0, 1], got {beta}")));
        }
        Ok(Self(beta))
    }

    /// Fractional order restricted to the open interval `(0, 1)`.
    pub fn open(beta: f64) -> Result<Self> {
        let order = Self::new(beta)?;
        order.require_open("beta")?;
        Ok(order)
    }

    pub fn require_open(self, name: &'static str) -> Result<()> {
        if self.0 > 0.0 && self.0 < 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(name, format!("must lie in (0, 1), got {}", self.0)))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Uniform time grid `t_n = n dt` on `[0, T]` with `dt = T / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::invalid(
                "T",
                format!("must be positive and finite, got {t_final}"),
            ));
        }
        if steps == 0 {
            return Err(Error::invalid("N", "at least one step is required"));
        }
        Ok(Self {
            t_final,
            steps,
            dt: t_final / steps as f64,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// All grid points `t_0, ..., t_N`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |n| self.time(n))
    }
}

/// Convolution coefficients `d_0, ..., d_n` of the L1 scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Weights {
    beta: FractionalOrder,
    d: Vec<f64>,
}

impl L1Weights {
    pub fn beta(&self) -> FractionalOrder {
        self.beta
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

/// `d_j = (j+1)^{1-beta} - j^{1-beta}` for `j = 0..=n`.
pub fn l1_weights(beta: FractionalOrder, n: usize) -> L1Weights {
    let c = 1.0 - beta.value();
    let d = (0..=n)
        .map(|j| {
            if j == 0 {
                1.0
            } else if c == 0.0 || c == 1.0 {
                // integer exponents: the plain difference is exact
                (j as f64 + 1.0).powf(c) - (j as f64).powf(c)
            } else {
                // j^c ((1 + 1/j)^c - 1), free of the cancellation in the plain difference
                let x = j as f64;
                x.powf(c) * (c * (1.0 / x).ln_1p()).exp_m1()
            }
        })
        .collect();
    L1Weights { beta, d }
}

/// History sum over the increments of `u_0..u_m` against `d_1..d_m`:
/// `sum_{j=1..m} d_j (u_{m+1-j} - u_{m-j})`, accumulated oldest first.
#[inline]
fn history_sum(d: &[f64], u: &[f64]) -> f64 {
    let m = u.len() - 1;
    debug_assert!(d.len() > m);
    let mut acc = 0.0;
    for j in (1..=m).rev() {
        acc += d[j] * (u[m + 1 - j] - u[m - j]);
    }
    acc
}

/// History term `H(u)` for the series `u_0, ..., u_{n+1}`.
pub fn history_term(u: &[f64], weights: &L1Weights) -> Result<f64> {
    if u.len() < 2 {
        return Err(Error::LengthMismatch {
            context: "history_term series",
            expected: 2,
            actual: u.len(),
        });
    }
    let n = u.len() - 2;
    if weights.len() < n + 1 {
        return Err(Error::LengthMismatch {
            context: "history_term weights",
            expected: n + 1,
            actual: weights.len(),
        });
    }
    Ok(history_sum(weights.as_slice(), &u[..=n]))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("dt", format!("must be positive and finite, got {dt}")))
    }
}

/// `1 / (dt^beta Gamma(2 - beta))`.
#[inline]
pub fn l1_scale(beta: FractionalOrder, dt: f64) -> f64 {
    1.0 / (dt.powf(beta.value()) * gamma(2.0 - beta.value()))
}

/// L1 value of the Caputo derivative at `t_{n+1}` for the series `u_0, ..., u_{n+1}`.
pub fn caputo_l1(u: &[f64], beta: FractionalOrder, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    if u.len() < 2 {
        return Err(Error::LengthMismatch {
            context: "caputo_l1 series",
            expected: 2,
            actual: u.len(),
        });
    }
    let n = u.len() - 2;
    let weights = l1_weights(beta, n);
    let history = history_sum(weights.as_slice(), &u[..=n]);
    Ok((u[n + 1] - u[n] + history) * l1_scale(beta, dt))
}

/// Caputo derivative at `t_{n+1}` of the trial extension `u_{n+1} = u_n` of `u_0, ..., u_n`.
pub fn caputo_trial(u: &[f64], beta: FractionalOrder, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    if u.is_empty() {
        return Err(Error::LengthMismatch {
            context: "caputo_trial series",
            expected: 1,
            actual: 0,
        });
    }
    let weights = l1_weights(beta, u.len() - 1);
    Ok(history_sum(weights.as_slice(), u) * l1_scale(beta, dt))
}

/// Exact Caputo derivative of `t^p`: `Gamma(p+1) / Gamma(p+1-beta) t^{p-beta}`.
pub fn caputo_analytic_power(t: f64, p: f64, beta: FractionalOrder) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::invalid("p", format!("must be positive, got {p}")));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("t", format!("must be nonnegative, got {t}")));
    }
    let b = beta.value();
    Ok(gamma(p + 1.0) / gamma(p + 1.0 - b) * t.powf(p - b))
}

/// Precomputed L1 kernel for a fixed `(beta, dt)` pair and a maximum history length.
///
/// Immutable after construction; shareable across threads.
#[derive(Debug, Clone)]
pub struct L1Kernel {
    weights: L1Weights,
    scale: f64,
}

impl L1Kernel {
    /// Kernel able to evaluate derivatives up to `t_{capacity}`.
    pub fn new(beta: FractionalOrder, dt: f64, capacity: usize) -> Result<Self> {
        check_dt(dt)?;
        Ok(Self {
            weights: l1_weights(beta, capacity),
            scale: l1_scale(beta, dt),
        })
    }

    pub fn beta(&self) -> FractionalOrder {
        self.weights.beta()
    }

    /// `1 / (dt^beta Gamma(2 - beta))`: the derivative of a unit increment taken in the last step.
    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Largest `n + 1` for which the kernel has weights.
    pub fn capacity(&self) -> usize {
        self.weights.len() - 1
    }

    /// Derivative at `t_{n+1}` given the stored series `u_0..u_n` and the new value `u_{n+1}`.
    ///
    /// # Panics
    /// If `history` is empty or longer than the kernel capacity.
    #[inline]
    pub fn derivative(&self, history: &[f64], next: f64) -> f64 {
        assert!(
            !history.is_empty() && history.len() <= self.weights.len(),
            "L1 kernel capacity exceeded"
        );
        let last = history[history.len() - 1];
        (next - last + history_sum(self.weights.as_slice(), history)) * self.scale
    }

    /// Trial derivative at `t_{n+1}` with `u_{n+1} = u_n`.
    ///
    /// # Panics
    /// As [`L1Kernel::derivative`].
    #[inline]
    pub fn trial(&self, history: &[f64]) -> f64 {
        assert!(
            !history.is_empty() && history.len() <= self.weights.len(),
            "L1 kernel capacity exceeded"
        );
        history_sum(self.weights.as_slice(), history) * self.scale
    }
}
