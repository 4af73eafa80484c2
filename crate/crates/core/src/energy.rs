//! Discrete fractional Helmholtz free-energy density and the visco-elastic
//! damage energy release rate.
//!
//! With newest-first strain increments `x_i = eps_{n+1-i} - eps_{n-i}`, `i = 0..=n`,
//!
//! ```text
//! psi_{n+1} = E / (2 dt^beta Gamma(3 - beta)) * sum_{i,j} b_{i+j} x_i x_j
//! b_k       = k^{2-beta} - 2 (k+1)^{2-beta} + (k+2)^{2-beta}
//! ```
//!
//! The `(n+1) x (n+1)` weight matrix `B_ij = b_{i+j}` is Hankel. Writing `B = T J`
//! with `J` the reversal and `T` Toeplitz, `T` is embedded in a circulant whose
//! first column is `[b_n, ..., b_{2n}, 0, ..., 0, b_0, ..., b_{n-1}]`, so the
//! matrix-vector product costs one real FFT convolution.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::fracops::{gamma, FractionalOrder};

/// Trajectories longer than this use the FFT path under [`EnergyMode::Auto`].
pub const AUTO_FFT_THRESHOLD: usize = 256;

/// Free-energy weights `b_0, ..., b_{2n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelWeights {
    beta: FractionalOrder,
    b: Vec<f64>,
}

impl HankelWeights {
    pub fn beta(&self) -> FractionalOrder {
        self.beta
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Dense `(n+1) x (n+1)` Hankel matrix `B_ij = b_{i+j}`. Test helper; O(n^2) memory.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.b.len() / 2;
        (0..=n).map(|i| self.b[i..=i + n].to_vec()).collect()
    }
}

fn hankel_weight(a: f64, k: usize) -> f64 {
    if k == 0 || a == 1.0 || a == 2.0 {
        // exact in floating point for integer exponents
        let x = k as f64;
        return x.powf(a) - 2.0 * (x + 1.0).powf(a) + (x + 2.0).powf(a);
    }
    // Centered at m = k + 1 with h = 1/m:
    //   b_k = m^a [(1+h)^a - 2 + (1-h)^a] = 2 m^a sum_{r>=1} C(a, 2r) h^{2r}.
    // For 1 < a < 2 every even binomial term is positive, so there is no cancellation.
    let m = (k + 1) as f64;
    let h2 = 1.0 / (m * m);
    let mut coeff = a * (a - 1.0) / 2.0; // C(a, 2)
    let mut pow = h2;
    let mut sum = 0.0;
    let mut r = 1usize;
    loop {
        let term = coeff * pow;
        sum += term;
        if term <= sum * 1e-17 || r > 200 {
            break;
        }
        let j = 2 * r;
        coeff *= (a - j as f64) * (a - j as f64 - 1.0) / ((j + 1) as f64 * (j + 2) as f64);
        pow *= h2;
        r += 1;
    }
    2.0 * m.powf(a) * sum
}

/// The `2n + 1` unique Hankel weights `b_0..b_{2n}`.
pub fn hankel_weights(beta: FractionalOrder, n: usize) -> HankelWeights {
    let a = 2.0 - beta.value();
    HankelWeights {
        beta,
        b: (0..=2 * n).map(|k| hankel_weight(a, k)).collect(),
    }
}

/// Strain increments ordered newest first: entry `i` is `eps_{n+1-i} - eps_{n-i}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrainIncrements(Vec<f64>);

impl StrainIncrements {
    pub fn new(newest_first: Vec<f64>) -> Self {
        Self(newest_first)
    }

    /// Increments of the series `eps_0, ..., eps_{n+1}`.
    pub fn from_series(series: &[f64]) -> Self {
        let mut out = Vec::new();
        fill_increments(series, &mut out);
        Self(out)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `eps_{n+1} - eps_0`.
    pub fn total(&self) -> f64 {
        self.0.iter().rev().sum()
    }
}

/// Writes the newest-first increments of `series` into `out`.
pub(crate) fn fill_increments(series: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(series.windows(2).rev().map(|w| w[1] - w[0]));
}

/// Selects how the Hankel quadratic form is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyMode {
    /// O(n^2) per evaluation.
    Direct,
    /// O(n log n) per evaluation.
    Fft,
    /// Direct for trajectories of at most [`AUTO_FFT_THRESHOLD`] steps, FFT beyond.
    #[default]
    Auto,
}

impl EnergyMode {
    /// Concrete mode for a trajectory of `steps` steps.
    pub fn resolve(self, steps: usize) -> EnergyMode {
        match self {
            EnergyMode::Auto if steps > AUTO_FFT_THRESHOLD => EnergyMode::Fft,
            EnergyMode::Auto => EnergyMode::Direct,
            mode => mode,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnergyMode::Direct => "direct",
            EnergyMode::Fft => "fft",
            EnergyMode::Auto => "auto",
        }
    }
}

impl fmt::Display for EnergyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnergyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(EnergyMode::Direct),
            "fft" => Ok(EnergyMode::Fft),
            "auto" => Ok(EnergyMode::Auto),
            other => Err(Error::invalid(
                "mode",
                format!("expected one of direct, fft, auto; got `{other}`"),
            )),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ca, ra) = a.split_at(a.len() - a.len() % 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `x^T B x` with `B_ij = b_{i+j}` by the row-wise Hankel matvec.
pub fn hankel_quadratic_direct(b: &[f64], x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() - 1;
    assert!(b.len() > 2 * n, "need {} Hankel weights, have {}", 2 * n + 1, b.len());
    x.iter().enumerate().map(|(i, &xi)| xi * dot(&b[i..=i + n], x)).sum()
}

/// Reusable FFT workspace for the Hankel quadratic form.
pub struct HankelFft {
    planner: RealFftPlanner<f64>,
    len: usize,
    forward: Option<Arc<dyn RealToComplex<f64>>>,
    inverse: Option<Arc<dyn ComplexToReal<f64>>>,
    coeffs: Vec<f64>,
    signal: Vec<f64>,
    coeffs_hat: Vec<Complex<f64>>,
    signal_hat: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Default for HankelFft {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for HankelFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HankelFft").field("len", &self.len).finish()
    }
}

impl HankelFft {
    pub fn new() -> Self {
        Self {
            planner: RealFftPlanner::new(),
            len: 0,
            forward: None,
            inverse: None,
            coeffs: Vec::new(),
            signal: Vec::new(),
            coeffs_hat: Vec::new(),
            signal_hat: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn prepare(&mut self, len: usize) {
        if self.len == len {
            return;
        }
        let forward = self.planner.plan_fft_forward(len);
        let inverse = self.planner.plan_fft_inverse(len);
        self.coeffs = forward.make_input_vec();
        self.signal = forward.make_input_vec();
        self.coeffs_hat = forward.make_output_vec();
        self.signal_hat = forward.make_output_vec();
        let scratch = forward.get_scratch_len().max(inverse.get_scratch_len());
        self.scratch = vec![Complex::new(0.0, 0.0); scratch];
        self.forward = Some(forward);
        self.inverse = Some(inverse);
        self.len = len;
    }

    /// `x^T B x` with `B_ij = b_{i+j}`, via the circulant embedding of `T = B J`.
    pub fn quadratic_form(&mut self, b: &[f64], x: &[f64]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let n = x.len() - 1;
        assert!(b.len() > 2 * n, "need {} Hankel weights, have {}", 2 * n + 1, b.len());
        if n == 0 {
            return b[0] * x[0] * x[0];
        }
        let len = (2 * (n + 1)).next_power_of_two();
        self.prepare(len);

        // first column of the circulant embedding
        self.coeffs.fill(0.0);
        self.coeffs[..=n].copy_from_slice(&b[n..=2 * n]);
        self.coeffs[len - n..].copy_from_slice(&b[..n]);
        // reflected, zero-padded increments (oldest first)
        self.signal.fill(0.0);
        for (dst, &src) in self.signal[..=n].iter_mut().zip(x.iter().rev()) {
            *dst = src;
        }

        let forward = self.forward.as_ref().expect("prepared");
        let inverse = self.inverse.as_ref().expect("prepared");
        forward
            .process_with_scratch(&mut self.coeffs, &mut self.coeffs_hat, &mut self.scratch)
            .expect("buffer lengths fixed by the plan");
        forward
            .process_with_scratch(&mut self.signal, &mut self.signal_hat, &mut self.scratch)
            .expect("buffer lengths fixed by the plan");
        for (s, c) in self.signal_hat.iter_mut().zip(&self.coeffs_hat) {
            *s *= *c;
        }
        // real-input spectra: DC and Nyquist bins are real
        self.signal_hat[0].im = 0.0;
        if let Some(last) = self.signal_hat.last_mut() {
            last.im = 0.0;
        }
        inverse
            .process_with_scratch(&mut self.signal_hat, &mut self.signal, &mut self.scratch)
            .expect("buffer lengths fixed by the plan");

        dot(&self.signal[..=n], x) / len as f64
    }
}

fn check_energy_inputs(e_pseudo: f64, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive and finite, got {dt}")));
    }
    if !(e_pseudo.is_finite() && e_pseudo > 0.0) {
        return Err(Error::invalid(
            "E_pseudo",
            format!("must be positive and finite, got {e_pseudo}"),
        ));
    }
    Ok(())
}

/// `E / (2 dt^beta Gamma(3 - beta))`.
pub fn energy_prefactor(beta: FractionalOrder, e_pseudo: f64, dt: f64) -> f64 {
    let b = beta.value();
    e_pseudo / (2.0 * dt.powf(b) * gamma(3.0 - b))
}

/// Free-energy density by the O(n^2) Hankel double sum.
pub fn free_energy_direct(increments: &StrainIncrements, beta: FractionalOrder, e_pseudo: f64, dt: f64) -> Result<f64> {
    check_energy_inputs(e_pseudo, dt)?;
    if increments.is_empty() {
        return Ok(0.0);
    }
    let weights = hankel_weights(beta, increments.len() - 1);
    Ok(energy_prefactor(beta, e_pseudo, dt) * hankel_quadratic_direct(weights.as_slice(), increments.as_slice()))
}

/// Free-energy density by FFT convolution, O(n log n).
pub fn free_energy_fft(increments: &StrainIncrements, beta: FractionalOrder, e_pseudo: f64, dt: f64) -> Result<f64> {
    check_energy_inputs(e_pseudo, dt)?;
    if increments.is_empty() {
        return Ok(0.0);
    }
    let weights = hankel_weights(beta, increments.len() - 1);
    let mut fft = HankelFft::new();
    Ok(energy_prefactor(beta, e_pseudo, dt) * fft.quadratic_form(weights.as_slice(), increments.as_slice()))
}

/// Damage energy release rate `Y = -psi` of the visco-elastic strain increments.
///
/// [`EnergyMode::Auto`] resolves on the length of the increment vector.
pub fn damage_energy_release(
    increments_ve: &StrainIncrements,
    beta_e: FractionalOrder,
    e_pseudo: f64,
    dt: f64,
    mode: EnergyMode,
) -> Result<f64> {
    let psi = match mode.resolve(increments_ve.len()) {
        EnergyMode::Fft => free_energy_fft(increments_ve, beta_e, e_pseudo, dt)?,
        _ => free_energy_direct(increments_ve, beta_e, e_pseudo, dt)?,
    };
    Ok(-psi)
}

/// Free-energy evaluator for one trajectory: the Hankel weights up to the final step
/// are computed once and sliced per step.
#[derive(Debug)]
pub struct FreeEnergy {
    weights: HankelWeights,
    prefactor: f64,
    mode: EnergyMode,
    fft: HankelFft,
}

impl FreeEnergy {
    /// Evaluator for increment vectors of up to `max_steps` entries.
    pub fn new(beta: FractionalOrder, e_pseudo: f64, dt: f64, max_steps: usize, mode: EnergyMode) -> Result<Self> {
        check_energy_inputs(e_pseudo, dt)?;
        Ok(Self {
            weights: hankel_weights(beta, max_steps.saturating_sub(1)),
            prefactor: energy_prefactor(beta, e_pseudo, dt),
            mode: mode.resolve(max_steps),
            fft: HankelFft::new(),
        })
    }

    pub fn mode(&self) -> EnergyMode {
        self.mode
    }

    /// `psi` for newest-first increments.
    ///
    /// # Panics
    /// If more increments are passed than the evaluator was built for.
    pub fn evaluate(&mut self, newest_first: &[f64]) -> f64 {
        let n = newest_first.len();
        assert!(
            n == 0 || self.weights.len() >= 2 * n - 1,
            "free-energy evaluator capacity exceeded"
        );
        let b = self.weights.as_slice();
        let form = match self.mode {
            EnergyMode::Fft => self.fft.quadratic_form(b, newest_first),
            _ => hankel_quadratic_direct(b, newest_first),
        };
        self.prefactor * form
    }
}

/// Analytic free energy for the quadratic strain `eps = (t/T)^2`.
pub fn psi_quadratic_exact(t: f64, t_final: f64, e_pseudo: f64, beta: FractionalOrder) -> Result<f64> {
    if !(t_final > 0.0) {
        return Err(Error::invalid("T", format!("must be positive, got {t_final}")));
    }
    if !(0.0..=t_final).contains(&t) {
        return Err(Error::invalid("t", format!("must lie in [0, {t_final}], got {t}")));
    }
    let b = beta.value();
    let eps = (t / t_final).powi(2);
    let coeff = 2f64.powf(2.0 - b) * (8.0 + 2f64.powf(b) * (b - 5.0)) / gamma(5.0 - b);
    Ok(coeff * t_final.powi(4) * e_pseudo * eps.powf(2.0 - b / 2.0))
}
