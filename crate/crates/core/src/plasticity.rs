//! Semi-implicit fractional return mapping for the damaged visco-elasto-plastic
//! model.
//!
//! Per step, the plastic strain and hardening variable are frozen to build the
//! trial stress and yield value. If the trial state is admissible the step is
//! visco-elastic. Otherwise the plastic slip is obtained from the discrete
//! consistency condition. The stress, plastic strain and hardening variable are
//! then updated, followed by the visco-elastic energy release rate. Damage is
//! updated last by a scalar Newton solve. Damage enters stress and yield at its
//! previous value and takes effect from the next step.

use crate::energy::{EnergyMode, FreeEnergy};
use crate::error::{Error, Result};
use crate::fracops::{caputo_l1, FractionalOrder, L1Kernel, TimeGrid};

/// Damage at or above `1 - FAILURE_MARGIN` is treated as material failure.
pub const FAILURE_MARGIN: f64 = 1e-8;

/// Material constants. Pseudo-constants pair with their fractional order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Visco-elastic pseudo-constant `E` [Pa s^beta_E].
    pub e_pseudo: f64,
    pub beta_e: FractionalOrder,
    /// Visco-plastic pseudo-constant `K` [Pa s^beta_K].
    pub k_pseudo: f64,
    pub beta_k: FractionalOrder,
    /// Linear isotropic hardening modulus `H` [Pa].
    pub hardening: f64,
    /// Initial yield stress [Pa].
    pub yield_stress: f64,
    /// Damage strength `S` [Pa].
    pub damage_strength: f64,
    /// Damage exponent `s`.
    pub damage_exponent: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        positive("E_pseudo", self.e_pseudo)?;
        self.beta_e.require_open("beta_E")?;
        positive("K_pseudo", self.k_pseudo)?;
        self.beta_k.require_open("beta_K")?;
        if !(self.hardening.is_finite() && self.hardening >= 0.0) {
            return Err(Error::invalid(
                "H",
                format!("must be nonnegative and finite, got {}", self.hardening),
            ));
        }
        positive("tau_Y", self.yield_stress)?;
        // S may be huge (1e30) to switch damage off, but not infinite
        positive("S", self.damage_strength)?;
        positive("s", self.damage_exponent)?;
        Ok(())
    }
}

/// Per-step state series, all of length `n + 1` after `n` steps and starting at zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateHistory {
    pub eps_total: Vec<f64>,
    pub eps_vp: Vec<f64>,
    pub eps_ve: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma_increments: Vec<f64>,
    pub damage: Vec<f64>,
    pub stress: Vec<f64>,
    pub y_ve: Vec<f64>,
    pub f_trial: Vec<f64>,
}

/// One row of a [`StateHistory`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateRow {
    pub eps_total: f64,
    pub eps_vp: f64,
    pub eps_ve: f64,
    pub alpha: f64,
    pub gamma_increment: f64,
    pub damage: f64,
    pub stress: f64,
    pub y_ve: f64,
    pub f_trial: f64,
}

impl StateHistory {
    /// History holding only the homogeneous initial state.
    pub fn new() -> Self {
        let mut h = Self::default();
        h.push(StateRow::default());
        h
    }

    pub fn with_capacity(steps: usize) -> Self {
        let cap = steps + 1;
        let mut h = Self {
            eps_total: Vec::with_capacity(cap),
            eps_vp: Vec::with_capacity(cap),
            eps_ve: Vec::with_capacity(cap),
            alpha: Vec::with_capacity(cap),
            gamma_increments: Vec::with_capacity(cap),
            damage: Vec::with_capacity(cap),
            stress: Vec::with_capacity(cap),
            y_ve: Vec::with_capacity(cap),
            f_trial: Vec::with_capacity(cap),
        };
        h.push(StateRow::default());
        h
    }

    /// Number of stored time levels (steps taken plus one).
    pub fn len(&self) -> usize {
        self.eps_total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps_total.is_empty()
    }

    pub fn row(&self, k: usize) -> StateRow {
        StateRow {
            eps_total: self.eps_total[k],
            eps_vp: self.eps_vp[k],
            eps_ve: self.eps_ve[k],
            alpha: self.alpha[k],
            gamma_increment: self.gamma_increments[k],
            damage: self.damage[k],
            stress: self.stress[k],
            y_ve: self.y_ve[k],
            f_trial: self.f_trial[k],
        }
    }

    pub fn last(&self) -> Option<StateRow> {
        (!self.is_empty()).then(|| self.row(self.len() - 1))
    }

    fn push(&mut self, row: StateRow) {
        self.eps_total.push(row.eps_total);
        self.eps_vp.push(row.eps_vp);
        self.eps_ve.push(row.eps_ve);
        self.alpha.push(row.alpha);
        self.gamma_increments.push(row.gamma_increment);
        self.damage.push(row.damage);
        self.stress.push(row.stress);
        self.y_ve.push(row.y_ve);
        self.f_trial.push(row.f_trial);
    }

    fn check_lengths(&self) -> Result<()> {
        let n = self.eps_total.len();
        let lens = [
            self.eps_vp.len(),
            self.eps_ve.len(),
            self.alpha.len(),
            self.gamma_increments.len(),
            self.damage.len(),
            self.stress.len(),
            self.y_ve.len(),
            self.f_trial.len(),
        ];
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err(Error::Internal(format!(
                "inconsistent history lengths: eps_total {n}, others {lens:?}"
            )));
        }
        Ok(())
    }

    /// Checks the structural invariants: kinematic split `eps_ve = eps_total - eps_vp`
    /// (bitwise, so the sum identity holds to half an ulp of `eps_ve`), monotone hardening and
    /// damage, nonpositive release rate, homogeneous initial row.
    pub fn check_invariants(&self) -> Result<()> {
        self.check_lengths()?;
        let first = self.row(0);
        if first != StateRow::default() {
            return Err(Error::Internal(format!("nonzero initial state {first:?}")));
        }
        for k in 0..self.len() {
            // eps_ve is the correctly rounded difference; bitwise equality is the exact split
            if self.eps_ve[k] != self.eps_total[k] - self.eps_vp[k] {
                return Err(Error::Internal(format!("strain split broken at step {k}")));
            }
            if !(self.gamma_increments[k] >= 0.0) {
                return Err(Error::Internal(format!("negative slip at step {k}")));
            }
            if !(self.y_ve[k] <= 0.0) {
                return Err(Error::Internal(format!("positive release rate at step {k}")));
            }
            if !(self.damage[k] >= 0.0 && self.damage[k] < 1.0) {
                return Err(Error::Internal(format!("damage out of range at step {k}")));
            }
            if k > 0 {
                if self.alpha[k] < self.alpha[k - 1] {
                    return Err(Error::Internal(format!("hardening decreased at step {k}")));
                }
                if self.damage[k] < self.damage[k - 1] {
                    return Err(Error::Internal(format!("damage healed at step {k}")));
                }
            }
        }
        Ok(())
    }
}

/// Trial stress and trial yield value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialState {
    pub stress: f64,
    pub yield_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Elastic,
    Plastic,
}

/// Newton settings for the damage update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Absolute tolerance on the damage residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

/// `(-Y / S)^s`, the damage driving term.
#[inline]
fn damage_drive(y_ve: f64, strength: f64, exponent: f64) -> f64 {
    (-y_ve / strength).max(0.0).powf(exponent)
}

/// Plastic slip from the discrete consistency condition.
///
/// The slip is zero before `t_n`, so each Caputo derivative of it keeps only its
/// newest L1 term. The multi-term equation becomes a scalar linear solve.
pub fn plastic_slip_increment(f_trial: f64, damage: f64, params: &MaterialParams, dt: f64) -> Result<f64> {
    if !(f_trial > 0.0) {
        return Err(Error::invalid(
            "f_trial",
            format!("plastic slip requires a positive trial yield value, got {f_trial}"),
        ));
    }
    if damage >= 1.0 {
        return Err(Error::MaterialFailure { damage });
    }
    if !(damage >= 0.0) {
        return Err(Error::invalid("D", format!("must be nonnegative, got {damage}")));
    }
    let scale_e = crate::fracops::l1_scale(params.beta_e, dt);
    let scale_k = crate::fracops::l1_scale(params.beta_k, dt);
    Ok(slip(f_trial, damage, params, scale_e, scale_k))
}

#[inline]
fn slip(f_trial: f64, damage: f64, params: &MaterialParams, scale_e: f64, scale_k: f64) -> f64 {
    let stiffness = params.e_pseudo * scale_e + params.k_pseudo * scale_k + params.hardening;
    f_trial / ((1.0 - damage) * stiffness)
}

/// Returns the trial stress towards the yield surface by the slip `delta_gamma`.
pub fn stress_update(tau_trial: f64, delta_gamma: f64, damage: f64, params: &MaterialParams, dt: f64) -> Result<f64> {
    if !(delta_gamma >= 0.0) {
        return Err(Error::invalid(
            "delta_gamma",
            format!("must be nonnegative, got {delta_gamma}"),
        ));
    }
    let scale_e = crate::fracops::l1_scale(params.beta_e, dt);
    Ok(relax(tau_trial, delta_gamma, damage, params.e_pseudo * scale_e))
}

#[inline]
fn relax(tau_trial: f64, delta_gamma: f64, damage: f64, elastic_stiffness: f64) -> f64 {
    if delta_gamma == 0.0 {
        return tau_trial;
    }
    tau_trial - tau_trial.signum() * (1.0 - damage) * elastic_stiffness * delta_gamma
}

/// Yield function `|tau| - (1 - D)[tau_Y + K D^beta_K(alpha) + H alpha_{n+1}]` for the
/// hardening series `alpha_0..alpha_{n+1}`.
pub fn yield_function(tau: f64, alpha: &[f64], damage: f64, params: &MaterialParams, dt: f64) -> Result<f64> {
    let alpha_next = *alpha.last().ok_or(Error::LengthMismatch {
        context: "yield_function alpha series",
        expected: 1,
        actual: 0,
    })?;
    let rate = if alpha.len() >= 2 {
        caputo_l1(alpha, params.beta_k, dt)?
    } else {
        0.0
    };
    Ok(yield_value(tau, damage, params, params.k_pseudo * rate, alpha_next))
}

#[inline]
fn yield_value(tau: f64, damage: f64, params: &MaterialParams, viscous: f64, alpha: f64) -> f64 {
    let resistance = (1.0 - damage) * (viscous + params.hardening * alpha);
    yield_with_resistance(tau, resistance, damage, params.yield_stress)
}

/// Yield function in terms of the damaged hardening resistance `R`:
/// `|tau| - [(1 - D) tau_Y + R]`.
#[inline]
pub fn yield_with_resistance(tau: f64, resistance: f64, damage: f64, yield_stress: f64) -> f64 {
    tau.abs() - ((1.0 - damage) * yield_stress + resistance)
}

/// Smaller root of `(D - D_n)(1 - D) = drive`, i.e. of the damage residual multiplied by `(1 - D)`.
/// `None` when the discriminant is negative (no admissible damage state).
pub fn damage_quadratic_root(damage_n: f64, drive: f64) -> Option<f64> {
    let disc = (1.0 - damage_n).powi(2) - 4.0 * drive;
    if disc < 0.0 {
        return None;
    }
    // c / ((1 + D_n + sqrt(disc)) / 2) with c = D_n + drive: avoids the cancellation of the textbook form
    let c = damage_n + drive;
    Some(2.0 * c / (1.0 + damage_n + disc.sqrt()))
}

/// Newton solve of `P(D) = D - D_n - delta_gamma / (1 - D) * (-Y/S)^s = 0` from `D = D_n`,
/// with `dP/dD = 1 - delta_gamma / (1 - D)^2 * (-Y/S)^s`.
///
/// `P` is concave and increasing below its smaller root, so the iterates increase
/// monotonically towards that root.
pub fn damage_newton(
    damage_n: f64,
    delta_gamma: f64,
    y_ve: f64,
    strength: f64,
    exponent: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if !(0.0..1.0).contains(&damage_n) {
        return Err(Error::invalid("D_n", format!("must lie in [0, 1), got {damage_n}")));
    }
    if !(delta_gamma >= 0.0) {
        return Err(Error::invalid(
            "delta_gamma",
            format!("must be nonnegative, got {delta_gamma}"),
        ));
    }
    if !(y_ve <= 0.0) {
        return Err(Error::invalid("Y_ve", format!("must be nonpositive, got {y_ve}")));
    }
    let growth = delta_gamma * damage_drive(y_ve, strength, exponent);
    let mut d = damage_n;
    for k in 0..max_iter.max(1) {
        let residual = d - damage_n - growth / (1.0 - d);
        let slope = 1.0 - growth / (1.0 - d).powi(2);
        if residual.abs() <= tol {
            // one more correction: the error after a quadratically converging step is negligible
            if slope > 0.0 {
                d = (d - residual / slope).max(damage_n);
            }
            if d >= 1.0 - FAILURE_MARGIN {
                return Err(Error::MaterialFailure { damage: d });
            }
            return Ok(d);
        }
        if k + 1 == max_iter.max(1) {
            break;
        }
        if slope <= 0.0 {
            // P is concave with P < 0 at its maximum: no admissible root
            return Err(Error::MaterialFailure { damage: d });
        }
        d -= residual / slope;
        if !d.is_finite() || d >= 1.0 - FAILURE_MARGIN {
            return Err(Error::MaterialFailure { damage: d });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        last: d,
    })
}

/// Constitutive box for one material point on a fixed grid.
///
/// Holds the L1 kernels for both fractional orders and the free-energy evaluator;
/// all are built once for the full trajectory length.
#[derive(Debug)]
pub struct ReturnMapping {
    params: MaterialParams,
    dt: f64,
    elastic: L1Kernel,
    hardening: L1Kernel,
    energy: FreeEnergy,
    newton: NewtonSettings,
    increments: Vec<f64>,
    capacity: usize,
}

impl ReturnMapping {
    pub fn new(params: MaterialParams, grid: &TimeGrid, mode: EnergyMode) -> Result<Self> {
        Self::with_capacity(params, grid.dt(), grid.steps(), mode)
    }

    /// Return mapping able to take `steps` steps of size `dt`.
    pub fn with_capacity(params: MaterialParams, dt: f64, steps: usize, mode: EnergyMode) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            dt,
            elastic: L1Kernel::new(params.beta_e, dt, steps)?,
            hardening: L1Kernel::new(params.beta_k, dt, steps)?,
            energy: FreeEnergy::new(params.beta_e, params.e_pseudo, dt, steps, mode)?,
            newton: NewtonSettings::default(),
            increments: Vec::with_capacity(steps),
            capacity: steps,
        })
    }

    pub fn with_newton(mut self, newton: NewtonSettings) -> Self {
        self.newton = newton;
        self
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn energy_mode(&self) -> EnergyMode {
        self.energy.mode()
    }

    /// Trial stress and yield value at `t_{n+1}` for total strain `eps_next`.
    pub fn trial(&self, history: &StateHistory, eps_next: f64) -> Result<TrialState> {
        history.check_lengths()?;
        let n = history.len() - 1;
        if n >= self.capacity {
            return Err(Error::Internal(format!(
                "history has {n} steps; return mapping was built for {}",
                self.capacity
            )));
        }
        let p = &self.params;
        let damage = history.damage[n];
        let ve_next = eps_next - history.eps_vp[n];
        let stress = (1.0 - damage) * p.e_pseudo * self.elastic.derivative(&history.eps_ve, ve_next);
        let viscous = p.k_pseudo * self.hardening.trial(&history.alpha);
        Ok(TrialState {
            stress,
            yield_value: yield_value(stress, damage, p, viscous, history.alpha[n]),
        })
    }

    /// Advances `history` by one step to total strain `eps_next`.
    ///
    /// On [`Error::MaterialFailure`] the history is left unchanged.
    pub fn step(&mut self, history: &mut StateHistory, eps_next: f64) -> Result<StepKind> {
        let trial = self.trial(history, eps_next)?;
        let n = history.len() - 1;
        let p = self.params;
        let damage_n = history.damage[n];
        let alpha_n = history.alpha[n];

        let (kind, stress, delta_gamma, vp_next, alpha_next) = if trial.yield_value <= 0.0 {
            (StepKind::Elastic, trial.stress, 0.0, history.eps_vp[n], alpha_n)
        } else {
            if trial.stress == 0.0 {
                return Err(Error::Internal("plastic step with zero trial stress".into()));
            }
            if damage_n >= 1.0 {
                return Err(Error::MaterialFailure { damage: damage_n });
            }
            let delta_gamma = slip(
                trial.yield_value,
                damage_n,
                &p,
                self.elastic.scale(),
                self.hardening.scale(),
            );
            let stress = relax(trial.stress, delta_gamma, damage_n, p.e_pseudo * self.elastic.scale());
            if stress.signum() != trial.stress.signum() {
                return Err(Error::Internal(format!(
                    "return mapping flipped the stress sign at step {}",
                    n + 1
                )));
            }
            let vp = history.eps_vp[n] + stress.signum() * delta_gamma;
            (StepKind::Plastic, stress, delta_gamma, vp, alpha_n + delta_gamma)
        };

        let ve_next = eps_next - vp_next;

        // release rate on the updated visco-elastic increments
        self.increments.clear();
        self.increments.push(ve_next - history.eps_ve[n]);
        self.increments
            .extend(history.eps_ve.windows(2).rev().map(|w| w[1] - w[0]));
        let psi = self.energy.evaluate(&self.increments);
        let y_ve = (-psi).min(0.0);

        let damage_next = match kind {
            StepKind::Elastic => damage_n,
            StepKind::Plastic => self.update_damage(damage_n, delta_gamma, y_ve)?,
        };

        history.push(StateRow {
            eps_total: eps_next,
            eps_vp: vp_next,
            eps_ve: ve_next,
            alpha: alpha_next,
            gamma_increment: delta_gamma,
            damage: damage_next,
            stress,
            y_ve,
            f_trial: trial.yield_value,
        });
        Ok(kind)
    }

    fn update_damage(&self, damage_n: f64, delta_gamma: f64, y_ve: f64) -> Result<f64> {
        let p = &self.params;
        match damage_newton(
            damage_n,
            delta_gamma,
            y_ve,
            p.damage_strength,
            p.damage_exponent,
            self.newton.tol,
            self.newton.max_iter,
        ) {
            Err(Error::NonConvergence { last, .. }) => {
                let drive = delta_gamma * damage_drive(y_ve, p.damage_strength, p.damage_exponent);
                match damage_quadratic_root(damage_n, drive) {
                    Some(root) if root < 1.0 - FAILURE_MARGIN => Ok(root.max(damage_n)),
                    Some(root) => Err(Error::MaterialFailure { damage: root }),
                    None => Err(Error::MaterialFailure { damage: last }),
                }
            }
            other => other,
        }
    }
}

/// One return-mapping step with kernels built on the fly (O(n) setup per call).
/// For trajectories use [`ReturnMapping`].
pub fn step(
    history: &StateHistory,
    eps_next: f64,
    params: &MaterialParams,
    dt: f64,
    mode: EnergyMode,
) -> Result<StateHistory> {
    let mut mapping = ReturnMapping::with_capacity(*params, dt, history.len(), mode)?;
    let mut next = history.clone();
    mapping.step(&mut next, eps_next)?;
    Ok(next)
}

/// Trial state with kernels built on the fly.
pub fn trial_state(history: &StateHistory, params: &MaterialParams, eps_next: f64, dt: f64) -> Result<TrialState> {
    let mapping = ReturnMapping::with_capacity(*params, dt, history.len(), EnergyMode::Direct)?;
    mapping.trial(history, eps_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::gamma;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn order(b: f64) -> FractionalOrder {
        FractionalOrder::new(b).unwrap()
    }

    fn monotone_params(beta_k: f64) -> MaterialParams {
        MaterialParams {
            e_pseudo: 50.0,
            beta_e: order(0.5),
            k_pseudo: 10.0,
            beta_k: order(beta_k),
            hardening: 0.0,
            yield_stress: 1.0,
            damage_strength: 1e-4,
            damage_exponent: 1.0,
        }
    }

    #[test]
    fn validation_is_field_level() {
        let mut p = monotone_params(0.5);
        assert!(p.validate().is_ok());
        p.beta_k = order(1.0);
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParameter { name: "beta_K", .. })
        ));
        let mut p = monotone_params(0.5);
        p.hardening = -1.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "H", .. })));
        let mut p = monotone_params(0.5);
        p.damage_strength = 0.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "S", .. })));
    }

    #[test]
    fn first_step_trial_examples() {
        let p = monotone_params(0.5);
        let h = StateHistory::new();
        let t = trial_state(&h, &p, 0.0, 0.01).unwrap();
        assert_eq!(t.stress, 0.0);
        assert_eq!(t.yield_value, -1.0);

        let (dt, eps) = (0.01, 1e-4);
        let t = trial_state(&h, &p, eps, dt).unwrap();
        let expected = 50.0 * eps / (dt.sqrt() * gamma(1.5));
        assert!((t.stress - expected).abs() <= 1e-14 * expected);
        assert!(t.yield_value <= 0.0);
        assert!((t.yield_value - (expected - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn slip_examples() {
        let mut p = monotone_params(0.5);
        p.hardening = 0.0;
        let f = gamma(1.5) * 60.0;
        let dg = plastic_slip_increment(f, 0.0, &p, 1.0).unwrap();
        assert!((dg - gamma(1.5).powi(2)).abs() < 1e-14);
        let dg_damaged = plastic_slip_increment(f, 0.5, &p, 1.0).unwrap();
        assert!((dg_damaged - 2.0 * dg).abs() < 1e-14);
        let tiny = plastic_slip_increment(1e-300, 0.0, &p, 1.0).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-298);
        assert!(plastic_slip_increment(0.0, 0.0, &p, 1.0).is_err());
        assert!(plastic_slip_increment(-1.0, 0.0, &p, 1.0).is_err());
        assert!(matches!(
            plastic_slip_increment(1.0, 1.0, &p, 1.0),
            Err(Error::MaterialFailure { .. })
        ));
    }

    #[test]
    fn stress_update_examples() {
        let p = monotone_params(0.5);
        assert_eq!(stress_update(3.0, 0.0, 0.2, &p, 0.01).unwrap(), 3.0);
        assert!(stress_update(3.0, -1e-3, 0.2, &p, 0.01).is_err());
        let neg = stress_update(-3.0, 1e-4, 0.2, &p, 0.01).unwrap();
        let pos = stress_update(3.0, 1e-4, 0.2, &p, 0.01).unwrap();
        assert_eq!(neg, -pos);
    }

    #[test]
    fn return_lands_on_yield_surface_without_k_and_h() {
        // K -> 0 limit (K must stay positive) and H = 0
        let mut p = monotone_params(0.5);
        p.k_pseudo = 1e-300;
        let dt = 1e-3;
        let h = StateHistory::new();
        let t = trial_state(&h, &p, 0.05, dt).unwrap();
        assert!(t.yield_value > 0.0);
        let dg = plastic_slip_increment(t.yield_value, 0.0, &p, dt).unwrap();
        let tau = stress_update(t.stress, dg, 0.0, &p, dt).unwrap();
        assert!((tau.abs() - p.yield_stress).abs() <= 1e-10);
        let f = yield_function(tau, &[0.0, dg], 0.0, &p, dt).unwrap();
        assert!(f.abs() <= 1e-10 * p.yield_stress);
    }

    #[test]
    fn yield_function_at_rest() {
        let p = monotone_params(0.3);
        assert_eq!(yield_function(0.0, &[0.0], 0.0, &p, 0.1).unwrap(), -1.0);
        assert_eq!(yield_function(0.0, &[0.0, 0.0, 0.0], 0.0, &p, 0.1).unwrap(), -1.0);
        assert!(yield_function(0.0, &[], 0.0, &p, 0.1).is_err());
    }

    #[test]
    fn damage_newton_examples() {
        assert_eq!(damage_newton(0.3, 0.0, -5.0, 1.0, 1.0, 1e-12, 100).unwrap(), 0.3);
        let d = damage_newton(0.0, 0.09, -1.0, 1.0, 1.0, 1e-12, 100).unwrap();
        assert!((d - 0.1).abs() <= 1e-12);
        assert!(damage_newton(1.0, 0.1, -1.0, 1.0, 1.0, 1e-12, 100).is_err());
        assert!(damage_newton(0.1, -0.1, -1.0, 1.0, 1.0, 1e-12, 100).is_err());
        assert!(damage_newton(0.1, 0.1, 1.0, 1.0, 1.0, 1e-12, 100).is_err());
        // no admissible root: (1 - D_n)^2 < 4 drive
        assert!(matches!(
            damage_newton(0.0, 0.5, -1.0, 1.0, 1.0, 1e-12, 100),
            Err(Error::MaterialFailure { .. })
        ));
        assert!(matches!(
            damage_newton(0.0, 0.09, -1.0, 1.0, 1.0, 1e-30, 3),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn newton_matches_quadratic_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let dn: f64 = rng.gen_range(0.0..0.95);
            let max_drive = (1.0 - dn).powi(2) / 4.0;
            let drive = rng.gen_range(0.0..0.99 * max_drive);
            let s: f64 = rng.gen_range(0.5..2.0);
            let y = -(drive.powf(1.0 / s));
            let d = damage_newton(dn, 1.0, y, 1.0, s, 1e-12, 100).unwrap();
            let disc = (1.0 - dn).powi(2) - 4.0 * drive;
            let oracle = ((1.0 + dn) - disc.sqrt()) / 2.0;
            assert!((d - oracle).abs() <= 1e-12, "dn={dn} drive={drive}: {d} vs {oracle}");
            assert!(d >= dn);
        }
    }

    #[test]
    fn zero_strain_stays_zero() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let mut rm = ReturnMapping::new(monotone_params(0.5), &grid, EnergyMode::Direct).unwrap();
        let mut h = StateHistory::new();
        for _ in 0..32 {
            rm.step(&mut h, 0.0).unwrap();
        }
        assert_eq!(h.len(), 33);
        for series in [&h.eps_vp, &h.eps_ve, &h.alpha, &h.damage, &h.stress, &h.y_ve] {
            assert!(series.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn elastic_reversal_is_scott_blair() {
        let mut p = monotone_params(0.5);
        p.yield_stress = 1e9;
        let dt = 0.01;
        let eps = [0.0, 0.01, 0.004, -0.002, 0.001];
        let mut h = StateHistory::new();
        let mut rm = ReturnMapping::with_capacity(p, dt, 4, EnergyMode::Direct).unwrap();
        for &e in &eps[1..] {
            assert_eq!(rm.step(&mut h, e).unwrap(), StepKind::Elastic);
        }
        for m in 1..eps.len() {
            let sb = p.e_pseudo * caputo_l1(&eps[..=m], p.beta_e, dt).unwrap();
            assert!((h.stress[m] - sb).abs() <= 1e-12 * sb.abs().max(1.0));
        }
    }

    #[test]
    fn free_step_function_extends_history() {
        let p = monotone_params(0.5);
        let h = StateHistory::new();
        let h1 = step(&h, 0.001, &p, 1e-3, EnergyMode::Auto).unwrap();
        let h2 = step(&h1, 0.002, &p, 1e-3, EnergyMode::Auto).unwrap();
        assert_eq!(h2.len(), 3);
        h2.check_invariants().unwrap();
    }

    #[test]
    fn inconsistent_history_is_internal_error() {
        let p = monotone_params(0.5);
        let mut h = StateHistory::new();
        h.alpha.push(0.0);
        assert!(matches!(trial_state(&h, &p, 0.1, 0.1), Err(Error::Internal(_))));
    }

    proptest! {
        #[test]
        fn yield_function_is_convex(
            tau1 in -10.0f64..10.0, tau2 in -10.0f64..10.0,
            r1 in 0.0f64..2.0, r2 in 0.0f64..2.0,
            xi in 0.0f64..=1.0,
            d in 0.0f64..0.9,
        ) {
            // single-step hardening series [0, r]: f is affine in r, convex in tau
            let p = monotone_params(0.5);
            let dt = 0.01;
            let f = |t: f64, r: f64| yield_function(t, &[0.0, r], d, &p, dt).unwrap();
            let mix = f(xi * tau1 + (1.0 - xi) * tau2, xi * r1 + (1.0 - xi) * r2);
            let chord = xi * f(tau1, r1) + (1.0 - xi) * f(tau2, r2);
            prop_assert!(mix <= chord + 1e-12 * chord.abs().max(1.0));
        }
    }
}
