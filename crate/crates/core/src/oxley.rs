//! Extended Oxley model of orthogonal cutting with a Johnson-Cook workpiece.
//!
//! The equilibrium is found by three nested searches:
//!
//! * the shear angle `phi` balances the tool-chip interface shear stress
//!   against the chip flow stress in the secondary zone;
//! * the primary-zone strain-rate constant `c0` (ratio of the shear plane
//!   length to the primary zone thickness) balances the normal stress at the
//!   tool tip computed from the stress boundary condition against the one
//!   computed from the resultant force;
//! * the secondary-zone thickness ratio `delta` minimizes the cutting force.
//!
//! Shear-plane temperature is obtained by solving the thermal balance
//! `T = Tw + eta * dT(T)` with a bracketed root search on `[Tw, Tm]`; the root
//! always exists because the flow stress, and therefore the heat generated,
//! vanishes at the melting point.
//!
//! Geometric process parameters (`cutting_depth`, `cutting_width`, and the
//! resulting chip thickness) are numerically passed to the force equations
//! unchanged.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::scalar::{brent_min, monotone_root_near};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Fixed width of cut.
pub const CUTTING_WIDTH: f64 = 1.6e-4;

/// Lower and upper bound of one evolved process parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Bound { lower, upper }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

pub const SPEED_BOUND: Bound = Bound::new(0.1, 5.0);
pub const ANGLE_BOUND: Bound = Bound::new(-0.5, 1.0);
pub const DEPTH_BOUND: Bound = Bound::new(1.0e-6, 1.0e-3);

/// Number of evolved process parameters (speed, angle, depth).
pub const N_PROCESS: usize = 3;

/// Bounds of the evolved parameters in genotype order.
pub const PROCESS_BOUNDS: [Bound; N_PROCESS] = [SPEED_BOUND, ANGLE_BOUND, DEPTH_BOUND];

/// Process parameters of one cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    /// Cutting speed `V` in m/s.
    pub cutting_speed: f64,
    /// Rake angle in radians.
    pub cutting_angle: f64,
    /// Uncut chip thickness removed per layer.
    pub cutting_depth: f64,
    pub cutting_width: f64,
}

impl ProcessParams {
    pub fn new(cutting_speed: f64, cutting_angle: f64, cutting_depth: f64) -> Self {
        ProcessParams {
            cutting_speed,
            cutting_angle,
            cutting_depth,
            cutting_width: CUTTING_WIDTH,
        }
    }

    /// Builds parameters from a phenotype `[speed, angle, depth]`.
    pub fn from_phenotype(x: &[f64]) -> Result<Self> {
        match x {
            [v, a, d] => Ok(Self::new(*v, *a, *d)),
            _ => Err(Error::Structural(format!(
                "phenotype has {} values, expected {N_PROCESS}",
                x.len()
            ))),
        }
    }

    pub fn to_phenotype(&self) -> [f64; N_PROCESS] {
        [self.cutting_speed, self.cutting_angle, self.cutting_depth]
    }

    /// Checks the parameter box; the error names the violated bound.
    pub fn validate(&self) -> Result<()> {
        let names = ["cutting_speed", "cutting_angle", "cutting_depth"];
        for ((name, bound), x) in names.iter().zip(PROCESS_BOUNDS).zip(self.to_phenotype()) {
            if !bound.contains(x) {
                return Err(Error::Domain(format!(
                    "{name} = {x} outside [{}, {}]",
                    bound.lower, bound.upper
                )));
            }
        }
        if self.cutting_width != CUTTING_WIDTH {
            return Err(Error::Domain(format!(
                "cutting_width = {} must equal {CUTTING_WIDTH}",
                self.cutting_width
            )));
        }
        Ok(())
    }
}

/// Observables of one solved cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutOutputs {
    /// Shear angle `phi` in radians.
    pub shear_angle: f64,
    /// Force in cutting direction, N.
    pub fc: f64,
    /// Force in thrust direction, N.
    pub ft: f64,
    /// Chip thickness `t2`.
    pub chip_thickness: f64,
    pub n_layers: u64,
}

/// Search ranges and budgets of the equilibrium solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Iteration cap of every individual search.
    pub max_iterations: usize,
    /// Relative residual accepted for the interface stress balance.
    pub tolerance: f64,
    pub c0_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub phi_range: (f64, f64),
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 1000,
            tolerance: 1.0e-6,
            c0_range: (2.0, 10.0),
            delta_range: (0.005, 0.2),
            phi_range: (1.0e-3, FRAC_PI_2 - 1.0e-3),
        }
    }
}

/// `ceil(total_depth / cutting_depth)`, at least one.
pub fn layer_count(total_depth: f64, cutting_depth: f64) -> Result<u64> {
    if !(total_depth > 0.0 && total_depth.is_finite()) {
        return Err(Error::Domain(format!("total depth {total_depth} must be > 0")));
    }
    if !(cutting_depth > 0.0 && cutting_depth.is_finite()) {
        return Err(Error::Domain(format!("cutting depth {cutting_depth} must be > 0")));
    }
    let mut n = (total_depth / cutting_depth).ceil().max(1.0) as u64;
    // settle rounding of the quotient so that n*c >= d > (n-1)*c holds as computed
    while n > 1 && (n - 1) as f64 * cutting_depth >= total_depth {
        n -= 1;
    }
    while (n as f64) * cutting_depth < total_depth {
        n += 1;
    }
    Ok(n)
}

/// Solves the cut for one material and parameter set.
pub fn solve_cut(mat: &MaterialParams, proc: &ProcessParams, total_depth: f64) -> Result<CutOutputs> {
    solve_cut_with(mat, proc, total_depth, &SolverSettings::default())
}

pub fn solve_cut_with(
    mat: &MaterialParams,
    proc: &ProcessParams,
    total_depth: f64,
    settings: &SolverSettings,
) -> Result<CutOutputs> {
    proc.validate()?;
    let n_layers = layer_count(total_depth, proc.cutting_depth)?;
    let eq = Equilibrium::solve(mat, proc, settings)?;
    Ok(CutOutputs {
        shear_angle: eq.phi,
        fc: eq.primary.fc,
        ft: eq.primary.ft,
        chip_thickness: eq.primary.t2,
        n_layers,
    })
}

/// Converged internal state, exposed for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub phi: f64,
    pub c0: f64,
    pub delta: f64,
    pub primary: PrimaryZone,
    /// Tool-chip interface temperature, K.
    pub interface_temperature: f64,
    /// Relative residual of the interface shear balance.
    pub interface_residual: f64,
    /// Relative residual of the tool-tip normal stress balance.
    pub normal_stress_residual: f64,
}

/// Quantities fixed by `phi` and `c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimaryZone {
    /// Shear-plane temperature, K.
    pub t_ab: f64,
    /// Shear-plane temperature rise before averaging, K.
    pub dt_sz: f64,
    pub eps_ab: f64,
    /// Shear flow stress on AB, Pa.
    pub k_ab: f64,
    pub fc: f64,
    pub ft: f64,
    /// Friction force on the rake face.
    pub friction: f64,
    pub t2: f64,
    /// Tool-chip contact length.
    pub contact: f64,
    pub chip_velocity: f64,
    /// Normal stress at B from the stress boundary condition.
    pub sigma_n_boundary: f64,
    /// Normal stress on the rake face from the resultant.
    pub sigma_n_resultant: f64,
    /// Mean shear stress on the rake face.
    pub tau_interface: f64,
}

/// Reason a trial `(phi, c0)` produced no physical state, telling the shear
/// angle search which side of the valid window it fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Invalid {
    PhiTooSmall,
    PhiTooLarge,
}

struct Cut<'a> {
    mat: &'a MaterialParams,
    speed: f64,
    alpha: f64,
    t1: f64,
    width: f64,
    settings: &'a SolverSettings,
    // Last accepted roots; the nested searches start from them.
    last_t_ab: Cell<f64>,
    last_phi: Cell<f64>,
    last_c0: Cell<f64>,
}

impl<'a> Cut<'a> {
    fn new(mat: &'a MaterialParams, proc: &ProcessParams, settings: &'a SolverSettings) -> Self {
        Cut {
            mat,
            speed: proc.cutting_speed,
            alpha: proc.cutting_angle,
            t1: proc.cutting_depth,
            width: proc.cutting_width,
            settings,
            last_t_ab: Cell::new(mat.tw + 0.2 * (mat.tm - mat.tw)),
            last_phi: Cell::new(0.5),
            last_c0: Cell::new(0.5 * (settings.c0_range.0 + settings.c0_range.1)),
        }
    }

    fn conductivity(&self, temp: f64) -> f64 {
        52.61 - 0.0281 * (temp - self.mat.t0)
    }

    fn specific_heat(&self, temp: f64) -> f64 {
        420.0 + 0.504 * (temp - self.mat.t0)
    }

    /// Thermal number `rho * S * V * t1 / K`.
    fn thermal_number(&self, temp: f64) -> f64 {
        self.mat.rho * self.specific_heat(temp) * self.speed * self.t1 / self.conductivity(temp)
    }

    fn primary(&self, phi: f64, c0: f64) -> std::result::Result<PrimaryZone, Invalid> {
        let mat = self.mat;
        let alpha = self.alpha;
        let (sin_phi, cos_phi) = phi.sin_cos();
        let cos_pa = (phi - alpha).cos();
        if cos_pa <= 0.0 {
            return Err(if phi < alpha { Invalid::PhiTooSmall } else { Invalid::PhiTooLarge });
        }
        let l_ab = self.t1 / sin_phi;
        let shear_velocity = self.speed * alpha.cos() / cos_pa;
        let chip_velocity = self.speed * sin_phi / cos_pa;
        let gamma_ab = alpha.cos() / (2.0 * sin_phi * cos_pa);
        let eps_ab = gamma_ab / SQRT_3;
        let eps_dot_ab = c0 * shear_velocity / (SQRT_3 * l_ab);
        let tan_phi = sin_phi / cos_phi;

        let heat = |temp: f64| -> f64 {
            let k = mat.flow_stress_raw(eps_ab, eps_dot_ab, temp) / SQRT_3;
            let fs = k * l_ab * self.width;
            let s = self.specific_heat(temp);
            let beta = partition_fraction(self.thermal_number(temp) * tan_phi);
            (1.0 - beta) * fs * shear_velocity / (mat.rho * s * self.speed * self.t1 * self.width)
        };
        let balance = |temp: f64| temp - mat.tw - mat.eta * heat(temp);
        let t_ab = match monotone_root_near(
            balance,
            self.last_t_ab.get(),
            5.0,
            (mat.tw, mat.tm),
            true,
            1.0e-7,
            self.settings.max_iterations,
        ) {
            Some(found) => found.x,
            None => return Err(Invalid::PhiTooSmall),
        };
        self.last_t_ab.set(t_ab);
        let dt_sz = heat(t_ab);
        let k_ab = mat.flow_stress_raw(eps_ab, eps_dot_ab, t_ab) / SQRT_3;

        let hard = mat.jc_b * eps_ab.powf(mat.jc_n);
        let n_eq = mat.jc_n * hard / (mat.jc_a + hard);
        let tan_theta = 1.0 + 2.0 * (FRAC_PI_4 - phi) - c0 * n_eq;
        if tan_theta <= 0.0 {
            return Err(Invalid::PhiTooLarge);
        }
        let theta = tan_theta.atan();
        let lambda = theta - phi + alpha;
        let cos_lambda = lambda.cos();
        if cos_lambda <= 0.0 {
            return Err(if lambda > 0.0 { Invalid::PhiTooSmall } else { Invalid::PhiTooLarge });
        }
        let fs = k_ab * l_ab * self.width;
        let resultant = fs / theta.cos();
        let fc = resultant * (lambda - alpha).cos();
        let ft = resultant * (lambda - alpha).sin();
        let friction = resultant * lambda.sin();
        let normal = resultant * cos_lambda;
        let t2 = self.t1 * cos_pa / sin_phi;
        let contact =
            self.t1 * theta.sin() / (cos_lambda * sin_phi) * (1.0 + c0 * n_eq / (3.0 * tan_theta));
        if !(contact > 0.0 && t2 > 0.0 && k_ab > 0.0) {
            return Err(Invalid::PhiTooLarge);
        }
        let sigma_n_boundary = k_ab * (1.0 + FRAC_PI_2 - 2.0 * alpha - 2.0 * c0 * n_eq);
        Ok(PrimaryZone {
            t_ab,
            dt_sz,
            eps_ab,
            k_ab,
            fc,
            ft,
            friction,
            t2,
            contact,
            chip_velocity,
            sigma_n_boundary,
            sigma_n_resultant: normal / (contact * self.width),
            tau_interface: friction / (contact * self.width),
        })
    }

    /// Chip flow stress in the secondary zone and the interface temperature.
    fn secondary(&self, p: &PrimaryZone, delta: f64) -> (f64, f64) {
        let mat = self.mat;
        let zone = delta * p.t2;
        let eps_int = 2.0 * p.eps_ab + 0.5 * p.contact / (SQRT_3 * zone);
        let eps_dot_int = p.chip_velocity / (SQRT_3 * zone);
        let t_exit = mat.tw + p.dt_sz;
        let s = self.specific_heat(t_exit);
        let dt_chip = p.friction * p.chip_velocity / (mat.rho * s * self.speed * self.t1 * self.width);
        let ratio = self.thermal_number(t_exit) * p.t2 / p.contact;
        let log_factor = 0.06 - 0.195 * delta * ratio.sqrt() + 0.5 * ratio.log10();
        let dt_max = dt_chip * 10f64.powf(log_factor);
        let t_int = mat.tw + p.dt_sz + mat.psi * dt_max;
        let k_chip = mat.flow_stress_raw(eps_int, eps_dot_int, t_int) / SQRT_3;
        (k_chip, t_int)
    }

    /// Shear angle at which the interface shear stress equals the chip flow
    /// stress, for fixed `c0` and `delta`.
    fn shear_angle(&self, c0: f64, delta: f64) -> Option<(f64, PrimaryZone)> {
        const SENTINEL: f64 = 1.0e3;
        let residual = |phi: f64| match self.primary(phi, c0) {
            Ok(p) => {
                let (k_chip, _) = self.secondary(&p, delta);
                if k_chip > 0.0 {
                    ((p.tau_interface - k_chip) / k_chip).clamp(-SENTINEL, SENTINEL)
                } else {
                    SENTINEL
                }
            }
            Err(Invalid::PhiTooSmall) => SENTINEL,
            Err(Invalid::PhiTooLarge) => -SENTINEL,
        };
        let found = monotone_root_near(
            residual,
            self.last_phi.get(),
            0.01,
            self.settings.phi_range,
            false,
            1.0e-10,
            self.settings.max_iterations,
        )?;
        let p = self.primary(found.x, c0).ok()?;
        let (k_chip, _) = self.secondary(&p, delta);
        let rel = (p.tau_interface - k_chip) / k_chip;
        if rel.abs() > self.settings.tolerance {
            return None;
        }
        self.last_phi.set(found.x);
        Some((found.x, p))
    }

    /// Strain-rate constant balancing the tool-tip normal stress, for fixed
    /// `delta`. When no balance exists inside the search range the closest
    /// end of the range is used; the residual is reported with the state.
    fn strain_rate_constant(&self, delta: f64) -> Option<(f64, f64, PrimaryZone)> {
        // No shear angle solution counts as an overshoot: the balance
        // residual falls with c0 and solutions vanish at the high end.
        let residual = |c0: f64| match self.shear_angle(c0, delta) {
            Some((_, p)) => (p.sigma_n_boundary - p.sigma_n_resultant) / p.sigma_n_resultant,
            None => -1.0e3,
        };
        let range = self.settings.c0_range;
        let c0 = match monotone_root_near(
            residual,
            self.last_c0.get(),
            0.05,
            range,
            false,
            1.0e-10,
            self.settings.max_iterations,
        ) {
            Some(found) => found.x,
            None => {
                if residual(range.0) <= 0.0 {
                    range.0
                } else {
                    range.1
                }
            }
        };
        let (phi, p) = self.shear_angle(c0, delta)?;
        self.last_c0.set(c0);
        Some((c0, phi, p))
    }

    /// Relative residuals of the interface shear balance and the tool-tip
    /// normal stress balance.
    fn residuals(&self, phi: f64, c0: f64, delta: f64) -> Option<([f64; 2], PrimaryZone)> {
        let p = self.primary(phi, c0).ok()?;
        let (k_chip, _) = self.secondary(&p, delta);
        if k_chip <= 0.0 {
            return None;
        }
        let r = [
            (p.tau_interface - k_chip) / k_chip,
            (p.sigma_n_boundary - p.sigma_n_resultant) / p.sigma_n_resultant,
        ];
        r.iter().all(|v| v.is_finite()).then_some((r, p))
    }

    /// Joint damped Newton iteration on `(phi, c0)` started from the last
    /// accepted state. A step leaving the `c0` range pins `c0` to that end and
    /// continues in `phi` alone. Gives up (returning `None`) whenever the
    /// iterate leaves the valid region, in which case the nested searches
    /// decide.
    fn newton_pair(&self, delta: f64) -> Option<(f64, f64, PrimaryZone)> {
        const TOL: f64 = 1.0e-10;
        let (lo, hi) = self.settings.c0_range;
        let mut phi = self.last_phi.get();
        let mut c0 = self.last_c0.get().clamp(lo, hi);
        let mut pinned = false;
        let norm = |r: &[f64; 2], pinned: bool| {
            if pinned {
                r[0].abs()
            } else {
                r[0].abs().max(r[1].abs())
            }
        };
        let (mut r, mut p) = self.residuals(phi, c0, delta)?;
        for _ in 0..40 {
            if norm(&r, pinned) <= TOL {
                // A pinned end is only a solution if the balance has no root
                // inside the range.
                let consistent = !pinned || (c0 == hi && r[1] >= 0.0) || (c0 == lo && r[1] <= 0.0);
                return consistent.then_some((c0, phi, p));
            }
            let h_phi = 1.0e-7;
            let (ra, _) = self.residuals(phi + h_phi, c0, delta)?;
            let (d_phi, d_c0) = if pinned {
                let slope = (ra[0] - r[0]) / h_phi;
                if slope == 0.0 || !slope.is_finite() {
                    return None;
                }
                (-r[0] / slope, 0.0)
            } else {
                let h_c0 = if c0 + 1.0e-6 <= hi { 1.0e-6 } else { -1.0e-6 };
                let (rb, _) = self.residuals(phi, c0 + h_c0, delta)?;
                let j = [
                    [(ra[0] - r[0]) / h_phi, (rb[0] - r[0]) / h_c0],
                    [(ra[1] - r[1]) / h_phi, (rb[1] - r[1]) / h_c0],
                ];
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if det == 0.0 || !det.is_finite() {
                    return None;
                }
                (
                    -(j[1][1] * r[0] - j[0][1] * r[1]) / det,
                    -(-j[1][0] * r[0] + j[0][0] * r[1]) / det,
                )
            };
            if !pinned && (c0 + d_c0 > hi || c0 + d_c0 < lo) {
                let edge = if c0 + d_c0 > hi { hi } else { lo };
                let share = (edge - c0) / d_c0;
                phi += share * d_phi;
                c0 = edge;
                pinned = true;
                (r, p) = self.residuals(phi, c0, delta)?;
                continue;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                if let Some((rn, pn)) = self.residuals(phi + t * d_phi, c0 + t * d_c0, delta) {
                    if norm(&rn, pinned) < norm(&r, pinned) {
                        phi += t * d_phi;
                        c0 += t * d_c0;
                        r = rn;
                        p = pn;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                return None;
            }
        }
        None
    }

    fn balanced_state(&self, delta: f64) -> Option<(f64, f64, PrimaryZone)> {
        let found = self
            .newton_pair(delta)
            .or_else(|| self.strain_rate_constant(delta))?;
        self.last_c0.set(found.0);
        self.last_phi.set(found.1);
        Some(found)
    }

    fn solve(&self) -> Result<Equilibrium> {
        let (lo, hi) = self.settings.delta_range;
        let cutting_force = |delta: f64| match self.balanced_state(delta) {
            Some((_, _, p)) => p.fc,
            None => f64::INFINITY,
        };
        let best = brent_min(cutting_force, lo, hi, 1.0e-5, self.settings.max_iterations);
        let delta = best.x;
        let Some((c0, phi, primary)) = self.balanced_state(delta) else {
            return Err(Error::Convergence {
                iterations: best.iterations,
                residuals: vec![f64::NAN, f64::NAN],
            });
        };
        let (k_chip, t_int) = self.secondary(&primary, delta);
        let interface_residual = (primary.tau_interface - k_chip) / k_chip;
        let normal_stress_residual =
            (primary.sigma_n_boundary - primary.sigma_n_resultant) / primary.sigma_n_resultant;
        if t_int >= self.mat.tm {
            return Err(Error::ModelDomain(format!(
                "tool-chip interface temperature {t_int:.1} K reaches the melting point"
            )));
        }
        Ok(Equilibrium {
            phi,
            c0,
            delta,
            primary,
            interface_temperature: t_int,
            interface_residual,
            normal_stress_residual,
        })
    }
}

/// Fraction of shear-plane heat conducted into the workpiece.
fn partition_fraction(x: f64) -> f64 {
    let beta = if x <= 10.0 {
        0.5 - 0.35 * x.log10()
    } else {
        0.3 - 0.15 * x.log10()
    };
    beta.clamp(0.0, 1.0)
}

impl Equilibrium {
    pub fn solve(
        mat: &MaterialParams,
        proc: &ProcessParams,
        settings: &SolverSettings,
    ) -> Result<Equilibrium> {
        Cut::new(mat, proc, settings).solve()
    }
}
