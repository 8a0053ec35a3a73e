use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simple lift model: trimmed at the initial state, linear in pitch and
/// quadratic in horizontal speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeroConfig {
    /// Relative lift change per radian of pitch away from trim.
    pub lift_slope_per_rad: f64,
    /// Longitudinal offset of the lift application point ahead of the CoG.
    #[serde(default)]
    pub moment_arm_m: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionMode {
    /// Rigid-body motion integrated from the loads.
    #[default]
    Free,
    /// Constant-velocity trajectory prescribed from the initial state.
    Guided,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PressureOptions {
    /// Upper limit applied to the total pressure.
    #[serde(default)]
    pub cap_pa: Option<f64>,
    /// Clip negative dynamic pressure to zero.
    #[serde(default)]
    pub floor_dynamic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KOverride {
    pub frame: usize,
    pub k: f64,
}

/// Initial conditions and physical constants of one ditching run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub u0_mps: f64,
    pub w0_mps: f64,
    pub pitch0_deg: f64,
    pub mass_kg: f64,
    pub cog_from_nose_m: f64,
    pub cog_above_keel_m: f64,
    pub inertia_yy_kgm2: f64,
    #[serde(default = "default_rho")]
    pub rho_water_kgm3: f64,
    #[serde(default = "default_g")]
    pub g_mps2: f64,
    pub dt_s: f64,
    pub t_end_s: f64,
    #[serde(default = "default_k")]
    pub k_factor: f64,
    #[serde(default)]
    pub k_overrides: Vec<KOverride>,
    /// Height of the lowest hull point above calm water at t = 0.
    #[serde(default = "default_clearance")]
    pub initial_clearance_m: f64,
    #[serde(default)]
    pub aero: Option<AeroConfig>,
    #[serde(default)]
    pub mode: MotionMode,
    #[serde(default)]
    pub pressure: PressureOptions,
    /// Stop this long after impact (the load phase is over by then).
    #[serde(default)]
    pub stop_after_impact_s: Option<f64>,
}

fn default_rho() -> f64 {
    1025.0
}
fn default_g() -> f64 {
    9.81
}
fn default_k() -> f64 {
    1.0
}
fn default_clearance() -> f64 {
    0.05
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.u0_mps > 0.0, "u0_mps must be positive"),
            (self.w0_mps >= 0.0, "w0_mps must be non-negative"),
            (self.dt_s > 0.0, "dt_s must be positive"),
            (self.rho_water_kgm3 > 0.0, "rho_water_kgm3 must be positive"),
            (self.mass_kg > 0.0, "mass_kg must be positive"),
            (self.inertia_yy_kgm2 > 0.0, "inertia_yy_kgm2 must be positive"),
            (self.t_end_s > 0.0, "t_end_s must be positive"),
            (self.k_factor >= 0.0, "k_factor must be non-negative"),
            (self.pitch0_deg.abs() < 90.0, "pitch0_deg must lie in (-90, 90)"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::config(msg));
            }
        }
        Ok(())
    }

    /// Full-scale fuselage-only ditching at 6 deg pitch, 68 t, no aero.
    pub fn d150(u0_mps: f64, w0_mps: f64) -> Self {
        Self {
            u0_mps,
            w0_mps,
            pitch0_deg: 6.0,
            mass_kg: 68_000.0,
            cog_from_nose_m: 16.43,
            cog_above_keel_m: 1.72,
            inertia_yy_kgm2: 3.3e6,
            rho_water_kgm3: default_rho(),
            g_mps2: default_g(),
            dt_s: 5e-3,
            t_end_s: 30.0,
            k_factor: 1.0,
            k_overrides: Vec::new(),
            initial_clearance_m: 0.05,
            aero: None,
            mode: MotionMode::Free,
            pressure: PressureOptions::default(),
            stop_after_impact_s: Some(8.0),
        }
    }

    /// Free flight of the TN2929 model D at 15.24 m/s and 10 deg pitch with
    /// a trimmed lift model.
    pub fn tn2929_model_d() -> Self {
        Self {
            u0_mps: 15.24,
            w0_mps: 0.5,
            pitch0_deg: 10.0,
            mass_kg: 4.0,
            cog_from_nose_m: 0.55,
            cog_above_keel_m: 0.1016,
            inertia_yy_kgm2: 0.37,
            rho_water_kgm3: 1000.0,
            g_mps2: default_g(),
            dt_s: 2e-4,
            t_end_s: 1.5,
            k_factor: 1.0,
            k_overrides: Vec::new(),
            initial_clearance_m: 0.005,
            aero: Some(AeroConfig { lift_slope_per_rad: 3.0, moment_arm_m: 0.0 }),
            mode: MotionMode::Free,
            pressure: PressureOptions::default(),
            stop_after_impact_s: None,
        }
    }

    /// Guided impact of the curved plate: 40 m/s forward, 1.5 m/s down,
    /// 6 deg pitch, 6e-5 s step.
    pub fn curved_plate() -> Self {
        Self {
            u0_mps: 40.0,
            w0_mps: 1.5,
            pitch0_deg: 6.0,
            mass_kg: 1000.0,
            cog_from_nose_m: 0.5,
            cog_above_keel_m: 0.0,
            inertia_yy_kgm2: 100.0,
            rho_water_kgm3: 1000.0,
            g_mps2: default_g(),
            dt_s: 6e-5,
            t_end_s: 0.06,
            k_factor: 1.0,
            k_overrides: Vec::new(),
            initial_clearance_m: 0.0,
            aero: None,
            mode: MotionMode::Guided,
            pressure: PressureOptions::default(),
            stop_after_impact_s: None,
        }
    }

    /// Per-frame correction factor after applying overrides.
    pub fn k_for_frames(&self, n_frames: usize) -> Vec<f64> {
        let mut k = vec![self.k_factor; n_frames];
        for o in &self.k_overrides {
            if o.frame < n_frames {
                k[o.frame] = o.k;
            }
        }
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        Scenario::d150(70.0, 1.5).validate().unwrap();
        Scenario::tn2929_model_d().validate().unwrap();
        Scenario::curved_plate().validate().unwrap();
    }

    #[test]
    fn invalid_values_rejected() {
        let mut s = Scenario::d150(70.0, 1.5);
        s.u0_mps = 0.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::d150(70.0, 1.5);
        s.w0_mps = -1.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::d150(70.0, 1.5);
        s.dt_s = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn k_overrides_apply() {
        let mut s = Scenario::d150(70.0, 1.5);
        s.k_overrides.push(KOverride { frame: 2, k: 1.3 });
        assert_eq!(s.k_for_frames(4), vec![1.0, 1.0, 1.3, 1.0]);
    }

    #[test]
    fn json_units_in_keys() {
        let v = serde_json::to_value(Scenario::d150(70.0, 1.5)).unwrap();
        assert!(v.get("u0_mps").is_some());
        assert!(v.get("rho_water_kgm3").is_some());
    }
}
