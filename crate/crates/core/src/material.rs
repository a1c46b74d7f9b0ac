//! Workpiece materials and the Johnson-Cook flow rule.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants that define one workpiece material.
///
/// Temperatures are in kelvin, stresses in pascal. `t0` is the offset used to
/// convert kelvin to degrees Celsius in the temperature-dependent thermal
/// properties of the cut solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub name: String,
    pub t0: f64,
    /// Ambient (workpiece) temperature.
    pub tw: f64,
    /// Density in kg/m^3.
    pub rho: f64,
    /// Shear-plane temperature averaging factor.
    pub eta: f64,
    /// Tool-chip interface temperature averaging factor.
    pub psi: f64,
    pub jc_a: f64,
    pub jc_b: f64,
    pub jc_n: f64,
    pub jc_c: f64,
    pub jc_m: f64,
    /// Melting temperature.
    pub tm: f64,
    /// Reference strain rate in 1/s.
    pub jc_eps0: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("material '{}': {what}", self.name)));
        let all = [
            self.t0, self.tw, self.rho, self.eta, self.psi, self.jc_a, self.jc_b, self.jc_n,
            self.jc_c, self.jc_m, self.tm, self.jc_eps0,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite constant");
        }
        if self.name.trim().is_empty() {
            return bad("empty name");
        }
        if !(self.tw > 0.0 && self.tm > self.tw) {
            return bad("requires Tm > Tw > 0");
        }
        if self.rho <= 0.0 {
            return bad("density must be positive");
        }
        if self.jc_eps0 <= 0.0 {
            return bad("reference strain rate must be positive");
        }
        if self.jc_a <= 0.0 {
            return bad("Johnson-Cook A must be positive");
        }
        if self.jc_b < 0.0 || self.jc_n < 0.0 || self.jc_m <= 0.0 {
            return bad("Johnson-Cook B, n must be non-negative and m positive");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0 && self.psi > 0.0 && self.psi <= 1.0) {
            return bad("eta and psi must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn steel() -> Self {
        Self::builtin("steel", 7860.0, 7.92e8, 5.10e8, 0.26, 0.014, 1.03, 1790.0, 1.0)
    }

    pub fn tungsten_alloy() -> Self {
        Self::builtin("tungsten-alloy", 17600.0, 1.51e9, 1.77e8, 0.12, 0.016, 1.0, 1723.0, 1.0)
    }

    pub fn steel_dummy() -> Self {
        Self::builtin("steel-dummy", 7860.0, 5.82e8, 4.65e8, 0.325, 0.008, 1.3, 1790.0, 1.0)
    }

    pub fn inconel_718() -> Self {
        Self::builtin(
            "inconel-718",
            8242.0,
            9.28e8,
            9.79e8,
            0.245847,
            0.0056,
            1.80073,
            1623.15,
            0.001,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn builtin(
        name: &str,
        rho: f64,
        jc_a: f64,
        jc_b: f64,
        jc_n: f64,
        jc_c: f64,
        jc_m: f64,
        tm: f64,
        jc_eps0: f64,
    ) -> Self {
        MaterialParams {
            name: name.to_string(),
            t0: 273.15,
            tw: 300.0,
            rho,
            eta: 0.9,
            psi: 0.9,
            jc_a,
            jc_b,
            jc_n,
            jc_c,
            jc_m,
            tm,
            jc_eps0,
        }
    }

    /// Flow stress without precondition checks. Temperatures above the melting
    /// point saturate the softening term at zero.
    #[inline]
    pub(crate) fn flow_stress_raw(&self, eps_p: f64, eps_dot_p: f64, temp: f64) -> f64 {
        let hardening = self.jc_a + self.jc_b * eps_p.powf(self.jc_n);
        let rate = 1.0 + self.jc_c * (eps_dot_p / self.jc_eps0).ln();
        let homologous = ((temp - self.tw) / (self.tm - self.tw)).clamp(0.0, 1.0);
        let softening = 1.0 - homologous.powf(self.jc_m);
        hardening * rate * softening
    }
}

/// Johnson-Cook flow stress in Pa.
pub fn flow_stress(mat: &MaterialParams, eps_p: f64, eps_dot_p: f64, temp: f64) -> Result<f64> {
    if !(eps_p >= 0.0 && eps_p.is_finite()) {
        return Err(Error::Domain(format!("plastic strain {eps_p} must be >= 0")));
    }
    if !(eps_dot_p > 0.0 && eps_dot_p.is_finite()) {
        return Err(Error::Domain(format!("strain rate {eps_dot_p} must be > 0")));
    }
    if !(temp >= mat.tw && temp <= mat.tm) {
        return Err(Error::Domain(format!(
            "temperature {temp} K outside [{}, {}]",
            mat.tw, mat.tm
        )));
    }
    Ok(mat.flow_stress_raw(eps_p, eps_dot_p, temp))
}

/// The four materials of the benchmark task context, in canonical order.
pub fn builtin_materials() -> Vec<MaterialParams> {
    vec![
        MaterialParams::steel(),
        MaterialParams::tungsten_alloy(),
        MaterialParams::steel_dummy(),
        MaterialParams::inconel_718(),
    ]
}

/// Looks a material up by name. Spaces and underscores match hyphens and the
/// comparison ignores case, so "Tungsten Alloy" finds `tungsten-alloy`.
pub fn find_material<'a>(catalog: &'a [MaterialParams], name: &str) -> Result<&'a MaterialParams> {
    let key = canonical_name(name);
    catalog
        .iter()
        .find(|m| canonical_name(&m.name) == key)
        .ok_or_else(|| {
            let known: Vec<&str> = catalog.iter().map(|m| m.name.as_str()).collect();
            Error::Domain(format!("unknown material '{name}' (known: {})", known.join(", ")))
        })
}

fn canonical_name(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| match c {
            ' ' | '_' => '-',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CatalogFile {
    #[serde(default, rename = "material")]
    materials: Vec<MaterialParams>,
}

/// Parses a TOML material catalog (`[[material]]` tables).
pub fn parse_catalog(text: &str, origin: &Path) -> Result<Vec<MaterialParams>> {
    let file: CatalogFile =
        toml::from_str(text).map_err(|e| Error::schema(origin, e.to_string()))?;
    for m in &file.materials {
        m.validate()?;
    }
    Ok(file.materials)
}

/// Loads a catalog file and merges it over the built-in materials; entries
/// with a built-in name replace that material.
pub fn load_catalog(path: &Path) -> Result<Vec<MaterialParams>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let extra = parse_catalog(&text, path)?;
    Ok(merge_catalog(builtin_materials(), extra))
}

pub(crate) fn merge_catalog(
    mut base: Vec<MaterialParams>,
    extra: Vec<MaterialParams>,
) -> Vec<MaterialParams> {
    for m in extra {
        let key = canonical_name(&m.name);
        match base.iter_mut().find(|b| canonical_name(&b.name) == key) {
            Some(slot) => *slot = m,
            None => base.push(m),
        }
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for m in builtin_materials() {
            m.validate().unwrap();
        }
    }

    #[test]
    fn reduces_to_a_at_reference_state() {
        let steel = MaterialParams::steel();
        assert_eq!(flow_stress(&steel, 0.0, 1.0, 300.0).unwrap(), 7.92e8);
    }

    #[test]
    fn zero_at_melting_point() {
        for m in builtin_materials() {
            let s = flow_stress(&m, 0.7, m.jc_eps0, m.tm).unwrap();
            assert_eq!(s, 0.0, "{}", m.name);
        }
    }

    #[test]
    fn steel_golden_value() {
        // Frozen from a 50-digit evaluation of the closed form (mpmath).
        let steel = MaterialParams::steel();
        let s = flow_stress(&steel, 0.5, 1.0e3, 600.0).unwrap();
        let golden = 1.079_372_490_575_615_7e9;
        assert!(((s - golden) / golden).abs() < 1e-13, "{s}");
    }

    #[test]
    fn rejects_bad_domain() {
        let steel = MaterialParams::steel();
        assert!(flow_stress(&steel, 0.1, 0.0, 400.0).is_err());
        assert!(flow_stress(&steel, 0.1, -1.0, 400.0).is_err());
        assert!(flow_stress(&steel, 0.1, 1.0, 299.0).is_err());
        assert!(flow_stress(&steel, 0.1, 1.0, 1800.0).is_err());
        assert!(flow_stress(&steel, -0.1, 1.0, 400.0).is_err());
    }

    #[test]
    fn lookup_is_forgiving() {
        let cat = builtin_materials();
        assert_eq!(find_material(&cat, "Tungsten Alloy").unwrap().name, "tungsten-alloy");
        assert_eq!(find_material(&cat, "INCONEL_718").unwrap().name, "inconel-718");
        let err = find_material(&cat, "unobtainium").unwrap_err().to_string();
        assert!(err.contains("unobtainium"));
    }

    #[test]
    fn catalog_overrides_and_extends() {
        let text = r#"
            [[material]]
            name = "aluminium"
            t0 = 273.15
            tw = 300.0
            rho = 2700.0
            eta = 0.9
            psi = 0.9
            jc_a = 3.24e8
            jc_b = 1.14e8
            jc_n = 0.42
            jc_c = 0.002
            jc_m = 1.34
            tm = 925.0
            jc_eps0 = 1.0
        "#;
        let extra = parse_catalog(text, Path::new("inline")).unwrap();
        let merged = merge_catalog(builtin_materials(), extra);
        assert_eq!(merged.len(), 5);
        assert_eq!(merged[4].name, "aluminium");
    }

    #[test]
    fn catalog_rejects_invalid_entry() {
        let text = r#"
            [[material]]
            name = "broken"
            t0 = 273.15
            tw = 300.0
            rho = 2700.0
            eta = 1.5
            psi = 0.9
            jc_a = 3.24e8
            jc_b = 1.14e8
            jc_n = 0.42
            jc_c = 0.002
            jc_m = 1.34
            tm = 925.0
            jc_eps0 = 1.0
        "#;
        assert!(parse_catalog(text, Path::new("inline")).is_err());
    }
}
