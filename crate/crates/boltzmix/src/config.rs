//! Scenario configuration: a small sectioned key = value format with strict
//! schema validation (unknown sections or keys are rejected).

use std::collections::BTreeMap;

use boltzmix_core::kernel::{AngularKind, KernelSpec};
use boltzmix_core::linear::engine::InterpOrder;
use boltzmix_core::mixture::SpeciesSet;
use boltzmix_core::solver::{InitialShape, Integrator, Scenario, SpaceMode};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw parsed sections.
#[derive(Debug, Clone, Default)]
pub struct ScenarioFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

const KNOWN_SECTIONS: &[&str] = &["species", "kernel", "grid", "solver", "analysis"];

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("species", &["masses", "densities"]),
    ("kernel", &["gamma", "c_phi", "angular"]),
    (
        "grid",
        &["extent", "nodes_per_axis", "sphere_polar", "sphere_azimuth"],
    ),
    (
        "solver",
        &[
            "space",
            "shape",
            "amplitude",
            "dt",
            "t_end",
            "output_every",
            "integrator",
            "linear_only",
            "beta",
            "k_weight",
            "seed",
            "interp",
        ],
    ),
    (
        "analysis",
        &[
            "k_values",
            "povzner_samples",
            "deltas",
            "cb_k",
            "cb_samples",
            "coercivity_samples",
            "kernel_check_fields",
            "kernel_check_nodes",
            "kernel_check_extent",
        ],
    ),
];

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_lowercase();
                if !KNOWN_SECTIONS.contains(&name.as_str()) {
                    return err(format!("line {}: unknown section [{name}]", lineno + 1));
                }
                if sections.contains_key(&name) {
                    return err(format!("line {}: duplicate section [{name}]", lineno + 1));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", lineno + 1));
            };
            let section = current
                .as_ref()
                .ok_or_else(|| ConfigError(format!("line {}: key outside a section", lineno + 1)))?;
            let key = key.trim().to_lowercase();
            let allowed = KNOWN_KEYS
                .iter()
                .find(|(s, _)| s == section)
                .map(|(_, keys)| *keys)
                .unwrap_or(&[]);
            if !allowed.contains(&key.as_str()) {
                return err(format!(
                    "line {}: unknown key `{key}` in section [{section}]",
                    lineno + 1
                ));
            }
            let map = sections.get_mut(section).unwrap();
            if map.contains_key(&key) {
                return err(format!("line {}: duplicate key `{key}`", lineno + 1));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(ScenarioFile { sections })
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|m| m.get(key))
            .map(|s| s.as_str())
    }

    fn parse_f64(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| ConfigError(format!("[{section}] {key}: {e}"))),
        }
    }

    fn parse_usize(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| ConfigError(format!("[{section}] {key}: {e}"))),
        }
    }

    fn parse_f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => {
                let vals: Result<Vec<f64>, _> =
                    s.split_whitespace().map(|t| t.parse::<f64>()).collect();
                vals.map(Some)
                    .map_err(|e| ConfigError(format!("[{section}] {key}: {e}")))
            }
        }
    }

    pub fn species(&self) -> Result<SpeciesSet, ConfigError> {
        let masses = self
            .parse_f64_list("species", "masses")?
            .ok_or_else(|| ConfigError("[species] masses is required".into()))?;
        let densities = self
            .parse_f64_list("species", "densities")?
            .ok_or_else(|| ConfigError("[species] densities is required".into()))?;
        SpeciesSet::new(masses, densities).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn kernel(&self, n_species: usize) -> Result<KernelSpec, ConfigError> {
        let gamma = self.parse_f64("kernel", "gamma")?.unwrap_or(1.0);
        let c_phi = self.parse_f64("kernel", "c_phi")?.unwrap_or(1.0);
        let angular = match self.get("kernel", "angular") {
            None => AngularKind::Constant(1.0),
            Some(spec) => {
                let mut it = spec.split_whitespace();
                match (it.next(), it.next(), it.next()) {
                    (Some("constant"), Some(v), None) => AngularKind::Constant(
                        v.parse()
                            .map_err(|e| ConfigError(format!("[kernel] angular: {e}")))?,
                    ),
                    (Some("constant"), None, None) => AngularKind::Constant(1.0),
                    (Some("sincos"), Some(v), None) => AngularKind::SinCos(
                        v.parse()
                            .map_err(|e| ConfigError(format!("[kernel] angular: {e}")))?,
                    ),
                    (Some("sincos"), None, None) => AngularKind::SinCos(1.0),
                    _ => return err("[kernel] angular: expected `constant [b]` or `sincos [s]`"),
                }
            }
        };
        KernelSpec::uniform(n_species, gamma, c_phi, angular)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn grid_extent(&self, species: &SpeciesSet) -> Result<f64, ConfigError> {
        Ok(self
            .parse_f64("grid", "extent")?
            .unwrap_or(4.8 / species.min_mass().sqrt()))
    }

    pub fn grid_nodes(&self) -> Result<usize, ConfigError> {
        Ok(self.parse_usize("grid", "nodes_per_axis")?.unwrap_or(8))
    }

    pub fn sphere_rule(&self) -> Result<(usize, usize), ConfigError> {
        Ok((
            self.parse_usize("grid", "sphere_polar")?.unwrap_or(4),
            self.parse_usize("grid", "sphere_azimuth")?.unwrap_or(4),
        ))
    }

    /// Full solver scenario (used by `relax`; other commands use pieces).
    pub fn scenario(&self, seed_override: Option<u64>) -> Result<Scenario, ConfigError> {
        let species = self.species()?;
        let kernel = self.kernel(species.len())?;
        let grid_extent = self.grid_extent(&species)?;
        let grid_nodes = self.grid_nodes()?;
        let (sphere_polar, sphere_azimuth) = self.sphere_rule()?;
        let space = match self.get("solver", "space") {
            None | Some("homogeneous") => SpaceMode::Homogeneous,
            Some(spec) => {
                let parts: Vec<&str> = spec.split_whitespace().collect();
                match parts.as_slice() {
                    ["torus1d", cells, length] => SpaceMode::Torus1D {
                        cells: cells
                            .parse()
                            .map_err(|e| ConfigError(format!("[solver] space: {e}")))?,
                        length: length
                            .parse()
                            .map_err(|e| ConfigError(format!("[solver] space: {e}")))?,
                    },
                    ["torus3d", nx, ny, nz, lx, ly, lz] => SpaceMode::Torus3D {
                        cells: [
                            nx.parse().map_err(|e| ConfigError(format!("{e}")))?,
                            ny.parse().map_err(|e| ConfigError(format!("{e}")))?,
                            nz.parse().map_err(|e| ConfigError(format!("{e}")))?,
                        ],
                        lengths: [
                            lx.parse().map_err(|e| ConfigError(format!("{e}")))?,
                            ly.parse().map_err(|e| ConfigError(format!("{e}")))?,
                            lz.parse().map_err(|e| ConfigError(format!("{e}")))?,
                        ],
                    },
                    _ => {
                        return err(
                            "[solver] space: expected `homogeneous`, `torus1d C L` or \
                             `torus3d NX NY NZ LX LY LZ`",
                        )
                    }
                }
            }
        };
        let shape = match self.get("solver", "shape") {
            None | Some("aniso") => InitialShape::AnisotropicGaussian,
            Some("zero") => InitialShape::Zero,
            Some("random") => InitialShape::RandomSmooth,
            Some(spec) => {
                let parts: Vec<&str> = spec.split_whitespace().collect();
                match parts.as_slice() {
                    ["kernel", idx] => InitialShape::KernelMode {
                        index: idx
                            .parse()
                            .map_err(|e| ConfigError(format!("[solver] shape: {e}")))?,
                    },
                    _ => return err("[solver] shape: expected zero|aniso|random|kernel <idx>"),
                }
            }
        };
        let integrator = match self.get("solver", "integrator") {
            None | Some("rk4") => Integrator::Rk4,
            Some("gain_loss") => Integrator::GainLossExponential,
            Some(other) => return err(format!("[solver] integrator: unknown `{other}`")),
        };
        let interp = match self.get("solver", "interp") {
            None | Some("quadratic") => InterpOrder::Quadratic,
            Some("linear") => InterpOrder::Linear,
            Some(other) => return err(format!("[solver] interp: unknown `{other}`")),
        };
        let linear_only = match self.get("solver", "linear_only") {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => return err(format!("[solver] linear_only: expected bool, got `{other}`")),
        };
        let seed = seed_override
            .or(self.parse_usize("solver", "seed")?.map(|s| s as u64))
            .unwrap_or(1);
        Ok(Scenario {
            species,
            kernel,
            grid_extent,
            grid_nodes,
            sphere_polar,
            sphere_azimuth,
            interp,
            space,
            shape,
            amplitude: self.parse_f64("solver", "amplitude")?.unwrap_or(1e-2),
            dt: self.parse_f64("solver", "dt")?.unwrap_or(0.02),
            t_end: self.parse_f64("solver", "t_end")?.unwrap_or(10.0),
            output_every: self.parse_usize("solver", "output_every")?.unwrap_or(8),
            integrator,
            linear_only,
            seed,
            beta: self.parse_f64("solver", "beta")?.unwrap_or(2.0),
            k_weight: self.parse_f64("solver", "k_weight")?.unwrap_or(3.0),
            blowup_factor: 1e3,
            positivity_iters: 25,
            moment_tilt: true,
        })
    }

    pub fn k_values(&self) -> Result<Vec<f64>, ConfigError> {
        Ok(self
            .parse_f64_list("analysis", "k_values")?
            .unwrap_or_else(|| vec![3.0, 4.0, 6.0, 8.0, 10.0]))
    }

    pub fn povzner_samples(&self) -> Result<usize, ConfigError> {
        Ok(self.parse_usize("analysis", "povzner_samples")?.unwrap_or(200))
    }

    pub fn deltas(&self) -> Result<Vec<f64>, ConfigError> {
        Ok(self
            .parse_f64_list("analysis", "deltas")?
            .unwrap_or_else(|| vec![0.2, 0.1, 0.05]))
    }

    pub fn cb_k(&self) -> Result<f64, ConfigError> {
        Ok(self.parse_f64("analysis", "cb_k")?.unwrap_or(3.0))
    }

    pub fn cb_samples(&self) -> Result<usize, ConfigError> {
        Ok(self.parse_usize("analysis", "cb_samples")?.unwrap_or(12))
    }

    pub fn coercivity_samples(&self) -> Result<usize, ConfigError> {
        Ok(self
            .parse_usize("analysis", "coercivity_samples")?
            .unwrap_or(64))
    }

    pub fn kernel_check_fields(&self) -> Result<usize, ConfigError> {
        Ok(self
            .parse_usize("analysis", "kernel_check_fields")?
            .unwrap_or(20))
    }

    pub fn kernel_check_nodes(&self) -> Result<usize, ConfigError> {
        Ok(self
            .parse_usize("analysis", "kernel_check_nodes")?
            .unwrap_or(32))
    }

    pub fn kernel_check_extent(&self) -> Result<f64, ConfigError> {
        Ok(self.parse_f64("analysis", "kernel_check_extent")?.unwrap_or(7.2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ScenarioFile::parse(
            "[species]\nmasses = 1.0 2.0\ndensities = 1.0 0.8\n\n[kernel]\ngamma = 1.0\n",
        )
        .unwrap();
        let s = cfg.species().unwrap();
        assert_eq!(s.len(), 2);
        let k = cfg.kernel(2).unwrap();
        assert_eq!(k.gamma, 1.0);
    }

    #[test]
    fn rejects_unknown_keys_and_sections() {
        assert!(ScenarioFile::parse("[species]\nmass = 1.0\n").is_err());
        assert!(ScenarioFile::parse("[wat]\nx = 1\n").is_err());
        assert!(ScenarioFile::parse("x = 1\n").is_err());
        assert!(ScenarioFile::parse("[species]\nmasses = 1.0\nmasses = 2.0\n").is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        let cfg = ScenarioFile::parse("[species]\nmasses = 0.0\ndensities = 1.0\n").unwrap();
        assert!(cfg.species().is_err());
        let cfg =
            ScenarioFile::parse("[species]\nmasses = 1.0\ndensities = 1.0\n[kernel]\ngamma = 2.0\n")
                .unwrap();
        assert!(cfg.kernel(1).is_err());
    }

    #[test]
    fn comments_and_case() {
        let cfg = ScenarioFile::parse(
            "# heading\n[SPECIES]\nMasses = 1.0  # inline\ndensities = 2.0\n",
        )
        .unwrap();
        let s = cfg.species().unwrap();
        assert_eq!(s.density(0), 2.0);
    }
}
