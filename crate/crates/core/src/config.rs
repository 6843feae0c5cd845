//! Experiment configuration: flat `key = value` text, lists comma-separated.
//!
//! Missing keys take the desk-scale defaults; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::cdi::{HioConfig, SelectionMetric, SupportSpec};
use crate::error::{Error, Result};
use crate::field::GridGeometry;
use crate::forward::PropagationParams;
use crate::holo::{AbsorptionConstraint, HoloConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    CdiRandom,
    CdiCentral,
    CdiSymmetrized,
    HoloRandom,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::CdiRandom,
        Scenario::CdiCentral,
        Scenario::CdiSymmetrized,
        Scenario::HoloRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CdiRandom => "cdi-random",
            Scenario::CdiCentral => "cdi-central",
            Scenario::CdiSymmetrized => "cdi-symmetrized",
            Scenario::HoloRandom => "holo-random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_holographic(self) -> bool {
        self == Scenario::HoloRandom
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjectSource {
    /// The built-in binary stick figure.
    Synthetic,
    /// 8- or 16-bit PGM.
    File(PathBuf),
}

/// HIO settings shared by every cell; the seed comes from the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdiSettings {
    pub beta: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub keep_best: usize,
    pub selection: SelectionMetric,
    pub er_interval: usize,
    pub er_start: usize,
}

impl CdiSettings {
    pub fn hio(&self, seed: u64) -> HioConfig {
        HioConfig {
            beta: self.beta,
            iterations: self.iterations,
            restarts: self.restarts,
            keep_best: self.keep_best,
            selection: self.selection,
            seed,
            er_interval: self.er_interval,
            er_start: self.er_start,
        }
    }
}

impl Default for CdiSettings {
    fn default() -> Self {
        Self {
            beta: 0.9,
            iterations: 500,
            restarts: 20,
            keep_best: 10,
            selection: SelectionMetric::GroundTruth,
            er_interval: 5,
            er_start: 400,
        }
    }
}

/// Holographic geometry and iteration settings. Lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoloSettings {
    pub iterations: usize,
    pub smoothing_interval: usize,
    pub wavelength: f64,
    pub distance: f64,
    pub pixel_size: f64,
    pub constraint: AbsorptionConstraint,
}

impl Default for HoloSettings {
    fn default() -> Self {
        Self {
            iterations: 500,
            smoothing_interval: 20,
            wavelength: 532e-9,
            distance: 20e-3,
            pixel_size: 2e-3 / 512.0,
            constraint: AbsorptionConstraint::default(),
        }
    }
}

impl HoloSettings {
    pub fn params(&self, n: usize) -> Result<PropagationParams> {
        PropagationParams::new(self.wavelength, self.distance, self.pixel_size * n as f64, n)
    }

    pub fn holo(&self, n: usize, object_side: usize, seed: u64) -> Result<HoloConfig> {
        Ok(HoloConfig {
            iterations: self.iterations,
            smoothing_interval: self.smoothing_interval,
            support: SupportSpec::new(object_side),
            params: self.params(n)?,
            constraint: self.constraint,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub sigma: f64,
    pub object_side: usize,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub object: ObjectSource,
    /// Multiply far fields by the pixel aperture envelope.
    pub envelope: bool,
    pub cdi: CdiSettings,
    pub holo: HoloSettings,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::CdiRandom,
            sigma: 4.0,
            object_side: 64,
            fractions: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            seeds: vec![0],
            object: ObjectSource::Synthetic,
            envelope: false,
            cdi: CdiSettings::default(),
            holo: HoloSettings::default(),
            output: PathBuf::from("out"),
        }
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value {value:?} for {key}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

impl ExperimentConfig {
    /// Full grid side `N = σ·N₀`; must be an even integer.
    pub fn grid_side(&self) -> Result<usize> {
        let n = self.sigma * self.object_side as f64;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n.max(1.0) || rounded < 2.0 {
            return Err(Error::Config(format!(
                "sigma {} times object side {} is not an integer grid side",
                self.sigma, self.object_side
            )));
        }
        let n = rounded as usize;
        if n % 2 != 0 {
            return Err(Error::Config(format!("grid side {n} must be even")));
        }
        Ok(n)
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.grid_side()?, self.object_side)
    }

    pub fn validate(&self) -> Result<()> {
        if self.object_side == 0 {
            return Err(Error::Config("object_side must be positive".into()));
        }
        if !(self.sigma > 1.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma {} must exceed 1", self.sigma)));
        }
        let n = self.grid_side()?;
        if (n - self.object_side) % 2 != 0 {
            return Err(Error::Config(
                "grid and object sides must have equal parity".into(),
            ));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::Config(format!("missing fraction {f} outside [0, 1]")));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.scenario.is_holographic() {
            self.holo.holo(n, self.object_side, 0)?.validate()?;
        } else {
            self.cdi.hio(0).validate()?;
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("scenario", self.scenario.name().into());
        kv("sigma", self.sigma.to_string());
        kv("object_side", self.object_side.to_string());
        kv("fractions", join(&self.fractions));
        kv("seeds", join(&self.seeds));
        kv(
            "object",
            match &self.object {
                ObjectSource::Synthetic => "synthetic".into(),
                ObjectSource::File(p) => p.display().to_string(),
            },
        );
        kv("envelope", self.envelope.to_string());
        kv("beta", self.cdi.beta.to_string());
        kv("iterations", self.cdi.iterations.to_string());
        kv("restarts", self.cdi.restarts.to_string());
        kv("keep_best", self.cdi.keep_best.to_string());
        kv("selection", self.cdi.selection.name().into());
        kv("er_interval", self.cdi.er_interval.to_string());
        kv("er_start", self.cdi.er_start.to_string());
        kv("holo_iterations", self.holo.iterations.to_string());
        kv("smoothing_interval", self.holo.smoothing_interval.to_string());
        kv("wavelength", self.holo.wavelength.to_string());
        kv("distance", self.holo.distance.to_string());
        kv("pixel_size", self.holo.pixel_size.to_string());
        kv("absorption", self.holo.constraint.name().into());
        kv("output", self.output.display().to_string());
        s
    }

    /// Parses without validating; call [`ExperimentConfig::validate`] before use.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "scenario" => {
                    c.scenario = Scenario::parse(value).ok_or_else(|| bad(key, value))?
                }
                "sigma" => c.sigma = num(key, value)?,
                "object_side" => c.object_side = num(key, value)?,
                "fractions" => c.fractions = list(key, value)?,
                "seeds" => c.seeds = list(key, value)?,
                "object" => {
                    c.object = match value {
                        "synthetic" => ObjectSource::Synthetic,
                        "" => return Err(bad(key, value)),
                        p => ObjectSource::File(PathBuf::from(p)),
                    }
                }
                "envelope" => c.envelope = num(key, value)?,
                "beta" => c.cdi.beta = num(key, value)?,
                "iterations" => c.cdi.iterations = num(key, value)?,
                "restarts" => c.cdi.restarts = num(key, value)?,
                "keep_best" => c.cdi.keep_best = num(key, value)?,
                "selection" => {
                    c.cdi.selection = match value {
                        "eq8" => SelectionMetric::GroundTruth,
                        "eq9" => SelectionMetric::Detector,
                        _ => return Err(bad(key, value)),
                    }
                }
                "er_interval" => c.cdi.er_interval = num(key, value)?,
                "er_start" => c.cdi.er_start = num(key, value)?,
                "holo_iterations" => c.holo.iterations = num(key, value)?,
                "smoothing_interval" => c.holo.smoothing_interval = num(key, value)?,
                "wavelength" => c.holo.wavelength = num(key, value)?,
                "distance" => c.holo.distance = num(key, value)?,
                "pixel_size" => c.holo.pixel_size = num(key, value)?,
                "absorption" => {
                    c.holo.constraint =
                        AbsorptionConstraint::parse(value).ok_or_else(|| bad(key, value))?
                }
                "output" => c.output = PathBuf::from(value),
                _ => return Err(Error::Config(format!("unknown key {key:?}"))),
            }
        }
        Ok(c)
    }

    pub fn hash(&self) -> String {
        crate::io::sha256_hex(self.serialize().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.serialize()).unwrap(), c);
        c.validate().unwrap();
        assert_eq!(c.grid_side().unwrap(), 256);
    }

    #[test]
    fn comments_and_partial_files() {
        let c = ExperimentConfig::parse(
            "# table 2\nsigma = 8\nfractions = 0.5,0.9\n\nseeds = 1, 2\nobject = figs/man.pgm\n",
        )
        .unwrap();
        assert_eq!(c.sigma, 8.0);
        assert_eq!(c.fractions, vec![0.5, 0.9]);
        assert_eq!(c.seeds, vec![1, 2]);
        assert_eq!(c.object, ObjectSource::File("figs/man.pgm".into()));
        assert_eq!(c.grid_side().unwrap(), 512);
    }

    #[test]
    fn empty_fraction_list() {
        let c = ExperimentConfig::parse("fractions =\n").unwrap();
        assert!(c.fractions.is_empty());
        c.validate().unwrap();
    }

    fn scenario() -> impl Strategy<Value = Scenario> {
        prop_oneof![
            Just(Scenario::CdiRandom),
            Just(Scenario::CdiCentral),
            Just(Scenario::CdiSymmetrized),
            Just(Scenario::HoloRandom),
        ]
    }

    prop_compose! {
        fn any_config()(
            scenario in scenario(),
            sigma in 0.5f64..16.0,
            object_side in 1usize..1024,
            fractions in proptest::collection::vec(0.0f64..=1.0, 0..12),
            seeds in proptest::collection::vec(any::<u64>(), 0..4),
            file in proptest::option::of("[a-z][a-z0-9_/]{0,10}\\.pgm"),
            envelope in any::<bool>(),
            beta in 0.01f64..=1.0,
            counts in (1usize..5000, 1usize..200, 1usize..200, 0usize..20, 0usize..5000),
            detector in any::<bool>(),
            holo in (1usize..5000, 1usize..100, 1e-10f64..1e-5, -1.0f64..1.0, 1e-7f64..1e-3, any::<bool>()),
        ) -> ExperimentConfig {
            let (iterations, restarts, keep_best, er_interval, er_start) = counts;
            let (holo_iterations, smoothing_interval, wavelength, distance, pixel_size, real) = holo;
            ExperimentConfig {
                scenario,
                sigma,
                object_side,
                fractions,
                seeds,
                object: file.map_or(ObjectSource::Synthetic, |p| ObjectSource::File(p.into())),
                envelope,
                cdi: CdiSettings {
                    beta,
                    iterations,
                    restarts,
                    keep_best,
                    selection: if detector { SelectionMetric::Detector } else { SelectionMetric::GroundTruth },
                    er_interval,
                    er_start,
                },
                holo: HoloSettings {
                    iterations: holo_iterations,
                    smoothing_interval,
                    wavelength,
                    distance,
                    pixel_size,
                    constraint: if real { AbsorptionConstraint::Real } else { AbsorptionConstraint::KeepImaginary },
                },
                output: "runs/out".into(),
            }
        }
    }

    proptest! {
        #[test]
        fn serialization_round_trips(c in any_config()) {
            let text = c.serialize();
            let back = ExperimentConfig::parse(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(Error::Config(_))));
        assert!(ExperimentConfig::parse("sigma = four").is_err());
        assert!(ExperimentConfig::parse("no equals sign").is_err());
        assert!(ExperimentConfig::parse("selection = eq10").is_err());
        let c = ExperimentConfig::parse("fractions = 0.5, 1.1").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse("sigma = 4.1").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse("seeds =").unwrap();
        assert!(c.validate().is_err());
    }
}
