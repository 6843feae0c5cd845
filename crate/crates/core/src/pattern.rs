use crate::error::{Error, Result};
use crate::field::{GridGeometry, RealImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    Diffraction,
    Hologram,
}

impl PatternKind {
    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Diffraction => "diffraction",
            PatternKind::Hologram => "hologram",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "diffraction" => Some(PatternKind::Diffraction),
            "hologram" => Some(PatternKind::Hologram),
            _ => None,
        }
    }
}

/// Measured amplitudes (`√intensity`) with a measurement mask.
///
/// Samples are stored DC-at-corner for diffraction patterns and in detector
/// order for holograms. Unmeasured samples always hold amplitude 0 and are
/// never read as data.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredPattern {
    amplitude: Vec<f64>,
    mask: Vec<bool>,
    geometry: GridGeometry,
    kind: PatternKind,
}

impl MeasuredPattern {
    pub fn fully_measured(
        amplitude: RealImage,
        geometry: GridGeometry,
        kind: PatternKind,
    ) -> Result<Self> {
        let n = amplitude.side();
        Self::new(amplitude, vec![true; n * n], geometry, kind)
    }

    pub fn new(
        amplitude: RealImage,
        mask: Vec<bool>,
        geometry: GridGeometry,
        kind: PatternKind,
    ) -> Result<Self> {
        let n = amplitude.side();
        if geometry.n != n {
            return Err(Error::Dimension(format!(
                "geometry declares {} samples per side, amplitude has {n}",
                geometry.n
            )));
        }
        if mask.len() != n * n {
            return Err(Error::Dimension(format!(
                "mask has {} entries for a {n}x{n} pattern",
                mask.len()
            )));
        }
        let mut amplitude = amplitude.into_vec();
        for (a, &m) in amplitude.iter_mut().zip(&mask) {
            if !m {
                *a = 0.0;
            }
        }
        Ok(Self {
            amplitude,
            mask,
            geometry,
            kind,
        })
    }

    pub fn side(&self) -> usize {
        self.geometry.n
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn amplitude_image(&self) -> RealImage {
        RealImage::new_unchecked(self.side(), self.amplitude.clone())
    }

    pub fn intensity(&self) -> RealImage {
        RealImage::new_unchecked(self.side(), self.amplitude.iter().map(|a| a * a).collect())
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_measured(&self, u: usize, v: usize) -> bool {
        self.mask[u * self.side() + v]
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }

    /// Ratio of unmeasured samples to all samples.
    pub fn missing_fraction(&self) -> f64 {
        self.missing_count() as f64 / self.mask.len() as f64
    }

    /// Same data with a mask intersected into the current one.
    pub fn intersect_mask(&self, other: &[bool]) -> Result<Self> {
        if other.len() != self.mask.len() {
            return Err(Error::Dimension("mask sizes differ".into()));
        }
        let mask: Vec<bool> = self.mask.iter().zip(other).map(|(a, b)| *a && *b).collect();
        Self::new(self.amplitude_image(), mask, self.geometry, self.kind)
    }

    pub(crate) fn from_parts_unchecked(
        amplitude: Vec<f64>,
        mask: Vec<bool>,
        geometry: GridGeometry,
        kind: PatternKind,
    ) -> Self {
        Self {
            amplitude,
            mask,
            geometry,
            kind,
        }
    }
}
