//! Forward models: noise-free far-field diffraction of a padded real object
//! and angular-spectrum propagation for in-line holograms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{dft2, idft2, signed_frequency, ComplexField, GridGeometry, PhysicalGeometry, RealImage};
use crate::pattern::{MeasuredPattern, PatternKind};

/// Centers an `N₀×N₀` object in an `N×N` zero field.
pub fn embed_object(object: &RealImage, n: usize) -> Result<(RealImage, GridGeometry)> {
    let n0 = object.side();
    if n0 > n {
        return Err(Error::Dimension(format!(
            "object side {n0} exceeds grid side {n}"
        )));
    }
    if n0 % 2 != 0 || n % 2 != 0 {
        return Err(Error::UnsupportedSize(if n % 2 != 0 { n } else { n0 }));
    }
    let off = (n - n0) / 2;
    let mut data = vec![0.0; n * n];
    for r in 0..n0 {
        let dst = (r + off) * n + off;
        data[dst..dst + n0].copy_from_slice(&object.as_slice()[r * n0..(r + 1) * n0]);
    }
    Ok((RealImage::new_unchecked(n, data), GridGeometry::new(n, n0)?))
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Far-field factor of a unit square pixel, `sinc(πu/N)·sinc(πv/N)` at signed
/// frequencies.
pub fn pixel_envelope(u: usize, v: usize, n: usize) -> f64 {
    let fu = signed_frequency(u, n);
    let fv = signed_frequency(v, n);
    sinc(PI * fu / n as f64) * sinc(PI * fv / n as f64)
}

/// Complex far field of a padded object, optionally weighted by the square
/// pixel aperture.
pub fn far_field(padded: &RealImage, envelope: bool) -> Result<ComplexField> {
    let mut spectrum = dft2(&ComplexField::from_real(padded))?;
    if envelope {
        let n = padded.side();
        for u in 0..n {
            for v in 0..n {
                let c = spectrum.get(u, v) * pixel_envelope(u, v, n);
                spectrum.set(u, v, c);
            }
        }
    }
    Ok(spectrum)
}

/// Fully measured diffraction amplitude `|F|`, stored DC-at-corner.
pub fn simulate_diffraction(
    padded: &RealImage,
    geometry: GridGeometry,
    envelope: bool,
) -> Result<MeasuredPattern> {
    if padded.as_slice().iter().any(|&x| x < 0.0) {
        return Err(Error::Domain("object has negative pixels".into()));
    }
    let amplitude = far_field(padded, envelope)?.magnitude();
    MeasuredPattern::fully_measured(amplitude, geometry, PatternKind::Diffraction)
}

/// Angular-spectrum propagation parameters. Lengths in metres; a negative
/// distance propagates backwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    pub wavelength: f64,
    pub distance: f64,
    /// Physical side of the sampled field.
    pub side: f64,
    pub n: usize,
}

impl PropagationParams {
    pub fn new(wavelength: f64, distance: f64, side: f64, n: usize) -> Result<Self> {
        if !(wavelength > 0.0) || !(side > 0.0) || !distance.is_finite() {
            return Err(Error::Domain(
                "wavelength and side must be positive, distance finite".into(),
            ));
        }
        if n % 2 != 0 || n < 2 {
            return Err(Error::UnsupportedSize(n));
        }
        Ok(Self {
            wavelength,
            distance,
            side,
            n,
        })
    }

    pub fn reversed(&self) -> Self {
        Self {
            distance: -self.distance,
            ..*self
        }
    }

    pub fn pixel_size(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Direction cosine for DC-at-corner frequency index `k`.
    pub fn direction_cosine(&self, k: usize) -> f64 {
        self.wavelength * signed_frequency(k, self.n) / self.side
    }

    /// Transfer function `exp((2πiz/λ)·√(1−α²−β²))`, zero on the evanescent
    /// band `α²+β² > 1`.
    pub fn transfer(&self) -> Vec<Complex64> {
        let n = self.n;
        let k = 2.0 * PI * self.distance / self.wavelength;
        let mut h = Vec::with_capacity(n * n);
        for u in 0..n {
            let a = self.direction_cosine(u);
            for v in 0..n {
                let b = self.direction_cosine(v);
                let q = 1.0 - a * a - b * b;
                h.push(if q >= 0.0 {
                    Complex64::from_polar(1.0, k * q.sqrt())
                } else {
                    Complex64::new(0.0, 0.0)
                });
            }
        }
        h
    }
}

/// Precomputed forward and backward transfer functions for repeated
/// propagation over the same distance.
#[derive(Debug, Clone)]
pub struct Propagator {
    params: PropagationParams,
    forward: Vec<Complex64>,
    backward: Vec<Complex64>,
}

impl Propagator {
    pub fn new(params: PropagationParams) -> Self {
        Self {
            params,
            forward: params.transfer(),
            backward: params.reversed().transfer(),
        }
    }

    pub fn params(&self) -> &PropagationParams {
        &self.params
    }

    fn apply(&self, field: &ComplexField, transfer: &[Complex64]) -> Result<ComplexField> {
        if field.side() != self.params.n {
            return Err(Error::Dimension(format!(
                "field side {} does not match propagation grid {}",
                field.side(),
                self.params.n
            )));
        }
        let mut spectrum = dft2(field)?;
        spectrum
            .as_mut_slice()
            .iter_mut()
            .zip(transfer)
            .for_each(|(s, h)| *s *= h);
        idft2(&spectrum)
    }

    /// Object plane to detector plane (`+z`).
    pub fn forward(&self, field: &ComplexField) -> Result<ComplexField> {
        self.apply(field, &self.forward)
    }

    /// Detector plane to object plane (`−z`).
    pub fn backward(&self, field: &ComplexField) -> Result<ComplexField> {
        self.apply(field, &self.backward)
    }
}

/// Angular-spectrum propagation over `params.distance`.
pub fn asm_propagate(field: &ComplexField, params: &PropagationParams) -> Result<ComplexField> {
    Propagator::new(*params).forward(field)
}

/// Transmission `t(x,y)` of the object plane under unit plane-wave
/// illumination.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitWave(pub ComplexField);

/// `t = 1 − absorption` for an amplitude object with absorption in `[0, 1]`.
pub fn make_exit_wave(absorption: &RealImage) -> Result<ExitWave> {
    if let Some(bad) = absorption.as_slice().iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Domain(format!("absorption {bad} outside [0, 1]")));
    }
    Ok(ExitWave(ComplexField::from_fn(absorption.side(), |r, c| {
        Complex64::new(1.0 - absorption.get(r, c), 0.0)
    })))
}

/// Hologram amplitude `|U|` of the exit wave propagated by `params`.
/// `n0` is the object side used to record the oversampling ratio.
pub fn simulate_hologram(
    exit: &ExitWave,
    params: &PropagationParams,
    n0: usize,
) -> Result<MeasuredPattern> {
    let u = asm_propagate(&exit.0, params)?;
    let geometry = GridGeometry::new(params.n, n0)?.with_physical(PhysicalGeometry {
        pixel_size: params.pixel_size(),
        wavelength: params.wavelength,
        distance: params.distance.abs(),
    })?;
    MeasuredPattern::fully_measured(u.magnitude(), geometry, PatternKind::Hologram)
}
