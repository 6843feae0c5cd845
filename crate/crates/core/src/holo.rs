//! Iterative reconstruction of in-line holograms with missing samples.
//!
//! The wavefront is propagated back and forth between object and detector
//! planes. The detector constraint replaces measured amplitudes only; the
//! object constraint keeps absorption non-negative and forces the plane-wave
//! value outside the support. The object-plane field is smoothed at a fixed
//! interval.

use num_complex::Complex64;

use crate::cdi::{RetrievalResult, RestartSummary, SupportSpec};
use crate::error::{Error, Result};
use crate::field::{dft2, idft2, ComplexField, Fft2, RealImage};
use crate::forward::{PropagationParams, Propagator};
use crate::metrics::{error_fienup, error_rms, ErrorTrace};
use crate::pattern::{MeasuredPattern, PatternKind};

/// Object-plane projection applied to the absorption `a = 1 − t′` inside
/// the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsorptionConstraint {
    /// Negative `Re(a)` is zeroed, `Im(a)` is kept.
    #[default]
    KeepImaginary,
    /// `a := max(Re(a), 0)`: a real, non-negative amplitude object.
    Real,
}

impl AbsorptionConstraint {
    pub fn name(self) -> &'static str {
        match self {
            AbsorptionConstraint::KeepImaginary => "complex",
            AbsorptionConstraint::Real => "real",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "complex" => Some(AbsorptionConstraint::KeepImaginary),
            "real" => Some(AbsorptionConstraint::Real),
            _ => None,
        }
    }

    fn project(self, a: Complex64) -> Complex64 {
        match self {
            AbsorptionConstraint::KeepImaginary if a.re < 0.0 => Complex64::new(0.0, a.im),
            AbsorptionConstraint::KeepImaginary => a,
            AbsorptionConstraint::Real => Complex64::new(a.re.max(0.0), 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoloConfig {
    pub iterations: usize,
    /// Iterations between smoothings; values `≥ iterations` disable it.
    pub smoothing_interval: usize,
    pub support: SupportSpec,
    pub params: PropagationParams,
    pub constraint: AbsorptionConstraint,
    /// Unused by the deterministic iteration; carried for provenance.
    pub seed: u64,
}

impl HoloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.smoothing_interval == 0 {
            return Err(Error::Config(
                "iterations and smoothing interval must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// 3×3 kernel `[[1,1,1],[1,4,1],[1,1,1]]/12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingKernel {
    pub weights: [[f64; 3]; 3],
}

impl Default for SmoothingKernel {
    fn default() -> Self {
        let w = 1.0 / 12.0;
        Self {
            weights: [[w, w, w], [w, 4.0 * w, w], [w, w, w]],
        }
    }
}

impl SmoothingKernel {
    /// Kernel spectrum on an `n×n` grid, centered at index `(0,0)`.
    fn spectrum(&self, n: usize) -> Result<ComplexField> {
        let mut k = ComplexField::zeros(n);
        for (dr, row) in self.weights.iter().enumerate() {
            for (dc, &w) in row.iter().enumerate() {
                let r = (n + dr - 1) % n;
                let c = (n + dc - 1) % n;
                k.set(r, c, Complex64::new(w, 0.0));
            }
        }
        dft2(&k)
    }
}

/// Circular convolution with the kernel, computed in the transform domain.
pub fn smooth(field: &ComplexField, kernel: &SmoothingKernel) -> Result<ComplexField> {
    let n = field.side();
    if n < 3 {
        return Err(Error::Dimension(format!("smoothing needs N >= 3, got {n}")));
    }
    let ks = kernel.spectrum(n)?;
    let mut s = dft2(field)?;
    s.as_mut_slice()
        .iter_mut()
        .zip(ks.as_slice())
        .for_each(|(a, b)| *a *= b);
    idft2(&s)
}

struct HoloWorkspace<'a> {
    propagator: Propagator,
    hologram: &'a MeasuredPattern,
    support: Vec<bool>,
    retrieved: Vec<f64>,
    /// Object-plane field after back-propagation, before the object constraint.
    back: ComplexField,
    constraint: AbsorptionConstraint,
}

impl<'a> HoloWorkspace<'a> {
    fn new(
        hologram: &'a MeasuredPattern,
        support: &SupportSpec,
        params: &PropagationParams,
        constraint: AbsorptionConstraint,
    ) -> Result<Self> {
        let n = hologram.side();
        if params.n != n {
            return Err(Error::Dimension(format!(
                "propagation grid {} does not match hologram {n}",
                params.n
            )));
        }
        Ok(Self {
            propagator: Propagator::new(*params),
            hologram,
            support: support.indicator(n)?,
            retrieved: vec![0.0; n * n],
            back: ComplexField::zeros(n),
            constraint,
        })
    }

    fn step(&mut self, t: &ComplexField) -> Result<ComplexField> {
        let mut u = self.propagator.forward(t)?;
        let amp = self.hologram.amplitude();
        let mask = self.hologram.mask();
        for (i, c) in u.as_mut_slice().iter_mut().enumerate() {
            let mag = c.norm();
            self.retrieved[i] = mag;
            if mask[i] {
                *c = if mag > 0.0 {
                    *c * (amp[i] / mag)
                } else {
                    Complex64::new(amp[i], 0.0)
                };
            }
        }
        self.back = self.propagator.backward(&u)?;
        let one = Complex64::new(1.0, 0.0);
        let next = self
            .back
            .as_slice()
            .iter()
            .zip(&self.support)
            .map(|(&tp, &inside)| {
                if !inside {
                    return one;
                }
                one - self.constraint.project(one - tp)
            })
            .collect();
        Ok(ComplexField::from_vec_unchecked(t.side(), next))
    }
}

/// One iteration: propagate to the detector, impose measured amplitudes,
/// propagate back, then with `t = 1 − a` project `a` by `constraint` inside
/// the support and set `a = 0` outside it.
pub fn holo_step(
    t: &ComplexField,
    hologram: &MeasuredPattern,
    support: &SupportSpec,
    params: &PropagationParams,
    constraint: AbsorptionConstraint,
) -> Result<ComplexField> {
    HoloWorkspace::new(hologram, support, params, constraint)?.step(t)
}

/// Absorption image `clamp(Re(1 − t), 0, 1)`.
pub fn absorption(t: &ComplexField) -> RealImage {
    RealImage::new_unchecked(
        t.side(),
        t.as_slice()
            .iter()
            .map(|c| (1.0 - c.re).clamp(0.0, 1.0))
            .collect(),
    )
}

/// Initial object-plane estimate: back-propagated measured amplitudes with
/// phase 0, unmeasured samples set to the plane-wave value 1.
pub fn initial_transmission(hologram: &MeasuredPattern, params: &PropagationParams) -> Result<ComplexField> {
    let n = hologram.side();
    let field = ComplexField::from_vec_unchecked(
        n,
        hologram
            .amplitude()
            .iter()
            .zip(hologram.mask())
            .map(|(&a, &m)| Complex64::new(if m { a } else { 1.0 }, 0.0))
            .collect(),
    );
    Propagator::new(*params).backward(&field)
}

/// Iterative hologram reconstruction.
///
/// `ground_truth` is the `N₀×N₀` absorption; when given, the trace carries
/// the per-iteration object error and the result its final value.
pub fn reconstruct_hologram(
    hologram: &MeasuredPattern,
    config: &HoloConfig,
    ground_truth: Option<&RealImage>,
) -> Result<RetrievalResult> {
    config.validate()?;
    if hologram.kind() != PatternKind::Hologram {
        return Err(Error::Kind {
            expected: PatternKind::Hologram.name(),
            found: hologram.kind().name(),
        });
    }
    let n = hologram.side();
    let n0 = config.support.side;
    let kernel = SmoothingKernel::default();
    let kernel_spectrum = kernel.spectrum(n)?;
    let mut fft = Fft2::new(n);
    let mut ws = HoloWorkspace::new(hologram, &config.support, &config.params, config.constraint)?;
    let mut t = initial_transmission(hologram, &config.params)?;
    let mut trace = ErrorTrace::new();

    for k in 1..=config.iterations {
        t = ws.step(&t)?;
        let eq9 = error_fienup(&ws.retrieved, hologram)?;
        let eq10 = absorption_support_ratio(&ws.back, &ws.support);
        let eq8 = match ground_truth {
            Some(truth) => Some(error_rms(&absorption(&t).crop_center(n0)?, truth)?),
            None => None,
        };
        trace.push(eq9, eq8, eq10);
        if k % config.smoothing_interval == 0 && k < config.iterations {
            let mut data = t.into_vec();
            fft.forward(&mut data);
            data.iter_mut()
                .zip(kernel_spectrum.as_slice())
                .for_each(|(a, b)| *a *= b);
            fft.inverse(&mut data);
            t = ComplexField::from_vec_unchecked(n, data);
        }
    }

    let object = absorption(&t);
    let detector = ws.propagator.forward(&t)?;
    let amplitude: Vec<f64> = hologram
        .amplitude()
        .iter()
        .zip(hologram.mask())
        .zip(detector.as_slice())
        .map(|((&a, &m), u)| if m { a } else { u.norm() })
        .collect();
    let recovered_pattern = MeasuredPattern::fully_measured(
        RealImage::new_unchecked(n, amplitude),
        *hologram.geometry(),
        PatternKind::Hologram,
    )?;
    let eq8 = match ground_truth {
        Some(truth) => Some(error_rms(&object.crop_center(n0)?, truth)?),
        None => None,
    };
    let last = *trace.last().expect("at least one iteration");
    Ok(RetrievalResult {
        object,
        recovered_pattern,
        traces: vec![trace],
        restarts: vec![RestartSummary {
            index: 0,
            eq9: last.eq9,
            eq10: last.eq10,
            eq8,
        }],
        selected: vec![0],
        eq8,
    })
}

/// Out-of-support to in-support energy of the absorption `1 − t′`.
fn absorption_support_ratio(back: &ComplexField, support: &[bool]) -> f64 {
    let (mut inside, mut outside) = (0.0, 0.0);
    for (c, &s) in back.as_slice().iter().zip(support) {
        let a = (Complex64::new(1.0, 0.0) - c).norm_sqr();
        if s {
            inside += a;
        } else {
            outside += a;
        }
    }
    if inside == 0.0 {
        f64::INFINITY
    } else {
        (outside / inside).sqrt()
    }
}
