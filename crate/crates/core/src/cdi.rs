//! Multi-restart hybrid input-output (HIO) phase retrieval for diffraction
//! patterns with missing samples.
//!
//! Unmeasured detector samples are never constrained: each iteration they
//! keep whatever value the current object estimate produces, so the missing
//! amplitudes are recovered alongside the object.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{dft2, idft2, ComplexField, Fft2, RealImage};
use crate::forward::embed_object;
use crate::metrics::{error_fienup, error_rms, error_support, ErrorTrace};
use crate::pattern::{MeasuredPattern, PatternKind};
use crate::rng;

/// Centered square support of side `side`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportSpec {
    pub side: usize,
}

impl SupportSpec {
    pub fn new(side: usize) -> Self {
        Self { side }
    }

    pub fn offset(&self, n: usize) -> usize {
        (n - self.side) / 2
    }

    /// Indicator over an `n×n` grid, row-major.
    pub fn indicator(&self, n: usize) -> Result<Vec<bool>> {
        if self.side == 0 || self.side > n || (n - self.side) % 2 != 0 {
            return Err(Error::Dimension(format!(
                "support side {} cannot be centered in a {n}-sample grid",
                self.side
            )));
        }
        let off = self.offset(n);
        let range = off..off + self.side;
        Ok((0..n * n)
            .map(|i| range.contains(&(i / n)) && range.contains(&(i % n)))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMetric {
    /// Object-domain error against a known ground truth.
    GroundTruth,
    /// Detector-domain amplitude residual.
    Detector,
}

impl SelectionMetric {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMetric::GroundTruth => "eq8",
            SelectionMetric::Detector => "eq9",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HioConfig {
    pub beta: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub keep_best: usize,
    pub selection: SelectionMetric,
    pub seed: u64,
    /// After iteration `er_start`, every `er_interval`-th iteration zeroes
    /// the violation set instead of applying feedback. Zero disables it.
    pub er_interval: usize,
    pub er_start: usize,
}

impl Default for HioConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            iterations: 2000,
            restarts: 100,
            keep_best: 10,
            selection: SelectionMetric::GroundTruth,
            seed: 0,
            er_interval: 0,
            er_start: 0,
        }
    }
}

impl HioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("feedback {} outside (0, 1]", self.beta)));
        }
        if self.iterations == 0 || self.restarts == 0 || self.keep_best == 0 {
            return Err(Error::Config(
                "iterations, restarts and keep_best must be at least 1".into(),
            ));
        }
        if self.keep_best > self.restarts {
            return Err(Error::Config(format!(
                "keep_best {} exceeds restarts {}",
                self.keep_best, self.restarts
            )));
        }
        Ok(())
    }
}

/// Final error values of one restart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartSummary {
    pub index: usize,
    pub eq9: f64,
    pub eq10: f64,
    /// After alignment to the ground truth, when one was supplied.
    pub eq8: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RetrievalResult {
    /// Real, non-negative object on the full grid; zero outside the support.
    pub object: RealImage,
    /// Measured amplitudes where measured, recovered amplitudes elsewhere.
    pub recovered_pattern: MeasuredPattern,
    pub traces: Vec<ErrorTrace>,
    pub restarts: Vec<RestartSummary>,
    /// Restart indices kept for averaging, best first.
    pub selected: Vec<usize>,
    /// Object-domain error of the averaged result, when ground truth is known.
    pub eq8: Option<f64>,
}

/// Per-iteration state shared by the step and restart loops.
struct HioWorkspace<'a> {
    fft: Fft2,
    pattern: &'a MeasuredPattern,
    support: Vec<bool>,
    beta: f64,
    spectrum: Vec<Complex64>,
    /// `|dft2|` of the current estimate.
    retrieved: Vec<f64>,
    /// Output of the detector constraint, `g′`.
    projected: Vec<Complex64>,
}

impl<'a> HioWorkspace<'a> {
    fn new(pattern: &'a MeasuredPattern, support: &SupportSpec, beta: f64) -> Result<Self> {
        let n = pattern.side();
        Ok(Self {
            fft: Fft2::new(n),
            pattern,
            support: support.indicator(n)?,
            beta,
            spectrum: vec![Complex64::new(0.0, 0.0); n * n],
            retrieved: vec![0.0; n * n],
            projected: vec![Complex64::new(0.0, 0.0); n * n],
        })
    }

    /// Advances `g` in place by one HIO iteration, or by one plain
    /// projection (violations zeroed) when `reduce` is set.
    fn step(&mut self, g: &mut [Complex64], reduce: bool) {
        self.spectrum.copy_from_slice(g);
        self.fft.forward(&mut self.spectrum);
        let amp = self.pattern.amplitude();
        let mask = self.pattern.mask();
        for i in 0..self.spectrum.len() {
            let s = self.spectrum[i];
            let mag = s.norm();
            if mask[i] {
                self.spectrum[i] = if mag > 0.0 {
                    s * (amp[i] / mag)
                } else {
                    Complex64::new(amp[i], 0.0)
                };
            }
        }
        self.projected.copy_from_slice(&self.spectrum);
        self.fft.inverse(&mut self.projected);
        for i in 0..g.len() {
            let p = self.projected[i];
            g[i] = if self.support[i] && p.re >= 0.0 {
                Complex64::new(p.re, 0.0)
            } else if reduce {
                Complex64::new(0.0, 0.0)
            } else {
                g[i] - self.beta * p
            };
        }
    }

    /// Fills `retrieved` with the detector amplitudes of the estimate.
    fn update_retrieved(&mut self) {
        for (s, (p, &inside)) in self.spectrum.iter_mut().zip(self.projected.iter().zip(&self.support)) {
            *s = Complex64::new(if inside { p.re.max(0.0) } else { 0.0 }, 0.0);
        }
        self.fft.forward(&mut self.spectrum);
        for (r, s) in self.retrieved.iter_mut().zip(&self.spectrum) {
            *r = s.norm();
        }
    }

    /// Real, non-negative part of `g′` inside the support.
    fn estimate(&self) -> Vec<f64> {
        self.projected
            .iter()
            .zip(&self.support)
            .map(|(p, &s)| if s { p.re.max(0.0) } else { 0.0 })
            .collect()
    }
}

fn check_shapes(g: &ComplexField, pattern: &MeasuredPattern) -> Result<()> {
    if g.side() != pattern.side() {
        return Err(Error::Dimension(format!(
            "iterate is {0}x{0}, pattern is {1}x{1}",
            g.side(),
            pattern.side()
        )));
    }
    Ok(())
}

/// One HIO iteration.
///
/// Measured samples take the measured amplitude with the current phase
/// (phase 0 where the current spectrum vanishes); unmeasured samples pass
/// through unchanged. In the object plane, samples outside the support or
/// with negative real part receive the feedback `g − β·g′`; all others
/// become `Re(g′)`.
pub fn hio_step(
    g: &ComplexField,
    pattern: &MeasuredPattern,
    support: &SupportSpec,
    beta: f64,
) -> Result<ComplexField> {
    check_shapes(g, pattern)?;
    let mut ws = HioWorkspace::new(pattern, support, beta)?;
    let mut next = g.as_slice().to_vec();
    ws.step(&mut next, false);
    Ok(ComplexField::from_vec_unchecked(g.side(), next))
}

/// The 180° rotation of an `n×n` image about its center.
fn rotate_half_turn(image: &[f64]) -> Vec<f64> {
    image.iter().rev().copied().collect()
}

/// Object error of a support-cropped estimate, taking the better of the
/// direct and twin (half-turn) orientations.
struct TwinAwareError {
    truth: Vec<f64>,
    truth_rotated: Vec<f64>,
    n0: usize,
}

impl TwinAwareError {
    fn new(truth: &RealImage) -> Self {
        let n0 = truth.side();
        Self {
            truth: truth.as_slice().to_vec(),
            truth_rotated: rotate_half_turn(truth.as_slice()),
            n0,
        }
    }

    fn eval(&self, estimate: &[f64], n: usize) -> f64 {
        let off = (n - self.n0) / 2;
        let (mut direct, mut twin) = (0.0, 0.0);
        for r in 0..self.n0 {
            for c in 0..self.n0 {
                let e = estimate[(r + off) * n + c + off];
                let k = r * self.n0 + c;
                direct += (e - self.truth[k]).powi(2);
                twin += (e - self.truth_rotated[k]).powi(2);
            }
        }
        direct.min(twin).sqrt() / self.n0 as f64
    }
}

/// Initial iterate `idft2(A·exp(iφ₀))` with phases drawn from stream
/// `restart_index` of the configured seed.
pub fn initial_estimate(pattern: &MeasuredPattern, seed: u64, restart_index: usize) -> Result<ComplexField> {
    let n = pattern.side();
    let mut gen = rng::generator(seed, restart_index as u64);
    let data = pattern
        .amplitude()
        .iter()
        .map(|&a| {
            let phase = gen.gen_range(0.0..std::f64::consts::TAU);
            Complex64::from_polar(a, phase)
        })
        .collect();
    idft2(&ComplexField::from_vec_unchecked(n, data))
}

/// Output of a single restart.
#[derive(Debug, Clone)]
pub struct RestartOutput {
    /// Final iterate `g_k`.
    pub iterate: ComplexField,
    /// Real, non-negative part of the last `g′` inside the support.
    pub estimate: RealImage,
    pub trace: ErrorTrace,
}

/// Runs `config.iterations` HIO steps from a random-phase start.
///
/// `ground_truth` is the `N₀×N₀` object; when given, the trace carries the
/// per-iteration object error against it (better of the two twin
/// orientations, no translation search).
pub fn run_restart(
    pattern: &MeasuredPattern,
    support: &SupportSpec,
    config: &HioConfig,
    restart_index: usize,
    ground_truth: Option<&RealImage>,
) -> Result<RestartOutput> {
    config.validate()?;
    let n = pattern.side();
    let mut ws = HioWorkspace::new(pattern, support, config.beta)?;
    let twin_error = ground_truth.map(TwinAwareError::new);
    let mut g = initial_estimate(pattern, config.seed, restart_index)?.into_vec();
    let mut trace = ErrorTrace::new();
    for k in 1..=config.iterations {
        let reduce = config.er_interval > 0 && k > config.er_start && k % config.er_interval == 0;
        ws.step(&mut g, reduce);
        ws.update_retrieved();
        let eq9 = error_fienup(&ws.retrieved, pattern)?;
        let eq10 = support_ratio(&ws.projected, &ws.support);
        let eq8 = twin_error.as_ref().map(|t| t.eval(&ws.estimate(), n));
        trace.push(eq9, eq8, eq10);
    }
    Ok(RestartOutput {
        iterate: ComplexField::from_vec_unchecked(n, g),
        estimate: RealImage::new_unchecked(n, ws.estimate()),
        trace,
    })
}

fn support_ratio(field: &[Complex64], support: &[bool]) -> f64 {
    let (mut inside, mut outside) = (0.0, 0.0);
    for (c, &s) in field.iter().zip(support) {
        if s {
            inside += c.norm_sqr();
        } else {
            outside += c.norm_sqr();
        }
    }
    if inside == 0.0 {
        f64::INFINITY
    } else {
        (outside / inside).sqrt()
    }
}

/// How a candidate was moved onto a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub shift: (usize, usize),
    /// Candidate was replaced by its point reflection `c(−x)`.
    pub twin: bool,
}

/// Aligns `candidate` to `reference` over all cyclic translations of the
/// candidate and of its point reflection, maximizing the cross-correlation.
/// Ties (within 1e-9 of the peak) go to the smallest
/// `(row shift, column shift, twin)`.
pub fn align_to_reference_with(candidate: &RealImage, reference: &RealImage) -> Result<(RealImage, Alignment)> {
    let n = candidate.side();
    if reference.side() != n {
        return Err(Error::Dimension(format!(
            "candidate is {n}x{n}, reference is {0}x{0}",
            reference.side()
        )));
    }
    let r = dft2(&ComplexField::from_real(reference))?;
    let c = dft2(&ComplexField::from_real(candidate))?;
    // corr(s) = Σ ref(x)·cand(x − s); the reflected candidate has spectrum conj(C).
    let direct = idft2(&ComplexField::from_vec_unchecked(
        n,
        r.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b.conj()).collect(),
    ))?;
    let twin = idft2(&ComplexField::from_vec_unchecked(
        n,
        r.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).collect(),
    ))?;
    let peak = direct
        .as_slice()
        .iter()
        .chain(twin.as_slice())
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * peak.abs().max(f64::MIN_POSITIVE);
    let mut best: Option<Alignment> = None;
    'search: for i in 0..n * n {
        for (flag, corr) in [(false, &direct), (true, &twin)] {
            if corr.as_slice()[i].re >= peak - tol {
                best = Some(Alignment {
                    shift: (i / n, i % n),
                    twin: flag,
                });
                break 'search;
            }
        }
    }
    let a = best.expect("correlation peak exists");
    Ok((apply_alignment(candidate, a), a))
}

/// Applies an alignment: `out(x) = v(x − s)` where `v` is the candidate or its
/// point reflection.
pub fn apply_alignment(candidate: &RealImage, a: Alignment) -> RealImage {
    let n = candidate.side();
    let (sr, sc) = a.shift;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let mut y = ((r + n - sr) % n, (c + n - sc) % n);
            if a.twin {
                y = ((n - y.0) % n, (n - y.1) % n);
            }
            out.push(candidate.get(y.0, y.1));
        }
    }
    RealImage::new_unchecked(n, out)
}

pub fn align_to_reference(candidate: &RealImage, reference: &RealImage) -> Result<RealImage> {
    align_to_reference_with(candidate, reference).map(|(img, _)| img)
}

/// Object error of a full-grid reconstruction after aligning it to the
/// zero-padded ground truth and cropping to the object size.
pub fn aligned_object_error(reconstruction: &RealImage, truth: &RealImage) -> Result<f64> {
    let n = reconstruction.side();
    let (padded, _) = embed_object(truth, n)?;
    let aligned = align_to_reference(reconstruction, &padded)?;
    error_rms(&aligned.crop_center(truth.side())?, truth)
}

/// Full retrieval: independent restarts, selection of the `keep_best`
/// lowest-error restarts, alignment to the best one, averaging, and
/// recovery of the missing detector amplitudes.
///
/// `ground_truth` is the `N₀×N₀` object, required for
/// [`SelectionMetric::GroundTruth`].
pub fn retrieve(
    pattern: &MeasuredPattern,
    support: &SupportSpec,
    config: &HioConfig,
    ground_truth: Option<&RealImage>,
) -> Result<RetrievalResult> {
    config.validate()?;
    if pattern.kind() != PatternKind::Diffraction {
        return Err(Error::Kind {
            expected: PatternKind::Diffraction.name(),
            found: pattern.kind().name(),
        });
    }
    if config.selection == SelectionMetric::GroundTruth && ground_truth.is_none() {
        return Err(Error::Config(
            "ground-truth selection requires the original object".into(),
        ));
    }
    let n = pattern.side();
    let indicator = support.indicator(n)?;

    let outputs: Vec<RestartOutput> = (0..config.restarts)
        .into_par_iter()
        .map(|k| run_restart(pattern, support, config, k, ground_truth))
        .collect::<Result<_>>()?;

    let mut summaries = Vec::with_capacity(outputs.len());
    for (index, out) in outputs.iter().enumerate() {
        let last = out.trace.last().expect("at least one iteration");
        let eq8 = match ground_truth {
            Some(t) => Some(aligned_object_error(&out.estimate, t)?),
            None => None,
        };
        summaries.push(RestartSummary {
            index,
            eq9: last.eq9,
            eq10: last.eq10,
            eq8,
        });
    }

    let score = |s: &RestartSummary| match config.selection {
        SelectionMetric::GroundTruth => s.eq8.expect("ground truth present"),
        SelectionMetric::Detector => s.eq9,
    };
    let mut order: Vec<usize> = (0..summaries.len()).collect();
    order.sort_by(|&a, &b| score(&summaries[a]).total_cmp(&score(&summaries[b])).then(a.cmp(&b)));
    let selected: Vec<usize> = order[..config.keep_best].to_vec();

    let reference = &outputs[selected[0]].estimate;
    let mut sum = vec![0.0; n * n];
    for &k in &selected {
        let aligned = if k == selected[0] {
            reference.clone()
        } else {
            align_to_reference(&outputs[k].estimate, reference)?
        };
        sum.iter_mut().zip(aligned.as_slice()).for_each(|(s, a)| *s += a);
    }
    let count = selected.len() as f64;
    let object = RealImage::new_unchecked(
        n,
        sum.iter()
            .zip(&indicator)
            .map(|(&s, &inside)| if inside { (s / count).max(0.0) } else { 0.0 })
            .collect(),
    );

    let recovered_pattern = recover_pattern(pattern, &object)?;
    let eq8 = match ground_truth {
        Some(t) => Some(aligned_object_error(&object, t)?),
        None => None,
    };
    Ok(RetrievalResult {
        object,
        recovered_pattern,
        traces: outputs.into_iter().map(|o| o.trace).collect(),
        restarts: summaries,
        selected,
        eq8,
    })
}

/// Fills the unmeasured samples of `pattern` with `|dft2(object)|`.
pub fn recover_pattern(pattern: &MeasuredPattern, object: &RealImage) -> Result<MeasuredPattern> {
    let spectrum = dft2(&ComplexField::from_real(object))?;
    let amplitude: Vec<f64> = pattern
        .amplitude()
        .iter()
        .zip(pattern.mask())
        .zip(spectrum.as_slice())
        .map(|((&a, &m), s)| if m { a } else { s.norm() })
        .collect();
    MeasuredPattern::fully_measured(
        RealImage::new_unchecked(pattern.side(), amplitude),
        *pattern.geometry(),
        pattern.kind(),
    )
}

/// Single inverse transform of the complex far field with the unmeasured
/// samples zeroed; the amplitude of the result is the reconstruction. Only
/// available in simulation, where the phases are known.
pub fn inverse_transform_baseline(far_field: &ComplexField, mask: &[bool]) -> Result<RealImage> {
    if mask.len() != far_field.as_slice().len() {
        return Err(Error::Dimension("mask does not match far field".into()));
    }
    let masked = ComplexField::from_vec_unchecked(
        far_field.side(),
        far_field
            .as_slice()
            .iter()
            .zip(mask)
            .map(|(&c, &m)| if m { c } else { Complex64::new(0.0, 0.0) })
            .collect(),
    );
    Ok(idft2(&masked)?.magnitude())
}

/// Object-constraint residual of an estimate, exposed for callers holding a
/// full field rather than a workspace.
pub fn support_error(estimate: &ComplexField, support: &SupportSpec) -> Result<f64> {
    error_support(estimate, &support.indicator(estimate.side())?)
}
