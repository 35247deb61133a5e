//! Gabor-frame STFT and overlap-add inverse.
//!
//! Transforms are normalized by `1/sqrt(M)` in both directions, so with a
//! self-dual window the analysis operator is a Parseval frame and [`StftPlan::istft`]
//! realizes its adjoint. Only the `M/2 + 1` nonnegative-frequency bins of a
//! real signal's transform are stored; [`TfMatrix::get`] and
//! [`TfMatrix::to_full`] expose the full frequency-Hermitian matrix.
//!
//! Signals are laid out following the usual padding convention: `T - H` zeros
//! at the start and a zero tail so that `L = T + (N - 1) H`. Samples outside the
//! fully covered interior `[T - H, L - (T - H))` are treated as zero by the
//! analysis and are never written by the synthesis, which keeps
//! `istft(stft(x)) = x` exact on the whole signal domain.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

/// Largest relative imaginary residual tolerated before an inverse transform
/// drops the imaginary part.
pub const REALNESS_TOLERANCE: f64 = 1e-8;

/// Tolerance of the window duality condition.
pub const DUALITY_TOLERANCE: f64 = 1e-10;

/// A real-valued, finite sample vector with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl TimeSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.samples)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

impl AsRef<[f64]> for TimeSignal {
    fn as_ref(&self) -> &[f64] {
        &self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    SineBell,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    coefficients: Vec<f64>,
    kind: WindowKind,
}

impl Window {
    /// The sine bell `w(t) = sin(pi (t + 0.5) / T)`, self-dual at 50% overlap.
    pub fn sine_bell(len: usize) -> Result<Self> {
        if len < 2 || len % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "sine bell length must be even and at least 2, got {len}"
            )));
        }
        let t_len = len as f64;
        let coefficients = (0..len)
            .map(|t| (PI * (t as f64 + 0.5) / t_len).sin())
            .collect();
        Ok(Self {
            coefficients,
            kind: WindowKind::SineBell,
        })
    }

    pub fn custom(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidConfig("window must not be empty".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("window coefficients must be finite".into()));
        }
        Ok(Self {
            coefficients,
            kind: WindowKind::Custom,
        })
    }

    /// Rectangular window of ones.
    pub fn rectangular(len: usize) -> Result<Self> {
        Self::custom(vec![1.0; len])
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    /// Rescales the window so that it is self-dual at `hop`, i.e. the
    /// overlap-added `w^2` is one. Fails when that sum is not constant.
    pub fn normalized_for_hop(&self, hop: usize) -> Result<Self> {
        if hop == 0 || hop > self.len() {
            return Err(Error::InvalidConfig(format!(
                "hop must satisfy 1 <= H <= T = {}, got {hop}",
                self.len()
            )));
        }
        let w = &self.coefficients;
        let sums: Vec<f64> = (0..hop)
            .map(|l| (l..w.len()).step_by(hop).map(|t| w[t] * w[t]).sum())
            .collect();
        let mean = sums.iter().sum::<f64>() / hop as f64;
        if mean <= 0.0 || sums.iter().any(|s| (s - mean).abs() > DUALITY_TOLERANCE * mean) {
            return Err(Error::InvalidConfig(format!(
                "window of length {} has no constant overlap at hop {hop}",
                self.len()
            )));
        }
        let scale = mean.sqrt().recip();
        Ok(Self {
            coefficients: w.iter().map(|c| c * scale).collect(),
            kind: self.kind,
        })
    }
}

pub fn sine_bell_window(len: usize) -> Result<Window> {
    Window::sine_bell(len)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityCheck {
    pub dual: bool,
    pub max_deviation: f64,
}

/// Checks `sum_n w(l - nH) v(l - nH) = 1` away from the signal borders.
///
/// In the interior every sample is covered by the same set of window
/// offsets, so one hop period of the overlap-added product determines the
/// whole interior.
pub fn check_duality(analysis: &Window, synthesis: &Window, hop: usize) -> Result<DualityCheck> {
    if analysis.len() != synthesis.len() {
        return Err(Error::InvalidConfig(format!(
            "window lengths differ: {} vs {}",
            analysis.len(),
            synthesis.len()
        )));
    }
    if hop == 0 {
        return Err(Error::InvalidConfig("hop must be at least 1".into()));
    }
    let w = analysis.coefficients();
    let v = synthesis.coefficients();
    let max_deviation = (0..hop)
        .map(|l| {
            let sum: f64 = (l..w.len()).step_by(hop).map(|t| w[t] * v[t]).sum();
            (sum - 1.0).abs()
        })
        .fold(0.0, f64::max);
    Ok(DualityCheck {
        dual: max_deviation <= DUALITY_TOLERANCE,
        max_deviation,
    })
}

/// Complex `M x N` time-frequency matrix of a real signal, stored as its
/// `M/2 + 1` nonnegative-frequency rows, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix {
    fft_size: usize,
    num_frames: usize,
    data: Vec<Complex64>,
}

impl TfMatrix {
    pub fn zeros(fft_size: usize, num_frames: usize) -> Self {
        Self {
            fft_size,
            num_frames,
            data: vec![Complex64::new(0.0, 0.0); (fft_size / 2 + 1) * num_frames],
        }
    }

    /// Builds a matrix from its stored half (frame-major, `M/2 + 1` per frame).
    pub fn from_half(fft_size: usize, num_frames: usize, data: Vec<Complex64>) -> Result<Self> {
        if fft_size == 0 || num_frames == 0 {
            return Err(Error::InvalidInput("empty time-frequency matrix".into()));
        }
        if data.len() != (fft_size / 2 + 1) * num_frames {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                (fft_size / 2 + 1) * num_frames,
                data.len()
            )));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self {
            fft_size,
            num_frames,
            data,
        })
    }

    /// Builds a matrix from all `M` rows (frame-major, `M` per frame),
    /// verifying the frequency-Hermitian symmetry to `rel_tol`.
    pub fn from_full(
        fft_size: usize,
        num_frames: usize,
        full: &[Complex64],
        rel_tol: f64,
    ) -> Result<Self> {
        if full.len() != fft_size * num_frames {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                fft_size * num_frames,
                full.len()
            )));
        }
        let deviation = hermitian_deviation(fft_size, full);
        let scale = full.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if deviation > rel_tol * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NumericIntegrity(format!(
                "matrix is not frequency-Hermitian (deviation {deviation:e})"
            )));
        }
        let bins = fft_size / 2 + 1;
        let data = full
            .chunks(fft_size)
            .flat_map(|frame| frame[..bins].iter().copied())
            .collect();
        Self::from_half(fft_size, num_frames, data)
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// `(M, N)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.fft_size, self.num_frames)
    }

    /// Entry `(m, n)` of the full matrix, `m < M`.
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        assert!(m < self.fft_size && n < self.num_frames, "index out of range");
        let bins = self.num_bins();
        if m < bins {
            self.data[n * bins + m]
        } else {
            self.data[n * bins + (self.fft_size - m)].conj()
        }
    }

    /// All `M` rows, frame-major.
    pub fn to_full(&self) -> Vec<Complex64> {
        let mut full = Vec::with_capacity(self.fft_size * self.num_frames);
        for n in 0..self.num_frames {
            full.extend((0..self.fft_size).map(|m| self.get(m, n)));
        }
        full
    }

    pub fn frame(&self, n: usize) -> &[Complex64] {
        let bins = self.num_bins();
        &self.data[n * bins..(n + 1) * bins]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut [Complex64] {
        let bins = self.num_bins();
        &mut self.data[n * bins..(n + 1) * bins]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Number of full-matrix entries represented by stored bin `m`.
    pub fn bin_multiplicity(&self, m: usize) -> f64 {
        bin_multiplicity(self.fft_size, m)
    }

    /// Multiplicities of the stored entries, in storage order.
    pub fn multiplicities(&self) -> impl Iterator<Item = f64> + '_ {
        let bins = self.num_bins();
        (0..self.data.len()).map(move |k| bin_multiplicity(self.fft_size, k % bins))
    }

    /// Squared Frobenius norm of the full matrix.
    pub fn norm_sqr(&self) -> f64 {
        self.data
            .iter()
            .zip(self.multiplicities())
            .map(|(c, w)| w * c.norm_sqr())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Full-matrix inner product `sum conj(self) * other`.
    pub fn inner(&self, other: &TfMatrix) -> Complex64 {
        assert_eq!(self.dims(), other.dims(), "dimension mismatch");
        let bins = self.num_bins();
        self.data
            .iter()
            .zip(&other.data)
            .enumerate()
            .map(|(k, (a, b))| {
                let p = a.conj() * b;
                if bin_multiplicity(self.fft_size, k % bins) == 1.0 {
                    p
                } else {
                    Complex64::new(2.0 * p.re, 0.0)
                }
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.is_finite())
    }

}

fn bin_multiplicity(fft_size: usize, m: usize) -> f64 {
    if m == 0 || (fft_size % 2 == 0 && m == fft_size / 2) {
        1.0
    } else {
        2.0
    }
}

/// Largest `|X[m,n] - conj(X[(M - m) mod M, n])|` over a full frame-major matrix.
pub fn hermitian_deviation(fft_size: usize, full: &[Complex64]) -> f64 {
    full.chunks(fft_size)
        .flat_map(|frame| {
            (0..fft_size).map(move |m| (frame[m] - frame[(fft_size - m) % fft_size].conj()).norm())
        })
        .fold(0.0, f64::max)
}

/// Immutable STFT configuration with precomputed FFT plans.
#[derive(Clone)]
pub struct StftPlan {
    analysis: Window,
    synthesis: Window,
    hop: usize,
    fft_size: usize,
    num_frames: usize,
    padded_length: usize,
    content_len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftPlan")
            .field("window_len", &self.window_len())
            .field("window_kind", &self.analysis.kind())
            .field("hop", &self.hop)
            .field("fft_size", &self.fft_size)
            .field("num_frames", &self.num_frames)
            .field("padded_length", &self.padded_length)
            .field("content_len", &self.content_len)
            .finish()
    }
}

impl StftPlan {
    /// Plan with `num_frames` frames; the window is used for both analysis and
    /// synthesis.
    pub fn new(window: Window, hop: usize, fft_size: usize, num_frames: usize) -> Result<Self> {
        let t_len = window.len();
        if hop == 0 || hop > t_len {
            return Err(Error::InvalidConfig(format!(
                "hop must satisfy 1 <= H <= T = {t_len}, got {hop}"
            )));
        }
        if fft_size < t_len {
            return Err(Error::InvalidConfig(format!(
                "fft size {fft_size} is smaller than the window length {t_len}"
            )));
        }
        if num_frames == 0 {
            return Err(Error::InvalidConfig("at least one frame is required".into()));
        }
        let padded_length = t_len + (num_frames - 1) * hop;
        let content_len = ((num_frames + 1) * hop).saturating_sub(t_len);
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(fft_size);
        let inverse = planner.plan_fft_inverse(fft_size);
        Ok(Self {
            synthesis: window.clone(),
            analysis: window,
            hop,
            fft_size,
            num_frames,
            padded_length,
            content_len,
            forward,
            inverse,
        })
    }

    /// Smallest plan whose interior holds `content_len` samples.
    pub fn for_content(
        window: Window,
        hop: usize,
        fft_size: usize,
        content_len: usize,
    ) -> Result<Self> {
        if hop == 0 {
            return Err(Error::InvalidConfig("hop must be at least 1".into()));
        }
        let num_frames = ((content_len + window.len()).div_ceil(hop)).saturating_sub(1).max(1);
        let mut plan = Self::new(window, hop, fft_size, num_frames)?;
        plan.content_len = content_len;
        Ok(plan)
    }

    /// Sine-bell plan with `M = T` and the given hop, the window scaled to be
    /// self-dual (unchanged at 50% overlap).
    pub fn sine_bell(window_len: usize, hop: usize, content_len: usize) -> Result<Self> {
        let window = Window::sine_bell(window_len)?.normalized_for_hop(hop)?;
        Self::for_content(window, hop, window_len, content_len)
    }

    /// Replaces the synthesis window (defaults to the analysis window).
    pub fn with_synthesis_window(mut self, synthesis: Window) -> Result<Self> {
        if synthesis.len() != self.analysis.len() {
            return Err(Error::InvalidConfig(format!(
                "synthesis window length {} differs from analysis length {}",
                synthesis.len(),
                self.analysis.len()
            )));
        }
        self.synthesis = synthesis;
        Ok(self)
    }

    pub fn analysis_window(&self) -> &Window {
        &self.analysis
    }

    pub fn synthesis_window(&self) -> &Window {
        &self.synthesis
    }

    pub fn window_len(&self) -> usize {
        self.analysis.len()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn padded_length(&self) -> usize {
        self.padded_length
    }

    /// Number of samples of the unpadded signal.
    pub fn content_len(&self) -> usize {
        self.content_len
    }

    /// Offset of the first content sample in a padded signal (`T - H`).
    pub fn content_offset(&self) -> usize {
        self.window_len() - self.hop
    }

    /// Sample range covered by the full set of overlapping frames.
    pub fn interior(&self) -> Range<usize> {
        let border = self.content_offset();
        border..self.padded_length.saturating_sub(border).max(border)
    }

    /// Zero-pads `x` to the plan layout. Signals that already have the padded
    /// length are returned unchanged.
    pub fn pad(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() == self.padded_length {
            return Ok(x.to_vec());
        }
        let interior = self.interior();
        if x.len() > interior.len() {
            return Err(Error::InvalidInput(format!(
                "signal of {} samples does not fit the {} interior samples of the plan",
                x.len(),
                interior.len()
            )));
        }
        let mut padded = vec![0.0; self.padded_length];
        padded[interior.start..interior.start + x.len()].copy_from_slice(x);
        Ok(padded)
    }

    pub fn pad_signal(&self, x: &TimeSignal) -> Result<TimeSignal> {
        TimeSignal::new(self.pad(x.samples())?, x.sample_rate())
    }

    /// The `content_len` samples of a padded signal.
    pub fn unpad<'a>(&self, x: &'a [f64]) -> Result<&'a [f64]> {
        self.check_len(x.len())?;
        let start = self.content_offset();
        Ok(&x[start..start + self.content_len])
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.padded_length {
            return Err(Error::InvalidInput(format!(
                "signal length {len} does not match the plan's padded length {}",
                self.padded_length
            )));
        }
        Ok(())
    }

    fn check_dims(&self, c: &TfMatrix) -> Result<()> {
        if c.dims() != (self.fft_size, self.num_frames) {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{} but the plan is {}x{}",
                c.fft_size, c.num_frames, self.fft_size, self.num_frames
            )));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        (self.fft_size as f64).sqrt().recip()
    }

    /// Forward transform of a padded real signal.
    pub fn stft(&self, x: &[f64]) -> Result<TfMatrix> {
        self.check_len(x.len())?;
        let mut out = TfMatrix::zeros(self.fft_size, self.num_frames);
        let mut frame = self.forward.make_input_vec();
        let mut spectrum = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        let interior = self.interior();
        let window = self.analysis.coefficients();
        let scale = self.scale();
        for n in 0..self.num_frames {
            frame.fill(0.0);
            let start = n * self.hop;
            for (t, (slot, w)) in frame.iter_mut().zip(window).enumerate() {
                let idx = start + t;
                if interior.contains(&idx) {
                    *slot = x[idx] * w;
                }
            }
            self.forward
                .process_with_scratch(&mut frame, &mut spectrum, &mut scratch)
                .map_err(|e| Error::NumericIntegrity(e.to_string()))?;
            for (dst, src) in out.frame_mut(n).iter_mut().zip(&spectrum) {
                *dst = src * scale;
            }
        }
        Ok(out)
    }

    /// Overlap-add synthesis, real part retained.
    ///
    /// Fails with [`Error::NumericIntegrity`] when the discarded imaginary part
    /// exceeds [`REALNESS_TOLERANCE`] relative to the output.
    pub fn istft(&self, c: &TfMatrix) -> Result<Vec<f64>> {
        self.istft_with_residual(c).map(|(x, _)| x)
    }

    /// Like [`istft`](Self::istft), also returning the relative imaginary
    /// residual that was dropped.
    pub fn istft_with_residual(&self, c: &TfMatrix) -> Result<(Vec<f64>, f64)> {
        let (x, residual) = self.synthesize(c)?;
        if residual > REALNESS_TOLERANCE {
            return Err(Error::NumericIntegrity(format!(
                "imaginary residual {residual:e} exceeds {REALNESS_TOLERANCE:e}"
            )));
        }
        Ok((x, residual))
    }

    /// Synthesis without the realness check.
    ///
    /// The stored half defines a Hermitian matrix except for the imaginary
    /// parts of the DC and Nyquist rows; their contribution is the imaginary
    /// output, accumulated separately as the residual.
    pub fn synthesize(&self, c: &TfMatrix) -> Result<(Vec<f64>, f64)> {
        self.check_dims(c)?;
        let mut out = vec![0.0; self.padded_length];
        let mut imag = vec![0.0; self.padded_length];
        let mut spectrum = self.inverse.make_input_vec();
        let mut frame = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();
        let interior = self.interior();
        let window = self.synthesis.coefficients();
        let scale = self.scale();
        let nyquist = (self.fft_size % 2 == 0).then_some(self.fft_size / 2);
        for n in 0..self.num_frames {
            spectrum.copy_from_slice(c.frame(n));
            let dc_im = std::mem::take(&mut spectrum[0].im);
            let ny_im = nyquist.map_or(0.0, |k| std::mem::take(&mut spectrum[k].im));
            self.inverse
                .process_with_scratch(&mut spectrum, &mut frame, &mut scratch)
                .map_err(|e| Error::NumericIntegrity(e.to_string()))?;
            let start = n * self.hop;
            for (t, v) in window.iter().enumerate() {
                let idx = start + t;
                if !interior.contains(&idx) {
                    continue;
                }
                out[idx] += frame[t] * scale * v;
                if dc_im != 0.0 || ny_im != 0.0 {
                    let alt = if t % 2 == 0 { ny_im } else { -ny_im };
                    imag[idx] += (dc_im + alt) * scale * v;
                }
            }
        }
        let imag_norm = l2_norm(&imag);
        let residual = if imag_norm == 0.0 {
            0.0
        } else {
            imag_norm / l2_norm(&out)
        };
        Ok((out, residual))
    }
}

pub(crate) fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
