//! OFDM radar processing.
//!
//! A frame of `G` symbols by `H` subcarriers is turned into channel state
//! information by element-wise division, background-subtracted, and mapped to
//! a range-Doppler periodogram: a length-`G` forward DFT down every
//! subcarrier (Doppler), then a length-`H` inverse DFT along every symbol
//! (delay). The forward transform is unnormalized and the inverse is scaled by
//! `1/H`, so a unit-amplitude point target peaks at magnitude `G`.
//!
//! Map rows are Doppler bins, re-centred so that row `G/2` is zero Doppler;
//! columns are range bins. Positive Doppler velocity means the target is
//! approaching.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Complex `rows × cols` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexGrid {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(ComplexGrid { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for g in 0..rows {
            for h in 0..cols {
                data.push(f(g, h));
            }
        }
        ComplexGrid { rows, cols, data }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.cols + col] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    fn check_shape(&self, other: &ComplexGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }
}

/// Transmitted (`U`) and received (`V`) symbols of one radio frame.
#[derive(Debug, Clone)]
pub struct OfdmFrame {
    pub tx_symbols: ComplexGrid,
    pub rx_symbols: ComplexGrid,
}

/// `Z = V ⊘ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix(pub ComplexGrid);

impl CsiMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

/// OFDM numerology. The symbol duration is `1/Δf` (no cyclic prefix).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformConfig {
    pub center_frequency_fc: f64,
    pub bandwidth: f64,
    pub subcarrier_spacing_df: f64,
    /// Symbols per sensing frame (G).
    pub num_symbols_g: usize,
    /// Subcarriers per symbol (H); 0 means `⌊bandwidth / Δf⌋`.
    pub num_subcarriers_h: usize,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        WaveformConfig {
            center_frequency_fc: 27.4e9,
            bandwidth: 200e6,
            subcarrier_spacing_df: 120e3,
            num_symbols_g: 330,
            num_subcarriers_h: 0,
        }
    }
}

impl WaveformConfig {
    pub fn subcarriers(&self) -> usize {
        if self.num_subcarriers_h == 0 {
            (self.bandwidth / self.subcarrier_spacing_df + 1e-9).floor() as usize
        } else {
            self.num_subcarriers_h
        }
    }

    pub fn symbols(&self) -> usize {
        self.num_symbols_g
    }

    pub fn symbol_time(&self) -> f64 {
        1.0 / self.subcarrier_spacing_df
    }

    pub fn range_bin_width(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.subcarriers() as f64 * self.subcarrier_spacing_df)
    }

    pub fn doppler_bin_width(&self) -> f64 {
        SPEED_OF_LIGHT
            / (2.0 * self.center_frequency_fc * self.symbols() as f64 * self.symbol_time())
    }

    pub fn max_unambiguous_range(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.subcarrier_spacing_df)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("waveform: {m}")));
        if !(self.center_frequency_fc > 0.0
            && self.bandwidth > 0.0
            && self.subcarrier_spacing_df > 0.0)
        {
            return bad("frequencies must be positive");
        }
        if self.symbols() < 2 || self.subcarriers() < 2 {
            return bad("need at least 2 symbols and 2 subcarriers");
        }
        if self.subcarriers() as f64 * self.subcarrier_spacing_df > self.bandwidth * (1.0 + 1e-12) {
            return bad("subcarriers exceed the bandwidth");
        }
        Ok(())
    }
}

/// Magnitude periodogram, `G` Doppler rows by `H` range columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    rows: usize,
    cols: usize,
    pub magnitudes: Vec<f64>,
    pub range_bin_width: f64,
    pub doppler_bin_width: f64,
}

impl RangeDopplerMap {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row index of zero Doppler.
    pub fn zero_doppler_row(&self) -> usize {
        self.rows / 2
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.magnitudes[row * self.cols + col]
    }

    /// Magnitude at a signed Doppler bin and range bin.
    pub fn cell(&self, doppler_bin: i64, range_bin: usize) -> f64 {
        let row = (doppler_bin + self.zero_doppler_row() as i64).rem_euclid(self.rows as i64);
        self.at(row as usize, range_bin % self.cols)
    }

    /// `(doppler_bin, range_bin, magnitude)` of the largest cell.
    pub fn peak(&self) -> (i64, usize, f64) {
        let (i, &m) = self
            .magnitudes
            .iter()
            .enumerate()
            .fold((0, &f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        let row = i / self.cols;
        (
            row as i64 - self.zero_doppler_row() as i64,
            i % self.cols,
            m,
        )
    }

    pub fn median(&self) -> f64 {
        if self.magnitudes.is_empty() {
            return 0.0;
        }
        let mut v = self.magnitudes.clone();
        let mid = v.len() / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub range_bin: usize,
    pub doppler_bin: i64,
    pub magnitude: f64,
    /// Range with sub-bin refinement, within half a bin of the peak cell.
    pub r: f64,
    pub v_d: f64,
}

pub fn compute_csi(frame: &OfdmFrame) -> Result<CsiMatrix> {
    let (u, v) = (&frame.tx_symbols, &frame.rx_symbols);
    u.check_shape(v)?;
    let mut z = ComplexGrid::zeros(u.rows, u.cols);
    for (i, (num, den)) in v.data.iter().zip(&u.data).enumerate() {
        if den.re == 0.0 && den.im == 0.0 {
            return Err(Error::ZeroTransmitSymbol {
                row: i / u.cols,
                col: i % u.cols,
            });
        }
        z.data[i] = num / den;
    }
    Ok(CsiMatrix(z))
}

/// Cached FFT plans for one waveform shape.
pub struct RangeDoppler {
    waveform: WaveformConfig,
    doppler_fft: Arc<dyn Fft<f64>>,
    range_ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    rows: Vec<Complex64>,
    cols: Vec<Complex64>,
}

impl std::fmt::Debug for RangeDoppler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RangeDoppler")
            .field("waveform", &self.waveform)
            .finish_non_exhaustive()
    }
}

impl RangeDoppler {
    pub fn new(waveform: WaveformConfig) -> Self {
        let mut planner = FftPlanner::new();
        RangeDoppler {
            doppler_fft: planner.plan_fft_forward(waveform.symbols()),
            range_ifft: planner.plan_fft_inverse(waveform.subcarriers()),
            waveform,
            scratch: Vec::new(),
            rows: Vec::new(),
            cols: Vec::new(),
        }
    }

    pub fn waveform(&self) -> &WaveformConfig {
        &self.waveform
    }

    pub fn compute(&mut self, csi: &CsiMatrix) -> Result<RangeDopplerMap> {
        let (g, h) = (self.waveform.symbols(), self.waveform.subcarriers());
        let grid = &csi.0;
        if grid.shape() != (g, h) {
            return Err(Error::ShapeMismatch {
                expected: (g, h),
                actual: grid.shape(),
            });
        }

        self.scratch.resize(
            self.doppler_fft
                .get_inplace_scratch_len()
                .max(self.range_ifft.get_inplace_scratch_len()),
            Complex64::new(0.0, 0.0),
        );
        // Range transforms run along the contiguous symbol rows first; the
        // two axes commute.
        let (rows, cols) = (&mut self.rows, &mut self.cols);
        rows.clear();
        rows.extend_from_slice(&grid.data);
        self.range_ifft
            .process_with_scratch(rows, &mut self.scratch);

        // Subcarrier-major copy so each Doppler transform is contiguous.
        cols.resize(g * h, Complex64::new(0.0, 0.0));
        transpose(rows, cols, g, h);
        self.doppler_fft
            .process_with_scratch(cols, &mut self.scratch);
        transpose(cols, rows, h, g);
        // Centre the Doppler axis: row m moves to (m + g/2) mod g.
        rows.rotate_right((g / 2) * h);

        let scale = 1.0 / h as f64;
        Ok(RangeDopplerMap {
            rows: g,
            cols: h,
            magnitudes: rows.iter().map(|z| z.norm_sqr().sqrt() * scale).collect(),
            range_bin_width: self.waveform.range_bin_width(),
            doppler_bin_width: self.waveform.doppler_bin_width(),
        })
    }
}

/// Row-major `rows × cols` into row-major `cols × rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// One-shot periodogram; plans the transforms on every call.
pub fn range_doppler(csi: &CsiMatrix, waveform: &WaveformConfig) -> Result<RangeDopplerMap> {
    let (g, h) = csi.shape();
    let wf = WaveformConfig {
        num_symbols_g: g,
        num_subcarriers_h: h,
        ..*waveform
    };
    RangeDoppler::new(wf).compute(csi)
}

/// Exponential-moving-average background subtraction in the CSI domain.
///
/// Each frame is compared with the background accumulated from earlier
/// frames, then folded into it: `out = Z − B; B ← (1−α)·B + α·Z`. The
/// background starts at the first frame, and the first `bootstrap_frames`
/// frames pass through unmodified.
#[derive(Debug, Clone)]
pub struct ClutterFilter {
    alpha: f64,
    bootstrap_frames: usize,
    frames_seen: usize,
    background: Option<ComplexGrid>,
}

impl ClutterFilter {
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_BOOTSTRAP: usize = 5;

    pub fn new(alpha: f64, bootstrap_frames: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "clutter alpha {alpha} must lie in (0, 1]"
            )));
        }
        Ok(ClutterFilter {
            alpha,
            bootstrap_frames,
            frames_seen: 0,
            background: None,
        })
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    pub fn apply(&mut self, current: &CsiMatrix) -> Result<CsiMatrix> {
        let z = &current.0;
        self.frames_seen += 1;
        let Some(bg) = self.background.as_mut() else {
            self.background = Some(z.clone());
            return Ok(current.clone());
        };
        bg.check_shape(z)?;

        let a = self.alpha;
        let mut out = ComplexGrid::zeros(z.rows, z.cols);
        for ((o, b), &v) in out.data.iter_mut().zip(bg.data.iter_mut()).zip(&z.data) {
            *o = v - *b;
            *b = *b * (1.0 - a) + v * a;
        }
        if self.frames_seen <= self.bootstrap_frames {
            Ok(current.clone())
        } else {
            Ok(CsiMatrix(out))
        }
    }
}

/// Runs a fresh filter over `history` and returns the residual of `current`.
pub fn remove_clutter(
    history: &[CsiMatrix],
    current: &CsiMatrix,
    alpha: f64,
    bootstrap_frames: usize,
) -> Result<CsiMatrix> {
    let mut f = ClutterFilter::new(alpha, bootstrap_frames)?;
    for z in history {
        f.apply(z)?;
    }
    f.apply(current)
}

/// Local maxima above `threshold × noise floor`.
///
/// The noise floor is the map median, floored at `1e-9` of the map peak so
/// round-off ripple on a noiseless map is never reported. Neighbourhoods wrap
/// around both axes. Output is sorted by `(range_bin, doppler_bin)`.
pub fn detect(map: &RangeDopplerMap, threshold: f64) -> Vec<Detection> {
    let (rows, cols) = map.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let peak = map.magnitudes.iter().copied().fold(0.0f64, f64::max);
    let floor = map.median().max(peak * 1e-9);
    let level = threshold * floor;

    let shift = map.zero_doppler_row() as i64;
    let at = |r: usize, c: usize, dr: i64, dc: i64| {
        let rr = (r as i64 + dr).rem_euclid(rows as i64) as usize;
        let cc = (c as i64 + dc).rem_euclid(cols as i64) as usize;
        map.at(rr, cc)
    };

    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let m = map.at(r, c);
            if !(m > level) {
                continue;
            }
            let is_max = (-1..=1)
                .flat_map(|dr| (-1..=1).map(move |dc| (dr, dc)))
                .filter(|&(dr, dc)| {
                    (dr, dc) != (0, 0) && !(rows == 1 && dr != 0) && !(cols == 1 && dc != 0)
                })
                .all(|(dr, dc)| m > at(r, c, dr, dc));
            if !is_max {
                continue;
            }
            let dr_frac = refine(at(r, c, 0, -1), m, at(r, c, 0, 1));
            let dd_frac = refine(at(r, c, -1, 0), m, at(r, c, 1, 0));
            let doppler_bin = r as i64 - shift;
            out.push(Detection {
                range_bin: c,
                doppler_bin,
                magnitude: m,
                r: ((c as f64 + dr_frac) * map.range_bin_width).max(0.0),
                v_d: (doppler_bin as f64 + dd_frac) * map.doppler_bin_width,
            });
        }
    }
    out.sort_by_key(|a| (a.range_bin, a.doppler_bin));
    out
}

/// Fractional peak offset from the two-bin magnitude ratio of a
/// rectangular-window DFT; lies in `[-0.5, 0.5]`.
fn refine(left: f64, peak: f64, right: f64) -> f64 {
    if right >= left {
        if peak + right > 0.0 {
            right / (peak + right)
        } else {
            0.0
        }
    } else {
        -left / (peak + left)
    }
}

/// Stateful per-stream pipeline: CSI, clutter removal, periodogram, detection.
#[derive(Debug)]
pub struct RadarProcessor {
    periodogram: RangeDoppler,
    clutter: ClutterFilter,
    threshold: f64,
}

impl RadarProcessor {
    pub const DEFAULT_THRESHOLD: f64 = 12.0;

    pub fn new(waveform: WaveformConfig, clutter: ClutterFilter, threshold: f64) -> Result<Self> {
        waveform.validate()?;
        if !(threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "detection threshold {threshold} must be positive"
            )));
        }
        Ok(RadarProcessor {
            periodogram: RangeDoppler::new(waveform),
            clutter,
            threshold,
        })
    }

    pub fn with_defaults(waveform: WaveformConfig) -> Result<Self> {
        Self::new(
            waveform,
            ClutterFilter::new(
                ClutterFilter::DEFAULT_ALPHA,
                ClutterFilter::DEFAULT_BOOTSTRAP,
            )?,
            Self::DEFAULT_THRESHOLD,
        )
    }

    pub fn waveform(&self) -> &WaveformConfig {
        self.periodogram.waveform()
    }

    pub fn process_frame(&mut self, frame: &OfdmFrame) -> Result<Vec<Detection>> {
        let csi = compute_csi(frame)?;
        self.process_csi(&csi)
    }

    pub fn process_csi(&mut self, csi: &CsiMatrix) -> Result<Vec<Detection>> {
        let clean = self.clutter.apply(csi)?;
        let map = self.periodogram.compute(&clean)?;
        Ok(detect(&map, self.threshold))
    }
}

const CSI_MAGIC: &[u8; 4] = b"CSI1";

/// Serializes a CSI matrix: `"CSI1"`, `G` and `H` as little-endian `u32`,
/// four reserved zero bytes, then row-major `(re, im)` little-endian `f32`
/// pairs.
pub fn encode_csi(csi: &CsiMatrix) -> Vec<u8> {
    let (g, h) = csi.shape();
    let mut out = Vec::with_capacity(16 + 8 * g * h);
    out.extend_from_slice(CSI_MAGIC);
    out.extend_from_slice(&(g as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for z in csi.0.as_slice() {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_csi(bytes: &[u8], origin: &Path) -> Result<CsiMatrix> {
    if bytes.len() < 16 || &bytes[..4] != CSI_MAGIC {
        return Err(Error::format(origin, "missing CSI1 header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (g, h) = (word(4), word(8));
    let body = &bytes[16..];
    if body.len() != 8 * g * h {
        return Err(Error::format(
            origin,
            format!(
                "expected {} payload bytes for {g}x{h}, found {}",
                8 * g * h,
                body.len()
            ),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok(CsiMatrix(ComplexGrid::from_vec(g, h, data)?))
}

pub fn write_csi(path: &Path, csi: &CsiMatrix) -> Result<()> {
    write_atomic(path, &encode_csi(csi))
}

pub fn read_csi(path: &Path) -> Result<CsiMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_csi(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_wf(g: usize, h: usize) -> WaveformConfig {
        WaveformConfig {
            num_symbols_g: g,
            num_subcarriers_h: h,
            ..WaveformConfig::default()
        }
    }

    /// Tone landing on integer bins: `range_bin` cycles across subcarriers
    /// and `doppler_bin` cycles across symbols.
    fn tone(g: usize, h: usize, range_bin: f64, doppler_bin: f64, amp: f64) -> ComplexGrid {
        ComplexGrid::from_fn(g, h, |gi, hi| {
            let ph = -2.0 * PI * hi as f64 * range_bin / h as f64
                + 2.0 * PI * gi as f64 * doppler_bin / g as f64;
            Complex64::from_polar(amp, ph)
        })
    }

    #[test]
    fn csi_examples() {
        let u = ComplexGrid::from_fn(3, 4, |g, h| c(1.0 + g as f64, h as f64 - 0.5));
        let z = compute_csi(&OfdmFrame {
            tx_symbols: u.clone(),
            rx_symbols: u.clone(),
        })
        .unwrap();
        assert!(z
            .0
            .as_slice()
            .iter()
            .all(|v| (*v - c(1.0, 0.0)).norm() < 1e-15));

        let v = ComplexGrid::from_vec(
            2,
            2,
            vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 2.0)],
        )
        .unwrap();
        let ones = ComplexGrid::from_vec(2, 2, vec![c(1.0, 0.0); 4]).unwrap();
        let z = compute_csi(&OfdmFrame {
            tx_symbols: ones,
            rx_symbols: v.clone(),
        })
        .unwrap();
        assert_eq!(z.0, v);
    }

    #[test]
    fn csi_rejects_zero_tx() {
        let mut u = ComplexGrid::from_vec(2, 2, vec![c(1.0, 0.0); 4]).unwrap();
        u.set(1, 0, c(0.0, 0.0));
        let err = compute_csi(&OfdmFrame {
            rx_symbols: u.clone(),
            tx_symbols: u,
        })
        .unwrap_err();
        assert!(matches!(err, Error::ZeroTransmitSymbol { row: 1, col: 0 }));
    }

    #[test]
    fn csi_rejects_shape_mismatch() {
        let err = compute_csi(&OfdmFrame {
            tx_symbols: ComplexGrid::zeros(2, 2),
            rx_symbols: ComplexGrid::zeros(2, 3),
        })
        .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn pure_delay_tone_peaks_at_range_bin() {
        let (g, h) = (16, 64);
        let map = range_doppler(&CsiMatrix(tone(g, h, 4.0, 0.0, 1.0)), &small_wf(g, h)).unwrap();
        let (d, r, m) = map.peak();
        assert_eq!((d, r), (0, 4));
        assert!((m - g as f64).abs() < 1e-9);
        let rest: f64 = map.magnitudes.iter().sum::<f64>() - m;
        assert!(rest < 1e-9);
    }

    #[test]
    fn constant_csi_is_dc() {
        let (g, h) = (8, 8);
        let z = ComplexGrid::from_vec(g, h, vec![c(0.5, -0.5); g * h]).unwrap();
        let map = range_doppler(&CsiMatrix(z), &small_wf(g, h)).unwrap();
        let (d, r, _) = map.peak();
        assert_eq!((d, r), (0, 0));
    }

    #[test]
    fn doppler_sign_and_centering() {
        let (g, h) = (16, 32);
        for db in [-8i64, -3, 0, 5, 7] {
            let map = range_doppler(&CsiMatrix(tone(g, h, 2.0, db as f64, 1.0)), &small_wf(g, h))
                .unwrap();
            assert_eq!(map.peak().0, db);
        }
    }

    #[test]
    fn parseval_with_inverse_scaling() {
        // Unnormalized forward over G, 1/H inverse over H: Σ|map|² = (G/H)·Σ|Z|².
        let (g, h) = (6, 10);
        let z = ComplexGrid::from_fn(g, h, |a, b| {
            c((a * 7 + b * 3) as f64 % 5.0 - 2.0, (a + 2 * b) as f64 % 3.0)
        });
        let map = range_doppler(&CsiMatrix(z.clone()), &small_wf(g, h)).unwrap();
        let lhs: f64 = map.magnitudes.iter().map(|m| m * m).sum();
        let rhs = g as f64 / h as f64 * z.norm_sqr();
        assert!((lhs - rhs).abs() < 1e-9 * rhs);
    }

    #[test]
    fn bin_widths_from_defaults() {
        let wf = WaveformConfig::default();
        assert_eq!(wf.subcarriers(), 1666);
        assert!((wf.range_bin_width() - 0.75).abs() < 1e-3);
        assert!((wf.doppler_bin_width() - 1.9895).abs() < 1e-3);
        assert!(wf.validate().is_ok());
        assert!(small_wf(1, 8).validate().is_err());
    }

    #[test]
    fn clutter_static_scene_vanishes() {
        let z = CsiMatrix(tone(8, 16, 3.0, 0.0, 2.0));
        let mut f = ClutterFilter::new(0.1, 0).unwrap();
        let mut last = f.apply(&z).unwrap();
        for _ in 0..49 {
            last = f.apply(&z).unwrap();
        }
        assert!(last.0.norm_sqr().sqrt() < 1e-6 * z.0.norm_sqr().sqrt());
    }

    #[test]
    fn clutter_alpha_one_is_frame_difference() {
        let a = CsiMatrix(tone(4, 8, 1.0, 0.0, 1.0));
        let b = CsiMatrix(tone(4, 8, 2.0, 1.0, 1.0));
        let out = remove_clutter(std::slice::from_ref(&a), &b, 1.0, 0).unwrap();
        for ((o, x), y) in out
            .0
            .as_slice()
            .iter()
            .zip(b.0.as_slice())
            .zip(a.0.as_slice())
        {
            assert!((*o - (*x - *y)).norm() < 1e-15);
        }
    }

    #[test]
    fn clutter_bootstrap_passes_through() {
        let a = CsiMatrix(tone(4, 8, 1.0, 0.0, 1.0));
        let mut f = ClutterFilter::new(0.1, 5).unwrap();
        for _ in 0..5 {
            assert_eq!(f.apply(&a).unwrap(), a);
        }
        assert!(f.apply(&a).unwrap().0.norm_sqr() < 1e-24);
    }

    #[test]
    fn clutter_errors() {
        assert!(ClutterFilter::new(0.0, 0).is_err());
        assert!(ClutterFilter::new(1.5, 0).is_err());
        let mut f = ClutterFilter::new(0.5, 0).unwrap();
        f.apply(&CsiMatrix(ComplexGrid::zeros(2, 2))).unwrap();
        assert!(matches!(
            f.apply(&CsiMatrix(ComplexGrid::zeros(2, 3))),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn detect_single_tone() {
        let (g, h) = (16, 64);
        let map = range_doppler(&CsiMatrix(tone(g, h, 4.0, 2.0, 1.0)), &small_wf(g, h)).unwrap();
        let d = detect(&map, 12.0);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].range_bin, d[0].doppler_bin), (4, 2));
        assert!((d[0].r - 4.0 * map.range_bin_width).abs() < 1e-9);
        assert!((d[0].v_d - 2.0 * map.doppler_bin_width).abs() < 1e-9);
    }

    #[test]
    fn detect_zero_map() {
        let map = range_doppler(&CsiMatrix(ComplexGrid::zeros(8, 8)), &small_wf(8, 8)).unwrap();
        assert!(detect(&map, 12.0).is_empty());
    }

    #[test]
    fn detect_two_tones() {
        let (g, h) = (16, 64);
        let mut z = tone(g, h, 5.0, -3.0, 1.0);
        let other = tone(g, h, 30.0, 4.0, 1.0);
        for (a, b) in z.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *a += *b;
        }
        let map = range_doppler(&CsiMatrix(z), &small_wf(g, h)).unwrap();
        let d = detect(&map, 12.0);
        let cells: Vec<_> = d.iter().map(|d| (d.range_bin, d.doppler_bin)).collect();
        assert_eq!(cells, vec![(5, -3), (30, 4)]);
    }

    #[test]
    fn fractional_offset_is_refined() {
        let (g, h) = (16, 256);
        for frac in [0.1, 0.3, 0.45, -0.2] {
            let map = range_doppler(
                &CsiMatrix(tone(g, h, 40.0 + frac, 0.0, 1.0)),
                &small_wf(g, h),
            )
            .unwrap();
            let d = detect(&map, 12.0);
            let best = d
                .iter()
                .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
                .unwrap();
            let bins = best.r / map.range_bin_width;
            assert!((bins - (40.0 + frac)).abs() < 0.01, "frac {frac}: {bins}");
        }
    }

    #[test]
    fn csi_dump_round_trip() {
        let z = CsiMatrix(tone(3, 5, 1.0, 1.0, 0.75));
        let bytes = encode_csi(&z);
        assert_eq!(&bytes[..4], b"CSI1");
        assert_eq!(bytes.len(), 16 + 8 * 15);
        let back = decode_csi(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.shape(), (3, 5));
        for (a, b) in back.0.as_slice().iter().zip(z.0.as_slice()) {
            assert!((*a - *b).norm() < 1e-6);
        }
        assert!(decode_csi(&bytes[..20], Path::new("mem")).is_err());
        assert!(decode_csi(b"CSI0aaaaaaaaaaaa", Path::new("mem")).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn periodogram_is_linear(scale_re in -3.0f64..3.0, scale_im in -3.0f64..3.0, seed in 0u64..1000) {
            let (g, h) = (8, 12);
            let z = ComplexGrid::from_fn(g, h, |a, b| {
                let k = (seed as usize + a * 31 + b * 17) as f64;
                c((k * 0.37).sin(), (k * 0.91).cos())
            });
            let s = c(scale_re, scale_im);
            let mut scaled = z.clone();
            scaled.as_mut_slice().iter_mut().for_each(|v| *v *= s);
            let wf = small_wf(g, h);
            let m1 = range_doppler(&CsiMatrix(z), &wf).unwrap();
            let m2 = range_doppler(&CsiMatrix(scaled), &wf).unwrap();
            for (a, b) in m1.magnitudes.iter().zip(&m2.magnitudes) {
                prop_assert!((a * s.norm() - b).abs() < 1e-9 * (1.0 + b));
            }
        }

        #[test]
        fn range_shift_moves_peak(k in 0usize..32, base in 0usize..32) {
            let (g, h) = (4, 32);
            let z = tone(g, h, base as f64, 0.0, 1.0);
            let mut shifted = z.clone();
            for gi in 0..g {
                for hi in 0..h {
                    let ph = -2.0 * PI * hi as f64 * k as f64 / h as f64;
                    shifted.set(gi, hi, z.get(gi, hi) * Complex64::from_polar(1.0, ph));
                }
            }
            let wf = small_wf(g, h);
            let p0 = range_doppler(&CsiMatrix(z), &wf).unwrap().peak();
            let p1 = range_doppler(&CsiMatrix(shifted), &wf).unwrap().peak();
            prop_assert_eq!(p1.1, (p0.1 + k) % h);
        }

        #[test]
        fn detections_sorted(bins in prop::collection::vec((0usize..64, -6i64..6), 1..5)) {
            let (g, h) = (16, 64);
            let mut z = ComplexGrid::zeros(g, h);
            for &(r, d) in &bins {
                let t = tone(g, h, r as f64, d as f64, 1.0);
                z.as_mut_slice().iter_mut().zip(t.as_slice()).for_each(|(a, b)| *a += *b);
            }
            let map = range_doppler(&CsiMatrix(z), &small_wf(g, h)).unwrap();
            let det = detect(&map, 12.0);
            let keys: Vec<_> = det.iter().map(|d| (d.range_bin, d.doppler_bin)).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            prop_assert_eq!(keys, sorted);
        }
    }
}
