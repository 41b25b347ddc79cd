//! Estimators built from sampled Bloch vectors: magnetization, the spin
//! structure factor S^xx(k) and distance-resolved ⟨σ^x σ^x⟩ correlations.
//!
//! On the product manifold ⟨σ_j^x σ_l^x⟩ = s_j^x s_l^x for j ≠ l within one
//! sample; classical correlations between sites enter only through the
//! average over samples (time along a trajectory, or an ensemble).

mod accumulator;
mod meanfield;

pub use accumulator::{batch_means, Accumulator, ScalarStat};
pub use meanfield::{mf_structure_factor, mf_transition_point};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{ClassTable, DisplacementClass, LatticeGeometry};
use crate::state::BlochVector;

/// Number of batches used for batch-means error bars.
pub const DEFAULT_BATCHES: usize = 20;

/// Bloch vectors of every site at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub bloch: Vec<BlochVector>,
    pub burn_in: bool,
}

impl Sample {
    pub fn sx(&self) -> impl Iterator<Item = f64> + '_ {
        self.bloch.iter().map(|b| b.x)
    }
}

pub fn magnetization(sample: &Sample) -> BlochVector {
    let n = sample.bloch.len() as f64;
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for b in &sample.bloch {
        x += b.x;
        y += b.y;
        z += b.z;
    }
    BlochVector::new(x / n, y / n, z / n)
}

/// Wave vector in inverse lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaveVector {
    pub kx: f64,
    pub ky: f64,
}

impl WaveVector {
    pub const ZERO: WaveVector = WaveVector { kx: 0.0, ky: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureFactorEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub k: WaveVector,
    pub sample_count: usize,
}

/// `[|Σ_j e^{-i k·r_j} s_j|² - Σ_j s_j²] / (N(N-1))` for one set of x components.
pub fn instantaneous_structure_factor(
    sx: &[f64],
    geometry: &LatticeGeometry,
    k: WaveVector,
) -> f64 {
    let n = sx.len();
    let pairs = (n * n.saturating_sub(1)) as f64;
    let self_term: f64 = sx.iter().map(|s| s * s).sum();
    let amplitude = if k == WaveVector::ZERO {
        let total: f64 = sx.iter().sum();
        total * total
    } else {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &s) in sx.iter().enumerate() {
            let (x, y) = geometry.coords(j);
            let phase = -(k.kx * x as f64 + k.ky * y as f64);
            acc += Complex64::from_polar(s, phase);
        }
        acc.norm_sqr()
    };
    (amplitude - self_term) / pairs
}

/// Streaming S^xx(k) estimator; burn-in samples are skipped.
#[derive(Debug, Clone)]
pub struct StructureFactorAccumulator {
    geometry: LatticeGeometry,
    k: WaveVector,
    values: Vec<f64>,
    buf: Vec<f64>,
}

impl StructureFactorAccumulator {
    pub fn new(geometry: &LatticeGeometry, k: WaveVector) -> Result<Self> {
        if geometry.site_count() < 2 {
            return Err(Error::InvalidArgument(
                "the structure factor needs at least two sites".into(),
            ));
        }
        Ok(StructureFactorAccumulator {
            geometry: geometry.clone(),
            k,
            values: Vec::new(),
            buf: Vec::new(),
        })
    }

    /// Records a sample and returns its instantaneous value (also for burn-in samples).
    pub fn push(&mut self, sample: &Sample) -> f64 {
        self.buf.clear();
        self.buf.extend(sample.sx());
        let v = instantaneous_structure_factor(&self.buf, &self.geometry, self.k);
        if !sample.burn_in {
            self.values.push(v);
        }
        v
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn estimate(&self) -> Result<StructureFactorEstimate> {
        let (value, standard_error) = batch_means(&self.values, DEFAULT_BATCHES)?;
        Ok(StructureFactorEstimate {
            value,
            standard_error,
            k: self.k,
            sample_count: self.values.len(),
        })
    }
}

pub fn structure_factor<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    geometry: &LatticeGeometry,
    k: WaveVector,
) -> Result<StructureFactorEstimate> {
    let mut acc = StructureFactorAccumulator::new(geometry, k)?;
    for s in samples {
        acc.push(s);
    }
    acc.estimate()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassCorrelation {
    pub class: DisplacementClass,
    pub mean: f64,
    pub standard_error: f64,
}

/// ⟨σ_i^x σ_j^x⟩ per displacement class, plus unsymmetrized profiles along
/// the x axis (dy = 0) and the y axis (dx = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    pub classes: Vec<ClassCorrelation>,
    pub x_axis: Vec<ClassCorrelation>,
    pub y_axis: Vec<ClassCorrelation>,
    pub sample_count: usize,
}

/// Streaming correlation estimator. Per sample it forms the average of
/// `s_i s_{i+δ}` over sites for each periodic offset δ, then folds offsets
/// into classes.
#[derive(Debug, Clone)]
pub struct CorrelationAccumulator {
    table: ClassTable,
    width: usize,
    height: usize,
    /// Offsets `(ox, oy)` contributing to each class, axis-x and axis-y bin.
    class_offsets: Vec<Vec<(usize, usize)>>,
    x_offsets: Vec<Vec<usize>>,
    y_offsets: Vec<Vec<usize>>,
    class_series: Vec<Vec<f64>>,
    x_series: Vec<Vec<f64>>,
    y_series: Vec<Vec<f64>>,
    offset_buf: Vec<f64>,
    sx: Vec<f64>,
    samples: usize,
}

impl CorrelationAccumulator {
    pub fn new(geometry: &LatticeGeometry) -> Result<Self> {
        if geometry.site_count() < 2 {
            return Err(Error::InvalidArgument(
                "correlations need at least two sites".into(),
            ));
        }
        let table = ClassTable::new(geometry);
        let (w, h) = (geometry.width(), geometry.height());
        let mut class_offsets = vec![Vec::new(); table.classes().len()];
        for oy in 0..h {
            for ox in 0..w {
                if let Some(c) = table.class_of_offset(ox, oy) {
                    class_offsets[c].push((ox, oy));
                }
            }
        }
        // Axis bins by |d| = 1..=len/2, each collecting the offsets ±d.
        let axis = |len: usize| -> Vec<Vec<usize>> {
            (1..=len / 2)
                .map(|d| {
                    let mut v = vec![d];
                    if len - d != d {
                        v.push(len - d);
                    }
                    v
                })
                .collect()
        };
        let x_offsets = axis(w);
        let y_offsets = axis(h);
        Ok(CorrelationAccumulator {
            class_series: vec![Vec::new(); class_offsets.len()],
            x_series: vec![Vec::new(); x_offsets.len()],
            y_series: vec![Vec::new(); y_offsets.len()],
            table,
            width: w,
            height: h,
            class_offsets,
            x_offsets,
            y_offsets,
            offset_buf: vec![0.0; w * h],
            sx: Vec::new(),
            samples: 0,
        })
    }

    pub fn classes(&self) -> &[DisplacementClass] {
        self.table.classes()
    }

    /// Per-class means of `s_i^x s_j^x` over ordered pairs for one sample.
    pub fn sample_class_means(&mut self, sample: &Sample) -> Vec<f64> {
        self.fill_offsets(sample);
        let n = (self.width * self.height) as f64;
        self.class_offsets
            .iter()
            .zip(self.table.classes())
            .map(|(offs, cls)| {
                let total: f64 = offs.iter().map(|&(ox, oy)| self.offset_buf[oy * self.width + ox]).sum();
                total * n / cls.pair_count as f64
            })
            .collect()
    }

    fn fill_offsets(&mut self, sample: &Sample) {
        let (w, h) = (self.width, self.height);
        self.sx.clear();
        self.sx.extend(sample.sx());
        let n = w * h;
        for oy in 0..h {
            for ox in 0..w {
                let mut acc = 0.0;
                for y in 0..h {
                    let row = y * w;
                    let row2 = ((y + oy) % h) * w;
                    for x in 0..w {
                        acc += self.sx[row + x] * self.sx[row2 + (x + ox) % w];
                    }
                }
                self.offset_buf[oy * w + ox] = acc / n as f64;
            }
        }
    }

    pub fn push(&mut self, sample: &Sample) {
        if sample.burn_in {
            return;
        }
        let means = self.sample_class_means(sample);
        for (series, m) in self.class_series.iter_mut().zip(means) {
            series.push(m);
        }
        let w = self.width;
        for (series, offs) in self.x_series.iter_mut().zip(&self.x_offsets) {
            let m = offs.iter().map(|&ox| self.offset_buf[ox]).sum::<f64>() / offs.len() as f64;
            series.push(m);
        }
        for (series, offs) in self.y_series.iter_mut().zip(&self.y_offsets) {
            let m = offs.iter().map(|&oy| self.offset_buf[oy * w]).sum::<f64>() / offs.len() as f64;
            series.push(m);
        }
        self.samples += 1;
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    pub fn profile(&self) -> Result<CorrelationProfile> {
        let n = self.width * self.height;
        let classes = self
            .table
            .classes()
            .iter()
            .zip(&self.class_series)
            .map(|(cls, series)| {
                let (mean, se) = batch_means(series, DEFAULT_BATCHES)?;
                Ok(ClassCorrelation {
                    class: *cls,
                    mean,
                    standard_error: se,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let axis = |series: &[Vec<f64>], offs: &[Vec<usize>], along_x: bool| {
            series
                .iter()
                .zip(offs)
                .enumerate()
                .map(|(k, (s, o))| {
                    let d = (k + 1) as i64;
                    let (mean, se) = batch_means(s, DEFAULT_BATCHES)?;
                    Ok(ClassCorrelation {
                        class: DisplacementClass {
                            dx: if along_x { d } else { 0 },
                            dy: if along_x { 0 } else { d },
                            distance: d as f64,
                            pair_count: n * o.len(),
                            axis: true,
                        },
                        mean,
                        standard_error: se,
                    })
                })
                .collect::<Result<Vec<_>>>()
        };
        Ok(CorrelationProfile {
            classes,
            x_axis: axis(&self.x_series, &self.x_offsets, true)?,
            y_axis: axis(&self.y_series, &self.y_offsets, false)?,
            sample_count: self.samples,
        })
    }
}

pub fn correlation_profile<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    geometry: &LatticeGeometry,
) -> Result<CorrelationProfile> {
    let mut acc = CorrelationAccumulator::new(geometry)?;
    for s in samples {
        acc.push(s);
    }
    acc.profile()
}
