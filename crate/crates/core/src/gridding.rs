//! Convolution gridding onto an oversampled Cartesian grid, with a direct
//! Fourier-sum oracle for small problems.
//!
//! Convention: `image(x) = sum_s value_s * exp(+2 pi i k_s . x)` with `k` in
//! cycles/px and `x` in px, the origin at index `floor(N/2)` on each axis.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SampledKSpace;

/// Complex raster, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridVolume {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl GridVolume {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        Ok(GridVolume { dims: dims.to_vec(), data: vec![Complex64::new(0.0, 0.0); dims.iter().product()] })
    }

    pub fn from_data(dims: &[usize], data: Vec<Complex64>) -> Result<Self> {
        validate_dims(dims)?;
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill a {:?} grid",
                data.len(),
                dims
            )));
        }
        Ok(GridVolume { dims: dims.to_vec(), data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Index of the origin along each axis.
    pub fn origin(&self) -> Vec<usize> {
        self.dims.iter().map(|n| n / 2).collect()
    }

    /// Value at a signed offset from the origin, `None` outside the frame.
    pub fn at(&self, offset: &[i64]) -> Option<Complex64> {
        self.linear_index(offset).map(|i| self.data[i])
    }

    fn linear_index(&self, offset: &[i64]) -> Option<usize> {
        let mut index = 0usize;
        let mut stride = 1usize;
        for (axis, &n) in self.dims.iter().enumerate() {
            let o = offset.get(axis).copied().unwrap_or(0);
            let i = o + (n / 2) as i64;
            if i < 0 || i >= n as i64 {
                return None;
            }
            index += i as usize * stride;
            stride *= n;
        }
        Some(index)
    }

    /// Signed offsets from the origin of the sample at linear index `i`.
    pub fn offset_of(&self, mut i: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        for (axis, &n) in self.dims.iter().enumerate() {
            out[axis] = (i % n) as i64 - (n / 2) as i64;
            i /= n;
        }
        out
    }

    pub fn center(&self) -> Complex64 {
        self.at(&[0, 0, 0]).unwrap_or_default()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Multilinear interpolation of `|value|` at a fractional offset from the
    /// origin; `None` when any neighbour falls outside the frame.
    pub fn abs_interp(&self, pos: &[f64]) -> Option<f64> {
        let rank = self.rank();
        let base: Vec<i64> = (0..rank).map(|a| pos[a].floor() as i64).collect();
        let frac: Vec<f64> = (0..rank).map(|a| pos[a] - base[a] as f64).collect();
        let mut acc = 0.0;
        for corner in 0..(1usize << rank) {
            let mut w = 1.0;
            let mut offset = [0i64; 3];
            for a in 0..rank {
                let bit = (corner >> a) & 1;
                offset[a] = base[a] + bit as i64;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            acc += w * self.at(&offset[..rank])?.norm();
        }
        Some(acc)
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Writes little-endian f32 values (magnitude-free real part, or
    /// interleaved re/im when `complex`) plus a JSON sidecar next to `path`.
    pub fn export(&self, path: &Path, complex: bool) -> Result<PathBuf> {
        let mut bytes = Vec::with_capacity(self.data.len() * if complex { 8 } else { 4 });
        for v in &self.data {
            bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
            if complex {
                bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
            }
        }
        fs::File::create(path)?.write_all(&bytes)?;
        let sidecar = GridSidecar {
            dims: self.dims.clone(),
            dtype: "float32".into(),
            complex,
            axis_units: vec!["px".into(); self.rank()],
            endianness: "little".into(),
            layout: "row-major, x fastest, origin at floor(N/2)".into(),
        };
        let side = sidecar_path(path);
        fs::write(&side, serde_json::to_vec_pretty(&sidecar)?)?;
        Ok(side)
    }

    /// Reads a grid written by [`GridVolume::export`].
    pub fn import(path: &Path) -> Result<Self> {
        let sidecar: GridSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
        if sidecar.dtype != "float32" || sidecar.endianness != "little" {
            return Err(Error::InvalidArgument(format!(
                "unsupported grid encoding {} / {}",
                sidecar.dtype, sidecar.endianness
            )));
        }
        let bytes = fs::read(path)?;
        let floats: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let data = if sidecar.complex {
            floats.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
        } else {
            floats.into_iter().map(|re| Complex64::new(re, 0.0)).collect()
        };
        GridVolume::from_data(&sidecar.dims, data)
    }
}

/// `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub dims: Vec<usize>,
    pub dtype: String,
    pub complex: bool,
    pub axis_units: Vec<String>,
    pub endianness: String,
    pub layout: String,
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if !(1..=3).contains(&dims.len()) || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("grid dims must be 1 to 3 positive sizes, got {dims:?}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GriddingConfig {
    pub oversampling: f64,
    /// Kernel support in oversampled grid cells.
    pub width: f64,
    pub deapodize: bool,
}

impl Default for GriddingConfig {
    fn default() -> Self {
        GriddingConfig { oversampling: 1.5, width: 6.0, deapodize: true }
    }
}

impl GriddingConfig {
    /// Kaiser-Bessel shape parameter `pi * sqrt((W/a)^2 (a - 1/2)^2 - 0.8)`.
    pub fn beta(&self) -> f64 {
        let a = self.oversampling;
        let w = self.width;
        PI * ((w / a).powi(2) * (a - 0.5).powi(2) - 0.8).sqrt()
    }

    /// Oversampled size for an axis of `n` pixels, rounded up to even.
    pub fn grid_size(&self, n: usize) -> usize {
        if n == 1 {
            return 1;
        }
        let g = (self.oversampling * n as f64 - 1e-9).ceil() as usize;
        g + g % 2
    }

    fn validate(&self) -> Result<()> {
        if !(1.25..=2.0).contains(&self.oversampling) {
            return Err(Error::InvalidArgument(format!(
                "oversampling must lie in [1.25, 2], got {}",
                self.oversampling
            )));
        }
        if !(self.width >= 2.0 && self.width <= 16.0) {
            return Err(Error::InvalidArgument(format!("kernel width must lie in [2, 16], got {}", self.width)));
        }
        if !self.beta().is_finite() {
            return Err(Error::InvalidArgument("kernel parameters give no valid shape".into()));
        }
        Ok(())
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kernel(d: f64, half: f64, beta: f64) -> f64 {
    let r = d / half;
    if r.abs() > 1.0 {
        0.0
    } else {
        bessel_i0(beta * (1.0 - r * r).sqrt())
    }
}

/// Continuous Fourier transform of the kernel at `nu` cycles per grid cell.
fn kernel_transform(nu: f64, width: f64, beta: f64) -> f64 {
    let z = beta * beta - (PI * width * nu).powi(2);
    if z > 0.0 {
        let s = z.sqrt();
        width * s.sinh() / s
    } else if z < 0.0 {
        let s = (-z).sqrt();
        width * s.sin() / s
    } else {
        width
    }
}

struct Axis {
    n: usize,
    g: usize,
}

const CHUNKS: usize = 8;

/// Grids `values` located at `points` (cycles/px) and returns the cropped
/// image. Weights such as the dcf must already be folded into `values`.
pub fn grid_reconstruct(
    points: &[[f64; 3]],
    values: &[Complex64],
    dims: &[usize],
    cfg: &GriddingConfig,
) -> Result<GridVolume> {
    validate_dims(dims)?;
    cfg.validate()?;
    if points.len() != values.len() {
        return Err(Error::InvalidArgument(format!("{} points but {} values", points.len(), values.len())));
    }
    let rank = dims.len();
    for p in points {
        let k = p[..rank].iter().map(|c| c * c).sum::<f64>().sqrt();
        if k.is_nan() || k > 0.5 + 1e-12 {
            return Err(Error::OutOfBand { k });
        }
    }

    let axes: Vec<Axis> = (0..3)
        .map(|a| {
            let n = dims.get(a).copied().unwrap_or(1);
            Axis { n, g: cfg.grid_size(n) }
        })
        .collect();
    let total: usize = axes.iter().map(|a| a.g).product();
    let beta = cfg.beta();
    let half = 0.5 * cfg.width;

    // Fixed chunking keeps the summation order independent of scheduling.
    let chunk_len = points.len().div_ceil(CHUNKS).max(1);
    let partials: Vec<Vec<Complex64>> = points
        .par_chunks(chunk_len)
        .zip(values.par_chunks(chunk_len))
        .map(|(pts, vals)| {
            let mut grid = vec![Complex64::new(0.0, 0.0); total];
            let mut taps: [Vec<(usize, f64)>; 3] = Default::default();
            for (p, v) in pts.iter().zip(vals) {
                for a in 0..3 {
                    taps[a].clear();
                    let ax = &axes[a];
                    if ax.g == 1 {
                        taps[a].push((0, 1.0));
                        continue;
                    }
                    let pos = p[a] * ax.g as f64;
                    let lo = (pos - half).ceil() as i64;
                    let hi = (pos + half).floor() as i64;
                    for m in lo..=hi {
                        let w = kernel(m as f64 - pos, half, beta);
                        if w != 0.0 {
                            taps[a].push((m.rem_euclid(ax.g as i64) as usize, w));
                        }
                    }
                }
                for &(iz, wz) in &taps[2] {
                    for &(iy, wy) in &taps[1] {
                        let row = (iz * axes[1].g + iy) * axes[0].g;
                        let wyz = wy * wz;
                        for &(ix, wx) in &taps[0] {
                            grid[row + ix] += v * (wx * wyz);
                        }
                    }
                }
            }
            grid
        })
        .collect();
    let mut grid = vec![Complex64::new(0.0, 0.0); total];
    for part in partials {
        for (g, p) in grid.iter_mut().zip(part) {
            *g += p;
        }
    }

    inverse_fft_3d(&mut grid, [axes[0].g, axes[1].g, axes[2].g]);

    let deapod: Vec<Vec<f64>> = axes
        .iter()
        .map(|ax| {
            (0..ax.n)
                .map(|o| {
                    if !cfg.deapodize || ax.g == 1 {
                        return 1.0;
                    }
                    let x = o as f64 - (ax.n / 2) as f64;
                    kernel_transform(x / ax.g as f64, cfg.width, beta)
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(dims.iter().product());
    for oz in 0..axes[2].n {
        let iz = wrap(oz, &axes[2]);
        for oy in 0..axes[1].n {
            let iy = wrap(oy, &axes[1]);
            let row = (iz * axes[1].g + iy) * axes[0].g;
            let dyz = deapod[1][oy] * deapod[2][oz];
            for (ox, dx) in deapod[0].iter().enumerate().take(axes[0].n) {
                let ix = wrap(ox, &axes[0]);
                out.push(grid[row + ix] / (dx * dyz));
            }
        }
    }
    GridVolume::from_data(dims, out)
}

fn wrap(o: usize, ax: &Axis) -> usize {
    (o as i64 - (ax.n / 2) as i64).rem_euclid(ax.g as i64) as usize
}

pub(crate) fn inverse_fft_3d(data: &mut [Complex64], g: [usize; 3]) {
    let mut planner = FftPlanner::<f64>::new();
    // x: contiguous rows
    if g[0] > 1 {
        let fft = planner.plan_fft_inverse(g[0]);
        data.par_chunks_mut(g[0]).for_each(|row| fft.process(row));
    }
    for axis in 1..3 {
        let n = g[axis];
        if n == 1 {
            continue;
        }
        let stride: usize = g[..axis].iter().product();
        let fft = planner.plan_fft_inverse(n);
        let block = stride * n;
        data.par_chunks_mut(block).for_each(|slab| {
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for offset in 0..stride {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = slab[offset + j * stride];
                }
                fft.process(&mut line);
                for (j, l) in line.iter().enumerate() {
                    slab[offset + j * stride] = *l;
                }
            }
        });
    }
}

/// Grids a sampled design with per-sample data (ones when `None`), applying
/// the stored density compensation.
pub fn grid_sampled(
    space: &SampledKSpace,
    data: Option<&[Complex64]>,
    dims: &[usize],
    cfg: &GriddingConfig,
) -> Result<GridVolume> {
    if let Some(d) = data {
        if d.len() != space.len() {
            return Err(Error::InvalidArgument(format!("{} data values for {} samples", d.len(), space.len())));
        }
    }
    let points: Vec<[f64; 3]> = space.samples.iter().map(|s| s.k).collect();
    let values: Vec<Complex64> = space
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| data.map_or(Complex64::new(1.0, 0.0), |d| d[i]) * s.dcf)
        .collect();
    grid_reconstruct(&points, &values, dims, cfg)
}

/// Point spread function of a sampled design: unit data, full dcf. `dims`
/// defaults to [`default_psf_dims`] of the widest FOV.
pub fn compute_psf(
    space: &SampledKSpace,
    max_fov: f64,
    dims: Option<&[usize]>,
    cfg: &GriddingConfig,
) -> Result<GridVolume> {
    let default = default_psf_dims(max_fov, space.dim.rank());
    grid_sampled(space, None, dims.unwrap_or(&default), cfg)
}

/// Next even size at or above `2.4 * max_fov` on every axis.
pub fn default_psf_dims(max_fov: f64, rank: usize) -> Vec<usize> {
    let n = (2.4 * max_fov - 1e-9).ceil() as usize;
    vec![n + n % 2; rank]
}

/// Direct evaluation of the Fourier sum on every pixel.
pub fn direct_dft(points: &[[f64; 3]], values: &[Complex64], dims: &[usize]) -> Result<GridVolume> {
    let mut vol = GridVolume::zeros(dims)?;
    let rank = dims.len();
    let offsets: Vec<[i64; 3]> = (0..vol.data.len()).map(|i| vol.offset_of(i)).collect();
    vol.data.par_iter_mut().zip(offsets).for_each(|(out, x)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, v) in points.iter().zip(values) {
            let phase: f64 = (0..rank).map(|a| p[a] * x[a] as f64).sum();
            acc += v * Complex64::from_polar(1.0, 2.0 * PI * phase);
        }
        *out = acc;
    });
    Ok(vol)
}
