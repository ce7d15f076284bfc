//! Angular shape functions.
//!
//! A shape maps a direction angle to a positive length: the full chord of a
//! centrally symmetric convex region through its center (a FOV diameter), or a
//! k-space projection extent. Every shape kind is a [`ShapeKernel`] trait
//! object looked up by name in a [`ShapeRegistry`]; [`ShapeFn`] wraps a kernel
//! with the scale/rotation/mirror transforms needed for dual shapes and for
//! polar (deflection-from-z) parameterizations.
//!
//! Lengths are in pixels (1 px is the nominal resolution) and k-space extents
//! in cycles/px, so a nominal 1 px resolution corresponds to kmax = 0.5.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of angles used by the default dense scans for extrema.
const SCAN_ANGLES: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Pi,
    TwoPi,
}

impl Period {
    pub fn radians(self) -> f64 {
        match self {
            Period::Pi => PI,
            Period::TwoPi => TAU,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Px,
    Mm,
    Cm,
}

impl LengthUnit {
    /// Pixels per unit length at resolution `res_mm` (mm per pixel).
    fn px_per_unit(self, res_mm: Option<f64>) -> Result<f64> {
        let res = || {
            res_mm
                .filter(|r| r.is_finite() && *r > 0.0)
                .ok_or_else(|| Error::InvalidShape("physical units require a positive `res`".into()))
        };
        Ok(match self {
            LengthUnit::Px => 1.0,
            LengthUnit::Mm => 1.0 / res()?,
            LengthUnit::Cm => 10.0 / res()?,
        })
    }
}

/// Serializable description of a shape, as used by the CLI and JSON files.
///
/// `{"kind":"ellipse","wx":250,"wy":75}` describes a 250 x 75 px ellipse. A
/// `unit` of `mm` or `cm` together with `res` (mm per pixel) converts the
/// lengths to pixels. `scale`, `offset` and `mirror` record the transform
/// applied on top of the base kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lobes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Period>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<LengthUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror: Option<bool>,
}

impl ShapeSpec {
    pub fn widths(kind: &str, wx: f64, wy: f64) -> Self {
        ShapeSpec { kind: kind.into(), wx: Some(wx), wy: Some(wy), ..Default::default() }
    }

    /// Parses the compact CLI form `kind:p1,p2,...`, e.g. `ellipse:250,75`.
    pub fn parse(text: &str) -> Result<Self> {
        ShapeRegistry::global().parse(text)
    }

    /// Attaches a physical unit; lengths are divided by `res_mm` when built.
    pub fn with_unit(mut self, unit: LengthUnit, res_mm: f64) -> Self {
        self.unit = Some(unit);
        self.res = Some(res_mm);
        self
    }

    fn length(&self, field: &'static str, value: Option<f64>) -> Result<f64> {
        let v = value.ok_or_else(|| {
            Error::InvalidShape(format!("`{}` shape is missing `{field}`", self.kind))
        })?;
        let px = v * self.unit.unwrap_or(LengthUnit::Px).px_per_unit(self.res)?;
        if !(px.is_finite() && px > 0.0) {
            return Err(Error::InvalidShape(format!("`{field}` must be positive and finite, got {v}")));
        }
        Ok(px)
    }
}

/// One shape family: evaluates the raw chord function on an angle already
/// reduced to `[0, period)`.
pub trait ShapeKernel: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;

    fn chord(&self, phi: f64) -> f64;

    fn period(&self) -> Period {
        Period::Pi
    }

    /// Canonical `ShapeSpec` in pixel units.
    fn spec(&self) -> ShapeSpec;

    fn max_chord(&self) -> f64 {
        scan(self, f64::max, f64::NEG_INFINITY)
    }

    fn min_chord(&self) -> f64 {
        scan(self, f64::min, f64::INFINITY)
    }
}

fn scan<K: ShapeKernel + ?Sized>(kernel: &K, pick: fn(f64, f64) -> f64, init: f64) -> f64 {
    let period = kernel.period().radians();
    (0..SCAN_ANGLES)
        .map(|i| kernel.chord(period * i as f64 / SCAN_ANGLES as f64))
        .fold(init, pick)
}

#[derive(Debug, Clone)]
pub struct Ellipse {
    pub wx: f64,
    pub wy: f64,
}

impl ShapeKernel for Ellipse {
    fn kind(&self) -> &'static str {
        if self.wx == self.wy {
            "circle"
        } else {
            "ellipse"
        }
    }

    fn chord(&self, phi: f64) -> f64 {
        if self.wx == self.wy {
            return self.wx;
        }
        let (s, c) = phi.sin_cos();
        self.wx * self.wy / (self.wy * self.wy * c * c + self.wx * self.wx * s * s).sqrt()
    }

    fn spec(&self) -> ShapeSpec {
        if self.wx == self.wy {
            ShapeSpec { kind: "circle".into(), wx: Some(self.wx), ..Default::default() }
        } else {
            ShapeSpec::widths("ellipse", self.wx, self.wy)
        }
    }

    fn max_chord(&self) -> f64 {
        self.wx.max(self.wy)
    }

    fn min_chord(&self) -> f64 {
        self.wx.min(self.wy)
    }
}

#[derive(Debug, Clone)]
pub struct Rectangle {
    pub wx: f64,
    pub wy: f64,
}

impl ShapeKernel for Rectangle {
    fn kind(&self) -> &'static str {
        "rect"
    }

    fn chord(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        (self.wx / c.abs()).min(self.wy / s.abs())
    }

    fn spec(&self) -> ShapeSpec {
        ShapeSpec::widths("rect", self.wx, self.wy)
    }

    fn max_chord(&self) -> f64 {
        self.wx.hypot(self.wy)
    }

    fn min_chord(&self) -> f64 {
        self.wx.min(self.wy)
    }
}

#[derive(Debug, Clone)]
pub struct Diamond {
    pub wx: f64,
    pub wy: f64,
}

impl ShapeKernel for Diamond {
    fn kind(&self) -> &'static str {
        "diamond"
    }

    fn chord(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        1.0 / (c.abs() / self.wx + s.abs() / self.wy)
    }

    fn spec(&self) -> ShapeSpec {
        ShapeSpec::widths("diamond", self.wx, self.wy)
    }

    fn max_chord(&self) -> f64 {
        self.wx.max(self.wy)
    }

    fn min_chord(&self) -> f64 {
        self.wx * self.wy / self.wx.hypot(self.wy)
    }
}

/// Rectangle of length `wx - wy` capped by semicircles of diameter `wy`.
#[derive(Debug, Clone)]
pub struct Stadium {
    pub wx: f64,
    pub wy: f64,
}

impl ShapeKernel for Stadium {
    fn kind(&self) -> &'static str {
        "stadium"
    }

    fn chord(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let (s, c) = (s.abs(), c.abs());
        let straight = self.wx - self.wy;
        if self.wy * c <= straight * s {
            // exits through a flat side
            self.wy / s
        } else {
            straight * c + (self.wy * self.wy - straight * straight * s * s).max(0.0).sqrt()
        }
    }

    fn spec(&self) -> ShapeSpec {
        ShapeSpec::widths("stadium", self.wx, self.wy)
    }

    fn max_chord(&self) -> f64 {
        self.wx
    }

    fn min_chord(&self) -> f64 {
        self.wy
    }
}

/// `min + (max - min) * |cos(lobes * phi / 2)|`; four lobes gives the
/// `|cos 2phi|` star.
#[derive(Debug, Clone)]
pub struct Star {
    pub min: f64,
    pub max: f64,
    pub lobes: u32,
}

impl ShapeKernel for Star {
    fn kind(&self) -> &'static str {
        "star"
    }

    fn chord(&self, phi: f64) -> f64 {
        self.min + (self.max - self.min) * (0.5 * self.lobes as f64 * phi).cos().abs()
    }

    fn spec(&self) -> ShapeSpec {
        ShapeSpec {
            kind: "star".into(),
            min: Some(self.min),
            max: Some(self.max),
            lobes: Some(self.lobes),
            ..Default::default()
        }
    }

    fn max_chord(&self) -> f64 {
        self.max
    }

    fn min_chord(&self) -> f64 {
        self.min
    }
}

/// Values on a uniform angular grid over one period, linearly interpolated.
/// With a 2pi period the result is symmetrized as `(f(phi) + f(phi + pi)) / 2`.
#[derive(Debug, Clone)]
pub struct Tabulated {
    pub values: Vec<f64>,
    pub period: Period,
}

impl Tabulated {
    fn raw(&self, phi: f64) -> f64 {
        let n = self.values.len();
        let pos = phi.rem_euclid(self.period.radians()) / self.period.radians() * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let frac = pos - i as f64;
        let a = self.values[i];
        let b = self.values[(i + 1) % n];
        a + (b - a) * frac
    }
}

impl Tabulated {
    /// The symmetrized interpolant is piecewise linear with breakpoints at
    /// the nodes and at the nodes shifted by pi, so its extrema lie there.
    fn node_values(&self) -> impl Iterator<Item = f64> + '_ {
        let step = self.period.radians() / self.values.len() as f64;
        (0..self.values.len())
            .flat_map(move |i| [i as f64 * step, i as f64 * step + PI])
            .map(move |phi| self.chord(phi.rem_euclid(self.period.radians())))
    }
}

impl ShapeKernel for Tabulated {
    fn kind(&self) -> &'static str {
        "tabulated"
    }

    fn chord(&self, phi: f64) -> f64 {
        match self.period {
            Period::Pi => self.raw(phi),
            Period::TwoPi => 0.5 * (self.raw(phi) + self.raw(phi + PI)),
        }
    }

    fn period(&self) -> Period {
        self.period
    }

    fn max_chord(&self) -> f64 {
        self.node_values().fold(f64::NEG_INFINITY, f64::max)
    }

    fn min_chord(&self) -> f64 {
        self.node_values().fold(f64::INFINITY, f64::min)
    }

    fn spec(&self) -> ShapeSpec {
        ShapeSpec {
            kind: "tabulated".into(),
            values: Some(self.values.clone()),
            period: Some(self.period),
            ..Default::default()
        }
    }
}

/// A shape kernel plus an affine angle map and a positive scale:
/// `f(phi) = scale * kernel(sign * phi + offset)` with `sign = -1` if mirrored.
#[derive(Clone)]
pub struct ShapeFn {
    kernel: Arc<dyn ShapeKernel>,
    scale: f64,
    offset: f64,
    mirror: bool,
}

impl fmt::Debug for ShapeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShapeFn")
            .field("kernel", &self.kernel)
            .field("scale", &self.scale)
            .field("offset", &self.offset)
            .field("mirror", &self.mirror)
            .finish()
    }
}

impl ShapeFn {
    pub fn new(kernel: Arc<dyn ShapeKernel>) -> Self {
        ShapeFn { kernel, scale: 1.0, offset: 0.0, mirror: false }
    }

    pub fn from_spec(spec: &ShapeSpec) -> Result<Self> {
        ShapeRegistry::global().build(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_spec(&ShapeSpec::parse(text)?)
    }

    /// Isotropic shape of the given value, e.g. a constant kmax.
    pub fn constant(value: f64) -> Self {
        Self::new(Arc::new(Ellipse { wx: value, wy: value }))
    }

    pub fn circle(d: f64) -> Self {
        Self::constant(d)
    }

    pub fn ellipse(wx: f64, wy: f64) -> Self {
        Self::new(Arc::new(Ellipse { wx, wy }))
    }

    pub fn rect(wx: f64, wy: f64) -> Self {
        Self::new(Arc::new(Rectangle { wx, wy }))
    }

    pub fn diamond(wx: f64, wy: f64) -> Self {
        Self::new(Arc::new(Diamond { wx, wy }))
    }

    pub fn stadium(wx: f64, wy: f64) -> Result<Self> {
        ShapeFn::from_spec(&ShapeSpec::widths("stadium", wx, wy))
    }

    pub fn star(min: f64, max: f64) -> Self {
        Self::new(Arc::new(Star { min, max, lobes: 4 }))
    }

    pub fn kind(&self) -> &'static str {
        self.kernel.kind()
    }

    pub fn period(&self) -> Period {
        self.kernel.period()
    }

    /// Evaluates the shape at `phi` (radians); the angle is reduced modulo
    /// the kernel period.
    pub fn eval(&self, phi: f64) -> f64 {
        let a = if self.mirror { -phi } else { phi } + self.offset;
        self.scale * self.kernel.chord(a.rem_euclid(self.kernel.period().radians()))
    }

    pub fn max_value(&self) -> f64 {
        self.scale * self.kernel.max_chord()
    }

    pub fn min_value(&self) -> f64 {
        self.scale * self.kernel.min_chord()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ShapeFn { scale: self.scale * factor, ..self.clone() }
    }

    /// `g(phi) = f(phi + delta)`.
    pub fn rotated(&self, delta: f64) -> Self {
        let sign = if self.mirror { -1.0 } else { 1.0 };
        ShapeFn { offset: self.offset + sign * delta, ..self.clone() }
    }

    /// Reparameterizes a shape drawn in the (rho, z) half-plane, with its
    /// first width along rho and second along z, by the deflection angle
    /// from +z: `g(theta) = f(pi/2 - theta)`.
    pub fn polar(&self) -> Self {
        let sign = if self.mirror { -1.0 } else { 1.0 };
        ShapeFn { offset: self.offset + sign * FRAC_PI_2, mirror: !self.mirror, ..self.clone() }
    }

    /// Dual k-space extent: `k(phi) = c * f(phi + pi/2)` with `c` chosen so
    /// that the maximum of `k` equals `nominal_kmax`.
    pub fn dual(&self, nominal_kmax: f64) -> Self {
        let c = nominal_kmax / self.max_value();
        self.rotated(FRAC_PI_2).scaled(c)
    }

    pub fn spec(&self) -> ShapeSpec {
        let mut spec = self.kernel.spec();
        if self.scale != 1.0 {
            spec.scale = Some(self.scale);
        }
        if self.offset != 0.0 {
            spec.offset = Some(self.offset);
        }
        if self.mirror {
            spec.mirror = Some(true);
        }
        spec
    }
}

/// Evaluates a shape at `phi`.
pub fn eval_shape(shape: &ShapeFn, phi: f64) -> f64 {
    shape.eval(phi)
}

/// Dual of a FOV shape, normalized so its maximum is `nominal_kmax`.
pub fn dual_shape(fov: &ShapeFn, nominal_kmax: f64) -> ShapeFn {
    fov.dual(nominal_kmax)
}

/// Largest radial sample spacing that keeps the readout replicas outside
/// the FOV: `1 / max FOV(phi)`.
pub fn max_radial_spacing(fov: &ShapeFn) -> f64 {
    1.0 / fov.max_value()
}

type ParseFn = fn(&str, &[f64]) -> Result<ShapeSpec>;
type BuildFn = fn(&ShapeSpec) -> Result<Arc<dyn ShapeKernel>>;

#[derive(Clone, Copy)]
pub struct ShapeKindEntry {
    pub name: &'static str,
    pub parse: ParseFn,
    pub build: BuildFn,
}

/// Name -> shape kind lookup used when parsing shape strings.
pub struct ShapeRegistry {
    kinds: BTreeMap<&'static str, ShapeKindEntry>,
}

impl Default for ShapeRegistry {
    fn default() -> Self {
        let mut reg = ShapeRegistry { kinds: BTreeMap::new() };
        reg.register(&["circle"], parse_circle, build_circle);
        reg.register(&["ellipse"], parse_widths, build_ellipse);
        reg.register(&["rect", "rectangle"], parse_widths, build_rect);
        reg.register(&["diamond"], parse_widths, build_diamond);
        reg.register(&["stadium", "oval"], parse_widths, build_stadium);
        reg.register(&["star"], parse_star, build_star);
        reg.register(&["tabulated", "tab"], parse_tabulated, build_tabulated);
        reg
    }
}

impl ShapeRegistry {
    pub fn global() -> &'static ShapeRegistry {
        static GLOBAL: OnceLock<ShapeRegistry> = OnceLock::new();
        GLOBAL.get_or_init(ShapeRegistry::default)
    }

    pub fn register(&mut self, names: &[&'static str], parse: ParseFn, build: BuildFn) {
        for &name in names {
            self.kinds.insert(name, ShapeKindEntry { name: names[0], parse, build });
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.kinds.keys().copied()
    }

    fn entry(&self, kind: &str) -> Result<&ShapeKindEntry> {
        self.kinds.get(kind).ok_or_else(|| Error::UnknownShape(kind.into()))
    }

    pub fn parse(&self, text: &str) -> Result<ShapeSpec> {
        let (kind, params) = text.split_once(':').unwrap_or((text, ""));
        let kind = kind.trim().to_ascii_lowercase();
        let entry = self.entry(&kind)?;
        let params = params
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::InvalidShape(format!("bad number `{p}` in `{text}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        (entry.parse)(entry.name, &params)
    }

    pub fn build(&self, spec: &ShapeSpec) -> Result<ShapeFn> {
        let entry = self.entry(&spec.kind.to_ascii_lowercase())?;
        let kernel = (entry.build)(spec)?;
        let mut shape = ShapeFn::new(kernel);
        if let Some(scale) = spec.scale {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::InvalidShape(format!("scale must be positive, got {scale}")));
            }
            shape.scale = scale;
        }
        shape.offset = spec.offset.unwrap_or(0.0);
        shape.mirror = spec.mirror.unwrap_or(false);
        Ok(shape)
    }
}

fn arity(kind: &str, params: &[f64], n: usize) -> Result<()> {
    if params.len() == n {
        Ok(())
    } else {
        Err(Error::InvalidShape(format!("`{kind}` takes {n} parameter(s), got {}", params.len())))
    }
}

fn parse_circle(kind: &str, p: &[f64]) -> Result<ShapeSpec> {
    arity(kind, p, 1)?;
    Ok(ShapeSpec { kind: kind.into(), wx: Some(p[0]), ..Default::default() })
}

fn parse_widths(kind: &str, p: &[f64]) -> Result<ShapeSpec> {
    arity(kind, p, 2)?;
    Ok(ShapeSpec::widths(kind, p[0], p[1]))
}

fn parse_star(kind: &str, p: &[f64]) -> Result<ShapeSpec> {
    if !(2..=3).contains(&p.len()) {
        return Err(Error::InvalidShape("`star` takes min,max[,lobes]".into()));
    }
    let lobes = p.get(2).map(|&l| l as u32);
    Ok(ShapeSpec { kind: kind.into(), min: Some(p[0]), max: Some(p[1]), lobes, ..Default::default() })
}

fn parse_tabulated(kind: &str, p: &[f64]) -> Result<ShapeSpec> {
    Ok(ShapeSpec { kind: kind.into(), values: Some(p.to_vec()), ..Default::default() })
}

fn build_circle(spec: &ShapeSpec) -> Result<Arc<dyn ShapeKernel>> {
    let d = spec.length("wx", spec.wx)?;
    if let Some(wy) = spec.wy {
        if spec.length("wy", Some(wy))? != d {
            return Err(Error::InvalidShape("circle widths must be equal".into()));
        }
    }
    Ok(Arc::new(Ellipse { wx: d, wy: d }))
}

fn build_ellipse(spec: &ShapeSpec) -> Result<Arc<dyn ShapeKernel>> {
    Ok(Arc::new(Ellipse { wx: spec.length("wx", spec.wx)?, wy: spec.length("wy", spec.wy)? }))
}

fn build_rect(spec: &ShapeSpec) -> Result<Arc<dyn ShapeKernel>> {
    Ok(Arc::new(Rectangle { wx: spec.length("wx", spec.wx)?, wy: spec.length("wy", spec.wy)? }))
}

fn build_diamond(spec: &ShapeSpec) -> Result<Arc<dyn ShapeKernel>> {
    Ok(Arc::new(Diamond { wx: spec.length("wx", spec.wx)?, wy: spec.length("wy", spec.wy)? }))
}

fn build_stadium(spec: &ShapeSpec) -> Result<Arc<dyn ShapeKernel>> {
    let wx = spec.length("wx", spec.wx)?;
    let wy = spec.length("wy", spec.wy)?;
    if wx < wy {
        return Err(Error::InvalidShape(format!("stadium needs wx >= wy, got {wx} < {wy}")));
    }
    Ok(Arc::new(Stadium { wx, wy }))
}

fn build_star(spec: &ShapeSpec) -> Result<Arc<dyn ShapeKernel>> {
    let min = spec.length("min", spec.min)?;
    let max = spec.length("max", spec.max)?;
    let lobes = spec.lobes.unwrap_or(4);
    if min > max {
        return Err(Error::InvalidShape(format!("star needs min <= max, got {min} > {max}")));
    }
    if lobes == 0 || !lobes.is_multiple_of(2) {
        return Err(Error::InvalidShape(format!("star lobe count must be even and positive, got {lobes}")));
    }
    Ok(Arc::new(Star { min, max, lobes }))
}

fn build_tabulated(spec: &ShapeSpec) -> Result<Arc<dyn ShapeKernel>> {
    let raw = spec
        .values
        .as_ref()
        .filter(|v| v.len() >= 2)
        .ok_or_else(|| Error::InvalidShape("tabulated shape needs at least two values".into()))?;
    let values = raw.iter().map(|&v| spec.length("values", Some(v))).collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(Tabulated { values, period: spec.period.unwrap_or(Period::TwoPi) }))
}
