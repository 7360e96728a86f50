//! Functions sampled on a truncated uniform `(x, y)` grid (`N = k = 1`).
//!
//! Nodes are `x_i = −Lx + i·hx` with `hx = 2Lx/(nx−1)` (both ends included)
//! and `y_j = −Ly + j·hy` with `hy = 2Ly/ny` (periodic in `y`). Values are
//! stored row-major with `x` as the slow index: `values[i·ny + j]`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSpec", into = "RawGridSpec")]
pub struct GridSpec {
    x_half_width: f64,
    y_half_width: f64,
    nx: usize,
    ny: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGridSpec {
    x_half_width: f64,
    y_half_width: f64,
    nx: usize,
    ny: usize,
}

impl TryFrom<RawGridSpec> for GridSpec {
    type Error = Error;
    fn try_from(r: RawGridSpec) -> Result<Self> {
        GridSpec::new(r.x_half_width, r.y_half_width, r.nx, r.ny)
    }
}

impl From<GridSpec> for RawGridSpec {
    fn from(g: GridSpec) -> Self {
        RawGridSpec {
            x_half_width: g.x_half_width,
            y_half_width: g.y_half_width,
            nx: g.nx,
            ny: g.ny,
        }
    }
}

/// Smallest node count accepted along either axis.
pub const MIN_NODES: usize = 32;

impl GridSpec {
    pub fn new(x_half_width: f64, y_half_width: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x_half_width > 0.0) || !x_half_width.is_finite() {
            return Err(invalid("x_half_width", format!("{x_half_width} must be > 0")));
        }
        if !(y_half_width > 0.0) || !y_half_width.is_finite() {
            return Err(invalid("y_half_width", format!("{y_half_width} must be > 0")));
        }
        if nx < MIN_NODES {
            return Err(invalid("nx", format!("{nx} < {MIN_NODES}")));
        }
        if ny < MIN_NODES {
            return Err(invalid("ny", format!("{ny} < {MIN_NODES}")));
        }
        Ok(Self {
            x_half_width,
            y_half_width,
            nx,
            ny,
        })
    }

    pub fn x_half_width(&self) -> f64 {
        self.x_half_width
    }
    pub fn y_half_width(&self) -> f64 {
        self.y_half_width
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn hx(&self) -> f64 {
        2.0 * self.x_half_width / (self.nx - 1) as f64
    }
    pub fn hy(&self) -> f64 {
        2.0 * self.y_half_width / self.ny as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        -self.x_half_width + i as f64 * self.hx()
    }
    pub fn y(&self, j: usize) -> f64 {
        -self.y_half_width + j as f64 * self.hy()
    }
    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }
    /// Trapezoid weight of x-node `i`.
    pub fn x_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.hx()
        } else {
            self.hx()
        }
    }

    /// Same box with node counts scaled by `factor` (x keeps an odd count
    /// when it had one, so the origin stays a node).
    pub fn refined(&self, factor: f64) -> Result<Self> {
        let nx = (((self.nx - 1) as f64) * factor).round() as usize + 1;
        let ny = ((self.ny as f64) * factor).round() as usize;
        Self::new(self.x_half_width, self.y_half_width, nx, ny + ny % 2)
    }
}

/// Analytic initial profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `A·exp(−((x−cx)/wx)² − ((y−cy)/wy)²)`.
    Gaussian {
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
        widths: [f64; 2],
    },
    /// `A·exp(−((x−cx)/w)²)`, independent of `y`.
    ConstantInYGaussian {
        amplitude: f64,
        #[serde(default)]
        center_x: f64,
        width: f64,
    },
    /// `A·ρ^{−a}·χ(ρ/R)` with the homogeneous gauge `ρ = (x⁴ + y²)^{1/4}` and a
    /// smooth cutoff `χ` vanishing for `ρ ≥ R`. The node at the origin takes
    /// the average of its four neighbours.
    PowerSingular {
        amplitude: f64,
        exponent: f64,
        cutoff_radius: f64,
    },
    /// Smoothed indicator of the rectangle `|x−cx| ≤ a`, `|y−cy| ≤ b`, built
    /// from error functions of width `eps`.
    IndicatorMollified {
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
        half_widths: [f64; 2],
        eps: f64,
    },
    /// `A·exp(1 − 1/(1 − r²))` for `r < 1`, zero otherwise, with
    /// `r² = ((x−cx)/rx)² + ((y−cy)/ry)²`.
    Bump {
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
        radii: [f64; 2],
    },
    Constant {
        value: f64,
    },
}

fn smooth_cutoff(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else if s <= 0.0 {
        1.0
    } else {
        (-s * s / (1.0 - s * s)).exp()
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be > 0")))
    }
}

impl Profile {
    fn validate(&self) -> Result<()> {
        match self {
            Profile::Gaussian { widths, .. } => {
                positive("widths", widths[0])?;
                positive("widths", widths[1])
            }
            Profile::ConstantInYGaussian { width, .. } => positive("width", *width),
            Profile::PowerSingular {
                exponent,
                cutoff_radius,
                ..
            } => {
                positive("cutoff_radius", *cutoff_radius)?;
                if !(*exponent >= 0.0) || !exponent.is_finite() {
                    return Err(invalid("exponent", format!("{exponent} must be >= 0")));
                }
                Ok(())
            }
            Profile::IndicatorMollified { half_widths, eps, .. } => {
                positive("half_widths", half_widths[0])?;
                positive("half_widths", half_widths[1])?;
                positive("eps", *eps)
            }
            Profile::Bump { radii, .. } => {
                positive("radii", radii[0])?;
                positive("radii", radii[1])
            }
            Profile::Constant { .. } => Ok(()),
        }
    }

    /// Pointwise value; the power profile is singular at the origin.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Profile::Gaussian {
                amplitude,
                center,
                widths,
            } => {
                let u = (x - center[0]) / widths[0];
                let v = (y - center[1]) / widths[1];
                amplitude * (-u * u - v * v).exp()
            }
            Profile::ConstantInYGaussian {
                amplitude,
                center_x,
                width,
            } => {
                let u = (x - center_x) / width;
                amplitude * (-u * u).exp()
            }
            Profile::PowerSingular {
                amplitude,
                exponent,
                cutoff_radius,
            } => {
                let rho = (x.powi(4) + y * y).powf(0.25);
                amplitude * rho.powf(-exponent) * smooth_cutoff(rho / cutoff_radius)
            }
            Profile::IndicatorMollified {
                amplitude,
                center,
                half_widths,
                eps,
            } => {
                let side = |d: f64, a: f64| 0.5 * (libm::erf((a + d) / eps) + libm::erf((a - d) / eps));
                amplitude * side(x - center[0], half_widths[0]) * side(y - center[1], half_widths[1])
            }
            Profile::Bump {
                amplitude,
                center,
                radii,
            } => {
                let u = (x - center[0]) / radii[0];
                let v = (y - center[1]) / radii[1];
                let r2 = u * u + v * v;
                if r2 < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
            Profile::Constant { value } => value,
        }
    }

    /// Samples the profile on `spec`.
    pub fn sample(&self, spec: GridSpec) -> Result<GridFunction> {
        self.validate()?;
        let xs = spec.xs();
        let ys = spec.ys();
        let mut values = Vec::with_capacity(spec.len());
        for &x in &xs {
            for &y in &ys {
                values.push(self.eval(x, y));
            }
        }
        if matches!(self, Profile::PowerSingular { .. }) {
            let (hx, hy) = (spec.hx(), spec.hy());
            for (k, v) in values.iter_mut().enumerate() {
                if !v.is_finite() {
                    let (x, y) = (xs[k / spec.ny], ys[k % spec.ny]);
                    *v = 0.25
                        * (self.eval(x + hx, y)
                            + self.eval(x - hx, y)
                            + self.eval(x, y + hy)
                            + self.eval(x, y - hy));
                }
            }
        }
        GridFunction::new(spec, values)
    }
}

/// Samples `profile` on `spec`.
pub fn sample_function(spec: GridSpec, profile: &Profile) -> Result<GridFunction> {
    profile.sample(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::LengthMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "value at (i={}, j={}) is {}",
                k / spec.ny,
                k % spec.ny,
                values[k]
            )));
        }
        Ok(Self { spec, values })
    }

    /// Wraps values without the finiteness check.
    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::from_raw(spec, vec![0.0; spec.len()])
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::from_raw(
            self.spec,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| a * u + b * v)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(invalid("grid", "grid functions live on different grids"));
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid `∫ f(u) dx dy`.
    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let ny = self.spec.ny;
        let hy = self.spec.hy();
        self.values
            .chunks(ny)
            .enumerate()
            .map(|(i, row)| self.spec.x_weight(i) * hy * row.iter().map(|&v| f(v)).sum::<f64>())
            .sum()
    }

    pub fn integral(&self) -> f64 {
        self.integrate(|v| v)
    }

    /// Trapezoid `L^p` norm; `p = ∞` is the grid maximum of `|u|`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(invalid("p", format!("{p} must be >= 1")));
        }
        if p.is_infinite() {
            return Ok(self.sup_norm());
        }
        if p == 1.0 {
            return Ok(self.integrate(f64::abs));
        }
        let m = self.sup_norm();
        if m == 0.0 {
            return Ok(0.0);
        }
        // Scaled so large exponents do not overflow.
        Ok(m * self.integrate(|v| (v.abs() / m).powf(p)).powf(1.0 / p))
    }

    /// Largest `|u|` on the four edges divided by the interior maximum.
    pub fn boundary_ratio(&self) -> f64 {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut edge = 0.0f64;
        for i in 0..nx {
            edge = edge.max(self.get(i, 0).abs()).max(self.get(i, ny - 1).abs());
        }
        for j in 0..ny {
            edge = edge.max(self.get(0, j).abs()).max(self.get(nx - 1, j).abs());
        }
        let m = self.sup_norm();
        if m == 0.0 {
            0.0
        } else {
            edge / m
        }
    }

    /// Index `(i, j)` of the smallest value.
    pub fn argmin(&self) -> (usize, usize) {
        let k = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) })
            .0;
        (k / self.spec.ny, k % self.spec.ny)
    }

    /// Header `nx, ny` (u64) and `Lx, Ly` (f64), then the values, all
    /// little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.spec.nx as u64).to_le_bytes())?;
        w.write_all(&(self.spec.ny as u64).to_le_bytes())?;
        w.write_all(&self.spec.x_half_width.to_le_bytes())?;
        w.write_all(&self.spec.y_half_width.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)
                .map_err(|e| Error::Format(format!("truncated snapshot: {e}")))?;
            Ok(word)
        };
        let nx = u64::from_le_bytes(next(&mut r)?) as usize;
        let ny = u64::from_le_bytes(next(&mut r)?) as usize;
        let lx = f64::from_le_bytes(next(&mut r)?);
        let ly = f64::from_le_bytes(next(&mut r)?);
        let spec = GridSpec::new(lx, ly, nx, ny)?;
        let mut bytes = vec![0u8; 8 * spec.len()];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("truncated snapshot body: {e}")))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(spec, values)
    }

    /// `x,y,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for i in 0..self.spec.nx {
            for j in 0..self.spec.ny {
                writeln!(w, "{:e},{:e},{:e}", self.spec.x(i), self.spec.y(j), self.get(i, j))?;
            }
        }
        Ok(())
    }
}
