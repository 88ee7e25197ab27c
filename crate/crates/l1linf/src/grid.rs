//! Sampled complex fields on uniform midpoint grids.
//!
//! A [`GridField`] carries complex samples at cell centers of a uniform
//! rectangular lattice over one of three domains: a planar rectangle, the
//! unit disk (masked rectangle [−1,1]²), or the fundamental domain of the
//! lattice ℤ + τℤ parametrized by the unit square. Quadrature is the
//! midpoint rule over masked-in nodes with a deterministic pairwise (tree)
//! reduction, so sums are bit-stable regardless of thread count or
//! traversal order.

use thiserror::Error;

use crate::C;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid has no masked-in nodes")]
    EmptyMask,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid domain parameters: {0}")]
    InvalidDomain(&'static str),
    #[error("malformed serialized grid: {0}")]
    Deserialize(&'static str),
}

/// The planar or torus domain a field is sampled over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// [x0, x1] × [y0, y1].
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// The unit disk, masked out of the bounding square [−1,1]².
    UnitDisk,
    /// The fundamental domain { s + tτ | s, t ∈ [0,1) } of ℤ + τℤ.
    TorusFundamental { tau: C },
}

impl Domain {
    fn validate(&self) -> Result<(), GridError> {
        match self {
            Domain::Rectangle { x0, x1, y0, y1 } => {
                if x1 <= x0 || y1 <= y0 {
                    return Err(GridError::InvalidDomain("rectangle extents must be increasing"));
                }
            }
            Domain::UnitDisk => {}
            Domain::TorusFundamental { tau } => {
                if tau.im <= 0.0 {
                    return Err(GridError::InvalidDomain("torus modulus needs Im τ > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Complex samples at the cell centers of a uniform grid, with a mask of
/// inside-domain flags. Row-major storage: index = j·nx + i.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    pub samples: Vec<C>,
    pub mask: Vec<bool>,
}

impl GridField {
    /// Samples `f` at every cell center; nodes outside the domain are
    /// masked out and their sample set to zero.
    pub fn from_fn(
        domain: Domain,
        nx: usize,
        ny: usize,
        f: impl Fn(C) -> C,
    ) -> Result<Self, GridError> {
        domain.validate()?;
        if nx == 0 || ny == 0 {
            return Err(GridError::InvalidDomain("node counts must be positive"));
        }
        let mut samples = Vec::with_capacity(nx * ny);
        let mut mask = Vec::with_capacity(nx * ny);
        let mut any = false;
        for j in 0..ny {
            for i in 0..nx {
                let z = cell_center(&domain, nx, ny, i, j);
                let inside = match domain {
                    Domain::UnitDisk => z.norm() < 1.0,
                    _ => true,
                };
                mask.push(inside);
                samples.push(if inside { f(z) } else { C::new(0.0, 0.0) });
                any |= inside;
            }
        }
        if !any {
            return Err(GridError::EmptyMask);
        }
        Ok(Self { domain, nx, ny, samples, mask })
    }

    /// Grid spacing in the parameter rectangle.
    pub fn spacing(&self) -> (f64, f64) {
        match self.domain {
            Domain::Rectangle { x0, x1, y0, y1 } => {
                ((x1 - x0) / self.nx as f64, (y1 - y0) / self.ny as f64)
            }
            Domain::UnitDisk => (2.0 / self.nx as f64, 2.0 / self.ny as f64),
            Domain::TorusFundamental { .. } => (1.0 / self.nx as f64, 1.0 / self.ny as f64),
        }
    }

    /// Area of one grid cell in the embedded domain.
    pub fn cell_area(&self) -> f64 {
        let (hx, hy) = self.spacing();
        match self.domain {
            Domain::TorusFundamental { tau } => tau.im * hx * hy,
            _ => hx * hy,
        }
    }

    /// Center of cell (i, j) in the embedded domain.
    pub fn center(&self, i: usize, j: usize) -> C {
        cell_center(&self.domain, self.nx, self.ny, i, j)
    }

    pub fn sample(&self, i: usize, j: usize) -> C {
        self.samples[j * self.nx + i]
    }

    pub fn masked_in(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.nx + i]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.domain == other.domain && self.nx == other.nx && self.ny == other.ny
    }

    /// Midpoint quadrature ∬ g(z, sample) dA over masked-in nodes, with a
    /// deterministic tree reduction.
    pub fn integrate(&self, g: impl Fn(C, C) -> C) -> Result<C, GridError> {
        let mut terms = Vec::with_capacity(self.samples.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.masked_in(i, j) {
                    terms.push(g(self.center(i, j), self.sample(i, j)));
                }
            }
        }
        if terms.is_empty() {
            return Err(GridError::EmptyMask);
        }
        Ok(tree_sum(&terms) * self.cell_area())
    }

    /// Componentwise map preserving grid layout and mask.
    pub fn map(&self, f: impl Fn(C, C) -> C) -> Self {
        let mut out = self.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let idx = j * self.nx + i;
                if out.mask[idx] {
                    out.samples[idx] = f(self.center(i, j), self.samples[idx]);
                }
            }
        }
        out
    }

    /// Max |sample| over masked-in nodes.
    pub fn sup_abs(&self) -> f64 {
        self.samples
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(s, _)| s.norm())
            .fold(0.0, f64::max)
    }

    /// Binary layout: tag u8, domain params (f64 LE), nx/ny u32 LE,
    /// row-major interleaved re/im f64 LE, packed mask bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self.domain {
            Domain::Rectangle { x0, x1, y0, y1 } => {
                out.push(0u8);
                for v in [x0, x1, y0, y1] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Domain::UnitDisk => out.push(1u8),
            Domain::TorusFundamental { tau } => {
                out.push(2u8);
                out.extend_from_slice(&tau.re.to_le_bytes());
                out.extend_from_slice(&tau.im.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.nx as u32).to_le_bytes());
        out.extend_from_slice(&(self.ny as u32).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.re.to_le_bytes());
            out.extend_from_slice(&s.im.to_le_bytes());
        }
        let mut byte = 0u8;
        for (k, m) in self.mask.iter().enumerate() {
            if *m {
                byte |= 1 << (k % 8);
            }
            if k % 8 == 7 {
                out.push(byte);
                byte = 0;
            }
        }
        if self.mask.len() % 8 != 0 {
            out.push(byte);
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, GridError> {
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], GridError> {
            if *pos + n > data.len() {
                return Err(GridError::Deserialize("truncated input"));
            }
            let s = &data[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let f64_at = |pos: &mut usize| -> Result<f64, GridError> {
            Ok(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
        };
        let tag = take(&mut pos, 1)?[0];
        let domain = match tag {
            0 => Domain::Rectangle {
                x0: f64_at(&mut pos)?,
                x1: f64_at(&mut pos)?,
                y0: f64_at(&mut pos)?,
                y1: f64_at(&mut pos)?,
            },
            1 => Domain::UnitDisk,
            2 => Domain::TorusFundamental {
                tau: C::new(f64_at(&mut pos)?, f64_at(&mut pos)?),
            },
            _ => return Err(GridError::Deserialize("unknown domain tag")),
        };
        domain.validate().map_err(|_| GridError::Deserialize("invalid domain"))?;
        let nx = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let ny = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let count = nx
            .checked_mul(ny)
            .ok_or(GridError::Deserialize("node count overflow"))?;
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let re = f64_at(&mut pos)?;
            let im = f64_at(&mut pos)?;
            samples.push(C::new(re, im));
        }
        let mask_bytes = take(&mut pos, count.div_ceil(8))?;
        let mask = (0..count)
            .map(|k| mask_bytes[k / 8] >> (k % 8) & 1 == 1)
            .collect();
        Ok(Self { domain, nx, ny, samples, mask })
    }
}

fn cell_center(domain: &Domain, nx: usize, ny: usize, i: usize, j: usize) -> C {
    let s = (i as f64 + 0.5) / nx as f64;
    let t = (j as f64 + 0.5) / ny as f64;
    match domain {
        Domain::Rectangle { x0, x1, y0, y1 } => {
            C::new(x0 + s * (x1 - x0), y0 + t * (y1 - y0))
        }
        Domain::UnitDisk => C::new(-1.0 + 2.0 * s, -1.0 + 2.0 * t),
        Domain::TorusFundamental { tau } => C::new(s, 0.0) + tau * t,
    }
}

/// Pairwise (tree) summation: deterministic for a fixed term order and
/// numerically stabler than a running sum.
pub fn tree_sum(terms: &[C]) -> C {
    match terms.len() {
        0 => C::new(0.0, 0.0),
        1 => terms[0],
        n => {
            let (a, b) = terms.split_at(n / 2);
            tree_sum(a) + tree_sum(b)
        }
    }
}
