//! Cell-averaged densities on a uniform square-cell grid, with the `KSGRID1`
//! snapshot format and seeded sampling.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::particle::InitialCondition;
use crate::rng::{domain, CounterRng};
use crate::vec2::Vec2;

pub const GRID_MAGIC: &[u8; 7] = b"KSGRID1";

/// A nonnegative unit-mass density. `values[iy * nx + ix]` is the cell average
/// of the cell centered at `origin + (ix h, iy h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Center of cell (0, 0).
    pub origin: Vec2,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityGrid {
    /// Zero-filled grid centered on the origin of the plane.
    pub fn zeros_centered(nx: usize, ny: usize, h: f64) -> Self {
        let origin = Vec2::new(-0.5 * (nx as f64 - 1.0) * h, -0.5 * (ny as f64 - 1.0) * h);
        DensityGrid {
            nx,
            ny,
            h,
            origin,
            values: vec![0.0; nx * ny],
            time: 0.0,
        }
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin + Vec2::new(ix as f64 * self.h, iy as f64 * self.h)
    }

    /// Total mass `h^2 sum f`.
    pub fn mass(&self) -> f64 {
        self.h * self.h * self.values.iter().sum::<f64>()
    }

    /// Rescales to unit mass.
    pub fn normalize(&mut self) {
        let m = self.mass();
        assert!(m > 0.0, "cannot normalize a zero grid");
        let inv = 1.0 / m;
        for v in &mut self.values {
            *v *= inv;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 16 || self.ny < 16 {
            return Err(Error::InvalidParams(format!(
                "grid must be at least 16x16, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidParams(format!("cell width must be > 0, got {}", self.h)));
        }
        if self.values.len() != self.nx * self.ny {
            return Err(Error::InvalidParams("value buffer does not match grid shape".into()));
        }
        if self.values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParams("density has negative or non-finite cells".into()));
        }
        let m = self.mass();
        if (m - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParams(format!("density mass is {m}, expected 1 +- 1e-8")));
        }
        Ok(())
    }

    /// Mass in the outermost `ring` cells (boundary-leak monitor).
    pub fn boundary_ring_mass(&self, ring: usize) -> f64 {
        let mut s = 0.0;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let edge = ix < ring
                    || iy < ring
                    || ix >= self.nx - ring
                    || iy >= self.ny - ring;
                if edge {
                    s += self.values[self.idx(ix, iy)];
                }
            }
        }
        s * self.h * self.h
    }

    /// Discretizes an initial law at cell centers and normalizes to unit mass.
    pub fn from_initial_condition(
        initial: &InitialCondition,
        nx: usize,
        ny: usize,
        h: f64,
        origin: Vec2,
    ) -> Result<DensityGrid> {
        initial.validate()?;
        let mut grid = DensityGrid {
            nx,
            ny,
            h,
            origin,
            values: vec![0.0; nx * ny],
            time: 0.0,
        };
        match initial {
            InitialCondition::Gaussian { mean, std } => {
                grid.fill_with(|x| gaussian_density(x, *mean, *std));
            }
            InitialCondition::UniformDisk { center, radius } => {
                let inv = 1.0 / (std::f64::consts::PI * radius * radius);
                grid.fill_with(|x| if (x - *center).norm() <= *radius { inv } else { 0.0 });
            }
            InitialCondition::TwoClusters { centers, std } => {
                grid.fill_with(|x| {
                    0.5 * (gaussian_density(x, centers[0], *std)
                        + gaussian_density(x, centers[1], *std))
                });
            }
            InitialCondition::FromFile { path } => {
                let loaded = read_grid(path)?;
                if loaded.nx != nx || loaded.ny != ny || (loaded.h - h).abs() > 1e-12 {
                    return Err(Error::Format(format!(
                        "{}: grid shape {}x{} (h = {}) does not match configured {}x{} (h = {})",
                        path.display(),
                        loaded.nx,
                        loaded.ny,
                        loaded.h,
                        nx,
                        ny,
                        h
                    )));
                }
                grid.values = loaded.values;
                grid.origin = loaded.origin;
            }
        }
        grid.normalize();
        Ok(grid)
    }

    fn fill_with(&mut self, f: impl Fn(Vec2) -> f64) {
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = self.idx(ix, iy);
                self.values[i] = f(self.cell_center(ix, iy));
            }
        }
    }

    /// `n` i.i.d. draws from the piecewise-constant density: a mass-weighted
    /// cell choice plus a uniform jitter within the cell. Reproducible; draw
    /// `i` depends only on `(seed, i)`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec2> {
        let mut cum = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        for &v in &self.values {
            acc += v;
            cum.push(acc);
        }
        let total = acc;
        (0..n)
            .map(|i| {
                let mut rng = CounterRng::with_item(seed, domain::GRID_SAMPLE, i as u64);
                let u = rng.next_f64() * total;
                let cell = cum.partition_point(|&c| c < u).min(self.values.len() - 1);
                let ix = cell % self.nx;
                let iy = cell / self.nx;
                let jx = rng.next_f64() - 0.5;
                let jy = rng.next_f64() - 0.5;
                self.cell_center(ix, iy) + Vec2::new(jx, jy) * self.h
            })
            .collect()
    }
}

fn gaussian_density(x: Vec2, mean: Vec2, std: f64) -> f64 {
    let r_sq = (x - mean).norm_sq();
    (-0.5 * r_sq / (std * std)).exp() / (std::f64::consts::TAU * std * std)
}

pub fn grid_to_bytes(grid: &DensityGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(7 + 8 * 6 + 8 * grid.values.len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&(grid.nx as u64).to_le_bytes());
    out.extend_from_slice(&(grid.ny as u64).to_le_bytes());
    out.extend_from_slice(&grid.h.to_le_bytes());
    out.extend_from_slice(&grid.origin.x.to_le_bytes());
    out.extend_from_slice(&grid.origin.y.to_le_bytes());
    out.extend_from_slice(&grid.time.to_le_bytes());
    for v in &grid.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_grid(grid: &DensityGrid, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&grid_to_bytes(grid))?;
    w.flush()?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<DensityGrid> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let nx = next_u64(&mut r)? as usize;
    let ny = next_u64(&mut r)? as usize;
    let mut f8 = [0u8; 8];
    let mut next_f64 = |r: &mut BufReader<File>| -> Result<f64> {
        r.read_exact(&mut f8)?;
        Ok(f64::from_le_bytes(f8))
    };
    let h = next_f64(&mut r)?;
    let ox = next_f64(&mut r)?;
    let oy = next_f64(&mut r)?;
    let time = next_f64(&mut r)?;
    if nx == 0 || ny == 0 || nx.saturating_mul(ny) > (1 << 28) {
        return Err(Error::Format(format!("{}: implausible shape {nx}x{ny}", path.display())));
    }
    let mut values = vec![0.0f64; nx * ny];
    for v in &mut values {
        r.read_exact(&mut f8)?;
        *v = f64::from_le_bytes(f8);
    }
    Ok(DensityGrid {
        nx,
        ny,
        h,
        origin: Vec2::new(ox, oy),
        values,
        time,
    })
}
