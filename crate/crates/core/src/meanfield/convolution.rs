//! Free-space convolution of grid densities with the attraction kernel and
//! with radial kernels `|x|^{-gamma}`, via zero-padded FFT.
//!
//! The padded size is at least `2n - 1` per axis, so circular convolution
//! equals linear convolution with no wrap-around. The kernel tap at the
//! singular displacement (0, 0) is the analytic average of the kernel over one
//! cell: zero for the odd vector kernel, and a closed-form polar-coordinate
//! reduction for `|x|^{-gamma}` (integrable for `gamma < 2`).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::kernel::KernelParams;
use crate::vec2::Vec2;

/// `(K * f)` sampled at cell centers.
#[derive(Clone, Debug)]
pub struct VelocityField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Vec2>,
}

impl VelocityField {
    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> Vec2 {
        self.values[iy * self.nx + ix]
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

struct Fft2 {
    px: usize,
    py: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(px: usize, py: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            px,
            py,
            fwd_x: planner.plan_fft_forward(px),
            inv_x: planner.plan_fft_inverse(px),
            fwd_y: planner.plan_fft_forward(py),
            inv_y: planner.plan_fft_inverse(py),
        }
    }

    fn forward(&self, data: &mut [Complex<f64>]) {
        self.pass(data, true);
    }

    /// Unnormalized inverse; callers fold 1/(px py) into the kernel taps.
    fn inverse(&self, data: &mut [Complex<f64>]) {
        self.pass(data, false);
    }

    fn pass(&self, data: &mut [Complex<f64>], forward: bool) {
        debug_assert_eq!(data.len(), self.px * self.py);
        let row_fft = if forward { &self.fwd_x } else { &self.inv_x };
        for row in data.chunks_exact_mut(self.px) {
            row_fft.process(row);
        }
        let col_fft = if forward { &self.fwd_y } else { &self.inv_y };
        let mut col = vec![Complex::default(); self.py];
        for x in 0..self.px {
            for y in 0..self.py {
                col[y] = data[y * self.px + x];
            }
            col_fft.process(&mut col);
            for y in 0..self.py {
                data[y * self.px + x] = col[y];
            }
        }
    }
}

fn padded(n: usize) -> usize {
    (2 * n).next_power_of_two()
}

/// Precomputed transforms for convolving densities on one grid shape with the
/// vector kernel. Both components ride in one complex transform
/// (`Kx + i Ky` against a real density).
pub struct VelocityPlan {
    nx: usize,
    ny: usize,
    fft: Fft2,
    khat: Vec<Complex<f64>>,
    scratch: std::cell::RefCell<Vec<Complex<f64>>>,
}

impl VelocityPlan {
    pub fn new(nx: usize, ny: usize, h: f64, p: &KernelParams) -> Self {
        let (px, py) = (padded(nx), padded(ny));
        let fft = Fft2::new(px, py);
        let mut taps = vec![Complex::default(); px * py];
        let exponent = -0.5 * (p.alpha + 1.0);
        let norm = 1.0 / (px as f64 * py as f64);
        let weight = h * h * norm;
        for dy in -(ny as i64 - 1)..=(ny as i64 - 1) {
            for dx in -(nx as i64 - 1)..=(nx as i64 - 1) {
                if dx == 0 && dy == 0 {
                    // Cell average of the odd kernel over its own cell is zero.
                    continue;
                }
                let d = Vec2::new(dx as f64 * h, dy as f64 * h);
                let k = d * d.norm_sq().powf(exponent);
                let ix = dx.rem_euclid(px as i64) as usize;
                let iy = dy.rem_euclid(py as i64) as usize;
                taps[iy * px + ix] = Complex::new(k.x, k.y) * weight;
            }
        }
        fft.forward(&mut taps);
        VelocityPlan {
            nx,
            ny,
            fft,
            khat: taps,
            scratch: std::cell::RefCell::new(vec![Complex::default(); px * py]),
        }
    }

    /// `(K * f)` at every cell center.
    pub fn apply(&self, f: &DensityGrid) -> VelocityField {
        assert_eq!((f.nx, f.ny), (self.nx, self.ny), "grid shape mismatch");
        let (px, py) = (self.fft.px, self.fft.py);
        let mut buf = self.scratch.borrow_mut();
        buf.iter_mut().for_each(|c| *c = Complex::default());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                buf[iy * px + ix] = Complex::new(f.values[iy * self.nx + ix], 0.0);
            }
        }
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.khat) {
            *b *= *k;
        }
        self.fft.inverse(&mut buf);
        let mut values = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = buf[iy * px + ix];
                values.push(Vec2::new(c.re, c.im));
            }
        }
        let _ = py;
        VelocityField {
            nx: self.nx,
            ny: self.ny,
            values,
        }
    }
}

/// Precomputed transforms for the scalar kernel `|x|^{-gamma}`, used by the
/// pairwise interaction functional.
pub struct RadialPlan {
    nx: usize,
    ny: usize,
    fft: Fft2,
    ghat: Vec<Complex<f64>>,
}

impl RadialPlan {
    pub fn new(nx: usize, ny: usize, h: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::InvalidParams(format!(
                "radial exponent gamma must lie in (0, 2), got {gamma}"
            )));
        }
        let (px, py) = (padded(nx), padded(ny));
        let fft = Fft2::new(px, py);
        let mut taps = vec![Complex::default(); px * py];
        let norm = 1.0 / (px as f64 * py as f64);
        let weight = h * h * norm;
        for dy in -(ny as i64 - 1)..=(ny as i64 - 1) {
            for dx in -(nx as i64 - 1)..=(nx as i64 - 1) {
                let g = if dx == 0 && dy == 0 {
                    radial_cell_average(gamma, h)
                } else {
                    let d = Vec2::new(dx as f64 * h, dy as f64 * h);
                    d.norm_sq().powf(-0.5 * gamma)
                };
                let ix = dx.rem_euclid(px as i64) as usize;
                let iy = dy.rem_euclid(py as i64) as usize;
                taps[iy * px + ix] = Complex::new(g * weight, 0.0);
            }
        }
        fft.forward(&mut taps);
        Ok(RadialPlan {
            nx,
            ny,
            fft,
            ghat: taps,
        })
    }

    /// `(|.|^{-gamma} * f)` at every cell center.
    pub fn apply(&self, f: &DensityGrid) -> Vec<f64> {
        assert_eq!((f.nx, f.ny), (self.nx, self.ny), "grid shape mismatch");
        let (px, _py) = (self.fft.px, self.fft.py);
        let mut buf = vec![Complex::default(); self.fft.px * self.fft.py];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                buf[iy * px + ix] = Complex::new(f.values[iy * self.nx + ix], 0.0);
            }
        }
        self.fft.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.ghat) {
            *b *= *k;
        }
        self.fft.inverse(&mut buf);
        let mut values = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                values.push(buf[iy * px + ix].re);
            }
        }
        values
    }
}

/// Average of `|x|^{-gamma}` over the square cell `[-h/2, h/2]^2`.
///
/// In polar coordinates the cell splits into eight wedges with radial extent
/// `(h/2) sec(theta)`, giving
/// `avg = 8 / (h^2 (2 - gamma)) * (h/2)^{2-gamma} * J` with
/// `J = integral of cos(theta)^{gamma-2} over [0, pi/4]`.
pub fn radial_cell_average(gamma: f64, h: f64) -> f64 {
    assert!(gamma < 2.0, "cell average diverges for gamma >= 2");
    let j = simpson(|t| t.cos().powf(gamma - 2.0), 0.0, std::f64::consts::FRAC_PI_4, 1e-14);
    8.0 / (h * h * (2.0 - gamma)) * (0.5 * h).powf(2.0 - gamma) * j
}

/// Adaptive Simpson quadrature for smooth 1D integrands.
fn simpson(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: impl Fn(f64) -> f64 + Copy,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 40)
}

/// Discrete free-space convolution of the attraction kernel with a density.
///
/// One-off entry point; steppers that convolve repeatedly should hold a
/// [`VelocityPlan`].
pub fn kernel_convolution(f: &DensityGrid, p: &KernelParams) -> VelocityField {
    VelocityPlan::new(f.nx, f.ny, f.h, p).apply(f)
}
