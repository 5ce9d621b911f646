//! Discrete approximations of f̂(ξ) = ∫ f(x) e^{−2πi x·ξ} dx on uniform
//! grids.
//!
//! A grid of `n` points per axis starts at `x0` with spacing `dx`; the dual
//! grid is ξ_k = (k − n/2)/(n·dx), k = 0..n. With these conventions the
//! discrete Parseval identity Σ|f|²dx^d = Σ|f̂|²Δξ^d holds exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub n: usize,
    pub dx: f64,
    pub x0: f64,
}

impl UniformGrid {
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn dxi(&self) -> f64 {
        1.0 / (self.n as f64 * self.dx)
    }

    pub fn xi(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dxi()
    }
}

fn transform_lines(data: &mut [Complex64], g: &UniformGrid, d: usize, dir: FftDirection) {
    let n = g.n;
    let fft = FftPlanner::new().plan_fft(n, dir);
    let sign = match dir {
        FftDirection::Forward => -1.0,
        FftDirection::Inverse => 1.0,
    };
    let phase: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * g.x0 * g.xi(k)))
        .collect();
    let alt: Vec<f64> = (0..n)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let scale = match dir {
        FftDirection::Forward => g.dx,
        FftDirection::Inverse => g.dxi(),
    };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let lines = data.len() / n;
    for axis in 0..d {
        // Stride of the current axis in row-major storage.
        let stride = n.pow((d - 1 - axis) as u32);
        for l in 0..lines {
            let base = (l / stride) * stride * n + l % stride;
            for j in 0..n {
                line[j] = data[base + j * stride];
            }
            if dir == FftDirection::Forward {
                for j in 0..n {
                    line[j] *= alt[j];
                }
                fft.process(&mut line);
                for k in 0..n {
                    line[k] *= phase[k] * scale;
                }
            } else {
                for k in 0..n {
                    line[k] *= phase[k];
                }
                fft.process(&mut line);
                for j in 0..n {
                    line[j] *= alt[j] * scale;
                }
            }
            for j in 0..n {
                data[base + j * stride] = line[j];
            }
        }
    }
}

/// Forward transform of row-major samples on `g`^d.
pub fn forward(samples: &[Complex64], g: &UniformGrid, d: usize) -> Vec<Complex64> {
    let mut v = samples.to_vec();
    transform_lines(&mut v, g, d, FftDirection::Forward);
    v
}

/// Inverse of [`forward`].
pub fn inverse(spectrum: &[Complex64], g: &UniformGrid, d: usize) -> Vec<Complex64> {
    let mut v = spectrum.to_vec();
    transform_lines(&mut v, g, d, FftDirection::Inverse);
    v
}
