//! Image problems on the pixel grid: total-variation denoising, Poisson
//! blending and Netpbm I/O.

mod blend;
mod netpbm;

pub use blend::poisson_blend;
pub use netpbm::{read_netpbm, write_netpbm, NetpbmFormat};

use crate::error::{GlsError, Result};
use crate::instance::{Group, Instance, Solution};
use crate::linalg::{SddMatrix, SparseVector};
use crate::modeling::l22_fidelity_solve;
use crate::solver::SolverChoice;

/// Row-major image with interleaved channels; sample `(x, y, c)` is at
/// `(y * width + x) * channels + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if !(channels == 1 || channels == 3) {
            return Err(GlsError::Format(format!("unsupported channel count {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(GlsError::Format("image dimensions must be positive".into()));
        }
        crate::error::check_len(width * height * channels, data.len())?;
        crate::error::check_finite(&data, "image samples")?;
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// One channel as a grayscale image.
    pub fn channel(&self, c: usize) -> Image {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Interleaves equally sized grayscale images.
    pub fn from_channels(planes: &[Image]) -> Result<Image> {
        let first = planes
            .first()
            .ok_or_else(|| GlsError::Format("no channels given".into()))?;
        let (w, h) = (first.width, first.height);
        if planes.iter().any(|p| p.width != w || p.height != h || p.channels != 1) {
            return Err(GlsError::Format("channel planes must be grayscale of equal size".into()));
        }
        let c = planes.len();
        let mut data = vec![0.0; w * h * c];
        for (ch, p) in planes.iter().enumerate() {
            for (i, v) in p.data.iter().enumerate() {
                data[i * c + ch] = *v;
            }
        }
        Image::new(w, h, c, data)
    }

    pub fn clamped(mut self) -> Image {
        self.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvMode {
    /// One group per grid edge: `lambda sum |x_u - x_v|`.
    Anisotropic,
    /// One group per pixel holding its right and down edges:
    /// `lambda sum_p sqrt(sum (x_p - x_q)^2)`.
    Isotropic,
}

/// Fidelity formulation used by the denoisers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fidelity {
    /// `||x - s0||_2^2`, through the nested search wrapper with the given
    /// relative search tolerance.
    Squared { search_tol: f64 },
    /// `||x - s0||_2` as one more group.
    Sqrt,
}

impl Default for Fidelity {
    fn default() -> Self {
        Fidelity::Squared { search_tol: 1e-4 }
    }
}

/// Smoothness groups on the grid of `width x height` pixels with
/// `channels` variables each (variable `pixel * channels + c`). Every group
/// spans all channels of the edges it holds; edge weights are `lambda^2`.
///
/// Isotropic mode emits one group per pixel, including pixels with no
/// right or down neighbour (whose group is empty).
pub fn grid_groups(
    width: usize,
    height: usize,
    channels: usize,
    mode: TvMode,
    lambda: f64,
) -> Result<Vec<Group>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(GlsError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let n = width * height * channels;
    let w2 = lambda * lambda;
    let pixel_edges = |p: usize, q: usize| (0..channels).map(move |c| (p * channels + c, q * channels + c, w2));
    let mut groups = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            let right = (x + 1 < width).then(|| p + 1);
            let down = (y + 1 < height).then(|| p + width);
            match mode {
                TvMode::Anisotropic => {
                    for q in right.into_iter().chain(down) {
                        let edges: Vec<_> = pixel_edges(p, q).collect();
                        groups.push(Group::centered(SddMatrix::assemble_laplacian(n, &edges, &[])?));
                    }
                }
                TvMode::Isotropic => {
                    let edges: Vec<_> = right.into_iter().chain(down).flat_map(|q| pixel_edges(p, q)).collect();
                    groups.push(Group::centered(SddMatrix::assemble_laplacian(n, &edges, &[])?));
                }
            }
        }
    }
    Ok(groups)
}

/// Smoothness instance of a grayscale image (fidelity not included).
pub fn grid_instance(img: &Image, mode: TvMode, lambda: f64) -> Result<Instance> {
    if img.channels != 1 {
        return Err(GlsError::InvalidArgument(
            "grid_instance takes a single-channel image; use the multichannel builder".into(),
        ));
    }
    Instance::new(img.pixels(), grid_groups(img.width, img.height, 1, mode, lambda)?)
}

fn with_sqrt_fidelity(mut groups: Vec<Group>, s0: &[f64]) -> Result<Instance> {
    let n = s0.len();
    groups.push(Group::new(SddMatrix::identity(n), SparseVector::from_dense(s0)?));
    Instance::new(n, groups)
}

/// Complete denoising instance `||x - s0||_2 + sum smooth` of an image with
/// the square-root fidelity, empty groups dropped.
pub fn sqrt_fidelity_instance(img: &Image, mode: TvMode, lambda: f64) -> Result<Instance> {
    let smooth = grid_groups(img.width, img.height, img.channels, mode, lambda)?
        .into_iter()
        .filter(|g| !g.matrix().is_zero())
        .collect();
    with_sqrt_fidelity(smooth, &img.data)
}

/// `||x - s0||^2 + sum smooth` (or the square-root fidelity) at `x`.
pub fn denoise_objective(img: &Image, mode: TvMode, lambda: f64, fidelity: Fidelity, x: &[f64]) -> Result<f64> {
    let groups = grid_groups(img.width, img.height, img.channels, mode, lambda)?;
    crate::error::check_len(img.data.len(), x.len())?;
    let dist_sq: f64 = x.iter().zip(&img.data).map(|(a, b)| (a - b) * (a - b)).sum();
    let smooth: f64 = groups.iter().map(|g| g.residual_norm(x)).sum();
    Ok(match fidelity {
        Fidelity::Squared { .. } => dist_sq + smooth,
        Fidelity::Sqrt => dist_sq.sqrt() + smooth,
    })
}

#[derive(Debug, Clone)]
pub struct Denoised {
    /// Solver output reshaped and clamped to `[0, 1]`.
    pub image: Image,
    /// Objective of the unclamped solution.
    pub objective: f64,
    pub solution: Solution,
}

fn denoise_any(img: &Image, mode: TvMode, lambda: f64, solver: &SolverChoice, fidelity: Fidelity) -> Result<Denoised> {
    let smooth: Vec<Group> = grid_groups(img.width, img.height, img.channels, mode, lambda)?
        .into_iter()
        .filter(|g| !g.matrix().is_zero())
        .collect();
    let solution = match fidelity {
        Fidelity::Squared { search_tol } => l22_fidelity_solve(&smooth, &img.data, solver, search_tol)?,
        Fidelity::Sqrt => solver.solve(&with_sqrt_fidelity(smooth, &img.data)?)?,
    };
    let objective = denoise_objective(img, mode, lambda, fidelity, &solution.x)?;
    let image = Image::new(img.width, img.height, img.channels, solution.x.clone())?.clamped();
    Ok(Denoised {
        image,
        objective,
        solution,
    })
}

/// Total-variation denoising of a grayscale image.
pub fn denoise(img: &Image, mode: TvMode, lambda: f64, solver: &SolverChoice, fidelity: Fidelity) -> Result<Denoised> {
    if img.channels != 1 {
        return Err(GlsError::InvalidArgument(
            "denoise takes a single-channel image; use denoise_multichannel".into(),
        ));
    }
    denoise_any(img, mode, lambda, solver, fidelity)
}

/// Total-variation denoising of a color image with groups spanning the
/// three channels of each pixel pair.
pub fn denoise_multichannel(
    img: &Image,
    mode: TvMode,
    lambda: f64,
    solver: &SolverChoice,
    fidelity: Fidelity,
) -> Result<Denoised> {
    if img.channels != 3 {
        return Err(GlsError::InvalidArgument(format!(
            "denoise_multichannel takes a 3-channel image, got {} channels",
            img.channels
        )));
    }
    denoise_any(img, mode, lambda, solver, fidelity)
}
