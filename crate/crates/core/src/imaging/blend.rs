//! Poisson image editing: inside the masked region the result follows the
//! source gradients while matching the destination on the region boundary.
//!
//! Per channel the objective is
//! `sum_{p,q in Omega} (f_p - f_q - v_pq)^2 + sum_{p in Omega, q on the boundary} (f_p - f*_q - v_pq)^2`
//! with `v_pq = src_p - src_q`, minimized by one weighted quadratic solve.

use crate::error::{GlsError, Result};
use crate::instance::{Group, Instance, Weights};
use crate::linalg::{SddMatrix, SparseVector};

use super::Image;

const SOLVE_TOL: f64 = 1e-12;

/// Blends the pixels of `src` selected by `mask` (same size as `src`,
/// selected where the value exceeds 0.5) into `dst`, with source pixel
/// `(x, y)` landing on `(x + dx, y + dy)`.
///
/// Every selected pixel must land strictly inside `dst`. Up to `threads`
/// channels are solved concurrently; results do not depend on `threads`.
pub fn poisson_blend(
    src: &Image,
    dst: &Image,
    mask: &Image,
    offset: (i64, i64),
    threads: usize,
) -> Result<Image> {
    if src.channels() != dst.channels() {
        return Err(GlsError::InvalidArgument(format!(
            "source has {} channels but destination has {}",
            src.channels(),
            dst.channels()
        )));
    }
    if mask.width() != src.width() || mask.height() != src.height() {
        return Err(GlsError::InvalidArgument("mask must have the size of the source".into()));
    }
    let region = Region::new(src, dst, mask, offset)?;
    let channels = src.channels();
    let threads = threads.clamp(1, channels);

    let mut results: Vec<Option<Result<Vec<f64>>>> = (0..channels).map(|_| None).collect();
    for chunk in (0..channels).collect::<Vec<_>>().chunks(threads) {
        let solved: Vec<(usize, Result<Vec<f64>>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&c| {
                    let region = &region;
                    scope.spawn(move || (c, region.solve_channel(src, dst, c)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("channel solve panicked")).collect()
        });
        for (c, r) in solved {
            results[c] = Some(r);
        }
    }

    let mut out = dst.clone();
    for (c, r) in results.into_iter().enumerate() {
        let values = r.expect("every channel is solved")?;
        for (&(x, y), v) in region.dst_pixels.iter().zip(values) {
            out.set(x, y, c, v);
        }
    }
    Ok(out)
}

struct Region {
    /// Source coordinates of the variables, in raster order.
    src_pixels: Vec<(usize, usize)>,
    dst_pixels: Vec<(usize, usize)>,
    /// Variable index of each source pixel, if selected.
    index: Vec<Option<usize>>,
    offset: (i64, i64),
    src_width: usize,
}

impl Region {
    fn new(src: &Image, dst: &Image, mask: &Image, offset: (i64, i64)) -> Result<Self> {
        let (w, h) = (src.width(), src.height());
        let mut index = vec![None; w * h];
        let mut src_pixels = Vec::new();
        let mut dst_pixels = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if mask.get(x, y, 0) <= 0.5 {
                    continue;
                }
                let (tx, ty) = (x as i64 + offset.0, y as i64 + offset.1);
                let inside = tx >= 1 && ty >= 1 && tx + 1 < dst.width() as i64 && ty + 1 < dst.height() as i64;
                if !inside {
                    return Err(GlsError::InvalidArgument(format!(
                        "masked pixel ({x}, {y}) lands at ({tx}, {ty}), not strictly inside the destination"
                    )));
                }
                index[y * w + x] = Some(src_pixels.len());
                src_pixels.push((x, y));
                dst_pixels.push((tx as usize, ty as usize));
            }
        }
        if src_pixels.is_empty() {
            return Err(GlsError::InvalidArgument("mask selects no pixels".into()));
        }
        Ok(Self {
            src_pixels,
            dst_pixels,
            index,
            offset,
            src_width: w,
        })
    }

    fn solve_channel(&self, src: &Image, dst: &Image, c: usize) -> Result<Vec<f64>> {
        let nv = self.src_pixels.len();
        let mut groups = Vec::new();
        for (p, &(x, y)) in self.src_pixels.iter().enumerate() {
            let sp = src.get(x, y, c);
            let neighbours = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)];
            for (ddx, ddy) in neighbours {
                let (qx, qy) = (x as i64 + ddx, y as i64 + ddy);
                let in_src = qx >= 0 && qy >= 0 && (qx as usize) < src.width() && (qy as usize) < src.height();
                let guidance = if in_src { sp - src.get(qx as usize, qy as usize, c) } else { 0.0 };
                let q = in_src
                    .then(|| self.index[qy as usize * self.src_width + qx as usize])
                    .flatten();
                match q {
                    // each internal edge once, from its lower-indexed end
                    Some(q) if q > p => {
                        let l = SddMatrix::assemble_laplacian(nv, &[(p, q, 1.0)], &[])?;
                        groups.push(Group::new(l, SparseVector::from_pairs(nv, vec![(p, guidance)])?));
                    }
                    Some(_) => {}
                    None => {
                        let (tx, ty) = (qx + self.offset.0, qy + self.offset.1);
                        let boundary = dst.get(tx as usize, ty as usize, c);
                        let l = SddMatrix::assemble_laplacian(nv, &[], &[(p, 1.0)])?;
                        groups.push(Group::new(
                            l,
                            SparseVector::from_pairs(nv, vec![(p, boundary + guidance)])?,
                        ));
                    }
                }
            }
        }
        let inst = Instance::new(nv, groups)?;
        Ok(inst.quad_min(&Weights::uniform(inst.k()), SOLVE_TOL)?.x)
    }
}
