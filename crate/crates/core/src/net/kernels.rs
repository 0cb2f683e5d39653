//! Low-level numeric kernels shared by the forward and backward passes.
//!
//! Determinism contract: every kernel accumulates floating-point sums in a
//! fixed order that depends only on tensor shapes — never on thread count or
//! scheduling. Parallelism (rayon) is applied only across disjoint output
//! regions, each of which is computed by a single task in a fixed serial
//! order, so results are bit-identical to the single-threaded reference.
//! No FMA contraction is used (plain mul-then-add), so results are also
//! stable across CPUs and `target-cpu` settings.
//!
//! Dense kernels are blocked: the sample loop is chunked so weight rows are
//! streamed once per chunk instead of once per sample, which keeps the large
//! widened layers (e.g. 784×854) memory-friendly without changing the
//! per-element arithmetic order.

use rayon::prelude::*;

/// Samples per block in the dense kernels. Large enough to amortize weight
/// streaming, small enough that a block of activations stays in cache.
const SAMPLE_BLOCK: usize = 16;

/// Dot product with 32 independent accumulators (lane `k` sums indices
/// `≡ k mod 32`), an 8-lane pass over the remainder, and a fixed pairwise
/// combining tree. The lane structure, not the instruction set, defines the
/// summation order, so the compiler can vectorize freely without changing
/// results; 32 lanes keep several independent add chains in flight instead
/// of serializing on one accumulator's latency.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    const LANES: usize = 32;
    let mut acc = [0.0f64; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for k in 0..LANES {
            acc[k] += xa[k] * xb[k];
        }
    }
    let mut ra = ca.remainder().chunks_exact(8);
    let mut rb = cb.remainder().chunks_exact(8);
    let mut acc8 = [0.0f64; 8];
    for (xa, xb) in (&mut ra).zip(&mut rb) {
        for k in 0..8 {
            acc8[k] += xa[k] * xb[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.remainder().iter().zip(rb.remainder()) {
        tail += x * y;
    }
    // 32 → 16 → 8 lanes, merge the remainder lanes, then 8 → 1.
    let mut s16 = [0.0f64; 16];
    for k in 0..16 {
        s16[k] = acc[k] + acc[k + 16];
    }
    let mut s8 = [0.0f64; 8];
    for k in 0..8 {
        s8[k] = (s16[k] + s16[k + 8]) + acc8[k];
    }
    let s4 = [s8[0] + s8[4], s8[1] + s8[5], s8[2] + s8[6], s8[3] + s8[7]];
    ((s4[0] + s4[2]) + (s4[1] + s4[3])) + tail
}

/// `y[i] += alpha * x[i]`.
#[inline]
pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Column gather: `dst[r, j] = src[r, kept[j]]` for a row-major `[rows,
/// full_w]` matrix. Used to compact dense operands when a dropout mask has
/// zeroed the dropped columns, so the matrix product can skip them.
pub(crate) fn gather_cols(src: &[f64], full_w: usize, kept: &[usize]) -> Vec<f64> {
    let rows = src.len() / full_w;
    let mut dst = Vec::with_capacity(rows * kept.len());
    for r in 0..rows {
        let row = &src[r * full_w..(r + 1) * full_w];
        dst.extend(kept.iter().map(|&i| row[i]));
    }
    dst
}

/// Column scatter-add: `dst[r, kept[j]] += src[r, j]`, the inverse of
/// [`gather_cols`] for accumulation targets whose dropped columns stay
/// untouched (exact zeros when the caller zero-initialized them).
pub(crate) fn scatter_cols_add(src: &[f64], dst: &mut [f64], full_w: usize, kept: &[usize]) {
    let rows = src.len() / kept.len().max(1);
    debug_assert_eq!(dst.len(), rows * full_w);
    for r in 0..rows {
        let src_row = &src[r * kept.len()..(r + 1) * kept.len()];
        let dst_row = &mut dst[r * full_w..(r + 1) * full_w];
        for (j, &i) in kept.iter().enumerate() {
            dst_row[i] += src_row[j];
        }
    }
}

/// Dense forward: `out[b, o] = bias[o] + x[b, ·] · w[o, ·]`.
///
/// `x` is `[rows, in_w]`, `w` is `[out_w, in_w]`, `out` is `[rows, out_w]`.
pub(crate) fn dense_forward(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    out: &mut [f64],
    in_w: usize,
    out_w: usize,
) {
    debug_assert_eq!(x.len() % in_w.max(1), 0);
    debug_assert_eq!(out.len(), x.len() / in_w * out_w);
    out.par_chunks_mut(SAMPLE_BLOCK * out_w)
        .zip(x.par_chunks(SAMPLE_BLOCK * in_w))
        .for_each(|(out_block, x_block)| {
            let rows = x_block.len() / in_w;
            for o in 0..out_w {
                let w_row = &w[o * in_w..(o + 1) * in_w];
                for b in 0..rows {
                    out_block[b * out_w + o] =
                        bias[o] + dot(&x_block[b * in_w..(b + 1) * in_w], w_row);
                }
            }
        });
}

/// Dense weight/bias gradients: `dw[o, i] = Σ_b dz[b, o]·x[b, i]`,
/// `db[o] = Σ_b dz[b, o]`. Accumulates INTO `dw`/`db` (callers zero them).
pub(crate) fn dense_backward_params(
    x: &[f64],
    dz: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    in_w: usize,
    out_w: usize,
) {
    let rows = dz.len() / out_w;
    debug_assert_eq!(x.len(), rows * in_w);
    dw.par_chunks_mut(in_w)
        .zip(db.par_iter_mut())
        .enumerate()
        .for_each(|(o, (dw_row, db_o))| {
            for b in 0..rows {
                let coef = dz[b * out_w + o];
                *db_o += coef;
                axpy(dw_row, coef, &x[b * in_w..(b + 1) * in_w]);
            }
        });
}

/// Dense input gradient: `dx[b, i] = Σ_o dz[b, o]·w[o, i]`. Overwrites `dx`.
pub(crate) fn dense_backward_input(
    dz: &[f64],
    w: &[f64],
    dx: &mut [f64],
    in_w: usize,
    out_w: usize,
) {
    dx.par_chunks_mut(in_w)
        .zip(dz.par_chunks(out_w))
        .for_each(|(dx_row, dz_row)| {
            dx_row.fill(0.0);
            for o in 0..out_w {
                let coef = dz_row[o];
                if coef != 0.0 {
                    axpy(dx_row, coef, &w[o * in_w..(o + 1) * in_w]);
                }
            }
        });
}

/// Valid-padding 2-d convolution forward.
///
/// `x` is `[rows, in_c, h, w]`, `weight` is `[out_c, in_c, k, k]`, `out` is
/// `[rows, out_c, oh, ow]` with `oh = (h−k)/stride + 1` (likewise `ow`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_forward(
    x: &[f64],
    weight: &[f64],
    bias: &[f64],
    out: &mut [f64],
    (in_c, h, w): (usize, usize, usize),
    (out_c, k, stride): (usize, usize, usize),
) {
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let in_size = in_c * h * w;
    let out_size = out_c * oh * ow;
    out.par_chunks_mut(out_size)
        .zip(x.par_chunks(in_size))
        .for_each(|(out_b, x_b)| {
            for co in 0..out_c {
                let w_co = &weight[co * in_c * k * k..(co + 1) * in_c * k * k];
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut acc = bias[co];
                        for ci in 0..in_c {
                            let plane = &x_b[ci * h * w..(ci + 1) * h * w];
                            let w_ci = &w_co[ci * k * k..(ci + 1) * k * k];
                            for kh in 0..k {
                                let row = (y * stride + kh) * w + xo * stride;
                                acc += dot(&plane[row..row + k], &w_ci[kh * k..(kh + 1) * k]);
                            }
                        }
                        out_b[co * oh * ow + y * ow + xo] = acc;
                    }
                }
            }
        });
}

/// Convolution parameter gradients; accumulates into `dw`/`db`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward_params(
    x: &[f64],
    dz: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    (in_c, h, w): (usize, usize, usize),
    (out_c, k, stride): (usize, usize, usize),
) {
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let in_size = in_c * h * w;
    let out_size = out_c * oh * ow;
    let rows = dz.len() / out_size;
    dw.par_chunks_mut(in_c * k * k)
        .zip(db.par_iter_mut())
        .enumerate()
        .for_each(|(co, (dw_co, db_co))| {
            for b in 0..rows {
                let x_b = &x[b * in_size..(b + 1) * in_size];
                let dz_co = &dz[b * out_size + co * oh * ow..b * out_size + (co + 1) * oh * ow];
                for y in 0..oh {
                    for xo in 0..ow {
                        let coef = dz_co[y * ow + xo];
                        if coef == 0.0 {
                            continue;
                        }
                        *db_co += coef;
                        for ci in 0..in_c {
                            let plane = &x_b[ci * h * w..(ci + 1) * h * w];
                            let dw_ci = &mut dw_co[ci * k * k..(ci + 1) * k * k];
                            for kh in 0..k {
                                let row = (y * stride + kh) * w + xo * stride;
                                axpy(
                                    &mut dw_ci[kh * k..(kh + 1) * k],
                                    coef,
                                    &plane[row..row + k],
                                );
                            }
                        }
                    }
                }
            }
        });
}

/// Convolution input gradient; overwrites `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward_input(
    dz: &[f64],
    weight: &[f64],
    dx: &mut [f64],
    (in_c, h, w): (usize, usize, usize),
    (out_c, k, stride): (usize, usize, usize),
) {
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let in_size = in_c * h * w;
    let out_size = out_c * oh * ow;
    dx.par_chunks_mut(in_size)
        .zip(dz.par_chunks(out_size))
        .for_each(|(dx_b, dz_b)| {
            dx_b.fill(0.0);
            for co in 0..out_c {
                let w_co = &weight[co * in_c * k * k..(co + 1) * in_c * k * k];
                for y in 0..oh {
                    for xo in 0..ow {
                        let coef = dz_b[co * oh * ow + y * ow + xo];
                        if coef == 0.0 {
                            continue;
                        }
                        for ci in 0..in_c {
                            let plane = &mut dx_b[ci * h * w..(ci + 1) * h * w];
                            let w_ci = &w_co[ci * k * k..(ci + 1) * k * k];
                            for kh in 0..k {
                                let row = (y * stride + kh) * w + xo * stride;
                                axpy(&mut plane[row..row + k], coef, &w_ci[kh * k..(kh + 1) * k]);
                            }
                        }
                    }
                }
            }
        });
}

/// 2×2 max-pool forward (stride 2, odd edges dropped). `x` is
/// `[rows, c, h, w]`, `out` is `[rows, c, h/2, w/2]`.
pub(crate) fn maxpool_forward(x: &[f64], out: &mut [f64], (c, h, w): (usize, usize, usize)) {
    let (oh, ow) = (h / 2, w / 2);
    let in_size = c * h * w;
    let out_size = c * oh * ow;
    out.par_chunks_mut(out_size)
        .zip(x.par_chunks(in_size))
        .for_each(|(out_b, x_b)| {
            for ci in 0..c {
                let plane = &x_b[ci * h * w..(ci + 1) * h * w];
                let out_plane = &mut out_b[ci * oh * ow..(ci + 1) * oh * ow];
                for y in 0..oh {
                    for xo in 0..ow {
                        let (iy, ix) = (2 * y, 2 * xo);
                        let mut best = plane[iy * w + ix];
                        for (kh, kw) in [(0, 1), (1, 0), (1, 1)] {
                            let v = plane[(iy + kh) * w + ix + kw];
                            if v > best {
                                best = v;
                            }
                        }
                        out_plane[y * ow + xo] = best;
                    }
                }
            }
        });
}

/// Max-pool backward: routes each output gradient to the FIRST argmax of
/// its 2×2 window in row-major window order. Overwrites `dx`.
pub(crate) fn maxpool_backward(
    x: &[f64],
    dz: &[f64],
    dx: &mut [f64],
    (c, h, w): (usize, usize, usize),
) {
    let (oh, ow) = (h / 2, w / 2);
    let in_size = c * h * w;
    let out_size = c * oh * ow;
    dx.par_chunks_mut(in_size)
        .zip(x.par_chunks(in_size).zip(dz.par_chunks(out_size)))
        .for_each(|(dx_b, (x_b, dz_b))| {
            dx_b.fill(0.0);
            for ci in 0..c {
                let plane = &x_b[ci * h * w..(ci + 1) * h * w];
                let dplane = &mut dx_b[ci * h * w..(ci + 1) * h * w];
                let dz_plane = &dz_b[ci * oh * ow..(ci + 1) * oh * ow];
                for y in 0..oh {
                    for xo in 0..ow {
                        let (iy, ix) = (2 * y, 2 * xo);
                        let mut best = plane[iy * w + ix];
                        let mut best_at = iy * w + ix;
                        for (kh, kw) in [(0, 1), (1, 0), (1, 1)] {
                            let at = (iy + kh) * w + ix + kw;
                            if plane[at] > best {
                                best = plane[at];
                                best_at = at;
                            }
                        }
                        dplane[best_at] += dz_plane[y * ow + xo];
                    }
                }
            }
        });
}
