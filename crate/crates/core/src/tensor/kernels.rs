//! Raw loops behind the convolution, pooling and linear layers.

/// Output length of a "same"-padded axis: `ceil(n / stride)`, never below 1.
pub fn same_output_len(n: usize, stride: usize) -> usize {
    n.div_ceil(stride).max(1)
}

/// Geometry of a zero-padded "same" convolution over a `[h, w, c_in]` map.
///
/// Odd total padding puts the extra row/column at the high-index end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub h: usize,
    pub w: usize,
    pub c_in: usize,
    pub kh: usize,
    pub kw: usize,
    pub c_out: usize,
    pub sh: usize,
    pub sw: usize,
    pub oh: usize,
    pub ow: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

fn leading_pad(n: usize, k: usize, s: usize, out: usize) -> usize {
    let total = ((out - 1) * s + k).saturating_sub(n);
    total / 2
}

impl ConvGeom {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        h: usize,
        w: usize,
        c_in: usize,
        kh: usize,
        kw: usize,
        c_out: usize,
        sh: usize,
        sw: usize,
    ) -> Self {
        let oh = same_output_len(h, sh);
        let ow = same_output_len(w, sw);
        Self {
            h,
            w,
            c_in,
            kh,
            kw,
            c_out,
            sh,
            sw,
            oh,
            ow,
            pad_top: leading_pad(h, kh, sh, oh),
            pad_left: leading_pad(w, kw, sw, ow),
        }
    }

    pub fn out_len(&self) -> usize {
        self.oh * self.ow * self.c_out
    }

    /// Kernel row range valid for output row `oy`, with the matching input row offset.
    #[inline]
    fn rows(&self, oy: usize) -> (usize, usize, isize) {
        let base = (oy * self.sh) as isize - self.pad_top as isize;
        let lo = (-base).max(0) as usize;
        let hi = ((self.h as isize - base).min(self.kh as isize)).max(0) as usize;
        (lo, hi, base)
    }

    #[inline]
    fn cols(&self, ox: usize) -> (usize, usize, isize) {
        let base = (ox * self.sw) as isize - self.pad_left as isize;
        let lo = (-base).max(0) as usize;
        let hi = ((self.w as isize - base).min(self.kw as isize)).max(0) as usize;
        (lo, hi, base)
    }
}

pub(crate) fn conv_forward(g: &ConvGeom, x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let (c_in, c_out) = (g.c_in, g.c_out);
    let mut out = vec![0.0; g.out_len()];
    for oy in 0..g.oh {
        let (ky0, ky1, by) = g.rows(oy);
        for ox in 0..g.ow {
            let (kx0, kx1, bx) = g.cols(ox);
            let o = &mut out[(oy * g.ow + ox) * c_out..][..c_out];
            o.copy_from_slice(bias);
            for ky in ky0..ky1 {
                let iy = (by + ky as isize) as usize;
                for kx in kx0..kx1 {
                    let ix = (bx + kx as isize) as usize;
                    let xin = &x[(iy * g.w + ix) * c_in..][..c_in];
                    let wk = &weight[(ky * g.kw + kx) * c_in * c_out..][..c_in * c_out];
                    for (ci, &v) in xin.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let wrow = &wk[ci * c_out..][..c_out];
                        for (acc, &wv) in o.iter_mut().zip(wrow) {
                            *acc += v * wv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates input, weight and bias gradients. `gx` may be `None` when the
/// input does not require a gradient.
pub(crate) fn conv_backward(
    g: &ConvGeom,
    x: &[f64],
    weight: &[f64],
    gout: &[f64],
    mut gx: Option<&mut [f64]>,
    gw: &mut [f64],
    gb: &mut [f64],
) {
    let (c_in, c_out) = (g.c_in, g.c_out);
    for oy in 0..g.oh {
        let (ky0, ky1, by) = g.rows(oy);
        for ox in 0..g.ow {
            let (kx0, kx1, bx) = g.cols(ox);
            let go = &gout[(oy * g.ow + ox) * c_out..][..c_out];
            for (b, &d) in gb.iter_mut().zip(go) {
                *b += d;
            }
            for ky in ky0..ky1 {
                let iy = (by + ky as isize) as usize;
                for kx in kx0..kx1 {
                    let ix = (bx + kx as isize) as usize;
                    let xoff = (iy * g.w + ix) * c_in;
                    let woff = (ky * g.kw + kx) * c_in * c_out;
                    let xin = &x[xoff..][..c_in];
                    let gwk = &mut gw[woff..][..c_in * c_out];
                    for (ci, &v) in xin.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        for (acc, &d) in gwk[ci * c_out..][..c_out].iter_mut().zip(go) {
                            *acc += v * d;
                        }
                    }
                    if let Some(gx) = gx.as_deref_mut() {
                        let wk = &weight[woff..][..c_in * c_out];
                        for (ci, slot) in gx[xoff..][..c_in].iter_mut().enumerate() {
                            let wrow = &wk[ci * c_out..][..c_out];
                            let mut s = 0.0;
                            for (&wv, &d) in wrow.iter().zip(go) {
                                s += wv * d;
                            }
                            *slot += s;
                        }
                    }
                }
            }
        }
    }
}
