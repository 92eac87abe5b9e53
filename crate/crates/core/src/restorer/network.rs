//! Three 3x3 convolutions with replicate padding and ReLU between them.
//! Activations are held channel-planar; images are converted at the edges.

use super::{Gradients, RestorerState, HIDDEN, IN_CHANNELS};
use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvLayer {
    pub in_c: usize,
    pub out_c: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvLayer {
    pub const fn weights(&self) -> usize {
        self.in_c * self.out_c * 9
    }
}

const fn layer(in_c: usize, out_c: usize, start: usize) -> ConvLayer {
    ConvLayer {
        in_c,
        out_c,
        w_off: start,
        b_off: start + in_c * out_c * 9,
    }
}

pub(crate) const L1: ConvLayer = layer(IN_CHANNELS, HIDDEN, 0);
pub(crate) const L2: ConvLayer = layer(HIDDEN, HIDDEN, L1.b_off + HIDDEN);
pub(crate) const L3: ConvLayer = layer(HIDDEN, IN_CHANNELS, L2.b_off + HIDDEN);
pub(crate) const LAYERS: [ConvLayer; 3] = [L1, L2, L3];
pub const PARAM_COUNT: usize = L3.b_off + IN_CHANNELS;

/// `c` planes of `h x w`, plane-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Planes {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Planes {
    fn zeros(c: usize, h: usize, w: usize) -> Self {
        Planes {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_image(img: &Image) -> Self {
        let (h, w, c) = (img.height(), img.width(), img.channels());
        let mut p = Planes::zeros(c, h, w);
        for (i, v) in img.data().iter().enumerate() {
            let ch = i % c;
            let pix = i / c;
            p.data[ch * h * w + pix] = *v;
        }
        p
    }

    pub fn to_image(&self) -> Image {
        let (h, w, c) = (self.h, self.w, self.c);
        let mut data = vec![0.0; c * h * w];
        for ch in 0..c {
            for pix in 0..h * w {
                data[pix * c + ch] = self.data[ch * h * w + pix];
            }
        }
        Image::from_vec(h, w, c, data).expect("sizes agree")
    }

    fn plane(&self, ch: usize) -> &[f64] {
        &self.data[ch * self.h * self.w..(ch + 1) * self.h * self.w]
    }

    /// Replicate-padded copy, `(h + 2) x (w + 2)` per plane.
    fn padded(&self) -> Planes {
        let (h, w) = (self.h, self.w);
        let (ph, pw) = (h + 2, w + 2);
        let mut out = Planes::zeros(self.c, ph, pw);
        for ch in 0..self.c {
            let src = self.plane(ch);
            let dst = &mut out.data[ch * ph * pw..(ch + 1) * ph * pw];
            for py in 0..ph {
                let sy = py.saturating_sub(1).min(h - 1);
                let row = &src[sy * w..(sy + 1) * w];
                let drow = &mut dst[py * pw..(py + 1) * pw];
                drow[0] = row[0];
                drow[1..=w].copy_from_slice(row);
                drow[w + 1] = row[w - 1];
            }
        }
        out
    }
}

/// Adds the gradient of a padded tensor back onto the unpadded positions
/// each padded sample was copied from.
fn fold_padding(dpad: &Planes) -> Planes {
    let (ph, pw) = (dpad.h, dpad.w);
    let (h, w) = (ph - 2, pw - 2);
    let mut out = Planes::zeros(dpad.c, h, w);
    for ch in 0..dpad.c {
        let src = &dpad.data[ch * ph * pw..(ch + 1) * ph * pw];
        let dst = &mut out.data[ch * h * w..(ch + 1) * h * w];
        for py in 0..ph {
            let sy = py.saturating_sub(1).min(h - 1);
            let srow = &src[py * pw..(py + 1) * pw];
            let drow = &mut dst[sy * w..(sy + 1) * w];
            drow[0] += srow[0];
            for x in 0..w {
                drow[x] += srow[x + 1];
            }
            drow[w - 1] += srow[w + 1];
        }
    }
    out
}

fn conv_forward(params: &[f64], l: &ConvLayer, pad: &Planes) -> Planes {
    let (h, w) = (pad.h - 2, pad.w - 2);
    let pw = pad.w;
    let mut out = Planes::zeros(l.out_c, h, w);
    for o in 0..l.out_c {
        let dst = &mut out.data[o * h * w..(o + 1) * h * w];
        dst.fill(params[l.b_off + o]);
        for i in 0..l.in_c {
            let src = pad.plane(i);
            for ky in 0..3 {
                for kx in 0..3 {
                    let k = params[l.w_off + ((o * l.in_c + i) * 3 + ky) * 3 + kx];
                    if k == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        let srow = &src[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                        let drow = &mut dst[y * w..(y + 1) * w];
                        for (d, s) in drow.iter_mut().zip(srow) {
                            *d += k * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients into `grads` and returns the gradient
/// with respect to the padded input when `want_input` is set.
fn conv_backward(
    params: &[f64],
    l: &ConvLayer,
    pad: &Planes,
    gout: &Planes,
    grads: &mut [f64],
    want_input: bool,
) -> Option<Planes> {
    let (h, w) = (gout.h, gout.w);
    let pw = pad.w;
    let mut dpad = want_input.then(|| Planes::zeros(l.in_c, pad.h, pad.w));
    for o in 0..l.out_c {
        let g = gout.plane(o);
        grads[l.b_off + o] += g.iter().sum::<f64>();
        for i in 0..l.in_c {
            let src = pad.plane(i);
            for ky in 0..3 {
                for kx in 0..3 {
                    let widx = l.w_off + ((o * l.in_c + i) * 3 + ky) * 3 + kx;
                    let mut acc = 0.0;
                    for y in 0..h {
                        let srow = &src[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                        let grow = &g[y * w..(y + 1) * w];
                        acc += srow.iter().zip(grow).map(|(s, gv)| s * gv).sum::<f64>();
                    }
                    grads[widx] += acc;
                    if let Some(dp) = dpad.as_mut() {
                        let k = params[widx];
                        if k == 0.0 {
                            continue;
                        }
                        let plane = &mut dp.data[i * pad.h * pw..(i + 1) * pad.h * pw];
                        for y in 0..h {
                            let drow = &mut plane[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                            let grow = &g[y * w..(y + 1) * w];
                            for (d, gv) in drow.iter_mut().zip(grow) {
                                *d += k * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    dpad
}

fn relu_in_place(p: &mut Planes) {
    p.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Intermediate values kept for the backward pass.
pub(crate) struct Trace {
    pad_x: Planes,
    pad_a1: Planes,
    pad_a2: Planes,
    a1: Planes,
    a2: Planes,
}

fn check_input(x: &Image) -> Result<()> {
    if x.channels() != IN_CHANNELS {
        return Err(Error::Shape(format!(
            "restorer expects {IN_CHANNELS} channels, got {}",
            x.channels()
        )));
    }
    if x.height() == 0 || x.width() == 0 {
        return Err(Error::Shape("empty image".into()));
    }
    Ok(())
}

/// Unclipped prediction `x - head(x)` and, on request, the trace.
pub(crate) fn forward_traced(
    state: &RestorerState,
    x: &Image,
    keep: bool,
) -> Result<(Image, Option<Trace>)> {
    check_input(x)?;
    let p = state.params();
    let xp = Planes::from_image(x);
    let pad_x = xp.padded();
    let mut a1 = conv_forward(p, &L1, &pad_x);
    relu_in_place(&mut a1);
    let pad_a1 = a1.padded();
    let mut a2 = conv_forward(p, &L2, &pad_a1);
    relu_in_place(&mut a2);
    let pad_a2 = a2.padded();
    let r = conv_forward(p, &L3, &pad_a2);
    let mut y = xp;
    y.data.iter_mut().zip(&r.data).for_each(|(v, rv)| *v -= rv);
    let trace = keep.then_some(Trace {
        pad_x,
        pad_a1,
        pad_a2,
        a1,
        a2,
    });
    Ok((y.to_image(), trace))
}

/// Accumulates parameter gradients for one image given `dL/dy`.
pub(crate) fn backward_traced(
    state: &RestorerState,
    trace: &Trace,
    grad_y: &Image,
    grads: &mut Gradients,
) {
    let p = state.params();
    let g = grads.as_mut_slice();
    let mut dr = Planes::from_image(grad_y);
    dr.data.iter_mut().for_each(|v| *v = -*v);

    let dpad2 = conv_backward(p, &L3, &trace.pad_a2, &dr, g, true).expect("requested");
    let mut dz2 = fold_padding(&dpad2);
    dz2.data
        .iter_mut()
        .zip(&trace.a2.data)
        .for_each(|(d, a)| {
            if *a <= 0.0 {
                *d = 0.0
            }
        });
    let dpad1 = conv_backward(p, &L2, &trace.pad_a1, &dz2, g, true).expect("requested");
    let mut dz1 = fold_padding(&dpad1);
    dz1.data
        .iter_mut()
        .zip(&trace.a1.data)
        .for_each(|(d, a)| {
            if *a <= 0.0 {
                *d = 0.0
            }
        });
    conv_backward(p, &L1, &trace.pad_x, &dz1, g, false);
}

/// Which hidden units are active, layer by layer.
pub(crate) fn activation_pattern(state: &RestorerState, x: &Image) -> Result<Vec<bool>> {
    let (_, trace) = forward_traced(state, x, true)?;
    let t = trace.expect("trace kept");
    Ok(t.a1.data.iter().chain(&t.a2.data).map(|&a| a > 0.0).collect())
}

/// Unclipped prediction used during training.
pub fn forward(state: &RestorerState, x: &Image) -> Result<Image> {
    Ok(forward_traced(state, x, false)?.0)
}

pub fn forward_batch(state: &RestorerState, xs: &[Image]) -> Result<Vec<Image>> {
    xs.iter().map(|x| forward(state, x)).collect()
}

/// Evaluation-time prediction, clipped to `[0, 1]`.
pub fn predict(state: &RestorerState, x: &Image) -> Result<Image> {
    Ok(forward(state, x)?.clipped())
}

/// Multiply-accumulate count of one forward pass on an `h x w` image.
pub fn forward_macs(h: usize, w: usize) -> u64 {
    LAYERS.iter().map(|l| l.weights() as u64).sum::<u64>() * (h * w) as u64
}
