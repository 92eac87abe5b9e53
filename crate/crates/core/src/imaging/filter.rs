use super::Image;

/// Offsets and weights of the 4-neighbour Laplacian.
const TAPS: [(isize, isize, f64); 5] = [
    (-1, 0, 1.0),
    (0, -1, 1.0),
    (0, 0, -4.0),
    (0, 1, 1.0),
    (1, 0, 1.0),
];

#[inline]
fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Per-channel `[[0,1,0],[1,-4,1],[0,1,0]]` with replicated borders.
/// The result is left unclipped.
pub fn laplacian(img: &Image) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut out = Image::zeros(h, w, ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for &(dy, dx, k) in &TAPS {
                    acc += k * img.get(clamp(y as isize + dy, h), clamp(x as isize + dx, w), c);
                }
                out.set(y, x, c, acc);
            }
        }
    }
    out
}

/// Adjoint of [`laplacian`]: scatters each output gradient back onto the
/// (clamped) input positions it was read from.
pub fn laplacian_adjoint(grad: &Image) -> Image {
    let (h, w, ch) = (grad.height(), grad.width(), grad.channels());
    let mut out = Image::zeros(h, w, ch);
    let data = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let g = grad.get(y, x, c);
                if g == 0.0 {
                    continue;
                }
                for &(dy, dx, k) in &TAPS {
                    let sy = clamp(y as isize + dy, h);
                    let sx = clamp(x as isize + dx, w);
                    data[(sy * w + sx) * ch + c] += k * g;
                }
            }
        }
    }
    out
}
