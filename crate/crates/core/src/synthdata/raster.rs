use crate::imaging::Image;

/// One rain streak.
///
/// `angle` is the orientation of the streak's normal in degrees, measured
/// from +x with y pointing down: 0 is a vertical streak, 90 a horizontal
/// one. This is the direction its intensity gradient points in, so a layer
/// of `angle = a` streaks puts its HOG mass at `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Streak {
    pub cx: f64,
    pub cy: f64,
    pub angle: f64,
    pub length: f64,
    pub width: f64,
    pub intensity: f64,
}

impl Streak {
    /// Unit vector along the streak.
    pub fn direction(&self) -> (f64, f64) {
        let t = self.angle.to_radians();
        (-t.sin(), t.cos())
    }
}

/// Rasterizes anti-aliased segments into a 1-channel `size x size` layer,
/// saturating at 1.
pub fn rasterize(size: usize, streaks: &[Streak]) -> Image {
    let mut layer = Image::zeros(size, size, 1);
    for s in streaks {
        draw(&mut layer, s);
    }
    layer
}

fn draw(layer: &mut Image, s: &Streak) {
    let size = layer.width() as isize;
    let (dx, dy) = s.direction();
    let half = s.length / 2.0;
    let reach = half + s.width / 2.0 + 1.0;
    let x0 = ((s.cx - reach).floor() as isize).max(0);
    let x1 = ((s.cx + reach).ceil() as isize).min(size - 1);
    let y0 = ((s.cy - reach).floor() as isize).max(0);
    let y1 = ((s.cy + reach).ceil() as isize).min(size - 1);
    let data = layer.data_mut();
    for py in y0..=y1 {
        for px in x0..=x1 {
            let (rx, ry) = (px as f64 - s.cx, py as f64 - s.cy);
            let t = (rx * dx + ry * dy).clamp(-half, half);
            let (ex, ey) = (rx - t * dx, ry - t * dy);
            let dist = (ex * ex + ey * ey).sqrt();
            let coverage = (s.width / 2.0 + 0.5 - dist).clamp(0.0, 1.0);
            if coverage > 0.0 {
                let i = (py * size + px) as usize;
                data[i] = (data[i] + s.intensity * coverage).min(1.0);
            }
        }
    }
}
