//! Image and mask resampling helpers.
//!
//! All functions follow the pixel-center convention of [`crate::geometry`].

use crate::geometry::{BinaryMask, Point2};
use crate::nn::Tensor;
use image::{Rgb, RgbImage};

/// Continuous image center `(W/2, H/2)`.
pub fn image_center(width: u32, height: u32) -> Point2 {
    Point2::new(width as f64 / 2.0, height as f64 / 2.0)
}

/// Bilinear sample at continuous coordinates; `None` outside the image.
pub fn sample_bilinear(img: &RgbImage, x: f64, y: f64) -> Option<[f64; 3]> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if x < 0.0 || y < 0.0 || x > w || y > h {
        return None;
    }
    // index space: pixel i has its center at i
    let fx = (x - 0.5).clamp(0.0, w - 1.0);
    let fy = (y - 0.5).clamp(0.0, h - 1.0);
    let x0 = fx.floor() as u32;
    let y0 = fy.floor() as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let mut out = [0.0; 3];
    let p00 = img.get_pixel(x0, y0).0;
    let p10 = img.get_pixel(x1, y0).0;
    let p01 = img.get_pixel(x0, y1).0;
    let p11 = img.get_pixel(x1, y1).0;
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - tx) + p10[c] as f64 * tx;
        let bot = p01[c] as f64 * (1.0 - tx) + p11[c] as f64 * tx;
        out[c] = top * (1.0 - ty) + bot * ty;
    }
    Some(out)
}

fn to_rgb(v: [f64; 3]) -> Rgb<u8> {
    Rgb([
        v[0].round().clamp(0.0, 255.0) as u8,
        v[1].round().clamp(0.0, 255.0) as u8,
        v[2].round().clamp(0.0, 255.0) as u8,
    ])
}

/// Rotates an image about its center by `angle_deg` (bilinear), filling
/// uncovered pixels with `fill`.
pub fn rotate_image(img: &RgbImage, angle_deg: f64, fill: [u8; 3]) -> RgbImage {
    let c = image_center(img.width(), img.height());
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let q = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
        let p = q.rotate_about(c, -angle_deg);
        sample_bilinear(img, p.x, p.y).map_or(Rgb(fill), to_rgb)
    })
}

/// Rotates a mask about the image center by `angle_deg` (nearest neighbour).
pub fn rotate_mask(mask: &BinaryMask, angle_deg: f64) -> BinaryMask {
    let c = image_center(mask.width(), mask.height());
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        let q = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
        mask.contains_point(q.rotate_about(c, -angle_deg))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

pub fn flip_image(img: &RgbImage, axis: FlipAxis) -> RgbImage {
    let (w, h) = (img.width(), img.height());
    RgbImage::from_fn(w, h, |x, y| match axis {
        FlipAxis::Horizontal => *img.get_pixel(w - 1 - x, y),
        FlipAxis::Vertical => *img.get_pixel(x, h - 1 - y),
    })
}

pub fn flip_mask(mask: &BinaryMask, axis: FlipAxis) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(w, h, |x, y| match axis {
        FlipAxis::Horizontal => mask.get(w - 1 - x, y),
        FlipAxis::Vertical => mask.get(x, h - 1 - y),
    })
}

/// Mirror of a continuous point under [`flip_image`].
pub fn flip_point(p: Point2, axis: FlipAxis, width: u32, height: u32) -> Point2 {
    match axis {
        FlipAxis::Horizontal => Point2::new(width as f64 - p.x, p.y),
        FlipAxis::Vertical => Point2::new(p.x, height as f64 - p.y),
    }
}

/// Area-averaged resize of an RGB image to `size x size`, scaled to `[0, 1]`.
pub fn image_to_tensor(img: &RgbImage, size: usize) -> Tensor<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut t = Tensor::zeros(3, size, size);
    let plane = size * size;
    for oy in 0..size {
        let (y0, y1) = span(oy, size, h);
        for ox in 0..size {
            let (x0, x1) = span(ox, size, w);
            let mut acc = [0.0f64; 3];
            let mut wsum = 0.0;
            for (sy, wy) in weights(y0, y1) {
                for (sx, wx) in weights(x0, x1) {
                    let p = img.get_pixel(sx as u32, sy as u32).0;
                    let wt = wy * wx;
                    for c in 0..3 {
                        acc[c] += p[c] as f64 * wt;
                    }
                    wsum += wt;
                }
            }
            for c in 0..3 {
                t.data[c * plane + oy * size + ox] = (acc[c] / wsum / 255.0) as f32;
            }
        }
    }
    t
}

/// Fraction of each `size x size` cell covered by the mask.
pub fn mask_to_coverage(mask: &BinaryMask, size: usize) -> Vec<f32> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut out = vec![0.0f32; size * size];
    for oy in 0..size {
        let (y0, y1) = span(oy, size, h);
        for ox in 0..size {
            let (x0, x1) = span(ox, size, w);
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (sy, wy) in weights(y0, y1) {
                for (sx, wx) in weights(x0, x1) {
                    if mask.get(sx as u32, sy as u32) {
                        acc += wy * wx;
                    }
                    wsum += wy * wx;
                }
            }
            out[oy * size + ox] = (acc / wsum) as f32;
        }
    }
    out
}

/// Source interval covered by output cell `o`.
fn span(o: usize, out: usize, src: usize) -> (f64, f64) {
    let s = src as f64 / out as f64;
    (o as f64 * s, (o + 1) as f64 * s)
}

/// Source pixels overlapping `[a, b)` with their overlap lengths.
fn weights(a: f64, b: f64) -> impl Iterator<Item = (usize, f64)> {
    let first = a.floor() as usize;
    let last = (b.ceil() as usize).max(first + 1);
    (first..last).filter_map(move |i| {
        let lo = (i as f64).max(a);
        let hi = ((i + 1) as f64).min(b);
        (hi > lo).then_some((i, hi - lo))
    })
}

/// Bilinear upsampling of a `src x src` map to `width x height`.
pub fn upsample_map(map: &[f32], src: usize, width: u32, height: u32) -> Vec<f32> {
    let sx = src as f64 / width as f64;
    let sy = src as f64 / height as f64;
    let mut out = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (src - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src - 1);
        let ty = (fy - y0 as f64) as f32;
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (src - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src - 1);
            let tx = (fx - x0 as f64) as f32;
            let top = map[y0 * src + x0] * (1.0 - tx) + map[y0 * src + x1] * tx;
            let bot = map[y1 * src + x0] * (1.0 - tx) + map[y1 * src + x1] * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

/// Copy of `img` with every pixel outside `mask` set to black.
pub fn apply_mask(img: &RgbImage, mask: &BinaryMask) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        if mask.get(x, y) {
            *img.get_pixel(x, y)
        } else {
            Rgb([0, 0, 0])
        }
    })
}

/// Draws a line segment of the given thickness.
pub fn draw_segment(img: &mut RgbImage, a: Point2, b: Point2, thickness: f64, color: [u8; 3]) {
    let r = thickness / 2.0;
    let x0 = (a.x.min(b.x) - r).floor().max(0.0) as u32;
    let y0 = (a.y.min(b.y) - r).floor().max(0.0) as u32;
    let x1 = ((a.x.max(b.x) + r).ceil().max(0.0) as u32).min(img.width());
    let y1 = ((a.y.max(b.y) + r).ceil().max(0.0) as u32).min(img.height());
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    for y in y0..y1 {
        for x in x0..x1 {
            let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
            let t = if len2 > 0.0 {
                (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = Point2::new(a.x + t * dx, a.y + t * dy);
            if p.distance(q) <= r {
                img.put_pixel(x, y, Rgb(color));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dice, rasterize_rect, GraspRectangle};

    #[test]
    fn zero_rotation_is_identity() {
        let img = RgbImage::from_fn(9, 7, |x, y| Rgb([x as u8 * 20, y as u8 * 30, 7]));
        assert_eq!(rotate_image(&img, 0.0, [0, 0, 0]), img);
        let m = BinaryMask::from_fn(9, 7, |x, y| (x + y) % 3 == 0);
        assert_eq!(rotate_mask(&m, 0.0), m);
    }

    #[test]
    fn quarter_turn_of_mask_matches_rasterized_rotation() {
        let r = GraspRectangle::new(40.0, 30.0, 10.0, 30.0, 12.0).unwrap();
        let m = rasterize_rect(&r, 100, 100);
        let c = image_center(100, 100);
        let rc = r.center().rotate_about(c, 90.0);
        let r2 = GraspRectangle::new(rc.x, rc.y, 100.0, 30.0, 12.0).unwrap();
        let d = dice(&rotate_mask(&m, 90.0), &rasterize_rect(&r2, 100, 100)).unwrap();
        assert!(d > 0.97, "dice {d}");
    }

    #[test]
    fn flips_are_involutions() {
        let m = BinaryMask::from_fn(5, 4, |x, y| x == 0 && y == 1);
        for axis in [FlipAxis::Horizontal, FlipAxis::Vertical] {
            assert_eq!(flip_mask(&flip_mask(&m, axis), axis), m);
        }
        assert!(flip_mask(&m, FlipAxis::Horizontal).get(4, 1));
        let p = flip_point(Point2::new(0.5, 1.5), FlipAxis::Horizontal, 5, 4);
        assert_eq!(p, Point2::new(4.5, 1.5));
    }

    #[test]
    fn downsampling_averages_blocks() {
        let img = RgbImage::from_fn(8, 8, |x, _| if x < 4 { Rgb([255, 0, 0]) } else { Rgb([0, 0, 0]) });
        let t = image_to_tensor(&img, 2);
        assert_eq!(t.data[0], 1.0);
        assert_eq!(t.data[1], 0.0);
        let t3 = image_to_tensor(&img, 3);
        // middle column straddles the edge: 4/3 of its 8/3 width is red
        assert!((t3.data[1] - 0.5).abs() < 1e-6);
        let m = BinaryMask::from_fn(8, 8, |x, y| x < 4 && y < 2);
        let cov = mask_to_coverage(&m, 2);
        assert_eq!(cov, vec![0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn upsample_constant_and_ramp() {
        let up = upsample_map(&[0.25; 4], 2, 6, 6);
        assert!(up.iter().all(|v| (*v - 0.25).abs() < 1e-7));
        let up = upsample_map(&[0.0, 1.0, 0.0, 1.0], 2, 4, 4);
        assert_eq!(up[0], 0.0);
        assert_eq!(up[3], 1.0);
        assert!(up[1] > 0.0 && up[1] < up[2]);
    }
}
