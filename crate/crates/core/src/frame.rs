//! RGB frames, pixel boxes and bilinear resampling.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const CHANNELS: usize = 3;

/// One rasterized RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub sim_time_s: f64,
    pub wall_time_s: f64,
}

impl Frame {
    pub fn new(index: u64, width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize * CHANNELS, "pixel buffer size");
        Self { index, width, height, pixels, sim_time_s: 0.0, wall_time_s: 0.0 }
    }

    pub fn filled(index: u64, width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let pixels = rgb.repeat(width as usize * height as usize);
        Self::new(index, width, height, pixels)
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn full_box(&self) -> BBox {
        BBox { x0: 0, y0: 0, x1: self.width, y1: self.height }
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let stride = self.width as usize * CHANNELS;
        &self.pixels[y as usize * stride..(y as usize + 1) * stride]
    }

    /// Horizontal mirror, keeping index and timestamps.
    pub fn mirrored(&self) -> Frame {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set_pixel(self.width - 1 - x, y, self.pixel(x, y));
            }
        }
        out
    }

    /// Binary PPM (P6).
    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    pub fn save_ppm(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_ppm(std::io::BufWriter::new(f))
    }
}

/// Half-open pixel box `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    /// Nonempty and inside a `width × height` image.
    pub fn is_valid_in(&self, width: u32, height: u32) -> bool {
        !self.is_empty() && self.x1 <= width && self.y1 <= height
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

/// Fixed-point bilinear tap along one axis: two source offsets and the
/// weight of the second, out of 256.
#[derive(Debug, Clone, Copy)]
struct Tap {
    i0: usize,
    i1: usize,
    w1: u32,
}

fn taps(src_len: u32, out_len: u32) -> Vec<Tap> {
    let ratio = src_len as f64 / out_len as f64;
    let max = (src_len - 1) as f64;
    (0..out_len)
        .map(|o| {
            let s = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, max);
            let i0 = s.floor();
            let w1 = ((s - i0) * 256.0).round() as u32;
            let i0 = i0 as usize;
            Tap { i0, i1: (i0 + 1).min(src_len as usize - 1), w1 }
        })
        .collect()
}

/// Resamples `region` of `src` to `out_w × out_h` with pixel-center aligned
/// bilinear interpolation, clamping taps to the region edges.
///
/// Weights are 8-bit fixed point, so the result is bit-identical on every
/// platform. Same-size resampling copies bytes exactly and constant input
/// yields constant output.
pub fn resize_region(src: &Frame, region: BBox, out_w: u32, out_h: u32) -> Vec<u8> {
    assert!(region.is_valid_in(src.width, src.height), "region outside source");
    assert!(out_w > 0 && out_h > 0);
    let rw = region.width();
    let rh = region.height();
    let stride = src.width as usize * CHANNELS;
    let out_stride = out_w as usize * CHANNELS;
    let mut out = vec![0u8; out_stride * out_h as usize];

    if rw == out_w && rh == out_h {
        for y in 0..rh as usize {
            let s = (region.y0 as usize + y) * stride + region.x0 as usize * CHANNELS;
            out[y * out_stride..(y + 1) * out_stride].copy_from_slice(&src.pixels[s..s + out_stride]);
        }
        return out;
    }

    let xt = taps(rw, out_w);
    let yt = taps(rh, out_h);
    let x_base = region.x0 as usize * CHANNELS;
    let row_span = rw as usize * CHANNELS;

    // Background bands make most source rows a single color outside a short
    // span, and any output pixel whose taps miss every span is a plain
    // vertical blend of two colors. Only the pixels touching a span get the
    // full interpolation, and the horizontal pass runs once per source row.
    let mut rows: Vec<Option<HRow>> = vec![None; rh as usize];
    let mut hrow = |r: usize| -> HRow {
        rows[r]
            .get_or_insert_with(|| {
                let s = (region.y0 as usize + r) * stride + x_base;
                HRow::new(&src.pixels[s..s + row_span], &xt)
            })
            .clone()
    };

    let (mut top, mut bot) = (Vec::new(), Vec::new());
    for (oy, ty) in yt.iter().enumerate() {
        let wy1 = ty.w1;
        let wy0 = 256 - wy1;
        let h0 = hrow(ty.i0);
        let h1 = hrow(ty.i1);
        let dst = &mut out[oy * out_stride..(oy + 1) * out_stride];
        let mut px = [0u8; 3];
        for c in 0..3 {
            let v = (h0.color[c] as u32 * 256) * wy0 + (h1.color[c] as u32 * 256) * wy1;
            px[c] = ((v + 32768) >> 16) as u8;
        }
        let (a, b) = span_union(&h0, &h1);
        let (left, rest) = dst.split_at_mut(a * 3);
        let right = &mut rest[(b - a) * 3..];
        fill_rgb(left, px);
        fill_rgb(right, px);
        h0.fill(a, b, &mut top);
        h1.fill(a, b, &mut bot);
        for ((d, &t), &u) in dst[a * 3..b * 3].iter_mut().zip(&top).zip(&bot) {
            *d = ((t * wy0 + u * wy1 + 32768) >> 16) as u8;
        }
    }
    out
}

/// Pixel range `lo..hi` of an RGB row outside which every pixel has the
/// row's first color, or `None` for a uniform row.
pub(crate) fn off_color_span(row: &[u8]) -> Option<(usize, usize)> {
    if row.len() < 6 {
        return None;
    }
    let color = &row[..3];
    // Comparing the row with itself shifted by one pixel finds where it
    // stops repeating its first color.
    let (a, b) = (&row[3..], &row[..row.len() - 3]);
    let j = first_mismatch(a, b)?;
    let lo = j / 3 + 1;
    let j = last_mismatch(a, b).expect("a mismatch exists");
    // Past byte j the row repeats its last pixel, so when that pixel has
    // the first color the span ends with pixel j / 3.
    let n = row.len() / 3;
    let hi = if &row[(n - 1) * 3..] == color { j / 3 + 1 } else { n };
    Some((lo, hi))
}

/// Fills `dst` with repeats of `px` by doubling copies.
fn fill_rgb(dst: &mut [u8], px: [u8; 3]) {
    if dst.is_empty() {
        return;
    }
    dst[..3].copy_from_slice(&px);
    let mut done = 3;
    while done < dst.len() {
        let n = done.min(dst.len() - done);
        dst.copy_within(..n, done);
        done += n;
    }
}

/// One source row after the horizontal pass: `color * 256` everywhere
/// except output columns `start..start + vals.len() / 3`.
#[derive(Debug, Clone)]
struct HRow {
    color: [u8; 3],
    start: usize,
    vals: std::rc::Rc<Vec<u32>>,
}

impl HRow {
    fn new(row: &[u8], xt: &[Tap]) -> Self {
        let color = [row[0], row[1], row[2]];
        let Some((lo, hi)) = off_color_span(row) else {
            return HRow { color, start: 0, vals: Default::default() };
        };
        // Output columns with a tap inside lo..hi.
        let a = xt.partition_point(|t| t.i1 < lo);
        let b = xt.partition_point(|t| t.i0 < hi);
        let mut vals = Vec::with_capacity((b - a) * 3);
        for t in &xt[a..b] {
            let (wx1, wx0) = (t.w1, 256 - t.w1);
            for c in 0..3 {
                vals.push(row[t.i0 * 3 + c] as u32 * wx0 + row[t.i1 * 3 + c] as u32 * wx1);
            }
        }
        HRow { color, start: a, vals: std::rc::Rc::new(vals) }
    }

    fn end(&self) -> usize {
        self.start + self.vals.len() / 3
    }

    /// Writes the values of output columns `a..b` into `buf`.
    fn fill(&self, a: usize, b: usize, buf: &mut Vec<u32>) {
        buf.clear();
        let flat = self.color.map(|c| c as u32 * 256);
        let (s, e) = if self.vals.is_empty() { (b, b) } else { (self.start.clamp(a, b), self.end().clamp(a, b)) };
        for _ in a..s {
            buf.extend_from_slice(&flat);
        }
        if s < e {
            buf.extend_from_slice(&self.vals[(s - self.start) * 3..(e - self.start) * 3]);
        }
        for _ in e..b {
            buf.extend_from_slice(&flat);
        }
    }
}

/// Index of the first differing byte of two equally long slices.
fn first_mismatch(a: &[u8], b: &[u8]) -> Option<usize> {
    const K: usize = 64;
    let whole = a.len() / K * K;
    let block = a[..whole]
        .chunks_exact(K)
        .zip(b[..whole].chunks_exact(K))
        .position(|(x, y)| x != y)
        .map_or(whole, |i| i * K);
    a[block..].iter().zip(&b[block..]).position(|(x, y)| x != y).map(|i| block + i)
}

/// Index of the last differing byte of two equally long slices.
fn last_mismatch(a: &[u8], b: &[u8]) -> Option<usize> {
    const K: usize = 64;
    let n = a.len();
    let tail = n % K;
    let block = a[tail..]
        .rchunks_exact(K)
        .zip(b[tail..].rchunks_exact(K))
        .position(|(x, y)| x != y)
        .map_or(tail, |i| n - i * K);
    a[..block].iter().zip(&b[..block]).rposition(|(x, y)| x != y)
}

fn span_union(a: &HRow, b: &HRow) -> (usize, usize) {
    match (a.vals.is_empty(), b.vals.is_empty()) {
        (true, true) => (0, 0),
        (false, true) => (a.start, a.end()),
        (true, false) => (b.start, b.end()),
        (false, false) => (a.start.min(b.start), a.end().max(b.end())),
    }
}

/// Whole-frame bilinear resize; index and timestamps are preserved.
pub fn resize_frame(src: &Frame, out_w: u32, out_h: u32) -> Frame {
    let pixels = resize_region(src, src.full_box(), out_w, out_h);
    Frame {
        index: src.index,
        width: out_w,
        height: out_h,
        pixels,
        sim_time_s: src.sim_time_s,
        wall_time_s: src.wall_time_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker() -> Frame {
        let mut f = Frame::filled(0, 2, 2, [0, 0, 0]);
        f.set_pixel(0, 0, [255, 0, 0]);
        f.set_pixel(1, 0, [0, 255, 0]);
        f.set_pixel(0, 1, [0, 0, 255]);
        f.set_pixel(1, 1, [255, 255, 255]);
        f
    }

    /// Floating-point bilinear reference.
    fn reference(src: &Frame, ow: u32, oh: u32, x: u32, y: u32, c: usize) -> f64 {
        let sx = ((x as f64 + 0.5) * src.width as f64 / ow as f64 - 0.5).clamp(0.0, (src.width - 1) as f64);
        let sy = ((y as f64 + 0.5) * src.height as f64 / oh as f64 - 0.5).clamp(0.0, (src.height - 1) as f64);
        let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
        let (x1, y1) = ((x0 + 1).min(src.width - 1), (y0 + 1).min(src.height - 1));
        let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
        let p = |x, y| src.pixel(x, y)[c] as f64;
        (p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx) * (1.0 - fy) + (p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx) * fy
    }

    #[test]
    fn upscaled_checker_keeps_corner_colors() {
        let f = checker();
        let out = Frame::new(0, 112, 112, resize_region(&f, f.full_box(), 112, 112));
        assert_eq!(out.pixel(0, 0), [255, 0, 0]);
        assert_eq!(out.pixel(111, 0), [0, 255, 0]);
        assert_eq!(out.pixel(0, 111), [0, 0, 255]);
        assert_eq!(out.pixel(111, 111), [255, 255, 255]);
    }

    #[test]
    fn matches_float_reference_within_rounding() {
        let mut f = Frame::filled(0, 13, 7, [0, 0, 0]);
        for y in 0..7 {
            for x in 0..13 {
                f.set_pixel(x, y, [(x * 19 + y * 7) as u8, (x * y * 3) as u8, (200 - x * 11) as u8]);
            }
        }
        for (ow, oh) in [(5, 3), (29, 11), (13, 7), (8, 20)] {
            let out = Frame::new(0, ow, oh, resize_region(&f, f.full_box(), ow, oh));
            for y in 0..oh {
                for x in 0..ow {
                    for c in 0..3 {
                        let r = reference(&f, ow, oh, x, y, c);
                        let got = out.pixel(x, y)[c] as f64;
                        assert!((got - r).abs() <= 1.5, "({x},{y},{c}) {got} vs {r}");
                    }
                }
            }
        }
    }

    /// Every output pixel through the full fixed-point formula.
    fn naive(src: &Frame, region: BBox, ow: u32, oh: u32) -> Vec<u8> {
        let xt = taps(region.width(), ow);
        let yt = taps(region.height(), oh);
        let mut out = Vec::new();
        for ty in &yt {
            for tx in &xt {
                for c in 0..3 {
                    let p = |x: usize, y: usize| src.pixel(region.x0 + x as u32, region.y0 + y as u32)[c] as u32;
                    let top = p(tx.i0, ty.i0) * (256 - tx.w1) + p(tx.i1, ty.i0) * tx.w1;
                    let bot = p(tx.i0, ty.i1) * (256 - tx.w1) + p(tx.i1, ty.i1) * tx.w1;
                    out.push(((top * (256 - ty.w1) + bot * ty.w1 + 32768) >> 16) as u8);
                }
            }
        }
        out
    }

    #[test]
    fn span_shortcut_matches_naive_path() {
        let mut f = Frame::filled(0, 40, 30, [10, 20, 30]);
        for y in 15..30 {
            for x in 0..40 {
                f.set_pixel(x, y, [200, 100, 50]);
            }
        }
        f.set_pixel(7, 16, [0, 0, 0]);
        f.set_pixel(39, 3, [1, 2, 3]);
        f.set_pixel(0, 20, [9, 9, 9]);
        for (ow, oh) in [(23, 17), (40, 30), (80, 61), (7, 5)] {
            if (ow, oh) != (40, 30) {
                assert_eq!(resize_region(&f, f.full_box(), ow, oh), naive(&f, f.full_box(), ow, oh));
            }
        }
        let r = BBox::new(5, 10, 33, 24);
        assert_eq!(resize_region(&f, r, 112, 112), naive(&f, r, 112, 112));
    }

    proptest::proptest! {
        #[test]
        fn resize_equals_naive(
            w in 2u32..40, h in 2u32..30, ow in 1u32..60, oh in 1u32..60,
            blobs in proptest::collection::vec((0u32..40, 0u32..30, 0u8..=255), 0..12),
        ) {
            let mut f = Frame::filled(0, w, h, [120, 160, 200]);
            for y in h / 2..h {
                for x in 0..w {
                    f.set_pixel(x, y, [90, 90, 95]);
                }
            }
            for (x, y, v) in blobs {
                f.set_pixel(x % w, y % h, [v, v / 2, 255 - v]);
            }
            let r = f.full_box();
            if (ow, oh) != (w, h) {
                proptest::prop_assert_eq!(resize_region(&f, r, ow, oh), naive(&f, r, ow, oh));
            }
        }
    }

    #[test]
    fn bbox_basics() {
        let b = BBox::new(2, 3, 10, 5);
        assert_eq!((b.width(), b.height(), b.area()), (8, 2, 16));
        assert!(b.is_valid_in(10, 5));
        assert!(!b.is_valid_in(9, 5));
        assert!(BBox::new(3, 3, 3, 4).is_empty());
    }

    #[test]
    fn ppm_header() {
        let f = Frame::filled(0, 2, 1, [1, 2, 3]);
        let mut buf = Vec::new();
        f.write_ppm(&mut buf).unwrap();
        assert_eq!(&buf[..11], b"P6\n2 1\n255\n");
        assert_eq!(&buf[11..], &[1, 2, 3, 1, 2, 3]);
    }
}
