//! Image loading, field preprocessing and visual output.
//!
//! Samples are held as `f64` in `[0, 1]`; 8-bit files are mapped by `v / 255`
//! on load and by `round(v * 255)` on save. PPM (`P6`) is the bit-exact
//! interchange format; PNG is supported for convenience. Single-channel maps
//! are written as PGM (`P5`), 8- or 16-bit.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::saliency::{InterestPoint, InterestPointSet};

/// Half the side of the square marker drawn for blurred-scale points (side 11).
pub const SQUARE_HALF_SIDE: i64 = 5;
/// Radius of the circle marker drawn for raw-scale points.
pub const CIRCLE_RADIUS: i64 = 5;
/// Marker color (green), RGB in `[0, 1]`.
pub const MARKER_COLOR: [f64; 3] = [0.0, 1.0, 0.0];

/// Row-major raster with 1 or 3 channels of samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Contract(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Contract(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Contract(format!("sample {bad} outside [0, 1]")));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image with every pixel set to `pixel` (length = channel count).
    pub fn filled(width: usize, height: usize, pixel: &[f64]) -> Result<Self> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        RasterImage::new(width, height, pixel.len(), data)
    }

    /// Build a 3-channel image from interleaved 8-bit RGB.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::Contract(format!(
                "rgb8 buffer of {} bytes does not match {width}x{height}",
                bytes.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels: 3,
            data: bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        })
    }

    /// Single-channel image from a plane of samples.
    pub fn from_plane(plane: &Grid<f64>) -> Result<Self> {
        RasterImage::new(plane.width(), plane.height(), 1, plane.as_slice().to_vec())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Extract channel `c` as a grid.
    pub fn plane(&self, c: usize) -> Grid<f64> {
        assert!(c < self.channels, "channel {c} out of range");
        Grid::from_fn(self.width, self.height, |x, y| self.pixel(x, y)[c])
    }

    /// Quantize to interleaved 8-bit samples.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| unit_to_u8(v)).collect()
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.pixel_mut(x, y)
                    .copy_from_slice(self.pixel(self.width - 1 - x, y));
            }
        }
        out
    }
}

#[inline]
fn unit_to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Load a PPM/PGM or PNG file as a 3-channel image.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes, path)
}

/// Decode in-memory file contents; `path` is used for error messages only.
pub fn decode_image(bytes: &[u8], path: &Path) -> Result<RasterImage> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes, path)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
        decode_pnm(bytes, path)
    } else if bytes.is_empty() {
        Err(Error::format(path, "empty file"))
    } else {
        Err(Error::format(path, "unrecognized file signature"))
    }
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<RasterImage> {
    let fail = |e: png::DecodingError| Error::format(path, e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(fail)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(fail)?;
    let buf = &buf[..info.buffer_size()];
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(Error::format(path, "palette was not expanded"));
        }
    };
    if info.bit_depth != png::BitDepth::Eight || buf.len() != w * h * stride {
        return Err(Error::format(path, "unexpected decoded layout"));
    }
    let mut rgb = Vec::with_capacity(w * h * 3);
    for px in buf.chunks_exact(stride) {
        if stride < 3 {
            rgb.extend_from_slice(&[px[0]; 3]);
        } else {
            rgb.extend_from_slice(&px[..3]);
        }
    }
    RasterImage::from_rgb8(w, h, &rgb)
}

/// Parse a binary PNM header, returning (magic, width, height, maxval, data offset).
fn parse_pnm_header(bytes: &[u8], path: &Path) -> Result<(u8, usize, usize, u32, usize)> {
    let magic = bytes[1];
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "malformed PNM header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "PNM header value out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(path, "malformed PNM header"));
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::format(path, "invalid PNM dimensions or maxval"));
    }
    Ok((magic, w as usize, h as usize, maxval as u32, pos + 1))
}

fn decode_pnm(bytes: &[u8], path: &Path) -> Result<RasterImage> {
    let (magic, w, h, maxval, offset) = parse_pnm_header(bytes, path)?;
    let src_channels = if magic == b'6' { 3 } else { 1 };
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let count = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(src_channels))
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let body = &bytes[offset..];
    if body.len() < count * sample_bytes {
        return Err(Error::format(path, "truncated pixel data"));
    }
    let max = f64::from(maxval);
    let sample = |i: usize| -> f64 {
        let v = if sample_bytes == 1 {
            u32::from(body[i])
        } else {
            u32::from(u16::from_be_bytes([body[2 * i], body[2 * i + 1]]))
        };
        (f64::from(v) / max).min(1.0)
    };
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        if src_channels == 3 {
            data.extend((0..3).map(|c| sample(3 * i + c)));
        } else {
            let v = sample(i);
            data.extend_from_slice(&[v, v, v]);
        }
    }
    Ok(RasterImage {
        width: w,
        height: h,
        channels: 3,
        data,
    })
}

/// Encode a 3-channel image as binary PPM (`P6`, maxval 255).
pub fn encode_ppm(img: &RasterImage) -> Result<Vec<u8>> {
    if img.channels != 3 {
        return Err(Error::Contract("PPM output needs 3 channels".into()));
    }
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_u8());
    Ok(out)
}

/// Encode a single-channel grid as 8-bit binary PGM.
pub fn encode_pgm8(plane: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend_from_slice(plane.as_slice());
    out
}

/// Encode a single-channel grid as 16-bit binary PGM (big-endian samples).
pub fn encode_pgm16(plane: &Grid<u16>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", plane.width(), plane.height()).into_bytes();
    for v in plane.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Encode as 8-bit PNG (RGB or grayscale by channel count).
pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        encoder.set_color(if img.channels == 3 {
            png::ColorType::Rgb
        } else {
            png::ColorType::Grayscale
        });
        encoder.set_depth(png::BitDepth::Eight);
        let to_contract = |e: png::EncodingError| Error::Contract(format!("PNG encoding: {e}"));
        let mut writer = encoder.write_header().map_err(to_contract)?;
        writer.write_image_data(&img.to_u8()).map_err(to_contract)?;
        writer.finish().map_err(to_contract)?;
    }
    Ok(out)
}

/// Save by extension: `.png`, `.ppm`, or `.pgm` (single-channel only).
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let bytes = match ext.as_deref() {
        Some("png") => encode_png(img)?,
        Some("ppm") => encode_ppm(img)?,
        Some("pgm") if img.channels == 1 => {
            encode_pgm8(&Grid::from_vec(img.width, img.height, img.to_u8()).expect("shape"))
        }
        _ => return Err(Error::format(path, "unsupported output format")),
    };
    write_bytes(path, &bytes)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Average non-overlapping `factor x factor` blocks. Trailing rows and
/// columns that do not fill a whole block are dropped.
pub fn downsample(img: &RasterImage, factor: usize) -> Result<RasterImage> {
    if factor == 0 {
        return Err(Error::Contract("downsample factor must be positive".into()));
    }
    let (w, h) = (img.width / factor, img.height / factor);
    if w == 0 || h == 0 {
        return Err(Error::Dimension(format!(
            "{}x{} image is smaller than one {factor}x{factor} block",
            img.width, img.height
        )));
    }
    let c = img.channels;
    let area = (factor * factor) as f64;
    let mut data = vec![0.0; w * h * c];
    for y in 0..h {
        for x in 0..w {
            let out = &mut data[(y * w + x) * c..(y * w + x + 1) * c];
            for by in 0..factor {
                for bx in 0..factor {
                    let px = img.pixel(x * factor + bx, y * factor + by);
                    for (o, s) in out.iter_mut().zip(px) {
                        *o += s;
                    }
                }
            }
            for o in out.iter_mut() {
                *o = (*o / area).clamp(0.0, 1.0);
            }
        }
    }
    Ok(RasterImage {
        width: w,
        height: h,
        channels: c,
        data,
    })
}

/// Cut a `crop_w x crop_h` window out of the middle, offsets floored.
pub fn center_crop(img: &RasterImage, crop_w: usize, crop_h: usize) -> Result<RasterImage> {
    if crop_w == 0 || crop_h == 0 {
        return Err(Error::Contract("crop size must be positive".into()));
    }
    if img.width < crop_w || img.height < crop_h {
        return Err(Error::Dimension(format!(
            "{}x{} image cannot be cropped to {crop_w}x{crop_h}",
            img.width, img.height
        )));
    }
    let x0 = (img.width - crop_w) / 2;
    let y0 = (img.height - crop_h) / 2;
    let c = img.channels;
    let mut data = Vec::with_capacity(crop_w * crop_h * c);
    for y in y0..y0 + crop_h {
        let row = (y * img.width + x0) * c;
        data.extend_from_slice(&img.data[row..row + crop_w * c]);
    }
    Ok(RasterImage {
        width: crop_w,
        height: crop_h,
        channels: c,
        data,
    })
}

/// Downsample by `factor`, then center-crop to `crop_w x crop_h`.
pub fn preprocess(
    img: &RasterImage,
    downsample_factor: usize,
    crop_w: usize,
    crop_h: usize,
) -> Result<RasterImage> {
    let small = downsample(img, downsample_factor)?;
    center_crop(&small, crop_w, crop_h)
}

/// Perimeter pixels of the square marker centered on `(cx, cy)`, clipped to
/// the image.
pub fn square_marker_pixels(
    cx: usize,
    cy: usize,
    width: usize,
    height: usize,
) -> Vec<(usize, usize)> {
    let r = SQUARE_HALF_SIDE;
    marker_pixels(cx, cy, width, height, |dx, dy| dx.abs().max(dy.abs()) == r)
}

/// Ring pixels of the circle marker centered on `(cx, cy)`: pixels whose
/// distance from the center rounds to the radius.
pub fn circle_marker_pixels(
    cx: usize,
    cy: usize,
    width: usize,
    height: usize,
) -> Vec<(usize, usize)> {
    let r = CIRCLE_RADIUS;
    // (r - 1/2)^2 <= d^2 < (r + 1/2)^2, in integers
    let lo = r * r - r + 1;
    let hi = r * r + r;
    marker_pixels(cx, cy, width, height, |dx, dy| {
        let d2 = dx * dx + dy * dy;
        (lo..=hi).contains(&d2)
    })
}

fn marker_pixels(
    cx: usize,
    cy: usize,
    width: usize,
    height: usize,
    on: impl Fn(i64, i64) -> bool,
) -> Vec<(usize, usize)> {
    let r = SQUARE_HALF_SIDE.max(CIRCLE_RADIUS);
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (cx as i64 + dx, cy as i64 + dy);
            if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height && on(dx, dy) {
                out.push((x as usize, y as usize));
            }
        }
    }
    out
}

/// Copy of `img` with blurred-scale points drawn as hollow squares and
/// raw-scale points as hollow circles.
pub fn render_overlay(img: &RasterImage, points: &InterestPointSet) -> Result<RasterImage> {
    if img.channels != 3 {
        return Err(Error::Contract("overlay needs a 3-channel image".into()));
    }
    let check = |p: &InterestPoint| {
        if p.x >= img.width || p.y >= img.height {
            Err(Error::Contract(format!(
                "point ({}, {}) outside {}x{} image",
                p.x, p.y, img.width, img.height
            )))
        } else {
            Ok(())
        }
    };
    for p in points.blurred.points.iter().chain(&points.raw.points) {
        check(p)?;
    }
    let mut out = img.clone();
    let mut paint = |pixels: Vec<(usize, usize)>| {
        for (x, y) in pixels {
            out.pixel_mut(x, y).copy_from_slice(&MARKER_COLOR);
        }
    };
    for p in &points.blurred.points {
        paint(square_marker_pixels(p.x, p.y, img.width, img.height));
    }
    for p in &points.raw.points {
        paint(circle_marker_pixels(p.x, p.y, img.width, img.height));
    }
    Ok(out)
}
