//! Interleaved-RGB image buffers, codec support and bilinear resampling.

use super::{DataError, Result};
use crate::tensor::Tensor;
use std::path::Path;

/// 8-bit RGB image, row-major interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DataError::ZeroDimension { path: "<memory>".into() });
        }
        assert_eq!(pixels.len(), width * height * 3, "pixel buffer size mismatch");
        Ok(Image { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Image::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * 3 + c]
    }

    /// Sample one channel at a fractional position with bilinear weights,
    /// clamping coordinates to the image border.
    pub fn sample_bilinear(&self, x: f32, y: f32, c: usize) -> f32 {
        let x = x.max(0.0).min((self.width - 1) as f32);
        let y = y.max(0.0).min((self.height - 1) as f32);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f32;
        let fy = y - y0 as f32;
        let p00 = self.get(x0, y0, c) as f32;
        let p10 = self.get(x1, y0, c) as f32;
        let p01 = self.get(x0, y1, c) as f32;
        let p11 = self.get(x1, y1, c) as f32;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        top + (bottom - top) * fy
    }

    /// Bilinear resize with half-pixel-center coordinates.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Image> {
        if width == 0 || height == 0 {
            return Err(DataError::ZeroDimension { path: "<resize target>".into() });
        }
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            let src_y = (y as f32 + 0.5) * sy - 0.5;
            for x in 0..width {
                let src_x = (x as f32 + 0.5) * sx - 0.5;
                for c in 0..3 {
                    pixels.push(self.sample_bilinear(src_x, src_y, c).round() as u8);
                }
            }
        }
        Image::new(width, height, pixels)
    }

    /// Decode a PNG or baseline JPEG file, sniffing the format from its
    /// magic bytes. Anything else is rejected.
    pub fn decode_file(path: &Path) -> Result<Image> {
        let bytes = std::fs::read(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::decode_bytes(&bytes, path)
    }

    fn decode_bytes(bytes: &[u8], path: &Path) -> Result<Image> {
        if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
            decode_png(bytes, path)
        } else if bytes.starts_with(&[0xFF, 0xD8]) {
            decode_jpeg(bytes, path)
        } else {
            Err(DataError::Decode {
                path: path.to_path_buf(),
                reason: "unsupported format (expected 8-bit PNG or baseline JPEG)".into(),
            })
        }
    }

    /// Cheap validity probe: parses the header only.
    pub fn probe_file(path: &Path) -> Result<(usize, usize)> {
        let bytes = std::fs::read(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
            let decoder = png::Decoder::new(bytes.as_slice());
            let reader = decoder.read_info().map_err(|e| DataError::Decode {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            let info = reader.info();
            Ok((info.width as usize, info.height as usize))
        } else if bytes.starts_with(&[0xFF, 0xD8]) {
            let mut decoder = jpeg_decoder::Decoder::new(bytes.as_slice());
            decoder.read_info().map_err(|e| DataError::Decode {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            let info = decoder.info().ok_or_else(|| DataError::Decode {
                path: path.to_path_buf(),
                reason: "missing jpeg header info".into(),
            })?;
            Ok((info.width as usize, info.height as usize))
        } else {
            Err(DataError::Decode {
                path: path.to_path_buf(),
                reason: "unsupported format (expected 8-bit PNG or baseline JPEG)".into(),
            })
        }
    }

    /// Write as an 8-bit RGB PNG; fixed encoder settings keep the output
    /// byte-stable for identical pixels.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut encoder = png::Encoder::new(
            std::io::BufWriter::new(file),
            self.width as u32,
            self.height as u32,
        );
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| DataError::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        writer.write_image_data(&self.pixels).map_err(|e| DataError::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(())
    }
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Image> {
    let fail = |reason: String| DataError::Decode { path: path.to_path_buf(), reason };
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(|e| fail(e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| fail(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(fail(format!("{:?} bit depth, only 8-bit is supported", info.bit_depth)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    if w == 0 || h == 0 {
        return Err(DataError::ZeroDimension { path: path.to_path_buf() });
    }
    let raw = &buf[..info.buffer_size()];
    let pixels = match info.color_type {
        png::ColorType::Rgb => raw.to_vec(),
        png::ColorType::Rgba => raw.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => raw.iter().flat_map(|&v| [v, v, v]).collect(),
        png::ColorType::GrayscaleAlpha => {
            raw.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect()
        }
        other => return Err(fail(format!("unsupported png color type {other:?}"))),
    };
    Image::new(w, h, pixels)
}

fn decode_jpeg(bytes: &[u8], path: &Path) -> Result<Image> {
    let fail = |reason: String| DataError::Decode { path: path.to_path_buf(), reason };
    let mut decoder = jpeg_decoder::Decoder::new(bytes);
    let raw = decoder.decode().map_err(|e| fail(e.to_string()))?;
    let info = decoder.info().ok_or_else(|| fail("missing jpeg header info".into()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    if w == 0 || h == 0 {
        return Err(DataError::ZeroDimension { path: path.to_path_buf() });
    }
    let pixels = match info.pixel_format {
        jpeg_decoder::PixelFormat::RGB24 => raw,
        jpeg_decoder::PixelFormat::L8 => raw.iter().flat_map(|&v| [v, v, v]).collect(),
        other => return Err(fail(format!("unsupported jpeg pixel format {other:?}"))),
    };
    Image::new(w, h, pixels)
}

/// Bilinear-resize to `(height, width)` and scale `[0,255]` to `[0.0,1.0]`,
/// producing a `[3,height,width]` tensor. Sampling happens in `f32`, so no
/// quantization step sits between the source pixels and the tensor.
pub fn preprocess(image: &Image, height: usize, width: usize) -> Result<Tensor<f32>> {
    if height == 0 || width == 0 {
        return Err(DataError::ZeroDimension { path: "<preprocess target>".into() });
    }
    let sx = image.width() as f32 / width as f32;
    let sy = image.height() as f32 / height as f32;
    let mut data = vec![0.0f32; 3 * height * width];
    for c in 0..3 {
        for y in 0..height {
            let src_y = (y as f32 + 0.5) * sy - 0.5;
            for x in 0..width {
                let src_x = (x as f32 + 0.5) * sx - 0.5;
                data[(c * height + y) * width + x] =
                    image.sample_bilinear(src_x, src_y, c) / 255.0;
            }
        }
    }
    Ok(Tensor::new(data, &[3, height, width]).expect("shape consistent"))
}
