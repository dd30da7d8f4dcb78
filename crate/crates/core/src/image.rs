//! Image files: binary PPM/PGM and raw planar bytes with a `.dims` sidecar,
//! plus the replicate-edge padding applied before coding.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Parse a binary `P6` (RGB) or `P5` (grey) file with maxval 255.
pub fn read_pnm(bytes: &[u8]) -> Result<Tensor<u8>> {
    let bad = |m: &str| Error::UnsupportedImage(m.to_owned());
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let channels = match token()?.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(Error::UnsupportedImage(format!("magic {other:?}, expected P5 or P6"))),
    };
    let mut number = || -> Result<usize> { token()?.parse().map_err(|_| bad("malformed header number")) };
    let width = number()?;
    let height = number()?;
    let maxval = number()?;
    if maxval != 255 {
        return Err(Error::UnsupportedImage(format!("maxval {maxval}, only 8-bit images are supported")));
    }
    if width == 0 || height == 0 {
        return Err(bad("empty image"));
    }
    // exactly one whitespace byte separates the header from the raster
    let body = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
    let n = channels * width * height;
    if body.len() != n {
        return Err(Error::UnsupportedImage(format!("raster holds {} bytes, expected {n}", body.len())));
    }
    Ok(Tensor::from_fn(channels, height, width, |c, y, x| body[(y * width + x) * channels + c]))
}

/// Serialize with the canonical header `P6\n{w} {h}\n255\n` (`P5` for one
/// channel).
pub fn write_pnm(t: &Tensor<u8>) -> Result<Vec<u8>> {
    let magic = match t.channels() {
        3 => "P6",
        1 => "P5",
        c => return Err(Error::UnsupportedImage(format!("{c} channels cannot be written as PNM"))),
    };
    let (c, h, w) = (t.channels(), t.height(), t.width());
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.reserve(c * h * w);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.push(t.get(ch, y, x));
            }
        }
    }
    Ok(out)
}

/// `<path>.dims`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".dims");
    PathBuf::from(s)
}

/// Sidecar contents: `C H W`.
pub fn parse_dims(text: &str) -> Result<(usize, usize, usize)> {
    let v: Vec<usize> = text
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::UnsupportedImage(format!("bad dims sidecar {text:?}")))?;
    match v[..] {
        [c, h, w] if c > 0 && h > 0 && w > 0 => Ok((c, h, w)),
        _ => Err(Error::UnsupportedImage(format!("dims sidecar needs three positive numbers, got {text:?}"))),
    }
}

fn is_pnm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "pgm" | "pnm"))
}

/// Load a PNM file, or raw planar bytes described by `<path>.dims`.
pub fn load_image(path: &Path) -> Result<Tensor<u8>> {
    let bytes = fs::read(path)?;
    if is_pnm(path) || bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
        return read_pnm(&bytes);
    }
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(Error::UnsupportedImage(format!(
            "{} is neither PPM nor raw with a {} sidecar",
            path.display(),
            side.display()
        )));
    }
    let (c, h, w) = parse_dims(&fs::read_to_string(side)?)?;
    Tensor::from_vec(c, h, w, bytes)
        .map_err(|_| Error::UnsupportedImage(format!("raw file size does not match {c}x{h}x{w}")))
}

/// Write PNM for `.ppm`/`.pgm`/`.pnm` paths, raw planar plus sidecar otherwise.
pub fn save_image(path: &Path, t: &Tensor<u8>) -> Result<()> {
    if is_pnm(path) {
        fs::write(path, write_pnm(t)?)?;
    } else {
        fs::write(path, t.data())?;
        fs::write(sidecar_path(path), format!("{} {} {}\n", t.channels(), t.height(), t.width()))?;
    }
    Ok(())
}

/// Smallest multiple of `m` that is at least `n`.
pub fn round_up(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Extend to the next multiple of `multiple` by repeating the last row and
/// column.
pub fn pad_replicate<T: Copy>(t: &Tensor<T>, multiple: usize) -> Tensor<T> {
    let (h, w) = (t.height(), t.width());
    let (ph, pw) = (round_up(h, multiple), round_up(w, multiple));
    if (ph, pw) == (h, w) {
        return t.clone();
    }
    Tensor::from_fn(t.channels(), ph, pw, |c, y, x| t.get(c, y.min(h - 1), x.min(w - 1)))
}

/// Top-left `height x width` window.
pub fn crop<T: Copy>(t: &Tensor<T>, height: usize, width: usize) -> Result<Tensor<T>> {
    if height > t.height() || width > t.width() {
        return Err(Error::ShapeMismatch {
            expected: vec![t.channels(), height, width],
            found: t.shape().to_vec(),
        });
    }
    Ok(Tensor::from_fn(t.channels(), height, width, |c, y, x| t.get(c, y, x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_is_byte_exact() {
        let t = Tensor::from_fn(3, 2, 3, |c, y, x| (c * 100 + y * 10 + x) as u8);
        let bytes = write_pnm(&t).unwrap();
        assert!(bytes.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 18);
        // interleaved raster
        assert_eq!(&bytes[11..14], &[0, 100, 200]);
        assert_eq!(read_pnm(&bytes).unwrap(), t);
    }

    #[test]
    fn header_comments_and_errors() {
        let mut b = b"P5 # grey\n2 1\n# max\n255\n".to_vec();
        b.extend([7, 9]);
        let t = read_pnm(&b).unwrap();
        assert_eq!(t.shape(), [1, 1, 2]);
        assert_eq!(t.data(), &[7, 9]);
        assert!(read_pnm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(read_pnm(b"P6\n1 1\n65535\n\0\0\0\0\0\0").is_err());
        assert!(read_pnm(b"P6\n2 2\n255\n\0\0\0").is_err());
    }

    #[test]
    fn replicate_padding() {
        let t = Tensor::from_fn(1, 33, 33, |_, y, x| (y * 33 + x) as u16);
        let p = pad_replicate(&t, 2);
        assert_eq!(p.shape(), [1, 34, 34]);
        assert_eq!(p.get(0, 33, 33), t.get(0, 32, 32));
        assert_eq!(p.get(0, 33, 5), t.get(0, 32, 5));
        assert_eq!(p.get(0, 7, 33), t.get(0, 7, 32));
        assert_eq!(crop(&p, 33, 33).unwrap(), t);
        assert_eq!(pad_replicate(&t, 1), t);
    }

    #[test]
    fn dims_sidecar() {
        assert_eq!(parse_dims("3 4 5\n").unwrap(), (3, 4, 5));
        assert!(parse_dims("3 4").is_err());
        assert!(parse_dims("3 0 5").is_err());
        assert_eq!(sidecar_path(Path::new("a/b.raw")), PathBuf::from("a/b.raw.dims"));
    }
}
