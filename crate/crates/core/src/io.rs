//! PGM images, synthetic test images, noise, PSNR and the trace CSV.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::driver::Trace;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Shape};

/// Reads a P2 or P5 graymap, scaling samples to `[0, 1]` by `1 / maxval`.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_pgm(&bytes).map_err(|reason| Error::Pgm {
        path: path.to_owned(),
        reason,
    })
}

/// Writes a P5 graymap, clamping to `[0, 1]` and rounding `v * maxval`.
pub fn write_pgm(path: impl AsRef<Path>, u: &ScalarField, maxval: u16) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(u, maxval).map_err(|reason| Error::Pgm {
        path: path.to_owned(),
        reason,
    })?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_pgm(u: &ScalarField, maxval: u16) -> Result<Vec<u8>, String> {
    if maxval != 255 && maxval != 65535 {
        return Err(format!("maxval must be 255 or 65535, got {maxval}"));
    }
    let mut out = format!("P5\n{} {}\n{}\n", u.width(), u.height(), maxval).into_bytes();
    let m = f64::from(maxval);
    for &v in u.as_slice() {
        let q = (v.clamp(0.0, 1.0) * m).round() as u16;
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ScalarField, String> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token().ok_or("missing magic number")?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(format!(
                "unsupported magic {:?}, expected P2 or P5",
                String::from_utf8_lossy(other)
            ))
        }
    };
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval = cur.header_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("invalid dimensions {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let count = width
        .checked_mul(height)
        .ok_or("image dimensions overflow")?;
    let scale = 1.0 / maxval as f64;
    let mut values = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        match cur.bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err("missing whitespace after maxval".into()),
        }
        let wide = maxval > 255;
        let needed = count * if wide { 2 } else { 1 };
        let raster = &cur.bytes[cur.pos..];
        if raster.len() < needed {
            return Err(format!(
                "truncated raster: {} of {needed} bytes",
                raster.len()
            ));
        }
        for i in 0..count {
            let v = if wide {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as usize
            } else {
                raster[i] as usize
            };
            if v > maxval {
                return Err(format!("sample {v} exceeds maxval {maxval}"));
            }
            values.push(v as f64 * scale);
        }
    } else {
        for i in 0..count {
            let tok = cur
                .token()
                .ok_or_else(|| format!("truncated raster: {i} of {count} samples"))?;
            let v: usize = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("bad sample {:?}", String::from_utf8_lossy(tok)))?;
            if v > maxval {
                return Err(format!("sample {v} exceeds maxval {maxval}"));
            }
            values.push(v as f64 * scale);
        }
    }
    ScalarField::from_vec(Shape::new(height, width), values).map_err(|e| e.to_string())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Next whitespace-delimited token, skipping `#` comments.
    fn token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<usize, String> {
        let tok = self
            .token()
            .ok_or_else(|| format!("malformed header: missing {what}"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                format!(
                    "malformed header: bad {what} {:?}",
                    String::from_utf8_lossy(tok)
                )
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Horizontal bands at `levels` equally spaced intensities.
    Staircase,
    /// Linear ramp from 0 at the left column to 1 at the right.
    Ramp,
    /// Intensity-1 centred disk of radius `min(H, W) / 4` on a zero background.
    Disk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub shape: Shape,
    pub levels: usize,
}

pub const DEFAULT_LEVELS: usize = 4;

impl FromStr for SyntheticSpec {
    type Err = Error;

    /// Parses `KIND:HxW[:LEVELS]`.
    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason: &str| Error::Synthetic {
            spec: s.to_owned(),
            reason: reason.to_owned(),
        };
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(fail("expected KIND:HxW[:LEVELS]"));
        }
        let kind = match parts[0] {
            "staircase" => SyntheticKind::Staircase,
            "ramp" => SyntheticKind::Ramp,
            "disk" => SyntheticKind::Disk,
            _ => return Err(fail("kind must be staircase, ramp or disk")),
        };
        let (h, w) = parts[1]
            .split_once(['x', 'X'])
            .ok_or_else(|| fail("size must look like 32x32"))?;
        let height: usize = h.parse().map_err(|_| fail("bad height"))?;
        let width: usize = w.parse().map_err(|_| fail("bad width"))?;
        let levels = match parts.get(2) {
            Some(l) => l.parse().map_err(|_| fail("bad level count"))?,
            None => DEFAULT_LEVELS,
        };
        let spec = SyntheticSpec {
            kind,
            shape: Shape::new(height, width),
            levels,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Error::Synthetic {
            spec: format!("{self:?}"),
            reason: reason.to_owned(),
        };
        if self.shape.height == 0 || self.shape.width == 0 {
            return Err(fail("size must be positive"));
        }
        if self.kind == SyntheticKind::Staircase && self.levels < 2 {
            return Err(fail("a staircase needs at least 2 levels"));
        }
        Ok(())
    }
}

pub fn synth(spec: &SyntheticSpec) -> Result<ScalarField> {
    spec.validate()?;
    let Shape { height, width } = spec.shape;
    let field = match spec.kind {
        SyntheticKind::Staircase => {
            let top = (spec.levels - 1) as f64;
            ScalarField::from_scalar_fn(spec.shape, |i, _| {
                let band = i * spec.levels / height;
                band as f64 / top
            })
        }
        SyntheticKind::Ramp => ScalarField::from_scalar_fn(spec.shape, |_, j| {
            if width > 1 {
                j as f64 / (width - 1) as f64
            } else {
                0.0
            }
        }),
        SyntheticKind::Disk => {
            let (ci, cj) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
            let r = height.min(width) as f64 / 4.0;
            ScalarField::from_scalar_fn(spec.shape, |i, j| {
                let (di, dj) = (i as f64 - ci, j as f64 - cj);
                if di * di + dj * dj <= r * r {
                    1.0
                } else {
                    0.0
                }
            })
        }
    };
    Ok(field)
}

/// Adds i.i.d. `N(0, sigma^2)` noise without clamping.
///
/// Samples come from ChaCha8 seeded with `seed` (via `seed_from_u64`),
/// transformed by the `rand_distr` ziggurat `StandardNormal`, one draw per
/// cell in row-major order.
pub fn add_noise(u: &ScalarField, sigma: f64, seed: u64) -> Result<ScalarField> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(u.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = u.clone();
    for v in out.as_mut_slice() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
    Ok(out)
}

/// Peak signal-to-noise ratio in dB with peak 1.
pub fn psnr(u: &ScalarField, clean: &ScalarField) -> f64 {
    assert_eq!(u.shape(), clean.shape(), "shape mismatch in psnr");
    let mse = u
        .as_slice()
        .iter()
        .zip(clean.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / u.as_slice().len() as f64;
    10.0 * (1.0 / mse).log10()
}

pub const TRACE_COLUMNS: [&str; 11] = [
    "k",
    "stage",
    "H",
    "g1",
    "g2",
    "l1",
    "l2",
    "gradmap1",
    "gradmap2",
    "primal_change",
    "psnr",
];

/// 17 significant digits.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.records {
        w.write_record([
            format!("{}", r.k),
            r.stage.as_str().to_owned(),
            real(r.energy.total),
            real(r.energy.g1),
            real(r.energy.g2),
            real(r.energy.l1),
            real(r.energy.l2),
            opt_real(r.gradmap1),
            opt_real(r.gradmap2),
            real(r.primal_change),
            opt_real(r.psnr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_trace_csv(trace, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_binary_and_text_variants() {
        let mut p5 = b"P5\n2 2\n255\n".to_vec();
        p5.extend_from_slice(&[0, 255, 128, 64]);
        let a = decode_pgm(&p5).unwrap();
        assert_eq!(a.as_slice(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        assert!((a.get(1, 0) - 0.50196).abs() < 1e-5 && (a.get(1, 1) - 0.25098).abs() < 1e-5);

        let p2 = b"P2\n# a comment\n2 2 # trailing\n255\n0 255\n128 64\n";
        assert_eq!(decode_pgm(p2).unwrap(), a);
    }

    #[test]
    fn decodes_sixteen_bit() {
        let mut p5 = b"P5 1 2 65535\n".to_vec();
        p5.extend_from_slice(&[0xff, 0xff, 0x80, 0x00]);
        let a = decode_pgm(&p5).unwrap();
        assert_eq!(a.as_slice(), &[1.0, 32768.0 / 65535.0]);
    }

    #[test]
    fn descriptive_decode_errors() {
        assert!(decode_pgm(b"P6\n1 1\n255\n\0")
            .unwrap_err()
            .contains("unsupported magic"));
        assert!(decode_pgm(b"P5\n2 x\n255\n")
            .unwrap_err()
            .contains("malformed header"));
        assert!(decode_pgm(b"P5\n2 2\n255\n\x01\x02")
            .unwrap_err()
            .contains("truncated"));
        assert!(decode_pgm(b"P2\n2 1\n255\n1")
            .unwrap_err()
            .contains("truncated"));
        assert!(decode_pgm(b"P2\n1 1\n10\n11")
            .unwrap_err()
            .contains("exceeds maxval"));
        assert!(decode_pgm(b"P2\n1 1\n70000\n1")
            .unwrap_err()
            .contains("maxval"));
        assert!(decode_pgm(b"").unwrap_err().contains("magic"));
    }

    #[test]
    fn encode_quantizes_and_clamps() {
        let half = ScalarField::constant(Shape::new(2, 3), [0.5]);
        let bytes = encode_pgm(&half, 255).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert!(bytes[header.len()..].iter().all(|&b| b == 128));

        let out = ScalarField::from_vec(Shape::new(1, 2), vec![1.7, -0.3]).unwrap();
        let bytes = encode_pgm(&out, 255).unwrap();
        assert_eq!(&bytes[bytes.len() - 2..], &[255, 0]);
        assert!(encode_pgm(&out, 1000).is_err());
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let u = ScalarField::from_scalar_fn(Shape::new(5, 7), |i, j| {
            ((i * 7 + j) as f64 / 34.0).sin().abs()
        });
        write_pgm(&path, &u, 65535).unwrap();
        let back = read_pgm(&path).unwrap();
        assert!(back.sub(&u).max_abs() <= 1.0 / (2.0 * 65535.0));
        assert!(matches!(
            read_pgm(dir.path().join("missing.pgm")),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn synthetic_images() {
        let s: SyntheticSpec = "staircase:8x8:2".parse().unwrap();
        let st = synth(&s).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(st.get(i, j), if i < 4 { 0.0 } else { 1.0 });
            }
        }
        let ramp = synth(&"ramp:1x4".parse().unwrap()).unwrap();
        assert_eq!(ramp.as_slice(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let disk = synth(&"disk:9x9".parse().unwrap()).unwrap();
        assert_eq!(disk.get(4, 4), 1.0);
        for (i, j) in [(0, 0), (0, 8), (8, 0), (8, 8)] {
            assert_eq!(disk.get(i, j), 0.0);
        }
        let four: SyntheticSpec = "staircase:32x32".parse().unwrap();
        assert_eq!(four.levels, DEFAULT_LEVELS);
    }

    #[test]
    fn bad_synthetic_specs() {
        for s in [
            "cone:8x8",
            "ramp:8",
            "ramp:0x4",
            "staircase:8x8:1",
            "disk:8x8:2:3",
            "ramp:axb",
        ] {
            assert!(s.parse::<SyntheticSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn noise_properties() {
        let base = ScalarField::constant(Shape::new(64, 64), [0.5]);
        assert_eq!(add_noise(&base, 0.0, 1).unwrap(), base);
        let a = add_noise(&base, 0.1, 7).unwrap();
        let n = a.as_slice().len() as f64;
        let mean = a.mean();
        let sd = (a.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.09..=0.11).contains(&sd), "sd {sd}");
        let b = add_noise(&base, 0.1, 8).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, add_noise(&base, 0.1, 7).unwrap());
        assert!(add_noise(&base, -1.0, 1).is_err());
    }

    #[test]
    fn psnr_of_known_error() {
        let a = ScalarField::constant(Shape::new(4, 4), [0.5]);
        let b = ScalarField::constant(Shape::new(4, 4), [0.6]);
        assert!((psnr(&a, &b) - 20.0).abs() <= 1e-9);
    }
}
