//! File formats and configuration.
//!
//! Images are binary PGM (`P5`, maxval 255). Disparity maps are
//! single-channel PFM (`Pf`) with a `<file>.meta` key=value sidecar that
//! records the domain tag and the parameters that produced the map.
//! Camera and scene descriptions use the same key=value syntax: one
//! `key = value` per line, `#` starts a comment.
//!
//! Every writer goes through a temporary file in the destination directory
//! followed by a rename, so outputs are either complete or absent.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{
    image_center, CameraModel, PixelCoord, DEFAULT_FOV_DEG, DEFAULT_THETA_LIM_DEG,
};
use crate::image::LumaImage;
use crate::matching::{DisparityDomain, DisparityMap};
use crate::synthetic::{PlaneExtent, PlaneParams, SceneSpec};

const PGM_MAGIC: &[u8; 2] = b"P5";
const PFM_MAGIC: &[u8; 2] = b"Pf";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Cursor over a netpbm-style header.
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    label: &'a str,
    allow_comments: bool,
}

impl<'a> HeaderReader<'a> {
    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.label.to_string(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn expect_magic(&mut self, magic: &[u8; 2], name: &str) -> Result<()> {
        if self.bytes.len() < 2 || &self.bytes[..2] != magic {
            return Err(self.error(
                0,
                format!(
                    "not a {name} file (expected magic {:?})",
                    std::str::from_utf8(magic).unwrap()
                ),
            ));
        }
        self.pos = 2;
        Ok(())
    }

    fn skip_separators(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'#' && self.allow_comments {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let had_separator = self
            .bytes
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_whitespace() || *c == b'#');
        self.skip_separators();
        let start = self.pos;
        if !had_separator {
            return Err(self.error(start, format!("expected whitespace before {what}")));
        }
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| !c.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(start, format!("missing {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| self.error(start, format!("{what} is not ASCII")))?;
        Ok((start, text))
    }

    fn dimension(&mut self, what: &str) -> Result<usize> {
        let (at, text) = self.token(what)?;
        match text.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(self.error(
                at,
                format!("{what} must be a positive integer, got {text:?}"),
            )),
        }
    }

    /// Consumes the single whitespace byte that ends the header.
    fn end_header(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(self.error(self.pos, "header must end with a single whitespace byte")),
        }
    }
}

pub fn decode_pgm(bytes: &[u8], label: &str) -> Result<LumaImage> {
    let mut r = HeaderReader {
        bytes,
        pos: 0,
        label,
        allow_comments: true,
    };
    r.expect_magic(PGM_MAGIC, "binary PGM")?;
    let width = r.dimension("width")?;
    let height = r.dimension("height")?;
    let (at, maxval) = r.token("maxval")?;
    if maxval != "255" {
        return Err(r.error(at, format!("maxval must be 255, got {maxval}")));
    }
    let start = r.end_header()?;
    let expected = height * width;
    let actual = bytes.len() - start;
    if actual < expected {
        return Err(r.error(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {actual}"),
        ));
    }
    let data = bytes[start..start + expected]
        .iter()
        .map(|&b| b as f64)
        .collect();
    LumaImage::from_vec(height, width, data)
}

/// Samples are rounded to the nearest integer, halves away from zero.
pub fn encode_pgm(image: &LumaImage, comments: &[String]) -> Vec<u8> {
    let mut out = Vec::with_capacity(image.data().len() + 64);
    out.extend_from_slice(PGM_MAGIC);
    out.push(b'\n');
    for c in comments {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{} {}\n255\n", image.width(), image.height()).as_bytes());
    out.extend(
        image
            .data()
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn read_image(path: &Path) -> Result<LumaImage> {
    decode_pgm(&read_bytes(path)?, &path.display().to_string())
}

pub fn write_image(path: &Path, image: &LumaImage) -> Result<()> {
    write_image_with_comments(path, image, &[])
}

pub fn write_image_with_comments(
    path: &Path,
    image: &LumaImage,
    comments: &[String],
) -> Result<()> {
    write_atomic(path, &encode_pgm(image, comments))
}

/// Raw little-endian PFM; rows are stored bottom to top.
pub fn encode_pfm(height: usize, width: usize, data: &[f32]) -> Vec<u8> {
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(data.len() * 4);
    for m in (0..height).rev() {
        for v in &data[m * width..(m + 1) * width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8], label: &str) -> Result<(usize, usize, Vec<f32>)> {
    let mut r = HeaderReader {
        bytes,
        pos: 0,
        label,
        allow_comments: false,
    };
    r.expect_magic(PFM_MAGIC, "single-channel PFM")?;
    let width = r.dimension("width")?;
    let height = r.dimension("height")?;
    let (at, scale) = r.token("scale")?;
    let little_endian = match scale.parse::<f64>() {
        Ok(s) if s < 0.0 => true,
        Ok(s) if s > 0.0 => false,
        _ => {
            return Err(r.error(
                at,
                format!("scale must be a non-zero number, got {scale:?}"),
            ))
        }
    };
    let start = r.end_header()?;
    let expected = height * width * 4;
    let actual = bytes.len() - start;
    if actual < expected {
        return Err(r.error(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {actual}"),
        ));
    }
    let mut data = vec![0.0f32; height * width];
    for (i, chunk) in bytes[start..start + expected].chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().unwrap();
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row_from_bottom, n) = (i / width, i % width);
        data[(height - 1 - row_from_bottom) * width + n] = v;
    }
    Ok((height, width, data))
}

/// Sidecar path for a disparity file: the file name with `.meta` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Parameters recorded next to a disparity map, besides its domain tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisparityMeta {
    pub support_width: Option<usize>,
    pub search_range: Option<usize>,
    pub camera: Option<CameraModel>,
    /// Further `key=value` pairs, kept in order.
    pub extra: Vec<(String, String)>,
}

pub fn write_disparity(path: &Path, map: &DisparityMap, meta: &DisparityMeta) -> Result<()> {
    let mut sidecar = format!("domain_tag={}\n", map.domain());
    if let Some(w) = meta.support_width {
        sidecar += &format!("support_width={w}\n");
    }
    if let Some(s) = meta.search_range {
        sidecar += &format!("search_range={s}\n");
    }
    if let Some(cam) = &meta.camera {
        for (k, v) in camera_entries(cam) {
            sidecar += &format!("{k}={v}\n");
        }
    }
    for (k, v) in &meta.extra {
        sidecar += &format!("{k}={v}\n");
    }
    write_atomic(&sidecar_path(path), sidecar.as_bytes())?;
    write_atomic(path, &encode_pfm(map.height(), map.width(), map.data()))
}

pub fn read_disparity(path: &Path) -> Result<(DisparityMap, DisparityMeta)> {
    let meta_path = sidecar_path(path);
    if !meta_path.exists() {
        return Err(Error::MissingSidecar(meta_path));
    }
    let kv = KeyValues::load(&meta_path)?;
    let domain = kv.require_parsed::<DisparityDomain>("domain_tag")?;
    let (height, width, data) = decode_pfm(&read_bytes(path)?, &path.display().to_string())?;
    let map = DisparityMap::from_vec(height, width, data, domain)?;
    let camera = if kv.contains("focal_length_px") {
        Some(camera_from_config(&kv, height, width)?)
    } else {
        None
    };
    let known = [
        "domain_tag",
        "support_width",
        "search_range",
        "focal_length_px",
        "center_row",
        "center_col",
        "fov_deg",
        "theta_lim_deg",
    ];
    let meta = DisparityMeta {
        support_width: kv.parsed("support_width")?,
        search_range: kv.parsed("search_range")?,
        camera,
        extra: kv
            .entries()
            .filter(|(k, _)| !known.contains(k))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    };
    Ok((map, meta))
}

/// Parsed `key = value` file.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    label: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str, label: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let config_error = |message: String| Error::Config {
                path: label.to_string(),
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_error(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(config_error("empty key".into()));
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (line_no, value.to_string()))
            {
                return Err(config_error(format!(
                    "duplicate key {key:?} (first on line {first})"
                )));
            }
        }
        Ok(Self {
            label: label.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .map(|(k, (_, v))| (k.as_str(), v.as_str()))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| Error::Config {
                path: self.label.clone(),
                line: *line,
                message: format!("invalid value {v:?} for {key}: {e}"),
            }),
        }
    }

    pub fn require_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?.ok_or_else(|| Error::Config {
            path: self.label.clone(),
            line: 0,
            message: format!("missing required key {key}"),
        })
    }
}

/// Camera for an image of the given size. `focal_length_px` is required;
/// the principal point defaults to the image center.
pub fn camera_from_config(kv: &KeyValues, height: usize, width: usize) -> Result<CameraModel> {
    let center = image_center(height, width);
    let f: f64 = kv.require_parsed("focal_length_px")?;
    let pp = PixelCoord::new(
        kv.parsed("center_row")?.unwrap_or(center.m),
        kv.parsed("center_col")?.unwrap_or(center.n),
    );
    let fov: f64 = kv.parsed("fov_deg")?.unwrap_or(DEFAULT_FOV_DEG);
    let theta_lim: f64 = kv.parsed("theta_lim_deg")?.unwrap_or(DEFAULT_THETA_LIM_DEG);
    CameraModel::with_limits(f, pp, fov, theta_lim.to_radians())
}

pub fn load_camera(path: &Path, height: usize, width: usize) -> Result<CameraModel> {
    camera_from_config(&KeyValues::load(path)?, height, width)
}

/// Key=value lines that [`camera_from_config`] reads back exactly.
pub fn camera_entries(cam: &CameraModel) -> Vec<(&'static str, String)> {
    vec![
        ("focal_length_px", format!("{:?}", cam.focal_length_px)),
        ("center_row", format!("{:?}", cam.principal_point.m)),
        ("center_col", format!("{:?}", cam.principal_point.n)),
        ("fov_deg", format!("{:?}", cam.fov_deg)),
        (
            "theta_lim_deg",
            format!("{:?}", cam.theta_lim_rad.to_degrees()),
        ),
    ]
}

/// Scene description: `height`, `width`, camera keys, `baseline` and planes
/// numbered from 1 (`plane1_depth`, `plane1_seed`, optional
/// `plane1_components`, `plane1_mean`, `plane1_amplitude`, `plane1_xmin`,
/// `plane1_xmax`, `plane1_ymin`, `plane1_ymax`).
pub fn scene_from_config(kv: &KeyValues) -> Result<SceneSpec> {
    let height: usize = kv.require_parsed("height")?;
    let width: usize = kv.require_parsed("width")?;
    let camera = camera_from_config(kv, height, width)?;
    let baseline: f64 = kv.require_parsed("baseline")?;
    let mut planes = Vec::new();
    for i in 1.. {
        let key = |suffix: &str| format!("plane{i}_{suffix}");
        if !kv.contains(&key("depth")) {
            break;
        }
        let mut p = PlaneParams::new(
            kv.require_parsed(&key("depth"))?,
            kv.parsed(&key("seed"))?.unwrap_or(i as u64),
        );
        if let Some(c) = kv.parsed(&key("components"))? {
            p.components = c;
        }
        if let Some(v) = kv.parsed(&key("mean"))? {
            p.mean = v;
        }
        if let Some(v) = kv.parsed(&key("amplitude"))? {
            p.amplitude = v;
        }
        let unbounded = PlaneExtent::UNBOUNDED;
        p.extent = PlaneExtent {
            x_min: kv.parsed(&key("xmin"))?.unwrap_or(unbounded.x_min),
            x_max: kv.parsed(&key("xmax"))?.unwrap_or(unbounded.x_max),
            y_min: kv.parsed(&key("ymin"))?.unwrap_or(unbounded.y_min),
            y_max: kv.parsed(&key("ymax"))?.unwrap_or(unbounded.y_max),
        };
        planes.push(p);
    }
    if planes.is_empty() {
        return Err(Error::Config {
            path: kv.label.clone(),
            line: 0,
            message: "scene defines no planes (expected plane1_depth)".into(),
        });
    }
    SceneSpec::new(camera, height, width, baseline, &planes)
}

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    scene_from_config(&KeyValues::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_image() -> LumaImage {
        LumaImage::from_fn(5, 7, |m, n| ((m * 31 + n * 17) % 256) as f64)
    }

    #[test]
    fn pgm_round_trip_is_byte_identical() {
        let bytes = encode_pgm(&sample_image(), &[]);
        assert!(bytes.starts_with(b"P5\n7 5\n255\n"));
        let img = decode_pgm(&bytes, "mem").unwrap();
        assert_eq!(img, sample_image());
        assert_eq!(encode_pgm(&img, &[]), bytes);
    }

    #[test]
    fn pgm_accepts_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1 # w h\n255\n".to_vec();
        bytes.extend([3, 250]);
        let img = decode_pgm(&bytes, "mem").unwrap();
        assert_eq!(img.data(), &[3.0, 250.0]);
        let with = encode_pgm(&img, &["interp=linear".into()]);
        assert_eq!(decode_pgm(&with, "mem").unwrap(), img);
    }

    #[test]
    fn pgm_rounds_half_away_from_zero() {
        let img = LumaImage::from_vec(1, 3, vec![0.5, 1.49, 254.5]).unwrap();
        let bytes = encode_pgm(&img, &[]);
        assert_eq!(&bytes[bytes.len() - 3..], &[1, 1, 255]);
    }

    #[test]
    fn pgm_errors_carry_offsets() {
        let err = decode_pgm(b"P6\n1 1\n255\n\0", "x").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
        let err = decode_pgm(b"P5\n1 1\n65535\n\0\0", "x").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 7, .. }));
        let err = decode_pgm(b"P5\n4 2\n255\n\0\0\0", "x").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 8 bytes, found 3"), "{msg}");
        assert!(matches!(err, Error::Format { offset: 14, .. }));
        assert!(decode_pgm(b"P5\n0 2\n255\n", "x").is_err());
        assert!(!err.is_contract_violation());
    }

    #[test]
    fn pfm_round_trip_preserves_bits() {
        let data = vec![
            0.0,
            -0.0,
            1.5,
            f32::MAX,
            f32::MIN_POSITIVE,
            1e-42,
            256.0,
            f32::NAN,
        ];
        let bytes = encode_pfm(2, 4, &data);
        let (h, w, back) = decode_pfm(&bytes, "mem").unwrap();
        assert_eq!((h, w), (2, 4));
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Bottom row comes first in the payload.
        let header = b"Pf\n4 2\n-1.0\n".len();
        assert_eq!(&bytes[header..header + 4], &f32::MIN_POSITIVE.to_le_bytes());
    }

    #[test]
    fn pfm_big_endian_and_errors() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend(2.5f32.to_be_bytes());
        assert_eq!(decode_pfm(&bytes, "x").unwrap().2, vec![2.5]);
        assert!(decode_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0", "x").is_err());
        assert!(decode_pfm(b"Pf\n1 1\n0\n\0\0\0\0", "x").is_err());
        assert!(decode_pfm(b"Pf\n2 1\n-1.0\n\0\0\0\0", "x").is_err());
    }

    #[test]
    fn disparity_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        let data: Vec<f32> = (0..12).map(|i| i as f32 * 0.75).collect();
        let map =
            DisparityMap::from_vec(3, 4, data, DisparityDomain::PerspectiveHorizontal).unwrap();
        let cam = CameraModel::with_limits(123.25, PixelCoord::new(1.0, 1.5), 190.0, 1.4).unwrap();
        let meta = DisparityMeta {
            support_width: Some(8),
            search_range: Some(256),
            camera: Some(cam),
            extra: vec![("note".into(), "x".into())],
        };
        write_disparity(&path, &map, &meta).unwrap();
        let (back, back_meta) = read_disparity(&path).unwrap();
        assert_eq!(back, map);
        assert_eq!(back_meta.support_width, Some(8));
        assert_eq!(back_meta.search_range, Some(256));
        let c = back_meta.camera.unwrap();
        assert_eq!(c.focal_length_px, 123.25);
        assert_eq!(c.principal_point, cam.principal_point);
        assert!((c.theta_lim_rad - 1.4).abs() < 1e-15);
        assert_eq!(back_meta.extra, meta.extra);
    }

    #[test]
    fn missing_sidecar_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        fs::write(&path, encode_pfm(1, 1, &[1.0])).unwrap();
        let err = read_disparity(&path).unwrap_err();
        assert!(matches!(err, Error::MissingSidecar(_)));
        assert!(err.to_string().contains("regenerate"));
    }

    #[test]
    fn key_values_parsing() {
        let kv = KeyValues::parse(
            "# camera\nfocal_length_px = 150 # px\n\n center_row=10\n",
            "c",
        )
        .unwrap();
        let cam = camera_from_config(&kv, 21, 41).unwrap();
        assert_eq!(cam.focal_length_px, 150.0);
        assert_eq!(cam.principal_point, PixelCoord::new(10.0, 20.0));
        assert_eq!(cam.fov_deg, DEFAULT_FOV_DEG);
        assert!(matches!(
            KeyValues::parse("a=1\nb\n", "c"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(KeyValues::parse("a=1\na=2\n", "c").is_err());
        let bad = KeyValues::parse("focal_length_px=abc", "c").unwrap();
        assert!(matches!(
            camera_from_config(&bad, 4, 4),
            Err(Error::Config { line: 1, .. })
        ));
        let missing = KeyValues::parse("", "c").unwrap();
        assert!(camera_from_config(&missing, 4, 4).is_err());
    }

    #[test]
    fn scene_config() {
        let text = "height=32\nwidth=48\nfocal_length_px=40\nbaseline=0.1\n\
                    plane1_depth=1\nplane1_seed=7\nplane1_xmax=0\n\
                    plane2_depth=4\nplane2_components=0\nplane2_mean=60\n";
        let scene = scene_from_config(&KeyValues::parse(text, "s").unwrap()).unwrap();
        assert_eq!((scene.height, scene.width), (32, 48));
        assert_eq!(scene.planes.len(), 2);
        assert_eq!(scene.planes[0].extent.x_max, 0.0);
        assert_eq!(scene.planes[1].texture.sample(3.0, 4.0), 60.0);
        let none =
            KeyValues::parse("height=4\nwidth=4\nfocal_length_px=4\nbaseline=1", "s").unwrap();
        assert!(scene_from_config(&none).is_err());
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.pgm");
        write_image(&path, &sample_image()).unwrap();
        write_image(&path, &LumaImage::filled(1, 1, 9.0)).unwrap();
        assert_eq!(read_image(&path).unwrap().data(), &[9.0]);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_image(&dir.path().join("no/such/dir.pgm"), &sample_image()).is_err());
    }
}
