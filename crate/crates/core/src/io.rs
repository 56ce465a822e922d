//! On-disk formats.
//!
//! * CBFT tensors: `"CBFT"`, u32 version, u32 ndim, ndim × u32 dims, u8 dtype
//!   (0 = f32, 1 = i8), then the row-major payload. All integers little-endian.
//! * Label rasters: 8-bit grayscale PNG of class ids plus a `.palette` sidecar
//!   with one `id name #rrggbb band` line per class.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ontology::{CorrectionLog, RuleBase};
use crate::raster::{ExtraChannels, LabelMap, ProbMap, RasterImage};
use crate::scalar::Scalar;
use crate::taxonomy::{ClassId, ElevationBand, Taxonomy};

pub const TENSOR_MAGIC: &[u8; 4] = b"CBFT";
pub const TENSOR_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;
const DTYPE_I8: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I8(Vec<i8>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::checked(dims, TensorData::F32(data))
    }

    pub fn i8(dims: Vec<usize>, data: Vec<i8>) -> Result<Self> {
        Self::checked(dims, TensorData::I8(data))
    }

    fn checked(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        let len = match &data {
            TensorData::F32(v) => v.len(),
            TensorData::I8(v) => v.len(),
        };
        if dims.iter().product::<usize>() != len {
            return Err(Error::Dimension(format!(
                "dims {dims:?} do not match {len} values"
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn as_f64(&self) -> Option<Vec<f64>> {
        match &self.data {
            TensorData::F32(v) => Some(v.iter().map(|&x| f64::from(x)).collect()),
            TensorData::I8(_) => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => {
                out.push(DTYPE_F32);
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            TensorData::I8(v) => {
                out.push(DTYPE_I8);
                out.extend(v.iter().map(|&x| x as u8));
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("tensor: {m}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes
                .get(pos..pos + n)
                .ok_or_else(|| bad("truncated header"))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != TENSOR_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != TENSOR_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let ndim = u32_at(take(4)?) as usize;
        if ndim == 0 || ndim > 8 {
            return Err(bad(&format!("unsupported rank {ndim}")));
        }
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(u32_at(take(4)?) as usize);
        }
        let dtype = take(1)?[0];
        let count = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| bad("dims overflow"))?;
        let payload = &bytes[pos..];
        let data = match dtype {
            DTYPE_F32 => {
                if payload.len() != count * 4 {
                    return Err(bad(&format!(
                        "expected {} payload bytes, found {}",
                        count * 4,
                        payload.len()
                    )));
                }
                TensorData::F32(
                    payload
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )
            }
            DTYPE_I8 => {
                if payload.len() != count {
                    return Err(bad(&format!(
                        "expected {count} payload bytes, found {}",
                        payload.len()
                    )));
                }
                TensorData::I8(payload.iter().map(|&b| b as i8).collect())
            }
            other => return Err(bad(&format!("unknown dtype {other}"))),
        };
        Ok(Tensor { dims, data })
    }
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::decode(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    fs::write(path, tensor.encode()).map_err(|e| Error::io(path, e))
}

/// `[H, W, C]` float tensor.
pub fn image_to_tensor<T: Scalar>(image: &RasterImage<T>) -> Tensor {
    Tensor {
        dims: vec![image.height(), image.width(), image.channels()],
        data: TensorData::F32(image.data().iter().map(|v| v.as_f64() as f32).collect()),
    }
}

pub fn tensor_to_image<T: Scalar>(t: &Tensor) -> Result<RasterImage<T>> {
    let [h, w, c] = t.dims[..] else {
        return Err(Error::Format(format!(
            "image tensor must be [H, W, C], found {:?}",
            t.dims
        )));
    };
    let v = t
        .as_f64()
        .ok_or_else(|| Error::Format("image tensor must be float32".into()))?;
    RasterImage::new(w, h, c, v.into_iter().map(T::lit).collect())
}

/// `[H, W, N]` float tensor.
pub fn probmap_to_tensor<T: Scalar>(p: &ProbMap<T>) -> Tensor {
    Tensor {
        dims: vec![p.height(), p.width(), p.n_classes()],
        data: TensorData::F32(p.data().iter().map(|v| v.as_f64() as f32).collect()),
    }
}

/// `[2, H, W]` int8 tensor: shadow plane then elevation plane.
pub fn extra_to_tensor(e: &ExtraChannels) -> Tensor {
    let mut v: Vec<i8> = e.shadow().to_vec();
    v.extend(e.elevation().iter().map(|&x| x as i8));
    Tensor {
        dims: vec![2, e.height(), e.width()],
        data: TensorData::I8(v),
    }
}

pub fn tensor_to_extra(t: &Tensor) -> Result<ExtraChannels> {
    let ([2, h, w], TensorData::I8(v)) = (&t.dims[..], &t.data) else {
        return Err(Error::Format(format!(
            "extra-channel tensor must be int8 [2, H, W], found {:?}",
            t.dims
        )));
    };
    let n = h * w;
    let elevation = v[n..]
        .iter()
        .map(|&x| u8::try_from(x).map_err(|_| Error::Domain(format!("elevation value {x}"))))
        .collect::<Result<Vec<_>>>()?;
    ExtraChannels::new(*w, *h, v[..n].to_vec(), elevation)
}

/// Display color for class `id`.
pub fn default_color(id: usize) -> [u8; 3] {
    const TABLE: [[u8; 3]; 8] = [
        [34, 139, 34],
        [181, 145, 98],
        [128, 128, 128],
        [200, 40, 40],
        [30, 90, 200],
        [240, 240, 240],
        [250, 200, 0],
        [120, 40, 160],
    ];
    TABLE.get(id).copied().unwrap_or_else(|| {
        let h = (id as u32).wrapping_mul(2_654_435_761);
        [(h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8]
    })
}

pub fn palette_path(png: &Path) -> PathBuf {
    png.with_extension("palette")
}

pub fn palette_text(taxonomy: &Taxonomy) -> String {
    let mut s = String::new();
    for c in taxonomy.classes() {
        let [r, g, b] = default_color(c.id.index());
        s.push_str(&format!(
            "{} {} #{r:02x}{g:02x}{b:02x} {}\n",
            c.id.index(),
            c.name,
            c.elevation_band.name()
        ));
    }
    s
}

pub fn parse_palette(text: &str) -> Result<Taxonomy> {
    let mut classes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Format(format!("palette line {}: `{line}`", i + 1));
        if f.len() != 4 || !f[2].starts_with('#') {
            return Err(bad());
        }
        let id: usize = f[0].parse().map_err(|_| bad())?;
        if id != classes.len() {
            return Err(Error::Format(format!(
                "palette line {}: ids must be dense and ordered",
                i + 1
            )));
        }
        let band = ElevationBand::parse(f[3]).ok_or_else(bad)?;
        classes.push((f[1].to_string(), band));
    }
    Taxonomy::new(classes)
}

pub fn read_palette(path: &Path) -> Result<Taxonomy> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_palette(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Write the grayscale id raster and its palette sidecar.
pub fn write_label_png(path: &Path, labels: &LabelMap) -> Result<()> {
    let buf: Vec<u8> = labels.labels().iter().map(|c| c.0).collect();
    image::save_buffer(
        path,
        &buf,
        labels.width() as u32,
        labels.height() as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let pal = palette_path(path);
    fs::write(&pal, palette_text(labels.taxonomy())).map_err(|e| Error::io(pal, e))
}

/// Read a label raster; the taxonomy comes from its palette sidecar.
pub fn read_label_png(path: &Path) -> Result<LabelMap> {
    let taxonomy = Arc::new(read_palette(&palette_path(path))?);
    read_label_png_with(path, taxonomy)
}

pub fn read_label_png_with(path: &Path, taxonomy: Arc<Taxonomy>) -> Result<LabelMap> {
    let img = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        _ => {
            return Err(Error::Format(format!(
                "{}: label raster must be 8-bit grayscale",
                path.display()
            )))
        }
    };
    let (w, h) = gray.dimensions();
    let labels = gray.into_raw().into_iter().map(ClassId).collect();
    LabelMap::new(w as usize, h as usize, labels, taxonomy)
}

/// 8-bit RGB preview of the first three channels (or gray for one channel).
pub fn write_preview_png<T: Scalar>(path: &Path, image: &RasterImage<T>) -> Result<()> {
    let mut buf = Vec::with_capacity(image.width() * image.height() * 3);
    for i in 0..image.width() * image.height() {
        let px = image.pixel(i);
        for c in 0..3 {
            let v = px[c.min(px.len() - 1)].as_f64();
            buf.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    image::save_buffer(
        path,
        &buf,
        image.width() as u32,
        image.height() as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Image from a CBFT `[H, W, C]` tensor, or from a PNG scaled to `[0, 1]` RGB.
pub fn read_image<T: Scalar>(path: &Path) -> Result<RasterImage<T>> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
    {
        let img = image::open(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img
            .into_raw()
            .into_iter()
            .map(|v| T::lit(f64::from(v) / 255.0))
            .collect();
        return RasterImage::new(w, h, 3, data);
    }
    tensor_to_image(&read_tensor(path)?)
}

/// `unit_id,old,new,rule_id` with class names.
pub fn correction_log_csv(log: &CorrectionLog, taxonomy: &Taxonomy) -> String {
    let mut s = String::from("unit_id,old,new,rule_id\n");
    for c in &log.entries {
        s.push_str(&format!(
            "{},{},{},{}\n",
            c.unit,
            taxonomy.name(c.old),
            taxonomy.name(c.new),
            c.rule_id
        ));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Parse a rule file against `taxonomy`.
pub fn read_rules(path: &Path, taxonomy: Arc<Taxonomy>) -> Result<RuleBase> {
    crate::ontology::parse_rules(&read_text(path)?, taxonomy)
}
