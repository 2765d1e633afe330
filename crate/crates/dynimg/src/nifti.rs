//! Reader and test-oriented writer for single-file NIfTI-1 volumes.
//!
//! Only the subset needed to feed the pooling pipeline is decoded: the
//! 348-byte header with auto-detected endianness, five voxel datatypes,
//! and transparent gzip. Two-file (`.hdr`/`.img`) pairs are rejected.
//! Orientation fields (qform/sform codes) are read for display but never
//! interpreted: the depth axis is always the file's third dimension.

use std::fs;
use std::io::Read;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use dynimg_core::volume::{Volume3D, VolumeError};
use flate2::read::GzDecoder;

/// Size of a NIfTI-1 header in bytes.
pub const HEADER_SIZE: usize = 348;
/// Data offset written by [`write_volume`]: header plus a zero extension flag.
pub const DEFAULT_VOX_OFFSET: usize = 352;

const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, thiserror::Error)]
pub enum NiftiError {
    #[error("header truncated: {len} bytes, need {HEADER_SIZE}")]
    TruncatedHeader { len: usize },
    #[error("sizeof_hdr is {0} in both byte orders, not a NIfTI-1 header")]
    BadSizeofHdr(i32),
    #[error("bad magic {0:?}; only single-file \"n+1\\0\" volumes are supported")]
    BadMagic([u8; 4]),
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("bitpix {bitpix} inconsistent with datatype code {datatype}")]
    BitpixMismatch { datatype: i16, bitpix: i16 },
    #[error("unsupported rank {0}: need 3, or 4 with a singleton fourth axis")]
    UnsupportedRank(i16),
    #[error("axis {axis} extent {value} is not positive")]
    InvalidExtent { axis: usize, value: i16 },
    #[error("vox_offset {0} is not a valid data offset")]
    InvalidVoxOffset(f32),
    #[error("payload holds {got} bytes, voxel grid needs {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite voxel after scaling at index {index}")]
    NonFiniteVoxel { index: usize },
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Voxel datatypes this reader decodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl Datatype {
    pub fn from_code(code: i16) -> Option<Self> {
        match code {
            2 => Some(Datatype::Uint8),
            4 => Some(Datatype::Int16),
            8 => Some(Datatype::Int32),
            16 => Some(Datatype::Float32),
            64 => Some(Datatype::Float64),
            _ => None,
        }
    }

    pub fn code(&self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn byte_size(&self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Int32 => 4,
            Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Datatype::Uint8 => "uint8",
            Datatype::Int16 => "int16",
            Datatype::Int32 => "int32",
            Datatype::Float32 => "float32",
            Datatype::Float64 => "float64",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

fn rd_i16(bytes: &[u8], off: usize, e: Endianness) -> i16 {
    match e {
        Endianness::Little => LittleEndian::read_i16(&bytes[off..off + 2]),
        Endianness::Big => BigEndian::read_i16(&bytes[off..off + 2]),
    }
}

fn rd_f32(bytes: &[u8], off: usize, e: Endianness) -> f32 {
    match e {
        Endianness::Little => LittleEndian::read_f32(&bytes[off..off + 4]),
        Endianness::Big => BigEndian::read_f32(&bytes[off..off + 4]),
    }
}

/// Decoded subset of the 348-byte header.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: Datatype,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    pub endianness: Endianness,
}

impl NiftiHeader {
    pub fn extents(&self) -> (usize, usize, usize) {
        (self.dim[1] as usize, self.dim[2] as usize, self.dim[3] as usize)
    }

    /// Per-axis spacing if every spatial pixdim is finite and positive.
    pub fn spacing(&self) -> Option<[f32; 3]> {
        let s = [self.pixdim[1], self.pixdim[2], self.pixdim[3]];
        if s.iter().all(|v| v.is_finite() && *v > 0.0) {
            Some(s)
        } else {
            None
        }
    }
}

/// Decodes a header, detecting byte order from `sizeof_hdr`.
pub fn parse_header(bytes: &[u8]) -> Result<NiftiHeader, NiftiError> {
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::TruncatedHeader { len: bytes.len() });
    }
    let le = LittleEndian::read_i32(&bytes[offsets::SIZEOF_HDR..offsets::SIZEOF_HDR + 4]);
    let endianness = if le == HEADER_SIZE as i32 {
        Endianness::Little
    } else if le.swap_bytes() == HEADER_SIZE as i32 {
        Endianness::Big
    } else {
        return Err(NiftiError::BadSizeofHdr(le));
    };

    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[offsets::MAGIC..offsets::MAGIC + 4]);
    if &magic != MAGIC_SINGLE {
        return Err(NiftiError::BadMagic(magic));
    }

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = rd_i16(bytes, offsets::DIM + 2 * i, endianness);
    }
    let rank = dim[0];
    let rank_ok = rank == 3 || (rank == 4 && dim[4] <= 1);
    if !rank_ok {
        return Err(NiftiError::UnsupportedRank(rank));
    }
    for axis in 1..=3 {
        if dim[axis] < 1 {
            return Err(NiftiError::InvalidExtent {
                axis,
                value: dim[axis],
            });
        }
    }

    let datatype_code = rd_i16(bytes, offsets::DATATYPE, endianness);
    let datatype = Datatype::from_code(datatype_code)
        .ok_or(NiftiError::UnsupportedDatatype(datatype_code))?;
    let bitpix = rd_i16(bytes, offsets::BITPIX, endianness);
    if bitpix as usize != datatype.byte_size() * 8 {
        return Err(NiftiError::BitpixMismatch {
            datatype: datatype_code,
            bitpix,
        });
    }

    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = rd_f32(bytes, offsets::PIXDIM + 4 * i, endianness);
    }

    Ok(NiftiHeader {
        dim,
        datatype,
        bitpix,
        pixdim,
        vox_offset: rd_f32(bytes, offsets::VOX_OFFSET, endianness),
        scl_slope: rd_f32(bytes, offsets::SCL_SLOPE, endianness),
        scl_inter: rd_f32(bytes, offsets::SCL_INTER, endianness),
        qform_code: rd_i16(bytes, offsets::QFORM_CODE, endianness),
        sform_code: rd_i16(bytes, offsets::SFORM_CODE, endianness),
        endianness,
    })
}

fn decode_voxels(
    payload: &[u8],
    count: usize,
    header: &NiftiHeader,
) -> Result<Vec<f32>, NiftiError> {
    let e = header.endianness;
    let slope = header.scl_slope;
    let inter = header.scl_inter;
    // scl_slope of zero means "no scaling" per the format.
    let identity = (slope == 0.0 || slope == 1.0) && inter == 0.0;
    let (slope, inter) = if slope == 0.0 {
        (1.0f64, 0.0f64)
    } else {
        (slope as f64, inter as f64)
    };

    let step = header.datatype.byte_size();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let chunk = &payload[i * step..(i + 1) * step];
        let raw: f64 = match header.datatype {
            Datatype::Uint8 => chunk[0] as f64,
            Datatype::Int16 => match e {
                Endianness::Little => LittleEndian::read_i16(chunk) as f64,
                Endianness::Big => BigEndian::read_i16(chunk) as f64,
            },
            Datatype::Int32 => match e {
                Endianness::Little => LittleEndian::read_i32(chunk) as f64,
                Endianness::Big => BigEndian::read_i32(chunk) as f64,
            },
            Datatype::Float32 => {
                let v = match e {
                    Endianness::Little => LittleEndian::read_f32(chunk),
                    Endianness::Big => BigEndian::read_f32(chunk),
                };
                if identity {
                    // Pass the bits through untouched so the round trip is
                    // exact (including negative zero).
                    if !v.is_finite() {
                        return Err(NiftiError::NonFiniteVoxel { index: i });
                    }
                    out.push(v);
                    continue;
                }
                v as f64
            }
            Datatype::Float64 => match e {
                Endianness::Little => LittleEndian::read_f64(chunk),
                Endianness::Big => BigEndian::read_f64(chunk),
            },
        };
        let v = (slope * raw + inter) as f32;
        if !v.is_finite() {
            return Err(NiftiError::NonFiniteVoxel { index: i });
        }
        out.push(v);
    }
    Ok(out)
}

/// Decodes a whole single-file volume from raw (already un-gzipped) bytes.
pub fn read_volume_from_bytes(bytes: &[u8]) -> Result<(Volume3D, NiftiHeader), NiftiError> {
    let header = parse_header(bytes)?;
    let (nx, ny, nz) = header.extents();

    let off = header.vox_offset;
    if !off.is_finite() || off < HEADER_SIZE as f32 || off.fract() != 0.0 {
        return Err(NiftiError::InvalidVoxOffset(off));
    }
    let off = off as usize;
    let expected = nx * ny * nz * header.datatype.byte_size();
    let got = bytes.len().saturating_sub(off);
    if got < expected {
        return Err(NiftiError::SizeMismatch { expected, got });
    }

    // The file's x-fastest layout is exactly the slice-major order of
    // Volume3D (x, then y, then z), so decoding is a straight pass.
    let voxels = decode_voxels(&bytes[off..off + expected], nx * ny * nz, &header)?;
    let mut volume = Volume3D::new(nx, ny, nz, voxels)?;
    if let Some(spacing) = header.spacing() {
        volume = volume.with_spacing(spacing);
    }
    Ok((volume, header))
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

/// Reads a `.nii` or `.nii.gz` volume; gzip is detected from the leading
/// bytes, not the extension.
pub fn read_volume(path: &Path) -> Result<(Volume3D, NiftiHeader), NiftiError> {
    let raw = fs::read(path)?;
    if is_gzip(&raw) {
        let mut decoded = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut decoded)?;
        read_volume_from_bytes(&decoded)
    } else {
        read_volume_from_bytes(&raw)
    }
}

/// Encodes the volume as an uncompressed single-file NIfTI-1 (float32,
/// little-endian, slope 1 / inter 0). Missing spacing is written as 1.0.
pub fn encode_volume(v: &Volume3D) -> Vec<u8> {
    let mut buf = vec![0u8; DEFAULT_VOX_OFFSET + v.voxels().len() * 4];
    LittleEndian::write_i32(&mut buf[offsets::SIZEOF_HDR..offsets::SIZEOF_HDR + 4], 348);
    let dims = [
        3i16,
        v.width() as i16,
        v.height() as i16,
        v.depth() as i16,
        1,
        1,
        1,
        1,
    ];
    for (i, d) in dims.iter().enumerate() {
        LittleEndian::write_i16(&mut buf[offsets::DIM + 2 * i..offsets::DIM + 2 * i + 2], *d);
    }
    LittleEndian::write_i16(&mut buf[offsets::DATATYPE..offsets::DATATYPE + 2], 16);
    LittleEndian::write_i16(&mut buf[offsets::BITPIX..offsets::BITPIX + 2], 32);
    let spacing = v.spacing().unwrap_or([1.0, 1.0, 1.0]);
    let pixdim = [1.0f32, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(
            &mut buf[offsets::PIXDIM + 4 * i..offsets::PIXDIM + 4 * i + 4],
            *p,
        );
    }
    LittleEndian::write_f32(
        &mut buf[offsets::VOX_OFFSET..offsets::VOX_OFFSET + 4],
        DEFAULT_VOX_OFFSET as f32,
    );
    LittleEndian::write_f32(&mut buf[offsets::SCL_SLOPE..offsets::SCL_SLOPE + 4], 1.0);
    LittleEndian::write_f32(&mut buf[offsets::SCL_INTER..offsets::SCL_INTER + 4], 0.0);
    buf[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(MAGIC_SINGLE);
    // Bytes 348..352 stay zero: no header extensions.
    let payload = &mut buf[DEFAULT_VOX_OFFSET..];
    for (chunk, &v) in payload.chunks_exact_mut(4).zip(v.voxels()) {
        LittleEndian::write_f32(chunk, v);
    }
    buf
}

/// Writes the volume as float32 NIfTI-1; a `.gz` extension gzips it.
pub fn write_volume(v: &Volume3D, path: &Path) -> Result<(), NiftiError> {
    let bytes = encode_volume(v);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz")) {
        let file = fs::File::create(path)?;
        let mut gz = flate2::write::GzEncoder::new(file, flate2::Compression::fast());
        std::io::Write::write_all(&mut gz, &bytes)?;
        gz.finish()?;
    } else {
        fs::write(path, bytes)?;
    }
    Ok(())
}

/// Human-readable header dump for the `info` subcommand.
pub fn header_report(path: &Path, header: &NiftiHeader) -> String {
    let (nx, ny, nz) = header.extents();
    let mut s = String::new();
    s.push_str(&format!("file:        {}\n", path.display()));
    s.push_str(&format!(
        "byte order:  {}\n",
        match header.endianness {
            Endianness::Little => "little-endian",
            Endianness::Big => "big-endian",
        }
    ));
    s.push_str(&format!("rank:        {}\n", header.dim[0]));
    s.push_str(&format!("extents:     {nx} x {ny} x {nz}\n"));
    s.push_str(&format!(
        "datatype:    {} (code {}, bitpix {})\n",
        header.datatype.name(),
        header.datatype.code(),
        header.bitpix
    ));
    s.push_str(&format!("pixdim:      {:?}\n", &header.pixdim[1..=3]));
    s.push_str(&format!(
        "scaling:     slope {} inter {}\n",
        header.scl_slope, header.scl_inter
    ));
    s.push_str(&format!("vox_offset:  {}\n", header.vox_offset));
    s.push_str(&format!(
        "qform/sform: {} / {} (read, not applied)\n",
        header.qform_code, header.sform_code
    ));
    s
}
