//! RIFF/WAVE input and output for 16-bit PCM, 24-bit PCM and 32-bit float.
//!
//! Parse failures report the byte offset of the offending field.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::signal::StereoSignal;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("malformed WAV at byte offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    #[error("mono input where stereo is required (pass --upmix to duplicate the channel)")]
    Mono,
    #[error("{0} channels where stereo is required")]
    TooManyChannels(u16),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Pcm24 => 24,
            SampleFormat::Float32 => 32,
        }
    }

    fn tag(self) -> u16 {
        match self {
            SampleFormat::Float32 => 3,
            _ => 1,
        }
    }
}

/// Decoded audio, one vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

fn malformed(offset: usize, reason: impl Into<String>) -> WavError {
    WavError::Malformed {
        offset,
        reason: reason.into(),
    }
}

fn read_u16(b: &[u8], at: usize) -> Result<u16, WavError> {
    b.get(at..at + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| malformed(at, "truncated 16-bit field"))
}

fn read_u32(b: &[u8], at: usize) -> Result<u32, WavError> {
    b.get(at..at + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| malformed(at, "truncated 32-bit field"))
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

pub fn decode(bytes: &[u8]) -> Result<WavData, WavError> {
    if bytes.get(0..4) != Some(b"RIFF") {
        return Err(malformed(0, "missing RIFF tag"));
    }
    read_u32(bytes, 4)?;
    if bytes.get(8..12) != Some(b"WAVE") {
        return Err(malformed(8, "missing WAVE tag"));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4)? as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| malformed(pos + 4, format!("chunk size {size} runs past end of file")))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed(pos + 4, format!("fmt chunk of {size} bytes")));
                }
                let mut tag = read_u16(bytes, body)?;
                let channels = read_u16(bytes, body + 2)?;
                let sample_rate = read_u32(bytes, body + 4)?;
                let bits = read_u16(bytes, body + 14)?;
                if tag == 0xFFFE {
                    if size < 40 {
                        return Err(malformed(pos + 4, "short extensible fmt chunk"));
                    }
                    tag = read_u16(bytes, body + 24)?;
                }
                if channels == 0 {
                    return Err(malformed(body + 2, "zero channels"));
                }
                format = Some(Format {
                    tag,
                    channels,
                    sample_rate,
                    bits,
                });
            }
            b"data" => {
                let fmt = format
                    .as_ref()
                    .ok_or_else(|| malformed(pos, "data chunk before fmt chunk"))?;
                return decode_samples(&bytes[body..end], fmt, body);
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(malformed(pos.min(bytes.len()), "no data chunk"))
}

fn decode_samples(data: &[u8], fmt: &Format, offset: usize) -> Result<WavData, WavError> {
    let width = match (fmt.tag, fmt.bits) {
        (1, 16) => 2,
        (1, 24) => 3,
        (1, 32) | (3, 32) => 4,
        (3, 64) => 8,
        (tag, bits) => {
            return Err(WavError::Unsupported(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    let ch = fmt.channels as usize;
    let frame = width * ch;
    if data.len() % frame != 0 {
        return Err(malformed(
            offset,
            format!("data length {} is not a multiple of the {frame}-byte frame", data.len()),
        ));
    }
    let frames = data.len() / frame;
    let mut channels = vec![Vec::with_capacity(frames); ch];
    for (i, chunk) in data.chunks_exact(width).enumerate() {
        let v = match (fmt.tag, width) {
            (1, 2) => i16::from_le_bytes([chunk[0], chunk[1]]) as f64 / 32768.0,
            (1, 3) => {
                let raw = i32::from_le_bytes([0, chunk[0], chunk[1], chunk[2]]) >> 8;
                raw as f64 / 8_388_608.0
            }
            (1, 4) => i32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64 / 2_147_483_648.0,
            (3, 4) => f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64,
            _ => {
                let mut b = [0u8; 8];
                b.copy_from_slice(chunk);
                f64::from_le_bytes(b)
            }
        };
        if !v.is_finite() {
            return Err(malformed(offset + i * width, "non-finite sample"));
        }
        channels[i % ch].push(v);
    }
    Ok(WavData {
        sample_rate: fmt.sample_rate,
        channels,
    })
}

pub fn read(path: impl AsRef<Path>) -> Result<WavData, WavError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

/// Reads a stereo file. Mono input is duplicated onto both channels when
/// `upmix` is set and rejected otherwise.
pub fn read_stereo(path: impl AsRef<Path>, upmix: bool) -> crate::Result<StereoSignal> {
    let data = read(path)?;
    let sr = data.sample_rate;
    let mut chans = data.channels;
    match chans.len() {
        1 if upmix => Ok(StereoSignal::upmix(chans.pop().expect("one channel"), sr)?),
        1 => Err(WavError::Mono.into()),
        2 => {
            let r = chans.pop().expect("two channels");
            let l = chans.pop().expect("two channels");
            Ok(StereoSignal::new(l, r, sr)?)
        }
        n => Err(WavError::TooManyChannels(n as u16).into()),
    }
}

/// Encodes interleaved channels; integer formats are clipped to full scale.
pub fn encode(channels: &[&[f64]], sample_rate: u32, format: SampleFormat) -> Vec<u8> {
    let ch = channels.len();
    let frames = channels.first().map_or(0, |c| c.len());
    let width = (format.bits() / 8) as usize;
    let data_len = frames * ch * width;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.tag().to_le_bytes());
    out.extend_from_slice(&(ch as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * (ch * width) as u32).to_le_bytes());
    out.extend_from_slice(&((ch * width) as u16).to_le_bytes());
    out.extend_from_slice(&format.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for i in 0..frames {
        for c in channels {
            let v = c[i];
            match format {
                SampleFormat::Pcm16 => {
                    let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    out.extend_from_slice(&q.to_le_bytes());
                }
                SampleFormat::Pcm24 => {
                    let q = (v * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                    out.extend_from_slice(&q.to_le_bytes()[..3]);
                }
                SampleFormat::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    out
}

pub fn write(
    path: impl AsRef<Path>,
    channels: &[&[f64]],
    sample_rate: u32,
    format: SampleFormat,
) -> Result<(), WavError> {
    let path = path.as_ref();
    let io_err = |source| WavError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&encode(channels, sample_rate, format))
        .map_err(io_err)
}

pub fn write_stereo(path: impl AsRef<Path>, x: &StereoSignal, format: SampleFormat) -> Result<(), WavError> {
    write(path, &[x.channel(0), x.channel(1)], x.sample_rate(), format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_round_trip_within_quantization() {
        let l: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin() * 0.9).collect();
        let r: Vec<f64> = l.iter().map(|v| -v * 0.5).collect();
        for (fmt, tol) in [
            (SampleFormat::Pcm16, 1.0 / 32768.0),
            (SampleFormat::Pcm24, 1.0 / 8_388_608.0),
            (SampleFormat::Float32, 1e-7),
        ] {
            let data = decode(&encode(&[&l, &r], 48_000, fmt)).unwrap();
            assert_eq!(data.sample_rate, 48_000);
            assert_eq!(data.channels.len(), 2);
            for (a, b) in data.channels[0].iter().zip(&l).chain(data.channels[1].iter().zip(&r)) {
                assert!((a - b).abs() <= tol, "{fmt:?}");
            }
        }
    }

    #[test]
    fn negative_24_bit_sign_extends() {
        let data = decode(&encode(&[&[-0.5]], 48_000, SampleFormat::Pcm24)).unwrap();
        assert_eq!(data.channels[0][0], -0.5);
    }

    #[test]
    fn malformed_headers_name_offsets() {
        let good = encode(&[&[0.1, 0.2], &[0.3, 0.4]], 48_000, SampleFormat::Pcm16);
        let err = decode(b"RIFX\0\0\0\0WAVE").unwrap_err();
        assert!(err.to_string().contains("offset 0"), "{err}");
        let mut bad = good.clone();
        bad[8..12].copy_from_slice(b"AVI ");
        assert!(decode(&bad).unwrap_err().to_string().contains("offset 8"));
        let mut bad = good.clone();
        bad[40..44].copy_from_slice(&1000u32.to_le_bytes());
        assert!(decode(&bad).unwrap_err().to_string().contains("offset 40"));
        assert!(decode(&good[..20]).is_err());
    }

    #[test]
    fn unsupported_encoding() {
        let mut bytes = encode(&[&[0.0]], 48_000, SampleFormat::Pcm16);
        bytes[34..36].copy_from_slice(&8u16.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(WavError::Unsupported(_))));
    }

    #[test]
    fn mono_requires_upmix() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mono.wav");
        write(&p, &[&[0.25, -0.25]], 48_000, SampleFormat::Float32).unwrap();
        assert!(matches!(read_stereo(&p, false), Err(crate::Error::Wav(WavError::Mono))));
        let x = read_stereo(&p, true).unwrap();
        assert_eq!(x.channel(0), x.channel(1));
    }
}
