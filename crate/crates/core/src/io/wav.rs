//! RIFF/WAVE reading and writing.
//!
//! Integer PCM is normalised by `2^(bits-1)`, so full-scale positive
//! samples land just under 1. Channels are mixed to mono with equal
//! weights.

use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavFormat {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

impl std::str::FromStr for WavFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(Self::Pcm16),
            "pcm24" => Ok(Self::Pcm24),
            "float32" => Ok(Self::Float32),
            _ => Err(Error::InvalidParameter(format!(
                "unknown WAV format {s:?} (pcm16, pcm24, float32)"
            ))),
        }
    }
}

pub fn load_wav(path: &Path) -> Result<Signal> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

pub fn decode_wav(bytes: &[u8]) -> Result<Signal> {
    let end = bytes.len() as u64;
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| map_error(e, bytes))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let declared = reader.len() as usize;
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedFormat(format!(
                    "{}-bit IEEE float",
                    spec.bits_per_sample
                )));
            }
            collect(reader.into_samples::<f32>(), declared, end, |s| s as f64)?
        }
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            collect(reader.into_samples::<i32>(), declared, end, |s| s as f64 * scale)?
        }
    };
    if samples.len() % channels != 0 {
        return Err(Error::Truncated {
            offset: end,
            detail: "final sample frame is incomplete".into(),
        });
    }
    Signal::from_interleaved(&samples, channels, spec.sample_rate)
}

fn collect<S, I>(iter: I, declared: usize, end: u64, convert: impl Fn(S) -> f64) -> Result<Vec<f64>>
where
    I: Iterator<Item = hound::Result<S>>,
{
    let mut out = Vec::with_capacity(declared);
    for s in iter {
        match s {
            Ok(v) => out.push(convert(v)),
            // hound reports a partial final sample as a format error
            Err(hound::Error::IoError(_)) | Err(hound::Error::FormatError(_)) if out.len() < declared => {
                return Err(Error::Truncated {
                    offset: end,
                    detail: format!("data chunk declares {declared} samples, {} present", out.len()),
                });
            }
            Err(e) => {
                return Err(Error::MalformedWav {
                    offset: end,
                    detail: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

fn map_error(e: hound::Error, bytes: &[u8]) -> Error {
    match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::Truncated {
            offset: bytes.len() as u64,
            detail: "file ends inside the header".into(),
        },
        hound::Error::IoError(_) | hound::Error::FormatError(_) if riff_declared_len(bytes).is_some_and(|n| n > bytes.len()) => {
            Error::Truncated {
                offset: bytes.len() as u64,
                detail: "file ends inside the header".into(),
            }
        }
        hound::Error::Unsupported => Error::UnsupportedFormat(describe_format(bytes)),
        other => Error::MalformedWav {
            offset: fmt_chunk(bytes).map_or(0, |(off, _)| off as u64),
            detail: other.to_string(),
        },
    }
}

/// Total file length the RIFF header claims.
fn riff_declared_len(bytes: &[u8]) -> Option<usize> {
    if bytes.get(..4)? != b"RIFF" {
        return None;
    }
    let size = u32::from_le_bytes(bytes.get(4..8)?.try_into().ok()?);
    Some(size as usize + 8)
}

/// Offset and body of the `fmt ` chunk.
fn fmt_chunk(bytes: &[u8]) -> Option<(usize, &[u8])> {
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().ok()?) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            return Some((pos, &bytes[body..(body + len).min(bytes.len())]));
        }
        pos = body + len + (len & 1);
    }
    None
}

/// Human-readable name of the file's encoding, for error messages.
fn describe_format(bytes: &[u8]) -> String {
    let Some((_, body)) = fmt_chunk(bytes) else {
        return "unknown encoding".into();
    };
    if body.len() < 16 {
        return "unknown encoding".into();
    }
    let mut tag = u16::from_le_bytes([body[0], body[1]]);
    let bits = u16::from_le_bytes([body[14], body[15]]);
    if tag == 0xFFFE && body.len() >= 26 {
        tag = u16::from_le_bytes([body[24], body[25]]);
    }
    let name = match tag {
        0x0001 => "integer PCM",
        0x0002 => "Microsoft ADPCM",
        0x0003 => "IEEE float",
        0x0006 => "A-law",
        0x0007 => "mu-law",
        0x0011 => "IMA ADPCM",
        0x0055 => "MPEG layer 3",
        _ => "unrecognised",
    };
    format!("{name} (format tag 0x{tag:04X}, {bits} bits per sample)")
}

pub fn encode_wav(signal: &Signal, format: WavFormat) -> Result<Vec<u8>> {
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, hound::SampleFormat::Int),
        WavFormat::Pcm24 => (24, hound::SampleFormat::Int),
        WavFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut buf, spec).map_err(write_error)?;
        match format {
            WavFormat::Float32 => {
                for &s in signal.samples() {
                    w.write_sample(s as f32).map_err(write_error)?;
                }
            }
            WavFormat::Pcm16 | WavFormat::Pcm24 => {
                let full = (1i64 << (bits - 1)) as f64;
                for &s in signal.samples() {
                    let v = (s * full).round().clamp(-full, full - 1.0) as i32;
                    w.write_sample(v).map_err(write_error)?;
                }
            }
        }
        w.finalize().map_err(write_error)?;
    }
    Ok(buf.into_inner())
}

fn write_error(e: hound::Error) -> Error {
    Error::InvalidParameter(format!("WAV encoding: {e}"))
}

pub fn save_wav(path: &Path, signal: &Signal, format: WavFormat) -> Result<()> {
    let bytes = encode_wav(signal, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_bytes(channels: u16, samples: &[i16]) -> Vec<u8> {
        let spec = hound::WavSpec {
            channels,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut buf = Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        buf.into_inner()
    }

    #[test]
    fn full_scale_16_bit() {
        let s = decode_wav(&pcm16_bytes(1, &[32767, -32768, 0])).unwrap();
        assert_eq!(s.samples(), &[32767.0 / 32768.0, -1.0, 0.0]);
    }

    #[test]
    fn identical_stereo_channels_mix_to_either() {
        let s = decode_wav(&pcm16_bytes(2, &[1000, 1000, -2000, -2000, 7, 7])).unwrap();
        assert_eq!(s.samples(), &[1000.0 / 32768.0, -2000.0 / 32768.0, 7.0 / 32768.0]);
    }

    #[test]
    fn float32_round_trip_is_bit_exact() {
        let samples: Vec<f64> = (0..1000).map(|i| ((i as f32 * 0.37).sin() * 0.9) as f64).collect();
        let s = Signal::new(samples, 44_100).unwrap();
        let bytes = encode_wav(&s, WavFormat::Float32).unwrap();
        let back = decode_wav(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode_wav(&back, WavFormat::Float32).unwrap(), bytes);
    }

    #[test]
    fn pcm24_round_trip_within_one_lsb() {
        let s = Signal::new(vec![0.5, -0.25, 0.999, -1.0], 48_000).unwrap();
        let back = decode_wav(&encode_wav(&s, WavFormat::Pcm24).unwrap()).unwrap();
        for (a, b) in s.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 8_388_608.0);
        }
    }

    #[test]
    fn truncated_data_reports_offset() {
        let mut bytes = pcm16_bytes(1, &[1; 100]);
        bytes.truncate(bytes.len() - 11);
        match decode_wav(&bytes) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, bytes.len() as u64),
            other => panic!("{other:?}"),
        }
        match decode_wav(&bytes[..20]) {
            Err(Error::Truncated { offset: 20, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsupported_codec_is_named() {
        let mut bytes = pcm16_bytes(1, &[1; 10]);
        // rewrite the format tag to 0x0002
        let (off, _) = fmt_chunk(&bytes).unwrap();
        bytes[off + 8] = 2;
        match decode_wav(&bytes) {
            Err(Error::UnsupportedFormat(msg)) => assert!(msg.contains("ADPCM"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn not_a_wav() {
        assert!(matches!(decode_wav(b"RIFX....WAVEnonsense"), Err(Error::MalformedWav { .. })));
    }
}
