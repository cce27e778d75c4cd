//! Minimal mono WAV reader/writer: 16-bit PCM and 32-bit IEEE float.
//!
//! Internal processing is 64-bit float throughout; files exchange either
//! PCM16 (quantized) or float32 (preferred for synthetic tracks, which can
//! exceed full scale).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

/// Sample encoding for writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

pub fn write_wav(
    path: &Path,
    samples: &[f64],
    sample_rate: u32,
    format: SampleFormat,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (fmt_tag, bits) = match format {
        SampleFormat::Pcm16 => (FORMAT_PCM, 16u16),
        SampleFormat::Float32 => (FORMAT_IEEE_FLOAT, 32u16),
    };
    let bytes_per_sample = (bits / 8) as u32;
    let data_len = samples.len() as u32 * bytes_per_sample;

    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len).to_le_bytes())?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&fmt_tag.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?; // mono
    w.write_all(&sample_rate.to_le_bytes())?;
    w.write_all(&(sample_rate * bytes_per_sample).to_le_bytes())?;
    w.write_all(&(bytes_per_sample as u16).to_le_bytes())?;
    w.write_all(&bits.to_le_bytes())?;
    w.write_all(b"data")?;
    w.write_all(&data_len.to_le_bytes())?;
    match format {
        SampleFormat::Pcm16 => {
            for &s in samples {
                let q = (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
                w.write_all(&q.to_le_bytes())?;
            }
        }
        SampleFormat::Float32 => {
            for &s in samples {
                w.write_all(&(s as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a mono WAV file. Returns samples in full-scale units plus the rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 12];
    r.read_exact(&mut header)?;
    if &header[0..4] != b"RIFF" || &header[8..12] != b"WAVE" {
        return Err(Error::Data(format!("{}: not a RIFF/WAVE file", path.display())));
    }

    let mut fmt_tag = 0u16;
    let mut channels = 0u16;
    let mut sample_rate = 0u32;
    let mut bits = 0u16;
    let mut data: Option<Vec<u8>> = None;

    loop {
        let mut chunk_header = [0u8; 8];
        match r.read_exact(&mut chunk_header) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let id = &chunk_header[0..4];
        let size = u32::from_le_bytes(chunk_header[4..8].try_into().unwrap()) as usize;
        match id {
            b"fmt " => {
                let mut body = vec![0u8; size];
                r.read_exact(&mut body)?;
                if size < 16 {
                    return Err(Error::Data("fmt chunk too short".into()));
                }
                fmt_tag = u16::from_le_bytes(body[0..2].try_into().unwrap());
                channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
            }
            b"data" => {
                let mut body = vec![0u8; size];
                r.read_exact(&mut body)?;
                data = Some(body);
            }
            _ => {
                // Skip unknown chunks (LIST, fact, ...), padded to even size.
                let skip = size + (size & 1);
                std::io::copy(&mut r.by_ref().take(skip as u64), &mut std::io::sink())?;
            }
        }
        if size & 1 == 1 && id == b"data" {
            let mut pad = [0u8; 1];
            let _ = r.read_exact(&mut pad);
        }
    }

    let data = data.ok_or_else(|| Error::Data("missing data chunk".into()))?;
    if channels != 1 {
        return Err(Error::Data(format!(
            "{}: expected mono, got {channels} channels",
            path.display()
        )));
    }
    let samples = match (fmt_tag, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64 / i16::MAX as f64)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        _ => {
            return Err(Error::Data(format!(
                "unsupported WAV encoding: format {fmt_tag}, {bits} bits"
            )))
        }
    };
    Ok((samples, sample_rate))
}
