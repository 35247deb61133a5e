use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result, WavError};
use crate::stft::TimeSignal;

fn wav_error(err: hound::Error) -> WavError {
    match err {
        hound::Error::IoError(e) => WavError::Io(e),
        hound::Error::FormatError(msg) => WavError::MalformedHeader(msg.to_string()),
        hound::Error::Unsupported => WavError::UnsupportedCodec("unsupported WAV layout".into()),
        other => WavError::MalformedHeader(other.to_string()),
    }
}

/// Reads a PCM16 or float32 WAV file, averaging channels to mono.
///
/// With `expected_rate`, a file at any other rate is rejected; nothing is
/// resampled.
pub fn load_wav(path: impl AsRef<Path>, expected_rate: Option<u32>) -> Result<TimeSignal> {
    let reader = WavReader::open(path.as_ref()).map_err(wav_error)?;
    let spec = reader.spec();
    if let Some(expected) = expected_rate {
        if spec.sample_rate != expected {
            return Err(WavError::RateMismatch {
                expected,
                found: spec.sample_rate,
            }
            .into());
        }
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_error)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_error)?,
        (format, bits) => {
            return Err(WavError::UnsupportedCodec(format!(
                "{bits}-bit {format:?}; only 16-bit PCM and 32-bit float are read"
            ))
            .into())
        }
    };
    let channels = usize::from(spec.channels.max(1));
    let samples = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();
    TimeSignal::new(samples, spec.sample_rate)
}

/// Writes a mono float32 WAV file.
pub fn write_wav(path: impl AsRef<Path>, signal: &TimeSignal) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let path = path.as_ref();
    let io_err = |e: hound::Error| match e {
        hound::Error::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Wav(wav_error(other)),
    };
    let mut writer = WavWriter::create(path, spec).map_err(io_err)?;
    for &v in signal.samples() {
        writer.write_sample(v as f32).map_err(io_err)?;
    }
    writer.finalize().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let samples: Vec<f64> = (0..1000).map(|i| (0.01 * i as f64).sin() * 0.9).collect();
        let x = TimeSignal::new(samples.clone(), 22050).unwrap();
        write_wav(&path, &x).unwrap();
        let y = load_wav(&path, Some(22050)).unwrap();
        assert_eq!(y.sample_rate(), 22050);
        for (a, b) in samples.iter().zip(y.samples()) {
            assert!((a - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn pcm16_square_wave_and_downmix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sq.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 22050,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for i in 0..200 {
            let v = if (i / 10) % 2 == 0 { i16::MAX } else { i16::MIN };
            w.write_sample(v).unwrap();
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let x = load_wav(&path, None).unwrap();
        assert_eq!(x.len(), 200);
        for v in x.samples() {
            assert!((v.abs() - 1.0).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn distinct_failures() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hi.wav");
        write_wav(&path, &TimeSignal::new(vec![0.0; 10], 44100).unwrap()).unwrap();
        assert!(matches!(
            load_wav(&path, Some(22050)),
            Err(Error::Wav(WavError::RateMismatch {
                expected: 22050,
                found: 44100
            }))
        ));

        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"RIFF\x10\x00\x00\x00NOTAWAVEFILE").unwrap();
        assert!(matches!(
            load_wav(&junk, None),
            Err(Error::Wav(WavError::MalformedHeader(_)))
        ));

        let pcm24 = dir.path().join("pcm24.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 22050,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&pcm24, spec).unwrap();
        w.write_sample(5i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            load_wav(&pcm24, None),
            Err(Error::Wav(WavError::UnsupportedCodec(_)))
        ));

        assert!(matches!(
            load_wav(dir.path().join("missing.wav"), None),
            Err(Error::Wav(WavError::Io(_)))
        ));
    }
}
