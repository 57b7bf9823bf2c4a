//! WAV ingestion and band-limited resampling.
//!
//! Everything downstream works on mono `f64` buffers; [`load_wav`] folds
//! multi-channel files to mono by averaging and scales integer PCM by its
//! full-scale value. [`resample`] is a Kaiser-windowed sinc polyphase
//! resampler whose cutoff sits at the lower of the two Nyquist frequencies.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

/// The analysis rate every feature extractor expects.
pub const ANALYSIS_RATE: u32 = 16_000;

pub const MIN_RATE: u32 = 8_000;
pub const MAX_RATE: u32 = 192_000;

/// Zero crossings of the low-rate sinc kept on each side of the kernel centre.
const HALF_ZERO_CROSSINGS: usize = 32;
const KAISER_BETA: f64 = 8.6;
/// Above this many distinct phases the kernel is evaluated on the fly.
const MAX_TABLE_PHASES: usize = 4096;

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported encoding: format tag 0x{tag:04x} with {bits} bits per sample")]
    UnsupportedEncoding { tag: u16, bits: u16 },
    #[error("corrupt header at byte offset {offset}: {reason}")]
    CorruptHeader { offset: usize, reason: String },
    #[error("audio contains no samples")]
    Empty,
    #[error("invalid sample rate {0} Hz (supported range {MIN_RATE}..={MAX_RATE})")]
    InvalidRate(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Mono waveform with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if !(MIN_RATE..=MAX_RATE).contains(&sample_rate) {
            return Err(AudioError::InvalidRate(sample_rate));
        }
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Sample encodings understood by the reader and writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Pcm24,
    Pcm32,
    Float32,
}

impl WavEncoding {
    fn bits(self) -> u16 {
        match self {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Pcm24 => 24,
            WavEncoding::Pcm32 => 32,
            WavEncoding::Float32 => 32,
        }
    }

    fn tag(self) -> u16 {
        match self {
            WavEncoding::Float32 => FORMAT_IEEE_FLOAT,
            _ => FORMAT_PCM,
        }
    }
}

/// Loads a RIFF/WAVE file and folds it to mono.
pub fn load_wav(path: &Path) -> Result<AudioBuffer, AudioError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(AudioError::FileNotFound(path.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    decode_wav(&bytes)
}

struct Format {
    encoding: WavEncoding,
    channels: usize,
    sample_rate: u32,
    block_align: usize,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn corrupt(offset: usize, reason: impl Into<String>) -> AudioError {
    AudioError::CorruptHeader { offset, reason: reason.into() }
}

/// Decodes an in-memory RIFF/WAVE image. Unknown chunks (LIST, INFO, ...)
/// are skipped.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    if bytes.len() < 12 {
        return Err(corrupt(0, "file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(corrupt(0, "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(corrupt(8, "missing WAVE form type"));
    }

    let mut format: Option<Format> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        if body + size > bytes.len() {
            return Err(corrupt(
                pos + 4,
                format!(
                    "chunk '{}' declares {} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    size,
                    bytes.len() - body
                ),
            ));
        }
        match id {
            b"fmt " => format = Some(parse_fmt(&bytes[body..body + size], body)?),
            b"data" => {
                let fmt = format
                    .as_ref()
                    .ok_or_else(|| corrupt(pos, "data chunk precedes fmt chunk"))?;
                return decode_samples(&bytes[body..body + size], fmt, body);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    Err(corrupt(pos.min(bytes.len()), "no data chunk found"))
}

fn parse_fmt(chunk: &[u8], offset: usize) -> Result<Format, AudioError> {
    if chunk.len() < 16 {
        return Err(corrupt(offset, "fmt chunk shorter than 16 bytes"));
    }
    let mut tag = read_u16(chunk, 0);
    let channels = read_u16(chunk, 2) as usize;
    let sample_rate = read_u32(chunk, 4);
    let block_align = read_u16(chunk, 12) as usize;
    let bits = read_u16(chunk, 14);

    if tag == FORMAT_EXTENSIBLE {
        if chunk.len() < 40 {
            return Err(corrupt(offset + 16, "extensible fmt chunk shorter than 40 bytes"));
        }
        tag = read_u16(chunk, 24);
    }
    let encoding = match (tag, bits) {
        (FORMAT_PCM, 16) => WavEncoding::Pcm16,
        (FORMAT_PCM, 24) => WavEncoding::Pcm24,
        (FORMAT_PCM, 32) => WavEncoding::Pcm32,
        (FORMAT_IEEE_FLOAT, 32) => WavEncoding::Float32,
        _ => return Err(AudioError::UnsupportedEncoding { tag, bits }),
    };
    if channels == 0 {
        return Err(corrupt(offset + 2, "zero channels"));
    }
    if block_align != channels * (bits as usize / 8) {
        return Err(corrupt(
            offset + 12,
            format!("block align {block_align} inconsistent with {channels} x {bits}-bit"),
        ));
    }
    if !(MIN_RATE..=MAX_RATE).contains(&sample_rate) {
        return Err(AudioError::InvalidRate(sample_rate));
    }
    Ok(Format { encoding, channels, sample_rate, block_align })
}

fn decode_samples(data: &[u8], fmt: &Format, offset: usize) -> Result<AudioBuffer, AudioError> {
    if !data.len().is_multiple_of(fmt.block_align) {
        return Err(corrupt(
            offset + data.len() - data.len() % fmt.block_align,
            "data chunk ends mid-frame",
        ));
    }
    let width = fmt.block_align / fmt.channels;
    let frames = data.len() / fmt.block_align;
    let mut samples = Vec::with_capacity(frames);
    for frame in data.chunks_exact(fmt.block_align) {
        let sum: f64 = frame.chunks_exact(width).map(|s| decode_one(s, fmt.encoding)).sum();
        samples.push(sum / fmt.channels as f64);
    }
    AudioBuffer::new(samples, fmt.sample_rate)
}

fn decode_one(b: &[u8], enc: WavEncoding) -> f64 {
    match enc {
        WavEncoding::Pcm16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32_768.0,
        WavEncoding::Pcm24 => {
            // sign-extend through the top byte of an i32
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        WavEncoding::Pcm32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        WavEncoding::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
    }
}

/// Encodes interleaved channels as a canonical 44-byte-header WAV image.
/// `channels` holds one equally long sample vector per channel.
pub fn encode_wav(channels: &[Vec<f64>], sample_rate: u32, enc: WavEncoding) -> Vec<u8> {
    let n_ch = channels.len().max(1);
    let frames = channels.first().map_or(0, Vec::len);
    let width = enc.bits() as usize / 8;
    let data_len = frames * n_ch * width;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&enc.tag().to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&((sample_rate as usize * n_ch * width) as u32).to_le_bytes());
    out.extend_from_slice(&((n_ch * width) as u16).to_le_bytes());
    out.extend_from_slice(&enc.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for t in 0..frames {
        for ch in channels {
            let x = ch[t];
            match enc {
                WavEncoding::Pcm16 => {
                    let v = (x * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
                    out.extend_from_slice(&v.to_le_bytes());
                }
                WavEncoding::Pcm24 => {
                    let v = (x * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                    out.extend_from_slice(&v.to_le_bytes()[..3]);
                }
                WavEncoding::Pcm32 => {
                    let v = (x * 2_147_483_648.0)
                        .round()
                        .clamp(-2_147_483_648.0, 2_147_483_647.0) as i32;
                    out.extend_from_slice(&v.to_le_bytes());
                }
                WavEncoding::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
            }
        }
    }
    out
}

pub fn write_wav(path: &Path, buf: &AudioBuffer, enc: WavEncoding) -> io::Result<()> {
    fs::write(path, encode_wav(std::slice::from_ref(&buf.samples), buf.sample_rate, enc))
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

struct Kernel {
    /// Cutoff as a fraction of the input rate's Nyquist-normalised sinc.
    scale: f64,
    half_width: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(source: u32, target: u32) -> Self {
        let scale = (target as f64 / source as f64).min(1.0);
        Self {
            scale,
            half_width: HALF_ZERO_CROSSINGS as f64 / scale,
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    /// Kernel weight at an offset of `tau` input samples.
    fn weight(&self, tau: f64) -> f64 {
        let u = tau / self.half_width;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / self.i0_beta;
        self.scale * sinc(self.scale * tau) * window
    }
}

/// Resamples to `target_rate` with a Kaiser-windowed sinc kernel
/// (64 zero crossings at the lower rate, beta 8.6). Equal rates return the
/// input unchanged.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer, AudioError> {
    if !(MIN_RATE..=MAX_RATE).contains(&target_rate) {
        return Err(AudioError::InvalidRate(target_rate));
    }
    if target_rate == buf.sample_rate {
        return Ok(buf.clone());
    }
    let src = buf.sample_rate as u64;
    let tgt = target_rate as u64;
    let g = gcd(src, tgt);
    let (up, down) = (tgt / g, src / g);

    let n_in = buf.samples.len() as u64;
    let n_out = ((n_in * tgt + src / 2) / src) as usize;

    let kernel = Kernel::new(buf.sample_rate, target_rate);
    let taps_half = kernel.half_width.ceil() as usize;
    let n_taps = 2 * taps_half;

    // phase p corresponds to a fractional input offset p / up
    let table: Option<Vec<f64>> = (up as usize <= MAX_TABLE_PHASES).then(|| {
        let mut t = vec![0.0; up as usize * n_taps];
        for p in 0..up as usize {
            let frac = p as f64 / up as f64;
            for k in 0..n_taps {
                t[p * n_taps + k] = kernel.weight(frac + taps_half as f64 - 1.0 - k as f64);
            }
        }
        t
    });

    let input = &buf.samples;
    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out as u64 {
        let num = i * down;
        let base = (num / up) as i64;
        let phase = (num % up) as usize;
        let first = base - taps_half as i64 + 1;
        let mut acc = 0.0;
        for k in 0..n_taps {
            let j = first + k as i64;
            if j < 0 || j >= n_in as i64 {
                continue;
            }
            let w = match &table {
                Some(t) => t[phase * n_taps + k],
                None => kernel.weight(
                    phase as f64 / up as f64 + taps_half as f64 - 1.0 - k as f64,
                ),
            };
            acc += w * input[j as usize];
        }
        out.push(acc);
    }
    AudioBuffer::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|t| amp * (2.0 * PI * freq * t as f64 / rate as f64).sin())
            .collect()
    }

    #[test]
    fn stereo_opposite_channels_average_to_silence() {
        let left = vec![16_384.0 / 32_768.0; 100];
        let right = vec![-16_384.0 / 32_768.0; 100];
        let bytes = encode_wav(&[left, right], 16_000, WavEncoding::Pcm16);
        let buf = decode_wav(&bytes).unwrap();
        assert_eq!(buf.len(), 100);
        assert!(buf.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_pcm16() {
        let bytes = encode_wav(&[vec![32_767.0 / 32_768.0]], 16_000, WavEncoding::Pcm16);
        let buf = decode_wav(&bytes).unwrap();
        assert_eq!(buf.samples[0], 32_767.0 / 32_768.0);
    }

    #[test]
    fn pcm24_and_pcm32_and_float_decode() {
        let x = vec![0.5, -0.25, -1.0, 0.0];
        for enc in [WavEncoding::Pcm24, WavEncoding::Pcm32, WavEncoding::Float32] {
            let buf = decode_wav(&encode_wav(std::slice::from_ref(&x), 22_050, enc)).unwrap();
            assert_eq!(buf.sample_rate, 22_050);
            for (a, b) in buf.samples.iter().zip(&x) {
                assert!((a - b).abs() < 1e-6, "{enc:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn skips_list_chunk() {
        let mut bytes = encode_wav(&[vec![0.25; 10]], 16_000, WavEncoding::Pcm16);
        // splice a LIST chunk with an odd payload between fmt and data
        let list: Vec<u8> = [b"LIST".as_slice(), &5u32.to_le_bytes(), b"INFOx", &[0]].concat();
        bytes.splice(36..36, list);
        let buf = decode_wav(&bytes).unwrap();
        assert_eq!(buf.samples, vec![0.25; 10]);
    }

    #[test]
    fn rejects_compressed_codec() {
        let mut bytes = encode_wav(&[vec![0.0; 4]], 16_000, WavEncoding::Pcm16);
        bytes[20..22].copy_from_slice(&0x0055u16.to_le_bytes()); // MPEG layer 3
        match decode_wav(&bytes) {
            Err(AudioError::UnsupportedEncoding { tag, .. }) => assert_eq!(tag, 0x0055),
            other => panic!("expected UnsupportedEncoding, got {other:?}"),
        }
    }

    #[test]
    fn truncated_data_reports_offset() {
        let mut bytes = encode_wav(&[vec![0.0; 4]], 16_000, WavEncoding::Pcm16);
        bytes.truncate(bytes.len() - 3);
        match decode_wav(&bytes) {
            Err(AudioError::CorruptHeader { offset, .. }) => assert_eq!(offset, 40),
            other => panic!("expected CorruptHeader, got {other:?}"),
        }
        assert!(matches!(
            decode_wav(b"RIFX\0\0\0\0WAVE"),
            Err(AudioError::CorruptHeader { offset: 0, .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_wav(Path::new("/nonexistent/x.wav")),
            Err(AudioError::FileNotFound(_))
        ));
    }

    #[test]
    fn output_length_follows_rate_ratio() {
        let buf = AudioBuffer::new(vec![0.0; 44_100], 44_100).unwrap();
        assert_eq!(resample(&buf, 16_000).unwrap().len(), 16_000);
        let buf = AudioBuffer::new(vec![0.0; 1001], 16_000).unwrap();
        // round(1001 * 22050 / 16000) = round(1379.53)
        assert_eq!(resample(&buf, 22_050).unwrap().len(), 1380);
    }

    #[test]
    fn equal_rate_is_identity() {
        let buf = AudioBuffer::new(tone(440.0, 16_000, 500, 0.3), 16_000).unwrap();
        assert_eq!(resample(&buf, 16_000).unwrap(), buf);
    }

    #[test]
    fn rejects_low_target_rate() {
        let buf = AudioBuffer::new(vec![0.0; 10], 16_000).unwrap();
        assert!(matches!(resample(&buf, 4_000), Err(AudioError::InvalidRate(4_000))));
    }

    #[test]
    fn tone_energy_preserved_when_upsampling() {
        let x = tone(1_000.0, 16_000, 16_000, 0.5);
        let e_in = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let buf = AudioBuffer::new(x, 16_000).unwrap();
        let y = resample(&buf, 44_100).unwrap();
        let e_out = y.samples.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((e_out / e_in - 1.0).abs() < 0.01, "ratio {}", e_out / e_in);
    }

    #[test]
    fn on_the_fly_kernel_matches_table() {
        // 16001 -> 16000 has 16000 phases, beyond the table limit
        let x = tone(300.0, 16_001, 4_000, 0.5);
        let y = resample(&AudioBuffer::new(x, 16_001).unwrap(), 16_000).unwrap();
        let expected = tone(300.0, 16_000, y.len(), 0.5);
        for t in 200..y.len() - 200 {
            assert!((y.samples[t] - expected[t]).abs() < 1e-3);
        }
    }
}
