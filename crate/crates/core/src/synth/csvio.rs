//! EEG CSV files.
//!
//! ```text
//! # fs=250 layout=standard16
//! time_s,Fp1,Fp2,...,Oz
//! 0.000000,12.3456,-3.21,...
//! ```
//! Values are microvolts with 6 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::SynthError;
use crate::clock::Clock;
use crate::signal::{split_chunk, ChannelLayout, EegChunk};

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Shortest plain decimal with `SIGNIFICANT_DIGITS` significant digits.
pub fn format_significant(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{exp}");
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, v);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    pub layout: ChannelLayout,
    pub sampling_rate_hz: f64,
    /// Rows regrouped into contiguous runs; a timestamp jump starts a new chunk.
    pub chunks: Vec<EegChunk>,
}

impl EegRecording {
    pub fn frames(&self) -> usize {
        self.chunks.iter().map(EegChunk::frames).sum()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sampling_rate_hz
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            chunks: self.chunks.iter().map(|c| c.scaled(factor)).collect(),
            ..self.clone()
        }
    }
}

pub fn write_eeg_csv<W: Write>(
    out: W,
    layout: &ChannelLayout,
    chunks: &[EegChunk],
) -> Result<(), SynthError> {
    let fs = chunks.first().map_or(250.0, |c| c.sampling_rate_hz);
    let mut out = BufWriter::new(out);
    let io = |e: std::io::Error| SynthError::Io(e.to_string());
    writeln!(out, "# fs={} layout={}", fs, layout.name).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| SynthError::Io(e.to_string());
    let mut header = vec!["time_s".to_string()];
    header.extend(layout.channel_names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for chunk in chunks {
        for i in 0..chunk.frames() {
            row.clear();
            row.push(format!("{:.6}", chunk.start_time_s + i as f64 / chunk.sampling_rate_hz));
            row.extend(chunk.samples.iter().map(|ch| format_significant(ch[i])));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn write_eeg_csv_file(path: &Path, layout: &ChannelLayout, chunks: &[EegChunk]) -> Result<(), SynthError> {
    let f = File::create(path).map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
    write_eeg_csv(f, layout, chunks)
}

fn parse_metadata(line: &str) -> Result<(f64, ChannelLayout), SynthError> {
    let missing = |what: &str| SynthError::MissingMetadata(what.to_string());
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| missing("first line must be '# fs=<Hz> layout=<name>'"))?;
    let mut fs = None;
    let mut layout = None;
    for token in body.split_whitespace() {
        match token.split_once('=') {
            Some(("fs", v)) => fs = v.parse::<f64>().ok().filter(|f| *f > 0.0 && f.is_finite()),
            Some(("layout", v)) => layout = Some(v.to_string()),
            _ => {}
        }
    }
    let fs = fs.ok_or_else(|| missing("fs"))?;
    let name = layout.ok_or_else(|| missing("layout"))?;
    let layout = ChannelLayout::by_name(&name).ok_or_else(|| missing(&format!("known layout (got '{name}')")))?;
    Ok((fs, layout))
}

pub fn read_eeg_csv<R: Read>(input: R) -> Result<EegRecording, SynthError> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| SynthError::Io(e.to_string()))?;
    let (fs, layout) = parse_metadata(&first)?;
    let channels = layout.channel_names.len();

    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    // metadata occupies file line 1
    let file_line = |rec: &csv::StringRecord| rec.position().map_or(0, |p| p.line() as usize + 1);
    let malformed = |line: usize, column: usize, reason: String| SynthError::MalformedFile { line, column, reason };

    let mut records = csv.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(malformed(2, 1, e.to_string())),
        None => return Err(malformed(2, 1, "missing header row".into())),
    };
    if header.len() != channels + 1 {
        return Err(malformed(
            file_line(&header),
            header.len().min(channels + 1) + 1,
            format!("expected {} channel columns, found {}", channels, header.len().saturating_sub(1)),
        ));
    }
    if &header[0] != "time_s" {
        return Err(malformed(file_line(&header), 1, format!("expected 'time_s', found '{}'", &header[0])));
    }
    for (c, want) in layout.channel_names.iter().enumerate() {
        if &header[c + 1] != want {
            return Err(malformed(
                file_line(&header),
                c + 2,
                format!("expected channel '{want}', found '{}'", &header[c + 1]),
            ));
        }
    }

    let half_frame = 0.5 / fs;
    let mut chunks: Vec<EegChunk> = Vec::new();
    let mut current: Option<EegChunk> = None;
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize + 1);
            malformed(line, 1, e.to_string())
        })?;
        let line = file_line(&rec);
        if rec.len() != channels + 1 {
            return Err(malformed(
                line,
                rec.len().min(channels + 1) + 1,
                format!("expected {} fields, found {}", channels + 1, rec.len()),
            ));
        }
        let mut values = Vec::with_capacity(channels + 1);
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| malformed(line, col + 1, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(malformed(line, col + 1, format!("non-finite value '{field}'")));
            }
            values.push(v);
        }
        let t = values[0];
        let continues = current
            .as_ref()
            .is_some_and(|c| (c.end_time_s() - t).abs() <= half_frame);
        if !continues {
            if let Some(c) = current.take() {
                if t < c.end_time_s() - half_frame {
                    return Err(malformed(line, 1, format!("time {t} s goes backwards")));
                }
                chunks.push(c);
            }
            let mut fresh = EegChunk::zeros(t, fs, 0);
            fresh.samples = vec![Vec::new(); channels];
            current = Some(fresh);
        }
        let chunk = current.as_mut().expect("set above");
        for (row, v) in chunk.samples.iter_mut().zip(&values[1..]) {
            row.push(*v);
        }
    }
    chunks.extend(current);
    Ok(EegRecording { layout, sampling_rate_hz: fs, chunks })
}

pub fn read_eeg_csv_file(path: &Path) -> Result<EegRecording, SynthError> {
    let f = File::open(path).map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
    read_eeg_csv(f)
}

/// Replays a recording as `chunk_frames`-sized chunks with their original
/// timestamps. In realtime mode each chunk is released once the clock reaches
/// its last sample time divided by `speed`.
pub struct Replay<C: Clock> {
    chunks: std::vec::IntoIter<EegChunk>,
    realtime: bool,
    speed: f64,
    origin_s: f64,
    data_origin_s: f64,
    clock: C,
}

impl<C: Clock> Replay<C> {
    pub fn new(recording: &EegRecording, chunk_frames: usize, realtime: bool, speed: f64, clock: C) -> Self {
        assert!(speed > 0.0, "replay speed must be positive");
        let pieces: Vec<EegChunk> = recording
            .chunks
            .iter()
            .flat_map(|c| split_chunk(c, chunk_frames.max(1)))
            .collect();
        let data_origin_s = pieces.first().map_or(0.0, |c| c.start_time_s);
        Self {
            chunks: pieces.into_iter(),
            realtime,
            speed,
            origin_s: clock.now_s(),
            data_origin_s,
            clock,
        }
    }

    pub fn clock(&self) -> &C {
        &self.clock
    }
}

impl<C: Clock> Iterator for Replay<C> {
    type Item = EegChunk;

    fn next(&mut self) -> Option<EegChunk> {
        let chunk = self.chunks.next()?;
        if self.realtime {
            let due = self.origin_s + (chunk.end_time_s() - self.data_origin_s) / self.speed;
            self.clock.sleep_until(due);
        }
        Some(chunk)
    }
}

pub fn replay<C: Clock>(
    path: &Path,
    realtime: bool,
    speed: f64,
    chunk_frames: usize,
    clock: C,
) -> Result<Replay<C>, SynthError> {
    let rec = read_eeg_csv_file(path)?;
    Ok(Replay::new(&rec, chunk_frames, realtime, speed, clock))
}
