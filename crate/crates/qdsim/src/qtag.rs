//! QTAG binary tag files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "QTAG"  version:u16  flags:u16  channels:u8  duration_ps:u64
//! metadata_len:u32  metadata: UTF-8 "key=value\n" lines
//! records: channel:u8 timestamp_ps:u64
//!          [frequency_hz:f64 dephasing_per_s:f64]   flags bit 0
//!          [excitation_ps:u64]                      flags bit 1
//! ```
//!
//! Channel labels travel as the metadata line `qtag.channel_labels`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use qdsim_core::photon::TagStream;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QTAG";
pub const VERSION: u16 = 1;
pub const FLAG_TRUTH: u16 = 1;
pub const FLAG_EXCITATION: u16 = 1 << 1;
const KNOWN_FLAGS: u16 = FLAG_TRUTH | FLAG_EXCITATION;
const LABELS_KEY: &str = "qtag.channel_labels";
const FIXED_HEADER: usize = 4 + 2 + 2 + 1 + 8 + 4;

pub fn record_size(flags: u16) -> usize {
    let mut n = 1 + 8;
    if flags & FLAG_TRUTH != 0 {
        n += 16;
    }
    if flags & FLAG_EXCITATION != 0 {
        n += 8;
    }
    n
}

fn flags_of(stream: &TagStream) -> u16 {
    let mut flags = 0;
    if stream.has_truth() {
        flags |= FLAG_TRUTH;
    }
    if stream.excitation_times().is_some() {
        flags |= FLAG_EXCITATION;
    }
    flags
}

fn metadata_block(stream: &TagStream) -> Result<Vec<u8>> {
    let mut text = String::new();
    for label in stream.channel_labels() {
        if label.contains([',', '\n']) {
            return Err(Error::Usage(format!("channel label {label:?} contains ',' or a newline")));
        }
    }
    let mut entries: Vec<(&str, String)> = vec![(LABELS_KEY, stream.channel_labels().join(","))];
    for (k, v) in stream.metadata() {
        if k == LABELS_KEY {
            continue;
        }
        if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::Usage(format!("metadata entry {k:?} cannot be stored as a key=value line")));
        }
        entries.push((k, v.clone()));
    }
    for (k, v) in entries {
        text.push_str(k);
        text.push('=');
        text.push_str(&v);
        text.push('\n');
    }
    Ok(text.into_bytes())
}

/// Total encoded size of `stream` in bytes.
pub fn encoded_len(stream: &TagStream) -> Result<u64> {
    Ok((FIXED_HEADER + metadata_block(stream)?.len()) as u64 + stream.len() as u64 * record_size(flags_of(stream)) as u64)
}

struct Counted<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Counted<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes).map_err(|source| Error::Io { offset: self.written, source })?;
        self.written += bytes.len() as u64;
        Ok(())
    }
}

/// Encodes `stream` into `sink`; returns the number of bytes written.
pub fn write_stream<W: Write>(stream: &TagStream, sink: W) -> Result<u64> {
    let flags = flags_of(stream);
    let meta = metadata_block(stream)?;
    let meta_len = u32::try_from(meta.len()).map_err(|_| Error::Usage("metadata exceeds 4 GiB".into()))?;
    let mut out = Counted { inner: io::BufWriter::with_capacity(1 << 20, sink), written: 0 };
    let mut header = Vec::with_capacity(FIXED_HEADER);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&flags.to_le_bytes());
    header.push(stream.channel_count() as u8);
    header.extend_from_slice(&stream.duration().to_le_bytes());
    header.extend_from_slice(&meta_len.to_le_bytes());
    out.put(&header)?;
    out.put(&meta)?;

    let size = record_size(flags);
    let truth = stream.truth_frequencies().zip(stream.truth_dephasing_rates());
    let excitation = stream.excitation_times();
    let mut chunk = Vec::with_capacity(size * 4096);
    for (i, (&c, &t)) in stream.channels().iter().zip(stream.timestamps()).enumerate() {
        chunk.push(c);
        chunk.extend_from_slice(&t.to_le_bytes());
        if let Some((f, g)) = truth {
            chunk.extend_from_slice(&f[i].to_le_bytes());
            chunk.extend_from_slice(&g[i].to_le_bytes());
        }
        if let Some(e) = excitation {
            chunk.extend_from_slice(&e[i].to_le_bytes());
        }
        if chunk.len() >= size * 4096 {
            out.put(&chunk)?;
            chunk.clear();
        }
    }
    out.put(&chunk)?;
    let written = out.written;
    out.inner.flush().map_err(|source| Error::Io { offset: written, source })?;
    Ok(written)
}

fn take<'a>(bytes: &'a [u8], at: usize, n: usize, what: &str) -> Result<&'a [u8]> {
    bytes.get(at..at + n).ok_or_else(|| {
        Error::format(at as u64, format!("truncated {what}: expected {n} bytes, found {}", bytes.len().saturating_sub(at)))
    })
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

/// Decodes a complete QTAG file from `bytes`.
pub fn decode(bytes: &[u8]) -> Result<TagStream> {
    let magic = take(bytes, 0, 4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected \"QTAG\"")));
    }
    let version = u16::from_le_bytes(take(bytes, 4, 2, "version")?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let flags = u16::from_le_bytes(take(bytes, 6, 2, "flags")?.try_into().expect("2 bytes"));
    if flags & !KNOWN_FLAGS != 0 || (flags & FLAG_EXCITATION != 0 && flags & FLAG_TRUTH == 0) {
        return Err(Error::format(6, format!("unsupported flags {flags:#06x}")));
    }
    let n_channels = take(bytes, 8, 1, "channel count")?[0];
    if n_channels == 0 {
        return Err(Error::format(8, "channel count is zero"));
    }
    let duration = u64_at(take(bytes, 9, 8, "duration")?, 0);
    let meta_len = u32::from_le_bytes(take(bytes, 17, 4, "metadata length")?.try_into().expect("4 bytes")) as usize;
    let meta_bytes = take(bytes, FIXED_HEADER, meta_len, "metadata")?;
    let text = std::str::from_utf8(meta_bytes)
        .map_err(|e| Error::format((FIXED_HEADER + e.valid_up_to()) as u64, "metadata is not UTF-8"))?;
    let mut metadata = BTreeMap::new();
    let mut labels = None;
    let mut offset = FIXED_HEADER;
    for line in text.split_inclusive('\n') {
        let body = line.strip_suffix('\n').ok_or_else(|| Error::format(offset as u64, "metadata line without newline"))?;
        let (k, v) = body.split_once('=').ok_or_else(|| Error::format(offset as u64, "metadata line without '='"))?;
        if k == LABELS_KEY {
            labels = Some(v.split(',').map(str::to_string).collect::<Vec<_>>());
        } else {
            metadata.insert(k.to_string(), v.to_string());
        }
        offset += line.len();
    }
    let labels = labels.unwrap_or_else(|| (0..n_channels).map(|c| format!("ch{c}")).collect());
    if labels.len() != n_channels as usize {
        return Err(Error::format(
            FIXED_HEADER as u64,
            format!("{} channel labels for {n_channels} channels", labels.len()),
        ));
    }

    let start = FIXED_HEADER + meta_len;
    let size = record_size(flags);
    let body = &bytes[start..];
    let n = body.len() / size;
    if body.len() % size != 0 {
        let at = start + n * size;
        return Err(Error::format(
            at as u64,
            format!("truncated record {n}: expected {size} bytes, found {}", body.len() % size),
        ));
    }
    let truth = flags & FLAG_TRUTH != 0;
    let has_exc = flags & FLAG_EXCITATION != 0;
    let mut channels = Vec::with_capacity(n);
    let mut timestamps = Vec::with_capacity(n);
    let mut freq = Vec::with_capacity(if truth { n } else { 0 });
    let mut deph = Vec::with_capacity(if truth { n } else { 0 });
    let mut exc = Vec::with_capacity(if has_exc { n } else { 0 });
    let mut prev = (0u64, 0u8);
    for k in 0..n {
        let at = k * size;
        let rec = &body[at..at + size];
        let offset = (start + at) as u64;
        let c = rec[0];
        let t = u64_at(rec, 1);
        if c >= n_channels {
            return Err(Error::format(offset, format!("record {k}: channel {c} >= channel count {n_channels}")));
        }
        if t > duration {
            return Err(Error::format(offset, format!("record {k}: timestamp {t} ps beyond duration {duration} ps")));
        }
        if k > 0 && (t, c) < prev {
            return Err(Error::format(
                offset,
                format!("record {k}: unsorted, ({t} ps, ch {c}) after ({} ps, ch {})", prev.0, prev.1),
            ));
        }
        prev = (t, c);
        channels.push(c);
        timestamps.push(t);
        let mut p = 9;
        if truth {
            freq.push(f64_at(rec, p));
            deph.push(f64_at(rec, p + 8));
            p += 16;
        }
        if has_exc {
            let e = u64_at(rec, p);
            if e > t {
                return Err(Error::format(offset, format!("record {k}: excitation {e} ps after emission {t} ps")));
            }
            exc.push(e);
        }
    }
    let mut stream = TagStream::from_columns(channels, timestamps, truth.then_some((freq, deph)), duration, labels)?;
    if has_exc {
        stream = stream.with_excitation_times(exc)?;
    }
    stream.replace_metadata(metadata);
    Ok(stream)
}

pub fn read_stream<R: Read>(mut source: R) -> Result<TagStream> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|source| Error::Io { offset: bytes.len() as u64, source })?;
    decode(&bytes)
}

/// Writes `stream` to `path` through a temporary file in the same directory.
pub fn write_file(path: &Path, stream: &TagStream) -> Result<u64> {
    crate::export::write_atomic(path, |w| write_stream(stream, w))
}

pub fn read_file(path: &Path) -> Result<TagStream> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qdsim_core::photon::PhotonTag;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|c| format!("ch{c}")).collect()
    }

    #[test]
    fn empty_stream_is_header_only() {
        let s = TagStream::empty(1000, labels(2)).unwrap();
        let mut buf = Vec::new();
        let n = write_stream(&s, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        assert_eq!(n, encoded_len(&s).unwrap());
        assert_eq!(decode(&buf).unwrap(), s);
    }

    #[test]
    fn three_tags_round_trip() {
        let tags = [
            PhotonTag::with_truth(0, 5, 1.5e8, 2e7),
            PhotonTag::with_truth(1, 5, -3.0e8, 2e7),
            PhotonTag::with_truth(0, 900, 0.0, 0.0),
        ];
        let s = TagStream::from_tags(&tags, 1000, labels(2)).unwrap().with_metadata("seed", "7");
        let mut buf = Vec::new();
        write_stream(&s, &mut buf).unwrap();
        let header = FIXED_HEADER + metadata_block(&s).unwrap().len();
        assert_eq!(buf.len(), header + 3 * 25);
        assert_eq!(decode(&buf).unwrap(), s);
    }

    #[test]
    fn bad_magic_names_offset_zero() {
        let mut buf = Vec::new();
        write_stream(&TagStream::empty(1, labels(1)).unwrap(), &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(decode(&buf), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncated_record_reports_lengths() {
        let tags = [PhotonTag::new(0, 1), PhotonTag::new(0, 2)];
        let s = TagStream::from_tags(&tags, 10, labels(1)).unwrap();
        let mut buf = Vec::new();
        write_stream(&s, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        let err = decode(&buf).unwrap_err();
        let Error::Format { offset, message } = err else { panic!("{err}") };
        assert_eq!(offset as usize, buf.len() - 6);
        assert!(message.contains("expected 9 bytes, found 6"), "{message}");
    }

    #[test]
    fn unsorted_records_are_rejected() {
        let tags = [PhotonTag::new(0, 1), PhotonTag::new(0, 2)];
        let s = TagStream::from_tags(&tags, 10, labels(1)).unwrap();
        let mut buf = Vec::new();
        write_stream(&s, &mut buf).unwrap();
        let second = buf.len() - 9;
        buf[second + 1..second + 9].copy_from_slice(&0u64.to_le_bytes());
        let err = decode(&buf).unwrap_err();
        assert!(matches!(err, Error::Format { offset, .. } if offset as usize == second), "{err}");
    }
}
