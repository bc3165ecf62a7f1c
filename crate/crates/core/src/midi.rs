//! Standard MIDI File reading (format 0 and 1) and canonical format-0 writing.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::music::{Note, NoteList, TimeSignature, DEFAULT_TEMPO_BPM};

/// Resolution of every file produced by [`write_midi`].
pub const WRITE_TICKS_PER_QUARTER: u16 = 480;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MidiError {
    #[error("malformed MIDI at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("MIDI content is not a valid note list: {0}")]
    Content(#[from] crate::music::MusicError),
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T, MidiError> {
    Err(MidiError::Parse {
        offset,
        message: message.into(),
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Cursor<'a> {
    fn u8(&mut self) -> Result<u8, MidiError> {
        if self.pos >= self.end {
            return parse_err(self.pos, "unexpected end of data");
        }
        let b = self.bytes[self.pos];
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.end - self.pos < n {
            return parse_err(self.pos, format!("need {n} bytes, {} left", self.end - self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32, MidiError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        parse_err(start, "variable-length quantity longer than 4 bytes")
    }
}

#[derive(Default)]
struct TrackScan {
    notes: Vec<Note>,
    tempo_uspq: Option<u32>,
    time_signature: Option<TimeSignature>,
    end_tick: u64,
}

fn scan_track(bytes: &[u8], start: usize, end: usize) -> Result<TrackScan, MidiError> {
    let mut cur = Cursor {
        bytes,
        pos: start,
        end,
    };
    let mut scan = TrackScan::default();
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    let mut open: HashMap<(u8, u8), VecDeque<(u64, u8)>> = HashMap::new();

    let close = |scan: &mut TrackScan, tick: u64, channel: u8, pitch: u8, open: &mut HashMap<(u8, u8), VecDeque<(u64, u8)>>| {
        if let Some((onset, velocity)) = open.get_mut(&(channel, pitch)).and_then(VecDeque::pop_front) {
            if tick > onset {
                scan.notes.push(Note {
                    onset: onset as u32,
                    duration: (tick - onset) as u32,
                    pitch,
                    velocity,
                    channel,
                });
            }
        }
    };

    loop {
        if cur.pos >= cur.end {
            return parse_err(cur.pos, "track ends without end-of-track event");
        }
        tick += cur.vlq()? as u64;
        if tick > u32::MAX as u64 {
            return parse_err(cur.pos, "event time overflows 32 bits");
        }
        let status_pos = cur.pos;
        let mut status = cur.u8()?;
        let mut first_data = None;
        if status < 0x80 {
            match running {
                Some(r) => {
                    first_data = Some(status);
                    status = r;
                }
                None => return parse_err(status_pos, "data byte without running status"),
            }
        }
        match status {
            0xff => {
                running = None;
                let kind = cur.u8()?;
                let len = cur.vlq()? as usize;
                let data = cur.take(len)?;
                match kind {
                    0x2f => {
                        for ((channel, pitch), queue) in open.iter_mut() {
                            while let Some((onset, velocity)) = queue.pop_front() {
                                if tick > onset {
                                    scan.notes.push(Note {
                                        onset: onset as u32,
                                        duration: (tick - onset) as u32,
                                        pitch: *pitch,
                                        velocity,
                                        channel: *channel,
                                    });
                                }
                            }
                        }
                        scan.end_tick = tick;
                        if cur.pos != cur.end {
                            return parse_err(cur.pos, "data after end-of-track event");
                        }
                        return Ok(scan);
                    }
                    0x51 => {
                        if len != 3 {
                            return parse_err(status_pos, "tempo event must carry 3 bytes");
                        }
                        let uspq = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if uspq == 0 {
                            return parse_err(status_pos, "zero tempo");
                        }
                        scan.tempo_uspq.get_or_insert(uspq);
                    }
                    0x58 => {
                        if len < 2 || data[1] > 7 {
                            return parse_err(status_pos, "bad time signature event");
                        }
                        scan.time_signature
                            .get_or_insert(TimeSignature(data[0], 1u8 << data[1]));
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = cur.vlq()? as usize;
                cur.take(len)?;
            }
            0x80..=0xef => {
                running = Some(status);
                let channel = status & 0x0f;
                let a = match first_data {
                    Some(b) => b,
                    None => cur.u8()?,
                };
                if a > 0x7f {
                    return parse_err(cur.pos - 1, "data byte has high bit set");
                }
                let kind = status & 0xf0;
                if kind == 0xc0 || kind == 0xd0 {
                    continue;
                }
                let b = cur.u8()?;
                if b > 0x7f {
                    return parse_err(cur.pos - 1, "data byte has high bit set");
                }
                match kind {
                    0x90 if b > 0 => open.entry((channel, a)).or_default().push_back((tick, b)),
                    0x90 | 0x80 => close(&mut scan, tick, channel, a, &mut open),
                    _ => {}
                }
            }
            _ => return parse_err(status_pos, format!("unsupported status byte {status:#04x}")),
        }
    }
}

/// Parses a format 0 or 1 Standard MIDI File. Tracks of a format-1 file are
/// merged; the first tempo and time-signature events win.
pub fn read_midi(bytes: &[u8]) -> Result<NoteList, MidiError> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        end: bytes.len(),
    };
    if cur.take(4).ok() != Some(b"MThd".as_slice()) {
        return parse_err(0, "missing MThd header");
    }
    let header_len = cur.u32()? as usize;
    if header_len < 6 {
        return parse_err(4, "header chunk shorter than 6 bytes");
    }
    let header_start = cur.pos;
    let format = cur.u16()?;
    let tracks = cur.u16()?;
    let division = cur.u16()?;
    if format > 1 {
        return parse_err(header_start, format!("unsupported format {format}"));
    }
    if division & 0x8000 != 0 || division == 0 {
        return parse_err(header_start + 4, "SMPTE or zero time division is not supported");
    }
    cur.pos = header_start + header_len;
    if cur.pos > bytes.len() {
        return parse_err(bytes.len(), "truncated header chunk");
    }

    let mut notes = Vec::new();
    let mut tempo = None;
    let mut time_signature = None;
    let mut end_tick = 0u64;
    let mut seen = 0;
    while seen < tracks {
        let chunk_pos = cur.pos;
        let id = cur.take(4)?;
        let len = cur.u32()? as usize;
        if cur.end - cur.pos < len {
            return parse_err(chunk_pos, "chunk length runs past end of file");
        }
        let body = cur.pos;
        cur.pos += len;
        if id != b"MTrk" {
            continue;
        }
        seen += 1;
        let scan = scan_track(bytes, body, body + len)?;
        notes.extend(scan.notes);
        tempo = tempo.or(scan.tempo_uspq);
        time_signature = time_signature.or(scan.time_signature);
        end_tick = end_tick.max(scan.end_tick);
    }

    let tempo_bpm = tempo.map_or(DEFAULT_TEMPO_BPM, bpm_from_uspq);
    Ok(NoteList::new(
        notes,
        division,
        tempo_bpm,
        time_signature.unwrap_or_default(),
        Some(end_tick as u32),
    )?)
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 5];
    let mut i = buf.len() - 1;
    buf[i] = (value & 0x7f) as u8;
    value >>= 7;
    while value > 0 {
        i -= 1;
        buf[i] = 0x80 | (value & 0x7f) as u8;
        value >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

fn rescale(ticks: u32, from: u16, to: u16) -> u32 {
    if from == to {
        return ticks;
    }
    let scaled = ticks as u64 * to as u64;
    let (q, r) = (scaled / from as u64, scaled % from as u64);
    (if 2 * r > from as u64 { q + 1 } else { q }) as u32
}

fn uspq_from_bpm(bpm: f64) -> u32 {
    (60_000_000.0 / bpm).round().clamp(1.0, 0xff_ffff as f64) as u32
}

/// The BPM with the fewest decimals that encodes back to `uspq`, so a tempo
/// like 108 survives the whole-microsecond storage.
fn bpm_from_uspq(uspq: u32) -> f64 {
    let raw = 60_000_000.0 / uspq as f64;
    (0..=6)
        .map(|d| {
            let scale = 10f64.powi(d);
            (raw * scale).round() / scale
        })
        .find(|&bpm| bpm > 0.0 && uspq_from_bpm(bpm) == uspq)
        .unwrap_or(raw)
}

/// Writes a canonical format-0 file at 480 ticks per quarter: tempo and time
/// signature at tick 0, note-offs before note-ons at equal ticks, no running
/// status, end-of-track at the piece length.
pub fn write_midi(notes: &NoteList) -> Vec<u8> {
    let tpq = notes.ticks_per_quarter;
    let to = WRITE_TICKS_PER_QUARTER;

    // (tick, order, channel, pitch, velocity); order 0 = off, 1 = on
    let mut events: Vec<(u32, u8, u8, u8, u8)> = Vec::with_capacity(notes.len() * 2);
    for n in notes.notes() {
        let on = rescale(n.onset, tpq, to);
        let dur = rescale(n.duration, tpq, to).max(1);
        events.push((on, 1, n.channel, n.pitch, n.velocity));
        events.push((on + dur, 0, n.channel, n.pitch, 0));
    }
    events.sort_unstable();

    let mut track = Vec::new();
    let uspq = uspq_from_bpm(notes.tempo_bpm);
    track.extend_from_slice(&[0x00, 0xff, 0x51, 0x03]);
    track.extend_from_slice(&uspq.to_be_bytes()[1..]);
    let ts = notes.time_signature;
    track.extend_from_slice(&[
        0x00,
        0xff,
        0x58,
        0x04,
        ts.0,
        ts.1.trailing_zeros() as u8,
        24,
        8,
    ]);
    let mut last = 0u32;
    for (tick, order, channel, pitch, velocity) in events {
        push_vlq(&mut track, tick - last);
        last = tick;
        if order == 0 {
            track.extend_from_slice(&[0x80 | channel, pitch, 0x40]);
        } else {
            track.extend_from_slice(&[0x90 | channel, pitch, velocity]);
        }
    }
    let end = rescale(notes.length_ticks(), tpq, to).max(last);
    push_vlq(&mut track, end - last);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&to.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}
