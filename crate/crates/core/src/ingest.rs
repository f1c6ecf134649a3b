//! Standard MIDI File and plain-text note list readers.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Note, NoteList, PedalEvent, Role};

const SUSTAIN_CONTROLLER: u8 = 64;
const DEFAULT_TEMPO_US: u32 = 500_000;

// (start tick, velocity, event index) of sounding notes per (channel, key)
type OpenNotes = HashMap<(u8, u8), VecDeque<(u64, u8, usize)>>;

/// A parsed note list together with non-fatal diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub notes: NoteList,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Division {
    TicksPerQuarter(u16),
    /// Frames per second and ticks per frame.
    Smpte {
        fps: u8,
        ticks_per_frame: u8,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    NoteOn { channel: u8, key: u8, velocity: u8 },
    NoteOff { channel: u8, key: u8 },
    Controller { channel: u8, controller: u8, value: u8 },
    Tempo { micros_per_quarter: u32 },
    EndOfTrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackEvent {
    pub tick: u64,
    pub kind: EventKind,
}

/// Decoded chunk structure of a type-0 or type-1 file. Events irrelevant to
/// note extraction (other channel messages, SysEx, most meta events) are
/// consumed but not kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmfDocument {
    pub format: u16,
    pub division: Division,
    pub tracks: Vec<Vec<TrackEvent>>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Smf {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        match self.bytes.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => self.err("unexpected end of data"),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return self.err(format!("truncated: need {n} bytes, {} available", self.remaining()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::Smf {
            offset: start,
            message: "variable-length quantity longer than 4 bytes".into(),
        })
    }

    fn data_byte(&mut self) -> Result<u8> {
        let at = self.pos;
        let b = self.u8()?;
        if b & 0x80 != 0 {
            return Err(Error::Smf {
                offset: at,
                message: format!("expected data byte, found status 0x{b:02x}"),
            });
        }
        Ok(b)
    }
}

/// Decode the chunk and event structure of a Standard MIDI File.
pub fn read_smf(bytes: &[u8]) -> Result<SmfDocument> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(b"MThd".as_slice()) {
        return Err(Error::Smf {
            offset: 0,
            message: "missing MThd header".into(),
        });
    }
    let header_len = r.u32()? as usize;
    if header_len < 6 {
        return r.err(format!("header length {header_len}, expected 6"));
    }
    let header_start = r.pos;
    let format = r.u16()?;
    let ntracks = r.u16()?;
    let raw_division = r.u16()?;
    if format > 1 {
        return Err(Error::Smf {
            offset: header_start,
            message: format!("unsupported SMF format {format}"),
        });
    }
    let division = if raw_division & 0x8000 == 0 {
        if raw_division == 0 {
            return Err(Error::Smf {
                offset: header_start + 4,
                message: "division of zero ticks per quarter".into(),
            });
        }
        Division::TicksPerQuarter(raw_division)
    } else {
        let fps = ((raw_division >> 8) as u8 as i8).wrapping_neg() as u8;
        let ticks_per_frame = (raw_division & 0xff) as u8;
        if fps == 0 || ticks_per_frame == 0 {
            return Err(Error::Smf {
                offset: header_start + 4,
                message: "invalid SMPTE division".into(),
            });
        }
        Division::Smpte { fps, ticks_per_frame }
    };
    r.take(header_len - 6)?;

    let mut tracks = Vec::with_capacity(ntracks as usize);
    while tracks.len() < ntracks as usize {
        if r.remaining() == 0 {
            return r.err(format!("header announces {ntracks} tracks, found {}", tracks.len()));
        }
        let id = r.take(4)?;
        let len = r.u32()? as usize;
        let body_start = r.pos;
        if r.remaining() < len {
            return Err(Error::Smf {
                offset: body_start,
                message: format!("truncated chunk: length {len}, {} bytes available", r.remaining()),
            });
        }
        let body = r.take(len)?;
        if id == b"MTrk" {
            tracks.push(read_track(body, body_start)?);
        }
    }
    Ok(SmfDocument {
        format,
        division,
        tracks,
    })
}

fn read_track(body: &[u8], base: usize) -> Result<Vec<TrackEvent>> {
    let mut r = Reader { bytes: body, pos: 0 };
    let rebase = |e: Error| match e {
        Error::Smf { offset, message } => Error::Smf {
            offset: offset + base,
            message,
        },
        other => other,
    };
    let mut events = Vec::new();
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    while r.remaining() > 0 {
        tick += u64::from(r.vlq().map_err(rebase)?);
        let at = r.pos;
        let first = r.u8().map_err(rebase)?;
        let (status, mut first_data) = if first & 0x80 != 0 {
            (first, None)
        } else {
            match running {
                Some(s) => (s, Some(first)),
                None => {
                    return Err(Error::Smf {
                        offset: base + at,
                        message: "data byte without running status".into(),
                    })
                }
            }
        };
        match status {
            0xff => {
                running = None;
                let kind = r.u8().map_err(rebase)?;
                let len = r.vlq().map_err(rebase)? as usize;
                let data = r.take(len).map_err(rebase)?;
                match kind {
                    0x51 => {
                        if len != 3 {
                            return Err(Error::Smf {
                                offset: base + at,
                                message: format!("tempo event with length {len}"),
                            });
                        }
                        let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if us == 0 {
                            return Err(Error::Smf {
                                offset: base + at,
                                message: "tempo of zero microseconds per quarter".into(),
                            });
                        }
                        events.push(TrackEvent {
                            tick,
                            kind: EventKind::Tempo { micros_per_quarter: us },
                        });
                    }
                    0x2f => {
                        events.push(TrackEvent {
                            tick,
                            kind: EventKind::EndOfTrack,
                        });
                        break;
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = r.vlq().map_err(rebase)? as usize;
                r.take(len).map_err(rebase)?;
            }
            0xf1..=0xfe => {
                return Err(Error::Smf {
                    offset: base + at,
                    message: format!("system message 0x{status:02x} inside a track"),
                });
            }
            _ => {
                running = Some(status);
                let channel = status & 0x0f;
                let mut data = |r: &mut Reader| -> Result<u8> {
                    match first_data.take() {
                        Some(b) => Ok(b),
                        None => r.data_byte().map_err(rebase),
                    }
                };
                match status & 0xf0 {
                    0x80 => {
                        let key = data(&mut r)?;
                        data(&mut r)?;
                        events.push(TrackEvent {
                            tick,
                            kind: EventKind::NoteOff { channel, key },
                        });
                    }
                    0x90 => {
                        let key = data(&mut r)?;
                        let velocity = data(&mut r)?;
                        let kind = if velocity == 0 {
                            EventKind::NoteOff { channel, key }
                        } else {
                            EventKind::NoteOn { channel, key, velocity }
                        };
                        events.push(TrackEvent { tick, kind });
                    }
                    0xb0 => {
                        let controller = data(&mut r)?;
                        let value = data(&mut r)?;
                        events.push(TrackEvent {
                            tick,
                            kind: EventKind::Controller {
                                channel,
                                controller,
                                value,
                            },
                        });
                    }
                    0xa0 | 0xe0 => {
                        data(&mut r)?;
                        data(&mut r)?;
                    }
                    0xc0 | 0xd0 => {
                        data(&mut r)?;
                    }
                    _ => unreachable!("status bytes are >= 0x80"),
                }
            }
        }
    }
    Ok(events)
}

/// Piecewise-constant tempo map converting ticks to seconds.
struct TempoMap {
    // (tick, seconds at tick, seconds per tick from here on)
    segments: Vec<(u64, f64, f64)>,
}

impl TempoMap {
    fn new(division: Division, tempo_changes: &[(u64, u32)]) -> Self {
        let per_tick = |us: u32| match division {
            Division::TicksPerQuarter(tpq) => f64::from(us) / 1e6 / f64::from(tpq),
            Division::Smpte { fps, ticks_per_frame } => 1.0 / (f64::from(fps) * f64::from(ticks_per_frame)),
        };
        let mut segments = vec![(0u64, 0.0, per_tick(DEFAULT_TEMPO_US))];
        if let Division::TicksPerQuarter(_) = division {
            for &(tick, us) in tempo_changes {
                let &(t0, s0, spt) = segments.last().expect("non-empty");
                let seconds = s0 + (tick - t0) as f64 * spt;
                if tick == t0 {
                    segments.pop();
                }
                segments.push((tick, seconds, per_tick(us)));
            }
        }
        TempoMap { segments }
    }

    fn seconds(&self, tick: u64) -> f64 {
        let i = self.segments.partition_point(|s| s.0 <= tick) - 1;
        let (t0, s0, spt) = self.segments[i];
        s0 + (tick - t0) as f64 * spt
    }

    fn seconds_per_tick(&self, tick: u64) -> f64 {
        let i = self.segments.partition_point(|s| s.0 <= tick) - 1;
        self.segments[i].2
    }
}

/// Parse a type-0 or type-1 Standard MIDI File into a note list.
///
/// All tracks and channels are merged. Note-on with velocity 0 is a
/// note-off; at equal ticks note-offs are applied before note-ons. Notes
/// still held when their track ends are closed at that track's last tick.
pub fn parse_smf(bytes: &[u8], role: Role) -> Result<Ingested> {
    let doc = read_smf(bytes)?;
    let mut tempo_changes: Vec<(u64, u32)> = doc
        .tracks
        .iter()
        .flatten()
        .filter_map(|ev| match ev.kind {
            EventKind::Tempo { micros_per_quarter } => Some((ev.tick, micros_per_quarter)),
            _ => None,
        })
        .collect();
    tempo_changes.sort_by_key(|&(tick, _)| tick);
    let tempo = TempoMap::new(doc.division, &tempo_changes);

    // (tick, off-before-on rank, track, sequence, event)
    let mut merged: Vec<(u64, u8, usize, usize, EventKind)> = Vec::new();
    let mut track_end = Vec::with_capacity(doc.tracks.len());
    for (ti, track) in doc.tracks.iter().enumerate() {
        track_end.push(track.last().map_or(0, |ev| ev.tick));
        for (seq, ev) in track.iter().enumerate() {
            let rank = match ev.kind {
                EventKind::NoteOff { .. } => 0,
                EventKind::NoteOn { .. } => 2,
                _ => 1,
            };
            merged.push((ev.tick, rank, ti, seq, ev.kind));
        }
    }
    merged.sort_by_key(|&(tick, rank, ti, seq, _)| (tick, rank, ti, seq));

    let mut warnings = Vec::new();
    let mut open: OpenNotes = HashMap::new();
    // (on tick, off tick, key, velocity)
    let mut spans: Vec<(u64, u64, u8, u8)> = Vec::new();
    let mut pedal = Vec::new();
    for &(tick, _, track, _, kind) in &merged {
        match kind {
            EventKind::NoteOn { channel, key, velocity } => open
                .entry((channel, key))
                .or_default()
                .push_back((tick, velocity, track)),
            EventKind::NoteOff { channel, key } => match open.get_mut(&(channel, key)).and_then(VecDeque::pop_front) {
                Some((on, velocity, _)) => spans.push((on, tick, key, velocity)),
                None => warnings.push(format!(
                    "note-off without matching note-on (channel {channel}, key {key}, tick {tick}); ignored"
                )),
            },
            EventKind::Controller {
                controller: SUSTAIN_CONTROLLER,
                value,
                ..
            } => pedal.push(PedalEvent {
                time: tempo.seconds(tick),
                value,
            }),
            _ => {}
        }
    }
    let mut orphans: Vec<_> = open
        .into_iter()
        .flat_map(|((_, key), queue)| queue.into_iter().map(move |q| (key, q)))
        .collect();
    orphans.sort_by_key(|&(key, (tick, _, track))| (tick, key, track));
    for (key, (on, velocity, track)) in orphans {
        warnings.push(format!(
            "note {key} at tick {on} never released; closed at end of track"
        ));
        spans.push((on, track_end[track].max(on), key, velocity));
    }

    let mut notes = Vec::with_capacity(spans.len());
    for (on, off, key, velocity) in spans {
        let onset = tempo.seconds(on);
        let mut offset = tempo.seconds(off);
        if offset <= onset {
            offset = onset + tempo.seconds_per_tick(on);
        }
        let note = Note::new(onset, offset, i64::from(key), Some(i64::from(velocity)))?;
        notes.push(note);
    }
    pedal.sort_by(|a: &PedalEvent, b| a.time.total_cmp(&b.time));
    Ok(Ingested {
        notes: NoteList::new(notes, pedal, role)?,
        warnings,
    })
}

/// Parse the text interchange format: one `onset offset pitch [velocity]`
/// record per line, separated by whitespace or commas, `#` starting a comment.
pub fn parse_notes_text(text: &str, role: Role) -> Result<NoteList> {
    let mut notes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| Error::Text { line, message };
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        if !(3..=4).contains(&fields.len()) {
            return Err(err(format!("expected 3 or 4 fields, found {}", fields.len())));
        }
        let time = |idx: usize, name: &str| -> Result<f64> {
            let v: f64 = fields[idx]
                .parse()
                .map_err(|_| err(format!("{name} `{}` is not a number", fields[idx])))?;
            if !v.is_finite() {
                return Err(err(format!("{name} `{}` is not finite", fields[idx])));
            }
            Ok(v)
        };
        let integer = |idx: usize, name: &str| -> Result<i64> {
            fields[idx]
                .parse()
                .map_err(|_| err(format!("{name} `{}` is not an integer", fields[idx])))
        };
        let onset = time(0, "onset")?;
        let offset = time(1, "offset")?;
        let pitch = integer(2, "pitch")?;
        let velocity = if fields.len() == 4 {
            Some(integer(3, "velocity")?)
        } else if role == Role::Target {
            return Err(err("target notes need a velocity column".into()));
        } else {
            None
        };
        let note = Note::new(onset, offset, pitch, velocity).map_err(|e| match e {
            Error::PitchOutOfRange(p) => err(format!("pitch {p} outside the piano range 21..=108")),
            Error::InvalidNote(m) => err(m),
            other => other,
        })?;
        notes.push(note);
    }
    NoteList::new(notes, Vec::new(), role)
}

/// Read a note file, choosing the parser by extension (`.mid`/`.midi` versus
/// anything else as text).
pub fn load_notes(path: &Path, role: Role) -> Result<Ingested> {
    let is_midi = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
    if is_midi {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        parse_smf(&bytes, role).map_err(|e| with_path(path, e))
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let notes = parse_notes_text(&text, role).map_err(|e| with_path(path, e))?;
        Ok(Ingested {
            notes,
            warnings: Vec::new(),
        })
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Smf { offset, message } => Error::Smf {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        Error::Text { line, message } => Error::Text {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Render a note list in the text interchange format.
pub fn write_notes_text(list: &NoteList) -> String {
    let mut out = String::new();
    for n in list.notes() {
        match n.velocity() {
            Some(v) => out.push_str(&format!("{} {} {} {v}\n", n.onset(), n.offset(), n.pitch())),
            None => out.push_str(&format!("{} {} {}\n", n.onset(), n.offset(), n.pitch())),
        }
    }
    out
}
