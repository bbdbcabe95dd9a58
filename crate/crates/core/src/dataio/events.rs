use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four letters of the writing task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    L,
    V,
    O,
    W,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::L, Letter::V, Letter::O, Letter::W];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Letter> {
        Letter::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Letter::L => "L",
            Letter::V => "V",
            Letter::O => "O",
            Letter::W => "W",
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Letter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" => Ok(Letter::L),
            "V" => Ok(Letter::V),
            "O" => Ok(Letter::O),
            "W" => Ok(Letter::W),
            other => Err(Error::InvalidArgument(format!(
                "letter payload {other:?} outside {{L,V,O,W}}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    LetterCue,
    FixationCue,
    Blank,
    /// Pen-down marker in the tablet clock.
    PenSample,
    PhotodiodeFlash,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::LetterCue => "letter_cue",
            EventKind::FixationCue => "fixation_cue",
            EventKind::Blank => "blank",
            EventKind::PenSample => "pen_sample",
            EventKind::PhotodiodeFlash => "photodiode_flash",
        }
    }

    /// Kinds that light a photodiode and can therefore be realigned.
    pub fn is_flash_marked(self) -> bool {
        !matches!(self, EventKind::Blank)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "letter_cue" => EventKind::LetterCue,
            "fixation_cue" => EventKind::FixationCue,
            "blank" => EventKind::Blank,
            "pen_sample" => EventKind::PenSample,
            "photodiode_flash" => EventKind::PhotodiodeFlash,
            other => return Err(Error::InvalidArgument(format!("unknown kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub label: Option<Letter>,
}

impl Event {
    pub fn new(t: f64, kind: EventKind, label: Option<Letter>) -> Self {
        Event { t, kind, label }
    }
}

/// Timestamped markers in one clock domain, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    clock_domain: String,
    events: Vec<Event>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    clock_domain: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    t: f64,
    kind: String,
    label: Option<String>,
}

impl EventStream {
    /// Builds a stream, stable-sorting events by timestamp.
    pub fn new(clock_domain: impl Into<String>, mut events: Vec<Event>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if !e.t.is_finite() {
                return Err(Error::InvalidEvent { line: i + 1, reason: "non-finite timestamp".into() });
            }
            if e.kind == EventKind::LetterCue && e.label.is_none() {
                return Err(Error::InvalidEvent { line: i + 1, reason: "letter_cue without label".into() });
            }
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(EventStream { clock_domain: clock_domain.into(), events })
    }

    pub fn clock_domain(&self) -> &str {
        &self.clock_domain
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn to_text(&self) -> String {
        let mut out = serde_json::to_string(&HeaderLine { clock_domain: self.clock_domain.clone() })
            .expect("header serializes");
        out.push('\n');
        for e in &self.events {
            let line = EventLine {
                t: e.t,
                kind: e.kind.as_str().to_string(),
                label: e.label.map(|l| l.as_str().to_string()),
            };
            out.push_str(&serde_json::to_string(&line).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::InvalidEvent { line: 1, reason: "missing clock_domain header".into() })?;
        let header: HeaderLine = serde_json::from_str(first)
            .map_err(|e| Error::InvalidEvent { line: 1, reason: format!("bad header: {e}") })?;
        let mut events = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let raw: EventLine = serde_json::from_str(line)
                .map_err(|e| Error::InvalidEvent { line: lineno, reason: e.to_string() })?;
            let kind: EventKind = raw
                .kind
                .parse()
                .map_err(|e: Error| Error::InvalidEvent { line: lineno, reason: e.to_string() })?;
            let label = raw
                .label
                .as_deref()
                .map(Letter::from_str)
                .transpose()
                .map_err(|e| Error::InvalidEvent { line: lineno, reason: e.to_string() })?;
            events.push(Event { t: raw.t, kind, label });
        }
        EventStream::new(header.clock_domain, events)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
