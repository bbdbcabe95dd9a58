//! Data model and on-disk formats.
//!
//! * `.rec`: recording files. An 8-byte magic, a little-endian `u32` header
//!   length, a UTF-8 `key=value` header, then raw little-endian `f32`
//!   samples in frame-major order (all channels of sample 0, then sample 1).
//! * `.evt`: event files. One JSON object per line; the first line carries
//!   the clock domain, every following line one event with `t`, `kind` and
//!   `label`.
//! * Epoch bundles: a `.rec` holding the epochs back to back in time plus a
//!   `.labels` sidecar with one JSON line per epoch.
//!
//! A session directory holds the raw streams `eeg.rec`, `pen.rec`,
//! `task.evt`, `pen.evt` (pen-down events on the tablet clock) and
//! `truth.json` for synthetic sessions. Later stages add `events.evt`,
//! `pen_synced.rec`, `eeg_pre.rec`, `pen_pre.rec`, `ica.json`,
//! `eeg_clean.rec` and epoch bundles under `epochs/<setting>.rec`.

mod epochs;
mod events;
mod montage;
mod recording;

pub use epochs::{Epoch, EpochDataset, Setting};
pub use events::{Event, EventKind, EventStream, Letter};
pub use montage::Montage;
pub use recording::Recording;

use std::path::{Path, PathBuf};

/// File names inside a session directory.
#[derive(Debug, Clone)]
pub struct SessionLayout {
    pub dir: PathBuf,
}

impl SessionLayout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SessionLayout { dir: dir.into() }
    }

    pub fn eeg(&self) -> PathBuf {
        self.dir.join("eeg.rec")
    }

    pub fn pen(&self) -> PathBuf {
        self.dir.join("pen.rec")
    }

    pub fn task_events(&self) -> PathBuf {
        self.dir.join("task.evt")
    }

    pub fn pen_events(&self) -> PathBuf {
        self.dir.join("pen.evt")
    }

    pub fn truth(&self) -> PathBuf {
        self.dir.join("truth.json")
    }

    pub fn artifact(&self) -> PathBuf {
        self.dir.join("artifact.rec")
    }

    /// Task events realigned onto the amplifier clock.
    pub fn synced_events(&self) -> PathBuf {
        self.dir.join("events.evt")
    }

    /// Pen stream shifted onto the amplifier clock.
    pub fn synced_pen(&self) -> PathBuf {
        self.dir.join("pen_synced.rec")
    }

    pub fn preprocessed_eeg(&self) -> PathBuf {
        self.dir.join("eeg_pre.rec")
    }

    pub fn preprocessed_pen(&self) -> PathBuf {
        self.dir.join("pen_pre.rec")
    }

    pub fn ica(&self) -> PathBuf {
        self.dir.join("ica.json")
    }

    pub fn cleaned_eeg(&self) -> PathBuf {
        self.dir.join("eeg_clean.rec")
    }

    pub fn epochs(&self, setting: Setting) -> PathBuf {
        self.dir.join("epochs").join(format!("{}.rec", setting.as_str()))
    }

    pub fn exists(&self) -> bool {
        Path::new(&self.dir).is_dir()
    }
}
