//! Offline EEG handwriting decoding.
//!
//! The crate covers the whole offline chain used to study letter decoding
//! from scalp EEG recorded while a subject writes (or imagines writing) one
//! of four letters:
//!
//! ```text
//! synthgen ──► dataio (.rec / .evt files)
//!                 │
//!                 ├─ synchro     photodiode spike detection, event realignment
//!                 ├─ sigproc     notch, band-pass, polyphase resampling
//!                 ├─ ica         FastICA fit / sources / reconstruct / rank
//!                 ├─ epoching    movement-onset detection, three epoch regimes
//!                 ├─ decoder     compact CNN, training, trial-averaged inference
//!                 └─ eval        k-fold CV, sample-complexity sweeps,
//!                                SNR-boosted evaluation, confound probes
//! ```
//!
//! `pipeline` glues the stages together with a declarative config and
//! `reproduce` runs the end-to-end checks used by the acceptance suite and
//! the `hwdecode reproduce` command.

pub mod dataio;
pub mod decoder;
pub mod epoching;
pub mod error;
pub mod eval;
pub mod ica;
pub mod pipeline;
pub mod reproduce;
pub mod seeds;
pub mod sigproc;
pub mod synchro;
pub mod synthgen;

pub use dataio::{Epoch, EpochDataset, Event, EventKind, EventStream, Letter, Montage, Recording, Setting};
pub use error::{Error, Result};
