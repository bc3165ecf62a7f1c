//! Holds the `acceptance` test target; see `tests/acceptance/`.
//!
//! ```text
//! cargo test -p crossmap-acceptance --test acceptance
//! ```
