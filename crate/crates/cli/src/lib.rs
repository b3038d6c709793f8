//! Command-line orchestration for `cascade-core`: run manifests and CSV/SVG
//! reports.

pub mod commands;
pub mod manifest;
pub mod plot;
