//! Trajectory frames, affinity labels, frame pairing, and target splits.

pub mod frames;
pub mod labels;
pub mod pairs;
pub mod split;

pub use frames::{format_frames, parse_frames, parse_frames_str, write_frames, ComplexFrame};
pub use labels::{parse_labels_str, read_labels, write_labels, AffinityRecord};
pub use pairs::{pair_consecutive, FramePair, Pairing};
pub use split::{split_sizes, split_targets, SplitManifest, SPLIT_RATIOS};
