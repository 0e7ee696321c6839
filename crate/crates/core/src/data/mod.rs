//! Image ingestion, normalization and the synthetic palm-line generator.

mod dataset;
mod normalize;
mod synth;

pub use dataset::{
    area_resize, load_directory, load_image_file, DataSource, Dataset, DatasetSpec, IMAGE_EXTENSIONS,
};
pub(crate) use dataset::{hex, list_images};
pub use normalize::{denormalize, normalize, normalize_u8};
pub use synth::{synth_palm_lines, synth_palm_lines_range, synth_palm_lines_with_masks, SynthClassParams};
