//! Datasets: MNIST IDX ingestion, synthetic generators, seeded subsets and CSV fixtures.

mod csv;
mod dataset;
mod idx;
mod mnist;
mod synthetic;

pub use self::csv::{read_csv, write_csv};
pub use dataset::{binarize, sample_rows, subset, Dataset, Split, SplitSpec, Task};
pub use idx::{load_idx, save_idx, IdxImages, IdxLabels, IMAGE_MAGIC, LABEL_MAGIC};
pub use mnist::{file_sha256, load_mnist, sha256_hex, InputDigest, MNIST_FILES};
pub use synthetic::make_synthetic;
