//! Data ingestion: the IDX container used by MNIST, parity labelling,
//! federated splits and synthetic regression tasks.

mod idx;
mod mnist;
mod split;
mod synth;

pub use idx::{parse_idx, serialize_idx, IdxData, IdxError, IdxTensor, IdxType};
pub use mnist::{load_mnist, mnist_dataset, parity_labels, read_idx_file, MnistFiles};
pub use split::{make_split, shuffled_indices, FederatedSplit};
pub use synth::{synth_quadratic, SyntheticQuadratic};
