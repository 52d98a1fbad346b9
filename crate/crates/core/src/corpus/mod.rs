//! Dataset ingestion and the cross-split document index.

mod dataset;
mod index;

pub use dataset::{
    load_dataset, read_dataset, write_dataset, CorpusError, Dataset, DatasetConfig, DatasetFormat,
    DatasetStats, Document, Example, QuerySource, Split,
};
pub use index::{build_index, DocumentIndex, IndexError, Posting, INDEX_FORMAT_VERSION};
