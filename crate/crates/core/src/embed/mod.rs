//! Vocabulary, pretrained word vectors, and the projection to the hidden size.

mod projection;
mod table;
mod vocab;
mod word2vec;

pub use projection::Projection;
pub use table::{EmbeddingTable, Lookup, RowKind, INIT_RANGE};
pub use vocab::{token_hash, Stage, Token, Vocabulary, DELIM, DELIM_ID, PAD, PAD_ID, UNK, UNK_ID};
pub use word2vec::{load_word2vec_text, read_word2vec_text, Pretrained};
