//! Semantic encoder/decoder: vocabulary, toy Transformer and the trainer
//! that fits it through a frozen auto-encoder and a Rayleigh hop.

pub mod model;
pub mod train;
pub mod vocab;

pub use model::{
    embed, sem_decode_infer, sem_decode_train, sem_encode, CodecConfig, Decoded, SemanticCodec,
};
pub use train::{sentence_loss, train_semantic, SemSchedule};
pub use vocab::{tokenize, TokenSequence, Vocabulary};
