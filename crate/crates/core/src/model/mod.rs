//! Architecture language, network assembly, whole-network forward and
//! backward passes, embedding extraction, and the model file format.

mod arch;
mod io;
mod network;

pub use arch::{
    param_count, parse_arch, Architecture, FcWidth, LayerSpec, ModelConfig, CTDNN_PRESET, PAPER_WIDTH,
    TDNN_PRESET,
};
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use network::{ForwardCache, Gradients, Model, ParamBlock, ParamBlockMut, TdStage};
