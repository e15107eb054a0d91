//! Residual fully-connected PReLU regression network, trained with Adam.

mod adam;
mod arch;
mod checkpoint;
mod network;
mod train;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use arch::{LayerSlots, NetArchitecture, ParamLayout, Variant, HIDDEN_WIDTH};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_as, read_checkpoint, save_checkpoint, write_checkpoint,
};
pub use network::{prelu, BatchLoss, Network, Workspace, INIT_SLOPE};
pub use train::{train, train_with, EpochReport, TrainSchedule, TrainingSet};
