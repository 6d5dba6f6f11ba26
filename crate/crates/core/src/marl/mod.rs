//! Per-BS recurrent Q-networks and their training: action encoding and
//! masking, epsilon-greedy behaviour, episode replay, target networks, and the
//! VDN (team reward, summed Q) and IQL (local reward, own Q) updates.

mod action;
mod net;
mod replay;
mod train;

pub use action::{
    act_epsilon_greedy, argmax, encode_local_state, num_actions, valid_actions, validate_user_count, ActionCode,
    MAX_USERS, POSITION_SCALE,
};
pub use net::{QNet, QNetGrads};
pub use replay::{EpisodeRecord, ReplayMemory};
pub use train::{
    compute_batch, exploration_rate, iql_train_step, is_sync_epoch, max_joint_sum, q_tot, sum_of_maxes, sync_targets,
    train_step, vdn_train_step, BatchResult, Method,
};
