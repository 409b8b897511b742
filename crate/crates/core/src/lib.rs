//! Back-to-Pizza: a gamified N-back task whose player's mental workload is
//! estimated live from 16-channel EEG (frontal theta over parietal alpha).

pub mod task;
pub mod signal;
pub mod clock;
pub mod synth;
pub mod session;
pub mod sim;
pub mod cli;
