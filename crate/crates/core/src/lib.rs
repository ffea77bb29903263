//! Camera-based lane keeping: lane detection from edge maps, Kalman lane and
//! position tracking, a compact serial position protocol, PID differential
//! steering and a closed-loop road simulator.

pub mod cli;
pub mod control;
pub mod imaging;
pub mod lane_detect;
pub mod pipeline;
pub mod position;
pub mod sim;
pub mod tracking;
pub mod wire;
