//! Controllers for the microgrid and the single-stage boost converter.

pub mod backstep;
pub mod feedforward;
pub mod observer;
pub mod perturb;
pub mod pi;

pub use backstep::{
    backstep_control, backstep_virtual_alpha3, backstep_virtual_alpha5, lyapunov_value, tracking_errors,
    BackstepController, BackstepGains, BackstepOptions, TrackingErrors,
};
pub use feedforward::FeedforwardMppt;
pub use observer::{dob_backstep_control, observer_rates, DobOutput, ObserverGains, ObserverState};
pub use perturb::{perturb_decision, perturb_step, PerturbState};
pub use pi::{dual_loop_pi, BdcMode, DualLoopGains, PiGains, PiOutput, PiState};
