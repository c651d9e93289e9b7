//! Over-the-air federated learning on a simulated massive-MIMO uplink.
//!
//! Clients transmit model differentials simultaneously over a Rayleigh block
//! fading channel. The server either projects the received vector onto the
//! sum channel (random orthogonalization) or runs a linear MMSE detector, and
//! averages the recovered sum into the global model.
//!
//! ```
//! use orthofl::{channel, receivers, rng, SystemConfig};
//!
//! let cfg = SystemConfig::new(256, 8, 1, 10.0).unwrap();
//! let h = channel::draw_channel(&cfg, &mut rng::stream(1, rng::Purpose::Channel, &[]));
//! let x = [0.5, -1.0, 0.25, 0.0, 1.0, -0.5, 0.75, 0.1];
//! let y = channel::transmit(&h, &x, &cfg, &mut rng::stream(1, rng::Purpose::Noise, &[])).unwrap();
//! let est = receivers::ro_aggregate(&y, h.sum_estimate(), cfg.power(), None).unwrap();
//! assert!((est.value - x.iter().sum::<f64>()).abs() < 1.5);
//! ```

pub mod bounds;
pub mod channel;
pub mod dataio;
pub mod error;
pub mod fl;
pub mod objectives;
pub mod receivers;
pub mod rng;
pub mod stats;
pub mod system;

pub use error::{Error, Result};
pub use system::SystemConfig;

// The guide's snippets run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/crlb.md")]
    mod crlb {}
    #[doc = include_str!("../../../book/src/convergence.md")]
    mod convergence {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
