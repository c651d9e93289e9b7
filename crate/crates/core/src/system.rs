use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::from_db;

/// Parameters of one simulated uplink: array size, population, model size,
/// link quality and pilot settings.
///
/// SNR is `P / sigma^2`, so the noise variance per antenna is `P / SNR`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    antennas: usize,
    clients: usize,
    model_dim: usize,
    snr_db: f64,
    power: f64,
    pilot_repetitions: usize,
    master_seed: u64,
}

impl SystemConfig {
    pub fn new(antennas: usize, clients: usize, model_dim: usize, snr_db: f64) -> Result<Self> {
        Self::builder(antennas, clients, model_dim, snr_db).build()
    }

    pub fn builder(antennas: usize, clients: usize, model_dim: usize, snr_db: f64) -> SystemConfigBuilder {
        SystemConfigBuilder {
            cfg: SystemConfig {
                antennas,
                clients,
                model_dim,
                snr_db,
                power: 1.0,
                pilot_repetitions: 0,
                master_seed: 0,
            },
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn model_dim(&self) -> usize {
        self.model_dim
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn snr(&self) -> f64 {
        from_db(self.snr_db)
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_variance(&self) -> f64 {
        self.power / self.snr()
    }

    /// Zero means the receiver knows the sum channel exactly.
    pub fn pilot_repetitions(&self) -> usize {
        self.pilot_repetitions
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Same system with a different SNR.
    pub fn with_snr_db(self, snr_db: f64) -> Result<Self> {
        SystemConfigBuilder { cfg: SystemConfig { snr_db, ..self } }.build()
    }

    pub fn with_seed(self, master_seed: u64) -> Self {
        SystemConfig { master_seed, ..self }
    }
}

#[derive(Debug, Clone)]
pub struct SystemConfigBuilder {
    cfg: SystemConfig,
}

impl SystemConfigBuilder {
    pub fn power(mut self, power: f64) -> Self {
        self.cfg.power = power;
        self
    }

    pub fn pilot_repetitions(mut self, n: usize) -> Self {
        self.cfg.pilot_repetitions = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.cfg.master_seed = seed;
        self
    }

    pub fn build(self) -> Result<SystemConfig> {
        let c = self.cfg;
        if c.antennas == 0 || c.clients == 0 || c.model_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "M, K and d must be positive (got M={}, K={}, d={})",
                c.antennas, c.clients, c.model_dim
            )));
        }
        if !c.snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!("SNR must be finite, got {} dB", c.snr_db)));
        }
        if !(c.power > 0.0 && c.power.is_finite()) {
            return Err(Error::InvalidConfig(format!("transmit power must be positive, got {}", c.power)));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_systems() {
        assert!(SystemConfig::new(0, 8, 1, 10.0).is_err());
        assert!(SystemConfig::new(256, 0, 1, 10.0).is_err());
        assert!(SystemConfig::new(256, 8, 0, 10.0).is_err());
        assert!(SystemConfig::new(256, 8, 1, f64::NAN).is_err());
        assert!(SystemConfig::builder(256, 8, 1, 10.0).power(0.0).build().is_err());
    }

    #[test]
    fn noise_variance_follows_snr() {
        let cfg = SystemConfig::builder(4, 2, 1, 10.0).power(2.0).build().unwrap();
        assert!((cfg.noise_variance() - 0.2).abs() < 1e-12);
    }
}
