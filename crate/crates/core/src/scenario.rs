//! Scenario configuration: flat TOML key/value text, validated into a
//! [`Scenario`].
//!
//! Every key is optional. Missing keys take the reference setup: 28 GHz,
//! wires of half length lambda/64 and radius lambda/500, Tx at (5, -5, 3) m,
//! Rx at (5, 5, 1) m, a 4x4 RIS centered at the origin, 256 transmissions,
//! loads R in [0.1, 10.1] ohm and L in [0.1, 10.1] nH, noise PSD
//! -173.855 dBm/Hz with a 10 dB noise figure over 1 Hz.

use serde::{Deserialize, Serialize};

use crate::bounds::NoiseModel;
use crate::constants::{derive_constants, PhysicalConstants};
use crate::error::{Error, Result};
use crate::geometry::{build_ris_grid, Point3, Radiator, RisGrid};
use crate::quadrature::QuadratureSpec;

pub const DEFAULT_FREQUENCY_GHZ: f64 = 28.0;
pub const DEFAULT_HALF_LENGTH_OVER_LAMBDA: f64 = 1.0 / 64.0;
pub const DEFAULT_RADIUS_OVER_LAMBDA: f64 = 1.0 / 500.0;
pub const DEFAULT_TX_POSITION_M: [f64; 3] = [5.0, -5.0, 3.0];
pub const DEFAULT_RX_POSITION_M: [f64; 3] = [5.0, 5.0, 1.0];
pub const DEFAULT_RIS_CENTER_M: [f64; 3] = [0.0, 0.0, 0.0];
pub const DEFAULT_RIS_SIZE: usize = 4;
pub const DEFAULT_SPACING_OVER_LAMBDA: f64 = 0.5;
pub const DEFAULT_NUM_TRANSMISSIONS: usize = 256;
pub const DEFAULT_LOAD_R_OHM: (f64, f64) = (0.1, 10.1);
pub const DEFAULT_LOAD_L_NH: (f64, f64) = (0.1, 10.1);
pub const DEFAULT_NOISE_PSD_DBM_HZ: f64 = -173.855;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 10.0;
pub const DEFAULT_NOISE_BANDWIDTH_HZ: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 1;

/// Raw config keys. `None` means "use the default".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub frequency_ghz: Option<f64>,
    pub half_length_over_lambda: Option<f64>,
    pub radius_over_lambda: Option<f64>,
    pub tx_position_m: Option<[f64; 3]>,
    pub rx_position_m: Option<[f64; 3]>,
    pub ris_center_m: Option<[f64; 3]>,
    pub ris_n1: Option<usize>,
    pub ris_n2: Option<usize>,
    pub ris_spacing_over_lambda: Option<f64>,
    pub num_transmissions: Option<usize>,
    pub load_r_min_ohm: Option<f64>,
    pub load_r_max_ohm: Option<f64>,
    pub load_l_min_nh: Option<f64>,
    pub load_l_max_nh: Option<f64>,
    pub noise_psd_dbm_hz: Option<f64>,
    pub noise_figure_db: Option<f64>,
    pub noise_bandwidth_hz: Option<f64>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_column(text, span.start))
                .unwrap_or((0, 0));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub constants: PhysicalConstants,
    pub tx: Radiator,
    pub rx: Radiator,
    pub ris: RisGrid,
    /// Half length shared by every wire, in m.
    pub element_half_length: f64,
    /// Radius shared by every wire, in m.
    pub element_wire_radius: f64,
    pub spacing_over_lambda: f64,
    pub noise: NoiseModel,
    pub num_transmissions: usize,
    /// Tunable load resistance interval in ohms.
    pub load_resistance_range: (f64, f64),
    /// Tunable load inductance interval in henries.
    pub load_inductance_range: (f64, f64),
    pub rng_seed: u64,
    pub quadrature: QuadratureSpec,
    config: ScenarioConfig,
}

impl Scenario {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let c = config;
        let frequency_ghz = c.frequency_ghz.unwrap_or(DEFAULT_FREQUENCY_GHZ);
        let constants = derive_constants(frequency_ghz * 1e9)
            .map_err(|e| Error::validation("frequency_ghz", e.to_string()))?;
        let lambda = constants.wavelength;

        let h_ratio = c.half_length_over_lambda.unwrap_or(DEFAULT_HALF_LENGTH_OVER_LAMBDA);
        let r_ratio = c.radius_over_lambda.unwrap_or(DEFAULT_RADIUS_OVER_LAMBDA);
        positive("half_length_over_lambda", h_ratio)?;
        positive("radius_over_lambda", r_ratio)?;
        if r_ratio >= h_ratio {
            return Err(Error::validation(
                "radius_over_lambda",
                format!("must be smaller than half_length_over_lambda ({r_ratio} >= {h_ratio})"),
            ));
        }
        let h = h_ratio * lambda;
        let r = r_ratio * lambda;

        let n1 = c.ris_n1.unwrap_or(DEFAULT_RIS_SIZE);
        let n2 = c.ris_n2.unwrap_or(DEFAULT_RIS_SIZE);
        if n1 == 0 {
            return Err(Error::validation("ris_n1", "must be at least 1"));
        }
        if n2 == 0 {
            return Err(Error::validation("ris_n2", "must be at least 1"));
        }
        let spacing_over_lambda = c.ris_spacing_over_lambda.unwrap_or(DEFAULT_SPACING_OVER_LAMBDA);
        positive("ris_spacing_over_lambda", spacing_over_lambda)?;
        let center = point("ris_center_m", c.ris_center_m.unwrap_or(DEFAULT_RIS_CENTER_M))?;
        let ris = build_ris_grid(n1, n2, spacing_over_lambda * lambda, center)
            .map_err(|e| Error::validation("ris_spacing_over_lambda", e.to_string()))?;

        let tx_pos = point("tx_position_m", c.tx_position_m.unwrap_or(DEFAULT_TX_POSITION_M))?;
        let rx_pos = point("rx_position_m", c.rx_position_m.unwrap_or(DEFAULT_RX_POSITION_M))?;
        let tx = Radiator::new(tx_pos, h, r).map_err(|e| Error::validation("tx_position_m", e.to_string()))?;
        let rx = Radiator::new(rx_pos, h, r).map_err(|e| Error::validation("rx_position_m", e.to_string()))?;
        if ris.bounding_box_contains(&tx_pos, h) {
            return Err(Error::validation("tx_position_m", "transmitter lies inside the RIS bounding box"));
        }
        if ris.bounding_box_contains(&rx_pos, h) {
            return Err(Error::validation("rx_position_m", "receiver lies inside the RIS bounding box"));
        }

        let num_transmissions = c.num_transmissions.unwrap_or(DEFAULT_NUM_TRANSMISSIONS);
        let n = n1 * n2;
        if num_transmissions < n {
            return Err(Error::validation(
                "num_transmissions",
                format!(
                    "{num_transmissions} transmissions cannot identify {n} element channels \
                     (need num_transmissions >= ris_n1 * ris_n2)"
                ),
            ));
        }

        let r_min = c.load_r_min_ohm.unwrap_or(DEFAULT_LOAD_R_OHM.0);
        let r_max = c.load_r_max_ohm.unwrap_or(DEFAULT_LOAD_R_OHM.1);
        let l_min = c.load_l_min_nh.unwrap_or(DEFAULT_LOAD_L_NH.0);
        let l_max = c.load_l_max_nh.unwrap_or(DEFAULT_LOAD_L_NH.1);
        if !(r_min.is_finite() && r_min >= 0.0) {
            return Err(Error::validation("load_r_min_ohm", format!("must be non-negative, got {r_min}")));
        }
        if !(r_max.is_finite() && r_max >= r_min) {
            return Err(Error::validation("load_r_max_ohm", format!("must be at least load_r_min_ohm, got {r_max}")));
        }
        positive("load_l_min_nh", l_min)?;
        if !(l_max.is_finite() && l_max >= l_min) {
            return Err(Error::validation("load_l_max_nh", format!("must be at least load_l_min_nh, got {l_max}")));
        }

        let noise = NoiseModel {
            psd_dbm_hz: c.noise_psd_dbm_hz.unwrap_or(DEFAULT_NOISE_PSD_DBM_HZ),
            noise_figure_db: c.noise_figure_db.unwrap_or(DEFAULT_NOISE_FIGURE_DB),
            bandwidth_hz: c.noise_bandwidth_hz.unwrap_or(DEFAULT_NOISE_BANDWIDTH_HZ),
        };
        if !noise.psd_dbm_hz.is_finite() {
            return Err(Error::validation("noise_psd_dbm_hz", "must be finite"));
        }
        if !noise.noise_figure_db.is_finite() {
            return Err(Error::validation("noise_figure_db", "must be finite"));
        }
        positive("noise_bandwidth_hz", noise.bandwidth_hz)?;

        let resolved = ScenarioConfig {
            frequency_ghz: Some(frequency_ghz),
            half_length_over_lambda: Some(h_ratio),
            radius_over_lambda: Some(r_ratio),
            tx_position_m: Some(tx_pos.into()),
            rx_position_m: Some(rx_pos.into()),
            ris_center_m: Some(center.into()),
            ris_n1: Some(n1),
            ris_n2: Some(n2),
            ris_spacing_over_lambda: Some(spacing_over_lambda),
            num_transmissions: Some(num_transmissions),
            load_r_min_ohm: Some(r_min),
            load_r_max_ohm: Some(r_max),
            load_l_min_nh: Some(l_min),
            load_l_max_nh: Some(l_max),
            noise_psd_dbm_hz: Some(noise.psd_dbm_hz),
            noise_figure_db: Some(noise.noise_figure_db),
            noise_bandwidth_hz: Some(noise.bandwidth_hz),
            seed: Some(c.seed.unwrap_or(DEFAULT_SEED)),
        };

        Ok(Self {
            constants,
            tx,
            rx,
            ris,
            element_half_length: h,
            element_wire_radius: r,
            spacing_over_lambda,
            noise,
            num_transmissions,
            load_resistance_range: (r_min, r_max),
            load_inductance_range: (l_min * 1e-9, l_max * 1e-9),
            rng_seed: c.seed.unwrap_or(DEFAULT_SEED),
            quadrature: QuadratureSpec::default(),
            config: resolved,
        })
    }

    /// Number of RIS elements.
    pub fn num_elements(&self) -> usize {
        self.ris.len()
    }

    /// Fully resolved config, every key present.
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Serializes the resolved config; loading it back reproduces this
    /// scenario.
    pub fn to_config_text(&self) -> String {
        self.config.to_text()
    }

    pub fn with_spacing(&self, spacing_over_lambda: f64) -> Result<Self> {
        let mut config = self.config.clone();
        config.ris_spacing_over_lambda = Some(spacing_over_lambda);
        Self::from_config(&config).map(|s| s.with_quadrature(self.quadrature))
    }

    pub fn with_size(&self, n1: usize, n2: usize) -> Result<Self> {
        let mut config = self.config.clone();
        config.ris_n1 = Some(n1);
        config.ris_n2 = Some(n2);
        Self::from_config(&config).map(|s| s.with_quadrature(self.quadrature))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.rng_seed = seed;
        out.config.seed = Some(seed);
        out
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureSpec) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn ris_elements(&self) -> Vec<Radiator> {
        self.ris
            .element_positions
            .iter()
            .map(|p| Radiator {
                position: *p,
                half_length: self.element_half_length,
                wire_radius: self.element_wire_radius,
            })
            .collect()
    }

    /// Noise variance in watts.
    pub fn sigma2(&self) -> f64 {
        self.noise.sigma2()
    }
}

/// Parses and validates scenario config text.
pub fn load_scenario(config_text: &str) -> Result<Scenario> {
    Scenario::from_config(&ScenarioConfig::parse(config_text)?)
}

impl Default for Scenario {
    fn default() -> Self {
        Self::from_config(&ScenarioConfig::default()).expect("defaults are valid")
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive, got {value}")))
    }
}

fn point(field: &str, p: [f64; 3]) -> Result<Point3> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(Point3::from(p))
    } else {
        Err(Error::validation(field, "non-finite coordinate"))
    }
}
