//! Line-oriented run configuration: `[section]` headers, `key = value`
//! pairs, `#` comments. Unknown sections or keys are rejected with the
//! line number. Every key carries its unit in the name.
//!
//! Defaults reproduce the long-haul operating point: 5.9/2.4 kHz lasers,
//! T_R = 4.9152 µs, T_Q = 1.6384 µs, 24 Mcount/s reference frames, 16
//! phase slices, and the 202-km source parameters.

use crate::forward::ChannelModel;
use crate::keyrate::{DecoyParams, FailureProbs};
use crate::noise::{FiberPathModel, FrameSchedule, LinkNoise, PsdModel, SliceConfig};
use crate::recovery::RecoveryConfig;
use crate::synth::RateProfile;
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {0}: unknown section [{1}]")]
    UnknownSection(usize, String),
    #[error("line {0}: unknown key '{1}' in section [{2}]")]
    UnknownKey(usize, String, String),
    #[error("line {0}: expected 'key = value'")]
    BadLine(usize),
    #[error("line {0}: cannot parse value '{1}'")]
    BadValue(usize, String),
    #[error("key '{0}' outside any section")]
    KeyOutsideSection(String),
    #[error("invalid PSD table: {0}")]
    BadPsdTable(String),
    #[error("derived component invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    // [link]
    pub linewidth_a_khz: f64,
    pub linewidth_b_khz: f64,
    /// Shared-laser configuration (self-heterodyne): both Δφ terms come
    /// from one trajectory and cancel.
    pub shared_laser: bool,
    pub fiber_psd_file_a: Option<String>,
    pub fiber_psd_file_b: Option<String>,
    // [schedule]
    pub t_r_us: f64,
    pub t_q_us: f64,
    pub t_buffer_us: f64,
    // [rates]
    pub r_rate_mcps: f64,
    pub q_rate_mcps: f64,
    pub dark_rate_cps: f64,
    // [recovery]
    pub bin_width_ps: f64,
    pub search_lo_mhz: f64,
    pub search_hi_mhz: f64,
    pub resolution_mhz: f64,
    pub duplex: bool,
    // [slice]
    pub slice_m: u32,
    pub wide_window: bool,
    // [decoy]
    pub mu_y: f64,
    pub mu_x: f64,
    pub mu_o: f64,
    pub p_z: f64,
    pub epsilon: f64,
    pub p_x: f64,
    pub n_total: f64,
    pub f_ec: f64,
    pub eps_est: f64,
    pub eps_cor: f64,
    pub eps_pa: f64,
    pub eps_hat: f64,
    pub finite: bool,
    // [channel]
    pub loss_db: f64,
    pub loss_coeff_db_per_km: f64,
    pub det_eff: f64,
    pub dark_prob: f64,
    pub e_mis: f64,
    // [run]
    pub seed: u64,
    pub n_frames: u64,
    pub carrier_mhz: f64,
    pub phi0_rad: f64,
    pub pulse_period_ns: f64,
    pub gate_width_ps: f64,
    pub slot_rate_ghz: f64,
    /// SHA-256 of the raw config text, hex.
    pub digest: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            linewidth_a_khz: 5.9,
            linewidth_b_khz: 2.4,
            shared_laser: false,
            fiber_psd_file_a: None,
            fiber_psd_file_b: None,
            t_r_us: 4.9152,
            t_q_us: 1.6384,
            t_buffer_us: 0.1,
            r_rate_mcps: 24.0,
            q_rate_mcps: 24.0,
            dark_rate_cps: 1000.0,
            bin_width_ps: 100.0,
            search_lo_mhz: 50.0,
            search_hi_mhz: 200.0,
            resolution_mhz: 0.01,
            duplex: true,
            slice_m: 16,
            wide_window: false,
            mu_y: 0.49,
            mu_x: 0.044,
            mu_o: 5e-5,
            p_z: 0.878,
            epsilon: 0.28,
            p_x: 0.115,
            n_total: 1e13,
            f_ec: 1.16,
            eps_est: 1e-10,
            eps_cor: 1e-10,
            eps_pa: 1e-10,
            eps_hat: 1e-10,
            finite: true,
            loss_db: 38.4,
            loss_coeff_db_per_km: 0.19,
            det_eff: 0.75,
            dark_prob: 1e-8,
            e_mis: 0.03,
            seed: 1,
            n_frames: 100,
            carrier_mhz: 80.0,
            phi0_rad: 0.0,
            pulse_period_ns: 1.6,
            gate_width_ps: 200.0,
            slot_rate_ghz: 1.25,
            digest: String::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_string();
                if !["link", "schedule", "rates", "recovery", "slice", "decoy", "channel", "run"]
                    .contains(&name.as_str())
                {
                    return Err(ConfigError::UnknownSection(line_no, name));
                }
                section = Some(name);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::BadLine(line_no))?;
            let key = key.trim();
            let value = value.trim();
            let sec = section
                .clone()
                .ok_or_else(|| ConfigError::KeyOutsideSection(key.to_string()))?;
            cfg.apply(&sec, key, value, line_no)?;
        }
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        cfg.digest = hex(&h.finalize());
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn apply(&mut self, sec: &str, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let f = |v: &str| -> Result<f64, ConfigError> {
            v.parse().map_err(|_| ConfigError::BadValue(line, v.to_string()))
        };
        let b = |v: &str| -> Result<bool, ConfigError> {
            v.parse().map_err(|_| ConfigError::BadValue(line, v.to_string()))
        };
        match (sec, key) {
            ("link", "linewidth_a_khz") => self.linewidth_a_khz = f(value)?,
            ("link", "linewidth_b_khz") => self.linewidth_b_khz = f(value)?,
            ("link", "shared_laser") => self.shared_laser = b(value)?,
            ("link", "fiber_psd_file_a") => self.fiber_psd_file_a = Some(value.to_string()),
            ("link", "fiber_psd_file_b") => self.fiber_psd_file_b = Some(value.to_string()),
            ("schedule", "t_r_us") => self.t_r_us = f(value)?,
            ("schedule", "t_q_us") => self.t_q_us = f(value)?,
            ("schedule", "t_buffer_us") => self.t_buffer_us = f(value)?,
            ("rates", "r_rate_mcps") => self.r_rate_mcps = f(value)?,
            ("rates", "q_rate_mcps") => self.q_rate_mcps = f(value)?,
            ("rates", "dark_rate_cps") => self.dark_rate_cps = f(value)?,
            ("recovery", "bin_width_ps") => self.bin_width_ps = f(value)?,
            ("recovery", "search_lo_mhz") => self.search_lo_mhz = f(value)?,
            ("recovery", "search_hi_mhz") => self.search_hi_mhz = f(value)?,
            ("recovery", "resolution_mhz") => self.resolution_mhz = f(value)?,
            ("recovery", "duplex") => self.duplex = b(value)?,
            ("slice", "m") => {
                self.slice_m = value.parse().map_err(|_| ConfigError::BadValue(line, value.into()))?
            }
            ("slice", "wide_window") => self.wide_window = b(value)?,
            ("decoy", "mu_y") => self.mu_y = f(value)?,
            ("decoy", "mu_x") => self.mu_x = f(value)?,
            ("decoy", "mu_o") => self.mu_o = f(value)?,
            ("decoy", "p_z") => self.p_z = f(value)?,
            ("decoy", "epsilon") => self.epsilon = f(value)?,
            ("decoy", "p_x") => self.p_x = f(value)?,
            ("decoy", "n_total") => self.n_total = f(value)?,
            ("decoy", "f_ec") => self.f_ec = f(value)?,
            ("decoy", "eps_est") => self.eps_est = f(value)?,
            ("decoy", "eps_cor") => self.eps_cor = f(value)?,
            ("decoy", "eps_pa") => self.eps_pa = f(value)?,
            ("decoy", "eps_hat") => self.eps_hat = f(value)?,
            ("decoy", "finite") => self.finite = b(value)?,
            ("channel", "loss_db") => self.loss_db = f(value)?,
            ("channel", "loss_coeff_db_per_km") => self.loss_coeff_db_per_km = f(value)?,
            ("channel", "det_eff") => self.det_eff = f(value)?,
            ("channel", "dark_prob") => self.dark_prob = f(value)?,
            ("channel", "e_mis") => self.e_mis = f(value)?,
            ("run", "seed") => {
                self.seed = value.parse().map_err(|_| ConfigError::BadValue(line, value.into()))?
            }
            ("run", "n_frames") => {
                self.n_frames = value.parse().map_err(|_| ConfigError::BadValue(line, value.into()))?
            }
            ("run", "carrier_mhz") => self.carrier_mhz = f(value)?,
            ("run", "phi0_rad") => self.phi0_rad = f(value)?,
            ("run", "pulse_period_ns") => self.pulse_period_ns = f(value)?,
            ("run", "gate_width_ps") => self.gate_width_ps = f(value)?,
            ("run", "slot_rate_ghz") => self.slot_rate_ghz = f(value)?,
            _ => return Err(ConfigError::UnknownKey(line, key.to_string(), sec.to_string())),
        }
        Ok(())
    }

    pub fn link_noise(&self) -> Result<LinkNoise, ConfigError> {
        let bad = |e: crate::noise::NoiseError| ConfigError::Invalid(e.to_string());
        let fiber = |file: &Option<String>| -> Result<FiberPathModel, ConfigError> {
            match file {
                None => Ok(FiberPathModel::None),
                Some(p) => {
                    let points = parse_psd_table(&std::fs::read_to_string(p)?)?;
                    Ok(FiberPathModel::PhasePsd { psd: PsdModel::tabulated(points).map_err(bad)? })
                }
            }
        };
        Ok(LinkNoise {
            laser_a: PsdModel::from_linewidth(self.linewidth_a_khz * 1e3).map_err(bad)?,
            laser_b: if self.shared_laser {
                PsdModel::from_linewidth(0.0).map_err(bad)?
            } else {
                PsdModel::from_linewidth(self.linewidth_b_khz * 1e3).map_err(bad)?
            },
            fiber_a: fiber(&self.fiber_psd_file_a)?,
            fiber_b: fiber(&self.fiber_psd_file_b)?,
            nu0: crate::noise::DEFAULT_NU0,
        })
    }

    pub fn schedule(&self) -> Result<FrameSchedule, ConfigError> {
        FrameSchedule::new(self.t_r_us * 1e-6, self.t_q_us * 1e-6, self.t_buffer_us * 1e-6)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn rates(&self) -> RateProfile {
        RateProfile {
            r_rate: self.r_rate_mcps * 1e6,
            q_rate: self.q_rate_mcps * 1e6,
            dark_rate: self.dark_rate_cps,
        }
    }

    pub fn recovery(&self) -> RecoveryConfig {
        RecoveryConfig {
            bin_width: self.bin_width_ps * 1e-12,
            search_window: (self.search_lo_mhz * 1e6, self.search_hi_mhz * 1e6),
            target_resolution: self.resolution_mhz * 1e6,
            duplex: self.duplex,
            parabolic: false,
        }
    }

    pub fn slice(&self) -> Result<SliceConfig, ConfigError> {
        let r = if self.wide_window {
            SliceConfig::wide_window(self.slice_m)
        } else {
            SliceConfig::sift_default(self.slice_m)
        };
        r.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn decoy(&self) -> DecoyParams {
        DecoyParams {
            mu_y: self.mu_y,
            mu_x: self.mu_x,
            mu_o: self.mu_o,
            p_z: self.p_z,
            epsilon: self.epsilon,
            p_x: self.p_x,
            n_total: self.n_total,
            f_ec: self.f_ec,
            failure: FailureProbs {
                eps_est: self.eps_est,
                eps_cor: self.eps_cor,
                eps_pa: self.eps_pa,
                eps_hat: self.eps_hat,
            },
            finite: self.finite,
        }
    }

    pub fn channel(&self) -> ChannelModel {
        ChannelModel {
            loss_db: self.loss_db,
            det_eff: self.det_eff,
            dark_prob: self.dark_prob,
            e_mis: self.e_mis,
        }
    }
}

/// Two-column PSD table: frequency Hz, density; `#` comments.
pub fn parse_psd_table(text: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |v: Option<&str>| {
            v.and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| ConfigError::BadPsdTable(format!("line {}", i + 1)))
        };
        let f = parse(it.next())?;
        let d = parse(it.next())?;
        if it.next().is_some() {
            return Err(ConfigError::BadPsdTable(format!("line {}: extra column", i + 1)));
        }
        points.push((f, d));
    }
    if points.len() < 2 {
        return Err(ConfigError::BadPsdTable("need at least 2 points".into()));
    }
    Ok(points)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
