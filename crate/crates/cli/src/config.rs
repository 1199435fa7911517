//! Flat `key = value` configuration with dotted sections, typed run
//! configuration and the shipped presets.
//!
//! Times under `schedule.*` and `classical.*` are in units of the system's
//! characteristic time (the traversal period for the billiard, `r_c / p_0`
//! scaled by the mass for Henon-Heiles).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use chaoseq_core::billiard::{BilliardMesh, Parity, Sector, Stencil};
use chaoseq_core::equilibration::Observable;
use chaoseq_core::fields::Grid2D;
use chaoseq_core::models::{HenonHeiles, RippleBilliard};
use chaoseq_core::propagation::GaussianPacket;

use crate::error::{CliError, CliResult};

/// Raw key-value pairs, sorted by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(CliError::Config(format!("line {}: malformed key {k:?}", n + 1)));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn preset(name: &str) -> CliResult<Self> {
        let text = preset_text(name).ok_or_else(|| {
            CliError::Config(format!("unknown preset {name:?}; available: {}", PRESETS.join(", ")))
        })?;
        Self::parse(text)
    }

    /// Entries of `other` replace entries of `self`.
    pub fn merged(mut self, other: &Config) -> Self {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key).ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
    }

    fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        self.get(key).map_or(Ok(default), |v| parse_f64(key, v))
    }

    fn f64_req(&self, key: &str) -> CliResult<f64> {
        parse_f64(key, self.require(key)?)
    }

    fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        self.get(key).map_or(Ok(default), |v| {
            v.parse()
                .map_err(|_| CliError::Config(format!("`{key}` must be a non-negative integer, got {v:?}")))
        })
    }

    fn pair_or(&self, key: &str, default: (f64, f64)) -> CliResult<(f64, f64)> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(CliError::Config(format!("`{key}` must be two comma-separated numbers, got {v:?}")));
                }
                Ok((parse_f64(key, parts[0])?, parse_f64(key, parts[1])?))
            }
        }
    }

    /// Canonical text form; identical configurations give identical text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| CliError::Config(format!("`{key}` must be a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(CliError::Config(format!("`{key}` must be finite, got {v:?}")));
    }
    Ok(x)
}

pub const PRESETS: [&str; 4] = ["paper-full", "paper-desk", "square-validation", "hh-desk"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "paper-full" => Some(PAPER_FULL),
        "paper-desk" => Some(PAPER_DESK),
        "square-validation" => Some(SQUARE_VALIDATION),
        "hh-desk" => Some(HH_DESK),
        _ => None,
    }
}

const PAPER_FULL: &str = "\
system.kind = ripple
system.a = 6
system.b = 15
packet.alpha = 1
packet.center = 0, 15
packet.momentum = 5, 0
grid.spacing = 0.08
eigen.states_per_sector = 1050
eigen.sectors = even-even, odd-even
schedule.t_end = 14
schedule.sample_interval = 0.01
schedule.snapshot_interval = 0.5
schedule.window = 10, 14
seed = 20240601
";

const PAPER_DESK: &str = "\
system.kind = ripple
system.a = 6
system.b = 15
packet.alpha = 1
packet.center = 0, 15
packet.momentum = 2.8, 0
grid.spacing = 0.1
eigen.states_per_sector = 600
eigen.sectors = even-even, odd-even
schedule.t_end = 14
schedule.sample_interval = 0.01
schedule.snapshot_interval = 0.5
schedule.window = 10, 14
seed = 20240601
";

const SQUARE_VALIDATION: &str = "\
system.kind = ripple
system.a = 0
system.b = 15
packet.alpha = 1
packet.center = 0, 15
packet.momentum = 2.8, 0
grid.spacing = 0.1
eigen.states_per_sector = 400
eigen.sectors = even-even
schedule.t_end = 14
schedule.sample_interval = 0.01
schedule.snapshot_interval = 0.5
schedule.window = 10, 14
seed = 20240601
";

const HH_DESK: &str = "\
system.kind = henon-heiles
system.u = 1
system.lambda = 0.05
grid.n = 256
grid.half_width = 1.5
schedule.dt = 2e-4
schedule.t_end = 20
schedule.sample_interval = 0.01
schedule.snapshot_interval = 0.2
schedule.window = 10, 20
seed = 20240601
";

/// The physical system of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemConfig {
    Ripple(RippleBilliard),
    HenonHeiles(HenonHeiles),
}

impl SystemConfig {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Ripple(_) => "ripple",
            Self::HenonHeiles(_) => "henon-heiles",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenConfig {
    pub spacing: f64,
    pub stencil: Stencil,
    pub states_per_sector: usize,
    pub sectors: Vec<Sector>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    /// Characteristic time used to scale every entry below.
    pub t_char: f64,
    /// Split-step step (Henon-Heiles only), absolute.
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub snapshot_interval: f64,
    pub window: (f64, f64),
}

impl ScheduleConfig {
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.sample_interval).round() as usize;
        (0..=n).map(|k| k as f64 * self.sample_interval).collect()
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.snapshot_interval).round() as usize;
        (0..=n).map(|k| k as f64 * self.snapshot_interval).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub observable: Observable,
    pub norm_fraction: f64,
    pub support_threshold: f64,
    pub entropy_delta: f64,
    pub husimi_sigma: f64,
    pub husimi_points: usize,
    pub husimi_section: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalConfig {
    pub count: usize,
    pub shell_eps: f64,
    pub cells: usize,
    pub bins: usize,
    pub section_time: f64,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub packet: GaussianPacket,
    /// Split-step grid (Henon-Heiles) or billiard eigen mesh settings.
    pub grid: Option<Grid2D>,
    pub eigen: Option<EigenConfig>,
    pub schedule: ScheduleConfig,
    pub analysis: AnalysisConfig,
    pub classical: ClassicalConfig,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Canonical text of the source configuration.
    pub text: String,
}

fn parse_sectors(v: &str) -> CliResult<Vec<Sector>> {
    v.split(',')
        .map(str::trim)
        .map(|s| {
            let (a, b) = s
                .split_once('-')
                .ok_or_else(|| CliError::Config(format!("sector must look like even-odd, got {s:?}")))?;
            match (Parity::parse(a), Parity::parse(b)) {
                (Some(x), Some(y)) => Ok(Sector { x, y }),
                _ => Err(CliError::Config(format!("unknown sector {s:?}"))),
            }
        })
        .collect()
}

fn positive(key: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{key}` must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Validates every documented precondition before any compute starts.
    pub fn from_config(c: &Config) -> CliResult<Self> {
        let kind = c.require("system.kind")?;
        let system = match kind {
            "ripple" => SystemConfig::Ripple(
                RippleBilliard::new(c.f64_req("system.a")?, c.f64_req("system.b")?).map_err(CliError::config)?,
            ),
            "henon-heiles" => {
                let u = positive("system.u", c.f64_or("system.u", 1.0)?)?;
                let lambda = positive("system.lambda", c.f64_or("system.lambda", 0.05)?)?;
                SystemConfig::HenonHeiles(HenonHeiles { u, lambda })
            }
            _ => return Err(CliError::Config(format!("system.kind must be ripple or henon-heiles, got {kind:?}"))),
        };

        let (packet, t_char) = match system {
            SystemConfig::Ripple(rb) => {
                let alpha = positive("packet.alpha", c.f64_or("packet.alpha", 6.0 / rb.a.max(1e-300))?)?;
                let center = c.pair_or("packet.center", rb.center())?;
                let momentum = c.pair_or("packet.momentum", (5.0, 0.0))?;
                let speed = momentum.0.hypot(momentum.1);
                positive("|packet.momentum|", speed)?;
                (
                    GaussianPacket::new(alpha, center, momentum).map_err(CliError::config)?,
                    rb.traversal_period(speed),
                )
            }
            SystemConfig::HenonHeiles(hh) => {
                let rc = hh.r_c();
                let alpha = positive("packet.alpha", c.f64_or("packet.alpha", 40.0 / (3.0 * rc))?)?;
                let center = c.pair_or("packet.center", (0.3 * rc, 0.0))?;
                let th = 10f64.to_radians();
                let p = 0.7f64.sqrt() * hh.p0();
                let momentum = c.pair_or("packet.momentum", (p * th.cos(), p * th.sin()))?;
                (
                    GaussianPacket::new(alpha, center, momentum).map_err(CliError::config)?,
                    hh.t_char(),
                )
            }
        };

        let (grid, eigen) = match system {
            SystemConfig::Ripple(rb) => {
                let stencil = match c.get("grid.stencil").unwrap_or("fourth-order") {
                    "fourth-order" => Stencil::FourthOrder,
                    "five-point" => Stencil::FivePoint,
                    s => return Err(CliError::Config(format!("grid.stencil must be fourth-order or five-point, got {s:?}"))),
                };
                let spacing = positive("grid.spacing", c.f64_or("grid.spacing", 2.0 * (rb.a + rb.b) / 255.0)?)?;
                let eigen = EigenConfig {
                    spacing,
                    stencil,
                    states_per_sector: c.usize_or("eigen.states_per_sector", 600)?,
                    sectors: parse_sectors(c.get("eigen.sectors").unwrap_or("even-even, odd-even"))?,
                    tol: positive("eigen.tol", c.f64_or("eigen.tol", 1e-10)?)?,
                };
                if eigen.states_per_sector == 0 || eigen.sectors.is_empty() {
                    return Err(CliError::Config("need at least one sector and one state".into()));
                }
                let mesh = BilliardMesh::new(rb, spacing).map_err(CliError::config)?;
                for &s in &eigen.sectors {
                    let max = mesh.max_reliable_count(s);
                    if eigen.states_per_sector > max {
                        return Err(CliError::Config(format!(
                            "grid.spacing {spacing} supports at most {max} states in sector {}, {} requested",
                            s.label(),
                            eigen.states_per_sector
                        )));
                    }
                }
                packet.in_billiard(&rb, &mesh.grid).map_err(CliError::config)?;
                (None, Some(eigen))
            }
            SystemConfig::HenonHeiles(hh) => {
                let n = c.usize_or("grid.n", 512)?;
                if n < 16 || n % 2 != 0 {
                    return Err(CliError::Config(format!("grid.n must be even and at least 16, got {n}")));
                }
                let half = positive("grid.half_width", c.f64_or("grid.half_width", 2.5)?)? * hh.r_c();
                let g = Grid2D::new(n, n, -half, -half, 2.0 * half / n as f64, 2.0 * half / n as f64)
                    .map_err(CliError::config)?;
                // the packet must fit inside the grid
                packet.on_grid(&g).map_err(CliError::config)?;
                (Some(g), None)
            }
        };

        let window = c.pair_or("schedule.window", (10.0, 14.0))?;
        let schedule = ScheduleConfig {
            t_char,
            dt: positive("schedule.dt", c.f64_or("schedule.dt", 2e-4)?)? * t_char,
            t_end: positive("schedule.t_end", c.f64_or("schedule.t_end", 14.0)?)? * t_char,
            sample_interval: positive("schedule.sample_interval", c.f64_or("schedule.sample_interval", 0.01)?)? * t_char,
            snapshot_interval: positive("schedule.snapshot_interval", c.f64_or("schedule.snapshot_interval", 0.5)?)?
                * t_char,
            window: (window.0 * t_char, window.1 * t_char),
        };
        if !(schedule.window.0 >= 0.0 && schedule.window.0 < schedule.window.1 && schedule.window.1 <= schedule.t_end * (1.0 + 1e-12)) {
            return Err(CliError::Config(format!(
                "schedule.window must satisfy 0 <= start < end <= t_end, got {window:?} with t_end {}",
                schedule.t_end / t_char
            )));
        }
        if let SystemConfig::HenonHeiles(_) = system {
            if schedule.dt > 1e-3 * t_char {
                return Err(CliError::Config("schedule.dt must not exceed 1e-3 characteristic times".into()));
            }
            for (key, v) in [
                ("schedule.sample_interval", schedule.sample_interval),
                ("schedule.snapshot_interval", schedule.snapshot_interval),
                ("schedule.t_end", schedule.t_end),
            ] {
                let r = v / schedule.dt;
                if (r - r.round()).abs() > 1e-6 {
                    return Err(CliError::Config(format!("`{key}` must be a multiple of schedule.dt")));
                }
            }
        }

        let analysis = AnalysisConfig {
            observable: Observable::parse(c.get("analysis.observable").unwrap_or("momentum")).map_err(CliError::config)?,
            norm_fraction: c.f64_or("analysis.norm_fraction", 0.999)?,
            support_threshold: c.f64_or("analysis.support_threshold", 1e-3)?,
            entropy_delta: c.f64_or("analysis.entropy_delta", 1e-6)?,
            husimi_sigma: c.f64_or("analysis.husimi_sigma", 0.0)?,
            husimi_points: c.usize_or("analysis.husimi_points", 121)?,
            husimi_section: c.pair_or("analysis.husimi_section", (0.0, 0.0))?,
        };
        if !(analysis.norm_fraction > 0.0 && analysis.norm_fraction < 1.0) {
            return Err(CliError::Config("analysis.norm_fraction must lie in (0, 1)".into()));
        }
        if !(analysis.support_threshold > 0.0 && analysis.support_threshold < 1.0) {
            return Err(CliError::Config("analysis.support_threshold must lie in (0, 1)".into()));
        }

        let classical = ClassicalConfig {
            count: c.usize_or("classical.count", 180_000)?,
            shell_eps: c.f64_or("classical.shell_eps", 0.005)?,
            cells: c.usize_or("classical.cells", 30)?,
            bins: c.usize_or("classical.bins", 60)?,
            section_time: positive("classical.section_time", c.f64_or("classical.section_time", 400.0)?)? * t_char,
        };
        if classical.count < 1000 {
            return Err(CliError::Config("classical.count must be at least 1000".into()));
        }

        let seed = c.get("seed").map_or(Ok(0), |v| {
            v.parse()
                .map_err(|_| CliError::Config(format!("seed must be an unsigned integer, got {v:?}")))
        })?;

        Ok(Self {
            system,
            packet,
            grid,
            eigen,
            schedule,
            analysis,
            classical,
            seed,
            out_dir: c.get("output.dir").map(PathBuf::from),
            text: c.to_text(),
        })
    }

    pub fn billiard(&self) -> CliResult<RippleBilliard> {
        match self.system {
            SystemConfig::Ripple(rb) => Ok(rb),
            _ => Err(CliError::Config("this command needs system.kind = ripple".into())),
        }
    }

    pub fn henon_heiles(&self) -> CliResult<HenonHeiles> {
        match self.system {
            SystemConfig::HenonHeiles(hh) => Ok(hh),
            _ => Err(CliError::Config("this command needs system.kind = henon-heiles".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_comments_and_overrides() {
        let a = Config::parse("# header\nsystem.kind = ripple # trailing\n\nsystem.a=6\n").unwrap();
        assert_eq!(a.get("system.kind"), Some("ripple"));
        let b = Config::parse("system.a = 3").unwrap();
        assert_eq!(a.merged(&b).get("system.a"), Some("3"));
        assert!(Config::parse("no equals sign").is_err());
    }

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            RunConfig::from_config(&Config::preset(p).unwrap()).unwrap();
        }
    }
}
