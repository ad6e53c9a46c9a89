//! Synthetic constellations for scale tests.
//!
//! Satellites sit on circular orbits in evenly spaced inclined planes;
//! ground stations rotate with the Earth. Two satellites see each other
//! when the segment between them clears the Earth and is within range, a
//! satellite sees an antenna when it is above the elevation mask. Each
//! state samples the geometry at its midpoint.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Node, Scenario, ScenarioFile, StateSpec, SystemParams, TrafficSpec};

/// Sidereal day, seconds.
const EARTH_DAY: f64 = 86_164.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub satellites: usize,
    pub planes: usize,
    /// Antennas per ground station.
    pub gs_antennas: Vec<u32>,
    /// Ground-station latitude and longitude, degrees.
    pub gs_sites: Vec<(f64, f64)>,
    pub states: usize,
    pub slots: usize,
    pub state_seconds: f64,
    /// Orbit radius over Earth radius.
    pub orbit_radius: f64,
    pub inclination_deg: f64,
    pub period_seconds: f64,
    /// Longest inter-satellite link, in Earth radii.
    pub isl_range: f64,
    pub elevation_mask_deg: f64,
    pub service_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// 30 MEO satellites in 3 planes, 3 stations of 2 antennas, 288 states
    /// of 20 slots.
    fn default() -> Self {
        SynthConfig {
            satellites: 30,
            planes: 3,
            gs_antennas: vec![2, 2, 2],
            gs_sites: vec![(40.0, 116.0), (-33.9, 18.4), (19.8, -155.5)],
            states: 288,
            slots: 20,
            state_seconds: 300.0,
            orbit_radius: 4.39,
            inclination_deg: 55.0,
            period_seconds: 46_380.0,
            isl_range: 6.5,
            elevation_mask_deg: 10.0,
            service_fraction: 0.2,
            seed: 1,
        }
    }
}

impl SynthConfig {
    /// Same geometry with `n` nodes in total; antennas are taken first
    /// from the default stations.
    pub fn with_nodes(n: usize, seed: u64) -> Result<Self> {
        let base = SynthConfig::default();
        let antennas: usize = base.gs_antennas.iter().map(|&k| k as usize).sum();
        let (gs_antennas, sats) = if n >= antennas + 2 {
            (base.gs_antennas.clone(), n - antennas)
        } else if n >= 3 {
            (vec![1], n - 1)
        } else {
            return Err(Error::invalid(format!("need at least 3 nodes, got {n}")));
        };
        let planes = base.planes.min(sats);
        Ok(SynthConfig {
            satellites: sats,
            planes,
            gs_sites: base.gs_sites[..gs_antennas.len()].to_vec(),
            gs_antennas,
            seed,
            ..base
        })
    }
}

fn satellite_position(cfg: &SynthConfig, k: usize, phase: f64, t: f64) -> [f64; 3] {
    let per_plane = cfg.satellites.div_ceil(cfg.planes);
    let plane = k / per_plane;
    let slot = k % per_plane;
    let raan = TAU * plane as f64 / cfg.planes as f64;
    let u = TAU * (slot as f64 / per_plane as f64 + plane as f64 / cfg.satellites as f64)
        + phase
        + TAU * t / cfg.period_seconds;
    let inc = cfg.inclination_deg.to_radians();
    let (x, y) = (u.cos(), u.sin());
    let (yi, zi) = (y * inc.cos(), y * inc.sin());
    let r = cfg.orbit_radius;
    [
        r * (x * raan.cos() - yi * raan.sin()),
        r * (x * raan.sin() + yi * raan.cos()),
        r * zi,
    ]
}

fn station_position(lat_deg: f64, lon_deg: f64, t: f64) -> [f64; 3] {
    let lat = lat_deg.to_radians();
    let lon = lon_deg.to_radians() + TAU * t / EARTH_DAY;
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The segment `a`-`b` stays outside the unit sphere.
fn clears_earth(a: [f64; 3], b: [f64; 3]) -> bool {
    let d = sub(b, a);
    let s = (-dot(a, d) / dot(d, d)).clamp(0.0, 1.0);
    let p = [a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2]];
    dot(p, p) > 1.0
}

fn elevation_deg(site: [f64; 3], sat: [f64; 3]) -> f64 {
    let d = sub(sat, site);
    (dot(d, site) / dot(d, d).sqrt()).asin().to_degrees()
}

/// Node list: satellites `s1..`, then antennas `g<station>a<k>`.
pub fn synth_nodes(cfg: &SynthConfig) -> Vec<Node> {
    let mut nodes: Vec<Node> = (1..=cfg.satellites).map(|k| Node::satellite(format!("s{k}"))).collect();
    for (g, &k) in cfg.gs_antennas.iter().enumerate() {
        for a in 1..=k {
            nodes.push(Node::antenna(format!("g{}a{a}", g + 1), format!("gs{}", g + 1)));
        }
    }
    nodes
}

pub fn synth_visibility(cfg: &SynthConfig, phases: &[f64], state: usize) -> Vec<Vec<u8>> {
    let t = (state as f64 + 0.5) * cfg.state_seconds;
    let sats: Vec<[f64; 3]> = (0..cfg.satellites)
        .map(|k| satellite_position(cfg, k, phases[k], t))
        .collect();
    let mut sites = Vec::new();
    for (g, &k) in cfg.gs_antennas.iter().enumerate() {
        let (lat, lon) = cfg.gs_sites[g];
        for _ in 0..k {
            sites.push(station_position(lat, lon, t));
        }
    }
    let n = cfg.satellites + sites.len();
    let mut vis = vec![vec![0u8; n]; n];
    for i in 0..cfg.satellites {
        for j in i + 1..cfg.satellites {
            let d = sub(sats[i], sats[j]);
            if dot(d, d).sqrt() <= cfg.isl_range && clears_earth(sats[i], sats[j]) {
                vis[i][j] = 1;
                vis[j][i] = 1;
            }
        }
        for (g, &site) in sites.iter().enumerate() {
            if elevation_deg(site, sats[i]) >= cfg.elevation_mask_deg {
                let j = cfg.satellites + g;
                vis[i][j] = 1;
                vis[j][i] = 1;
            }
        }
    }
    vis
}

pub fn synth_scenario_file(cfg: &SynthConfig, params: SystemParams) -> Result<ScenarioFile> {
    if cfg.satellites == 0 || cfg.planes == 0 || cfg.gs_sites.len() < cfg.gs_antennas.len() {
        return Err(Error::invalid("synthetic config needs satellites, planes and a site per station"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phases: Vec<f64> = (0..cfg.satellites).map(|_| rng.gen_range(-0.05..0.05)).collect();
    let nodes = synth_nodes(cfg);
    let service_nodes = nodes[..cfg.satellites]
        .iter()
        .filter(|_| rng.gen_bool(cfg.service_fraction))
        .map(|n| n.name.clone())
        .collect();
    let states = (0..cfg.states)
        .map(|s| StateSpec {
            index: s + 1,
            slots: cfg.slots,
            visibility: synth_visibility(cfg, &phases, s),
        })
        .collect();
    Ok(ScenarioFile {
        name: format!("synthetic-{}n-{}s-seed{}", nodes.len(), cfg.states, cfg.seed),
        description: Some("synthetic constellation".into()),
        nodes,
        traffic: TrafficSpec {
            f_td: 6,
            f_sm: 4,
            service_nodes,
        },
        params: SystemParams {
            gs_antennas: cfg.gs_antennas.clone(),
            ..params
        },
        states,
    })
}

pub fn synth_scenario(cfg: &SynthConfig, params: SystemParams) -> Result<Scenario> {
    Scenario::from_file(synth_scenario_file(cfg, params)?)
}

