//! JSON study files and plan files.

use std::fs;
use std::path::{Path, PathBuf};

use pvdg_core::{Bus, BusId, BusKind, InsolationProfile, InstallationPlan, Line, LoadProfile, Network, SolarReadyBus, Study};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub base_mva: f64,
    pub base_kv: f64,
    pub buses: Vec<BusEntry>,
    pub lines: Vec<LineEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusEntry {
    pub id: u32,
    pub kind: BusKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_profile: Option<String>,
    pub nominal_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineEntry {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesFile {
    pub profiles: Vec<ProfileEntry>,
    pub insolation: InsolationEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileEntry {
    pub id: String,
    #[serde(default = "default_pf")]
    pub power_factor: f64,
    pub p_kw: Vec<f64>,
}

fn default_pf() -> f64 {
    pvdg_core::network::DEFAULT_POWER_FACTOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsolationEntry {
    pub i_kw_per_m2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolarFile {
    pub candidates: Vec<CandidateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateEntry {
    pub bus: u32,
    pub p_max_kw: f64,
}

/// `{"installations": [{"bus": 7, "kw": 120.0}]}`; unlisted candidates stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub installations: Vec<InstallationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstallationEntry {
    pub bus: u32,
    pub kw: f64,
}

#[derive(Debug, Clone)]
pub struct StudyPaths {
    pub network: PathBuf,
    pub profiles: PathBuf,
    pub solar: PathBuf,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

impl NetworkFile {
    pub fn into_network(self) -> CliResult<Network> {
        let buses = self
            .buses
            .into_iter()
            .map(|b| Bus { id: BusId(b.id), kind: b.kind, load_profile: b.load_profile, nominal_kv: b.nominal_kv })
            .collect();
        let lines = self
            .lines
            .into_iter()
            .map(|l| Line {
                id: l.id,
                from_bus: BusId(l.from),
                to_bus: BusId(l.to),
                resistance_ohm: l.r_ohm,
                reactance_ohm: l.x_ohm,
            })
            .collect();
        Ok(Network::new(buses, lines, self.base_mva, self.base_kv)?)
    }

    pub fn from_network(network: &Network) -> Self {
        NetworkFile {
            base_mva: network.base_mva(),
            base_kv: network.base_kv(),
            buses: network
                .buses()
                .iter()
                .map(|b| BusEntry { id: b.id.0, kind: b.kind, load_profile: b.load_profile.clone(), nominal_kv: b.nominal_kv })
                .collect(),
            lines: network
                .lines()
                .iter()
                .map(|l| LineEntry {
                    id: l.id,
                    from: l.from_bus.0,
                    to: l.to_bus.0,
                    r_ohm: l.resistance_ohm,
                    x_ohm: l.reactance_ohm,
                })
                .collect(),
        }
    }
}

/// Read, cross-reference and validate the three study files.
pub fn load_study(paths: &StudyPaths) -> CliResult<Study> {
    let network = read_json::<NetworkFile>(&paths.network)?.into_network()?;
    let profiles: ProfilesFile = read_json(&paths.profiles)?;
    let solar: SolarFile = read_json(&paths.solar)?;
    let loads = profiles
        .profiles
        .into_iter()
        .map(|p| LoadProfile { id: p.id, p_kw: p.p_kw, power_factor: p.power_factor })
        .collect();
    let candidates = solar
        .candidates
        .into_iter()
        .map(|c| SolarReadyBus { bus: BusId(c.bus), p_max_kw: c.p_max_kw })
        .collect();
    Ok(Study::new(network, loads, InsolationProfile { i_kw_per_m2: profiles.insolation.i_kw_per_m2 }, candidates)?)
}

/// Inverse of [`load_study`].
pub fn write_study(study: &Study, paths: &StudyPaths) -> CliResult<()> {
    write_json(&paths.network, &NetworkFile::from_network(study.network()))?;
    let profiles = ProfilesFile {
        profiles: study
            .profiles()
            .iter()
            .map(|p| ProfileEntry { id: p.id.clone(), power_factor: p.power_factor, p_kw: p.p_kw.clone() })
            .collect(),
        insolation: InsolationEntry { i_kw_per_m2: study.insolation().i_kw_per_m2.clone() },
    };
    write_json(&paths.profiles, &profiles)?;
    let solar = SolarFile {
        candidates: study.candidates().iter().map(|c| CandidateEntry { bus: c.bus.0, p_max_kw: c.p_max_kw }).collect(),
    };
    write_json(&paths.solar, &solar)
}

/// Map a plan file onto the study's candidate list.
pub fn load_plan(path: &Path, study: &Study) -> CliResult<InstallationPlan> {
    let file: PlanFile = read_json(path)?;
    plan_from_file(&file, study)
}

pub fn plan_from_file(file: &PlanFile, study: &Study) -> CliResult<InstallationPlan> {
    let mut caps = vec![0.0; study.candidates().len()];
    let mut seen = vec![false; caps.len()];
    for entry in &file.installations {
        let k = study
            .candidates()
            .iter()
            .position(|c| c.bus.0 == entry.bus)
            .ok_or_else(|| CliError::Usage(format!("plan installs at bus {} which is not solar-ready", entry.bus)))?;
        if std::mem::replace(&mut seen[k], true) {
            return Err(CliError::Usage(format!("plan lists bus {} twice", entry.bus)));
        }
        caps[k] = entry.kw;
    }
    let plan = InstallationPlan::from_capacities(caps);
    plan.validate(study.candidates())?;
    Ok(plan)
}

pub fn plan_to_file(plan: &InstallationPlan, study: &Study) -> PlanFile {
    PlanFile {
        installations: study
            .candidates()
            .iter()
            .zip(&plan.capacities_kw)
            .filter(|(_, &kw)| kw > 0.0)
            .map(|(c, &kw)| InstallationEntry { bus: c.bus.0, kw })
            .collect(),
    }
}
