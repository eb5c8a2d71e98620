//! Deterministic serialisation of reports, trajectories and run manifests.

use serde::{Deserialize, Serialize};

use crate::criteria::CriterionResult;
use crate::grid::GridSettings;
use crate::trajectory::{PeriodicProfile, Trajectory};
use crate::wazewska::AttractivityReport;

/// Everything needed to re-run a command and get identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    /// The resolved scenario or case configuration.
    pub config: serde_json::Value,
    /// Tolerances, steps and other numeric settings in effect.
    pub settings: serde_json::Value,
    pub grid: GridSettings,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, settings: serde_json::Value, grid: GridSettings) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            settings,
            grid,
            outputs: Vec::new(),
        }
    }
}

/// Pretty JSON with a trailing newline. Map keys come out in declaration or
/// sorted order, so equal values always give equal bytes.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory serialisation cannot fail");
    out.push(b'\n');
    out
}

pub fn report_json(results: &[CriterionResult]) -> Vec<u8> {
    json_bytes(&results)
}

/// `t,value,side` rows.
pub fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let mut out = Vec::new();
    traj.write_csv(&mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn profile_csv(profile: &PeriodicProfile) -> Vec<u8> {
    let mut out = Vec::new();
    profile.write_csv(&mut out).expect("writing to a Vec cannot fail");
    out
}

/// `scale,period,e_m` rows, one per run and period.
pub fn attractivity_csv(report: &AttractivityReport) -> Vec<u8> {
    let mut s = String::from("scale,period,e_m\n");
    for run in &report.runs {
        for (m, e) in run.deviations.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", run.scale, m, e));
        }
    }
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wazewska::{AttractivityRun, Oscillation};

    #[test]
    fn attractivity_rows() {
        let report = AttractivityReport {
            tol: 1e-6,
            horizon_periods: 2,
            runs: vec![AttractivityRun {
                scale: 0.5,
                deviations: vec![0.25, 1e-7],
                first_below: Some(1),
                oscillation: Oscillation::NonOscillatory,
            }],
            attracting: true,
        };
        let text = String::from_utf8(attractivity_csv(&report)).unwrap();
        assert_eq!(text, "scale,period,e_m\n0.5,0,0.25\n0.5,1,0.0000001\n");
    }
}
