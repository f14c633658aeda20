use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::matpower;
use crate::error::{PsseError, Result};

/// A bus after renumbering; `id` is the contiguous 1-based position.
#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub external_id: i64,
    pub shunt_conductance: f64,
    pub shunt_susceptance: f64,
    pub is_reference: bool,
    /// Voltage magnitude stored in the case file (1.0 when absent).
    pub voltage_magnitude: f64,
    /// Voltage angle in radians stored in the case file (0.0 when absent).
    pub voltage_angle: f64,
}

/// A branch between two renumbered buses (1-based ids).
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub series_resistance: f64,
    pub series_reactance: f64,
    pub total_charging_susceptance: f64,
    pub tap_ratio: f64,
    pub phase_shift: f64,
    pub in_service: bool,
}

#[derive(Clone, Debug)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    reference: usize,
    external_index: HashMap<i64, usize>,
}

impl NetworkCase {
    /// Number of buses `N`.
    pub fn n(&self) -> usize {
        self.buses.len()
    }

    /// Number of in-service branches `L`.
    pub fn l(&self) -> usize {
        self.branches.iter().filter(|b| b.in_service).count()
    }

    /// Zero-based position of the reference bus.
    pub fn reference_index(&self) -> usize {
        self.reference
    }

    /// Zero-based position of the bus with the given file id.
    pub fn index_of_external(&self, external_id: i64) -> Option<usize> {
        self.external_index.get(&external_id).copied()
    }

    pub fn in_service_branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.in_service)
    }

    /// Degree of every bus over in-service branches (parallel lines counted once).
    pub fn degrees(&self) -> Vec<usize> {
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); self.n()];
        for br in self.in_service_branches() {
            neighbors[br.from_bus - 1].push(br.to_bus - 1);
            neighbors[br.to_bus - 1].push(br.from_bus - 1);
        }
        neighbors
            .into_iter()
            .map(|mut nb| {
                nb.sort_unstable();
                nb.dedup();
                nb.len()
            })
            .collect()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PsseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_case(&text)
    }
}

/// Parses a MATPOWER `.m` case or the JSON case format, detected by the first
/// non-blank character.
pub fn parse_case(text: &str) -> Result<NetworkCase> {
    let raw = if text.trim_start().starts_with('{') {
        parse_json(text)?
    } else {
        matpower::parse(text)?
    };
    raw.validate()
}

/// Case tables as read from a file, before renumbering and validation.
#[derive(Debug, Default)]
pub(crate) struct RawCase {
    pub base_mva: f64,
    pub buses: Vec<RawBus>,
    pub branches: Vec<RawBranch>,
}

#[derive(Debug)]
pub(crate) struct RawBus {
    pub id: i64,
    pub gs: f64,
    pub bs: f64,
    pub reference: bool,
    pub vm: f64,
    pub va: f64,
}

#[derive(Debug)]
pub(crate) struct RawBranch {
    pub from: i64,
    pub to: i64,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    pub tap: f64,
    pub shift: f64,
    pub status: bool,
}

impl RawCase {
    fn validate(self) -> Result<NetworkCase> {
        let mut external_index = HashMap::with_capacity(self.buses.len());
        let mut reference: Option<(usize, i64)> = None;
        let mut buses = Vec::with_capacity(self.buses.len());
        for (pos, rb) in self.buses.iter().enumerate() {
            if external_index.insert(rb.id, pos).is_some() {
                return Err(PsseError::DuplicateBus(rb.id));
            }
            if rb.reference {
                if let Some((_, first)) = reference {
                    return Err(PsseError::MultipleReferenceBuses(first, rb.id));
                }
                reference = Some((pos, rb.id));
            }
            buses.push(Bus {
                id: pos + 1,
                external_id: rb.id,
                shunt_conductance: rb.gs,
                shunt_susceptance: rb.bs,
                is_reference: rb.reference,
                voltage_magnitude: rb.vm,
                voltage_angle: rb.va,
            });
        }
        let (reference, _) = reference.ok_or(PsseError::NoReferenceBus)?;

        let mut branches = Vec::with_capacity(self.branches.len());
        for (k, rb) in self.branches.iter().enumerate() {
            let from = *external_index
                .get(&rb.from)
                .ok_or(PsseError::DanglingEndpoint { branch: k, bus: rb.from })?;
            let to = *external_index
                .get(&rb.to)
                .ok_or(PsseError::DanglingEndpoint { branch: k, bus: rb.to })?;
            if from == to {
                return Err(PsseError::SelfLoop { branch: k, bus: rb.from });
            }
            if rb.r == 0.0 && rb.x == 0.0 {
                return Err(PsseError::ZeroImpedance { branch: k });
            }
            branches.push(Branch {
                from_bus: from + 1,
                to_bus: to + 1,
                series_resistance: rb.r,
                series_reactance: rb.x,
                total_charging_susceptance: rb.b,
                tap_ratio: if rb.tap == 0.0 { 1.0 } else { rb.tap },
                phase_shift: rb.shift,
                in_service: rb.status,
            });
        }

        Ok(NetworkCase {
            base_mva: self.base_mva,
            buses,
            branches,
            reference,
            external_index,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonCase {
    base_mva: f64,
    buses: Vec<JsonBus>,
    branches: Vec<JsonBranch>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonBus {
    id: i64,
    #[serde(default)]
    gs: f64,
    #[serde(default)]
    bs: f64,
    #[serde(default)]
    reference: bool,
    #[serde(default = "one")]
    vm: f64,
    #[serde(default)]
    va: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonBranch {
    from: i64,
    to: i64,
    r: f64,
    x: f64,
    #[serde(default)]
    b: f64,
    #[serde(default = "one")]
    tap: f64,
    #[serde(default)]
    shift: f64,
    #[serde(default = "yes")]
    status: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn parse_json(text: &str) -> Result<RawCase> {
    let case: JsonCase = serde_json::from_str(text).map_err(|e| PsseError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(RawCase {
        base_mva: case.base_mva,
        buses: case
            .buses
            .into_iter()
            .map(|b| RawBus {
                id: b.id,
                gs: b.gs,
                bs: b.bs,
                reference: b.reference,
                vm: b.vm,
                va: b.va,
            })
            .collect(),
        branches: case
            .branches
            .into_iter()
            .map(|b| RawBranch {
                from: b.from,
                to: b.to,
                r: b.r,
                x: b.x,
                b: b.b,
                tap: b.tap,
                shift: b.shift,
                status: b.status,
            })
            .collect(),
    })
}
