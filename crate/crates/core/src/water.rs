//! Jerlov-style water classes and the editable coefficient table.
//!
//! A water type carries one attenuation triple and one backscatter triple,
//! sampled at 650/525/450 nm and mapped to R/G/B. Tables are plain text,
//! one `key = value` record per type separated by blank lines, so the
//! shipped coefficients can be swapped without recompiling. The embedded
//! default is parsed once on first use.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of water classes a valid table must hold.
pub const TABLE_SIZE: usize = 10;

const DEFAULT_TABLE_TEXT: &str = include_str!("../data/water_types.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterType {
    pub name: String,
    /// Direct-signal attenuation (R, G, B), 1/m.
    pub beta_d: [f64; 3],
    /// Backscatter growth rate (R, G, B), 1/m.
    pub beta_b: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterTypeTable {
    types: Vec<WaterType>,
}

impl WaterTypeTable {
    /// The compiled-in coefficient set.
    pub fn default_table() -> &'static WaterTypeTable {
        static TABLE: OnceLock<WaterTypeTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            WaterTypeTable::parse(DEFAULT_TABLE_TEXT)
                .expect("embedded water type table must parse")
        })
    }

    pub fn types(&self) -> &[WaterType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, index: usize) -> &WaterType {
        &self.types[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    /// Parses the blank-line-separated `key = value` record format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut types = Vec::new();
        for block in text.split("\n\n") {
            let lines: Vec<&str> = block
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect();
            if lines.is_empty() {
                continue;
            }
            types.push(parse_record(&lines)?);
        }
        Self::from_types(types)
    }

    pub fn from_types(types: Vec<WaterType>) -> Result<Self> {
        if types.len() != TABLE_SIZE {
            return Err(Error::WaterTable(format!(
                "expected {TABLE_SIZE} water types, found {}",
                types.len()
            )));
        }
        for t in &types {
            if t.name.is_empty() {
                return Err(Error::WaterTable("record with empty name".into()));
            }
            let all = t.beta_d.iter().chain(t.beta_b.iter());
            if all.clone().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::WaterTable(format!(
                    "record {}: coefficients must be finite and strictly positive",
                    t.name
                )));
            }
        }
        for (i, t) in types.iter().enumerate() {
            if types[..i].iter().any(|u| u.name == t.name) {
                return Err(Error::WaterTable(format!("duplicate record name {}", t.name)));
            }
        }
        Ok(Self { types })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Serializes in the same record format `parse` reads. Coefficients are
    /// written with shortest round-trip formatting, so load(save(t)) == t
    /// bit for bit.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.types.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "name = {}", t.name);
            for (key, v) in [
                ("beta_d_650", t.beta_d[0]),
                ("beta_d_525", t.beta_d[1]),
                ("beta_d_450", t.beta_d[2]),
                ("beta_b_650", t.beta_b[0]),
                ("beta_b_525", t.beta_b[1]),
                ("beta_b_450", t.beta_b[2]),
            ] {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Smallest and largest attenuation coefficient anywhere in the table.
    pub fn beta_d_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in &self.types {
            for v in t.beta_d {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

fn parse_record(lines: &[&str]) -> Result<WaterType> {
    let mut name: Option<String> = None;
    let mut fields: [Option<f64>; 6] = [None; 6];
    const KEYS: [&str; 6] = [
        "beta_d_650",
        "beta_d_525",
        "beta_d_450",
        "beta_b_650",
        "beta_b_525",
        "beta_b_450",
    ];
    fn context(name: &Option<String>) -> &str {
        name.as_deref().unwrap_or("<unnamed>")
    }
    for line in lines {
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::WaterTable(format!(
                "record {}: line {line:?} is not key = value",
                context(&name)
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key == "name" {
            name = Some(value.to_string());
            continue;
        }
        let slot = KEYS.iter().position(|k| *k == key).ok_or_else(|| {
            Error::WaterTable(format!("record {}: unknown key {key}", context(&name)))
        })?;
        let parsed: f64 = value.parse().map_err(|_| {
            Error::WaterTable(format!(
                "record {}: {key} value {value:?} is not a number",
                context(&name)
            ))
        })?;
        if fields[slot].replace(parsed).is_some() {
            return Err(Error::WaterTable(format!(
                "record {}: duplicate key {key}",
                context(&name)
            )));
        }
    }
    let name = name.ok_or_else(|| Error::WaterTable("record without a name field".into()))?;
    let mut values = [0.0; 6];
    for (i, f) in fields.iter().enumerate() {
        values[i] = f.ok_or_else(|| {
            Error::WaterTable(format!("record {name}: missing key {}", KEYS[i]))
        })?;
    }
    Ok(WaterType {
        name,
        beta_d: [values[0], values[1], values[2]],
        beta_b: [values[3], values[4], values[5]],
    })
}

/// Draws an ordered (attenuation, backscatter) pair of types, uniformly and
/// independently; the two draws may pick the same record.
pub fn sample_type_pair(table: &WaterTypeTable, seed: u64) -> (&WaterType, &WaterType) {
    let (i, j) = sample_type_pair_indices(table, seed);
    (table.get(i), table.get(j))
}

/// Index form of [`sample_type_pair`]; attenuation index first.
pub fn sample_type_pair_indices(table: &WaterTypeTable, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let i = rng.gen_range(0..table.len());
    let j = rng.gen_range(0..table.len());
    (i, j)
}
