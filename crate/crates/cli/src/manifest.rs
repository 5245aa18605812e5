//! Dataset manifest CSV: one row per antibody-antigen pair.
//!
//! Fixed columns: pair_id, ab_heavy_seq, ab_light_seq, ag_seq,
//! ab_structure_path, ag_structure_path, ab_chains, ag_chains, label,
//! label_kind, temperature_k. Chain lists are semicolon-separated; optional
//! fields may be empty.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    DeltaG,
    DeltaGFromDdg,
    Alphaseq,
    Neutralization,
}

impl LabelKind {
    fn parse(s: &str) -> Result<LabelKind, String> {
        match s {
            "dG" => Ok(LabelKind::DeltaG),
            "dG_from_ddG" => Ok(LabelKind::DeltaGFromDdg),
            "alphaseq" => Ok(LabelKind::Alphaseq),
            "neutralization" => Ok(LabelKind::Neutralization),
            other => Err(format!("unknown label_kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairRecord {
    pub pair_id: String,
    pub ab_heavy_seq: String,
    pub ab_light_seq: String,
    pub ag_seq: String,
    pub ab_structure_path: Option<PathBuf>,
    pub ag_structure_path: Option<PathBuf>,
    pub ab_chains: Vec<String>,
    pub ag_chains: Vec<String>,
    pub label: f64,
    pub label_kind: LabelKind,
    pub temperature_k: f64,
}

const COLUMNS: [&str; 11] = [
    "pair_id",
    "ab_heavy_seq",
    "ab_light_seq",
    "ag_seq",
    "ab_structure_path",
    "ag_structure_path",
    "ab_chains",
    "ag_chains",
    "label",
    "label_kind",
    "temperature_k",
];

fn chains(field: &str) -> Vec<String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<Vec<PairRecord>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| format!("cannot read manifest {}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| format!("manifest header: {e}"))?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != COLUMNS {
        return Err(format!(
            "manifest columns must be exactly {:?}, found {:?}",
            COLUMNS, got
        ));
    }
    let mut out = Vec::new();
    for (li, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| format!("manifest row {}: {e}", li + 2))?;
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let opt_path = |i: usize| {
            let f = field(i);
            if f.is_empty() { None } else { Some(PathBuf::from(f)) }
        };
        let label: f64 = field(8)
            .parse()
            .map_err(|_| format!("manifest row {}: bad label '{}'", li + 2, field(8)))?;
        if !label.is_finite() {
            return Err(format!("manifest row {}: label must be finite", li + 2));
        }
        let label_kind = LabelKind::parse(&field(9)).map_err(|e| format!("manifest row {}: {e}", li + 2))?;
        if label_kind == LabelKind::Neutralization && label != 0.0 && label != 1.0 {
            return Err(format!("manifest row {}: neutralization label must be 0 or 1", li + 2));
        }
        let temp_field = field(10);
        let temperature_k: f64 = if temp_field.is_empty() {
            aaip_core::bench::DEFAULT_TEMPERATURE_K
        } else {
            temp_field
                .parse()
                .map_err(|_| format!("manifest row {}: bad temperature '{temp_field}'", li + 2))?
        };
        out.push(PairRecord {
            pair_id: field(0),
            ab_heavy_seq: field(1).to_uppercase(),
            ab_light_seq: field(2).to_uppercase(),
            ag_seq: field(3).to_uppercase(),
            ab_structure_path: opt_path(4),
            ag_structure_path: opt_path(5),
            ab_chains: chains(&field(6)),
            ag_chains: chains(&field(7)),
            label,
            label_kind,
            temperature_k,
        });
    }
    if out.is_empty() {
        return Err("manifest contains no records".into());
    }
    Ok(out)
}
