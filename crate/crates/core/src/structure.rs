//! In-memory protein structure model and PDB/FASTA parsing.
//!
//! Only fixed-column `ATOM` records are consumed. Residues are grouped by
//! `(chainID, resSeq, iCode)` in file order. Each residue gets an anchor
//! coordinate: the CA atom position, falling back to the N atom when CA is
//! absent. Residues lacking both are dropped and counted.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub name: String,
    pub position: Vec3,
    pub element: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    /// 0-based ordinal in file order within the chain.
    pub index: usize,
    /// Three-letter residue name, e.g. "ALA". Non-canonical names are kept as-is.
    pub name: String,
    pub atoms: Vec<Atom>,
    /// CA position, or the N position when CA is missing.
    pub anchor: Vec3,
}

impl Residue {
    pub fn atom(&self, name: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProteinStructure {
    pub id: String,
    pub chains: Vec<(String, Vec<Residue>)>,
}

impl ProteinStructure {
    /// Total residue count across all chains.
    pub fn residue_count(&self) -> usize {
        self.chains.iter().map(|(_, r)| r.len()).sum()
    }

    /// Residues in chain order across all chains.
    pub fn residues(&self) -> impl Iterator<Item = &Residue> {
        self.chains.iter().flat_map(|(_, r)| r.iter())
    }

    /// Keep only the listed chains, in the listed order.
    pub fn select_chains(&self, chain_ids: &[String]) -> ProteinStructure {
        let chains = chain_ids
            .iter()
            .filter_map(|id| self.chains.iter().find(|(c, _)| c == id).cloned())
            .collect();
        ProteinStructure { id: self.id.clone(), chains }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PdbError {
    /// No `ATOM` record found in the input.
    NoAtoms,
    /// An unparseable coordinate field, with the 1-based line number.
    MalformedRecord { line: usize },
}

impl core::fmt::Display for PdbError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PdbError::NoAtoms => write!(f, "no ATOM records in input"),
            PdbError::MalformedRecord { line } => {
                write!(f, "malformed ATOM record at line {line}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FastaError {
    /// A `>` header with no sequence lines, carrying the record id.
    EmptyRecord { id: String },
    /// Input with no `>` header at all.
    NoRecords,
}

impl core::fmt::Display for FastaError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FastaError::EmptyRecord { id } => write!(f, "FASTA record '{id}' has no sequence"),
            FastaError::NoRecords => write!(f, "FASTA input has no '>' header"),
        }
    }
}

/// Result of [`parse_pdb`]: the structure plus the count of residues dropped
/// for lacking both CA and N atoms.
#[derive(Debug, Clone)]
pub struct ParsedPdb {
    pub structure: ProteinStructure,
    pub dropped_residues: usize,
}

struct RawResidue {
    chain: String,
    res_key: (i32, char),
    name: String,
    atoms: Vec<Atom>,
}

/// Parse fixed-column PDB text. Only `ATOM` records are consumed; `HETATM`,
/// waters and everything else are ignored. Altloc other than blank or 'A'
/// is skipped.
pub fn parse_pdb(text: &str, id: &str) -> Result<ParsedPdb, PdbError> {
    let mut raw: Vec<RawResidue> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if !line.starts_with("ATOM") {
            continue;
        }
        // 1-based columns: name 13-16, altLoc 17, resName 18-20, chainID 22,
        // resSeq 23-26, iCode 27, x 31-38, y 39-46, z 47-54, element 77-78.
        if line.len() < 54 {
            return Err(PdbError::MalformedRecord { line: lineno });
        }
        let col = |a: usize, b: usize| line.get(a - 1..b).unwrap_or("");
        let altloc = col(17, 17).chars().next().unwrap_or(' ');
        if altloc != ' ' && altloc != 'A' {
            continue;
        }
        let atom_name = col(13, 16).trim().to_string();
        let res_name = col(18, 20).trim().to_string();
        if res_name == "HOH" || res_name == "WAT" {
            continue;
        }
        let chain = col(22, 22).trim().to_string();
        let res_seq: i32 = col(23, 26)
            .trim()
            .parse()
            .map_err(|_| PdbError::MalformedRecord { line: lineno })?;
        let icode = col(27, 27).chars().next().unwrap_or(' ');
        let parse_f = |a: usize, b: usize| -> Result<f64, PdbError> {
            col(a, b)
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or(PdbError::MalformedRecord { line: lineno })
        };
        let position = Vec3::new(parse_f(31, 38)?, parse_f(39, 46)?, parse_f(47, 54)?);
        let element = if line.len() >= 78 { col(77, 78).trim().to_string() } else { String::new() };
        if atom_name.is_empty() {
            return Err(PdbError::MalformedRecord { line: lineno });
        }

        let atom = Atom { name: atom_name, position, element };
        let key = (res_seq, icode);
        match raw.last_mut() {
            Some(r) if r.chain == chain && r.res_key == key => r.atoms.push(atom),
            _ => raw.push(RawResidue {
                chain,
                res_key: key,
                name: res_name,
                atoms: alloc::vec![atom],
            }),
        }
    }

    if raw.is_empty() {
        return Err(PdbError::NoAtoms);
    }

    let mut chains: Vec<(String, Vec<Residue>)> = Vec::new();
    let mut dropped = 0usize;
    for r in raw {
        let anchor = r
            .atoms
            .iter()
            .find(|a| a.name == "CA")
            .or_else(|| r.atoms.iter().find(|a| a.name == "N"))
            .map(|a| a.position);
        let Some(anchor) = anchor else {
            dropped += 1;
            continue;
        };
        let chain_entry = match chains.last_mut() {
            Some((c, _)) if *c == r.chain => chains.last_mut().unwrap(),
            _ => {
                chains.push((r.chain.clone(), Vec::new()));
                chains.last_mut().unwrap()
            }
        };
        let index = chain_entry.1.len();
        chain_entry.1.push(Residue { index, name: r.name, atoms: r.atoms, anchor });
    }

    if chains.iter().all(|(_, r)| r.is_empty()) {
        return Err(PdbError::NoAtoms);
    }
    chains.retain(|(_, r)| !r.is_empty());

    Ok(ParsedPdb {
        structure: ProteinStructure { id: id.to_string(), chains },
        dropped_residues: dropped,
    })
}

/// Parse FASTA text into `(id, sequence)` pairs. Sequences are uppercased
/// with all whitespace stripped; record order is preserved.
pub fn parse_fasta(text: &str) -> Result<Vec<(String, String)>, FastaError> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, String)> = None;

    let flush = |current: &mut Option<(String, String)>,
                 out: &mut Vec<(String, String)>|
     -> Result<(), FastaError> {
        if let Some((id, seq)) = current.take() {
            if seq.is_empty() {
                return Err(FastaError::EmptyRecord { id });
            }
            out.push((id, seq));
        }
        Ok(())
    };

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            flush(&mut current, &mut out)?;
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            current = Some((id, String::new()));
        } else if let Some((_, seq)) = current.as_mut() {
            for c in line.chars().filter(|c| !c.is_whitespace()) {
                seq.push(c.to_ascii_uppercase());
            }
        }
    }
    flush(&mut current, &mut out)?;

    if out.is_empty() {
        return Err(FastaError::NoRecords);
    }
    Ok(out)
}

/// Map a 3-letter residue name to an amino-acid class id, 0-19 canonical,
/// 20 for anything unrecognized.
pub fn amino_acid_class(name: &str) -> u8 {
    const NAMES: [&str; 20] = [
        "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS",
        "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
    ];
    NAMES.iter().position(|&n| n == name).map(|i| i as u8).unwrap_or(20)
}

pub const NUM_AMINO_ACID_CLASSES: usize = 21;

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn atom_line(serial: usize, name: &str, res: &str, chain: &str, seq: i32, p: [f64; 3]) -> String {
        format!(
            "ATOM  {serial:>5} {name:<4} {res:<3} {chain}{seq:>4}    {:8.3}{:8.3}{:8.3}  1.00  0.00           {}",
            p[0], p[1], p[2],
            name.chars().next().unwrap()
        )
    }

    fn three_residue_pdb() -> String {
        let mut lines = vec![];
        let mut serial = 1;
        for (i, res) in ["ALA", "GLY", "SER"].iter().enumerate() {
            let o = i as f64 * 4.0;
            lines.push(atom_line(serial, "N", res, "A", i as i32 + 1, [o, 1.0, 0.0]));
            serial += 1;
            lines.push(atom_line(serial, "CA", res, "A", i as i32 + 1, [o, 0.0, 0.0]));
            serial += 1;
            lines.push(atom_line(serial, "C", res, "A", i as i32 + 1, [o + 1.0, 0.0, 0.0]));
            serial += 1;
        }
        lines.join("\n")
    }

    #[test]
    fn parses_three_residues_with_ca_anchors() {
        let parsed = parse_pdb(&three_residue_pdb(), "toy").unwrap();
        let s = &parsed.structure;
        assert_eq!(s.chains.len(), 1);
        assert_eq!(s.residue_count(), 3);
        assert_eq!(parsed.dropped_residues, 0);
        for (i, r) in s.residues().enumerate() {
            assert_eq!(r.index, i);
            assert_eq!(r.anchor, r.atom("CA").unwrap().position);
        }
    }

    #[test]
    fn missing_ca_falls_back_to_n() {
        let text: String = three_residue_pdb()
            .lines()
            .filter(|l| !(l.contains("CA") && l.contains("   2 ")))
            .collect::<Vec<_>>()
            .join("\n");
        let parsed = parse_pdb(&text, "toy").unwrap();
        let r = parsed.structure.residues().nth(1).unwrap();
        assert!(r.atom("CA").is_none());
        assert_eq!(r.anchor, r.atom("N").unwrap().position);
    }

    #[test]
    fn hetatm_water_is_ignored() {
        let base = three_residue_pdb();
        let with_water = format!(
            "{base}\nHETATM  999  O   HOH A 100      10.000  10.000  10.000  1.00  0.00           O"
        );
        let a = parse_pdb(&base, "x").unwrap();
        let b = parse_pdb(&with_water, "x").unwrap();
        assert_eq!(a.structure, b.structure);
    }

    #[test]
    fn residue_missing_both_anchors_is_dropped() {
        let mut text = three_residue_pdb();
        text.push('\n');
        text.push_str(&atom_line(99, "CB", "ALA", "A", 9, [1.0, 2.0, 3.0]));
        let parsed = parse_pdb(&text, "x").unwrap();
        assert_eq!(parsed.structure.residue_count(), 3);
        assert_eq!(parsed.dropped_residues, 1);
    }

    #[test]
    fn malformed_coordinate_reports_line() {
        let text = "ATOM      1  CA  ALA A   1       xx.000   0.000   0.000";
        match parse_pdb(text, "x") {
            Err(PdbError::MalformedRecord { line: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn no_atoms_error() {
        assert_eq!(parse_pdb("REMARK nothing here\n", "x").unwrap_err(), PdbError::NoAtoms);
    }

    #[test]
    fn altloc_b_is_skipped() {
        // Same residue with A and B conformers: only A kept.
        let a = "ATOM      1  CA AALA A   1       1.000   0.000   0.000";
        let b = "ATOM      2  CA BALA A   1       9.000   0.000   0.000";
        let parsed = parse_pdb(&format!("{a}\n{b}"), "x").unwrap();
        let r = parsed.structure.residues().next().unwrap();
        assert_eq!(r.atoms.len(), 1);
        assert_eq!(r.anchor, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn reparse_is_stable() {
        let parsed = parse_pdb(&three_residue_pdb(), "x").unwrap();
        let again = parse_pdb(&three_residue_pdb(), "x").unwrap();
        assert_eq!(parsed.structure, again.structure);
    }

    #[test]
    fn fasta_basic() {
        assert_eq!(
            parse_fasta(">a\nMKV\n>b\nGG").unwrap(),
            vec![("a".into(), "MKV".into()), ("b".into(), "GG".into())]
        );
    }

    #[test]
    fn fasta_normalizes_case_and_whitespace() {
        assert_eq!(parse_fasta(">a\nmk v").unwrap(), vec![("a".into(), "MKV".into())]);
    }

    #[test]
    fn fasta_empty_record_errors() {
        assert_eq!(
            parse_fasta(">a\n>b\nGG").unwrap_err(),
            FastaError::EmptyRecord { id: "a".into() }
        );
    }

    #[test]
    fn amino_acid_classes() {
        assert_eq!(amino_acid_class("ALA"), 0);
        assert_eq!(amino_acid_class("VAL"), 19);
        assert_eq!(amino_acid_class("XYZ"), 20);
    }
}
