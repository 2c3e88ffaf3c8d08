//! Comma-separated label files.
//!
//! Header: `study_id,section,atelectasis,...,widened_mediastinal_silhouette`.
//! Binary cells are `0`/`1`; four-status cells are `pos`, `neg`, `unc`, `nm`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::corpus::SectionChoice;
use crate::taxonomy::{
    from_chexpert, Category, ExtendedStatus, LabelVector, Labels, PresenceLabel, Scheme, TaxonomyError,
    NUM_CATEGORIES,
};

#[derive(Debug, Error)]
pub enum LabelFileError {
    #[error("bad header: expected `{expected}`")]
    BadHeader { expected: String },
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("row {row}: file mixes binary and four-status rows")]
    MixedScheme { row: usize },
    #[error("duplicate (study_id, section) `{0}`")]
    Duplicate(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn header() -> Vec<&'static str> {
    let mut h = vec!["study_id", "section"];
    h.extend(Category::ALL.iter().map(|c| c.key()));
    h
}

pub fn write_labels(vectors: &[LabelVector], w: impl Write) -> Result<(), LabelFileError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(header())?;
    for v in vectors {
        let mut row: Vec<&str> = vec![v.study_id.as_str(), v.section.as_str()];
        match &v.labels {
            Labels::Binary(l) => row.extend(l.iter().map(|p| if p.is_positive() { "1" } else { "0" })),
            Labels::FourStatus(l) => row.extend(l.iter().map(|s| s.code())),
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn labels_to_string(vectors: &[LabelVector]) -> String {
    let mut buf = Vec::new();
    write_labels(vectors, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

enum Cell {
    Bin(PresenceLabel),
    Status(ExtendedStatus),
}

fn parse_cell(s: &str) -> Option<Cell> {
    match s.trim() {
        "1" => Some(Cell::Bin(PresenceLabel::Positive)),
        "0" => Some(Cell::Bin(PresenceLabel::NotPositive)),
        other => ExtendedStatus::from_code(other).ok().map(Cell::Status),
    }
}

/// Read a label file. Every row must use the same scheme; an empty file is
/// read as zero rows.
pub fn read_labels(r: impl Read) -> Result<Vec<LabelVector>, LabelFileError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let expected = header();
    let got: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if got.is_empty() || (got.len() == 1 && got[0].is_empty()) {
        return Ok(Vec::new());
    }
    if got != expected {
        return Err(LabelFileError::BadHeader { expected: expected.join(",") });
    }
    let mut scheme: Option<Scheme> = None;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let study_id = rec[0].trim().to_string();
        if study_id.is_empty() {
            return Err(LabelFileError::BadRow { row, message: "empty study_id".into() });
        }
        let section: SectionChoice =
            rec[1].parse().map_err(|message| LabelFileError::BadRow { row, message })?;
        let mut bin = [PresenceLabel::NotPositive; NUM_CATEGORIES];
        let mut st = [ExtendedStatus::NotMentioned; NUM_CATEGORIES];
        let mut row_scheme = None;
        for (k, cell) in rec.iter().skip(2).enumerate() {
            let parsed = parse_cell(cell)
                .ok_or_else(|| LabelFileError::BadRow { row, message: format!("bad cell `{cell}`") })?;
            let s = match parsed {
                Cell::Bin(p) => {
                    bin[k] = p;
                    Scheme::Binary
                }
                Cell::Status(x) => {
                    st[k] = x;
                    Scheme::FourStatus
                }
            };
            if row_scheme.is_some_and(|r| r != s) {
                return Err(LabelFileError::MixedScheme { row });
            }
            row_scheme = Some(s);
        }
        let row_scheme = row_scheme.unwrap_or(Scheme::Binary);
        if scheme.is_some_and(|s| s != row_scheme) {
            return Err(LabelFileError::MixedScheme { row });
        }
        scheme = Some(row_scheme);
        if !seen.insert((study_id.clone(), section)) {
            return Err(LabelFileError::Duplicate(format!("{study_id}/{section}")));
        }
        out.push(match row_scheme {
            Scheme::Binary => LabelVector::binary(study_id, section, bin),
            Scheme::FourStatus => LabelVector::four_status(study_id, section, st),
        });
    }
    Ok(out)
}

pub fn read_labels_path(path: &std::path::Path) -> Result<Vec<LabelVector>, LabelFileError> {
    read_labels(std::fs::File::open(path)?)
}

fn chexpert_status(cell: &str) -> Option<ExtendedStatus> {
    match cell.trim() {
        "" => Some(ExtendedStatus::NotMentioned),
        "1" | "1.0" => Some(ExtendedStatus::Positive),
        "0" | "0.0" => Some(ExtendedStatus::Negative),
        "-1" | "-1.0" => Some(ExtendedStatus::Uncertain),
        _ => None,
    }
}

/// Read a CheXpert/CheXbert-style prediction file (`1`, `0`, `-1`, blank)
/// and fold it onto our categories as four-status vectors.
///
/// The id column is `study_id` (or `Reports`); an optional `section` column
/// overrides `default_section`.
pub fn read_chexpert(r: impl Read, default_section: SectionChoice) -> Result<Vec<LabelVector>, LabelFileError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let id_col = headers
        .iter()
        .position(|h| h == "study_id" || h == "Reports")
        .ok_or_else(|| LabelFileError::BadHeader { expected: "study_id column".into() })?;
    let section_col = headers.iter().position(|h| h == "section");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let section = match section_col {
            Some(c) => rec[c].parse().map_err(|message| LabelFileError::BadRow { row, message })?,
            None => default_section,
        };
        let mut obs: BTreeMap<&str, ExtendedStatus> = BTreeMap::new();
        for (c, h) in headers.iter().enumerate() {
            if c == id_col || Some(c) == section_col {
                continue;
            }
            let status = chexpert_status(&rec[c])
                .ok_or_else(|| LabelFileError::BadRow { row, message: format!("bad cell `{}`", &rec[c]) })?;
            obs.insert(h.as_str(), status);
        }
        out.push(from_chexpert(rec[id_col].trim(), section, obs));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_canonical() {
        assert_eq!(
            header().join(","),
            "study_id,section,atelectasis,consolidation,effusion,fracture,hyperinflation,lung_opacity,nodule,pleural_lesion,pneumothorax,pulmonary_edema,subcutaneous_emphysema,subdiaphragmatic_gas,widened_mediastinal_silhouette"
        );
    }

    #[test]
    fn binary_round_trip() {
        let v = vec![
            LabelVector::from_positive_set("a", SectionChoice::Findings, [Category::Nodule, Category::Effusion]),
            LabelVector::empty_binary("b", SectionChoice::Impression),
        ];
        let text = labels_to_string(&v);
        assert!(text.contains("a,findings,0,0,1,0,0,0,1,0,0,0,0,0,0\n"));
        assert_eq!(read_labels(text.as_bytes()).unwrap(), v);
    }

    #[test]
    fn four_status_round_trip() {
        let mut s = [ExtendedStatus::NotMentioned; NUM_CATEGORIES];
        s[3] = ExtendedStatus::Uncertain;
        s[4] = ExtendedStatus::Negative;
        s[5] = ExtendedStatus::Positive;
        let v = vec![LabelVector::four_status("x", SectionChoice::Findings, s)];
        let text = labels_to_string(&v);
        assert!(text.contains("x,findings,nm,nm,nm,unc,neg,pos,"));
        assert_eq!(read_labels(text.as_bytes()).unwrap(), v);
    }

    #[test]
    fn mixed_scheme_rejected() {
        let mut text = labels_to_string(&[LabelVector::empty_binary("a", SectionChoice::Findings)]);
        text.push_str("b,findings,nm,nm,nm,nm,nm,nm,nm,nm,nm,nm,nm,nm,nm\n");
        assert!(matches!(read_labels(text.as_bytes()), Err(LabelFileError::MixedScheme { row: 3 })));
    }

    #[test]
    fn bad_header_and_cells() {
        assert!(matches!(read_labels("id,section\n".as_bytes()), Err(LabelFileError::BadHeader { .. })));
        let mut text = header().join(",");
        text.push_str("\na,findings,2,0,0,0,0,0,0,0,0,0,0,0,0\n");
        assert!(matches!(read_labels(text.as_bytes()), Err(LabelFileError::BadRow { row: 2, .. })));
        assert!(read_labels("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn chexpert_ingestion() {
        let text = "Reports,Enlarged Cardiomediastinum,Cardiomegaly,Pleural Effusion,Pneumonia,Pleural Other,Lung Lesion\n\
                    s1,,1,-1,1,,0\n";
        let v = read_chexpert(text.as_bytes(), SectionChoice::Impression).unwrap();
        let s = v[0].status_labels().unwrap();
        assert_eq!(s[Category::WidenedMediastinalSilhouette.index()], ExtendedStatus::Positive);
        assert_eq!(s[Category::Effusion.index()], ExtendedStatus::Uncertain);
        assert_eq!(s[Category::Nodule.index()], ExtendedStatus::Negative);
        assert_eq!(s[Category::PleuralLesion.index()], ExtendedStatus::NotMentioned);
        assert_eq!(s[Category::Consolidation.index()], ExtendedStatus::NotMentioned);
        assert_eq!(v[0].section, SectionChoice::Impression);
    }
}
