use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::error::{Error, Result};

/// One replication in the results CSV. Absent values are empty fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(with = "scheme_name")]
    pub scheme: Scheme,
    #[serde(rename = "N")]
    pub arrivals_mean: usize,
    #[serde(rename = "T")]
    pub population: usize,
    #[serde(rename = "M")]
    pub preambles: usize,
    #[serde(rename = "K")]
    pub weight: Option<usize>,
    #[serde(rename = "L")]
    pub frame_len: Option<usize>,
    pub seed: u64,
    pub goodput: Option<f64>,
    pub det_prob: Option<f64>,
    pub mean_step1_ms: Option<f64>,
    pub mean_final_ms: Option<f64>,
    pub false_positives: f64,
    pub arrivals: usize,
}

mod scheme_name {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::sim::Scheme;

    pub fn serialize<S: Serializer>(s: &Scheme, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(s.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Scheme, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "scheme",
            "N",
            "T",
            "M",
            "K",
            "L",
            "seed",
            "goodput",
            "det_prob",
            "mean_step1_ms",
            "mean_final_ms",
            "false_positives",
            "arrivals",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a results CSV. Every bad row is collected with its line number
/// before failing.
pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (i, rec) in rdr.deserialize::<ResultRow>().enumerate() {
        match rec {
            Ok(r) => rows.push(r),
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(i + 2);
                bad.push((line, e.to_string()));
            }
        }
    }
    if bad.is_empty() {
        Ok(rows)
    } else {
        Err(Error::Malformed { rows: bad })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            scheme: Scheme::Random,
            arrivals_mean: 300,
            population: 1000,
            preambles: 54,
            weight: Some(63),
            frame_len: Some(63),
            seed: 42,
            goodput: Some(0.25),
            det_prob: None,
            mean_step1_ms: Some(63.0),
            mean_final_ms: Some(71.0),
            false_positives: 3.5e120,
            arrivals: 0,
        }
    }

    #[test]
    fn round_trip_with_absent_fields() {
        let rows = vec![row()];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "scheme,N,T,M,K,L,seed,goodput,det_prob,mean_step1_ms,mean_final_ms,false_positives,arrivals\n"
        ));
        assert!(
            text.contains("random,300,1000,54,63,63,42,0.25,,63.0,71.0,3.5e120,0"),
            "{text}"
        );
        assert_eq!(read_results(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn malformed_rows_listed() {
        let text = "scheme,N,T,M,K,L,seed,goodput,det_prob,mean_step1_ms,mean_final_ms,false_positives,arrivals\n\
                    baseline,100,1000,54,,,1,0.9,1.0,10,20,3,98\n\
                    aloha,100,1000,54,,,1,0.9,1.0,10,20,3,98\n\
                    baseline,x,1000,54,,,1,0.9,1.0,10,20,3,98\n";
        match read_results(text.as_bytes()) {
            Err(Error::Malformed { rows }) => {
                let lines: Vec<usize> = rows.iter().map(|r| r.0).collect();
                assert_eq!(lines, vec![3, 4]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_results_still_have_header() {
        let mut buf = Vec::new();
        write_results(&mut buf, &[]).unwrap();
        assert!(read_results(buf.as_slice()).unwrap().is_empty());
    }
}
