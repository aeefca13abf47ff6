//! Signature decoding at the base station.
//!
//! [`decode_full`] waits for the whole frame and reports every candidate
//! contained in it. [`IterativeDecoder`] consumes the frame one RAO at a time:
//! after each RAO it prunes candidates that contradict the observation so far,
//! then reports every remaining candidate that is the only viable cover of
//! some active cell already observed. Whatever is still viable after the last
//! RAO is reported at the end of the frame.
//!
//! A reported candidate is never withdrawn and never re-tested. Under a noisy
//! channel a later RAO can contradict an early report (a missed detection in
//! one of its later cells); [`DecodeOutcome::final_set`] is the set of reports
//! still consistent with the complete frame and always equals
//! [`decode_full`]'s result.
//!
//! Cells that no viable candidate covers (false alarms, or cells of pruned
//! candidates) are ignored by the uniqueness test.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ormac::{FrameShape, ObservationFrame, Signature};

/// A candidate reported as decoded, with the 1-based RAO at which it was.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DecodeReport {
    pub rao: usize,
    pub candidate: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub rao: usize,
    pub viable: usize,
    pub decoded: usize,
}

/// Viable and decoded counts after each RAO.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecodeTrace {
    records: Vec<TraceRecord>,
}

impl DecodeTrace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].viable <= w[0].viable && w[1].decoded >= w[0].decoded)
    }

    /// CSV with header `rao,viable,decoded`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rao", "viable", "decoded"])?;
        for r in &self.records {
            w.write_record([r.rao.to_string(), r.viable.to_string(), r.decoded.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    /// Every report in order of (RAO, candidate index).
    pub reports: Vec<DecodeReport>,
    /// Reported candidates contained in the complete frame, ascending.
    pub final_set: Vec<usize>,
    pub trace: DecodeTrace,
}

impl DecodeOutcome {
    pub fn reported_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.reports.iter().map(|r| r.candidate).collect();
        v.sort_unstable();
        v
    }
}

/// Indices of all candidates contained in a complete observation.
pub fn decode_full(observation: &ObservationFrame, candidates: &[Signature]) -> Result<Vec<usize>> {
    let shape = observation.shape();
    if !observation.is_complete() {
        return Err(Error::IncompleteObservation {
            received: observation.rao_count(),
            frame_len: shape.raos,
        });
    }
    check_shapes(shape, candidates)?;
    Ok(candidates
        .iter()
        .enumerate()
        .filter(|(_, s)| observation.contains(s, shape.raos))
        .map(|(i, _)| i)
        .collect())
}

/// Runs [`IterativeDecoder`] over a complete observation.
pub fn decode_iterative(observation: &ObservationFrame, candidates: &[Signature]) -> Result<DecodeOutcome> {
    let shape = observation.shape();
    if !observation.is_complete() {
        return Err(Error::IncompleteObservation {
            received: observation.rao_count(),
            frame_len: shape.raos,
        });
    }
    let mut dec = IterativeDecoder::new(candidates, shape)?;
    for row in 0..shape.raos {
        dec.push_rao(row, observation.active_in_row(row))?;
    }
    dec.finish()
}

fn check_shapes(shape: FrameShape, candidates: &[Signature]) -> Result<()> {
    match candidates.iter().find(|s| s.shape() != shape) {
        Some(s) => Err(Error::ShapeMismatch {
            expected_raos: shape.raos,
            expected_preambles: shape.preambles,
            raos: s.shape().raos,
            preambles: s.shape().preambles,
        }),
        None => Ok(()),
    }
}

/// Decoder state while a frame is being received.
pub struct IterativeDecoder<'a> {
    candidates: &'a [Signature],
    shape: FrameShape,
    observation: ObservationFrame,
    /// Flattened `(row, col)` cells per candidate, RAO order.
    cells: Vec<(u32, u16)>,
    offsets: Vec<usize>,
    /// Candidates with a cell in each row, with that cell's preamble.
    by_row: Vec<Vec<(u32, u16)>>,
    viable: Vec<bool>,
    consistent: Vec<bool>,
    decoded_at: Vec<Option<usize>>,
    /// Viable candidates covering each cell.
    coverage: Vec<u32>,
    /// Viable and not yet reported.
    pending: Vec<usize>,
    viable_count: usize,
    reports: Vec<DecodeReport>,
    trace: DecodeTrace,
}

impl<'a> IterativeDecoder<'a> {
    pub fn new(candidates: &'a [Signature], shape: FrameShape) -> Result<Self> {
        check_shapes(shape, candidates)?;
        let mut cells = Vec::new();
        let mut offsets = Vec::with_capacity(candidates.len() + 1);
        let mut by_row = vec![Vec::new(); shape.raos];
        let mut coverage = vec![0u32; shape.cells()];
        offsets.push(0);
        for (i, sig) in candidates.iter().enumerate() {
            for (r, c) in sig.cells() {
                cells.push((r as u32, c as u16));
                by_row[r].push((i as u32, c as u16));
                coverage[r * shape.preambles + c] += 1;
            }
            offsets.push(cells.len());
        }
        Ok(IterativeDecoder {
            candidates,
            shape,
            observation: ObservationFrame::empty(shape),
            cells,
            offsets,
            by_row,
            viable: vec![true; candidates.len()],
            consistent: vec![true; candidates.len()],
            decoded_at: vec![None; candidates.len()],
            coverage,
            pending: (0..candidates.len()).collect(),
            viable_count: candidates.len(),
            reports: Vec::new(),
            trace: DecodeTrace::default(),
        })
    }

    pub fn candidates(&self) -> &'a [Signature] {
        self.candidates
    }

    /// Number of RAOs received so far.
    pub fn rao_count(&self) -> usize {
        self.observation.rao_count()
    }

    pub fn viable_count(&self) -> usize {
        self.viable_count
    }

    pub fn decoded_count(&self) -> usize {
        self.reports.len()
    }

    pub fn observation(&self) -> &ObservationFrame {
        &self.observation
    }

    fn cells_of(&self, i: usize) -> &[(u32, u16)] {
        &self.cells[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Feeds the observation of RAO `row` (0-based) and returns the candidates
    /// reported at this RAO.
    pub fn push_rao(&mut self, row: usize, active: impl IntoIterator<Item = usize>) -> Result<&[DecodeReport]> {
        self.observation.push_rao(row, active)?;
        let m = self.shape.preambles;

        for k in 0..self.by_row[row].len() {
            let (i, c) = self.by_row[row][k];
            let i = i as usize;
            if self.observation.is_active(row, c as usize) {
                continue;
            }
            self.consistent[i] = false;
            if self.viable[i] && self.decoded_at[i].is_none() {
                self.viable[i] = false;
                self.viable_count -= 1;
                for &(r, c) in &self.cells[self.offsets[i]..self.offsets[i + 1]] {
                    self.coverage[r as usize * m + c as usize] -= 1;
                }
            }
        }
        self.pending.retain(|&i| self.viable[i]);

        let first_new = self.reports.len();
        let rao = row + 1;
        let mut still_pending = Vec::with_capacity(self.pending.len());
        for &i in &self.pending {
            let unique = self
                .cells_of(i)
                .iter()
                .take_while(|&&(r, _)| (r as usize) <= row)
                .any(|&(r, c)| self.coverage[r as usize * m + c as usize] == 1);
            if unique {
                self.decoded_at[i] = Some(rao);
                self.reports.push(DecodeReport { rao, candidate: i });
            } else {
                still_pending.push(i);
            }
        }
        self.pending = still_pending;

        self.trace.records.push(TraceRecord {
            rao,
            viable: self.viable_count,
            decoded: self.reports.len(),
        });
        Ok(&self.reports[first_new..])
    }

    /// Reports every still-viable candidate at the last RAO and closes the
    /// frame.
    pub fn finish(mut self) -> Result<DecodeOutcome> {
        if !self.observation.is_complete() {
            return Err(Error::IncompleteObservation {
                received: self.observation.rao_count(),
                frame_len: self.shape.raos,
            });
        }
        let last = self.shape.raos;
        for &i in &self.pending {
            self.decoded_at[i] = Some(last);
            self.reports.push(DecodeReport {
                rao: last,
                candidate: i,
            });
        }
        if let Some(rec) = self.trace.records.last_mut() {
            rec.decoded = self.reports.len();
        }
        let final_set = (0..self.candidates.len())
            .filter(|&i| self.decoded_at[i].is_some() && self.consistent[i])
            .collect();
        let mut reports = self.reports;
        reports.sort_unstable();
        Ok(DecodeOutcome {
            reports,
            final_set,
            trace: self.trace,
        })
    }
}
