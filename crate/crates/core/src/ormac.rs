//! Preamble-grid types for the OR multiple-access channel.
//!
//! A signature frame is `L` consecutive RAOs with `M` preambles each. Rows are
//! RAOs and columns are preambles; both are 0-based in this crate.

use rand::Rng;

use crate::error::{Error, Result};

/// Dimensions of a signature frame: RAOs (rows) by preambles (columns).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameShape {
    pub raos: usize,
    pub preambles: usize,
}

impl FrameShape {
    pub fn new(raos: usize, preambles: usize) -> Result<Self> {
        if raos == 0 || preambles == 0 {
            return Err(Error::invalid(format!(
                "frame shape must be non-empty, got {raos}x{preambles}"
            )));
        }
        if preambles > u16::MAX as usize {
            return Err(Error::invalid(format!("too many preambles: {preambles}")));
        }
        Ok(FrameShape { raos, preambles })
    }

    pub fn cells(&self) -> usize {
        self.raos * self.preambles
    }

    fn check(&self, other: FrameShape) -> Result<()> {
        if *self != other {
            return Err(Error::ShapeMismatch {
                expected_raos: self.raos,
                expected_preambles: self.preambles,
                raos: other.raos,
                preambles: other.preambles,
            });
        }
        Ok(())
    }
}

/// Per-preamble detection behaviour of the base station.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    p_detect: f64,
    p_false_alarm: f64,
}

impl ChannelParams {
    pub const IDEAL: ChannelParams = ChannelParams {
        p_detect: 1.0,
        p_false_alarm: 0.0,
    };

    /// Requires `0 <= p_false_alarm < p_detect <= 1`.
    pub fn new(p_detect: f64, p_false_alarm: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_detect) || !(0.0..=1.0).contains(&p_false_alarm) {
            return Err(Error::invalid(format!(
                "detection probabilities must lie in [0, 1], got p_d={p_detect}, p_f={p_false_alarm}"
            )));
        }
        if p_false_alarm >= p_detect {
            return Err(Error::invalid(format!(
                "need p_f < p_d, got p_d={p_detect}, p_f={p_false_alarm}"
            )));
        }
        Ok(ChannelParams {
            p_detect,
            p_false_alarm,
        })
    }

    pub fn p_detect(&self) -> f64 {
        self.p_detect
    }

    pub fn p_false_alarm(&self) -> f64 {
        self.p_false_alarm
    }

    pub fn is_ideal(&self) -> bool {
        self.p_detect == 1.0 && self.p_false_alarm == 0.0
    }
}

/// Dense row-major bit matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitGrid {
    shape: FrameShape,
    words: Vec<u64>,
}

impl BitGrid {
    pub fn zeros(shape: FrameShape) -> Self {
        BitGrid {
            shape,
            words: vec![0; shape.cells().div_ceil(64)],
        }
    }

    pub fn shape(&self) -> FrameShape {
        self.shape
    }

    #[inline]
    fn bit(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.shape.raos && col < self.shape.preambles);
        row * self.shape.preambles + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        let b = self.bit(row, col);
        self.words[b / 64] >> (b % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let b = self.bit(row, col);
        let mask = 1u64 << (b % 64);
        if value {
            self.words[b / 64] |= mask;
        } else {
            self.words[b / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn row_ones(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.shape.preambles).filter(move |&c| self.get(row, c))
    }

    /// Row-major bitmap, most significant bit of each byte first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.shape.cells().div_ceil(8)];
        for r in 0..self.shape.raos {
            for c in 0..self.shape.preambles {
                if self.get(r, c) {
                    let b = r * self.shape.preambles + c;
                    out[b / 8] |= 0x80 >> (b % 8);
                }
            }
        }
        out
    }

    pub fn from_bytes(shape: FrameShape, bytes: &[u8]) -> Result<Self> {
        let cells = shape.cells();
        if bytes.len() != cells.div_ceil(8) {
            return Err(Error::invalid(format!(
                "bitmap for {}x{} needs {} bytes, got {}",
                shape.raos,
                shape.preambles,
                cells.div_ceil(8),
                bytes.len()
            )));
        }
        let mut grid = BitGrid::zeros(shape);
        for b in 0..bytes.len() * 8 {
            let on = bytes[b / 8] & (0x80 >> (b % 8)) != 0;
            if b >= cells {
                if on {
                    return Err(Error::invalid("padding bits must be zero"));
                }
                continue;
            }
            if on {
                grid.set(b / shape.preambles, b % shape.preambles, true);
            }
        }
        Ok(grid)
    }
}

/// A device signature: at most one active preamble per RAO of the frame.
///
/// Stored as the active preamble (if any) of each RAO, so the one-per-row
/// invariant cannot be violated.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    preambles: usize,
    rows: Vec<Option<u16>>,
}

impl Signature {
    pub fn empty(shape: FrameShape) -> Self {
        Signature {
            preambles: shape.preambles,
            rows: vec![None; shape.raos],
        }
    }

    pub fn from_rows(preambles: usize, rows: &[Option<usize>]) -> Result<Self> {
        let shape = FrameShape::new(rows.len(), preambles)?;
        let mut sig = Signature::empty(shape);
        for (r, col) in rows.iter().enumerate() {
            if let Some(c) = *col {
                sig.activate(r, c)?;
            }
        }
        Ok(sig)
    }

    /// Convenience constructor from `(rao, preamble)` pairs.
    pub fn from_cells(shape: FrameShape, cells: &[(usize, usize)]) -> Result<Self> {
        let mut sig = Signature::empty(shape);
        for &(r, c) in cells {
            if sig.preamble_at(r).is_some() {
                return Err(Error::invalid(format!("RAO {r} already has an active preamble")));
            }
            sig.activate(r, c)?;
        }
        Ok(sig)
    }

    pub(crate) fn activate(&mut self, row: usize, col: usize) -> Result<()> {
        if row >= self.rows.len() || col >= self.preambles {
            return Err(Error::invalid(format!(
                "cell ({row}, {col}) outside {}x{} frame",
                self.rows.len(),
                self.preambles
            )));
        }
        self.rows[row] = Some(col as u16);
        Ok(())
    }

    pub fn shape(&self) -> FrameShape {
        FrameShape {
            raos: self.rows.len(),
            preambles: self.preambles,
        }
    }

    pub fn weight(&self) -> usize {
        self.rows.iter().filter(|r| r.is_some()).count()
    }

    #[inline]
    pub fn preamble_at(&self, row: usize) -> Option<usize> {
        self.rows[row].map(usize::from)
    }

    pub fn is_active(&self, row: usize, col: usize) -> bool {
        self.preamble_at(row) == Some(col)
    }

    /// Active `(rao, preamble)` cells in RAO order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, usize::from(c))))
    }

    pub fn to_grid(&self) -> BitGrid {
        let mut grid = BitGrid::zeros(self.shape());
        for (r, c) in self.cells() {
            grid.set(r, c, true);
        }
        grid
    }

    pub fn from_grid(grid: &BitGrid) -> Result<Self> {
        let shape = grid.shape();
        let mut sig = Signature::empty(shape);
        for r in 0..shape.raos {
            let mut ones = grid.row_ones(r);
            if let Some(c) = ones.next() {
                if ones.next().is_some() {
                    return Err(Error::invalid(format!("RAO {r} has more than one active preamble")));
                }
                sig.activate(r, c)?;
            }
        }
        Ok(sig)
    }
}

/// What the base station has seen of a signature frame so far.
///
/// Rows at or beyond `rao_count` are not yet observed and are kept zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationFrame {
    grid: BitGrid,
    rao_count: usize,
}

impl ObservationFrame {
    pub fn empty(shape: FrameShape) -> Self {
        ObservationFrame {
            grid: BitGrid::zeros(shape),
            rao_count: 0,
        }
    }

    /// A fully observed frame.
    pub fn complete(grid: BitGrid) -> Self {
        let rao_count = grid.shape().raos;
        ObservationFrame { grid, rao_count }
    }

    pub fn shape(&self) -> FrameShape {
        self.grid.shape()
    }

    pub fn rao_count(&self) -> usize {
        self.rao_count
    }

    pub fn is_complete(&self) -> bool {
        self.rao_count == self.grid.shape().raos
    }

    pub fn grid(&self) -> &BitGrid {
        &self.grid
    }

    #[inline]
    pub fn is_active(&self, row: usize, col: usize) -> bool {
        row < self.rao_count && self.grid.get(row, col)
    }

    pub fn active_in_row(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        let observed = row < self.rao_count;
        self.grid.row_ones(row).filter(move |_| observed)
    }

    /// Appends the next RAO. `rao` is 0-based and must equal `rao_count()`.
    pub fn push_rao(&mut self, rao: usize, active: impl IntoIterator<Item = usize>) -> Result<()> {
        if rao != self.rao_count {
            return Err(Error::OutOfOrder {
                expected: self.rao_count + 1,
                got: rao + 1,
            });
        }
        if rao >= self.shape().raos {
            return Err(Error::invalid(format!(
                "frame of {} RAOs is already complete",
                self.shape().raos
            )));
        }
        let preambles = self.shape().preambles;
        for c in active {
            if c >= preambles {
                return Err(Error::invalid(format!("preamble {c} out of range 0..{preambles}")));
            }
            self.grid.set(rao, c, true);
        }
        self.rao_count += 1;
        Ok(())
    }

    /// True iff every active cell of `candidate` in the first `upto` RAOs is
    /// also active here.
    ///
    /// # Panics
    /// If `upto` exceeds the number of observed RAOs or the shapes differ.
    pub fn contains(&self, candidate: &Signature, upto: usize) -> bool {
        assert!(
            upto <= self.rao_count,
            "prefix of {upto} RAOs requested but only {} observed",
            self.rao_count
        );
        assert_eq!(candidate.shape(), self.shape(), "signature/frame shape mismatch");
        (0..upto).all(|r| match candidate.preamble_at(r) {
            Some(c) => self.grid.get(r, c),
            None => true,
        })
    }
}

/// Free-function form of [`ObservationFrame::contains`].
pub fn contains(candidate: &Signature, observation: &ObservationFrame, upto: usize) -> bool {
    observation.contains(candidate, upto)
}

/// Bit-wise OR of the transmitted signatures followed by imperfect detection.
///
/// Detection noise is drawn once per cell of the combined grid: an activated
/// cell survives with probability `p_d`, an idle cell lights up with
/// probability `p_f`. Cells are visited in row-major order.
pub fn superpose<'a, R: Rng + ?Sized>(
    shape: FrameShape,
    signatures: impl IntoIterator<Item = &'a Signature>,
    channel: &ChannelParams,
    rng: &mut R,
) -> Result<ObservationFrame> {
    let mut ored = BitGrid::zeros(shape);
    for sig in signatures {
        shape.check(sig.shape())?;
        for (r, c) in sig.cells() {
            ored.set(r, c, true);
        }
    }
    if channel.is_ideal() {
        return Ok(ObservationFrame::complete(ored));
    }
    let (pd, pf) = (channel.p_detect(), channel.p_false_alarm());
    let mut seen = BitGrid::zeros(shape);
    for r in 0..shape.raos {
        for c in 0..shape.preambles {
            let on = if ored.get(r, c) {
                pd >= 1.0 || rng.random::<f64>() < pd
            } else {
                pf > 0.0 && rng.random::<f64>() < pf
            };
            if on {
                seen.set(r, c, true);
            }
        }
    }
    Ok(ObservationFrame::complete(seen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(l: usize, m: usize) -> FrameShape {
        FrameShape::new(l, m).unwrap()
    }

    /// All signatures with at most one active preamble per RAO.
    fn all_signatures(l: usize, m: usize) -> Vec<Signature> {
        let mut out = Vec::new();
        let total = (m + 1).pow(l as u32);
        for mut code in 0..total {
            let mut rows = Vec::with_capacity(l);
            for _ in 0..l {
                let digit = code % (m + 1);
                code /= m + 1;
                rows.push(if digit == 0 { None } else { Some(digit - 1) });
            }
            out.push(Signature::from_rows(m, &rows).unwrap());
        }
        out
    }

    #[test]
    fn empty_set_gives_zero_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = ChannelParams::new(0.9, 0.0).unwrap();
        let y = superpose(shape(4, 3), [], &ch, &mut rng).unwrap();
        assert_eq!(y.grid().count_ones(), 0);
        assert_eq!(y.rao_count(), 4);
    }

    #[test]
    fn two_overlapping_signatures() {
        let s = shape(3, 1);
        let a = Signature::from_cells(s, &[(0, 0), (1, 0)]).unwrap();
        let b = Signature::from_cells(s, &[(1, 0), (2, 0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = superpose(s, [&a, &b], &ChannelParams::IDEAL, &mut rng).unwrap();
        assert!((0..3).all(|r| y.is_active(r, 0)));
    }

    #[test]
    fn single_signature_through_ideal_channel() {
        let s = shape(5, 4);
        let a = Signature::from_cells(s, &[(0, 3), (2, 1), (4, 0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = superpose(s, [&a], &ChannelParams::IDEAL, &mut rng).unwrap();
        assert_eq!(y.grid(), &a.to_grid());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Signature::empty(shape(3, 2));
        let b = Signature::empty(shape(4, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = superpose(shape(3, 2), [&a, &b], &ChannelParams::IDEAL, &mut rng).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn containment_examples() {
        let s = shape(3, 1);
        let full = ObservationFrame::complete(Signature::from_cells(s, &[(0, 0), (1, 0), (2, 0)]).unwrap().to_grid());
        assert!(full.contains(&Signature::empty(s), 3));
        // the phantom {1,3} is covered by {1,2} | {2,3}
        let phantom = Signature::from_cells(s, &[(0, 0), (2, 0)]).unwrap();
        assert!(full.contains(&phantom, 3));

        let s2 = shape(1, 2);
        let y = ObservationFrame::complete(Signature::from_cells(s2, &[(0, 0)]).unwrap().to_grid());
        let cand = Signature::from_cells(s2, &[(0, 1)]).unwrap();
        assert!(!y.contains(&cand, 1));
    }

    #[test]
    #[should_panic]
    fn containment_beyond_observed_prefix_panics() {
        let s = shape(3, 2);
        let y = ObservationFrame::empty(s);
        y.contains(&Signature::empty(s), 1);
    }

    #[test]
    fn ideal_superpose_is_exact_or_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for l in 1..=3 {
            for m in 1..=3 {
                let s = shape(l, m);
                let sigs = all_signatures(l, m);
                let n = sigs.len();
                for i in 0..n {
                    for j in i..n {
                        for k in j..n {
                            let picked = [&sigs[i], &sigs[j], &sigs[k]];
                            let y = superpose(s, picked, &ChannelParams::IDEAL, &mut rng).unwrap();
                            for r in 0..l {
                                for c in 0..m {
                                    let want = picked.iter().any(|sig| sig.preamble_at(r) == Some(c));
                                    assert_eq!(y.is_active(r, c), want);
                                }
                            }
                            for sig in picked {
                                assert!(y.contains(sig, l));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ideal_superpose_is_exact_or_at_4x4() {
        // sampled subsets at the larger size; the 3x3 case above is exhaustive
        let s = shape(4, 4);
        let sigs = all_signatures(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let picked: Vec<&Signature> = (0..3).map(|_| &sigs[rng.random_range(0..sigs.len())]).collect();
            let y = superpose(s, picked.iter().copied(), &ChannelParams::IDEAL, &mut rng).unwrap();
            for r in 0..4 {
                for c in 0..4 {
                    let want = picked.iter().any(|sig| sig.is_active(r, c));
                    assert_eq!(y.is_active(r, c), want);
                }
            }
        }
    }

    #[test]
    fn detection_noise_rates_converge() {
        // half the cells active; count retained and flipped cells over many frames
        let s = shape(20, 20);
        let cells: Vec<(usize, usize)> = (0..20).map(|r| (r, r)).collect();
        let sig = Signature::from_cells(s, &cells).unwrap();
        let ch = ChannelParams::new(0.9, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (mut kept, mut flipped) = (0usize, 0usize);
        let frames = 2000;
        for _ in 0..frames {
            let y = superpose(s, [&sig], &ch, &mut rng).unwrap();
            for r in 0..20 {
                for c in 0..20 {
                    match (sig.is_active(r, c), y.is_active(r, c)) {
                        (true, true) => kept += 1,
                        (false, true) => flipped += 1,
                        _ => {}
                    }
                }
            }
        }
        let n_active = (20 * frames) as f64;
        let n_idle = (380 * frames) as f64;
        let pd_hat = kept as f64 / n_active;
        let pf_hat = flipped as f64 / n_idle;
        let se_d = (0.9f64 * 0.1 / n_active).sqrt();
        let se_f = (0.05f64 * 0.95 / n_idle).sqrt();
        assert!((pd_hat - 0.9).abs() < 3.0 * se_d, "p_d estimate {pd_hat}");
        assert!((pf_hat - 0.05).abs() < 3.0 * se_f, "p_f estimate {pf_hat}");
    }

    #[test]
    fn bitmap_bytes_round_trip() {
        let s = shape(3, 5);
        let sig = Signature::from_cells(s, &[(0, 4), (2, 0)]).unwrap();
        let bytes = sig.to_grid().to_bytes();
        // bits 4 and 10 of 15, MSB first
        assert_eq!(bytes, vec![0b0000_1000, 0b0010_0000]);
        let back = Signature::from_grid(&BitGrid::from_bytes(s, &bytes).unwrap()).unwrap();
        assert_eq!(back, sig);
        assert!(BitGrid::from_bytes(s, &[0, 1]).is_err());
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelParams::new(0.99, 1e-3).is_ok());
        assert!(ChannelParams::new(0.5, 0.5).is_err());
        assert!(ChannelParams::new(1.1, 0.0).is_err());
        assert!(ChannelParams::new(0.9, -0.1).is_err());
    }

    #[test]
    fn push_rao_rejects_out_of_order() {
        let mut y = ObservationFrame::empty(shape(3, 2));
        y.push_rao(0, [1]).unwrap();
        assert!(matches!(
            y.push_rao(2, []),
            Err(Error::OutOfOrder { expected: 2, got: 3 })
        ));
        y.push_rao(1, []).unwrap();
        assert_eq!(y.rao_count(), 2);
        assert!(y.is_active(0, 1));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_sig(l: usize, m: usize) -> impl Strategy<Value = Signature> {
            proptest::collection::vec(proptest::option::of(0..m), l)
                .prop_map(move |rows| Signature::from_rows(m, &rows).unwrap())
        }

        proptest! {
            #[test]
            fn containment_is_monotone_in_prefix(
                cand in arb_sig(6, 3),
                others in proptest::collection::vec(arb_sig(6, 3), 0..4),
                seed in any::<u64>(),
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let ch = ChannelParams::new(0.8, 0.1).unwrap();
                let y = superpose(shape(6, 3), others.iter(), &ch, &mut rng).unwrap();
                let mut failed = false;
                for i in 0..=6 {
                    let c = y.contains(&cand, i);
                    if failed {
                        prop_assert!(!c);
                    }
                    failed |= !c;
                }
            }

            #[test]
            fn transmitted_always_contained_on_ideal_channel(
                sigs in proptest::collection::vec(arb_sig(5, 4), 1..6),
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let y = superpose(shape(5, 4), sigs.iter(), &ChannelParams::IDEAL, &mut rng).unwrap();
                for s in &sigs {
                    prop_assert!(y.contains(s, 5));
                }
            }
        }
    }
}
