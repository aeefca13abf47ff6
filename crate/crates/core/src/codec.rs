//! Identity-driven signature construction and codebooks.
//!
//! Signatures are built the way a Bloom filter inserts a key: the device
//! identity picks `K` distinct RAOs out of `L` and, for each, one preamble out
//! of `M`. Picked RAOs and picked preambles are removed from their candidate
//! lists, so a signature always has exactly `K` active RAOs with pairwise
//! distinct preambles.
//!
//! Codebook compatibility depends on two details:
//!
//! * List positions are 0-based: at iteration `j` (1-based), the RAO is the
//!   element at position `u mod (L+1-j)` of the remaining ordered RAO list and
//!   the preamble is the element at position `u mod (M+1-j)` of the remaining
//!   ordered preamble list.
//! * `u` is either the raw identity ([`MixerMode::Canonical`]) or the identity
//!   passed through the SplitMix64 finaliser ([`MixerMode::SplitMix64`]).
//!   Raw modulus hashing over sequential identities yields strongly correlated
//!   signatures; the mixed mode is the default for simulation.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ormac::{BitGrid, FrameShape, Signature};

/// Identity pre-hash applied before signature construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MixerMode {
    /// Raw modulus of the identity, exactly as in the reference construction.
    Canonical,
    /// SplitMix64 output function applied to the identity first.
    #[default]
    SplitMix64,
}

impl MixerMode {
    pub fn apply(self, u: u64) -> u64 {
        match self {
            MixerMode::Canonical => u,
            MixerMode::SplitMix64 => splitmix64(u),
        }
    }
}

impl fmt::Display for MixerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixerMode::Canonical => "canonical",
            MixerMode::SplitMix64 => "splitmix64",
        })
    }
}

impl FromStr for MixerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(MixerMode::Canonical),
            "splitmix64" => Ok(MixerMode::SplitMix64),
            other => Err(Error::invalid(format!("unknown mixer mode `{other}`"))),
        }
    }
}

/// SplitMix64 (Steele, Lea, Flood 2014) applied to a single state value.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A device's identification: IMSI and establishment cause packed into one
/// integer, plus a free-form label for display.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeviceIdentity {
    pub id: u64,
    pub label: String,
}

impl DeviceIdentity {
    pub fn new(id: u64) -> Self {
        DeviceIdentity {
            id,
            label: id.to_string(),
        }
    }

    pub fn with_label(id: u64, label: impl Into<String>) -> Self {
        DeviceIdentity {
            id,
            label: label.into(),
        }
    }
}

/// Signature construction parameters `(L, M, K)` and the identity mixer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignatureParams {
    shape: FrameShape,
    weight: usize,
    mixer: MixerMode,
}

impl SignatureParams {
    /// Requires `1 <= weight <= min(preambles, raos)`.
    pub fn new(raos: usize, preambles: usize, weight: usize, mixer: MixerMode) -> Result<Self> {
        let shape = FrameShape::new(raos, preambles)?;
        if weight == 0 || weight > raos.min(preambles) {
            return Err(Error::invalid(format!(
                "signature weight must satisfy 1 <= K <= min(M, L) = {}, got K={weight}",
                raos.min(preambles)
            )));
        }
        Ok(SignatureParams { shape, weight, mixer })
    }

    pub fn shape(&self) -> FrameShape {
        self.shape
    }

    pub fn raos(&self) -> usize {
        self.shape.raos
    }

    pub fn preambles(&self) -> usize {
        self.shape.preambles
    }

    pub fn weight(&self) -> usize {
        self.weight
    }

    pub fn mixer(&self) -> MixerMode {
        self.mixer
    }

    pub fn generate(&self, id: u64) -> Signature {
        generate_signature(id, self)
    }
}

/// Deterministic signature for identity `id`.
pub fn generate_signature(id: u64, params: &SignatureParams) -> Signature {
    let u = params.mixer.apply(id);
    let (l, m) = (params.raos(), params.preambles());
    let mut raos: Vec<usize> = (0..l).collect();
    let mut preambles: Vec<usize> = (0..m).collect();
    let mut sig = Signature::empty(params.shape);
    for j in 1..=params.weight {
        let rao = raos.remove((u % (l + 1 - j) as u64) as usize);
        let preamble = preambles.remove((u % (m + 1 - j) as u64) as usize);
        sig.activate(rao, preamble)
            .expect("removal lists only hold in-range indices");
    }
    sig
}

/// Signature of the random construction: every RAO carries one uniformly
/// chosen preamble, independent of identity.
pub fn random_signature<R: Rng + ?Sized>(shape: FrameShape, rng: &mut R) -> Signature {
    let mut sig = Signature::empty(shape);
    for r in 0..shape.raos {
        sig.activate(r, rng.random_range(0..shape.preambles))
            .expect("preamble drawn in range");
    }
    sig
}

/// Signatures for a whole device population, known to devices and BS alike.
#[derive(Clone, Debug)]
pub struct Codebook {
    params: SignatureParams,
    identities: Vec<DeviceIdentity>,
    signatures: Vec<Signature>,
    by_id: HashMap<u64, usize>,
}

impl Codebook {
    pub fn build(identities: Vec<DeviceIdentity>, params: SignatureParams) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(identities.len());
        for (i, dev) in identities.iter().enumerate() {
            if by_id.insert(dev.id, i).is_some() {
                return Err(Error::DuplicateIdentity(dev.id));
            }
        }
        let signatures = identities.iter().map(|d| params.generate(d.id)).collect();
        Ok(Codebook {
            params,
            identities,
            signatures,
            by_id,
        })
    }

    /// Codebook for identities `0..population`.
    pub fn sequential(population: usize, params: SignatureParams) -> Result<Self> {
        Codebook::build((0..population as u64).map(DeviceIdentity::new).collect(), params)
    }

    pub fn params(&self) -> &SignatureParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn identities(&self) -> &[DeviceIdentity] {
        &self.identities
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn signature_of(&self, id: u64) -> Option<&Signature> {
        self.index_of(id).map(|i| &self.signatures[i])
    }

    /// Number of entries whose signature repeats an earlier entry's.
    pub fn duplicate_signatures(&self) -> usize {
        let distinct: HashSet<&Signature> = self.signatures.iter().collect();
        self.signatures.len() - distinct.len()
    }

    /// Writes the line-oriented text form: a `L M K mixer` header, then one
    /// `id hex-bitmap` line per device.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{} {} {} {}",
            self.params.raos(),
            self.params.preambles(),
            self.params.weight(),
            self.params.mixer()
        )?;
        for (dev, sig) in self.identities.iter().zip(&self.signatures) {
            writeln!(out, "{} {}", dev.id, hex::encode(sig.to_grid().to_bytes()))?;
        }
        Ok(())
    }

    /// Parses the text form and checks every bitmap against regeneration.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        if fields.len() != 4 {
            return Err(parse_err(1, format!("expected `L M K mixer`, got `{header}`")));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| parse_err(1, format!("`{s}`: {e}")));
        let mixer = fields[3].parse().map_err(|e: Error| parse_err(1, e.to_string()))?;
        let params = SignatureParams::new(num(fields[0])?, num(fields[1])?, num(fields[2])?, mixer)
            .map_err(|e| parse_err(1, e.to_string()))?;

        let mut identities = Vec::new();
        let mut signatures = Vec::new();
        let mut by_id = HashMap::new();
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (id, bitmap) = line
                .split_once(' ')
                .ok_or_else(|| parse_err(lineno, "expected `id bitmap`".into()))?;
            let id: u64 = id.parse().map_err(|e| parse_err(lineno, format!("bad id: {e}")))?;
            let bytes = hex::decode(bitmap.trim()).map_err(|e| parse_err(lineno, format!("bad hex: {e}")))?;
            let grid = BitGrid::from_bytes(params.shape(), &bytes).map_err(|e| parse_err(lineno, e.to_string()))?;
            let sig = Signature::from_grid(&grid).map_err(|e| parse_err(lineno, e.to_string()))?;
            if sig != params.generate(id) {
                return Err(parse_err(
                    lineno,
                    format!("bitmap for device {id} does not match its generated signature"),
                ));
            }
            if by_id.insert(id, identities.len()).is_some() {
                return Err(Error::DuplicateIdentity(id));
            }
            identities.push(DeviceIdentity::new(id));
            signatures.push(sig);
        }
        Ok(Codebook {
            params,
            identities,
            signatures,
            by_id,
        })
    }
}

/// Free-function form of [`Codebook::build`].
pub fn build_codebook(identities: Vec<DeviceIdentity>, params: SignatureParams) -> Result<Codebook> {
    Codebook::build(identities, params)
}
