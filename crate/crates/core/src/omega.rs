//! Symbol-sequence specifications: explicit strings, periodic cycles,
//! seeded random streams, and the forge placeholder resolved by callers.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OmegaSpec {
    /// A finite explicit prefix, e.g. `0110`.
    Explicit(Vec<usize>),
    /// An infinite periodic sequence, e.g. `cycle:01`.
    Cycle(Vec<usize>),
    /// Uniform independent symbols from a seeded deterministic stream.
    Random { seed: u64 },
    /// Resolved by the counterexample forge; only valid for diverging systems.
    Forge,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OmegaError {
    #[error("empty symbol sequence")]
    Empty,
    #[error("symbol `{0}` is not a digit; sequences use digits 0-9")]
    NotADigit(char),
    #[error("symbol {symbol} out of range for alphabet of {alphabet}")]
    OutOfRange { symbol: usize, alphabet: usize },
    #[error("malformed random seed `{0}`")]
    BadSeed(String),
    #[error("a forge sequence must be resolved by the forge, not sampled directly")]
    ForgeUnresolved,
}

fn parse_digits(s: &str) -> Result<Vec<usize>, OmegaError> {
    if s.is_empty() {
        return Err(OmegaError::Empty);
    }
    s.chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as usize)
                .ok_or(OmegaError::NotADigit(c))
        })
        .collect()
}

impl OmegaSpec {
    pub fn parse(text: &str) -> Result<Self, OmegaError> {
        let s = text.trim();
        if s == "forge" {
            return Ok(OmegaSpec::Forge);
        }
        if let Some(rest) = s.strip_prefix("cycle:") {
            return Ok(OmegaSpec::Cycle(parse_digits(rest)?));
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let seed = rest
                .parse::<u64>()
                .map_err(|_| OmegaError::BadSeed(rest.to_string()))?;
            return Ok(OmegaSpec::Random { seed });
        }
        Ok(OmegaSpec::Explicit(parse_digits(s)?))
    }

    /// Builds the symbol iterator, validating symbols against the alphabet.
    /// `Forge` is rejected here; the forge constructs its own generator.
    pub fn source(&self, alphabet: usize) -> Result<OmegaSource, OmegaError> {
        let check = |syms: &[usize]| -> Result<(), OmegaError> {
            for &s in syms {
                if s >= alphabet {
                    return Err(OmegaError::OutOfRange {
                        symbol: s,
                        alphabet,
                    });
                }
            }
            Ok(())
        };
        match self {
            OmegaSpec::Explicit(syms) => {
                check(syms)?;
                Ok(OmegaSource::Explicit {
                    symbols: syms.clone(),
                    next: 0,
                })
            }
            OmegaSpec::Cycle(syms) => {
                if syms.is_empty() {
                    return Err(OmegaError::Empty);
                }
                check(syms)?;
                Ok(OmegaSource::Cycle {
                    symbols: syms.clone(),
                    next: 0,
                })
            }
            OmegaSpec::Random { seed } => Ok(OmegaSource::Random {
                rng: Box::new(ChaCha8Rng::seed_from_u64(*seed)),
                alphabet,
            }),
            OmegaSpec::Forge => Err(OmegaError::ForgeUnresolved),
        }
    }
}

impl fmt::Display for OmegaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OmegaSpec::Explicit(syms) => {
                for s in syms {
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            OmegaSpec::Cycle(syms) => {
                write!(f, "cycle:")?;
                for s in syms {
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            OmegaSpec::Random { seed } => write!(f, "random:{seed}"),
            OmegaSpec::Forge => write!(f, "forge"),
        }
    }
}

/// Iterator over symbols for a resolved specification.
#[derive(Debug, Clone)]
pub enum OmegaSource {
    Explicit {
        symbols: Vec<usize>,
        next: usize,
    },
    Cycle {
        symbols: Vec<usize>,
        next: usize,
    },
    Random {
        rng: Box<ChaCha8Rng>,
        alphabet: usize,
    },
}

impl Iterator for OmegaSource {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            OmegaSource::Explicit { symbols, next } => {
                let s = symbols.get(*next).copied();
                if s.is_some() {
                    *next += 1;
                }
                s
            }
            OmegaSource::Cycle { symbols, next } => {
                let s = symbols[*next];
                *next = (*next + 1) % symbols.len();
                Some(s)
            }
            OmegaSource::Random { rng, alphabet } => Some(rng.random_range(0..*alphabet)),
        }
    }
}
