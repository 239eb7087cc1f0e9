//! Line-oriented persistence.
//!
//! ```text
//! IOE-LEDGER v1 sha256 <difficulty>
//! B <index> <prev_hash hex> <nonce> <sealed_at seconds> <body hex>
//! ```
//!
//! Only sealed blocks are written. Body hashes and block hashes are
//! recomputed on load.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{
    sha256, Block, BlockHeader, Chain, InvalidReason, LedgerConfig, ValidationReport, HASH_NAME,
    MAX_DIFFICULTY_BITS,
};

pub const MAGIC: &str = "IOE-LEDGER";
pub const VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum LedgerFileError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("block {index} was sealed at difficulty {found}, file header says {expected}")]
    MixedDifficulty { index: usize, found: u8, expected: u8 },
    #[error("chain invalid at block {index}: {reason}")]
    Invalid { index: usize, reason: InvalidReason },
}

fn parse_err(line: usize, message: impl Into<String>) -> LedgerFileError {
    LedgerFileError::Parse {
        line,
        message: message.into(),
    }
}

pub fn write_chain<W: Write>(chain: &Chain, mut out: W) -> Result<(), LedgerFileError> {
    let difficulty = chain.config().difficulty_bits;
    writeln!(out, "{MAGIC} {VERSION} {HASH_NAME} {difficulty}")?;
    for (i, b) in chain.blocks().iter().enumerate() {
        if b.header.difficulty_bits != difficulty {
            return Err(LedgerFileError::MixedDifficulty {
                index: i,
                found: b.header.difficulty_bits,
                expected: difficulty,
            });
        }
        writeln!(
            out,
            "B {} {} {} {} {}",
            b.header.index,
            hex::encode(b.header.prev_hash),
            b.header.nonce,
            b.header.sealed_at,
            hex::encode(&b.body)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn chain_to_string(chain: &Chain) -> Result<String, LedgerFileError> {
    let mut buf = Vec::new();
    write_chain(chain, &mut buf)?;
    Ok(String::from_utf8(buf).expect("ledger text is ASCII"))
}

/// Parses a ledger file without validating the chain it describes.
/// `max_block_size` is not recorded in the file and is taken from `defaults`.
pub fn read_chain_unchecked<R: BufRead>(
    input: R,
    defaults: LedgerConfig,
) -> Result<Chain, LedgerFileError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let fields: Vec<&str> = header.split(' ').collect();
    let difficulty = match fields.as_slice() {
        [magic, version, hash, difficulty] if *magic == MAGIC => {
            if *version != VERSION {
                return Err(parse_err(1, format!("unsupported version {version}")));
            }
            if *hash != HASH_NAME {
                return Err(parse_err(1, format!("unsupported hash {hash}")));
            }
            let d: u8 = difficulty
                .parse()
                .map_err(|_| parse_err(1, format!("bad difficulty {difficulty:?}")))?;
            if d > MAX_DIFFICULTY_BITS {
                return Err(parse_err(1, format!("difficulty {d} outside [0, 32]")));
            }
            d
        }
        _ => return Err(parse_err(1, "missing IOE-LEDGER header")),
    };

    let mut blocks = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let lineno = n + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(' ').collect();
        let [tag, index, prev, nonce, sealed_at, body] = f.as_slice() else {
            return Err(parse_err(lineno, "expected 6 fields"));
        };
        if *tag != "B" {
            return Err(parse_err(lineno, format!("unknown record {tag:?}")));
        }
        let num = |s: &str, what: &str| -> Result<u64, LedgerFileError> {
            s.parse()
                .map_err(|_| parse_err(lineno, format!("bad {what} {s:?}")))
        };
        let prev_hash: [u8; 32] = hex::decode(prev)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| parse_err(lineno, "prev_hash is not 32 hex bytes"))?;
        let body = hex::decode(body).map_err(|_| parse_err(lineno, "body is not hex"))?;
        let header = BlockHeader {
            index: num(index, "index")?,
            prev_hash,
            body_hash: sha256(&body),
            nonce: num(nonce, "nonce")?,
            difficulty_bits: difficulty,
            sealed_at: num(sealed_at, "sealed_at")?,
        };
        let hash = header.hash();
        blocks.push(Block { header, hash, body });
    }
    Ok(Chain::from_blocks(
        LedgerConfig {
            difficulty_bits: difficulty,
            max_block_size: defaults.max_block_size,
        },
        blocks,
    ))
}

/// Parses and fully revalidates a ledger file.
pub fn read_chain<R: BufRead>(input: R, defaults: LedgerConfig) -> Result<Chain, LedgerFileError> {
    let chain = read_chain_unchecked(input, defaults)?;
    match chain.validate() {
        ValidationReport::Ok => Ok(chain),
        ValidationReport::Invalid {
            first_bad_index,
            reason,
        } => Err(LedgerFileError::Invalid {
            index: first_bad_index,
            reason,
        }),
    }
}

pub fn load(path: &std::path::Path, defaults: LedgerConfig) -> Result<Chain, LedgerFileError> {
    let f = std::fs::File::open(path)?;
    read_chain(io::BufReader::new(f), defaults)
}

pub fn save(chain: &Chain, path: &std::path::Path) -> Result<(), LedgerFileError> {
    let text = chain_to_string(chain)?;
    std::fs::write(path, text)?;
    Ok(())
}
