//! Matrix Market text files and the `BSR1` binary dump.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BlockSparseError, BlockSparseMatrix, ProblemInstance, Provenance};

const MAGIC: &[u8; 4] = b"BSR1";

fn parse_err(line: usize, message: impl Into<String>) -> BlockSparseError {
    BlockSparseError::Parse {
        line,
        message: message.into(),
    }
}

/// Yields `(line_number, trimmed_line)` skipping blanks and `%` comments,
/// after checking the banner against `kind` ("coordinate" or "array").
fn data_lines<R: BufRead>(
    reader: R,
    kind: &str,
) -> Result<impl Iterator<Item = Result<(usize, String), BlockSparseError>>, BlockSparseError> {
    let mut lines = reader.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let banner = banner?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() < 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix banner"));
    }
    if words[2] != kind {
        return Err(parse_err(1, format!("expected {kind} format, found {}", words[2])));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field {}", words[3])));
    }
    if words[4] != "general" {
        return Err(parse_err(1, format!("unsupported symmetry {}", words[4])));
    }
    Ok(lines.filter_map(|(k, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((k + 1, t.to_string())))
            }
        }
    }))
}

fn parse_fields<const N: usize>(line: usize, text: &str) -> Result<[&str; N], BlockSparseError> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| parse_err(line, format!("expected {N} fields, found {}", p.len())))
}

fn parse_usize(line: usize, s: &str) -> Result<usize, BlockSparseError> {
    s.parse().map_err(|_| parse_err(line, format!("invalid integer {s:?}")))
}

fn parse_f64(line: usize, s: &str) -> Result<f64, BlockSparseError> {
    let v: f64 = s.parse().map_err(|_| parse_err(line, format!("invalid number {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, format!("non-finite value {s:?}")))
    }
}

/// Reads a coordinate-format matrix and groups it into `b x b` blocks.
/// Repeated entries are summed.
pub fn read_matrix_market_matrix(path: &Path, b: usize) -> Result<BlockSparseMatrix, BlockSparseError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = data_lines(reader, "coordinate")?;
    let (size_line, size_text) = lines.next().ok_or_else(|| parse_err(2, "missing size line"))??;
    let [r, c, nz] = parse_fields::<3>(size_line, &size_text)?;
    let (rows, cols, nnz) = (
        parse_usize(size_line, r)?,
        parse_usize(size_line, c)?,
        parse_usize(size_line, nz)?,
    );
    if rows != cols {
        return Err(parse_err(size_line, format!("matrix is {rows}x{cols}, not square")));
    }
    if b == 0 || rows % b != 0 {
        return Err(BlockSparseError::BlockSizeMismatch {
            dim: rows,
            block_size: b,
        });
    }
    let n = rows / b;
    let mut entries: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut seen = 0;
    for item in lines {
        let (ln, text) = item?;
        let [i, j, v] = parse_fields::<3>(ln, &text)?;
        let (i, j, v) = (parse_usize(ln, i)?, parse_usize(ln, j)?, parse_f64(ln, v)?);
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(parse_err(ln, format!("index ({i}, {j}) outside {rows}x{cols}")));
        }
        let (i, j) = (i - 1, j - 1);
        let slot = entries
            .entry((i / b, j / b))
            .or_insert_with(|| vec![0.0; b * b]);
        slot[(i % b) * b + j % b] += v;
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(size_line, format!("header declares {nnz} entries, found {seen}")));
    }
    let mut builder = super::BsrBuilder::new(n, b);
    for ((bi, bj), blk) in entries {
        builder.add_block(bi, bj, &blk);
    }
    builder.build()
}

/// Reads a matrix file as a problem with `rhs = A·1` and reference `1`.
pub fn read_matrix_market(path: &Path, b: usize) -> Result<ProblemInstance, BlockSparseError> {
    let matrix = read_matrix_market_matrix(path, b)?;
    let reference = vec![1.0; matrix.dim()];
    Ok(ProblemInstance::with_reference(
        matrix,
        reference,
        Provenance::File {
            path: path.display().to_string(),
            block_size: b,
        },
    ))
}

/// Writes every stored scalar, explicit zeros included, so that reading the
/// file back with the same block size reproduces the pattern exactly.
pub fn write_matrix_market(a: &BlockSparseMatrix, path: &Path) -> Result<(), BlockSparseError> {
    let mut w = BufWriter::new(File::create(path)?);
    let b = a.block_size();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "% block size {b}")?;
    writeln!(w, "{} {} {}", a.dim(), a.dim(), a.nnz())?;
    for i in 0..a.n_block_rows() {
        for pos in a.row_range(i) {
            let j = a.col_idx()[pos];
            let blk = a.block(pos);
            for r in 0..b {
                for c in 0..b {
                    writeln!(w, "{} {} {:e}", i * b + r + 1, j * b + c + 1, blk[r * b + c])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Dense column vector in array format.
pub fn read_mm_vector(path: &Path) -> Result<Vec<f64>, BlockSparseError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = data_lines(reader, "array")?;
    let (size_line, size_text) = lines.next().ok_or_else(|| parse_err(2, "missing size line"))??;
    let [r, c] = parse_fields::<2>(size_line, &size_text)?;
    let (rows, cols) = (parse_usize(size_line, r)?, parse_usize(size_line, c)?);
    if cols != 1 {
        return Err(parse_err(size_line, format!("expected a single column, found {cols}")));
    }
    let mut out = Vec::with_capacity(rows);
    for item in lines {
        let (ln, text) = item?;
        let [v] = parse_fields::<1>(ln, &text)?;
        out.push(parse_f64(ln, v)?);
    }
    if out.len() != rows {
        return Err(parse_err(size_line, format!("header declares {rows} values, found {}", out.len())));
    }
    Ok(out)
}

pub fn write_mm_vector(v: &[f64], path: &Path) -> Result<(), BlockSparseError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bsr_binary(a: &BlockSparseMatrix, path: &Path) -> Result<(), BlockSparseError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for v in [a.n_block_rows(), a.block_size(), a.nnz_blocks()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for &v in a.row_ptr().iter().chain(a.col_idx()) {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in a.blocks() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bsr_binary(path: &Path) -> Result<BlockSparseMatrix, BlockSparseError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(parse_err(0, "bad magic, expected BSR1"));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64, BlockSparseError> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let n = next_u64(&mut r)? as usize;
    let b = next_u64(&mut r)? as usize;
    let nnzb = next_u64(&mut r)? as usize;
    let row_ptr = (0..=n)
        .map(|_| next_u64(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let col_idx = (0..nnzb)
        .map(|_| next_u64(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let blocks = (0..nnzb * b * b)
        .map(|_| next_u64(&mut r).map(f64::from_bits))
        .collect::<Result<Vec<_>, _>>()?;
    BlockSparseMatrix::new(n, b, row_ptr, col_idx, blocks)
}
