//! Dataset ingestion: IDX image files and a flat float64 matrix format.
//!
//! IDX layout (big-endian): magic `0x00000803` (unsigned byte, 3
//! dimensions), item count, rows, cols, then `count·rows·cols` raw pixel
//! bytes. Pixels map linearly from [0, 255] to [−1, 1] and images flatten
//! row-major, one pattern per row.
//!
//! Flat layout (little-endian): two u64 counts N and D, then N·D f64
//! values, row-major.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt};
use hfy_core::energy::PatternMemory;
use ndarray::Array2;

use crate::error::{HarnessError, Result};

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// Loads an IDX image file into a pattern memory (one image per row,
/// pixels rescaled to [−1, 1]).
pub fn load_idx_images(path: &Path) -> Result<PatternMemory> {
    let file = File::open(path)
        .map_err(|e| HarnessError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut offset = 0usize;

    let read_u32 = |r: &mut BufReader<File>, offset: &mut usize, what: &str| -> Result<u32> {
        let v = r.read_u32::<BigEndian>().map_err(|e| {
            HarnessError::data(format!(
                "{}: truncated {what} at byte offset {offset}: {e}",
                path.display()
            ))
        })?;
        *offset += 4;
        Ok(v)
    };

    let magic = read_u32(&mut reader, &mut offset, "magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(HarnessError::data(format!(
            "{}: bad magic {magic:#010x} at byte offset 0, expected {IDX_IMAGE_MAGIC:#010x}",
            path.display()
        )));
    }
    let count = read_u32(&mut reader, &mut offset, "item count")? as usize;
    let rows = read_u32(&mut reader, &mut offset, "row count")? as usize;
    let cols = read_u32(&mut reader, &mut offset, "column count")? as usize;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(HarnessError::data(format!(
            "{}: zero dimension in header (count={count}, rows={rows}, cols={cols})",
            path.display()
        )));
    }
    let expected = count * rows * cols;
    let mut pixels = Vec::with_capacity(expected);
    let got = reader.read_to_end(&mut pixels).map_err(|e| {
        HarnessError::data(format!("{}: read failed at byte offset {offset}: {e}", path.display()))
    })?;
    if got != expected {
        return Err(HarnessError::data(format!(
            "{}: payload holds {got} bytes at byte offset {offset}, header promises {expected}",
            path.display()
        )));
    }
    let values: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0 * 2.0 - 1.0).collect();
    let x = Array2::from_shape_vec((count, rows * cols), values)
        .map_err(|e| HarnessError::data(e.to_string()))?;
    Ok(PatternMemory::new(x)?)
}

/// Loads the flat binary alternative: little-endian u64 counts N, D, then
/// N·D little-endian f64 values.
pub fn load_flat_f64(path: &Path) -> Result<PatternMemory> {
    let file = File::open(path)
        .map_err(|e| HarnessError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let n = reader
        .read_u64::<LittleEndian>()
        .map_err(|e| HarnessError::data(format!("{}: truncated N at byte offset 0: {e}", path.display())))?
        as usize;
    let d = reader
        .read_u64::<LittleEndian>()
        .map_err(|e| HarnessError::data(format!("{}: truncated D at byte offset 8: {e}", path.display())))?
        as usize;
    if n == 0 || d == 0 || n.checked_mul(d).is_none() {
        return Err(HarnessError::data(format!(
            "{}: invalid header counts N={n}, D={d}",
            path.display()
        )));
    }
    let mut values = Vec::with_capacity(n * d);
    for i in 0..n * d {
        let v = reader.read_f64::<LittleEndian>().map_err(|e| {
            HarnessError::data(format!(
                "{}: truncated value {i} at byte offset {}: {e}",
                path.display(),
                16 + 8 * i
            ))
        })?;
        values.push(v);
    }
    let x = Array2::from_shape_vec((n, d), values)
        .map_err(|e| HarnessError::data(e.to_string()))?;
    Ok(PatternMemory::new(x)?)
}
