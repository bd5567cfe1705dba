use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Convolution window of `size` positions; `mask[k]` is false where the
/// input is ignored. Deactivated positions form one contiguous interior run.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct WindowShape {
    mask: Vec<bool>,
}

impl WindowShape {
    /// Fully activated window of size `j`.
    pub fn plain(j: usize) -> Result<Self> {
        if j == 0 {
            return Err(Error::arg("window size must be positive"));
        }
        Ok(WindowShape { mask: vec![true; j] })
    }

    /// Window with positions `start..start + gap` (0-indexed) deactivated.
    pub fn gapped(j: usize, start: usize, gap: usize) -> Result<Self> {
        if gap == 0 {
            return WindowShape::plain(j);
        }
        if start == 0 || start + gap >= j {
            return Err(Error::arg(format!(
                "gap of {gap} at {start} must leave both ends of a size-{j} window active"
            )));
        }
        let mask = (0..j).map(|k| !(start..start + gap).contains(&k)).collect();
        Ok(WindowShape { mask })
    }

    pub fn size(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn gap_len(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// Offsets of the activated positions, ascending.
    pub fn active_offsets(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(k, &m)| m.then_some(k))
            .collect()
    }

    pub fn active_len(&self) -> usize {
        self.size() - self.gap_len()
    }
}

impl fmt::Display for WindowShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &m in &self.mask {
            f.write_str(if m { "O" } else { "X" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for WindowShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WindowShape({self})")
    }
}

impl FromStr for WindowShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mask: Vec<bool> = s
            .chars()
            .map(|c| match c {
                'O' | 'o' => Ok(true),
                'X' | 'x' => Ok(false),
                other => Err(Error::arg(format!("bad window character {other:?}"))),
            })
            .collect::<Result<_>>()?;
        let gap = mask.iter().filter(|&&m| !m).count();
        match mask.iter().position(|&m| !m) {
            None => WindowShape::plain(mask.len()),
            Some(start) => {
                let shape = WindowShape::gapped(mask.len(), start, gap)?;
                if shape.mask != mask {
                    return Err(Error::arg(format!("{s}: deactivated positions must be contiguous")));
                }
                Ok(shape)
            }
        }
    }
}

/// All shapes of a size-`j` window with `i` consecutive deactivated
/// positions, ordered by where the gap starts.
///
/// The gap starts at every position that keeps both window ends active, so
/// there are `j - i - 1` shapes: `(1, 4)` gives `OXOO, OOXO` and `(2, 4)`
/// gives `OXXO`. A gap of `j - 1` leaves no room and yields no shapes.
pub fn gapped_window_shapes(i: usize, j: usize) -> Result<Vec<WindowShape>> {
    if !(0 < i && i < j) {
        return Err(Error::arg(format!("gapped windows need 0 < i < j, got i={i}, j={j}")));
    }
    // 1-indexed start k ∈ {2, …, j−i} is 0-indexed 1..=j−i−1.
    (1..j - i).map(|start| WindowShape::gapped(j, start, i)).collect()
}
