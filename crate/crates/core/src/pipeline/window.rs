use crate::error::{Result, StapError};

/// The `q` training cells nearest to `cut`, skipping the CUT and `guard` cells on
/// each side.
///
/// Cells are taken alternately from the left and right flanks, nearest first and
/// left first, so interior windows are symmetric (one extra cell on the left for odd
/// `q`). When a flank reaches the edge of the data the remainder comes from the
/// other flank. The result is sorted ascending.
pub fn select_training_window(
    num_cells: usize,
    cut: usize,
    q: usize,
    guard: usize,
) -> Result<Vec<usize>> {
    if cut >= num_cells {
        return Err(StapError::InvalidInput(format!(
            "CUT {cut} outside dataset of {num_cells} cells"
        )));
    }
    if q == 0 {
        return Err(StapError::InvalidInput(
            "training window must hold at least one cell".into(),
        ));
    }
    let mut left = (0..cut.saturating_sub(guard)).rev();
    let mut right = (cut + guard + 1).min(num_cells)..num_cells;
    let available = left.len() + right.len();
    if available < q {
        return Err(StapError::InvalidInput(format!(
            "window of {q} training cells with {guard} guard cells does not fit around CUT {cut} \
             in {num_cells} cells ({available} available)"
        )));
    }

    let mut cells = Vec::with_capacity(q);
    let mut take_left = true;
    while cells.len() < q {
        let next = if take_left {
            left.next().or_else(|| right.next())
        } else {
            right.next().or_else(|| left.next())
        };
        cells.push(next.expect("enough cells were counted"));
        take_left = !take_left;
    }
    cells.sort_unstable();
    Ok(cells)
}
