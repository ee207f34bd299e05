use std::ops::Range;

/// Splits `0..len` into `parts` contiguous ranges whose sizes differ by at
/// most one, the larger ranges first.
///
/// `parts` must be in `1..=len` (a zero-length range is returned for the
/// surplus parts otherwise).
pub fn balanced_ranges(len: usize, parts: usize) -> Vec<Range<usize>> {
    assert!(parts >= 1, "at least one part required");
    let base = len / parts;
    let rem = len % parts;
    let mut lo = 0;
    (0..parts)
        .map(|i| {
            let size = base + usize::from(i < rem);
            let r = lo..lo + size;
            lo += size;
            r
        })
        .collect()
}

/// Index of the range produced by [`balanced_ranges`] that contains `index`.
pub fn owner_of(len: usize, parts: usize, index: usize) -> Option<usize> {
    if index >= len {
        return None;
    }
    let base = len / parts;
    let rem = len % parts;
    let big = rem * (base + 1);
    if index < big {
        Some(index / (base + 1))
    } else {
        Some(rem + (index - big) / base)
    }
}
