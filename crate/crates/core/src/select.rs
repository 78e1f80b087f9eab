//! Selection of the lower median in expected linear time.

use crate::error::{Error, Result};

/// Returns the element of rank `k` (0-based) of `v`, permuting `v` so that
/// `v[..k] <= v[k] <= v[k+1..]`.
///
/// Hoare partitioning around a median-of-three pivot. NaNs are not
/// supported.
pub fn select_nth(v: &mut [f64], k: usize) -> f64 {
    assert!(k < v.len());
    let (mut lo, mut hi) = (0usize, v.len() - 1);
    loop {
        if hi <= lo + 1 {
            if hi == lo + 1 && v[hi] < v[lo] {
                v.swap(lo, hi);
            }
            return v[k];
        }
        let mid = lo + (hi - lo) / 2;
        v.swap(mid, lo + 1);
        if v[lo] > v[hi] {
            v.swap(lo, hi);
        }
        if v[lo + 1] > v[hi] {
            v.swap(lo + 1, hi);
        }
        if v[lo] > v[lo + 1] {
            v.swap(lo, lo + 1);
        }
        // v[lo] <= v[lo+1] <= v[hi]; v[lo+1] is the pivot
        let pivot = v[lo + 1];
        let (mut i, mut j) = (lo + 1, hi);
        loop {
            i += 1;
            while v[i] < pivot {
                i += 1;
            }
            j -= 1;
            while v[j] > pivot {
                j -= 1;
            }
            if j < i {
                break;
            }
            v.swap(i, j);
        }
        v[lo + 1] = v[j];
        v[j] = pivot;
        match j.cmp(&k) {
            std::cmp::Ordering::Equal => return pivot,
            std::cmp::Ordering::Greater => hi = j - 1,
            std::cmp::Ordering::Less => lo = i,
        }
    }
}

/// Lower median: the element at sorted index `(len - 1) / 2`.
pub fn quickselect_median(v: &mut [f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = (v.len() - 1) / 2;
    Ok(select_nth(v, k))
}
