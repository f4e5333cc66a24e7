//! Boundary preprocessing so that no embedded pixel leaves `[0, 255]`.
//!
//! With shift bound `T`, values below `T` move up by `T` and values above
//! `255 - T` move down by `T`. Afterwards every site lies in `[T, 255 - T]`
//! and a change of at most `T` stays in range. An adjusted value lands in
//! `[T, 2T)` or `(255 - 2T, 255 - T]`; the location map holds one bit for
//! every site whose value ends up in those bands, in site order, telling
//! adjusted pixels from untouched ones.

use crate::image::{GrayImage, MAX_PIXEL};

fn bands(bound: u32) -> (u8, u8) {
    let t = bound as u8;
    (t, MAX_PIXEL - t)
}

/// Whether a preprocessed value is ambiguous and needs a map bit.
#[inline]
fn is_candidate(v: u8, bound: u32) -> bool {
    let (lo, hi) = bands(bound);
    let t = bound as u8;
    (lo..lo + t).contains(&v) || (hi - t + 1..=hi).contains(&v)
}

/// Adjusts the pixels at `sites` in place and returns the location map.
pub fn preprocess_boundaries(img: &mut GrayImage, sites: &[usize], bound: u32) -> Vec<bool> {
    assert!((1..=63).contains(&bound), "shift bound must be in 1..=63");
    let (lo, hi) = bands(bound);
    let t = bound as u8;
    let px = img.pixels_mut();
    let mut map = Vec::new();
    for &i in sites {
        let v = px[i];
        let adjusted = if v < lo {
            px[i] = v + t;
            true
        } else if v > hi {
            px[i] = v - t;
            true
        } else {
            false
        };
        if is_candidate(px[i], bound) {
            map.push(adjusted);
        }
    }
    map
}

/// Undoes [`preprocess_boundaries`]; `None` if the map length disagrees.
pub fn restore_boundaries(
    img: &mut GrayImage,
    sites: &[usize],
    bound: u32,
    map: &[bool],
) -> Option<()> {
    let (lo, _) = bands(bound);
    let t = bound as u8;
    let px = img.pixels_mut();
    let mut bits = map.iter();
    for &i in sites {
        let v = px[i];
        if !is_candidate(v, bound) {
            continue;
        }
        if *bits.next()? {
            px[i] = if v < lo + t { v - t } else { v + t };
        }
    }
    bits.next().is_none().then_some(())
}
