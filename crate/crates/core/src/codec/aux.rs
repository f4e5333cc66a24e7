//! Auxiliary record: everything the decoder needs to invert one stage.
//!
//! Layout, MSB first:
//!
//! ```text
//! magic 1010 | stage u4 | T u4 | m u4 | payload_length u24
//! peaks       m x i9
//! g0 deltas   m x iw        w = ceil(log2(2T + 1))
//! g1 deltas   m x iw
//! |domain|    u9
//! domain      first i9, then a mode bit:                    if |domain| > 0
//!             0: runs of (gap u9, varint)
//!             1: span u9, then one membership bit per bin after first
//! f deltas    runs of (delta iw, varint)                    if |domain| > 0
//! location    varint total, then if total > 0 a mode bit:
//!             0: total raw bits, 1: runs of (bit u1, varint)
//! displaced   u16
//! crc         u16 over every preceding bit
//! ```
//!
//! Bits the record overwrites travel at the head of the stage payload, so the
//! record only stores their count.

use super::bits::{delta_width, fits_signed, keyed_crc16, BitStream};
use super::CodecError;
use crate::image::PIXEL_LEVELS;
use crate::plan::ShiftPlan;
use crate::Rational;

const MAGIC: u64 = 0b1010;
const BIN_WIDTH: u32 = 9;

/// Decoded auxiliary record of one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxPayload {
    pub stage: u8,
    pub bound: u32,
    pub peaks: Vec<i32>,
    pub g0: Vec<i32>,
    pub g1: Vec<i32>,
    /// `(y, f(y))` sorted by `y`.
    pub shifts: Vec<(i32, i32)>,
    /// Message bits carried by this stage, excluding displaced bits.
    pub payload_length: u32,
    /// One bit per boundary candidate in raster order; set when adjusted.
    pub location_map: Vec<bool>,
    /// Reservoir bits overwritten by this record and its padding.
    pub displaced: u16,
}

impl AuxPayload {
    pub fn new(
        stage: u8,
        plan: &ShiftPlan,
        payload_length: u32,
        location_map: Vec<bool>,
        displaced: u16,
    ) -> Self {
        Self {
            stage,
            bound: plan.bound,
            peaks: plan.peaks.clone(),
            g0: plan.g0.clone(),
            g1: plan.g1.clone(),
            shifts: plan.shifts.clone(),
            payload_length,
            location_map,
            displaced,
        }
    }

    /// The stage's plan; distortion fields are not transmitted.
    pub fn plan(&self) -> ShiftPlan {
        ShiftPlan {
            peaks: self.peaks.clone(),
            g0: self.g0.clone(),
            g1: self.g1.clone(),
            shifts: self.shifts.clone(),
            bound: self.bound,
            predicted_sse: Rational::from_integer(0),
            exact: false,
        }
    }
}

/// `(value, run length)` pairs of consecutive equal values.
fn runs<T: Copy + PartialEq>(values: impl IntoIterator<Item = T>) -> Vec<(T, u32)> {
    let mut out: Vec<(T, u32)> = Vec::new();
    for v in values {
        match out.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

fn unencodable(msg: String) -> CodecError {
    CodecError::Unencodable(msg)
}

/// Serializes `aux` with its keyed CRC.
pub fn serialize_aux(aux: &AuxPayload, key: u64) -> Result<Vec<bool>, CodecError> {
    let m = aux.peaks.len();
    if aux.stage > 15 {
        return Err(unencodable(format!("stage {} exceeds 15", aux.stage)));
    }
    if aux.bound == 0 || aux.bound > 15 {
        return Err(unencodable(format!("shift bound {} outside 1..=15", aux.bound)));
    }
    if m == 0 || m > 15 || aux.g0.len() != m || aux.g1.len() != m {
        return Err(unencodable(format!("peak count {m} outside 1..=15")));
    }
    if aux.payload_length >= 1 << 24 {
        return Err(unencodable(format!(
            "payload length {} exceeds 24 bits",
            aux.payload_length
        )));
    }
    if aux.shifts.len() >= 1 << BIN_WIDTH {
        return Err(unencodable(format!("{} shifted bins exceed 9 bits", aux.shifts.len())));
    }
    let w = delta_width(aux.bound);
    let bin_ok = |v: i32| fits_signed(i64::from(v), BIN_WIDTH);
    let delta_ok = |d: i32| d.unsigned_abs() <= aux.bound;

    let mut s = BitStream::new();
    s.push_uint(MAGIC, 4);
    s.push_uint(u64::from(aux.stage), 4);
    s.push_uint(u64::from(aux.bound), 4);
    s.push_uint(m as u64, 4);
    s.push_uint(u64::from(aux.payload_length), 24);
    for &p in &aux.peaks {
        if !bin_ok(p) {
            return Err(unencodable(format!("peak {p} exceeds 9 bits")));
        }
        s.push_int(i64::from(p), BIN_WIDTH);
    }
    for targets in [&aux.g0, &aux.g1] {
        for (&p, &t) in aux.peaks.iter().zip(targets) {
            if !delta_ok(t - p) {
                return Err(unencodable(format!("target {t} of peak {p} exceeds the bound")));
            }
            s.push_int(i64::from(t - p), w);
        }
    }
    s.push_uint(aux.shifts.len() as u64, BIN_WIDTH);
    if let Some(&(first, _)) = aux.shifts.first() {
        if !bin_ok(first) {
            return Err(unencodable(format!("bin {first} exceeds 9 bits")));
        }
        s.push_int(i64::from(first), BIN_WIDTH);
        let mut gaps = Vec::with_capacity(aux.shifts.len());
        for pair in aux.shifts.windows(2) {
            let gap = pair[1].0 - pair[0].0;
            if !(1..1 << BIN_WIDTH).contains(&gap) {
                return Err(unencodable(format!("domain gap {gap} not in 1..512")));
            }
            gaps.push(gap);
        }
        let mut rle = BitStream::new();
        for (gap, n) in runs(gaps) {
            rle.push_uint(gap as u64, BIN_WIDTH);
            rle.push_varint(n);
        }
        let last = aux.shifts[aux.shifts.len() - 1].0;
        let span = (last - first) as usize;
        let use_bitmap = BIN_WIDTH as usize + span < rle.len();
        s.push(use_bitmap);
        if use_bitmap {
            s.push_uint(span as u64, BIN_WIDTH);
            let mut members = aux.shifts[1..].iter().map(|&(y, _)| y).peekable();
            for y in first + 1..=last {
                s.push(members.next_if_eq(&y).is_some());
            }
        } else {
            s.extend_from_slice(rle.bits());
        }
        for &(y, t) in &aux.shifts {
            if !delta_ok(t - y) {
                return Err(unencodable(format!("f({y}) = {t} exceeds the bound")));
            }
        }
        for (delta, n) in runs(aux.shifts.iter().map(|&(y, t)| t - y)) {
            s.push_int(i64::from(delta), w);
            s.push_varint(n);
        }
    }
    let total = u32::try_from(aux.location_map.len())
        .map_err(|_| unencodable("location map too long".into()))?;
    s.push_varint(total);
    if total > 0 {
        let mut rle = BitStream::new();
        for (bit, n) in runs(aux.location_map.iter().copied()) {
            rle.push(bit);
            rle.push_varint(n);
        }
        let use_runs = rle.len() < aux.location_map.len();
        s.push(use_runs);
        if use_runs {
            s.extend_from_slice(rle.bits());
        } else {
            s.extend_from_slice(&aux.location_map);
        }
    }
    s.push_uint(u64::from(aux.displaced), 16);
    let crc = keyed_crc16(s.bits(), key);
    s.push_uint(u64::from(crc), 16);
    Ok(s.into_bits())
}

fn corrupt(msg: &str) -> CodecError {
    CodecError::CorruptAux(msg.to_string())
}

/// Reads `n` items of a run-length block; runs must not overshoot `n`.
fn read_runs<T: Copy>(
    s: &mut BitStream,
    n: usize,
    mut read_value: impl FnMut(&mut BitStream) -> Option<T>,
) -> Result<Vec<T>, CodecError> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = read_value(s).ok_or_else(|| corrupt("truncated run value"))?;
        let run = s.read_varint().ok_or_else(|| corrupt("truncated run length"))? as usize;
        if run == 0 || run > n - out.len() {
            return Err(corrupt("run length out of range"));
        }
        out.extend(std::iter::repeat_n(v, run));
    }
    Ok(out)
}

/// Parses a record from the start of `bits`; trailing bits are ignored.
///
/// Returns the record and the number of bits it occupied.
pub fn deserialize_aux(bits: &[bool], key: u64) -> Result<(AuxPayload, usize), CodecError> {
    let mut s = BitStream::from_bits(bits.to_vec());
    let truncated = || corrupt("record truncated");
    if s.read_uint(4).ok_or_else(truncated)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let stage = s.read_uint(4).ok_or_else(truncated)? as u8;
    let bound = s.read_uint(4).ok_or_else(truncated)? as u32;
    let m = s.read_uint(4).ok_or_else(truncated)? as usize;
    if bound == 0 || m == 0 {
        return Err(corrupt("zero shift bound or peak count"));
    }
    let payload_length = s.read_uint(24).ok_or_else(truncated)? as u32;
    let w = delta_width(bound);
    let mut peaks = Vec::with_capacity(m);
    for _ in 0..m {
        peaks.push(s.read_int(BIN_WIDTH).ok_or_else(truncated)? as i32);
    }
    let mut targets = [Vec::with_capacity(m), Vec::with_capacity(m)];
    for list in &mut targets {
        for &p in &peaks {
            list.push(p + s.read_int(w).ok_or_else(truncated)? as i32);
        }
    }
    let [g0, g1] = targets;
    let count = s.read_uint(BIN_WIDTH).ok_or_else(truncated)? as usize;
    let mut shifts = Vec::with_capacity(count);
    if count > 0 {
        let first = s.read_int(BIN_WIDTH).ok_or_else(truncated)? as i32;
        let gaps = if s.read_bit().ok_or_else(truncated)? {
            let span = s.read_uint(BIN_WIDTH).ok_or_else(truncated)? as usize;
            let mut gaps = Vec::with_capacity(count - 1);
            let mut gap = 0;
            for _ in 0..span {
                gap += 1;
                if s.read_bit().ok_or_else(truncated)? {
                    gaps.push(gap);
                    gap = 0;
                }
            }
            if gaps.len() != count - 1 || gap != 0 {
                return Err(corrupt("domain bitmap disagrees with its count"));
            }
            gaps
        } else {
            read_runs(&mut s, count - 1, |s| s.read_uint(BIN_WIDTH))?
        };
        let deltas = read_runs(&mut s, count, |s| s.read_int(w))?;
        let mut y = first;
        for (i, delta) in deltas.into_iter().enumerate() {
            if i > 0 {
                let gap = gaps[i - 1] as i32;
                if gap == 0 {
                    return Err(corrupt("zero gap in the shift domain"));
                }
                y += gap;
            }
            shifts.push((y, y + delta as i32));
        }
    }
    let total = s.read_varint().ok_or_else(truncated)? as usize;
    if total > bits.len() * 64 {
        return Err(corrupt("location map length implausible"));
    }
    let location_map = if total == 0 {
        Vec::new()
    } else if s.read_bit().ok_or_else(truncated)? {
        read_runs(&mut s, total, |s| s.read_bit())?
    } else {
        if s.remaining() < total {
            return Err(truncated());
        }
        (0..total).map(|_| s.read_bit().expect("length checked")).collect()
    };
    let displaced = s.read_uint(16).ok_or_else(truncated)? as u16;
    let body = s.cursor();
    let crc = s.read_uint(16).ok_or_else(truncated)? as u16;
    if crc != keyed_crc16(&bits[..body], key) {
        return Err(corrupt("checksum mismatch (corrupted record or wrong key)"));
    }
    let aux = AuxPayload {
        stage,
        bound,
        peaks,
        g0,
        g1,
        shifts,
        payload_length,
        location_map,
        displaced,
    };
    aux.plan()
        .validate(PIXEL_LEVELS)
        .map_err(|e| CodecError::CorruptAux(e.to_string()))?;
    Ok((aux, s.cursor()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::compute_shift_costs;
    use crate::fixtures::{worked_example, worked_example_set};
    use crate::plan::traditional_plan;

    fn fig1a_aux() -> AuxPayload {
        let (hist, set) = (worked_example(), worked_example_set());
        let plan = traditional_plan(&hist, &compute_shift_costs(&set, &hist, 1), &[0, 1]).unwrap();
        AuxPayload::new(3, &plan, 1234, vec![false, false, true, false], 77)
    }

    #[test]
    fn fig1a_deltas_collapse_into_two_runs() {
        let aux = fig1a_aux();
        let deltas: Vec<i32> = aux.shifts.iter().map(|&(y, t)| t - y).collect();
        assert_eq!(runs(deltas), vec![(-1, 3), (1, 3)]);
        let bits = serialize_aux(&aux, 9).unwrap();
        let (back, used) = deserialize_aux(&bits, 9).unwrap();
        assert_eq!(back, aux);
        assert_eq!(used, bits.len());
    }

    #[test]
    fn header_only_record() {
        let aux = AuxPayload {
            stage: 0,
            bound: 2,
            peaks: vec![0, 1],
            g0: vec![0, 1],
            g1: vec![-1, 2],
            shifts: vec![],
            payload_length: 1,
            location_map: vec![],
            displaced: 0,
        };
        let bits = serialize_aux(&aux, 0).unwrap();
        // header 40, peaks 18, targets 12, count 9, empty map 8, displaced 16, crc 16
        assert_eq!(bits.len(), 40 + 18 + 12 + 9 + 8 + 16 + 16);
        assert_eq!(deserialize_aux(&bits, 0).unwrap().0, aux);
    }

    #[test]
    fn location_map_picks_the_shorter_encoding() {
        let mut aux = fig1a_aux();
        let base = serialize_aux(&AuxPayload { location_map: vec![], ..aux.clone() }, 1)
            .unwrap()
            .len();
        aux.location_map = (0..40).map(|i| i % 2 == 0).collect();
        let raw = serialize_aux(&aux, 1).unwrap();
        assert_eq!(raw.len(), base + 1 + 40);
        assert_eq!(deserialize_aux(&raw, 1).unwrap().0, aux);
        aux.location_map = vec![true; 400];
        let rle = serialize_aux(&aux, 1).unwrap();
        // total grows to two varint chunks; one run of 400 takes 1 + 16 bits
        assert_eq!(rle.len(), base + 8 + 1 + 17);
        assert_eq!(deserialize_aux(&rle, 1).unwrap().0, aux);
    }

    #[test]
    fn irregular_domain_uses_a_bitmap() {
        let mut aux = fig1a_aux();
        let neg = [-44, -35, -27, -20, -14, -9, -5, -2].map(|y| (y, y - 1));
        let pos = [2, 4, 7, 11, 16, 22, 29, 37, 46].map(|y| (y, y + 1));
        aux.shifts = neg.into_iter().chain(pos).collect();
        let bits = serialize_aux(&aux, 4).unwrap();
        let empty = serialize_aux(&AuxPayload { shifts: vec![], ..aux.clone() }, 4)
            .unwrap()
            .len();
        // first 9, mode 1, span 9 + 90, delta runs 2 x (2 + 8)
        assert_eq!(bits.len(), empty + 9 + 1 + 9 + 90 + 20);
        assert_eq!(deserialize_aux(&bits, 4).unwrap().0, aux);
    }

    #[test]
    fn trailing_padding_is_ignored() {
        let aux = fig1a_aux();
        let mut bits = serialize_aux(&aux, 5).unwrap();
        let n = bits.len();
        bits.extend([true, false, true]);
        assert_eq!(deserialize_aux(&bits, 5).unwrap(), (aux, n));
    }

    #[test]
    fn wrong_key_and_flips_are_rejected() {
        let bits = serialize_aux(&fig1a_aux(), 5).unwrap();
        assert!(matches!(deserialize_aux(&bits, 6), Err(CodecError::CorruptAux(_))));
        for i in 0..bits.len() {
            let mut bad = bits.clone();
            bad[i] ^= true;
            assert!(deserialize_aux(&bad, 5).is_err(), "flip at {i} accepted");
        }
        assert!(deserialize_aux(&bits[..bits.len() - 1], 5).is_err());
    }

    #[test]
    fn out_of_range_fields_are_refused() {
        let mut aux = fig1a_aux();
        aux.stage = 16;
        assert!(serialize_aux(&aux, 0).is_err());
        let mut aux = fig1a_aux();
        aux.g1[0] = -5;
        assert!(serialize_aux(&aux, 0).is_err());
        let mut aux = fig1a_aux();
        aux.payload_length = 1 << 24;
        assert!(serialize_aux(&aux, 0).is_err());
    }
}
