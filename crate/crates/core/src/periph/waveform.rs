//! Reference decoders for recorded pin waveforms.
//!
//! These work only from edge timestamps and share no code with the
//! peripheral encoders, so tests can round-trip through them.

use thiserror::Error;

use crate::pins::{Pin, PinEvent};

use super::NeoTiming;

/// `(cycle, level)` edges of one pin, in order.
pub fn pin_edges(events: &[PinEvent], pin: Pin) -> Vec<(u64, bool)> {
    events
        .iter()
        .filter(|e| e.pin == pin)
        .map(|e| (e.cycle, e.level))
        .collect()
}

/// Level of an idle-high line at `cycle`, given its edges.
fn level_at(edges: &[(u64, bool)], cycle: u64) -> bool {
    match edges.partition_point(|&(c, _)| c <= cycle) {
        0 => true,
        n => edges[n - 1].1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramingKind {
    StopBitLow,
    /// The recording ends before the frame does.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("framing error ({kind:?}) in frame starting at event {event_index}")]
pub struct FramingError {
    pub event_index: usize,
    pub kind: FramingKind,
}

/// Recover 8N1 bytes from an idle-high line sampled at mid-bit.
///
/// `end_cycle` is the first cycle not covered by the recording; a frame
/// whose stop-bit sample falls at or after it is reported as truncated.
pub fn decode_uart(edges: &[(u64, bool)], div: u32, end_cycle: u64) -> Result<Vec<u8>, FramingError> {
    let div = div as u64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < edges.len() {
        let (start, level) = edges[i];
        if level {
            i += 1;
            continue;
        }
        let sample = |k: u64| start + div / 2 + k * div;
        if sample(9) >= end_cycle {
            return Err(FramingError {
                event_index: i,
                kind: FramingKind::Truncated,
            });
        }
        if level_at(edges, sample(0)) {
            // glitch, not a start bit
            i += 1;
            continue;
        }
        let mut byte = 0u8;
        for k in 1..=8 {
            if level_at(edges, sample(k)) {
                byte |= 1 << (k - 1);
            }
        }
        if !level_at(edges, sample(9)) {
            return Err(FramingError {
                event_index: i,
                kind: FramingKind::StopBitLow,
            });
        }
        out.push(byte);
        let resume = sample(9);
        while i < edges.len() && edges[i].0 <= resume {
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NeoDecodeError {
    #[error("pulse at event {0} is not clearly T0H or T1H")]
    AmbiguousPulse(usize),
    #[error("frame ending at event {0} stops mid-byte")]
    PartialByte(usize),
    #[error("frame ending at event {0} stops mid-color")]
    PartialColor(usize),
    #[error("event {0} does not alternate with its predecessor")]
    NotAlternating(usize),
    #[error("recording ends while the line is high")]
    UnterminatedPulse,
}

/// High-pulse widths in cycles, in order.
pub fn high_pulses(edges: &[(u64, bool)]) -> Vec<u64> {
    edges
        .windows(2)
        .filter(|w| w[0].1 && !w[1].1)
        .map(|w| w[1].0 - w[0].0)
        .collect()
}

/// Split a NeoPixel line into frames of 0xRRGGBB colors.
///
/// Each high pulse is classified by whichever of `t0h`/`t1h` it is closer
/// to; a pulse equidistant from both, or more than 25% away from the closer
/// one, is rejected. A low stretch of at least `treset / 2` ends a frame.
pub fn decode_neopixel(edges: &[(u64, bool)], timing: &NeoTiming) -> Result<Vec<Vec<u32>>, NeoDecodeError> {
    let t0 = timing.t0h as u64;
    let t1 = timing.t1h as u64;
    let split = (timing.treset as u64).div_ceil(2);

    let mut frames = Vec::new();
    let mut bits: Vec<bool> = Vec::new();
    let mut last_fall: Option<u64> = None;
    let mut i = 0;

    let close = |bits: &mut Vec<bool>, frames: &mut Vec<Vec<u32>>, at: usize| -> Result<(), NeoDecodeError> {
        if bits.is_empty() {
            return Ok(());
        }
        if !bits.len().is_multiple_of(8) {
            return Err(NeoDecodeError::PartialByte(at));
        }
        if !bits.len().is_multiple_of(24) {
            return Err(NeoDecodeError::PartialColor(at));
        }
        let colors = bits
            .chunks(24)
            .map(|c| {
                let grb = c.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
                let g = grb >> 16;
                let r = (grb >> 8) & 0xFF;
                let b = grb & 0xFF;
                (r << 16) | (g << 8) | b
            })
            .collect();
        frames.push(colors);
        bits.clear();
        Ok(())
    };

    while i < edges.len() {
        let (rise, level) = edges[i];
        if !level {
            return Err(NeoDecodeError::NotAlternating(i));
        }
        let Some(&(fall, fl)) = edges.get(i + 1) else {
            return Err(NeoDecodeError::UnterminatedPulse);
        };
        if fl {
            return Err(NeoDecodeError::NotAlternating(i + 1));
        }
        if let Some(prev) = last_fall {
            if rise - prev >= split {
                close(&mut bits, &mut frames, i - 1)?;
            }
        }
        let w = fall - rise;
        let (d0, d1) = (w.abs_diff(t0), w.abs_diff(t1));
        let (bit, nominal, d) = if d0 < d1 { (false, t0, d0) } else { (true, t1, d1) };
        if d0 == d1 || 4 * d > nominal {
            return Err(NeoDecodeError::AmbiguousPulse(i));
        }
        bits.push(bit);
        last_fall = Some(fall);
        i += 2;
    }
    close(&mut bits, &mut frames, edges.len().saturating_sub(1))?;
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: NeoTiming = NeoTiming {
        t0h: 7,
        t1h: 14,
        tbit: 25,
        treset: 1000,
    };

    /// Hand-built 8N1 edges for one byte starting at `at`.
    fn uart_edges(bytes: &[u8], div: u64, at: u64) -> Vec<(u64, bool)> {
        let mut edges = Vec::new();
        let mut level = true;
        let mut t = at;
        for &b in bytes {
            let mut levels = vec![false];
            levels.extend((0..8).map(|i| b >> i & 1 == 1));
            levels.push(true);
            for l in levels {
                if l != level {
                    edges.push((t, l));
                    level = l;
                }
                t += div;
            }
        }
        edges
    }

    #[test]
    fn idle_line_decodes_to_nothing() {
        assert_eq!(decode_uart(&[], 16, 1000), Ok(vec![]));
        assert_eq!(decode_neopixel(&[], &T), Ok(vec![]));
    }

    #[test]
    fn uart_a5() {
        let e = uart_edges(&[0xA5], 16, 3);
        assert_eq!(decode_uart(&e, 16, 1000), Ok(vec![0xA5]));
    }

    #[test]
    fn uart_truncated_frame() {
        let e = uart_edges(&[0xA5, 0x3C], 16, 0);
        let err = decode_uart(&e, 16, 160 + 80).unwrap_err();
        assert_eq!(err.kind, FramingKind::Truncated);
    }

    #[test]
    fn uart_low_stop_bit() {
        // start + 0x00 + low stop: one long low pulse
        let e = vec![(0, false), (200, true)];
        let err = decode_uart(&e, 16, 1000).unwrap_err();
        assert_eq!(
            err,
            FramingError {
                event_index: 0,
                kind: FramingKind::StopBitLow
            }
        );
    }

    fn neo_edges(widths: &[u64], gap_after: Option<usize>) -> Vec<(u64, bool)> {
        let mut t = 0;
        let mut e = Vec::new();
        for (i, &w) in widths.iter().enumerate() {
            e.push((t, true));
            e.push((t + w, false));
            t += 25;
            if gap_after == Some(i) {
                t += 1000;
            }
        }
        e
    }

    #[test]
    fn neopixel_single_green() {
        let mut widths = vec![14; 8];
        widths.extend([7; 16]);
        assert_eq!(decode_neopixel(&neo_edges(&widths, None), &T), Ok(vec![vec![0x00FF00]]));
    }

    #[test]
    fn neopixel_two_frames() {
        let widths = [14u64; 48];
        let frames = decode_neopixel(&neo_edges(&widths, Some(23)), &T).unwrap();
        assert_eq!(frames, vec![vec![0xFFFFFF], vec![0xFFFFFF]]);
    }

    #[test]
    fn equidistant_pulse_is_ambiguous() {
        // (7 + 14) / 2 is not an integer here, so use t0h=6, t1h=14 -> 10
        let t = NeoTiming { t0h: 6, ..T };
        let e = neo_edges(&[10], None);
        assert_eq!(decode_neopixel(&e, &t), Err(NeoDecodeError::AmbiguousPulse(0)));
    }

    #[test]
    fn far_off_pulse_is_ambiguous() {
        let e = neo_edges(&[22], None);
        assert_eq!(decode_neopixel(&e, &T), Err(NeoDecodeError::AmbiguousPulse(0)));
    }

    #[test]
    fn partial_byte_detected() {
        let e = neo_edges(&[7; 5], None);
        assert!(matches!(decode_neopixel(&e, &T), Err(NeoDecodeError::PartialByte(_))));
        let e = neo_edges(&[7; 16], None);
        assert!(matches!(decode_neopixel(&e, &T), Err(NeoDecodeError::PartialColor(_))));
    }

    #[test]
    fn pulse_widths() {
        assert_eq!(high_pulses(&neo_edges(&[7, 14], None)), vec![7, 14]);
    }
}
