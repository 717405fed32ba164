use super::MdpError;
use crate::sim::{ControlInput, UavSpec};

pub const NUM_ACTIONS: usize = 9;

/// Index of `(turn, accel) = (0, 0)`.
pub const NOOP_ACTION: usize = 4;

/// Maps an index to its `(turn, accel)` pair, each in `{-1, 0, 1}`.
/// `k = 3·(turn + 1) + (accel + 1)`.
pub fn action_components(k: usize) -> Result<(i8, i8), MdpError> {
    if k >= NUM_ACTIONS {
        return Err(MdpError::ActionOutOfRange(k));
    }
    Ok(((k / 3) as i8 - 1, (k % 3) as i8 - 1))
}

pub fn encode_action(turn: i8, accel: i8) -> usize {
    debug_assert!((-1..=1).contains(&turn) && (-1..=1).contains(&accel));
    (3 * (turn + 1) + (accel + 1)) as usize
}

pub fn decode_action(k: usize, spec: &UavSpec) -> Result<ControlInput, MdpError> {
    let (turn, accel) = action_components(k)?;
    Ok(ControlInput::new(accel as f64 * spec.max_accel, turn as f64 * spec.max_turn_rate))
}

/// Nearest grid action for a continuous control; each component is rounded
/// at half its limit. Used to label demonstrations driven by non-discrete
/// actors.
pub fn quantize_control(input: ControlInput, spec: &UavSpec) -> usize {
    let level = |v: f64, limit: f64| -> i8 {
        let r = v / limit;
        if r >= 0.5 {
            1
        } else if r <= -0.5 {
            -1
        } else {
            0
        }
    };
    encode_action(level(input.d_heading, spec.max_turn_rate), level(input.d_speed, spec.max_accel))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> UavSpec {
        UavSpec { max_speed: 30.0, min_speed: 0.0, max_turn_rate: 0.5, max_accel: 5.0 }
    }

    #[test]
    fn center_is_noop_and_corner_is_min() {
        assert_eq!(decode_action(NOOP_ACTION, &spec()).unwrap(), ControlInput::ZERO);
        assert_eq!(decode_action(0, &spec()).unwrap(), ControlInput::new(-5.0, -0.5));
        assert_eq!(decode_action(8, &spec()).unwrap(), ControlInput::new(5.0, 0.5));
        assert_eq!(decode_action(9, &spec()), Err(MdpError::ActionOutOfRange(9)));
    }

    #[test]
    fn bijection() {
        for k in 0..NUM_ACTIONS {
            let (turn, accel) = action_components(k).unwrap();
            assert_eq!(encode_action(turn, accel), k);
            assert_eq!(quantize_control(decode_action(k, &spec()).unwrap(), &spec()), k);
        }
    }

    #[test]
    fn quantize_rounds_at_half_limit() {
        assert_eq!(quantize_control(ControlInput::new(2.4, 0.26), &spec()), encode_action(1, 0));
        assert_eq!(quantize_control(ControlInput::new(-100.0, -0.1), &spec()), encode_action(0, -1));
    }
}
