//! Possession state tensors.
//!
//! Each possession becomes a fixed 10 × width matrix: one row per
//! non-ending action (most recent 10, zero-padded at the tail), each row
//! holding scaled scalar features, optional location or pressure columns,
//! and an 11-way one-hot of the action verb. The ending action never
//! enters the rows — its class is the training label.

use std::fmt;
use std::io::{Read as _, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::match_data::{ActionName, Event, Frame, Team};
use crate::pitch;
use crate::possession::{EndingAction, Possession};
use crate::pressure::PressureVector;

// ── Feature extraction ──────────────────────────────────────────────────

/// Number of tracked players expected in a frame.
const PLAYERS_PER_FRAME: usize = 22;
/// Location columns: 22 players × (x, y).
pub const LOCATION_COLS: usize = 44;
/// Scalar feature columns shared by every state type.
pub const SCALAR_COLS: usize = 6;
/// Rows per possession tensor.
pub const TENSOR_ROWS: usize = 10;

/// Per-action feature extras, matching one state type each.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureExtras {
    /// Scalar features only.
    None,
    /// 22 player locations, already scaled into the unit square.
    Locations(Box<[f64; LOCATION_COLS]>),
    /// Opponent pressure counts for the action's nearest frame.
    Pressure(PressureVector),
}

/// Features of one on-ball action. Scalars keep their physical units
/// (radians, meters, seconds); locations are already unit-scaled. Scaling
/// of the scalars happens when rows are written into a tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionFeatures {
    /// Angle subtended by the goal mouth from the action start, in
    /// [0, π].
    pub angle_to_goal: f64,
    /// Euclidean distance from the action start to the goal center.
    pub distance_to_goal: f64,
    /// Seconds left in the half, clamped at zero.
    pub time_remaining: f64,
    /// 1 for the home side, 0 for away.
    pub home_away: f64,
    /// 1 for a successful action, 0 otherwise.
    pub action_result: f64,
    /// Body part id: head 0, body 1, foot 2.
    pub body_id: f64,
    pub extras: FeatureExtras,
}

/// Compute the per-action features from an event and its extras.
///
/// Events timestamped past the end of the half clamp `time_remaining` to
/// zero (stoppage time) with a warning rather than failing.
pub fn extract_features(event: &Event, extras: FeatureExtras) -> ActionFeatures {
    let remaining = pitch::HALF_LENGTH_S - event.time_s;
    let time_remaining = if remaining < 0.0 {
        log::warn!(
            "event at {:.1}s of match {} half {} is past the regulation half; \
             clamping time_remaining to 0",
            event.time_s,
            event.match_id,
            event.half
        );
        0.0
    } else {
        remaining
    };
    ActionFeatures {
        angle_to_goal: pitch::angle_to_goal(event.x_start, event.y_start),
        distance_to_goal: pitch::distance_to_goal(event.x_start, event.y_start),
        time_remaining,
        home_away: if event.team == Team::Home { 1.0 } else { 0.0 },
        action_result: event.result.as_flag(),
        body_id: event.body.id() as f64,
        extras,
    }
}

/// Flatten a frame's 22 player positions into the location feature block,
/// scaled into the unit square and ordered by (team, player_id) so the
/// encoding is independent of roster order in the log.
pub fn frame_locations(frame: &Frame) -> Result<Box<[f64; LOCATION_COLS]>> {
    if frame.players.len() != PLAYERS_PER_FRAME {
        return Err(Error::Validation(format!(
            "frame at {:.1}s of match {} has {} players, expected {}",
            frame.time_s,
            frame.match_id,
            frame.players.len(),
            PLAYERS_PER_FRAME
        )));
    }
    let mut order: Vec<usize> = (0..frame.players.len()).collect();
    order.sort_by(|&a, &b| {
        let pa = &frame.players[a];
        let pb = &frame.players[b];
        (pa.team, pa.player_id.as_str()).cmp(&(pb.team, pb.player_id.as_str()))
    });
    let mut out = Box::new([0.0; LOCATION_COLS]);
    for (slot, &idx) in order.iter().enumerate() {
        let p = &frame.players[idx];
        out[slot * 2] = p.x / pitch::PITCH_LENGTH;
        out[slot * 2 + 1] = p.y / pitch::PITCH_WIDTH;
    }
    Ok(out)
}

/// Index of the entry in a sorted time array nearest to `t`; the earlier
/// entry wins exact midpoints. `None` on an empty array.
pub fn nearest_time_index(times: &[f64], t: f64) -> Option<usize> {
    if times.is_empty() {
        return None;
    }
    let insert = times.partition_point(|&x| x < t);
    if insert == 0 {
        return Some(0);
    }
    if insert == times.len() {
        return Some(times.len() - 1);
    }
    let before = t - times[insert - 1];
    let after = times[insert] - t;
    if after < before {
        Some(insert)
    } else {
        Some(insert - 1)
    }
}

// ── State types ─────────────────────────────────────────────────────────

/// The three per-action encodings. All share the scalar block and the
/// 11-way action one-hot; II adds 44 location columns, III adds the three
/// pressure counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateType {
    I,
    II,
    III,
}

impl StateType {
    /// Row width: scalars + extras + action one-hot.
    pub const fn width(self) -> usize {
        match self {
            StateType::I => SCALAR_COLS + ActionName::COUNT,
            StateType::II => SCALAR_COLS + LOCATION_COLS + ActionName::COUNT,
            StateType::III => SCALAR_COLS + 3 + ActionName::COUNT,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StateType::I => "I",
            StateType::II => "II",
            StateType::III => "III",
        }
    }

    pub fn parse(s: &str) -> Option<StateType> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Some(StateType::I),
            "II" | "2" => Some(StateType::II),
            "III" | "3" => Some(StateType::III),
            _ => None,
        }
    }

    /// The widths are pairwise distinct, so a stacked tensor identifies
    /// its own encoding.
    pub fn from_width(width: usize) -> Option<StateType> {
        [StateType::I, StateType::II, StateType::III]
            .into_iter()
            .find(|t| t.width() == width)
    }
}

impl fmt::Display for StateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// ── Tensor assembly ─────────────────────────────────────────────────────

/// One possession as a padded training example.
#[derive(Debug, Clone, PartialEq)]
pub struct PossessionState {
    /// 10 × width, rows past `true_length` all zero.
    pub tensor: Array2<f64>,
    /// Populated row count, ≤ 10.
    pub true_length: usize,
    pub label: EndingAction,
}

fn write_row(row: &mut [f64], features: &ActionFeatures, action: ActionName, ty: StateType) {
    // Scalars scaled into [0, 1] so every column trains on one scale:
    // angle by its π range, distance by the far-corner maximum, time by
    // the half length, body id by its 0..2 range. Flags are already 0/1.
    row[0] = features.angle_to_goal / std::f64::consts::PI;
    row[1] = features.distance_to_goal / pitch::MAX_GOAL_DISTANCE;
    row[2] = features.time_remaining / pitch::HALF_LENGTH_S;
    row[3] = features.home_away;
    row[4] = features.action_result;
    row[5] = features.body_id / 2.0;
    let onehot_at = match (ty, &features.extras) {
        (StateType::I, FeatureExtras::None) => SCALAR_COLS,
        (StateType::II, FeatureExtras::Locations(locs)) => {
            row[SCALAR_COLS..SCALAR_COLS + LOCATION_COLS].copy_from_slice(&locs[..]);
            SCALAR_COLS + LOCATION_COLS
        }
        (StateType::III, FeatureExtras::Pressure(z)) => {
            let n = crate::pressure::N_OPPONENTS as f64;
            row[SCALAR_COLS] = z.z1 as f64 / n;
            row[SCALAR_COLS + 1] = z.z2 as f64 / n;
            row[SCALAR_COLS + 2] = z.z3 as f64 / n;
            SCALAR_COLS + 3
        }
        // Callers validate extras before rows are written.
        _ => unreachable!("extras variant checked against state type"),
    };
    row[onehot_at + action.index()] = 1.0;
}

fn extras_match(ty: StateType, extras: &FeatureExtras) -> bool {
    matches!(
        (ty, extras),
        (StateType::I, FeatureExtras::None)
            | (StateType::II, FeatureExtras::Locations(_))
            | (StateType::III, FeatureExtras::Pressure(_))
    )
}

/// Assemble one possession tensor.
///
/// `features` aligns one-to-one with the possession's owner actions in
/// time order (the ending action is excluded — its result is observed
/// only after the possession resolves, so it exists here only as the
/// label). Possessions longer than 10 actions keep the most recent 10;
/// shorter ones zero-pad at the tail. A possession whose only event is
/// its ending yields an all-padding tensor.
pub fn build_state(
    possession: &Possession,
    state_type: StateType,
    features: &[ActionFeatures],
) -> Result<PossessionState> {
    let n_actions = possession.action_count();
    if features.len() != n_actions {
        return Err(Error::Validation(format!(
            "possession {} of match {} has {} actions but {} feature rows",
            possession.index_in_match,
            possession.match_id,
            n_actions,
            features.len()
        )));
    }
    if let Some(bad) = features.iter().find(|f| !extras_match(state_type, &f.extras)) {
        return Err(Error::Validation(format!(
            "feature extras {:?} do not fit state type {}",
            std::mem::discriminant(&bad.extras),
            state_type
        )));
    }

    let width = state_type.width();
    let mut tensor = Array2::<f64>::zeros((TENSOR_ROWS, width));
    let skip = n_actions.saturating_sub(TENSOR_ROWS);
    let true_length = n_actions - skip;
    for (slot, (event, feat)) in
        possession.actions().zip(features).skip(skip).enumerate()
    {
        let mut row = tensor.row_mut(slot);
        write_row(row.as_slice_mut().expect("contiguous row"), feat, event.action, state_type);
    }
    Ok(PossessionState { tensor, true_length, label: possession.ending })
}

/// Count populated rows by scanning padding from the tail. Valid because
/// every populated row carries a 1 in its one-hot block, so all-zero rows
/// are exactly the padding.
pub fn recover_true_length(tensor: ArrayView2<'_, f64>) -> usize {
    let mut len = tensor.nrows();
    while len > 0 && tensor.row(len - 1).iter().all(|&v| v == 0.0) {
        len -= 1;
    }
    len
}

// ── Stacked corpus ──────────────────────────────────────────────────────

/// Every possession tensor of a corpus in one block, aligned with labels
/// and true lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedStates {
    pub state_type: StateType,
    /// possessions × 10 × width.
    pub data: Array3<f64>,
    pub labels: Vec<EndingAction>,
    pub true_lengths: Vec<usize>,
}

impl StackedStates {
    pub fn len(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Stack per-possession states in input order.
pub fn stack_states(states: &[PossessionState], state_type: StateType) -> Result<StackedStates> {
    let width = state_type.width();
    let mut data = Array3::<f64>::zeros((states.len(), TENSOR_ROWS, width));
    let mut labels = Vec::with_capacity(states.len());
    let mut true_lengths = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        if s.tensor.ncols() != width {
            return Err(Error::WidthMismatch { expected: width, got: s.tensor.ncols() });
        }
        data.index_axis_mut(ndarray::Axis(0), i).assign(&s.tensor);
        labels.push(s.label);
        true_lengths.push(s.true_length);
    }
    Ok(StackedStates { state_type, data, labels, true_lengths })
}

// ── Binary dump ─────────────────────────────────────────────────────────

/// Write the stacked tensor: a text header `m,10,width` on its own line,
/// then row-major little-endian 32-bit floats.
pub fn write_tensor(path: &Path, stacked: &StackedStates) -> Result<()> {
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let shape = stacked.data.shape();
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(ioerr)?);
    writeln!(file, "{},{},{}", shape[0], shape[1], shape[2]).map_err(ioerr)?;
    for &v in stacked.data.iter() {
        file.write_all(&(v as f32).to_le_bytes()).map_err(ioerr)?;
    }
    file.flush().map_err(ioerr)
}

/// Read a tensor dump back. True lengths are recovered from the padding;
/// values round-trip at f32 precision.
pub fn read_tensor(path: &Path) -> Result<(Array3<f64>, Vec<usize>)> {
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let origin = path.display().to_string();
    let bytes = std::fs::read(path).map_err(ioerr)?;
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(&origin, 1, "missing tensor header line"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::parse(&origin, 1, "tensor header is not UTF-8"))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(&origin, 1, format!("bad tensor header {header:?}")))?;
    let [m, rows, width] = dims[..] else {
        return Err(Error::parse(&origin, 1, format!("expected 3 dimensions, got {}", dims.len())));
    };
    if rows != TENSOR_ROWS {
        return Err(Error::parse(
            &origin,
            1,
            format!("expected {TENSOR_ROWS} rows per possession, header says {rows}"),
        ));
    }
    let payload = &bytes[header_end + 1..];
    let expected = m * rows * width * 4;
    if payload.len() != expected {
        return Err(Error::parse(
            &origin,
            1,
            format!("tensor payload is {} bytes, header implies {expected}", payload.len()),
        ));
    }
    let mut reader = std::io::Cursor::new(payload);
    let mut values = Vec::with_capacity(m * rows * width);
    let mut buf = [0u8; 4];
    for _ in 0..m * rows * width {
        reader.read_exact(&mut buf).map_err(ioerr)?;
        values.push(f32::from_le_bytes(buf) as f64);
    }
    let data = Array3::from_shape_vec((m, rows, width), values)
        .expect("length checked against header");
    let true_lengths =
        (0..m).map(|i| recover_true_length(data.index_axis(ndarray::Axis(0), i))).collect();
    Ok((data, true_lengths))
}

/// Write labels as one class index per line, in tensor order.
pub fn write_labels(path: &Path, labels: &[EndingAction]) -> Result<()> {
    let mut text = String::new();
    for l in labels {
        text.push_str(&l.label().to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_labels(path: &Path) -> Result<Vec<EndingAction>> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(origin.clone(), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            let n: usize = l
                .trim()
                .parse()
                .map_err(|_| Error::parse(&origin, idx + 1, format!("bad label {l:?}")))?;
            EndingAction::from_label(n)
                .ok_or_else(|| Error::parse(&origin, idx + 1, format!("label {n} out of range")))
        })
        .collect()
}

// ── Tests ───────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::match_data::{ActionResult, BodyPart, PlayerPos};

    fn event(action: ActionName, x: f64, y: f64, time_s: f64, team: Team) -> Event {
        Event {
            match_id: "m0001".into(),
            team,
            player_id: "p01".into(),
            action,
            x_start: x,
            y_start: y,
            x_end: x,
            y_end: y,
            result: ActionResult::Successful,
            body: BodyPart::Foot,
            time_s,
            half: 1,
        }
    }

    fn possession_of(n_actions: usize, ending: ActionName) -> Possession {
        let events: Vec<Event> = (0..n_actions)
            .map(|i| event(ActionName::Pass, 30.0 + i as f64, 34.0, 10.0 + i as f64, Team::Home))
            .collect();
        let ending_event =
            event(ending, 90.0, 34.0, 10.0 + n_actions as f64, Team::Home);
        let ending_kind = match ending {
            ActionName::Shot => EndingAction::Shot,
            ActionName::Foul => EndingAction::Foul,
            ActionName::BallOut => EndingAction::Out,
            _ => EndingAction::Error,
        };
        Possession {
            match_id: "m0001".into(),
            half: 1,
            index_in_match: 0,
            team: Team::Home,
            events,
            ending: ending_kind,
            ending_event,
        }
    }

    fn features_for(p: &Possession, extras: fn() -> FeatureExtras) -> Vec<ActionFeatures> {
        p.actions().map(|e| extract_features(e, extras())).collect()
    }

    #[test]
    fn distance_and_angle_match_hand_checked_points() {
        let e = event(ActionName::Shot, 94.0, 34.0, 100.0, Team::Home);
        let f = extract_features(&e, FeatureExtras::None);
        assert!((f.distance_to_goal - 11.0).abs() < 1e-12);
        assert!(f.angle_to_goal > 0.0 && f.angle_to_goal < std::f64::consts::PI);

        let on_line = event(ActionName::Shot, 105.0, 34.0, 100.0, Team::Home);
        let f = extract_features(&on_line, FeatureExtras::None);
        assert_eq!(f.distance_to_goal, 0.0);
        assert!((f.angle_to_goal - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn time_remaining_full_at_kickoff_and_clamped_past_regulation() {
        let kickoff = event(ActionName::Pass, 52.0, 34.0, 0.0, Team::Home);
        assert_eq!(extract_features(&kickoff, FeatureExtras::None).time_remaining, 2700.0);

        let stoppage = event(ActionName::Pass, 52.0, 34.0, 2760.0, Team::Home);
        assert_eq!(extract_features(&stoppage, FeatureExtras::None).time_remaining, 0.0);
    }

    #[test]
    fn angle_bounds_hold_across_the_pitch() {
        for xi in 0..=21 {
            for yi in 0..=13 {
                let e = event(ActionName::Pass, xi as f64 * 5.0, yi as f64 * 5.0, 50.0, Team::Away);
                let f = extract_features(&e, FeatureExtras::None);
                assert!((0.0..=std::f64::consts::PI).contains(&f.angle_to_goal));
                assert!(f.distance_to_goal >= 0.0);
            }
        }
    }

    #[test]
    fn widths_match_per_type() {
        assert_eq!(StateType::I.width(), 17);
        assert_eq!(StateType::II.width(), 61);
        assert_eq!(StateType::III.width(), 20);
    }

    #[test]
    fn state_type_parses_back_from_display() {
        for ty in [StateType::I, StateType::II, StateType::III] {
            assert_eq!(StateType::parse(ty.as_str()), Some(ty));
        }
        assert_eq!(StateType::parse("iii"), Some(StateType::III));
        assert_eq!(StateType::parse("IV"), None);
    }

    #[test]
    fn short_possession_pads_tail_and_keeps_label() {
        let p = possession_of(3, ActionName::Shot);
        let feats = features_for(&p, || FeatureExtras::None);
        let s = build_state(&p, StateType::I, &feats).unwrap();
        assert_eq!(s.true_length, 3);
        assert_eq!(s.label, EndingAction::Shot);
        for row in 0..3 {
            let onehot = s.tensor.row(row).iter().skip(SCALAR_COLS).sum::<f64>();
            assert_eq!(onehot, 1.0);
        }
        for row in 3..TENSOR_ROWS {
            assert!(s.tensor.row(row).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn long_possession_keeps_the_most_recent_ten() {
        let p = possession_of(14, ActionName::Foul);
        let feats = features_for(&p, || FeatureExtras::None);
        let s = build_state(&p, StateType::I, &feats).unwrap();
        assert_eq!(s.true_length, 10);
        assert_eq!(s.label, EndingAction::Foul);
        // Actions start at x = 30 + i; the kept block is actions 4..14,
        // so row 0 carries the fifth action's distance, row 9 the last.
        for (row, action_idx) in (4..14).enumerate() {
            let expected =
                pitch::distance_to_goal(30.0 + action_idx as f64, 34.0) / pitch::MAX_GOAL_DISTANCE;
            let got = s.tensor[(row, 1)];
            assert!((got - expected).abs() < 1e-12, "row {row}: {got} vs {expected}");
        }
    }

    #[test]
    fn ending_only_possession_is_all_padding() {
        let p = possession_of(0, ActionName::BallOut);
        let s = build_state(&p, StateType::I, &[]).unwrap();
        assert_eq!(s.true_length, 0);
        assert_eq!(s.label, EndingAction::Out);
        assert!(s.tensor.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_block_identical_across_state_types() {
        let p = possession_of(5, ActionName::Shot);
        let s1 = build_state(&p, StateType::I, &features_for(&p, || FeatureExtras::None)).unwrap();
        let s2 = build_state(
            &p,
            StateType::II,
            &features_for(&p, || FeatureExtras::Locations(Box::new([0.5; LOCATION_COLS]))),
        )
        .unwrap();
        let s3 = build_state(
            &p,
            StateType::III,
            &features_for(&p, || FeatureExtras::Pressure(PressureVector { z1: 4, z2: 4, z3: 3 })),
        )
        .unwrap();
        for row in 0..TENSOR_ROWS {
            for col in 0..SCALAR_COLS {
                assert_eq!(s1.tensor[(row, col)], s2.tensor[(row, col)]);
                assert_eq!(s1.tensor[(row, col)], s3.tensor[(row, col)]);
            }
        }
        // Pressure counts land scaled by the opponent count.
        assert!((s3.tensor[(0, SCALAR_COLS)] - 4.0 / 11.0).abs() < 1e-12);
        assert!((s3.tensor[(0, SCALAR_COLS + 2)] - 3.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn rebuilding_is_bit_identical() {
        let p = possession_of(7, ActionName::Shot);
        let feats = features_for(&p, || FeatureExtras::Pressure(PressureVector { z1: 5, z2: 3, z3: 3 }));
        let a = build_state(&p, StateType::III, &feats).unwrap();
        let b = build_state(&p, StateType::III, &feats).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_extras_or_length_is_an_error() {
        let p = possession_of(2, ActionName::Shot);
        let wrong_variant = features_for(&p, || FeatureExtras::None);
        match build_state(&p, StateType::III, &wrong_variant) {
            Err(Error::Validation(_)) => {}
            other => panic!("expected validation error, got {other:?}"),
        }
        let too_few = &wrong_variant[..1];
        match build_state(&p, StateType::I, too_few) {
            Err(Error::Validation(_)) => {}
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn frame_locations_sorted_and_scaled() {
        let mut players = Vec::new();
        for i in 0..11 {
            players.push(PlayerPos {
                player_id: format!("h{:02}", 11 - i),
                team: Team::Home,
                x: i as f64 * 9.0,
                y: 30.0,
            });
        }
        for i in 0..11 {
            players.push(PlayerPos {
                player_id: format!("a{:02}", i + 1),
                team: Team::Away,
                x: i as f64 * 9.0,
                y: 40.0,
            });
        }
        let frame = Frame {
            match_id: "m0001".into(),
            time_s: 5.0,
            players: players.clone(),
            ball_holder: None,
        };
        let locs = frame_locations(&frame).unwrap();
        assert!(locs.iter().all(|v| (0.0..=1.0).contains(v)));
        // h01 sorts first; it was pushed last among home players (i = 10).
        assert!((locs[0] - 90.0 / 105.0).abs() < 1e-12);

        // Shuffling the roster must not change the encoding.
        let mut shuffled = players;
        shuffled.reverse();
        shuffled.swap(3, 17);
        let frame2 = Frame {
            match_id: "m0001".into(),
            time_s: 5.0,
            players: shuffled,
            ball_holder: None,
        };
        assert_eq!(locs, frame_locations(&frame2).unwrap());
    }

    #[test]
    fn frame_locations_rejects_short_rosters() {
        let frame = Frame {
            match_id: "m0001".into(),
            time_s: 5.0,
            players: vec![PlayerPos {
                player_id: "h01".into(),
                team: Team::Home,
                x: 1.0,
                y: 1.0,
            }],
            ball_holder: None,
        };
        match frame_locations(&frame) {
            Err(Error::Validation(_)) => {}
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn nearest_time_index_prefers_earlier_on_midpoints() {
        let times = [10.0, 20.0, 30.0];
        assert_eq!(nearest_time_index(&times, 3.0), Some(0));
        assert_eq!(nearest_time_index(&times, 14.0), Some(0));
        assert_eq!(nearest_time_index(&times, 15.0), Some(0));
        assert_eq!(nearest_time_index(&times, 16.0), Some(1));
        assert_eq!(nearest_time_index(&times, 20.0), Some(1));
        assert_eq!(nearest_time_index(&times, 99.0), Some(2));
        assert_eq!(nearest_time_index(&[], 5.0), None);
    }

    #[test]
    fn stack_dump_and_reload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut states = Vec::new();
        for n in [0usize, 3, 12] {
            let p = possession_of(n, ActionName::Shot);
            let feats =
                features_for(&p, || FeatureExtras::Pressure(PressureVector { z1: 6, z2: 3, z3: 2 }));
            states.push(build_state(&p, StateType::III, &feats).unwrap());
        }
        let stacked = stack_states(&states, StateType::III).unwrap();
        assert_eq!(stacked.data.shape(), &[3, TENSOR_ROWS, 20]);

        let tensor_path = dir.path().join("states.bin");
        let label_path = dir.path().join("labels.txt");
        write_tensor(&tensor_path, &stacked).unwrap();
        write_labels(&label_path, &stacked.labels).unwrap();

        let (data, lengths) = read_tensor(&tensor_path).unwrap();
        assert_eq!(data.shape(), stacked.data.shape());
        assert_eq!(lengths, vec![0, 3, 10]);
        for (a, b) in data.iter().zip(stacked.data.iter()) {
            assert!((a - b).abs() < 1e-6, "f32 round-trip drift: {a} vs {b}");
        }
        assert_eq!(read_labels(&label_path).unwrap(), stacked.labels);
    }

    #[test]
    fn truncated_tensor_payload_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"2,10,17\n\x00\x00").unwrap();
        match read_tensor(&path) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
