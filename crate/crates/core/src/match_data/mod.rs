//! Event and tracking-frame domain types plus log parsing.
//!
//! Two external formats live here:
//!
//! * **Event logs** — UTF-8 CSV with one header line and the columns
//!   `match_id,team,player_id,action_name,x_start,y_start,x_end,y_end,
//!   result,body_id,time_s,half`. `time_s` counts from the start of the
//!   half. Unknown action names degrade to [`ActionName::Other`]; every
//!   other column parses strictly, with errors reported by line number.
//! * **Frame logs** — one line per 1 Hz tracking snapshot:
//!   `match_id,time_s,holder_id` followed by 22 `player_id:team:x:y`
//!   groups. `time_s` is absolute match time (second halves resume at
//!   2700), and an empty `holder_id` means no player is on the ball.

pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pitch;

/// Hard cap on plausible player speed; finite differences are clamped to it.
pub const MAX_SPEED: f64 = 12.0;

// ── Vocabulary ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Team {
    Home,
    Away,
}

impl Team {
    pub fn opponent(self) -> Team {
        match self {
            Team::Home => Team::Away,
            Team::Away => Team::Home,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Team::Home => "home",
            Team::Away => "away",
        }
    }

    pub fn parse(s: &str) -> Option<Team> {
        match s {
            "home" => Some(Team::Home),
            "away" => Some(Team::Away),
            _ => None,
        }
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed on-ball action vocabulary; anything unrecognized becomes `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionName {
    Pass,
    Cross,
    Dribble,
    Shot,
    Clearance,
    BallOut,
    Foul,
    Tackle,
    Interception,
    BadBallControl,
    Other,
}

impl ActionName {
    pub const COUNT: usize = 11;

    /// Stable index used for one-hot encodings and serialization order.
    pub fn index(self) -> usize {
        match self {
            ActionName::Pass => 0,
            ActionName::Cross => 1,
            ActionName::Dribble => 2,
            ActionName::Shot => 3,
            ActionName::Clearance => 4,
            ActionName::BallOut => 5,
            ActionName::Foul => 6,
            ActionName::Tackle => 7,
            ActionName::Interception => 8,
            ActionName::BadBallControl => 9,
            ActionName::Other => 10,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionName::Pass => "pass",
            ActionName::Cross => "cross",
            ActionName::Dribble => "dribble",
            ActionName::Shot => "shot",
            ActionName::Clearance => "clearance",
            ActionName::BallOut => "ball_out",
            ActionName::Foul => "foul",
            ActionName::Tackle => "tackle",
            ActionName::Interception => "interception",
            ActionName::BadBallControl => "bad_ball_control",
            ActionName::Other => "other",
        }
    }

    /// Strict lookup; callers decide whether unknown names are an error.
    pub fn parse(s: &str) -> Option<ActionName> {
        Some(match s {
            "pass" => ActionName::Pass,
            "cross" => ActionName::Cross,
            "dribble" => ActionName::Dribble,
            "shot" => ActionName::Shot,
            "clearance" => ActionName::Clearance,
            "ball_out" => ActionName::BallOut,
            "foul" => ActionName::Foul,
            "tackle" => ActionName::Tackle,
            "interception" => ActionName::Interception,
            "bad_ball_control" => ActionName::BadBallControl,
            "other" => ActionName::Other,
            _ => return None,
        })
    }
}

impl fmt::Display for ActionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionResult {
    Successful,
    Unsuccessful,
}

impl ActionResult {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionResult::Successful => "successful",
            ActionResult::Unsuccessful => "unsuccessful",
        }
    }

    pub fn parse(s: &str) -> Option<ActionResult> {
        match s {
            "successful" => Some(ActionResult::Successful),
            "unsuccessful" => Some(ActionResult::Unsuccessful),
            _ => None,
        }
    }

    pub fn as_flag(self) -> f64 {
        match self {
            ActionResult::Successful => 1.0,
            ActionResult::Unsuccessful => 0.0,
        }
    }
}

/// Body part used for the action: head 0, body 1, foot 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BodyPart {
    Head,
    Body,
    Foot,
}

impl BodyPart {
    pub fn id(self) -> u8 {
        match self {
            BodyPart::Head => 0,
            BodyPart::Body => 1,
            BodyPart::Foot => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BodyPart::Head => "head",
            BodyPart::Body => "body",
            BodyPart::Foot => "foot",
        }
    }

    pub fn parse(s: &str) -> Option<BodyPart> {
        match s {
            "head" => Some(BodyPart::Head),
            "body" => Some(BodyPart::Body),
            "foot" => Some(BodyPart::Foot),
            _ => None,
        }
    }
}

// ── Records ─────────────────────────────────────────────────────────────

/// One on-ball event from the match log.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub match_id: String,
    pub team: Team,
    pub player_id: String,
    pub action: ActionName,
    pub x_start: f64,
    pub y_start: f64,
    pub x_end: f64,
    pub y_end: f64,
    pub result: ActionResult,
    pub body: BodyPart,
    /// Seconds from the start of the half.
    pub time_s: f64,
    pub half: u8,
}

impl Event {
    /// Absolute match time, folding the half offset in.
    pub fn absolute_time(&self) -> f64 {
        (self.half as f64 - 1.0) * pitch::HALF_LENGTH_S + self.time_s
    }
}

/// One tracked player position inside a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerPos {
    pub player_id: String,
    pub team: Team,
    pub x: f64,
    pub y: f64,
}

/// A 1 Hz tracking snapshot of all 22 players.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub match_id: String,
    /// Absolute match time in seconds.
    pub time_s: f64,
    pub players: Vec<PlayerPos>,
    pub ball_holder: Option<String>,
}

impl Frame {
    pub fn holder_index(&self) -> Option<usize> {
        let id = self.ball_holder.as_deref()?;
        self.players.iter().position(|p| p.player_id == id)
    }
}

/// Position plus finite-difference velocity for one player in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl PlayerState {
    pub fn speed(&self) -> f64 {
        (self.vx * self.vx + self.vy * self.vy).sqrt()
    }
}

// ── Event log parsing ───────────────────────────────────────────────────

pub const EVENT_HEADER: &str =
    "match_id,team,player_id,action_name,x_start,y_start,x_end,y_end,result,body_id,time_s,half";

/// Parse an event log file. Events come back ordered by
/// `(match_id, half, time_s)`; an empty file parses to an empty sequence.
pub fn parse_event_log(path: &Path) -> Result<Vec<Event>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_events_str(&text, &path.display().to_string())
}

/// Parse event CSV from memory; `origin` labels error messages.
pub fn parse_events_str(text: &str, origin: &str) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(events),
        Some((_, first)) if first.trim().is_empty() => {}
        Some((_, first)) => {
            if !first.starts_with("match_id,") {
                return Err(Error::parse(origin, 1, "missing event header line"));
            }
        }
    }
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        events.push(parse_event_line(line, origin, line_no)?);
    }
    events.sort_by(|a, b| {
        (a.match_id.as_str(), a.half)
            .cmp(&(b.match_id.as_str(), b.half))
            .then(a.time_s.total_cmp(&b.time_s))
    });
    Ok(events)
}

fn parse_event_line(line: &str, origin: &str, line_no: usize) -> Result<Event> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 12 {
        return Err(Error::parse(
            origin,
            line_no,
            format!("expected 12 columns, got {}", cols.len()),
        ));
    }
    let err = |msg: String| Error::parse(origin, line_no, msg);
    let team = Team::parse(cols[1]).ok_or_else(|| err(format!("unknown team `{}`", cols[1])))?;
    // Unknown verbs fold into Other so vocabulary drift upstream stays non-fatal.
    let action = ActionName::parse(cols[3]).unwrap_or(ActionName::Other);
    let coord = |s: &str, name: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| err(format!("bad {name} `{s}`")))
    };
    let x_start = coord(cols[4], "x_start")?;
    let y_start = coord(cols[5], "y_start")?;
    let x_end = coord(cols[6], "x_end")?;
    let y_end = coord(cols[7], "y_end")?;
    for (x, y, what) in [(x_start, y_start, "start"), (x_end, y_end, "end")] {
        if !pitch::in_bounds(x, y) {
            return Err(err(format!("{what} location ({x}, {y}) outside the pitch")));
        }
    }
    let result =
        ActionResult::parse(cols[8]).ok_or_else(|| err(format!("unknown result `{}`", cols[8])))?;
    let body =
        BodyPart::parse(cols[9]).ok_or_else(|| err(format!("unknown body part `{}`", cols[9])))?;
    let time_s = coord(cols[10], "time_s")?;
    if !time_s.is_finite() || time_s < 0.0 {
        return Err(err(format!("time_s must be non-negative, got {time_s}")));
    }
    let half: u8 = cols[11].parse().map_err(|_| err(format!("bad half `{}`", cols[11])))?;
    if half != 1 && half != 2 {
        return Err(err(format!("half must be 1 or 2, got {half}")));
    }
    Ok(Event {
        match_id: cols[0].to_string(),
        team,
        player_id: cols[2].to_string(),
        action,
        x_start,
        y_start,
        x_end,
        y_end,
        result,
        body,
        time_s,
        half,
    })
}

pub fn serialize_events(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 64 + EVENT_HEADER.len() + 1);
    out.push_str(EVENT_HEADER);
    out.push('\n');
    for e in events {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            e.match_id,
            e.team,
            e.player_id,
            e.action,
            e.x_start,
            e.y_start,
            e.x_end,
            e.y_end,
            e.result.as_str(),
            e.body.as_str(),
            e.time_s,
            e.half
        ));
    }
    out
}

pub fn write_event_log(path: &Path, events: &[Event]) -> Result<()> {
    std::fs::write(path, serialize_events(events))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

// ── Frame log parsing ───────────────────────────────────────────────────

/// Parse a tracking log. Frames come back ordered by `(match_id, time_s)`.
pub fn parse_frame_log(path: &Path) -> Result<Vec<Frame>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_frames_str(&text, &path.display().to_string())
}

pub fn parse_frames_str(text: &str, origin: &str) -> Result<Vec<Frame>> {
    let mut frames = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        frames.push(parse_frame_line(line, origin, idx + 1)?);
    }
    frames.sort_by(|a, b| {
        a.match_id.cmp(&b.match_id).then(a.time_s.total_cmp(&b.time_s))
    });
    Ok(frames)
}

fn parse_frame_line(line: &str, origin: &str, line_no: usize) -> Result<Frame> {
    let err = |msg: String| Error::parse(origin, line_no, msg);
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 3 + 22 {
        return Err(err(format!("expected 25 columns (3 + 22 players), got {}", cols.len())));
    }
    let time_s: f64 = cols[1].parse().map_err(|_| err(format!("bad time_s `{}`", cols[1])))?;
    if !time_s.is_finite() || time_s < 0.0 {
        return Err(err(format!("time_s must be non-negative, got {time_s}")));
    }
    let ball_holder = if cols[2].is_empty() { None } else { Some(cols[2].to_string()) };
    let mut players = Vec::with_capacity(22);
    for group in &cols[3..] {
        let parts: Vec<&str> = group.split(':').collect();
        if parts.len() != 4 {
            return Err(err(format!("bad player group `{group}`")));
        }
        let team =
            Team::parse(parts[1]).ok_or_else(|| err(format!("unknown team `{}`", parts[1])))?;
        let x: f64 = parts[2].parse().map_err(|_| err(format!("bad x `{}`", parts[2])))?;
        let y: f64 = parts[3].parse().map_err(|_| err(format!("bad y `{}`", parts[3])))?;
        if !pitch::in_bounds(x, y) {
            return Err(err(format!("player {} at ({x}, {y}) outside the pitch", parts[0])));
        }
        players.push(PlayerPos { player_id: parts[0].to_string(), team, x, y });
    }
    let frame = Frame { match_id: cols[0].to_string(), time_s, players, ball_holder };
    if let Some(id) = &frame.ball_holder {
        if frame.holder_index().is_none() {
            return Err(err(format!("holder `{id}` is not among the 22 tracked players")));
        }
    }
    Ok(frame)
}

pub fn serialize_frames(frames: &[Frame]) -> String {
    let mut out = String::with_capacity(frames.len() * 512);
    for f in frames {
        out.push_str(&f.match_id);
        out.push(',');
        out.push_str(&f.time_s.to_string());
        out.push(',');
        if let Some(h) = &f.ball_holder {
            out.push_str(h);
        }
        for p in &f.players {
            out.push(',');
            out.push_str(&format!("{}:{}:{}:{}", p.player_id, p.team, p.x, p.y));
        }
        out.push('\n');
    }
    out
}

pub fn write_frame_log(path: &Path, frames: &[Frame]) -> Result<()> {
    std::fs::write(path, serialize_frames(frames))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

// ── Velocities ──────────────────────────────────────────────────────────

/// Backward finite-difference velocities for every player of every frame.
///
/// Output is aligned one-to-one with the input slice; the inner vector is
/// indexed like `frame.players`. The first frame of each match copies the
/// second frame's velocity, and speeds are clamped to [`MAX_SPEED`] with
/// direction preserved.
pub fn compute_velocities(frames: &[Frame]) -> Result<Vec<Vec<PlayerState>>> {
    // Group input indices per match, preserving the caller's order.
    let mut by_match: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, f) in frames.iter().enumerate() {
        by_match.entry(f.match_id.as_str()).or_default().push(i);
    }

    let mut out: Vec<Vec<PlayerState>> = vec![Vec::new(); frames.len()];
    for (match_id, idxs) in by_match {
        if idxs.len() < 2 {
            return Err(Error::SingleFrame { match_id: match_id.to_string() });
        }
        for w in idxs.windows(2) {
            let (prev, cur) = (&frames[w[0]], &frames[w[1]]);
            let dt = cur.time_s - prev.time_s;
            if dt <= 0.0 {
                return Err(Error::Validation(format!(
                    "non-increasing frame times in match {match_id} at t={}",
                    cur.time_s
                )));
            }
            out[w[1]] = frame_velocities(prev, cur, dt, match_id)?;
        }
        // First frame: positions of frame 0, velocities copied from frame 1.
        let second = out[idxs[1]].clone();
        let first_frame = &frames[idxs[0]];
        out[idxs[0]] = first_frame
            .players
            .iter()
            .enumerate()
            .map(|(j, p)| PlayerState { x: p.x, y: p.y, vx: second[j].vx, vy: second[j].vy })
            .collect();
    }
    Ok(out)
}

fn frame_velocities(prev: &Frame, cur: &Frame, dt: f64, match_id: &str) -> Result<Vec<PlayerState>> {
    cur.players
        .iter()
        .map(|p| {
            let before = prev
                .players
                .iter()
                .find(|q| q.player_id == p.player_id)
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "player {} missing from the previous frame of match {match_id}",
                        p.player_id
                    ))
                })?;
            let mut vx = (p.x - before.x) / dt;
            let mut vy = (p.y - before.y) / dt;
            let speed = (vx * vx + vy * vy).sqrt();
            if speed > MAX_SPEED {
                let scale = MAX_SPEED / speed;
                vx *= scale;
                vy *= scale;
            }
            Ok(PlayerState { x: p.x, y: p.y, vx, vy })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event_line() -> &'static str {
        "m1,home,p7,pass,50,34,60,30,successful,foot,12.0,1"
    }

    #[test]
    fn parses_single_event() {
        let text = format!("{EVENT_HEADER}\n{}\n", event_line());
        let events = parse_events_str(&text, "test").unwrap();
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.match_id, "m1");
        assert_eq!(e.team, Team::Home);
        assert_eq!(e.action, ActionName::Pass);
        assert_eq!(e.x_start, 50.0);
        assert_eq!(e.y_end, 30.0);
        assert_eq!(e.result, ActionResult::Successful);
        assert_eq!(e.body, BodyPart::Foot);
        assert_eq!(e.half, 1);
    }

    #[test]
    fn empty_file_is_empty_sequence() {
        assert!(parse_events_str("", "test").unwrap().is_empty());
        assert!(parse_events_str(EVENT_HEADER, "test").unwrap().is_empty());
    }

    #[test]
    fn unknown_action_maps_to_other() {
        let text = format!(
            "{EVENT_HEADER}\nm1,home,p7,rabona,50,34,60,30,successful,foot,12.0,1\n"
        );
        let events = parse_events_str(&text, "test").unwrap();
        assert_eq!(events[0].action, ActionName::Other);
    }

    #[test]
    fn out_of_bounds_is_an_error_with_line_number() {
        let text = format!(
            "{EVENT_HEADER}\nm1,home,p7,pass,150,34,60,30,successful,foot,12.0,1\n"
        );
        let err = parse_events_str(&text, "test").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn events_sorted_by_match_half_time() {
        let text = format!(
            "{EVENT_HEADER}\n\
             m2,home,p1,pass,50,34,60,30,successful,foot,5,1\n\
             m1,home,p1,pass,50,34,60,30,successful,foot,9,2\n\
             m1,home,p1,pass,50,34,60,30,successful,foot,7,1\n\
             m1,home,p1,pass,50,34,60,30,successful,foot,3,1\n"
        );
        let events = parse_events_str(&text, "test").unwrap();
        let keys: Vec<(String, u8, f64)> =
            events.iter().map(|e| (e.match_id.clone(), e.half, e.time_s)).collect();
        assert_eq!(
            keys,
            vec![
                ("m1".into(), 1, 3.0),
                ("m1".into(), 1, 7.0),
                ("m1".into(), 2, 9.0),
                ("m2".into(), 1, 5.0),
            ]
        );
    }

    #[test]
    fn event_round_trip_is_identity() {
        let text = format!(
            "{EVENT_HEADER}\n\
             m1,home,p7,pass,50.25,34,60,30.5,successful,foot,12.125,1\n\
             m1,away,p18,shot,88,30,105,33,unsuccessful,head,700.5,2\n"
        );
        let once = parse_events_str(&text, "test").unwrap();
        let twice = parse_events_str(&serialize_events(&once), "test").unwrap();
        assert_eq!(once, twice);
    }

    fn tiny_frame(match_id: &str, t: f64, shift: f64) -> Frame {
        let mut players = Vec::new();
        for i in 0..11 {
            players.push(PlayerPos {
                player_id: format!("h{i:02}"),
                team: Team::Home,
                x: 10.0 + i as f64 * 2.0 + shift,
                y: 30.0,
            });
        }
        for i in 0..11 {
            players.push(PlayerPos {
                player_id: format!("a{i:02}"),
                team: Team::Away,
                x: 60.0 + i as f64 * 2.0,
                y: 40.0,
            });
        }
        Frame { match_id: match_id.into(), time_s: t, players, ball_holder: Some("h00".into()) }
    }

    #[test]
    fn frame_round_trip_is_identity() {
        let frames = vec![tiny_frame("m1", 10.0, 0.0), tiny_frame("m1", 11.0, 1.0)];
        let parsed = parse_frames_str(&serialize_frames(&frames), "test").unwrap();
        assert_eq!(frames, parsed);
    }

    #[test]
    fn constant_motion_velocity_is_exact() {
        let frames = vec![
            tiny_frame("m1", 10.0, 0.0),
            tiny_frame("m1", 11.0, 1.0),
            tiny_frame("m1", 12.0, 2.0),
        ];
        let vel = compute_velocities(&frames).unwrap();
        for states in &vel {
            assert_eq!(states[0].vx, 1.0);
            assert_eq!(states[0].vy, 0.0);
            // Away players are static in this construction.
            assert_eq!(states[11].vx, 0.0);
        }
    }

    #[test]
    fn first_frame_copies_second_velocity() {
        let frames = vec![tiny_frame("m1", 10.0, 0.0), tiny_frame("m1", 11.0, 3.0)];
        let vel = compute_velocities(&frames).unwrap();
        assert_eq!(vel[0][0].vx, vel[1][0].vx);
        assert_eq!(vel[0][0].x, 10.0); // position stays the first frame's own
    }

    #[test]
    fn speed_clamped_to_twelve() {
        let mut far = tiny_frame("m1", 11.0, 0.0);
        far.players[0].x = 80.0; // 70 m in one second
        let frames = vec![tiny_frame("m1", 10.0, 0.0), far];
        let vel = compute_velocities(&frames).unwrap();
        assert!((vel[1][0].speed() - MAX_SPEED).abs() < 1e-12);
        assert!(vel[1][0].vx > 0.0);
    }

    #[test]
    fn single_frame_match_is_an_error() {
        let frames = vec![tiny_frame("m1", 10.0, 0.0)];
        assert!(matches!(
            compute_velocities(&frames),
            Err(Error::SingleFrame { .. })
        ));
    }

    #[test]
    fn independent_finite_difference_matches() {
        // Oracle: recompute velocities directly from raw positions.
        let frames = vec![
            tiny_frame("m1", 10.0, 0.0),
            tiny_frame("m1", 12.0, 1.5),
            tiny_frame("m1", 13.0, 4.0),
        ];
        let vel = compute_velocities(&frames).unwrap();
        for (k, w) in frames.windows(2).enumerate() {
            let dt = w[1].time_s - w[0].time_s;
            for (j, p) in w[1].players.iter().enumerate() {
                let q = &w[0].players[j];
                let vx = (p.x - q.x) / dt;
                let vy = (p.y - q.y) / dt;
                let speed = (vx * vx + vy * vy).sqrt();
                let scale = if speed > MAX_SPEED { MAX_SPEED / speed } else { 1.0 };
                assert!((vel[k + 1][j].vx - vx * scale).abs() < 1e-9);
                assert!((vel[k + 1][j].vy - vy * scale).abs() < 1e-9);
            }
        }
    }
}
