//! Possession segmentation and episode construction.
//!
//! A possession belongs to one team and accumulates that team's on-ball
//! actions. It ends when the owner performs a terminating action (shot,
//! ball out, foul, bad ball control, clearance), when the opponent
//! performs one of the hard enders (those same actions end play no matter
//! who performs them), or when the opponent strings together three
//! consecutive touches — fewer than three is a contested blip, not a
//! transfer, and those touches stay attached to the surrounding
//! possession. Endings are classified [`EndingAction::Shot`] /
//! [`Out`](EndingAction::Out) / [`Foul`](EndingAction::Foul) when the
//! owner performed them and [`Error`](EndingAction::Error) otherwise
//! (owner bad ball control and clearances also count as errors).
//!
//! Possession *rights* persist through an ending: after a foul or ball
//! out the same team often restarts play, which is what lets episodes
//! chain keep-transitions together. A trailing possession left open at
//! the end of a half has no ending to label and is dropped (counted in
//! [`SegmentationStats`]).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::match_data::{ActionName, Event, Team};

/// Possession ending classes, in label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EndingAction {
    Shot,
    Out,
    Foul,
    Error,
}

impl EndingAction {
    pub const COUNT: usize = 4;
    pub const ALL: [EndingAction; 4] =
        [EndingAction::Shot, EndingAction::Out, EndingAction::Foul, EndingAction::Error];

    /// Class index used for tensor labels and distribution vectors.
    pub fn label(self) -> usize {
        match self {
            EndingAction::Shot => 0,
            EndingAction::Out => 1,
            EndingAction::Foul => 2,
            EndingAction::Error => 3,
        }
    }

    pub fn from_label(label: usize) -> Option<EndingAction> {
        EndingAction::ALL.get(label).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EndingAction::Shot => "shot",
            EndingAction::Out => "out",
            EndingAction::Foul => "foul",
            EndingAction::Error => "error",
        }
    }
}

impl fmt::Display for EndingAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One completed possession.
#[derive(Debug, Clone, PartialEq)]
pub struct Possession {
    pub match_id: String,
    pub half: u8,
    /// Ordinal within the match, in stream order.
    pub index_in_match: usize,
    pub team: Team,
    /// Events inside the possession in stream order, ending excluded.
    /// Owner events are the possession's actions; interleaved entries by
    /// the opponent are contested blips that did not transfer possession.
    pub events: Vec<Event>,
    pub ending: EndingAction,
    pub ending_event: Event,
}

impl Possession {
    /// The owner's non-ending actions, in order.
    pub fn actions(&self) -> impl Iterator<Item = &Event> {
        let team = self.team;
        self.events.iter().filter(move |e| e.team == team)
    }

    pub fn action_count(&self) -> usize {
        self.actions().count()
    }

    /// Opponent touches that stayed inside the possession (fewer than
    /// three in a row).
    pub fn opponent_touches(&self) -> impl Iterator<Item = &Event> {
        let team = self.team;
        self.events.iter().filter(move |e| e.team != team)
    }

    /// The last owner action before the ending, if any.
    pub fn final_action(&self) -> Option<&Event> {
        let team = self.team;
        self.events.iter().rev().find(|e| e.team == team)
    }

    pub fn start_time(&self) -> f64 {
        self.events.first().unwrap_or(&self.ending_event).absolute_time()
    }

    pub fn end_time(&self) -> f64 {
        self.ending_event.absolute_time()
    }

    /// True when the possession produced a goal: a shot ending whose
    /// event result is successful.
    pub fn is_goal(&self) -> bool {
        self.ending == EndingAction::Shot
            && self.ending_event.result == crate::match_data::ActionResult::Successful
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SegmentationStats {
    /// Events at the tail of a half that never reached an ending.
    pub dropped_tail_events: usize,
}

/// How an episode terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Shot,
    Loss,
}

impl Terminal {
    pub fn as_str(self) -> &'static str {
        match self {
            Terminal::Shot => "shot",
            Terminal::Loss => "loss",
        }
    }
}

/// A maximal chain of one team's consecutive possessions, split after
/// shots: keep-transitions (out/foul with the ball retained) extend an
/// episode, a shot or a possession loss ends it.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub episode_id: usize,
    pub team: Team,
    /// Indices into the possession slice the episode was built from.
    pub possessions: Vec<usize>,
    pub terminal: Terminal,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.possessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.possessions.is_empty()
    }
}

fn owner_ending(action: ActionName) -> Option<EndingAction> {
    match action {
        ActionName::Shot => Some(EndingAction::Shot),
        ActionName::BallOut => Some(EndingAction::Out),
        ActionName::Foul => Some(EndingAction::Foul),
        ActionName::BadBallControl | ActionName::Clearance => Some(EndingAction::Error),
        _ => None,
    }
}

/// Actions that end the current possession no matter which team performs
/// them; performed by the opponent they classify as errors.
fn is_hard_ender(action: ActionName) -> bool {
    matches!(
        action,
        ActionName::Shot | ActionName::BallOut | ActionName::Foul | ActionName::Clearance
    )
}

const TRANSFER_TOUCHES: usize = 3;

struct Segmenter {
    match_id: String,
    half: u8,
    presumed: Option<Team>,
    open: bool,
    acc: Vec<Event>,
    buffer: Vec<Event>,
    next_index: usize,
    out: Vec<Possession>,
    dropped: usize,
}

impl Segmenter {
    fn new(match_id: &str, half: u8) -> Self {
        Segmenter {
            match_id: match_id.to_string(),
            half,
            presumed: None,
            open: false,
            acc: Vec::new(),
            buffer: Vec::new(),
            next_index: 0,
            out: Vec::new(),
            dropped: 0,
        }
    }

    fn close(&mut self, ending: EndingAction, ending_event: Event) {
        let team = self.presumed.expect("closing without an owner");
        self.out.push(Possession {
            match_id: self.match_id.clone(),
            half: self.half,
            index_in_match: self.next_index,
            team,
            events: std::mem::take(&mut self.acc),
            ending,
            ending_event,
        });
        self.next_index += 1;
        self.open = false;
    }

    fn feed(&mut self, e: Event) {
        let presumed = match self.presumed {
            Some(t) => t,
            None => {
                self.presumed = Some(e.team);
                e.team
            }
        };

        if e.team == presumed {
            // Owner touch: contested blips stay inside the possession.
            self.open = true;
            self.acc.append(&mut self.buffer);
            match owner_ending(e.action) {
                Some(ending) => self.close(ending, e),
                None => self.acc.push(e),
            }
        } else if is_hard_ender(e.action) {
            // Ends play regardless of performer; opponent-performed
            // endings are errors for the owning team.
            self.open = true;
            self.acc.append(&mut self.buffer);
            self.close(EndingAction::Error, e);
        } else {
            let stealing_team = e.team;
            self.buffer.push(e);
            if self.buffer.len() == TRANSFER_TOUCHES {
                let steal = std::mem::take(&mut self.buffer);
                if self.open {
                    // The first opponent touch is the defensive action
                    // that took the ball; it terminates the old
                    // possession, the rest open the new one.
                    let mut it = steal.into_iter();
                    let transfer_event = it.next().expect("three buffered touches");
                    self.close(EndingAction::Error, transfer_event);
                    self.presumed = Some(stealing_team);
                    for ev in it {
                        self.feed(ev);
                    }
                } else {
                    // Nothing open (possession rights were idle after an
                    // ending): all three touches start the new possession.
                    self.presumed = Some(stealing_team);
                    for ev in steal {
                        self.feed(ev);
                    }
                }
            }
        }
    }

    fn finish(mut self) -> (Vec<Possession>, usize) {
        self.dropped += self.acc.len() + self.buffer.len();
        (self.out, self.dropped)
    }
}

/// Segment a time-ordered event stream into possessions.
///
/// Events must be ordered by `(match_id, half, time_s)` as produced by
/// the parser; possessions never span halves, and every event belongs to
/// exactly one possession except for a dropped unterminated tail.
pub fn segment_possessions(events: &[Event]) -> (Vec<Possession>, SegmentationStats) {
    let mut possessions = Vec::new();
    let mut stats = SegmentationStats::default();
    let mut i = 0;
    let mut index_base = 0;
    let mut current_match = "";
    while i < events.len() {
        let (match_id, half) = (&events[i].match_id, events[i].half);
        if match_id != current_match {
            current_match = match_id;
            index_base = 0;
        }
        let mut seg = Segmenter::new(match_id, half);
        seg.next_index = index_base;
        while i < events.len() && events[i].match_id == *match_id && events[i].half == half {
            seg.feed(events[i].clone());
            i += 1;
        }
        let (mut got, dropped) = seg.finish();
        index_base = got.last().map(|p| p.index_in_match + 1).unwrap_or(index_base);
        possessions.append(&mut got);
        stats.dropped_tail_events += dropped;
    }
    (possessions, stats)
}

/// Group one team's consecutive possessions into episodes.
///
/// A run breaks when the other team takes a possession, when the match or
/// half changes, and after every shot ending. The terminal is `Shot` when
/// the last possession ended with a shot, `Loss` otherwise.
pub fn build_episodes(possessions: &[Possession], team: Team) -> Vec<Episode> {
    let mut episodes = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    let mut close_run = |run: &mut Vec<usize>, terminal: Terminal| {
        if !run.is_empty() {
            episodes.push(Episode {
                episode_id: 0, // renumbered below
                team,
                possessions: std::mem::take(run),
                terminal,
            });
        }
    };
    for (i, p) in possessions.iter().enumerate() {
        if p.team != team {
            close_run(&mut run, Terminal::Loss);
            continue;
        }
        if let Some(&prev) = run.last() {
            let q = &possessions[prev];
            if q.match_id != p.match_id || q.half != p.half {
                close_run(&mut run, Terminal::Loss);
            }
        }
        run.push(i);
        if p.ending == EndingAction::Shot {
            close_run(&mut run, Terminal::Shot);
        }
    }
    close_run(&mut run, Terminal::Loss);
    for (id, ep) in episodes.iter_mut().enumerate() {
        ep.episode_id = id;
    }
    episodes
}

// ── Dumps ───────────────────────────────────────────────────────────────

pub const POSSESSION_HEADER: &str =
    "match_id,half,poss_index,team,ending,n_actions,t_start,t_end";

pub fn serialize_possessions(possessions: &[Possession]) -> String {
    let mut out = String::from(POSSESSION_HEADER);
    out.push('\n');
    for p in possessions {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.match_id,
            p.half,
            p.index_in_match,
            p.team,
            p.ending,
            p.action_count(),
            p.start_time(),
            p.end_time()
        ));
    }
    out
}

pub fn write_possessions(path: &Path, possessions: &[Possession]) -> Result<()> {
    std::fs::write(path, serialize_possessions(possessions))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub const EPISODE_HEADER: &str = "episode_id,team,terminal,n_possessions,possession_rows";

pub fn serialize_episodes(episodes: &[Episode]) -> String {
    let mut out = String::from(EPISODE_HEADER);
    out.push('\n');
    for ep in episodes {
        let rows: Vec<String> = ep.possessions.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            ep.episode_id,
            ep.team,
            ep.terminal.as_str(),
            ep.len(),
            rows.join(";")
        ));
    }
    out
}

pub fn write_episodes(path: &Path, episodes: &[Episode]) -> Result<()> {
    std::fs::write(path, serialize_episodes(episodes))
        .map_err(|e| Error::io(path.display().to_string(), e))
}
