//! Seeded synthetic corpus generator.
//!
//! Real event/tracking feeds are proprietary, so the pipeline ships a
//! generator that plants known structure and records it as ground truth:
//!
//! * ending actions are drawn from a per-zone categorical (the planted
//!   behavioral policy), with zones defined by distance to goal at the
//!   moment of the ending decision;
//! * shot outcomes are drawn from a planted logistic model over the
//!   event-derived shot features;
//! * possession flow (keep vs. transfer) follows the same conventions the
//!   segmenter decodes, so segmentation round-trips the planted
//!   possessions exactly.
//!
//! Determinism: every match draws from its own ChaCha stream derived from
//! `(seed, match index)`, so corpora are byte-identical across reruns and
//! stable under match-level parallelism.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::match_data::{
    ActionName, ActionResult, BodyPart, Event, Frame, PlayerPos, Team,
};
use crate::pitch;
use crate::possession::EndingAction;

// ── Zones ───────────────────────────────────────────────────────────────

/// Pitch zone of a decision, bucketed by distance to the goal center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zone {
    /// Within 25 m of goal.
    Danger,
    /// 25–55 m out.
    Approach,
    /// Beyond 55 m.
    Build,
}

impl Zone {
    pub const ALL: [Zone; 3] = [Zone::Danger, Zone::Approach, Zone::Build];

    pub fn of_point(x: f64, y: f64) -> Zone {
        let d = pitch::distance_to_goal(x, y);
        if d <= 25.0 {
            Zone::Danger
        } else if d <= 55.0 {
            Zone::Approach
        } else {
            Zone::Build
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Zone::Danger => "danger",
            Zone::Approach => "approach",
            Zone::Build => "build",
        }
    }
}

// ── Planted models ──────────────────────────────────────────────────────

/// Ending-action probabilities per zone, ordered shot/out/foul/error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralSkew {
    pub danger: [f64; 4],
    pub approach: [f64; 4],
    pub build: [f64; 4],
}

impl BehavioralSkew {
    pub fn probs(&self, zone: Zone) -> &[f64; 4] {
        match zone {
            Zone::Danger => &self.danger,
            Zone::Approach => &self.approach,
            Zone::Build => &self.build,
        }
    }

    /// Deliberately shot-shy near goal: plenty of headroom for a policy
    /// that learns to finish possessions with shots.
    pub fn suboptimal() -> Self {
        BehavioralSkew {
            danger: [0.15, 0.20, 0.20, 0.45],
            approach: [0.10, 0.22, 0.23, 0.45],
            build: [0.03, 0.22, 0.25, 0.50],
        }
    }

    /// Shot-heavy near goal; little left to improve.
    pub fn near_optimal() -> Self {
        BehavioralSkew {
            danger: [0.70, 0.12, 0.12, 0.06],
            approach: [0.35, 0.25, 0.25, 0.15],
            build: [0.05, 0.40, 0.40, 0.15],
        }
    }

    pub fn uniform() -> Self {
        let u = [0.25; 4];
        BehavioralSkew { danger: u, approach: u, build: u }
    }

    fn validate(&self) -> Result<()> {
        for (zone, p) in [("danger", &self.danger), ("approach", &self.approach), ("build", &self.build)]
        {
            if p.iter().any(|&v| v < 0.0) {
                return Err(Error::Config(format!("negative probability in zone {zone}")));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "zone {zone} probabilities sum to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Planted logistic goal model over the event-derived shot features
/// (angle, scaled distance, scaled time remaining, home flag, body id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalModel {
    pub bias: f64,
    pub angle: f64,
    pub distance: f64,
    pub time_remaining: f64,
    pub home: f64,
    pub body: f64,
}

impl GoalModel {
    pub fn preset() -> Self {
        GoalModel {
            bias: -1.8,
            angle: 1.1,
            distance: -5.5,
            time_remaining: 0.6,
            home: 0.4,
            body: 0.9,
        }
    }

    pub fn weights(&self) -> [f64; 5] {
        [self.angle, self.distance, self.time_remaining, self.home, self.body]
    }

    /// Goal probability for a shot with the given feature vector.
    pub fn probability(&self, features: &[f64; 5]) -> f64 {
        let z = self.bias
            + self.weights().iter().zip(features.iter()).map(|(w, x)| w * x).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }
}

/// Event-derived shot features used by the planted goal model, scaled to
/// unit-order ranges: `[angle, distance/105, time_remaining/2700, home, body/2]`.
pub fn shot_features(e: &Event) -> [f64; 5] {
    let angle = pitch::angle_to_goal(e.x_start, e.y_start);
    let dist = pitch::distance_to_goal(e.x_start, e.y_start) / pitch::PITCH_LENGTH;
    let time_remaining = (pitch::HALF_LENGTH_S - e.time_s).max(0.0) / pitch::HALF_LENGTH_S;
    let home = if e.team == Team::Home { 1.0 } else { 0.0 };
    let body = e.body.id() as f64 / 2.0;
    [angle, dist, time_remaining, home, body]
}

// ── Config and outputs ──────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_matches: usize,
    pub seed: u64,
    pub possessions_per_match: usize,
    /// Probability that an out/foul ending keeps the ball with the team.
    pub keep_probability: f64,
    pub skew: BehavioralSkew,
    pub goal_model: GoalModel,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_matches: 104,
            seed: 7,
            possessions_per_match: 40,
            keep_probability: 0.5,
            skew: BehavioralSkew::suboptimal(),
            goal_model: GoalModel::preset(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_matches == 0 {
            return Err(Error::Config("n_matches must be positive".into()));
        }
        if self.possessions_per_match == 0 {
            return Err(Error::Config("possessions_per_match must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.keep_probability) {
            return Err(Error::Config(format!(
                "keep_probability {} outside [0, 1]",
                self.keep_probability
            )));
        }
        self.skew.validate()
    }
}

/// Summary of one planted possession, kept for round-trip tests.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPossession {
    pub match_id: String,
    pub half: u8,
    pub team: Team,
    pub n_actions: usize,
    pub ending: EndingAction,
    pub zone: Zone,
}

/// Ground truth persisted next to the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub n_matches: usize,
    pub keep_probability: f64,
    pub skew: BehavioralSkew,
    pub goal_model: GoalModel,
    /// Planted possessions per zone, ordered shot/out/foul/error.
    pub zone_counts: Vec<ZoneCounts>,
    pub total_possessions: usize,
    pub total_goals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneCounts {
    pub zone: String,
    pub counts: [usize; 4],
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<GroundTruth> {
        serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("bad ground truth file: {e}")))
    }
}

pub struct SyntheticCorpus {
    pub events: Vec<Event>,
    pub frames: Vec<Frame>,
    pub ground_truth: GroundTruth,
    pub planted: Vec<PlantedPossession>,
}

// ── Generation ──────────────────────────────────────────────────────────

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent per-match stream derived from the corpus seed.
fn match_rng(seed: u64, match_idx: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(match_idx as u64 + 1)))
}

fn geometric(rng: &mut ChaCha8Rng, p: f64, cap: usize) -> usize {
    let mut n = 0;
    while n < cap && rng.gen::<f64>() >= p {
        n += 1;
    }
    n
}

fn pick_weighted<T: Copy>(rng: &mut ChaCha8Rng, items: &[(T, f64)]) -> T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.gen::<f64>() * total;
    for &(item, w) in items {
        u -= w;
        if u <= 0.0 {
            return item;
        }
    }
    items.last().expect("non-empty weights").0
}

fn clamp_point(x: f64, y: f64) -> (f64, f64) {
    (x.clamp(0.0, pitch::PITCH_LENGTH), y.clamp(0.0, pitch::PITCH_WIDTH))
}

const NON_ENDING_ACTIONS: [(ActionName, f64); 4] = [
    (ActionName::Pass, 0.55),
    (ActionName::Dribble, 0.25),
    (ActionName::Cross, 0.10),
    (ActionName::Other, 0.10),
];

/// How a planted possession hands over to the next one.
#[derive(Clone, Copy, PartialEq)]
enum Handover {
    /// Same team continues (out/foul kept, or a fresh episode after a shot).
    Keep,
    /// Other team takes over with a clean build-up.
    Flip,
    /// Other team takes over via an interception that doubles as the
    /// previous possession's ending event.
    Steal,
}

struct Emitter<'a> {
    cfg: &'a SyntheticConfig,
    match_id: String,
    rng: ChaCha8Rng,
    events: Vec<Event>,
    frames: Vec<Frame>,
    planted: Vec<PlantedPossession>,
    goals: usize,
    last_frame_second: i64,
}

impl<'a> Emitter<'a> {
    fn player(&mut self, team: Team) -> String {
        let n = self.rng.gen_range(2..=11);
        match team {
            Team::Home => format!("h{n:02}"),
            Team::Away => format!("a{n:02}"),
        }
    }

    fn event(
        &mut self,
        team: Team,
        action: ActionName,
        start: (f64, f64),
        end: (f64, f64),
        result: ActionResult,
        body: BodyPart,
        time_s: f64,
        half: u8,
    ) -> Event {
        Event {
            match_id: self.match_id.clone(),
            team,
            player_id: self.player(team),
            action,
            x_start: start.0,
            y_start: start.1,
            x_end: end.0,
            y_end: end.1,
            result,
            body,
            time_s,
            half,
        }
    }

    fn emit_half(&mut self, half: u8, n_poss: usize, first_team: Team) {
        let mut clock = 2.0 + self.rng.gen::<f64>() * 3.0;
        let mut team = first_team;
        let mut incoming = Handover::Flip;

        for slot in 0..n_poss {
            // A team taking over needs three touches to establish
            // possession; a steal consumes the first as the previous
            // possession's ending event.
            let plan_len = match incoming {
                Handover::Flip => 3 + geometric(&mut self.rng, 0.30, 11),
                Handover::Steal => 2 + geometric(&mut self.rng, 0.30, 12),
                Handover::Keep => geometric(&mut self.rng, 0.28, 14),
            };

            let possession_events_start = self.events.len();
            let mut x = self.rng.gen_range(10.0..60.0);
            let mut y = self.rng.gen_range(10.0..58.0);

            // Leading contested blips on keep transitions.
            if incoming == Handover::Keep && self.rng.gen::<f64>() < 0.4 {
                for _ in 0..self.rng.gen_range(1..=2) {
                    let (bx, by) = clamp_point(x + self.rng.gen_range(-4.0..4.0), y + self.rng.gen_range(-4.0..4.0));
                    let blip_action = if self.rng.gen::<f64>() < 0.5 {
                        ActionName::Tackle
                    } else {
                        ActionName::Pass
                    };
                    let e = self.event(
                        team.opponent(),
                        blip_action,
                        (bx, by),
                        (bx, by),
                        ActionResult::Unsuccessful,
                        BodyPart::Foot,
                        clock,
                        half,
                    );
                    self.events.push(e);
                    clock += self.rng.gen_range(1.5..3.5);
                }
            }

            // Owner build-up actions.
            for _ in 0..plan_len {
                let action = pick_weighted(&mut self.rng, &NON_ENDING_ACTIONS);
                let step_x = self.rng.gen_range(2.0..10.0);
                let step_y = self.rng.gen_range(-8.0..8.0);
                let (ex, ey) = clamp_point(x + step_x, (y + step_y).clamp(4.0, 64.0));
                let result = if self.rng.gen::<f64>() < 0.85 {
                    ActionResult::Successful
                } else {
                    ActionResult::Unsuccessful
                };
                let body = pick_weighted(
                    &mut self.rng,
                    &[(BodyPart::Foot, 0.85), (BodyPart::Head, 0.08), (BodyPart::Body, 0.07)],
                );
                let e = self.event(team, action, (x, y), (ex, ey), result, body, clock, half);
                self.events.push(e);
                clock += self.rng.gen_range(1.5..4.5);
                x = ex;
                y = ey;
            }

            // Ending decision at the current ball location.
            let zone = Zone::of_point(x, y);
            let probs = self.cfg.skew.probs(zone);
            let ending = {
                let mut u = self.rng.gen::<f64>();
                let mut chosen = EndingAction::Error;
                for (k, &p) in probs.iter().enumerate() {
                    u -= p;
                    if u <= 0.0 {
                        chosen = EndingAction::ALL[k];
                        break;
                    }
                }
                chosen
            };

            // Handover implied by the ending.
            let last_slot = slot + 1 == n_poss;
            let handover = match ending {
                EndingAction::Shot => {
                    if self.rng.gen::<f64>() < 0.2 {
                        Handover::Keep
                    } else {
                        Handover::Flip
                    }
                }
                EndingAction::Out | EndingAction::Foul => {
                    if self.rng.gen::<f64>() < self.cfg.keep_probability {
                        Handover::Keep
                    } else {
                        Handover::Flip
                    }
                }
                EndingAction::Error => {
                    // An interception can only terminate a possession that
                    // actually opened (has at least one owner action).
                    if !last_slot && plan_len >= 1 && self.rng.gen::<f64>() < 0.5 {
                        Handover::Steal
                    } else {
                        Handover::Flip
                    }
                }
            };

            // Emit the ending event itself.
            match ending {
                EndingAction::Shot => {
                    let body = pick_weighted(
                        &mut self.rng,
                        &[(BodyPart::Foot, 0.8), (BodyPart::Head, 0.2)],
                    );
                    let target = (pitch::PITCH_LENGTH, self.rng.gen_range(30.0..38.0));
                    let mut shot = self.event(
                        team,
                        ActionName::Shot,
                        (x, y),
                        target,
                        ActionResult::Unsuccessful,
                        body,
                        clock,
                        half,
                    );
                    let p_goal = self.cfg.goal_model.probability(&shot_features(&shot));
                    if self.rng.gen::<f64>() < p_goal {
                        shot.result = ActionResult::Successful;
                        self.goals += 1;
                    }
                    self.events.push(shot);
                }
                EndingAction::Out => {
                    let edge_y = if y > pitch::PITCH_WIDTH / 2.0 { pitch::PITCH_WIDTH } else { 0.0 };
                    let end = clamp_point(x + self.rng.gen_range(0.0..6.0), edge_y);
                    let e = self.event(
                        team,
                        ActionName::BallOut,
                        (x, y),
                        end,
                        ActionResult::Unsuccessful,
                        BodyPart::Foot,
                        clock,
                        half,
                    );
                    self.events.push(e);
                }
                EndingAction::Foul => {
                    let e = self.event(
                        team,
                        ActionName::Foul,
                        (x, y),
                        (x, y),
                        ActionResult::Unsuccessful,
                        BodyPart::Body,
                        clock,
                        half,
                    );
                    self.events.push(e);
                }
                EndingAction::Error => match handover {
                    Handover::Steal => {
                        // Opponent interception is the ending event; the
                        // thief's team completes the transfer with its
                        // next two actions.
                        let e = self.event(
                            team.opponent(),
                            ActionName::Interception,
                            (x, y),
                            (x, y),
                            ActionResult::Successful,
                            BodyPart::Foot,
                            clock,
                            half,
                        );
                        self.events.push(e);
                    }
                    _ => {
                        let dx = self.rng.gen_range(-3.0..3.0);
                        let dy = self.rng.gen_range(-3.0..3.0);
                        let end = clamp_point(x + dx, y + dy);
                        let e = self.event(
                            team,
                            ActionName::BadBallControl,
                            (x, y),
                            end,
                            ActionResult::Unsuccessful,
                            BodyPart::Foot,
                            clock,
                            half,
                        );
                        self.events.push(e);
                    }
                },
            }

            self.planted.push(PlantedPossession {
                match_id: self.match_id.clone(),
                half,
                team,
                n_actions: plan_len,
                ending,
                zone,
            });

            self.emit_possession_frames(possession_events_start, half);

            clock += self.rng.gen_range(3.0..10.0);
            team = match handover {
                Handover::Keep => team,
                _ => team.opponent(),
            };
            incoming = handover;
        }
    }

    /// 1 Hz tracking frames covering one possession's event span.
    fn emit_possession_frames(&mut self, events_start: usize, _half: u8) {
        let events = &self.events[events_start..];
        if events.is_empty() {
            return;
        }
        let t0 = events.first().expect("events").absolute_time();
        let t1 = events.last().expect("events").absolute_time();
        let from = ((t0.floor() as i64) - 1).max(self.last_frame_second + 1).max(0);
        let to = t1.ceil() as i64;
        if from > to {
            return;
        }
        let owner = events.last().expect("events").team;

        // Formation anchors: owner spread toward the attack, defenders
        // screening the goal. Index 0 is the keeper.
        let owner_anchor = |i: usize| -> (f64, f64) {
            if i == 0 {
                (4.0, 34.0)
            } else {
                let row = (i - 1) / 5;
                let col = (i - 1) % 5;
                (25.0 + row as f64 * 28.0, 8.0 + col as f64 * 13.0)
            }
        };
        let defender_anchor = |i: usize| -> (f64, f64) {
            if i == 0 {
                (101.0, 34.0)
            } else {
                let row = (i - 1) / 5;
                let col = (i - 1) % 5;
                (88.0 - row as f64 * 22.0, 8.0 + col as f64 * 13.0)
            }
        };

        for second in from..=to {
            let t = second as f64;
            // Ball state: the latest event at or before t controls the ball.
            let ctrl = events
                .iter()
                .rev()
                .find(|e| e.absolute_time() <= t)
                .unwrap_or(&events[0]);
            let (bx, by) = (ctrl.x_start, ctrl.y_start);
            let holder_id = ctrl.player_id.clone();
            let holder_team = ctrl.team;

            let mut players = Vec::with_capacity(22);
            for (team, prefix) in [(Team::Home, "h"), (Team::Away, "a")] {
                for i in 0..11usize {
                    let pid = format!("{prefix}{:02}", i + 1);
                    if pid == holder_id && team == holder_team {
                        players.push(PlayerPos { player_id: pid, team, x: bx, y: by });
                        continue;
                    }
                    let (ax, ay) =
                        if team == owner { owner_anchor(i) } else { defender_anchor(i) };
                    let pull = if team == owner { 0.25 } else { 0.35 };
                    let jx = self.rng.gen_range(-1.5..1.5);
                    let jy = self.rng.gen_range(-1.5..1.5);
                    let (px, py) =
                        clamp_point(ax + (bx - ax) * pull + jx, ay + (by - ay) * pull + jy);
                    players.push(PlayerPos { player_id: pid, team, x: px, y: py });
                }
            }
            self.frames.push(Frame {
                match_id: self.match_id.clone(),
                time_s: t,
                players,
                ball_holder: Some(holder_id),
            });
            self.last_frame_second = second;
        }
    }
}

/// Generate a seeded synthetic corpus with recorded ground truth.
pub fn generate_synthetic_corpus(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut events = Vec::new();
    let mut frames = Vec::new();
    let mut planted = Vec::new();
    let mut goals = 0;

    for m in 0..cfg.n_matches {
        let match_id = format!("m{:04}", m + 1);
        let mut emitter = Emitter {
            cfg,
            match_id,
            rng: match_rng(cfg.seed, m),
            events: Vec::new(),
            frames: Vec::new(),
            planted: Vec::new(),
            goals: 0,
            last_frame_second: -1,
        };
        let first_half = cfg.possessions_per_match.div_ceil(2);
        let second_half = cfg.possessions_per_match - first_half;
        emitter.emit_half(1, first_half, Team::Home);
        if second_half > 0 {
            emitter.emit_half(2, second_half, Team::Away);
        }
        events.append(&mut emitter.events);
        frames.append(&mut emitter.frames);
        planted.append(&mut emitter.planted);
        goals += emitter.goals;
    }

    let mut zone_counts: Vec<ZoneCounts> = Zone::ALL
        .iter()
        .map(|z| ZoneCounts { zone: z.name().into(), counts: [0; 4] })
        .collect();
    for p in &planted {
        let zi = Zone::ALL.iter().position(|z| *z == p.zone).expect("zone");
        zone_counts[zi].counts[p.ending.label()] += 1;
    }

    let ground_truth = GroundTruth {
        seed: cfg.seed,
        n_matches: cfg.n_matches,
        keep_probability: cfg.keep_probability,
        skew: cfg.skew.clone(),
        goal_model: cfg.goal_model.clone(),
        zone_counts,
        total_possessions: planted.len(),
        total_goals: goals,
    };

    Ok(SyntheticCorpus { events, frames, ground_truth, planted })
}
