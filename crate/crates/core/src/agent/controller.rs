//! Controller turn: directives plus physical state in, validated plan out.

use std::fmt::Write;

use regex::Regex;

use super::prompt::{compose_prompts, ContextTurn};
use super::{Actor, AgentError, Directive, GameContext, Gateway, Role, Transcript, MAX_REPAIRS};
use crate::behavior::policy::{adjust_speeds, bind_new_ids, check_feedback, check_system_owned, classify_feedback, Binding};
use crate::behavior::scene::formation_sequence;
use crate::behavior::{Addon, Ownership, SpeedFeedback};
use crate::geometry::GridCoord;
use crate::protocol::{parse_lenient, serialize, ActionSequence};
use crate::world::{occupancy, validate_sequence, ValidationReport, ViolationKind, World};

/// Speed level used by the path-planning fallback.
const FALLBACK_SPEED: u8 = 2;

/// Result of a controller turn, ready for dispatch.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerTurn {
    pub narration: String,
    pub sequence: ActionSequence,
    /// Idle robots to rename before dispatch.
    pub binding: Binding,
    /// Re-prompts used.
    pub repairs: usize,
    /// Set when the plan did not come from the model.
    pub fallback: Option<String>,
}

/// Destination named in a directive: the last board square or `(col, row)`
/// pair mentioned.
pub fn resolve_destination(text: &str, board: &std::collections::BTreeMap<String, GridCoord>) -> Option<GridCoord> {
    let mut best: Option<(usize, GridCoord)> = None;
    let cell = Regex::new(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)").expect("static regex");
    for c in cell.captures_iter(text) {
        let (Ok(col), Ok(row)) = (c[1].parse(), c[2].parse()) else { continue };
        let at = c.get(0).expect("match").start();
        if best.is_none_or(|(b, _)| at >= b) {
            best = Some((at, GridCoord::new(col, row)));
        }
    }
    if !board.is_empty() {
        let mut keys: Vec<&String> = board.keys().collect();
        keys.sort_by_key(|k| std::cmp::Reverse(k.len()));
        let alt = keys.iter().map(|k| regex::escape(k)).collect::<Vec<_>>().join("|");
        let re = Regex::new(&format!(r"(?i)\b(?:{alt})\b")).expect("escaped keys");
        for m in re.find_iter(text) {
            let key = board.keys().find(|k| k.eq_ignore_ascii_case(m.as_str())).expect("matched key");
            if best.is_none_or(|(b, _)| m.start() >= b) {
                best = Some((m.start(), board[key]));
            }
        }
    }
    best.map(|(_, c)| c)
}

/// Controller context text: directives, poses, board and free space.
pub fn controller_context(ctx: &GameContext, world: &World, directives: &[Directive]) -> String {
    let mut s = String::new();
    if !directives.is_empty() {
        s.push_str("Directives:\n");
        for d in directives {
            let _ = writeln!(s, "- {}: {}", d.target, d.directive);
        }
        s.push('\n');
    }
    s.push_str("Robots:\n");
    for (id, r) in &world.robots {
        let label = ctx.roles.get(id).map(|l| format!(" \"{l}\"")).unwrap_or_default();
        let owner = match ctx.ownership.get(id) {
            Some(Ownership::User) => "user",
            Some(Ownership::Idle) => "idle",
            _ => "system",
        };
        let cell = world.robot_cell(id).map(|c| format!("({}, {})", c.col, c.row)).unwrap_or_else(|| "off-grid".into());
        let _ = writeln!(s, "- {id}{label} [{owner}] cell {cell}, {}", r.pose);
    }
    if !ctx.board_mapping.is_empty() {
        s.push_str("\nBoard squares:");
        for (k, c) in &ctx.board_mapping {
            let _ = write!(s, " {k}=({}, {})", c.col, c.row);
        }
        s.push('\n');
    }
    if !world.objects.is_empty() {
        s.push_str("\nObjects:\n");
        for (id, o) in &world.objects {
            let cell = world.object_cell(id).map(|c| format!("({}, {})", c.col, c.row)).unwrap_or_else(|| "off-grid".into());
            let mass = serde_json::to_value(o.mass_class).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            let _ = writeln!(s, "- {id} [{mass}] cell {cell}");
        }
    }
    let grid = occupancy(world);
    let cells: Vec<String> = grid
        .occupied_cells()
        .into_iter()
        .filter(|c| grid.occupant(*c).is_some_and(|who| world.objects.contains_key(who)))
        .map(|c| format!("({}, {})", c.col, c.row))
        .collect();
    if !cells.is_empty() {
        let _ = writeln!(s, "\nCells blocked by objects: {}", cells.join(" "));
    }
    let idle: Vec<&str> = ctx.ownership.iter().filter(|(_, o)| **o == Ownership::Idle).map(|(id, _)| id.as_str()).collect();
    if !idle.is_empty() {
        let _ = writeln!(s, "\nIdle robots available for new characters: {}", idle.join(", "));
    }
    s
}

struct Checked {
    binding: Binding,
    report: ValidationReport,
}

/// Policy checks, then a dry run on a world with the binding applied.
fn check(ctx: &GameContext, world: &World, seq: &ActionSequence, feedback: Option<(&ActionSequence, SpeedFeedback)>) -> Checked {
    let mut report = ValidationReport::default();
    let mut binding = Binding::default();
    if ctx.has_addon(Addon::Designer) {
        match bind_new_ids(seq, world, &ctx.ownership) {
            Ok(b) => binding = b,
            Err(v) => report.violations.push(v),
        }
    }
    let mut own = ctx.ownership.clone();
    let mut sim = world.clone();
    if let Err(e) = binding.apply(&mut sim, &mut own) {
        report.violations.push(crate::world::Violation {
            robot: String::new(),
            step: None,
            kind: ViolationKind::IdlePool,
            detail: e.to_string(),
        });
    }
    if ctx.has_addon(Addon::Opponent) || ctx.has_addon(Addon::Teammate) {
        report.violations.extend(check_system_owned(seq, &own));
    }
    if let Some((prior, fb)) = feedback {
        report.violations.extend(check_feedback(prior, seq, fb));
    }
    if report.is_ok() {
        report = validate_sequence(seq, &sim);
    }
    Checked { binding, report }
}

enum Attempt {
    Accepted(ControllerTurn),
    Exhausted { report: String, idle_pool: bool, narration: String },
}

fn plan_with_repair(
    ctx: &mut GameContext,
    gw: &dyn Gateway,
    tr: &mut Transcript,
    clock_ms: f64,
    world: &World,
    request: String,
    feedback: Option<(&ActionSequence, SpeedFeedback)>,
) -> Result<Attempt, AgentError> {
    let addons = ctx.addons.clone();
    let mut context = vec![ContextTurn::user(request)];
    let mut last = (String::new(), false, String::new());
    for repairs in 0..=MAX_REPAIRS {
        let turn = ctx.next_turn(Role::Controller);
        let bundle = compose_prompts(Role::Controller, turn, world.cfg.grid_n, "", &addons, context.clone())?;
        let reply = gw.chat(&bundle)?;
        tr.text(Actor::Controller, "plan", reply.clone(), clock_ms);
        let report_text = match parse_lenient(&reply) {
            Ok(out) => {
                let c = check(ctx, world, &out.sequence, feedback);
                if c.report.is_ok() {
                    return Ok(Attempt::Accepted(ControllerTurn {
                        narration: out.narration,
                        sequence: out.sequence,
                        binding: c.binding,
                        repairs,
                        fallback: None,
                    }));
                }
                let idle = c.report.violations.iter().any(|v| v.kind == ViolationKind::IdlePool);
                last = (c.report.to_string(), idle, out.narration);
                last.0.clone()
            }
            Err(e) => {
                last = (format!("- unparseable reply: {e}"), false, String::new());
                last.0.clone()
            }
        };
        tr.text(Actor::System, "repair_report", report_text.clone(), clock_ms);
        context.push(ContextTurn::assistant(reply));
        context.push(ContextTurn::user(format!(
            "The plan was rejected:\n{report_text}\nReturn a corrected plan in the same format."
        )));
    }
    let (report, idle_pool, narration) = last;
    Ok(Attempt::Exhausted { report, idle_pool, narration })
}

/// Point-to-point fallback: every directive names a known robot and a
/// destination, planned with the grid planner.
fn path_fallback(ctx: &GameContext, world: &World, directives: &[Directive]) -> Option<ActionSequence> {
    let ids: Vec<&str> = world.robots.keys().map(String::as_str).collect();
    let mut assignments = Vec::new();
    for d in directives {
        let id = ctx.resolve_target(&d.target, &ids)?;
        if ctx.ownership.get(&id) == Some(&Ownership::User) {
            return None;
        }
        let goal = resolve_destination(&d.directive, &ctx.board_mapping)?;
        assignments.push((id, goal));
    }
    if assignments.is_empty() {
        return None;
    }
    let seq = formation_sequence(world, &assignments, FALLBACK_SPEED).ok()?;
    validate_sequence(&seq, world).is_ok().then_some(seq)
}

/// Plan for a set of directives with up to [`MAX_REPAIRS`] re-prompts and
/// deterministic fallbacks.
pub fn controller_turn(
    ctx: &mut GameContext,
    gw: &dyn Gateway,
    tr: &mut Transcript,
    clock_ms: f64,
    world: &World,
    directives: &[Directive],
) -> Result<ControllerTurn, AgentError> {
    let request = controller_context(ctx, world, directives);
    match plan_with_repair(ctx, gw, tr, clock_ms, world, request, None)? {
        Attempt::Accepted(t) => Ok(t),
        Attempt::Exhausted { report, idle_pool, narration } => {
            if idle_pool && ctx.has_addon(Addon::Designer) {
                tr.text(Actor::System, "fallback", "narration only: no idle robots left for new characters", clock_ms);
                return Ok(ControllerTurn {
                    narration,
                    sequence: ActionSequence::default(),
                    binding: Binding::default(),
                    repairs: MAX_REPAIRS,
                    fallback: Some("narration_only".into()),
                });
            }
            if let Some(seq) = path_fallback(ctx, world, directives) {
                tr.text(Actor::System, "fallback", format!("path planner: {}", serialize(&seq)), clock_ms);
                return Ok(ControllerTurn {
                    narration: String::new(),
                    sequence: seq,
                    binding: Binding::default(),
                    repairs: MAX_REPAIRS,
                    fallback: Some("path_planner".into()),
                });
            }
            Err(AgentError::RepairExhausted { repairs: MAX_REPAIRS, report })
        }
    }
}

/// Revise the previous plan from player coaching. Expects `world` to be
/// rewound to the poses the prior plan started from.
pub fn apprentice_feedback(
    ctx: &mut GameContext,
    gw: &dyn Gateway,
    tr: &mut Transcript,
    clock_ms: f64,
    world: &World,
    prior: &ActionSequence,
    feedback: &str,
) -> Result<ControllerTurn, AgentError> {
    if !ctx.has_addon(Addon::Apprentice) {
        return Err(AgentError::Precondition("feedback needs the apprentice add-on".into()));
    }
    if prior.is_empty() {
        return Err(AgentError::Precondition("no previous plan to revise".into()));
    }
    let fb = classify_feedback(feedback);
    let mut request = controller_context(ctx, world, &[]);
    let _ = write!(request, "\nPrevious plan: {}\nPlayer feedback: {feedback}\n", serialize(prior));
    match plan_with_repair(ctx, gw, tr, clock_ms, world, request, fb.map(|f| (prior, f)))? {
        Attempt::Accepted(t) => Ok(t),
        Attempt::Exhausted { report, .. } => {
            if let Some(f) = fb {
                let seq = adjust_speeds(prior, f);
                if validate_sequence(&seq, world).is_ok() {
                    tr.text(Actor::System, "fallback", format!("speed adjustment: {}", serialize(&seq)), clock_ms);
                    return Ok(ControllerTurn {
                        narration: String::new(),
                        sequence: seq,
                        binding: Binding::default(),
                        repairs: MAX_REPAIRS,
                        fallback: Some("speed_adjustment".into()),
                    });
                }
            }
            Err(AgentError::RepairExhausted { repairs: MAX_REPAIRS, report })
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::agent::{MockGateway, ScriptEntry};
    use crate::geometry::KinematicConfig;
    use crate::protocol::{ActionStep, RobotTrack};

    fn setup() -> (GameContext, World) {
        let mut w = World::new(KinematicConfig::default(), 1);
        w.spawn_robot("pawn", GridCoord::new(14, 12), 90.0).unwrap();
        w.spawn_robot("knight", GridCoord::new(12, 11), 90.0).unwrap();
        let mut ctx = GameContext::new("chess", "standard");
        ctx.ownership.insert("pawn".into(), Ownership::System);
        ctx.ownership.insert("knight".into(), Ownership::System);
        ctx.board_mapping = BTreeMap::from([("d2".into(), GridCoord::new(14, 12)), ("d4".into(), GridCoord::new(14, 14))]);
        (ctx, w)
    }

    fn script(replies: &[&str]) -> MockGateway {
        MockGateway::new(
            replies.iter().enumerate().map(|(i, r)| ScriptEntry { role: Role::Controller, turn: i, response: r.to_string() }),
        )
    }

    fn directive() -> Vec<Directive> {
        vec![Directive { target: "pawn".into(), directive: "move from d2 to d4".into() }]
    }

    #[test]
    fn destination_is_last_mention() {
        let (ctx, _) = setup();
        assert_eq!(resolve_destination("from D2 to d4", &ctx.board_mapping), Some(GridCoord::new(14, 14)));
        assert_eq!(resolve_destination("go to (3, 4) not d2", &ctx.board_mapping), Some(GridCoord::new(14, 12)));
        assert_eq!(resolve_destination("d2 then ( 3,4 )", &ctx.board_mapping), Some(GridCoord::new(3, 4)));
        assert_eq!(resolve_destination("nowhere", &ctx.board_mapping), None);
    }

    #[test]
    fn context_lists_poses_and_squares() {
        let (ctx, w) = setup();
        let text = controller_context(&ctx, &w, &directive());
        assert!(text.contains("- pawn: move from d2 to d4"));
        assert!(text.contains("cell (14, 12), x="));
        assert!(text.contains("d4=(14, 14)"));
    }

    #[test]
    fn repair_then_accept() {
        let (mut ctx, w) = setup();
        let gw = script(&[
            "oops {'robots': [{'id': 'pawn', 'actions': [{'type': 'translate', 'target': [14, 40], 'speed': 2}]}]}",
            "fixed {'robots': [{'id': 'pawn', 'actions': [{'type': 'translate', 'target': [14, 14], 'speed': 2}]}]}",
        ]);
        let mut tr = Transcript::new();
        let t = controller_turn(&mut ctx, &gw, &mut tr, 0.0, &w, &directive()).unwrap();
        assert_eq!(t.repairs, 1);
        assert_eq!(t.narration, "fixed");
        let kinds: Vec<&str> = tr.entries().iter().map(|e| e.kind.as_str()).collect();
        assert_eq!(kinds, ["plan", "repair_report", "plan"]);
    }

    #[test]
    fn planner_fallback_after_exhaustion() {
        let (mut ctx, w) = setup();
        let gw = script(&["no", "still no", "nope"]);
        let mut tr = Transcript::new();
        let t = controller_turn(&mut ctx, &gw, &mut tr, 0.0, &w, &directive()).unwrap();
        assert_eq!(t.fallback.as_deref(), Some("path_planner"));
        assert_eq!(t.sequence.robots[0].actions, vec![ActionStep::translate(14, 14, FALLBACK_SPEED)]);
        assert_eq!(gw.recorded().len(), 1 + MAX_REPAIRS);
    }

    #[test]
    fn exhaustion_without_fallback_carries_report() {
        let (mut ctx, w) = setup();
        let gw = script(&["no", "no", "no"]);
        let dirs = vec![Directive { target: "pawn".into(), directive: "dance".into() }];
        let err = controller_turn(&mut ctx, &gw, &mut Transcript::new(), 0.0, &w, &dirs).unwrap_err();
        assert!(matches!(err, AgentError::RepairExhausted { repairs: 2, ref report } if report.contains("unparseable")));
    }

    #[test]
    fn feedback_requires_addon_and_prior() {
        let (mut ctx, w) = setup();
        let gw = script(&[]);
        let prior = ActionSequence::new(vec![RobotTrack::new("pawn", vec![ActionStep::translate(14, 14, 2)])]);
        let e = apprentice_feedback(&mut ctx, &gw, &mut Transcript::new(), 0.0, &w, &prior, "faster");
        assert!(matches!(e, Err(AgentError::Precondition(_))));
        ctx.addons.push(Addon::Apprentice);
        let e = apprentice_feedback(&mut ctx, &gw, &mut Transcript::new(), 0.0, &w, &ActionSequence::default(), "faster");
        assert!(matches!(e, Err(AgentError::Precondition(_))));
    }

    #[test]
    fn feedback_rejects_ignored_coaching() {
        let (mut ctx, w) = setup();
        ctx.addons.push(Addon::Apprentice);
        let same = "{'robots': [{'id': 'pawn', 'actions': [{'type': 'translate', 'target': [14, 14], 'speed': 2}]}]}";
        let gw = script(&[same, same, same]);
        let prior = ActionSequence::new(vec![RobotTrack::new("pawn", vec![ActionStep::translate(14, 14, 2)])]);
        let t = apprentice_feedback(&mut ctx, &gw, &mut Transcript::new(), 0.0, &w, &prior, "a bit faster please").unwrap();
        assert_eq!(t.fallback.as_deref(), Some("speed_adjustment"));
        assert_eq!(t.sequence.robots[0].actions, vec![ActionStep::translate(14, 14, 3)]);
    }
}
