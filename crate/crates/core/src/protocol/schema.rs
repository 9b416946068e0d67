//! Value → [`ActionSequence`] conversion with `$.`-style field paths.

use serde_json::{Map, Value};

use super::{ActionSequence, ActionStep, Pivot, ProtocolError, RobotTrack};
use crate::geometry::PairMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Exact canonical schema.
    Strict,
    /// Tolerates unknown keys, numeric strings and integral floats.
    Lenient,
}

type Res<T> = Result<T, ProtocolError>;

pub(crate) fn sequence_from_value(v: &Value, mode: Mode, warnings: &mut Vec<String>) -> Res<ActionSequence> {
    let obj = as_object(v, "$")?;
    check_keys(obj, "$", &["robots", "parallel"], mode, warnings)?;
    let robots_v = obj.get("robots").ok_or_else(|| ProtocolError::schema("$.robots", "missing"))?;
    let Value::Array(robots) = robots_v else {
        return Err(ProtocolError::schema("$.robots", "expected a list of robot tracks"));
    };
    let parallel = match obj.get("parallel") {
        None => true,
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if mode == Mode::Lenient && matches!(s.to_ascii_lowercase().as_str(), "true" | "false") => {
            s.eq_ignore_ascii_case("true")
        }
        Some(_) => return Err(ProtocolError::schema("$.parallel", "expected a boolean")),
    };
    let mut tracks: Vec<RobotTrack> = Vec::with_capacity(robots.len());
    for (i, r) in robots.iter().enumerate() {
        let path = format!("$.robots[{i}]");
        let track = track_from_value(r, &path, mode, warnings)?;
        if tracks.iter().any(|t| t.id == track.id) {
            return Err(ProtocolError::schema(&format!("{path}.id"), format!("duplicate robot id `{}`", track.id)));
        }
        tracks.push(track);
    }
    Ok(ActionSequence { robots: tracks, parallel })
}

fn track_from_value(v: &Value, path: &str, mode: Mode, warnings: &mut Vec<String>) -> Res<RobotTrack> {
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["id", "actions"], mode, warnings)?;
    let id = string_field(obj, path, "id", mode)?;
    if id.is_empty() {
        return Err(ProtocolError::schema(&format!("{path}.id"), "empty robot id"));
    }
    let apath = format!("{path}.actions");
    let actions = match obj.get("actions") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(ProtocolError::schema(&apath, "expected a list of steps")),
        None => return Err(ProtocolError::schema(&apath, "missing")),
    };
    let steps = actions
        .iter()
        .enumerate()
        .map(|(j, s)| step_from_value(s, &format!("{apath}[{j}]"), &id, mode, warnings))
        .collect::<Res<Vec<_>>>()?;
    Ok(RobotTrack { id, actions: steps })
}

fn step_from_value(v: &Value, path: &str, owner: &str, mode: Mode, warnings: &mut Vec<String>) -> Res<ActionStep> {
    let obj = as_object(v, path)?;
    let ty = string_field(obj, path, "type", mode)?;
    let ty = if mode == Mode::Lenient { ty.to_ascii_lowercase() } else { ty };
    let step = match ty.as_str() {
        "translate" => {
            check_keys(obj, path, &["type", "target", "speed"], mode, warnings)?;
            ActionStep::Translate { target: target_field(obj, path, mode)?, speed: speed_field(obj, path, mode)? }
        }
        "rotate" => {
            check_keys(obj, path, &["type", "angle", "pivot", "speed"], mode, warnings)?;
            let angle = number_field(obj, path, "angle", mode)?;
            let pivot = match obj.get("pivot") {
                None if mode == Mode::Lenient => Pivot::Center,
                None => return Err(ProtocolError::schema(&format!("{path}.pivot"), "missing")),
                Some(_) => match string_field(obj, path, "pivot", mode)?.as_str() {
                    "center" => Pivot::Center,
                    "left" => Pivot::Left,
                    "right" => Pivot::Right,
                    "centre" if mode == Mode::Lenient => Pivot::Center,
                    other => {
                        return Err(ProtocolError::schema(
                            &format!("{path}.pivot"),
                            format!("unknown pivot `{other}` (center, left, right)"),
                        ))
                    }
                },
            };
            ActionStep::Rotate { angle, pivot, speed: speed_field(obj, path, mode)? }
        }
        "pair_orient" => {
            check_keys(obj, path, &["type", "mode", "partner", "speed"], mode, warnings)?;
            let m = string_field(obj, path, "mode", mode)?;
            let pm = PairMode::parse(&m).ok_or_else(|| {
                ProtocolError::schema(&format!("{path}.mode"), format!("unknown pair mode `{m}`"))
            })?;
            let partner = string_field(obj, path, "partner", mode)?;
            if partner == owner {
                return Err(ProtocolError::schema(&format!("{path}.partner"), "partner must differ from the robot itself"));
            }
            ActionStep::PairOrient { mode: pm, partner, speed: speed_field(obj, path, mode)? }
        }
        "wait" => {
            check_keys(obj, path, &["type", "duration_ms"], mode, warnings)?;
            let d = number_field(obj, path, "duration_ms", mode)?;
            if !(d >= 0.0 && d.fract() == 0.0 && d <= u64::MAX as f64) {
                return Err(ProtocolError::schema(&format!("{path}.duration_ms"), "expected a non-negative integer"));
            }
            ActionStep::Wait { duration_ms: d as u64 }
        }
        other => {
            return Err(ProtocolError::schema(
                &format!("{path}.type"),
                format!("unknown step type `{other}` (translate, rotate, pair_orient, wait)"),
            ))
        }
    };
    Ok(step)
}

fn as_object<'a>(v: &'a Value, path: &str) -> Res<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| ProtocolError::schema(path, "expected an object"))
}

fn check_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str], mode: Mode, warnings: &mut Vec<String>) -> Res<()> {
    for k in obj.keys() {
        if allowed.contains(&k.as_str()) {
            continue;
        }
        match mode {
            Mode::Strict => return Err(ProtocolError::schema(&format!("{path}.{k}"), "unknown key")),
            Mode::Lenient => warnings.push(format!("ignored unknown key {path}.{k}")),
        }
    }
    Ok(())
}

fn string_field(obj: &Map<String, Value>, path: &str, key: &str, mode: Mode) -> Res<String> {
    let p = format!("{path}.{key}");
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) if mode == Mode::Lenient => Ok(n.to_string()),
        Some(_) => Err(ProtocolError::schema(&p, "expected a string")),
        None => Err(ProtocolError::schema(&p, "missing")),
    }
}

fn to_f64(v: &Value, mode: Mode) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) if mode == Mode::Lenient => s.trim().parse().ok(),
        _ => None,
    }
}

fn number_field(obj: &Map<String, Value>, path: &str, key: &str, mode: Mode) -> Res<f64> {
    let p = format!("{path}.{key}");
    let v = obj.get(key).ok_or_else(|| ProtocolError::schema(&p, "missing"))?;
    match to_f64(v, mode) {
        Some(f) if f.is_finite() => Ok(f),
        _ => Err(ProtocolError::schema(&p, "expected a number")),
    }
}

fn integer(v: &Value, mode: Mode) -> Option<i64> {
    match v {
        Value::Number(n) if n.is_i64() => n.as_i64(),
        _ if mode == Mode::Lenient => to_f64(v, mode).filter(|f| f.fract() == 0.0 && f.abs() < 1e15).map(|f| f as i64),
        _ => None,
    }
}

fn speed_field(obj: &Map<String, Value>, path: &str, mode: Mode) -> Res<u8> {
    let p = format!("{path}.speed");
    let v = obj.get("speed").ok_or_else(|| ProtocolError::schema(&p, "missing"))?;
    let s = integer(v, mode).ok_or_else(|| ProtocolError::schema(&p, "expected an integer speed level"))?;
    if (1..=3).contains(&s) {
        Ok(s as u8)
    } else {
        Err(ProtocolError::schema(&p, format!("speed {s} outside 1..=3")))
    }
}

fn target_field(obj: &Map<String, Value>, path: &str, mode: Mode) -> Res<[i64; 2]> {
    let p = format!("{path}.target");
    let v = obj.get("target").ok_or_else(|| ProtocolError::schema(&p, "missing"))?;
    let pair = match v {
        Value::Array(a) if a.len() == 2 => (integer(&a[0], mode), integer(&a[1], mode)),
        Value::Object(o) if mode == Mode::Lenient => (
            o.get("col").or_else(|| o.get("x")).and_then(|x| integer(x, mode)),
            o.get("row").or_else(|| o.get("y")).and_then(|y| integer(y, mode)),
        ),
        _ => (None, None),
    };
    match pair {
        (Some(c), Some(r)) => Ok([c, r]),
        _ => Err(ProtocolError::schema(&p, "expected [col, row] integers")),
    }
}
