use serde_json::{Map, Number, Value};
use wildmatch::WildMatch;

use crate::interp::Interpretation;

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub fn json_number(x: f64) -> Value {
    Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
}

/// Atom name → value, keys sorted. `filter` is a `*` glob over atom names.
pub fn interpretation_json(i: &Interpretation, filter: Option<&str>) -> Value {
    let glob = filter.map(WildMatch::new);
    let mut map = Map::new();
    for id in 0..i.index().len() {
        let name = i.index().name(id as _);
        if glob.as_ref().map_or(true, |g| g.matches(&name)) {
            map.insert(name, json_number(i.values()[id]));
        }
    }
    Value::Object(map)
}

pub fn interpretation_report(i: &Interpretation, filter: Option<&str>) -> String {
    serde_json::to_string_pretty(&interpretation_json(i, filter)).unwrap()
}
