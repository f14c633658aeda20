//! Reader for MATPOWER `.m` case files.
//!
//! Only `mpc.baseMVA`, `mpc.bus` and `mpc.branch` are interpreted. Every other
//! assignment (generator tables, cost data, cell arrays) is skipped. Bus shunts
//! are converted from MW/MVAr at 1 p.u. to per-unit, angles from degrees to
//! radians.

use super::case::{RawBranch, RawBus, RawCase};
use crate::error::{PsseError, Result};

// Column positions in the MATPOWER bus and branch tables.
const BUS_I: usize = 0;
const BUS_TYPE: usize = 1;
const GS: usize = 4;
const BS: usize = 5;
const VM: usize = 7;
const VA: usize = 8;
const REF_TYPE: f64 = 3.0;

const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_R: usize = 2;
const BR_X: usize = 3;
const BR_B: usize = 4;
const TAP: usize = 8;
const SHIFT: usize = 9;
const BR_STATUS: usize = 10;

const MIN_BUS_COLS: usize = 6;
const MIN_BRANCH_COLS: usize = 5;

#[derive(Debug)]
struct Row {
    line: usize,
    values: Vec<f64>,
}

enum State {
    Top,
    Matrix { name: String, rows: Vec<Row>, current: Vec<f64>, start: usize },
    Cell,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> PsseError {
    PsseError::Parse {
        line,
        column,
        message: message.into(),
    }
}

pub(crate) fn parse(text: &str) -> Result<RawCase> {
    let mut base_mva = None;
    let mut bus = None;
    let mut branch = None;
    let mut state = State::Top;
    let mut last_line = 1;

    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = match full_line.find('%') {
            Some(p) => &full_line[..p],
            None => full_line,
        };
        let mut rest: &str = line;
        let mut offset = 0usize;

        loop {
            match &mut state {
                State::Top => {
                    let trimmed = rest.trim_start();
                    offset += rest.len() - trimmed.len();
                    rest = trimmed;
                    let Some(after) = rest.strip_prefix("mpc.") else {
                        break;
                    };
                    let Some(eq) = after.find('=') else {
                        break;
                    };
                    let name = after[..eq].trim().to_string();
                    let value = &after[eq + 1..];
                    let value_trim = value.trim_start();
                    let value_col = offset + 4 + eq + 1 + (value.len() - value_trim.len());
                    if let Some(body) = value_trim.strip_prefix('[') {
                        state = State::Matrix {
                            name,
                            rows: Vec::new(),
                            current: Vec::new(),
                            start: line_no,
                        };
                        offset = value_col + 1;
                        rest = body;
                        continue;
                    }
                    if value_trim.starts_with('{') {
                        if !value_trim.contains('}') {
                            state = State::Cell;
                        }
                        break;
                    }
                    if name == "baseMVA" {
                        let token = value_trim.trim_end().trim_end_matches(';').trim();
                        let v: f64 = token.parse().map_err(|_| {
                            err(line_no, value_col + 1, format!("invalid baseMVA value '{token}'"))
                        })?;
                        base_mva = Some(v);
                    }
                    break;
                }
                State::Cell => {
                    if rest.contains('}') {
                        state = State::Top;
                    }
                    break;
                }
                State::Matrix { name, rows, current, .. } => {
                    let mut closed = false;
                    let mut consumed = rest.len();
                    let mut token_start: Option<usize> = None;
                    let bytes = rest.as_bytes();
                    let mut i = 0;
                    while i <= bytes.len() {
                        let c = if i < bytes.len() { bytes[i] as char } else { '\n' };
                        let is_sep = c.is_whitespace() || c == ',' || c == ';' || c == ']';
                        if is_sep {
                            if let Some(s) = token_start.take() {
                                let tok = &rest[s..i];
                                let v: f64 = tok.parse().map_err(|_| {
                                    err(
                                        line_no,
                                        offset + s + 1,
                                        format!("invalid number '{tok}' in mpc.{name}"),
                                    )
                                })?;
                                current.push(v);
                            }
                            if c == ';' && !current.is_empty() {
                                rows.push(Row { line: line_no, values: std::mem::take(current) });
                            }
                            if c == ']' {
                                if !current.is_empty() {
                                    rows.push(Row { line: line_no, values: std::mem::take(current) });
                                }
                                closed = true;
                                consumed = i + 1;
                                break;
                            }
                        } else if token_start.is_none() {
                            token_start = Some(i);
                        }
                        i += 1;
                    }
                    if closed {
                        let table = std::mem::take(rows);
                        match name.as_str() {
                            "bus" => bus = Some(table),
                            "branch" => branch = Some(table),
                            _ => {}
                        }
                        state = State::Top;
                        offset += consumed;
                        rest = &rest[consumed..];
                        continue;
                    }
                    // End of line terminates a row when no ';' was written.
                    if !current.is_empty() {
                        rows.push(Row { line: line_no, values: std::mem::take(current) });
                    }
                    break;
                }
            }
        }
    }

    if let State::Matrix { name, start, .. } = &state {
        return Err(err(*start, 1, format!("unterminated matrix mpc.{name}")));
    }

    let base_mva = base_mva.ok_or_else(|| err(last_line, 1, "missing mpc.baseMVA"))?;
    let bus = bus.ok_or_else(|| err(last_line, 1, "missing mpc.bus table"))?;
    let branch = branch.ok_or_else(|| err(last_line, 1, "missing mpc.branch table"))?;

    let mut raw = RawCase {
        base_mva,
        ..RawCase::default()
    };
    for row in &bus {
        let v = &row.values;
        if v.len() < MIN_BUS_COLS {
            return Err(err(
                row.line,
                1,
                format!("bus row has {} columns, need at least {MIN_BUS_COLS}", v.len()),
            ));
        }
        raw.buses.push(RawBus {
            id: as_id(v[BUS_I], row.line)?,
            gs: v[GS] / base_mva,
            bs: v[BS] / base_mva,
            reference: v[BUS_TYPE] == REF_TYPE,
            vm: v.get(VM).copied().unwrap_or(1.0),
            va: v.get(VA).copied().unwrap_or(0.0).to_radians(),
        });
    }
    for row in &branch {
        let v = &row.values;
        if v.len() < MIN_BRANCH_COLS {
            return Err(err(
                row.line,
                1,
                format!(
                    "branch row has {} columns, need at least {MIN_BRANCH_COLS}",
                    v.len()
                ),
            ));
        }
        raw.branches.push(RawBranch {
            from: as_id(v[F_BUS], row.line)?,
            to: as_id(v[T_BUS], row.line)?,
            r: v[BR_R],
            x: v[BR_X],
            b: v[BR_B],
            tap: v.get(TAP).copied().unwrap_or(0.0),
            shift: v.get(SHIFT).copied().unwrap_or(0.0).to_radians(),
            status: v.get(BR_STATUS).copied().unwrap_or(1.0) != 0.0,
        });
    }
    Ok(raw)
}

fn as_id(x: f64, line: usize) -> Result<i64> {
    if x.fract() != 0.0 || !x.is_finite() {
        return Err(err(line, 1, format!("bus number {x} is not an integer")));
    }
    Ok(x as i64)
}
