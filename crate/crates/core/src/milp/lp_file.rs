//! LP-format text exchange and the external-solver backend.
//!
//! Exports use a fixed subset of the CPLEX LP format — sections `Minimize`,
//! `Subject To`, `Bounds`, `Binary`, `End`, variable names `x{id}`,
//! coefficients with 17 significant digits, LF line endings — so identical
//! models serialize to identical bytes. `parse_lp` reads the same subset
//! back, and solutions travel either as plain `name value` lines or as the
//! `<variable .../>` XML subset most solvers emit.

use std::fs;
use std::process::Command;
use std::time::Instant;

use super::{
    audit_assignment, MilpError, MilpModel, Sense, SolveStats, SolveStatus, SolverResult, VarKind,
};

fn fmt_num(x: f64) -> String {
    // +0.0 folds away a negative zero so exports stay canonical.
    format!("{:.16e}", x + 0.0)
}

/// Merges duplicate ids, drops exact zeros, and orders by id so the printed
/// term list is canonical.
fn canonical_terms(terms: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut sorted: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for &(id, coef) in terms {
        match sorted.binary_search_by_key(&id, |t| t.0) {
            Ok(pos) => sorted[pos].1 += coef,
            Err(pos) => sorted.insert(pos, (id, coef)),
        }
    }
    sorted.retain(|&(_, c)| c != 0.0);
    sorted
}

fn fmt_terms(terms: &[(usize, f64)]) -> String {
    terms
        .iter()
        .map(|&(id, coef)| format!("{} x{}", fmt_num(coef), id))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn sanitize_tag(tag: &str, index: usize) -> String {
    if tag.is_empty() {
        return format!("c{index}");
    }
    tag.chars().map(|c| if c.is_whitespace() || c == ':' { '_' } else { c }).collect()
}

pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let obj = canonical_terms(&model.objective);
    if obj.is_empty() {
        // Degenerate objective keeps an explicit zero term so the section
        // is never empty.
        if !model.vars.is_empty() {
            out.push_str(" 0 x0");
        }
    } else {
        out.push(' ');
        out.push_str(&fmt_terms(&obj));
    }
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let terms = canonical_terms(&c.terms);
        out.push_str(&format!(
            " {}: {} {} {}\n",
            sanitize_tag(&c.tag, i),
            fmt_terms(&terms),
            c.sense,
            fmt_num(c.rhs)
        ));
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.kind == VarKind::Binary {
            continue;
        }
        let line = match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => format!(" x{} free\n", v.id),
            _ if v.lower == v.upper => format!(" x{} = {}\n", v.id, fmt_num(v.lower)),
            (true, true) => {
                format!(" {} <= x{} <= {}\n", fmt_num(v.lower), v.id, fmt_num(v.upper))
            }
            (false, true) => format!(" -inf <= x{} <= {}\n", v.id, fmt_num(v.upper)),
            (true, false) => format!(" {} <= x{} <= +inf\n", fmt_num(v.lower), v.id),
        };
        out.push_str(&line);
    }
    out.push_str("Binary\n");
    for v in &model.vars {
        if v.kind == VarKind::Binary {
            out.push_str(&format!(" x{}\n", v.id));
        }
    }
    out.push_str("End\n");
    out
}

fn parse_var_name(tok: &str, line: usize) -> Result<usize, MilpError> {
    tok.strip_prefix('x')
        .and_then(|rest| rest.parse::<usize>().ok())
        .ok_or_else(|| MilpError::Parse {
            line,
            msg: format!("expected a variable name like x3, got `{tok}`"),
        })
}

fn parse_bound_token(tok: &str, line: usize) -> Result<f64, MilpError> {
    match tok {
        "-inf" => Ok(f64::NEG_INFINITY),
        "+inf" | "inf" => Ok(f64::INFINITY),
        _ => tok.parse::<f64>().map_err(|_| MilpError::Parse {
            line,
            msg: format!("bad bound `{tok}`"),
        }),
    }
}

/// Parses `<num> x<id> + <num> x<id> ...` token streams. A bare `-` token
/// negates the following coefficient; our own exporter keeps signs inside
/// the numbers.
fn parse_terms(tokens: &[&str], line: usize) -> Result<Vec<(usize, f64)>, MilpError> {
    let mut terms = Vec::new();
    let mut pending: Option<f64> = None;
    let mut negate = false;
    for tok in tokens {
        match *tok {
            "+" => continue,
            "-" => {
                negate = !negate;
                continue;
            }
            _ => {}
        }
        if let Ok(num) = tok.parse::<f64>() {
            if pending.is_some() {
                return Err(MilpError::Parse { line, msg: format!("dangling coefficient before `{tok}`") });
            }
            pending = Some(if negate { -num } else { num });
            negate = false;
        } else {
            let id = parse_var_name(tok, line)?;
            let mut coef = pending.take().unwrap_or(1.0);
            if negate {
                coef = -coef;
                negate = false;
            }
            terms.push((id, coef));
        }
    }
    if pending.is_some() {
        return Err(MilpError::Parse { line, msg: "trailing coefficient without a variable".into() });
    }
    Ok(terms)
}

/// Reads the LP subset written by [`export_lp`] back into a model.
/// Variables referenced anywhere get CPLEX default bounds `[0, +inf)`
/// until a Bounds line or the Binary section says otherwise.
pub fn parse_lp(text: &str) -> Result<MilpModel, MilpError> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Constraints,
        Bounds,
        Binary,
        Done,
    }

    struct Builder {
        max_id: Option<usize>,
        objective: Vec<(usize, f64)>,
        constraints: Vec<(Vec<(usize, f64)>, Sense, f64, String)>,
        bounds: Vec<(usize, f64, f64)>,
        binaries: Vec<usize>,
    }
    impl Builder {
        fn see(&mut self, id: usize) {
            self.max_id = Some(self.max_id.map_or(id, |m| m.max(id)));
        }
    }

    let mut section = Section::Preamble;
    let mut b = Builder {
        max_id: None,
        objective: Vec::new(),
        constraints: Vec::new(),
        bounds: Vec::new(),
        binaries: Vec::new(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Minimize" => {
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Constraints;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "Binary" => {
                section = Section::Binary;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Preamble | Section::Done => {
                return Err(MilpError::Parse { line: line_no, msg: format!("unexpected line `{line}`") });
            }
            Section::Objective => {
                let rest = line
                    .split_once(':')
                    .map(|(_, r)| r)
                    .ok_or(MilpError::Parse { line: line_no, msg: "objective needs a `name:` prefix".into() })?;
                let tokens: Vec<&str> = rest.split_whitespace().collect();
                let terms = parse_terms(&tokens, line_no)?;
                for &(id, _) in &terms {
                    b.see(id);
                }
                b.objective.extend(terms.into_iter().filter(|&(_, c)| c != 0.0));
            }
            Section::Constraints => {
                let (tag, rest) = line
                    .split_once(':')
                    .ok_or(MilpError::Parse { line: line_no, msg: "constraint needs a `name:` prefix".into() })?;
                let tokens: Vec<&str> = rest.split_whitespace().collect();
                let sense_pos = tokens
                    .iter()
                    .position(|t| matches!(*t, "<=" | ">=" | "=" | "<" | ">"))
                    .ok_or(MilpError::Parse { line: line_no, msg: "constraint has no sense".into() })?;
                let sense = match tokens[sense_pos] {
                    "<=" | "<" => Sense::Le,
                    ">=" | ">" => Sense::Ge,
                    _ => Sense::Eq,
                };
                if sense_pos + 1 != tokens.len() - 1 {
                    return Err(MilpError::Parse { line: line_no, msg: "expected a single rhs value".into() });
                }
                let rhs: f64 = tokens[sense_pos + 1]
                    .parse()
                    .map_err(|_| MilpError::Parse { line: line_no, msg: "bad rhs".into() })?;
                let terms = parse_terms(&tokens[..sense_pos], line_no)?;
                if terms.is_empty() {
                    return Err(MilpError::Parse { line: line_no, msg: "constraint has no terms".into() });
                }
                for &(id, _) in &terms {
                    b.see(id);
                }
                b.constraints.push((terms, sense, rhs, tag.trim().to_string()));
            }
            Section::Bounds => {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                match tokens.as_slice() {
                    [name, "free"] => {
                        let id = parse_var_name(name, line_no)?;
                        b.see(id);
                        b.bounds.push((id, f64::NEG_INFINITY, f64::INFINITY));
                    }
                    [name, "=", v] => {
                        let id = parse_var_name(name, line_no)?;
                        let v = parse_bound_token(v, line_no)?;
                        b.see(id);
                        b.bounds.push((id, v, v));
                    }
                    [lo, "<=", name, "<=", hi] => {
                        let id = parse_var_name(name, line_no)?;
                        let lo = parse_bound_token(lo, line_no)?;
                        let hi = parse_bound_token(hi, line_no)?;
                        b.see(id);
                        b.bounds.push((id, lo, hi));
                    }
                    _ => {
                        return Err(MilpError::Parse { line: line_no, msg: format!("bad bounds line `{line}`") });
                    }
                }
            }
            Section::Binary => {
                for tok in line.split_whitespace() {
                    let id = parse_var_name(tok, line_no)?;
                    b.see(id);
                    b.binaries.push(id);
                }
            }
        }
    }
    if section != Section::Done {
        return Err(MilpError::Parse { line: text.lines().count(), msg: "missing End marker".into() });
    }

    let mut model = MilpModel::new();
    let n = b.max_id.map_or(0, |m| m + 1);
    for id in 0..n {
        model.add_continuous(format!("x{id}"), 0.0, f64::INFINITY);
    }
    for (id, lo, hi) in b.bounds {
        model.vars[id].lower = lo;
        model.vars[id].upper = hi;
    }
    for id in b.binaries {
        model.vars[id].kind = VarKind::Binary;
        model.vars[id].lower = 0.0;
        model.vars[id].upper = 1.0;
    }
    for (terms, sense, rhs, tag) in b.constraints {
        model.add_constraint(terms, sense, rhs, tag);
    }
    model.objective = b.objective;
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct ImportedSolution {
    /// One value per model variable; absent entries default to zero.
    pub values: Vec<f64>,
    /// Ids that had no entry in the solution text.
    pub missing: Vec<usize>,
}

/// Plain `name value` lines for shipping solutions back from `solve-lp`
/// style subprocesses.
pub fn solution_text(values: &[f64]) -> String {
    let mut out = String::new();
    for (id, v) in values.iter().enumerate() {
        out.push_str(&format!("x{id} {}\n", fmt_num(*v)));
    }
    out
}

/// Parses either whitespace-separated `name value` lines or the
/// `<variable name=".." value=".."/>` XML subset.
pub fn import_solution(text: &str, model: &MilpModel) -> Result<ImportedSolution, MilpError> {
    let n = model.vars.len();
    let mut values = vec![0.0; n];
    let mut seen = vec![false; n];

    let mut record = |id: usize, value: f64, line: usize| -> Result<(), MilpError> {
        if id >= n {
            return Err(MilpError::UnknownVariable(format!("x{id}")));
        }
        if seen[id] {
            return Err(MilpError::DuplicateEntry(format!("x{id}")));
        }
        let _ = line;
        seen[id] = true;
        values[id] = value;
        Ok(())
    };

    if text.trim_start().starts_with('<') {
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let Some(pos) = line.find("<variable") else { continue };
            let rest = &line[pos..];
            let name = xml_attr(rest, "name").ok_or(MilpError::Parse {
                line: line_no,
                msg: "variable element without a name".into(),
            })?;
            let value = xml_attr(rest, "value").ok_or(MilpError::Parse {
                line: line_no,
                msg: "variable element without a value".into(),
            })?;
            let id = parse_var_name(name, line_no)?;
            let value: f64 = value
                .parse()
                .map_err(|_| MilpError::Parse { line: line_no, msg: format!("bad value `{value}`") })?;
            record(id, value, line_no)?;
        }
    } else {
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 2 {
                return Err(MilpError::Parse {
                    line: line_no,
                    msg: format!("expected `name value`, got `{line}`"),
                });
            }
            let id = parse_var_name(tokens[0], line_no)?;
            let value: f64 = tokens[1]
                .parse()
                .map_err(|_| MilpError::Parse { line: line_no, msg: format!("bad value `{}`", tokens[1]) })?;
            record(id, value, line_no)?;
        }
    }

    let missing = (0..n).filter(|&id| !seen[id]).collect();
    Ok(ImportedSolution { values, missing })
}

fn xml_attr<'a>(text: &'a str, attr: &str) -> Option<&'a str> {
    let needle = format!("{attr}=\"");
    let start = text.find(&needle)? + needle.len();
    let end = text[start..].find('"')? + start;
    Some(&text[start..end])
}

/// Exports the model, runs the command template (with `{in}`/`{out}`
/// replaced), and imports the solution the subprocess wrote. A solution
/// file whose first non-empty line is `infeasible` maps to that status.
pub(crate) fn solve_external(model: &MilpModel, template: &str) -> Result<SolverResult, MilpError> {
    if !template.contains("{in}") || !template.contains("{out}") {
        return Err(MilpError::InvalidConfig(
            "external solver template must contain {in} and {out} placeholders".into(),
        ));
    }
    let start = Instant::now();
    let dir = tempfile::tempdir()?;
    let in_path = dir.path().join("model.lp");
    let out_path = dir.path().join("model.sol");
    fs::write(&in_path, export_lp(model))?;

    let cmd = template
        .replace("{in}", &in_path.display().to_string())
        .replace("{out}", &out_path.display().to_string());
    let mut parts = cmd.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| MilpError::InvalidConfig("empty external solver command".into()))?;
    let output = Command::new(program)
        .args(parts)
        .output()
        .map_err(|e| MilpError::External(format!("failed to launch `{program}`: {e}")))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(MilpError::External(format!(
            "command exited with {}: {}",
            output.status,
            stderr.trim().chars().take(300).collect::<String>()
        )));
    }
    if !out_path.exists() {
        return Err(MilpError::External("solver wrote no solution file".into()));
    }
    let text = fs::read_to_string(&out_path)?;
    let stats = SolveStats { nodes: 0, simplex_iterations: 0, wall_seconds: start.elapsed().as_secs_f64() };
    if text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim().eq_ignore_ascii_case("infeasible"))
    {
        return Ok(SolverResult {
            status: SolveStatus::Infeasible,
            objective: f64::INFINITY,
            assignment: Vec::new(),
            stats,
        });
    }
    let imported = import_solution(&text, model)?;
    audit_assignment(model, &imported.values, 1e-6)?;
    Ok(SolverResult {
        status: SolveStatus::Optimal,
        objective: model.objective_value(&imported.values),
        assignment: imported.values,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_continuous("pos", -10.0, 10.0);
        let y = m.add_continuous("vel", 0.0, f64::INFINITY);
        let f = m.add_continuous("free", f64::NEG_INFINITY, f64::INFINITY);
        let z = m.add_binary("pick");
        m.add_constraint(vec![(x, 1.0), (y, -2.5), (z, 4.0)], Sense::Le, 7.5, "mix row");
        m.add_constraint(vec![(f, 1.0), (x, 1.0)], Sense::Eq, 0.0, "tie");
        m.add_objective_term(x, 1.0);
        m.add_objective_term(z, 0.5);
        m
    }

    #[test]
    fn export_is_stable_and_tagged() {
        let text = export_lp(&sample_model());
        assert!(text.starts_with("Minimize\n obj: 1.0000000000000000e0 x0"));
        assert!(text.contains(" mix_row: "));
        assert!(text.contains("<= 7.5000000000000000e0"));
        assert!(text.contains(" x2 free\n"));
        assert!(text.contains("Binary\n x3\n"));
        assert!(text.ends_with("End\n"));
        assert_eq!(text, export_lp(&sample_model()));
    }

    #[test]
    fn empty_objective_prints_an_explicit_zero_term() {
        let mut m = MilpModel::new();
        m.add_continuous("x", 0.0, 1.0);
        let text = export_lp(&m);
        assert!(text.contains("Minimize\n obj: 0 x0\n"));
        let back = parse_lp(&text).unwrap();
        assert!(back.objective.is_empty());
    }

    #[test]
    fn export_parse_round_trip_is_byte_identical() {
        let text = export_lp(&sample_model());
        let parsed = parse_lp(&text).unwrap();
        assert_eq!(export_lp(&parsed), text);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_lp("Minimize\n obj: 1.0 x0\n").is_err()); // missing End
        assert!(parse_lp("Hello\nEnd\n").is_err());
        let bad_sense = "Minimize\n obj: 0 x0\nSubject To\n c0: 1.0 x0 7.5\nEnd\n";
        assert!(parse_lp(bad_sense).is_err());
    }

    #[test]
    fn imports_plain_pairs_with_missing_defaults() {
        let m = sample_model();
        let sol = import_solution("x0 1.5\nx3 1\n", &m).unwrap();
        assert_eq!(sol.values[0], 1.5);
        assert_eq!(sol.values[3], 1.0);
        assert_eq!(sol.values[1], 0.0);
        assert_eq!(sol.missing, vec![1, 2]);

        assert!(matches!(
            import_solution("x0 1\nx0 2\n", &m),
            Err(MilpError::DuplicateEntry(_))
        ));
        assert!(matches!(
            import_solution("x9 1\n", &m),
            Err(MilpError::UnknownVariable(_))
        ));
        assert!(matches!(
            import_solution("y0 1\n", &m),
            Err(MilpError::Parse { .. })
        ));
    }

    #[test]
    fn imports_the_xml_subset() {
        let m = sample_model();
        let text = "<?xml version=\"1.0\"?>\n<CPLEXSolution>\n  <variable name=\"x0\" value=\"2.5\"/>\n  <variable name=\"x1\" value=\"0\"/>\n</CPLEXSolution>\n";
        let sol = import_solution(text, &m).unwrap();
        assert_eq!(sol.values[0], 2.5);
        assert_eq!(sol.missing, vec![2, 3]);
    }

    #[test]
    fn solution_text_round_trips() {
        let m = sample_model();
        let text = solution_text(&[1.0, 2.0, -3.5, 1.0]);
        let sol = import_solution(&text, &m).unwrap();
        assert_eq!(sol.values, vec![1.0, 2.0, -3.5, 1.0]);
        assert!(sol.missing.is_empty());
    }
}
