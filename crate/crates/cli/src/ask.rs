//! Line-based interactive questionnaire.

use std::io::{BufRead, Write};
use std::sync::Arc;

use shepherd_core::{Clock, DecisionTree, FieldValue, Prompt, TraversalError, TraversalSession};

use crate::Failure;

enum Input {
    Line(String),
    Back,
    Quit,
}

fn read_input(input: &mut dyn BufRead) -> Result<Input, Failure> {
    let mut line = String::new();
    let n = input.read_line(&mut line).map_err(|e| Failure::io(e.to_string()))?;
    if n == 0 {
        return Ok(Input::Quit);
    }
    let line = line.trim();
    Ok(match line {
        "quit" => Input::Quit,
        "back" => Input::Back,
        _ => Input::Line(line.to_string()),
    })
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).and_then(|()| out.flush()).map_err(|e| Failure::io(e.to_string()))
}

/// Runs the questionnaire until every required field is filled. `back` undoes
/// the last answer, `quit` or end of input aborts.
pub fn interact(
    tree: Arc<DecisionTree>,
    clock: &dyn Clock,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<TraversalSession, Failure> {
    let mut session = TraversalSession::start(tree, clock)?;
    say(out, "Answer by id or number. Type `back` to undo, `quit` to stop.\n")?;
    loop {
        match session.current_prompt() {
            Prompt::Question { text, options, .. } => {
                let mut block = format!("\n{text}\n");
                for (i, o) in options.iter().enumerate() {
                    block.push_str(&format!("  {}) {} [{}]\n", i + 1, o.label, o.id));
                }
                block.push_str("> ");
                say(out, &block)?;
                match read_input(input)? {
                    Input::Quit => return Err(Failure::aborted()),
                    Input::Back => {
                        if let Err(TraversalError::AtRoot) = session.undo() {
                            say(out, "already at the first question\n")?;
                        }
                    }
                    Input::Line(line) => {
                        let chosen = match line.parse::<usize>() {
                            Ok(i) if (1..=options.len()).contains(&i) => options[i - 1].id.clone(),
                            _ => line,
                        };
                        if let Err(e) = session.apply_answer(&chosen) {
                            say(out, &format!("{e}\n"))?;
                        }
                    }
                }
            }
            Prompt::Leaf { prescription, fields, .. } => {
                say(out, &format!("\n{prescription}\n"))?;
                let mut went_back = false;
                for field in fields {
                    let need = if field.required { "required" } else { "optional, Enter to skip" };
                    let hint = field.hint.as_deref().map(|h| format!(" - {h}")).unwrap_or_default();
                    loop {
                        say(out, &format!("{} ({}, {need}){hint}\n> ", field.id, field.field_type))?;
                        match read_input(input)? {
                            Input::Quit => return Err(Failure::aborted()),
                            Input::Back => {
                                session.undo()?;
                                went_back = true;
                                break;
                            }
                            Input::Line(line) if line.is_empty() && !field.required => break,
                            Input::Line(line) => match session.set_field(&field.id, FieldValue::Text(line)) {
                                Ok(()) => break,
                                Err(e) => say(out, &format!("{e}\n"))?,
                            },
                        }
                    }
                    if went_back {
                        break;
                    }
                }
                if !went_back {
                    return Ok(session);
                }
            }
        }
    }
}
