//! The long-running front end. Commands arrive one XML element at a time:
//!
//! ```text
//! <load path="3-col.asp"/>
//! <run/>
//! <forget type="r"/>
//! <reset/>
//! <exit/>
//! ```
//!
//! Every command is answered by `OK` or `ERROR: <message>`, a `run` adds its
//! output lines, and every reply ends with a blank line.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{Engine, EngineOptions};
use crate::model::GroundAtom;
use crate::parser::{parse_program, Program};
use crate::solver::Count;
use crate::store::ForgetMode;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Load(PathBuf),
    Run,
    Forget(String),
    Reset,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed command `{0}`")]
    Malformed(String),
    #[error("unknown command <{0}>")]
    UnknownElement(String),
    #[error("<{element}> requires attribute `{attribute}`")]
    MissingAttribute {
        element: String,
        attribute: &'static str,
    },
    #[error("<{element}> does not accept attribute `{attribute}`")]
    UnexpectedAttribute { element: String, attribute: String },
}

/// Splits a line into its elements and parses each one.
pub fn parse_commands(line: &str) -> Vec<Result<Command, ProtocolError>> {
    let mut out = Vec::new();
    let mut rest = line.trim();
    while !rest.is_empty() {
        let Some(end) = rest.find('>') else {
            out.push(Err(ProtocolError::Malformed(rest.to_string())));
            break;
        };
        out.push(parse_command(&rest[..=end]));
        rest = rest[end + 1..].trim_start();
    }
    out
}

/// Parses a single self-closing element such as `<load path="f.asp"/>`.
pub fn parse_command(element: &str) -> Result<Command, ProtocolError> {
    let malformed = || ProtocolError::Malformed(element.to_string());
    let inner = element
        .trim()
        .strip_prefix('<')
        .and_then(|s| s.strip_suffix("/>"))
        .ok_or_else(malformed)?
        .trim();
    let name_end = inner.find(char::is_whitespace).unwrap_or(inner.len());
    let (name, mut attrs_text) = inner.split_at(name_end);
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(malformed());
    }
    let mut attrs: Vec<(String, String)> = Vec::new();
    loop {
        attrs_text = attrs_text.trim_start();
        if attrs_text.is_empty() {
            break;
        }
        let eq = attrs_text.find('=').ok_or_else(malformed)?;
        let key = attrs_text[..eq].trim();
        let after = attrs_text[eq + 1..].trim_start();
        let quote = after.chars().next().filter(|&c| c == '"' || c == '\'').ok_or_else(malformed)?;
        let close = after[1..].find(quote).ok_or_else(malformed)?;
        attrs.push((key.to_string(), after[1..=close].to_string()));
        attrs_text = &after[close + 2..];
    }
    let take = |attribute: &'static str, attrs: &mut Vec<(String, String)>| {
        let pos = attrs.iter().position(|(k, _)| k == attribute).ok_or(ProtocolError::MissingAttribute {
            element: name.to_string(),
            attribute,
        })?;
        Ok::<String, ProtocolError>(attrs.remove(pos).1)
    };
    let cmd = match name {
        "load" => Command::Load(PathBuf::from(take("path", &mut attrs)?)),
        "run" => Command::Run,
        "forget" => Command::Forget(take("type", &mut attrs)?),
        "reset" => Command::Reset,
        "exit" => Command::Exit,
        other => return Err(ProtocolError::UnknownElement(other.to_string())),
    };
    if let Some((k, _)) = attrs.into_iter().next() {
        return Err(ProtocolError::UnexpectedAttribute {
            element: name.to_string(),
            attribute: k,
        });
    }
    Ok(cmd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    /// Print answer sets.
    AnswerSets,
    /// Print the tailored ground program instead of solving.
    GroundProgram,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub output: Output,
    pub count: Count,
    pub tailoring: bool,
    /// Directory relative load paths are resolved against.
    pub base_dir: PathBuf,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            output: Output::AnswerSets,
            count: Count::First(1),
            tailoring: true,
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub text: String,
    pub exit: bool,
}

impl Response {
    fn ok(lines: Vec<String>) -> Self {
        let mut text = String::from("OK\n");
        for l in lines {
            text.push_str(&l);
            text.push('\n');
        }
        text.push('\n');
        Response { text, exit: false }
    }

    fn error(message: impl std::fmt::Display) -> Self {
        Response {
            text: format!("ERROR: {message}\n\n"),
            exit: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    program: Program,
    pending: Vec<GroundAtom>,
    engine: Option<Engine>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        Session {
            config,
            program: Program::new(),
            pending: Vec::new(),
            engine: None,
        }
    }

    pub fn engine(&self) -> Option<&Engine> {
        self.engine.as_ref()
    }

    pub fn engine_mut(&mut self) -> Option<&mut Engine> {
        self.engine.as_mut()
    }

    pub fn pending_facts(&self) -> &[GroundAtom] {
        &self.pending
    }

    /// True once the first `run` has fixed the program.
    pub fn running(&self) -> bool {
        self.engine.is_some()
    }

    pub fn handle_line(&mut self, line: &str) -> Vec<Response> {
        let mut out = Vec::new();
        for parsed in parse_commands(line) {
            let response = match parsed {
                Ok(cmd) => self.handle(cmd),
                Err(e) => Response::error(e),
            };
            let exit = response.exit;
            out.push(response);
            if exit {
                break;
            }
        }
        out
    }

    pub fn handle(&mut self, cmd: Command) -> Response {
        match cmd {
            Command::Load(path) => self.load(&path),
            Command::Run => self.run(),
            Command::Forget(mode) => match mode.parse::<ForgetMode>() {
                Ok(mode) => {
                    if let Some(engine) = &mut self.engine {
                        engine.forget(mode);
                    }
                    Response::ok(Vec::new())
                }
                Err(e) => Response::error(e),
            },
            Command::Reset => {
                *self = Session::new(self.config.clone());
                Response::ok(Vec::new())
            }
            Command::Exit => Response {
                text: "OK\n\n".to_string(),
                exit: true,
            },
        }
    }

    fn load(&mut self, path: &Path) -> Response {
        let full = self.config.base_dir.join(path);
        let text = match fs::read_to_string(&full) {
            Ok(t) => t,
            Err(e) => return Response::error(format!("cannot read {}: {e}", path.display())),
        };
        let unit = match parse_program(&text) {
            Ok(u) => u,
            Err(e) => return Response::error(format!("{}: {e}", path.display())),
        };
        if unit.has_rules() || !unit.annotations.is_empty() {
            if self.running() {
                return Response::error(format!(
                    "{}: rule files are only accepted before the first run; file discarded",
                    path.display()
                ));
            }
            self.program.extend(unit);
        } else {
            for f in unit.facts {
                if !self.pending.contains(&f) {
                    self.pending.push(f);
                }
            }
        }
        Response::ok(Vec::new())
    }

    fn run(&mut self) -> Response {
        if self.engine.is_none() {
            if self.program.is_empty() {
                return Response::error("no program loaded");
            }
            let options = EngineOptions {
                tailoring: self.config.tailoring,
            };
            self.engine = Some(Engine::new(self.program.clone(), options));
        }
        let engine = self.engine.as_mut().expect("engine exists");
        let facts = std::mem::take(&mut self.pending);
        engine.ground(&facts);
        let lines = match self.config.output {
            Output::GroundProgram => {
                let lines = engine.tailored_program().render(engine.table());
                Ok(lines)
            }
            Output::AnswerSets => engine.solve(self.config.count).map(|sets| {
                let weak = engine.program().has_weak_constraints();
                let mut lines = Vec::new();
                for s in &sets {
                    lines.push(s.render(engine.table()));
                    if let Some(cost) = s.cost_line().filter(|_| weak) {
                        lines.push(cost);
                    }
                }
                if sets.is_empty() {
                    lines.push("INCOHERENT".to_string());
                } else if weak {
                    lines.push("OPTIMUM".to_string());
                }
                lines
            }),
        };
        engine.finish_shot();
        match lines {
            Ok(lines) => Response::ok(lines),
            Err(e) => Response::error(e),
        }
    }
}

/// Reads commands line by line until `exit` or end of input.
pub fn run_session<R: BufRead, W: Write>(session: &mut Session, input: R, mut output: W) -> io::Result<bool> {
    for line in input.lines() {
        let line = line?;
        for response in session.handle_line(&line) {
            output.write_all(response.text.as_bytes())?;
            output.flush()?;
            if response.exit {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Serves one client at a time; the session survives disconnects and the
/// server stops after `exit`.
pub fn serve(listener: TcpListener, config: SessionConfig) -> io::Result<()> {
    let mut session = Session::new(config);
    for stream in listener.incoming() {
        let stream = stream?;
        let reader = BufReader::new(stream.try_clone()?);
        if run_session(&mut session, reader, stream)? {
            return Ok(());
        }
    }
    Ok(())
}
