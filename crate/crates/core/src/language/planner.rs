use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use super::protocol::{PlannerRequest, PlannerResponse};
use super::templates::{parse_utterance, task_template, with_navigation, Parsed};
use super::{Dialogue, SubGoal, SubGoalAction};

pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("planner timed out after {0:?}")]
    Timeout(Duration),
    #[error("planner i/o error: {0}")]
    Io(String),
    #[error("planner response malformed: {0}")]
    Parse(String),
    #[error("bad planner endpoint `{0}`")]
    Endpoint(String),
}

/// Predicts the future sub-goal sequence from the dialogue and the
/// sub-goals already executed.
pub trait Planner: Send + Sync {
    fn plan(&self, d: &Dialogue, hist: &[SubGoal]) -> Result<Vec<SubGoal>, PlannerError>;
}

/// Rule-table planner keyed on task phrases.
#[derive(Clone, Debug)]
pub struct TemplatePlanner {
    classes: Vec<String>,
}

impl TemplatePlanner {
    pub fn new<'a>(classes: impl IntoIterator<Item = &'a str>) -> Self {
        TemplatePlanner {
            classes: classes.into_iter().map(str::to_string).collect(),
        }
    }

    /// Full interaction program understood from the dialogue.
    pub fn interactions(&self, d: &Dialogue) -> Vec<SubGoal> {
        let classes: Vec<&str> = self.classes.iter().map(String::as_str).collect();
        let parsed: Vec<Parsed> = d
            .commander_utterances()
            .filter_map(|u| parse_utterance(u, &classes))
            .collect();
        if let Some((t, p)) = parsed.iter().find_map(|p| match p {
            Parsed::Task(t, p) => Some((*t, p)),
            Parsed::Slice(_) => None,
        }) {
            return task_template(t, p).interactions();
        }
        parsed
            .into_iter()
            .filter_map(|p| match p {
                Parsed::Slice(x) => Some(SubGoal::new(SubGoalAction::Slice, x)),
                Parsed::Task(..) => None,
            })
            .collect()
    }
}

/// Drops the longest program prefix already accomplished in `hist`. Both
/// sides are compared on interactions only; history steps that the program
/// does not contain (such as repairs inserted during execution) are skipped.
pub fn subtract_history(program: &[SubGoal], hist: &[SubGoal]) -> Vec<SubGoal> {
    let prog: Vec<&SubGoal> = program.iter().filter(|g| !g.action.is_navigate()).collect();
    let mut done = 0;
    for h in hist.iter().filter(|g| !g.action.is_navigate()) {
        if done < prog.len() && prog[done] == h {
            done += 1;
        }
    }
    let rest: Vec<SubGoal> = prog[done..].iter().map(|g| (*g).clone()).collect();
    with_navigation(&rest)
}

impl Planner for TemplatePlanner {
    fn plan(&self, d: &Dialogue, hist: &[SubGoal]) -> Result<Vec<SubGoal>, PlannerError> {
        Ok(subtract_history(&self.interactions(d), hist))
    }
}

/// Returns a fixed, known-correct future.
#[derive(Clone, Debug, Default)]
pub struct OraclePlanner {
    pub future: Vec<SubGoal>,
}

impl Planner for OraclePlanner {
    fn plan(&self, _d: &Dialogue, _hist: &[SubGoal]) -> Result<Vec<SubGoal>, PlannerError> {
        Ok(self.future.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RemoteEndpoint {
    /// `tcp://host:port`
    Tcp(String),
    /// `cmd:<shell command>`, spoken to over stdin/stdout.
    Command(String),
}

impl std::str::FromStr for RemoteEndpoint {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            Ok(RemoteEndpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("cmd:") {
            Ok(RemoteEndpoint::Command(cmd.trim().to_string()))
        } else {
            Err(PlannerError::Endpoint(s.to_string()))
        }
    }
}

/// Planner behind the newline-delimited JSON protocol. Each call opens its
/// own connection or child process.
#[derive(Clone, Debug)]
pub struct RemotePlanner {
    pub endpoint: RemoteEndpoint,
    pub timeout: Duration,
}

impl RemotePlanner {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        RemotePlanner {
            endpoint,
            timeout: DEFAULT_REMOTE_TIMEOUT,
        }
    }

    fn exchange(&self, line: &str) -> Result<String, PlannerError> {
        match &self.endpoint {
            RemoteEndpoint::Tcp(addr) => self.exchange_tcp(addr, line),
            RemoteEndpoint::Command(cmd) => self.exchange_cmd(cmd, line),
        }
    }

    fn exchange_tcp(&self, addr: &str, line: &str) -> Result<String, PlannerError> {
        let io = |e: std::io::Error| {
            if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) {
                PlannerError::Timeout(self.timeout)
            } else {
                PlannerError::Io(e.to_string())
            }
        };
        let sock = addr
            .to_socket_addrs()
            .map_err(io)?
            .next()
            .ok_or_else(|| PlannerError::Endpoint(addr.to_string()))?;
        let mut stream = TcpStream::connect_timeout(&sock, self.timeout).map_err(io)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(io)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(io)?;
        stream.write_all(line.as_bytes()).map_err(io)?;
        let mut reply = String::new();
        BufReader::new(stream).read_line(&mut reply).map_err(io)?;
        Ok(reply)
    }

    fn exchange_cmd(&self, cmd: &str, line: &str) -> Result<String, PlannerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PlannerError::Io(e.to_string()))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reply = String::new();
            let r = BufReader::new(stdout).read_line(&mut reply).map(|_| reply);
            let _ = tx.send(r);
        });
        let written = stdin.write_all(line.as_bytes());
        drop(stdin);
        let result = match rx.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => written.map(|_| reply).map_err(|e| PlannerError::Io(e.to_string())),
            Ok(Err(e)) => Err(PlannerError::Io(e.to_string())),
            Err(_) => Err(PlannerError::Timeout(self.timeout)),
        };
        let _ = child.kill();
        let _ = child.wait();
        result
    }
}

impl Planner for RemotePlanner {
    fn plan(&self, d: &Dialogue, hist: &[SubGoal]) -> Result<Vec<SubGoal>, PlannerError> {
        let req = PlannerRequest {
            dialogue: d.clone(),
            history: hist.to_vec(),
        };
        let reply = self.exchange(&req.to_line())?;
        if reply.trim().is_empty() {
            return Err(PlannerError::Parse("empty response".into()));
        }
        PlannerResponse::parse(&reply)
            .map(|r| r.subgoals)
            .map_err(|e| PlannerError::Parse(e.to_string()))
    }
}

/// A configured planner.
#[derive(Clone, Debug)]
pub enum PlannerBackend {
    Template(TemplatePlanner),
    Remote(RemotePlanner),
    Oracle(OraclePlanner),
}

impl Planner for PlannerBackend {
    fn plan(&self, d: &Dialogue, hist: &[SubGoal]) -> Result<Vec<SubGoal>, PlannerError> {
        match self {
            PlannerBackend::Template(p) => p.plan(d, hist),
            PlannerBackend::Remote(p) => p.plan(d, hist),
            PlannerBackend::Oracle(p) => p.plan(d, hist),
        }
    }
}

pub fn plan(d: &Dialogue, hist: &[SubGoal], backend: &PlannerBackend) -> Result<Vec<SubGoal>, PlannerError> {
    backend.plan(d, hist)
}
