use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Pid, RequestId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrive,
    Wake,
    Dispatch,
    Preempt,
    Complete,
    Block,
    Unblock,
    Settle,
    Sleep,
    Boost,
    Decay,
    Exit,
}

impl EventKind {
    const ALL: [EventKind; 12] = [
        EventKind::Arrive,
        EventKind::Wake,
        EventKind::Dispatch,
        EventKind::Preempt,
        EventKind::Complete,
        EventKind::Block,
        EventKind::Unblock,
        EventKind::Settle,
        EventKind::Sleep,
        EventKind::Boost,
        EventKind::Decay,
        EventKind::Exit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Arrive => "arrive",
            EventKind::Wake => "wake",
            EventKind::Dispatch => "dispatch",
            EventKind::Preempt => "preempt",
            EventKind::Complete => "complete",
            EventKind::Block => "block",
            EventKind::Unblock => "unblock",
            EventKind::Settle => "settle",
            EventKind::Sleep => "sleep",
            EventKind::Boost => "boost",
            EventKind::Decay => "decay",
            EventKind::Exit => "exit",
        }
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown trace event {s:?}"))
    }
}

/// One trace record. Records are kept in emission order, which is also
/// (time, sequence) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: SimTime,
    pub kind: EventKind,
    pub pid: Option<Pid>,
    pub req: Option<RequestId>,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.time.as_us(), self.kind.name())?;
        match self.pid {
            Some(p) => write!(f, "{} ", p.0)?,
            None => f.write_str("- ")?,
        }
        match self.req {
            Some(r) => write!(f, "{} ", r.0)?,
            None => f.write_str("- ")?,
        }
        if self.detail.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&self.detail)
        }
    }
}

impl FromStr for TraceEvent {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut it = line.splitn(5, ' ');
        let mut field = |name: &str| it.next().ok_or_else(|| format!("missing {name} in {line:?}"));
        let time = field("time")?
            .parse::<u64>()
            .map_err(|e| format!("bad time: {e}"))?;
        let kind = field("event")?.parse()?;
        let opt = |s: &str| -> Result<Option<u64>, String> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| format!("bad id {s:?}: {e}"))
            }
        };
        let pid = opt(field("pid")?)?.map(|p| Pid(p as u32));
        let req = opt(field("req")?)?.map(RequestId);
        let detail = match field("detail")? {
            "-" => String::new(),
            d => d.to_string(),
        };
        Ok(TraceEvent {
            time: SimTime(time),
            kind,
            pid,
            req,
            detail,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(
        &mut self,
        time: SimTime,
        kind: EventKind,
        pid: Option<Pid>,
        req: Option<RequestId>,
        detail: impl Into<String>,
    ) {
        self.events.push(TraceEvent {
            time,
            kind,
            pid,
            req,
            detail: detail.into(),
        });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Line-delimited text form: `time_us event pid req detail`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.events.len() * 24);
        for e in &self.events {
            writeln!(s, "{e}").expect("writing to a String");
        }
        s
    }

    /// Parses trace text; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Trace, String> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        Ok(Trace { events })
    }
}
