//! Judge bridge: line-delimited JSON over a byte stream. Each request line
//! `{"pred":…,"gt":…,"kind":…}` gets exactly one response line, in order:
//! `{"tier":…}` on success or `{"error":…}` on failure.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::tier::{normalize_label, Judge, MatchKind, MatchTier};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeRequest {
    pub pred: String,
    pub gt: String,
    pub kind: MatchKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BridgeResponse {
    Tier { tier: MatchTier },
    Failure { error: String },
}

struct Channel {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    cache: HashMap<(String, String, MatchKind), MatchTier>,
}

/// Client side of the bridge. Requests are serialized through a lock and
/// answers are cached per normalized input, so repeated pairs are stable
/// within a session.
pub struct BridgeJudge {
    channel: Mutex<Channel>,
    child: Option<Mutex<Child>>,
}

impl BridgeJudge {
    pub fn from_streams(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        BridgeJudge {
            channel: Mutex::new(Channel {
                reader: Box::new(BufReader::new(reader)),
                writer: Box::new(BufWriter::new(writer)),
                cache: HashMap::new(),
            }),
            child: None,
        }
    }

    pub fn connect_tcp(addr: &str) -> Result<Self> {
        let stream =
            TcpStream::connect(addr).map_err(|e| Error::JudgeUnavailable(format!("connect {addr}: {e}")))?;
        let reader = stream
            .try_clone()
            .map_err(|e| Error::JudgeUnavailable(format!("clone socket: {e}")))?;
        Ok(Self::from_streams(reader, stream))
    }

    /// Spawn `command` (program followed by whitespace-separated arguments)
    /// and talk to it over stdin/stdout.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidParam("empty judge command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::JudgeUnavailable(format!("spawn {program}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let mut judge = Self::from_streams(stdout, stdin);
        judge.child = Some(Mutex::new(child));
        Ok(judge)
    }

    /// `tcp:<host:port>` or `exec:<command>`.
    pub fn from_endpoint(endpoint: &str) -> Result<Self> {
        if let Some(addr) = endpoint.strip_prefix("tcp:") {
            Self::connect_tcp(addr)
        } else if let Some(cmd) = endpoint.strip_prefix("exec:") {
            Self::spawn(cmd)
        } else {
            Err(Error::InvalidParam(format!(
                "bridge endpoint must start with tcp: or exec:, got {endpoint:?}"
            )))
        }
    }
}

impl Drop for BridgeJudge {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            let mut child = child.lock().unwrap_or_else(|p| p.into_inner());
            // closing stdin ends a well-behaved server; kill covers the rest
            if let Ok(mut ch) = self.channel.lock() {
                ch.writer = Box::new(std::io::sink());
            }
            if child.try_wait().ok().flatten().is_none() {
                let _ = child.kill();
            }
            let _ = child.wait();
        }
    }
}

impl Judge for BridgeJudge {
    fn judge(&self, pred: &str, gt: &str, kind: MatchKind) -> Result<MatchTier> {
        let mut ch = self
            .channel
            .lock()
            .map_err(|_| Error::JudgeUnavailable("bridge lock poisoned".into()))?;
        let key = (normalize_label(pred), normalize_label(gt), kind);
        if let Some(&tier) = ch.cache.get(&key) {
            return Ok(tier);
        }
        let request = BridgeRequest {
            pred: pred.to_string(),
            gt: gt.to_string(),
            kind,
        };
        let line = serde_json::to_string(&request).expect("request serializes");
        let io_err = |e: std::io::Error| Error::JudgeUnavailable(format!("bridge i/o: {e}"));
        writeln!(ch.writer, "{line}").map_err(io_err)?;
        ch.writer.flush().map_err(io_err)?;
        let mut reply = String::new();
        if ch.reader.read_line(&mut reply).map_err(io_err)? == 0 {
            return Err(Error::JudgeUnavailable("bridge closed the stream".into()));
        }
        let tier = match serde_json::from_str::<BridgeResponse>(reply.trim_end()) {
            Ok(BridgeResponse::Tier { tier }) => tier,
            Ok(BridgeResponse::Failure { error }) => return Err(Error::JudgeUnavailable(error)),
            Err(e) => return Err(Error::JudgeUnavailable(format!("malformed bridge reply: {e}"))),
        };
        ch.cache.insert(key, tier);
        Ok(tier)
    }
}

/// Server side: answer each request line with `judge`, applying the
/// identical-label short-circuit. Malformed lines get an error record and
/// the loop continues. Returns the number of lines handled.
pub fn serve_judge(judge: &dyn Judge, reader: impl BufRead, mut writer: impl Write) -> Result<usize> {
    let mut handled = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<BridgeRequest>(&line) {
            Ok(req) => match super::tier::match_tier(&req.pred, &req.gt, req.kind, judge) {
                Ok(tier) => BridgeResponse::Tier { tier },
                Err(e) => BridgeResponse::Failure { error: e.to_string() },
            },
            Err(e) => BridgeResponse::Failure {
                error: format!("malformed request: {e}"),
            },
        };
        writeln!(writer, "{}", serde_json::to_string(&response).expect("response serializes"))?;
        writer.flush()?;
        handled += 1;
    }
    Ok(handled)
}
