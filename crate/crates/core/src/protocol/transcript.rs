use std::io::Write;

use super::{AuthFailure, AuthMessage};

/// One handshake event: tick, session id, message variant and outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptLine {
    pub tick: u64,
    pub session: u64,
    pub variant: &'static str,
    pub outcome: Result<(), AuthFailure>,
}

impl TranscriptLine {
    pub fn outcome_label(&self) -> String {
        match self.outcome {
            Ok(()) => "ok".to_string(),
            Err(reason) => format!("failed:{reason:?}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Transcript {
    lines: Vec<TranscriptLine>,
    enabled: bool,
}

impl Transcript {
    pub fn new(enabled: bool) -> Self {
        Transcript {
            lines: Vec::new(),
            enabled,
        }
    }

    pub fn record(
        &mut self,
        tick: u64,
        session: u64,
        message: &AuthMessage,
        outcome: Result<(), AuthFailure>,
    ) {
        if self.enabled {
            self.lines.push(TranscriptLine {
                tick,
                session,
                variant: message.variant(),
                outcome,
            });
        }
    }

    pub fn lines(&self) -> &[TranscriptLine] {
        &self.lines
    }

    /// Tab-separated, one line per event.
    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for l in &self.lines {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                l.tick,
                l.session,
                l.variant,
                l.outcome_label()
            )?;
        }
        Ok(())
    }
}
