use std::io::{self, Write};

use super::{RatingEvent, RoutedRequest};

/// `timestamp<TAB>user<TAB>movie` per event, with a header line.
pub fn write_trace<W: Write>(out: &mut W, events: &[RatingEvent]) -> io::Result<()> {
    writeln!(out, "timestamp\tuser_id\tmovie_id")?;
    for e in events {
        writeln!(out, "{}\t{}\t{}", e.timestamp, e.user_id, e.movie_id)?;
    }
    Ok(())
}

/// `timestamp<TAB>user<TAB>cp<TAB>content` per routed request.
pub fn write_routed<W: Write>(out: &mut W, requests: &[RoutedRequest]) -> io::Result<()> {
    writeln!(out, "timestamp\tuser_id\tcp_id\tcontent_id")?;
    for r in requests {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.timestamp, r.user_id, r.cp_id.0, r.content.0
        )?;
    }
    Ok(())
}
