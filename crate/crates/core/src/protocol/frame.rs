//! Reading whole frames off a byte stream.

use std::io::{self, BufRead, ErrorKind};

use super::codec::{startvm_body_len, tokenize};

/// Longest request or reply line accepted, terminator included.
pub const MAX_LINE_BYTES: usize = 1 << 20;
/// Largest STARTVM image body accepted.
pub const MAX_IMAGE_BYTES: u64 = 1 << 30;
/// Largest complete list reply accepted.
pub const MAX_REPLY_BYTES: usize = 64 << 20;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line longer than {MAX_LINE_BYTES} bytes")]
    LineTooLong,
    #[error("reply longer than {MAX_REPLY_BYTES} bytes")]
    ReplyTooLong,
    #[error("stream ended inside a frame")]
    Truncated,
    #[error("image body of {0} bytes exceeds the {MAX_IMAGE_BYTES} byte limit")]
    BodyTooLarge(u64),
}

/// Reads one line, returning it without its LF. A final line lacking its
/// LF is returned as is; `None` means the stream ended before any byte.
pub fn read_line<R: BufRead>(r: &mut R) -> Result<Option<Vec<u8>>, FrameError> {
    let mut line = Vec::new();
    loop {
        let buf = match r.fill_buf() {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        };
        if buf.is_empty() {
            return Ok(if line.is_empty() { None } else { Some(line) });
        }
        let (chunk, done) = match buf.iter().position(|b| *b == b'\n') {
            Some(pos) => (&buf[..pos], Some(pos + 1)),
            None => (buf, None),
        };
        if line.len() + chunk.len() + usize::from(done.is_some()) > MAX_LINE_BYTES {
            return Err(FrameError::LineTooLong);
        }
        line.extend_from_slice(chunk);
        match done {
            Some(n) => {
                r.consume(n);
                return Ok(Some(line));
            }
            None => {
                let n = chunk.len();
                r.consume(n);
            }
        }
    }
}

/// Reads one request frame: the request line plus, when `with_body` is set
/// and the line is a STARTVM header, the announced body. The returned bytes
/// end the line with LF, so they parse with `parse_request`.
pub fn read_request_frame<R: BufRead>(
    r: &mut R,
    with_body: bool,
) -> Result<Option<Vec<u8>>, FrameError> {
    let Some(mut frame) = read_line(r)? else {
        return Ok(None);
    };
    let body_len = if with_body {
        startvm_body_len(&frame)
    } else {
        None
    };
    frame.push(b'\n');
    if let Some(n) = body_len {
        if n > MAX_IMAGE_BYTES {
            return Err(FrameError::BodyTooLarge(n));
        }
        let start = frame.len();
        frame.resize(start + n as usize, 0);
        r.read_exact(&mut frame[start..]).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => FrameError::Truncated,
            _ => e.into(),
        })?;
    }
    Ok(Some(frame))
}

/// Reads one reply frame. When `expect_list` is set and the header is a
/// bare `OK`, lines are read through the closing `.` line.
pub fn read_reply_frame<R: BufRead>(r: &mut R, expect_list: bool) -> Result<Vec<u8>, FrameError> {
    let header = read_line(r)?.ok_or(FrameError::Truncated)?;
    let is_open_list = expect_list && header_is_bare_ok(&header);
    let mut frame = header;
    frame.push(b'\n');
    if !is_open_list {
        return Ok(frame);
    }
    loop {
        let line = read_line(r)?.ok_or(FrameError::Truncated)?;
        if frame.len() + line.len() + 1 > MAX_REPLY_BYTES {
            return Err(FrameError::ReplyTooLong);
        }
        let end = is_dot(&line);
        frame.extend_from_slice(&line);
        frame.push(b'\n');
        if end {
            return Ok(frame);
        }
    }
}

fn tokens_of(line: &[u8]) -> Vec<&str> {
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    std::str::from_utf8(line).map(tokenize).unwrap_or_default()
}

fn header_is_bare_ok(line: &[u8]) -> bool {
    tokens_of(line) == ["OK"]
}

fn is_dot(line: &[u8]) -> bool {
    tokens_of(line) == ["."]
}
