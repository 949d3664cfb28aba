//! Reading whole messages off byte streams whose reads time out
//! periodically, so that callers can poll a stop flag or a deadline
//! between partial reads without losing data.

use std::io::{self, ErrorKind, Read};

use crate::codec::{opcua, s7, CodecError};

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    /// Peer closed the stream between two messages.
    #[error("connection closed")]
    Closed,
    /// The poll callback asked to give up.
    #[error("read abandoned")]
    Abandoned,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Fills `buf` completely. `keep_waiting` is consulted after every read
/// timeout; returning false abandons the read.
pub fn read_full<R: Read + ?Sized>(
    r: &mut R,
    buf: &mut [u8],
    keep_waiting: &mut dyn FnMut() -> bool,
) -> Result<(), ReadError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Err(ReadError::Closed),
            Ok(0) => return Err(io::Error::from(ErrorKind::UnexpectedEof).into()),
            Ok(k) => filled += k,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if !keep_waiting() {
                    return Err(ReadError::Abandoned);
                }
            }
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// One TPKT packet, header included.
pub fn read_tpkt<R: Read + ?Sized>(
    r: &mut R,
    keep_waiting: &mut dyn FnMut() -> bool,
) -> Result<Vec<u8>, ReadError> {
    let mut header = [0u8; s7::TPKT_HEADER_LEN];
    read_full(r, &mut header, keep_waiting)?;
    let len = s7::tpkt_frame_len(header)?;
    let mut frame = vec![0u8; len];
    frame[..header.len()].copy_from_slice(&header);
    read_full(r, &mut frame[header.len()..], keep_waiting)?;
    Ok(frame)
}

/// One OPC UA chunk, header included.
pub fn read_opcua_chunk<R: Read + ?Sized>(
    r: &mut R,
    keep_waiting: &mut dyn FnMut() -> bool,
) -> Result<Vec<u8>, ReadError> {
    let mut header = [0u8; opcua::CHUNK_HEADER_LEN];
    read_full(r, &mut header, keep_waiting)?;
    let len = opcua::chunk_len(header)?;
    let mut chunk = vec![0u8; len];
    chunk[..header.len()].copy_from_slice(&header);
    read_full(r, &mut chunk[header.len()..], keep_waiting)?;
    Ok(chunk)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Yields the input in small pieces with a timeout between pieces.
    struct Trickle {
        data: Vec<u8>,
        pos: usize,
        stall: bool,
        /// Report end of stream once drained, instead of idling.
        eof: bool,
    }

    impl Read for Trickle {
        fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
            self.stall = !self.stall;
            if self.stall || (!self.eof && self.pos == self.data.len()) {
                return Err(ErrorKind::WouldBlock.into());
            }
            let k = buf.len().min(3).min(self.data.len() - self.pos);
            buf[..k].copy_from_slice(&self.data[self.pos..self.pos + k]);
            self.pos += k;
            Ok(k)
        }
    }

    #[test]
    fn survives_timeouts_between_pieces() {
        let job = crate::codec::S7Message::ReadJob(crate::codec::stock::s7_job(3, 1))
            .encode()
            .unwrap();
        let mut t = Trickle {
            data: job.clone(),
            pos: 0,
            stall: false,
            eof: true,
        };
        let got = read_tpkt(&mut t, &mut || true).unwrap();
        assert_eq!(got, job);
        assert!(matches!(
            read_tpkt(&mut t, &mut || true),
            Err(ReadError::Closed)
        ));
    }

    #[test]
    fn abandon_and_truncation() {
        let mut t = Trickle {
            data: vec![3, 0, 0, 31, 2],
            pos: 0,
            stall: false,
            eof: false,
        };
        let mut polls = 0;
        let r = read_tpkt(&mut t, &mut || {
            polls += 1;
            polls < 100
        });
        assert!(matches!(r, Err(ReadError::Abandoned)));

        let mut short: &[u8] = &[3, 0, 0, 31, 2];
        let r = read_tpkt(&mut short, &mut || true);
        assert!(matches!(r, Err(ReadError::Io(e)) if e.kind() == ErrorKind::UnexpectedEof));
    }
}
