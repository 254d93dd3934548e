//! Length-prefixed binary protocol for external detector and classifier
//! plugins.
//!
//! Every message is `u32 payload_len`, `u8 msg_type`, then `payload_len`
//! payload bytes. All integers and floats are little-endian. A frame is
//! `u16 width`, `u16 height`, `u8 channels = 3`, then raw row-major RGB.
//! Frame indices and timestamps are not transmitted.

use std::fmt;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::frame::{BBox, Frame, CHANNELS};

pub const PROTO_VERSION: u8 = 1;
pub const ROLE_DETECTOR: u8 = 1;
pub const ROLE_CLASSIFIER: u8 = 2;
pub const HEADER_LEN: usize = 5;
/// Largest payload accepted from a peer.
pub const MAX_PAYLOAD: u32 = 1 << 28;

pub mod msg_type {
    pub const HELLO: u8 = 0x01;
    pub const DETECT_REQ: u8 = 0x02;
    pub const DETECT_RESP: u8 = 0x03;
    pub const CLASSIFY_REQ: u8 = 0x04;
    pub const CLASSIFY_RESP: u8 = 0x05;
    pub const ERROR: u8 = 0x06;
}

pub mod error_code {
    pub const UNSUPPORTED_VERSION: u16 = 1;
    pub const FRAME_COUNT: u16 = 2;
    pub const MALFORMED: u16 = 3;
    pub const HANDLER: u16 = 4;
    pub const UNEXPECTED: u16 = 5;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello { version: u8, role: u8 },
    DetectReq(Frame),
    DetectResp(Vec<BBox>),
    ClassifyReq(Vec<Frame>),
    ClassifyResp(Vec<f32>),
    Error { code: u16, message: String },
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Hello { .. } => msg_type::HELLO,
            Message::DetectReq(_) => msg_type::DETECT_REQ,
            Message::DetectResp(_) => msg_type::DETECT_RESP,
            Message::ClassifyReq(_) => msg_type::CLASSIFY_REQ,
            Message::ClassifyResp(_) => msg_type::CLASSIFY_RESP,
            Message::Error { .. } => msg_type::ERROR,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, EncodeError> {
        let mut p = Vec::new();
        match self {
            Message::Hello { version, role } => p.extend_from_slice(&[*version, *role]),
            Message::DetectReq(f) => put_frame(&mut p, f)?,
            Message::DetectResp(boxes) => {
                p.push(u8::try_from(boxes.len()).map_err(|_| EncodeError::TooMany("boxes", boxes.len()))?);
                for b in boxes {
                    for v in [b.x0, b.y0, b.x1, b.y1] {
                        p.extend_from_slice(&u16::try_from(v).map_err(|_| EncodeError::OutOfRange(v))?.to_le_bytes());
                    }
                }
            }
            Message::ClassifyReq(frames) => {
                p.push(u8::try_from(frames.len()).map_err(|_| EncodeError::TooMany("frames", frames.len()))?);
                for f in frames {
                    put_frame(&mut p, f)?;
                }
            }
            Message::ClassifyResp(scores) => {
                let n = u16::try_from(scores.len()).map_err(|_| EncodeError::TooMany("scores", scores.len()))?;
                p.extend_from_slice(&n.to_le_bytes());
                for s in scores {
                    p.extend_from_slice(&s.to_le_bytes());
                }
            }
            Message::Error { code, message } => {
                p.extend_from_slice(&code.to_le_bytes());
                p.extend_from_slice(message.as_bytes());
            }
        }
        frame_message(self.msg_type(), p)
    }
}

fn frame_message(ty: u8, payload: Vec<u8>) -> Result<Vec<u8>, EncodeError> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&l| l <= MAX_PAYLOAD)
        .ok_or(EncodeError::TooMany("payload bytes", payload.len()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.push(ty);
    out.extend_from_slice(&payload);
    Ok(out)
}

fn put_frame(p: &mut Vec<u8>, f: &Frame) -> Result<(), EncodeError> {
    let w = u16::try_from(f.width).map_err(|_| EncodeError::OutOfRange(f.width))?;
    let h = u16::try_from(f.height).map_err(|_| EncodeError::OutOfRange(f.height))?;
    if f.pixels.len() != f.width as usize * f.height as usize * CHANNELS {
        return Err(EncodeError::PixelLength);
    }
    p.extend_from_slice(&w.to_le_bytes());
    p.extend_from_slice(&h.to_le_bytes());
    p.push(CHANNELS as u8);
    p.extend_from_slice(&f.pixels);
    Ok(())
}

/// Encodes a DETECT_REQ without cloning the frame.
pub fn encode_detect_req(frame: &Frame) -> Result<Vec<u8>, EncodeError> {
    let mut p = Vec::with_capacity(5 + frame.pixels.len());
    put_frame(&mut p, frame)?;
    frame_message(msg_type::DETECT_REQ, p)
}

/// Encodes a CLASSIFY_REQ without cloning the frames.
pub fn encode_classify_req(frames: &[Frame]) -> Result<Vec<u8>, EncodeError> {
    let n = u8::try_from(frames.len()).map_err(|_| EncodeError::TooMany("frames", frames.len()))?;
    let mut p = vec![n];
    for f in frames {
        put_frame(&mut p, f)?;
    }
    frame_message(msg_type::CLASSIFY_REQ, p)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("value {0} does not fit in u16")]
    OutOfRange(u32),
    #[error("too many {0}: {1}")]
    TooMany(&'static str, usize),
    #[error("frame pixel buffer does not match its dimensions")]
    PixelLength,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeErrorKind {
    Truncated,
    UnknownType(u8),
    BadChannels(u8),
    PayloadTooLarge(u32),
    InvalidUtf8,
    TrailingBytes,
}

/// A malformed message, with the byte offset from the start of the message
/// at which decoding failed.
#[derive(Debug, Error, Clone, PartialEq)]
pub struct DecodeError {
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at byte {}", self.kind, self.offset)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, kind: DecodeErrorKind) -> DecodeError {
        DecodeError { offset: self.base + self.pos, kind }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(DecodeErrorKind::Truncated));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, DecodeError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn frame(&mut self) -> Result<Frame, DecodeError> {
        let w = self.u16()? as u32;
        let h = self.u16()? as u32;
        let at = self.pos;
        let ch = self.u8()?;
        if ch as usize != CHANNELS {
            self.pos = at;
            return Err(self.err(DecodeErrorKind::BadChannels(ch)));
        }
        let px = self.take(w as usize * h as usize * CHANNELS)?;
        Ok(Frame::new(0, w, h, px.to_vec()))
    }
}

fn decode_payload(ty: u8, payload: &[u8]) -> Result<Message, DecodeError> {
    let mut c = Cursor { buf: payload, pos: 0, base: HEADER_LEN };
    let msg = match ty {
        msg_type::HELLO => Message::Hello { version: c.u8()?, role: c.u8()? },
        msg_type::DETECT_REQ => Message::DetectReq(c.frame()?),
        msg_type::DETECT_RESP => {
            let n = c.u8()?;
            let mut boxes = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let v = [c.u16()?, c.u16()?, c.u16()?, c.u16()?].map(u32::from);
                boxes.push(BBox::new(v[0], v[1], v[2], v[3]));
            }
            Message::DetectResp(boxes)
        }
        msg_type::CLASSIFY_REQ => {
            let n = c.u8()?;
            let mut frames = Vec::with_capacity(n as usize);
            for _ in 0..n {
                frames.push(c.frame()?);
            }
            Message::ClassifyReq(frames)
        }
        msg_type::CLASSIFY_RESP => {
            let n = c.u16()?;
            let mut scores = Vec::with_capacity(n as usize);
            for _ in 0..n {
                scores.push(c.f32()?);
            }
            Message::ClassifyResp(scores)
        }
        msg_type::ERROR => {
            let code = c.u16()?;
            let at = c.pos;
            let rest = c.take(payload.len() - at)?;
            let message = std::str::from_utf8(rest).map_err(|e| DecodeError {
                offset: HEADER_LEN + at + e.valid_up_to(),
                kind: DecodeErrorKind::InvalidUtf8,
            })?;
            Message::Error { code, message: message.to_owned() }
        }
        other => return Err(DecodeError { offset: 4, kind: DecodeErrorKind::UnknownType(other) }),
    };
    if c.pos != payload.len() {
        return Err(c.err(DecodeErrorKind::TrailingBytes));
    }
    Ok(msg)
}

fn parse_header(h: &[u8; HEADER_LEN]) -> Result<(u32, u8), DecodeError> {
    let len = u32::from_le_bytes(h[..4].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(DecodeError { offset: 0, kind: DecodeErrorKind::PayloadTooLarge(len) });
    }
    Ok((len, h[4]))
}

/// Decodes one message from the front of `bytes`, returning it and the
/// number of bytes consumed.
pub fn decode(bytes: &[u8]) -> Result<(Message, usize), DecodeError> {
    let header: &[u8; HEADER_LEN] = bytes
        .get(..HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or(DecodeError { offset: bytes.len(), kind: DecodeErrorKind::Truncated })?;
    let (len, ty) = parse_header(header)?;
    let end = HEADER_LEN + len as usize;
    let payload = bytes
        .get(HEADER_LEN..end)
        .ok_or(DecodeError { offset: bytes.len(), kind: DecodeErrorKind::Truncated })?;
    Ok((decode_payload(ty, payload)?, end))
}

/// Decodes a buffer holding exactly one message.
pub fn decode_message(bytes: &[u8]) -> Result<Message, DecodeError> {
    let (m, used) = decode(bytes)?;
    if used != bytes.len() {
        return Err(DecodeError { offset: used, kind: DecodeErrorKind::TrailingBytes });
    }
    Ok(m)
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed message: {0}")]
    Decode(#[from] DecodeError),
}

/// Reads one message. Returns `Ok(None)` on a clean end of stream before
/// the first header byte.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<Message>, ReadError> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(DecodeError { offset: got, kind: DecodeErrorKind::Truncated }.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let (len, ty) = parse_header(&header)?;
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ReadError::Decode(DecodeError { offset: HEADER_LEN, kind: DecodeErrorKind::Truncated }),
        _ => ReadError::Io(e),
    })?;
    Ok(Some(decode_payload(ty, &payload)?))
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    let bytes = msg.encode().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    w.write_all(&bytes)?;
    w.flush()
}
