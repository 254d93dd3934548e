//! TCP transport for plugins: client-side detector and classifier proxies
//! and a server that hosts in-process plugins for remote callers.
//!
//! The client opens one connection per role and sends HELLO; the server
//! echoes the HELLO back or answers with ERROR and closes. Each connection
//! then carries strictly one request at a time.

use std::io::{BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::protocol::{
    encode_classify_req, encode_detect_req, error_code, read_message, write_message, Message, ReadError,
    PROTO_VERSION, ROLE_CLASSIFIER, ROLE_DETECTOR,
};
use super::{Classifier, ClassScores, Detector, ModelError};
use crate::frame::{BBox, Frame};
use crate::pipeline::Clip;

struct Session {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Session {
    fn connect<A: ToSocketAddrs>(addr: A, role: u8) -> Result<Self, ModelError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut s = Session { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) };
        match s.call(&Message::Hello { version: PROTO_VERSION, role }.encode().expect("hello encodes"))? {
            Message::Hello { version, role: r } if version == PROTO_VERSION && r == role => Ok(s),
            other => Err(ModelError::Protocol(format!("unexpected handshake reply {other:?}"))),
        }
    }

    fn call(&mut self, request: &[u8]) -> Result<Message, ModelError> {
        self.writer.write_all(request)?;
        self.writer.flush()?;
        match read_message(&mut self.reader) {
            Ok(Some(Message::Error { code, message })) => Err(ModelError::Remote { code, message }),
            Ok(Some(m)) => Ok(m),
            Ok(None) => Err(ModelError::Io("connection closed by plugin".into())),
            Err(ReadError::Io(e)) => Err(e.into()),
            Err(ReadError::Decode(e)) => Err(ModelError::Protocol(e.to_string())),
        }
    }
}

/// Detector proxy over one plugin connection.
pub struct RemoteDetector(Session);

impl RemoteDetector {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, ModelError> {
        Session::connect(addr, ROLE_DETECTOR).map(RemoteDetector)
    }
}

impl Detector for RemoteDetector {
    fn detect(&mut self, frame: &Frame) -> Result<Vec<BBox>, ModelError> {
        let req = encode_detect_req(frame).map_err(|e| ModelError::Protocol(e.to_string()))?;
        match self.0.call(&req)? {
            Message::DetectResp(boxes) => Ok(boxes),
            other => Err(ModelError::Protocol(format!("expected DETECT_RESP, got type {}", other.msg_type()))),
        }
    }
}

/// Classifier proxy over one plugin connection.
pub struct RemoteClassifier(Session);

impl RemoteClassifier {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, ModelError> {
        Session::connect(addr, ROLE_CLASSIFIER).map(RemoteClassifier)
    }
}

impl Classifier for RemoteClassifier {
    fn classify(&mut self, clip: &Clip) -> Result<ClassScores, ModelError> {
        let req = encode_classify_req(&clip.frames).map_err(|e| ModelError::Protocol(e.to_string()))?;
        match self.0.call(&req)? {
            Message::ClassifyResp(scores) => ClassScores::new(scores),
            other => Err(ModelError::Protocol(format!("expected CLASSIFY_RESP, got type {}", other.msg_type()))),
        }
    }
}

type DetectorFactory = dyn Fn() -> Box<dyn Detector> + Send + Sync;
type ClassifierFactory = dyn Fn() -> Box<dyn Classifier> + Send + Sync;

/// Plugins hosted for remote callers. Each connection gets fresh plugin
/// instances from the factories.
#[derive(Clone)]
pub struct PluginServer {
    detector: Arc<DetectorFactory>,
    classifier: Arc<ClassifierFactory>,
    /// Frames a CLASSIFY_REQ must carry.
    pub clip_frames: usize,
}

impl PluginServer {
    pub fn new<D, C>(detector: D, classifier: C, clip_frames: usize) -> Self
    where
        D: Fn() -> Box<dyn Detector> + Send + Sync + 'static,
        C: Fn() -> Box<dyn Classifier> + Send + Sync + 'static,
    {
        Self { detector: Arc::new(detector), classifier: Arc::new(classifier), clip_frames }
    }

    /// Serves one connection until the peer disconnects or sends a
    /// malformed message.
    pub fn handle(&self, stream: TcpStream) -> std::io::Result<()> {
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        let err = |w: &mut BufWriter<TcpStream>, code: u16, message: String| write_message(w, &Message::Error { code, message });

        let role = match read_message(&mut reader) {
            Ok(Some(Message::Hello { version, role })) => {
                if version != PROTO_VERSION {
                    return err(&mut writer, error_code::UNSUPPORTED_VERSION, format!("unsupported protocol version {version}"));
                }
                if role != ROLE_DETECTOR && role != ROLE_CLASSIFIER {
                    return err(&mut writer, error_code::UNEXPECTED, format!("unknown role {role}"));
                }
                write_message(&mut writer, &Message::Hello { version, role })?;
                role
            }
            Ok(None) => return Ok(()),
            Ok(Some(m)) => return err(&mut writer, error_code::UNEXPECTED, format!("expected HELLO, got type {}", m.msg_type())),
            Err(ReadError::Decode(e)) => return err(&mut writer, error_code::MALFORMED, e.to_string()),
            Err(ReadError::Io(e)) => return Err(e),
        };

        let mut detector = (role == ROLE_DETECTOR).then(|| (self.detector)());
        let mut classifier = (role == ROLE_CLASSIFIER).then(|| (self.classifier)());
        loop {
            let reply = match read_message(&mut reader) {
                Ok(None) => return Ok(()),
                Err(ReadError::Decode(e)) => return err(&mut writer, error_code::MALFORMED, e.to_string()),
                Err(ReadError::Io(e)) => return Err(e),
                Ok(Some(Message::DetectReq(frame))) if detector.is_some() => {
                    match detector.as_mut().unwrap().detect(&frame) {
                        Ok(boxes) => Message::DetectResp(boxes),
                        Err(e) => Message::Error { code: error_code::HANDLER, message: e.to_string() },
                    }
                }
                Ok(Some(Message::ClassifyReq(frames))) if classifier.is_some() => {
                    if frames.len() != self.clip_frames {
                        Message::Error {
                            code: error_code::FRAME_COUNT,
                            message: format!("expected {} frames, got {}", self.clip_frames, frames.len()),
                        }
                    } else {
                        match classifier.as_mut().unwrap().classify(&Clip::new(frames)) {
                            Ok(s) => Message::ClassifyResp(s.as_slice().to_vec()),
                            Err(e) => Message::Error { code: error_code::HANDLER, message: e.to_string() },
                        }
                    }
                }
                Ok(Some(m)) => Message::Error {
                    code: error_code::UNEXPECTED,
                    message: format!("message type {} not valid for role {role}", m.msg_type()),
                },
            };
            write_message(&mut writer, &reply)?;
        }
    }
}

/// Accepts connections forever, one thread per connection.
pub fn serve(listener: TcpListener, server: PluginServer) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let server = server.clone();
        std::thread::spawn(move || {
            let _ = server.handle(stream);
        });
    }
    Ok(())
}

/// A server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    /// Binds `addr` (port 0 picks a free port) and serves in the background.
    pub fn spawn<A: ToSocketAddrs>(addr: A, server: PluginServer) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::Acquire) {
                    break;
                }
                if let Ok(stream) = stream {
                    let server = server.clone();
                    std::thread::spawn(move || {
                        let _ = server.handle(stream);
                    });
                }
            }
        });
        Ok(Self { addr, stop, thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::Release);
            // Unblock accept().
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}
