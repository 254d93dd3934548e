use std::io::Write;
use std::net::TcpStream;
use std::path::PathBuf;

use gladas_core::config::{ModelSource, RunConfig};
use gladas_core::eval::{builtin_server, run_trials, RemoteModels, RunOptions, TemplateModels};
use gladas_core::frame::{BBox, Frame};
use gladas_core::models::protocol::{
    decode, decode_message, error_code, msg_type, read_message, DecodeErrorKind, Message, MAX_PAYLOAD, PROTO_VERSION,
    ROLE_CLASSIFIER, ROLE_DETECTOR,
};
use gladas_core::models::{Classifier, ClassScores, Detector, ModelError, PluginServer, RemoteClassifier, ServerHandle};
use gladas_core::pipeline::Clip;
use gladas_core::scenario::ScenarioId;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn corpus_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_vectors.json")
}

fn random_frame(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Frame {
    let pixels = (0..w * h * 3).map(|_| rng.gen()).collect();
    Frame::new(0, w, h, pixels)
}

/// The corpus is generated from a fixed seed so it can be rebuilt and
/// compared byte for byte.
fn corpus_messages() -> Vec<(String, Message)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x601d);
    let mut out = Vec::new();
    let mut push = |name: String, m: Message| out.push((name, m));

    for (v, r) in [(1, 1), (1, 2), (2, 1), (0, 2), (1, 3), (255, 0)] {
        push(format!("hello_v{v}_role{r}"), Message::Hello { version: v, role: r });
    }
    for (w, h) in [(1, 1), (2, 3), (3, 2), (4, 4), (8, 5), (16, 9), (7, 1), (1, 7), (12, 12), (0, 0)] {
        push(format!("detect_req_{w}x{h}"), Message::DetectReq(random_frame(&mut rng, w, h)));
    }
    push("detect_resp_empty".into(), Message::DetectResp(vec![]));
    push("detect_resp_max_coords".into(), Message::DetectResp(vec![BBox::new(0, 0, 65535, 65535)]));
    for n in [1usize, 2, 3, 5, 8, 13] {
        let boxes = (0..n)
            .map(|_| {
                let (x0, y0) = (rng.gen_range(0..700u32), rng.gen_range(0..250u32));
                BBox::new(x0, y0, x0 + rng.gen_range(1..68), y0 + rng.gen_range(1..38))
            })
            .collect();
        push(format!("detect_resp_{n}_boxes"), Message::DetectResp(boxes));
    }
    push("classify_req_empty".into(), Message::ClassifyReq(vec![]));
    for (n, w, h) in [(1, 2, 2), (3, 1, 4), (31, 2, 2), (32, 2, 2), (32, 3, 1), (33, 1, 1), (32, 4, 4)] {
        let frames = (0..n).map(|_| random_frame(&mut rng, w, h)).collect();
        push(format!("classify_req_{n}x{w}x{h}"), Message::ClassifyReq(frames));
    }
    push("classify_resp_empty".into(), Message::ClassifyResp(vec![]));
    let mut one_hot = vec![0.0f32; 27];
    one_hot[6] = 1.0;
    push("classify_resp_one_hot".into(), Message::ClassifyResp(one_hot));
    push("classify_resp_floor".into(), Message::ClassifyResp(vec![0.01; 27]));
    push(
        "classify_resp_special_values".into(),
        Message::ClassifyResp(vec![-0.0, f32::MIN_POSITIVE, 1e-45, f32::MAX, f32::INFINITY, 0.5]),
    );
    for i in 0..8 {
        let scores = (0..27).map(|_| rng.gen::<f32>()).collect();
        push(format!("classify_resp_random_{i}"), Message::ClassifyResp(scores));
    }
    for (code, msg) in [
        (error_code::UNSUPPORTED_VERSION, "unsupported protocol version 2"),
        (error_code::FRAME_COUNT, "expected 32 frames, got 31"),
        (error_code::MALFORMED, "Truncated at byte 9"),
        (error_code::HANDLER, "frame is 10x10, expected 768x288"),
        (error_code::UNEXPECTED, "expected HELLO, got type 2"),
        (0, ""),
        (65535, "max code"),
        (4, "non-ascii: δ = 0.40 ✓"),
    ] {
        push(format!("error_{code}_{}", msg.len()), Message::Error { code, message: msg.into() });
    }
    out
}

fn frame_json(f: &Frame) -> Value {
    json!({ "width": f.width, "height": f.height, "pixels": hex::encode(&f.pixels) })
}

fn fields(m: &Message) -> Value {
    match m {
        Message::Hello { version, role } => json!({ "version": version, "role": role }),
        Message::DetectReq(f) => json!({ "frame": frame_json(f) }),
        Message::DetectResp(b) => json!({ "boxes": b.iter().map(|b| [b.x0, b.y0, b.x1, b.y1]).collect::<Vec<_>>() }),
        Message::ClassifyReq(fs) => json!({ "frames": fs.iter().map(frame_json).collect::<Vec<_>>() }),
        Message::ClassifyResp(s) => json!({ "score_bits": s.iter().map(|v| v.to_bits()).collect::<Vec<_>>() }),
        Message::Error { code, message } => json!({ "code": code, "message": message }),
    }
}

fn type_name(t: u8) -> &'static str {
    match t {
        msg_type::HELLO => "hello",
        msg_type::DETECT_REQ => "detect_req",
        msg_type::DETECT_RESP => "detect_resp",
        msg_type::CLASSIFY_REQ => "classify_req",
        msg_type::CLASSIFY_RESP => "classify_resp",
        msg_type::ERROR => "error",
        _ => "unknown",
    }
}

fn frame_from_json(v: &Value) -> Frame {
    Frame::new(
        0,
        v["width"].as_u64().unwrap() as u32,
        v["height"].as_u64().unwrap() as u32,
        hex::decode(v["pixels"].as_str().unwrap()).unwrap(),
    )
}

fn message_from_json(ty: &str, f: &Value) -> Message {
    let u = |v: &Value| v.as_u64().unwrap();
    match ty {
        "hello" => Message::Hello { version: u(&f["version"]) as u8, role: u(&f["role"]) as u8 },
        "detect_req" => Message::DetectReq(frame_from_json(&f["frame"])),
        "detect_resp" => Message::DetectResp(
            f["boxes"]
                .as_array()
                .unwrap()
                .iter()
                .map(|b| BBox::new(u(&b[0]) as u32, u(&b[1]) as u32, u(&b[2]) as u32, u(&b[3]) as u32))
                .collect(),
        ),
        "classify_req" => Message::ClassifyReq(f["frames"].as_array().unwrap().iter().map(frame_from_json).collect()),
        "classify_resp" => {
            Message::ClassifyResp(f["score_bits"].as_array().unwrap().iter().map(|b| f32::from_bits(u(b) as u32)).collect())
        }
        "error" => Message::Error { code: u(&f["code"]) as u16, message: f["message"].as_str().unwrap().into() },
        other => panic!("unknown type {other}"),
    }
}

/// Byte strings every decoder must reject, with the offset and kind of the
/// failure.
fn malformed_vectors() -> Vec<(&'static str, Vec<u8>, usize, &'static str)> {
    vec![
        ("short_header", vec![2, 0, 0], 3, "truncated"),
        ("short_payload", vec![2, 0, 0, 0, msg_type::HELLO, 1], 6, "truncated"),
        ("unknown_type", vec![0, 0, 0, 0, 0x07], 4, "unknown_type"),
        ("zero_type", vec![0, 0, 0, 0, 0x00], 4, "unknown_type"),
        ("bad_channels", vec![5, 0, 0, 0, msg_type::DETECT_REQ, 1, 0, 1, 0, 4], 9, "bad_channels"),
        ("hello_trailing_byte", vec![3, 0, 0, 0, msg_type::HELLO, 1, 1, 9], 7, "trailing_bytes"),
        ("detect_resp_short_box", vec![4, 0, 0, 0, msg_type::DETECT_RESP, 1, 0, 0, 0], 8, "truncated"),
        ("classify_resp_short_score", vec![4, 0, 0, 0, msg_type::CLASSIFY_RESP, 1, 0, 0, 0], 7, "truncated"),
        ("error_invalid_utf8", vec![5, 0, 0, 0, msg_type::ERROR, 3, 0, b'o', b'k', 0xff], 9, "invalid_utf8"),
        ("payload_too_large", [(MAX_PAYLOAD + 1).to_le_bytes().as_slice(), &[msg_type::HELLO]].concat(), 0, "payload_too_large"),
    ]
}

fn kind_name(k: &DecodeErrorKind) -> &'static str {
    match k {
        DecodeErrorKind::Truncated => "truncated",
        DecodeErrorKind::UnknownType(_) => "unknown_type",
        DecodeErrorKind::BadChannels(_) => "bad_channels",
        DecodeErrorKind::PayloadTooLarge(_) => "payload_too_large",
        DecodeErrorKind::InvalidUtf8 => "invalid_utf8",
        DecodeErrorKind::TrailingBytes => "trailing_bytes",
    }
}

fn build_corpus() -> Value {
    let messages: Vec<Value> = corpus_messages()
        .iter()
        .map(|(name, m)| {
            json!({
                "name": name,
                "type": type_name(m.msg_type()),
                "hex": hex::encode(m.encode().unwrap()),
                "fields": fields(m),
            })
        })
        .collect();
    let malformed: Vec<Value> = malformed_vectors()
        .into_iter()
        .map(|(name, bytes, offset, kind)| json!({ "name": name, "hex": hex::encode(bytes), "offset": offset, "kind": kind }))
        .collect();
    json!({ "protocol_version": PROTO_VERSION, "messages": messages, "malformed": malformed })
}

fn load_corpus() -> Value {
    serde_json::from_str(&std::fs::read_to_string(corpus_path()).unwrap()).unwrap()
}

#[test]
fn golden_corpus_is_current() {
    let built = serde_json::to_string_pretty(&build_corpus()).unwrap() + "\n";
    if std::env::var_os("GLADAS_UPDATE_GOLDEN").is_some() {
        std::fs::write(corpus_path(), &built).unwrap();
    }
    let on_disk = std::fs::read_to_string(corpus_path()).unwrap();
    assert!(on_disk == built, "golden corpus is stale; rerun with GLADAS_UPDATE_GOLDEN=1");
}

#[test]
fn golden_corpus_covers_every_type() {
    let c = load_corpus();
    let msgs = c["messages"].as_array().unwrap();
    assert!(msgs.len() >= 50, "{} messages", msgs.len());
    for t in ["hello", "detect_req", "detect_resp", "classify_req", "classify_resp", "error"] {
        assert!(msgs.iter().filter(|m| m["type"] == t).count() >= 3, "{t}");
    }
}

#[test]
fn golden_messages_decode_and_reencode() {
    for v in load_corpus()["messages"].as_array().unwrap() {
        let name = v["name"].as_str().unwrap();
        let bytes = hex::decode(v["hex"].as_str().unwrap()).unwrap();
        let expected = message_from_json(v["type"].as_str().unwrap(), &v["fields"]);
        let got = decode_message(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        // Compare through the field view so float bit patterns (-0.0) count.
        assert_eq!(fields(&got), fields(&expected), "{name}");
        assert_eq!(expected.encode().unwrap(), bytes, "{name}");
        assert_eq!(type_name(bytes[4]), v["type"], "{name}");
    }
}

#[test]
fn golden_malformed_vectors_fail_at_recorded_offsets() {
    for v in load_corpus()["malformed"].as_array().unwrap() {
        let name = v["name"].as_str().unwrap();
        let bytes = hex::decode(v["hex"].as_str().unwrap()).unwrap();
        let err = decode_message(&bytes).expect_err(name);
        assert_eq!(err.offset as u64, v["offset"].as_u64().unwrap(), "{name}");
        assert_eq!(kind_name(&err.kind), v["kind"], "{name}");
    }
}

#[test]
fn golden_stream_decodes_back_to_back() {
    let c = load_corpus();
    let msgs = c["messages"].as_array().unwrap();
    let stream: Vec<u8> = msgs.iter().flat_map(|v| hex::decode(v["hex"].as_str().unwrap()).unwrap()).collect();
    let mut reader = stream.as_slice();
    let mut n = 0;
    while let Some(m) = read_message(&mut reader).unwrap() {
        assert_eq!(hex::encode(m.encode().unwrap()), msgs[n]["hex"]);
        n += 1;
    }
    assert_eq!(n, msgs.len());
}

fn arb_frame() -> impl Strategy<Value = Frame> {
    (0u32..6, 0u32..6).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), (w * h * 3) as usize).prop_map(move |px| Frame::new(0, w, h, px))
    })
}

fn arb_message() -> impl Strategy<Value = Message> {
    prop_oneof![
        (any::<u8>(), any::<u8>()).prop_map(|(version, role)| Message::Hello { version, role }),
        arb_frame().prop_map(Message::DetectReq),
        proptest::collection::vec(
            (0u32..=65535, 0u32..=65535, 0u32..=65535, 0u32..=65535).prop_map(|(a, b, c, d)| BBox::new(a, b, c, d)),
            0..20
        )
        .prop_map(Message::DetectResp),
        proptest::collection::vec(arb_frame(), 0..5).prop_map(Message::ClassifyReq),
        proptest::collection::vec(any::<u32>().prop_map(f32::from_bits), 0..40).prop_map(Message::ClassifyResp),
        (any::<u16>(), ".{0,40}").prop_map(|(code, message)| Message::Error { code, message }),
    ]
}

proptest! {
    #[test]
    fn encode_decode_round_trip(m in arb_message()) {
        let bytes = m.encode().unwrap();
        let (back, used) = decode(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(fields(&back), fields(&m));
        prop_assert_eq!(back.encode().unwrap(), bytes);
    }

    #[test]
    fn every_strict_prefix_is_rejected(m in arb_message(), cut in any::<prop::sample::Index>()) {
        let bytes = m.encode().unwrap();
        let n = cut.index(bytes.len());
        let err = decode(&bytes[..n]).unwrap_err();
        prop_assert_eq!(err.kind, DecodeErrorKind::Truncated);
    }

    #[test]
    fn decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode(&bytes);
    }
}

// Plugins that need no scene: a detector that reports the frame border and
// a classifier keyed on the mean red value of the clip.
struct BorderDetector;

impl Detector for BorderDetector {
    fn detect(&mut self, f: &Frame) -> Result<Vec<BBox>, ModelError> {
        if f.width < 2 {
            return Err(ModelError::InvalidConfig("frame too small".into()));
        }
        Ok(vec![BBox::new(0, 0, f.width, f.height)])
    }
}

struct RedClassifier;

impl Classifier for RedClassifier {
    fn classify(&mut self, clip: &Clip) -> Result<ClassScores, ModelError> {
        let mut s = [0.01f32; 27];
        s[0] = clip.frames[0].pixels.first().copied().unwrap_or(0) as f32 / 255.0;
        ClassScores::from_array(s)
    }
}

fn toy_server() -> ServerHandle {
    let server = PluginServer::new(|| Box::new(BorderDetector) as Box<dyn Detector>, || Box::new(RedClassifier) as Box<dyn Classifier>, 32);
    ServerHandle::spawn("127.0.0.1:0", server).unwrap()
}

fn raw_exchange(addr: std::net::SocketAddr, msgs: &[Message]) -> Vec<Message> {
    let mut s = TcpStream::connect(addr).unwrap();
    let mut replies = Vec::new();
    for m in msgs {
        s.write_all(&m.encode().unwrap()).unwrap();
        match read_message(&mut s).unwrap() {
            Some(r) => replies.push(r),
            None => break,
        }
    }
    replies
}

fn code(m: &Message) -> u16 {
    match m {
        Message::Error { code, .. } => *code,
        other => panic!("expected ERROR, got {other:?}"),
    }
}

#[test]
fn server_echoes_hello_and_serves_requests() {
    let h = toy_server();
    let f = Frame::filled(0, 4, 3, [51, 0, 0]);
    let r = raw_exchange(
        h.addr(),
        &[Message::Hello { version: PROTO_VERSION, role: ROLE_DETECTOR }, Message::DetectReq(f.clone()), Message::DetectReq(f)],
    );
    assert_eq!(r[0], Message::Hello { version: PROTO_VERSION, role: ROLE_DETECTOR });
    assert_eq!(r[1], Message::DetectResp(vec![BBox::new(0, 0, 4, 3)]));
    assert_eq!(r[1], r[2]);

    let clip: Vec<Frame> = (0..32).map(|_| Frame::filled(0, 2, 2, [51, 0, 0])).collect();
    let r = raw_exchange(h.addr(), &[Message::Hello { version: PROTO_VERSION, role: ROLE_CLASSIFIER }, Message::ClassifyReq(clip)]);
    let Message::ClassifyResp(s) = &r[1] else { panic!("{:?}", r[1]) };
    assert_eq!(s.len(), 27);
    assert_eq!(s[0], 0.2);
}

#[test]
fn server_rejects_unsupported_version() {
    let h = toy_server();
    let r = raw_exchange(h.addr(), &[Message::Hello { version: 2, role: ROLE_DETECTOR }]);
    assert_eq!(code(&r[0]), error_code::UNSUPPORTED_VERSION);
    // The server closes after a failed handshake.
    let mut s = TcpStream::connect(h.addr()).unwrap();
    s.write_all(&Message::Hello { version: 9, role: ROLE_CLASSIFIER }.encode().unwrap()).unwrap();
    assert_eq!(code(&read_message(&mut s).unwrap().unwrap()), error_code::UNSUPPORTED_VERSION);
    assert!(read_message(&mut s).unwrap().is_none());
}

#[test]
fn server_rejects_wrong_frame_count_and_keeps_the_connection() {
    let h = toy_server();
    let clip = |n| Message::ClassifyReq((0..n).map(|_| Frame::filled(0, 2, 2, [255, 0, 0])).collect());
    let r = raw_exchange(
        h.addr(),
        &[Message::Hello { version: PROTO_VERSION, role: ROLE_CLASSIFIER }, clip(31), clip(33), clip(0), clip(32)],
    );
    assert_eq!(r.len(), 5);
    for m in &r[1..4] {
        assert_eq!(code(m), error_code::FRAME_COUNT);
    }
    assert!(matches!(&r[4], Message::ClassifyResp(s) if s[0] == 1.0));
}

#[test]
fn server_reports_unexpected_and_handler_errors() {
    let h = toy_server();
    let r = raw_exchange(h.addr(), &[Message::DetectReq(Frame::filled(0, 2, 2, [0; 3]))]);
    assert_eq!(code(&r[0]), error_code::UNEXPECTED);

    let r = raw_exchange(
        h.addr(),
        &[
            Message::Hello { version: PROTO_VERSION, role: ROLE_CLASSIFIER },
            Message::DetectReq(Frame::filled(0, 2, 2, [0; 3])),
            Message::ClassifyResp(vec![0.5]),
        ],
    );
    assert_eq!(code(&r[1]), error_code::UNEXPECTED);
    assert_eq!(code(&r[2]), error_code::UNEXPECTED);

    let r = raw_exchange(
        h.addr(),
        &[Message::Hello { version: PROTO_VERSION, role: ROLE_DETECTOR }, Message::DetectReq(Frame::filled(0, 1, 1, [0; 3]))],
    );
    assert_eq!(code(&r[1]), error_code::HANDLER);

    let r = raw_exchange(h.addr(), &[Message::Hello { version: PROTO_VERSION, role: 7 }]);
    assert_eq!(code(&r[0]), error_code::UNEXPECTED);
}

#[test]
fn server_reports_malformed_input_and_closes() {
    let h = toy_server();
    let mut s = TcpStream::connect(h.addr()).unwrap();
    s.write_all(&Message::Hello { version: PROTO_VERSION, role: ROLE_DETECTOR }.encode().unwrap()).unwrap();
    assert!(matches!(read_message(&mut s).unwrap(), Some(Message::Hello { .. })));
    s.write_all(&[6, 0, 0, 0, msg_type::DETECT_REQ, 1, 0, 1, 0, 4, 0]).unwrap();
    assert_eq!(code(&read_message(&mut s).unwrap().unwrap()), error_code::MALFORMED);
    assert!(read_message(&mut s).unwrap().is_none());
}

#[test]
fn remote_classifier_surfaces_error_replies() {
    let h = toy_server();
    let mut c = RemoteClassifier::connect(h.addr()).unwrap();
    let clip = Clip::new(vec![Frame::filled(0, 2, 2, [0; 3]); 5]);
    match c.classify(&clip) {
        Err(ModelError::Remote { code, .. }) => assert_eq!(code, error_code::FRAME_COUNT),
        other => panic!("{other:?}"),
    }
    let clip = Clip::new(vec![Frame::filled(0, 2, 2, [102, 0, 0]); 32]);
    assert_eq!(c.classify(&clip).unwrap().get(0), 0.4);
}

#[test]
fn remote_builtin_plugins_match_in_process_records() {
    let config = RunConfig {
        trials_per_sg: 3,
        scenarios: vec![ScenarioId::new(1).unwrap(), ScenarioId::new(3).unwrap()],
        fast_forward: true,
        ..RunConfig::default()
    };
    let local = TemplateModels::new(&config.world().unwrap(), &config).unwrap();
    let opts = RunOptions { workers: 2, dump_frames: None };
    let expected = run_trials(&config, &local, &opts).unwrap();

    let h = ServerHandle::spawn("127.0.0.1:0", builtin_server(&config).unwrap()).unwrap();
    let remote_config = RunConfig { model: ModelSource::Remote(h.addr().to_string()), ..config.clone() };
    let remote = RemoteModels::new(h.addr().to_string());
    let got = run_trials(&remote_config, &remote, &opts).unwrap();
    assert_eq!(got, expected);
}
