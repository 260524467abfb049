//! Shared test fixtures: a scripted HTTP stub server and a random generator of
//! valid decision trees.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use shepherd_core::fields::{FieldRequirement, FieldType, FieldValue};
use shepherd_core::tree::{Answer, DecisionTree, LeafNode, Node, QuestionNode};

/// How the stub answers a request path.
#[derive(Debug, Clone)]
pub enum Route {
    Status(u16),
    /// Redirect to another path on the same server.
    Redirect(u16, String),
    /// Reply 405 to HEAD, `status` to GET.
    NoHead(u16),
    /// Sleep before answering 200.
    Delay(Duration),
}

/// Minimal HTTP/1.1 server on 127.0.0.1 with one route table. Each
/// connection is handled on its own thread; unknown paths get 404.
pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
}

impl StubServer {
    pub fn start(routes: Vec<(&str, Route)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let routes: Arc<Vec<(String, Route)>> =
            Arc::new(routes.into_iter().map(|(p, r)| (p.to_string(), r)).collect());
        let stop_flag = stop.clone();
        thread::spawn(move || {
            for conn in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let routes = routes.clone();
                thread::spawn(move || {
                    let _ = serve(conn, &routes);
                });
            }
        });
        Self { addr, stop }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop so it sees the flag.
        let _ = TcpStream::connect(self.addr);
    }
}

fn serve(conn: TcpStream, routes: &[(String, Route)]) -> std::io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut conn = conn;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line)? == 0 {
            return Ok(());
        }
        let mut parts = request_line.split_whitespace();
        let method = parts.next().unwrap_or("").to_string();
        let path = parts.next().unwrap_or("/").to_string();
        loop {
            let mut header = String::new();
            if reader.read_line(&mut header)? == 0 || header == "\r\n" || header == "\n" {
                break;
            }
        }
        let route = routes.iter().find(|(p, _)| *p == path).map(|(_, r)| r.clone());
        let (status, location) = match route {
            None => (404, None),
            Some(Route::Status(s)) => (s, None),
            Some(Route::Redirect(s, to)) => (s, Some(to)),
            Some(Route::NoHead(s)) => (if method == "HEAD" { 405 } else { s }, None),
            Some(Route::Delay(d)) => {
                thread::sleep(d);
                (200, None)
            }
        };
        let body = if method == "HEAD" { "" } else { "stub\n" };
        let mut response = format!("HTTP/1.1 {status} Stub\r\nContent-Length: {}\r\n", if method == "HEAD" { 5 } else { body.len() });
        if let Some(to) = location {
            response.push_str(&format!("Location: {to}\r\n"));
        }
        response.push_str("\r\n");
        response.push_str(body);
        conn.write_all(response.as_bytes())?;
        conn.flush()?;
    }
}

const WORDS: [&str; 8] = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"];

/// A random valid tree with between 1 and `max_questions` questions, nodes
/// in shuffled declaration order. Prompts, labels and hints include characters
/// that need escaping in the text format.
pub fn random_tree<R: Rng>(rng: &mut R, max_questions: usize) -> DecisionTree {
    let budget = rng.random_range(1..=max_questions.max(1));
    let mut nodes = Vec::new();
    build_nodes(rng, "Q", &mut nodes, &mut 0, budget);
    nodes.shuffle(rng);
    DecisionTree {
        id: format!("random \"{}\" \\ tree", rng.random_range(0..1000)),
        version: rng.random_range(1..100),
        root: "Q".to_string(),
        nodes,
    }
}

fn build_nodes<R: Rng>(rng: &mut R, id: &str, nodes: &mut Vec<Node>, made: &mut usize, budget: usize) {
    *made += 1;
    let n = rng.random_range(2..=4);
    let mut answers = Vec::new();
    let mut children = Vec::new();
    for j in 0..n {
        let answer_id = format!("a{j}_{}", WORDS.choose(rng).unwrap());
        let label = if rng.random_bool(0.3) { answer_id.clone() } else { format!("Answer «{j}» \"{}\"", WORDS.choose(rng).unwrap()) };
        let is_question = *made + children.iter().filter(|(_, q)| *q).count() < budget && rng.random_bool(0.6);
        let child = format!("{}_{}{j}", id, if is_question { "Q" } else { "L" });
        answers.push(Answer { id: answer_id, label, target: child.clone() });
        children.push((child, is_question));
    }
    nodes.push(Node::Question(QuestionNode { id: id.to_string(), prompt: format!("Question {id}: \\ or \"{}\"?", WORDS.choose(rng).unwrap()), answers }));
    for (child, is_question) in children {
        if is_question && *made < budget {
            build_nodes(rng, &child, nodes, made, budget);
        } else {
            nodes.push(random_leaf(rng, &child));
        }
    }
}

fn random_leaf<R: Rng>(rng: &mut R, id: &str) -> Node {
    let count = rng.random_range(0..=4);
    let fields = (0..count)
        .map(|k| FieldRequirement {
            id: format!("f{k}_{}", WORDS.choose(rng).unwrap()),
            field_type: *FieldType::ALL.choose(rng).unwrap(),
            required: rng.random_bool(0.5),
            hint: rng.random_bool(0.5).then(|| format!("hint \"{k}\" ünïcode")),
        })
        .collect();
    Node::Leaf(LeafNode { id: id.to_string(), prescription: format!("Provide what {id} needs."), fields })
}

/// A syntactically valid value for a field of the given type.
pub fn sample_value(field_type: FieldType) -> FieldValue {
    match field_type {
        FieldType::Text => FieldValue::text("described in the lab handbook, section 2"),
        FieldType::Url => FieldValue::text("https://example.org/datasets/cohort-2021.csv"),
        FieldType::Path => FieldValue::text("preprocessing/clean.py"),
        FieldType::Version => FieldValue::text("2.4.1"),
        FieldType::KeyValue => FieldValue::Map([("seed".to_string(), "42".to_string())].into()),
    }
}

/// Values for every required field of `leaf`, nothing else.
pub fn minimal_fields(leaf: &LeafNode) -> Vec<(String, FieldValue)> {
    leaf.fields.iter().filter(|f| f.required).map(|f| (f.id.clone(), sample_value(f.field_type))).collect()
}

/// Brute force: try every answer-index sequence up to `max_depth`, walking
/// the raw node list, and record each distinct sequence that ends on a leaf.
pub fn brute_force_paths(tree: &DecisionTree, max_depth: usize) -> BTreeMap<Vec<String>, String> {
    let by_id: BTreeMap<&str, &Node> = tree.nodes.iter().map(|n| (n.id(), n)).collect();
    let widest = tree.nodes.iter().filter_map(Node::as_question).map(|q| q.answers.len()).max().unwrap_or(0);
    let mut found = BTreeMap::new();
    let mut indices = vec![0usize; max_depth];
    loop {
        let mut at = by_id[tree.root.as_str()];
        let mut answers = Vec::new();
        for &i in &indices {
            let Node::Question(q) = at else { break };
            let Some(a) = q.answers.get(i) else { break };
            answers.push(a.id.clone());
            at = by_id[a.target.as_str()];
        }
        if let Node::Leaf(l) = at {
            found.insert(answers, l.id.clone());
        }
        // odometer increment
        let mut k = max_depth;
        loop {
            if k == 0 {
                return found;
            }
            k -= 1;
            indices[k] += 1;
            if indices[k] < widest {
                break;
            }
            indices[k] = 0;
        }
    }
}

/// Tree sources with exactly one defect each: (expected code, source, line).
pub const MUTANTS: [(&str, &str, usize); 6] = [
    ("E_SYNTAX", "tree \"m\" version 1\nroot Q\nquestion Q \"p\" {\n  answer a -> L1\n  answer b L2\n}\nleaf L1 \"x\" {}\nleaf L2 \"y\" {}\n", 5),
    ("E_DUPLICATE_ID", "tree \"m\" version 1\nroot Q\nquestion Q \"p\" {\n  answer a -> L1\n  answer b -> L2\n}\nleaf L1 \"x\" {}\nleaf L2 \"y\" {}\nleaf L1 \"z\" {}\n", 9),
    ("E_DANGLING_TARGET", "tree \"m\" version 1\nroot Q\nquestion Q \"p\" {\n  answer a -> L1\n  answer b -> L3\n}\nleaf L1 \"x\" {}\n", 5),
    ("E_NO_ROOT", "tree \"m\" version 1\nroot R\nquestion Q \"p\" {\n  answer a -> L1\n  answer b -> L2\n}\nleaf L1 \"x\" {}\nleaf L2 \"y\" {}\n", 2),
    ("E_CYCLE", "tree \"m\" version 1\nroot Q\nquestion Q \"p\" {\n  answer a -> R\n  answer b -> L1\n}\nquestion R \"r\" {\n  answer c -> L2\n  answer d -> Q\n}\nleaf L1 \"x\" {}\nleaf L2 \"y\" {}\n", 9),
    ("E_UNREACHABLE", "tree \"m\" version 1\nroot Q\nquestion Q \"p\" {\n  answer a -> L1\n  answer b -> L2\n}\nleaf L1 \"x\" {}\nleaf L2 \"y\" {}\nleaf L3 \"z\" {}\n", 9),
];

/// Straightforward SHA-256 over an in-memory buffer, used as a reference
/// against the streaming implementation.
pub fn reference_sha256(data: &[u8]) -> String {
    const K: [u32; 64] = [
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
        0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
        0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
        0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
        0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
        0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
        0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
    ];
    let mut h: [u32; 8] =
        [0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19];
    let mut msg = data.to_vec();
    msg.push(0x80);
    while msg.len() % 64 != 56 {
        msg.push(0);
    }
    msg.extend_from_slice(&((data.len() as u64) * 8).to_be_bytes());
    for block in msg.chunks(64) {
        let mut w = [0u32; 64];
        for i in 0..16 {
            w[i] = u32::from_be_bytes(block[i * 4..i * 4 + 4].try_into().unwrap());
        }
        for i in 16..64 {
            let s0 = w[i - 15].rotate_right(7) ^ w[i - 15].rotate_right(18) ^ (w[i - 15] >> 3);
            let s1 = w[i - 2].rotate_right(17) ^ w[i - 2].rotate_right(19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16].wrapping_add(s0).wrapping_add(w[i - 7]).wrapping_add(s1);
        }
        let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut hh] = h;
        for i in 0..64 {
            let s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
            let ch = (e & f) ^ (!e & g);
            let t1 = hh.wrapping_add(s1).wrapping_add(ch).wrapping_add(K[i]).wrapping_add(w[i]);
            let s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
            let maj = (a & b) ^ (a & c) ^ (b & c);
            let t2 = s0.wrapping_add(maj);
            hh = g;
            g = f;
            f = e;
            e = d.wrapping_add(t1);
            d = c;
            c = b;
            b = a;
            a = t1.wrapping_add(t2);
        }
        for (slot, v) in h.iter_mut().zip([a, b, c, d, e, f, g, hh]) {
            *slot = slot.wrapping_add(v);
        }
    }
    h.iter().map(|v| format!("{v:08x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_digest_known_vectors() {
        assert_eq!(reference_sha256(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(reference_sha256(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(
            reference_sha256(b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"),
            "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1"
        );
    }
}
