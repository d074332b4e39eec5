//! The in-process bus and the TCP link must behave the same from a party's
//! point of view.

use std::net::TcpListener;
use std::thread;

use ctel_core::rng::{SeedSchedule, StreamLabel};
use ctel_core::transport::golden::corrupt_frames;
use ctel_core::transport::{Channel, InProcessBus, Message, PeerLink, TcpLink, TransportError};
use ctel_core::verification::random_message;
use ctel_core::Party;

fn messages(seed: u64, n: u64) -> Vec<Message> {
    let schedule = SeedSchedule::new(seed);
    (0..n).map(|i| random_message(&mut schedule.substream(i, StreamLabel::Harness))).collect()
}

fn inprocess_pair() -> (Box<dyn Channel + Send>, Box<dyn Channel + Send>) {
    let bus = InProcessBus::new();
    let a = PeerLink {
        endpoint: bus.endpoint(Party::Alice),
        peer: Party::Bob,
    };
    let b = PeerLink {
        endpoint: bus.endpoint(Party::Bob),
        peer: Party::Alice,
    };
    (Box::new(a), Box::new(b))
}

fn tcp_pair() -> (Box<dyn Channel + Send>, Box<dyn Channel + Send>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let accept = thread::spawn(move || TcpLink::from_stream(listener.accept().unwrap().0).unwrap());
    let a = TcpLink::connect(addr).unwrap();
    (Box::new(a), Box::new(accept.join().unwrap()))
}

/// Sends a batch each way, then one corrupt frame; returns what the far end
/// saw.
fn exercise(
    (mut a, mut b): (Box<dyn Channel + Send>, Box<dyn Channel + Send>),
) -> (Vec<Message>, Vec<Message>, String) {
    let out = messages(11, 300);
    let back = messages(12, 300);
    let sent = out.clone();
    let writer = thread::spawn(move || {
        for m in &sent {
            a.send_message(m).unwrap();
        }
        a
    });
    let got_b: Vec<Message> = (0..out.len()).map(|_| b.recv_message().unwrap()).collect();
    let mut a = writer.join().unwrap();
    for m in &back {
        b.send_message(m).unwrap();
    }
    let got_a: Vec<Message> = (0..back.len()).map(|_| a.recv_message().unwrap()).collect();

    let bad = corrupt_frames().into_iter().find(|c| c.name == "version_0x02").unwrap();
    a.send_frame(&bad.bytes).unwrap();
    let err = match b.recv_message() {
        Err(TransportError::Frame(e)) => format!("{e}"),
        other => panic!("corrupt frame produced {other:?}"),
    };
    assert_eq!(got_b, out);
    assert_eq!(got_a, back);
    (got_b, got_a, err)
}

#[test]
fn transports_agree() {
    let inproc = exercise(inprocess_pair());
    let tcp = exercise(tcp_pair());
    assert_eq!(inproc, tcp);
}

#[test]
fn closed_bus_reports_closed() {
    let bus = InProcessBus::new();
    let mut b = PeerLink {
        endpoint: bus.endpoint(Party::Bob),
        peer: Party::Alice,
    };
    bus.close();
    assert!(matches!(b.recv_message(), Err(TransportError::Closed)));
}

#[test]
fn dropped_tcp_peer_reports_closed() {
    let (a, mut b) = tcp_pair();
    drop(a);
    assert!(matches!(b.recv_message(), Err(TransportError::Closed)));
}

#[test]
fn bus_rejects_frames_from_the_wrong_peer() {
    let bus = InProcessBus::new();
    let charlie = bus.endpoint(Party::Charlie);
    let mut b = PeerLink {
        endpoint: bus.endpoint(Party::Bob),
        peer: Party::Alice,
    };
    charlie.send(Party::Bob, &messages(1, 1)[0]).unwrap();
    assert!(matches!(b.recv_message(), Err(TransportError::Protocol(_))));
}
